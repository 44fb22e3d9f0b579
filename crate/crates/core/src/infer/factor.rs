//! Sparse factors over binary variables.
//!
//! Only non-zero rows are stored, which keeps deterministic gate tables at
//! one row per parent configuration. Keys pack variable states as bits, bit
//! `j` holding the state of `vars[j]`.

use std::collections::BTreeMap;

use super::InferError;

pub const MAX_FACTOR_ROWS: usize = 1 << 20;
const MAX_FACTOR_VARS: usize = 64;

/// A factor whose largest entry falls below this is renormalized by an
/// exact power of two.
const RESCALE_BELOW: f64 = 5.421_010_862_427_522e-20; // 2^-64

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Factor {
    /// Sorted ascending, no duplicates.
    pub vars: Vec<usize>,
    /// Sorted by key, values non-zero.
    pub rows: Vec<(u64, f64)>,
    /// Represented value = stored value × 2^scale.
    pub scale: i32,
}

fn bit(key: u64, at: usize) -> bool {
    (key >> at) & 1 == 1
}

impl Factor {
    pub fn constant(value: f64) -> Self {
        Self {
            vars: Vec::new(),
            rows: if value != 0.0 { vec![(0, value)] } else { Vec::new() },
            scale: 0,
        }
    }

    /// Builds a factor from a function over assignments to `scope`.
    ///
    /// `scope` may repeat a variable; assignments that give a repeated
    /// variable two different states are skipped.
    pub fn tabulate(scope: &[usize], value: impl Fn(&[bool]) -> f64) -> Result<Self, InferError> {
        let mut vars = scope.to_vec();
        vars.sort_unstable();
        vars.dedup();
        if vars.len() > MAX_FACTOR_VARS || (1u128 << scope.len()) > MAX_FACTOR_ROWS as u128 {
            return Err(InferError::FactorTooLarge {
                rows: 1u128 << scope.len(),
                cap: MAX_FACTOR_ROWS,
            });
        }
        let positions: Vec<usize> = scope
            .iter()
            .map(|v| vars.binary_search(v).unwrap())
            .collect();
        let mut rows = BTreeMap::new();
        let mut states = vec![false; scope.len()];
        'configs: for config in 0u64..1 << scope.len() {
            let mut key = 0u64;
            let mut fixed = 0u64;
            for (j, &pos) in positions.iter().enumerate() {
                let on = bit(config, scope.len() - 1 - j);
                states[j] = on;
                if bit(fixed, pos) && bit(key, pos) != on {
                    continue 'configs;
                }
                fixed |= 1 << pos;
                key |= u64::from(on) << pos;
            }
            let v = value(&states);
            if v != 0.0 {
                rows.insert(key, v);
            }
        }
        let mut out = Self {
            vars,
            rows: rows.into_iter().collect(),
            scale: 0,
        };
        out.rescale();
        Ok(out)
    }

    pub fn contains(&self, var: usize) -> bool {
        self.vars.binary_search(&var).is_ok()
    }

    /// Keeps rows where `var` has `state` and drops `var` from the scope.
    pub fn restrict(&self, var: usize, state: bool) -> Self {
        let Ok(at) = self.vars.binary_search(&var) else {
            return self.clone();
        };
        let mut vars = self.vars.clone();
        vars.remove(at);
        let rows = self
            .rows
            .iter()
            .filter(|(k, _)| bit(*k, at) == state)
            .map(|&(k, v)| (drop_bit(k, at), v))
            .collect();
        Self {
            vars,
            rows,
            scale: self.scale,
        }
    }

    pub fn product(&self, other: &Factor) -> Result<Self, InferError> {
        let mut vars: Vec<usize> = self.vars.iter().chain(&other.vars).copied().collect();
        vars.sort_unstable();
        vars.dedup();
        if vars.len() > MAX_FACTOR_VARS {
            return Err(InferError::FactorTooLarge {
                rows: u128::MAX,
                cap: MAX_FACTOR_ROWS,
            });
        }
        let place = |of: &[usize]| -> Vec<usize> {
            of.iter().map(|v| vars.binary_search(v).unwrap()).collect()
        };
        let self_pos = place(&self.vars);
        let other_pos = place(&other.vars);
        let spread = |key: u64, pos: &[usize]| -> u64 {
            pos.iter()
                .enumerate()
                .fold(0u64, |acc, (j, &p)| acc | (((key >> j) & 1) << p))
        };
        let shared_mask = spread(u64::MAX, &self_pos) & spread(u64::MAX, &other_pos);

        let mut index: BTreeMap<u64, Vec<(u64, f64)>> = BTreeMap::new();
        for &(k, v) in &other.rows {
            let wide = spread(k, &other_pos);
            index.entry(wide & shared_mask).or_default().push((wide, v));
        }
        let mut rows = Vec::new();
        for &(k, v) in &self.rows {
            let wide = spread(k, &self_pos);
            if let Some(matches) = index.get(&(wide & shared_mask)) {
                if rows.len() + matches.len() > MAX_FACTOR_ROWS {
                    return Err(InferError::FactorTooLarge {
                        rows: (rows.len() + matches.len()) as u128,
                        cap: MAX_FACTOR_ROWS,
                    });
                }
                for &(ok, ov) in matches {
                    let value = v * ov;
                    if value != 0.0 {
                        rows.push((wide | ok, value));
                    }
                }
            }
        }
        rows.sort_unstable_by_key(|&(k, _)| k);
        let mut out = Self {
            vars,
            rows,
            scale: self.scale + other.scale,
        };
        out.rescale();
        Ok(out)
    }

    /// Sums `var` out of the factor.
    pub fn sum_out(&self, var: usize) -> Self {
        let Ok(at) = self.vars.binary_search(&var) else {
            return self.clone();
        };
        let mut vars = self.vars.clone();
        vars.remove(at);
        // Each output row receives at most two terms.
        let mut acc: BTreeMap<u64, f64> = BTreeMap::new();
        for &(k, v) in &self.rows {
            *acc.entry(drop_bit(k, at)).or_insert(0.0) += v;
        }
        let mut out = Self {
            vars,
            rows: acc.into_iter().filter(|&(_, v)| v != 0.0).collect(),
            scale: self.scale,
        };
        out.rescale();
        out
    }

    fn rescale(&mut self) {
        let max = self.rows.iter().fold(0.0f64, |m, &(_, v)| m.max(v));
        if max > 0.0 && max < RESCALE_BELOW {
            // Bring the maximum into [0.5, 1).
            let shift = -max.log2().floor() as i32 - 1;
            let factor = 2f64.powi(shift);
            for (_, v) in &mut self.rows {
                *v *= factor;
            }
            self.scale -= shift;
        }
    }

    /// Stored value for a full key, zero when the row is elided.
    pub fn get(&self, key: u64) -> f64 {
        self.rows
            .binary_search_by_key(&key, |&(k, _)| k)
            .map_or(0.0, |i| self.rows[i].1)
    }
}

fn drop_bit(key: u64, at: usize) -> u64 {
    let low = key & ((1u64 << at) - 1);
    let high = (key >> (at + 1)) << at;
    low | high
}
