//! Line-oriented fault-tree file format.
//!
//! ```text
//! # comment
//! top COLLISION "Collision"
//! event SF1 basic "Camera Failure" subsystem=sensors rate=6.36
//! event SENSORS intermediate "Sensor failure" subsystem=sensors
//! gate SENSORS = AND(SF1, SF2)
//! ```
//!
//! Statements may appear in any order; references are resolved once the
//! whole document has been read.

use std::fmt::Write as _;

use indexmap::IndexMap;
use thiserror::Error;

use super::{Event, EventId, EventKind, FaultTree, Gate, GateKind, ModelError};
use crate::quant::FailureRate;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: duplicate event id {id}")]
    DuplicateEvent { id: String, line: usize },
    #[error("line {line}: duplicate gate for {id}")]
    DuplicateGate { id: String, line: usize },
    #[error("line {line}: unknown reference to undeclared event {id}")]
    UnknownReference { id: String, line: usize },
    #[error("missing top declaration")]
    MissingTop,
    #[error("invalid JSON fault tree: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Word(String),
    Str(String),
    Sym(char),
}

struct Lexed {
    token: Token,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex_line(text: &str, line: usize) -> Result<Vec<Lexed>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(at, c)) = chars.peek() {
        let column = text[..at].chars().count() + 1;
        match c {
            '#' => break,
            c if c.is_whitespace() => {
                chars.next();
            }
            '=' | '(' | ')' | ',' => {
                chars.next();
                out.push(Lexed {
                    token: Token::Sym(c),
                    column,
                });
            }
            '"' => {
                chars.next();
                let mut s = String::new();
                let mut closed = false;
                while let Some((_, c)) = chars.next() {
                    match c {
                        '"' => {
                            closed = true;
                            break;
                        }
                        '\\' => match chars.next() {
                            Some((_, e @ ('"' | '\\'))) => s.push(e),
                            Some((_, 'n')) => s.push('\n'),
                            _ => return Err(syntax(line, column, "bad escape in label")),
                        },
                        c => s.push(c),
                    }
                }
                if !closed {
                    return Err(syntax(line, column, "unterminated label"));
                }
                out.push(Lexed {
                    token: Token::Str(s),
                    column,
                });
            }
            _ => {
                let mut s = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if c.is_whitespace() || matches!(c, '=' | '(' | ')' | ',' | '"' | '#') {
                        break;
                    }
                    s.push(c);
                    chars.next();
                }
                out.push(Lexed {
                    token: Token::Word(s),
                    column,
                });
            }
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    tokens: &'a [Lexed],
    pos: usize,
    line: usize,
    end_column: usize,
}

impl<'a> Cursor<'a> {
    fn column(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map_or(self.end_column, |t| t.column)
    }

    fn next(&mut self) -> Option<&'a Lexed> {
        let t = self.tokens.get(self.pos);
        self.pos += 1;
        t
    }

    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos).map(|t| &t.token)
    }

    fn word(&mut self, what: &str) -> Result<(String, usize), ParseError> {
        let column = self.column();
        match self.next() {
            Some(Lexed {
                token: Token::Word(w),
                column,
            }) => Ok((w.clone(), *column)),
            _ => Err(syntax(self.line, column, format!("expected {what}"))),
        }
    }

    fn id(&mut self) -> Result<EventId, ParseError> {
        let (w, column) = self.word("event id")?;
        EventId::new(w.clone())
            .map_err(|_| syntax(self.line, column, format!("invalid event id {w:?}")))
    }

    fn label(&mut self) -> Result<String, ParseError> {
        let column = self.column();
        match self.next() {
            Some(Lexed {
                token: Token::Str(s),
                ..
            }) => Ok(s.clone()),
            _ => Err(syntax(self.line, column, "expected quoted label")),
        }
    }

    fn sym(&mut self, c: char) -> Result<(), ParseError> {
        let column = self.column();
        match self.next() {
            Some(Lexed {
                token: Token::Sym(s),
                ..
            }) if *s == c => Ok(()),
            _ => Err(syntax(self.line, column, format!("expected '{c}'"))),
        }
    }

    fn finish(&self) -> Result<(), ParseError> {
        if self.pos < self.tokens.len() {
            Err(syntax(self.line, self.column(), "unexpected trailing input"))
        } else {
            Ok(())
        }
    }
}

/// Parses a document in the text format.
pub fn parse_fault_tree(source: &str) -> Result<FaultTree, ParseError> {
    let mut top: Option<EventId> = None;
    let mut events: IndexMap<EventId, Event> = IndexMap::new();
    let mut gates: IndexMap<EventId, Gate> = IndexMap::new();
    let mut gate_lines: IndexMap<EventId, usize> = IndexMap::new();

    for (n, raw) in source.lines().enumerate() {
        let line = n + 1;
        let tokens = lex_line(raw, line)?;
        if tokens.is_empty() {
            continue;
        }
        let mut cur = Cursor {
            tokens: &tokens,
            pos: 0,
            line,
            end_column: raw.chars().count() + 1,
        };
        let (keyword, column) = cur.word("statement keyword")?;
        match keyword.as_str() {
            "top" => {
                let id = cur.id()?;
                let label = cur.label()?;
                cur.finish()?;
                if top.is_some() {
                    return Err(syntax(line, column, "second top declaration"));
                }
                if events.contains_key(&id) {
                    return Err(ParseError::DuplicateEvent {
                        id: id.to_string(),
                        line,
                    });
                }
                events.insert(id.clone(), Event::top(label));
                top = Some(id);
            }
            "event" => {
                let id = cur.id()?;
                let (kind_word, kind_col) = cur.word("event kind")?;
                let kind = match kind_word.as_str() {
                    "basic" => EventKind::Basic,
                    "intermediate" => EventKind::Intermediate,
                    other => {
                        return Err(syntax(
                            line,
                            kind_col,
                            format!("unknown event kind {other:?} (expected basic or intermediate)"),
                        ))
                    }
                };
                let mut event = Event {
                    kind,
                    label: cur.label()?,
                    subsystem: None,
                    rate: None,
                };
                while cur.peek().is_some() {
                    let (key, key_col) = cur.word("attribute")?;
                    cur.sym('=')?;
                    let (value, value_col) = cur.word("attribute value")?;
                    match key.as_str() {
                        "subsystem" if event.subsystem.is_none() => {
                            if !is_valid_tag(&value) {
                                return Err(syntax(line, value_col, format!("invalid subsystem tag {value:?}")));
                            }
                            event.subsystem = Some(value);
                        }
                        "rate" if kind == EventKind::Basic && event.rate.is_none() => {
                            let rate = value
                                .parse::<f64>()
                                .ok()
                                .and_then(|v| FailureRate::new(v).ok())
                                .ok_or_else(|| {
                                    syntax(line, value_col, format!("invalid FIT rate {value:?}"))
                                })?;
                            event.rate = Some(rate);
                        }
                        _ => {
                            return Err(syntax(line, key_col, format!("unexpected attribute {key:?}")))
                        }
                    }
                }
                if events.contains_key(&id) {
                    return Err(ParseError::DuplicateEvent {
                        id: id.to_string(),
                        line,
                    });
                }
                events.insert(id, event);
            }
            "gate" => {
                let id = cur.id()?;
                cur.sym('=')?;
                let (kind_word, kind_col) = cur.word("AND or OR")?;
                let kind = match kind_word.as_str() {
                    "AND" => GateKind::And,
                    "OR" => GateKind::Or,
                    other => {
                        return Err(syntax(line, kind_col, format!("unknown gate {other:?} (expected AND or OR)")))
                    }
                };
                cur.sym('(')?;
                let mut inputs = vec![cur.id()?];
                loop {
                    let column = cur.column();
                    match cur.next().map(|t| &t.token) {
                        Some(Token::Sym(',')) => inputs.push(cur.id()?),
                        Some(Token::Sym(')')) => break,
                        _ => return Err(syntax(line, column, "expected ',' or ')'")),
                    }
                }
                cur.finish()?;
                if gates.contains_key(&id) {
                    return Err(ParseError::DuplicateGate {
                        id: id.to_string(),
                        line,
                    });
                }
                gate_lines.insert(id.clone(), line);
                gates.insert(id, Gate { kind, inputs });
            }
            other => return Err(syntax(line, column, format!("unknown statement {other:?}"))),
        }
    }

    let top = top.ok_or(ParseError::MissingTop)?;
    FaultTree::new(top, events, gates).map_err(|e| match e {
        ModelError::UnknownReference { gate, input } => ParseError::UnknownReference {
            id: input.to_string(),
            line: gate_lines[&gate],
        },
        ModelError::GateWithoutEvent(gate) => ParseError::UnknownReference {
            id: gate.to_string(),
            line: gate_lines[&gate],
        },
        ModelError::MissingTop(_) => ParseError::MissingTop,
        other => ParseError::Json(other.to_string()),
    })
}

/// Parses the JSON representation (`top`, `events`, `gates`).
pub fn parse_fault_tree_json(source: &str) -> Result<FaultTree, ParseError> {
    serde_json::from_str(source).map_err(|e| ParseError::Json(e.to_string()))
}

fn is_valid_tag(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn quote(label: &str) -> String {
    let mut s = String::with_capacity(label.len() + 2);
    s.push('"');
    for c in label.chars() {
        match c {
            '"' => s.push_str("\\\""),
            '\\' => s.push_str("\\\\"),
            '\n' => s.push_str("\\n"),
            c => s.push(c),
        }
    }
    s.push('"');
    s
}

pub(super) fn write_text(tree: &FaultTree) -> String {
    let mut out = String::new();
    let top = &tree.events[tree.top()];
    writeln!(out, "top {} {}", tree.top(), quote(&top.label)).unwrap();
    for (id, event) in tree.events() {
        if id == tree.top() {
            continue;
        }
        // A second top-kind event has no statement of its own; it is
        // written as intermediate so the document still parses.
        let kind = match event.kind {
            EventKind::Basic => "basic",
            _ => "intermediate",
        };
        write!(out, "event {id} {kind} {}", quote(&event.label)).unwrap();
        if let Some(tag) = &event.subsystem {
            write!(out, " subsystem={tag}").unwrap();
        }
        if let (EventKind::Basic, Some(rate)) = (event.kind, event.rate) {
            write!(out, " rate={}", rate.fit()).unwrap();
        }
        out.push('\n');
    }
    for (id, gate) in tree.gates() {
        let inputs: Vec<&str> = gate.inputs.iter().map(EventId::as_str).collect();
        writeln!(out, "gate {id} = {}({})", gate.kind, inputs.join(", ")).unwrap();
    }
    out
}
