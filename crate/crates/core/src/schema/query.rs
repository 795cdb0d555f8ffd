use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lexer::{tokenize, Tok, Token, TokenStream};

/// Scalar argument literal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl Literal {
    pub fn kind(&self) -> &'static str {
        match self {
            Literal::Text(_) => "String",
            Literal::Int(_) => "Int",
            Literal::Float(_) => "Float",
            Literal::Bool(_) => "Boolean",
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Literal::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn from_json(value: &serde_json::Value) -> Option<Self> {
        match value {
            serde_json::Value::String(s) => Some(Literal::Text(s.clone())),
            serde_json::Value::Bool(b) => Some(Literal::Bool(*b)),
            serde_json::Value::Number(n) => n
                .as_i64()
                .map(Literal::Int)
                .or_else(|| n.as_f64().map(Literal::Float)),
            _ => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Literal::Text(s) => serde_json::Value::String(s.clone()),
            Literal::Int(i) => (*i).into(),
            Literal::Float(x) => (*x).into(),
            Literal::Bool(b) => (*b).into(),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Text(s) => {
                f.write_char('"')?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\r' => f.write_str("\\r")?,
                        '\t' => f.write_str("\\t")?,
                        c if c.is_control() => write!(f, "\\u{:04x}", c as u32)?,
                        c => f.write_char(c)?,
                    }
                }
                f.write_char('"')
            }
            Literal::Int(i) => write!(f, "{i}"),
            // Debug keeps a fractional part so the value re-lexes as a float
            Literal::Float(x) => write!(f, "{x:?}"),
            Literal::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSelection {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alias: Option<String>,
    pub name: String,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub arguments: Vec<(String, Literal)>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub selections: Vec<FieldSelection>,
}

impl FieldSelection {
    pub fn new(name: &str) -> Self {
        Self {
            alias: None,
            name: name.to_string(),
            arguments: Vec::new(),
            selections: Vec::new(),
        }
    }

    pub fn with_arg(mut self, name: &str, value: Literal) -> Self {
        self.arguments.push((name.to_string(), value));
        self
    }

    pub fn with_fields<'a>(mut self, fields: impl IntoIterator<Item = &'a str>) -> Self {
        self.selections
            .extend(fields.into_iter().map(FieldSelection::new));
        self
    }

    /// The key this selection occupies in a response: alias when set.
    pub fn response_key(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.name)
    }

    pub fn argument(&self, name: &str) -> Option<&Literal> {
        self.arguments.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    fn depth(&self) -> usize {
        1 + self.selections.iter().map(Self::depth).max().unwrap_or(0)
    }

    fn render(&self, out: &mut String, indent: usize) {
        let pad = "  ".repeat(indent);
        out.push_str(&pad);
        if let Some(alias) = &self.alias {
            let _ = write!(out, "{alias}: ");
        }
        out.push_str(&self.name);
        if !self.arguments.is_empty() {
            let args: Vec<String> = self
                .arguments
                .iter()
                .map(|(n, v)| format!("{n}: {v}"))
                .collect();
            let _ = write!(out, "({})", args.join(", "));
        }
        if !self.selections.is_empty() {
            out.push_str(" {\n");
            for s in &self.selections {
                s.render(out, indent + 1);
            }
            out.push_str(&pad);
            out.push('}');
        }
        out.push('\n');
    }
}

/// A single parsed query operation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryDocument {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub operation_name: Option<String>,
    pub selections: Vec<FieldSelection>,
}

impl QueryDocument {
    pub fn new(selections: Vec<FieldSelection>) -> Self {
        Self {
            operation_name: None,
            selections,
        }
    }

    pub fn depth(&self) -> usize {
        self.selections
            .iter()
            .map(FieldSelection::depth)
            .max()
            .unwrap_or(0)
    }
}

impl fmt::Display for QueryDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::from("query ");
        if let Some(name) = &self.operation_name {
            out.push_str(name);
            out.push(' ');
        }
        out.push_str("{\n");
        for s in &self.selections {
            s.render(&mut out, 1);
        }
        out.push('}');
        f.write_str(&out)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueryError {
    #[error("SyntaxError at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("UnsupportedConstruct at {line}:{col}: {construct} are not supported")]
    UnsupportedConstruct {
        construct: String,
        line: usize,
        col: usize,
    },
}

fn syntax(t: &Token, message: impl Into<String>) -> QueryError {
    QueryError::Syntax {
        line: t.line,
        col: t.col,
        message: message.into(),
    }
}

fn unsupported(t: &Token, construct: &str) -> QueryError {
    QueryError::UnsupportedConstruct {
        construct: construct.to_string(),
        line: t.line,
        col: t.col,
    }
}

fn parse_value(ts: &mut TokenStream) -> Result<Literal, QueryError> {
    let t = ts.next();
    match &t.tok {
        Tok::Str(s) => Ok(Literal::Text(s.clone())),
        Tok::Int(i) => Ok(Literal::Int(*i)),
        Tok::Float(x) => Ok(Literal::Float(*x)),
        Tok::Name(n) if n == "true" => Ok(Literal::Bool(true)),
        Tok::Name(n) if n == "false" => Ok(Literal::Bool(false)),
        Tok::Name(n) if n == "null" => Err(unsupported(&t, "null literals")),
        Tok::Name(_) => Err(unsupported(&t, "enum values")),
        Tok::Punct('$') => Err(unsupported(&t, "variables")),
        Tok::Punct('[') | Tok::Punct('{') => Err(unsupported(&t, "list and object literals")),
        other => Err(syntax(&t, format!("expected value, found {other}"))),
    }
}

fn parse_selection_set(ts: &mut TokenStream) -> Result<Vec<FieldSelection>, QueryError> {
    let open = ts.next();
    if open.tok != Tok::Punct('{') {
        return Err(syntax(&open, format!("expected `{{`, found {}", open.tok)));
    }
    let mut out = Vec::new();
    loop {
        let t = ts.peek().clone();
        match &t.tok {
            Tok::Punct('}') => {
                ts.next();
                return Ok(out);
            }
            Tok::Spread => return Err(unsupported(&t, "fragments")),
            Tok::Name(_) => out.push(parse_field(ts)?),
            other => return Err(syntax(&t, format!("expected field, found {other}"))),
        }
    }
}

fn parse_field(ts: &mut TokenStream) -> Result<FieldSelection, QueryError> {
    let Tok::Name(first) = ts.next().tok else {
        unreachable!("caller checked for a name")
    };
    let (alias, name) = if ts.at_punct(':') {
        ts.next();
        let t = ts.next();
        match &t.tok {
            Tok::Name(n) => (Some(first), n.clone()),
            other => return Err(syntax(&t, format!("expected field name after alias, found {other}"))),
        }
    } else {
        (None, first)
    };
    let mut arguments = Vec::new();
    if ts.at_punct('(') {
        ts.next();
        while !ts.at_punct(')') {
            let t = ts.next();
            let arg = match &t.tok {
                Tok::Name(n) => n.clone(),
                Tok::Eof => return Err(syntax(&t, "unterminated argument list")),
                other => return Err(syntax(&t, format!("expected argument name, found {other}"))),
            };
            let colon = ts.next();
            if colon.tok != Tok::Punct(':') {
                return Err(syntax(&colon, format!("expected `:`, found {}", colon.tok)));
            }
            arguments.push((arg, parse_value(ts)?));
        }
        let close = ts.next();
        if arguments.is_empty() {
            return Err(syntax(&close, "empty argument list"));
        }
    }
    if ts.at_punct('@') {
        return Err(unsupported(ts.peek(), "directives"));
    }
    let selections = if ts.at_punct('{') {
        parse_selection_set(ts)?
    } else {
        Vec::new()
    };
    Ok(FieldSelection {
        alias,
        name,
        arguments,
        selections,
    })
}

/// Parses a single query operation (named, anonymous or shorthand).
pub fn parse_query(query_text: &str) -> Result<QueryDocument, QueryError> {
    let tokens = tokenize(query_text).map_err(|e| QueryError::Syntax {
        line: e.line,
        col: e.col,
        message: e.message,
    })?;
    let mut ts = TokenStream::new(tokens);
    let start = ts.peek().clone();
    let operation_name = match &start.tok {
        Tok::Punct('{') => None,
        Tok::Name(kw) if kw == "query" => {
            ts.next();
            let name = match &ts.peek().tok {
                Tok::Name(n) => {
                    let n = n.clone();
                    ts.next();
                    Some(n)
                }
                _ => None,
            };
            if ts.at_punct('(') {
                return Err(unsupported(ts.peek(), "variables"));
            }
            if ts.at_punct('@') {
                return Err(unsupported(ts.peek(), "directives"));
            }
            name
        }
        Tok::Name(kw) if kw == "mutation" => return Err(unsupported(&start, "mutations")),
        Tok::Name(kw) if kw == "subscription" => return Err(unsupported(&start, "subscriptions")),
        Tok::Name(kw) if kw == "fragment" => return Err(unsupported(&start, "fragments")),
        Tok::Eof => return Err(syntax(&start, "empty document")),
        other => return Err(syntax(&start, format!("expected `query` or `{{`, found {other}"))),
    };
    let selections = parse_selection_set(&mut ts)?;
    let rest = ts.peek().clone();
    match &rest.tok {
        Tok::Eof => Ok(QueryDocument {
            operation_name,
            selections,
        }),
        Tok::Name(kw) if kw == "fragment" => Err(unsupported(&rest, "fragments")),
        Tok::Name(_) | Tok::Punct('{') => Err(unsupported(&rest, "multiple operations")),
        other => Err(syntax(&rest, format!("unexpected {other} after operation"))),
    }
}
