//! Tokenizer shared by the SDL and query parsers.
//!
//! Commas are insignificant and `#` starts a comment that runs to end of
//! line, as in GraphQL. Positions are 1-based line/column in characters.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Name(String),
    Punct(char),
    Spread,
    Str(String),
    Int(i64),
    Float(f64),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Name(n) => write!(f, "name `{n}`"),
            Tok::Punct(c) => write!(f, "`{c}`"),
            Tok::Spread => f.write_str("`...`"),
            Tok::Str(_) => f.write_str("string literal"),
            Tok::Int(i) => write!(f, "integer `{i}`"),
            Tok::Float(x) => write!(f, "number `{x:?}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LexError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn eat(&mut self, want: char) -> bool {
        if self.peek() == Some(want) {
            self.bump();
            true
        } else {
            false
        }
    }
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, LexError> {
    let mut cur = Cursor {
        chars: text.chars().peekable(),
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        // skip ignored tokens
        while let Some(c) = cur.peek() {
            if c == '#' {
                while let Some(c) = cur.peek() {
                    if c == '\n' {
                        break;
                    }
                    cur.bump();
                }
            } else if c.is_whitespace() || c == ',' || c == '\u{feff}' {
                cur.bump();
            } else {
                break;
            }
        }
        let (line, col) = (cur.line, cur.col);
        let err = |message: String| LexError { line, col, message };
        let Some(c) = cur.peek() else {
            out.push(Token {
                tok: Tok::Eof,
                line,
                col,
            });
            return Ok(out);
        };
        let tok = match c {
            '{' | '}' | '(' | ')' | '[' | ']' | ':' | '!' | '=' | '@' | '$' | '|' | '&' => {
                cur.bump();
                Tok::Punct(c)
            }
            '.' => {
                cur.bump();
                if cur.eat('.') && cur.eat('.') {
                    Tok::Spread
                } else {
                    return Err(err("unexpected `.`".into()));
                }
            }
            '"' => lex_string(&mut cur).map_err(err)?,
            '-' | '0'..='9' => lex_number(&mut cur).map_err(err)?,
            c if c == '_' || c.is_ascii_alphabetic() => {
                let mut name = String::new();
                while let Some(c) = cur.peek() {
                    if c == '_' || c.is_ascii_alphanumeric() {
                        name.push(c);
                        cur.bump();
                    } else {
                        break;
                    }
                }
                Tok::Name(name)
            }
            other => return Err(err(format!("unexpected character `{other}`"))),
        };
        out.push(Token { tok, line, col });
    }
}

fn lex_string(cur: &mut Cursor<'_>) -> Result<Tok, String> {
    cur.bump();
    if cur.eat('"') {
        if cur.eat('"') {
            return lex_block_string(cur);
        }
        return Ok(Tok::Str(String::new()));
    }
    let mut s = String::new();
    loop {
        match cur.bump() {
            None | Some('\n') => return Err("unterminated string".into()),
            Some('"') => return Ok(Tok::Str(s)),
            Some('\\') => {
                let esc = cur.bump().ok_or("unterminated string")?;
                match esc {
                    '"' => s.push('"'),
                    '\\' => s.push('\\'),
                    '/' => s.push('/'),
                    'b' => s.push('\u{8}'),
                    'f' => s.push('\u{c}'),
                    'n' => s.push('\n'),
                    'r' => s.push('\r'),
                    't' => s.push('\t'),
                    'u' => {
                        let mut hex = String::new();
                        for _ in 0..4 {
                            hex.push(cur.bump().ok_or("unterminated unicode escape")?);
                        }
                        let code = u32::from_str_radix(&hex, 16)
                            .map_err(|_| format!("invalid unicode escape `\\u{hex}`"))?;
                        s.push(char::from_u32(code).ok_or("invalid unicode scalar")?);
                    }
                    other => return Err(format!("invalid escape `\\{other}`")),
                }
            }
            Some(c) => s.push(c),
        }
    }
}

fn lex_block_string(cur: &mut Cursor<'_>) -> Result<Tok, String> {
    let mut raw = String::new();
    loop {
        match cur.bump() {
            None => return Err("unterminated block string".into()),
            Some('"') if cur.eat('"') => {
                if cur.eat('"') {
                    break;
                }
                raw.push_str("\"\"");
            }
            Some(c) => raw.push(c),
        }
    }
    let lines: Vec<&str> = raw.lines().map(str::trim).collect();
    Ok(Tok::Str(lines.join("\n").trim().to_string()))
}

fn lex_number(cur: &mut Cursor<'_>) -> Result<Tok, String> {
    let mut text = String::new();
    if cur.eat('-') {
        text.push('-');
    }
    let mut digits = 0;
    while let Some(c) = cur.peek().filter(char::is_ascii_digit) {
        text.push(c);
        cur.bump();
        digits += 1;
    }
    if digits == 0 {
        return Err("expected digit".into());
    }
    if digits > 1 && text.trim_start_matches('-').starts_with('0') {
        return Err(format!("invalid number `{text}`: leading zero"));
    }
    let mut is_float = false;
    if cur.peek() == Some('.') {
        is_float = true;
        text.push('.');
        cur.bump();
        let mut frac = 0;
        while let Some(c) = cur.peek().filter(char::is_ascii_digit) {
            text.push(c);
            cur.bump();
            frac += 1;
        }
        if frac == 0 {
            return Err(format!("invalid number `{text}`"));
        }
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        is_float = true;
        text.push('e');
        cur.bump();
        if let Some(sign @ ('+' | '-')) = cur.peek() {
            text.push(sign);
            cur.bump();
        }
        let mut exp = 0;
        while let Some(c) = cur.peek().filter(char::is_ascii_digit) {
            text.push(c);
            cur.bump();
            exp += 1;
        }
        if exp == 0 {
            return Err(format!("invalid number `{text}`"));
        }
    }
    if matches!(cur.peek(), Some(c) if c == '_' || c.is_ascii_alphabetic()) {
        return Err(format!("invalid number `{text}`: followed by a name character"));
    }
    if is_float {
        text.parse::<f64>()
            .map(Tok::Float)
            .map_err(|e| format!("invalid number `{text}`: {e}"))
    } else {
        text.parse::<i64>()
            .map(Tok::Int)
            .map_err(|_| format!("integer `{text}` out of range"))
    }
}

/// Token stream with one-token lookahead, used by both parsers.
pub(crate) struct TokenStream {
    tokens: Vec<Token>,
    pos: usize,
}

impl TokenStream {
    pub fn new(tokens: Vec<Token>) -> Self {
        Self { tokens, pos: 0 }
    }

    pub fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    pub fn next(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    pub fn at_punct(&self, c: char) -> bool {
        self.peek().tok == Tok::Punct(c)
    }

    pub fn at_name(&self, name: &str) -> bool {
        matches!(&self.peek().tok, Tok::Name(n) if n == name)
    }
}
