use std::fmt;

use super::error::ParseError;

/// Source position. Spans never take part in equality so that ASTs parsed
/// from differently formatted text compare equal.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub offset: usize,
    pub line: usize,
    pub column: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    Semi,
    Comma,
    Colon,
    Eq,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Plus,
    Minus,
    Star,
    Slash,
    Tensor,
    Odot,
    Dagger,
    Arrow,
    Bar,
    KetBra,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(x) => format!("number `{x}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.symbol()),
        }
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            Tok::Semi => ";",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Eq => "=",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Tensor => "(x)",
            Tok::Odot => "(.)",
            Tok::Dagger => "^dag",
            Tok::Arrow => "->",
            Tok::Bar => "|",
            Tok::KetBra => "><",
            Tok::Ident(_) => "identifier",
            Tok::Number(_) => "number",
            Tok::Str(_) => "string",
            Tok::Eof => "end of input",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

pub fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn span(&self) -> Span {
        Span {
            offset: self.pos,
            line: self.line,
            column: self.column,
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.rest().starts_with(s) {
            for _ in s.chars() {
                self.bump();
            }
            true
        } else {
            false
        }
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, start: Span) -> Result<Tok, ParseError> {
        let begin = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        if self.peek() == Some('.') && self.rest()[1..].starts_with(|c: char| c.is_ascii_digit()) {
            self.bump();
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
            }
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let tail = &self.rest()[1..];
            let signed = tail.starts_with(['+', '-']);
            let digits = if signed { &tail[1..] } else { tail };
            if digits.starts_with(|c: char| c.is_ascii_digit()) {
                self.bump();
                if signed {
                    self.bump();
                }
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.bump();
                }
            }
        }
        let text = &self.src[begin..self.pos];
        match text.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(Tok::Number(x)),
            _ => Err(ParseError::new(
                start,
                vec!["finite number".into()],
                format!("`{text}`"),
            )),
        }
    }

    fn string(&mut self, start: Span) -> Result<Tok, ParseError> {
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => {
                    return Err(ParseError::new(
                        start,
                        vec!["closing `\"`".into()],
                        "unterminated string".into(),
                    ));
                }
                Some('"') => return Ok(Tok::Str(out)),
                Some('\\') => match self.bump() {
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    _ => {
                        return Err(ParseError::new(
                            start,
                            vec!["`\\\"` or `\\\\`".into()],
                            "unknown escape".into(),
                        ))
                    }
                },
                Some(c) => out.push(c),
            }
        }
    }

    fn next(&mut self) -> Result<Token, ParseError> {
        self.skip_trivia();
        let span = self.span();
        let Some(c) = self.peek() else {
            return Ok(Token { tok: Tok::Eof, span });
        };
        let fixed: &[(&str, Tok)] = &[
            ("(x)", Tok::Tensor),
            ("(.)", Tok::Odot),
            ("^dag", Tok::Dagger),
            ("->", Tok::Arrow),
            ("><", Tok::KetBra),
            ("⟩⟨", Tok::KetBra),
            ("⊗", Tok::Tensor),
            ("⊙", Tok::Odot),
            ("†", Tok::Dagger),
            ("→", Tok::Arrow),
        ];
        for (s, t) in fixed {
            if self.eat(s) {
                return Ok(Token { tok: t.clone(), span });
            }
        }
        let tok = if c.is_ascii_digit() || (c == '.' && self.rest()[1..].starts_with(|d: char| d.is_ascii_digit())) {
            self.number(span)?
        } else if is_ident_start(c) {
            let begin = self.pos;
            while self.peek().is_some_and(is_ident_continue) {
                self.bump();
            }
            Tok::Ident(self.src[begin..self.pos].to_string())
        } else if c == '"' {
            self.string(span)?
        } else {
            let t = match c {
                ';' => Tok::Semi,
                ',' => Tok::Comma,
                ':' => Tok::Colon,
                '=' => Tok::Eq,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '+' => Tok::Plus,
                '-' | '−' => Tok::Minus,
                '*' | '·' => Tok::Star,
                '/' => Tok::Slash,
                '|' => Tok::Bar,
                _ => {
                    return Err(ParseError::new(span, vec!["token".into()], format!("character {c:?}")));
                }
            };
            self.bump();
            t
        };
        Ok(Token { tok, span })
    }
}

/// Splits `src` into tokens; the last token is always `Eof`.
pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut lx = Lexer {
        src,
        pos: 0,
        line: 1,
        column: 1,
    };
    let mut out = Vec::new();
    loop {
        let t = lx.next()?;
        let done = t.tok == Tok::Eof;
        out.push(t);
        if done {
            return Ok(out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn operators_and_unicode_aliases() {
        assert_eq!(toks("a (x) b ⊗ c"), toks("a(x)b(x)c"));
        assert_eq!(toks("|a><b|"), toks("|a⟩⟨b|"));
        assert_eq!(
            toks("x^dag (.) y"),
            vec![
                Tok::Ident("x".into()),
                Tok::Dagger,
                Tok::Odot,
                Tok::Ident("y".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn numbers() {
        assert_eq!(
            toks("1.5e-3 2 .5"),
            vec![Tok::Number(1.5e-3), Tok::Number(2.0), Tok::Number(0.5), Tok::Eof]
        );
        // `e` without digits belongs to the next identifier
        assert_eq!(toks("2e"), vec![Tok::Number(2.0), Tok::Ident("e".into()), Tok::Eof]);
    }

    #[test]
    fn comments_and_positions() {
        let t = tokenize("# header\n  space").unwrap();
        assert_eq!((t[0].span.line, t[0].span.column), (2, 3));
        assert_eq!(t[0].span.offset, 11);
    }

    #[test]
    fn bad_character_reports_position() {
        let e = tokenize("ket a\n  @").unwrap_err();
        assert_eq!((e.line, e.column), (2, 3));
    }

    #[test]
    fn unterminated_string() {
        assert!(tokenize("\"abc").is_err());
    }
}
