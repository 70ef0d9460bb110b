//! Shared lexer for dataset lines and pattern text.

use std::fmt;

/// A parse failure with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("unterminated literal")]
    UnterminatedLiteral,
    #[error("empty literal")]
    EmptyLiteral,
    #[error("empty variable name")]
    EmptyVariable,
    #[error("expected {expected}, found {found}")]
    Expected { expected: String, found: String },
    #[error("literal not allowed in {0} position")]
    LiteralPosition(&'static str),
    #[error("variable not allowed in a dataset")]
    VariableInData,
    #[error("expected exactly three fields, found {0}")]
    FieldCount(usize),
    #[error("binary operator {0} must be enclosed in its own parentheses")]
    Unparenthesized(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Token {
    LParen,
    RParen,
    Bare(String),
    Literal(String),
    Var(String),
    Eq,
    Bang,
    OrOr,
    AndAnd,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::LParen => f.write_str("'('"),
            Token::RParen => f.write_str("')'"),
            Token::Bare(s) => write!(f, "'{s}'"),
            Token::Literal(s) => write!(f, "literal \"{s}\""),
            Token::Var(s) => write!(f, "variable ?{s}"),
            Token::Eq => f.write_str("'='"),
            Token::Bang => f.write_str("'!'"),
            Token::OrOr => f.write_str("'||'"),
            Token::AndAnd => f.write_str("'&&'"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Spanned {
    pub token: Token,
    pub line: usize,
    pub column: usize,
}

pub(crate) fn is_bare_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | ':' | '/' | '@' | '#' | '-')
}

pub(crate) fn is_bare_token(s: &str) -> bool {
    !s.is_empty() && s.chars().all(is_bare_char)
}

/// Literal text that survives a quote-delimited round trip.
pub(crate) fn is_literal_text(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c == '"' || c.is_control())
}

/// Tokenizes `text`, reporting positions relative to `first_line`.
pub(crate) fn tokenize(text: &str, first_line: usize) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut line = first_line;
    let mut column = 1;
    let mut chars = text.chars().peekable();
    let err = |line, column, kind| ParseError { line, column, kind };

    while let Some(&c) = chars.peek() {
        let (tok_line, tok_col) = (line, column);
        let mut advance = |chars: &mut std::iter::Peekable<std::str::Chars<'_>>| {
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
            c
        };
        let token = match c {
            c if c.is_whitespace() => {
                advance(&mut chars);
                continue;
            }
            '(' => {
                advance(&mut chars);
                Token::LParen
            }
            ')' => {
                advance(&mut chars);
                Token::RParen
            }
            '=' => {
                advance(&mut chars);
                Token::Eq
            }
            '!' => {
                advance(&mut chars);
                Token::Bang
            }
            '|' | '&' => {
                advance(&mut chars);
                if chars.peek() != Some(&c) {
                    return Err(err(tok_line, tok_col, ParseErrorKind::UnexpectedChar(c)));
                }
                advance(&mut chars);
                if c == '|' {
                    Token::OrOr
                } else {
                    Token::AndAnd
                }
            }
            '"' => {
                advance(&mut chars);
                let mut text = String::new();
                loop {
                    match chars.peek() {
                        Some('"') => {
                            advance(&mut chars);
                            break;
                        }
                        Some('\n') | None => {
                            return Err(err(tok_line, tok_col, ParseErrorKind::UnterminatedLiteral))
                        }
                        Some(_) => text.push(advance(&mut chars).unwrap()),
                    }
                }
                if text.is_empty() {
                    return Err(err(tok_line, tok_col, ParseErrorKind::EmptyLiteral));
                }
                Token::Literal(text)
            }
            '?' => {
                advance(&mut chars);
                let mut name = String::new();
                while chars.peek().is_some_and(|&c| is_bare_char(c)) {
                    name.push(advance(&mut chars).unwrap());
                }
                if name.is_empty() {
                    return Err(err(tok_line, tok_col, ParseErrorKind::EmptyVariable));
                }
                Token::Var(name)
            }
            c if is_bare_char(c) => {
                let mut text = String::new();
                while chars.peek().is_some_and(|&c| is_bare_char(c)) {
                    text.push(advance(&mut chars).unwrap());
                }
                Token::Bare(text)
            }
            other => return Err(err(tok_line, tok_col, ParseErrorKind::UnexpectedChar(other))),
        };
        out.push(Spanned {
            token,
            line: tok_line,
            column: tok_col,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<Token> {
        tokenize(text, 1).unwrap().into_iter().map(|s| s.token).collect()
    }

    #[test]
    fn lexes_pattern_tokens() {
        assert_eq!(
            kinds("((?A email ?E) FILTER (! bound(?E)))"),
            vec![
                Token::LParen,
                Token::LParen,
                Token::Var("A".into()),
                Token::Bare("email".into()),
                Token::Var("E".into()),
                Token::RParen,
                Token::Bare("FILTER".into()),
                Token::LParen,
                Token::Bang,
                Token::Bare("bound".into()),
                Token::LParen,
                Token::Var("E".into()),
                Token::RParen,
                Token::RParen,
                Token::RParen,
            ]
        );
    }

    #[test]
    fn literal_may_contain_spaces() {
        assert_eq!(kinds("\"a b\""), vec![Token::Literal("a b".into())]);
    }

    #[test]
    fn reports_positions() {
        let e = tokenize("a\n  $", 1).unwrap_err();
        assert_eq!((e.line, e.column), (2, 3));
        assert_eq!(e.kind, ParseErrorKind::UnexpectedChar('$'));
    }

    #[test]
    fn single_pipe_is_rejected() {
        assert!(tokenize("?X = a | ?Y = b", 1).is_err());
    }

    #[test]
    fn unterminated_and_empty_literals() {
        assert_eq!(
            tokenize("\"abc", 1).unwrap_err().kind,
            ParseErrorKind::UnterminatedLiteral
        );
        assert_eq!(tokenize("\"\"", 1).unwrap_err().kind, ParseErrorKind::EmptyLiteral);
    }
}
