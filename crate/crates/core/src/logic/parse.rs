//! Recursive-descent parser and canonical printer for boolean expressions.
//!
//! ```text
//! or_expr  := and_expr ( "or" and_expr )*
//! and_expr := not_expr ( "and" not_expr )*
//! not_expr := "not" not_expr | atom
//! atom     := IDENT | "(" or_expr ")"
//! ```

use std::fmt;

use super::{is_identifier, Formula, VarId};

const RESERVED: [&str; 6] = ["and", "or", "not", "True", "False", "None"];

pub(crate) fn is_reserved(word: &str) -> bool {
    RESERVED.contains(&word)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Empty,
    UnknownCharacter(char),
    /// Boolean constants and `None` are not formula atoms.
    ReservedWord(String),
    UnexpectedToken(String),
    UnexpectedEnd,
    UnclosedParen,
    UnmatchedParen,
}

/// A syntax error with the character offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at offset {offset}: {kind}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Empty => f.write_str("empty expression"),
            ParseErrorKind::UnknownCharacter(c) => write!(f, "unknown character {c:?}"),
            ParseErrorKind::ReservedWord(w) => write!(f, "{w:?} is not a variable"),
            ParseErrorKind::UnexpectedToken(t) => write!(f, "unexpected {t:?}"),
            ParseErrorKind::UnexpectedEnd => f.write_str("unexpected end of input"),
            ParseErrorKind::UnclosedParen => f.write_str("unclosed parenthesis"),
            ParseErrorKind::UnmatchedParen => f.write_str("unmatched closing parenthesis"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    And,
    Or,
    Not,
    LParen,
    RParen,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => s.clone(),
            Tok::And => "and".into(),
            Tok::Or => "or".into(),
            Tok::Not => "not".into(),
            Tok::LParen => "(".into(),
            Tok::RParen => ")".into(),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '(' {
            tokens.push((Tok::LParen, i));
            i += 1;
        } else if c == ')' {
            tokens.push((Tok::RParen, i));
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let tok = match word.as_str() {
                "and" => Tok::And,
                "or" => Tok::Or,
                "not" => Tok::Not,
                w if is_reserved(w) => {
                    return Err(ParseError {
                        offset: start,
                        kind: ParseErrorKind::ReservedWord(word),
                    })
                }
                _ => Tok::Ident(word),
            };
            tokens.push((tok, start));
        } else {
            return Err(ParseError {
                offset: i,
                kind: ParseErrorKind::UnknownCharacter(c),
            });
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(_, o)| *o)
    }

    fn unexpected(&self) -> ParseError {
        match self.tokens.get(self.pos) {
            Some((Tok::RParen, offset)) => ParseError {
                offset: *offset,
                kind: ParseErrorKind::UnmatchedParen,
            },
            Some((tok, offset)) => ParseError {
                offset: *offset,
                kind: ParseErrorKind::UnexpectedToken(tok.describe()),
            },
            None => ParseError {
                offset: self.end,
                kind: ParseErrorKind::UnexpectedEnd,
            },
        }
    }

    fn or_expr(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.and_expr()?;
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            let rhs = self.and_expr()?;
            lhs = lhs.or(rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.not_expr()?;
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            let rhs = self.not_expr()?;
            lhs = lhs.and(rhs);
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Formula, ParseError> {
        if self.peek() == Some(&Tok::Not) {
            self.pos += 1;
            return Ok(self.not_expr()?.negate());
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Formula, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                debug_assert!(is_identifier(&name));
                Ok(Formula::Var(VarId(name)))
            }
            Some(Tok::LParen) => {
                let open = self.offset();
                self.pos += 1;
                let inner = self.or_expr()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    None => Err(ParseError {
                        offset: open,
                        kind: ParseErrorKind::UnclosedParen,
                    }),
                    Some(_) => Err(self.unexpected()),
                }
            }
            _ => Err(self.unexpected()),
        }
    }
}

/// Parses an infix boolean expression such as `Q0 and (Q1 or not Q2)`.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Err(ParseError {
            offset: 0,
            kind: ParseErrorKind::Empty,
        });
    }
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.chars().count(),
    };
    let formula = parser.or_expr()?;
    if parser.pos < parser.tokens.len() {
        return Err(parser.unexpected());
    }
    Ok(formula)
}

fn precedence(f: &Formula) -> u8 {
    match f {
        Formula::Or(..) => 1,
        Formula::And(..) => 2,
        Formula::Not(_) => 3,
        Formula::Var(_) => 4,
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Formula, min_prec: u8) -> fmt::Result {
    if precedence(child) < min_prec {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Var(id) => write!(f, "{id}"),
            Formula::Not(inner) => {
                f.write_str("not ")?;
                write_child(f, inner, 3)
            }
            Formula::And(l, r) => {
                write_child(f, l, 2)?;
                f.write_str(" and ")?;
                write_child(f, r, 3)
            }
            Formula::Or(l, r) => {
                write_child(f, l, 1)?;
                f.write_str(" or ")?;
                write_child(f, r, 2)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(name: &str) -> Formula {
        Formula::var(name)
    }

    #[test]
    fn grouping_follows_parentheses() {
        assert_eq!(parse("Q0 and (Q1 or Q2)").unwrap(), v("Q0").and(v("Q1").or(v("Q2"))));
    }

    #[test]
    fn not_binds_tighter_than_and() {
        assert_eq!(parse("not Q0 and Q1").unwrap(), v("Q0").negate().and(v("Q1")));
    }

    #[test]
    fn and_binds_tighter_than_or() {
        assert_eq!(parse("Q0 or Q1 and Q2").unwrap(), v("Q0").or(v("Q1").and(v("Q2"))));
    }

    #[test]
    fn chains_nest_to_the_left() {
        assert_eq!(
            parse("A and B and C").unwrap(),
            v("A").and(v("B")).and(v("C"))
        );
        assert_eq!(parse("A or B or C").unwrap(), v("A").or(v("B")).or(v("C")));
    }

    #[test]
    fn whitespace_is_insignificant() {
        assert_eq!(
            parse("  not(Q0 and Q1)\n or\tQ2 ").unwrap(),
            parse("not (Q0 and Q1) or Q2").unwrap()
        );
    }

    #[test]
    fn doubled_operator_reports_offset() {
        let err = parse("Q0 and and Q1").unwrap_err();
        assert_eq!(err.offset, 7);
        assert_eq!(err.kind, ParseErrorKind::UnexpectedToken("and".into()));
    }

    #[test]
    fn malformed_inputs() {
        assert_eq!(parse("").unwrap_err().kind, ParseErrorKind::Empty);
        assert_eq!(parse("   ").unwrap_err().kind, ParseErrorKind::Empty);

        let err = parse("(Q0 and Q1").unwrap_err();
        assert_eq!((err.offset, err.kind), (0, ParseErrorKind::UnclosedParen));

        let err = parse("Q0 and Q1)").unwrap_err();
        assert_eq!((err.offset, err.kind), (9, ParseErrorKind::UnmatchedParen));

        let err = parse("Q0 and").unwrap_err();
        assert_eq!((err.offset, err.kind), (6, ParseErrorKind::UnexpectedEnd));

        let err = parse("Q0 & Q1").unwrap_err();
        assert_eq!((err.offset, err.kind), (3, ParseErrorKind::UnknownCharacter('&')));

        let err = parse("Q0 or True").unwrap_err();
        assert_eq!(err.offset, 6);

        assert!(parse("Q0 Q1").is_err());
        assert!(parse("()").is_err());
    }

    #[test]
    fn canonical_printing() {
        let cases = [
            "Q0 and (Q1 or Q2)",
            "not Q0 and Q1",
            "Q0 or Q1 and Q2",
            "not (A and B)",
            "not A or not B",
            "A and (B and C)",
            "A and B and C",
            "not not A",
            "(A or B) and not (C or D)",
        ];
        for text in cases {
            assert_eq!(parse(text).unwrap().to_string(), text);
        }
        assert_eq!(parse("((Q0))  and((Q1))").unwrap().to_string(), "Q0 and Q1");
    }
}
