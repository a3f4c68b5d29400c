//! Lexer and recursive-descent parser for the rules language.
//!
//! ```text
//! rule <code> : facet <facet-id> <MIN|MAX> when <cond> => "<message>"
//!     [issue <issue-code>] [severity <low|medium|high>]
//! ```
//!
//! `not` binds tighter than `and`, which binds tighter than `or`. Comments
//! run from `#` to the end of the line.

use std::fmt;

use thiserror::Error;

use super::cond::{CmpOp, Condition, Literal};
use super::{Rule, RuleSet, RulesError};
use crate::facet::{is_canonical_id, FacetId, Side};
use crate::issue::Severity;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    Num(f64),
    Colon,
    Arrow,
    LParen,
    RParen,
    Op(CmpOp),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "`{w}`"),
            Tok::Str(_) => f.write_str("string literal"),
            Tok::Num(n) => write!(f, "number {n}"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Arrow => f.write_str("`=>`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Op(op) => write!(f, "`{}`", op.as_str()),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

const KEYWORDS: &[&str] = &[
    "rule", "facet", "when", "and", "or", "not", "has", "true", "false", "issue", "severity",
    "MIN", "MAX",
];

fn is_word_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.'
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, message: String| ParseError {
        line,
        column,
        message,
    };

    while i < chars.len() {
        let c = chars[i];
        let (tline, tcol) = (line, col);
        let push = |tok, out: &mut Vec<Spanned>| {
            out.push(Spanned {
                tok,
                line: tline,
                column: tcol,
            })
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            ':' => {
                push(Tok::Colon, &mut out);
                i += 1;
                col += 1;
            }
            '(' => {
                push(Tok::LParen, &mut out);
                i += 1;
                col += 1;
            }
            ')' => {
                push(Tok::RParen, &mut out);
                i += 1;
                col += 1;
            }
            '=' => {
                if chars.get(i + 1) == Some(&'>') {
                    push(Tok::Arrow, &mut out);
                    i += 2;
                    col += 2;
                } else {
                    push(Tok::Op(CmpOp::Eq), &mut out);
                    i += 1;
                    col += 1;
                }
            }
            '!' => {
                if chars.get(i + 1) == Some(&'=') {
                    push(Tok::Op(CmpOp::Ne), &mut out);
                    i += 2;
                    col += 2;
                } else {
                    return Err(err(line, col, "expected `!=`".into()));
                }
            }
            '<' | '>' => {
                let eq = chars.get(i + 1) == Some(&'=');
                let op = match (c, eq) {
                    ('<', false) => CmpOp::Lt,
                    ('<', true) => CmpOp::Le,
                    ('>', false) => CmpOp::Gt,
                    _ => CmpOp::Ge,
                };
                push(Tok::Op(op), &mut out);
                let n = if eq { 2 } else { 1 };
                i += n;
                col += n;
            }
            '"' => {
                let mut s = String::new();
                i += 1;
                col += 1;
                loop {
                    let Some(&c) = chars.get(i) else {
                        return Err(err(tline, tcol, "unterminated string".into()));
                    };
                    i += 1;
                    col += 1;
                    match c {
                        '"' => break,
                        '\n' => return Err(err(tline, tcol, "unterminated string".into())),
                        '\\' => {
                            let esc = chars.get(i).copied();
                            i += 1;
                            col += 1;
                            s.push(match esc {
                                Some('"') => '"',
                                Some('\\') => '\\',
                                Some('n') => '\n',
                                Some('t') => '\t',
                                Some('r') => '\r',
                                _ => {
                                    return Err(err(line, col - 2, "unknown escape sequence".into()))
                                }
                            });
                        }
                        c => s.push(c),
                    }
                }
                push(Tok::Str(s), &mut out);
            }
            c if c == '-' || c.is_ascii_digit() => {
                let start = i;
                i += 1;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                let raw: String = chars[start..i].iter().collect();
                col += i - start;
                let n = raw
                    .parse::<f64>()
                    .ok()
                    .filter(|n| n.is_finite() && raw != "-")
                    .ok_or_else(|| err(tline, tcol, format!("invalid number `{raw}`")))?;
                push(Tok::Num(n), &mut out);
            }
            c if is_word_start(c) => {
                let start = i;
                while i < chars.len() && is_word_char(chars[i]) {
                    i += 1;
                }
                col += i - start;
                push(Tok::Word(chars[start..i].iter().collect()), &mut out);
            }
            c => return Err(err(line, col, format!("unexpected character `{c}`"))),
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(t: &Spanned, message: impl Into<String>) -> ParseError {
        ParseError {
            line: t.line,
            column: t.column,
            message: message.into(),
        }
    }

    fn at_word(&self, w: &str) -> bool {
        matches!(&self.peek().tok, Tok::Word(x) if x == w)
    }

    fn expect_word(&mut self, w: &str) -> Result<(), ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::Word(x) if x == w => Ok(()),
            other => Err(Self::error_at(&t, format!("expected `{w}`, found {other}"))),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        let t = self.next();
        if t.tok == tok {
            Ok(())
        } else {
            Err(Self::error_at(&t, format!("expected {tok}, found {}", t.tok)))
        }
    }

    fn identifier(&mut self, what: &str) -> Result<(String, Spanned), ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::Word(w) if !KEYWORDS.contains(&w.as_str()) && is_canonical_id(w) => {
                Ok((w.clone(), t))
            }
            other => Err(Self::error_at(
                &t,
                format!("expected {what} (lowercase-hyphenated identifier), found {other}"),
            )),
        }
    }

    fn attribute_name(&mut self) -> Result<String, ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::Word(w) if !KEYWORDS.contains(&w.as_str()) => Ok(w.clone()),
            other => Err(Self::error_at(
                &t,
                format!("expected attribute name, found {other}"),
            )),
        }
    }

    fn rule(&mut self) -> Result<(Rule, Spanned), ParseError> {
        self.expect_word("rule")?;
        let (code, code_tok) = self.identifier("rule code")?;
        self.expect(Tok::Colon)?;
        self.expect_word("facet")?;
        let (facet, _) = self.identifier("facet id")?;
        let t = self.next();
        let side = match &t.tok {
            Tok::Word(w) if w == "MIN" => Side::Min,
            Tok::Word(w) if w == "MAX" => Side::Max,
            other => {
                return Err(Self::error_at(
                    &t,
                    format!("expected `MIN` or `MAX`, found {other}"),
                ))
            }
        };
        self.expect_word("when")?;
        let condition = self.or_expr()?;
        self.expect(Tok::Arrow)?;
        let t = self.next();
        let message = match &t.tok {
            Tok::Str(s) => s.clone(),
            other => {
                return Err(Self::error_at(
                    &t,
                    format!("expected quoted message, found {other}"),
                ))
            }
        };
        let mut issue_code = None;
        if self.at_word("issue") {
            self.next();
            issue_code = Some(self.identifier("issue code")?.0);
        }
        let mut severity = None;
        if self.at_word("severity") {
            self.next();
            let t = self.next();
            severity = match &t.tok {
                Tok::Word(w) => Severity::parse(w),
                _ => None,
            };
            if severity.is_none() {
                return Err(Self::error_at(
                    &t,
                    format!("expected `low`, `medium` or `high`, found {}", t.tok),
                ));
            }
        }
        let rule = Rule {
            code,
            facet_id: FacetId::new(facet).expect("checked canonical"),
            side,
            condition,
            message,
            issue_code,
            severity,
        };
        Ok((rule, code_tok))
    }

    fn or_expr(&mut self) -> Result<Condition, ParseError> {
        let mut lhs = self.and_expr()?;
        while self.at_word("or") {
            self.next();
            lhs = lhs.or(self.and_expr()?);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Condition, ParseError> {
        let mut lhs = self.unary()?;
        while self.at_word("and") {
            self.next();
            lhs = lhs.and(self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Condition, ParseError> {
        if self.at_word("not") {
            self.next();
            return Ok(self.unary()?.not());
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Condition, ParseError> {
        if self.peek().tok == Tok::LParen {
            self.next();
            let inner = self.or_expr()?;
            self.expect(Tok::RParen)?;
            return Ok(inner);
        }
        if self.at_word("has") {
            self.next();
            self.expect(Tok::LParen)?;
            let name = self.attribute_name()?;
            self.expect(Tok::RParen)?;
            return Ok(Condition::Has(name));
        }
        let attr = self.attribute_name()?;
        let t = self.next();
        let Tok::Op(op) = t.tok else {
            return Err(Self::error_at(
                &t,
                format!("expected comparison operator, found {}", t.tok),
            ));
        };
        let t = self.next();
        let value = match &t.tok {
            Tok::Str(s) => Literal::Text(s.clone()),
            Tok::Num(n) => Literal::Number(*n),
            Tok::Word(w) if w == "true" => Literal::Bool(true),
            Tok::Word(w) if w == "false" => Literal::Bool(false),
            other => {
                return Err(Self::error_at(
                    &t,
                    format!("expected literal, found {other}"),
                ))
            }
        };
        Ok(Condition::Compare { attr, op, value })
    }
}

/// Parses rules text into a rule set with the given id.
pub fn parse_rules_with_id(id: &str, text: &str) -> Result<RuleSet, RulesError> {
    let mut parser = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let mut rules = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    while parser.peek().tok != Tok::Eof {
        let (rule, code_tok) = parser.rule()?;
        if !seen.insert(rule.code.clone()) {
            return Err(RulesError::DuplicateRuleCode {
                code: rule.code,
                line: code_tok.line,
                column: code_tok.column,
            });
        }
        rules.push(rule);
    }
    RuleSet::new(id, rules)
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rule {}: facet {} {} when {} => ",
            self.code, self.facet_id, self.side, self.condition
        )?;
        super::cond::write_quoted(f, &self.message)?;
        if let Some(issue) = &self.issue_code {
            write!(f, " issue {issue}")?;
        }
        if let Some(sev) = self.severity {
            write!(f, " severity {sev}")?;
        }
        Ok(())
    }
}

/// Canonical text: one rule per line, in rule-set order.
impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rule in self.rules() {
            writeln!(f, "{rule}")?;
        }
        Ok(())
    }
}
