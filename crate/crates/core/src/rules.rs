//! Boolean expert-system classifier: a tiny rule DSL and its evaluator.
//!
//! One rule per line:
//!
//! ```text
//! # flag customers whose consumption collapsed
//! rule sharp_drop: change_3m < -0.4
//! rule drift_down: slope_12m < -0.05 AND mean_12m > 1.0
//! ```
//!
//! A rule is a conjunction of comparison terms over named attributes; a rule
//! set classifies positive when *any* rule fires (disjunction of
//! conjunctions). `#` starts a comment anywhere on a line.
//!
//! `=` and `!=` compare reals exactly; they are reliable only for
//! integer-valued attributes such as `zero_month_count`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{AttributeCatalog, AttributeVector};

/// Six rules over the shipped attribute catalog, aimed at the synthetic
/// theft signature (sustained drops, falling slopes, dead meters).
pub const EXAMPLE_RULES: &str = "\
# Consumption patterns that warrant an inspection.
rule sharp_drop: change_3m < -0.4
rule drift_down: slope_12m < -0.05 AND mean_12m > 1.0
rule deep_dip: min_over_mean < 0.2 AND mean_12m > 1.0
rule recent_slump: change_3m < -0.25 AND slope_12m < -0.02
rule dead_meter: zero_month_count = 12
rule quiet_fade: min_over_mean < 0.35 AND change_3m < -0.25
";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl Comparator {
    pub fn compare(self, left: f64, right: f64) -> bool {
        match self {
            Comparator::Lt => left < right,
            Comparator::Le => left <= right,
            Comparator::Gt => left > right,
            Comparator::Ge => left >= right,
            Comparator::Eq => left == right,
            Comparator::Ne => left != right,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Eq => "=",
            Comparator::Ne => "!=",
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One comparison, e.g. `change_3m < -0.4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub attribute: String,
    pub comparator: Comparator,
    pub value: f64,
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.attribute, self.comparator, self.value)
    }
}

/// Named conjunction of terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub name: String,
    pub terms: Vec<Term>,
}

/// Non-empty list of rules with unique names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
}

#[derive(Debug, Error, PartialEq)]
pub enum RuleError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}, column {column}: unknown attribute `{attribute}`")]
    UnknownAttribute {
        line: usize,
        column: usize,
        attribute: String,
    },
    #[error("line {line}: duplicate rule name `{name}`")]
    DuplicateName { line: usize, name: String },
    #[error("rule file defines no rules")]
    Empty,
    #[error("attribute vector is missing `{0}`")]
    MissingAttribute(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Op(Comparator),
    Colon,
    Number(f64),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Ident(s) => write!(f, "`{s}`"),
            Token::Op(op) => write!(f, "`{op}`"),
            Token::Colon => f.write_str("`:`"),
            Token::Number(n) => write!(f, "`{n}`"),
        }
    }
}

/// Tokens of one line with their 1-based starting columns.
fn tokenize(line: &str, line_no: usize) -> Result<Vec<(Token, usize)>, RuleError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c == '#' {
            break;
        } else if c == ':' {
            tokens.push((Token::Colon, column));
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            tokens.push((Token::Ident(chars[start..i].iter().collect()), column));
        } else if matches!(c, '<' | '>' | '=' | '!') {
            let two = chars.get(i + 1) == Some(&'=');
            let op = match (c, two) {
                ('<', true) => Comparator::Le,
                ('<', false) => Comparator::Lt,
                ('>', true) => Comparator::Ge,
                ('>', false) => Comparator::Gt,
                ('=', false) => Comparator::Eq,
                ('=', true) | ('!', false) => {
                    return Err(RuleError::Syntax {
                        line: line_no,
                        column,
                        message: format!("unrecognized operator starting at `{c}`"),
                    })
                }
                ('!', true) => Comparator::Ne,
                _ => unreachable!(),
            };
            tokens.push((Token::Op(op), column));
            i += if two { 2 } else { 1 };
        } else if c.is_ascii_digit() || matches!(c, '-' | '+' | '.') {
            let start = i;
            i += 1;
            while i < chars.len()
                && (chars[i].is_ascii_digit() || matches!(chars[i], '.' | 'e' | 'E' | '-' | '+'))
            {
                // '+'/'-' continue a number only as an exponent sign.
                if matches!(chars[i], '-' | '+') && !matches!(chars[i - 1], 'e' | 'E') {
                    break;
                }
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let value: f64 = text.parse().map_err(|_| RuleError::Syntax {
                line: line_no,
                column,
                message: format!("invalid number `{text}`"),
            })?;
            tokens.push((Token::Number(value), column));
        } else {
            return Err(RuleError::Syntax {
                line: line_no,
                column,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(tokens)
}

struct LineParser<'a> {
    tokens: &'a [(Token, usize)],
    pos: usize,
    line: usize,
}

impl<'a> LineParser<'a> {
    fn error(&self, column: usize, message: impl Into<String>) -> RuleError {
        RuleError::Syntax {
            line: self.line,
            column,
            message: message.into(),
        }
    }

    fn end_column(&self) -> usize {
        self.tokens.last().map_or(1, |(_, c)| c + 1)
    }

    fn next(&mut self, expected: &str) -> Result<&'a (Token, usize), RuleError> {
        let token = self
            .tokens
            .get(self.pos)
            .ok_or_else(|| self.error(self.end_column(), format!("expected {expected}, found end of line")))?;
        self.pos += 1;
        Ok(token)
    }

    fn ident(&mut self, expected: &str) -> Result<(String, usize), RuleError> {
        match self.next(expected)? {
            (Token::Ident(s), col) => Ok((s.clone(), *col)),
            (other, col) => Err(self.error(*col, format!("expected {expected}, found {other}"))),
        }
    }

    fn term(&mut self, catalog: &AttributeCatalog) -> Result<Term, RuleError> {
        let (attribute, col) = self.ident("an attribute name")?;
        if !catalog.contains(&attribute) {
            return Err(RuleError::UnknownAttribute {
                line: self.line,
                column: col,
                attribute,
            });
        }
        let comparator = match self.next("a comparison operator")? {
            (Token::Op(op), _) => *op,
            (other, col) => {
                return Err(self.error(*col, format!("expected a comparison operator, found {other}")))
            }
        };
        let value = match self.next("a number")? {
            (Token::Number(v), _) => *v,
            (other, col) => return Err(self.error(*col, format!("expected a number, found {other}"))),
        };
        Ok(Term {
            attribute,
            comparator,
            value,
        })
    }
}

/// Parses rule-DSL text against a catalog (used to reject unknown
/// attributes with their position).
pub fn parse_rules(text: &str, catalog: &AttributeCatalog) -> Result<RuleSet, RuleError> {
    let mut rules: Vec<Rule> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let tokens = tokenize(raw_line, line_no)?;
        if tokens.is_empty() {
            continue;
        }
        let mut parser = LineParser {
            tokens: &tokens,
            pos: 0,
            line: line_no,
        };

        let (kw, col) = parser.ident("the keyword `rule`")?;
        if kw != "rule" {
            return Err(parser.error(col, format!("expected the keyword `rule`, found `{kw}`")));
        }
        let (name, name_col) = parser.ident("a rule name")?;
        if rules.iter().any(|r| r.name == name) {
            return Err(RuleError::DuplicateName { line: line_no, name });
        }
        match parser.next("`:`")? {
            (Token::Colon, _) => {}
            (other, col) => return Err(parser.error(*col, format!("expected `:`, found {other}"))),
        }

        let mut terms = vec![parser.term(catalog)?];
        while parser.pos < tokens.len() {
            let (and_kw, col) = parser.ident("`AND`")?;
            if and_kw != "AND" {
                return Err(parser.error(col, format!("expected `AND`, found `{and_kw}`")));
            }
            terms.push(parser.term(catalog)?);
        }
        let _ = name_col;
        rules.push(Rule { name, terms });
    }
    if rules.is_empty() {
        return Err(RuleError::Empty);
    }
    Ok(RuleSet { rules })
}

/// Canonical DSL text; `parse_rules(print_rules(rs))` is structurally `rs`.
pub fn print_rules(ruleset: &RuleSet) -> String {
    let mut out = String::new();
    for rule in &ruleset.rules {
        out.push_str("rule ");
        out.push_str(&rule.name);
        out.push_str(": ");
        let terms: Vec<String> = rule.terms.iter().map(Term::to_string).collect();
        out.push_str(&terms.join(" AND "));
        out.push('\n');
    }
    out
}

/// Logical AND of the rule's term comparisons.
pub fn evaluate_rule(rule: &Rule, attrs: &AttributeVector) -> Result<bool, RuleError> {
    let mut all = true;
    for term in &rule.terms {
        let value = attrs
            .get(&term.attribute)
            .ok_or_else(|| RuleError::MissingAttribute(term.attribute.clone()))?;
        all &= term.comparator.compare(value, term.value);
    }
    Ok(all)
}

/// Positive label plus the names of every rule that fired, in set order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BooleanDecision {
    pub label: bool,
    pub fired: Vec<String>,
}

/// Label 1 iff at least one rule fires.
pub fn classify_boolean(
    ruleset: &RuleSet,
    attrs: &AttributeVector,
) -> Result<BooleanDecision, RuleError> {
    let mut fired = Vec::new();
    for rule in &ruleset.rules {
        if evaluate_rule(rule, attrs)? {
            fired.push(rule.name.clone());
        }
    }
    Ok(BooleanDecision {
        label: !fired.is_empty(),
        fired,
    })
}
