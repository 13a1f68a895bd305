//! First-match rule policy mapping an intake profile to a stimulus.
//!
//! ```text
//! IF psqi.global > 5 AND brums.fatigue >= 4 THEN BinauralBeat
//! DEFAULT RainSound
//! ```

use std::fmt;
use std::path::Path;

use super::{IntakeError, IntakeProfile, Result};
use crate::stimulus::StimulusKind;

/// The shipped placeholder policy.
pub const DEFAULT_POLICY: &str = include_str!("../../data/default_policy.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Gt,
    Ge,
    Lt,
    Le,
    Eq,
    Ne,
}

impl Comparison {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            ">" => Comparison::Gt,
            ">=" => Comparison::Ge,
            "<" => Comparison::Lt,
            "<=" => Comparison::Le,
            "==" | "=" => Comparison::Eq,
            "!=" => Comparison::Ne,
            _ => return None,
        })
    }

    pub fn eval(self, a: f64, b: f64) -> bool {
        match self {
            Comparison::Gt => a > b,
            Comparison::Ge => a >= b,
            Comparison::Lt => a < b,
            Comparison::Le => a <= b,
            Comparison::Eq => a == b,
            Comparison::Ne => a != b,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Comparison::Gt => ">",
            Comparison::Ge => ">=",
            Comparison::Lt => "<",
            Comparison::Le => "<=",
            Comparison::Eq => "==",
            Comparison::Ne => "!=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub field: String,
    pub op: Comparison,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub conditions: Vec<Condition>,
    pub stimulus: StimulusKind,
}

impl Rule {
    pub fn matches(&self, profile: &IntakeProfile) -> bool {
        self.conditions.iter().all(|c| {
            profile
                .field(&c.field)
                .is_some_and(|v| c.op.eval(v, c.value))
        })
    }
}

/// Ordered rules plus a mandatory default. Immutable once parsed.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub name: String,
    pub rules: Vec<Rule>,
    pub default: StimulusKind,
}

impl Policy {
    /// Only a default.
    pub fn constant(stimulus: StimulusKind) -> Self {
        Self {
            name: format!("constant:{stimulus}"),
            rules: Vec::new(),
            default: stimulus,
        }
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_POLICY, "builtin-placeholder").expect("shipped policy parses")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path)?, &path.display().to_string())
    }

    /// Parse a policy document. Errors name the 1-based rule and line.
    pub fn parse(text: &str, name: &str) -> Result<Self> {
        let known = IntakeProfile::field_names();
        let mut rules = Vec::new();
        let mut default = None;
        let mut rule_no = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            rule_no += 1;
            let err = |msg: String| IntakeError::Policy {
                rule: rule_no,
                line: i + 1,
                msg,
            };
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens[0].to_ascii_uppercase().as_str() {
                "DEFAULT" => {
                    if tokens.len() != 2 {
                        return Err(err("expected `DEFAULT <stimulus>`".into()));
                    }
                    if default.is_some() {
                        return Err(err("second DEFAULT".into()));
                    }
                    default = Some(tokens[1].parse().map_err(|e| err(format!("{e}")))?);
                }
                "IF" => {
                    let then = tokens
                        .iter()
                        .position(|t| t.eq_ignore_ascii_case("THEN"))
                        .ok_or_else(|| err("missing THEN".into()))?;
                    if then + 2 != tokens.len() {
                        return Err(err("expected one stimulus after THEN".into()));
                    }
                    let stimulus = tokens[then + 1].parse().map_err(|e| err(format!("{e}")))?;
                    let mut conditions = Vec::new();
                    for clause in tokens[1..then].split(|t| t.eq_ignore_ascii_case("AND")) {
                        let [field, op, value] = clause else {
                            return Err(err(format!("expected `<field> <op> <number>`, got {:?}", clause.join(" "))));
                        };
                        let field = field.to_ascii_lowercase();
                        if !known.contains(&field) {
                            return Err(err(format!("unknown field {field:?}")));
                        }
                        let op = Comparison::parse(op).ok_or_else(|| err(format!("unknown operator {op:?}")))?;
                        let value: f64 = value
                            .parse()
                            .ok()
                            .filter(|v: &f64| v.is_finite())
                            .ok_or_else(|| err(format!("bad number {value:?}")))?;
                        conditions.push(Condition { field, op, value });
                    }
                    rules.push(Rule {
                        conditions,
                        stimulus,
                    });
                }
                other => return Err(err(format!("expected IF or DEFAULT, got {other:?}"))),
            }
        }
        Ok(Self {
            name: name.to_string(),
            rules,
            default: default.ok_or(IntakeError::MissingDefault)?,
        })
    }

    pub fn select(&self, profile: &IntakeProfile) -> StimulusKind {
        self.rules
            .iter()
            .find(|r| r.matches(profile))
            .map_or(self.default, |r| r.stimulus)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            let conds: Vec<String> = r
                .conditions
                .iter()
                .map(|c| format!("{} {} {}", c.field, c.op.symbol(), c.value))
                .collect();
            writeln!(f, "IF {} THEN {}", conds.join(" AND "), r.stimulus)?;
        }
        writeln!(f, "DEFAULT {}", self.default)
    }
}
