//! Generator rules `(T_n)` and their JSON documents.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::IntegerEndomorphism;

/// Integer literal that may be a JSON number or, for large values, a decimal string.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IntLit {
    Small(i64),
    Big(String),
}

impl IntLit {
    pub fn to_bigint(&self) -> Result<BigInt> {
        match self {
            IntLit::Small(v) => Ok(BigInt::from(*v)),
            IntLit::Big(s) => s
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad integer literal {s:?}"))),
        }
    }

    pub fn from_bigint(v: &BigInt) -> Self {
        match v.to_i64() {
            Some(s) => IntLit::Small(s),
            None => IntLit::Big(v.to_string()),
        }
    }
}

/// Multiplier table: explicit list, or the progression `q_n = start + step (n - 1)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MultiplierDoc {
    List(Vec<IntLit>),
    Progression { start: IntLit, step: IntLit },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    ConstantMatrix,
    CantorMultipliers,
    ExplicitList,
    MatrixFormula,
}

/// JSON form: `{"kind": ..., "dim": d, "multipliers": [...] | "matrices": [[[...]]]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleDocument {
    pub kind: RuleKind,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multipliers: Option<MultiplierDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrices: Option<Vec<Vec<Vec<IntLit>>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Multipliers {
    List(Vec<BigInt>),
    Progression { start: BigInt, step: BigInt },
}

#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorRule {
    /// `T_n = A` for all n.
    ConstantMatrix(IntegerEndomorphism),
    /// d = 1, `T_n` is multiplication by `q_n >= 2`.
    CantorMultipliers(Multipliers),
    /// `T_n = matrices[n - 1]`; undefined past the end of the list.
    ExplicitList(Vec<IntegerEndomorphism>),
    /// `T_n = table[(n - 1) mod len]`, defined for every n.
    MatrixFormula(Vec<IntegerEndomorphism>),
}

impl GeneratorRule {
    pub fn doubling() -> Self {
        Self::ConstantMatrix(IntegerEndomorphism::scalar(1, BigInt::from(2)))
    }

    pub fn constant(a: IntegerEndomorphism) -> Self {
        Self::ConstantMatrix(a)
    }

    pub fn identity(dim: usize) -> Self {
        Self::ConstantMatrix(IntegerEndomorphism::identity(dim))
    }

    pub fn cantor(qs: &[i64]) -> Result<Self> {
        let rule = Self::CantorMultipliers(Multipliers::List(qs.iter().map(|&q| q.into()).collect()));
        rule.validate()?;
        Ok(rule)
    }

    /// `q_n = start + step (n - 1)`.
    pub fn cantor_progression(start: i64, step: i64) -> Result<Self> {
        let rule = Self::CantorMultipliers(Multipliers::Progression {
            start: start.into(),
            step: step.into(),
        });
        rule.validate()?;
        Ok(rule)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::ConstantMatrix(a) => a.dim(),
            Self::CantorMultipliers(_) => 1,
            Self::ExplicitList(ms) | Self::MatrixFormula(ms) => ms[0].dim(),
        }
    }

    /// Last index for which the rule is defined, if finite.
    pub fn horizon(&self) -> Option<usize> {
        match self {
            Self::CantorMultipliers(Multipliers::List(qs)) => Some(qs.len()),
            Self::ExplicitList(ms) => Some(ms.len()),
            _ => None,
        }
    }

    /// Multiplier `q_n` for one-dimensional scalar rules.
    pub fn multiplier(&self, n: usize) -> Option<BigInt> {
        match self {
            Self::CantorMultipliers(Multipliers::List(qs)) => qs.get(n.checked_sub(1)?).cloned(),
            Self::CantorMultipliers(Multipliers::Progression { start, step }) => {
                Some(start + step * BigInt::from(n.checked_sub(1)?))
            }
            Self::ConstantMatrix(a) if a.dim() == 1 => Some(a.get(0, 0).clone()),
            _ => None,
        }
    }

    /// `T_n` for `n >= 1`.
    pub fn generator(&self, n: usize) -> Result<IntegerEndomorphism> {
        if n == 0 {
            return Err(Error::OutOfRange("generators are indexed from 1".into()));
        }
        match self {
            Self::ConstantMatrix(a) => Ok(a.clone()),
            Self::CantorMultipliers(_) => {
                let q = self.multiplier(n).ok_or(Error::RuleExhausted { n })?;
                Ok(IntegerEndomorphism::scalar(1, q))
            }
            Self::ExplicitList(ms) => ms.get(n - 1).cloned().ok_or(Error::RuleExhausted { n }),
            Self::MatrixFormula(ms) => Ok(ms[(n - 1) % ms.len()].clone()),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::CantorMultipliers(Multipliers::List(qs)) => {
                if qs.is_empty() {
                    return Err(Error::InvalidConfig("empty multiplier list".into()));
                }
                if let Some(q) = qs.iter().find(|q| **q < BigInt::from(2)) {
                    return Err(Error::InvalidConfig(format!("multiplier {q} < 2")));
                }
            }
            Self::CantorMultipliers(Multipliers::Progression { start, step }) => {
                if *start < BigInt::from(2) || *step < BigInt::from(0) {
                    return Err(Error::InvalidConfig(
                        "progression needs start >= 2 and step >= 0".into(),
                    ));
                }
            }
            Self::ExplicitList(ms) | Self::MatrixFormula(ms) => {
                if ms.is_empty() {
                    return Err(Error::InvalidConfig("empty matrix list".into()));
                }
                let d = ms[0].dim();
                if ms.iter().any(|m| m.dim() != d) {
                    return Err(Error::InvalidConfig("matrices of mixed dimension".into()));
                }
            }
            Self::ConstantMatrix(_) => {}
        }
        Ok(())
    }

    pub fn from_document(doc: &RuleDocument) -> Result<Self> {
        let matrices = || -> Result<Vec<IntegerEndomorphism>> {
            let raw = doc
                .matrices
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("rule needs \"matrices\"".into()))?;
            raw.iter()
                .map(|m| {
                    let rows: Result<Vec<Vec<BigInt>>> =
                        m.iter().map(|r| r.iter().map(IntLit::to_bigint).collect()).collect();
                    let a = IntegerEndomorphism::from_rows(rows?)
                        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
                    if a.dim() != doc.dim {
                        return Err(Error::InvalidConfig(format!(
                            "matrix of size {} in a dim {} rule",
                            a.dim(),
                            doc.dim
                        )));
                    }
                    Ok(a)
                })
                .collect()
        };
        if doc.dim == 0 {
            return Err(Error::InvalidConfig("dim must be positive".into()));
        }
        let rule = match doc.kind {
            RuleKind::ConstantMatrix => {
                let mut ms = matrices()?;
                if ms.len() != 1 {
                    return Err(Error::InvalidConfig("constant_matrix takes one matrix".into()));
                }
                Self::ConstantMatrix(ms.remove(0))
            }
            RuleKind::CantorMultipliers => {
                if doc.dim != 1 {
                    return Err(Error::InvalidConfig("cantor_multipliers requires dim 1".into()));
                }
                let m = doc
                    .multipliers
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("rule needs \"multipliers\"".into()))?;
                Self::CantorMultipliers(match m {
                    MultiplierDoc::List(qs) => {
                        Multipliers::List(qs.iter().map(IntLit::to_bigint).collect::<Result<_>>()?)
                    }
                    MultiplierDoc::Progression { start, step } => Multipliers::Progression {
                        start: start.to_bigint()?,
                        step: step.to_bigint()?,
                    },
                })
            }
            RuleKind::ExplicitList => Self::ExplicitList(matrices()?),
            RuleKind::MatrixFormula => Self::MatrixFormula(matrices()?),
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn to_document(&self) -> RuleDocument {
        let mats = |ms: &[IntegerEndomorphism]| {
            Some(
                ms.iter()
                    .map(|m| {
                        m.rows().iter().map(|r| r.iter().map(IntLit::from_bigint).collect()).collect()
                    })
                    .collect(),
            )
        };
        match self {
            Self::ConstantMatrix(a) => RuleDocument {
                kind: RuleKind::ConstantMatrix,
                dim: a.dim(),
                multipliers: None,
                matrices: mats(std::slice::from_ref(a)),
            },
            Self::CantorMultipliers(m) => RuleDocument {
                kind: RuleKind::CantorMultipliers,
                dim: 1,
                multipliers: Some(match m {
                    Multipliers::List(qs) => MultiplierDoc::List(qs.iter().map(IntLit::from_bigint).collect()),
                    Multipliers::Progression { start, step } => MultiplierDoc::Progression {
                        start: IntLit::from_bigint(start),
                        step: IntLit::from_bigint(step),
                    },
                }),
                matrices: None,
            },
            Self::ExplicitList(ms) => RuleDocument {
                kind: RuleKind::ExplicitList,
                dim: ms[0].dim(),
                multipliers: None,
                matrices: mats(ms),
            },
            Self::MatrixFormula(ms) => RuleDocument {
                kind: RuleKind::MatrixFormula,
                dim: ms[0].dim(),
                multipliers: None,
                matrices: mats(ms),
            },
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: RuleDocument = serde_json::from_str(s)?;
        Self::from_document(&doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("rule documents always serialize")
    }

    /// True when every `T_n` is a scalar multiple of the identity in dimension one.
    pub fn is_multiplier_rule(&self) -> bool {
        self.dim() == 1
            && matches!(self, Self::CantorMultipliers(_) | Self::ConstantMatrix(_))
            && self.multiplier(1).is_some_and(|q| q > BigInt::one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documents() {
        let r = GeneratorRule::from_json(r#"{"kind":"cantor_multipliers","dim":1,"multipliers":[2,3,4]}"#)
            .unwrap();
        assert_eq!(r.horizon(), Some(3));
        assert_eq!(r.generator(3).unwrap(), IntegerEndomorphism::scalar(1, 4.into()));
        assert!(matches!(r.generator(4), Err(Error::RuleExhausted { n: 4 })));

        let r = GeneratorRule::from_json(
            r#"{"kind":"cantor_multipliers","dim":1,"multipliers":{"start":2,"step":1}}"#,
        )
        .unwrap();
        assert_eq!(r.multiplier(10), Some(BigInt::from(11)));

        let r = GeneratorRule::from_json(
            r#"{"kind":"constant_matrix","dim":2,"matrices":[[[2,1],[1,"1"]]]}"#,
        )
        .unwrap();
        assert_eq!(r.generator(7).unwrap(), IntegerEndomorphism::from_i64(&[&[2, 1], &[1, 1]]).unwrap());

        let r = GeneratorRule::from_json(
            r#"{"kind":"matrix_formula","dim":1,"matrices":[[[2]],[[3]]]}"#,
        )
        .unwrap();
        assert_eq!(r.generator(4).unwrap(), IntegerEndomorphism::scalar(1, 3.into()));
    }

    #[test]
    fn rejects_bad_documents() {
        for bad in [
            r#"{"kind":"cantor_multipliers","dim":1,"multipliers":[2,1]}"#,
            r#"{"kind":"cantor_multipliers","dim":2,"multipliers":[2]}"#,
            r#"{"kind":"constant_matrix","dim":2,"matrices":[[[2]]]}"#,
            r#"{"kind":"explicit_list","dim":1}"#,
            r#"{"kind":"spiral","dim":1}"#,
            r#"{"kind":"constant_matrix","dim":1,"matrices":[[[2]]],"extra":1}"#,
        ] {
            assert!(GeneratorRule::from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn document_roundtrip() {
        let rules = [
            GeneratorRule::doubling(),
            GeneratorRule::cantor(&[2, 3, 5]).unwrap(),
            GeneratorRule::cantor_progression(2, 1).unwrap(),
            GeneratorRule::ExplicitList(vec![IntegerEndomorphism::scalar(
                2,
                BigInt::from(10).pow(30),
            )]),
        ];
        for r in rules {
            assert_eq!(GeneratorRule::from_json(&r.to_json()).unwrap(), r);
        }
    }
}
