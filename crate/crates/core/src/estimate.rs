//! Labelled numeric results.
//!
//! Sampled infima are upper bounds of the true constant, sampled suprema are
//! lower bounds; closed-form evaluations are exact. Every reported number
//! carries that label together with the budget that produced it.

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Which side of the true value an estimate can sit on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Upper,
    Lower,
    Exact,
}

/// A constant that may be infinite (interior points) or undefined because
/// no sample qualified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Finite(f64),
    Saturated,
    Vacuous,
}

impl Value {
    pub fn finite(&self) -> Option<f64> {
        match self {
            Value::Finite(v) => Some(*v),
            _ => None,
        }
    }

    /// Finite value, +inf for saturation, None when vacuous.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Finite(v) => Some(*v),
            Value::Saturated => Some(f64::INFINITY),
            Value::Vacuous => None,
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Finite(v) if v.is_finite() => s.serialize_f64(*v),
            Value::Finite(_) | Value::Saturated => s.serialize_str("inf"),
            Value::Vacuous => s.serialize_str("vacuous"),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Value;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number, \"inf\" or \"vacuous\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Value, E> {
                Ok(Value::Finite(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Value, E> {
                Ok(Value::Finite(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Value, E> {
                Ok(Value::Finite(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Value, E> {
                match v {
                    "inf" => Ok(Value::Saturated),
                    "vacuous" => Ok(Value::Vacuous),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: Value,
    pub bound: Bound,
    /// Samples requested.
    pub budget: usize,
    /// Samples that actually entered the infimum or supremum.
    pub used: usize,
    /// Coordinates of the sample attaining the reported value, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
}

impl Estimate {
    pub fn exact(v: f64) -> Self {
        Estimate {
            value: Value::Finite(v),
            bound: Bound::Exact,
            budget: 0,
            used: 0,
            witness: None,
        }
    }

    pub fn saturated(bound: Bound, budget: usize) -> Self {
        Estimate {
            value: Value::Saturated,
            bound,
            budget,
            used: 0,
            witness: None,
        }
    }

    pub fn vacuous(bound: Bound, budget: usize) -> Self {
        Estimate {
            value: Value::Vacuous,
            bound,
            budget,
            used: 0,
            witness: None,
        }
    }

    pub fn get(&self) -> Option<f64> {
        self.value.finite()
    }
}

/// How a boolean verdict was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    /// Closed-form or structural decision.
    Exact,
    /// Finite sampling: failures come with witnesses, successes are statistical.
    Sampled,
    /// No sample qualified; the property holds for want of counterexamples.
    Vacuous,
    /// Derived from another verdict through a known implication.
    Implied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    /// None means no information.
    pub holds: Option<bool>,
    pub basis: Basis,
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<Vec<f64>>>,
}

impl Verdict {
    pub fn exact(holds: bool) -> Self {
        Verdict {
            holds: Some(holds),
            basis: Basis::Exact,
            samples: 0,
            witness: None,
        }
    }

    pub fn sampled(holds: bool, samples: usize) -> Self {
        Verdict {
            holds: Some(holds),
            basis: Basis::Sampled,
            samples,
            witness: None,
        }
    }

    pub fn vacuous() -> Self {
        Verdict {
            holds: Some(true),
            basis: Basis::Vacuous,
            samples: 0,
            witness: None,
        }
    }

    pub fn unknown() -> Self {
        Verdict {
            holds: None,
            basis: Basis::Sampled,
            samples: 0,
            witness: None,
        }
    }

    pub fn with_witness(mut self, w: Vec<Vec<f64>>) -> Self {
        self.witness = Some(w);
        self
    }

    pub fn is_true(&self) -> bool {
        self.holds == Some(true)
    }

    pub fn is_false(&self) -> bool {
        self.holds == Some(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_round_trips_through_json() {
        for v in [Value::Finite(0.25), Value::Saturated, Value::Vacuous] {
            let s = serde_json::to_string(&v).unwrap();
            let back: Value = serde_json::from_str(&s).unwrap();
            assert_eq!(v, back);
        }
    }
}
