//! JSON documents read and written by the command line.

use std::fmt;
use std::path::Path;

use mvtsp::{validate, Instance, Multiplicity, RawInstance, ValidationError, Weight};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A solution's cost: a number, or the string `"infeasible"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CostField {
    Finite(Weight),
    Infeasible,
}

impl Serialize for CostField {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            CostField::Finite(c) => s.serialize_u128(*c),
            CostField::Infeasible => s.serialize_str("infeasible"),
        }
    }
}

impl<'de> Deserialize<'de> for CostField {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct CostVisitor;

        impl Visitor<'_> for CostVisitor {
            type Value = CostField;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a nonnegative integer or \"infeasible\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<CostField, E> {
                Ok(CostField::Finite(v.into()))
            }

            fn visit_u128<E: de::Error>(self, v: u128) -> Result<CostField, E> {
                Ok(CostField::Finite(v))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<CostField, E> {
                match v {
                    "infeasible" => Ok(CostField::Infeasible),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }

        d.deserialize_any(CostVisitor)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub cost: CostField,
    pub multiplicity: Option<Vec<Vec<u64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tour: Option<Vec<usize>>,
    pub engine: String,
    pub seed: u64,
    pub wall_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memo_states: Option<u64>,
}

impl SolutionFile {
    pub fn matrix(&self) -> Option<Multiplicity> {
        Multiplicity::from_rows(self.multiplicity.as_ref()?)
    }
}

#[derive(Debug)]
pub enum LoadError {
    Parse(String),
    Invalid(ValidationError),
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            LoadError::Parse(msg) => write!(f, "{msg}"),
            LoadError::Invalid(e) => write!(f, "invalid instance: {e}"),
        }
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| LoadError::Parse(format!("{}: {e}", path.display())))
}

pub fn load_instance(path: &Path) -> Result<Instance, LoadError> {
    let raw: RawInstance = read_json(path)?;
    validate(&raw).map_err(LoadError::Invalid)
}

#[derive(Serialize)]
pub struct KernelFile {
    pub reduced: RawInstance,
    pub offset: Vec<Vec<u64>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_field_round_trip() {
        for c in [CostField::Finite(0), CostField::Finite(u64::MAX.into()), CostField::Infeasible] {
            let text = serde_json::to_string(&c).unwrap();
            assert_eq!(serde_json::from_str::<CostField>(&text).unwrap(), c);
        }
        assert_eq!(serde_json::to_string(&CostField::Finite(1 << 70)).unwrap(), "1180591620717411303424");
        assert!(serde_json::from_str::<CostField>("\"free\"").is_err());
        assert!(serde_json::from_str::<CostField>("-3").is_err());
    }
}
