//! Stability-class (ASC) coefficient tables for the Briggs and Smith schemes.
//!
//! The coefficients live in a TOML data file (`data/asc_coefficients.toml`)
//! so that a different published variant can be dropped in without touching
//! code. The shipped file is embedded at compile time and available through
//! [`AscTables::shipped`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

const SHIPPED: &str = include_str!("../../data/asc_coefficients.toml");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Briggs,
    Smith,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Briggs => "Briggs",
            Scheme::Smith => "Smith",
        })
    }
}

/// Pasquill atmospheric stability class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StabilityClass {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl StabilityClass {
    pub const ALL: [StabilityClass; 6] = [
        StabilityClass::A,
        StabilityClass::B,
        StabilityClass::C,
        StabilityClass::D,
        StabilityClass::E,
        StabilityClass::F,
    ];
}

impl fmt::Display for StabilityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for StabilityClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Self::A),
            "B" => Ok(Self::B),
            "C" => Ok(Self::C),
            "D" => Ok(Self::D),
            "E" => Ok(Self::E),
            "F" => Ok(Self::F),
            other => Err(Error::Config(format!("unknown stability class {other:?}"))),
        }
    }
}

/// One sigma-versus-distance law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SigmaLaw {
    /// `a * x * (1 + c x)^p`
    Rational { a: f64, c: f64, p: f64 },
    /// `a * x^b`
    Power { a: f64, b: f64 },
}

impl SigmaLaw {
    pub fn eval<R: Real>(&self, x: R) -> R {
        match *self {
            SigmaLaw::Rational { a, c, p } => {
                if c == 0.0 || p == 0.0 {
                    x * a
                } else {
                    x * a * (x * c + 1.0).pow(R::cst(p))
                }
            }
            SigmaLaw::Power { a, b } => x.pow(R::cst(b)) * a,
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let ok = |v: f64| v.is_finite();
        match *self {
            SigmaLaw::Rational { a, c, p } => {
                if !(ok(a) && ok(c) && ok(p)) {
                    return Err("non-finite coefficient".into());
                }
                if a <= 0.0 {
                    return Err(format!("scale a = {a} must be positive"));
                }
                if c < 0.0 {
                    return Err(format!("c = {c} must be non-negative"));
                }
            }
            SigmaLaw::Power { a, b } => {
                if !(ok(a) && ok(b)) {
                    return Err("non-finite coefficient".into());
                }
                if a <= 0.0 || b <= 0.0 {
                    return Err(format!("coefficients a = {a}, b = {b} must be positive"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassCoefficients {
    pub horizontal: SigmaLaw,
    pub vertical: SigmaLaw,
}

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    scheme: Scheme,
    class: StabilityClass,
    horizontal: SigmaLaw,
    vertical: SigmaLaw,
}

#[derive(Debug, Serialize, Deserialize)]
struct TableFile {
    version: u32,
    entry: Vec<Entry>,
}

/// Immutable coefficient store keyed by (scheme, class).
#[derive(Clone, Debug, PartialEq)]
pub struct AscTables {
    version: u32,
    entries: BTreeMap<(Scheme, StabilityClass), ClassCoefficients>,
}

impl AscTables {
    /// The coefficient file shipped with the crate.
    pub fn shipped() -> Self {
        Self::from_toml_str(SHIPPED).expect("shipped ASC table is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: TableFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("ASC table: {e}")))?;
        let mut entries = BTreeMap::new();
        for e in file.entry {
            for (dir, law) in [("horizontal", e.horizontal), ("vertical", e.vertical)] {
                law.validate().map_err(|msg| {
                    Error::Config(format!("{}/{} {dir}: {msg}", e.scheme, e.class))
                })?;
            }
            let key = (e.scheme, e.class);
            let coeffs = ClassCoefficients {
                horizontal: e.horizontal,
                vertical: e.vertical,
            };
            if entries.insert(key, coeffs).is_some() {
                return Err(Error::Config(format!(
                    "duplicate entry {}/{}",
                    e.scheme, e.class
                )));
            }
        }
        for scheme in [Scheme::Briggs, Scheme::Smith] {
            for class in StabilityClass::ALL {
                if !entries.contains_key(&(scheme, class)) {
                    return Err(Error::Config(format!(
                        "ASC table is missing {scheme}/{class}"
                    )));
                }
            }
        }
        Ok(Self {
            version: file.version,
            entries,
        })
    }

    pub fn to_toml_string(&self) -> String {
        let file = TableFile {
            version: self.version,
            entry: self
                .entries
                .iter()
                .map(|(&(scheme, class), c)| Entry {
                    scheme,
                    class,
                    horizontal: c.horizontal,
                    vertical: c.vertical,
                })
                .collect(),
        };
        toml::to_string(&file).expect("ASC table serialises")
    }

    pub fn get(&self, scheme: Scheme, class: StabilityClass) -> ClassCoefficients {
        // Construction guarantees completeness.
        self.entries[&(scheme, class)]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn version(&self) -> u32 {
        self.version
    }
}
