//! Named test functions `f` whose expectations `eta_n(f)` are estimated.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// A state that named test functions can be evaluated on.
///
/// Real-valued states evaluate to themselves; finite-state indices evaluate to
/// the index as a real and additionally support tabulated functions.
pub trait Observable {
    fn real_value(&self) -> f64;
    fn state_index(&self) -> Option<usize> {
        None
    }
}

impl Observable for f64 {
    fn real_value(&self) -> f64 {
        *self
    }
}

impl Observable for usize {
    fn real_value(&self) -> f64 {
        *self as f64
    }
    fn state_index(&self) -> Option<usize> {
        Some(*self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TestFunction {
    /// `f(x) = x`
    Identity,
    /// `f(x) = x^2`
    Square,
    /// `f(x) = 1{a <= x < b}`
    Indicator { a: f64, b: f64 },
    /// Tabulated values over the states of a finite model.
    Table(Vec<f64>),
}

impl TestFunction {
    /// Evaluate at `x`. Tabulated functions return NaN on states without an
    /// index or outside the table; callers validate compatibility up front.
    pub fn eval<S: Observable + ?Sized>(&self, x: &S) -> f64 {
        match self {
            TestFunction::Identity => x.real_value(),
            TestFunction::Square => {
                let v = x.real_value();
                v * v
            }
            TestFunction::Indicator { a, b } => {
                let v = x.real_value();
                if *a <= v && v < *b {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Table(values) => x
                .state_index()
                .and_then(|i| values.get(i).copied())
                .unwrap_or(f64::NAN),
        }
    }

    /// The function as a vector over states `0..d`.
    pub fn to_vector(&self, d: usize) -> Vec<f64> {
        (0..d).map(|i| self.eval(&i)).collect()
    }

    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Identity => write!(f, "identity"),
            TestFunction::Square => write!(f, "square"),
            TestFunction::Indicator { a, b } => write!(f, "indicator({a},{b})"),
            TestFunction::Table(v) => {
                write!(f, "table(")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
        }
    }
}

fn parse_args(body: &str, name: &str) -> Result<Vec<f64>, Error> {
    body.split(',')
        .map(|t| {
            t.trim().parse::<f64>().map_err(|_| {
                Error::InvalidParameter(format!("bad argument `{t}` in {name}(...)"))
            })
        })
        .collect()
}

impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "identity" => return Ok(TestFunction::Identity),
            "square" => return Ok(TestFunction::Square),
            _ => {}
        }
        let (head, rest) = s
            .split_once('(')
            .ok_or_else(|| Error::InvalidParameter(format!("unknown test function `{s}`")))?;
        let body = rest
            .strip_suffix(')')
            .ok_or_else(|| Error::InvalidParameter(format!("missing `)` in `{s}`")))?;
        match head.trim() {
            "indicator" => match parse_args(body, "indicator")?.as_slice() {
                [a, b] if a < b => Ok(TestFunction::Indicator { a: *a, b: *b }),
                _ => Err(Error::InvalidParameter(format!(
                    "indicator needs two bounds a < b, got `{s}`"
                ))),
            },
            "table" => Ok(TestFunction::Table(parse_args(body, "table")?)),
            other => Err(Error::InvalidParameter(format!("unknown test function `{other}`"))),
        }
    }
}

impl TryFrom<String> for TestFunction {
    type Error = Error;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<TestFunction> for String {
    fn from(f: TestFunction) -> String {
        f.to_string()
    }
}
