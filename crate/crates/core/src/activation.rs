use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Component-wise activation used by every hidden layer of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Logistic,
    Tanh,
    Relu,
}

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Logistic, Activation::Tanh, Activation::Relu];

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Logistic => logistic(z),
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Inverse on the activation's range. Relu uses the pseudo-inverse that is
    /// the identity on positive values and 0 elsewhere.
    #[inline]
    pub fn inverse(self, y: f64) -> f64 {
        match self {
            Activation::Logistic => (y / (1.0 - y)).ln(),
            Activation::Tanh => y.atanh(),
            Activation::Relu => {
                if y > 0.0 {
                    y
                } else {
                    0.0
                }
            }
        }
    }

    /// Derivative expressed through the activation's output `y = apply(z)`.
    #[inline]
    pub(crate) fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Logistic => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Closed strength domain of arguments under this activation.
    pub fn domain(self) -> (f64, f64) {
        match self {
            Activation::Logistic => (0.0, 1.0),
            Activation::Tanh => (-1.0, 1.0),
            Activation::Relu => (0.0, f64::INFINITY),
        }
    }

    pub fn in_domain(self, v: f64) -> bool {
        let (lo, hi) = self.domain();
        v >= lo && v <= hi
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Logistic => "logistic",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "logistic" => Ok(Activation::Logistic),
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::Parse {
                field: "activation".into(),
                message: format!("unknown activation `{other}`; supported: logistic, tanh, relu"),
            }),
        }
    }
}

#[inline]
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
