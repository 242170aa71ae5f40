//! Activation functions with exact derivatives and parity metadata.
//!
//! The even kinds (`Seagull`, `LogPowAbs`, `Square`) only ever see their
//! argument through `x * x` or `|x|`, so `eval(k, x)` and `eval(k, -x)` are
//! equal bit for bit.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default offset for `log(1 + (|x| + eps)^alpha)` when `alpha < 1`.
pub const DEFAULT_LOGPOW_EPS: f64 = 1e-2;

/// Parameters of `log(1 + (|x| + eps)^alpha)`.
///
/// Fields are private: for `alpha < 1` the derivative is unbounded at the
/// origin unless `eps > 0`, and [`LogPowAbs::new`] refuses that case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogPowAbs {
    alpha: f64,
    eps: f64,
}

impl LogPowAbs {
    pub fn new(alpha: f64, eps: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Activation(format!("logpow alpha must be > 0, got {alpha}")));
        }
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::Activation(format!("logpow eps must be >= 0, got {eps}")));
        }
        if alpha < 1.0 && eps == 0.0 {
            return Err(Error::Activation(format!(
                "logpow with alpha = {alpha} < 1 needs eps > 0 (unbounded gradient at 0)"
            )));
        }
        Ok(Self { alpha, eps })
    }

    /// Uses [`DEFAULT_LOGPOW_EPS`] when `alpha < 1`, otherwise no offset.
    pub fn with_default_eps(alpha: f64) -> Result<Self> {
        Self::new(alpha, if alpha < 1.0 { DEFAULT_LOGPOW_EPS } else { 0.0 })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ActivationKind {
    Relu,
    Elu { alpha: f64 },
    Sigmoid,
    Tanh,
    Softplus,
    /// `ln(1 + x²)`
    Seagull,
    LogPowAbs(LogPowAbs),
    Square,
    Sine,
    Identity,
}

impl ActivationKind {
    /// ELU with the conventional `alpha = 1`.
    pub const ELU: Self = Self::Elu { alpha: 1.0 };

    /// The five baselines of the benchmark grid.
    pub const BASELINES: [Self; 5] = [
        Self::Relu,
        Self::ELU,
        Self::Sigmoid,
        Self::Tanh,
        Self::Softplus,
    ];

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Self::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Self::Elu { alpha } => {
                if x >= 0.0 {
                    x
                } else {
                    alpha * x.exp_m1()
                }
            }
            Self::Sigmoid => sigmoid(x),
            Self::Tanh => x.tanh(),
            // max(x, 0) + ln(1 + e^-|x|) never exponentiates a positive number.
            Self::Softplus => x.max(0.0) + (-x.abs()).exp().ln_1p(),
            Self::Seagull => (x * x).ln_1p(),
            Self::LogPowAbs(p) => (x.abs() + p.eps).powf(p.alpha).ln_1p(),
            Self::Square => x * x,
            Self::Sine => x.sin(),
            Self::Identity => x,
        }
    }

    pub fn deriv(self, x: f64) -> f64 {
        match self {
            Self::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Elu { alpha } => {
                if x >= 0.0 {
                    1.0
                } else {
                    alpha * x.exp()
                }
            }
            Self::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Self::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Self::Softplus => sigmoid(x),
            Self::Seagull => 2.0 * x / (1.0 + x * x),
            Self::LogPowAbs(p) => {
                let r = x.abs() + p.eps;
                let pow = r.powf(p.alpha);
                let mag = if r == 0.0 {
                    // alpha >= 1 here; the limit is 0 for alpha > 1 and the
                    // kink at alpha == 1 gets the zero subgradient.
                    0.0
                } else {
                    p.alpha * pow / r / (1.0 + pow)
                };
                sign(x) * mag
            }
            Self::Square => 2.0 * x,
            Self::Sine => x.cos(),
            Self::Identity => 1.0,
        }
    }

    /// `(eval(x), deriv(x))` sharing the transcendental work. The value is
    /// bitwise equal to [`eval`](Self::eval).
    pub fn eval_deriv(self, x: f64) -> (f64, f64) {
        match self {
            Self::Sigmoid => {
                let s = sigmoid(x);
                (s, s * (1.0 - s))
            }
            Self::Tanh => {
                let t = x.tanh();
                (t, 1.0 - t * t)
            }
            Self::Softplus => {
                let e = (-x.abs()).exp();
                let d = if x >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
                (x.max(0.0) + e.ln_1p(), d)
            }
            Self::Seagull => {
                let sq = x * x;
                (sq.ln_1p(), 2.0 * x / (1.0 + sq))
            }
            Self::Elu { alpha } if x < 0.0 => {
                let e = x.exp();
                (alpha * x.exp_m1(), alpha * e)
            }
            _ => (self.eval(x), self.deriv(x)),
        }
    }

    /// `eval(k, x) == eval(k, -x)` for every `x`.
    pub fn is_even(self) -> bool {
        matches!(self, Self::Seagull | Self::LogPowAbs(_) | Self::Square)
    }

    /// Odd-symmetry flag. Only `Sine` carries it; `Tanh` and `Identity` are
    /// odd as functions but are catalogued as neither even nor odd.
    pub fn is_odd(self) -> bool {
        matches!(self, Self::Sine)
    }

    /// Points where the function is not differentiable.
    pub fn kinks(self) -> &'static [f64] {
        match self {
            Self::Relu => &[0.0],
            // C¹ at 0 only for alpha = 1; listed unconditionally.
            Self::Elu { .. } => &[0.0],
            Self::LogPowAbs(p) if p.alpha <= 1.0 || p.eps > 0.0 => &[0.0],
            _ => &[],
        }
    }

    pub fn name(self) -> String {
        self.to_string()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub const VALID_NAMES: &str =
    "relu, elu, elu:<alpha>, sigmoid, tanh, softplus, seagull, logpow:<alpha>[:<eps>], square, sine, identity";

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Relu => f.write_str("relu"),
            Self::Elu { alpha } if *alpha == 1.0 => f.write_str("elu"),
            Self::Elu { alpha } => write!(f, "elu:{alpha}"),
            Self::Sigmoid => f.write_str("sigmoid"),
            Self::Tanh => f.write_str("tanh"),
            Self::Softplus => f.write_str("softplus"),
            Self::Seagull => f.write_str("seagull"),
            Self::LogPowAbs(p) => write!(f, "logpow:{}:{}", p.alpha, p.eps),
            Self::Square => f.write_str("square"),
            Self::Sine => f.write_str("sine"),
            Self::Identity => f.write_str("identity"),
        }
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let mut parts = lower.split(':');
        let head = parts.next().unwrap_or_default();
        let args: Vec<&str> = parts.collect();
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| Error::Activation(format!("bad number {t:?} in {s:?}")))
        };
        let unknown = || {
            Error::Activation(format!("unknown activation {s:?}; valid names: {VALID_NAMES}"))
        };
        let kind = match (head, args.as_slice()) {
            ("relu", []) => Self::Relu,
            ("elu", []) => Self::ELU,
            ("elu", [a]) => Self::Elu { alpha: num(a)? },
            ("sigmoid", []) => Self::Sigmoid,
            ("tanh", []) => Self::Tanh,
            ("softplus", []) => Self::Softplus,
            ("seagull", []) => Self::Seagull,
            ("logpow", [a]) => Self::LogPowAbs(LogPowAbs::with_default_eps(num(a)?)?),
            ("logpow", [a, e]) => Self::LogPowAbs(LogPowAbs::new(num(a)?, num(e)?)?),
            ("square", []) => Self::Square,
            ("sine", []) => Self::Sine,
            ("identity", []) => Self::Identity,
            _ => return Err(unknown()),
        };
        Ok(kind)
    }
}

impl TryFrom<String> for ActivationKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ActivationKind> for String {
    fn from(k: ActivationKind) -> Self {
        k.to_string()
    }
}
