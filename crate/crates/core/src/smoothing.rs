//! Bang-bang control laws and their smooth surrogates.
//!
//! A bang-bang control with bounds `[u_min, u_max]` selects `u_max` when the
//! switching function `S` is negative and `u_min` when it is positive:
//!
//! ```text
//! u = ½ [(u_max + u_min) − (u_max − u_min) · sgn(S)]
//! ```
//!
//! The smooth filters replace `sgn` with a bounded, strictly increasing,
//! infinitely differentiable function:
//!
//! * normalized L²-norm: `x / sqrt(δ + x²)`
//! * hyperbolic tangent: `tanh(x / ρ)`
//!
//! Both recover `sgn` pointwise as their constant goes to zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which approximation of the sign function is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    /// The discontinuous sign function itself.
    Hard,
    /// `x / sqrt(δ + x²)`.
    L2,
    /// `tanh(x / ρ)`.
    Tanh,
}

impl FilterKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FilterKind::Hard => "hard",
            FilterKind::L2 => "l2",
            FilterKind::Tanh => "tanh",
        }
    }

    /// Smallest smoothing constant used by the decade continuation for this filter.
    pub fn default_floor(&self) -> f64 {
        match self {
            FilterKind::Tanh => 1e-6,
            _ => 1e-8,
        }
    }
}

impl std::str::FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hard" | "sign" | "hardsign" => Ok(FilterKind::Hard),
            "l2" | "l2norm" => Ok(FilterKind::L2),
            "tanh" => Ok(FilterKind::Tanh),
            other => Err(Error::InvalidArgument(format!("unknown filter kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for FilterKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A sign-function surrogate together with its smoothing constant
/// (δ for [`FilterKind::L2`], ρ for [`FilterKind::Tanh`], ignored for
/// [`FilterKind::Hard`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingFilter {
    pub kind: FilterKind,
    pub constant: f64,
}

impl SmoothingFilter {
    pub fn new(kind: FilterKind, constant: f64) -> Result<Self> {
        let filter = Self { kind, constant };
        filter.validate()?;
        Ok(filter)
    }

    pub fn hard() -> Self {
        Self { kind: FilterKind::Hard, constant: 0.0 }
    }

    pub fn l2(delta: f64) -> Result<Self> {
        Self::new(FilterKind::L2, delta)
    }

    pub fn tanh(rho: f64) -> Result<Self> {
        Self::new(FilterKind::Tanh, rho)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            FilterKind::Hard => Ok(()),
            FilterKind::L2 | FilterKind::Tanh => {
                if self.constant.is_finite() && self.constant > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!(
                        "{} smoothing constant must be positive and finite, got {}",
                        self.kind, self.constant
                    )))
                }
            }
        }
    }

    /// Same filter family with a different constant.
    pub fn with_constant(&self, constant: f64) -> Result<Self> {
        Self::new(self.kind, constant)
    }

    /// Approximation of `sgn(x)`.
    ///
    /// The hard filter returns 0 at `x == 0`, which places the control at the
    /// midpoint of its bounds.
    pub fn apply(&self, x: f64) -> Result<f64> {
        match self.kind {
            FilterKind::Hard => {
                if x.is_nan() {
                    return Err(Error::InvalidArgument("sign of NaN".into()));
                }
                Ok(if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                })
            }
            FilterKind::L2 => sat_l2(x, self.constant),
            FilterKind::Tanh => sat_tanh(x, self.constant),
        }
    }

    /// Derivative of [`apply`](Self::apply) with respect to `x`. Zero for the
    /// hard filter away from the origin.
    pub fn slope(&self, x: f64) -> Result<f64> {
        self.validate()?;
        if !x.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite input {x}")));
        }
        Ok(match self.kind {
            FilterKind::Hard => 0.0,
            FilterKind::L2 => {
                let d = self.constant + x * x;
                self.constant / (d * d.sqrt())
            }
            FilterKind::Tanh => {
                let th = (x / self.constant).tanh();
                (1.0 - th * th) / self.constant
            }
        })
    }
}

/// Lower and upper bound of a scalar control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlBounds {
    pub u_min: f64,
    pub u_max: f64,
}

impl ControlBounds {
    pub fn new(u_min: f64, u_max: f64) -> Result<Self> {
        if !(u_min.is_finite() && u_max.is_finite() && u_min < u_max) {
            return Err(Error::InvalidArgument(format!(
                "control bounds require u_min < u_max, got [{u_min}, {u_max}]"
            )));
        }
        Ok(Self { u_min, u_max })
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.u_max + self.u_min)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.u_max - self.u_min)
    }
}

/// Normalized L²-norm filter `x / sqrt(δ + x²)`.
///
/// Evaluated as written; inputs with `|x| > 1e154` overflow `x²` and are
/// outside the supported range.
pub fn sat_l2(x: f64, delta: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!("sat_l2: non-finite input {x}")));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidArgument(format!("sat_l2: delta must be positive, got {delta}")));
    }
    Ok(x / (delta + x * x).sqrt())
}

/// Hyperbolic-tangent filter `tanh(x / ρ)`.
pub fn sat_tanh(x: f64, rho: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!("sat_tanh: non-finite input {x}")));
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidArgument(format!("sat_tanh: rho must be positive, got {rho}")));
    }
    Ok((x / rho).tanh())
}

/// Smoothed bang-bang control `½[(u_max+u_min) − (u_max−u_min)·filter(S)]`.
pub fn smooth_control(s: f64, bounds: ControlBounds, filter: SmoothingFilter) -> Result<f64> {
    filter.validate()?;
    if filter.kind == FilterKind::Hard {
        if s.is_nan() {
            return Err(Error::InvalidArgument("switching function is NaN".into()));
        }
        return Ok(hard_control(s, bounds));
    }
    let sigma = filter.apply(s)?;
    Ok(bounds.midpoint() - bounds.half_width() * sigma)
}

/// Derivative of [`smooth_control`] with respect to the switching function.
pub fn smooth_control_slope(s: f64, bounds: ControlBounds, filter: SmoothingFilter) -> Result<f64> {
    Ok(-bounds.half_width() * filter.slope(s)?)
}

/// Exact bang-bang law: `u_max` for `S < 0`, `u_min` for `S > 0`, the bounds
/// midpoint at `S == 0`.
pub fn hard_control(s: f64, bounds: ControlBounds) -> f64 {
    if s < 0.0 {
        bounds.u_max
    } else if s > 0.0 {
        bounds.u_min
    } else {
        bounds.midpoint()
    }
}
