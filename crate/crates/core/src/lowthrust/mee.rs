//! Two-body dynamics in modified equinoctial elements.
//!
//! With `w = 1 + f cos L + g sin L`, `s² = 1 + h² + k²` and thrust
//! acceleration components ordered (radial, transverse, normal), the element
//! rates are `ẋ = M(x)·a + D(x)` where `D` is nonzero only in `L`.

use nalgebra::{SMatrix, SVector, Vector3};
use num_dual::DualNum;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Modified equinoctial elements. `p` carries the length unit of the caller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeeState {
    pub p: f64,
    pub f: f64,
    pub g: f64,
    pub h: f64,
    pub k: f64,
    #[serde(rename = "L")]
    pub l: f64,
}

impl MeeState {
    pub fn new(p: f64, f: f64, g: f64, h: f64, k: f64, l: f64) -> Self {
        Self { p, f, g, h, k, l }
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self::new(x[0], x[1], x[2], x[3], x[4], x[5])
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.p, self.f, self.g, self.h, self.k, self.l]
    }

    pub fn w(&self) -> f64 {
        1.0 + self.f * self.l.cos() + self.g * self.l.sin()
    }

    pub fn validate(&self) -> Result<()> {
        check_domain(self.p, self.w())
    }
}

pub(crate) fn check_domain(p: f64, w: f64) -> Result<()> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::Domain(format!("semilatus rectum must be positive, got {p}")));
    }
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::Domain(format!("w = 1 + f cos L + g sin L must be positive, got {w}")));
    }
    Ok(())
}

/// Entries of `M` (6×3, row-major) and the drift `D_L`, generic so the same
/// code serves plain evaluation and forward-mode differentiation.
pub(crate) fn gauss_terms<T>(x: &[T; 6], mu: f64) -> ([[T; 3]; 6], T)
where
    T: DualNum<Primitive = f64> + Copy,
{
    let [p, f, g, h, k, l] = *x;
    let zero = T::from(0.0);
    let sq = (p / mu).sqrt();
    let (sl, cl) = l.sin_cos();
    let w = f * cl + g * sl + 1.0;
    let s2 = h * h + k * k + 1.0;
    let hk = h * sl - k * cl;
    let sq_w = sq / w;
    let m = [
        [zero, p * sq_w * 2.0, zero],
        [sq * sl, sq_w * ((w + 1.0) * cl + f), -(sq_w * g * hk)],
        [-(sq * cl), sq_w * ((w + 1.0) * sl + g), sq_w * f * hk],
        [zero, zero, sq_w * s2 * cl * 0.5],
        [zero, zero, sq_w * s2 * sl * 0.5],
        [zero, zero, sq_w * hk],
    ];
    let wp = w / p;
    let d_l = (p * mu).sqrt() * wp * wp;
    (m, d_l)
}

/// Control-influence matrix `M` and drift `D` at `x`.
pub fn mee_matrices(x: &MeeState, mu: f64) -> Result<(SMatrix<f64, 6, 3>, SVector<f64, 6>)> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!("gravitational parameter must be positive, got {mu}")));
    }
    x.validate()?;
    let (m, d_l) = gauss_terms(&x.to_array(), mu);
    let mut d = SVector::<f64, 6>::zeros();
    d[5] = d_l;
    Ok((SMatrix::<f64, 6, 3>::from_fn(|i, j| m[i][j]), d))
}

/// Below this norm of `Mᵀλ` the thrust direction is undefined.
pub const DEGENERATE_NORM: f64 = 1e-14;

/// Unit vector minimizing `λᵀMα`: `α = −Mᵀλ / ‖Mᵀλ‖`.
pub fn thrust_direction(m: &SMatrix<f64, 6, 3>, lambda: &SVector<f64, 6>) -> Result<Vector3<f64>> {
    let v = m.transpose() * lambda;
    let n = v.norm();
    if !(n >= DEGENERATE_NORM) {
        return Err(Error::DegenerateDirection(n));
    }
    Ok(-v / n)
}

/// Completed revolutions between two true longitudes:
/// `floor((L_f − L_0) / 2π)`.
pub fn count_revolutions(l0: f64, lf: f64) -> Result<u64> {
    if !(l0.is_finite() && lf.is_finite()) || lf < l0 {
        return Err(Error::Domain(format!("final true longitude {lf} precedes initial {l0}")));
    }
    Ok(((lf - l0) / std::f64::consts::TAU).floor() as u64)
}
