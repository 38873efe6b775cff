//! Closed forms for the flat critical pair `u = x + 1` (above), `u = -x` (below) on the
//! strip, and for straight segments.

use nalgebra::{DMatrix, SymmetricEigen};
use std::f64::consts::PI;

use crate::elliptic::{Grid, SlitField};
use crate::error::{invalid, Error, Result};
use crate::geometry::{GraphCurve, SegmentConfig};

/// Beyond this `tanh(x)` is 1 to double precision.
const TANH_SATURATION: f64 = 20.0;

fn check_strip(a: f64, b: f64) -> Result<()> {
    if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
        return Err(invalid("strip", format!("a and b must be positive, got a = {a}, b = {b}")));
    }
    Ok(())
}

/// Eigenvalue of `T` on `cos(nπx/b)` and `sin(nπx/b)`: `(4b/(nπ))·tanh(nπa/b)`.
///
/// `n` must be even and at least 2 for the mode to be `b`-periodic and non-constant.
pub fn mode_lambda(n: u32, a: f64, b: f64) -> Result<f64> {
    check_strip(a, b)?;
    if n % 2 == 1 {
        return Err(Error::OddMode(n));
    }
    if n == 0 {
        return Err(invalid("mode", "index must be at least 2"));
    }
    let k = n as f64 * PI / b;
    let arg = k * a;
    let t = if arg > TANH_SATURATION { 1.0 } else { arg.tanh() };
    Ok(4.0 / k * t)
}

/// `λ₁ = (2b/π)·tanh(2πa/b)` for the flat pair.
pub fn lambda1_strip(a: f64, b: f64) -> Result<f64> {
    mode_lambda(2, a, b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModePhase {
    Cos,
    Sin,
}

impl ModePhase {
    fn eval(self, t: f64) -> f64 {
        match self {
            ModePhase::Cos => t.cos(),
            ModePhase::Sin => t.sin(),
        }
    }
}

/// `φ = amplitude·cos(nπx/b)` (or `sin`) at `m` uniform nodes.
pub fn mode_samples(n: u32, phase: ModePhase, amplitude: f64, b: f64, m: usize) -> Vec<f64> {
    let k = n as f64 * PI / b;
    (0..m).map(|i| amplitude * phase.eval(k * i as f64 * b / m as f64)).collect()
}

/// Exact `v_φ(x, y)` for `φ = amplitude·(cos|sin)(nπx/b)` on the flat pair (no
/// parity check on `n`).
///
/// For `φ = cos(kx)` this is `v = sin(kx)·sinh(k(a-|y|))/cosh(ka)` on both sides.
pub fn mode_field_value(n: u32, phase: ModePhase, amplitude: f64, a: f64, b: f64, x: f64, y: f64) -> f64 {
    let k = n as f64 * PI / b;
    let profile = match phase {
        ModePhase::Cos => (k * x).sin(),
        ModePhase::Sin => -(k * x).cos(),
    };
    let decay = if k * a > TANH_SATURATION {
        (-k * y.abs()).exp()
    } else {
        (k * (a - y.abs())).sinh() / (k * a).cosh()
    };
    amplitude * profile * decay
}

/// [`mode_field_value`] sampled on the mesh of `grid` over the flat curve.
pub fn strip_mode_field(n: u32, phase: ModePhase, amplitude: f64, a: f64, b: f64, grid: Grid) -> Result<SlitField> {
    check_strip(a, b)?;
    if n % 2 == 1 {
        return Err(Error::OddMode(n));
    }
    let curve = GraphCurve::flat(b, grid.nx)?;
    SlitField::from_fn(&curve, a, grid, [0.0, 0.0], move |_, x, y| {
        mode_field_value(n, phase, amplitude, a, b, x, y)
    })
}

/// Smallest eigenvalue of `∂²F` on a straight segment relative to the H¹ norm:
/// `min (∫φ'² - H1 φ(0)² - H2 φ(L)²) / (∫φ'² + ∫φ²)` with P1 elements on `m` nodes.
pub fn segment_min_eig(length: f64, h1: f64, h2: f64, m: usize) -> Result<f64> {
    let cfg = SegmentConfig::new(length, h1, h2)?;
    if m < 16 {
        return Err(invalid("segment nodes", format!("need at least 16, got {m}")));
    }
    let h = cfg.length / (m - 1) as f64;
    let mut stiff = DMatrix::<f64>::zeros(m, m);
    let mut mass = DMatrix::<f64>::zeros(m, m);
    for e in 0..m - 1 {
        for (p, q, ks, km) in [
            (e, e, 1.0, 2.0),
            (e + 1, e + 1, 1.0, 2.0),
            (e, e + 1, -1.0, 1.0),
            (e + 1, e, -1.0, 1.0),
        ] {
            stiff[(p, q)] += ks / h;
            mass[(p, q)] += km * h / 6.0;
        }
    }
    let mut form = stiff.clone();
    form[(0, 0)] -= cfg.h1;
    form[(m - 1, m - 1)] -= cfg.h2;
    let norm = stiff + mass;
    let chol = norm
        .cholesky()
        .ok_or_else(|| Error::DegeneratePencil("H¹ Gram matrix is not positive definite".into()))?;
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::DegeneratePencil("H¹ factor is singular".into()))?;
    let reduced = &l_inv * form * l_inv.transpose();
    let sym = (&reduced + reduced.transpose()) * 0.5;
    Ok(SymmetricEigen::new(sym).eigenvalues.min())
}
