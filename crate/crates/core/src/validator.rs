//! Checks of the analytic machinery against the energy itself: criticality residuals of
//! a state, and finite differences of `t ↦ F(u_t, K_t)` along a vertical flow.

use rayon::prelude::*;
use serde::Serialize;

use crate::elliptic::{dirichlet_energy, Grid, Region, Side, SlitField, SolverSettings};
use crate::error::{invalid, Error, Result};
use crate::geometry::{curvature, curve_length, flow_curve, FlowSpec, GraphCurve, StripDomain};
use crate::second_variation::{second_variation_value, Restriction, SecondVariation, TOperator};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CriticalityReport {
    /// `sup |[|∇_Γu|²] + H|` over the curve nodes, the transmission condition.
    pub transmission_residual: f64,
    /// `sup |∂_ν u^±|` on the curve, by one-sided differences on the mesh.
    pub neumann_residual: f64,
    /// Angle defect where the curve meets the outer boundary; `None` for closed strip
    /// curves, which have no such points.
    pub orthogonality_defect: Option<f64>,
}

/// Pointwise transmission residual `|∇_Γu⁻|² - |∇_Γu⁺|² - H` at the curve nodes.
pub fn transmission_residual(state: &SlitField) -> Vec<f64> {
    let up = state.tangential_gradient(Side::Upper);
    let lo = state.tangential_gradient(Side::Lower);
    curvature(state.curve())
        .iter()
        .zip(up.iter().zip(&lo))
        .map(|(h, (p, m))| m * m - p * p - h)
        .collect()
}

/// Outward-from-Γ normal derivative `∂_ν u^±` (ν pointing up) at the curve nodes.
pub fn normal_derivatives(state: &SlitField, side: Side) -> Vec<f64> {
    let grid = state.grid();
    let curve = state.curve();
    let a = state.half_height();
    let slopes = curve.slopes();
    let jac = curve.jacobians();
    let c = state.component(side);
    let nx = grid.nx;
    let row = |j: usize| &c.values[j * nx..(j + 1) * nx];
    let d_eta = 1.0 / grid.ny as f64;
    let dx_row = crate::geometry::periodic_first_derivative(row(0), curve.spacing());
    (0..nx)
        .map(|i| {
            let u_eta = (-3.0 * row(0)[i] + 4.0 * row(1)[i] - row(2)[i]) / (2.0 * d_eta);
            let psi = curve.heights()[i];
            let p = slopes[i];
            let (u_x, u_y) = match side {
                Side::Upper => {
                    let depth = a - psi;
                    (c.drift + dx_row[i] - p * u_eta / depth, u_eta / depth)
                }
                Side::Lower => {
                    let depth = a + psi;
                    (c.drift + dx_row[i] + p * u_eta / depth, -u_eta / depth)
                }
            };
            (-p * u_x + u_y) / jac[i]
        })
        .collect()
}

pub fn criticality_residuals(state: &SlitField) -> CriticalityReport {
    let sup = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let neumann = Side::BOTH
        .iter()
        .map(|&s| sup(&normal_derivatives(state, s)))
        .fold(0.0_f64, f64::max);
    CriticalityReport {
        transmission_residual: sup(&transmission_residual(state)),
        neumann_residual: neumann,
        orthogonality_defect: None,
    }
}

/// A straight segment with locally constant `u` is critical by construction.
pub fn segment_criticality() -> CriticalityReport {
    CriticalityReport {
        transmission_residual: 0.0,
        neumann_residual: 0.0,
        orthogonality_defect: Some(0.0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowSample {
    pub t: f64,
    pub energy: f64,
    pub length: f64,
}

impl FlowSample {
    /// `F = ∫|∇u|² + length`.
    pub fn total(&self) -> f64 {
        self.energy + self.length
    }
}

/// `F` at each step of `flow`, re-solving the state on every flowed curve. Samples come
/// back in the order of `flow.steps()`.
pub fn energy_along_flow(
    domain: &StripDomain,
    curve: &GraphCurve,
    grid: Grid,
    flow: &FlowSpec,
    settings: &SolverSettings,
) -> Result<Vec<FlowSample>> {
    flow.steps()
        .par_iter()
        .map(|&t| {
            let moved = flow_curve(curve, flow, t)?;
            let (state, _) = crate::elliptic::solve_state(domain, &moved, grid, settings)?;
            Ok(FlowSample {
                t,
                energy: dirichlet_energy(&state, Region::Whole),
                length: curve_length(&moved),
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FdDerivatives {
    /// Richardson-extrapolated `g'(0)`.
    pub first: f64,
    /// `|D_h - D_2h|` for the first derivative.
    pub first_error: f64,
    /// Richardson-extrapolated `g''(0)`.
    pub second: f64,
    pub second_error: f64,
}

/// Central differences of `g` from samples at `t = -2h, -h, 0, h, 2h` (any order).
pub fn fd_derivatives(samples: &[(f64, f64)]) -> Result<FdDerivatives> {
    if samples.len() < 5 {
        return Err(Error::InsufficientSamples(samples.len()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|p, q| p.0.total_cmp(&q.0));
    let h = sorted.iter().map(|p| p.0.abs()).filter(|t| *t > 0.0).fold(f64::INFINITY, f64::min);
    let find = |t: f64| {
        sorted
            .iter()
            .find(|p| (p.0 - t).abs() <= 1e-9 * h)
            .map(|p| p.1)
            .ok_or(Error::InsufficientSamples(samples.len()))
    };
    let (gm2, gm1, g0, gp1, gp2) = (find(-2.0 * h)?, find(-h)?, find(0.0)?, find(h)?, find(2.0 * h)?);
    let d1_h = (gp1 - gm1) / (2.0 * h);
    let d1_2h = (gp2 - gm2) / (4.0 * h);
    let d2_h = (gp1 - 2.0 * g0 + gm1) / (h * h);
    let d2_2h = (gp2 - 2.0 * g0 + gm2) / (4.0 * h * h);
    Ok(FdDerivatives {
        first: (4.0 * d1_h - d1_2h) / 3.0,
        first_error: (d1_h - d1_2h).abs(),
        second: (4.0 * d2_h - d2_2h) / 3.0,
        second_error: (d2_h - d2_2h).abs(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidationSettings {
    pub step: f64,
    pub grid: Grid,
    pub solver: SolverSettings,
    pub restriction: Restriction,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub step: f64,
    pub samples: Vec<FlowSample>,
    /// `F(u, K)` at `t = 0`.
    pub energy: f64,
    pub fd: FdDerivatives,
    /// `∂²F[φ]` with `φ = X·ν`, by the direct route.
    pub second_variation: f64,
    /// Same value through `‖φ‖²~ - (Tφ,φ)~`.
    pub second_variation_via_t: f64,
    /// `|g'(0)| / F`.
    pub first_variation_ratio: f64,
    /// `|g''(0) - ∂²F[φ]| / max(|∂²F[φ]|, 1e-6·F)`; the floor keeps directions with
    /// `∂²F[φ] = 0` (translations) meaningful.
    pub relative_error: f64,
}

const ZERO_FLOOR: f64 = 1e-6;

/// Normal component `φ = X·ν = direction/√(1+ψ'²)` of the vertical flow field on the curve.
pub fn normal_component(curve: &GraphCurve, direction: &[f64]) -> Vec<f64> {
    direction.iter().zip(curve.jacobians()).map(|(d, j)| d / j).collect()
}

/// Compares `g''(0)` along the flow with direction `direction` (height increments at the
/// curve nodes) against the quadratic form evaluated at `φ = X·ν`.
pub fn validate_second_variation(
    domain: &StripDomain,
    curve: &GraphCurve,
    direction: &[f64],
    settings: &ValidationSettings,
) -> Result<ValidationReport> {
    if !(settings.step.is_finite() && settings.step > 0.0) {
        return Err(invalid("step", format!("must be positive, got {}", settings.step)));
    }
    let flow = FlowSpec::new(direction.to_vec(), domain, FlowSpec::symmetric_steps(settings.step))?;
    let samples = energy_along_flow(domain, curve, settings.grid, &flow, &settings.solver)?;
    let pairs: Vec<(f64, f64)> = samples.iter().map(|s| (s.t, s.total())).collect();
    let fd = fd_derivatives(&pairs)?;
    let energy = samples
        .iter()
        .find(|s| s.t == 0.0)
        .map(FlowSample::total)
        .ok_or(Error::InsufficientSamples(samples.len()))?;
    let op = TOperator::strip(domain, curve, settings.grid, settings.restriction, settings.solver)?;
    let phi = normal_component(curve, direction);
    let SecondVariation { direct, via_operator } = second_variation_value(&op, &phi)?;
    Ok(ValidationReport {
        step: settings.step,
        samples,
        energy,
        fd,
        second_variation: direct,
        second_variation_via_t: via_operator,
        first_variation_ratio: fd.first.abs() / energy.abs(),
        relative_error: (fd.second - direct).abs() / direct.abs().max(ZERO_FLOOR * energy.abs()),
    })
}
