//! End-to-end stability analysis of one configuration.

use serde::{Serialize, Serializer};

use crate::analytic::{lambda1_strip, segment_min_eig};
use crate::elliptic::{Grid, SlitField, SlitSystem, SolveStats, SolverSettings};
use crate::error::Result;
use crate::geometry::{GraphCurve, SegmentConfig, StripDomain};
use crate::second_variation::{lambda1, mu_from, EigenSettings, Restriction, TOperator, Verdict, DEFAULT_BAND};
use crate::validator::{criticality_residuals, segment_criticality, CriticalityReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Numeric,
    Analytic,
    Fd,
}

/// A reported number and where it came from. Non-finite values serialize as strings
/// (`"inf"`, `"-inf"`, `"nan"`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quantity {
    #[serde(serialize_with = "finite_or_string")]
    pub value: f64,
    pub provenance: Provenance,
}

impl Quantity {
    pub fn numeric(value: f64) -> Self {
        Self {
            value,
            provenance: Provenance::Numeric,
        }
    }

    pub fn analytic(value: f64) -> Self {
        Self {
            value,
            provenance: Provenance::Analytic,
        }
    }

    pub fn fd(value: f64) -> Self {
        Self {
            value,
            provenance: Provenance::Fd,
        }
    }
}

pub fn finite_or_string<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalysisOptions {
    pub restriction: Restriction,
    pub solver: SolverSettings,
    pub eigen: EigenSettings,
    pub band: f64,
    pub compute_mu: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            restriction: Restriction::MeanZero,
            solver: SolverSettings::default(),
            eigen: EigenSettings::default(),
            band: DEFAULT_BAND,
            compute_mu: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeometrySummary {
    Strip { a: f64, b: f64, flat: bool },
    Segment { length: f64, h1: f64, h2: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub geometry: GeometrySummary,
    pub grid: Option<Grid>,
    pub curve_nodes: usize,
    pub restriction: Restriction,
    pub lambda1: Quantity,
    pub lambda1_iterations: usize,
    /// Closed form, when the configuration is the flat pair with unit slopes.
    pub lambda1_analytic: Option<Quantity>,
    pub mu: Option<Quantity>,
    /// Smallest eigenvalue of `∂²F` relative to H¹ (segments).
    pub coercivity: Option<Quantity>,
    pub criticality: CriticalityReport,
    /// Smallest `|u⁺ - u⁻|` over the curve nodes (strips).
    pub jump_minimum: Option<JumpMinimum>,
    pub verdict: Verdict,
    pub band: f64,
    pub state_solve: Option<SolveStats>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JumpMinimum {
    pub value: Quantity,
    pub x: f64,
}

fn jump_minimum(state: &SlitField) -> JumpMinimum {
    let (i, v) = state
        .jump()
        .iter()
        .map(|j| j.abs())
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best });
    JumpMinimum {
        value: Quantity::numeric(v),
        x: state.curve().abscissa(i),
    }
}

/// True for the flat curve with Dirichlet slopes of unit size, where the closed form for
/// `λ₁` applies.
pub fn has_closed_form(domain: &StripDomain, curve: &GraphCurve) -> bool {
    curve.heights().iter().all(|&h| h == curve.heights()[0])
        && domain.top().slope.abs() == 1.0
        && domain.bottom().slope.abs() == 1.0
}

pub fn analyze_strip(
    domain: &StripDomain,
    curve: &GraphCurve,
    grid: Grid,
    options: &AnalysisOptions,
) -> Result<StabilityReport> {
    let system = SlitSystem::new(domain, curve, grid)?;
    let (state, stats) = system.solve_state(domain, &options.solver)?;
    let criticality = criticality_residuals(&state);
    let jump_min = jump_minimum(&state);
    let op = TOperator::with_state(system, state, options.restriction, options.solver)?;
    let l1 = lambda1(&op, &options.eigen)?;
    let mu_value = if options.compute_mu {
        Some(Quantity::numeric(mu_from(&op, &options.eigen, Some(&l1.vector))?.value))
    } else {
        None
    };
    let flat = curve.heights().iter().all(|&h| h == curve.heights()[0]);
    let lambda1_analytic = if has_closed_form(domain, curve) {
        Some(Quantity::analytic(lambda1_strip(domain.half_height(), domain.period())?))
    } else {
        None
    };
    Ok(StabilityReport {
        geometry: GeometrySummary::Strip {
            a: domain.half_height(),
            b: domain.period(),
            flat,
        },
        grid: Some(grid),
        curve_nodes: curve.len(),
        restriction: options.restriction,
        lambda1: Quantity::numeric(l1.value),
        lambda1_iterations: l1.iterations,
        lambda1_analytic,
        mu: mu_value,
        coercivity: None,
        criticality,
        jump_minimum: Some(jump_min),
        verdict: Verdict::from_lambda1(l1.value, options.band),
        band: options.band,
        state_solve: Some(stats),
    })
}

/// Tolerance on the coercivity constant below which a segment is called marginal.
pub const COERCIVITY_TOLERANCE: f64 = 1e-9;

pub fn analyze_segment(config: &SegmentConfig, nodes: usize, options: &AnalysisOptions) -> Result<StabilityReport> {
    let op = TOperator::segment(config, nodes, options.restriction)?;
    let l1 = lambda1(&op, &options.eigen)?;
    let mu_value = if options.compute_mu {
        Some(Quantity::numeric(mu_from(&op, &options.eigen, Some(&l1.vector))?.value))
    } else {
        None
    };
    let min_eig = segment_min_eig(config.length, config.h1, config.h2, nodes)?;
    Ok(StabilityReport {
        geometry: GeometrySummary::Segment {
            length: config.length,
            h1: config.h1,
            h2: config.h2,
        },
        grid: None,
        curve_nodes: nodes,
        restriction: options.restriction,
        lambda1: Quantity::numeric(l1.value),
        lambda1_iterations: l1.iterations,
        lambda1_analytic: Some(Quantity::analytic(0.0)),
        mu: mu_value,
        coercivity: Some(Quantity::numeric(min_eig)),
        criticality: segment_criticality(),
        jump_minimum: None,
        verdict: Verdict::from_coercivity(min_eig, COERCIVITY_TOLERANCE),
        band: options.band,
        state_solve: None,
    })
}
