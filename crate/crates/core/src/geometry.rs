//! Periodic graph curves in the strip `[0, b) × (-a, a)` and their vertical normal flow.
//!
//! Every curve handled here is the graph `y = ψ(x)` of a `b`-periodic height function,
//! sampled at the uniform abscissae `x_i = i·b/m`. Derivatives of ψ use periodic
//! fourth-order central stencils.
//!
//! Sign conventions:
//!
//! * the unit normal `ν = (-ψ', 1)/√(1+ψ'²)` points up, into the upper component;
//! * [`curvature`] returns `ψ''/(1+ψ'²)^{3/2}`, so a concave-down bump has negative
//!   curvature. The divergence of the upward normal is the negative of this value.
//!
//! The flow used for variations moves heights vertically: `ψ ↦ ψ + t·ψ_flow`. It is
//! generated by `X(x, y) = ψ_flow(x)·c(y)·e_y` where the cutoff `c` equals 1 for
//! `|y| ≤ a/2` and vanishes within `a/8` of the Dirichlet sides. Near the curve the
//! field is therefore vertical and independent of `y`, so `Z = DX[X]` vanishes there
//! and the boundary-free second-variation formula at a critical pair applies verbatim.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// One term `cos·cos(2πkx/b) + sin·sin(2πkx/b)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    pub k: u32,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// A `b`-periodic function `offset + Σ terms`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicProfile {
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub terms: Vec<FourierTerm>,
}

impl PeriodicProfile {
    pub fn constant(offset: f64) -> Self {
        Self {
            offset,
            terms: Vec::new(),
        }
    }

    pub fn single(k: u32, cos: f64, sin: f64) -> Self {
        Self {
            offset: 0.0,
            terms: vec![FourierTerm { k, cos, sin }],
        }
    }

    pub fn eval(&self, x: f64, period: f64) -> f64 {
        self.terms.iter().fold(self.offset, |acc, t| {
            let w = 2.0 * PI * f64::from(t.k) * x / period;
            acc + t.cos * w.cos() + t.sin * w.sin()
        })
    }

    pub fn sample(&self, nodes: usize, period: f64) -> Vec<f64> {
        let h = period / nodes as f64;
        (0..nodes).map(|i| self.eval(i as f64 * h, period)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.offset.is_finite() && self.terms.iter().all(|t| t.cos.is_finite() && t.sin.is_finite())
    }
}

/// Dirichlet data `slope·x + correction(x)` on one side of the strip.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryData {
    #[serde(default)]
    pub slope: f64,
    #[serde(default)]
    pub correction: PeriodicProfile,
}

impl BoundaryData {
    pub fn linear(slope: f64, offset: f64) -> Self {
        Self {
            slope,
            correction: PeriodicProfile::constant(offset),
        }
    }

    pub fn eval(&self, x: f64, period: f64) -> f64 {
        self.slope * x + self.correction.eval(x, period)
    }
}

/// The periodic strip `[0, b) × (-a, a)` with Dirichlet data on `y = ±a`.
///
/// Each side carries its own drift slope: a graph curve separates the strip into an
/// upper component touching only `y = a` and a lower one touching only `y = -a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripDomain {
    half_height: f64,
    period: f64,
    top: BoundaryData,
    bottom: BoundaryData,
}

impl StripDomain {
    pub fn new(half_height: f64, period: f64, top: BoundaryData, bottom: BoundaryData) -> Result<Self> {
        if !(half_height.is_finite() && half_height > 0.0) {
            return Err(invalid("half_height", format!("must be positive, got {half_height}")));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(invalid("period", format!("must be positive, got {period}")));
        }
        for (name, data) in [("top", &top), ("bottom", &bottom)] {
            if !(data.slope.is_finite() && data.correction.is_finite()) {
                return Err(invalid("dirichlet data", format!("{name} data is not finite")));
            }
        }
        Ok(Self {
            half_height,
            period,
            top,
            bottom,
        })
    }

    /// Data `x + 1` on top and `-x` at the bottom: with a flat curve this is the
    /// critical pair `u = x + 1` above, `u = -x` below.
    pub fn opposing_ramps(half_height: f64, period: f64) -> Result<Self> {
        Self::new(
            half_height,
            period,
            BoundaryData::linear(1.0, 1.0),
            BoundaryData::linear(-1.0, 0.0),
        )
    }

    pub fn homogeneous(half_height: f64, period: f64) -> Result<Self> {
        Self::new(half_height, period, BoundaryData::default(), BoundaryData::default())
    }

    pub fn half_height(&self) -> f64 {
        self.half_height
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn top(&self) -> &BoundaryData {
        &self.top
    }

    pub fn bottom(&self) -> &BoundaryData {
        &self.bottom
    }

    /// Same data on a strip with different `a` and `b`.
    pub fn resized(&self, half_height: f64, period: f64) -> Result<Self> {
        Self::new(half_height, period, self.top.clone(), self.bottom.clone())
    }
}

/// A straight discontinuity segment of length `L` meeting the outer boundary orthogonally
/// at two points where the boundary has curvatures `h1`, `h2` (exterior normal).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentConfig {
    pub length: f64,
    pub h1: f64,
    pub h2: f64,
    /// Difference of the two constant values of `u` across the segment.
    pub jump: f64,
}

impl SegmentConfig {
    pub fn new(length: f64, h1: f64, h2: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(invalid("length", format!("must be positive, got {length}")));
        }
        if !(h1.is_finite() && h2.is_finite()) {
            return Err(invalid("endpoint curvature", "must be finite"));
        }
        Ok(Self {
            length,
            h1,
            h2,
            jump: 1.0,
        })
    }

    pub fn with_jump(mut self, jump: f64) -> Self {
        self.jump = jump;
        self
    }
}

/// Sampled periodic graph `y = ψ(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphCurve {
    period: f64,
    heights: Vec<f64>,
    marked_endpoint: bool,
}

pub const MIN_CURVE_NODES: usize = 8;

impl GraphCurve {
    pub fn new(period: f64, heights: Vec<f64>) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(invalid("period", format!("must be positive, got {period}")));
        }
        if heights.len() < MIN_CURVE_NODES {
            return Err(invalid(
                "curve",
                format!("needs at least {MIN_CURVE_NODES} nodes, got {}", heights.len()),
            ));
        }
        if heights.iter().any(|h| !h.is_finite()) {
            return Err(invalid("curve", "heights must be finite"));
        }
        Ok(Self {
            period,
            heights,
            marked_endpoint: true,
        })
    }

    pub fn flat(period: f64, nodes: usize) -> Result<Self> {
        Self::new(period, vec![0.0; nodes])
    }

    pub fn from_profile(profile: &PeriodicProfile, period: f64, nodes: usize) -> Result<Self> {
        Self::new(period, profile.sample(nodes, period))
    }

    /// Node 0 (the periodic cut `x = 0 ≡ b`) is marked as an endpoint by default, which
    /// is what the endpoint-zero restriction pins. This drops the marker.
    pub fn without_endpoint_marker(mut self) -> Self {
        self.marked_endpoint = false;
        self
    }

    pub fn has_marked_endpoint(&self) -> bool {
        self.marked_endpoint
    }

    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.len() as f64
    }

    pub fn abscissa(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn max_abs_height(&self) -> f64 {
        self.heights.iter().fold(0.0_f64, |m, h| m.max(h.abs()))
    }

    pub fn ensure_inside(&self, half_height: f64) -> Result<()> {
        let max_height = self.max_abs_height();
        if max_height >= half_height {
            return Err(Error::CurveEscapesStrip {
                max_height,
                limit: half_height,
            });
        }
        Ok(())
    }

    pub fn slopes(&self) -> Vec<f64> {
        periodic_first_derivative(&self.heights, self.spacing())
    }

    pub fn second_derivatives(&self) -> Vec<f64> {
        periodic_second_derivative(&self.heights, self.spacing())
    }

    /// Arc-length density `√(1+ψ'²)` at the nodes.
    pub fn jacobians(&self) -> Vec<f64> {
        self.slopes().iter().map(|p| (1.0 + p * p).sqrt()).collect()
    }

    /// Chord lengths of the polygon through the nodes; edge `e` joins nodes `e` and `e+1`.
    pub fn edge_lengths(&self) -> Vec<f64> {
        let h = self.spacing();
        let m = self.len();
        (0..m)
            .map(|e| {
                let dy = self.heights[(e + 1) % m] - self.heights[e];
                (h * h + dy * dy).sqrt()
            })
            .collect()
    }

    /// Upward unit normal at node `i`.
    pub fn unit_normal(&self, i: usize) -> [f64; 2] {
        let p = self.slopes()[i];
        let j = (1.0 + p * p).sqrt();
        [-p / j, 1.0 / j]
    }

    /// Unit tangent at node `i`, oriented with increasing `x`.
    pub fn unit_tangent(&self, i: usize) -> [f64; 2] {
        let p = self.slopes()[i];
        let j = (1.0 + p * p).sqrt();
        [1.0 / j, p / j]
    }
}

pub(crate) fn periodic_first_derivative(values: &[f64], h: f64) -> Vec<f64> {
    let m = values.len();
    let at = |i: isize| values[i.rem_euclid(m as isize) as usize];
    (0..m as isize)
        .map(|i| (at(i - 2) - 8.0 * at(i - 1) + 8.0 * at(i + 1) - at(i + 2)) / (12.0 * h))
        .collect()
}

pub(crate) fn periodic_second_derivative(values: &[f64], h: f64) -> Vec<f64> {
    let m = values.len();
    let at = |i: isize| values[i.rem_euclid(m as isize) as usize];
    (0..m as isize)
        .map(|i| {
            (-at(i - 2) + 16.0 * at(i - 1) - 30.0 * at(i) + 16.0 * at(i + 1) - at(i + 2)) / (12.0 * h * h)
        })
        .collect()
}

/// Signed curvature `ψ''/(1+ψ'²)^{3/2}` at the nodes.
pub fn curvature(curve: &GraphCurve) -> Vec<f64> {
    curve
        .slopes()
        .iter()
        .zip(curve.second_derivatives())
        .map(|(p, q)| q / (1.0 + p * p).powf(1.5))
        .collect()
}

/// Length of one period of the curve, `∫₀ᵇ √(1+ψ'²) dx` by the periodic trapezoid rule.
pub fn curve_length(curve: &GraphCurve) -> f64 {
    curve.jacobians().iter().sum::<f64>() * curve.spacing()
}

/// Vertical flow `ψ ↦ ψ + t·direction` restricted to heights below `a - a/8`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowSpec {
    direction: Vec<f64>,
    half_height: f64,
    margin: f64,
    steps: Vec<f64>,
}

impl FlowSpec {
    pub fn new(direction: Vec<f64>, domain: &StripDomain, steps: Vec<f64>) -> Result<Self> {
        if direction.iter().chain(&steps).any(|v| !v.is_finite()) {
            return Err(invalid("flow", "direction and steps must be finite"));
        }
        let half_height = domain.half_height();
        Ok(Self {
            direction,
            half_height,
            margin: half_height / 8.0,
            steps,
        })
    }

    pub fn from_profile(
        profile: &PeriodicProfile,
        curve: &GraphCurve,
        domain: &StripDomain,
        steps: Vec<f64>,
    ) -> Result<Self> {
        Self::new(profile.sample(curve.len(), curve.period()), domain, steps)
    }

    /// Samples `t ∈ {-2h, -h, 0, h, 2h}`.
    pub fn symmetric_steps(step: f64) -> Vec<f64> {
        vec![-2.0 * step, -step, 0.0, step, 2.0 * step]
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Largest admissible `|height|` of a flowed curve.
    pub fn limit(&self) -> f64 {
        self.half_height - self.margin
    }

    /// The C² cutoff `c(y)`.
    pub fn cutoff(&self, y: f64) -> f64 {
        let (s, _) = self.ramp(y);
        match s {
            None => {
                if y.abs() <= self.half_height / 2.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Some(s) => 1.0 - smoothstep(s),
        }
    }

    pub fn cutoff_derivative(&self, y: f64) -> f64 {
        match self.ramp(y) {
            (None, _) => 0.0,
            (Some(s), width) => -smoothstep_derivative(s) * y.signum() / width,
        }
    }

    /// Vertical component of `X` at node abscissa `i`, height `y`.
    pub fn field(&self, i: usize, y: f64) -> f64 {
        self.direction[i] * self.cutoff(y)
    }

    /// Vertical component of `Z = DX[X] = X_y ∂_y X_y` (the field is vertical and its
    /// x-derivative only enters the horizontal row of `DX`, which `X` does not hit).
    pub fn acceleration(&self, i: usize, y: f64) -> f64 {
        let d = self.direction[i];
        d * d * self.cutoff(y) * self.cutoff_derivative(y)
    }

    fn ramp(&self, y: f64) -> (Option<f64>, f64) {
        let inner = self.half_height / 2.0;
        let width = self.half_height - self.margin - inner;
        let r = y.abs();
        if r <= inner || r >= inner + width {
            (None, width)
        } else {
            (Some((r - inner) / width), width)
        }
    }
}

fn smoothstep(s: f64) -> f64 {
    s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
}

fn smoothstep_derivative(s: f64) -> f64 {
    30.0 * s * s * (1.0 - s) * (1.0 - s)
}

/// Flows `curve` for time `t`: heights become `ψ_i + t·direction_i`.
pub fn flow_curve(curve: &GraphCurve, flow: &FlowSpec, t: f64) -> Result<GraphCurve> {
    if flow.direction.len() != curve.len() {
        return Err(invalid(
            "flow",
            format!(
                "direction has {} samples but the curve has {} nodes",
                flow.direction.len(),
                curve.len()
            ),
        ));
    }
    let heights: Vec<f64> = curve
        .heights
        .iter()
        .zip(&flow.direction)
        .map(|(h, d)| h + t * d)
        .collect();
    let max_height = heights.iter().fold(0.0_f64, |m, h| m.max(h.abs()));
    if max_height >= flow.limit() {
        return Err(Error::CurveEscapesStrip {
            max_height,
            limit: flow.limit(),
        });
    }
    Ok(GraphCurve {
        period: curve.period,
        heights,
        marked_endpoint: curve.marked_endpoint,
    })
}
