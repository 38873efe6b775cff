use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::geometry::{curvature, GraphCurve, SegmentConfig};

/// Subspace of curve functions on which `(.,.)~` is used as a scalar product.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Restriction {
    /// `∫_Γ φ ds = 0` (lumped arc-length weights).
    MeanZero,
    /// `φ = 0` at the marked endpoints: the periodic cut of a strip curve, or both
    /// ends of a segment.
    EndpointZero,
    None,
}

impl fmt::Display for Restriction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Restriction::MeanZero => "mean_zero",
            Restriction::EndpointZero => "endpoint_zero",
            Restriction::None => "none",
        })
    }
}

impl FromStr for Restriction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean_zero" => Ok(Restriction::MeanZero),
            "endpoint_zero" => Ok(Restriction::EndpointZero),
            "none" => Ok(Restriction::None),
            other => Err(invalid(
                "restriction",
                format!("`{other}` (expected mean_zero, endpoint_zero or none)"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum GramConfig<'a> {
    /// Periodic graph curve in the strip: no boundary term.
    Strip(&'a GraphCurve),
    /// Straight segment sampled at `nodes` points: `H = 0`, endpoint terms only.
    Segment { config: &'a SegmentConfig, nodes: usize },
}

/// Matrix of `(φ,χ)~ = ∫ ∂_sφ ∂_sχ + ∫ H²φχ - Σ_endpoints H_∂Ω φχ` on nodal values,
/// with an orthonormal basis of the restriction subspace and, when the restricted
/// matrix is positive definite, its Cholesky factor.
#[derive(Clone, Debug)]
pub struct TildeGram {
    matrix: DMatrix<f64>,
    basis: DMatrix<f64>,
    factor: Option<Cholesky<f64, Dyn>>,
    restriction: Restriction,
}

/// Pivots below this fraction of the largest diagonal entry count as singular.
const SINGULAR_PIVOT: f64 = 1e-12;

impl TildeGram {
    pub fn assemble(config: GramConfig<'_>, restriction: Restriction) -> Result<Self> {
        let (matrix, weights, pinned) = match config {
            GramConfig::Strip(curve) => strip_matrix(curve, restriction)?,
            GramConfig::Segment { config, nodes } => segment_matrix(config, nodes)?,
        };
        let basis = match restriction {
            Restriction::None => DMatrix::identity(matrix.nrows(), matrix.nrows()),
            Restriction::MeanZero => complement_basis(&weights),
            Restriction::EndpointZero => selection_basis(matrix.nrows(), &pinned),
        };
        let reduced = basis.transpose() * &matrix * &basis;
        let factor = Cholesky::new(reduced.clone()).filter(|c| {
            let scale = reduced.diagonal().amax();
            let l = c.l_dirty();
            (0..l.nrows()).all(|i| l[(i, i)] * l[(i, i)] > SINGULAR_PIVOT * scale)
        });
        Ok(Self {
            matrix,
            basis,
            factor,
            restriction,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn restriction(&self) -> Restriction {
        self.restriction
    }

    /// Number of curve nodes.
    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Dimension of the restriction subspace.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.factor.is_some()
    }

    pub fn form(&self, phi: &[f64], chi: &[f64]) -> f64 {
        let p = DVector::from_column_slice(phi);
        let c = DVector::from_column_slice(chi);
        p.dot(&(&self.matrix * c))
    }

    pub fn norm_sq(&self, phi: &[f64]) -> f64 {
        self.form(phi, phi)
    }

    /// Euclidean projection onto the restriction subspace.
    pub fn project(&self, phi: &[f64]) -> Vec<f64> {
        let p = DVector::from_column_slice(phi);
        (&self.basis * (self.basis.transpose() * p)).as_slice().to_vec()
    }

    /// The `φ` in the subspace with `(φ,ψ)~ = rhs·ψ` for every `ψ` in the subspace.
    pub fn riesz(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let factor = self.factor.as_ref().ok_or(Error::GramSingular)?;
        let r = self.basis.transpose() * DVector::from_column_slice(rhs);
        let c = factor.solve(&r);
        Ok((&self.basis * c).as_slice().to_vec())
    }
}

pub fn assemble_tilde_gram(config: GramConfig<'_>, restriction: Restriction) -> Result<TildeGram> {
    TildeGram::assemble(config, restriction)
}

type Assembled = (DMatrix<f64>, Vec<f64>, Vec<usize>);

fn strip_matrix(curve: &GraphCurve, restriction: Restriction) -> Result<Assembled> {
    if restriction == Restriction::EndpointZero && !curve.has_marked_endpoint() {
        return Err(Error::InvalidRestriction(restriction));
    }
    let m = curve.len();
    let lengths = curve.edge_lengths();
    let h2: Vec<f64> = curvature(curve).iter().map(|h| h * h).collect();
    let mut g = DMatrix::zeros(m, m);
    let mut weights = vec![0.0; m];
    for (e, &len) in lengths.iter().enumerate() {
        let (p, q) = (e, (e + 1) % m);
        let k = 1.0 / len;
        g[(p, p)] += k;
        g[(q, q)] += k;
        g[(p, q)] -= k;
        g[(q, p)] -= k;
        weights[p] += 0.5 * len;
        weights[q] += 0.5 * len;
    }
    for i in 0..m {
        g[(i, i)] += h2[i] * weights[i];
    }
    Ok((g, weights, vec![0]))
}

fn segment_matrix(config: &SegmentConfig, nodes: usize) -> Result<Assembled> {
    if nodes < 2 {
        return Err(invalid("segment nodes", format!("need at least 2, got {nodes}")));
    }
    let h = config.length / (nodes - 1) as f64;
    let mut g = DMatrix::zeros(nodes, nodes);
    let mut weights = vec![0.0; nodes];
    for e in 0..nodes - 1 {
        let k = 1.0 / h;
        g[(e, e)] += k;
        g[(e + 1, e + 1)] += k;
        g[(e, e + 1)] -= k;
        g[(e + 1, e)] -= k;
        weights[e] += 0.5 * h;
        weights[e + 1] += 0.5 * h;
    }
    g[(0, 0)] -= config.h1;
    g[(nodes - 1, nodes - 1)] -= config.h2;
    Ok((g, weights, vec![0, nodes - 1]))
}

/// Orthonormal basis of `{φ : w·φ = 0}` from the columns of a Householder reflector
/// that maps `w` onto the last coordinate axis.
fn complement_basis(w: &[f64]) -> DMatrix<f64> {
    let m = w.len();
    let mut v = DVector::from_column_slice(w);
    v /= v.norm();
    let last = v[m - 1];
    v[m - 1] += if last >= 0.0 { 1.0 } else { -1.0 };
    let reflector = DMatrix::identity(m, m) - (&v * v.transpose()) * (2.0 / v.norm_squared());
    reflector.columns(0, m - 1).into_owned()
}

fn selection_basis(m: usize, pinned: &[usize]) -> DMatrix<f64> {
    let free: Vec<usize> = (0..m).filter(|i| !pinned.contains(i)).collect();
    let mut q = DMatrix::zeros(m, free.len());
    for (c, &r) in free.iter().enumerate() {
        q[(r, c)] = 1.0;
    }
    q
}
