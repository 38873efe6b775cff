use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::elliptic::{dirichlet_energy, Region};
use crate::error::{Error, Result};

use super::operator::TOperator;

/// Environment variable overriding the default start-vector seed.
pub const SEED_ENV: &str = "MS_STABILITY_SEED";
pub const DEFAULT_SEED: u64 = 0x5eed_2024;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenSettings {
    /// Stop when the relative change of the estimate drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for EigenSettings {
    fn default() -> Self {
        let seed = std::env::var(SEED_ENV)
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .unwrap_or(DEFAULT_SEED);
        Self {
            tolerance: 1e-8,
            max_iterations: 500,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenEstimate {
    pub value: f64,
    pub iterations: usize,
    /// Relative change at the last step.
    pub change: f64,
    /// Maximizer, normalized in `(.,.)~`; empty when `T ≡ 0`.
    #[serde(skip)]
    pub vector: Vec<f64>,
}

fn start_vector(op: &TOperator, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..op.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalized(op, op.gram().project(&raw))
}

fn normalized(op: &TOperator, mut phi: Vec<f64>) -> Result<Vec<f64>> {
    let n = op.gram().norm_sq(&phi);
    if !(n > 0.0) {
        return Err(Error::GramSingular);
    }
    let s = n.sqrt();
    phi.iter_mut().for_each(|p| *p /= s);
    Ok(phi)
}

fn relative_change(new: f64, old: f64) -> f64 {
    if new == old {
        0.0
    } else {
        (new - old).abs() / new.abs().max(old.abs())
    }
}

/// `λ₁ = sup (Tφ,φ)~ / ‖φ‖²~` by Lanczos in the `(.,.)~` geometry, with full
/// reorthogonalization.
///
/// `T` is symmetric and non-negative there. Plain power iteration stalls when a bent
/// curve splits the cos/sin pair only slightly; the Krylov estimate does not depend on
/// that gap. Stops once the top Ritz value changes by less than `tolerance` and its
/// residual is below `√tolerance`, or when the Krylov space becomes invariant.
pub fn lambda1(op: &TOperator, settings: &EigenSettings) -> Result<EigenEstimate> {
    if op.is_null() {
        return Ok(EigenEstimate {
            value: 0.0,
            iterations: 0,
            change: 0.0,
            vector: Vec::new(),
        });
    }
    let g = op.gram();
    if !g.is_positive_definite() {
        return Err(Error::GramSingular);
    }
    let dim = g.dim().max(1);
    let mut basis = vec![start_vector(op, settings.seed)?];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut estimate = f64::NAN;
    let mut change = f64::INFINITY;
    for it in 1..=settings.max_iterations {
        let q = &basis[it - 1];
        let mut w = op.apply(q)?;
        let a = g.form(&w, q);
        alpha.push(a);
        // two passes of Gram-Schmidt keep the basis orthonormal to rounding
        for _ in 0..2 {
            for v in &basis {
                let c = g.form(&w, v);
                w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = g.norm_sq(&w).max(0.0).sqrt();
        let tri = DMatrix::from_fn(it, it, |i, j| match i.abs_diff(j) {
            0 => alpha[i],
            1 => beta[i.min(j)],
            _ => 0.0,
        });
        let eig = SymmetricEigen::new(tri);
        let top = eig.eigenvalues.imax();
        let next = eig.eigenvalues[top];
        let s = eig.eigenvectors.column(top);
        if it > 1 {
            change = relative_change(next, estimate);
        }
        estimate = next;
        let scale = next.abs().max(f64::MIN_POSITIVE);
        let residual = b * s[it - 1].abs() / scale;
        let invariant = b <= 1e-13 * alpha.iter().fold(0.0_f64, |m, x| m.max(x.abs())) || it >= dim;
        if invariant || (change < settings.tolerance && residual < settings.tolerance.sqrt()) {
            let mut vector = vec![0.0; q.len()];
            for (c, v) in s.iter().zip(&basis) {
                vector.iter_mut().zip(v).for_each(|(x, y)| *x += c * y);
            }
            return Ok(EigenEstimate {
                value: estimate,
                iterations: it,
                change: if invariant { 0.0 } else { change },
                vector: normalized(op, vector)?,
            });
        }
        w.iter_mut().for_each(|x| *x /= b);
        beta.push(b);
        basis.push(w);
    }
    Err(Error::NoConvergence {
        iterations: settings.max_iterations,
        estimate,
        change,
    })
}

/// `μ = inf 2∫|∇v|² / ‖Φ_v‖²~` over the admissible fields `v`, where `Φ_v` is the
/// Riesz representative of `ψ ↦ -2 b(ψ)(v)`.
///
/// The iteration `v ← v_{Φ_v}` is inverse iteration for this quotient, and its fixed
/// points are the `v_φ` of eigenvectors of `T`, so the minimum is `1/λ₁`. `+∞` when the
/// constraint set is empty (`T ≡ 0`).
pub fn mu(op: &TOperator, settings: &EigenSettings) -> Result<EigenEstimate> {
    mu_from(op, settings, None)
}

/// [`mu`] started from `start` (e.g. the maximizer of [`lambda1`]) instead of a random
/// vector.
pub fn mu_from(op: &TOperator, settings: &EigenSettings, start: Option<&[f64]>) -> Result<EigenEstimate> {
    if op.is_null() {
        return Ok(EigenEstimate {
            value: f64::INFINITY,
            iterations: 0,
            change: 0.0,
            vector: Vec::new(),
        });
    }
    if !op.gram().is_positive_definite() {
        return Err(Error::GramSingular);
    }
    let mut phi = match start {
        Some(s) if s.len() == op.len() => normalized(op, op.gram().project(s))?,
        _ => start_vector(op, settings.seed)?,
    };
    let mut estimate = f64::NAN;
    let mut change = f64::INFINITY;
    for it in 1..=settings.max_iterations {
        let (v, _) = op.jump_field(&phi)?.expect("strip operator has a source map");
        let rhs: Vec<f64> = op.adjoint(&v).iter().map(|r| -2.0 * r).collect();
        let big_phi = op.gram().riesz(&rhs)?;
        let q = op.gram().norm_sq(&big_phi);
        let e = 2.0 * dirichlet_energy(&v, Region::Whole);
        if !(q > 0.0) {
            return Err(Error::DegeneratePencil(format!(
                "constraint functional vanishes on the iterate (energy {e:e})"
            )));
        }
        let next = e / q;
        if it > 1 {
            change = relative_change(next, estimate);
        }
        estimate = next;
        if change < settings.tolerance {
            return Ok(EigenEstimate {
                value: estimate,
                iterations: it,
                change,
                vector: big_phi,
            });
        }
        phi = normalized(op, big_phi)?;
    }
    Err(Error::NoConvergence {
        iterations: settings.max_iterations,
        estimate,
        change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::{Grid, SolverSettings};
    use crate::geometry::{GraphCurve, PeriodicProfile, SegmentConfig, StripDomain};
    use crate::second_variation::Restriction;

    fn op(a: f64, b: f64, m: usize, profile: Option<PeriodicProfile>) -> TOperator {
        let domain = StripDomain::opposing_ramps(a, b).unwrap();
        let curve = match profile {
            Some(p) => GraphCurve::from_profile(&p, b, m).unwrap(),
            None => GraphCurve::flat(b, m).unwrap(),
        };
        TOperator::strip(&domain, &curve, Grid::new(m, m).unwrap(), Restriction::MeanZero, SolverSettings::default())
            .unwrap()
    }

    #[test]
    fn mu_is_reciprocal_of_lambda1() {
        let t = op(0.6, 1.0, 24, Some(PeriodicProfile::single(1, 0.04, 0.0)));
        let s = EigenSettings {
            tolerance: 1e-11,
            max_iterations: 2000,
            seed: 7,
        };
        let l = lambda1(&t, &s).unwrap();
        let m = mu(&t, &s).unwrap();
        assert!((l.value * m.value - 1.0).abs() < 1e-6, "{} {}", l.value, m.value);
    }

    #[test]
    fn flat_lambda1_is_the_first_mode() {
        let t = op(0.5, 1.0, 32, None);
        let l = lambda1(&t, &EigenSettings::default()).unwrap();
        let exact = (2.0 / std::f64::consts::PI) * (std::f64::consts::PI).tanh();
        assert!((l.value - exact).abs() < 0.02 * exact, "{} vs {exact}", l.value);
    }

    #[test]
    fn seed_does_not_change_the_answer() {
        let t = op(0.8, 1.2, 24, None);
        let a = lambda1(&t, &EigenSettings { seed: 1, ..EigenSettings::default() }).unwrap();
        let b = lambda1(&t, &EigenSettings { seed: 99, ..EigenSettings::default() }).unwrap();
        assert!((a.value - b.value).abs() < 1e-6 * a.value);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let t = op(0.8, 1.2, 24, None);
        let s = EigenSettings {
            tolerance: 0.0,
            max_iterations: 3,
            seed: 1,
        };
        assert!(matches!(lambda1(&t, &s), Err(Error::NoConvergence { iterations: 3, .. })));
    }

    #[test]
    fn null_operator_gives_zero_and_infinity() {
        let cfg = SegmentConfig::new(1.0, -0.5, -0.5).unwrap();
        let t = TOperator::segment(&cfg, 17, Restriction::None).unwrap();
        assert_eq!(lambda1(&t, &EigenSettings::default()).unwrap().value, 0.0);
        assert_eq!(mu(&t, &EigenSettings::default()).unwrap().value, f64::INFINITY);
    }

    #[test]
    fn nearly_split_pair_converges() {
        // a small bump barely separates the cos/sin pair; power iteration stalled here
        let t = op(0.5, 1.75, 32, Some(PeriodicProfile::single(1, 0.05, 0.0)));
        let l = lambda1(&t, &EigenSettings::default()).unwrap();
        let tight = lambda1(&t, &EigenSettings { tolerance: 1e-13, ..EigenSettings::default() }).unwrap();
        assert!((l.value - tight.value).abs() < 1e-8 * tight.value);
        let m = mu_from(&t, &EigenSettings::default(), Some(&l.vector)).unwrap();
        assert!((l.value * m.value - 1.0).abs() < 1e-6, "{} {}", l.value, m.value);
    }
}
