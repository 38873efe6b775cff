use crate::elliptic::{dirichlet_energy, dirichlet_inner, JumpCoupling, Region, SlitField, SlitSystem, SolveStats, SolverSettings};
use crate::error::{invalid, Result};
use crate::geometry::{GraphCurve, SegmentConfig, StripDomain};
use crate::elliptic::Grid;

use super::gram::{GramConfig, Restriction, TildeGram};

#[derive(Clone, Debug)]
struct StripCoupling {
    system: SlitSystem,
    state: SlitField,
    jump: JumpCoupling,
}

/// The operator `T` of the stability problem, `(Tφ,ψ)~ = 2∫∇v_φ·∇v_ψ`, together with
/// the Gram matrix it is represented in.
///
/// Straight segments have locally constant `u`, so the source map and `T` vanish.
#[derive(Clone, Debug)]
pub struct TOperator {
    gram: TildeGram,
    coupling: Option<StripCoupling>,
    settings: SolverSettings,
}

impl TOperator {
    /// Solves the state on `curve` and builds `T` around it.
    pub fn strip(
        domain: &StripDomain,
        curve: &GraphCurve,
        grid: Grid,
        restriction: Restriction,
        settings: SolverSettings,
    ) -> Result<Self> {
        let system = SlitSystem::new(domain, curve, grid)?;
        let (state, _) = system.solve_state(domain, &settings)?;
        Self::with_state(system, state, restriction, settings)
    }

    /// Builds `T` around an already solved state on `system`'s mesh.
    pub fn with_state(
        system: SlitSystem,
        state: SlitField,
        restriction: Restriction,
        settings: SolverSettings,
    ) -> Result<Self> {
        if state.grid() != system.grid() || state.curve() != system.curve() {
            return Err(invalid("state", "was not solved on this mesh"));
        }
        let gram = TildeGram::assemble(GramConfig::Strip(system.curve()), restriction)?;
        let jump = JumpCoupling::from_state(&state);
        Ok(Self {
            gram,
            coupling: Some(StripCoupling { system, state, jump }),
            settings,
        })
    }

    pub fn segment(config: &SegmentConfig, nodes: usize, restriction: Restriction) -> Result<Self> {
        let gram = TildeGram::assemble(GramConfig::Segment { config, nodes }, restriction)?;
        Ok(Self {
            gram,
            coupling: None,
            settings: SolverSettings::default(),
        })
    }

    pub fn gram(&self) -> &TildeGram {
        &self.gram
    }

    pub fn len(&self) -> usize {
        self.gram.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gram.is_empty()
    }

    pub fn state(&self) -> Option<&SlitField> {
        self.coupling.as_ref().map(|c| &c.state)
    }

    pub fn system(&self) -> Option<&SlitSystem> {
        self.coupling.as_ref().map(|c| &c.system)
    }

    pub fn coupling(&self) -> Option<&JumpCoupling> {
        self.coupling.as_ref().map(|c| &c.jump)
    }

    /// True when `T ≡ 0`.
    pub fn is_null(&self) -> bool {
        self.coupling.as_ref().is_none_or(|c| c.jump.is_null())
    }

    fn check_len(&self, phi: &[f64]) -> Result<()> {
        if phi.len() != self.len() {
            return Err(invalid(
                "phi",
                format!("expected {} samples, got {}", self.len(), phi.len()),
            ));
        }
        Ok(())
    }

    /// `v_φ`, or `None` for segments.
    pub fn jump_field(&self, phi: &[f64]) -> Result<Option<(SlitField, SolveStats)>> {
        self.check_len(phi)?;
        match &self.coupling {
            None => Ok(None),
            Some(c) => c.system.solve_jump(&c.jump, phi, &self.settings).map(Some),
        }
    }

    /// Source pairing `b(φ)(z)`; zero for segments.
    pub fn pairing(&self, phi: &[f64], z: &SlitField) -> f64 {
        self.coupling.as_ref().map_or(0.0, |c| c.jump.pairing(phi, z))
    }

    /// `Lᵀz`, the source pairing as a functional of `φ`.
    pub fn adjoint(&self, z: &SlitField) -> Vec<f64> {
        match &self.coupling {
            None => vec![0.0; self.len()],
            Some(c) => c.jump.adjoint(z),
        }
    }

    /// `Tφ`, the Riesz representative of `ψ ↦ -2 b(ψ)(v_φ)`.
    pub fn apply(&self, phi: &[f64]) -> Result<Vec<f64>> {
        self.check_len(phi)?;
        match self.jump_field(phi)? {
            None => Ok(vec![0.0; self.len()]),
            Some((v, _)) => {
                let rhs: Vec<f64> = self.adjoint(&v).iter().map(|r| -2.0 * r).collect();
                self.gram.riesz(&rhs)
            }
        }
    }

    /// `(Tφ,ψ)~ = -2 b(ψ)(v_φ)`, computed without the Gram solve.
    pub fn operator_form(&self, phi: &[f64], psi: &[f64]) -> Result<f64> {
        self.check_len(psi)?;
        Ok(match self.jump_field(phi)? {
            None => 0.0,
            Some((v, _)) => -2.0 * self.pairing(psi, &v),
        })
    }

    /// `2∫∇v_φ·∇v_ψ`.
    pub fn energy_form(&self, phi: &[f64], psi: &[f64]) -> Result<f64> {
        match (self.jump_field(phi)?, self.jump_field(psi)?) {
            (Some((vp, _)), Some((vq, _))) => Ok(2.0 * dirichlet_inner(&vp, &vq, Region::Whole)),
            _ => Ok(0.0),
        }
    }
}

pub fn apply_t(op: &TOperator, phi: &[f64]) -> Result<Vec<f64>> {
    op.apply(phi)
}

/// `∂²F(u,K)[φ]` evaluated two ways.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SecondVariation {
    /// `-2∫|∇v_φ|² + ‖φ‖²~`.
    pub direct: f64,
    /// `‖φ‖²~ - (Tφ,φ)~`, with `(Tφ,φ)~ = -2 b(φ)(v_φ)`.
    pub via_operator: f64,
}

impl SecondVariation {
    pub fn discrepancy(&self) -> f64 {
        (self.direct - self.via_operator).abs()
    }
}

pub fn second_variation_value(op: &TOperator, phi: &[f64]) -> Result<SecondVariation> {
    op.check_len(phi)?;
    let norm = op.gram.norm_sq(phi);
    match op.jump_field(phi)? {
        None => Ok(SecondVariation {
            direct: norm,
            via_operator: norm,
        }),
        Some((v, _)) => Ok(SecondVariation {
            direct: norm - 2.0 * dirichlet_energy(&v, Region::Whole),
            via_operator: norm + 2.0 * op.pairing(phi, &v),
        }),
    }
}
