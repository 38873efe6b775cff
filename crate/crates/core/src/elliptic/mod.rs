//! Laplace problems on the strip cut along a graph curve.
//!
//! The curve splits the strip into an upper component (between the curve and `y = a`)
//! and a lower one (between `y = -a` and the curve). Each component is mapped onto a
//! rectangle by vertical affine scaling, so the curve is always the grid row `j = 0` of
//! both components and the Dirichlet side is row `j = ny`. Fields are discretized with
//! isoparametric bilinear elements; the Neumann data on the curve enters as boundary
//! loads, and the two components never share unknowns.
//!
//! A field on component `±` is `drift·x + w(x, y)` with `w` periodic in `x`. Only `w` is
//! stored; the drift carries the non-periodic part of Dirichlet data such as `x + 1`.

mod cg;
mod element;

use rayon::join;
use serde::Serialize;
use std::fmt;

use crate::error::{invalid, Error, Result};
use crate::geometry::{periodic_first_derivative, GraphCurve, StripDomain};
use cg::{pcg, Csr};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Grid {
    /// Columns; equals the number of curve nodes.
    pub nx: usize,
    /// Cell rows in each component.
    pub ny: usize,
}

impl Grid {
    pub const MIN_NODES: usize = 16;

    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx < Self::MIN_NODES || ny < Self::MIN_NODES {
            return Err(invalid(
                "grid",
                format!("nx and ny must be at least {}, got {nx}x{ny}", Self::MIN_NODES),
            ));
        }
        Ok(Self { nx, ny })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Upper,
    Lower,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Upper, Side::Lower];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Whole,
    Component(Side),
}

impl Region {
    fn includes(self, side: Side) -> bool {
        match self {
            Region::Whole => true,
            Region::Component(s) => s == side,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    /// Relative residual target.
    pub tolerance: f64,
    /// Defaults to `50·nx·ny`.
    pub max_iterations: Option<usize>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: None,
        }
    }
}

impl SolverSettings {
    fn max_iter(&self, grid: Grid) -> usize {
        self.max_iterations.unwrap_or(50 * grid.nx * grid.ny)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final relative residual (worst component).
    pub residual: f64,
    pub tolerance: f64,
}

impl SolveStats {
    fn merge(self, other: SolveStats) -> SolveStats {
        SolveStats {
            iterations: self.iterations + other.iterations,
            residual: self.residual.max(other.residual),
            tolerance: self.tolerance,
        }
    }
}

impl fmt::Display for SolveStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} iterations, relative residual {:.3e}, tolerance {:.1e}",
            self.iterations, self.residual, self.tolerance
        )
    }
}

fn node_y(height: f64, half_height: f64, side: Side, j: usize, ny: usize) -> f64 {
    let t = j as f64 / ny as f64;
    match side {
        Side::Upper => height + t * (half_height - height),
        Side::Lower => height - t * (height + half_height),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComponentField {
    pub drift: f64,
    /// Periodic part at nodes `(i, j)`, index `j·nx + i`, rows `j = 0..=ny`.
    pub values: Vec<f64>,
}

/// Piecewise-H¹ field on the slit strip, one [`ComponentField`] per side of the curve.
#[derive(Clone, Debug)]
pub struct SlitField {
    curve: GraphCurve,
    half_height: f64,
    grid: Grid,
    upper: ComponentField,
    lower: ComponentField,
}

impl SlitField {
    pub fn zero(curve: &GraphCurve, half_height: f64, grid: Grid) -> Result<Self> {
        if grid.nx != curve.len() {
            return Err(Error::GridMismatch {
                nx: grid.nx,
                nodes: curve.len(),
            });
        }
        let n = grid.nx * (grid.ny + 1);
        let empty = ComponentField {
            drift: 0.0,
            values: vec![0.0; n],
        };
        Ok(Self {
            curve: curve.clone(),
            half_height,
            grid,
            upper: empty.clone(),
            lower: empty,
        })
    }

    /// Samples `f(side, x, y)` at every node as the periodic part, with the given drifts.
    pub fn from_fn(
        curve: &GraphCurve,
        half_height: f64,
        grid: Grid,
        drifts: [f64; 2],
        f: impl Fn(Side, f64, f64) -> f64,
    ) -> Result<Self> {
        let mut field = Self::zero(curve, half_height, grid)?;
        field.upper.drift = drifts[0];
        field.lower.drift = drifts[1];
        for side in Side::BOTH {
            for j in 0..=grid.ny {
                for i in 0..grid.nx {
                    let (x, y) = field.node(side, i, j);
                    let v = f(side, x, y);
                    field.component_mut(side).values[j * grid.nx + i] = v;
                }
            }
        }
        Ok(field)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn curve(&self) -> &GraphCurve {
        &self.curve
    }

    pub fn half_height(&self) -> f64 {
        self.half_height
    }

    pub fn component(&self, side: Side) -> &ComponentField {
        match side {
            Side::Upper => &self.upper,
            Side::Lower => &self.lower,
        }
    }

    pub fn component_mut(&mut self, side: Side) -> &mut ComponentField {
        match side {
            Side::Upper => &mut self.upper,
            Side::Lower => &mut self.lower,
        }
    }

    pub fn node(&self, side: Side, i: usize, j: usize) -> (f64, f64) {
        let x = self.curve.abscissa(i);
        let y = node_y(self.curve.heights()[i], self.half_height, side, j, self.grid.ny);
        (x, y)
    }

    /// Full value `drift·x + w` at node `(i, j)`.
    pub fn value(&self, side: Side, i: usize, j: usize) -> f64 {
        let c = self.component(side);
        c.drift * self.curve.abscissa(i) + c.values[j * self.grid.nx + i]
    }

    /// One-sided trace on the curve nodes.
    pub fn trace(&self, side: Side) -> Vec<f64> {
        (0..self.grid.nx).map(|i| self.value(side, i, 0)).collect()
    }

    /// `u⁺ - u⁻` on the curve nodes.
    pub fn jump(&self) -> Vec<f64> {
        self.trace(Side::Upper)
            .iter()
            .zip(self.trace(Side::Lower))
            .map(|(p, m)| p - m)
            .collect()
    }

    /// Tangential derivative `∂_s u` of the trace on each polygon edge `(e, e+1)`.
    pub fn edge_derivatives(&self, side: Side) -> Vec<f64> {
        let c = self.component(side);
        let nx = self.grid.nx;
        let h = self.curve.spacing();
        self.curve
            .edge_lengths()
            .iter()
            .enumerate()
            .map(|(e, len)| (c.drift * h + c.values[(e + 1) % nx] - c.values[e]) / len)
            .collect()
    }

    /// Tangential derivative `∂_s u` of the trace at the curve nodes (periodic stencil).
    pub fn tangential_gradient(&self, side: Side) -> Vec<f64> {
        let c = self.component(side);
        let row = &c.values[..self.grid.nx];
        periodic_first_derivative(row, self.curve.spacing())
            .iter()
            .zip(self.curve.jacobians())
            .map(|(d, j)| (c.drift + d) / j)
            .collect()
    }

    /// `alpha·self + beta·other` on the same mesh.
    pub fn combine(&self, alpha: f64, other: &SlitField, beta: f64) -> SlitField {
        let mix = |a: &ComponentField, b: &ComponentField| ComponentField {
            drift: alpha * a.drift + beta * b.drift,
            values: a.values.iter().zip(&b.values).map(|(x, y)| alpha * x + beta * y).collect(),
        };
        SlitField {
            curve: self.curve.clone(),
            half_height: self.half_height,
            grid: self.grid,
            upper: mix(&self.upper, &other.upper),
            lower: mix(&self.lower, &other.lower),
        }
    }

    /// Largest nodal `|self - other|` (full values, drift included).
    pub fn max_abs_difference(&self, other: &SlitField) -> f64 {
        let mut worst = 0.0_f64;
        for side in Side::BOTH {
            for j in 0..=self.grid.ny {
                for i in 0..self.grid.nx {
                    worst = worst.max((self.value(side, i, j) - other.value(side, i, j)).abs());
                }
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        let mut worst = 0.0_f64;
        for side in Side::BOTH {
            for j in 0..=self.grid.ny {
                for i in 0..self.grid.nx {
                    worst = worst.max(self.value(side, i, j).abs());
                }
            }
        }
        worst
    }

    fn element_coords(&self, side: Side, i: usize, j: usize) -> ([f64; 4], [f64; 4], [usize; 4]) {
        element_geometry(&self.curve, self.half_height, self.grid, side, i, j)
    }
}

/// Coordinates and node indices (into the `(ny+1)·nx` array) of element `(i, j)`.
fn element_geometry(
    curve: &GraphCurve,
    half_height: f64,
    grid: Grid,
    side: Side,
    i: usize,
    j: usize,
) -> ([f64; 4], [f64; 4], [usize; 4]) {
    let nx = grid.nx;
    let ip = (i + 1) % nx;
    let hx = curve.spacing();
    let h = curve.heights();
    let x0 = i as f64 * hx;
    let x1 = x0 + hx;
    let xs = [x0, x1, x1, x0];
    let ys = [
        node_y(h[i], half_height, side, j, grid.ny),
        node_y(h[ip], half_height, side, j, grid.ny),
        node_y(h[ip], half_height, side, j + 1, grid.ny),
        node_y(h[i], half_height, side, j + 1, grid.ny),
    ];
    let idx = [j * nx + i, j * nx + ip, (j + 1) * nx + ip, (j + 1) * nx + i];
    (xs, ys, idx)
}

/// `∫ ∇f·∇g` over `region`, drifts included.
pub fn dirichlet_inner(f: &SlitField, g: &SlitField, region: Region) -> f64 {
    let grid = f.grid;
    let mut total = 0.0;
    for side in Side::BOTH {
        if !region.includes(side) {
            continue;
        }
        let (cf, cg) = (f.component(side), g.component(side));
        let mut acc = 0.0;
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (xs, ys, idx) = f.element_coords(side, i, j);
                for &(xi, wx) in element::gauss_rule(2) {
                    for &(eta, wy) in element::gauss_rule(2) {
                        let p = element::eval(&xs, &ys, xi, eta);
                        let (mut fx, mut fy) = (cf.drift, 0.0);
                        let (mut gx, mut gy) = (cg.drift, 0.0);
                        for a in 0..4 {
                            fx += cf.values[idx[a]] * p.dx[a];
                            fy += cf.values[idx[a]] * p.dy[a];
                            gx += cg.values[idx[a]] * p.dx[a];
                            gy += cg.values[idx[a]] * p.dy[a];
                        }
                        acc += wx * wy * p.jac * (fx * gx + fy * gy);
                    }
                }
            }
        }
        total += acc;
    }
    total
}

/// `∫ |∇v|²` over `region` (volume term of the energy).
pub fn dirichlet_energy(field: &SlitField, region: Region) -> f64 {
    dirichlet_inner(field, field, region)
}

/// `‖field - exact‖_{L²}` over the whole strip, by 3×3 Gauss quadrature per cell.
pub fn l2_distance(field: &SlitField, exact: impl Fn(Side, f64, f64) -> f64) -> f64 {
    let grid = field.grid;
    let mut acc = 0.0;
    for side in Side::BOTH {
        let c = field.component(side);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (xs, ys, idx) = field.element_coords(side, i, j);
                for &(xi, wx) in element::gauss_rule(3) {
                    for &(eta, wy) in element::gauss_rule(3) {
                        let p = element::eval(&xs, &ys, xi, eta);
                        let (mut x, mut y, mut v) = (0.0, 0.0, 0.0);
                        for a in 0..4 {
                            x += p.shape[a] * xs[a];
                            y += p.shape[a] * ys[a];
                            v += p.shape[a] * c.values[idx[a]];
                        }
                        v += c.drift * x;
                        let d = v - exact(side, x, y);
                        acc += wx * wy * p.jac * d * d;
                    }
                }
            }
        }
    }
    acc.sqrt()
}

/// Stiffness of one component restricted to its unknowns (rows `j < ny`).
#[derive(Clone, Debug)]
struct ComponentSystem {
    matrix: Csr,
    inv_diag: Vec<f64>,
    /// Coupling from unknowns to the Dirichlet row values.
    boundary: Csr,
    /// `-∫ ∂_x z` per unit drift.
    drift_load: Vec<f64>,
}

impl ComponentSystem {
    fn assemble(curve: &GraphCurve, half_height: f64, grid: Grid, side: Side) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let n = nx * ny;
        let mut triplets = Vec::with_capacity(16 * n);
        let mut boundary = Vec::with_capacity(8 * nx);
        let mut drift_load = vec![0.0; n];
        for j in 0..ny {
            for i in 0..nx {
                let (xs, ys, idx) = element_geometry(curve, half_height, grid, side, i, j);
                let (k, fx) = element::stiffness(&xs, &ys);
                for a in 0..4 {
                    let ga = idx[a];
                    if ga >= n {
                        continue;
                    }
                    drift_load[ga] -= fx[a];
                    for b in 0..4 {
                        let gb = idx[b];
                        if gb < n {
                            triplets.push((ga, gb, k[a][b]));
                        } else {
                            boundary.push((ga, gb - n, k[a][b]));
                        }
                    }
                }
            }
        }
        let matrix = Csr::from_triplets(n, n, triplets);
        let inv_diag = matrix.diagonal().iter().map(|d| 1.0 / d).collect();
        Self {
            matrix,
            inv_diag,
            boundary: Csr::from_triplets(n, nx, boundary),
            drift_load,
        }
    }

    fn solve(&self, rhs: &[f64], grid: Grid, settings: &SolverSettings) -> Result<(Vec<f64>, SolveStats)> {
        let mut x = vec![0.0; rhs.len()];
        let (stats, ok) = pcg(
            &self.matrix,
            &self.inv_diag,
            rhs,
            &mut x,
            settings.tolerance,
            settings.max_iter(grid),
        );
        if ok {
            Ok((x, stats))
        } else {
            Err(Error::SolverDiverged(stats))
        }
    }
}

/// Assembled systems for both components of one (domain, curve, grid) configuration.
#[derive(Clone, Debug)]
pub struct SlitSystem {
    curve: GraphCurve,
    half_height: f64,
    grid: Grid,
    upper: ComponentSystem,
    lower: ComponentSystem,
}

impl SlitSystem {
    pub fn new(domain: &StripDomain, curve: &GraphCurve, grid: Grid) -> Result<Self> {
        if grid.nx != curve.len() {
            return Err(Error::GridMismatch {
                nx: grid.nx,
                nodes: curve.len(),
            });
        }
        if (curve.period() - domain.period()).abs() > 1e-12 * domain.period() {
            return Err(invalid(
                "curve",
                format!("period {} differs from the strip period {}", curve.period(), domain.period()),
            ));
        }
        let a = domain.half_height();
        curve.ensure_inside(a)?;
        let (upper, lower) = join(
            || ComponentSystem::assemble(curve, a, grid, Side::Upper),
            || ComponentSystem::assemble(curve, a, grid, Side::Lower),
        );
        Ok(Self {
            curve: curve.clone(),
            half_height: a,
            grid,
            upper,
            lower,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn curve(&self) -> &GraphCurve {
        &self.curve
    }

    fn system(&self, side: Side) -> &ComponentSystem {
        match side {
            Side::Upper => &self.upper,
            Side::Lower => &self.lower,
        }
    }

    /// Harmonic `u` with the strip's Dirichlet data and homogeneous Neumann data on
    /// both sides of the curve.
    pub fn solve_state(&self, domain: &StripDomain, settings: &SolverSettings) -> Result<(SlitField, SolveStats)> {
        let nx = self.grid.nx;
        let n = nx * self.grid.ny;
        let b = domain.period();
        let setup = |side: Side| {
            let data = match side {
                Side::Upper => domain.top(),
                Side::Lower => domain.bottom(),
            };
            let g: Vec<f64> = (0..nx).map(|i| data.correction.eval(self.curve.abscissa(i), b)).collect();
            let sys = self.system(side);
            let mut coupled = vec![0.0; n];
            sys.boundary.mul_into(&g, &mut coupled);
            let rhs: Vec<f64> = sys
                .drift_load
                .iter()
                .zip(&coupled)
                .map(|(d, c)| data.slope * d - c)
                .collect();
            (data.slope, g, rhs)
        };
        let (su, gu, ru) = setup(Side::Upper);
        let (sl, gl, rl) = setup(Side::Lower);
        let (up, lo) = join(
            || self.upper.solve(&ru, self.grid, settings),
            || self.lower.solve(&rl, self.grid, settings),
        );
        let (xu, stu) = up?;
        let (xl, stl) = lo?;
        let mut field = SlitField::zero(&self.curve, self.half_height, self.grid)?;
        for (side, drift, x, g) in [(Side::Upper, su, xu, gu), (Side::Lower, sl, xl, gl)] {
            let c = field.component_mut(side);
            c.drift = drift;
            c.values[..n].copy_from_slice(&x);
            c.values[n..].copy_from_slice(&g);
        }
        Ok((field, stu.merge(stl)))
    }

    /// Field `v_φ`: zero on `y = ±a`, periodic, harmonic in each component, with the
    /// jump-source Neumann data of `coupling` on the curve.
    pub fn solve_jump(
        &self,
        coupling: &JumpCoupling,
        phi: &[f64],
        settings: &SolverSettings,
    ) -> Result<(SlitField, SolveStats)> {
        let nx = self.grid.nx;
        if phi.len() != nx {
            return Err(invalid("phi", format!("expected {nx} samples, got {}", phi.len())));
        }
        let n = nx * self.grid.ny;
        let (load_up, load_lo) = coupling.loads(phi);
        let mut ru = vec![0.0; n];
        let mut rl = vec![0.0; n];
        ru[..nx].copy_from_slice(&load_up);
        rl[..nx].copy_from_slice(&load_lo);
        let (up, lo) = join(
            || self.upper.solve(&ru, self.grid, settings),
            || self.lower.solve(&rl, self.grid, settings),
        );
        let (xu, stu) = up?;
        let (xl, stl) = lo?;
        let mut field = SlitField::zero(&self.curve, self.half_height, self.grid)?;
        field.component_mut(Side::Upper).values[..n].copy_from_slice(&xu);
        field.component_mut(Side::Lower).values[..n].copy_from_slice(&xl);
        Ok((field, stu.merge(stl)))
    }

    /// `vᵀ K v` summed over both components, from the assembled matrices. Only the
    /// unknown rows are used, so the field must vanish on the Dirichlet rows.
    pub fn stiffness_energy(&self, field: &SlitField) -> f64 {
        let n = self.grid.nx * self.grid.ny;
        Side::BOTH
            .iter()
            .map(|&side| {
                let v = &field.component(side).values[..n];
                let mut kv = vec![0.0; n];
                self.system(side).matrix.mul_into(v, &mut kv);
                v.iter().zip(&kv).map(|(a, b)| a * b).sum::<f64>()
            })
            .sum()
    }

    pub fn unknowns_per_component(&self) -> usize {
        debug_assert_eq!(self.upper.matrix.n_cols(), self.grid.nx * self.grid.ny);
        self.grid.nx * self.grid.ny
    }
}

/// Edge-wise tangential derivatives `∂_s u^±` of a state, defining the source map
///
/// `b(φ)(z) = ∫_Γ z⁺ div_Γ(φ∇_Γu⁺) - z⁻ div_Γ(φ∇_Γu⁻) = -∫_Γ φ (∂_s z⁺ ∂_s u⁺ - ∂_s z⁻ ∂_s u⁻)`,
///
/// the second form coming from integration by parts on the closed periodic curve. With
/// piecewise-linear traces on the polygonal curve each edge contributes
/// `avg(φ)·Δz·∂_s u`.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpCoupling {
    upper: Vec<f64>,
    lower: Vec<f64>,
}

impl JumpCoupling {
    pub fn from_state(state: &SlitField) -> Self {
        Self {
            upper: state.edge_derivatives(Side::Upper),
            lower: state.edge_derivatives(Side::Lower),
        }
    }

    pub fn len(&self) -> usize {
        self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }

    /// True when both tangential derivatives vanish, so the source map is zero.
    pub fn is_null(&self) -> bool {
        self.upper.iter().chain(&self.lower).all(|&c| c == 0.0)
    }

    fn edge_average(phi: &[f64], e: usize) -> f64 {
        0.5 * (phi[e] + phi[(e + 1) % phi.len()])
    }

    /// Right-hand sides on the curve rows of the two components for `K v = -b(φ)`.
    fn loads(&self, phi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = phi.len();
        let flux = |c: &[f64]| -> Vec<f64> {
            (0..m)
                .map(|i| {
                    let prev = (i + m - 1) % m;
                    Self::edge_average(phi, prev) * c[prev] - Self::edge_average(phi, i) * c[i]
                })
                .collect()
        };
        let up = flux(&self.upper);
        let lo = flux(&self.lower).into_iter().map(|v| -v).collect();
        (up, lo)
    }

    /// The bilinear pairing `b(φ)(z)`.
    pub fn pairing(&self, phi: &[f64], z: &SlitField) -> f64 {
        let dz_up = edge_increments(z, Side::Upper);
        let dz_lo = edge_increments(z, Side::Lower);
        -(0..phi.len())
            .map(|e| Self::edge_average(phi, e) * (dz_up[e] * self.upper[e] - dz_lo[e] * self.lower[e]))
            .sum::<f64>()
    }

    /// Coefficients `(Lᵀz)_j = b(e_j)(z)` of the pairing as a functional of `φ`.
    pub fn adjoint(&self, z: &SlitField) -> Vec<f64> {
        let dz_up = edge_increments(z, Side::Upper);
        let dz_lo = edge_increments(z, Side::Lower);
        let m = self.len();
        let per_edge: Vec<f64> = (0..m)
            .map(|e| -0.5 * (dz_up[e] * self.upper[e] - dz_lo[e] * self.lower[e]))
            .collect();
        (0..m).map(|j| per_edge[j] + per_edge[(j + m - 1) % m]).collect()
    }
}

/// Trace increments `z(x_{e+1}) - z(x_e)` along each edge (drift included).
fn edge_increments(z: &SlitField, side: Side) -> Vec<f64> {
    let c = z.component(side);
    let nx = z.grid.nx;
    let h = z.curve.spacing();
    (0..nx)
        .map(|e| c.drift * h + c.values[(e + 1) % nx] - c.values[e])
        .collect()
}

pub fn solve_state(
    domain: &StripDomain,
    curve: &GraphCurve,
    grid: Grid,
    settings: &SolverSettings,
) -> Result<(SlitField, SolveStats)> {
    SlitSystem::new(domain, curve, grid)?.solve_state(domain, settings)
}

pub fn solve_jump_source(
    domain: &StripDomain,
    curve: &GraphCurve,
    state: &SlitField,
    phi: &[f64],
    grid: Grid,
    settings: &SolverSettings,
) -> Result<(SlitField, SolveStats)> {
    let system = SlitSystem::new(domain, curve, grid)?;
    system.solve_jump(&JumpCoupling::from_state(state), phi, settings)
}
