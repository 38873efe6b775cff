use anyhow::{bail, Result};
use rayon::prelude::*;
use serde::Serialize;

use ms_stability::analysis::{
    analyze_segment, analyze_strip, has_closed_form, AnalysisOptions, Quantity, StabilityReport, COERCIVITY_TOLERANCE,
};
use ms_stability::analytic::{lambda1_strip, mode_field_value, mode_lambda, mode_samples, segment_min_eig, ModePhase};
use ms_stability::elliptic::{l2_distance, Grid, Side, SolverSettings};
use ms_stability::geometry::{GraphCurve, StripDomain};
use ms_stability::second_variation::{Restriction, TOperator, Verdict};
use ms_stability::validator::{validate_second_variation, ValidationReport, ValidationSettings};

use crate::config::{Config, GeometryConfig, StripConfig};
use crate::output::{sig9, table};

/// What a command produced: the machine-readable document, an optional human table and
/// the process exit code.
pub struct Outcome {
    pub document: String,
    pub table: Option<String>,
    pub code: u8,
}

pub const EXIT_STABLE: u8 = 0;
pub const EXIT_MISMATCH: u8 = 2;
pub const EXIT_UNSTABLE: u8 = 3;
pub const EXIT_MARGINAL: u8 = 4;

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn options(cfg: &Config) -> AnalysisOptions {
    AnalysisOptions {
        restriction: cfg.eigen.restriction,
        solver: cfg.solver.settings(),
        eigen: cfg.eigen.settings(),
        band: cfg.eigen.band,
        compute_mu: cfg.eigen.mu,
    }
}

fn strip(cfg: &Config) -> Result<&StripConfig> {
    match &cfg.geometry {
        GeometryConfig::Strip(s) => Ok(s),
        GeometryConfig::Segment(_) => bail!("this command needs a strip geometry (geometry.kind = \"strip\")"),
    }
}

fn strip_curve(s: &StripConfig, b: f64, nodes: usize) -> ms_stability::Result<GraphCurve> {
    GraphCurve::from_profile(&s.curve, b, nodes)
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::StrictlyStable => EXIT_STABLE,
        Verdict::Unstable => EXIT_UNSTABLE,
        Verdict::Marginal => EXIT_MARGINAL,
    }
}

fn quantity(q: &Quantity) -> String {
    sig9(q.value)
}

fn report_table(r: &StabilityReport) -> String {
    let mut rows = vec![vec!["lambda1".to_string(), quantity(&r.lambda1), "numeric".into()]];
    if let Some(q) = &r.lambda1_analytic {
        rows.push(vec!["lambda1 (closed form)".into(), quantity(q), "analytic".into()]);
    }
    if let Some(q) = &r.mu {
        rows.push(vec!["mu".into(), quantity(q), "numeric".into()]);
    }
    if let Some(q) = &r.coercivity {
        rows.push(vec!["coercivity".into(), quantity(q), "numeric".into()]);
    }
    rows.push(vec![
        "transmission residual".into(),
        sig9(r.criticality.transmission_residual),
        "numeric".into(),
    ]);
    rows.push(vec![
        "neumann residual".into(),
        sig9(r.criticality.neumann_residual),
        "numeric".into(),
    ]);
    if let Some(j) = &r.jump_minimum {
        rows.push(vec![
            format!("min |jump| (x = {})", sig9(j.x)),
            quantity(&j.value),
            "numeric".into(),
        ]);
    }
    rows.push(vec!["verdict".into(), r.verdict.to_string(), String::new()]);
    table(&["quantity", "value", "provenance"], &rows)
}

pub fn analyze(cfg: &Config) -> Result<Outcome> {
    let opts = options(cfg);
    let report = match &cfg.geometry {
        GeometryConfig::Strip(s) => {
            let domain = s.domain()?;
            let curve = strip_curve(s, s.b, cfg.grid.nx)?;
            analyze_strip(&domain, &curve, cfg.grid.grid()?, &opts)?
        }
        GeometryConfig::Segment(s) => analyze_segment(&s.config()?, cfg.grid.nx, &opts)?,
    };
    Ok(Outcome {
        document: json(&report)?,
        table: Some(report_table(&report)),
        code: verdict_code(report.verdict),
    })
}

pub const CSV_HEADER: &str = "a,b,lambda1_numeric,lambda1_analytic,verdict,grid_nx,grid_ny,residual";

struct Row {
    a: f64,
    b: f64,
    report: StabilityReport,
}

/// One row per `(a, b)` lattice point, `a` outer and `b` inner. Points are analyzed in
/// parallel on at most `jobs` threads, rows are emitted in lattice order.
pub fn phase_diagram(cfg: &Config, jobs: Option<usize>) -> Result<Outcome> {
    let s = strip(cfg)?;
    let Some(lattice) = &s.lattice else {
        bail!("phase-diagram needs geometry.lattice");
    };
    let (a_values, b_values) = (lattice.a.values()?, lattice.b.values()?);
    let points: Vec<(f64, f64)> = a_values
        .iter()
        .flat_map(|&a| b_values.iter().map(move |&b| (a, b)))
        .collect();
    let base = s.domain()?;
    let grid = cfg.grid.grid()?;
    let opts = options(cfg);
    let run = || -> Result<Vec<Row>> {
        points
            .par_iter()
            .map(|&(a, b)| {
                let domain = base.resized(a, b)?;
                let curve = strip_curve(s, b, grid.nx)?;
                let report = analyze_strip(&domain, &curve, grid, &opts)?;
                Ok(Row { a, b, report })
            })
            .collect()
    };
    let rows = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(run)?,
        None => run()?,
    };
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    let mut table_rows = Vec::new();
    for r in &rows {
        let analytic = r.report.lambda1_analytic.map_or(f64::NAN, |q| q.value);
        let fields = [
            sig9(r.a),
            sig9(r.b),
            sig9(r.report.lambda1.value),
            sig9(analytic),
            r.report.verdict.to_string(),
            grid.nx.to_string(),
            grid.ny.to_string(),
            sig9(r.report.criticality.transmission_residual),
        ];
        csv.push_str(&fields.join(","));
        csv.push('\n');
        table_rows.push(fields.to_vec());
    }
    Ok(Outcome {
        document: csv,
        table: Some(table(
            &["a", "b", "lambda1", "closed form", "verdict", "nx", "ny", "residual"],
            &table_rows,
        )),
        code: 0,
    })
}

#[derive(Serialize)]
struct ValidationOutput {
    passed: bool,
    first_tolerance: f64,
    second_tolerance: f64,
    energy: Quantity,
    first_derivative: Quantity,
    first_derivative_error: Quantity,
    second_derivative: Quantity,
    second_derivative_error: Quantity,
    second_variation: Quantity,
    second_variation_via_t: Quantity,
    first_variation_ratio: Quantity,
    relative_error: Quantity,
    report: ValidationReport,
}

pub fn validate(cfg: &Config) -> Result<Outcome> {
    let s = strip(cfg)?;
    let domain = s.domain()?;
    let grid = cfg.grid.grid()?;
    let curve = strip_curve(s, s.b, grid.nx)?;
    let direction = cfg.validate.direction.sample(grid.nx, s.b);
    let settings = ValidationSettings {
        step: cfg.validate.step,
        grid,
        solver: cfg.solver.settings(),
        restriction: cfg.eigen.restriction,
    };
    let r = validate_second_variation(&domain, &curve, &direction, &settings)?;
    let passed = r.first_variation_ratio <= cfg.validate.first_tolerance
        && r.relative_error <= cfg.validate.second_tolerance;
    let out = ValidationOutput {
        passed,
        first_tolerance: cfg.validate.first_tolerance,
        second_tolerance: cfg.validate.second_tolerance,
        energy: Quantity::numeric(r.energy),
        first_derivative: Quantity::fd(r.fd.first),
        first_derivative_error: Quantity::fd(r.fd.first_error),
        second_derivative: Quantity::fd(r.fd.second),
        second_derivative_error: Quantity::fd(r.fd.second_error),
        second_variation: Quantity::numeric(r.second_variation),
        second_variation_via_t: Quantity::numeric(r.second_variation_via_t),
        first_variation_ratio: Quantity::fd(r.first_variation_ratio),
        relative_error: Quantity::fd(r.relative_error),
        report: r,
    };
    let rows = vec![
        vec!["F".into(), sig9(out.energy.value), "numeric".into()],
        vec!["g'(0)".into(), sig9(out.first_derivative.value), "fd".into()],
        vec!["g''(0)".into(), sig9(out.second_derivative.value), "fd".into()],
        vec!["d2F".into(), sig9(out.second_variation.value), "numeric".into()],
        vec!["d2F via T".into(), sig9(out.second_variation_via_t.value), "numeric".into()],
        vec!["|g'(0)|/F".into(), sig9(out.first_variation_ratio.value), "fd".into()],
        vec!["relative mismatch".into(), sig9(out.relative_error.value), "fd".into()],
        vec!["passed".into(), passed.to_string(), String::new()],
    ];
    Ok(Outcome {
        document: json(&out)?,
        table: Some(table(&["quantity", "value", "provenance"], &rows)),
        code: if passed { 0 } else { EXIT_MISMATCH },
    })
}

#[derive(Serialize)]
struct CompareRow {
    n: u32,
    lambda_numeric: Quantity,
    lambda_analytic: Quantity,
    relative_error: f64,
    coarse_grid: Grid,
    fine_grid: Grid,
    field_l2_coarse: Quantity,
    field_l2_fine: Quantity,
    observed_order: f64,
    passed: bool,
}

#[derive(Serialize)]
struct CompareOutput {
    a: f64,
    b: f64,
    mode_tolerance: f64,
    min_order: f64,
    passed: bool,
    modes: Vec<CompareRow>,
}

/// Rayleigh quotient of `T` on `cos(nπx/b)` and the L² error of `v_φ`.
fn mode_numbers(domain: &StripDomain, n: u32, grid: Grid, solver: SolverSettings, restriction: Restriction) -> Result<(f64, f64)> {
    let (a, b) = (domain.half_height(), domain.period());
    let curve = GraphCurve::flat(b, grid.nx)?;
    let op = TOperator::strip(domain, &curve, grid, restriction, solver)?;
    let phi = mode_samples(n, ModePhase::Cos, 1.0, b, grid.nx);
    let (v, _) = op.jump_field(&phi)?.expect("strip operator");
    let q = -2.0 * op.pairing(&phi, &v) / op.gram().norm_sq(&phi);
    // the reference is for ∂_s u⁺ = 1, ∂_s u⁻ = -1; the source scales with each side's slope
    let (up, lo) = (domain.top().slope, -domain.bottom().slope);
    let err = l2_distance(&v, |side, x, y| {
        let scale = if side == Side::Upper { up } else { lo };
        scale * mode_field_value(n, ModePhase::Cos, 1.0, a, b, x, y)
    });
    Ok((q, err))
}

pub fn compare(cfg: &Config) -> Result<Outcome> {
    let s = strip(cfg)?;
    let domain = s.domain()?;
    let fine = cfg.grid.grid()?;
    let flat = GraphCurve::flat(s.b, fine.nx)?;
    let curve = strip_curve(s, s.b, fine.nx)?;
    if curve != flat || !has_closed_form(&domain, &flat) {
        bail!("compare needs the flat pair: geometry.curve flat and unit Dirichlet slopes");
    }
    let coarse = Grid::new(fine.nx / 2, fine.ny / 2)?;
    let mut rows = Vec::new();
    for &n in &cfg.validate.modes {
        let exact = mode_lambda(n, s.a, s.b)?;
        let (q_fine, e_fine) = mode_numbers(&domain, n, fine, cfg.solver.settings(), cfg.eigen.restriction)?;
        let (_, e_coarse) = mode_numbers(&domain, n, coarse, cfg.solver.settings(), cfg.eigen.restriction)?;
        let rel = (q_fine - exact).abs() / exact;
        let order = (e_coarse / e_fine).log2();
        rows.push(CompareRow {
            n,
            lambda_numeric: Quantity::numeric(q_fine),
            lambda_analytic: Quantity::analytic(exact),
            relative_error: rel,
            coarse_grid: coarse,
            fine_grid: fine,
            field_l2_coarse: Quantity::numeric(e_coarse),
            field_l2_fine: Quantity::numeric(e_fine),
            observed_order: order,
            passed: rel <= cfg.validate.mode_tolerance && order >= cfg.validate.min_order,
        });
    }
    let passed = rows.iter().all(|r| r.passed);
    let table_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                sig9(r.lambda_numeric.value),
                sig9(r.lambda_analytic.value),
                sig9(r.relative_error),
                sig9(r.field_l2_coarse.value),
                sig9(r.field_l2_fine.value),
                sig9(r.observed_order),
            ]
        })
        .collect();
    let out = CompareOutput {
        a: s.a,
        b: s.b,
        mode_tolerance: cfg.validate.mode_tolerance,
        min_order: cfg.validate.min_order,
        passed,
        modes: rows,
    };
    Ok(Outcome {
        document: json(&out)?,
        table: Some(table(
            &["n", "lambda numeric", "lambda analytic", "rel error", "L2 coarse", "L2 fine", "order"],
            &table_rows,
        )),
        code: if passed { 0 } else { EXIT_MISMATCH },
    })
}

#[derive(Serialize)]
struct ModeValue {
    n: u32,
    lambda: Quantity,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum OracleOutput {
    Strip {
        a: f64,
        b: f64,
        lambda1: Quantity,
        modes: Vec<ModeValue>,
        verdict: Verdict,
    },
    Segment {
        length: f64,
        h1: f64,
        h2: f64,
        /// `∂²F[1] = -H1 - H2`.
        second_variation_constant: Quantity,
        coercivity: Quantity,
        verdict: Verdict,
    },
}

/// Closed-form values only; no PDE solve.
pub fn oracle(cfg: &Config) -> Result<Outcome> {
    let (out, rows) = match &cfg.geometry {
        GeometryConfig::Strip(s) => {
            let l1 = lambda1_strip(s.a, s.b)?;
            let modes = cfg
                .validate
                .modes
                .iter()
                .map(|&n| {
                    Ok(ModeValue {
                        n,
                        lambda: Quantity::analytic(mode_lambda(n, s.a, s.b)?),
                    })
                })
                .collect::<ms_stability::Result<Vec<_>>>()?;
            let mut rows = vec![vec!["lambda1".to_string(), sig9(l1)]];
            rows.extend(modes.iter().map(|m| vec![format!("lambda (n = {})", m.n), sig9(m.lambda.value)]));
            let verdict = Verdict::from_lambda1(l1, cfg.eigen.band);
            rows.push(vec!["verdict".into(), verdict.to_string()]);
            (
                OracleOutput::Strip {
                    a: s.a,
                    b: s.b,
                    lambda1: Quantity::analytic(l1),
                    modes,
                    verdict,
                },
                rows,
            )
        }
        GeometryConfig::Segment(s) => {
            let c = s.config()?;
            let min_eig = segment_min_eig(c.length, c.h1, c.h2, cfg.grid.nx)?;
            let verdict = Verdict::from_coercivity(min_eig, COERCIVITY_TOLERANCE);
            let rows = vec![
                vec!["d2F[1]".to_string(), sig9(-c.h1 - c.h2)],
                vec!["coercivity".into(), sig9(min_eig)],
                vec!["verdict".into(), verdict.to_string()],
            ];
            (
                OracleOutput::Segment {
                    length: c.length,
                    h1: c.h1,
                    h2: c.h2,
                    second_variation_constant: Quantity::analytic(-c.h1 - c.h2),
                    coercivity: Quantity::numeric(min_eig),
                    verdict,
                },
                rows,
            )
        }
    };
    Ok(Outcome {
        document: json(&out)?,
        table: Some(table(&["quantity", "value"], &rows)),
        code: 0,
    })
}
