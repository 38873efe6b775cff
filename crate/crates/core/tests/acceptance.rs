//! Acceptance suite. Runs every criterion at its stated tolerance, prints one line per
//! criterion and exits non-zero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ms_stability::analysis::{analyze_segment, AnalysisOptions};
use ms_stability::analytic::{lambda1_strip, mode_lambda, mode_samples, segment_min_eig, ModePhase};
use ms_stability::elliptic::{l2_distance, solve_state, Grid, JumpCoupling, Side, SlitSystem, SolverSettings};
use ms_stability::geometry::{
    BoundaryData, FlowSpec, GraphCurve, PeriodicProfile, SegmentConfig, StripDomain,
};
use ms_stability::second_variation::{
    lambda1, mu, second_variation_value, EigenSettings, Restriction, TOperator, Verdict, DEFAULT_BAND,
};
use ms_stability::validator::{energy_along_flow, validate_second_variation, ValidationSettings};
use ms_stability::Result;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        passed,
        detail: detail.into(),
    })
}

fn solver() -> SolverSettings {
    SolverSettings {
        tolerance: 1e-10,
        max_iterations: None,
    }
}

fn flat_operator(a: f64, b: f64, n: usize, restriction: Restriction) -> Result<TOperator> {
    let domain = StripDomain::opposing_ramps(a, b)?;
    let curve = GraphCurve::flat(b, n)?;
    TOperator::strip(&domain, &curve, Grid::new(n, n)?, restriction, solver())
}

fn rel(x: f64, reference: f64) -> f64 {
    (x - reference).abs() / reference.abs()
}

fn strip_eigenvalues() -> Result<Outcome> {
    let mut worst = 0.0_f64;
    let mut parts = Vec::new();
    for (a, b) in [(1.0, 1.0), (0.5, 1.0), (1.0, 2.0), (2.0, 1.0)] {
        let op = flat_operator(a, b, 128, Restriction::MeanZero)?;
        let numeric = lambda1(&op, &EigenSettings::default())?.value;
        let exact = lambda1_strip(a, b)?;
        let e = rel(numeric, exact);
        worst = worst.max(e);
        parts.push(format!("({a},{b}) {numeric:.6}/{exact:.6}"));
    }
    outcome(worst <= 0.02, format!("max rel err {worst:.2e} ≤ 0.02; {}", parts.join(", ")))
}

fn classification_lattice() -> Result<Outcome> {
    let values: Vec<f64> = (1..=8).map(|i| 0.25 * i as f64).collect();
    let (mut checked, mut skipped, mut wrong) = (0, 0, Vec::new());
    for &a in &values {
        for &b in &values {
            let exact = lambda1_strip(a, b)?;
            if (exact - 1.0).abs() <= 0.05 {
                skipped += 1;
                continue;
            }
            let op = flat_operator(a, b, 64, Restriction::MeanZero)?;
            let numeric = lambda1(&op, &EigenSettings::default())?.value;
            let verdict = Verdict::from_lambda1(numeric, DEFAULT_BAND);
            let expected = if exact < 1.0 { Verdict::StrictlyStable } else { Verdict::Unstable };
            checked += 1;
            if verdict != expected {
                wrong.push(format!("({a},{b}) numeric {numeric:.4} analytic {exact:.4}"));
            }
        }
    }
    outcome(
        wrong.is_empty(),
        format!("{checked} points classified, {skipped} inside the band skipped; mismatches: {wrong:?}"),
    )
}

fn mode_law() -> Result<Outcome> {
    let (a, b, n_nodes) = (1.0, 1.0, 128);
    let op = flat_operator(a, b, n_nodes, Restriction::MeanZero)?;
    let mut worst = 0.0_f64;
    let mut parts = Vec::new();
    for n in [2, 4, 6] {
        let phi = mode_samples(n, ModePhase::Cos, 1.0, b, n_nodes);
        let q = op.operator_form(&phi, &phi)? / op.gram().norm_sq(&phi);
        let exact = mode_lambda(n, a, b)?;
        worst = worst.max(rel(q, exact));
        parts.push(format!("n={n} {q:.6}/{exact:.6}"));
    }
    outcome(worst <= 0.02, format!("max rel err {worst:.2e} ≤ 0.02; {}", parts.join(", ")))
}

fn variation_consistency() -> Result<Outcome> {
    let (a, b, n) = (1.0, 1.0, 128);
    let domain = StripDomain::opposing_ramps(a, b)?;
    let curve = GraphCurve::flat(b, n)?;
    let direction = PeriodicProfile::single(1, 0.0, 1.0).sample(n, b);
    let settings = ValidationSettings {
        step: 1e-2,
        grid: Grid::new(n, n)?,
        solver: SolverSettings {
            tolerance: 1e-12,
            max_iterations: None,
        },
        restriction: Restriction::MeanZero,
    };
    let r = validate_second_variation(&domain, &curve, &direction, &settings)?;
    let closed = (1.0 - lambda1_strip(a, b)?) * 2.0 * PI * PI;
    let first_ok = r.fd.first.abs() <= 1e-4 * r.energy;
    let second_ok = r.relative_error <= 0.05;
    let closed_err = rel(r.second_variation, closed);
    outcome(
        first_ok && second_ok && closed_err <= 0.03,
        format!(
            "|g'(0)|/F = {:.2e} ≤ 1e-4; g''(0) = {:.6} vs ∂²F = {:.6} (rel {:.2e} ≤ 0.05); (1-λ₁)2π² = {closed:.6} (rel {closed_err:.2e} ≤ 0.03)",
            r.first_variation_ratio, r.fd.second, r.second_variation, r.relative_error
        ),
    )
}

fn translation_invariance() -> Result<Outcome> {
    let (a, b, n) = (1.0, 1.0, 64);
    let domain = StripDomain::opposing_ramps(a, b)?;
    let curve = GraphCurve::flat(b, n)?;
    let grid = Grid::new(n, n)?;
    let steps = vec![-0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3];
    let flow = FlowSpec::new(vec![1.0; n], &domain, steps)?;
    let samples = energy_along_flow(&domain, &curve, grid, &flow, &solver())?;
    let base = samples.iter().find(|s| s.t == 0.0).unwrap().total();
    let drift = samples.iter().map(|s| rel(s.total(), base)).fold(0.0_f64, f64::max);
    let op = TOperator::strip(&domain, &curve, grid, Restriction::None, solver())?;
    let sv = second_variation_value(&op, &vec![1.0; n])?;
    let assembly = sv.direct.abs().max(sv.via_operator.abs());
    outcome(
        drift <= 1e-8 && assembly <= 1e-10,
        format!("max rel change of F {drift:.2e} ≤ 1e-8; |∂²F[1]| = {assembly:.2e} ≤ 1e-10"),
    )
}

fn segment_example() -> Result<Outcome> {
    let mut worst = 0.0_f64;
    let mut verdicts_ok = true;
    for (h1, h2) in [(-1.0, -1.0), (1.0, 1.0), (0.3, -0.7), (-0.25, 0.5)] {
        let cfg = SegmentConfig::new(1.0, h1, h2)?;
        let op = TOperator::segment(&cfg, 65, Restriction::None)?;
        let sv = second_variation_value(&op, &[1.0; 65])?;
        worst = worst.max((sv.direct - (-h1 - h2)).abs());
        let verdict = analyze_segment(
            &cfg,
            65,
            &AnalysisOptions {
                restriction: Restriction::None,
                ..AnalysisOptions::default()
            },
        )?
        .verdict;
        if h1 == h2 {
            let expected = if h1 < 0.0 { Verdict::StrictlyStable } else { Verdict::Unstable };
            verdicts_ok &= verdict == expected;
        }
    }
    let concave = segment_min_eig(1.0, -1.0, -1.0, 65)?;
    let convex = segment_min_eig(1.0, 1.0, 1.0, 65)?;
    outcome(
        worst <= 1e-12 && verdicts_ok && concave > 0.0 && convex < 0.0,
        format!(
            "max |∂²F[1] + H1 + H2| = {worst:.1e} ≤ 1e-12; verdicts match: {verdicts_ok}; min_eig(-1,-1) = {concave:.4}, min_eig(1,1) = {convex:.4}"
        ),
    )
}

fn operator_properties() -> Result<Outcome> {
    let n = 48;
    let curved = GraphCurve::from_profile(&PeriodicProfile::single(1, 0.06, 0.03), 1.0, n)?;
    let configs: Vec<(&str, TOperator)> = vec![
        ("flat a=1 b=1", flat_operator(1.0, 1.0, n, Restriction::MeanZero)?),
        ("flat a=0.6 b=1.5", flat_operator(0.6, 1.5, n, Restriction::EndpointZero)?),
        (
            "bent a=1 b=1",
            TOperator::strip(
                &StripDomain::opposing_ramps(1.0, 1.0)?,
                &curved,
                Grid::new(n, n)?,
                Restriction::None,
                solver(),
            )?,
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let (mut sym, mut psd, mut routes) = (0.0_f64, f64::INFINITY, 0.0_f64);
    for (_, op) in &configs {
        for _ in 0..20 {
            let mut draw = || -> Vec<f64> {
                let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                op.gram().project(&raw)
            };
            let (phi, psi) = (draw(), draw());
            let tpp = op.operator_form(&phi, &psi)?;
            let tqp = op.operator_form(&psi, &phi)?;
            let scale = (op.gram().norm_sq(&phi) * op.gram().norm_sq(&psi)).sqrt();
            sym = sym.max((tpp - tqp).abs() / scale);
            psd = psd.min(op.operator_form(&phi, &phi)? / op.gram().norm_sq(&phi));
            let sv = second_variation_value(op, &phi)?;
            routes = routes.max(sv.discrepancy() / sv.direct.abs().max(op.gram().norm_sq(&phi)));
        }
    }
    let names: Vec<&str> = configs.iter().map(|c| c.0).collect();
    outcome(
        sym <= 1e-8 && psd >= -1e-12 && routes <= 1e-6,
        format!(
            "{names:?}: max asymmetry {sym:.1e} ≤ 1e-8, min (Tφ,φ)~/‖φ‖²~ = {psd:.3e} ≥ 0, two-route rel diff {routes:.1e} ≤ 1e-6"
        ),
    )
}

fn duality() -> Result<Outcome> {
    let settings = EigenSettings {
        tolerance: 1e-9,
        max_iterations: 2000,
        ..EigenSettings::default()
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for b in [1.2, 1.45, 1.7, 2.0] {
        let op = flat_operator(1.0, b, 64, Restriction::MeanZero)?;
        let l = lambda1(&op, &settings)?.value;
        let m = mu(&op, &settings)?.value;
        ok &= (l - 1.0).signum() == -(m - 1.0).signum() && (l - 1.0).abs() > 1e-6;
        parts.push(format!("b={b}: λ₁={l:.4} μ={m:.4}"));
    }
    outcome(ok, format!("sign(λ₁-1) = -sign(μ-1) with a=1; {}", parts.join(", ")))
}

fn solver_convergence() -> Result<Outcome> {
    let (a, b) = (1.0, 1.0);
    let k = 2.0 * PI / b;
    let data_domain = StripDomain::new(
        a,
        b,
        BoundaryData {
            slope: 0.0,
            correction: PeriodicProfile::single(1, 1.0, 0.0),
        },
        BoundaryData::default(),
    )?;
    let ramps = StripDomain::opposing_ramps(a, b)?;
    let state_exact = move |side: Side, x: f64, y: f64| match side {
        Side::Upper => (k * x).cos() * (k * y).cosh() / (k * a).cosh(),
        Side::Lower => 0.0,
    };
    let (mut state_err, mut jump_err) = (Vec::new(), Vec::new());
    for n in [32, 64, 128] {
        let curve = GraphCurve::flat(b, n)?;
        let grid = Grid::new(n, n)?;
        let (u, _) = solve_state(&data_domain, &curve, grid, &solver())?;
        state_err.push(l2_distance(&u, state_exact));
        let system = SlitSystem::new(&ramps, &curve, grid)?;
        let (w, _) = system.solve_state(&ramps, &solver())?;
        let phi = mode_samples(2, ModePhase::Cos, 1.0, b, n);
        let (v, _) = system.solve_jump(&JumpCoupling::from_state(&w), &phi, &solver())?;
        jump_err.push(l2_distance(&v, |_, x, y| {
            (k * x).sin() * (k * (a - y.abs())).sinh() / (k * a).cosh()
        }));
    }
    let orders = |e: &[f64]| -> Vec<f64> { e.windows(2).map(|w| (w[0] / w[1]).log2()).collect() };
    let (os, oj) = (orders(&state_err), orders(&jump_err));
    let min = os.iter().chain(&oj).cloned().fold(f64::INFINITY, f64::min);
    outcome(
        min >= 1.8,
        format!("L² orders state {os:.3?}, jump source {oj:.3?} (min {min:.3} ≥ 1.8)"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<Outcome>); 9] = [
        ("strip eigenvalue reproduction", strip_eigenvalues),
        ("stability classification", classification_lattice),
        ("mode law", mode_law),
        ("variation consistency", variation_consistency),
        ("translation invariance", translation_invariance),
        ("segment example", segment_example),
        ("operator properties", operator_properties),
        ("duality sign property", duality),
        ("solver convergence", solver_convergence),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let (passed, detail) = match run() {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        println!(
            "criterion {} {name}: {} ({:.1}s) {detail}",
            i + 1,
            if passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
