//! JSON run configuration. Every section except `geometry` has defaults; unknown keys
//! are rejected everywhere.

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use std::path::{Path, PathBuf};

use ms_stability::elliptic::{Grid, SolverSettings};
use ms_stability::geometry::{BoundaryData, PeriodicProfile, SegmentConfig, StripDomain};
use ms_stability::second_variation::{EigenSettings, Restriction, DEFAULT_BAND};

#[derive(Clone, Debug)]
pub struct Config {
    pub geometry: GeometryConfig,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub eigen: EigenConfig,
    pub validate: ValidateConfig,
    pub output: OutputConfig,
}

/// `geometry` stays raw until its `kind` is known, so errors inside it can be located.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    geometry: serde_json::Map<String, serde_json::Value>,
    #[serde(default)]
    grid: GridConfig,
    #[serde(default)]
    solver: SolverConfig,
    #[serde(default)]
    eigen: EigenConfig,
    #[serde(default)]
    validate: ValidateConfig,
    #[serde(default)]
    output: OutputConfig,
}

#[derive(Clone, Debug)]
pub enum GeometryConfig {
    Strip(StripConfig),
    Segment(SegmentSpec),
}

fn top_ramp() -> BoundaryData {
    BoundaryData::linear(1.0, 1.0)
}

fn bottom_ramp() -> BoundaryData {
    BoundaryData::linear(-1.0, 0.0)
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StripConfig {
    pub a: f64,
    pub b: f64,
    /// Dirichlet data on `y = a`; defaults to `x + 1`.
    #[serde(default = "top_ramp")]
    pub top: BoundaryData,
    /// Dirichlet data on `y = -a`; defaults to `-x`.
    #[serde(default = "bottom_ramp")]
    pub bottom: BoundaryData,
    /// Curve heights; flat by default.
    #[serde(default)]
    pub curve: PeriodicProfile,
    #[serde(default)]
    pub lattice: Option<Lattice>,
}

impl StripConfig {
    pub fn domain(&self) -> ms_stability::Result<StripDomain> {
        StripDomain::new(self.a, self.b, self.top.clone(), self.bottom.clone())
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub length: f64,
    pub h1: f64,
    pub h2: f64,
    #[serde(default = "one")]
    pub jump: f64,
}

impl SegmentSpec {
    pub fn config(&self) -> ms_stability::Result<SegmentConfig> {
        Ok(SegmentConfig::new(self.length, self.h1, self.h2)?.with_jump(self.jump))
    }
}

fn one() -> f64 {
    1.0
}

/// Phase-diagram lattice: rows in `a`, columns in `b`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lattice {
    pub a: Axis,
    pub b: Axis,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Values(Vec<f64>),
    Range { min: f64, max: f64, count: usize },
}

impl Axis {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            Axis::Values(v) => v.clone(),
            Axis::Range { count: 0, .. } => Vec::new(),
            Axis::Range { min, count: 1, .. } => vec![*min],
            Axis::Range { min, max, count } => {
                if max < min {
                    bail!("lattice range has max {max} below min {min}");
                }
                (0..*count)
                    .map(|i| min + (max - min) * i as f64 / (*count - 1) as f64)
                    .collect()
            }
        };
        if let Some(bad) = v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            bail!("lattice values must be positive, got {bad}");
        }
        Ok(v)
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Columns, equal to the number of curve nodes (segment nodes for segments).
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nx: 128, ny: 128 }
    }
}

impl GridConfig {
    pub fn grid(&self) -> ms_stability::Result<Grid> {
        Grid::new(self.nx, self.ny)
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolverSettings::default();
        Self {
            tolerance: s.tolerance,
            max_iterations: s.max_iterations,
        }
    }
}

impl SolverConfig {
    pub fn settings(&self) -> SolverSettings {
        SolverSettings {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Start-vector seed; falls back to `MS_STABILITY_SEED`, then a fixed default.
    pub seed: Option<u64>,
    pub restriction: Restriction,
    pub band: f64,
    /// Also compute the dual value μ.
    pub mu: bool,
}

impl Default for EigenConfig {
    fn default() -> Self {
        let e = EigenSettings::default();
        Self {
            tolerance: e.tolerance,
            max_iterations: e.max_iterations,
            seed: None,
            restriction: Restriction::MeanZero,
            band: DEFAULT_BAND,
            mu: false,
        }
    }
}

impl EigenConfig {
    pub fn settings(&self) -> EigenSettings {
        let base = EigenSettings::default();
        EigenSettings {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            seed: self.seed.unwrap_or(base.seed),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    pub step: f64,
    /// Height increment profile of the vertical flow; `sin(2πx/b)` by default.
    pub direction: PeriodicProfile,
    /// Bound on `|g'(0)| / F`.
    pub first_tolerance: f64,
    /// Bound on the relative mismatch between `g''(0)` and `∂²F`.
    pub second_tolerance: f64,
    /// Mode indices for `compare`.
    pub modes: Vec<u32>,
    pub mode_tolerance: f64,
    /// Smallest acceptable observed convergence order in `compare`.
    pub min_order: f64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            step: 1e-2,
            direction: PeriodicProfile::single(1, 0.0, 1.0),
            first_tolerance: 1e-4,
            second_tolerance: 0.05,
            modes: vec![2, 4, 6],
            mode_tolerance: 0.02,
            min_order: 1.8,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    /// Print a human-readable table on stderr.
    pub table: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { path: None, table: true }
    }
}

fn located<'de, T: Deserialize<'de>, D: serde::Deserializer<'de>>(de: D, prefix: &str) -> Result<T>
where
    D::Error: std::fmt::Display,
{
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = match e.path().to_string().as_str() {
            "." => prefix.trim_end_matches('.').to_string(),
            p => format!("{prefix}{p}"),
        };
        anyhow::anyhow!("invalid config at `{path}`: {}", e.into_inner())
    })
}

pub fn parse(text: &str) -> Result<Config> {
    let raw: RawConfig = located(&mut serde_json::Deserializer::from_str(text), "")?;
    let mut geometry = raw.geometry;
    let kind = geometry
        .remove("kind")
        .ok_or_else(|| anyhow::anyhow!("invalid config at `geometry.kind`: missing (strip or segment)"))?;
    let body = serde_json::Value::Object(geometry);
    let geometry = match kind.as_str() {
        Some("strip") => GeometryConfig::Strip(located(body, "geometry.")?),
        Some("segment") => GeometryConfig::Segment(located(body, "geometry.")?),
        _ => bail!("invalid config at `geometry.kind`: expected \"strip\" or \"segment\", got {kind}"),
    };
    Ok(Config {
        geometry,
        grid: raw.grid,
        solver: raw.solver,
        eigen: raw.eigen,
        validate: raw.validate,
        output: raw.output,
    })
}

pub fn load(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("in {}", path.display()))
}

/// `"NX,NY"` as given to `--grid`.
pub fn parse_grid(s: &str) -> std::result::Result<GridConfig, String> {
    let (nx, ny) = s.split_once(',').ok_or_else(|| format!("expected NX,NY, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    Ok(GridConfig {
        nx: parse(nx)?,
        ny: parse(ny)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_strip_uses_defaults() {
        let c = parse(r#"{"geometry": {"kind": "strip", "a": 1, "b": 1}}"#).unwrap();
        let GeometryConfig::Strip(s) = &c.geometry else { panic!() };
        assert_eq!(s.top, top_ramp());
        assert_eq!(s.curve, PeriodicProfile::default());
        assert_eq!((c.grid.nx, c.grid.ny), (128, 128));
        assert_eq!(c.eigen.restriction, Restriction::MeanZero);
        assert_eq!(c.validate.modes, vec![2, 4, 6]);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = parse(r#"{"geometry": {"kind": "strip", "a": 1, "b": 1}, "solver": {"tol": 1}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("solver") && msg.contains("tol"), "{msg}");
        let err = parse(r#"{"geometry": {"kind": "strip", "a": 1, "b": 1}, "extra": 1}"#).unwrap_err();
        assert!(err.to_string().contains("extra"));
    }

    #[test]
    fn bad_values_are_located() {
        let err = parse(r#"{"geometry": {"kind": "segment", "length": "x", "h1": 0, "h2": 0}}"#).unwrap_err();
        assert!(err.to_string().contains("`geometry.length`"), "{err}");
        let err = parse(r#"{"geometry": {"kind": "strip", "a": 1, "b": 1, "curve": {"terms": [{"k": 1, "cs": 1}]}}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("geometry.curve.terms[0]"), "{err}");
        let err = parse(r#"{"geometry": {"kind": "disk", "r": 1}}"#).unwrap_err();
        assert!(err.to_string().contains("geometry.kind"), "{err}");
    }

    #[test]
    fn lattice_axes() {
        let c = parse(
            r#"{"geometry": {"kind": "strip", "a": 1, "b": 1,
                "lattice": {"a": [0.5, 1.0], "b": {"min": 1, "max": 2, "count": 3}}}}"#,
        )
        .unwrap();
        let GeometryConfig::Strip(s) = &c.geometry else { panic!() };
        let l = s.lattice.as_ref().unwrap();
        assert_eq!(l.a.values().unwrap(), vec![0.5, 1.0]);
        assert_eq!(l.b.values().unwrap(), vec![1.0, 1.5, 2.0]);
        assert!(Axis::Values(vec![-1.0]).values().is_err());
        assert!(Axis::Range { min: 1.0, max: 2.0, count: 0 }.values().unwrap().is_empty());
    }

    #[test]
    fn grid_flag() {
        let g = parse_grid("64,32").unwrap();
        assert_eq!((g.nx, g.ny), (64, 32));
        assert!(parse_grid("64").is_err());
        assert!(parse_grid("a,b").is_err());
    }
}
