//! Experiment configuration, the level sweep and its CSV/SVG output.
//!
//! Configs are JSON:
//!
//! ```json
//! {
//!   "system": { "K": 100, "N": 100, "M": 5, "L": 20, "mu": "linear", "rho": 65 },
//!   "sweep":  { "L_min": 2, "L_max": 20 },
//!   "solver": { "seed": 0, "tol": 1e-10, "grid_step": "1/100" },
//!   "output": { "csv": "fig2.csv", "svg": "fig2.svg", "oracle": true }
//! }
//! ```
//!
//! Only `K`, `N` and `M` are required. Numbers may be written as JSON numbers
//! or as strings such as `"28/3"`; decimals are read exactly. `mu` is a list
//! (its first `L` entries are used), `"linear"` for `μ_ℓ = ℓ`, or one number
//! for a constant cost.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::{self, Deserializer};
use serde::Deserialize;
use thiserror::Error;

use crate::cost::baseline_cost;
use crate::optimizer::{
    brute_force_oracle, greedy_search, CandidateMode, OptimizationResult, SolverSettings,
};
use crate::scalar::{parse_rational, Rational, Scalar};
use crate::system::{ConfigError, SystemConfig};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("config error at `{path}` (line {line}, column {column}): {message}")]
    Schema {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    System(#[from] ConfigError),
    #[error("invalid sweep range [{lo}, {hi}] for K={k}")]
    Sweep { lo: usize, hi: usize, k: usize },
    #[error("mu lists {given} costs but L={level} needs {level}")]
    MuTooShort { given: usize, level: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// A rational read from a JSON number or string.
#[derive(Debug, Clone, PartialEq)]
pub struct Exact(pub Rational);

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(serde_json::Number),
            Text(String),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Number(n) => n.to_string(),
            Raw::Text(s) => s,
        };
        parse_rational(&text)
            .map(Exact)
            .ok_or_else(|| de::Error::custom(format!("`{text}` is not a number or fraction")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MuSpec {
    /// `μ_ℓ = ℓ`.
    Linear,
    Constant(Rational),
    List(Vec<Rational>),
}

impl<'de> Deserialize<'de> for MuSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            List(Vec<Exact>),
            Word(String),
            Number(serde_json::Number),
        }
        match Raw::deserialize(d)? {
            Raw::List(v) => Ok(MuSpec::List(v.into_iter().map(|x| x.0).collect())),
            Raw::Word(w) if w == "linear" => Ok(MuSpec::Linear),
            Raw::Word(w) => parse_rational(&w)
                .map(MuSpec::Constant)
                .ok_or_else(|| de::Error::custom(format!("mu must be a list, \"linear\" or a number, found `{w}`"))),
            Raw::Number(n) => parse_rational(&n.to_string())
                .map(MuSpec::Constant)
                .ok_or_else(|| de::Error::custom("invalid mu")),
        }
    }
}

impl MuSpec {
    pub fn costs(&self, level: usize) -> Result<Vec<Rational>, ExperimentError> {
        match self {
            MuSpec::Linear => Ok((1..=level).map(Rational::from_count).collect()),
            MuSpec::Constant(c) => Ok(vec![c.clone(); level]),
            MuSpec::List(v) if v.len() >= level => Ok(v[..level].to_vec()),
            MuSpec::List(v) => Err(ExperimentError::MuTooShort {
                given: v.len(),
                level,
            }),
        }
    }
}

fn default_level() -> usize {
    2
}

fn default_mu() -> MuSpec {
    MuSpec::Linear
}

fn default_rho() -> Exact {
    Exact(Rational::from_int(1))
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: Exact,
    #[serde(rename = "L", default = "default_level")]
    pub level: usize,
    #[serde(default = "default_mu")]
    pub mu: MuSpec,
    #[serde(default = "default_rho")]
    pub rho: Exact,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(rename = "L_min")]
    pub l_min: Option<usize>,
    #[serde(rename = "L_max")]
    pub l_max: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub budget_b: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub max_outer: Option<usize>,
    pub seed: Option<u64>,
    pub grid_step: Option<Exact>,
    pub candidate_mode: Option<String>,
    pub max_grid_points: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub oracle: bool,
    pub trace: bool,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
    /// Demand vector for simulation; worst case when absent.
    #[serde(default)]
    pub demands: Option<Vec<usize>>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let mut de = serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            ExperimentError::Schema {
                path,
                line: inner.line(),
                column: inner.column(),
                message: strip_position(&inner.to_string()),
            }
        })?;
        if let Some(mode) = &cfg.solver.candidate_mode {
            if mode != "nearest" && mode != "random" {
                return Err(ExperimentError::Schema {
                    path: "solver.candidate_mode".into(),
                    line: 0,
                    column: 0,
                    message: format!("expected \"nearest\" or \"random\", found `{mode}`"),
                });
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// The exact system at access level `level`.
    pub fn system(&self, level: usize) -> Result<SystemConfig<Rational>, ExperimentError> {
        let s = &self.system;
        Ok(SystemConfig::new(
            s.k,
            level,
            s.n,
            s.m.0.clone(),
            s.mu.costs(level)?,
            s.rho.0.clone(),
        )?)
    }

    /// The exact system at the configured `L`.
    pub fn base_system(&self) -> Result<SystemConfig<Rational>, ExperimentError> {
        self.system(self.system.level)
    }

    pub fn solver_settings(&self) -> SolverSettings {
        let s = &self.solver;
        let d = SolverSettings::default();
        SolverSettings {
            budget_b: s.budget_b.or(d.budget_b),
            tol: s.tol.unwrap_or(d.tol),
            max_iter: s.max_iter.unwrap_or(d.max_iter),
            max_outer: s.max_outer.unwrap_or(d.max_outer),
            seed: s.seed.unwrap_or(d.seed),
            grid_step: s.grid_step.as_ref().map(|x| x.0.clone()).or(d.grid_step),
            candidate_mode: match s.candidate_mode.as_deref() {
                Some("random") => CandidateMode::Random,
                _ => CandidateMode::Nearest,
            },
            max_grid_points: s.max_grid_points.unwrap_or(d.max_grid_points),
        }
    }

    /// Levels to sweep: `[L_min, L_max]`, defaulting to `[2, L]`.
    pub fn sweep_levels(&self) -> Result<Vec<usize>, ExperimentError> {
        let lo = self.sweep.l_min.unwrap_or(2);
        let hi = self.sweep.l_max.unwrap_or(self.system.level);
        if lo < 2 || lo > hi || hi > self.system.k {
            return Err(ExperimentError::Sweep {
                lo,
                hi,
                k: self.system.k,
            });
        }
        Ok((lo..=hi).collect())
    }
}

fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(pos) => message[..pos].to_string(),
        None => message.to_string(),
    }
}

/// One level of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub level: usize,
    pub baseline: Option<f64>,
    pub superposition: Option<f64>,
    pub i_star: Option<usize>,
    pub j_star: Option<usize>,
    pub gamma_i: Option<f64>,
    pub gamma_j: Option<f64>,
    pub alpha_i: Option<f64>,
    pub alpha_j: Option<f64>,
    pub oracle: Option<f64>,
    /// `(baseline − superposition)/baseline`.
    pub gap: Option<f64>,
    pub error: Option<String>,
    /// Full optimizer output, kept for callers that post-process rows.
    pub result: Option<OptimizationResult<f64>>,
}

impl SweepRow {
    fn empty(level: usize) -> Self {
        Self {
            level,
            baseline: None,
            superposition: None,
            i_star: None,
            j_star: None,
            gamma_i: None,
            gamma_j: None,
            alpha_i: None,
            alpha_j: None,
            oracle: None,
            gap: None,
            error: None,
            result: None,
        }
    }
}

fn sweep_row(cfg: &ExperimentConfig, level: usize, with_oracle: bool) -> SweepRow {
    let mut row = SweepRow::empty(level);
    let mut errors = Vec::new();
    let exact = match cfg.system(level) {
        Ok(s) => s,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let float: SystemConfig<f64> = exact.cast();
    match baseline_cost(&exact) {
        Ok(b) => row.baseline = Some(b.to_f64_lossy()),
        Err(e) => errors.push(format!("baseline: {e}")),
    }
    let settings = cfg.solver_settings();
    match greedy_search(&float, &settings) {
        Ok(r) => {
            row.superposition = Some(r.objective);
            row.i_star = Some(r.i_star);
            row.j_star = Some(r.j_star);
            row.gamma_i = Some(r.gamma_star.0);
            row.gamma_j = Some(r.gamma_star.1);
            row.alpha_i = Some(r.alpha_star.0);
            row.alpha_j = Some(r.alpha_star.1);
            if let Some(b) = row.baseline {
                row.gap = Some((b - r.objective) / b);
                if r.objective > b + 1e-9 {
                    errors.push(format!("superposition {} exceeds baseline {b}", r.objective));
                }
            }
            row.result = Some(r);
        }
        Err(e) => errors.push(format!("optimizer: {e}")),
    }
    if with_oracle {
        match brute_force_oracle(&float, &settings) {
            Ok(o) => row.oracle = Some(o.objective),
            Err(e) => errors.push(format!("oracle: {e}")),
        }
    }
    if !errors.is_empty() {
        row.error = Some(errors.join("; "));
    }
    row
}

/// Runs every level of the sweep in parallel; rows come back ordered by `L`.
pub fn sweep(cfg: &ExperimentConfig, with_oracle: bool) -> Result<Vec<SweepRow>, ExperimentError> {
    let levels = cfg.sweep_levels()?;
    Ok(levels
        .par_iter()
        .map(|&l| sweep_row(cfg, l, with_oracle))
        .collect())
}

pub const CSV_HEADER: [&str; 12] = [
    "L",
    "baseline",
    "superposition",
    "i",
    "j",
    "gamma_i",
    "gamma_j",
    "alpha_i",
    "alpha_j",
    "oracle",
    "gap",
    "error",
];

/// `x` with 12 significant digits, in fixed or scientific notation.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if (-5..15).contains(&magnitude) {
        let decimals = (11 - magnitude).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // -0.000… after rounding
        if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
            return "0".into();
        }
        s
    } else {
        format!("{x:.11e}")
    }
}

fn opt_f(x: Option<f64>) -> String {
    x.map(format_sig).unwrap_or_default()
}

fn opt_u(x: Option<usize>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_csv<W: io::Write>(rows: &[SweepRow], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.level.to_string(),
            opt_f(r.baseline),
            opt_f(r.superposition),
            opt_u(r.i_star),
            opt_u(r.j_star),
            opt_f(r.gamma_i),
            opt_f(r.gamma_j),
            opt_f(r.alpha_i),
            opt_f(r.alpha_j),
            opt_f(r.oracle),
            opt_f(r.gap),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| ExperimentError::Csv(e.into()))?;
    Ok(())
}

pub fn csv_string(rows: &[SweepRow]) -> Result<String, ExperimentError> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

/// Line plot of baseline and superposition cost against `L`.
pub fn render_svg(rows: &[SweepRow]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 20.0;
    const BOTTOM: f64 = 50.0;
    let series: [(&str, &str, Vec<(f64, f64)>); 2] = [
        (
            "baseline",
            "#1f77b4",
            rows.iter()
                .filter_map(|r| r.baseline.map(|v| (r.level as f64, v)))
                .collect(),
        ),
        (
            "superposition",
            "#d62728",
            rows.iter()
                .filter_map(|r| r.superposition.map(|v| (r.level as f64, v)))
                .collect(),
        ),
    ];
    let all = series.iter().flat_map(|s| s.2.iter().copied());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    let pad = ((y1 - y0) * 0.05).max(1e-9);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let py = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let (ax0, ax1, ay0, ay1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(
        s,
        r#"<path d="M{ax0},{ay0} L{ax0},{ay1} L{ax1},{ay1}" fill="none" stroke="black"/>"#
    );
    for r in rows {
        let x = px(r.level as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{ay1}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            ay1 + 4.0,
            ay1 + 18.0,
            r.level
        );
    }
    for k in 0..=4 {
        let v = y0 + (y1 - y0) * k as f64 / 4.0;
        let y = py(v);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{ax0}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#,
            ax0 - 4.0,
            ax0 - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">L</text>"#,
        (ax0 + ax1) / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">cost</text>"#,
        (ay0 + ay1) / 2.0,
        (ay0 + ay1) / 2.0
    );
    for (n, (name, color, pts)) in series.iter().enumerate() {
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        );
        let ly = ay0 + 10.0 + 18.0 * n as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{name}</text>"#,
            ax1 - 150.0,
            ax1 - 120.0,
            ax1 - 114.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}
