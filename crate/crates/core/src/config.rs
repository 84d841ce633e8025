//! Experiment configuration: a small INI dialect.
//!
//! ```text
//! # comment            (also ';', and trailing after a value)
//! n = 2                top-level keys come before any section
//! [section]
//! key = value
//! ```
//!
//! Keys are case-sensitive, each may appear once, and unknown keys are errors.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::geometry::{mean_curvatures, ProfileDerivatives, RadialProfile};

pub const MIN_POINTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialKind {
    Sphere,
    Bump,
    TauFamily,
}

impl InitialKind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "sphere" => Some(Self::Sphere),
            "bump" => Some(Self::Bump),
            "tau_family" => Some(Self::TauFamily),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub points: usize,
    pub kind: InitialKind,
    pub r0: f64,
    pub amplitude: f64,
    pub tau: f64,
    pub t_end: f64,
    pub cfl_safety: f64,
    pub dt_max: f64,
    pub out_dir: PathBuf,
    pub snapshot_every: f64,
    pub diagnostics_every: f64,
    pub ambient_samples: usize,
    pub limit_tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 2,
            points: 256,
            kind: InitialKind::Sphere,
            r0: 1.0,
            amplitude: 0.0,
            tau: 4.0,
            t_end: 40.0,
            cfl_safety: 0.4,
            dt_max: 0.01,
            out_dir: PathBuf::from("out"),
            snapshot_every: 10.0,
            diagnostics_every: 0.5,
            ambient_samples: 1000,
            limit_tol: 1e-6,
        }
    }
}

/// Every accepted key, as `section.key` (top-level keys have no section).
pub const KEYS: &[&str] = &[
    "n",
    "grid.points",
    "initial.kind",
    "initial.r0",
    "initial.amplitude",
    "initial.tau",
    "time.t_end",
    "time.cfl_safety",
    "time.dt_max",
    "output.dir",
    "output.snapshot_every",
    "output.diagnostics_every",
    "verify.ambient_samples",
    "limit.tol",
];

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

fn strip_comment(line: &str) -> &str {
    let cut = line.find(['#', ';']).unwrap_or(line.len());
    line[..cut].trim()
}

fn entries(text: &str) -> Result<Vec<Entry>> {
    let mut section: Option<String> = None;
    let mut out: Vec<Entry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = strip_comment(raw);
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| err(line, format!("malformed section header `{body}`")))?.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(err(line, format!("invalid section name `{name}`")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (k, v) = body.split_once('=').ok_or_else(|| err(line, format!("expected `key = value`, got `{body}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(err(line, "empty key or value"));
        }
        let key = match &section {
            Some(s) => format!("{s}.{k}"),
            None => k.to_string(),
        };
        if !KEYS.contains(&key.as_str()) {
            return Err(err(line, format!("unknown key `{key}`")));
        }
        if let Some(prev) = out.iter().find(|e| e.key == key) {
            return Err(err(line, format!("duplicate key `{key}` (first set on line {})", prev.line)));
        }
        out.push(Entry { key, value: v.to_string(), line });
    }
    Ok(out)
}

fn real(e: &Entry) -> Result<f64> {
    e.value
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| err(e.line, format!("`{}` expects a real number, got `{}`", e.key, e.value)))
}

fn integer(e: &Entry) -> Result<usize> {
    e.value.parse::<usize>().map_err(|_| err(e.line, format!("`{}` expects a non-negative integer, got `{}`", e.key, e.value)))
}

fn build(entries: &[Entry]) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if !entries.iter().any(|e| e.key == "n") {
        return Err(err(0, "missing top-level key `n`"));
    }
    let line_of = |key: &str| entries.iter().find(|e| e.key == key).map_or(0, |e| e.line);
    for e in entries {
        match e.key.as_str() {
            "n" => cfg.n = integer(e)?,
            "grid.points" => cfg.points = integer(e)?,
            "initial.kind" => {
                cfg.kind = InitialKind::parse(&e.value)
                    .ok_or_else(|| err(e.line, format!("initial.kind must be sphere, bump or tau_family, got `{}`", e.value)))?
            }
            "initial.r0" => cfg.r0 = real(e)?,
            "initial.amplitude" => cfg.amplitude = real(e)?,
            "initial.tau" => cfg.tau = real(e)?,
            "time.t_end" => cfg.t_end = real(e)?,
            "time.cfl_safety" => cfg.cfl_safety = real(e)?,
            "time.dt_max" => cfg.dt_max = real(e)?,
            "output.dir" => cfg.out_dir = PathBuf::from(&e.value),
            "output.snapshot_every" => cfg.snapshot_every = real(e)?,
            "output.diagnostics_every" => cfg.diagnostics_every = real(e)?,
            "verify.ambient_samples" => cfg.ambient_samples = integer(e)?,
            "limit.tol" => cfg.limit_tol = real(e)?,
            other => unreachable!("key {other} passed the whitelist"),
        }
    }
    let check = |ok: bool, key: &str, msg: &str| if ok { Ok(()) } else { Err(err(line_of(key), msg.to_string())) };
    check(cfg.n >= 2, "n", "n must be at least 2")?;
    check(cfg.points >= MIN_POINTS, "grid.points", &format!("grid.points must be at least {MIN_POINTS}"))?;
    check(cfg.r0 > 0.0, "initial.r0", "initial.r0 must be positive")?;
    check(cfg.tau > 0.0, "initial.tau", "initial.tau must be positive")?;
    check(cfg.amplitude >= 0.0, "initial.amplitude", "initial.amplitude must be non-negative")?;
    check(cfg.t_end > 0.0, "time.t_end", "time.t_end must be positive")?;
    check(cfg.cfl_safety > 0.0 && cfg.cfl_safety <= 1.0, "time.cfl_safety", "time.cfl_safety must lie in (0, 1]")?;
    check(cfg.dt_max > 0.0, "time.dt_max", "time.dt_max must be positive")?;
    check(cfg.snapshot_every > 0.0, "output.snapshot_every", "output.snapshot_every must be positive")?;
    check(cfg.diagnostics_every > 0.0, "output.diagnostics_every", "output.diagnostics_every must be positive")?;
    check(cfg.limit_tol > 0.0, "limit.tol", "limit.tol must be positive")?;
    let base_key = if cfg.kind == InitialKind::TauFamily { "initial.tau" } else { "initial.r0" };
    check(cfg.amplitude < cfg.base_radius(), "initial.amplitude", &format!("initial.amplitude must be below {base_key}"))?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// Radius the initial profile oscillates around: τ for the τ-family, r0 otherwise.
    pub fn base_radius(&self) -> f64 {
        match self.kind {
            InitialKind::TauFamily => self.tau,
            _ => self.r0,
        }
    }

    pub fn initial_profile(&self) -> Result<RadialProfile> {
        match self.kind {
            InitialKind::Sphere => RadialProfile::constant(self.n, self.points, self.r0),
            InitialKind::Bump | InitialKind::TauFamily => {
                RadialProfile::bump(self.n, self.points, self.base_radius(), self.amplitude)
            }
        }
    }

    /// Initial profile, refused unless it is mean convex at every node.
    pub fn checked_initial_profile(&self) -> Result<RadialProfile> {
        let profile = self.initial_profile()?;
        let h = mean_curvatures(&profile, &ProfileDerivatives::compute(&profile));
        let thetas: Vec<f64> = (0..h.len()).filter(|&k| !(h[k] > 0.0)).map(|k| profile.theta()[k]).collect();
        if !thetas.is_empty() {
            let min_h = h.iter().copied().fold(f64::INFINITY, f64::min);
            return Err(Error::NotMeanConvex { thetas, min_h });
        }
        Ok(profile)
    }
}

/// Parses and validates a configuration, including the mean-convexity precheck.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_with(text, &[])
}

/// As [`parse_config`], with `section.key = value` overrides replacing (or adding) entries.
pub fn parse_config_with(text: &str, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let cfg = parse_config_unchecked(text, overrides)?;
    cfg.checked_initial_profile()?;
    Ok(cfg)
}

/// Full key for `key`, which may also be an unambiguous last component (`tau` for `initial.tau`).
pub fn resolve_key(key: &str) -> Result<String> {
    if KEYS.contains(&key) {
        return Ok(key.to_string());
    }
    let matches: Vec<&&str> = KEYS.iter().filter(|k| k.rsplit('.').next() == Some(key)).collect();
    match matches.as_slice() {
        [one] => Ok(one.to_string()),
        [] => Err(err(0, format!("unknown override key `{key}`"))),
        _ => Err(err(0, format!("ambiguous override key `{key}`"))),
    }
}

/// Parsing and validation without the mean-convexity precheck.
pub fn parse_config_unchecked(text: &str, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let mut list = entries(text)?;
    for (key, value) in overrides {
        let key = &resolve_key(key)?;
        match list.iter_mut().find(|e| &e.key == key) {
            Some(e) => e.value = value.clone(),
            None => list.push(Entry { key: key.clone(), value: value.clone(), line: 0 }),
        }
    }
    build(&list)
}
