//! Run configuration: flat `section.key = value` text or the equivalent JSON.
//!
//! ```text
//! # GBM example
//! model.kind = gbm
//! model.alpha = 0.05
//! model.beta = 0.25
//! economics.r = 0.1
//! economics.lambda = 1
//! economics.p = 0.5
//! economics.K = 1
//! economics.C = 1
//! payoff.kind = power
//! payoff.theta = 0.5
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use entrysolve_core::{DiffusionSpec, Formulation, Payoff, ProblemParams, StartState};
use serde_json::Value;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigFormat {
    KeyValue,
    Json,
}

impl ConfigFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => ConfigFormat::Json,
            _ => ConfigFormat::KeyValue,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("expected csv or json, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Gbm,
    Logistic,
    /// Logistic-family coefficients run through the numeric (Riccati) basis.
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EconomicsConfig {
    pub r: f64,
    pub lambda: f64,
    pub p: f64,
    pub k: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PayoffConfig {
    Power { theta: f64 },
    Affine { slope: f64 },
    Saturating { cap: f64, scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormulationChoice {
    Full,
    Thinned,
    Both,
}

impl FormulationChoice {
    pub fn formulations(self) -> Vec<Formulation> {
        match self {
            FormulationChoice::Full => vec![Formulation::Full],
            FormulationChoice::Thinned => vec![Formulation::Thinned],
            FormulationChoice::Both => vec![Formulation::Full, Formulation::Thinned],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSection {
    pub x0: f64,
    pub start: StartState,
    pub formulation: FormulationChoice,
    pub paths: usize,
    pub seed: u64,
    pub dt: f64,
    pub horizon: f64,
    pub discount_floor: f64,
    pub multipliers: Option<Vec<f64>>,
    /// Base threshold; defaults to the solved `x*`.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputConfig {
    pub path: Option<String>,
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub economics: EconomicsConfig,
    pub payoff: PayoffConfig,
    pub sim: Option<SimSection>,
    pub output: OutputConfig,
}

/// Raw entries with consumption tracking, so leftovers can be reported.
struct Entries {
    values: BTreeMap<String, String>,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<String> {
        self.values.remove(key)
    }

    fn require(&mut self, key: &str) -> CliResult<String> {
        self.take(key).ok_or_else(|| CliError::config(key, "missing required key"))
    }

    fn parsed<T: FromStr>(&mut self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| CliError::config(key, format!("cannot parse {raw:?}: {e}"))),
        }
    }

    fn required<T: FromStr>(&mut self, key: &str) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        self.parsed(key)?.ok_or_else(|| CliError::config(key, "missing required key"))
    }

    fn has_section(&self, section: &str) -> bool {
        let prefix = format!("{section}.");
        self.values.keys().any(|k| k.starts_with(&prefix))
    }

    fn reject_section_rest(&self, section: &str, why: &str) -> CliResult<()> {
        let prefix = format!("{section}.");
        match self.values.keys().find(|k| k.starts_with(&prefix)) {
            Some(k) => Err(CliError::config(k.clone(), why)),
            None => Ok(()),
        }
    }
}

/// Parses `a.b = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse_key_value(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = match line.find('#') {
            Some(i) => &line[..i],
            None => line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::config(format!("line {}", n + 1), format!("expected key = value, got {line:?}")));
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(CliError::config(format!("line {}", n + 1), "empty key"));
        }
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(CliError::config(key, "duplicate key"));
        }
    }
    Ok(out)
}

/// Flattens a JSON object into dotted keys. Arrays become comma-separated lists.
pub fn parse_json(text: &str) -> CliResult<BTreeMap<String, String>> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| CliError::config("<json>", e.to_string()))?;
    let Value::Object(_) = root else {
        return Err(CliError::config("<json>", "top level must be an object"));
    };
    let mut out = BTreeMap::new();
    flatten(&root, "", &mut out)?;
    Ok(out)
}

fn scalar(key: &str, v: &Value) -> CliResult<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        _ => Err(CliError::config(key, "expected a string, number or boolean")),
    }
}

fn flatten(v: &Value, prefix: &str, out: &mut BTreeMap<String, String>) -> CliResult<()> {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(child, &key, out)?;
            }
        }
        Value::Null => {}
        Value::Array(items) => {
            let parts = items.iter().map(|i| scalar(prefix, i)).collect::<CliResult<Vec<_>>>()?;
            insert_unique(out, prefix, parts.join(","))?;
        }
        other => insert_unique(out, prefix, scalar(prefix, other)?)?,
    }
    Ok(())
}

fn insert_unique(out: &mut BTreeMap<String, String>, key: &str, value: String) -> CliResult<()> {
    if out.insert(key.to_string(), value).is_some() {
        return Err(CliError::config(key, "duplicate key"));
    }
    Ok(())
}

/// Comma-separated list of reals.
pub fn parse_list(key: &str, raw: &str) -> CliResult<Vec<f64>> {
    let items = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| CliError::config(key, format!("cannot parse {s:?}: {e}"))))
        .collect::<CliResult<Vec<_>>>()?;
    if items.is_empty() {
        return Err(CliError::config(key, "empty list"));
    }
    Ok(items)
}

pub fn load(path: &Path, format: Option<ConfigFormat>) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("--config", format!("cannot read {}: {e}", path.display())))?;
    let entries = match format.unwrap_or_else(|| ConfigFormat::from_path(path)) {
        ConfigFormat::KeyValue => parse_key_value(&text)?,
        ConfigFormat::Json => parse_json(&text)?,
    };
    RunConfig::from_entries(entries)
}

impl RunConfig {
    pub fn from_entries(values: BTreeMap<String, String>) -> CliResult<Self> {
        let mut e = Entries { values };
        let model = parse_model(&mut e)?;
        let economics = EconomicsConfig {
            r: e.required("economics.r")?,
            lambda: e.required("economics.lambda")?,
            p: e.required("economics.p")?,
            k: e.required("economics.K")?,
            c: e.required("economics.C")?,
        };
        let payoff = parse_payoff(&mut e)?;
        let sim = if e.has_section("sim") { Some(parse_sim(&mut e)?) } else { None };
        let output = OutputConfig {
            path: e.take("output.path"),
            format: e.parsed("output.format")?,
        };
        if let Some(key) = e.values.keys().next() {
            return Err(CliError::config(key.clone(), "unknown key"));
        }
        Ok(Self { model, economics, payoff, sim, output })
    }

    pub fn diffusion(&self) -> CliResult<DiffusionSpec> {
        let m = &self.model;
        let built = match m.kind {
            ModelKind::Gbm => DiffusionSpec::gbm(m.alpha, m.beta),
            ModelKind::Logistic => DiffusionSpec::logistic(m.alpha, m.beta, m.gamma),
            ModelKind::Custom => {
                // same admissibility rules as the named models
                DiffusionSpec::logistic(m.alpha, m.beta, m.gamma)?;
                let (alpha, beta, gamma) = (m.alpha, m.beta, m.gamma);
                DiffusionSpec::custom(move |x| alpha * x * (1.0 - gamma * x), move |x| beta * x)
            }
        };
        built.map_err(|err| attribute(err, "model", &["alpha", "beta", "gamma"]))
    }

    pub fn payoff(&self) -> CliResult<Payoff> {
        let built = match self.payoff {
            PayoffConfig::Power { theta } => Payoff::power(theta),
            PayoffConfig::Affine { slope } => Payoff::affine(slope),
            PayoffConfig::Saturating { cap, scale } => Payoff::saturating(cap, scale),
        };
        built.map_err(|err| attribute(err, "payoff", &["theta", "slope", "cap", "scale"]))
    }

    pub fn params(&self) -> CliResult<ProblemParams> {
        let e = &self.economics;
        ProblemParams::new(e.r, e.lambda, e.p, e.k, e.c, self.payoff()?)
            .map_err(|err| attribute(err, "economics", &["r", "lambda", "p", "K", "C"]))
    }

    pub fn sim(&self) -> CliResult<&SimSection> {
        self.sim.as_ref().ok_or_else(|| CliError::config("sim", "missing sim section"))
    }
}

/// Turns a validation error into a config error naming the keys its message mentions.
pub(crate) fn attribute(err: entrysolve_core::Error, section: &str, fields: &[&str]) -> CliError {
    let message = err.to_string();
    let named: Vec<String> = fields
        .iter()
        .filter(|f| {
            message
                .split(|c: char| !c.is_alphanumeric() && c != '_')
                .any(|word| word == **f)
        })
        .map(|f| format!("{section}.{f}"))
        .collect();
    let key = if named.is_empty() { section.to_string() } else { named.join(", ") };
    CliError::config(key, message)
}

fn parse_model(e: &mut Entries) -> CliResult<ModelConfig> {
    let kind = match e.require("model.kind")?.as_str() {
        "gbm" => ModelKind::Gbm,
        "logistic" => ModelKind::Logistic,
        "custom" => ModelKind::Custom,
        other => {
            return Err(CliError::config("model.kind", format!("expected gbm, logistic or custom, got {other:?}")))
        }
    };
    let alpha = e.required("model.alpha")?;
    let beta = e.required("model.beta")?;
    let gamma = match kind {
        ModelKind::Logistic => e.required("model.gamma")?,
        ModelKind::Custom => e.parsed("model.gamma")?.unwrap_or(0.0),
        ModelKind::Gbm => {
            if e.take("model.gamma").is_some() {
                return Err(CliError::config("model.gamma", "does not apply to model.kind = gbm"));
            }
            0.0
        }
    };
    Ok(ModelConfig { kind, alpha, beta, gamma })
}

fn parse_payoff(e: &mut Entries) -> CliResult<PayoffConfig> {
    let kind = e.require("payoff.kind")?;
    let payoff = match kind.as_str() {
        "power" => PayoffConfig::Power { theta: e.required("payoff.theta")? },
        "affine" => PayoffConfig::Affine { slope: e.required("payoff.slope")? },
        "saturating" => PayoffConfig::Saturating {
            cap: e.required("payoff.cap")?,
            scale: e.required("payoff.scale")?,
        },
        other => {
            return Err(CliError::config(
                "payoff.kind",
                format!("expected power, affine or saturating, got {other:?}"),
            ))
        }
    };
    e.reject_section_rest("payoff", &format!("does not apply to payoff.kind = {kind}"))?;
    Ok(payoff)
}

fn parse_sim(e: &mut Entries) -> CliResult<SimSection> {
    let defaults = entrysolve_core::SimConfig::default();
    let x0: f64 = e.required("sim.x0")?;
    if !(x0 > 0.0) || !x0.is_finite() {
        return Err(CliError::config("sim.x0", format!("must be positive, got {x0}")));
    }
    let start = match e.take("sim.start").as_deref() {
        None | Some("idle") => StartState::Idle,
        Some("active") => StartState::Active,
        Some(other) => return Err(CliError::config("sim.start", format!("expected idle or active, got {other:?}"))),
    };
    let formulation = match e.take("sim.formulation").as_deref() {
        None | Some("both") => FormulationChoice::Both,
        Some("full") => FormulationChoice::Full,
        Some("thinned") => FormulationChoice::Thinned,
        Some(other) => {
            return Err(CliError::config("sim.formulation", format!("expected full, thinned or both, got {other:?}")))
        }
    };
    let multipliers = match e.take("sim.multipliers") {
        Some(raw) => Some(parse_list("sim.multipliers", &raw)?),
        None => None,
    };
    let threshold = e.parsed("sim.threshold")?;
    if let Some(t) = threshold {
        if !(t > 0.0) || !f64::is_finite(t) {
            return Err(CliError::config("sim.threshold", format!("must be positive, got {t}")));
        }
    }
    Ok(SimSection {
        x0,
        start,
        formulation,
        paths: e.parsed("sim.paths")?.unwrap_or(defaults.n_paths),
        seed: e.parsed("sim.seed")?.unwrap_or(defaults.seed),
        dt: e.parsed("sim.dt")?.unwrap_or(defaults.dt),
        horizon: e.parsed("sim.horizon")?.unwrap_or(defaults.horizon),
        discount_floor: e.parsed("sim.discount_floor")?.unwrap_or(defaults.discount_floor),
        multipliers,
        threshold,
    })
}
