//! Experiment configuration: a flat `key = value` file or a JSON object.
//!
//! Unspecified channel constants take the reference values. Lists are comma
//! separated; integer ranges may be written `lo:hi` (inclusive).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::default_grid;
use crate::detectors::DetectorKind;
use crate::error::{Error, Result};
use crate::params::{ChannelParams, REFERENCE_SYMBOL_PERIOD};
use crate::simulation::{Fidelity, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Expected single-release response and one sampled realization.
    Cir,
    /// Analytic and empirical error against the threshold.
    ThresholdSweep,
    /// Error at the analytically optimal threshold against the offset.
    OffsetSweep,
    /// Error at the optimal threshold against samples per bit.
    SamplesSweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Cir => "cir",
            ExperimentKind::ThresholdSweep => "threshold-sweep",
            ExperimentKind::OffsetSweep => "offset-sweep",
            ExperimentKind::SamplesSweep => "samples-sweep",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cir" => Ok(ExperimentKind::Cir),
            "threshold-sweep" => Ok(ExperimentKind::ThresholdSweep),
            "offset-sweep" => Ok(ExperimentKind::OffsetSweep),
            "samples-sweep" => Ok(ExperimentKind::SamplesSweep),
            other => Err(Error::invalid(format!(
                "unknown experiment {other:?}; expected cir, threshold-sweep, offset-sweep or samples-sweep"
            ))),
        }
    }
}

/// A fully validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub channel: ChannelParams,
    pub detectors: Vec<DetectorKind>,
    /// Threshold grid (all sweeps); `None` uses [`default_grid`] per detector.
    pub thresholds: Option<Vec<f64>>,
    /// Offsets in samples (offset-sweep).
    pub offsets: Vec<i64>,
    /// Samples per bit (samples-sweep); Δt = symbol period / M.
    pub samples: Vec<usize>,
    /// Offset used by threshold-sweep.
    pub offset: i64,
    /// Number of random bit sequences.
    pub sequences: usize,
    /// Number of slots emitted by the cir experiment.
    pub cir_samples: usize,
    pub symbol_period: f64,
    pub sim: SimConfig,
    pub output_path: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "experiment",
    "rx_radius",
    "distance",
    "diffusion",
    "sample_period",
    "samples_per_bit",
    "symbol_period",
    "seq_length",
    "molecules_per_one",
    "bit_one_prior",
    "detectors",
    "thresholds",
    "offsets",
    "samples",
    "offset",
    "sequences",
    "cir_samples",
    "fidelity",
    "realizations",
    "rng_seed",
    "particle_substeps",
    "output_path",
];

/// Raw `(key, value, line)` entries before interpretation.
type Entries = Vec<(String, String, usize)>;

fn config_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Config { path: path.to_path_buf(), message: message.into() }
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_config_str(&text, path)
}

/// Parses config text; `origin` is only used in diagnostics.
pub fn parse_config_str(text: &str, origin: &Path) -> Result<ExperimentConfig> {
    let entries = if text.trim_start().starts_with('{') {
        json_entries(text, origin)?
    } else {
        flat_entries(text, origin)?
    };
    build(entries, origin)
}

fn flat_entries(text: &str, origin: &Path) -> Result<Entries> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(config_err(origin, format!("line {line}: expected `key = value`, got {content:?}")));
        };
        out.push((key.trim().to_string(), value.trim().to_string(), line));
    }
    Ok(out)
}

fn json_entries(text: &str, origin: &Path) -> Result<Entries> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| config_err(origin, format!("line {}: invalid JSON: {e}", e.line())))?;
    let serde_json::Value::Object(map) = value else {
        return Err(config_err(origin, "top-level JSON value must be an object"));
    };
    let scalar = |key: &str, v: &serde_json::Value| -> Result<String> {
        match v {
            serde_json::Value::String(s) => Ok(s.clone()),
            serde_json::Value::Number(n) => Ok(n.to_string()),
            serde_json::Value::Bool(b) => Ok(b.to_string()),
            other => Err(config_err(origin, format!("field {key:?}: unsupported value {other}"))),
        }
    };
    map.iter()
        .map(|(key, v)| {
            let text = match v {
                serde_json::Value::Array(items) => {
                    items.iter().map(|i| scalar(key, i)).collect::<Result<Vec<_>>>()?.join(",")
                }
                other => scalar(key, other)?,
            };
            Ok((key.clone(), text, 0))
        })
        .collect()
}

struct Fields<'a> {
    entries: Entries,
    origin: &'a Path,
}

impl Fields<'_> {
    fn where_(&self, key: &str) -> String {
        match self.entries.iter().find(|(k, _, _)| k == key) {
            Some((_, _, line)) if *line > 0 => format!("line {line}, field {key:?}"),
            _ => format!("field {key:?}"),
        }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.iter().rev().find(|(k, _, _)| k == key).map(|(_, v, _)| v.as_str())
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| config_err(self.origin, format!("{}: cannot parse {v:?}: {e}", self.where_(key))))
            })
            .transpose()
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: fmt::Display,
    {
        let Some(v) = self.raw(key) else { return Ok(None) };
        let mut out = Vec::new();
        for item in v.trim_matches(|c| c == '[' || c == ']').split(',') {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            if let Some((lo, hi)) = split_range(item) {
                let parse = |s: &str| {
                    s.trim().parse::<i64>().map_err(|e| {
                        config_err(self.origin, format!("{}: bad range bound {s:?}: {e}", self.where_(key)))
                    })
                };
                let (lo, hi) = (parse(lo)?, parse(hi)?);
                for n in lo..=hi {
                    out.push(n.to_string().parse::<T>().map_err(|e| {
                        config_err(self.origin, format!("{}: bad value {n}: {e}", self.where_(key)))
                    })?);
                }
            } else {
                out.push(item.parse::<T>().map_err(|e| {
                    config_err(self.origin, format!("{}: cannot parse {item:?}: {e}", self.where_(key)))
                })?);
            }
        }
        Ok(Some(out))
    }
}

/// `lo:hi`, allowing a leading minus sign on either bound.
fn split_range(item: &str) -> Option<(&str, &str)> {
    let pos = item.find(':')?;
    Some((&item[..pos], &item[pos + 1..]))
}

fn build(entries: Entries, origin: &Path) -> Result<ExperimentConfig> {
    for (key, _, line) in &entries {
        if !KEYS.contains(&key.as_str()) {
            let at = if *line > 0 { format!("line {line}: ") } else { String::new() };
            return Err(config_err(origin, format!("{at}unknown key {key:?}")));
        }
    }
    let f = Fields { entries, origin };
    let experiment: ExperimentKind = f
        .get("experiment")?
        .ok_or_else(|| config_err(origin, "missing required field \"experiment\""))?;
    let mut cfg = defaults(experiment);
    apply(&mut cfg, &f)?;
    validate(&cfg).map_err(|e| match e {
        Error::InvalidParameter(msg) => config_err(origin, msg),
        other => other,
    })?;
    Ok(cfg)
}

/// Reference configuration for `experiment`.
pub fn defaults(experiment: ExperimentKind) -> ExperimentConfig {
    let channel = match experiment {
        ExperimentKind::Cir => ChannelParams::reference(0.001),
        _ => ChannelParams::reference(0.040),
    };
    ExperimentConfig {
        experiment,
        channel,
        detectors: DetectorKind::ALL.to_vec(),
        thresholds: None,
        offsets: default_offsets(&channel).unwrap_or_default(),
        samples: vec![2, 5, 10, 25, 50],
        offset: 0,
        sequences: 1000,
        cir_samples: 200,
        symbol_period: REFERENCE_SYMBOL_PERIOD,
        sim: SimConfig::default(),
        output_path: None,
    }
}

impl ExperimentConfig {
    /// Threshold grid for `kind` under `params`.
    pub fn grid(&self, kind: DetectorKind, params: &ChannelParams) -> Vec<f64> {
        match &self.thresholds {
            Some(grid) => grid.clone(),
            None => default_grid(kind, params),
        }
    }
}

/// Offset sweeps used for the 8 ms and 40 ms reference grids.
pub fn default_offsets(channel: &ChannelParams) -> Option<Vec<i64>> {
    let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
    if close(channel.sample_period, 0.008) {
        Some((-6..=15).collect())
    } else if close(channel.sample_period, 0.040) {
        Some((-2..=5).collect())
    } else {
        None
    }
}

fn apply(cfg: &mut ExperimentConfig, f: &Fields<'_>) -> Result<()> {
    let ch = &mut cfg.channel;
    if let Some(v) = f.get("rx_radius")? {
        ch.rx_radius = v;
    }
    if let Some(v) = f.get("distance")? {
        ch.distance = v;
    }
    if let Some(v) = f.get("diffusion")? {
        ch.diffusion = v;
    }
    if let Some(v) = f.get("seq_length")? {
        ch.seq_length = v;
    }
    if let Some(v) = f.get("molecules_per_one")? {
        ch.molecules_per_one = v;
    }
    if let Some(v) = f.get("bit_one_prior")? {
        ch.bit_one_prior = v;
    }
    if let Some(v) = f.get("symbol_period")? {
        cfg.symbol_period = v;
    }

    // Δt and M are tied by the symbol period; fill whichever is missing.
    let dt: Option<f64> = f.get("sample_period")?;
    let m: Option<usize> = f.get("samples_per_bit")?;
    match (dt, m) {
        (Some(dt), Some(m)) => {
            ch.sample_period = dt;
            ch.samples_per_bit = m;
        }
        (Some(dt), None) => {
            ch.sample_period = dt;
            ch.samples_per_bit = (cfg.symbol_period / dt).round().max(1.0) as usize;
        }
        (None, Some(m)) => {
            ch.samples_per_bit = m;
            ch.sample_period = cfg.symbol_period / m.max(1) as f64;
        }
        (None, None) if cfg.experiment != ExperimentKind::Cir => {
            ch.samples_per_bit = (cfg.symbol_period / ch.sample_period).round().max(1.0) as usize;
        }
        (None, None) => {}
    }

    if let Some(v) = f.list::<String>("detectors")? {
        cfg.detectors = v.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    }
    if let Some(v) = f.list("thresholds")? {
        cfg.thresholds = Some(v);
    }
    cfg.offsets = match f.list("offsets")? {
        Some(v) => v,
        None => default_offsets(&cfg.channel).unwrap_or_default(),
    };
    if let Some(v) = f.list("samples")? {
        cfg.samples = v;
    }
    if let Some(v) = f.get("offset")? {
        cfg.offset = v;
    }
    if let Some(v) = f.get("sequences")? {
        cfg.sequences = v;
    }
    if let Some(v) = f.get("cir_samples")? {
        cfg.cir_samples = v;
    }
    if let Some(v) = f.get::<String>("fidelity")? {
        cfg.sim.fidelity = v.parse::<Fidelity>()?;
    }
    if let Some(v) = f.get("realizations")? {
        cfg.sim.realizations = v;
    }
    if let Some(v) = f.get("rng_seed")? {
        cfg.sim.rng_seed = v;
    }
    if let Some(v) = f.get("particle_substeps")? {
        cfg.sim.particle_substeps = v;
    }
    if let Some(v) = f.get::<String>("output_path")? {
        cfg.output_path = Some(PathBuf::from(v));
    }
    Ok(())
}

/// Checks the cross-field constraints of a config.
pub fn validate(cfg: &ExperimentConfig) -> Result<()> {
    cfg.sim.validate()?;
    if !(cfg.symbol_period > 0.0) || !cfg.symbol_period.is_finite() {
        return Err(Error::invalid("symbol_period must be finite and > 0"));
    }
    match cfg.experiment {
        ExperimentKind::Cir => {
            if cfg.cir_samples == 0 {
                return Err(Error::invalid("cir_samples must be >= 1"));
            }
            let single = ChannelParams { samples_per_bit: cfg.cir_samples, seq_length: 1, ..cfg.channel };
            single.validate()?;
            return Ok(());
        }
        _ => cfg.channel.validate()?,
    }
    if cfg.detectors.is_empty() {
        return Err(Error::invalid("detector list is empty"));
    }
    if let Some(grid) = &cfg.thresholds {
        if grid.is_empty() {
            return Err(Error::invalid("threshold grid is empty"));
        }
        if let Some(t) = grid.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
            return Err(Error::invalid(format!("thresholds must be finite and >= 0, got {t}")));
        }
    }
    if cfg.sequences == 0 {
        return Err(Error::invalid("sequences must be >= 1"));
    }
    let total = cfg.channel.total_samples() as i64;
    let check_offset = |d: i64, total: i64| {
        if d.abs() >= total {
            Err(Error::invalid(format!("offset {d} violates |offset| < M·L = {total}")))
        } else {
            Ok(())
        }
    };
    match cfg.experiment {
        ExperimentKind::ThresholdSweep => check_offset(cfg.offset, total)?,
        ExperimentKind::OffsetSweep => {
            if cfg.offsets.is_empty() {
                return Err(Error::invalid(
                    "offset list is empty; give `offsets` explicitly for sampling periods other than 8 ms or 40 ms",
                ));
            }
            for &d in &cfg.offsets {
                check_offset(d, total)?;
            }
        }
        ExperimentKind::SamplesSweep => {
            if cfg.samples.is_empty() {
                return Err(Error::invalid("samples list is empty"));
            }
            for &m in &cfg.samples {
                samples_params(cfg, m)?.validate()?;
            }
        }
        ExperimentKind::Cir => unreachable!(),
    }
    Ok(())
}

/// Channel for one point of a samples sweep: `M` slots of
/// `symbol_period / M`.
pub fn samples_params(cfg: &ExperimentConfig, m: usize) -> Result<ChannelParams> {
    if m == 0 {
        return Err(Error::invalid("samples per bit must be >= 1"));
    }
    Ok(ChannelParams { samples_per_bit: m, sample_period: cfg.symbol_period / m as f64, ..cfg.channel })
}
