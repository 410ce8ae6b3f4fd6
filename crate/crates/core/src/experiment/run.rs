use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::config::{samples_params, validate, ExperimentConfig, ExperimentKind};
use crate::analysis::{best_of, threshold_sweep};
use crate::channel::ChannelResponse;
use crate::detectors::DetectorKind;
use crate::error::{Error, Result};
use crate::params::{BitSequence, ChannelParams};
use crate::simulation::{draw_trace, measure_ber, measure_ber_sweep, random_sequences, trace_rng};

/// Rows of one experiment, all values already formatted.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl ResultTable {
    fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Values of column `name`.
    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let idx = self.header.iter().position(|h| *h == name)?;
        Some(self.rows.iter().map(|r| r[idx].as_str()).collect())
    }
}

/// 17 significant digits, enough to round-trip an f64.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Computes the experiment described by `cfg` without touching the disk.
pub fn compute_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    validate(cfg)?;
    match cfg.experiment {
        ExperimentKind::Cir => cir(cfg),
        ExperimentKind::ThresholdSweep => threshold(cfg),
        ExperimentKind::OffsetSweep => offsets(cfg),
        ExperimentKind::SamplesSweep => samples(cfg),
    }
}

fn cir(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let params = ChannelParams { samples_per_bit: cfg.cir_samples, seq_length: 1, ..cfg.channel };
    let bits = BitSequence::ones(1);
    let response = ChannelResponse::new(&params);
    let mut rng = trace_rng(cfg.sim.rng_seed, 0, 0, 1);
    let trace = draw_trace(&params, &bits, 0, &cfg.sim, &mut rng)?;
    let seed = cfg.sim.rng_seed.to_string();
    let mut table = ResultTable::new(vec!["k", "time_s", "expected", "sampled", "seed"]);
    for k in 0..=cfg.cir_samples {
        let sampled = if k == 0 { 0 } else { trace.at(k) };
        table.rows.push(vec![
            k.to_string(),
            format_float(k as f64 * params.sample_period),
            format_float(response.single(k as i64)),
            sampled.to_string(),
            seed.clone(),
        ]);
    }
    Ok(table)
}

fn threshold(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let params = cfg.channel;
    let seqs = random_sequences(&params, cfg.sequences, cfg.sim.rng_seed);
    let bits = (cfg.sequences * cfg.sim.realizations * params.seq_length).to_string();
    let seed = cfg.sim.rng_seed.to_string();
    let mut table = ResultTable::new(vec![
        "detector",
        "offset",
        "tau",
        "analytic_error",
        "empirical_error",
        "bits",
        "seed",
    ]);
    for &kind in &cfg.detectors {
        let grid = cfg.grid(kind, &params);
        let analytic = threshold_sweep(kind, &params, &seqs, cfg.offset, &grid)?;
        let empirical = measure_ber_sweep(kind, &params, &seqs, cfg.offset, &grid, &cfg.sim)?;
        for (a, e) in analytic.iter().zip(&empirical) {
            table.rows.push(vec![
                kind.to_string(),
                cfg.offset.to_string(),
                format_float(a.threshold),
                format_float(a.average),
                format_float(e.average),
                bits.clone(),
                seed.clone(),
            ]);
        }
    }
    Ok(table)
}

/// Optimal analytic threshold at `offset`, then the empirical error there.
fn optimum(
    kind: DetectorKind,
    params: &ChannelParams,
    seqs: &[BitSequence],
    offset: i64,
    cfg: &ExperimentConfig,
) -> Result<(f64, f64, f64)> {
    let reports = threshold_sweep(kind, params, seqs, offset, &cfg.grid(kind, params))?;
    let (tau, analytic) = best_of(&reports);
    let empirical = measure_ber(kind, params, seqs, offset, tau, &cfg.sim)?.average;
    Ok((tau, analytic, empirical))
}

fn offsets(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let params = cfg.channel;
    let seqs = random_sequences(&params, cfg.sequences, cfg.sim.rng_seed);
    let bits = (cfg.sequences * cfg.sim.realizations * params.seq_length).to_string();
    let seed = cfg.sim.rng_seed.to_string();
    let mut table = ResultTable::new(vec![
        "detector",
        "offset",
        "offset_ms",
        "optimal_tau",
        "analytic_error",
        "empirical_error",
        "bits",
        "seed",
    ]);
    for &kind in &cfg.detectors {
        for &offset in &cfg.offsets {
            let (tau, analytic, empirical) = optimum(kind, &params, &seqs, offset, cfg)?;
            table.rows.push(vec![
                kind.to_string(),
                offset.to_string(),
                format_float(offset as f64 * params.sample_period * 1e3),
                format_float(tau),
                format_float(analytic),
                format_float(empirical),
                bits.clone(),
                seed.clone(),
            ]);
        }
    }
    Ok(table)
}

fn samples(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let seed = cfg.sim.rng_seed.to_string();
    let mut table = ResultTable::new(vec![
        "detector",
        "samples_per_bit",
        "sample_period_s",
        "optimal_tau",
        "analytic_error",
        "empirical_error",
        "bits",
        "seed",
    ]);
    for &kind in &cfg.detectors {
        for &m in &cfg.samples {
            let params = samples_params(cfg, m)?;
            let seqs = random_sequences(&params, cfg.sequences, cfg.sim.rng_seed);
            let bits = (cfg.sequences * cfg.sim.realizations * params.seq_length).to_string();
            let (tau, analytic, empirical) = optimum(kind, &params, &seqs, 0, cfg)?;
            table.rows.push(vec![
                kind.to_string(),
                m.to_string(),
                format_float(params.sample_period),
                format_float(tau),
                format_float(analytic),
                format_float(empirical),
                bits,
                seed.clone(),
            ]);
        }
    }
    Ok(table)
}

/// Sidecar metadata path: the CSV path with a `.json` extension.
pub fn metadata_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Writes `table` to `out` and the metadata sidecar next to it.
pub fn write_outputs(cfg: &ExperimentConfig, table: &ResultTable, out: &Path) -> Result<PathBuf> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    fs::write(out, table.to_csv()).map_err(io_err(out))?;

    let mut meta = json!({
        "tool": "molcomm",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": cfg.experiment.name(),
        "seed": cfg.sim.rng_seed,
        "rows": table.rows.len(),
        "columns": table.header,
        "config": cfg,
    });
    if cfg.experiment == ExperimentKind::OffsetSweep {
        let ms: Vec<f64> = cfg.offsets.iter().map(|&d| d as f64 * cfg.channel.sample_period * 1e3).collect();
        meta["offsets_ms"] = json!(ms);
    }
    if cfg.experiment == ExperimentKind::ThresholdSweep {
        meta["offset_ms"] = json!(cfg.offset as f64 * cfg.channel.sample_period * 1e3);
    }
    let meta_path = metadata_path(out);
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    fs::write(&meta_path, text + "\n").map_err(io_err(&meta_path))?;
    Ok(out.to_path_buf())
}

/// Validates, computes and writes one experiment. Nothing is written if
/// validation or computation fails.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    let table = compute_experiment(cfg)?;
    write_outputs(cfg, &table, out)
}
