//! Analytic bit-error probabilities.
//!
//! For bit `l` of a known sequence `b`, the error probability is
//!
//! ```text
//! P_e[l] = P₁·Pr{stat < τ | b_l = 1, b_n (n ≠ l)} + P₀·Pr{stat ≥ τ | b_l = 0, b_n (n ≠ l)}
//! ```
//!
//! where the observations are independent Poisson counts with means taken
//! from the superposed expected signal at `k = j − δ` (true bits, true
//! offset), and the feedback variants shift each threshold by the ISI the
//! receiver expects from its earlier decisions. Those decisions are taken to
//! be the true bits (genie feedback), and the receiver assumes δ = 0.
//!
//! `P̄_e` averages `P_e[l]` over the bits of each sequence, then over the
//! sequences.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{peak_sample_index, transmitter_sample, window, ChannelResponse};
use crate::detectors::DetectorKind;
use crate::error::{Error, Result};
use crate::params::{BitSequence, ChannelParams};
use crate::stats::PoissonCdfTable;

/// How the analysis treats decisions fed back into the DF detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackMode {
    /// Earlier decisions equal the transmitted bits.
    Genie,
    /// No feedback; required for the non-DF detectors.
    None,
}

impl FeedbackMode {
    pub fn for_kind(kind: DetectorKind) -> Self {
        if kind.uses_feedback() {
            FeedbackMode::Genie
        } else {
            FeedbackMode::None
        }
    }
}

/// One sequence's worth of context for evaluating `P_e[l]`.
#[derive(Debug, Clone)]
pub struct ErrorQuery {
    pub kind: DetectorKind,
    pub params: ChannelParams,
    pub true_bits: BitSequence,
    pub offset: i64,
    pub feedback: FeedbackMode,
}

impl ErrorQuery {
    pub fn new(kind: DetectorKind, params: ChannelParams, true_bits: BitSequence, offset: i64) -> Self {
        Self { kind, params, true_bits, offset, feedback: FeedbackMode::for_kind(kind) }
    }

    fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.true_bits.check_length(&self.params)?;
        check_offset(&self.params, self.offset)?;
        if self.feedback != FeedbackMode::for_kind(self.kind) {
            return Err(Error::invalid(format!(
                "{} detector requires feedback mode {:?}, got {:?}",
                self.kind,
                FeedbackMode::for_kind(self.kind),
                self.feedback
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_offset(params: &ChannelParams, offset: i64) -> Result<()> {
    let total = params.total_samples() as i64;
    if offset.abs() >= total {
        return Err(Error::invalid(format!("offset |{offset}| must be below M·L = {total}")));
    }
    Ok(())
}

/// Error probabilities for one detector, threshold and offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// `P_e[l]` per bit position, averaged over sequences.
    pub per_bit: Vec<f64>,
    /// `P̄_e`.
    pub average: f64,
    pub threshold: f64,
    pub offset: i64,
    pub detector: DetectorKind,
    pub sequences: usize,
}

/// `Pr{stat ≥ τ}` under one hypothesis for the current bit.
#[derive(Debug, Clone)]
struct Exceedance {
    /// (CDF table, threshold shift) for each factor of the product.
    factors: Vec<(PoissonCdfTable, f64)>,
}

impl Exceedance {
    fn prob(&self, tau: f64) -> f64 {
        let below: f64 = self.factors.iter().map(|(t, shift)| t.below(tau + shift)).product();
        1.0 - below
    }
}

#[derive(Debug, Clone)]
struct BitTerms {
    if_one: Exceedance,
    if_zero: Exceedance,
}

/// Per-bit exceedance terms of one sequence, precomputed so that many
/// thresholds can be evaluated cheaply.
#[derive(Debug, Clone)]
struct SequenceModel {
    prior_one: f64,
    bits: Vec<BitTerms>,
}

impl SequenceModel {
    fn build(
        kind: DetectorKind,
        response: &ChannelResponse,
        bits: &BitSequence,
        offset: i64,
        max_tau: f64,
        only_bit: Option<usize>,
    ) -> Self {
        let params = response.params();
        let peak_slot = peak_sample_index(params).min(params.samples_per_bit);
        let mut hypo = bits.clone();
        let mut terms = Vec::with_capacity(params.seq_length);
        for l in 0..params.seq_length {
            if only_bit.is_some_and(|b| b != l) {
                continue;
            }
            let prefix = &bits.as_slice()[..l];
            let slots: Vec<usize> = match kind {
                DetectorKind::SingleSample => vec![l * params.samples_per_bit + peak_slot],
                _ => window(params, l).collect(),
            };
            let shifts: Vec<f64> = if kind.uses_feedback() {
                slots.iter().map(|&j| response.isi(prefix, j)).collect()
            } else {
                vec![0.0; slots.len()]
            };
            let mut exceed = |value: bool| {
                hypo.set(l, value);
                let means = slots.iter().map(|&j| response.signal(&hypo, transmitter_sample(j, offset)));
                let factors = match kind {
                    DetectorKind::Energy | DetectorKind::EnergyDf => {
                        let pooled: f64 = means.sum();
                        let shift: f64 = shifts.iter().sum();
                        vec![(PoissonCdfTable::new(pooled, max_tau + shift), shift)]
                    }
                    _ => means
                        .zip(&shifts)
                        .map(|(mean, &shift)| (PoissonCdfTable::new(mean, max_tau + shift), shift))
                        .collect(),
                };
                Exceedance { factors }
            };
            let if_one = exceed(true);
            let if_zero = exceed(false);
            hypo.set(l, bits.is_one(l));
            terms.push(BitTerms { if_one, if_zero });
        }
        Self { prior_one: params.bit_one_prior, bits: terms }
    }

    fn bit_error(&self, index: usize, tau: f64) -> f64 {
        let t = &self.bits[index];
        let miss = 1.0 - t.if_one.prob(tau);
        let false_alarm = t.if_zero.prob(tau);
        (self.prior_one * miss + (1.0 - self.prior_one) * false_alarm).clamp(0.0, 1.0)
    }
}

/// `P_e[l]` for bit `l` of `query.true_bits` at threshold `tau`.
pub fn bit_error_probability(query: &ErrorQuery, l: usize, tau: f64) -> Result<f64> {
    query.validate()?;
    check_tau(tau)?;
    if l >= query.params.seq_length {
        return Err(Error::IndexOutOfRange(format!(
            "bit {l} outside sequence of {}",
            query.params.seq_length
        )));
    }
    let response = ChannelResponse::new(&query.params);
    let model = SequenceModel::build(query.kind, &response, &query.true_bits, query.offset, tau, Some(l));
    Ok(model.bit_error(0, tau))
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::invalid(format!("threshold must be finite and >= 0, got {tau}")));
    }
    Ok(())
}

/// `P̄_e` and per-bit errors for every threshold in `grid`, sharing the
/// per-sequence precomputation across thresholds.
pub fn threshold_sweep(
    kind: DetectorKind,
    params: &ChannelParams,
    sequences: &[BitSequence],
    offset: i64,
    grid: &[f64],
) -> Result<Vec<ErrorReport>> {
    params.validate()?;
    check_offset(params, offset)?;
    if sequences.is_empty() {
        return Err(Error::invalid("need at least one sequence"));
    }
    if grid.is_empty() {
        return Err(Error::invalid("threshold grid is empty"));
    }
    for seq in sequences {
        seq.check_length(params)?;
    }
    for &tau in grid {
        check_tau(tau)?;
    }
    let max_tau = grid.iter().cloned().fold(0.0, f64::max);
    let response = ChannelResponse::new(params);
    let l_count = params.seq_length;

    // per_sequence[s][g][l]; collected in order so the sums below are
    // independent of scheduling.
    let per_sequence: Vec<Vec<Vec<f64>>> = sequences
        .par_iter()
        .map(|bits| {
            let model = SequenceModel::build(kind, &response, bits, offset, max_tau, None);
            grid.iter()
                .map(|&tau| (0..l_count).map(|l| model.bit_error(l, tau)).collect())
                .collect()
        })
        .collect();

    let n = sequences.len() as f64;
    let reports = grid
        .iter()
        .enumerate()
        .map(|(g, &tau)| {
            let mut per_bit = vec![0.0; l_count];
            let mut average = 0.0;
            for seq in &per_sequence {
                let bits = &seq[g];
                for (acc, &p) in per_bit.iter_mut().zip(bits) {
                    *acc += p;
                }
                average += bits.iter().sum::<f64>() / l_count as f64;
            }
            per_bit.iter_mut().for_each(|p| *p /= n);
            ErrorReport {
                per_bit,
                average: average / n,
                threshold: tau,
                offset,
                detector: kind,
                sequences: sequences.len(),
            }
        })
        .collect();
    Ok(reports)
}

/// `P̄_e` over `sequences` at a single threshold.
pub fn average_error_probability(
    kind: DetectorKind,
    params: &ChannelParams,
    sequences: &[BitSequence],
    offset: i64,
    tau: f64,
) -> Result<ErrorReport> {
    Ok(threshold_sweep(kind, params, sequences, offset, &[tau])?.remove(0))
}

/// The grid threshold with the smallest `P̄_e`, and that error. Ties go to
/// the smaller threshold.
pub fn optimal_threshold(
    kind: DetectorKind,
    params: &ChannelParams,
    sequences: &[BitSequence],
    offset: i64,
    grid: &[f64],
) -> Result<(f64, f64)> {
    let reports = threshold_sweep(kind, params, sequences, offset, grid)?;
    Ok(best_of(&reports))
}

pub(crate) fn best_of(reports: &[ErrorReport]) -> (f64, f64) {
    let mut best = (reports[0].threshold, reports[0].average);
    for r in &reports[1..] {
        if r.average < best.1 || (r.average == best.1 && r.threshold < best.0) {
            best = (r.threshold, r.average);
        }
    }
    best
}

/// Default integer grid for `kind`: `0..=100`, extended for the sum
/// statistics up to the expected all-ones mass `N·Σ p[k]` over `k = 1..=ML`,
/// which bounds every window mean.
pub fn default_grid(kind: DetectorKind, params: &ChannelParams) -> Vec<f64> {
    let max = match kind {
        DetectorKind::Energy | DetectorKind::EnergyDf => {
            let response = ChannelResponse::new(params);
            let mass: f64 = (1..=params.total_samples() as i64).map(|k| response.single(k)).sum();
            (mass.ceil() as u32).max(100)
        }
        _ => 100,
    };
    integer_grid(max)
}

/// Integer thresholds `0, 1, …, max`.
pub fn integer_grid(max: u32) -> Vec<f64> {
    (0..=max).map(f64::from).collect()
}
