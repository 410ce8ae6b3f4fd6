//! Symbol-by-symbol decision rules over a receiver observation trace.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{peak_sample_index, window, ChannelResponse};
use crate::error::{Error, Result};
use crate::params::{BitSequence, ChannelParams};

/// Which statistic a detector thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    /// The window sample at which the single-release peak is expected.
    SingleSample,
    /// Sum of the window.
    Energy,
    /// Largest sample in the window.
    AsyncPeak,
    /// Window sum minus the ISI implied by earlier decisions.
    EnergyDf,
    /// Largest sample after subtracting the per-sample expected ISI.
    AsyncPeakDf,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 5] = [
        DetectorKind::SingleSample,
        DetectorKind::Energy,
        DetectorKind::AsyncPeak,
        DetectorKind::EnergyDf,
        DetectorKind::AsyncPeakDf,
    ];

    pub fn uses_feedback(self) -> bool {
        matches!(self, DetectorKind::EnergyDf | DetectorKind::AsyncPeakDf)
    }

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::SingleSample => "single-sample",
            DetectorKind::Energy => "energy",
            DetectorKind::AsyncPeak => "async-peak",
            DetectorKind::EnergyDf => "energy-df",
            DetectorKind::AsyncPeakDf => "async-peak-df",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown detector {s:?}; expected one of single-sample, energy, async-peak, energy-df, async-peak-df"
                ))
            })
    }
}

/// A decision rule together with its threshold τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub kind: DetectorKind,
    pub threshold: f64,
}

impl DetectorSpec {
    pub fn new(kind: DetectorKind, threshold: f64) -> Result<Self> {
        let spec = Self { kind, threshold };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold >= 0.0) || !self.threshold.is_finite() {
            return Err(Error::invalid(format!("threshold must be finite and >= 0, got {}", self.threshold)));
        }
        Ok(())
    }
}

/// Molecule counts `y[j]` for receiver samples `j = 1, …, ML`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ObservationTrace {
    counts: Vec<u64>,
}

impl ObservationTrace {
    pub fn new(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn zeros(len: usize) -> Self {
        Self { counts: vec![0; len] }
    }

    /// Count at receiver sample `j` (1-based).
    pub fn at(&self, j: usize) -> u64 {
        self.counts[j - 1]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn counts_mut(&mut self) -> &mut [u64] {
        &mut self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    fn check_shape(&self, params: &ChannelParams) -> Result<()> {
        if self.len() != params.total_samples() {
            return Err(Error::ShapeMismatch(format!(
                "trace has {} samples, expected M·L = {}",
                self.len(),
                params.total_samples()
            )));
        }
        Ok(())
    }
}

impl From<Vec<u64>> for ObservationTrace {
    fn from(counts: Vec<u64>) -> Self {
        Self::new(counts)
    }
}

/// A detector bound to a channel, reusable across traces.
#[derive(Debug, Clone)]
pub struct Detector {
    kind: DetectorKind,
    response: ChannelResponse,
    peak_slot: usize,
}

impl Detector {
    pub fn new(kind: DetectorKind, params: &ChannelParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            kind,
            response: ChannelResponse::new(params),
            peak_slot: peak_sample_index(params).min(params.samples_per_bit),
        })
    }

    pub fn kind(&self) -> DetectorKind {
        self.kind
    }

    fn params(&self) -> &ChannelParams {
        self.response.params()
    }

    /// The value compared against τ for bit `l`, given the decisions made
    /// for the earlier bits (only read by the feedback variants).
    pub fn statistic(&self, trace: &ObservationTrace, l: usize, decided_prefix: &[u8]) -> f64 {
        let params = self.params();
        let slots = window(params, l);
        match self.kind {
            DetectorKind::SingleSample => {
                let j = l * params.samples_per_bit + self.peak_slot;
                trace.at(j) as f64
            }
            DetectorKind::Energy => slots.map(|j| trace.at(j)).sum::<u64>() as f64,
            DetectorKind::AsyncPeak => slots.map(|j| trace.at(j)).max().unwrap_or(0) as f64,
            DetectorKind::EnergyDf => {
                let total = slots.clone().map(|j| trace.at(j)).sum::<u64>() as f64;
                let isi: f64 = slots.map(|j| self.response.isi(decided_prefix, j)).sum();
                total - isi
            }
            DetectorKind::AsyncPeakDf => slots
                .map(|j| trace.at(j) as f64 - self.response.isi(decided_prefix, j))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Decodes every bit in order, feeding back the detector's own decisions.
    pub fn decode(&self, trace: &ObservationTrace, tau: f64) -> Result<BitSequence> {
        trace.check_shape(self.params())?;
        let mut decided = Vec::with_capacity(self.params().seq_length);
        for l in 0..self.params().seq_length {
            let stat = self.statistic(trace, l, &decided);
            decided.push(u8::from(stat >= tau));
        }
        Ok(BitSequence::new(decided).expect("decisions are binary"))
    }
}

/// Decodes `trace` with the rule and threshold in `spec`.
pub fn detect(spec: &DetectorSpec, trace: &ObservationTrace, params: &ChannelParams) -> Result<BitSequence> {
    spec.validate()?;
    Detector::new(spec.kind, params)?.decode(trace, spec.threshold)
}

/// The scalar that `detect` compares with τ for bit `l`, given the decided
/// prefix `b̂_0 … b̂_{l−1}`.
pub fn decision_statistic(
    spec: &DetectorSpec,
    trace: &ObservationTrace,
    params: &ChannelParams,
    l: usize,
    decided_prefix: &BitSequence,
) -> Result<f64> {
    spec.validate()?;
    let detector = Detector::new(spec.kind, params)?;
    trace.check_shape(params)?;
    if l >= params.seq_length {
        return Err(Error::IndexOutOfRange(format!("bit {l} outside sequence of {}", params.seq_length)));
    }
    if decided_prefix.len() != l {
        return Err(Error::ShapeMismatch(format!(
            "decided prefix for bit {l} must have {l} entries, got {}",
            decided_prefix.len()
        )));
    }
    Ok(detector.statistic(trace, l, decided_prefix.as_slice()))
}
