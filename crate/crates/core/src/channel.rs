//! Deterministic part of the diffusive link.
//!
//! Time is slotted: transmitter sample index `k` refers to time `k·Δt` after
//! the first release, and bit `l` is released at `k = l·M`. The receiver's
//! clock leads the transmitter's by `δ` slots, so its sample `j` observes
//! transmitter time `k = j − δ` (see [`transmitter_sample`]): a positive
//! offset samples early, a negative one late and into future symbols. Bit
//! `l` is observed over the receiver samples `j ∈ {lM+1, …, (l+1)M}`, and
//! the signal is taken to be zero outside `k ∈ {1, …, ML}`.

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::params::{BitSequence, ChannelParams};

/// Probability that a molecule released at `k = 0` is inside the passive
/// receiver at sample `k`, using the uniform-concentration approximation
/// `V / (4πDkΔt)^{3/2} · exp(−d² / (4DkΔt))`. Exactly zero at `k = 0`.
pub fn hitting_probability(params: &ChannelParams, k: i64) -> Result<f64> {
    if k < 0 {
        return Err(Error::IndexOutOfRange(format!("sample index must be >= 0, got {k}")));
    }
    Ok(hit(params, k as u64))
}

pub(crate) fn hit(params: &ChannelParams, k: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let four_dt = 4.0 * params.diffusion * k as f64 * params.sample_period;
    params.rx_volume() / (PI * four_dt).powf(1.5) * (-params.distance * params.distance / four_dt).exp()
}

/// Mean count `N·p[k]` from a single release of `N` molecules at `k = 0`.
pub fn expected_single_release(params: &ChannelParams, k: i64) -> Result<f64> {
    Ok(params.molecules_per_one as f64 * hitting_probability(params, k)?)
}

/// Transmitter sample seen by receiver sample `j` under clock offset `δ`.
pub fn transmitter_sample(j: usize, offset: i64) -> i64 {
    j as i64 - offset
}

/// Receiver samples `j` that make up the observation window of bit `l`.
pub fn window(params: &ChannelParams, l: usize) -> RangeInclusive<usize> {
    let m = params.samples_per_bit;
    l * m + 1..=(l + 1) * m
}

/// Expected single-release response `N·p[k]` tabulated for
/// `k = 0, …, M·L`. Indices past the table are evaluated on demand.
#[derive(Debug, Clone)]
pub struct ChannelResponse {
    params: ChannelParams,
    table: Vec<f64>,
}

impl ChannelResponse {
    pub fn new(params: &ChannelParams) -> Self {
        let n = params.molecules_per_one as f64;
        let table = (0..=params.total_samples() as u64)
            .map(|k| n * hit(params, k))
            .collect();
        Self { params: *params, table }
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    /// `N·p[k]`; zero for `k ≤ 0`.
    pub fn single(&self, k: i64) -> f64 {
        if k <= 0 {
            return 0.0;
        }
        match self.table.get(k as usize) {
            Some(&v) => v,
            None => self.params.molecules_per_one as f64 * hit(&self.params, k as u64),
        }
    }

    /// Expected signal `ȳ[k]` for transmitted `bits`; zero outside
    /// `k ∈ {1, …, ML}`.
    pub fn signal(&self, bits: &BitSequence, k: i64) -> f64 {
        let total = self.params.total_samples() as i64;
        if k < 1 || k > total {
            return 0.0;
        }
        let m = self.params.samples_per_bit as i64;
        let last = (k / m).min(bits.len() as i64 - 1);
        (0..=last)
            .filter(|&l| bits.is_one(l as usize))
            .map(|l| self.single(k - l * m))
            .sum()
    }

    /// ISI the receiver expects at its sample `j` given earlier decisions,
    /// assuming its clock is aligned with the transmitter's.
    pub fn isi(&self, decided_prefix: &[u8], j: usize) -> f64 {
        let m = self.params.samples_per_bit as i64;
        decided_prefix
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(n, _)| self.single(j as i64 - n as i64 * m))
            .sum()
    }
}

/// Expected number of molecules `ȳ[k]` observed at transmitter sample `k`
/// when `bits` is sent: the superposition of every release up to `k`.
/// Returns 0 for `k` outside `{1, …, ML}`.
pub fn expected_signal(params: &ChannelParams, bits: &BitSequence, k: i64) -> Result<f64> {
    params.validate()?;
    bits.check_length(params)?;
    Ok(ChannelResponse::new(params).signal(bits, k))
}

/// Average ISI `ȳ_ISI[j]` expected by the receiver at its sample `j` from
/// the already-decided bits `b̂_0 … b̂_{l−1}`, under the assumption δ = 0.
pub fn expected_isi(params: &ChannelParams, decided_prefix: &BitSequence, j: usize) -> Result<f64> {
    params.validate()?;
    if decided_prefix.len() >= params.seq_length {
        return Err(Error::IndexOutOfRange(format!(
            "decided prefix has {} bits but the sequence only has {}",
            decided_prefix.len(),
            params.seq_length
        )));
    }
    if j == 0 || j > params.total_samples() {
        return Err(Error::IndexOutOfRange(format!(
            "receiver sample index {j} outside 1..={}",
            params.total_samples()
        )));
    }
    Ok(ChannelResponse::new(params).isi(decided_prefix.as_slice(), j))
}

/// Slot within a symbol (1-based) where the expected single-release signal
/// peaks, searched over `1..=M`. Ties go to the earlier slot.
pub fn peak_sample_index(params: &ChannelParams) -> usize {
    let mut best = 1;
    let mut best_value = hit(params, 1);
    for k in 2..=params.samples_per_bit {
        let v = hit(params, k as u64);
        if v > best_value {
            best = k;
            best_value = v;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p40() -> ChannelParams {
        ChannelParams::reference(0.040)
    }

    #[test]
    fn hitting_probability_at_release_is_zero() {
        assert_eq!(hitting_probability(&p40(), 0).unwrap(), 0.0);
        assert_eq!(expected_single_release(&p40(), 0).unwrap(), 0.0);
        assert!(hitting_probability(&p40(), -1).is_err());
    }

    #[test]
    fn hitting_probability_reference_values() {
        // Frozen from direct evaluation of the closed form.
        let p1 = hitting_probability(&p40(), 1).unwrap();
        assert!((p1 - 3.0803e-4).abs() < 1e-7, "{p1}");
        let p5 = hitting_probability(&p40(), 5).unwrap();
        assert!((p5 - 9.615e-5).abs() < 1e-7, "{p5}");
        assert!((p5 / p1 - 0.312).abs() < 0.001);
        let y1 = expected_single_release(&p40(), 1).unwrap();
        assert!((y1 - 6.16).abs() < 0.01);
        let y5 = expected_single_release(&p40(), 5).unwrap();
        assert!((y5 - 1.923).abs() < 0.001);
    }

    #[test]
    fn expected_signal_superposes_releases() {
        let p = p40();
        let mut bits = BitSequence::zeros(p.seq_length);
        assert_eq!(expected_signal(&p, &bits, 3).unwrap(), 0.0);
        bits.set(0, true);
        let y1 = expected_signal(&p, &bits, 1).unwrap();
        assert!((y1 - expected_single_release(&p, 1).unwrap()).abs() < 1e-12);
        bits.set(1, true);
        let y6 = expected_signal(&p, &bits, 6).unwrap();
        let hand = expected_single_release(&p, 6).unwrap() + expected_single_release(&p, 1).unwrap();
        assert!((y6 - hand).abs() < 1e-12);
        // Zero outside {1, …, ML}.
        assert_eq!(expected_signal(&p, &bits, 0).unwrap(), 0.0);
        assert_eq!(expected_signal(&p, &bits, 101).unwrap(), 0.0);
        assert_eq!(expected_signal(&p, &bits, -4).unwrap(), 0.0);
    }

    #[test]
    fn expected_signal_checks_length() {
        assert!(expected_signal(&p40(), &BitSequence::ones(3), 1).is_err());
    }

    #[test]
    fn expected_isi_cases() {
        let p = p40();
        assert_eq!(expected_isi(&p, &BitSequence::zeros(0), 3).unwrap(), 0.0);
        assert_eq!(expected_isi(&p, &BitSequence::zeros(3), 17).unwrap(), 0.0);
        let isi = expected_isi(&p, &BitSequence::ones(1), 6).unwrap();
        assert!((isi - expected_single_release(&p, 6).unwrap()).abs() < 1e-15);
        assert!(expected_isi(&p, &BitSequence::zeros(1), 0).is_err());
        assert!(expected_isi(&p, &BitSequence::zeros(20), 5).is_err());
    }

    #[test]
    fn peak_index() {
        assert_eq!(peak_sample_index(&p40()), 1);
        assert_eq!(peak_sample_index(&ChannelParams::reference(0.008)), 5);
        let one = ChannelParams { samples_per_bit: 1, ..ChannelParams::reference(0.008) };
        assert_eq!(peak_sample_index(&one), 1);
    }

    #[test]
    fn unimodal_over_ten_symbols() {
        for dt in [0.040, 0.008, 0.004] {
            let p = ChannelParams::reference(dt);
            let peak_time = p.distance.powi(2) / (6.0 * p.diffusion);
            let kmax = 10 * p.samples_per_bit as u64;
            let values: Vec<f64> = (1..=kmax).map(|k| hit(&p, k)).collect();
            let top = values
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            // The discrete peak sits on one of the two slots around d²/(6D).
            let continuous = peak_time / dt;
            assert!((top as f64 + 1.0 - continuous).abs() <= 1.0, "dt={dt}");
            assert!(values[..=top].windows(2).all(|w| w[0] < w[1]));
            assert!(values[top..].windows(2).all(|w| w[0] > w[1]));
        }
    }

    #[test]
    fn isi_matches_signal_for_correct_prefix() {
        let p = p40();
        let bits = BitSequence::new((0..20).map(|i| ((i * 7 + 3) % 3 == 0) as u8).collect()).unwrap();
        let cir = ChannelResponse::new(&p);
        for l in 0..p.seq_length {
            let prefix = &bits.as_slice()[..l];
            for j in window(&p, l) {
                let prior: f64 = (0..l)
                    .filter(|&n| bits.is_one(n))
                    .map(|n| cir.single(j as i64 - (n * p.samples_per_bit) as i64))
                    .sum();
                assert!((cir.isi(prefix, j) - prior).abs() < 1e-12);
                let current = if bits.is_one(l) {
                    cir.single((j - l * p.samples_per_bit) as i64)
                } else {
                    0.0
                };
                assert!((cir.signal(&bits, j as i64) - prior - current).abs() < 1e-12);
            }
        }
    }
}
