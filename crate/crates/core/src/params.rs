use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symbol period used by the reference setup (200 ms).
pub const REFERENCE_SYMBOL_PERIOD: f64 = 0.2;

/// Physical and protocol constants of the link.
///
/// Lengths are in metres, times in seconds and the diffusion coefficient in
/// m²/s. A symbol spans `samples_per_bit` slots of `sample_period` each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub rx_radius: f64,
    pub distance: f64,
    pub diffusion: f64,
    pub sample_period: f64,
    pub samples_per_bit: usize,
    pub seq_length: usize,
    pub molecules_per_one: u64,
    pub bit_one_prior: f64,
}

impl Default for ChannelParams {
    /// The reference setup at a 40 ms sampling period.
    fn default() -> Self {
        Self::reference(0.040)
    }
}

impl ChannelParams {
    /// Reference setup: 0.5 µm receiver 5 µm away, D = 1e-10 m²/s,
    /// 2×10⁴ molecules per bit-1, 20-bit sequences, equiprobable bits and a
    /// 200 ms symbol period split into slots of `sample_period`.
    pub fn reference(sample_period: f64) -> Self {
        let samples_per_bit = (REFERENCE_SYMBOL_PERIOD / sample_period).round().max(1.0) as usize;
        Self {
            rx_radius: 0.5e-6,
            distance: 5e-6,
            diffusion: 1e-10,
            sample_period,
            samples_per_bit,
            seq_length: 20,
            molecules_per_one: 20_000,
            bit_one_prior: 0.5,
        }
    }

    /// Reference setup with `samples_per_bit` slots in a 200 ms symbol.
    pub fn reference_with_samples(samples_per_bit: usize) -> Self {
        let mut params = Self::reference(REFERENCE_SYMBOL_PERIOD / samples_per_bit.max(1) as f64);
        params.samples_per_bit = samples_per_bit;
        params
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rx_radius", self.rx_radius),
            ("distance", self.distance),
            ("diffusion", self.diffusion),
            ("sample_period", self.sample_period),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and > 0, got {value}")));
            }
        }
        if self.distance <= self.rx_radius {
            return Err(Error::invalid(format!(
                "distance ({}) must exceed rx_radius ({})",
                self.distance, self.rx_radius
            )));
        }
        if self.samples_per_bit == 0 {
            return Err(Error::invalid("samples_per_bit must be >= 1"));
        }
        if self.seq_length == 0 {
            return Err(Error::invalid("seq_length must be >= 1"));
        }
        if self.molecules_per_one == 0 {
            return Err(Error::invalid("molecules_per_one must be >= 1"));
        }
        if !(self.bit_one_prior > 0.0 && self.bit_one_prior < 1.0) {
            return Err(Error::invalid(format!(
                "bit_one_prior must lie in (0, 1), got {}",
                self.bit_one_prior
            )));
        }
        Ok(())
    }

    /// Receiver volume (4/3)·π·r³.
    pub fn rx_volume(&self) -> f64 {
        4.0 / 3.0 * PI * self.rx_radius.powi(3)
    }

    pub fn bit_zero_prior(&self) -> f64 {
        1.0 - self.bit_one_prior
    }

    /// Total number of samples in a sequence, M·L.
    pub fn total_samples(&self) -> usize {
        self.samples_per_bit * self.seq_length
    }

    pub fn symbol_period(&self) -> f64 {
        self.sample_period * self.samples_per_bit as f64
    }
}

/// A transmitted or decoded binary word.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct BitSequence(Vec<u8>);

impl BitSequence {
    /// Builds a sequence, rejecting entries other than 0 and 1.
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::invalid(format!("bit {pos} is {}, expected 0 or 1", bits[pos])));
        }
        Ok(Self(bits))
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        Self(bits.into_iter().map(u8::from).collect())
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![1; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<bool> {
        self.0.get(index).map(|&b| b == 1)
    }

    pub fn is_one(&self, index: usize) -> bool {
        self.0.get(index) == Some(&1)
    }

    pub fn set(&mut self, index: usize, value: bool) {
        self.0[index] = u8::from(value);
    }

    pub fn push(&mut self, value: bool) {
        self.0.push(u8::from(value));
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    /// Number of positions where `self` and `other` differ.
    pub fn hamming_distance(&self, other: &BitSequence) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
            + self.0.len().abs_diff(other.0.len())
    }

    /// Checks that the sequence has exactly `params.seq_length` bits.
    pub fn check_length(&self, params: &ChannelParams) -> Result<()> {
        if self.len() != params.seq_length {
            return Err(Error::ShapeMismatch(format!(
                "bit sequence has {} bits, expected seq_length = {}",
                self.len(),
                params.seq_length
            )));
        }
        Ok(())
    }
}

impl From<BitSequence> for Vec<u8> {
    fn from(bits: BitSequence) -> Self {
        bits.0
    }
}
