//! Monte Carlo trace generation and empirical bit-error measurement.
//!
//! Three fidelities are available:
//!
//! * [`Fidelity::Poisson`]: each sample is an independent Poisson draw with
//!   the expected-signal mean (the model the analysis assumes),
//! * [`Fidelity::Binomial`]: each earlier release contributes an
//!   independent Binomial(N, p) draw,
//! * [`Fidelity::Particle`]: every molecule is tracked by Brownian motion
//!   and counted when inside the receiver sphere.
//!
//! # Seeding
//!
//! All randomness comes from ChaCha8 keyed by `rng_seed`. Stream 0 generates
//! the bit sequences; the trace for sequence `s`, realization `r` uses
//! stream `1 + s·realizations + r`. Work items can therefore run in any
//! order, or in parallel, and produce identical results.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::analysis::{check_offset, ErrorReport};
use crate::channel::{hit, transmitter_sample, ChannelResponse};
use crate::detectors::{Detector, DetectorKind, ObservationTrace};
use crate::error::{Error, Result};
use crate::params::{BitSequence, ChannelParams};

/// How observation traces are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fidelity {
    #[default]
    Poisson,
    Binomial,
    Particle,
}

impl fmt::Display for Fidelity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fidelity::Poisson => "poisson",
            Fidelity::Binomial => "binomial",
            Fidelity::Particle => "particle",
        })
    }
}

impl FromStr for Fidelity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "poisson" => Ok(Fidelity::Poisson),
            "binomial" => Ok(Fidelity::Binomial),
            "particle" => Ok(Fidelity::Particle),
            other => Err(Error::invalid(format!(
                "unknown fidelity {other:?}; expected poisson, binomial or particle"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub fidelity: Fidelity,
    /// Traces drawn per bit sequence.
    pub realizations: usize,
    pub rng_seed: u64,
    /// Brownian substeps per sampling period (particle fidelity only).
    pub particle_substeps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { fidelity: Fidelity::Poisson, realizations: 1, rng_seed: 0, particle_substeps: 10 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::invalid("realizations must be >= 1"));
        }
        if self.particle_substeps == 0 {
            return Err(Error::invalid("particle_substeps must be >= 1"));
        }
        Ok(())
    }
}

/// Generator for the bit sequences of a run.
pub fn sequence_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

/// Generator for realization `realization` of sequence `sequence`.
pub fn trace_rng(seed: u64, sequence: usize, realization: usize, realizations: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + (sequence * realizations + realization) as u64);
    rng
}

/// `count` sequences of `seq_length` bits, each 1 with probability
/// `bit_one_prior`.
pub fn random_sequences(params: &ChannelParams, count: usize, seed: u64) -> Vec<BitSequence> {
    let mut rng = sequence_rng(seed);
    (0..count)
        .map(|_| BitSequence::from_bools((0..params.seq_length).map(|_| rng.random_bool(params.bit_one_prior))))
        .collect()
}

fn check_inputs(params: &ChannelParams, bits: &BitSequence, offset: i64) -> Result<()> {
    params.validate()?;
    bits.check_length(params)?;
    check_offset(params, offset)
}

/// Transmitter sample observed at receiver sample `j`, if it lies inside
/// `{1, …, ML}`.
fn transmitter_index(params: &ChannelParams, j: usize, offset: i64) -> Option<usize> {
    let k = transmitter_sample(j, offset);
    (k >= 1 && k <= params.total_samples() as i64).then_some(k as usize)
}

/// Independent Poisson draws with the expected-signal means at `k = j − δ`.
pub fn draw_trace_poisson<R: Rng + ?Sized>(
    params: &ChannelParams,
    bits: &BitSequence,
    offset: i64,
    rng: &mut R,
) -> Result<ObservationTrace> {
    check_inputs(params, bits, offset)?;
    Ok(poisson_trace(&ChannelResponse::new(params), bits, offset, rng))
}

fn poisson_draw<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean > 0.0 {
        Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
    } else {
        0
    }
}

fn poisson_trace<R: Rng + ?Sized>(
    response: &ChannelResponse,
    bits: &BitSequence,
    offset: i64,
    rng: &mut R,
) -> ObservationTrace {
    let total = response.params().total_samples();
    let counts = (1..=total)
        .map(|j| poisson_draw(response.signal(bits, transmitter_sample(j, offset)), rng))
        .collect();
    ObservationTrace::new(counts)
}

/// Sum over earlier releases of independent Binomial(N, p[k − lM]) draws.
pub fn draw_trace_binomial<R: Rng + ?Sized>(
    params: &ChannelParams,
    bits: &BitSequence,
    offset: i64,
    rng: &mut R,
) -> Result<ObservationTrace> {
    check_inputs(params, bits, offset)?;
    Ok(binomial_trace(params, bits, offset, rng, |k| hit(params, k)))
}

fn binomial_trace<R: Rng + ?Sized>(
    params: &ChannelParams,
    bits: &BitSequence,
    offset: i64,
    rng: &mut R,
    hitting: impl Fn(u64) -> f64,
) -> ObservationTrace {
    let m = params.samples_per_bit;
    let n = params.molecules_per_one;
    let counts = (1..=params.total_samples())
        .map(|j| {
            let Some(k) = transmitter_index(params, j, offset) else {
                return 0;
            };
            (0..=(k / m).min(params.seq_length - 1))
                .filter(|&l| bits.is_one(l))
                .map(|l| {
                    let p = hitting((k - l * m) as u64);
                    if p <= 0.0 {
                        0
                    } else {
                        Binomial::new(n, p.min(1.0)).expect("valid binomial").sample(rng)
                    }
                })
                .sum()
        })
        .collect();
    ObservationTrace::new(counts)
}

/// Free molecules and the releases that produced them. The transmitter sits
/// at the origin and the receiver centre at `(d, 0, 0)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParticleState {
    pub positions: Vec<[f64; 3]>,
    /// (transmitter sample index, molecules released).
    pub release_schedule: Vec<(usize, u64)>,
}

impl ParticleState {
    pub fn new(params: &ChannelParams, bits: &BitSequence) -> Self {
        let release_schedule = (0..params.seq_length)
            .filter(|&l| bits.is_one(l))
            .map(|l| (l * params.samples_per_bit, params.molecules_per_one))
            .collect();
        Self { positions: Vec::new(), release_schedule }
    }

    fn release_at(&mut self, k: usize) {
        for &(at, count) in &self.release_schedule {
            if at == k {
                self.positions.extend(std::iter::repeat_n([0.0; 3], count as usize));
            }
        }
    }

    fn diffuse<R: Rng + ?Sized>(&mut self, sigma: f64, rng: &mut R) {
        for pos in &mut self.positions {
            for x in pos.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *x += sigma * z;
            }
        }
    }

    /// Molecules within `radius` of `centre`.
    pub fn count_inside(&self, centre: [f64; 3], radius: f64) -> u64 {
        let r2 = radius * radius;
        self.positions
            .iter()
            .filter(|p| {
                let dx = p[0] - centre[0];
                let dy = p[1] - centre[1];
                let dz = p[2] - centre[2];
                dx * dx + dy * dy + dz * dz <= r2
            })
            .count() as u64
    }
}

/// Particle-based trace: releases `N` point molecules per bit-1, moves
/// each by Gaussian steps of per-axis deviation `√(2·D·h)` with
/// `h = Δt / substeps`, and counts those inside the receiver sphere at
/// every sample time.
pub fn simulate_particles<R: Rng + ?Sized>(
    params: &ChannelParams,
    bits: &BitSequence,
    offset: i64,
    substeps: usize,
    rng: &mut R,
) -> Result<ObservationTrace> {
    check_inputs(params, bits, offset)?;
    if substeps == 0 {
        return Err(Error::invalid("particle_substeps must be >= 1"));
    }
    let centre = [params.distance, 0.0, 0.0];
    let h = params.sample_period / substeps as f64;
    let sigma = (2.0 * params.diffusion * h).sqrt();
    let total = params.total_samples();

    let mut state = ParticleState::new(params, bits);
    // by_k[k] = molecules inside at transmitter sample k.
    let mut by_k = vec![0u64; total + 1];
    for k in 1..=total {
        state.release_at(k - 1);
        for _ in 0..substeps {
            state.diffuse(sigma, rng);
        }
        by_k[k] = state.count_inside(centre, params.rx_radius);
    }
    let counts = (1..=total)
        .map(|j| transmitter_index(params, j, offset).map_or(0, |k| by_k[k]))
        .collect();
    Ok(ObservationTrace::new(counts))
}

/// Draws one trace at the configured fidelity.
pub fn draw_trace<R: Rng + ?Sized>(
    params: &ChannelParams,
    bits: &BitSequence,
    offset: i64,
    sim: &SimConfig,
    rng: &mut R,
) -> Result<ObservationTrace> {
    match sim.fidelity {
        Fidelity::Poisson => draw_trace_poisson(params, bits, offset, rng),
        Fidelity::Binomial => draw_trace_binomial(params, bits, offset, rng),
        Fidelity::Particle => simulate_particles(params, bits, offset, sim.particle_substeps, rng),
    }
}

/// Empirical error fractions at every threshold in `grid`, decoding the
/// same traces at each threshold.
pub fn measure_ber_sweep(
    kind: DetectorKind,
    params: &ChannelParams,
    sequences: &[BitSequence],
    offset: i64,
    grid: &[f64],
    sim: &SimConfig,
) -> Result<Vec<ErrorReport>> {
    params.validate()?;
    sim.validate()?;
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
    let detector = Detector::new(kind, params)?;
    let l_count = params.seq_length;
    let response = ChannelResponse::new(params);

    // errors[s][g][l] = number of wrong decisions over the realizations.
    let errors: Vec<Vec<Vec<u32>>> = sequences
        .par_iter()
        .enumerate()
        .map(|(s, bits)| -> Result<Vec<Vec<u32>>> {
            let mut acc = vec![vec![0u32; l_count]; grid.len()];
            for r in 0..sim.realizations {
                let mut rng = trace_rng(sim.rng_seed, s, r, sim.realizations);
                let trace = match sim.fidelity {
                    Fidelity::Poisson => poisson_trace(&response, bits, offset, &mut rng),
                    _ => draw_trace(params, bits, offset, sim, &mut rng)?,
                };
                for (g, &tau) in grid.iter().enumerate() {
                    let decoded = detector.decode(&trace, tau)?;
                    for l in 0..l_count {
                        if decoded.is_one(l) != bits.is_one(l) {
                            acc[g][l] += 1;
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let trials = (sequences.len() * sim.realizations) as f64;
    let reports = grid
        .iter()
        .enumerate()
        .map(|(g, &tau)| {
            let mut per_bit = vec![0.0; l_count];
            for seq in &errors {
                for (acc, &e) in per_bit.iter_mut().zip(&seq[g]) {
                    *acc += f64::from(e);
                }
            }
            let total: f64 = per_bit.iter().sum();
            per_bit.iter_mut().for_each(|p| *p /= trials);
            ErrorReport {
                per_bit,
                average: total / (trials * l_count as f64),
                threshold: tau,
                offset,
                detector: kind,
                sequences: sequences.len(),
            }
        })
        .collect();
    Ok(reports)
}

/// Empirical `P̄_e` at one threshold.
pub fn measure_ber(
    kind: DetectorKind,
    params: &ChannelParams,
    sequences: &[BitSequence],
    offset: i64,
    tau: f64,
    sim: &SimConfig,
) -> Result<ErrorReport> {
    Ok(measure_ber_sweep(kind, params, sequences, offset, &[tau], sim)?.remove(0))
}

/// Binomial standard error `√(p(1−p)/n)` of an error fraction over `bits`.
pub fn binomial_std_error(p: f64, bits: usize) -> f64 {
    (p * (1.0 - p) / bits as f64).sqrt()
}
