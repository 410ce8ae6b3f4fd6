//! Poisson CDFs with real-valued thresholds and exceedance probabilities
//! for the maximum and the sum of independent Poisson observations.
//!
//! Thresholds shifted by expected ISI are generally non-integer while the
//! counts themselves are integers. For a count `X` and threshold `a`:
//!
//! * `Pr{X ≤ a} = Q(⌊a⌋ + 1, x̄)` with `Q` the regularized upper gamma,
//! * `Pr{X < a} = Pr{X ≤ a − 1}` when `a` is an integer,
//! * `Pr{X < a} = Pr{X ≤ a}` otherwise.
//!
//! "Integer" means within [`INTEGER_TOLERANCE`] of an integer.

use crate::error::{Error, Result};

/// Distance from an integer below which a threshold is treated as integral.
pub const INTEGER_TOLERANCE: f64 = 1e-9;

/// Beyond this mean the finite series underflows `e^{−x}`.
const SERIES_MAX_MEAN: f64 = 700.0;

/// Regularized upper incomplete gamma `Γ(s, x) / Γ(s)`.
///
/// Integer orders use the exact finite series `e^{−x} Σ_{i<s} x^i / i!`;
/// other orders fall back to the usual series / continued fraction split.
pub fn regularized_upper_gamma(s: f64, x: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::invalid(format!("gamma order must be > 0, got {s}")));
    }
    if !(x >= 0.0) {
        return Err(Error::invalid(format!("gamma argument must be >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let rounded = s.round();
    if (s - rounded).abs() < INTEGER_TOLERANCE && x <= SERIES_MAX_MEAN {
        return Ok(upper_gamma_integer(rounded as u64, x));
    }
    Ok(upper_gamma_general(s, x))
}

/// `e^{−x} Σ_{i=0}^{s−1} x^i / i!` via the running-term recurrence.
fn upper_gamma_integer(s: u64, x: f64) -> f64 {
    let mut term = (-x).exp();
    let mut sum = term;
    for i in 1..s {
        term *= x / i as f64;
        sum += term;
    }
    sum.min(1.0)
}

fn upper_gamma_general(s: f64, x: f64) -> f64 {
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 10_000;
    let log_prefactor = s * x.ln() - x - ln_gamma(s);
    if x < s + 1.0 {
        // Lower series P(s, x), then Q = 1 − P.
        let mut ap = s;
        let mut del = 1.0 / s;
        let mut sum = del;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        (1.0 - sum * log_prefactor.exp()).clamp(0.0, 1.0)
    } else {
        // Modified Lentz continued fraction for Q(s, x).
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - s;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - s);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        (log_prefactor.exp() * h).clamp(0.0, 1.0)
    }
}

/// Lanczos approximation (g = 7, n = 9) of `ln Γ(x)` for `x > 0`.
fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// A real threshold `a` against a Poisson count with mean `x̄`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonThresholdQuery {
    pub threshold: f64,
    pub mean: f64,
}

impl PoissonThresholdQuery {
    pub fn new(threshold: f64, mean: f64) -> Result<Self> {
        let q = Self { threshold, mean };
        q.validate()?;
        Ok(q)
    }

    fn validate(&self) -> Result<()> {
        if !(self.mean >= 0.0) || !self.mean.is_finite() {
            return Err(Error::invalid(format!("Poisson mean must be finite and >= 0, got {}", self.mean)));
        }
        if !self.threshold.is_finite() {
            return Err(Error::invalid(format!("threshold must be finite, got {}", self.threshold)));
        }
        Ok(())
    }
}

/// Rounds `a` to the nearest integer if it is within [`INTEGER_TOLERANCE`].
fn as_integer(a: f64) -> Option<f64> {
    let r = a.round();
    ((a - r).abs() < INTEGER_TOLERANCE).then_some(r)
}

/// Largest count `n` with `n ≤ a`, honouring the integer guard; `None` when
/// no count satisfies it (`a < 0`).
fn floor_count(a: f64) -> Option<u64> {
    let f = as_integer(a).unwrap_or_else(|| a.floor());
    (f >= 0.0).then_some(f as u64)
}

/// Largest count `n` with `n < a`.
fn below_count(a: f64) -> Option<u64> {
    match as_integer(a) {
        Some(r) => (r >= 1.0).then(|| r as u64 - 1),
        None => floor_count(a),
    }
}

fn cdf_at_count(n: Option<u64>, mean: f64) -> f64 {
    match n {
        None => 0.0,
        Some(_) if mean == 0.0 => 1.0,
        Some(n) => {
            // n + 1 fits in f64 exactly for any count that matters here.
            regularized_upper_gamma(n as f64 + 1.0, mean).expect("order >= 1 and mean >= 0")
        }
    }
}

/// `Pr{X ≤ a}` for `X ~ Poisson(mean)`, with real `a`.
pub fn poisson_cdf(query: PoissonThresholdQuery) -> Result<f64> {
    query.validate()?;
    Ok(cdf_at_count(floor_count(query.threshold), query.mean))
}

/// `Pr{X < a}` for `X ~ Poisson(mean)`, applying the integer / non-integer
/// rule. Negative thresholds give 0.
pub fn poisson_below(query: PoissonThresholdQuery) -> Result<f64> {
    query.validate()?;
    Ok(cdf_at_count(below_count(query.threshold), query.mean))
}

fn check_means(means: &[f64]) -> Result<()> {
    if means.is_empty() {
        return Err(Error::ShapeMismatch("need at least one observation".into()));
    }
    if let Some(m) = means.iter().find(|m| !(**m >= 0.0) || !m.is_finite()) {
        return Err(Error::invalid(format!("observation means must be finite and >= 0, got {m}")));
    }
    Ok(())
}

/// `Pr{max_j (y_j − s_j) ≥ τ}` for independent `y_j ~ Poisson(means[j])`
/// and ISI shifts `s_j`, i.e. `1 − Π_j Pr{y_j < τ + s_j}`.
pub fn max_exceed_prob(means: &[f64], isi_shifts: &[f64], tau: f64) -> Result<f64> {
    check_means(means)?;
    if means.len() != isi_shifts.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} means but {} ISI shifts",
            means.len(),
            isi_shifts.len()
        )));
    }
    if let Some(s) = isi_shifts.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
        return Err(Error::invalid(format!("ISI shifts must be finite and >= 0, got {s}")));
    }
    if !tau.is_finite() {
        return Err(Error::invalid(format!("threshold must be finite, got {tau}")));
    }
    let mut all_below = 1.0;
    for (&mean, &shift) in means.iter().zip(isi_shifts) {
        all_below *= cdf_at_count(below_count(tau + shift), mean);
    }
    Ok(1.0 - all_below)
}

/// `Pr{Σ_j y_j − isi ≥ τ}` for independent Poisson `y_j`: the sum is
/// Poisson with the pooled mean and the threshold shifts to `τ + isi`.
pub fn sum_exceed_prob(means: &[f64], total_isi: f64, tau: f64) -> Result<f64> {
    check_means(means)?;
    if !(total_isi >= 0.0) || !total_isi.is_finite() {
        return Err(Error::invalid(format!("total ISI must be finite and >= 0, got {total_isi}")));
    }
    if !tau.is_finite() {
        return Err(Error::invalid(format!("threshold must be finite, got {tau}")));
    }
    let pooled: f64 = means.iter().sum();
    Ok(1.0 - cdf_at_count(below_count(tau + total_isi), pooled))
}

/// Tabulated `Pr{X ≤ n}` for `n = 0, …, len−1`, for evaluating one mean
/// against many thresholds.
#[derive(Debug, Clone)]
pub struct PoissonCdfTable {
    mean: f64,
    cdf: Vec<f64>,
}

impl PoissonCdfTable {
    /// Tabulates enough entries to answer thresholds up to `max_threshold`.
    pub fn new(mean: f64, max_threshold: f64) -> Self {
        let len = max_threshold.max(0.0).floor() as usize + 2;
        let mut cdf = Vec::with_capacity(len);
        if mean <= SERIES_MAX_MEAN {
            let mut term = (-mean).exp();
            let mut sum = term;
            cdf.push(sum.min(1.0));
            for i in 1..len {
                term *= mean / i as f64;
                sum += term;
                cdf.push(sum.min(1.0));
            }
        } else {
            cdf.extend((0..len).map(|n| cdf_at_count(Some(n as u64), mean)));
        }
        Self { mean, cdf }
    }

    fn at(&self, n: Option<u64>) -> f64 {
        match n {
            None => 0.0,
            Some(n) => match self.cdf.get(n as usize) {
                Some(&v) => v,
                None => cdf_at_count(Some(n), self.mean),
            },
        }
    }

    /// `Pr{X < a}` with the integer / non-integer rule.
    pub fn below(&self, a: f64) -> f64 {
        self.at(below_count(a))
    }

    /// `Pr{X ≤ a}`.
    pub fn at_most(&self, a: f64) -> f64 {
        self.at(floor_count(a))
    }
}
