use rayon::prelude::*;

use super::spectral::{autocorrelation, autocorrelation_bits, cross_correlation, dominant_period, is_significant};
use super::{BiasError, MAX_PERIOD};
use crate::scalar::{signum_i8, Real};
use crate::simchip::Snapshot;

/// Correlation at lag zero above which two profiles are taken to share
/// structure even without a dominant peak or a detectable period.
const SHARED_STRUCTURE: f64 = 0.5;

/// Snapshot bits in readout order (word by word, bit 0 first).
pub fn concat_readout(s: &Snapshot) -> Vec<bool> {
    let w = s.width();
    let mut out = Vec::with_capacity(s.depth() * w);
    for &word in s.words() {
        out.extend((0..w).map(|b| (word >> b) & 1 == 1));
    }
    out
}

/// Per-position one-probability of a design across chips and cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasProfile<T> {
    pub design: String,
    pub probabilities: Vec<T>,
}

impl<T: Real> BiasProfile<T> {
    pub fn new(design: impl Into<String>, probabilities: Vec<T>) -> Self {
        BiasProfile { design: design.into(), probabilities }
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Pointwise `1 - p`.
    pub fn reflected(&self) -> Self {
        BiasProfile {
            design: self.design.clone(),
            probabilities: self.probabilities.iter().map(|&p| T::one() - p).collect(),
        }
    }
}

/// Streaming one-count per readout position.
#[derive(Debug, Clone)]
pub struct ProfileAccumulator {
    ones: Vec<u32>,
    readings: u32,
}

impl ProfileAccumulator {
    pub fn new(len: usize) -> Self {
        ProfileAccumulator { ones: vec![0; len], readings: 0 }
    }

    pub fn add(&mut self, bits: &[bool]) {
        assert_eq!(bits.len(), self.ones.len(), "reading length differs from profile length");
        for (c, &b) in self.ones.iter_mut().zip(bits) {
            *c += u32::from(b);
        }
        self.readings += 1;
    }

    pub fn readings(&self) -> u32 {
        self.readings
    }

    pub fn finish<T: Real>(&self, design: impl Into<String>) -> BiasProfile<T> {
        let n = T::from_count(self.readings.max(1) as usize);
        BiasProfile::new(design, self.ones.iter().map(|&c| T::from_count(c as usize) / n).collect())
    }
}

/// Majority bit per phase of `period` across all vectors; ties give 0.
pub fn extract_template<I, V>(vectors: I, period: usize) -> Result<Vec<bool>, BiasError>
where
    I: IntoIterator<Item = V>,
    V: AsRef<[bool]>,
{
    if period < 2 {
        return Err(BiasError::InsufficientData(format!("period {period} is shorter than 2")));
    }
    let mut ones = vec![0usize; period];
    let mut totals = vec![0usize; period];
    for v in vectors {
        for (i, &b) in v.as_ref().iter().enumerate() {
            let phase = i % period;
            totals[phase] += 1;
            ones[phase] += usize::from(b);
        }
    }
    let fewest = totals.iter().copied().min().unwrap_or(0);
    if fewest < 8 {
        return Err(BiasError::InsufficientData(format!(
            "only {fewest} samples for some phase of period {period}, need 8"
        )));
    }
    Ok(ones.iter().zip(&totals).map(|(&o, &t)| 2 * o > t).collect())
}

/// Sign of the leading run of a profile's period-folded deviation from
/// its mean: -1 when readout position 0 sits in a zero-biased run, +1 when
/// it sits in a one-biased run. `None` without a significant period.
pub fn phase_polarity<T: Real>(values: &[T]) -> Option<i8> {
    let r = autocorrelation(values).ok()?;
    let period = dominant_period(&r, values.len()).ok()?;
    let mean = values.iter().copied().sum::<T>() / T::from_count(values.len());
    let mut folded = vec![T::zero(); period];
    for (i, &v) in values.iter().enumerate() {
        folded[i % period] = folded[i % period] + (v - mean);
    }
    let lead = signum_i8(folded[0]);
    if lead == 0 {
        return None;
    }
    let run: T = folded.iter().copied().take_while(|&f| signum_i8(f) == lead).sum();
    Some(signum_i8(run))
}

/// Bias direction of `profile` relative to `baseline`: +1 same, -1 opposite,
/// 0 undetermined.
///
/// A dominant lag-zero cross-correlation decides directly. Otherwise, and in
/// particular for periodic templates where a half-period shift is itself a
/// negation, each profile is anchored at readout position 0 and the
/// polarities of their leading runs are compared.
pub fn bias_direction<T: Real>(profile: &BiasProfile<T>, baseline: &BiasProfile<T>) -> Result<i8, BiasError> {
    let (p, b) = (&profile.probabilities, &baseline.probabilities);
    let xc = cross_correlation(p, b, MAX_PERIOD)?;
    let mid = (xc.len() - 1) / 2;
    let c0 = xc[mid];
    let rest: Vec<T> = xc.iter().enumerate().filter(|&(i, _)| i != mid).map(|(_, c)| c.abs()).collect();
    if !rest.is_empty() && is_significant(c0.abs(), rest) {
        return Ok(signum_i8(c0));
    }
    if let (Some(a), Some(z)) = (phase_polarity(p), phase_polarity(b)) {
        return Ok(a * z);
    }
    if c0.abs() >= T::lit(SHARED_STRUCTURE) {
        return Ok(signum_i8(c0));
    }
    Ok(0)
}

/// Index of the reading with the highest autocorrelation peak over lags
/// `2..=MAX_PERIOD`.
pub fn highest_autocorrelation<V: AsRef<[bool]> + Sync>(readings: &[V]) -> Option<usize> {
    let scores: Vec<f64> = readings
        .par_iter()
        .map(|v| {
            autocorrelation_bits::<f64>(v.as_ref()).map_or(f64::NEG_INFINITY, |r| {
                r.iter().skip(2).take(MAX_PERIOD - 1).copied().fold(f64::NEG_INFINITY, f64::max)
            })
        })
        .collect();
    scores
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &s)| match best {
            Some((_, bs)) if bs >= s => best,
            _ => Some((i, s)),
        })
        .map(|(i, _)| i)
}
