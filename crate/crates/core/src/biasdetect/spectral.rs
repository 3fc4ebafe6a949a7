//! Autocorrelation and spectral period detection.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{BiasError, SIGNIFICANCE_RATIO};
use crate::scalar::Real;

/// Zero-padding factor applied to the autocorrelation before the period FFT.
const SPECTRAL_OVERSAMPLE: usize = 8;

pub fn bits_to_real<T: Real>(bits: &[bool]) -> Vec<T> {
    bits.iter().map(|&b| if b { T::one() } else { T::zero() }).collect()
}

fn centered<T: Real>(v: &[T]) -> (Vec<T>, T) {
    let n = T::from_count(v.len());
    let mean = v.iter().copied().sum::<T>() / n;
    let c: Vec<T> = v.iter().map(|&x| x - mean).collect();
    let energy = c.iter().map(|&x| x * x).sum::<T>();
    (c, energy)
}

fn is_constant<T: Real>(v: &[T], energy: T) -> bool {
    let scale = v.iter().map(|&x| x * x).sum::<T>();
    energy <= T::epsilon() * scale.max(T::min_positive_value())
}

/// Mean-removed, biased-normalized autocorrelation for lags `0..=N/2`,
/// computed through the power spectrum.
pub fn autocorrelation<T: Real>(v: &[T]) -> Result<Vec<T>, BiasError> {
    let n = v.len();
    if n < 4 {
        return Err(BiasError::InsufficientData(format!("autocorrelation needs at least 4 samples, got {n}")));
    }
    let (c, energy) = centered(v);
    if is_constant(v, energy) {
        return Err(BiasError::ConstantInput);
    }
    let len = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<T>::new();
    let forward = planner.plan_fft_forward(len);
    let inverse = planner.plan_fft_inverse(len);
    let mut buf: Vec<Complex<T>> = c.iter().map(|&x| Complex::new(x, T::zero())).collect();
    buf.resize(len, Complex::new(T::zero(), T::zero()));
    forward.process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex::new(z.norm_sqr(), T::zero());
    }
    inverse.process(&mut buf);
    let zero_lag = buf[0].re;
    Ok(buf[..=n / 2].iter().map(|z| z.re / zero_lag).collect())
}

pub fn autocorrelation_bits<T: Real>(bits: &[bool]) -> Result<Vec<T>, BiasError> {
    autocorrelation(&bits_to_real::<T>(bits))
}

fn median<T: Real>(mut v: Vec<T>) -> T {
    if v.is_empty() {
        return T::zero();
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / T::lit(2.0)
    }
}

/// True when `peak` exceeds the significance ratio times the median of `rest`.
pub(crate) fn is_significant<T: Real>(peak: T, rest: Vec<T>) -> bool {
    peak > T::lit(SIGNIFICANCE_RATIO) * median(rest)
}

/// Spectrum of an autocorrelation sequence, used for plotting and period
/// detection. Returns `(transform_length, magnitudes for bins 0..=L/2)`.
pub fn autocorrelation_spectrum<T: Real>(r: &[T]) -> (usize, Vec<T>) {
    let len = r.len().next_power_of_two() * SPECTRAL_OVERSAMPLE;
    let mut planner = FftPlanner::<T>::new();
    let fft = planner.plan_fft_forward(len);
    let mut buf: Vec<Complex<T>> = r.iter().map(|&x| Complex::new(x, T::zero())).collect();
    buf.resize(len, Complex::new(T::zero(), T::zero()));
    fft.process(&mut buf);
    (len, buf[..=len / 2].iter().map(|z| z.norm()).collect())
}

/// Bias-pattern width from the dominant non-DC frequency of an
/// autocorrelation sequence `r` of a length-`n` vector.
pub fn dominant_period<T: Real>(r: &[T], n: usize) -> Result<usize, BiasError> {
    if r.len() < 3 || n < 4 {
        return Err(BiasError::InsufficientData("autocorrelation too short".into()));
    }
    let (len, mags) = autocorrelation_spectrum(r);
    // bins whose period lies in [2, n/2]
    let lo = (2 * len).div_ceil(n).max(1);
    let hi = len / 2;
    if lo > hi {
        return Err(BiasError::NoPeriodicity);
    }
    let (peak_bin, peak) = (lo..=hi)
        .map(|k| (k, mags[k]))
        .fold((lo, T::neg_infinity()), |best, cur| if cur.1 > best.1 { cur } else { best });
    let rest: Vec<T> = (1..=hi).filter(|&k| k != peak_bin).map(|k| mags[k]).collect();
    if !is_significant(peak, rest) {
        return Err(BiasError::NoPeriodicity);
    }
    let period = (len as f64 / peak_bin as f64).round() as usize;
    if period < 2 || period > n / 2 {
        return Err(BiasError::NoPeriodicity);
    }
    Ok(period)
}

/// Normalized cross-correlation of the mean-removed inputs, truncated to the
/// shorter length, for lags `-max_lag..=max_lag` (index `lag + max_lag`).
/// Positive lag pairs `a[i]` with `b[i + lag]`.
pub fn cross_correlation<T: Real>(a: &[T], b: &[T], max_lag: usize) -> Result<Vec<T>, BiasError> {
    let n = a.len().min(b.len());
    if n < 2 {
        return Err(BiasError::InsufficientData("cross-correlation needs two samples".into()));
    }
    let (ca, ea) = centered(&a[..n]);
    let (cb, eb) = centered(&b[..n]);
    if is_constant(&a[..n], ea) || is_constant(&b[..n], eb) {
        return Err(BiasError::ConstantInput);
    }
    let norm = (ea * eb).sqrt();
    let max_lag = max_lag.min(n - 1);
    let out = (0..=2 * max_lag)
        .map(|idx| {
            let lag = idx as isize - max_lag as isize;
            let s: T = if lag >= 0 {
                let l = lag as usize;
                ca[..n - l].iter().zip(&cb[l..]).map(|(&x, &y)| x * y).sum()
            } else {
                let l = (-lag) as usize;
                ca[l..].iter().zip(&cb[..n - l]).map(|(&x, &y)| x * y).sum()
            };
            s / norm
        })
        .collect();
    Ok(out)
}
