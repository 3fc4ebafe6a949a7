//! Response quality metrics: fractional Hamming weight, within-class
//! Hamming distance, masked Hamming weight and min-entropy by one-probability.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::biasdetect::concat_readout;
use crate::scalar::Real;
use crate::seed::StreamKey;
use crate::simchip::{power_up_with_noise, sample_device, DesignEntry, DeviceArray, ProcessParams, SimError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("value {0} outside its allowed range")]
    OutOfRange(f64),
    #[error("noise calibration failed: {0}")]
    CalibrationFailed(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

fn ratio<T: Real>(count: usize, len: usize) -> T {
    T::from_count(count) / T::from_count(len)
}

pub fn fhw<T: Real>(bits: &[bool]) -> Result<T, MetricsError> {
    if bits.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(ratio(bits.iter().filter(|&&b| b).count(), bits.len()))
}

pub fn wchd<T: Real>(enrollment: &[bool], reconstruction: &[bool]) -> Result<T, MetricsError> {
    if enrollment.len() != reconstruction.len() {
        return Err(MetricsError::LengthMismatch(enrollment.len(), reconstruction.len()));
    }
    if enrollment.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let diff = enrollment.iter().zip(reconstruction).filter(|(a, b)| a != b).count();
    Ok(ratio(diff, enrollment.len()))
}

/// Hamming weight of `response XOR template`, with the template tiled over
/// whole periods only; a trailing partial period is not counted.
pub fn mhw<T: Real>(response: &[bool], template: &[bool]) -> Result<T, MetricsError> {
    if template.is_empty() || response.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let whole = if response.len() >= template.len() {
        response.len() / template.len() * template.len()
    } else {
        response.len()
    };
    let ones = response[..whole]
        .iter()
        .zip(template.iter().cycle())
        .filter(|(r, t)| r != t)
        .count();
    Ok(ratio(ones, whole))
}

/// `-log2(max(p, 1 - p))`, per bit.
pub fn min_entropy_by_one_probability<T: Real>(p: T) -> Result<T, MetricsError> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(MetricsError::OutOfRange(p.as_f64()));
    }
    let h = -(p.max(T::one() - p)).log2();
    Ok(h.max(T::zero()))
}

/// Entropy endpoints for an MHW interval: the low end comes from the MHW
/// endpoint farther from 0.5, the high end is 1 when the interval spans 0.5.
pub fn entropy_range<T: Real>(mhw_min: T, mhw_max: T) -> Result<(T, T), MetricsError> {
    let half = T::lit(0.5);
    let far = if (mhw_min - half).abs() >= (mhw_max - half).abs() { mhw_min } else { mhw_max };
    let low = min_entropy_by_one_probability(far)?;
    let high = if mhw_min <= half && half <= mhw_max {
        T::one()
    } else {
        let near = if far == mhw_min { mhw_max } else { mhw_min };
        min_entropy_by_one_probability(near)?
    };
    Ok((low, high))
}

/// One result-table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub design: String,
    pub wchd_min: f64,
    pub wchd_max: f64,
    pub mhw_min: f64,
    pub mhw_max: f64,
    pub entropy_min: f64,
    pub entropy_max: f64,
}

impl MetricsRow {
    pub fn new(design: impl Into<String>, wchd: (f64, f64), mhw: (f64, f64)) -> Result<Self, MetricsError> {
        for (lo, hi) in [wchd, mhw] {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return Err(MetricsError::OutOfRange(if (0.0..=1.0).contains(&lo) { hi } else { lo }));
            }
        }
        let (entropy_min, entropy_max) = entropy_range(mhw.0, mhw.1)?;
        Ok(MetricsRow {
            design: design.into(),
            wchd_min: wchd.0,
            wchd_max: wchd.1,
            mhw_min: mhw.0,
            mhw_max: mhw.1,
            entropy_min,
            entropy_max,
        })
    }

    /// Checks that the stored entropy endpoints follow from the MHW endpoints.
    pub fn entropy_consistent(&self, tolerance: f64) -> bool {
        entropy_range(self.mhw_min, self.mhw_max).is_ok_and(|(lo, hi)| {
            (lo - self.entropy_min).abs() <= tolerance && (hi - self.entropy_max).abs() <= tolerance
        })
    }
}

/// Fixed seed of the calibration Monte-Carlo; every bisection step reuses
/// the same chips and power-up streams.
const CALIBRATION_SEED: u64 = 0x5EED_CA11_B8A7_E000;
/// Accepted distance between achieved and target mean WCHD.
pub const CALIBRATION_TOLERANCE: f64 = 0.01;

struct Probe<T> {
    devices: Vec<DeviceArray<T>>,
}

impl<T: Real> Probe<T> {
    fn mean_wchd(&self, sigma: T) -> T {
        let key = StreamKey::new(CALIBRATION_SEED).with_label("cycles");
        let per_pair: Vec<T> = self
            .devices
            .par_iter()
            .enumerate()
            .map(|(i, dev)| {
                let k = key.with(i as u64);
                let enroll = concat_readout(&power_up_with_noise(dev, sigma, k.with(0).value()));
                let recon = concat_readout(&power_up_with_noise(dev, sigma, k.with(1).value()));
                wchd(&enroll, &recon).expect("equal, non-empty readings")
            })
            .collect();
        per_pair.iter().copied().sum::<T>() / T::from_count(per_pair.len())
    }
}

/// Noise level whose Monte-Carlo mean WCHD over `budget` enrollment /
/// reconstruction pairs of `probe_design` lands on `target_wchd`. Bisection
/// assumes WCHD grows monotonically with noise.
pub fn calibrate_noise<T: Real>(
    target_wchd: T,
    params: &ProcessParams<T>,
    probe_design: &DesignEntry,
    budget: usize,
) -> Result<T, MetricsError> {
    if !(target_wchd >= T::zero() && target_wchd < T::lit(0.5)) {
        return Err(MetricsError::OutOfRange(target_wchd.as_f64()));
    }
    if target_wchd == T::zero() {
        return Ok(T::zero());
    }
    if budget == 0 {
        return Err(MetricsError::CalibrationFailed("zero Monte-Carlo budget".into()));
    }
    let chips = StreamKey::new(CALIBRATION_SEED).with_label("chips");
    let devices = (0..budget)
        .into_par_iter()
        .map(|i| sample_device(probe_design, params, chips.with(i as u64).value()))
        .collect::<Result<Vec<_>, _>>()?;
    let probe = Probe { devices };

    let mut lo = T::zero();
    let mut hi = params.sigma_mismatch * T::lit(0.05);
    let mut doublings = 0;
    while probe.mean_wchd(hi) < target_wchd {
        lo = hi;
        hi = hi * T::lit(2.0);
        doublings += 1;
        if doublings > 40 {
            return Err(MetricsError::CalibrationFailed(format!(
                "no noise level up to {hi} reaches mean WCHD {target_wchd}"
            )));
        }
    }
    let tight = T::lit(CALIBRATION_TOLERANCE / 8.0);
    let mut best = hi;
    for _ in 0..60 {
        let mid = (lo + hi) / T::lit(2.0);
        let achieved = probe.mean_wchd(mid);
        best = mid;
        if (achieved - target_wchd).abs() <= tight {
            break;
        }
        if achieved < target_wchd {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let achieved = probe.mean_wchd(best);
    if (achieved - target_wchd).abs() > T::lit(CALIBRATION_TOLERANCE) {
        return Err(MetricsError::CalibrationFailed(format!(
            "closest noise {best} gives mean WCHD {achieved}, target {target_wchd}"
        )));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{Geometry, Orientation, PlacedMacro, SpeedClass};
    use crate::simchip::{power_up, Floorplan};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn fhw_examples() {
        assert_eq!(fhw::<f64>(&bits("0000")).unwrap(), 0.0);
        assert_eq!(fhw::<f64>(&bits("1111")).unwrap(), 1.0);
        assert_eq!(fhw::<f32>(&bits("1010")).unwrap(), 0.5);
        assert_eq!(fhw::<f64>(&[]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn wchd_examples() {
        let a = bits("10110010");
        let not_a: Vec<bool> = a.iter().map(|b| !b).collect();
        assert_eq!(wchd::<f64>(&a, &a).unwrap(), 0.0);
        assert_eq!(wchd::<f64>(&a, &not_a).unwrap(), 1.0);
        let mut long = vec![false; 8192];
        let zeros = long.clone();
        long[100] = true;
        assert_eq!(wchd::<f64>(&zeros, &long).unwrap(), 1.0 / 8192.0);
        assert_eq!(wchd::<f64>(&a, &a[..4]), Err(MetricsError::LengthMismatch(8, 4)));
        assert_eq!(wchd::<f64>(&[], &[]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn mhw_examples() {
        let t = bits("0011");
        let tiled: Vec<bool> = t.iter().copied().cycle().take(64).collect();
        let inv: Vec<bool> = tiled.iter().map(|b| !b).collect();
        assert_eq!(mhw::<f64>(&tiled, &t).unwrap(), 0.0);
        assert_eq!(mhw::<f64>(&inv, &t).unwrap(), 1.0);
        // trailing partial period is ignored
        let mut r = tiled.clone();
        r.extend([true, true]);
        assert_eq!(mhw::<f64>(&r, &t).unwrap(), 0.0);
        assert_eq!(mhw::<f64>(&r, &[]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn mhw_of_unbiased_response_is_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let r: Vec<bool> = (0..1 << 20).map(|_| rng.random()).collect();
        let t = bits("00000000000000001111111111111111");
        let m: f64 = mhw(&r, &t).unwrap();
        assert!((m - 0.5).abs() < 0.01, "{m}");
    }

    #[test]
    fn entropy_examples() {
        let h = |p: f64| min_entropy_by_one_probability(p).unwrap();
        assert_eq!(h(0.5), 1.0);
        assert!((h(0.622) - 0.685).abs() < 1e-3);
        assert!((h(0.564) - 0.826).abs() < 1e-3);
        assert!((h(0.575) - 0.798).abs() < 1e-3);
        assert_eq!(h(0.0), 0.0);
        assert_eq!(h(1.0), 0.0);
        assert!(matches!(min_entropy_by_one_probability(1.2f64), Err(MetricsError::OutOfRange(_))));
        assert!(min_entropy_by_one_probability(f64::NAN).is_err());
    }

    #[test]
    fn table_rows_reproduce_entropy_floor() {
        let rows = [
            (0.391, 0.622, 0.685),
            (0.440, 0.564, 0.826),
            (0.430, 0.539, 0.811),
            (0.435, 0.541, 0.824),
            (0.430, 0.575, 0.798),
            (0.390, 0.580, 0.713),
        ];
        for (lo, hi, expected) in rows {
            let row = MetricsRow::new("p", (0.05, 0.09), (lo, hi)).unwrap();
            assert!((row.entropy_min - expected).abs() <= 1e-3, "{lo}-{hi}: {}", row.entropy_min);
            assert_eq!(row.entropy_max, 1.0);
            assert!(row.entropy_consistent(1e-12));
        }
        let one_sided = MetricsRow::new("q", (0.0, 0.1), (0.40, 0.45)).unwrap();
        assert!((one_sided.entropy_max - min_entropy_by_one_probability(0.45).unwrap()).abs() < 1e-12);
        assert!(MetricsRow::new("r", (0.1, 0.05), (0.4, 0.5)).is_err());
    }

    proptest! {
        #[test]
        fn wchd_is_a_metric(a in prop::collection::vec(any::<bool>(), 1..64), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<bool> = a.iter().map(|_| rng.random()).collect();
            let c: Vec<bool> = a.iter().map(|_| rng.random()).collect();
            let d = |x: &[bool], y: &[bool]| wchd::<f64>(x, y).unwrap();
            prop_assert_eq!(d(&a, &b), d(&b, &a));
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        }

        #[test]
        fn entropy_is_symmetric(p in 0.0f64..=1.0) {
            let h = min_entropy_by_one_probability(p).unwrap();
            prop_assert!((h - min_entropy_by_one_probability(1.0 - p).unwrap()).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&h));
            if (p - 0.5).abs() > 1e-9 {
                prop_assert!(h < 1.0);
            }
        }

        #[test]
        fn zero_template_mask_is_plain_weight(x in prop::collection::vec(any::<bool>(), 1..200), tlen in 1usize..10) {
            let t = vec![false; tlen];
            let expected: f64 = if x.len() >= tlen {
                fhw(&x[..x.len() / tlen * tlen]).unwrap()
            } else {
                fhw(&x).unwrap()
            };
            prop_assert_eq!(mhw::<f64>(&x, &t).unwrap(), expected);
            prop_assert_eq!(mhw::<f64>(&x, &[false]).unwrap(), fhw::<f64>(&x).unwrap());
        }
    }

    fn probe() -> DesignEntry {
        Floorplan::default_floorplan().get("P1_a").unwrap().clone()
    }

    /// Independent Monte-Carlo over fresh chips and cycles.
    fn wchd_oracle(sigma: f64) -> f64 {
        let params = ProcessParams::<f64>::uncalibrated().with_noise(sigma);
        let e = probe();
        let mut total = 0.0;
        for chip in 0..10u64 {
            let dev = sample_device(&e, &params, 1000 + chip).unwrap();
            let enroll = concat_readout(&power_up(&dev, chip * 100));
            for cycle in 1..10u64 {
                total += wchd::<f64>(&enroll, &concat_readout(&power_up(&dev, chip * 100 + cycle))).unwrap();
            }
        }
        total / 90.0
    }

    #[test]
    fn calibration_hits_target() {
        let params = ProcessParams::<f64>::uncalibrated();
        assert_eq!(calibrate_noise(0.0, &params, &probe(), 10).unwrap(), 0.0);
        let sigma = calibrate_noise(0.065, &params, &probe(), 40).unwrap();
        let achieved = wchd_oracle(sigma);
        assert!((0.055..=0.075).contains(&achieved), "sigma {sigma} gives {achieved}");
        let low = calibrate_noise(0.05, &params, &probe(), 40).unwrap();
        let high = calibrate_noise(0.09, &params, &probe(), 40).unwrap();
        assert!(high > low);
    }

    #[test]
    fn calibration_errors() {
        let params = ProcessParams::<f64>::uncalibrated();
        assert!(matches!(calibrate_noise(0.6, &params, &probe(), 10), Err(MetricsError::OutOfRange(_))));
        assert!(matches!(calibrate_noise(0.06, &params, &probe(), 0), Err(MetricsError::CalibrationFailed(_))));
    }

    #[test]
    fn calibration_in_f32() {
        let e = DesignEntry {
            name: "small".into(),
            placed: PlacedMacro::new(Geometry::new(256, 32, 8, SpeedClass::Slow).unwrap(), Orientation::R0, (0, 0)),
            pattern: "0(16)1(16)".parse().unwrap(),
        };
        let sigma: f32 = calibrate_noise(0.08f32, &ProcessParams::uncalibrated(), &e, 20).unwrap();
        assert!(sigma > 0.0);
    }
}
