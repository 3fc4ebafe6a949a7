//! Synthetic SRAM-PUF chips.
//!
//! A cell powers up to 1 when its static threshold mismatch, the design's
//! bias imprint and a fresh noise sample sum to a positive value. The imprint
//! follows the design's run-length pattern in readout order and is signed by
//! the projection of the macro's local +x axis onto the die doping gradient.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::biasdetect::RunLengthPattern;
use crate::layout::{Geometry, LayoutError, Orientation, PlacedMacro, SpeedClass};
use crate::scalar::{signum_i8, Real};
use crate::seed::StreamKey;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("doping gradient is orthogonal to the local x axis of orientation {0}")]
    DegenerateGradient(Orientation),
    #[error("invalid process parameters: {0}")]
    InvalidParams(String),
    #[error("invalid floorplan: {0}")]
    InvalidFloorplan(String),
    #[error(transparent)]
    Layout(#[from] LayoutError),
}

/// Model knobs, in arbitrary voltage-like units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessParams<T> {
    pub sigma_mismatch: T,
    pub sigma_noise: T,
    pub beta: T,
    pub gradient: (T, T),
}

impl<T: Real> ProcessParams<T> {
    /// Default mismatch, imprint and gradient with noise still at zero;
    /// use [`crate::metrics::calibrate_noise`] to set `sigma_noise`.
    pub fn uncalibrated() -> Self {
        ProcessParams {
            sigma_mismatch: T::one(),
            sigma_noise: T::zero(),
            beta: T::lit(0.25),
            gradient: (T::one(), T::one()),
        }
    }

    pub fn with_noise(self, sigma_noise: T) -> Self {
        ProcessParams { sigma_noise, ..self }
    }

    pub fn with_beta(self, beta: T) -> Self {
        ProcessParams { beta, ..self }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let finite = [self.sigma_mismatch, self.sigma_noise, self.beta, self.gradient.0, self.gradient.1]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(SimError::InvalidParams("parameters must be finite".into()));
        }
        if self.sigma_mismatch <= T::zero() {
            return Err(SimError::InvalidParams("sigma_mismatch must be positive".into()));
        }
        if self.sigma_noise < T::zero() || self.beta < T::zero() {
            return Err(SimError::InvalidParams("sigma_noise and beta must be non-negative".into()));
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> ProcessParams<U> {
        let c = |x: T| U::lit(x.as_f64());
        ProcessParams {
            sigma_mismatch: c(self.sigma_mismatch),
            sigma_noise: c(self.sigma_noise),
            beta: c(self.beta),
            gradient: (c(self.gradient.0), c(self.gradient.1)),
        }
    }
}

impl<T: Real> Default for ProcessParams<T> {
    fn default() -> Self {
        Self::uncalibrated()
    }
}

/// Sign of the die gradient projected on the macro's local +x axis.
pub fn orientation_sign<T: Real>(params: &ProcessParams<T>, o: Orientation) -> Result<i8, SimError> {
    let (ux, uy) = o.apply((1, 0));
    let dot = params.gradient.0 * T::lit(ux as f64) + params.gradient.1 * T::lit(uy as f64);
    match signum_i8(dot) {
        0 => Err(SimError::DegenerateGradient(o)),
        s => Ok(s),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignEntry {
    pub name: String,
    pub placed: PlacedMacro,
    pub pattern: RunLengthPattern,
}

impl DesignEntry {
    pub fn geometry(&self) -> &Geometry {
        &self.placed.geometry
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Floorplan {
    designs: Vec<DesignEntry>,
}

impl Floorplan {
    pub fn new(designs: Vec<DesignEntry>) -> Result<Self, SimError> {
        let mut seen = HashSet::new();
        for d in &designs {
            if d.name.is_empty() || !d.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(SimError::InvalidFloorplan(format!("bad design name `{}`", d.name)));
            }
            if !seen.insert(d.name.as_str()) {
                return Err(SimError::InvalidFloorplan(format!("duplicate design name `{}`", d.name)));
            }
        }
        Ok(Floorplan { designs })
    }

    pub fn designs(&self) -> &[DesignEntry] {
        &self.designs
    }

    pub fn get(&self, name: &str) -> Option<&DesignEntry> {
        self.designs.iter().find(|d| d.name == name)
    }

    /// Bits in one reading of every design of one chip.
    pub fn bits_per_reading(&self) -> usize {
        self.designs.iter().map(|d| d.geometry().cells()).sum()
    }

    /// Eleven macros: P1 is the fast 128x64 memory, the rest slow; names,
    /// orientations and bias patterns follow the fabricated test chip.
    pub fn default_floorplan() -> Self {
        use Orientation::*;
        type Row = (&'static str, usize, usize, usize, SpeedClass, Orientation, &'static str, (i64, i64));
        let rows: [Row; 11] = [
            ("P1_a", 128, 64, 4, SpeedClass::Fast, R0, "0(32)1(64)0(64)", (0, 0)),
            ("P1_b", 128, 64, 4, SpeedClass::Fast, R0, "0(32)1(64)0(64)", (400, 0)),
            ("P2_a", 1024, 32, 8, SpeedClass::Slow, R90, "0(32)1(64)0(64)", (1200, 0)),
            ("P2_b", 1024, 32, 8, SpeedClass::Slow, R270, "0(32)1(64)0(64)", (1500, 512)),
            ("P3", 1024, 32, 16, SpeedClass::Slow, R270, "0(29)1(29)", (1800, 1024)),
            ("P4_a", 512, 32, 8, SpeedClass::Slow, MX, "0(16)1(16)", (0, 700)),
            ("P4_b", 512, 32, 8, SpeedClass::Slow, MX, "0(16)1(16)", (300, 700)),
            ("P4_c", 512, 32, 8, SpeedClass::Slow, MX, "0(16)1(16)", (600, 700)),
            ("P5_a", 1024, 32, 16, SpeedClass::Slow, R270, "0(16)1(16)", (0, 1300)),
            ("P5_b", 1024, 32, 16, SpeedClass::Slow, MY90, "0(16)1(16)", (600, 1300)),
            ("P6", 1024, 32, 8, SpeedClass::Slow, R0, "0(16)1(32)0(32)", (1200, 1300)),
        ];
        let designs = rows
            .into_iter()
            .map(|(name, d, w, m, class, o, pat, origin)| DesignEntry {
                name: name.to_string(),
                placed: PlacedMacro::new(Geometry::new(d, w, m, class).expect("valid default geometry"), o, origin),
                pattern: pat.parse().expect("valid default pattern"),
            })
            .collect();
        Floorplan::new(designs).expect("valid default floorplan")
    }
}

/// Analog state of one macro on one chip.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceArray<T> {
    design: DesignEntry,
    chip_seed: u64,
    sigma_noise: T,
    mismatch: Vec<T>,
    imprint: Vec<T>,
}

impl<T: Real> DeviceArray<T> {
    pub fn design(&self) -> &DesignEntry {
        &self.design
    }

    pub fn chip_seed(&self) -> u64 {
        self.chip_seed
    }

    pub fn sigma_noise(&self) -> T {
        self.sigma_noise
    }

    /// Static mismatch, indexed by readout position `addr * width + bit`.
    pub fn mismatch(&self) -> &[T] {
        &self.mismatch
    }

    pub fn imprint(&self) -> &[T] {
        &self.imprint
    }
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn sample_device<T: Real>(entry: &DesignEntry, params: &ProcessParams<T>, chip_seed: u64) -> Result<DeviceArray<T>, SimError> {
    params.validate()?;
    let sign = T::lit(f64::from(orientation_sign(params, entry.placed.orientation)?));
    let g = entry.geometry();
    let key = StreamKey::new(chip_seed).with_label(&entry.name).with_label("mismatch");
    let mut mismatch = Vec::with_capacity(g.cells());
    for addr in 0..g.depth() {
        let mut rng = key.with(addr as u64).rng();
        mismatch.extend((0..g.width()).map(|_| params.sigma_mismatch * T::lit(normal(&mut rng))));
    }
    let imprint = (0..g.cells())
        .map(|k| sign * params.beta * T::lit(f64::from(entry.pattern.pattern_value(k))))
        .collect();
    Ok(DeviceArray {
        design: entry.clone(),
        chip_seed,
        sigma_noise: params.sigma_noise,
        mismatch,
        imprint,
    })
}

/// One power-up reading: `depth` words, bit `b` of word `a` at bit `b` of
/// the `u64`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Snapshot {
    width: usize,
    words: Vec<u64>,
    pub chip_id: u32,
    pub cycle: u32,
}

impl Snapshot {
    pub fn from_words(width: usize, words: Vec<u64>) -> Result<Self, LayoutError> {
        if width == 0 || width > 64 {
            return Err(LayoutError::BitOutOfRange { bit: width, width: 64 });
        }
        let mask = word_mask(width);
        if let Some(addr) = words.iter().position(|&w| w & !mask != 0) {
            return Err(LayoutError::BitOutOfRange { bit: 64 - words[addr].leading_zeros() as usize - 1, width });
        }
        Ok(Snapshot { width, words, chip_id: 0, cycle: 0 })
    }

    pub fn zeros(depth: usize, width: usize) -> Self {
        Snapshot::from_words(width, vec![0; depth]).expect("zero words fit any width")
    }

    pub fn labeled(mut self, chip_id: u32, cycle: u32) -> Self {
        self.chip_id = chip_id;
        self.cycle = cycle;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn word(&self, addr: usize) -> Result<u64, LayoutError> {
        self.words.get(addr).copied().ok_or(LayoutError::AddressOutOfRange { addr, depth: self.depth() })
    }

    pub fn set_word(&mut self, addr: usize, word: u64) -> Result<(), LayoutError> {
        let depth = self.depth();
        let mask = word_mask(self.width);
        let slot = self.words.get_mut(addr).ok_or(LayoutError::AddressOutOfRange { addr, depth })?;
        *slot = word & mask;
        Ok(())
    }

    pub fn bit(&self, addr: usize, bit: usize) -> Result<bool, LayoutError> {
        if bit >= self.width {
            return Err(LayoutError::BitOutOfRange { bit, width: self.width });
        }
        Ok((self.word(addr)? >> bit) & 1 == 1)
    }
}

pub(crate) fn word_mask(width: usize) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Bits `0..w` of word `addr`.
pub fn read_word(s: &Snapshot, addr: usize) -> Result<Vec<bool>, LayoutError> {
    let word = s.word(addr)?;
    Ok((0..s.width).map(|b| (word >> b) & 1 == 1).collect())
}

pub fn power_up<T: Real>(dev: &DeviceArray<T>, cycle_seed: u64) -> Snapshot {
    power_up_with_noise(dev, dev.sigma_noise, cycle_seed)
}

pub(crate) fn power_up_with_noise<T: Real>(dev: &DeviceArray<T>, sigma_noise: T, cycle_seed: u64) -> Snapshot {
    let g = dev.design.geometry();
    let w = g.width();
    let key = StreamKey::new(cycle_seed).with_label(&dev.design.name).with_label("noise");
    let noisy = sigma_noise > T::zero();
    let words = (0..g.depth())
        .map(|addr| {
            let mut rng = noisy.then(|| key.with(addr as u64).rng());
            let base = addr * w;
            (0..w).fold(0u64, |word, b| {
                let mut v = dev.mismatch[base + b] + dev.imprint[base + b];
                if let Some(rng) = rng.as_mut() {
                    v = v + sigma_noise * T::lit(normal(rng));
                }
                if v > T::zero() {
                    word | (1 << b)
                } else {
                    word
                }
            })
        })
        .collect();
    Snapshot { width: w, words, chip_id: 0, cycle: 0 }
}
