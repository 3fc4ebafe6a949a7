//! Per-design evaluation of a [`Dataset`]: reliability, bias profile,
//! pattern width and template, masked Hamming weight and bias direction.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::biasdetect::{
    autocorrelation, bias_direction, bits_to_real, concat_readout, dominant_period, extract_template,
    highest_autocorrelation, BiasError, BiasProfile, BiasReport, ProfileAccumulator,
};
use crate::dataset::{Dataset, DesignReadings};
use crate::layout::Orientation;
use crate::metrics::{fhw, mhw, wchd, MetricsError, MetricsRow};

pub const DEFAULT_BASELINE: &str = "P1_a";

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("baseline design {0} not present in the data")]
    MissingBaseline(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Bias(#[from] BiasError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Which vector the period and direction are derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProfileSource {
    /// Per-position one-probability over all chips and cycles.
    #[default]
    Averaged,
    /// The single first-cycle reading with the strongest autocorrelation.
    HighestAutocorrelation,
}

impl fmt::Display for ProfileSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileSource::Averaged => "averaged",
            ProfileSource::HighestAutocorrelation => "highest-autocorrelation",
        })
    }
}

impl FromStr for ProfileSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "averaged" => Ok(ProfileSource::Averaged),
            "highest-autocorrelation" => Ok(ProfileSource::HighestAutocorrelation),
            other => Err(format!("unknown profile source `{other}`")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub baseline: String,
    pub profile_source: ProfileSource,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions { baseline: DEFAULT_BASELINE.to_string(), profile_source: ProfileSource::Averaged }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChipStats {
    pub chip: u32,
    /// Mean WCHD of cycles `1..` against cycle 0.
    pub wchd: f64,
    pub mhw: f64,
    pub fhw: f64,
}

#[derive(Debug, Clone)]
pub struct DesignAnalysis {
    pub design: String,
    pub orientation: Orientation,
    pub metrics: MetricsRow,
    pub bias: BiasReport,
    /// Template as extracted, before orientation to the baseline.
    pub raw_template: Vec<bool>,
    pub chips: Vec<ChipStats>,
    /// `(chip, cycle, wchd)` for every reconstruction.
    pub wchd_pairs: Vec<(u32, u32, f64)>,
    pub profile: BiasProfile<f64>,
    pub autocorrelation: Vec<f64>,
}

/// `(cycle, readout bits)` of one chip, cycle 0 first.
type ChipReadings = Vec<(u32, Vec<bool>)>;

struct Vectors {
    per_chip: Vec<(u32, ChipReadings)>,
}

impl Vectors {
    fn of(d: &DesignReadings) -> Result<Self, AnalysisError> {
        let per_chip: Vec<_> = d
            .chips()
            .into_iter()
            .map(|chip| (chip, d.cycles_of(chip).map(|(c, s)| (c, concat_readout(s))).collect::<Vec<_>>()))
            .collect();
        if per_chip.len() < 2 {
            return Err(AnalysisError::InsufficientData(format!(
                "design {} has readings from {} chip(s), need 2",
                d.design,
                per_chip.len()
            )));
        }
        for (chip, cycles) in &per_chip {
            if cycles.len() < 2 || cycles[0].0 != 0 {
                return Err(AnalysisError::InsufficientData(format!(
                    "design {} chip {chip} needs cycle 0 and at least one more cycle",
                    d.design
                )));
            }
        }
        Ok(Vectors { per_chip })
    }

    fn all(&self) -> impl Iterator<Item = &Vec<bool>> {
        self.per_chip.iter().flat_map(|(_, c)| c.iter().map(|(_, v)| v))
    }

    fn profile(&self, design: &str, source: ProfileSource) -> BiasProfile<f64> {
        match source {
            ProfileSource::Averaged => {
                let mut acc = ProfileAccumulator::new(self.per_chip[0].1[0].1.len());
                for v in self.all() {
                    acc.add(v);
                }
                acc.finish(design)
            }
            ProfileSource::HighestAutocorrelation => {
                let firsts: Vec<&Vec<bool>> = self.per_chip.iter().map(|(_, c)| &c[0].1).collect();
                let best = highest_autocorrelation(&firsts).unwrap_or(0);
                BiasProfile::new(design, bits_to_real(firsts[best]))
            }
        }
    }
}

fn design_profile(d: &DesignReadings, source: ProfileSource) -> Result<BiasProfile<f64>, AnalysisError> {
    Ok(Vectors::of(d)?.profile(&d.design, source))
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn complement(t: &[bool]) -> Vec<bool> {
    t.iter().map(|b| !b).collect()
}

fn analyze_design(
    d: &DesignReadings,
    baseline: &BiasProfile<f64>,
    source: ProfileSource,
) -> Result<DesignAnalysis, AnalysisError> {
    let vectors = Vectors::of(d)?;
    let profile = vectors.profile(&d.design, source);
    let acf = match autocorrelation(&profile.probabilities) {
        Ok(r) => r,
        Err(BiasError::ConstantInput) => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let period = match dominant_period(&acf, profile.len()) {
        Ok(p) => Some(p),
        Err(BiasError::NoPeriodicity | BiasError::InsufficientData(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let raw_template = match period {
        Some(p) => extract_template(vectors.all(), p)?,
        None => Vec::new(),
    };
    let direction = match bias_direction(&profile, baseline) {
        Ok(s) => s,
        Err(BiasError::ConstantInput) => 0,
        Err(e) => return Err(e.into()),
    };
    let bias = if raw_template.is_empty() {
        BiasReport { detected_period: 0, template: Vec::new(), notation: "-".into(), direction }
    } else if direction < 0 {
        BiasReport::new(complement(&raw_template), direction)
    } else {
        BiasReport::new(raw_template.clone(), direction)
    };

    let mask: &[bool] = if raw_template.is_empty() { &[false] } else { &raw_template };
    let mut chips = Vec::with_capacity(vectors.per_chip.len());
    let mut wchd_pairs = Vec::new();
    for (chip, cycles) in &vectors.per_chip {
        let enrollment = &cycles[0].1;
        let mut hd = 0.0;
        for (cycle, v) in &cycles[1..] {
            let w: f64 = wchd(enrollment, v)?;
            wchd_pairs.push((*chip, *cycle, w));
            hd += w;
        }
        let n = cycles.len() as f64;
        let mut m = 0.0;
        let mut f = 0.0;
        for (_, v) in cycles {
            m += mhw::<f64>(v, mask)?;
            f += fhw::<f64>(v)?;
        }
        chips.push(ChipStats { chip: *chip, wchd: hd / (n - 1.0), mhw: m / n, fhw: f / n });
    }
    let metrics = MetricsRow::new(
        d.design.clone(),
        min_max(chips.iter().map(|c| c.wchd)),
        min_max(chips.iter().map(|c| c.mhw)),
    )?;
    Ok(DesignAnalysis {
        design: d.design.clone(),
        orientation: d.orientation,
        metrics,
        bias,
        raw_template,
        chips,
        wchd_pairs,
        profile,
        autocorrelation: acf,
    })
}

/// Analyzes every design of `data`, in dataset order.
pub fn analyze(data: &Dataset, options: &AnalysisOptions) -> Result<Vec<DesignAnalysis>, AnalysisError> {
    let base = data
        .design(&options.baseline)
        .ok_or_else(|| AnalysisError::MissingBaseline(options.baseline.clone()))?;
    let baseline = design_profile(base, options.profile_source)?;
    data.designs
        .par_iter()
        .map(|d| analyze_design(d, &baseline, options.profile_source))
        .collect()
}
