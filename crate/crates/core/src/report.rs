//! Result table: machine-readable JSON plus a fixed-column text rendering.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::DesignAnalysis;
use crate::metrics::MetricsRow;

/// Per-reading bit count stated for the fabricated test chip; it does not
/// decompose into the listed design sizes.
pub const REFERENCE_BITS_PER_READING: u64 = 262_320;

/// Tolerance of the render-time entropy check.
const ENTROPY_TOLERANCE: f64 = 1e-9;

pub const HEADER: [&str; 7] = ["SRAM-PUF", "WCHD(%)", "MHW", "Entropy", "Bias pattern", "Orientation", "BD"];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("row {design}: entropy {stored:?} does not follow from MHW")]
    EntropyMismatch { design: String, stored: (f64, f64) },
    #[error("row {0}: non-finite value")]
    NonFinite(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: Option<u64>,
    pub sigma_mismatch: Option<f64>,
    pub sigma_noise: Option<f64>,
    pub beta: Option<f64>,
    pub gradient: Option<(f64, f64)>,
    pub chips: u32,
    pub cycles: u32,
    pub bits_per_reading: u64,
    pub baseline: String,
    pub profile_source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    #[serde(flatten)]
    pub metrics: MetricsRow,
    pub orientation: String,
    pub detected_period: usize,
    /// One period as a `0`/`1` string, oriented to the baseline.
    pub template: String,
    pub pattern: String,
    pub direction: i8,
}

impl ReportRow {
    pub fn from_analysis(a: &DesignAnalysis) -> Self {
        ReportRow {
            metrics: a.metrics.clone(),
            orientation: a.orientation.to_string(),
            detected_period: a.bias.detected_period,
            template: a.bias.template.iter().map(|&b| if b { '1' } else { '0' }).collect(),
            pattern: a.bias.notation.clone(),
            direction: a.bias.direction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metadata: RunMetadata,
    pub rows: Vec<ReportRow>,
    pub notes: Vec<String>,
}

fn bits_note(bits: u64) -> Option<String> {
    (bits != REFERENCE_BITS_PER_READING).then(|| {
        format!(
            "bits per reading: {bits} collected; the reference chip states {REFERENCE_BITS_PER_READING}, \
             which no combination of the listed design sizes produces"
        )
    })
}

impl Report {
    pub fn new(metadata: RunMetadata, analyses: &[DesignAnalysis]) -> Self {
        let notes = bits_note(metadata.bits_per_reading).into_iter().collect();
        Report { rows: analyses.iter().map(ReportRow::from_analysis).collect(), metadata, notes }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }

    fn check(&self) -> Result<(), ReportError> {
        for r in &self.rows {
            let m = &r.metrics;
            let values = [m.wchd_min, m.wchd_max, m.mhw_min, m.mhw_max, m.entropy_min, m.entropy_max];
            if values.iter().any(|v| !v.is_finite()) {
                return Err(ReportError::NonFinite(m.design.clone()));
            }
            if !m.entropy_consistent(ENTROPY_TOLERANCE) {
                return Err(ReportError::EntropyMismatch {
                    design: m.design.clone(),
                    stored: (m.entropy_min, m.entropy_max),
                });
            }
        }
        Ok(())
    }

    /// Text table, one row per design. Fails when a row's entropy does not
    /// follow from its MHW range.
    pub fn render_table(&self) -> Result<String, ReportError> {
        self.check()?;
        let cells: Vec<[String; 7]> = self.rows.iter().map(row_cells).collect();
        let mut widths = HEADER.map(str::len);
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |fields: &[&str]| {
            let padded: Vec<String> = fields.iter().zip(&widths).map(|(f, &w)| format!("{f:<w$}")).collect();
            format!("| {} |\n", padded.join(" | "))
        };
        let mut out = line(&HEADER);
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
        for row in &cells {
            out.push_str(&line(&row.each_ref().map(String::as_str)));
        }
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        Ok(out)
    }
}

fn trim_unit(v: f64) -> String {
    if v == 1.0 {
        "1".into()
    } else {
        format!("{v:.3}")
    }
}

fn row_cells(r: &ReportRow) -> [String; 7] {
    let m = &r.metrics;
    [
        m.design.clone(),
        format!("{:.1}-{:.1}", 100.0 * m.wchd_min, 100.0 * m.wchd_max),
        format!("{:.3}-{:.3}", m.mhw_min, m.mhw_max),
        format!("{}-{}", trim_unit(m.entropy_min), trim_unit(m.entropy_max)),
        if r.detected_period == 0 { r.pattern.clone() } else { format!("{}, ...", r.pattern) },
        r.orientation.clone(),
        match r.direction {
            1 => "+".into(),
            -1 => "-".into(),
            _ => "0".into(),
        },
    ]
}
