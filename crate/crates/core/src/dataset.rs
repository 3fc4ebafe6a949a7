//! Collections of power-up readings, either simulated in-process or loaded
//! from dump files.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::chipnet::dump::{self, DumpError, DumpFile};
use crate::layout::{Geometry, Orientation};
use crate::scalar::Real;
use crate::seed::{chip_seed, cycle_seed};
use crate::simchip::{power_up, sample_device, Floorplan, ProcessParams, SimError, Snapshot};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Dump(#[from] DumpError),
    #[error("inconsistent dumps for design {0}: {1}")]
    Inconsistent(String, String),
}

/// All readings of one design, keyed by `(chip, cycle)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignReadings {
    pub design: String,
    pub geometry: Geometry,
    pub orientation: Orientation,
    pub readings: BTreeMap<(u32, u32), Snapshot>,
}

impl DesignReadings {
    pub fn chips(&self) -> Vec<u32> {
        let mut c: Vec<u32> = self.readings.keys().map(|k| k.0).collect();
        c.dedup();
        c
    }

    pub fn cycles_of(&self, chip: u32) -> impl Iterator<Item = (u32, &Snapshot)> {
        self.readings.range((chip, 0)..=(chip, u32::MAX)).map(|(k, s)| (k.1, s))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub designs: Vec<DesignReadings>,
}

impl Dataset {
    pub fn design(&self, name: &str) -> Option<&DesignReadings> {
        self.designs.iter().find(|d| d.design == name)
    }

    pub fn total_bits(&self) -> u64 {
        self.designs
            .iter()
            .map(|d| d.readings.len() as u64 * d.geometry.cells() as u64)
            .sum()
    }

    /// Groups dumps by design, keeping the first-seen design order.
    pub fn from_dumps(dumps: Vec<DumpFile>) -> Result<Self, DatasetError> {
        let mut designs: Vec<DesignReadings> = Vec::new();
        for d in dumps {
            let idx = match designs.iter().position(|r| r.design == d.design) {
                Some(i) => i,
                None => {
                    designs.push(DesignReadings {
                        design: d.design.clone(),
                        geometry: d.geometry,
                        orientation: d.orientation,
                        readings: BTreeMap::new(),
                    });
                    designs.len() - 1
                }
            };
            let entry = &mut designs[idx];
            if entry.geometry != d.geometry || entry.orientation != d.orientation {
                return Err(DatasetError::Inconsistent(d.design, "geometry or orientation differs between dumps".into()));
            }
            if entry.readings.insert((d.chip, d.cycle), d.snapshot).is_some() {
                return Err(DatasetError::Inconsistent(d.design, format!("duplicate chip {} cycle {}", d.chip, d.cycle)));
            }
        }
        Ok(Dataset { designs })
    }

    pub fn load_dir(dir: &Path) -> Result<Self, DatasetError> {
        Dataset::from_dumps(dump::load_dir(dir)?)
    }
}

/// Snapshots of every design of one chip at one power cycle, in floorplan
/// order. Devices are rebuilt from the chip seed, so the result depends only
/// on `(master_seed, chip, cycle)`.
pub fn simulate_reading<T: Real>(
    floorplan: &Floorplan,
    params: &ProcessParams<T>,
    master_seed: u64,
    chip: u32,
    cycle: u32,
) -> Result<Vec<Snapshot>, SimError> {
    floorplan
        .designs()
        .iter()
        .map(|entry| {
            let dev = sample_device(entry, params, chip_seed(master_seed, chip))?;
            Ok(power_up(&dev, cycle_seed(master_seed, chip, cycle)).labeled(chip, cycle))
        })
        .collect()
}

/// `chips x cycles` readings of every design, generated in parallel over
/// chips with a deterministic merge.
pub fn simulate_campaign<T: Real>(
    floorplan: &Floorplan,
    params: &ProcessParams<T>,
    master_seed: u64,
    chips: u32,
    cycles: u32,
) -> Result<Dataset, SimError> {
    let per_chip: Vec<Vec<Vec<Snapshot>>> = (0..chips)
        .into_par_iter()
        .map(|chip| {
            floorplan
                .designs()
                .iter()
                .map(|entry| {
                    let dev = sample_device(entry, params, chip_seed(master_seed, chip))?;
                    Ok((0..cycles)
                        .map(|cycle| power_up(&dev, cycle_seed(master_seed, chip, cycle)).labeled(chip, cycle))
                        .collect())
                })
                .collect::<Result<Vec<_>, SimError>>()
        })
        .collect::<Result<_, _>>()?;
    let mut designs: Vec<DesignReadings> = floorplan
        .designs()
        .iter()
        .map(|e| DesignReadings {
            design: e.name.clone(),
            geometry: *e.geometry(),
            orientation: e.placed.orientation,
            readings: BTreeMap::new(),
        })
        .collect();
    for (chip, by_design) in per_chip.into_iter().enumerate() {
        for (d, snaps) in by_design.into_iter().enumerate() {
            for (cycle, s) in snaps.into_iter().enumerate() {
                designs[d].readings.insert((chip as u32, cycle as u32), s);
            }
        }
    }
    Ok(Dataset { designs })
}
