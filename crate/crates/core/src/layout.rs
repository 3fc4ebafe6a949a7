//! Logical and physical structure of an SRAM macro.
//!
//! A macro of `depth` words of `width` bits is built from `rows = depth / mux`
//! physical rows. Each data bit owns `mux` adjacent bitline columns and the
//! low `log2(mux)` address bits pick one of them. The word is split into a
//! left and a right half around the (zero-width) control strip.
//!
//! Local frame: physical column is +x, physical row is +y, and `(0, 0)` is
//! the lower-left cell of the left half. Die coordinates are in cell pitches.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LayoutError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("address {addr} out of range for depth {depth}")]
    AddressOutOfRange { addr: usize, depth: usize },
    #[error("bit {bit} out of range for width {width}")]
    BitOutOfRange { bit: usize, width: usize },
    #[error("cell ({col}, {row}) lies outside the macro")]
    CellOutOfMacro { col: i64, row: i64 },
    #[error("unknown orientation tag `{0}`")]
    UnknownOrientation(String),
    #[error("unknown speed class `{0}`")]
    UnknownSpeedClass(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeedClass {
    Fast,
    Slow,
}

impl fmt::Display for SpeedClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpeedClass::Fast => "fast",
            SpeedClass::Slow => "slow",
        })
    }
}

impl FromStr for SpeedClass {
    type Err = LayoutError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fast" => Ok(SpeedClass::Fast),
            "slow" => Ok(SpeedClass::Slow),
            other => Err(LayoutError::UnknownSpeedClass(other.to_string())),
        }
    }
}

/// One SRAM design point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Geometry {
    depth: usize,
    width: usize,
    mux: usize,
    class: SpeedClass,
}

impl Geometry {
    pub fn new(depth: usize, width: usize, mux: usize, class: SpeedClass) -> Result<Self, LayoutError> {
        if depth == 0 || width == 0 || mux == 0 {
            return Err(LayoutError::InvalidGeometry("depth, width and mux must be positive".into()));
        }
        if !width.is_multiple_of(2) {
            return Err(LayoutError::InvalidGeometry(format!("width {width} is not even")));
        }
        if !mux.is_power_of_two() {
            return Err(LayoutError::InvalidGeometry(format!("mux {mux} is not a power of two")));
        }
        if !depth.is_multiple_of(mux) {
            return Err(LayoutError::InvalidGeometry(format!("depth {depth} is not a multiple of mux {mux}")));
        }
        Ok(Geometry { depth, width, mux, class })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn mux(&self) -> usize {
        self.mux
    }

    pub fn class(&self) -> SpeedClass {
        self.class
    }

    /// Physical rows of the bitcell matrix.
    pub fn rows(&self) -> usize {
        self.depth / self.mux
    }

    /// Physical columns in one half.
    pub fn columns_per_half(&self) -> usize {
        self.width / 2 * self.mux
    }

    pub fn total_columns(&self) -> usize {
        self.width * self.mux
    }

    pub fn cells(&self) -> usize {
        self.depth * self.width
    }

    fn check_addr(&self, addr: usize) -> Result<(), LayoutError> {
        if addr >= self.depth {
            return Err(LayoutError::AddressOutOfRange { addr, depth: self.depth });
        }
        Ok(())
    }

    fn check_bit(&self, bit: usize) -> Result<(), LayoutError> {
        if bit >= self.width {
            return Err(LayoutError::BitOutOfRange { bit, width: self.width });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Half {
    Left,
    Right,
}

/// Physical location of one logical bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PhysicalCell {
    pub row: usize,
    pub col: usize,
    pub half: Half,
}

/// Splits an address into (row, column group). The low address bits select
/// the column within each mux group.
pub fn decompose_address(g: &Geometry, addr: usize) -> Result<(usize, usize), LayoutError> {
    g.check_addr(addr)?;
    Ok((addr / g.mux, addr % g.mux))
}

pub fn logical_to_physical(g: &Geometry, addr: usize, bit: usize) -> Result<PhysicalCell, LayoutError> {
    let (row, colgroup) = decompose_address(g, addr)?;
    g.check_bit(bit)?;
    let half_width = g.width / 2;
    let half = if bit < half_width { Half::Left } else { Half::Right };
    let col = (bit % half_width) * g.mux + colgroup;
    Ok(PhysicalCell { row, col, half })
}

/// Position of a bit in the row-concatenated readout vector.
pub fn readout_index(g: &Geometry, addr: usize, bit: usize) -> Result<usize, LayoutError> {
    g.check_addr(addr)?;
    g.check_bit(bit)?;
    Ok(addr * g.width + bit)
}

/// Macro-local `(x, y)` of a logical bit: the right half starts right after
/// the left half.
pub fn local_position(g: &Geometry, addr: usize, bit: usize) -> Result<(i64, i64), LayoutError> {
    let cell = logical_to_physical(g, addr, bit)?;
    let x = match cell.half {
        Half::Left => cell.col,
        Half::Right => g.columns_per_half() + cell.col,
    };
    Ok((x as i64, cell.row as i64))
}

/// Placement transform of a macro. Rotations are anticlockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    R0,
    MX,
    R90,
    R270,
    MY90,
}

pub type Matrix2 = [[i64; 2]; 2];

impl Orientation {
    pub const ALL: [Orientation; 5] = [
        Orientation::R0,
        Orientation::MX,
        Orientation::R90,
        Orientation::R270,
        Orientation::MY90,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Orientation::R0 => "R0",
            Orientation::MX => "MX",
            Orientation::R90 => "R90",
            Orientation::R270 => "R270",
            Orientation::MY90 => "MY90",
        }
    }

    pub fn matrix(&self) -> Matrix2 {
        orientation_matrix(*self)
    }

    pub fn apply(&self, v: (i64, i64)) -> (i64, i64) {
        let m = self.matrix();
        (m[0][0] * v.0 + m[0][1] * v.1, m[1][0] * v.0 + m[1][1] * v.1)
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Orientation {
    type Err = LayoutError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Orientation::ALL
            .into_iter()
            .find(|o| o.tag() == s)
            .ok_or_else(|| LayoutError::UnknownOrientation(s.to_string()))
    }
}

/// MX mirrors y; MY90 is a mirror about the y axis followed by R90.
pub fn orientation_matrix(o: Orientation) -> Matrix2 {
    match o {
        Orientation::R0 => [[1, 0], [0, 1]],
        Orientation::MX => [[1, 0], [0, -1]],
        Orientation::R90 => [[0, -1], [1, 0]],
        Orientation::R270 => [[0, 1], [-1, 0]],
        Orientation::MY90 => [[0, -1], [-1, 0]],
    }
}

/// A macro placed on the die.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlacedMacro {
    pub geometry: Geometry,
    pub orientation: Orientation,
    pub origin: (i64, i64),
}

impl PlacedMacro {
    pub fn new(geometry: Geometry, orientation: Orientation, origin: (i64, i64)) -> Self {
        PlacedMacro { geometry, orientation, origin }
    }
}

pub fn macro_to_die(p: &PlacedMacro, local: (i64, i64)) -> Result<(i64, i64), LayoutError> {
    let (col, row) = local;
    let g = &p.geometry;
    if col < 0 || row < 0 || col >= g.total_columns() as i64 || row >= g.rows() as i64 {
        return Err(LayoutError::CellOutOfMacro { col, row });
    }
    let (dx, dy) = p.orientation.apply((col, row));
    Ok((p.origin.0 + dx, p.origin.1 + dy))
}
