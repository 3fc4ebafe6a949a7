//! Text dump of one power-up reading of one design.
//!
//! ```text
//! #PUFDUMP v1
//! #design P1_a depth=128 width=64 mux=4 orient=R0 class=fast
//! #chip 0 cycle 3
//! 0000: 8f3a...
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::layout::{Geometry, Orientation, SpeedClass};
use crate::simchip::Snapshot;

pub const MAGIC: &str = "#PUFDUMP v1";
pub const EXTENSION: &str = "dump";

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DumpFile {
    pub design: String,
    pub geometry: Geometry,
    pub orientation: Orientation,
    pub chip: u32,
    pub cycle: u32,
    pub snapshot: Snapshot,
}

pub fn file_name(design: &str, chip: u32, cycle: u32) -> String {
    format!("{design}_chip{chip:03}_cycle{cycle:02}.{EXTENSION}")
}

impl DumpFile {
    pub fn file_name(&self) -> String {
        file_name(&self.design, self.chip, self.cycle)
    }

    pub fn to_text(&self) -> String {
        let g = &self.geometry;
        let hex_digits = g.width().div_ceil(4);
        let mut out = String::with_capacity(16 + g.depth() * (hex_digits + 7));
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(
            out,
            "#design {} depth={} width={} mux={} orient={} class={}",
            self.design,
            g.depth(),
            g.width(),
            g.mux(),
            self.orientation,
            g.class()
        );
        let _ = writeln!(out, "#chip {} cycle {}", self.chip, self.cycle);
        for (addr, word) in self.snapshot.words().iter().enumerate() {
            let _ = writeln!(out, "{addr:04x}: {word:0hex_digits$x}");
        }
        out
    }

    pub fn parse(text: &str, source: &str) -> Result<Self, DumpError> {
        let err = |line: usize, message: String| DumpError::Parse { file: source.to_string(), line, message };
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(err(1, format!("expected `{MAGIC}`")));
        }
        let header = lines.next().ok_or_else(|| err(2, "missing design header".into()))?;
        let mut fields = header
            .strip_prefix("#design ")
            .ok_or_else(|| err(2, "expected `#design`".into()))?
            .split_whitespace();
        let design = fields.next().ok_or_else(|| err(2, "missing design name".into()))?.to_string();
        let (mut depth, mut width, mut mux, mut orient, mut class) = (None, None, None, None, None);
        for f in fields {
            let (k, v) = f.split_once('=').ok_or_else(|| err(2, format!("bad field `{f}`")))?;
            let bad = |_| err(2, format!("bad value in `{f}`"));
            match k {
                "depth" => depth = Some(v.parse::<usize>().map_err(bad)?),
                "width" => width = Some(v.parse::<usize>().map_err(bad)?),
                "mux" => mux = Some(v.parse::<usize>().map_err(bad)?),
                "orient" => orient = Some(v.parse::<Orientation>().map_err(|e| err(2, e.to_string()))?),
                "class" => class = Some(v.parse::<SpeedClass>().map_err(|e| err(2, e.to_string()))?),
                _ => return Err(err(2, format!("unknown field `{k}`"))),
            }
        }
        let missing = |name: &str| err(2, format!("missing `{name}`"));
        let geometry = Geometry::new(
            depth.ok_or_else(|| missing("depth"))?,
            width.ok_or_else(|| missing("width"))?,
            mux.ok_or_else(|| missing("mux"))?,
            class.ok_or_else(|| missing("class"))?,
        )
        .map_err(|e| err(2, e.to_string()))?;
        let orientation = orient.ok_or_else(|| missing("orient"))?;
        if geometry.width() > 64 {
            return Err(err(2, "words wider than 64 bits are not supported".into()));
        }

        let chip_line = lines.next().ok_or_else(|| err(3, "missing chip header".into()))?;
        let parts: Vec<&str> = chip_line.split_whitespace().collect();
        let (chip, cycle) = match parts.as_slice() {
            ["#chip", c, "cycle", n] => (
                c.parse().map_err(|_| err(3, "bad chip id".into()))?,
                n.parse().map_err(|_| err(3, "bad cycle".into()))?,
            ),
            _ => return Err(err(3, "expected `#chip <id> cycle <n>`".into())),
        };

        let hex_digits = geometry.width().div_ceil(4);
        let mut words = Vec::with_capacity(geometry.depth());
        for (i, line) in lines.enumerate() {
            let lineno = i + 4;
            let (a, w) = line.split_once(": ").ok_or_else(|| err(lineno, "expected `<addr>: <word>`".into()))?;
            let addr = usize::from_str_radix(a, 16).map_err(|_| err(lineno, format!("bad address `{a}`")))?;
            if a.len() != 4 || addr != words.len() {
                return Err(err(lineno, format!("expected address {:04x}", words.len())));
            }
            if w.len() != hex_digits || w.chars().any(|c| c.is_ascii_uppercase()) {
                return Err(err(lineno, format!("word must be {hex_digits} lowercase hex digits")));
            }
            words.push(u64::from_str_radix(w, 16).map_err(|_| err(lineno, format!("bad word `{w}`")))?);
        }
        if words.len() != geometry.depth() {
            return Err(err(0, format!("{} words for depth {}", words.len(), geometry.depth())));
        }
        let snapshot = Snapshot::from_words(geometry.width(), words)
            .map_err(|e| err(0, e.to_string()))?
            .labeled(chip, cycle);
        Ok(DumpFile { design, geometry, orientation, chip, cycle, snapshot })
    }

    pub fn write_to(&self, dir: &Path) -> Result<PathBuf, DumpError> {
        let path = dir.join(self.file_name());
        std::fs::write(&path, self.to_text()).map_err(|source| DumpError::Io { path: path.display().to_string(), source })?;
        Ok(path)
    }

    pub fn read_from(path: &Path) -> Result<Self, DumpError> {
        let text = std::fs::read_to_string(path).map_err(|source| DumpError::Io { path: path.display().to_string(), source })?;
        DumpFile::parse(&text, &path.display().to_string())
    }
}

/// Every `*.dump` file in `dir`, sorted by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<DumpFile>, DumpError> {
    let io = |source| DumpError::Io { path: dir.display().to_string(), source };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .map(|e| e.map(|e| e.path()).map_err(io))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == EXTENSION))
        .collect();
    paths.sort();
    paths.iter().map(|p| DumpFile::read_from(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DumpFile {
        let geometry = Geometry::new(8, 12, 2, SpeedClass::Slow).unwrap();
        let words = (0..8u64).map(|a| (a * 0x1f3) & 0xfff).collect();
        DumpFile {
            design: "P3".into(),
            geometry,
            orientation: Orientation::R270,
            chip: 4,
            cycle: 2,
            snapshot: Snapshot::from_words(12, words).unwrap().labeled(4, 2),
        }
    }

    #[test]
    fn text_layout() {
        let text = sample().to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "#PUFDUMP v1");
        assert_eq!(lines[1], "#design P3 depth=8 width=12 mux=2 orient=R270 class=slow");
        assert_eq!(lines[2], "#chip 4 cycle 2");
        assert_eq!(lines[3], "0000: 000");
        assert_eq!(lines[4], "0001: 1f3");
        assert_eq!(lines.len(), 3 + 8);
        assert!(text.ends_with('\n'));
        assert_eq!(sample().file_name(), "P3_chip004_cycle02.dump");
    }

    #[test]
    fn parse_round_trip() {
        let d = sample();
        assert_eq!(DumpFile::parse(&d.to_text(), "x").unwrap(), d);
    }

    #[test]
    fn parse_rejects_damage() {
        let text = sample().to_text();
        for (from, to) in [
            ("#PUFDUMP v1", "#PUFDUMP v2"),
            ("orient=R270", "orient=R45"),
            ("0001: 1f3", "0001: 1F3"),
            ("0001: 1f3", "0002: 1f3"),
            ("0001: 1f3", "0001: 01f3"),
            ("#chip 4", "#chip x"),
        ] {
            let damaged = text.replacen(from, to, 1);
            assert!(DumpFile::parse(&damaged, "x").is_err(), "{from} -> {to}");
        }
        let truncated: String = text.lines().take(6).map(|l| format!("{l}\n")).collect();
        assert!(DumpFile::parse(&truncated, "x").is_err());
    }

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = sample();
        d.write_to(dir.path()).unwrap();
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        assert_eq!(load_dir(dir.path()).unwrap(), vec![d]);
    }
}
