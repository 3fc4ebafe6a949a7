//! Run-length bias templates such as `0(32)1(64)0(64)`.
//!
//! With an odd number of runs the first run is a one-off offset and the
//! rest repeat; with an even number the whole run list repeats. A single
//! run is a constant block.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::BiasError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Run {
    pub value: bool,
    pub length: usize,
}

impl Run {
    pub fn new(value: bool, length: usize) -> Self {
        Run { value, length }
    }
}

impl fmt::Display for Run {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", u8::from(self.value), self.length)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RunLengthPattern {
    offset: Option<Run>,
    block: Vec<Run>,
}

impl RunLengthPattern {
    pub fn new(offset: Option<Run>, block: Vec<Run>) -> Result<Self, BiasError> {
        if block.is_empty() {
            return Err(BiasError::Parse("pattern needs at least one repeating run".into()));
        }
        if offset.is_some_and(|r| r.length == 0) || block.iter().any(|r| r.length == 0) {
            return Err(BiasError::Parse("run lengths must be positive".into()));
        }
        if block.windows(2).any(|w| w[0].value == w[1].value) {
            return Err(BiasError::NonAlternatingBlock);
        }
        let pattern = RunLengthPattern { offset, block };
        if pattern.period() < 2 {
            return Err(BiasError::Parse(format!("period {} is shorter than 2", pattern.period())));
        }
        Ok(pattern)
    }

    pub fn offset(&self) -> Option<Run> {
        self.offset
    }

    pub fn block(&self) -> &[Run] {
        &self.block
    }

    /// Length of the repeating block.
    pub fn period(&self) -> usize {
        self.block.iter().map(|r| r.length).sum()
    }

    pub fn offset_len(&self) -> usize {
        self.offset.map_or(0, |r| r.length)
    }

    /// Biased value of readout position `k`.
    pub fn bit_at(&self, k: usize) -> bool {
        if let Some(off) = self.offset {
            if k < off.length {
                return off.value;
            }
        }
        let mut phase = (k - self.offset_len()) % self.period();
        for run in &self.block {
            if phase < run.length {
                return run.value;
            }
            phase -= run.length;
        }
        unreachable!("phase is always inside the block")
    }

    /// +1 for a one-biased position, -1 for a zero-biased one.
    pub fn pattern_value(&self, k: usize) -> i8 {
        if self.bit_at(k) {
            1
        } else {
            -1
        }
    }

    /// The pattern expanded over `len` readout positions.
    pub fn expand(&self, len: usize) -> Vec<bool> {
        (0..len).map(|k| self.bit_at(k)).collect()
    }
}

impl fmt::Display for RunLengthPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(off) = self.offset {
            write!(f, "{off}")?;
        }
        for run in &self.block {
            write!(f, "{run}")?;
        }
        Ok(())
    }
}

impl FromStr for RunLengthPattern {
    type Err = BiasError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_run_length(s)
    }
}

impl Serialize for RunLengthPattern {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RunLengthPattern {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_run_length(&s).map_err(serde::de::Error::custom)
    }
}

fn parse_runs(s: &str) -> Result<Vec<Run>, BiasError> {
    let err = |pos: usize, what: &str| BiasError::Parse(format!("{what} at byte {pos} in `{s}`"));
    let bytes = s.as_bytes();
    let mut runs = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let value = match bytes[i] {
            b'0' => false,
            b'1' => true,
            _ => return Err(err(i, "expected run value 0 or 1")),
        };
        i += 1;
        if bytes.get(i) != Some(&b'(') {
            return Err(err(i, "expected `(`"));
        }
        i += 1;
        let start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if start == i {
            return Err(err(i, "expected run length"));
        }
        let length: usize = s[start..i].parse().map_err(|_| err(start, "run length overflow"))?;
        if length == 0 {
            return Err(err(start, "run length must be positive"));
        }
        if bytes.get(i) != Some(&b')') {
            return Err(err(i, "expected `)`"));
        }
        i += 1;
        runs.push(Run { value, length });
    }
    if runs.is_empty() {
        return Err(BiasError::Parse("empty pattern".into()));
    }
    Ok(runs)
}

/// Parses run-length notation. A trailing `, ...` (as written in result
/// tables) is accepted and ignored.
pub fn parse_run_length(s: &str) -> Result<RunLengthPattern, BiasError> {
    let trimmed = s.trim();
    let body = trimmed
        .strip_suffix("...")
        .map(|rest| rest.trim_end().trim_end_matches(',').trim_end())
        .unwrap_or(trimmed);
    let mut runs = parse_runs(body)?;
    if runs.len() % 2 == 1 && runs.len() > 1 {
        let offset = runs.remove(0);
        RunLengthPattern::new(Some(offset), runs)
    } else {
        RunLengthPattern::new(None, runs)
    }
}

pub fn runs_of(bits: &[bool]) -> Vec<Run> {
    let mut runs: Vec<Run> = Vec::new();
    for &b in bits {
        match runs.last_mut() {
            Some(last) if last.value == b => last.length += 1,
            _ => runs.push(Run { value: b, length: 1 }),
        }
    }
    runs
}

/// Plain run encoding of one template period.
pub fn format_run_length(template: &[bool]) -> String {
    runs_of(template).iter().map(Run::to_string).collect()
}

/// Cyclic notation of a template: when the first and last runs share a
/// value they are one wrapped run, so the leading part becomes an offset
/// and the wrapped run closes the repeating block. `0^32 1^64 0^32`
/// renders as `0(32)1(64)0(64)`.
pub fn cyclic_notation(template: &[bool]) -> String {
    cyclic_pattern(template).map_or_else(|| format_run_length(template), |p| p.to_string())
}

/// Pattern whose expansion tiles `template` exactly, if one exists.
pub fn cyclic_pattern(template: &[bool]) -> Option<RunLengthPattern> {
    let runs = runs_of(template);
    let (first, last) = (*runs.first()?, *runs.last()?);
    if runs.len() >= 3 && first.value == last.value {
        let mut block = runs[1..runs.len() - 1].to_vec();
        block.push(Run { value: last.value, length: last.length + first.length });
        RunLengthPattern::new(Some(first), block).ok()
    } else {
        RunLengthPattern::new(None, runs).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits(runs: &[(bool, usize)]) -> Vec<bool> {
        runs.iter().flat_map(|&(v, n)| std::iter::repeat_n(v, n)).collect()
    }

    #[test]
    fn parse_examples() {
        let p4 = parse_run_length("0(16)1(16)").unwrap();
        assert_eq!(p4.offset(), None);
        assert_eq!(p4.block(), &[Run::new(false, 16), Run::new(true, 16)]);
        assert_eq!(p4.period(), 32);

        let p1 = parse_run_length("0(32)1(64)0(64)").unwrap();
        assert_eq!(p1.offset(), Some(Run::new(false, 32)));
        assert_eq!(p1.block(), &[Run::new(true, 64), Run::new(false, 64)]);
        assert_eq!(p1.period(), 128);

        let p6 = parse_run_length("0(16)1(32)0(32)").unwrap();
        assert_eq!(p6.offset(), Some(Run::new(false, 16)));
        assert_eq!(p6.period(), 64);

        assert_eq!(parse_run_length("0(32)1(64)0(64), ...").unwrap(), p1);
        assert_eq!(parse_run_length("0(8)").unwrap().period(), 8);
    }

    #[test]
    fn parse_errors() {
        for bad in ["", "2(3)", "0(", "0()", "0(3", "0(0)1(2)", "0(3)x", "(3)"] {
            assert!(matches!(parse_run_length(bad), Err(BiasError::Parse(_))), "{bad}");
        }
        assert_eq!(parse_run_length("0(4)0(4)"), Err(BiasError::NonAlternatingBlock));
        assert_eq!(parse_run_length("1(2)0(3)0(3)"), Err(BiasError::NonAlternatingBlock));
        assert!(parse_run_length("1(1)").is_err());
    }

    #[test]
    fn pattern_values_follow_offset_then_block() {
        let p = parse_run_length("0(16)1(16)").unwrap();
        for k in 0..96 {
            let expected = if k % 32 < 16 { -1 } else { 1 };
            assert_eq!(p.pattern_value(k), expected, "k={k}");
        }
        let p1 = parse_run_length("0(32)1(64)0(64)").unwrap();
        assert!(!p1.bit_at(31));
        assert!(p1.bit_at(32));
        assert!(p1.bit_at(95));
        assert!(!p1.bit_at(96));
        assert!(p1.bit_at(160));
    }

    #[test]
    fn format_examples() {
        assert_eq!(format_run_length(&bits(&[(false, 16), (true, 16)])), "0(16)1(16)");
        assert_eq!(format_run_length(&[false; 8]), "0(8)");
        assert_eq!(
            format_run_length(&bits(&[(false, 32), (true, 64), (false, 32)])),
            "0(32)1(64)0(32)"
        );
    }

    #[test]
    fn cyclic_notation_reproduces_table_strings() {
        for s in ["0(32)1(64)0(64)", "0(29)1(29)", "0(16)1(16)", "0(16)1(32)0(32)"] {
            let p = parse_run_length(s).unwrap();
            assert_eq!(p.to_string(), s);
            let one_period = p.expand(p.period());
            assert_eq!(cyclic_notation(&one_period), s);
        }
    }

    proptest! {
        #[test]
        fn plain_format_reproduces_first_period(t in prop::collection::vec(any::<bool>(), 2..200)) {
            let p = parse_run_length(&format_run_length(&t)).unwrap();
            prop_assert_eq!(p.expand(t.len()), t);
        }

        #[test]
        fn cyclic_notation_tiles_template(t in prop::collection::vec(any::<bool>(), 2..200), reps in 1usize..4) {
            let p = parse_run_length(&cyclic_notation(&t)).unwrap();
            let tiled: Vec<bool> = t.iter().copied().cycle().take(t.len() * reps).collect();
            prop_assert_eq!(p.expand(t.len() * reps), tiled);
        }
    }
}
