//! Partitions of prediction-set sizes into disjoint strata.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inclusive size range; `hi = None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeRange {
    pub lo: usize,
    pub hi: Option<usize>,
}

impl SizeRange {
    pub fn contains(&self, size: usize) -> bool {
        size >= self.lo && self.hi.is_none_or(|hi| size <= hi)
    }
}

impl fmt::Display for SizeRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(hi) if hi == self.lo => write!(f, "{{{}}}", self.lo),
            Some(hi) => write!(f, "{{{}..{}}}", self.lo, hi),
            None => write!(f, "{{{}..}}", self.lo),
        }
    }
}

/// Ordered, contiguous, non-overlapping size ranges starting at 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SizeRange>", into = "Vec<SizeRange>")]
pub struct StrataSpec {
    ranges: Vec<SizeRange>,
}

impl StrataSpec {
    /// Validate ranges: first starts at 0, each begins right after the previous
    /// one ends, and only the last may be unbounded.
    pub fn new(ranges: Vec<SizeRange>) -> Result<Self> {
        let Some(first) = ranges.first() else {
            return Err(Error::config("strata must contain at least one range"));
        };
        if first.lo != 0 {
            return Err(Error::config("first stratum must start at size 0"));
        }
        for (i, r) in ranges.iter().enumerate() {
            match r.hi {
                Some(hi) if hi < r.lo => {
                    return Err(Error::config(format!("stratum {r} is empty")));
                }
                None if i + 1 != ranges.len() => {
                    return Err(Error::config("only the last stratum may be unbounded"));
                }
                _ => {}
            }
            if let Some(next) = ranges.get(i + 1) {
                if r.hi.map(|h| h + 1) != Some(next.lo) {
                    return Err(Error::config(format!(
                        "strata {r} and {next} are not contiguous"
                    )));
                }
            }
        }
        Ok(Self { ranges })
    }

    /// Six strata {0,1}, {2,3}, {4..6}, {7..10}, {11..100}, {101..}.
    pub fn default_six() -> Self {
        Self::from_bounds(&[(0, 1), (2, 3), (4, 6), (7, 10), (11, 100)], 101)
    }

    /// Three strata {0,1}, {2..6}, {7..}.
    pub fn coarse() -> Self {
        Self::from_bounds(&[(0, 1), (2, 6)], 7)
    }

    /// Eight strata {0}, {1}, {2}, {3}, {4..6}, {7..10}, {11..100}, {101..}.
    pub fn fine() -> Self {
        Self::from_bounds(
            &[(0, 0), (1, 1), (2, 2), (3, 3), (4, 6), (7, 10), (11, 100)],
            101,
        )
    }

    fn from_bounds(bounded: &[(usize, usize)], open_from: usize) -> Self {
        let mut ranges: Vec<SizeRange> = bounded
            .iter()
            .map(|&(lo, hi)| SizeRange { lo, hi: Some(hi) })
            .collect();
        ranges.push(SizeRange {
            lo: open_from,
            hi: None,
        });
        Self::new(ranges).expect("preset strata are valid")
    }

    /// Preset name (`default`, `coarse`, `fine`) or explicit ranges such as
    /// `0-1,2-3,4-`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "default" => return Ok(Self::default_six()),
            "coarse" => return Ok(Self::coarse()),
            "fine" => return Ok(Self::fine()),
            _ => {}
        }
        let bad = |p: &str| Error::config(format!("cannot parse stratum `{p}`"));
        let mut ranges = Vec::new();
        for part in s.split(',').map(str::trim) {
            let (lo, hi) = match part.split_once('-') {
                Some((lo, hi)) => (lo, Some(hi)),
                None => (part, None),
            };
            let lo: usize = lo.parse().map_err(|_| bad(part))?;
            let hi = match hi {
                None => Some(lo),
                Some("") => None,
                Some(h) => Some(h.parse().map_err(|_| bad(part))?),
            };
            ranges.push(SizeRange { lo, hi });
        }
        Self::new(ranges)
    }

    pub fn ranges(&self) -> &[SizeRange] {
        &self.ranges
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// Index of the stratum holding `size`; sizes past the last bound land in
    /// the last stratum.
    pub fn stratum_of(&self, size: usize) -> usize {
        self.ranges
            .iter()
            .position(|r| r.contains(size))
            .unwrap_or(self.ranges.len() - 1)
    }

    /// True when every size in `0..=k` has a stratum without clamping.
    pub fn covers(&self, k: usize) -> bool {
        self.ranges.last().is_some_and(|r| r.hi.is_none_or(|hi| hi >= k))
    }
}

impl Default for StrataSpec {
    fn default() -> Self {
        Self::default_six()
    }
}

impl TryFrom<Vec<SizeRange>> for StrataSpec {
    type Error = Error;

    fn try_from(ranges: Vec<SizeRange>) -> Result<Self> {
        Self::new(ranges)
    }
}

impl From<StrataSpec> for Vec<SizeRange> {
    fn from(s: StrataSpec) -> Self {
        s.ranges
    }
}

impl fmt::Display for StrataSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.ranges.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(" "))
    }
}
