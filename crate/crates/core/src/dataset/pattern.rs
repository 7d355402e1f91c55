use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attacks::AttackGroup;
use crate::error::{Error, Result};

pub const PATTERN_SEGMENTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentStatus {
    Clean,
    Attacked(AttackGroup),
}

/// Status of the five equal chunks a partially attacked arrival is split into.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<SegmentStatus>", into = "Vec<SegmentStatus>")]
pub struct SegmentPattern {
    segments: [SegmentStatus; PATTERN_SEGMENTS],
}

impl SegmentPattern {
    pub fn new(segments: [SegmentStatus; PATTERN_SEGMENTS]) -> Self {
        Self { segments }
    }

    pub fn segments(&self) -> &[SegmentStatus; PATTERN_SEGMENTS] {
        &self.segments
    }

    pub fn attacked(&self) -> usize {
        self.segments
            .iter()
            .filter(|s| matches!(s, SegmentStatus::Attacked(_)))
            .count()
    }

    /// Attacked share in percent.
    pub fn intensity(&self) -> u32 {
        (100 * self.attacked() / PATTERN_SEGMENTS) as u32
    }
}

impl TryFrom<Vec<SegmentStatus>> for SegmentPattern {
    type Error = Error;
    fn try_from(v: Vec<SegmentStatus>) -> Result<Self> {
        let segments: [SegmentStatus; PATTERN_SEGMENTS] = v.try_into().map_err(|v: Vec<_>| {
            Error::InvalidSpec(format!(
                "a segment pattern has {PATTERN_SEGMENTS} entries, got {}",
                v.len()
            ))
        })?;
        Ok(Self { segments })
    }
}

impl From<SegmentPattern> for Vec<SegmentStatus> {
    fn from(p: SegmentPattern) -> Self {
        p.segments.to_vec()
    }
}

/// Compact id such as `C-1-C-2-C` (`1`/`2` name the attack group).
impl fmt::Display for SegmentPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self
            .segments
            .iter()
            .map(|s| match s {
                SegmentStatus::Clean => "C",
                SegmentStatus::Attacked(AttackGroup::IterationBased) => "1",
                SegmentStatus::Attacked(AttackGroup::OptimizationDecisionBased) => "2",
            })
            .collect();
        f.write_str(&parts.join("-"))
    }
}

impl FromStr for SegmentPattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.split(['-', ','])
            .map(|p| match p.trim() {
                "C" | "c" => Ok(SegmentStatus::Clean),
                "1" => Ok(SegmentStatus::Attacked(AttackGroup::IterationBased)),
                "2" => Ok(SegmentStatus::Attacked(AttackGroup::OptimizationDecisionBased)),
                other => Err(Error::InvalidSpec(format!("bad segment status `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()?
            .try_into()
    }
}
