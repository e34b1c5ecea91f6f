use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_CYCLE_CAP: usize = 100_000;
pub const DEFAULT_FAMILY_CAP: usize = 1_000_000;

/// Numeric tolerance and enumeration limits shared by every analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Margin used for every strict inequality.
    pub tol: f64,
    pub cycle_cap: usize,
    pub family_cap: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOLERANCE,
            cycle_cap: DEFAULT_CYCLE_CAP,
            family_cap: DEFAULT_FAMILY_CAP,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1e-3) {
            return Err(Error::InvalidConfig(format!(
                "tolerance {} must lie in (0, 1e-3)",
                self.tol
            )));
        }
        if self.cycle_cap == 0 || self.family_cap == 0 {
            return Err(Error::InvalidConfig("caps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Three-way outcome of a Hurwitz test.
///
/// `Marginal` means the decisive quantity landed within the tolerance band
/// of its threshold; such a matrix is not certified Hurwitz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Hurwitz,
    NotHurwitz,
    Marginal,
}

impl Verdict {
    pub fn is_hurwitz(self) -> bool {
        self == Verdict::Hurwitz
    }

    /// Two verdicts conflict only when one is `Hurwitz` and the other `NotHurwitz`.
    pub fn compatible_with(self, other: Verdict) -> bool {
        !matches!(
            (self, other),
            (Verdict::Hurwitz, Verdict::NotHurwitz) | (Verdict::NotHurwitz, Verdict::Hurwitz)
        )
    }

    /// Classifies `value` against the open condition `value < threshold`.
    pub fn below(value: f64, threshold: f64, tol: f64) -> Verdict {
        if value < threshold - tol {
            Verdict::Hurwitz
        } else if value > threshold + tol {
            Verdict::NotHurwitz
        } else {
            Verdict::Marginal
        }
    }

    /// Combines per-item verdicts of a test that needs every item to pass.
    /// A decisive failure outranks a marginal one.
    pub fn all<I: IntoIterator<Item = Verdict>>(items: I) -> Verdict {
        let mut marginal = false;
        for v in items {
            match v {
                Verdict::NotHurwitz => return Verdict::NotHurwitz,
                Verdict::Marginal => marginal = true,
                Verdict::Hurwitz => {}
            }
        }
        if marginal {
            Verdict::Marginal
        } else {
            Verdict::Hurwitz
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Hurwitz => "hurwitz",
            Verdict::NotHurwitz => "not_hurwitz",
            Verdict::Marginal => "marginal",
        })
    }
}
