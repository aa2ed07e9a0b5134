use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum SizeClass {
    S,
    M,
    L,
}

impl fmt::Display for SizeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SizeClass::S => "S",
            SizeClass::M => "M",
            SizeClass::L => "L",
        })
    }
}

impl FromStr for SizeClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S" | "SMALL" => Ok(SizeClass::S),
            "M" | "MEDIUM" => Ok(SizeClass::M),
            "L" | "LARGE" => Ok(SizeClass::L),
            _ => Err(Error::InvalidParams(format!("unknown size class '{s}'"))),
        }
    }
}

/// Memory and per-inference compute budget of a microcontroller class
/// (10 inferences per second, 8-bit weights and activations).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConstraintClass {
    pub size: SizeClass,
    pub memory_limit_kb: u64,
    pub ops_limit: u64,
}

impl ConstraintClass {
    pub const SMALL: ConstraintClass =
        ConstraintClass { size: SizeClass::S, memory_limit_kb: 80, ops_limit: 6_000_000 };
    pub const MEDIUM: ConstraintClass =
        ConstraintClass { size: SizeClass::M, memory_limit_kb: 200, ops_limit: 20_000_000 };
    pub const LARGE: ConstraintClass =
        ConstraintClass { size: SizeClass::L, memory_limit_kb: 500, ops_limit: 80_000_000 };
    pub const ALL: [ConstraintClass; 3] = [Self::SMALL, Self::MEDIUM, Self::LARGE];

    pub fn of(size: SizeClass) -> Self {
        match size {
            SizeClass::S => Self::SMALL,
            SizeClass::M => Self::MEDIUM,
            SizeClass::L => Self::LARGE,
        }
    }

    /// Both budgets hold. Memory is compared at 0.1 KB reporting precision,
    /// so 80,038 bytes ("80.0 KB") fits an 80 KB budget.
    pub fn admits(&self, memory_bytes: u64, ops: u64) -> bool {
        let tenths_kb = (memory_bytes + 50) / 100;
        tenths_kb <= self.memory_limit_kb * 10 && ops <= self.ops_limit
    }
}

/// Smallest class whose budgets both hold, `None` when even L is exceeded.
pub fn classify(memory_bytes: u64, ops: u64) -> Option<ConstraintClass> {
    ConstraintClass::ALL.into_iter().find(|c| c.admits(memory_bytes, ops))
}
