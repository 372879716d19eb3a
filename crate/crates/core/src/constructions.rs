//! Explicit games with a unique equilibrium for every admissible partition.
//!
//! Each witness is a 0/±1 matrix whose nonzero entries sit on bands offset
//! `K/2` (or `floor(K/2)` and `ceil(K/2)`) from the diagonal. An agent owns at
//! most `K/2` contiguous coordinates, so no band entry lands in a diagonal
//! block whatever the partition.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{uniqueness_preconditions, UniquenessReport, Verdict};
use crate::error::{Error, Result};
use crate::game::{AgentPartition, GameClass, PolymatrixGame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstructionKind {
    /// `A[w, K/2+w] = A[K/2+w, w] = 1`.
    CoordinationEven,
    /// Two symmetric bands at offsets `floor(K/2)` and `ceil(K/2)`.
    CoordinationOdd,
    /// `A[w, K/2+w] = 1`, `A[K/2+w, w] = -1`.
    ZeroSumEven,
}

impl ConstructionKind {
    pub fn class(self) -> GameClass {
        match self {
            ConstructionKind::CoordinationEven | ConstructionKind::CoordinationOdd => GameClass::Coordination,
            ConstructionKind::ZeroSumEven => GameClass::ZeroSum,
        }
    }

    pub fn wants_even(self) -> bool {
        !matches!(self, ConstructionKind::CoordinationOdd)
    }

    /// `|det|` of the witness matrix.
    pub fn expected_abs_det(self) -> f64 {
        match self {
            ConstructionKind::CoordinationOdd => 2.0,
            _ => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConstructionKind::CoordinationEven => "coord-even",
            ConstructionKind::CoordinationOdd => "coord-odd",
            ConstructionKind::ZeroSumEven => "zs-even",
        }
    }
}

impl fmt::Display for ConstructionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConstructionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coord-even" | "coordination-even" => Ok(ConstructionKind::CoordinationEven),
            "coord-odd" | "coordination-odd" => Ok(ConstructionKind::CoordinationOdd),
            "zs-even" | "zero-sum-even" => Ok(ConstructionKind::ZeroSumEven),
            other => Err(Error::InvalidConstruction(format!("unknown construction kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstructionSpec {
    kind: ConstructionKind,
    partition: AgentPartition,
}

impl ConstructionSpec {
    pub fn new(kind: ConstructionKind, partition: AgentPartition) -> Result<Self> {
        let k = partition.total();
        if kind.wants_even() != (k % 2 == 0) {
            return Err(Error::InvalidConstruction(format!(
                "{kind} needs {} K, got K = {k}",
                if kind.wants_even() { "even" } else { "odd" }
            )));
        }
        if let Some(i) = partition.half_condition().iter().position(|ok| !ok) {
            return Err(Error::InvalidConstruction(format!(
                "diagonal block would be nonzero: agent {i} has k = {} > K/2 = {}",
                partition.dim(i),
                k as f64 / 2.0
            )));
        }
        Ok(Self { kind, partition })
    }

    pub fn kind(&self) -> ConstructionKind {
        self.kind
    }

    pub fn partition(&self) -> &AgentPartition {
        &self.partition
    }
}

/// The witness matrix for `kind` in dimension `k`, independent of the partition.
pub fn witness_matrix(kind: ConstructionKind, k: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(k, k);
    let lo = k / 2;
    let hi = k - lo;
    match kind {
        ConstructionKind::CoordinationEven | ConstructionKind::ZeroSumEven => {
            let below = if kind == ConstructionKind::ZeroSumEven { -1.0 } else { 1.0 };
            for w in 0..lo {
                a[(w, lo + w)] = 1.0;
                a[(lo + w, w)] = below;
            }
        }
        ConstructionKind::CoordinationOdd => {
            for w in 0..hi {
                a[(w, lo + w)] = 1.0;
                a[(lo + w, w)] = 1.0;
            }
            for w in 0..lo {
                a[(w, hi + w)] = 1.0;
                a[(hi + w, w)] = 1.0;
            }
        }
    }
    a
}

/// Builds the witness game with `b = 0`.
pub fn construct(spec: &ConstructionSpec) -> Result<PolymatrixGame> {
    let k = spec.partition.total();
    let a = witness_matrix(spec.kind, k);
    PolymatrixGame::from_matrix(spec.partition.clone(), spec.kind.class(), &a, vec![0.0; k])
}

/// Checks that the witness is uniquely solvable with the expected `|det|`.
pub fn verify_construction(spec: &ConstructionSpec) -> Result<UniquenessReport> {
    let game = construct(spec)?;
    let report = uniqueness_preconditions(&game);
    if report.verdict != Verdict::Unique {
        return Err(Error::WitnessFailed(format!(
            "{} on {} is not uniquely solvable (rank {})",
            spec.kind, spec.partition, report.rank
        )));
    }
    let expected = spec.kind.expected_abs_det();
    let got = report.determinant.magnitude();
    if (got - expected).abs() > 1e-9 * expected {
        return Err(Error::WitnessFailed(format!(
            "{} on {}: |det| = {got}, expected {expected}",
            spec.kind, spec.partition
        )));
    }
    Ok(report)
}
