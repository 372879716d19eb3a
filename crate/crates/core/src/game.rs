//! Polymatrix games in block form.
//!
//! A game on `n` agents assigns agent `i` a strategy in `R^{k_i}`. Agent `i`
//! earns `x_i^T (-b_i + sum_{j != i} A^{(ij)} x_j)`. Stacking the blocks in
//! agent order gives the consolidated `K x K` matrix `A` (zero diagonal
//! blocks) and the cost vector `b`; the Nash equilibria are exactly the
//! solutions of `A x = b`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strategy-space dimensions of each agent, with precomputed block offsets.
///
/// Coordinates are laid out agent 0 first, then agent 1, and so on; agent
/// indices and coordinates are zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct AgentPartition {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
}

impl AgentPartition {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidPartition(format!(
                "need at least 2 agents, got {}",
                dims.len()
            )));
        }
        if let Some(i) = dims.iter().position(|&k| k == 0) {
            return Err(Error::InvalidPartition(format!(
                "agent {i} has an empty strategy space"
            )));
        }
        let mut offsets = Vec::with_capacity(dims.len());
        let mut total = 0;
        for &k in &dims {
            offsets.push(total);
            total += k;
        }
        Ok(Self {
            dims,
            offsets,
            total,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn agents(&self) -> usize {
        self.dims.len()
    }

    /// Combined dimension `K`.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn dim(&self, agent: usize) -> usize {
        self.dims[agent]
    }

    pub fn offset(&self, agent: usize) -> usize {
        self.offsets[agent]
    }

    /// Coordinates owned by `agent` in the consolidated vector.
    pub fn range(&self, agent: usize) -> Range<usize> {
        self.offsets[agent]..self.offsets[agent] + self.dims[agent]
    }

    /// Agent that owns consolidated coordinate `coord`.
    pub fn owner(&self, coord: usize) -> usize {
        assert!(coord < self.total, "coordinate {coord} out of range");
        self.offsets.partition_point(|&o| o <= coord) - 1
    }

    pub fn check_agent(&self, agent: usize) -> Result<()> {
        if agent < self.agents() {
            Ok(())
        } else {
            Err(Error::AgentOutOfRange {
                index: agent,
                agents: self.agents(),
            })
        }
    }

    /// `k_i <= K/2` for every agent, written as `2 k_i <= K` to stay in integers.
    pub fn half_condition(&self) -> Vec<bool> {
        self.dims.iter().map(|&k| 2 * k <= self.total).collect()
    }
}

impl TryFrom<Vec<usize>> for AgentPartition {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<AgentPartition> for Vec<usize> {
    fn from(p: AgentPartition) -> Self {
        p.dims
    }
}

impl fmt::Display for AgentPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|k| k.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for AgentPartition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let dims = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::InvalidPartition(format!("bad dimension {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(dims)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameClass {
    /// `A = -A^T`.
    ZeroSum,
    /// `A = A^T`.
    Coordination,
    General,
}

impl GameClass {
    pub fn as_str(self) -> &'static str {
        match self {
            GameClass::ZeroSum => "zero-sum",
            GameClass::Coordination => "coordination",
            GameClass::General => "general",
        }
    }

    /// Symmetric classes store only the `i < j` blocks.
    pub fn is_symmetric(self) -> bool {
        !matches!(self, GameClass::General)
    }
}

impl fmt::Display for GameClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GameClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero-sum" | "zs" => Ok(GameClass::ZeroSum),
            "coordination" | "coord" => Ok(GameClass::Coordination),
            "general" => Ok(GameClass::General),
            other => Err(Error::InvalidGame(format!("unknown game class {other:?}"))),
        }
    }
}

/// Agent `i`'s payoff matrix against agent `j`, shape `k_i x k_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionBlock {
    pub i: usize,
    pub j: usize,
    pub payoff: DMatrix<f64>,
}

impl InteractionBlock {
    pub fn new(i: usize, j: usize, payoff: DMatrix<f64>) -> Self {
        Self { i, j, payoff }
    }
}

/// A joint strategy profile in consolidated coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile(DVector<f64>);

impl StrategyProfile {
    pub fn new(x: DVector<f64>) -> Self {
        Self(x)
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self(DVector::from_column_slice(x))
    }

    pub fn zeros(len: usize) -> Self {
        Self(DVector::zeros(len))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    /// Agent `i`'s strategy `x_i`.
    pub fn agent<'a>(&'a self, partition: &AgentPartition, i: usize) -> &'a [f64] {
        &self.0.as_slice()[partition.range(i)]
    }
}

impl From<DVector<f64>> for StrategyProfile {
    fn from(x: DVector<f64>) -> Self {
        Self(x)
    }
}

impl From<Vec<f64>> for StrategyProfile {
    fn from(x: Vec<f64>) -> Self {
        Self(DVector::from_vec(x))
    }
}

/// A polymatrix game `G = (n, k, A, b)`.
///
/// Zero-sum and coordination games keep only the blocks with `i < j`; the
/// mirror block is derived (`-B^T` or `B^T`), so the class is a structural
/// property rather than a numerical one. Missing blocks are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PolymatrixGame {
    partition: AgentPartition,
    class: GameClass,
    blocks: BTreeMap<(usize, usize), DMatrix<f64>>,
    costs: DVector<f64>,
}

impl PolymatrixGame {
    pub fn new(
        partition: AgentPartition,
        class: GameClass,
        blocks: Vec<InteractionBlock>,
        costs: Vec<f64>,
    ) -> Result<Self> {
        let n = partition.agents();
        let mut stored = BTreeMap::new();
        for block in blocks {
            let InteractionBlock { i, j, payoff } = block;
            if i >= n || j >= n {
                return Err(Error::InvalidGame(format!(
                    "block ({i},{j}) references a missing agent (n = {n})"
                )));
            }
            if i == j {
                return Err(Error::InvalidGame(format!(
                    "diagonal block ({i},{i}) cannot be stored"
                )));
            }
            if class.is_symmetric() && i > j {
                return Err(Error::InvalidGame(format!(
                    "{class} games store only i < j blocks, got ({i},{j})"
                )));
            }
            let expected = (partition.dim(i), partition.dim(j));
            if payoff.shape() != expected {
                return Err(Error::InvalidGame(format!(
                    "block ({i},{j}) has shape {:?}, expected {:?}",
                    payoff.shape(),
                    expected
                )));
            }
            if stored.insert((i, j), payoff).is_some() {
                return Err(Error::InvalidGame(format!("duplicate block ({i},{j})")));
            }
        }
        if costs.len() != partition.total() {
            return Err(Error::ShapeMismatch {
                expected: partition.total(),
                actual: costs.len(),
            });
        }
        Ok(Self {
            partition,
            class,
            blocks: stored,
            costs: DVector::from_vec(costs),
        })
    }

    /// Splits a consolidated matrix into blocks.
    ///
    /// Diagonal blocks must vanish and, for symmetric classes, the lower blocks
    /// must mirror the upper ones, both within the default classification
    /// tolerance. Only the upper blocks are kept for symmetric classes.
    pub fn from_matrix(
        partition: AgentPartition,
        class: GameClass,
        a: &DMatrix<f64>,
        costs: Vec<f64>,
    ) -> Result<Self> {
        let k = partition.total();
        if a.shape() != (k, k) {
            return Err(Error::InvalidGame(format!(
                "matrix shape {:?} does not match K = {k}",
                a.shape()
            )));
        }
        let tol = default_classify_tolerance(a);
        check_diagonal_blocks(a, &partition, tol)?;
        let n = partition.agents();
        let mut blocks = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j || (class.is_symmetric() && i > j) {
                    continue;
                }
                let ri = partition.range(i);
                let rj = partition.range(j);
                let payoff = a.view((ri.start, rj.start), (ri.len(), rj.len())).into_owned();
                if class.is_symmetric() {
                    let lower = a.view((rj.start, ri.start), (rj.len(), ri.len()));
                    let expected = mirror(class, &payoff);
                    if (lower - &expected).amax() > tol {
                        return Err(Error::InvalidGame(format!(
                            "block ({j},{i}) does not mirror block ({i},{j}) for a {class} game"
                        )));
                    }
                }
                if payoff.iter().any(|&v| v != 0.0) {
                    blocks.push(InteractionBlock::new(i, j, payoff));
                }
            }
        }
        Self::new(partition, class, blocks, costs)
    }

    pub fn partition(&self) -> &AgentPartition {
        &self.partition
    }

    pub fn class(&self) -> GameClass {
        self.class
    }

    pub fn costs(&self) -> &DVector<f64> {
        &self.costs
    }

    pub fn dimension(&self) -> usize {
        self.partition.total()
    }

    pub fn with_costs(mut self, costs: Vec<f64>) -> Result<Self> {
        if costs.len() != self.partition.total() {
            return Err(Error::ShapeMismatch {
                expected: self.partition.total(),
                actual: costs.len(),
            });
        }
        self.costs = DVector::from_vec(costs);
        Ok(self)
    }

    /// Blocks as stored, in `(i, j)` order.
    pub fn stored_blocks(&self) -> impl Iterator<Item = InteractionBlock> + '_ {
        self.blocks
            .iter()
            .map(|(&(i, j), m)| InteractionBlock::new(i, j, m.clone()))
    }

    /// Block `A^{(ij)}`, materialising derived mirrors and zero blocks.
    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let (ki, kj) = (self.partition.dim(i), self.partition.dim(j));
        if let Some(m) = self.blocks.get(&(i, j)) {
            return m.clone();
        }
        if self.class.is_symmetric() {
            if let Some(m) = self.blocks.get(&(j, i)) {
                return mirror(self.class, m);
            }
        }
        DMatrix::zeros(ki, kj)
    }

    /// The consolidated payoff matrix `A`.
    pub fn consolidate(&self) -> DMatrix<f64> {
        let k = self.partition.total();
        let mut a = DMatrix::zeros(k, k);
        for (&(i, j), m) in &self.blocks {
            let ri = self.partition.range(i);
            let rj = self.partition.range(j);
            a.view_mut((ri.start, rj.start), (ri.len(), rj.len())).copy_from(m);
            if self.class.is_symmetric() {
                a.view_mut((rj.start, ri.start), (rj.len(), ri.len()))
                    .copy_from(&mirror(self.class, m));
            }
        }
        a
    }

    fn check_profile(&self, x: &StrategyProfile) -> Result<()> {
        if x.len() != self.partition.total() {
            return Err(Error::ShapeMismatch {
                expected: self.partition.total(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Concatenated utility gradients `-b + A x`.
    pub fn payoff_field(&self, x: &StrategyProfile) -> Result<DVector<f64>> {
        self.check_profile(x)?;
        Ok(self.consolidate() * x.vector() - &self.costs)
    }

    /// Agent `i`'s utility `x_i^T (-b_i + sum_j A^{(ij)} x_j)`.
    pub fn utility(&self, x: &StrategyProfile, i: usize) -> Result<f64> {
        self.check_profile(x)?;
        self.partition.check_agent(i)?;
        let ri = self.partition.range(i);
        let xi = x.vector().rows(ri.start, ri.len());
        let mut grad = -self.costs.rows(ri.start, ri.len()).into_owned();
        for j in 0..self.partition.agents() {
            if j == i {
                continue;
            }
            let rj = self.partition.range(j);
            grad += self.block(i, j) * x.vector().rows(rj.start, rj.len());
        }
        Ok(xi.dot(&grad))
    }
}

fn mirror(class: GameClass, m: &DMatrix<f64>) -> DMatrix<f64> {
    match class {
        GameClass::ZeroSum => -m.transpose(),
        GameClass::Coordination => m.transpose(),
        GameClass::General => unreachable!("general games store both blocks"),
    }
}

fn check_diagonal_blocks(a: &DMatrix<f64>, partition: &AgentPartition, tol: f64) -> Result<()> {
    for i in 0..partition.agents() {
        let r = partition.range(i);
        let diag = a.view((r.start, r.start), (r.len(), r.len()));
        if diag.amax() > tol {
            return Err(Error::NotPolymatrix(format!(
                "diagonal block of agent {i} has entry of magnitude {:e}",
                diag.amax()
            )));
        }
    }
    Ok(())
}

/// `1e-12 * max(1, ||A||_max)`.
pub fn default_classify_tolerance(a: &DMatrix<f64>) -> f64 {
    1e-12 * a.amax().max(1.0)
}

/// Classifies a consolidated matrix.
///
/// `A ~ 0` satisfies both symmetry tests and is reported as zero-sum.
pub fn classify(a: &DMatrix<f64>, partition: &AgentPartition, tol: Option<f64>) -> Result<GameClass> {
    let k = partition.total();
    if a.shape() != (k, k) {
        return Err(Error::NotPolymatrix(format!(
            "matrix shape {:?} does not match K = {k}",
            a.shape()
        )));
    }
    let tol = tol.unwrap_or_else(|| default_classify_tolerance(a));
    check_diagonal_blocks(a, partition, tol)?;
    let at = a.transpose();
    if (a + &at).amax() <= tol {
        Ok(GameClass::ZeroSum)
    } else if (a - &at).amax() <= tol {
        Ok(GameClass::Coordination)
    } else {
        Ok(GameClass::General)
    }
}
