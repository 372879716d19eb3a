//! Elimination of an affine constraint `a^T x_i = c` on one agent.
//!
//! Pivoting on a coordinate `w` with `a_w != 0` writes `x_i = L y + m`, where
//! `y` is `x_i` without coordinate `w`, the columns of `L` span the
//! constraint's tangent space `{v : a^T v = 0}` and `m = (c / a_w) e_w`.
//! Substituting turns every opponent's bilinear term against agent `i` into
//! a smaller block plus a linear cost, and agent `i`'s own objective into
//! `y^T L^T (-b_i + sum_j A^{(ij)} x_j)` up to a term that does not depend on
//! `y`. That constant is dropped: it changes payoffs but not best responses.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::game::{AgentPartition, GameClass, InteractionBlock, PolymatrixGame, StrategyProfile};

/// A reduced game together with the data needed to lift its profiles back.
#[derive(Debug, Clone)]
pub struct AffineReduction {
    reduced: PolymatrixGame,
    original: AgentPartition,
    agent: usize,
    pivot: usize,
    coeffs: DVector<f64>,
    rhs: f64,
    tangent: DMatrix<f64>,
    offset: DVector<f64>,
}

impl AffineReduction {
    pub fn game(&self) -> &PolymatrixGame {
        &self.reduced
    }

    pub fn into_game(self) -> PolymatrixGame {
        self.reduced
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn pivot(&self) -> usize {
        self.pivot
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn rhs(&self) -> f64 {
        self.rhs
    }

    pub fn original_partition(&self) -> &AgentPartition {
        &self.original
    }

    /// The `k_i x (k_i - 1)` matrix `L` with `x_i = L y + m`.
    pub fn tangent_map(&self) -> &DMatrix<f64> {
        &self.tangent
    }

    /// Rebuilds a full profile, recovering `x_{iw} = (c - a_{-w} x_{i,-w}) / a_w`.
    pub fn lift(&self, y: &StrategyProfile) -> Result<StrategyProfile> {
        let reduced = self.reduced.partition();
        if y.len() != reduced.total() {
            return Err(Error::ShapeMismatch {
                expected: reduced.total(),
                actual: y.len(),
            });
        }
        let mut x = DVector::zeros(self.original.total());
        for agent in 0..self.original.agents() {
            let src = reduced.range(agent);
            let dst = self.original.range(agent);
            let yi = y.vector().rows(src.start, src.len());
            if agent == self.agent {
                let xi = &self.tangent * yi + &self.offset;
                x.rows_mut(dst.start, dst.len()).copy_from(&xi);
            } else {
                x.rows_mut(dst.start, dst.len()).copy_from(&yi);
            }
        }
        Ok(StrategyProfile::new(x))
    }

    /// Drops the pivot coordinate. Inverse of [`lift`](Self::lift) on the
    /// constraint surface.
    pub fn restrict(&self, x: &StrategyProfile) -> Result<StrategyProfile> {
        if x.len() != self.original.total() {
            return Err(Error::ShapeMismatch {
                expected: self.original.total(),
                actual: x.len(),
            });
        }
        let drop = self.original.offset(self.agent) + self.pivot;
        let kept: Vec<f64> = x
            .as_slice()
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != drop)
            .map(|(_, &v)| v)
            .collect();
        Ok(StrategyProfile::from(kept))
    }

    /// Residual of `a^T x_i = c` at a full profile.
    pub fn constraint_residual(&self, x: &StrategyProfile) -> f64 {
        let xi = DVector::from_column_slice(x.agent(&self.original, self.agent));
        self.coeffs.dot(&xi) - self.rhs
    }
}

/// Substitutes out coordinate `pivot` of `agent` using `coeffs^T x_i = rhs`.
///
/// The result is always tagged [`GameClass::General`].
pub fn affine_reduce(
    game: &PolymatrixGame,
    agent: usize,
    coeffs: &[f64],
    rhs: f64,
    pivot: usize,
) -> Result<AffineReduction> {
    let partition = game.partition();
    partition.check_agent(agent)?;
    let ki = partition.dim(agent);
    if coeffs.len() != ki {
        return Err(Error::ShapeMismatch {
            expected: ki,
            actual: coeffs.len(),
        });
    }
    if pivot >= ki {
        return Err(Error::InvalidGame(format!(
            "pivot {pivot} out of range for agent {agent} with {ki} coordinates"
        )));
    }
    let aw = coeffs[pivot];
    if aw == 0.0 || !aw.is_finite() {
        return Err(Error::ZeroPivot);
    }
    if ki == 1 {
        return Err(Error::EmptyAgent(agent));
    }

    let mut tangent = DMatrix::zeros(ki, ki - 1);
    let mut col = 0;
    for u in 0..ki {
        if u == pivot {
            continue;
        }
        tangent[(u, col)] = 1.0;
        tangent[(pivot, col)] = -coeffs[u] / aw;
        col += 1;
    }
    let mut offset = DVector::zeros(ki);
    offset[pivot] = rhs / aw;

    let mut dims = partition.dims().to_vec();
    dims[agent] -= 1;
    let reduced_partition = AgentPartition::new(dims)?;

    let n = partition.agents();
    let mut costs = DVector::zeros(reduced_partition.total());
    for p in 0..n {
        let src = partition.range(p);
        let dst = reduced_partition.range(p);
        let bp = game.costs().rows(src.start, src.len());
        if p == agent {
            costs.rows_mut(dst.start, dst.len()).copy_from(&(tangent.transpose() * bp));
        } else {
            // x_p^T A^{(pi)} m moves into agent p's linear cost.
            let shifted = bp - game.block(p, agent) * &offset;
            costs.rows_mut(dst.start, dst.len()).copy_from(&shifted);
        }
    }

    let mut blocks = Vec::new();
    for p in 0..n {
        for q in 0..n {
            if p == q {
                continue;
            }
            let block = game.block(p, q);
            let reduced = if q == agent {
                block * &tangent
            } else if p == agent {
                tangent.transpose() * block
            } else {
                block
            };
            if reduced.iter().any(|&v| v != 0.0) {
                blocks.push(InteractionBlock::new(p, q, reduced));
            }
        }
    }

    let reduced = PolymatrixGame::new(
        reduced_partition,
        GameClass::General,
        blocks,
        costs.as_slice().to_vec(),
    )?;
    Ok(AffineReduction {
        reduced,
        original: partition.clone(),
        agent,
        pivot,
        coeffs: DVector::from_column_slice(coeffs),
        rhs,
        tangent,
        offset,
    })
}

/// Largest-magnitude coefficient, the numerically safest pivot.
pub fn default_pivot(coeffs: &[f64]) -> Option<usize> {
    coeffs
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{equilibrium_set, solve_unique, EquilibriumOutcome, SolveOutcome};
    use nalgebra::dmatrix;

    fn matching_pennies() -> PolymatrixGame {
        let p = AgentPartition::new(vec![2, 2]).unwrap();
        let block = dmatrix![1.0, -1.0; -1.0, 1.0];
        PolymatrixGame::new(p, GameClass::ZeroSum, vec![InteractionBlock::new(0, 1, block)], vec![0.0; 4])
            .unwrap()
    }

    #[test]
    fn rejects_zero_pivot_and_singleton_agent() {
        let g = matching_pennies();
        assert!(matches!(affine_reduce(&g, 0, &[0.0, 1.0], 1.0, 0), Err(Error::ZeroPivot)));
        let p = AgentPartition::new(vec![1, 1]).unwrap();
        let g1 = PolymatrixGame::new(p, GameClass::General, vec![], vec![0.0; 2]).unwrap();
        assert!(matches!(affine_reduce(&g1, 1, &[2.0], 1.0, 0), Err(Error::EmptyAgent(1))));
        assert!(affine_reduce(&g, 2, &[1.0, 1.0], 1.0, 0).is_err());
    }

    #[test]
    fn unit_constraint_drops_coordinate() {
        let g = matching_pennies();
        let red = affine_reduce(&g, 0, &[1.0, 0.0], 0.75, 0).unwrap();
        assert_eq!(red.game().partition().dims(), &[1, 2]);
        assert_eq!(red.game().class(), GameClass::General);
        let y = StrategyProfile::from_slice(&[0.2, 0.3, 0.4]);
        let x = red.lift(&y).unwrap();
        assert_eq!(x.as_slice(), &[0.75, 0.2, 0.3, 0.4]);
        assert_eq!(red.restrict(&x).unwrap(), y);
        assert_eq!(red.constraint_residual(&x), 0.0);
    }

    #[test]
    fn simplex_interior_equilibrium_survives_reduction() {
        let g = matching_pennies();
        let first = affine_reduce(&g, 0, &[1.0, 1.0], 1.0, 1).unwrap();
        let second = affine_reduce(first.game(), 1, &[1.0, 1.0], 1.0, 1).unwrap();
        assert_eq!(second.game().partition().dims(), &[1, 1]);

        let y = match solve_unique(second.game()) {
            SolveOutcome::Unique(y) => y,
            other => panic!("expected a unique reduced equilibrium, got {other:?}"),
        };
        let x = first.lift(&second.lift(&y).unwrap()).unwrap();
        for v in x.as_slice() {
            assert!((v - 0.5).abs() < 1e-12, "lifted profile {:?}", x.as_slice());
        }

        // Brute-force best-response check on the reduced game: no grid
        // deviation of either agent improves its payoff.
        let red = second.game();
        for agent in 0..2 {
            let base = red.utility(&y, agent).unwrap();
            for step in -40..=40 {
                let mut dev = y.vector().clone();
                dev[agent] = y.vector()[agent] + step as f64 * 0.05;
                let u = red.utility(&StrategyProfile::new(dev), agent).unwrap();
                assert!(u <= base + 1e-12, "agent {agent} gains {} at step {step}", u - base);
            }
        }
    }

    #[test]
    fn zero_constraint_matches_sliced_equilibrium_set() {
        // dims (2,1): A = [[0,0,1],[0,0,2],[1,1,0]], b = (1,2,3).
        // Equilibria: x3 = 1, x1 + x2 = 3. Fixing x2 = 0 leaves x = (3,0,1).
        let p = AgentPartition::new(vec![2, 1]).unwrap();
        let g = PolymatrixGame::new(
            p,
            GameClass::General,
            vec![
                InteractionBlock::new(0, 1, dmatrix![1.0; 2.0]),
                InteractionBlock::new(1, 0, dmatrix![1.0, 1.0]),
            ],
            vec![1.0, 2.0, 3.0],
        )
        .unwrap();
        let set = match equilibrium_set(&g) {
            EquilibriumOutcome::Set(s) => s,
            EquilibriumOutcome::NoEquilibrium { .. } => panic!("consistent system"),
        };
        assert_eq!(set.nullity(), 1);
        let d = &set.basis()[0];
        let lambda = -set.particular()[1] / d[1];
        let sliced = set.particular() + d * lambda;

        let red = affine_reduce(&g, 0, &[0.0, 1.0], 0.0, 1).unwrap();
        let y = match solve_unique(red.game()) {
            SolveOutcome::Unique(y) => y,
            other => panic!("reduced game should be uniquely solvable, got {other:?}"),
        };
        let lifted = red.lift(&y).unwrap();
        assert!((lifted.vector() - &sliced).amax() < 1e-12);
        assert!((lifted.vector() - DVector::from_column_slice(&[3.0, 0.0, 1.0])).amax() < 1e-12);
    }

    #[test]
    fn default_pivot_picks_largest_coefficient() {
        assert_eq!(default_pivot(&[0.5, -2.0, 1.0]), Some(1));
        assert_eq!(default_pivot(&[1.0, 1.0]), Some(0));
        assert_eq!(default_pivot(&[0.0, 0.0]), None);
    }
}
