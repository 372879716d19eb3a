//! Nash equilibria of unconstrained polymatrix games.
//!
//! A profile is an equilibrium exactly when `A x = b`, so the equilibrium
//! set is affine: a particular solution plus the nullspace of `A`. Rank is
//! decided from the singular values against `sigma_max * K * eps`.

use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::format;
use crate::game::{PolymatrixGame, StrategyProfile};

/// Numerical-rank threshold `sigma_max * K * eps` (eps = `f64::EPSILON`).
pub fn rank_tolerance(sigma_max: f64, dim: usize) -> f64 {
    sigma_max * dim as f64 * f64::EPSILON
}

/// Residual bound below which `A x = b` is treated as solvable.
pub fn consistency_tolerance(b: &DVector<f64>) -> f64 {
    1e-8 * b.norm().max(1.0)
}

/// `||A x - b||_2`.
pub fn nash_residual(game: &PolymatrixGame, x: &StrategyProfile) -> Result<f64> {
    Ok(game.payoff_field(x)?.norm())
}

/// Determinant as sign and natural log of the magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Determinant {
    pub sign: i8,
    #[serde(with = "format::opt_real")]
    pub log_abs: Option<f64>,
}

impl Determinant {
    pub fn zero() -> Self {
        Self {
            sign: 0,
            log_abs: None,
        }
    }

    /// Signed value; overflows to infinity for very large determinants.
    pub fn value(&self) -> f64 {
        match self.log_abs {
            Some(l) => self.sign as f64 * l.exp(),
            None => 0.0,
        }
    }

    pub fn magnitude(&self) -> f64 {
        self.value().abs()
    }
}

/// Determinant from an LU factorization with partial pivoting.
pub fn lu_determinant(a: &DMatrix<f64>) -> Determinant {
    assert!(a.is_square(), "determinant of a non-square matrix");
    let lu = a.clone().lu();
    let mut sign: i8 = lu.p().determinant::<f64>().signum() as i8;
    let mut log_abs = 0.0;
    for u in lu.u().diagonal().iter() {
        if *u == 0.0 {
            return Determinant::zero();
        }
        if *u < 0.0 {
            sign = -sign;
        }
        log_abs += u.abs().ln();
    }
    Determinant {
        sign,
        log_abs: Some(log_abs),
    }
}

/// Singular-value view of `A` shared by the solvers below.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Descending.
    pub singular_values: Vec<f64>,
    left: Vec<DVector<f64>>,
    right: Vec<DVector<f64>>,
    pub rank: usize,
    pub tolerance: f64,
}

impl Spectrum {
    pub fn of(a: &DMatrix<f64>) -> Self {
        assert!(a.is_square(), "spectrum of a non-square matrix");
        let k = a.nrows();
        if k == 0 {
            return Self {
                singular_values: vec![],
                left: vec![],
                right: vec![],
                rank: 0,
                tolerance: 0.0,
            };
        }
        let svd = SVD::new(a.clone(), true, true);
        let u = svd.u.as_ref().expect("left singular vectors requested");
        let vt = svd.v_t.as_ref().expect("right singular vectors requested");
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&p, &q| {
            svd.singular_values[q]
                .total_cmp(&svd.singular_values[p])
                .then(p.cmp(&q))
        });
        let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
        let left = order.iter().map(|&i| u.column(i).into_owned()).collect();
        let right = order.iter().map(|&i| vt.row(i).transpose()).collect();
        let tolerance = rank_tolerance(singular_values[0], k);
        let rank = singular_values.iter().filter(|&&s| s > tolerance).count();
        Self {
            singular_values,
            left,
            right,
            rank,
            tolerance,
        }
    }

    pub fn dim(&self) -> usize {
        self.singular_values.len()
    }

    pub fn max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }

    /// Minimum-norm least-squares solution of `A x = b`.
    pub fn pseudo_solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = DVector::zeros(self.dim());
        for w in 0..self.rank {
            x += &self.right[w] * (self.left[w].dot(b) / self.singular_values[w]);
        }
        x
    }

    /// Orthonormal nullspace basis, each vector signed so that its
    /// largest-magnitude entry is positive. Entries within `1e-9` relative
    /// of the largest count as ties and the first of them decides.
    pub fn null_basis(&self) -> Vec<DVector<f64>> {
        self.right[self.rank..]
            .iter()
            .map(|d| {
                let top = d.amax();
                let best = d.iter().position(|v| v.abs() >= top * (1.0 - 1e-9)).unwrap_or(0);
                if d[best] < 0.0 {
                    -d
                } else {
                    d.clone()
                }
            })
            .collect()
    }
}

/// The affine set `{particular + sum_w lambda_w d_w}` of all equilibria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    #[serde(with = "format::dvector")]
    particular: DVector<f64>,
    #[serde(with = "format::dvectors")]
    basis: Vec<DVector<f64>>,
    rank: usize,
    #[serde(with = "format::real")]
    rank_tolerance: f64,
    #[serde(with = "format::real")]
    residual: f64,
}

impl EquilibriumSet {
    /// Minimum-norm equilibrium.
    pub fn particular(&self) -> &DVector<f64> {
        &self.particular
    }

    pub fn basis(&self) -> &[DVector<f64>] {
        &self.basis
    }

    /// `W`, the nullspace dimension.
    pub fn nullity(&self) -> usize {
        self.basis.len()
    }

    pub fn is_unique(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rank_tolerance(&self) -> f64 {
        self.rank_tolerance
    }

    /// `||A particular - b||`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `particular + sum_w lambda_w d_w`.
    pub fn point(&self, lambda: &[f64]) -> StrategyProfile {
        assert_eq!(lambda.len(), self.basis.len(), "one coefficient per basis vector");
        let mut x = self.particular.clone();
        for (l, d) in lambda.iter().zip(&self.basis) {
            x += d * *l;
        }
        StrategyProfile::new(x)
    }

    /// Orthogonal projection of `x0` onto the set.
    pub fn closest(&self, x0: &StrategyProfile) -> StrategyProfile {
        closest_equilibrium(self, x0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EquilibriumOutcome {
    Set(EquilibriumSet),
    NoEquilibrium { residual: f64 },
}

impl EquilibriumOutcome {
    pub fn set(self) -> Option<EquilibriumSet> {
        match self {
            EquilibriumOutcome::Set(s) => Some(s),
            EquilibriumOutcome::NoEquilibrium { .. } => None,
        }
    }
}

/// Equilibrium set of the linear system `A x = b`.
pub fn equilibrium_set_of(a: &DMatrix<f64>, b: &DVector<f64>) -> EquilibriumOutcome {
    let spectrum = Spectrum::of(a);
    equilibrium_set_from(&spectrum, a, b)
}

fn equilibrium_set_from(spectrum: &Spectrum, a: &DMatrix<f64>, b: &DVector<f64>) -> EquilibriumOutcome {
    let particular = spectrum.pseudo_solve(b);
    let residual = (a * &particular - b).norm();
    if residual > consistency_tolerance(b) {
        return EquilibriumOutcome::NoEquilibrium { residual };
    }
    EquilibriumOutcome::Set(EquilibriumSet {
        particular,
        basis: spectrum.null_basis(),
        rank: spectrum.rank,
        rank_tolerance: spectrum.tolerance,
        residual,
    })
}

pub fn equilibrium_set(game: &PolymatrixGame) -> EquilibriumOutcome {
    equilibrium_set_of(&game.consolidate(), game.costs())
}

/// `x* = particular + sum_w (d_w^T (x0 - particular)) d_w`.
pub fn closest_equilibrium(set: &EquilibriumSet, x0: &StrategyProfile) -> StrategyProfile {
    assert_eq!(x0.len(), set.particular.len(), "profile length");
    let offset = x0.vector() - &set.particular;
    let mut x = set.particular.clone();
    for d in &set.basis {
        x += d * d.dot(&offset);
    }
    StrategyProfile::new(x)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveOutcome {
    Unique(StrategyProfile),
    NonUnique { nullity: usize },
    NoEquilibrium,
}

/// `x* = A^{-1} b` when `A` has full numerical rank.
pub fn solve_unique(game: &PolymatrixGame) -> SolveOutcome {
    let a = game.consolidate();
    let spectrum = Spectrum::of(&a);
    let k = a.nrows();
    if spectrum.rank == k {
        if let Some(x) = a.clone().lu().solve(game.costs()) {
            return SolveOutcome::Unique(StrategyProfile::new(x));
        }
    }
    match equilibrium_set_from(&spectrum, &a, game.costs()) {
        EquilibriumOutcome::Set(s) => SolveOutcome::NonUnique { nullity: s.nullity() },
        EquilibriumOutcome::NoEquilibrium { .. } => SolveOutcome::NoEquilibrium,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Unique,
    NonUnique,
    NoEquilibrium,
}

/// Structural and numerical uniqueness diagnostics for one game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub dims: Vec<usize>,
    pub dimension: usize,
    /// `k_i <= K/2` per agent.
    pub half_condition: Vec<bool>,
    /// `K` even; necessary for uniqueness in zero-sum games.
    pub parity_condition: bool,
    pub determinant: Determinant,
    pub rank: usize,
    #[serde(with = "format::real")]
    pub rank_tolerance: f64,
    #[serde(with = "format::real")]
    pub min_singular_value: f64,
    #[serde(with = "format::real")]
    pub max_singular_value: f64,
    pub verdict: Verdict,
}

impl UniquenessReport {
    /// `sigma_min / rank_tolerance`; infinite when the tolerance is zero.
    pub fn rank_margin(&self) -> f64 {
        if self.rank_tolerance > 0.0 {
            self.min_singular_value / self.rank_tolerance
        } else if self.min_singular_value > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

pub fn uniqueness_preconditions(game: &PolymatrixGame) -> UniquenessReport {
    let a = game.consolidate();
    let spectrum = Spectrum::of(&a);
    let k = game.dimension();
    let verdict = if spectrum.rank == k {
        Verdict::Unique
    } else {
        match equilibrium_set_from(&spectrum, &a, game.costs()) {
            EquilibriumOutcome::Set(_) => Verdict::NonUnique,
            EquilibriumOutcome::NoEquilibrium { .. } => Verdict::NoEquilibrium,
        }
    };
    UniquenessReport {
        dims: game.partition().dims().to_vec(),
        dimension: k,
        half_condition: game.partition().half_condition(),
        parity_condition: k % 2 == 0,
        determinant: lu_determinant(&a),
        rank: spectrum.rank,
        rank_tolerance: spectrum.tolerance,
        min_singular_value: spectrum.min(),
        max_singular_value: spectrum.max(),
        verdict,
    }
}
