//! Polymatrix games with continuous strategy spaces: equilibrium structure,
//! uniqueness witnesses, random ensembles and gradient dynamics.

pub mod constructions;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod expm;
pub mod format;
pub mod game;
pub mod io;
pub mod leibniz;
pub mod plot;
pub mod reduce;
pub mod sampling;

pub use constructions::{construct, verify_construction, witness_matrix, ConstructionKind, ConstructionSpec};
pub use dynamics::{
    convergence_report, residual_identity_check, simulate, time_average, ConvergenceReport, FitWindow,
    IntegratorConfig, Method, Trajectory,
};
pub use equilibrium::{
    closest_equilibrium, equilibrium_set, nash_residual, solve_unique, uniqueness_preconditions,
    EquilibriumOutcome, EquilibriumSet, SolveOutcome, UniquenessReport, Verdict,
};
pub use error::{Error, Result};
pub use game::{classify, AgentPartition, GameClass, InteractionBlock, PolymatrixGame, StrategyProfile};
pub use reduce::{affine_reduce, AffineReduction};
pub use sampling::{mc_unique_fraction, sample_game, sample_profile, MonteCarloReport, SamplerConfig};
