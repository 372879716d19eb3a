//! Gaussian sampling of games by class, and Monte-Carlo uniqueness estimates.
//!
//! Sample `index` draws from its own ChaCha stream (`seed`, stream =
//! `index`), so a report is the same whatever the worker count or the order
//! in which samples are evaluated.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{uniqueness_preconditions, Verdict};
use crate::error::{Error, Result};
use crate::format;
use crate::game::{AgentPartition, GameClass, InteractionBlock, PolymatrixGame, StrategyProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub class: GameClass,
    pub partition: AgentPartition,
    /// Standard deviation of every free entry.
    #[serde(with = "format::real")]
    pub scale: f64,
    pub seed: u64,
    pub samples: usize,
    /// Draw `b` from the same Gaussian instead of using `b = 0`.
    #[serde(default)]
    pub sample_costs: bool,
}

impl SamplerConfig {
    pub fn new(class: GameClass, partition: AgentPartition, seed: u64, samples: usize) -> Self {
        Self {
            class,
            partition,
            scale: 1.0,
            seed,
            samples,
            sample_costs: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidSampler("samples must be at least 1".into()));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidSampler(format!("scale must be positive, got {}", self.scale)));
        }
        Ok(())
    }
}

/// Random generator for sample `index`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws one game. Free blocks are `i < j` for symmetric classes and all
/// `i != j` for general games, filled row-major in `(i, j)` order.
pub fn sample_game(config: &SamplerConfig, index: u64) -> Result<PolymatrixGame> {
    config.validate()?;
    let mut rng = sample_rng(config.seed, index);
    let normal = Normal::new(0.0, config.scale)
        .map_err(|e| Error::InvalidSampler(e.to_string()))?;
    let p = &config.partition;
    let n = p.agents();
    let mut blocks = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j || (config.class.is_symmetric() && i > j) {
                continue;
            }
            let (ki, kj) = (p.dim(i), p.dim(j));
            let data: Vec<f64> = (0..ki * kj).map(|_| normal.sample(&mut rng)).collect();
            blocks.push(InteractionBlock::new(i, j, DMatrix::from_row_slice(ki, kj, &data)));
        }
    }
    let costs = if config.sample_costs {
        (0..p.total()).map(|_| normal.sample(&mut rng)).collect()
    } else {
        vec![0.0; p.total()]
    };
    PolymatrixGame::new(p.clone(), config.class, blocks, costs)
}

/// Standard Gaussian starting point of dimension `dim`, scaled by `scale`.
///
/// Draws from stream `u64::MAX`, which game indices never reach.
pub fn sample_profile(seed: u64, dim: usize, scale: f64) -> StrategyProfile {
    let mut rng = sample_rng(seed, u64::MAX);
    let x: Vec<f64> = (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            scale * z
        })
        .collect();
    StrategyProfile::from(x)
}

/// Min / median / max of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(with = "format::real")]
    pub min: f64,
    #[serde(with = "format::real")]
    pub median: f64,
    #[serde(with = "format::real")]
    pub max: f64,
}

impl Summary {
    /// Median of an even-length sample is the mean of the two middle values.
    pub fn of(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "summary of an empty sample");
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        Self {
            min: sorted[0],
            median,
            max: sorted[n - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub config: SamplerConfig,
    pub unique_count: usize,
    pub no_equilibrium_count: usize,
    #[serde(with = "format::real")]
    pub unique_fraction: f64,
    pub min_singular_value: Summary,
    /// `sigma_min / rank_tolerance` per sample.
    pub rank_margin: Summary,
    pub rank_histogram: BTreeMap<usize, usize>,
}

impl MonteCarloReport {
    /// `class,dims,samples,fraction,min_sv_min`.
    pub fn csv_header() -> [&'static str; 5] {
        ["class", "dims", "samples", "fraction", "min_sv_min"]
    }

    pub fn csv_record(&self) -> [String; 5] {
        [
            self.config.class.to_string(),
            self.config.partition.to_string(),
            self.config.samples.to_string(),
            format::real_repr(self.unique_fraction),
            format::real_repr(self.min_singular_value.min),
        ]
    }
}

struct SampleStats {
    verdict: Verdict,
    rank: usize,
    min_sv: f64,
    margin: f64,
}

fn evaluate(config: &SamplerConfig, index: u64) -> SampleStats {
    let game = sample_game(config, index).expect("config validated");
    let report = uniqueness_preconditions(&game);
    SampleStats {
        verdict: report.verdict,
        rank: report.rank,
        min_sv: report.min_singular_value,
        margin: report.rank_margin(),
    }
}

fn aggregate(config: &SamplerConfig, stats: Vec<SampleStats>) -> MonteCarloReport {
    let mut histogram = BTreeMap::new();
    let mut unique = 0;
    let mut inconsistent = 0;
    for s in &stats {
        *histogram.entry(s.rank).or_insert(0) += 1;
        match s.verdict {
            Verdict::Unique => unique += 1,
            Verdict::NoEquilibrium => inconsistent += 1,
            Verdict::NonUnique => {}
        }
    }
    let min_sv: Vec<f64> = stats.iter().map(|s| s.min_sv).collect();
    let margins: Vec<f64> = stats.iter().map(|s| s.margin).collect();
    MonteCarloReport {
        config: config.clone(),
        unique_count: unique,
        no_equilibrium_count: inconsistent,
        unique_fraction: unique as f64 / config.samples as f64,
        min_singular_value: Summary::of(&min_sv),
        rank_margin: Summary::of(&margins),
        rank_histogram: histogram,
    }
}

/// Fraction of sampled games with full numerical rank, on the global rayon pool.
pub fn mc_unique_fraction(config: &SamplerConfig) -> Result<MonteCarloReport> {
    config.validate()?;
    let stats: Vec<SampleStats> = (0..config.samples as u64)
        .into_par_iter()
        .map(|i| evaluate(config, i))
        .collect();
    Ok(aggregate(config, stats))
}

/// As [`mc_unique_fraction`] on a dedicated pool of `workers` threads.
pub fn mc_unique_fraction_with_workers(config: &SamplerConfig, workers: usize) -> Result<MonteCarloReport> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidSampler(format!("cannot build worker pool: {e}")))?;
    pool.install(|| mc_unique_fraction(config))
}
