//! Continuous-time gradient descent `x' = A x - b`.
//!
//! Every agent follows its own utility gradient. In zero-sum games the flow
//! keeps `||x(t) - x*||` fixed for every equilibrium `x*`, stays on the
//! hyperplanes `d^T x = d^T x*` for nullspace directions `d`, and its time
//! average converges to the equilibrium closest to `x(0)`.
//!
//! The running integral `int_0^t x(s) ds` is carried by the integrator
//! itself: exactly, through an augmented exponential, for [`Method::ExactFlow`],
//! and with the same stage weights as the state for [`Method::RungeKutta4`].
//! In both cases `A int_0^t x - t b = x(t) - x(0)` holds up to rounding.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::equilibrium::{closest_equilibrium, equilibrium_set_of, EquilibriumOutcome, EquilibriumSet};
use crate::error::{Error, Result};
use crate::expm::expm;
use crate::format;
use crate::game::{classify, GameClass, PolymatrixGame, StrategyProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// `x(t) = x* + e^{At} (x(0) - x*)`.
    ExactFlow,
    RungeKutta4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Fixed RK4 step; rounded down so it divides `record_every`.
    #[serde(with = "format::real")]
    pub step: f64,
    #[serde(with = "format::real")]
    pub horizon: f64,
    #[serde(with = "format::real")]
    pub record_every: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::ExactFlow,
            step: 1e-3,
            horizon: 1e3,
            record_every: 0.1,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !(positive(self.step) && positive(self.horizon) && positive(self.record_every)) {
            return Err(Error::InvalidIntegrator(
                "step, horizon and record interval must be positive".into(),
            ));
        }
        if self.method == Method::RungeKutta4 && self.step > self.record_every {
            return Err(Error::InvalidIntegrator(format!(
                "step {} exceeds record interval {}",
                self.step, self.record_every
            )));
        }
        if self.record_every > self.horizon {
            return Err(Error::InvalidIntegrator(format!(
                "record interval {} exceeds horizon {}",
                self.record_every, self.horizon
            )));
        }
        Ok(())
    }

    fn records(&self) -> usize {
        (self.horizon / self.record_every + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DynamicsWarning {
    /// No equilibrium: the component of `b` outside the range of `A` grows linearly.
    UnboundedDrift,
    /// Symmetric nonzero `A` has a positive eigenvalue, or the run overflowed.
    ExponentialDivergence,
    /// `A` is not skew-symmetric, so distances to equilibria are not conserved.
    NonConservative,
}

/// Recorded states and time averages.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// `(1/t) int_0^t x(s) ds`, with `x(0)` at `t = 0`.
    pub averages: Vec<DVector<f64>>,
    pub warnings: Vec<DynamicsWarning>,
}

impl Trajectory {
    /// Builds a trajectory from recorded samples, averaging with the
    /// trapezoidal rule on the given grid.
    pub fn from_samples(times: Vec<f64>, states: Vec<DVector<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() {
            return Err(Error::InvalidIntegrator(
                "need one state per time and at least one sample".into(),
            ));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidIntegrator(
                "times must start at 0 and increase".into(),
            ));
        }
        let mut averages = Vec::with_capacity(states.len());
        let mut integral = DVector::zeros(states[0].len());
        averages.push(states[0].clone());
        for k in 1..states.len() {
            let h = times[k] - times[k - 1];
            integral += (&states[k - 1] + &states[k]) * (0.5 * h);
            averages.push(&integral / times[k]);
        }
        Ok(Self {
            times,
            states,
            averages,
            warnings: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn initial(&self) -> &DVector<f64> {
        &self.states[0]
    }

    /// Index of the recorded time closest to `t`.
    pub fn index_near(&self, t: f64) -> usize {
        let i = self.times.partition_point(|&s| s < t);
        if i == 0 {
            0
        } else if i == self.times.len() || (t - self.times[i - 1]) <= (self.times[i] - t) {
            i - 1
        } else {
            i
        }
    }
}

fn warnings_for(a: &DMatrix<f64>, game: &PolymatrixGame, consistent: bool) -> Vec<DynamicsWarning> {
    let mut warnings = Vec::new();
    if !consistent {
        warnings.push(DynamicsWarning::UnboundedDrift);
    }
    match classify(a, game.partition(), None) {
        Ok(GameClass::ZeroSum) => {}
        Ok(GameClass::Coordination) => warnings.push(DynamicsWarning::ExponentialDivergence),
        _ => warnings.push(DynamicsWarning::NonConservative),
    }
    warnings
}

/// Integrates the gradient flow from `x0`.
///
/// `ExactFlow` needs an equilibrium and fails with [`Error::NoEquilibrium`]
/// otherwise; `RungeKutta4` runs regardless and flags the drift.
pub fn simulate(game: &PolymatrixGame, x0: &StrategyProfile, config: &IntegratorConfig) -> Result<Trajectory> {
    config.validate()?;
    let k = game.dimension();
    if x0.len() != k {
        return Err(Error::ShapeMismatch {
            expected: k,
            actual: x0.len(),
        });
    }
    let a = game.consolidate();
    let outcome = equilibrium_set_of(&a, game.costs());
    let consistent = matches!(outcome, EquilibriumOutcome::Set(_));
    let warnings = warnings_for(&a, game, consistent);
    let mut traj = match (config.method, outcome) {
        (Method::ExactFlow, EquilibriumOutcome::NoEquilibrium { .. }) => return Err(Error::NoEquilibrium),
        (Method::ExactFlow, EquilibriumOutcome::Set(set)) => exact_flow(&a, &set, x0, config),
        (Method::RungeKutta4, _) => runge_kutta(&a, game.costs(), x0, config),
    };
    traj.warnings = warnings;
    let blew_up = traj.states.iter().any(|x| x.iter().any(|v| !v.is_finite()));
    if blew_up && !traj.warnings.contains(&DynamicsWarning::ExponentialDivergence) {
        traj.warnings.push(DynamicsWarning::ExponentialDivergence);
    }
    Ok(traj)
}

fn exact_flow(a: &DMatrix<f64>, set: &EquilibriumSet, x0: &StrategyProfile, config: &IntegratorConfig) -> Trajectory {
    let k = a.nrows();
    let h = config.record_every;
    // exp([[A, 0], [I, 0]] h) = [[e^{Ah}, 0], [int_0^h e^{As} ds, I]]
    let mut aug = DMatrix::zeros(2 * k, 2 * k);
    aug.view_mut((0, 0), (k, k)).copy_from(a);
    aug.view_mut((k, 0), (k, k)).fill_with_identity();
    let big = expm(&(aug * h));
    let step = big.view((0, 0), (k, k)).into_owned();
    let weight = big.view((k, 0), (k, k)).into_owned();

    let center = closest_equilibrium(set, x0).into_vector();
    let mut offset = x0.vector() - &center;
    let mut integral = DVector::zeros(k);
    let n = config.records();
    let mut traj = Trajectory {
        times: Vec::with_capacity(n + 1),
        states: Vec::with_capacity(n + 1),
        averages: Vec::with_capacity(n + 1),
        warnings: Vec::new(),
    };
    traj.times.push(0.0);
    traj.states.push(x0.vector().clone());
    traj.averages.push(x0.vector().clone());
    for i in 1..=n {
        integral += &center * h + &weight * &offset;
        offset = &step * &offset;
        let t = i as f64 * h;
        traj.times.push(t);
        traj.states.push(&center + &offset);
        traj.averages.push(&integral / t);
    }
    traj
}

fn runge_kutta(a: &DMatrix<f64>, b: &DVector<f64>, x0: &StrategyProfile, config: &IntegratorConfig) -> Trajectory {
    let k = a.nrows();
    let substeps = (config.record_every / config.step - 1e-9).ceil().max(1.0) as usize;
    let h = config.record_every / substeps as f64;
    let n = config.records();

    let mut x = x0.vector().clone();
    let mut integral = DVector::zeros(k);
    let mut stage = DVector::zeros(k);
    let mut slope = DVector::zeros(k);
    let mut dx = DVector::zeros(k);
    let mut dint = DVector::zeros(k);

    let mut traj = Trajectory {
        times: Vec::with_capacity(n + 1),
        states: Vec::with_capacity(n + 1),
        averages: Vec::with_capacity(n + 1),
        warnings: Vec::new(),
    };
    traj.times.push(0.0);
    traj.states.push(x.clone());
    traj.averages.push(x.clone());

    let field = |out: &mut DVector<f64>, at: &DVector<f64>| {
        out.copy_from(b);
        out.gemv(1.0, a, at, -1.0);
    };
    for i in 1..=n {
        for _ in 0..substeps {
            // Stage 1
            field(&mut slope, &x);
            dx.copy_from(&slope);
            dint.copy_from(&x);
            // Stage 2
            stage.copy_from(&x);
            stage.axpy(0.5 * h, &slope, 1.0);
            dint.axpy(2.0, &stage, 1.0);
            field(&mut slope, &stage);
            dx.axpy(2.0, &slope, 1.0);
            // Stage 3
            stage.copy_from(&x);
            stage.axpy(0.5 * h, &slope, 1.0);
            dint.axpy(2.0, &stage, 1.0);
            field(&mut slope, &stage);
            dx.axpy(2.0, &slope, 1.0);
            // Stage 4
            stage.copy_from(&x);
            stage.axpy(h, &slope, 1.0);
            dint.axpy(1.0, &stage, 1.0);
            field(&mut slope, &stage);
            dx.axpy(1.0, &slope, 1.0);

            x.axpy(h / 6.0, &dx, 1.0);
            integral.axpy(h / 6.0, &dint, 1.0);
        }
        let t = i as f64 * config.record_every;
        traj.times.push(t);
        traj.states.push(x.clone());
        traj.averages.push(&integral / t);
    }
    traj
}

/// Time averages `x_bar(t_k)` as strategy profiles.
pub fn time_average(traj: &Trajectory) -> Vec<StrategyProfile> {
    traj.averages.iter().cloned().map(StrategyProfile::new).collect()
}

/// `max_{t_k > 0} ||A x_bar(t_k) - b - (x(t_k) - x(0)) / t_k||`.
pub fn residual_identity_check(game: &PolymatrixGame, traj: &Trajectory) -> f64 {
    let a = game.consolidate();
    let x0 = traj.initial();
    traj.times
        .iter()
        .zip(traj.states.iter().zip(&traj.averages))
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, (x, avg))| (&a * avg - game.costs() - (x - x0) / *t).norm())
        .fold(0.0, f64::max)
}

/// `||x(t_k) - x*||^2` per sample.
pub fn energy_series(traj: &Trajectory, xstar: &StrategyProfile) -> Vec<f64> {
    traj.states
        .iter()
        .map(|x| (x - xstar.vector()).norm_squared())
        .collect()
}

/// `max_w |d_w^T (x(t_k) - x*)|` per sample.
pub fn hyperplane_drift_series(traj: &Trajectory, set: &EquilibriumSet, xstar: &StrategyProfile) -> Vec<f64> {
    traj.states
        .iter()
        .map(|x| {
            let diff = x - xstar.vector();
            set.basis()
                .iter()
                .map(|d| d.dot(&diff).abs())
                .fold(0.0, f64::max)
        })
        .collect()
}

/// `||A x_bar(t_k) - b||` per sample.
pub fn average_residual_series(game: &PolymatrixGame, traj: &Trajectory) -> Vec<f64> {
    let a = game.consolidate();
    traj.averages
        .iter()
        .map(|avg| (&a * avg - game.costs()).norm())
        .collect()
}

/// Per-sample diagnostics relative to the equilibrium closest to `x(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub closest: Option<StrategyProfile>,
    pub energy: Option<Vec<f64>>,
    pub hyperplane_drift: Option<Vec<f64>>,
    pub average_residual: Vec<f64>,
}

pub fn diagnose(game: &PolymatrixGame, traj: &Trajectory) -> Diagnostics {
    let average_residual = average_residual_series(game, traj);
    let x0 = StrategyProfile::new(traj.initial().clone());
    match crate::equilibrium::equilibrium_set(game) {
        EquilibriumOutcome::Set(set) => {
            let closest = closest_equilibrium(&set, &x0);
            Diagnostics {
                energy: Some(energy_series(traj, &closest)),
                hyperplane_drift: Some(hyperplane_drift_series(traj, &set, &closest)),
                closest: Some(closest),
                average_residual,
            }
        }
        EquilibriumOutcome::NoEquilibrium { .. } => Diagnostics {
            closest: None,
            energy: None,
            hyperplane_drift: None,
            average_residual,
        },
    }
}

/// Time range for the log-log decay fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    #[serde(with = "format::real")]
    pub from: f64,
    #[serde(with = "format::real")]
    pub to: f64,
}

impl FitWindow {
    /// `[10, T/2]`, leaving the second half of the run for the envelope.
    pub fn for_horizon(horizon: f64) -> Self {
        Self {
            from: 10.0,
            to: horizon / 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    #[serde(with = "format::reals")]
    pub closest_equilibrium: Vec<f64>,
    pub nullity: usize,
    /// `||x(0) - x*_closest||`.
    #[serde(with = "format::real")]
    pub initial_distance: f64,
    #[serde(with = "format::reals")]
    pub times: Vec<f64>,
    /// `||x_bar(t_k) - x*_closest||`.
    #[serde(with = "format::reals")]
    pub distances: Vec<f64>,
    #[serde(with = "format::real")]
    pub final_distance: f64,
    pub fit_window: FitWindow,
    /// Least-squares slope of `ln envelope` against `ln t`, where the
    /// envelope at `t` is the largest distance recorded at or after `t`.
    #[serde(with = "format::opt_real")]
    pub decay_slope: Option<f64>,
    #[serde(with = "format::real")]
    pub max_hyperplane_drift: f64,
    #[serde(with = "format::real")]
    pub max_energy_drift: f64,
    #[serde(with = "format::real")]
    pub max_relative_energy_drift: f64,
    #[serde(with = "format::real")]
    pub residual_identity_error: f64,
}

/// Slope of the log-log fit of the tail-maximum envelope of `values`.
pub fn envelope_decay_slope(times: &[f64], values: &[f64], window: FitWindow) -> Option<f64> {
    assert_eq!(times.len(), values.len());
    if times.is_empty() || !(window.from > 0.0 && window.to > window.from) {
        return None;
    }
    if window.to > *times.last().unwrap() + 1e-9 {
        return None;
    }
    let mut envelope = values.to_vec();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    const POINTS: usize = 64;
    let (lo, hi) = (window.from.ln(), window.to.ln());
    let mut picked: Vec<usize> = (0..POINTS)
        .map(|p| {
            let t = (lo + (hi - lo) * p as f64 / (POINTS - 1) as f64).exp();
            let i = times.partition_point(|&s| s < t);
            i.min(times.len() - 1)
        })
        .collect();
    picked.dedup();
    if picked.len() < 2 {
        return None;
    }
    let mut xs = Vec::with_capacity(picked.len());
    let mut ys = Vec::with_capacity(picked.len());
    for &i in &picked {
        if envelope[i] <= 0.0 || times[i] <= 0.0 {
            return None;
        }
        xs.push(times[i].ln());
        ys.push(envelope[i].ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Convergence of the time average to the equilibrium closest to `x(0)`.
pub fn convergence_report(game: &PolymatrixGame, traj: &Trajectory, window: FitWindow) -> Result<ConvergenceReport> {
    let a = game.consolidate();
    if classify(&a, game.partition(), None)? != GameClass::ZeroSum {
        return Err(Error::NotZeroSum);
    }
    let set = match equilibrium_set_of(&a, game.costs()) {
        EquilibriumOutcome::Set(s) => s,
        EquilibriumOutcome::NoEquilibrium { .. } => return Err(Error::NoEquilibrium),
    };
    let x0 = StrategyProfile::new(traj.initial().clone());
    let closest = closest_equilibrium(&set, &x0);
    let distances: Vec<f64> = traj
        .averages
        .iter()
        .map(|avg| (avg - closest.vector()).norm())
        .collect();
    let energy = energy_series(traj, &closest);
    let e0 = energy[0];
    let max_energy_drift = energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
    let max_relative_energy_drift = if e0 > 0.0 { max_energy_drift / e0 } else { max_energy_drift };
    let drift = hyperplane_drift_series(traj, &set, &closest);
    Ok(ConvergenceReport {
        closest_equilibrium: closest.as_slice().to_vec(),
        nullity: set.nullity(),
        initial_distance: e0.sqrt(),
        times: traj.times.clone(),
        final_distance: *distances.last().expect("nonempty trajectory"),
        decay_slope: envelope_decay_slope(&traj.times, &distances, window),
        distances,
        fit_window: window,
        max_hyperplane_drift: drift.into_iter().fold(0.0, f64::max),
        max_energy_drift,
        max_relative_energy_drift,
        residual_identity_error: residual_identity_check(game, traj),
    })
}

/// Writes `t, x_1..x_K, xbar_1..xbar_K, energy, max_hyperplane_drift, avg_residual`.
///
/// Energy and drift are measured against the equilibrium closest to `x(0)`
/// and left empty when the game has none.
pub fn write_trajectory_csv<W: Write>(out: W, traj: &Trajectory, diag: &Diagnostics) -> Result<()> {
    let k = traj.initial().len();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=k).map(|i| format!("x_{i}")));
    header.extend((1..=k).map(|i| format!("xbar_{i}")));
    header.extend(["energy", "max_hyperplane_drift", "avg_residual"].map(String::from));
    w.write_record(&header).map_err(|e| Error::Format(e.to_string()))?;
    let opt = |series: &Option<Vec<f64>>, i: usize| {
        series.as_ref().map(|s| format::real_repr(s[i])).unwrap_or_default()
    };
    for i in 0..traj.len() {
        let mut row = Vec::with_capacity(2 * k + 4);
        row.push(format::real_repr(traj.times[i]));
        row.extend(traj.states[i].iter().map(|v| format::real_repr(*v)));
        row.extend(traj.averages[i].iter().map(|v| format::real_repr(*v)));
        row.push(opt(&diag.energy, i));
        row.push(opt(&diag.hyperplane_drift, i));
        row.push(format::real_repr(diag.average_residual[i]));
        w.write_record(&row).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}
