use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use polymatrix::dynamics::{energy_series, hyperplane_drift_series};
use polymatrix::{
    closest_equilibrium, equilibrium_set, residual_identity_check, simulate, AgentPartition, GameClass,
    IntegratorConfig, InteractionBlock, Method, PolymatrixGame, StrategyProfile,
};

fn uniform_zero_sum(dims: &[usize], rng: &mut ChaCha8Rng, bound: f64) -> PolymatrixGame {
    let p = AgentPartition::new(dims.to_vec()).unwrap();
    let n = p.agents();
    let mut blocks = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let m = DMatrix::from_fn(p.dim(i), p.dim(j), |_, _| rng.random_range(-bound..bound));
            blocks.push(InteractionBlock::new(i, j, m));
        }
    }
    let k = p.total();
    PolymatrixGame::new(p, GameClass::ZeroSum, blocks, vec![0.0; k]).unwrap()
}

fn random_vector(k: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0))
}

fn partitions() -> Vec<Vec<usize>> {
    vec![
        vec![1, 1, 1],
        vec![2, 2],
        vec![2, 2, 1],
        vec![1, 1, 1, 1, 1],
        vec![3, 3, 2, 2],
        vec![2, 2, 2, 2, 2, 2],
        vec![3, 3, 3, 3, 3, 3, 2],
    ]
}

#[test]
fn exact_flow_conserves_energy_to_every_equilibrium() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for dims in partitions() {
        let game = uniform_zero_sum(&dims, &mut rng, 1.0);
        let k = game.dimension();
        let z = random_vector(k, &mut rng);
        let costs = (game.consolidate() * z).as_slice().to_vec();
        let game = game.with_costs(costs).unwrap();
        let set = equilibrium_set(&game).set().unwrap();
        let x0 = StrategyProfile::new(random_vector(k, &mut rng));
        let config = IntegratorConfig {
            method: Method::ExactFlow,
            ..IntegratorConfig::default()
        };
        let traj = simulate(&game, &x0, &config).unwrap();
        assert!(traj.warnings.is_empty());
        for _ in 0..5 {
            let lambda: Vec<f64> = (0..set.nullity()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let xstar = set.point(&lambda);
            let energy = energy_series(&traj, &xstar);
            let drift = energy.iter().map(|e| (e - energy[0]).abs()).fold(0.0, f64::max) / energy[0];
            assert!(drift <= 1e-9, "dims {dims:?}: relative drift {drift}");
        }
        let closest = closest_equilibrium(&set, &x0);
        let hyper = hyperplane_drift_series(&traj, &set, &closest);
        assert!(hyper.iter().all(|h| *h <= 1e-8 * x0.vector().norm()));
    }
}

#[test]
fn average_residual_obeys_the_two_r_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for dims in partitions() {
        let game = uniform_zero_sum(&dims, &mut rng, 1.0);
        let k = game.dimension();
        let x0 = StrategyProfile::new(random_vector(k, &mut rng));
        let config = IntegratorConfig {
            horizon: 200.0,
            ..IntegratorConfig::default()
        };
        let traj = simulate(&game, &x0, &config).unwrap();
        let set = equilibrium_set(&game).set().unwrap();
        let r = (x0.vector() - closest_equilibrium(&set, &x0).vector()).norm();
        let a = game.consolidate();
        for (t, avg) in traj.times.iter().zip(&traj.averages) {
            if *t >= 1.0 {
                let res = (&a * avg - game.costs()).norm();
                assert!(res <= 2.0 * r / t + 1e-9, "t = {t}: {res}");
            }
        }
        assert!(residual_identity_check(&game, &traj) < 1e-9);
    }
}

#[test]
fn rk4_tracks_exact_flow() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for dims in [vec![1, 1, 1], vec![2, 2], vec![2, 2, 1, 1], vec![3, 3, 2, 2], vec![2, 2, 2, 2, 2]] {
        let game = uniform_zero_sum(&dims, &mut rng, 2.0);
        let k = game.dimension();
        let x0 = StrategyProfile::new(random_vector(k, &mut rng));
        let base = IntegratorConfig {
            method: Method::ExactFlow,
            step: 1e-3,
            horizon: 100.0,
            record_every: 0.1,
        };
        let exact = simulate(&game, &x0, &base).unwrap();
        let rk = simulate(&game, &x0, &IntegratorConfig { method: Method::RungeKutta4, ..base }).unwrap();
        let worst = exact
            .states
            .iter()
            .zip(&rk.states)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-6, "dims {dims:?}: {worst}");
        assert!(residual_identity_check(&game, &rk) <= 1e-6);
    }
}

/// Householder reflection of `x` in the hyperplane that swaps `u` and `v`
/// (equal norms).
fn reflect(x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let w = u - v;
    if w.norm() < 1e-14 {
        return x.clone();
    }
    let w = w.normalize();
    x - &w * (2.0 * w.dot(x))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn closest_equilibrium_ignores_range_rotations(seed in any::<u64>(), dims_pick in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = [vec![1, 1, 1], vec![2, 2, 1], vec![1, 1, 1, 1, 1]][dims_pick].clone();
        let game = uniform_zero_sum(&dims, &mut rng, 1.0);
        let k = game.dimension();
        let set = equilibrium_set(&game).set().unwrap();
        let x0 = StrategyProfile::new(random_vector(k, &mut rng));
        let xstar = closest_equilibrium(&set, &x0);
        let offset = x0.vector() - xstar.vector();
        // A random direction in the orthogonal complement of the nullspace.
        let mut target = random_vector(k, &mut rng);
        for d in set.basis() {
            target -= d * d.dot(&target);
        }
        prop_assume!(target.norm() > 1e-3 && offset.norm() > 1e-3);
        let target = target.normalize() * offset.norm();
        let rotated = reflect(&offset, &offset, &target);
        let x1 = StrategyProfile::new(xstar.vector() + rotated);
        let config = IntegratorConfig { horizon: 50.0, ..IntegratorConfig::default() };
        let traj = simulate(&game, &x1, &config).unwrap();
        let again = closest_equilibrium(&set, &StrategyProfile::new(traj.initial().clone()));
        prop_assert!((again.vector() - xstar.vector()).amax() < 1e-12);
        let last = traj.averages.last().unwrap();
        let bound = 2.0 * offset.norm() / 50.0;
        let residual = (game.consolidate() * last - game.costs()).norm();
        prop_assert!(residual <= bound + 1e-9);
    }
}
