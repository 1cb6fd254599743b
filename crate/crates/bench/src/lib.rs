//! Fixtures shared by the benchmarks under `benches/`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use romdp_core::linalg::Tensor3;
use romdp_core::ucrl::{confidence_radii, RadiusParams};
use romdp_core::{generate_random_romdp, AuxEstimates, GeneratorConfig, Policy};

/// Random count tables for `s` states and `a` actions with `visits` samples
/// per pair, with radii at `δ = 0.05`.
pub fn random_estimates(s: usize, a: usize, visits: u64, seed: u64) -> AuxEstimates {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = s * a;
    let mut transitions = vec![0u64; pairs * s];
    let mut rewards = vec![0.0; pairs];
    for p in 0..pairs {
        let bias: f64 = rng.random();
        for _ in 0..visits {
            transitions[p * s + rng.random_range(0..s)] += 1;
            rewards[p] += f64::from(u8::from(rng.random::<f64>() < bias));
        }
    }
    let mut est = AuxEstimates::from_counts(s, a, vec![visits; pairs], rewards, transitions).expect("consistent tables");
    let params = RadiusParams {
        num_obs: s,
        n_total: visits * pairs as u64,
        delta: 0.05,
    };
    confidence_radii(&mut est, params).expect("valid radii");
    est
}

/// Orthogonally decomposable `r × r × r` tensor with weights `1, 2, …, r`
/// along a random orthonormal basis.
pub fn planted_tensor(r: usize, seed: u64) -> Tensor3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = nalgebra::DMatrix::from_fn(r, r, |_, _| rng.random::<f64>() - 0.5);
    let q = m.qr().q();
    let weights: Vec<f64> = (1..=r).map(|i| i as f64).collect();
    Tensor3::symmetric_from_factors(&weights, &q)
}

/// Observation and action sequences of `len` steps from a random model
/// under a random deterministic policy.
pub fn trajectory(x: usize, y: usize, a: usize, len: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let model = generate_random_romdp(&GeneratorConfig::new(x, y, a, seed)).expect("generator");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let policy = Policy::Deterministic((0..y).map(|_| rng.random_range(0..a)).collect());
    let traj = model.run_policy(&policy, len, &mut rng).expect("valid policy");
    (traj.observations(), traj.actions())
}
