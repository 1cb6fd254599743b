//! SL-UCRL and the flat UCRL baseline.
//!
//! Both agents share one epoch loop. Flat UCRL keeps the identity clustering,
//! so its state space is the observation set. SL-UCRL re-clusters at the
//! start of every epoch from the previous epoch's samples and acts on the
//! resulting auxiliary states.
//!
//! The environment RNG is seeded from `seed` alone; the spectral step uses a
//! separate ChaCha stream per epoch, so with no clustering change both agents
//! consume identical environment randomness.

use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::{merge_epochs, minimal_clustering_step, Clustering};
use crate::diagnostics::optimal_hidden_gain;
use crate::error::{Error, Result};
use crate::model::RomdpModel;
use crate::spectral::{spectral_clustering, ActionOutcome, SpectralConfig};
use crate::ucrl::{confidence_radii, epoch_should_end, extended_value_iteration, ChainCounts, RadiusParams, EVI_MAX_ITERATIONS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    SlUcrl,
    UcrlFlat,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::SlUcrl => "sl-ucrl",
            Algorithm::UcrlFlat => "ucrl-flat",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sl-ucrl" => Ok(Algorithm::SlUcrl),
            "ucrl-flat" => Ok(Algorithm::UcrlFlat),
            other => Err(Error::Parse(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    /// Horizon `N`.
    pub horizon: u64,
    pub delta: f64,
    /// Confidence level used per epoch is `δ / N^delta_exponent`.
    pub delta_exponent: f64,
    pub spectral: SpectralConfig,
    /// Number of hidden states, if known; enables the minimal-clustering step.
    pub x_known: Option<usize>,
    pub minimal_clustering: bool,
    pub seed: u64,
}

impl AgentConfig {
    pub fn new(horizon: u64, seed: u64) -> Self {
        Self {
            horizon,
            delta: 0.05,
            delta_exponent: 6.0,
            spectral: SpectralConfig::default(),
            x_known: None,
            minimal_clustering: false,
            seed,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be ≥ 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!("δ = {} not in (0, 1)", self.delta)));
        }
        if !(self.delta_exponent >= 0.0) {
            return Err(Error::InvalidConfig("δ exponent must be non-negative".into()));
        }
        if self.minimal_clustering && self.x_known.is_none() {
            return Err(Error::InvalidConfig("minimal clustering needs X".into()));
        }
        Ok(())
    }

    /// `δ / N^delta_exponent`.
    pub fn epoch_delta(&self) -> f64 {
        self.delta / (self.horizon as f64).powf(self.delta_exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub epoch: usize,
    pub hidden: usize,
    pub obs: usize,
    pub action: usize,
    pub reward: f64,
    pub s_count: usize,
    pub cum_pseudo_regret: f64,
    pub cum_realized_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub k: usize,
    pub start_t: u64,
    pub length: u64,
    pub s_count: usize,
    /// Observation → auxiliary state.
    pub assignment: Vec<usize>,
    pub gain: f64,
    pub evi_iterations: usize,
    pub evi_converged: bool,
    pub spectral: Vec<ActionOutcome>,
    pub minimal_clustering_applied: bool,
    pub events: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub algorithm: Algorithm,
    pub rho_star: f64,
    pub num_obs: usize,
    pub num_actions: usize,
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
}

impl RunTrace {
    pub fn final_clustering(&self) -> Clustering {
        self.epochs
            .last()
            .map(|e| Clustering::from_labels(&e.assignment))
            .unwrap_or_else(|| Clustering::identity(self.num_obs))
    }

    pub fn final_s_count(&self) -> usize {
        self.epochs.last().map_or(self.num_obs, |e| e.s_count)
    }

    pub fn final_pseudo_regret(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.cum_pseudo_regret)
    }

    /// Auxiliary-state count never grows from one epoch to the next.
    pub fn s_counts_non_increasing(&self) -> bool {
        self.epochs.windows(2).all(|w| w[1].s_count <= w[0].s_count)
    }

    /// `S·A·log₂N + S·A` with `S` the initial alphabet.
    pub fn epoch_bound(&self) -> f64 {
        let n = self.steps.len().max(1) as f64;
        let sa = (self.num_obs * self.num_actions) as f64;
        sa * n.log2() + sa
    }
}

/// Runs SL-UCRL.
pub fn run_sl_ucrl(model: &RomdpModel, config: &AgentConfig) -> Result<RunTrace> {
    run(model, config, Algorithm::SlUcrl)
}

/// Runs UCRL on the observation MDP.
pub fn run_ucrl_flat(model: &RomdpModel, config: &AgentConfig) -> Result<RunTrace> {
    run(model, config, Algorithm::UcrlFlat)
}

pub fn run_algorithm(model: &RomdpModel, config: &AgentConfig, algorithm: Algorithm) -> Result<RunTrace> {
    run(model, config, algorithm)
}

struct EpochSamples {
    symbols: Vec<usize>,
    actions: Vec<usize>,
}

fn run(model: &RomdpModel, config: &AgentConfig, algorithm: Algorithm) -> Result<RunTrace> {
    config.check()?;
    let violations = model.validate();
    if let Some(v) = violations.first() {
        return Err(Error::InvalidConfig(format!("invalid model: {v}")));
    }
    if let Some(x) = config.x_known {
        if x == 0 || x > model.num_obs() {
            return Err(Error::InvalidConfig(format!("X = {x} out of range")));
        }
    }
    let (y, a) = (model.num_obs(), model.num_actions());
    let rho_star = optimal_hidden_gain(model)?;
    let delta_k = config.epoch_delta();
    let mut env = ChaCha8Rng::seed_from_u64(config.seed);

    let mut counts = ChainCounts::new(Clustering::identity(y), a);
    let mut hidden = model.initial_state();
    let mut obs = model.emit(hidden, &mut env);
    let mut steps = Vec::with_capacity(config.horizon as usize);
    let mut epochs: Vec<EpochRecord> = Vec::new();
    let mut mean_reward_sum = 0.0;
    let mut reward_sum = 0.0;
    let mut previous: Option<EpochSamples> = None;
    let mut policy: Vec<usize> = vec![0; y];
    let mut t: u64 = 0;
    let mut k = 0;

    while t < config.horizon {
        k += 1;
        let mut events = Vec::new();
        let mut spectral_outcomes = Vec::new();
        let mut minimal_applied = false;

        if algorithm == Algorithm::SlUcrl {
            if let Some(prev) = previous.take() {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(k as u64);
                let alphabet = counts.clustering().num_aux();
                match spectral_clustering(&prev.symbols, &prev.actions, alphabet, a, delta_k, &config.spectral, &mut rng) {
                    Ok(report) => {
                        spectral_outcomes = report.actions;
                        if !report.clustering.is_identity() {
                            let lifted = counts.clustering().compose(&report.clustering)?;
                            let merged = merge_epochs(&lifted, counts.clustering())?;
                            counts.remap(&merged)?;
                        }
                    }
                    Err(e) => events.push(format!("spectral step skipped: {e}")),
                }
            }
            if config.minimal_clustering {
                let x = config.x_known.expect("checked");
                if counts.clustering().num_aux() > x {
                    let mut est = counts.estimates();
                    confidence_radii(&mut est, radius_params(y, t, delta_k))?;
                    if let Some(c) = minimal_clustering_step(counts.clustering(), &est, x)? {
                        counts.remap(&c)?;
                        minimal_applied = true;
                    }
                }
            }
        }

        let s_count = counts.clustering().num_aux();
        let mut est = counts.estimates();
        confidence_radii(&mut est, radius_params(y, t, delta_k))?;
        let epsilon = 1.0 / (t.max(1) as f64).sqrt();
        let (gain, evi_iterations, evi_converged) = match extended_value_iteration(&est, epsilon, EVI_MAX_ITERATIONS) {
            Ok(r) => {
                if !r.converged {
                    events.push(format!("EVI stopped after {} iterations without converging", r.iterations));
                    warn!("epoch {k}: EVI did not converge");
                }
                policy = r.policy.clone();
                (r.gain, r.iterations, r.converged)
            }
            Err(e) => {
                events.push(format!("EVI failed, keeping previous policy: {e}"));
                if policy.len() != s_count {
                    policy = vec![0; s_count];
                }
                (f64::NAN, 0, false)
            }
        };
        debug!("{algorithm} epoch {k}: t={t} S={s_count} gain={gain:.4}");

        let before = counts.counts().to_vec();
        let mut in_epoch = vec![0u64; s_count * a];
        let start_t = t;
        let mut samples = EpochSamples {
            symbols: Vec::new(),
            actions: Vec::new(),
        };
        while t < config.horizon {
            let s = counts.clustering().label(obs);
            let action = policy[s];
            let step = model.step(hidden, action, &mut env)?;
            t += 1;
            mean_reward_sum += model.reward_mean(hidden, action);
            reward_sum += step.reward;
            counts.record(s, action, step.reward, step.next_obs);
            samples.symbols.push(s);
            samples.actions.push(action);
            steps.push(StepRecord {
                t,
                epoch: k,
                hidden,
                obs,
                action,
                reward: step.reward,
                s_count,
                cum_pseudo_regret: t as f64 * rho_star - mean_reward_sum,
                cum_realized_regret: t as f64 * rho_star - reward_sum,
            });
            hidden = step.next_hidden;
            obs = step.next_obs;
            let p = s * a + action;
            in_epoch[p] += 1;
            if epoch_should_end(&in_epoch[p..=p], &before[p..=p]) {
                break;
            }
        }
        epochs.push(EpochRecord {
            k,
            start_t,
            length: t - start_t,
            s_count,
            assignment: counts.clustering().assignment().to_vec(),
            gain,
            evi_iterations,
            evi_converged,
            spectral: spectral_outcomes,
            minimal_clustering_applied: minimal_applied,
            events,
        });
        previous = Some(samples);
    }

    Ok(RunTrace {
        algorithm,
        rho_star,
        num_obs: y,
        num_actions: a,
        steps,
        epochs,
    })
}

fn radius_params(num_obs: usize, t: u64, delta: f64) -> RadiusParams {
    RadiusParams {
        num_obs,
        n_total: t.max(1),
        delta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::impure_clusters;
    use crate::model::{generate_random_romdp, GeneratorConfig, RomdpModel};

    fn identity_model(seed: u64) -> RomdpModel {
        let m = generate_random_romdp(&GeneratorConfig::new(4, 4, 2, seed)).unwrap();
        assert!(m.clusters().iter().all(|c| c.len() == 1));
        m
    }

    #[test]
    fn identity_emissions_match_flat_ucrl() {
        let m = identity_model(3);
        let cfg = AgentConfig::new(5_000, 9);
        let sl = run_sl_ucrl(&m, &cfg).unwrap();
        let flat = run_ucrl_flat(&m, &cfg).unwrap();
        assert_eq!(sl.steps, flat.steps);
        assert!(sl.epochs.iter().all(|e| e.s_count == 4));
    }

    #[test]
    fn single_observation_model() {
        let one = RomdpModel::new(vec![vec![vec![1.0]]], vec![vec![1.0]], vec![vec![0.4]]);
        let tr = run_ucrl_flat(&one, &AgentConfig::new(500, 1)).unwrap();
        assert!(tr.steps.iter().all(|s| s.cum_pseudo_regret.abs() < 1e-9));

        let two = RomdpModel::new(vec![vec![vec![1.0]], vec![vec![1.0]]], vec![vec![1.0]], vec![vec![0.2, 0.9]]);
        let mut cfg = AgentConfig::new(40_000, 1);
        cfg.delta_exponent = 0.0;
        let tr = run_ucrl_flat(&two, &cfg).unwrap();
        assert!((tr.rho_star - 0.9).abs() < 1e-9);
        let tail = &tr.steps[30_000..];
        assert!(tail.iter().filter(|s| s.action == 1).count() > 9_900);
    }

    #[test]
    fn pseudo_regret_identity_holds_exactly() {
        let m = generate_random_romdp(&GeneratorConfig::new(2, 5, 2, 4)).unwrap();
        let tr = run_sl_ucrl(&m, &AgentConfig::new(3_000, 2)).unwrap();
        let mut sum = 0.0;
        for s in &tr.steps {
            sum += m.reward_mean(s.hidden, s.action);
            assert_eq!(s.cum_pseudo_regret, s.t as f64 * tr.rho_star - sum);
        }
    }

    #[test]
    fn traces_are_deterministic() {
        let m = generate_random_romdp(&GeneratorConfig::new(2, 6, 2, 8)).unwrap();
        let cfg = AgentConfig::new(4_000, 5);
        assert_eq!(run_sl_ucrl(&m, &cfg).unwrap(), run_sl_ucrl(&m, &cfg).unwrap());
    }

    #[test]
    fn epochs_partition_the_horizon() {
        let m = generate_random_romdp(&GeneratorConfig::new(3, 6, 2, 1)).unwrap();
        let tr = run_sl_ucrl(&m, &AgentConfig::new(10_000, 3)).unwrap();
        let total: u64 = tr.epochs.iter().map(|e| e.length).sum();
        assert_eq!(total, 10_000);
        assert!(tr.s_counts_non_increasing());
        assert!((tr.epochs.len() as f64) <= tr.epoch_bound());
        for e in &tr.epochs {
            assert_eq!(impure_clusters(&m, &Clustering::from_labels(&e.assignment)), 0);
        }
    }

    #[test]
    fn config_validation() {
        let m = identity_model(1);
        let mut cfg = AgentConfig::new(0, 1);
        assert!(run_ucrl_flat(&m, &cfg).is_err());
        cfg.horizon = 10;
        cfg.delta = 1.0;
        assert!(run_ucrl_flat(&m, &cfg).is_err());
        cfg.delta = 0.05;
        cfg.minimal_clustering = true;
        assert!(run_sl_ucrl(&m, &cfg).is_err());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in [Algorithm::SlUcrl, Algorithm::UcrlFlat] {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("dqn".parse::<Algorithm>().is_err());
    }
}
