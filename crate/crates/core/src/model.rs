//! Ground-truth rich-observation MDPs.
//!
//! A model has `X` hidden states driving rewards and dynamics, and `Y >= X`
//! observations. Every observation is emitted by exactly one hidden state, so
//! the hidden states induce a partition of the observations. Learners only ever
//! see observations, actions and rewards; the hidden state in a [`Step`] is a
//! diagnostic.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Tolerance for the stochasticity invariants.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Smallest singular value a transition slice must exceed to count as full rank.
pub const FULL_RANK_TOL: f64 = 1e-9;

const GENERATOR_RETRIES: usize = 100;
const ASSIGNMENT_RETRIES: usize = 1_000_000;

/// Distribution of the observed reward given its mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RewardNoise {
    /// `r ~ Bernoulli(mean)`.
    #[default]
    Bernoulli,
    /// `r = mean`.
    Deterministic,
}

/// Parameters of the random instance generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub x: usize,
    pub y: usize,
    pub a: usize,
    /// Concentration of the Dirichlet prior on each transition column.
    pub dirichlet_alpha: f64,
    /// Concentration of the Dirichlet prior on within-cluster emissions.
    pub obs_dirichlet_alpha: f64,
    pub reward_low: f64,
    pub reward_high: f64,
    pub seed: u64,
    #[serde(default)]
    pub reward_noise: RewardNoise,
}

impl GeneratorConfig {
    pub fn new(x: usize, y: usize, a: usize, seed: u64) -> Self {
        Self {
            x,
            y,
            a,
            dirichlet_alpha: 1.0,
            obs_dirichlet_alpha: 1.0,
            reward_low: 0.0,
            reward_high: 1.0,
            seed,
            reward_noise: RewardNoise::Bernoulli,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.x == 0 || self.y == 0 || self.a == 0 {
            return Err(Error::InvalidConfig("X, Y and A must be positive".into()));
        }
        if self.y < self.x {
            return Err(Error::InvalidConfig("Y must be ≥ X".into()));
        }
        if !(self.dirichlet_alpha > 0.0 && self.dirichlet_alpha.is_finite()) {
            return Err(Error::InvalidConfig("dirichlet_alpha must be positive".into()));
        }
        if !(self.obs_dirichlet_alpha > 0.0 && self.obs_dirichlet_alpha.is_finite()) {
            return Err(Error::InvalidConfig(
                "obs_dirichlet_alpha must be positive".into(),
            ));
        }
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !in_unit(self.reward_low) || !in_unit(self.reward_high) {
            return Err(Error::InvalidConfig("reward bounds must lie in [0, 1]".into()));
        }
        if self.reward_low > self.reward_high {
            return Err(Error::InvalidConfig("reward_low must be ≤ reward_high".into()));
        }
        Ok(())
    }
}

/// On-disk layout of a model.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelDoc {
    x: usize,
    y: usize,
    a: usize,
    /// `[a][x][x']`: P(x' | x, a).
    transition: Vec<Vec<Vec<f64>>>,
    /// `[x][y]`: P(y | x).
    observation: Vec<Vec<f64>>,
    /// `[x][a]`: mean reward.
    reward: Vec<Vec<f64>>,
    o_min: f64,
    seed: Option<u64>,
    generator_config: Option<GeneratorConfig>,
    #[serde(default)]
    reward_noise: RewardNoise,
    #[serde(default)]
    initial_state: usize,
}

/// A rich-observation MDP.
///
/// Immutable once built; shareable across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ModelDoc", into = "ModelDoc")]
pub struct RomdpModel {
    num_hidden: usize,
    num_obs: usize,
    num_actions: usize,
    transition: Vec<Vec<Vec<f64>>>,
    observation: Vec<Vec<f64>>,
    reward: Vec<Vec<f64>>,
    o_min: f64,
    seed: Option<u64>,
    generator_config: Option<GeneratorConfig>,
    reward_noise: RewardNoise,
    initial_state: usize,
    // derived
    owner: Vec<Option<usize>>,
    emissions: Vec<Vec<(usize, f64)>>,
}

impl From<ModelDoc> for RomdpModel {
    fn from(d: ModelDoc) -> Self {
        let mut m = RomdpModel {
            num_hidden: d.x,
            num_obs: d.y,
            num_actions: d.a,
            transition: d.transition,
            observation: d.observation,
            reward: d.reward,
            o_min: d.o_min,
            seed: d.seed,
            generator_config: d.generator_config,
            reward_noise: d.reward_noise,
            initial_state: d.initial_state,
            owner: Vec::new(),
            emissions: Vec::new(),
        };
        m.refresh_derived();
        m
    }
}

impl From<RomdpModel> for ModelDoc {
    fn from(m: RomdpModel) -> Self {
        ModelDoc {
            x: m.num_hidden,
            y: m.num_obs,
            a: m.num_actions,
            transition: m.transition,
            observation: m.observation,
            reward: m.reward,
            o_min: m.o_min,
            seed: m.seed,
            generator_config: m.generator_config,
            reward_noise: m.reward_noise,
            initial_state: m.initial_state,
        }
    }
}

/// A broken model invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub invariant: &'static str,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.invariant, self.detail)
    }
}

/// Outcome of one environment transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub next_hidden: usize,
    pub next_obs: usize,
    pub reward: f64,
}

/// A policy mapping observations to (distributions over) actions.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Deterministic(Vec<usize>),
    /// `probs[y][a]`.
    Stochastic(Vec<Vec<f64>>),
}

impl Policy {
    pub fn uniform(num_obs: usize, num_actions: usize) -> Self {
        Policy::Stochastic(vec![vec![1.0 / num_actions as f64; num_actions]; num_obs])
    }

    pub fn constant(num_obs: usize, action: usize) -> Self {
        Policy::Deterministic(vec![action; num_obs])
    }

    pub fn len(&self) -> usize {
        match self {
            Policy::Deterministic(m) => m.len(),
            Policy::Stochastic(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// P(a = action | y = obs).
    pub fn prob(&self, obs: usize, action: usize) -> f64 {
        match self {
            Policy::Deterministic(m) => {
                if m[obs] == action {
                    1.0
                } else {
                    0.0
                }
            }
            Policy::Stochastic(p) => p[obs][action],
        }
    }

    /// Checks the policy covers `num_obs` observations with valid actions.
    pub fn check(&self, num_obs: usize, num_actions: usize) -> Result<()> {
        if self.len() != num_obs {
            return Err(Error::PartialPolicy(format!(
                "policy covers {} observations, model has {}",
                self.len(),
                num_obs
            )));
        }
        match self {
            Policy::Deterministic(m) => {
                if let Some((y, &a)) = m.iter().enumerate().find(|(_, &a)| a >= num_actions) {
                    return Err(Error::PartialPolicy(format!(
                        "observation {y} maps to action {a}, only {num_actions} actions"
                    )));
                }
            }
            Policy::Stochastic(p) => {
                for (y, row) in p.iter().enumerate() {
                    let sum: f64 = row.iter().sum();
                    if row.len() != num_actions
                        || row.iter().any(|&v| !(0.0..=1.0).contains(&v))
                        || (sum - 1.0).abs() > 1e-9
                    {
                        return Err(Error::PartialPolicy(format!(
                            "observation {y} has no valid action distribution"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, obs: usize, rng: &mut R) -> usize {
        match self {
            Policy::Deterministic(m) => m[obs],
            Policy::Stochastic(p) => sample_categorical(&p[obs], rng),
        }
    }
}

/// One step of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    /// 1-based step index.
    pub t: usize,
    /// Diagnostic only; never shown to a learner.
    pub hidden: usize,
    pub obs: usize,
    pub action: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn observations(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.obs).collect()
    }

    pub fn actions(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.action).collect()
    }
}

/// Draws an index from a probability vector by inversion.
pub(crate) fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

fn sample_dirichlet<R: Rng + ?Sized>(alpha: f64, n: usize, rng: &mut R) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let gamma = Gamma::new(alpha, 1.0).expect("alpha checked positive");
    loop {
        let draws: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        // Tiny alphas can underflow every coordinate.
        if total > 0.0 && total.is_finite() {
            let mut v: Vec<f64> = draws.iter().map(|d| d / total).collect();
            renormalize(&mut v);
            return v;
        }
    }
}

/// Rescales so the entries sum to one and forces the residual onto the largest entry.
fn renormalize(v: &mut [f64]) {
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|p| *p /= total);
    let residual = 1.0 - v.iter().sum::<f64>();
    if let Some(imax) = argmax(v) {
        v[imax] += residual;
    }
}

fn argmax(v: &[f64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &x)| match best {
            Some((_, b)) if b >= x => best,
            _ => Some((i, x)),
        })
        .map(|(i, _)| i)
}

impl RomdpModel {
    /// Builds a model from raw tables. Does not validate; see [`RomdpModel::validate`].
    ///
    /// `transition[a][x][x']`, `observation[x][y]`, `reward[x][a]`.
    pub fn new(
        transition: Vec<Vec<Vec<f64>>>,
        observation: Vec<Vec<f64>>,
        reward: Vec<Vec<f64>>,
    ) -> Self {
        let num_actions = transition.len();
        let num_hidden = observation.len();
        let num_obs = observation.first().map_or(0, Vec::len);
        let o_min = observation
            .iter()
            .flatten()
            .copied()
            .filter(|&p| p > 0.0)
            .fold(f64::INFINITY, f64::min);
        let o_min = if o_min.is_finite() { o_min } else { 0.0 };
        let mut m = RomdpModel {
            num_hidden,
            num_obs,
            num_actions,
            transition,
            observation,
            reward,
            o_min,
            seed: None,
            generator_config: None,
            reward_noise: RewardNoise::Bernoulli,
            initial_state: 0,
            owner: Vec::new(),
            emissions: Vec::new(),
        };
        m.refresh_derived();
        m
    }

    fn refresh_derived(&mut self) {
        self.owner = (0..self.num_obs)
            .map(|y| {
                let mut it = (0..self.observation.len())
                    .filter(|&x| self.observation[x].get(y).copied().unwrap_or(0.0) > 0.0);
                let first = it.next();
                if it.next().is_some() {
                    None
                } else {
                    first
                }
            })
            .collect();
        self.emissions = self
            .observation
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(y, &p)| (y, p))
                    .collect()
            })
            .collect();
    }

    pub fn with_reward_noise(mut self, noise: RewardNoise) -> Self {
        self.reward_noise = noise;
        self
    }

    pub fn with_initial_state(mut self, state: usize) -> Self {
        self.initial_state = state;
        self
    }

    pub fn num_hidden(&self) -> usize {
        self.num_hidden
    }

    pub fn num_obs(&self) -> usize {
        self.num_obs
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// P(x' | x, a).
    #[inline]
    pub fn transition(&self, next: usize, hidden: usize, action: usize) -> f64 {
        self.transition[action][hidden][next]
    }

    /// Row `P(· | x, a)`.
    pub fn transition_row(&self, hidden: usize, action: usize) -> &[f64] {
        &self.transition[action][hidden]
    }

    /// P(y | x).
    #[inline]
    pub fn emission(&self, obs: usize, hidden: usize) -> f64 {
        self.observation[hidden][obs]
    }

    pub fn emission_row(&self, hidden: usize) -> &[f64] {
        &self.observation[hidden]
    }

    #[inline]
    pub fn reward_mean(&self, hidden: usize, action: usize) -> f64 {
        self.reward[hidden][action]
    }

    pub fn o_min(&self) -> f64 {
        self.o_min
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn generator_config(&self) -> Option<&GeneratorConfig> {
        self.generator_config.as_ref()
    }

    pub fn reward_noise(&self) -> RewardNoise {
        self.reward_noise
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    /// Hidden state emitting `obs`, if the observation matrix is injective there.
    pub fn owner(&self, obs: usize) -> Option<usize> {
        self.owner.get(obs).copied().flatten()
    }

    /// The hidden partition: observations emitted by each hidden state.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        self.emissions
            .iter()
            .map(|row| row.iter().map(|&(y, _)| y).collect())
            .collect()
    }

    /// Checks every model invariant and reports each violation.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let (nx, ny, na) = (self.num_hidden, self.num_obs, self.num_actions);
        if nx == 0 || ny == 0 || na == 0 {
            out.push(Violation {
                invariant: "shape",
                detail: format!("X={nx}, Y={ny}, A={na} must all be positive"),
            });
            return out;
        }
        let shape_ok = self.transition.len() == na
            && self
                .transition
                .iter()
                .all(|s| s.len() == nx && s.iter().all(|r| r.len() == nx))
            && self.observation.len() == nx
            && self.observation.iter().all(|r| r.len() == ny)
            && self.reward.len() == nx
            && self.reward.iter().all(|r| r.len() == na);
        if !shape_ok {
            out.push(Violation {
                invariant: "shape",
                detail: "table dimensions disagree with (X, Y, A)".into(),
            });
            return out;
        }
        if self.initial_state >= nx {
            out.push(Violation {
                invariant: "initial state",
                detail: format!("initial state {} ≥ X={nx}", self.initial_state),
            });
        }
        for (a, slice) in self.transition.iter().enumerate() {
            for (x, row) in slice.iter().enumerate() {
                let sum: f64 = row.iter().sum();
                if row.iter().any(|&p| !(0.0..=1.0).contains(&p) || !p.is_finite())
                    || (sum - 1.0).abs() > STOCHASTIC_TOL
                {
                    out.push(Violation {
                        invariant: "column-stochastic",
                        detail: format!("transition (x={x}, a={a}) sums to {sum}"),
                    });
                }
            }
        }
        for (x, row) in self.observation.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p) || !p.is_finite())
                || (sum - 1.0).abs() > STOCHASTIC_TOL
            {
                out.push(Violation {
                    invariant: "emission-stochastic",
                    detail: format!("emission row x={x} sums to {sum}"),
                });
            }
        }
        for y in 0..ny {
            let owners = (0..nx).filter(|&x| self.observation[x][y] > 0.0).count();
            if owners != 1 {
                out.push(Violation {
                    invariant: "injective mapping",
                    detail: format!("observation {y} has {owners} emitting hidden states"),
                });
            }
        }
        let min_nz = self
            .observation
            .iter()
            .flatten()
            .copied()
            .filter(|&p| p > 0.0)
            .fold(f64::INFINITY, f64::min);
        if min_nz < self.o_min || (min_nz.is_finite() && min_nz != self.o_min) {
            out.push(Violation {
                invariant: "o_min",
                detail: format!("recorded O_min {} but smallest non-zero is {min_nz}", self.o_min),
            });
        }
        for (x, row) in self.reward.iter().enumerate() {
            for (a, &r) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&r) {
                    out.push(Violation {
                        invariant: "reward range",
                        detail: format!("reward (x={x}, a={a}) = {r}"),
                    });
                }
            }
        }
        out
    }

    fn check_indices(&self, hidden: usize, action: usize) -> Result<()> {
        if hidden >= self.num_hidden {
            return Err(Error::OutOfRange {
                what: "hidden state",
                index: hidden,
                size: self.num_hidden,
            });
        }
        if action >= self.num_actions {
            return Err(Error::OutOfRange {
                what: "action",
                index: action,
                size: self.num_actions,
            });
        }
        Ok(())
    }

    /// Samples an observation emitted by `hidden`.
    pub fn emit<R: Rng + ?Sized>(&self, hidden: usize, rng: &mut R) -> usize {
        let row = &self.emissions[hidden];
        if row.len() == 1 {
            // keep the RNG stream aligned with the multi-observation case
            let _: f64 = rng.random();
            return row[0].0;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(y, p) in row {
            acc += p;
            if u < acc {
                return y;
            }
        }
        row[row.len() - 1].0
    }

    /// Samples a reward for `(hidden, action)`.
    pub fn sample_reward<R: Rng + ?Sized>(&self, hidden: usize, action: usize, rng: &mut R) -> f64 {
        let mean = self.reward[hidden][action];
        let u: f64 = rng.random();
        match self.reward_noise {
            RewardNoise::Bernoulli => {
                if u < mean {
                    1.0
                } else {
                    0.0
                }
            }
            RewardNoise::Deterministic => mean,
        }
    }

    /// Advances the hidden chain one step. Draw order: successor, observation, reward.
    pub fn step<R: Rng + ?Sized>(&self, hidden: usize, action: usize, rng: &mut R) -> Result<Step> {
        self.check_indices(hidden, action)?;
        let next_hidden = sample_categorical(&self.transition[action][hidden], rng);
        let next_obs = self.emit(next_hidden, rng);
        let reward = self.sample_reward(hidden, action, rng);
        Ok(Step {
            next_hidden,
            next_obs,
            reward,
        })
    }

    /// Rolls out an observation-based policy for `horizon` steps from the model's
    /// initial state.
    pub fn run_policy<R: Rng + ?Sized>(
        &self,
        policy: &Policy,
        horizon: usize,
        rng: &mut R,
    ) -> Result<Trajectory> {
        self.run_policy_from(policy, horizon, self.initial_state, rng)
    }

    pub fn run_policy_from<R: Rng + ?Sized>(
        &self,
        policy: &Policy,
        horizon: usize,
        initial: usize,
        rng: &mut R,
    ) -> Result<Trajectory> {
        if horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be ≥ 1".into()));
        }
        if initial >= self.num_hidden {
            return Err(Error::OutOfRange {
                what: "hidden state",
                index: initial,
                size: self.num_hidden,
            });
        }
        policy.check(self.num_obs, self.num_actions)?;
        let mut steps = Vec::with_capacity(horizon);
        let mut hidden = initial;
        let mut obs = self.emit(hidden, rng);
        for t in 1..=horizon {
            let action = policy.sample(obs, rng);
            let s = self.step(hidden, action, rng)?;
            steps.push(TrajectoryStep {
                t,
                hidden,
                obs,
                action,
                reward: s.reward,
            });
            hidden = s.next_hidden;
            obs = s.next_obs;
        }
        Ok(Trajectory { steps })
    }

    /// Whether every transition slice `T[·, ·, a]` is numerically full rank.
    pub fn transition_slices_full_rank(&self) -> bool {
        self.transition.iter().all(|slice| {
            let m = nalgebra::DMatrix::from_fn(self.num_hidden, self.num_hidden, |i, j| slice[i][j]);
            linalg::svd(&m)
                .map(|d| d.singular_values.iter().all(|&s| s > FULL_RANK_TOL))
                .unwrap_or(false)
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Draws a random ROMDP: Dirichlet transitions, a surjective random
/// observation-to-hidden assignment with Dirichlet emissions inside each
/// cluster, and uniform mean rewards.
///
/// Models with a rank-deficient transition slice are redrawn.
pub fn generate_random_romdp(config: &GeneratorConfig) -> Result<RomdpModel> {
    use rand::SeedableRng;
    config.check()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
    let (nx, ny, na) = (config.x, config.y, config.a);
    for _ in 0..GENERATOR_RETRIES {
        let transition: Vec<Vec<Vec<f64>>> = (0..na)
            .map(|_| {
                (0..nx)
                    .map(|_| sample_dirichlet(config.dirichlet_alpha, nx, &mut rng))
                    .collect()
            })
            .collect();

        let assignment = surjective_assignment(nx, ny, &mut rng)?;
        let mut observation = vec![vec![0.0; ny]; nx];
        for (x, row) in observation.iter_mut().enumerate() {
            let members: Vec<usize> = (0..ny).filter(|&y| assignment[y] == x).collect();
            let probs = sample_dirichlet(config.obs_dirichlet_alpha, members.len(), &mut rng);
            for (&y, p) in members.iter().zip(probs) {
                row[y] = p;
            }
        }
        // a Dirichlet draw can underflow to exactly zero, which would orphan an observation
        if observation.iter().flatten().filter(|&&p| p > 0.0).count() != ny {
            continue;
        }

        let width = config.reward_high - config.reward_low;
        let reward: Vec<Vec<f64>> = (0..nx)
            .map(|_| {
                (0..na)
                    .map(|_| config.reward_low + width * rng.random::<f64>())
                    .collect()
            })
            .collect();

        let mut model = RomdpModel::new(transition, observation, reward);
        model.seed = Some(config.seed);
        model.generator_config = Some(config.clone());
        model.reward_noise = config.reward_noise;
        if model.transition_slices_full_rank() {
            debug_assert!(model.validate().is_empty());
            return Ok(model);
        }
    }
    Err(Error::RetriesExhausted(format!(
        "no full-rank transition tensor after {GENERATOR_RETRIES} draws"
    )))
}

fn surjective_assignment<R: Rng + ?Sized>(nx: usize, ny: usize, rng: &mut R) -> Result<Vec<usize>> {
    for _ in 0..ASSIGNMENT_RETRIES {
        let assignment: Vec<usize> = (0..ny).map(|_| rng.random_range(0..nx)).collect();
        let mut seen = vec![false; nx];
        assignment.iter().for_each(|&x| seen[x] = true);
        if seen.iter().all(|&s| s) {
            return Ok(assignment);
        }
    }
    Err(Error::RetriesExhausted(
        "could not draw a surjective observation assignment".into(),
    ))
}
