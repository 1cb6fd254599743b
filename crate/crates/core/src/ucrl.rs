//! Counts, empirical estimates, confidence radii and extended value iteration
//! over an auxiliary state space.
//!
//! Statistics are kept per auxiliary state along a single chain of clusters
//! `s¹ ⊆ s² ⊆ …`: when clusters merge, the merged state inherits the samples of
//! one predecessor only, so samples an observation produced before joining a
//! cluster never enter that cluster's estimates. Transition targets are kept
//! at observation level and projected onto the current clustering on demand.

use serde::{Deserialize, Serialize};

use crate::clustering::Clustering;
use crate::error::{Error, Result};

/// Default cap on extended value iteration sweeps.
pub const EVI_MAX_ITERATIONS: usize = 1_000_000;

/// Empirical model of an auxiliary MDP with confidence radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxEstimates {
    num_states: usize,
    num_actions: usize,
    counts: Vec<u64>,
    reward_sums: Vec<f64>,
    transition_counts: Vec<u64>,
    reward_mean: Vec<f64>,
    transition_mean: Vec<f64>,
    reward_radius: Vec<f64>,
    transition_radius: Vec<f64>,
}

/// Parameters of the confidence radii.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusParams {
    /// Number of observations `Y` in the reward radius.
    pub num_obs: usize,
    /// Steps taken so far.
    pub n_total: u64,
    pub delta: f64,
}

impl AuxEstimates {
    /// Builds estimates from raw tallies. `transition_counts` is indexed
    /// `[(s·A + a)·S + s']`. Radii start at zero; see [`confidence_radii`].
    pub fn from_counts(
        num_states: usize,
        num_actions: usize,
        counts: Vec<u64>,
        reward_sums: Vec<f64>,
        transition_counts: Vec<u64>,
    ) -> Result<Self> {
        let pairs = num_states * num_actions;
        if counts.len() != pairs
            || reward_sums.len() != pairs
            || transition_counts.len() != pairs * num_states
        {
            return Err(Error::Dimension("count tables disagree with (S, A)".into()));
        }
        let mut reward_mean = vec![0.0; pairs];
        let mut transition_mean = vec![0.0; pairs * num_states];
        for p in 0..pairs {
            let row = &transition_counts[p * num_states..(p + 1) * num_states];
            let row_total: u64 = row.iter().sum();
            if row_total != counts[p] {
                return Err(Error::LabelHistory(format!(
                    "pair {p}: {} transitions but {} visits",
                    row_total, counts[p]
                )));
            }
            let out = &mut transition_mean[p * num_states..(p + 1) * num_states];
            if counts[p] == 0 {
                out.fill(1.0 / num_states as f64);
            } else {
                let n = counts[p] as f64;
                reward_mean[p] = (reward_sums[p] / n).clamp(0.0, 1.0);
                out.iter_mut().zip(row).for_each(|(o, &c)| *o = c as f64 / n);
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            counts,
            reward_sums,
            transition_counts,
            reward_mean,
            transition_mean,
            reward_radius: vec![0.0; pairs],
            transition_radius: vec![0.0; pairs],
        })
    }

    /// Builds estimates directly from means and radii (no counts).
    pub fn from_model(
        num_states: usize,
        num_actions: usize,
        reward_mean: Vec<f64>,
        transition_mean: Vec<f64>,
        reward_radius: Vec<f64>,
        transition_radius: Vec<f64>,
    ) -> Result<Self> {
        let pairs = num_states * num_actions;
        if reward_mean.len() != pairs
            || reward_radius.len() != pairs
            || transition_radius.len() != pairs
            || transition_mean.len() != pairs * num_states
        {
            return Err(Error::Dimension("estimate tables disagree with (S, A)".into()));
        }
        Ok(Self {
            num_states,
            num_actions,
            counts: vec![0; pairs],
            reward_sums: vec![0.0; pairs],
            transition_counts: vec![0; pairs * num_states],
            reward_mean,
            transition_mean,
            reward_radius,
            transition_radius,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    fn pair(&self, s: usize, a: usize) -> usize {
        s * self.num_actions + a
    }

    pub fn count(&self, s: usize, a: usize) -> u64 {
        self.counts[self.pair(s, a)]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn reward_sum(&self, s: usize, a: usize) -> f64 {
        self.reward_sums[self.pair(s, a)]
    }

    pub fn transition_count(&self, s: usize, a: usize, next: usize) -> u64 {
        self.transition_counts[self.pair(s, a) * self.num_states + next]
    }

    pub fn reward_mean(&self, s: usize, a: usize) -> f64 {
        self.reward_mean[self.pair(s, a)]
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let p = self.pair(s, a);
        &self.transition_mean[p * self.num_states..(p + 1) * self.num_states]
    }

    pub fn reward_radius(&self, s: usize, a: usize) -> f64 {
        self.reward_radius[self.pair(s, a)]
    }

    pub fn transition_radius(&self, s: usize, a: usize) -> f64 {
        self.transition_radius[self.pair(s, a)]
    }
}

/// `d_r = √(28·ln(2·Y·A·N/δ) / max{1, N(s,a)})`, clipped to `[0, 1]`.
pub fn reward_radius(count: u64, num_obs: usize, num_actions: usize, n_total: u64, delta: f64) -> f64 {
    let log = (2.0 * num_obs as f64 * num_actions as f64 * n_total.max(1) as f64 / delta).ln();
    (28.0 * log / count.max(1) as f64).sqrt().min(1.0)
}

/// `d_p = √(28·S·ln(2·A·N/δ) / max{1, N(s,a)})`, clipped to `[0, 2]`.
pub fn transition_radius(count: u64, num_states: usize, num_actions: usize, n_total: u64, delta: f64) -> f64 {
    let log = (2.0 * num_actions as f64 * n_total.max(1) as f64 / delta).ln();
    (28.0 * num_states as f64 * log / count.max(1) as f64).sqrt().min(2.0)
}

/// Fills in the reward and transition radii of every pair.
pub fn confidence_radii(est: &mut AuxEstimates, params: RadiusParams) -> Result<()> {
    if !(params.delta > 0.0 && params.delta < 1.0) {
        return Err(Error::InvalidConfig(format!("δ = {} not in (0, 1)", params.delta)));
    }
    let (s, a) = (est.num_states, est.num_actions);
    for p in 0..s * a {
        let n = est.counts[p];
        est.reward_radius[p] = reward_radius(n, params.num_obs, a, params.n_total, params.delta);
        est.transition_radius[p] = transition_radius(n, s, a, params.n_total, params.delta);
    }
    Ok(())
}

/// Per-auxiliary-state statistics along the chain of merged clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainCounts {
    clustering: Clustering,
    num_actions: usize,
    counts: Vec<u64>,
    reward_sums: Vec<f64>,
    /// `[(s·A + a)·Y + y']`
    next_obs_counts: Vec<u64>,
}

impl ChainCounts {
    pub fn new(clustering: Clustering, num_actions: usize) -> Self {
        let (s, y) = (clustering.num_aux(), clustering.num_obs());
        Self {
            clustering,
            num_actions,
            counts: vec![0; s * num_actions],
            reward_sums: vec![0.0; s * num_actions],
            next_obs_counts: vec![0; s * num_actions * y],
        }
    }

    pub fn clustering(&self) -> &Clustering {
        &self.clustering
    }

    pub fn count(&self, s: usize, a: usize) -> u64 {
        self.counts[s * self.num_actions + a]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Records a transition taken from auxiliary state `s`.
    pub fn record(&mut self, s: usize, action: usize, reward: f64, next_obs: usize) {
        let p = s * self.num_actions + action;
        self.counts[p] += 1;
        self.reward_sums[p] += reward;
        self.next_obs_counts[p * self.clustering.num_obs() + next_obs] += 1;
    }

    /// Moves to a coarser clustering. Each new cluster keeps the statistics of
    /// one predecessor: the one with most observations, then most samples,
    /// then lowest id.
    pub fn remap(&mut self, coarser: &Clustering) -> Result<()> {
        if !self.clustering.refines(coarser) {
            return Err(Error::LabelHistory(
                "new clustering does not coarsen the previous one".into(),
            ));
        }
        let a = self.num_actions;
        let y = self.clustering.num_obs();
        let old_members = self.clustering.members();
        let mut chosen: Vec<Option<usize>> = vec![None; coarser.num_aux()];
        for (old, members) in old_members.iter().enumerate() {
            let new = coarser.label(members[0]);
            let total = |s: usize| self.counts[s * a..(s + 1) * a].iter().sum::<u64>();
            let better = match chosen[new] {
                None => true,
                Some(cur) => {
                    let key_old = (members.len(), total(old));
                    let key_cur = (old_members[cur].len(), total(cur));
                    key_old > key_cur
                }
            };
            if better {
                chosen[new] = Some(old);
            }
        }
        let s_new = coarser.num_aux();
        let mut counts = vec![0; s_new * a];
        let mut reward_sums = vec![0.0; s_new * a];
        let mut next_obs_counts = vec![0; s_new * a * y];
        for (new, old) in chosen.iter().enumerate() {
            let old = old.expect("every new cluster has a predecessor");
            counts[new * a..(new + 1) * a].copy_from_slice(&self.counts[old * a..(old + 1) * a]);
            reward_sums[new * a..(new + 1) * a]
                .copy_from_slice(&self.reward_sums[old * a..(old + 1) * a]);
            next_obs_counts[new * a * y..(new + 1) * a * y]
                .copy_from_slice(&self.next_obs_counts[old * a * y..(old + 1) * a * y]);
        }
        self.clustering = coarser.clone();
        self.counts = counts;
        self.reward_sums = reward_sums;
        self.next_obs_counts = next_obs_counts;
        Ok(())
    }

    /// Empirical estimates over the current clustering (radii unset).
    pub fn estimates(&self) -> AuxEstimates {
        let s = self.clustering.num_aux();
        let a = self.num_actions;
        let y = self.clustering.num_obs();
        let mut transition_counts = vec![0u64; s * a * s];
        for p in 0..s * a {
            for next in 0..y {
                let c = self.next_obs_counts[p * y + next];
                if c > 0 {
                    transition_counts[p * s + self.clustering.label(next)] += c;
                }
            }
        }
        AuxEstimates::from_counts(s, a, self.counts.clone(), self.reward_sums.clone(), transition_counts)
            .expect("tallies are consistent by construction")
    }
}

/// A step with the epoch it was collected in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledStep {
    /// Index into the clustering history.
    pub epoch: usize,
    pub obs: usize,
    pub action: usize,
    pub reward: f64,
    pub next_obs: usize,
}

/// Recomputes estimates over the last clustering of `history` from a full
/// trajectory. Step `t` is attributed to the label its observation had under
/// `history[step.epoch]`.
pub fn rebuild_counts(
    steps: &[LabeledStep],
    history: &[Clustering],
    num_actions: usize,
) -> Result<AuxEstimates> {
    let first = history
        .first()
        .ok_or(Error::LabelHistory("empty clustering history".into()))?;
    let y = first.num_obs();
    let mut stats = ChainCounts::new(first.clone(), num_actions);
    let mut epoch = 0;
    for step in steps {
        if step.epoch < epoch || step.epoch >= history.len() {
            return Err(Error::LabelHistory(format!(
                "step in epoch {} after epoch {epoch} (history of {})",
                step.epoch,
                history.len()
            )));
        }
        while epoch < step.epoch {
            epoch += 1;
            stats.remap(&history[epoch])?;
        }
        if step.obs >= y || step.next_obs >= y || step.action >= num_actions {
            return Err(Error::LabelHistory("step out of range".into()));
        }
        let s = history[epoch].label(step.obs);
        stats.record(s, step.action, step.reward, step.next_obs);
    }
    while epoch + 1 < history.len() {
        epoch += 1;
        stats.remap(&history[epoch])?;
    }
    Ok(stats.estimates())
}

/// True when some pair's in-epoch count has reached `max{1, N_before}`.
pub fn epoch_should_end(in_epoch: &[u64], before_epoch: &[u64]) -> bool {
    in_epoch
        .iter()
        .zip(before_epoch)
        .any(|(&nu, &n)| nu >= n.max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EviResult {
    pub policy: Vec<usize>,
    /// Optimistic gain `ρ̃`.
    pub gain: f64,
    /// Bias with minimum entry 0.
    pub bias: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximises `q · u` over probability vectors with `‖q − p̂‖₁ ≤ d`: move up to
/// `d/2` mass onto the best state, taking it from the worst states first.
///
/// `order` lists states by decreasing `u`.
pub fn optimistic_transition(p_hat: &[f64], radius: f64, order: &[usize]) -> Vec<f64> {
    let mut q = p_hat.to_vec();
    let Some(&best) = order.first() else {
        return q;
    };
    q[best] = (p_hat[best] + radius / 2.0).min(1.0);
    let mut excess = q.iter().sum::<f64>() - 1.0;
    for &j in order.iter().rev() {
        if excess <= 0.0 {
            break;
        }
        if j == best {
            continue;
        }
        let take = q[j].min(excess);
        q[j] -= take;
        excess -= take;
    }
    q
}

/// Extended value iteration over the confidence set of `est`.
///
/// Stops when `span(u' − u) ≤ epsilon`; non-convergence within `max_iterations`
/// is reported through [`EviResult::converged`].
pub fn extended_value_iteration(est: &AuxEstimates, epsilon: f64, max_iterations: usize) -> Result<EviResult> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!("ε = {epsilon} must be positive")));
    }
    let (s_count, a_count) = (est.num_states, est.num_actions);
    if s_count == 0 || a_count == 0 {
        return Err(Error::Empty("auxiliary MDP"));
    }
    let mut u = vec![0.0f64; s_count];
    let mut next = vec![0.0; s_count];
    let mut policy = vec![0; s_count];
    let mut order: Vec<usize> = (0..s_count).collect();
    let mut gain = 0.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iterations {
        iterations += 1;
        order.sort_by(|&i, &j| u[j].total_cmp(&u[i]).then(i.cmp(&j)));
        for s in 0..s_count {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..a_count {
                let r = (est.reward_mean(s, a) + est.reward_radius(s, a)).min(1.0);
                let q = optimistic_transition(est.transition_row(s, a), est.transition_radius(s, a), &order);
                let v = r + q.iter().zip(&u).map(|(p, x)| p * x).sum::<f64>();
                if v > best {
                    best = v;
                    best_a = a;
                }
            }
            next[s] = best;
            policy[s] = best_a;
        }
        let (lo, hi) = next
            .iter()
            .zip(&u)
            .map(|(n, o)| n - o)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        gain = (lo + hi) / 2.0;
        let floor = next.iter().copied().fold(f64::INFINITY, f64::min);
        for (o, n) in u.iter_mut().zip(&next) {
            *o = n - floor;
        }
        if hi - lo <= epsilon {
            converged = true;
            break;
        }
    }
    Ok(EviResult {
        policy,
        gain: gain.clamp(0.0, 1.0),
        bias: u,
        iterations,
        converged,
    })
}
