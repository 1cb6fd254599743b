//! Ground-truth quantities: stationary distributions, optimal gains,
//! diameters, return times and the reachability sets behind the spectral
//! factor matrices. None of this is visible to a learner.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Policy, RomdpModel};

/// Enumeration limit for brute-force searches over deterministic policies.
pub const MAX_ENUMERATED_POLICIES: usize = 1 << 16;

/// A finite MDP in flat layout: `transitions[(s·A + a)·S + s']`, `rewards[s·A + a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    num_states: usize,
    num_actions: usize,
    transitions: Vec<f64>,
    rewards: Vec<f64>,
}

impl FiniteMdp {
    pub fn new(num_states: usize, num_actions: usize, transitions: Vec<f64>, rewards: Vec<f64>) -> Result<Self> {
        if transitions.len() != num_states * num_actions * num_states || rewards.len() != num_states * num_actions {
            return Err(Error::Dimension("MDP tables disagree with (S, A)".into()));
        }
        Ok(Self {
            num_states,
            num_actions,
            transitions,
            rewards,
        })
    }

    /// The MDP on hidden states.
    pub fn hidden(model: &RomdpModel) -> Self {
        let (x, a) = (model.num_hidden(), model.num_actions());
        let mut transitions = vec![0.0; x * a * x];
        let mut rewards = vec![0.0; x * a];
        for s in 0..x {
            for l in 0..a {
                let p = s * a + l;
                rewards[p] = model.reward_mean(s, l);
                transitions[p * x..(p + 1) * x].copy_from_slice(model.transition_row(s, l));
            }
        }
        Self::new(x, a, transitions, rewards).expect("shapes match")
    }

    /// The MDP on observations: `P(y' | y, a) = O[y', x_{y'}] · T[x_{y'}, x_y, a]`.
    pub fn observed(model: &RomdpModel) -> Result<Self> {
        let (y, a) = (model.num_obs(), model.num_actions());
        let owners: Vec<usize> = (0..y)
            .map(|j| {
                model.owner(j).ok_or(Error::InvalidConfig(format!(
                    "observation {j} has no unique hidden state"
                )))
            })
            .collect::<Result<_>>()?;
        let mut transitions = vec![0.0; y * a * y];
        let mut rewards = vec![0.0; y * a];
        for j in 0..y {
            for l in 0..a {
                let p = j * a + l;
                rewards[p] = model.reward_mean(owners[j], l);
                for k in 0..y {
                    transitions[p * y + k] =
                        model.emission(k, owners[k]) * model.transition(owners[k], owners[j], l);
                }
            }
        }
        Self::new(y, a, transitions, rewards)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transitions[(s * self.num_actions + a) * self.num_states + next]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.num_actions + a]
    }

    /// Transition matrix and reward vector of a deterministic stationary policy.
    pub fn policy_chain(&self, policy: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.num_states;
        let p = DMatrix::from_fn(n, n, |i, j| self.prob(i, policy[i], j));
        let r = DVector::from_fn(n, |i, _| self.reward(i, policy[i]));
        (p, r)
    }
}

fn for_each_policy(num_states: usize, num_actions: usize, mut f: impl FnMut(&[usize])) -> Result<()> {
    let total = (num_actions as f64).powi(num_states as i32);
    if total > MAX_ENUMERATED_POLICIES as f64 {
        return Err(Error::InvalidConfig(format!(
            "{total} deterministic policies exceed the enumeration limit"
        )));
    }
    let mut policy = vec![0; num_states];
    loop {
        f(&policy);
        let mut i = 0;
        loop {
            if i == num_states {
                return Ok(());
            }
            policy[i] += 1;
            if policy[i] < num_actions {
                break;
            }
            policy[i] = 0;
            i += 1;
        }
    }
}

/// Cesàro limit of a stochastic matrix, through repeated squaring of its lazy
/// version.
fn limit_matrix(p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p.nrows();
    let mut m = (p + DMatrix::identity(n, n)) * 0.5;
    for _ in 0..64 {
        let mut next = &m * &m;
        for mut row in next.row_iter_mut() {
            let total = row.sum();
            row /= total;
        }
        if (&next - &m).amax() < 1e-14 {
            return next;
        }
        m = next;
    }
    m
}

/// Optimal gain by enumerating deterministic policies (brute-force oracle).
pub fn brute_force_gain(mdp: &FiniteMdp) -> Result<(f64, Vec<usize>)> {
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for_each_policy(mdp.num_states, mdp.num_actions, |pol| {
        let (p, r) = mdp.policy_chain(pol);
        let g = limit_matrix(&p) * r;
        let gain = g.max();
        if gain > best.0 + 1e-15 {
            best = (gain, pol.to_vec());
        }
    })?;
    Ok(best)
}

/// Optimal average reward by relative value iteration on the lazy MDP
/// (`P ← (P + I)/2`, which leaves every policy's gain unchanged).
pub fn optimal_gain(mdp: &FiniteMdp, span_tol: f64) -> Result<(f64, Vec<usize>)> {
    let (n, a) = (mdp.num_states, mdp.num_actions);
    if n == 0 || a == 0 {
        return Err(Error::Empty("MDP"));
    }
    let mut u = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut policy = vec![0; n];
    for _ in 0..10_000_000 {
        for s in 0..n {
            let mut best = f64::NEG_INFINITY;
            for l in 0..a {
                let ev: f64 = (0..n).map(|k| mdp.prob(s, l, k) * u[k]).sum();
                let v = mdp.reward(s, l) + 0.5 * (ev + u[s]);
                if v > best + 1e-15 {
                    best = v;
                    policy[s] = l;
                }
            }
            next[s] = best;
        }
        let (lo, hi) = next
            .iter()
            .zip(&u)
            .map(|(x, y)| x - y)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        let base = next[0];
        for (o, x) in u.iter_mut().zip(&next) {
            *o = x - base;
        }
        if hi - lo <= span_tol {
            return Ok(((hi + lo) / 2.0, policy));
        }
    }
    Err(Error::InvalidConfig("average-reward value iteration did not converge".into()))
}

/// `ρ*` of the hidden MDP.
pub fn optimal_hidden_gain(model: &RomdpModel) -> Result<f64> {
    optimal_gain(&FiniteMdp::hidden(model), 1e-10).map(|(g, _)| g)
}

/// Hidden-state chain induced by an observation-based policy:
/// `P[i][i'] = Σ_y O(y|i) Σ_l π(l|y) T(i'|i,l)`.
pub fn induced_chain(model: &RomdpModel, policy: &Policy) -> Result<DMatrix<f64>> {
    policy.check(model.num_obs(), model.num_actions())?;
    let x = model.num_hidden();
    let mut p = DMatrix::zeros(x, x);
    for i in 0..x {
        for l in 0..model.num_actions() {
            let w = action_probability(model, policy, i, l);
            if w == 0.0 {
                continue;
            }
            for k in 0..x {
                p[(i, k)] += w * model.transition(k, i, l);
            }
        }
    }
    Ok(p)
}

/// `P(a = l | x = i)` under an observation-based policy.
pub fn action_probability(model: &RomdpModel, policy: &Policy, hidden: usize, action: usize) -> f64 {
    model
        .emission_row(hidden)
        .iter()
        .enumerate()
        .filter(|(_, &o)| o > 0.0)
        .map(|(y, &o)| o * policy.prob(y, action))
        .sum()
}

fn reachable(adj: &[Vec<usize>], from: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Checks a stochastic matrix is irreducible and aperiodic.
pub fn check_ergodic(p: &DMatrix<f64>) -> Result<()> {
    let n = p.nrows();
    if n == 0 {
        return Err(Error::Empty("chain"));
    }
    let adj: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| p[(i, j)] > 0.0).collect()).collect();
    let radj: Vec<Vec<usize>> = (0..n).map(|j| (0..n).filter(|&i| p[(i, j)] > 0.0).collect()).collect();
    if !reachable(&adj, 0).iter().all(|&b| b) || !reachable(&radj, 0).iter().all(|&b| b) {
        return Err(Error::NotErgodic("chain is reducible".into()));
    }
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = VecDeque::from([0]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut period = 0;
    for u in 0..n {
        for &v in &adj[u] {
            period = gcd(period, (level[u] + 1).abs_diff(level[v]));
        }
    }
    if period != 1 {
        return Err(Error::NotErgodic(format!("chain has period {period}")));
    }
    Ok(())
}

/// Stationary distribution of an ergodic stochastic matrix.
pub fn stationary_of(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_ergodic(p)?;
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let lu = a.clone().lu();
    let mut w = lu
        .solve(&b)
        .ok_or(Error::NotErgodic("singular stationary system".into()))?;
    // one step of iterative refinement
    let r = &b - &a * &w;
    if let Some(dw) = lu.solve(&r) {
        w += dw;
    }
    let mut w: Vec<f64> = w.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// Stationary distribution `ω_π` of the hidden chain under `policy`.
pub fn stationary_distribution(model: &RomdpModel, policy: &Policy) -> Result<Vec<f64>> {
    stationary_of(&induced_chain(model, policy)?)
}

/// `ω_π^{(l)}(i) = P_π(x = i | a = l)`.
pub fn conditional_stationary(model: &RomdpModel, policy: &Policy, omega: &[f64], action: usize) -> Result<Vec<f64>> {
    let joint: Vec<f64> = (0..model.num_hidden())
        .map(|i| omega[i] * action_probability(model, policy, i, action))
        .collect();
    let total: f64 = joint.iter().sum();
    if total <= 0.0 {
        return Err(Error::ActionNeverTaken(action));
    }
    Ok(joint.into_iter().map(|v| v / total).collect())
}

/// Hidden-state sets attached to an action under a policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReachSets {
    /// States one step before a state in `support` under the policy.
    pub predecessors: Vec<usize>,
    /// States where the action is taken.
    pub support: Vec<usize>,
    /// States reachable from `support` by taking the action.
    pub successors: Vec<usize>,
}

pub fn reach_sets(model: &RomdpModel, policy: &Policy, action: usize) -> Result<ReachSets> {
    if action >= model.num_actions() {
        return Err(Error::OutOfRange {
            what: "action",
            index: action,
            size: model.num_actions(),
        });
    }
    let x = model.num_hidden();
    let support: Vec<usize> = (0..x)
        .filter(|&i| action_probability(model, policy, i, action) > 0.0)
        .collect();
    let successors: Vec<usize> = (0..x)
        .filter(|&k| support.iter().any(|&i| model.transition(k, i, action) > 0.0))
        .collect();
    let chain = induced_chain(model, policy)?;
    let predecessors: Vec<usize> = (0..x)
        .filter(|&h| support.iter().any(|&i| chain[(h, i)] > 0.0))
        .collect();
    Ok(ReachSets {
        predecessors,
        support,
        successors,
    })
}

/// Expected hitting times of `target` under a deterministic policy, or `None`
/// if the policy does not reach it from every state.
fn hitting_times(mdp: &FiniteMdp, policy: &[usize], target: usize) -> Option<Vec<f64>> {
    let n = mdp.num_states;
    let others: Vec<usize> = (0..n).filter(|&s| s != target).collect();
    let m = others.len();
    if m == 0 {
        return Some(vec![0.0]);
    }
    let a = DMatrix::from_fn(m, m, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - mdp.prob(others[i], policy[others[i]], others[j])
    });
    let h = a.lu().solve(&DVector::from_element(m, 1.0))?;
    if h.iter().any(|v| !v.is_finite() || *v < -1e-9) {
        return None;
    }
    let mut out = vec![0.0; n];
    for (i, &s) in others.iter().enumerate() {
        out[s] = h[i];
    }
    Some(out)
}

/// Minimal expected hitting times of `target` by policy iteration on the
/// stochastic shortest path problem.
pub fn min_hitting_times(mdp: &FiniteMdp, target: usize) -> Result<Vec<f64>> {
    let (n, a) = (mdp.num_states, mdp.num_actions);
    // proper initial policy: step toward the target along a BFS tree of the union graph
    let mut dist = vec![usize::MAX; n];
    let mut policy = vec![0; n];
    dist[target] = 0;
    let mut queue = VecDeque::from([target]);
    while let Some(v) = queue.pop_front() {
        for u in 0..n {
            if dist[u] != usize::MAX {
                continue;
            }
            if let Some(l) = (0..a).find(|&l| mdp.prob(u, l, v) > 0.0) {
                dist[u] = dist[v] + 1;
                policy[u] = l;
                queue.push_back(u);
            }
        }
    }
    if let Some(source) = dist.iter().position(|&d| d == usize::MAX) {
        return Err(Error::Unreachable {
            source_state: source,
            target,
        });
    }
    let mut h = hitting_times(mdp, &policy, target).ok_or(Error::Unreachable {
        source_state: 0,
        target,
    })?;
    for _ in 0..10_000 {
        let mut changed = false;
        for s in (0..n).filter(|&s| s != target) {
            let q = |l: usize| 1.0 + (0..n).map(|k| mdp.prob(s, l, k) * h[k]).sum::<f64>();
            let current = q(policy[s]);
            let (best_l, best) = (0..a).map(|l| (l, q(l))).fold((policy[s], current), |acc, x| {
                if x.1 < acc.1 - 1e-12 * acc.1.max(1.0) {
                    x
                } else {
                    acc
                }
            });
            if best_l != policy[s] && best < current {
                policy[s] = best_l;
                changed = true;
            }
        }
        if !changed {
            return Ok(h);
        }
        h = hitting_times(mdp, &policy, target).ok_or(Error::Unreachable {
            source_state: 0,
            target,
        })?;
    }
    Ok(h)
}

/// `D = max_{s,s'} min_π E[τ_π(s, s')]`.
pub fn diameter(mdp: &FiniteMdp) -> Result<f64> {
    let mut d: f64 = 0.0;
    for target in 0..mdp.num_states {
        let h = min_hitting_times(mdp, target)?;
        d = d.max(h.iter().copied().fold(0.0, f64::max));
    }
    Ok(d)
}

/// Largest expected return time `max_{x,π} E[τ_π(x,x)] = max 1/ω_π(x)` over
/// deterministic hidden-state policies.
pub fn max_return_time(model: &RomdpModel) -> Result<f64> {
    let mdp = FiniteMdp::hidden(model);
    let mut worst: f64 = 0.0;
    let mut failure = None;
    for_each_policy(mdp.num_states, mdp.num_actions, |pol| {
        let (p, _) = mdp.policy_chain(pol);
        match stationary_of(&p) {
            Ok(w) => {
                for v in w {
                    worst = worst.max(if v > 0.0 { 1.0 / v } else { f64::INFINITY });
                }
            }
            Err(e) => failure = Some(e),
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(worst),
    }
}

/// Summary of ground-truth chain quantities for one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub stationary: Vec<f64>,
    /// Per action; `None` when the action is never taken.
    pub conditional: Vec<Option<Vec<f64>>>,
    pub reach: Vec<ReachSets>,
    pub max_return_time: Option<f64>,
    pub hidden_diameter: f64,
    pub observation_diameter: f64,
}

pub fn chain_stats(model: &RomdpModel, policy: &Policy) -> Result<ChainStats> {
    let stationary = stationary_distribution(model, policy)?;
    let conditional = (0..model.num_actions())
        .map(|l| conditional_stationary(model, policy, &stationary, l).ok())
        .collect();
    let reach = (0..model.num_actions())
        .map(|l| reach_sets(model, policy, l))
        .collect::<Result<_>>()?;
    Ok(ChainStats {
        stationary,
        conditional,
        reach,
        max_return_time: max_return_time(model).ok(),
        hidden_diameter: diameter(&FiniteMdp::hidden(model))?,
        observation_diameter: diameter(&FiniteMdp::observed(model)?)?,
    })
}

/// Number of auxiliary states whose observations span more than one hidden state.
pub fn impure_clusters(model: &RomdpModel, clustering: &crate::clustering::Clustering) -> usize {
    clustering
        .members()
        .iter()
        .filter(|m| {
            let first = model.owner(m[0]);
            m.iter().any(|&y| model.owner(y) != first)
        })
        .count()
}
