//! Spectral clustering of observations from a single trajectory.
//!
//! For each action `l`, three consecutive symbols `(y_{t-1}, y_t, y_{t+1})`
//! with `a_t = l` form a multi-view sample whose views are conditionally
//! independent given the hidden state at time `t`. The middle-view factor
//! matrix `V2` has the support of the observation matrix restricted to the
//! symbols where the policy plays `l`, so thresholding an estimate of `V2`
//! yields clusters of symbols that share a hidden state.
//!
//! Pipeline per action:
//!
//! 1. joint view frequencies and the cross moments `K23, K13, K21, K31`;
//! 2. rank from the singular values of `K23` above `g / ν^{1/2-ε}`, and a
//!    check that `K13`, `K31` are not noise-dominated at that rank;
//! 3. symmetrised views `A1 = K23 K13†`, `A3 = K21 K31†`, then
//!    `M2 = E[A1 v1 ⊗ A3 v3]` and `M3 = E[A1 v1 ⊗ A3 v3 ⊗ v2]`;
//! 4. whitening of `M3` by `M2`, tensor power method, un-whitening;
//! 5. thresholding of `V̂2` at `B_O = c √(ln(2 n^{3/2}/δ) / ν)`.
//!
//! The symbols are whatever alphabet the caller uses: raw observations, or
//! the auxiliary states of a previous clustering.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::clustering::{merge_overlapping, Clustering};
use crate::diagnostics::{action_probability, conditional_stationary, stationary_distribution};
use crate::error::{Error, Result};
use crate::linalg::{self, tensor_power_method, PowerMethodConfig, Tensor3};
use crate::model::{Policy, RomdpModel};

/// Sample count standing in for "infinitely many" when feeding exact moments.
pub const EXACT_SAMPLE_COUNT: u64 = 1_000_000_000_000;

/// How the support threshold on `V̂2` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum Threshold {
    /// `B_O = c_bound · √(ln(2 n^{3/2}/δ) / ν)` for every column.
    Bound { c_bound: f64 },
    /// An entry is retained when it exceeds
    /// `c_bound · √(ln(2 n^{3/2}/δ)) · se`, with `se` its standard error over
    /// bootstrap replicates of the triples. The column threshold sits halfway
    /// between the smallest retained and the largest discarded entry.
    Bootstrap { replicates: usize, c_bound: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub threshold: Threshold,
    /// Scale `g` of the rank threshold `g / ν^{1/2-ε}`.
    pub rank_scale: f64,
    /// Exponent slack `ε` of the rank threshold.
    pub rank_epsilon: f64,
    /// Upper bound on the estimated rank (e.g. a known `X`).
    pub max_rank: Option<usize>,
    /// Actions with fewer triples are skipped.
    pub sample_floor: u64,
    /// Tolerance on the recovered column masses and mixture weights; columns
    /// that are not close to probability vectors are discarded.
    pub mass_tolerance: f64,
    /// Actions are skipped when `σ_r(K̂13)` or `σ_r(K̂31)` falls below
    /// `conditioning_floor / √ν`.
    pub conditioning_floor: f64,
    pub power: PowerMethodConfig,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            threshold: Threshold::Bound { c_bound: 1.0 },
            rank_scale: DEFAULT_RANK_SCALE,
            rank_epsilon: 0.1,
            max_rank: None,
            sample_floor: 200,
            mass_tolerance: 0.25,
            conditioning_floor: DEFAULT_CONDITIONING_FLOOR,
            power: PowerMethodConfig::default(),
        }
    }
}

/// Calibrated default for `g`; see the rank-recovery tests.
pub const DEFAULT_RANK_SCALE: f64 = 0.05;

/// Calibrated default for the conditioning floor; see `check_conditioning`.
pub const DEFAULT_CONDITIONING_FLOOR: f64 = 3.0;

/// Three consecutive symbols filed under the action of the middle step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ViewTriple {
    pub v1: usize,
    pub v2: usize,
    pub v3: usize,
    pub action: usize,
}

/// Splits a symbol/action sequence into view triples, grouped by the action
/// of the middle step.
pub fn build_views(
    symbols: &[usize],
    actions: &[usize],
    alphabet: usize,
    num_actions: usize,
) -> Result<Vec<Vec<ViewTriple>>> {
    if symbols.len() != actions.len() {
        return Err(Error::Dimension(format!(
            "{} symbols but {} actions",
            symbols.len(),
            actions.len()
        )));
    }
    if symbols.len() < 3 {
        return Err(Error::TrajectoryTooShort {
            need: 3,
            got: symbols.len(),
        });
    }
    if let Some(&bad) = symbols.iter().find(|&&s| s >= alphabet) {
        return Err(Error::OutOfRange {
            what: "symbol",
            index: bad,
            size: alphabet,
        });
    }
    if let Some(&bad) = actions.iter().find(|&&a| a >= num_actions) {
        return Err(Error::OutOfRange {
            what: "action",
            index: bad,
            size: num_actions,
        });
    }
    let mut out = vec![Vec::new(); num_actions];
    for t in 1..symbols.len() - 1 {
        out[actions[t]].push(ViewTriple {
            v1: symbols[t - 1],
            v2: symbols[t],
            v3: symbols[t + 1],
            action: actions[t],
        });
    }
    Ok(out)
}

/// Moments of the three views for one action.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionMoments {
    pub action: usize,
    /// Number of triples `ν(l)`.
    pub count: u64,
    /// Joint frequencies `P(v1, v2, v3)` indexed `[v1][v2][v3]`.
    pub joint: Tensor3,
    pub k23: DMatrix<f64>,
    pub k13: DMatrix<f64>,
    pub k21: DMatrix<f64>,
    pub k31: DMatrix<f64>,
    pub est_rank: Option<usize>,
    pub m2: Option<DMatrix<f64>>,
    pub m3: Option<Tensor3>,
}

impl ActionMoments {
    /// Builds the cross moments from a joint distribution of the views.
    pub fn from_joint(action: usize, count: u64, joint: Tensor3) -> Result<Self> {
        let (n1, n2, n3) = joint.dims();
        if n1 != n2 || n2 != n3 {
            return Err(Error::Dimension(format!("joint dims {:?}", joint.dims())));
        }
        let n = n1;
        let mut k23 = DMatrix::zeros(n, n);
        let mut k13 = DMatrix::zeros(n, n);
        let mut k21 = DMatrix::zeros(n, n);
        let mut k31 = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let p = joint.get(i, j, k);
                    if p == 0.0 {
                        continue;
                    }
                    k23[(j, k)] += p;
                    k13[(i, k)] += p;
                    k21[(j, i)] += p;
                    k31[(k, i)] += p;
                }
            }
        }
        Ok(Self {
            action,
            count,
            joint,
            k23,
            k13,
            k21,
            k31,
            est_rank: None,
            m2: None,
            m3: None,
        })
    }

    pub fn alphabet(&self) -> usize {
        self.k23.nrows()
    }
}

/// Empirical cross moments of the triples of one action.
pub fn estimate_cross_moments(triples: &[ViewTriple], alphabet: usize) -> Result<ActionMoments> {
    let first = triples.first().ok_or(Error::Empty("triple list"))?;
    let mut joint = Tensor3::zeros(alphabet, alphabet, alphabet);
    for t in triples {
        if t.v1 >= alphabet || t.v2 >= alphabet || t.v3 >= alphabet {
            return Err(Error::OutOfRange {
                what: "symbol",
                index: t.v1.max(t.v2).max(t.v3),
                size: alphabet,
            });
        }
        joint.add(t.v1, t.v2, t.v3, 1.0);
    }
    let count = triples.len() as u64;
    joint.scale(1.0 / count as f64);
    ActionMoments::from_joint(first.action, count, joint)
}

/// Population moments of the views for one action under a policy, computed
/// from the model's definitions.
#[derive(Debug, Clone)]
pub struct ExactMoments {
    pub moments: ActionMoments,
    /// `[V_p]_{j,i} = P(v_p = j | x2 = i, a2 = l)`; columns of hidden states
    /// where `l` is never played are zero.
    pub v1: DMatrix<f64>,
    pub v2: DMatrix<f64>,
    pub v3: DMatrix<f64>,
    /// `ω_π^{(l)}`.
    pub omega: Vec<f64>,
    pub m2: DMatrix<f64>,
    pub m3: Tensor3,
}

impl ExactMoments {
    /// Hidden states where the action is played.
    pub fn support(&self) -> Vec<usize> {
        (0..self.omega.len()).filter(|&i| self.omega[i] > 0.0).collect()
    }

    /// Supports of the non-zero columns of `V2`.
    pub fn v2_supports(&self) -> Vec<BTreeSet<usize>> {
        self.support()
            .into_iter()
            .map(|i| (0..self.v2.nrows()).filter(|&j| self.v2[(j, i)] > 0.0).collect())
            .collect()
    }
}

/// Exact view moments of the stationary process under `policy` for `action`.
pub fn exact_moments(model: &RomdpModel, policy: &Policy, action: usize) -> Result<ExactMoments> {
    let (nx, ny) = (model.num_hidden(), model.num_obs());
    if action >= model.num_actions() {
        return Err(Error::OutOfRange {
            what: "action",
            index: action,
            size: model.num_actions(),
        });
    }
    let omega = stationary_distribution(model, policy)?;
    let omega_l = conditional_stationary(model, policy, &omega, action)?;
    let mut v1 = DMatrix::zeros(ny, nx);
    let mut v2 = DMatrix::zeros(ny, nx);
    let mut v3 = DMatrix::zeros(ny, nx);
    for i in 0..nx {
        let pa = action_probability(model, policy, i, action);
        if pa > 0.0 {
            for j in 0..ny {
                v2[(j, i)] = policy.prob(j, action) * model.emission(j, i) / pa;
            }
        }
        for j in 0..ny {
            v3[(j, i)] = (0..nx)
                .map(|k| model.transition(k, i, action) * model.emission(j, k))
                .sum();
        }
        // P(y1 = j | x2 = i) = Σ_{x1} ω(x1) O(j|x1) Σ_a π(a|j) T(i|x1,a) / ω(i)
        if omega[i] > 0.0 {
            for j in 0..ny {
                let mut acc = 0.0;
                for x1 in 0..nx {
                    let o = model.emission(j, x1);
                    if o == 0.0 {
                        continue;
                    }
                    let move_prob: f64 = (0..model.num_actions())
                        .map(|a| policy.prob(j, a) * model.transition(i, x1, a))
                        .sum();
                    acc += omega[x1] * o * move_prob;
                }
                v1[(j, i)] = acc / omega[i];
            }
        }
    }
    let mut joint = Tensor3::zeros(ny, ny, ny);
    let mut m2 = DMatrix::zeros(ny, ny);
    let mut m3 = Tensor3::zeros(ny, ny, ny);
    for i in (0..nx).filter(|&i| omega_l[i] > 0.0) {
        let w = omega_l[i];
        for a in 0..ny {
            for b in 0..ny {
                let wab = w * v2[(a, i)] * v2[(b, i)];
                m2[(a, b)] += wab;
                for c in 0..ny {
                    m3.add(a, b, c, wab * v2[(c, i)]);
                    joint.add(a, b, c, w * v1[(a, i)] * v2[(b, i)] * v3[(c, i)]);
                }
            }
        }
    }
    let moments = ActionMoments::from_joint(action, EXACT_SAMPLE_COUNT, joint)?;
    Ok(ExactMoments {
        moments,
        v1,
        v2,
        v3,
        omega: omega_l,
        m2,
        m3,
    })
}

/// Number of singular values of `K̂23` at or above `g / ν^{1/2-ε}`, clamped
/// to `[1, min(n, max_rank)]`.
pub fn estimate_rank(k23: &DMatrix<f64>, count: u64, g: f64, epsilon: f64, max_rank: Option<usize>) -> Result<usize> {
    if count == 0 {
        return Err(Error::Empty("sample count"));
    }
    if !(g > 0.0) || !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::InvalidConfig(format!("rank threshold g={g}, ε={epsilon}")));
    }
    let threshold = rank_threshold(count, g, epsilon);
    let above = linalg::count_singular_values_above(k23, threshold)?;
    let cap = max_rank.unwrap_or(usize::MAX).min(k23.nrows()).max(1);
    Ok(above.clamp(1, cap))
}

pub fn rank_threshold(count: u64, g: f64, epsilon: f64) -> f64 {
    g / (count as f64).powf(0.5 - epsilon)
}

/// Fails when the `r`-th singular value of a pseudo-inverted cross moment
/// is within `floor / √ν` of zero, where sampling noise dominates it.
pub fn check_conditioning(moments: &ActionMoments, floor: f64) -> Result<()> {
    let rank = moments
        .est_rank
        .ok_or(Error::InvalidConfig("rank must be estimated first".into()))?;
    let limit = floor / (moments.count as f64).sqrt();
    for (name, k) in [("K13", &moments.k13), ("K31", &moments.k31)] {
        let sigma = linalg::svd(k)?.singular_values.get(rank - 1).copied().unwrap_or(0.0);
        if sigma < limit {
            return Err(Error::Degenerate(format!(
                "{name} singular value {sigma:.3e} at rank {rank} below {limit:.3e}"
            )));
        }
    }
    Ok(())
}

/// Fills `M2` and `M3` from the cross moments and the joint view frequencies.
pub fn symmetrize_and_build(moments: &mut ActionMoments) -> Result<()> {
    let rank = moments
        .est_rank
        .ok_or(Error::InvalidConfig("rank must be estimated first".into()))?;
    for (name, k) in [("K13", &moments.k13), ("K31", &moments.k31), ("K23", &moments.k23)] {
        if k.amax() == 0.0 {
            return Err(Error::Degenerate(format!("{name} is identically zero")));
        }
    }
    let n = moments.alphabet();
    let a1 = &moments.k23 * linalg::truncated_pseudoinverse(&moments.k13, rank)?;
    let a3 = &moments.k21 * linalg::truncated_pseudoinverse(&moments.k31, rank)?;
    let raw = &a1 * &moments.k13 * a3.transpose();
    let m2 = (&raw + raw.transpose()) * 0.5;
    let mut m3 = Tensor3::zeros(n, n, n);
    for c in 0..n {
        let slice = DMatrix::from_fn(n, n, |i, k| moments.joint.get(i, c, k));
        if slice.amax() == 0.0 {
            continue;
        }
        let s = &a1 * slice * a3.transpose();
        for a in 0..n {
            for b in 0..n {
                m3.set(a, b, c, s[(a, b)]);
            }
        }
    }
    moments.m2 = Some(m2);
    moments.m3 = Some(m3);
    Ok(())
}

/// Estimated middle-view factor matrix and its thresholded support.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorEstimate {
    pub action: usize,
    /// `n × r`, non-negative.
    pub v2_hat: DMatrix<f64>,
    /// Mixture weights `ω^{(l)}` implied by the eigenvalues (`1/λ²`).
    pub weights: Vec<f64>,
    /// Support threshold per column.
    pub bounds: Vec<f64>,
    /// Column each row is assigned to (at most one).
    pub row_assignment: Vec<Option<usize>>,
    /// Columns rejected because they are not close to a probability vector.
    pub rejected_columns: Vec<usize>,
}

impl FactorEstimate {
    /// Binary support matrix entry.
    pub fn binary(&self, row: usize, col: usize) -> bool {
        self.row_assignment[row] == Some(col)
    }

    /// Clusters `Ŷ_i` for each column, skipping empty ones.
    pub fn clusters(&self) -> Vec<BTreeSet<usize>> {
        let mut out = vec![BTreeSet::new(); self.v2_hat.ncols()];
        for (j, col) in self.row_assignment.iter().enumerate() {
            if let Some(c) = col {
                out[*c].insert(j);
            }
        }
        out.into_iter().filter(|s| !s.is_empty()).collect()
    }
}

/// `B_O = c · √(ln(2 n^{3/2}/δ) / ν)`.
pub fn support_bound(c_bound: f64, alphabet: usize, delta: f64, count: u64) -> f64 {
    c_bound * ((2.0 * (alphabet as f64).powf(1.5) / delta).ln() / count as f64).sqrt()
}

/// Decomposes `M3` after whitening with `M2` and returns the un-whitened,
/// sign-fixed, non-negative columns of `V̂2` with their mixture weights.
pub fn decompose<R: Rng + ?Sized>(
    moments: &ActionMoments,
    power: &PowerMethodConfig,
    rng: &mut R,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let rank = moments.est_rank.ok_or(Error::InvalidConfig("rank not estimated".into()))?;
    let m2 = moments.m2.as_ref().ok_or(Error::InvalidConfig("M2 not built".into()))?;
    let m3 = moments.m3.as_ref().ok_or(Error::InvalidConfig("M3 not built".into()))?;
    let wh = linalg::whiten(m2, rank)?;
    let tw = m3.multilinear(&wh.w, &wh.w, &wh.w)?.symmetrized()?;
    let pairs = tensor_power_method(&tw, power, rng)?;
    let unwhiten = wh.w_pinv.transpose();
    let n = m2.nrows();
    let mut v2 = DMatrix::zeros(n, rank);
    let mut weights = Vec::with_capacity(rank);
    for i in 0..rank {
        let lambda = pairs.values[i];
        let mut col = &unwhiten * pairs.vectors.column(i) * lambda;
        if col.sum() < 0.0 {
            col = -col;
        }
        col.iter_mut().for_each(|v| *v = v.max(0.0));
        v2.set_column(i, &col);
        weights.push(if lambda != 0.0 { 1.0 / (lambda * lambda) } else { 0.0 });
    }
    Ok((v2, weights))
}

/// Columns whose mass is far from one cannot be conditional distributions.
fn implausible_columns(v2: &DMatrix<f64>, weights: &[f64], tolerance: f64) -> Vec<usize> {
    (0..v2.ncols())
        .filter(|&i| {
            let mass = v2.column(i).sum();
            !mass.is_finite() || (mass - 1.0).abs() > tolerance || !(weights[i] > 0.0) || weights[i] > 1.0 + tolerance
        })
        .collect()
}

fn assign_rows(v2: &DMatrix<f64>, bounds: &[f64], excluded: &[usize]) -> Vec<Option<usize>> {
    (0..v2.nrows())
        .map(|j| {
            let row = v2.row(j);
            let best = (0..v2.ncols()).fold(0, |b, c| if row[c] > row[b] { c } else { b });
            let keep = row[best] > 0.0 && row[best] >= bounds[best] && !excluded.contains(&best);
            keep.then_some(best)
        })
        .collect()
}

/// Recovers `V̂2` for one action and thresholds its support.
///
/// `moments` must carry `M2`, `M3` and a rank. Whitening failures surface as
/// errors; callers skip the action for this epoch.
pub fn recover_factor<R: Rng + ?Sized>(
    moments: &ActionMoments,
    delta: f64,
    config: &SpectralConfig,
    rng: &mut R,
) -> Result<FactorEstimate> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfig(format!("δ = {delta} not in (0, 1)")));
    }
    let (v2_hat, weights) = decompose(moments, &config.power, rng)?;
    let rejected = implausible_columns(&v2_hat, &weights, config.mass_tolerance);
    let n = v2_hat.nrows();
    let r = v2_hat.ncols();
    let bounds = match config.threshold {
        Threshold::Bound { c_bound } => vec![support_bound(c_bound, n, delta, moments.count); r],
        Threshold::Bootstrap { replicates, c_bound } => {
            bootstrap_bounds(moments, &v2_hat, delta, replicates, c_bound, config, rng)?
        }
    };
    let row_assignment = assign_rows(&v2_hat, &bounds, &rejected);
    Ok(FactorEstimate {
        action: moments.action,
        v2_hat,
        weights,
        bounds,
        row_assignment,
        rejected_columns: rejected,
    })
}

fn bootstrap_bounds<R: Rng + ?Sized>(
    moments: &ActionMoments,
    base: &DMatrix<f64>,
    delta: f64,
    replicates: usize,
    c_bound: f64,
    config: &SpectralConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let (n, r) = base.shape();
    let cells: Vec<(usize, f64)> = moments
        .joint
        .data()
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, p)| p > 0.0)
        .collect();
    let mut sum = DMatrix::<f64>::zeros(n, r);
    let mut sum_sq = DMatrix::<f64>::zeros(n, r);
    let mut done = 0usize;
    for _ in 0..replicates.max(2) {
        let joint = Tensor3::from_vec((n, n, n), multinomial_frequencies(&cells, n * n * n, moments.count, rng)?)?;
        let mut rep = ActionMoments::from_joint(moments.action, moments.count, joint)?;
        rep.est_rank = moments.est_rank;
        if symmetrize_and_build(&mut rep).is_err() {
            continue;
        }
        let Ok((v, _)) = decompose(&rep, &config.power, rng) else {
            continue;
        };
        let mut used = vec![false; r];
        for c in 0..r {
            let score = |k: usize| base.column(c).dot(&v.column(k));
            let Some(k) = (0..r).filter(|&k| !used[k]).max_by(|&a, &b| score(a).total_cmp(&score(b))) else {
                continue;
            };
            used[k] = true;
            for j in 0..n {
                sum[(j, c)] += v[(j, k)];
                sum_sq[(j, c)] += v[(j, k)] * v[(j, k)];
            }
        }
        done += 1;
    }
    if done < 2 {
        return Ok(vec![f64::INFINITY; r]);
    }
    let z = c_bound * (2.0 * (n as f64).powf(1.5) / delta).ln().sqrt();
    let d = done as f64;
    Ok((0..r)
        .map(|c| {
            let mut lo = f64::INFINITY;
            let mut hi: f64 = 0.0;
            for j in 0..n {
                let mean = sum[(j, c)] / d;
                let var = (sum_sq[(j, c)] / d - mean * mean).max(0.0) * d / (d - 1.0);
                let value = base[(j, c)];
                if value > 0.0 && value > z * var.sqrt() {
                    lo = lo.min(value);
                } else {
                    hi = hi.max(value);
                }
            }
            if lo.is_infinite() {
                f64::INFINITY
            } else {
                (lo + hi.min(lo)) / 2.0
            }
        })
        .collect())
}

/// Frequencies of `count` draws over `len` cells, by successive binomial
/// splits of the remaining mass.
pub fn multinomial_frequencies<R: Rng + ?Sized>(cells: &[(usize, f64)], len: usize, count: u64, rng: &mut R) -> Result<Vec<f64>> {
    let mut out = vec![0.0; len];
    let mut left = count;
    let mut mass: f64 = cells.iter().map(|c| c.1).sum();
    for &(i, p) in cells {
        if left == 0 {
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = if q >= 1.0 {
            left
        } else {
            Binomial::new(left, q).map_err(|e| Error::Degenerate(e.to_string()))?.sample(rng)
        };
        out[i] = k as f64 / count as f64;
        left -= k;
        mass -= p;
    }
    Ok(out)
}

/// Clusters from every action's thresholded factor, merged through shared
/// symbols; symbols in no cluster stay singletons.
pub fn partial_clustering(factors: &[FactorEstimate], alphabet: usize) -> Result<Clustering> {
    let sets: Vec<BTreeSet<usize>> = factors.iter().flat_map(FactorEstimate::clusters).collect();
    merge_overlapping(&sets, alphabet)
}

/// What happened to one action in a spectral pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ActionOutcome {
    Skipped { action: usize, count: u64, reason: String },
    Recovered { action: usize, count: u64, rank: usize, clusters: Vec<Vec<usize>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// Clustering of the input alphabet.
    pub clustering: Clustering,
    pub actions: Vec<ActionOutcome>,
    /// Per-action factors, for debugging.
    #[serde(skip)]
    pub factors: Vec<FactorEstimate>,
}

/// Runs the per-action pipeline on one symbol sequence and merges the
/// resulting clusters.
pub fn spectral_clustering<R: Rng + ?Sized>(
    symbols: &[usize],
    actions: &[usize],
    alphabet: usize,
    num_actions: usize,
    delta: f64,
    config: &SpectralConfig,
    rng: &mut R,
) -> Result<SpectralReport> {
    let views = build_views(symbols, actions, alphabet, num_actions)?;
    let mut outcomes = Vec::with_capacity(num_actions);
    let mut factors = Vec::new();
    for (action, triples) in views.iter().enumerate() {
        let count = triples.len() as u64;
        if count < config.sample_floor.max(1) {
            outcomes.push(ActionOutcome::Skipped {
                action,
                count,
                reason: format!("{count} triples below floor {}", config.sample_floor),
            });
            continue;
        }
        match recover_action(triples, alphabet, delta, config, rng) {
            Ok(f) => {
                outcomes.push(ActionOutcome::Recovered {
                    action,
                    count,
                    rank: f.v2_hat.ncols(),
                    clusters: f.clusters().into_iter().map(|s| s.into_iter().collect()).collect(),
                });
                factors.push(f);
            }
            Err(e) => outcomes.push(ActionOutcome::Skipped {
                action,
                count,
                reason: e.to_string(),
            }),
        }
    }
    Ok(SpectralReport {
        clustering: partial_clustering(&factors, alphabet)?,
        actions: outcomes,
        factors,
    })
}

fn recover_action<R: Rng + ?Sized>(
    triples: &[ViewTriple],
    alphabet: usize,
    delta: f64,
    config: &SpectralConfig,
    rng: &mut R,
) -> Result<FactorEstimate> {
    let mut m = estimate_cross_moments(triples, alphabet)?;
    m.est_rank = Some(estimate_rank(&m.k23, m.count, config.rank_scale, config.rank_epsilon, config.max_rank)?);
    check_conditioning(&m, config.conditioning_floor)?;
    symmetrize_and_build(&mut m)?;
    recover_factor(&m, delta, config, rng)
}

/// Runs the pipeline on exact moments (oracle path).
pub fn recover_from_exact<R: Rng + ?Sized>(
    exact: &ExactMoments,
    config: &SpectralConfig,
    rng: &mut R,
) -> Result<FactorEstimate> {
    let mut m = exact.moments.clone();
    m.est_rank = Some(estimate_rank(&m.k23, m.count, config.rank_scale, config.rank_epsilon, config.max_rank)?);
    symmetrize_and_build(&mut m)?;
    recover_factor(&m, 0.05, config, rng)
}
