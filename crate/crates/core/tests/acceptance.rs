//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.
//!
//! Pass a substring (e.g. `criterion_4`) to run a subset.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use romdp_core::diagnostics::{brute_force_gain, impure_clusters, FiniteMdp};
use romdp_core::harness::{cell_stem, run_cell, Diameters};
use romdp_core::spectral::{exact_moments, recover_from_exact};
use romdp_core::ucrl::{extended_value_iteration, reward_radius, transition_radius, EVI_MAX_ITERATIONS};
use romdp_core::{
    generate_random_romdp, run_sl_ucrl, run_ucrl_flat, AgentConfig, Algorithm, AuxEstimates, Clustering, GeneratorConfig, Policy,
    RomdpModel, RunTrace, SpectralConfig,
};

const ACCEPTANCE_MODEL_SEED: u64 = 42;
const DELTA: f64 = 0.05;

struct Outcome {
    pass: bool,
    detail: String,
}

fn acceptance_model(y: usize) -> RomdpModel {
    generate_random_romdp(&GeneratorConfig::new(5, y, 4, ACCEPTANCE_MODEL_SEED)).expect("generator")
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Deterministic model with `j ↦ j mod x` as the observation owner and
/// integer-pattern transition, emission and reward tables.
fn hand_built(x: usize, y: usize, a: usize, salt: usize) -> RomdpModel {
    let transition: Vec<Vec<Vec<f64>>> = (0..a)
        .map(|l| {
            (0..x)
                .map(|i| {
                    let w: Vec<f64> = (0..x)
                        .map(|k| 1.0 + ((i * 3 + k * 5 + l * 7 + salt) % 5) as f64 + if i == (k + l) % x { 4.0 } else { 0.0 })
                        .collect();
                    let total: f64 = w.iter().sum();
                    w.into_iter().map(|v| v / total).collect()
                })
                .collect()
        })
        .collect();
    let observation: Vec<Vec<f64>> = (0..x)
        .map(|i| {
            let w: Vec<f64> = (0..y).map(|j| if j % x == i { 1.0 + ((j + salt) % 3) as f64 } else { 0.0 }).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|v| v / total).collect()
        })
        .collect();
    let reward: Vec<Vec<f64>> = (0..x).map(|i| (0..a).map(|l| ((i + 2 * l + salt) % 4) as f64 / 3.0).collect()).collect();
    RomdpModel::new(transition, observation, reward)
}

fn criterion_1() -> Outcome {
    let cases = [(2, 4, 2, 0), (3, 6, 2, 1), (3, 9, 3, 2), (4, 8, 2, 3), (4, 12, 3, 4), (4, 10, 2, 5)];
    let mut problems = Vec::new();
    let mut slowest = Duration::ZERO;
    let mut actions_checked = 0;
    for &(x, y, a, salt) in &cases {
        let model = hand_built(x, y, a, salt);
        if !model.validate().is_empty() || !model.transition_slices_full_rank() {
            problems.push(format!("model X={x} Y={y} invalid"));
            continue;
        }
        let start = Instant::now();
        let policy = Policy::Deterministic((0..y).map(|j| (j / x + j) % a).collect());
        let mut rng = ChaCha8Rng::seed_from_u64(salt as u64);
        for l in 0..a {
            let Ok(exact) = exact_moments(&model, &policy, l) else { continue };
            let factor = match recover_from_exact(&exact, &SpectralConfig::default(), &mut rng) {
                Ok(f) => f,
                Err(e) => {
                    problems.push(format!("X={x} Y={y} action {l}: {e}"));
                    continue;
                }
            };
            let mut recovered: Vec<BTreeSet<usize>> = (0..factor.v2_hat.ncols())
                .map(|c| (0..y).filter(|&j| factor.binary(j, c)).collect())
                .collect();
            let mut truth = exact.v2_supports();
            recovered.sort();
            truth.sort();
            if recovered != truth {
                problems.push(format!("X={x} Y={y} action {l}: {recovered:?} vs {truth:?}"));
            }
            actions_checked += 1;
        }
        let took = start.elapsed();
        slowest = slowest.max(took);
        if took >= Duration::from_secs(1) {
            problems.push(format!("X={x} Y={y} took {took:?}"));
        }
    }
    Outcome {
        pass: problems.is_empty() && actions_checked >= cases.len(),
        detail: format!(
            "{} models, {actions_checked} actions, slowest {:.3}s{}",
            cases.len(),
            slowest.as_secs_f64(),
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    }
}

struct SafetyRuns {
    model: RomdpModel,
    traces: Vec<RunTrace>,
    elapsed: Duration,
}

fn safety_runs() -> SafetyRuns {
    let model = acceptance_model(10);
    let start = Instant::now();
    let traces: Vec<RunTrace> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let mut config = AgentConfig::new(100_000, seed);
            config.delta = DELTA;
            run_sl_ucrl(&model, &config).expect("run")
        })
        .collect();
    SafetyRuns {
        model,
        traces,
        elapsed: start.elapsed(),
    }
}

fn criterion_2(runs: &SafetyRuns) -> Outcome {
    let impure: Vec<usize> = runs
        .traces
        .iter()
        .map(|t| {
            t.epochs
                .iter()
                .map(|e| impure_clusters(&runs.model, &Clustering::from_labels(&e.assignment)))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let bad = impure.iter().filter(|&&c| c > 0).count();
    Outcome {
        pass: bad == 0 && runs.elapsed < Duration::from_secs(300),
        detail: format!(
            "{bad} of {} runs with an impure cluster in some epoch; {:.1}s",
            impure.len(),
            runs.elapsed.as_secs_f64()
        ),
    }
}

fn criterion_3(runs: &SafetyRuns) -> Outcome {
    let cap = 4 * 5;
    let finals: Vec<usize> = runs.traces.iter().map(RunTrace::final_s_count).collect();
    let mut sorted: Vec<f64> = finals.iter().map(|&s| s as f64).collect();
    let med = median(&mut sorted);
    let over_cap = finals.iter().filter(|&&s| s > cap).count();
    Outcome {
        pass: over_cap == 0 && med <= 7.0,
        detail: format!("final S per seed {finals:?}; median {med}; {over_cap} runs above A·X = {cap}"),
    }
}

/// Uniform point on the simplex.
fn simplex(rng: &mut ChaCha8Rng, s: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..s).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

fn random_mdp(rng: &mut ChaCha8Rng) -> FiniteMdp {
    let s = rng.random_range(2..=4);
    let a = rng.random_range(2..=3);
    let mut transitions = Vec::with_capacity(s * a * s);
    for _ in 0..s * a {
        transitions.extend(simplex(rng, s));
    }
    let rewards: Vec<f64> = (0..s * a).map(|_| rng.random()).collect();
    FiniteMdp::new(s, a, transitions, rewards).expect("shapes")
}

/// Estimates whose intervals contain the true MDP: `p̂` is moved towards a
/// random distribution by at most `d_p` in L1, `r̂` by at most `d_r`.
fn valid_estimates(mdp: &FiniteMdp, scale: f64, rng: &mut ChaCha8Rng) -> AuxEstimates {
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    let mut r_hat = Vec::new();
    let mut p_hat = Vec::new();
    let mut d_r = Vec::new();
    let mut d_p = Vec::new();
    for st in 0..s {
        for l in 0..a {
            let dr: f64 = scale * rng.random_range(0.0..0.3);
            let dp: f64 = scale * rng.random_range(0.0..1.0);
            let r = mdp.reward(st, l);
            r_hat.push((r + dr * rng.random_range(-1.0..=1.0)).clamp(0.0, 1.0));
            let p: Vec<f64> = (0..s).map(|k| mdp.prob(st, l, k)).collect();
            let q = simplex(rng, s);
            let dist: f64 = p.iter().zip(&q).map(|(x, y)| (x - y).abs()).sum();
            let lambda = if dist > 0.0 { (dp / dist).min(1.0) * rng.random::<f64>() } else { 0.0 };
            p_hat.extend(p.iter().zip(&q).map(|(x, y)| (1.0 - lambda) * x + lambda * y));
            d_r.push(dr);
            d_p.push(dp);
        }
    }
    AuxEstimates::from_model(s, a, r_hat, p_hat, d_r, d_p).expect("shapes")
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let epsilon = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures = Vec::new();
    let mut worst_margin = f64::INFINITY;
    for case in 0..50 {
        let mdp = random_mdp(&mut rng);
        let scale = [0.0, 0.01, 0.1, 1.0, 1.0][case % 5];
        let est = valid_estimates(&mdp, scale, &mut rng);
        let (rho_star, _) = brute_force_gain(&mdp).expect("oracle");
        let evi = extended_value_iteration(&est, epsilon, EVI_MAX_ITERATIONS).expect("evi");
        let margin = evi.gain + epsilon - rho_star;
        worst_margin = worst_margin.min(margin);
        if margin < 0.0 || !evi.converged {
            failures.push(format!("case {case}: ρ̃ = {} ρ* = {rho_star} converged {}", evi.gain, evi.converged));
        }
    }
    let took = start.elapsed();
    Outcome {
        pass: failures.is_empty() && took < Duration::from_secs(30),
        detail: format!(
            "{} of 50 optimistic; smallest ρ̃ + ε − ρ* = {worst_margin:.3e}; {:.2}s{}",
            50 - failures.len(),
            took.as_secs_f64(),
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    }
}

/// Per-epoch coverage of the reward and transition intervals of flat UCRL
/// on the observation MDP: `(covered, total)` over visited pairs.
fn epoch_coverage(model: &RomdpModel, trace: &RunTrace) -> (usize, usize) {
    let truth = FiniteMdp::observed(model).expect("observation MDP");
    let (y, a) = (model.num_obs(), model.num_actions());
    let mut counts = vec![0u64; y * a];
    let mut rewards = vec![0.0; y * a];
    let mut transitions = vec![0u64; y * a * y];
    let mut next_step = 0usize;
    let (mut covered, mut total) = (0, 0);
    for epoch in &trace.epochs {
        while (next_step as u64) < epoch.start_t {
            let s = &trace.steps[next_step];
            let p = s.obs * a + s.action;
            counts[p] += 1;
            rewards[p] += s.reward;
            transitions[p * y + trace.steps[next_step + 1].obs] += 1;
            next_step += 1;
        }
        if epoch.start_t == 0 {
            continue;
        }
        for p in 0..y * a {
            let n = counts[p];
            if n == 0 {
                continue;
            }
            let (obs, action) = (p / a, p % a);
            let d_r = reward_radius(n, y, a, epoch.start_t, DELTA);
            let d_p = transition_radius(n, y, a, epoch.start_t, DELTA);
            let r_ok = (rewards[p] / n as f64 - truth.reward(obs, action)).abs() <= d_r;
            let l1: f64 = (0..y)
                .map(|k| (transitions[p * y + k] as f64 / n as f64 - truth.prob(obs, action, k)).abs())
                .sum();
            total += 1;
            if r_ok && l1 <= d_p {
                covered += 1;
            }
        }
    }
    (covered, total)
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let model = generate_random_romdp(&GeneratorConfig::new(3, 6, 2, 7)).expect("generator");
    let results: Vec<(usize, usize, usize)> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let mut config = AgentConfig::new(20_000, seed);
            config.delta = DELTA;
            let trace = run_ucrl_flat(&model, &config).expect("run");
            let (c, t) = epoch_coverage(&model, &trace);
            (c, t, trace.epochs.len())
        })
        .collect();
    let covered: usize = results.iter().map(|r| r.0).sum();
    let total: usize = results.iter().map(|r| r.1).sum();
    let epochs: usize = results.iter().map(|r| r.2).sum();
    let rate = covered as f64 / total.max(1) as f64;
    let took = start.elapsed();
    Outcome {
        pass: total > 0 && rate >= 1.0 - DELTA && took < Duration::from_secs(120),
        detail: format!(
            "coverage {rate:.4} over {total} visited (epoch, y, a) triples from {epochs} epochs of 100 seeded runs; {:.1}s",
            took.as_secs_f64()
        ),
    }
}

struct SweepRuns {
    /// `(Y, SL-UCRL traces, flat traces)`.
    cells: Vec<(usize, Vec<RunTrace>, Vec<RunTrace>)>,
    elapsed: Duration,
}

fn sweep_runs() -> SweepRuns {
    let start = Instant::now();
    let cells = [10usize, 20, 30]
        .into_iter()
        .map(|y| {
            let model = acceptance_model(y);
            let run = |alg: Algorithm| -> Vec<RunTrace> {
                (0..10u64)
                    .into_par_iter()
                    .map(|seed| {
                        let mut config = AgentConfig::new(100_000, seed);
                        config.delta = DELTA;
                        match alg {
                            Algorithm::SlUcrl => run_sl_ucrl(&model, &config),
                            Algorithm::UcrlFlat => run_ucrl_flat(&model, &config),
                        }
                        .expect("run")
                    })
                    .collect()
            };
            (y, run(Algorithm::SlUcrl), run(Algorithm::UcrlFlat))
        })
        .collect();
    SweepRuns {
        cells,
        elapsed: start.elapsed(),
    }
}

fn criterion_6(sweep: &SweepRuns) -> Outcome {
    let med = |traces: &[RunTrace]| median(&mut traces.iter().map(RunTrace::final_pseudo_regret).collect::<Vec<_>>());
    let rows: Vec<(usize, f64, f64)> = sweep.cells.iter().map(|(y, sl, flat)| (*y, med(sl), med(flat))).collect();
    let (first, last) = (rows[0], rows[rows.len() - 1]);
    let sl_ratio = last.1 / first.1;
    let flat_ratio = last.2 / first.2;
    let ratio_ok = sl_ratio < flat_ratio;
    let per_y_ok = rows.iter().all(|&(_, sl, flat)| sl <= flat);
    let table: Vec<String> = rows.iter().map(|(y, sl, flat)| format!("Y={y}: SL {sl:.0} flat {flat:.0}")).collect();
    Outcome {
        pass: ratio_ok && per_y_ok && sweep.elapsed < Duration::from_secs(1800),
        detail: format!(
            "median final regret {}; ratio Y30/Y10 SL {sl_ratio:.4} vs flat {flat_ratio:.4} (strictly smaller: {ratio_ok}); SL ≤ flat for every Y: {per_y_ok}; {:.1}s",
            table.join(", "),
            sweep.elapsed.as_secs_f64()
        ),
    }
}

fn criterion_7(safety: &SafetyRuns, sweep: &SweepRuns) -> Outcome {
    let all: Vec<&RunTrace> = safety
        .traces
        .iter()
        .chain(sweep.cells.iter().flat_map(|(_, sl, flat)| sl.iter().chain(flat.iter())))
        .collect();
    let non_monotone = all.iter().filter(|t| !t.s_counts_non_increasing()).count();
    let step_counts_grow = all
        .iter()
        .filter(|t| t.steps.windows(2).any(|w| w[1].s_count > w[0].s_count))
        .count();
    let over_bound = all.iter().filter(|t| t.epochs.len() as f64 > t.epoch_bound()).count();
    let tightest = all
        .iter()
        .map(|t| t.epochs.len() as f64 / t.epoch_bound())
        .fold(0.0, f64::max);
    Outcome {
        pass: non_monotone == 0 && step_counts_grow == 0 && over_bound == 0,
        detail: format!(
            "{} traces; {non_monotone} with increasing S_k; {over_bound} above S·A·log₂N + S·A (largest epochs/bound {tightest:.3})",
            all.len()
        ),
    }
}

fn criterion_8() -> Outcome {
    let model = acceptance_model(10);
    let diameters = Diameters::of(&model).expect("diameters");
    let dirs = [tempfile::tempdir().expect("tempdir"), tempfile::tempdir().expect("tempdir")];
    let mut mismatches = Vec::new();
    let mut compared = 0;
    for alg in [Algorithm::SlUcrl, Algorithm::UcrlFlat] {
        for seed in [0u64, 7, 19] {
            let mut config = AgentConfig::new(100_000, seed);
            config.delta = DELTA;
            for d in &dirs {
                run_cell(&model, &config, alg, diameters, d.path()).expect("run");
            }
            let file = format!("{}.csv", cell_stem(alg, seed));
            let a = std::fs::read(dirs[0].path().join(&file)).expect("trace");
            let b = std::fs::read(dirs[1].path().join(&file)).expect("trace");
            compared += 1;
            if a != b {
                mismatches.push(file);
            }
        }
    }
    Outcome {
        pass: mismatches.is_empty(),
        detail: format!("{compared} trace pairs compared; {} differ {mismatches:?}", mismatches.len()),
    }
}

fn main() {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let wanted = |name: &str| filter.as_deref().is_none_or(|f| name.contains(f));
    if std::env::args().any(|a| a == "--list") {
        for i in 1..=8 {
            println!("criterion_{i}: test");
        }
        return;
    }

    let needs_safety = wanted("criterion_2") || wanted("criterion_3") || wanted("criterion_7");
    let needs_sweep = wanted("criterion_6") || wanted("criterion_7");
    let safety = needs_safety.then(safety_runs);
    let sweep = needs_sweep.then(sweep_runs);

    let mut results: Vec<(&str, &str, Outcome)> = Vec::new();
    if wanted("criterion_1") {
        results.push(("criterion_1", "oracle spectral recovery", criterion_1()));
    }
    if let Some(s) = &safety {
        if wanted("criterion_2") {
            results.push(("criterion_2", "clustering safety", criterion_2(s)));
        }
        if wanted("criterion_3") {
            results.push(("criterion_3", "auxiliary-state cap and median", criterion_3(s)));
        }
    }
    if wanted("criterion_4") {
        results.push(("criterion_4", "EVI optimism", criterion_4()));
    }
    if wanted("criterion_5") {
        results.push(("criterion_5", "confidence coverage", criterion_5()));
    }
    if let Some(w) = &sweep {
        if wanted("criterion_6") {
            results.push(("criterion_6", "regret scaling in Y", criterion_6(w)));
        }
        if let (Some(s), true) = (&safety, wanted("criterion_7")) {
            results.push(("criterion_7", "monotonicity and epoch bound", criterion_7(s, w)));
        }
    }
    if wanted("criterion_8") {
        results.push(("criterion_8", "determinism", criterion_8()));
    }

    let mut failed = 0;
    for (id, name, outcome) in &results {
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        if !outcome.pass {
            failed += 1;
        }
        println!("{tag} {id} {name}: {}", outcome.detail);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
