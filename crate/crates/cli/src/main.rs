//! `romdp`: generate rich-observation MDPs, run SL-UCRL and flat UCRL over
//! seed sweeps, and aggregate regret curves.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use log::info;
use romdp_core::diagnostics::impure_clusters;
use romdp_core::harness::{self, Diameters, ModelSummary};
use romdp_core::{generate_random_romdp, Algorithm, Clustering, ExperimentSpec, GeneratorConfig, ModelSource, RomdpModel, Threshold};

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "romdp", version, about = "Spectral clustering and UCRL for rich-observation MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random ROMDP and write it as JSON.
    Generate(GenerateArgs),
    /// Run agents over a seed sweep; writes one CSV trace and one metadata JSON per run.
    Run(RunArgs),
    /// Aggregate the runs in a directory into a CSV and an SVG plot.
    Compare(CompareArgs),
    /// Check a model file and, optionally, a directory of runs.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of hidden states.
    #[arg(long)]
    x: usize,
    /// Number of observations.
    #[arg(long)]
    y: usize,
    /// Number of actions.
    #[arg(long)]
    a: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    dirichlet_alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    obs_dirichlet_alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    reward_low: f64,
    #[arg(long, default_value_t = 1.0)]
    reward_high: f64,
}

#[derive(Args)]
struct RunArgs {
    /// Model JSON written by `generate`.
    #[arg(long)]
    model: PathBuf,
    /// Comma-separated subset of sl-ucrl, ucrl-flat.
    #[arg(long, value_delimiter = ',', default_value = "sl-ucrl,ucrl-flat")]
    algo: Vec<Algorithm>,
    /// Horizon N.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    horizon: u64,
    /// Seeds as a list (`0,3,7`) or a half-open range (`0..10`).
    #[arg(long, default_value = "0")]
    seeds: SeedList,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Constant in the support threshold of the spectral step.
    #[arg(long, default_value_t = 1.0)]
    c_bound: f64,
    /// Use bootstrap standard errors with this many replicates.
    #[arg(long)]
    bootstrap: Option<usize>,
    /// Scale `g` of the rank threshold.
    #[arg(long)]
    rank_scale: Option<f64>,
    /// Conditioning floor of the spectral step.
    #[arg(long)]
    conditioning_floor: Option<f64>,
    /// Known number of hidden states; caps the spectral rank.
    #[arg(long)]
    x_known: Option<usize>,
    /// Merge auxiliary states with overlapping confidence sets (needs --x-known).
    #[arg(long)]
    minimal_clustering: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Directory holding the runs.
    #[arg(long)]
    dir: PathBuf,
    /// Number of points on the √N grid.
    #[arg(long, default_value_t = 50)]
    points: usize,
    /// Aggregate CSV (default: <dir>/aggregate.csv).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// SVG plot (default: <dir>/regret.svg).
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long, default_value = "Cumulative pseudo-regret")]
    title: String,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Directory of runs to check against their metadata.
    #[arg(long)]
    runs: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct SeedList(Vec<u64>);

impl std::str::FromStr for SeedList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some((lo, hi)) = s.split_once("..") {
            let lo: u64 = lo.trim().parse().map_err(|e| format!("seed range start: {e}"))?;
            let hi: u64 = hi.trim().parse().map_err(|e| format!("seed range end: {e}"))?;
            if lo >= hi {
                return Err(format!("empty seed range {s}"));
            }
            return Ok(SeedList((lo..hi).collect()));
        }
        s.split(',')
            .map(|p| p.trim().parse::<u64>().map_err(|e| format!("seed {p:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(SeedList)
    }
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_USAGE, error: error.into() }
}

fn invalid(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_VALIDATION, error: error.into() }
}

fn runtime(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_RUNTIME, error: error.into() }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(a),
        Command::Compare(a) => compare(a),
        Command::Validate(a) => validate(a),
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("ROMDP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(anyhow!("ROMDP_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(runtime)
}

fn generate(a: GenerateArgs) -> Result<(), Failure> {
    let config = GeneratorConfig {
        dirichlet_alpha: a.dirichlet_alpha,
        obs_dirichlet_alpha: a.obs_dirichlet_alpha,
        reward_low: a.reward_low,
        reward_high: a.reward_high,
        ..GeneratorConfig::new(a.x, a.y, a.a, a.seed)
    };
    config.check().map_err(usage)?;
    let model = generate_random_romdp(&config).map_err(runtime)?;
    model.save(&a.out).with_context(|| format!("writing {}", a.out.display())).map_err(runtime)?;
    let d = Diameters::of(&model).map_err(runtime)?;
    let fmt = |v: Option<f64>| v.map_or("inf".to_string(), |v| format!("{v:.3}"));
    println!(
        "X={} Y={} A={} O_min={:.4} D_X={} D_Y={} -> {}",
        model.num_hidden(),
        model.num_obs(),
        model.num_actions(),
        model.o_min(),
        fmt(d.hidden),
        fmt(d.observed),
        a.out.display()
    );
    Ok(())
}

fn load_model(path: &Path) -> Result<RomdpModel, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(runtime)?;
    let model = RomdpModel::from_json(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(invalid)?;
    let violations = model.validate();
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(invalid(anyhow!("invalid model {}: {}", path.display(), list.join("; "))));
    }
    Ok(model)
}

fn run(a: RunArgs) -> Result<(), Failure> {
    load_model(&a.model)?;
    let mut spec = ExperimentSpec::new(ModelSource::File(a.model.clone()), a.algo, a.horizon, a.seeds.0, a.out.clone());
    spec.delta = a.delta;
    spec.x_known = a.x_known;
    spec.minimal_clustering = a.minimal_clustering;
    spec.spectral.threshold = match a.bootstrap {
        Some(replicates) => Threshold::Bootstrap { replicates, c_bound: a.c_bound },
        None => Threshold::Bound { c_bound: a.c_bound },
    };
    if let Some(g) = a.rank_scale {
        spec.spectral.rank_scale = g;
    }
    if let Some(f) = a.conditioning_floor {
        spec.spectral.conditioning_floor = f;
    }
    spec.spectral.max_rank = a.x_known;
    spec.check().map_err(usage)?;
    info!("running {} cells", spec.algorithms.len() * spec.seeds.len());
    let metas = harness::run_sweep(&spec).map_err(runtime)?;
    println!("algo,seed,final_pseudo_regret,final_s_count,epochs,max_impure,wall_secs");
    for m in &metas {
        println!(
            "{},{},{:.3},{},{},{},{:.3}",
            m.algorithm, m.config.seed, m.final_pseudo_regret, m.final_s_count, m.num_epochs, m.max_impure_clusters, m.wall_time_secs
        );
    }
    Ok(())
}

fn compare(a: CompareArgs) -> Result<(), Failure> {
    if a.points == 0 {
        return Err(usage(anyhow!("--points must be positive")));
    }
    let rows = harness::compare_dir(&a.dir, a.points).map_err(|e| match e {
        romdp_core::Error::Missing(_) => invalid(e),
        other => runtime(other),
    })?;
    let csv_path = a.csv.unwrap_or_else(|| a.dir.join("aggregate.csv"));
    let svg_path = a.svg.unwrap_or_else(|| a.dir.join("regret.svg"));
    let file = File::create(&csv_path)
        .with_context(|| format!("creating {}", csv_path.display()))
        .map_err(runtime)?;
    harness::write_aggregate_csv(&rows, BufWriter::new(file)).map_err(runtime)?;
    std::fs::write(&svg_path, harness::render_svg(&rows, &a.title))
        .with_context(|| format!("writing {}", svg_path.display()))
        .map_err(runtime)?;
    let mut algos: Vec<Algorithm> = rows.iter().map(|r| r.algo).collect();
    algos.dedup();
    for algo in algos {
        if let Some(last) = rows.iter().rfind(|r| r.algo == algo) {
            println!(
                "{algo}: median {:.3} [q25 {:.3}, q75 {:.3}] at sqrt(N) = {:.1}",
                last.median, last.q25, last.q75, last.sqrt_n
            );
        }
    }
    println!("wrote {} and {}", csv_path.display(), svg_path.display());
    Ok(())
}

fn validate(a: ValidateArgs) -> Result<(), Failure> {
    if a.model.is_none() && a.runs.is_none() {
        return Err(usage(anyhow!("nothing to validate: pass --model and/or --runs")));
    }
    let model = match &a.model {
        Some(p) => {
            let m = load_model(p)?;
            let s = ModelSummary::of(&m);
            println!("{}: valid (X={} Y={} A={} O_min={:.4})", p.display(), s.x, s.y, s.a, s.o_min);
            Some(m)
        }
        None => None,
    };
    if let Some(dir) = &a.runs {
        let runs = harness::load_runs(dir).map_err(invalid)?;
        let mut problems = Vec::new();
        for (meta, rows) in &runs {
            let name = &meta.trace_file;
            if rows.len() as u64 != meta.config.horizon {
                problems.push(format!("{name}: {} rows for horizon {}", rows.len(), meta.config.horizon));
            }
            let realized = harness::recompute_realized_regret(rows, meta.rho_star);
            if rows.iter().zip(&realized).any(|(r, v)| r.cum_realized_regret != *v) {
                problems.push(format!("{name}: realized regret column does not recompute"));
            }
            if rows.windows(2).any(|w| w[1].s_count > w[0].s_count) {
                problems.push(format!("{name}: auxiliary-state count increases"));
            }
            if meta.max_impure_clusters > 0 {
                problems.push(format!("{name}: {} impure clusters", meta.max_impure_clusters));
            }
            if let Some(m) = &model {
                if meta.model != ModelSummary::of(m) {
                    problems.push(format!("{name}: recorded model does not match {}", a.model.as_ref().unwrap().display()));
                } else {
                    let impure = impure_clusters(m, &Clustering::from_labels(&meta.epochs.last().map_or_else(
                        || (0..m.num_obs()).collect(),
                        |e| e.assignment.clone(),
                    )));
                    if impure > 0 {
                        problems.push(format!("{name}: final clustering has {impure} impure clusters"));
                    }
                }
            }
        }
        if !problems.is_empty() {
            for p in &problems {
                eprintln!("{p}");
            }
            return Err(invalid(anyhow!("{} problem(s) in {}", problems.len(), dir.display())));
        }
        println!("{}: {} runs consistent", dir.display(), runs.len());
    }
    Ok(())
}
