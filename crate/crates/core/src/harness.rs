//! Experiment plumbing: per-run CSV traces and metadata, seed sweeps, and
//! aggregation of regret curves on a `√N` grid.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{run_algorithm, AgentConfig, Algorithm, EpochRecord, RunTrace};
use crate::clustering::Clustering;
use crate::diagnostics::{diameter, impure_clusters, FiniteMdp};
use crate::error::{Error, Result};
use crate::model::{GeneratorConfig, RomdpModel};
use crate::spectral::SpectralConfig;

pub const TRACE_HEADER: [&str; 8] = [
    "t",
    "epoch",
    "obs",
    "action",
    "reward",
    "s_count",
    "cum_pseudo_regret",
    "cum_realized_regret",
];

pub const AGGREGATE_HEADER: [&str; 5] = ["algo", "sqrt_n", "median", "q25", "q75"];

/// One CSV row of a run trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: u64,
    pub epoch: usize,
    pub obs: usize,
    pub action: usize,
    pub reward: f64,
    pub s_count: usize,
    pub cum_pseudo_regret: f64,
    pub cum_realized_regret: f64,
}

pub fn trace_rows(trace: &RunTrace) -> Vec<TraceRow> {
    trace
        .steps
        .iter()
        .map(|s| TraceRow {
            t: s.t,
            epoch: s.epoch,
            obs: s.obs,
            action: s.action,
            reward: s.reward,
            s_count: s.s_count,
            cum_pseudo_regret: s.cum_pseudo_regret,
            cum_realized_regret: s.cum_realized_regret,
        })
        .collect()
}

pub fn write_trace_csv<W: Write>(trace: &RunTrace, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for row in trace_rows(trace) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != TRACE_HEADER {
        return Err(Error::Parse(format!("{}: unexpected header {header:?}", path.display())));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Recomputes `t·ρ* − Σ r_τ` from the rewards column, in the agent's
/// summation order.
pub fn recompute_realized_regret(rows: &[TraceRow], rho_star: f64) -> Vec<f64> {
    let mut sum = 0.0;
    rows.iter()
        .map(|r| {
            sum += r.reward;
            r.t as f64 * rho_star - sum
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diameters {
    /// Diameter of the hidden MDP, `None` if infinite.
    pub hidden: Option<f64>,
    /// Diameter of the observation MDP, `None` if infinite.
    pub observed: Option<f64>,
}

impl Diameters {
    pub fn of(model: &RomdpModel) -> Result<Self> {
        let hidden = diameter(&FiniteMdp::hidden(model)).ok();
        let observed = diameter(&FiniteMdp::observed(model)?).ok();
        Ok(Self { hidden, observed })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub x: usize,
    pub y: usize,
    pub a: usize,
    pub o_min: f64,
    pub generator: Option<GeneratorConfig>,
}

impl ModelSummary {
    pub fn of(model: &RomdpModel) -> Self {
        Self {
            x: model.num_hidden(),
            y: model.num_obs(),
            a: model.num_actions(),
            o_min: model.o_min(),
            generator: model.generator_config().cloned(),
        }
    }
}

/// Everything about a run that is not in the per-step trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub algorithm: Algorithm,
    pub config: AgentConfig,
    pub model: ModelSummary,
    pub rho_star: f64,
    pub diameters: Diameters,
    pub final_clustering: Vec<Vec<usize>>,
    pub final_s_count: usize,
    pub final_pseudo_regret: f64,
    /// Largest number of impure clusters over all epochs.
    pub max_impure_clusters: usize,
    pub num_epochs: usize,
    pub epochs: Vec<EpochRecord>,
    pub wall_time_secs: f64,
    /// Trace CSV, relative to the metadata file.
    pub trace_file: String,
}

impl RunMetadata {
    pub fn new(model: &RomdpModel, config: &AgentConfig, trace: &RunTrace, diameters: Diameters, wall_time_secs: f64, trace_file: String) -> Self {
        let max_impure_clusters = trace
            .epochs
            .iter()
            .map(|e| impure_clusters(model, &Clustering::from_labels(&e.assignment)))
            .max()
            .unwrap_or(0);
        Self {
            algorithm: trace.algorithm,
            config: config.clone(),
            model: ModelSummary::of(model),
            rho_star: trace.rho_star,
            diameters,
            final_clustering: trace.final_clustering().members(),
            final_s_count: trace.final_s_count(),
            final_pseudo_regret: trace.final_pseudo_regret(),
            max_impure_clusters,
            num_epochs: trace.epochs.len(),
            epochs: trace.epochs.clone(),
            wall_time_secs,
            trace_file,
        }
    }
}

pub fn cell_stem(algorithm: Algorithm, seed: u64) -> String {
    format!("{algorithm}-seed{seed}")
}

/// Runs one agent and writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn run_cell(model: &RomdpModel, config: &AgentConfig, algorithm: Algorithm, diameters: Diameters, dir: &Path) -> Result<RunMetadata> {
    let start = Instant::now();
    let trace = run_algorithm(model, config, algorithm)?;
    let wall = start.elapsed().as_secs_f64();
    let stem = cell_stem(algorithm, config.seed);
    let csv_name = format!("{stem}.csv");
    let file = File::create(dir.join(&csv_name))?;
    write_trace_csv(&trace, BufWriter::new(file))?;
    let meta = RunMetadata::new(model, config, &trace, diameters, wall, csv_name);
    std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&meta)?)?;
    Ok(meta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSource {
    File(PathBuf),
    Generated(GeneratorConfig),
}

impl ModelSource {
    pub fn load(&self) -> Result<RomdpModel> {
        match self {
            ModelSource::File(p) => RomdpModel::load(p),
            ModelSource::Generated(g) => crate::model::generate_random_romdp(g),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub model: ModelSource,
    pub algorithms: Vec<Algorithm>,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub delta: f64,
    pub output_dir: PathBuf,
    pub spectral: SpectralConfig,
    pub x_known: Option<usize>,
    pub minimal_clustering: bool,
    /// Number of points of the `√N` grid used by `compare`.
    pub grid_points: usize,
}

impl ExperimentSpec {
    pub fn new(model: ModelSource, algorithms: Vec<Algorithm>, horizon: u64, seeds: Vec<u64>, output_dir: PathBuf) -> Self {
        Self {
            model,
            algorithms,
            horizon,
            seeds,
            delta: 0.05,
            output_dir,
            spectral: SpectralConfig::default(),
            x_known: None,
            minimal_clustering: false,
            grid_points: 50,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::InvalidConfig("no algorithms selected".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("no seeds given".into()));
        }
        if self.grid_points == 0 {
            return Err(Error::InvalidConfig("grid needs at least one point".into()));
        }
        self.agent_config(0).check()
    }

    pub fn agent_config(&self, seed: u64) -> AgentConfig {
        AgentConfig {
            delta: self.delta,
            spectral: self.spectral,
            x_known: self.x_known,
            minimal_clustering: self.minimal_clustering,
            ..AgentConfig::new(self.horizon, seed)
        }
    }
}

/// Runs every `(algorithm, seed)` cell in parallel on the current rayon pool.
/// Results come back in `algorithms × seeds` order.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<RunMetadata>> {
    spec.check()?;
    let model = spec.model.load()?;
    std::fs::create_dir_all(&spec.output_dir)?;
    let diameters = Diameters::of(&model)?;
    let cells: Vec<(Algorithm, u64)> = spec
        .algorithms
        .iter()
        .flat_map(|&a| spec.seeds.iter().map(move |&s| (a, s)))
        .collect();
    cells
        .par_iter()
        .map(|&(algorithm, seed)| run_cell(&model, &spec.agent_config(seed), algorithm, diameters, &spec.output_dir))
        .collect()
}

/// Horizons `t ≤ horizon` whose square roots are evenly spaced over
/// `(0, √horizon]`, deduplicated.
pub fn sqrt_grid(horizon: u64, points: usize) -> Vec<u64> {
    if horizon == 0 || points == 0 {
        return Vec::new();
    }
    let top = (horizon as f64).sqrt();
    let mut grid: Vec<u64> = (1..=points)
        .map(|i| {
            let s = top * i as f64 / points as f64;
            ((s * s).round() as u64).clamp(1, horizon)
        })
        .collect();
    grid.dedup();
    grid
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub algo: Algorithm,
    pub sqrt_n: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

/// Median and quartiles of cumulative pseudo-regret across runs at each grid
/// horizon. Each series is indexed by `t - 1`.
pub fn aggregate(series: &[(Algorithm, Vec<f64>)], points: usize) -> Result<Vec<AggregateRow>> {
    if series.is_empty() {
        return Err(Error::Missing("no traces to aggregate".into()));
    }
    let shortest = series.iter().map(|(_, s)| s.len()).min().unwrap_or(0) as u64;
    if shortest == 0 {
        return Err(Error::Empty("trace"));
    }
    let grid = sqrt_grid(shortest, points);
    let mut algos: Vec<Algorithm> = series.iter().map(|(a, _)| *a).collect();
    algos.sort_by_key(|a| a.name());
    algos.dedup();
    let mut rows = Vec::with_capacity(algos.len() * grid.len());
    for algo in algos {
        for &t in &grid {
            let mut vals: Vec<f64> = series
                .iter()
                .filter(|(a, _)| *a == algo)
                .map(|(_, s)| s[t as usize - 1])
                .collect();
            vals.sort_by(f64::total_cmp);
            rows.push(AggregateRow {
                algo,
                sqrt_n: (t as f64).sqrt(),
                median: quantile(&vals, 0.5),
                q25: quantile(&vals, 0.25),
                q75: quantile(&vals, 0.75),
            });
        }
    }
    Ok(rows)
}

/// Loads every run in `dir` (metadata JSON plus its trace CSV).
pub fn load_runs(dir: &Path) -> Result<Vec<(RunMetadata, Vec<TraceRow>)>> {
    let mut metas: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    metas.sort();
    let mut runs = Vec::new();
    for path in metas {
        let Ok(meta) = serde_json::from_str::<RunMetadata>(&std::fs::read_to_string(&path)?) else {
            continue;
        };
        let trace = dir.join(&meta.trace_file);
        if !trace.exists() {
            return Err(Error::Missing(format!("trace {} listed in {}", trace.display(), path.display())));
        }
        let rows = read_trace_csv(&trace)?;
        runs.push((meta, rows));
    }
    if runs.is_empty() {
        return Err(Error::Missing(format!("no run metadata in {}", dir.display())));
    }
    Ok(runs)
}

/// Aggregates all runs in `dir`.
pub fn compare_dir(dir: &Path, points: usize) -> Result<Vec<AggregateRow>> {
    let series: Vec<(Algorithm, Vec<f64>)> = load_runs(dir)?
        .into_iter()
        .map(|(m, rows)| (m.algorithm, rows.iter().map(|r| r.cum_pseudo_regret).collect()))
        .collect();
    aggregate(&series, points)
}

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(AGGREGATE_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Line plot of median regret against `√N`, with the interquartile range
/// shaded.
pub fn render_svg(rows: &[AggregateRow], title: &str) -> String {
    let (w, h) = (720.0, 480.0);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let x_max = rows.iter().map(|r| r.sqrt_n).fold(1.0, f64::max);
    let y_max = rows.iter().map(|r| r.q75.max(r.median)).fold(0.0, f64::max).max(1e-9);
    let y_min = rows.iter().map(|r| r.q25.min(r.median)).fold(0.0, f64::min);
    let sx = |x: f64| left + pw * x / x_max;
    let sy = |y: f64| top + ph * (1.0 - (y - y_min) / (y_max - y_min));

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    s.push_str(&format!("<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"));
    s.push_str(&format!("<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n", w / 2.0, escape(title)));
    s.push_str(&format!(
        "<line x1=\"{left}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{0}\" stroke=\"black\"/>\n",
        top + ph,
        left + pw
    ));
    for i in 0..=5 {
        let xv = x_max * i as f64 / 5.0;
        let yv = y_min + (y_max - y_min) * i as f64 / 5.0;
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{:.0}</text>\n",
            sx(xv),
            top + ph + 18.0,
            xv
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            left - 6.0,
            sy(yv) + 4.0,
            tick_label(yv)
        ));
    }
    s.push_str(&format!("<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">√N</text>\n", left + pw / 2.0, h - 10.0));
    s.push_str(&format!(
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">cumulative pseudo-regret</text>\n",
        top + ph / 2.0,
        top + ph / 2.0
    ));

    let mut algos: Vec<Algorithm> = rows.iter().map(|r| r.algo).collect();
    algos.dedup();
    for (i, algo) in algos.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<&AggregateRow> = rows.iter().filter(|r| r.algo == *algo).collect();
        let band: Vec<String> = pts
            .iter()
            .map(|r| format!("{:.2},{:.2}", sx(r.sqrt_n), sy(r.q75)))
            .chain(pts.iter().rev().map(|r| format!("{:.2},{:.2}", sx(r.sqrt_n), sy(r.q25))))
            .collect();
        s.push_str(&format!("<polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.2\" stroke=\"none\"/>\n", band.join(" ")));
        let line: Vec<String> = pts.iter().map(|r| format!("{:.2},{:.2}", sx(r.sqrt_n), sy(r.median))).collect();
        s.push_str(&format!("<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n", line.join(" ")));
        let ly = top + 16.0 + 18.0 * i as f64;
        s.push_str(&format!(
            "<line x1=\"{0:.1}\" y1=\"{ly:.1}\" x2=\"{1:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n<text x=\"{2:.1}\" y=\"{3:.1}\">{algo}</text>\n",
            left + 12.0,
            left + 36.0,
            left + 42.0,
            ly + 4.0
        ));
    }
    s.push_str("</svg>\n");
    s
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 1000.0 {
        format!("{:.1}k", v / 1000.0)
    } else {
        format!("{v:.0}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_random_romdp;

    fn small_model() -> RomdpModel {
        generate_random_romdp(&GeneratorConfig::new(2, 4, 2, 7)).unwrap()
    }

    #[test]
    fn csv_has_header_and_one_row_per_step() {
        let m = small_model();
        let trace = run_algorithm(&m, &AgentConfig::new(100, 1), Algorithm::SlUcrl).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 101);
        assert_eq!(lines[0], "t,epoch,obs,action,reward,s_count,cum_pseudo_regret,cum_realized_regret");
    }

    #[test]
    fn trace_round_trips_and_realized_regret_recomputes_exactly() {
        let m = small_model();
        let trace = run_algorithm(&m, &AgentConfig::new(2000, 3), Algorithm::UcrlFlat).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_trace_csv(&trace, File::create(&path).unwrap()).unwrap();
        let rows = read_trace_csv(&path).unwrap();
        assert_eq!(rows, trace_rows(&trace));
        let realized = recompute_realized_regret(&rows, trace.rho_star);
        for (r, v) in rows.iter().zip(realized) {
            assert_eq!(r.cum_realized_regret, v);
        }
    }

    #[test]
    fn grid_is_increasing_and_ends_at_horizon() {
        let g = sqrt_grid(10_000, 20);
        assert_eq!(g.len(), 20);
        assert_eq!(*g.last().unwrap(), 10_000);
        assert_eq!(g[0], 25);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(sqrt_grid(3, 10), vec![1, 2, 3]);
        assert!(sqrt_grid(0, 5).is_empty());
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.25), 2.0);
        assert_eq!(quantile(&[1.0, 2.0], 0.5), 1.5);
        assert_eq!(quantile(&[7.0], 0.75), 7.0);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn single_series_aggregate_is_the_series() {
        let s: Vec<f64> = (1..=100).map(|t| (t as f64).sqrt()).collect();
        let rows = aggregate(&[(Algorithm::SlUcrl, s.clone())], 10).unwrap();
        for r in &rows {
            let t = (r.sqrt_n * r.sqrt_n).round() as usize;
            assert_eq!(r.median, s[t - 1]);
            assert_eq!(r.q25, r.median);
            assert_eq!(r.q75, r.median);
        }
    }

    #[test]
    fn identical_series_have_zero_iqr() {
        let s: Vec<f64> = (0..50).map(|t| t as f64 * 0.3).collect();
        let rows = aggregate(&[(Algorithm::UcrlFlat, s.clone()), (Algorithm::UcrlFlat, s)], 7).unwrap();
        assert!(rows.iter().all(|r| r.q75 - r.q25 == 0.0));
    }

    #[test]
    fn aggregate_sorts_algorithms_and_rejects_empty() {
        let s = vec![1.0; 10];
        let rows = aggregate(&[(Algorithm::UcrlFlat, s.clone()), (Algorithm::SlUcrl, s)], 3).unwrap();
        assert_eq!(rows[0].algo, Algorithm::SlUcrl);
        assert_eq!(rows.last().unwrap().algo, Algorithm::UcrlFlat);
        assert!(matches!(aggregate(&[], 3), Err(Error::Missing(_))));
    }

    #[test]
    fn sweep_writes_one_file_pair_per_cell_and_compares() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec::new(
            ModelSource::Generated(GeneratorConfig::new(2, 4, 2, 11)),
            vec![Algorithm::SlUcrl, Algorithm::UcrlFlat],
            500,
            vec![0, 1, 2],
            dir.path().to_path_buf(),
        );
        let metas = run_sweep(&spec).unwrap();
        assert_eq!(metas.len(), 6);
        assert_eq!(metas[0].algorithm, Algorithm::SlUcrl);
        assert_eq!(metas[3].config.seed, 0);
        for a in [Algorithm::SlUcrl, Algorithm::UcrlFlat] {
            for s in 0..3 {
                assert!(dir.path().join(format!("{}.csv", cell_stem(a, s))).exists());
                assert!(dir.path().join(format!("{}.json", cell_stem(a, s))).exists());
            }
        }
        let rows = compare_dir(dir.path(), 10).unwrap();
        assert_eq!(rows.len(), 20);
        let mut buf = Vec::new();
        write_aggregate_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("algo,sqrt_n,median,q25,q75\nsl-ucrl,2.236"));
        let svg = render_svg(&rows, "regret");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
    }

    #[test]
    fn compare_reports_missing_traces() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(compare_dir(dir.path(), 5), Err(Error::Missing(_))));
        let m = small_model();
        let meta = run_cell(&m, &AgentConfig::new(50, 0), Algorithm::UcrlFlat, Diameters::of(&m).unwrap(), dir.path()).unwrap();
        std::fs::remove_file(dir.path().join(&meta.trace_file)).unwrap();
        assert!(matches!(compare_dir(dir.path(), 5), Err(Error::Missing(_))));
    }

    #[test]
    fn metadata_records_ground_truth_quantities() {
        let dir = tempfile::tempdir().unwrap();
        let m = small_model();
        let d = Diameters::of(&m).unwrap();
        let meta = run_cell(&m, &AgentConfig::new(300, 4), Algorithm::SlUcrl, d, dir.path()).unwrap();
        let back: RunMetadata = serde_json::from_str(&std::fs::read_to_string(dir.path().join("sl-ucrl-seed4.json")).unwrap()).unwrap();
        assert_eq!(back, meta);
        assert!(meta.diameters.hidden.unwrap() <= meta.diameters.observed.unwrap() + 1e-9);
        assert_eq!(meta.final_clustering.iter().map(Vec::len).sum::<usize>(), 4);
        assert_eq!(meta.max_impure_clusters, 0);
    }
}
