//! Command-line front end: loads a config, applies flag overrides, runs one
//! harness operation and writes its outputs to a directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::{render_spec, Config, ConfigError};
use crate::geometry::Point;
use crate::harness::{
    compare_baselines, compare_centralized_distributed, compare_mutation_variants, metrics_csv, render_deployment,
    run_centralized, run_distributed, ExperimentSpec, HarnessError,
};
use crate::optimizer::{coverage, Chromosome};
use crate::seeding::initial_population;
use crate::streams;

#[derive(Debug, Parser)]
#[command(name = "vdga", version, about = "Voronoi-seeded GA node deployment experiments")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the Voronoi-seeded initial population.
    Seed(Common),
    /// One GA run over the whole population.
    RunCentralized(Common),
    /// One simulated coordinator/worker session.
    RunDistributed(Common),
    /// Paired centralized and distributed runs plus the initialization baselines.
    Compare(Common),
    /// One- against two-point mutation.
    Mutations(Common),
    /// Draw a deployment from a positions file.
    Render(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment file (`key = value` with `[section]` headers).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [output.dir].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Repetitions [experiment.repetitions].
    #[arg(long)]
    reps: Option<usize>,
    /// [experiment.rng_seed]
    #[arg(long)]
    rng_seed: Option<u64>,
    /// [experiment.g_nodes]
    #[arg(long)]
    g_nodes: Option<u8>,
    /// Frame loss probability [link.loss].
    #[arg(long)]
    loss: Option<f64>,
    /// [link.latency_ms]
    #[arg(long)]
    latency_ms: Option<u64>,
    /// [ga.coverage_target]
    #[arg(long)]
    coverage_target: Option<f64>,
    /// [ga.max_generations]
    #[arg(long)]
    max_generations: Option<u64>,
    /// [ga.mutation_points]
    #[arg(long)]
    mutation_points: Option<usize>,
    /// [experiment.result_threshold]
    #[arg(long)]
    result_threshold: Option<f64>,
    /// CSV of `x,y` rows to render [render.positions].
    #[arg(long)]
    positions: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Input(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Runtime(#[from] HarnessError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 1,
            CliError::Io { .. } | CliError::Runtime(_) => 2,
        }
    }
}

impl Common {
    fn config(&self) -> Result<Config, CliError> {
        let mut cfg = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        let path = |p: &Path| p.display().to_string();
        let overrides: [(&str, Option<String>); 11] = [
            ("output.dir", self.out.as_deref().map(path)),
            ("experiment.repetitions", self.reps.map(|v| v.to_string())),
            ("experiment.rng_seed", self.rng_seed.map(|v| v.to_string())),
            ("experiment.g_nodes", self.g_nodes.map(|v| v.to_string())),
            ("link.loss", self.loss.map(|v| v.to_string())),
            ("link.latency_ms", self.latency_ms.map(|v| v.to_string())),
            ("ga.coverage_target", self.coverage_target.map(|v| v.to_string())),
            ("ga.max_generations", self.max_generations.map(|v| v.to_string())),
            ("ga.mutation_points", self.mutation_points.map(|v| v.to_string())),
            ("experiment.result_threshold", self.result_threshold.map(|v| v.to_string())),
            ("render.positions", self.positions.as_deref().map(path)),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        Ok(cfg)
    }
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn create(dir: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir).map_err(|source| CliError::Io { path: dir.clone(), source })?;
        Ok(Output { dir })
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Io { path: path.clone(), source })?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

pub fn positions_csv(c: &Chromosome) -> String {
    let mut out = String::from("x,y\n");
    for p in &c.positions {
        let _ = writeln!(out, "{:.2},{:.2}", p.x, p.y);
    }
    out
}

/// Reads `x,y` rows; a header line, blank lines and `#` comments are skipped.
pub fn parse_positions(text: &str) -> Result<Chromosome, String> {
    let mut positions = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.eq_ignore_ascii_case("x,y")) {
            continue;
        }
        let parsed =
            line.split_once(',').and_then(|(x, y)| Some(Point::new(x.trim().parse().ok()?, y.trim().parse().ok()?)));
        match parsed {
            Some(p) if p.x.is_finite() && p.y.is_finite() => positions.push(p),
            _ => return Err(format!("line {}: expected `x,y`, got {line:?}", i + 1)),
        }
    }
    Ok(Chromosome::new(positions))
}

fn summary_lines(report: &crate::harness::Report) {
    for s in &report.summaries {
        println!("{}", s.csv_row());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (Command::Seed(common)
    | Command::RunCentralized(common)
    | Command::RunDistributed(common)
    | Command::Compare(common)
    | Command::Mutations(common)
    | Command::Render(common)) = &cli.command;
    let cfg = common.config()?;
    let spec = cfg.spec()?;
    let mut extra = vec![];
    let dir = PathBuf::from(cfg.get("output.dir").unwrap_or("results"));
    extra.push(("output.dir", dir.display().to_string()));
    if let Some(p) = cfg.get("render.positions") {
        extra.push(("render.positions", p.to_string()));
    }

    // Input problems are reported before anything is written.
    let positions = match &cli.command {
        Command::Render(_) => {
            let path = cfg.get("render.positions").ok_or_else(|| CliError::Input("no positions file given".into()))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("cannot read positions {path}: {e}")))?;
            let c = parse_positions(&text).map_err(|e| CliError::Input(format!("{path}: {e}")))?;
            if c.is_empty() {
                return Err(CliError::Input(format!("{path}: no positions")));
            }
            Some(c)
        }
        _ => None,
    };

    let out = Output::create(dir)?;
    out.write("effective.cfg", &render_spec(&spec, &extra))?;
    match &cli.command {
        Command::Seed(_) => seed(&spec, &out),
        Command::RunCentralized(_) => {
            let (rec, run) = run_centralized(&spec, 0)?;
            out.write("history.csv", &run.history_csv())?;
            out.write("positions.csv", &positions_csv(&run.best))?;
            out.write("deployment.svg", &render_deployment(&run.best, &spec.roi, spec.ga.radius))?;
            out.write("metrics.csv", &metrics_csv(&[rec]))
        }
        Command::RunDistributed(_) => {
            let (rec, session) = run_distributed(&spec, 0)?;
            out.write("events.jsonl", &session.log_text())?;
            out.write("session.json", &session.summary_json())?;
            let mut islands = String::from("node,generation,best_coverage,mean_coverage\n");
            for i in &session.islands {
                for h in &i.history {
                    let _ =
                        writeln!(islands, "{},{},{:.6},{:.6}", i.node, h.generation, h.best_coverage, h.mean_coverage);
                }
            }
            out.write("islands.csv", &islands)?;
            out.write("positions.csv", &positions_csv(&session.final_deployment))?;
            out.write("deployment.svg", &render_deployment(&session.final_deployment, &spec.roi, spec.ga.radius))?;
            out.write("metrics.csv", &metrics_csv(&[rec]))
        }
        Command::Compare(_) => {
            let report = compare_centralized_distributed(&spec)?;
            out.write("metrics.csv", &report.records_csv())?;
            out.write("summary.csv", &report.summary_csv())?;
            summary_lines(&report);
            if !spec.baselines.is_empty() {
                let base = compare_baselines(&spec)?;
                out.write("baselines.csv", &base.records_csv())?;
                out.write("baselines_summary.csv", &base.summary_csv())?;
                summary_lines(&base);
            }
            Ok(())
        }
        Command::Mutations(_) => {
            let m = compare_mutation_variants(&spec)?;
            out.write("metrics.csv", &m.report.records_csv())?;
            out.write("summary.csv", &m.report.summary_csv())?;
            out.write("traces.csv", &m.traces_csv())?;
            summary_lines(&m.report);
            Ok(())
        }
        Command::Render(_) => {
            let c = positions.expect("read above");
            out.write("deployment.svg", &render_deployment(&c, &spec.roi, spec.ga.radius))
        }
    }
}

fn seed(spec: &ExperimentSpec, out: &Output) -> Result<(), CliError> {
    let mut rng = streams::stream(spec.rng_seed, streams::SEEDING);
    let pop = initial_population(&spec.ga, &spec.roi, &mut rng).map_err(HarnessError::from)?;
    let mut csv = String::from("individual,node,x,y,coverage\n");
    let mut best = (0, f64::MIN);
    for (i, c) in pop.iter().enumerate() {
        let cov = coverage(c, spec.ga.radius, &spec.roi);
        if cov > best.1 {
            best = (i, cov);
        }
        for (j, p) in c.positions.iter().enumerate() {
            let _ = writeln!(csv, "{i},{j},{:.2},{:.2},{cov:.6}", p.x, p.y);
        }
    }
    out.write("population.csv", &csv)?;
    out.write("positions.csv", &positions_csv(&pop[best.0]))?;
    out.write("deployment.svg", &render_deployment(&pop[best.0], &spec.roi, spec.ga.radius))
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
