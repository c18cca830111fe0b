//! Experiments and metrics: centralized against distributed runs, the
//! initialization baselines, the mutation study, neighbor counts, a
//! synthetic RSSI model and SVG deployment maps.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{GeometryError, RegionOfInterest};
use crate::optimizer::{coverage, Chromosome, GaConfig, OptimizerError, RunResult};
use crate::protocol::{run_island, Timing};
use crate::seeding::{initial_population, random_population};
use crate::simnet::{LinkModel, SessionConfig, SessionResult, SimError, Simulator};
use crate::streams;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("nodes {0} and {1} share a position")]
    CoincidentNodes(usize, usize),
    #[error("node index {index} out of range for {len} nodes")]
    NodeIndex { index: usize, len: usize },
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("malformed metrics row: {0}")]
    MalformedRow(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Centralized,
    Distributed,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Centralized => "centralized",
            Mode::Distributed => "distributed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    RandomOnly,
    VdOnly,
    GaOnly,
    VdGa,
}

impl Baseline {
    pub const ALL: [Baseline; 4] = [Baseline::RandomOnly, Baseline::VdOnly, Baseline::GaOnly, Baseline::VdGa];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::RandomOnly => "random",
            Baseline::VdOnly => "vd",
            Baseline::GaOnly => "ga",
            Baseline::VdGa => "vd-ga",
        }
    }
}

impl FromStr for Baseline {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Baseline::ALL.into_iter().find(|b| b.name() == s).ok_or_else(|| format!("unknown baseline {s:?}"))
    }
}

/// Log-distance path loss: `P0 - 10 * eta * log10(d / d0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RssiModel {
    pub p0_dbm: f64,
    pub d0_m: f64,
    pub eta: f64,
}

impl Default for RssiModel {
    fn default() -> Self {
        RssiModel { p0_dbm: -40.0, d0_m: 1.0, eta: 2.2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub mode: Mode,
    pub baselines: Vec<Baseline>,
    pub repetitions: usize,
    pub ga: GaConfig,
    pub roi: RegionOfInterest,
    pub link: LinkModel,
    pub g_nodes: u8,
    pub result_threshold: f64,
    pub generation_cost_ms: u64,
    pub timing: Timing,
    pub comm_range: f64,
    pub rssi: RssiModel,
    pub rng_seed: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            mode: Mode::Distributed,
            baselines: Baseline::ALL.to_vec(),
            repetitions: 30,
            ga: GaConfig::default(),
            roi: RegionOfInterest::new(80.0, 80.0).expect("valid region"),
            link: LinkModel::default(),
            g_nodes: 6,
            result_threshold: 0.8,
            generation_cost_ms: 1,
            timing: Timing::default(),
            comm_range: 15.0,
            rssi: RssiModel::default(),
            rng_seed: 1,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.repetitions == 0 {
            return Err(HarnessError::InvalidSpec("repetitions must be >= 1".into()));
        }
        if !(self.comm_range.is_finite() && self.comm_range > 0.0) {
            return Err(HarnessError::InvalidSpec(format!("comm_range must be > 0, got {}", self.comm_range)));
        }
        if !(self.rssi.d0_m.is_finite() && self.rssi.d0_m > 0.0) {
            return Err(HarnessError::InvalidSpec(format!("rssi d0 must be > 0, got {}", self.rssi.d0_m)));
        }
        self.session(self.rng_seed).validate()?;
        Ok(())
    }

    /// Seed of repetition `rep`.
    pub fn rep_seed(&self, rep: usize) -> u64 {
        self.rng_seed.wrapping_add(rep as u64)
    }

    pub fn session(&self, seed: u64) -> SessionConfig {
        SessionConfig {
            g_nodes: self.g_nodes,
            ga: GaConfig { rng_seed: seed, ..self.ga.clone() },
            roi: self.roi,
            link: LinkModel { rng_seed: seed, ..self.link },
            result_threshold: self.result_threshold,
            generation_cost_ms: self.generation_cost_ms,
            timing: self.timing,
            horizon_ms: SessionConfig::new(1, self.ga.clone(), self.roi).horizon_ms,
        }
    }

    fn voronoi_population(&self, seed: u64) -> Result<Vec<Chromosome>, HarnessError> {
        let mut rng = streams::stream(seed, streams::SEEDING);
        Ok(initial_population(&self.ga, &self.roi, &mut rng)?)
    }

    fn random_population(&self, seed: u64) -> Vec<Chromosome> {
        let mut rng = streams::stream(seed, streams::SEEDING);
        random_population(&self.ga, &self.roi, &mut rng)
    }
}

/// One run of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub label: String,
    pub repetition: usize,
    pub seed: u64,
    pub coverage: f64,
    pub generations_to_target: Option<u64>,
    pub time_to_target_ms: Option<u64>,
    pub simulated_time_ms: u64,
    /// Frames put on the air; the energy proxy.
    pub frames_sent: u64,
    pub neighbor_counts: Vec<usize>,
    /// Synthetic RSSI of each node's strongest link, in dBm.
    pub rssi_synthetic: Vec<Option<f64>>,
}

pub const METRICS_HEADER: &str = "label,repetition,seed,coverage,generations_to_target,time_to_target_ms,\
simulated_time_ms,frames_sent,neighbor_counts,rssi_synthetic_dbm";

const NOT_REACHED: &str = "not reached";

fn opt_cell<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| NOT_REACHED.to_string(), |v| v.to_string())
}

fn split_list(s: &str) -> Vec<&str> {
    if s.is_empty() {
        Vec::new()
    } else {
        s.split(';').collect()
    }
}

impl MetricsRecord {
    pub fn csv_row(&self) -> String {
        let counts: Vec<String> = self.neighbor_counts.iter().map(|c| c.to_string()).collect();
        let rssi: Vec<String> =
            self.rssi_synthetic.iter().map(|r| r.map_or_else(|| "na".into(), |v| format!("{v:.2}"))).collect();
        format!(
            "{},{},{},{:.6},{},{},{},{},{},{}",
            self.label,
            self.repetition,
            self.seed,
            self.coverage,
            opt_cell(self.generations_to_target),
            opt_cell(self.time_to_target_ms),
            self.simulated_time_ms,
            self.frames_sent,
            counts.join(";"),
            rssi.join(";"),
        )
    }

    pub fn parse_row(row: &str) -> Result<Self, HarnessError> {
        let bad = || HarnessError::MalformedRow(row.to_string());
        let f: Vec<&str> = row.split(',').collect();
        if f.len() != 10 {
            return Err(bad());
        }
        let opt = |s: &str| -> Result<Option<u64>, HarnessError> {
            if s == NOT_REACHED {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad())
            }
        };
        Ok(MetricsRecord {
            label: f[0].to_string(),
            repetition: f[1].parse().map_err(|_| bad())?,
            seed: f[2].parse().map_err(|_| bad())?,
            coverage: f[3].parse().map_err(|_| bad())?,
            generations_to_target: opt(f[4])?,
            time_to_target_ms: opt(f[5])?,
            simulated_time_ms: f[6].parse().map_err(|_| bad())?,
            frames_sent: f[7].parse().map_err(|_| bad())?,
            neighbor_counts: split_list(f[8])
                .into_iter()
                .map(|c| c.parse().map_err(|_| bad()))
                .collect::<Result<_, _>>()?,
            rssi_synthetic: split_list(f[9])
                .into_iter()
                .map(|r| if r == "na" { Ok(None) } else { r.parse().map(Some).map_err(|_| bad()) })
                .collect::<Result<_, _>>()?,
        })
    }
}

pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Number of other nodes within `comm_range` of each node.
pub fn neighbor_counts(c: &Chromosome, comm_range: f64) -> Vec<usize> {
    let p = &c.positions;
    let r2 = comm_range * comm_range;
    let mut counts = vec![0; p.len()];
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i].dist2(p[j]) <= r2 {
                counts[i] += 1;
                counts[j] += 1;
            }
        }
    }
    counts
}

/// Synthetic received power at `rx` from `tx`. Not a measurement.
pub fn synthetic_rssi(c: &Chromosome, tx: usize, rx: usize, model: &RssiModel) -> Result<f64, HarnessError> {
    let len = c.len();
    for index in [tx, rx] {
        if index >= len {
            return Err(HarnessError::NodeIndex { index, len });
        }
    }
    let d = c.positions[tx].dist(c.positions[rx]);
    if tx == rx || d == 0.0 {
        return Err(HarnessError::CoincidentNodes(tx, rx));
    }
    Ok(model.p0_dbm - 10.0 * model.eta * (d / model.d0_m).log10())
}

/// RSSI of each node's nearest distinct neighbor, if it has one.
pub fn strongest_links(c: &Chromosome, model: &RssiModel) -> Vec<Option<f64>> {
    (0..c.len())
        .map(|i| (0..c.len()).filter_map(|j| synthetic_rssi(c, j, i, model).ok()).max_by(|a, b| a.total_cmp(b)))
        .collect()
}

/// Deployment map: the region, one sensing disk per node and the coverage.
pub fn render_deployment(c: &Chromosome, roi: &RegionOfInterest, radius: f64) -> String {
    let (w, h) = (roi.width(), roi.height());
    let pad = radius;
    let cov = if c.is_empty() { 0.0 } else { coverage(c, radius, roi) };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" width="{}" height="{}">"#,
        -pad,
        -pad,
        w + 2.0 * pad,
        h + 3.0 * pad,
        ((w + 2.0 * pad) * 8.0).round(),
        ((h + 3.0 * pad) * 8.0).round()
    );
    // Flip so that y grows upwards like the region's coordinates.
    let _ = writeln!(s, r#"<g transform="translate(0 {h}) scale(1 -1)">"#);
    let _ =
        writeln!(s, r##"<rect x="0" y="0" width="{w}" height="{h}" fill="none" stroke="#333" stroke-width="0.3"/>"##);
    for p in &c.positions {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="{radius}" fill="#3a7bd5" fill-opacity="0.25" stroke="#3a7bd5" stroke-width="0.2"/>"##,
            p.x, p.y
        );
        let _ = writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="0.6" fill="#c0392b"/>"##, p.x, p.y);
    }
    s.push_str("</g>\n");
    let _ = writeln!(
        s,
        r#"<text x="0" y="{:.2}" font-family="sans-serif" font-size="{:.2}">coverage {:.1}%</text>"#,
        h + 1.5 * pad,
        pad * 0.6,
        cov * 100.0
    );
    s.push_str("</svg>\n");
    s
}

/// What a finished run contributes to its metrics row.
struct RunOutcome<'a> {
    best: &'a Chromosome,
    coverage: f64,
    generations_to_target: Option<u64>,
    time_to_target_ms: Option<u64>,
    simulated_time_ms: u64,
    frames_sent: u64,
}

impl RunOutcome<'_> {
    /// A GA run charged `cost` ms per generation.
    fn of_run(run: &RunResult, cost: u64) -> RunOutcome<'_> {
        RunOutcome {
            best: &run.best,
            coverage: run.best_coverage,
            generations_to_target: run.reached_target_at,
            time_to_target_ms: run.reached_target_at.map(|g| g * cost),
            simulated_time_ms: run.generations() * cost,
            frames_sent: 0,
        }
    }

    fn record(self, spec: &ExperimentSpec, label: &str, rep: usize) -> MetricsRecord {
        MetricsRecord {
            label: label.to_string(),
            repetition: rep,
            seed: spec.rep_seed(rep),
            coverage: self.coverage,
            generations_to_target: self.generations_to_target,
            time_to_target_ms: self.time_to_target_ms,
            simulated_time_ms: self.simulated_time_ms,
            frames_sent: self.frames_sent,
            neighbor_counts: neighbor_counts(self.best, spec.comm_range),
            rssi_synthetic: strongest_links(self.best, &spec.rssi),
        }
    }
}

/// Centralized VD-GA over the whole Voronoi-seeded population.
pub fn run_centralized(spec: &ExperimentSpec, rep: usize) -> Result<(MetricsRecord, RunResult), HarnessError> {
    let seed = spec.rep_seed(rep);
    let pop = spec.voronoi_population(seed)?;
    let run = run_island(pop, &spec.ga, &spec.roi, streams::island_seed(seed, 1))?;
    let rec = RunOutcome::of_run(&run, spec.generation_cost_ms).record(spec, Mode::Centralized.name(), rep);
    Ok((rec, run))
}

/// The same population split over `g_nodes` islands and run through the
/// simulated protocol.
pub fn run_distributed(spec: &ExperimentSpec, rep: usize) -> Result<(MetricsRecord, SessionResult), HarnessError> {
    let seed = spec.rep_seed(rep);
    let pop = spec.voronoi_population(seed)?;
    let session = Simulator::with_population(spec.session(seed), &pop)?.run()?;
    let generations = session.islands.iter().filter_map(|i| i.reached_target_at).min();
    let rec = RunOutcome {
        best: &session.final_deployment,
        coverage: session.coverage,
        generations_to_target: generations,
        time_to_target_ms: session.first_target_ms,
        simulated_time_ms: session.finished_at_ms.unwrap_or(session.end_ms),
        frames_sent: session.frames_sent,
    }
    .record(spec, Mode::Distributed.name(), rep);
    Ok((rec, session))
}

fn repeat<T: Send>(
    spec: &ExperimentSpec,
    f: impl Fn(usize) -> Result<T, HarnessError> + Sync + Send,
) -> Result<Vec<T>, HarnessError> {
    spec.validate()?;
    // Collected in repetition order whatever the thread schedule.
    (0..spec.repetitions).into_par_iter().map(f).collect()
}

/// Median with missing values ranked above every present one; `None` when
/// the median itself is missing.
pub fn median_reached(values: &[Option<u64>]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by_key(|x| x.map_or((1, 0), |x| (0, x)));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2].map(|x| x as f64)
    } else {
        Some((v[n / 2 - 1]? + v[n / 2]?) as f64 / 2.0)
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub label: String,
    pub runs: usize,
    pub reached: usize,
    pub median_generations_to_target: Option<f64>,
    pub median_time_to_target_ms: Option<f64>,
    pub median_coverage: f64,
    pub mean_frames_sent: f64,
}

pub const SUMMARY_HEADER: &str =
    "label,runs,reached,median_generations_to_target,median_time_to_target_ms,median_coverage,mean_frames_sent";

impl Summary {
    pub fn of(label: &str, records: &[MetricsRecord]) -> Self {
        let rows: Vec<&MetricsRecord> = records.iter().filter(|r| r.label == label).collect();
        let gens: Vec<Option<u64>> = rows.iter().map(|r| r.generations_to_target).collect();
        let times: Vec<Option<u64>> = rows.iter().map(|r| r.time_to_target_ms).collect();
        let covs: Vec<f64> = rows.iter().map(|r| r.coverage).collect();
        Summary {
            label: label.to_string(),
            runs: rows.len(),
            reached: gens.iter().filter(|g| g.is_some()).count(),
            median_generations_to_target: median_reached(&gens),
            median_time_to_target_ms: median_reached(&times),
            median_coverage: median(&covs),
            mean_frames_sent: rows.iter().map(|r| r.frames_sent as f64).sum::<f64>() / rows.len().max(1) as f64,
        }
    }

    pub fn csv_row(&self) -> String {
        let m = |v: Option<f64>| v.map_or_else(|| NOT_REACHED.to_string(), |v| format!("{v:.1}"));
        format!(
            "{},{},{},{},{},{:.6},{:.1}",
            self.label,
            self.runs,
            self.reached,
            m(self.median_generations_to_target),
            m(self.median_time_to_target_ms),
            self.median_coverage,
            self.mean_frames_sent
        )
    }
}

pub fn summary_csv(summaries: &[Summary]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for s in summaries {
        out.push_str(&s.csv_row());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub records: Vec<MetricsRecord>,
    pub summaries: Vec<Summary>,
}

impl Report {
    fn new(records: Vec<MetricsRecord>, labels: &[&str]) -> Self {
        let summaries = labels.iter().map(|l| Summary::of(l, &records)).collect();
        Report { records, summaries }
    }

    pub fn records_csv(&self) -> String {
        metrics_csv(&self.records)
    }

    pub fn summary_csv(&self) -> String {
        summary_csv(&self.summaries)
    }

    pub fn summary(&self, label: &str) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.label == label)
    }
}

/// Paired runs: both modes start each repetition from the same population
/// and the centralized GA uses the seed of island 1.
pub fn compare_centralized_distributed(spec: &ExperimentSpec) -> Result<Report, HarnessError> {
    let pairs = repeat(spec, |rep| Ok((run_centralized(spec, rep)?.0, run_distributed(spec, rep)?.0)))?;
    let records = pairs.into_iter().flat_map(|(c, d)| [c, d]).collect();
    Ok(Report::new(records, &[Mode::Centralized.name(), Mode::Distributed.name()]))
}

/// Centralized runs of the initialization baselines at the spec's budget.
pub fn compare_baselines(spec: &ExperimentSpec) -> Result<Report, HarnessError> {
    let per_rep = repeat(spec, |rep| {
        let seed = spec.rep_seed(rep);
        let ga_seed = streams::island_seed(seed, 1);
        let mut out = Vec::new();
        for &b in &spec.baselines {
            let rec = match b {
                Baseline::RandomOnly | Baseline::VdOnly => {
                    let pop = if b == Baseline::VdOnly {
                        spec.voronoi_population(seed)?
                    } else {
                        spec.random_population(seed)
                    };
                    let covs: Vec<f64> = pop.iter().map(|c| coverage(c, spec.ga.radius, &spec.roi)).collect();
                    let best = (0..pop.len()).fold(0, |b, i| if covs[i] > covs[b] { i } else { b });
                    let reached = (covs[best] >= spec.ga.coverage_target).then_some(0);
                    RunOutcome {
                        best: &pop[best],
                        coverage: covs[best],
                        generations_to_target: reached,
                        time_to_target_ms: reached,
                        simulated_time_ms: 0,
                        frames_sent: 0,
                    }
                    .record(spec, b.name(), rep)
                }
                Baseline::GaOnly | Baseline::VdGa => {
                    let pop =
                        if b == Baseline::VdGa { spec.voronoi_population(seed)? } else { spec.random_population(seed) };
                    let run = run_island(pop, &spec.ga, &spec.roi, ga_seed)?;
                    RunOutcome::of_run(&run, spec.generation_cost_ms).record(spec, b.name(), rep)
                }
            };
            out.push(rec);
        }
        Ok(out)
    })?;
    let labels: Vec<&str> = spec.baselines.iter().map(|b| b.name()).collect();
    Ok(Report::new(per_rep.into_iter().flatten().collect(), &labels))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MutationReport {
    pub report: Report,
    /// Per-repetition best-coverage traces of the one- and two-point variants.
    pub traces: [Vec<Vec<f64>>; 2],
}

fn mean_trace(traces: &[Vec<f64>], len: usize) -> Vec<f64> {
    (0..len)
        .map(|g| {
            // A finished run holds its last value.
            let sum: f64 = traces.iter().map(|t| t.get(g).or(t.last()).copied().unwrap_or(0.0)).sum();
            sum / traces.len().max(1) as f64
        })
        .collect()
}

impl MutationReport {
    /// Mean best coverage per generation of each variant.
    pub fn mean_traces(&self) -> [Vec<f64>; 2] {
        let len = self.traces.iter().flatten().map(Vec::len).max().unwrap_or(0);
        [mean_trace(&self.traces[0], len), mean_trace(&self.traces[1], len)]
    }

    pub fn traces_csv(&self) -> String {
        let [one, two] = self.mean_traces();
        let mut out = String::from("generation,mean_best_one_point,mean_best_two_point\n");
        for (g, (a, b)) in one.iter().zip(&two).enumerate() {
            let _ = writeln!(out, "{g},{a:.6},{b:.6}");
        }
        out
    }
}

pub const MUTATION_LABELS: [&str; 2] = ["one-point", "two-point"];

/// One- against two-point mutation on identical populations and GA seeds.
pub fn compare_mutation_variants(spec: &ExperimentSpec) -> Result<MutationReport, HarnessError> {
    let runs = repeat(spec, |rep| {
        let seed = spec.rep_seed(rep);
        let pop = spec.voronoi_population(seed)?;
        let mut out = Vec::new();
        for (k, label) in MUTATION_LABELS.iter().enumerate() {
            let ga = GaConfig { mutation_points: k + 1, ..spec.ga.clone() };
            let run = run_island(pop.clone(), &ga, &spec.roi, streams::island_seed(seed, 1))?;
            let rec = RunOutcome::of_run(&run, spec.generation_cost_ms).record(spec, label, rep);
            out.push((rec, run.history.iter().map(|h| h.best_coverage).collect::<Vec<_>>()));
        }
        Ok(out)
    })?;
    let mut records = Vec::new();
    let mut traces = [Vec::new(), Vec::new()];
    for rep in runs {
        for (k, (rec, trace)) in rep.into_iter().enumerate() {
            records.push(rec);
            traces[k].push(trace);
        }
    }
    Ok(MutationReport { report: Report::new(records, &MUTATION_LABELS), traces })
}

/// Frames of a lossless session with threshold 1: each worker gets its SPF
/// segments, sends one RF and receives one FPF, and every frame is acked.
pub fn expected_lossless_frames(spec: &ExperimentSpec) -> Result<u64, HarnessError> {
    let per_frame = crate::protocol::chromosomes_per_frame(spec.ga.n_objects).map_err(SimError::from)?;
    let g = spec.g_nodes as usize;
    let total: usize = (0..g)
        .map(|i| {
            let size = spec.ga.pop_size / g + usize::from(i < spec.ga.pop_size % g);
            size.div_ceil(per_frame) + 2
        })
        .sum();
    Ok(2 * total as u64)
}
