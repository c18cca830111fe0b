//! Genetic algorithm over deployment chromosomes.
//!
//! A chromosome is the ordered list of node positions. One generation is one
//! mating: two parents are picked by binary tournament, recombined at a
//! single cut point, and the offspring are mutated by repositioning nodes.
//! The offspring replace their parents only when the better child beats the
//! better parent.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{coverage_fraction, pair_overlap, Disk, Point, RegionOfInterest};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("population has {0} individuals, at least 2 are needed")]
    PopulationTooSmall(usize),
    #[error("chromosome lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("chromosome has {0} genes, crossover needs at least 2")]
    ChromosomeTooShort(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Parameters of one GA instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub pop_size: usize,
    pub n_objects: usize,
    pub radius: f64,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub mutation_points: usize,
    pub coverage_target: f64,
    pub max_generations: u64,
    pub rng_seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            pop_size: 100,
            n_objects: 20,
            radius: 10.0,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            mutation_points: 1,
            coverage_target: 0.94,
            max_generations: 1500,
            rng_seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let bad = |msg: String| Err(OptimizerError::InvalidConfig(msg));
        if self.pop_size == 0 {
            return bad("pop_size must be >= 1".into());
        }
        if self.n_objects == 0 {
            return bad("n_objects must be >= 1".into());
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return bad(format!("radius must be > 0, got {}", self.radius));
        }
        for (name, p) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if !(1..=2).contains(&self.mutation_points) || self.mutation_points > self.n_objects {
            return bad(format!("mutation_points must be 1 or 2 (and <= n_objects), got {}", self.mutation_points));
        }
        if !(self.coverage_target > 0.0 && self.coverage_target <= 1.0) {
            return bad(format!("coverage_target must be in (0, 1], got {}", self.coverage_target));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chromosome {
    pub positions: Vec<Point>,
}

impl Chromosome {
    pub fn new(positions: Vec<Point>) -> Self {
        Chromosome { positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn disks(&self, radius: f64) -> Vec<Disk> {
        self.positions.iter().map(|&p| Disk::new(p, radius)).collect()
    }

    pub fn within(&self, roi: &RegionOfInterest) -> bool {
        self.positions.iter().all(|&p| roi.contains(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub coverage: f64,
    /// Region area left uncovered, in square meters.
    pub uncovered_area: f64,
    /// Sum over node pairs of `max(0, 2r - distance)`, in meters.
    pub total_overlap: f64,
}

pub fn coverage(c: &Chromosome, radius: f64, roi: &RegionOfInterest) -> f64 {
    coverage_fraction(&c.disks(radius), roi)
}

/// Full fitness breakdown. Ranking uses coverage alone; the overlap sum is
/// diagnostic.
pub fn evaluate(c: &Chromosome, cfg: &GaConfig, roi: &RegionOfInterest) -> FitnessReport {
    let disks = c.disks(cfg.radius);
    let cov = coverage_fraction(&disks, roi);
    let mut total_overlap = 0.0;
    for i in 0..disks.len() {
        for j in i + 1..disks.len() {
            total_overlap += pair_overlap(&disks[i], &disks[j]).expect("uniform radius");
        }
    }
    FitnessReport { coverage: cov, uncovered_area: roi.area() * (1.0 - cov), total_overlap }
}

/// Individuals together with their cached coverage.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    individuals: Vec<Chromosome>,
    coverage: Vec<f64>,
    pub generation: u64,
}

impl Population {
    /// Evaluates every individual once.
    pub fn evaluate(individuals: Vec<Chromosome>, radius: f64, roi: &RegionOfInterest) -> Self {
        let coverage = individuals.iter().map(|c| self::coverage(c, radius, roi)).collect();
        Population { individuals, coverage, generation: 0 }
    }

    pub fn from_parts(individuals: Vec<Chromosome>, coverage: Vec<f64>) -> Self {
        assert_eq!(individuals.len(), coverage.len());
        Population { individuals, coverage, generation: 0 }
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    pub fn individuals(&self) -> &[Chromosome] {
        &self.individuals
    }

    pub fn coverages(&self) -> &[f64] {
        &self.coverage
    }

    pub fn into_individuals(self) -> Vec<Chromosome> {
        self.individuals
    }

    /// Index of the best individual; ties go to the lowest index.
    pub fn best_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &c) in self.coverage.iter().enumerate() {
            if best.is_none_or(|b| c > self.coverage[b]) {
                best = Some(i);
            }
        }
        best
    }

    pub fn best_coverage(&self) -> f64 {
        self.best_index().map_or(0.0, |i| self.coverage[i])
    }

    pub fn mean_coverage(&self) -> f64 {
        if self.coverage.is_empty() {
            return 0.0;
        }
        self.coverage.iter().sum::<f64>() / self.coverage.len() as f64
    }
}

fn tournament<R: Rng + ?Sized>(pop: &Population, candidates: &[usize], rng: &mut R) -> usize {
    let picks = sample(rng, candidates.len(), 2.min(candidates.len()));
    let mut winner = candidates[picks.index(0)];
    for k in picks.iter().skip(1) {
        let other = candidates[k];
        let (cw, co) = (pop.coverage[winner], pop.coverage[other]);
        if co > cw || (co == cw && other < winner) {
            winner = other;
        }
    }
    winner
}

/// Picks two distinct parent indices, each by a size-2 tournament on coverage.
pub fn select<R: Rng + ?Sized>(pop: &Population, rng: &mut R) -> Result<(usize, usize), OptimizerError> {
    if pop.len() < 2 {
        return Err(OptimizerError::PopulationTooSmall(pop.len()));
    }
    let all: Vec<usize> = (0..pop.len()).collect();
    let first = tournament(pop, &all, rng);
    let rest: Vec<usize> = all.into_iter().filter(|&i| i != first).collect();
    let second = tournament(pop, &rest, rng);
    Ok((first, second))
}

/// Single-point crossover with the cut fixed at `cut` (`1..n`).
pub fn crossover_at(p1: &Chromosome, p2: &Chromosome, cut: usize) -> Result<(Chromosome, Chromosome), OptimizerError> {
    if p1.len() != p2.len() {
        return Err(OptimizerError::LengthMismatch(p1.len(), p2.len()));
    }
    let n = p1.len();
    if n < 2 {
        return Err(OptimizerError::ChromosomeTooShort(n));
    }
    assert!((1..n).contains(&cut), "cut {cut} outside 1..{n}");
    let splice = |a: &Chromosome, b: &Chromosome| {
        Chromosome::new(a.positions[..cut].iter().chain(&b.positions[cut..]).copied().collect())
    };
    Ok((splice(p1, p2), splice(p2, p1)))
}

/// Single-point crossover with a uniformly drawn cut.
pub fn crossover<R: Rng + ?Sized>(
    p1: &Chromosome,
    p2: &Chromosome,
    rng: &mut R,
) -> Result<(Chromosome, Chromosome), OptimizerError> {
    if p1.len() != p2.len() {
        return Err(OptimizerError::LengthMismatch(p1.len(), p2.len()));
    }
    if p1.len() < 2 {
        return Err(OptimizerError::ChromosomeTooShort(p1.len()));
    }
    let cut = rng.gen_range(1..p1.len());
    crossover_at(p1, p2, cut)
}

/// Replaces the listed genes; everything else is copied through.
pub fn apply_mutation(c: &Chromosome, replacements: &[(usize, Point)]) -> Chromosome {
    let mut out = c.clone();
    for &(i, p) in replacements {
        out.positions[i] = p;
    }
    out
}

/// With probability `mutation_rate`, moves `mutation_points` distinct nodes to
/// fresh uniform positions in the region. Returns the chromosome and whether
/// the mutation fired.
pub fn mutate<R: Rng + ?Sized>(
    c: &Chromosome,
    cfg: &GaConfig,
    roi: &RegionOfInterest,
    rng: &mut R,
) -> (Chromosome, bool) {
    if c.is_empty() || !rng.gen_bool(cfg.mutation_rate) {
        return (c.clone(), false);
    }
    let k = cfg.mutation_points.min(c.len());
    let mut picks: Vec<usize> = sample(rng, c.len(), k).into_vec();
    picks.sort_unstable();
    let replacements: Vec<(usize, Point)> = picks.into_iter().map(|i| (i, roi.sample_position(rng))).collect();
    (apply_mutation(c, &replacements), true)
}

/// One generation, in place. Returns whether the offspring were accepted.
pub fn step<R: Rng + ?Sized>(
    pop: &mut Population,
    cfg: &GaConfig,
    roi: &RegionOfInterest,
    rng: &mut R,
) -> Result<bool, OptimizerError> {
    let (a, b) = select(pop, rng)?;
    let (p1, p2) = (&pop.individuals[a], &pop.individuals[b]);
    let (mut c1, mut c2, mut crossed) = (p1.clone(), p2.clone(), false);
    if p1.len() >= 2 && rng.gen_bool(cfg.crossover_rate) {
        (c1, c2) = crossover(p1, p2, rng)?;
        crossed = true;
    }
    let (c1, m1) = mutate(&c1, cfg, roi, rng);
    let (c2, m2) = mutate(&c2, cfg, roi, rng);
    pop.generation += 1;
    // Untouched clones keep their parent's score.
    let cov1 = if crossed || m1 { coverage(&c1, cfg.radius, roi) } else { pop.coverage[a] };
    let cov2 = if crossed || m2 { coverage(&c2, cfg.radius, roi) } else { pop.coverage[b] };
    if cov1.max(cov2) <= pop.coverage[a].max(pop.coverage[b]) {
        return Ok(false);
    }
    pop.individuals[a] = c1;
    pop.coverage[a] = cov1;
    pop.individuals[b] = c2;
    pop.coverage[b] = cov2;
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: u64,
    pub best_coverage: f64,
    pub mean_coverage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub best: Chromosome,
    pub best_coverage: f64,
    /// One record per generation, starting with the initial population.
    pub history: Vec<GenerationRecord>,
    /// First generation whose best coverage met the target.
    pub reached_target_at: Option<u64>,
    pub final_population: Population,
}

impl RunResult {
    pub fn generations(&self) -> u64 {
        self.history.last().map_or(0, |r| r.generation)
    }

    pub fn history_csv(&self) -> String {
        let mut out = String::from("generation,best_coverage,mean_coverage\n");
        for r in &self.history {
            out.push_str(&format!("{},{:.6},{:.6}\n", r.generation, r.best_coverage, r.mean_coverage));
        }
        out
    }
}

/// Runs generations until the best coverage reaches the target or the
/// generation budget is spent.
pub fn run<R: Rng + ?Sized>(
    initial: Population,
    cfg: &GaConfig,
    roi: &RegionOfInterest,
    rng: &mut R,
) -> Result<RunResult, OptimizerError> {
    cfg.validate()?;
    let mut pop = initial;
    if pop.is_empty() {
        return Err(OptimizerError::PopulationTooSmall(0));
    }
    let record = |p: &Population| GenerationRecord {
        generation: p.generation,
        best_coverage: p.best_coverage(),
        mean_coverage: p.mean_coverage(),
    };
    let mut history = vec![record(&pop)];
    let mut reached = (pop.best_coverage() >= cfg.coverage_target).then_some(pop.generation);
    while reached.is_none() && pop.generation < cfg.max_generations {
        step(&mut pop, cfg, roi, rng)?;
        history.push(record(&pop));
        if pop.best_coverage() >= cfg.coverage_target {
            reached = Some(pop.generation);
        }
    }
    // Elitist replacement means the current best is the best ever seen.
    let best_idx = pop.best_index().expect("non-empty population");
    Ok(RunResult {
        best: pop.individuals[best_idx].clone(),
        best_coverage: pop.coverage[best_idx],
        history,
        reached_target_at: reached,
        final_population: pop,
    })
}
