//! Flat `key = value` experiment files with `[section]` headers.
//!
//! ```text
//! # default settings
//! [ga]
//! pop_size = 100
//! n_objects = 20
//!
//! [link]
//! loss = 0.1
//! ```
//!
//! Keys are addressed as `section.key`. Unknown keys are errors so that a
//! typo never silently falls back to a default.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::geometry::RegionOfInterest;
use crate::harness::{Baseline, ExperimentSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: cannot use {value:?}: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("{0}")]
    Invalid(String),
}

/// Every accepted key, in the order the effective config is written.
pub const KEYS: &[&str] = &[
    "ga.pop_size",
    "ga.n_objects",
    "ga.radius",
    "ga.crossover_rate",
    "ga.mutation_rate",
    "ga.mutation_points",
    "ga.coverage_target",
    "ga.max_generations",
    "roi.width",
    "roi.height",
    "roi.raster_step",
    "link.latency_ms",
    "link.loss",
    "experiment.repetitions",
    "experiment.g_nodes",
    "experiment.result_threshold",
    "experiment.generation_cost_ms",
    "experiment.baselines",
    "experiment.rng_seed",
    "metrics.comm_range",
    "metrics.rssi_p0_dbm",
    "metrics.rssi_d0_m",
    "metrics.rssi_eta",
    "protocol.ack_timeout_ms",
    "protocol.max_retries",
    "protocol.max_rounds",
    "protocol.reassembly_timeout_ms",
    "protocol.collect_timeout_ms",
    "output.dir",
    "render.positions",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: &str| ConfigError::Syntax { line: i + 1, message: message.to_string() };
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| syntax("unterminated section header"))?.trim();
                if name.is_empty() {
                    return Err(syntax("empty section name"));
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| syntax("expected `key = value`"))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(syntax("missing key"));
            }
            let key = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
            cfg.set(&key, v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn typed<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| ConfigError::InvalidValue {
                    key: key.to_string(),
                    value: v.to_string(),
                    reason: e.to_string(),
                })
            })
            .transpose()
    }

    fn apply<T: FromStr>(&self, key: &str, slot: &mut T) -> Result<(), ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = self.typed(key)? {
            *slot = v;
        }
        Ok(())
    }

    /// Experiment described by this file, on top of the defaults.
    pub fn spec(&self) -> Result<ExperimentSpec, ConfigError> {
        let mut s = ExperimentSpec::default();
        self.apply("ga.pop_size", &mut s.ga.pop_size)?;
        self.apply("ga.n_objects", &mut s.ga.n_objects)?;
        self.apply("ga.radius", &mut s.ga.radius)?;
        self.apply("ga.crossover_rate", &mut s.ga.crossover_rate)?;
        self.apply("ga.mutation_rate", &mut s.ga.mutation_rate)?;
        self.apply("ga.mutation_points", &mut s.ga.mutation_points)?;
        self.apply("ga.coverage_target", &mut s.ga.coverage_target)?;
        self.apply("ga.max_generations", &mut s.ga.max_generations)?;

        let mut w = s.roi.width();
        let mut h = s.roi.height();
        let mut step = s.roi.raster_step();
        self.apply("roi.width", &mut w)?;
        self.apply("roi.height", &mut h)?;
        self.apply("roi.raster_step", &mut step)?;
        s.roi =
            RegionOfInterest::with_raster_step(w, h, step).map_err(|e| ConfigError::Invalid(format!("[roi] {e}")))?;

        self.apply("link.latency_ms", &mut s.link.latency_ms)?;
        self.apply("link.loss", &mut s.link.loss_prob)?;
        self.apply("experiment.repetitions", &mut s.repetitions)?;
        self.apply("experiment.g_nodes", &mut s.g_nodes)?;
        self.apply("experiment.result_threshold", &mut s.result_threshold)?;
        self.apply("experiment.generation_cost_ms", &mut s.generation_cost_ms)?;
        self.apply("experiment.rng_seed", &mut s.rng_seed)?;
        if let Some(list) = self.get("experiment.baselines") {
            s.baselines = list
                .split(',')
                .map(str::trim)
                .filter(|b| !b.is_empty())
                .map(|b| {
                    b.parse::<Baseline>().map_err(|reason| ConfigError::InvalidValue {
                        key: "experiment.baselines".into(),
                        value: list.to_string(),
                        reason,
                    })
                })
                .collect::<Result<_, _>>()?;
        }
        self.apply("metrics.comm_range", &mut s.comm_range)?;
        self.apply("metrics.rssi_p0_dbm", &mut s.rssi.p0_dbm)?;
        self.apply("metrics.rssi_d0_m", &mut s.rssi.d0_m)?;
        self.apply("metrics.rssi_eta", &mut s.rssi.eta)?;
        self.apply("protocol.ack_timeout_ms", &mut s.timing.ack_timeout_ms)?;
        self.apply("protocol.max_retries", &mut s.timing.max_retries)?;
        self.apply("protocol.max_rounds", &mut s.timing.max_rounds)?;
        self.apply("protocol.reassembly_timeout_ms", &mut s.timing.reassembly_timeout_ms)?;
        self.apply("protocol.collect_timeout_ms", &mut s.timing.collect_timeout_ms)?;
        s.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(s)
    }
}

/// Canonical file for `spec`; parsing it back yields the same experiment.
pub fn render_spec(spec: &ExperimentSpec, extra: &[(&str, String)]) -> String {
    let baselines: Vec<&str> = spec.baselines.iter().map(|b| b.name()).collect();
    let values: Vec<(&str, String)> = vec![
        ("ga.pop_size", spec.ga.pop_size.to_string()),
        ("ga.n_objects", spec.ga.n_objects.to_string()),
        ("ga.radius", spec.ga.radius.to_string()),
        ("ga.crossover_rate", spec.ga.crossover_rate.to_string()),
        ("ga.mutation_rate", spec.ga.mutation_rate.to_string()),
        ("ga.mutation_points", spec.ga.mutation_points.to_string()),
        ("ga.coverage_target", spec.ga.coverage_target.to_string()),
        ("ga.max_generations", spec.ga.max_generations.to_string()),
        ("roi.width", spec.roi.width().to_string()),
        ("roi.height", spec.roi.height().to_string()),
        ("roi.raster_step", spec.roi.raster_step().to_string()),
        ("link.latency_ms", spec.link.latency_ms.to_string()),
        ("link.loss", spec.link.loss_prob.to_string()),
        ("experiment.repetitions", spec.repetitions.to_string()),
        ("experiment.g_nodes", spec.g_nodes.to_string()),
        ("experiment.result_threshold", spec.result_threshold.to_string()),
        ("experiment.generation_cost_ms", spec.generation_cost_ms.to_string()),
        ("experiment.baselines", baselines.join(", ")),
        ("experiment.rng_seed", spec.rng_seed.to_string()),
        ("metrics.comm_range", spec.comm_range.to_string()),
        ("metrics.rssi_p0_dbm", spec.rssi.p0_dbm.to_string()),
        ("metrics.rssi_d0_m", spec.rssi.d0_m.to_string()),
        ("metrics.rssi_eta", spec.rssi.eta.to_string()),
        ("protocol.ack_timeout_ms", spec.timing.ack_timeout_ms.to_string()),
        ("protocol.max_retries", spec.timing.max_retries.to_string()),
        ("protocol.max_rounds", spec.timing.max_rounds.to_string()),
        ("protocol.reassembly_timeout_ms", spec.timing.reassembly_timeout_ms.to_string()),
        ("protocol.collect_timeout_ms", spec.timing.collect_timeout_ms.to_string()),
    ];
    let mut out = String::new();
    let mut section = "";
    for (key, value) in values.iter().chain(extra) {
        let (sec, name) = key.split_once('.').expect("sectioned key");
        if sec != section {
            if !section.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(out, "[{sec}]");
            section = sec;
        }
        let _ = writeln!(out, "{name} = {value}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_comments() {
        let cfg = Config::parse("# top\n[ga]\npop_size = 40 # inline\n\n[link]\nloss=0.25\n").unwrap();
        let spec = cfg.spec().unwrap();
        assert_eq!(spec.ga.pop_size, 40);
        assert_eq!(spec.link.loss_prob, 0.25);
        assert_eq!(spec.ga.n_objects, 20);
    }

    #[test]
    fn errors_name_the_key() {
        let e = Config::parse("[ga]\npopsize = 3\n").unwrap_err();
        assert!(e.to_string().contains("ga.popsize"), "{e}");
        let e = Config::parse("[ga]\npop_size = many\n").unwrap().spec().unwrap_err();
        assert!(e.to_string().contains("ga.pop_size"), "{e}");
        let e = Config::parse("[ga\n").unwrap_err();
        assert!(e.to_string().contains("line 1"), "{e}");
        let e = Config::parse("[experiment]\nbaselines = vd, best\n").unwrap().spec().unwrap_err();
        assert!(e.to_string().contains("experiment.baselines"), "{e}");
        let e = Config::parse("[ga]\nmutation_rate = 2\n").unwrap().spec().unwrap_err();
        assert!(e.to_string().contains("mutation_rate"), "{e}");
    }

    #[test]
    fn rendered_spec_parses_back() {
        let mut spec =
            Config::parse("[ga]\nradius = 12.5\n[experiment]\nbaselines = vd, vd-ga\n").unwrap().spec().unwrap();
        spec.link.loss_prob = 0.1;
        let text = render_spec(&spec, &[("output.dir", "out".into())]);
        let back = Config::parse(&text).unwrap();
        assert_eq!(back.spec().unwrap(), spec);
        assert_eq!(back.get("output.dir"), Some("out"));
    }
}
