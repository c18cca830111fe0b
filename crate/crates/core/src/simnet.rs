//! Discrete-event simulation of one coordinator and its workers exchanging
//! frames over a lossy, fixed-latency link.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{GeometryError, RegionOfInterest};
use crate::optimizer::{coverage, Chromosome, GaConfig, GenerationRecord, OptimizerError};
use crate::protocol::{
    decode_coverage, decode_frame, decode_result, encode_frame, Action, FrameKind, GNode, GNodeConfig, NodeEvent,
    NodeId, ProtocolError, TimerId, Timing, VNode, VNodeConfig, VPhase, VNODE_ID,
};
use crate::seeding::{initial_population, partition};
use crate::streams;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("event at t={at} ms is before the current time {now} ms")]
    EventInPast { at: u64, now: u64 },
    #[error("no final deployment was disseminated within {0} ms")]
    SessionTimeout(u64),
    #[error("invalid session: {0}")]
    InvalidSession(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkModel {
    pub latency_ms: u64,
    pub loss_prob: f64,
    pub rng_seed: u64,
}

impl Default for LinkModel {
    fn default() -> Self {
        LinkModel { latency_ms: 10, loss_prob: 0.0, rng_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub g_nodes: u8,
    pub ga: GaConfig,
    pub roi: RegionOfInterest,
    pub link: LinkModel,
    pub result_threshold: f64,
    /// Simulated compute time charged per GA generation.
    pub generation_cost_ms: u64,
    pub timing: Timing,
    /// Hard limit on simulated time.
    pub horizon_ms: u64,
}

impl SessionConfig {
    pub fn new(g_nodes: u8, ga: GaConfig, roi: RegionOfInterest) -> Self {
        SessionConfig {
            g_nodes,
            ga,
            roi,
            link: LinkModel::default(),
            result_threshold: 0.8,
            generation_cost_ms: 1,
            timing: Timing::default(),
            horizon_ms: 3_600_000,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidSession(m));
        self.ga.validate()?;
        if self.g_nodes == 0 {
            return bad("g_nodes must be >= 1".into());
        }
        if self.ga.pop_size < 2 * self.g_nodes as usize {
            return bad(format!(
                "pop_size {} leaves some of the {} islands with fewer than 2 individuals",
                self.ga.pop_size, self.g_nodes
            ));
        }
        if !(0.0..=1.0).contains(&self.link.loss_prob) {
            return bad(format!("loss_prob must be in [0, 1], got {}", self.link.loss_prob));
        }
        if !(self.result_threshold > 0.0 && self.result_threshold <= 1.0) {
            return bad(format!("result_threshold must be in (0, 1], got {}", self.result_threshold));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimEventKind {
    Deliver { from: NodeId, to: NodeId, bytes: Vec<u8> },
    Timer { node: NodeId, id: TimerId },
    Reset(NodeId),
    Restart(NodeId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent {
    pub time: u64,
    pub kind: SimEventKind,
}

impl SimEvent {
    pub fn reset(time: u64, node: NodeId) -> Self {
        SimEvent { time, kind: SimEventKind::Reset(node) }
    }

    pub fn restart(time: u64, node: NodeId) -> Self {
        SimEvent { time, kind: SimEventKind::Restart(node) }
    }
}

/// One line of the session transcript.
#[derive(Debug, Clone, Serialize)]
struct LogRecord<'a> {
    t: u64,
    event: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    from: Option<NodeId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    to: Option<NodeId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seq: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    total: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<String>,
}

impl<'a> LogRecord<'a> {
    fn new(t: u64, event: &'a str) -> Self {
        LogRecord { t, event, from: None, to: None, kind: None, seq: None, total: None, size: None, detail: None }
    }
}

/// An RF as it reached a running coordinator (first copies and duplicates).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultArrival {
    pub node: NodeId,
    pub at_ms: u64,
    /// Coverage of the carried chromosome, recomputed exactly.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IslandReport {
    pub node: NodeId,
    /// Sub-population the worker reassembled.
    #[serde(skip)]
    pub population: Vec<Chromosome>,
    pub population_size: usize,
    pub best_coverage: f64,
    pub generations: u64,
    pub reached_target_at: Option<u64>,
    pub compute_started_ms: u64,
    pub compute_done_ms: u64,
    pub busy_ms: u64,
    pub resets: u32,
    pub history: Vec<GenerationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionResult {
    pub final_deployment: Chromosome,
    /// Exact coverage of the final deployment.
    pub coverage: f64,
    /// Coverage as carried in the FPF.
    pub reported_coverage: f64,
    pub chosen_node: NodeId,
    pub decided_at_ms: u64,
    /// When the coordinator finished disseminating, if it did.
    pub finished_at_ms: Option<u64>,
    pub end_ms: u64,
    /// Wire coverages the coordinator held when it decided.
    pub considered: BTreeMap<NodeId, u16>,
    pub arrivals: Vec<ResultArrival>,
    /// First time the coordinator held a result meeting the coverage target.
    pub first_target_ms: Option<u64>,
    pub islands: Vec<IslandReport>,
    /// Workers holding the final deployment at the end.
    pub fpf_delivered: Vec<NodeId>,
    pub frames_sent: u64,
    pub frames_dropped: u64,
    pub bytes_sent: u64,
    pub max_frame_len: usize,
    pub violations: usize,
    #[serde(skip)]
    pub log: Vec<String>,
}

impl SessionResult {
    pub fn all_delivered(&self, g_nodes: u8) -> bool {
        self.fpf_delivered.len() == g_nodes as usize
    }

    pub fn log_text(&self) -> String {
        let mut s = self.log.join("\n");
        s.push('\n');
        s
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("session result serializes")
    }
}

pub struct Simulator {
    cfg: SessionConfig,
    now: u64,
    next_seq: u64,
    queue: BTreeMap<(u64, u64), SimEventKind>,
    vnode: VNode,
    gnodes: Vec<GNode>,
    loss_rng: ChaCha8Rng,
    log: Vec<String>,
    decided_at: Option<u64>,
    considered: BTreeMap<NodeId, u16>,
    finished_at: Option<u64>,
    arrivals: Vec<ResultArrival>,
    frames_sent: u64,
    frames_dropped: u64,
    bytes_sent: u64,
    max_frame_len: usize,
}

impl Simulator {
    /// Session over a given initial population, split round-robin.
    pub fn with_population(cfg: SessionConfig, population: &[Chromosome]) -> Result<Self, SimError> {
        cfg.validate()?;
        if population.len() != cfg.ga.pop_size {
            return Err(SimError::InvalidSession(format!(
                "population has {} individuals, pop_size is {}",
                population.len(),
                cfg.ga.pop_size
            )));
        }
        let subpops = partition(population, cfg.g_nodes as usize);
        let vcfg = VNodeConfig {
            g_nodes: cfg.g_nodes,
            n_objects: cfg.ga.n_objects,
            result_threshold: cfg.result_threshold,
            timing: cfg.timing,
        };
        let vnode = VNode::new(vcfg, &subpops)?;
        let gnodes = (1..=cfg.g_nodes)
            .map(|id| {
                GNode::new(GNodeConfig {
                    id,
                    ga: cfg.ga.clone(),
                    roi: cfg.roi,
                    generation_cost_ms: cfg.generation_cost_ms,
                    timing: cfg.timing,
                    rng_seed: streams::island_seed(cfg.ga.rng_seed, id),
                })
            })
            .collect();
        Ok(Simulator {
            loss_rng: streams::stream(cfg.link.rng_seed, streams::LINK),
            cfg,
            now: 0,
            next_seq: 0,
            queue: BTreeMap::new(),
            vnode,
            gnodes,
            log: Vec::new(),
            decided_at: None,
            considered: BTreeMap::new(),
            finished_at: None,
            arrivals: Vec::new(),
            frames_sent: 0,
            frames_dropped: 0,
            bytes_sent: 0,
            max_frame_len: 0,
        })
    }

    /// Session whose coordinator seeds a Voronoi population from the GA seed.
    pub fn new(cfg: SessionConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let mut rng = streams::stream(cfg.ga.rng_seed, streams::SEEDING);
        let population = initial_population(&cfg.ga, &cfg.roi, &mut rng)?;
        Self::with_population(cfg, &population)
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn vnode(&self) -> &VNode {
        &self.vnode
    }

    pub fn gnode(&self, id: NodeId) -> &GNode {
        &self.gnodes[id as usize - 1]
    }

    pub fn inject(&mut self, event: SimEvent) -> Result<(), SimError> {
        if event.time < self.now {
            return Err(SimError::EventInPast { at: event.time, now: self.now });
        }
        if let SimEventKind::Reset(n) | SimEventKind::Restart(n) = event.kind {
            if n > self.cfg.g_nodes {
                return Err(SimError::InvalidSession(format!("fault targets unknown node {n}")));
            }
        }
        self.schedule(event.time, event.kind);
        Ok(())
    }

    fn schedule(&mut self, time: u64, kind: SimEventKind) {
        self.queue.insert((time, self.next_seq), kind);
        self.next_seq += 1;
    }

    fn write(&mut self, rec: LogRecord) {
        self.log.push(serde_json::to_string(&rec).expect("log record serializes"));
    }

    fn node_step(&mut self, node: NodeId, event: NodeEvent) -> Vec<Action> {
        if node == VNODE_ID {
            self.vnode.step(self.now, event)
        } else {
            self.gnodes[node as usize - 1].step(self.now, event)
        }
    }

    fn apply(&mut self, node: NodeId, actions: Vec<Action>) -> Result<(), SimError> {
        for a in actions {
            match a {
                Action::Send { to, frame } => {
                    let bytes = encode_frame(&frame)?;
                    let lost = self.loss_rng.gen_bool(self.cfg.link.loss_prob);
                    self.frames_sent += 1;
                    self.bytes_sent += bytes.len() as u64;
                    self.max_frame_len = self.max_frame_len.max(bytes.len());
                    let mut rec = LogRecord::new(self.now, if lost { "drop" } else { "send" });
                    rec.from = Some(node);
                    rec.to = Some(to);
                    rec.kind = Some(frame.kind.name());
                    rec.seq = Some(frame.seq);
                    rec.total = Some(frame.total);
                    rec.size = Some(bytes.len());
                    if let Some(info) = frame.ack {
                        rec.detail =
                            Some(format!("{}{}", if info.negative { "nack " } else { "ack " }, info.acked.name()));
                    }
                    self.write(rec);
                    if lost {
                        self.frames_dropped += 1;
                    } else {
                        let at = self.now + self.cfg.link.latency_ms;
                        self.schedule(at, SimEventKind::Deliver { from: node, to, bytes });
                    }
                }
                Action::SetTimer { id, delay_ms } => {
                    let at = self.now + delay_ms;
                    self.schedule(at, SimEventKind::Timer { node, id });
                }
                Action::Violation { from, kind, reason } => {
                    let mut rec = LogRecord::new(self.now, "violation");
                    rec.from = Some(from);
                    rec.to = Some(node);
                    rec.kind = Some(kind.name());
                    rec.detail = Some(reason);
                    self.write(rec);
                }
            }
        }
        Ok(())
    }

    fn dispatch(&mut self, kind: SimEventKind) -> Result<(), SimError> {
        match kind {
            SimEventKind::Deliver { from, to, bytes } => {
                let frame = decode_frame(&bytes)?;
                let mut rec = LogRecord::new(self.now, "deliver");
                rec.from = Some(from);
                rec.to = Some(to);
                rec.kind = Some(frame.kind.name());
                rec.seq = Some(frame.seq);
                rec.total = Some(frame.total);
                rec.size = Some(bytes.len());
                self.write(rec);
                if to == VNODE_ID && frame.kind == FrameKind::Rf && !self.vnode.is_down() {
                    if let Ok((c, _)) = decode_result(&frame.payload, self.cfg.ga.n_objects) {
                        let cov = coverage(&c, self.cfg.ga.radius, &self.cfg.roi);
                        self.arrivals.push(ResultArrival { node: from, at_ms: self.now, coverage: cov });
                    }
                }
                let out = self.node_step(to, NodeEvent::Frame { from, frame });
                self.apply(to, out)
            }
            SimEventKind::Timer { node, id } => {
                let out = self.node_step(node, NodeEvent::Timer(id));
                self.apply(node, out)
            }
            SimEventKind::Reset(node) | SimEventKind::Restart(node) => {
                let reset = matches!(kind, SimEventKind::Reset(_));
                let mut rec = LogRecord::new(self.now, if reset { "reset" } else { "restart" });
                rec.to = Some(node);
                self.write(rec);
                let out = self.node_step(node, if reset { NodeEvent::Reset } else { NodeEvent::Restart });
                self.apply(node, out)
            }
        }
    }

    fn observe(&mut self) {
        if self.decided_at.is_none() {
            if let Some(d) = self.vnode.decision() {
                self.decided_at = Some(self.now);
                self.considered = self.vnode.results().iter().map(|(id, r)| (*id, r.coverage)).collect();
                let mut rec = LogRecord::new(self.now, "decide");
                rec.from = Some(d.node);
                rec.detail = Some(format!("coverage {:.2}%", decode_coverage(d.coverage) * 100.0));
                self.write(rec);
            }
        }
        let done = self.vnode.phase() == VPhase::Done;
        match (done, self.finished_at) {
            (true, None) => {
                self.finished_at = Some(self.now);
                self.write(LogRecord::new(self.now, "done"));
            }
            (false, Some(_)) => self.finished_at = None,
            _ => {}
        }
    }

    /// Runs until no events remain or the horizon is reached.
    pub fn run(mut self) -> Result<SessionResult, SimError> {
        let start = self.node_step(VNODE_ID, NodeEvent::Start);
        self.apply(VNODE_ID, start)?;
        self.observe();
        while let Some(entry) = self.queue.first_entry() {
            let (time, _) = *entry.key();
            if time > self.cfg.horizon_ms {
                break;
            }
            let kind = entry.remove();
            self.now = time;
            self.dispatch(kind)?;
            self.observe();
        }
        self.finish()
    }

    fn finish(self) -> Result<SessionResult, SimError> {
        let decision = match (self.vnode.decision(), self.decided_at) {
            (Some(d), Some(at)) => (d.clone(), at),
            _ => return Err(SimError::SessionTimeout(self.cfg.horizon_ms.min(self.now))),
        };
        let (d, decided_at) = decision;
        let target = self.cfg.ga.coverage_target;
        let first_target_ms = self.arrivals.iter().filter(|a| a.coverage >= target).map(|a| a.at_ms).min();
        let islands = self
            .gnodes
            .iter()
            .filter_map(|g| {
                g.outcome().map(|o| IslandReport {
                    node: g.id(),
                    population: o.population.clone(),
                    population_size: o.population.len(),
                    best_coverage: o.run.best_coverage,
                    generations: o.run.generations(),
                    reached_target_at: o.run.reached_target_at,
                    compute_started_ms: o.compute_started_ms,
                    compute_done_ms: o.compute_done_ms,
                    busy_ms: g.busy_ms(),
                    resets: g.resets(),
                    history: o.run.history.clone(),
                })
            })
            .collect();
        let fpf_delivered = self.gnodes.iter().filter(|g| g.final_deployment().is_some()).map(|g| g.id()).collect();
        let violations = self.vnode.violations() + self.gnodes.iter().map(|g| g.violations()).sum::<usize>();
        Ok(SessionResult {
            coverage: coverage(&d.chromosome, self.cfg.ga.radius, &self.cfg.roi),
            reported_coverage: decode_coverage(d.coverage),
            final_deployment: d.chromosome,
            chosen_node: d.node,
            decided_at_ms: decided_at,
            finished_at_ms: self.finished_at,
            end_ms: self.now,
            considered: self.considered,
            arrivals: self.arrivals,
            first_target_ms,
            islands,
            fpf_delivered,
            frames_sent: self.frames_sent,
            frames_dropped: self.frames_dropped,
            bytes_sent: self.bytes_sent,
            max_frame_len: self.max_frame_len,
            violations,
            log: self.log,
        })
    }
}

/// Seeds, partitions, exchanges and decides; faults are injected before the
/// session starts.
pub fn run_session(cfg: SessionConfig, faults: &[SimEvent]) -> Result<SessionResult, SimError> {
    let mut sim = Simulator::new(cfg)?;
    for f in faults {
        sim.inject(f.clone())?;
    }
    sim.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{decode_coverage, run_island};
    use serde_json::Value;

    fn roi() -> RegionOfInterest {
        RegionOfInterest::new(80.0, 80.0).unwrap()
    }

    fn small(g: u8, pop: usize, seed: u64) -> SessionConfig {
        let ga = GaConfig { pop_size: pop, max_generations: 30, rng_seed: seed, ..GaConfig::default() };
        let mut cfg = SessionConfig::new(g, ga, roi());
        cfg.result_threshold = 1.0;
        cfg
    }

    fn records(r: &SessionResult) -> Vec<Value> {
        r.log.iter().map(|l| serde_json::from_str(l).unwrap()).collect()
    }

    #[test]
    fn fig4_sequence() {
        // Compute outlasts distribution, as on the hardware timeline.
        let mut cfg = small(2, 18, 4);
        cfg.ga.max_generations = 100;
        let r = run_session(cfg, &[]).unwrap();
        let recs = records(&r);
        let sends: Vec<(u64, String, u64)> = recs
            .iter()
            .filter(|v| v["event"] == "send" && v["kind"] != "ACK")
            .map(|v| (v["to"].as_u64().unwrap(), v["kind"].as_str().unwrap().to_string(), v["t"].as_u64().unwrap()))
            .collect();
        let kinds: Vec<(u64, &str)> = sends.iter().map(|(to, k, _)| (*to, k.as_str())).collect();
        assert_eq!(
            kinds,
            vec![
                (1, "SPF"),
                (1, "SPF"),
                (1, "SPF"),
                (2, "SPF"),
                (2, "SPF"),
                (2, "SPF"),
                (0, "RF"),
                (0, "RF"),
                (1, "FPF"),
                (2, "FPF")
            ]
        );
        let first = recs.iter().find(|v| v["event"] == "deliver").unwrap();
        assert_eq!(first["kind"], "SPF");
        assert_eq!(first["t"], 10);
        assert!(r.all_delivered(2));
    }

    #[test]
    fn replays_bit_for_bit() {
        let mut cfg = small(3, 12, 9);
        cfg.link.loss_prob = 0.2;
        cfg.link.rng_seed = 5;
        let a = run_session(cfg.clone(), &[]).unwrap();
        let b = run_session(cfg, &[]).unwrap();
        assert_eq!(a.log_text(), b.log_text());
        assert_eq!(a.summary_json(), b.summary_json());
    }

    #[test]
    fn causality_and_conservation() {
        let mut cfg = small(4, 16, 2);
        cfg.link.loss_prob = 0.25;
        cfg.link.rng_seed = 11;
        let r = run_session(cfg, &[]).unwrap();
        let recs = records(&r);
        let count = |e: &str| recs.iter().filter(|v| v["event"] == e).count() as u64;
        assert_eq!(count("send") + count("drop"), r.frames_sent);
        assert_eq!(count("drop"), r.frames_dropped);
        // Every delivered frame follows its send by exactly the latency.
        assert_eq!(count("deliver"), count("send"));
        let mut pending: Vec<&Value> = recs.iter().filter(|v| v["event"] == "send").collect();
        for d in recs.iter().filter(|v| v["event"] == "deliver") {
            let i = pending
                .iter()
                .position(|s| {
                    s["from"] == d["from"] && s["to"] == d["to"] && s["kind"] == d["kind"] && s["seq"] == d["seq"]
                })
                .expect("delivery matches a send");
            let s = pending.remove(i);
            assert_eq!(d["t"].as_u64().unwrap(), s["t"].as_u64().unwrap() + 10);
        }
        assert!(r.max_frame_len <= 250);
    }

    #[test]
    fn single_island_matches_centralized() {
        let cfg = small(1, 10, 21);
        let r = run_session(cfg.clone(), &[]).unwrap();
        let mut rng = streams::stream(21, streams::SEEDING);
        let pop = initial_population(&cfg.ga, &cfg.roi, &mut rng).unwrap();
        let central = run_island(pop, &cfg.ga, &cfg.roi, streams::island_seed(21, 1)).unwrap();
        assert_eq!(r.final_deployment, central.best);
        assert_eq!(r.coverage, central.best_coverage);
    }

    #[test]
    fn fpf_carries_best_considered_result() {
        let mut cfg = small(6, 30, 3);
        cfg.result_threshold = 0.8;
        let r = run_session(cfg, &[]).unwrap();
        assert_eq!(r.considered.len(), 5);
        let best = *r.considered.values().max().unwrap();
        assert_eq!(decode_coverage(best), r.reported_coverage);
    }

    #[test]
    fn worker_reset_during_reassembly_recovers() {
        let cfg = small(2, 18, 8);
        let clean = run_session(cfg.clone(), &[]).unwrap();
        // Node 1 has its first segment at t=10; kill it before the rest.
        let faults = [SimEvent::reset(15, 1), SimEvent::restart(40, 1)];
        let r = run_session(cfg, &faults).unwrap();
        assert_eq!(r.islands[0].resets, 1);
        assert_eq!(r.islands[0].history, clean.islands[0].history);
        assert_eq!(r.final_deployment, clean.final_deployment);
        assert!(r.all_delivered(2));
    }

    #[test]
    fn coordinator_reset_while_collecting_requeries() {
        let mut cfg = small(2, 18, 8);
        cfg.ga.max_generations = 400;
        cfg.ga.coverage_target = 1.0;
        let clean = run_session(cfg.clone(), &[]).unwrap();
        let rf_times: Vec<u64> = clean.arrivals.iter().map(|a| a.at_ms).collect();
        // Down before the first RF arrives, up after both were sent.
        let faults = [SimEvent::reset(rf_times[0] - 5, 0), SimEvent::restart(rf_times[1] + 500, 0)];
        let r = run_session(cfg, &faults).unwrap();
        let recs = records(&r);
        let requeries = recs.iter().filter(|v| v["event"] == "send" && v["detail"] == "nack RF").count();
        assert!(requeries >= 2, "{requeries}");
        assert_eq!(r.final_deployment, clean.final_deployment);
        assert!(r.all_delivered(2));
    }

    #[test]
    fn late_fault_changes_nothing() {
        let cfg = small(2, 18, 8);
        let clean = run_session(cfg.clone(), &[]).unwrap();
        let r = run_session(cfg, &[SimEvent::reset(clean.end_ms + 1_000_000, 2)]).unwrap();
        assert_eq!(r.final_deployment, clean.final_deployment);
        assert_eq!(r.decided_at_ms, clean.decided_at_ms);
    }

    #[test]
    fn rejects_past_events() {
        let mut sim = Simulator::new(small(1, 4, 1)).unwrap();
        sim.now = 100;
        assert!(matches!(sim.inject(SimEvent::reset(50, 1)), Err(SimError::EventInPast { at: 50, now: 100 })));
    }

    #[test]
    fn times_out_when_every_worker_is_dead() {
        let mut cfg = small(2, 8, 1);
        cfg.timing.collect_timeout_ms = 1_000;
        let faults = [SimEvent::reset(0, 1), SimEvent::reset(0, 2)];
        assert!(matches!(run_session(cfg, &faults), Err(SimError::SessionTimeout(_))));
    }

    #[test]
    fn island_results_ignore_scheduling_order() {
        let cfg = small(3, 12, 6);
        let r = run_session(cfg.clone(), &[]).unwrap();
        let mut rng = streams::stream(6, streams::SEEDING);
        let subs = partition(&initial_population(&cfg.ga, &cfg.roi, &mut rng).unwrap(), 3);
        for order in [[2usize, 0, 1], [1, 2, 0]] {
            for i in order {
                let id = i as u8 + 1;
                let run = run_island(subs[i].clone(), &cfg.ga, &cfg.roi, streams::island_seed(6, id)).unwrap();
                assert_eq!(run.history, r.islands[i].history);
            }
        }
    }
}
