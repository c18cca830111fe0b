use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::link::ReliableQueue;
use super::{
    decode_result, encode_coverage, encode_result, Action, Frame, FrameKind, NodeEvent, NodeId, Reassembler, TimerId,
    TimerKind, Timing, VNODE_ID,
};
use crate::geometry::RegionOfInterest;
use crate::optimizer::{self, Chromosome, GaConfig, OptimizerError, Population, RunResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum GPhase {
    AwaitingSpf,
    Reassembling,
    Optimizing,
    Reporting,
    AwaitingFpf,
    Done,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GNodeConfig {
    pub id: NodeId,
    /// GA parameters; `pop_size` is taken from the received sub-population.
    pub ga: GaConfig,
    pub roi: RegionOfInterest,
    /// Simulated compute time charged per generation.
    pub generation_cost_ms: u64,
    pub timing: Timing,
    /// Seed of this island's GA random stream.
    pub rng_seed: u64,
}

/// Runs the GA of one island. The outcome depends only on the population,
/// the parameters and the seed.
pub fn run_island(
    population: Vec<Chromosome>,
    ga: &GaConfig,
    roi: &RegionOfInterest,
    rng_seed: u64,
) -> Result<RunResult, OptimizerError> {
    let cfg = GaConfig { pop_size: population.len(), rng_seed, ..ga.clone() };
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    optimizer::run(Population::evaluate(population, cfg.radius, roi), &cfg, roi, &mut rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IslandOutcome {
    pub population: Vec<Chromosome>,
    pub run: RunResult,
    pub wire_coverage: u16,
    pub compute_started_ms: u64,
    pub compute_done_ms: u64,
}

/// Worker: reassembles its sub-population, evolves it, reports the best
/// deployment and waits for the final one.
///
/// Only the final deployment survives a reset.
#[derive(Debug, Clone)]
pub struct GNode {
    cfg: GNodeConfig,
    phase: GPhase,
    down: bool,
    reassembler: Option<Reassembler>,
    outcome: Option<IslandOutcome>,
    final_deployment: Option<(Chromosome, u16)>,
    link: ReliableQueue,
    reassembly_token: u64,
    compute_token: u64,
    resync_token: u64,
    resyncs_sent: u32,
    resets: u32,
    violations: usize,
    frames_sent: u64,
    busy_ms: u64,
}

impl GNode {
    pub fn new(cfg: GNodeConfig) -> Self {
        GNode {
            link: ReliableQueue::new(cfg.timing),
            cfg,
            phase: GPhase::AwaitingSpf,
            down: false,
            reassembler: None,
            outcome: None,
            final_deployment: None,
            reassembly_token: 0,
            compute_token: 0,
            resync_token: 0,
            resyncs_sent: 0,
            resets: 0,
            violations: 0,
            frames_sent: 0,
            busy_ms: 0,
        }
    }

    pub fn id(&self) -> NodeId {
        self.cfg.id
    }

    pub fn phase(&self) -> GPhase {
        self.phase
    }

    pub fn is_down(&self) -> bool {
        self.down
    }

    pub fn outcome(&self) -> Option<&IslandOutcome> {
        self.outcome.as_ref()
    }

    pub fn final_deployment(&self) -> Option<&(Chromosome, u16)> {
        self.final_deployment.as_ref()
    }

    pub fn resets(&self) -> u32 {
        self.resets
    }

    pub fn violations(&self) -> usize {
        self.violations
    }

    /// Simulated time spent running the GA, including runs lost to resets.
    pub fn busy_ms(&self) -> u64 {
        self.busy_ms
    }

    pub fn step(&mut self, now: u64, event: NodeEvent) -> Vec<Action> {
        let out = match event {
            NodeEvent::Reset => {
                self.down = true;
                self.resets += 1;
                self.reassembler = None;
                self.outcome = None;
                self.link.clear();
                self.reassembly_token += 1;
                self.compute_token += 1;
                self.resync_token += 1;
                Vec::new()
            }
            NodeEvent::Restart => self.restart(),
            _ if self.down => Vec::new(),
            NodeEvent::Start => Vec::new(),
            NodeEvent::Frame { from, frame } => self.on_frame(now, from, frame),
            NodeEvent::Timer(id) => self.on_timer(id),
        };
        self.frames_sent += out.iter().filter(|a| matches!(a, Action::Send { .. })).count() as u64;
        out
    }

    fn restart(&mut self) -> Vec<Action> {
        if !self.down {
            return Vec::new();
        }
        self.down = false;
        if self.final_deployment.is_some() {
            self.phase = GPhase::Done;
            return Vec::new();
        }
        self.phase = GPhase::AwaitingSpf;
        self.resyncs_sent = 0;
        self.send_resync()
    }

    fn send_resync(&mut self) -> Vec<Action> {
        self.resyncs_sent += 1;
        self.resync_token += 1;
        vec![
            Action::Send { to: VNODE_ID, frame: Frame::resync(self.cfg.id) },
            Action::SetTimer {
                id: TimerId { kind: TimerKind::Resync, token: self.resync_token },
                delay_ms: self.cfg.timing.resync_interval_ms,
            },
        ]
    }

    fn violation(&mut self, from: NodeId, kind: FrameKind, reason: impl Into<String>) -> Vec<Action> {
        self.violations += 1;
        vec![Action::Violation { from, kind, reason: reason.into() }]
    }

    fn ack(&self, frame: &Frame) -> Action {
        Action::Send { to: VNODE_ID, frame: Frame::ack_of(self.cfg.id, frame) }
    }

    fn on_frame(&mut self, now: u64, from: NodeId, frame: Frame) -> Vec<Action> {
        if from != VNODE_ID {
            return self.violation(from, frame.kind, "workers only talk to the coordinator");
        }
        match frame.kind {
            FrameKind::Spf => self.on_segment(now, frame),
            FrameKind::Fpf => self.on_final(frame),
            FrameKind::Ack => self.on_ack(frame),
            FrameKind::Rf => self.violation(from, frame.kind, "workers never receive results"),
        }
    }

    fn on_segment(&mut self, now: u64, frame: Frame) -> Vec<Action> {
        if self.phase > GPhase::Reassembling {
            // Duplicate from a retransmission or a resync; just confirm it.
            return vec![self.ack(&frame)];
        }
        let n = self.cfg.ga.n_objects;
        let r = self.reassembler.get_or_insert_with(|| Reassembler::new(frame.total, n));
        if let Err(e) = r.insert(&frame) {
            return self.violation(VNODE_ID, frame.kind, e.to_string());
        }
        let complete = r.is_complete().then(|| r.finish());
        let mut out = vec![self.ack(&frame)];
        self.phase = GPhase::Reassembling;
        self.resync_token += 1;
        if let Some(population) = complete {
            self.reassembler = None;
            self.reassembly_token += 1;
            match population {
                Ok(p) => out.extend(self.start_compute(now, p)),
                Err(e) => out.extend(self.violation(VNODE_ID, FrameKind::Spf, e.to_string())),
            }
        } else {
            out.push(self.arm_reassembly_timer());
        }
        out
    }

    fn arm_reassembly_timer(&mut self) -> Action {
        self.reassembly_token += 1;
        Action::SetTimer {
            id: TimerId { kind: TimerKind::Reassembly, token: self.reassembly_token },
            delay_ms: self.cfg.timing.reassembly_timeout_ms,
        }
    }

    /// Runs the GA now and reports once its simulated cost has elapsed.
    fn start_compute(&mut self, now: u64, population: Vec<Chromosome>) -> Vec<Action> {
        self.phase = GPhase::Optimizing;
        let run = run_island(population.clone(), &self.cfg.ga, &self.cfg.roi, self.cfg.rng_seed)
            .expect("island configuration validated by the session");
        let cost = run.generations() * self.cfg.generation_cost_ms;
        self.busy_ms += cost;
        let wire_coverage = encode_coverage(run.best_coverage).expect("coverage is a fraction");
        self.outcome = Some(IslandOutcome {
            population,
            run,
            wire_coverage,
            compute_started_ms: now,
            compute_done_ms: now + cost,
        });
        self.compute_token += 1;
        vec![Action::SetTimer { id: TimerId { kind: TimerKind::Compute, token: self.compute_token }, delay_ms: cost }]
    }

    fn result_frame(&self) -> Frame {
        let o = self.outcome.as_ref().expect("computed");
        let payload = encode_result(&o.run.best, o.wire_coverage).expect("positions lie on the wire grid");
        Frame::data(FrameKind::Rf, self.cfg.id, 0, 1, payload)
    }

    fn report(&mut self) -> Vec<Action> {
        self.phase = GPhase::Reporting;
        if !self.link.contains(VNODE_ID, FrameKind::Rf) {
            let f = self.result_frame();
            self.link.push(VNODE_ID, f);
        }
        self.link.pump()
    }

    fn on_final(&mut self, frame: Frame) -> Vec<Action> {
        match decode_result(&frame.payload, self.cfg.ga.n_objects) {
            Ok(deployment) => {
                let out = vec![self.ack(&frame)];
                self.final_deployment = Some(deployment);
                self.phase = GPhase::Done;
                self.link.clear();
                self.reassembly_token += 1;
                self.compute_token += 1;
                self.resync_token += 1;
                out
            }
            Err(e) => self.violation(VNODE_ID, frame.kind, e.to_string()),
        }
    }

    fn on_ack(&mut self, frame: Frame) -> Vec<Action> {
        let info = frame.ack.expect("ACK frames carry ack fields");
        match (info.acked, info.negative) {
            (FrameKind::Rf, false) => {
                let (done, out) = self.link.on_ack(VNODE_ID, &frame);
                if done.is_some() && self.phase == GPhase::Reporting {
                    self.phase = GPhase::AwaitingFpf;
                }
                out
            }
            // Re-query from a coordinator that lost its results.
            (FrameKind::Rf, true) => match self.phase {
                GPhase::Reporting | GPhase::AwaitingFpf => self.report(),
                _ => Vec::new(),
            },
            _ => self.violation(VNODE_ID, frame.kind, "unexpected acknowledgment"),
        }
    }

    fn on_timer(&mut self, id: TimerId) -> Vec<Action> {
        match id.kind {
            TimerKind::Ack => self.link.on_timeout(id),
            TimerKind::Reassembly if id.token == self.reassembly_token && self.phase == GPhase::Reassembling => {
                let r = self.reassembler.as_ref().expect("reassembling");
                let total = r.total();
                let mut out: Vec<Action> = r
                    .missing()
                    .into_iter()
                    .map(|seq| Action::Send {
                        to: VNODE_ID,
                        frame: Frame::nack(self.cfg.id, FrameKind::Spf, seq, total),
                    })
                    .collect();
                out.push(self.arm_reassembly_timer());
                out
            }
            TimerKind::Compute if id.token == self.compute_token && self.phase == GPhase::Optimizing => self.report(),
            TimerKind::Resync
                if id.token == self.resync_token
                    && self.phase == GPhase::AwaitingSpf
                    && self.resyncs_sent < self.cfg.timing.max_resyncs =>
            {
                self.send_resync()
            }
            _ => Vec::new(),
        }
    }
}
