use std::collections::{BTreeMap, BTreeSet};

use super::link::ReliableQueue;
use super::{
    decode_result, encode_result, segment_subpopulation, Action, Frame, FrameKind, NodeEvent, NodeId, ProtocolError,
    TimerId, TimerKind, Timing, VNODE_ID,
};
use crate::optimizer::Chromosome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum VPhase {
    Seeding,
    Distributing,
    Collecting,
    Deciding,
    Disseminating,
    Done,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VNodeConfig {
    pub g_nodes: u8,
    pub n_objects: usize,
    /// Fraction of workers whose results suffice for a decision.
    pub result_threshold: f64,
    pub timing: Timing,
}

impl VNodeConfig {
    /// Number of distinct results that triggers the decision.
    pub fn required_results(&self) -> usize {
        let g = self.g_nodes as f64;
        // Guard against 0.7 * 10 = 7.000000000000001.
        ((self.result_threshold * g - 1e-9).ceil() as usize).clamp(1, self.g_nodes as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeResult {
    pub chromosome: Chromosome,
    /// Coverage as carried on the wire, in units of 0.01 %.
    pub coverage: u16,
    pub received_at_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub node: NodeId,
    pub chromosome: Chromosome,
    pub coverage: u16,
    pub decided_at_ms: u64,
}

/// Coordinator: distributes sub-populations, gathers results, picks and
/// disseminates the best deployment.
///
/// `phase` and `decision` survive a reset (they model state the node keeps
/// in flash); results and the transmit queue do not.
#[derive(Debug, Clone)]
pub struct VNode {
    cfg: VNodeConfig,
    phase: VPhase,
    down: bool,
    segments: Vec<Vec<Frame>>,
    link: ReliableQueue,
    results: BTreeMap<NodeId, NodeResult>,
    decision: Option<Decision>,
    fpf_delivered: BTreeSet<NodeId>,
    lost_results: bool,
    collect_token: u64,
    requery_token: u64,
    violations: usize,
}

impl VNode {
    /// `subpops[i]` is the sub-population of worker `i + 1`.
    pub fn new(cfg: VNodeConfig, subpops: &[Vec<Chromosome>]) -> Result<Self, ProtocolError> {
        assert_eq!(subpops.len(), cfg.g_nodes as usize, "one sub-population per worker");
        let segments = subpops
            .iter()
            .map(|sub| segment_subpopulation(sub, cfg.n_objects, VNODE_ID))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(VNode {
            link: ReliableQueue::new(cfg.timing),
            cfg,
            phase: VPhase::Seeding,
            down: false,
            segments,
            results: BTreeMap::new(),
            decision: None,
            fpf_delivered: BTreeSet::new(),
            lost_results: false,
            collect_token: 0,
            requery_token: 0,
            violations: 0,
        })
    }

    pub fn phase(&self) -> VPhase {
        self.phase
    }

    pub fn is_down(&self) -> bool {
        self.down
    }

    pub fn results(&self) -> &BTreeMap<NodeId, NodeResult> {
        &self.results
    }

    pub fn decision(&self) -> Option<&Decision> {
        self.decision.as_ref()
    }

    pub fn fpf_delivered(&self) -> &BTreeSet<NodeId> {
        &self.fpf_delivered
    }

    pub fn violations(&self) -> usize {
        self.violations
    }

    pub fn segments_for(&self, node: NodeId) -> &[Frame] {
        &self.segments[node as usize - 1]
    }

    fn workers(&self) -> impl Iterator<Item = NodeId> {
        1..=self.cfg.g_nodes
    }

    pub fn step(&mut self, now: u64, event: NodeEvent) -> Vec<Action> {
        match event {
            NodeEvent::Reset => {
                self.down = true;
                self.results.clear();
                self.link.clear();
                self.collect_token += 1;
                self.requery_token += 1;
                Vec::new()
            }
            NodeEvent::Restart => {
                if !self.down {
                    return Vec::new();
                }
                self.down = false;
                self.lost_results = true;
                self.resume(now)
            }
            _ if self.down => Vec::new(),
            NodeEvent::Start => {
                if self.phase != VPhase::Seeding {
                    return Vec::new();
                }
                self.phase = VPhase::Distributing;
                self.queue_all_segments();
                self.after_link_activity(now, Vec::new())
            }
            NodeEvent::Frame { from, frame } => self.on_frame(now, from, frame),
            NodeEvent::Timer(id) => self.on_timer(now, id),
        }
    }

    fn queue_all_segments(&mut self) {
        for node in self.workers() {
            self.queue_segments(node);
        }
    }

    fn queue_segments(&mut self, node: NodeId) {
        for f in self.segments[node as usize - 1].clone() {
            self.link.push(node, f);
        }
    }

    fn queue_fpf(&mut self, node: NodeId) {
        let d = self.decision.as_ref().expect("decision made");
        let payload = encode_result(&d.chromosome, d.coverage).expect("decoded chromosome re-encodes");
        self.link.push(node, Frame::data(FrameKind::Fpf, VNODE_ID, 0, 1, payload));
    }

    /// Picks up where the persisted phase left off after a restart.
    fn resume(&mut self, now: u64) -> Vec<Action> {
        let mut out = Vec::new();
        match self.phase {
            VPhase::Seeding | VPhase::Done => return out,
            VPhase::Distributing => self.queue_all_segments(),
            VPhase::Collecting | VPhase::Deciding => {
                self.phase = VPhase::Collecting;
                out.extend(self.arm_collect_timer());
                out.extend(self.requery());
            }
            VPhase::Disseminating => {
                for node in self.workers().collect::<Vec<_>>() {
                    if !self.fpf_delivered.contains(&node) {
                        self.queue_fpf(node);
                    }
                }
            }
        }
        self.after_link_activity(now, out)
    }

    fn arm_collect_timer(&mut self) -> Vec<Action> {
        self.collect_token += 1;
        vec![Action::SetTimer {
            id: TimerId { kind: TimerKind::Collect, token: self.collect_token },
            delay_ms: self.cfg.timing.collect_timeout_ms,
        }]
    }

    /// Asks every worker without a stored result to send its RF again.
    fn requery(&mut self) -> Vec<Action> {
        let mut out: Vec<Action> = self
            .workers()
            .filter(|n| !self.results.contains_key(n))
            .map(|n| Action::Send { to: n, frame: Frame::nack(VNODE_ID, FrameKind::Rf, 0, 1) })
            .collect();
        if !out.is_empty() {
            self.requery_token += 1;
            out.push(Action::SetTimer {
                id: TimerId { kind: TimerKind::Requery, token: self.requery_token },
                delay_ms: self.cfg.timing.requery_interval_ms,
            });
        }
        out
    }

    fn on_timer(&mut self, now: u64, id: TimerId) -> Vec<Action> {
        match id.kind {
            TimerKind::Ack => {
                let out = self.link.on_timeout(id);
                self.after_link_activity(now, out)
            }
            TimerKind::Collect if id.token == self.collect_token && self.phase == VPhase::Collecting => {
                if self.results.is_empty() {
                    // Nothing to decide on; the session has failed.
                    self.phase = VPhase::Done;
                    self.link.clear();
                    return Vec::new();
                }
                self.decide(now)
            }
            TimerKind::Requery
                if id.token == self.requery_token && self.phase == VPhase::Collecting && self.lost_results =>
            {
                self.requery()
            }
            _ => Vec::new(),
        }
    }

    fn violation(&mut self, from: NodeId, kind: FrameKind, reason: impl Into<String>) -> Vec<Action> {
        self.violations += 1;
        vec![Action::Violation { from, kind, reason: reason.into() }]
    }

    fn on_frame(&mut self, now: u64, from: NodeId, frame: Frame) -> Vec<Action> {
        if from == VNODE_ID || from > self.cfg.g_nodes {
            return self.violation(from, frame.kind, "unknown sender");
        }
        match frame.kind {
            FrameKind::Ack => self.on_ack(now, from, frame),
            FrameKind::Rf => self.on_result(now, from, frame),
            FrameKind::Spf | FrameKind::Fpf => self.violation(from, frame.kind, "coordinator never receives this kind"),
        }
    }

    fn on_ack(&mut self, now: u64, from: NodeId, frame: Frame) -> Vec<Action> {
        let info = frame.ack.expect("ACK frames carry ack fields");
        if !info.negative {
            let (done, out) = self.link.on_ack(from, &frame);
            if let Some((node, f)) = done {
                if f.kind == FrameKind::Fpf {
                    self.fpf_delivered.insert(node);
                }
            }
            return self.after_link_activity(now, out);
        }
        match info.acked {
            FrameKind::Spf if self.phase >= VPhase::Disseminating => {
                // A worker that lost its state after the decision only needs
                // the final positions.
                if self.decision.is_some() {
                    self.fpf_delivered.remove(&from);
                    self.queue_fpf(from);
                    if self.phase == VPhase::Done {
                        self.phase = VPhase::Disseminating;
                    }
                }
                self.after_link_activity(now, Vec::new())
            }
            FrameKind::Spf if self.phase == VPhase::Seeding => self.violation(from, frame.kind, "NACK before start"),
            FrameKind::Spf => {
                if frame.is_resync() {
                    self.queue_segments(from);
                } else {
                    match self.segments[from as usize - 1].get(frame.seq as usize) {
                        Some(seg) if seg.total == frame.total => {
                            let seg = seg.clone();
                            self.link.push(from, seg);
                        }
                        _ => return self.violation(from, frame.kind, "NACK for a segment that does not exist"),
                    }
                }
                self.after_link_activity(now, Vec::new())
            }
            _ => self.violation(from, frame.kind, "unexpected negative acknowledgment"),
        }
    }

    fn on_result(&mut self, now: u64, from: NodeId, frame: Frame) -> Vec<Action> {
        if self.phase == VPhase::Seeding {
            return self.violation(from, frame.kind, "result before distribution");
        }
        let (chromosome, coverage) = match decode_result(&frame.payload, self.cfg.n_objects) {
            Ok(r) => r,
            Err(e) => return self.violation(from, frame.kind, e.to_string()),
        };
        let mut out = vec![Action::Send { to: from, frame: Frame::ack_of(VNODE_ID, &frame) }];
        // Retransmissions never overwrite the first copy.
        self.results.entry(from).or_insert(NodeResult { chromosome, coverage, received_at_ms: now });
        if self.phase == VPhase::Collecting && self.results.len() >= self.cfg.required_results() {
            out.extend(self.decide(now));
        }
        out
    }

    fn decide(&mut self, now: u64) -> Vec<Action> {
        self.phase = VPhase::Deciding;
        let (&node, best) = self
            .results
            .iter()
            // Highest coverage; on ties the lowest id, which iterates first.
            .fold(None, |best: Option<(&NodeId, &NodeResult)>, (id, r)| match best {
                Some((_, b)) if b.coverage >= r.coverage => best,
                _ => Some((id, r)),
            })
            .expect("at least one result");
        self.decision =
            Some(Decision { node, chromosome: best.chromosome.clone(), coverage: best.coverage, decided_at_ms: now });
        self.phase = VPhase::Disseminating;
        self.collect_token += 1;
        self.requery_token += 1;
        self.link.retain(|_, f| f.kind != FrameKind::Spf);
        for node in self.workers().collect::<Vec<_>>() {
            self.queue_fpf(node);
        }
        self.after_link_activity(now, Vec::new())
    }

    /// Starts queued transmissions and advances the phase once the queue
    /// drains.
    fn after_link_activity(&mut self, now: u64, mut out: Vec<Action>) -> Vec<Action> {
        out.extend(self.link.pump());
        if !self.link.is_idle() {
            return out;
        }
        match self.phase {
            VPhase::Distributing => {
                self.phase = VPhase::Collecting;
                out.extend(self.arm_collect_timer());
                if self.lost_results {
                    out.extend(self.requery());
                }
                if self.results.len() >= self.cfg.required_results() {
                    out.extend(self.decide(now));
                }
            }
            VPhase::Disseminating => self.phase = VPhase::Done,
            _ => {}
        }
        out
    }
}
