use std::collections::VecDeque;

use super::{Action, Frame, FrameKind, NodeId, TimerId, TimerKind, Timing};

#[derive(Debug, Clone, PartialEq)]
struct Outgoing {
    to: NodeId,
    frame: Frame,
    retries: u32,
    rounds: u32,
}

/// Stop-and-wait sender: one frame in flight, acknowledged before the next
/// one leaves. A frame that exhausts its retries goes to the back of the
/// queue for another round; after `max_rounds` rounds it is abandoned.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliableQueue {
    queue: VecDeque<Outgoing>,
    in_flight: Option<Outgoing>,
    token: u64,
    timing: Timing,
    abandoned: Vec<(NodeId, FrameKind, u16)>,
}

impl ReliableQueue {
    pub fn new(timing: Timing) -> Self {
        ReliableQueue { queue: VecDeque::new(), in_flight: None, token: 0, timing, abandoned: Vec::new() }
    }

    fn holds(&self, to: NodeId, kind: FrameKind, seq: u16) -> bool {
        self.in_flight.iter().chain(&self.queue).any(|o| o.to == to && o.frame.kind == kind && o.frame.seq == seq)
    }

    /// Queues `frame` unless the same (peer, kind, seq) is already pending.
    pub fn push(&mut self, to: NodeId, frame: Frame) -> bool {
        if self.holds(to, frame.kind, frame.seq) {
            return false;
        }
        self.queue.push_back(Outgoing { to, frame, retries: 0, rounds: 0 });
        true
    }

    pub fn is_idle(&self) -> bool {
        self.in_flight.is_none() && self.queue.is_empty()
    }

    pub fn contains(&self, to: NodeId, kind: FrameKind) -> bool {
        self.in_flight.iter().chain(&self.queue).any(|o| o.to == to && o.frame.kind == kind)
    }

    /// Drops queued (not in-flight) frames that fail `keep`.
    pub fn retain(&mut self, mut keep: impl FnMut(NodeId, &Frame) -> bool) {
        self.queue.retain(|o| keep(o.to, &o.frame));
    }

    pub fn clear(&mut self) {
        self.queue.clear();
        self.in_flight = None;
        self.token += 1;
    }

    pub fn abandoned(&self) -> &[(NodeId, FrameKind, u16)] {
        &self.abandoned
    }

    /// Starts the next transmission if nothing is in flight.
    pub fn pump(&mut self) -> Vec<Action> {
        if self.in_flight.is_some() {
            return Vec::new();
        }
        match self.queue.pop_front() {
            Some(next) => {
                self.in_flight = Some(next);
                self.transmit()
            }
            None => Vec::new(),
        }
    }

    fn transmit(&mut self) -> Vec<Action> {
        let o = self.in_flight.as_ref().expect("frame in flight");
        self.token += 1;
        vec![
            Action::Send { to: o.to, frame: o.frame.clone() },
            Action::SetTimer {
                id: TimerId { kind: TimerKind::Ack, token: self.token },
                delay_ms: self.timing.ack_timeout_ms,
            },
        ]
    }

    /// Handles a positive ACK. Returns the acknowledged frame when it matches
    /// the one in flight, plus whatever goes out next.
    pub fn on_ack(&mut self, from: NodeId, ack: &Frame) -> (Option<(NodeId, Frame)>, Vec<Action>) {
        let matches = match (&self.in_flight, ack.ack) {
            (Some(o), Some(info)) => {
                !info.negative && o.to == from && o.frame.kind == info.acked && o.frame.seq == ack.seq
            }
            _ => false,
        };
        if !matches {
            return (None, Vec::new());
        }
        let done = self.in_flight.take().map(|o| (o.to, o.frame));
        self.token += 1;
        (done, self.pump())
    }

    pub fn on_timeout(&mut self, id: TimerId) -> Vec<Action> {
        if id.kind != TimerKind::Ack || id.token != self.token || self.in_flight.is_none() {
            return Vec::new();
        }
        let o = self.in_flight.as_mut().expect("frame in flight");
        if o.retries < self.timing.max_retries {
            o.retries += 1;
            return self.transmit();
        }
        let mut o = self.in_flight.take().expect("frame in flight");
        o.rounds += 1;
        if o.rounds < self.timing.max_rounds {
            o.retries = 0;
            self.queue.push_back(o);
        } else {
            self.abandoned.push((o.to, o.frame.kind, o.frame.seq));
        }
        self.pump()
    }
}
