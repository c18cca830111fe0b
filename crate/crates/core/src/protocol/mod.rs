//! Coordinator/worker protocol: frames, wire codec, segmentation and the two
//! node state machines.
//!
//! Wire layout of every frame (little-endian, at most 250 bytes):
//!
//! | offset | size | field                                                        |
//! |--------|------|--------------------------------------------------------------|
//! | 0      | 1    | kind: 1 = SPF, 2 = RF, 3 = FPF, 4 = ACK                      |
//! | 1      | 1    | sender id (0 is the coordinator)                             |
//! | 2      | 2    | seq, segment index (ACK: echoed from the acknowledged frame) |
//! | 4      | 2    | total, segment count (ACK: echoed)                           |
//! | 6      | 1    | ACK only: acknowledged kind in bits 0-2, bit 7 = negative    |
//! | 7      | 1    | payload length (0..=242)                                     |
//! | 8      | len  | payload                                                      |
//!
//! A negative ACK asks the peer to send the named frame again. A negative
//! ACK of SPF with `total = 0` is a resync request: the sender lost all state
//! and wants its whole sub-population again.
//!
//! Payloads: a chromosome is `n` pairs of `(x, y)`, each coordinate an
//! unsigned 16-bit count of centimeters. SPF carries whole chromosomes back
//! to back. RF and FPF carry a 16-bit coverage in units of 0.01 % followed
//! by one chromosome.

mod gnode;
mod link;
mod vnode;

pub use gnode::{run_island, GNode, GNodeConfig, GPhase, IslandOutcome};
pub use link::ReliableQueue;
pub use vnode::{Decision, NodeResult, VNode, VNodeConfig, VPhase};

use thiserror::Error;

use crate::geometry::{Point, POSITION_UNITS_PER_METER};
use crate::optimizer::Chromosome;

pub const MAX_FRAME_LEN: usize = 250;
pub const HEADER_LEN: usize = 8;
pub const MAX_PAYLOAD: usize = MAX_FRAME_LEN - HEADER_LEN;
/// Bytes per encoded node position.
pub const POSITION_BYTES: usize = 4;
const COVERAGE_BYTES: usize = 2;
const NEGATIVE_FLAG: u8 = 0x80;
const COVERAGE_UNITS: f64 = 10_000.0;

pub type NodeId = u8;
pub const VNODE_ID: NodeId = 0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("payload of {0} bytes exceeds {MAX_PAYLOAD}")]
    PayloadTooLarge(usize),
    #[error("frame truncated: {0} bytes")]
    TruncatedFrame(usize),
    #[error("unknown frame kind {0}")]
    UnknownKind(u8),
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("a chromosome of {n_objects} nodes needs {bytes} bytes, more than one payload")]
    ChromosomeTooLarge { n_objects: usize, bytes: usize },
    #[error("coordinate {0} m cannot be encoded")]
    CoordinateOutOfRange(f64),
    #[error("coverage {0} cannot be encoded")]
    CoverageOutOfRange(f64),
    #[error("chromosome has {got} nodes, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("sub-population is empty")]
    EmptyPopulation,
    #[error("segment {seq} of {total} does not fit the transfer of {expected} segments")]
    SegmentMismatch { seq: u16, total: u16, expected: u16 },
    #[error("reassembly incomplete, missing segments {0:?}")]
    ReassemblyGap(Vec<u16>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FrameKind {
    Spf,
    Rf,
    Fpf,
    Ack,
}

impl FrameKind {
    pub fn code(self) -> u8 {
        match self {
            FrameKind::Spf => 1,
            FrameKind::Rf => 2,
            FrameKind::Fpf => 3,
            FrameKind::Ack => 4,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, ProtocolError> {
        Ok(match code {
            1 => FrameKind::Spf,
            2 => FrameKind::Rf,
            3 => FrameKind::Fpf,
            4 => FrameKind::Ack,
            other => return Err(ProtocolError::UnknownKind(other)),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            FrameKind::Spf => "SPF",
            FrameKind::Rf => "RF",
            FrameKind::Fpf => "FPF",
            FrameKind::Ack => "ACK",
        }
    }
}

/// Acknowledgment fields, present on ACK frames only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AckInfo {
    pub acked: FrameKind,
    pub negative: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: FrameKind,
    pub sender: NodeId,
    pub seq: u16,
    pub total: u16,
    pub ack: Option<AckInfo>,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn data(kind: FrameKind, sender: NodeId, seq: u16, total: u16, payload: Vec<u8>) -> Self {
        debug_assert_ne!(kind, FrameKind::Ack);
        Frame { kind, sender, seq, total, ack: None, payload }
    }

    /// Positive acknowledgment of `frame`.
    pub fn ack_of(sender: NodeId, frame: &Frame) -> Self {
        Frame {
            kind: FrameKind::Ack,
            sender,
            seq: frame.seq,
            total: frame.total,
            ack: Some(AckInfo { acked: frame.kind, negative: false }),
            payload: Vec::new(),
        }
    }

    /// Request to resend segment `seq` of a `kind` transfer.
    pub fn nack(sender: NodeId, kind: FrameKind, seq: u16, total: u16) -> Self {
        Frame {
            kind: FrameKind::Ack,
            sender,
            seq,
            total,
            ack: Some(AckInfo { acked: kind, negative: true }),
            payload: Vec::new(),
        }
    }

    /// Request for a full resend of the sender's sub-population.
    pub fn resync(sender: NodeId) -> Self {
        Frame::nack(sender, FrameKind::Spf, 0, 0)
    }

    pub fn is_resync(&self) -> bool {
        matches!(self.ack, Some(AckInfo { acked: FrameKind::Spf, negative: true })) && self.total == 0
    }

    pub fn wire_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    fn check(&self) -> Result<(), ProtocolError> {
        if self.payload.len() > MAX_PAYLOAD {
            return Err(ProtocolError::PayloadTooLarge(self.payload.len()));
        }
        match (self.kind, self.ack) {
            (FrameKind::Ack, None) => return Err(ProtocolError::Malformed("ACK without ack fields".into())),
            (FrameKind::Ack, Some(info)) => {
                if info.acked == FrameKind::Ack {
                    return Err(ProtocolError::Malformed("ACK of an ACK".into()));
                }
                if !self.payload.is_empty() {
                    return Err(ProtocolError::Malformed("ACK with payload".into()));
                }
                if !self.is_resync() && self.seq >= self.total {
                    return Err(ProtocolError::Malformed(format!("seq {} >= total {}", self.seq, self.total)));
                }
            }
            (_, Some(_)) => return Err(ProtocolError::Malformed("ack fields on a data frame".into())),
            (_, None) => {
                if self.seq >= self.total {
                    return Err(ProtocolError::Malformed(format!("seq {} >= total {}", self.seq, self.total)));
                }
            }
        }
        Ok(())
    }
}

pub fn encode_frame(f: &Frame) -> Result<Vec<u8>, ProtocolError> {
    f.check()?;
    let mut out = Vec::with_capacity(f.wire_len());
    out.push(f.kind.code());
    out.push(f.sender);
    out.extend_from_slice(&f.seq.to_le_bytes());
    out.extend_from_slice(&f.total.to_le_bytes());
    out.push(match f.ack {
        Some(info) => info.acked.code() | if info.negative { NEGATIVE_FLAG } else { 0 },
        None => 0,
    });
    out.push(f.payload.len() as u8);
    out.extend_from_slice(&f.payload);
    Ok(out)
}

pub fn decode_frame(bytes: &[u8]) -> Result<Frame, ProtocolError> {
    if bytes.len() < HEADER_LEN {
        return Err(ProtocolError::TruncatedFrame(bytes.len()));
    }
    let kind = FrameKind::from_code(bytes[0])?;
    let len = bytes[7] as usize;
    if len > MAX_PAYLOAD {
        return Err(ProtocolError::PayloadTooLarge(len));
    }
    if bytes.len() < HEADER_LEN + len {
        return Err(ProtocolError::TruncatedFrame(bytes.len()));
    }
    if bytes.len() > HEADER_LEN + len {
        return Err(ProtocolError::Malformed(format!("{} trailing bytes", bytes.len() - HEADER_LEN - len)));
    }
    let ack = match (kind, bytes[6]) {
        (FrameKind::Ack, b) => {
            Some(AckInfo { acked: FrameKind::from_code(b & !NEGATIVE_FLAG)?, negative: b & NEGATIVE_FLAG != 0 })
        }
        (_, 0) => None,
        (_, b) => return Err(ProtocolError::Malformed(format!("ack byte {b:#04x} on a data frame"))),
    };
    let frame = Frame {
        kind,
        sender: bytes[1],
        seq: u16::from_le_bytes([bytes[2], bytes[3]]),
        total: u16::from_le_bytes([bytes[4], bytes[5]]),
        ack,
        payload: bytes[HEADER_LEN..].to_vec(),
    };
    frame.check()?;
    Ok(frame)
}

pub fn encode_coordinate(v: f64) -> Result<u16, ProtocolError> {
    let units = (v * POSITION_UNITS_PER_METER).round();
    if !v.is_finite() || units < 0.0 || units > u16::MAX as f64 {
        return Err(ProtocolError::CoordinateOutOfRange(v));
    }
    Ok(units as u16)
}

pub fn decode_coordinate(units: u16) -> f64 {
    units as f64 / POSITION_UNITS_PER_METER
}

pub fn encode_coverage(c: f64) -> Result<u16, ProtocolError> {
    let units = (c * COVERAGE_UNITS).round();
    if !c.is_finite() || units < 0.0 || units > u16::MAX as f64 {
        return Err(ProtocolError::CoverageOutOfRange(c));
    }
    Ok(units as u16)
}

pub fn decode_coverage(units: u16) -> f64 {
    units as f64 / COVERAGE_UNITS
}

pub fn encode_chromosome(c: &Chromosome, out: &mut Vec<u8>) -> Result<(), ProtocolError> {
    for p in &c.positions {
        out.extend_from_slice(&encode_coordinate(p.x)?.to_le_bytes());
        out.extend_from_slice(&encode_coordinate(p.y)?.to_le_bytes());
    }
    Ok(())
}

/// Splits a payload into chromosomes of `n_objects` nodes.
pub fn decode_chromosomes(bytes: &[u8], n_objects: usize) -> Result<Vec<Chromosome>, ProtocolError> {
    let width = n_objects * POSITION_BYTES;
    if width == 0 || !bytes.len().is_multiple_of(width) {
        return Err(ProtocolError::Malformed(format!(
            "{} payload bytes is not a whole number of {n_objects}-node chromosomes",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(width)
        .map(|chunk| {
            Chromosome::new(
                chunk
                    .chunks_exact(POSITION_BYTES)
                    .map(|b| {
                        Point::new(
                            decode_coordinate(u16::from_le_bytes([b[0], b[1]])),
                            decode_coordinate(u16::from_le_bytes([b[2], b[3]])),
                        )
                    })
                    .collect(),
            )
        })
        .collect())
}

/// Chromosomes that fit one SPF payload.
pub fn chromosomes_per_frame(n_objects: usize) -> Result<usize, ProtocolError> {
    let bytes = n_objects * POSITION_BYTES;
    if n_objects == 0 || bytes > MAX_PAYLOAD {
        return Err(ProtocolError::ChromosomeTooLarge { n_objects, bytes });
    }
    Ok(MAX_PAYLOAD / bytes)
}

/// Packs a sub-population into numbered SPF frames.
pub fn segment_subpopulation(
    sub: &[Chromosome],
    n_objects: usize,
    sender: NodeId,
) -> Result<Vec<Frame>, ProtocolError> {
    let per_frame = chromosomes_per_frame(n_objects)?;
    if sub.is_empty() {
        return Err(ProtocolError::EmptyPopulation);
    }
    if let Some(c) = sub.iter().find(|c| c.len() != n_objects) {
        return Err(ProtocolError::LengthMismatch { got: c.len(), expected: n_objects });
    }
    let total = sub.len().div_ceil(per_frame);
    let total = u16::try_from(total).map_err(|_| ProtocolError::Malformed(format!("{total} segments")))?;
    sub.chunks(per_frame)
        .enumerate()
        .map(|(seq, chunk)| {
            let mut payload = Vec::with_capacity(chunk.len() * n_objects * POSITION_BYTES);
            for c in chunk {
                encode_chromosome(c, &mut payload)?;
            }
            Ok(Frame::data(FrameKind::Spf, sender, seq as u16, total, payload))
        })
        .collect()
}

/// RF/FPF payload: coverage followed by the chromosome.
pub fn encode_result(c: &Chromosome, coverage: u16) -> Result<Vec<u8>, ProtocolError> {
    let mut payload = coverage.to_le_bytes().to_vec();
    encode_chromosome(c, &mut payload)?;
    if payload.len() > MAX_PAYLOAD {
        return Err(ProtocolError::ChromosomeTooLarge { n_objects: c.len(), bytes: payload.len() });
    }
    Ok(payload)
}

pub fn decode_result(payload: &[u8], n_objects: usize) -> Result<(Chromosome, u16), ProtocolError> {
    if payload.len() != COVERAGE_BYTES + n_objects * POSITION_BYTES {
        return Err(ProtocolError::Malformed(format!("result payload of {} bytes", payload.len())));
    }
    let coverage = u16::from_le_bytes([payload[0], payload[1]]);
    let mut chromosomes = decode_chromosomes(&payload[COVERAGE_BYTES..], n_objects)?;
    Ok((chromosomes.remove(0), coverage))
}

/// Collects SPF segments in any order.
#[derive(Debug, Clone, PartialEq)]
pub struct Reassembler {
    n_objects: usize,
    segments: Vec<Option<Vec<u8>>>,
}

impl Reassembler {
    pub fn new(total: u16, n_objects: usize) -> Self {
        Reassembler { n_objects, segments: vec![None; total as usize] }
    }

    pub fn total(&self) -> u16 {
        self.segments.len() as u16
    }

    /// Stores a segment; returns whether it was new.
    pub fn insert(&mut self, frame: &Frame) -> Result<bool, ProtocolError> {
        if frame.total != self.total() || frame.seq >= frame.total {
            return Err(ProtocolError::SegmentMismatch { seq: frame.seq, total: frame.total, expected: self.total() });
        }
        let slot = &mut self.segments[frame.seq as usize];
        if slot.is_some() {
            return Ok(false);
        }
        *slot = Some(frame.payload.clone());
        Ok(true)
    }

    pub fn missing(&self) -> Vec<u16> {
        (0..self.total()).filter(|&i| self.segments[i as usize].is_none()).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.segments.iter().all(Option::is_some)
    }

    pub fn finish(&self) -> Result<Vec<Chromosome>, ProtocolError> {
        let missing = self.missing();
        if !missing.is_empty() {
            return Err(ProtocolError::ReassemblyGap(missing));
        }
        let mut out = Vec::new();
        for seg in self.segments.iter().flatten() {
            out.extend(decode_chromosomes(seg, self.n_objects)?);
        }
        Ok(out)
    }
}

/// Something a state machine wants the host to do.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Send {
        to: NodeId,
        frame: Frame,
    },
    SetTimer {
        id: TimerId,
        delay_ms: u64,
    },
    /// A frame that is illegal in the current phase; logged and dropped.
    Violation {
        from: NodeId,
        kind: FrameKind,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TimerKind {
    Ack,
    Reassembly,
    Compute,
    Collect,
    Requery,
    Resync,
}

/// Timers carry a token; a timer whose token is no longer current is stale
/// and ignored, which is how state machines cancel them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimerId {
    pub kind: TimerKind,
    pub token: u64,
}

/// Input to a node state machine.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeEvent {
    Start,
    Frame {
        from: NodeId,
        frame: Frame,
    },
    Timer(TimerId),
    /// Power loss: volatile state is gone and the node stops reacting.
    Reset,
    /// Power back: the node reconnects and resumes.
    Restart,
}

/// Retransmission and timeout settings shared by both node kinds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub ack_timeout_ms: u64,
    pub max_retries: u32,
    /// Times a failed frame is re-queued after exhausting its retries.
    pub max_rounds: u32,
    pub reassembly_timeout_ms: u64,
    pub collect_timeout_ms: u64,
    /// Period of RF re-queries after the coordinator lost its results.
    pub requery_interval_ms: u64,
    /// Period and count of resync requests from a restarted worker.
    pub resync_interval_ms: u64,
    pub max_resyncs: u32,
}

impl Default for Timing {
    fn default() -> Self {
        Timing {
            ack_timeout_ms: 50,
            max_retries: 5,
            max_rounds: 3,
            reassembly_timeout_ms: 200,
            collect_timeout_ms: 60_000,
            requery_interval_ms: 200,
            resync_interval_ms: 200,
            max_resyncs: 50,
        }
    }
}
