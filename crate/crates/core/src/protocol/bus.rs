use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::costmap::TrajectoryStats;
use crate::error::Result;
use crate::geometry::Pose2;
use crate::ActorId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MessageKind {
    PoseBroadcast,
    ConcernReply,
    ScoreRequest,
    ScoreReply,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Pose(Pose2),
    Concern(f64),
    ScoreRequest,
    Scores(Vec<TrajectoryStats>),
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::Pose(_) => MessageKind::PoseBroadcast,
            Payload::Concern(_) => MessageKind::ConcernReply,
            Payload::ScoreRequest => MessageKind::ScoreRequest,
            Payload::Scores(_) => MessageKind::ScoreReply,
        }
    }

    /// Wire size with every scalar sent as an 8-byte float.
    pub fn bytes(&self) -> usize {
        match self {
            Payload::Pose(_) => 3 * 8,
            Payload::Concern(_) => 8,
            Payload::ScoreRequest => 0,
            Payload::Scores(s) => s.len() * TrajectoryStats::WIRE_SCALARS * 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub kind: MessageKind,
    pub sender: ActorId,
    /// `None` for a broadcast.
    pub receiver: Option<ActorId>,
    #[serde(skip)]
    pub payload: Option<Payload>,
    pub payload_bytes: usize,
}

/// In-process, in-order message log for one round.
#[derive(Debug, Clone, Default)]
pub struct Bus {
    messages: Vec<Message>,
}

impl Bus {
    pub fn send(&mut self, sender: ActorId, receiver: Option<ActorId>, payload: Payload) {
        self.messages.push(Message {
            kind: payload.kind(),
            sender,
            receiver,
            payload_bytes: payload.bytes(),
            payload: Some(payload),
        });
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn bytes_sent(&self) -> usize {
        self.messages.iter().map(|m| m.payload_bytes).sum()
    }

    /// One JSON object per message.
    pub fn write_trace<W: Write>(&self, mut w: W) -> Result<()> {
        for m in &self.messages {
            serde_json::to_writer(&mut w, m)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}
