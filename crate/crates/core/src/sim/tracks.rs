//! Global-frame motion tracks and their CSV representation.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Footprint, Pose2};
use crate::ActorId;

pub const TRACK_CSV_HEADER: [&str; 9] =
    ["track_id", "frame", "kind", "x", "y", "theta", "speed", "length", "width"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActorKind {
    Vehicle,
    Pedestrian,
}

impl ActorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ActorKind::Vehicle => "vehicle",
            ActorKind::Pedestrian => "pedestrian",
        }
    }

    pub fn default_footprint(&self) -> Footprint {
        match self {
            ActorKind::Vehicle => Footprint::VEHICLE,
            ActorKind::Pedestrian => Footprint::PEDESTRIAN,
        }
    }
}

impl std::str::FromStr for ActorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "vehicle" => Ok(ActorKind::Vehicle),
            "pedestrian" => Ok(ActorKind::Pedestrian),
            other => Err(Error::Track(format!("unknown actor kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActorState {
    pub actor_id: ActorId,
    pub kind: ActorKind,
    pub pose: Pose2,
    pub footprint: Footprint,
    pub speed: f64,
}

/// Frames of actor states sampled every `dt` seconds; frame `k` is at
/// `t = k * dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSet {
    pub dt: f64,
    pub frames: Vec<Vec<ActorState>>,
}

impl TrackSet {
    pub fn new(dt: f64, frames: Vec<Vec<ActorState>>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
        }
        let mut frames = frames;
        for (k, frame) in frames.iter_mut().enumerate() {
            frame.sort_by_key(|a| a.actor_id);
            if frame.windows(2).any(|w| w[0].actor_id == w[1].actor_id) {
                return Err(Error::Track(format!("duplicate actor id in frame {k}")));
            }
            if let Some(a) = frame.iter().find(|a| !(a.speed >= 0.0)) {
                return Err(Error::Track(format!("negative speed for actor {} in frame {k}", a.actor_id)));
            }
        }
        Ok(Self { dt, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, k: usize) -> &[ActorState] {
        self.frames.get(k).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn actor(&self, k: usize, id: ActorId) -> Option<&ActorState> {
        let frame = self.frames.get(k)?;
        frame.binary_search_by_key(&id, |a| a.actor_id).ok().map(|i| &frame[i])
    }

    pub fn present_throughout(&self, id: ActorId, k0: usize, k1: usize) -> bool {
        (k0..=k1).all(|k| self.actor(k, id).is_some())
    }

    /// Every actor id appearing anywhere in the set, ascending.
    pub fn actor_ids(&self) -> Vec<ActorId> {
        let mut ids: Vec<ActorId> = self.frames.iter().flatten().map(|a| a.actor_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn next_free_id(&self) -> ActorId {
        self.actor_ids().last().map_or(0, |m| m + 1)
    }

    /// Frames `k0..=k1`, re-indexed from zero.
    pub fn window(&self, k0: usize, k1: usize) -> TrackSet {
        let frames = (k0..=k1).map(|k| self.frame(k).to_vec()).collect();
        TrackSet { dt: self.dt, frames }
    }

    /// Inserts one state per frame for a new actor. Panics if `states`
    /// is longer than the set or the id is already taken.
    pub fn insert_track(&mut self, states: &[ActorState]) {
        assert!(states.len() <= self.frames.len());
        for (frame, state) in self.frames.iter_mut().zip(states) {
            let pos = frame
                .binary_search_by_key(&state.actor_id, |a| a.actor_id)
                .expect_err("actor id already present");
            frame.insert(pos, *state);
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(TRACK_CSV_HEADER)?;
        for (k, frame) in self.frames.iter().enumerate() {
            for a in frame {
                w.write_record([
                    a.actor_id.to_string(),
                    k.to_string(),
                    a.kind.as_str().to_string(),
                    a.pose.x.to_string(),
                    a.pose.y.to_string(),
                    a.pose.theta.to_string(),
                    a.speed.to_string(),
                    a.footprint.length.to_string(),
                    a.footprint.width.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Track(e.to_string()))
    }

    /// Parses the track CSV. Frame numbers are shifted so the earliest frame
    /// becomes 0; each track must cover a contiguous frame range. Missing
    /// `length`/`width` fall back to the per-kind default footprint.
    pub fn read_csv<R: Read>(reader: R, dt: f64) -> Result<TrackSet> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let column = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Track(format!("missing column {name:?}")))
        };
        let cols: Vec<usize> = TRACK_CSV_HEADER[..7].iter().map(|n| column(n)).collect::<Result<_>>()?;
        let len_col = headers.iter().position(|h| h == "length");
        let wid_col = headers.iter().position(|h| h == "width");

        let mut rows: Vec<(i64, ActorState)> = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let num = |i: usize, what: &str| -> Result<f64> {
                field(i)
                    .parse::<f64>()
                    .map_err(|_| Error::Track(format!("row {}: bad {what} {:?}", line + 2, field(i))))
            };
            let actor_id: ActorId = field(cols[0])
                .parse()
                .map_err(|_| Error::Track(format!("row {}: bad track_id", line + 2)))?;
            let frame: i64 = field(cols[1])
                .parse()
                .map_err(|_| Error::Track(format!("row {}: bad frame", line + 2)))?;
            let kind: ActorKind = field(cols[2]).parse()?;
            let pose = Pose2::new(num(cols[3], "x")?, num(cols[4], "y")?, num(cols[5], "theta")?);
            let speed = num(cols[6], "speed")?;
            let dims = |c: Option<usize>| -> Result<Option<f64>> {
                match c.map(field).filter(|s| !s.is_empty()) {
                    None => Ok(None),
                    Some(s) => s
                        .parse::<f64>()
                        .map(Some)
                        .map_err(|_| Error::Track(format!("row {}: bad footprint {s:?}", line + 2))),
                }
            };
            let default = kind.default_footprint();
            let footprint = Footprint::new(
                dims(len_col)?.unwrap_or(default.length),
                dims(wid_col)?.unwrap_or(default.width),
            )?;
            rows.push((frame, ActorState { actor_id, kind, pose, footprint, speed }));
        }
        if rows.is_empty() {
            return TrackSet::new(dt, Vec::new());
        }

        let mut per_track: BTreeMap<ActorId, Vec<i64>> = BTreeMap::new();
        for (f, a) in &rows {
            per_track.entry(a.actor_id).or_default().push(*f);
        }
        for (id, frames) in per_track.iter_mut() {
            frames.sort_unstable();
            if frames.windows(2).any(|w| w[1] != w[0] + 1) {
                return Err(Error::Track(format!("track {id} has non-contiguous or duplicate frames")));
            }
        }
        let first = rows.iter().map(|(f, _)| *f).min().unwrap_or(0);
        let last = rows.iter().map(|(f, _)| *f).max().unwrap_or(0);
        let mut frames = vec![Vec::new(); (last - first + 1) as usize];
        for (f, a) in rows {
            frames[(f - first) as usize].push(a);
        }
        TrackSet::new(dt, frames)
    }
}
