//! Change-triggered screen capture.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptureTrigger {
    Change,
    PhaseBoundary,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenCapture {
    pub seq: u64,
    /// Seconds on the session clock.
    pub timestamp: f64,
    pub trigger: CaptureTrigger,
    pub frame: Frame,
}

/// Keeps one capture per distinct consecutive frame.
#[derive(Debug, Clone)]
pub struct CaptureRecorder {
    captures: Vec<ScreenCapture>,
    last: Frame,
    next_seq: u64,
}

impl CaptureRecorder {
    /// `baseline` is the frame already on screen; it is not captured.
    pub fn new(baseline: Frame) -> Self {
        CaptureRecorder { captures: Vec::new(), last: baseline, next_seq: 1 }
    }

    /// Records `frame` if it differs from the previous one.
    pub fn observe(&mut self, frame: &Frame, t: f64) -> Option<u64> {
        if *frame == self.last {
            return None;
        }
        Some(self.push(frame, t, CaptureTrigger::Change))
    }

    /// Records `frame` unconditionally.
    pub fn mark(&mut self, frame: &Frame, t: f64, trigger: CaptureTrigger) -> u64 {
        self.push(frame, t, trigger)
    }

    fn push(&mut self, frame: &Frame, t: f64, trigger: CaptureTrigger) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.captures.push(ScreenCapture { seq, timestamp: t, trigger, frame: frame.clone() });
        self.last = frame.clone();
        seq
    }

    pub fn captures(&self) -> &[ScreenCapture] {
        &self.captures
    }

    pub fn last_frame(&self) -> &Frame {
        &self.last
    }

    pub fn into_captures(self) -> Vec<ScreenCapture> {
        self.captures
    }
}

/// One poll of a watched session.
#[derive(Debug, Clone, PartialEq)]
pub enum FramePoll {
    Frame(f64, Frame),
    /// The session ended normally.
    Done,
    /// The session went away mid-watch.
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Watch {
    pub captures: Vec<ScreenCapture>,
    pub truncated: bool,
}

/// Polls until the session finishes, capturing each distinct frame.
pub fn watch_changes(baseline: Frame, mut poll: impl FnMut() -> FramePoll) -> Watch {
    let mut rec = CaptureRecorder::new(baseline);
    loop {
        match poll() {
            FramePoll::Frame(t, f) => {
                rec.observe(&f, t);
            }
            FramePoll::Done => return Watch { captures: rec.into_captures(), truncated: false },
            FramePoll::Closed => return Watch { captures: rec.into_captures(), truncated: true },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub seq: u64,
    pub timestamp: f64,
    pub trigger: CaptureTrigger,
    pub path: String,
}

/// Writes `frame-NNNN.txt` per capture plus `index.json`.
pub fn save_captures(dir: &Path, captures: &[ScreenCapture]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut index = Vec::new();
    for c in captures {
        let name = format!("frame-{:04}.txt", c.seq);
        std::fs::write(dir.join(&name), c.frame.text())?;
        index.push(IndexEntry { seq: c.seq, timestamp: c.timestamp, trigger: c.trigger, path: name });
    }
    std::fs::write(dir.join("index.json"), serde_json::to_vec_pretty(&index)?)
}

pub fn load_captures(dir: &Path, rows: usize, cols: usize) -> std::io::Result<Vec<ScreenCapture>> {
    let index: Vec<IndexEntry> = serde_json::from_slice(&std::fs::read(dir.join("index.json"))?)?;
    index
        .into_iter()
        .map(|e| {
            let text = std::fs::read_to_string(dir.join(&e.path))?;
            Ok(ScreenCapture { seq: e.seq, timestamp: e.timestamp, trigger: e.trigger, frame: Frame::from_text(rows, cols, &text) })
        })
        .collect()
}
