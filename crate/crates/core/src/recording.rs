//! JSON Lines recordings. The first line is a header with the world config;
//! every further line is one frame, optionally with its observation.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::eval::Assertion;
use crate::edl::EvidentialModel;
use crate::perception::{Observation, PerceptionConfig, PerceptionError};
use crate::pipeline::perceive_frames;
use crate::sim::{Frame, WorldConfig};

pub const RECORDING_VERSION: &str = "rec-v1";
pub const OBSERVED_VERSION: &str = "rec-obs-v1";

#[derive(Debug, thiserror::Error)]
pub enum RecordingError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unsupported version `{found}` (expected {RECORDING_VERSION} or {OBSERVED_VERSION})")]
    Version { line: usize, found: String },
    #[error("empty recording")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub config: WorldConfig,
    pub assertions: Vec<Assertion>,
    pub frames: Vec<Frame>,
    /// Present once the recording has been through perception.
    pub perception: Option<PerceptionConfig>,
    pub observations: Option<Vec<Observation>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: String,
    config: WorldConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    assertions: Vec<Assertion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    perception: Option<PerceptionConfig>,
}

#[derive(Serialize, Deserialize)]
struct FrameLine {
    version: String,
    #[serde(flatten)]
    frame: Frame,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    observation: Option<Observation>,
}

impl Recording {
    pub fn new(config: WorldConfig, frames: Vec<Frame>) -> Self {
        Recording { config, assertions: Vec::new(), frames, perception: None, observations: None }
    }

    /// Runs perception over every frame, replacing earlier observations.
    pub fn perceive(&mut self, config: &PerceptionConfig, model: &EvidentialModel) -> Result<(), PerceptionError> {
        self.observations = Some(perceive_frames(&self.frames, config, model)?);
        self.perception = Some(config.clone());
        Ok(())
    }

    pub fn version(&self) -> &'static str {
        if self.observations.is_some() {
            OBSERVED_VERSION
        } else {
            RECORDING_VERSION
        }
    }

    /// Scenario name: archetype and seed.
    pub fn name(&self) -> String {
        format!("{}-{}", self.config.archetype.as_deref().unwrap_or("scenario"), self.config.seed)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<(), RecordingError> {
        let version = self.version().to_string();
        let header = Header {
            version: version.clone(),
            config: self.config.clone(),
            assertions: self.assertions.clone(),
            perception: self.perception.clone(),
        };
        serde_json::to_writer(&mut w, &header).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
        for (k, f) in self.frames.iter().enumerate() {
            let line = FrameLine {
                version: version.clone(),
                frame: f.clone(),
                observation: self.observations.as_ref().map(|o| o[k].clone()),
            };
            serde_json::to_writer(&mut w, &line).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory cannot fail");
        out
    }

    pub fn read_from(r: impl BufRead) -> Result<Self, RecordingError> {
        let mut lines = r.lines().enumerate().filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
        let (_, first) = lines.next().ok_or(RecordingError::Empty)?;
        let header: Header =
            serde_json::from_str(&first?).map_err(|e| RecordingError::Parse { line: 1, message: e.to_string() })?;
        let observed = match header.version.as_str() {
            RECORDING_VERSION => false,
            OBSERVED_VERSION => true,
            _ => return Err(RecordingError::Version { line: 1, found: header.version }),
        };
        header.config.validate().map_err(|e| RecordingError::Parse { line: 1, message: e.to_string() })?;
        let mut frames = Vec::new();
        let mut observations = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            let l: FrameLine =
                serde_json::from_str(&line?).map_err(|e| RecordingError::Parse { line: line_no, message: e.to_string() })?;
            if l.version != header.version {
                return Err(RecordingError::Version { line: line_no, found: l.version });
            }
            match (observed, l.observation) {
                (true, Some(o)) => observations.push(o),
                (false, None) => {}
                (true, None) => {
                    return Err(RecordingError::Parse { line: line_no, message: "missing observation".into() });
                }
                (false, Some(_)) => {
                    return Err(RecordingError::Parse {
                        line: line_no,
                        message: format!("observation in a {RECORDING_VERSION} recording"),
                    });
                }
            }
            frames.push(l.frame);
        }
        Ok(Recording {
            config: header.config,
            assertions: header.assertions,
            frames,
            perception: header.perception,
            observations: observed.then_some(observations),
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RecordingError> {
        Self::read_from(bytes)
    }
}
