#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod sim;
pub mod edl;
pub mod perception;
pub mod behavior;
pub mod rules;
pub mod bridge;
pub mod arbiter;
pub mod pipeline;
pub mod eval;
pub mod recording;
pub mod scenario;
pub mod error;

pub use arbiter::{FusionMode, Task};
pub use error::Error;
pub use eval::Report;
pub use perception::{Observation, PerceptionConfig};
pub use pipeline::ProtocolConfig;
pub use recording::Recording;
pub use rules::{Fact, Value};
pub use sim::{Frame, WorldConfig};
