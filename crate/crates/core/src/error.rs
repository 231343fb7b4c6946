use crate::arbiter::ArbiterError;
use crate::behavior::BehaviorError;
use crate::bridge::BridgeError;
use crate::edl::EdlError;
use crate::eval::EvalError;
use crate::perception::PerceptionError;
use crate::pipeline::PipelineError;
use crate::recording::RecordingError;
use crate::rules::RuleError;
use crate::sim::SimError;

/// Any failure of the pipeline, by stage.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Edl(#[from] EdlError),
    #[error(transparent)]
    Behavior(#[from] BehaviorError),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Arbiter(#[from] ArbiterError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Recording(#[from] RecordingError),
}
