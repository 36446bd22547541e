//! Hyperparameter tuners and the cross-validated pipeline objective.
//!
//! Tuners maximise. A lower-is-better goal is negated before it reaches
//! them (see [`Goal::oriented`]). An objective error scores 0 and is flagged
//! in the trace. Repeated specs are served from a cache but still count
//! against the budget.

mod de;
mod pipeline;
mod swift;
mod trace;

pub use de::{de_optimize, default_np, mutate, DeConfig};
pub use pipeline::{evaluate_pipeline, final_fit_and_test, fit_and_score, CvOutcome, Goal};
pub use swift::{replay_weights, swift_optimize, weight_delta, SwiftConfig};
pub use trace::{Evaluation, ItemChoice, OptimizerTrace, PipelineSpec};
