//! Supervised protocols on top of an encoder: linear probing, fine-tuning and
//! subset fine-tuning, plus metrics and report rendering.

mod metrics;
mod report;
mod subset;
mod train;

pub use metrics::{
    angular_error, argmax, parse_predictions_csv, predictions_csv, summarize, wrap_deg, EvalReport, ItemPrediction,
    UNINFORMATIVE_ERROR_DEG,
};
pub use report::{load_report, render_csv, render_curve_csv, render_markdown, save_report};
pub use subset::{subset_select, total_hours, validation_split, SubsetAmount};
pub use train::{
    evaluate, evaluate_predictions, train_heads, EncoderInit, EpochRecord, EvalConfig, EvalModel, EvalProtocol,
    ProtocolMode, TrainOutcome,
};
