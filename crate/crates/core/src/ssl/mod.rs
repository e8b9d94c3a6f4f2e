//! Contrastive pre-training: batch assembly, NT-Xent loss and the training loop.

mod batch;
mod loss;
mod train;

pub(crate) use batch::load_working;
pub use batch::{assemble_batch, assemble_batch_from, Batch};
pub use loss::{nt_xent, NtXentConfig, NtXentOutput, NORM_EPS};
pub use train::{
    contrastive_step, fit_standardizer, pretrain, scaled_lr, PretrainConfig, PretrainSummary, SslModel, StepGrads,
    CHECKPOINT_FILE, LOSS_LOG_FILE,
};
