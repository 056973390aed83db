//! Multi-task training: supervised cross-entropy on labeled nodes plus the
//! clustering objectives on the rest, with early stopping, seeded repeats and
//! ablation switches.

mod hyper;
mod losses;
mod runs;
mod train;

pub use hyper::{HyperParams, KlScope};
pub use losses::{accuracy, class_loss, class_loss_on_tape, total_loss, LossComponents};
pub use runs::{
    ablate, mean_std, run_seeds, run_seeds_with_outcomes, split_for_seed, AblationVariant, RunResult, SeedSummary,
};
pub use train::{
    evaluate, train, EpochRecord, TrainOutcome, TrainReport, CLUSTER_STREAM, DROPOUT_STREAM, INIT_STREAM, SPLIT_STREAM,
};
