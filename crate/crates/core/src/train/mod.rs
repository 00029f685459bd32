pub mod adam;
pub mod checkpoint;
pub mod config;
pub mod trainer;

pub use adam::Adam;
pub use checkpoint::{latest_checkpoint, load_discriminator, load_generator, read_meta, resolve_checkpoint, CheckpointMeta};
pub use config::TrainConfig;
pub use trainer::{
    epoch_order, mean_l1, train_from_manifest, InMemoryPairs, ManifestTrainPairs, PairSource, StepLog, TrainOptions,
    TrainSummary, Trainer, LOG_FILE, LOG_HEADER,
};
