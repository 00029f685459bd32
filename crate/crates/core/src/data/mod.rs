//! Volume ingestion, 2.5D slab construction, dataset splits and batching.

pub mod batch;
pub mod manifest;
pub mod normalize;
pub mod preprocess;
pub mod resize;
pub mod slab;
pub mod volume;

pub use batch::{
    from_model_space, images_to_tensor, load_batch, load_pair_images, tensor_to_images,
    to_model_space, PairBatch, Resolution,
};
pub use manifest::{split_dataset, DatasetManifest, PairedSample, SampleEntry, Split};
pub use normalize::normalize_slice;
pub use preprocess::{run_preprocess, Anomaly, PreprocessOptions, PreprocessSummary};
pub use slab::{build_slab, default_center, Slab25D, SlabSource, SLAB_SIZE};
pub use volume::{Modality, ModalityPatterns, Task, VolumeRecord};
