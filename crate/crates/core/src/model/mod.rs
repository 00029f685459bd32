//! Generator, discriminator and their building blocks.

pub mod blocks;
pub mod config;
pub mod conv;
pub mod discriminator;
pub mod generator;
pub mod init;
pub mod registry;
pub mod se;

pub use config::{
    DecoderKind, DiscriminatorConfig, EncoderKind, FusionNodeId, GeneratorConfig, SkipDensity,
    UpsampleKind,
};
pub use discriminator::Discriminator;
pub use generator::{decoder_panel_nodes, encoder_panel_nodes, Generator};
pub use registry::{se_overhead, toggle_se, NamedParam, NamedParams};
pub use se::{se_param_count, se_recalibrate, SeBlock};
