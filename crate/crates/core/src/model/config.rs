use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    PlainResidual,
    SeResidual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    Unet,
    Unetpp,
}

/// Which same-level predecessors a nested fusion node reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipDensity {
    /// Every `X_{i,k}` with `k < j`.
    Dense,
    /// Only `X_{i,j-1}`.
    PreviousOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpsampleKind {
    Transposed,
    Bilinear,
}

macro_rules! snake_enum {
    ($t:ty { $($v:ident => $s:literal),+ $(,)? }) => {
        impl $t {
            pub fn as_str(self) -> &'static str {
                match self { $(<$t>::$v => $s),+ }
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok(<$t>::$v),)+
                    _ => Err(Error::Config(format!(
                        "unknown value {s:?}; expected one of: {}",
                        [$($s),+].join(", ")
                    ))),
                }
            }
        }
    };
}

snake_enum!(EncoderKind { PlainResidual => "plain_residual", SeResidual => "se_residual" });
snake_enum!(DecoderKind { Unet => "unet", Unetpp => "unetpp" });
snake_enum!(SkipDensity { Dense => "dense", PreviousOnly => "previous_only" });
snake_enum!(UpsampleKind { Transposed => "transposed", Bilinear => "bilinear" });

impl EncoderKind {
    /// Short label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            EncoderKind::PlainResidual => "ResNet",
            EncoderKind::SeResidual => "SEResNet",
        }
    }
}

impl DecoderKind {
    pub fn label(self) -> &'static str {
        match self {
            DecoderKind::Unet => "U-Net",
            DecoderKind::Unetpp => "U-Net++",
        }
    }
}

/// Grid position `X_{i,j}`: level `i`, column `j`. Column 0 is the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FusionNodeId {
    pub i: usize,
    pub j: usize,
}

impl FusionNodeId {
    pub const fn new(i: usize, j: usize) -> Self {
        FusionNodeId { i, j }
    }

    pub fn is_encoder(self) -> bool {
        self.j == 0
    }
}

impl fmt::Display for FusionNodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x_{}_{}", self.i, self.j)
    }
}

impl FromStr for FusionNodeId {
    type Err = Error;

    /// Accepts `x_1_0`, `x_{1,0}` and `1,0`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse node id {s:?}; expected e.g. x_1_0"));
        let t = s.trim();
        let t = t.strip_prefix("x_").or_else(|| t.strip_prefix("x")).unwrap_or(t);
        let t = t.trim_start_matches('{').trim_end_matches('}');
        let (a, b) = t.split_once(['_', ',']).ok_or_else(bad)?;
        Ok(FusionNodeId {
            i: a.trim().parse().map_err(|_| bad())?,
            j: b.trim().parse().map_err(|_| bad())?,
        })
    }
}

fn default_depth() -> usize {
    4
}
fn default_base() -> usize {
    64
}
fn default_max_channels() -> usize {
    512
}
fn default_reduction() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub encoder: EncoderKind,
    pub decoder: DecoderKind,
    /// Number of downsamplings; levels run `0..=depth`.
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_base")]
    pub base_channels: usize,
    #[serde(default = "default_max_channels")]
    pub max_channels: usize,
    #[serde(default = "default_reduction")]
    pub se_reduction: usize,
    #[serde(default = "GeneratorConfig::default_skip")]
    pub skip_density: SkipDensity,
    #[serde(default = "GeneratorConfig::default_upsample")]
    pub upsample: UpsampleKind,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            encoder: EncoderKind::SeResidual,
            decoder: DecoderKind::Unetpp,
            depth: default_depth(),
            base_channels: default_base(),
            max_channels: default_max_channels(),
            se_reduction: default_reduction(),
            skip_density: SkipDensity::Dense,
            upsample: UpsampleKind::Transposed,
        }
    }
}

impl GeneratorConfig {
    fn default_skip() -> SkipDensity {
        SkipDensity::Dense
    }
    fn default_upsample() -> UpsampleKind {
        UpsampleKind::Transposed
    }

    pub fn new(encoder: EncoderKind, decoder: DecoderKind) -> Self {
        GeneratorConfig {
            encoder,
            decoder,
            ..GeneratorConfig::default()
        }
    }

    pub fn with_base_channels(mut self, base: usize) -> Self {
        self.base_channels = base;
        self
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 1 {
            return Err(Error::Config("generator depth must be at least 1".into()));
        }
        if self.base_channels < 1 || self.max_channels < self.base_channels {
            return Err(Error::Config(format!(
                "invalid channel widths: base {}, cap {}",
                self.base_channels, self.max_channels
            )));
        }
        if self.se_reduction < 1 {
            return Err(Error::Config("SE reduction must be at least 1".into()));
        }
        Ok(())
    }

    /// Channel count at level `i`: `base * 2^i`, capped.
    pub fn channels(&self, level: usize) -> usize {
        let c = self.base_channels.saturating_mul(1usize.checked_shl(level as u32).unwrap_or(usize::MAX));
        c.min(self.max_channels)
    }

    /// Required divisor of the input size.
    pub fn size_multiple(&self) -> usize {
        1 << self.depth
    }

    pub fn check_input_size(&self, size: usize) -> Result<()> {
        let m = self.size_multiple();
        if size == 0 || size % m != 0 {
            return Err(Error::Config(format!(
                "input size {size} must be a positive multiple of 2^{} = {m}",
                self.depth
            )));
        }
        Ok(())
    }

    /// Decoder nodes in evaluation order (column by column).
    pub fn decoder_nodes(&self) -> Vec<FusionNodeId> {
        let l = self.depth;
        match self.decoder {
            DecoderKind::Unetpp => (1..=l)
                .flat_map(|j| (0..=l - j).map(move |i| FusionNodeId::new(i, j)))
                .collect(),
            DecoderKind::Unet => (1..=l).map(|j| FusionNodeId::new(l - j, j)).collect(),
        }
    }

    pub fn encoder_nodes(&self) -> Vec<FusionNodeId> {
        (0..=self.depth).map(|i| FusionNodeId::new(i, 0)).collect()
    }

    pub fn has_node(&self, id: FusionNodeId) -> bool {
        if id.j == 0 {
            id.i <= self.depth
        } else {
            self.decoder_nodes().contains(&id)
        }
    }

    /// The node whose output feeds the head.
    pub fn output_node(&self) -> FusionNodeId {
        FusionNodeId::new(0, self.depth)
    }

    /// Same-level predecessors read by decoder node `id`.
    pub fn same_level_inputs(&self, id: FusionNodeId) -> Vec<FusionNodeId> {
        match (self.decoder, self.skip_density) {
            (DecoderKind::Unet, _) => vec![FusionNodeId::new(id.i, 0)],
            (DecoderKind::Unetpp, SkipDensity::Dense) => {
                (0..id.j).map(|k| FusionNodeId::new(id.i, k)).collect()
            }
            (DecoderKind::Unetpp, SkipDensity::PreviousOnly) => {
                vec![FusionNodeId::new(id.i, id.j - 1)]
            }
        }
    }

    /// The deeper node upsampled into `id`.
    pub fn below_input(&self, id: FusionNodeId) -> FusionNodeId {
        FusionNodeId::new(id.i + 1, id.j - 1)
    }

    /// Short human label, e.g. `SEResNet & U-Net++`.
    pub fn label(&self) -> String {
        format!("{} & {}", self.encoder.label(), self.decoder.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscriminatorConfig {
    /// Stride-2 blocks.
    #[serde(default = "DiscriminatorConfig::default_n_down")]
    pub n_down: usize,
    #[serde(default = "default_base")]
    pub base_channels: usize,
    #[serde(default = "default_max_channels")]
    pub max_channels: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig {
            n_down: 3,
            base_channels: 64,
            max_channels: 512,
        }
    }
}

impl DiscriminatorConfig {
    fn default_n_down() -> usize {
        3
    }

    pub fn with_base_channels(mut self, base: usize) -> Self {
        self.base_channels = base;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_down < 1 {
            return Err(Error::Config("discriminator n_down must be at least 1".into()));
        }
        if self.base_channels < 1 || self.max_channels < self.base_channels {
            return Err(Error::Config(format!(
                "invalid discriminator widths: base {}, cap {}",
                self.base_channels, self.max_channels
            )));
        }
        Ok(())
    }

    /// Output channels of block `k` (`0..=n_down`).
    pub fn channels(&self, k: usize) -> usize {
        let c = self.base_channels.saturating_mul(1usize.checked_shl(k as u32).unwrap_or(usize::MAX));
        c.min(self.max_channels)
    }

    /// `(kernel, stride)` of every convolution, input to output.
    pub fn layer_stack(&self) -> Vec<(usize, usize)> {
        let mut layers = vec![(4, 2); self.n_down];
        layers.push((4, 1));
        layers.push((4, 1));
        layers
    }

    /// Receptive field of one output logit, in input pixels.
    pub fn receptive_field(&self) -> usize {
        self.layer_stack()
            .iter()
            .rev()
            .fold(1, |rf, &(k, s)| (rf - 1) * s + k)
    }

    /// Spatial size of the logit map for an `size x size` input.
    pub fn output_size(&self, size: usize) -> Option<usize> {
        self.layer_stack().iter().try_fold(size, |n, &(k, s)| {
            let padded = n + 2;
            (padded >= k).then(|| (padded - k) / s + 1)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_nodes_at_depth_four() {
        let cfg = GeneratorConfig::default();
        let nodes = cfg.decoder_nodes();
        assert_eq!(nodes.len(), 10);
        assert_eq!(nodes.iter().filter(|n| n.i == 0).count(), 4);
        for d in 1..=6 {
            assert_eq!(cfg.clone().with_depth(d).decoder_nodes().len(), d * (d + 1) / 2);
        }
    }

    #[test]
    fn node_inputs() {
        let cfg = GeneratorConfig::default();
        let n01 = FusionNodeId::new(0, 1);
        assert_eq!(cfg.same_level_inputs(n01), vec![FusionNodeId::new(0, 0)]);
        assert_eq!(cfg.below_input(n01), FusionNodeId::new(1, 0));
        let n04 = FusionNodeId::new(0, 4);
        assert_eq!(
            cfg.same_level_inputs(n04),
            (0..4).map(|k| FusionNodeId::new(0, k)).collect::<Vec<_>>()
        );
        assert_eq!(cfg.below_input(n04), FusionNodeId::new(1, 3));
        let prev = GeneratorConfig {
            skip_density: SkipDensity::PreviousOnly,
            ..cfg
        };
        assert_eq!(prev.same_level_inputs(n04), vec![FusionNodeId::new(0, 3)]);
    }

    #[test]
    fn unet_has_only_the_spine() {
        let cfg = GeneratorConfig::new(EncoderKind::PlainResidual, DecoderKind::Unet);
        let nodes = cfg.decoder_nodes();
        assert_eq!(nodes.len(), 4);
        assert!(cfg.has_node(FusionNodeId::new(0, 4)));
        assert!(!cfg.has_node(FusionNodeId::new(0, 2)));
        assert!(cfg.has_node(FusionNodeId::new(4, 0)));
        assert!(!cfg.has_node(FusionNodeId::new(5, 0)));
    }

    #[test]
    fn every_predecessor_precedes() {
        for dec in [DecoderKind::Unet, DecoderKind::Unetpp] {
            let cfg = GeneratorConfig::new(EncoderKind::SeResidual, dec);
            let order = cfg.decoder_nodes();
            for (pos, &n) in order.iter().enumerate() {
                let mut deps = cfg.same_level_inputs(n);
                deps.push(cfg.below_input(n));
                for d in deps {
                    assert!(cfg.has_node(d));
                    if d.j > 0 {
                        assert!(order[..pos].contains(&d), "{d} must precede {n}");
                    }
                }
            }
        }
    }

    #[test]
    fn channels_and_sizes() {
        let cfg = GeneratorConfig::default();
        assert_eq!((0..=4).map(|i| cfg.channels(i)).collect::<Vec<_>>(), [64, 128, 256, 512, 512]);
        assert!(cfg.check_input_size(256).is_ok());
        let err = cfg.check_input_size(100).unwrap_err().to_string();
        assert!(err.contains("16"), "{err}");
    }

    #[test]
    fn node_id_parsing() {
        for s in ["x_1_0", "x_{1,0}", "1,0"] {
            assert_eq!(s.parse::<FusionNodeId>().unwrap(), FusionNodeId::new(1, 0));
        }
        assert!("x_a".parse::<FusionNodeId>().is_err());
        assert_eq!(FusionNodeId::new(0, 3).to_string(), "x_0_3");
    }

    #[test]
    fn discriminator_geometry() {
        let d = DiscriminatorConfig::default();
        assert_eq!(d.output_size(256), Some(30));
        assert_eq!(d.output_size(128), Some(14));
        assert_eq!(d.receptive_field(), 70);
        let deeper = DiscriminatorConfig { n_down: 4, ..d };
        assert_eq!(deeper.receptive_field(), 142);
    }

    #[test]
    fn enum_strings() {
        assert_eq!("se_residual".parse::<EncoderKind>().unwrap(), EncoderKind::SeResidual);
        assert!("resnet".parse::<EncoderKind>().is_err());
        let cfg: GeneratorConfig = toml::from_str("encoder = \"plain_residual\"\ndecoder = \"unet\"").unwrap();
        assert_eq!(cfg.depth, 4);
        assert_eq!(cfg.label(), "ResNet & U-Net");
    }
}
