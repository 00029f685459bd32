//! Paired MRI modality translation.
//!
//! A 2.5D slab pipeline feeds a conditional GAN whose generator pairs a
//! residual encoder (optionally with squeeze-and-excitation gates) with a
//! nested U-Net decoder, judged by a patch discriminator and trained on an
//! adversarial + L1 + MS-SSIM objective.
//!
//! ```
//! use burn::backend::NdArray;
//! use burn::prelude::*;
//! use mritrans::model::{DecoderKind, EncoderKind, Generator, GeneratorConfig};
//!
//! let cfg = GeneratorConfig::new(EncoderKind::SeResidual, DecoderKind::Unetpp).with_base_channels(4);
//! let dev = Default::default();
//! let g = Generator::<NdArray>::new(&cfg, 0, &dev).unwrap();
//! let x = Tensor::<NdArray, 4>::zeros([1, 3, 64, 64], &dev);
//! assert_eq!(g.forward(x).unwrap().dims(), [1, 3, 64, 64]);
//! ```

pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod model;
pub mod objectives;
pub mod train;

pub use error::{Error, ErrorClass, Result};

/// CPU inference backend.
pub type Cpu = burn::backend::NdArray<f32>;
/// CPU training backend.
pub type CpuTrain = burn::backend::Autodiff<Cpu>;

/// Published full-scale scores. They need the complete BraTS 2023 corpus and
/// 200 epochs, so nothing here is checked against a desk-scale run.
pub mod reference {
    /// PSNR, SSIM, LPIPS, MS-SSIM, MSE, NMSE.
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct Scores {
        pub psnr: f64,
        pub ssim: f64,
        pub lpips: f64,
        pub ms_ssim: f64,
        pub mse: f64,
        pub nmse: f64,
    }

    /// T1->T2 on BraTS 2023 at 256 px.
    pub const T1_T2_256: Scores = Scores {
        psnr: 26.9337,
        ssim: 0.9137,
        lpips: 0.0850,
        ms_ssim: 0.9342,
        mse: 146.4111,
        nmse: 0.0784,
    };

    /// T1->T2 on BraTS 2023 at 128 px.
    pub const T1_T2_128: Scores = Scores {
        psnr: 28.3101,
        ssim: 0.9281,
        lpips: 0.0403,
        ms_ssim: 0.9570,
        mse: 106.4440,
        nmse: 0.0605,
    };

    /// Ablation rows in grid order (ResNet & U-Net first, SEResNet & U-Net++ last).
    pub const ABLATION_T1_T2: [(&str, Scores); 4] = [
        ("ResNet & U-Net", Scores { psnr: 26.7258, ssim: 0.9108, lpips: 0.0873, ms_ssim: 0.9299, mse: 152.4275, nmse: 0.0811 }),
        ("SEResNet & U-Net", Scores { psnr: 26.7753, ssim: 0.9128, lpips: 0.0876, ms_ssim: 0.9322, mse: 152.8909, nmse: 0.0818 }),
        ("ResNet & U-Net++", Scores { psnr: 26.8909, ssim: 0.9123, lpips: 0.0781, ms_ssim: 0.9328, mse: 148.7874, nmse: 0.0802 }),
        ("SEResNet & U-Net++", T1_T2_256),
    ];
}

// The book's code samples run as doc-tests of these empty modules.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/preprocessing.md")]
    mod preprocessing {}
    #[doc = include_str!("../../../book/src/generator.md")]
    mod generator {}
    #[doc = include_str!("../../../book/src/discriminator.md")]
    mod discriminator {}
    #[doc = include_str!("../../../book/src/objectives.md")]
    mod objectives {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/reference.md")]
    mod reference {}
}
