mod common;

use common::se_closed_form;
use burn::backend::NdArray;
use burn::module::Module;
use burn::prelude::*;
use burn::tensor::Distribution;
use mritrans::eval::ablation_grid;
use mritrans::model::{
    decoder_panel_nodes, encoder_panel_nodes, se_overhead, toggle_se, DecoderKind, Discriminator,
    DiscriminatorConfig, EncoderKind, FusionNodeId, Generator, GeneratorConfig, NamedParams,
};

type B = NdArray<f32>;

fn small(enc: EncoderKind, dec: DecoderKind) -> GeneratorConfig {
    GeneratorConfig::new(enc, dec).with_base_channels(4)
}

#[test]
fn depth_four_has_ten_fusion_nodes_and_all_panel_nodes() {
    let cfg = GeneratorConfig::default();
    assert_eq!(cfg.depth, 4);
    assert_eq!(cfg.decoder_nodes().len(), 10);
    for l in 1..=6 {
        assert_eq!(cfg.clone().with_depth(l).decoder_nodes().len(), l * (l + 1) / 2);
    }

    let cfg = small(EncoderKind::SeResidual, DecoderKind::Unetpp);
    let enc = encoder_panel_nodes(&cfg);
    let dec = decoder_panel_nodes(&cfg);
    assert_eq!(enc, (1..=4).map(|i| FusionNodeId::new(i, 0)).collect::<Vec<_>>());
    assert_eq!(dec, (1..=4).map(|j| FusionNodeId::new(0, j)).collect::<Vec<_>>());

    let dev = Default::default();
    let g = Generator::<B>::new(&cfg, 3, &dev).unwrap();
    let x = Tensor::<B, 4>::random([1, 3, 64, 64], Distribution::Uniform(-1.0, 1.0), &dev);
    let maps = g.dump_feature_maps(x.clone(), &enc).unwrap();
    let sizes: Vec<usize> = maps.iter().map(|(_, m)| m.dims()[1]).collect();
    assert_eq!(sizes, [32, 16, 8, 4]);
    let maps = g.dump_feature_maps(x.clone(), &dec).unwrap();
    assert!(maps.iter().all(|(_, m)| m.dims() == [1, 64, 64]));

    let unet = Generator::<B>::new(&small(EncoderKind::SeResidual, DecoderKind::Unet), 3, &dev).unwrap();
    let err = unet.dump_feature_maps(x, &[FusionNodeId::new(0, 2)]).unwrap_err();
    assert_eq!(err.class(), mritrans::ErrorClass::Usage);
}

#[test]
fn parameter_orderings_hold_for_the_ablation_grid() {
    let dev = Default::default();
    let base = GeneratorConfig::default().with_base_channels(8);
    let mut counts = Vec::new();
    for cfg in ablation_grid(&base) {
        let g = Generator::<B>::new(&cfg, 0, &dev).unwrap();
        let enumerated: usize = g.named_params().iter().map(|p| p.numel()).sum();
        assert_eq!(enumerated, g.num_params(), "{}", cfg.label());
        counts.push((cfg, g.num_params()));
    }
    // grid order: plain/unet, se/unet, plain/unetpp, se/unetpp
    let n: Vec<usize> = counts.iter().map(|(_, n)| *n).collect();
    assert_eq!(n[1] - n[0], se_closed_form(&counts[0].0));
    assert_eq!(n[3] - n[2], se_closed_form(&counts[2].0));
    assert_eq!(se_closed_form(&counts[0].0), se_overhead(&counts[0].0));
    assert!(n[2] > n[0] && n[3] > n[1], "nested decoder adds parameters: {n:?}");
    assert!(n[0] < n[1] && n[1] < n[3] && n[0] < n[2], "{n:?}");
    assert_eq!(toggle_se(&counts[0].0), counts[1].0);

    let d = DiscriminatorConfig::default().with_base_channels(8);
    let canonical = DiscriminatorConfig { n_down: 4, ..d.clone() };
    let ds = Discriminator::<B>::new(&d, 0, &dev).unwrap().num_params();
    let dc = Discriminator::<B>::new(&canonical, 0, &dev).unwrap().num_params();
    assert!(ds < dc, "{ds} vs {dc}");
}

#[test]
fn generator_keeps_shape_and_stays_inside_the_open_interval() {
    let dev = Default::default();
    for (size, batch) in [(128usize, 2usize), (256, 1)] {
        for cfg in ablation_grid(&GeneratorConfig::default().with_base_channels(4)) {
            let g = Generator::<B>::new(&cfg, 9, &dev).unwrap();
            let x = Tensor::<B, 4>::random([batch, 3, size, size], Distribution::Uniform(-1.0, 1.0), &dev);
            let y = g.forward(x).unwrap();
            assert_eq!(y.dims(), [batch, 3, size, size]);
            let v: Vec<f32> = y.into_data().to_vec().unwrap();
            assert!(v.iter().all(|&p| p > -1.0 && p < 1.0), "{}", cfg.label());
        }
    }
}

#[test]
fn discriminator_emits_a_patch_map() {
    let dev = Default::default();
    let d = Discriminator::<B>::new(&DiscriminatorConfig::default().with_base_channels(4), 2, &dev).unwrap();
    for (size, out) in [(128usize, 14usize), (256, 30)] {
        let x = Tensor::<B, 4>::random([1, 3, size, size], Distribution::Uniform(-1.0, 1.0), &dev);
        let y = d.try_forward(x.clone(), x).unwrap();
        assert_eq!(y.dims(), [1, 1, out, out]);
        let v: Vec<f32> = y.into_data().to_vec().unwrap();
        assert!(v.iter().all(|p| p.is_finite()));
    }
}
