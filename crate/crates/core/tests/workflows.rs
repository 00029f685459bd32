//! End-to-end runs on tiny synthetic datasets: ablation dry run and
//! zero-shot evaluation of a checkpoint on another dataset.

mod common;

use std::path::Path;

use mritrans::data::{run_preprocess, DatasetManifest, ModalityPatterns, PreprocessOptions, Resolution, Task};
use mritrans::eval::{evaluate_checkpoint, run_ablation, AblationSpec, EvalOptions, ABLATION_CSV};
use mritrans::metrics::Metric;
use mritrans::model::{se_overhead, DiscriminatorConfig, GeneratorConfig};
use mritrans::train::{train_from_manifest, TrainConfig, TrainOptions};
use mritrans::{Cpu, CpuTrain};

fn dataset(root: &Path, name: &str, ids: &[&str]) -> DatasetManifest {
    let volumes = root.join(name).join("volumes");
    common::write_patients(&volumes, ids, 32, 5);
    run_preprocess(&PreprocessOptions {
        volume_root: volumes,
        out_root: root.join(name).join("slabs"),
        patterns: ModalityPatterns::defaults(),
        task: "T1->T2".parse::<Task>().unwrap(),
        split_ratio: 0.5,
        seed: 1,
        few_shot_cap: None,
        dataset: Some(name.into()),
    })
    .unwrap()
    .manifest
}

fn eval_128() -> EvalOptions {
    EvalOptions {
        resolution: Resolution::R128,
        lpips: None,
        save_images: None,
    }
}

#[test]
fn ablation_dry_run_table() {
    let dir = tempfile::tempdir().unwrap();
    let m = dataset(dir.path(), "alpha", &["a0", "a1", "a2", "a3"]);
    let generator = GeneratorConfig::default().with_base_channels(4);
    let spec = AblationSpec {
        generator: generator.clone(),
        discriminator: DiscriminatorConfig::default().with_base_channels(4),
        train: TrainConfig {
            resolution: Resolution::R128,
            ..TrainConfig::default()
        },
        eval: eval_128(),
        dry_run: true,
        parallel: false,
    };
    let out = dir.path().join("ablation");
    let table = run_ablation::<CpuTrain>(&spec, &m, &out, &Default::default()).unwrap();
    let labels: Vec<String> = table.rows.iter().map(|r| r.config.label()).collect();
    assert_eq!(labels, ["ResNet & U-Net", "SEResNet & U-Net", "ResNet & U-Net++", "SEResNet & U-Net++"]);
    let p: Vec<usize> = table.rows.iter().map(|r| r.params).collect();
    assert_eq!(p[1] - p[0], se_overhead(&generator));
    assert_eq!(p[3] - p[2], se_overhead(&generator));

    let csv = std::fs::read_to_string(out.join(ABLATION_CSV)).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "configuration,params,psnr,ssim,lpips,ms_ssim,mse,nmse");
    for (line, label) in lines[1..].iter().zip(&labels) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[0], label);
        for (k, c) in cells[2..].iter().enumerate() {
            if k == 2 {
                assert_eq!(*c, "unavailable");
            } else {
                assert!(c.parse::<f64>().is_ok(), "{line}");
            }
        }
    }
}

#[test]
fn zero_shot_evaluation_is_complete() {
    let dir = tempfile::tempdir().unwrap();
    let alpha = dataset(dir.path(), "alpha", &["a0", "a1"]);
    let beta = dataset(dir.path(), "beta", &["b0", "b1", "b2", "b3"]);
    let train = TrainConfig {
        resolution: Resolution::R128,
        epochs: 1,
        batch_size: 1,
        ..TrainConfig::default()
    };
    let run = dir.path().join("run");
    let opts = TrainOptions {
        run_dir: run.clone(),
        halt_after_epoch: None,
    };
    let dev = Default::default();
    let (_, summary) = train_from_manifest::<CpuTrain>(
        &alpha,
        &GeneratorConfig::default().with_base_channels(4),
        &DiscriminatorConfig::default().with_base_channels(4),
        &train,
        &opts,
        false,
        &dev,
    )
    .unwrap();
    assert!(summary.last_checkpoint.is_some());

    let report = evaluate_checkpoint::<Cpu>(&run, &beta, &eval_128(), &dev).unwrap();
    assert_eq!(report.per_sample.len(), beta.test.len());
    for m in Metric::ALL {
        let s = report.summary(m);
        if m == Metric::Lpips {
            assert!(s.mean.is_none());
        } else {
            assert_eq!(s.n + s.excluded, beta.test.len(), "{m}");
            assert!(s.mean.is_some(), "{m}");
        }
    }
    assert!(report.notes.iter().any(|n| n.starts_with("zero-shot")), "{:?}", report.notes);
}
