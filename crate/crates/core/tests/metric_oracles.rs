mod common;

use common::*;
use mritrans::metrics::{mse, ms_ssim, nmse, psnr, ssim, SsimParams};
use ndarray::Array3;
use proptest::prelude::*;

#[test]
fn twenty_random_pairs_match_naive_oracles() {
    let p = SsimParams::default();
    let started = std::time::Instant::now();
    for seed in 0..20u64 {
        let (a, b) = image_pair(seed, 176);
        let checks = [
            ("mse", mse(a.view(), b.view()).unwrap(), oracle_mse(&a, &b)),
            ("psnr", psnr(a.view(), b.view()).unwrap(), oracle_psnr(&a, &b)),
            ("nmse", nmse(b.view(), a.view()).unwrap(), oracle_nmse(&b, &a)),
            ("ssim", ssim(a.view(), b.view(), &p).unwrap(), oracle_ssim(&a, &b)),
            ("ms_ssim", ms_ssim(a.view(), b.view(), &p, 5).unwrap(), oracle_ms_ssim(&a, &b, 5)),
        ];
        for (name, got, want) in checks {
            assert!(
                rel_err(got, want) < 1e-6,
                "pair {seed}: {name} = {got}, oracle {want}"
            );
        }
    }
    assert!(started.elapsed().as_secs() < 120, "took {:?}", started.elapsed());
}

#[test]
fn closed_forms() {
    let p = SsimParams::default();
    let (a, _) = image_pair(99, 176);
    assert_eq!(ssim(a.view(), a.view(), &p).unwrap(), 1.0);
    assert_eq!(ms_ssim(a.view(), a.view(), &p, 5).unwrap(), 1.0);
    assert_eq!(mse(a.view(), a.view()).unwrap(), 0.0);
    assert_eq!(nmse(a.view(), a.view()).unwrap(), 0.0);
    assert_eq!(psnr(a.view(), a.view()).unwrap(), f64::INFINITY);

    let black = Array3::<u8>::zeros((32, 32, 3));
    let white = Array3::<u8>::from_elem((32, 32, 3), 255);
    assert_eq!(mse(black.view(), white.view()).unwrap(), 65025.0);
    assert_eq!(psnr(black.view(), white.view()).unwrap(), 0.0);
}

#[test]
fn four_scale_variant_matches_oracle_at_128() {
    let p = SsimParams::default();
    let (a, b) = image_pair(7, 128);
    let got = ms_ssim(a.view(), b.view(), &p, 4).unwrap();
    assert!(rel_err(got, oracle_ms_ssim(&a, &b, 4)) < 1e-6);
}

fn small_pair() -> impl Strategy<Value = (Array3<u8>, Array3<u8>)> {
    (any::<u64>(), 0u8..4).prop_map(|(seed, k)| {
        let (a, b) = image_pair(seed, 24 + 8 * k as usize);
        (a, b)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ssim_is_symmetric_and_bounded((a, b) in small_pair()) {
        let p = SsimParams::default();
        let ab = ssim(a.view(), b.view(), &p).unwrap();
        let ba = ssim(b.view(), a.view(), &p).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(ab <= 1.0 + 1e-12 && ab >= -1.0);
    }

    #[test]
    fn mse_psnr_agree((a, b) in small_pair()) {
        let m = mse(a.view(), b.view()).unwrap();
        let q = psnr(a.view(), b.view()).unwrap();
        prop_assert!(m >= 0.0);
        if m > 0.0 {
            prop_assert!((q - 10.0 * (65025.0 / m).log10()).abs() < 1e-9);
        } else {
            prop_assert!(q.is_infinite());
        }
    }

    #[test]
    fn ms_ssim_in_unit_interval((a, b) in small_pair()) {
        let p = SsimParams::default();
        let s = p.max_scales(a.dim().0);
        let v = ms_ssim(a.view(), b.view(), &p, s).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
    }
}
