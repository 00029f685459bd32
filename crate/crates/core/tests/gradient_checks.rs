mod common;

use common::grad::{se_recalibrate_error, total_generator_loss_error, TOLERANCE};

#[test]
fn se_recalibrate_gradient() {
    let worst = se_recalibrate_error();
    assert!(worst < TOLERANCE, "relative error {worst}");
}

#[test]
fn total_generator_loss_gradient() {
    let started = std::time::Instant::now();
    let worst = total_generator_loss_error();
    assert!(worst < TOLERANCE, "relative error {worst}");
    assert!(started.elapsed().as_secs() < 60, "took {:?}", started.elapsed());
}
