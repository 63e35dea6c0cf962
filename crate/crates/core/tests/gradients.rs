mod common;

use common::grads::{self, Worst};

fn check(what: &str, w: Worst, tol: f64) {
    assert!(w.resolved < tol, "{what}: relative error {:e} (raw {:e})", w.resolved, w.raw);
}

#[test]
fn every_op_matches_finite_differences() {
    for (name, w) in grads::op_errors(10) {
        check(name, w, 1e-6);
    }
}

#[test]
fn encoder_stack_matches_finite_differences() {
    for seed in 0..3 {
        check(&format!("seed {seed}"), grads::encoder_stack_error(seed), 1e-6);
    }
}

#[test]
fn span_loss_gradient() {
    check("span", grads::span_loss_errors(20), 1e-4);
}

#[test]
fn classifier_loss_gradient() {
    check("classifier", grads::classifier_loss_errors(20), 1e-4);
}

#[test]
fn crf_nll_gradient() {
    check("crf", grads::crf_nll_errors(20), 1e-4);
}
