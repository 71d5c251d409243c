mod common;

use common::grad_suite::*;
use common::gradcheck::TOLERANCE;

fn run(group: fn(&mut Report)) {
    let mut r = Report::new();
    group(&mut r);
    assert!(!r.is_empty());
    for (name, err) in r {
        assert!(err < TOLERANCE, "{name}: relative error {err:e}");
    }
}

#[test]
fn conv2d() {
    run(conv2d_same_and_valid);
}

#[test]
fn maxpool2d() {
    run(maxpool);
}

#[test]
fn batchnorm() {
    run(batchnorm_train_and_infer);
}

#[test]
fn dense_layer() {
    run(dense);
}

#[test]
fn elementwise() {
    run(elementwise_ops);
}

#[test]
fn loss_functions() {
    run(losses);
}

#[test]
fn op_chains() {
    run(random_three_op_chains);
}

#[test]
fn network_a() {
    run(tiny_network_a);
}

#[test]
fn network_b1() {
    run(tiny_network_b1);
}
