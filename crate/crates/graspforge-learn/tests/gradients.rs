//! Finite-difference oracles for the tape: an exhaustive per-op suite plus
//! full-model checks of both networks on 32-point toy clouds.

use graspforge_core::rng::SeedStream;
use graspforge_learn::cvae::{CoseCvae, CvaeConfig};
use graspforge_learn::evaluator::{EvalSample, EvaluatorConfig, GraspEvaluator};
use graspforge_learn::gradcheck::gradcheck_params;
use graspforge_learn::mat::{softmax_rows, Mat};
use graspforge_learn::tape::{Tape, VarId};
use graspforge_learn::trainer::ParamSet;

const H: f64 = 1e-4;
const TOL: f64 = 1e-4;

fn random_mat(rows: usize, cols: usize, stream: &mut SeedStream) -> Mat {
    Mat::from_fn(rows, cols, |_, _| stream.uniform_in(-1.0, 1.0))
}

/// Generic harness: `build` maps registered leaf ids to a scalar loss id.
fn check_op(name: &str, shapes: &[(usize, usize)], build: impl Fn(&mut Tape, &[VarId]) -> VarId) {
    let mut stream = SeedStream::new(0xC0FFEE ^ name.len() as u64);
    let mut params = ParamSet::new();
    for (i, &(r, c)) in shapes.iter().enumerate() {
        params.add(format!("{name}.in{i}"), random_mat(r, c, &mut stream));
    }
    let grads: Vec<Mat> = {
        let mut tape = Tape::new();
        let ids = params.register(&mut tape);
        let loss = build(&mut tape, &ids);
        tape.backward(loss);
        ids.iter().map(|id| tape.grad(*id).clone()).collect()
    };
    let report = gradcheck_params(&mut params, &grads, H, |p| {
        let mut tape = Tape::new();
        let ids = p.register(&mut tape);
        let loss = build(&mut tape, &ids);
        tape.value(loss).data[0]
    });
    assert!(
        report.max_rel_error < TOL,
        "{name}: max rel error {} at {:?}",
        report.max_rel_error,
        report.worst
    );
    assert!(
        report.skip_fraction() < 0.05,
        "{name}: skipped {} of {}",
        report.skipped,
        report.skipped + report.checked
    );
}

/// Reduce any matrix to a scalar with fixed weights (keeps gradients dense).
fn reduce(tape: &mut Tape, x: VarId) -> VarId {
    let (r, c) = {
        let v = tape.value(x);
        (v.rows, v.cols)
    };
    let left = tape.leaf(Mat::from_fn(1, r, |_, j| 0.3 + 0.1 * j as f64));
    let right = tape.leaf(Mat::from_fn(c, 1, |i, _| 0.7 - 0.05 * i as f64));
    let row = tape.matmul(left, x);
    tape.matmul(row, right)
}

#[test]
fn op_matmul() {
    check_op("matmul", &[(4, 5), (5, 3)], |tape, ids| {
        let y = tape.matmul(ids[0], ids[1]);
        reduce(tape, y)
    });
}

#[test]
fn op_add_row() {
    check_op("add_row", &[(6, 4), (1, 4)], |tape, ids| {
        let y = tape.add_row(ids[0], ids[1]);
        reduce(tape, y)
    });
}

#[test]
fn op_add_and_scale() {
    check_op("add_scale", &[(3, 3), (3, 3)], |tape, ids| {
        let y = tape.add(ids[0], ids[1]);
        let y = tape.scale(y, -1.7);
        reduce(tape, y)
    });
}

#[test]
fn op_relu() {
    check_op("relu", &[(5, 4)], |tape, ids| {
        let y = tape.relu(ids[0]);
        reduce(tape, y)
    });
}

#[test]
fn op_max_pool_rows() {
    check_op("max_pool", &[(7, 3)], |tape, ids| {
        let y = tape.max_pool_rows(ids[0]);
        reduce(tape, y)
    });
}

#[test]
fn op_broadcast_rows() {
    check_op("broadcast", &[(1, 4)], |tape, ids| {
        let y = tape.broadcast_rows(ids[0], 5);
        reduce(tape, y)
    });
}

#[test]
fn op_concat_cols() {
    check_op("concat", &[(4, 2), (4, 3)], |tape, ids| {
        let y = tape.concat_cols(ids[0], ids[1]);
        reduce(tape, y)
    });
}

#[test]
fn op_softmax_cross_entropy() {
    let targets = Mat::from_fn(5, 4, |i, j| if j == (i + 1) % 4 { 1.0 } else { 0.0 });
    let weights = vec![0.5, 2.0, 1.0, 1.5];
    check_op("ce", &[(5, 4)], move |tape, ids| {
        tape.softmax_cross_entropy(ids[0], targets.clone(), weights.clone(), 5.0)
    });
}

#[test]
fn op_gaussian_kl() {
    check_op("kl", &[(1, 6), (1, 6)], |tape, ids| {
        tape.gaussian_kl(ids[0], ids[1])
    });
}

#[test]
fn op_reparameterize() {
    let mut stream = SeedStream::new(99);
    let noise = Mat::from_fn(1, 6, |_, _| stream.gaussian());
    check_op("reparam", &[(1, 6), (1, 6)], move |tape, ids| {
        let z = tape.reparameterize(ids[0], ids[1], noise.clone());
        reduce(tape, z)
    });
}

#[test]
fn full_cvae_gradcheck_on_toy_cloud() {
    let mut stream = SeedStream::new(7);
    let model = CoseCvae::new(CvaeConfig::toy(3), 42);
    let o_mat = random_mat(32, 3, &mut stream);
    let targets = Mat::from_fn(32, 3, |i, j| if j == i % 3 { 1.0 } else { 0.0 });
    let noise = Mat::from_fn(1, model.cfg.latent_dim, |_, _| stream.gaussian());
    let weights = vec![1.0, 2.0, 1.5];

    let mut params = model.params().clone();
    let grads = model.grads_with_params(&params, &o_mat, &targets, &noise, &weights);
    let report = gradcheck_params(&mut params, &grads, H, |p| {
        model.loss_with_params(p, &o_mat, &targets, &noise, &weights)
    });
    assert!(
        report.max_rel_error < TOL,
        "cvae: max rel error {} at {:?} ({} checked, {} skipped)",
        report.max_rel_error,
        report.worst,
        report.checked,
        report.skipped
    );
    assert!(report.skip_fraction() < 0.02);
}

#[test]
fn full_evaluator_gradcheck_on_toy_clouds() {
    let mut stream = SeedStream::new(8);
    let model = GraspEvaluator::new(EvaluatorConfig::toy(4), 43);
    let batch: Vec<EvalSample> = (0..2)
        .map(|i| EvalSample {
            scene: random_mat(32, 3, &mut stream),
            hand: {
                let mut h = Mat::zeros(32, 7);
                for r in 0..32 {
                    for c in 0..3 {
                        h.set(r, c, stream.uniform_in(-1.0, 1.0));
                    }
                    h.set(r, 3 + r % 4, 1.0);
                }
                h
            },
            label: (i % 3) as u8,
        })
        .collect();

    let mut params = model.params().clone();
    let grads = model.grads_with_params(&params, &batch);
    let report = gradcheck_params(&mut params, &grads, H, |p| model.loss_with_params(p, &batch));
    assert!(
        report.max_rel_error < TOL,
        "evaluator: max rel error {} at {:?}",
        report.max_rel_error,
        report.worst
    );
    assert!(report.skip_fraction() < 0.02);
}

#[test]
fn softmax_matches_probability_axioms() {
    let mut stream = SeedStream::new(4);
    let logits = random_mat(16, 6, &mut stream);
    let sm = softmax_rows(&logits);
    for i in 0..16 {
        let sum: f64 = sm.row(i).iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }
}
