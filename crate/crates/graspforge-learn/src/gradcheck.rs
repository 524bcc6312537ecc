//! Central finite-difference gradient checking.
//!
//! The analytic gradient of every parameter element is compared against
//! `(L(p + h) - L(p - h)) / 2h`. Elements whose difference quotient is
//! inconsistent across two step sizes sit on a relu kink (or similar
//! non-smooth point) where the comparison is meaningless; they are skipped
//! and counted, and callers bound the skip fraction.

use crate::mat::Mat;
use crate::trainer::ParamSet;

#[derive(Debug, Clone)]
pub struct GradcheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped: usize,
    /// `(param name, element index)` of the worst element.
    pub worst: Option<(String, usize)>,
}

impl GradcheckReport {
    pub fn skip_fraction(&self) -> f64 {
        if self.checked + self.skipped == 0 {
            0.0
        } else {
            self.skipped as f64 / (self.checked + self.skipped) as f64
        }
    }
}

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

/// Check all elements of all parameters.
///
/// `loss_fn` must be a pure function of the parameter values; `grads` is
/// the analytic gradient per parameter, in `params` order (one backward
/// pass of the same loss).
pub fn gradcheck_params(
    params: &mut ParamSet,
    grads: &[Mat],
    h: f64,
    mut loss_fn: impl FnMut(&ParamSet) -> f64,
) -> GradcheckReport {
    gradcheck_strided(params, grads, h, 1, &mut loss_fn)
}

/// Check every `stride`-th element (stride 1 = exhaustive). The offset
/// walks with the parameter index so no tensor region is systematically
/// missed.
pub fn gradcheck_strided(
    params: &mut ParamSet,
    grads: &[Mat],
    h: f64,
    stride: usize,
    loss_fn: &mut impl FnMut(&ParamSet) -> f64,
) -> GradcheckReport {
    assert_eq!(grads.len(), params.len());
    let mut report = GradcheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
        worst: None,
    };
    for p_idx in 0..params.len() {
        let count = params.mat(p_idx).data.len();
        let mut e = p_idx % stride.max(1);
        while e < count {
            let analytic = grads[p_idx].data[e];
            let original = params.mat(p_idx).data[e];

            let mut fd_at = |step: f64| {
                params.mat_mut(p_idx).data[e] = original + step;
                let plus = loss_fn(params);
                params.mat_mut(p_idx).data[e] = original - step;
                let minus = loss_fn(params);
                params.mat_mut(p_idx).data[e] = original;
                (plus - minus) / (2.0 * step)
            };
            let fd_full = fd_at(h);
            let fd_half = fd_at(h / 2.0);

            // Difference quotients that disagree with themselves indicate a
            // kink inside the stencil: unusable, not wrong.
            let consistency = (fd_full - fd_half).abs() / fd_full.abs().max(fd_half.abs()).max(1e-3);
            if consistency > 1e-3 {
                report.skipped += 1;
            } else {
                let err = rel_error(analytic, fd_half);
                if err > report.max_rel_error {
                    report.max_rel_error = err;
                    report.worst = Some((params.name(p_idx).to_string(), e));
                }
                report.checked += 1;
            }
            e += stride.max(1);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::Tape;
    use graspforge_core::rng::SeedStream;

    /// Single linear layer + mean squared error, hand-rolled through the
    /// tape via (pred - target) reduction tricks.
    #[test]
    fn linear_layer_mse_gradcheck_is_tight() {
        let mut stream = SeedStream::new(4);
        let mut params = ParamSet::new();
        params.init_linear("lin", 4, 3, &mut stream);
        let x = Mat::from_fn(6, 4, |_, _| stream.uniform_in(-1.0, 1.0));
        let target = Mat::from_fn(6, 3, |_, _| stream.uniform_in(-1.0, 1.0));

        // MSE via matmul ops: L = (1/n) sum (y - t)^2. Use (y - t) as
        // logits... simpler: express through tape primitives we have:
        // L = (1/n) * sum((y-t)^2) = (1/n) * trace((y-t)(y-t)^T); build it
        // elementwise with mul-by-self via relu split: instead, check the
        // cross-entropy head which is also smooth and covered elsewhere.
        // Here: L = mean CE of logits against a fixed soft target.
        let loss_fn = |p: &ParamSet| -> f64 {
            let mut tape = Tape::new();
            let ids = p.register(&mut tape);
            let xid = tape.leaf(x.clone());
            let z = tape.matmul(xid, ids[0]);
            let z = tape.add_row(z, ids[1]);
            let soft_targets = crate::mat::softmax_rows(&target);
            let ce = tape.softmax_cross_entropy(z, soft_targets, vec![1.0; 3], 6.0);
            tape.value(ce).data[0]
        };
        let grads: Vec<Mat> = {
            let mut tape = Tape::new();
            let ids = params.register(&mut tape);
            let xid = tape.leaf(x.clone());
            let z = tape.matmul(xid, ids[0]);
            let z = tape.add_row(z, ids[1]);
            let soft_targets = crate::mat::softmax_rows(&target);
            let ce = tape.softmax_cross_entropy(z, soft_targets, vec![1.0; 3], 6.0);
            tape.backward(ce);
            ids.iter().map(|id| tape.grad(*id).clone()).collect()
        };
        let report = gradcheck_params(&mut params, &grads, 1e-4, loss_fn);
        assert_eq!(report.skipped, 0);
        assert!(
            report.max_rel_error < 1e-8,
            "linear-case error {}",
            report.max_rel_error
        );
    }
}
