//! Reverse-mode autodiff over [`Mat`] values.
//!
//! Forward values are computed eagerly as ops are recorded; `backward` runs
//! the recorded ops in reverse, accumulating gradients. Targets, class
//! weights and reparameterization noise enter as constants, so gradients
//! flow only to genuine inputs/parameters.

use crate::mat::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId(pub(crate) usize);

enum Op {
    Leaf,
    /// `a (r x k) * b (k x c)`
    MatMul(VarId, VarId),
    /// `relu(x * w + bias)` fused: one node for the whole dense layer.
    AffineRelu {
        x: VarId,
        w: VarId,
        bias: VarId,
    },
    /// `a (K x C) + bias (1 x C)` broadcast over rows
    AddRow(VarId, VarId),
    Add(VarId, VarId),
    Scale(VarId, f64),
    Relu(VarId),
    /// Column-wise max over rows -> (1 x C); argmax rows recorded.
    MaxPoolRows(VarId, Vec<u32>),
    /// (1 x C) -> (K x C)
    BroadcastRows(VarId),
    /// `[a | b]` by columns
    ConcatCols(VarId, VarId),
    /// Weighted softmax cross-entropy against constant targets -> (1 x 1).
    /// `value = (1/norm) * sum_i sum_c w_c t_ic (-log softmax(l_i)_c)`
    SoftmaxCrossEntropy {
        logits: VarId,
        targets: Mat,
        class_weights: Vec<f64>,
        norm: f64,
        /// softmax cached at forward
        probs: Mat,
    },
    /// KL(N(mu, diag(exp(s))^2) || N(0, I)) -> (1 x 1)
    GaussianKl { mu: VarId, log_sigma: VarId },
    /// `z = mu + exp(s) .* noise`, noise constant
    Reparameterize {
        mu: VarId,
        log_sigma: VarId,
        noise: Mat,
    },
}

struct Node {
    value: Mat,
    grad: Mat,
    op: Op,
}

/// A single-use computation graph.
pub struct Tape {
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, value: Mat, op: Op) -> VarId {
        let grad = Mat::zeros(value.rows, value.cols);
        self.nodes.push(Node { value, grad, op });
        VarId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Mat) -> VarId {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, id: VarId) -> &Mat {
        &self.nodes[id.0].value
    }

    pub fn grad(&self, id: VarId) -> &Mat {
        &self.nodes[id.0].grad
    }

    pub fn matmul(&mut self, a: VarId, b: VarId) -> VarId {
        let value = self.nodes[a.0].value.matmul(&self.nodes[b.0].value);
        self.push(value, Op::MatMul(a, b))
    }

    /// Dense layer with relu: `relu(x * w + bias)`.
    pub fn affine_relu(&mut self, x: VarId, w: VarId, bias: VarId) -> VarId {
        let xv = &self.nodes[x.0].value;
        let wv = &self.nodes[w.0].value;
        let bv = &self.nodes[bias.0].value;
        assert_eq!(bv.rows, 1);
        assert_eq!(wv.cols, bv.cols);
        let mut value = xv.matmul(wv);
        for i in 0..value.rows {
            let row = &mut value.data[i * value.cols..(i + 1) * value.cols];
            for (v, &b) in row.iter_mut().zip(&bv.data) {
                *v += b;
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        self.push(value, Op::AffineRelu { x, w, bias })
    }

    pub fn add_row(&mut self, a: VarId, bias: VarId) -> VarId {
        let x = &self.nodes[a.0].value;
        let b = &self.nodes[bias.0].value;
        assert_eq!(b.rows, 1);
        assert_eq!(x.cols, b.cols);
        let mut value = x.clone();
        for i in 0..value.rows {
            for j in 0..value.cols {
                value.data[i * value.cols + j] += b.data[j];
            }
        }
        self.push(value, Op::AddRow(a, bias))
    }

    pub fn add(&mut self, a: VarId, b: VarId) -> VarId {
        let mut value = self.nodes[a.0].value.clone();
        value.add_assign(&self.nodes[b.0].value);
        self.push(value, Op::Add(a, b))
    }

    pub fn scale(&mut self, a: VarId, s: f64) -> VarId {
        let mut value = self.nodes[a.0].value.clone();
        value.scale_assign(s);
        self.push(value, Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: VarId) -> VarId {
        let mut value = self.nodes[a.0].value.clone();
        for v in &mut value.data {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        self.push(value, Op::Relu(a))
    }

    pub fn max_pool_rows(&mut self, a: VarId) -> VarId {
        let x = &self.nodes[a.0].value;
        assert!(x.rows > 0);
        let mut value = Mat::zeros(1, x.cols);
        let mut argmax = vec![0u32; x.cols];
        for j in 0..x.cols {
            let mut best = f64::NEG_INFINITY;
            for i in 0..x.rows {
                let v = x.get(i, j);
                if v > best {
                    best = v;
                    argmax[j] = i as u32;
                }
            }
            value.data[j] = best;
        }
        self.push(value, Op::MaxPoolRows(a, argmax))
    }

    pub fn broadcast_rows(&mut self, a: VarId, k: usize) -> VarId {
        let x = &self.nodes[a.0].value;
        assert_eq!(x.rows, 1);
        let mut value = Mat::zeros(k, x.cols);
        for i in 0..k {
            value.data[i * x.cols..(i + 1) * x.cols].copy_from_slice(&x.data);
        }
        self.push(value, Op::BroadcastRows(a))
    }

    pub fn concat_cols(&mut self, a: VarId, b: VarId) -> VarId {
        let x = &self.nodes[a.0].value;
        let y = &self.nodes[b.0].value;
        assert_eq!(x.rows, y.rows);
        let cols = x.cols + y.cols;
        let mut value = Mat::zeros(x.rows, cols);
        for i in 0..x.rows {
            value.data[i * cols..i * cols + x.cols].copy_from_slice(x.row(i));
            value.data[i * cols + x.cols..(i + 1) * cols].copy_from_slice(y.row(i));
        }
        self.push(value, Op::ConcatCols(a, b))
    }

    /// Weighted softmax cross-entropy against one-hot (or soft) constant
    /// targets, normalized by `norm` (row count for a mean). log(0) is
    /// structurally avoided by the fused log-softmax.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: VarId,
        targets: Mat,
        class_weights: Vec<f64>,
        norm: f64,
    ) -> VarId {
        let l = &self.nodes[logits.0].value;
        assert_eq!(l.shape(), targets.shape());
        assert_eq!(class_weights.len(), l.cols);
        assert!(norm > 0.0);
        let probs = crate::mat::softmax_rows(l);
        let mut total = 0.0;
        for i in 0..l.rows {
            let row = l.row(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let logsum = row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
            for j in 0..l.cols {
                let t = targets.get(i, j);
                if t != 0.0 {
                    total -= class_weights[j] * t * (row[j] - logsum);
                }
            }
        }
        let value = Mat::from_vec(1, 1, vec![total / norm]);
        self.push(
            value,
            Op::SoftmaxCrossEntropy {
                logits,
                targets,
                class_weights,
                norm,
                probs,
            },
        )
    }

    /// Closed-form KL divergence of `N(mu, diag(exp(log_sigma))^2)` from the
    /// standard normal: `0.5 * sum(mu^2 + exp(2s) - 2s - 1)`.
    pub fn gaussian_kl(&mut self, mu: VarId, log_sigma: VarId) -> VarId {
        let m = &self.nodes[mu.0].value;
        let s = &self.nodes[log_sigma.0].value;
        assert_eq!(m.shape(), s.shape());
        let mut total = 0.0;
        for (mv, sv) in m.data.iter().zip(&s.data) {
            total += 0.5 * (mv * mv + (2.0 * sv).exp() - 2.0 * sv - 1.0);
        }
        let value = Mat::from_vec(1, 1, vec![total]);
        self.push(value, Op::GaussianKl { mu, log_sigma })
    }

    /// `z = mu + exp(log_sigma) .* noise` with constant noise; gradients
    /// flow to both `mu` and `log_sigma`.
    pub fn reparameterize(&mut self, mu: VarId, log_sigma: VarId, noise: Mat) -> VarId {
        let m = &self.nodes[mu.0].value;
        let s = &self.nodes[log_sigma.0].value;
        assert_eq!(m.shape(), s.shape());
        assert_eq!(m.shape(), noise.shape());
        let mut value = m.clone();
        for i in 0..value.data.len() {
            value.data[i] += s.data[i].exp() * noise.data[i];
        }
        self.push(
            value,
            Op::Reparameterize {
                mu,
                log_sigma,
                noise,
            },
        )
    }

    /// Backpropagate from scalar `loss` (1 x 1). Gradients accumulate into
    /// every node; leaves keep theirs for the caller. Single use: node
    /// gradients start zeroed at construction.
    pub fn backward(&mut self, loss: VarId) {
        assert_eq!(self.nodes[loss.0].value.shape(), (1, 1), "loss must be scalar");
        self.nodes[loss.0].grad.data[0] = 1.0;

        for idx in (0..=loss.0).rev() {
            // Split borrows: take the grad out, restore after.
            let upstream = std::mem::replace(&mut self.nodes[idx].grad, Mat::zeros(0, 0));
            match &self.nodes[idx].op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (a, b) = (*a, *b);
                    let da = upstream.matmul_transposed(&self.nodes[b.0].value);
                    let db = self.nodes[a.0].value.transposed_matmul(&upstream);
                    self.nodes[a.0].grad.add_assign(&da);
                    self.nodes[b.0].grad.add_assign(&db);
                }
                Op::AffineRelu { x, w, bias } => {
                    let (x, w, bias) = (*x, *w, *bias);
                    // dz = upstream masked by the post-relu output.
                    let out = &self.nodes[idx].value;
                    let mut dz = upstream.clone();
                    for (g, &v) in dz.data.iter_mut().zip(&out.data) {
                        if v <= 0.0 {
                            *g = 0.0;
                        }
                    }
                    let dx = dz.matmul_transposed(&self.nodes[w.0].value);
                    let dw = self.nodes[x.0].value.transposed_matmul(&dz);
                    let cols = dz.cols;
                    let mut db = Mat::zeros(1, cols);
                    for i in 0..dz.rows {
                        for j in 0..cols {
                            db.data[j] += dz.data[i * cols + j];
                        }
                    }
                    self.nodes[x.0].grad.add_assign(&dx);
                    self.nodes[w.0].grad.add_assign(&dw);
                    self.nodes[bias.0].grad.add_assign(&db);
                }
                Op::AddRow(a, bias) => {
                    let (a, bias) = (*a, *bias);
                    self.nodes[a.0].grad.add_assign(&upstream);
                    let cols = upstream.cols;
                    let mut db = Mat::zeros(1, cols);
                    for i in 0..upstream.rows {
                        for j in 0..cols {
                            db.data[j] += upstream.data[i * cols + j];
                        }
                    }
                    self.nodes[bias.0].grad.add_assign(&db);
                }
                Op::Add(a, b) => {
                    let (a, b) = (*a, *b);
                    self.nodes[a.0].grad.add_assign(&upstream);
                    self.nodes[b.0].grad.add_assign(&upstream);
                }
                Op::Scale(a, s) => {
                    let (a, s) = (*a, *s);
                    let mut da = upstream.clone();
                    da.scale_assign(s);
                    self.nodes[a.0].grad.add_assign(&da);
                }
                Op::Relu(a) => {
                    let a = *a;
                    let mut da = upstream.clone();
                    for (g, &v) in da.data.iter_mut().zip(&self.nodes[a.0].value.data) {
                        if v <= 0.0 {
                            *g = 0.0;
                        }
                    }
                    self.nodes[a.0].grad.add_assign(&da);
                }
                Op::MaxPoolRows(a, argmax) => {
                    let a = *a;
                    let argmax = argmax.clone();
                    let cols = upstream.cols;
                    let mut da = Mat::zeros(
                        self.nodes[a.0].value.rows,
                        self.nodes[a.0].value.cols,
                    );
                    for (j, &src_row) in argmax.iter().enumerate() {
                        da.data[src_row as usize * cols + j] += upstream.data[j];
                    }
                    self.nodes[a.0].grad.add_assign(&da);
                }
                Op::BroadcastRows(a) => {
                    let a = *a;
                    let cols = upstream.cols;
                    let mut da = Mat::zeros(1, cols);
                    for i in 0..upstream.rows {
                        for j in 0..cols {
                            da.data[j] += upstream.data[i * cols + j];
                        }
                    }
                    self.nodes[a.0].grad.add_assign(&da);
                }
                Op::ConcatCols(a, b) => {
                    let (a, b) = (*a, *b);
                    let a_cols = self.nodes[a.0].value.cols;
                    let b_cols = self.nodes[b.0].value.cols;
                    let cols = upstream.cols;
                    let rows = upstream.rows;
                    let mut da = Mat::zeros(rows, a_cols);
                    let mut db = Mat::zeros(rows, b_cols);
                    for i in 0..rows {
                        da.data[i * a_cols..(i + 1) * a_cols]
                            .copy_from_slice(&upstream.data[i * cols..i * cols + a_cols]);
                        db.data[i * b_cols..(i + 1) * b_cols]
                            .copy_from_slice(&upstream.data[i * cols + a_cols..(i + 1) * cols]);
                    }
                    self.nodes[a.0].grad.add_assign(&da);
                    self.nodes[b.0].grad.add_assign(&db);
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    targets,
                    class_weights,
                    norm,
                    probs,
                } => {
                    let logits = *logits;
                    let up = upstream.data[0];
                    let rows = probs.rows;
                    let cols = probs.cols;
                    let mut dl = Mat::zeros(rows, cols);
                    for i in 0..rows {
                        let mut weighted_mass = 0.0;
                        for c in 0..cols {
                            weighted_mass += class_weights[c] * targets.get(i, c);
                        }
                        for j in 0..cols {
                            let g = (weighted_mass * probs.get(i, j)
                                - class_weights[j] * targets.get(i, j))
                                / norm;
                            dl.set(i, j, g * up);
                        }
                    }
                    self.nodes[logits.0].grad.add_assign(&dl);
                }
                Op::GaussianKl { mu, log_sigma } => {
                    let (mu, log_sigma) = (*mu, *log_sigma);
                    let up = upstream.data[0];
                    let m = self.nodes[mu.0].value.clone();
                    let s = self.nodes[log_sigma.0].value.clone();
                    let mut dm = Mat::zeros(m.rows, m.cols);
                    let mut ds = Mat::zeros(s.rows, s.cols);
                    for i in 0..m.data.len() {
                        dm.data[i] = m.data[i] * up;
                        ds.data[i] = ((2.0 * s.data[i]).exp() - 1.0) * up;
                    }
                    self.nodes[mu.0].grad.add_assign(&dm);
                    self.nodes[log_sigma.0].grad.add_assign(&ds);
                }
                Op::Reparameterize {
                    mu,
                    log_sigma,
                    noise,
                } => {
                    let (mu, log_sigma) = (*mu, *log_sigma);
                    let noise = noise.clone();
                    let s = self.nodes[log_sigma.0].value.clone();
                    self.nodes[mu.0].grad.add_assign(&upstream);
                    let mut ds = Mat::zeros(s.rows, s.cols);
                    for i in 0..s.data.len() {
                        ds.data[i] = upstream.data[i] * s.data[i].exp() * noise.data[i];
                    }
                    self.nodes[log_sigma.0].grad.add_assign(&ds);
                }
            }
            self.nodes[idx].grad = upstream;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_backward_shapes_and_values() {
        let mut tape = Tape::new();
        let a = tape.leaf(Mat::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]));
        let b = tape.leaf(Mat::from_vec(2, 1, vec![0.5, -1.0]));
        let y = tape.matmul(a, b); // [[1*0.5-2], [3*0.5-4]] = [[-1.5],[-2.5]]
        // Reduce to scalar via ones matmul.
        let ones = tape.leaf(Mat::from_vec(1, 2, vec![1.0, 1.0]));
        let loss = tape.matmul(ones, y);
        tape.backward(loss);
        assert_eq!(tape.value(loss).data[0], -4.0);
        // dL/dA = ones^T applied: each row gradient = b^T
        assert_eq!(tape.grad(a).data, vec![0.5, -1.0, 0.5, -1.0]);
        // dL/dB = sum of A rows = [4, 6]
        assert_eq!(tape.grad(b).data, vec![4.0, 6.0]);
    }

    #[test]
    fn maxpool_routes_gradient_to_argmax() {
        let mut tape = Tape::new();
        let x = tape.leaf(Mat::from_vec(3, 2, vec![1.0, 9.0, 5.0, 2.0, 3.0, 4.0]));
        let pooled = tape.max_pool_rows(x); // [5, 9]
        let ones = tape.leaf(Mat::from_vec(2, 1, vec![1.0, 1.0]));
        let loss = tape.matmul(pooled, ones);
        tape.backward(loss);
        assert_eq!(tape.value(pooled).data, vec![5.0, 9.0]);
        assert_eq!(
            tape.grad(x).data,
            vec![0.0, 1.0, 1.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn uniform_prediction_ce_is_log_c() {
        let mut tape = Tape::new();
        let logits = tape.leaf(Mat::zeros(8, 5));
        let targets = Mat::from_fn(8, 5, |i, j| if j == i % 5 { 1.0 } else { 0.0 });
        let ce = tape.softmax_cross_entropy(logits, targets, vec![1.0; 5], 8.0);
        assert!((tape.value(ce).data[0] - 5.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn perfect_prediction_ce_is_zero() {
        let mut tape = Tape::new();
        // Push logits to +-40: softmax saturates to the target.
        let logits = tape.leaf(Mat::from_fn(4, 3, |i, j| {
            if j == i % 3 {
                40.0
            } else {
                -40.0
            }
        }));
        let targets = Mat::from_fn(4, 3, |i, j| if j == i % 3 { 1.0 } else { 0.0 });
        let ce = tape.softmax_cross_entropy(logits, targets, vec![1.0; 3], 4.0);
        assert!(tape.value(ce).data[0].abs() < 1e-12);
    }

    #[test]
    fn standard_normal_kl_is_zero() {
        let mut tape = Tape::new();
        let mu = tape.leaf(Mat::zeros(1, 16));
        let s = tape.leaf(Mat::zeros(1, 16)); // sigma = exp(0) = 1
        let kl = tape.gaussian_kl(mu, s);
        assert_eq!(tape.value(kl).data[0], 0.0);
    }

    #[test]
    fn kl_is_nonnegative() {
        let mut stream = graspforge_core::rng::SeedStream::new(8);
        for _ in 0..50 {
            let mut tape = Tape::new();
            let mu = tape.leaf(Mat::from_fn(1, 8, |_, _| stream.uniform_in(-3.0, 3.0)));
            let s = tape.leaf(Mat::from_fn(1, 8, |_, _| stream.uniform_in(-2.0, 2.0)));
            let kl = tape.gaussian_kl(mu, s);
            assert!(tape.value(kl).data[0] >= -1e-9);
        }
    }

    #[test]
    fn reparameterize_sigma_zero_limit() {
        let mut tape = Tape::new();
        let mu = tape.leaf(Mat::from_vec(1, 3, vec![1.0, -2.0, 0.5]));
        // log sigma -> -inf is approximated by a very negative value.
        let s = tape.leaf(Mat::from_vec(1, 3, vec![-60.0, -60.0, -60.0]));
        let noise = Mat::from_vec(1, 3, vec![0.3, -0.7, 2.0]);
        let z = tape.reparameterize(mu, s, noise);
        for (zv, mv) in tape.value(z).data.iter().zip(&[1.0, -2.0, 0.5]) {
            assert!((zv - mv).abs() < 1e-20);
        }
    }
}
