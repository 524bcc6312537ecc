//! Named parameter sets and plain SGD-with-momentum updates.

use crate::mat::Mat;
use crate::tape::{Tape, VarId};
use graspforge_core::rng::SeedStream;

/// An ordered, named collection of parameter matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    entries: Vec<(String, Mat)>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet {
            entries: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, mat: Mat) -> usize {
        self.entries.push((name.into(), mat));
        self.entries.len() - 1
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.entries[idx].0
    }

    pub fn mat(&self, idx: usize) -> &Mat {
        &self.entries[idx].1
    }

    pub fn mat_mut(&mut self, idx: usize) -> &mut Mat {
        &mut self.entries[idx].1
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Mat)> {
        self.entries.iter().map(|(n, m)| (n.as_str(), m))
    }

    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|(_, m)| m.data.len()).sum()
    }

    /// Register every parameter as a tape leaf, in order.
    pub fn register(&self, tape: &mut Tape) -> Vec<VarId> {
        self.entries
            .iter()
            .map(|(_, m)| tape.leaf(m.clone()))
            .collect()
    }

    /// He-style initialization for a linear layer, seeded.
    pub fn init_linear(
        &mut self,
        prefix: &str,
        input: usize,
        output: usize,
        stream: &mut SeedStream,
    ) -> (usize, usize) {
        // Small positive bias keeps relu units initially active, which also
        // keeps finite-difference checks away from the kink.
        self.init_linear_with(prefix, input, output, 1.0, 0.01, stream)
    }

    /// He initialization damped by `gain` with an explicit bias value.
    pub fn init_linear_with(
        &mut self,
        prefix: &str,
        input: usize,
        output: usize,
        gain: f64,
        bias: f64,
        stream: &mut SeedStream,
    ) -> (usize, usize) {
        let scale = gain * (2.0 / input as f64).sqrt();
        let w = Mat::from_fn(input, output, |_, _| stream.gaussian() * scale);
        let b = Mat::from_fn(1, output, |_, _| bias);
        (
            self.add(format!("{prefix}.weight"), w),
            self.add(format!("{prefix}.bias"), b),
        )
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}

/// SGD with momentum and global-norm gradient clipping.
pub struct SgdMomentum {
    pub lr: f64,
    pub momentum: f64,
    /// Gradients are rescaled when their global L2 norm exceeds this.
    pub clip_norm: f64,
    velocity: Vec<Mat>,
}

impl SgdMomentum {
    pub fn new(params: &ParamSet, lr: f64, momentum: f64) -> Self {
        SgdMomentum {
            lr,
            momentum,
            clip_norm: 5.0,
            velocity: params.iter().map(|(_, m)| Mat::zeros(m.rows, m.cols)).collect(),
        }
    }

    /// Apply one update from gradients read off a finished tape.
    pub fn step(&mut self, params: &mut ParamSet, tape: &Tape, ids: &[VarId]) {
        assert_eq!(ids.len(), params.len());
        let mut norm_sq = 0.0;
        for id in ids {
            for g in &tape.grad(*id).data {
                norm_sq += g * g;
            }
        }
        let scale = if norm_sq.sqrt() > self.clip_norm {
            self.clip_norm / norm_sq.sqrt()
        } else {
            1.0
        };
        for (idx, id) in ids.iter().enumerate() {
            let grad = tape.grad(*id);
            let vel = &mut self.velocity[idx];
            for (v, g) in vel.data.iter_mut().zip(&grad.data) {
                *v = self.momentum * *v + scale * g;
            }
            let mat = params.mat_mut(idx);
            for (p, v) in mat.data.iter_mut().zip(&vel.data) {
                *p -= self.lr * *v;
            }
        }
    }
}

/// Adam with the usual bias correction and the same global-norm clipping.
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: f64,
    step: u64,
    first: Vec<Mat>,
    second: Vec<Mat>,
}

impl Adam {
    pub fn new(params: &ParamSet, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: 5.0,
            step: 0,
            first: params.iter().map(|(_, m)| Mat::zeros(m.rows, m.cols)).collect(),
            second: params.iter().map(|(_, m)| Mat::zeros(m.rows, m.cols)).collect(),
        }
    }

    pub fn step(&mut self, params: &mut ParamSet, tape: &Tape, ids: &[VarId]) {
        assert_eq!(ids.len(), params.len());
        self.step += 1;
        let mut norm_sq = 0.0;
        for id in ids {
            for g in &tape.grad(*id).data {
                norm_sq += g * g;
            }
        }
        let scale = if norm_sq.sqrt() > self.clip_norm {
            self.clip_norm / norm_sq.sqrt()
        } else {
            1.0
        };
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (idx, id) in ids.iter().enumerate() {
            let grad = tape.grad(*id);
            let m = &mut self.first[idx];
            let v = &mut self.second[idx];
            let p = params.mat_mut(idx);
            for k in 0..grad.data.len() {
                let g = scale * grad.data[k];
                m.data[k] = self.beta1 * m.data[k] + (1.0 - self.beta1) * g;
                v.data[k] = self.beta2 * v.data[k] + (1.0 - self.beta2) * g * g;
                let m_hat = m.data[k] / bc1;
                let v_hat = v.data[k] / bc2;
                p.data[k] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// Optimizer choice for training configs: plain momentum SGD is the
/// baseline; Adam converges far faster on the overfitting workloads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    SgdMomentum,
    Adam,
}

/// Runtime-selected optimizer.
pub enum AnyOptimizer {
    Sgd(SgdMomentum),
    Adam(Adam),
}

impl AnyOptimizer {
    pub fn new(kind: Optimizer, params: &ParamSet, lr: f64, momentum: f64) -> Self {
        match kind {
            Optimizer::SgdMomentum => AnyOptimizer::Sgd(SgdMomentum::new(params, lr, momentum)),
            Optimizer::Adam => AnyOptimizer::Adam(Adam::new(params, lr)),
        }
    }

    pub fn step(&mut self, params: &mut ParamSet, tape: &Tape, ids: &[VarId]) {
        match self {
            AnyOptimizer::Sgd(o) => o.step(params, tape, ids),
            AnyOptimizer::Adam(o) => o.step(params, tape, ids),
        }
    }

    pub fn set_lr(&mut self, lr: f64) {
        match self {
            AnyOptimizer::Sgd(o) => o.lr = lr,
            AnyOptimizer::Adam(o) => o.lr = lr,
        }
    }
}

/// Per-step record of a training run.
#[derive(Debug, Clone)]
pub struct TrainingReport {
    pub steps: usize,
    /// `(step, total loss, reconstruction/CE, regularizer/KL)` — the last
    /// two are zero when not applicable.
    pub curve: Vec<(usize, f64, f64, f64)>,
    pub initial_loss: f64,
    pub final_loss: f64,
}
