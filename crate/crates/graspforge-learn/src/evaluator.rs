//! Three-class grasp evaluator.
//!
//! Two shared-MLP encoders digest the cylinder-cropped scene cloud `P` and
//! the labeled hand cloud `H` (both in the hand frame, standardized to 512
//! points and scaled by the hand's canonical bounding radius). Their pooled
//! features concatenate into a two-layer classifier head over the classes
//! {0: colliding, 1: unreliable, 2: reliable}.

use graspforge_core::geometry::PointCloud;
use graspforge_core::hand::HandSurfaceCloud;
use graspforge_core::rng::SeedStream;
use serde::{Deserialize, Serialize};

use crate::encoder::{trunk_forward, TrunkLayout, DEFAULT_WIDTHS};
use crate::error::LearnError;
use crate::mat::{softmax_rows, Mat};
use crate::standardize::{standardize_hand_cloud, standardize_points, EVALUATOR_POINTS};
use crate::tape::{Tape, VarId};
use crate::trainer::{AnyOptimizer, Optimizer, ParamSet, TrainingReport};

pub const CLASS_COUNT: usize = 3;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvaluatorConfig {
    /// Hand classes (n + 1): size of the one-hot label channel on `H`.
    pub hand_class_count: usize,
    /// Length scale (the hand's canonical bounding radius, meters).
    pub scale: f64,
    pub trunk_widths: [usize; 3],
    pub hidden: usize,
    pub point_budget: usize,
}

impl EvaluatorConfig {
    pub fn for_hand(hand_class_count: usize, scale: f64) -> Self {
        EvaluatorConfig {
            hand_class_count,
            scale,
            trunk_widths: DEFAULT_WIDTHS,
            hidden: 128,
            point_budget: EVALUATOR_POINTS,
        }
    }

    pub fn toy(hand_class_count: usize) -> Self {
        EvaluatorConfig {
            hand_class_count,
            scale: 1.0,
            trunk_widths: [16, 32, 64],
            hidden: 32,
            point_budget: 32,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct EvaluatorLayout {
    scene_trunk: TrunkLayout,
    hand_trunk: TrunkLayout,
    head1: (usize, usize),
    head2: (usize, usize),
}

pub struct GraspEvaluator {
    pub cfg: EvaluatorConfig,
    params: ParamSet,
    layout: EvaluatorLayout,
}

/// A standardized training sample.
#[derive(Debug, Clone)]
pub struct EvalSample {
    pub scene: Mat,
    pub hand: Mat,
    pub label: u8,
}

impl GraspEvaluator {
    pub fn new(cfg: EvaluatorConfig, seed: u64) -> Self {
        let mut stream = SeedStream::new(seed);
        let mut params = ParamSet::new();
        let scene_trunk = TrunkLayout::init(&mut params, "scene", 3, cfg.trunk_widths, &mut stream);
        let hand_trunk = TrunkLayout::init(
            &mut params,
            "hand",
            3 + cfg.hand_class_count,
            cfg.trunk_widths,
            &mut stream,
        );
        let head1 = params.init_linear(
            "head1",
            2 * cfg.trunk_widths[2],
            cfg.hidden,
            &mut stream,
        );
        let head2 = params.init_linear("head2", cfg.hidden, CLASS_COUNT, &mut stream);
        GraspEvaluator {
            cfg,
            params,
            layout: EvaluatorLayout {
                scene_trunk,
                hand_trunk,
                head1,
                head2,
            },
        }
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Standardize raw clouds into an [`EvalSample`] (label separate).
    pub fn prepare_inputs(
        &self,
        scene_crop: &PointCloud,
        hand_cloud: &HandSurfaceCloud,
    ) -> Result<(Mat, Mat), LearnError> {
        let scene = standardize_points(scene_crop, self.cfg.point_budget, self.cfg.scale)?;
        let hand = standardize_hand_cloud(
            hand_cloud,
            self.cfg.hand_class_count,
            self.cfg.point_budget,
            self.cfg.scale,
        )?;
        Ok((scene, hand))
    }

    fn logits_on_tape(
        layout: &EvaluatorLayout,
        tape: &mut Tape,
        ids: &[VarId],
        scene: &Mat,
        hand: &Mat,
    ) -> VarId {
        let s = tape.leaf(scene.clone());
        let h = tape.leaf(hand.clone());
        let s_out = trunk_forward(tape, &layout.scene_trunk, ids, s);
        let h_out = trunk_forward(tape, &layout.hand_trunk, ids, h);
        let joined = tape.concat_cols(s_out.pooled, h_out.pooled);
        let z = tape.affine_relu(joined, ids[layout.head1.0], ids[layout.head1.1]);
        let z = tape.matmul(z, ids[layout.head2.0]);
        tape.add_row(z, ids[layout.head2.1])
    }

    /// Probability triple for a (crop, hand cloud) pair, both in the hand
    /// frame. Empty `P` is allowed (free-space sentinel); empty `H` is a
    /// precondition error.
    pub fn score(
        &self,
        scene_crop: &PointCloud,
        hand_cloud: &HandSurfaceCloud,
    ) -> Result<[f64; 3], LearnError> {
        let (scene, hand) = self.prepare_inputs(scene_crop, hand_cloud)?;
        Ok(self.score_standardized(&scene, &hand))
    }

    pub fn score_standardized(&self, scene: &Mat, hand: &Mat) -> [f64; 3] {
        let mut tape = Tape::new();
        let ids = self.params.register(&mut tape);
        let logits = Self::logits_on_tape(&self.layout, &mut tape, &ids, scene, hand);
        let probs = softmax_rows(tape.value(logits));
        [probs.data[0], probs.data[1], probs.data[2]]
    }

    /// Mean categorical cross-entropy over a batch.
    pub fn loss(&self, batch: &[EvalSample]) -> Result<f64, LearnError> {
        if batch.is_empty() {
            return Err(LearnError::Precondition("empty batch".into()));
        }
        Ok(self.loss_with_params(&self.params, batch))
    }

    pub fn loss_with_params(&self, params: &ParamSet, batch: &[EvalSample]) -> f64 {
        let mut tape = Tape::new();
        let ids = params.register(&mut tape);
        let loss = Self::batch_loss_on_tape(&self.layout, &mut tape, &ids, batch);
        tape.value(loss).data[0]
    }

    pub fn grads_with_params(&self, params: &ParamSet, batch: &[EvalSample]) -> Vec<Mat> {
        let mut tape = Tape::new();
        let ids = params.register(&mut tape);
        let loss = Self::batch_loss_on_tape(&self.layout, &mut tape, &ids, batch);
        tape.backward(loss);
        ids.iter().map(|id| tape.grad(*id).clone()).collect()
    }

    fn batch_loss_on_tape(
        layout: &EvaluatorLayout,
        tape: &mut Tape,
        ids: &[VarId],
        batch: &[EvalSample],
    ) -> VarId {
        let mut acc: Option<VarId> = None;
        for sample in batch {
            let logits = Self::logits_on_tape(layout, tape, ids, &sample.scene, &sample.hand);
            let mut target = Mat::zeros(1, CLASS_COUNT);
            target.set(0, sample.label as usize, 1.0);
            let ce = tape.softmax_cross_entropy(logits, target, vec![1.0; CLASS_COUNT], 1.0);
            acc = Some(match acc {
                None => ce,
                Some(a) => tape.add(a, ce),
            });
        }
        tape.scale(acc.expect("non-empty batch"), 1.0 / batch.len() as f64)
    }

    /// Minibatch SGD training; deterministic given the seed.
    pub fn train(
        &mut self,
        dataset: &[EvalSample],
        cfg: &EvaluatorTrainConfig,
    ) -> Result<TrainingReport, LearnError> {
        if dataset.is_empty() {
            return Err(LearnError::Precondition("dataset is empty".into()));
        }
        let mut stream = SeedStream::new(cfg.seed);
        let mut optimizer = AnyOptimizer::new(cfg.optimizer, &self.params, cfg.lr, cfg.momentum);
        let mut curve = Vec::new();
        let initial = self.loss(dataset)?;
        let mut steps = 0;

        // Class-balanced index pools.
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); CLASS_COUNT];
        for (i, s) in dataset.iter().enumerate() {
            by_class[s.label as usize].push(i);
        }
        let nonempty: Vec<usize> = (0..CLASS_COUNT)
            .filter(|&c| !by_class[c].is_empty())
            .collect();

        'train: for epoch in 0..cfg.epochs {
            let order: Vec<usize> = if cfg.class_balanced {
                // Round-robin over classes, random member each slot.
                (0..dataset.len())
                    .map(|i| {
                        let class = nonempty[i % nonempty.len()];
                        by_class[class][stream.index(by_class[class].len())]
                    })
                    .collect()
            } else {
                let mut idx: Vec<usize> = (0..dataset.len()).collect();
                // Fisher-Yates with the seeded stream.
                for i in (1..idx.len()).rev() {
                    idx.swap(i, stream.index(i + 1));
                }
                idx
            };

            for chunk in order.chunks(cfg.batch_size.max(1)) {
                let batch: Vec<EvalSample> =
                    chunk.iter().map(|&i| dataset[i].clone()).collect();
                let mut tape = Tape::new();
                let ids = self.params.register(&mut tape);
                let loss = Self::batch_loss_on_tape(&self.layout, &mut tape, &ids, &batch);
                let loss_v = tape.value(loss).data[0];
                if !loss_v.is_finite() {
                    return Err(LearnError::NumericalFailure {
                        message: "training loss diverged".into(),
                        step: steps,
                    });
                }
                tape.backward(loss);
                optimizer.step(&mut self.params, &tape, &ids);
                steps += 1;
            }

            let epoch_loss = self.loss(dataset)?;
            let acc = self.accuracy(dataset);
            curve.push((epoch, epoch_loss, acc, 0.0));
            if let Some(target) = cfg.target_accuracy {
                if acc >= target {
                    break 'train;
                }
            }
        }
        let final_loss = self.loss(dataset)?;
        Ok(TrainingReport {
            steps,
            curve,
            initial_loss: initial,
            final_loss,
        })
    }

    /// Fraction of samples whose argmax matches the label.
    pub fn accuracy(&self, dataset: &[EvalSample]) -> f64 {
        let mut hits = 0usize;
        for s in dataset {
            let q = self.score_standardized(&s.scene, &s.hand);
            let mut best = 0usize;
            for c in 1..CLASS_COUNT {
                if q[c] > q[best] {
                    best = c;
                }
            }
            if best == s.label as usize {
                hits += 1;
            }
        }
        hits as f64 / dataset.len().max(1) as f64
    }

    /// Per-class recall on a dataset.
    pub fn per_class_recall(&self, dataset: &[EvalSample]) -> [f64; CLASS_COUNT] {
        let mut hit = [0usize; CLASS_COUNT];
        let mut total = [0usize; CLASS_COUNT];
        for s in dataset {
            total[s.label as usize] += 1;
            let q = self.score_standardized(&s.scene, &s.hand);
            let mut best = 0usize;
            for c in 1..CLASS_COUNT {
                if q[c] > q[best] {
                    best = c;
                }
            }
            if best == s.label as usize {
                hit[s.label as usize] += 1;
            }
        }
        let mut out = [1.0; CLASS_COUNT];
        for c in 0..CLASS_COUNT {
            if total[c] > 0 {
                out[c] = hit[c] as f64 / total[c] as f64;
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<(), LearnError> {
        let cfg_json = serde_json::to_string(&self.cfg).expect("config serializes");
        crate::checkpoint::save(path, "grasp_evaluator", &cfg_json, &self.params)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, LearnError> {
        let (kind, cfg_json, loaded) = crate::checkpoint::load(&path)?;
        if kind != "grasp_evaluator" {
            return Err(LearnError::format(
                path.as_ref().display().to_string(),
                format!("expected grasp_evaluator checkpoint, found {kind}"),
            ));
        }
        let cfg: EvaluatorConfig = serde_json::from_str(&cfg_json)
            .map_err(|e| LearnError::format(path.as_ref().display().to_string(), e.to_string()))?;
        let mut fresh = GraspEvaluator::new(cfg, 0);
        crate::checkpoint::restore_params(&path, &mut fresh.params, &loaded)?;
        Ok(fresh)
    }
}

#[derive(Debug, Clone)]
pub struct EvaluatorTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub lr: f64,
    /// Only used by the SGD baseline.
    pub momentum: f64,
    pub seed: u64,
    pub class_balanced: bool,
    /// Stop early once training accuracy reaches this.
    pub target_accuracy: Option<f64>,
}

impl Default for EvaluatorTrainConfig {
    fn default() -> Self {
        EvaluatorTrainConfig {
            epochs: 60,
            batch_size: 8,
            optimizer: Optimizer::Adam,
            lr: 1e-3,
            momentum: 0.9,
            seed: 0,
            class_balanced: false,
            target_accuracy: None,
        }
    }
}
