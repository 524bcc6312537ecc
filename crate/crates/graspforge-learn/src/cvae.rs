//! Conditional VAE over contact semantic maps.
//!
//! Encoder: the object cloud concatenated with the one-hot map runs through
//! a shared-MLP trunk and max pool; two linear heads emit the latent mean
//! and log-sigma (sigma stays positive through the exponential). Decoder:
//! the object cloud runs through its own trunk; each point's feature is
//! `[global | local | z]`, mapped by a two-layer head to per-point class
//! logits. Training maximizes the ELBO: weighted softmax cross-entropy
//! reconstruction plus `beta` times the closed-form KL to the standard
//! normal prior.

use graspforge_core::contact::{ContactSemanticMap, MAP_POINTS};
use graspforge_core::geometry::PointCloud;
use graspforge_core::rng::SeedStream;
use serde::{Deserialize, Serialize};

use crate::encoder::{trunk_forward, TrunkLayout, DEFAULT_WIDTHS};
use crate::error::LearnError;
use crate::mat::{softmax_rows, Mat};
use crate::standardize::{one_hot_targets, standardize_object_cloud};
use crate::tape::{Tape, VarId};
use crate::trainer::{AnyOptimizer, Optimizer, ParamSet, TrainingReport};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CvaeConfig {
    pub class_count: usize,
    pub latent_dim: usize,
    pub trunk_widths: [usize; 3],
    pub decoder_hidden: usize,
    pub beta: f64,
}

impl CvaeConfig {
    pub fn for_hand_classes(class_count: usize) -> Self {
        CvaeConfig {
            class_count,
            latent_dim: 64,
            trunk_widths: DEFAULT_WIDTHS,
            decoder_hidden: 128,
            beta: 1.0,
        }
    }

    /// Shrunken widths for gradient-check toys.
    pub fn toy(class_count: usize) -> Self {
        CvaeConfig {
            class_count,
            latent_dim: 8,
            trunk_widths: [16, 32, 64],
            decoder_hidden: 32,
            beta: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct CvaeLayout {
    object_trunk: TrunkLayout,
    encoder_trunk: TrunkLayout,
    mu_head: (usize, usize),
    log_sigma_head: (usize, usize),
    decoder1: (usize, usize),
    decoder2: (usize, usize),
}

pub struct CoseCvae {
    pub cfg: CvaeConfig,
    params: ParamSet,
    layout: CvaeLayout,
}

/// One sampled map: argmax-hardened classes for detection plus the soft
/// row distribution for inspection.
pub struct SampledMap {
    pub map: ContactSemanticMap,
    pub soft: Mat,
}

impl CoseCvae {
    pub fn new(cfg: CvaeConfig, seed: u64) -> Self {
        let mut stream = SeedStream::new(seed);
        let mut params = ParamSet::new();
        let layout = Self::build_layout(&cfg, &mut params, &mut stream);
        CoseCvae {
            cfg,
            params,
            layout,
        }
    }

    fn build_layout(cfg: &CvaeConfig, params: &mut ParamSet, stream: &mut SeedStream) -> CvaeLayout {
        let object_trunk = TrunkLayout::init(params, "object", 3, cfg.trunk_widths, stream);
        let encoder_trunk = TrunkLayout::init(
            params,
            "encoder",
            3 + cfg.class_count,
            cfg.trunk_widths,
            stream,
        );
        // The mean head keeps full scale so the latent separates samples
        // from the first step; sigma starts small (log sigma ~ -3) so the
        // decoder sees a clean code instead of prior noise. Both choices
        // fight posterior collapse on small datasets.
        let mu_head =
            params.init_linear_with("mu", cfg.trunk_widths[2], cfg.latent_dim, 1.0, 0.0, stream);
        let log_sigma_head = params.init_linear_with(
            "log_sigma",
            cfg.trunk_widths[2],
            cfg.latent_dim,
            0.01,
            -3.0,
            stream,
        );
        // Per-point decoder input: [global | per-point features | xyz | z].
        let feat_dim = 2 * cfg.trunk_widths[2] + 3 + cfg.latent_dim;
        let decoder1 = params.init_linear("decoder1", feat_dim, cfg.decoder_hidden, stream);
        let decoder2 = params.init_linear("decoder2", cfg.decoder_hidden, cfg.class_count, stream);
        CvaeLayout {
            object_trunk,
            encoder_trunk,
            mu_head,
            log_sigma_head,
            decoder1,
            decoder2,
        }
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn check_inputs(
        &self,
        object: &PointCloud,
        map: &ContactSemanticMap,
    ) -> Result<(), LearnError> {
        if object.len() != MAP_POINTS {
            return Err(LearnError::DimensionMismatch {
                expected: MAP_POINTS,
                got: object.len(),
                context: "object cloud".into(),
            });
        }
        if map.class_count != self.cfg.class_count {
            return Err(LearnError::DimensionMismatch {
                expected: self.cfg.class_count,
                got: map.class_count,
                context: "map class count".into(),
            });
        }
        if map.len() != object.len() {
            return Err(LearnError::DimensionMismatch {
                expected: object.len(),
                got: map.len(),
                context: "map points".into(),
            });
        }
        Ok(())
    }

    /// Encoder heads on the tape; returns (mu, log_sigma) ids.
    fn encode_on_tape(
        layout: &CvaeLayout,
        tape: &mut Tape,
        ids: &[VarId],
        o_mat: &Mat,
        targets: &Mat,
    ) -> (VarId, VarId) {
        let o = tape.leaf(o_mat.clone());
        let t = tape.leaf(targets.clone());
        let joined = tape.concat_cols(o, t);
        let trunk = trunk_forward(tape, &layout.encoder_trunk, ids, joined);
        let mu = tape.matmul(trunk.pooled, ids[layout.mu_head.0]);
        let mu = tape.add_row(mu, ids[layout.mu_head.1]);
        let ls = tape.matmul(trunk.pooled, ids[layout.log_sigma_head.0]);
        let ls = tape.add_row(ls, ids[layout.log_sigma_head.1]);
        (mu, ls)
    }

    /// Decoder logits on the tape for latent id `z`.
    fn decode_on_tape(
        layout: &CvaeLayout,
        tape: &mut Tape,
        ids: &[VarId],
        o_mat: &Mat,
        z: VarId,
    ) -> VarId {
        let k = o_mat.rows;
        let o = tape.leaf(o_mat.clone());
        let trunk = trunk_forward(tape, &layout.object_trunk, ids, o);
        let global = tape.broadcast_rows(trunk.pooled, k);
        let feat = tape.concat_cols(global, trunk.features);
        // Raw coordinates skip straight to the decoder: localized contact
        // patches are functions of position first.
        let feat = tape.concat_cols(feat, o);
        let z_rows = tape.broadcast_rows(z, k);
        let feat = tape.concat_cols(feat, z_rows);
        let h = tape.affine_relu(feat, ids[layout.decoder1.0], ids[layout.decoder1.1]);
        let logits = tape.matmul(h, ids[layout.decoder2.0]);
        tape.add_row(logits, ids[layout.decoder2.1])
    }

    /// Full ELBO loss graph; returns (loss, ce, kl) ids.
    #[allow(clippy::too_many_arguments)]
    fn elbo_on_tape(
        layout: &CvaeLayout,
        tape: &mut Tape,
        ids: &[VarId],
        o_mat: &Mat,
        targets: &Mat,
        noise: &Mat,
        beta: f64,
        class_weights: &[f64],
    ) -> (VarId, VarId, VarId) {
        let (mu, ls) = Self::encode_on_tape(layout, tape, ids, o_mat, targets);
        let z = tape.reparameterize(mu, ls, noise.clone());
        let logits = Self::decode_on_tape(layout, tape, ids, o_mat, z);
        let ce = tape.softmax_cross_entropy(
            logits,
            targets.clone(),
            class_weights.to_vec(),
            o_mat.rows as f64,
        );
        let kl = tape.gaussian_kl(mu, ls);
        let scaled_kl = tape.scale(kl, beta);
        let loss = tape.add(ce, scaled_kl);
        (loss, ce, kl)
    }

    /// Posterior parameters for `(O, Omega)`: mean and (positive) sigma.
    pub fn encode(
        &self,
        object: &PointCloud,
        map: &ContactSemanticMap,
    ) -> Result<(Vec<f64>, Vec<f64>), LearnError> {
        self.check_inputs(object, map)?;
        let (o_mat, _, _) = standardize_object_cloud(object)?;
        let targets = one_hot_targets(map);
        let mut tape = Tape::new();
        let ids = self.params.register(&mut tape);
        let (mu, ls) = Self::encode_on_tape(&self.layout, &mut tape, &ids, &o_mat, &targets);
        let mu = tape.value(mu).data.clone();
        let sigma = tape.value(ls).data.iter().map(|s| s.exp()).collect();
        Ok((mu, sigma))
    }

    /// ELBO pieces for one sample with seeded reparameterization noise.
    pub fn elbo_loss(
        &self,
        object: &PointCloud,
        map: &ContactSemanticMap,
        beta: f64,
        class_weights: &[f64],
        seed: u64,
    ) -> Result<(f64, f64, f64), LearnError> {
        self.check_inputs(object, map)?;
        if class_weights.len() != self.cfg.class_count {
            return Err(LearnError::DimensionMismatch {
                expected: self.cfg.class_count,
                got: class_weights.len(),
                context: "class weights".into(),
            });
        }
        let (o_mat, _, _) = standardize_object_cloud(object)?;
        let targets = one_hot_targets(map);
        let noise = gaussian_row(self.cfg.latent_dim, &mut SeedStream::new(seed));
        let mut tape = Tape::new();
        let ids = self.params.register(&mut tape);
        let (loss, ce, kl) = Self::elbo_on_tape(
            &self.layout,
            &mut tape,
            &ids,
            &o_mat,
            &targets,
            &noise,
            beta,
            class_weights,
        );
        Ok((
            tape.value(loss).data[0],
            tape.value(ce).data[0],
            tape.value(kl).data[0],
        ))
    }

    /// Reconstruction CE at the posterior mean (no sampling noise); the
    /// deterministic measurement used for convergence reporting.
    pub fn reconstruction_ce(
        &self,
        object: &PointCloud,
        map: &ContactSemanticMap,
        class_weights: &[f64],
    ) -> Result<f64, LearnError> {
        self.check_inputs(object, map)?;
        let (o_mat, _, _) = standardize_object_cloud(object)?;
        let targets = one_hot_targets(map);
        let zero_noise = Mat::zeros(1, self.cfg.latent_dim);
        let mut tape = Tape::new();
        let ids = self.params.register(&mut tape);
        let (_, ce, _) = Self::elbo_on_tape(
            &self.layout,
            &mut tape,
            &ids,
            &o_mat,
            &targets,
            &zero_noise,
            self.cfg.beta,
            class_weights,
        );
        Ok(tape.value(ce).data[0])
    }

    /// Train on `(O, Omega)` pairs with per-sample SGD steps.
    pub fn train(
        &mut self,
        dataset: &[(PointCloud, ContactSemanticMap)],
        cfg: &CvaeTrainConfig,
    ) -> Result<TrainingReport, LearnError> {
        if dataset.is_empty() {
            return Err(LearnError::Precondition("dataset is empty".into()));
        }
        for (o, m) in dataset {
            self.check_inputs(o, m)?;
        }
        let class_weights = match &cfg.class_weights {
            Some(w) => w.clone(),
            None => inverse_frequency_weights(
                dataset.iter().map(|(_, m)| m),
                self.cfg.class_count,
            ),
        };

        // Standardize once.
        let prepared: Vec<(Mat, Mat)> = dataset
            .iter()
            .map(|(o, m)| {
                let (o_mat, _, _) = standardize_object_cloud(o).unwrap();
                (o_mat, one_hot_targets(m))
            })
            .collect();

        let mut stream = SeedStream::new(cfg.seed);
        let mut optimizer = AnyOptimizer::new(cfg.optimizer, &self.params, cfg.lr, cfg.momentum);
        let mut curve = Vec::new();
        // Epoch-shuffled visit order: lower gradient variance than iid
        // sampling on small datasets.
        let mut epoch_order: Vec<usize> = (0..prepared.len()).collect();

        let measure = |model: &CoseCvae| -> f64 {
            dataset
                .iter()
                .map(|(o, m)| model.reconstruction_ce(o, m, &class_weights).unwrap())
                .sum::<f64>()
                / dataset.len() as f64
        };
        let initial_ce = measure(self);
        let mut steps_done = 0;

        'train: for step in 0..cfg.max_steps {
            let slot = step % prepared.len();
            if slot == 0 {
                for i in (1..epoch_order.len()).rev() {
                    epoch_order.swap(i, stream.index(i + 1));
                }
            }
            let (o_mat, targets) = &prepared[epoch_order[slot]];
            let noise = gaussian_row(self.cfg.latent_dim, &mut stream);

            // Linear KL warmup: a deterministic-autoencoder phase lets the
            // decoder learn to use the latent before the prior pulls on it,
            // which prevents posterior collapse on small datasets.
            let beta_t = if cfg.beta_warmup_steps == 0 {
                cfg.beta
            } else {
                cfg.beta * (step as f64 / cfg.beta_warmup_steps as f64).min(1.0)
            };
            let decay = 1.0
                - (1.0 - cfg.lr_final_fraction) * (step as f64 / cfg.max_steps.max(1) as f64);
            optimizer.set_lr(cfg.lr * decay);
            let mut tape = Tape::new();
            let ids = self.params.register(&mut tape);
            let (loss, ce, kl) = Self::elbo_on_tape(
                &self.layout,
                &mut tape,
                &ids,
                o_mat,
                targets,
                &noise,
                beta_t,
                &class_weights,
            );
            let loss_v = tape.value(loss).data[0];
            if !loss_v.is_finite() {
                return Err(LearnError::NumericalFailure {
                    message: "training loss diverged".into(),
                    step,
                });
            }
            let (ce_v, kl_v) = (tape.value(ce).data[0], tape.value(kl).data[0]);
            tape.backward(loss);
            optimizer.step(&mut self.params, &tape, &ids);
            steps_done = step + 1;

            if step % cfg.measure_every == 0 || step + 1 == cfg.max_steps {
                let measured = measure(self);
                curve.push((step, loss_v, measured, kl_v));
                let _ = ce_v;
                if let Some(target) = cfg.target_ce {
                    if measured < target {
                        break 'train;
                    }
                }
            }
        }
        let final_ce = measure(self);

        Ok(TrainingReport {
            steps: steps_done,
            curve,
            initial_loss: initial_ce,
            final_loss: final_ce,
        })
    }

    /// Draw `n` maps for an object from the standard-normal prior. Rows of
    /// the soft map are softmax distributions; the hard map takes argmax.
    pub fn sample_contact_maps(
        &self,
        object: &PointCloud,
        n: usize,
        seed: u64,
    ) -> Result<Vec<SampledMap>, LearnError> {
        if object.len() != MAP_POINTS {
            return Err(LearnError::DimensionMismatch {
                expected: MAP_POINTS,
                got: object.len(),
                context: "object cloud".into(),
            });
        }
        let (o_mat, _, _) = standardize_object_cloud(object)?;
        let mut out = Vec::with_capacity(n);
        let root = SeedStream::new(seed);
        for i in 0..n {
            let mut stream = root.child(i as u64);
            let z_values = gaussian_row(self.cfg.latent_dim, &mut stream);
            let mut tape = Tape::new();
            let ids = self.params.register(&mut tape);
            let z = tape.leaf(z_values);
            let logits = Self::decode_on_tape(&self.layout, &mut tape, &ids, &o_mat, z);
            let soft = softmax_rows(tape.value(logits));
            let classes: Vec<u16> = (0..soft.rows)
                .map(|r| {
                    let row = soft.row(r);
                    let mut best = 0usize;
                    for c in 1..row.len() {
                        if row[c] > row[best] {
                            best = c;
                        }
                    }
                    best as u16
                })
                .collect();
            let map = ContactSemanticMap::from_classes(
                object.points.clone(),
                self.cfg.class_count,
                classes,
            )?;
            out.push(SampledMap { map, soft });
        }
        Ok(out)
    }

    /// Loss value for external gradient checking: same graph, caller's
    /// parameter values.
    pub fn loss_with_params(
        &self,
        params: &ParamSet,
        o_mat: &Mat,
        targets: &Mat,
        noise: &Mat,
        class_weights: &[f64],
    ) -> f64 {
        let mut tape = Tape::new();
        let ids = params.register(&mut tape);
        let (loss, _, _) = Self::elbo_on_tape(
            &self.layout,
            &mut tape,
            &ids,
            o_mat,
            targets,
            noise,
            self.cfg.beta,
            class_weights,
        );
        tape.value(loss).data[0]
    }

    /// Analytic gradients of the same loss.
    pub fn grads_with_params(
        &self,
        params: &ParamSet,
        o_mat: &Mat,
        targets: &Mat,
        noise: &Mat,
        class_weights: &[f64],
    ) -> Vec<Mat> {
        let mut tape = Tape::new();
        let ids = params.register(&mut tape);
        let (loss, _, _) = Self::elbo_on_tape(
            &self.layout,
            &mut tape,
            &ids,
            o_mat,
            targets,
            noise,
            self.cfg.beta,
            class_weights,
        );
        tape.backward(loss);
        ids.iter().map(|id| tape.grad(*id).clone()).collect()
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<(), LearnError> {
        let cfg_json = serde_json::to_string(&self.cfg).expect("config serializes");
        crate::checkpoint::save(path, "cose_cvae", &cfg_json, &self.params)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, LearnError> {
        let (kind, cfg_json, loaded) = crate::checkpoint::load(&path)?;
        if kind != "cose_cvae" {
            return Err(LearnError::format(
                path.as_ref().display().to_string(),
                format!("expected cose_cvae checkpoint, found {kind}"),
            ));
        }
        let cfg: CvaeConfig = serde_json::from_str(&cfg_json)
            .map_err(|e| LearnError::format(path.as_ref().display().to_string(), e.to_string()))?;
        let mut fresh = CoseCvae::new(cfg, 0);
        crate::checkpoint::restore_params(&path, &mut fresh.params, &loaded)?;
        Ok(fresh)
    }
}

/// Sampling/optimization settings for [`CoseCvae::train`].
#[derive(Debug, Clone)]
pub struct CvaeTrainConfig {
    pub max_steps: usize,
    pub optimizer: Optimizer,
    pub lr: f64,
    /// Only used by the SGD baseline.
    pub momentum: f64,
    pub beta: f64,
    /// Steps over which the KL weight ramps linearly from 0 to `beta`.
    pub beta_warmup_steps: usize,
    /// The learning rate decays linearly to `lr * lr_final_fraction` at
    /// `max_steps` (1.0 = constant).
    pub lr_final_fraction: f64,
    pub seed: u64,
    /// Measure full-dataset CE every this many steps (early-stop cadence).
    pub measure_every: usize,
    /// Stop once the measured CE falls below this.
    pub target_ce: Option<f64>,
    /// Override the inverse-frequency class weights.
    pub class_weights: Option<Vec<f64>>,
}

impl Default for CvaeTrainConfig {
    fn default() -> Self {
        CvaeTrainConfig {
            max_steps: 2000,
            optimizer: Optimizer::Adam,
            lr: 1e-3,
            momentum: 0.9,
            beta: 1.0,
            beta_warmup_steps: 400,
            lr_final_fraction: 1.0,
            seed: 0,
            measure_every: 50,
            target_ce: None,
            class_weights: None,
        }
    }
}

pub(crate) fn gaussian_row(dim: usize, stream: &mut SeedStream) -> Mat {
    Mat::row_vector((0..dim).map(|_| stream.gaussian()).collect())
}

/// Value-level reparameterization: `z = mu + sigma .* u` with `u` drawn
/// from the seeded standard normal stream. (Training uses the tape version,
/// which also routes gradients to `mu` and `sigma`.)
pub fn reparameterize(mu: &[f64], sigma: &[f64], seed: u64) -> Vec<f64> {
    assert_eq!(mu.len(), sigma.len());
    let mut stream = SeedStream::new(seed);
    mu.iter()
        .zip(sigma)
        .map(|(m, s)| m + s * stream.gaussian())
        .collect()
}

/// Inverse class-frequency weights, mean-normalized, absent classes
/// clamped as if they had one point.
pub fn inverse_frequency_weights<'a>(
    maps: impl Iterator<Item = &'a ContactSemanticMap>,
    class_count: usize,
) -> Vec<f64> {
    let mut counts = vec![0usize; class_count];
    let mut total = 0usize;
    for map in maps {
        for &c in &map.classes {
            counts[c as usize] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return vec![1.0; class_count];
    }
    let mut weights: Vec<f64> = counts
        .iter()
        .map(|&c| total as f64 / (class_count as f64 * c.max(1) as f64))
        .collect();
    let mean = weights.iter().sum::<f64>() / class_count as f64;
    for w in &mut weights {
        *w /= mean;
    }
    weights
}
