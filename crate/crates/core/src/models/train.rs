//! Training loops: penalized-transport auto-encoders with the MMD and
//! adversarial latent penalties, the VAE baseline, and the encoder
//! pre-training heuristic.
//!
//! Every loop is single-threaded and fully determined by the run seed:
//! weight init, batch shuffling, prior draws, and noise each consume
//! their own rng stream.

use super::config::{ConfigError, EncoderKind, PenaltyKind, PriorSpec, RunConfig, VaeDecoder};
use super::{
    perturb_inputs, standard_normal_matrix, wae_objective, AutoEncoderModel,
    ModelError, ObjectiveNodes,
};
use crate::adam::{adam_step, AdamError, AdamState};
use crate::data::{sample_prior_with, DataError, Dataset};
use crate::divergence::{
    gan_discriminator_loss, gaussian_kl_sum, DivergenceError, LatentDiscriminator, CLAMP_EPS,
};
use crate::graph::{Graph, GraphError, NodeId};
use crate::nn::{init_params, mlp_dims, relu_stack_activations, Activation, Mlp};
use crate::rng::RngStreams;
use crate::tensor::Tensor;
use rand::seq::SliceRandom;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub epoch: usize,
    pub recon: f64,
    pub penalty: f64,
    pub total: f64,
    pub disc_loss: Option<f64>,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainingTrace {
    pub records: Vec<EpochRecord>,
}

impl TrainingTrace {
    pub const CSV_HEADER: &'static str = "epoch,recon,penalty,total,disc_loss,wall_clock_s";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let disc = r.disc_loss.map(|d| d.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch, r.recon, r.penalty, r.total, disc, r.wall_clock_s
            ));
        }
        out
    }

    /// CSV with the wall-clock column stripped; the byte-identical part
    /// under rerun determinism.
    pub fn to_csv_deterministic(&self) -> String {
        self.to_csv()
            .lines()
            .map(|l| match l.rfind(',') {
                Some(p) => &l[..p],
                None => l,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug)]
pub struct TrainOutput {
    pub model: AutoEncoderModel,
    pub disc: Option<LatentDiscriminator>,
    pub trace: TrainingTrace,
    pub adam: AdamState,
    pub disc_adam: Option<AdamState>,
    pub epochs_done: usize,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at epoch {epoch}, batch {batch}; last good state retained")]
    NonFinite {
        epoch: usize,
        batch: usize,
        last_good: Box<TrainOutput>,
    },
    #[error("gradient isolation violated during {stage}")]
    IsolationViolated { stage: &'static str },
    #[error("dataset unusable: {0}")]
    BadData(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
    #[error(transparent)]
    Adam(#[from] AdamError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
}

fn is_numeric_failure(e: &TrainError) -> bool {
    matches!(
        e,
        TrainError::Graph(GraphError::NonFinite { .. })
            | TrainError::Divergence(DivergenceError::Graph(GraphError::NonFinite { .. }))
            | TrainError::Adam(AdamError::NonFiniteGradient { .. })
    )
}

/// Product of the schedule multipliers whose epoch has been reached.
fn lr_factor(schedule: &[(usize, f64)], epoch: usize) -> f64 {
    schedule
        .iter()
        .filter(|(e, _)| epoch >= *e)
        .map(|(_, m)| m)
        .product()
}

/// Shuffled full batches for one epoch; a trailing partial batch is
/// dropped (every step sees exactly `batch` examples, matching the fixed
/// prior batch size).
fn epoch_batches(
    train_idx: &[usize],
    batch: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<Vec<usize>> {
    let mut idx = train_idx.to_vec();
    idx.shuffle(rng);
    idx.chunks_exact(batch).map(|c| c.to_vec()).collect()
}

fn check_trainable(dataset: &Dataset, cfg: &RunConfig) -> Result<(), TrainError> {
    if dataset.count() == 0 {
        return Err(TrainError::BadData("dataset is empty".into()));
    }
    if dataset.d_x() != cfg.model.d_x {
        return Err(TrainError::BadData(format!(
            "dataset has d_x {} but model expects {}",
            dataset.d_x(),
            cfg.model.d_x
        )));
    }
    if dataset.train_idx.len() < cfg.run.batch_size {
        return Err(TrainError::BadData(format!(
            "train split has {} examples, need at least one batch of {}",
            dataset.train_idx.len(),
            cfg.run.batch_size
        )));
    }
    Ok(())
}

fn gaussian_eps(
    model: &AutoEncoderModel,
    n: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Option<Tensor> {
    match model.encoder_kind {
        EncoderKind::Deterministic => None,
        EncoderKind::Gaussian => Some(standard_normal_matrix(rng, n, model.d_z)),
    }
}

/// Copies node gradients into the parameter tensors (flattening order)
/// and takes one optimizer step.
fn apply_grads(
    g: &Graph,
    param_nodes: &[NodeId],
    tensors: &mut [&mut Tensor],
    adam: &mut AdamState,
) -> Result<(), TrainError> {
    assert_eq!(param_nodes.len(), tensors.len());
    for (t, id) in tensors.iter_mut().zip(param_nodes) {
        t.grad = Some(g.grad(*id).expect("backward ran").to_vec());
    }
    adam_step(adam, tensors)?;
    Ok(())
}

fn enc_dec_tensors<'m>(model: &'m mut AutoEncoderModel) -> Vec<&'m mut Tensor> {
    let AutoEncoderModel {
        encoder, decoder, ..
    } = model;
    let mut tensors = encoder.params_mut();
    tensors.extend(decoder.params_mut());
    tensors
}

fn params_fingerprint(mlp: &Mlp) -> u64 {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for t in mlp.params() {
        for v in t.values() {
            v.to_bits().hash(&mut h);
        }
    }
    h.finish()
}

#[derive(Default)]
struct Accumulator {
    recon: f64,
    penalty: f64,
    total: f64,
    disc: f64,
    batches: usize,
    has_disc: bool,
}

impl Accumulator {
    fn push(&mut self, recon: f64, penalty: f64, total: f64, disc: Option<f64>) {
        self.recon += recon;
        self.penalty += penalty;
        self.total += total;
        if let Some(d) = disc {
            self.disc += d;
            self.has_disc = true;
        }
        self.batches += 1;
    }

    fn record(&self, epoch: usize, started: Instant) -> EpochRecord {
        let n = self.batches.max(1) as f64;
        EpochRecord {
            epoch,
            recon: self.recon / n,
            penalty: self.penalty / n,
            total: self.total / n,
            disc_loss: self.has_disc.then_some(self.disc / n),
            wall_clock_s: started.elapsed().as_secs_f64(),
        }
    }
}

struct Session {
    model: AutoEncoderModel,
    disc: Option<LatentDiscriminator>,
    adam: AdamState,
    disc_adam: Option<AdamState>,
    trace: TrainingTrace,
    rngs: RngStreams,
    prior: PriorSpec,
}

impl Session {
    fn start(dataset: &Dataset, cfg: &RunConfig, with_disc: bool) -> Result<Self, TrainError> {
        check_trainable(dataset, cfg)?;
        let mut rngs = RngStreams::new(cfg.run.seed);
        let model = AutoEncoderModel::init(cfg, &mut rngs.weights);
        let adam = AdamState::new(
            model.encoder.param_count() + model.decoder.param_count(),
            cfg.optim.alpha,
            cfg.optim.beta1,
            cfg.optim.beta2,
            cfg.optim.epsilon,
        );
        let (disc, disc_adam) = if with_disc {
            let dims = mlp_dims(cfg.model.d_z, &cfg.gan.disc_hidden, 1);
            let acts = relu_stack_activations(dims.len() - 1, Activation::Identity);
            let mut network = init_params(&dims, &acts, &mut rngs.weights);
            if cfg.debug.frozen_zero_disc {
                for layer in &mut network.layers {
                    layer.weights.values_mut().fill(0.0);
                    layer.bias.values_mut().fill(0.0);
                }
            }
            let state = AdamState::new(
                network.param_count(),
                cfg.optim.disc_alpha,
                cfg.optim.beta1,
                cfg.optim.beta2,
                cfg.optim.epsilon,
            );
            (
                Some(LatentDiscriminator {
                    network,
                    add_log_prior: cfg.gan.add_log_prior,
                }),
                Some(state),
            )
        } else {
            (None, None)
        };
        Ok(Self {
            model,
            disc,
            adam,
            disc_adam,
            trace: TrainingTrace::default(),
            rngs,
            prior: cfg.prior_spec(),
        })
    }

    fn snapshot(&self, epochs_done: usize) -> TrainOutput {
        TrainOutput {
            model: self.model.clone(),
            disc: self.disc.clone(),
            trace: self.trace.clone(),
            adam: self.adam.clone(),
            disc_adam: self.disc_adam.clone(),
            epochs_done,
        }
    }

    fn finish(self, epochs_done: usize) -> TrainOutput {
        TrainOutput {
            model: self.model,
            disc: self.disc,
            trace: self.trace,
            adam: self.adam,
            disc_adam: self.disc_adam,
            epochs_done,
        }
    }
}

/// Per-epoch observer: sees the post-epoch snapshot (the same state the
/// trainer would hand back if it stopped there).
pub type EpochObserver<'a> = &'a mut dyn FnMut(&TrainOutput);

/// Dispatches on the penalty kind after validating the config.
pub fn train(dataset: &Dataset, cfg: &RunConfig) -> Result<TrainOutput, TrainError> {
    train_observed(dataset, cfg, None)
}

pub fn train_observed(
    dataset: &Dataset,
    cfg: &RunConfig,
    observer: Option<EpochObserver>,
) -> Result<TrainOutput, TrainError> {
    cfg.validate()?;
    match cfg.penalty.kind {
        PenaltyKind::Mmd => train_wae_mmd_observed(dataset, cfg, observer),
        PenaltyKind::Gan => train_wae_gan_observed(dataset, cfg, observer),
        PenaltyKind::VaeKl => train_vae_observed(dataset, cfg, observer),
    }
}

/// Minimizes recon + λ·MMD(prior batch, encoded batch) per mini-batch.
/// Validation is the dispatcher's job; calling this directly with λ = 0
/// is allowed for diagnostics.
pub fn train_wae_mmd(dataset: &Dataset, cfg: &RunConfig) -> Result<TrainOutput, TrainError> {
    train_wae_mmd_observed(dataset, cfg, None)
}

pub fn train_wae_mmd_observed(
    dataset: &Dataset,
    cfg: &RunConfig,
    mut observer: Option<EpochObserver>,
) -> Result<TrainOutput, TrainError> {
    let mut s = Session::start(dataset, cfg, false)?;
    if cfg.heuristics.pretrain_encoder {
        pretrain_in_session(&mut s, dataset, cfg, cfg.heuristics.pretrain_steps)?;
    }
    let mut last_good = s.snapshot(0);
    for epoch in 0..cfg.run.epochs {
        let started = Instant::now();
        s.adam.alpha = cfg.optim.alpha * lr_factor(&cfg.optim.lr_schedule, epoch);
        let batches = epoch_batches(&dataset.train_idx, cfg.run.batch_size, &mut s.rngs.data);
        let mut acc = Accumulator::default();
        for (bi, batch) in batches.iter().enumerate() {
            let x = dataset.gather(batch);
            let x_enc = perturb_inputs(&x, cfg.heuristics.input_noise, &mut s.rngs.input_noise);
            let prior_samples = sample_prior_with(&mut s.rngs.prior, &s.prior, batch.len());
            let eps = gaussian_eps(&s.model, batch.len(), &mut s.rngs.encoder_noise);
            match mmd_step(&mut s, cfg, &x, &x_enc, &prior_samples, eps.as_ref()) {
                Ok((r, p, t)) => acc.push(r, p, t, None),
                Err(e) if is_numeric_failure(&e) => {
                    return Err(TrainError::NonFinite {
                        epoch,
                        batch: bi,
                        last_good: Box::new(last_good),
                    })
                }
                Err(e) => return Err(e),
            }
        }
        s.trace.records.push(acc.record(epoch, started));
        last_good = s.snapshot(epoch + 1);
        if let Some(obs) = observer.as_deref_mut() {
            obs(&last_good);
        }
    }
    let _ = &last_good;
    Ok(s.finish(cfg.run.epochs))
}

fn mmd_step(
    s: &mut Session,
    cfg: &RunConfig,
    x: &Tensor,
    x_enc: &Tensor,
    prior_samples: &Tensor,
    eps: Option<&Tensor>,
) -> Result<(f64, f64, f64), TrainError> {
    let mut g = Graph::new();
    let nodes: ObjectiveNodes =
        wae_objective(&mut g, &s.model, None, x, x_enc, prior_samples, eps, cfg)?;
    g.backward(nodes.total)?;
    let out = (
        g.value(nodes.recon).item(),
        g.value(nodes.penalty).item(),
        g.value(nodes.total).item(),
    );
    let mut tensors = enc_dec_tensors(&mut s.model);
    apply_grads(&g, &nodes.enc_dec_params, &mut tensors, &mut s.adam)?;
    Ok(out)
}

/// Alternating updates, adversary first: ascend λ·[log D(z) + log(1−D(z̃))]
/// on the adversary, then descend recon − λ·log D(z̃) on the
/// encoder/decoder, exactly one code draw per batch.
pub fn train_wae_gan(dataset: &Dataset, cfg: &RunConfig) -> Result<TrainOutput, TrainError> {
    train_wae_gan_observed(dataset, cfg, None)
}

pub fn train_wae_gan_observed(
    dataset: &Dataset,
    cfg: &RunConfig,
    mut observer: Option<EpochObserver>,
) -> Result<TrainOutput, TrainError> {
    let mut s = Session::start(dataset, cfg, true)?;
    if cfg.heuristics.pretrain_encoder {
        pretrain_in_session(&mut s, dataset, cfg, cfg.heuristics.pretrain_steps)?;
    }
    let mut last_good = s.snapshot(0);
    for epoch in 0..cfg.run.epochs {
        let started = Instant::now();
        let factor = lr_factor(&cfg.optim.lr_schedule, epoch);
        s.adam.alpha = cfg.optim.alpha * factor;
        if let Some(da) = s.disc_adam.as_mut() {
            da.alpha = cfg.optim.disc_alpha * factor;
        }
        let batches = epoch_batches(&dataset.train_idx, cfg.run.batch_size, &mut s.rngs.data);
        let mut acc = Accumulator::default();
        for (bi, batch) in batches.iter().enumerate() {
            let x = dataset.gather(batch);
            let x_enc = perturb_inputs(&x, cfg.heuristics.input_noise, &mut s.rngs.input_noise);
            let prior_samples = sample_prior_with(&mut s.rngs.prior, &s.prior, batch.len());
            let eps = gaussian_eps(&s.model, batch.len(), &mut s.rngs.encoder_noise);
            match gan_step(&mut s, cfg, &x, &x_enc, &prior_samples, eps.as_ref()) {
                Ok((r, p, t, d)) => acc.push(r, p, t, Some(d)),
                Err(e) if is_numeric_failure(&e) => {
                    return Err(TrainError::NonFinite {
                        epoch,
                        batch: bi,
                        last_good: Box::new(last_good),
                    })
                }
                Err(e) => return Err(e),
            }
        }
        s.trace.records.push(acc.record(epoch, started));
        last_good = s.snapshot(epoch + 1);
        if let Some(obs) = observer.as_deref_mut() {
            obs(&last_good);
        }
    }
    let _ = &last_good;
    Ok(s.finish(cfg.run.epochs))
}

fn gan_step(
    s: &mut Session,
    cfg: &RunConfig,
    x: &Tensor,
    x_enc: &Tensor,
    prior_samples: &Tensor,
    eps: Option<&Tensor>,
) -> Result<(f64, f64, f64, f64), TrainError> {
    let sigma_z2 = cfg.prior.sigma_z2;
    // One code draw per batch, shared by both updates.
    let z_tilde = match eps {
        Some(e) => s.model.encode_with_eps(x_enc, e)?,
        None => s.model.encode_mean(x_enc)?,
    };

    let check = cfg.debug.check_gradient_isolation;
    let mut disc_loss_val = f64::NAN;
    for _ in 0..cfg.gan.disc_steps {
        let enc_fp = check.then(|| {
            (
                params_fingerprint(&s.model.encoder),
                params_fingerprint(&s.model.decoder),
            )
        });
        let disc = s.disc.as_ref().expect("gan session has adversary");
        let mut g = Graph::new();
        let disc_nodes = disc.network.insert_params(&mut g);
        let p_id = g.input(prior_samples.clone());
        let q_id = g.input(z_tilde.clone());
        let loss = gan_discriminator_loss(&mut g, disc, &disc_nodes, p_id, q_id, sigma_z2)?;
        let objective = g.scale(loss, -cfg.penalty.lambda)?;
        g.backward(objective)?;
        disc_loss_val = g.value(loss).item();
        let disc_mut = s.disc.as_mut().expect("gan session has adversary");
        let mut tensors = disc_mut.network.params_mut();
        apply_grads(
            &g,
            &disc_nodes,
            &mut tensors,
            s.disc_adam.as_mut().expect("adversary optimizer"),
        )?;
        if let Some((e, d)) = enc_fp {
            if e != params_fingerprint(&s.model.encoder)
                || d != params_fingerprint(&s.model.decoder)
            {
                return Err(TrainError::IsolationViolated {
                    stage: "adversary update",
                });
            }
        }
    }
    if disc_loss_val.is_nan() {
        // Frozen adversary: still record its objective for the trace.
        let disc = s.disc.as_ref().expect("gan session has adversary");
        let mut g = Graph::new();
        let disc_nodes = disc.network.insert_consts(&mut g);
        let p_id = g.input(prior_samples.clone());
        let q_id = g.input(z_tilde.clone());
        let loss = gan_discriminator_loss(&mut g, disc, &disc_nodes, p_id, q_id, sigma_z2)?;
        disc_loss_val = g.value(loss).item();
    }

    let disc_fp = check.then(|| params_fingerprint(&s.disc.as_ref().unwrap().network));
    let mut g = Graph::new();
    let disc_ref = s.disc.as_ref().expect("gan session has adversary");
    let nodes = wae_objective(
        &mut g,
        &s.model,
        Some(disc_ref),
        x,
        x_enc,
        prior_samples,
        eps,
        cfg,
    )?;
    g.backward(nodes.total)?;
    let out = (
        g.value(nodes.recon).item(),
        g.value(nodes.penalty).item(),
        g.value(nodes.total).item(),
        disc_loss_val,
    );
    let mut tensors = enc_dec_tensors(&mut s.model);
    apply_grads(&g, &nodes.enc_dec_params, &mut tensors, &mut s.adam)?;
    if let Some(fp) = disc_fp {
        if fp != params_fingerprint(&s.disc.as_ref().unwrap().network) {
            return Err(TrainError::IsolationViolated {
                stage: "encoder update",
            });
        }
    }
    Ok(out)
}

/// VAE baseline: per-example KL(Q(Z|x) ‖ N(0,I)) plus the decoder's
/// negative log-likelihood (Gaussian with fixed σ_G², normalization
/// constant dropped, or Bernoulli cross-entropy), reparameterized
/// sampling for gradient flow.
pub fn train_vae(dataset: &Dataset, cfg: &RunConfig) -> Result<TrainOutput, TrainError> {
    train_vae_observed(dataset, cfg, None)
}

pub fn train_vae_observed(
    dataset: &Dataset,
    cfg: &RunConfig,
    mut observer: Option<EpochObserver>,
) -> Result<TrainOutput, TrainError> {
    if cfg.model.encoder_kind != EncoderKind::Gaussian {
        return Err(TrainError::Config(ConfigError::Invalid(
            "vae training requires model.encoder_kind = gaussian".into(),
        )));
    }
    if cfg.vae.decoder == VaeDecoder::Bernoulli {
        let bad = dataset
            .examples
            .values()
            .iter()
            .any(|&v| !(0.0..=1.0).contains(&v));
        if bad {
            return Err(TrainError::BadData(
                "bernoulli decoder requires data in [0,1]".into(),
            ));
        }
    }
    let mut s = Session::start(dataset, cfg, false)?;
    let mut last_good = s.snapshot(0);
    for epoch in 0..cfg.run.epochs {
        let started = Instant::now();
        s.adam.alpha = cfg.optim.alpha * lr_factor(&cfg.optim.lr_schedule, epoch);
        let batches = epoch_batches(&dataset.train_idx, cfg.run.batch_size, &mut s.rngs.data);
        let mut acc = Accumulator::default();
        for (bi, batch) in batches.iter().enumerate() {
            let x = dataset.gather(batch);
            let x_enc = perturb_inputs(&x, cfg.heuristics.input_noise, &mut s.rngs.input_noise);
            let eps = standard_normal_matrix(&mut s.rngs.encoder_noise, batch.len(), s.model.d_z);
            match vae_step(&mut s, cfg, &x, &x_enc, &eps) {
                Ok((r, p, t)) => acc.push(r, p, t, None),
                Err(e) if is_numeric_failure(&e) => {
                    return Err(TrainError::NonFinite {
                        epoch,
                        batch: bi,
                        last_good: Box::new(last_good),
                    })
                }
                Err(e) => return Err(e),
            }
        }
        s.trace.records.push(acc.record(epoch, started));
        last_good = s.snapshot(epoch + 1);
        if let Some(obs) = observer.as_deref_mut() {
            obs(&last_good);
        }
    }
    let _ = &last_good;
    Ok(s.finish(cfg.run.epochs))
}

fn vae_step(
    s: &mut Session,
    cfg: &RunConfig,
    x: &Tensor,
    x_enc: &Tensor,
    eps: &Tensor,
) -> Result<(f64, f64, f64), TrainError> {
    let n = x.rows() as f64;
    let mut g = Graph::new();
    let x_in = g.input(x_enc.clone());
    let target = g.input(x.clone());
    let mut params = Vec::new();
    let (z, heads) = s.model.encode_graph(&mut g, x_in, Some(eps), &mut params)?;
    let (mu, lv) = heads.expect("gaussian encoder heads");
    let x_hat = s.model.decoder.forward(&mut g, z, &mut params)?;

    let recon = match cfg.vae.decoder {
        VaeDecoder::Gaussian => {
            let diff = g.sub(target, x_hat)?;
            let sq = g.square(diff)?;
            let sum = g.sum_all(sq)?;
            g.scale(sum, 1.0 / (2.0 * cfg.vae.sigma_g2 * n))?
        }
        VaeDecoder::Bernoulli => {
            let y = g.clamp(x_hat, CLAMP_EPS, 1.0 - CLAMP_EPS)?;
            let ln_y = g.ln(y)?;
            let hit = g.mul(target, ln_y)?;
            let neg_y = g.scale(y, -1.0)?;
            let one_minus_y = g.add_scalar(neg_y, 1.0)?;
            let ln_miss = g.ln(one_minus_y)?;
            let ones_minus_x = {
                let vals: Vec<f64> = x.values().iter().map(|v| 1.0 - v).collect();
                g.input(Tensor::new(x.shape().to_vec(), vals).expect("bce complement"))
            };
            let miss = g.mul(ones_minus_x, ln_miss)?;
            let both = g.add(hit, miss)?;
            let sum = g.sum_all(both)?;
            g.scale(sum, -1.0 / n)?
        }
    };
    let kl_sum = gaussian_kl_sum(&mut g, mu, lv)?;
    let kl_mean = g.scale(kl_sum, 1.0 / n)?;
    let total = g.add(recon, kl_mean)?;
    g.backward(total)?;
    let out = (
        g.value(recon).item(),
        g.value(kl_mean).item(),
        g.value(total).item(),
    );
    let mut tensors = enc_dec_tensors(&mut s.model);
    apply_grads(&g, &params, &mut tensors, &mut s.adam)?;
    Ok(out)
}

/// Fits the encoder alone so batch codes match the prior's mean and
/// covariance: minimizes ‖mean(z̃)‖² + ‖cov(z̃) − σ_z²·I‖²_F for the
/// given number of mini-batch steps.
pub fn pretrain_encoder(
    model: &mut AutoEncoderModel,
    dataset: &Dataset,
    prior: &PriorSpec,
    steps: usize,
    cfg: &RunConfig,
    rngs: &mut RngStreams,
) -> Result<(), TrainError> {
    if steps == 0 {
        return Ok(());
    }
    if cfg.run.batch_size < 2 {
        return Err(TrainError::BadData(
            "encoder pretraining needs batches of at least 2".into(),
        ));
    }
    let mut adam = AdamState::new(
        model.encoder.param_count(),
        cfg.optim.alpha,
        cfg.optim.beta1,
        cfg.optim.beta2,
        cfg.optim.epsilon,
    );
    let d_z = model.d_z;
    let mut target = Tensor::zeros(vec![d_z, d_z]);
    for i in 0..d_z {
        target.values_mut()[i * d_z + i] = prior.sigma_z2;
    }
    let mut done = 0usize;
    while done < steps {
        let batches = epoch_batches(&dataset.train_idx, cfg.run.batch_size, &mut rngs.data);
        if batches.is_empty() {
            return Err(TrainError::BadData(
                "train split smaller than one batch".into(),
            ));
        }
        for batch in batches {
            if done >= steps {
                break;
            }
            let x = dataset.gather(&batch);
            let n = batch.len();
            let mut g = Graph::new();
            let x_in = g.input(x);
            let mut params = Vec::new();
            let out = model.encoder.forward(&mut g, x_in, &mut params)?;
            let z = match model.encoder_kind {
                EncoderKind::Deterministic => out,
                EncoderKind::Gaussian => g.slice_cols(out, 0, d_z)?,
            };
            let mean = g.mean_rows(z)?;
            let mean_sq = g.square(mean)?;
            let mean_loss = g.sum_all(mean_sq)?;
            let centered = g.broadcast_sub_row(z, mean)?;
            let outer = g.matmul_tn(centered, centered)?;
            let cov = g.scale(outer, 1.0 / (n as f64 - 1.0))?;
            let target_id = g.input(target.clone());
            let cov_diff = g.sub(cov, target_id)?;
            let cov_sq = g.square(cov_diff)?;
            let cov_loss = g.sum_all(cov_sq)?;
            let loss = g.add(mean_loss, cov_loss)?;
            g.backward(loss)?;
            let mut tensors = model.encoder.params_mut();
            apply_grads(&g, &params, &mut tensors, &mut adam)?;
            done += 1;
        }
    }
    Ok(())
}

fn pretrain_in_session(
    s: &mut Session,
    dataset: &Dataset,
    cfg: &RunConfig,
    steps: usize,
) -> Result<(), TrainError> {
    let prior = s.prior;
    let Session { model, rngs, .. } = s;
    pretrain_encoder(model, dataset, &prior, steps, cfg, rngs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{sample_gaussian_mixture, split, SyntheticKind, SyntheticSpec};
    use crate::divergence::KernelKind;
    use crate::models::reconstruction_cost;

    fn mixture_dataset(count: usize, seed: u64) -> Dataset {
        let ds = sample_gaussian_mixture(&SyntheticSpec {
            kind: SyntheticKind::GaussianMixture,
            mode_count: 8,
            mode_std: 0.1,
            radius: 2.0,
            sample_count: count,
            seed,
        })
        .unwrap();
        split(ds, 0.2, seed).unwrap()
    }

    fn small_mmd_config() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.run.seed = 3;
        cfg.run.epochs = 12;
        cfg.run.batch_size = 32;
        cfg.model.d_x = 2;
        cfg.model.d_z = 2;
        cfg.model.encoder_hidden = vec![32, 32];
        cfg.model.decoder_hidden = vec![32, 32];
        cfg.penalty.kind = PenaltyKind::Mmd;
        cfg.penalty.kernel = KernelKind::Imq;
        cfg.optim.lr_schedule = vec![];
        cfg
    }

    #[test]
    fn zero_epochs_returns_initialized_model() {
        let ds = mixture_dataset(200, 1);
        let mut cfg = small_mmd_config();
        cfg.run.epochs = 0;
        let out = train(&ds, &cfg).unwrap();
        assert_eq!(out.epochs_done, 0);
        assert!(out.trace.records.is_empty());

        let mut rngs = RngStreams::new(cfg.run.seed);
        let init = AutoEncoderModel::init(&cfg, &mut rngs.weights);
        for (a, b) in out.model.encoder.params().iter().zip(init.encoder.params()) {
            assert_eq!(a.values(), b.values());
        }
    }

    #[test]
    fn mmd_training_reduces_both_terms() {
        let ds = mixture_dataset(400, 2);
        let cfg = small_mmd_config();
        let out = train(&ds, &cfg).unwrap();
        let first = &out.trace.records[0];
        let last = out.trace.records.last().unwrap();
        assert!(last.recon < first.recon, "{} !< {}", last.recon, first.recon);
        assert!(
            last.penalty < first.penalty,
            "{} !< {}",
            last.penalty,
            first.penalty
        );
        for r in &out.trace.records {
            assert!(
                (r.total - (r.recon + cfg.penalty.lambda * r.penalty)).abs() < 1e-12,
                "decomposition at epoch {}",
                r.epoch
            );
        }
    }

    #[test]
    fn trainers_are_deterministic_per_seed() {
        let ds = mixture_dataset(200, 4);
        for kind in [PenaltyKind::Mmd, PenaltyKind::Gan, PenaltyKind::VaeKl] {
            let mut cfg = small_mmd_config();
            cfg.run.epochs = 3;
            cfg.penalty.kind = kind;
            if kind == PenaltyKind::Gan {
                cfg.penalty.lambda = 1.0;
                cfg.gan.disc_hidden = vec![16];
            }
            if kind == PenaltyKind::VaeKl {
                cfg.model.encoder_kind = EncoderKind::Gaussian;
            }
            let a = train(&ds, &cfg).unwrap();
            let b = train(&ds, &cfg).unwrap();
            assert_eq!(
                a.trace.to_csv_deterministic(),
                b.trace.to_csv_deterministic(),
                "trace determinism for {kind:?}"
            );
            for (pa, pb) in a.model.encoder.params().iter().zip(b.model.encoder.params()) {
                assert_eq!(pa.values(), pb.values(), "params for {kind:?}");
            }
        }
    }

    #[test]
    fn frozen_zero_disc_keeps_penalty_at_log_two() {
        let ds = mixture_dataset(200, 5);
        let mut cfg = small_mmd_config();
        cfg.run.epochs = 4;
        cfg.penalty.kind = PenaltyKind::Gan;
        cfg.penalty.lambda = 1.0;
        cfg.gan.disc_steps = 0;
        cfg.debug.frozen_zero_disc = true;
        let out = train(&ds, &cfg).unwrap();
        let ln2 = 2.0f64.ln();
        for r in &out.trace.records {
            assert!(
                (r.penalty - ln2).abs() < 1e-12,
                "penalty {} vs log 2",
                r.penalty
            );
        }
        // Training is then pure reconstruction.
        let first = &out.trace.records[0];
        let last = out.trace.records.last().unwrap();
        assert!(last.recon < first.recon);
    }

    #[test]
    fn gan_disc_loss_bounded_by_clamp() {
        let ds = mixture_dataset(300, 6);
        let mut cfg = small_mmd_config();
        cfg.run.epochs = 8;
        cfg.penalty.kind = PenaltyKind::Gan;
        cfg.penalty.lambda = 1.0;
        cfg.gan.disc_hidden = vec![32];
        cfg.debug.check_gradient_isolation = true;
        let out = train(&ds, &cfg).unwrap();
        let bound = 2.0 * CLAMP_EPS.ln();
        for r in &out.trace.records {
            let d = r.disc_loss.unwrap();
            assert!(d.is_finite());
            assert!(d <= 1e-9, "loss of logs must be <= 0, got {d}");
            assert!(d >= bound, "clamp bound violated: {d} < {bound}");
            assert!((-20.0..=0.0).contains(&d), "outside observed range: {d}");
        }
    }

    #[test]
    fn vae_high_decoder_variance_shrinks_codes() {
        // σ_G² huge: KL dominates, so encoder means collapse toward 0.
        let ds = mixture_dataset(200, 7);
        let mut cfg = small_mmd_config();
        cfg.run.epochs = 10;
        cfg.penalty.kind = PenaltyKind::VaeKl;
        cfg.model.encoder_kind = EncoderKind::Gaussian;
        cfg.vae.sigma_g2 = 1e6;

        let mut rngs = RngStreams::new(cfg.run.seed);
        let init = AutoEncoderModel::init(&cfg, &mut rngs.weights);
        let x = ds.train();
        let mu0 = init.encode_mean(&x).unwrap();
        let norm0: f64 = mu0.values().iter().map(|v| v * v).sum::<f64>().sqrt();

        let out = train(&ds, &cfg).unwrap();
        let mu1 = out.model.encode_mean(&x).unwrap();
        let norm1: f64 = mu1.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm1 < norm0, "{norm1} !< {norm0}");
    }

    #[test]
    fn vae_zero_weight_encoder_has_zero_kl() {
        let mut cfg = small_mmd_config();
        cfg.penalty.kind = PenaltyKind::VaeKl;
        cfg.model.encoder_kind = EncoderKind::Gaussian;
        let mut rngs = RngStreams::new(0);
        let mut model = AutoEncoderModel::init(&cfg, &mut rngs.weights);
        for layer in &mut model.encoder.layers {
            layer.weights.values_mut().fill(0.0);
            layer.bias.values_mut().fill(0.0);
        }
        let x = Tensor::matrix(4, 2, vec![0.5; 8]).unwrap();
        let out = model.encoder.apply(&x);
        // μ = 0 and log-variance = 0 → KL exactly 0.
        let kl = crate::divergence::gaussian_kl(&out.row(0)[..2], &out.row(0)[2..]);
        assert_eq!(kl, 0.0);
    }

    #[test]
    fn bernoulli_requires_unit_interval_data() {
        let ds = mixture_dataset(100, 8); // 2D points stray outside [0,1]
        let mut cfg = small_mmd_config();
        cfg.penalty.kind = PenaltyKind::VaeKl;
        cfg.model.encoder_kind = EncoderKind::Gaussian;
        cfg.model.decoder_output = Activation::Sigmoid;
        cfg.vae.decoder = VaeDecoder::Bernoulli;
        assert!(matches!(
            train(&ds, &cfg),
            Err(TrainError::BadData(_))
        ));
    }

    #[test]
    fn pretraining_moves_batch_mean_toward_zero() {
        let ds = mixture_dataset(300, 9);
        let cfg = small_mmd_config();
        let prior = cfg.prior_spec();

        let mut rngs = RngStreams::new(11);
        let mut model = AutoEncoderModel::init(&cfg, &mut rngs.weights);
        let x = ds.train();
        let z0 = model.encode_mean(&x).unwrap();
        let mean_norm = |z: &Tensor| -> f64 {
            let n = z.rows() as f64;
            let d = z.cols();
            let mut m = vec![0.0; d];
            for i in 0..z.rows() {
                for (j, mj) in m.iter_mut().enumerate() {
                    *mj += z.row(i)[j] / n;
                }
            }
            m.iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        let before = mean_norm(&z0);
        pretrain_encoder(&mut model, &ds, &prior, 60, &cfg, &mut rngs).unwrap();
        let after = mean_norm(&model.encode_mean(&x).unwrap());
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn pretraining_zero_steps_is_identity() {
        let ds = mixture_dataset(100, 10);
        let cfg = small_mmd_config();
        let prior = cfg.prior_spec();
        let mut rngs = RngStreams::new(12);
        let mut model = AutoEncoderModel::init(&cfg, &mut rngs.weights);
        let snapshot: Vec<Vec<f64>> = model
            .encoder
            .params()
            .iter()
            .map(|t| t.values().to_vec())
            .collect();
        pretrain_encoder(&mut model, &ds, &prior, 0, &cfg, &mut rngs).unwrap();
        for (t, s) in model.encoder.params().iter().zip(&snapshot) {
            assert_eq!(t.values(), s.as_slice());
        }
    }

    #[test]
    fn lambda_zero_matches_reconstruction_only_loop() {
        // With the penalty exactly zero-weighted the parameter trajectory
        // is identical to a plain auto-encoder on the same streams.
        let ds = mixture_dataset(160, 13);
        let mut cfg = small_mmd_config();
        cfg.run.epochs = 4;
        cfg.penalty.lambda = 0.0;
        let out = train_wae_mmd(&ds, &cfg).unwrap();

        // Reference: reconstruction-only trainer sharing init and batch
        // order (prior/noise streams are independent, so skipping the
        // penalty does not shift anything else).
        let mut rngs = RngStreams::new(cfg.run.seed);
        let mut model = AutoEncoderModel::init(&cfg, &mut rngs.weights);
        let mut adam = AdamState::new(
            model.encoder.param_count() + model.decoder.param_count(),
            cfg.optim.alpha,
            cfg.optim.beta1,
            cfg.optim.beta2,
            cfg.optim.epsilon,
        );
        for _epoch in 0..cfg.run.epochs {
            let batches = epoch_batches(&ds.train_idx, cfg.run.batch_size, &mut rngs.data);
            for batch in batches {
                let x = ds.gather(&batch);
                let mut g = Graph::new();
                let x_in = g.input(x.clone());
                let target = g.input(x);
                let mut params = Vec::new();
                let (z, _) = model.encode_graph(&mut g, x_in, None, &mut params).unwrap();
                let x_hat = model.decoder.forward(&mut g, z, &mut params).unwrap();
                let recon = reconstruction_cost(&mut g, target, x_hat).unwrap();
                g.backward(recon).unwrap();
                let mut tensors = enc_dec_tensors(&mut model);
                apply_grads(&g, &params, &mut tensors, &mut adam).unwrap();
            }
        }
        for (a, b) in out
            .model
            .encoder
            .params()
            .iter()
            .chain(out.model.decoder.params().iter())
            .zip(model.encoder.params().iter().chain(model.decoder.params().iter()))
        {
            assert_eq!(a.values(), b.values());
        }
    }
}
