//! Encoder/decoder models, training objectives, and the three trainers.

pub mod checkpoint;
pub mod config;
mod train;

pub use train::{
    pretrain_encoder, train, train_observed, train_vae, train_vae_observed, train_wae_gan,
    train_wae_gan_observed, train_wae_mmd, train_wae_mmd_observed, EpochObserver, EpochRecord,
    TrainError, TrainOutput, TrainingTrace,
};

use crate::divergence::{gan_encoder_penalty, mmd_penalty, LatentDiscriminator};
use crate::graph::{Graph, GraphError, NodeId};
use crate::nn::{init_params, mlp_dims, relu_stack_activations, Activation, Mlp};
use crate::tensor::Tensor;
use config::{EncoderKind, PenaltyKind, PriorSpec, RunConfig};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("batch has {got} columns, model expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("interpolation needs steps >= 2, got {0}")]
    TooFewSteps(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Paired encoder μ_φ (with an extra log-variance head when Gaussian) and
/// decoder G_θ.
#[derive(Debug, Clone)]
pub struct AutoEncoderModel {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub encoder_kind: EncoderKind,
    pub d_z: usize,
    pub d_x: usize,
}

impl AutoEncoderModel {
    pub fn init(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Self {
        let m = &cfg.model;
        let enc_out = match m.encoder_kind {
            EncoderKind::Deterministic => m.d_z,
            EncoderKind::Gaussian => 2 * m.d_z,
        };
        let enc_dims = mlp_dims(m.d_x, &m.encoder_hidden, enc_out);
        let enc_acts = relu_stack_activations(enc_dims.len() - 1, Activation::Identity);
        let encoder = init_params(&enc_dims, &enc_acts, rng);

        let dec_dims = mlp_dims(m.d_z, &m.decoder_hidden, m.d_x);
        let dec_acts = relu_stack_activations(dec_dims.len() - 1, m.decoder_output);
        let decoder = init_params(&dec_dims, &dec_acts, rng);

        Self {
            encoder,
            decoder,
            encoder_kind: m.encoder_kind,
            d_z: m.d_z,
            d_x: m.d_x,
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<(), ModelError> {
        if x.cols() != self.d_x {
            return Err(ModelError::DimensionMismatch {
                got: x.cols(),
                expected: self.d_x,
            });
        }
        Ok(())
    }

    /// Deterministic code head μ_φ(x); for Gaussian encoders this is the
    /// mean head.
    pub fn encode_mean(&self, x: &Tensor) -> Result<Tensor, ModelError> {
        self.check_input(x)?;
        let out = self.encoder.apply(x);
        match self.encoder_kind {
            EncoderKind::Deterministic => Ok(out),
            EncoderKind::Gaussian => {
                let n = out.rows();
                let mut mu = Vec::with_capacity(n * self.d_z);
                for i in 0..n {
                    mu.extend_from_slice(&out.row(i)[..self.d_z]);
                }
                Ok(Tensor::matrix(n, self.d_z, mu).expect("mean head shape"))
            }
        }
    }

    /// Draws codes from Q(Z|x): exactly μ_φ(x) for deterministic
    /// encoders (the rng is untouched), or μ + e^{lv/2}⊙ε with ε drawn
    /// from `rng` for Gaussian ones.
    pub fn encode(&self, x: &Tensor, rng: &mut ChaCha8Rng) -> Result<Tensor, ModelError> {
        self.check_input(x)?;
        match self.encoder_kind {
            EncoderKind::Deterministic => self.encode_mean(x),
            EncoderKind::Gaussian => {
                let eps = standard_normal_matrix(rng, x.rows(), self.d_z);
                self.encode_with_eps(x, &eps)
            }
        }
    }

    /// Gaussian reparameterization with caller-supplied noise, so training
    /// and evaluation stay deterministic per stream.
    pub fn encode_with_eps(&self, x: &Tensor, eps: &Tensor) -> Result<Tensor, ModelError> {
        self.check_input(x)?;
        let out = self.encoder.apply(x);
        let n = out.rows();
        let mut z = Vec::with_capacity(n * self.d_z);
        for i in 0..n {
            let row = out.row(i);
            let er = eps.row(i);
            for j in 0..self.d_z {
                let mu = row[j];
                let lv = row[self.d_z + j];
                z.push(mu + (0.5 * lv).exp() * er[j]);
            }
        }
        Ok(Tensor::matrix(n, self.d_z, z).expect("encode shape"))
    }

    pub fn decode(&self, z: &Tensor) -> Tensor {
        self.decoder.apply(z)
    }

    pub fn reconstruct(&self, x: &Tensor) -> Result<Tensor, ModelError> {
        Ok(self.decode(&self.encode_mean(x)?))
    }

    /// Draws z ~ N(0, σ_z²·I) from `rng` and decodes it.
    pub fn sample(&self, prior: &PriorSpec, count: usize, rng: &mut ChaCha8Rng) -> Tensor {
        let z = crate::data::sample_prior_with(rng, prior, count);
        self.decode(&z)
    }

    /// Decodes the straight line between μ_φ(x) and μ_φ(y): steps points
    /// with t = 0, 1/(steps−1), …, 1, so the endpoints are exactly the
    /// two reconstructions.
    pub fn interpolate(&self, x: &Tensor, y: &Tensor, steps: usize) -> Result<Tensor, ModelError> {
        if steps < 2 {
            return Err(ModelError::TooFewSteps(steps));
        }
        let zx = self.encode_mean(x)?;
        let zy = self.encode_mean(y)?;
        let d = self.d_z;
        let mut zs = Vec::with_capacity(steps * d);
        for s in 0..steps {
            let t = s as f64 / (steps - 1) as f64;
            for j in 0..d {
                zs.push((1.0 - t) * zx.values()[j] + t * zy.values()[j]);
            }
        }
        Ok(self.decode(&Tensor::matrix(steps, d, zs).expect("interp shape")))
    }

    /// In-graph encoding; appends encoder parameter nodes to `params`.
    /// Gaussian encoders also return the (mean, log-variance) heads.
    pub fn encode_graph(
        &self,
        g: &mut Graph,
        x: NodeId,
        eps: Option<&Tensor>,
        params: &mut Vec<NodeId>,
    ) -> Result<(NodeId, Option<(NodeId, NodeId)>), GraphError> {
        let out = self.encoder.forward(g, x, params)?;
        match self.encoder_kind {
            EncoderKind::Deterministic => Ok((out, None)),
            EncoderKind::Gaussian => {
                let mu = g.slice_cols(out, 0, self.d_z)?;
                let lv = g.slice_cols(out, self.d_z, self.d_z)?;
                let eps = eps.expect("gaussian encoder needs noise");
                let eps_id = g.input(eps.clone());
                let half_lv = g.scale(lv, 0.5)?;
                let sd = g.exp(half_lv)?;
                let noise = g.mul(eps_id, sd)?;
                let z = g.add(mu, noise)?;
                Ok((z, Some((mu, lv))))
            }
        }
    }
}

pub(crate) fn standard_normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let vals: Vec<f64> = (0..rows * cols)
        .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect();
    Tensor::matrix(rows, cols, vals).expect("noise shape")
}

/// Mean over the batch of per-example squared Euclidean distance.
pub fn reconstruction_cost(
    g: &mut Graph,
    x: NodeId,
    x_hat: NodeId,
) -> Result<NodeId, GraphError> {
    let n = g.value(x).rows() as f64;
    let diff = g.sub(x, x_hat)?;
    let sq = g.square(diff)?;
    let s = g.sum_all(sq)?;
    g.scale(s, 1.0 / n)
}

/// Value-level reconstruction cost (same arithmetic as the graph path).
pub fn reconstruction_cost_value(x: &Tensor, x_hat: &Tensor) -> Result<f64, GraphError> {
    let mut g = Graph::new();
    let a = g.input(x.clone());
    let b = g.input(x_hat.clone());
    let c = reconstruction_cost(&mut g, a, b)?;
    Ok(g.value(c).item())
}

/// Objective graph for one mini-batch: total = recon + λ·penalty.
pub struct ObjectiveNodes {
    pub total: NodeId,
    pub recon: NodeId,
    pub penalty: NodeId,
    /// Encoder then decoder parameter nodes, flattening order.
    pub enc_dec_params: Vec<NodeId>,
}

/// Builds the penalized transport objective on fresh prior samples of the
/// same batch size. `x_target` is the clean reconstruction target;
/// `x_enc_in` is the (possibly noise-perturbed) encoder input.
#[allow(clippy::too_many_arguments)]
pub fn wae_objective(
    g: &mut Graph,
    model: &AutoEncoderModel,
    disc: Option<&LatentDiscriminator>,
    x_target: &Tensor,
    x_enc_in: &Tensor,
    prior_samples: &Tensor,
    eps: Option<&Tensor>,
    cfg: &RunConfig,
) -> Result<ObjectiveNodes, TrainError> {
    let x_in = g.input(x_enc_in.clone());
    let target = g.input(x_target.clone());
    let mut params = Vec::new();
    let (z, _heads) = model.encode_graph(g, x_in, eps, &mut params)?;
    let x_hat = model.decoder.forward(g, z, &mut params)?;
    let recon = reconstruction_cost(g, target, x_hat)?;

    let penalty = match cfg.penalty.kind {
        PenaltyKind::Mmd => {
            let prior_id = g.input(prior_samples.clone());
            mmd_penalty(g, &cfg.kernel_spec(), prior_id, z)?
        }
        PenaltyKind::Gan => {
            let disc = disc.expect("gan objective needs a discriminator");
            let disc_nodes = disc.network.insert_consts(g);
            gan_encoder_penalty(g, disc, &disc_nodes, z, cfg.prior.sigma_z2)?
        }
        PenaltyKind::VaeKl => unreachable!("vae objective is built by its trainer"),
    };
    let scaled = g.scale(penalty, cfg.penalty.lambda)?;
    let total = g.add(recon, scaled)?;
    Ok(ObjectiveNodes {
        total,
        recon,
        penalty,
        enc_dec_params: params,
    })
}

/// Truncated pixel noise for the encoder input path: i.i.d.
/// N(0, 0.01²) with every component clipped to ±0.01. With the heuristic
/// off the batch passes through untouched.
pub fn perturb_inputs(x: &Tensor, enabled: bool, rng: &mut ChaCha8Rng) -> Tensor {
    if !enabled {
        return x.clone();
    }
    const NOISE_SD: f64 = 0.01;
    const TRUNC: f64 = 0.01;
    let vals: Vec<f64> = x
        .values()
        .iter()
        .map(|&v| {
            let e: f64 = StandardNormal.sample(rng);
            v + (NOISE_SD * e).clamp(-TRUNC, TRUNC)
        })
        .collect();
    Tensor::new(x.shape().to_vec(), vals).expect("perturb shape")
}
