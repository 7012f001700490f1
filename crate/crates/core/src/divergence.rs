//! Latent-space discrepancy measures: the MMD penalty with RBF and
//! inverse-multiquadratics kernels, the adversarial latent penalty, and
//! the closed-form diagonal-Gaussian KL.

use crate::graph::{Graph, GraphError, NodeId};
use crate::nn::Mlp;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sigmoid outputs are clamped to `[CLAMP_EPS, 1 − CLAMP_EPS]` before any
/// log, silently; this caps per-term log magnitudes at |ln 1e-7| ≈ 16.1.
pub const CLAMP_EPS: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum DivergenceError {
    #[error("dimension mismatch: {lhs} vs {rhs}")]
    DimensionMismatch { lhs: usize, rhs: usize },
    #[error("latent batch needs at least 2 rows, got {n}")]
    BatchTooSmall { n: usize },
    #[error("kernel scale must be positive, got {0}")]
    BadScale(f64),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// k(x,y) = exp(−‖x−y‖² / scale)
    Rbf,
    /// k(x,y) = scale / (scale + ‖x−y‖²)
    Imq,
}

/// A positive-definite kernel choice with its scale parameter. Both kinds
/// satisfy k(x,x) = 1 at any scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub scale: f64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, scale: f64) -> Result<Self, DivergenceError> {
        if !(scale > 0.0) {
            return Err(DivergenceError::BadScale(scale));
        }
        Ok(Self { kind, scale })
    }

    /// The expected squared distance between two draws from
    /// N(0, σ_z²·I_{d_z}); the default IMQ constant.
    pub fn default_imq_scale(d_z: usize, sigma_z2: f64) -> f64 {
        2.0 * d_z as f64 * sigma_z2
    }

    fn from_sqdist(&self, d2: f64) -> f64 {
        match self.kind {
            KernelKind::Rbf => (-d2 / self.scale).exp(),
            KernelKind::Imq => self.scale / (self.scale + d2),
        }
    }
}

/// Kernel evaluation on plain vectors; symmetric, equal to 1 iff x = y.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64, DivergenceError> {
    if x.len() != y.len() {
        return Err(DivergenceError::DimensionMismatch {
            lhs: x.len(),
            rhs: y.len(),
        });
    }
    let d2: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    Ok(spec.from_sqdist(d2))
}

/// Matched prior/encoded latent batches; the MMD estimator needs n ≥ 2.
#[derive(Debug, Clone)]
pub struct LatentBatchPair {
    pub prior_samples: Tensor,
    pub encoded_samples: Tensor,
}

impl LatentBatchPair {
    pub fn new(prior_samples: Tensor, encoded_samples: Tensor) -> Result<Self, DivergenceError> {
        if prior_samples.shape() != encoded_samples.shape() {
            return Err(DivergenceError::DimensionMismatch {
                lhs: prior_samples.cols(),
                rhs: encoded_samples.cols(),
            });
        }
        let n = prior_samples.rows();
        if n < 2 {
            return Err(DivergenceError::BatchTooSmall { n });
        }
        Ok(Self {
            prior_samples,
            encoded_samples,
        })
    }

    pub fn n(&self) -> usize {
        self.prior_samples.rows()
    }
}

fn kernel_graph(g: &mut Graph, spec: &KernelSpec, d2: NodeId) -> Result<NodeId, GraphError> {
    match spec.kind {
        KernelKind::Rbf => {
            let s = g.scale(d2, -1.0 / spec.scale)?;
            g.exp(s)
        }
        KernelKind::Imq => {
            let den = g.add_scalar(d2, spec.scale)?;
            let r = g.recip(den)?;
            g.scale(r, spec.scale)
        }
    }
}

/// The mini-batch MMD estimator
///   1/(n(n−1)) Σ_{ℓ≠j} k(z_ℓ,z_j) + 1/(n(n−1)) Σ_{ℓ≠j} k(z̃_ℓ,z̃_j)
///   − 2/n² Σ_{ℓ,j} k(z_ℓ,z̃_j)
/// without any λ factor (applied by the caller). The off-diagonal sums
/// use k(z,z) = 1 on the diagonal; the diagonal contributes no gradient
/// because ∂‖z_i−z_i‖²/∂z = 0.
pub fn mmd_penalty(
    g: &mut Graph,
    spec: &KernelSpec,
    prior: NodeId,
    encoded: NodeId,
) -> Result<NodeId, DivergenceError> {
    let (pn, pd) = (g.value(prior).rows(), g.value(prior).cols());
    let (en, ed) = (g.value(encoded).rows(), g.value(encoded).cols());
    if pd != ed {
        return Err(DivergenceError::DimensionMismatch { lhs: pd, rhs: ed });
    }
    if pn != en {
        return Err(DivergenceError::DimensionMismatch { lhs: pn, rhs: en });
    }
    let n = pn;
    if n < 2 {
        return Err(DivergenceError::BatchTooSmall { n });
    }
    let nf = n as f64;
    let off_diag = 1.0 / (nf * (nf - 1.0));

    let dzz = g.pairwise_sqdist(prior, prior)?;
    let kzz = kernel_graph(g, spec, dzz)?;
    let szz = g.sum_all(kzz)?;
    let szz = g.add_scalar(szz, -nf)?;
    let within_prior = g.scale(szz, off_diag)?;

    let dee = g.pairwise_sqdist(encoded, encoded)?;
    let kee = kernel_graph(g, spec, dee)?;
    let see = g.sum_all(kee)?;
    let see = g.add_scalar(see, -nf)?;
    let within_encoded = g.scale(see, off_diag)?;

    let dze = g.pairwise_sqdist(prior, encoded)?;
    let kze = kernel_graph(g, spec, dze)?;
    let sze = g.sum_all(kze)?;
    let cross = g.scale(sze, -2.0 / (nf * nf))?;

    let within = g.add(within_prior, within_encoded)?;
    Ok(g.add(within, cross)?)
}

/// Value-level MMD estimator over a batch pair (same computation as the
/// differentiable path).
pub fn mmd_value(spec: &KernelSpec, batch: &LatentBatchPair) -> Result<f64, DivergenceError> {
    let mut g = Graph::new();
    let p = g.input(batch.prior_samples.clone());
    let e = g.input(batch.encoded_samples.clone());
    let out = mmd_penalty(&mut g, spec, p, e)?;
    Ok(g.value(out).item())
}

/// Latent adversary: a dense stack mapping codes to one logit per row,
/// optionally adding the analytic prior log-density to its output.
#[derive(Debug, Clone)]
pub struct LatentDiscriminator {
    pub network: Mlp,
    pub add_log_prior: bool,
}

/// log N(z; 0, σ_z²·I) for one code.
pub fn log_prior_density(z: &[f64], sigma_z2: f64) -> f64 {
    let d = z.len() as f64;
    let sq: f64 = z.iter().map(|v| v * v).sum();
    -0.5 * d * (2.0 * std::f64::consts::PI * sigma_z2).ln() - sq / (2.0 * sigma_z2)
}

/// Adds the analytic log prior to a raw adversary logit.
pub fn log_prior_adjust(logit: f64, z: &[f64], sigma_z2: f64) -> f64 {
    logit + log_prior_density(z, sigma_z2)
}

/// Per-row log prior as an [n×1] graph node; the gradient −z/σ_z² flows
/// into the codes.
fn log_prior_col(
    g: &mut Graph,
    z: NodeId,
    sigma_z2: f64,
) -> Result<NodeId, GraphError> {
    let d = g.value(z).cols() as f64;
    let sq = g.square(z)?;
    let rows = g.row_sum(sq)?;
    let scaled = g.scale(rows, -1.0 / (2.0 * sigma_z2))?;
    g.add_scalar(
        scaled,
        -0.5 * d * (2.0 * std::f64::consts::PI * sigma_z2).ln(),
    )
}

fn adjusted_logit(
    g: &mut Graph,
    disc: &LatentDiscriminator,
    disc_nodes: &[NodeId],
    z: NodeId,
    sigma_z2: f64,
) -> Result<NodeId, GraphError> {
    let logit = disc.network.forward_given(g, z, disc_nodes)?;
    if disc.add_log_prior {
        let lp = log_prior_col(g, z, sigma_z2)?;
        g.add(logit, lp)
    } else {
        Ok(logit)
    }
}

fn clamped_prob(g: &mut Graph, logit: NodeId) -> Result<NodeId, GraphError> {
    let p = g.sigmoid(logit)?;
    g.clamp(p, CLAMP_EPS, 1.0 - CLAMP_EPS)
}

/// Discriminator objective (1/n)Σ [log D(z_i) + log(1 − D(z̃_i))], to be
/// ascended; λ is applied by the caller. `disc_nodes` decides whether the
/// adversary's parameters receive gradients.
pub fn gan_discriminator_loss(
    g: &mut Graph,
    disc: &LatentDiscriminator,
    disc_nodes: &[NodeId],
    prior: NodeId,
    encoded: NodeId,
    sigma_z2: f64,
) -> Result<NodeId, DivergenceError> {
    let n = g.value(prior).rows() as f64;
    let logit_p = adjusted_logit(g, disc, disc_nodes, prior, sigma_z2)?;
    let p = clamped_prob(g, logit_p)?;
    let log_p = g.ln(p)?;
    let sum_real = g.sum_all(log_p)?;

    let logit_q = adjusted_logit(g, disc, disc_nodes, encoded, sigma_z2)?;
    let q = clamped_prob(g, logit_q)?;
    let neg_q = g.scale(q, -1.0)?;
    let one_minus_q = g.add_scalar(neg_q, 1.0)?;
    let log_1mq = g.ln(one_minus_q)?;
    let sum_fake = g.sum_all(log_1mq)?;

    let total = g.add(sum_real, sum_fake)?;
    Ok(g.scale(total, 1.0 / n)?)
}

/// Non-saturating encoder penalty −(1/n)Σ log D(z̃_i); the adversary's
/// parameters must be inserted as constants so only the codes receive
/// gradients.
pub fn gan_encoder_penalty(
    g: &mut Graph,
    disc: &LatentDiscriminator,
    disc_nodes: &[NodeId],
    encoded: NodeId,
    sigma_z2: f64,
) -> Result<NodeId, DivergenceError> {
    let n = g.value(encoded).rows() as f64;
    let logit = adjusted_logit(g, disc, disc_nodes, encoded, sigma_z2)?;
    let p = clamped_prob(g, logit)?;
    let log_p = g.ln(p)?;
    let s = g.sum_all(log_p)?;
    Ok(g.scale(s, -1.0 / n)?)
}

/// KL(N(μ, diag e^{log_var}) ‖ N(0, I)) = ½ Σ (μ² + e^{lv} − lv − 1),
/// summed over all entries of the given tensors.
pub fn gaussian_kl_sum(
    g: &mut Graph,
    mu: NodeId,
    log_var: NodeId,
) -> Result<NodeId, GraphError> {
    let mu2 = g.square(mu)?;
    let ev = g.exp(log_var)?;
    let a = g.add(mu2, ev)?;
    let lv1 = g.add_scalar(log_var, 1.0)?;
    let t = g.sub(a, lv1)?;
    let s = g.sum_all(t)?;
    g.scale(s, 0.5)
}

/// Value-level closed-form KL for one diagonal Gaussian.
pub fn gaussian_kl(mu: &[f64], log_var: &[f64]) -> f64 {
    mu.iter()
        .zip(log_var)
        .map(|(&m, &lv)| m * m + lv.exp() - lv - 1.0)
        .sum::<f64>()
        * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_params, Activation};
    use crate::rng::{stream_rng, Stream};
    use rand::Rng;

    fn imq(scale: f64) -> KernelSpec {
        KernelSpec::new(KernelKind::Imq, scale).unwrap()
    }

    fn rbf(scale: f64) -> KernelSpec {
        KernelSpec::new(KernelKind::Rbf, scale).unwrap()
    }

    #[test]
    fn kernel_at_zero_distance_is_one() {
        let x = [0.3, -0.7];
        assert_eq!(kernel_eval(&imq(1.0), &x, &x).unwrap(), 1.0);
        assert_eq!(kernel_eval(&rbf(0.5), &x, &x).unwrap(), 1.0);
    }

    #[test]
    fn imq_halves_at_distance_equal_to_scale() {
        // C = 2, ‖x−y‖² = 2 → C/(C+C) = 0.5
        let k = kernel_eval(&imq(2.0), &[0.0], &[2.0f64.sqrt()]).unwrap();
        assert!((k - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rbf_unit_distance() {
        let k = kernel_eval(&rbf(1.0), &[0.0], &[1.0]).unwrap();
        assert!((k - (-1.0f64).exp()).abs() < 1e-12);
        assert!((k - 0.367_879_4).abs() < 1e-7);
    }

    #[test]
    fn kernel_dimension_mismatch() {
        assert!(matches!(
            kernel_eval(&imq(1.0), &[0.0], &[0.0, 1.0]),
            Err(DivergenceError::DimensionMismatch { lhs: 1, rhs: 2 })
        ));
    }

    #[test]
    fn kernel_symmetry_on_random_pairs() {
        let mut rng = stream_rng(17, Stream::Eval);
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let y: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            for spec in [imq(2.0), rbf(1.5)] {
                let a = kernel_eval(&spec, &x, &y).unwrap();
                let b = kernel_eval(&spec, &y, &x).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn mmd_two_point_identical_batches() {
        // z = z̃ = {a, b}: estimator reduces to k(a,b) − 1.
        let a = vec![0.0, 0.0];
        let b = vec![1.0, 2.0];
        let spec = imq(2.0);
        let kappa = kernel_eval(&spec, &a, &b).unwrap();
        let m = Tensor::matrix(2, 2, [a, b].concat()).unwrap();
        let pair = LatentBatchPair::new(m.clone(), m).unwrap();
        let v = mmd_value(&spec, &pair).unwrap();
        assert!((v - (kappa - 1.0)).abs() < 1e-12, "v={v}, κ−1={}", kappa - 1.0);
    }

    #[test]
    fn mmd_far_separation_drops_cross_term() {
        let mut rng = stream_rng(3, Stream::Eval);
        let n = 8;
        let z: Vec<f64> = (0..n * 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let shifted: Vec<f64> = z.iter().map(|v| v + 1e6).collect();
        let spec = imq(2.0);
        let zt = Tensor::matrix(n, 2, z.clone()).unwrap();
        let st = Tensor::matrix(n, 2, shifted).unwrap();
        let pair = LatentBatchPair::new(zt.clone(), st).unwrap();
        let v = mmd_value(&spec, &pair).unwrap();

        // Expected limit: both within-terms only.
        let nf = n as f64;
        let mut within = 0.0;
        for l in 0..n {
            for j in 0..n {
                if l != j {
                    within += kernel_eval(&spec, zt.row(l), zt.row(j)).unwrap();
                }
            }
        }
        let expected = 2.0 * within / (nf * (nf - 1.0));
        assert!((v - expected).abs() < 1e-9, "v={v} expected={expected}");
    }

    #[test]
    fn mmd_rejects_single_row_batches() {
        let t = Tensor::matrix(1, 2, vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            LatentBatchPair::new(t.clone(), t),
            Err(DivergenceError::BatchTooSmall { n: 1 })
        ));
    }

    #[test]
    fn mmd_invariant_under_row_permutation() {
        let mut rng = stream_rng(8, Stream::Eval);
        let n = 6;
        let d = 3;
        let z: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let e: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let spec = imq(4.0);
        let base = mmd_value(
            &spec,
            &LatentBatchPair::new(
                Tensor::matrix(n, d, z.clone()).unwrap(),
                Tensor::matrix(n, d, e.clone()).unwrap(),
            )
            .unwrap(),
        )
        .unwrap();

        // Reverse the prior rows, then separately reverse the encoded rows.
        let rev = |v: &[f64]| -> Vec<f64> {
            (0..n)
                .rev()
                .flat_map(|i| v[i * d..(i + 1) * d].to_vec())
                .collect()
        };
        for (zz, ee) in [(rev(&z), e.clone()), (z.clone(), rev(&e))] {
            let v = mmd_value(
                &spec,
                &LatentBatchPair::new(
                    Tensor::matrix(n, d, zz).unwrap(),
                    Tensor::matrix(n, d, ee).unwrap(),
                )
                .unwrap(),
            )
            .unwrap();
            assert!((v - base).abs() < 1e-12);
        }
    }

    #[test]
    fn mmd_same_distribution_concentrates_near_zero_and_separation_is_positive() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = stream_rng(21, Stream::Eval);
        let spec = imq(4.0);
        let (n, d) = (16, 2);
        let mut draws = |shift: f64| -> Tensor {
            let v: Vec<f64> = (0..n * d)
                .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng) + shift)
                .collect();
            Tensor::matrix(n, d, v).unwrap()
        };
        let mut acc = 0.0;
        let reps = 400;
        for _ in 0..reps {
            let pair = LatentBatchPair::new(draws(0.0), draws(0.0)).unwrap();
            acc += mmd_value(&spec, &pair).unwrap();
        }
        let mean_same = acc / reps as f64;
        assert!(mean_same.abs() < 0.02, "mean over same-dist batches {mean_same}");

        let pair = LatentBatchPair::new(draws(0.0), draws(6.0)).unwrap();
        let separated = mmd_value(&spec, &pair).unwrap();
        assert!(separated > 0.0, "separated clouds must give positive penalty");
    }

    fn zero_disc(d_z: usize) -> LatentDiscriminator {
        let mut rng = stream_rng(0, Stream::Weights);
        let mut network = init_params(&[d_z, 1], &[Activation::Identity], &mut rng);
        network.layers[0].weights.values_mut().fill(0.0);
        LatentDiscriminator {
            network,
            add_log_prior: false,
        }
    }

    #[test]
    fn constant_half_discriminator_loss() {
        // Zero logits → D ≡ 0.5 → loss = 2·log ½.
        let disc = zero_disc(2);
        let mut g = Graph::new();
        let nodes = disc.network.insert_params(&mut g);
        let p = g.input(Tensor::matrix(3, 2, vec![0.5; 6]).unwrap());
        let e = g.input(Tensor::matrix(3, 2, vec![-0.5; 6]).unwrap());
        let loss = gan_discriminator_loss(&mut g, &disc, &nodes, p, e, 1.0).unwrap();
        let expected = 2.0 * 0.5f64.ln();
        assert!((g.value(loss).item() - expected).abs() < 1e-12);
        assert!((expected + 1.386_294_4).abs() < 1e-7);
    }

    #[test]
    fn saturated_discriminator_loss_hits_clamp() {
        // Large ± logits: D(z) → 1, D(z̃) → 0; with clamping the loss is
        // 2·log(1 − 1e-7).
        let mut disc = zero_disc(1);
        disc.network.layers[0].weights.values_mut()[0] = 1.0;
        let mut g = Graph::new();
        let nodes = disc.network.insert_consts(&mut g);
        let p = g.input(Tensor::matrix(1, 1, vec![1e3]).unwrap());
        let e = g.input(Tensor::matrix(1, 1, vec![-1e3]).unwrap());
        let loss = gan_discriminator_loss(&mut g, &disc, &nodes, p, e, 1.0).unwrap();
        let expected = 2.0 * (1.0 - CLAMP_EPS).ln();
        assert!((g.value(loss).item() - expected).abs() < 1e-15);
    }

    #[test]
    fn single_pair_discriminator_loss_arithmetic() {
        // D(z) = 0.8, D(z̃) = 0.3 → log 0.8 + log 0.7.
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let mut disc = zero_disc(1);
        disc.network.layers[0].weights.values_mut()[0] = 1.0;
        let mut g = Graph::new();
        let nodes = disc.network.insert_consts(&mut g);
        let p = g.input(Tensor::matrix(1, 1, vec![logit(0.8)]).unwrap());
        let e = g.input(Tensor::matrix(1, 1, vec![logit(0.3)]).unwrap());
        let loss = gan_discriminator_loss(&mut g, &disc, &nodes, p, e, 1.0).unwrap();
        let expected = 0.8f64.ln() + 0.7f64.ln();
        assert!((g.value(loss).item() - expected).abs() < 1e-12);
        assert!((expected + 0.579_818_5).abs() < 1e-7);
    }

    #[test]
    fn encoder_penalty_limits() {
        // D ≡ 0.5 → log 2; D → 1 → 0; D = e^{−2} → 2.
        let disc = {
            let mut d = zero_disc(1);
            d.network.layers[0].weights.values_mut()[0] = 1.0;
            d
        };
        let eval = |logit_val: f64| -> f64 {
            let mut g = Graph::new();
            let nodes = disc.network.insert_consts(&mut g);
            let e = g.input(Tensor::matrix(1, 1, vec![logit_val]).unwrap());
            let pen = gan_encoder_penalty(&mut g, &disc, &nodes, e, 1.0).unwrap();
            g.value(pen).item()
        };
        assert!((eval(0.0) - 2.0f64.ln()).abs() < 1e-12);
        assert!(eval(1e3).abs() < 1e-6);
        let p = (-2.0f64).exp();
        let logit = (p / (1.0 - p)).ln();
        assert!((eval(logit) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn log_prior_adjust_values() {
        // Standard normal density at the origin in 1-D.
        let v = log_prior_adjust(0.0, &[0.0], 1.0);
        assert!((v + 0.918_938_5).abs() < 1e-7);

        // ‖z‖² = σ_z²·d_z adds −d/2·log(2πσ²) − d/2.
        let d = 3usize;
        let sigma_z2: f64 = 2.0;
        let z = vec![sigma_z2.sqrt(); d];
        let adj = log_prior_adjust(0.0, &z, sigma_z2);
        let expected =
            -(d as f64) / 2.0 * (2.0 * std::f64::consts::PI * sigma_z2).ln() - d as f64 / 2.0;
        assert!((adj - expected).abs() < 1e-12);

        // σ_z²=1, d=2, z=(1,1) → −log 2π − 1.
        let adj = log_prior_adjust(0.0, &[1.0, 1.0], 1.0);
        let expected = -(2.0 * std::f64::consts::PI).ln() - 1.0;
        assert!((adj - expected).abs() < 1e-12);
        assert!((expected + 2.837_877_1).abs() < 1e-7);
    }

    #[test]
    fn gaussian_kl_values() {
        assert_eq!(gaussian_kl(&[0.0], &[0.0]), 0.0);
        assert!((gaussian_kl(&[1.0], &[0.0]) - 0.5).abs() < 1e-15);
        let v = gaussian_kl(&[0.0], &[4.0f64.ln()]);
        let expected = 0.5 * (4.0 - 4.0f64.ln() - 1.0);
        assert!((v - expected).abs() < 1e-12);
        assert!((expected - 0.806_852_8).abs() < 1e-7);
    }

    #[test]
    fn gaussian_kl_nonnegative_and_zero_only_at_match() {
        let mut rng = stream_rng(2, Stream::Eval);
        for _ in 0..200 {
            let mu: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let lv: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let kl = gaussian_kl(&mu, &lv);
            assert!(kl >= 0.0);
            let at_match = mu.iter().all(|&m| m == 0.0) && lv.iter().all(|&v| v == 0.0);
            if kl < 1e-12 {
                assert!(
                    mu.iter().all(|&m| m.abs() < 1e-5) && lv.iter().all(|&v| v.abs() < 1e-5)
                );
            }
            if at_match {
                assert_eq!(kl, 0.0);
            }
        }
        assert_eq!(gaussian_kl(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
    }
}
