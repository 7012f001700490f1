//! Run configuration: every hyperparameter of a training run, with TOML
//! serialization and validation.

use crate::divergence::{KernelKind, KernelSpec};
use crate::nn::Activation;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("bad config: {0}")]
    Invalid(String),
    #[error("config parse error: {0}")]
    Parse(String),
}

/// Isotropic Gaussian prior N(0, σ_z²·I) over a d_z-dimensional code space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
    pub d_z: usize,
    pub sigma_z2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    Mmd,
    Gan,
    VaeKl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Deterministic,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VaeDecoder {
    Gaussian,
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    SquaredEuclidean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 7,
            epochs: 30,
            batch_size: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub d_x: usize,
    pub d_z: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub encoder_kind: EncoderKind,
    pub decoder_output: Activation,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            d_x: 2,
            d_z: 2,
            encoder_hidden: vec![64, 64],
            decoder_hidden: vec![64, 64],
            encoder_kind: EncoderKind::Deterministic,
            decoder_output: Activation::Identity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
    pub sigma_z2: f64,
}

impl Default for PriorSection {
    fn default() -> Self {
        Self { sigma_z2: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltySection {
    pub kind: PenaltyKind,
    pub lambda: f64,
    pub kernel: KernelKind,
    /// 0 selects the 2·d_z·σ_z² default.
    pub kernel_scale: f64,
}

impl Default for PenaltySection {
    fn default() -> Self {
        Self {
            kind: PenaltyKind::Mmd,
            lambda: 10.0,
            kernel: KernelKind::Imq,
            kernel_scale: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimSection {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Adversary learning rate for the gan penalty.
    pub disc_alpha: f64,
    /// (epoch, multiplier) pairs applied to both learning rates when the
    /// epoch index is reached.
    pub lr_schedule: Vec<(usize, f64)>,
}

impl Default for OptimSection {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            beta1: 0.5,
            beta2: 0.999,
            epsilon: 1e-8,
            disc_alpha: 5e-4,
            lr_schedule: vec![(15, 0.5), (25, 0.2)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanSection {
    pub disc_hidden: Vec<usize>,
    pub add_log_prior: bool,
    /// Adversary updates per encoder/decoder update; 0 freezes the
    /// adversary (diagnostic runs).
    pub disc_steps: usize,
}

impl Default for GanSection {
    fn default() -> Self {
        Self {
            disc_hidden: vec![64, 64],
            add_log_prior: false,
            disc_steps: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VaeSection {
    pub decoder: VaeDecoder,
    pub sigma_g2: f64,
}

impl Default for VaeSection {
    fn default() -> Self {
        Self {
            decoder: VaeDecoder::Gaussian,
            sigma_g2: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicsSection {
    /// Pre-fit the encoder so batch latents match the prior's mean and
    /// covariance before the main loop.
    pub pretrain_encoder: bool,
    pub pretrain_steps: usize,
    /// Truncated pixel noise on the encoder's input path.
    pub input_noise: bool,
}

impl Default for HeuristicsSection {
    fn default() -> Self {
        Self {
            pretrain_encoder: false,
            pretrain_steps: 200,
            input_noise: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// `mnist:IMAGES[,LABELS]`, `mixture:SPEC`, or `swiss:SPEC`.
    pub dataset: String,
    pub test_fraction: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            dataset: "mixture:modes=8,std=0.1,radius=2,count=1000".to_string(),
            test_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostSection {
    pub kind: CostKind,
}

impl Default for CostSection {
    fn default() -> Self {
        Self {
            kind: CostKind::SquaredEuclidean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DebugSection {
    /// Hash encoder/decoder/adversary parameters around every step and
    /// fail loudly if the wrong network moved.
    pub check_gradient_isolation: bool,
    /// Diagnostic hook: zero the adversary at init so D ≡ 0.5; pair with
    /// gan.disc_steps = 0 to train against a constant adversary.
    pub frozen_zero_disc: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub model: ModelSection,
    pub prior: PriorSection,
    pub penalty: PenaltySection,
    pub optim: OptimSection,
    pub gan: GanSection,
    pub vae: VaeSection,
    pub heuristics: HeuristicsSection,
    pub data: DataSection,
    pub cost: CostSection,
    pub debug: DebugSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn prior_spec(&self) -> PriorSpec {
        PriorSpec {
            d_z: self.model.d_z,
            sigma_z2: self.prior.sigma_z2,
        }
    }

    pub fn kernel_spec(&self) -> KernelSpec {
        let scale = if self.penalty.kernel_scale > 0.0 {
            self.penalty.kernel_scale
        } else {
            KernelSpec::default_imq_scale(self.model.d_z, self.prior.sigma_z2)
        };
        KernelSpec::new(self.penalty.kernel, scale).expect("positive kernel scale")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if !(self.penalty.lambda > 0.0) {
            return fail(format!(
                "penalty.lambda must be > 0, got {}",
                self.penalty.lambda
            ));
        }
        if self.penalty.kind == PenaltyKind::Mmd && self.run.batch_size < 2 {
            return fail("run.batch_size must be >= 2 for the mmd penalty".into());
        }
        if self.run.batch_size == 0 {
            return fail("run.batch_size must be >= 1".into());
        }
        if !(self.prior.sigma_z2 > 0.0) {
            return fail(format!(
                "prior.sigma_z2 must be > 0, got {}",
                self.prior.sigma_z2
            ));
        }
        if self.model.d_z == 0 || self.model.d_x == 0 {
            return fail("model.d_z and model.d_x must be >= 1".into());
        }
        if !(self.data.test_fraction > 0.0 && self.data.test_fraction < 1.0) {
            return fail(format!(
                "data.test_fraction must be in (0,1), got {}",
                self.data.test_fraction
            ));
        }
        if self.penalty.kernel_scale < 0.0 {
            return fail("penalty.kernel_scale must be >= 0 (0 = default)".into());
        }
        if !(self.optim.alpha > 0.0) || !(self.optim.disc_alpha > 0.0) {
            return fail("optim.alpha and optim.disc_alpha must be > 0".into());
        }
        if self.penalty.kind == PenaltyKind::VaeKl {
            if self.model.encoder_kind != EncoderKind::Gaussian {
                return fail("vae_kl penalty requires model.encoder_kind = gaussian".into());
            }
            if !(self.vae.sigma_g2 > 0.0) {
                return fail(format!(
                    "vae.sigma_g2 must be > 0, got {}",
                    self.vae.sigma_g2
                ));
            }
            if self.vae.decoder == VaeDecoder::Bernoulli
                && self.model.decoder_output != Activation::Sigmoid
            {
                return fail(
                    "bernoulli decoder requires model.decoder_output = sigmoid".into(),
                );
            }
        }
        Ok(())
    }

    /// Penalty coefficient actually applied to the regularizer; the VAE
    /// objective has no λ, so the trace decomposition uses 1.
    pub fn effective_lambda(&self) -> f64 {
        match self.penalty.kind {
            PenaltyKind::VaeKl => 1.0,
            _ => self.penalty.lambda,
        }
    }
}

/// Flat `section.key` names accepted by `--set` overrides; kept in sync
/// with the struct by the canonical-keys test below.
pub fn canonical_keys() -> Vec<String> {
    let cfg = RunConfig::default();
    let value = toml::Value::try_from(&cfg).expect("config to toml value");
    let mut keys = Vec::new();
    if let toml::Value::Table(sections) = value {
        for (section, content) in sections {
            if let toml::Value::Table(fields) = content {
                for (field, _) in fields {
                    keys.push(format!("{section}.{field}"));
                }
            }
        }
    }
    keys.sort();
    keys
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_roundtrips() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_rejected_with_candidates() {
        let err = RunConfig::from_toml("[penalty]\nlamda = 10.0\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("lamda"), "{msg}");
        assert!(msg.contains("lambda"), "{msg}");
    }

    #[test]
    fn lambda_must_be_positive() {
        let mut cfg = RunConfig::default();
        cfg.penalty.lambda = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn mmd_needs_batches_of_two() {
        let mut cfg = RunConfig::default();
        cfg.run.batch_size = 1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn vae_requires_gaussian_encoder() {
        let mut cfg = RunConfig::default();
        cfg.penalty.kind = PenaltyKind::VaeKl;
        assert!(cfg.validate().is_err());
        cfg.model.encoder_kind = EncoderKind::Gaussian;
        cfg.validate().unwrap();
    }

    #[test]
    fn default_kernel_scale_follows_latent_dimension() {
        let mut cfg = RunConfig::default();
        cfg.model.d_z = 8;
        cfg.prior.sigma_z2 = 1.0;
        assert_eq!(cfg.kernel_spec().scale, 16.0);
        cfg.penalty.kernel_scale = 3.5;
        assert_eq!(cfg.kernel_spec().scale, 3.5);
    }

    #[test]
    fn canonical_keys_cover_all_sections() {
        let keys = canonical_keys();
        for expect in [
            "run.seed",
            "run.epochs",
            "penalty.lambda",
            "model.d_z",
            "data.dataset",
            "optim.lr_schedule",
            "heuristics.input_noise",
        ] {
            assert!(keys.iter().any(|k| k == expect), "missing {expect}");
        }
    }
}
