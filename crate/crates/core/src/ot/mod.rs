//! Exact optimal transport on finite discrete distributions, plus the
//! numerical certifications it enables: the encoder-factorization
//! equality for deterministic decoders and the variance decomposition
//! for random decoders with fixed marginal variances.

mod instance;
mod simplex;

pub use instance::{
    parse_instances, random_instance, write_instances, InstanceParseError, VerificationInstance,
};
pub use simplex::{SimplexError, TransportSolution, CERT_TOL};

use crate::tensor::Tensor;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OtError {
    #[error("weights must be positive, atom {0} is not")]
    NonPositiveWeight(usize),
    #[error("weights sum to {0}, expected 1 within 1e-12")]
    WeightsNotNormalized(f64),
    #[error("points and weights disagree: {atoms} atoms vs {weights} weights")]
    AtomCountMismatch { atoms: usize, weights: usize },
    #[error("cost is not finite for pair ({i},{j})")]
    NonFiniteCost { i: usize, j: usize },
    #[error("variance {0} is negative")]
    NegativeVariance(f64),
    #[error("decoder table covers {images} atoms, prior has {atoms}")]
    PartialDecoder { images: usize, atoms: usize },
    #[error(transparent)]
    Solver(#[from] SimplexError),
}

/// Finite weighted point set in Euclidean space: positive weights that
/// sum to one. Duplicate atoms stay distinct.
#[derive(Debug, Clone)]
pub struct DiscreteDistribution {
    points: Tensor,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(points: Tensor, weights: Vec<f64>) -> Result<Self, OtError> {
        if points.rows() != weights.len() {
            return Err(OtError::AtomCountMismatch {
                atoms: points.rows(),
                weights: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|&w| !(w > 0.0)) {
            return Err(OtError::NonPositiveWeight(i));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(OtError::WeightsNotNormalized(total));
        }
        Ok(Self { points, weights })
    }

    pub fn uniform(points: Tensor) -> Result<Self, OtError> {
        let m = points.rows();
        Self::new(points, vec![1.0 / m as f64; m])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points(&self) -> &Tensor {
        &self.points
    }
}

/// Optimal coupling with marginal constraints held to CERT_TOL.
#[derive(Debug, Clone)]
pub struct CouplingPlan {
    pub matrix: Tensor,
}

/// Image of every prior atom under a deterministic decoder, stored
/// row-for-row with the prior.
#[derive(Debug, Clone)]
pub struct DeterministicDecoderTable {
    images: Tensor,
}

impl DeterministicDecoderTable {
    pub fn new(images: Tensor) -> Self {
        Self { images }
    }

    pub fn for_prior(
        images: Tensor,
        prior: &DiscreteDistribution,
    ) -> Result<Self, OtError> {
        if images.rows() != prior.len() {
            return Err(OtError::PartialDecoder {
                images: images.rows(),
                atoms: prior.len(),
            });
        }
        Ok(Self { images })
    }

    pub fn image(&self, j: usize) -> &[f64] {
        self.images.row(j)
    }

    pub fn images(&self) -> &Tensor {
        &self.images
    }

    pub fn out_dim(&self) -> usize {
        self.images.cols()
    }
}

pub fn squared_euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum()
}

/// Exact transport value and certified plan under a pairwise cost
/// function.
pub fn exact_ot(
    source: &DiscreteDistribution,
    target: &DiscreteDistribution,
    cost: impl Fn(&[f64], &[f64]) -> f64,
) -> Result<(f64, CouplingPlan), OtError> {
    let (m, k) = (source.len(), target.len());
    let mut c = vec![0.0; m * k];
    for i in 0..m {
        for j in 0..k {
            let v = cost(source.point(i), target.point(j));
            if !v.is_finite() {
                return Err(OtError::NonFiniteCost { i, j });
            }
            c[i * k + j] = v;
        }
    }
    exact_ot_with_matrix(source.weights(), target.weights(), &c)
}

/// Same solver on a precomputed row-major cost matrix.
pub fn exact_ot_with_matrix(
    source_w: &[f64],
    target_w: &[f64],
    cost: &[f64],
) -> Result<(f64, CouplingPlan), OtError> {
    if let Some(p) = cost.iter().position(|v| !v.is_finite()) {
        return Err(OtError::NonFiniteCost {
            i: p / target_w.len(),
            j: p % target_w.len(),
        });
    }
    let sol = simplex::solve_transport(source_w, target_w, cost)?;
    let plan = Tensor::matrix(source_w.len(), target_w.len(), sol.plan)
        .expect("plan shape");
    Ok((sol.value, CouplingPlan { matrix: plan }))
}

/// Atoms G(z_j) with the prior's weights; colliding images are kept as
/// separate atoms (merging would not change any transport value).
pub fn pushforward(
    prior: &DiscreteDistribution,
    decoder: &DeterministicDecoderTable,
) -> Result<DiscreteDistribution, OtError> {
    if decoder.images.rows() != prior.len() {
        return Err(OtError::PartialDecoder {
            images: decoder.images.rows(),
            atoms: prior.len(),
        });
    }
    DiscreteDistribution::new(decoder.images.clone(), prior.weights.clone())
}

/// Both sides of the deterministic-decoder factorization identity: the
/// transport from data to the decoded prior, against the transport from
/// data to the prior itself under the composed cost c(x, G(z)).
#[derive(Debug, Clone, Copy)]
pub struct EqualityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

pub fn factorization_check(
    data: &DiscreteDistribution,
    prior: &DiscreteDistribution,
    decoder: &DeterministicDecoderTable,
    cost: impl Fn(&[f64], &[f64]) -> f64,
) -> Result<EqualityReport, OtError> {
    let decoded = pushforward(prior, decoder)?;
    let (lhs, _) = exact_ot(data, &decoded, &cost)?;

    // Composed-cost route: couple data with the prior directly, pricing a
    // pair (x, z) at c(x, G(z)).
    let (m, k) = (data.len(), prior.len());
    let mut c = vec![0.0; m * k];
    for i in 0..m {
        for j in 0..k {
            c[i * k + j] = cost(data.point(i), decoder.image(j));
        }
    }
    let (rhs, _) = exact_ot_with_matrix(data.weights(), prior.weights(), &c)?;
    Ok(EqualityReport {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}

/// Both routes of the squared-cost variance decomposition for a random
/// decoder with mean table G and per-coordinate variances: the direct
/// transport value with the decoder mixture averaged out, against
/// Σᵢ σᵢ² plus the deterministic transport to the means.
#[derive(Debug, Clone, Copy)]
pub struct DecompositionReport {
    pub direct: f64,
    pub decomposed: f64,
    pub gap: f64,
}

pub fn variance_decomposition_check(
    data: &DiscreteDistribution,
    prior: &DiscreteDistribution,
    decoder_mean: &DeterministicDecoderTable,
    variances: &[f64],
) -> Result<DecompositionReport, OtError> {
    if let Some(&bad) = variances.iter().find(|v| **v < 0.0) {
        return Err(OtError::NegativeVariance(bad));
    }
    let d = decoder_mean.out_dim();
    assert_eq!(variances.len(), d, "one variance per coordinate");
    let sigmas: Vec<f64> = variances.iter().map(|v| v.sqrt()).collect();

    // Direct route: each decoded atom is a per-coordinate symmetric
    // two-point mixture G(z)_c ± σ_c; expected squared distance is
    // enumerated over both mixture branches per coordinate.
    let (m, k) = (data.len(), prior.len());
    let mut c_mix = vec![0.0; m * k];
    for i in 0..m {
        let x = data.point(i);
        for j in 0..k {
            let gz = decoder_mean.image(j);
            let mut e = 0.0;
            for c in 0..d {
                let lo = x[c] - (gz[c] - sigmas[c]);
                let hi = x[c] - (gz[c] + sigmas[c]);
                e += 0.5 * (lo * lo + hi * hi);
            }
            c_mix[i * k + j] = e;
        }
    }
    let (direct, _) = exact_ot_with_matrix(data.weights(), prior.weights(), &c_mix)?;

    let mut c_det = vec![0.0; m * k];
    for i in 0..m {
        for j in 0..k {
            c_det[i * k + j] = squared_euclidean(data.point(i), decoder_mean.image(j));
        }
    }
    let (det, _) = exact_ot_with_matrix(data.weights(), prior.weights(), &c_det)?;
    let decomposed = variances.iter().sum::<f64>() + det;
    Ok(DecompositionReport {
        direct,
        decomposed,
        gap: (direct - decomposed).abs(),
    })
}
