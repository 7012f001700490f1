//! Quantitative evaluation: Laplace-filter sharpness, Fréchet distance
//! between Gaussian fits of feature vectors, and the metrics CSV schema.

use crate::tensor::Tensor;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("image {height}x{width} is smaller than the 3x3 filter")]
    ImageTooSmall { height: usize, width: usize },
    #[error("pixel value {value} outside [0,1] at index {index}")]
    PixelOutOfRange { value: f64, index: usize },
    #[error("batch data length {len} does not match {count}x{height}x{width}x{channels}")]
    BatchShape {
        len: usize,
        count: usize,
        height: usize,
        width: usize,
        channels: usize,
    },
    #[error("need at least 2 feature rows, got {0}")]
    TooFewRows(usize),
    #[error("dimension mismatch: {lhs} vs {rhs}")]
    DimensionMismatch { lhs: usize, rhs: usize },
}

/// count × height × width (× channels) image stack with values in [0,1].
#[derive(Debug, Clone)]
pub struct ImageBatch {
    data: Vec<f64>,
    pub count: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageBatch {
    pub fn new(
        data: Vec<f64>,
        count: usize,
        height: usize,
        width: usize,
        channels: usize,
    ) -> Result<Self, MetricsError> {
        if data.len() != count * height * width * channels {
            return Err(MetricsError::BatchShape {
                len: data.len(),
                count,
                height,
                width,
                channels,
            });
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(-1e-9..=1.0 + 1e-9).contains(*v))
        {
            return Err(MetricsError::PixelOutOfRange { value, index });
        }
        Ok(Self {
            data,
            count,
            height,
            width,
            channels,
        })
    }

    /// Interprets each row of a [n × h·w] matrix as one grayscale image.
    pub fn from_rows(rows: &Tensor, height: usize, width: usize) -> Result<Self, MetricsError> {
        Self::new(rows.values().to_vec(), rows.rows(), height, width, 1)
    }

    /// Grayscale view of image `i` (channel mean when channels > 1).
    fn gray(&self, i: usize) -> Vec<f64> {
        let px = self.height * self.width;
        if self.channels == 1 {
            self.data[i * px..(i + 1) * px].to_vec()
        } else {
            let base = i * px * self.channels;
            (0..px)
                .map(|p| {
                    let at = base + p * self.channels;
                    self.data[at..at + self.channels].iter().sum::<f64>()
                        / self.channels as f64
                })
                .collect()
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Mean Laplace-response variance across the batch. Each image is
/// grayscaled, convolved (valid region, no padding) with
/// [[0,1,0],[1,−4,1],[0,1,0]], and the population variance of the
/// activations is averaged over images.
pub fn sharpness(batch: &ImageBatch) -> Result<f64, MetricsError> {
    let (h, w) = (batch.height, batch.width);
    if h < 3 || w < 3 {
        return Err(MetricsError::ImageTooSmall {
            height: h,
            width: w,
        });
    }
    let mut total = 0.0;
    for i in 0..batch.count {
        let img = batch.gray(i);
        let (oh, ow) = (h - 2, w - 2);
        let mut acts = Vec::with_capacity(oh * ow);
        for r in 0..oh {
            for c in 0..ow {
                let center = (r + 1) * w + (c + 1);
                let v = img[center - w] + img[center - 1] - 4.0 * img[center]
                    + img[center + 1]
                    + img[center + w];
                acts.push(v);
            }
        }
        let n = acts.len() as f64;
        let mean = acts.iter().sum::<f64>() / n;
        let var = acts.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        total += var;
    }
    Ok(total / batch.count as f64)
}

/// Same-size 2×2 moving-average blur (window anchored at each pixel,
/// indices clamped at the border).
pub fn box_blur_2x2(batch: &ImageBatch) -> ImageBatch {
    let (h, w) = (batch.height, batch.width);
    let mut out = Vec::with_capacity(batch.count * h * w);
    for i in 0..batch.count {
        let img = batch.gray(i);
        for r in 0..h {
            for c in 0..w {
                let r2 = (r + 1).min(h - 1);
                let c2 = (c + 1).min(w - 1);
                let s = img[r * w + c] + img[r * w + c2] + img[r2 * w + c] + img[r2 * w + c2];
                out.push(s / 4.0);
            }
        }
    }
    ImageBatch {
        data: out,
        count: batch.count,
        height: h,
        width: w,
        channels: 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    RawPixels,
    PooledPixels,
}

fn reflect(i: usize, n: usize) -> usize {
    if i < n {
        i
    } else {
        2 * n - 2 - i
    }
}

/// Deterministic feature vectors for Fréchet-distance evaluation:
/// raw pixels flatten the grayscale image; pooled pixels average 4×4
/// blocks first (reflection padding when dims are not multiples of 4).
pub fn feature_map(batch: &ImageBatch, kind: FeatureKind) -> Tensor {
    match kind {
        FeatureKind::RawPixels => {
            let px = batch.height * batch.width;
            let mut rows = Vec::with_capacity(batch.count * px);
            for i in 0..batch.count {
                rows.extend(batch.gray(i));
            }
            Tensor::matrix(batch.count, px, rows).expect("raw feature shape")
        }
        FeatureKind::PooledPixels => {
            let (h, w) = (batch.height, batch.width);
            let ph = h.div_ceil(4);
            let pw = w.div_ceil(4);
            let mut rows = Vec::with_capacity(batch.count * ph * pw);
            for i in 0..batch.count {
                let img = batch.gray(i);
                for br in 0..ph {
                    for bc in 0..pw {
                        let mut s = 0.0;
                        for dr in 0..4 {
                            for dc in 0..4 {
                                let r = reflect(br * 4 + dr, h);
                                let c = reflect(bc * 4 + dc, w);
                                s += img[r * w + c];
                            }
                        }
                        rows.push(s / 16.0);
                    }
                }
            }
            Tensor::matrix(batch.count, ph * pw, rows).expect("pooled feature shape")
        }
    }
}

/// Moment-matched Gaussian: sample mean and unbiased sample covariance,
/// covariance symmetrized.
#[derive(Debug, Clone)]
pub struct GaussianFit {
    pub mean: Vec<f64>,
    /// Row-major d×d symmetric matrix.
    pub covariance: Vec<f64>,
}

impl GaussianFit {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

pub fn fit_gaussian(features: &Tensor) -> Result<GaussianFit, MetricsError> {
    let n = features.rows();
    let d = features.cols();
    if n < 2 {
        return Err(MetricsError::TooFewRows(n));
    }
    let v = features.values();
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            mean[j] += v[i * d + j];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = vec![0.0; d * d];
    for i in 0..n {
        let row = &v[i * d..(i + 1) * d];
        for a in 0..d {
            let da = row[a] - mean[a];
            for b in a..d {
                cov[a * d + b] += da * (row[b] - mean[b]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for a in 0..d {
        for b in a..d {
            let val = cov[a * d + b] / denom;
            cov[a * d + b] = val;
            cov[b * d + a] = val;
        }
    }
    Ok(GaussianFit {
        mean,
        covariance: cov,
    })
}

/// Eigenvalues and eigenvectors (columns of V) of a symmetric matrix via
/// cyclic Jacobi rotations; A = V·diag(λ)·Vᵀ.
pub fn symmetric_eigen(matrix: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(matrix.len(), n * n);
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eig = (0..n).map(|i| a[i * n + i]).collect();
    (eig, v)
}

fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

/// Symmetric PSD square root; eigenvalues below the clip floor count as 0.
fn sqrt_psd(matrix: &[f64], n: usize) -> Vec<f64> {
    let (eig, v) = symmetric_eigen(matrix, n);
    let roots: Vec<f64> = eig.iter().map(|&l| l.max(0.0).sqrt()).collect();
    // V·diag(√λ)·Vᵀ
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += v[i * n + k] * roots[k] * v[j * n + k];
            }
            out[i * n + j] = s;
        }
    }
    out
}

const EIG_CLIP: f64 = 1e-8;

/// ‖μ_a−μ_b‖² + Tr(Σ_a + Σ_b − 2(Σ_aΣ_b)^{1/2}), computed through the
/// similarity-symmetrized product √Σ_a·Σ_b·√Σ_a; eigenvalues below the
/// 1e-8 floor are clipped to zero and the result is clipped at 0.
pub fn frechet_distance(a: &GaussianFit, b: &GaussianFit) -> Result<f64, MetricsError> {
    let d = a.dim();
    if d != b.dim() {
        return Err(MetricsError::DimensionMismatch {
            lhs: d,
            rhs: b.dim(),
        });
    }
    let mean_term: f64 = a
        .mean
        .iter()
        .zip(&b.mean)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum();
    let tr_a: f64 = (0..d).map(|i| a.covariance[i * d + i]).sum();
    let tr_b: f64 = (0..d).map(|i| b.covariance[i * d + i]).sum();

    let sa = sqrt_psd(&a.covariance, d);
    let inner = mat_mul(&sa, &mat_mul(&b.covariance, &sa, d), d);
    // Symmetrize before the eigendecomposition; the product is symmetric
    // up to rounding.
    let mut sym = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            sym[i * d + j] = 0.5 * (inner[i * d + j] + inner[j * d + i]);
        }
    }
    let (eig, _) = symmetric_eigen(&sym, d);
    let tr_sqrt: f64 = eig
        .iter()
        .map(|&l| if l < EIG_CLIP { 0.0 } else { l.sqrt() })
        .sum();
    Ok((mean_term + tr_a + tr_b - 2.0 * tr_sqrt).max(0.0))
}

/// One evaluation record; the wall-clock column is written last so
/// determinism comparisons can strip it.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub run_id: String,
    pub epoch: usize,
    pub recon_train: f64,
    pub recon_test: f64,
    pub penalty: f64,
    pub sharpness_samples: Option<f64>,
    pub fd_features: Option<f64>,
    pub wall_clock_s: f64,
}

pub const METRICS_CSV_HEADER: &str =
    "run_id,epoch,recon_train,recon_test,penalty,sharpness_samples,fd_features,wall_clock_s";

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        let opt = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.run_id,
            self.epoch,
            self.recon_train,
            self.recon_test,
            self.penalty,
            opt(&self.sharpness_samples),
            opt(&self.fd_features),
            self.wall_clock_s
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn single_image(pixels: Vec<f64>, h: usize, w: usize) -> ImageBatch {
        ImageBatch::new(pixels, 1, h, w, 1).unwrap()
    }

    #[test]
    fn constant_image_has_zero_sharpness() {
        let img = single_image(vec![0.6; 25], 5, 5);
        assert_eq!(sharpness(&img).unwrap(), 0.0);
    }

    #[test]
    fn impulse_matches_direct_enumeration() {
        let mut px = vec![0.0; 25];
        px[2 * 5 + 2] = 1.0;
        let img = single_image(px.clone(), 5, 5);
        let got = sharpness(&img).unwrap();

        // Independent oracle: enumerate the nine valid filter windows.
        let mut acts = Vec::new();
        for r in 1..4 {
            for c in 1..4 {
                let at = |rr: usize, cc: usize| px[rr * 5 + cc];
                acts.push(
                    at(r - 1, c) + at(r, c - 1) - 4.0 * at(r, c) + at(r, c + 1) + at(r + 1, c),
                );
            }
        }
        let mean = acts.iter().sum::<f64>() / acts.len() as f64;
        let var = acts.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / acts.len() as f64;
        assert!((got - var).abs() < 1e-15);
        assert!((got - 20.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn checkerboard_sharper_than_blurred() {
        let mut px = vec![0.0; 64];
        for r in 0..8 {
            for c in 0..8 {
                px[r * 8 + c] = ((r + c) % 2) as f64;
            }
        }
        let img = single_image(px, 8, 8);
        let blurred = box_blur_2x2(&img);
        assert!(sharpness(&img).unwrap() > sharpness(&blurred).unwrap());
    }

    #[test]
    fn sharpness_invariant_to_constant_shift() {
        let mut rng = stream_rng(3, Stream::Eval);
        let px: Vec<f64> = (0..49).map(|_| rng.gen_range(0.0..0.5)).collect();
        let a = single_image(px.clone(), 7, 7);
        let b = single_image(px.iter().map(|v| v + 0.5).collect(), 7, 7);
        let (sa, sb) = (sharpness(&a).unwrap(), sharpness(&b).unwrap());
        assert!((sa - sb).abs() < 1e-12);
    }

    #[test]
    fn sharpness_scales_quadratically() {
        let mut rng = stream_rng(4, Stream::Eval);
        let px: Vec<f64> = (0..49).map(|_| rng.gen_range(0.0..0.5)).collect();
        let a = single_image(px.clone(), 7, 7);
        let b = single_image(px.iter().map(|v| v * 2.0).collect(), 7, 7);
        let (sa, sb) = (sharpness(&a).unwrap(), sharpness(&b).unwrap());
        assert!((sb - 4.0 * sa).abs() < 1e-10 * sa.max(1.0));
    }

    #[test]
    fn too_small_image_is_rejected() {
        let img = single_image(vec![0.0; 4], 2, 2);
        assert!(matches!(
            sharpness(&img),
            Err(MetricsError::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn raw_features_flatten_in_reading_order() {
        let img = single_image(vec![0.1, 0.2, 0.3, 0.4], 2, 2);
        let f = feature_map(&img, FeatureKind::RawPixels);
        assert_eq!(f.values(), &[0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn pooled_features_of_constant_image_are_constant() {
        let img = single_image(vec![0.5; 28 * 28], 28, 28);
        let f = feature_map(&img, FeatureKind::PooledPixels);
        assert_eq!(f.cols(), 28 * 28 / 16);
        assert!(f.values().iter().all(|&v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn pooled_dim_is_one_sixteenth() {
        let img = ImageBatch::new(vec![0.0; 2 * 8 * 8], 2, 8, 8, 1).unwrap();
        let f = feature_map(&img, FeatureKind::PooledPixels);
        assert_eq!(f.cols(), 8 * 8 / 16);
        assert_eq!(f.rows(), 2);
    }

    #[test]
    fn fit_of_identical_rows_has_zero_covariance() {
        let t = Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0]).unwrap();
        let fit = fit_gaussian(&t).unwrap();
        assert!(fit.covariance.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn fit_two_scalars_unbiased_variance() {
        let t = Tensor::matrix(2, 1, vec![0.0, 2.0]).unwrap();
        let fit = fit_gaussian(&t).unwrap();
        assert_eq!(fit.mean, vec![1.0]);
        assert_eq!(fit.covariance, vec![2.0]);
    }

    #[test]
    fn fit_concentrates_on_standard_normal_draws() {
        let mut rng = stream_rng(11, Stream::Eval);
        let (n, d) = (100_000, 3);
        let vals: Vec<f64> = (0..n * d)
            .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        let fit = fit_gaussian(&Tensor::matrix(n, d, vals).unwrap()).unwrap();
        let mean_norm: f64 = fit.mean.iter().map(|m| m * m).sum::<f64>().sqrt();
        assert!(mean_norm < 0.02, "mean norm {mean_norm}");
        for a in 0..d {
            for b in 0..d {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (fit.covariance[a * d + b] - expect).abs() < 0.05,
                    "cov[{a}][{b}] = {}",
                    fit.covariance[a * d + b]
                );
            }
        }
    }

    #[test]
    fn frechet_identical_fits_is_zero() {
        let fit = GaussianFit {
            mean: vec![0.3, -0.7],
            covariance: vec![2.0, 0.3, 0.3, 1.0],
        };
        assert!(frechet_distance(&fit, &fit).unwrap() < 1e-9);
    }

    #[test]
    fn frechet_mean_shift_with_identity_covariances() {
        let a = GaussianFit {
            mean: vec![0.0, 0.0],
            covariance: vec![1.0, 0.0, 0.0, 1.0],
        };
        let b = GaussianFit {
            mean: vec![3.0, 4.0],
            covariance: vec![1.0, 0.0, 0.0, 1.0],
        };
        let fd = frechet_distance(&a, &b).unwrap();
        assert!((fd - 25.0).abs() < 1e-9);
    }

    #[test]
    fn frechet_scalar_case() {
        // (μ=0, σ²=1) vs (μ=0, σ²=4): 1 + 4 − 2·2 = 1.
        let a = GaussianFit {
            mean: vec![0.0],
            covariance: vec![1.0],
        };
        let b = GaussianFit {
            mean: vec![0.0],
            covariance: vec![4.0],
        };
        assert!((frechet_distance(&a, &b).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn frechet_symmetry_on_random_fits() {
        let mut rng = stream_rng(8, Stream::Eval);
        for _ in 0..20 {
            let d = 3;
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| -> GaussianFit {
                let rows = 12;
                let vals: Vec<f64> = (0..rows * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
                fit_gaussian(&Tensor::matrix(rows, d, vals).unwrap()).unwrap()
            };
            let a = mk(&mut rng);
            let b = mk(&mut rng);
            let ab = frechet_distance(&a, &b).unwrap();
            let ba = frechet_distance(&b, &a).unwrap();
            assert!((ab - ba).abs() < 1e-9, "{ab} vs {ba}");
            assert!(ab >= 0.0);
        }
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let (mut eig, v) = symmetric_eigen(&[2.0, 1.0, 1.0, 2.0], 2);
        eig.sort_by(f64::total_cmp);
        assert!((eig[0] - 1.0).abs() < 1e-12);
        assert!((eig[1] - 3.0).abs() < 1e-12);
        // Columns orthonormal.
        let dot = v[0] * v[1] + v[2] * v[3];
        assert!(dot.abs() < 1e-12);
    }
}
