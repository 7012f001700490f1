//! Dataset acquisition and generation: IDX image files, synthetic 2D
//! distributions, a procedural glyph corpus, prior samplers, and
//! deterministic train/test splits.

use crate::models::config::PriorSpec;
use crate::rng::{stream_rng, Stream};
use crate::tensor::Tensor;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error for {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("wrong magic at byte offset {offset}: found {found:#010x}, expected {expected:#010x}")]
    WrongMagic {
        offset: usize,
        found: u32,
        expected: u32,
    },
    #[error("truncated file at byte offset {offset}: need {needed} more bytes, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("dimension mismatch at byte offset {offset}: {message}")]
    DimensionMismatch { offset: usize, message: String },
    #[error("test fraction {0} must be in (0, 1)")]
    BadFraction(f64),
    #[error("split leaves an empty {0} set")]
    EmptySplit(&'static str),
    #[error("bad synthetic spec: {0}")]
    BadSpec(String),
}

/// Immutable example matrix plus disjoint train/test index lists.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub examples: Tensor,
    pub labels: Option<Vec<u8>>,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub provenance: String,
}

impl Dataset {
    pub fn from_examples(examples: Tensor, labels: Option<Vec<u8>>, provenance: String) -> Self {
        let count = examples.rows();
        Self {
            examples,
            labels,
            train_idx: (0..count).collect(),
            test_idx: Vec::new(),
            provenance,
        }
    }

    pub fn count(&self) -> usize {
        self.examples.rows()
    }

    pub fn d_x(&self) -> usize {
        self.examples.cols()
    }

    /// Rows of `examples` selected by index, as a new matrix.
    pub fn gather(&self, idx: &[usize]) -> Tensor {
        let d = self.d_x();
        let mut out = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            out.extend_from_slice(self.examples.row(i));
        }
        Tensor::matrix(idx.len(), d, out).expect("gather shape")
    }

    pub fn train(&self) -> Tensor {
        self.gather(&self.train_idx)
    }

    pub fn test(&self) -> Tensor {
        self.gather(&self.test_idx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    GaussianMixture,
    SwissRoll,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub mode_count: usize,
    pub mode_std: f64,
    pub radius: f64,
    pub sample_count: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<(), DataError> {
        if self.sample_count < 1 {
            return Err(DataError::BadSpec("sample_count must be >= 1".into()));
        }
        if !(self.mode_std > 0.0) {
            return Err(DataError::BadSpec(format!(
                "mode_std must be > 0, got {}",
                self.mode_std
            )));
        }
        if self.kind == SyntheticKind::GaussianMixture && self.mode_count == 0 {
            return Err(DataError::BadSpec("mode_count must be >= 1".into()));
        }
        Ok(())
    }
}

fn read_u32_be(bytes: &[u8], offset: &mut usize) -> Result<u32, DataError> {
    if *offset + 4 > bytes.len() {
        return Err(DataError::Truncated {
            offset: *offset,
            needed: 4,
            available: bytes.len() - *offset,
        });
    }
    let v = u32::from_be_bytes(bytes[*offset..*offset + 4].try_into().unwrap());
    *offset += 4;
    Ok(v)
}

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    std::fs::read(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses big-endian IDX images (magic 0x00000803) with pixels scaled to
/// [0,1] by /255, and optionally cross-checks an IDX label file
/// (magic 0x00000801).
pub fn load_mnist_idx(images_path: &Path, labels_path: Option<&Path>) -> Result<Dataset, DataError> {
    let bytes = read_file(images_path)?;
    let mut off = 0usize;
    let magic = read_u32_be(&bytes, &mut off)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(DataError::WrongMagic {
            offset: 0,
            found: magic,
            expected: IDX_IMAGE_MAGIC,
        });
    }
    let count = read_u32_be(&bytes, &mut off)? as usize;
    let rows = read_u32_be(&bytes, &mut off)? as usize;
    let cols = read_u32_be(&bytes, &mut off)? as usize;
    let need = count * rows * cols;
    if bytes.len() - off < need {
        return Err(DataError::Truncated {
            offset: off + (bytes.len() - off),
            needed: need - (bytes.len() - off),
            available: bytes.len() - off,
        });
    }
    let pixels: Vec<f64> = bytes[off..off + need]
        .iter()
        .map(|&b| b as f64 / 255.0)
        .collect();
    let examples = Tensor::matrix(count, rows * cols, pixels).expect("idx image shape");

    let labels = match labels_path {
        Some(lp) => {
            let lbytes = read_file(lp)?;
            let mut loff = 0usize;
            let lmagic = read_u32_be(&lbytes, &mut loff)?;
            if lmagic != IDX_LABEL_MAGIC {
                return Err(DataError::WrongMagic {
                    offset: 0,
                    found: lmagic,
                    expected: IDX_LABEL_MAGIC,
                });
            }
            let lcount = read_u32_be(&lbytes, &mut loff)? as usize;
            if lcount != count {
                return Err(DataError::DimensionMismatch {
                    offset: 4,
                    message: format!("label count {lcount} vs image count {count}"),
                });
            }
            if lbytes.len() - loff < lcount {
                return Err(DataError::Truncated {
                    offset: lbytes.len(),
                    needed: lcount - (lbytes.len() - loff),
                    available: lbytes.len() - loff,
                });
            }
            Some(lbytes[loff..loff + lcount].to_vec())
        }
        None => None,
    };

    Ok(Dataset::from_examples(
        examples,
        labels,
        format!("mnist:{}", images_path.display()),
    ))
}

/// Writes examples (values in [0,1], one row per image) as an IDX image
/// file; re-reading yields bit-identical pixel bytes.
pub fn write_idx_images(
    path: &Path,
    examples: &Tensor,
    rows: usize,
    cols: usize,
) -> Result<(), DataError> {
    assert_eq!(examples.cols(), rows * cols, "row length vs image dims");
    let mut bytes = Vec::with_capacity(16 + examples.len());
    bytes.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(examples.rows() as u32).to_be_bytes());
    bytes.extend_from_slice(&(rows as u32).to_be_bytes());
    bytes.extend_from_slice(&(cols as u32).to_be_bytes());
    bytes.extend(
        examples
            .values()
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    std::fs::write(path, bytes).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<(), DataError> {
    let mut bytes = Vec::with_capacity(8 + labels.len());
    bytes.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    bytes.extend_from_slice(labels);
    std::fs::write(path, bytes).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// 2D Gaussian mixture with modes equally spaced on a circle; mode labels
/// are retained for coverage evaluation.
pub fn sample_gaussian_mixture(spec: &SyntheticSpec) -> Result<Dataset, DataError> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, Stream::Data);
    let k = spec.mode_count;
    let centers: Vec<(f64, f64)> = (0..k)
        .map(|i| {
            let angle = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
            (spec.radius * angle.cos(), spec.radius * angle.sin())
        })
        .collect();
    let mut pts = Vec::with_capacity(spec.sample_count * 2);
    let mut labels = Vec::with_capacity(spec.sample_count);
    for _ in 0..spec.sample_count {
        let mode = rng.gen_range(0..k);
        let (cx, cy) = centers[mode];
        let ex: f64 = StandardNormal.sample(&mut rng);
        let ey: f64 = StandardNormal.sample(&mut rng);
        pts.push(cx + spec.mode_std * ex);
        pts.push(cy + spec.mode_std * ey);
        labels.push(mode as u8);
    }
    Ok(Dataset::from_examples(
        Tensor::matrix(spec.sample_count, 2, pts).expect("mixture shape"),
        Some(labels),
        format!(
            "mixture:modes={},std={},radius={},count={},seed={}",
            k, spec.mode_std, spec.radius, spec.sample_count, spec.seed
        ),
    ))
}

/// 2D spiral: angle swept over [1.5π, 4.5π] with radius growing linearly,
/// plus isotropic noise of scale `mode_std`.
pub fn sample_swiss_roll(spec: &SyntheticSpec) -> Result<Dataset, DataError> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, Stream::Data);
    let mut pts = Vec::with_capacity(spec.sample_count * 2);
    let max_angle = 4.5 * std::f64::consts::PI;
    for _ in 0..spec.sample_count {
        let u: f64 = rng.gen_range(0.0..1.0);
        let angle = 1.5 * std::f64::consts::PI * (1.0 + 2.0 * u);
        let r = spec.radius * angle / max_angle;
        let ex: f64 = StandardNormal.sample(&mut rng);
        let ey: f64 = StandardNormal.sample(&mut rng);
        pts.push(r * angle.cos() + spec.mode_std * ex);
        pts.push(r * angle.sin() + spec.mode_std * ey);
    }
    Ok(Dataset::from_examples(
        Tensor::matrix(spec.sample_count, 2, pts).expect("swiss shape"),
        None,
        format!(
            "swiss:std={},radius={},count={},seed={}",
            spec.mode_std, spec.radius, spec.sample_count, spec.seed
        ),
    ))
}

/// count × d_z matrix of i.i.d. N(0, σ_z²) entries from the dedicated
/// prior stream.
pub fn sample_prior(prior: &PriorSpec, count: usize, seed: u64) -> Tensor {
    let mut rng = stream_rng(seed, Stream::Prior);
    sample_prior_with(&mut rng, prior, count)
}

/// Prior draws from an existing stream (training loops advance one stream
/// across batches).
pub fn sample_prior_with(rng: &mut ChaCha8Rng, prior: &PriorSpec, count: usize) -> Tensor {
    let sd = prior.sigma_z2.sqrt();
    let vals: Vec<f64> = (0..count * prior.d_z)
        .map(|_| {
            let e: f64 = StandardNormal.sample(rng);
            sd * e
        })
        .collect();
    Tensor::matrix(count, prior.d_z, vals).expect("prior shape")
}

/// Deterministic shuffled split into disjoint, exhaustive train/test
/// index lists.
pub fn split(mut dataset: Dataset, test_fraction: f64, seed: u64) -> Result<Dataset, DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::BadFraction(test_fraction));
    }
    let count = dataset.count();
    let test_count = (count as f64 * test_fraction).round() as usize;
    if test_count == 0 {
        return Err(DataError::EmptySplit("test"));
    }
    if test_count >= count {
        return Err(DataError::EmptySplit("train"));
    }
    let mut idx: Vec<usize> = (0..count).collect();
    let mut rng = stream_rng(seed, Stream::Data);
    idx.shuffle(&mut rng);
    dataset.test_idx = idx[..test_count].to_vec();
    dataset.train_idx = idx[test_count..].to_vec();
    Ok(dataset)
}

/// Writes a 2D synthetic dataset as CSV with header `x0,x1[,mode]`.
pub fn write_csv_2d(path: &Path, dataset: &Dataset) -> Result<(), DataError> {
    assert_eq!(dataset.d_x(), 2, "csv export is for 2D datasets");
    let mut out = String::new();
    let with_mode = dataset.labels.is_some();
    out.push_str(if with_mode { "x0,x1,mode\n" } else { "x0,x1\n" });
    for i in 0..dataset.count() {
        let row = dataset.examples.row(i);
        match &dataset.labels {
            Some(l) => out.push_str(&format!("{},{},{}\n", row[0], row[1], l[i])),
            None => out.push_str(&format!("{},{}\n", row[0], row[1])),
        }
    }
    std::fs::write(path, out).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

// --- procedural glyph corpus -------------------------------------------

const GLYPH_SIZE: usize = 28;

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (apx, apy) = (p.0 - a.0, p.1 - a.1);
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let len2 = abx * abx + aby * aby;
    let t = if len2 > 0.0 {
        ((apx * abx + apy * aby) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (dx, dy) = (p.0 - (a.0 + t * abx), p.1 - (a.1 + t * aby));
    (dx * dx + dy * dy).sqrt()
}

/// Ten stroke archetypes in the unit square.
fn glyph_strokes(mode: usize) -> Vec<Vec<(f64, f64)>> {
    let line = |pts: &[(f64, f64)]| pts.to_vec();
    match mode % 10 {
        0 => vec![line(&[
            (0.5, 0.2),
            (0.75, 0.35),
            (0.75, 0.65),
            (0.5, 0.8),
            (0.25, 0.65),
            (0.25, 0.35),
            (0.5, 0.2),
        ])],
        1 => vec![line(&[(0.5, 0.2), (0.5, 0.8)])],
        2 => vec![line(&[(0.3, 0.3), (0.7, 0.3), (0.3, 0.7), (0.7, 0.7)])],
        3 => vec![line(&[(0.3, 0.25), (0.7, 0.35), (0.4, 0.5), (0.7, 0.65), (0.3, 0.75)])],
        4 => vec![
            line(&[(0.35, 0.2), (0.35, 0.55), (0.7, 0.55)]),
            line(&[(0.62, 0.35), (0.62, 0.8)]),
        ],
        5 => vec![line(&[(0.7, 0.25), (0.35, 0.25), (0.35, 0.5), (0.65, 0.55), (0.65, 0.75), (0.3, 0.75)])],
        6 => vec![line(&[(0.65, 0.2), (0.4, 0.45), (0.35, 0.7), (0.6, 0.75), (0.65, 0.55), (0.4, 0.55)])],
        7 => vec![line(&[(0.3, 0.25), (0.7, 0.25), (0.45, 0.8)])],
        8 => vec![
            line(&[(0.5, 0.2), (0.65, 0.35), (0.35, 0.6), (0.5, 0.75), (0.65, 0.6), (0.35, 0.35), (0.5, 0.2)]),
        ],
        _ => vec![
            line(&[(0.6, 0.45), (0.45, 0.25), (0.35, 0.45), (0.55, 0.6)]),
            line(&[(0.6, 0.3), (0.6, 0.8)]),
        ],
    }
}

/// Deterministic 28×28 grayscale corpus of jittered stroke glyphs: ten
/// balanced modes on a smooth low-dimensional manifold. Serves as a
/// self-contained stand-in for handwritten-digit data in tests and demos;
/// real IDX files load through `load_mnist_idx` the same way.
pub fn synthetic_glyphs(count: usize, seed: u64) -> Dataset {
    let mut rng = stream_rng(seed, Stream::Data);
    let px = GLYPH_SIZE * GLYPH_SIZE;
    let mut data = Vec::with_capacity(count * px);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let mode = i % 10;
        labels.push(mode as u8);
        let strokes = glyph_strokes(mode);
        let dx = rng.gen_range(-0.06..0.06);
        let dy = rng.gen_range(-0.06..0.06);
        let rot = rng.gen_range(-0.2..0.2f64);
        let scale = rng.gen_range(0.85..1.15);
        let width = rng.gen_range(0.045..0.075);
        let (sin, cos) = rot.sin_cos();
        let tf = |(x, y): (f64, f64)| -> (f64, f64) {
            let (cx, cy) = (x - 0.5, y - 0.5);
            let (rx, ry) = (cx * cos - cy * sin, cx * sin + cy * cos);
            (0.5 + scale * rx + dx, 0.5 + scale * ry + dy)
        };
        let strokes: Vec<Vec<(f64, f64)>> = strokes
            .into_iter()
            .map(|s| s.into_iter().map(tf).collect())
            .collect();
        for r in 0..GLYPH_SIZE {
            for c in 0..GLYPH_SIZE {
                let p = (
                    (c as f64 + 0.5) / GLYPH_SIZE as f64,
                    (r as f64 + 0.5) / GLYPH_SIZE as f64,
                );
                let mut dmin = f64::INFINITY;
                for stroke in &strokes {
                    for seg in stroke.windows(2) {
                        dmin = dmin.min(segment_distance(p, seg[0], seg[1]));
                    }
                }
                let v = (-dmin * dmin / (2.0 * width * width)).exp();
                data.push(v.clamp(0.0, 1.0));
            }
        }
    }
    Dataset::from_examples(
        Tensor::matrix(count, px, data).expect("glyph shape"),
        Some(labels),
        format!("glyphs:count={count},seed={seed}"),
    )
}
