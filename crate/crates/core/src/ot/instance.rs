//! Plain-text instance files for the transport verifier.
//!
//! Each instance is:
//!
//! ```text
//! m m' d
//! m lines:   d coordinates, then the atom weight
//! m' lines:  d coordinates, then the atom weight
//! m' lines:  d coordinates (decoder image of each prior atom)
//! variances v1 … vd            (optional)
//! ```
//!
//! Blank lines and `#` comments are skipped; several instances may be
//! concatenated in one file.

use super::{DeterministicDecoderTable, DiscreteDistribution, OtError};
use crate::tensor::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
#[error("line {line}: {message}")]
pub struct InstanceParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct VerificationInstance {
    pub data: DiscreteDistribution,
    pub prior: DiscreteDistribution,
    pub decoder: DeterministicDecoderTable,
    pub variances: Option<Vec<f64>>,
}

struct Lines<'a> {
    // (1-based line number, content)
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let items = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Self { items, pos: 0 }
    }

    fn peek(&self) -> Option<(usize, &'a str)> {
        self.items.get(self.pos).copied()
    }

    fn next(&mut self, expect: &str) -> Result<(usize, &'a str), InstanceParseError> {
        match self.items.get(self.pos) {
            Some(&item) => {
                self.pos += 1;
                Ok(item)
            }
            None => Err(InstanceParseError {
                line: self.items.last().map(|(n, _)| *n).unwrap_or(0) + 1,
                message: format!("unexpected end of file, expected {expect}"),
            }),
        }
    }
}

fn parse_floats(line: usize, text: &str, expect: usize) -> Result<Vec<f64>, InstanceParseError> {
    let vals: Result<Vec<f64>, _> = text.split_whitespace().map(str::parse::<f64>).collect();
    let vals = vals.map_err(|e| InstanceParseError {
        line,
        message: format!("bad number: {e}"),
    })?;
    if vals.len() != expect {
        return Err(InstanceParseError {
            line,
            message: format!("expected {expect} values, found {}", vals.len()),
        });
    }
    Ok(vals)
}

fn parse_atoms(
    lines: &mut Lines,
    count: usize,
    dim: usize,
    what: &str,
) -> Result<(Tensor, Vec<f64>), InstanceParseError> {
    let mut pts = Vec::with_capacity(count * dim);
    let mut ws = Vec::with_capacity(count);
    for _ in 0..count {
        let (ln, text) = lines.next(what)?;
        let vals = parse_floats(ln, text, dim + 1)?;
        pts.extend_from_slice(&vals[..dim]);
        ws.push(vals[dim]);
    }
    Ok((
        Tensor::matrix(count, dim, pts).expect("atom tensor shape"),
        ws,
    ))
}

fn distribution_at(
    line: usize,
    points: Tensor,
    weights: Vec<f64>,
) -> Result<DiscreteDistribution, InstanceParseError> {
    DiscreteDistribution::new(points, weights).map_err(|e: OtError| InstanceParseError {
        line,
        message: e.to_string(),
    })
}

pub fn parse_instances(text: &str) -> Result<Vec<VerificationInstance>, InstanceParseError> {
    let mut lines = Lines::new(text);
    let mut out = Vec::new();
    while lines.peek().is_some() {
        let (header_line, header) = lines.next("instance header")?;
        let dims = parse_floats(header_line, header, 3)?;
        let to_count = |v: f64, name: &str| -> Result<usize, InstanceParseError> {
            if v.fract() != 0.0 || v < 1.0 || v > 1e6 {
                Err(InstanceParseError {
                    line: header_line,
                    message: format!("{name} must be a positive integer, got {v}"),
                })
            } else {
                Ok(v as usize)
            }
        };
        let m = to_count(dims[0], "m")?;
        let mp = to_count(dims[1], "m'")?;
        let d = to_count(dims[2], "d")?;

        let (data_pts, data_w) = parse_atoms(&mut lines, m, d, "data atom")?;
        let data = distribution_at(header_line, data_pts, data_w)?;
        let (prior_pts, prior_w) = parse_atoms(&mut lines, mp, d, "prior atom")?;
        let prior = distribution_at(header_line, prior_pts, prior_w)?;

        let mut images = Vec::with_capacity(mp * d);
        for _ in 0..mp {
            let (ln, text) = lines.next("decoder image")?;
            images.extend(parse_floats(ln, text, d)?);
        }
        let decoder = DeterministicDecoderTable::new(
            Tensor::matrix(mp, d, images).expect("decoder tensor shape"),
        );

        let variances = match lines.peek() {
            Some((ln, text)) if text.starts_with("variances") => {
                lines.next("variances")?;
                let rest = text.trim_start_matches("variances");
                Some(parse_floats(ln, rest, d)?)
            }
            _ => None,
        };

        out.push(VerificationInstance {
            data,
            prior,
            decoder,
            variances,
        });
    }
    Ok(out)
}

pub fn write_instances(instances: &[VerificationInstance]) -> String {
    let mut s = String::new();
    for inst in instances {
        let d = inst.data.dim();
        let _ = writeln!(s, "{} {} {}", inst.data.len(), inst.prior.len(), d);
        let mut atoms = |dist: &DiscreteDistribution| {
            for i in 0..dist.len() {
                let coords: Vec<String> =
                    dist.point(i).iter().map(|v| format!("{v}")).collect();
                let _ = writeln!(s, "{} {}", coords.join(" "), dist.weights()[i]);
            }
        };
        atoms(&inst.data);
        atoms(&inst.prior);
        for j in 0..inst.prior.len() {
            let coords: Vec<String> = inst
                .decoder
                .image(j)
                .iter()
                .map(|v| format!("{v}"))
                .collect();
            let _ = writeln!(s, "{}", coords.join(" "));
        }
        if let Some(vars) = &inst.variances {
            let vals: Vec<String> = vars.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(s, "variances {}", vals.join(" "));
        }
        s.push('\n');
    }
    s
}

/// Random small instance: up to 8 atoms per side, dimension ≤ 3, uniform
/// coordinates in [−1,1], strictly positive normalized weights, and (with
/// probability 0.3, given at least two prior atoms) a decoder collision so
/// non-injective maps are exercised.
pub fn random_instance(rng: &mut ChaCha8Rng, with_variances: bool) -> VerificationInstance {
    let m = rng.gen_range(1..=8);
    let mp = rng.gen_range(1..=8);
    let d = rng.gen_range(1..=3);
    let points = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
        (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect()
    };
    let weights = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
        let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.05)).collect();
        let t: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= t);
        w
    };
    let data = DiscreteDistribution::new(
        Tensor::matrix(m, d, points(rng, m)).expect("data shape"),
        weights(rng, m),
    )
    .expect("random data distribution");
    let prior = DiscreteDistribution::new(
        Tensor::matrix(mp, d, points(rng, mp)).expect("prior shape"),
        weights(rng, mp),
    )
    .expect("random prior distribution");

    let mut images = points(rng, mp);
    if mp >= 2 && rng.gen_bool(0.3) {
        // Collide two images to cover the non-injective case.
        let src = rng.gen_range(0..mp);
        let dst = rng.gen_range(0..mp);
        let row: Vec<f64> = images[src * d..(src + 1) * d].to_vec();
        images[dst * d..(dst + 1) * d].copy_from_slice(&row);
    }
    let decoder =
        DeterministicDecoderTable::new(Tensor::matrix(mp, d, images).expect("decoder shape"));

    let variances = with_variances.then(|| (0..d).map(|_| rng.gen_range(0.0..2.0)).collect());
    VerificationInstance {
        data,
        prior,
        decoder,
        variances,
    }
}
