//! `--dataset` argument resolution:
//! `mnist:IMAGES[,LABELS]`, `mixture:SPEC`, `swiss:SPEC` where SPEC is
//! comma-separated key=value pairs.

use crate::errors::CliError;
use std::path::Path;
use wae_core::data::{
    load_mnist_idx, sample_gaussian_mixture, sample_swiss_roll, split, Dataset, SyntheticKind,
    SyntheticSpec,
};

fn parse_spec_pairs(spec: &str) -> Result<Vec<(String, String)>, CliError> {
    spec.split(',')
        .filter(|s| !s.is_empty())
        .map(|pair| {
            pair.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| {
                    CliError::Data(format!("dataset spec item `{pair}` must be key=value"))
                })
        })
        .collect()
}

fn synthetic_spec(
    kind: SyntheticKind,
    spec: &str,
    seed: u64,
) -> Result<SyntheticSpec, CliError> {
    let mut out = SyntheticSpec {
        kind,
        mode_count: 8,
        mode_std: 0.1,
        radius: 2.0,
        sample_count: 1000,
        seed,
    };
    for (k, v) in parse_spec_pairs(spec)? {
        let bad = |what: &str| CliError::Data(format!("dataset spec {k}={v}: bad {what}"));
        match k.as_str() {
            "modes" => out.mode_count = v.parse().map_err(|_| bad("integer"))?,
            "std" => out.mode_std = v.parse().map_err(|_| bad("float"))?,
            "radius" => out.radius = v.parse().map_err(|_| bad("float"))?,
            "count" => out.sample_count = v.parse().map_err(|_| bad("integer"))?,
            "seed" => out.seed = v.parse().map_err(|_| bad("integer"))?,
            other => {
                return Err(CliError::Data(format!(
                    "unknown dataset spec key `{other}` (expected modes/std/radius/count/seed)"
                )))
            }
        }
    }
    Ok(out)
}

/// Resolves a dataset string and applies the deterministic split.
pub fn resolve_dataset(
    dataset: &str,
    seed: u64,
    test_fraction: f64,
) -> Result<Dataset, CliError> {
    let (scheme, rest) = dataset.split_once(':').ok_or_else(|| {
        CliError::Data(format!(
            "dataset `{dataset}` must be one of mnist:PATH, mixture:SPEC, swiss:SPEC"
        ))
    })?;
    let ds = match scheme {
        "mnist" => {
            let (images, labels) = match rest.split_once(',') {
                Some((i, l)) => (i, Some(l)),
                None => (rest, None),
            };
            load_mnist_idx(Path::new(images), labels.map(Path::new))?
        }
        "mixture" => sample_gaussian_mixture(&synthetic_spec(
            SyntheticKind::GaussianMixture,
            rest,
            seed,
        )?)?,
        "swiss" => sample_swiss_roll(&synthetic_spec(SyntheticKind::SwissRoll, rest, seed)?)?,
        other => {
            return Err(CliError::Data(format!(
                "unknown dataset scheme `{other}` (expected mnist, mixture, or swiss)"
            )))
        }
    };
    Ok(split(ds, test_fraction, seed)?)
}
