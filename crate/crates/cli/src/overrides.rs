//! `--set KEY=VALUE` overrides on top of a config file: dotted or bare
//! keys, typed according to the existing field, with a nearest-key
//! suggestion on typos.

use crate::errors::CliError;
use wae_core::models::config::{canonical_keys, RunConfig};

fn levenshtein(a: &str, b: &str) -> usize {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            cur[j + 1] = (prev[j + 1] + 1).min(cur[j] + 1).min(prev[j] + cost);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Resolves a possibly-bare key against the canonical `section.field`
/// list; ambiguous or unknown keys fail with the closest candidates.
fn resolve_key(key: &str, keys: &[String]) -> Result<String, CliError> {
    if keys.iter().any(|k| k == key) {
        return Ok(key.to_string());
    }
    if !key.contains('.') {
        let matches: Vec<&String> = keys
            .iter()
            .filter(|k| k.split('.').nth(1) == Some(key))
            .collect();
        match matches.len() {
            1 => return Ok(matches[0].clone()),
            0 => {}
            _ => {
                return Err(CliError::Config(format!(
                    "ambiguous key `{key}`: matches {}",
                    matches
                        .iter()
                        .map(|s| s.as_str())
                        .collect::<Vec<_>>()
                        .join(", ")
                )))
            }
        }
    }
    let field = key.rsplit('.').next().unwrap_or(key);
    let mut best: Vec<(usize, &String)> = keys
        .iter()
        .map(|k| {
            let kf = k.split('.').nth(1).unwrap_or(k);
            (levenshtein(field, kf).min(levenshtein(key, k)), k)
        })
        .collect();
    best.sort_by_key(|(d, k)| (*d, (*k).clone()));
    let suggestions: Vec<&str> = best
        .iter()
        .take_while(|(d, _)| *d <= 2)
        .take(3)
        .map(|(_, k)| k.as_str())
        .collect();
    let hint = if suggestions.is_empty() {
        String::new()
    } else {
        format!("; did you mean {}?", suggestions.join(" or "))
    };
    Err(CliError::Config(format!("unknown key `{key}`{hint}")))
}

/// Parses a literal the way the target field expects it, guided by the
/// type already present in the serialized config.
fn parse_value(raw: &str, like: &toml::Value) -> Result<toml::Value, CliError> {
    let typed: Option<toml::Value> = match like {
        toml::Value::Integer(_) => raw.parse::<i64>().ok().map(toml::Value::Integer),
        toml::Value::Float(_) => raw.parse::<f64>().ok().map(toml::Value::Float),
        toml::Value::Boolean(_) => raw.parse::<bool>().ok().map(toml::Value::Boolean),
        toml::Value::String(_) => Some(toml::Value::String(raw.to_string())),
        toml::Value::Array(_) => toml::from_str::<ValueWrapper>(&format!("v = {raw}"))
            .ok()
            .map(|w| w.v),
        other => Some(other.clone()),
    };
    typed.ok_or_else(|| {
        CliError::Config(format!(
            "cannot parse `{raw}` as {}",
            like.type_str()
        ))
    })
}

#[derive(serde::Deserialize)]
struct ValueWrapper {
    v: toml::Value,
}

/// Applies `--set key=value` pairs in order.
pub fn apply_overrides(cfg: &RunConfig, sets: &[String]) -> Result<RunConfig, CliError> {
    if sets.is_empty() {
        return Ok(cfg.clone());
    }
    let keys = canonical_keys();
    let mut tree = toml::Value::try_from(cfg)
        .map_err(|e| CliError::Config(format!("config serialization: {e}")))?;
    for set in sets {
        let (key, raw) = set.split_once('=').ok_or_else(|| {
            CliError::Config(format!("override `{set}` must be KEY=VALUE"))
        })?;
        let full = resolve_key(key.trim(), &keys)?;
        let (section, field) = full.split_once('.').expect("canonical keys are dotted");
        let table = tree
            .get_mut(section)
            .and_then(|v| v.as_table_mut())
            .expect("canonical section exists");
        let existing = table.get(field).expect("canonical field exists");
        let value = parse_value(raw.trim(), existing)?;
        table.insert(field.to_string(), value);
    }
    let text =
        toml::to_string(&tree).map_err(|e| CliError::Config(format!("override render: {e}")))?;
    RunConfig::from_toml(&text).map_err(CliError::from)
}
