//! Experiment configuration: a flat key = value file with `#` comments.
//!
//! ```text
//! gts = "fixtures/gts/prefetch_strides_3.gts"
//! seed = 42
//! policy = "lru"
//! key = "prefetch-count"
//! threshold = 0.95
//! expansion_cap = 4194304
//! previction = true
//! prefetcher = true
//! geometry.line_size = 64
//! geometry.num_sets = 16
//! geometry.associativity = 4
//! geometry.bus_size = 16
//! geometry.page_size = 4096
//! geometry.addr_bits = 32
//! pin.t1.tag = 129
//! pin.s1.set = 0
//! out = "archive.jsonl"
//! ```

use crate::expand::DEFAULT_EXPANSION_CAP;
use crate::geometry::CacheGeometry;
use crate::sim::Replacement;
use std::collections::BTreeMap;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("config: {0}")]
    Invalid(String),
    #[error("config i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PinKind {
    Tag,
    Set,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub gts_path: Option<PathBuf>,
    pub gts_text: Option<String>,
    pub geometry: CacheGeometry,
    pub policy: Replacement,
    pub seed: u64,
    pub key: Option<String>,
    pub threshold: f64,
    pub expansion_cap: u64,
    pub previction: bool,
    pub prefetcher: bool,
    pub pins: Vec<(String, PinKind, u64)>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            gts_path: None,
            gts_text: None,
            geometry: CacheGeometry::default(),
            policy: Replacement::Lru,
            seed: 0,
            key: None,
            threshold: 0.95,
            expansion_cap: DEFAULT_EXPANSION_CAP,
            previction: true,
            prefetcher: true,
            pins: Vec::new(),
            out: None,
            jobs: None,
        }
    }
}

fn unquote(v: &str) -> &str {
    let v = v.trim();
    v.strip_prefix('"')
        .and_then(|r| r.strip_suffix('"'))
        .unwrap_or(v)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    let mut geom: BTreeMap<String, u64> = BTreeMap::new();

    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Malformed {
            line: i + 1,
            msg: "expected `key = value`".into(),
        })?;
        let key = key.trim();
        let value = unquote(value);
        let parse_u64 = |v: &str| {
            v.parse::<u64>().map_err(|_| ConfigError::Malformed {
                line: i + 1,
                msg: format!("`{key}` expects an integer"),
            })
        };
        let parse_bool = |v: &str| match v {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(ConfigError::Malformed {
                line: i + 1,
                msg: format!("`{key}` expects true or false"),
            }),
        };
        match key {
            "gts" => cfg.gts_path = Some(PathBuf::from(value)),
            "gts_text" => cfg.gts_text = Some(value.to_string()),
            "seed" => cfg.seed = parse_u64(value)?,
            "policy" => {
                cfg.policy = value.parse().map_err(|e: String| ConfigError::Malformed {
                    line: i + 1,
                    msg: e,
                })?
            }
            "key" => cfg.key = Some(value.to_string()),
            "threshold" => {
                cfg.threshold = value.parse::<f64>().map_err(|_| ConfigError::Malformed {
                    line: i + 1,
                    msg: "`threshold` expects a float".into(),
                })?
            }
            "expansion_cap" => cfg.expansion_cap = parse_u64(value)?,
            "previction" => cfg.previction = parse_bool(value)?,
            "prefetcher" => cfg.prefetcher = parse_bool(value)?,
            "out" => cfg.out = Some(PathBuf::from(value)),
            "jobs" => cfg.jobs = Some(parse_u64(value)? as usize),
            _ => {
                if let Some(g) = key.strip_prefix("geometry.") {
                    geom.insert(g.to_string(), parse_u64(value)?);
                } else if let Some(rest) = key.strip_prefix("pin.") {
                    let (sym, kind) =
                        rest.rsplit_once('.')
                            .ok_or_else(|| ConfigError::Malformed {
                                line: i + 1,
                                msg: "pin keys look like `pin.<symbol>.tag`".into(),
                            })?;
                    let kind = match kind {
                        "tag" => PinKind::Tag,
                        "set" => PinKind::Set,
                        other => {
                            return Err(ConfigError::Malformed {
                                line: i + 1,
                                msg: format!("unknown pin kind `{other}`"),
                            })
                        }
                    };
                    cfg.pins.push((sym.to_string(), kind, parse_u64(value)?));
                } else {
                    return Err(ConfigError::Malformed {
                        line: i + 1,
                        msg: format!("unknown key `{key}`"),
                    });
                }
            }
        }
    }

    if !geom.is_empty() {
        let d = CacheGeometry::default();
        let get = |k: &str, fallback: u64| geom.get(k).copied().unwrap_or(fallback);
        cfg.geometry = CacheGeometry::new(
            get("line_size", d.line_size()),
            get("num_sets", d.num_sets()),
            get("associativity", d.associativity() as u64) as usize,
            get("bus_size", d.bus_size()),
            get("page_size", d.page_size()),
            get("addr_bits", d.addr_bits() as u64) as u32,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    }
    if cfg.threshold <= 0.5 || cfg.threshold > 1.0 {
        return Err(ConfigError::Invalid(format!(
            "threshold {} outside (0.5, 1]",
            cfg.threshold
        )));
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let cfg = parse_config(
            "# experiment\n\
             gts = \"exp.gts\"\n\
             seed = 42\n\
             policy = \"random\"\n\
             key = \"prefetch-count\"\n\
             threshold = 0.95\n\
             geometry.num_sets = 16\n\
             pin.t1.tag = 129\n\
             out = \"a.jsonl\"\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.policy, Replacement::Random);
        assert_eq!(cfg.geometry.num_sets(), 16);
        assert_eq!(cfg.pins, vec![("t1".to_string(), PinKind::Tag, 129)]);
    }

    #[test]
    fn rejects_bad_threshold() {
        assert!(parse_config("threshold = 0.4").is_err());
        assert!(parse_config("threshold = 1.5").is_err());
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(matches!(
            parse_config("bogus = 1"),
            Err(ConfigError::Malformed { line: 1, .. })
        ));
    }
}
