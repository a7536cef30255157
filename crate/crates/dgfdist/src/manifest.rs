//! Flat `key = value` experiment manifests.
//!
//! ```text
//! subject = maze.subject
//! targets = maze.targets
//! configs = harmonic:appr, arithmetic:appr, closest:appr
//! baseline = harmonic:appr      # optional, defaults to the first config
//! repetitions = 10
//! budget = 200000
//! rng_seed = 1
//! output = out/
//! ```
//!
//! Optional: `magnifier`, `exploration_fraction`, `max_power_exponent`,
//! `base_energy`, `step_limit`, `timeout` (defaults to `budget`).
//! Relative paths resolve against the manifest's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dgfdist_core::campaign::ScheduleParams;
use dgfdist_core::distance::DEFAULT_MAGNIFIER;
use dgfdist_core::subject::DEFAULT_STEP_LIMIT;
use dgfdist_core::{Granularity, Method};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing key `{0}`")]
    Missing(&'static str),
    #[error("key `{key}`: {message}")]
    Value { key: String, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ConfigLabel {
    pub method: Method,
    pub granularity: Granularity,
}

impl std::fmt::Display for ConfigLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.method, self.granularity)
    }
}

impl std::str::FromStr for ConfigLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (m, g) = s
            .split_once(':')
            .ok_or_else(|| format!("expected `method:granularity`, found `{s}`"))?;
        Ok(Self {
            method: m.trim().parse().map_err(|e| format!("{e}"))?,
            granularity: g.trim().parse().map_err(|e| format!("{e}"))?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentManifest {
    pub subject: PathBuf,
    pub targets: PathBuf,
    pub configs: Vec<ConfigLabel>,
    pub baseline: ConfigLabel,
    pub repetitions: u32,
    pub budget: u64,
    pub timeout: u64,
    pub rng_seed: u64,
    pub output: PathBuf,
    pub magnifier: f64,
    pub schedule: ScheduleParams,
    pub step_limit: usize,
}

impl ExperimentManifest {
    /// RNG seed of repetition `i`, shared by every configuration.
    pub fn run_seed(&self, i: u32) -> u64 {
        self.rng_seed.wrapping_add(u64::from(i))
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ManifestError> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ManifestError::Syntax {
                line: i + 1,
                message: "expected `key = value`".into(),
            })?;
            if kv.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(ManifestError::Syntax {
                    line: i + 1,
                    message: format!("duplicate key `{}`", k.trim()),
                });
            }
        }

        let take = |key: &'static str| kv.get(key).cloned().ok_or(ManifestError::Missing(key));
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ManifestError> {
            v.parse().map_err(|_| ManifestError::Value {
                key: key.into(),
                message: format!("cannot parse `{v}`"),
            })
        }
        let opt_num = |key: &str| kv.get(key).map(|v| num::<f64>(key, v)).transpose();
        let path = |p: String| {
            let p = PathBuf::from(p);
            if p.is_relative() {
                base_dir.join(p)
            } else {
                p
            }
        };

        let configs = take("configs")?
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<ConfigLabel>().map_err(|message| ManifestError::Value {
                    key: "configs".into(),
                    message,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if configs.is_empty() {
            return Err(ManifestError::Value {
                key: "configs".into(),
                message: "at least one configuration is required".into(),
            });
        }
        let baseline = match kv.get("baseline") {
            Some(b) => b.parse::<ConfigLabel>().map_err(|message| ManifestError::Value {
                key: "baseline".into(),
                message,
            })?,
            None => configs[0],
        };
        if !configs.contains(&baseline) {
            return Err(ManifestError::Value {
                key: "baseline".into(),
                message: format!("{baseline} is not among the configs"),
            });
        }

        let repetitions: u32 = num("repetitions", &take("repetitions")?)?;
        let budget: u64 = num("budget", &take("budget")?)?;
        if repetitions == 0 {
            return Err(ManifestError::Value {
                key: "repetitions".into(),
                message: "must be at least 1".into(),
            });
        }
        let defaults = ScheduleParams::default();
        let schedule = ScheduleParams {
            exploration_fraction: opt_num("exploration_fraction")?.unwrap_or(defaults.exploration_fraction),
            max_power_exponent: opt_num("max_power_exponent")?.unwrap_or(defaults.max_power_exponent),
            base_energy: kv
                .get("base_energy")
                .map(|v| num("base_energy", v))
                .transpose()?
                .unwrap_or(defaults.base_energy),
        };

        Ok(Self {
            subject: path(take("subject")?),
            targets: path(take("targets")?),
            configs,
            baseline,
            repetitions,
            budget,
            timeout: kv.get("timeout").map(|v| num("timeout", v)).transpose()?.unwrap_or(budget),
            rng_seed: num("rng_seed", &take("rng_seed")?)?,
            output: path(take("output")?),
            magnifier: opt_num("magnifier")?.unwrap_or(DEFAULT_MAGNIFIER),
            schedule,
            step_limit: kv
                .get("step_limit")
                .map(|v| num("step_limit", v))
                .transpose()?
                .unwrap_or(DEFAULT_STEP_LIMIT),
        })
    }
}
