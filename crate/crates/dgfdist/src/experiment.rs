//! Repetitions × configurations campaign orchestration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use anyhow::{anyhow, Context, Result};
use dgfdist_core::campaign::{run_campaign, CampaignConfig, CampaignObserver};
use dgfdist_core::lineage::{first_poc_tick, tte};
use dgfdist_core::stats::{summarize, RunTte, StatsSummary};
use dgfdist_core::{distance_map, DistanceConfig, DistanceMap, SubjectSpec, TargetSpec};

use crate::csvio::log_to_string;
use crate::fsutil::write_atomic;
use crate::manifest::{ConfigLabel, ExperimentManifest};
use crate::text::{load_subject, parse_targets};

pub const WORKERS_ENV: &str = "DGFDIST_WORKERS";

/// Worker count from `DGFDIST_WORKERS`, else the available cores.
pub fn workers_from_env() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn load_subject_and_targets(subject: &Path, targets: &Path) -> Result<(SubjectSpec, TargetSpec)> {
    let text = fs::read_to_string(subject).with_context(|| format!("reading {}", subject.display()))?;
    let spec = load_subject(&text).with_context(|| format!("in {}", subject.display()))?;
    let ttext = fs::read_to_string(targets).with_context(|| format!("reading {}", targets.display()))?;
    let names = parse_targets(&ttext).with_context(|| format!("in {}", targets.display()))?;
    let ts = TargetSpec::from_names(spec.graph(), names.iter().map(String::as_str))
        .with_context(|| format!("in {}", targets.display()))?;
    Ok((spec, ts))
}

/// Stops a campaign once a wall-clock deadline passes. Never shows up in logs.
pub struct Deadline(pub Option<Instant>);

impl Deadline {
    pub fn after(limit: Option<Duration>) -> Self {
        Self(limit.map(|d| Instant::now() + d))
    }
}

impl CampaignObserver for Deadline {
    fn keep_going(&mut self) -> bool {
        self.0.is_none_or(|t| Instant::now() < t)
    }
}

pub fn run_log_path(output: &Path, label: ConfigLabel, rep: u32) -> PathBuf {
    output
        .join("runs")
        .join(format!("{}-{}", label.method, label.granularity))
        .join(format!("run-{rep:03}.csv"))
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub rows: Vec<(ConfigLabel, StatsSummary)>,
    pub logs: Vec<PathBuf>,
}

pub fn run_experiment(m: &ExperimentManifest, workers: usize) -> Result<ExperimentReport> {
    let (subject, targets) = load_subject_and_targets(&m.subject, &m.targets)?;
    let maps: Vec<(ConfigLabel, DistanceMap)> = m
        .configs
        .iter()
        .map(|&label| {
            let cfg = DistanceConfig::new(label.method, label.granularity).with_magnifier(m.magnifier)?;
            Ok((label, distance_map(subject.graph(), &targets, cfg)))
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, u32)> = (0..maps.len())
        .flat_map(|c| (0..m.repetitions).map(move |r| (c, r)))
        .collect();
    let results: Mutex<Vec<Option<Result<RunTte>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);

    let run_one = |c: usize, rep: u32| -> Result<RunTte> {
        let (label, dmap) = &maps[c];
        let config = CampaignConfig {
            schedule: m.schedule,
            step_limit: m.step_limit,
            ..CampaignConfig::new(m.run_seed(rep), m.budget, dmap.config)
        };
        let log = run_campaign(&subject, &targets, dmap, &config)?;
        let path = run_log_path(&m.output, *label, rep);
        write_atomic(&path, log_to_string(&log).as_bytes())
            .with_context(|| format!("writing {}", path.display()))?;
        let reproduced = first_poc_tick(&log).is_some_and(|t| t <= m.timeout);
        Ok(RunTte {
            tte: if reproduced { tte(&log, m.timeout) } else { m.timeout } as f64,
            reproduced,
        })
    };

    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(c, rep)) = jobs.get(j) else { break };
                let r = run_one(c, rep)
                    .with_context(|| format!("run {} #{rep} (rng seed {})", maps[c].0, m.run_seed(rep)));
                let failed = r.is_err();
                results.lock().expect("results lock")[j] = Some(r);
                if failed {
                    // stop handing out work; finished runs keep their logs
                    next.store(jobs.len(), Ordering::Relaxed);
                }
            });
        }
    });

    let mut per_config: Vec<Vec<RunTte>> = vec![Vec::new(); maps.len()];
    for (j, r) in results.into_inner().expect("results lock").into_iter().enumerate() {
        match r {
            Some(r) => per_config[jobs[j].0].push(r?),
            None => return Err(anyhow!("experiment aborted before run {} #{}", maps[jobs[j].0].0, jobs[j].1)),
        }
    }

    let base_idx = m
        .configs
        .iter()
        .position(|&c| c == m.baseline)
        .ok_or_else(|| anyhow!("baseline {} not among configs", m.baseline))?;
    let rows = maps
        .iter()
        .zip(&per_config)
        .map(|((label, _), runs)| {
            summarize(&per_config[base_idx], runs)
                .map(|s| (*label, s))
                .with_context(|| format!("summarizing {label}"))
        })
        .collect::<Result<Vec<_>>>()?;

    let summary = summary_csv(&rows);
    write_atomic(&m.output.join("summary.csv"), summary.as_bytes())?;
    let logs = jobs
        .iter()
        .map(|&(c, rep)| run_log_path(&m.output, maps[c].0, rep))
        .collect();
    Ok(ExperimentReport { rows, logs })
}

pub fn summary_csv(rows: &[(ConfigLabel, StatsSummary)]) -> String {
    let mut out = String::from("config,runs,reproduced,mu_tte,mu_tte_reproduced,factor,a12,p_value,significant\n");
    for (label, s) in rows {
        let _ = writeln!(
            out,
            "{label},{},{},{:.2},{},{:.4},{:.4},{:.6},{}",
            s.runs,
            s.runs_reproduced,
            s.mu_tte,
            s.mu_tte_reproduced.map(|v| format!("{v:.2}")).unwrap_or_default(),
            s.factor,
            s.a12,
            s.p_value,
            u8::from(s.significant),
        );
    }
    out
}
