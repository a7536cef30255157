//! PoC identification, ancestry back-tracing, TTE, and the distance Decrease
//! of testcases relative to their parent seeds.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use thiserror::Error;

use crate::log::{CampaignLog, Event};
use crate::stats::{mean, median};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LineageError {
    #[error("id {0} does not appear in the log")]
    UnknownId(u64),
    #[error("id {child} names missing parent {parent}")]
    DanglingParent { child: u64, parent: u64 },
    #[error("parent chain through id {0} is cyclic")]
    Cycle(u64),
}

/// Id of the earliest PoC crash.
pub fn first_poc(log: &CampaignLog) -> Option<u64> {
    log.events
        .iter()
        .filter_map(|e| match *e {
            Event::CrashFound {
                tick, id, poc: true, ..
            } => Some((tick, id)),
            _ => None,
        })
        .min_by_key(|&(tick, _)| tick)
        .map(|(_, id)| id)
}

/// Tick of the first PoC, or `timeout` when there is none.
pub fn tte(log: &CampaignLog, timeout: u64) -> u64 {
    first_poc_tick(log).unwrap_or(timeout)
}

pub fn first_poc_tick(log: &CampaignLog) -> Option<u64> {
    log.events
        .iter()
        .filter_map(|e| match *e {
            Event::CrashFound { tick, poc: true, .. } => Some(tick),
            _ => None,
        })
        .min()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ancestor {
    pub id: u64,
    pub distance: Option<f64>,
    pub tick: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineageRecord {
    pub poc_id: u64,
    /// From the parentless initial seed down to the PoC itself.
    pub chain: Vec<Ancestor>,
}

impl LineageRecord {
    /// Number of ancestor seeds, the PoC excluded.
    pub fn length(&self) -> usize {
        self.chain.len() - 1
    }

    pub fn ancestor_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.chain[..self.chain.len() - 1].iter().map(|a| a.id)
    }
}

/// `(parent, distance, tick)` for every seed and crash id.
fn id_table(log: &CampaignLog) -> BTreeMap<u64, (Option<u64>, Option<f64>, u64)> {
    log.events
        .iter()
        .filter_map(|e| match *e {
            Event::SeedAdmitted {
                tick,
                id,
                parent,
                distance,
            }
            | Event::CrashFound {
                tick,
                id,
                parent,
                distance,
                ..
            } => Some((id, (parent, distance, tick))),
            Event::TestcaseExecuted { .. } => None,
        })
        .collect()
}

pub fn lineage(log: &CampaignLog, poc_id: u64) -> Result<LineageRecord, LineageError> {
    let table = id_table(log);
    let mut chain = Vec::new();
    let mut cur = poc_id;
    let &(mut parent, mut distance, mut tick) =
        table.get(&cur).ok_or(LineageError::UnknownId(cur))?;
    loop {
        chain.push(Ancestor {
            id: cur,
            distance,
            tick,
        });
        if chain.len() > table.len() {
            return Err(LineageError::Cycle(cur));
        }
        let Some(p) = parent else { break };
        let &(pp, pd, pt) = table
            .get(&p)
            .ok_or(LineageError::DanglingParent { child: cur, parent: p })?;
        cur = p;
        parent = pp;
        distance = pd;
        tick = pt;
    }
    chain.reverse();
    Ok(LineageRecord { poc_id, chain })
}

/// Lineage-length histogram: length → number of PoCs.
pub fn lineage_histogram<'a, I>(records: I) -> BTreeMap<usize, usize>
where
    I: IntoIterator<Item = &'a LineageRecord>,
{
    let mut h = BTreeMap::new();
    for r in records {
        *h.entry(r.length()).or_insert(0) += 1;
    }
    h
}

/// One point of the seed-distance-over-time series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesPoint {
    pub tick: u64,
    pub id: u64,
    pub distance: Option<f64>,
    pub is_ancestor: bool,
}

/// Every admitted seed in order, flagged when it lies on `lineage`.
pub fn lineage_series(log: &CampaignLog, lineage: Option<&LineageRecord>) -> Vec<SeriesPoint> {
    let ancestors: Vec<u64> = lineage.map(|l| l.ancestor_ids().collect()).unwrap_or_default();
    log.seeds()
        .filter_map(|e| match *e {
            Event::SeedAdmitted {
                tick, id, distance, ..
            } => Some(SeriesPoint {
                tick,
                id,
                distance,
                is_ancestor: ancestors.contains(&id),
            }),
            _ => None,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecreaseSample {
    pub tick: u64,
    pub parent_id: u64,
    pub parent_distance: f64,
    pub child_distance: f64,
    /// `(child − parent) / parent`
    pub decrease: f64,
}

impl DecreaseSample {
    pub fn new(tick: u64, parent_id: u64, parent_distance: f64, child_distance: f64) -> Self {
        Self {
            tick,
            parent_id,
            parent_distance,
            child_distance,
            decrease: (child_distance - parent_distance) / parent_distance,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DecreaseReport {
    pub samples: Vec<DecreaseSample>,
    /// Testcases whose parent distance was zero or undefined, or whose own
    /// distance was undefined.
    pub skipped: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
}

impl DecreaseReport {
    /// Decrease values sorted ascending.
    pub fn cactus(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.samples.iter().map(|s| s.decrease).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Pools several reports; the summary is recomputed over all samples.
    pub fn merge<I: IntoIterator<Item = DecreaseReport>>(reports: I) -> Self {
        let mut out = DecreaseReport::default();
        for r in reports {
            out.samples.extend(r.samples);
            out.skipped += r.skipped;
        }
        out.summarize();
        out
    }

    fn summarize(&mut self) {
        let d: Vec<f64> = self.samples.iter().map(|s| s.decrease).collect();
        self.mean = mean(&d);
        self.median = median(&d);
    }
}

pub fn decrease_distribution(log: &CampaignLog) -> DecreaseReport {
    let parents: BTreeMap<u64, Option<f64>> = log
        .seeds()
        .filter_map(|e| match *e {
            Event::SeedAdmitted { id, distance, .. } => Some((id, distance)),
            _ => None,
        })
        .collect();
    let mut report = DecreaseReport::default();
    for e in log.executions() {
        let Event::TestcaseExecuted {
            tick,
            parent,
            distance,
            ..
        } = *e
        else {
            continue;
        };
        match (parents.get(&parent).copied().flatten(), distance) {
            (Some(pd), Some(cd)) if pd > 0.0 => {
                report.samples.push(DecreaseSample::new(tick, parent, pd, cd))
            }
            _ => report.skipped += 1,
        }
    }
    report.summarize();
    report
}
