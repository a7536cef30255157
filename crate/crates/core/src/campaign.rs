//! The directed grey-box fuzzing loop: round-robin seed selection, a
//! distance-driven annealed power schedule, havoc mutation, and edge-coverage
//! feedback. Virtual time is the execution count, so a campaign is a pure
//! function of its inputs and RNG seed.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::distance::{seed_distance, DistanceConfig, DistanceMap};
use crate::graph::{BlockIdx, TargetSpec};
use crate::log::{CampaignLog, Event};
use crate::subject::{is_poc, SubjectSpec, DEFAULT_STEP_LIMIT};

/// Inputs never grow past this many bytes.
pub const MAX_INPUT_LEN: usize = 1024;
const MAX_CHUNK: usize = 32;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CampaignError {
    #[error("execution budget must be positive")]
    ZeroBudget,
    #[error("no initial seeds")]
    NoInitialSeeds,
    #[error("invalid schedule parameter: {0}")]
    BadSchedule(&'static str),
    #[error("step limit must be positive")]
    ZeroStepLimit,
    #[error("distance map does not cover the subject graph")]
    MapMismatch,
    #[error("seed queue is empty")]
    EmptyQueue,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleParams {
    /// Fraction of the budget over which the distance weight ramps up, in (0, 1).
    pub exploration_fraction: f64,
    /// Energy swings between `base · 2^-P` and `base · 2^P`.
    pub max_power_exponent: f64,
    pub base_energy: u32,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            exploration_fraction: 0.5,
            max_power_exponent: 4.0,
            base_energy: 16,
        }
    }
}

impl ScheduleParams {
    pub fn check(&self) -> Result<(), CampaignError> {
        if !(self.exploration_fraction > 0.0 && self.exploration_fraction < 1.0) {
            return Err(CampaignError::BadSchedule("exploration fraction must lie in (0, 1)"));
        }
        if !(self.max_power_exponent > 0.0 && self.max_power_exponent.is_finite()) {
            return Err(CampaignError::BadSchedule("max power exponent must be positive"));
        }
        if self.base_energy == 0 {
            return Err(CampaignError::BadSchedule("base energy must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignConfig {
    pub rng_seed: u64,
    /// Maximum number of mutated testcases to execute.
    pub budget: u64,
    pub distance: DistanceConfig,
    pub schedule: ScheduleParams,
    pub step_limit: usize,
    pub initial_seeds: Vec<Vec<u8>>,
}

impl CampaignConfig {
    /// Defaults with a single empty initial seed.
    pub fn new(rng_seed: u64, budget: u64, distance: DistanceConfig) -> Self {
        Self {
            rng_seed,
            budget,
            distance,
            schedule: ScheduleParams::default(),
            step_limit: DEFAULT_STEP_LIMIT,
            initial_seeds: vec![Vec::new()],
        }
    }

    fn header(&self) -> Vec<(String, String)> {
        let d = &self.distance;
        let s = &self.schedule;
        [
            ("rng_seed", self.rng_seed.to_string()),
            ("budget", self.budget.to_string()),
            ("method", d.method.to_string()),
            ("granularity", d.granularity.to_string()),
            ("magnifier", format!("{}", d.magnifier)),
            ("exploration_fraction", format!("{}", s.exploration_fraction)),
            ("max_power_exponent", format!("{}", s.max_power_exponent)),
            ("base_energy", s.base_energy.to_string()),
            ("step_limit", self.step_limit.to_string()),
            ("initial_seeds", self.initial_seeds.len().to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// A control-flow transition; `from` is `None` for the program start.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub from: Option<BlockIdx>,
    pub to: BlockIdx,
}

pub fn trace_edges(trace: &[BlockIdx]) -> impl Iterator<Item = Edge> + '_ {
    trace.iter().enumerate().map(move |(i, &to)| Edge {
        from: i.checked_sub(1).map(|p| trace[p]),
        to,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Seed {
    pub id: u64,
    pub parent: Option<u64>,
    pub bytes: Vec<u8>,
    pub distance: Option<f64>,
    /// Edges executed by this seed, sorted.
    pub coverage: Vec<Edge>,
    pub discovered_at: u64,
}

/// Seeds in admission order with a round-robin cursor.
#[derive(Clone, Debug, Default)]
pub struct SeedQueue {
    seeds: Vec<Seed>,
    cursor: usize,
}

impl SeedQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, seed: Seed) {
        self.seeds.push(seed);
    }

    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    pub fn seeds(&self) -> &[Seed] {
        &self.seeds
    }

    /// Next seed in admission order, wrapping at the end. Seeds appended
    /// mid-cycle are reached before the wrap.
    pub fn choose_next(&mut self) -> Result<&Seed, CampaignError> {
        if self.seeds.is_empty() {
            return Err(CampaignError::EmptyQueue);
        }
        if self.cursor >= self.seeds.len() {
            self.cursor = 0;
        }
        let i = self.cursor;
        self.cursor += 1;
        Ok(&self.seeds[i])
    }
}

/// Running min/max over defined seed distances.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DistanceStats {
    range: Option<(f64, f64)>,
}

impl DistanceStats {
    pub fn observe(&mut self, d: Option<f64>) {
        if let Some(d) = d {
            self.range = Some(match self.range {
                None => (d, d),
                Some((lo, hi)) => (lo.min(d), hi.max(d)),
            });
        }
    }

    pub fn range(&self) -> Option<(f64, f64)> {
        self.range
    }

    /// Distance scaled to [0, 1]; 0.5 when undefined or degenerate.
    pub fn normalize(&self, d: Option<f64>) -> f64 {
        match (d, self.range) {
            (Some(d), Some((lo, hi))) if hi > lo => ((d - lo) / (hi - lo)).clamp(0.0, 1.0),
            _ => 0.5,
        }
    }
}

/// `round(base · 2^(P · (1 − 2·d̂) · w))`, at least 1, where `w` ramps
/// linearly from 0 to 1 over the exploration fraction of the budget.
pub fn assign_energy(
    distance: Option<f64>,
    stats: &DistanceStats,
    elapsed_fraction: f64,
    params: &ScheduleParams,
) -> u32 {
    let norm = stats.normalize(distance);
    let weight = (elapsed_fraction / params.exploration_fraction).clamp(0.0, 1.0);
    let exponent = params.max_power_exponent * (1.0 - 2.0 * norm) * weight;
    let energy = libm::round(f64::from(params.base_energy) * libm::exp2(exponent));
    if energy >= f64::from(u32::MAX) {
        u32::MAX
    } else {
        (energy as u32).max(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Havoc {
    BitFlip,
    RandomByte,
    InsertByte,
    DeleteByte,
    DuplicateChunk,
    EraseChunk,
}

const HAVOC: [Havoc; 6] = [
    Havoc::BitFlip,
    Havoc::RandomByte,
    Havoc::InsertByte,
    Havoc::DeleteByte,
    Havoc::DuplicateChunk,
    Havoc::EraseChunk,
];

impl Havoc {
    fn applies(self, len: usize) -> bool {
        match self {
            Havoc::InsertByte => len < MAX_INPUT_LEN,
            Havoc::DuplicateChunk => len > 0 && len < MAX_INPUT_LEN,
            _ => len > 0,
        }
    }

    fn apply<R: RngCore>(self, buf: &mut Vec<u8>, rng: &mut R) {
        let len = buf.len();
        match self {
            Havoc::BitFlip => {
                let pos = rng.random_range(0..len);
                buf[pos] ^= 1 << rng.random_range(0..8);
            }
            Havoc::RandomByte => {
                let pos = rng.random_range(0..len);
                buf[pos] = rng.random();
            }
            Havoc::InsertByte => {
                let pos = rng.random_range(0..=len);
                buf.insert(pos, rng.random());
            }
            Havoc::DeleteByte => {
                buf.remove(rng.random_range(0..len));
            }
            Havoc::DuplicateChunk => {
                let n = rng.random_range(1..=len.min(MAX_CHUNK).min(MAX_INPUT_LEN - len));
                let from = rng.random_range(0..=len - n);
                let to = rng.random_range(0..=len);
                let chunk: Vec<u8> = buf[from..from + n].to_vec();
                buf.splice(to..to, chunk);
            }
            Havoc::EraseChunk => {
                let n = rng.random_range(1..=len.min(MAX_CHUNK));
                let from = rng.random_range(0..=len - n);
                buf.drain(from..from + n);
            }
        }
    }
}

/// Applies 1–8 havoc operators, each drawn uniformly from those applicable
/// to the current length.
pub fn mutate<R: RngCore>(bytes: &[u8], rng: &mut R) -> Vec<u8> {
    let mut buf = bytes.to_vec();
    let rounds = rng.random_range(1..=8);
    let mut ops = [Havoc::BitFlip; 6];
    for _ in 0..rounds {
        let mut n = 0;
        for op in HAVOC {
            if op.applies(buf.len()) {
                ops[n] = op;
                n += 1;
            }
        }
        let op = ops[rng.random_range(0..n)];
        op.apply(&mut buf, rng);
    }
    buf
}

/// Global set of executed edges.
#[derive(Clone, Debug, Default)]
pub struct Coverage {
    edges: BTreeSet<Edge>,
}

impl Coverage {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, e: &Edge) -> bool {
        self.edges.contains(e)
    }
}

/// True iff `trace` executes an edge not yet in `coverage`; `coverage` grows
/// exactly when this returns true.
pub fn is_interesting(trace: &[BlockIdx], coverage: &mut Coverage) -> bool {
    let mut new = false;
    for e in trace_edges(trace) {
        new |= coverage.edges.insert(e);
    }
    new
}

/// Hooks into a running campaign.
pub trait CampaignObserver {
    /// Polled before each scheduling round; `false` ends the campaign.
    fn keep_going(&mut self) -> bool {
        true
    }

    /// A seed was chosen and assigned `energy` testcases at `tick`.
    fn scheduled(&mut self, _seed: u64, _energy: u32, _tick: u64) {}

    /// `seed` is about to join the queue.
    fn admitted(&mut self, _seed: &Seed) {}
}

impl CampaignObserver for () {}

pub fn run_campaign(
    subject: &SubjectSpec,
    targets: &TargetSpec,
    dmap: &DistanceMap,
    config: &CampaignConfig,
) -> Result<CampaignLog, CampaignError> {
    run_campaign_with(subject, targets, dmap, config, &mut ())
}

pub fn run_campaign_with<O: CampaignObserver>(
    subject: &SubjectSpec,
    targets: &TargetSpec,
    dmap: &DistanceMap,
    config: &CampaignConfig,
    observer: &mut O,
) -> Result<CampaignLog, CampaignError> {
    if config.budget == 0 {
        return Err(CampaignError::ZeroBudget);
    }
    if config.initial_seeds.is_empty() {
        return Err(CampaignError::NoInitialSeeds);
    }
    if config.step_limit == 0 {
        return Err(CampaignError::ZeroStepLimit);
    }
    config.schedule.check()?;
    if dmap.len() != subject.graph().num_blocks() {
        return Err(CampaignError::MapMismatch);
    }

    let method = config.distance.method;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut log = CampaignLog {
        header: config.header(),
        events: Vec::new(),
    };
    let mut queue = SeedQueue::new();
    let mut stats = DistanceStats::default();
    let mut coverage = Coverage::new();
    let mut trace = Vec::new();
    let mut next_id = 0u64;

    let distance_of = |trace: &[BlockIdx]| seed_distance(trace, dmap, method).ok().flatten();
    let sorted_edges = |trace: &[BlockIdx]| {
        let mut v: Vec<Edge> = trace_edges(trace).collect();
        v.sort_unstable();
        v.dedup();
        v
    };

    for bytes in &config.initial_seeds {
        let crash = subject.execute_into(bytes, config.step_limit, &mut trace);
        let distance = distance_of(&trace);
        if crash.is_some() {
            log.events.push(Event::CrashFound {
                tick: 0,
                id: next_id,
                parent: None,
                distance,
                poc: is_poc(crash, targets),
            });
            next_id += 1;
        } else if is_interesting(&trace, &mut coverage) {
            log.events.push(Event::SeedAdmitted {
                tick: 0,
                id: next_id,
                parent: None,
                distance,
            });
            stats.observe(distance);
            let seed = Seed {
                id: next_id,
                parent: None,
                bytes: bytes.clone(),
                distance,
                coverage: sorted_edges(&trace),
                discovered_at: 0,
            };
            observer.admitted(&seed);
            queue.push(seed);
            next_id += 1;
        }
    }

    let mut executed = 0u64;
    while executed < config.budget && !queue.is_empty() && observer.keep_going() {
        let (parent_id, parent_bytes, parent_distance) = {
            let s = queue.choose_next()?;
            (s.id, s.bytes.clone(), s.distance)
        };
        let elapsed = executed as f64 / config.budget as f64;
        let energy = assign_energy(parent_distance, &stats, elapsed, &config.schedule);
        observer.scheduled(parent_id, energy, executed);

        for _ in 0..energy {
            if executed >= config.budget {
                break;
            }
            let child = mutate(&parent_bytes, &mut rng);
            executed += 1;
            let tick = executed;
            let crash = subject.execute_into(&child, config.step_limit, &mut trace);
            let distance = distance_of(&trace);
            let crashed = crash.is_some();
            let poc = is_poc(crash, targets);
            let interesting = !crashed && is_interesting(&trace, &mut coverage);
            let id = (crashed || interesting).then(|| {
                next_id += 1;
                next_id - 1
            });
            log.events.push(Event::TestcaseExecuted {
                tick,
                id,
                parent: parent_id,
                distance,
                interesting,
                crashed,
                poc,
            });
            let Some(id) = id else { continue };
            if crashed {
                log.events.push(Event::CrashFound {
                    tick,
                    id,
                    parent: Some(parent_id),
                    distance,
                    poc,
                });
            } else {
                log.events.push(Event::SeedAdmitted {
                    tick,
                    id,
                    parent: Some(parent_id),
                    distance,
                });
                stats.observe(distance);
                let seed = Seed {
                    id,
                    parent: Some(parent_id),
                    bytes: child,
                    distance,
                    coverage: sorted_edges(&trace),
                    discovered_at: tick,
                };
                observer.admitted(&seed);
                queue.push(seed);
            }
        }
    }
    Ok(log)
}
