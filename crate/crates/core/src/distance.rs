//! Function-, block-, and seed-level distances for every aggregation method
//! and granularity.
//!
//! All path lengths are shortest-path edge counts, so cyclic call graphs and
//! CFGs need no special handling. Absent distances are `None`, never a
//! sentinel.

use alloc::collections::{BinaryHeap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::graph::{BlockIdx, FuncIdx, ProgramGraph, TargetSpec};

/// How distances to several targets (or several anchor blocks, or several
/// trace blocks) collapse into one number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Arithmetic,
    Harmonic,
    Closest,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Arithmetic, Method::Harmonic, Method::Closest];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Arithmetic => "arithmetic",
            Method::Harmonic => "harmonic",
            Method::Closest => "closest",
        }
    }

    /// Aggregates `values`, `None` when there are none.
    ///
    /// Harmonic is the reciprocal of the reciprocal sum; a zero summand
    /// forces the result to zero.
    pub fn aggregate<I>(self, values: I) -> Option<f64>
    where
        I: IntoIterator<Item = f64>,
    {
        let mut n = 0usize;
        match self {
            Method::Arithmetic => {
                let mut sum = 0.0;
                for v in values {
                    sum += v;
                    n += 1;
                }
                (n > 0).then(|| sum / n as f64)
            }
            Method::Harmonic => {
                let mut recip = 0.0;
                let mut zero = false;
                let mut first = 0.0;
                for v in values {
                    if n == 0 {
                        first = v;
                    }
                    n += 1;
                    if v == 0.0 {
                        zero = true;
                    } else {
                        recip += 1.0 / v;
                    }
                }
                match (n, zero) {
                    (0, _) => None,
                    (_, true) => Some(0.0),
                    // 1/(1/v) can be off by an ulp
                    (1, _) => Some(first),
                    _ => Some(1.0 / recip),
                }
            }
            Method::Closest => values.into_iter().fold(None, |acc: Option<f64>, v| {
                Some(acc.map_or(v, |a| a.min(v)))
            }),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("unknown {kind} `{value}`")]
pub struct ParseEnumError {
    kind: &'static str,
    value: alloc::string::String,
}

impl FromStr for Method {
    type Err = ParseEnumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "arithmetic" => Ok(Method::Arithmetic),
            "harmonic" => Ok(Method::Harmonic),
            "closest" => Ok(Method::Closest),
            _ => Err(ParseEnumError {
                kind: "method",
                value: s.into(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Granularity {
    /// Every block inherits its function's call-graph distance.
    Func,
    /// Call-graph distance magnified by a constant, composed with CFG hops.
    Appr,
    /// Call-graph edges weighted by call-site depth inside the caller.
    Bblk,
}

impl Granularity {
    pub const ALL: [Granularity; 3] = [Granularity::Func, Granularity::Appr, Granularity::Bblk];

    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Func => "func",
            Granularity::Appr => "appr",
            Granularity::Bblk => "bblk",
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Granularity {
    type Err = ParseEnumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "func" => Ok(Granularity::Func),
            "appr" => Ok(Granularity::Appr),
            "bblk" => Ok(Granularity::Bblk),
            _ => Err(ParseEnumError {
                kind: "granularity",
                value: s.into(),
            }),
        }
    }
}

pub const DEFAULT_MAGNIFIER: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceConfig {
    pub method: Method,
    pub granularity: Granularity,
    /// Only consulted for [`Granularity::Appr`].
    pub magnifier: f64,
}

impl DistanceConfig {
    pub fn new(method: Method, granularity: Granularity) -> Self {
        Self {
            method,
            granularity,
            magnifier: DEFAULT_MAGNIFIER,
        }
    }

    pub fn with_magnifier(mut self, c: f64) -> Result<Self, DistanceError> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(DistanceError::BadMagnifier);
        }
        self.magnifier = c;
        Ok(self)
    }

    /// All nine method × granularity combinations.
    pub fn all() -> impl Iterator<Item = DistanceConfig> {
        Method::ALL
            .into_iter()
            .flat_map(|m| Granularity::ALL.into_iter().map(move |g| DistanceConfig::new(m, g)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum DistanceError {
    #[error("no call edge between the given functions")]
    NoCallEdge,
    #[error("no call site is reachable from the caller's entry block")]
    CallSiteUnreachable,
    #[error("magnifier must be a positive finite number")]
    BadMagnifier,
    #[error("empty trace")]
    EmptyTrace,
}

/// Unweighted shortest-path edge counts from every block of `b`'s function
/// to `b`, by reverse BFS over CFG predecessors. Indexed by global block.
fn cfg_distances_to(g: &ProgramGraph, target: BlockIdx, out: &mut [Option<u32>]) {
    out.iter_mut().for_each(|d| *d = None);
    let mut queue = VecDeque::new();
    out[target.index()] = Some(0);
    queue.push_back(target);
    while let Some(b) = queue.pop_front() {
        let d = out[b.index()].unwrap_or(0);
        for &p in g.predecessors(b) {
            if out[p.index()].is_none() {
                out[p.index()] = Some(d + 1);
                queue.push_back(p);
            }
        }
    }
}

/// Forward BFS edge counts from `start` within its CFG.
fn cfg_distances_from(g: &ProgramGraph, start: BlockIdx) -> Vec<Option<u32>> {
    let mut out = vec![None; g.num_blocks()];
    let mut queue = VecDeque::new();
    out[start.index()] = Some(0);
    queue.push_back(start);
    while let Some(b) = queue.pop_front() {
        let d = out[b.index()].unwrap_or(0);
        for &s in g.successors(b) {
            if out[s.index()].is_none() {
                out[s.index()] = Some(d + 1);
                queue.push_back(s);
            }
        }
    }
    out
}

/// Weight of the call edge `caller -> callee`: the CFG distance from the
/// caller's entry block to its nearest call site of `callee`.
pub fn call_edge_weight(
    g: &ProgramGraph,
    caller: FuncIdx,
    callee: FuncIdx,
) -> Result<u32, DistanceError> {
    if !g.has_call_edge(caller, callee) {
        return Err(DistanceError::NoCallEdge);
    }
    let from_entry = cfg_distances_from(g, g.function(caller).entry);
    g.call_sites(caller, callee)
        .filter_map(|b| from_entry[b.index()])
        .min()
        .ok_or(DistanceError::CallSiteUnreachable)
}

/// Reverse call graph with per-edge weights. Unweighted granularities use
/// weight 1; call edges whose sites are all unreachable are dropped under
/// [`Granularity::Bblk`].
fn reverse_call_graph(g: &ProgramGraph, granularity: Granularity) -> Vec<Vec<(FuncIdx, u64)>> {
    let mut rev = vec![Vec::new(); g.num_functions()];
    for caller in g.functions() {
        let from_entry = match granularity {
            Granularity::Bblk => Some(cfg_distances_from(g, g.function(caller).entry)),
            _ => None,
        };
        for &callee in g.callees(caller) {
            let w = match &from_entry {
                None => Some(1),
                Some(d) => g
                    .call_sites(caller, callee)
                    .filter_map(|b| d[b.index()])
                    .min()
                    .map(u64::from),
            };
            if let Some(w) = w {
                rev[callee.index()].push((caller, w));
            }
        }
    }
    rev
}

/// Shortest-path lengths from every function to `target` over the reversed,
/// weighted call graph (Dijkstra; zero weights are admitted).
fn call_distances_to(rev: &[Vec<(FuncIdx, u64)>], target: FuncIdx) -> Vec<Option<u64>> {
    let mut dist: Vec<Option<u64>> = vec![None; rev.len()];
    let mut heap = BinaryHeap::new();
    dist[target.index()] = Some(0);
    heap.push(Reverse((0u64, target)));
    while let Some(Reverse((d, f))) = heap.pop() {
        if dist[f.index()].is_some_and(|best| d > best) {
            continue;
        }
        for &(caller, w) in &rev[f.index()] {
            let nd = d + w;
            if dist[caller.index()].is_none_or(|old| nd < old) {
                dist[caller.index()] = Some(nd);
                heap.push(Reverse((nd, caller)));
            }
        }
    }
    dist
}

/// `d_f(f, T_f)` for every function.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionDistances {
    pub method: Method,
    pub granularity: Granularity,
    values: Vec<Option<f64>>,
}

impl FunctionDistances {
    pub fn get(&self, f: FuncIdx) -> Option<f64> {
        self.values[f.index()]
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }
}

/// Pairwise call-graph distances `d_f(f, t)` for every function `f` and every
/// target function `t` (rows indexed by target, in `T_f` order).
pub fn pairwise_function_distances(
    g: &ProgramGraph,
    targets: &TargetSpec,
    granularity: Granularity,
) -> Vec<(FuncIdx, Vec<Option<u64>>)> {
    let rev = reverse_call_graph(g, granularity);
    targets
        .functions()
        .iter()
        .map(|&t| (t, call_distances_to(&rev, t)))
        .collect()
}

pub fn function_distances(
    g: &ProgramGraph,
    targets: &TargetSpec,
    method: Method,
    granularity: Granularity,
) -> FunctionDistances {
    let rows = pairwise_function_distances(g, targets, granularity);
    let values = g
        .functions()
        .map(|f| {
            if targets.contains_function(f) {
                return Some(0.0);
            }
            method.aggregate(rows.iter().filter_map(|(_, d)| d[f.index()]).map(|d| d as f64))
        })
        .collect();
    FunctionDistances {
        method,
        granularity,
        values,
    }
}

/// `d_b(b, T_b)` for every block under one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMap {
    pub config: DistanceConfig,
    values: Vec<Option<f64>>,
}

impl DistanceMap {
    #[inline]
    pub fn get(&self, b: BlockIdx) -> Option<f64> {
        self.values[b.index()]
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Case (i)/(ii) value of `b`, if it is an anchor: zero for targets, else the
/// (magnified, for `appr`) smallest distance among callees that reach a
/// target.
fn anchor_value(
    g: &ProgramGraph,
    targets: &TargetSpec,
    fd: &FunctionDistances,
    config: &DistanceConfig,
    b: BlockIdx,
) -> Option<f64> {
    if targets.contains_block(b) {
        return Some(0.0);
    }
    let best = g
        .block_calls(b)
        .iter()
        .filter_map(|&f| fd.get(f))
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))))?;
    Some(match config.granularity {
        Granularity::Appr => config.magnifier * best,
        _ => best,
    })
}

pub fn block_distances(
    g: &ProgramGraph,
    targets: &TargetSpec,
    fd: &FunctionDistances,
    config: DistanceConfig,
) -> DistanceMap {
    let mut values = vec![None; g.num_blocks()];

    if config.granularity == Granularity::Func {
        for b in g.blocks() {
            values[b.index()] = if targets.contains_block(b) {
                Some(0.0)
            } else {
                fd.get(g.block_function(b))
            };
        }
        return DistanceMap { config, values };
    }

    let mut to_anchor = vec![None; g.num_blocks()];
    for f in g.functions() {
        let blocks = &g.function(f).blocks;
        let anchors: Vec<(BlockIdx, f64)> = blocks
            .iter()
            .filter_map(|&b| anchor_value(g, targets, fd, &config, b).map(|v| (b, v)))
            .collect();
        if anchors.is_empty() {
            continue;
        }
        // per block: (anchor value + hops) for every anchor it reaches
        let mut candidates: Vec<Vec<f64>> = vec![Vec::new(); blocks.len()];
        for &(r, rv) in &anchors {
            cfg_distances_to(g, r, &mut to_anchor);
            for (slot, &b) in blocks.iter().enumerate() {
                if let Some(hops) = to_anchor[b.index()] {
                    if hops > 0 {
                        candidates[slot].push(f64::from(hops) + rv);
                    }
                }
            }
        }
        for (slot, &b) in blocks.iter().enumerate() {
            values[b.index()] = match anchors.binary_search_by_key(&b, |&(a, _)| a) {
                Ok(i) => Some(anchors[i].1),
                Err(_) => config.method.aggregate(candidates[slot].iter().copied()),
            };
        }
    }
    DistanceMap { config, values }
}

/// Function table and block map for one configuration.
pub fn distance_map(g: &ProgramGraph, targets: &TargetSpec, config: DistanceConfig) -> DistanceMap {
    let fd = function_distances(g, targets, config.method, config.granularity);
    block_distances(g, targets, &fd, config)
}

/// Distance of a seed from the blocks its trace visits, each counted once.
/// `Ok(None)` when no visited block has a defined distance.
pub fn seed_distance(
    trace: &[BlockIdx],
    dmap: &DistanceMap,
    method: Method,
) -> Result<Option<f64>, DistanceError> {
    if trace.is_empty() {
        return Err(DistanceError::EmptyTrace);
    }
    let mut visited: Vec<BlockIdx> = trace.to_vec();
    visited.sort_unstable();
    visited.dedup();
    Ok(method.aggregate(visited.into_iter().filter_map(|b| dmap.get(b))))
}
