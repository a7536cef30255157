//! Random program graphs and a brute-force distance evaluator that shares no
//! code with the library: Floyd–Warshall on the call graph, exhaustive path
//! enumeration in the CFGs, exact rational arithmetic throughout.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeSet;

use dgfdist_core::{GraphDecl, Granularity, Method};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MAGNIFIER: i64 = 10;

#[derive(Clone, Debug)]
pub struct RandomProgram {
    /// `succ[f][b]`: local successors of block `b` of function `f`, all `> b`.
    pub succ: Vec<Vec<Vec<usize>>>,
    /// `calls[f][b]`: distinct callees of block `b`.
    pub calls: Vec<Vec<Vec<usize>>>,
    pub targets: BTreeSet<(usize, usize)>,
}

pub fn func_name(f: usize) -> String {
    format!("f{f:02}")
}

pub fn block_name(f: usize, b: usize) -> String {
    format!("f{f:02}_b{b:02}")
}

impl RandomProgram {
    /// Up to 50 functions of up to 12 blocks; block 0 is the entry.
    pub fn generate(seed: u64, max_targets: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nf = if rng.random_bool(0.3) { rng.random_range(1..=8) } else { rng.random_range(1..=50) };
        let edge_p = rng.random_range(0.1..0.5);
        let call_p = rng.random_range(0.05..0.35);
        let mut succ = Vec::with_capacity(nf);
        let mut calls = Vec::with_capacity(nf);
        for _ in 0..nf {
            let nb = rng.random_range(1..=12);
            let mut s = vec![Vec::new(); nb];
            for j in 1..nb {
                // usually give each block a predecessor so most of the CFG is live
                if rng.random_bool(0.85) {
                    let i = rng.random_range(0..j);
                    s[i].push(j);
                }
                for (i, si) in s.iter_mut().enumerate().take(j) {
                    if !si.contains(&j) && rng.random_bool(edge_p / (1.0 + i as f64 * 0.1)) {
                        si.push(j);
                    }
                }
            }
            let mut c = vec![Vec::new(); nb];
            for cb in c.iter_mut() {
                if rng.random_bool(call_p) {
                    let k = rng.random_range(1..=2);
                    for _ in 0..k {
                        let callee = rng.random_range(0..nf);
                        if !cb.contains(&callee) {
                            cb.push(callee);
                        }
                    }
                }
            }
            succ.push(s);
            calls.push(c);
        }
        let nt = rng.random_range(1..=max_targets.max(1));
        let mut targets = BTreeSet::new();
        for _ in 0..nt {
            let f = rng.random_range(0..nf);
            let b = rng.random_range(0..succ[f].len());
            targets.insert((f, b));
        }
        Self { succ, calls, targets }
    }

    pub fn num_functions(&self) -> usize {
        self.succ.len()
    }

    pub fn decl(&self) -> GraphDecl {
        let mut d = GraphDecl::new();
        for f in 0..self.num_functions() {
            d.function(&func_name(f), &block_name(f, 0));
            for b in 0..self.succ[f].len() {
                d.block(&block_name(f, b), &func_name(f));
                for &s in &self.succ[f][b] {
                    d.edge(&block_name(f, b), &block_name(f, s));
                }
                for &c in &self.calls[f][b] {
                    d.call(&block_name(f, b), &func_name(c));
                }
            }
        }
        d
    }

    pub fn target_names(&self) -> Vec<String> {
        self.targets.iter().map(|&(f, b)| block_name(f, b)).collect()
    }

    pub fn target_functions(&self) -> BTreeSet<usize> {
        self.targets.iter().map(|&(f, _)| f).collect()
    }

    /// Transitive closure of the call relation, reflexive.
    pub fn call_closure(&self) -> Vec<Vec<bool>> {
        let n = self.num_functions();
        let mut r = vec![vec![false; n]; n];
        for (f, row) in r.iter_mut().enumerate() {
            row[f] = true;
            for cs in &self.calls[f] {
                for &c in cs {
                    row[c] = true;
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                if r[i][k] {
                    for j in 0..n {
                        if r[k][j] {
                            r[i][j] = true;
                        }
                    }
                }
            }
        }
        r
    }
}

/// Shortest length of any path from `from` to each block, by enumerating every
/// path of the acyclic CFG.
pub fn path_min_hops(succ: &[Vec<usize>], from: usize) -> Vec<Option<u64>> {
    fn walk(succ: &[Vec<usize>], b: usize, len: u64, best: &mut [Option<u64>]) {
        if best[b].is_none_or(|x| len < x) {
            best[b] = Some(len);
        }
        for &s in &succ[b] {
            walk(succ, s, len + 1, best);
        }
    }
    let mut best = vec![None; succ.len()];
    walk(succ, from, 0, &mut best);
    best
}

fn rat(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn aggregate(method: Method, xs: &[BigRational]) -> Option<BigRational> {
    if xs.is_empty() {
        return None;
    }
    Some(match method {
        Method::Arithmetic => {
            let sum = xs.iter().fold(BigRational::zero(), |a, x| a + x);
            sum / BigRational::from_integer(BigInt::from(xs.len()))
        }
        Method::Harmonic => {
            if xs.iter().any(Zero::is_zero) {
                BigRational::zero()
            } else {
                let s = xs.iter().fold(BigRational::zero(), |a, x| a + x.recip());
                s.recip()
            }
        }
        Method::Closest => xs.iter().min().cloned().unwrap_or_else(BigRational::zero),
    })
}

/// Exact distances for one configuration, plus a flag per block that is set
/// when every aggregation on the way to its value had exactly one summand.
#[derive(Clone, Debug)]
pub struct OracleResult {
    pub functions: Vec<Option<BigRational>>,
    /// `blocks[f][b]`
    pub blocks: Vec<Vec<Option<BigRational>>>,
    pub block_single: Vec<Vec<bool>>,
    /// Top-level summands of non-anchor blocks (case iii), empty otherwise.
    pub summands: Vec<Vec<Vec<BigRational>>>,
    /// Target-function distances behind each function's value.
    pub function_summands: Vec<Vec<u64>>,
}

impl OracleResult {
    pub fn block_f64(&self, f: usize, b: usize) -> Option<f64> {
        self.blocks[f][b].as_ref().map(|r| r.to_f64().expect("finite"))
    }
}

/// All-pairs weighted call-graph distances (Floyd–Warshall).
pub fn call_distances(p: &RandomProgram, gran: Granularity) -> Vec<Vec<Option<u64>>> {
    let n = p.num_functions();
    let mut d = vec![vec![None::<u64>; n]; n];
    for f in 0..n {
        d[f][f] = Some(0);
        let from_entry = path_min_hops(&p.succ[f], 0);
        for (b, cs) in p.calls[f].iter().enumerate() {
            for &c in cs {
                let w = match gran {
                    Granularity::Bblk => match from_entry[b] {
                        Some(h) => h,
                        None => continue,
                    },
                    _ => 1,
                };
                if c != f && d[f][c].is_none_or(|x| w < x) {
                    d[f][c] = Some(w);
                }
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            let Some(ik) = d[i][k] else { continue };
            for j in 0..n {
                if let Some(kj) = d[k][j] {
                    if d[i][j].is_none_or(|x| ik + kj < x) {
                        d[i][j] = Some(ik + kj);
                    }
                }
            }
        }
    }
    d
}

pub fn evaluate(p: &RandomProgram, method: Method, gran: Granularity) -> OracleResult {
    let n = p.num_functions();
    let tf = p.target_functions();
    let cd = call_distances(p, gran);

    let mut functions = Vec::with_capacity(n);
    let mut function_summands = Vec::with_capacity(n);
    let mut fn_single = Vec::with_capacity(n);
    for f in 0..n {
        let ds: Vec<u64> = tf.iter().filter_map(|&t| cd[f][t]).collect();
        if tf.contains(&f) {
            functions.push(Some(BigRational::zero()));
            fn_single.push(true);
        } else {
            let rs: Vec<BigRational> = ds.iter().map(|&x| rat(x)).collect();
            functions.push(aggregate(method, &rs));
            fn_single.push(ds.len() == 1);
        }
        function_summands.push(ds);
    }

    let mut blocks = Vec::with_capacity(n);
    let mut block_single = Vec::with_capacity(n);
    let mut summands = Vec::with_capacity(n);
    for f in 0..n {
        let nb = p.succ[f].len();
        let is_target = |b: usize| p.targets.contains(&(f, b));
        if gran == Granularity::Func {
            blocks.push(
                (0..nb)
                    .map(|b| if is_target(b) { Some(BigRational::zero()) } else { functions[f].clone() })
                    .collect(),
            );
            block_single.push((0..nb).map(|b| is_target(b) || fn_single[f]).collect());
            summands.push(vec![Vec::new(); nb]);
            continue;
        }
        // anchors: target blocks and blocks calling something that reaches a target
        let mut anchor: Vec<Option<(BigRational, bool)>> = vec![None; nb];
        for (b, slot) in anchor.iter_mut().enumerate() {
            if is_target(b) {
                *slot = Some((BigRational::zero(), true));
                continue;
            }
            let defined: Vec<usize> = p.calls[f][b].iter().copied().filter(|&c| functions[c].is_some()).collect();
            let best = defined.iter().filter_map(|&c| functions[c].clone()).min();
            if let Some(best) = best {
                let v = match gran {
                    Granularity::Appr => best * BigRational::from_integer(BigInt::from(MAGNIFIER)),
                    _ => best,
                };
                *slot = Some((v, defined.len() == 1 && fn_single[defined[0]]));
            }
        }
        let mut vals = Vec::with_capacity(nb);
        let mut singles = Vec::with_capacity(nb);
        let mut sums = Vec::with_capacity(nb);
        for b in 0..nb {
            if let Some((v, s)) = &anchor[b] {
                vals.push(Some(v.clone()));
                singles.push(*s);
                sums.push(Vec::new());
                continue;
            }
            let hops = path_min_hops(&p.succ[f], b);
            let mut xs = Vec::new();
            let mut single = true;
            for (r, a) in anchor.iter().enumerate() {
                if let (Some((v, s)), Some(h)) = (a, hops[r]) {
                    if h > 0 {
                        xs.push(rat(h) + v);
                        single &= *s;
                    }
                }
            }
            single &= xs.len() == 1;
            vals.push(aggregate(method, &xs));
            singles.push(single);
            sums.push(xs);
        }
        blocks.push(vals);
        block_single.push(singles);
        summands.push(sums);
    }

    OracleResult {
        functions,
        blocks,
        block_single,
        summands,
        function_summands,
    }
}

/// Relative-error comparison used for inexact rationals.
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// Compares a library map with the oracle; `Err` names the first mismatch.
pub fn check_against_oracle(
    p: &RandomProgram,
    g: &dgfdist_core::ProgramGraph,
    map: &dgfdist_core::DistanceMap,
    oracle: &OracleResult,
) -> Result<(), String> {
    let method = map.config.method;
    for f in 0..p.num_functions() {
        for b in 0..p.succ[f].len() {
            let id = g.block_id(&block_name(f, b)).ok_or("missing block")?;
            let got = map.get(id);
            let want = oracle.block_f64(f, b);
            let ok = match (got, want) {
                (None, None) => true,
                (Some(x), Some(y)) => match method {
                    Method::Closest => x == y,
                    Method::Arithmetic => close(x, y, 1e-12),
                    Method::Harmonic => close(x, y, 1e-9),
                },
                _ => false,
            };
            if !ok {
                return Err(format!(
                    "{}:{} block {}: library {got:?}, oracle {want:?}",
                    method,
                    map.config.granularity,
                    block_name(f, b)
                ));
            }
        }
    }
    Ok(())
}
