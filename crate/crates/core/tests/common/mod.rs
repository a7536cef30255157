#![allow(dead_code)]

use dgfdist_core::subject::{ByteCmp, CmpOp, Guard, RuleDecl};
use dgfdist_core::{GraphDecl, SubjectDecl};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn eq(index: usize, value: u8) -> Guard {
    Guard(vec![ByteCmp {
        index,
        op: CmpOp::Eq,
        value,
    }])
}

fn arm(block: &str, guard: Guard, target: &str) -> RuleDecl {
    RuleDecl::Arm {
        block: block.into(),
        guard,
        target: target.into(),
    }
}

fn default(block: &str, target: &str) -> RuleDecl {
    RuleDecl::Default {
        block: block.into(),
        target: target.into(),
    }
}

/// `main` checks byte 0 and calls `mid`, which checks byte 1 and calls `leaf`,
/// which crashes in `boom` on byte 2. `oops` in `mid` is a second crash.
pub fn small_maze() -> SubjectDecl {
    let mut g = GraphDecl::new();
    g.function("main", "m0").function("mid", "d0").function("leaf", "l0");
    for (b, f) in [
        ("m0", "main"),
        ("m1", "main"),
        ("m2", "main"),
        ("d0", "mid"),
        ("d1", "mid"),
        ("d2", "mid"),
        ("oops", "mid"),
        ("l0", "leaf"),
        ("boom", "leaf"),
        ("l1", "leaf"),
    ] {
        g.block(b, f);
    }
    g.edge("m0", "m1").edge("m0", "m2").edge("m1", "m2");
    g.edge("d0", "d1").edge("d0", "d2").edge("d0", "oops").edge("d1", "d2");
    g.edge("l0", "boom").edge("l0", "l1");
    g.call("m1", "mid").call("d1", "leaf");
    SubjectDecl {
        graph: g,
        rules: vec![
            arm("m0", eq(0, b'M'), "m1"),
            default("m0", "m2"),
            arm("d0", eq(1, b'Z'), "d1"),
            arm("d0", eq(1, 0xff), "oops"),
            default("d0", "d2"),
            arm("l0", eq(2, b'!'), "boom"),
            default("l0", "l1"),
        ],
        crashes: vec!["boom".into(), "oops".into()],
        entry: Some("main".into()),
    }
}

/// Ordered arms of (comparisons, successor) and a default successor.
pub type Rule = (Vec<(Vec<(usize, CmpOp, u8)>, usize)>, usize);

/// A random subject and an independent description of how it should run.
#[derive(Clone, Debug)]
pub struct RandomSubject {
    pub entry: Vec<usize>,
    /// `succ[f][b]`
    pub succ: Vec<Vec<Vec<usize>>>,
    pub calls: Vec<Vec<Vec<usize>>>,
    /// `rules[f][b]`
    pub rules: Vec<Vec<Option<Rule>>>,
    pub crash: Vec<Vec<bool>>,
}

fn bname(f: usize, b: usize) -> String {
    format!("f{f}b{b}")
}

impl RandomSubject {
    pub fn generate(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nf = rng.random_range(1..=6);
        let mut succ = Vec::new();
        let mut calls = Vec::new();
        let mut rules = Vec::new();
        let mut crash = Vec::new();
        for _ in 0..nf {
            let nb = rng.random_range(1..=8);
            let mut s: Vec<Vec<usize>> = Vec::new();
            let mut r = Vec::new();
            let mut c = Vec::new();
            for _ in 0..nb {
                let k = rng.random_range(0..=3usize);
                let mut out: Vec<usize> = (0..k).map(|_| rng.random_range(0..nb)).collect();
                out.sort_unstable();
                out.dedup();
                let rule = if out.len() >= 2 || (out.len() == 1 && rng.random_bool(0.3)) {
                    let arms = (0..rng.random_range(1..=out.len().max(1) + 1))
                        .map(|_| {
                            let cmps = (0..rng.random_range(1..=2))
                                .map(|_| {
                                    let op = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Gt][rng.random_range(0..4)];
                                    (rng.random_range(0..6), op, rng.random::<u8>())
                                })
                                .collect();
                            (cmps, out[rng.random_range(0..out.len())])
                        })
                        .collect();
                    Some((arms, out[rng.random_range(0..out.len())]))
                } else {
                    None
                };
                let cs = if rng.random_bool(0.2) { vec![rng.random_range(0..nf)] } else { Vec::new() };
                s.push(out);
                r.push(rule);
                c.push(cs);
            }
            crash.push((0..nb).map(|_| rng.random_bool(0.05)).collect());
            succ.push(s);
            calls.push(c);
            rules.push(r);
        }
        let entry = vec![0; nf];
        Self {
            entry,
            succ,
            calls,
            rules,
            crash,
        }
    }

    pub fn decl(&self) -> SubjectDecl {
        let mut g = GraphDecl::new();
        let mut rules = Vec::new();
        let mut crashes = Vec::new();
        for f in 0..self.succ.len() {
            let fname = format!("f{f}");
            g.function(&fname, &bname(f, self.entry[f]));
            for b in 0..self.succ[f].len() {
                g.block(&bname(f, b), &fname);
                for &s in &self.succ[f][b] {
                    g.edge(&bname(f, b), &bname(f, s));
                }
                for &c in &self.calls[f][b] {
                    g.call(&bname(f, b), &format!("f{c}"));
                }
                if let Some((arms, d)) = &self.rules[f][b] {
                    for (cmps, t) in arms {
                        let guard = Guard(
                            cmps.iter()
                                .map(|&(index, op, value)| ByteCmp { index, op, value })
                                .collect(),
                        );
                        rules.push(arm(&bname(f, b), guard, &bname(f, *t)));
                    }
                    rules.push(default(&bname(f, b), &bname(f, *d)));
                }
                if self.crash[f][b] {
                    crashes.push(bname(f, b));
                }
            }
        }
        SubjectDecl {
            graph: g,
            rules,
            crashes,
            entry: Some("f0".into()),
        }
    }

    /// Reference interpreter: plain recursion over calls. Returns the trace as
    /// block names and whether it ended in a crash.
    pub fn run(&self, input: &[u8], limit: usize) -> (Vec<String>, bool) {
        let mut trace = Vec::new();
        let crashed = self.run_function(0, input, limit, &mut trace);
        (trace, crashed == Some(true))
    }

    /// `Some(true)` crash, `Some(false)` step limit, `None` normal return.
    fn run_function(&self, f: usize, input: &[u8], limit: usize, trace: &mut Vec<String>) -> Option<bool> {
        let mut b = self.entry[f];
        loop {
            if trace.len() >= limit {
                return Some(false);
            }
            trace.push(bname(f, b));
            if self.crash[f][b] {
                return Some(true);
            }
            for &c in &self.calls[f][b] {
                if let Some(stop) = self.run_function(c, input, limit, trace) {
                    return Some(stop);
                }
            }
            b = match &self.rules[f][b] {
                Some((arms, d)) => arms
                    .iter()
                    .find(|(cmps, _)| {
                        cmps.iter().all(|&(i, op, v)| match input.get(i) {
                            None => false,
                            Some(&x) => match op {
                                CmpOp::Eq => x == v,
                                CmpOp::Ne => x != v,
                                CmpOp::Lt => x < v,
                                CmpOp::Gt => x > v,
                            },
                        })
                    })
                    .map_or(*d, |(_, t)| *t),
                None => match self.succ[f][b].as_slice() {
                    [] => return None,
                    [only] => *only,
                    _ => unreachable!("generator rules every branching block"),
                },
            };
        }
    }
}
