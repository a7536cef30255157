//! Deterministic interpreter for synthetic subject programs.
//!
//! A subject is a [`ProgramGraph`] whose blocks carry byte-guarded branch
//! rules. Executing an input walks the graph from the entry function, calling
//! into callees inline, until a crash block is entered, the entry function
//! returns, or the step limit is hit.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::graph::{BlockIdx, FuncIdx, GraphDecl, GraphError, ProgramGraph, TargetSpec};

pub const DEFAULT_STEP_LIMIT: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Gt,
}

impl CmpOp {
    pub fn as_str(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
        }
    }
}

/// `byte[index] <op> value`. Never matches when `index` is past the input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ByteCmp {
    pub index: usize,
    pub op: CmpOp,
    pub value: u8,
}

impl ByteCmp {
    #[inline]
    pub fn matches(&self, input: &[u8]) -> bool {
        let Some(&b) = input.get(self.index) else {
            return false;
        };
        match self.op {
            CmpOp::Eq => b == self.value,
            CmpOp::Ne => b != self.value,
            CmpOp::Lt => b < self.value,
            CmpOp::Gt => b > self.value,
        }
    }
}

impl fmt::Display for ByteCmp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "byte[{}]{}0x{:02x}", self.index, self.op.as_str(), self.value)
    }
}

/// Conjunction of byte comparisons.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Guard(pub Vec<ByteCmp>);

impl Guard {
    #[inline]
    pub fn matches(&self, input: &[u8]) -> bool {
        self.0.iter().all(|c| c.matches(input))
    }
}

/// Name-based rule declaration, as parsed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RuleDecl {
    Arm {
        block: String,
        guard: Guard,
        target: String,
    },
    Default {
        block: String,
        target: String,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SubjectDecl {
    pub graph: GraphDecl,
    pub rules: Vec<RuleDecl>,
    pub crashes: Vec<String>,
    pub entry: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BranchRule {
    pub arms: Vec<(Guard, BlockIdx)>,
    pub default: BlockIdx,
}

impl BranchRule {
    #[inline]
    pub fn choose(&self, input: &[u8]) -> BlockIdx {
        self.arms
            .iter()
            .find(|(g, _)| g.matches(input))
            .map_or(self.default, |&(_, s)| s)
    }
}

/// What a block does once its calls have returned.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Exit {
    Return,
    Goto(BlockIdx),
    Branch(BranchRule),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SubjectError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("rule references unknown block `{0}`")]
    UnknownBlock(String),
    #[error("rule {from} -> {to} is not a CFG edge")]
    NotAnEdge { from: String, to: String },
    #[error("rules for block `{0}` have no default successor")]
    NoDefault(String),
    #[error("block `{0}` has more than one default rule")]
    DuplicateDefault(String),
    #[error("block `{0}` has several successors but no rules")]
    Unruled(String),
    #[error("entry function `{0}` is not declared")]
    UnknownEntry(String),
    #[error("no entry function given and the graph has more than one function")]
    MissingEntry,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubjectSpec {
    graph: ProgramGraph,
    exits: Vec<Exit>,
    crash: Vec<bool>,
    entry: FuncIdx,
}

impl SubjectSpec {
    pub fn build(decl: &SubjectDecl) -> Result<Self, SubjectError> {
        let graph = ProgramGraph::build(&decl.graph)?;
        let lookup = |name: &str| {
            graph
                .block_id(name)
                .ok_or_else(|| SubjectError::UnknownBlock(name.to_string()))
        };

        let mut arms: Vec<Vec<(Guard, BlockIdx)>> = vec![Vec::new(); graph.num_blocks()];
        let mut defaults: Vec<Option<BlockIdx>> = vec![None; graph.num_blocks()];
        for rule in &decl.rules {
            let (block, target) = match rule {
                RuleDecl::Arm { block, target, .. } | RuleDecl::Default { block, target } => {
                    (block, target)
                }
            };
            let b = lookup(block)?;
            let t = lookup(target)?;
            if !graph.successors(b).contains(&t) {
                return Err(SubjectError::NotAnEdge {
                    from: block.clone(),
                    to: target.clone(),
                });
            }
            match rule {
                RuleDecl::Arm { guard, .. } => arms[b.index()].push((guard.clone(), t)),
                RuleDecl::Default { .. } => {
                    if defaults[b.index()].replace(t).is_some() {
                        return Err(SubjectError::DuplicateDefault(block.clone()));
                    }
                }
            }
        }

        let mut exits = Vec::with_capacity(graph.num_blocks());
        for b in graph.blocks() {
            let arms = core::mem::take(&mut arms[b.index()]);
            let exit = match (arms.is_empty(), defaults[b.index()]) {
                (_, Some(default)) => Exit::Branch(BranchRule { arms, default }),
                (false, None) => return Err(SubjectError::NoDefault(graph.block_name(b).into())),
                (true, None) => match graph.successors(b) {
                    [] => Exit::Return,
                    [only] => Exit::Goto(*only),
                    _ => return Err(SubjectError::Unruled(graph.block_name(b).into())),
                },
            };
            exits.push(exit);
        }

        let mut crash = vec![false; graph.num_blocks()];
        for name in &decl.crashes {
            crash[lookup(name)?.index()] = true;
        }

        let entry = match &decl.entry {
            Some(name) => graph
                .func_id(name)
                .ok_or_else(|| SubjectError::UnknownEntry(name.clone()))?,
            None if graph.num_functions() == 1 => FuncIdx(0),
            None => return Err(SubjectError::MissingEntry),
        };

        Ok(Self {
            graph,
            exits,
            crash,
            entry,
        })
    }

    pub fn graph(&self) -> &ProgramGraph {
        &self.graph
    }

    pub fn entry_function(&self) -> FuncIdx {
        self.entry
    }

    pub fn is_crash_block(&self, b: BlockIdx) -> bool {
        self.crash[b.index()]
    }

    pub fn crash_blocks(&self) -> impl Iterator<Item = BlockIdx> + '_ {
        self.graph.blocks().filter(|b| self.crash[b.index()])
    }

    /// The branch rule of `b`, if it has one.
    pub fn rule(&self, b: BlockIdx) -> Option<&BranchRule> {
        match &self.exits[b.index()] {
            Exit::Branch(r) => Some(r),
            _ => None,
        }
    }

    /// Name-based declaration that rebuilds into an identical subject.
    pub fn to_decl(&self) -> SubjectDecl {
        let g = &self.graph;
        let mut rules = Vec::new();
        for b in g.blocks() {
            if let Exit::Branch(r) = &self.exits[b.index()] {
                for (guard, t) in &r.arms {
                    rules.push(RuleDecl::Arm {
                        block: g.block_name(b).into(),
                        guard: guard.clone(),
                        target: g.block_name(*t).into(),
                    });
                }
                rules.push(RuleDecl::Default {
                    block: g.block_name(b).into(),
                    target: g.block_name(r.default).into(),
                });
            }
        }
        SubjectDecl {
            graph: g.to_decl(),
            rules,
            crashes: self.crash_blocks().map(|b| g.block_name(b).into()).collect(),
            entry: Some(g.function_name(self.entry).into()),
        }
    }

    /// Runs `input`. Same subject and input always give the same result.
    pub fn execute(&self, input: &[u8], step_limit: usize) -> ExecutionResult {
        let mut trace = Vec::new();
        let crash_block = self.execute_into(input, step_limit, &mut trace);
        ExecutionResult {
            trace,
            crash_block,
        }
    }

    /// Like [`SubjectSpec::execute`], reusing `trace` as the output buffer.
    /// Returns the crash block, if any.
    pub fn execute_into(
        &self,
        input: &[u8],
        step_limit: usize,
        trace: &mut Vec<BlockIdx>,
    ) -> Option<BlockIdx> {
        trace.clear();
        // (block, calls already made from it)
        let mut stack: Vec<(BlockIdx, usize)> = Vec::new();
        let mut next = Some(self.graph.function(self.entry).entry);

        while trace.len() < step_limit {
            let Some(b) = next.take() else {
                // function returned: resume the caller's remaining calls
                let Some(&(caller, _)) = stack.last() else {
                    break;
                };
                next = self.advance(caller, input, &mut stack);
                continue;
            };
            trace.push(b);
            if self.crash[b.index()] {
                return Some(b);
            }
            stack.push((b, 0));
            next = self.advance(b, input, &mut stack);
        }
        None
    }

    /// Top of `stack` is `b`. Either enters its next callee or leaves `b`,
    /// returning the block to enter next (`None` on function return).
    fn advance(&self, b: BlockIdx, input: &[u8], stack: &mut Vec<(BlockIdx, usize)>) -> Option<BlockIdx> {
        let calls = self.graph.block_calls(b);
        let top = stack.last_mut().expect("advance on empty stack");
        if top.1 < calls.len() {
            let callee = calls[top.1];
            top.1 += 1;
            return Some(self.graph.function(callee).entry);
        }
        stack.pop();
        match &self.exits[b.index()] {
            Exit::Return => {
                // the enclosing call's caller is now on top of the stack
                None
            }
            Exit::Goto(s) => Some(*s),
            Exit::Branch(r) => Some(r.choose(input)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecutionResult {
    pub trace: Vec<BlockIdx>,
    pub crash_block: Option<BlockIdx>,
}

impl ExecutionResult {
    pub fn crashed(&self) -> bool {
        self.crash_block.is_some()
    }

    pub fn steps(&self) -> usize {
        self.trace.len()
    }
}

/// True iff `crash_block` witnesses one of the targets.
pub fn is_poc(crash_block: Option<BlockIdx>, targets: &TargetSpec) -> bool {
    crash_block.is_some_and(|b| targets.contains_block(b))
}
