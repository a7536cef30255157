//! Interprocedural program structure: per-function control-flow graphs joined
//! by call sites, plus the target set that every distance is measured against.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

/// Dense index of a basic block inside a [`ProgramGraph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockIdx(pub u32);

/// Dense index of a function inside a [`ProgramGraph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FuncIdx(pub u32);

impl BlockIdx {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl FuncIdx {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A single broken invariant in a [`GraphDecl`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    NoFunctions,
    EmptyId,
    DuplicateFunction(String),
    DuplicateBlock(String),
    EntryNotInBlocks { function: String, entry: String },
    BlockInUnknownFunction { block: String, function: String },
    EdgeUnknownBlock { from: String, to: String },
    CrossFunctionEdge { from: String, to: String },
    CallUnknownBlock { block: String, callee: String },
    DanglingCallee { block: String, callee: String },
}

impl Violation {
    pub fn is_dangling(&self) -> bool {
        matches!(
            self,
            Violation::BlockInUnknownFunction { .. }
                | Violation::EdgeUnknownBlock { .. }
                | Violation::CallUnknownBlock { .. }
                | Violation::DanglingCallee { .. }
        )
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoFunctions => write!(f, "no functions declared"),
            Violation::EmptyId => write!(f, "empty identifier"),
            Violation::DuplicateFunction(id) => write!(f, "duplicate function id: {id}"),
            Violation::DuplicateBlock(id) => write!(f, "duplicate block id: {id}"),
            Violation::EntryNotInBlocks { function, entry } => {
                write!(f, "entry not in blocks: {entry} (function {function})")
            }
            Violation::BlockInUnknownFunction { block, function } => {
                write!(f, "block {block} declared in unknown function {function}")
            }
            Violation::EdgeUnknownBlock { from, to } => {
                write!(f, "edge {from} -> {to} references an unknown block")
            }
            Violation::CrossFunctionEdge { from, to } => {
                write!(f, "edge {from} -> {to} crosses a function boundary")
            }
            Violation::CallUnknownBlock { block, callee } => {
                write!(f, "call {block} -> {callee} is made from an unknown block")
            }
            Violation::DanglingCallee { block, callee } => {
                write!(f, "call {block} -> {callee} targets an undeclared function")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("{0}")]
    Invalid(Violation),
    #[error("unknown function: {0}")]
    UnknownFunction(String),
    #[error("unknown block: {0}")]
    UnknownBlock(String),
    #[error("target set is empty")]
    EmptyTargets,
}

/// Unvalidated, name-based description of a program graph as it comes out of
/// a parser or a test fixture.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GraphDecl {
    /// `(function, entry block)`
    pub functions: Vec<(String, String)>,
    /// `(block, enclosing function)`
    pub blocks: Vec<(String, String)>,
    pub edges: Vec<(String, String)>,
    /// `(calling block, callee function)`
    pub calls: Vec<(String, String)>,
}

impl GraphDecl {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn function(&mut self, name: &str, entry: &str) -> &mut Self {
        self.functions.push((name.to_string(), entry.to_string()));
        self
    }

    pub fn block(&mut self, name: &str, function: &str) -> &mut Self {
        self.blocks.push((name.to_string(), function.to_string()));
        self
    }

    pub fn edge(&mut self, from: &str, to: &str) -> &mut Self {
        self.edges.push((from.to_string(), to.to_string()));
        self
    }

    pub fn call(&mut self, block: &str, callee: &str) -> &mut Self {
        self.calls.push((block.to_string(), callee.to_string()));
        self
    }

    /// Every broken invariant, in declaration order. Empty iff the declaration
    /// builds into a [`ProgramGraph`].
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.functions.is_empty() {
            out.push(Violation::NoFunctions);
        }
        let mut funcs = BTreeSet::new();
        for (name, _) in &self.functions {
            if name.is_empty() {
                out.push(Violation::EmptyId);
            } else if !funcs.insert(name.as_str()) {
                out.push(Violation::DuplicateFunction(name.clone()));
            }
        }
        let mut blocks: BTreeMap<&str, &str> = BTreeMap::new();
        for (name, func) in &self.blocks {
            if name.is_empty() {
                out.push(Violation::EmptyId);
                continue;
            }
            if blocks.insert(name.as_str(), func.as_str()).is_some() {
                out.push(Violation::DuplicateBlock(name.clone()));
            }
            if !funcs.contains(func.as_str()) {
                out.push(Violation::BlockInUnknownFunction {
                    block: name.clone(),
                    function: func.clone(),
                });
            }
        }
        for (name, entry) in &self.functions {
            if blocks.get(entry.as_str()) != Some(&name.as_str()) {
                out.push(Violation::EntryNotInBlocks {
                    function: name.clone(),
                    entry: entry.clone(),
                });
            }
        }
        for (from, to) in &self.edges {
            match (blocks.get(from.as_str()), blocks.get(to.as_str())) {
                (Some(a), Some(b)) if a == b => {}
                (Some(_), Some(_)) => out.push(Violation::CrossFunctionEdge {
                    from: from.clone(),
                    to: to.clone(),
                }),
                _ => out.push(Violation::EdgeUnknownBlock {
                    from: from.clone(),
                    to: to.clone(),
                }),
            }
        }
        for (block, callee) in &self.calls {
            if !blocks.contains_key(block.as_str()) {
                out.push(Violation::CallUnknownBlock {
                    block: block.clone(),
                    callee: callee.clone(),
                });
            }
            if !funcs.contains(callee.as_str()) {
                out.push(Violation::DanglingCallee {
                    block: block.clone(),
                    callee: callee.clone(),
                });
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    pub entry: BlockIdx,
    /// Sorted by index.
    pub blocks: Vec<BlockIdx>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Block {
    name: String,
    function: FuncIdx,
    succs: Vec<BlockIdx>,
    preds: Vec<BlockIdx>,
    calls: Vec<FuncIdx>,
}

/// Validated, immutable program graph. Indices are assigned in lexicographic
/// name order, so two declarations that differ only in line order build into
/// identical graphs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProgramGraph {
    functions: Vec<Function>,
    blocks: Vec<Block>,
    callees: Vec<Vec<FuncIdx>>,
    callers: Vec<Vec<FuncIdx>>,
    block_ids: BTreeMap<String, BlockIdx>,
    func_ids: BTreeMap<String, FuncIdx>,
}

impl ProgramGraph {
    pub fn build(decl: &GraphDecl) -> Result<Self, GraphError> {
        if let Some(v) = decl.validate().into_iter().next() {
            return Err(GraphError::Invalid(v));
        }

        let func_names: BTreeSet<&str> = decl.functions.iter().map(|(n, _)| n.as_str()).collect();
        let func_ids: BTreeMap<String, FuncIdx> = func_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.to_string(), FuncIdx(i as u32)))
            .collect();
        let block_owner: BTreeMap<&str, &str> = decl
            .blocks
            .iter()
            .map(|(b, f)| (b.as_str(), f.as_str()))
            .collect();
        let block_ids: BTreeMap<String, BlockIdx> = block_owner
            .keys()
            .enumerate()
            .map(|(i, n)| (n.to_string(), BlockIdx(i as u32)))
            .collect();

        let mut blocks: Vec<Block> = block_owner
            .iter()
            .map(|(name, func)| Block {
                name: name.to_string(),
                function: func_ids[*func],
                succs: Vec::new(),
                preds: Vec::new(),
                calls: Vec::new(),
            })
            .collect();

        let entries: BTreeMap<&str, &str> = decl
            .functions
            .iter()
            .map(|(f, e)| (f.as_str(), e.as_str()))
            .collect();
        let mut functions: Vec<Function> = func_names
            .iter()
            .map(|n| Function {
                name: n.to_string(),
                entry: block_ids[entries[n]],
                blocks: Vec::new(),
            })
            .collect();
        for (i, b) in blocks.iter().enumerate() {
            functions[b.function.index()].blocks.push(BlockIdx(i as u32));
        }

        for (from, to) in &decl.edges {
            let (a, b) = (block_ids[from.as_str()], block_ids[to.as_str()]);
            blocks[a.index()].succs.push(b);
            blocks[b.index()].preds.push(a);
        }
        let mut callees = vec![Vec::new(); functions.len()];
        let mut callers = vec![Vec::new(); functions.len()];
        for (block, callee) in &decl.calls {
            let b = block_ids[block.as_str()];
            let f = func_ids[callee.as_str()];
            blocks[b.index()].calls.push(f);
            let caller = blocks[b.index()].function;
            callees[caller.index()].push(f);
            callers[f.index()].push(caller);
        }
        for b in &mut blocks {
            sort_dedup(&mut b.succs);
            sort_dedup(&mut b.preds);
            sort_dedup(&mut b.calls);
        }
        callees.iter_mut().for_each(sort_dedup);
        callers.iter_mut().for_each(sort_dedup);

        Ok(Self {
            functions,
            blocks,
            callees,
            callers,
            block_ids,
            func_ids,
        })
    }

    /// Every broken invariant of this graph. A built graph always satisfies
    /// them, so this re-checks the declaration it round-trips to.
    pub fn validate(&self) -> Vec<Violation> {
        self.to_decl().validate()
    }

    /// Canonical name-based form, sorted, one entry per collapsed edge/call.
    pub fn to_decl(&self) -> GraphDecl {
        let mut d = GraphDecl::new();
        for f in &self.functions {
            d.function(&f.name, self.block_name(f.entry));
        }
        for b in &self.blocks {
            d.block(&b.name, &self.functions[b.function.index()].name);
        }
        for b in &self.blocks {
            for s in &b.succs {
                d.edge(&b.name, self.block_name(*s));
            }
        }
        for b in &self.blocks {
            for c in &b.calls {
                d.call(&b.name, &self.functions[c.index()].name);
            }
        }
        d
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn num_functions(&self) -> usize {
        self.functions.len()
    }

    pub fn functions(&self) -> impl ExactSizeIterator<Item = FuncIdx> {
        (0..self.functions.len() as u32).map(FuncIdx)
    }

    pub fn blocks(&self) -> impl ExactSizeIterator<Item = BlockIdx> {
        (0..self.blocks.len() as u32).map(BlockIdx)
    }

    pub fn function(&self, f: FuncIdx) -> &Function {
        &self.functions[f.index()]
    }

    pub fn function_name(&self, f: FuncIdx) -> &str {
        &self.functions[f.index()].name
    }

    pub fn block_name(&self, b: BlockIdx) -> &str {
        &self.blocks[b.index()].name
    }

    pub fn block_function(&self, b: BlockIdx) -> FuncIdx {
        self.blocks[b.index()].function
    }

    pub fn successors(&self, b: BlockIdx) -> &[BlockIdx] {
        &self.blocks[b.index()].succs
    }

    pub fn predecessors(&self, b: BlockIdx) -> &[BlockIdx] {
        &self.blocks[b.index()].preds
    }

    /// Functions called from `b`, sorted.
    pub fn block_calls(&self, b: BlockIdx) -> &[FuncIdx] {
        &self.blocks[b.index()].calls
    }

    /// Call-graph successors of `f`, sorted.
    pub fn callees(&self, f: FuncIdx) -> &[FuncIdx] {
        &self.callees[f.index()]
    }

    pub fn callers(&self, f: FuncIdx) -> &[FuncIdx] {
        &self.callers[f.index()]
    }

    pub fn has_call_edge(&self, caller: FuncIdx, callee: FuncIdx) -> bool {
        self.callees[caller.index()].binary_search(&callee).is_ok()
    }

    /// Blocks of `caller` holding a call to `callee`.
    pub fn call_sites(&self, caller: FuncIdx, callee: FuncIdx) -> impl Iterator<Item = BlockIdx> + '_ {
        self.functions[caller.index()]
            .blocks
            .iter()
            .copied()
            .filter(move |b| self.blocks[b.index()].calls.binary_search(&callee).is_ok())
    }

    /// All `(caller, callee)` call-graph edges, sorted.
    pub fn call_edges(&self) -> Vec<(FuncIdx, FuncIdx)> {
        self.functions()
            .flat_map(|f| self.callees(f).iter().map(move |&c| (f, c)))
            .collect()
    }

    pub fn block_id(&self, name: &str) -> Option<BlockIdx> {
        self.block_ids.get(name).copied()
    }

    pub fn func_id(&self, name: &str) -> Option<FuncIdx> {
        self.func_ids.get(name).copied()
    }

    /// Target functions reachable from `f` along call edges, `f` itself
    /// included when it is a target.
    pub fn reachable_targets(&self, f: FuncIdx, targets: &TargetSpec) -> BTreeSet<FuncIdx> {
        let mut seen = vec![false; self.functions.len()];
        let mut queue = VecDeque::new();
        seen[f.index()] = true;
        queue.push_back(f);
        let mut out = BTreeSet::new();
        while let Some(g) = queue.pop_front() {
            if targets.contains_function(g) {
                out.insert(g);
            }
            for &c in self.callees(g) {
                if !seen[c.index()] {
                    seen[c.index()] = true;
                    queue.push_back(c);
                }
            }
        }
        out
    }

    /// Name-based front end to [`ProgramGraph::reachable_targets`].
    pub fn reachable_targets_by_name(
        &self,
        f: &str,
        targets: &TargetSpec,
    ) -> Result<BTreeSet<FuncIdx>, GraphError> {
        let f = self
            .func_id(f)
            .ok_or_else(|| GraphError::UnknownFunction(f.to_string()))?;
        Ok(self.reachable_targets(f, targets))
    }
}

fn sort_dedup<T: Ord>(v: &mut Vec<T>) {
    v.sort_unstable();
    v.dedup();
}

/// Target blocks `T_b` and their enclosing functions `T_f`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetSpec {
    blocks: BTreeSet<BlockIdx>,
    functions: BTreeSet<FuncIdx>,
    is_block: Vec<bool>,
    is_function: Vec<bool>,
}

impl TargetSpec {
    pub fn new<I>(g: &ProgramGraph, blocks: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = BlockIdx>,
    {
        let blocks: BTreeSet<BlockIdx> = blocks.into_iter().collect();
        if blocks.is_empty() {
            return Err(GraphError::EmptyTargets);
        }
        if let Some(b) = blocks.iter().find(|b| b.index() >= g.num_blocks()) {
            return Err(GraphError::UnknownBlock(alloc::format!("#{}", b.0)));
        }
        let functions: BTreeSet<FuncIdx> = blocks.iter().map(|&b| g.block_function(b)).collect();
        let mut is_block = vec![false; g.num_blocks()];
        for b in &blocks {
            is_block[b.index()] = true;
        }
        let mut is_function = vec![false; g.num_functions()];
        for f in &functions {
            is_function[f.index()] = true;
        }
        Ok(Self {
            blocks,
            functions,
            is_block,
            is_function,
        })
    }

    pub fn from_names<'a, I>(g: &ProgramGraph, names: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let ids = names
            .into_iter()
            .map(|n| g.block_id(n).ok_or_else(|| GraphError::UnknownBlock(n.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(g, ids)
    }

    pub fn blocks(&self) -> &BTreeSet<BlockIdx> {
        &self.blocks
    }

    pub fn functions(&self) -> &BTreeSet<FuncIdx> {
        &self.functions
    }

    #[inline]
    pub fn contains_block(&self, b: BlockIdx) -> bool {
        self.is_block.get(b.index()).copied().unwrap_or(false)
    }

    #[inline]
    pub fn contains_function(&self, f: FuncIdx) -> bool {
        self.is_function.get(f.index()).copied().unwrap_or(false)
    }
}
