//! Line-oriented graph, subject, and target file formats.
//!
//! ```text
//! # comment
//! func main entry=m0
//! block m0 in=main
//! edge m0 -> m1
//! call m1 -> helper
//! rule m0 if byte[0]==0x42 && byte[1]<10 goto m1
//! rule m0 default goto m2
//! crash m1
//! entry main
//! ```
//!
//! The last four directives are only accepted in subject files.

use std::fmt::Write as _;

use dgfdist_core::graph::{GraphDecl, ProgramGraph};
use dgfdist_core::subject::{ByteCmp, CmpOp, Guard, RuleDecl, SubjectDecl, SubjectSpec};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Graph(#[from] dgfdist_core::GraphError),
    #[error(transparent)]
    Subject(#[from] dgfdist_core::subject::SubjectError),
}

fn syntax(line: usize, message: impl Into<String>) -> SyntaxError {
    SyntaxError {
        line,
        message: message.into(),
    }
}

/// Non-empty, comment-stripped lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

fn keyed<'a>(tok: Option<&'a str>, key: &str, line: usize) -> Result<&'a str, SyntaxError> {
    let tok = tok.ok_or_else(|| syntax(line, format!("missing `{key}=`")))?;
    match tok.strip_prefix(key).and_then(|t| t.strip_prefix('=')) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(syntax(line, format!("expected `{key}=<id>`, found `{tok}`"))),
    }
}

fn arrow<'a>(toks: &[&'a str], line: usize, what: &str) -> Result<(&'a str, &'a str), SyntaxError> {
    match toks {
        [a, "->", b] => Ok((a, b)),
        _ => Err(syntax(line, format!("expected `{what} <id> -> <id>`"))),
    }
}

fn parse_int(s: &str) -> Option<u64> {
    if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16).ok()
    } else {
        s.parse().ok()
    }
}

fn parse_cmp(s: &str, line: usize) -> Result<ByteCmp, SyntaxError> {
    let bad = || syntax(line, format!("bad guard `{s}`, expected byte[<i>]<op><const>"));
    let rest = s.strip_prefix("byte[").ok_or_else(bad)?;
    let (index, rest) = rest.split_once(']').ok_or_else(bad)?;
    let index = parse_int(index).ok_or_else(bad)? as usize;
    let (op, value) = [("==", CmpOp::Eq), ("!=", CmpOp::Ne), ("<", CmpOp::Lt), (">", CmpOp::Gt)]
        .into_iter()
        .find_map(|(tok, op)| rest.strip_prefix(tok).map(|v| (op, v)))
        .ok_or_else(bad)?;
    let value = parse_int(value)
        .and_then(|v| u8::try_from(v).ok())
        .ok_or_else(|| syntax(line, format!("guard constant out of byte range in `{s}`")))?;
    Ok(ByteCmp { index, op, value })
}

fn parse_guard(toks: &[&str], line: usize) -> Result<Guard, SyntaxError> {
    let joined: String = toks.concat();
    if joined.is_empty() {
        return Err(syntax(line, "empty guard"));
    }
    joined
        .split("&&")
        .map(|c| parse_cmp(c, line))
        .collect::<Result<Vec<_>, _>>()
        .map(Guard)
}

fn parse_lines(text: &str, subject: bool) -> Result<SubjectDecl, SyntaxError> {
    let mut decl = SubjectDecl::default();
    for (n, line) in content_lines(text) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let (head, rest) = (toks[0], &toks[1..]);
        match head {
            "func" => {
                let name = rest.first().ok_or_else(|| syntax(n, "missing function id"))?;
                let entry = keyed(rest.get(1).copied(), "entry", n)?;
                if rest.len() > 2 {
                    return Err(syntax(n, "trailing tokens after `func`"));
                }
                decl.graph.function(name, entry);
            }
            "block" => {
                let name = rest.first().ok_or_else(|| syntax(n, "missing block id"))?;
                let func = keyed(rest.get(1).copied(), "in", n)?;
                if rest.len() > 2 {
                    return Err(syntax(n, "trailing tokens after `block`"));
                }
                decl.graph.block(name, func);
            }
            "edge" => {
                let (a, b) = arrow(rest, n, "edge")?;
                decl.graph.edge(a, b);
            }
            "call" => {
                let (a, f) = arrow(rest, n, "call")?;
                decl.graph.call(a, f);
            }
            "rule" if subject => {
                let block = rest.first().ok_or_else(|| syntax(n, "missing rule block"))?;
                let goto = rest.iter().position(|&t| t == "goto");
                let target = match goto {
                    Some(i) if i + 2 == rest.len() => rest[i + 1],
                    _ => return Err(syntax(n, "expected `... goto <id>` at end of rule")),
                };
                let goto = goto.unwrap_or_default();
                match rest.get(1).copied() {
                    Some("default") if goto == 2 => decl.rules.push(RuleDecl::Default {
                        block: block.to_string(),
                        target: target.to_string(),
                    }),
                    Some("if") => decl.rules.push(RuleDecl::Arm {
                        block: block.to_string(),
                        guard: parse_guard(&rest[2..goto], n)?,
                        target: target.to_string(),
                    }),
                    _ => return Err(syntax(n, "expected `rule <id> if <guard> goto <id>` or `rule <id> default goto <id>`")),
                }
            }
            "crash" if subject => match rest {
                [b] => decl.crashes.push(b.to_string()),
                _ => return Err(syntax(n, "expected `crash <id>`")),
            },
            "entry" if subject => match rest {
                [f] => {
                    if decl.entry.replace(f.to_string()).is_some() {
                        return Err(syntax(n, "entry declared twice"));
                    }
                }
                _ => return Err(syntax(n, "expected `entry <id>`")),
            },
            other => return Err(syntax(n, format!("unknown directive `{other}`"))),
        }
    }
    Ok(decl)
}

/// Parses a graph file into its unvalidated declaration.
pub fn parse_graph_decl(text: &str) -> Result<GraphDecl, SyntaxError> {
    parse_lines(text, false).map(|d| d.graph)
}

pub fn parse_program_graph(text: &str) -> Result<ProgramGraph, FormatError> {
    Ok(ProgramGraph::build(&parse_graph_decl(text)?)?)
}

/// Parses a subject file (a graph file plus rule/crash/entry directives).
pub fn parse_subject_decl(text: &str) -> Result<SubjectDecl, SyntaxError> {
    parse_lines(text, true)
}

pub fn load_subject(text: &str) -> Result<SubjectSpec, FormatError> {
    Ok(SubjectSpec::build(&parse_subject_decl(text)?)?)
}

/// Target block ids, one per line.
pub fn parse_targets(text: &str) -> Result<Vec<String>, SyntaxError> {
    content_lines(text)
        .map(|(n, line)| {
            if line.split_whitespace().count() != 1 {
                Err(syntax(n, "expected one block id per line"))
            } else {
                Ok(line.to_string())
            }
        })
        .collect()
}

fn write_graph_decl(out: &mut String, d: &GraphDecl) {
    for (f, e) in &d.functions {
        let _ = writeln!(out, "func {f} entry={e}");
    }
    for (b, f) in &d.blocks {
        let _ = writeln!(out, "block {b} in={f}");
    }
    for (a, b) in &d.edges {
        let _ = writeln!(out, "edge {a} -> {b}");
    }
    for (b, f) in &d.calls {
        let _ = writeln!(out, "call {b} -> {f}");
    }
}

/// Canonical text form of a graph.
pub fn write_graph(g: &ProgramGraph) -> String {
    let mut out = String::new();
    write_graph_decl(&mut out, &g.to_decl());
    out
}

pub fn write_subject(s: &SubjectSpec) -> String {
    let d = s.to_decl();
    let mut out = String::new();
    write_graph_decl(&mut out, &d.graph);
    for r in &d.rules {
        match r {
            RuleDecl::Arm { block, guard, target } => {
                let g: Vec<String> = guard.0.iter().map(ToString::to_string).collect();
                let _ = writeln!(out, "rule {block} if {} goto {target}", g.join(" && "));
            }
            RuleDecl::Default { block, target } => {
                let _ = writeln!(out, "rule {block} default goto {target}");
            }
        }
    }
    for c in &d.crashes {
        let _ = writeln!(out, "crash {c}");
    }
    if let Some(e) = &d.entry {
        let _ = writeln!(out, "entry {e}");
    }
    out
}
