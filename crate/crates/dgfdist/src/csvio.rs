//! CSV encodings of distance maps and campaign logs.

use std::io::{Read, Write};

use dgfdist_core::graph::ProgramGraph;
use dgfdist_core::log::{CampaignLog, Event};
use dgfdist_core::DistanceMap;
use thiserror::Error;

pub const LOG_COLUMNS: [&str; 8] = [
    "tick",
    "event",
    "id",
    "parent_id",
    "distance",
    "interesting",
    "crashed",
    "poc",
];

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// `block,function,distance`, one row per block in lexicographic order,
/// empty distance when undefined.
pub fn write_distance_csv<W: Write>(g: &ProgramGraph, map: &DistanceMap, out: W) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["block", "function", "distance"])?;
    for b in g.blocks() {
        w.write_record([
            g.block_name(b),
            g.function_name(g.block_function(b)),
            &opt(map.get(b)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_log<W: Write>(log: &CampaignLog, mut out: W) -> Result<(), CsvError> {
    for (k, v) in &log.header {
        writeln!(out, "# {k}={v}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LOG_COLUMNS)?;
    for e in &log.events {
        let row: [String; 8] = match *e {
            Event::SeedAdmitted {
                tick,
                id,
                parent,
                distance,
            } => [
                tick.to_string(),
                "seed".into(),
                id.to_string(),
                opt(parent),
                opt(distance),
                String::new(),
                String::new(),
                String::new(),
            ],
            Event::TestcaseExecuted {
                tick,
                id,
                parent,
                distance,
                interesting,
                crashed,
                poc,
            } => [
                tick.to_string(),
                "exec".into(),
                opt(id),
                parent.to_string(),
                opt(distance),
                flag(interesting).into(),
                flag(crashed).into(),
                flag(poc).into(),
            ],
            Event::CrashFound {
                tick,
                id,
                parent,
                distance,
                poc,
            } => [
                tick.to_string(),
                "crash".into(),
                id.to_string(),
                opt(parent),
                opt(distance),
                String::new(),
                "1".into(),
                flag(poc).into(),
            ],
        };
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn log_to_string(log: &CampaignLog) -> String {
    let mut buf = Vec::new();
    write_log(log, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("log CSV is UTF-8")
}

struct Row<'a> {
    line: u64,
    rec: &'a csv::StringRecord,
}

impl Row<'_> {
    fn err(&self, message: impl Into<String>) -> CsvError {
        CsvError::Row {
            line: self.line,
            message: message.into(),
        }
    }

    fn field(&self, i: usize) -> &str {
        self.rec.get(i).unwrap_or("")
    }

    fn opt_u64(&self, i: usize) -> Result<Option<u64>, CsvError> {
        match self.field(i) {
            "" => Ok(None),
            s => s
                .parse()
                .map(Some)
                .map_err(|_| self.err(format!("column {} is not an integer: `{s}`", LOG_COLUMNS[i]))),
        }
    }

    fn u64(&self, i: usize) -> Result<u64, CsvError> {
        self.opt_u64(i)?
            .ok_or_else(|| self.err(format!("column {} is empty", LOG_COLUMNS[i])))
    }

    fn opt_f64(&self, i: usize) -> Result<Option<f64>, CsvError> {
        match self.field(i) {
            "" => Ok(None),
            s => match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                _ => Err(self.err(format!("column {} is not a number: `{s}`", LOG_COLUMNS[i]))),
            },
        }
    }

    fn flag(&self, i: usize) -> Result<bool, CsvError> {
        match self.field(i) {
            "0" => Ok(false),
            "1" => Ok(true),
            s => Err(self.err(format!("column {} must be 0 or 1, found `{s}`", LOG_COLUMNS[i]))),
        }
    }
}

/// Reads a log written by [`write_log`]. Errors name the offending line.
pub fn read_log<R: Read>(mut input: R) -> Result<CampaignLog, CsvError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut header = Vec::new();
    for line in text.lines() {
        let Some(comment) = line.strip_prefix('#') else { break };
        if let Some((k, v)) = comment.trim().split_once('=') {
            header.push((k.to_string(), v.to_string()));
        }
    }

    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let cols = r.headers()?.clone();
    if cols.iter().ne(LOG_COLUMNS) {
        return Err(CsvError::Row {
            line: cols.position().map_or(1, |p| p.line()),
            message: format!("expected header `{}`", LOG_COLUMNS.join(",")),
        });
    }

    let mut events = Vec::new();
    let mut last_tick = 0;
    for rec in r.records() {
        let rec = rec?;
        let row = Row {
            line: rec.position().map_or(0, |p| p.line()),
            rec: &rec,
        };
        if rec.len() != LOG_COLUMNS.len() {
            return Err(row.err(format!("expected {} fields, found {}", LOG_COLUMNS.len(), rec.len())));
        }
        let tick = row.u64(0)?;
        if tick < last_tick {
            return Err(row.err("ticks must be non-decreasing"));
        }
        last_tick = tick;
        let event = match row.field(1) {
            "seed" => Event::SeedAdmitted {
                tick,
                id: row.u64(2)?,
                parent: row.opt_u64(3)?,
                distance: row.opt_f64(4)?,
            },
            "exec" => Event::TestcaseExecuted {
                tick,
                id: row.opt_u64(2)?,
                parent: row.u64(3)?,
                distance: row.opt_f64(4)?,
                interesting: row.flag(5)?,
                crashed: row.flag(6)?,
                poc: row.flag(7)?,
            },
            "crash" => Event::CrashFound {
                tick,
                id: row.u64(2)?,
                parent: row.opt_u64(3)?,
                distance: row.opt_f64(4)?,
                poc: row.flag(7)?,
            },
            other => return Err(row.err(format!("unknown event `{other}`"))),
        };
        events.push(event);
    }
    Ok(CampaignLog { header, events })
}
