//! Append-only record of a fuzzing campaign.

use alloc::string::String;
use alloc::vec::Vec;

/// One log row. Ids are shared by seeds and crashes and grow monotonically.
#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    SeedAdmitted {
        tick: u64,
        id: u64,
        parent: Option<u64>,
        distance: Option<f64>,
    },
    TestcaseExecuted {
        tick: u64,
        /// Set when the testcase became a seed or a crash.
        id: Option<u64>,
        parent: u64,
        distance: Option<f64>,
        interesting: bool,
        crashed: bool,
        poc: bool,
    },
    CrashFound {
        tick: u64,
        id: u64,
        parent: Option<u64>,
        distance: Option<f64>,
        poc: bool,
    },
}

impl Event {
    pub fn tick(&self) -> u64 {
        match *self {
            Event::SeedAdmitted { tick, .. }
            | Event::TestcaseExecuted { tick, .. }
            | Event::CrashFound { tick, .. } => tick,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Event::SeedAdmitted { .. } => "seed",
            Event::TestcaseExecuted { .. } => "exec",
            Event::CrashFound { .. } => "crash",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CampaignLog {
    /// Configuration echo, `key=value` pairs in a fixed order.
    pub header: Vec<(String, String)>,
    pub events: Vec<Event>,
}

impl CampaignLog {
    pub fn executions(&self) -> impl Iterator<Item = &Event> {
        self.events
            .iter()
            .filter(|e| matches!(e, Event::TestcaseExecuted { .. }))
    }

    pub fn seeds(&self) -> impl Iterator<Item = &Event> {
        self.events
            .iter()
            .filter(|e| matches!(e, Event::SeedAdmitted { .. }))
    }

    pub fn crashes(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| matches!(e, Event::CrashFound { .. }))
    }

    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}
