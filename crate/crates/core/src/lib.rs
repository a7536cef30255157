//! Distance metrics for directed grey-box fuzzing, a deterministic subject
//! interpreter, the distance-guided fuzzing loop, and the statistics used to
//! compare campaigns.
//!
//! The crate is `no_std` and only needs `alloc`; file formats, the CLI, and
//! experiment orchestration live in the `dgfdist` crate.

#![no_std]

extern crate alloc;

pub mod campaign;
pub mod distance;
pub mod graph;
pub mod lineage;
pub mod log;
pub mod stats;
pub mod subject;

pub use campaign::{run_campaign, CampaignConfig, CampaignError, ScheduleParams};
pub use distance::{distance_map, DistanceConfig, DistanceMap, Granularity, Method};
pub use graph::{BlockIdx, FuncIdx, GraphDecl, GraphError, ProgramGraph, TargetSpec};
pub use log::{CampaignLog, Event};
pub use subject::{ExecutionResult, SubjectDecl, SubjectSpec};
