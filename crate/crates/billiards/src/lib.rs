//! Deterministic hard-disk billiard tables, simulated event by event, plus a
//! Monte Carlo ensemble engine for studying how correlations between region
//! passage events emerge and wash out.
//!
//! The crate is organized along the pipeline:
//!
//! - [`dynamics`]: exact event-driven motion of hard disks in a box
//! - [`scenario`]: experiment configs, builtins, and initial-state sampling
//! - [`ensemble`]: N independent tables, region-event detection, aggregation
//! - [`stats`]: probability estimates, correlation delta, bootstrap CIs
//! - [`cli`]: the `billiards` command-line front end
//!
//! Everything downstream of a `(config, n, master_seed)` triple is a pure
//! function of it, including under multi-threaded execution.

pub mod cli;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod rng;
pub mod scenario;
pub mod stats;
pub mod vec2;

pub use dynamics::{
    advance_to, reflect_off_wall, resolve_disk_collision, step_to_next_event, time_to_disk_contact,
    time_to_wall_contact, CollisionEvent, Disk, EventKind, TableGeometry, TableState, Wall,
};
pub use ensemble::{run_ensemble, run_trial, segment_crosses_rect, EnsembleResult, TrialOutcome};
pub use error::{Error, Result};
pub use rng::RandomStream;
pub use scenario::{
    builtin_scenario, load_config, sample_initial_state, BuiltinScenario, DiskSpec, Rect,
    RegionEvent, ScalarDistribution, ScenarioConfig,
};
pub use stats::{
    bootstrap_delta_ci, convergence_trace, correlation_delta, correlation_report,
    estimate_probability, fit_fluctuation_slope, ConvergenceTrace, CorrelationReport,
    ProbabilityEstimate, TraceRow,
};
pub use vec2::Vec2;
