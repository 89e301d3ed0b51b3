//! Explicit constants, schedules and the checks built on them.

pub mod benchmarks;
mod bounds;
mod oracles;
mod schedule;
mod study;
mod verify;

pub use bounds::{gronwall_bound, smoothing_bound_mbar, smoothing_exponent, BoundInputs, EstimateReport};
pub use oracles::{oracle_method_of_steps, oracle_monolithic, ScalarTrajectory};
pub use schedule::{regularization_schedule, waiting_time, ScheduleReport};
pub use study::{
    regularizing_window, thread_pool, weakstar_study, ConvergenceStudy, StudySpec, TrendDecision, TrendRule,
};
pub use verify::{smoothing_slope, verify_gronwall, verify_smoothing, SlopeFit};

#[cfg(test)]
mod tests;
