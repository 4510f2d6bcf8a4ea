//! The multi-scale construction: constant selection, the initial scale, the
//! schedule of scales, avalanche-principle checks, two-scale defects,
//! extrapolation errors and the continuity probe.

pub mod avalanche;
pub mod extrapolate;
pub mod initial;
pub mod params;
pub mod probe;
pub mod schedule;
pub mod twoscale;

pub use avalanche::{aligned_hyperbolic_sequence, avalanche_check, ApReport};
pub use extrapolate::{extrapolation_error, fitted_decay_exponent, ExtrapolationReport, StepRow};
pub use initial::{find_initial_scale, window_range, InitialScale};
pub use params::{select_parameters, InvariantCheck, ParameterBundle, SigmaSearch};
pub use probe::{continuity_probe, ContinuityProbeResult};
pub use schedule::{build_schedule, next_qtilde, smallest_certified_start, ScaleSchedule, ScheduleEntry, SchedulePolicy};
pub use twoscale::{two_scale_defect, TwoScaleEstimate, TwoScaleFlags};
