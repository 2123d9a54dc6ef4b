//! Benchmarks, reference-data generation and evaluation.

pub mod cases;
pub mod dataset;
pub mod metrics;
pub mod reference;

pub use cases::{make_cylinder, make_sod, CaseSpec, InitialCondition};
pub use dataset::{Dataset, DatasetRecorder, Frame};
pub use metrics::{evaluate, relative_l2, total_variation, MetricReport, Observable, Trajectory, TrajectoryRecorder};
pub use reference::{generate_reference, ReferenceOptions, ReferenceRun};
