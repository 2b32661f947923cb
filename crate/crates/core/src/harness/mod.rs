//! Configuration, convergence studies, demonstrations and persistence
//! behind the `monoflow` command line.

mod config;
mod demos;
mod export;
mod study;

pub use config::{
    DiagnosticsConfig, DomainConfig, DomainKind, LawConfig, MeshConfig, OutputConfig, PairConfig, ReferenceConfig,
    ReferenceKind, StudyConfig, TruncationConfig,
};
pub use demos::{
    graph_check, level_table, oscillation, rough_field, run_graph_check, run_infsup, run_truncation_demo,
    truncation_sweep, whitney_vtk, GraphCheck, InfSupRow, InfSupSweep, LevelRow, LevelTable, TruncationDemo,
    TruncationSweep, AXIOM_SAMPLES, BETA_VARIATION, BOUNDS_TOL, IDENTITY_SAMPLES, IDENTITY_TOL, LEVELS_HEADER, PHI_TOL,
    TRUNCATION_HEADER,
};
pub use export::{
    export_fields, load_mesh, num, read_field_file, save, vertex_velocity, write_field_file, FieldFile, Table,
};
pub use study::{
    body_force, run_study, Failure, Fingerprint, LocatedVelocity, StudyFlags, StudyReport, StudyRow, MIN_RATE, NORM_GROWTH,
    STUDY_HEADER,
};
