//! Manufactured problems, error norms and convergence studies.

mod errors;
mod problem;
mod study;

pub use errors::{
    compute_errors, fit_rate, projected_coefficients, reference_solution,
    rigid_motion_coefficients, ErrorReport, MeanConstraint, RigidMotionAdjustment,
};
pub use problem::{
    builtin_problem, traction_from, BuiltinExample, ExactSolution, GradientField, ModelProblem,
    ScalarField, TractionField, VectorField,
};
pub use study::{
    convergence_study, solve_problem, ConvergenceTable, MeshFamily, SeriesFit, SolveConfig,
    SolveOutcome, StudyConfig, StudyRow, CSV_HEADER,
};
