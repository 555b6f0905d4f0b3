//! Order-dependence analysis for sequential self-evaluations.
//!
//! Evaluations act on a unit state vector through a rotation (back-action)
//! and report a scalar readout in `[0, 1]`. The crate provides
//!
//! * the state/evaluation framework and its order-dependence classifier,
//! * the three-rotation model and its exact sequential-mean table,
//! * statistical tests of the constraints any classical, non-invasive
//!   account must satisfy (sequential-mean equalities and triangle
//!   inequalities on disagreement probabilities),
//! * an exact joint-distribution feasibility check with certificates,
//! * an agent simulator for synthetic data and power analysis,
//! * the trial file format and an append-only session store.

pub mod error;
pub mod feasibility;
pub mod framework;
pub mod nic;
pub mod rotation;
pub mod seed;
pub mod simulate;
pub mod store;
pub mod triangle;
pub mod trial;

pub use error::{Error, Result};
pub use feasibility::{
    brute_force_oracle, check_feasibility, triangle_necessary_check, Certificate, FeasibilityResult,
    MarginalSystem, MarginalsFile, PairTable,
};
pub use framework::{
    apply_back_action, classify_order_dependence, readout, run_sequence, Axis, Evaluation, MixedState,
    OrderDependenceKind, OrderDependenceVerdict, Rotation, SequenceOutcome, StateVector,
};
pub use nic::{
    analyze, estimate_stats, test_equalities, test_triangles, AnalysisConfig, NicTestReport, SequentialStats,
    StratumKey, Verdict,
};
pub use rotation::{binary_check, build_rotation, exact_c_matrix, rotation_table, CMatrix, RotationModelConfig};
pub use simulate::{power_curve, simulate, AgentKind, AgentSpec, LatentModel, SimulationPlan};
pub use store::{SessionManifest, TrialStore};
pub use triangle::{Disagreements, TriangleSlacks};
pub use trial::{read_trials, write_trials, Covariates, TrialRecord};
