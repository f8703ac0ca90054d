//! Numerical laboratory for sharp estimates on drift-diffusion equations:
//! gradient and Hessian log-curvature bounds, Harnack and heat-kernel
//! comparison inequalities, pressure bounds for the porous medium equation,
//! cost-function comparison theorems, and a monotone quantity for weighted
//! curve flows — each checked against closed-form equality cases.

pub mod action;
pub mod closed_forms;
pub mod estimates;
pub mod export;
pub mod fields;
pub mod flow;
pub mod grid;
pub mod pde;
pub mod potentials;
pub mod report;

pub use action::{CostFunctional, CostResult, CostVariant, MinimizeOptions, PathCurve};
pub use estimates::CheckOptions;
pub use fields::{ScalarField, SymmetricMatrixField, VectorField};
pub use flow::{CurveState, FlowSeries, QuantityVariant};
pub use grid::{GridSpec, Point, Topology};
pub use pde::{EquationKind, Scheme, SolverConfig, Trajectory};
pub use potentials::{HypothesisAudit, PotentialSpec, TrigMode};
pub use report::EstimateReport;
