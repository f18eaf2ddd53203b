//! Near-minimax fitting in the module `P + P F` generated by the transform `F`
//! of a constructed measure, and density experiments over test suites.

pub mod experiment;
pub mod fit;
pub mod suite;

pub use experiment::{density_experiment, k_diameter, ApproxOptions, CurvePoint, DensityReport, FunctionSummary};
pub use fit::{fit_module, FitData, LawsonOptions, LawsonStep, ModuleFit, ModuleGrid};
pub use suite::{dbar_pairing, interior_bumps, make_test_suite, FunctionClass, TestFunction, TestKind};
