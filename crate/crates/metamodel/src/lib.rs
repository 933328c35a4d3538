//! Polynomial meta-models for uncertainty quantification: sparse polynomial
//! chaos expansions and canonical low-rank approximations, built from small
//! experimental designs with cross-validated hyper-parameter selection and
//! tail-aware error measures.

pub mod basis;
pub mod benchmarks;
pub mod ed;
pub mod input;
pub mod lra;
pub mod metrics;
pub mod pce;
pub mod regression;
pub mod sampling;
pub mod stdnorm;

mod sobol_data;

pub use basis::{BasisSet, MultiIndex, PolyFamily};
pub use ed::ExperimentalDesign;
pub use input::{InputModel, Marginal, MarginalFamily};
pub use lra::{LraModel, StoppingRule};
pub use metrics::ErrorReport;
pub use pce::{PceFitConfig, PceModel};
pub use sampling::Design;
