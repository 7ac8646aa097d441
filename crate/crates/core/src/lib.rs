pub mod channel;
pub mod complexity;
pub mod experiment;
pub mod instances;
pub mod linalg;
pub mod model;
pub mod optimizer;
mod serde_cplx;
pub mod solver;
pub mod subproblem;
pub mod surrogates;
