//! Causal identification and verification toolkit.
//!
//! - [`graph`]: mixed graphs, the graph DSL, latent projection and clustering
//! - [`sep`]: m-separation and back-door adjustment
//! - [`expr`]: symbolic probability expressions evaluated on joint tables
//! - [`ident`]: the ID algorithm and closed-form trapdoor/front-door formulas
//! - [`scm`]: structural causal models, exact enumeration and sampling
//! - [`estim`]: effect estimators and diagnostics

pub mod estim;
pub mod expr;
pub mod graph;
pub mod ident;
pub mod scm;
pub mod sep;
