//! Detection of genomic or spatial regions where two groups of sparse event
//! counts have different underlying rates.
//!
//! Counts at each position are modeled as Poisson draws whose rates follow a
//! Dirichlet-process mixture with a Gamma base measure. A spike-and-slab
//! coupling ties the two groups' rates together at each position unless a
//! latent indicator says they differ; the posterior probability of that
//! indicator is the per-position evidence of differential abundance. A
//! collapsed Gibbs sampler ([`sampler`]) integrates the rates out analytically,
//! and a multiresolution binary search over the coordinate span ([`multires`])
//! prunes regions whose aggregate evidence is compatible with the null,
//! so long tracks with localized signal cost far less than a full scan.

pub mod decision;
pub mod ebayes;
mod error;
pub mod io;
mod math;
pub mod model;
pub mod multires;
pub mod oracle;
pub mod sampler;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{CountTrack, Hyperparams, MixtureState, PosteriorSummary};
pub use multires::{IntervalNode, MultiresResult, NodeStatus};
pub use sampler::{PiUpdate, SamplerConfig};
