//! Bootstrap particle filtering of `P(theta_t in A | y_1..y_t)`.

mod model;
mod pf;
mod region;
mod regime_pf;

pub use model::{
    DriftJumpWalk, GaussianRandomWalk, LogitBinomialWalk, LogitInit, MultivariateGaussianWalk,
    StateSpaceModel,
};
pub use pf::{ess, pf_init, systematic_resample, ParticleEnsemble, PfStep, RunDiagnostics};
pub use region::{region_contains, AcceptableRegion, Side, StateVector};
pub use regime_pf::{RegimeParticle, RegimeParticleFilter, RegimeStep};
