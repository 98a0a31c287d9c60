//! Laplace-domain temporal memory: the leaky-integrator bank, its geometric
//! grid, and the discrete Post inversion that reads a fuzzy, log-compressed
//! history back out.

mod ensemble;
mod grid;
mod inversion;
mod probe;

pub use ensemble::{LaplaceEnsemble, FRAME_OFF, FRAME_ON};
pub use grid::TauGrid;
pub use inversion::{
    calibrate_gains, first_derivative, kth_derivative, post_prefactor, three_point_weights, PostInverter,
};
pub use probe::{impulse_response_probe, probe_ensemble, ProbeSeries};
#[cfg(test)]
pub(crate) use probe::argmax;
