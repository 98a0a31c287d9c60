//! Discrete Post inversion of a Laplace-domain ensemble.
//!
//! For a read-out node with rate `s`, the estimate of the input `k/s` seconds
//! in the past is `(-1)^k / k! * s^(k+1) * d^k F / ds^k`. The k-th derivative
//! is taken by applying a three-point first-derivative stencil `k` times over
//! the (non-uniform) grid of `s` values.

use serde::{Deserialize, Serialize};

use super::grid::TauGrid;
use crate::error::{Error, Result};

/// Weights of the three-point first derivative at `x0` given neighbours
/// `xm` and `xp`. Exact for quadratics; valid for any distinct, ordered or
/// reverse-ordered points.
pub fn three_point_weights(xm: f64, x0: f64, xp: f64) -> [f64; 3] {
    let h1 = x0 - xm;
    let h2 = xp - x0;
    [
        -h2 / (h1 * (h1 + h2)),
        (h2 - h1) / (h1 * h2),
        h1 / (h2 * (h1 + h2)),
    ]
}

/// First derivative at every interior node. `out[j]` is the derivative at node `j + 1`.
pub fn first_derivative(values: &[f64], nodes: &[f64]) -> Vec<f64> {
    debug_assert_eq!(values.len(), nodes.len());
    (1..nodes.len().saturating_sub(1))
        .map(|i| {
            let w = three_point_weights(nodes[i - 1], nodes[i], nodes[i + 1]);
            w[0] * values[i - 1] + w[1] * values[i] + w[2] * values[i + 1]
        })
        .collect()
}

/// k-th derivative by repeated three-point differentiation. `out[j]` is the
/// derivative at node `j + k`; the valid range shrinks by one node per side per pass.
pub fn kth_derivative(values: &[f64], nodes: &[f64], k: usize) -> Vec<f64> {
    let mut current = values.to_vec();
    for pass in 0..k {
        current = first_derivative(&current, &nodes[pass..nodes.len() - pass]);
    }
    current
}

/// `(-1)^k / k! * s^(k+1)`.
pub fn post_prefactor(k: usize, s: f64) -> f64 {
    let factorial: f64 = (1..=k).map(|i| i as f64).product();
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign / factorial * s.powi(k as i32 + 1)
}

/// Precomposed inversion weights for a fixed grid and slice selection.
///
/// Each slice reads `2k + 1` neighbouring nodes; the stencil passes and the
/// Post prefactor are folded into one weight vector per slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostInverter {
    k: usize,
    slices: Vec<usize>,
    weights: Vec<Vec<f64>>,
    gains: Vec<f64>,
    clamp_negative: bool,
}

impl PostInverter {
    pub fn new(grid: &TauGrid) -> Result<Self> {
        let weights = raw_weights(grid)?;
        let gains = gains_from_weights(grid, &weights)?;
        Ok(Self {
            k: grid.k(),
            slices: grid.slice_indices().to_vec(),
            weights,
            gains,
            clamp_negative: false,
        })
    }

    /// Zero out negative reconstructions. Breaks linearity; off by default.
    pub fn with_clamp(mut self, clamp_negative: bool) -> Self {
        self.clamp_negative = clamp_negative;
        self
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn n_slices(&self) -> usize {
        self.slices.len()
    }

    /// Uncalibrated reconstruction of one feature's node activations.
    pub fn invert_raw_into(&self, nodes: &[f64], out: &mut [f64]) {
        for ((slot, &center), w) in out.iter_mut().zip(&self.slices).zip(&self.weights) {
            let window = &nodes[center - self.k..=center + self.k];
            *slot = w.iter().zip(window).map(|(a, b)| a * b).sum();
        }
    }

    /// Calibrated reconstruction of one feature's node activations.
    pub fn invert_into(&self, nodes: &[f64], out: &mut [f64]) {
        self.invert_raw_into(nodes, out);
        for (v, g) in out.iter_mut().zip(&self.gains) {
            *v *= g;
            if self.clamp_negative && *v < 0.0 {
                *v = 0.0;
            }
        }
    }
}

// Weight vectors for each slice, built by pushing unit vectors through the
// k-fold stencil over that slice's window.
fn raw_weights(grid: &TauGrid) -> Result<Vec<Vec<f64>>> {
    let k = grid.k();
    let s = grid.s_values();
    let supported = grid.supported_nodes();
    grid.slice_indices()
        .iter()
        .map(|&center| {
            if !supported.contains(&center) {
                return Err(Error::MissingStencilSupport {
                    node: center,
                    min: *supported.start(),
                    max: *supported.end(),
                });
            }
            let window = &s[center - k..=center + k];
            let prefactor = post_prefactor(k, s[center]);
            let weights = (0..2 * k + 1)
                .map(|j| {
                    let mut basis = vec![0.0; 2 * k + 1];
                    basis[j] = 1.0;
                    prefactor * kth_derivative(&basis, window, k)[0]
                })
                .collect();
            Ok(weights)
        })
        .collect()
}

fn gains_from_weights(grid: &TauGrid, weights: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = grid.k();
    let s = grid.s_values();
    grid.slice_indices()
        .iter()
        .zip(weights)
        .map(|(&center, w)| {
            let response: f64 = w
                .iter()
                .zip(&s[center - k..=center + k])
                .map(|(wj, sj)| wj / sj)
                .sum();
            if !(response.is_finite() && response > 0.0) {
                return Err(Error::NonPositiveCalibration {
                    node: center,
                    value: response,
                });
            }
            Ok(1.0 / response)
        })
        .collect()
}

/// Per-slice gains that map the analytic steady state `F(s) = 1/s` to exactly 1.
pub fn calibrate_gains(grid: &TauGrid) -> Result<Vec<f64>> {
    gains_from_weights(grid, &raw_weights(grid)?)
}
