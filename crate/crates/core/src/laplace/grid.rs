use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometric grid of past-time offsets `tau*` and their matching decay rates.
///
/// Node `i` sits at `tau*_i = tau0 * (1 + c)^i` with rate `s_i = k / tau*_i`.
/// Only nodes at least `k` away from either edge can be read out, since the
/// k-th derivative stencil consumes `k` neighbours on each side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauGrid {
    tau0: f64,
    c: f64,
    k: usize,
    tau_stars: Vec<f64>,
    s_values: Vec<f64>,
    slice_indices: Vec<usize>,
}

impl TauGrid {
    /// Builds a grid whose first node sits at `tau0`.
    pub fn new(tau0: f64, c: f64, k: usize, n_nodes: usize, slice_indices: &[usize]) -> Result<Self> {
        Self::build(tau0, c, k, n_nodes, slice_indices, 0)
    }

    /// Builds the smallest grid that reads out `tau*` centers at
    /// `first_center * (1 + c)^offset` for each offset, padding `k` nodes on
    /// either side so every slice has full stencil support.
    pub fn padded(first_center: f64, c: f64, k: usize, slice_offsets: &[usize]) -> Result<Self> {
        if slice_offsets.is_empty() {
            return Err(Error::InvalidGrid("no slices requested".into()));
        }
        let max_offset = slice_offsets.iter().copied().max().unwrap_or(0);
        let n_nodes = max_offset + 2 * k + 1;
        let slices: Vec<usize> = slice_offsets.iter().map(|o| o + k).collect();
        Self::build(first_center, c, k, n_nodes, &slices, k)
    }

    /// Five slices at 1/30 s * 1.1^{0, 8, 16, 24, 32} with k = 4 on a 41-node grid.
    pub fn catch_default() -> Self {
        Self::padded(1.0 / 30.0, 0.1, 4, &[0, 8, 16, 24, 32]).expect("default grid is valid")
    }

    // `anchor` is the node index that sits exactly at `tau0_at_anchor`.
    fn build(
        tau0_at_anchor: f64,
        c: f64,
        k: usize,
        n_nodes: usize,
        slice_indices: &[usize],
        anchor: usize,
    ) -> Result<Self> {
        if !(tau0_at_anchor.is_finite() && tau0_at_anchor > 0.0) {
            return Err(Error::InvalidGrid(format!("tau0 must be positive, got {tau0_at_anchor}")));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidGrid(format!("c must be positive, got {c}")));
        }
        if k == 0 {
            return Err(Error::InvalidGrid("k must be at least 1".into()));
        }
        if n_nodes < 2 * k + 1 {
            return Err(Error::InvalidGrid(format!(
                "{n_nodes} nodes cannot support order k={k}; need at least {}",
                2 * k + 1
            )));
        }
        let ratio = 1.0 + c;
        let tau_stars: Vec<f64> = (0..n_nodes)
            .map(|i| tau0_at_anchor * ratio.powi(i as i32 - anchor as i32))
            .collect();
        let kf = k as f64;
        let s_values: Vec<f64> = tau_stars.iter().map(|t| kf / t).collect();

        let mut slices = slice_indices.to_vec();
        slices.sort_unstable();
        slices.dedup();
        let (min, max) = (k, n_nodes - 1 - k);
        if let Some(&node) = slices.iter().find(|&&i| i < min || i > max) {
            return Err(Error::MissingStencilSupport { node, min, max });
        }

        Ok(Self {
            tau0: tau_stars[0],
            c,
            k,
            tau_stars,
            s_values,
            slice_indices: slices,
        })
    }

    /// Same nodes, different read-out slices.
    pub fn with_slices(&self, slice_indices: &[usize]) -> Result<Self> {
        let mut slices = slice_indices.to_vec();
        slices.sort_unstable();
        slices.dedup();
        let range = self.supported_nodes();
        if let Some(&node) = slices.iter().find(|i| !range.contains(i)) {
            return Err(Error::MissingStencilSupport {
                node,
                min: *range.start(),
                max: *range.end(),
            });
        }
        Ok(Self {
            slice_indices: slices,
            ..self.clone()
        })
    }

    /// Every node with full stencil support, for dense read-outs.
    pub fn with_all_supported_slices(&self) -> Self {
        let slices: Vec<usize> = self.supported_nodes().collect();
        Self {
            slice_indices: slices,
            ..self.clone()
        }
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_nodes(&self) -> usize {
        self.tau_stars.len()
    }

    pub fn tau_stars(&self) -> &[f64] {
        &self.tau_stars
    }

    pub fn s_values(&self) -> &[f64] {
        &self.s_values
    }

    pub fn slice_indices(&self) -> &[usize] {
        &self.slice_indices
    }

    pub fn n_slices(&self) -> usize {
        self.slice_indices.len()
    }

    pub fn slice_tau_stars(&self) -> Vec<f64> {
        self.slice_indices.iter().map(|&i| self.tau_stars[i]).collect()
    }

    pub fn slice_s_values(&self) -> Vec<f64> {
        self.slice_indices.iter().map(|&i| self.s_values[i]).collect()
    }

    pub fn supported_nodes(&self) -> RangeInclusive<usize> {
        self.k..=self.n_nodes() - 1 - self.k
    }

    /// Number of geometric nodes needed to span `[tau0, horizon]` at spacing `c`.
    pub fn nodes_to_cover(tau0: f64, horizon: f64, c: f64) -> usize {
        if horizon <= tau0 {
            return 1;
        }
        ((horizon / tau0).ln() / (1.0 + c).ln()).ceil() as usize + 1
    }
}
