use std::f64::consts::LN_2;

use super::{check_frame, check_timing, FrameTiming, WorkingMemory};
use crate::error::{Error, Result};

/// Rates `ln 2 / tau*`, so each trace halves `tau*` seconds after a pulse.
pub fn derive_decay_rates(tau_stars: &[f64]) -> Result<Vec<f64>> {
    tau_stars
        .iter()
        .map(|&t| {
            if t.is_finite() && t > 0.0 {
                Ok(LN_2 / t)
            } else {
                Err(Error::InvalidTau(t))
            }
        })
        .collect()
}

/// Per-feature leaky traces at a handful of fixed rates, with no inversion.
///
/// Driven with the same on/off timing as [`super::SithMemory`], so the two
/// differ only in the read-out.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpDecaySet {
    // slowest first, matching the oldest-first layout
    rates: Vec<f64>,
    n_features: usize,
    timing: FrameTiming,
    // slice-major: activations[slice * n_features + feature]
    activations: Vec<f64>,
}

impl ExpDecaySet {
    pub fn new(rates: &[f64], n_features: usize) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::InvalidConfig("at least one decay rate required".into()));
        }
        if let Some(&bad) = rates.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::InvalidConfig(format!("decay rate must be positive, got {bad}")));
        }
        let mut rates = rates.to_vec();
        rates.sort_by(f64::total_cmp);
        Ok(Self {
            activations: vec![0.0; rates.len() * n_features],
            rates,
            n_features,
            timing: FrameTiming::default(),
        })
    }

    pub fn from_tau_stars(tau_stars: &[f64], n_features: usize) -> Result<Self> {
        Self::new(&derive_decay_rates(tau_stars)?, n_features)
    }

    pub fn with_timing(mut self, timing: FrameTiming) -> Result<Self> {
        self.timing = check_timing(timing)?;
        Ok(self)
    }

    /// Rates in slice order (slowest first).
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn decay(&mut self, dt: f64) {
        for (rate, row) in self.rates.iter().zip(self.activations.chunks_exact_mut(self.n_features)) {
            let d = (-rate * dt).exp();
            row.iter_mut().for_each(|a| *a *= d);
        }
    }
}

impl WorkingMemory for ExpDecaySet {
    fn n_slices(&self) -> usize {
        self.rates.len()
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn observe(&mut self, frame: &[f64]) -> Result<()> {
        check_frame(self.n_features, frame)?;
        let FrameTiming { on, off } = self.timing;
        for (&rate, row) in self.rates.iter().zip(self.activations.chunks_exact_mut(self.n_features)) {
            let x = -rate * on;
            let d = x.exp();
            let g = -x.exp_m1() / rate;
            for (a, &f) in row.iter_mut().zip(frame) {
                *a = *a * d + f * g;
            }
        }
        self.decay(off);
        Ok(())
    }

    fn render_into(&self, out: &mut [f64]) {
        out.copy_from_slice(&self.activations);
    }

    fn reset(&mut self) {
        self.activations.fill(0.0);
    }
}
