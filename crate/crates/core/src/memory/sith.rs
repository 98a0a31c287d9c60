use super::{check_frame, check_timing, FrameTiming, WorkingMemory};
use crate::error::Result;
use crate::laplace::{LaplaceEnsemble, TauGrid};

/// Laplace ensemble read out through the Post inversion at a few slices.
#[derive(Debug, Clone, PartialEq)]
pub struct SithMemory {
    ensemble: LaplaceEnsemble,
    timing: FrameTiming,
}

impl SithMemory {
    pub fn new(grid: TauGrid, n_features: usize) -> Result<Self> {
        Ok(Self {
            ensemble: LaplaceEnsemble::new(grid, n_features)?,
            timing: FrameTiming::default(),
        })
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        self.ensemble = self.ensemble.with_alpha(alpha)?;
        Ok(self)
    }

    pub fn with_clamp(mut self, clamp_negative: bool) -> Self {
        self.ensemble = self.ensemble.with_clamp(clamp_negative);
        self
    }

    pub fn with_timing(mut self, timing: FrameTiming) -> Result<Self> {
        self.timing = check_timing(timing)?;
        Ok(self)
    }

    pub fn ensemble(&self) -> &LaplaceEnsemble {
        &self.ensemble
    }
}

impl WorkingMemory for SithMemory {
    fn n_slices(&self) -> usize {
        self.ensemble.n_slices()
    }

    fn n_features(&self) -> usize {
        self.ensemble.n_features()
    }

    fn observe(&mut self, frame: &[f64]) -> Result<()> {
        check_frame(self.n_features(), frame)?;
        self.ensemble.present_frame(frame, self.timing.on, self.timing.off)
    }

    fn render_into(&self, out: &mut [f64]) {
        // Inversion is feature-major with slices ascending in tau*; the
        // network layout is slice-major, largest tau* first.
        let n_features = self.n_features();
        let n_slices = self.n_slices();
        let inverted = self.ensemble.invert_post();
        for (feature, row) in inverted.chunks_exact(n_slices).enumerate() {
            for (slice, v) in row.iter().enumerate() {
                out[(n_slices - 1 - slice) * n_features + feature] = *v;
            }
        }
    }

    fn reset(&mut self) {
        self.ensemble.reset();
    }
}
