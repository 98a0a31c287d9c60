use std::collections::VecDeque;

use super::{check_frame, WorkingMemory};
use crate::error::{Error, Result};

/// Verbatim copies of the last `capacity` frames, zero-filled until seen.
#[derive(Debug, Clone, PartialEq)]
pub struct FifoBuffer {
    n_features: usize,
    // oldest at the front
    frames: VecDeque<Vec<f64>>,
}

impl FifoBuffer {
    pub fn new(capacity: usize, n_features: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("buffer capacity must be at least 1".into()));
        }
        Ok(Self {
            n_features,
            frames: (0..capacity).map(|_| vec![0.0; n_features]).collect(),
        })
    }

    pub fn capacity(&self) -> usize {
        self.frames.len()
    }

    /// Slot `0` is the oldest.
    pub fn slot(&self, index: usize) -> &[f64] {
        &self.frames[index]
    }
}

impl WorkingMemory for FifoBuffer {
    fn n_slices(&self) -> usize {
        self.frames.len()
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn observe(&mut self, frame: &[f64]) -> Result<()> {
        check_frame(self.n_features, frame)?;
        let mut recycled = self.frames.pop_front().expect("capacity >= 1");
        recycled.copy_from_slice(frame);
        self.frames.push_back(recycled);
        Ok(())
    }

    fn render_into(&self, out: &mut [f64]) {
        for (dst, frame) in out.chunks_exact_mut(self.n_features).zip(&self.frames) {
            dst.copy_from_slice(frame);
        }
    }

    fn reset(&mut self) {
        self.frames.iter_mut().for_each(|f| f.fill(0.0));
    }
}
