//! Working memories that turn a stream of frames into a fixed-size
//! `(n_slices x n_features)` activation matrix.
//!
//! All three implementations flatten slice-major with the oldest (largest
//! `tau*`) slice first, so a network sees the same input layout whichever
//! memory feeds it.

mod exp_decay;
mod fifo;
mod sith;

use serde::{Deserialize, Serialize};

pub use exp_decay::{derive_decay_rates, ExpDecaySet};
pub use fifo::FifoBuffer;
pub use sith::SithMemory;

use crate::error::{Error, Result};
use crate::laplace::{TauGrid, FRAME_OFF, FRAME_ON};

pub trait WorkingMemory: Send {
    fn n_slices(&self) -> usize;

    fn n_features(&self) -> usize;

    /// Feeds one frame of `n_features` values.
    fn observe(&mut self, frame: &[f64]) -> Result<()>;

    /// Writes the flattened `(n_slices x n_features)` representation into `out`.
    fn render_into(&self, out: &mut [f64]);

    fn reset(&mut self);

    fn render(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_slices() * self.n_features()];
        self.render_into(&mut out);
        out
    }

    fn input_size(&self) -> usize {
        self.n_slices() * self.n_features()
    }
}

/// Seconds a frame is driven and then left to decay, for the integrator-based memories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameTiming {
    pub on: f64,
    pub off: f64,
}

impl Default for FrameTiming {
    fn default() -> Self {
        Self {
            on: FRAME_ON,
            off: FRAME_OFF,
        }
    }
}

/// Serializable description of a memory, as found in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MemoryConfig {
    Buffer {
        size: usize,
    },
    ExpDecay {
        /// Half-life points; rates are `ln 2 / tau*`.
        tau_stars: Vec<f64>,
        #[serde(default)]
        timing: FrameTiming,
    },
    Sith {
        #[serde(default = "default_first_center")]
        first_center: f64,
        #[serde(default = "default_c")]
        c: f64,
        #[serde(default = "default_k")]
        k: usize,
        /// Node offsets of the read-out slices relative to the first center.
        #[serde(default = "default_offsets")]
        slice_offsets: Vec<usize>,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        clamp_negative: bool,
        #[serde(default)]
        timing: FrameTiming,
    },
}

fn default_first_center() -> f64 {
    1.0 / 30.0
}

fn default_c() -> f64 {
    0.1
}

fn default_k() -> usize {
    4
}

fn default_offsets() -> Vec<usize> {
    vec![0, 8, 16, 24, 32]
}

fn default_alpha() -> f64 {
    1.0
}

impl MemoryConfig {
    pub fn buffer(size: usize) -> Self {
        Self::Buffer { size }
    }

    /// Five slices matching the default SITH grid.
    pub fn sith_default() -> Self {
        Self::Sith {
            first_center: default_first_center(),
            c: default_c(),
            k: default_k(),
            slice_offsets: default_offsets(),
            alpha: default_alpha(),
            clamp_negative: false,
            timing: FrameTiming::default(),
        }
    }

    /// Decay rates halving at the default SITH slice centers.
    pub fn exp_decay_default() -> Self {
        Self::ExpDecay {
            tau_stars: TauGrid::catch_default().slice_tau_stars(),
            timing: FrameTiming::default(),
        }
    }

    pub fn n_slices(&self) -> usize {
        match self {
            Self::Buffer { size } => *size,
            Self::ExpDecay { tau_stars, .. } => tau_stars.len(),
            Self::Sith { slice_offsets, .. } => {
                let mut o = slice_offsets.clone();
                o.sort_unstable();
                o.dedup();
                o.len()
            }
        }
    }

    /// Short label like `buffer-5`, `expdecay-5`, `sith-5`.
    pub fn label(&self) -> String {
        let name = match self {
            Self::Buffer { .. } => "buffer",
            Self::ExpDecay { .. } => "expdecay",
            Self::Sith { .. } => "sith",
        };
        format!("{name}-{}", self.n_slices())
    }

    pub fn validate(&self) -> Result<()> {
        self.build(1).map(|_| ())
    }

    pub fn build(&self, n_features: usize) -> Result<Box<dyn WorkingMemory>> {
        Ok(match self {
            Self::Buffer { size } => Box::new(FifoBuffer::new(*size, n_features)?),
            Self::ExpDecay { tau_stars, timing } => {
                Box::new(ExpDecaySet::from_tau_stars(tau_stars, n_features)?.with_timing(*timing)?)
            }
            Self::Sith {
                first_center,
                c,
                k,
                slice_offsets,
                alpha,
                clamp_negative,
                timing,
            } => {
                let grid = TauGrid::padded(*first_center, *c, *k, slice_offsets)?;
                Box::new(
                    SithMemory::new(grid, n_features)?
                        .with_alpha(*alpha)?
                        .with_clamp(*clamp_negative)
                        .with_timing(*timing)?,
                )
            }
        })
    }
}

pub(crate) fn check_timing(timing: FrameTiming) -> Result<FrameTiming> {
    for d in [timing.on, timing.off] {
        if !(d.is_finite() && d >= 0.0) {
            return Err(Error::InvalidDuration(d));
        }
    }
    Ok(timing)
}

pub(crate) fn check_frame(expected: usize, frame: &[f64]) -> Result<()> {
    if frame.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: frame.len(),
        });
    }
    match frame.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_memories_share_shape() {
        let configs = [
            MemoryConfig::buffer(5),
            MemoryConfig::exp_decay_default(),
            MemoryConfig::sith_default(),
        ];
        for cfg in &configs {
            let mut m = cfg.build(234).unwrap();
            assert_eq!(m.input_size(), 1170, "{}", cfg.label());
            let mut frame = vec![0.0; 234];
            frame[17] = 1.0;
            m.observe(&frame).unwrap();
            assert_eq!(m.render().len(), 1170);
            m.reset();
            assert!(m.render().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = MemoryConfig::sith_default();
        let text = toml::to_string(&cfg).unwrap();
        let back: MemoryConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        let minimal: MemoryConfig = toml::from_str("kind = \"sith\"").unwrap();
        assert_eq!(minimal, cfg);
        let buffer: MemoryConfig = toml::from_str("kind = \"buffer\"\nsize = 10").unwrap();
        assert_eq!(buffer.label(), "buffer-10");
    }

    #[test]
    fn rejects_wrong_frame_length() {
        for cfg in [MemoryConfig::buffer(2), MemoryConfig::sith_default(), MemoryConfig::exp_decay_default()] {
            let mut m = cfg.build(4).unwrap();
            assert!(matches!(m.observe(&[0.0; 3]), Err(Error::LengthMismatch { .. })));
        }
    }
}
