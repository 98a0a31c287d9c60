use serde::{Deserialize, Serialize};

use super::grid::TauGrid;
use super::inversion::PostInverter;
use crate::error::{Error, Result};

/// Seconds a frame is driven into the integrators.
pub const FRAME_ON: f64 = 1.0 / 300.0;
/// Seconds of free decay after each frame.
pub const FRAME_OFF: f64 = 1.0 / 30.0 - 1.0 / 300.0;

/// Bank of leaky integrators `dF/dt = -s F + f(t)`, one row of nodes per feature.
///
/// Steps are integrated in closed form assuming the input is constant over
/// the step, so any `dt` is stable. `alpha` rescales elapsed time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceEnsemble {
    grid: TauGrid,
    inverter: PostInverter,
    n_features: usize,
    alpha: f64,
    // feature-major: state[f * n_nodes + node]
    state: Vec<f64>,
}

impl LaplaceEnsemble {
    pub fn new(grid: TauGrid, n_features: usize) -> Result<Self> {
        let inverter = PostInverter::new(&grid)?;
        Ok(Self {
            state: vec![0.0; n_features * grid.n_nodes()],
            grid,
            inverter,
            n_features,
            alpha: 1.0,
        })
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")));
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn with_clamp(mut self, clamp_negative: bool) -> Self {
        self.inverter = self.inverter.with_clamp(clamp_negative);
        self
    }

    pub fn grid(&self) -> &TauGrid {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gains(&self) -> &[f64] {
        self.inverter.gains()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_slices(&self) -> usize {
        self.grid.n_slices()
    }

    /// Raw `F(s)` for all features, feature-major.
    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn feature_state(&self, feature: usize) -> &[f64] {
        let n = self.grid.n_nodes();
        &self.state[feature * n..(feature + 1) * n]
    }

    /// Overwrites `F(s)`; used to probe the inversion with analytic states.
    pub fn set_state(&mut self, state: &[f64]) -> Result<()> {
        check_len(self.state.len(), state.len())?;
        check_finite(state)?;
        self.state.copy_from_slice(state);
        Ok(())
    }

    pub fn reset(&mut self) {
        self.state.fill(0.0);
    }

    /// Exact update over `dt` seconds with `input` held constant.
    pub fn step(&mut self, input: &[f64], dt: f64) -> Result<()> {
        check_duration(dt)?;
        check_len(self.n_features, input.len())?;
        check_finite(input)?;
        let elapsed = dt * self.alpha;
        let (decay, drive) = self.coefficients(elapsed);
        let n = self.grid.n_nodes();
        for (row, &x) in self.state.chunks_exact_mut(n).zip(input) {
            if x == 0.0 {
                row.iter_mut().zip(&decay).for_each(|(f, d)| *f *= d);
            } else {
                for ((f, d), g) in row.iter_mut().zip(&decay).zip(&drive) {
                    *f = *f * d + x * g;
                }
            }
        }
        Ok(())
    }

    /// Zero-input step.
    pub fn decay(&mut self, dt: f64) -> Result<()> {
        check_duration(dt)?;
        let (decay, _) = self.coefficients(dt * self.alpha);
        let n = self.grid.n_nodes();
        for row in self.state.chunks_exact_mut(n) {
            row.iter_mut().zip(&decay).for_each(|(f, d)| *f *= d);
        }
        Ok(())
    }

    /// Drives `frame` for `dt_on` seconds, then lets the bank decay for `dt_off`.
    pub fn present_frame(&mut self, frame: &[f64], dt_on: f64, dt_off: f64) -> Result<()> {
        check_duration(dt_off)?;
        self.step(frame, dt_on)?;
        self.decay(dt_off)
    }

    /// Calibrated reconstruction, shape `(n_features x n_slices)`, feature-major.
    pub fn invert_post(&self) -> Vec<f64> {
        let n = self.grid.n_nodes();
        let m = self.n_slices();
        let mut out = vec![0.0; self.n_features * m];
        for (row, dst) in self.state.chunks_exact(n).zip(out.chunks_exact_mut(m)) {
            self.inverter.invert_into(row, dst);
        }
        out
    }

    /// Reconstruction without calibration gains.
    pub fn invert_post_raw(&self) -> Vec<f64> {
        let n = self.grid.n_nodes();
        let m = self.n_slices();
        let mut out = vec![0.0; self.n_features * m];
        for (row, dst) in self.state.chunks_exact(n).zip(out.chunks_exact_mut(m)) {
            self.inverter.invert_raw_into(row, dst);
        }
        out
    }

    fn coefficients(&self, elapsed: f64) -> (Vec<f64>, Vec<f64>) {
        self.grid
            .s_values()
            .iter()
            .map(|&s| {
                let x = -s * elapsed;
                (x.exp(), -x.exp_m1() / s)
            })
            .unzip()
    }
}

fn check_duration(dt: f64) -> Result<()> {
    if dt.is_finite() && dt >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidDuration(dt))
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, actual })
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::LN_2;

    use super::*;

    fn one_feature() -> LaplaceEnsemble {
        LaplaceEnsemble::new(TauGrid::catch_default(), 1).unwrap()
    }

    #[test]
    fn single_node_decay_oracle() {
        let mut e = one_feature();
        let n = e.grid().n_nodes();
        let node = 4; // s = 120
        let mut state = vec![0.0; n];
        state[node] = 1.0;
        e.set_state(&state).unwrap();
        e.decay(1.0 / 30.0).unwrap();
        let expected = (-4.0f64).exp();
        assert!((e.state()[node] - expected).abs() < 1e-15);
        assert!((e.state()[node] - 0.0183156).abs() < 1e-7);
    }

    #[test]
    fn half_life() {
        let mut e = one_feature().with_alpha(1.7).unwrap();
        let n = e.grid().n_nodes();
        e.set_state(&vec![1.0; n]).unwrap();
        let s = e.grid().s_values()[10];
        e.decay(LN_2 / (s * 1.7)).unwrap();
        assert!((e.state()[10] - 0.5).abs() < 1e-12 * 0.5);
    }

    #[test]
    fn fixed_point_is_one_over_s() {
        let mut e = one_feature();
        e.step(&[1.0], 1e4).unwrap();
        for (f, s) in e.state().iter().zip(e.grid().s_values()) {
            assert!((f - 1.0 / s).abs() < 1e-15);
        }
    }

    #[test]
    fn present_frame_closed_form() {
        let mut e = one_feature();
        e.present_frame(&[1.0], FRAME_ON, FRAME_OFF).unwrap();
        for (f, s) in e.state().iter().zip(e.grid().s_values()) {
            let want = (1.0 / s) * (1.0 - (-s / 300.0).exp()) * (-s * (1.0 / 30.0 - 1.0 / 300.0)).exp();
            assert!((f - want).abs() <= 1e-12 * want.abs().max(1e-300));
        }
    }

    #[test]
    fn alpha_rescales_time_exactly() {
        let frames = [[1.0, 0.0], [0.5, 2.0], [0.0, 0.0]];
        let mut a = LaplaceEnsemble::new(TauGrid::catch_default(), 2).unwrap();
        let mut b = LaplaceEnsemble::new(TauGrid::catch_default(), 2).unwrap().with_alpha(2.0).unwrap();
        for f in &frames {
            a.present_frame(f, FRAME_ON, FRAME_OFF).unwrap();
            b.present_frame(f, FRAME_ON / 2.0, FRAME_OFF / 2.0).unwrap();
        }
        assert_eq!(a.state(), b.state());
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut e = one_feature();
        assert!(matches!(e.step(&[f64::NAN], 0.1), Err(Error::NonFinite { index: 0 })));
        assert!(matches!(e.step(&[1.0, 2.0], 0.1), Err(Error::LengthMismatch { .. })));
        assert!(matches!(e.step(&[1.0], -0.1), Err(Error::InvalidDuration(_))));
        assert!(one_feature().with_alpha(0.0).is_err());
    }

    #[test]
    fn zero_state_inverts_to_zero() {
        let e = LaplaceEnsemble::new(TauGrid::catch_default(), 3).unwrap();
        assert!(e.invert_post().iter().all(|v| *v == 0.0));
    }
}
