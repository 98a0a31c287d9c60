use std::io::Write;

use serde::Serialize;

use super::ensemble::LaplaceEnsemble;
use super::grid::TauGrid;
use crate::error::{Error, Result};

/// Slice activations through time for a single-feature ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSeries {
    pub times: Vec<f64>,
    pub tau_stars: Vec<f64>,
    /// `activations[t][slice]`
    pub activations: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
struct ProbeRow<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    series: Option<&'a str>,
    time_s: f64,
    slice_index: usize,
    tau_star_s: f64,
    activation: f64,
}

impl ProbeSeries {
    /// Activation trace of one slice.
    pub fn slice_trace(&self, slice: usize) -> Vec<f64> {
        self.activations.iter().map(|row| row[slice]).collect()
    }

    /// Index into `times` of each slice's maximum.
    pub fn peak_indices(&self) -> Vec<usize> {
        (0..self.tau_stars.len())
            .map(|slice| argmax(&self.slice_trace(slice)))
            .collect()
    }

    /// Writes `time_s, slice_index, tau_star_s, activation` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        self.write_rows(&mut csv, None)?;
        csv.flush()?;
        Ok(())
    }

    pub(crate) fn write_rows<W: Write>(&self, csv: &mut csv::Writer<W>, series: Option<&str>) -> Result<()> {
        for (t, row) in self.times.iter().zip(&self.activations) {
            for (slice, (a, tau)) in row.iter().zip(&self.tau_stars).enumerate() {
                csv.serialize(ProbeRow {
                    series,
                    time_s: *t,
                    slice_index: slice,
                    tau_star_s: *tau,
                    activation: *a,
                })?;
            }
        }
        Ok(())
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

/// Drives a unit input for `impulse_duration` seconds starting at t = 0, then
/// records the decay for `record_duration` more seconds, sampling calibrated
/// slice activations every `dt` (the first sample is the empty state at t = 0).
pub fn impulse_response_probe(
    grid: &TauGrid,
    impulse_duration: f64,
    record_duration: f64,
    dt: f64,
) -> Result<ProbeSeries> {
    probe_ensemble(LaplaceEnsemble::new(grid.clone(), 1)?, impulse_duration, record_duration, dt)
}

/// As [`impulse_response_probe`] but with a caller-configured ensemble.
pub fn probe_ensemble(
    mut ensemble: LaplaceEnsemble,
    impulse_duration: f64,
    record_duration: f64,
    dt: f64,
) -> Result<ProbeSeries> {
    for d in [impulse_duration, record_duration, dt] {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidDuration(d));
        }
    }
    if ensemble.n_features() != 1 {
        return Err(Error::Shape("probe expects a single-feature ensemble".into()));
    }
    ensemble.reset();
    let total = impulse_duration + record_duration;
    let steps = (total / dt).round() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut activations = Vec::with_capacity(steps + 1);
    times.push(0.0);
    activations.push(ensemble.invert_post());
    for j in 0..steps {
        let t = j as f64 * dt;
        let on = (impulse_duration - t).clamp(0.0, dt);
        if on > 0.0 {
            ensemble.step(&[1.0], on)?;
        }
        ensemble.decay(dt - on)?;
        times.push((j + 1) as f64 * dt);
        activations.push(ensemble.invert_post());
    }
    Ok(ProbeSeries {
        times,
        tau_stars: ensemble.grid().slice_tau_stars(),
        activations,
    })
}
