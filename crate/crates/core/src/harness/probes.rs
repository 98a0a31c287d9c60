use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::laplace::{impulse_response_probe, ProbeSeries, TauGrid};
use crate::memory::{derive_decay_rates, FifoBuffer, MemoryConfig, WorkingMemory};

/// Stimulus used for the representation comparison: a short pulse, then a long decay.
pub const COMPARE_IMPULSE_S: f64 = 0.0033;
pub const COMPARE_RECORD_S: f64 = 0.9;
/// Stimulus used for the parameter sweeps.
pub const SWEEP_IMPULSE_S: f64 = 0.033;
pub const SWEEP_RECORD_S: f64 = 0.5;
/// Sampling step of every probe.
pub const PROBE_DT: f64 = 1.0 / 300.0;
/// Slices shown in the parameter sweeps.
pub const SWEEP_SLICE_OFFSETS: [usize; 3] = [0, 8, 16];
const FRAME_S: f64 = 1.0 / 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeScenario {
    Impulse,
    SweepTau0,
    SweepK,
    SweepC,
    CompareRepresentations,
}

impl ProbeScenario {
    pub const ALL: [Self; 5] = [
        Self::Impulse,
        Self::SweepTau0,
        Self::SweepK,
        Self::SweepC,
        Self::CompareRepresentations,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Impulse => "impulse",
            Self::SweepTau0 => "sweep-tau0",
            Self::SweepK => "sweep-k",
            Self::SweepC => "sweep-c",
            Self::CompareRepresentations => "compare-representations",
        }
    }

    /// Parameter values swept when none are given.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            Self::SweepTau0 => vec![1.0 / 60.0, 1.0 / 45.0, 1.0 / 30.0, 1.0 / 20.0, 1.0 / 15.0],
            Self::SweepK => vec![2.0, 4.0, 8.0, 12.0],
            Self::SweepC => vec![0.025, 0.05, 0.1, 0.2, 0.4],
            Self::Impulse | Self::CompareRepresentations => Vec::new(),
        }
    }
}

impl FromStr for ProbeScenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown probe scenario {s:?}")))
    }
}

/// One labelled curve family of a probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeCurve {
    pub series: String,
    pub data: ProbeSeries,
}

/// Activation curves for `scenario`. `values` overrides the swept parameter values.
pub fn run_probe(scenario: ProbeScenario, values: Option<&[f64]>) -> Result<Vec<ProbeCurve>> {
    let values = values.map(<[f64]>::to_vec).unwrap_or_else(|| scenario.default_values());
    let (tau0, c, k) = default_sith_parameters();
    let sweep = |label: &str, grid: TauGrid| -> Result<ProbeCurve> {
        Ok(ProbeCurve {
            series: label.to_string(),
            data: impulse_response_probe(&grid, SWEEP_IMPULSE_S, SWEEP_RECORD_S, PROBE_DT)?,
        })
    };
    match scenario {
        ProbeScenario::Impulse => Ok(vec![ProbeCurve {
            series: "sith".into(),
            data: impulse_response_probe(&TauGrid::catch_default(), COMPARE_IMPULSE_S, COMPARE_RECORD_S, PROBE_DT)?,
        }]),
        ProbeScenario::SweepTau0 => values
            .iter()
            .map(|&t| sweep(&format!("tau0={t:.6}"), TauGrid::padded(t, c, k, &SWEEP_SLICE_OFFSETS)?))
            .collect(),
        ProbeScenario::SweepK => values
            .iter()
            .map(|&kv| {
                if kv < 1.0 || kv.fract() != 0.0 {
                    return Err(Error::InvalidConfig(format!("k must be a positive integer, got {kv}")));
                }
                sweep(&format!("k={kv}"), TauGrid::padded(tau0, c, kv as usize, &SWEEP_SLICE_OFFSETS)?)
            })
            .collect(),
        ProbeScenario::SweepC => values
            .iter()
            .map(|&cv| sweep(&format!("c={cv}"), TauGrid::padded(tau0, cv, k, &SWEEP_SLICE_OFFSETS)?))
            .collect(),
        ProbeScenario::CompareRepresentations => compare_representations(),
    }
}

fn default_sith_parameters() -> (f64, f64, usize) {
    match MemoryConfig::sith_default() {
        MemoryConfig::Sith { first_center, c, k, .. } => (first_center, c, k),
        _ => unreachable!("sith_default builds a SITH config"),
    }
}

/// SITH, a five-frame buffer and five exponential traces after the same pulse.
/// Buffer slot `i` holds the frame seen `i` frames ago, so the pulse occupies it
/// for `[i, i+1)` frame periods. Exponential traces are normalized to 1 at the
/// end of the pulse, so each reads 0.5 at its matching SITH centre.
fn compare_representations() -> Result<Vec<ProbeCurve>> {
    let grid = TauGrid::catch_default();
    let sith = impulse_response_probe(&grid, COMPARE_IMPULSE_S, COMPARE_RECORD_S, PROBE_DT)?;
    let times = sith.times.clone();
    let n_frames = 5;

    let mut buffer = FifoBuffer::new(n_frames, 1)?;
    let mut seen_frames = 0usize;
    let mut buffer_rows = Vec::with_capacity(times.len());
    for &t in &times {
        let frame = ((t + 1e-9) / FRAME_S).floor() as usize;
        while seen_frames <= frame {
            buffer.observe(&[if seen_frames == 0 { 1.0 } else { 0.0 }])?;
            seen_frames += 1;
        }
        // render is oldest first; report most recent first
        let mut row = buffer.render();
        row.reverse();
        buffer_rows.push(row);
    }
    let buffer_series = ProbeSeries {
        times: times.clone(),
        tau_stars: (0..n_frames).map(|i| (i as f64 + 0.5) * FRAME_S).collect(),
        activations: buffer_rows,
    };

    let taus = grid.slice_tau_stars();
    let rates = derive_decay_rates(&taus)?;
    let exp_rows = times
        .iter()
        .map(|&t| {
            rates
                .iter()
                .map(|&r| {
                    if t < COMPARE_IMPULSE_S {
                        (-r * t).exp_m1() / (-r * COMPARE_IMPULSE_S).exp_m1()
                    } else {
                        (-r * (t - COMPARE_IMPULSE_S)).exp()
                    }
                })
                .collect()
        })
        .collect();
    let exp_series = ProbeSeries {
        times,
        tau_stars: taus,
        activations: exp_rows,
    };
    Ok(vec![
        ProbeCurve {
            series: "sith".into(),
            data: sith,
        },
        ProbeCurve {
            series: "buffer".into(),
            data: buffer_series,
        },
        ProbeCurve {
            series: "expdecay".into(),
            data: exp_series,
        },
    ])
}

/// Writes `series, time_s, slice_index, tau_star_s, activation` rows.
pub fn write_probe_csv<W: Write>(curves: &[ProbeCurve], writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    for curve in curves {
        curve.data.write_rows(&mut csv, Some(&curve.series))?;
    }
    csv.flush()?;
    Ok(())
}
