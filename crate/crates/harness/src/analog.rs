//! Aggregation error of analog and digital rounds on random parameters.

use aircomp::channel::ScenarioKind;
use aircomp::protocol::{
    run_analog_round, run_digital_round, AnalogConfig, DecoderKind, LinkConfig, RoundConfig,
    NUM_SELECTED,
};
use aircomp::rng::{stream, trial_seed, Stream};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::mean_se;
use crate::table::{float, CsvRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Misaligned,
    Aligned,
    Digital,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Misaligned => "analog-misaligned",
            Mode::Aligned => "analog-aligned",
            Mode::Digital => "digital",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalogSpec {
    pub experiment: String,
    pub snr_db: Vec<f64>,
    pub rounds: usize,
    pub repeats: usize,
    pub num_params: usize,
    /// Parameters are uniform on ±scale.
    pub scale: f64,
    pub scenario: ScenarioKind,
    pub modes: Vec<Mode>,
    pub decoder: DecoderKind,
    pub master_seed: u64,
}

impl Default for AnalogSpec {
    fn default() -> Self {
        Self {
            experiment: "analog-compare".into(),
            snr_db: vec![0.0, 5.0, 9.0, 15.0, 20.0, 30.0, 40.0],
            rounds: 1000,
            repeats: 13,
            num_params: 170,
            scale: 0.5,
            scenario: ScenarioKind::NearRealistic,
            modes: vec![Mode::Misaligned, Mode::Aligned],
            decoder: DecoderKind::Rsjd(512),
            master_seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalogRow {
    pub experiment: String,
    pub mode: Mode,
    pub scenario: ScenarioKind,
    pub snr_db: f64,
    pub rounds: usize,
    /// Mean squared error of the recovered sum.
    pub mean_mse: f64,
    pub se_mse: f64,
    pub seed: u64,
}

impl CsvRow for AnalogRow {
    const HEADER: &'static [&'static str] = &[
        "experiment",
        "mode",
        "scenario",
        "snr_db",
        "rounds",
        "mean_mse",
        "se_mse",
        "seed",
    ];

    fn fields(&self) -> Vec<String> {
        vec![
            self.experiment.clone(),
            self.mode.name().into(),
            self.scenario.to_string(),
            float(self.snr_db),
            self.rounds.to_string(),
            float(self.mean_mse),
            float(self.se_mse),
            self.seed.to_string(),
        ]
    }
}

/// Round seeds do not depend on the SNR, so every SNR point sees the same
/// parameters, channels and unit noise draws.
fn round_mse(spec: &AnalogSpec, mode: Mode, snr_db: f64, round: usize) -> Result<f64> {
    let key = format!("{}/{}", spec.experiment, spec.scenario);
    let seed = trial_seed(spec.master_seed, &key, round as u64);
    let mut rng = stream(seed, Stream::Data);
    let mut draw = || -> Vec<f64> {
        (0..spec.num_params)
            .map(|_| rng.random_range(-spec.scale..=spec.scale))
            .collect()
    };
    let (a, b) = (draw(), draw());
    match mode {
        Mode::Misaligned | Mode::Aligned => {
            let cfg = AnalogConfig {
                repeats: spec.repeats,
                aligned: mode == Mode::Aligned,
                scenario: spec.scenario,
                snr_db,
                ..Default::default()
            };
            let r = run_analog_round(&a, &b, &cfg, seed)?;
            Ok(r.diagnostics.mse.unwrap_or(f64::NAN))
        }
        Mode::Digital => {
            let cfg = RoundConfig {
                decoder: spec.decoder,
                link: LinkConfig {
                    scenario: spec.scenario,
                    snr_db,
                    ..Default::default()
                },
                ..Default::default()
            };
            let r = run_digital_round(&a, &b, &cfg, seed)?;
            let m = NUM_SELECTED as f64;
            let se: f64 = r
                .aggregated
                .iter()
                .zip(a.iter().zip(&b))
                .map(|(g, (x, y))| (g * m - x - y).powi(2))
                .sum();
            Ok(se / a.len().max(1) as f64)
        }
    }
}

/// Per-round sum MSE for one (mode, SNR) cell.
pub fn round_errors(spec: &AnalogSpec, mode: Mode, snr_db: f64) -> Result<Vec<f64>> {
    (0..spec.rounds)
        .into_par_iter()
        .map(|r| round_mse(spec, mode, snr_db, r))
        .collect()
}

/// One row per (SNR, mode). Each round uses the same parameters and channel
/// draw in every mode and at every SNR.
pub fn analog_compare(spec: &AnalogSpec) -> Result<Vec<AnalogRow>> {
    if spec.rounds == 0 || spec.snr_db.is_empty() || spec.modes.is_empty() {
        return Err(Error::Config("analog comparison needs rounds, SNRs and modes".into()));
    }
    let mut rows = Vec::new();
    for &snr in &spec.snr_db {
        for &mode in &spec.modes {
            let errs = round_errors(spec, mode, snr)?;
            let (mean_mse, se_mse) = mean_se(&errs);
            rows.push(AnalogRow {
                experiment: spec.experiment.clone(),
                mode,
                scenario: spec.scenario,
                snr_db: snr,
                rounds: spec.rounds,
                mean_mse,
                se_mse,
                seed: spec.master_seed,
            });
        }
    }
    Ok(rows)
}
