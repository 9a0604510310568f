//! SUM BER versus SNR.

use std::time::Instant;

use aircomp::channel::ScenarioKind;
use aircomp::convcodec::CodeSpec;
use aircomp::protocol::{decode_sum, observe_packet, DecoderKind, LinkConfig};
use aircomp::quantizer::SumBits;
use aircomp::rng::{stream, trial_seed, Stream};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stats::{wilson, Z95};
use crate::table::{float, opt_float, CsvRow};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub experiment: String,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub decoders: Vec<DecoderKind>,
    pub scenario: ScenarioKind,
    pub source_bits: usize,
    pub code: CodeSpec,
    pub master_seed: u64,
    /// Fill the wall_time column. Off by default so reruns are byte-identical.
    pub timing: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            experiment: "ber-sweep".into(),
            snr_db: (0..=20).step_by(2).map(f64::from).collect(),
            trials: 4000,
            decoders: vec![
                DecoderKind::Fsjd,
                DecoderKind::Rsjd(128),
                DecoderKind::Rsjd(256),
                DecoderKind::Rsjd(512),
                DecoderKind::Psud,
            ],
            scenario: ScenarioKind::NearRealistic,
            source_bits: 1300,
            code: CodeSpec::IEEE80211,
            master_seed: 1,
            timing: false,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.snr_db.is_empty() {
            return Err(Error::Config("empty SNR grid".into()));
        }
        if self.decoders.is_empty() {
            return Err(Error::Config("no decoders".into()));
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("SNR values must be finite".into()));
        }
        self.code.validate()?;
        Ok(())
    }

    /// Seed of one trial. Decoders share it, so they see the same packets.
    pub fn trial_seed(&self, snr_db: f64, trial: usize) -> u64 {
        let key = format!("{}/{}/{}", self.experiment, self.scenario, snr_db);
        trial_seed(self.master_seed, &key, trial as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub decoder: DecoderKind,
    pub scenario: ScenarioKind,
    pub snr_db: f64,
    pub trials: usize,
    pub sum_bit_errors: u64,
    pub total_sum_bits: u64,
    pub sum_ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Decoding seconds summed over trials.
    pub wall_time: Option<f64>,
    pub seed: u64,
}

impl CsvRow for ResultRow {
    const HEADER: &'static [&'static str] = &[
        "experiment",
        "decoder",
        "scenario",
        "snr_db",
        "trials",
        "sum_bit_errors",
        "total_sum_bits",
        "sum_ber",
        "ci_low",
        "ci_high",
        "wall_time",
        "seed",
    ];

    fn fields(&self) -> Vec<String> {
        vec![
            self.experiment.clone(),
            self.decoder.to_string(),
            self.scenario.to_string(),
            float(self.snr_db),
            self.trials.to_string(),
            self.sum_bit_errors.to_string(),
            self.total_sum_bits.to_string(),
            float(self.sum_ber),
            float(self.ci_low),
            float(self.ci_high),
            opt_float(self.wall_time),
            self.seed.to_string(),
        ]
    }
}

/// Fresh uniform source words for both users.
pub fn source_words(seed: u64, n: usize) -> (Vec<u8>, Vec<u8>) {
    let mut rng = stream(seed, Stream::Data);
    let a = (0..n).map(|_| rng.random_range(0..2u8)).collect();
    let b = (0..n).map(|_| rng.random_range(0..2u8)).collect();
    (a, b)
}

/// Per-decoder (errors, seconds) for one trial.
pub fn run_trial(spec: &SweepSpec, snr_db: f64, trial: usize) -> Result<Vec<(u64, f64)>> {
    let seed = spec.trial_seed(snr_db, trial);
    let (a, b) = source_words(seed, spec.source_bits);
    let link = LinkConfig {
        code: spec.code,
        scenario: spec.scenario,
        snr_db,
        source_bits: spec.source_bits,
        ..Default::default()
    };
    let seen = observe_packet(&a, &b, &link, seed)?;
    let truth = SumBits::of(&[&a, &b]);
    spec.decoders
        .iter()
        .map(|&d| {
            let t = Instant::now();
            let mut dec = decode_sum(&seen.obs, &spec.code, d)?;
            let secs = t.elapsed().as_secs_f64();
            dec.sum.0.truncate(spec.source_bits);
            Ok((dec.sum.mismatches(&truth) as u64, secs))
        })
        .collect()
}

/// One row per (SNR, decoder), SNR-major in grid order.
pub fn sweep_sum_ber(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let cells: Vec<(usize, usize)> = (0..spec.snr_db.len())
        .flat_map(|i| (0..spec.trials).map(move |t| (i, t)))
        .collect();
    let per_trial: Vec<Vec<(u64, f64)>> = cells
        .par_iter()
        .map(|&(i, t)| run_trial(spec, spec.snr_db[i], t))
        .collect::<Result<_>>()?;

    let bits = (spec.trials * spec.source_bits) as u64;
    let mut rows = Vec::new();
    for (i, &snr) in spec.snr_db.iter().enumerate() {
        let trials = &per_trial[i * spec.trials..(i + 1) * spec.trials];
        for (j, &decoder) in spec.decoders.iter().enumerate() {
            let errors: u64 = trials.iter().map(|r| r[j].0).sum();
            let secs: f64 = trials.iter().map(|r| r[j].1).sum();
            let (ci_low, ci_high) = wilson(errors, bits, Z95);
            rows.push(ResultRow {
                experiment: spec.experiment.clone(),
                decoder,
                scenario: spec.scenario,
                snr_db: snr,
                trials: spec.trials,
                sum_bit_errors: errors,
                total_sum_bits: bits,
                sum_ber: errors as f64 / bits as f64,
                ci_low,
                ci_high,
                wall_time: spec.timing.then_some(secs),
                seed: spec.master_seed,
            });
        }
    }
    Ok(rows)
}

/// SNR at which a curve reaches `target`, by linear interpolation of
/// log10(BER) between grid points. Points must be sorted by SNR.
pub fn snr_at_ber(points: &[(f64, f64)], target: f64) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let ((s0, b0), (s1, b1)) = (w[0], w[1]);
        if b0 >= target && b1 <= target && b0 > 0.0 {
            if b1 <= 0.0 || b0 == b1 {
                return Some(s1);
            }
            let (l0, l1, lt) = (b0.log10(), b1.log10(), target.log10());
            Some(s0 + (s1 - s0) * (l0 - lt) / (l0 - l1))
        } else {
            None
        }
    })
}

/// Rows where the BER rises significantly with SNR under a one-sided test.
pub fn monotonicity_violations(rows: &[ResultRow]) -> Vec<(DecoderKind, f64, f64)> {
    let mut out = Vec::new();
    let mut decoders: Vec<DecoderKind> = rows.iter().map(|r| r.decoder).collect();
    decoders.sort_by_key(|d| d.name());
    decoders.dedup();
    for d in decoders {
        let mut curve: Vec<&ResultRow> = rows.iter().filter(|r| r.decoder == d).collect();
        curve.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
        for w in curve.windows(2) {
            if !crate::stats::not_worse(
                w[1].sum_bit_errors,
                w[1].total_sum_bits,
                w[0].sum_bit_errors,
                w[0].total_sum_bits,
            ) {
                out.push((d, w[0].snr_db, w[1].snr_db));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation() {
        let pts = [(6.0, 1e-1), (8.0, 1e-3), (10.0, 1e-5)];
        assert!((snr_at_ber(&pts, 1e-2).unwrap() - 7.0).abs() < 1e-12);
        assert!((snr_at_ber(&pts, 1e-4).unwrap() - 9.0).abs() < 1e-12);
        assert_eq!(snr_at_ber(&pts, 1.0), None);
        assert_eq!(snr_at_ber(&[(0.0, 0.5), (2.0, 0.0)], 1e-3), Some(2.0));
    }

    #[test]
    fn trial_seeds_depend_on_grid_point_only() {
        let spec = SweepSpec::default();
        assert_eq!(spec.trial_seed(4.0, 3), spec.trial_seed(4.0, 3));
        assert_ne!(spec.trial_seed(4.0, 3), spec.trial_seed(4.0, 4));
        assert_ne!(spec.trial_seed(4.0, 3), spec.trial_seed(6.0, 3));
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = SweepSpec::default();
        s.trials = 0;
        assert!(sweep_sum_ber(&s).is_err());
        let mut s = SweepSpec::default();
        s.snr_db.clear();
        assert!(sweep_sum_ber(&s).is_err());
    }

    #[test]
    fn high_snr_good_channel_is_error_free() {
        let spec = SweepSpec {
            snr_db: vec![40.0],
            trials: 100,
            decoders: vec![DecoderKind::Fsjd],
            scenario: ScenarioKind::Good,
            ..Default::default()
        };
        let rows = sweep_sum_ber(&spec).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].sum_bit_errors, 0);
        assert_eq!(rows[0].total_sum_bits, 100 * 1300);
        assert_eq!(rows[0].sum_ber, 0.0);
        assert_eq!(rows[0].wall_time, None);
    }
}
