//! Federated learning runs over several uplink arms.

use aircomp::feel::{run_feel, FeelConfig, Uplink};
use aircomp::protocol::DecoderKind;
use aircomp::quantizer::QuantizerConfig;
use aircomp::rng::trial_seed;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stats::mean_se;
use crate::table::{float, CsvRow};

/// One uplink configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm {
    pub uplink: Uplink,
    pub decoder: DecoderKind,
    /// Ignored by the ideal arm, which is recorded with an infinite SNR.
    pub snr_db: f64,
    pub bits: usize,
}

impl Arm {
    pub fn label(&self) -> String {
        match self.uplink {
            Uplink::Ideal => "ideal".into(),
            Uplink::Digital => format!("digital-{}-k{}@{}dB", self.decoder, self.bits, self.snr_db),
            u => format!("{}@{}dB", u.name(), self.snr_db),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeelSpec {
    pub experiment: String,
    pub base: FeelConfig,
    pub arms: Vec<Arm>,
    pub seeds: usize,
    pub master_seed: u64,
}

impl Default for FeelSpec {
    fn default() -> Self {
        let uplinks = [Uplink::Ideal, Uplink::Digital, Uplink::AnalogMisaligned, Uplink::AnalogAligned];
        Self {
            experiment: "feel".into(),
            base: FeelConfig::default(),
            arms: arms(&uplinks, &[DecoderKind::Rsjd(512)], &[9.0, 20.0], &[13]),
            seeds: 10,
            master_seed: 1,
        }
    }
}

/// Cartesian product of the settings. Settings an uplink ignores do not
/// multiply its arms; the ideal arm appears once.
pub fn arms(uplinks: &[Uplink], decoders: &[DecoderKind], snr_db: &[f64], bits: &[usize]) -> Vec<Arm> {
    let mut out = Vec::new();
    let d0 = decoders.first().copied().unwrap_or(DecoderKind::Rsjd(512));
    let k0 = bits.first().copied().unwrap_or(13);
    for &uplink in uplinks {
        match uplink {
            Uplink::Ideal => out.push(Arm {
                uplink,
                decoder: d0,
                snr_db: f64::INFINITY,
                bits: k0,
            }),
            Uplink::Digital => {
                for &decoder in decoders {
                    for &k in bits {
                        for &snr in snr_db {
                            out.push(Arm {
                                uplink,
                                decoder,
                                snr_db: snr,
                                bits: k,
                            });
                        }
                    }
                }
            }
            _ => {
                for &snr in snr_db {
                    out.push(Arm {
                        uplink,
                        decoder: d0,
                        snr_db: snr,
                        bits: k0,
                    });
                }
            }
        }
    }
    out
}

impl FeelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.seeds == 0 {
            return Err(Error::Config("seeds must be at least 1".into()));
        }
        if self.arms.is_empty() {
            return Err(Error::Config("no arms".into()));
        }
        for a in &self.arms {
            self.config(a)?.validate()?;
        }
        Ok(())
    }

    /// Run seeds are shared by every arm, so arms are paired comparisons.
    pub fn run_seed(&self, index: usize) -> u64 {
        trial_seed(self.master_seed, &self.experiment, index as u64)
    }

    pub fn config(&self, arm: &Arm) -> Result<FeelConfig> {
        Ok(FeelConfig {
            uplink: arm.uplink,
            decoder: arm.decoder,
            snr_db: if arm.snr_db.is_finite() { arm.snr_db } else { self.base.snr_db },
            quantizer: QuantizerConfig::new(arm.bits, self.base.quantizer.mode)?,
            ..self.base.clone()
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeelRow {
    pub experiment: String,
    pub arm: Arm,
    pub run: usize,
    pub seed: u64,
    pub iteration: usize,
    pub accuracy: f64,
    /// Run totals, repeated on every iteration of the run.
    pub clipped: usize,
    pub sum_bit_errors: usize,
    pub total_sum_bits: usize,
}

impl CsvRow for FeelRow {
    const HEADER: &'static [&'static str] = &[
        "experiment",
        "uplink",
        "decoder",
        "snr_db",
        "bits",
        "run",
        "seed",
        "iteration",
        "accuracy",
        "clipped",
        "sum_bit_errors",
        "total_sum_bits",
    ];

    fn fields(&self) -> Vec<String> {
        vec![
            self.experiment.clone(),
            self.arm.uplink.name().into(),
            self.arm.decoder.to_string(),
            float(self.arm.snr_db),
            self.arm.bits.to_string(),
            self.run.to_string(),
            self.seed.to_string(),
            self.iteration.to_string(),
            float(self.accuracy),
            self.clipped.to_string(),
            self.sum_bit_errors.to_string(),
            self.total_sum_bits.to_string(),
        ]
    }
}

/// Per-iteration rows, arm-major then run then iteration.
pub fn sweep_feel(spec: &FeelSpec) -> Result<Vec<FeelRow>> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.arms.len())
        .flat_map(|a| (0..spec.seeds).map(move |r| (a, r)))
        .collect();
    let runs: Vec<Vec<FeelRow>> = jobs
        .par_iter()
        .map(|&(a, r)| {
            let arm = spec.arms[a];
            let seed = spec.run_seed(r);
            let trace = run_feel(&spec.config(&arm)?, seed)?;
            Ok(trace
                .accuracy
                .iter()
                .enumerate()
                .map(|(i, &accuracy)| FeelRow {
                    experiment: spec.experiment.clone(),
                    arm,
                    run: r,
                    seed,
                    iteration: i + 1,
                    accuracy,
                    clipped: trace.clipped,
                    sum_bit_errors: trace.sum_bit_errors,
                    total_sum_bits: trace.total_sum_bits,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(runs.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmSummary {
    pub arm: Arm,
    pub runs: usize,
    pub mean_final: f64,
    pub se_final: f64,
    pub clipped: usize,
}

/// Final-iteration accuracy per arm, in first-seen order.
pub fn summarize(rows: &[FeelRow]) -> Vec<ArmSummary> {
    let last = rows.iter().map(|r| r.iteration).max().unwrap_or(0);
    let mut arms: Vec<Arm> = Vec::new();
    for r in rows {
        if !arms.contains(&r.arm) {
            arms.push(r.arm);
        }
    }
    arms.into_iter()
        .map(|arm| {
            let finals: Vec<&FeelRow> = rows.iter().filter(|r| r.arm == arm && r.iteration == last).collect();
            let acc: Vec<f64> = finals.iter().map(|r| r.accuracy).collect();
            let (mean_final, se_final) = mean_se(&acc);
            ArmSummary {
                arm,
                runs: acc.len(),
                mean_final,
                se_final,
                clipped: finals.iter().map(|r| r.clipped).sum(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arm_product() {
        let a = arms(
            &[Uplink::Ideal, Uplink::Digital, Uplink::AnalogAligned],
            &[DecoderKind::Fsjd, DecoderKind::Psud],
            &[9.0, 20.0],
            &[8, 13],
        );
        assert_eq!(a.len(), 1 + 2 * 2 * 2 + 2);
        assert_eq!(a[0].label(), "ideal");
        assert_eq!(a[1].label(), "digital-fsjd-k8@9dB");
    }

    #[test]
    fn short_sweep_summary() {
        let spec = FeelSpec {
            base: FeelConfig {
                iterations: 4,
                ..Default::default()
            },
            arms: arms(&[Uplink::Ideal, Uplink::AnalogMisaligned], &[], &[9.0], &[13]),
            seeds: 3,
            ..Default::default()
        };
        let rows = sweep_feel(&spec).unwrap();
        assert_eq!(rows.len(), 2 * 3 * 4);
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert!(s.iter().all(|a| a.runs == 3));
    }
}
