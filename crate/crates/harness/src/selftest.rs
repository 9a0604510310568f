//! Exhaustive checks of the joint decoders on short words of the 7/5 code.

use aircomp::channel::{complex_gaussian, draw_scenario, ChannelRealization, ScenarioKind};
use aircomp::convcodec::oracle::{exhaustive_min_metric, oracle_codeword_optimal};
use aircomp::convcodec::{conv_encode, fsjd_decode, psud_decode, with_tail, CodeSpec, SoftObservation};
use aircomp::ofdm::{OfdmConfig, NUM_USERS};
use aircomp::quantizer::SumBits;
use aircomp::rng::{stream, trial_seed, Stream};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::table::{float, CsvRow};

/// A short packet observed directly at the decoder input.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyInstance {
    pub obs: SoftObservation,
    pub src_a: Vec<u8>,
    pub src_b: Vec<u8>,
}

impl TinyInstance {
    pub fn truth(&self) -> SumBits {
        SumBits::of(&[&self.src_a, &self.src_b])
    }
}

/// Random source words through the scenario's per-cell channel with exactly
/// known gains and white noise of variance 2/SNR.
pub fn tiny_instance(
    kind: ScenarioKind,
    info_bits: usize,
    snr_db: f64,
    seed: u64,
    code: &CodeSpec,
) -> TinyInstance {
    let mut rng = stream(seed, Stream::Data);
    let mut word = || -> Vec<u8> { (0..info_bits).map(|_| rng.random_range(0..2u8)).collect() };
    let (src_a, src_b) = (word(), word());
    let ca = conv_encode(&with_tail(&src_a, code), code);
    let cb = conv_encode(&with_tail(&src_b, code), code);
    let scen = draw_scenario(kind, snr_db, seed);
    let real = ChannelRealization::new(&scen);
    let ofdm = OfdmConfig::default();
    let per = ofdm.cells_per_symbol();
    let noise_var = 2.0 / 10f64.powf(snr_db / 10.0);
    let mut noise = stream(seed, Stream::Noise);
    let (mut y, mut h_a, mut h_b) = (Vec::new(), Vec::new(), Vec::new());
    for n in 0..ca.len() {
        let slot = NUM_USERS + n / per;
        let k = ofdm.data_subcarriers[n % per];
        let (ha, hb) = (real.response(0, slot, k, &ofdm), real.response(1, slot, k, &ofdm));
        let x = |c: u8| 1.0 - 2.0 * f64::from(c);
        y.push(ha * x(ca[n]) + hb * x(cb[n]) + complex_gaussian(&mut noise, noise_var));
        h_a.push(ha);
        h_b.push(hb);
    }
    TinyInstance {
        obs: SoftObservation {
            y,
            h_a,
            h_b,
            noise_var,
        },
        src_a,
        src_b,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestSpec {
    pub instances: usize,
    /// Source lengths are drawn from 1..=max_bits.
    pub max_bits: usize,
    /// SNRs are drawn uniformly from this range.
    pub snr_range: (f64, f64),
    /// Trials of the SUM BER ordering check, at fixed length and SNR.
    pub ordering_trials: usize,
    pub ordering_bits: usize,
    pub ordering_snr_db: f64,
    pub scenarios: Vec<ScenarioKind>,
    pub master_seed: u64,
}

impl Default for SelftestSpec {
    fn default() -> Self {
        Self {
            instances: 500,
            max_bits: 8,
            snr_range: (0.0, 12.0),
            ordering_trials: 2000,
            ordering_bits: 8,
            ordering_snr_db: 6.0,
            scenarios: ScenarioKind::ALL.to_vec(),
            master_seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestRow {
    pub scenario: ScenarioKind,
    pub instances: usize,
    /// Instances where the trellis metric equals the exhaustive minimum exactly.
    pub metric_matches: usize,
    pub max_abs_diff: f64,
    pub ordering_trials: usize,
    pub total_sum_bits: u64,
    pub oracle_errors: u64,
    pub fsjd_errors: u64,
    pub psud_errors: u64,
    pub seed: u64,
}

impl CsvRow for SelftestRow {
    const HEADER: &'static [&'static str] = &[
        "scenario",
        "instances",
        "metric_matches",
        "max_abs_diff",
        "ordering_trials",
        "total_sum_bits",
        "oracle_errors",
        "fsjd_errors",
        "psud_errors",
        "seed",
    ];

    fn fields(&self) -> Vec<String> {
        vec![
            self.scenario.to_string(),
            self.instances.to_string(),
            self.metric_matches.to_string(),
            float(self.max_abs_diff),
            self.ordering_trials.to_string(),
            self.total_sum_bits.to_string(),
            self.oracle_errors.to_string(),
            self.fsjd_errors.to_string(),
            self.psud_errors.to_string(),
            self.seed.to_string(),
        ]
    }
}

/// (matches, max |difference|) of FSJD's metric against exhaustive search.
pub fn metric_equivalence(spec: &SelftestSpec, kind: ScenarioKind) -> Result<(usize, f64)> {
    let code = CodeSpec::K3;
    let key = format!("selftest/metric/{kind}");
    let diffs: Vec<f64> = (0..spec.instances)
        .into_par_iter()
        .map(|i| {
            let seed = trial_seed(spec.master_seed, &key, i as u64);
            let mut rng = stream(seed, Stream::Selection);
            let bits = rng.random_range(1..=spec.max_bits);
            let snr = rng.random_range(spec.snr_range.0..=spec.snr_range.1);
            let inst = tiny_instance(kind, bits, snr, seed, &code);
            let (best, _, _) = exhaustive_min_metric(&inst.obs, &code)?;
            Ok((fsjd_decode(&inst.obs, &code)?.metric - best).abs())
        })
        .collect::<Result<_>>()?;
    Ok((
        diffs.iter().filter(|&&d| d == 0.0).count(),
        diffs.iter().fold(0.0, |m, &d| m.max(d)),
    ))
}

/// Sum digit errors of (oracle, FSJD, PSUD) over the ordering trials.
pub fn decoder_ordering(spec: &SelftestSpec, kind: ScenarioKind) -> Result<[u64; 3]> {
    let code = CodeSpec::K3;
    let key = format!("selftest/ordering/{kind}");
    let per: Vec<[u64; 3]> = (0..spec.ordering_trials)
        .into_par_iter()
        .map(|i| {
            let seed = trial_seed(spec.master_seed, &key, i as u64);
            let inst = tiny_instance(kind, spec.ordering_bits, spec.ordering_snr_db, seed, &code);
            let truth = inst.truth();
            let n = truth.len();
            let errs = |mut s: SumBits| {
                s.0.truncate(n);
                s.mismatches(&truth) as u64
            };
            Ok([
                errs(oracle_codeword_optimal(&inst.obs, &code)?),
                errs(fsjd_decode(&inst.obs, &code)?.sum),
                errs(psud_decode(&inst.obs, &code)?.sum),
            ])
        })
        .collect::<Result<_>>()?;
    Ok(per.iter().fold([0; 3], |acc, e| [acc[0] + e[0], acc[1] + e[1], acc[2] + e[2]]))
}

pub fn selftest(spec: &SelftestSpec) -> Result<Vec<SelftestRow>> {
    if spec.instances == 0 || spec.max_bits == 0 || spec.scenarios.is_empty() {
        return Err(Error::Config("selftest needs instances, bits and scenarios".into()));
    }
    spec.scenarios
        .iter()
        .map(|&kind| {
            let (metric_matches, max_abs_diff) = metric_equivalence(spec, kind)?;
            let [oracle_errors, fsjd_errors, psud_errors] = decoder_ordering(spec, kind)?;
            Ok(SelftestRow {
                scenario: kind,
                instances: spec.instances,
                metric_matches,
                max_abs_diff,
                ordering_trials: spec.ordering_trials,
                total_sum_bits: (spec.ordering_trials * spec.ordering_bits) as u64,
                oracle_errors,
                fsjd_errors,
                psud_errors,
                seed: spec.master_seed,
            })
        })
        .collect()
}
