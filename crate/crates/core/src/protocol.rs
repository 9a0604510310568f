//! One aggregation round over the simulated uplink.
//!
//! The digital round carries both devices' quantized parameters in
//! simultaneous OFDM frames and recovers their sum with a joint decoder. The
//! analog round loads raw parameters on subcarriers and relies on the
//! channel's superposition directly.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{
    apply_channel, complex_gaussian, draw_scenario, snr_calibrate, ChannelRealization,
    ChannelScenario, ScenarioKind,
};
use crate::convcodec::{
    conv_encode, fsjd_decode, psud_decode, rsjd_decode, with_tail, CodeSpec, SoftObservation,
};
use crate::error::{Error, Result, StageExt};
use crate::ofdm::{
    build_frame, ofdm_demodulate, ofdm_modulate, soft_observation, ChannelEstimate, OfdmConfig,
    NUM_USERS,
};
use crate::quantizer::{pack_parameters, unpack_sums, QuantizerConfig, SumBits};
use crate::rng::{derive, stream, Stream};

/// Devices aggregated per round. The decoders handle exactly two users.
pub const NUM_SELECTED: usize = NUM_USERS;

/// Sum decoder used by the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DecoderKind {
    Fsjd,
    Rsjd(usize),
    Psud,
}

impl DecoderKind {
    pub fn name(&self) -> String {
        match self {
            Self::Fsjd => "fsjd".into(),
            Self::Rsjd(r) => format!("rsjd{r}"),
            Self::Psud => "psud".into(),
        }
    }
}

impl std::fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

impl std::str::FromStr for DecoderKind {
    type Err = Error;

    /// Accepts `fsjd`, `psud`, `rsjd<R>` and `rsjd:<R>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "fsjd" => Ok(Self::Fsjd),
            "psud" => Ok(Self::Psud),
            _ => {
                let r = s
                    .strip_prefix("rsjd")
                    .map(|r| r.trim_start_matches([':', '-', '=']))
                    .and_then(|r| r.parse::<usize>().ok())
                    .filter(|&r| r >= 1)
                    .ok_or_else(|| Error::Config(format!("unknown decoder '{s}'")))?;
                Ok(Self::Rsjd(r))
            }
        }
    }
}

impl TryFrom<String> for DecoderKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DecoderKind> for String {
    fn from(d: DecoderKind) -> String {
        d.name()
    }
}

/// Physical-layer settings shared by every packet.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub code: CodeSpec,
    pub ofdm: OfdmConfig,
    pub scenario: ScenarioKind,
    pub snr_db: f64,
    /// Information bits per packet, tail excluded.
    pub source_bits: usize,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            code: CodeSpec::IEEE80211,
            ofdm: OfdmConfig::default(),
            scenario: ScenarioKind::NearRealistic,
            snr_db: 20.0,
            source_bits: 1300,
        }
    }
}

/// What the server sees for one packet.
#[derive(Debug, Clone, PartialEq)]
pub struct Observed {
    pub obs: SoftObservation,
    pub scenario: ChannelScenario,
}

/// Send two source words simultaneously and build the decoder's observation.
pub fn observe_packet(
    src_a: &[u8],
    src_b: &[u8],
    link: &LinkConfig,
    seed: u64,
) -> Result<Observed> {
    if src_a.len() != src_b.len() {
        return Err(Error::Length {
            context: "source words",
            expected: src_a.len(),
            actual: src_b.len(),
        });
    }
    let cfg = &link.ofdm;
    let coded_a = conv_encode(&with_tail(src_a, &link.code), &link.code);
    let coded_b = conv_encode(&with_tail(src_b, &link.code), &link.code);
    let fa = build_frame(&coded_a, 0, cfg).stage("framing")?;
    let fb = build_frame(&coded_b, 1, cfg).stage("framing")?;
    let ta = ofdm_modulate(&fa, cfg);
    let tb = ofdm_modulate(&fb, cfg);

    let scenario = draw_scenario(link.scenario, link.snr_db, seed);
    let rx = apply_channel(&ta, &tb, &scenario, cfg).stage("channel")?;
    // Frame timing is ideal, so the FFT window sits right after each nominal
    // CP and every delay up to the CP length stays inside it.
    let slots = fa.preamble_slots + fa.num_symbols();
    let grids = ofdm_demodulate(&rx.samples, 0, slots, cfg).stage("demodulation")?;
    let est = ChannelEstimate::from_grids(&grids, cfg).stage("channel estimation")?;
    let obs = soft_observation(&grids[fa.preamble_slots..], &est, coded_a.len(), rx.noise_var, cfg)
        .stage("demodulation")?;
    Ok(Observed { obs, scenario })
}

/// Decoded sum word with the decoder's path metric(s).
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedSum {
    /// Sum digits including the tail positions.
    pub sum: SumBits,
    pub metrics: Vec<f64>,
}

pub fn decode_sum(obs: &SoftObservation, code: &CodeSpec, decoder: DecoderKind) -> Result<DecodedSum> {
    match decoder {
        DecoderKind::Fsjd => fsjd_decode(obs, code).map(|d| DecodedSum {
            sum: d.sum,
            metrics: vec![d.metric],
        }),
        DecoderKind::Rsjd(r) => rsjd_decode(obs, code, r).map(|d| DecodedSum {
            sum: d.sum,
            metrics: vec![d.metric],
        }),
        DecoderKind::Psud => psud_decode(obs, code).map(|d| DecodedSum {
            sum: d.sum,
            metrics: vec![d.metric_a, d.metric_b],
        }),
    }
    .stage("decoding")
}

/// Outcome of one packet against the true sum.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketOutcome {
    /// Decoded sum digits, tail stripped.
    pub sum: SumBits,
    pub truth: SumBits,
    pub sum_bit_errors: usize,
    pub metrics: Vec<f64>,
}

pub fn run_packet(
    src_a: &[u8],
    src_b: &[u8],
    link: &LinkConfig,
    decoder: DecoderKind,
    seed: u64,
) -> Result<PacketOutcome> {
    let seen = observe_packet(src_a, src_b, link, seed)?;
    let mut dec = decode_sum(&seen.obs, &link.code, decoder)?;
    dec.sum.0.truncate(src_a.len());
    let truth = SumBits::of(&[src_a, src_b]);
    Ok(PacketOutcome {
        sum_bit_errors: dec.sum.mismatches(&truth),
        sum: dec.sum,
        truth,
        metrics: dec.metrics,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundConfig {
    pub num_selected: usize,
    pub decoder: DecoderKind,
    pub quantizer: QuantizerConfig,
    pub link: LinkConfig,
}

impl Default for RoundConfig {
    fn default() -> Self {
        Self {
            num_selected: NUM_SELECTED,
            decoder: DecoderKind::Rsjd(512),
            quantizer: QuantizerConfig::default(),
            link: LinkConfig::default(),
        }
    }
}

impl RoundConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_selected != NUM_SELECTED {
            return Err(Error::Config(format!(
                "{} devices selected, decoders support {NUM_SELECTED}",
                self.num_selected
            )));
        }
        self.quantizer.validate()?;
        self.link.code.validate()?;
        self.link.ofdm.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoundDiagnostics {
    pub sum_bit_errors: usize,
    pub total_sum_bits: usize,
    /// Decoder path metrics per packet.
    pub path_metrics: Vec<Vec<f64>>,
    pub sign_ambiguities: usize,
    /// Parameters clamped into the quantizer range, both devices.
    pub clipped: usize,
    /// Analog only: mean squared error of the chosen repeat's sum.
    pub mse: Option<f64>,
    /// Analog only: the repeat was picked using the true sum.
    pub oracle_selected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundResult {
    /// Decoded sum digits per packet (digital rounds only).
    pub sum_bits: Vec<SumBits>,
    pub aggregated: Vec<f64>,
    pub diagnostics: RoundDiagnostics,
}

/// Element-wise average of summed parameters.
pub fn aggregate_models(sums: &[f64], num_selected: usize) -> Vec<f64> {
    let m = num_selected.max(1) as f64;
    sums.iter().map(|s| s / m).collect()
}

/// Quantize, transmit and jointly decode both devices' parameters, then average.
pub fn run_digital_round(
    params_a: &[f64],
    params_b: &[f64],
    cfg: &RoundConfig,
    seed: u64,
) -> Result<RoundResult> {
    cfg.validate()?;
    if params_a.len() != params_b.len() {
        return Err(Error::Length {
            context: "parameter vectors",
            expected: params_a.len(),
            actual: params_b.len(),
        });
    }
    let q = cfg.quantizer;
    let n = cfg.link.source_bits;
    let (lo, hi) = q.range();
    let clipped = params_a
        .iter()
        .chain(params_b)
        .filter(|&&p| p < lo || p > hi)
        .count();
    let pa = pack_parameters(params_a, n, q).stage("quantization")?;
    let pb = pack_parameters(params_b, n, q).stage("quantization")?;

    let mut diag = RoundDiagnostics {
        clipped,
        ..Default::default()
    };
    let mut decoded = Vec::with_capacity(pa.len());
    let mut sum_bits = Vec::with_capacity(pa.len());
    for (i, (a, b)) in pa.iter().zip(&pb).enumerate() {
        let out = run_packet(&a.bits, &b.bits, &cfg.link, cfg.decoder, derive(seed, i as u64))?;
        diag.sum_bit_errors += out.sum_bit_errors;
        diag.total_sum_bits += out.truth.len();
        diag.path_metrics.push(out.metrics);
        decoded.push((out.sum.clone(), a.slots_used));
        sum_bits.push(out.sum);
    }
    let (sums, ambiguous) = unpack_sums(&decoded, q, cfg.num_selected).stage("reconstruction")?;
    diag.sign_ambiguities = ambiguous;
    Ok(RoundResult {
        sum_bits,
        aggregated: aggregate_models(&sums, cfg.num_selected),
        diagnostics: diag,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalogConfig {
    /// Transmissions of the same parameters; the lowest-error one is kept.
    pub repeats: usize,
    /// Ideal precoding: both users arrive with identical channels.
    pub aligned: bool,
    pub scenario: ScenarioKind,
    pub snr_db: f64,
    pub ofdm: OfdmConfig,
}

impl Default for AnalogConfig {
    fn default() -> Self {
        Self {
            repeats: 13,
            aligned: false,
            scenario: ScenarioKind::NearRealistic,
            snr_db: 20.0,
            ofdm: OfdmConfig::default(),
        }
    }
}

/// Sum estimate from one cell: the composite gain's conjugate over its
/// squared magnitude, times the number of users.
fn analog_sum_estimate(y: Complex64, h_a: Complex64, h_b: Complex64) -> Complex64 {
    let g = h_a + h_b;
    let p = g.norm_sqr();
    if p < 1e-12 {
        return Complex64::new(0.0, 0.0);
    }
    g.conj() * y * (NUM_USERS as f64 / p)
}

/// Uncoded analog aggregation with parameters carried on I and Q, drawing
/// the channel from `cfg.scenario`.
pub fn run_analog_round(
    params_a: &[f64],
    params_b: &[f64],
    cfg: &AnalogConfig,
    seed: u64,
) -> Result<RoundResult> {
    let scen = draw_scenario(cfg.scenario, cfg.snr_db, seed);
    run_analog_round_in(params_a, params_b, cfg, &scen)
}

/// Analog round over a given channel realization.
///
/// Repeat `r` occupies the data symbols after repeat `r-1`, so carrier
/// offsets rotate the users differently in each. The repeat with the lowest
/// error against the true sum is selected, which needs ground truth.
pub fn run_analog_round_in(
    params_a: &[f64],
    params_b: &[f64],
    cfg: &AnalogConfig,
    scen: &ChannelScenario,
) -> Result<RoundResult> {
    if cfg.repeats < 1 {
        return Err(Error::Config("analog repeats must be at least 1".into()));
    }
    if params_a.len() != params_b.len() {
        return Err(Error::Length {
            context: "parameter vectors",
            expected: params_a.len(),
            actual: params_b.len(),
        });
    }
    let ofdm = &cfg.ofdm;
    ofdm.validate()?;
    scen.validate(ofdm)?;
    let load = |p: &[f64]| -> Vec<Complex64> {
        p.chunks(2)
            .map(|c| Complex64::new(c[0], c.get(1).copied().unwrap_or(0.0)))
            .collect()
    };
    let xa = load(params_a);
    let xb = load(params_b);
    let cells = xa.len();
    let per = ofdm.cells_per_symbol();
    let symbols = cells.div_ceil(per).max(1);
    let real = ChannelRealization::new(scen);

    // Channels of every repeat and cell.
    let channels: Vec<Vec<(Complex64, Complex64)>> = (0..cfg.repeats)
        .map(|r| {
            (0..cells)
                .map(|c| {
                    let slot = NUM_USERS + r * symbols + c / per;
                    let k = ofdm.data_subcarriers[c % per];
                    let ha = real.response(0, slot, k, ofdm);
                    let hb = if cfg.aligned { ha } else { real.response(1, slot, k, ofdm) };
                    (ha, hb)
                })
                .collect()
        })
        .collect();
    let clean: Vec<Vec<Complex64>> = channels
        .iter()
        .map(|row| {
            row.iter()
                .zip(&xa)
                .zip(&xb)
                .map(|((&(ha, hb), a), b)| ha * a + hb * b)
                .collect()
        })
        .collect();
    let total = (cells * cfg.repeats).max(1) as f64;
    let power = clean.iter().flatten().map(|x| x.norm_sqr()).sum::<f64>() / total;
    let noise_var = snr_calibrate(if power > 0.0 { power } else { 1.0 }, cfg.snr_db)?;
    let mut rng = stream(scen.seed, Stream::Noise);

    let truth: Vec<f64> = params_a.iter().zip(params_b).map(|(a, b)| a + b).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (row, ys) in channels.iter().zip(&clean) {
        let mut est = Vec::with_capacity(2 * cells);
        for (&(ha, hb), &y) in row.iter().zip(ys) {
            let s = analog_sum_estimate(y + complex_gaussian(&mut rng, noise_var), ha, hb);
            est.push(s.re);
            est.push(s.im);
        }
        est.truncate(truth.len());
        let mse = if truth.is_empty() {
            0.0
        } else {
            est.iter().zip(&truth).map(|(e, t)| (e - t).powi(2)).sum::<f64>() / truth.len() as f64
        };
        if best.as_ref().is_none_or(|(m, _)| mse < *m) {
            best = Some((mse, est));
        }
    }
    let (mse, sums) = best.expect("at least one repeat");
    Ok(RoundResult {
        sum_bits: Vec::new(),
        aggregated: aggregate_models(&sums, NUM_SELECTED),
        diagnostics: RoundDiagnostics {
            mse: Some(mse),
            oracle_selected: true,
            ..Default::default()
        },
    })
}
