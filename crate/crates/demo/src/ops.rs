//! The demo's operations as plain Rust, so they can be tested natively.

use aircomp::channel::ScenarioKind;
use aircomp::protocol::{
    observe_packet, run_analog_round, run_digital_round, run_packet, AnalogConfig, DecoderKind,
    LinkConfig, RoundConfig, NUM_SELECTED,
};
use aircomp::rng::{derive, stream, Stream};
use rand::Rng;

fn bits(seed: u64, n: usize) -> (Vec<u8>, Vec<u8>) {
    let mut rng = stream(seed, Stream::Data);
    let mut word = || (0..n).map(|_| rng.random_range(0..2u8)).collect::<Vec<_>>();
    (word(), word())
}

/// Received data cells of one short packet, I and Q interleaved.
pub fn constellation(scenario: &str, snr_db: f64, seed: u64) -> Result<Vec<f64>, String> {
    let kind: ScenarioKind = scenario.parse().map_err(|e| format!("{e}"))?;
    let link = LinkConfig {
        scenario: kind,
        snr_db,
        source_bits: 186,
        ..Default::default()
    };
    let (a, b) = bits(seed, link.source_bits);
    let seen = observe_packet(&a, &b, &link, seed).map_err(|e| e.to_string())?;
    Ok(seen.obs.y.iter().flat_map(|c| [c.re, c.im]).collect())
}

/// `[errors, sum bits, SUM BER]` over `trials` full-length packets.
pub fn sum_ber(scenario: &str, snr_db: f64, decoder: &str, trials: u32, seed: u64) -> Result<Vec<f64>, String> {
    let kind: ScenarioKind = scenario.parse().map_err(|e| format!("{e}"))?;
    let decoder: DecoderKind = decoder.parse().map_err(|e| format!("{e}"))?;
    let link = LinkConfig {
        scenario: kind,
        snr_db,
        ..Default::default()
    };
    let mut errors = 0;
    for t in 0..trials {
        let s = derive(seed, u64::from(t));
        let (a, b) = bits(s, link.source_bits);
        errors += run_packet(&a, &b, &link, decoder, s).map_err(|e| e.to_string())?.sum_bit_errors;
    }
    let total = (trials as usize * link.source_bits) as f64;
    Ok(vec![errors as f64, total, if total > 0.0 { errors as f64 / total } else { 0.0 }])
}

/// Sum MSE of `[misaligned analog, aligned analog, digital]` for one round
/// of `num_params` random parameters per device.
pub fn aggregation_mse(scenario: &str, snr_db: f64, num_params: usize, seed: u64) -> Result<Vec<f64>, String> {
    let kind: ScenarioKind = scenario.parse().map_err(|e| format!("{e}"))?;
    let mut rng = stream(seed, Stream::Data);
    let mut draw = || (0..num_params).map(|_| rng.random_range(-0.5..0.5)).collect::<Vec<f64>>();
    let (a, b) = (draw(), draw());
    let mut out = Vec::new();
    for aligned in [false, true] {
        let cfg = AnalogConfig {
            aligned,
            scenario: kind,
            snr_db,
            ..Default::default()
        };
        let r = run_analog_round(&a, &b, &cfg, seed).map_err(|e| e.to_string())?;
        out.push(r.diagnostics.mse.unwrap_or(f64::NAN));
    }
    let cfg = RoundConfig {
        link: LinkConfig {
            scenario: kind,
            snr_db,
            ..Default::default()
        },
        ..Default::default()
    };
    let r = run_digital_round(&a, &b, &cfg, seed).map_err(|e| e.to_string())?;
    let m = NUM_SELECTED as f64;
    let se: f64 = r
        .aggregated
        .iter()
        .zip(a.iter().zip(&b))
        .map(|(g, (x, y))| (g * m - x - y).powi(2))
        .sum();
    out.push(se / num_params.max(1) as f64);
    Ok(out)
}
