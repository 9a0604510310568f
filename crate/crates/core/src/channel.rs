//! Asynchronous two-user uplink: per-user phase, integer delay and carrier
//! offset on a unit single-path channel, plus AWGN calibrated against the
//! received superposition.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ofdm::{OfdmConfig, NUM_USERS};
use crate::rng::{stream, Stream};

/// Largest timing offset drawn for the near-realistic channel, in samples.
pub const MAX_TIMING_OFFSET: usize = 5;
/// Largest carrier offset magnitude drawn for the near-realistic channel.
pub const MAX_CFO_HZ: f64 = 2000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Phase-aligned users.
    Bad,
    /// Users a quarter turn apart.
    Good,
    /// Random phase, delay and carrier offset for every packet.
    NearRealistic,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [Self::Bad, Self::Good, Self::NearRealistic];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Bad => "bad",
            Self::Good => "good",
            Self::NearRealistic => "near-realistic",
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario '{s}'")))
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UserImpairment {
    /// Carrier phase in radians.
    pub phase: f64,
    /// Arrival delay in whole samples.
    pub timing_offset: usize,
    pub cfo_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelScenario {
    pub users: [UserImpairment; NUM_USERS],
    pub snr_db: f64,
    pub seed: u64,
}

impl ChannelScenario {
    pub fn validate(&self, cfg: &OfdmConfig) -> Result<()> {
        for u in &self.users {
            if u.timing_offset > cfg.cp_length {
                return Err(Error::TimingOffset {
                    tau: u.timing_offset,
                    cp: cfg.cp_length,
                });
            }
        }
        Ok(())
    }

    pub fn relative_phase(&self) -> f64 {
        (self.users[1].phase - self.users[0].phase).rem_euclid(TAU)
    }
}

/// Draw the impairments of one packet. Deterministic in `seed`.
pub fn draw_scenario(kind: ScenarioKind, snr_db: f64, seed: u64) -> ChannelScenario {
    let users = match kind {
        ScenarioKind::Bad => [UserImpairment::default(); NUM_USERS],
        ScenarioKind::Good => [
            UserImpairment::default(),
            UserImpairment {
                phase: FRAC_PI_2,
                ..Default::default()
            },
        ],
        ScenarioKind::NearRealistic => {
            let mut rng = stream(seed, Stream::Scenario);
            let mut draw = || UserImpairment {
                phase: rng.random_range(0.0..TAU),
                timing_offset: rng.random_range(0..=MAX_TIMING_OFFSET),
                cfo_hz: rng.random_range(-MAX_CFO_HZ..=MAX_CFO_HZ),
            };
            [draw(), draw()]
        }
    };
    ChannelScenario {
        users,
        snr_db,
        seed,
    }
}

/// Total complex noise variance giving `snr_db` against signal power `power`.
pub fn snr_calibrate(power: f64, snr_db: f64) -> Result<f64> {
    if !(power > 0.0) {
        return Err(Error::NonPositive("signal power"));
    }
    Ok(power / 10f64.powf(snr_db / 10.0))
}

pub fn mean_power(samples: &[Complex64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|x| x.norm_sqr()).sum::<f64>() / samples.len() as f64
}

/// Circularly-symmetric complex Gaussian with total variance `var`.
pub fn complex_gaussian(rng: &mut impl Rng, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    Complex64::new(
        rng.sample::<f64, _>(StandardNormal) * s,
        rng.sample::<f64, _>(StandardNormal) * s,
    )
}

/// Noiseless superposition of the delayed, rotated user streams.
///
/// Output has the length of the longer input; samples delayed past the end
/// are dropped.
pub fn superpose(
    tx_a: &[Complex64],
    tx_b: &[Complex64],
    scen: &ChannelScenario,
    cfg: &OfdmConfig,
) -> Result<Vec<Complex64>> {
    scen.validate(cfg)?;
    let len = tx_a.len().max(tx_b.len());
    let mut y = vec![Complex64::new(0.0, 0.0); len];
    for (tx, imp) in [tx_a, tx_b].into_iter().zip(&scen.users) {
        let w = TAU * imp.cfo_hz / cfg.sample_rate;
        for (m, out) in y.iter_mut().enumerate().skip(imp.timing_offset) {
            if let Some(x) = tx.get(m - imp.timing_offset) {
                *out += x * Complex64::from_polar(1.0, imp.phase + w * m as f64);
            }
        }
    }
    Ok(y)
}

/// Received stream and the noise variance that was added.
#[derive(Debug, Clone, PartialEq)]
pub struct Received {
    pub samples: Vec<Complex64>,
    pub noise_var: f64,
}

/// Superpose both users and add AWGN at the scenario's SNR.
///
/// Noise is drawn from the scenario seed's noise stream. If both users are
/// silent the noise variance is calibrated against unit power.
pub fn apply_channel(
    tx_a: &[Complex64],
    tx_b: &[Complex64],
    scen: &ChannelScenario,
    cfg: &OfdmConfig,
) -> Result<Received> {
    let mut samples = superpose(tx_a, tx_b, scen, cfg)?;
    let power = mean_power(&samples);
    let noise_var = snr_calibrate(if power > 0.0 { power } else { 1.0 }, scen.snr_db)?;
    let mut rng = stream(scen.seed, Stream::Noise);
    for s in samples.iter_mut() {
        *s += complex_gaussian(&mut rng, noise_var);
    }
    Ok(Received { samples, noise_var })
}

/// Analytic per-subcarrier response of each user, ignoring inter-carrier leakage.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub users: [UserImpairment; NUM_USERS],
}

impl ChannelRealization {
    pub fn new(scen: &ChannelScenario) -> Self {
        Self { users: scen.users }
    }

    /// Response of `user` on subcarrier `k` in symbol slot `slot` (preamble slots count).
    pub fn response(&self, user: usize, slot: usize, k: i32, cfg: &OfdmConfig) -> Complex64 {
        let imp = &self.users[user];
        let center = (slot * cfg.symbol_len() + cfg.cp_length) as f64
            + (cfg.fft_size as f64 - 1.0) / 2.0;
        let cfo = TAU * imp.cfo_hz * center / cfg.sample_rate;
        let delay = -2.0 * PI * imp.timing_offset as f64 * f64::from(k) / cfg.fft_size as f64;
        Complex64::from_polar(1.0, imp.phase + cfo + delay)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::{build_frame, estimate_channels, ofdm_demodulate, ofdm_modulate, track_phase};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_stream(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| complex_gaussian(&mut rng, 1.0)).collect()
    }

    #[test]
    fn calibration_examples() {
        assert_eq!(snr_calibrate(1.0, 0.0).unwrap(), 1.0);
        assert!((snr_calibrate(1.0, 10.0).unwrap() - 0.1).abs() < 1e-15);
        assert!((snr_calibrate(2.0, 3.0).unwrap() - 1.002_374_467_254_545).abs() < 1e-12);
        assert!(snr_calibrate(0.0, 3.0).is_err());
    }

    #[test]
    fn scenario_kinds() {
        let bad = draw_scenario(ScenarioKind::Bad, 10.0, 1);
        assert_eq!(bad.relative_phase(), 0.0);
        let good = draw_scenario(ScenarioKind::Good, 10.0, 1);
        assert_eq!(good.relative_phase(), FRAC_PI_2);
        let a = draw_scenario(ScenarioKind::NearRealistic, 10.0, 77);
        let b = draw_scenario(ScenarioKind::NearRealistic, 10.0, 77);
        assert_eq!(a, b);
        for u in &a.users {
            assert!(u.timing_offset <= MAX_TIMING_OFFSET);
            assert!(u.cfo_hz.abs() <= MAX_CFO_HZ);
            assert!((0.0..TAU).contains(&u.phase));
        }
        assert_ne!(a, draw_scenario(ScenarioKind::NearRealistic, 10.0, 78));
        assert_eq!("near-realistic".parse::<ScenarioKind>().unwrap(), ScenarioKind::NearRealistic);
    }

    #[test]
    fn silent_users_give_calibrated_noise() {
        let cfg = OfdmConfig::default();
        let z = vec![Complex64::new(0.0, 0.0); 200_000];
        let scen = draw_scenario(ScenarioKind::Bad, 0.0, 3);
        let rx = apply_channel(&z, &z, &scen, &cfg).unwrap();
        assert_eq!(rx.noise_var, 1.0);
        assert!((mean_power(&rx.samples) - 1.0).abs() < 0.02);
    }

    #[test]
    fn measured_snr_matches_target() {
        let cfg = OfdmConfig::default();
        let a = random_stream(100_000, 1);
        let b = random_stream(100_000, 2);
        for snr in [0.0, 7.5, 20.0] {
            let scen = draw_scenario(ScenarioKind::NearRealistic, snr, 5);
            let clean = superpose(&a, &b, &scen, &cfg).unwrap();
            let rx = apply_channel(&a, &b, &scen, &cfg).unwrap();
            let noise: Vec<Complex64> = rx.samples.iter().zip(&clean).map(|(r, c)| r - c).collect();
            let measured = 10.0 * (mean_power(&clean) / mean_power(&noise)).log10();
            assert!((measured - snr).abs() < 0.1, "{measured} vs {snr}");
        }
    }

    #[test]
    fn superposition_is_linear() {
        let cfg = OfdmConfig::default();
        let a = random_stream(500, 1);
        let b = random_stream(500, 2);
        let z = vec![Complex64::new(0.0, 0.0); 500];
        let scen = draw_scenario(ScenarioKind::NearRealistic, 10.0, 9);
        let ab = superpose(&a, &b, &scen, &cfg).unwrap();
        let a0 = superpose(&a, &z, &scen, &cfg).unwrap();
        let b0 = superpose(&z, &b, &scen, &cfg).unwrap();
        for i in 0..500 {
            assert!((ab[i] - a0[i] - b0[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn coherent_addition_when_aligned() {
        let cfg = OfdmConfig::default();
        let a = random_stream(300, 4);
        let scen = draw_scenario(ScenarioKind::Bad, 10.0, 0);
        let y = superpose(&a, &a, &scen, &cfg).unwrap();
        for (x, y) in a.iter().zip(&y) {
            assert!((y - 2.0 * x).norm() < 1e-12);
        }
    }

    #[test]
    fn replay_is_bit_identical() {
        let cfg = OfdmConfig::default();
        let a = random_stream(1000, 1);
        let b = random_stream(1000, 2);
        let scen = draw_scenario(ScenarioKind::NearRealistic, 5.0, 42);
        assert_eq!(
            apply_channel(&a, &b, &scen, &cfg).unwrap(),
            apply_channel(&a, &b, &scen, &cfg).unwrap()
        );
    }

    #[test]
    fn timing_offset_beyond_cp_rejected() {
        let cfg = OfdmConfig::default();
        let mut scen = draw_scenario(ScenarioKind::Bad, 10.0, 0);
        scen.users[1].timing_offset = 17;
        assert!(matches!(
            apply_channel(&[], &[], &scen, &cfg),
            Err(Error::TimingOffset { tau: 17, cp: 16 })
        ));
    }

    #[test]
    fn good_channel_gives_orthogonal_constellation() {
        let cfg = OfdmConfig::default();
        let bits: Vec<u8> = (0..480).map(|i| ((i * 7) % 3 == 0) as u8).collect();
        let bits_b: Vec<u8> = (0..480).map(|i| ((i * 5) % 2) as u8).collect();
        let ta = ofdm_modulate(&build_frame(&bits, 0, &cfg).unwrap(), &cfg);
        let tb = ofdm_modulate(&build_frame(&bits_b, 1, &cfg).unwrap(), &cfg);
        let scen = draw_scenario(ScenarioKind::Good, 100.0, 0);
        let y = superpose(&ta, &tb, &scen, &cfg).unwrap();
        let grids = ofdm_demodulate(&y, 0, 12, &cfg).unwrap();
        for g in &grids[2..] {
            for &k in &cfg.data_subcarriers {
                let v = g[cfg.bin(k)];
                assert!((v.re.abs() - 1.0).abs() < 1e-12 && (v.im.abs() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn measured_cfo_step_matches_symbol_duration() {
        let cfg = OfdmConfig::default();
        // Data cells are blanked so inter-carrier leakage is identical in
        // every symbol and cancels in the phase differences.
        let mut frame = build_frame(&vec![0u8; 48 * 20], 0, &cfg).unwrap();
        for g in frame.data.iter_mut() {
            for &k in &cfg.data_subcarriers {
                g[cfg.bin(k)] = Complex64::new(0.0, 0.0);
            }
        }
        let ta = ofdm_modulate(&frame, &cfg);
        let z = vec![Complex64::new(0.0, 0.0); ta.len()];
        for f in [2000.0, -2000.0, 730.0] {
            let mut scen = draw_scenario(ScenarioKind::Bad, 100.0, 0);
            scen.users[0].cfo_hz = f;
            let y = superpose(&ta, &z, &scen, &cfg).unwrap();
            let grids = ofdm_demodulate(&y, 0, 22, &cfg).unwrap();
            let base = &estimate_channels(&grids, &cfg).unwrap()[0];
            let theta: Vec<f64> = (0..20)
                .map(|k| track_phase(&grids[2 + k], base, 0, k, &cfg).unwrap())
                .collect();
            let want = crate::ofdm::cfo_phase_step(f, &cfg);
            for w in theta.windows(2) {
                assert!((w[1] - w[0] - want).abs() < 1e-9, "{} vs {want}", w[1] - w[0]);
            }
        }
    }

    #[test]
    fn realization_matches_demodulated_pilots() {
        let cfg = OfdmConfig::default();
        let bits = vec![1u8; 48 * 4];
        let ta = ofdm_modulate(&build_frame(&bits, 0, &cfg).unwrap(), &cfg);
        let z = vec![Complex64::new(0.0, 0.0); ta.len()];
        let mut scen = draw_scenario(ScenarioKind::Bad, 100.0, 0);
        scen.users[0] = UserImpairment {
            phase: 1.1,
            timing_offset: 4,
            cfo_hz: 0.0,
        };
        let y = superpose(&ta, &z, &scen, &cfg).unwrap();
        let grids = ofdm_demodulate(&y, 0, 6, &cfg).unwrap();
        let real = ChannelRealization::new(&scen);
        for &k in &cfg.data_subcarriers {
            let h = real.response(0, 3, k, &cfg);
            assert!((grids[3][cfg.bin(k)] - h * -1.0).norm() < 1e-12);
        }
    }
}
