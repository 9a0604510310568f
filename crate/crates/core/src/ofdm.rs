//! 802.11a-style OFDM framing for two simultaneous uplink users.
//!
//! Each frame starts with one training-symbol slot per user. User `u` sends
//! its training symbol in slot `u` and stays silent in the other, so the
//! preambles never overlap. Data symbols overlap fully; the four pilot
//! subcarriers are split so each user owns two of them in every symbol.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::convcodec::SoftObservation;
use crate::error::{Error, Result};

pub const NUM_USERS: usize = 2;

/// 802.11a long training sequence on subcarriers -26..=26 (DC is zero).
const LTF: [i8; 53] = [
    1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 0, 1,
    -1, -1, 1, 1, -1, 1, -1, 1, -1, -1, -1, -1, -1, 1, 1, -1, -1, 1, -1, 1, -1, 1, 1, 1, 1,
];

#[derive(Debug, Clone, PartialEq)]
pub struct OfdmConfig {
    pub fft_size: usize,
    pub cp_length: usize,
    pub sample_rate: f64,
    /// Signed subcarrier indices carrying data, in mapping order.
    pub data_subcarriers: Vec<i32>,
    pub pilot_subcarriers: Vec<i32>,
    /// Pilot subcarriers owned by each user.
    pub pilot_assignment: [Vec<i32>; NUM_USERS],
    pub max_data_symbols: usize,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        let pilots = vec![-21, -7, 7, 21];
        let data = (-26..=26)
            .filter(|k| *k != 0 && !pilots.contains(k))
            .collect();
        Self {
            fft_size: 64,
            cp_length: 16,
            sample_rate: 20e6,
            data_subcarriers: data,
            pilot_subcarriers: pilots,
            pilot_assignment: [vec![-21, -7], vec![7, 21]],
            max_data_symbols: 55,
        }
    }
}

impl OfdmConfig {
    pub fn validate(&self) -> Result<()> {
        let half = (self.fft_size / 2) as i32;
        let mut seen = std::collections::HashSet::new();
        for &k in self.data_subcarriers.iter().chain(&self.pilot_subcarriers) {
            if k == 0 || k < -half || k >= half {
                return Err(Error::Config(format!("subcarrier {k} is not usable")));
            }
            if !seen.insert(k) {
                return Err(Error::Config(format!("subcarrier {k} assigned twice")));
            }
        }
        if self.cp_length >= self.fft_size {
            return Err(Error::Config("cyclic prefix longer than symbol".into()));
        }
        for (u, set) in self.pilot_assignment.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::NoPilots(u));
            }
            if let Some(k) = set.iter().find(|k| !self.pilot_subcarriers.contains(k)) {
                return Err(Error::Config(format!("user {u} pilot {k} is not a pilot subcarrier")));
            }
        }
        if self.pilot_assignment[0]
            .iter()
            .any(|k| self.pilot_assignment[1].contains(k))
        {
            return Err(Error::Config("users share a pilot subcarrier".into()));
        }
        Ok(())
    }

    /// FFT bin of a signed subcarrier index.
    pub fn bin(&self, k: i32) -> usize {
        k.rem_euclid(self.fft_size as i32) as usize
    }

    /// Signed subcarrier index of an FFT bin.
    pub fn subcarrier(&self, bin: usize) -> i32 {
        let n = self.fft_size as i32;
        let b = bin as i32;
        if b >= n / 2 {
            b - n
        } else {
            b
        }
    }

    pub fn symbol_len(&self) -> usize {
        self.fft_size + self.cp_length
    }

    /// OFDM symbol duration including the cyclic prefix, in seconds.
    pub fn symbol_duration(&self) -> f64 {
        self.symbol_len() as f64 / self.sample_rate
    }

    pub fn cells_per_symbol(&self) -> usize {
        self.data_subcarriers.len()
    }

    /// Data symbols needed for `coded_bits` BPSK cells.
    pub fn symbols_for(&self, coded_bits: usize) -> usize {
        coded_bits.div_ceil(self.cells_per_symbol())
    }

    /// Subcarriers carrying energy in the training symbol.
    pub fn occupied(&self) -> impl Iterator<Item = i32> + '_ {
        self.data_subcarriers.iter().chain(&self.pilot_subcarriers).copied()
    }

    /// Known training value on every bin.
    pub fn training_grid(&self) -> Vec<Complex64> {
        let mut grid = vec![Complex64::new(0.0, 0.0); self.fft_size];
        for k in self.occupied() {
            let v = if (-26..=26).contains(&k) {
                f64::from(LTF[(k + 26) as usize])
            } else {
                1.0
            };
            grid[self.bin(k)] = Complex64::new(v, 0.0);
        }
        grid
    }

    /// Known pilot value on subcarrier `k` in data symbol `symbol`.
    pub fn pilot_value(&self, k: i32, symbol: usize) -> Complex64 {
        let base = if k == 21 { -1.0 } else { 1.0 };
        Complex64::new(base * pilot_polarity(symbol), 0.0)
    }
}

/// 127-periodic pilot polarity from the all-ones x^7 + x^4 + 1 scrambler.
pub fn pilot_polarity(symbol: usize) -> f64 {
    let mut s: u8 = 0x7f;
    let mut bit = 0;
    for _ in 0..=(symbol % 127) {
        bit = ((s >> 6) ^ (s >> 3)) & 1;
        s = ((s << 1) | bit) & 0x7f;
    }
    1.0 - 2.0 * f64::from(bit)
}

/// One user's frequency-domain frame.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmFrame {
    pub user: usize,
    pub preamble_slots: usize,
    /// Data symbols, each indexed by FFT bin.
    pub data: Vec<Vec<Complex64>>,
    /// Zero bits appended to fill the final symbol.
    pub pad_cells: usize,
}

impl OfdmFrame {
    pub fn num_symbols(&self) -> usize {
        self.data.len()
    }
}

/// Map coded bits onto BPSK data cells and insert the user's pilots.
pub fn build_frame(coded_bits: &[u8], user: usize, cfg: &OfdmConfig) -> Result<OfdmFrame> {
    cfg.validate()?;
    if user >= NUM_USERS {
        return Err(Error::Config(format!("user index {user} out of range")));
    }
    let per = cfg.cells_per_symbol();
    let symbols = cfg.symbols_for(coded_bits.len()).max(1);
    if symbols > cfg.max_data_symbols {
        return Err(Error::FrameOverflow {
            bits: coded_bits.len(),
            capacity: cfg.max_data_symbols * per,
        });
    }
    let zero = Complex64::new(0.0, 0.0);
    let data = (0..symbols)
        .map(|s| {
            let mut grid = vec![zero; cfg.fft_size];
            for (d, &k) in cfg.data_subcarriers.iter().enumerate() {
                let bit = coded_bits.get(s * per + d).copied().unwrap_or(0);
                grid[cfg.bin(k)] = Complex64::new(1.0 - 2.0 * f64::from(bit), 0.0);
            }
            for &k in &cfg.pilot_assignment[user] {
                grid[cfg.bin(k)] = cfg.pilot_value(k, s);
            }
            grid
        })
        .collect();
    Ok(OfdmFrame {
        user,
        preamble_slots: NUM_USERS,
        data,
        pad_cells: symbols * per - coded_bits.len(),
    })
}

/// Unitary 64-point transforms shared by modulator and demodulator.
pub struct Dft {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl Dft {
    pub fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
            scale: 1.0 / (size as f64).sqrt(),
        }
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
        buf.iter_mut().for_each(|x| *x *= self.scale);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        buf.iter_mut().for_each(|x| *x *= self.scale);
    }
}

/// Time-domain samples of the grids, each symbol prefixed with its CP.
pub fn modulate_grids(grids: &[Vec<Complex64>], cfg: &OfdmConfig) -> Vec<Complex64> {
    let dft = Dft::new(cfg.fft_size);
    let mut out = Vec::with_capacity(grids.len() * cfg.symbol_len());
    for grid in grids {
        let mut buf = grid.clone();
        dft.inverse(&mut buf);
        out.extend_from_slice(&buf[cfg.fft_size - cfg.cp_length..]);
        out.extend_from_slice(&buf);
    }
    out
}

/// Preamble slots followed by the data symbols.
pub fn ofdm_modulate(frame: &OfdmFrame, cfg: &OfdmConfig) -> Vec<Complex64> {
    let zero = vec![Complex64::new(0.0, 0.0); cfg.fft_size];
    let training = cfg.training_grid();
    let mut grids: Vec<Vec<Complex64>> = (0..frame.preamble_slots)
        .map(|s| if s == frame.user { training.clone() } else { zero.clone() })
        .collect();
    grids.extend(frame.data.iter().cloned());
    modulate_grids(&grids, cfg)
}

/// Strip each symbol's CP and transform; `symbol_start` is the first CP sample.
pub fn ofdm_demodulate(
    samples: &[Complex64],
    symbol_start: usize,
    num_symbols: usize,
    cfg: &OfdmConfig,
) -> Result<Vec<Vec<Complex64>>> {
    let need = symbol_start + num_symbols * cfg.symbol_len();
    if samples.len() < need {
        return Err(Error::Length {
            context: "received stream",
            expected: need,
            actual: samples.len(),
        });
    }
    let dft = Dft::new(cfg.fft_size);
    Ok((0..num_symbols)
        .map(|k| {
            let at = symbol_start + k * cfg.symbol_len() + cfg.cp_length;
            let mut buf = samples[at..at + cfg.fft_size].to_vec();
            dft.forward(&mut buf);
            buf
        })
        .collect())
}

/// Least-squares channel from one received training symbol.
pub fn estimate_channel(
    rx: &[Complex64],
    training: &[Complex64],
    cfg: &OfdmConfig,
) -> Result<Vec<Complex64>> {
    let mut h = vec![Complex64::new(0.0, 0.0); cfg.fft_size];
    for k in cfg.occupied() {
        let b = cfg.bin(k);
        if training[b].norm_sqr() == 0.0 {
            return Err(Error::ZeroTraining(k));
        }
        h[b] = rx[b] / training[b];
    }
    Ok(h)
}

/// Per-user base responses from the time-orthogonal preamble slots.
pub fn estimate_channels(
    preambles: &[Vec<Complex64>],
    cfg: &OfdmConfig,
) -> Result<[Vec<Complex64>; NUM_USERS]> {
    if preambles.len() < NUM_USERS {
        return Err(Error::Length {
            context: "preamble slots",
            expected: NUM_USERS,
            actual: preambles.len(),
        });
    }
    let training = cfg.training_grid();
    Ok([
        estimate_channel(&preambles[0], &training, cfg)?,
        estimate_channel(&preambles[1], &training, cfg)?,
    ])
}

/// Common phase of `user` in data symbol `symbol` relative to its base response.
pub fn track_phase(
    rx: &[Complex64],
    base: &[Complex64],
    user: usize,
    symbol: usize,
    cfg: &OfdmConfig,
) -> Result<f64> {
    let pilots = &cfg.pilot_assignment[user];
    if pilots.is_empty() {
        return Err(Error::NoPilots(user));
    }
    let acc: Complex64 = pilots
        .iter()
        .map(|&k| {
            let b = cfg.bin(k);
            rx[b] * (base[b] * cfg.pilot_value(k, symbol)).conj()
        })
        .sum();
    Ok(acc.arg())
}

/// Base responses plus per-symbol tracked phases.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub base: [Vec<Complex64>; NUM_USERS],
    /// `phases[k][u]` for data symbol `k`.
    pub phases: Vec<[f64; NUM_USERS]>,
}

impl ChannelEstimate {
    /// Estimate from received grids laid out as preamble slots then data.
    pub fn from_grids(grids: &[Vec<Complex64>], cfg: &OfdmConfig) -> Result<Self> {
        let base = estimate_channels(grids, cfg)?;
        let phases = grids[NUM_USERS..]
            .iter()
            .enumerate()
            .map(|(k, rx)| {
                Ok([
                    track_phase(rx, &base[0], 0, k, cfg)?,
                    track_phase(rx, &base[1], 1, k, cfg)?,
                ])
            })
            .collect::<Result<_>>()?;
        Ok(Self { base, phases })
    }

    /// Effective response of `user` on `bin` in data symbol `symbol`.
    pub fn effective(&self, user: usize, symbol: usize, bin: usize) -> Complex64 {
        self.base[user][bin] * Complex64::from_polar(1.0, self.phases[symbol][user])
    }
}

/// Gather the first `coded_len` data cells and their effective channels.
pub fn soft_observation(
    data: &[Vec<Complex64>],
    est: &ChannelEstimate,
    coded_len: usize,
    noise_var: f64,
    cfg: &OfdmConfig,
) -> Result<SoftObservation> {
    let per = cfg.cells_per_symbol();
    if data.len() * per < coded_len || est.phases.len() < data.len() {
        return Err(Error::Length {
            context: "data cells",
            expected: coded_len,
            actual: data.len().min(est.phases.len()) * per,
        });
    }
    let mut obs = SoftObservation {
        y: Vec::with_capacity(coded_len),
        h_a: Vec::with_capacity(coded_len),
        h_b: Vec::with_capacity(coded_len),
        noise_var,
    };
    for n in 0..coded_len {
        let (k, d) = (n / per, n % per);
        let b = cfg.bin(cfg.data_subcarriers[d]);
        obs.y.push(data[k][b]);
        obs.h_a.push(est.effective(0, k, b));
        obs.h_b.push(est.effective(1, k, b));
    }
    Ok(obs)
}

/// Hard BPSK decisions on the first `coded_len` data cells.
pub fn demap(data: &[Vec<Complex64>], coded_len: usize, cfg: &OfdmConfig) -> Vec<u8> {
    let per = cfg.cells_per_symbol();
    (0..coded_len)
        .map(|n| {
            let b = cfg.bin(cfg.data_subcarriers[n % per]);
            u8::from(data[n / per][b].re < 0.0)
        })
        .collect()
}

/// Phase advance per OFDM symbol for a carrier offset of `cfo_hz`.
pub fn cfo_phase_step(cfo_hz: f64, cfg: &OfdmConfig) -> f64 {
    2.0 * PI * cfo_hz * cfg.symbol_duration()
}
