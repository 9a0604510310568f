//! Fixed-length binary quantization of model parameters.
//!
//! Two codings are provided. [`QuantMode::SignMagnitude`] is a sign bit
//! followed by the truncated binary expansion of `|p|`. [`QuantMode::OffsetBinary`]
//! maps `[-1, 1)` linearly onto `0..2^k`, which makes the positional sum of
//! two users' bits decode straight to the sum of their values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameter coding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantMode {
    SignMagnitude,
    OffsetBinary,
}

/// Bit length and coding of a quantizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizerConfig {
    pub bits: usize,
    pub mode: QuantMode,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        Self {
            bits: 13,
            mode: QuantMode::OffsetBinary,
        }
    }
}

/// Largest bit length for which sums stay exact in `f64` and `u64` arithmetic.
pub const MAX_BITS: usize = 48;

impl QuantizerConfig {
    pub fn new(bits: usize, mode: QuantMode) -> Result<Self> {
        let cfg = Self { bits, mode };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits < 2 || self.bits > MAX_BITS {
            return Err(Error::Config(format!(
                "quantizer bit length {} outside 2..={MAX_BITS}",
                self.bits
            )));
        }
        Ok(())
    }

    /// One least-significant step, `2^(1-k)`.
    pub fn step(&self) -> f64 {
        0.5f64.powi(self.bits as i32 - 1)
    }

    /// Representable interval `[lo, hi]` that inputs are clamped into.
    pub fn range(&self) -> (f64, f64) {
        let step = self.step();
        match self.mode {
            QuantMode::SignMagnitude => (-1.0 + step, 1.0 - step),
            QuantMode::OffsetBinary => (-1.0, 1.0 - step),
        }
    }

    pub fn clamp(&self, p: f64) -> f64 {
        let (lo, hi) = self.range();
        p.clamp(lo, hi)
    }
}

/// Floating-point parameters with their quantized bit-vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterBlock {
    pub values: Vec<f64>,
    pub bits: Vec<Vec<u8>>,
}

impl ParameterBlock {
    pub fn from_values(values: &[f64], cfg: QuantizerConfig) -> Result<Self> {
        let bits = values
            .iter()
            .map(|&p| quantize(p, cfg))
            .collect::<Result<_>>()?;
        Ok(Self {
            values: values.to_vec(),
            bits,
        })
    }

    /// Number of values that fell outside the representable range.
    pub fn clipped(&self, cfg: QuantizerConfig) -> usize {
        let (lo, hi) = cfg.range();
        self.values.iter().filter(|&&p| p < lo || p > hi).count()
    }
}

/// Per-position arithmetic sums of several users' bits.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SumBits(pub Vec<u8>);

impl SumBits {
    /// Position-wise sum of equal-length bit sequences.
    pub fn of(users: &[&[u8]]) -> Self {
        let n = users.first().map_or(0, |u| u.len());
        let mut digits = vec![0u8; n];
        for u in users {
            assert_eq!(u.len(), n, "bit sequences of unequal length");
            for (d, &b) in digits.iter_mut().zip(u.iter()) {
                *d += b;
            }
        }
        SumBits(digits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of positions where `self` and `other` disagree.
    pub fn mismatches(&self, other: &SumBits) -> usize {
        assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

/// Quantize one parameter to `cfg.bits` bits, most significant first.
pub fn quantize(p: f64, cfg: QuantizerConfig) -> Result<Vec<u8>> {
    cfg.validate()?;
    if !p.is_finite() {
        return Err(Error::NonFinite(p));
    }
    let p = cfg.clamp(p);
    let k = cfg.bits;
    Ok(match cfg.mode {
        QuantMode::SignMagnitude => {
            let mag = p.abs();
            let mut bits = Vec::with_capacity(k);
            bits.push(u8::from(p < 0.0));
            // `%` on f64 is exact, and the moduli are powers of two.
            for i in 1..k as i32 {
                let rem = mag % 0.5f64.powi(i - 1);
                bits.push(u8::from(rem >= 0.5f64.powi(i)));
            }
            bits
        }
        QuantMode::OffsetBinary => {
            let level = ((p + 1.0) * 2f64.powi(k as i32 - 1)).round() as u64;
            (0..k).rev().map(|i| ((level >> i) & 1) as u8).collect()
        }
    })
}

/// Offset-binary level of a bit-vector, as an integer.
fn level(bits: &[u8]) -> u64 {
    bits.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
}

/// Inverse of [`quantize`] up to one quantization step.
pub fn dequantize(bits: &[u8], cfg: QuantizerConfig) -> Result<f64> {
    cfg.validate()?;
    if bits.len() != cfg.bits {
        return Err(Error::Length {
            context: "dequantize",
            expected: cfg.bits,
            actual: bits.len(),
        });
    }
    Ok(match cfg.mode {
        QuantMode::SignMagnitude => {
            let mag: f64 = bits[1..]
                .iter()
                .enumerate()
                .map(|(i, &b)| f64::from(b) * 0.5f64.powi(i as i32 + 1))
                .sum();
            if bits[0] == 1 {
                -mag
            } else {
                mag
            }
        }
        QuantMode::OffsetBinary => level(bits) as f64 / 2f64.powi(cfg.bits as i32 - 1) - 1.0,
    })
}

/// Value recovered from one parameter's sum digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reconstructed {
    pub value: f64,
    /// Sign-magnitude only: users disagreed on sign, value was set to zero.
    pub sign_ambiguous: bool,
}

/// Recover the sum of the users' dequantized values from position-wise digits.
pub fn reconstruct_sum(
    digits: &[u8],
    cfg: QuantizerConfig,
    num_users: usize,
) -> Result<Reconstructed> {
    cfg.validate()?;
    if digits.len() != cfg.bits {
        return Err(Error::Length {
            context: "reconstruct_sum",
            expected: cfg.bits,
            actual: digits.len(),
        });
    }
    let max = num_users as u8;
    if let Some((position, &digit)) = digits.iter().enumerate().find(|(_, &d)| d > max) {
        return Err(Error::SumDigit {
            digit,
            position,
            max,
        });
    }
    let k = cfg.bits as i32;
    Ok(match cfg.mode {
        QuantMode::OffsetBinary => {
            let total = digits
                .iter()
                .fold(0u64, |acc, &d| (acc << 1) + u64::from(d));
            Reconstructed {
                value: total as f64 / 2f64.powi(k - 1) - num_users as f64,
                sign_ambiguous: false,
            }
        }
        QuantMode::SignMagnitude => {
            let mag: f64 = digits[1..]
                .iter()
                .enumerate()
                .map(|(i, &d)| f64::from(d) * 0.5f64.powi(i as i32 + 1))
                .sum();
            match digits[0] {
                0 => Reconstructed {
                    value: mag,
                    sign_ambiguous: false,
                },
                s if s == max => Reconstructed {
                    value: -mag,
                    sign_ambiguous: false,
                },
                _ => Reconstructed {
                    value: 0.0,
                    sign_ambiguous: true,
                },
            }
        }
    })
}

/// Source bits of one packet and how many of its parameter slots are real.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub bits: Vec<u8>,
    pub slots_used: usize,
}

/// Parameter slots that fit in `n_source_bits`.
pub fn slots_per_packet(n_source_bits: usize, cfg: QuantizerConfig) -> usize {
    n_source_bits / cfg.bits
}

/// Quantize `values` and pack them into fixed-size packets, zero-padding the tail.
pub fn pack_parameters(
    values: &[f64],
    n_source_bits: usize,
    cfg: QuantizerConfig,
) -> Result<Vec<Packet>> {
    cfg.validate()?;
    if n_source_bits < cfg.bits {
        return Err(Error::Config(format!(
            "packet of {n_source_bits} bits cannot hold a {}-bit parameter",
            cfg.bits
        )));
    }
    let slots = slots_per_packet(n_source_bits, cfg);
    values
        .chunks(slots)
        .map(|chunk| {
            let mut bits = Vec::with_capacity(n_source_bits);
            for &p in chunk {
                bits.extend(quantize(p, cfg)?);
            }
            bits.resize(n_source_bits, 0);
            Ok(Packet {
                bits,
                slots_used: chunk.len(),
            })
        })
        .collect()
}

/// Reconstruct summed parameters from per-packet sum digits.
///
/// Padded slots are dropped. Returns the sums and the number of
/// sign-ambiguous slots.
pub fn unpack_sums(
    packets: &[(SumBits, usize)],
    cfg: QuantizerConfig,
    num_users: usize,
) -> Result<(Vec<f64>, usize)> {
    let mut sums = Vec::new();
    let mut ambiguous = 0;
    for (digits, used) in packets {
        if digits.len() < used * cfg.bits {
            return Err(Error::Length {
                context: "unpack_sums",
                expected: used * cfg.bits,
                actual: digits.len(),
            });
        }
        for slot in digits.0.chunks(cfg.bits).take(*used) {
            let r = reconstruct_sum(slot, cfg, num_users)?;
            ambiguous += usize::from(r.sign_ambiguous);
            sums.push(r.value);
        }
    }
    Ok((sums, ambiguous))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sm(k: usize) -> QuantizerConfig {
        QuantizerConfig::new(k, QuantMode::SignMagnitude).unwrap()
    }

    fn ob(k: usize) -> QuantizerConfig {
        QuantizerConfig::new(k, QuantMode::OffsetBinary).unwrap()
    }

    #[test]
    fn sign_magnitude_examples() {
        assert_eq!(quantize(0.0, sm(4)).unwrap(), vec![0, 0, 0, 0]);
        assert_eq!(quantize(0.625, sm(4)).unwrap(), vec![0, 1, 0, 1]);
        assert_eq!(quantize(-0.5, sm(3)).unwrap(), vec![1, 1, 0]);
        assert_eq!(dequantize(&[0, 0, 0, 0], sm(4)).unwrap(), 0.0);
        assert_eq!(dequantize(&[0, 1, 0, 1], sm(4)).unwrap(), 0.625);
        assert_eq!(dequantize(&[1, 1, 0], sm(3)).unwrap(), -0.5);
    }

    #[test]
    fn offset_binary_zero_bits_is_minus_one() {
        assert_eq!(dequantize(&[0, 0, 0, 0], ob(4)).unwrap(), -1.0);
        assert_eq!(quantize(-1.0, ob(4)).unwrap(), vec![0, 0, 0, 0]);
        assert_eq!(quantize(5.0, ob(4)).unwrap(), vec![1, 1, 1, 1]);
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(quantize(f64::NAN, ob(8)), Err(Error::NonFinite(_))));
        assert!(quantize(f64::INFINITY, sm(8)).is_err());
        assert!(matches!(
            dequantize(&[0, 1], ob(4)),
            Err(Error::Length { .. })
        ));
        assert!(QuantizerConfig::new(1, QuantMode::OffsetBinary).is_err());
        assert!(matches!(
            reconstruct_sum(&[0, 3, 0, 0], ob(4), 2),
            Err(Error::SumDigit { digit: 3, .. })
        ));
    }

    #[test]
    fn reconstruct_examples() {
        let r = reconstruct_sum(&[0; 4], ob(4), 2).unwrap();
        assert_eq!(r.value, -2.0);

        let a = quantize(0.25, ob(8)).unwrap();
        let b = quantize(0.5, ob(8)).unwrap();
        let s = SumBits::of(&[&a, &b]);
        let r = reconstruct_sum(&s.0, ob(8), 2).unwrap();
        assert!((r.value - 0.75).abs() <= 2f64.powi(-6));

        let a = quantize(-0.5, sm(4)).unwrap();
        let b = quantize(-0.25, sm(4)).unwrap();
        let s = SumBits::of(&[&a, &b]);
        assert_eq!(s.0, vec![2, 1, 1, 0]);
        let r = reconstruct_sum(&s.0, sm(4), 2).unwrap();
        assert_eq!(r.value, -0.75);
        assert!(!r.sign_ambiguous);

        let a = quantize(-0.5, sm(4)).unwrap();
        let b = quantize(0.25, sm(4)).unwrap();
        let r = reconstruct_sum(&SumBits::of(&[&a, &b]).0, sm(4), 2).unwrap();
        assert!(r.sign_ambiguous);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn packing() {
        let cfg = ob(13);
        let p = pack_parameters(&vec![0.1; 100], 1300, cfg).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].slots_used, 100);
        assert_eq!(p[0].bits.len(), 1300);

        let p = pack_parameters(&[0.3], 26, cfg).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].slots_used, 1);
        assert!(p[0].bits[13..].iter().all(|&b| b == 0));

        let p = pack_parameters(&vec![0.0; 201], 1300, cfg).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p[2].slots_used, 1);

        // 1300 is not a multiple of 8: 162 slots, 4 pad bits.
        let p = pack_parameters(&vec![0.0; 200], 1300, ob(8)).unwrap();
        assert_eq!(p[0].slots_used, 162);
        assert!(p.iter().all(|pk| pk.bits.len() == 1300));

        assert!(pack_parameters(&[0.0], 12, cfg).is_err());
    }

    #[test]
    fn unpack_drops_padding() {
        let cfg = ob(13);
        let a = [0.25, -0.5, 0.125];
        let b = [0.5, 0.25, -0.75];
        let pa = pack_parameters(&a, 26, cfg).unwrap();
        let pb = pack_parameters(&b, 26, cfg).unwrap();
        let sums: Vec<_> = pa
            .iter()
            .zip(&pb)
            .map(|(x, y)| (SumBits::of(&[&x.bits, &y.bits]), x.slots_used))
            .collect();
        let (vals, amb) = unpack_sums(&sums, cfg, 2).unwrap();
        assert_eq!(amb, 0);
        assert_eq!(vals, vec![0.75, -0.25, -0.625]);
    }

    proptest! {
        #[test]
        fn round_trip_bound(p in -1.0f64..1.0, k in 2usize..=16, signmag in any::<bool>()) {
            let cfg = if signmag { sm(k) } else { ob(k) };
            let q = dequantize(&quantize(p, cfg).unwrap(), cfg).unwrap();
            prop_assert!((q - cfg.clamp(p)).abs() <= cfg.step());
        }

        #[test]
        fn offset_binary_sum_exact(a in -1.5f64..1.5, b in -1.5f64..1.5, k in 2usize..=16) {
            let cfg = ob(k);
            let qa = quantize(a, cfg).unwrap();
            let qb = quantize(b, cfg).unwrap();
            let want = dequantize(&qa, cfg).unwrap() + dequantize(&qb, cfg).unwrap();
            let got = reconstruct_sum(&SumBits::of(&[&qa, &qb]).0, cfg, 2).unwrap();
            prop_assert_eq!(got.value, want);
        }

        #[test]
        fn sign_magnitude_same_sign_exact(a in 0.0f64..1.0, b in 0.0f64..1.0, neg in any::<bool>(), k in 2usize..=16) {
            let cfg = sm(k);
            let (a, b) = if neg { (-a - 1e-9, -b - 1e-9) } else { (a, b) };
            let qa = quantize(a, cfg).unwrap();
            let qb = quantize(b, cfg).unwrap();
            let want = dequantize(&qa, cfg).unwrap() + dequantize(&qb, cfg).unwrap();
            let got = reconstruct_sum(&SumBits::of(&[&qa, &qb]).0, cfg, 2).unwrap();
            prop_assert!(!got.sign_ambiguous);
            prop_assert!((got.value - want).abs() <= 1e-15);
            prop_assert!((got.value - (cfg.clamp(a) + cfg.clamp(b))).abs() <= 2.0 * cfg.step());
        }

        #[test]
        fn offset_binary_monotone(a in -2.0f64..2.0, b in -2.0f64..2.0, k in 2usize..=16) {
            let cfg = ob(k);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(level(&quantize(lo, cfg).unwrap()) <= level(&quantize(hi, cfg).unwrap()));
        }
    }
}
