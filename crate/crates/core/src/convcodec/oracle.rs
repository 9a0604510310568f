//! Exhaustive reference decoders for short terminated codewords.
//!
//! Both functions enumerate every pair of source words, so they are only
//! usable for a handful of information bits. They exist to check the trellis
//! decoders and to measure how far the min-distance pair is from the
//! most-likely sum.

use std::collections::HashMap;

use super::joint::{bpsk, SoftObservation};
use super::{conv_encode, with_tail, CodeSpec};
use crate::error::{Error, Result};
use crate::quantizer::SumBits;

/// Largest number of information bits (tail excluded) the oracles accept.
pub const MAX_INFO_BITS: usize = 10;

struct Codebook {
    words: Vec<Vec<u8>>,
    coded: Vec<Vec<u8>>,
}

fn codebook(obs: &SoftObservation, spec: &CodeSpec) -> Result<Codebook> {
    let stages = obs.stages(spec)?;
    let info = stages - spec.memory();
    if info > MAX_INFO_BITS {
        return Err(Error::TooLarge {
            bits: info,
            limit: MAX_INFO_BITS,
        });
    }
    let words: Vec<Vec<u8>> = (0..1u32 << info)
        .map(|w| {
            let src: Vec<u8> = (0..info).map(|i| ((w >> (info - 1 - i)) & 1) as u8).collect();
            with_tail(&src, spec)
        })
        .collect();
    let coded = words.iter().map(|w| conv_encode(w, spec)).collect();
    Ok(Codebook { words, coded })
}

/// Squared distance of a codeword pair, accumulated two coded bits at a time.
fn distance(obs: &SoftObservation, ca: &[u8], cb: &[u8]) -> f64 {
    let cell = |n: usize| {
        (obs.y[n] - obs.h_a[n] * bpsk(ca[n] as usize) - obs.h_b[n] * bpsk(cb[n] as usize))
            .norm_sqr()
    };
    (0..ca.len() / 2).fold(0.0, |acc, t| acc + (cell(2 * t) + cell(2 * t + 1)))
}

/// Minimum of the total squared distance over all codeword pairs, with the
/// first minimizing pair of source words.
pub fn exhaustive_min_metric(
    obs: &SoftObservation,
    spec: &CodeSpec,
) -> Result<(f64, Vec<u8>, Vec<u8>)> {
    let book = codebook(obs, spec)?;
    let mut best = (f64::INFINITY, 0, 0);
    for (i, ca) in book.coded.iter().enumerate() {
        for (j, cb) in book.coded.iter().enumerate() {
            let d = distance(obs, ca, cb);
            if d < best.0 {
                best = (d, i, j);
            }
        }
    }
    Ok((best.0, book.words[best.1].clone(), book.words[best.2].clone()))
}

/// Sum word maximizing the total likelihood of all pairs that produce it.
pub fn oracle_codeword_optimal(obs: &SoftObservation, spec: &CodeSpec) -> Result<SumBits> {
    if !(obs.noise_var > 0.0) {
        return Err(Error::NonPositive("noise variance"));
    }
    let book = codebook(obs, spec)?;
    // Log-likelihoods are shifted by the global minimum distance before
    // exponentiation so the largest term is exp(0).
    let dist: Vec<Vec<f64>> = book
        .coded
        .iter()
        .map(|ca| book.coded.iter().map(|cb| distance(obs, ca, cb)).collect())
        .collect();
    let dmin = dist
        .iter()
        .flatten()
        .fold(f64::INFINITY, |m, &d| m.min(d));
    let mut mass: HashMap<Vec<u8>, f64> = HashMap::new();
    for (i, row) in dist.iter().enumerate() {
        for (j, &d) in row.iter().enumerate() {
            let key = SumBits::of(&[&book.words[i], &book.words[j]]).0;
            *mass.entry(key).or_insert(0.0) += (-(d - dmin) / obs.noise_var).exp();
        }
    }
    let (best, _) = mass
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
        .expect("non-empty codebook");
    Ok(SumBits(best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convcodec::fsjd_decode;
    use crate::convcodec::joint::tests::observe;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_noise_returns_true_sum() {
        let spec = CodeSpec::K3;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let sa = with_tail(&[rng.random_range(0..2), 1, 0, rng.random_range(0..2)], &spec);
            let sb = with_tail(&[1, rng.random_range(0..2), rng.random_range(0..2), 0], &spec);
            let mut obs = observe(
                &conv_encode(&sa, &spec),
                &conv_encode(&sb, &spec),
                Complex64::new(1.0, 0.0),
                Complex64::from_polar(1.0, 1.0),
                0.0,
                &mut rng,
            );
            obs.noise_var = 1e-3;
            assert_eq!(oracle_codeword_optimal(&obs, &spec).unwrap(), SumBits::of(&[&sa, &sb]));
            let (m, a, b) = exhaustive_min_metric(&obs, &spec).unwrap();
            assert_eq!(m, 0.0);
            assert_eq!((a, b), (sa.clone(), sb.clone()));
        }
    }

    #[test]
    fn fsjd_reaches_exhaustive_minimum() {
        let spec = CodeSpec::K3;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for info in 1..=6 {
            for _ in 0..30 {
                let sa: Vec<u8> = (0..info).map(|_| rng.random_range(0..2)).collect();
                let sb: Vec<u8> = (0..info).map(|_| rng.random_range(0..2)).collect();
                let obs = observe(
                    &conv_encode(&with_tail(&sa, &spec), &spec),
                    &conv_encode(&with_tail(&sb, &spec), &spec),
                    Complex64::new(1.0, 0.0),
                    Complex64::from_polar(1.0, rng.random_range(0.0..6.3)),
                    1.0,
                    &mut rng,
                );
                let (m, _, _) = exhaustive_min_metric(&obs, &spec).unwrap();
                assert_eq!(fsjd_decode(&obs, &spec).unwrap().metric, m);
            }
        }
    }

    #[test]
    fn refuses_long_words() {
        let spec = CodeSpec::K3;
        let n = 2 * (MAX_INFO_BITS + 1 + spec.memory());
        let z = Complex64::new(0.0, 0.0);
        let obs = SoftObservation {
            y: vec![z; n],
            h_a: vec![z; n],
            h_b: vec![z; n],
            noise_var: 1.0,
        };
        assert!(matches!(
            exhaustive_min_metric(&obs, &spec),
            Err(Error::TooLarge { .. })
        ));
    }
}
