use super::joint::SoftObservation;
use super::viterbi::single_user_viterbi;
use super::CodeSpec;
use crate::error::{Error, Result};
use crate::quantizer::SumBits;

#[derive(Debug, Clone, PartialEq)]
pub struct PsudDecode {
    pub sum: SumBits,
    pub bits_a: Vec<u8>,
    pub bits_b: Vec<u8>,
    pub metric_a: f64,
    pub metric_b: f64,
}

fn log_add(x: f64, y: f64) -> f64 {
    let m = x.max(y);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((x - m).exp() + (y - m).exp()).ln()
}

/// Per-bit costs for each user with the other user's symbol summed out.
fn marginal_costs(obs: &SoftObservation) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let scale = 1.0 / obs.noise_var;
    (0..obs.len())
        .map(|n| {
            let d = obs.cell_distances(n);
            let ll = |ba: usize, bb: usize| -d[ba][bb] * scale;
            let a = [-log_add(ll(0, 0), ll(0, 1)), -log_add(ll(1, 0), ll(1, 1))];
            let b = [-log_add(ll(0, 0), ll(1, 0)), -log_add(ll(0, 1), ll(1, 1))];
            (a, b)
        })
        .unzip()
}

/// Parallel single-user decoding: marginalize, decode each user alone, add.
pub fn psud_decode(obs: &SoftObservation, spec: &CodeSpec) -> Result<PsudDecode> {
    if !(obs.noise_var > 0.0) {
        return Err(Error::NonPositive("noise variance"));
    }
    obs.stages(spec)?;
    let (ca, cb) = marginal_costs(obs);
    let da = single_user_viterbi(&ca, spec)?;
    let db = single_user_viterbi(&cb, spec)?;
    let sum = SumBits(da.bits.iter().zip(&db.bits).map(|(a, b)| a + b).collect());
    Ok(PsudDecode {
        sum,
        bits_a: da.bits,
        bits_b: db.bits,
        metric_a: da.metric,
        metric_b: db.metric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convcodec::joint::tests::observe;
    use crate::convcodec::{conv_encode, fsjd_decode, single_user_viterbi, with_tail};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn source(len: usize, rng: &mut impl Rng) -> Vec<u8> {
        let s: Vec<u8> = (0..len).map(|_| rng.random_range(0..2)).collect();
        with_tail(&s, &CodeSpec::IEEE80211)
    }

    #[test]
    fn log_add_is_stable() {
        assert!((log_add(-1000.0, -1000.0) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_add(f64::NEG_INFINITY, f64::NEG_INFINITY), f64::NEG_INFINITY);
    }

    #[test]
    fn orthogonal_small_noise_recovers() {
        let spec = CodeSpec::IEEE80211;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sa = source(120, &mut rng);
        let sb = source(120, &mut rng);
        let obs = observe(
            &conv_encode(&sa, &spec),
            &conv_encode(&sb, &spec),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            1e-6,
            &mut rng,
        );
        let d = psud_decode(&obs, &spec).unwrap();
        assert_eq!(d.bits_a, sa);
        assert_eq!(d.bits_b, sb);
    }

    #[test]
    fn silent_second_user_is_plain_viterbi() {
        let spec = CodeSpec::IEEE80211;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sa = source(100, &mut rng);
        let sb = vec![0; sa.len()];
        let noise_var = 0.8;
        let obs = observe(
            &conv_encode(&sa, &spec),
            &conv_encode(&sb, &spec),
            Complex64::from_polar(1.0, 0.4),
            Complex64::new(0.0, 0.0),
            noise_var,
            &mut rng,
        );
        let costs: Vec<[f64; 2]> = (0..obs.len())
            .map(|n| {
                let h = obs.h_a[n];
                [
                    (obs.y[n] - h).norm_sqr() / noise_var,
                    (obs.y[n] + h).norm_sqr() / noise_var,
                ]
            })
            .collect();
        let want = single_user_viterbi(&costs, &spec).unwrap();
        let got = psud_decode(&obs, &spec).unwrap();
        assert_eq!(got.bits_a, want.bits);
    }

    #[test]
    fn aligned_phase_worse_than_joint() {
        let spec = CodeSpec::IEEE80211;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let one = Complex64::new(1.0, 0.0);
        // 8 dB against the mean superposition power of 2.
        let noise_var = 2.0 / 10f64.powf(0.8);
        let (mut ej, mut ep) = (0, 0);
        for _ in 0..30 {
            let sa = source(200, &mut rng);
            let sb = source(200, &mut rng);
            let truth = SumBits::of(&[&sa, &sb]);
            let obs = observe(&conv_encode(&sa, &spec), &conv_encode(&sb, &spec), one, one, noise_var, &mut rng);
            ej += fsjd_decode(&obs, &spec).unwrap().sum.mismatches(&truth);
            ep += psud_decode(&obs, &spec).unwrap().sum.mismatches(&truth);
        }
        assert!(ej < ep, "joint {ej} vs separate {ep}");
    }

    #[test]
    fn rejects_zero_noise() {
        let z = Complex64::new(0.0, 0.0);
        let obs = SoftObservation {
            y: vec![z; 8],
            h_a: vec![z; 8],
            h_b: vec![z; 8],
            noise_var: 0.0,
        };
        assert!(matches!(
            psud_decode(&obs, &CodeSpec::K3),
            Err(Error::NonPositive(_))
        ));
    }
}
