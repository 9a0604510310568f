//! Full-state and reduced-state Viterbi search over the two-user product trellis.

use num_complex::Complex64;

use super::{CodeSpec, Trellis};
use crate::error::{Error, Result};
use crate::quantizer::SumBits;

/// Received samples per coded bit with both users' effective channels.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftObservation {
    pub y: Vec<Complex64>,
    pub h_a: Vec<Complex64>,
    pub h_b: Vec<Complex64>,
    /// Total complex noise variance per sample.
    pub noise_var: f64,
}

impl SoftObservation {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Check lengths against `spec` and return the number of trellis stages.
    pub fn stages(&self, spec: &CodeSpec) -> Result<usize> {
        for (context, len) in [("channel A", self.h_a.len()), ("channel B", self.h_b.len())] {
            if len != self.y.len() {
                return Err(Error::Length {
                    context,
                    expected: self.y.len(),
                    actual: len,
                });
            }
        }
        let r = spec.rate_inverse();
        if self.y.len() % r != 0 || self.y.len() < r * spec.memory() {
            return Err(Error::Length {
                context: "terminated codeword",
                expected: r * (self.y.len() / r).max(spec.memory()),
                actual: self.y.len(),
            });
        }
        Ok(self.y.len() / r)
    }

    /// The four constellation distances of cell `n`, indexed `[bit_a][bit_b]`.
    pub(crate) fn cell_distances(&self, n: usize) -> [[f64; 2]; 2] {
        let mut d = [[0.0; 2]; 2];
        for (ba, row) in d.iter_mut().enumerate() {
            for (bb, v) in row.iter_mut().enumerate() {
                *v = branch_metric(self.y[n], self.h_a[n], self.h_b[n], bpsk(ba), bpsk(bb));
            }
        }
        d
    }

    /// Branch costs of stage `t` for every pair of output labels, `[label_a * 4 + label_b]`.
    pub(crate) fn stage_costs(&self, t: usize) -> [f64; 16] {
        let d0 = self.cell_distances(2 * t);
        let d1 = self.cell_distances(2 * t + 1);
        let mut bm = [0.0; 16];
        for la in 0..4 {
            for lb in 0..4 {
                bm[la * 4 + lb] = d0[la & 1][lb & 1] + d1[la >> 1][lb >> 1];
            }
        }
        bm
    }
}

/// BPSK symbol of a bit: 0 → +1, 1 → -1.
pub(crate) fn bpsk(bit: usize) -> f64 {
    1.0 - 2.0 * bit as f64
}

/// Squared distance between `y` and the superposition `h_a x_a + h_b x_b`.
pub fn branch_metric(y: Complex64, h_a: Complex64, h_b: Complex64, x_a: f64, x_b: f64) -> f64 {
    (y - h_a * x_a - h_b * x_b).norm_sqr()
}

/// Product of two copies of a single-user trellis.
///
/// Joint state `j = s_a << (L-1) | s_b`, so lower indices favour user A's
/// lower states; every tie in the search goes to the smaller index.
#[derive(Debug, Clone)]
pub struct JointTrellis {
    pub single: Trellis,
}

impl JointTrellis {
    pub fn new(spec: CodeSpec) -> Self {
        Self {
            single: Trellis::new(spec),
        }
    }

    pub fn num_states(&self) -> usize {
        self.single.num_states() * self.single.num_states()
    }

    fn shift(&self) -> usize {
        self.single.spec.memory()
    }

    pub fn split(&self, joint: usize) -> (usize, usize) {
        (joint >> self.shift(), joint & (self.single.num_states() - 1))
    }

    pub fn join(&self, a: usize, b: usize) -> usize {
        (a << self.shift()) | b
    }

    /// Input bits `(a, b)` on every edge entering `joint`.
    pub fn inputs_into(&self, joint: usize) -> (u8, u8) {
        let (a, b) = self.split(joint);
        (self.single.input_into(a), self.single.input_into(b))
    }

    /// The four edges leaving `joint`: `(successor, label_a, label_b, inputs)`.
    pub fn successors(&self, joint: usize) -> [(usize, u8, u8, (u8, u8)); 4] {
        let (a, b) = self.split(joint);
        let t = &self.single;
        let mut out = [(0, 0, 0, (0, 0)); 4];
        for (i, e) in out.iter_mut().enumerate() {
            let (ia, ib) = ((i >> 1) as u8, (i & 1) as u8);
            let ea = 2 * a + ia as usize;
            let eb = 2 * b + ib as usize;
            *e = (
                self.join(t.next[ea], t.next[eb]),
                t.labels[ea],
                t.labels[eb],
                (ia, ib),
            );
        }
        out
    }

    /// The four predecessors of `joint` in increasing index order.
    pub fn predecessors(&self, joint: usize) -> [usize; 4] {
        let (a, b) = self.split(joint);
        let pa = self.single.predecessors(a);
        let pb = self.single.predecessors(b);
        [
            self.join(pa[0], pb[0]),
            self.join(pa[0], pb[1]),
            self.join(pa[1], pb[0]),
            self.join(pa[1], pb[1]),
        ]
    }
}

/// Result of a joint search.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDecode {
    /// Position-wise sum of the two decoded sequences, tail included.
    pub sum: SumBits,
    pub bits_a: Vec<u8>,
    pub bits_b: Vec<u8>,
    /// Total squared distance of the decoded codeword pair.
    pub metric: f64,
}

/// Traceback record: per stage and state, which of the four predecessors won.
struct Survivors {
    choice: Vec<u8>,
    states: usize,
}

impl Survivors {
    fn new(stages: usize, states: usize) -> Self {
        Self {
            choice: vec![0; stages * states],
            states,
        }
    }

    fn set(&mut self, stage: usize, state: usize, c: u8) {
        self.choice[stage * self.states + state] = c;
    }

    fn trace(&self, trellis: &JointTrellis, end: usize, stages: usize, metric: f64) -> JointDecode {
        let mut bits_a = vec![0u8; stages];
        let mut bits_b = vec![0u8; stages];
        let mut state = end;
        for t in (0..stages).rev() {
            let (ia, ib) = trellis.inputs_into(state);
            bits_a[t] = ia;
            bits_b[t] = ib;
            let c = self.choice[t * self.states + state] as usize;
            state = trellis.predecessors(state)[c];
        }
        debug_assert_eq!(state, 0, "path does not start in the zero state");
        let sum = SumBits(bits_a.iter().zip(&bits_b).map(|(a, b)| a + b).collect());
        JointDecode {
            sum,
            bits_a,
            bits_b,
            metric,
        }
    }
}

/// Minimum-distance codeword pair over the full joint trellis.
pub fn fsjd_decode(obs: &SoftObservation, spec: &CodeSpec) -> Result<JointDecode> {
    spec.validate()?;
    let stages = obs.stages(spec)?;
    let trellis = JointTrellis::new(*spec);
    let n = trellis.num_states();
    let single = &trellis.single;
    let shift = spec.memory();
    let low = single.num_states() - 1;

    let mut pm = vec![f64::INFINITY; n];
    let mut next = vec![f64::INFINITY; n];
    pm[0] = 0.0;
    let mut surv = Survivors::new(stages, n);

    for t in 0..stages {
        let bm = obs.stage_costs(t);
        for j in 0..n {
            let (ja, jb) = (j >> shift, j & low);
            let ia = single.input_into(ja) as usize;
            let ib = single.input_into(jb) as usize;
            let [pa0, pa1] = single.predecessors(ja);
            let [pb0, pb1] = single.predecessors(jb);
            let mut best = f64::INFINITY;
            let mut choice = 0u8;
            for (c, (pa, pb)) in [(pa0, pb0), (pa0, pb1), (pa1, pb0), (pa1, pb1)]
                .into_iter()
                .enumerate()
            {
                let la = single.labels[2 * pa + ia] as usize;
                let lb = single.labels[2 * pb + ib] as usize;
                let cand = pm[(pa << shift) | pb] + bm[la * 4 + lb];
                if cand < best {
                    best = cand;
                    choice = c as u8;
                }
            }
            next[j] = best;
            surv.set(t, j, choice);
        }
        std::mem::swap(&mut pm, &mut next);
    }
    Ok(surv.trace(&trellis, 0, stages, pm[0]))
}

/// Joint search keeping only the `max_states` best states after every stage.
///
/// Survivors are the smallest `(metric, state)` pairs. If the zero state does
/// not survive the last stage, traceback starts from the best survivor.
pub fn rsjd_decode(obs: &SoftObservation, spec: &CodeSpec, max_states: usize) -> Result<JointDecode> {
    spec.validate()?;
    if max_states < 1 {
        return Err(Error::Config("reduced-state count must be at least 1".into()));
    }
    let stages = obs.stages(spec)?;
    let trellis = JointTrellis::new(*spec);
    let n = trellis.num_states();
    let single = &trellis.single;
    let shift = spec.memory();
    let low = single.num_states() - 1;

    let mut pm = vec![f64::INFINITY; n];
    let mut next = vec![f64::INFINITY; n];
    pm[0] = 0.0;
    let mut active: Vec<usize> = vec![0];
    let mut touched: Vec<usize> = Vec::with_capacity(4 * max_states.min(n));
    let mut surv = Survivors::new(stages, n);

    for t in 0..stages {
        let bm = obs.stage_costs(t);
        touched.clear();
        // Visiting states in increasing order keeps ties on the smaller
        // predecessor, matching the full search.
        for &s in &active {
            let (sa, sb) = (s >> shift, s & low);
            let base = pm[s];
            for c in 0..4usize {
                let (ia, ib) = (c >> 1, c & 1);
                let ea = 2 * sa + ia;
                let eb = 2 * sb + ib;
                let j = (single.next[ea] << shift) | single.next[eb];
                let la = single.labels[ea] as usize;
                let lb = single.labels[eb] as usize;
                let cand = base + bm[la * 4 + lb];
                if cand < next[j] {
                    if next[j] == f64::INFINITY {
                        touched.push(j);
                    }
                    next[j] = cand;
                    // Predecessor rank within `predecessors(j)`.
                    surv.set(t, j, (((sa & 1) << 1) | (sb & 1)) as u8);
                }
            }
        }
        for &s in &active {
            pm[s] = f64::INFINITY;
        }
        if touched.len() > max_states {
            let by_rank = |x: &usize, y: &usize| next[*x].total_cmp(&next[*y]).then(x.cmp(y));
            touched.select_nth_unstable_by(max_states - 1, by_rank);
            for &s in &touched[max_states..] {
                next[s] = f64::INFINITY;
            }
            touched.truncate(max_states);
        }
        touched.sort_unstable();
        std::mem::swap(&mut pm, &mut next);
        std::mem::swap(&mut active, &mut touched);
    }

    let end = if pm[0].is_finite() {
        0
    } else {
        *active
            .iter()
            .min_by(|x, y| pm[**x].total_cmp(&pm[**y]).then(x.cmp(y)))
            .expect("at least one survivor")
    };
    Ok(surv.trace(&trellis, end, stages, pm[end]))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::convcodec::{conv_encode, with_tail};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    pub(crate) fn observe(
        ca: &[u8],
        cb: &[u8],
        h_a: Complex64,
        h_b: Complex64,
        noise_var: f64,
        rng: &mut impl Rng,
    ) -> SoftObservation {
        let s = (noise_var / 2.0).sqrt();
        let y = ca
            .iter()
            .zip(cb)
            .map(|(&a, &b)| {
                let n = Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * s;
                h_a * bpsk(a as usize) + h_b * bpsk(b as usize) + n
            })
            .collect::<Vec<_>>();
        SoftObservation {
            h_a: vec![h_a; y.len()],
            h_b: vec![h_b; y.len()],
            y,
            noise_var,
        }
    }

    fn random_source(len: usize, spec: &CodeSpec, rng: &mut impl Rng) -> Vec<u8> {
        let s: Vec<u8> = (0..len).map(|_| rng.random_range(0..2)).collect();
        with_tail(&s, spec)
    }

    #[test]
    fn branch_metric_examples() {
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        assert_eq!(branch_metric(Complex64::new(0.0, 0.0), one, i, 1.0, 1.0), 2.0);
        let y = one * -1.0 + i * 1.0;
        assert_eq!(branch_metric(y, one, i, -1.0, 1.0), 0.0);
        let two = Complex64::new(2.0, 0.0);
        assert_eq!(branch_metric(two, one, one, 1.0, 1.0), 0.0);
        assert_eq!(branch_metric(two, one, one, 1.0, -1.0), 4.0);
        assert_eq!(branch_metric(two, one, one, -1.0, -1.0), 16.0);
    }

    #[test]
    fn joint_edges_are_product_of_single_edges() {
        for spec in [CodeSpec::K3, CodeSpec::IEEE80211] {
            let jt = JointTrellis::new(spec);
            let mut incoming = vec![0usize; jt.num_states()];
            for j in 0..jt.num_states() {
                let (a, b) = jt.split(j);
                for (succ, la, lb, (ia, ib)) in jt.successors(j) {
                    let (wa, na) = spec.step(a, ia);
                    let (wb, nb) = spec.step(b, ib);
                    assert_eq!((la, lb), (wa, wb));
                    assert_eq!(succ, jt.join(na, nb));
                    assert!(jt.predecessors(succ).contains(&j));
                    assert_eq!(jt.inputs_into(succ), (ia, ib));
                    incoming[succ] += 1;
                }
            }
            assert!(incoming.iter().all(|&c| c == 4));
        }
    }

    #[test]
    fn noiseless_orthogonal_recovers_both_users() {
        let spec = CodeSpec::IEEE80211;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let sa = random_source(60, &spec, &mut rng);
            let sb = random_source(60, &spec, &mut rng);
            let obs = observe(
                &conv_encode(&sa, &spec),
                &conv_encode(&sb, &spec),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 1.0),
                0.0,
                &mut rng,
            );
            let d = fsjd_decode(&obs, &spec).unwrap();
            assert_eq!(d.bits_a, sa);
            assert_eq!(d.bits_b, sb);
            assert_eq!(d.metric, 0.0);
            let r1 = rsjd_decode(&obs, &spec, 1).unwrap();
            assert_eq!(r1.sum, d.sum);
        }
    }

    #[test]
    fn aligned_swap_keeps_sum() {
        let spec = CodeSpec::K3;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let one = Complex64::new(1.0, 0.0);
        for _ in 0..20 {
            let sa = random_source(10, &spec, &mut rng);
            let sb = random_source(10, &spec, &mut rng);
            let ca = conv_encode(&sa, &spec);
            let cb = conv_encode(&sb, &spec);
            let o1 = observe(&ca, &cb, one, one, 0.0, &mut rng);
            let o2 = observe(&cb, &ca, one, one, 0.0, &mut rng);
            let d1 = fsjd_decode(&o1, &spec).unwrap();
            let d2 = fsjd_decode(&o2, &spec).unwrap();
            assert_eq!(d1.metric, 0.0);
            assert_eq!(d2.metric, 0.0);
            assert_eq!(d1.sum, d2.sum);
        }
    }

    #[test]
    fn full_reduced_search_is_bit_identical() {
        let spec = CodeSpec::IEEE80211;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..20 {
            let sa = random_source(80, &spec, &mut rng);
            let sb = random_source(80, &spec, &mut rng);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let obs = observe(
                &conv_encode(&sa, &spec),
                &conv_encode(&sb, &spec),
                Complex64::new(1.0, 0.0),
                Complex64::from_polar(1.0, phase),
                0.3 + 0.1 * trial as f64,
                &mut rng,
            );
            let f = fsjd_decode(&obs, &spec).unwrap();
            let r = rsjd_decode(&obs, &spec, 4096).unwrap();
            assert_eq!(f, r);
        }
    }

    #[test]
    fn all_ties_decode_to_zero() {
        let spec = CodeSpec::K3;
        let n = 2 * 8;
        let obs = SoftObservation {
            y: vec![Complex64::new(0.0, 0.0); n],
            h_a: vec![Complex64::new(0.0, 0.0); n],
            h_b: vec![Complex64::new(0.0, 0.0); n],
            noise_var: 1.0,
        };
        let d = fsjd_decode(&obs, &spec).unwrap();
        assert!(d.bits_a.iter().chain(&d.bits_b).all(|&b| b == 0));
        let r = rsjd_decode(&obs, &spec, 3).unwrap();
        assert_eq!(r, d);
    }

    #[test]
    fn rejects_bad_lengths() {
        let spec = CodeSpec::K3;
        let z = Complex64::new(0.0, 0.0);
        let obs = SoftObservation {
            y: vec![z; 7],
            h_a: vec![z; 7],
            h_b: vec![z; 7],
            noise_var: 1.0,
        };
        assert!(fsjd_decode(&obs, &spec).is_err());
        let obs = SoftObservation {
            y: vec![z; 8],
            h_a: vec![z; 6],
            h_b: vec![z; 8],
            noise_var: 1.0,
        };
        assert!(matches!(fsjd_decode(&obs, &spec), Err(Error::Length { .. })));
        let obs = SoftObservation {
            y: vec![z; 8],
            h_a: vec![z; 8],
            h_b: vec![z; 8],
            noise_var: 1.0,
        };
        assert!(rsjd_decode(&obs, &spec, 0).is_err());
    }

    #[test]
    fn pruned_zero_state_falls_back_to_best_survivor() {
        // With one survivor the greedy path need not end in state zero.
        let spec = CodeSpec::K3;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let one = Complex64::new(1.0, 0.0);
        let mut saw_fallback = false;
        for _ in 0..200 {
            let sa = random_source(6, &spec, &mut rng);
            let sb = random_source(6, &spec, &mut rng);
            let obs = observe(&conv_encode(&sa, &spec), &conv_encode(&sb, &spec), one, one, 4.0, &mut rng);
            let d = rsjd_decode(&obs, &spec, 1).unwrap();
            assert!(d.metric.is_finite());
            let tail_zero = d.bits_a[6..].iter().chain(&d.bits_b[6..]).all(|&b| b == 0);
            saw_fallback |= !tail_zero;
        }
        assert!(saw_fallback);
    }
}
