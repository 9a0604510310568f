use super::{CodeSpec, Trellis};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ViterbiDecode {
    /// Decoded source bits, tail included.
    pub bits: Vec<u8>,
    pub metric: f64,
}

/// Conventional soft Viterbi decoder over a terminated codeword.
///
/// `costs[n][c]` is the cost of coded bit `n` taking value `c`
/// (typically a negative log-likelihood). Ties go to the smaller state.
pub fn single_user_viterbi(costs: &[[f64; 2]], spec: &CodeSpec) -> Result<ViterbiDecode> {
    spec.validate()?;
    let r = spec.rate_inverse();
    if costs.len() % r != 0 || costs.len() < r * spec.memory() {
        return Err(Error::Length {
            context: "single-user codeword",
            expected: r * (costs.len() / r).max(spec.memory()),
            actual: costs.len(),
        });
    }
    let stages = costs.len() / r;
    let trellis = Trellis::new(*spec);
    let n = trellis.num_states();

    let mut pm = vec![f64::INFINITY; n];
    let mut next = vec![f64::INFINITY; n];
    pm[0] = 0.0;
    let mut choice = vec![0u8; stages * n];

    for t in 0..stages {
        let c0 = costs[2 * t];
        let c1 = costs[2 * t + 1];
        let bm = |label: u8| c0[(label & 1) as usize] + c1[(label >> 1) as usize];
        for s in 0..n {
            let b = trellis.input_into(s) as usize;
            let mut best = f64::INFINITY;
            let mut pick = 0u8;
            for (k, p) in trellis.predecessors(s).into_iter().enumerate() {
                let cand = pm[p] + bm(trellis.labels[2 * p + b]);
                if cand < best {
                    best = cand;
                    pick = k as u8;
                }
            }
            next[s] = best;
            choice[t * n + s] = pick;
        }
        std::mem::swap(&mut pm, &mut next);
    }

    let mut bits = vec![0u8; stages];
    let mut s = 0;
    for t in (0..stages).rev() {
        bits[t] = trellis.input_into(s);
        s = trellis.predecessors(s)[choice[t * n + s] as usize];
    }
    Ok(ViterbiDecode {
        bits,
        metric: pm[0],
    })
}
