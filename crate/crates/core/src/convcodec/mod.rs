//! Rate-1/2 convolutional codes and sum decoders for two superimposed users.
//!
//! Register convention: with current input `b` and state `s` (the previous
//! `L-1` inputs, most recent in the high bit), the register is
//! `r = b << (L-1) | s`, output `j` is `parity(r & g_j)` and the next state is
//! `r >> 1`. Coded bits are emitted in generator order, so stage `t` of the
//! trellis owns coded bits `2t` and `2t+1`.

mod joint;
pub mod oracle;
mod psud;
mod viterbi;

pub use joint::{
    branch_metric, fsjd_decode, rsjd_decode, JointDecode, JointTrellis, SoftObservation,
};
pub use psud::{psud_decode, PsudDecode};
pub use viterbi::{single_user_viterbi, ViterbiDecode};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constraint length and generator taps of a rate-1/2 feed-forward code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSpec {
    pub constraint_length: usize,
    pub generators: [u32; 2],
}

impl CodeSpec {
    /// The 802.11 code, generators 133 and 171 (octal).
    pub const IEEE80211: CodeSpec = CodeSpec {
        constraint_length: 7,
        generators: [0o133, 0o171],
    };

    /// Small code used for exhaustive checks, generators 7 and 5 (octal).
    pub const K3: CodeSpec = CodeSpec {
        constraint_length: 3,
        generators: [0o7, 0o5],
    };

    pub fn new(constraint_length: usize, generators: [u32; 2]) -> Result<Self> {
        let spec = Self {
            constraint_length,
            generators,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.constraint_length;
        if !(2..=8).contains(&l) {
            return Err(Error::Config(format!(
                "constraint length {l} outside 2..=8"
            )));
        }
        for &g in &self.generators {
            if g >> l != 0 || g & 1 == 0 || (g >> (l - 1)) & 1 == 0 {
                return Err(Error::Config(format!(
                    "generator {g:o} must have degree {} with both end taps set",
                    l - 1
                )));
            }
        }
        Ok(())
    }

    pub const fn rate_inverse(&self) -> usize {
        2
    }

    /// Encoder memory, `L-1`.
    pub fn memory(&self) -> usize {
        self.constraint_length - 1
    }

    pub fn num_states(&self) -> usize {
        1 << self.memory()
    }

    /// Output label (bit `j` = generator `j`) and next state for one input.
    pub fn step(&self, state: usize, input: u8) -> (u8, usize) {
        let r = (usize::from(input) << self.memory()) | state;
        let out = self
            .generators
            .iter()
            .enumerate()
            .fold(0u8, |acc, (j, &g)| {
                acc | ((((r as u32) & g).count_ones() as u8 & 1) << j)
            });
        (out, r >> 1)
    }
}

/// Append `L-1` zero tail bits so the encoder returns to state zero.
pub fn with_tail(source: &[u8], spec: &CodeSpec) -> Vec<u8> {
    let mut v = Vec::with_capacity(source.len() + spec.memory());
    v.extend_from_slice(source);
    v.resize(source.len() + spec.memory(), 0);
    v
}

/// Encode `source`, which should already end in `L-1` zeros.
pub fn conv_encode(source: &[u8], spec: &CodeSpec) -> Vec<u8> {
    let mut state = 0;
    let mut out = Vec::with_capacity(source.len() * spec.rate_inverse());
    for &b in source {
        let (label, next) = spec.step(state, b);
        out.push(label & 1);
        out.push(label >> 1);
        state = next;
    }
    out
}

/// Single-user trellis tables.
#[derive(Debug, Clone)]
pub struct Trellis {
    pub spec: CodeSpec,
    /// `labels[2*s + b]`: output label leaving state `s` on input `b`.
    pub labels: Vec<u8>,
    /// `next[2*s + b]`: successor state.
    pub next: Vec<usize>,
}

impl Trellis {
    pub fn new(spec: CodeSpec) -> Self {
        let n = spec.num_states();
        let mut labels = Vec::with_capacity(2 * n);
        let mut next = Vec::with_capacity(2 * n);
        for s in 0..n {
            for b in 0..2u8 {
                let (l, ns) = spec.step(s, b);
                labels.push(l);
                next.push(ns);
            }
        }
        Self { spec, labels, next }
    }

    pub fn num_states(&self) -> usize {
        self.spec.num_states()
    }

    /// Input bit carried by every edge entering `state`.
    pub fn input_into(&self, state: usize) -> u8 {
        (state >> (self.spec.memory() - 1)) as u8
    }

    /// The two predecessors of `state`, smaller first.
    pub fn predecessors(&self, state: usize) -> [usize; 2] {
        let base = (state << 1) & (self.num_states() - 1);
        [base, base | 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(CodeSpec::IEEE80211.validate().is_ok());
        assert!(CodeSpec::K3.validate().is_ok());
        assert!(CodeSpec::new(3, [0o7, 0o6]).is_err());
        assert!(CodeSpec::new(3, [0o3, 0o5]).is_err());
        assert!(CodeSpec::new(1, [1, 1]).is_err());
    }

    #[test]
    fn zero_in_zero_out() {
        let src = vec![0u8; 40];
        assert!(conv_encode(&src, &CodeSpec::IEEE80211).iter().all(|&b| b == 0));
    }

    #[test]
    fn impulse_response_is_interleaved_generators() {
        let spec = CodeSpec::IEEE80211;
        let mut src = vec![0u8; 7];
        src[0] = 1;
        let out = conv_encode(&src, &spec);
        // 133 = 1011011, 171 = 1111001, read from the high tap down.
        let g0 = [1, 0, 1, 1, 0, 1, 1];
        let g1 = [1, 1, 1, 1, 0, 0, 1];
        let want: Vec<u8> = g0.iter().zip(&g1).flat_map(|(&a, &b)| [a, b]).collect();
        assert_eq!(out, want);
    }

    #[test]
    fn hand_trace_k3() {
        let out = conv_encode(&[1, 1, 0, 0, 0, 0, 0, 0], &CodeSpec::K3);
        assert_eq!(
            out,
            vec![1, 1, 0, 1, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0]
        );
    }

    #[test]
    fn tail_returns_to_zero() {
        let spec = CodeSpec::IEEE80211;
        let src = with_tail(&[1, 0, 1, 1, 1, 0, 1], &spec);
        let state = src.iter().fold(0, |s, &b| spec.step(s, b).1);
        assert_eq!(state, 0);
        assert_eq!(conv_encode(&src, &spec).len(), 2 * src.len());
    }

    #[test]
    fn trellis_predecessors_consistent() {
        for spec in [CodeSpec::K3, CodeSpec::IEEE80211] {
            let t = Trellis::new(spec);
            for ns in 0..t.num_states() {
                for p in t.predecessors(ns) {
                    let b = t.input_into(ns);
                    assert_eq!(t.next[2 * p + b as usize], ns);
                }
            }
        }
    }
}
