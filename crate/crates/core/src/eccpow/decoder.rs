use super::{BitWord, ParityCheckMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecoderResult {
    pub converged: bool,
    pub word: BitWord,
    /// Flip rounds executed.
    pub iterations: u32,
}

/// Gallager-B hard-decision bit flipping.
///
/// Each round computes the syndrome; a zero syndrome stops with
/// `converged = true`. Otherwise every bit with more than `wc/2` unsatisfied
/// checks flips simultaneously. Decoding stops unconverged after `max_iter`
/// rounds, or earlier when no bit qualifies (the word is then a fixed point).
pub fn decode(h: &ParityCheckMatrix, received: &BitWord, max_iter: u32) -> Result<DecoderResult> {
    let n = h.n();
    if received.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: received.len(),
        });
    }
    let wc = h.params().wc;
    let mut word = received.clone();
    let mut syndrome = vec![0u8; h.m()];
    let mut flips: Vec<usize> = Vec::with_capacity(n);
    let mut iterations = 0;
    loop {
        let mut any = 0u8;
        for (r, s) in syndrome.iter_mut().enumerate() {
            *s = h.row(r).iter().fold(0u8, |acc, &c| acc ^ word.get(c as usize));
            any |= *s;
        }
        if any == 0 {
            return Ok(DecoderResult {
                converged: true,
                word,
                iterations,
            });
        }
        if iterations == max_iter {
            break;
        }
        flips.clear();
        for c in 0..n {
            let unsatisfied: u32 = h.col(c).iter().map(|&r| syndrome[r as usize] as u32).sum();
            if 2 * unsatisfied > wc {
                flips.push(c);
            }
        }
        if flips.is_empty() {
            break;
        }
        for &c in &flips {
            word.flip(c);
        }
        iterations += 1;
    }
    Ok(DecoderResult {
        converged: false,
        word,
        iterations,
    })
}
