use serde::{Deserialize, Serialize};

use super::BitWord;
use crate::crypto::{hash_parts, Digest256};
use crate::error::{Error, Result};

/// Regular LDPC code shape and decoder budget for one difficulty level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeParams {
    /// Codeword length in bits.
    pub n: u32,
    /// Column weight.
    pub wc: u32,
    /// Row weight.
    pub wr: u32,
    pub level: u32,
    pub max_iter: u32,
}

impl CodeParams {
    pub fn new(n: u32, wc: u32, wr: u32, level: u32, max_iter: u32) -> Result<Self> {
        let p = CodeParams {
            n,
            wc,
            wr,
            level,
            max_iter,
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks the shape invariants. Besides `wr | n*wc`, the band
    /// construction needs `wr | n` so every band has whole rows.
    pub fn validate(&self) -> Result<()> {
        let bad = |why: String| Err(Error::InvalidCodeParams(why));
        if self.wc < 2 {
            return bad(format!("wc = {} must be at least 2", self.wc));
        }
        if self.wr <= self.wc {
            return bad(format!("wr = {} must exceed wc = {}", self.wr, self.wc));
        }
        if self.n == 0 || !(self.n as u64 * self.wc as u64).is_multiple_of(self.wr as u64) {
            return bad(format!(
                "n*wc = {}*{} not divisible by wr = {}",
                self.n, self.wc, self.wr
            ));
        }
        if !self.n.is_multiple_of(self.wr) {
            return bad(format!("n = {} not divisible by wr = {}", self.n, self.wr));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        Ok(())
    }

    /// Number of parity checks, `n*wc/wr`.
    pub fn rows(&self) -> usize {
        (self.n * self.wc / self.wr) as usize
    }

    fn rows_per_band(&self) -> usize {
        (self.n / self.wr) as usize
    }
}

/// Sparse binary parity-check matrix, stored as row and column adjacency.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParityCheckMatrix {
    seed: Digest256,
    params: CodeParams,
    rows: Vec<Vec<u32>>,
    cols: Vec<Vec<u32>>,
}

impl ParityCheckMatrix {
    pub fn seed(&self) -> &Digest256 {
        &self.seed
    }

    pub fn params(&self) -> &CodeParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.n as usize
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    /// Column indices of the ones in `row`, ascending.
    pub fn row(&self, row: usize) -> &[u32] {
        &self.rows[row]
    }

    /// Row indices of the ones in `col`, ascending.
    pub fn col(&self, col: usize) -> &[u32] {
        &self.cols[col]
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.rows[row].binary_search(&(col as u32)).is_ok()
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        (0..self.m())
            .map(|r| (0..self.n()).map(|c| self.get(r, c) as u8).collect())
            .collect()
    }

    /// `H * word` over GF(2).
    pub fn syndrome(&self, word: &BitWord) -> Result<Vec<u8>> {
        if word.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                actual: word.len(),
            });
        }
        Ok(self
            .rows
            .iter()
            .map(|cols| cols.iter().fold(0u8, |acc, &c| acc ^ word.get(c as usize)))
            .collect())
    }

    pub fn is_codeword(&self, word: &BitWord) -> bool {
        self.syndrome(word).is_ok_and(|s| s.iter().all(|&b| b == 0))
    }
}

/// Counter-mode byte stream: block `j` is `SHA-256(key || j)`, `j` as u32 BE.
struct HashStream {
    key: Digest256,
    counter: u32,
    block: [u8; 32],
    pos: usize,
}

impl HashStream {
    fn new(key: Digest256) -> Self {
        HashStream {
            key,
            counter: 0,
            block: [0; 32],
            pos: 32,
        }
    }

    fn next_u32(&mut self) -> u32 {
        if self.pos == 32 {
            self.block = hash_parts(&[self.key.as_bytes(), &self.counter.to_be_bytes()]).0;
            self.counter = self.counter.wrapping_add(1);
            self.pos = 0;
        }
        let v = u32::from_be_bytes(self.block[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        v
    }

    /// Unbiased draw from `0..bound` by rejection.
    fn below(&mut self, bound: u32) -> u32 {
        debug_assert!(bound > 0);
        let limit = u32::MAX - (u32::MAX % bound);
        loop {
            let v = self.next_u32();
            if v < limit {
                return v % bound;
            }
        }
    }
}

fn band_permutation(seed: &Digest256, band: u32, n: usize) -> Vec<u32> {
    let key = hash_parts(&[seed.as_bytes(), &band.to_be_bytes()]);
    let mut stream = HashStream::new(key);
    let mut perm: Vec<u32> = (0..n as u32).collect();
    for i in (1..n).rev() {
        let j = stream.below(i as u32 + 1) as usize;
        perm.swap(i, j);
    }
    perm
}

/// Gallager construction: band 0 puts `wr` consecutive ones in each row;
/// band `b >= 1` is band 0 with its columns permuted by a Fisher-Yates
/// shuffle keyed by `SHA-256(seed || b)`.
pub fn gen_matrix(seed: &Digest256, params: &CodeParams) -> Result<ParityCheckMatrix> {
    params.validate()?;
    let n = params.n as usize;
    let wr = params.wr as usize;
    let per_band = params.rows_per_band();
    let mut rows: Vec<Vec<u32>> = Vec::with_capacity(params.rows());
    for r in 0..per_band {
        rows.push((r * wr..(r + 1) * wr).map(|c| c as u32).collect());
    }
    for band in 1..params.wc {
        let perm = band_permutation(seed, band, n);
        for r in 0..per_band {
            let mut row: Vec<u32> = rows[r].iter().map(|&c| perm[c as usize]).collect();
            row.sort_unstable();
            rows.push(row);
        }
    }
    let mut cols: Vec<Vec<u32>> = vec![Vec::with_capacity(params.wc as usize); n];
    for (r, row) in rows.iter().enumerate() {
        for &c in row {
            cols[c as usize].push(r as u32);
        }
    }
    Ok(ParityCheckMatrix {
        seed: *seed,
        params: *params,
        rows,
        cols,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::hash;

    fn params(n: u32, wc: u32, wr: u32) -> CodeParams {
        CodeParams::new(n, wc, wr, 0, 20).unwrap()
    }

    fn weights_ok(h: &ParityCheckMatrix) -> bool {
        let p = h.params();
        let dense = h.to_dense();
        dense
            .iter()
            .all(|row| row.iter().map(|&b| b as u32).sum::<u32>() == p.wr)
            && (0..h.n()).all(|c| dense.iter().map(|row| row[c] as u32).sum::<u32>() == p.wc)
    }

    #[test]
    fn small_matrix_has_forced_shape() {
        let h = gen_matrix(&hash(b"seed"), &params(8, 2, 4)).unwrap();
        assert_eq!((h.m(), h.n()), (4, 8));
        assert!(weights_ok(&h));
        assert_eq!(h.row(0), &[0, 1, 2, 3]);
        assert_eq!(h.row(1), &[4, 5, 6, 7]);
    }

    #[test]
    fn regeneration_is_bit_exact() {
        let p = params(48, 3, 6);
        let a = gen_matrix(&hash(b"x"), &p).unwrap();
        let b = gen_matrix(&hash(b"x"), &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_dense(), b.to_dense());
    }

    #[test]
    fn one_bit_seed_changes_give_distinct_matrices() {
        let p = params(48, 3, 6);
        for i in 0..128u32 {
            let seed = hash(&i.to_be_bytes());
            let mut flipped = seed;
            flipped.0[(i % 32) as usize] ^= 1 << (i % 8);
            let a = gen_matrix(&seed, &p).unwrap();
            let b = gen_matrix(&flipped, &p).unwrap();
            assert_ne!(a.to_dense(), b.to_dense(), "seed pair {i}");
        }
    }

    #[test]
    fn weights_hold_across_shapes_and_seeds() {
        for (n, wc, wr) in [(12, 3, 6), (16, 2, 4), (24, 3, 4), (60, 4, 10), (384, 3, 6)] {
            for s in 0..5u8 {
                let h = gen_matrix(&hash(&[s]), &params(n, wc, wr)).unwrap();
                assert!(weights_ok(&h), "n={n} wc={wc} wr={wr}");
            }
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(CodeParams::new(8, 1, 4, 0, 1).is_err());
        assert!(CodeParams::new(8, 4, 4, 0, 1).is_err());
        assert!(CodeParams::new(10, 2, 4, 0, 1).is_err());
        assert!(CodeParams::new(32, 3, 6, 0, 1).is_err());
        assert!(CodeParams::new(8, 2, 4, 0, 0).is_err());
        assert!(CodeParams::new(0, 2, 4, 0, 1).is_err());
        let bad = CodeParams {
            n: 10,
            wc: 2,
            wr: 4,
            level: 0,
            max_iter: 5,
        };
        assert!(gen_matrix(&Digest256::ZERO, &bad).is_err());
    }

    #[test]
    fn syndrome_checks_dimension() {
        let h = gen_matrix(&Digest256::ZERO, &params(8, 2, 4)).unwrap();
        assert!(matches!(
            h.syndrome(&BitWord::zeros(7)),
            Err(Error::DimensionMismatch { expected: 8, actual: 7 })
        ));
        assert!(h.is_codeword(&BitWord::zeros(8)));
    }

    #[test]
    fn rejection_sampler_stays_in_range() {
        let mut s = HashStream::new(hash(b"k"));
        for bound in 1..200u32 {
            assert!(s.below(bound) < bound);
        }
    }
}
