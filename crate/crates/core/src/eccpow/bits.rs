use std::fmt;

use crate::error::{Error, Result};

/// An `n`-bit vector, one byte per bit (each 0 or 1).
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitWord(Vec<u8>);

impl BitWord {
    pub fn zeros(n: usize) -> Self {
        BitWord(vec![0; n])
    }

    /// Panics if any entry is not 0 or 1.
    pub fn from_bits(bits: Vec<u8>) -> Self {
        assert!(bits.iter().all(|&b| b <= 1), "bits must be 0 or 1");
        BitWord(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] ^= 1;
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    /// Packs most-significant-bit first; the final byte is zero padded.
    pub fn to_packed(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.0.len().div_ceil(8)];
        for (i, &b) in self.0.iter().enumerate() {
            out[i / 8] |= b << (7 - (i % 8));
        }
        out
    }

    /// Inverse of [`to_packed`](Self::to_packed). Non-zero padding is rejected
    /// so that every word has exactly one encoding.
    pub fn from_packed(bytes: &[u8], n: usize) -> Result<Self> {
        if bytes.len() != n.div_ceil(8) {
            return Err(Error::Decode(format!(
                "{} packed bytes cannot hold exactly {n} bits",
                bytes.len()
            )));
        }
        let bits: Vec<u8> = (0..n).map(|i| (bytes[i / 8] >> (7 - (i % 8))) & 1).collect();
        let word = BitWord(bits);
        if word.to_packed() != bytes {
            return Err(Error::Decode("non-zero padding bits".into()));
        }
        Ok(word)
    }
}

impl fmt::Debug for BitWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.0.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect();
        write!(f, "BitWord({s})")
    }
}
