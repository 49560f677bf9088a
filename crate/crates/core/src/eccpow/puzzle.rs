use super::{decode, gen_matrix, BitWord, CodeParams, ParityCheckMatrix};
use crate::chain::BlockHeader;
use crate::crypto::{self, hash_parts, Digest256, PublicKey, SecretKey, Signature};
use crate::error::{Error, Result};

/// Solution attached to a block: the nonce, the coinbase key's signature over
/// the header preimage with that nonce, and the decoded codeword.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PocProof {
    pub nonce: u64,
    pub header_signature: Signature,
    pub codeword: BitWord,
}

/// Concatenates `SHA-256(out || counter)` for counter = 0, 1, ... (u32 BE)
/// and keeps the first `n` bits, most significant bit first.
pub fn expand_hash(out: &Digest256, n: usize) -> BitWord {
    let mut bits = Vec::with_capacity(n);
    let mut counter: u32 = 0;
    while bits.len() < n {
        let block = hash_parts(&[out.as_bytes(), &counter.to_be_bytes()]);
        for byte in block.0 {
            for k in (0..8).rev() {
                if bits.len() == n {
                    break;
                }
                bits.push((byte >> k) & 1);
            }
        }
        counter += 1;
    }
    BitWord::from_bits(bits)
}

/// A puzzle instance for one parent: the matrix is generated once and reused
/// across nonces.
#[derive(Clone, Debug)]
pub struct Puzzle {
    matrix: ParityCheckMatrix,
}

/// Result of scanning a nonce range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveOutcome {
    pub proof: Option<PocProof>,
    pub attempts: u64,
    pub decode_iterations: u64,
}

impl Puzzle {
    pub fn new(prev_hash: &Digest256, params: &CodeParams) -> Result<Self> {
        Ok(Puzzle {
            matrix: gen_matrix(prev_hash, params)?,
        })
    }

    pub fn matrix(&self) -> &ParityCheckMatrix {
        &self.matrix
    }

    /// One attempt at `nonce`. Returns the proof on success and the number of
    /// decoder rounds spent either way.
    pub fn attempt(
        &self,
        template: &BlockHeader,
        secret_key: &SecretKey,
        nonce: u64,
    ) -> Result<(Option<PocProof>, u32)> {
        let mut header = template.clone();
        header.nonce = nonce;
        let signature = crypto::sign(secret_key, &header.signing_preimage());
        let out = crypto::hash(signature.as_bytes());
        let received = expand_hash(&out, self.matrix.n());
        let d = decode(&self.matrix, &received, self.matrix.params().max_iter)?;
        let proof = d.converged.then_some(PocProof {
            nonce,
            header_signature: signature,
            codeword: d.word,
        });
        Ok((proof, d.iterations))
    }

    pub fn solve_range(
        &self,
        template: &BlockHeader,
        secret_key: &SecretKey,
        nonce_start: u64,
        nonce_limit: u64,
    ) -> Result<SolveOutcome> {
        let mut outcome = SolveOutcome {
            proof: None,
            attempts: 0,
            decode_iterations: 0,
        };
        for nonce in nonce_start..nonce_limit {
            let (proof, iterations) = self.attempt(template, secret_key, nonce)?;
            outcome.attempts += 1;
            outcome.decode_iterations += iterations as u64;
            if proof.is_some() {
                outcome.proof = proof;
                break;
            }
        }
        Ok(outcome)
    }
}

/// Scans `nonce_start..nonce_limit` on the puzzle keyed by the template's
/// parent hash; returns the first solution.
pub fn solve(
    template: &BlockHeader,
    secret_key: &SecretKey,
    params: &CodeParams,
    nonce_start: u64,
    nonce_limit: u64,
) -> Result<Option<PocProof>> {
    Ok(solve_with_stats(template, secret_key, params, nonce_start, nonce_limit)?.proof)
}

pub fn solve_with_stats(
    template: &BlockHeader,
    secret_key: &SecretKey,
    params: &CodeParams,
    nonce_start: u64,
    nonce_limit: u64,
) -> Result<SolveOutcome> {
    Puzzle::new(&template.prev_hash, params)?.solve_range(template, secret_key, nonce_start, nonce_limit)
}

/// Accepts iff (a) the signature verifies over the header preimage carrying
/// `proof.nonce`, (b) re-decoding the word expanded from the signature hash
/// converges to exactly `proof.codeword`, and (c) the codeword has zero
/// syndrome. Never panics.
pub fn verify_poc(
    header: &BlockHeader,
    coinbase_public_key: &PublicKey,
    proof: &PocProof,
    params: &CodeParams,
) -> bool {
    check_poc(header, coinbase_public_key, proof, params).unwrap_or(false)
}

fn check_poc(header: &BlockHeader, pk: &PublicKey, proof: &PocProof, params: &CodeParams) -> Result<bool> {
    if proof.codeword.len() != params.n as usize {
        return Ok(false);
    }
    let mut signed = header.clone();
    signed.nonce = proof.nonce;
    if !crypto::verify(pk, &signed.signing_preimage(), &proof.header_signature) {
        return Ok(false);
    }
    let h = gen_matrix(&header.prev_hash, params)?;
    let received = expand_hash(&crypto::hash(proof.header_signature.as_bytes()), h.n());
    let d = decode(&h, &received, params.max_iter)?;
    if !d.converged || d.word != proof.codeword {
        return Ok(false);
    }
    let syndrome = h.syndrome(&proof.codeword)?;
    if syndrome.iter().any(|&b| b != 0) {
        return Err(Error::Decode("decoder reported convergence on a non-codeword".into()));
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{hash, keygen};

    fn easy() -> CodeParams {
        CodeParams::new(16, 2, 4, 0, 8).unwrap()
    }

    fn template(pk: &PublicKey) -> BlockHeader {
        BlockHeader {
            prev_hash: hash(b"parent"),
            coinbase_pubkey_hash: pk.key_hash(),
            ..BlockHeader::default()
        }
    }

    fn bits_of(d: &Digest256, n: usize) -> Vec<u8> {
        (0..n).map(|k| (d.0[k / 8] >> (7 - k % 8)) & 1).collect()
    }

    #[test]
    fn expansion_is_counter_mode_concatenation() {
        let out = hash(b"out");
        let b0 = hash_parts(&[out.as_bytes(), &0u32.to_be_bytes()]);
        let b1 = hash_parts(&[out.as_bytes(), &1u32.to_be_bytes()]);
        assert_eq!(expand_hash(&out, 256).bits(), bits_of(&b0, 256).as_slice());
        let mut both = bits_of(&b0, 256);
        both.extend(bits_of(&b1, 256));
        assert_eq!(expand_hash(&out, 512).bits(), both.as_slice());
        assert_eq!(expand_hash(&out, 300).bits(), &both[..300]);
        assert_eq!(expand_hash(&out, 1).len(), 1);
    }

    #[test]
    fn solve_round_trips_through_verify() {
        let kp = keygen(&[9u8; 32]).unwrap();
        let t = template(&kp.public_key);
        let proof = solve(&t, &kp.secret_key, &easy(), 0, 1000)
            .unwrap()
            .expect("easy level solves");
        assert!(verify_poc(&t, &kp.public_key, &proof, &easy()));
        let mut sealed = t.clone();
        sealed.nonce = proof.nonce;
        assert!(verify_poc(&sealed, &kp.public_key, &proof, &easy()));
    }

    #[test]
    fn empty_nonce_range_yields_nothing() {
        let kp = keygen(&[9u8; 32]).unwrap();
        let t = template(&kp.public_key);
        let out = solve_with_stats(&t, &kp.secret_key, &easy(), 5, 5).unwrap();
        assert_eq!(out.proof, None);
        assert_eq!(out.attempts, 0);
    }

    #[test]
    fn foreign_signature_is_rejected() {
        let kp = keygen(&[9u8; 32]).unwrap();
        let thief = keygen(&[10u8; 32]).unwrap();
        let t = template(&kp.public_key);
        let stolen = solve(&t, &thief.secret_key, &easy(), 0, 1000).unwrap().unwrap();
        assert!(verify_poc(&t, &thief.public_key, &stolen, &easy()));
        assert!(!verify_poc(&t, &kp.public_key, &stolen, &easy()));
    }

    #[test]
    fn mutations_are_rejected() {
        let kp = keygen(&[4u8; 32]).unwrap();
        let t = template(&kp.public_key);
        let proof = solve(&t, &kp.secret_key, &easy(), 0, 1000).unwrap().unwrap();
        let mut p = proof.clone();
        p.nonce ^= 1;
        assert!(!verify_poc(&t, &kp.public_key, &p, &easy()));
        let mut p = proof.clone();
        p.header_signature.0[10] ^= 0x04;
        assert!(!verify_poc(&t, &kp.public_key, &p, &easy()));
        let mut p = proof.clone();
        p.codeword.flip(3);
        assert!(!verify_poc(&t, &kp.public_key, &p, &easy()));
        let mut p = proof;
        p.codeword = BitWord::zeros(15);
        assert!(!verify_poc(&t, &kp.public_key, &p, &easy()));
    }

    #[test]
    fn different_valid_codeword_is_rejected() {
        let kp = keygen(&[4u8; 32]).unwrap();
        let t = template(&kp.public_key);
        let params = easy();
        let proof = solve(&t, &kp.secret_key, &params, 0, 1000).unwrap().unwrap();
        let h = gen_matrix(&t.prev_hash, &params).unwrap();
        // Brute-force another codeword of the same matrix.
        let other = (0u32..1 << 16)
            .map(|x| BitWord::from_bits((0..16).map(|i| ((x >> (15 - i)) & 1) as u8).collect()))
            .find(|w| h.is_codeword(w) && *w != proof.codeword)
            .expect("rate-1/2 code has many codewords");
        let forged = PocProof {
            codeword: other,
            ..proof
        };
        assert!(!verify_poc(&t, &kp.public_key, &forged, &params));
    }
}
