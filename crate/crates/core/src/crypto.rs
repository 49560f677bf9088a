//! Hashing and the deterministic signature scheme shared by coin-toss
//! election and the pool-resistant puzzle.
//!
//! Consensus code only relies on two properties of the signature scheme:
//! signatures verify under the public key, and for a fixed `(secret key,
//! message)` the signature bytes never change. The reference scheme is
//! Ed25519 (RFC 8032), whose nonce is derived from the key and message.
//! Randomized schemes must not be plugged in here: they would let a node
//! re-toss its coin or re-grind the puzzle preimage at will.

use std::fmt;

use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};

use crate::error::{Error, Result};

/// A SHA-256 output.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest256(pub [u8; 32]);

impl Digest256 {
    pub const ZERO: Digest256 = Digest256([0u8; 32]);

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|e| Error::Decode(e.to_string()))?;
        Self::from_slice(&bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| Error::Decode(format!("digest must be 32 bytes, got {}", bytes.len())))?;
        Ok(Digest256(arr))
    }

    /// Number of differing bits.
    pub fn hamming_distance(&self, other: &Digest256) -> u32 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }
}

impl fmt::Debug for Digest256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest256({})", self.to_hex())
    }
}

impl fmt::Display for Digest256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest256 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest256 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest256::from_hex(&s).map_err(de::Error::custom)
    }
}

/// SHA-256 (FIPS 180-4).
pub fn hash(data: &[u8]) -> Digest256 {
    Digest256(Sha256::digest(data).into())
}

/// SHA-256 over the concatenation of `parts`, without materializing it.
pub fn hash_parts(parts: &[&[u8]]) -> Digest256 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Digest256(h.finalize().into())
}

/// Signature bytes. Length is scheme dependent; the reference scheme emits 64.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Signature(pub Vec<u8>);

impl Signature {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        hex::decode(s).map(Signature).map_err(|e| Error::Decode(e.to_string()))
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", self.to_hex())
    }
}

/// Public verification key bytes.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicKey(pub Vec<u8>);

impl PublicKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        hex::decode(s).map(PublicKey).map_err(|e| Error::Decode(e.to_string()))
    }

    /// The digest committed to in block headers.
    pub fn key_hash(&self) -> Digest256 {
        hash(&self.0)
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", self.to_hex())
    }
}

/// Secret signing key. Opaque; serializes as its 32-byte seed.
#[derive(Clone)]
pub struct SecretKey(SigningKey);

impl SecretKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let seed: [u8; 32] = bytes
            .try_into()
            .map_err(|_| Error::InvalidKey(format!("secret key must be 32 bytes, got {}", bytes.len())))?;
        Ok(SecretKey(SigningKey::from_bytes(&seed)))
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.to_bytes()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|e| Error::InvalidKey(e.to_string()))?;
        Self::from_bytes(&bytes)
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

impl PartialEq for SecretKey {
    fn eq(&self, other: &Self) -> bool {
        self.to_bytes() == other.to_bytes()
    }
}

impl Eq for SecretKey {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyPair {
    pub secret_key: SecretKey,
    pub public_key: PublicKey,
}

/// A signature scheme whose signatures are a pure function of
/// `(secret key, message)`.
pub trait DeterministicSignatureScheme {
    fn keygen(&self, seed: &[u8]) -> Result<KeyPair>;
    fn derive_public(&self, secret_key: &SecretKey) -> PublicKey;
    fn sign(&self, secret_key: &SecretKey, message: &[u8]) -> Signature;
    fn verify(&self, public_key: &PublicKey, message: &[u8], signature: &Signature) -> bool;
}

/// Ed25519 with strict verification (canonical `s`, no small-order keys).
#[derive(Clone, Copy, Debug, Default)]
pub struct Ed25519;

impl DeterministicSignatureScheme for Ed25519 {
    fn keygen(&self, seed: &[u8]) -> Result<KeyPair> {
        let secret_key = SecretKey::from_bytes(seed)?;
        let public_key = self.derive_public(&secret_key);
        Ok(KeyPair { secret_key, public_key })
    }

    fn derive_public(&self, secret_key: &SecretKey) -> PublicKey {
        PublicKey(secret_key.0.verifying_key().to_bytes().to_vec())
    }

    fn sign(&self, secret_key: &SecretKey, message: &[u8]) -> Signature {
        Signature(secret_key.0.sign(message).to_bytes().to_vec())
    }

    fn verify(&self, public_key: &PublicKey, message: &[u8], signature: &Signature) -> bool {
        let Ok(pk_bytes) = <[u8; 32]>::try_from(public_key.as_bytes()) else {
            return false;
        };
        let Ok(sig_bytes) = <[u8; 64]>::try_from(signature.as_bytes()) else {
            return false;
        };
        let Ok(vk) = VerifyingKey::from_bytes(&pk_bytes) else {
            return false;
        };
        let sig = ed25519_dalek::Signature::from_bytes(&sig_bytes);
        vk.verify_strict(message, &sig).is_ok()
    }
}

/// The scheme used by consensus.
pub const SCHEME: Ed25519 = Ed25519;

/// Deterministic key generation from a 32-byte seed.
pub fn keygen(seed: &[u8]) -> Result<KeyPair> {
    SCHEME.keygen(seed)
}

pub fn derive_public(secret_key: &SecretKey) -> PublicKey {
    SCHEME.derive_public(secret_key)
}

pub fn sign(secret_key: &SecretKey, message: &[u8]) -> Signature {
    SCHEME.sign(secret_key, message)
}

/// Never panics; malformed keys or signatures verify as `false`.
pub fn verify(public_key: &PublicKey, message: &[u8], signature: &Signature) -> bool {
    SCHEME.verify(public_key, message, signature)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_input_matches_fips_vector() {
        assert_eq!(
            hash(b"").to_hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            hash(b"abc").to_hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn hash_parts_equals_concatenation() {
        assert_eq!(hash_parts(&[b"ab", b"", b"c"]), hash(b"abc"));
    }

    #[test]
    fn single_bit_flip_changes_digest() {
        let x = b"green".to_vec();
        let mut y = x.clone();
        y[2] ^= 0x10;
        assert_eq!(hash(&x), hash(&x));
        assert_ne!(hash(&x), hash(&y));
    }

    #[test]
    fn keygen_is_deterministic_and_seed_sensitive() {
        let a = keygen(&[7u8; 32]).unwrap();
        let b = keygen(&[7u8; 32]).unwrap();
        let c = keygen(&[8u8; 32]).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.public_key, c.public_key);
        assert_eq!(a.public_key, derive_public(&a.secret_key));
    }

    #[test]
    fn keygen_rejects_bad_seed_length() {
        assert!(matches!(keygen(&[0u8; 31]), Err(Error::InvalidKey(_))));
        assert!(keygen(&[]).is_err());
    }

    #[test]
    fn key_serialization_round_trips() {
        let kp = keygen(&[3u8; 32]).unwrap();
        let sk = SecretKey::from_hex(&kp.secret_key.to_hex()).unwrap();
        assert_eq!(sk, kp.secret_key);
        assert_eq!(PublicKey::from_hex(&kp.public_key.to_hex()).unwrap(), kp.public_key);
        assert_eq!(kp.public_key.to_hex(), kp.public_key.to_hex().to_lowercase());
    }

    #[test]
    fn sign_is_deterministic_and_verifies() {
        let kp = keygen(&[1u8; 32]).unwrap();
        let s1 = sign(&kp.secret_key, b"header");
        let s2 = sign(&kp.secret_key, b"header");
        assert_eq!(s1, s2);
        assert!(verify(&kp.public_key, b"header", &s1));
        assert!(!verify(&kp.public_key, b"headex", &s1));
    }

    #[test]
    fn verify_rejects_tampering_and_foreign_keys() {
        let kp = keygen(&[1u8; 32]).unwrap();
        let other = keygen(&[2u8; 32]).unwrap();
        let sig = sign(&kp.secret_key, b"m");
        for bit in [0usize, 100, 511] {
            let mut bad = sig.clone();
            bad.0[bit / 8] ^= 1 << (bit % 8);
            assert!(!verify(&kp.public_key, b"m", &bad));
        }
        assert!(!verify(&other.public_key, b"m", &sig));
        assert!(!verify(&other.public_key, b"m", &sign(&kp.secret_key, b"m2")));
    }

    #[test]
    fn malformed_inputs_verify_false() {
        let kp = keygen(&[1u8; 32]).unwrap();
        let sig = sign(&kp.secret_key, b"m");
        assert!(!verify(&PublicKey(vec![1, 2, 3]), b"m", &sig));
        assert!(!verify(&kp.public_key, b"m", &Signature(vec![0; 63])));
        assert!(!verify(&kp.public_key, b"m", &Signature(vec![0xff; 64])));
        assert!(!verify(&PublicKey(vec![0xff; 32]), b"m", &sig));
    }

    #[test]
    fn cross_verification_never_succeeds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut pairs = Vec::new();
        for _ in 0..1000 {
            let mut seed = [0u8; 32];
            rng.fill_bytes(&mut seed);
            let mut msg = vec![0u8; rng.gen_range(1..64)];
            rng.fill_bytes(&mut msg);
            let kp = keygen(&seed).unwrap();
            let sig = sign(&kp.secret_key, &msg);
            pairs.push((kp, msg, sig));
        }
        for i in 0..pairs.len() {
            let j = (i + 1) % pairs.len();
            let (kp, msg, sig) = &pairs[i];
            let (other, other_msg, _) = &pairs[j];
            assert!(verify(&kp.public_key, msg, sig));
            assert!(!verify(&other.public_key, msg, sig));
            assert!(!verify(&kp.public_key, other_msg, sig));
        }
    }

    #[test]
    fn avalanche_mean_is_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 2000;
        let mut total = 0u64;
        for _ in 0..trials {
            let mut x = [0u8; 48];
            rng.fill_bytes(&mut x);
            let mut y = x;
            let bit = rng.gen_range(0..x.len() * 8);
            y[bit / 8] ^= 1 << (bit % 8);
            total += hash(&x).hamming_distance(&hash(&y)) as u64;
        }
        let mean = total as f64 / trials as f64;
        assert!((mean - 128.0).abs() < 8.0, "mean distance {mean}");
    }
}
