use super::codec::{put_var_bytes16, Reader};
use crate::crypto::{hash, Digest256, Signature};
use crate::eccpow::{BitWord, PocProof};
use crate::error::{Error, Result};
use crate::vct::VrfOutput;

/// Block header. Serialized field by field in declaration order with
/// big-endian integers; variable-length fields carry a length prefix
/// (u16 bytes for signatures, u32 bits for the codeword).
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct BlockHeader {
    pub version: u32,
    pub prev_hash: Digest256,
    pub merkle_root: Digest256,
    /// Seconds since the epoch.
    pub timestamp: u64,
    pub level: u32,
    pub nonce: u64,
    pub coinbase_pubkey_hash: Digest256,
    pub vct_value: Digest256,
    pub vct_proof: Signature,
    pub poc_signature: Signature,
    pub poc_codeword: BitWord,
}

impl BlockHeader {
    pub fn serialize(&self, include_poc: bool) -> Vec<u8> {
        let mut out = Vec::with_capacity(256);
        out.extend_from_slice(&self.version.to_be_bytes());
        out.extend_from_slice(self.prev_hash.as_bytes());
        out.extend_from_slice(self.merkle_root.as_bytes());
        out.extend_from_slice(&self.timestamp.to_be_bytes());
        out.extend_from_slice(&self.level.to_be_bytes());
        out.extend_from_slice(&self.nonce.to_be_bytes());
        out.extend_from_slice(self.coinbase_pubkey_hash.as_bytes());
        out.extend_from_slice(self.vct_value.as_bytes());
        put_var_bytes16(&mut out, self.vct_proof.as_bytes());
        if include_poc {
            put_var_bytes16(&mut out, self.poc_signature.as_bytes());
            let bits = u32::try_from(self.poc_codeword.len()).expect("codeword too long");
            out.extend_from_slice(&bits.to_be_bytes());
            out.extend_from_slice(&self.poc_codeword.to_packed());
        }
        out
    }

    /// The bytes signed by the coinbase key when mining: everything except
    /// the proof-of-computation fields.
    pub fn signing_preimage(&self) -> Vec<u8> {
        self.serialize(false)
    }

    /// Full canonical bytes; the input to the next block's coin toss.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.serialize(true)
    }

    pub fn hash(&self) -> Digest256 {
        hash(&self.to_bytes())
    }

    /// Parses a full (`include_poc = true`) serialization.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let h = Self::read(&mut r)?;
        if !r.is_empty() {
            return Err(Error::Decode(format!(
                "{} trailing bytes after header",
                bytes.len() - r.position()
            )));
        }
        Ok(h)
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self> {
        let version = r.u32()?;
        let prev_hash = r.digest()?;
        let merkle_root = r.digest()?;
        let timestamp = r.u64()?;
        let level = r.u32()?;
        let nonce = r.u64()?;
        let coinbase_pubkey_hash = r.digest()?;
        let vct_value = r.digest()?;
        let vct_proof = Signature(r.var_bytes16()?);
        let poc_signature = Signature(r.var_bytes16()?);
        let bits = r.u32()? as usize;
        let packed = r.take(bits.div_ceil(8))?;
        let poc_codeword = BitWord::from_packed(packed, bits)?;
        Ok(BlockHeader {
            version,
            prev_hash,
            merkle_root,
            timestamp,
            level,
            nonce,
            coinbase_pubkey_hash,
            vct_value,
            vct_proof,
            poc_signature,
            poc_codeword,
        })
    }

    pub fn vrf_output(&self) -> VrfOutput {
        VrfOutput {
            proof: self.vct_proof.clone(),
            value: self.vct_value,
        }
    }

    pub fn poc_proof(&self) -> PocProof {
        PocProof {
            nonce: self.nonce,
            header_signature: self.poc_signature.clone(),
            codeword: self.poc_codeword.clone(),
        }
    }

    /// Seals the header with a solved proof.
    pub fn attach_poc(&mut self, proof: PocProof) {
        self.nonce = proof.nonce;
        self.poc_signature = proof.header_signature;
        self.poc_codeword = proof.codeword;
    }
}
