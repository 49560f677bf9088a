use super::codec::{put_var_bytes32, Reader};
use super::BlockHeader;
use crate::crypto::{hash, hash_parts, Digest256, PublicKey};
use crate::error::{Error, Result};

/// Upper bound on a serialized block, in bytes.
pub const MAX_BLOCK_SIZE: usize = 1_000_000;

/// Opaque value-carrying record. The id is the hash of its serialization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transaction {
    id: Digest256,
    value: u64,
    payload: Vec<u8>,
}

impl Transaction {
    pub fn new(value: u64, payload: Vec<u8>) -> Self {
        let mut tx = Transaction {
            id: Digest256::ZERO,
            value,
            payload,
        };
        tx.id = hash(&tx.serialize());
        tx
    }

    /// A coinbase carries the miner's public key as its payload.
    pub fn coinbase(public_key: &PublicKey, reward: u64) -> Self {
        Transaction::new(reward, public_key.as_bytes().to_vec())
    }

    pub fn id(&self) -> &Digest256 {
        &self.id
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.payload.len());
        out.extend_from_slice(&self.value.to_be_bytes());
        put_var_bytes32(&mut out, &self.payload);
        out
    }

    fn read(r: &mut Reader<'_>) -> Result<Self> {
        let value = r.u64()?;
        let payload = r.var_bytes32()?;
        Ok(Transaction::new(value, payload))
    }
}

/// Pairwise SHA-256 tree over transaction ids; an odd node is paired with
/// itself. A single transaction's root is its id; no transactions hash to zero.
pub fn merkle_root(transactions: &[Transaction]) -> Digest256 {
    let mut level: Vec<Digest256> = transactions.iter().map(|t| *t.id()).collect();
    if level.is_empty() {
        return Digest256::ZERO;
    }
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| {
                let right = pair.get(1).unwrap_or(&pair[0]);
                hash_parts(&[pair[0].as_bytes(), right.as_bytes()])
            })
            .collect();
    }
    level[0]
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<Transaction>,
}

impl Block {
    pub fn hash(&self) -> Digest256 {
        self.header.hash()
    }

    pub fn coinbase(&self) -> Option<&Transaction> {
        self.transactions.first()
    }

    pub fn coinbase_public_key(&self) -> Option<PublicKey> {
        self.coinbase().map(|tx| PublicKey(tx.payload().to_vec()))
    }

    /// Header bytes, then a u32 transaction count and each transaction.
    pub fn serialize(&self) -> Vec<u8> {
        let mut out = self.header.to_bytes();
        let count = u32::try_from(self.transactions.len()).expect("too many transactions");
        out.extend_from_slice(&count.to_be_bytes());
        for tx in &self.transactions {
            out.extend_from_slice(&tx.serialize());
        }
        out
    }

    pub fn size(&self) -> usize {
        self.serialize().len()
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let header = BlockHeader::read(&mut r)?;
        let count = r.u32()? as usize;
        // Every transaction occupies at least 12 bytes.
        if count > bytes.len() / 12 {
            return Err(Error::Decode(format!("implausible transaction count {count}")));
        }
        let transactions = (0..count)
            .map(|_| Transaction::read(&mut r))
            .collect::<Result<Vec<_>>>()?;
        if !r.is_empty() {
            return Err(Error::Decode("trailing bytes after block".into()));
        }
        Ok(Block { header, transactions })
    }
}
