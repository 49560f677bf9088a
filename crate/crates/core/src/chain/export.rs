use std::io::{BufRead, Write};

use super::Block;
use crate::error::{Error, Result};

/// Writes one lowercase-hex serialized block per line.
pub fn write_chain<'a, W: Write>(mut out: W, blocks: impl IntoIterator<Item = &'a Block>) -> std::io::Result<()> {
    for b in blocks {
        writeln!(out, "{}", hex::encode(b.serialize()))?;
    }
    Ok(())
}

/// Inverse of [`write_chain`]. Blank lines are skipped.
pub fn read_chain<R: BufRead>(input: R) -> Result<Vec<Block>> {
    let mut blocks = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::Decode(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bytes = hex::decode(line).map_err(|e| Error::Decode(format!("line {}: {e}", i + 1)))?;
        blocks.push(Block::parse(&bytes).map_err(|e| Error::Decode(format!("line {}: {e}", i + 1)))?);
    }
    Ok(blocks)
}
