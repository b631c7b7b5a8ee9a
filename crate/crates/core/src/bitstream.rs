//! Packed bit sequences and block partitioning.
//!
//! A [`BitSequence`] stores bits MSB-first inside `u64` words. Bit 0 of the
//! sequence is the first bit read from the input (the leftmost character of
//! an ASCII source, or the most significant bit of the first byte when the
//! order is [`BitOrder::MsbFirst`]).

use thiserror::Error;

/// Bit order used when converting between bytes and bit sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitOrder {
    /// Each byte contributes its most significant bit first (the default).
    MsbFirst,
    /// Each byte contributes its least significant bit first.
    LsbFirst,
}

/// Errors produced while building or partitioning bit sequences.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum BitstreamError {
    /// The ASCII input contained a character other than '0', '1' or whitespace.
    #[error("malformed input: expected '0' or '1' at position {position}, found {found:?}")]
    MalformedInput { position: usize, found: char },
    /// Partitioning would produce empty blocks.
    #[error("sequence too short: {bits} bits cannot fill {blocks} non-empty blocks")]
    SequenceTooShort { bits: usize, blocks: usize },
    /// A block count of zero was requested.
    #[error("block count must be at least 1")]
    ZeroBlocks,
}

/// An immutable sequence of bits, packed 64 per word.
#[derive(Clone, PartialEq, Eq)]
pub struct BitSequence {
    words: Vec<u64>,
    len: usize,
}

impl BitSequence {
    /// Creates an empty sequence.
    pub fn new() -> Self {
        BitSequence { words: Vec::new(), len: 0 }
    }

    /// Parses a string of '0' and '1' characters, skipping whitespace.
    ///
    /// Any other character is rejected, reporting its 1-based position in
    /// the input text.
    pub fn from_ascii(text: &str) -> Result<Self, BitstreamError> {
        let mut seq = BitSequence::new();
        for (i, c) in text.chars().enumerate() {
            match c {
                '0' => seq.push(0),
                '1' => seq.push(1),
                c if c.is_whitespace() => {}
                c => {
                    return Err(BitstreamError::MalformedInput { position: i + 1, found: c });
                }
            }
        }
        Ok(seq)
    }

    /// Expands each byte into 8 bits in the given order.
    pub fn from_bytes(bytes: &[u8], order: BitOrder) -> Self {
        let mut words = Vec::with_capacity(bytes.len().div_ceil(8));
        for chunk in bytes.chunks(8) {
            let mut buf = [0u8; 8];
            for (dst, &src) in buf.iter_mut().zip(chunk) {
                *dst = match order {
                    BitOrder::MsbFirst => src,
                    BitOrder::LsbFirst => src.reverse_bits(),
                };
            }
            words.push(u64::from_be_bytes(buf));
        }
        BitSequence { words, len: bytes.len() * 8 }
    }

    /// Packs the bits back into bytes; a partial trailing byte is zero-padded.
    pub fn to_bytes(&self, order: BitOrder) -> Vec<u8> {
        let mut bytes = Vec::with_capacity(self.len.div_ceil(8));
        for (i, word) in self.words.iter().enumerate() {
            let remaining = self.len - i * 64;
            let n = remaining.div_ceil(8).min(8);
            let be = word.to_be_bytes();
            for &b in &be[..n] {
                bytes.push(match order {
                    BitOrder::MsbFirst => b,
                    BitOrder::LsbFirst => b.reverse_bits(),
                });
            }
        }
        bytes
    }

    /// Renders the bits as a '0'/'1' string.
    pub fn to_ascii(&self) -> String {
        (0..self.len).map(|i| if self.get(i) == 1 { '1' } else { '0' }).collect()
    }

    /// Number of bits.
    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    /// True when the sequence holds no bits.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Returns bit `index` (0-based) as 0 or 1.
    ///
    /// # Panics
    /// Panics when `index >= len()`.
    #[inline]
    pub fn get(&self, index: usize) -> u8 {
        assert!(index < self.len, "bit index {index} out of range 0..{}", self.len);
        ((self.words[index / 64] >> (63 - (index % 64))) & 1) as u8
    }

    /// Appends one bit (0 or 1).
    pub fn push(&mut self, bit: u8) {
        debug_assert!(bit <= 1);
        let offset = self.len % 64;
        if offset == 0 {
            self.words.push(0);
        }
        if bit != 0 {
            let last = self.words.len() - 1;
            self.words[last] |= 1u64 << (63 - offset);
        }
        self.len += 1;
    }

    /// Shortens the sequence to at most `len` bits.
    pub fn truncate(&mut self, len: usize) {
        if len >= self.len {
            return;
        }
        self.words.truncate(len.div_ceil(64));
        let tail = len % 64;
        if tail != 0 {
            let last = self.words.len() - 1;
            self.words[last] &= !0u64 << (64 - tail);
        }
        self.len = len;
    }

    /// Copies `len` bits starting at bit `start` into a new sequence.
    ///
    /// # Panics
    /// Panics when `start + len > self.len()`.
    pub fn slice(&self, start: usize, len: usize) -> BitSequence {
        assert!(start + len <= self.len, "slice {start}..{} out of range", start + len);
        let mut words = Vec::with_capacity(len.div_ceil(64));
        let shift = start % 64;
        let base = start / 64;
        for i in 0..len.div_ceil(64) {
            let lo = self.words.get(base + i).copied().unwrap_or(0);
            let w = if shift == 0 {
                lo
            } else {
                let hi = self.words.get(base + i + 1).copied().unwrap_or(0);
                (lo << shift) | (hi >> (64 - shift))
            };
            words.push(w);
        }
        // Zero any bits past the end so equality and hashing stay canonical.
        let tail = len % 64;
        if tail != 0 {
            let last = words.len() - 1;
            words[last] &= !0u64 << (64 - tail);
        }
        BitSequence { words, len }
    }

    /// Splits the first `blocks * floor(len / blocks)` bits into consecutive
    /// equal-length blocks; any remaining tail bits are discarded.
    pub fn partition(&self, blocks: usize) -> Result<BlockSet, BitstreamError> {
        if blocks == 0 {
            return Err(BitstreamError::ZeroBlocks);
        }
        let block_len = self.len / blocks;
        if block_len == 0 {
            return Err(BitstreamError::SequenceTooShort { bits: self.len, blocks });
        }
        let blocks: Vec<BitSequence> =
            (0..blocks).map(|j| self.slice(j * block_len, block_len)).collect();
        Ok(BlockSet { blocks, block_len })
    }

    /// Raw packed words, MSB-first; bits past `len` are zero.
    #[inline]
    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }
}

impl Default for BitSequence {
    fn default() -> Self {
        Self::new()
    }
}

impl std::fmt::Debug for BitSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.len <= 64 {
            write!(f, "BitSequence({})", self.to_ascii())
        } else {
            write!(f, "BitSequence(len={})", self.len)
        }
    }
}

/// The result of partitioning a sequence into equal-length blocks.
#[derive(Debug, Clone)]
pub struct BlockSet {
    blocks: Vec<BitSequence>,
    block_len: usize,
}

impl BlockSet {
    /// Number of blocks.
    pub fn count(&self) -> usize {
        self.blocks.len()
    }

    /// Length of every block in bits.
    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// The blocks in source order.
    pub fn blocks(&self) -> &[BitSequence] {
        &self.blocks
    }
}
