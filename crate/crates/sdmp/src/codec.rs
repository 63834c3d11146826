//! Message codec: split, combine, encrypt, shuffle, reconstruct.
//!
//! A message is padded and split into `n` equal parts, the parts are folded
//! into pairwise XOR combinations (`C_1 = P_1`, `C_i = P_{i-1} ^ P_i`), each
//! combination is encrypted with a keystream and framed, and the frames are
//! shuffled before dispatch. The receiver inverts every step. The pairwise
//! scheme keeps the GF(2) coefficient matrix full rank, so all `n`
//! combinations reconstruct the message while any proper subset leaks at
//! most a prefix-free remainder (see [`crate::leakage`]).

use thiserror::Error;

use crate::gf2::BitRow;
use crate::rng::{keystream, Keystream};

mod frame;
mod shamir;

pub use frame::Frame;
pub use shamir::{shamir_reconstruct, shamir_share, ShamirShare};

/// Symmetric key for the XOR keystream cipher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CipherKey(pub u64);

/// Bytes of the length prefix prepended before padding.
pub const LENGTH_PREFIX: usize = 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("part count must be at least 2, got {0}")]
    PartCountTooSmall(u16),
    #[error("message of {0} bytes exceeds the 32-bit length limit")]
    MessageTooLarge(u64),
    #[error("length prefix {prefix} exceeds capacity {capacity}")]
    CorruptLengthPrefix { prefix: u32, capacity: u64 },
    #[error("combination {0} missing")]
    MissingCombination(u16),
    #[error("combination {0} supplied more than once")]
    DuplicateCombination(u16),
    #[error("combination index {index} outside 1..={total}")]
    ComboIndexOutOfRange { index: u16, total: u16 },
    #[error("blocks must share one non-zero length")]
    BlockLengthMismatch,
    #[error("operation requires the {0:?} scheme")]
    WrongScheme(Scheme),
    #[error("payload of {0} bytes does not fit a frame")]
    PayloadTooLong(usize),
    #[error("threshold must satisfy 2 <= k <= n <= 255, got k={k} n={n}")]
    BadThreshold { k: u8, n: u8 },
    #[error("need {needed} shares, got {got}")]
    NotEnoughShares { needed: u8, got: usize },
    #[error("duplicate share abscissa x={0}")]
    DuplicateShareX(u8),
    #[error("share abscissa must be non-zero")]
    ZeroShareX,
    #[error("frame truncated: need {need} bytes, have {have}")]
    FrameTruncated { need: usize, have: usize },
    #[error("{0} trailing bytes after frame")]
    FrameTrailingBytes(usize),
    #[error("frames disagree on message id or combination total")]
    FrameSetMismatch,
}

/// How a set of combinations was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Pairwise XOR chain: all blocks are needed to reconstruct.
    Chain,
    /// Threshold sharing: any `k` blocks reconstruct.
    Shamir { k: u8 },
}

/// Equal-length plaintext blocks of one padded message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageParts {
    parts: Vec<Vec<u8>>,
}

impl MessageParts {
    /// Wrap pre-built blocks. There must be at least two and they must share
    /// one non-zero length.
    pub fn new(parts: Vec<Vec<u8>>) -> Result<Self, CodecError> {
        if parts.len() < 2 {
            return Err(CodecError::PartCountTooSmall(parts.len() as u16));
        }
        let len = parts[0].len();
        if len == 0 || parts.iter().any(|p| p.len() != len) {
            return Err(CodecError::BlockLengthMismatch);
        }
        Ok(Self { parts })
    }

    pub fn part_count(&self) -> u16 {
        self.parts.len() as u16
    }

    pub fn block_len(&self) -> usize {
        self.parts[0].len()
    }

    pub fn parts(&self) -> &[Vec<u8>] {
        &self.parts
    }
}

/// The `n` combination blocks derived from one message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombinationSet {
    combos: Vec<Vec<u8>>,
    scheme: Scheme,
}

impl CombinationSet {
    /// Assemble a set from `(index, block)` pairs with 1-based indices.
    /// Every index in `1..=total` must appear exactly once.
    pub fn from_indexed(
        scheme: Scheme,
        total: u16,
        blocks: impl IntoIterator<Item = (u16, Vec<u8>)>,
    ) -> Result<Self, CodecError> {
        if total < 2 {
            return Err(CodecError::PartCountTooSmall(total));
        }
        let mut slots: Vec<Option<Vec<u8>>> = vec![None; total as usize];
        for (index, block) in blocks {
            if index == 0 || index > total {
                return Err(CodecError::ComboIndexOutOfRange { index, total });
            }
            let slot = &mut slots[index as usize - 1];
            if slot.is_some() {
                return Err(CodecError::DuplicateCombination(index));
            }
            *slot = Some(block);
        }
        let mut combos = Vec::with_capacity(total as usize);
        for (i, slot) in slots.into_iter().enumerate() {
            match slot {
                Some(block) => combos.push(block),
                None => return Err(CodecError::MissingCombination(i as u16 + 1)),
            }
        }
        let len = combos[0].len();
        if len == 0 || combos.iter().any(|c| c.len() != len) {
            return Err(CodecError::BlockLengthMismatch);
        }
        Ok(Self { combos, scheme })
    }

    pub fn part_count(&self) -> u16 {
        self.combos.len() as u16
    }

    pub fn block_len(&self) -> usize {
        self.combos[0].len()
    }

    pub fn combos(&self) -> &[Vec<u8>] {
        &self.combos
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// GF(2) coefficient rows mapping parts to combinations, when the scheme
    /// has such a representation (the chain scheme does, thresholding does
    /// not).
    pub fn coefficient_rows(&self) -> Option<Vec<BitRow>> {
        match self.scheme {
            Scheme::Chain => Some(chain_coefficient_rows(self.part_count())),
            Scheme::Shamir { .. } => None,
        }
    }
}

/// Coefficient rows of the chain scheme: row 1 is `e_1`, row i is
/// `e_{i-1} ^ e_i`. The bidiagonal matrix has full rank for every `n >= 2`.
pub fn chain_coefficient_rows(n: u16) -> Vec<BitRow> {
    let width = n as usize;
    (0..width)
        .map(|i| {
            let mut row = BitRow::unit(width, i);
            if i > 0 {
                row.set(i - 1);
            }
            row
        })
        .collect()
}

/// Split `msg` into `n` equal blocks of `L = ceil((len + 4) / n)` bytes:
/// a 4-byte big-endian length prefix, the message, then zero fill.
pub fn pad_and_split(msg: &[u8], n: u16) -> Result<MessageParts, CodecError> {
    if n < 2 {
        return Err(CodecError::PartCountTooSmall(n));
    }
    if msg.len() as u64 >= 1 << 32 {
        return Err(CodecError::MessageTooLarge(msg.len() as u64));
    }
    let padded_len = msg.len() + LENGTH_PREFIX;
    let block_len = padded_len.div_ceil(n as usize);
    let mut buf = Vec::with_capacity(block_len * n as usize);
    buf.extend_from_slice(&(msg.len() as u32).to_be_bytes());
    buf.extend_from_slice(msg);
    buf.resize(block_len * n as usize, 0);
    let parts = buf.chunks(block_len).map(<[u8]>::to_vec).collect();
    Ok(MessageParts { parts })
}

/// Inverse of [`pad_and_split`]: strip the length prefix and the zero fill.
pub fn unsplit(parts: &MessageParts) -> Result<Vec<u8>, CodecError> {
    let mut buf: Vec<u8> = Vec::with_capacity(parts.part_count() as usize * parts.block_len());
    for part in parts.parts() {
        buf.extend_from_slice(part);
    }
    let prefix = u32::from_be_bytes(buf[..LENGTH_PREFIX].try_into().unwrap());
    let capacity = (buf.len() - LENGTH_PREFIX) as u64;
    if prefix as u64 > capacity {
        return Err(CodecError::CorruptLengthPrefix { prefix, capacity });
    }
    Ok(buf[LENGTH_PREFIX..LENGTH_PREFIX + prefix as usize].to_vec())
}

/// Fold parts into the chain combinations `C_1 = P_1`, `C_i = P_{i-1} ^ P_i`.
pub fn chain_combine(parts: &MessageParts) -> CombinationSet {
    let blocks = parts.parts();
    let mut combos = Vec::with_capacity(blocks.len());
    combos.push(blocks[0].clone());
    for window in blocks.windows(2) {
        combos.push(xor_blocks(&window[0], &window[1]));
    }
    CombinationSet {
        combos,
        scheme: Scheme::Chain,
    }
}

/// Invert [`chain_combine`]: `P_1 = C_1`, `P_i = C_i ^ P_{i-1}`.
pub fn chain_reconstruct(set: &CombinationSet) -> Result<MessageParts, CodecError> {
    if set.scheme != Scheme::Chain {
        return Err(CodecError::WrongScheme(Scheme::Chain));
    }
    let combos = set.combos();
    let mut parts: Vec<Vec<u8>> = Vec::with_capacity(combos.len());
    parts.push(combos[0].clone());
    for combo in &combos[1..] {
        let prev = parts.last().unwrap();
        parts.push(xor_blocks(prev, combo));
    }
    Ok(MessageParts { parts })
}

fn xor_blocks(a: &[u8], b: &[u8]) -> Vec<u8> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

/// Per-combination keystream identifier: message id in the high bits, the
/// 1-based combination index in the low 16.
fn combo_stream(msg_id: u32, index: u16) -> u64 {
    (msg_id as u64) << 16 | index as u64
}

/// Encrypt each combination into a [`Frame`]. Frame `i` carries
/// `C_i ^ keystream(key, (msg_id << 16) | i, L)`; decryption is the same XOR.
pub fn encrypt_combos(
    set: &CombinationSet,
    key: CipherKey,
    msg_id: u32,
) -> Result<Vec<Frame>, CodecError> {
    let total = set.part_count();
    set.combos()
        .iter()
        .zip(1u16..)
        .map(|(combo, index)| {
            let pad = keystream(key.0, combo_stream(msg_id, index), combo.len());
            Frame::new(msg_id, index, total, xor_blocks(combo, &pad))
        })
        .collect()
}

/// Decrypt received frames (any order) back into a combination set.
/// All frames must belong to one message; every index must be present.
pub fn decrypt_frames(frames: &[Frame], key: CipherKey) -> Result<CombinationSet, CodecError> {
    let first = frames.first().ok_or(CodecError::MissingCombination(1))?;
    let (msg_id, total) = (first.msg_id, first.combo_total);
    if frames
        .iter()
        .any(|f| f.msg_id != msg_id || f.combo_total != total)
    {
        return Err(CodecError::FrameSetMismatch);
    }
    let blocks = frames.iter().map(|f| {
        let pad = keystream(key.0, combo_stream(msg_id, f.combo_index), f.payload.len());
        (f.combo_index, xor_blocks(&f.payload, &pad))
    });
    CombinationSet::from_indexed(Scheme::Chain, total, blocks)
}

/// Permute frames with a seeded Fisher-Yates pass: walking `i` from the last
/// slot down to 1, draw one keystream word and swap slot `i` with
/// `word % (i + 1)`. Frame contents are untouched; the receiver reorders by
/// `combo_index`, so no unshuffle exists or is needed.
pub fn shuffle_frames(mut frames: Vec<Frame>, seed: u64) -> Vec<Frame> {
    let mut gen = Keystream::new(seed, 0);
    for i in (1..frames.len()).rev() {
        let j = gen.next_below(i as u64 + 1) as usize;
        frames.swap(i, j);
    }
    frames
}
