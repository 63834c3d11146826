//! On-wire frame carrying one encrypted combination.
//!
//! Wire layout, all fields big-endian:
//!
//! ```text
//! msg_id:4 | combo_index:2 | combo_total:2 | payload_len:2 | payload:payload_len
//! ```

use super::CodecError;

/// Header bytes preceding the payload.
pub const HEADER_LEN: usize = 10;

/// One transmitted unit: an encrypted combination plus its sequence tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub msg_id: u32,
    /// 1-based position of the carried combination.
    pub combo_index: u16,
    pub combo_total: u16,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(
        msg_id: u32,
        combo_index: u16,
        combo_total: u16,
        payload: Vec<u8>,
    ) -> Result<Self, CodecError> {
        if combo_index == 0 || combo_index > combo_total {
            return Err(CodecError::ComboIndexOutOfRange {
                index: combo_index,
                total: combo_total,
            });
        }
        if payload.len() > u16::MAX as usize {
            return Err(CodecError::PayloadTooLong(payload.len()));
        }
        Ok(Self {
            msg_id,
            combo_index,
            combo_total,
            payload,
        })
    }

    pub fn payload_len(&self) -> u16 {
        self.payload.len() as u16
    }

    /// Serialize to the wire layout.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&self.msg_id.to_be_bytes());
        out.extend_from_slice(&self.combo_index.to_be_bytes());
        out.extend_from_slice(&self.combo_total.to_be_bytes());
        out.extend_from_slice(&self.payload_len().to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Parse exactly one frame; trailing bytes are an error.
    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < HEADER_LEN {
            return Err(CodecError::FrameTruncated {
                need: HEADER_LEN,
                have: bytes.len(),
            });
        }
        let msg_id = u32::from_be_bytes(bytes[0..4].try_into().unwrap());
        let combo_index = u16::from_be_bytes(bytes[4..6].try_into().unwrap());
        let combo_total = u16::from_be_bytes(bytes[6..8].try_into().unwrap());
        let payload_len = u16::from_be_bytes(bytes[8..10].try_into().unwrap()) as usize;
        let need = HEADER_LEN + payload_len;
        if bytes.len() < need {
            return Err(CodecError::FrameTruncated {
                need,
                have: bytes.len(),
            });
        }
        if bytes.len() > need {
            return Err(CodecError::FrameTrailingBytes(bytes.len() - need));
        }
        Self::new(
            msg_id,
            combo_index,
            combo_total,
            bytes[HEADER_LEN..].to_vec(),
        )
    }
}
