use super::{read_value, tags, CodecError, WireValue};

pub const ENVELOPE_VERSION: u8 = 1;

/// A framed protocol message.
///
/// Layout: `msg_type: u16 BE | length: u32 BE | version: u8 | hint_flag: u8 |
/// [sender hint as text TLV] | payload TLV`. `hint_flag` is 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub msg_type: u16,
    pub sender_hint: Option<String>,
    pub payload: WireValue,
}

impl Envelope {
    pub fn new(msg_type: u16, payload: WireValue) -> Self {
        Self { msg_type, sender_hint: None, payload }
    }

    pub fn with_hint(mut self, hint: impl Into<String>) -> Self {
        self.sender_hint = Some(hint.into());
        self
    }

    pub fn encode(&self) -> Result<Vec<u8>, CodecError> {
        if !tags::is_message(self.msg_type) {
            return Err(CodecError::UnknownTag(self.msg_type));
        }
        let mut body = vec![ENVELOPE_VERSION];
        match &self.sender_hint {
            None => body.push(0),
            Some(h) => {
                body.push(1);
                body.extend(super::encode(&WireValue::Text(h.clone()))?);
            }
        }
        body.extend(super::encode(&self.payload)?);
        let len = u32::try_from(body.len()).map_err(|_| CodecError::Malformed("envelope too large"))?;
        let mut out = Vec::with_capacity(body.len() + 6);
        out.extend_from_slice(&self.msg_type.to_be_bytes());
        out.extend_from_slice(&len.to_be_bytes());
        out.extend(body);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < 8 {
            return Err(CodecError::Malformed("truncated envelope"));
        }
        let msg_type = u16::from_be_bytes([bytes[0], bytes[1]]);
        if !tags::is_message(msg_type) {
            return Err(CodecError::UnknownTag(msg_type));
        }
        let len = u32::from_be_bytes([bytes[2], bytes[3], bytes[4], bytes[5]]) as usize;
        if bytes.len() != 6 + len {
            return Err(CodecError::Malformed("envelope length mismatch"));
        }
        if bytes[6] != ENVELOPE_VERSION {
            return Err(CodecError::Malformed("unsupported envelope version"));
        }
        let mut rest = &bytes[8..];
        let sender_hint = match bytes[7] {
            0 => None,
            1 => {
                let (hint, used) = read_value(rest, 0)?;
                rest = &rest[used..];
                match hint {
                    WireValue::Text(h) => Some(h),
                    _ => return Err(CodecError::Malformed("sender hint must be text")),
                }
            }
            _ => return Err(CodecError::Malformed("invalid hint flag")),
        };
        let (payload, used) = read_value(rest, 0)?;
        if used != rest.len() {
            return Err(CodecError::Malformed("trailing bytes"));
        }
        Ok(Self { msg_type, sender_hint, payload })
    }

    pub fn name(&self) -> &'static str {
        tags::name(self.msg_type).unwrap_or("Unknown")
    }
}
