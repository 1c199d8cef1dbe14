//! Canonical tag-length-value encoding.
//!
//! Every value is framed as `tag: u16 BE | length: u32 BE | payload`. The
//! payload of an integer is its minimal big-endian magnitude (zero is the
//! empty payload), strings are UTF-8, and sequences and records are the
//! concatenation of their encoded children. The decoder rejects every
//! non-canonical form, so `encode(decode(b)) == b` holds for all accepted
//! inputs and hashes, signatures and MACs over encodings are well defined.

mod envelope;
pub mod tags;

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use thiserror::Error;

pub use envelope::{Envelope, ENVELOPE_VERSION};

const HEADER_LEN: usize = 6;
const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("unknown tag {0:#06x}")]
    UnknownTag(u16),
    #[error("malformed encoding: {0}")]
    Malformed(&'static str),
    #[error("expected {expected}, found {found}")]
    Unexpected { expected: String, found: String },
}

/// A structured value with a single canonical byte encoding.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WireValue {
    Uint(BigUint),
    Bytes(Vec<u8>),
    Text(String),
    Seq(Vec<WireValue>),
    Record { tag: u16, fields: Vec<WireValue> },
}

impl WireValue {
    pub fn kind(&self) -> String {
        match self {
            WireValue::Uint(_) => "uint".into(),
            WireValue::Bytes(_) => "bytes".into(),
            WireValue::Text(_) => "text".into(),
            WireValue::Seq(_) => "seq".into(),
            WireValue::Record { tag, .. } => match tags::name(*tag) {
                Some(name) => format!("record {name}"),
                None => format!("record {tag:#06x}"),
            },
        }
    }

    fn validate(&self, depth: usize) -> Result<(), CodecError> {
        if depth > MAX_DEPTH {
            return Err(CodecError::Malformed("nesting too deep"));
        }
        match self {
            WireValue::Record { tag, fields } => {
                if !tags::is_registered_record(*tag) {
                    return Err(CodecError::UnknownTag(*tag));
                }
                fields.iter().try_for_each(|f| f.validate(depth + 1))
            }
            WireValue::Seq(items) => items.iter().try_for_each(|f| f.validate(depth + 1)),
            _ => Ok(()),
        }
    }

    fn write(&self, out: &mut Vec<u8>) {
        let (tag, start) = (self.tag(), out.len());
        out.extend_from_slice(&tag.to_be_bytes());
        out.extend_from_slice(&[0u8; 4]);
        match self {
            WireValue::Uint(n) => {
                if *n != BigUint::default() {
                    out.extend_from_slice(&n.to_bytes_be());
                }
            }
            WireValue::Bytes(b) => out.extend_from_slice(b),
            WireValue::Text(s) => out.extend_from_slice(s.as_bytes()),
            WireValue::Seq(items) => items.iter().for_each(|i| i.write(out)),
            WireValue::Record { fields, .. } => fields.iter().for_each(|f| f.write(out)),
        }
        let len = u32::try_from(out.len() - start - HEADER_LEN).expect("value exceeds 4 GiB");
        out[start + 2..start + HEADER_LEN].copy_from_slice(&len.to_be_bytes());
    }

    fn tag(&self) -> u16 {
        match self {
            WireValue::Uint(_) => tags::UINT,
            WireValue::Bytes(_) => tags::BYTES,
            WireValue::Text(_) => tags::TEXT,
            WireValue::Seq(_) => tags::SEQ,
            WireValue::Record { tag, .. } => *tag,
        }
    }

    /// Encoded length in bytes.
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN
            + match self {
                WireValue::Uint(n) => {
                    if *n == BigUint::default() {
                        0
                    } else {
                        n.bits().div_ceil(8) as usize
                    }
                }
                WireValue::Bytes(b) => b.len(),
                WireValue::Text(s) => s.len(),
                WireValue::Seq(items) => items.iter().map(Self::encoded_len).sum(),
                WireValue::Record { fields, .. } => fields.iter().map(Self::encoded_len).sum(),
            }
    }
}

/// Encodes a value canonically. Fails only on unregistered record tags.
pub fn encode(value: &WireValue) -> Result<Vec<u8>, CodecError> {
    value.validate(0)?;
    let mut out = Vec::with_capacity(value.encoded_len());
    value.write(&mut out);
    Ok(out)
}

/// Decodes exactly one value spanning all of `bytes`.
pub fn decode(bytes: &[u8]) -> Result<WireValue, CodecError> {
    let (value, used) = read_value(bytes, 0)?;
    if used != bytes.len() {
        return Err(CodecError::Malformed("trailing bytes"));
    }
    Ok(value)
}

pub(crate) fn read_value(bytes: &[u8], depth: usize) -> Result<(WireValue, usize), CodecError> {
    if depth > MAX_DEPTH {
        return Err(CodecError::Malformed("nesting too deep"));
    }
    if bytes.len() < HEADER_LEN {
        return Err(CodecError::Malformed("truncated header"));
    }
    let tag = u16::from_be_bytes([bytes[0], bytes[1]]);
    let len = u32::from_be_bytes([bytes[2], bytes[3], bytes[4], bytes[5]]) as usize;
    let payload = bytes.get(HEADER_LEN..HEADER_LEN + len).ok_or(CodecError::Malformed("truncated payload"))?;
    let value = match tag {
        tags::UINT => {
            if payload.first() == Some(&0) {
                return Err(CodecError::Malformed("non-minimal integer"));
            }
            WireValue::Uint(BigUint::from_bytes_be(payload))
        }
        tags::BYTES => WireValue::Bytes(payload.to_vec()),
        tags::TEXT => {
            WireValue::Text(String::from_utf8(payload.to_vec()).map_err(|_| CodecError::Malformed("invalid utf-8"))?)
        }
        tags::SEQ => WireValue::Seq(read_children(payload, depth)?),
        other => {
            if !tags::is_registered_record(other) {
                return Err(CodecError::UnknownTag(other));
            }
            WireValue::Record { tag: other, fields: read_children(payload, depth)? }
        }
    };
    Ok((value, HEADER_LEN + len))
}

fn read_children(mut payload: &[u8], depth: usize) -> Result<Vec<WireValue>, CodecError> {
    let mut items = Vec::new();
    while !payload.is_empty() {
        let (item, used) = read_value(payload, depth + 1)?;
        items.push(item);
        payload = &payload[used..];
    }
    Ok(items)
}

/// Conversion to and from [`WireValue`].
pub trait Wire: Sized {
    fn to_wire(&self) -> WireValue;
    fn from_wire(value: &WireValue) -> Result<Self, CodecError>;

    fn to_bytes(&self) -> Vec<u8> {
        encode(&self.to_wire()).expect("wire types only use registered tags")
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        Self::from_wire(&decode(bytes)?)
    }
}

/// Types that encode as a tagged record with named fields.
pub trait Record: Wire {
    const TAG: u16;
    const FIELDS: &'static [&'static str];
}

fn unexpected(expected: &str, found: &WireValue) -> CodecError {
    CodecError::Unexpected { expected: expected.to_string(), found: found.kind() }
}

/// Sequential field reader used by [`wire_record!`].
pub struct RecordReader<'a> {
    fields: std::slice::Iter<'a, WireValue>,
}

impl<'a> RecordReader<'a> {
    pub fn new(value: &'a WireValue, tag: u16, arity: usize) -> Result<Self, CodecError> {
        match value {
            WireValue::Record { tag: t, fields } if *t == tag => {
                if fields.len() != arity {
                    return Err(CodecError::Malformed("record arity mismatch"));
                }
                Ok(Self { fields: fields.iter() })
            }
            other => Err(unexpected(tags::name(tag).unwrap_or("record"), other)),
        }
    }

    pub fn field<T: Wire>(&mut self) -> Result<T, CodecError> {
        let v = self.fields.next().ok_or(CodecError::Malformed("missing field"))?;
        T::from_wire(v)
    }
}

/// Implements [`Wire`] and [`Record`] for a struct by listing its fields in
/// wire order.
#[macro_export]
macro_rules! wire_record {
    (impl[$($gen:tt)*] $ty:ty = $tag:expr ; { $($field:ident),* $(,)? }) => {
        impl<$($gen)*> $crate::codec::Wire for $ty {
            fn to_wire(&self) -> $crate::codec::WireValue {
                $crate::codec::WireValue::Record {
                    tag: $tag,
                    fields: vec![$($crate::codec::Wire::to_wire(&self.$field)),*],
                }
            }
            fn from_wire(v: &$crate::codec::WireValue) -> Result<Self, $crate::codec::CodecError> {
                let mut _r = $crate::codec::RecordReader::new(
                    v, $tag, <Self as $crate::codec::Record>::FIELDS.len())?;
                Ok(Self { $($field: _r.field()?),* })
            }
        }
        impl<$($gen)*> $crate::codec::Record for $ty {
            const TAG: u16 = $tag;
            const FIELDS: &'static [&'static str] = &[$(stringify!($field)),*];
        }
    };
    ($ty:ty = $tag:expr ; { $($field:ident),* $(,)? }) => {
        $crate::wire_record!(impl[] $ty = $tag; { $($field),* });
    };
}

impl Wire for WireValue {
    fn to_wire(&self) -> WireValue {
        self.clone()
    }
    fn from_wire(value: &WireValue) -> Result<Self, CodecError> {
        Ok(value.clone())
    }
}

impl Wire for BigUint {
    fn to_wire(&self) -> WireValue {
        WireValue::Uint(self.clone())
    }
    fn from_wire(value: &WireValue) -> Result<Self, CodecError> {
        match value {
            WireValue::Uint(n) => Ok(n.clone()),
            other => Err(unexpected("uint", other)),
        }
    }
}

macro_rules! wire_uint {
    ($($t:ty),*) => {$(
        impl Wire for $t {
            fn to_wire(&self) -> WireValue {
                WireValue::Uint(BigUint::from(*self))
            }
            fn from_wire(value: &WireValue) -> Result<Self, CodecError> {
                let n = BigUint::from_wire(value)?;
                <$t>::try_from(n).map_err(|_| CodecError::Malformed("integer out of range"))
            }
        }
    )*};
}
wire_uint!(u8, u16, u32, u64);

impl Wire for bool {
    fn to_wire(&self) -> WireValue {
        WireValue::Uint(BigUint::from(u8::from(*self)))
    }
    fn from_wire(value: &WireValue) -> Result<Self, CodecError> {
        match u8::from_wire(value)? {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(CodecError::Malformed("boolean out of range")),
        }
    }
}

impl Wire for String {
    fn to_wire(&self) -> WireValue {
        WireValue::Text(self.clone())
    }
    fn from_wire(value: &WireValue) -> Result<Self, CodecError> {
        match value {
            WireValue::Text(s) => Ok(s.clone()),
            other => Err(unexpected("text", other)),
        }
    }
}

/// Raw byte strings. Distinct from `Vec<T>` so they encode as one leaf.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Bytes(pub Vec<u8>);

impl Wire for Bytes {
    fn to_wire(&self) -> WireValue {
        WireValue::Bytes(self.0.clone())
    }
    fn from_wire(value: &WireValue) -> Result<Self, CodecError> {
        match value {
            WireValue::Bytes(b) => Ok(Bytes(b.clone())),
            other => Err(unexpected("bytes", other)),
        }
    }
}

impl From<Vec<u8>> for Bytes {
    fn from(v: Vec<u8>) -> Self {
        Bytes(v)
    }
}

impl std::ops::Deref for Bytes {
    type Target = [u8];
    fn deref(&self) -> &[u8] {
        &self.0
    }
}

impl<const N: usize> Wire for [u8; N] {
    fn to_wire(&self) -> WireValue {
        WireValue::Bytes(self.to_vec())
    }
    fn from_wire(value: &WireValue) -> Result<Self, CodecError> {
        match value {
            WireValue::Bytes(b) => b.as_slice().try_into().map_err(|_| CodecError::Malformed("fixed-length bytes")),
            other => Err(unexpected("bytes", other)),
        }
    }
}

impl<T: Wire> Wire for Vec<T> {
    fn to_wire(&self) -> WireValue {
        WireValue::Seq(self.iter().map(Wire::to_wire).collect())
    }
    fn from_wire(value: &WireValue) -> Result<Self, CodecError> {
        match value {
            WireValue::Seq(items) => items.iter().map(T::from_wire).collect(),
            other => Err(unexpected("seq", other)),
        }
    }
}

/// `None` is the empty sequence, `Some(x)` the one-element sequence.
impl<T: Wire> Wire for Option<T> {
    fn to_wire(&self) -> WireValue {
        WireValue::Seq(self.iter().map(Wire::to_wire).collect())
    }
    fn from_wire(value: &WireValue) -> Result<Self, CodecError> {
        match value {
            WireValue::Seq(items) if items.is_empty() => Ok(None),
            WireValue::Seq(items) if items.len() == 1 => Ok(Some(T::from_wire(&items[0])?)),
            WireValue::Seq(_) => Err(CodecError::Malformed("option with more than one element")),
            other => Err(unexpected("seq", other)),
        }
    }
}

impl<A: Wire, B: Wire> Wire for (A, B) {
    fn to_wire(&self) -> WireValue {
        WireValue::Seq(vec![self.0.to_wire(), self.1.to_wire()])
    }
    fn from_wire(value: &WireValue) -> Result<Self, CodecError> {
        match value {
            WireValue::Seq(items) if items.len() == 2 => Ok((A::from_wire(&items[0])?, B::from_wire(&items[1])?)),
            other => Err(unexpected("pair", other)),
        }
    }
}

/// Maps encode as sequences of pairs in strictly ascending key order; any
/// other order is rejected so that every map has exactly one encoding.
impl<K: Wire + Ord + Clone, V: Wire + Clone> Wire for BTreeMap<K, V> {
    fn to_wire(&self) -> WireValue {
        WireValue::Seq(self.iter().map(|(k, v)| (k.clone(), v.clone()).to_wire()).collect())
    }
    fn from_wire(value: &WireValue) -> Result<Self, CodecError> {
        let pairs = Vec::<(K, V)>::from_wire(value)?;
        if pairs.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(CodecError::Malformed("map keys not strictly ascending"));
        }
        Ok(pairs.into_iter().collect())
    }
}

impl<T: Wire + Ord + Clone> Wire for BTreeSet<T> {
    fn to_wire(&self) -> WireValue {
        WireValue::Seq(self.iter().map(Wire::to_wire).collect())
    }
    fn from_wire(value: &WireValue) -> Result<Self, CodecError> {
        let items = Vec::<T>::from_wire(value)?;
        if items.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CodecError::Malformed("set elements not strictly ascending"));
        }
        Ok(items.into_iter().collect())
    }
}

/// Flattens a value into `(path, leaf)` pairs. Record fields are named via
/// `field_names` when it knows the tag, sequence items by index.
pub fn flatten(
    value: &WireValue,
    prefix: &str,
    field_names: &dyn Fn(u16) -> Option<&'static [&'static str]>,
    out: &mut Vec<(String, WireValue)>,
) {
    match value {
        WireValue::Record { tag, fields } => {
            let names = field_names(*tag);
            for (i, f) in fields.iter().enumerate() {
                let seg = names.and_then(|n| n.get(i).copied()).map_or_else(|| i.to_string(), str::to_string);
                flatten(f, &join(prefix, &seg), field_names, out);
            }
        }
        WireValue::Seq(items) => {
            for (i, item) in items.iter().enumerate() {
                flatten(item, &join(prefix, &i.to_string()), field_names, out);
            }
        }
        leaf => out.push((prefix.to_string(), leaf.clone())),
    }
}

fn join(prefix: &str, seg: &str) -> String {
    if prefix.is_empty() {
        seg.to_string()
    } else {
        format!("{prefix}.{seg}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uint(n: u64) -> WireValue {
        WireValue::Uint(BigUint::from(n))
    }

    #[test]
    fn zero_has_empty_magnitude() {
        let b = encode(&uint(0)).unwrap();
        assert_eq!(b, vec![0xff, 0x01, 0, 0, 0, 0]);
        assert_eq!(decode(&b).unwrap(), uint(0));
    }

    #[test]
    fn text_layout() {
        let b = encode(&WireValue::Text("EMSP-A".into())).unwrap();
        assert_eq!(&b[..6], &[0xff, 0x03, 0, 0, 0, 6]);
        assert_eq!(&b[6..], b"EMSP-A");
    }

    #[test]
    fn integer_layout_is_minimal_big_endian() {
        let b = encode(&uint(0x0102)).unwrap();
        assert_eq!(b, vec![0xff, 0x01, 0, 0, 0, 2, 0x01, 0x02]);
    }

    #[test]
    fn rejects_leading_zero_integer() {
        let b = vec![0xff, 0x01, 0, 0, 0, 2, 0x00, 0x02];
        assert_eq!(decode(&b), Err(CodecError::Malformed("non-minimal integer")));
    }

    #[test]
    fn rejects_truncation_and_trailing_bytes() {
        let b = encode(&WireValue::Bytes(vec![1, 2, 3])).unwrap();
        assert!(matches!(decode(&b[..4]), Err(CodecError::Malformed(_))));
        assert!(matches!(decode(&b[..b.len() - 1]), Err(CodecError::Malformed(_))));
        let mut longer = b.clone();
        longer.push(0);
        assert_eq!(decode(&longer), Err(CodecError::Malformed("trailing bytes")));
    }

    #[test]
    fn unknown_record_tag() {
        let v = WireValue::Record { tag: 0x7777, fields: vec![] };
        assert_eq!(encode(&v), Err(CodecError::UnknownTag(0x7777)));
        assert_eq!(decode(&[0x77, 0x77, 0, 0, 0, 0]), Err(CodecError::UnknownTag(0x7777)));
    }

    #[test]
    fn rejects_invalid_utf8() {
        assert!(decode(&[0xff, 0x03, 0, 0, 0, 1, 0xff]).is_err());
    }

    #[test]
    fn encoded_len_matches() {
        let v = WireValue::Record {
            tag: tags::ATTRIBUTE,
            fields: vec![WireValue::Text("a".into()), WireValue::Seq(vec![uint(300), uint(0)])],
        };
        assert_eq!(encode(&v).unwrap().len(), v.encoded_len());
    }

    #[test]
    fn map_order_enforced() {
        let bad = WireValue::Seq(vec![
            WireValue::Seq(vec![WireValue::Text("b".into()), uint(1)]),
            WireValue::Seq(vec![WireValue::Text("a".into()), uint(2)]),
        ]);
        assert!(BTreeMap::<String, u64>::from_wire(&bad).is_err());
    }

    #[test]
    fn option_encoding() {
        let some: Option<u64> = Some(5);
        assert_eq!(Option::<u64>::from_wire(&some.to_wire()).unwrap(), Some(5));
        assert_eq!(Option::<u64>::from_wire(&None::<u64>.to_wire()).unwrap(), None);
    }

    #[test]
    fn depth_limit() {
        let mut v = uint(1);
        for _ in 0..80 {
            v = WireValue::Seq(vec![v]);
        }
        assert!(encode(&v).is_err());
    }
}
