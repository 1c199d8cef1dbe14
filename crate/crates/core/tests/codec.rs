use std::collections::HashSet;

use num_bigint::BigUint;
use pnc_ssi::codec::{decode, encode, tags, CodecError, Envelope, WireValue};
use proptest::prelude::*;
use proptest::strategy::ValueTree;

const RECORD_TAGS: &[u16] = &[tags::WITNESS, tags::PROOF_REQUEST, tags::DELTA_ENTRY, tags::ATTRIBUTE];

fn wire_value() -> impl Strategy<Value = WireValue> {
    let leaf = prop_oneof![
        proptest::collection::vec(any::<u8>(), 0..40).prop_map(|b| WireValue::Uint(BigUint::from_bytes_be(&b))),
        proptest::collection::vec(any::<u8>(), 0..40).prop_map(WireValue::Bytes),
        "[a-zA-Z0-9 _:-]{0,24}".prop_map(WireValue::Text),
    ];
    leaf.prop_recursive(4, 64, 6, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 0..6).prop_map(WireValue::Seq),
            (proptest::sample::select(RECORD_TAGS), proptest::collection::vec(inner, 0..6))
                .prop_map(|(tag, fields)| WireValue::Record { tag, fields }),
        ]
    })
}

/// Independent reference encoder written from the TLV layout description.
fn reference_encode(v: &WireValue) -> Vec<u8> {
    let (tag, payload) = match v {
        WireValue::Uint(n) => (0xff01u16, if n.bits() == 0 { vec![] } else { n.to_bytes_be() }),
        WireValue::Bytes(b) => (0xff02, b.clone()),
        WireValue::Text(t) => (0xff03, t.as_bytes().to_vec()),
        WireValue::Seq(items) => (0xff04, items.iter().flat_map(reference_encode).collect()),
        WireValue::Record { tag, fields } => (*tag, fields.iter().flat_map(reference_encode).collect()),
    };
    let mut out = tag.to_be_bytes().to_vec();
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend(payload);
    out
}

proptest! {
    #[test]
    fn round_trip(v in wire_value()) {
        let bytes = encode(&v).unwrap();
        prop_assert_eq!(decode(&bytes).unwrap(), v.clone());
        prop_assert_eq!(encode(&decode(&bytes).unwrap()).unwrap(), bytes.clone());
        prop_assert_eq!(v.encoded_len(), bytes.len());
    }

    #[test]
    fn matches_reference_layout(v in wire_value()) {
        prop_assert_eq!(encode(&v).unwrap(), reference_encode(&v));
    }

    #[test]
    fn single_byte_mutation_never_aliases(v in wire_value(), pos in any::<prop::sample::Index>(), flip in 1u8..=255) {
        let bytes = encode(&v).unwrap();
        let mut mutated = bytes.clone();
        let i = pos.index(mutated.len());
        mutated[i] ^= flip;
        if let Ok(other) = decode(&mutated) {
            prop_assert_ne!(&other, &v);
            prop_assert_eq!(encode(&other).unwrap(), mutated);
        }
    }

    #[test]
    fn truncation_is_rejected(v in wire_value(), cut in any::<prop::sample::Index>()) {
        let bytes = encode(&v).unwrap();
        let keep = cut.index(bytes.len());
        prop_assert!(decode(&bytes[..keep]).is_err());
    }

    #[test]
    fn envelope_round_trip(v in wire_value(), hint in proptest::option::of("did:pnc:[0-9a-f]{32}")) {
        let mut env = Envelope::new(tags::REQUEST_PROOF_REQ, v);
        env.sender_hint = hint;
        let bytes = env.encode().unwrap();
        prop_assert_eq!(Envelope::decode(&bytes).unwrap(), env);
    }
}

#[test]
fn distinct_values_have_distinct_encodings() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let strategy = wire_value();
    let mut seen = std::collections::HashMap::new();
    for _ in 0..3000 {
        let v = strategy.new_tree(&mut runner).unwrap().current();
        let bytes = encode(&v).unwrap();
        if let Some(prev) = seen.insert(bytes, v.clone()) {
            assert_eq!(prev, v);
        }
    }
    let unique: HashSet<_> = seen.values().collect();
    assert_eq!(unique.len(), seen.len());
}

#[test]
fn zero_and_text_examples() {
    assert_eq!(encode(&WireValue::Uint(BigUint::default())).unwrap(), vec![0xff, 0x01, 0, 0, 0, 0]);
    let text = encode(&WireValue::Text("EMSP-A".into())).unwrap();
    assert_eq!(&text[..6], &[0xff, 0x03, 0, 0, 0, 6]);
    assert_eq!(&text[6..], b"EMSP-A");
}

#[test]
fn non_canonical_forms_are_rejected() {
    assert_eq!(decode(&[0xff, 0x01, 0, 0, 0, 2, 0, 5]), Err(CodecError::Malformed("non-minimal integer")));
    assert!(matches!(decode(&[0xff, 0x02, 0, 0]), Err(CodecError::Malformed(_))));
    assert!(matches!(decode(&[0xff, 0x02, 0, 0, 0, 3, 1]), Err(CodecError::Malformed(_))));
    assert_eq!(decode(&[0x7e, 0x7e, 0, 0, 0, 0]), Err(CodecError::UnknownTag(0x7e7e)));
    let unknown = WireValue::Record { tag: 0x7e7e, fields: vec![] };
    assert_eq!(encode(&unknown), Err(CodecError::UnknownTag(0x7e7e)));
}

#[test]
fn every_message_has_one_tag() {
    let messages: Vec<_> = tags::all().iter().filter(|(t, _)| tags::is_message(*t)).collect();
    assert_eq!(messages.len(), 20);
    let names: HashSet<_> = messages.iter().map(|(_, n)| n).collect();
    assert_eq!(names.len(), messages.len());
    for (tag, name) in messages {
        assert_eq!(tags::by_name(name), Some(*tag));
    }
    assert_eq!(tags::INIT_NYM_REQ, 0x0001);
    assert_eq!(tags::BILLING_FORWARD_REQ, 0x0010);
}
