//! DID keypairs, sealed boxes and HMAC for the concrete suite.
//!
//! Sealed box layout: `version | flags | ephemeral_pk[32] | [sender_pk[32]] |
//! nonce[12] | ciphertext`. The key is HKDF-SHA256 over the ephemeral DH
//! secret and, for authenticated boxes, the static sender DH secret.

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::ChaCha20Poly1305;
use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use hkdf::Hkdf;
use hmac::{Hmac, Mac};
use sha2::Sha256;
use x25519_dalek::{PublicKey, StaticSecret};

use super::{random_array, ContractKey, CryptoError, Did, DidKeys, DidPublicKeys, DidSecretKeys, Drbg, Opened};
use crate::codec::Bytes;

const SEAL_VERSION: u8 = 1;
const FLAG_SENDER: u8 = 1;
const KEY_INFO: &[u8] = b"pnc/seal/v1";

pub(crate) fn gen_did_keys(rng: &mut Drbg) -> DidKeys {
    let sig_seed: [u8; 32] = random_array(rng);
    let enc_seed: [u8; 32] = random_array(rng);
    keys_from_seeds(sig_seed, enc_seed)
}

pub(crate) fn keys_from_seeds(sig_seed: [u8; 32], enc_seed: [u8; 32]) -> DidKeys {
    let signing = SigningKey::from_bytes(&sig_seed);
    let enc = StaticSecret::from(enc_seed);
    let public = DidPublicKeys {
        sig: Bytes(signing.verifying_key().to_bytes().to_vec()),
        enc: Bytes(PublicKey::from(&enc).to_bytes().to_vec()),
    };
    DidKeys {
        did: Did::from_public(&public),
        public,
        secret: DidSecretKeys { sig: Bytes(sig_seed.to_vec()), enc: Bytes(enc_seed.to_vec()) },
    }
}

fn signing_key(sk: &DidSecretKeys) -> Option<SigningKey> {
    let seed: [u8; 32] = sk.sig.0.as_slice().try_into().ok()?;
    Some(SigningKey::from_bytes(&seed))
}

fn enc_secret(sk: &DidSecretKeys) -> Option<StaticSecret> {
    let seed: [u8; 32] = sk.enc.0.as_slice().try_into().ok()?;
    Some(StaticSecret::from(seed))
}

fn enc_public(bytes: &[u8]) -> Option<PublicKey> {
    let b: [u8; 32] = bytes.try_into().ok()?;
    Some(PublicKey::from(b))
}

pub(crate) fn sign(sk: &DidSecretKeys, msg: &[u8]) -> Vec<u8> {
    match signing_key(sk) {
        Some(k) => k.sign(msg).to_bytes().to_vec(),
        None => Vec::new(),
    }
}

pub(crate) fn verify(pk: &DidPublicKeys, msg: &[u8], sig: &[u8]) -> bool {
    let Ok(pk_bytes) = <[u8; 32]>::try_from(pk.sig.as_ref()) else { return false };
    let Ok(vk) = VerifyingKey::from_bytes(&pk_bytes) else { return false };
    let Ok(sig) = Signature::from_slice(sig) else { return false };
    vk.verify_strict(msg, &sig).is_ok()
}

fn derive_key(shared: &[&[u8]], header: &[u8]) -> [u8; 32] {
    let ikm: Vec<u8> = shared.concat();
    let mut okm = [0u8; 32];
    Hkdf::<Sha256>::new(None, &ikm)
        .expand_multi_info(&[KEY_INFO, header], &mut okm)
        .expect("32 bytes is a valid HKDF output length");
    okm
}

pub(crate) fn seal(to: &DidPublicKeys, from: Option<&DidSecretKeys>, msg: &[u8], rng: &mut Drbg) -> Vec<u8> {
    let recipient = enc_public(&to.enc).expect("recipient encryption key is 32 bytes");
    let eph = StaticSecret::from(random_array::<32>(rng));
    let eph_pub = PublicKey::from(&eph);
    let mut header = vec![SEAL_VERSION, 0];
    header.extend_from_slice(eph_pub.as_bytes());
    let mut shared = vec![eph.diffie_hellman(&recipient).to_bytes()];
    if let Some(sender) = from.and_then(enc_secret) {
        header[1] = FLAG_SENDER;
        header.extend_from_slice(PublicKey::from(&sender).as_bytes());
        shared.push(sender.diffie_hellman(&recipient).to_bytes());
    }
    header.extend_from_slice(recipient.as_bytes());
    let key = derive_key(&shared.iter().map(|s| s.as_slice()).collect::<Vec<_>>(), &header);
    header.truncate(header.len() - 32);
    let nonce: [u8; 12] = random_array(rng);
    let ct = ChaCha20Poly1305::new(&key.into())
        .encrypt(&nonce.into(), Payload { msg, aad: &header })
        .expect("encryption cannot fail for in-memory buffers");
    let mut out = header;
    out.extend_from_slice(&nonce);
    out.extend(ct);
    out
}

pub(crate) fn open(sk: &DidSecretKeys, blob: &[u8]) -> Result<Opened, CryptoError> {
    let secret = enc_secret(sk).ok_or(CryptoError::DecryptFailed)?;
    let own_pub = PublicKey::from(&secret);
    if blob.len() < 2 || blob[0] != SEAL_VERSION || blob[1] > FLAG_SENDER {
        return Err(CryptoError::DecryptFailed);
    }
    let with_sender = blob[1] == FLAG_SENDER;
    let header_len = 2 + 32 + if with_sender { 32 } else { 0 };
    if blob.len() < header_len + 12 + 16 {
        return Err(CryptoError::DecryptFailed);
    }
    let eph = enc_public(&blob[2..34]).ok_or(CryptoError::DecryptFailed)?;
    let mut shared = Vec::new();
    let ss = secret.diffie_hellman(&eph);
    if !ss.was_contributory() {
        return Err(CryptoError::DecryptFailed);
    }
    shared.push(ss.to_bytes());
    let sender = if with_sender {
        let spk = enc_public(&blob[34..66]).ok_or(CryptoError::DecryptFailed)?;
        let ss = secret.diffie_hellman(&spk);
        if !ss.was_contributory() {
            return Err(CryptoError::DecryptFailed);
        }
        shared.push(ss.to_bytes());
        Some(Bytes(blob[34..66].to_vec()))
    } else {
        None
    };
    let header = &blob[..header_len];
    let mut info = header.to_vec();
    info.extend_from_slice(own_pub.as_bytes());
    let key = derive_key(&shared.iter().map(|s| s.as_slice()).collect::<Vec<_>>(), &info);
    let nonce: [u8; 12] = blob[header_len..header_len + 12].try_into().expect("length checked");
    let plaintext = ChaCha20Poly1305::new(&key.into())
        .decrypt(&nonce.into(), Payload { msg: &blob[header_len + 12..], aad: header })
        .map_err(|_| CryptoError::DecryptFailed)?;
    Ok(Opened { plaintext, sender })
}

pub(crate) fn hmac_sha256(key: &[u8], msg: &[u8]) -> Vec<u8> {
    let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(key).expect("HMAC accepts any key length");
    mac.update(msg);
    mac.finalize().into_bytes().to_vec()
}

pub(crate) fn hmac_tag(key: &ContractKey, msg: &[u8]) -> Vec<u8> {
    hmac_sha256(&key.0, msg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::drbg;

    #[test]
    fn seal_round_trip_and_randomization() {
        let mut rng = drbg(1, "seal");
        let a = gen_did_keys(&mut rng);
        let b = gen_did_keys(&mut rng);
        let c1 = seal(&b.public, None, b"hello", &mut rng);
        let c2 = seal(&b.public, None, b"hello", &mut rng);
        assert_ne!(c1, c2);
        let opened = open(&b.secret, &c1).unwrap();
        assert_eq!(opened.plaintext, b"hello");
        assert_eq!(opened.sender, None);
        let auth = seal(&b.public, Some(&a.secret), b"hi", &mut rng);
        let opened = open(&b.secret, &auth).unwrap();
        assert_eq!(opened.sender.as_deref(), Some(a.public.enc.as_ref()));
        assert_eq!(open(&a.secret, &auth), Err(CryptoError::DecryptFailed));
    }

    #[test]
    fn tampering_is_detected() {
        let mut rng = drbg(2, "seal");
        let b = gen_did_keys(&mut rng);
        let other = gen_did_keys(&mut rng);
        let ct = seal(&b.public, Some(&other.secret), b"payload", &mut rng);
        for i in 0..ct.len() {
            let mut m = ct.clone();
            m[i] ^= 0x01;
            assert!(open(&b.secret, &m).is_err(), "byte {i}");
        }
        assert!(open(&b.secret, &ct[..ct.len() - 1]).is_err());
    }

    #[test]
    fn signatures() {
        let mut rng = drbg(3, "sig");
        let a = gen_did_keys(&mut rng);
        let b = gen_did_keys(&mut rng);
        let sig = sign(&a.secret, b"msg");
        assert!(verify(&a.public, b"msg", &sig));
        assert!(!verify(&a.public, b"msh", &sig));
        assert!(!verify(&b.public, b"msg", &sig));
        assert!(!verify(&a.public, b"msg", &sig[..63]));
        let mut bad = sig.clone();
        bad[10] ^= 0x80;
        assert!(!verify(&a.public, b"msg", &bad));
    }
}
