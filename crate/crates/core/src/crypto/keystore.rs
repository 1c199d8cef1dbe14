//! Passphrase-encrypted key files.
//!
//! The file body is the codec encoding of a [`Keystore`] record: PBKDF2-
//! HMAC-SHA256 derives a ChaCha20-Poly1305 key from the passphrase, which
//! seals the codec bytes of a [`KeystoreContent`].

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::ChaCha20Poly1305;
use sha2::Sha256;

use super::{random_array, CryptoError, Did, DidSecretKeys, Drbg};
use crate::codec::{tags, Bytes, Wire};
use crate::wire_record;

pub const DEFAULT_ITERATIONS: u32 = 100_000;
const AAD: &[u8] = b"pnc/keystore/v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Keystore {
    pub iterations: u32,
    pub salt: Bytes,
    pub nonce: Bytes,
    pub ciphertext: Bytes,
}

wire_record!(Keystore = tags::KEYSTORE; { iterations, salt, nonce, ciphertext });

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeystoreContent {
    pub role: String,
    pub did: Did,
    pub secret: DidSecretKeys,
}

wire_record!(KeystoreContent = tags::KEYSTORE_CONTENT; { role, did, secret });

fn derive(passphrase: &str, salt: &[u8], iterations: u32) -> [u8; 32] {
    let mut key = [0u8; 32];
    pbkdf2::pbkdf2_hmac::<Sha256>(passphrase.as_bytes(), salt, iterations, &mut key);
    key
}

pub fn seal(content: &KeystoreContent, passphrase: &str, iterations: u32, rng: &mut Drbg) -> Keystore {
    let salt: [u8; 16] = random_array(rng);
    let nonce: [u8; 12] = random_array(rng);
    let key = derive(passphrase, &salt, iterations);
    let ciphertext = ChaCha20Poly1305::new(&key.into())
        .encrypt(&nonce.into(), Payload { msg: &content.to_bytes(), aad: AAD })
        .expect("encryption cannot fail for in-memory buffers");
    Keystore { iterations, salt: Bytes(salt.to_vec()), nonce: Bytes(nonce.to_vec()), ciphertext: Bytes(ciphertext) }
}

pub fn open(store: &Keystore, passphrase: &str) -> Result<KeystoreContent, CryptoError> {
    let nonce: [u8; 12] = store.nonce.0.as_slice().try_into().map_err(|_| CryptoError::DecryptFailed)?;
    let key = derive(passphrase, &store.salt, store.iterations);
    let plaintext = ChaCha20Poly1305::new(&key.into())
        .decrypt(&nonce.into(), Payload { msg: &store.ciphertext, aad: AAD })
        .map_err(|_| CryptoError::DecryptFailed)?;
    Ok(KeystoreContent::from_bytes(&plaintext)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{drbg, Concrete, CryptoSuite};

    #[test]
    fn round_trip_and_wrong_passphrase() {
        let mut rng = drbg(9, "ks");
        let keys = Concrete.gen_did_keys(&mut rng);
        let content = KeystoreContent { role: "emsp".into(), did: keys.did.clone(), secret: keys.secret.clone() };
        let ks = seal(&content, "correct horse", 1000, &mut rng);
        assert_eq!(open(&ks, "correct horse").unwrap(), content);
        assert_eq!(open(&ks, "wrong"), Err(CryptoError::DecryptFailed));
        let again = seal(&content, "correct horse", 1000, &mut drbg(9, "ks2"));
        assert_ne!(again, ks);
    }
}
