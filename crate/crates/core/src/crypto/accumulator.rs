//! RSA accumulator over the issuer's hidden-order group.
//!
//! `V = u^(e_1 * ... * e_k) mod n` for the active elements. Adding multiplies
//! the exponent; removal needs the group order and is done by the issuer.

use std::collections::BTreeSet;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::One;

use super::bigint::{mod_inverse, pow_signed, random_unit};
use super::cl::ClAccParams;
use super::{CryptoError, Drbg};

/// A random quadratic residue modulo `n`.
pub fn random_qr(rng: &mut Drbg, n: &BigUint) -> BigUint {
    let x = random_unit(rng, n);
    &x * &x % n
}

pub fn setup(n: &BigUint, rng: &mut Drbg) -> ClAccParams {
    ClAccParams { modulus: n.clone(), base: random_qr(rng, n), g: random_qr(rng, n), h: random_qr(rng, n) }
}

pub fn add(params: &ClAccParams, value: &BigUint, e: &BigUint) -> BigUint {
    value.modpow(e, &params.modulus)
}

/// `value^(1/e)`, using the group order `p'q'`.
pub fn remove(params: &ClAccParams, order: &BigUint, value: &BigUint, e: &BigUint) -> Result<BigUint, CryptoError> {
    let inv = mod_inverse(e, order).ok_or(CryptoError::Unsupported("element not invertible".into()))?;
    Ok(value.modpow(&inv, &params.modulus))
}

/// Accumulator value recomputed from scratch for an active set.
pub fn recompute(params: &ClAccParams, active: &BTreeSet<BigUint>) -> BigUint {
    let product: BigUint = active.iter().product();
    params.base.modpow(&product, &params.modulus)
}

pub fn witness_after_add(params: &ClAccParams, w: &BigUint, added: &BigUint) -> BigUint {
    w.modpow(added, &params.modulus)
}

/// Witness update for the removal of `removed` (distinct from `own`), where
/// `new_value` is the accumulator after removal.
pub fn witness_after_remove(
    params: &ClAccParams,
    w: &BigUint,
    own: &BigUint,
    removed: &BigUint,
    new_value: &BigUint,
) -> Result<BigUint, CryptoError> {
    let g = BigInt::from(own.clone()).extended_gcd(&BigInt::from(removed.clone()));
    if !g.gcd.is_one() {
        return Err(CryptoError::UnknownElement);
    }
    // a * own + b * removed = 1
    let n = &params.modulus;
    Ok(pow_signed(w, &g.y, n) * pow_signed(new_value, &g.x, n) % n)
}

pub fn is_member(params: &ClAccParams, own: &BigUint, w: &BigUint, value: &BigUint) -> bool {
    &w.modpow(own, &params.modulus) == value
}
