//! Random integers, primality testing and signed modular exponentiation.

use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Zero};

use super::Drbg;

const SIEVE_LIMIT: u32 = 1 << 14;
const MR_ROUNDS: usize = 24;

/// Odd primes below 2^14.
pub fn small_primes() -> &'static [u32] {
    static PRIMES: OnceLock<Vec<u32>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        let n = SIEVE_LIMIT as usize;
        let mut composite = vec![false; n];
        let mut out = Vec::new();
        for i in 2..n {
            if !composite[i] {
                if i > 2 {
                    out.push(i as u32);
                }
                let mut j = i * i;
                while j < n {
                    composite[j] = true;
                    j += i;
                }
            }
        }
        out
    })
}

/// Uniform in `[0, 2^bits)`.
pub fn random_bits(rng: &mut Drbg, bits: u64) -> BigUint {
    rng.gen_biguint(bits)
}

/// Uniform among integers with exactly `bits` bits.
pub fn random_exact_bits(rng: &mut Drbg, bits: u64) -> BigUint {
    assert!(bits > 0);
    let mut n = rng.gen_biguint(bits);
    n.set_bit(bits - 1, true);
    n
}

/// Uniform in `[0, bound)`.
pub fn random_below(rng: &mut Drbg, bound: &BigUint) -> BigUint {
    rng.gen_biguint_below(bound)
}

/// A uniformly random element of `Z_n^*`.
pub fn random_unit(rng: &mut Drbg, n: &BigUint) -> BigUint {
    loop {
        let x = random_below(rng, n);
        if x > BigUint::one() && x.gcd(n).is_one() {
            return x;
        }
    }
}

fn trial_division(n: &BigUint) -> Option<bool> {
    if n < &BigUint::from(2u8) {
        return Some(false);
    }
    if n.is_even() {
        return Some(n == &BigUint::from(2u8));
    }
    for &p in small_primes() {
        let p_big = BigUint::from(p);
        if n == &p_big {
            return Some(true);
        }
        if (n % p).is_zero() {
            return Some(false);
        }
    }
    None
}

fn fermat_base2(n: &BigUint) -> bool {
    BigUint::from(2u8).modpow(&(n - 1u8), n).is_one()
}

/// Miller-Rabin with random bases after trial division.
pub fn is_probable_prime(n: &BigUint, rng: &mut Drbg) -> bool {
    if let Some(verdict) = trial_division(n) {
        return verdict;
    }
    miller_rabin(n, MR_ROUNDS, rng)
}

fn miller_rabin(n: &BigUint, rounds: usize, rng: &mut Drbg) -> bool {
    let one = BigUint::one();
    let n_minus_1 = n - 1u8;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    let upper = n - 3u8;
    'witness: for _ in 0..rounds {
        let a = random_below(rng, &upper) + 2u8;
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&BigUint::from(2u8), n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// A random prime with exactly `bits` bits.
pub fn random_prime(rng: &mut Drbg, bits: u64) -> BigUint {
    assert!(bits >= 8);
    loop {
        let mut c = random_exact_bits(rng, bits);
        c.set_bit(0, true);
        if is_probable_prime(&c, rng) {
            return c;
        }
    }
}

/// A random prime in `[2^start_bits, 2^start_bits + 2^range_bits)`.
pub fn random_prime_in_interval(rng: &mut Drbg, start_bits: u64, range_bits: u64) -> BigUint {
    let base = BigUint::one() << start_bits;
    let span = BigUint::one() << range_bits;
    loop {
        let mut c = &base + random_bits(rng, range_bits);
        c.set_bit(0, true);
        if c < &base + &span && is_probable_prime(&c, rng) {
            return c;
        }
    }
}

/// A random safe prime `p = 2q + 1` with exactly `bits` bits and the two top
/// bits set, so that the product of two such primes has exactly `2 * bits`
/// bits. Returns `(p, q)`.
pub fn random_safe_prime(rng: &mut Drbg, bits: u64) -> (BigUint, BigUint) {
    assert!(bits >= 32, "safe primes below 32 bits are not supported");
    let q_bits = bits - 1;
    let sieve: Vec<u32> =
        small_primes().iter().copied().filter(|&p| u64::from(p) < (1u64 << (q_bits.min(40) - 2))).collect();
    loop {
        let mut q = random_exact_bits(rng, q_bits);
        q.set_bit(q_bits - 2, true);
        q.set_bit(0, true);
        let mut residues: Vec<u32> = sieve.iter().map(|&p| (&q % p).try_into().expect("residue below u32")).collect();
        let mut delta = 0u32;
        while delta < (1 << 16) {
            let survives = residues.iter().zip(&sieve).all(|(&r, &p)| r != 0 && (2 * r + 1) % p != 0);
            if survives {
                let cand = &q + delta;
                if cand.bits() == q_bits {
                    let p = (&cand << 1u8) + 1u8;
                    if fermat_base2(&cand) && fermat_base2(&p) && miller_rabin(&cand, MR_ROUNDS, rng) {
                        // With q prime, 2^(p-1) = 1 (mod p) and gcd(2^2 - 1, p) = 1
                        // certify p (Pocklington).
                        return (p, cand);
                    }
                }
            }
            for (r, &p) in residues.iter_mut().zip(&sieve) {
                *r += 2;
                if *r >= p {
                    *r -= p;
                }
            }
            delta += 2;
        }
    }
}

/// `base^exp mod n` for a signed exponent. Negative exponents use the
/// modular inverse of `base`, which must exist.
pub fn pow_signed(base: &BigUint, exp: &BigInt, n: &BigUint) -> BigUint {
    let (sign, mag) = (exp.sign(), exp.magnitude());
    let r = base.modpow(mag, n);
    if sign == Sign::Minus {
        mod_inverse(&r, n).expect("base must be a unit")
    } else {
        r
    }
}

/// Inverse of `a` modulo `n`, if `gcd(a, n) = 1`.
pub fn mod_inverse(a: &BigUint, n: &BigUint) -> Option<BigUint> {
    let a = BigInt::from(a % n);
    let n_int = BigInt::from(n.clone());
    let g = a.extended_gcd(&n_int);
    if !g.gcd.is_one() {
        return None;
    }
    let x = g.x.mod_floor(&n_int);
    x.to_biguint()
}

/// Product of `base_i^exp_i mod n`.
pub fn multi_pow(terms: &[(&BigUint, &BigUint)], n: &BigUint) -> BigUint {
    terms.iter().fold(BigUint::one(), |acc, (b, e)| acc * b.modpow(e, n) % n)
}
