//! Small big-integer helpers: uniform sampling, modular inverse, and a
//! Miller-Rabin primality test.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::RngCore;

/// Uniform integer in `[0, bound)` by rejection sampling.
pub fn random_below<R: RngCore + ?Sized>(rng: &mut R, bound: &BigUint) -> BigUint {
    assert!(!bound.is_zero(), "empty range");
    let bits = bound.bits() as usize;
    let bytes = bits.div_ceil(8);
    let excess = bytes * 8 - bits;
    let mut buf = vec![0u8; bytes];
    loop {
        rng.fill_bytes(&mut buf);
        buf[0] &= 0xFF >> excess;
        let v = BigUint::from_bytes_be(&buf);
        if &v < bound {
            return v;
        }
    }
}

/// Uniform integer in `[1, n - 1]`.
pub fn random_nonzero_below<R: RngCore + ?Sized>(rng: &mut R, n: &BigUint) -> BigUint {
    loop {
        let v = random_below(rng, n);
        if !v.is_zero() {
            return v;
        }
    }
}

/// `a^-1 mod p` for prime `p` via Fermat; `None` when `a ≡ 0`.
pub fn inv_mod_prime(a: &BigUint, p: &BigUint) -> Option<BigUint> {
    let a = a % p;
    if a.is_zero() {
        return None;
    }
    Some(a.modpow(&(p - 2u32), p))
}

/// Miller-Rabin with `rounds` random bases drawn from `rng`.
pub fn is_probable_prime<R: RngCore + ?Sized>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    for p in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let p = BigUint::from(p);
        if n == &p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }

    let n_minus_1 = n - 1u32;
    let mut d = n_minus_1.clone();
    let mut s = 0u32;
    while d.is_even() {
        d >>= 1;
        s += 1;
    }

    let base_range = n - 3u32;
    'witness: for _ in 0..rounds {
        let a = random_below(rng, &base_range) + 2u32;
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn primality_small_and_known() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let primes: Vec<u32> = (2..200u32).filter(|n| (2..*n).all(|d| n % d != 0)).collect();
        for n in 0..200u32 {
            assert_eq!(is_probable_prime(&BigUint::from(n), 16, &mut rng), primes.contains(&n), "n = {n}");
        }
        // 2^127 - 1 is prime; the Fermat number F_7 = 2^128 + 1 is not
        let m127 = (BigUint::one() << 127u32) - 1u32;
        assert!(is_probable_prime(&m127, 32, &mut rng));
        let f7 = (BigUint::one() << 128u32) + 1u32;
        assert!(!is_probable_prime(&f7, 32, &mut rng));
        // Carmichael numbers
        assert!(!is_probable_prime(&BigUint::from(561u32), 16, &mut rng));
        assert!(!is_probable_prime(&BigUint::from(41041u32), 16, &mut rng));
    }

    #[test]
    fn inverse_mod_prime() {
        let p = BigUint::from(101u32);
        for a in 1..101u32 {
            let inv = inv_mod_prime(&BigUint::from(a), &p).unwrap();
            assert!(((inv * a) % &p).is_one());
        }
        assert!(inv_mod_prime(&BigUint::from(202u32), &p).is_none());
    }

    #[test]
    fn sampling_stays_in_range() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let n = BigUint::from(11u32);
        let mut seen = [false; 11];
        for _ in 0..2000 {
            let v = random_nonzero_below(&mut rng, &n);
            let v: usize = v.try_into().unwrap();
            assert!((1..11).contains(&v));
            seen[v] = true;
        }
        assert!(seen[1..].iter().all(|&s| s));
    }
}
