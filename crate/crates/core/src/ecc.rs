//! ECDH key agreement and EC-DSA signatures over the registered curves.

use num_bigint::BigUint;
use num_traits::Zero;
use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::bigint::{inv_mod_prime, random_nonzero_below};
use crate::curve::{CurveError, CurveParams, CurvePoint};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EccError {
    #[error("invalid peer public key: {0}")]
    InvalidPeerPoint(#[source] CurveError),
    #[error("secret scalar out of range [1, n-1]")]
    SecretOutOfRange,
    #[error("digest must not be empty")]
    EmptyDigest,
    #[error("signature encoding must be {expected} octets, got {got}")]
    SignatureLength { expected: usize, got: usize },
}

/// Secret scalar and its public point `secret x G`.
#[derive(Clone)]
pub struct KeyPair {
    secret: BigUint,
    public: CurvePoint,
    curve: &'static CurveParams,
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyPair")
            .field("curve", &self.curve.name)
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

impl KeyPair {
    /// Samples a secret uniformly from `[1, n-1]`.
    pub fn generate<R: RngCore + CryptoRng + ?Sized>(curve: &'static CurveParams, rng: &mut R) -> KeyPair {
        let secret = random_nonzero_below(rng, &curve.order);
        Self::from_secret(curve, secret).expect("sampled in range")
    }

    pub fn from_secret(curve: &'static CurveParams, secret: BigUint) -> Result<KeyPair, EccError> {
        if secret.is_zero() || secret >= curve.order {
            return Err(EccError::SecretOutOfRange);
        }
        let public = curve.mul_base(&secret).expect("scalar in range");
        Ok(KeyPair { secret, public, curve })
    }

    pub fn secret(&self) -> &BigUint {
        &self.secret
    }

    pub fn public(&self) -> &CurvePoint {
        &self.public
    }

    pub fn curve(&self) -> &'static CurveParams {
        self.curve
    }
}

/// Shorthand for [`KeyPair::generate`].
pub fn keygen<R: RngCore + CryptoRng + ?Sized>(rng: &mut R, curve: &'static CurveParams) -> KeyPair {
    KeyPair::generate(curve, rng)
}

/// `secret x peer_public`, after validating the peer point (on curve,
/// finite, order n).
pub fn ecdh_shared(
    secret: &BigUint,
    peer_public: &CurvePoint,
    curve: &CurveParams,
) -> Result<CurvePoint, EccError> {
    if secret.is_zero() || secret >= &curve.order {
        return Err(EccError::SecretOutOfRange);
    }
    curve.validate_public(peer_public).map_err(EccError::InvalidPeerPoint)?;
    let shared = curve.scalar_mul(secret, peer_public).map_err(EccError::InvalidPeerPoint)?;
    debug_assert!(!shared.is_infinity());
    Ok(shared)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub r: BigUint,
    pub s: BigUint,
}

impl Signature {
    /// `r || s`, each `ceil(bitlen(n)/8)` octets big-endian.
    pub fn to_bytes(&self, curve: &CurveParams) -> Vec<u8> {
        let w = curve.scalar_len();
        let mut out = fixed_width(&self.r, w);
        out.extend(fixed_width(&self.s, w));
        out
    }

    pub fn from_bytes(bytes: &[u8], curve: &CurveParams) -> Result<Signature, EccError> {
        let w = curve.scalar_len();
        if bytes.len() != 2 * w {
            return Err(EccError::SignatureLength { expected: 2 * w, got: bytes.len() });
        }
        Ok(Signature { r: BigUint::from_bytes_be(&bytes[..w]), s: BigUint::from_bytes_be(&bytes[w..]) })
    }
}

fn fixed_width(v: &BigUint, width: usize) -> Vec<u8> {
    let bytes = v.to_bytes_be();
    let mut out = vec![0u8; width.saturating_sub(bytes.len())];
    out.extend(bytes);
    out
}

/// Leftmost `bitlen(n)` bits of the digest, as an integer.
fn digest_to_int(digest: &[u8], curve: &CurveParams) -> BigUint {
    let e = BigUint::from_bytes_be(digest);
    let digest_bits = digest.len() * 8;
    let n_bits = curve.order.bits() as usize;
    if digest_bits > n_bits {
        e >> (digest_bits - n_bits)
    } else {
        e
    }
}

/// The field element x-coordinate read as an integer.
fn x_as_int(p: &CurvePoint) -> Option<BigUint> {
    p.x().map(|x| BigUint::from_bytes_be(&x.to_be_bytes()))
}

/// EC-DSA signature over `digest` with a fresh per-signature nonce.
pub fn sign<R: RngCore + CryptoRng + ?Sized>(
    key: &KeyPair,
    digest: &[u8],
    rng: &mut R,
) -> Result<Signature, EccError> {
    if digest.is_empty() {
        return Err(EccError::EmptyDigest);
    }
    let curve = key.curve;
    let n = &curve.order;
    let e = digest_to_int(digest, curve);
    loop {
        let k = random_nonzero_below(rng, n);
        let kg = curve.mul_base(&k).expect("nonce in range");
        let r = x_as_int(&kg).expect("kG finite for k < n") % n;
        if r.is_zero() {
            continue;
        }
        let k_inv = inv_mod_prime(&k, n).expect("k invertible");
        let s = (k_inv * ((&e + &r * &key.secret) % n)) % n;
        if s.is_zero() {
            continue;
        }
        return Ok(Signature { r, s });
    }
}

/// EC-DSA verification. Malformed inputs simply fail.
pub fn verify(public: &CurvePoint, digest: &[u8], sig: &Signature, curve: &CurveParams) -> bool {
    let n = &curve.order;
    if sig.r.is_zero() || sig.s.is_zero() || &sig.r >= n || &sig.s >= n {
        return false;
    }
    if public.is_infinity() || !curve.is_on_curve(public) {
        return false;
    }
    let e = digest_to_int(digest, curve);
    let Some(w) = inv_mod_prime(&sig.s, n) else {
        return false;
    };
    let u1 = (&e * &w) % n;
    let u2 = (&sig.r * &w) % n;
    let (Ok(a), Ok(b)) = (curve.mul_base(&u1), curve.scalar_mul(&u2, public)) else {
        return false;
    };
    let Ok(sum) = curve.point_add(&a, &b) else {
        return false;
    };
    match x_as_int(&sum) {
        Some(x) => x % n == sig.r,
        None => false,
    }
}
