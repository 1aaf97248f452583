//! Hybrid EC public-key encryption for SA payloads and the authenticated
//! symmetric layer used for `[..]_ECDH` and HDR* blocks.
//!
//! Both layers use AES-256-GCM. The hybrid key is
//! `prf(x(r x P_recipient), "pkc" | R)` where `R` is the encoded ephemeral
//! point; since every encryption has a fresh `R`, the hybrid layer uses a
//! fixed all-zero nonce and binds `R` as associated data.

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Nonce};
use num_bigint::BigUint;
use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::curve::{CurveParams, CurvePoint};
use crate::ecc::{ecdh_shared, EccError, KeyPair};
use crate::kdf::{point_octets, prf_concat, PrfOutput, PRF_LEN};

/// Name of the authenticated cipher, for reports.
pub const CIPHER_NAME: &str = "AES-256-GCM";
pub const TAG_LEN: usize = 16;
pub const IV_LEN: usize = 12;
pub const MAX_BODY: usize = u16::MAX as usize;

const PKC_CONTEXT: &[u8] = b"pkc";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PkcError {
    #[error("plaintext of {0} octets exceeds the 65535-octet body limit")]
    TooLong(usize),
    #[error("invalid ephemeral point: {0}")]
    Ephemeral(#[source] EccError),
    #[error("ciphertext truncated or malformed")]
    Malformed,
    #[error("authentication tag mismatch")]
    BadTag,
    #[error("key must be {PRF_LEN} octets")]
    KeyLength,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PkcCiphertext {
    pub ephemeral_public: CurvePoint,
    pub body: Vec<u8>,
    pub tag: [u8; TAG_LEN],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymCiphertext {
    pub iv: [u8; IV_LEN],
    pub body: Vec<u8>,
    pub tag: [u8; TAG_LEN],
}

fn seal(key: &[u8], iv: &[u8; IV_LEN], aad: &[u8], plaintext: &[u8]) -> (Vec<u8>, [u8; TAG_LEN]) {
    let cipher = Aes256Gcm::new_from_slice(key).expect("32-octet key");
    let mut out = cipher
        .encrypt(Nonce::from_slice(iv), Payload { msg: plaintext, aad })
        .expect("within AES-GCM length limits");
    let tag: [u8; TAG_LEN] = out.split_off(out.len() - TAG_LEN).try_into().unwrap();
    (out, tag)
}

fn open(
    key: &[u8],
    iv: &[u8; IV_LEN],
    aad: &[u8],
    body: &[u8],
    tag: &[u8; TAG_LEN],
) -> Result<Vec<u8>, PkcError> {
    let cipher = Aes256Gcm::new_from_slice(key).map_err(|_| PkcError::KeyLength)?;
    let joined = [body, tag.as_slice()].concat();
    cipher.decrypt(Nonce::from_slice(iv), Payload { msg: &joined, aad }).map_err(|_| PkcError::BadTag)
}

fn hybrid_key(shared: &CurvePoint, ephemeral_encoding: &[u8]) -> PrfOutput {
    let x = point_octets(shared).expect("validated shared point is finite");
    prf_concat(&x, &[PKC_CONTEXT, ephemeral_encoding])
}

/// Encrypts `plaintext` to `recipient_public` under a fresh ephemeral key.
pub fn pkc_encrypt<R: RngCore + CryptoRng + ?Sized>(
    recipient_public: &CurvePoint,
    plaintext: &[u8],
    rng: &mut R,
    curve: &'static CurveParams,
) -> Result<PkcCiphertext, PkcError> {
    if plaintext.len() > MAX_BODY {
        return Err(PkcError::TooLong(plaintext.len()));
    }
    let eph = KeyPair::generate(curve, rng);
    let shared = ecdh_shared(eph.secret(), recipient_public, curve).map_err(PkcError::Ephemeral)?;
    let r_enc = eph.public().to_bytes();
    let key = hybrid_key(&shared, &r_enc);
    let (body, tag) = seal(&key, &[0u8; IV_LEN], &r_enc, plaintext);
    Ok(PkcCiphertext { ephemeral_public: *eph.public(), body, tag })
}

pub fn pkc_decrypt(
    recipient_secret: &BigUint,
    ct: &PkcCiphertext,
    curve: &CurveParams,
) -> Result<Vec<u8>, PkcError> {
    let shared = ecdh_shared(recipient_secret, &ct.ephemeral_public, curve).map_err(PkcError::Ephemeral)?;
    let r_enc = ct.ephemeral_public.to_bytes();
    let key = hybrid_key(&shared, &r_enc);
    open(&key, &[0u8; IV_LEN], &r_enc, &ct.body, &ct.tag)
}

pub fn sym_encrypt<R: RngCore + ?Sized>(
    key: &[u8],
    plaintext: &[u8],
    rng: &mut R,
) -> Result<SymCiphertext, PkcError> {
    if key.len() != PRF_LEN {
        return Err(PkcError::KeyLength);
    }
    if plaintext.len() > MAX_BODY {
        return Err(PkcError::TooLong(plaintext.len()));
    }
    let mut iv = [0u8; IV_LEN];
    rng.fill_bytes(&mut iv);
    let (body, tag) = seal(key, &iv, &[], plaintext);
    Ok(SymCiphertext { iv, body, tag })
}

pub fn sym_decrypt(key: &[u8], ct: &SymCiphertext) -> Result<Vec<u8>, PkcError> {
    if key.len() != PRF_LEN {
        return Err(PkcError::KeyLength);
    }
    open(key, &ct.iv, &[], &ct.body, &ct.tag)
}

fn split_len_body_tag(rest: &[u8]) -> Result<(Vec<u8>, [u8; TAG_LEN]), PkcError> {
    if rest.len() < 2 {
        return Err(PkcError::Malformed);
    }
    let len = u16::from_be_bytes([rest[0], rest[1]]) as usize;
    if rest.len() != 2 + len + TAG_LEN {
        return Err(PkcError::Malformed);
    }
    let body = rest[2..2 + len].to_vec();
    let tag = rest[2 + len..].try_into().unwrap();
    Ok((body, tag))
}

fn push_len_body_tag(out: &mut Vec<u8>, body: &[u8], tag: &[u8; TAG_LEN]) {
    out.extend_from_slice(&(body.len() as u16).to_be_bytes());
    out.extend_from_slice(body);
    out.extend_from_slice(tag);
}

impl PkcCiphertext {
    /// `R (uncompressed) | u16 body length | body | tag`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.ephemeral_public.to_bytes();
        push_len_body_tag(&mut out, &self.body, &self.tag);
        out
    }

    /// Parses the wire form. The point is decoded but not validated;
    /// [`pkc_decrypt`] does that.
    pub fn from_bytes(bytes: &[u8], curve: &CurveParams) -> Result<PkcCiphertext, PkcError> {
        let plen = curve.point_len();
        if bytes.len() < plen {
            return Err(PkcError::Malformed);
        }
        let ephemeral_public = curve
            .decode_point(&bytes[..plen])
            .map_err(|e| PkcError::Ephemeral(EccError::InvalidPeerPoint(e)))?;
        let (body, tag) = split_len_body_tag(&bytes[plen..])?;
        Ok(PkcCiphertext { ephemeral_public, body, tag })
    }
}

impl SymCiphertext {
    /// `iv | u16 body length | body | tag`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.iv.to_vec();
        push_len_body_tag(&mut out, &self.body, &self.tag);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<SymCiphertext, PkcError> {
        if bytes.len() < IV_LEN {
            return Err(PkcError::Malformed);
        }
        let iv = bytes[..IV_LEN].try_into().unwrap();
        let (body, tag) = split_len_body_tag(&bytes[IV_LEN..])?;
        Ok(SymCiphertext { iv, body, tag })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::CurveId;
    use crate::ecc::keygen;
    use crate::gf2m::FieldElement;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn contains(hay: &[u8], needle: &[u8]) -> bool {
        hay.windows(needle.len()).any(|w| w == needle)
    }

    #[test]
    fn pkc_roundtrip_sampled_sizes() {
        let mut rng = ChaCha20Rng::seed_from_u64(40);
        let c = CurveId::K163.params();
        let kp = keygen(&mut rng, c);
        let mut sizes: Vec<usize> = vec![0, 1, 15, 16, 17, 255, 256, 4095, 4096];
        sizes.extend((0..24).map(|_| rng.gen_range(0..=4096)));
        for n in sizes {
            let mut m = vec![0u8; n];
            rng.fill(m.as_mut_slice());
            let ct = pkc_encrypt(kp.public(), &m, &mut rng, c).unwrap();
            assert_eq!(ct.body.len(), n);
            let wire = ct.to_bytes();
            let back = PkcCiphertext::from_bytes(&wire, c).unwrap();
            assert_eq!(pkc_decrypt(kp.secret(), &back, c).unwrap(), m);
            if n >= 16 {
                assert!(!contains(&wire, &m));
            }
        }
    }

    #[test]
    fn pkc_all_curves() {
        let mut rng = ChaCha20Rng::seed_from_u64(41);
        for id in CurveId::KOBLITZ {
            let c = id.params();
            let kp = keygen(&mut rng, c);
            let ct = pkc_encrypt(kp.public(), b"security association body", &mut rng, c).unwrap();
            assert_eq!(pkc_decrypt(kp.secret(), &ct, c).unwrap(), b"security association body");
            let other = keygen(&mut rng, c);
            assert_eq!(pkc_decrypt(other.secret(), &ct, c), Err(PkcError::BadTag));
        }
    }

    #[test]
    fn fresh_ephemerals() {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let c = CurveId::K233.params();
        let kp = keygen(&mut rng, c);
        let a = pkc_encrypt(kp.public(), b"same message", &mut rng, c).unwrap();
        let b = pkc_encrypt(kp.public(), b"same message", &mut rng, c).unwrap();
        assert_ne!(a.ephemeral_public, b.ephemeral_public);
        assert_ne!(a.body, b.body);
    }

    #[test]
    fn tamper_and_malformed() {
        let mut rng = ChaCha20Rng::seed_from_u64(43);
        let c = CurveId::K163.params();
        let kp = keygen(&mut rng, c);
        let ct = pkc_encrypt(kp.public(), b"0123456789abcdef", &mut rng, c).unwrap();

        let mut t = ct.clone();
        t.tag[0] ^= 1;
        assert_eq!(pkc_decrypt(kp.secret(), &t, c), Err(PkcError::BadTag));
        let mut t = ct.clone();
        t.body[3] ^= 0x40;
        assert_eq!(pkc_decrypt(kp.secret(), &t, c), Err(PkcError::BadTag));

        let CurvePoint::Affine { x, y } = ct.ephemeral_public else { unreachable!() };
        let mut t = ct.clone();
        t.ephemeral_public = CurvePoint::Affine { x, y: y + FieldElement::one(c.field) };
        assert!(matches!(pkc_decrypt(kp.secret(), &t, c), Err(PkcError::Ephemeral(_))));

        let wire = ct.to_bytes();
        for cut in [0, 1, c.point_len(), c.point_len() + 1, wire.len() - 1] {
            assert!(PkcCiphertext::from_bytes(&wire[..cut], c).is_err(), "cut {cut}");
        }
        let mut long = wire.clone();
        long.push(0);
        assert_eq!(PkcCiphertext::from_bytes(&long, c), Err(PkcError::Malformed));
    }

    #[test]
    fn sym_roundtrip_and_failures() {
        let mut rng = ChaCha20Rng::seed_from_u64(44);
        let key = [7u8; PRF_LEN];
        for n in [0usize, 1, 31, 32, 1000, 4096] {
            let m: Vec<u8> = (0..n).map(|i| i as u8).collect();
            let ct = sym_encrypt(&key, &m, &mut rng).unwrap();
            let back = SymCiphertext::from_bytes(&ct.to_bytes()).unwrap();
            assert_eq!(sym_decrypt(&key, &back).unwrap(), m);
        }
        let ct = sym_encrypt(&key, b"identification payload", &mut rng).unwrap();
        assert_eq!(sym_decrypt(&[8u8; PRF_LEN], &ct), Err(PkcError::BadTag));
        let mut t = ct.clone();
        t.body[0] ^= 1;
        assert_eq!(sym_decrypt(&key, &t), Err(PkcError::BadTag));
        let mut t = ct.clone();
        t.iv[0] ^= 1;
        assert_eq!(sym_decrypt(&key, &t), Err(PkcError::BadTag));
        assert_eq!(sym_encrypt(&key[..16], b"x", &mut rng), Err(PkcError::KeyLength));
        let a = sym_encrypt(&key, b"x", &mut rng).unwrap();
        let b = sym_encrypt(&key, b"x", &mut rng).unwrap();
        assert_ne!(a.iv, b.iv);
        assert!(SymCiphertext::from_bytes(&[0u8; IV_LEN + 1]).is_err());
    }

    #[test]
    fn length_limit() {
        let mut rng = ChaCha20Rng::seed_from_u64(45);
        let big = vec![0u8; MAX_BODY + 1];
        assert_eq!(sym_encrypt(&[0u8; PRF_LEN], &big, &mut rng), Err(PkcError::TooLong(MAX_BODY + 1)));
    }
}
