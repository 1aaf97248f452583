//! Keyed pseudo-random function and the phase-1 keying chain.
//!
//! `prf` is HMAC-SHA-256 everywhere. Curve points enter prf inputs as the
//! big-endian x-coordinate alone (`ceil(m/8)` octets); `|` is plain octet
//! concatenation with no length prefixes.

use std::fmt;

use hmac::{Hmac, Mac};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::curve::{CurveParams, CurvePoint};

pub const PRF_LEN: usize = 32;

/// Name of the prf construction, for reports.
pub const PRF_NAME: &str = "HMAC-SHA-256";

pub type PrfOutput = [u8; PRF_LEN];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KdfError {
    #[error("shared point is the point at infinity")]
    InfinitySharedPoint,
    #[error("public value {0} is the point at infinity")]
    InfinityPoint(&'static str),
    #[error("{0} is required for this derivation")]
    MissingField(&'static str),
    #[error("{0} must not be empty")]
    EmptyField(&'static str),
}

pub fn prf(key: &[u8], msg: &[u8]) -> PrfOutput {
    prf_concat(key, &[msg])
}

/// `prf(key, parts[0] | parts[1] | ...)`.
pub fn prf_concat(key: &[u8], parts: &[&[u8]]) -> PrfOutput {
    let mut mac = Hmac::<Sha256>::new_from_slice(key).expect("HMAC accepts any key length");
    for part in parts {
        mac.update(part);
    }
    mac.finalize().into_bytes().into()
}

pub fn hash(msg: &[u8]) -> PrfOutput {
    Sha256::digest(msg).into()
}

/// x-coordinate of a finite point, big-endian, `ceil(m/8)` octets.
pub fn point_octets(p: &CurvePoint) -> Option<Vec<u8>> {
    p.x().map(|x| x.to_be_bytes())
}

/// Everything the derivations read. Payload bodies that only some
/// formulas use are optional.
#[derive(Debug, Clone)]
pub struct KeyMaterialInputs {
    pub curve: &'static CurveParams,
    pub ni_b: Vec<u8>,
    pub nr_b: Vec<u8>,
    pub cky_i: [u8; 8],
    pub cky_r: [u8; 8],
    /// `K_i x K_r x P`
    pub shared_point: CurvePoint,
    /// `K_i x P`
    pub ke_i: CurvePoint,
    /// `K_r x P`
    pub ke_r: CurvePoint,
    pub sa_i_b: Option<Vec<u8>>,
    pub sa_r_b: Option<Vec<u8>>,
    pub id_ii_b: Option<Vec<u8>>,
    pub id_ir_b: Option<Vec<u8>>,
}

impl KeyMaterialInputs {
    fn shared(&self) -> Result<Vec<u8>, KdfError> {
        point_octets(&self.shared_point).ok_or(KdfError::InfinitySharedPoint)
    }

    fn nonces(&self) -> Result<Vec<u8>, KdfError> {
        if self.ni_b.is_empty() {
            return Err(KdfError::EmptyField("Ni_b"));
        }
        if self.nr_b.is_empty() {
            return Err(KdfError::EmptyField("Nr_b"));
        }
        Ok([self.ni_b.as_slice(), self.nr_b.as_slice()].concat())
    }

    fn ke(&self) -> Result<(Vec<u8>, Vec<u8>), KdfError> {
        let i = point_octets(&self.ke_i).ok_or(KdfError::InfinityPoint("KE_i"))?;
        let r = point_octets(&self.ke_r).ok_or(KdfError::InfinityPoint("KE_r"))?;
        Ok((i, r))
    }
}

fn required<'a>(field: &'a Option<Vec<u8>>, name: &'static str) -> Result<&'a [u8], KdfError> {
    field.as_deref().ok_or(KdfError::MissingField(name))
}

/// SKEYID for signature authentication: `prf(Ni_b | Nr_b, K_i x K_r x P)`.
pub fn skeyid_sig(inputs: &KeyMaterialInputs) -> Result<PrfOutput, KdfError> {
    let shared = inputs.shared()?;
    Ok(prf(&inputs.nonces()?, &shared))
}

/// SKEYID for public-key-encryption authentication:
/// `prf(hash(Ni_b | Nr_b), CKY-I | CKY-R)`.
pub fn skeyid_pke(inputs: &KeyMaterialInputs) -> Result<PrfOutput, KdfError> {
    let key = hash(&inputs.nonces()?);
    Ok(prf_concat(&key, &[&inputs.cky_i, &inputs.cky_r]))
}

/// SKEYID for pre-shared-key authentication: `prf(psk, Ni_b | Nr_b)`.
pub fn skeyid_psk(pre_shared_key: &[u8], inputs: &KeyMaterialInputs) -> Result<PrfOutput, KdfError> {
    if pre_shared_key.is_empty() {
        return Err(KdfError::EmptyField("pre-shared key"));
    }
    Ok(prf(pre_shared_key, &inputs.nonces()?))
}

/// SKEYID and the three keys derived from it.
#[derive(Clone, PartialEq, Eq)]
pub struct SkeyidSet {
    pub skeyid: PrfOutput,
    /// Key material for later derivations.
    pub skeyid_d: PrfOutput,
    /// Authentication key.
    pub skeyid_a: PrfOutput,
    /// Encryption key source.
    pub skeyid_e: PrfOutput,
}

impl SkeyidSet {
    /// Short hex fingerprints `(skeyid, d, a, e)`, 8 octets each.
    pub fn fingerprints(&self) -> [String; 4] {
        [&self.skeyid, &self.skeyid_d, &self.skeyid_a, &self.skeyid_e].map(|k| hex::encode(&k[..8]))
    }
}

impl fmt::Debug for SkeyidSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [s, d, a, e] = self.fingerprints();
        write!(f, "SkeyidSet {{ skeyid: {s}.., d: {d}.., a: {a}.., e: {e}.. }}")
    }
}

/// The derivation chain:
///
/// ```text
/// SKEYID_d = prf(SKEYID, K_i x K_r x P | CKY-I | CKY-R | 0)
/// SKEYID_a = prf(SKEYID, SKEYID_d | K_i x K_r x P | CKY-I | CKY-R | 1)
/// SKEYID_e = prf(SKEYID, SKEYID_a | K_i x K_r x P | CKY-I | CKY-R | 2)
/// ```
///
/// with 0, 1, 2 as single octets.
pub fn derive_chain(skeyid: &PrfOutput, inputs: &KeyMaterialInputs) -> Result<SkeyidSet, KdfError> {
    derive_chain_traced(skeyid, inputs).map(|(set, _)| set)
}

/// [`derive_chain`], also returning the exact prf messages used for
/// `SKEYID_d`, `SKEYID_a`, `SKEYID_e`.
pub fn derive_chain_traced(
    skeyid: &PrfOutput,
    inputs: &KeyMaterialInputs,
) -> Result<(SkeyidSet, [Vec<u8>; 3]), KdfError> {
    let shared = inputs.shared()?;
    let tail =
        |stage: u8| -> Vec<u8> { [shared.as_slice(), &inputs.cky_i, &inputs.cky_r, &[stage]].concat() };
    let msg_d = tail(0);
    let skeyid_d = prf(skeyid, &msg_d);
    let msg_a = [skeyid_d.as_slice(), &tail(1)].concat();
    let skeyid_a = prf(skeyid, &msg_a);
    let msg_e = [skeyid_a.as_slice(), &tail(2)].concat();
    let skeyid_e = prf(skeyid, &msg_e);
    let set = SkeyidSet { skeyid: *skeyid, skeyid_d, skeyid_a, skeyid_e };
    Ok((set, [msg_d, msg_a, msg_e]))
}

/// `HASH_I = prf(SKEYID, K_i x P | K_r x P | CKY-I | CKY-R | SAi_b | IDii_b)`
pub fn hash_i_baseline(skeyid: &PrfOutput, inputs: &KeyMaterialInputs) -> Result<PrfOutput, KdfError> {
    let (ke_i, ke_r) = inputs.ke()?;
    let sa_i = required(&inputs.sa_i_b, "SAi_b")?;
    let id_i = required(&inputs.id_ii_b, "IDii_b")?;
    Ok(prf_concat(skeyid, &[&ke_i, &ke_r, &inputs.cky_i, &inputs.cky_r, sa_i, id_i]))
}

/// `HASH_R = prf(SKEYID, K_r x P | K_i x P | CKY-R | CKY-I | SAi_b | IDir_b)`
///
/// Both baseline hashes cover the initiator's SA body only.
pub fn hash_r_baseline(skeyid: &PrfOutput, inputs: &KeyMaterialInputs) -> Result<PrfOutput, KdfError> {
    let (ke_i, ke_r) = inputs.ke()?;
    let sa_i = required(&inputs.sa_i_b, "SAi_b")?;
    let id_r = required(&inputs.id_ir_b, "IDir_b")?;
    Ok(prf_concat(skeyid, &[&ke_r, &ke_i, &inputs.cky_r, &inputs.cky_i, sa_i, id_r]))
}

/// `HASH_I = prf(SKEYID, K_i x P | K_r x P | CKY_I | CKY_R | SA_i | SA_r | ID_i | ID_r)`
pub fn hash_i_improved(skeyid: &PrfOutput, inputs: &KeyMaterialInputs) -> Result<PrfOutput, KdfError> {
    let (ke_i, ke_r) = inputs.ke()?;
    let sa_i = required(&inputs.sa_i_b, "SAi_b")?;
    let sa_r = required(&inputs.sa_r_b, "SAr_b")?;
    let id_i = required(&inputs.id_ii_b, "IDii_b")?;
    let id_r = required(&inputs.id_ir_b, "IDir_b")?;
    Ok(prf_concat(skeyid, &[&ke_i, &ke_r, &inputs.cky_i, &inputs.cky_r, sa_i, sa_r, id_i, id_r]))
}

/// `HASH_R = prf(SKEYID, K_r x P | K_i x P | CKY_R | CKY_I | SA_r | SA_i | ID_r | ID_i)`
pub fn hash_r_improved(skeyid: &PrfOutput, inputs: &KeyMaterialInputs) -> Result<PrfOutput, KdfError> {
    let (ke_i, ke_r) = inputs.ke()?;
    let sa_i = required(&inputs.sa_i_b, "SAi_b")?;
    let sa_r = required(&inputs.sa_r_b, "SAr_b")?;
    let id_i = required(&inputs.id_ii_b, "IDii_b")?;
    let id_r = required(&inputs.id_ir_b, "IDir_b")?;
    Ok(prf_concat(skeyid, &[&ke_r, &ke_i, &inputs.cky_r, &inputs.cky_i, sa_r, sa_i, id_r, id_i]))
}

/// Context label for the HDR* payload encryption key.
pub const ENC_CONTEXT: &[u8] = b"enc";
/// Context label for the ECDH-keyed block in improved message 4.
pub const MSG4_CONTEXT: &[u8] = b"msg4";

/// Key for HDR*-flagged messages: `prf(SKEYID_e, "enc")`.
pub fn encryption_key(skeyid_e: &PrfOutput) -> PrfOutput {
    prf(skeyid_e, ENC_CONTEXT)
}

/// Key for the `[..]_ECDH` block: `prf(x(K_i x K_r x P), "msg4")`. Needs
/// no nonces, so it differs from every SKEYID_e-derived key.
pub fn ecdh_block_key(shared_point: &CurvePoint) -> Result<PrfOutput, KdfError> {
    let x = point_octets(shared_point).ok_or(KdfError::InfinitySharedPoint)?;
    Ok(prf(&x, MSG4_CONTEXT))
}
