//! Single-level certificate authority binding identities to EC public
//! points.
//!
//! Certificate octets:
//! `u16 subject length | subject | group id(1) | point | u16 issuer length | issuer | r | s`.
//! The CA signs SHA-256 of everything before `r`.

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::curve::{CurveError, CurveId, CurveParams, CurvePoint};
use crate::ecc::{sign, verify, KeyPair, Signature};
use crate::kdf::hash;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PkiError {
    #[error("refusing to certify invalid point: {0}")]
    InvalidPoint(#[source] CurveError),
    #[error("curve {0} has no DH group identifier")]
    UnsupportedCurve(&'static str),
    #[error("certificate encoding malformed: {0}")]
    Malformed(&'static str),
    #[error("no registered curve has {0}-octet public points")]
    UnknownPointLength(usize),
    #[error("identifier exceeds 65535 octets")]
    FieldTooLong,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub subject_id: Vec<u8>,
    /// DH group identifier of the subject's curve.
    pub curve_id: u8,
    /// Uncompressed point encoding.
    pub public_point: Vec<u8>,
    pub issuer: Vec<u8>,
    /// `r | s` under the CA's curve.
    pub ca_signature: Vec<u8>,
}

/// What a relying party needs to check certificates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaPublicKey {
    pub curve: &'static CurveParams,
    pub point: CurvePoint,
}

fn push_u16_field(out: &mut Vec<u8>, field: &[u8]) {
    out.extend_from_slice(&(field.len() as u16).to_be_bytes());
    out.extend_from_slice(field);
}

fn read_u16_field<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8], PkiError> {
    let len = bytes.get(*pos..*pos + 2).ok_or(PkiError::Malformed("truncated length"))?;
    let len = u16::from_be_bytes([len[0], len[1]]) as usize;
    let field = bytes.get(*pos + 2..*pos + 2 + len).ok_or(PkiError::Malformed("truncated field"))?;
    *pos += 2 + len;
    Ok(field)
}

impl Certificate {
    /// The signed portion.
    pub fn tbs_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        push_u16_field(&mut out, &self.subject_id);
        out.push(self.curve_id);
        out.extend_from_slice(&self.public_point);
        push_u16_field(&mut out, &self.issuer);
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.tbs_bytes();
        out.extend_from_slice(&self.ca_signature);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Certificate, PkiError> {
        let mut pos = 0;
        let subject_id = read_u16_field(bytes, &mut pos)?.to_vec();
        let curve_id = *bytes.get(pos).ok_or(PkiError::Malformed("missing curve id"))?;
        pos += 1;
        let curve = CurveId::from_group_id(curve_id as u16)
            .map_err(|_| PkiError::Malformed("unknown curve id"))?
            .params();
        let public_point =
            bytes.get(pos..pos + curve.point_len()).ok_or(PkiError::Malformed("truncated point"))?.to_vec();
        pos += curve.point_len();
        let issuer = read_u16_field(bytes, &mut pos)?.to_vec();
        let ca_signature = bytes[pos..].to_vec();
        if ca_signature.is_empty() {
            return Err(PkiError::Malformed("missing signature"));
        }
        Ok(Certificate { subject_id, curve_id, public_point, issuer, ca_signature })
    }

    /// Subject curve and public point, with the curve inferred from the
    /// point length and checked against the curve id.
    pub fn public_key(&self) -> Result<(&'static CurveParams, CurvePoint), PkiError> {
        let group = group_from_cert(self)?;
        if group != self.curve_id as u16 {
            return Err(PkiError::Malformed("curve id disagrees with point length"));
        }
        let curve = CurveId::from_group_id(group).expect("registered").params();
        let point = curve.decode_point(&self.public_point).map_err(PkiError::InvalidPoint)?;
        Ok((curve, point))
    }
}

/// Issues a certificate signed by `ca`.
pub fn ca_issue<R: RngCore + CryptoRng + ?Sized>(
    ca: &KeyPair,
    issuer: &[u8],
    subject_id: &[u8],
    public_point: &CurvePoint,
    curve: &'static CurveParams,
    rng: &mut R,
) -> Result<Certificate, PkiError> {
    let group = curve.group_id.ok_or(PkiError::UnsupportedCurve(curve.name))?;
    curve.validate_public(public_point).map_err(PkiError::InvalidPoint)?;
    if subject_id.len() > u16::MAX as usize || issuer.len() > u16::MAX as usize {
        return Err(PkiError::FieldTooLong);
    }
    let mut cert = Certificate {
        subject_id: subject_id.to_vec(),
        curve_id: group as u8,
        public_point: public_point.to_bytes(),
        issuer: issuer.to_vec(),
        ca_signature: Vec::new(),
    };
    let sig = sign(ca, &hash(&cert.tbs_bytes()), rng).expect("non-empty digest");
    cert.ca_signature = sig.to_bytes(ca.curve());
    Ok(cert)
}

/// Signature check over the canonical encoding. Also rejects certificates
/// whose point does not decode on the named curve.
pub fn cert_verify(ca_public: &CaPublicKey, cert: &Certificate) -> bool {
    let Ok(sig) = Signature::from_bytes(&cert.ca_signature, ca_public.curve) else {
        return false;
    };
    if cert.public_key().is_err() {
        return false;
    }
    verify(&ca_public.point, &hash(&cert.tbs_bytes()), &sig, ca_public.curve)
}

/// DH group identifier inferred from the public point's encoded length.
pub fn group_from_cert(cert: &Certificate) -> Result<u16, PkiError> {
    let len = cert.public_point.len();
    CurveId::KOBLITZ
        .into_iter()
        .map(CurveId::params)
        .find(|c| c.point_len() == len)
        .and_then(|c| c.group_id)
        .ok_or(PkiError::UnknownPointLength(len))
}

/// CA keypair and a log of everything it has issued.
#[derive(Debug)]
pub struct CertificateAuthority {
    keypair: KeyPair,
    name: Vec<u8>,
    issued: Vec<Certificate>,
}

impl CertificateAuthority {
    pub fn new(keypair: KeyPair, name: impl Into<Vec<u8>>) -> Self {
        CertificateAuthority { keypair, name: name.into(), issued: Vec::new() }
    }

    pub fn generate<R: RngCore + CryptoRng + ?Sized>(
        curve: &'static CurveParams,
        name: impl Into<Vec<u8>>,
        rng: &mut R,
    ) -> Self {
        Self::new(KeyPair::generate(curve, rng), name)
    }

    pub fn public_key(&self) -> CaPublicKey {
        CaPublicKey { curve: self.keypair.curve(), point: *self.keypair.public() }
    }

    pub fn name(&self) -> &[u8] {
        &self.name
    }

    pub fn issue<R: RngCore + CryptoRng + ?Sized>(
        &mut self,
        subject_id: &[u8],
        public_point: &CurvePoint,
        curve: &'static CurveParams,
        rng: &mut R,
    ) -> Result<Certificate, PkiError> {
        let cert = ca_issue(&self.keypair, &self.name, subject_id, public_point, curve, rng)?;
        self.issued.push(cert.clone());
        Ok(cert)
    }

    pub fn issued(&self) -> &[Certificate] {
        &self.issued
    }
}
