//! Initiator and responder state machines for six-message main mode and
//! five-message protected main mode.
//!
//! Baseline:
//! ```text
//! 1  I -> R  SA
//! 2  I <- R  SA
//! 3  I -> R  KE NONCE
//! 4  I <- R  KE NONCE
//! 5  I -> R  HDR* [ID CERT SIG]enc
//! 6  I <- R  HDR* [ID CERT SIG]enc
//! ```
//! Improved:
//! ```text
//! 1  I -> R  {SA}p_r
//! 2  I <- R  {SA}p_i
//! 3  I -> R  KE NONCE
//! 4  I <- R  KE NONCE [ID CERT SIG]msg4
//! 5  I -> R  HDR* [ID CERT SIG]enc
//! ```
//! `enc` is `prf(SKEYID_e, "enc")`; `msg4` is `prf(x(K_i x K_r x P), "msg4")`.
//!
//! The responder signs HASH_R in message 4 before it has seen ID_i, so it
//! uses the subject of the configured peer certificate and checks the
//! received ID_i against it in message 5.

use std::fmt;
use std::ops::{Add, AddAssign};

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::codec::{
    decode_message, decode_payloads, encode_message, encode_payloads, ExchangeMode, Message, MessageHeader,
    Payload, PayloadKind, SaBody,
};
use crate::curve::{CurveParams, CurvePoint};
use crate::ecc::{sign, verify, KeyPair, Signature};
use crate::kdf::{
    derive_chain, ecdh_block_key, encryption_key, hash_i_baseline, hash_i_improved, hash_r_baseline,
    hash_r_improved, skeyid_sig, KeyMaterialInputs, PrfOutput, SkeyidSet,
};
use crate::pkc::{pkc_decrypt, pkc_encrypt, sym_decrypt, sym_encrypt, PkcCiphertext, SymCiphertext};
use crate::pki::{cert_verify, group_from_cert, CaPublicKey, Certificate};

pub const NONCE_LEN: usize = 32;
const MIN_NONCE: usize = 8;
const MAX_NONCE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Initiator,
    Responder,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Initiator => "initiator",
            Role::Responder => "responder",
        })
    }
}

#[derive(Debug, Clone)]
pub struct HandshakeConfig {
    pub mode: ExchangeMode,
    pub role: Role,
    /// Long-term signing key; its public point is in `own_cert`.
    pub own_keypair: KeyPair,
    pub own_cert: Certificate,
    pub ca_public: CaPublicKey,
    /// Must be present before the exchange starts.
    pub peer_cert: Option<Certificate>,
    pub identity: Vec<u8>,
    pub sa_proposal: SaBody,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("the peer's certificate must be provisioned before the exchange")]
    MissingPeerCert,
    #[error("peer certificate does not verify under the CA key")]
    PeerCertRejected,
    #[error("own certificate does not carry the configured public key")]
    OwnCertMismatch,
    #[error("SA group {sa} disagrees with group {cert} inferred from the {which} certificate")]
    GroupMismatch { sa: u16, cert: u16, which: &'static str },
    #[error("SA group {0} is not registered")]
    UnknownGroup(u16),
}

/// Why a party stopped. Each failure class has its own code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AbortReason {
    Malformed,
    UnexpectedMessage,
    CookieMismatch,
    ModeMismatch,
    FlagMismatch,
    SaRejected,
    InvalidKePoint,
    PkcDecryptFailure,
    SymDecryptFailure,
    CertificateRejected,
    IdentityMismatch,
    SignatureFailure,
}

impl AbortReason {
    pub fn code(self) -> &'static str {
        match self {
            AbortReason::Malformed => "malformed",
            AbortReason::UnexpectedMessage => "unexpected_message",
            AbortReason::CookieMismatch => "cookie_mismatch",
            AbortReason::ModeMismatch => "mode_mismatch",
            AbortReason::FlagMismatch => "flag_mismatch",
            AbortReason::SaRejected => "sa_rejected",
            AbortReason::InvalidKePoint => "invalid_ke_point",
            AbortReason::PkcDecryptFailure => "pkc_decrypt_failure",
            AbortReason::SymDecryptFailure => "sym_decrypt_failure",
            AbortReason::CertificateRejected => "certificate_rejected",
            AbortReason::IdentityMismatch => "identity_mismatch",
            AbortReason::SignatureFailure => "signature_failure",
        }
    }
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code().replace('_', " "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Initiator: waiting for message 2. Responder: waiting for message 1.
    AwaitSa,
    /// Initiator: waiting for message 4. Responder: waiting for message 3.
    AwaitKe,
    /// Initiator: waiting for message 6 (baseline). Responder: waiting for message 5.
    AwaitAuth,
    Established,
    Aborted(AbortReason),
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Established | Phase::Aborted(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Continue,
    Established,
    Abort(AbortReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutput {
    pub outgoing: Option<Vec<u8>>,
    pub event: Event,
}

/// Per-party operation counts.
///
/// `scalar_mults` counts only key-agreement multiplications (ephemeral
/// keygen and shared secret). Multiplications inside signatures, hybrid
/// encryption, certificate checks and point validation are reported
/// through their own counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Instrumentation {
    pub scalar_mults: u64,
    pub signatures_made: u64,
    pub signatures_verified: u64,
    pub pkc_encryptions: u64,
    pub pkc_decryptions: u64,
    pub sym_ops: u64,
    pub messages_sent: u64,
    pub messages_received: u64,
    pub point_validations: u64,
    pub cert_checks: u64,
    pub auth_hashes: u64,
}

impl Instrumentation {
    /// `(name, value)` pairs in a stable order.
    pub fn fields(&self) -> [(&'static str, u64); 11] {
        [
            ("scalar_mults", self.scalar_mults),
            ("signatures_made", self.signatures_made),
            ("signatures_verified", self.signatures_verified),
            ("pkc_encryptions", self.pkc_encryptions),
            ("pkc_decryptions", self.pkc_decryptions),
            ("sym_ops", self.sym_ops),
            ("messages_sent", self.messages_sent),
            ("messages_received", self.messages_received),
            ("point_validations", self.point_validations),
            ("cert_checks", self.cert_checks),
            ("auth_hashes", self.auth_hashes),
        ]
    }
}

impl Add for Instrumentation {
    type Output = Instrumentation;

    fn add(self, o: Instrumentation) -> Instrumentation {
        Instrumentation {
            scalar_mults: self.scalar_mults + o.scalar_mults,
            signatures_made: self.signatures_made + o.signatures_made,
            signatures_verified: self.signatures_verified + o.signatures_verified,
            pkc_encryptions: self.pkc_encryptions + o.pkc_encryptions,
            pkc_decryptions: self.pkc_decryptions + o.pkc_decryptions,
            sym_ops: self.sym_ops + o.sym_ops,
            messages_sent: self.messages_sent + o.messages_sent,
            messages_received: self.messages_received + o.messages_received,
            point_validations: self.point_validations + o.point_validations,
            cert_checks: self.cert_checks + o.cert_checks,
            auth_hashes: self.auth_hashes + o.auth_hashes,
        }
    }
}

impl AddAssign for Instrumentation {
    fn add_assign(&mut self, o: Instrumentation) {
        *self = *self + o;
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum StateError {
    #[error("keys are available only after establishment (phase {0:?})")]
    NotEstablished(Phase),
}

/// One party's view of one exchange.
#[derive(Debug, Clone)]
pub struct HandshakeState {
    config: HandshakeConfig,
    peer_cert: Certificate,
    peer_public: CurvePoint,
    curve: &'static CurveParams,
    phase: Phase,
    cky_i: [u8; 8],
    cky_r: [u8; 8],
    ni_b: Option<Vec<u8>>,
    nr_b: Option<Vec<u8>>,
    ephemeral: Option<KeyPair>,
    peer_ke: Option<CurvePoint>,
    shared: Option<CurvePoint>,
    sa_i_b: Option<Vec<u8>>,
    sa_r_b: Option<Vec<u8>>,
    skeyids: Option<SkeyidSet>,
    counters: Instrumentation,
}

type Outcome = Result<Option<Vec<u8>>, AbortReason>;

fn random_cookie<R: RngCore + ?Sized>(rng: &mut R) -> [u8; 8] {
    loop {
        let mut c = [0u8; 8];
        rng.fill_bytes(&mut c);
        if c != [0u8; 8] {
            return c;
        }
    }
}

fn expect_kinds(payloads: &[Payload], kinds: &[PayloadKind]) -> Result<(), AbortReason> {
    let ok = payloads.len() == kinds.len() && payloads.iter().zip(kinds).all(|(p, k)| p.kind == *k);
    if ok {
        Ok(())
    } else {
        Err(AbortReason::Malformed)
    }
}

/// Validates a configuration and, for the initiator, produces message 1.
pub fn start<R: RngCore + CryptoRng + ?Sized>(
    config: HandshakeConfig,
    rng: &mut R,
) -> Result<(HandshakeState, Option<Vec<u8>>), ConfigError> {
    let peer_cert = config.peer_cert.clone().ok_or(ConfigError::MissingPeerCert)?;
    if !cert_verify(&config.ca_public, &peer_cert) {
        return Err(ConfigError::PeerCertRejected);
    }
    let sa_group = config.sa_proposal.group_id;
    let curve = config.sa_proposal.curve().map_err(|_| ConfigError::UnknownGroup(sa_group))?.params();
    let peer_group = group_from_cert(&peer_cert).map_err(|_| ConfigError::PeerCertRejected)?;
    if peer_group != sa_group {
        return Err(ConfigError::GroupMismatch { sa: sa_group, cert: peer_group, which: "peer" });
    }
    let own_group = group_from_cert(&config.own_cert).map_err(|_| ConfigError::OwnCertMismatch)?;
    if own_group != sa_group {
        return Err(ConfigError::GroupMismatch { sa: sa_group, cert: own_group, which: "own" });
    }
    if config.own_keypair.curve().id != curve.id
        || config.own_cert.public_point != config.own_keypair.public().to_bytes()
    {
        return Err(ConfigError::OwnCertMismatch);
    }
    let (_, peer_public) = peer_cert.public_key().map_err(|_| ConfigError::PeerCertRejected)?;

    let mut state = HandshakeState {
        config,
        peer_cert,
        peer_public,
        curve,
        phase: Phase::AwaitSa,
        cky_i: [0; 8],
        cky_r: [0; 8],
        ni_b: None,
        nr_b: None,
        ephemeral: None,
        peer_ke: None,
        shared: None,
        sa_i_b: None,
        sa_r_b: None,
        skeyids: None,
        counters: Instrumentation::default(),
    };
    let first = match state.config.role {
        Role::Responder => None,
        Role::Initiator => {
            state.cky_i = random_cookie(rng);
            let sa_i_b = state.config.sa_proposal.to_bytes();
            let payload = state.sa_payload(&sa_i_b, rng);
            state.sa_i_b = Some(sa_i_b);
            let msg = state.emit(false, &[payload]);
            Some(msg)
        }
    };
    Ok((state, first))
}

impl HandshakeState {
    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn role(&self) -> Role {
        self.config.role
    }

    pub fn mode(&self) -> ExchangeMode {
        self.config.mode
    }

    pub fn curve(&self) -> &'static CurveParams {
        self.curve
    }

    pub fn counters(&self) -> Instrumentation {
        self.counters
    }

    pub fn cookies(&self) -> ([u8; 8], [u8; 8]) {
        (self.cky_i, self.cky_r)
    }

    /// The ephemeral ECDH key, once generated.
    pub fn ephemeral_public(&self) -> Option<&CurvePoint> {
        self.ephemeral.as_ref().map(KeyPair::public)
    }

    pub fn established_keys(&self) -> Result<&SkeyidSet, StateError> {
        match (self.phase, &self.skeyids) {
            (Phase::Established, Some(k)) => Ok(k),
            (phase, _) => Err(StateError::NotEstablished(phase)),
        }
    }

    /// Feeds one incoming message. Terminal states answer every message
    /// with `UnexpectedMessage` and stay unchanged.
    pub fn step<R: RngCore + CryptoRng + ?Sized>(&mut self, incoming: &[u8], rng: &mut R) -> StepOutput {
        if self.phase.is_terminal() {
            return StepOutput { outgoing: None, event: Event::Abort(AbortReason::UnexpectedMessage) };
        }
        self.counters.messages_received += 1;
        let result = decode_message(incoming)
            .map_err(|_| AbortReason::Malformed)
            .and_then(|msg| self.dispatch(&msg, rng));
        match result {
            Err(reason) => {
                self.phase = Phase::Aborted(reason);
                StepOutput { outgoing: None, event: Event::Abort(reason) }
            }
            Ok(outgoing) => {
                let event =
                    if self.phase == Phase::Established { Event::Established } else { Event::Continue };
                StepOutput { outgoing, event }
            }
        }
    }

    fn dispatch<R: RngCore + CryptoRng + ?Sized>(&mut self, msg: &Message, rng: &mut R) -> Outcome {
        use ExchangeMode::*;
        match (self.config.role, self.phase, self.config.mode) {
            (Role::Responder, Phase::AwaitSa, _) => self.responder_sa(msg, rng),
            (Role::Initiator, Phase::AwaitSa, _) => self.initiator_sa(msg, rng),
            (Role::Responder, Phase::AwaitKe, _) => self.responder_ke(msg, rng),
            (Role::Initiator, Phase::AwaitKe, _) => self.initiator_ke(msg, rng),
            (Role::Responder, Phase::AwaitAuth, _) => self.responder_auth(msg, rng),
            (Role::Initiator, Phase::AwaitAuth, BaselineMain) => self.initiator_final(msg),
            _ => Err(AbortReason::UnexpectedMessage),
        }
    }

    fn emit(&mut self, encrypted: bool, payloads: &[Payload]) -> Vec<u8> {
        let header = MessageHeader::new(self.cky_i, self.cky_r, self.config.mode, encrypted);
        self.counters.messages_sent += 1;
        encode_message(&header, payloads).expect("locally built payloads are encodable")
    }

    fn check_header(&self, msg: &Message, encrypted: bool) -> Result<(), AbortReason> {
        let h = &msg.header;
        if h.mode != self.config.mode {
            return Err(AbortReason::ModeMismatch);
        }
        if h.cky_i != self.cky_i || h.cky_r != self.cky_r {
            return Err(AbortReason::CookieMismatch);
        }
        if h.encrypted() != encrypted {
            return Err(AbortReason::FlagMismatch);
        }
        Ok(())
    }

    /// SA or `{SA}peer` payload carrying `body`.
    fn sa_payload<R: RngCore + CryptoRng + ?Sized>(&mut self, body: &[u8], rng: &mut R) -> Payload {
        match self.config.mode {
            ExchangeMode::BaselineMain => Payload::new(PayloadKind::Sa, body),
            ExchangeMode::ImprovedMain => {
                self.counters.pkc_encryptions += 1;
                let ct = pkc_encrypt(&self.peer_public, body, rng, self.curve)
                    .expect("peer key validated at start");
                Payload::new(PayloadKind::PkcBlob, ct.to_bytes())
            }
        }
    }

    /// Extracts and checks the peer's SA body.
    fn read_sa(&mut self, msg: &Message) -> Result<Vec<u8>, AbortReason> {
        let body = match self.config.mode {
            ExchangeMode::BaselineMain => {
                expect_kinds(&msg.payloads, &[PayloadKind::Sa])?;
                msg.payloads[0].body.clone()
            }
            ExchangeMode::ImprovedMain => {
                expect_kinds(&msg.payloads, &[PayloadKind::PkcBlob])?;
                self.counters.pkc_decryptions += 1;
                PkcCiphertext::from_bytes(&msg.payloads[0].body, self.curve)
                    .and_then(|ct| pkc_decrypt(self.config.own_keypair.secret(), &ct, self.curve))
                    .map_err(|_| AbortReason::PkcDecryptFailure)?
            }
        };
        let sa = SaBody::from_bytes(&body).map_err(|_| AbortReason::SaRejected)?;
        if sa.group_id != self.config.sa_proposal.group_id {
            return Err(AbortReason::SaRejected);
        }
        Ok(body)
    }

    fn read_ke_nonce(&mut self, payloads: &[Payload]) -> Result<(CurvePoint, Vec<u8>), AbortReason> {
        self.counters.point_validations += 1;
        let ke = self
            .curve
            .decode_point(&payloads[0].body)
            .and_then(|p| self.curve.validate_public(&p).map(|_| p))
            .map_err(|_| AbortReason::InvalidKePoint)?;
        let nonce = payloads[1].body.clone();
        if !(MIN_NONCE..=MAX_NONCE).contains(&nonce.len()) {
            return Err(AbortReason::Malformed);
        }
        Ok((ke, nonce))
    }

    fn new_ephemeral<R: RngCore + CryptoRng + ?Sized>(&mut self, rng: &mut R) -> (Payload, Payload, Vec<u8>) {
        self.counters.scalar_mults += 1;
        let eph = KeyPair::generate(self.curve, rng);
        let ke = Payload::new(PayloadKind::Ke, eph.public().to_bytes());
        self.ephemeral = Some(eph);
        let mut nonce = vec![0u8; NONCE_LEN];
        rng.fill_bytes(&mut nonce);
        (ke, Payload::new(PayloadKind::Nonce, nonce.clone()), nonce)
    }

    /// Shared point and SKEYID chain once both KEs and nonces are known.
    fn agree(&mut self) -> Result<(), AbortReason> {
        self.counters.scalar_mults += 1;
        let eph = self.ephemeral.as_ref().expect("ephemeral generated");
        let peer = self.peer_ke.as_ref().expect("peer KE received");
        // peer KE already passed validate_public
        let shared = self.curve.scalar_mul(eph.secret(), peer).map_err(|_| AbortReason::InvalidKePoint)?;
        self.shared = Some(shared);
        let inputs = self.inputs(None, None);
        let skeyid = skeyid_sig(&inputs).map_err(|_| AbortReason::InvalidKePoint)?;
        self.skeyids = Some(derive_chain(&skeyid, &inputs).map_err(|_| AbortReason::InvalidKePoint)?);
        Ok(())
    }

    fn inputs(&self, id_ii_b: Option<&[u8]>, id_ir_b: Option<&[u8]>) -> KeyMaterialInputs {
        let own = *self.ephemeral.as_ref().expect("ephemeral generated").public();
        let peer = self.peer_ke.expect("peer KE received");
        let (ke_i, ke_r) = match self.config.role {
            Role::Initiator => (own, peer),
            Role::Responder => (peer, own),
        };
        KeyMaterialInputs {
            curve: self.curve,
            ni_b: self.ni_b.clone().expect("Ni_b known"),
            nr_b: self.nr_b.clone().expect("Nr_b known"),
            cky_i: self.cky_i,
            cky_r: self.cky_r,
            shared_point: self.shared.expect("shared point computed"),
            ke_i,
            ke_r,
            sa_i_b: self.sa_i_b.clone(),
            sa_r_b: self.sa_r_b.clone(),
            id_ii_b: id_ii_b.map(<[u8]>::to_vec),
            id_ir_b: id_ir_b.map(<[u8]>::to_vec),
        }
    }

    /// HASH_I or HASH_R for the configured mode.
    fn auth_hash(&mut self, of: Role, id_ii_b: &[u8], id_ir_b: &[u8]) -> PrfOutput {
        self.counters.auth_hashes += 1;
        let inputs = self.inputs(Some(id_ii_b), Some(id_ir_b));
        let skeyid = &self.skeyids.as_ref().expect("keys derived").skeyid;
        let h = match (self.config.mode, of) {
            (ExchangeMode::BaselineMain, Role::Initiator) => hash_i_baseline(skeyid, &inputs),
            (ExchangeMode::BaselineMain, Role::Responder) => hash_r_baseline(skeyid, &inputs),
            (ExchangeMode::ImprovedMain, Role::Initiator) => hash_i_improved(skeyid, &inputs),
            (ExchangeMode::ImprovedMain, Role::Responder) => hash_r_improved(skeyid, &inputs),
        };
        h.expect("all hash inputs present")
    }

    /// `(ID_ii, ID_ir)` with this party's own identity in its slot.
    fn ids<'a>(&'a self, peer_id: &'a [u8]) -> (&'a [u8], &'a [u8]) {
        match self.config.role {
            Role::Initiator => (&self.config.identity, peer_id),
            Role::Responder => (peer_id, &self.config.identity),
        }
    }

    /// Encrypted `[ID CERT SIG]` block over this party's own HASH.
    fn auth_block<R: RngCore + CryptoRng + ?Sized>(
        &mut self,
        key: &PrfOutput,
        peer_id: &[u8],
        rng: &mut R,
    ) -> Payload {
        let (ii, ir) = {
            let (a, b) = self.ids(peer_id);
            (a.to_vec(), b.to_vec())
        };
        let h = self.auth_hash(self.config.role, &ii, &ir);
        self.counters.signatures_made += 1;
        let sig = sign(&self.config.own_keypair, &h, rng).expect("non-empty digest");
        let inner = encode_payloads(&[
            Payload::new(PayloadKind::Id, self.config.identity.clone()),
            Payload::new(PayloadKind::Cert, self.config.own_cert.to_bytes()),
            Payload::new(PayloadKind::Sig, sig.to_bytes(self.config.own_keypair.curve())),
        ])
        .expect("encodable");
        self.counters.sym_ops += 1;
        let ct = sym_encrypt(key, &inner, rng).expect("key and length in range");
        Payload::new(PayloadKind::SymBlob, ct.to_bytes())
    }

    /// Decrypts and checks the peer's `[ID CERT SIG]` block.
    fn check_peer_block(&mut self, key: &PrfOutput, blob: &[u8]) -> Result<(), AbortReason> {
        self.counters.sym_ops += 1;
        let inner = SymCiphertext::from_bytes(blob)
            .and_then(|ct| sym_decrypt(key, &ct))
            .map_err(|_| AbortReason::SymDecryptFailure)?;
        let payloads = decode_payloads(&inner).map_err(|_| AbortReason::Malformed)?;
        expect_kinds(&payloads, &[PayloadKind::Id, PayloadKind::Cert, PayloadKind::Sig])?;
        let (id, cert, sig) = (&payloads[0].body, &payloads[1].body, &payloads[2].body);

        self.counters.cert_checks += 1;
        let cert = Certificate::from_bytes(cert).map_err(|_| AbortReason::CertificateRejected)?;
        if !cert_verify(&self.config.ca_public, &cert) || cert != self.peer_cert {
            return Err(AbortReason::CertificateRejected);
        }
        if *id != cert.subject_id {
            return Err(AbortReason::IdentityMismatch);
        }
        let sig = Signature::from_bytes(sig, self.curve).map_err(|_| AbortReason::Malformed)?;
        let peer_role = match self.config.role {
            Role::Initiator => Role::Responder,
            Role::Responder => Role::Initiator,
        };
        let (ii, ir) = {
            let (a, b) = self.ids(id);
            (a.to_vec(), b.to_vec())
        };
        let h = self.auth_hash(peer_role, &ii, &ir);
        self.counters.signatures_verified += 1;
        if !verify(&self.peer_public, &h, &sig, self.curve) {
            return Err(AbortReason::SignatureFailure);
        }
        Ok(())
    }

    fn enc_key(&self) -> PrfOutput {
        encryption_key(&self.skeyids.as_ref().expect("keys derived").skeyid_e)
    }

    fn msg4_key(&self) -> PrfOutput {
        ecdh_block_key(self.shared.as_ref().expect("shared computed")).expect("finite shared point")
    }

    /// Responder, message 1 -> 2.
    fn responder_sa<R: RngCore + CryptoRng + ?Sized>(&mut self, msg: &Message, rng: &mut R) -> Outcome {
        let h = &msg.header;
        if h.mode != self.config.mode {
            return Err(AbortReason::ModeMismatch);
        }
        if h.cky_r != [0u8; 8] || h.cky_i == [0u8; 8] {
            return Err(AbortReason::CookieMismatch);
        }
        if h.encrypted() {
            return Err(AbortReason::FlagMismatch);
        }
        self.cky_i = h.cky_i;
        self.sa_i_b = Some(self.read_sa(msg)?);
        self.cky_r = random_cookie(rng);
        let sa_r_b = self.config.sa_proposal.to_bytes();
        let payload = self.sa_payload(&sa_r_b, rng);
        self.sa_r_b = Some(sa_r_b);
        self.phase = Phase::AwaitKe;
        Ok(Some(self.emit(false, &[payload])))
    }

    /// Initiator, message 2 -> 3.
    fn initiator_sa<R: RngCore + CryptoRng + ?Sized>(&mut self, msg: &Message, rng: &mut R) -> Outcome {
        let h = &msg.header;
        if h.mode != self.config.mode {
            return Err(AbortReason::ModeMismatch);
        }
        if h.cky_i != self.cky_i || h.cky_r == [0u8; 8] {
            return Err(AbortReason::CookieMismatch);
        }
        if h.encrypted() {
            return Err(AbortReason::FlagMismatch);
        }
        self.cky_r = h.cky_r;
        self.sa_r_b = Some(self.read_sa(msg)?);
        let (ke, nonce, ni) = self.new_ephemeral(rng);
        self.ni_b = Some(ni);
        self.phase = Phase::AwaitKe;
        Ok(Some(self.emit(false, &[ke, nonce])))
    }

    /// Responder, message 3 -> 4.
    fn responder_ke<R: RngCore + CryptoRng + ?Sized>(&mut self, msg: &Message, rng: &mut R) -> Outcome {
        self.check_header(msg, false)?;
        expect_kinds(&msg.payloads, &[PayloadKind::Ke, PayloadKind::Nonce])?;
        let (ke_i, ni) = self.read_ke_nonce(&msg.payloads)?;
        self.peer_ke = Some(ke_i);
        self.ni_b = Some(ni);
        let (ke, nonce, nr) = self.new_ephemeral(rng);
        self.nr_b = Some(nr);
        self.agree()?;
        let mut out = vec![ke, nonce];
        if self.config.mode == ExchangeMode::ImprovedMain {
            let key = self.msg4_key();
            let expected_id_i = self.peer_cert.subject_id.clone();
            out.push(self.auth_block(&key, &expected_id_i, rng));
        }
        self.phase = Phase::AwaitAuth;
        Ok(Some(self.emit(false, &out)))
    }

    /// Initiator, message 4 -> 5.
    fn initiator_ke<R: RngCore + CryptoRng + ?Sized>(&mut self, msg: &Message, rng: &mut R) -> Outcome {
        self.check_header(msg, false)?;
        let improved = self.config.mode == ExchangeMode::ImprovedMain;
        if improved {
            expect_kinds(&msg.payloads, &[PayloadKind::Ke, PayloadKind::Nonce, PayloadKind::SymBlob])?;
        } else {
            expect_kinds(&msg.payloads, &[PayloadKind::Ke, PayloadKind::Nonce])?;
        }
        let (ke_r, nr) = self.read_ke_nonce(&msg.payloads)?;
        self.peer_ke = Some(ke_r);
        self.nr_b = Some(nr);
        self.agree()?;
        if improved {
            let key = self.msg4_key();
            self.check_peer_block(&key, &msg.payloads[2].body)?;
        }
        let key = self.enc_key();
        let peer_id = self.peer_cert.subject_id.clone();
        let block = self.auth_block(&key, &peer_id, rng);
        self.phase = if improved { Phase::Established } else { Phase::AwaitAuth };
        Ok(Some(self.emit(true, &[block])))
    }

    /// Responder, message 5 (-> 6 in baseline).
    fn responder_auth<R: RngCore + CryptoRng + ?Sized>(&mut self, msg: &Message, rng: &mut R) -> Outcome {
        self.check_header(msg, true)?;
        expect_kinds(&msg.payloads, &[PayloadKind::SymBlob])?;
        let key = self.enc_key();
        self.check_peer_block(&key, &msg.payloads[0].body)?;
        let reply = match self.config.mode {
            ExchangeMode::ImprovedMain => None,
            ExchangeMode::BaselineMain => {
                let peer_id = self.peer_cert.subject_id.clone();
                let block = self.auth_block(&key, &peer_id, rng);
                Some(self.emit(true, &[block]))
            }
        };
        self.phase = Phase::Established;
        Ok(reply)
    }

    /// Initiator, baseline message 6.
    fn initiator_final(&mut self, msg: &Message) -> Outcome {
        self.check_header(msg, true)?;
        expect_kinds(&msg.payloads, &[PayloadKind::SymBlob])?;
        let key = self.enc_key();
        self.check_peer_block(&key, &msg.payloads[0].body)?;
        self.phase = Phase::Established;
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::CurveId;
    use crate::pki::CertificateAuthority;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    struct Pair {
        ini: HandshakeConfig,
        res: HandshakeConfig,
    }

    fn setup(mode: ExchangeMode, id: CurveId, rng: &mut ChaCha20Rng) -> Pair {
        let c = id.params();
        let group = c.group_id.unwrap();
        let mut ca = CertificateAuthority::generate(c, b"ca".to_vec(), rng);
        let ki = KeyPair::generate(c, rng);
        let kr = KeyPair::generate(c, rng);
        let ci = ca.issue(b"initiator.test", ki.public(), c, rng).unwrap();
        let cr = ca.issue(b"responder.test", kr.public(), c, rng).unwrap();
        let base = |role, kp: &KeyPair, own: &Certificate, peer: &Certificate, ident: &[u8], prop: &[u8]| {
            HandshakeConfig {
                mode,
                role,
                own_keypair: kp.clone(),
                own_cert: own.clone(),
                ca_public: ca.public_key(),
                peer_cert: Some(peer.clone()),
                identity: ident.to_vec(),
                sa_proposal: SaBody::new(group, prop.to_vec()),
            }
        };
        Pair {
            ini: base(Role::Initiator, &ki, &ci, &cr, b"initiator.test", b"offer:AES-256-GCM"),
            res: base(Role::Responder, &kr, &cr, &ci, b"responder.test", b"accept:AES-256-GCM"),
        }
    }

    fn run(pair: Pair, rng: &mut ChaCha20Rng) -> (HandshakeState, HandshakeState, Vec<Vec<u8>>) {
        let (mut i, first) = start(pair.ini, rng).unwrap();
        let (mut r, none) = start(pair.res, rng).unwrap();
        assert!(none.is_none());
        let mut wire = vec![first.unwrap()];
        let mut to_responder = true;
        loop {
            let last = wire.last().unwrap().clone();
            let out = if to_responder { r.step(&last, rng) } else { i.step(&last, rng) };
            assert!(!matches!(out.event, Event::Abort(_)), "{:?}", out.event);
            match out.outgoing {
                Some(m) => wire.push(m),
                None => break,
            }
            to_responder = !to_responder;
        }
        (i, r, wire)
    }

    #[test]
    fn both_modes_establish_with_expected_counts() {
        let mut rng = ChaCha20Rng::seed_from_u64(60);
        for mode in ExchangeMode::ALL {
            let pair = setup(mode, CurveId::K163, &mut rng);
            let (i, r, wire) = run(pair, &mut rng);
            assert_eq!(wire.len(), mode.message_count());
            assert_eq!(i.phase(), Phase::Established);
            assert_eq!(r.phase(), Phase::Established);
            assert_eq!(i.established_keys().unwrap(), r.established_keys().unwrap());
            let (ci, cr) = (i.counters(), r.counters());
            let total = ci + cr;
            assert_eq!(total.messages_sent as usize, mode.message_count());
            assert_eq!(total.scalar_mults, 4);
            for c in [ci, cr] {
                assert_eq!((c.signatures_made, c.signatures_verified), (1, 1));
                assert_eq!(c.scalar_mults, 2);
            }
            let pkc = if mode == ExchangeMode::ImprovedMain { 1 } else { 0 };
            for c in [ci, cr] {
                assert_eq!((c.pkc_encryptions, c.pkc_decryptions), (pkc, pkc));
            }
            if mode == ExchangeMode::ImprovedMain {
                assert_eq!((ci.messages_sent, cr.messages_sent), (3, 2));
            }
        }
    }

    #[test]
    fn first_message_shapes() {
        let mut rng = ChaCha20Rng::seed_from_u64(61);
        for mode in ExchangeMode::ALL {
            let pair = setup(mode, CurveId::K163, &mut rng);
            let (_, first) = start(pair.ini, &mut rng).unwrap();
            let m = decode_message(&first.unwrap()).unwrap();
            assert_eq!(m.header.cky_r, [0u8; 8]);
            let kinds: Vec<_> = m.payloads.iter().map(|p| p.kind).collect();
            match mode {
                ExchangeMode::BaselineMain => assert_eq!(kinds, vec![PayloadKind::Sa]),
                ExchangeMode::ImprovedMain => assert_eq!(kinds, vec![PayloadKind::PkcBlob]),
            }
        }
    }

    #[test]
    fn replay_into_completed_responder() {
        let mut rng = ChaCha20Rng::seed_from_u64(62);
        let pair = setup(ExchangeMode::ImprovedMain, CurveId::K163, &mut rng);
        let (_, mut r, wire) = run(pair, &mut rng);
        let keys = r.established_keys().unwrap().clone();
        let before = r.counters();
        let out = r.step(&wire[2], &mut rng);
        assert_eq!(out.event, Event::Abort(AbortReason::UnexpectedMessage));
        assert!(out.outgoing.is_none());
        assert_eq!(r.phase(), Phase::Established);
        assert_eq!(r.established_keys().unwrap(), &keys);
        assert_eq!(r.counters(), before);
    }

    #[test]
    fn keys_unavailable_before_establishment() {
        let mut rng = ChaCha20Rng::seed_from_u64(63);
        let pair = setup(ExchangeMode::BaselineMain, CurveId::K163, &mut rng);
        let (i, _) = start(pair.ini, &mut rng).unwrap();
        assert_eq!(i.established_keys(), Err(StateError::NotEstablished(Phase::AwaitSa)));
    }

    #[test]
    fn sessions_have_distinct_keys() {
        let mut rng = ChaCha20Rng::seed_from_u64(64);
        let pair = setup(ExchangeMode::ImprovedMain, CurveId::K163, &mut rng);
        let again = Pair { ini: pair.ini.clone(), res: pair.res.clone() };
        let (a, _, _) = run(pair, &mut rng);
        let (b, _, _) = run(again, &mut rng);
        assert_ne!(a.established_keys().unwrap(), b.established_keys().unwrap());
    }

    #[test]
    fn config_validation() {
        let mut rng = ChaCha20Rng::seed_from_u64(65);
        let pair = setup(ExchangeMode::ImprovedMain, CurveId::K163, &mut rng);
        let mut c = pair.ini.clone();
        c.peer_cert = None;
        assert_eq!(start(c, &mut rng).unwrap_err(), ConfigError::MissingPeerCert);
        let mut c = pair.ini.clone();
        c.sa_proposal.group_id = 15;
        assert!(matches!(start(c, &mut rng).unwrap_err(), ConfigError::GroupMismatch { .. }));
        let mut c = pair.ini.clone();
        c.peer_cert.as_mut().unwrap().subject_id.push(b'!');
        assert_eq!(start(c, &mut rng).unwrap_err(), ConfigError::PeerCertRejected);
        let mut c = pair.ini.clone();
        c.own_cert = pair.res.own_cert.clone();
        assert_eq!(start(c, &mut rng).unwrap_err(), ConfigError::OwnCertMismatch);
    }

    #[test]
    fn distinct_abort_reasons() {
        let mut rng = ChaCha20Rng::seed_from_u64(66);
        let pair = setup(ExchangeMode::ImprovedMain, CurveId::K163, &mut rng);
        let (_, first) = start(pair.ini.clone(), &mut rng).unwrap();
        let first = first.unwrap();

        let abort_on = |bytes: &[u8], rng: &mut ChaCha20Rng| {
            let (mut r, _) = start(pair.res.clone(), rng).unwrap();
            r.step(bytes, rng).event
        };
        assert_eq!(abort_on(&first[..10], &mut rng), Event::Abort(AbortReason::Malformed));
        let mut m = first.clone();
        m[16] = 1;
        assert_eq!(abort_on(&m, &mut rng), Event::Abort(AbortReason::ModeMismatch));
        let mut m = first.clone();
        m[8] = 1;
        assert_eq!(abort_on(&m, &mut rng), Event::Abort(AbortReason::CookieMismatch));
        let mut m = first.clone();
        m[17] = 1;
        assert_eq!(abort_on(&m, &mut rng), Event::Abort(AbortReason::FlagMismatch));
        let mut m = first.clone();
        *m.last_mut().unwrap() ^= 1;
        assert_eq!(abort_on(&m, &mut rng), Event::Abort(AbortReason::PkcDecryptFailure));

        let mut codes: Vec<_> = [
            AbortReason::Malformed,
            AbortReason::UnexpectedMessage,
            AbortReason::CookieMismatch,
            AbortReason::ModeMismatch,
            AbortReason::FlagMismatch,
            AbortReason::SaRejected,
            AbortReason::InvalidKePoint,
            AbortReason::PkcDecryptFailure,
            AbortReason::SymDecryptFailure,
            AbortReason::CertificateRejected,
            AbortReason::IdentityMismatch,
            AbortReason::SignatureFailure,
        ]
        .iter()
        .map(|r| r.code())
        .collect();
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), 12);
    }

    #[test]
    fn wrong_group_rejected_by_responder() {
        let mut rng = ChaCha20Rng::seed_from_u64(67);
        let pair = setup(ExchangeMode::BaselineMain, CurveId::K163, &mut rng);
        let (ini, _) = start(pair.ini, &mut rng).unwrap();
        let (cky_i, _) = ini.cookies();
        let header = MessageHeader::new(cky_i, [0; 8], ExchangeMode::BaselineMain, false);
        let sa = SaBody::new(15, b"offer".to_vec()).to_bytes();
        let m = encode_message(&header, &[Payload::new(PayloadKind::Sa, sa)]).unwrap();
        let (mut r, _) = start(pair.res, &mut rng).unwrap();
        assert_eq!(r.step(&m, &mut rng).event, Event::Abort(AbortReason::SaRejected));
    }
}
