//! Deterministic in-memory network for two parties and an optional
//! adversary.
//!
//! Every random choice comes from a ChaCha20 stream keyed by
//! `SHA-256(seed | label)`, one stream per actor, so a scenario's seed fixes
//! its report octet for octet.

use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::codec::{
    decode_message, decode_payloads, encode_message, ExchangeMode, Message, Payload, PayloadKind, SaBody,
};
use crate::curve::{CurveId, CurveParams, CurvePoint};
use crate::ecc::KeyPair;
use crate::handshake::{start, AbortReason, Event, HandshakeConfig, HandshakeState, Instrumentation, Role};
use crate::kdf::{
    derive_chain, ecdh_block_key, encryption_key, hash, skeyid_sig, KeyMaterialInputs, PrfOutput,
};
use crate::pkc::{pkc_encrypt, sym_decrypt, sym_encrypt, SymCiphertext};
use crate::pki::{CaPublicKey, Certificate, CertificateAuthority};

pub const INITIATOR_ID: &[u8] = b"initiator.east.example";
pub const RESPONDER_ID: &[u8] = b"responder.west.example";
pub const CA_NAME: &[u8] = b"simulation-ca";
pub const SA_I_PROPOSAL: &[u8] = b"offer:AES-256-GCM/HMAC-SHA-256/ECDSA";
pub const SA_R_PROPOSAL: &[u8] = b"accept:AES-256-GCM/HMAC-SHA-256/ECDSA";
const TAMPERED_PROPOSAL: &[u8] = b"tampered:NULL/NONE";
/// Shortest secret the leakage search looks for.
pub const MIN_LEAK_LEN: usize = 8;
pub const DEFAULT_FLOOD: u32 = 100;
pub const DOS_CLAIM_NOTE: &str = "claim: DoS resistance; measurement only, no verdict";

/// Independent stream for one actor.
pub fn sub_rng(seed: u64, label: &str) -> ChaCha20Rng {
    let mut msg = seed.to_be_bytes().to_vec();
    msg.extend_from_slice(label.as_bytes());
    ChaCha20Rng::from_seed(hash(&msg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adversary {
    None,
    PassiveEavesdrop,
    MitmKeSwap,
    TamperSweep,
    Flood(u32),
}

impl fmt::Display for Adversary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Adversary::None => f.write_str("none"),
            Adversary::PassiveEavesdrop => f.write_str("passive_eavesdrop"),
            Adversary::MitmKeSwap => f.write_str("mitm_ke_swap"),
            Adversary::TamperSweep => f.write_str("tamper_sweep"),
            Adversary::Flood(n) => write!(f, "flood({n})"),
        }
    }
}

impl FromStr for Adversary {
    type Err = String;

    /// Accepts the display names, short aliases, and `flood:N` / `flood(N)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        let flood_count = |arg: &str| {
            arg.parse::<u32>()
                .ok()
                .filter(|n| *n >= 1)
                .map(Adversary::Flood)
                .ok_or_else(|| format!("flood count must be a positive integer, got {arg:?}"))
        };
        match s.as_str() {
            "none" | "honest" => Ok(Adversary::None),
            "passive_eavesdrop" | "eavesdrop" => Ok(Adversary::PassiveEavesdrop),
            "mitm_ke_swap" | "mitm" => Ok(Adversary::MitmKeSwap),
            "tamper_sweep" | "tamper" => Ok(Adversary::TamperSweep),
            "flood" => Ok(Adversary::Flood(DEFAULT_FLOOD)),
            _ => {
                if let Some(arg) = s.strip_prefix("flood:") {
                    flood_count(arg)
                } else if let Some(arg) = s.strip_prefix("flood(").and_then(|a| a.strip_suffix(')')) {
                    flood_count(arg)
                } else {
                    Err(format!(
                        "unknown scenario {s:?} (expected none, passive_eavesdrop, mitm_ke_swap, tamper_sweep, flood[:N])"
                    ))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scenario {
    pub mode: ExchangeMode,
    pub curve: CurveId,
    pub seed: u64,
    pub adversary: Adversary,
}

/// CA plus both parties' long-term keys, certificates and configurations.
#[derive(Debug, Clone)]
pub struct Deployment {
    pub ca_public: CaPublicKey,
    pub initiator: HandshakeConfig,
    pub responder: HandshakeConfig,
}

impl Deployment {
    pub fn new(mode: ExchangeMode, curve: CurveId, seed: u64) -> Deployment {
        let c = curve.params();
        let group = c.group_id.expect("simulations run on registered curves");
        let mut rng = sub_rng(seed, "deployment");
        let mut ca = CertificateAuthority::generate(c, CA_NAME.to_vec(), &mut rng);
        let ki = KeyPair::generate(c, &mut rng);
        let kr = KeyPair::generate(c, &mut rng);
        let ci = ca.issue(INITIATOR_ID, ki.public(), c, &mut rng).expect("valid key");
        let cr = ca.issue(RESPONDER_ID, kr.public(), c, &mut rng).expect("valid key");
        let ca_public = ca.public_key();
        let config = |role, kp: KeyPair, own: &Certificate, peer: &Certificate, id: &[u8], prop: &[u8]| {
            HandshakeConfig {
                mode,
                role,
                own_keypair: kp,
                own_cert: own.clone(),
                ca_public: ca_public.clone(),
                peer_cert: Some(peer.clone()),
                identity: id.to_vec(),
                sa_proposal: SaBody::new(group, prop.to_vec()),
            }
        };
        Deployment {
            initiator: config(Role::Initiator, ki, &ci, &cr, INITIATOR_ID, SA_I_PROPOSAL),
            responder: config(Role::Responder, kr, &cr, &ci, RESPONDER_ID, SA_R_PROPOSAL),
            ca_public,
        }
    }

    fn public_of(&self, role: Role) -> CurvePoint {
        let cfg = match role {
            Role::Initiator => &self.initiator,
            Role::Responder => &self.responder,
        };
        *cfg.own_keypair.public()
    }

    /// The payload bodies whose confidentiality the leakage check audits.
    pub fn secrets(&self) -> [(&'static str, Vec<u8>); 4] {
        [
            ("SA_i", self.initiator.sa_proposal.to_bytes()),
            ("SA_r", self.responder.sa_proposal.to_bytes()),
            ("ID_i", self.initiator.identity.clone()),
            ("ID_r", self.responder.identity.clone()),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToResponder,
    ToInitiator,
}

impl Direction {
    fn recipient(self) -> Role {
        match self {
            Direction::ToResponder => Role::Responder,
            Direction::ToInitiator => Role::Initiator,
        }
    }

    fn flip(self) -> Direction {
        match self {
            Direction::ToResponder => Direction::ToInitiator,
            Direction::ToInitiator => Direction::ToResponder,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::ToResponder => "I->R",
            Direction::ToInitiator => "R->I",
        })
    }
}

/// One message as it crossed the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageRecord {
    /// 1-based ladder position.
    pub index: usize,
    pub direction: Direction,
    /// Octets delivered to the recipient.
    pub wire: Vec<u8>,
    /// Octets the sender emitted, when an adversary changed them.
    pub original: Option<Vec<u8>>,
    pub summary: String,
    /// Sender's counters right after emitting the message.
    pub sender_counters: Instrumentation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Established,
    /// A party aborted without any adversarial modification in flight.
    Aborted {
        party: Role,
        reason: AbortReason,
    },
    /// A party aborted after an adversary modified traffic.
    AttackerDetected {
        party: Role,
        reason: AbortReason,
    },
    /// The exchange stopped with neither party terminal.
    Incomplete,
}

impl Outcome {
    pub fn abort_reason(&self) -> Option<AbortReason> {
        match self {
            Outcome::Aborted { reason, .. } | Outcome::AttackerDetected { reason, .. } => Some(*reason),
            _ => None,
        }
    }

    pub fn is_abort(&self) -> bool {
        self.abort_reason().is_some()
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Established => f.write_str("established"),
            Outcome::Aborted { party, reason } => write!(f, "aborted by {party}: {reason}"),
            Outcome::AttackerDetected { party, reason } => {
                write!(f, "attacker detected by {party}: {reason}")
            }
            Outcome::Incomplete => f.write_str("incomplete"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Leak {
    pub secret: &'static str,
    pub found_in_clear: bool,
}

/// A single honest or attacked exchange.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub outcome: Outcome,
    pub transcript: Vec<MessageRecord>,
    pub initiator: HandshakeState,
    pub responder: HandshakeState,
}

/// Sits between the parties and may rewrite messages.
trait Wire {
    fn relay(&mut self, index: usize, direction: Direction, msg: Vec<u8>) -> Vec<u8>;
}

struct Passive;

impl Wire for Passive {
    fn relay(&mut self, _: usize, _: Direction, msg: Vec<u8>) -> Vec<u8> {
        msg
    }
}

fn summary_of(bytes: &[u8]) -> String {
    match decode_message(bytes) {
        Ok(m) => m.summary(),
        Err(_) => "<undecodable>".to_string(),
    }
}

fn exchange(dep: &Deployment, seed: u64, wire: &mut dyn Wire) -> RunResult {
    let mut rng_i = sub_rng(seed, "initiator");
    let mut rng_r = sub_rng(seed, "responder");
    let (mut ini, first) = start(dep.initiator.clone(), &mut rng_i).expect("deployment is consistent");
    let (mut res, _) = start(dep.responder.clone(), &mut rng_r).expect("deployment is consistent");

    let mut transcript = Vec::new();
    let mut pending = first.expect("initiator speaks first");
    let mut direction = Direction::ToResponder;
    let mut sender_counters = ini.counters();
    let mut abort = None;
    let mut altered_any = false;
    for index in 1.. {
        let delivered = wire.relay(index, direction, pending.clone());
        let original = (delivered != pending).then_some(pending);
        altered_any |= original.is_some();
        transcript.push(MessageRecord {
            index,
            direction,
            summary: summary_of(&delivered),
            wire: delivered.clone(),
            original,
            sender_counters,
        });
        let (recipient, rng) = match direction.recipient() {
            Role::Responder => (&mut res, &mut rng_r),
            Role::Initiator => (&mut ini, &mut rng_i),
        };
        let out = recipient.step(&delivered, rng);
        sender_counters = recipient.counters();
        if let Event::Abort(reason) = out.event {
            abort = Some((direction.recipient(), reason));
            break;
        }
        match out.outgoing {
            Some(m) => pending = m,
            None => break,
        }
        direction = direction.flip();
    }

    let outcome = match abort {
        Some((party, reason)) if altered_any => Outcome::AttackerDetected { party, reason },
        Some((party, reason)) => Outcome::Aborted { party, reason },
        None if ini.established_keys().is_ok() && res.established_keys().is_ok() => Outcome::Established,
        None => Outcome::Incomplete,
    };
    RunResult { outcome, transcript, initiator: ini, responder: res }
}

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    needle.len() <= hay.len() && hay.windows(needle.len()).any(|w| w == needle)
}

/// Exact substring search for each secret over every octet seen on the
/// wire, including pre-modification originals.
pub fn leakage(dep: &Deployment, transcript: &[MessageRecord]) -> Vec<Leak> {
    dep.secrets()
        .into_iter()
        .map(|(secret, body)| {
            assert!(body.len() >= MIN_LEAK_LEN, "{secret} too short to audit");
            let found_in_clear = transcript.iter().any(|r| {
                contains(&r.wire, &body) || r.original.as_deref().is_some_and(|o| contains(o, &body))
            });
            Leak { secret, found_in_clear }
        })
        .collect()
}

fn reencode(msg: &Message) -> Vec<u8> {
    encode_message(&msg.header, &msg.payloads).expect("re-encoding a decoded message")
}

/// Replaces both ephemeral keys with its own and re-encrypts every
/// protected block it can open, so that only signatures stand in its way.
struct KeSwap {
    curve: &'static CurveParams,
    mode: ExchangeMode,
    rng: ChaCha20Rng,
    toward_r: Option<KeyPair>,
    toward_i: Option<KeyPair>,
    ke_i: Option<CurvePoint>,
    ke_r: Option<CurvePoint>,
    ni: Vec<u8>,
    nr: Vec<u8>,
    read_id_i: bool,
    read_id_r: bool,
}

impl KeSwap {
    fn new(dep: &Deployment, seed: u64) -> KeSwap {
        KeSwap {
            curve: dep.initiator.own_keypair.curve(),
            mode: dep.initiator.mode,
            rng: sub_rng(seed, "adversary"),
            toward_r: None,
            toward_i: None,
            ke_i: None,
            ke_r: None,
            ni: Vec::new(),
            nr: Vec::new(),
            read_id_i: false,
            read_id_r: false,
        }
    }

    fn shared_with(&self, role: Role) -> Option<CurvePoint> {
        let (mine, theirs) = match role {
            Role::Initiator => (self.toward_i.as_ref()?, self.ke_i.as_ref()?),
            Role::Responder => (self.toward_r.as_ref()?, self.ke_r.as_ref()?),
        };
        self.curve.scalar_mul(mine.secret(), theirs).ok()
    }

    /// HDR* key of the session the adversary holds with `role`.
    fn enc_key_with(&self, role: Role, msg: &Message) -> Option<PrfOutput> {
        let shared = self.shared_with(role)?;
        let (ke_i, ke_r) = match role {
            Role::Initiator => (*self.ke_i.as_ref()?, *self.toward_i.as_ref()?.public()),
            Role::Responder => (*self.toward_r.as_ref()?.public(), *self.ke_r.as_ref()?),
        };
        let inputs = KeyMaterialInputs {
            curve: self.curve,
            ni_b: self.ni.clone(),
            nr_b: self.nr.clone(),
            cky_i: msg.header.cky_i,
            cky_r: msg.header.cky_r,
            shared_point: shared,
            ke_i,
            ke_r,
            sa_i_b: None,
            sa_r_b: None,
            id_ii_b: None,
            id_ir_b: None,
        };
        let skeyid = skeyid_sig(&inputs).ok()?;
        Some(encryption_key(&derive_chain(&skeyid, &inputs).ok()?.skeyid_e))
    }

    /// Opens `blob` under `from`, notes whether an ID was readable, and
    /// seals the same plaintext under `to`.
    fn rewrap(&mut self, blob: &[u8], from: &PrfOutput, to: &PrfOutput) -> Option<(Vec<u8>, bool)> {
        let inner = sym_decrypt(from, &SymCiphertext::from_bytes(blob).ok()?).ok()?;
        let saw_id =
            decode_payloads(&inner).map(|ps| ps.iter().any(|p| p.kind == PayloadKind::Id)).unwrap_or(false);
        let ct = sym_encrypt(to, &inner, &mut self.rng).ok()?;
        Some((ct.to_bytes(), saw_id))
    }
}

impl Wire for KeSwap {
    fn relay(&mut self, index: usize, _: Direction, bytes: Vec<u8>) -> Vec<u8> {
        let Ok(mut msg) = decode_message(&bytes) else {
            return bytes;
        };
        match index {
            3 if msg.payloads.len() >= 2 => {
                self.ke_i = self.curve.decode_point(&msg.payloads[0].body).ok();
                self.ni = msg.payloads[1].body.clone();
                let m = KeyPair::generate(self.curve, &mut self.rng);
                msg.payloads[0].body = m.public().to_bytes();
                self.toward_r = Some(m);
            }
            4 if msg.payloads.len() >= 2 => {
                self.ke_r = self.curve.decode_point(&msg.payloads[0].body).ok();
                self.nr = msg.payloads[1].body.clone();
                let m = KeyPair::generate(self.curve, &mut self.rng);
                msg.payloads[0].body = m.public().to_bytes();
                self.toward_i = Some(m);
                if self.mode == ExchangeMode::ImprovedMain && msg.payloads.len() == 3 {
                    let keys = self
                        .shared_with(Role::Responder)
                        .zip(self.shared_with(Role::Initiator))
                        .and_then(|(r, i)| Some((ecdh_block_key(&r).ok()?, ecdh_block_key(&i).ok()?)));
                    if let Some((from, to)) = keys {
                        if let Some((blob, saw)) = self.rewrap(&msg.payloads[2].body, &from, &to) {
                            msg.payloads[2].body = blob;
                            self.read_id_r |= saw;
                        }
                    }
                }
            }
            5 | 6 if msg.payloads.len() == 1 => {
                let (sender, receiver) = if index == 5 {
                    (Role::Initiator, Role::Responder)
                } else {
                    (Role::Responder, Role::Initiator)
                };
                if let (Some(from), Some(to)) =
                    (self.enc_key_with(sender, &msg), self.enc_key_with(receiver, &msg))
                {
                    if let Some((blob, saw)) = self.rewrap(&msg.payloads[0].body, &from, &to) {
                        msg.payloads[0].body = blob;
                        match sender {
                            Role::Initiator => self.read_id_i |= saw,
                            Role::Responder => self.read_id_r |= saw,
                        }
                    }
                }
            }
            _ => return bytes,
        }
        reencode(&msg)
    }
}

/// Semantic field that a tamper position targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    SaI,
    SaR,
    KeI,
    NI,
    KeR,
    NR,
    AuthR,
    AuthI,
}

impl Field {
    pub const ALL: [Field; 8] =
        [Field::SaI, Field::SaR, Field::KeI, Field::NI, Field::KeR, Field::NR, Field::AuthR, Field::AuthI];

    pub fn name(self) -> &'static str {
        match self {
            Field::SaI => "SA_i",
            Field::SaR => "SA_r",
            Field::KeI => "KE_i",
            Field::NI => "N_i",
            Field::KeR => "KE_r",
            Field::NR => "N_r",
            Field::AuthR => "AUTH_R",
            Field::AuthI => "AUTH_I",
        }
    }

    /// `(message index, payload index)` carrying the field.
    pub fn location(self, mode: ExchangeMode) -> (usize, usize) {
        match (self, mode) {
            (Field::SaI, _) => (1, 0),
            (Field::SaR, _) => (2, 0),
            (Field::KeI, _) => (3, 0),
            (Field::NI, _) => (3, 1),
            (Field::KeR, _) => (4, 0),
            (Field::NR, _) => (4, 1),
            (Field::AuthR, ExchangeMode::BaselineMain) => (6, 0),
            (Field::AuthR, ExchangeMode::ImprovedMain) => (4, 2),
            (Field::AuthI, _) => (5, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// XOR 1 into the last octet of the payload body.
    Flip,
    /// Swap in a different well-formed SA, re-encrypting it to the
    /// recipient's public key where the mode requires.
    Substitute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TamperPosition {
    pub field: Field,
    pub method: Method,
}

impl TamperPosition {
    pub fn all() -> Vec<TamperPosition> {
        let mut out: Vec<_> =
            Field::ALL.iter().map(|&field| TamperPosition { field, method: Method::Flip }).collect();
        for field in [Field::SaI, Field::SaR] {
            out.push(TamperPosition { field, method: Method::Substitute });
        }
        out
    }
}

impl fmt::Display for TamperPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = match self.method {
            Method::Flip => "flip",
            Method::Substitute => "substitute",
        };
        write!(f, "{}/{}", self.field.name(), m)
    }
}

struct Tamper<'a> {
    dep: &'a Deployment,
    mode: ExchangeMode,
    target: TamperPosition,
    rng: ChaCha20Rng,
    applied: bool,
}

impl Wire for Tamper<'_> {
    fn relay(&mut self, index: usize, direction: Direction, bytes: Vec<u8>) -> Vec<u8> {
        let (at, slot) = self.target.field.location(self.mode);
        if index != at {
            return bytes;
        }
        let Ok(mut msg) = decode_message(&bytes) else {
            return bytes;
        };
        let Some(payload) = msg.payloads.get_mut(slot) else {
            return bytes;
        };
        match self.target.method {
            Method::Flip => {
                *payload.body.last_mut().expect("payload bodies are non-empty") ^= 1;
            }
            Method::Substitute => {
                let curve = self.dep.initiator.own_keypair.curve();
                let sa = SaBody::new(curve.group_id.expect("registered"), TAMPERED_PROPOSAL).to_bytes();
                payload.body = match self.mode {
                    ExchangeMode::BaselineMain => sa,
                    ExchangeMode::ImprovedMain => {
                        let to = self.dep.public_of(direction.recipient());
                        pkc_encrypt(&to, &sa, &mut self.rng, curve).expect("valid key").to_bytes()
                    }
                };
            }
        }
        self.applied = true;
        reencode(&msg)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepEntry {
    pub position: TamperPosition,
    pub message_index: usize,
    pub applied: bool,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepReport {
    pub mode: ExchangeMode,
    pub entries: Vec<SweepEntry>,
}

impl SweepReport {
    /// Positions at which some party aborted.
    pub fn abort_set(&self) -> BTreeSet<TamperPosition> {
        self.entries.iter().filter(|e| e.outcome.is_abort()).map(|e| e.position).collect()
    }

    pub fn undetected(&self) -> Vec<TamperPosition> {
        self.entries.iter().filter(|e| !e.outcome.is_abort()).map(|e| e.position).collect()
    }
}

/// One run per tamper position, each against a fresh honest pair.
pub fn tamper_sweep(mode: ExchangeMode, curve: CurveId, seed: u64) -> SweepReport {
    let dep = Deployment::new(mode, curve, seed);
    let entries = TamperPosition::all()
        .into_iter()
        .map(|position| {
            let mut wire =
                Tamper { dep: &dep, mode, target: position, rng: sub_rng(seed, "adversary"), applied: false };
            let run = exchange(&dep, seed, &mut wire);
            SweepEntry {
                position,
                message_index: position.field.location(mode).0,
                applied: wire.applied,
                outcome: run.outcome,
            }
        })
        .collect();
    SweepReport { mode, entries }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloodReport {
    pub mode: ExchangeMode,
    pub messages: u32,
    pub responder_totals: Instrumentation,
    /// Responder sessions that answered with message 2.
    pub answered: u32,
}

impl FloodReport {
    /// Public-key operations the responder spent: hybrid decryptions and
    /// encryptions, key-agreement multiplications, signatures.
    pub fn expensive_ops(&self) -> u64 {
        let t = &self.responder_totals;
        t.pkc_decryptions + t.pkc_encryptions + t.scalar_mults + t.signatures_made + t.signatures_verified
    }

    pub fn per_message(&self, v: u64) -> f64 {
        v as f64 / self.messages as f64
    }
}

/// `n` well-formed message 1s from fresh fake initiators, each hitting a
/// fresh responder session.
pub fn flood(mode: ExchangeMode, curve: CurveId, seed: u64, n: u32) -> FloodReport {
    assert!(n >= 1, "flood needs at least one message");
    let dep = Deployment::new(mode, curve, seed);
    let c = curve.params();
    let group = c.group_id.expect("registered");
    let target = dep.public_of(Role::Responder);
    let mut rng_a = sub_rng(seed, "flood");
    let mut rng_r = sub_rng(seed, "responder");
    let mut totals = Instrumentation::default();
    let mut answered = 0;
    for k in 0..n {
        let mut cky_i = [0u8; 8];
        rand::RngCore::fill_bytes(&mut rng_a, &mut cky_i);
        cky_i[0] |= 1;
        let sa = SaBody::new(group, format!("offer:flood-{k}").into_bytes()).to_bytes();
        let payload = match mode {
            ExchangeMode::BaselineMain => Payload::new(PayloadKind::Sa, sa),
            ExchangeMode::ImprovedMain => Payload::new(
                PayloadKind::PkcBlob,
                pkc_encrypt(&target, &sa, &mut rng_a, c).expect("valid key").to_bytes(),
            ),
        };
        let header = crate::codec::MessageHeader::new(cky_i, [0; 8], mode, false);
        let msg = encode_message(&header, &[payload]).expect("encodable");
        let (mut res, _) = start(dep.responder.clone(), &mut rng_r).expect("consistent");
        if res.step(&msg, &mut rng_r).outgoing.is_some() {
            answered += 1;
        }
        totals += res.counters();
    }
    FloodReport { mode, messages: n, responder_totals: totals, answered }
}

#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub outcome: Outcome,
    pub transcript: Vec<MessageRecord>,
    pub leakage: Vec<Leak>,
    pub initiator: Instrumentation,
    pub responder: Instrumentation,
    /// SKEYID fingerprints when both parties established.
    pub fingerprints: Option<[String; 4]>,
    /// MITM only: whether it could read each identity before detection.
    pub adversary_read: Option<(bool, bool)>,
    pub sweep: Option<SweepReport>,
    pub flood: Option<FloodReport>,
}

/// Runs one scenario. Sweep and flood reports carry an honest reference
/// exchange in the transcript fields.
pub fn run(scenario: Scenario) -> ScenarioReport {
    let Scenario { mode, curve, seed, adversary } = scenario;
    let dep = Deployment::new(mode, curve, seed);
    let mut adversary_read = None;
    let result = match adversary {
        Adversary::MitmKeSwap => {
            let mut mitm = KeSwap::new(&dep, seed);
            let r = exchange(&dep, seed, &mut mitm);
            adversary_read = Some((mitm.read_id_i, mitm.read_id_r));
            r
        }
        _ => exchange(&dep, seed, &mut Passive),
    };
    let sweep = (adversary == Adversary::TamperSweep).then(|| tamper_sweep(mode, curve, seed));
    let flood = match adversary {
        Adversary::Flood(n) => Some(flood(mode, curve, seed, n)),
        _ => None,
    };
    let fingerprints = match (result.initiator.established_keys(), result.responder.established_keys()) {
        (Ok(k), Ok(_)) => Some(k.fingerprints()),
        _ => None,
    };
    ScenarioReport {
        scenario,
        outcome: result.outcome,
        leakage: leakage(&dep, &result.transcript),
        initiator: result.initiator.counters(),
        responder: result.responder.counters(),
        transcript: result.transcript,
        fingerprints,
        adversary_read,
        sweep,
        flood,
    }
}

/// Honest exchange with full party state, for callers that need keys.
pub fn run_honest(mode: ExchangeMode, curve: CurveId, seed: u64) -> RunResult {
    let dep = Deployment::new(mode, curve, seed);
    exchange(&dep, seed, &mut Passive)
}

/// Whether a report shows the outcome class its scenario should produce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub expected: bool,
    pub summary: String,
}

impl ScenarioReport {
    pub fn leaked(&self, secret: &str) -> bool {
        self.leakage.iter().any(|l| l.secret == secret && l.found_in_clear)
    }

    pub fn verdict(&self) -> Verdict {
        let mode = self.scenario.mode;
        let established = self.outcome == Outcome::Established;
        let (expected, summary) = match self.scenario.adversary {
            Adversary::None => (established, self.outcome.to_string()),
            Adversary::PassiveEavesdrop => {
                let leaked: Vec<_> =
                    self.leakage.iter().filter(|l| l.found_in_clear).map(|l| l.secret).collect();
                let summary = if leaked.is_empty() {
                    "no leakage".to_string()
                } else if leaked.iter().all(|s| s.starts_with("SA")) {
                    format!("SA leaked ({})", leaked.join(", "))
                } else {
                    format!("leaked: {}", leaked.join(", "))
                };
                let ok = match mode {
                    ExchangeMode::ImprovedMain => leaked.is_empty(),
                    ExchangeMode::BaselineMain => leaked == ["SA_i", "SA_r"],
                };
                (established && ok, summary)
            }
            Adversary::MitmKeSwap => {
                let ok = matches!(
                    self.outcome,
                    Outcome::AttackerDetected { reason: AbortReason::SignatureFailure, .. }
                );
                let summary = match self.outcome.abort_reason() {
                    Some(r) => format!("aborted: {r}"),
                    None => self.outcome.to_string(),
                };
                (ok, summary)
            }
            Adversary::TamperSweep => {
                let sweep = self.sweep.as_ref().expect("sweep present");
                let undetected = sweep.undetected();
                let ok = match mode {
                    ExchangeMode::ImprovedMain => undetected.is_empty(),
                    ExchangeMode::BaselineMain => {
                        !undetected.is_empty() && undetected.iter().all(|p| p.field == Field::SaR)
                    }
                };
                let summary = if undetected.is_empty() {
                    format!("all {} tamper positions detected", sweep.entries.len())
                } else {
                    let names: Vec<_> = undetected.iter().map(ToString::to_string).collect();
                    format!("undetected: {}", names.join(", "))
                };
                (established && ok && sweep.entries.iter().all(|e| e.applied), summary)
            }
            Adversary::Flood(_) => {
                let f = self.flood.as_ref().expect("flood present");
                let summary = format!(
                    "{:.2} responder public-key ops per bogus message 1 ({})",
                    f.per_message(f.expensive_ops()),
                    DOS_CLAIM_NOTE
                );
                (true, summary)
            }
        };
        Verdict { expected, summary }
    }

    /// Line-delimited `key=value` records in a stable field order.
    pub fn to_records(&self) -> String {
        let s = &self.scenario;
        let mut out = Records::default();
        out.line(&[
            ("record", "scenario".into()),
            ("mode", s.mode.to_string()),
            ("curve", s.curve.name().into()),
            ("seed", s.seed.to_string()),
            ("adversary", s.adversary.to_string()),
        ]);
        for m in &self.transcript {
            out.line(&[
                ("record", "message".into()),
                ("index", m.index.to_string()),
                ("dir", m.direction.to_string()),
                ("len", m.wire.len().to_string()),
                ("altered", m.original.is_some().to_string()),
                ("payloads", m.summary.clone()),
                ("hex", hex::encode(&m.wire)),
            ]);
            let mut fields = vec![("record", "sender_counters".to_string()), ("index", m.index.to_string())];
            fields.extend(m.sender_counters.fields().iter().map(|(k, v)| (*k, v.to_string())));
            out.line(&fields);
        }
        for (party, c) in [("initiator", &self.initiator), ("responder", &self.responder)] {
            let mut fields = vec![("record", "counters".to_string()), ("party", party.to_string())];
            fields.extend(c.fields().iter().map(|(k, v)| (*k, v.to_string())));
            out.line(&fields);
        }
        for l in &self.leakage {
            out.line(&[
                ("record", "leak".into()),
                ("secret", l.secret.into()),
                ("found_in_clear", l.found_in_clear.to_string()),
            ]);
        }
        if let Some((id_i, id_r)) = self.adversary_read {
            out.line(&[
                ("record", "adversary".into()),
                ("read_id_i", id_i.to_string()),
                ("read_id_r", id_r.to_string()),
            ]);
        }
        if let Some(sweep) = &self.sweep {
            for e in &sweep.entries {
                out.line(&[
                    ("record", "tamper".into()),
                    ("position", e.position.to_string()),
                    ("message", e.message_index.to_string()),
                    ("applied", e.applied.to_string()),
                    ("aborted", e.outcome.is_abort().to_string()),
                    ("reason", e.outcome.abort_reason().map_or("-", AbortReason::code).into()),
                ]);
            }
        }
        if let Some(f) = &self.flood {
            let t = &f.responder_totals;
            out.line(&[
                ("record", "flood".into()),
                ("messages", f.messages.to_string()),
                ("answered", f.answered.to_string()),
                ("pkc_decryptions", t.pkc_decryptions.to_string()),
                ("pkc_encryptions", t.pkc_encryptions.to_string()),
                ("scalar_mults", t.scalar_mults.to_string()),
                ("expensive_ops", f.expensive_ops().to_string()),
                ("per_message", format!("{:.3}", f.per_message(f.expensive_ops()))),
                ("pkc_decryptions_per_message", format!("{:.3}", f.per_message(t.pkc_decryptions))),
                ("note", DOS_CLAIM_NOTE.into()),
            ]);
        }
        let mut fields = vec![("record", "outcome".to_string()), ("result", outcome_code(&self.outcome))];
        if let Some(r) = self.outcome.abort_reason() {
            fields.push(("reason", r.code().to_string()));
        }
        out.line(&fields);
        if let Some([k, d, a, e]) = &self.fingerprints {
            out.line(&[
                ("record", "keys".into()),
                ("skeyid", k.clone()),
                ("skeyid_d", d.clone()),
                ("skeyid_a", a.clone()),
                ("skeyid_e", e.clone()),
            ]);
        }
        let v = self.verdict();
        out.line(&[
            ("record", "verdict".into()),
            ("expected", v.expected.to_string()),
            ("summary", v.summary),
        ]);
        out.0
    }

    pub fn to_text(&self) -> String {
        let s = &self.scenario;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "scenario: {} on {} ({} mode, seed {})",
            s.adversary,
            s.curve.name(),
            s.mode,
            s.seed
        );
        let _ = writeln!(out, "transcript ({} messages):", self.transcript.len());
        for m in &self.transcript {
            let mark = if m.original.is_some() { " [altered]" } else { "" };
            let _ = writeln!(
                out,
                "  {:>2} {} {:>5} octets  {}{}",
                m.index,
                m.direction,
                m.wire.len(),
                m.summary,
                mark
            );
        }
        for (party, c) in [("initiator", &self.initiator), ("responder", &self.responder)] {
            let body: Vec<_> = c.fields().iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(out, "{party}: {}", body.join(" "));
        }
        let leaks: Vec<_> = self
            .leakage
            .iter()
            .map(|l| format!("{}={}", l.secret, if l.found_in_clear { "CLEAR" } else { "hidden" }))
            .collect();
        let _ = writeln!(out, "leakage: {}", leaks.join(" "));
        if let Some((id_i, id_r)) = self.adversary_read {
            let _ = writeln!(out, "adversary read ID_i: {id_i}, ID_r: {id_r}");
        }
        if let Some(sweep) = &self.sweep {
            let _ = writeln!(out, "tamper sweep:");
            for e in &sweep.entries {
                let _ =
                    writeln!(out, "  {:<16} msg {}  {}", e.position.to_string(), e.message_index, e.outcome);
            }
        }
        if let Some(f) = &self.flood {
            let t = &f.responder_totals;
            let _ = writeln!(
                out,
                "flood: {} bogus message 1s, responder pkc_decryptions={} pkc_encryptions={} scalar_mults={} ({:.2} public-key ops per message)",
                f.messages,
                t.pkc_decryptions,
                t.pkc_encryptions,
                t.scalar_mults,
                f.per_message(f.expensive_ops())
            );
            let _ = writeln!(out, "  {DOS_CLAIM_NOTE}");
        }
        let _ = writeln!(out, "outcome: {}", self.outcome);
        if let Some([k, d, a, e]) = &self.fingerprints {
            let _ = writeln!(out, "SKEYID {k}  SKEYID_d {d}  SKEYID_a {a}  SKEYID_e {e}");
        }
        let v = self.verdict();
        let _ =
            writeln!(out, "verdict: {} ({})", v.summary, if v.expected { "expected" } else { "UNEXPECTED" });
        out
    }
}

fn outcome_code(o: &Outcome) -> String {
    match o {
        Outcome::Established => "established".into(),
        Outcome::Aborted { party, .. } => format!("aborted_by_{party}"),
        Outcome::AttackerDetected { party, .. } => format!("attacker_detected_by_{party}"),
        Outcome::Incomplete => "incomplete".into(),
    }
}

/// Builder for `key=value` lines; values with spaces are double-quoted.
#[derive(Default)]
pub struct Records(pub String);

impl Records {
    pub fn line<V: AsRef<str>>(&mut self, fields: &[(&str, V)]) {
        let parts: Vec<String> = fields
            .iter()
            .map(|(k, v)| {
                let v = v.as_ref();
                if v.is_empty() || v.contains(' ') {
                    format!("{k}=\"{v}\"")
                } else {
                    format!("{k}={v}")
                }
            })
            .collect();
        self.0.push_str(&parts.join(" "));
        self.0.push('\n');
    }
}

/// Splits one record line back into `(key, value)` pairs.
pub fn parse_record(line: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut rest = line.trim();
    while !rest.is_empty() {
        let Some(eq) = rest.find('=') else { break };
        let key = rest[..eq].to_string();
        rest = &rest[eq + 1..];
        let value;
        if let Some(stripped) = rest.strip_prefix('"') {
            let end = stripped.find('"').unwrap_or(stripped.len());
            value = stripped[..end].to_string();
            rest = stripped.get(end + 1..).unwrap_or("").trim_start();
        } else {
            let end = rest.find(' ').unwrap_or(rest.len());
            value = rest[..end].to_string();
            rest = rest[end..].trim_start();
        }
        out.push((key, value));
    }
    out
}

/// One row of the mode comparison.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompareRow {
    pub mode: ExchangeMode,
    pub key_exchange: String,
    pub signatures: String,
    pub hash_use: String,
    pub messages: String,
    pub public_key_applying: String,
    pub key_use: String,
    pub identification_protection: String,
    pub dos_prevention: String,
    pub sa_protection: String,
    pub ec_group: String,
    pub devices: String,
}

fn mark(ok: bool) -> String {
    if ok { "○" } else { "×" }.to_string()
}

/// Which HDR*-or-`[..]` blocks open under the final `prf(SKEYID_e, "enc")`
/// key, by message index.
fn blocks_under_enc_key(run: &RunResult) -> (Vec<usize>, Vec<usize>) {
    let key = encryption_key(&run.initiator.established_keys().expect("established").skeyid_e);
    let mut same = Vec::new();
    let mut other = Vec::new();
    for m in &run.transcript {
        let Ok(msg) = decode_message(&m.wire) else { continue };
        for p in msg.payloads.iter().filter(|p| p.kind == PayloadKind::SymBlob) {
            let opens = SymCiphertext::from_bytes(&p.body).is_ok_and(|ct| sym_decrypt(&key, &ct).is_ok());
            if opens { &mut same } else { &mut other }.push(m.index);
        }
    }
    (same, other)
}

/// Both modes on one curve, with every computed column taken from live
/// runs. DoS, EC group and device columns are annotations.
pub fn compare(curve: CurveId, seed: u64) -> Vec<CompareRow> {
    ExchangeMode::ALL
        .into_iter()
        .map(|mode| {
            let honest = run_honest(mode, curve, seed);
            assert_eq!(honest.outcome, Outcome::Established, "honest run must establish");
            let t = honest.initiator.counters() + honest.responder.counters();
            let eaves = run(Scenario { mode, curve, seed, adversary: Adversary::PassiveEavesdrop });
            let fl = flood(mode, curve, seed, 8);
            let (same, other) = blocks_under_enc_key(&honest);
            let list = |v: &[usize]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
            let key_use = if other.is_empty() {
                format!("same key in msgs {} ({})", list(&same), same.len())
            } else {
                let mut all = [same.clone(), other.clone()].concat();
                all.sort();
                format!("different keys in msgs {} ({})", list(&all), all.len())
            };
            let (hash_label, ec_group, devices) = match mode {
                ExchangeMode::BaselineMain => ("default", "E(Fp) [annotation]", "desktop [annotation]"),
                ExchangeMode::ImprovedMain => {
                    ("improved", "E(Fp), E(F2^m) [annotation]", "desktop, portable [annotation]")
                }
            };
            let pkc = t.pkc_encryptions;
            CompareRow {
                mode,
                key_exchange: format!("ECDH({})", t.scalar_mults),
                signatures: format!("ECSig({})", t.signatures_made),
                hash_use: format!("{hash_label}({})", t.signatures_made),
                messages: honest.transcript.len().to_string(),
                public_key_applying: if pkc == 0 { "—".into() } else { format!("ECC({pkc})") },
                key_use,
                identification_protection: mark(!eaves.leaked("ID_i") && !eaves.leaked("ID_r")),
                dos_prevention: format!(
                    "not asserted; flood cost {:.1} pkc ops/msg",
                    fl.per_message(fl.responder_totals.pkc_decryptions + fl.responder_totals.pkc_encryptions)
                ),
                sa_protection: mark(!eaves.leaked("SA_i") && !eaves.leaked("SA_r")),
                ec_group: ec_group.into(),
                devices: devices.into(),
            }
        })
        .collect()
}

pub const COMPARE_HEADERS: [&str; 12] = [
    "protocol",
    "key exchange",
    "signatures",
    "HASH use",
    "messages",
    "public-key applying",
    "secret-key use",
    "ID protection",
    "DoS prevention",
    "SA protection",
    "EC group",
    "devices",
];

impl CompareRow {
    pub fn cells(&self) -> [String; 12] {
        [
            match self.mode {
                ExchangeMode::BaselineMain => "main mode".to_string(),
                ExchangeMode::ImprovedMain => "improved main mode".to_string(),
            },
            self.key_exchange.clone(),
            self.signatures.clone(),
            self.hash_use.clone(),
            self.messages.clone(),
            self.public_key_applying.clone(),
            self.key_use.clone(),
            self.identification_protection.clone(),
            self.dos_prevention.clone(),
            self.sa_protection.clone(),
            self.ec_group.clone(),
            self.devices.clone(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_reports() {
        let s = Scenario {
            mode: ExchangeMode::ImprovedMain,
            curve: CurveId::K163,
            seed: 9,
            adversary: Adversary::PassiveEavesdrop,
        };
        assert_eq!(run(s).to_records(), run(s).to_records());
        let other = Scenario { seed: 10, ..s };
        assert_ne!(run(s).to_records(), run(other).to_records());
    }

    #[test]
    fn eavesdrop_by_mode() {
        for mode in ExchangeMode::ALL {
            let r =
                run(Scenario { mode, curve: CurveId::K163, seed: 1, adversary: Adversary::PassiveEavesdrop });
            assert_eq!(r.outcome, Outcome::Established);
            let improved = mode == ExchangeMode::ImprovedMain;
            assert_eq!(r.leaked("SA_i"), !improved);
            assert_eq!(r.leaked("SA_r"), !improved);
            assert!(!r.leaked("ID_i") && !r.leaked("ID_r"));
            assert!(r.verdict().expected, "{:?}", r.verdict());
        }
    }

    #[test]
    fn mitm_detected_by_signature() {
        for mode in ExchangeMode::ALL {
            let r = run(Scenario { mode, curve: CurveId::K163, seed: 2, adversary: Adversary::MitmKeSwap });
            assert_eq!(r.outcome.abort_reason(), Some(AbortReason::SignatureFailure), "{mode}");
            assert!(matches!(r.outcome, Outcome::AttackerDetected { .. }));
            let (read_i, read_r) = r.adversary_read.unwrap();
            match mode {
                ExchangeMode::ImprovedMain => {
                    assert!(read_r && !read_i);
                    assert!(matches!(r.outcome, Outcome::AttackerDetected { party: Role::Initiator, .. }));
                }
                ExchangeMode::BaselineMain => {
                    assert!(read_i && !read_r);
                    assert!(matches!(r.outcome, Outcome::AttackerDetected { party: Role::Responder, .. }));
                }
            }
        }
    }

    #[test]
    fn sweep_gap() {
        let b = tamper_sweep(ExchangeMode::BaselineMain, CurveId::K163, 3);
        let i = tamper_sweep(ExchangeMode::ImprovedMain, CurveId::K163, 3);
        assert!(b.entries.iter().chain(&i.entries).all(|e| e.applied));
        assert!(i.undetected().is_empty(), "{:?}", i.undetected());
        assert!(b.abort_set().is_subset(&i.abort_set()));
        assert!(b.abort_set().len() < i.abort_set().len());
        assert!(b.undetected().iter().all(|p| p.field == Field::SaR));
    }

    #[test]
    fn flood_costs() {
        let b = flood(ExchangeMode::BaselineMain, CurveId::K163, 4, 5);
        let i = flood(ExchangeMode::ImprovedMain, CurveId::K163, 4, 5);
        assert_eq!(b.expensive_ops(), 0);
        assert_eq!(b.answered, 5);
        assert_eq!(i.responder_totals.pkc_decryptions, 5);
        assert_eq!(i.per_message(i.responder_totals.pkc_decryptions), 1.0);
        assert_eq!(i.answered, 5);
    }

    #[test]
    fn scenario_names() {
        assert_eq!("eavesdrop".parse::<Adversary>(), Ok(Adversary::PassiveEavesdrop));
        assert_eq!("flood:12".parse::<Adversary>(), Ok(Adversary::Flood(12)));
        assert_eq!("flood(3)".parse::<Adversary>(), Ok(Adversary::Flood(3)));
        assert_eq!("flood".parse::<Adversary>(), Ok(Adversary::Flood(DEFAULT_FLOOD)));
        assert!("flood:0".parse::<Adversary>().is_err());
        assert!("replay".parse::<Adversary>().is_err());
        for a in [Adversary::None, Adversary::MitmKeSwap, Adversary::TamperSweep, Adversary::Flood(7)] {
            assert_eq!(a.to_string().parse::<Adversary>(), Ok(a));
        }
    }

    #[test]
    fn record_lines_parse_back() {
        let mut r = Records::default();
        r.line(&[("record", "x"), ("summary", "SA leaked (SA_i, SA_r)"), ("n", "3")]);
        let parsed = parse_record(r.0.trim_end());
        assert_eq!(parsed[1], ("summary".to_string(), "SA leaked (SA_i, SA_r)".to_string()));
        assert_eq!(parsed[2], ("n".to_string(), "3".to_string()));
    }

    #[test]
    fn compare_rows() {
        let rows = compare(CurveId::K163, 5);
        let (b, i) = (&rows[0], &rows[1]);
        assert_eq!((b.messages.as_str(), i.messages.as_str()), ("6", "5"));
        assert_eq!((b.public_key_applying.as_str(), i.public_key_applying.as_str()), ("—", "ECC(2)"));
        assert_eq!((b.signatures.as_str(), i.signatures.as_str()), ("ECSig(2)", "ECSig(2)"));
        assert_eq!((b.key_exchange.as_str(), i.key_exchange.as_str()), ("ECDH(4)", "ECDH(4)"));
        assert_eq!(b.key_use, "same key in msgs 5,6 (2)");
        assert_eq!(i.key_use, "different keys in msgs 4,5 (2)");
        assert_eq!((b.sa_protection.as_str(), i.sa_protection.as_str()), ("×", "○"));
        assert_eq!((b.identification_protection.as_str(), i.identification_protection.as_str()), ("○", "○"));
    }
}
