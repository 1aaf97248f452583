//! Wire format: a simplified ISAKMP header followed by typed payloads.
//!
//! ```text
//! header  = CKY-I(8) CKY-R(8) mode(1) flags(1) length(4)
//! payload = kind(1) length(2) body
//! ```
//!
//! All integers are big-endian; the header length counts the whole message.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::curve::CurveId;

pub const HEADER_LEN: usize = 22;
pub const MAX_PAYLOAD_BODY: usize = u16::MAX as usize;
/// Bit 0 of the flags octet: payloads after the header are encrypted (HDR*).
pub const FLAG_ENCRYPTED: u8 = 0x01;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("truncated: needed {needed} octets at offset {offset}, {available} available")]
    Truncated { offset: usize, needed: usize, available: usize },
    #[error("header length field {declared} disagrees with {actual} octets")]
    LengthMismatch { declared: u64, actual: usize },
    #[error("unknown exchange mode {0:#04x}")]
    UnknownMode(u8),
    #[error("reserved flag bits set: {0:#04x}")]
    ReservedFlags(u8),
    #[error("unknown payload kind {0:#04x}")]
    UnknownKind(u8),
    #[error("empty {0} payload body")]
    EmptyBody(PayloadKind),
    #[error("{kind} body of {len} octets exceeds 65535")]
    BodyTooLong { kind: PayloadKind, len: usize },
    #[error("message length overflows 32 bits")]
    MessageTooLong,
    #[error("unregistered DH group identifier {0}")]
    UnknownGroup(u16),
    #[error("SA body must carry a group identifier and a non-empty proposal")]
    ShortSa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExchangeMode {
    /// Six-message main mode.
    BaselineMain,
    /// Five-message protected main mode.
    ImprovedMain,
}

impl ExchangeMode {
    pub const ALL: [ExchangeMode; 2] = [ExchangeMode::BaselineMain, ExchangeMode::ImprovedMain];

    pub fn octet(self) -> u8 {
        match self {
            ExchangeMode::BaselineMain => 1,
            ExchangeMode::ImprovedMain => 2,
        }
    }

    pub fn from_octet(v: u8) -> Result<ExchangeMode, CodecError> {
        match v {
            1 => Ok(ExchangeMode::BaselineMain),
            2 => Ok(ExchangeMode::ImprovedMain),
            other => Err(CodecError::UnknownMode(other)),
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            ExchangeMode::BaselineMain => "baseline",
            ExchangeMode::ImprovedMain => "improved",
        }
    }

    /// Messages in a complete exchange.
    pub fn message_count(self) -> usize {
        match self {
            ExchangeMode::BaselineMain => 6,
            ExchangeMode::ImprovedMain => 5,
        }
    }
}

impl fmt::Display for ExchangeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for ExchangeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" | "baseline_main" => Ok(ExchangeMode::BaselineMain),
            "improved" | "improved_main" => Ok(ExchangeMode::ImprovedMain),
            _ => Err(format!("unknown mode {s:?} (expected baseline or improved)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageHeader {
    pub cky_i: [u8; 8],
    pub cky_r: [u8; 8],
    pub mode: ExchangeMode,
    pub flags: u8,
    /// Total message length; recomputed by [`encode_message`].
    pub message_len: u32,
}

impl MessageHeader {
    pub fn new(cky_i: [u8; 8], cky_r: [u8; 8], mode: ExchangeMode, encrypted: bool) -> Self {
        let flags = if encrypted { FLAG_ENCRYPTED } else { 0 };
        MessageHeader { cky_i, cky_r, mode, flags, message_len: 0 }
    }

    pub fn encrypted(&self) -> bool {
        self.flags & FLAG_ENCRYPTED != 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PayloadKind {
    Sa,
    Ke,
    Id,
    Cert,
    Sig,
    Nonce,
    PkcBlob,
    SymBlob,
}

impl PayloadKind {
    pub const ALL: [PayloadKind; 8] = [
        PayloadKind::Sa,
        PayloadKind::Ke,
        PayloadKind::Id,
        PayloadKind::Cert,
        PayloadKind::Sig,
        PayloadKind::Nonce,
        PayloadKind::PkcBlob,
        PayloadKind::SymBlob,
    ];

    pub fn octet(self) -> u8 {
        match self {
            PayloadKind::Sa => 1,
            PayloadKind::Ke => 4,
            PayloadKind::Id => 5,
            PayloadKind::Cert => 6,
            PayloadKind::Sig => 9,
            PayloadKind::Nonce => 10,
            PayloadKind::PkcBlob => 0x80,
            PayloadKind::SymBlob => 0x81,
        }
    }

    pub fn from_octet(v: u8) -> Result<PayloadKind, CodecError> {
        PayloadKind::ALL.into_iter().find(|k| k.octet() == v).ok_or(CodecError::UnknownKind(v))
    }
}

impl fmt::Display for PayloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PayloadKind::Sa => "SA",
            PayloadKind::Ke => "KE",
            PayloadKind::Id => "ID",
            PayloadKind::Cert => "CERT",
            PayloadKind::Sig => "SIG",
            PayloadKind::Nonce => "NONCE",
            PayloadKind::PkcBlob => "PKC_BLOB",
            PayloadKind::SymBlob => "SYM_BLOB",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Payload {
    pub kind: PayloadKind,
    pub body: Vec<u8>,
}

impl Payload {
    pub fn new(kind: PayloadKind, body: impl Into<Vec<u8>>) -> Payload {
        Payload { kind, body: body.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub header: MessageHeader,
    pub payloads: Vec<Payload>,
}

impl Message {
    /// `"SA(34) KE(43)"`-style summary for transcripts.
    pub fn summary(&self) -> String {
        let mut s = summarize(&self.payloads);
        if self.header.encrypted() {
            s.insert_str(0, "HDR* ");
        }
        s
    }
}

pub fn summarize(payloads: &[Payload]) -> String {
    payloads.iter().map(|p| format!("{}({})", p.kind, p.body.len())).collect::<Vec<_>>().join(" ")
}

/// Serializes payloads as `kind | u16 length | body`, in order.
pub fn encode_payloads(payloads: &[Payload]) -> Result<Vec<u8>, CodecError> {
    let mut out = Vec::new();
    for p in payloads {
        if p.body.is_empty() {
            return Err(CodecError::EmptyBody(p.kind));
        }
        if p.body.len() > MAX_PAYLOAD_BODY {
            return Err(CodecError::BodyTooLong { kind: p.kind, len: p.body.len() });
        }
        out.push(p.kind.octet());
        out.extend_from_slice(&(p.body.len() as u16).to_be_bytes());
        out.extend_from_slice(&p.body);
    }
    Ok(out)
}

pub fn decode_payloads(bytes: &[u8]) -> Result<Vec<Payload>, CodecError> {
    decode_payloads_at(bytes, 0)
}

fn take(bytes: &[u8], pos: usize, n: usize, base: usize) -> Result<&[u8], CodecError> {
    bytes.get(pos..pos + n).ok_or(CodecError::Truncated {
        offset: base + pos,
        needed: n,
        available: bytes.len().saturating_sub(pos),
    })
}

fn decode_payloads_at(bytes: &[u8], base: usize) -> Result<Vec<Payload>, CodecError> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let head = take(bytes, pos, 3, base)?;
        let kind = PayloadKind::from_octet(head[0])?;
        let len = u16::from_be_bytes([head[1], head[2]]) as usize;
        if len == 0 {
            return Err(CodecError::EmptyBody(kind));
        }
        let body = take(bytes, pos + 3, len, base)?;
        out.push(Payload { kind, body: body.to_vec() });
        pos += 3 + len;
    }
    Ok(out)
}

/// Header followed by the payload list; the length field is filled in.
pub fn encode_message(header: &MessageHeader, payloads: &[Payload]) -> Result<Vec<u8>, CodecError> {
    if header.flags & !FLAG_ENCRYPTED != 0 {
        return Err(CodecError::ReservedFlags(header.flags));
    }
    let body = encode_payloads(payloads)?;
    let total = u32::try_from(HEADER_LEN + body.len()).map_err(|_| CodecError::MessageTooLong)?;
    let mut out = Vec::with_capacity(total as usize);
    out.extend_from_slice(&header.cky_i);
    out.extend_from_slice(&header.cky_r);
    out.push(header.mode.octet());
    out.push(header.flags);
    out.extend_from_slice(&total.to_be_bytes());
    out.extend(body);
    Ok(out)
}

pub fn decode_header(bytes: &[u8]) -> Result<MessageHeader, CodecError> {
    let h = take(bytes, 0, HEADER_LEN, 0)?;
    let mode = ExchangeMode::from_octet(h[16])?;
    let flags = h[17];
    if flags & !FLAG_ENCRYPTED != 0 {
        return Err(CodecError::ReservedFlags(flags));
    }
    Ok(MessageHeader {
        cky_i: h[0..8].try_into().unwrap(),
        cky_r: h[8..16].try_into().unwrap(),
        mode,
        flags,
        message_len: u32::from_be_bytes(h[18..22].try_into().unwrap()),
    })
}

pub fn decode_message(bytes: &[u8]) -> Result<Message, CodecError> {
    let header = decode_header(bytes)?;
    if header.message_len as u64 != bytes.len() as u64 {
        return Err(CodecError::LengthMismatch { declared: header.message_len as u64, actual: bytes.len() });
    }
    let payloads = decode_payloads_at(&bytes[HEADER_LEN..], HEADER_LEN)?;
    Ok(Message { header, payloads })
}

/// DH group identifier to curve name.
pub fn group_registry(group_id: u16) -> Result<&'static str, CodecError> {
    CurveId::from_group_id(group_id).map(CurveId::name).map_err(|_| CodecError::UnknownGroup(group_id))
}

/// SA payload body: `group id(2) | proposal`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SaBody {
    pub group_id: u16,
    /// Opaque cipher-suite descriptor.
    pub proposal: Vec<u8>,
}

impl SaBody {
    pub fn new(group_id: u16, proposal: impl Into<Vec<u8>>) -> SaBody {
        SaBody { group_id, proposal: proposal.into() }
    }

    pub fn curve(&self) -> Result<CurveId, CodecError> {
        CurveId::from_group_id(self.group_id).map_err(|_| CodecError::UnknownGroup(self.group_id))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.group_id.to_be_bytes().to_vec();
        out.extend_from_slice(&self.proposal);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<SaBody, CodecError> {
        if bytes.len() < 3 {
            return Err(CodecError::ShortSa);
        }
        let group_id = u16::from_be_bytes([bytes[0], bytes[1]]);
        group_registry(group_id)?;
        Ok(SaBody { group_id, proposal: bytes[2..].to_vec() })
    }
}
