//! Phase-1 key exchange over binary Koblitz curves: field and curve
//! arithmetic, ECDH and EC-DSA, hybrid EC encryption, the SKEYID chain,
//! a wire codec, a toy CA, the main-mode state machines and a
//! deterministic attack simulator.
//!
//! None of the arithmetic is constant-time; this crate is a testbed.

pub mod bigint;
pub mod codec;
pub mod curve;
pub mod ecc;
pub mod gf2m;
pub mod handshake;
pub mod kdf;
pub mod pkc;
pub mod pki;
pub mod sim;
pub mod vectors;
