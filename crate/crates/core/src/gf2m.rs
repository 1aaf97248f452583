//! Arithmetic in the binary extension fields GF(2^m) underlying the Koblitz
//! curves.
//!
//! Elements are polynomials over GF(2) of degree < m, stored little-endian in
//! 64-bit limbs (bit `i` of the element is the coefficient of `x^i`). Every
//! element is kept fully reduced, so structural equality is field equality.
//!
//! **None of this code is constant-time.** Branches and memory access depend
//! on secret data. It is meant for simulation and testing, not for
//! protecting real keys.

use std::fmt;
use std::ops::{Add, Mul};

use rand::RngCore;
use thiserror::Error;

/// Limbs per element; enough for m = 571 (and the degree-571 modulus itself).
pub const LIMBS: usize = 9;

type Wide = [u64; 2 * LIMBS];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("field mismatch: {0:?} vs {1:?}")]
    FieldMismatch(FieldId, FieldId),
    #[error("zero has no multiplicative inverse")]
    NotInvertible,
    #[error("invalid hex digit {0:?}")]
    InvalidHex(char),
    #[error("hex string too long for GF(2^{m}): {len} digits, at most {max}")]
    Overlong { m: usize, len: usize, max: usize },
    #[error("value has a coefficient at or above x^{0}")]
    NotReduced(usize),
    #[error("expected {expected} octets, got {got}")]
    BadLength { expected: usize, got: usize },
}

/// Irreducible reduction polynomial `f(x)`, as its nonzero exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReductionPoly {
    m: usize,
    terms: &'static [usize],
}

impl ReductionPoly {
    /// Exponents of `f(x)` in strictly decreasing order, starting with `m`
    /// and ending with 0.
    pub fn terms(&self) -> &'static [usize] {
        self.terms
    }

    pub fn degree(&self) -> usize {
        self.m
    }

    /// Low terms of `f`, i.e. `f(x) - x^m`.
    fn tail(&self) -> &'static [usize] {
        &self.terms[1..]
    }
}

impl fmt::Display for ReductionPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for &t in self.terms {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            match t {
                0 => f.write_str("1")?,
                1 => f.write_str("x")?,
                _ => write!(f, "x^{t}")?,
            }
        }
        Ok(())
    }
}

const POLY_TOY5: ReductionPoly = ReductionPoly { m: 5, terms: &[5, 2, 0] };
const POLY_163: ReductionPoly = ReductionPoly { m: 163, terms: &[163, 7, 6, 3, 0] };
const POLY_233: ReductionPoly = ReductionPoly { m: 233, terms: &[233, 74, 0] };
const POLY_283: ReductionPoly = ReductionPoly { m: 283, terms: &[283, 12, 7, 5, 0] };
const POLY_409: ReductionPoly = ReductionPoly { m: 409, terms: &[409, 87, 0] };
const POLY_571: ReductionPoly = ReductionPoly { m: 571, terms: &[571, 10, 5, 2, 0] };

/// The six supported fields: the five Koblitz-curve fields and a toy
/// GF(2^5) used for exhaustive testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FieldId {
    Toy5,
    F163,
    F233,
    F283,
    F409,
    F571,
}

impl FieldId {
    pub const ALL: [FieldId; 6] =
        [FieldId::Toy5, FieldId::F163, FieldId::F233, FieldId::F283, FieldId::F409, FieldId::F571];

    pub fn poly(self) -> &'static ReductionPoly {
        match self {
            FieldId::Toy5 => &POLY_TOY5,
            FieldId::F163 => &POLY_163,
            FieldId::F233 => &POLY_233,
            FieldId::F283 => &POLY_283,
            FieldId::F409 => &POLY_409,
            FieldId::F571 => &POLY_571,
        }
    }

    pub fn degree(self) -> usize {
        self.poly().m
    }

    /// Octets needed for a big-endian encoding: `ceil(m/8)`.
    pub fn byte_len(self) -> usize {
        self.degree().div_ceil(8)
    }

    /// Hex digits in the canonical encoding: `ceil(m/4)`.
    pub fn hex_len(self) -> usize {
        self.degree().div_ceil(4)
    }

    fn used_limbs(self) -> usize {
        self.degree().div_ceil(64)
    }
}

/// A fully reduced element of GF(2^m).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    limbs: [u64; LIMBS],
    field: FieldId,
}

impl FieldElement {
    pub fn zero(field: FieldId) -> Self {
        FieldElement { limbs: [0; LIMBS], field }
    }

    pub fn one(field: FieldId) -> Self {
        let mut limbs = [0; LIMBS];
        limbs[0] = 1;
        FieldElement { limbs, field }
    }

    /// The monomial `x^k`, reduced modulo `f`.
    pub fn monomial(field: FieldId, k: usize) -> Self {
        let mut wide = [0u64; 2 * LIMBS];
        if k < 2 * LIMBS * 64 {
            wide[k / 64] = 1 << (k % 64);
            return FieldElement { limbs: reduce(&mut wide, field.poly()), field };
        }
        // Only reachable for huge k: x^k = (x^(k/2))^2 * x^(k%2).
        let half = Self::monomial(field, k / 2).square();
        if k % 2 == 1 {
            half * Self::monomial(field, 1)
        } else {
            half
        }
    }

    /// Builds an element from explicit limbs, rejecting unreduced input.
    pub fn from_limbs(field: FieldId, limbs: [u64; LIMBS]) -> Result<Self, FieldError> {
        let fe = FieldElement { limbs, field };
        if fe.degree().is_some_and(|d| d >= field.degree()) {
            return Err(FieldError::NotReduced(field.degree()));
        }
        Ok(fe)
    }

    /// Uniformly random element.
    pub fn random<R: RngCore + ?Sized>(field: FieldId, rng: &mut R) -> Self {
        let mut limbs = [0u64; LIMBS];
        let m = field.degree();
        for (i, limb) in limbs.iter_mut().enumerate().take(field.used_limbs()) {
            *limb = rng.next_u64();
            let lo = i * 64;
            if lo + 64 > m {
                *limb &= low_mask(m - lo);
            }
        }
        FieldElement { limbs, field }
    }

    pub fn field(&self) -> FieldId {
        self.field
    }

    pub fn limbs(&self) -> &[u64; LIMBS] {
        &self.limbs
    }

    pub fn is_zero(&self) -> bool {
        self.limbs.iter().all(|&l| l == 0)
    }

    pub fn is_one(&self) -> bool {
        self.limbs[0] == 1 && self.limbs[1..].iter().all(|&l| l == 0)
    }

    /// Coefficient of `x^i`.
    pub fn bit(&self, i: usize) -> bool {
        i < LIMBS * 64 && (self.limbs[i / 64] >> (i % 64)) & 1 == 1
    }

    /// Degree of the represented polynomial; `None` for zero.
    pub fn degree(&self) -> Option<usize> {
        degree(&self.limbs)
    }

    fn check_field(&self, other: &Self) -> Result<(), FieldError> {
        if self.field != other.field {
            return Err(FieldError::FieldMismatch(self.field, other.field));
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, FieldError> {
        self.check_field(other)?;
        let mut limbs = self.limbs;
        for (l, r) in limbs.iter_mut().zip(other.limbs.iter()) {
            *l ^= r;
        }
        Ok(FieldElement { limbs, field: self.field })
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self, FieldError> {
        self.check_field(other)?;
        let n = self.field.used_limbs();
        let mut wide = [0u64; 2 * LIMBS];
        for i in 0..n {
            let a = self.limbs[i];
            if a == 0 {
                continue;
            }
            let table = clmul_table(a);
            for j in 0..n {
                let (lo, hi) = clmul_with(&table, other.limbs[j]);
                wide[i + j] ^= lo;
                wide[i + j + 1] ^= hi;
            }
        }
        Ok(FieldElement { limbs: reduce(&mut wide, self.field.poly()), field: self.field })
    }

    /// Squaring by spreading coefficients (x^i -> x^2i), then reducing.
    pub fn square(&self) -> Self {
        let mut wide = [0u64; 2 * LIMBS];
        for i in 0..self.field.used_limbs() {
            let l = self.limbs[i];
            wide[2 * i] = spread32(l as u32);
            wide[2 * i + 1] = spread32((l >> 32) as u32);
        }
        FieldElement { limbs: reduce(&mut wide, self.field.poly()), field: self.field }
    }

    /// Multiplicative inverse by the binary extended Euclidean algorithm.
    pub fn inv(&self) -> Result<Self, FieldError> {
        if self.is_zero() {
            return Err(FieldError::NotInvertible);
        }
        let poly = self.field.poly();
        let mut f = [0u64; LIMBS];
        for &t in poly.terms {
            f[t / 64] |= 1 << (t % 64);
        }

        let mut u = self.limbs;
        let mut v = f;
        let mut g1 = [0u64; LIMBS];
        g1[0] = 1;
        let mut g2 = [0u64; LIMBS];

        while !is_one(&u) && !is_one(&v) {
            while u[0] & 1 == 0 {
                shr1(&mut u);
                if g1[0] & 1 == 1 {
                    xor_into(&mut g1, &f);
                }
                shr1(&mut g1);
            }
            while v[0] & 1 == 0 {
                shr1(&mut v);
                if g2[0] & 1 == 1 {
                    xor_into(&mut g2, &f);
                }
                shr1(&mut g2);
            }
            if degree(&u) > degree(&v) {
                xor_into(&mut u, &v);
                xor_into(&mut g1, &g2);
            } else {
                xor_into(&mut v, &u);
                xor_into(&mut g2, &g1);
            }
        }
        let limbs = if is_one(&u) { g1 } else { g2 };
        Ok(FieldElement { limbs, field: self.field })
    }

    /// Square-and-multiply exponentiation by a small exponent.
    pub fn pow(&self, mut e: u64) -> Self {
        let mut acc = FieldElement::one(self.field);
        let mut base = *self;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base.square();
            e >>= 1;
        }
        acc
    }

    /// Parses big-endian hex. Whitespace is ignored; at most `ceil(m/4)`
    /// digits are accepted and the value must already be reduced.
    pub fn from_hex(field: FieldId, hex: &str) -> Result<Self, FieldError> {
        let digits: Vec<char> = hex.chars().filter(|c| !c.is_whitespace()).collect();
        let max = field.hex_len();
        if digits.len() > max {
            return Err(FieldError::Overlong { m: field.degree(), len: digits.len(), max });
        }
        let mut limbs = [0u64; LIMBS];
        for (pos, c) in digits.iter().rev().enumerate() {
            let nibble = c.to_digit(16).ok_or(FieldError::InvalidHex(*c))? as u64;
            limbs[pos / 16] |= nibble << (4 * (pos % 16));
        }
        Self::from_limbs(field, limbs)
    }

    /// Canonical hex: uppercase, zero-padded to `ceil(m/4)` digits.
    pub fn to_hex(&self) -> String {
        let n = self.field.hex_len();
        (0..n)
            .rev()
            .map(|pos| {
                let nibble = (self.limbs[pos / 16] >> (4 * (pos % 16))) & 0xF;
                char::from_digit(nibble as u32, 16).unwrap().to_ascii_uppercase()
            })
            .collect()
    }

    /// Big-endian octets, exactly `ceil(m/8)` of them.
    pub fn to_be_bytes(&self) -> Vec<u8> {
        let n = self.field.byte_len();
        (0..n).rev().map(|pos| (self.limbs[pos / 8] >> (8 * (pos % 8))) as u8).collect()
    }

    /// Inverse of [`to_be_bytes`](Self::to_be_bytes); length must be exact.
    pub fn from_be_bytes(field: FieldId, bytes: &[u8]) -> Result<Self, FieldError> {
        let expected = field.byte_len();
        if bytes.len() != expected {
            return Err(FieldError::BadLength { expected, got: bytes.len() });
        }
        let mut limbs = [0u64; LIMBS];
        for (pos, &b) in bytes.iter().rev().enumerate() {
            limbs[pos / 8] |= (b as u64) << (8 * (pos % 8));
        }
        Self::from_limbs(field, limbs)
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}(0x{})", self.field, self.to_hex())
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Panics if the operands live in different fields; use
/// [`FieldElement::checked_add`] for a fallible version.
impl Add for FieldElement {
    type Output = FieldElement;

    fn add(self, rhs: FieldElement) -> FieldElement {
        self.checked_add(&rhs).expect("field element addition across fields")
    }
}

/// Panics if the operands live in different fields; use
/// [`FieldElement::checked_mul`] for a fallible version.
impl Mul for FieldElement {
    type Output = FieldElement;

    fn mul(self, rhs: FieldElement) -> FieldElement {
        self.checked_mul(&rhs).expect("field element multiplication across fields")
    }
}

fn low_mask(bits: usize) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

fn degree(limbs: &[u64]) -> Option<usize> {
    limbs
        .iter()
        .enumerate()
        .rev()
        .find(|(_, &l)| l != 0)
        .map(|(i, &l)| i * 64 + 63 - l.leading_zeros() as usize)
}

fn is_one(limbs: &[u64; LIMBS]) -> bool {
    limbs[0] == 1 && limbs[1..].iter().all(|&l| l == 0)
}

fn shr1(limbs: &mut [u64; LIMBS]) {
    for i in 0..LIMBS {
        let carry = if i + 1 < LIMBS { limbs[i + 1] << 63 } else { 0 };
        limbs[i] = (limbs[i] >> 1) | carry;
    }
}

fn xor_into(dst: &mut [u64; LIMBS], src: &[u64; LIMBS]) {
    for (d, s) in dst.iter_mut().zip(src.iter()) {
        *d ^= s;
    }
}

/// Multiples of `a` by every 4-bit polynomial, for [`clmul_with`].
fn clmul_table(a: u64) -> [u128; 16] {
    let mut table = [0u128; 16];
    let a = a as u128;
    for i in 1..16 {
        table[i] = (table[i >> 1] << 1) ^ if i & 1 == 1 { a } else { 0 };
    }
    table
}

/// Carry-less 64x64 -> 128 multiply with a 4-bit window.
fn clmul_with(table: &[u128; 16], b: u64) -> (u64, u64) {
    let mut r: u128 = 0;
    for k in (0..16).rev() {
        r = (r << 4) ^ table[((b >> (4 * k)) & 0xF) as usize];
    }
    (r as u64, (r >> 64) as u64)
}

#[cfg(test)]
fn clmul64(a: u64, b: u64) -> (u64, u64) {
    clmul_with(&clmul_table(a), b)
}

/// Interleaves zero bits: bit i of `x` moves to bit 2i.
fn spread32(x: u32) -> u64 {
    let mut x = x as u64;
    x = (x | (x << 16)) & 0x0000_FFFF_0000_FFFF;
    x = (x | (x << 8)) & 0x00FF_00FF_00FF_00FF;
    x = (x | (x << 4)) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

fn xor_at(wide: &mut Wide, w: u64, pos: usize) {
    let (i, sh) = (pos / 64, pos % 64);
    wide[i] ^= w << sh;
    if sh > 0 && i + 1 < wide.len() {
        wide[i + 1] ^= w >> (64 - sh);
    }
}

/// Reduces a double-width product modulo `f`, folding one word at a time
/// from the top using x^m = f(x) - x^m.
fn reduce(wide: &mut Wide, poly: &ReductionPoly) -> [u64; LIMBS] {
    let m = poly.m;
    let top = m / 64;
    let off = m % 64;
    for i in (top..wide.len()).rev() {
        loop {
            // `w` holds the coefficients at positions base.. that must go.
            let (w, base) = if i == top {
                let w = if off == 0 { wide[i] } else { wide[i] >> off };
                wide[i] &= low_mask(off);
                (w, m)
            } else {
                let w = wide[i];
                wide[i] = 0;
                (w, i * 64)
            };
            if w == 0 {
                break;
            }
            for &t in poly.tail() {
                xor_at(wide, w, base - m + t);
            }
        }
    }
    let mut out = [0u64; LIMBS];
    out.copy_from_slice(&wide[..LIMBS]);
    out
}
