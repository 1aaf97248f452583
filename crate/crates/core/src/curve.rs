//! Koblitz curves `y^2 + xy = x^3 + a x^2 + 1` over GF(2^m): the group law,
//! scalar multiplication, point serialization, and the curve registry.
//!
//! Points are affine; every addition costs one field inversion. Like the
//! field layer, nothing here is constant-time.

use std::fmt;
use std::sync::LazyLock;

use num_bigint::BigUint;
use num_traits::{Num, Zero};
use thiserror::Error;

use crate::gf2m::{FieldElement, FieldError, FieldId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CurveError {
    #[error("unknown curve {0:?}")]
    UnknownCurve(String),
    #[error("no curve registered for DH group {0}")]
    UnknownGroup(u16),
    #[error("point is not on {0}")]
    NotOnCurve(&'static str),
    #[error("point does not lie in the prime-order subgroup of {0}")]
    WrongOrder(&'static str),
    #[error("point at infinity is not a valid public key")]
    Infinity,
    #[error("scalar out of range [0, n]")]
    ScalarOutOfRange,
    #[error("malformed point encoding: {0}")]
    Encoding(&'static str),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CurveId {
    Toy,
    K163,
    K233,
    K283,
    K409,
    K571,
}

impl CurveId {
    /// The five production curves, in DH group order.
    pub const KOBLITZ: [CurveId; 5] =
        [CurveId::K163, CurveId::K233, CurveId::K283, CurveId::K409, CurveId::K571];

    pub fn params(self) -> &'static CurveParams {
        &REGISTRY[self as usize]
    }

    pub fn name(self) -> &'static str {
        self.params().name
    }

    pub fn from_name(name: &str) -> Result<CurveId, CurveError> {
        REGISTRY
            .iter()
            .find(|p| p.name.eq_ignore_ascii_case(name))
            .map(|p| p.id)
            .ok_or_else(|| CurveError::UnknownCurve(name.to_string()))
    }

    pub fn from_group_id(group: u16) -> Result<CurveId, CurveError> {
        REGISTRY
            .iter()
            .find(|p| p.group_id == Some(group))
            .map(|p| p.id)
            .ok_or(CurveError::UnknownGroup(group))
    }
}

impl fmt::Display for CurveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Lookup key for [`params_for`].
#[derive(Debug, Clone, Copy)]
pub enum CurveKey<'a> {
    Name(&'a str),
    GroupId(u16),
}

impl<'a> From<&'a str> for CurveKey<'a> {
    fn from(name: &'a str) -> Self {
        CurveKey::Name(name)
    }
}

impl From<u16> for CurveKey<'_> {
    fn from(group: u16) -> Self {
        CurveKey::GroupId(group)
    }
}

/// Looks up a registered curve by name (`"K-233"`) or DH group id (`15`).
pub fn params_for<'a>(key: impl Into<CurveKey<'a>>) -> Result<&'static CurveParams, CurveError> {
    let id = match key.into() {
        CurveKey::Name(name) => CurveId::from_name(name)?,
        CurveKey::GroupId(group) => CurveId::from_group_id(group)?,
    };
    Ok(id.params())
}

/// Domain parameters of one curve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurveParams {
    pub id: CurveId,
    pub name: &'static str,
    pub field: FieldId,
    pub a: FieldElement,
    pub b: FieldElement,
    pub cofactor: u32,
    /// Prime order `n` of the base point.
    pub order: BigUint,
    pub base_point: CurvePoint,
    /// DH group identifier this curve is bound to, if any.
    pub group_id: Option<u16>,
}

impl CurveParams {
    pub fn degree(&self) -> usize {
        self.field.degree()
    }

    /// Length of an uncompressed affine point encoding.
    pub fn point_len(&self) -> usize {
        1 + 2 * self.field.byte_len()
    }

    /// Octets per signature component: `ceil(bitlen(n)/8)`.
    pub fn scalar_len(&self) -> usize {
        (self.order.bits() as usize).div_ceil(8)
    }

    pub fn is_on_curve(&self, p: &CurvePoint) -> bool {
        match p {
            CurvePoint::Infinity => true,
            CurvePoint::Affine { x, y } => {
                if x.field() != self.field || y.field() != self.field {
                    return false;
                }
                let x2 = x.square();
                let lhs = y.square() + *x * *y;
                let rhs = x2 * *x + self.a * x2 + self.b;
                lhs == rhs
            }
        }
    }

    pub fn neg(&self, p: &CurvePoint) -> CurvePoint {
        match p {
            CurvePoint::Infinity => CurvePoint::Infinity,
            CurvePoint::Affine { x, y } => CurvePoint::Affine { x: *x, y: *x + *y },
        }
    }

    /// Group addition. Both inputs must be on the curve.
    pub fn point_add(&self, p: &CurvePoint, q: &CurvePoint) -> Result<CurvePoint, CurveError> {
        self.require_on_curve(p)?;
        self.require_on_curve(q)?;
        Ok(self.add_unchecked(p, q))
    }

    pub fn double(&self, p: &CurvePoint) -> Result<CurvePoint, CurveError> {
        self.require_on_curve(p)?;
        Ok(self.double_unchecked(p))
    }

    /// `k * p` for `0 <= k <= n`.
    pub fn scalar_mul(&self, k: &BigUint, p: &CurvePoint) -> Result<CurvePoint, CurveError> {
        if k > &self.order {
            return Err(CurveError::ScalarOutOfRange);
        }
        self.require_on_curve(p)?;
        Ok(self.mul_unchecked(k, p))
    }

    /// `k * G`.
    pub fn mul_base(&self, k: &BigUint) -> Result<CurvePoint, CurveError> {
        self.scalar_mul(k, &self.base_point)
    }

    /// Gate for points received from a peer: on the curve, finite, and in
    /// the order-`n` subgroup (rules out small-order and invalid-curve
    /// points).
    pub fn validate_public(&self, p: &CurvePoint) -> Result<(), CurveError> {
        if p.is_infinity() {
            return Err(CurveError::Infinity);
        }
        self.require_on_curve(p)?;
        if !self.mul_unchecked(&self.order, p).is_infinity() {
            return Err(CurveError::WrongOrder(self.name));
        }
        Ok(())
    }

    /// Parses the uncompressed encoding; the result is checked to be on
    /// the curve but not for subgroup membership.
    pub fn decode_point(&self, bytes: &[u8]) -> Result<CurvePoint, CurveError> {
        match bytes.first() {
            None => Err(CurveError::Encoding("empty")),
            Some(0x00) if bytes.len() == 1 => Ok(CurvePoint::Infinity),
            Some(0x04) if bytes.len() == self.point_len() => {
                let n = self.field.byte_len();
                let x = FieldElement::from_be_bytes(self.field, &bytes[1..1 + n])?;
                let y = FieldElement::from_be_bytes(self.field, &bytes[1 + n..])?;
                let p = CurvePoint::Affine { x, y };
                self.require_on_curve(&p)?;
                Ok(p)
            }
            Some(0x00 | 0x04) => Err(CurveError::Encoding("wrong length")),
            Some(_) => Err(CurveError::Encoding("unknown tag")),
        }
    }

    fn require_on_curve(&self, p: &CurvePoint) -> Result<(), CurveError> {
        if self.is_on_curve(p) {
            Ok(())
        } else {
            Err(CurveError::NotOnCurve(self.name))
        }
    }

    pub(crate) fn add_unchecked(&self, p: &CurvePoint, q: &CurvePoint) -> CurvePoint {
        let (x1, y1, x2, y2) = match (p, q) {
            (CurvePoint::Infinity, _) => return *q,
            (_, CurvePoint::Infinity) => return *p,
            (CurvePoint::Affine { x: x1, y: y1 }, CurvePoint::Affine { x: x2, y: y2 }) => {
                (*x1, *y1, *x2, *y2)
            }
        };
        if x1 == x2 {
            if y1 == y2 {
                return self.double_unchecked(p);
            }
            // q = -p
            return CurvePoint::Infinity;
        }
        let dx = x1 + x2;
        let lambda = (y1 + y2) * dx.inv().expect("x1 != x2");
        let x3 = lambda.square() + lambda + dx + self.a;
        let y3 = lambda * (x1 + x3) + x3 + y1;
        CurvePoint::Affine { x: x3, y: y3 }
    }

    pub(crate) fn double_unchecked(&self, p: &CurvePoint) -> CurvePoint {
        let CurvePoint::Affine { x, y } = p else {
            return CurvePoint::Infinity;
        };
        // points with x = 0 have order 2
        if x.is_zero() {
            return CurvePoint::Infinity;
        }
        let lambda = *x + *y * x.inv().expect("x != 0");
        let x3 = lambda.square() + lambda + self.a;
        let y3 = x.square() + (lambda + FieldElement::one(self.field)) * x3;
        CurvePoint::Affine { x: x3, y: y3 }
    }

    /// Scalar multiplication in López-Dahab coordinates with a width-4 NAF
    /// over a small affine table of odd multiples.
    pub(crate) fn mul_unchecked(&self, k: &BigUint, p: &CurvePoint) -> CurvePoint {
        let CurvePoint::Affine { .. } = p else {
            return CurvePoint::Infinity;
        };
        let digits = wnaf(k, WNAF_WIDTH);
        let table = self.odd_multiples(p);
        let mut acc = LdPoint::infinity(self.field);
        for &d in digits.iter().rev() {
            acc = acc.double(self);
            if d > 0 {
                acc = acc.add_affine(&table[(d as usize - 1) / 2], self);
            } else if d < 0 {
                acc = acc.add_affine(&self.neg(&table[((-d) as usize - 1) / 2]), self);
            }
        }
        acc.to_affine()
    }

    /// Reference left-to-right double-and-add in affine coordinates.
    #[cfg(test)]
    pub(crate) fn mul_affine(&self, k: &BigUint, p: &CurvePoint) -> CurvePoint {
        let mut acc = CurvePoint::Infinity;
        for i in (0..k.bits()).rev() {
            acc = self.double_unchecked(&acc);
            if k.bit(i) {
                acc = self.add_unchecked(&acc, p);
            }
        }
        acc
    }

    /// `[P, 3P, 5P, ...]` up to `(2^(w-1) - 1) P`.
    fn odd_multiples(&self, p: &CurvePoint) -> Vec<CurvePoint> {
        let twice = self.double_unchecked(p);
        let mut table = vec![*p];
        for _ in 1..(1 << (WNAF_WIDTH - 2)) {
            let next = self.add_unchecked(table.last().unwrap(), &twice);
            table.push(next);
        }
        table
    }
}

const WNAF_WIDTH: u32 = 4;

/// Width-`w` non-adjacent form, least significant digit first.
fn wnaf(k: &BigUint, w: u32) -> Vec<i8> {
    let modulus = 1u32 << w;
    let half = modulus / 2;
    let mut k = k.clone();
    let mut digits = Vec::with_capacity(k.bits() as usize + 1);
    while !k.is_zero() {
        if k.bit(0) {
            let low = (&k % modulus).to_u32_digits().first().copied().unwrap_or(0);
            if low >= half {
                k += modulus - low;
                digits.push(low as i8 - modulus as i8);
            } else {
                k -= low;
                digits.push(low as i8);
            }
        } else {
            digits.push(0);
        }
        k >>= 1u32;
    }
    digits
}

/// López-Dahab projective point: affine `(X/Z, Y/Z^2)`, infinity when
/// `Z = 0`.
#[derive(Clone, Copy)]
struct LdPoint {
    x: FieldElement,
    y: FieldElement,
    z: FieldElement,
}

impl LdPoint {
    fn infinity(field: FieldId) -> Self {
        LdPoint { x: FieldElement::one(field), y: FieldElement::zero(field), z: FieldElement::zero(field) }
    }

    fn from_affine(x: FieldElement, y: FieldElement) -> Self {
        LdPoint { x, y, z: FieldElement::one(x.field()) }
    }

    fn is_infinity(&self) -> bool {
        self.z.is_zero()
    }

    // b = 1 for every registered curve.
    fn double(&self, c: &CurveParams) -> LdPoint {
        if self.is_infinity() {
            return *self;
        }
        let x2 = self.x.square();
        let z2 = self.z.square();
        let z4 = z2.square();
        let z3 = x2 * z2;
        let x3 = x2.square() + z4;
        let mut t = self.y.square() + z4;
        if c.a.is_one() {
            t = t + z3;
        }
        let y3 = z4 * z3 + x3 * t;
        LdPoint { x: x3, y: y3, z: z3 }
    }

    fn add_affine(&self, q: &CurvePoint, c: &CurveParams) -> LdPoint {
        let CurvePoint::Affine { x: x2, y: y2 } = *q else {
            return *self;
        };
        if self.is_infinity() {
            return LdPoint::from_affine(x2, y2);
        }
        let z1_sq = self.z.square();
        let b = self.x + self.z * x2;
        let a = self.y + z1_sq * y2;
        if b.is_zero() {
            if a.is_zero() {
                return LdPoint::from_affine(x2, y2).double(c);
            }
            return LdPoint::infinity(x2.field());
        }
        let cz = self.z * b;
        let z3 = cz.square();
        let e = a * cz;
        let mut d_factor = cz;
        if c.a.is_one() {
            d_factor = d_factor + z1_sq;
        }
        let x3 = b.square() * d_factor + a.square() + e;
        let f = x2 * z3 + x3;
        let g = (x2 + y2) * z3.square();
        let y3 = (e + z3) * f + g;
        LdPoint { x: x3, y: y3, z: z3 }
    }

    fn to_affine(self) -> CurvePoint {
        if self.is_infinity() {
            return CurvePoint::Infinity;
        }
        let zi = self.z.inv().expect("z != 0");
        CurvePoint::Affine { x: self.x * zi, y: self.y * zi.square() }
    }
}

/// A curve point: the identity or an affine pair.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurvePoint {
    Infinity,
    Affine { x: FieldElement, y: FieldElement },
}

impl CurvePoint {
    pub fn is_infinity(&self) -> bool {
        matches!(self, CurvePoint::Infinity)
    }

    pub fn x(&self) -> Option<&FieldElement> {
        match self {
            CurvePoint::Infinity => None,
            CurvePoint::Affine { x, .. } => Some(x),
        }
    }

    /// `0x04 || x || y` (big-endian, `ceil(m/8)` octets each), or `0x00`
    /// for the point at infinity.
    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            CurvePoint::Infinity => vec![0x00],
            CurvePoint::Affine { x, y } => {
                let mut out = Vec::with_capacity(1 + 2 * x.field().byte_len());
                out.push(0x04);
                out.extend(x.to_be_bytes());
                out.extend(y.to_be_bytes());
                out
            }
        }
    }
}

impl fmt::Debug for CurvePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurvePoint::Infinity => f.write_str("Infinity"),
            CurvePoint::Affine { x, y } => write!(f, "({}, {})", x.to_hex(), y.to_hex()),
        }
    }
}

struct RawCurve {
    id: CurveId,
    name: &'static str,
    field: FieldId,
    a: u64,
    cofactor: u32,
    order: &'static str,
    gx: &'static str,
    gy: &'static str,
    group_id: Option<u16>,
}

// Base points and orders are the NIST Koblitz curve definitions. Some
// circulated copies of two of the orders are corrupted and must not be
// substituted here:
//   K-283: "01FFFFFF FFFFFFFF FFFFFFFF FFFFFFFF FFFFE9AE 2ED07577 265DFF7F
//           265DFF7F 94451E06 1E163C61" (repeated word, 313 bits)
//   K-409: "007FFFFFFF FFFFFFFF ... FFFFFFFF 83B2D4EA 20400EC4 557D5ED3
//           E3E7CA5B 4B5C83B8 E01E5FCF" ("FE5F" lost, 447 bits)
const RAW: [RawCurve; 6] = [
    RawCurve {
        id: CurveId::Toy,
        name: "TOY",
        field: FieldId::Toy5,
        a: 1,
        cofactor: 2,
        order: "B",
        gx: "08",
        gy: "17",
        group_id: None,
    },
    RawCurve {
        id: CurveId::K163,
        name: "K-163",
        field: FieldId::F163,
        a: 1,
        cofactor: 2,
        order: "00000004 00000000 00000000 00020108 A2E0CC0D 99F8A5EF",
        gx: "02FE13C0537BBC11ACAA07D793DE4E6D5E5C94EEE8",
        gy: "0289070FB05D38FF58321F2E800536D538CCDAA3D9",
        group_id: Some(5),
    },
    RawCurve {
        id: CurveId::K233,
        name: "K-233",
        field: FieldId::F233,
        a: 0,
        cofactor: 4,
        order: "00000080 00000000 00000000 00000000 00069D5B B915BCD4 6EFB1AD5 F173ABDF",
        gx: "017232BA853A7E731AF129F22FF4149563A419C26BF50A4C9D6EEFAD6126",
        gy: "01DB537DECE819B7F70F555A67C427A8CD9BF18AEB9B56E0C11056FAE6A3",
        group_id: Some(15),
    },
    RawCurve {
        id: CurveId::K283,
        name: "K-283",
        field: FieldId::F283,
        a: 0,
        cofactor: 4,
        order: "01FFFFFF FFFFFFFF FFFFFFFF FFFFFFFF FFFFE9AE 2ED07577 265DFF7F 94451E06 1E163C61",
        gx: "0503213F78CA44883F1A3B8162F188E553CD265F23C1567A16876913B0C2AC2458492836",
        gy: "01CCDA380F1C9E318D90F95D07E5426FE87E45C0E8184698E45962364E34116177DD2259",
        group_id: Some(16),
    },
    RawCurve {
        id: CurveId::K409,
        name: "K-409",
        field: FieldId::F409,
        a: 0,
        cofactor: 4,
        order: "007FFFFF FFFFFFFF FFFFFFFF FFFFFFFF FFFFFFFF FFFFFFFF FFFFFE5F 83B2D4EA \
                20400EC4 557D5ED3 E3E7CA5B 4B5C83B8 E01E5FCF",
        gx: "0060F05F658F49C1AD3AB1890F7184210EFD0987E307C84C27ACCFB8F9F67CC2C460189EB5AAAA62EE222EB1B35540CFE9023746",
        gy: "01E369050B7C4E42ACBA1DACBF04299C3460782F918EA427E6325165E9EA10E3DA5F6C42E9C55215AA9CA27A5863EC48D8E0286B",
        group_id: Some(17),
    },
    RawCurve {
        id: CurveId::K571,
        name: "K-571",
        field: FieldId::F571,
        a: 0,
        cofactor: 4,
        order: "02000000 00000000 00000000 00000000 00000000 00000000 00000000 00000000 \
                00000000 131850E1 F19A63E4 B391A8DB 917F4138 B630D84B E5D63938 1E91DEB4 \
                5CFE778F 637C1001",
        gx: "026EB7A859923FBC82189631F8103FE4AC9CA2970012D5D46024804801841CA44370958493B205E647DA304DB4CEB08CBBD1BA39494776FB988B47174DCA88C7E2945283A01C8972",
        gy: "0349DC807F4FBF374F4AEADE3BCA95314DD58CEC9F307A54FFC61EFC006D8A2C9D4979C0AC44AEA74FBEBBB9F772AEDCB620B01A7BA7AF1B320430C8591984F601CD4C143EF1C7A3",
        group_id: Some(18),
    },
];

/// The order literal exactly as registered (word-grouped hex).
pub fn registered_order_hex(id: CurveId) -> &'static str {
    RAW[id as usize].order
}

static REGISTRY: LazyLock<Vec<CurveParams>> = LazyLock::new(|| {
    RAW.iter()
        .map(|raw| {
            let field = raw.field;
            let a = if raw.a == 1 { FieldElement::one(field) } else { FieldElement::zero(field) };
            let hex: String = raw.order.split_whitespace().collect();
            let order = BigUint::from_str_radix(&hex, 16).expect("registry order literal");
            assert!(!order.is_zero());
            let coord = |h: &str| {
                let bytes = hex::decode(h).expect("registry base point");
                FieldElement::from_be_bytes(field, &bytes).expect("registry base point")
            };
            let (gx, gy) = (coord(raw.gx), coord(raw.gy));
            CurveParams {
                id: raw.id,
                name: raw.name,
                field,
                a,
                b: FieldElement::one(field),
                cofactor: raw.cofactor,
                order,
                base_point: CurvePoint::Affine { x: gx, y: gy },
                group_id: raw.group_id,
            }
        })
        .collect()
});

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn registry_lookups() {
        assert_eq!(params_for("K-163").unwrap().cofactor, 2);
        assert_eq!(params_for("k-163").unwrap().a, FieldElement::one(FieldId::F163));
        assert_eq!(params_for("K-233").unwrap().field.poly().to_string(), "x^233 + x^74 + 1");
        assert_eq!(params_for(15u16).unwrap().name, "K-233");
        assert_eq!(params_for(18u16).unwrap().id, CurveId::K571);
        assert_eq!(params_for(14u16).unwrap_err(), CurveError::UnknownGroup(14));
        assert!(matches!(params_for("K-999"), Err(CurveError::UnknownCurve(_))));
        for id in CurveId::KOBLITZ {
            let p = id.params();
            assert_eq!(p.b, FieldElement::one(p.field));
            let expect_a = if id == CurveId::K163 { 1 } else { 0 };
            assert_eq!(p.a.is_one() as u32, expect_a);
            assert_eq!(p.cofactor, if id == CurveId::K163 { 2 } else { 4 });
        }
    }

    #[test]
    fn base_points_on_curve() {
        for id in CurveId::KOBLITZ.into_iter().chain([CurveId::Toy]) {
            let p = id.params();
            assert!(p.is_on_curve(&p.base_point), "{}", p.name);
        }
    }

    #[test]
    fn infinity_and_negation() {
        let p = CurveId::K233.params();
        let g = p.base_point;
        assert!(p.is_on_curve(&CurvePoint::Infinity));
        assert_eq!(p.point_add(&g, &CurvePoint::Infinity).unwrap(), g);
        assert_eq!(p.point_add(&CurvePoint::Infinity, &g).unwrap(), g);
        assert!(p.point_add(&g, &p.neg(&g)).unwrap().is_infinity());
        assert!(p.mul_base(&BigUint::zero()).unwrap().is_infinity());
        assert_eq!(p.mul_base(&BigUint::from(1u32)).unwrap(), g);
    }

    #[test]
    fn off_curve_inputs_are_rejected() {
        let p = CurveId::Toy.params();
        let CurvePoint::Affine { x, y } = p.base_point else { unreachable!() };
        let bad = CurvePoint::Affine { x, y: y + FieldElement::one(p.field) };
        assert!(!p.is_on_curve(&bad));
        assert_eq!(p.point_add(&bad, &p.base_point), Err(CurveError::NotOnCurve("TOY")));
        assert_eq!(p.scalar_mul(&BigUint::from(2u32), &bad), Err(CurveError::NotOnCurve("TOY")));
        // a point from another curve's field is never on this one
        assert!(!p.is_on_curve(&CurveId::K163.params().base_point));
    }

    #[test]
    fn scalar_range() {
        let p = CurveId::Toy.params();
        assert!(p.mul_base(&BigUint::from(11u32)).unwrap().is_infinity());
        assert_eq!(p.mul_base(&BigUint::from(12u32)), Err(CurveError::ScalarOutOfRange));
    }

    #[test]
    fn point_encoding() {
        let p = CurveId::K163.params();
        let g = p.base_point;
        let bytes = g.to_bytes();
        assert_eq!(bytes.len(), 43);
        assert_eq!(bytes[0], 0x04);
        assert_eq!(p.decode_point(&bytes).unwrap(), g);
        assert_eq!(p.decode_point(&[0x00]).unwrap(), CurvePoint::Infinity);
        assert!(p.decode_point(&[]).is_err());
        assert!(p.decode_point(&bytes[..42]).is_err());
        assert!(p.decode_point(&[0x02; 43]).is_err());
        let mut off = bytes.clone();
        off[42] ^= 1;
        assert_eq!(p.decode_point(&off), Err(CurveError::NotOnCurve("K-163")));
    }

    #[test]
    fn validation_rejects_small_order_points() {
        let p = CurveId::K163.params();
        // (0, 1) has order 2 on every curve with b = 1
        let two_torsion =
            CurvePoint::Affine { x: FieldElement::zero(p.field), y: FieldElement::one(p.field) };
        assert!(p.is_on_curve(&two_torsion));
        assert_eq!(p.validate_public(&two_torsion), Err(CurveError::WrongOrder("K-163")));
        assert_eq!(p.validate_public(&CurvePoint::Infinity), Err(CurveError::Infinity));
        assert!(p.validate_public(&p.base_point).is_ok());
    }

    #[test]
    fn scalar_mul_is_additive() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for id in CurveId::KOBLITZ {
            let p = id.params();
            let half = &p.order >> 1u32;
            for _ in 0..3 {
                let a = crate::bigint::random_below(&mut rng, &half);
                let b = crate::bigint::random_below(&mut rng, &half);
                let lhs = p.mul_base(&(&a + &b)).unwrap();
                let ra = p.mul_base(&a).unwrap();
                let rb = p.mul_base(&b).unwrap();
                assert_eq!(lhs, p.point_add(&ra, &rb).unwrap());
                assert!(p.is_on_curve(&lhs));
            }
        }
    }

    #[test]
    fn projective_wnaf_matches_affine_double_and_add() {
        let toy = CurveId::Toy.params();
        // every scalar on every point of the toy curve, including order-2 and order-22 points
        let field = toy.field;
        for xi in 0..32u64 {
            for yi in 0..32u64 {
                let mut lx = [0u64; crate::gf2m::LIMBS];
                let mut ly = [0u64; crate::gf2m::LIMBS];
                lx[0] = xi;
                ly[0] = yi;
                let pt = CurvePoint::Affine {
                    x: FieldElement::from_limbs(field, lx).unwrap(),
                    y: FieldElement::from_limbs(field, ly).unwrap(),
                };
                if !toy.is_on_curve(&pt) {
                    continue;
                }
                for k in 0..64u32 {
                    let k = BigUint::from(k);
                    assert_eq!(toy.mul_unchecked(&k, &pt), toy.mul_affine(&k, &pt));
                }
            }
        }
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for id in CurveId::KOBLITZ {
            let p = id.params();
            for _ in 0..4 {
                let k = crate::bigint::random_below(&mut rng, &p.order);
                assert_eq!(p.mul_unchecked(&k, &p.base_point), p.mul_affine(&k, &p.base_point), "{}", p.name);
            }
        }
    }

    #[test]
    fn wnaf_digits_reconstruct_scalar() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let bound = BigUint::from(1u32) << 300u32;
        for _ in 0..50 {
            let k = crate::bigint::random_below(&mut rng, &bound);
            let digits = wnaf(&k, WNAF_WIDTH);
            let mut acc = num_bigint::BigInt::from(0);
            for &d in digits.iter().rev() {
                acc = acc * 2 + d;
            }
            assert_eq!(acc, num_bigint::BigInt::from(k.clone()));
            assert!(digits.iter().all(|d| d % 2 != 0 || *d == 0));
            assert!(digits.windows(4).all(|w| w.iter().filter(|d| **d != 0).count() <= 1));
        }
    }
}
