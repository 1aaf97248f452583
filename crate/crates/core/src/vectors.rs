//! Hex test vectors for field arithmetic, scalar multiplication, the
//! SKEYID chain and both HASH formula sets, as `key=value` records.

use num_bigint::BigUint;

use crate::bigint::random_nonzero_below;
use crate::codec::{ExchangeMode, SaBody};
use crate::curve::{registered_order_hex, CurveId};
use crate::ecc::KeyPair;
use crate::gf2m::{FieldElement, FieldId};
use crate::handshake::NONCE_LEN;
use crate::kdf::{
    derive_chain, ecdh_block_key, encryption_key, hash_i_baseline, hash_i_improved, hash_r_baseline,
    hash_r_improved, point_octets, skeyid_sig, KeyMaterialInputs,
};
use crate::sim::{sub_rng, Records, INITIATOR_ID, RESPONDER_ID, SA_I_PROPOSAL, SA_R_PROPOSAL};

fn nonzero(field: FieldId, rng: &mut impl rand::RngCore) -> FieldElement {
    loop {
        let v = FieldElement::random(field, rng);
        if !v.is_zero() {
            return v;
        }
    }
}

pub fn generate(seed: u64) -> String {
    let mut rng = sub_rng(seed, "vectors");
    let mut out = Records::default();
    out.line(&[("record", "vectors".to_string()), ("seed", seed.to_string())]);

    for field in FieldId::ALL {
        let a = nonzero(field, &mut rng);
        let b = FieldElement::random(field, &mut rng);
        out.line(&[
            ("record", "field".to_string()),
            ("field", format!("{field:?}")),
            ("poly", field.poly().to_string()),
            ("a", a.to_hex()),
            ("b", b.to_hex()),
            ("sum", (a + b).to_hex()),
            ("product", (a * b).to_hex()),
            ("square", a.square().to_hex()),
            ("inverse", a.inv().expect("non-zero").to_hex()),
        ]);
    }

    for id in CurveId::KOBLITZ {
        let c = id.params();
        let k = random_nonzero_below(&mut rng, &c.order);
        let kg = c.mul_base(&k).expect("in range");
        out.line(&[
            ("record", "curve".to_string()),
            ("name", c.name.to_string()),
            ("group", c.group_id.expect("registered").to_string()),
            ("order", registered_order_hex(id).split_whitespace().collect::<Vec<_>>().join(" ")),
            ("g", hex::encode_upper(c.base_point.to_bytes())),
            ("k", format!("{k:X}")),
            ("kG", hex::encode_upper(kg.to_bytes())),
        ]);
    }

    for id in CurveId::KOBLITZ {
        let c = id.params();
        let ki = KeyPair::generate(c, &mut rng);
        let kr = KeyPair::generate(c, &mut rng);
        let mut bytes = |n: usize| {
            let mut v = vec![0u8; n];
            rand::RngCore::fill_bytes(&mut rng, &mut v);
            v
        };
        let ni_b = bytes(NONCE_LEN);
        let nr_b = bytes(NONCE_LEN);
        let cky_i: [u8; 8] = bytes(8).try_into().unwrap();
        let cky_r: [u8; 8] = bytes(8).try_into().unwrap();
        let shared = c.scalar_mul(ki.secret(), kr.public()).expect("in range");
        let group = c.group_id.expect("registered");
        let inputs = KeyMaterialInputs {
            curve: c,
            ni_b,
            nr_b,
            cky_i,
            cky_r,
            shared_point: shared,
            ke_i: *ki.public(),
            ke_r: *kr.public(),
            sa_i_b: Some(SaBody::new(group, SA_I_PROPOSAL).to_bytes()),
            sa_r_b: Some(SaBody::new(group, SA_R_PROPOSAL).to_bytes()),
            id_ii_b: Some(INITIATOR_ID.to_vec()),
            id_ir_b: Some(RESPONDER_ID.to_vec()),
        };
        let skeyid = skeyid_sig(&inputs).expect("complete inputs");
        let set = derive_chain(&skeyid, &inputs).expect("complete inputs");
        out.line(&[
            ("record", "kdf".to_string()),
            ("curve", c.name.to_string()),
            ("ni", hex::encode(&inputs.ni_b)),
            ("nr", hex::encode(&inputs.nr_b)),
            ("cky_i", hex::encode(cky_i)),
            ("cky_r", hex::encode(cky_r)),
            ("ke_i", hex::encode_upper(ki.public().to_bytes())),
            ("ke_r", hex::encode_upper(kr.public().to_bytes())),
            ("shared_x", hex::encode_upper(point_octets(&shared).expect("finite"))),
            ("skeyid", hex::encode(set.skeyid)),
            ("skeyid_d", hex::encode(set.skeyid_d)),
            ("skeyid_a", hex::encode(set.skeyid_a)),
            ("skeyid_e", hex::encode(set.skeyid_e)),
            ("enc_key", hex::encode(encryption_key(&set.skeyid_e))),
            ("msg4_key", hex::encode(ecdh_block_key(&shared).expect("finite"))),
        ]);
        for mode in ExchangeMode::ALL {
            let (hi, hr) = match mode {
                ExchangeMode::BaselineMain => {
                    (hash_i_baseline(&skeyid, &inputs), hash_r_baseline(&skeyid, &inputs))
                }
                ExchangeMode::ImprovedMain => {
                    (hash_i_improved(&skeyid, &inputs), hash_r_improved(&skeyid, &inputs))
                }
            };
            out.line(&[
                ("record", "hash".to_string()),
                ("curve", c.name.to_string()),
                ("mode", mode.to_string()),
                ("hash_i", hex::encode(hi.expect("complete inputs"))),
                ("hash_r", hex::encode(hr.expect("complete inputs"))),
            ]);
        }
    }
    out.0
}

/// Parses the `k` field of a curve record.
pub fn parse_scalar(hex: &str) -> Option<BigUint> {
    BigUint::parse_bytes(hex.as_bytes(), 16)
}
