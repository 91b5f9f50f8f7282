//! Encryption step of pairing-based identity encryption with both `[r]P` and
//! `H(g)^r` delegated. The pairing value `g = e(P_A, P_T)` is an opaque input.

use base64::engine::general_purpose::STANDARD as BASE64;
use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arith::{ArithContext, FactoredModulus};
use crate::blind::{
    blind_exponent_affine_with, blind_exponent_with, conceal_base, OutsourceKey, VerificationTag,
};
use crate::cloud::{exchange, random_order, CloudWorker, EcMulQuery, Task};
use crate::curve::{is_on_curve, linear_combination, proj_eq, CurveParams, ProjectivePoint};
use crate::ecsm_sos::{
    blind_scalar, blind_scalar_affine, conceal_curve, conceal_point, point_answer, recover_point,
    EcOutsourceKey,
};
use crate::encoding::hex;
use crate::error::{Error, Result};
use crate::modexp_sos::{residue, ModExpQuery};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointHex {
    #[serde(with = "hex")]
    pub x: BigUint,
    #[serde(with = "hex")]
    pub y: BigUint,
    #[serde(with = "hex")]
    pub z: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IbeCiphertext {
    #[serde(with = "point_hex")]
    pub c1: ProjectivePoint,
    #[serde(with = "bytes_base64")]
    pub c2: Vec<u8>,
}

mod point_hex {
    use super::PointHex;
    use crate::curve::ProjectivePoint;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(p: &ProjectivePoint, s: S) -> Result<S::Ok, S::Error> {
        PointHex {
            x: p.x.clone(),
            y: p.y.clone(),
            z: p.z.clone(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ProjectivePoint, D::Error> {
        let p = PointHex::deserialize(d)?;
        Ok(ProjectivePoint::new(p.x, p.y, p.z))
    }
}

mod bytes_base64 {
    use super::BASE64;
    use base64::Engine;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&BASE64.encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let raw = String::deserialize(d)?;
        BASE64.decode(raw).map_err(D::Error::custom)
    }
}

/// SHA-256 of the big-endian bytes of `g`, reduced mod `p`.
pub fn hash_to_int(g_pair: &BigUint, p: &BigUint) -> BigUint {
    BigUint::from_bytes_be(&Sha256::digest(g_pair.to_bytes_be())) % p
}

/// `SHA-256(v ‖ counter)` blocks, counter a big-endian `u32` from 0,
/// truncated to `len` bytes.
pub fn keystream(v: &BigUint, len: usize) -> Vec<u8> {
    let seed = v.to_bytes_be();
    let mut out = Vec::with_capacity(len + 32);
    let mut counter: u32 = 0;
    while out.len() < len {
        let mut hasher = Sha256::new();
        hasher.update(&seed);
        hasher.update(counter.to_be_bytes());
        out.extend_from_slice(&hasher.finalize());
        counter += 1;
    }
    out.truncate(len);
    out
}

pub fn xor_keystream(message: &[u8], v: &BigUint) -> Vec<u8> {
    message
        .iter()
        .zip(keystream(v, message.len()))
        .map(|(m, k)| m ^ k)
        .collect()
}

pub fn ibe_outsourced_encrypt(
    curve: &CurveParams,
    point: &ProjectivePoint,
    g_pair: &BigUint,
    message: &[u8],
    bound: u64,
    worker: &dyn CloudWorker,
    ctx: &mut ArithContext,
) -> Result<IbeCiphertext> {
    if curve.m <= BigUint::one() {
        return Err(Error::domain("base point order must exceed 1"));
    }
    let r = ctx.random_range(&BigUint::one(), &curve.m);
    let tag = VerificationTag::sample(bound, ctx)?;
    ibe_outsourced_encrypt_with(curve, point, g_pair, message, &r, &tag, worker, ctx)
}

/// Encryption with a caller-chosen session scalar and tag.
#[allow(clippy::too_many_arguments)]
pub fn ibe_outsourced_encrypt_with(
    curve: &CurveParams,
    point: &ProjectivePoint,
    g_pair: &BigUint,
    message: &[u8],
    r: &BigUint,
    tag: &VerificationTag,
    worker: &dyn CloudWorker,
    ctx: &mut ArithContext,
) -> Result<IbeCiphertext> {
    if message.is_empty() {
        return Err(Error::domain("message must be nonempty"));
    }
    if r.is_zero() || r >= &curve.m {
        return Err(Error::domain("session scalar must lie in [1, m)"));
    }
    if point.is_infinity() || !is_on_curve(curve, point) {
        return Err(Error::domain("base point must be a finite curve point"));
    }
    let p = &curve.p;
    let ec_key = EcOutsourceKey::generate(curve, None, ctx)?;
    let mx_key = OutsourceKey::from_parts(FactoredModulus::prime(p.clone())?, ec_key.q().clone())?;
    let h = hash_to_int(g_pair, p);

    let s1 = blind_scalar(&curve.m, r, ctx)?;
    let s2 = blind_scalar_affine(&curve.m, r, tag, ctx);
    let sample_k = |ctx: &mut ArithContext| ctx.random_range(&BigUint::one(), p);
    let (k1, k2) = (sample_k(ctx), sample_k(ctx));
    let e1 = blind_exponent_with(&mx_key, r, &k1, ctx)?.value;
    let e2 = blind_exponent_affine_with(&mx_key, r, tag, &k2, ctx)?.value;
    let h_blinded = conceal_base(&mx_key, &h, ctx)?;
    let blinded_curve = conceal_curve(&ec_key, curve, ctx)?;
    let blinded_point = conceal_point(&ec_key, point, ctx);

    let ec = |scalar| {
        Task::ScalarMul(EcMulQuery {
            curve: blinded_curve.clone(),
            scalar,
            point: blinded_point.clone(),
        })
    };
    let mx = |exponent| {
        Task::ModExp(ModExpQuery {
            base: h_blinded.clone(),
            exponent,
            modulus: mx_key.l().clone(),
        })
    };
    let order = random_order(4, ctx);
    let answers = exchange(worker, vec![ec(s1), ec(s2), mx(e1), mx(e2)], &order, ctx)?;
    let mut it = answers.into_iter();
    let q1 = point_answer(it.next().expect("four answers"))?;
    let q2 = point_answer(it.next().expect("four answers"))?;
    let r1 = residue(it.next().expect("four answers"))? % p;
    let r2 = residue(it.next().expect("four answers"))? % p;

    let (q1, q2) = match (
        recover_point(&ec_key, curve, &q1),
        recover_point(&ec_key, curve, &q2),
    ) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return Err(Error::Rejected),
    };
    let t1 = BigUint::from(tag.t1);
    let t2 = BigUint::from(tag.t2);
    let expected = linear_combination(ctx, curve, &t1, &q1, &t2, point)?;
    let lhs1 = ctx.mod_exp(&r1, &t1, p)?;
    let lhs2 = ctx.mod_exp(&h, &t2, p)?;
    let mx_ok = ctx.mod_mul(&lhs1, &lhs2, p)? == r2;
    if !(mx_ok && proj_eq(curve, &q2, &expected)) {
        return Err(Error::Rejected);
    }
    Ok(IbeCiphertext {
        c1: q1,
        c2: xor_keystream(message, &r1),
    })
}
