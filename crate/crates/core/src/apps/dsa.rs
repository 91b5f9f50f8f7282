//! DSA with the signer's and verifier's exponentiations delegated to a worker.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arith::{is_probable_prime, mod_inv, ArithContext, FactoredModulus};
use crate::blind::{conceal_base, keygen, OutsourceKey};
use crate::cloud::{exchange, random_order, CloudWorker, Task};
use crate::encoding::hex;
use crate::error::{Error, Result};
use crate::modexp_sos::{residue, ModExpQuery};

const SIGN_ATTEMPTS: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DsaParams {
    #[serde(with = "hex")]
    pub p: BigUint,
    #[serde(with = "hex")]
    pub q: BigUint,
    #[serde(with = "hex")]
    pub g: BigUint,
}

impl DsaParams {
    pub fn new(p: BigUint, q: BigUint, g: BigUint) -> Result<Self> {
        if !is_probable_prime(&p) || !is_probable_prime(&q) {
            return Err(Error::domain("p and q must be prime"));
        }
        if !((&p - 1u32) % &q).is_zero() {
            return Err(Error::domain("q must divide p - 1"));
        }
        if g <= BigUint::one() || g >= p || !g.modpow(&q, &p).is_one() {
            return Err(Error::domain("g must have order q modulo p"));
        }
        Ok(DsaParams { p, q, g })
    }

    /// Fresh domain parameters with a `q_bits` subgroup inside a `p_bits` field.
    pub fn generate(p_bits: u64, q_bits: u64, ctx: &mut ArithContext) -> Result<Self> {
        if q_bits < 3 || p_bits <= q_bits + 1 {
            return Err(Error::domain("need 3 ≤ q_bits < p_bits - 1"));
        }
        let q = ctx.gen_prime(q_bits)?;
        let lo = BigUint::one() << (p_bits - 1);
        let hi = BigUint::one() << p_bits;
        let p = loop {
            let k = ctx.random_range(&((&lo - 1u32) / &q + 1u32), &((&hi - 1u32) / &q));
            let odd = &k & BigUint::one();
            let k = k + odd;
            let candidate = &q * k + 1u32;
            if candidate.bits() == p_bits && is_probable_prime(&candidate) {
                break candidate;
            }
        };
        let cofactor = (&p - 1u32) / &q;
        let g = loop {
            let h = ctx.random_range(&BigUint::from(2u32), &(&p - 1u32));
            let g = h.modpow(&cofactor, &p);
            if !g.is_one() {
                break g;
            }
        };
        Self::new(p, q, g)
    }

    pub fn phi_p(&self) -> BigUint {
        &self.p - 1u32
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DsaKeyPair {
    pub x: BigUint,
    pub y: BigUint,
}

pub fn generate_keypair(params: &DsaParams, ctx: &mut ArithContext) -> DsaKeyPair {
    let x = ctx.random_range(&BigUint::one(), &params.q);
    let y = params.g.modpow(&x, &params.p);
    DsaKeyPair { x, y }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DsaSignature {
    #[serde(with = "hex")]
    pub r: BigUint,
    #[serde(with = "hex")]
    pub s: BigUint,
}

/// What the signer publishes for outsourced verification: the concealed
/// generator `G`, the worker's answer `R1 = G^X mod L` and the ring modulus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedTriple {
    #[serde(rename = "g", with = "hex")]
    pub g_blinded: BigUint,
    #[serde(with = "hex")]
    pub r1: BigUint,
    #[serde(with = "hex")]
    pub l: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignOutcome {
    pub signature: DsaSignature,
    pub shared: SharedTriple,
    /// `g^x mod p`, recovered from `R1`.
    pub public_key: BigUint,
    pub local_mults: u64,
}

/// SHA-256 of the message, reduced mod `q`.
pub fn hash_message(message: &[u8], q: &BigUint) -> BigUint {
    BigUint::from_bytes_be(&Sha256::digest(message)) % q
}

pub fn dsa_local_sign(
    params: &DsaParams,
    x: &BigUint,
    message: &[u8],
    ctx: &mut ArithContext,
) -> Result<DsaSignature> {
    if x.is_zero() || x >= &params.q {
        return Err(Error::domain("private key must lie in (0, q)"));
    }
    let h = hash_message(message, &params.q);
    for _ in 0..SIGN_ATTEMPTS {
        let k = ctx.random_range(&BigUint::one(), &params.q);
        let r = ctx.mod_exp(&params.g, &k, &params.p)? % &params.q;
        if r.is_zero() {
            continue;
        }
        let k_inv = mod_inv(&k, &params.q)?;
        let xr = ctx.mod_mul(x, &r, &params.q)?;
        let s = ctx.mod_mul(&k_inv, &((h.clone() + xr) % &params.q), &params.q)?;
        if s.is_zero() {
            continue;
        }
        return Ok(DsaSignature { r, s });
    }
    Err(Error::domain("could not find a nonzero signature"))
}

pub fn dsa_local_verify(params: &DsaParams, y: &BigUint, message: &[u8], sig: &DsaSignature) -> bool {
    let q = &params.q;
    if sig.r.is_zero() || &sig.r >= q || sig.s.is_zero() || &sig.s >= q {
        return false;
    }
    let Ok(w) = mod_inv(&sig.s, q) else {
        return false;
    };
    let h = hash_message(message, q);
    let u1 = (h * &w) % q;
    let u2 = (&sig.r * &w) % q;
    let v = (params.g.modpow(&u1, &params.p) * y.modpow(&u2, &params.p)) % &params.p % q;
    v == sig.r
}

/// Cofactor key for a signer: `L = Q·p` with a fresh prime `Q` as wide as `p`.
pub fn signer_key(params: &DsaParams, ctx: &mut ArithContext) -> Result<OutsourceKey> {
    keygen(FactoredModulus::prime(params.p.clone())?, params.p.bits(), ctx)
}

fn sample_tag(bound: u64, ctx: &mut ArithContext) -> BigUint {
    BigUint::from(ctx.random_u64_inclusive(1, bound))
}

fn sample_k(phi_bound: &BigUint, ctx: &mut ArithContext) -> BigUint {
    ctx.random_range(&BigUint::one(), phi_bound)
}

/// Keygen plus [`dsa_outsourced_sign_with_key`].
pub fn dsa_outsourced_sign(
    params: &DsaParams,
    x: &BigUint,
    message: &[u8],
    bound: u64,
    worker: &dyn CloudWorker,
    ctx: &mut ArithContext,
) -> Result<SignOutcome> {
    let key = signer_key(params, ctx)?;
    dsa_outsourced_sign_with_key(params, &key, x, message, bound, worker, ctx)
}

/// Delegates `g^x` and `g^k` through `X = x + k1·φ(p)`, `K = k + k2·φ(p)`
/// and the check exponent `X_K = t1·x + t2·k + t3 + k3·φ(p)`.
pub fn dsa_outsourced_sign_with_key(
    params: &DsaParams,
    key: &OutsourceKey,
    x: &BigUint,
    message: &[u8],
    bound: u64,
    worker: &dyn CloudWorker,
    ctx: &mut ArithContext,
) -> Result<SignOutcome> {
    if x.is_zero() || x >= &params.q {
        return Err(Error::domain("private key must lie in (0, q)"));
    }
    if bound < 1 {
        return Err(Error::domain("security bound must be positive"));
    }
    if key.n() != &params.p {
        return Err(Error::domain("outsourcing key is not built on p"));
    }
    let (p, q, phi) = (&params.p, &params.q, key.phi());
    let h = hash_message(message, q);
    let start = ctx.mult_count();
    for _ in 0..SIGN_ATTEMPTS {
        let k = ctx.random_range(&BigUint::one(), q);
        let (t1, t2, t3) = (
            sample_tag(bound, ctx),
            sample_tag(bound, ctx),
            sample_tag(bound, ctx),
        );
        let (k1, k2, k3) = (sample_k(p, ctx), sample_k(p, ctx), sample_k(p, ctx));
        let big_x = x + ctx.mul(&k1, phi);
        let big_k = &k + ctx.mul(&k2, phi);
        // tags are bounded by the security parameter: scalings, not counted
        let big_xk = x * &t1 + &k * &t2 + &t3 + ctx.mul(&k3, phi);
        let g_blinded = conceal_base(key, &params.g, ctx)?;
        let query = |exponent| {
            Task::ModExp(ModExpQuery {
                base: g_blinded.clone(),
                exponent,
                modulus: key.l().clone(),
            })
        };
        let order = random_order(3, ctx);
        let answers = exchange(worker, vec![query(big_x), query(big_k), query(big_xk)], &order, ctx)?;
        let mut it = answers.into_iter();
        let r1 = residue(it.next().expect("three answers"))?;
        let r2 = residue(it.next().expect("three answers"))?;
        let r3 = residue(it.next().expect("three answers"))?;

        let y = &r1 % p;
        let gk = &r2 % p;
        let lhs1 = ctx.mod_exp(&y, &t1, p)?;
        let lhs2 = ctx.mod_exp(&gk, &t2, p)?;
        let lhs3 = ctx.mod_exp(&params.g, &t3, p)?;
        let lhs = ctx.mod_mul(&lhs1, &lhs2, p)?;
        let lhs = ctx.mod_mul(&lhs, &lhs3, p)?;
        if lhs != &r3 % p {
            return Err(Error::Rejected);
        }

        let r = gk % q;
        if r.is_zero() {
            continue;
        }
        let k_inv = mod_inv(&k, q)?;
        let xr = ctx.mod_mul(x, &r, q)?;
        let s = ctx.mod_mul(&k_inv, &((&h + xr) % q), q)?;
        if s.is_zero() {
            continue;
        }
        return Ok(SignOutcome {
            signature: DsaSignature { r, s },
            shared: SharedTriple {
                g_blinded,
                r1,
                l: key.l().clone(),
            },
            public_key: y,
            local_mults: ctx.mult_count() - start,
        });
    }
    Err(Error::domain("could not find a nonzero signature"))
}

/// Which bases the four verification queries use.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyLayout {
    /// `U1, U3` on `G` and `U2, U4` on `R1`.
    Consistent,
    /// `U1, U2` on `G` and `U3, U4` on `R1`, recovering `y^u2` from the sixth
    /// answer. Kept for regression tests; fails on honest workers.
    Literal,
}

/// Outsourced verification against the signer's shared triple. `Ok(false)`
/// means the signature is invalid; `Err(Rejected)` means the worker cheated.
pub fn dsa_outsourced_verify(
    params: &DsaParams,
    shared: &SharedTriple,
    sig: &DsaSignature,
    message: &[u8],
    bound: u64,
    worker: &dyn CloudWorker,
    ctx: &mut ArithContext,
) -> Result<bool> {
    dsa_outsourced_verify_layout(params, shared, sig, message, bound, worker, ctx, VerifyLayout::Consistent)
}

#[doc(hidden)]
#[allow(clippy::too_many_arguments)]
pub fn dsa_outsourced_verify_layout(
    params: &DsaParams,
    shared: &SharedTriple,
    sig: &DsaSignature,
    message: &[u8],
    bound: u64,
    worker: &dyn CloudWorker,
    ctx: &mut ArithContext,
    layout: VerifyLayout,
) -> Result<bool> {
    if bound < 1 {
        return Err(Error::domain("security bound must be positive"));
    }
    let (p, q) = (&params.p, &params.q);
    if shared.l.is_zero() || !(&shared.l % p).is_zero() || shared.g_blinded >= shared.l || shared.r1 >= shared.l {
        return Err(Error::domain("shared triple does not match the domain parameters"));
    }
    if (&shared.g_blinded % p) != params.g {
        return Err(Error::domain("shared base does not conceal g"));
    }
    if sig.r.is_zero() || &sig.r >= q || sig.s.is_zero() || &sig.s >= q {
        return Ok(false);
    }
    let phi = params.phi_p();
    let w = mod_inv(&sig.s, q)?;
    let h = hash_message(message, q);
    let nonzero = |v: BigUint| if v.is_zero() { q.clone() } else { v };
    let u1 = nonzero(ctx.mod_mul(&h, &w, q)?);
    let u2 = nonzero(ctx.mod_mul(&sig.r, &w, q)?);
    let t: Vec<BigUint> = (0..4).map(|_| sample_tag(bound, ctx)).collect();
    let ks: Vec<BigUint> = (0..4).map(|_| sample_k(p, ctx)).collect();
    let e1 = &u1 + ctx.mul(&ks[0], &phi);
    let e2 = &u2 + ctx.mul(&ks[1], &phi);
    let e3 = &u1 * &t[0] + &t[1] + ctx.mul(&ks[2], &phi);
    let e4 = &u2 * &t[2] + &t[3] + ctx.mul(&ks[3], &phi);
    let query = |base: &BigUint, exponent| {
        Task::ModExp(ModExpQuery {
            base: base.clone(),
            exponent,
            modulus: shared.l.clone(),
        })
    };
    let (g_b, r1) = (&shared.g_blinded, &shared.r1);
    let tasks = match layout {
        VerifyLayout::Consistent => vec![query(g_b, e1), query(r1, e2), query(g_b, e3), query(r1, e4)],
        VerifyLayout::Literal => vec![query(g_b, e1), query(g_b, e2), query(r1, e3), query(r1, e4)],
    };
    let order = random_order(4, ctx);
    let answers = exchange(worker, tasks, &order, ctx)?;
    let rs: Vec<BigUint> = answers
        .into_iter()
        .map(|a| residue(a).map(|r| r % p))
        .collect::<Result<_>>()?;
    let y = r1 % p;
    let (r4, r5, r6, r7) = (&rs[0], &rs[1], &rs[2], &rs[3]);

    let a = ctx.mod_exp(r4, &t[0], p)?;
    let b = ctx.mod_exp(&params.g, &t[1], p)?;
    let check1 = ctx.mod_mul(&a, &b, p)? == *r6;
    let a = ctx.mod_exp(r5, &t[2], p)?;
    let b = ctx.mod_exp(&y, &t[3], p)?;
    let check2 = ctx.mod_mul(&a, &b, p)? == *r7;
    if !(check1 && check2) {
        return Err(Error::Rejected);
    }
    let (g_u1, y_u2) = match layout {
        VerifyLayout::Consistent => (r4, r5),
        VerifyLayout::Literal => (r4, r6),
    };
    let v = ctx.mod_mul(g_u1, y_u2, p)? % q;
    Ok(v == sig.r)
}
