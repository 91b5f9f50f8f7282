//! The two naive verification designs that the affine check replaces, and
//! the attacks that break them.
//!
//! * `DualPlain` sends `A1 = a + k1·φ(N)` and `A2 = a + k2·φ(N)` and checks
//!   `R1 ≡ R2 (mod N)`. The difference `A1 − A2` is a multiple of `φ(N)`,
//!   which shortlists `N` for small keys.
//! * `AdditiveOffset` sends `A2 = a + t + k2·φ(N)` and checks
//!   `R1·u^t ≡ R2 (mod N)`. Shifting both exponents by the same amount
//!   passes the check with a wrong result.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

use crate::arith::{is_probable_prime, ArithContext};
use crate::blind::{conceal_base, OutsourceKey};
use crate::cloud::{serve_honest, Answer, CloudWorker, Request, Response, Task};
use crate::error::{Error, Result};

/// Largest toy modulus the φ-shortlisting is meant for.
pub const MAX_TOY_BITS: u64 = 40;
/// Trial division stops here; a larger leftover cofactor is kept whole.
const TRIAL_LIMIT: u128 = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NaiveScheme {
    DualPlain,
    AdditiveOffset { t: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NaiveTranscript {
    pub base: BigUint,
    pub a1: BigUint,
    pub a2: BigUint,
    pub l: BigUint,
}

fn sample_k(key: &OutsourceKey, ctx: &mut ArithContext) -> BigUint {
    let one = BigUint::from(1u32);
    if key.n() <= &one {
        return one;
    }
    ctx.random_range(&one, key.n())
}

/// The queries a client running a naive scheme would send.
pub fn naive_blind(
    key: &OutsourceKey,
    u: &BigUint,
    a: &BigUint,
    scheme: NaiveScheme,
    ctx: &mut ArithContext,
) -> Result<NaiveTranscript> {
    let base = conceal_base(key, u, ctx)?;
    let k1 = sample_k(key, ctx);
    let k2 = sample_k(key, ctx);
    let a1 = a + &k1 * key.phi();
    let offset = match scheme {
        NaiveScheme::DualPlain => BigUint::zero(),
        NaiveScheme::AdditiveOffset { t } => BigUint::from(t),
    };
    let a2 = a + offset + &k2 * key.phi();
    Ok(NaiveTranscript {
        base,
        a1,
        a2,
        l: key.l().clone(),
    })
}

/// The naive scheme's acceptance test on worker answers.
pub fn naive_check(key: &OutsourceKey, scheme: NaiveScheme, u: &BigUint, r1: &BigUint, r2: &BigUint) -> bool {
    let n = key.n();
    match scheme {
        NaiveScheme::DualPlain => r1 % n == r2 % n,
        NaiveScheme::AdditiveOffset { t } => (r1 * u.modpow(&BigUint::from(t), n)) % n == r2 % n,
    }
}

fn to_u128(v: &BigUint) -> Result<u128> {
    v.to_u128()
        .ok_or_else(|| Error::domain("exponent difference too large for the toy attack"))
}

fn factor(mut d: u128) -> BTreeMap<u128, u32> {
    let mut out = BTreeMap::new();
    let mut f: u128 = 2;
    while f <= TRIAL_LIMIT && f * f <= d {
        while d % f == 0 {
            d /= f;
            *out.entry(f).or_insert(0) += 1;
        }
        f += if f == 2 { 1 } else { 2 };
    }
    if d > 1 {
        *out.entry(d).or_insert(0) += 1;
    }
    out
}

fn divisors(factors: &BTreeMap<u128, u32>, cap: u128) -> Vec<u128> {
    let mut divs = vec![1u128];
    for (&p, &e) in factors {
        let mut next = Vec::with_capacity(divs.len() * (e as usize + 1));
        for &d in &divs {
            let mut v = d;
            next.push(v);
            for _ in 0..e {
                match v.checked_mul(p) {
                    Some(w) if w <= cap => {
                        v = w;
                        next.push(v);
                    }
                    _ => break,
                }
            }
        }
        divs = next;
    }
    divs.sort_unstable();
    divs
}

fn bits(v: u128) -> u64 {
    128 - u64::from(v.leading_zeros())
}

/// Candidate moduli of exactly `n_bits` bits, built from one or two distinct
/// primes `p_i` with `Π(p_i − 1)` dividing `diff`.
pub fn shortlist_from_multiple(diff: &BigUint, n_bits: u64) -> Result<Vec<BigUint>> {
    if diff.is_zero() {
        return Err(Error::domain("the exponent difference is zero"));
    }
    if n_bits < 2 || n_bits > MAX_TOY_BITS {
        return Err(Error::domain(format!("toy size must lie in [2, {MAX_TOY_BITS}] bits")));
    }
    let d = to_u128(diff)?;
    let cap = 1u128 << n_bits;
    let primes: Vec<u128> = divisors(&factor(d), cap)
        .into_iter()
        .map(|v| v + 1)
        .filter(|&p| p < cap && is_probable_prime(&BigUint::from(p)))
        .collect();
    let mut out = Vec::new();
    for (i, &p) in primes.iter().enumerate() {
        if bits(p) == n_bits {
            out.push(p);
        }
        for &q in &primes[i + 1..] {
            let n = p * q;
            if n >= cap {
                break;
            }
            if bits(n) == n_bits && d % ((p - 1) * (q - 1)) == 0 {
                out.push(n);
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out.into_iter().map(BigUint::from).collect())
}

/// Counter-example 1: from two dual-plain exponents, shortlist `N`.
pub fn ce1_recover_modulus(a1: &BigUint, a2: &BigUint, n_bits: u64) -> Result<Vec<BigUint>> {
    if a1 == a2 {
        return Err(Error::domain("A1 = A2 carries no information"));
    }
    let diff = if a1 > a2 { a1 - a2 } else { a2 - a1 };
    shortlist_from_multiple(&diff, n_bits)
}

/// The same extraction against an affine pair, with the attacker's guess of
/// the tags: `t1·A1 + t2 − A2` is a multiple of `φ(N)` only when both guesses
/// are right.
pub fn ce1_against_affine(
    a1: &BigUint,
    a2: &BigUint,
    n_bits: u64,
    t1_guess: u64,
    t2_guess: u64,
) -> Result<Vec<BigUint>> {
    let lhs = a1 * t1_guess + t2_guess;
    let diff = if lhs > *a2 { lhs - a2 } else { a2 - lhs };
    if diff.is_zero() {
        return Ok(Vec::new());
    }
    shortlist_from_multiple(&diff, n_bits)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ce2Forgery {
    pub a1: BigUint,
    pub a2: BigUint,
    pub r1: BigUint,
    pub r2: BigUint,
}

/// Counter-example 2: shift both exponents by `delta`, keeping `A2 − A1`.
pub fn ce2_forge(u_blinded: &BigUint, a1: &BigUint, a2: &BigUint, l: &BigUint, delta: &BigUint) -> Ce2Forgery {
    let a1f = a1 + delta;
    let a2f = a2 + delta;
    Ce2Forgery {
        r1: u_blinded.modpow(&a1f, l),
        r2: u_blinded.modpow(&a2f, l),
        a1: a1f,
        a2: a2f,
    }
}

/// A worker that answers every exponentiation with the exponent raised by
/// `delta`: the counter-example 2 forgery, aimed at whatever check the
/// client runs.
pub struct UniformShiftWorker {
    pub delta: u64,
}

impl CloudWorker for UniformShiftWorker {
    fn submit(&self, batch: &[Request]) -> Result<Vec<Response>> {
        Ok(batch
            .iter()
            .map(|req| {
                let outcome = match &req.task {
                    Task::ModExp(q) if q.modulus > BigUint::from(1u32) && q.base < q.modulus => {
                        Ok(Answer::Residue(q.base.modpow(&(&q.exponent + self.delta), &q.modulus)))
                    }
                    other => serve_honest(other),
                };
                Response {
                    id: req.id.clone(),
                    outcome,
                }
            })
            .collect())
    }
}
