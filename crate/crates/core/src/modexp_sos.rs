//! Client sessions for outsourced modular exponentiation under the
//! honest-but-curious (HCS), malicious single-server (MS) and malicious
//! multi-server (MM) threat models.

use num_bigint::BigUint;
use num_traits::Zero;

use crate::arith::ArithContext;
use crate::blind::{
    blind_exponent, blind_exponent_affine_with, blind_exponent_with, conceal_base,
    conceal_base_with, recover, OutsourceKey, VerificationTag,
};
use crate::cloud::{exchange, Answer, CloudWorker, Task};
use crate::error::{Error, Result};

/// `C(U, A, L)`: what the worker is asked to compute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModExpQuery {
    pub base: BigUint,
    pub exponent: BigUint,
    pub modulus: BigUint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accepted,
    Rejected,
    NotApplicable,
}

impl Verdict {
    pub fn is_rejected(self) -> bool {
        self == Verdict::Rejected
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionReport {
    /// `u^a mod N`; withheld when verification rejected.
    pub result: Option<BigUint>,
    pub verified: Verdict,
    pub local_mults: u64,
    pub queries_sent: u32,
    /// Queries in protocol order (plain query first) with the raw answers.
    pub transcript: Vec<(ModExpQuery, BigUint)>,
}

/// The per-session randomness of an MS session, exposed so that fixed vectors
/// can be replayed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MsSecrets {
    pub r: BigUint,
    pub k1: BigUint,
    pub k2: BigUint,
    pub tag: VerificationTag,
}

impl MsSecrets {
    pub fn sample(key: &OutsourceKey, bound: u64, ctx: &mut ArithContext) -> Result<Self> {
        let tag = VerificationTag::sample(bound, ctx)?;
        let r = ctx.random_below(key.n());
        let k1 = sample_k(key, ctx);
        let k2 = sample_k(key, ctx);
        Ok(MsSecrets { r, k1, k2, tag })
    }
}

fn sample_k(key: &OutsourceKey, ctx: &mut ArithContext) -> BigUint {
    let one = BigUint::from(1u32);
    if key.n() <= &one {
        return one;
    }
    ctx.random_range(&one, key.n())
}

fn check_inputs(key: &OutsourceKey, u: &BigUint, a: &BigUint) -> Result<()> {
    if u >= key.n() {
        return Err(Error::domain("base must lie in [0, N)"));
    }
    if a.is_zero() {
        return Err(Error::domain("exponent must be at least 1"));
    }
    Ok(())
}

pub(crate) fn residue(answer: Answer) -> Result<BigUint> {
    match answer {
        Answer::Residue(r) => Ok(r),
        Answer::Point(_) => Err(Error::Protocol("expected a residue, got a point".into())),
    }
}

/// The public modulus as the client forms it for a session: `L = p·N`.
fn session_modulus(key: &OutsourceKey, ctx: &mut ArithContext) -> BigUint {
    ctx.mul(key.p(), key.n())
}

pub fn outsource_hcs(
    key: &OutsourceKey,
    u: &BigUint,
    a: &BigUint,
    worker: &dyn CloudWorker,
    ctx: &mut ArithContext,
) -> Result<SessionReport> {
    check_inputs(key, u, a)?;
    let start = ctx.mult_count();
    let l = session_modulus(key, ctx);
    let base = conceal_base(key, u, ctx)?;
    let exponent = blind_exponent(key, a, ctx)?.value;
    let query = ModExpQuery {
        base,
        exponent,
        modulus: l,
    };
    let answers = exchange(worker, vec![Task::ModExp(query.clone())], &[0], ctx)?;
    let r = residue(answers.into_iter().next().expect("one answer"))?;
    let result = recover(key, &r);
    Ok(SessionReport {
        result: Some(result),
        verified: Verdict::NotApplicable,
        local_mults: ctx.mult_count() - start,
        queries_sent: 1,
        transcript: vec![(query, r)],
    })
}

pub fn outsource_ms(
    key: &OutsourceKey,
    u: &BigUint,
    a: &BigUint,
    bound: u64,
    worker: &dyn CloudWorker,
    ctx: &mut ArithContext,
) -> Result<SessionReport> {
    if bound < 2 {
        return Err(Error::domain("security bound must be at least 2"));
    }
    check_inputs(key, u, a)?;
    let secrets = MsSecrets::sample(key, bound, ctx)?;
    outsource_ms_with(key, u, a, &secrets, worker, ctx)
}

/// MS session with caller-supplied randomness.
pub fn outsource_ms_with(
    key: &OutsourceKey,
    u: &BigUint,
    a: &BigUint,
    secrets: &MsSecrets,
    worker: &dyn CloudWorker,
    ctx: &mut ArithContext,
) -> Result<SessionReport> {
    check_inputs(key, u, a)?;
    let start = ctx.mult_count();
    let l = session_modulus(key, ctx);
    let base = conceal_base_with(key, u, &secrets.r, ctx)?;
    let a1 = blind_exponent_with(key, a, &secrets.k1, ctx)?.value;
    let a2 = blind_exponent_affine_with(key, a, &secrets.tag, &secrets.k2, ctx)?.value;
    let q1 = ModExpQuery {
        base: base.clone(),
        exponent: a1,
        modulus: l.clone(),
    };
    let q2 = ModExpQuery {
        base,
        exponent: a2,
        modulus: l,
    };
    let order: &[usize] = if secrets.tag.swapped { &[1, 0] } else { &[0, 1] };
    let answers = exchange(
        worker,
        vec![Task::ModExp(q1.clone()), Task::ModExp(q2.clone())],
        order,
        ctx,
    )?;
    let mut answers = answers.into_iter();
    let r1 = residue(answers.next().expect("two answers"))?;
    let r2 = residue(answers.next().expect("two answers"))?;
    let ok = verify_ms(key, u, &secrets.tag, &r1, &r2, ctx)?;
    Ok(SessionReport {
        result: ok.then(|| recover(key, &r1)),
        verified: if ok { Verdict::Accepted } else { Verdict::Rejected },
        local_mults: ctx.mult_count() - start,
        queries_sent: 2,
        transcript: vec![(q1, r1), (q2, r2)],
    })
}

/// `(R1 mod N)^t1 · u^t2 ≡ R2 (mod N)`.
pub fn verify_ms(
    key: &OutsourceKey,
    u: &BigUint,
    tag: &VerificationTag,
    r1: &BigUint,
    r2: &BigUint,
    ctx: &mut ArithContext,
) -> Result<bool> {
    let n = key.n();
    let lhs1 = ctx.mod_exp(&(r1 % n), &BigUint::from(tag.t1), n)?;
    let lhs2 = ctx.mod_exp(&(u % n), &BigUint::from(tag.t2), n)?;
    let lhs = ctx.mod_mul(&lhs1, &lhs2, n)?;
    Ok(lhs == r2 % n)
}

/// The same blinded query goes to two non-colluding workers.
pub fn outsource_mm(
    key: &OutsourceKey,
    u: &BigUint,
    a: &BigUint,
    worker1: &dyn CloudWorker,
    worker2: &dyn CloudWorker,
    ctx: &mut ArithContext,
) -> Result<SessionReport> {
    check_inputs(key, u, a)?;
    let start = ctx.mult_count();
    let l = session_modulus(key, ctx);
    let base = conceal_base(key, u, ctx)?;
    let exponent = blind_exponent(key, a, ctx)?.value;
    let query = ModExpQuery {
        base,
        exponent,
        modulus: l,
    };
    let mut replies = Vec::with_capacity(2);
    for worker in [worker1, worker2] {
        let answers = exchange(worker, vec![Task::ModExp(query.clone())], &[0], ctx)?;
        replies.push(residue(answers.into_iter().next().expect("one answer"))?);
    }
    let ok = recover(key, &replies[0]) == recover(key, &replies[1]);
    Ok(SessionReport {
        result: ok.then(|| recover(key, &replies[0])),
        verified: if ok { Verdict::Accepted } else { Verdict::Rejected },
        local_mults: ctx.mult_count() - start,
        queries_sent: 2,
        transcript: replies.into_iter().map(|r| (query.clone(), r)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::FactoredModulus;
    use crate::cloud::{InProcessWorker, WorkerBehavior};
    use proptest::prelude::*;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    fn example_key() -> OutsourceKey {
        OutsourceKey::from_parts(FactoredModulus::prime(big(431)).unwrap(), big(397)).unwrap()
    }

    fn example_secrets(swapped: bool) -> MsSecrets {
        MsSecrets {
            r: big(146),
            k1: big(332),
            k2: big(68),
            tag: VerificationTag::new(4, 12, 16, swapped).unwrap(),
        }
    }

    #[test]
    fn hcs_example_value() {
        let mut ctx = ArithContext::new(1);
        let rep = outsource_hcs(&example_key(), &big(189), &big(346), &InProcessWorker::honest(), &mut ctx)
            .unwrap();
        assert_eq!(rep.result, Some(big(190)));
        assert_eq!(rep.verified, Verdict::NotApplicable);
        assert_eq!(rep.queries_sent, 1);
        assert_eq!(rep.local_mults, 3);
    }

    #[test]
    fn hcs_small_cases() {
        let mut ctx = ArithContext::new(2);
        let w = InProcessWorker::honest();
        let key = example_key();
        for a in [1u64, 2, 430, 431, 100_000] {
            let rep = outsource_hcs(&key, &big(1), &big(a), &w, &mut ctx).unwrap();
            assert_eq!(rep.result, Some(big(1)));
        }
        let key15 = OutsourceKey::from_parts(
            FactoredModulus::new(vec![big(3), big(5)]).unwrap(),
            big(17),
        )
        .unwrap();
        let rep = outsource_hcs(&key15, &big(10), &big(3), &w, &mut ctx).unwrap();
        assert_eq!(rep.result, Some(big(10)));
    }

    #[test]
    fn ms_example_vector() {
        for swapped in [false, true] {
            let mut ctx = ArithContext::new(0);
            let rep = outsource_ms_with(
                &example_key(),
                &big(189),
                &big(346),
                &example_secrets(swapped),
                &InProcessWorker::honest(),
                &mut ctx,
            )
            .unwrap();
            assert_eq!(rep.verified, Verdict::Accepted);
            assert_eq!(rep.result, Some(big(190)));
            let (q1, r1) = &rep.transcript[0];
            let (q2, r2) = &rep.transcript[1];
            assert_eq!(q1.base, big(63115));
            assert_eq!(q1.exponent, big(143106));
            assert_eq!(q2.exponent, big(30636));
            assert_eq!(q1.modulus, big(171107));
            assert_eq!(r1, &big(63115).modpow(&big(143106), &big(171107)));
            assert_eq!(r2, &big(63115).modpow(&big(30636), &big(171107)));
        }
    }

    #[test]
    fn verify_rejects_perturbation_and_swap() {
        let key = example_key();
        let mut ctx = ArithContext::new(0);
        let tag = VerificationTag::new(4, 12, 16, false).unwrap();
        let r1 = big(63115).modpow(&big(143106), &big(171107));
        let r2 = big(63115).modpow(&big(30636), &big(171107));
        assert!(verify_ms(&key, &big(189), &tag, &r1, &r2, &mut ctx).unwrap());
        assert!(!verify_ms(&key, &big(189), &tag, &(&r1 + 1u32), &r2, &mut ctx).unwrap());
        assert!(!verify_ms(&key, &big(189), &tag, &r2, &r1, &mut ctx).unwrap());
    }

    #[test]
    fn verify_trivial_identity() {
        let key = example_key();
        let mut ctx = ArithContext::new(0);
        let tag = VerificationTag::new(1, 1, 2, false).unwrap();
        // R2 = R1·u
        let r1 = big(77);
        let r2 = big(77 * 5 % 431);
        assert!(verify_ms(&key, &big(5), &tag, &r1, &r2, &mut ctx).unwrap());
    }

    #[test]
    fn ms_rejects_forgers() {
        let key = example_key();
        let mut ctx = ArithContext::new(9);
        let w = InProcessWorker::new(WorkerBehavior::LazyReplay, 0);
        let mut rejected = 0;
        for _ in 0..50 {
            let rep = outsource_ms(&key, &big(189), &big(346), 4, &w, &mut ctx).unwrap();
            if rep.verified.is_rejected() {
                assert!(rep.result.is_none());
                rejected += 1;
            }
        }
        assert!(rejected >= 40, "{rejected}");
    }

    #[test]
    fn mm_modes() {
        let key = example_key();
        let mut ctx = ArithContext::new(4);
        let honest = InProcessWorker::honest();
        let rep = outsource_mm(&key, &big(189), &big(346), &honest, &honest, &mut ctx).unwrap();
        assert_eq!(rep.verified, Verdict::Accepted);
        assert_eq!(rep.result, Some(big(190)));
        assert_eq!(rep.local_mults, 3);

        let forger = InProcessWorker::new(WorkerBehavior::RandomForger, 1);
        let rep = outsource_mm(&key, &big(189), &big(346), &honest, &forger, &mut ctx).unwrap();
        assert_eq!(rep.verified, Verdict::Rejected);

        // colluding identical forgers slip through: the model assumes non-collusion
        let a = InProcessWorker::new(WorkerBehavior::RandomForger, 7);
        let b = InProcessWorker::new(WorkerBehavior::RandomForger, 7);
        let rep = outsource_mm(&key, &big(189), &big(346), &a, &b, &mut ctx).unwrap();
        assert_eq!(rep.verified, Verdict::Accepted);
        assert_ne!(rep.result, Some(big(190)));
    }

    #[test]
    fn bad_inputs_refused() {
        let key = example_key();
        let mut ctx = ArithContext::new(0);
        let w = InProcessWorker::honest();
        assert!(outsource_hcs(&key, &big(431), &big(3), &w, &mut ctx).is_err());
        assert!(outsource_hcs(&key, &big(3), &big(0), &w, &mut ctx).is_err());
        assert!(outsource_ms(&key, &big(3), &big(3), 1, &w, &mut ctx).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn ms_honest_sound(seed in any::<u64>(), bound in 2u64..40) {
            let mut ctx = ArithContext::new(seed);
            let modulus = FactoredModulus::generate(48, 2, &mut ctx).unwrap();
            let key = crate::blind::keygen(modulus, 50, &mut ctx).unwrap();
            let u = ctx.random_below(key.n());
            let a = ctx.random_range(&big(1), &(big(1) << 64));
            let rep = outsource_ms(&key, &u, &a, bound, &InProcessWorker::honest(), &mut ctx).unwrap();
            prop_assert_eq!(rep.verified, Verdict::Accepted);
            prop_assert_eq!(rep.result, Some(u.modpow(&a, key.n())));
            let log = 64 - (bound - 1).leading_zeros() as u64;
            prop_assert!(rep.local_mults <= 5 + 3 * log + 2);
        }
    }
}
