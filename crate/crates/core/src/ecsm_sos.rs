//! Outsourced point addition and scalar multiplication. The curve's field
//! modulus `p` stays secret; the worker computes over `Z_N` with `N = p·q`
//! on coordinates blinded by multiples of `p`.

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::arith::{is_probable_prime, ArithContext};
use crate::blind::{conceal_scalar_with, VerificationTag};
use crate::cloud::{exchange, Answer, CloudWorker, EcAddQuery, EcMulQuery, Task};
use crate::curve::{is_on_curve, linear_combination, proj_eq, CurveParams, ProjectivePoint};
use crate::error::{Error, Result};
use crate::modexp_sos::Verdict;

pub(crate) const EC_RETRIES: usize = 4;
const SCALAR_DRAWS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EcOutsourceKey {
    field_p: BigUint,
    q: BigUint,
    n: BigUint,
}

impl EcOutsourceKey {
    pub fn from_parts(field_p: BigUint, q: BigUint) -> Result<Self> {
        if !is_probable_prime(&q) {
            return Err(Error::KeyGen(format!("auxiliary {q} is not prime")));
        }
        if q == field_p {
            return Err(Error::KeyGen("auxiliary prime equals the field modulus".into()));
        }
        let n = &field_p * &q;
        Ok(EcOutsourceKey { field_p, q, n })
    }

    /// Draws `q` with the bit length of `p` unless told otherwise.
    pub fn generate(curve: &CurveParams, q_bits: Option<u64>, ctx: &mut ArithContext) -> Result<Self> {
        let bits = q_bits.unwrap_or_else(|| curve.p.bits()).max(2);
        for _ in 0..16 {
            let q = ctx.gen_prime(bits)?;
            if q != curve.p {
                return Self::from_parts(curve.p.clone(), q);
            }
        }
        Err(Error::KeyGen("could not draw an auxiliary prime distinct from p".into()))
    }

    pub fn field_p(&self) -> &BigUint {
        &self.field_p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    /// The public ring modulus.
    pub fn n(&self) -> &BigUint {
        &self.n
    }
}

/// `E' = {b', c', N}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformedCurve {
    pub coef_b: BigUint,
    pub coef_c: BigUint,
    pub modulus: BigUint,
}

fn check_curve_key(key: &EcOutsourceKey, curve: &CurveParams) -> Result<()> {
    if key.field_p != curve.p {
        return Err(Error::domain("key and curve disagree on the field modulus"));
    }
    Ok(())
}

fn sample_multiple(key: &EcOutsourceKey, ctx: &mut ArithContext) -> BigUint {
    if key.q <= BigUint::one() {
        return BigUint::one();
    }
    ctx.random_range(&BigUint::one(), &key.q)
}

fn blind_coord(key: &EcOutsourceKey, v: &BigUint, k: &BigUint, ctx: &mut ArithContext) -> BigUint {
    (v % &key.field_p + ctx.mul(k, &key.field_p)) % &key.n
}

/// `x' = (x + k·p) mod N` for each coordinate, fresh `k` in `[1, q)` each.
pub fn conceal_point(key: &EcOutsourceKey, point: &ProjectivePoint, ctx: &mut ArithContext) -> ProjectivePoint {
    let ks = [
        sample_multiple(key, ctx),
        sample_multiple(key, ctx),
        sample_multiple(key, ctx),
    ];
    conceal_point_with(key, point, &ks, ctx)
}

pub fn conceal_point_with(
    key: &EcOutsourceKey,
    point: &ProjectivePoint,
    ks: &[BigUint; 3],
    ctx: &mut ArithContext,
) -> ProjectivePoint {
    ProjectivePoint::new(
        blind_coord(key, &point.x, &ks[0], ctx),
        blind_coord(key, &point.y, &ks[1], ctx),
        blind_coord(key, &point.z, &ks[2], ctx),
    )
}

/// `b' = (b + k4·p) mod N`, `c' = (c + k6·p) mod N`.
pub fn conceal_curve(key: &EcOutsourceKey, curve: &CurveParams, ctx: &mut ArithContext) -> Result<TransformedCurve> {
    let k4 = sample_multiple(key, ctx);
    let k6 = sample_multiple(key, ctx);
    conceal_curve_with(key, curve, &k4, &k6, ctx)
}

pub fn conceal_curve_with(
    key: &EcOutsourceKey,
    curve: &CurveParams,
    k4: &BigUint,
    k6: &BigUint,
    ctx: &mut ArithContext,
) -> Result<TransformedCurve> {
    check_curve_key(key, curve)?;
    Ok(TransformedCurve {
        coef_b: blind_coord(key, &curve.coef_b, k4, ctx),
        coef_c: blind_coord(key, &curve.coef_c, k6, ctx),
        modulus: key.n.clone(),
    })
}

/// Coordinate-wise reduction mod `p`, rejecting anything that is not a curve
/// point.
pub fn recover_point(key: &EcOutsourceKey, curve: &CurveParams, point: &ProjectivePoint) -> Result<ProjectivePoint> {
    let out = point.reduce(&key.field_p);
    if out.is_zero_triple() {
        return Err(Error::Integrity("worker returned the all-zero triple".into()));
    }
    if !is_on_curve(curve, &out) {
        return Err(Error::Integrity("recovered point is not on the curve".into()));
    }
    Ok(out)
}

/// Whether the worker's formal double-and-add on `s'` stays clear of the
/// inputs the projective formulas cannot handle (doubling or adding to the
/// point at infinity, adding `P` to itself). Tracks the multiple of `P` held
/// by the accumulator modulo its order `m`.
pub fn blinded_chain_is_sound(s_blinded: &BigUint, m: &BigUint) -> bool {
    if s_blinded.is_zero() {
        return true;
    }
    let one = BigUint::one();
    let mut j = &one % m;
    for i in (0..s_blinded.bits() - 1).rev() {
        if j.is_zero() {
            return false;
        }
        j = (&j << 1u32) % m;
        if s_blinded.bit(i) {
            if j.is_zero() || j == one {
                return false;
            }
            j = (&j + 1u32) % m;
        }
    }
    true
}

/// `s + r·m` with `r` in `[1, m)`, redrawn while the worker's chain would hit
/// a degenerate step. Falls back to the last draw; the recovery check then
/// catches the corruption.
pub(crate) fn blind_scalar(m: &BigUint, s: &BigUint, ctx: &mut ArithContext) -> Result<BigUint> {
    let one = BigUint::one();
    let mut last = None;
    for _ in 0..SCALAR_DRAWS {
        let r = if m > &one {
            ctx.random_range(&one, m)
        } else {
            one.clone()
        };
        let s_blinded = conceal_scalar_with(m, s, &r, ctx)?;
        if blinded_chain_is_sound(&s_blinded, m) {
            return Ok(s_blinded);
        }
        last = Some(s_blinded);
    }
    Ok(last.expect("at least one draw"))
}

/// `t1·s + t2 + r·m`, screened like [`blind_scalar`].
pub(crate) fn blind_scalar_affine(
    m: &BigUint,
    s: &BigUint,
    tag: &VerificationTag,
    ctx: &mut ArithContext,
) -> BigUint {
    let one = BigUint::one();
    let base = s * tag.t1 + tag.t2;
    let mut last = None;
    for _ in 0..SCALAR_DRAWS {
        let r = if m > &one {
            ctx.random_range(&one, m)
        } else {
            one.clone()
        };
        let s_blinded = &base + ctx.mul(&r, m);
        if blinded_chain_is_sound(&s_blinded, m) {
            return s_blinded;
        }
        last = Some(s_blinded);
    }
    last.expect("at least one draw")
}

pub(crate) fn point_answer(answer: Answer) -> Result<ProjectivePoint> {
    match answer {
        Answer::Point(p) => Ok(p),
        Answer::Residue(_) => Err(Error::Protocol("expected a point, got a residue".into())),
    }
}

/// `P + Q` for `P ≠ ±Q`, computed by the worker.
pub fn outsource_point_add(
    key: &EcOutsourceKey,
    curve: &CurveParams,
    p1: &ProjectivePoint,
    p2: &ProjectivePoint,
    worker: &dyn CloudWorker,
    ctx: &mut ArithContext,
) -> Result<ProjectivePoint> {
    check_curve_key(key, curve)?;
    if p1.is_infinity() || p2.is_infinity() {
        return Err(Error::domain("outsourced addition does not take the point at infinity"));
    }
    let mut last_err = None;
    for _ in 0..=EC_RETRIES {
        let query = EcAddQuery {
            curve: conceal_curve(key, curve, ctx)?,
            p: conceal_point(key, p1, ctx),
            q: conceal_point(key, p2, ctx),
        };
        let answers = exchange(worker, vec![Task::PointAdd(query)], &[0], ctx)?;
        let raw = point_answer(answers.into_iter().next().expect("one answer"))?;
        if raw.reduce(&key.field_p).is_zero_triple() {
            // B ≡ 0 mod p: the inputs were equal or opposite
            return Err(Error::DegenerateAddition);
        }
        match recover_point(key, curve, &raw) {
            Ok(pt) => return Ok(pt),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

fn check_scalar(curve: &CurveParams, s: &BigUint, point: &ProjectivePoint) -> Result<()> {
    if s >= &curve.m {
        return Err(Error::domain("scalar must lie in [0, m)"));
    }
    if point.is_infinity() || !is_on_curve(curve, point) {
        return Err(Error::domain("base point must be a finite curve point"));
    }
    Ok(())
}

/// `[s]P` computed by the worker on `[s + r·m]P'`.
pub fn outsource_scalar_mul_hcs(
    key: &EcOutsourceKey,
    curve: &CurveParams,
    s: &BigUint,
    point: &ProjectivePoint,
    worker: &dyn CloudWorker,
    ctx: &mut ArithContext,
) -> Result<ProjectivePoint> {
    check_curve_key(key, curve)?;
    check_scalar(curve, s, point)?;
    let mut last_err = None;
    for _ in 0..=EC_RETRIES {
        let query = EcMulQuery {
            curve: conceal_curve(key, curve, ctx)?,
            scalar: blind_scalar(&curve.m, s, ctx)?,
            point: conceal_point(key, point, ctx),
        };
        let answers = exchange(worker, vec![Task::ScalarMul(query)], &[0], ctx)?;
        let raw = point_answer(answers.into_iter().next().expect("one answer"))?;
        match recover_point(key, curve, &raw) {
            Ok(pt) => return Ok(pt),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EcSessionReport {
    /// `[s]P`; withheld when verification rejected.
    pub point: Option<ProjectivePoint>,
    pub verified: Verdict,
    pub local_mults: u64,
    pub point_ops: u64,
}

/// `[s]P` with the check `Q2 = [t1]Q1 + [t2]P`.
pub fn outsource_scalar_mul_ms(
    key: &EcOutsourceKey,
    curve: &CurveParams,
    s: &BigUint,
    point: &ProjectivePoint,
    bound: u64,
    worker: &dyn CloudWorker,
    ctx: &mut ArithContext,
) -> Result<EcSessionReport> {
    check_curve_key(key, curve)?;
    check_scalar(curve, s, point)?;
    if bound < 2 {
        return Err(Error::domain("security bound must be at least 2"));
    }
    let (mults0, ops0) = (ctx.mult_count(), ctx.point_ops());
    let tag = VerificationTag::sample(bound, ctx)?;
    let s1 = blind_scalar(&curve.m, s, ctx)?;
    let s2 = blind_scalar_affine(&curve.m, s, &tag, ctx);
    let blinded_curve = conceal_curve(key, curve, ctx)?;
    let blinded_point = conceal_point(key, point, ctx);
    let task = |scalar| {
        Task::ScalarMul(EcMulQuery {
            curve: blinded_curve.clone(),
            scalar,
            point: blinded_point.clone(),
        })
    };
    let order: &[usize] = if tag.swapped { &[1, 0] } else { &[0, 1] };
    let answers = exchange(worker, vec![task(s1), task(s2)], order, ctx)?;
    let mut answers = answers.into_iter();
    let raw1 = point_answer(answers.next().expect("two answers"))?;
    let raw2 = point_answer(answers.next().expect("two answers"))?;
    let accepted = match (
        recover_point(key, curve, &raw1),
        recover_point(key, curve, &raw2),
    ) {
        (Ok(q1), Ok(q2)) => {
            let expected = linear_combination(
                ctx,
                curve,
                &BigUint::from(tag.t1),
                &q1,
                &BigUint::from(tag.t2),
                point,
            )?;
            proj_eq(curve, &q2, &expected).then_some(q1)
        }
        _ => None,
    };
    Ok(EcSessionReport {
        verified: if accepted.is_some() {
            Verdict::Accepted
        } else {
            Verdict::Rejected
        },
        point: accepted,
        local_mults: ctx.mult_count() - mults0,
        point_ops: ctx.point_ops() - ops0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{ring_scalar_mul, InProcessWorker, WorkerBehavior};
    use crate::curve::{
        add_formula, double_formula, gen_supersingular, point_add, scalar_mul, test_curve_f97,
    };
    use proptest::prelude::*;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    fn f97_key() -> EcOutsourceKey {
        EcOutsourceKey::from_parts(big(97), big(101)).unwrap()
    }

    #[test]
    fn zero_blinds_are_identity() {
        let (curve, g) = test_curve_f97();
        let key = f97_key();
        let mut ctx = ArithContext::new(0);
        let zero = BigUint::zero();
        let p = conceal_point_with(&key, &g, &[zero.clone(), zero.clone(), zero.clone()], &mut ctx);
        assert_eq!(p, g);
        let e = conceal_curve_with(&key, &curve, &zero, &zero, &mut ctx).unwrap();
        assert_eq!((e.coef_b, e.coef_c, e.modulus), (big(2), big(3), big(9797)));
    }

    #[test]
    fn conceal_then_recover() {
        let (curve, g) = test_curve_f97();
        let key = f97_key();
        let mut ctx = ArithContext::new(1);
        let mut large = 0;
        for _ in 0..1000 {
            let p = conceal_point(&key, &g, &mut ctx);
            assert_eq!(recover_point(&key, &curve, &p).unwrap(), g);
            if p.x >= big(97) && p.y >= big(97) && p.z >= big(97) {
                large += 1;
            }
            let e = conceal_curve(&key, &curve, &mut ctx).unwrap();
            assert_eq!(&e.coef_b % 97u32, big(2));
            assert_eq!(&e.coef_c % 97u32, big(3));
            let disc = (4u32 * &e.coef_b * &e.coef_b * &e.coef_b + 27u32 * &e.coef_c * &e.coef_c) % 97u32;
            assert_eq!(disc, curve.discriminant());
        }
        assert!(large >= 950, "{large}");
    }

    #[test]
    fn zero_triple_is_integrity_error() {
        let (curve, _) = test_curve_f97();
        let zero = ProjectivePoint::new(big(0), big(0), big(0));
        assert!(matches!(
            recover_point(&f97_key(), &curve, &zero),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn shadow_congruence() {
        // each ring intermediate reduces mod p to the field intermediate
        let (curve, g) = test_curve_f97();
        let key = f97_key();
        let mut ctx = ArithContext::new(3);
        let mut scratch = ArithContext::new(0);
        let g2 = scalar_mul(&mut scratch, &curve, &big(2), &g).unwrap();
        for _ in 0..200 {
            let e = conceal_curve(&key, &curve, &mut ctx).unwrap();
            let a = conceal_point(&key, &g, &mut ctx);
            let b = conceal_point(&key, &g2, &mut ctx);
            let ring_sum = add_formula(&mut scratch, key.n(), &a, &b).point;
            let field_sum = add_formula(&mut scratch, &curve.p, &g, &g2).point;
            assert_eq!(ring_sum.reduce(&curve.p), field_sum);
            let ring_dbl = double_formula(&mut scratch, &e.coef_b, key.n(), &a);
            let field_dbl = double_formula(&mut scratch, &curve.coef_b, &curve.p, &g);
            assert_eq!(ring_dbl.reduce(&curve.p), field_dbl);
        }
    }

    #[test]
    fn outsourced_add_matches_reference() {
        let (curve, g) = test_curve_f97();
        let key = f97_key();
        let mut ctx = ArithContext::new(4);
        let mut scratch = ArithContext::new(0);
        let g2 = scalar_mul(&mut scratch, &curve, &big(2), &g).unwrap();
        let g3 = scalar_mul(&mut scratch, &curve, &big(3), &g).unwrap();
        let w = InProcessWorker::honest();
        for _ in 0..100 {
            let sum = outsource_point_add(&key, &curve, &g, &g2, &w, &mut ctx).unwrap();
            assert!(proj_eq(&curve, &sum, &g3));
            assert!(proj_eq(&curve, &sum, &point_add(&mut scratch, &curve, &g, &g2).unwrap()));
        }
        assert!(matches!(
            outsource_point_add(&key, &curve, &g, &g, &w, &mut ctx),
            Err(Error::DegenerateAddition)
        ));
    }

    #[test]
    fn chain_screen_matches_ring_behaviour() {
        // the screen predicts exactly when the worker's chain corrupts
        let (curve, g) = test_curve_f97();
        let key = f97_key();
        let mut ctx = ArithContext::new(5);
        for s_blinded in 1u64..400 {
            let e = conceal_curve(&key, &curve, &mut ctx).unwrap();
            let p = conceal_point(&key, &g, &mut ctx);
            let out = ring_scalar_mul(&e, &big(s_blinded), &p);
            let ok = recover_point(&key, &curve, &out).is_ok();
            assert_eq!(ok, blinded_chain_is_sound(&big(s_blinded), &curve.m), "s' = {s_blinded}");
        }
    }

    #[test]
    fn hcs_scalar_mul_small_curve() {
        let (curve, g) = test_curve_f97();
        let key = f97_key();
        let mut ctx = ArithContext::new(6);
        let mut scratch = ArithContext::new(0);
        let w = InProcessWorker::honest();
        for s in 0..5u64 {
            let got = outsource_scalar_mul_hcs(&key, &curve, &big(s), &g, &w, &mut ctx).unwrap();
            let want = scalar_mul(&mut scratch, &curve, &big(s), &g).unwrap();
            assert!(proj_eq(&curve, &got, &want), "s = {s}");
        }
        let inf = outsource_scalar_mul_hcs(&key, &curve, &big(0), &g, &w, &mut ctx).unwrap();
        assert!(inf.is_infinity());
        assert!(outsource_scalar_mul_hcs(&key, &curve, &big(5), &g, &w, &mut ctx).is_err());
    }

    #[test]
    fn ms_scalar_mul_honest_and_forged() {
        let (curve, g) = test_curve_f97();
        let key = f97_key();
        let mut ctx = ArithContext::new(7);
        let mut scratch = ArithContext::new(0);
        let honest = InProcessWorker::honest();
        for s in 0..5u64 {
            let rep = outsource_scalar_mul_ms(&key, &curve, &big(s), &g, 4, &honest, &mut ctx).unwrap();
            assert_eq!(rep.verified, Verdict::Accepted, "s = {s}");
            let want = scalar_mul(&mut scratch, &curve, &big(s), &g).unwrap();
            assert!(proj_eq(&curve, rep.point.as_ref().unwrap(), &want));
            assert!(rep.point_ops <= 2 * 2 + 2);
        }
        let forger = InProcessWorker::new(WorkerBehavior::RandomForger, 1);
        let accepted = (0..200)
            .filter(|_| {
                outsource_scalar_mul_ms(&key, &curve, &big(3), &g, 4, &forger, &mut ctx)
                    .unwrap()
                    .verified
                    == Verdict::Accepted
            })
            .count();
        assert!(accepted <= 2, "{accepted}");
    }

    #[test]
    fn replayed_q1_as_q2_rejected() {
        let mut ctx = ArithContext::new(8);
        let (curve, g) = gen_supersingular(40, &mut ctx).unwrap();
        let key = EcOutsourceKey::generate(&curve, None, &mut ctx).unwrap();
        let w = InProcessWorker::new(WorkerBehavior::LazyReplay, 0);
        for _ in 0..20 {
            let s = ctx.random_below(&curve.m);
            let rep = outsource_scalar_mul_ms(&key, &curve, &s, &g, 4, &w, &mut ctx).unwrap();
            assert_eq!(rep.verified, Verdict::Rejected);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn larger_curve_sessions(seed in any::<u64>()) {
            let mut ctx = ArithContext::new(seed);
            let (curve, g) = gen_supersingular(48, &mut ctx).unwrap();
            let key = EcOutsourceKey::generate(&curve, None, &mut ctx).unwrap();
            let s = ctx.random_below(&curve.m);
            let mut scratch = ArithContext::new(0);
            let want = scalar_mul(&mut scratch, &curve, &s, &g).unwrap();
            let w = InProcessWorker::honest();
            let got = outsource_scalar_mul_hcs(&key, &curve, &s, &g, &w, &mut ctx).unwrap();
            prop_assert!(proj_eq(&curve, &got, &want));
            let rep = outsource_scalar_mul_ms(&key, &curve, &s, &g, 16, &w, &mut ctx).unwrap();
            prop_assert_eq!(rep.verified, Verdict::Accepted);
            prop_assert!(proj_eq(&curve, rep.point.as_ref().unwrap(), &want));
            prop_assert!(rep.point_ops <= 2 * 4 + 2);
        }
    }
}
