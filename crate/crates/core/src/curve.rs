//! Short Weierstrass curves `y² = x³ + bx + c` over a prime field, in
//! projective coordinates.
//!
//! Counting convention: the addition formula costs exactly 14 counted
//! multiplications and the doubling formula exactly 12. Multiplications by
//! the constants 2, 3, 4 and 8 are carried out as additions and are not
//! counted.
//!
//! The formula functions are generic over the modulus so the worker can run
//! them verbatim over the blinding ring `Z_N`.

use std::path::Path;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{is_probable_prime, ArithContext};
use crate::encoding::hex;
use crate::error::{Error, Result};

const BRUTEFORCE_LIMIT_BITS: u64 = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurveParams {
    pub coef_b: BigUint,
    pub coef_c: BigUint,
    pub p: BigUint,
    /// Order of the designated base point.
    pub m: BigUint,
}

impl CurveParams {
    pub fn new(coef_b: BigUint, coef_c: BigUint, p: BigUint, m: BigUint) -> Result<Self> {
        if !is_probable_prime(&p) {
            return Err(Error::InvalidCurve(format!("field modulus {p} is not prime")));
        }
        if coef_b >= p || coef_c >= p {
            return Err(Error::InvalidCurve("coefficients must be reduced mod p".into()));
        }
        if m.is_zero() {
            return Err(Error::InvalidCurve("order must be positive".into()));
        }
        let params = CurveParams {
            coef_b,
            coef_c,
            p,
            m,
        };
        if params.discriminant().is_zero() {
            return Err(Error::InvalidCurve("singular curve (4b³ + 27c² ≡ 0)".into()));
        }
        Ok(params)
    }

    /// `(4b³ + 27c²) mod p`.
    pub fn discriminant(&self) -> BigUint {
        discriminant(&self.coef_b, &self.coef_c, &self.p)
    }
}

pub(crate) fn discriminant(b: &BigUint, c: &BigUint, modulus: &BigUint) -> BigUint {
    (4u32 * b * b * b + 27u32 * c * c) % modulus
}

/// `(x : y : z)`; the point at infinity has `z = 0`, canonically `(0 : 1 : 0)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProjectivePoint {
    pub x: BigUint,
    pub y: BigUint,
    pub z: BigUint,
}

impl ProjectivePoint {
    pub fn new(x: BigUint, y: BigUint, z: BigUint) -> Self {
        ProjectivePoint { x, y, z }
    }

    pub fn infinity() -> Self {
        ProjectivePoint::new(BigUint::zero(), BigUint::one(), BigUint::zero())
    }

    pub fn from_affine(x: BigUint, y: BigUint) -> Self {
        ProjectivePoint::new(x, y, BigUint::one())
    }

    pub fn is_infinity(&self) -> bool {
        self.z.is_zero() && !self.y.is_zero()
    }

    /// `(0 : 0 : 0)` is not a projective point; corrupted ring computations
    /// collapse to it.
    pub fn is_zero_triple(&self) -> bool {
        self.x.is_zero() && self.y.is_zero() && self.z.is_zero()
    }

    /// Coordinate-wise reduction.
    pub fn reduce(&self, modulus: &BigUint) -> ProjectivePoint {
        ProjectivePoint::new(&self.x % modulus, &self.y % modulus, &self.z % modulus)
    }

    pub fn negate(&self, modulus: &BigUint) -> ProjectivePoint {
        ProjectivePoint::new(
            self.x.clone(),
            sub_mod(&BigUint::zero(), &self.y, modulus),
            self.z.clone(),
        )
    }
}

fn add_mod(a: &BigUint, b: &BigUint, n: &BigUint) -> BigUint {
    (a + b) % n
}

fn sub_mod(a: &BigUint, b: &BigUint, n: &BigUint) -> BigUint {
    let b = b % n;
    ((a % n) + n - b) % n
}

fn dbl_mod(a: &BigUint, n: &BigUint) -> BigUint {
    add_mod(a, a, n)
}

/// Output of the addition formula together with its `B = x2·z1 − x1·z2`, which
/// vanishes exactly when the inputs are equal or opposite.
pub(crate) struct AddOutput {
    pub point: ProjectivePoint,
    pub b: BigUint,
}

/// Addition formula, no case analysis. Exactly 14 counted multiplications.
pub(crate) fn add_formula(
    ctx: &mut ArithContext,
    n: &BigUint,
    p1: &ProjectivePoint,
    p2: &ProjectivePoint,
) -> AddOutput {
    ctx.count_point_op();
    let (x1, y1, z1) = (&p1.x, &p1.y, &p1.z);
    let (x2, y2, z2) = (&p2.x, &p2.y, &p2.z);
    let y2z1 = ctx.mod_mul_unchecked(y2, z1, n);
    let y1z2 = ctx.mod_mul_unchecked(y1, z2, n);
    let a = sub_mod(&y2z1, &y1z2, n);
    let x2z1 = ctx.mod_mul_unchecked(x2, z1, n);
    let x1z2 = ctx.mod_mul_unchecked(x1, z2, n);
    let b = sub_mod(&x2z1, &x1z2, n);
    let z1z2 = ctx.mod_mul_unchecked(z1, z2, n);
    let b2 = ctx.mod_mul_unchecked(&b, &b, n);
    let b3 = ctx.mod_mul_unchecked(&b2, &b, n);
    let a2 = ctx.mod_mul_unchecked(&a, &a, n);
    let a2z = ctx.mod_mul_unchecked(&a2, &z1z2, n);
    let b2x = ctx.mod_mul_unchecked(&b2, &x1z2, n);
    // C = A²z1z2 − B³ − 2B²x1z2
    let c = sub_mod(&sub_mod(&a2z, &b3, n), &dbl_mod(&b2x, n), n);
    let x3 = ctx.mod_mul_unchecked(&b, &c, n);
    let t = ctx.mod_mul_unchecked(&a, &sub_mod(&b2x, &c, n), n);
    let u = ctx.mod_mul_unchecked(&b3, &y1z2, n);
    let y3 = sub_mod(&t, &u, n);
    let z3 = ctx.mod_mul_unchecked(&b3, &z1z2, n);
    AddOutput {
        point: ProjectivePoint::new(x3, y3, z3),
        b,
    }
}

/// Doubling formula, no case analysis. Exactly 12 counted multiplications.
pub(crate) fn double_formula(
    ctx: &mut ArithContext,
    coef_b: &BigUint,
    n: &BigUint,
    p1: &ProjectivePoint,
) -> ProjectivePoint {
    ctx.count_point_op();
    let (x1, y1, z1) = (&p1.x, &p1.y, &p1.z);
    let z1sq = ctx.mod_mul_unchecked(z1, z1, n);
    let bz = ctx.mod_mul_unchecked(coef_b, &z1sq, n);
    let x1sq = ctx.mod_mul_unchecked(x1, x1, n);
    // A = b·z1² + 3·x1²
    let a = add_mod(&bz, &add_mod(&dbl_mod(&x1sq, n), &x1sq, n), n);
    let b = ctx.mod_mul_unchecked(y1, z1, n);
    // C = x1·y1·B, computed as x1·(y1·B) so that y1·B is reused for 8y1²B²
    let yb = ctx.mod_mul_unchecked(y1, &b, n);
    let c = ctx.mod_mul_unchecked(x1, &yb, n);
    let a2 = ctx.mod_mul_unchecked(&a, &a, n);
    let c4 = dbl_mod(&dbl_mod(&c, n), n);
    let c8 = dbl_mod(&c4, n);
    let d = sub_mod(&a2, &c8, n);
    let bd = ctx.mod_mul_unchecked(&b, &d, n);
    let x4 = dbl_mod(&bd, n);
    let t = ctx.mod_mul_unchecked(&a, &sub_mod(&c4, &d, n), n);
    let yb2 = ctx.mod_mul_unchecked(&yb, &yb, n);
    let yb2_8 = dbl_mod(&dbl_mod(&dbl_mod(&yb2, n), n), n);
    let y4 = sub_mod(&t, &yb2_8, n);
    let b2 = ctx.mod_mul_unchecked(&b, &b, n);
    let b3 = ctx.mod_mul_unchecked(&b2, &b, n);
    let z4 = dbl_mod(&dbl_mod(&dbl_mod(&b3, n), n), n);
    ProjectivePoint::new(x4, y4, z4)
}

/// `P + Q` for `P ≠ ±Q`, neither at infinity.
pub fn point_add(
    ctx: &mut ArithContext,
    curve: &CurveParams,
    p1: &ProjectivePoint,
    p2: &ProjectivePoint,
) -> Result<ProjectivePoint> {
    if p1.is_infinity() || p2.is_infinity() {
        return Err(Error::domain("point_add does not take the point at infinity"));
    }
    let out = add_formula(ctx, &curve.p, p1, p2);
    if out.b.is_zero() {
        return Err(Error::DegenerateAddition);
    }
    Ok(out.point)
}

/// `2P`; an order-2 point doubles to infinity.
pub fn point_double(
    ctx: &mut ArithContext,
    curve: &CurveParams,
    p1: &ProjectivePoint,
) -> Result<ProjectivePoint> {
    if p1.is_infinity() {
        return Err(Error::domain("point_double does not take the point at infinity"));
    }
    if (&p1.y % &curve.p).is_zero() {
        return Ok(ProjectivePoint::infinity());
    }
    Ok(double_formula(ctx, &curve.coef_b, &curve.p, p1))
}

/// Group addition with the identity and inverse cases dispatched.
pub fn add_points(
    ctx: &mut ArithContext,
    curve: &CurveParams,
    p1: &ProjectivePoint,
    p2: &ProjectivePoint,
) -> Result<ProjectivePoint> {
    if p1.is_infinity() {
        return Ok(p2.clone());
    }
    if p2.is_infinity() {
        return Ok(p1.clone());
    }
    if proj_eq(curve, p1, p2) {
        return point_double(ctx, curve, p1);
    }
    if proj_eq(curve, p1, &p2.negate(&curve.p)) {
        return Ok(ProjectivePoint::infinity());
    }
    point_add(ctx, curve, p1, p2)
}

fn double_point(
    ctx: &mut ArithContext,
    curve: &CurveParams,
    p1: &ProjectivePoint,
) -> Result<ProjectivePoint> {
    if p1.is_infinity() {
        return Ok(ProjectivePoint::infinity());
    }
    point_double(ctx, curve, p1)
}

/// `[s]P` by left-to-right double-and-add.
pub fn scalar_mul(
    ctx: &mut ArithContext,
    curve: &CurveParams,
    s: &BigUint,
    point: &ProjectivePoint,
) -> Result<ProjectivePoint> {
    if s.is_zero() || point.is_infinity() {
        return Ok(ProjectivePoint::infinity());
    }
    let mut acc = point.clone();
    for i in (0..s.bits() - 1).rev() {
        acc = double_point(ctx, curve, &acc)?;
        if s.bit(i) {
            acc = add_points(ctx, curve, &acc, point)?;
        }
    }
    Ok(acc)
}

/// `[t1]Q + [t2]P` by joint double-and-add: at most `2·bitlen(max(t1, t2)) − 1`
/// point operations.
pub fn linear_combination(
    ctx: &mut ArithContext,
    curve: &CurveParams,
    t1: &BigUint,
    q: &ProjectivePoint,
    t2: &BigUint,
    point: &ProjectivePoint,
) -> Result<ProjectivePoint> {
    let both = if t1.is_zero() || t2.is_zero() {
        ProjectivePoint::infinity()
    } else {
        add_points(ctx, curve, q, point)?
    };
    let bits = t1.bits().max(t2.bits());
    let mut acc = ProjectivePoint::infinity();
    for i in (0..bits).rev() {
        acc = double_point(ctx, curve, &acc)?;
        let addend = match (t1.bit(i), t2.bit(i)) {
            (true, true) => &both,
            (true, false) => q,
            (false, true) => point,
            (false, false) => continue,
        };
        acc = add_points(ctx, curve, &acc, addend)?;
    }
    Ok(acc)
}

/// Projective equality by cross-multiplication, no inversion.
pub fn proj_eq(curve: &CurveParams, p1: &ProjectivePoint, p2: &ProjectivePoint) -> bool {
    let n = &curve.p;
    let a = p1.reduce(n);
    let b = p2.reduce(n);
    if a.is_zero_triple() || b.is_zero_triple() {
        return false;
    }
    match (a.is_infinity(), b.is_infinity()) {
        (true, true) => return true,
        (true, false) | (false, true) => return false,
        _ => {}
    }
    (&a.x * &b.z) % n == (&b.x * &a.z) % n && (&a.y * &b.z) % n == (&b.y * &a.z) % n
}

/// `y²z ≡ x³ + bxz² + cz³ (mod p)`, excluding the all-zero triple.
pub fn is_on_curve(curve: &CurveParams, point: &ProjectivePoint) -> bool {
    let n = &curve.p;
    let pt = point.reduce(n);
    if pt.is_zero_triple() {
        return false;
    }
    let (x, y, z) = (&pt.x, &pt.y, &pt.z);
    let lhs = (y * y * z) % n;
    let z2 = (z * z) % n;
    let rhs = (x * x * x + &curve.coef_b * x * &z2 + &curve.coef_c * &z2 * z) % n;
    lhs == rhs
}

/// Smallest `m ≥ 1` with `[m]P = O`, by repeated addition. Only for fields of
/// at most 20 bits.
pub fn group_order_bruteforce(curve: &CurveParams, point: &ProjectivePoint) -> Result<BigUint> {
    if curve.p.bits() > BRUTEFORCE_LIMIT_BITS {
        return Err(Error::Oracle(format!(
            "brute-force order needs p ≤ 2^{BRUTEFORCE_LIMIT_BITS}"
        )));
    }
    if !is_on_curve(curve, point) {
        return Err(Error::domain("point is not on the curve"));
    }
    let mut ctx = ArithContext::new(0);
    let limit = &curve.p + 2u32 * curve.p.sqrt() + 2u32;
    let mut acc = point.clone();
    let mut order = BigUint::one();
    while !acc.is_infinity() {
        acc = add_points(&mut ctx, curve, &acc, point)?;
        order += 1u32;
        if order > limit {
            return Err(Error::Oracle("order exceeds the Hasse bound".into()));
        }
    }
    Ok(order)
}

/// `y² = x³ + 2x + 3` over `F_97` with base point `(3, 6)` of order 5.
pub fn test_curve_f97() -> (CurveParams, ProjectivePoint) {
    let g = ProjectivePoint::from_affine(3u32.into(), 6u32.into());
    let mut params = CurveParams {
        coef_b: 2u32.into(),
        coef_c: 3u32.into(),
        p: 97u32.into(),
        m: 1u32.into(),
    };
    params.m = group_order_bruteforce(&params, &g).expect("F_97 curve is brute-forceable");
    (params, g)
}

/// A supersingular curve `y² = x³ + c` over `p = 6ℓ − 1` (so `p ≡ 2 mod 3` and
/// `#E = p + 1 = 6ℓ`) with a base point of prime order `ℓ`. Gives test curves
/// of any size with a known torsion order.
pub fn gen_supersingular(bits: u64, ctx: &mut ArithContext) -> Result<(CurveParams, ProjectivePoint)> {
    if bits < 8 {
        return Err(Error::domain("supersingular test curves need at least 8 bits"));
    }
    let (p, ell) = loop {
        let ell = ctx.gen_prime(bits - 2)?;
        let p = 6u32 * &ell - 1u32;
        if is_probable_prime(&p) {
            break (p, ell);
        }
    };
    let c = ctx.random_range(&BigUint::one(), &p);
    let params = CurveParams::new(BigUint::zero(), c, p, ell)?;
    // cube roots are unique since gcd(3, p - 1) = 1
    let cube_root_exp = (2u32 * &params.p - 1u32) / 3u32;
    let cofactor = BigUint::from(6u32);
    loop {
        let y = ctx.random_below(&params.p);
        let rhs = sub_mod(&(&y * &y), &params.coef_c, &params.p);
        let x = rhs.modpow(&cube_root_exp, &params.p);
        let p0 = ProjectivePoint::from_affine(x, y);
        debug_assert!(is_on_curve(&params, &p0));
        let mut scratch = ArithContext::new(0);
        let g = scalar_mul(&mut scratch, &params, &cofactor, &p0)?;
        if !g.is_infinity() {
            return Ok((params, g));
        }
    }
}

/// On-disk curve format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveFile {
    #[serde(with = "hex")]
    pub b: BigUint,
    #[serde(with = "hex")]
    pub c: BigUint,
    #[serde(with = "hex")]
    pub p: BigUint,
    #[serde(with = "hex")]
    pub m: BigUint,
    #[serde(with = "hex")]
    pub gx: BigUint,
    #[serde(with = "hex")]
    pub gy: BigUint,
}

impl CurveFile {
    pub fn new(curve: &CurveParams, generator: &ProjectivePoint) -> Result<Self> {
        if generator.is_infinity() || (&generator.z % &curve.p).is_zero() {
            return Err(Error::domain("generator must be an affine point"));
        }
        let zinv = crate::arith::mod_inv(&generator.z, &curve.p)?;
        Ok(CurveFile {
            b: curve.coef_b.clone(),
            c: curve.coef_c.clone(),
            p: curve.p.clone(),
            m: curve.m.clone(),
            gx: (&generator.x * &zinv) % &curve.p,
            gy: (&generator.y * &zinv) % &curve.p,
        })
    }

    /// Validates the curve and that the generator is on it.
    pub fn into_parts(self) -> Result<(CurveParams, ProjectivePoint)> {
        let curve = CurveParams::new(self.b, self.c, self.p, self.m)?;
        let g = ProjectivePoint::from_affine(self.gx, self.gy);
        if !is_on_curve(&curve, &g) {
            return Err(Error::InvalidCurve("generator is not on the curve".into()));
        }
        let mut scratch = ArithContext::new(0);
        if !scalar_mul(&mut scratch, &curve, &curve.m, &g)?.is_infinity() {
            return Err(Error::InvalidCurve("[m]G is not the point at infinity".into()));
        }
        Ok((curve, g))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
