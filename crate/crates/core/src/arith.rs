//! Arbitrary-precision modular arithmetic with an instrumented multiplication
//! counter.
//!
//! Every ring multiplication the client performs goes through an
//! [`ArithContext`], so the client's cost can be read back as a count of
//! modular multiplications. Multiplications by small public constants (the
//! 2, 3, 4, 8 of the curve formulas, or a verification tag bounded by the
//! security parameter) are linear-time scalings and are not counted.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// Miller-Rabin rounds applied to every prime this crate produces or accepts.
pub const MR_ROUNDS: usize = 64;

const SMALL_PRIMES: [u32; 54] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191,
    193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251,
];

/// Per-session arithmetic state: the multiplication counter and the seeded
/// generator every random choice is drawn from. Single owner; never share one
/// between concurrent sessions.
#[derive(Debug, Clone)]
pub struct ArithContext {
    mult_count: u64,
    point_ops: u64,
    seed: u64,
    rng: ChaCha20Rng,
}

impl ArithContext {
    pub fn new(seed: u64) -> Self {
        ArithContext {
            mult_count: 0,
            point_ops: 0,
            seed,
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    /// A context seeded from OS entropy.
    pub fn from_entropy() -> Self {
        Self::new(rand::thread_rng().next_u64())
    }

    /// Derives an independent child context from this context's stream.
    pub fn fork(&mut self) -> ArithContext {
        ArithContext::new(self.rng.next_u64())
    }

    pub fn mult_count(&self) -> u64 {
        self.mult_count
    }

    /// Elliptic-curve point additions and doublings performed.
    pub fn point_ops(&self) -> u64 {
        self.point_ops
    }

    pub(crate) fn count_point_op(&mut self) {
        self.point_ops += 1;
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// `(a * b) mod m`, counted.
    pub fn mod_mul(&mut self, a: &BigUint, b: &BigUint, m: &BigUint) -> Result<BigUint> {
        check_modulus(m)?;
        Ok(self.mod_mul_unchecked(a, b, m))
    }

    pub(crate) fn mod_mul_unchecked(&mut self, a: &BigUint, b: &BigUint, m: &BigUint) -> BigUint {
        self.mult_count += 1;
        (a * b) % m
    }

    /// Full-width integer product, counted. Used where the product must not be
    /// reduced (blinded exponents, `L = pN`).
    pub fn mul(&mut self, a: &BigUint, b: &BigUint) -> BigUint {
        self.mult_count += 1;
        a * b
    }

    /// `u^a mod m` by left-to-right square-and-multiply. `u^0 = 1 mod m` for
    /// every `u`. Costs `bitlen(a) - 1` squarings plus `popcount(a) - 1`
    /// multiplications.
    pub fn mod_exp(&mut self, u: &BigUint, a: &BigUint, m: &BigUint) -> Result<BigUint> {
        check_modulus(m)?;
        if a.is_zero() {
            return Ok(BigUint::one() % m);
        }
        let base = u % m;
        let mut acc = base.clone();
        for i in (0..a.bits() - 1).rev() {
            acc = self.mod_mul_unchecked(&acc, &acc, m);
            if a.bit(i) {
                acc = self.mod_mul_unchecked(&acc, &base, m);
            }
        }
        Ok(acc)
    }

    /// Uniform in `[0, bound)`.
    pub fn random_below(&mut self, bound: &BigUint) -> BigUint {
        self.rng.gen_biguint_below(bound)
    }

    /// Uniform in `[lo, hi)`.
    pub fn random_range(&mut self, lo: &BigUint, hi: &BigUint) -> BigUint {
        self.rng.gen_biguint_range(lo, hi)
    }

    /// Uniform in `[lo, hi]` for small bounds.
    pub fn random_u64_inclusive(&mut self, lo: u64, hi: u64) -> u64 {
        use rand::Rng;
        self.rng.gen_range(lo..=hi)
    }

    pub fn coin(&mut self) -> bool {
        self.rng.next_u32() & 1 == 1
    }

    /// A probable prime of exactly `bits` bits.
    pub fn gen_prime(&mut self, bits: u64) -> Result<BigUint> {
        if bits < 2 {
            return Err(Error::domain(format!("prime bit length {bits} < 2")));
        }
        if bits == 2 {
            return Ok(BigUint::from(2u32 + (self.rng.next_u32() & 1)));
        }
        loop {
            let mut c = self.rng.gen_biguint(bits);
            c.set_bit(bits - 1, true);
            c.set_bit(0, true);
            if is_probable_prime(&c) {
                return Ok(c);
            }
        }
    }
}

fn check_modulus(m: &BigUint) -> Result<()> {
    if *m < BigUint::from(2u32) {
        return Err(Error::domain(format!("modulus {m} < 2")));
    }
    Ok(())
}

/// Trial division by small primes followed by [`MR_ROUNDS`] Miller-Rabin
/// rounds. Witnesses are drawn from a generator keyed on `n`, so the answer is
/// a pure function of `n`.
pub fn is_probable_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for &sp in SMALL_PRIMES.iter() {
        let sp = BigUint::from(sp);
        if *n == sp {
            return true;
        }
        if (n % &sp).is_zero() {
            return false;
        }
    }
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    let low = n.iter_u64_digits().next().unwrap_or(0);
    let mut rng = ChaCha20Rng::seed_from_u64(0x6d69_6c6c_6572_7261 ^ low);
    'witness: for _ in 0..MR_ROUNDS {
        let a = rng.gen_biguint_range(&two, &n_minus_1);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// `a^{-1} mod m`.
pub fn mod_inv(a: &BigUint, m: &BigUint) -> Result<BigUint> {
    if m.is_zero() {
        return Err(Error::domain("modulus must be positive"));
    }
    use num_bigint::BigInt;
    let a_i = BigInt::from(a % m);
    let m_i = BigInt::from(m.clone());
    let eg = a_i.extended_gcd(&m_i);
    if !eg.gcd.is_one() {
        return Err(Error::NoInverse(a.to_string(), m.to_string()));
    }
    let inv = eg.x.mod_floor(&m_i);
    Ok(inv.to_biguint().expect("mod_floor of positive modulus is non-negative"))
}

/// Euler's totient of a square-free modulus from its distinct prime factors.
pub fn totient(prime_factors: &[BigUint]) -> Result<BigUint> {
    if prime_factors.is_empty() {
        return Err(Error::InvalidModulus("no prime factors".into()));
    }
    for (i, p) in prime_factors.iter().enumerate() {
        if prime_factors[..i].contains(p) {
            return Err(Error::InvalidModulus(format!(
                "repeated factor {p}; modulus must be square-free"
            )));
        }
        if *p < BigUint::from(2u32) {
            return Err(Error::InvalidModulus(format!("factor {p} is not prime")));
        }
    }
    Ok(prime_factors.iter().map(|p| p - 1u32).product())
}

/// A square-free modulus `N = p_1 ⋯ p_m` together with its factorization and
/// `φ(N)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactoredModulus {
    value: BigUint,
    prime_factors: Vec<BigUint>,
    totient: BigUint,
}

impl FactoredModulus {
    /// Validates primality and distinctness of every factor.
    pub fn new(prime_factors: Vec<BigUint>) -> Result<Self> {
        let phi = totient(&prime_factors)?;
        if let Some(p) = prime_factors.iter().find(|p| !is_probable_prime(p)) {
            return Err(Error::InvalidModulus(format!("factor {p} is not prime")));
        }
        let value = prime_factors.iter().product();
        Ok(FactoredModulus {
            value,
            prime_factors,
            totient: phi,
        })
    }

    pub fn prime(p: BigUint) -> Result<Self> {
        Self::new(vec![p])
    }

    /// A random modulus made of `n_factors` distinct primes, `bits` bits in
    /// total (each factor gets an equal share).
    pub fn generate(bits: u64, n_factors: usize, ctx: &mut ArithContext) -> Result<Self> {
        if n_factors == 0 || bits < 2 * n_factors as u64 {
            return Err(Error::domain(format!(
                "cannot build a {bits}-bit modulus from {n_factors} primes"
            )));
        }
        loop {
            let mut factors = Vec::with_capacity(n_factors);
            let mut remaining = bits;
            for i in 0..n_factors {
                let share = remaining / (n_factors - i) as u64;
                remaining -= share;
                factors.push(ctx.gen_prime(share)?);
            }
            let candidate: BigUint = factors.iter().product();
            if candidate.bits() != bits {
                continue;
            }
            if let Ok(m) = Self::new(factors) {
                return Ok(m);
            }
        }
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn prime_factors(&self) -> &[BigUint] {
        &self.prime_factors
    }

    pub fn totient(&self) -> &BigUint {
        &self.totient
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn mod_mul_examples() {
        let mut ctx = ArithContext::new(1);
        assert_eq!(ctx.mod_mul(&big(189), &big(189), &big(431)).unwrap(), big(379));
        assert_eq!(ctx.mod_mul(&big(1234), &big(1), &big(431)).unwrap(), big(1234 % 431));
        assert_eq!(ctx.mod_mul(&big(0), &big(77), &big(431)).unwrap(), big(0));
        assert_eq!(ctx.mult_count(), 3);
        assert!(matches!(
            ctx.mod_mul(&big(2), &big(3), &big(1)),
            Err(Error::Domain(_))
        ));
        assert_eq!(ctx.mult_count(), 3);
    }

    #[test]
    fn mod_exp_examples() {
        let mut ctx = ArithContext::new(1);
        assert_eq!(ctx.mod_exp(&big(189), &big(346), &big(431)).unwrap(), big(190));
        assert_eq!(ctx.mod_exp(&big(0), &big(0), &big(431)).unwrap(), big(1));
        assert_eq!(ctx.mod_exp(&big(5), &big(0), &big(431)).unwrap(), big(1));
        let v1 = ctx
            .mod_exp(&big(63115), &big(143106), &big(171107))
            .unwrap();
        assert_eq!(&v1 % 431u32, big(190));
    }

    #[test]
    fn mod_exp_cost_is_squarings_plus_set_bits() {
        let mut ctx = ArithContext::new(1);
        // 346 = 0b101011010: 8 squarings, 4 extra multiplications
        ctx.mod_exp(&big(189), &big(346), &big(431)).unwrap();
        assert_eq!(ctx.mult_count(), 12);
        let before = ctx.mult_count();
        ctx.mod_exp(&big(189), &big(1), &big(431)).unwrap();
        assert_eq!(ctx.mult_count(), before);
    }

    #[test]
    fn mod_inv_examples() {
        assert_eq!(mod_inv(&big(1), &big(97)).unwrap(), big(1));
        assert_eq!(mod_inv(&big(3), &big(7)).unwrap(), big(5));
        assert!(matches!(mod_inv(&big(2), &big(4)), Err(Error::NoInverse(..))));
    }

    #[test]
    fn totient_examples() {
        assert_eq!(totient(&[big(431)]).unwrap(), big(430));
        assert_eq!(totient(&[big(3), big(5)]).unwrap(), big(8));
        assert_eq!(totient(&[big(431), big(397)]).unwrap(), big(170280));
        assert!(matches!(
            totient(&[big(5), big(5)]),
            Err(Error::InvalidModulus(_))
        ));
        let fm = FactoredModulus::new(vec![big(3), big(5)]).unwrap();
        assert_eq!(fm.value(), &big(15));
        assert_eq!(fm.totient(), &big(8));
        assert!(FactoredModulus::new(vec![big(9)]).is_err());
    }

    #[test]
    fn gen_prime_sizes() {
        let mut ctx = ArithContext::new(7);
        for _ in 0..20 {
            let p = ctx.gen_prime(2).unwrap();
            assert!(p == big(2) || p == big(3));
        }
        for bits in [3u64, 9, 16, 64, 256] {
            let p = ctx.gen_prime(bits).unwrap();
            assert_eq!(p.bits(), bits);
            assert!(is_probable_prime(&p));
        }
        assert!(is_probable_prime(&big(397)));
        assert!(ctx.gen_prime(1).is_err());
    }

    #[test]
    fn gen_prime_is_replayable() {
        let a = ArithContext::new(42).gen_prime(128).unwrap();
        let b = ArithContext::new(42).gen_prime(128).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn primality_agrees_with_trial_division() {
        for n in 0u64..5000 {
            let brute = n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0);
            assert_eq!(is_probable_prime(&big(n)), brute, "n = {n}");
        }
        // Carmichael numbers
        for n in [561u64, 1105, 1729, 2465, 2821, 6601, 8911, 41041, 825265] {
            assert!(!is_probable_prime(&big(n)));
        }
    }

    #[test]
    fn generated_modulus_is_square_free() {
        let mut ctx = ArithContext::new(3);
        let fm = FactoredModulus::generate(64, 2, &mut ctx).unwrap();
        assert_eq!(fm.value().bits(), 64);
        assert_eq!(fm.prime_factors().len(), 2);
        assert_ne!(fm.prime_factors()[0], fm.prime_factors()[1]);
        let product: BigUint = fm.prime_factors().iter().product();
        assert_eq!(&product, fm.value());
    }

    #[test]
    fn mean_exp_cost_tracks_three_halves_bitlen() {
        let mut ctx = ArithContext::new(11);
        let m = ctx.gen_prime(128).unwrap();
        for l in [64u64, 128, 256] {
            let trials = 400;
            let mut total = 0u64;
            for _ in 0..trials {
                let mut a = ctx.rng().gen_biguint(l);
                a.set_bit(l - 1, true);
                let u = ctx.random_below(&m);
                let before = ctx.mult_count();
                ctx.mod_exp(&u, &a, &m).unwrap();
                total += ctx.mult_count() - before;
            }
            let mean = total as f64 / trials as f64;
            let target = 1.5 * l as f64;
            assert!((mean - target).abs() <= 0.1 * target, "l={l} mean={mean}");
        }
    }

    proptest! {
        #[test]
        fn mod_exp_matches_repeated_multiplication(u in 0u64..1_000_000, a in 0u64..=(1 << 16), pi in 0usize..4) {
            let m = big([431u64, 65521, 1_000_003, 2_147_483_647][pi]);
            let mut ctx = ArithContext::new(0);
            let fast = ctx.mod_exp(&big(u), &big(a), &m).unwrap();
            let mut slow = BigUint::one() % &m;
            let base = big(u) % &m;
            for _ in 0..a {
                slow = (&slow * &base) % &m;
            }
            prop_assert_eq!(fast, slow);
        }

        #[test]
        fn mod_exp_cost_bounds(a in 2u64..u64::MAX) {
            let mut ctx = ArithContext::new(0);
            ctx.mod_exp(&big(3), &big(a), &big(1_000_003)).unwrap();
            let l = 64 - a.leading_zeros() as u64;
            prop_assert!(ctx.mult_count() >= l - 1);
            prop_assert!(ctx.mult_count() <= 2 * l);
        }

        #[test]
        fn mod_inv_round_trips(a in 1u64..1_000_000, pi in 0usize..3) {
            let m = big([431u64, 65521, 1_000_003][pi]);
            if let Ok(inv) = mod_inv(&big(a), &m) {
                prop_assert_eq!((inv * big(a)) % &m, BigUint::one());
            }
        }

        #[test]
        fn mult_count_moves_by_one(a in any::<u64>(), b in any::<u64>()) {
            let mut ctx = ArithContext::new(0);
            ctx.mod_mul(&big(a), &big(b), &big(431)).unwrap();
            prop_assert_eq!(ctx.mult_count(), 1);
        }
    }
}
