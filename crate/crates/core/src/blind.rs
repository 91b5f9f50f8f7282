//! The blinding ring homomorphism `f(x) = (x + kN) mod L` with `L = pN`, and
//! the exponent / scalar concealment built on top of it.

use std::path::Path;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{is_probable_prime, ArithContext, FactoredModulus};
use crate::encoding::{hex, hex_vec};
use crate::error::{Error, Result};

const KEYGEN_RETRIES: usize = 16;

/// The client's secret `(p, N, φ(N))` and the public ring modulus `L = pN`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutsourceKey {
    modulus: FactoredModulus,
    p: BigUint,
    l: BigUint,
}

impl OutsourceKey {
    /// Builds a key from an explicit cofactor `p`.
    pub fn from_parts(modulus: FactoredModulus, p: BigUint) -> Result<Self> {
        if !is_probable_prime(&p) {
            return Err(Error::KeyGen(format!("cofactor {p} is not prime")));
        }
        if (modulus.value() % &p).is_zero() {
            return Err(Error::KeyGen(format!("cofactor {p} divides N")));
        }
        let l = &p * modulus.value();
        Ok(OutsourceKey { modulus, p, l })
    }

    pub fn modulus(&self) -> &FactoredModulus {
        &self.modulus
    }

    pub fn n(&self) -> &BigUint {
        self.modulus.value()
    }

    pub fn phi(&self) -> &BigUint {
        self.modulus.totient()
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    /// The public part of the key.
    pub fn l(&self) -> &BigUint {
        &self.l
    }

    pub fn to_file(&self) -> KeyFile {
        KeyFile {
            p: self.p.clone(),
            n_factors: self.modulus.prime_factors().to_vec(),
            l: self.l.clone(),
        }
    }

    pub fn from_file(file: KeyFile) -> Result<Self> {
        let key = Self::from_parts(FactoredModulus::new(file.n_factors)?, file.p)?;
        if key.l != file.l {
            return Err(Error::InvalidModulus("l does not equal p * N".into()));
        }
        Ok(key)
    }

    /// Writes the key as JSON, readable by the owner only.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.to_file())?;
        write_private(path.as_ref(), json.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        Self::from_file(serde_json::from_str(&raw)?)
    }
}

/// On-disk key format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyFile {
    #[serde(with = "hex")]
    pub p: BigUint,
    #[serde(with = "hex_vec")]
    pub n_factors: Vec<BigUint>,
    #[serde(with = "hex")]
    pub l: BigUint,
}

#[cfg(unix)]
fn write_private(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    use std::os::unix::fs::{OpenOptionsExt, PermissionsExt};
    let mut f = std::fs::OpenOptions::new()
        .write(true)
        .create(true)
        .truncate(true)
        .mode(0o600)
        .open(path)?;
    f.set_permissions(std::fs::Permissions::from_mode(0o600))?;
    f.write_all(bytes)?;
    Ok(())
}

#[cfg(not(unix))]
fn write_private(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Draws a fresh prime `p` of `p_bits` bits with `p ∤ N`.
pub fn keygen(modulus: FactoredModulus, p_bits: u64, ctx: &mut ArithContext) -> Result<OutsourceKey> {
    if p_bits < modulus.value().bits() {
        return Err(Error::domain(format!(
            "cofactor bit length {p_bits} below modulus bit length {}",
            modulus.value().bits()
        )));
    }
    for _ in 0..KEYGEN_RETRIES {
        let p = ctx.gen_prime(p_bits)?;
        if !(modulus.value() % &p).is_zero() {
            return OutsourceKey::from_parts(modulus, p);
        }
    }
    Err(Error::KeyGen(format!(
        "no {p_bits}-bit prime coprime to N after {KEYGEN_RETRIES} draws"
    )))
}

/// A blinded exponent and the blinding multiple used to build it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlindedExponent {
    pub value: BigUint,
    pub k: BigUint,
}

/// Ephemeral verification secrets of a two-query session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerificationTag {
    pub t1: u64,
    pub t2: u64,
    pub bound: u64,
    /// Whether the affine query was sent first.
    pub swapped: bool,
}

impl VerificationTag {
    pub fn new(t1: u64, t2: u64, bound: u64, swapped: bool) -> Result<Self> {
        if bound == 0 || !(1..=bound).contains(&t1) || !(1..=bound).contains(&t2) {
            return Err(Error::domain(format!(
                "tag ({t1}, {t2}) outside [1, {bound}]"
            )));
        }
        Ok(VerificationTag {
            t1,
            t2,
            bound,
            swapped,
        })
    }

    /// `t1, t2` uniform and independent in `[1, bound]`, fair coin for order.
    pub fn sample(bound: u64, ctx: &mut ArithContext) -> Result<Self> {
        if bound < 1 {
            return Err(Error::domain("security bound must be positive"));
        }
        let t1 = ctx.random_u64_inclusive(1, bound);
        let t2 = ctx.random_u64_inclusive(1, bound);
        let swapped = ctx.coin();
        Self::new(t1, t2, bound, swapped)
    }
}

/// `U = (u + rN) mod L` for a fresh `r` uniform in `[0, N)`.
pub fn conceal_base(key: &OutsourceKey, u: &BigUint, ctx: &mut ArithContext) -> Result<BigUint> {
    let r = ctx.random_below(key.n());
    conceal_base_with(key, u, &r, ctx)
}

pub fn conceal_base_with(
    key: &OutsourceKey,
    u: &BigUint,
    r: &BigUint,
    ctx: &mut ArithContext,
) -> Result<BigUint> {
    if u >= key.n() {
        return Err(Error::domain("base must lie in [0, N)"));
    }
    let rn = ctx.mod_mul(r, key.n(), key.l())?;
    Ok((u + rn) % key.l())
}

/// `A = a + kφ(N)` for a fresh `k` uniform in `[1, N)`.
pub fn blind_exponent(
    key: &OutsourceKey,
    a: &BigUint,
    ctx: &mut ArithContext,
) -> Result<BlindedExponent> {
    let k = sample_multiple(key, ctx);
    blind_exponent_with(key, a, &k, ctx)
}

pub fn blind_exponent_with(
    key: &OutsourceKey,
    a: &BigUint,
    k: &BigUint,
    ctx: &mut ArithContext,
) -> Result<BlindedExponent> {
    if a.is_zero() {
        return Err(Error::domain("exponent must be at least 1"));
    }
    let value = a + ctx.mul(k, key.phi());
    Ok(BlindedExponent { value, k: k.clone() })
}

/// `A = t1·a + t2 + kφ(N)` for a fresh `k` uniform in `[1, N)`.
pub fn blind_exponent_affine(
    key: &OutsourceKey,
    a: &BigUint,
    tag: &VerificationTag,
    ctx: &mut ArithContext,
) -> Result<BlindedExponent> {
    let k = sample_multiple(key, ctx);
    blind_exponent_affine_with(key, a, tag, &k, ctx)
}

pub fn blind_exponent_affine_with(
    key: &OutsourceKey,
    a: &BigUint,
    tag: &VerificationTag,
    k: &BigUint,
    ctx: &mut ArithContext,
) -> Result<BlindedExponent> {
    if a.is_zero() {
        return Err(Error::domain("exponent must be at least 1"));
    }
    // t1 is bounded by the security parameter: a scaling, not a counted product
    let value = a * tag.t1 + tag.t2 + ctx.mul(k, key.phi());
    Ok(BlindedExponent { value, k: k.clone() })
}

fn sample_multiple(key: &OutsourceKey, ctx: &mut ArithContext) -> BigUint {
    if key.n() <= &BigUint::one() {
        return BigUint::one();
    }
    ctx.random_range(&BigUint::one(), key.n())
}

/// `R mod N`.
pub fn recover(key: &OutsourceKey, r: &BigUint) -> BigUint {
    r % key.n()
}

/// `s' = s + r·m` for a fresh `r` uniform in `[1, m)`.
pub fn conceal_scalar(m: &BigUint, s: &BigUint, ctx: &mut ArithContext) -> Result<BigUint> {
    if m < &BigUint::from(2u32) {
        return Err(Error::domain("order must be at least 2"));
    }
    let r = ctx.random_range(&BigUint::one(), m);
    conceal_scalar_with(m, s, &r, ctx)
}

pub fn conceal_scalar_with(
    m: &BigUint,
    s: &BigUint,
    r: &BigUint,
    ctx: &mut ArithContext,
) -> Result<BigUint> {
    if s >= m {
        return Err(Error::domain("scalar must lie in [0, m)"));
    }
    Ok(s + ctx.mul(r, m))
}
