//! Measurement drivers behind the `bench` and `verify-mc` commands:
//! multiplication counts per session and Monte-Carlo acceptance rates.

use std::fmt::Write as _;

use num_bigint::BigUint;
use num_traits::One;

use crate::arith::{ArithContext, FactoredModulus};
use crate::blind::{keygen, OutsourceKey};
use crate::cloud::{derive_seed, InProcessWorker, WorkerBehavior};
use crate::error::{Error, Result};
use crate::modexp_sos::{outsource_hcs, outsource_ms, Verdict};

pub const CSV_HEADER: &str = "bits,B,pi_oracle,pi_local,alpha,pass_rate,trials";

/// Modulus size used by [`verify_mc`].
pub const MC_MODULUS_BITS: u64 = 64;

/// One `(bits, B)` cell. `bound = 0` denotes the HCS session.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub bits: u64,
    pub bound: u64,
    /// Mean multiplications per direct exponentiation.
    pub pi_oracle: f64,
    /// Mean client multiplications per session.
    pub pi_local: f64,
    pub alpha: f64,
    pub pass_rate: f64,
    pub trials: u64,
}

fn random_exponent(bits: u64, ctx: &mut ArithContext) -> BigUint {
    let mut a = ctx.random_below(&(BigUint::one() << bits));
    a.set_bit(bits - 1, true);
    a
}

fn experiment_key(bits: u64, ctx: &mut ArithContext) -> Result<OutsourceKey> {
    let modulus = FactoredModulus::generate(bits, 2, ctx)?;
    keygen(modulus, bits, ctx)
}

/// Averages the direct square-and-multiply cost of `u^a mod N` and the client's
/// session cost over `trials` random instances with `bits`-bit `N` and `a`.
pub fn efficiency_row(bits: u64, bound: u64, trials: u64, seed: u64) -> Result<ExperimentRow> {
    if bits < 8 || trials == 0 || bound == 1 {
        return Err(Error::domain("need bits ≥ 8, trials ≥ 1 and B = 0 (HCS) or B ≥ 2"));
    }
    let mut ctx = ArithContext::new(derive_seed(seed, bits ^ (bound << 32)));
    let key = experiment_key(bits, &mut ctx)?;
    let worker = InProcessWorker::honest();
    let (mut pi_oracle, mut pi_local, mut passed) = (0u64, 0u64, 0u64);
    for _ in 0..trials {
        let u = ctx.random_below(key.n());
        let a = random_exponent(bits, &mut ctx);
        let mut oracle = ArithContext::new(0);
        let truth = oracle.mod_exp(&u, &a, key.n())?;
        pi_oracle += oracle.mult_count();
        let report = if bound == 0 {
            outsource_hcs(&key, &u, &a, &worker, &mut ctx)?
        } else {
            outsource_ms(&key, &u, &a, bound, &worker, &mut ctx)?
        };
        pi_local += report.local_mults;
        if report.verified != Verdict::Rejected && report.result.as_ref() == Some(&truth) {
            passed += 1;
        }
    }
    Ok(ExperimentRow {
        bits,
        bound,
        pi_oracle: pi_oracle as f64 / trials as f64,
        pi_local: pi_local as f64 / trials as f64,
        alpha: pi_oracle as f64 / pi_local as f64,
        pass_rate: passed as f64 / trials as f64,
        trials,
    })
}

pub fn efficiency_report(bit_sizes: &[u64], bounds: &[u64], trials: u64, seed: u64) -> Result<Vec<ExperimentRow>> {
    let mut rows = Vec::new();
    for &bits in bit_sizes {
        for &bound in bounds {
            rows.push(efficiency_row(bits, bound, trials, seed)?);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct McOutcome {
    pub behavior: WorkerBehavior,
    pub bound: u64,
    pub accepted: u64,
    pub trials: u64,
}

impl McOutcome {
    pub fn rate(&self) -> f64 {
        self.accepted as f64 / self.trials as f64
    }

    /// Binomial standard deviation at success probability `p`.
    pub fn sigma(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    pub fn to_row(&self) -> ExperimentRow {
        ExperimentRow {
            bits: MC_MODULUS_BITS,
            bound: self.bound,
            pi_oracle: 0.0,
            pi_local: 0.0,
            alpha: 0.0,
            pass_rate: self.rate(),
            trials: self.trials,
        }
    }
}

/// Acceptance rate of MS sessions against `behavior`, one fresh worker and
/// random `(u, a)` per trial.
pub fn verify_mc(behavior: WorkerBehavior, bound: u64, trials: u64, seed: u64) -> Result<McOutcome> {
    if bound < 2 || trials == 0 {
        return Err(Error::domain("need B ≥ 2 and at least one trial"));
    }
    let mut ctx = ArithContext::new(seed);
    let key = experiment_key(MC_MODULUS_BITS, &mut ctx)?;
    let two = BigUint::from(2u32);
    let mut accepted = 0;
    for i in 0..trials {
        let worker = InProcessWorker::new(behavior, derive_seed(seed, i));
        let u = ctx.random_range(&two, key.n());
        let a = random_exponent(MC_MODULUS_BITS, &mut ctx);
        let report = outsource_ms(&key, &u, &a, bound, &worker, &mut ctx)?;
        if report.verified == Verdict::Accepted {
            accepted += 1;
        }
    }
    Ok(McOutcome {
        behavior,
        bound,
        accepted,
        trials,
    })
}

pub fn to_csv(rows: &[ExperimentRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.2},{:.2},{:.4},{:.4},{}",
            r.bits, r.bound, r.pi_oracle, r.pi_local, r.alpha, r.pass_rate, r.trials
        );
    }
    out
}

pub fn to_table(rows: &[ExperimentRow]) -> String {
    let mut out = format!(
        "{:>6} {:>4} {:>12} {:>10} {:>9} {:>9} {:>7}\n",
        "bits", "B", "pi_oracle", "pi_local", "alpha", "pass", "trials"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:>6} {:>4} {:>12.2} {:>10.2} {:>9.3} {:>9.4} {:>7}",
            r.bits, r.bound, r.pi_oracle, r.pi_local, r.alpha, r.pass_rate, r.trials
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hcs_row_costs_three_per_session() {
        let row = efficiency_row(64, 0, 20, 1).unwrap();
        assert_eq!(row.pi_local, 3.0);
        assert_eq!(row.pass_rate, 1.0);
    }

    #[test]
    fn csv_is_stable() {
        let rows = efficiency_report(&[32, 64], &[0, 4], 5, 7).unwrap();
        let csv = to_csv(&rows);
        assert!(csv.starts_with("bits,B,pi_oracle,pi_local,alpha,pass_rate,trials\n"));
        assert_eq!(csv.lines().count(), 5);
        assert_eq!(csv, to_csv(&efficiency_report(&[32, 64], &[0, 4], 5, 7).unwrap()));
    }

    #[test]
    fn alpha_trends() {
        let small = efficiency_row(128, 4, 20, 3).unwrap();
        let large = efficiency_row(512, 4, 20, 3).unwrap();
        let wide = efficiency_row(512, 64, 20, 3).unwrap();
        assert!(large.alpha > small.alpha);
        assert!(wide.alpha < large.alpha);
    }

    #[test]
    fn honest_mc_always_accepts() {
        let out = verify_mc(WorkerBehavior::Honest, 4, 200, 1).unwrap();
        assert_eq!(out.accepted, 200);
        let forged = verify_mc(WorkerBehavior::RandomForger, 4, 200, 1).unwrap();
        assert_eq!(forged.accepted, 0);
    }
}
