use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use expsos_core::apps::dsa::{
    dsa_outsourced_sign, dsa_outsourced_verify, DsaParams, DsaSignature, SharedTriple,
};
use expsos_core::apps::ibe::ibe_outsourced_encrypt;
use expsos_core::attacks::{
    ce1_against_affine, ce1_recover_modulus, ce2_forge, naive_blind, naive_check, NaiveScheme,
    UniformShiftWorker,
};
use expsos_core::blind::keygen;
use expsos_core::cloud::{remote_worker, CloudWorker, Server};
use expsos_core::curve::{gen_supersingular, CurveFile};
use expsos_core::ecsm_sos::{outsource_scalar_mul_hcs, outsource_scalar_mul_ms, EcOutsourceKey};
use expsos_core::encoding::{from_hex, hex, to_hex};
use expsos_core::experiment::{efficiency_report, to_csv, to_table, verify_mc};
use expsos_core::modexp_sos::{outsource_hcs, outsource_mm, outsource_ms};
use expsos_core::{
    ArithContext, BigUint, Error, FactoredModulus, InProcessWorker, OutsourceKey, SessionReport,
    Verdict, WorkerBehavior,
};

const EXIT_REJECTED: u8 = 2;
const EXIT_TRANSPORT: u8 = 3;
const EXIT_USAGE: u8 = 4;
const EXIT_INVALID_SIGNATURE: u8 = 1;

#[derive(Parser)]
#[command(name = "expsos", version, about = "Verifiable outsourcing of modular exponentiation and scalar multiplication")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct SeedArg {
    /// RNG seed; every command is deterministic under a fixed seed.
    #[arg(long, env = "EXPSOS_SEED")]
    seed: Option<u64>,
}

impl SeedArg {
    fn context(&self) -> ArithContext {
        match self.seed {
            Some(s) => ArithContext::new(s),
            None => ArithContext::from_entropy(),
        }
    }
}

#[derive(clap::Args, Clone)]
struct WorkerArgs {
    /// `inproc` or a `host:port` running `expsos serve`.
    #[arg(long, default_value = "inproc")]
    worker: String,
    /// Behavior of an in-process worker.
    #[arg(long, default_value = "honest")]
    behavior: String,
    /// Exponent shift used by `exponent-shift`.
    #[arg(long, default_value_t = 1)]
    delta: u64,
    /// Tag guessing range of `exponent-shift` and `order-guesser`; defaults to the security bound.
    #[arg(long)]
    guess_bound: Option<u64>,
}

impl WorkerArgs {
    fn build(&self, bound: u64, seed: u64) -> Result<Box<dyn CloudWorker>, Error> {
        if self.worker == "inproc" {
            let behavior =
                WorkerBehavior::from_name(&self.behavior, self.delta, self.guess_bound.unwrap_or(bound))?;
            Ok(Box::new(InProcessWorker::new(behavior, seed)))
        } else {
            Ok(Box::new(remote_worker(&self.worker)?))
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModExpMode {
    Hcs,
    Ms,
    Mm,
}

#[derive(Clone, Copy, ValueEnum)]
enum EcMode {
    Hcs,
    Ms,
}

#[derive(Clone, Copy, ValueEnum)]
enum Attack {
    Ce1,
    Ce2,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an outsourcing key for a fresh modulus N.
    Keygen {
        #[arg(long)]
        n_bits: u64,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=2))]
        n_factors: u64,
        /// Bit length of the blinding cofactor; defaults to the modulus size.
        #[arg(long)]
        p_bits: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Compute u^a mod N through a worker.
    Outsource {
        #[arg(long)]
        key: PathBuf,
        #[arg(long, value_enum, default_value = "ms")]
        mode: ModExpMode,
        /// Base, hex.
        #[arg(long)]
        u: String,
        /// Exponent, hex.
        #[arg(long)]
        a: String,
        #[arg(long, default_value_t = 4)]
        b_bound: u64,
        #[command(flatten)]
        worker: WorkerArgs,
        /// Second worker for `--mode mm`; defaults to an honest in-process worker.
        #[arg(long, default_value = "inproc")]
        worker2: String,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Generate a supersingular test curve with a known base-point order.
    CurveGen {
        #[arg(long)]
        bits: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Compute [s]G on a curve file through a worker.
    Ecmul {
        #[arg(long)]
        curve: PathBuf,
        /// Scalar, hex.
        #[arg(long)]
        s: String,
        #[arg(long, value_enum, default_value = "ms")]
        mode: EcMode,
        #[arg(long, default_value_t = 4)]
        b_bound: u64,
        #[command(flatten)]
        worker: WorkerArgs,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Generate DSA domain parameters.
    DsaParams {
        #[arg(long, default_value_t = 512)]
        p_bits: u64,
        #[arg(long, default_value_t = 160)]
        q_bits: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Sign a message with the exponentiations outsourced.
    DsaSign {
        #[arg(long)]
        params: PathBuf,
        /// Private key, hex.
        #[arg(long)]
        x: String,
        #[arg(long)]
        message: String,
        #[arg(long, default_value_t = 4)]
        b_bound: u64,
        /// Where to write the signature bundle; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        worker: WorkerArgs,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Verify a signature bundle with the exponentiations outsourced.
    DsaVerify {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        message: String,
        #[arg(long, default_value_t = 4)]
        b_bound: u64,
        #[command(flatten)]
        worker: WorkerArgs,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Encrypt to an identity given the pairing value g.
    IbeEncrypt {
        #[arg(long)]
        curve: PathBuf,
        /// Pairing value, hex.
        #[arg(long)]
        g_pair: String,
        #[arg(long)]
        message: String,
        #[arg(long, default_value_t = 4)]
        b_bound: u64,
        #[command(flatten)]
        worker: WorkerArgs,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Run a worker service.
    Serve {
        #[arg(long)]
        listen: String,
        #[arg(long, default_value = "honest")]
        behavior: String,
        #[arg(long, default_value_t = 1)]
        delta: u64,
        #[arg(long, default_value_t = 4)]
        guess_bound: u64,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Measure multiplication counts and efficiency; B = 0 selects HCS.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "128,256,512,1024")]
        bits: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_value = "0,2,4,16")]
        b_bound: Vec<u64>,
        #[arg(long, default_value_t = 20)]
        trials: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Monte-Carlo acceptance rate of MS verification against an adversary.
    VerifyMc {
        #[arg(long)]
        adversary: String,
        #[arg(long, default_value_t = 4)]
        b_bound: u64,
        #[arg(long, default_value_t = 20000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        delta: u64,
        #[arg(long)]
        guess_bound: Option<u64>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Demonstrate the attacks on the naive verification schemes.
    AttackDemo {
        #[arg(long, value_enum)]
        which: Attack,
        #[arg(long, default_value_t = 20)]
        toy_bits: u64,
        #[arg(long, default_value_t = 4)]
        b_bound: u64,
        #[arg(long, default_value_t = 100)]
        runs: u64,
        #[command(flatten)]
        seed: SeedArg,
    },
}

#[derive(Serialize, Deserialize)]
struct SignatureBundle {
    signature: DsaSignature,
    shared: SharedTriple,
    #[serde(with = "hex")]
    y: BigUint,
}

fn parse_hex(name: &str, s: &str) -> Result<BigUint, Error> {
    from_hex(s).map_err(|e| Error::Parse(format!("--{name}: {e}")))
}

fn worker_seed(ctx: &mut ArithContext) -> u64 {
    ctx.next_u64()
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Accepted => "accepted",
        Verdict::Rejected => "rejected",
        Verdict::NotApplicable => "not-applicable",
    }
}

fn print_report(rep: &SessionReport) {
    println!("verified: {}", verdict_name(rep.verified));
    println!("local_mults: {}", rep.local_mults);
    println!("queries_sent: {}", rep.queries_sent);
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Keygen {
            n_bits,
            n_factors,
            p_bits,
            out,
            seed,
        } => {
            let mut ctx = seed.context();
            let modulus = FactoredModulus::generate(n_bits, n_factors as usize, &mut ctx)?;
            let key = keygen(modulus, p_bits.unwrap_or(n_bits), &mut ctx)?;
            key.save(&out)?;
            println!("N: {}", to_hex(key.n()));
            println!("L: {}", to_hex(key.l()));
            println!("wrote {}", out.display());
            Ok(0)
        }
        Command::Outsource {
            key,
            mode,
            u,
            a,
            b_bound,
            worker,
            worker2,
            seed,
        } => {
            let key = OutsourceKey::load(&key)?;
            let (u, a) = (parse_hex("u", &u)?, parse_hex("a", &a)?);
            let mut ctx = seed.context();
            let w = worker.build(b_bound, worker_seed(&mut ctx))?;
            let rep = match mode {
                ModExpMode::Hcs => outsource_hcs(&key, &u, &a, w.as_ref(), &mut ctx)?,
                ModExpMode::Ms => outsource_ms(&key, &u, &a, b_bound, w.as_ref(), &mut ctx)?,
                ModExpMode::Mm => {
                    let second = WorkerArgs {
                        worker: worker2,
                        behavior: "honest".into(),
                        ..worker.clone()
                    }
                    .build(b_bound, worker_seed(&mut ctx))?;
                    outsource_mm(&key, &u, &a, w.as_ref(), second.as_ref(), &mut ctx)?
                }
            };
            match &rep.result {
                Some(r) => {
                    println!("result: {}", to_hex(r));
                    println!("result (decimal): {r}");
                }
                None => println!("REJECTED"),
            }
            print_report(&rep);
            Ok(if rep.verified.is_rejected() { EXIT_REJECTED } else { 0 })
        }
        Command::CurveGen { bits, out, seed } => {
            let mut ctx = seed.context();
            let (curve, g) = gen_supersingular(bits, &mut ctx)?;
            CurveFile::new(&curve, &g)?.save(&out)?;
            println!("p: {}", to_hex(&curve.p));
            println!("m: {}", to_hex(&curve.m));
            println!("wrote {}", out.display());
            Ok(0)
        }
        Command::Ecmul {
            curve,
            s,
            mode,
            b_bound,
            worker,
            seed,
        } => {
            let (curve, g) = CurveFile::load(&curve)?.into_parts()?;
            let s = parse_hex("s", &s)?;
            let mut ctx = seed.context();
            let w = worker.build(b_bound, worker_seed(&mut ctx))?;
            let key = EcOutsourceKey::generate(&curve, None, &mut ctx)?;
            let (point, verdict) = match mode {
                EcMode::Hcs => (
                    Some(outsource_scalar_mul_hcs(&key, &curve, &s, &g, w.as_ref(), &mut ctx)?),
                    Verdict::NotApplicable,
                ),
                EcMode::Ms => {
                    let rep = outsource_scalar_mul_ms(&key, &curve, &s, &g, b_bound, w.as_ref(), &mut ctx)?;
                    println!("point_ops: {}", rep.point_ops);
                    (rep.point, rep.verified)
                }
            };
            match point {
                Some(pt) if pt.is_infinity() => println!("point: infinity"),
                Some(pt) => {
                    let zinv = expsos_core::arith::mod_inv(&pt.z, &curve.p)?;
                    println!(
                        "point: ({}, {})",
                        to_hex(&((&pt.x * &zinv) % &curve.p)),
                        to_hex(&((&pt.y * &zinv) % &curve.p))
                    );
                }
                None => println!("REJECTED"),
            }
            println!("verified: {}", verdict_name(verdict));
            Ok(if verdict.is_rejected() { EXIT_REJECTED } else { 0 })
        }
        Command::DsaParams {
            p_bits,
            q_bits,
            out,
            seed,
        } => {
            let mut ctx = seed.context();
            let params = DsaParams::generate(p_bits, q_bits, &mut ctx)?;
            fs::write(&out, serde_json::to_string_pretty(&params)?)?;
            println!("wrote {}", out.display());
            Ok(0)
        }
        Command::DsaSign {
            params,
            x,
            message,
            b_bound,
            out,
            worker,
            seed,
        } => {
            let params = load_dsa(&params)?;
            let x = parse_hex("x", &x)?;
            let mut ctx = seed.context();
            let w = worker.build(b_bound, worker_seed(&mut ctx))?;
            let signed = match dsa_outsourced_sign(&params, &x, message.as_bytes(), b_bound, w.as_ref(), &mut ctx) {
                Err(Error::Rejected) => {
                    println!("REJECTED");
                    return Ok(EXIT_REJECTED);
                }
                other => other?,
            };
            let bundle = SignatureBundle {
                signature: signed.signature,
                shared: signed.shared,
                y: signed.public_key,
            };
            let json = serde_json::to_string_pretty(&bundle)?;
            match out {
                Some(path) => {
                    fs::write(&path, json)?;
                    println!("wrote {}", path.display());
                }
                None => println!("{json}"),
            }
            Ok(0)
        }
        Command::DsaVerify {
            params,
            bundle,
            message,
            b_bound,
            worker,
            seed,
        } => {
            let params = load_dsa(&params)?;
            let bundle: SignatureBundle = serde_json::from_str(&fs::read_to_string(&bundle)?)?;
            let mut ctx = seed.context();
            let w = worker.build(b_bound, worker_seed(&mut ctx))?;
            match dsa_outsourced_verify(
                &params,
                &bundle.shared,
                &bundle.signature,
                message.as_bytes(),
                b_bound,
                w.as_ref(),
                &mut ctx,
            ) {
                Ok(true) => {
                    println!("VALID");
                    Ok(0)
                }
                Ok(false) => {
                    println!("INVALID");
                    Ok(EXIT_INVALID_SIGNATURE)
                }
                Err(Error::Rejected) => {
                    println!("REJECTED");
                    Ok(EXIT_REJECTED)
                }
                Err(e) => Err(e),
            }
        }
        Command::IbeEncrypt {
            curve,
            g_pair,
            message,
            b_bound,
            worker,
            seed,
        } => {
            let (curve, g) = CurveFile::load(&curve)?.into_parts()?;
            let g_pair = parse_hex("g-pair", &g_pair)?;
            let mut ctx = seed.context();
            let w = worker.build(b_bound, worker_seed(&mut ctx))?;
            match ibe_outsourced_encrypt(&curve, &g, &g_pair, message.as_bytes(), b_bound, w.as_ref(), &mut ctx) {
                Ok(ct) => {
                    println!("{}", serde_json::to_string(&ct)?);
                    Ok(0)
                }
                Err(Error::Rejected) => {
                    println!("REJECTED");
                    Ok(EXIT_REJECTED)
                }
                Err(e) => Err(e),
            }
        }
        Command::Serve {
            listen,
            behavior,
            delta,
            guess_bound,
            seed,
        } => {
            let behavior = WorkerBehavior::from_name(&behavior, delta, guess_bound)?;
            let seed = seed.seed.unwrap_or_else(|| ArithContext::from_entropy().next_u64());
            let server = Server::bind(listen.as_str(), behavior, seed)
                .map_err(|e| Error::Transport(format!("{listen}: {e}")))?;
            println!("serving {} on {}", behavior.name(), server.local_addr()?);
            std::io::stdout().flush()?;
            match server.serve()? {}
        }
        Command::Bench {
            bits,
            b_bound,
            trials,
            csv,
            seed,
        } => {
            let seed = seed.seed.unwrap_or(0);
            let rows = efficiency_report(&bits, &b_bound, trials, seed)?;
            print!("{}", to_table(&rows));
            if let Some(path) = csv {
                fs::write(&path, to_csv(&rows))?;
                println!("wrote {}", path.display());
            }
            Ok(0)
        }
        Command::VerifyMc {
            adversary,
            b_bound,
            trials,
            delta,
            guess_bound,
            csv,
            seed,
        } => {
            let behavior = WorkerBehavior::from_name(&adversary, delta, guess_bound.unwrap_or(b_bound))?;
            let out = verify_mc(behavior, b_bound, trials, seed.seed.unwrap_or(0))?;
            let rows = [out.to_row()];
            print!("{}", to_table(&rows));
            println!(
                "{}: accepted {}/{} (rate {:.5})",
                behavior.name(),
                out.accepted,
                out.trials,
                out.rate()
            );
            if let Some(path) = csv {
                fs::write(&path, to_csv(&rows))?;
            }
            Ok(0)
        }
        Command::AttackDemo {
            which,
            toy_bits,
            b_bound,
            runs,
            seed,
        } => {
            let mut ctx = seed.context();
            match which {
                Attack::Ce1 => attack_ce1(toy_bits, b_bound, runs, &mut ctx)?,
                Attack::Ce2 => attack_ce2(toy_bits, b_bound, runs, &mut ctx)?,
            }
            Ok(0)
        }
    }
}

fn load_dsa(path: &PathBuf) -> Result<DsaParams, Error> {
    let raw: DsaParams = serde_json::from_str(&fs::read_to_string(path)?)?;
    DsaParams::new(raw.p, raw.q, raw.g)
}

fn toy_key(bits: u64, ctx: &mut ArithContext, i: u64) -> Result<OutsourceKey, Error> {
    let modulus = FactoredModulus::generate(bits, 1 + (i % 2) as usize, ctx)?;
    keygen(modulus, bits + 2, ctx)
}

fn attack_ce1(bits: u64, bound: u64, runs: u64, ctx: &mut ArithContext) -> Result<(), Error> {
    let one = BigUint::from(1u32);
    let mut naive_hits = 0;
    let mut lengths = Vec::new();
    let mut ms_hits = 0;
    let honest = InProcessWorker::honest();
    for i in 0..runs {
        let key = toy_key(bits, ctx, i)?;
        let u = ctx.random_range(&BigUint::from(2u32), key.n());
        let a = ctx.random_range(&one, key.n());
        let t = naive_blind(&key, &u, &a, NaiveScheme::DualPlain, ctx)?;
        if t.a1 != t.a2 {
            let list = ce1_recover_modulus(&t.a1, &t.a2, bits)?;
            naive_hits += u64::from(list.contains(key.n()));
            lengths.push(list.len());
        }
        let rep = outsource_ms(&key, &u, &a, bound, &honest, ctx)?;
        let (a1, a2) = (&rep.transcript[0].0.exponent, &rep.transcript[1].0.exponent);
        let t1 = ctx.random_u64_inclusive(1, bound);
        let t2 = ctx.random_u64_inclusive(1, bound);
        ms_hits += u64::from(ce1_against_affine(a1, a2, bits, t1, t2)?.contains(key.n()));
    }
    lengths.sort_unstable();
    let median = lengths.get(lengths.len() / 2).copied().unwrap_or(0);
    println!("toy modulus bits: {bits}");
    println!("naive dual-query scheme: N shortlisted in {naive_hits}/{runs} runs, median list length {median} (of 2^{bits} candidates)");
    println!(
        "affine scheme, tags guessed in [1, {bound}]: N shortlisted in {ms_hits}/{runs} runs (expected about 1/B^2 = {:.4})",
        1.0 / (bound * bound) as f64
    );
    Ok(())
}

fn attack_ce2(bits: u64, bound: u64, runs: u64, ctx: &mut ArithContext) -> Result<(), Error> {
    let one = BigUint::from(1u32);
    let scheme = NaiveScheme::AdditiveOffset { t: 7 };
    let mut naive_pass = 0;
    let mut wrong = 0;
    let mut ms_accepted = 0;
    let shift = UniformShiftWorker { delta: 1 };
    for i in 0..runs {
        let key = toy_key(bits.max(16), ctx, i)?;
        let u = ctx.random_range(&BigUint::from(2u32), key.n());
        let a = ctx.random_range(&one, key.n());
        let t = naive_blind(&key, &u, &a, scheme, ctx)?;
        let f = ce2_forge(&t.base, &t.a1, &t.a2, &t.l, &one);
        naive_pass += u64::from(naive_check(&key, scheme, &u, &f.r1, &f.r2));
        wrong += u64::from(&f.r1 % key.n() != u.modpow(&a, key.n()));
        let rep = outsource_ms(&key, &u, &a, bound, &shift, ctx)?;
        ms_accepted += u64::from(rep.verified == Verdict::Accepted);
    }
    println!("additive-offset scheme: forged pair passed the check in {naive_pass}/{runs} runs, result wrong in {wrong}/{runs}");
    println!(
        "affine scheme, B = {bound}: same forgery accepted in {ms_accepted}/{runs} runs (passes only when t1 = 1, rate 1/B = {:.4})",
        1.0 / bound as f64
    );
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Rejected => EXIT_REJECTED,
        Error::Transport(_) => EXIT_TRANSPORT,
        Error::Io(_) | Error::Protocol(_) | Error::Integrity(_) | Error::Oracle(_) => 1,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
