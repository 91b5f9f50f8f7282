//! The worker side of the protocol: what a cloud sees, how an honest cloud
//! answers, and a family of cheating clouds.
//!
//! Sessions hand a worker a batch of [`Request`]s (all queries of one
//! session, already in the order the client chose to reveal them) and get
//! back one [`Response`] per request, matched by the opaque request id.

mod remote;
mod server;
pub mod wire;

use std::collections::HashMap;
use std::sync::Mutex;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::arith::ArithContext;
use crate::curve::{add_formula, double_formula, ProjectivePoint};
use crate::ecsm_sos::TransformedCurve;
use crate::encoding::to_hex;
use crate::error::{Error, Result};
use crate::modexp_sos::ModExpQuery;

pub use remote::{remote_worker, RemoteWorker};
pub use server::{run_server, Server, ServerHandle};

/// `[s']P'` over the blinded ring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EcMulQuery {
    pub curve: TransformedCurve,
    pub scalar: BigUint,
    pub point: ProjectivePoint,
}

/// `P' + Q'` over the blinded ring, by the addition formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EcAddQuery {
    pub curve: TransformedCurve,
    pub p: ProjectivePoint,
    pub q: ProjectivePoint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Task {
    ModExp(ModExpQuery),
    ScalarMul(EcMulQuery),
    PointAdd(EcAddQuery),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub id: String,
    pub task: Task,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Answer {
    Residue(BigUint),
    Point(ProjectivePoint),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub id: String,
    pub outcome: std::result::Result<Answer, String>,
}

pub trait CloudWorker: Send + Sync {
    fn submit(&self, batch: &[Request]) -> Result<Vec<Response>>;
}

impl<W: CloudWorker + ?Sized> CloudWorker for &W {
    fn submit(&self, batch: &[Request]) -> Result<Vec<Response>> {
        (**self).submit(batch)
    }
}

impl<W: CloudWorker + ?Sized> CloudWorker for Box<W> {
    fn submit(&self, batch: &[Request]) -> Result<Vec<Response>> {
        (**self).submit(batch)
    }
}

impl<W: CloudWorker + ?Sized> CloudWorker for std::sync::Arc<W> {
    fn submit(&self, batch: &[Request]) -> Result<Vec<Response>> {
        (**self).submit(batch)
    }
}

/// Sends `tasks` in the order given by `send_order` (a permutation of task
/// indices) and returns the answers in task order.
pub(crate) fn exchange(
    worker: &dyn CloudWorker,
    tasks: Vec<Task>,
    send_order: &[usize],
    ctx: &mut ArithContext,
) -> Result<Vec<Answer>> {
    debug_assert_eq!(tasks.len(), send_order.len());
    let ids: Vec<String> = (0..tasks.len())
        .map(|_| format!("{:016x}", ctx.next_u64()))
        .collect();
    let mut slots: Vec<Option<Task>> = tasks.into_iter().map(Some).collect();
    let batch: Vec<Request> = send_order
        .iter()
        .map(|&i| Request {
            id: ids[i].clone(),
            task: slots[i].take().expect("send order is a permutation"),
        })
        .collect();
    let mut by_id: HashMap<String, std::result::Result<Answer, String>> = worker
        .submit(&batch)?
        .into_iter()
        .map(|r| (r.id, r.outcome))
        .collect();
    ids.iter()
        .map(|id| match by_id.remove(id) {
            Some(Ok(answer)) => Ok(answer),
            Some(Err(e)) => Err(Error::Protocol(e)),
            None => Err(Error::Protocol(format!("no response for request {id}"))),
        })
        .collect()
}

/// A uniformly random ordering of `n` queries.
pub(crate) fn random_order(n: usize, ctx: &mut ArithContext) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(ctx.rng());
    order
}

/// `U^A mod L`.
pub fn serve_modexp(q: &ModExpQuery) -> std::result::Result<BigUint, String> {
    check_modexp(q)?;
    Ok(q.base.modpow(&q.exponent, &q.modulus))
}

fn check_modexp(q: &ModExpQuery) -> std::result::Result<(), String> {
    if q.modulus < BigUint::from(2u32) {
        return Err("modulus must be at least 2".into());
    }
    if q.base >= q.modulus {
        return Err("base must be reduced modulo l".into());
    }
    Ok(())
}

fn check_ring_point(p: &ProjectivePoint, n: &BigUint) -> std::result::Result<(), String> {
    if p.x >= *n || p.y >= *n || p.z >= *n {
        return Err("point coordinates must be reduced modulo n".into());
    }
    Ok(())
}

fn check_curve(c: &TransformedCurve) -> std::result::Result<(), String> {
    if c.modulus < BigUint::from(2u32) {
        return Err("ring modulus must be at least 2".into());
    }
    if c.coef_b >= c.modulus || c.coef_c >= c.modulus {
        return Err("curve coefficients must be reduced modulo n".into());
    }
    Ok(())
}

/// `[s']P'` by left-to-right double-and-add over `Z_N`, running the
/// projective formulas formally: no case analysis, no normalization.
pub fn serve_scalar_mul(q: &EcMulQuery) -> std::result::Result<ProjectivePoint, String> {
    check_curve(&q.curve)?;
    check_ring_point(&q.point, &q.curve.modulus)?;
    Ok(ring_scalar_mul(&q.curve, &q.scalar, &q.point))
}

pub(crate) fn ring_scalar_mul(
    curve: &TransformedCurve,
    s: &BigUint,
    point: &ProjectivePoint,
) -> ProjectivePoint {
    if s.is_zero() {
        return ProjectivePoint::infinity();
    }
    let mut scratch = ArithContext::new(0);
    let n = &curve.modulus;
    let mut acc = point.clone();
    for i in (0..s.bits() - 1).rev() {
        acc = double_formula(&mut scratch, &curve.coef_b, n, &acc);
        if s.bit(i) {
            acc = add_formula(&mut scratch, n, &acc, point).point;
        }
    }
    acc
}

pub fn serve_point_add(q: &EcAddQuery) -> std::result::Result<ProjectivePoint, String> {
    check_curve(&q.curve)?;
    check_ring_point(&q.p, &q.curve.modulus)?;
    check_ring_point(&q.q, &q.curve.modulus)?;
    let mut scratch = ArithContext::new(0);
    Ok(add_formula(&mut scratch, &q.curve.modulus, &q.p, &q.q).point)
}

pub fn serve_honest(task: &Task) -> std::result::Result<Answer, String> {
    match task {
        Task::ModExp(q) => serve_modexp(q).map(Answer::Residue),
        Task::ScalarMul(q) => serve_scalar_mul(q).map(Answer::Point),
        Task::PointAdd(q) => serve_point_add(q).map(Answer::Point),
    }
}

/// How a simulated cloud answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkerBehavior {
    Honest,
    /// Uniformly random results, no computation.
    RandomForger,
    /// Answers the first query on a base with exponent `A + delta` and the
    /// second with `A + t·delta`, betting that the first query was the plain
    /// one and that `t` equals the client's `t1`. The guess `t` is drawn from
    /// `[2, guess_bound]`; `t = 1` is the order-independent shift measured
    /// separately as the literal additive-offset forgery.
    ExponentShift { delta: u64, guess_bound: u64 },
    /// Computes the first query of each kind honestly and replays that answer
    /// for every later query of the same kind.
    LazyReplay,
    /// Returns a random `X` for the first query on a base and
    /// `X^t1 · U^t2 mod L` for the second, with `t1, t2` guessed in
    /// `[1, guess_bound]`.
    OrderGuesser { guess_bound: u64 },
}

impl WorkerBehavior {
    pub const NAMES: [&'static str; 5] = [
        "honest",
        "random-forger",
        "exponent-shift",
        "lazy-replay",
        "order-guesser",
    ];

    pub fn from_name(name: &str, delta: u64, guess_bound: u64) -> Result<Self> {
        Ok(match name {
            "honest" => WorkerBehavior::Honest,
            "random-forger" => WorkerBehavior::RandomForger,
            "exponent-shift" => WorkerBehavior::ExponentShift { delta, guess_bound },
            "lazy-replay" => WorkerBehavior::LazyReplay,
            "order-guesser" => WorkerBehavior::OrderGuesser { guess_bound },
            other => {
                return Err(Error::domain(format!(
                    "unknown behavior {other:?}; expected one of {:?}",
                    Self::NAMES
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            WorkerBehavior::Honest => "honest",
            WorkerBehavior::RandomForger => "random-forger",
            WorkerBehavior::ExponentShift { .. } => "exponent-shift",
            WorkerBehavior::LazyReplay => "lazy-replay",
            WorkerBehavior::OrderGuesser { .. } => "order-guesser",
        }
    }
}

enum Pending {
    /// Exponent-shift: nothing to remember beyond having seen the base.
    Seen,
    /// Order-guesser: the random residue returned for the first query.
    Residue(BigUint),
    /// Order-guesser on curves: the random multiplier used for the first query.
    Multiplier(BigUint),
}

/// Mutable state of one cheating cloud (per in-process worker, or per
/// connection on the wire server).
pub struct Adversary {
    behavior: WorkerBehavior,
    rng: ChaCha20Rng,
    pending: HashMap<String, Pending>,
    replay: HashMap<&'static str, Answer>,
}

impl Adversary {
    pub fn new(behavior: WorkerBehavior, seed: u64) -> Self {
        Adversary {
            behavior,
            rng: ChaCha20Rng::seed_from_u64(seed),
            pending: HashMap::new(),
            replay: HashMap::new(),
        }
    }

    pub fn behavior(&self) -> WorkerBehavior {
        self.behavior
    }

    pub fn answer(&mut self, task: &Task) -> std::result::Result<Answer, String> {
        match task {
            Task::ModExp(q) => check_modexp(q)?,
            Task::ScalarMul(q) => {
                check_curve(&q.curve)?;
                check_ring_point(&q.point, &q.curve.modulus)?;
            }
            Task::PointAdd(q) => {
                check_curve(&q.curve)?;
                check_ring_point(&q.p, &q.curve.modulus)?;
                check_ring_point(&q.q, &q.curve.modulus)?;
            }
        }
        match self.behavior {
            WorkerBehavior::Honest => serve_honest(task),
            WorkerBehavior::RandomForger => Ok(self.random_answer(task)),
            WorkerBehavior::LazyReplay => {
                let kind = match task {
                    Task::ModExp(_) => "modexp",
                    Task::ScalarMul(_) => "ecmul",
                    Task::PointAdd(_) => "ecadd",
                };
                if let Some(prev) = self.replay.get(kind) {
                    return Ok(prev.clone());
                }
                let fresh = serve_honest(task)?;
                self.replay.insert(kind, fresh.clone());
                Ok(fresh)
            }
            WorkerBehavior::ExponentShift { delta, guess_bound } => {
                Ok(self.exponent_shift(task, delta, guess_bound))
            }
            WorkerBehavior::OrderGuesser { guess_bound } => {
                Ok(self.order_guess(task, guess_bound))
            }
        }
    }

    fn random_answer(&mut self, task: &Task) -> Answer {
        match task {
            Task::ModExp(q) => Answer::Residue(self.rng.gen_biguint_below(&q.modulus)),
            Task::ScalarMul(EcMulQuery { curve, .. }) | Task::PointAdd(EcAddQuery { curve, .. }) => {
                let n = &curve.modulus;
                Answer::Point(ProjectivePoint::new(
                    self.rng.gen_biguint_below(n),
                    self.rng.gen_biguint_below(n),
                    self.rng.gen_biguint_below(n),
                ))
            }
        }
    }

    fn memory_key(task: &Task) -> Option<String> {
        match task {
            Task::ModExp(q) => Some(format!("m:{}:{}", to_hex(&q.base), to_hex(&q.modulus))),
            Task::ScalarMul(q) => Some(format!(
                "e:{}:{}:{}:{}",
                to_hex(&q.point.x),
                to_hex(&q.point.y),
                to_hex(&q.point.z),
                to_hex(&q.curve.modulus)
            )),
            Task::PointAdd(_) => None,
        }
    }

    fn exponent_shift(&mut self, task: &Task, delta: u64, guess_bound: u64) -> Answer {
        let Some(key) = Self::memory_key(task) else {
            return serve_honest(task).expect("validated");
        };
        let shift = if self.pending.remove(&key).is_some() {
            let t = self.rng.gen_range(2..=guess_bound.max(2));
            BigUint::from(t) * delta
        } else {
            self.pending.insert(key, Pending::Seen);
            BigUint::from(delta)
        };
        match task {
            Task::ModExp(q) => Answer::Residue(q.base.modpow(&(&q.exponent + shift), &q.modulus)),
            Task::ScalarMul(q) => {
                Answer::Point(ring_scalar_mul(&q.curve, &(&q.scalar + shift), &q.point))
            }
            Task::PointAdd(_) => unreachable!("no memory key"),
        }
    }

    fn order_guess(&mut self, task: &Task, guess_bound: u64) -> Answer {
        let Some(key) = Self::memory_key(task) else {
            return serve_honest(task).expect("validated");
        };
        let bound = guess_bound.max(1);
        match (task, self.pending.remove(&key)) {
            (Task::ModExp(q), Some(Pending::Residue(x))) => {
                let t1 = BigUint::from(self.rng.gen_range(1..=bound));
                let t2 = BigUint::from(self.rng.gen_range(1..=bound));
                let forged = x.modpow(&t1, &q.modulus) * q.base.modpow(&t2, &q.modulus);
                Answer::Residue(forged % &q.modulus)
            }
            (Task::ModExp(q), _) => {
                let x = self.rng.gen_biguint_below(&q.modulus);
                self.pending.insert(key, Pending::Residue(x.clone()));
                Answer::Residue(x)
            }
            (Task::ScalarMul(q), Some(Pending::Multiplier(x))) => {
                let t1 = self.rng.gen_range(1..=bound);
                let t2 = self.rng.gen_range(1..=bound);
                let s = x * t1 + t2;
                Answer::Point(ring_scalar_mul(&q.curve, &s, &q.point))
            }
            (Task::ScalarMul(q), _) => {
                let x = self
                    .rng
                    .gen_biguint_range(&BigUint::one(), &q.curve.modulus.clone().max(BigUint::from(2u32)));
                self.pending.insert(key, Pending::Multiplier(x.clone()));
                Answer::Point(ring_scalar_mul(&q.curve, &x, &q.point))
            }
            (Task::PointAdd(_), _) => unreachable!("no memory key"),
        }
    }
}

/// A worker living in the client's process.
pub struct InProcessWorker {
    behavior: WorkerBehavior,
    state: Mutex<Adversary>,
}

impl InProcessWorker {
    pub fn new(behavior: WorkerBehavior, seed: u64) -> Self {
        InProcessWorker {
            behavior,
            state: Mutex::new(Adversary::new(behavior, seed)),
        }
    }

    pub fn honest() -> Self {
        Self::new(WorkerBehavior::Honest, 0)
    }

    pub fn behavior(&self) -> WorkerBehavior {
        self.behavior
    }
}

impl CloudWorker for InProcessWorker {
    fn submit(&self, batch: &[Request]) -> Result<Vec<Response>> {
        if self.behavior == WorkerBehavior::Honest {
            return Ok(batch
                .iter()
                .map(|r| Response {
                    id: r.id.clone(),
                    outcome: serve_honest(&r.task),
                })
                .collect());
        }
        let mut state = self.state.lock().expect("adversary state poisoned");
        Ok(batch
            .iter()
            .map(|r| Response {
                id: r.id.clone(),
                outcome: state.answer(&r.task),
            })
            .collect())
    }
}

/// Wraps a worker and keeps the wire encoding of every outbound request, for
/// auditing what a cloud gets to see.
pub struct RecordingWorker<W> {
    inner: W,
    lines: Mutex<Vec<String>>,
}

impl<W: CloudWorker> RecordingWorker<W> {
    pub fn new(inner: W) -> Self {
        RecordingWorker {
            inner,
            lines: Mutex::new(Vec::new()),
        }
    }

    pub fn lines(&self) -> Vec<String> {
        self.lines.lock().expect("recorder poisoned").clone()
    }

    pub fn clear(&self) {
        self.lines.lock().expect("recorder poisoned").clear();
    }
}

impl<W: CloudWorker> CloudWorker for RecordingWorker<W> {
    fn submit(&self, batch: &[Request]) -> Result<Vec<Response>> {
        {
            let mut lines = self.lines.lock().expect("recorder poisoned");
            lines.extend(batch.iter().map(wire::encode_request));
        }
        self.inner.submit(batch)
    }
}

/// Seed for a derived stream, e.g. one adversary per server connection.
pub(crate) fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.next_u64()
}
