//! Verifiable outsourcing of modular exponentiation and elliptic-curve scalar
//! multiplication to untrusted workers.

pub mod apps;
pub mod arith;
pub mod attacks;
pub mod blind;
pub mod cloud;
pub mod curve;
pub mod ecsm_sos;
pub mod encoding;
pub mod error;
pub mod experiment;
pub mod modexp_sos;

pub use arith::{ArithContext, FactoredModulus};
pub use blind::{OutsourceKey, VerificationTag};
pub use cloud::{CloudWorker, InProcessWorker, RemoteWorker, WorkerBehavior};
pub use curve::{CurveParams, ProjectivePoint};
pub use ecsm_sos::{EcOutsourceKey, TransformedCurve};
pub use error::{Error, Result};
pub use modexp_sos::{ModExpQuery, SessionReport, Verdict};
pub use num_bigint::BigUint;
