//! Newline-delimited JSON encoding of requests and responses. All integers
//! travel as lowercase hex without prefix.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::{Answer, EcAddQuery, EcMulQuery, Request, Response, Task};
use crate::curve::ProjectivePoint;
use crate::ecsm_sos::TransformedCurve;
use crate::encoding::hex;
use crate::error::{Error, Result};
use crate::modexp_sos::ModExpQuery;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
enum WireRequest {
    Modexp {
        #[serde(with = "hex")]
        u: BigUint,
        #[serde(with = "hex")]
        a: BigUint,
        #[serde(with = "hex")]
        l: BigUint,
        id: String,
    },
    Ecmul {
        #[serde(with = "hex")]
        s: BigUint,
        #[serde(with = "hex")]
        px: BigUint,
        #[serde(with = "hex")]
        py: BigUint,
        #[serde(with = "hex")]
        pz: BigUint,
        #[serde(with = "hex")]
        b: BigUint,
        #[serde(with = "hex")]
        c: BigUint,
        #[serde(with = "hex")]
        n: BigUint,
        id: String,
    },
    Ecadd {
        #[serde(with = "hex")]
        px: BigUint,
        #[serde(with = "hex")]
        py: BigUint,
        #[serde(with = "hex")]
        pz: BigUint,
        #[serde(with = "hex")]
        qx: BigUint,
        #[serde(with = "hex")]
        qy: BigUint,
        #[serde(with = "hex")]
        qz: BigUint,
        #[serde(with = "hex")]
        b: BigUint,
        #[serde(with = "hex")]
        c: BigUint,
        #[serde(with = "hex")]
        n: BigUint,
        id: String,
    },
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct WireResponse {
    id: String,
    ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_hex")]
    r: Option<BigUint>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_hex")]
    x: Option<BigUint>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_hex")]
    y: Option<BigUint>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_hex")]
    z: Option<BigUint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    err: Option<String>,
}

mod opt_hex {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<BigUint>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => crate::encoding::hex::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigUint>, D::Error> {
        let raw: Option<String> = Option::deserialize(d)?;
        raw.map(|s| crate::encoding::from_hex(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

pub fn encode_request(req: &Request) -> String {
    let id = req.id.clone();
    let wire = match &req.task {
        Task::ModExp(q) => WireRequest::Modexp {
            u: q.base.clone(),
            a: q.exponent.clone(),
            l: q.modulus.clone(),
            id,
        },
        Task::ScalarMul(q) => WireRequest::Ecmul {
            s: q.scalar.clone(),
            px: q.point.x.clone(),
            py: q.point.y.clone(),
            pz: q.point.z.clone(),
            b: q.curve.coef_b.clone(),
            c: q.curve.coef_c.clone(),
            n: q.curve.modulus.clone(),
            id,
        },
        Task::PointAdd(q) => WireRequest::Ecadd {
            px: q.p.x.clone(),
            py: q.p.y.clone(),
            pz: q.p.z.clone(),
            qx: q.q.x.clone(),
            qy: q.q.y.clone(),
            qz: q.q.z.clone(),
            b: q.curve.coef_b.clone(),
            c: q.curve.coef_c.clone(),
            n: q.curve.modulus.clone(),
            id,
        },
    };
    serde_json::to_string(&wire).expect("request serializes")
}

pub fn decode_request(line: &str) -> Result<Request> {
    let wire: WireRequest =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::Parse(e.to_string()))?;
    Ok(match wire {
        WireRequest::Modexp { u, a, l, id } => Request {
            id,
            task: Task::ModExp(ModExpQuery {
                base: u,
                exponent: a,
                modulus: l,
            }),
        },
        WireRequest::Ecmul {
            s,
            px,
            py,
            pz,
            b,
            c,
            n,
            id,
        } => Request {
            id,
            task: Task::ScalarMul(EcMulQuery {
                curve: TransformedCurve {
                    coef_b: b,
                    coef_c: c,
                    modulus: n,
                },
                scalar: s,
                point: ProjectivePoint::new(px, py, pz),
            }),
        },
        WireRequest::Ecadd {
            px,
            py,
            pz,
            qx,
            qy,
            qz,
            b,
            c,
            n,
            id,
        } => Request {
            id,
            task: Task::PointAdd(EcAddQuery {
                curve: TransformedCurve {
                    coef_b: b,
                    coef_c: c,
                    modulus: n,
                },
                p: ProjectivePoint::new(px, py, pz),
                q: ProjectivePoint::new(qx, qy, qz),
            }),
        },
    })
}

pub fn encode_response(resp: &Response) -> String {
    let mut wire = WireResponse {
        id: resp.id.clone(),
        ..Default::default()
    };
    match &resp.outcome {
        Ok(Answer::Residue(r)) => {
            wire.ok = true;
            wire.r = Some(r.clone());
        }
        Ok(Answer::Point(p)) => {
            wire.ok = true;
            wire.x = Some(p.x.clone());
            wire.y = Some(p.y.clone());
            wire.z = Some(p.z.clone());
        }
        Err(e) => wire.err = Some(e.clone()),
    }
    serde_json::to_string(&wire).expect("response serializes")
}

pub fn decode_response(line: &str) -> Result<Response> {
    let wire: WireResponse =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::Parse(e.to_string()))?;
    let outcome = if !wire.ok {
        Err(wire.err.unwrap_or_else(|| "unspecified worker error".into()))
    } else {
        match (wire.r, wire.x, wire.y, wire.z) {
            (Some(r), None, None, None) => Ok(Answer::Residue(r)),
            (None, Some(x), Some(y), Some(z)) => Ok(Answer::Point(ProjectivePoint::new(x, y, z))),
            _ => return Err(Error::Parse("response carries neither r nor x, y, z".into())),
        }
    };
    Ok(Response {
        id: wire.id,
        outcome,
    })
}

/// Error reply for a line that could not be decoded; echoes the id if one
/// can be salvaged.
pub fn error_response_for(line: &str, err: &str) -> String {
    let id = serde_json::from_str::<serde_json::Value>(line)
        .ok()
        .and_then(|v| v.get("id").and_then(|i| i.as_str()).map(str::to_owned))
        .unwrap_or_default();
    encode_response(&Response {
        id,
        outcome: Err(err.to_owned()),
    })
}
