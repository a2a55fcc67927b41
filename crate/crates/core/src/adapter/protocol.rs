//! Message model of the newline-delimited JSON scorer protocol.

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_TOP_M: usize = 64;

pub const MALFORMED: i64 = 400;
pub const UNKNOWN_METHOD: i64 = 404;
pub const HASH_MISMATCH: i64 = 409;
pub const UNKNOWN_HANDLE: i64 = 410;
pub const SERVER_ERROR: i64 = 500;

pub const METHODS: [&str; 4] = ["info", "init", "next_dist", "advance"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub v: u32,
    pub id: u64,
    #[serde(flatten)]
    pub call: Call,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", content = "params", rename_all = "snake_case")]
pub enum Call {
    Info,
    Init {
        source: Vec<String>,
        /// When present the server refuses a vocabulary other than this one.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vocab_hash: Option<String>,
    },
    NextDist {
        handle: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        top: Option<usize>,
        #[serde(default)]
        exact: bool,
    },
    Advance {
        handle: u64,
        token: u32,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorObject {
    pub code: i64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Reply {
    Info { vocab_hash: String, vocab_size: usize },
    Dist(SparseDist),
    Handle { handle: u64 },
}

/// Top entries as `(token id, natural-log probability)` plus the mass of
/// every token not listed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseDist {
    pub size: usize,
    pub entries: Vec<(u32, f64)>,
    pub residual: f64,
}

impl SparseDist {
    /// Keeps the `top` most probable non-zero entries (all when `None`),
    /// ordered by probability then id.
    pub fn from_probs(probs: &[f64], top: Option<usize>) -> Self {
        let mut ranked: Vec<(u32, f64)> = probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, &p)| (i as u32, p))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        if let Some(m) = top {
            ranked.truncate(m);
        }
        let sent: f64 = ranked.iter().map(|e| e.1).sum();
        Self {
            size: probs.len(),
            entries: ranked.into_iter().map(|(i, p)| (i, p.ln().min(0.0))).collect(),
            residual: (1.0 - sent).max(0.0),
        }
    }

    /// Dense vector with the residual spread evenly over unlisted ids.
    /// Residuals below 1e-12 are treated as rounding and dropped.
    pub fn densify(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.size];
        let mut listed = vec![false; self.size];
        for &(i, lp) in &self.entries {
            if let Some(slot) = out.get_mut(i as usize) {
                *slot = lp.exp();
                listed[i as usize] = true;
            }
        }
        let unlisted = listed.iter().filter(|&&l| !l).count();
        if self.residual > 1e-12 && unlisted > 0 {
            let share = self.residual / unlisted as f64;
            for (p, l) in out.iter_mut().zip(&listed) {
                if !l {
                    *p = share;
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub v: u32,
    pub id: Option<u64>,
    #[serde(flatten)]
    pub body: Body,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Body {
    Result(Reply),
    Error(ErrorObject),
}

impl Response {
    pub fn ok(id: u64, reply: Reply) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            id: Some(id),
            body: Body::Result(reply),
        }
    }

    pub fn error(id: Option<u64>, code: i64, message: impl Into<String>) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            id,
            body: Body::Error(ErrorObject {
                code,
                message: message.into(),
            }),
        }
    }
}

/// Parses one request line, classifying failures into protocol error
/// responses.
pub fn parse_request(line: &str) -> Result<Request, Response> {
    let value: Value = serde_json::from_str(line)
        .map_err(|e| Response::error(None, MALFORMED, format!("malformed JSON: {e}")))?;
    let id = value.get("id").and_then(Value::as_u64);
    let method = value.get("method").and_then(Value::as_str);
    match method {
        Some(m) if !METHODS.contains(&m) => {
            return Err(Response::error(id, UNKNOWN_METHOD, format!("unknown method {m:?}")));
        }
        None => return Err(Response::error(id, MALFORMED, "missing method")),
        Some(_) => {}
    }
    let req: Request = serde_json::from_value(value)
        .map_err(|e| Response::error(id, MALFORMED, format!("bad request: {e}")))?;
    if req.v != PROTOCOL_VERSION {
        return Err(Response::error(
            Some(req.id),
            MALFORMED,
            format!("unsupported protocol version {}", req.v),
        ));
    }
    Ok(req)
}
