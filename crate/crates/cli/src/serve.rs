//! JSON-lines watermark service: one request per input line, one response per
//! output line, strictly in order.
//!
//! Requests (`op` defaults to `"step"`):
//!
//! ```text
//! {"probs": [...], "context_ids": [...], "step": 0, "coin": true?}
//! {"op": "detect", "vocab_size": m, "context_ids": [...], "token_ids": [...]}
//! {"op": "reset"}
//! ```
//!
//! A line that cannot be handled yields `{"error": ..., "line": <echo>}` and
//! the service keeps going.

use std::io::{BufRead, Write};

use ccwm_core::coupling::watermark_conditional;
use ccwm_core::partition::PartitionStrategy;
use ccwm_core::protocol::{derive_step_randomness, SharedKey};
use ccwm_core::simulator::{p_value, z_score, Scheme};
use ccwm_core::theory::tilt;
use ccwm_core::{PartitionSeq, ProbVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CliResult};

#[derive(Debug, Clone)]
pub struct WatermarkParams {
    pub key: SharedKey,
    pub k: usize,
    pub scheme: Scheme,
    pub coin_bias: f64,
    pub strategy: PartitionStrategy,
}

impl WatermarkParams {
    pub fn validate(&self) -> CliResult<()> {
        if self.k < 2 {
            return Err(invalid(format!("k must be >= 2, got {}", self.k)));
        }
        if !(0.0..=1.0).contains(&self.coin_bias) {
            return Err(invalid(format!("coin bias {} outside [0, 1]", self.coin_bias)));
        }
        if let Scheme::RedGreen { delta } = self.scheme {
            if delta.is_nan() || delta < 0.0 {
                return Err(invalid(format!("delta must be >= 0, got {delta}")));
            }
        }
        Ok(())
    }

    fn gamma(&self) -> f64 {
        1.0 / self.k as f64
    }

    fn partition(&self, context: &[u32], step: u64, m: usize) -> CliResult<(usize, PartitionSeq, ccwm_core::RngStream)> {
        if m < self.k {
            return Err(invalid(format!("vocabulary of {m} tokens is smaller than k = {}", self.k)));
        }
        let r = derive_step_randomness(&self.key, context, step, self.k)?;
        let b = r.partition(m, self.k, self.strategy)?;
        Ok((r.s, b, r.sampling_rng()))
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
enum Request {
    Step {
        probs: Vec<f64>,
        context_ids: Vec<u32>,
        step: u64,
        /// Forces the latent coin; the coin draw is still consumed so the
        /// token stream does not shift.
        #[serde(default)]
        coin: Option<bool>,
    },
    Detect {
        vocab_size: usize,
        #[serde(default)]
        context_ids: Vec<u32>,
        token_ids: Vec<u32>,
    },
    Reset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResponse {
    pub sampled_token: u32,
    pub s: usize,
    pub coin: bool,
    pub matched: bool,
    pub matches: u64,
    pub steps: u64,
    pub z_running: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectResponse {
    pub matches: u64,
    pub t: u64,
    pub z: f64,
    pub p_value: f64,
}

#[derive(Serialize)]
struct ErrorResponse<'a> {
    error: String,
    line: &'a str,
}

#[derive(Serialize)]
struct ResetResponse {
    reset: bool,
}

pub struct Session {
    params: WatermarkParams,
    matches: u64,
    steps: u64,
}

impl Session {
    pub fn new(params: WatermarkParams) -> Self {
        Self {
            params,
            matches: 0,
            steps: 0,
        }
    }

    pub fn step(&mut self, probs: Vec<f64>, context: &[u32], step: u64, coin: Option<bool>) -> CliResult<StepResponse> {
        let q = ProbVector::new(probs)?;
        let (s, b, mut rng) = self.params.partition(context, step, q.len())?;
        let drawn = rng.bernoulli(self.params.coin_bias);
        let coin = coin.unwrap_or(drawn);
        let law = if coin {
            match self.params.scheme {
                Scheme::Cc => watermark_conditional(&q, &b, s)?,
                Scheme::RedGreen { delta } => {
                    let green: Vec<usize> = (0..q.len()).filter(|&x| b.bin(x) == s).collect();
                    tilt(&q, &green, delta)?
                }
            }
        } else {
            q
        };
        let token = rng.categorical(law.as_slice());
        let matched = b.bin(token) == s;
        self.steps += 1;
        self.matches += u64::from(matched);
        Ok(StepResponse {
            sampled_token: token as u32,
            s,
            coin,
            matched,
            matches: self.matches,
            steps: self.steps,
            z_running: z_score(self.matches, self.steps, self.params.gamma())?,
        })
    }

    pub fn reset(&mut self) {
        self.matches = 0;
        self.steps = 0;
    }
}

/// Token `i` of `tokens` is scored against the randomness derived from
/// `context ++ tokens[..i]` at step `i`, mirroring generation.
pub fn detect(params: &WatermarkParams, vocab_size: usize, context: &[u32], tokens: &[u32]) -> CliResult<DetectResponse> {
    if tokens.is_empty() {
        return Err(invalid("token sequence is empty"));
    }
    let mut history = context.to_vec();
    let mut matches = 0u64;
    for (i, &t) in tokens.iter().enumerate() {
        if t as usize >= vocab_size {
            return Err(invalid(format!("token {t} outside vocabulary of {vocab_size}")));
        }
        let (s, b, _) = params.partition(&history, i as u64, vocab_size)?;
        matches += u64::from(b.bin(t as usize) == s);
        history.push(t);
    }
    let t = tokens.len() as u64;
    let z = z_score(matches, t, params.gamma())?;
    Ok(DetectResponse {
        matches,
        t,
        z,
        p_value: p_value(z),
    })
}

fn handle(session: &mut Session, line: &str) -> CliResult<String> {
    let mut value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| invalid(format!("malformed JSON: {e}")))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| invalid("request must be a JSON object"))?;
    obj.entry("op").or_insert_with(|| "step".into());
    let req: Request = serde_json::from_value(value).map_err(|e| invalid(e.to_string()))?;
    let out = match req {
        Request::Step {
            probs,
            context_ids,
            step,
            coin,
        } => serde_json::to_string(&session.step(probs, &context_ids, step, coin)?),
        Request::Detect {
            vocab_size,
            context_ids,
            token_ids,
        } => serde_json::to_string(&detect(&session.params, vocab_size, &context_ids, &token_ids)?),
        Request::Reset => {
            session.reset();
            serde_json::to_string(&ResetResponse { reset: true })
        }
    };
    Ok(out.expect("responses serialise"))
}

/// Serves until end of input. Only I/O failures end the loop early.
pub fn serve(params: WatermarkParams, input: impl BufRead, mut output: impl Write) -> anyhow::Result<()> {
    let mut session = Session::new(params);
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = handle(&mut session, &line).unwrap_or_else(|e| {
            serde_json::to_string(&ErrorResponse {
                error: e.to_string(),
                line: &line,
            })
            .expect("error record serialises")
        });
        writeln!(output, "{reply}")?;
        output.flush()?;
    }
    Ok(())
}
