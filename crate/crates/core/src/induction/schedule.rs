use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decreasing coupling logs `log λ_{N+i}` driven by continued-fraction
/// denominators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSchedule {
    /// `logs[0]` is the starting value; `logs[i]` follows `i` updates.
    pub logs: Vec<f64>,
    pub q_seq: Vec<u64>,
    /// `logs.last() / logs[0]`.
    pub ratio: f64,
}

impl LambdaSchedule {
    pub fn at(&self, i: usize) -> f64 {
        self.logs[i.min(self.logs.len() - 1)]
    }
}

/// Applies the schedule `depth` times and fails when the final value drops
/// below `(1 − ε)·log λ`.
pub fn lambda_schedule(log_lambda: f64, q_seq: &[u64], c: f64, depth: usize, eps: f64) -> Result<LambdaSchedule> {
    let s = schedule_logs(log_lambda, q_seq, c, depth)?;
    let floor = (1.0 - eps) * log_lambda;
    let last = *s.logs.last().unwrap();
    if last < floor {
        return Err(Error::FloorViolated { value: last, floor });
    }
    Ok(s)
}

/// Applies `log λ_n = log λ_{n−1}·(1 − C·log q_n / q_{n−1})` `depth` times.
pub fn schedule_logs(log_lambda: f64, q_seq: &[u64], c: f64, depth: usize) -> Result<LambdaSchedule> {
    if c < 0.0 {
        return Err(Error::Config(format!("schedule constant {c} is negative")));
    }
    if q_seq.len() < depth + 1 {
        return Err(Error::Config(format!("schedule of depth {depth} needs {} denominators", depth + 1)));
    }
    if q_seq.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("denominators must increase".into()));
    }
    let mut logs = vec![log_lambda];
    for n in 1..=depth {
        let prev = logs[n - 1];
        logs.push(prev - c * (q_seq[n] as f64).ln() / q_seq[n - 1] as f64 * prev);
    }
    Ok(LambdaSchedule { ratio: logs[depth] / log_lambda, logs, q_seq: q_seq[..=depth].to_vec() })
}
