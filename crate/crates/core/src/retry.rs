//! Bounded exponential backoff for calls to model services.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::BackendError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    /// Total attempts including the first.
    pub max_attempts: usize,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 4,
            base_delay_ms: 200,
            max_delay_ms: 5_000,
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_attempts: usize) -> Self {
        Self {
            max_attempts,
            base_delay_ms: 0,
            max_delay_ms: 0,
        }
    }

    /// Delay before retry number `retry` (0-based): base·2^retry, capped.
    pub fn delay(&self, retry: usize) -> Duration {
        let factor = 1u64.checked_shl(retry.min(63) as u32).unwrap_or(u64::MAX);
        Duration::from_millis(self.base_delay_ms.saturating_mul(factor).min(self.max_delay_ms))
    }

    pub fn run<T>(&self, op: impl FnMut() -> Result<T, BackendError>) -> Result<T, BackendError> {
        self.run_with(op, std::thread::sleep)
    }

    /// Runs `op` until it succeeds, fails with a non-retryable error, or the
    /// attempt budget is spent.
    pub fn run_with<T>(
        &self,
        mut op: impl FnMut() -> Result<T, BackendError>,
        mut sleep: impl FnMut(Duration),
    ) -> Result<T, BackendError> {
        let attempts = self.max_attempts.max(1);
        let mut last = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                sleep(self.delay(attempt - 1));
            }
            match op() {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() => {
                    tracing::debug!(attempt, error = %e, "retryable backend failure");
                    last = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(BackendError::Exhausted {
            attempts,
            last: last.map(|e| e.to_string()).unwrap_or_default(),
        })
    }
}
