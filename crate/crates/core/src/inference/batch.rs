use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use thiserror::Error;

use super::{CachedGeneration, GenerationBackend, GenerationCache, GenerationRecord, GenerationRequest};
use crate::error::BackendError;
use crate::retry::RetryPolicy;
use crate::seqcodec::parse_generated;

#[derive(Debug, Clone, Copy)]
pub struct BatchOptions {
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            max_in_flight: 4,
            retry: RetryPolicy::default(),
        }
    }
}

/// Some requests failed. `slots` still lines up with the request list;
/// failed positions are `None`.
#[derive(Debug, Error)]
#[error("{} of {} generation requests failed: {}", .failed.len(), .slots.len(), failed_ids(.failed))]
pub struct PartialBatch {
    pub slots: Vec<Option<GenerationRecord>>,
    pub failed: Vec<(String, BackendError)>,
}

fn failed_ids(failed: &[(String, BackendError)]) -> String {
    failed.iter().map(|(id, _)| id.as_str()).collect::<Vec<_>>().join(", ")
}

/// Generates for every request, reading the cache first and appending new
/// results to it. Output order matches `requests`.
pub fn generate_batch(
    requests: &[GenerationRequest],
    backend: &dyn GenerationBackend,
    cache: &GenerationCache,
    opts: &BatchOptions,
) -> Result<Vec<GenerationRecord>, PartialBatch> {
    let backend_id = backend.backend_id();
    let mut slots: Vec<Option<GenerationRecord>> = vec![None; requests.len()];
    let mut failed: Vec<Option<BackendError>> = vec![None; requests.len()];
    let mut misses = Vec::new();

    for (i, req) in requests.iter().enumerate() {
        let n = match req.n_passages() {
            Ok(n) => n,
            Err(e) => {
                failed[i] = Some(BackendError::Protocol(format!("bad source: {e}")));
                continue;
            }
        };
        match cache.get(&req.source, backend_id) {
            Some(hit) => slots[i] = Some(record(req, hit, backend_id, n)),
            None => misses.push((i, n)),
        }
    }
    tracing::info!(total = requests.len(), misses = misses.len(), "generation batch");

    let results = Mutex::new(Vec::with_capacity(misses.len()));
    let next = AtomicUsize::new(0);
    let workers = opts.max_in_flight.clamp(1, misses.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(i, n)) = misses.get(k) else { break };
                let req = &requests[i];
                let started = Instant::now();
                let outcome = opts
                    .retry
                    .run(|| backend.generate(&req.source, req.max_new_tokens))
                    .and_then(|raw| {
                        let value = CachedGeneration {
                            raw,
                            latency_ms: started.elapsed().as_millis() as u64,
                        };
                        cache
                            .insert(&req.source, backend_id, value.clone())
                            .map_err(|e| BackendError::Transport(format!("cache write: {e}")))?;
                        Ok(value)
                    });
                results
                    .lock()
                    .expect("results lock")
                    .push((i, outcome.map(|v| record(req, v, backend_id, n))));
            });
        }
    });

    for (i, outcome) in results.into_inner().expect("results lock") {
        match outcome {
            Ok(rec) => slots[i] = Some(rec),
            Err(e) => failed[i] = Some(e),
        }
    }
    let failed: Vec<(String, BackendError)> = failed
        .into_iter()
        .enumerate()
        .filter_map(|(i, e)| e.map(|e| (requests[i].query_id.clone(), e)))
        .collect();
    if failed.is_empty() {
        Ok(slots.into_iter().map(|s| s.expect("every slot filled")).collect())
    } else {
        Err(PartialBatch { slots, failed })
    }
}

fn record(req: &GenerationRequest, gen: CachedGeneration, backend_id: &str, n: usize) -> GenerationRecord {
    GenerationRecord {
        query_id: req.query_id.clone(),
        parsed: parse_generated(&gen.raw, n),
        raw: gen.raw,
        backend_id: backend_id.to_string(),
        latency_ms: gen.latency_ms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Echo {
        calls: AtomicUsize,
        fail_on: Option<&'static str>,
    }

    impl Echo {
        fn new() -> Self {
            Self {
                calls: AtomicUsize::new(0),
                fail_on: None,
            }
        }
    }

    impl GenerationBackend for Echo {
        fn backend_id(&self) -> &str {
            "echo"
        }

        fn generate(&self, source: &str, _: usize) -> Result<String, BackendError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if self.fail_on.is_some_and(|q| source.contains(q)) {
                return Err(BackendError::Transport("connection refused".into()));
            }
            Ok("p0: ok".into())
        }
    }

    fn req(id: &str) -> GenerationRequest {
        GenerationRequest::new(id, format!("s:conv </s> q: {id} </s> p0: text </s>"), 16).unwrap()
    }

    fn opts() -> BatchOptions {
        BatchOptions {
            max_in_flight: 3,
            retry: RetryPolicy::no_delay(2),
        }
    }

    #[test]
    fn empty_batch() {
        let out = generate_batch(&[], &Echo::new(), &GenerationCache::in_memory(), &opts()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn cache_hits_skip_backend() {
        let cache = GenerationCache::in_memory();
        let reqs = vec![req("a"), req("b"), req("c")];
        cache
            .insert(&reqs[1].source, "echo", CachedGeneration { raw: "p0: cached".into(), latency_ms: 3 })
            .unwrap();
        let backend = Echo::new();
        let out = generate_batch(&reqs, &backend, &cache, &opts()).unwrap();
        assert_eq!(backend.calls.load(Ordering::SeqCst), 2);
        let ids: Vec<_> = out.iter().map(|r| r.query_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(out[1].parsed.answer, "cached");
        assert_eq!(out[0].parsed.answer, "ok");
        assert_eq!(out[0].parsed.ranking, [0]);

        let again = generate_batch(&reqs, &backend, &cache, &opts()).unwrap();
        assert_eq!(backend.calls.load(Ordering::SeqCst), 2);
        assert_eq!(again, out);
    }

    #[test]
    fn partial_failure_keeps_slots() {
        let backend = Echo {
            calls: AtomicUsize::new(0),
            fail_on: Some("q: b "),
        };
        let reqs = vec![req("a"), req("b"), req("c")];
        let err = generate_batch(&reqs, &backend, &GenerationCache::in_memory(), &opts()).unwrap_err();
        assert_eq!(err.slots.len(), 3);
        assert!(err.slots[0].is_some() && err.slots[1].is_none() && err.slots[2].is_some());
        assert_eq!(err.failed.len(), 1);
        assert_eq!(err.failed[0].0, "b");
        assert!(matches!(err.failed[0].1, BackendError::Exhausted { attempts: 2, .. }));
        // two attempts for b, one each for a and c
        assert_eq!(backend.calls.load(Ordering::SeqCst), 4);
        assert!(err.to_string().contains("1 of 3"));
    }

    #[test]
    fn request_requires_valid_source() {
        assert!(GenerationRequest::new("x", "not a source", 8).is_err());
        assert_eq!(req("a").style, crate::seqcodec::StyleTag::Conv);
    }
}
