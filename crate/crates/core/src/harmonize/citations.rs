//! Citation-count enrichment against the Semantic Scholar batch endpoint.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::HarmonizeError;

pub const API_KEY_ENV: &str = "SDQ_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CitationClientConfig {
    pub base_url: String,
    pub batch_size: usize,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    /// Minimum spacing between request starts, shared by all workers.
    pub min_interval_ms: u64,
    pub concurrency: usize,
    pub timeout_secs: u64,
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl Default for CitationClientConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.semanticscholar.org/graph/v1".into(),
            batch_size: 100,
            max_retries: 3,
            retry_backoff_ms: 1000,
            min_interval_ms: 1000,
            concurrency: 1,
            timeout_secs: 30,
            api_key: std::env::var(API_KEY_ENV).ok(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationCounts {
    pub citations: u64,
    pub influential_citations: u64,
}

struct RateLimiter {
    next: Mutex<Instant>,
    interval: Duration,
}

impl RateLimiter {
    fn wait(&self) {
        let sleep_for = {
            let mut next = self.next.lock().expect("rate limiter lock");
            let now = Instant::now();
            let start = (*next).max(now);
            *next = start + self.interval;
            start - now
        };
        if !sleep_for.is_zero() {
            std::thread::sleep(sleep_for);
        }
    }
}

/// Fetches `(citations, influential citations)` for corpus ids. Ids the
/// upstream does not know are absent from the result, never zero.
pub fn fetch_citation_counts(
    ids: &[String],
    cfg: &CitationClientConfig,
) -> Result<BTreeMap<String, CitationCounts>, HarmonizeError> {
    if ids.is_empty() {
        return Ok(BTreeMap::new());
    }
    let batch = cfg.batch_size.max(1);
    let batches: Vec<&[String]> = ids.chunks(batch).collect();
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(cfg.timeout_secs.max(1))))
        .build()
        .into();
    let limiter = RateLimiter {
        next: Mutex::new(Instant::now()),
        interval: Duration::from_millis(cfg.min_interval_ms),
    };
    let cursor = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<Vec<Option<CitationCounts>>, HarmonizeError>>>> =
        Mutex::new((0..batches.len()).map(|_| None).collect());

    let worker = || loop {
        let i = cursor.fetch_add(1, Ordering::SeqCst);
        if i >= batches.len() {
            break;
        }
        let r = fetch_batch(&agent, &limiter, batches[i], cfg);
        let failed = r.is_err();
        results.lock().expect("results lock")[i] = Some(r);
        if failed {
            // stop handing out further batches
            cursor.store(batches.len(), Ordering::SeqCst);
        }
    };
    let workers = cfg.concurrency.clamp(1, batches.len());
    std::thread::scope(|s| {
        for _ in 1..workers {
            s.spawn(worker);
        }
        worker();
    });

    let mut out = BTreeMap::new();
    for (chunk, r) in batches
        .iter()
        .zip(results.into_inner().expect("results lock"))
    {
        let Some(r) = r else { continue };
        for (id, counts) in chunk.iter().zip(r?) {
            if let Some(c) = counts {
                out.insert(id.clone(), c);
            }
        }
    }
    Ok(out)
}

fn fetch_batch(
    agent: &ureq::Agent,
    limiter: &RateLimiter,
    ids: &[String],
    cfg: &CitationClientConfig,
) -> Result<Vec<Option<CitationCounts>>, HarmonizeError> {
    let url = format!(
        "{}/paper/batch?fields=citationCount,influentialCitationCount",
        cfg.base_url.trim_end_matches('/')
    );
    let body = serde_json::json!({ "ids": ids });
    let mut attempt = 0;
    loop {
        limiter.wait();
        let mut req = agent.post(&url);
        if let Some(key) = &cfg.api_key {
            req = req.header("x-api-key", key);
        }
        let outcome: Result<(), (bool, String)> = match req.send_json(&body) {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                if status == 200 {
                    let text = resp
                        .body_mut()
                        .read_to_string()
                        .map_err(|e| HarmonizeError::Http(e.to_string()))?;
                    return parse_batch_response(&text, ids.len());
                }
                let retryable = status == 429 || status >= 500;
                Err((retryable, format!("HTTP status {status}")))
            }
            Err(e) => Err((true, e.to_string())),
        };
        let (retryable, msg) = outcome.unwrap_err();
        if !retryable || attempt >= cfg.max_retries {
            return Err(HarmonizeError::Http(format!(
                "{msg} after {} attempt(s)",
                attempt + 1
            )));
        }
        attempt += 1;
        std::thread::sleep(Duration::from_millis(
            cfg.retry_backoff_ms << (attempt - 1).min(6),
        ));
    }
}

/// The batch endpoint answers with an array aligned to the request ids,
/// holding `null` for unknown ids.
pub fn parse_batch_response(
    text: &str,
    expected: usize,
) -> Result<Vec<Option<CitationCounts>>, HarmonizeError> {
    let malformed = |m: &str| HarmonizeError::MalformedResponse(m.to_string());
    let v: Value = serde_json::from_str(text).map_err(|e| malformed(&e.to_string()))?;
    let arr = v
        .as_array()
        .ok_or_else(|| malformed("expected a JSON array"))?;
    if arr.len() != expected {
        return Err(malformed(&format!(
            "expected {expected} entries, got {}",
            arr.len()
        )));
    }
    arr.iter()
        .map(|e| match e {
            Value::Null => Ok(None),
            Value::Object(o) => {
                let get = |k: &str| -> Result<u64, HarmonizeError> {
                    match o.get(k) {
                        None | Some(Value::Null) => Ok(0),
                        Some(v) => v
                            .as_u64()
                            .ok_or_else(|| malformed(&format!("{k} is not a count"))),
                    }
                };
                if o.get("citationCount").is_none_or(|v| v.is_null()) {
                    return Ok(None);
                }
                Ok(Some(CitationCounts {
                    citations: get("citationCount")?,
                    influential_citations: get("influentialCitationCount")?,
                }))
            }
            _ => Err(malformed("entry is neither null nor an object")),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_aligned_response_with_nulls() {
        let r = parse_batch_response(
            r#"[{"paperId":"a","citationCount":5,"influentialCitationCount":1},null]"#,
            2,
        )
        .unwrap();
        assert_eq!(
            r,
            vec![
                Some(CitationCounts {
                    citations: 5,
                    influential_citations: 1
                }),
                None
            ]
        );
    }

    #[test]
    fn length_mismatch_is_malformed() {
        assert!(matches!(
            parse_batch_response("[null]", 2),
            Err(HarmonizeError::MalformedResponse(_))
        ));
        assert!(parse_batch_response("{}", 0).is_err());
        assert!(parse_batch_response("[1]", 1).is_err());
    }

    #[test]
    fn empty_ids_make_no_requests() {
        let cfg = CitationClientConfig {
            base_url: "http://127.0.0.1:9".into(),
            ..Default::default()
        };
        assert!(fetch_citation_counts(&[], &cfg).unwrap().is_empty());
    }
}
