use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::embed::{Embedder, Embedding};
use super::SearchError;

/// One batch's outcome, filled in by whichever worker sends it.
type BatchSlot = Mutex<Option<Result<Vec<Embedding>, SearchError>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteOptions {
    pub attempts: u32,
    /// Delay before the first retry; doubles on each further retry.
    pub initial_backoff_ms: u64,
    pub max_in_flight: usize,
    pub batch_size: usize,
    pub timeout_ms: u64,
}

impl Default for RemoteOptions {
    fn default() -> Self {
        RemoteOptions {
            attempts: 3,
            initial_backoff_ms: 200,
            max_in_flight: 4,
            batch_size: 32,
            timeout_ms: 30_000,
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    model: String,
    vectors: Vec<Vec<f64>>,
}

/// Client for an embedding service speaking
/// `POST {"texts": [...]}` → `{"model": id, "vectors": [[...], ...]}`.
pub struct RemoteEmbedder {
    url: String,
    agent: ureq::Agent,
    options: RemoteOptions,
    model: String,
    dimension: usize,
}

impl std::fmt::Debug for RemoteEmbedder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteEmbedder")
            .field("url", &self.url)
            .field("model", &self.model)
            .field("dimension", &self.dimension)
            .finish()
    }
}

impl RemoteEmbedder {
    /// Probes the service once to learn its model name and dimension.
    pub fn connect(url: impl Into<String>, options: RemoteOptions) -> Result<Self, SearchError> {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(options.timeout_ms)))
            .build();
        let mut client = RemoteEmbedder {
            url: url.into(),
            agent: config.into(),
            options,
            model: String::new(),
            dimension: 0,
        };
        let probe = client.request(&["dimension probe"])?;
        let first = probe.vectors.first().ok_or_else(|| SearchError::Remote("probe returned no vectors".into()))?;
        if first.is_empty() {
            return Err(SearchError::Remote("probe returned an empty vector".into()));
        }
        client.dimension = first.len();
        client.model = probe.model;
        Ok(client)
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn request(&self, texts: &[&str]) -> Result<EmbedResponse, SearchError> {
        let mut delay = Duration::from_millis(self.options.initial_backoff_ms);
        let mut last = String::new();
        for attempt in 0..self.options.attempts.max(1) {
            if attempt > 0 {
                thread::sleep(delay);
                delay *= 2;
            }
            let result = self
                .agent
                .post(&self.url)
                .send_json(EmbedRequest { texts })
                .and_then(|mut resp| resp.body_mut().read_json::<EmbedResponse>());
            match result {
                Ok(resp) if resp.vectors.len() == texts.len() => return Ok(resp),
                Ok(resp) => {
                    return Err(SearchError::Remote(format!(
                        "asked for {} vectors, got {}",
                        texts.len(),
                        resp.vectors.len()
                    )))
                }
                Err(ureq::Error::StatusCode(code)) if (400..500).contains(&code) => {
                    return Err(SearchError::Remote(format!("service rejected request with status {code}")))
                }
                Err(e) => {
                    log::warn!("embedding request attempt {} failed: {e}", attempt + 1);
                    last = e.to_string();
                }
            }
        }
        Err(SearchError::RemoteUnavailable(last))
    }

    fn to_embeddings(&self, resp: EmbedResponse) -> Result<Vec<Embedding>, SearchError> {
        if resp.model != self.model {
            return Err(SearchError::Remote(format!("service switched model from `{}` to `{}`", self.model, resp.model)));
        }
        resp.vectors
            .into_iter()
            .map(|v| {
                if v.len() != self.dimension {
                    return Err(SearchError::Remote(format!("vector has dimension {}, expected {}", v.len(), self.dimension)));
                }
                let raw = Embedding::new(v);
                if !(raw.norm > 0.0 && raw.norm.is_finite()) {
                    return Err(SearchError::Remote("service returned a zero or non-finite vector".into()));
                }
                Ok(Embedding::new(raw.values.iter().map(|x| x / raw.norm).collect()))
            })
            .collect()
    }
}

impl Embedder for RemoteEmbedder {
    fn id(&self) -> &str {
        &self.model
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Embedding, SearchError> {
        Ok(self.embed_batch(&[text])?.remove(0))
    }

    /// Sends batches concurrently, at most `max_in_flight` at a time.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>, SearchError> {
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(SearchError::EmptyText);
        }
        let batches: Vec<&[&str]> = texts.chunks(self.options.batch_size.max(1)).collect();
        let results: Vec<BatchSlot> = batches.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.options.max_in_flight.clamp(1, batches.len().max(1));
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(batch) = batches.get(i) else { break };
                    let r = self.request(batch).and_then(|resp| self.to_embeddings(resp));
                    *results[i].lock().expect("result slot") = Some(r);
                });
            }
        });
        let mut out = Vec::with_capacity(texts.len());
        for slot in results {
            out.extend(slot.into_inner().expect("result slot").expect("every batch ran")?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::AtomicU32;
    use std::sync::Arc;

    /// One-request-per-connection HTTP stub. The first `fail_first`
    /// requests get a 503.
    fn serve(fail_first: u32) -> (String, Arc<AtomicU32>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/embed", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicU32::new(0));
        let counter = hits.clone();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let n = counter.fetch_add(1, Ordering::SeqCst);
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                let (status, payload) = if n < fail_first {
                    ("503 Service Unavailable", "{}".to_string())
                } else {
                    let req: serde_json::Value = serde_json::from_slice(&body).unwrap();
                    let vectors: Vec<Vec<f64>> = req["texts"]
                        .as_array()
                        .unwrap()
                        .iter()
                        .map(|t| vec![t.as_str().unwrap().len() as f64, 1.0, 0.0])
                        .collect();
                    ("200 OK", serde_json::json!({"model": "toy-model", "vectors": vectors}).to_string())
                };
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{payload}",
                    payload.len()
                );
            }
        });
        (url, hits)
    }

    fn fast() -> RemoteOptions {
        RemoteOptions {
            initial_backoff_ms: 5,
            batch_size: 2,
            ..Default::default()
        }
    }

    #[test]
    fn batches_keep_order() {
        let (url, _) = serve(0);
        let e = RemoteEmbedder::connect(url, fast()).unwrap();
        assert_eq!(e.id(), "toy-model");
        assert_eq!(e.dimension(), 3);
        let texts = ["a", "bb", "ccc", "dddd", "eeeee"];
        let out = e.embed_batch(&texts).unwrap();
        for (t, v) in texts.iter().zip(&out) {
            let n = t.len() as f64;
            let norm = (n * n + 1.0).sqrt();
            assert!((v.values[0] - n / norm).abs() < 1e-12);
        }
    }

    #[test]
    fn retries_then_succeeds() {
        let (url, hits) = serve(2);
        let e = RemoteEmbedder::connect(url, fast()).unwrap();
        assert_eq!(hits.load(Ordering::SeqCst), 3);
        assert_eq!(e.id(), "toy-model");
    }

    #[test]
    fn gives_up_after_three_attempts() {
        let (url, hits) = serve(10);
        let err = RemoteEmbedder::connect(url, fast()).unwrap_err();
        assert!(matches!(err, SearchError::RemoteUnavailable(_)), "{err:?}");
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn unreachable_service() {
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let err = RemoteEmbedder::connect(format!("http://127.0.0.1:{port}/"), fast()).unwrap_err();
        assert!(matches!(err, SearchError::RemoteUnavailable(_)));
    }
}
