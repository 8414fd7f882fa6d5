//! Logged-in HTTP sessions with politeness pacing.

use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;
use url::Url;

use crate::config_io::SeedProfile;
use crate::dom::extract::{FetchFailure, PageFetcher};

pub const REQUEST_TIMEOUT: Duration = Duration::from_secs(10);

/// Time source for pacing and backoff, swappable in tests.
pub trait Clock: Send + Sync {
    /// Monotonic time since an arbitrary origin.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock {
            origin: Instant::now(),
        }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        if !d.is_zero() {
            std::thread::sleep(d);
        }
    }
}

/// A clock that only moves when slept on. Records every sleep.
#[derive(Default)]
pub struct ManualClock {
    state: Mutex<(Duration, Vec<Duration>)>,
}

impl ManualClock {
    pub fn sleeps(&self) -> Vec<Duration> {
        self.state.lock().expect("clock lock").1.clone()
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        self.state.lock().expect("clock lock").0
    }

    fn sleep(&self, d: Duration) {
        let mut s = self.state.lock().expect("clock lock");
        s.0 += d;
        s.1.push(d);
    }
}

/// Uniform delay in `[min, max]` milliseconds between consecutive fetches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pacing {
    pub min_ms: u64,
    pub max_ms: u64,
}

impl Pacing {
    pub fn none() -> Self {
        Pacing { min_ms: 0, max_ms: 0 }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Duration {
        let ms = if self.max_ms > self.min_ms {
            rng.gen_range(self.min_ms..=self.max_ms)
        } else {
            self.min_ms
        };
        Duration::from_millis(ms)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LoginError {
    #[error("credentials rejected for {0}")]
    BadCredentials(String),
    #[error("endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("unexpected login response: {0}")]
    Protocol(String),
}

#[derive(Deserialize)]
struct TokenResponse {
    token: String,
}

/// One logged-in browsing context. Fetches are sequential and paced.
pub struct Session {
    pub seed_index: usize,
    pub established_at: DateTime<Utc>,
    pub request_count: u64,
    token: String,
    endpoint: Url,
    agent: ureq::Agent,
    pacing: Pacing,
    rng: ChaCha8Rng,
    clock: Arc<dyn Clock>,
    fetch_times: Vec<Duration>,
}

fn http_agent() -> ureq::Agent {
    ureq::AgentBuilder::new()
        .timeout_connect(REQUEST_TIMEOUT)
        .timeout(REQUEST_TIMEOUT)
        .build()
}

impl Session {
    /// Logs in as `seed` against `endpoint`.
    pub fn login(
        seed: &SeedProfile,
        seed_index: usize,
        endpoint: &Url,
        pacing: Pacing,
        clock: Arc<dyn Clock>,
    ) -> Result<Session, LoginError> {
        let agent = http_agent();
        let url = endpoint
            .join("/login")
            .map_err(|e| LoginError::Protocol(e.to_string()))?;
        let response = agent
            .post(url.as_str())
            .send_form(&[("login", &seed.login_name), ("secret", &seed.secret)]);
        let body = match response {
            Ok(r) => r.into_string().map_err(|e| LoginError::Protocol(e.to_string()))?,
            Err(ureq::Error::Status(401 | 403, _)) => {
                return Err(LoginError::BadCredentials(seed.login_name.clone()))
            }
            Err(ureq::Error::Status(code, _)) => {
                return Err(LoginError::Protocol(format!("HTTP {code}")))
            }
            Err(ureq::Error::Transport(t)) => {
                return Err(LoginError::EndpointUnreachable(t.to_string()))
            }
        };
        let token: TokenResponse =
            serde_json::from_str(&body).map_err(|e| LoginError::Protocol(e.to_string()))?;
        if token.token.is_empty() {
            return Err(LoginError::Protocol("empty token".into()));
        }
        Ok(Session {
            seed_index,
            established_at: Utc::now(),
            request_count: 0,
            token: token.token,
            endpoint: endpoint.clone(),
            agent,
            pacing,
            rng: ChaCha8Rng::seed_from_u64(seed_index as u64),
            clock,
            fetch_times: Vec::new(),
        })
    }

    pub fn token(&self) -> &str {
        &self.token
    }

    /// Clock readings at the start of each fetch.
    pub fn fetch_times(&self) -> &[Duration] {
        &self.fetch_times
    }

    /// Ends the session on the server. Failures are logged, not returned:
    /// an expired session is already over.
    pub fn logout(self) {
        let Ok(url) = self.endpoint.join("/logout") else {
            return;
        };
        let result = self
            .agent
            .post(url.as_str())
            .set("Authorization", &format!("Bearer {}", self.token))
            .call();
        if let Err(e) = result {
            log::debug!("logout for seed {}: {e}", self.seed_index);
        }
    }

    pub fn sleep(&self, d: Duration) {
        self.clock.sleep(d);
    }
}

impl PageFetcher for Session {
    fn fetch(&mut self, url: &Url) -> Result<String, FetchFailure> {
        if !self.fetch_times.is_empty() {
            let delay = self.pacing.draw(&mut self.rng);
            self.clock.sleep(delay);
        }
        self.fetch_times.push(self.clock.now());
        self.request_count += 1;
        let response = self
            .agent
            .get(url.as_str())
            .set("Authorization", &format!("Bearer {}", self.token))
            .call();
        match response {
            Ok(r) => r
                .into_string()
                .map_err(|e| FetchFailure::Transport(e.to_string())),
            Err(ureq::Error::Status(401, _)) => Err(FetchFailure::Unauthorized),
            Err(ureq::Error::Status(code, _)) => Err(FetchFailure::Status(code)),
            Err(ureq::Error::Transport(t)) => Err(FetchFailure::Transport(t.to_string())),
        }
    }
}
