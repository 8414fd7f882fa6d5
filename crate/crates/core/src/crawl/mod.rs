//! The crawl procedure: per-seed login, friend-link harvesting to the
//! configured BFS depth, extraction of every frontier profile, logout.

pub mod bfs;
pub mod session;
pub mod sink;

use std::io;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::config_io::{read_links_file, ConfigError, CrawlConfig, SeedProfile};
use crate::dom::extract::{
    extract_friend_links, extract_personal_attributes, extract_post_attributes, ExtractError,
};
use crate::dom::RuleSet;

pub use bfs::{bfs_frontier, BfsError};
pub use session::{Clock, LoginError, ManualClock, Pacing, Session, SystemClock};
pub use sink::{LinkSink, RawSink};

#[derive(Debug, Error)]
pub enum CrawlError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(#[from] ConfigError),
    #[error("no seed could log in: {}", .0.join("; "))]
    AllSeedsFailedLogin(Vec<String>),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Wait after the k-th failed attempt; the last entry repeats.
    pub backoff: Vec<Duration>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            backoff: vec![Duration::from_secs(1), Duration::from_secs(4)],
        }
    }
}

impl RetryPolicy {
    pub fn immediate(max_attempts: u32) -> Self {
        RetryPolicy {
            max_attempts,
            backoff: vec![Duration::ZERO],
        }
    }

    pub fn delay_after(&self, failed_attempt: u32) -> Duration {
        let i = (failed_attempt as usize).saturating_sub(1);
        self.backoff
            .get(i)
            .or(self.backoff.last())
            .copied()
            .unwrap_or_default()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrawlTask {
    pub profile_url: Url,
    /// Seed index (1-based row of the seed file).
    pub discovered_via: usize,
    pub depth: usize,
    pub attempt: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed_index: usize,
    pub profile_id: String,
    pub logged_in: bool,
    pub frontier: usize,
    pub profiles_attempted: usize,
    pub profiles_captured: usize,
    pub posts_captured: usize,
    pub fetch_errors: usize,
    /// Profiles that could not be captured, for a re-extraction pass.
    pub failed_urls: Vec<String>,
    pub error: Option<String>,
    /// Stopped by the abort flag before finishing.
    pub aborted: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrawlSummary {
    pub profiles_attempted: usize,
    pub profiles_captured: usize,
    pub posts_captured: usize,
    pub fetch_errors: usize,
    pub duration_ms: u64,
    pub per_seed: Vec<SeedSummary>,
}

impl CrawlSummary {
    fn add_seed(&mut self, s: SeedSummary) {
        self.profiles_attempted += s.profiles_attempted;
        self.profiles_captured += s.profiles_captured;
        self.posts_captured += s.posts_captured;
        self.fetch_errors += s.fetch_errors;
        self.per_seed.push(s);
    }

    /// Sums `other` into `self`; per-seed entries are concatenated.
    pub fn merge(&mut self, other: CrawlSummary) {
        self.duration_ms = self.duration_ms.max(other.duration_ms);
        for s in other.per_seed {
            self.add_seed(s);
        }
        self.per_seed.sort_by_key(|s| s.seed_index);
    }

    pub fn failed_urls(&self) -> Vec<String> {
        self.per_seed
            .iter()
            .flat_map(|s| s.failed_urls.iter().cloned())
            .collect()
    }
}

pub type SeedCallback = Arc<dyn Fn(&SeedSummary) + Send + Sync>;

#[derive(Clone)]
pub struct CrawlOptions {
    pub rules: Arc<RuleSet>,
    pub retry: RetryPolicy,
    pub clock: Arc<dyn Clock>,
    /// Called when a seed finishes (not when it is aborted).
    pub on_seed_done: Option<SeedCallback>,
    /// Checked before each seed and each profile.
    pub abort: Option<Arc<AtomicBool>>,
}

impl Default for CrawlOptions {
    fn default() -> Self {
        CrawlOptions {
            rules: Arc::new(RuleSet::default()),
            retry: RetryPolicy::default(),
            clock: Arc::new(SystemClock::default()),
            on_seed_done: None,
            abort: None,
        }
    }
}

impl CrawlOptions {
    fn aborted(&self) -> bool {
        self.abort.as_ref().is_some_and(|a| a.load(Ordering::SeqCst))
    }
}

/// URL of a profile on `endpoint`.
pub fn profile_url(endpoint: &Url, profile_id: &str) -> Url {
    let mut url = endpoint.clone();
    url.set_path(&format!("/profile/{profile_id}"));
    url.set_query(None);
    url.set_fragment(None);
    url
}

pub fn crawl(seeds: &[SeedProfile], config: &CrawlConfig, endpoint: &Url) -> Result<CrawlSummary, CrawlError> {
    crawl_with(seeds, config, endpoint, &CrawlOptions::default())
}

pub fn crawl_with(
    seeds: &[SeedProfile],
    config: &CrawlConfig,
    endpoint: &Url,
    options: &CrawlOptions,
) -> Result<CrawlSummary, CrawlError> {
    config.validate_against_seeds(seeds)?;
    let indexed: Vec<(usize, SeedProfile)> = seeds.iter().cloned().enumerate().map(|(i, s)| (i + 1, s)).collect();
    crawl_assigned(&indexed, config, endpoint, options)
}

/// Crawls the given `(seed_index, seed)` pairs with
/// `config.sessions_per_agent` concurrent sessions, seeds dealt
/// round-robin. In re-extraction mode only the designated seed (if among
/// `seeds`) does any work.
pub fn crawl_assigned(
    seeds: &[(usize, SeedProfile)],
    config: &CrawlConfig,
    endpoint: &Url,
    options: &CrawlOptions,
) -> Result<CrawlSummary, CrawlError> {
    config.validate()?;
    let started = Instant::now();
    let reextract = match (&config.reextract_links_path, config.seed_profile_index) {
        (Some(path), Some(_)) => Some(read_links_file(path)?.into_urls()),
        _ => None,
    };
    let work: Vec<&(usize, SeedProfile)> = match config.seed_profile_index {
        Some(index) => seeds.iter().filter(|(i, _)| *i == index).collect(),
        None => seeds.iter().collect(),
    };
    let raw = RawSink::open(&config.output_path)?;
    let links = match reextract {
        Some(_) => None,
        None => Some(LinkSink::open(&config.friend_links_path)?),
    };
    let workers = config.sessions_per_agent.clamp(1, work.len().max(1));
    let job = SeedJob {
        config,
        endpoint,
        options,
        raw: &raw,
        links: links.as_ref(),
        reextract: reextract.as_deref(),
    };
    let mut results: Vec<SeedSummary> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let mine: Vec<_> = work.iter().skip(w).step_by(workers).copied().collect();
                let job = &job;
                scope.spawn(move || {
                    let mut out = Vec::new();
                    for (index, seed) in mine {
                        if job.options.aborted() {
                            break;
                        }
                        let summary = job.run(*index, seed);
                        if !summary.aborted {
                            if let Some(cb) = &job.options.on_seed_done {
                                cb(&summary);
                            }
                        }
                        out.push(summary);
                    }
                    out
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("session worker panicked"))
            .collect()
    });
    results.sort_by_key(|s| s.seed_index);
    if !results.is_empty() && results.iter().all(|s| !s.logged_in) {
        return Err(CrawlError::AllSeedsFailedLogin(
            results.iter().filter_map(|s| s.error.clone()).collect(),
        ));
    }
    let mut summary = CrawlSummary::default();
    for s in results {
        summary.add_seed(s);
    }
    summary.duration_ms = started.elapsed().as_millis() as u64;
    Ok(summary)
}

struct SeedJob<'a> {
    config: &'a CrawlConfig,
    endpoint: &'a Url,
    options: &'a CrawlOptions,
    raw: &'a RawSink,
    links: Option<&'a LinkSink>,
    reextract: Option<&'a [Url]>,
}

fn with_retry<T>(
    policy: &RetryPolicy,
    clock: &dyn Clock,
    task: &mut CrawlTask,
    mut f: impl FnMut() -> Result<T, ExtractError>,
) -> Result<T, ExtractError> {
    task.attempt = 1;
    loop {
        match f() {
            Ok(v) => return Ok(v),
            Err(e) if e.is_transient() && task.attempt < policy.max_attempts => {
                log::debug!("{} attempt {} failed: {e}", task.profile_url, task.attempt);
                clock.sleep(policy.delay_after(task.attempt));
                task.attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Micros, true)
}

impl SeedJob<'_> {
    fn run(&self, index: usize, seed: &SeedProfile) -> SeedSummary {
        let mut summary = SeedSummary {
            seed_index: index,
            profile_id: seed.profile_id.clone(),
            ..SeedSummary::default()
        };
        let pacing = Pacing {
            min_ms: self.config.min_delay_ms,
            max_ms: self.config.max_delay_ms,
        };
        let mut session = match Session::login(seed, index, self.endpoint, pacing, Arc::clone(&self.options.clock)) {
            Ok(s) => s,
            Err(e) => {
                log::warn!("seed {index} ({}) login failed: {e}", seed.profile_id);
                summary.error = Some(e.to_string());
                return summary;
            }
        };
        summary.logged_in = true;
        let tasks = match self.reextract {
            Some(urls) => urls
                .iter()
                .map(|u| CrawlTask {
                    profile_url: u.clone(),
                    discovered_via: index,
                    depth: 1,
                    attempt: 1,
                })
                .collect(),
            None => match self.harvest(&mut session, seed, &mut summary) {
                Some(t) => t,
                None => {
                    session.logout();
                    return summary;
                }
            },
        };
        summary.frontier = tasks.len();
        self.extract_all(&mut session, tasks, &mut summary);
        session.logout();
        summary
    }

    /// BFS over friend lists. `None` when the seed's own list is unavailable.
    fn harvest(&self, session: &mut Session, seed: &SeedProfile, summary: &mut SeedSummary) -> Option<Vec<CrawlTask>> {
        let root = profile_url(self.endpoint, &seed.profile_id);
        let rules = &self.options.rules;
        let mut skipped = 0;
        let result = bfs_frontier(&[root], self.config.depth, |url, depth| {
            let mut task = CrawlTask {
                profile_url: url.clone(),
                discovered_via: summary.seed_index,
                depth,
                attempt: 1,
            };
            let found = with_retry(&self.options.retry, &*self.options.clock, &mut task, || {
                extract_friend_links(session, rules, url)
            });
            match found {
                Ok(list) => Ok(list.into_urls()),
                Err(e) if depth == 0 || matches!(e, ExtractError::AuthExpired { .. }) => Err(e),
                Err(e) => {
                    log::warn!("friend list of {url} unavailable: {e}");
                    skipped += 1;
                    Ok(Vec::new())
                }
            }
        });
        summary.fetch_errors += skipped;
        match result {
            Ok(found) => {
                let tasks: Vec<CrawlTask> = found
                    .into_iter()
                    .map(|(u, depth)| CrawlTask {
                        profile_url: u,
                        discovered_via: summary.seed_index,
                        depth,
                        attempt: 1,
                    })
                    .collect();
                if let Some(links) = self.links {
                    if let Err(e) = links.append(tasks.iter().map(|t| &t.profile_url)) {
                        log::error!("cannot write friend links: {e}");
                        summary.error = Some(e.to_string());
                    }
                }
                Some(tasks)
            }
            Err(e) => {
                log::warn!("seed {} harvesting failed: {e}", summary.seed_index);
                summary.fetch_errors += 1;
                summary.error = Some(e.to_string());
                None
            }
        }
    }

    fn extract_all(&self, session: &mut Session, tasks: Vec<CrawlTask>, summary: &mut SeedSummary) {
        let rules = &self.options.rules;
        let total_post = self.config.total_post;
        let mut remaining = tasks.into_iter();
        while let Some(mut task) = remaining.next() {
            if self.options.aborted() {
                summary.aborted = true;
                return;
            }
            summary.profiles_attempted += 1;
            let url = task.profile_url.clone();
            let captured = with_retry(&self.options.retry, &*self.options.clock, &mut task, || {
                let profile = extract_personal_attributes(session, rules, &url)?;
                let posts = extract_post_attributes(session, rules, &url, total_post)?;
                Ok((profile, posts))
            });
            match captured {
                Ok((profile, posts)) => {
                    let at = timestamp();
                    let mut rows = profile.to_rows(summary.seed_index, &at);
                    for p in &posts {
                        rows.extend(p.to_rows(summary.seed_index, &at));
                    }
                    if let Err(e) = self.raw.append(&rows) {
                        log::error!("cannot append to {}: {e}", self.raw.path().display());
                        summary.fetch_errors += 1;
                        summary.failed_urls.push(url.to_string());
                        continue;
                    }
                    summary.profiles_captured += 1;
                    summary.posts_captured += posts.len();
                }
                Err(e) => {
                    log::warn!("{url}: {e}");
                    summary.fetch_errors += 1;
                    summary.failed_urls.push(url.to_string());
                    if let ExtractError::AuthExpired { .. } = e {
                        summary.error = Some(e.to_string());
                        summary.failed_urls.extend(remaining.map(|t| t.profile_url.to_string()));
                        return;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn retry_delays() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay_after(1), Duration::from_secs(1));
        assert_eq!(p.delay_after(2), Duration::from_secs(4));
        assert_eq!(p.delay_after(5), Duration::from_secs(4));
    }

    #[test]
    fn retry_stops_at_max_attempts_and_skips_client_errors() {
        let clock = ManualClock::default();
        let mut task = CrawlTask {
            profile_url: Url::parse("http://h/profile/u1").unwrap(),
            discovered_via: 1,
            depth: 1,
            attempt: 1,
        };
        let mut calls = 0;
        let transient = || ExtractError::Fetch {
            page_no: 1,
            url: String::new(),
            status: Some(503),
            message: String::new(),
        };
        let r: Result<(), _> = with_retry(&RetryPolicy::default(), &clock, &mut task, || {
            calls += 1;
            Err(transient())
        });
        assert!(r.is_err());
        assert_eq!(calls, 3);
        assert_eq!(task.attempt, 3);
        assert_eq!(clock.sleeps(), [Duration::from_secs(1), Duration::from_secs(4)]);

        let mut calls = 0;
        let r: Result<(), _> = with_retry(&RetryPolicy::default(), &clock, &mut task, || {
            calls += 1;
            Err(ExtractError::Fetch {
                page_no: 1,
                url: String::new(),
                status: Some(404),
                message: String::new(),
            })
        });
        assert!(r.is_err());
        assert_eq!(calls, 1);
    }

    #[test]
    fn profile_url_form() {
        let e = Url::parse("http://127.0.0.1:8480/").unwrap();
        assert_eq!(profile_url(&e, "u7").as_str(), "http://127.0.0.1:8480/profile/u7");
    }

    #[test]
    fn summary_merge_sums() {
        let mut a = CrawlSummary::default();
        a.add_seed(SeedSummary {
            seed_index: 2,
            profiles_attempted: 3,
            profiles_captured: 2,
            ..SeedSummary::default()
        });
        let mut b = CrawlSummary::default();
        b.add_seed(SeedSummary {
            seed_index: 1,
            profiles_attempted: 4,
            profiles_captured: 4,
            posts_captured: 9,
            ..SeedSummary::default()
        });
        a.merge(b);
        assert_eq!((a.profiles_attempted, a.profiles_captured, a.posts_captured), (7, 6, 9));
        assert_eq!(a.per_seed[0].seed_index, 1);
    }
}
