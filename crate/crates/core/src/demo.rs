//! The whole chain on a seeded fixture: generate, serve, coordinate,
//! normalize, verify, re-extract, load, filter, stats.
//!
//! Every stage writes its output under one directory:
//!
//! ```text
//! truth/          ground-truth tables
//! seeds.csv       seed accounts
//! crawl.cfg       crawl configuration
//! raw.csv         merged raw captures      friend_links.txt
//! structured/     profiles.csv posts.csv skipped.csv
//! report.csv      verification report      redo.txt
//! redo.cfg raw_redo.csv structured_redo/ report_redo.csv
//! store.db        deduplicated store
//! sample.csv      profiles in the filter cities
//! stats.json      statistics over the sample
//! ```

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;
use url::Url;

use crate::config_io::{write_seed_file, CrawlConfig, SeedProfile};
use crate::coordinator::{coordinate, CoordinatorError, CoordinatorOptions, Launcher};
use crate::crawl::{crawl_with, CrawlError, CrawlOptions, CrawlSummary, RetryPolicy};
use crate::fixture::server::{FaultPlan, FixtureServer, ServeError, ServerOptions};
use crate::fixture::truth::ground_truth;
use crate::fixture::{generate_network, FixtureError, FixtureNetwork, GeneratorParams, METRO_CITIES};
use crate::pipeline::analysis::behavior_summary;
use crate::pipeline::records::write_profiles_csv;
use crate::pipeline::verify::write_report;
use crate::pipeline::{
    emit_reextract_list, filter_by_city, load, normalize_raw, write_structured, BehaviorSummary, LoadReport,
    PipelineError, Store, Verdict, VerificationPolicy, VerificationReport,
};

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("fixture: {0}")]
    Fixture(#[from] FixtureError),
    #[error("serve: {0}")]
    Serve(#[from] ServeError),
    #[error("coordinate: {0}")]
    Coordinator(#[from] CoordinatorError),
    #[error("crawl: {0}")]
    Crawl(#[from] CrawlError),
    #[error("pipeline: {0}")]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("agents failed: {0:?}")]
    AgentsFailed(Vec<usize>),
}

#[derive(Clone, Debug)]
pub struct DemoParams {
    pub seed: u64,
    pub n: usize,
    pub out_dir: PathBuf,
    pub mean_degree: f64,
    pub disclosure_rate: f64,
    pub n_seeds: usize,
    pub agents: usize,
    pub sessions: usize,
    pub depth: usize,
    pub total_post: usize,
    /// Fraction of profiles whose first About response is truncated.
    pub truncate_fraction: f64,
    pub cities: Vec<String>,
    pub launcher: Launcher,
    /// Crawl this endpoint instead of serving the fixture in-process.
    pub endpoint: Option<Url>,
}

impl DemoParams {
    pub fn new(seed: u64, n: usize, out_dir: PathBuf) -> Self {
        DemoParams {
            seed,
            n,
            out_dir,
            mean_degree: 20.0,
            disclosure_rate: 0.6,
            n_seeds: 2,
            agents: 2,
            sessions: 1,
            depth: 16,
            total_post: 10,
            truncate_fraction: 0.05,
            cities: METRO_CITIES.iter().map(|c| c.to_string()).collect(),
            launcher: Launcher::InProcess,
            endpoint: None,
        }
    }

    pub fn generator(&self) -> GeneratorParams {
        GeneratorParams {
            n_profiles: self.n,
            mean_degree: self.mean_degree.min(self.n.saturating_sub(1).max(1) as f64),
            disclosure_rate: self.disclosure_rate,
            rng_seed: self.seed,
            ..GeneratorParams::default()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DemoReport {
    pub out_dir: PathBuf,
    pub endpoint: String,
    pub truncated: usize,
    pub crawl: CrawlSummary,
    pub raw_rows: usize,
    pub junk_first_pass: usize,
    pub reextracted: Option<CrawlSummary>,
    pub junk_after_reextraction: usize,
    pub load: LoadReport,
    pub load_redo: Option<LoadReport>,
    pub stored_profiles: usize,
    pub stored_posts: usize,
    pub store_conflicts: usize,
    pub filtered: usize,
    pub stats: BehaviorSummary,
    pub duration_ms: u64,
}

impl DemoReport {
    pub fn stats_path(&self) -> PathBuf {
        self.out_dir.join("stats.json")
    }
    pub fn store_path(&self) -> PathBuf {
        self.out_dir.join("store.db")
    }
}

/// Deterministic choice of `fraction` of the profiles.
pub fn truncation_set(network: &FixtureNetwork, fraction: f64, seed: u64) -> HashSet<String> {
    let k = (network.len() as f64 * fraction).round() as usize;
    let mut ids: Vec<&str> = network.nodes.iter().map(|p| p.profile_id.as_str()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7472_756e_6361_7465);
    ids.shuffle(&mut rng);
    ids.into_iter().take(k).map(str::to_string).collect()
}

fn junk_profiles(reports: &[VerificationReport]) -> usize {
    reports
        .iter()
        .filter(|r| r.verdict == Verdict::Junk)
        .map(|r| r.profile_id.as_str())
        .collect::<BTreeSet<_>>()
        .len()
}

pub fn run_demo(params: &DemoParams) -> Result<DemoReport, DemoError> {
    let started = Instant::now();
    let out = &params.out_dir;
    fs::create_dir_all(out)?;
    for stale in ["raw.csv", "friend_links.txt", "raw_redo.csv", "store.db", "redo.txt"] {
        let _ = fs::remove_file(out.join(stale));
    }

    let network = Arc::new(generate_network(&params.generator())?);
    ground_truth(&network).write_dir(&out.join("truth"))?;
    let truncated = truncation_set(&network, params.truncate_fraction, params.seed);

    let server = match &params.endpoint {
        Some(_) => None,
        None => Some(FixtureServer::serve(
            Arc::clone(&network),
            "127.0.0.1:0",
            ServerOptions {
                faults: FaultPlan {
                    truncate_about_once: truncated.clone(),
                    ..FaultPlan::default()
                },
                ..ServerOptions::default()
            },
        )?),
    };
    let endpoint = match (&params.endpoint, &server) {
        (Some(e), _) => e.clone(),
        (None, Some(s)) => s.base_url(),
        (None, None) => unreachable!(),
    };

    let seeds: Vec<SeedProfile> = network.accounts.iter().take(params.n_seeds.max(1)).map(|a| a.to_seed()).collect();
    write_seed_file(&out.join("seeds.csv"), &seeds)?;
    let mut config = CrawlConfig::new(out.join("friend_links.txt"), out.join("raw.csv"), params.total_post);
    config.depth = params.depth;
    config.agents = params.agents;
    config.sessions_per_agent = params.sessions;
    config.min_delay_ms = 0;
    config.max_delay_ms = 0;
    fs::write(out.join("crawl.cfg"), config.to_config_string())?;

    let mut coord = CoordinatorOptions::new(out.join("shards"));
    coord.launcher = params.launcher.clone();
    coord.retry = RetryPolicy::immediate(3);
    let outcome = coordinate(&seeds, &config, &endpoint, &coord)?;
    if !outcome.failed_agents().is_empty() {
        return Err(DemoError::AgentsFailed(outcome.failed_agents()));
    }

    let policy = VerificationPolicy::with_total_post(params.total_post);
    let normalized = normalize_raw(&config.output_path)?;
    write_structured(&out.join("structured"), &normalized)?;
    let store = Store::open(&out.join("store.db")).map_err(PipelineError::from)?;
    let (load_report, reports) = load(&store, &normalized.profiles, &normalized.posts, &policy);
    write_report(&out.join("report.csv"), &reports)?;
    let junk_first_pass = junk_profiles(&reports);
    emit_reextract_list(&reports, &out.join("redo.txt"))?;

    let (reextracted, load_redo, junk_after) = if junk_first_pass > 0 {
        let mut redo = config.clone();
        redo.output_path = out.join("raw_redo.csv");
        redo.reextract_links_path = Some(out.join("redo.txt"));
        redo.seed_profile_index = Some(1);
        redo.agents = 1;
        fs::write(out.join("redo.cfg"), redo.to_config_string())?;
        let options = CrawlOptions {
            retry: RetryPolicy::immediate(3),
            ..CrawlOptions::default()
        };
        let summary = crawl_with(&seeds, &redo, &endpoint, &options)?;
        let again = normalize_raw(&redo.output_path)?;
        write_structured(&out.join("structured_redo"), &again)?;
        let (report, reports) = load(&store, &again.profiles, &again.posts, &policy);
        write_report(&out.join("report_redo.csv"), &reports)?;
        (Some(summary), Some(report), junk_profiles(&reports))
    } else {
        (None, None, 0)
    };
    store.save().map_err(PipelineError::from)?;

    let sample = filter_by_city(&store, &params.cities);
    write_profiles_csv(&out.join("sample.csv"), &sample)?;
    let stats = behavior_summary(&store, &sample)?;
    let mut json = serde_json::to_vec_pretty(&stats).map_err(std::io::Error::other)?;
    json.push(b'\n');
    fs::write(out.join("stats.json"), json)?;

    if let Some(server) = server {
        server.shutdown();
    }
    Ok(DemoReport {
        out_dir: out.clone(),
        endpoint: endpoint.to_string(),
        truncated: truncated.len(),
        crawl: outcome.summary,
        raw_rows: outcome.merged_rows,
        junk_first_pass,
        reextracted,
        junk_after_reextraction: junk_after,
        load: load_report,
        load_redo,
        stored_profiles: store.profile_count(),
        stored_posts: store.post_count(),
        store_conflicts: store.conflicts(),
        filtered: sample.len(),
        stats,
        duration_ms: started.elapsed().as_millis() as u64,
    })
}
