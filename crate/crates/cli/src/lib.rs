//! Command-line front end. Every stage of a crawl run is a subcommand;
//! `demo` chains them on a generated fixture.
//!
//! Exit codes: 0 on success, 1 when a stage fails (stderr carries
//! `error[CATEGORY]: message`), 2 on a usage error or unknown subcommand.
//! Each run writes a [`RunManifest`] next to its primary output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use url::Url;

use imcrawler_core::config_io::{parse_config, parse_seed_file, write_seed_file, ConfigError, CrawlConfig};
use imcrawler_core::coordinator::{coordinate, run_agent, CoordinatorError, CoordinatorOptions, Launcher};
use imcrawler_core::crawl::{crawl_with, CrawlError, CrawlOptions, RetryPolicy};
use imcrawler_core::demo::{run_demo, DemoError, DemoParams};
use imcrawler_core::fixture::server::{FixtureServer, ServeError, ServerOptions};
use imcrawler_core::fixture::truth::ground_truth;
use imcrawler_core::fixture::{generate_network, FixtureError, FixtureNetwork, GeneratorParams};
use imcrawler_core::pipeline::analysis::behavior_summary;
use imcrawler_core::pipeline::records::{read_profiles_csv, write_profiles_csv};
use imcrawler_core::pipeline::verify::write_report;
use imcrawler_core::pipeline::{
    emit_reextract_list, filter_by_city, load, normalize_raw, read_structured, verify, write_structured, PipelineError,
    Store, StoreError, Verdict, VerificationPolicy,
};

const DEFAULT_ENDPOINT: &str = "http://127.0.0.1:8480";

#[derive(Parser, Debug)]
#[command(name = "imcrawler", version, about = "Seed-driven social-network crawler and analysis pipeline")]
struct Cli {
    /// Log progress (repeat for debug output)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic network file plus its seed accounts
    Generate(GenerateArgs),
    /// Serve a network file over HTTP
    Serve(ServeArgs),
    /// Crawl from the seeds in one process
    Crawl(CrawlArgs),
    /// Split the seeds across agents and merge their raw shards
    Coordinate(CoordinateArgs),
    /// Run one crawl agent for a coordinator (normally spawned by `coordinate`)
    Agent(AgentArgs),
    /// Turn raw captures into structured profile and post files
    Normalize(NormalizeArgs),
    /// Verify structured records and list profiles to re-extract
    Verify(VerifyArgs),
    /// Load verified records into the deduplicating store
    Load(LoadArgs),
    /// Select stored profiles whose current city is in a list
    Filter(FilterArgs),
    /// Disclosure and posting statistics over a population
    Stats(StatsArgs),
    /// Run the whole chain on a generated fixture
    Demo(DemoArgs),
}

#[derive(Args, Debug, Serialize)]
struct GenerateArgs {
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 10.0)]
    mean_degree: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Probability that an attribute is shown publicly
    #[arg(long, default_value_t = 0.6)]
    disclosure_rate: f64,
    #[arg(long, default_value = "network.bin")]
    out: PathBuf,
    /// Seed file to write [default: seeds.csv beside --out]
    #[arg(long)]
    seeds_out: Option<PathBuf>,
    /// How many accounts go into the seed file
    #[arg(long, default_value_t = 2)]
    seed_accounts: usize,
    /// Also export the ground-truth tables into this directory
    #[arg(long)]
    truth_out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ServeArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8480")]
    bind: String,
    /// Disable the /truth endpoint
    #[arg(long)]
    no_truth: bool,
    #[arg(long, default_value_t = 8)]
    workers: usize,
    /// Write the base URL here once listening
    #[arg(long)]
    url_file: Option<PathBuf>,
    /// Stop after this many seconds instead of serving forever
    #[arg(long)]
    for_secs: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
struct CrawlArgs {
    /// Seed file [default: seeds.csv beside the config]
    #[arg(long)]
    seeds: Option<PathBuf>,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = DEFAULT_ENDPOINT)]
    endpoint: String,
    /// Attempts per page before giving up on it
    #[arg(long, default_value_t = 3)]
    attempts: u32,
}

#[derive(Args, Debug, Serialize)]
struct CoordinateArgs {
    #[arg(long)]
    seeds: Option<PathBuf>,
    #[arg(long)]
    config: PathBuf,
    /// Override the config's agent count
    #[arg(long)]
    agents: Option<usize>,
    /// Override the config's sessions per agent
    #[arg(long)]
    sessions: Option<usize>,
    #[arg(long, default_value = DEFAULT_ENDPOINT)]
    endpoint: String,
    /// Merged raw output [default: the config's outputFile]
    #[arg(long)]
    merged: Option<PathBuf>,
    /// Shard directory [default: shards/ beside the merged output]
    #[arg(long)]
    shards: Option<PathBuf>,
    /// Run agents as child processes instead of threads
    #[arg(long)]
    subprocess: bool,
    /// Agent executable for --subprocess [default: this binary]
    #[arg(long)]
    agent_program: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    attempts: u32,
}

#[derive(Args, Debug, Serialize)]
struct AgentArgs {
    /// Coordinator address (host:port)
    #[arg(long)]
    connect: std::net::SocketAddr,
    #[arg(long)]
    agent_id: usize,
}

#[derive(Args, Debug, Serialize)]
struct NormalizeArgs {
    #[arg(long)]
    raw: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    /// Directory written by `normalize`
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    reextract_out: Option<PathBuf>,
    /// Flag captures with more posts than this
    #[arg(long)]
    total_post: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct LoadArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    db: PathBuf,
    #[arg(long)]
    total_post: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct FilterArgs {
    #[arg(long)]
    db: PathBuf,
    /// Comma-separated, matched case-insensitively
    #[arg(long, value_delimiter = ',', required = true)]
    cities: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct StatsArgs {
    #[arg(long)]
    db: PathBuf,
    /// Profile CSV written by `filter`
    #[arg(long)]
    population: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct DemoArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value = "demo-out")]
    out: PathBuf,
    /// Crawl an already running fixture instead of serving one in-process
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long, default_value_t = 2)]
    agents: usize,
    #[arg(long, default_value_t = 1)]
    sessions: usize,
    #[arg(long, default_value_t = 16)]
    depth: usize,
    #[arg(long)]
    subprocess: bool,
}

/// Record of one invocation, written as JSON beside the primary output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub config: Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub exit_code: i32,
    pub duration_ms: u64,
    pub result: Value,
    #[serde(skip)]
    path: Option<PathBuf>,
}

impl RunManifest {
    fn new(subcommand: &'static str, config: Value) -> Self {
        RunManifest {
            subcommand,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            exit_code: 0,
            duration_ms: 0,
            result: Value::Null,
            path: None,
        }
    }

    /// Manifest beside a file output: `raw.csv` gets `raw.csv.manifest.json`.
    fn beside(&mut self, primary: &Path) {
        let mut name = primary.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        self.path = Some(primary.with_file_name(name));
    }

    /// Manifest inside a directory output.
    fn inside(&mut self, dir: &Path) {
        self.path = Some(dir.join("manifest.json"));
    }

    fn write(&self) -> Result<()> {
        let Some(path) = &self.path else { return Ok(()) };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        fs::write(path, bytes).with_context(|| format!("writing manifest {}", path.display()))
    }
}

/// Machine-readable category of a failure, from the first module error
/// found in its source chain.
pub fn error_category(err: &anyhow::Error) -> &'static str {
    let chain = || err.chain();
    let has = |f: &dyn Fn(&(dyn std::error::Error + 'static)) -> bool| chain().any(f);
    if has(&|e| e.is::<ConfigError>()) {
        "CONFIG"
    } else if has(&|e| e.is::<StoreError>()) {
        "STORE"
    } else if has(&|e| e.is::<FixtureError>()) {
        "FIXTURE"
    } else if has(&|e| e.is::<ServeError>()) {
        "SERVE"
    } else if has(&|e| e.is::<CoordinatorError>()) {
        "COORDINATOR"
    } else if has(&|e| e.is::<CrawlError>()) {
        "CRAWL"
    } else if has(&|e| e.is::<PipelineError>()) {
        "PIPELINE"
    } else if has(&|e| e.is::<DemoError>()) {
        "DEMO"
    } else if has(&|e| e.is::<std::io::Error>()) {
        "IO"
    } else {
        "RUN"
    }
}

/// Runs one invocation. `argv[0]` is the program name.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp_millis()
        .try_init();

    let started = Instant::now();
    let mut manifest = manifest_for(&cli.command);
    let result = dispatch(cli.command, &mut manifest);
    manifest.duration_ms = started.elapsed().as_millis() as u64;
    let code = match &result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {:#}", error_category(e), e);
            1
        }
    };
    manifest.exit_code = code;
    if let Err(e) = manifest.write() {
        if code == 0 {
            eprintln!("error[IO]: {e:#}");
            return 1;
        }
    }
    code
}

fn manifest_for(command: &Command) -> RunManifest {
    let (name, args) = match command {
        Command::Generate(a) => ("generate", json!(a)),
        Command::Serve(a) => ("serve", json!(a)),
        Command::Crawl(a) => ("crawl", json!(a)),
        Command::Coordinate(a) => ("coordinate", json!(a)),
        Command::Agent(a) => ("agent", json!(a)),
        Command::Normalize(a) => ("normalize", json!(a)),
        Command::Verify(a) => ("verify", json!(a)),
        Command::Load(a) => ("load", json!(a)),
        Command::Filter(a) => ("filter", json!(a)),
        Command::Stats(a) => ("stats", json!(a)),
        Command::Demo(a) => ("demo", json!(a)),
    };
    RunManifest::new(name, args)
}

fn dispatch(command: Command, m: &mut RunManifest) -> Result<()> {
    match command {
        Command::Generate(a) => generate(a, m),
        Command::Serve(a) => serve(a, m),
        Command::Crawl(a) => crawl(a, m),
        Command::Coordinate(a) => coordinate_cmd(a, m),
        Command::Agent(a) => agent(a, m),
        Command::Normalize(a) => normalize(a, m),
        Command::Verify(a) => verify_cmd(a, m),
        Command::Load(a) => load_cmd(a, m),
        Command::Filter(a) => filter(a, m),
        Command::Stats(a) => stats(a, m),
        Command::Demo(a) => demo(a, m),
    }
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new("")).join(name)
}

fn parse_endpoint(s: &str) -> Result<Url> {
    let url = Url::parse(s).map_err(|e| ConfigError::BadValue(format!("endpoint {s:?}: {e}")))?;
    Ok(url)
}

fn retry(attempts: u32) -> RetryPolicy {
    RetryPolicy {
        max_attempts: attempts.max(1),
        ..RetryPolicy::default()
    }
}

fn print_json(value: &Value) {
    let mut out = std::io::stdout().lock();
    let _ = serde_json::to_writer_pretty(&mut out, value);
    let _ = writeln!(out);
}

fn generate(a: GenerateArgs, m: &mut RunManifest) -> Result<()> {
    m.beside(&a.out);
    let params = GeneratorParams {
        n_profiles: a.n,
        mean_degree: a.mean_degree,
        disclosure_rate: a.disclosure_rate,
        rng_seed: a.seed,
        ..GeneratorParams::default()
    };
    let network = generate_network(&params)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    network.save(&a.out)?;
    let seeds_out = a.seeds_out.unwrap_or_else(|| sibling(&a.out, "seeds.csv"));
    let seeds: Vec<_> = network.accounts.iter().take(a.seed_accounts).map(|a| a.to_seed()).collect();
    write_seed_file(&seeds_out, &seeds)?;
    m.outputs = vec![a.out.clone(), seeds_out];
    if let Some(dir) = &a.truth_out {
        ground_truth(&network).write_dir(dir)?;
        m.outputs.push(dir.clone());
    }
    m.result = json!({
        "profiles": network.len(),
        "edges": network.edges().len(),
        "mean_degree": network.mean_degree(),
        "seed_accounts": seeds.len(),
    });
    print_json(&m.result);
    Ok(())
}

fn serve(a: ServeArgs, m: &mut RunManifest) -> Result<()> {
    match &a.url_file {
        Some(f) => m.beside(f),
        None => {
            let mut name = a.network.file_name().unwrap_or_default().to_os_string();
            name.push(".serve");
            m.beside(&a.network.with_file_name(name));
        }
    }
    m.inputs = vec![a.network.clone()];
    let network = Arc::new(FixtureNetwork::load(&a.network)?);
    let options = ServerOptions {
        truth_enabled: !a.no_truth,
        workers: a.workers,
        ..ServerOptions::default()
    };
    let server = FixtureServer::serve(network, &a.bind, options)?;
    let url = server.base_url();
    println!("{url}");
    if let Some(f) = &a.url_file {
        fs::write(f, format!("{url}\n")).with_context(|| format!("writing {}", f.display()))?;
        m.outputs = vec![f.clone()];
    }
    m.result = json!({ "url": url.as_str() });
    m.write()?;
    match a.for_secs {
        Some(secs) => std::thread::sleep(Duration::from_secs(secs)),
        None => loop {
            std::thread::park();
        },
    }
    m.result = json!({ "url": url.as_str(), "sessions": server.session_counters() });
    server.shutdown();
    Ok(())
}

fn load_seeds_and_config(seeds: Option<&Path>, config: &Path) -> Result<(Vec<imcrawler_core::config_io::SeedProfile>, CrawlConfig, PathBuf)> {
    let cfg = parse_config(config)?;
    let seeds_path = seeds.map(Path::to_path_buf).unwrap_or_else(|| sibling(config, "seeds.csv"));
    let seeds = parse_seed_file(&seeds_path)?;
    Ok((seeds, cfg, seeds_path))
}

fn crawl(a: CrawlArgs, m: &mut RunManifest) -> Result<()> {
    let (seeds, cfg, seeds_path) = load_seeds_and_config(a.seeds.as_deref(), &a.config)?;
    m.beside(&cfg.output_path);
    m.inputs = vec![a.config.clone(), seeds_path];
    m.config = json!({ "args": &a, "crawl": &cfg });
    let endpoint = parse_endpoint(&a.endpoint)?;
    let options = CrawlOptions {
        retry: retry(a.attempts),
        ..CrawlOptions::default()
    };
    let summary = crawl_with(&seeds, &cfg, &endpoint, &options)?;
    m.outputs = vec![cfg.output_path.clone()];
    if !cfg.is_reextraction() {
        m.outputs.push(cfg.friend_links_path.clone());
    }
    m.result = serde_json::to_value(&summary)?;
    println!(
        "captured {} profiles and {} posts ({} fetch errors) into {}",
        summary.profiles_captured,
        summary.posts_captured,
        summary.fetch_errors,
        cfg.output_path.display()
    );
    Ok(())
}

fn coordinate_cmd(a: CoordinateArgs, m: &mut RunManifest) -> Result<()> {
    let (seeds, mut cfg, seeds_path) = load_seeds_and_config(a.seeds.as_deref(), &a.config)?;
    if let Some(n) = a.agents {
        cfg.agents = n;
    }
    if let Some(n) = a.sessions {
        cfg.sessions_per_agent = n;
    }
    if let Some(p) = &a.merged {
        cfg.output_path = p.clone();
    }
    m.beside(&cfg.output_path);
    m.inputs = vec![a.config.clone(), seeds_path];
    m.config = json!({ "args": &a, "crawl": &cfg });
    let endpoint = parse_endpoint(&a.endpoint)?;
    let shard_dir = a.shards.clone().unwrap_or_else(|| sibling(&cfg.output_path, "shards"));
    let mut options = CoordinatorOptions::new(shard_dir);
    options.retry = retry(a.attempts);
    if a.subprocess {
        let program = match &a.agent_program {
            Some(p) => p.clone(),
            None => std::env::current_exe().context("locating this executable")?,
        };
        options.launcher = Launcher::Subprocess { program, args: Vec::new() };
    }
    let outcome = coordinate(&seeds, &cfg, &endpoint, &options)?;
    m.outputs = vec![outcome.merged_path.clone(), outcome.links_path.clone()];
    m.result = serde_json::to_value(&outcome)?;
    println!(
        "merged {} raw rows from {} agents into {}",
        outcome.merged_rows,
        outcome.agents.len(),
        outcome.merged_path.display()
    );
    let failed = outcome.failed_agents();
    if !failed.is_empty() {
        return Err(CoordinatorError::Protocol(format!(
            "agents {failed:?} failed; unprocessed seeds {:?}",
            outcome.unprocessed
        ))
        .into());
    }
    Ok(())
}

fn agent(a: AgentArgs, m: &mut RunManifest) -> Result<()> {
    let shard = run_agent(a.connect, a.agent_id)?;
    m.beside(&shard);
    m.outputs = vec![shard];
    Ok(())
}

fn normalize(a: NormalizeArgs, m: &mut RunManifest) -> Result<()> {
    m.inside(&a.out);
    m.inputs = vec![a.raw.clone()];
    let n = normalize_raw(&a.raw)?;
    write_structured(&a.out, &n)?;
    m.outputs = vec![a.out.clone()];
    m.result = json!({
        "rows_total": n.rows_total,
        "rows_used": n.rows_used,
        "rows_skipped": n.skipped.len(),
        "profiles": n.profiles.len(),
        "posts": n.posts.len(),
    });
    println!(
        "{} profiles, {} posts from {} rows ({} skipped)",
        n.profiles.len(),
        n.posts.len(),
        n.rows_total,
        n.skipped.len()
    );
    Ok(())
}

fn policy(total_post: Option<usize>) -> VerificationPolicy {
    VerificationPolicy {
        total_post,
        ..VerificationPolicy::default()
    }
}

fn verify_cmd(a: VerifyArgs, m: &mut RunManifest) -> Result<()> {
    m.beside(&a.report);
    m.inputs = vec![a.input.clone()];
    let (profiles, posts) = read_structured(&a.input)?;
    let reports = verify(&profiles, &posts, &policy(a.total_post));
    write_report(&a.report, &reports)?;
    m.outputs = vec![a.report.clone()];
    let mut relisted = 0;
    if let Some(redo) = &a.reextract_out {
        relisted = emit_reextract_list(&reports, redo)?;
        m.outputs.push(redo.clone());
    }
    let junk = reports.iter().filter(|r| r.verdict == Verdict::Junk).count();
    m.result = json!({ "captures": reports.len(), "junk": junk, "reextract": relisted });
    println!("{} captures verified, {junk} junk, {relisted} profiles to re-extract", reports.len());
    Ok(())
}

fn load_cmd(a: LoadArgs, m: &mut RunManifest) -> Result<()> {
    m.beside(&a.db);
    m.inputs = vec![a.input.clone()];
    let (profiles, posts) = read_structured(&a.input)?;
    let store = Store::open(&a.db)?;
    let (report, _) = load(&store, &profiles, &posts, &policy(a.total_post));
    store.save()?;
    m.outputs = vec![a.db.clone()];
    m.result = json!({
        "load": report,
        "stored_profiles": store.profile_count(),
        "stored_posts": store.post_count(),
        "conflicts": store.conflicts(),
    });
    println!(
        "inserted {} profiles and {} posts; store holds {} profiles",
        report.profiles_inserted,
        report.posts_inserted,
        store.profile_count()
    );
    Ok(())
}

fn open_existing_store(db: &Path) -> Result<Store> {
    if !db.exists() {
        bail!(PipelineError::MissingInput(db.to_path_buf()));
    }
    Ok(Store::open(db)?)
}

fn filter(a: FilterArgs, m: &mut RunManifest) -> Result<()> {
    m.beside(&a.out);
    m.inputs = vec![a.db.clone()];
    let store = open_existing_store(&a.db)?;
    let sample = filter_by_city(&store, &a.cities);
    write_profiles_csv(&a.out, &sample)?;
    m.outputs = vec![a.out.clone()];
    m.result = json!({ "selected": sample.len(), "of": store.profile_count() });
    println!("{} of {} profiles selected", sample.len(), store.profile_count());
    Ok(())
}

fn stats(a: StatsArgs, m: &mut RunManifest) -> Result<()> {
    m.beside(&a.out);
    m.inputs = vec![a.db.clone(), a.population.clone()];
    let store = open_existing_store(&a.db)?;
    let population = read_profiles_csv(&a.population)?;
    let summary = behavior_summary(&store, &population)?;
    let mut bytes = serde_json::to_vec_pretty(&summary)?;
    bytes.push(b'\n');
    fs::write(&a.out, bytes).with_context(|| format!("writing {}", a.out.display()))?;
    m.outputs = vec![a.out.clone()];
    m.result = json!({ "population": population.len() });
    println!("statistics over {} profiles written to {}", population.len(), a.out.display());
    Ok(())
}

fn demo(a: DemoArgs, m: &mut RunManifest) -> Result<()> {
    m.inside(&a.out);
    let mut params = DemoParams::new(a.seed, a.n, a.out.clone());
    params.agents = a.agents;
    params.sessions = a.sessions;
    params.depth = a.depth;
    if let Some(e) = &a.endpoint {
        params.endpoint = Some(parse_endpoint(e)?);
    }
    if a.subprocess {
        let program = std::env::current_exe().context("locating this executable")?;
        params.launcher = Launcher::Subprocess { program, args: Vec::new() };
    }
    let report = run_demo(&params)?;
    m.outputs = vec![report.store_path(), report.out_dir.join("sample.csv"), report.stats_path()];
    m.result = json!({
        "endpoint": report.endpoint,
        "truncated": report.truncated,
        "raw_rows": report.raw_rows,
        "junk_first_pass": report.junk_first_pass,
        "junk_after_reextraction": report.junk_after_reextraction,
        "stored_profiles": report.stored_profiles,
        "stored_posts": report.stored_posts,
        "store_conflicts": report.store_conflicts,
        "filtered": report.filtered,
    });
    print_json(&m.result);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn help_lists_every_subcommand() {
        let help = Cli::command().render_help().to_string();
        for name in [
            "generate", "serve", "crawl", "coordinate", "agent", "normalize", "verify", "load", "filter", "stats", "demo",
        ] {
            assert!(help.contains(name), "{name} missing from help");
        }
    }

    #[test]
    fn categories_follow_the_source_chain() {
        let e = anyhow::Error::from(CrawlError::ConfigInvalid(ConfigError::MissingKey("totalPost")));
        assert_eq!(error_category(&e), "CONFIG");
        let e = anyhow::Error::from(PipelineError::EmptyPopulation);
        assert_eq!(error_category(&e), "PIPELINE");
        let e = anyhow::Error::from(PipelineError::StoreFailure(StoreError::NoPath));
        assert_eq!(error_category(&e), "STORE");
        let e = anyhow::Error::from(std::io::Error::other("x")).context("while writing");
        assert_eq!(error_category(&e), "IO");
    }

    #[test]
    fn manifest_paths() {
        let mut m = RunManifest::new("x", Value::Null);
        m.beside(Path::new("out/raw.csv"));
        assert_eq!(m.path.as_deref(), Some(Path::new("out/raw.csv.manifest.json")));
        m.inside(Path::new("structured"));
        assert_eq!(m.path.as_deref(), Some(Path::new("structured/manifest.json")));
    }
}
