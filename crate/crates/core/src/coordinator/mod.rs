//! Host side of a multi-agent crawl: seeds are partitioned across agents,
//! each agent crawls its share into a private shard, and the host merges
//! the shards in agent order.
//!
//! Agents talk to the host over a loopback TCP connection using the frames
//! in [`protocol`]. An agent is either a thread of this process or a child
//! process running the `agent` subcommand; both run [`run_agent`].

pub mod protocol;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;
use url::Url;

use crate::config_io::{parse_config_str, ConfigError, CrawlConfig, SeedProfile};
use crate::crawl::{crawl_assigned, CrawlOptions, CrawlSummary, RetryPolicy, SeedSummary};
use crate::dom::extract::RAW_HEADER;
use protocol::{read_frame, write_frame, AgentMessage, HostMessage, StartCommand};

#[derive(Debug, Error)]
pub enum CoordinatorError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("agent protocol: {0}")]
    Protocol(String),
    #[error("cannot launch agent {agent_id}: {message}")]
    Launch { agent_id: usize, message: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AgentAssignment {
    pub agent_id: usize,
    /// 1-based seed-file rows.
    pub seed_indices: Vec<usize>,
    pub sessions: usize,
    pub shard_path: PathBuf,
}

/// Round-robin partition of seeds `1..=n_seeds` over `n_agents` agents.
pub fn partition_seeds(seeds: &[SeedProfile], n_agents: usize, sessions: usize, shard_dir: &Path) -> Vec<AgentAssignment> {
    let n_agents = n_agents.max(1);
    (0..n_agents)
        .map(|agent_id| AgentAssignment {
            agent_id,
            seed_indices: (1..=seeds.len()).skip(agent_id).step_by(n_agents).collect(),
            sessions: sessions.max(1),
            shard_path: shard_path(shard_dir, agent_id),
        })
        .collect()
}

pub fn shard_path(shard_dir: &Path, agent_id: usize) -> PathBuf {
    shard_dir.join(format!("agent-{agent_id}.raw.csv"))
}

fn links_shard_path(shard_path: &Path) -> PathBuf {
    shard_path.with_extension("links.txt")
}

#[derive(Clone, Debug)]
pub enum Launcher {
    /// Agents run as threads of this process.
    InProcess,
    /// Agents run as `program args.. agent --connect ADDR --agent-id N`.
    Subprocess { program: PathBuf, args: Vec<String> },
}

#[derive(Clone, Debug)]
pub struct CoordinatorOptions {
    pub launcher: Launcher,
    pub shard_dir: PathBuf,
    pub retry: RetryPolicy,
    /// How long to wait for every agent to connect.
    pub connect_timeout: Duration,
    /// agent_id to number of seeds after which that agent drops out.
    pub fail_after_seeds: BTreeMap<usize, usize>,
}

impl CoordinatorOptions {
    pub fn new(shard_dir: PathBuf) -> Self {
        CoordinatorOptions {
            launcher: Launcher::InProcess,
            shard_dir,
            retry: RetryPolicy::default(),
            connect_timeout: Duration::from_secs(30),
            fail_after_seeds: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum AgentStatus {
    Done,
    Failed { error: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct AgentReport {
    pub agent_id: usize,
    pub seed_indices: Vec<usize>,
    pub processed: Vec<usize>,
    pub unprocessed: Vec<usize>,
    pub status: AgentStatus,
    pub shard_rows: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoordinationOutcome {
    pub merged_path: PathBuf,
    pub links_path: PathBuf,
    pub merged_rows: usize,
    pub summary: CrawlSummary,
    pub agents: Vec<AgentReport>,
    /// Seeds of failed agents that never finished, for a re-run.
    pub unprocessed: Vec<usize>,
}

impl CoordinationOutcome {
    pub fn failed_agents(&self) -> Vec<usize> {
        self.agents
            .iter()
            .filter(|a| a.status != AgentStatus::Done)
            .map(|a| a.agent_id)
            .collect()
    }
}

/// Partitions per `config.agents` / `config.sessions_per_agent` and runs.
pub fn coordinate(
    seeds: &[SeedProfile],
    config: &CrawlConfig,
    endpoint: &Url,
    options: &CoordinatorOptions,
) -> Result<CoordinationOutcome, CoordinatorError> {
    config.validate_against_seeds(seeds)?;
    let assignments = partition_seeds(seeds, config.agents, config.sessions_per_agent, &options.shard_dir);
    run_agents(seeds, &assignments, config, endpoint, options)
}

struct Launched {
    children: Vec<Child>,
    threads: Vec<std::thread::JoinHandle<()>>,
}

fn launch(
    options: &CoordinatorOptions,
    addr: SocketAddr,
    assignments: &[AgentAssignment],
) -> Result<Launched, CoordinatorError> {
    let mut launched = Launched {
        children: Vec::new(),
        threads: Vec::new(),
    };
    for a in assignments {
        let agent_id = a.agent_id;
        match &options.launcher {
            Launcher::InProcess => launched.threads.push(std::thread::spawn(move || {
                if let Err(e) = run_agent(addr, agent_id) {
                    log::warn!("agent {agent_id}: {e}");
                }
            })),
            Launcher::Subprocess { program, args } => {
                let child = Command::new(program)
                    .args(args)
                    .args(["agent", "--connect", &addr.to_string(), "--agent-id", &agent_id.to_string()])
                    .stdin(Stdio::null())
                    .spawn()
                    .map_err(|e| CoordinatorError::Launch {
                        agent_id,
                        message: e.to_string(),
                    })?;
                launched.children.push(child);
            }
        }
    }
    Ok(launched)
}

/// Accepts one connection per agent, keyed by the agent id in its hello.
fn accept_agents(
    listener: &TcpListener,
    expected: &BTreeSet<usize>,
    deadline: Instant,
    children: &mut [Child],
) -> Result<BTreeMap<usize, TcpStream>, CoordinatorError> {
    listener.set_nonblocking(true)?;
    let mut streams = BTreeMap::new();
    while streams.len() < expected.len() && Instant::now() < deadline {
        match listener.accept() {
            Ok((mut stream, _)) => {
                stream.set_nonblocking(false)?;
                stream.set_read_timeout(Some(Duration::from_secs(10)))?;
                match read_frame::<_, AgentMessage>(&mut stream) {
                    Ok(Some(AgentMessage::Hello { agent_id })) if expected.contains(&agent_id) => {
                        stream.set_read_timeout(None)?;
                        streams.insert(agent_id, stream);
                    }
                    other => log::warn!("dropping connection with unexpected greeting: {other:?}"),
                }
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                if !children.is_empty() && children.iter_mut().all(|c| matches!(c.try_wait(), Ok(Some(_)))) {
                    break;
                }
                std::thread::sleep(Duration::from_millis(5));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(streams)
}

struct AgentRun {
    processed: Vec<usize>,
    seeds: Vec<SeedSummary>,
    done: Option<CrawlSummary>,
    error: Option<String>,
}

fn drive_agent(stream: &mut TcpStream, start: StartCommand) -> AgentRun {
    let mut run = AgentRun {
        processed: Vec::new(),
        seeds: Vec::new(),
        done: None,
        error: None,
    };
    if let Err(e) = write_frame(stream, &HostMessage::Start(start)) {
        run.error = Some(format!("sending start: {e}"));
        return run;
    }
    loop {
        match read_frame::<_, AgentMessage>(stream) {
            Ok(Some(AgentMessage::Progress { seed })) => {
                run.processed.push(seed.seed_index);
                run.seeds.push(seed);
            }
            Ok(Some(AgentMessage::Done { summary })) => {
                run.done = Some(summary);
                return run;
            }
            Ok(Some(AgentMessage::Failed { error })) => {
                run.error = Some(error);
                return run;
            }
            Ok(Some(AgentMessage::Hello { .. })) => {
                run.error = Some("unexpected hello".into());
                return run;
            }
            Ok(None) => {
                run.error = Some("connection closed before completion".into());
                return run;
            }
            Err(e) => {
                run.error = Some(e.to_string());
                return run;
            }
        }
    }
}

fn absolute(path: &Path) -> io::Result<PathBuf> {
    std::path::absolute(path)
}

/// Runs one agent per assignment and merges their shards into
/// `config.output_path` (and friend links into `config.friend_links_path`)
/// in agent-id order. Failed agents are reported, not raised: whatever
/// they wrote is merged and their unfinished seeds are listed.
pub fn run_agents(
    seeds: &[SeedProfile],
    assignments: &[AgentAssignment],
    config: &CrawlConfig,
    endpoint: &Url,
    options: &CoordinatorOptions,
) -> Result<CoordinationOutcome, CoordinatorError> {
    config.validate_against_seeds(seeds)?;
    let started = Instant::now();
    let mut blob_config = config.clone();
    blob_config.friend_links_path = absolute(&config.friend_links_path)?;
    blob_config.output_path = absolute(&config.output_path)?;
    if let Some(p) = &config.reextract_links_path {
        blob_config.reextract_links_path = Some(absolute(p)?);
    }
    let config_blob = blob_config.to_config_string();

    fs::create_dir_all(&options.shard_dir)?;
    for a in assignments {
        for p in [a.shard_path.clone(), links_shard_path(&a.shard_path)] {
            match fs::remove_file(&p) {
                Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(e.into()),
                _ => {}
            }
        }
    }

    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let expected: BTreeSet<usize> = assignments.iter().map(|a| a.agent_id).collect();
    let mut launched = launch(options, addr, assignments)?;
    let mut streams = accept_agents(
        &listener,
        &expected,
        Instant::now() + options.connect_timeout,
        &mut launched.children,
    )?;
    drop(listener);

    let runs: BTreeMap<usize, AgentRun> = std::thread::scope(|scope| {
        let handles: Vec<_> = assignments
            .iter()
            .map(|a| {
                let stream = streams.remove(&a.agent_id);
                let start = StartCommand {
                    agent_id: a.agent_id,
                    seed_indices: a.seed_indices.clone(),
                    seeds: a.seed_indices.iter().map(|&i| seeds[i - 1].clone()).collect(),
                    config_blob: config_blob.clone(),
                    endpoint: endpoint.to_string(),
                    shard_path: a.shard_path.display().to_string(),
                    links_path: links_shard_path(&a.shard_path).display().to_string(),
                    sessions: a.sessions,
                    retry: options.retry.clone(),
                    fail_after_seeds: options.fail_after_seeds.get(&a.agent_id).copied(),
                };
                let agent_id = a.agent_id;
                scope.spawn(move || {
                    let run = match stream {
                        Some(mut s) => drive_agent(&mut s, start),
                        None => AgentRun {
                            processed: Vec::new(),
                            seeds: Vec::new(),
                            done: None,
                            error: Some("agent never connected".into()),
                        },
                    };
                    (agent_id, run)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("agent driver panicked")).collect()
    });

    for child in &mut launched.children {
        let _ = child.wait();
    }
    for t in launched.threads {
        let _ = t.join();
    }

    let merged_rows = merge_raw_shards(assignments.iter().map(|a| a.shard_path.as_path()), &config.output_path)?;
    merge_link_shards(
        assignments.iter().map(|a| links_shard_path(&a.shard_path)),
        &config.friend_links_path,
    )?;

    let mut summary = CrawlSummary::default();
    let mut agents = Vec::new();
    let mut unprocessed = Vec::new();
    for a in assignments {
        let run = &runs[&a.agent_id];
        let (status, agent_summary) = match (&run.done, &run.error) {
            (Some(s), None) => (AgentStatus::Done, s.clone()),
            (_, error) => {
                let mut s = CrawlSummary::default();
                s.merge(CrawlSummary {
                    per_seed: run.seeds.clone(),
                    ..Default::default()
                });
                (
                    AgentStatus::Failed {
                        error: error.clone().unwrap_or_default(),
                    },
                    s,
                )
            }
        };
        let left: Vec<usize> = match status {
            AgentStatus::Done => Vec::new(),
            AgentStatus::Failed { .. } => a
                .seed_indices
                .iter()
                .copied()
                .filter(|i| !run.processed.contains(i))
                .collect(),
        };
        if let AgentStatus::Failed { error } = &status {
            log::warn!("agent {} failed ({error}); unprocessed seeds {left:?}", a.agent_id);
        }
        unprocessed.extend(&left);
        summary.merge(agent_summary);
        agents.push(AgentReport {
            agent_id: a.agent_id,
            seed_indices: a.seed_indices.clone(),
            processed: run.processed.clone(),
            unprocessed: left,
            status,
            shard_rows: count_raw_rows(&a.shard_path)?,
        });
    }
    unprocessed.sort_unstable();
    summary.duration_ms = started.elapsed().as_millis() as u64;
    Ok(CoordinationOutcome {
        merged_path: config.output_path.clone(),
        links_path: config.friend_links_path.clone(),
        merged_rows,
        summary,
        agents,
        unprocessed,
    })
}

/// Data rows of a raw file, 0 if it does not exist.
pub fn count_raw_rows(path: &Path) -> io::Result<usize> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(0),
        Err(e) => return Err(e),
    };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(BufReader::new(file));
    let mut n = 0;
    for record in reader.records() {
        record.map_err(io::Error::other)?;
        n += 1;
    }
    Ok(n)
}

fn open_for_append(path: &Path) -> io::Result<File> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    OpenOptions::new().create(true).append(true).open(path)
}

/// Appends the data rows of each shard, byte for byte, to `out`; writes
/// the header first if `out` is empty. Returns the rows appended.
pub fn merge_raw_shards<'a>(shards: impl IntoIterator<Item = &'a Path>, out: &Path) -> io::Result<usize> {
    let mut file = open_for_append(out)?;
    if file.metadata()?.len() == 0 {
        writeln!(file, "{}", RAW_HEADER.join(","))?;
    }
    let mut rows = 0;
    for shard in shards {
        let bytes = match fs::read(shard) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => continue,
            Err(e) => return Err(e),
        };
        let body = match bytes.iter().position(|&b| b == b'\n') {
            Some(i) => &bytes[i + 1..],
            None => continue,
        };
        rows += count_raw_rows(shard)?;
        file.write_all(body)?;
    }
    file.flush()?;
    Ok(rows)
}

pub fn merge_link_shards(shards: impl IntoIterator<Item = PathBuf>, out: &Path) -> io::Result<()> {
    let mut file = open_for_append(out)?;
    for shard in shards {
        match fs::read(&shard) {
            Ok(b) => file.write_all(&b)?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(e),
        }
    }
    file.flush()
}

/// Agent entry point: connect to the host, crawl the assigned seeds into
/// the shard, report progress per seed and a final summary. Returns the
/// shard path the host assigned.
pub fn run_agent(host: SocketAddr, agent_id: usize) -> Result<PathBuf, CoordinatorError> {
    let mut stream = TcpStream::connect_timeout(&host, Duration::from_secs(10))?;
    stream.set_nodelay(true)?;
    write_frame(&mut stream, &AgentMessage::Hello { agent_id })?;
    let start = match read_frame::<_, HostMessage>(&mut stream)? {
        Some(HostMessage::Start(s)) => s,
        None => return Err(CoordinatorError::Protocol("host closed before start".into())),
    };
    let shard = PathBuf::from(&start.shard_path);
    let outcome = crawl_share(&stream, &start);
    match outcome {
        Ok(Some(summary)) => write_frame(&mut stream, &AgentMessage::Done { summary })?,
        Ok(None) => {
            log::warn!("agent {agent_id}: injected failure, dropping connection");
            return Ok(shard);
        }
        Err(e) => write_frame(&mut stream, &AgentMessage::Failed { error: e.to_string() })?,
    }
    let _ = stream.shutdown(std::net::Shutdown::Write);
    // Wait for the host to close so the final frame is not lost.
    let _ = BufReader::new(&stream).fill_buf();
    Ok(shard)
}

/// `Ok(None)` when the injected failure fired.
fn crawl_share(stream: &TcpStream, start: &StartCommand) -> Result<Option<CrawlSummary>, CoordinatorError> {
    let mut config = parse_config_str(&start.config_blob, Path::new("/"))?;
    config.output_path = PathBuf::from(&start.shard_path);
    config.friend_links_path = PathBuf::from(&start.links_path);
    config.sessions_per_agent = start.sessions.max(1);
    let endpoint = Url::parse(&start.endpoint).map_err(|e| CoordinatorError::Protocol(e.to_string()))?;
    if start.seed_indices.len() != start.seeds.len() {
        return Err(CoordinatorError::Protocol("seed_indices and seeds differ in length".into()));
    }
    let assigned: Vec<(usize, SeedProfile)> = start.seed_indices.iter().copied().zip(start.seeds.iter().cloned()).collect();

    let abort = Arc::new(AtomicBool::new(false));
    let finished = Arc::new(AtomicUsize::new(0));
    let writer = Arc::new(Mutex::new(stream.try_clone()?));
    let fail_after = start.fail_after_seeds;
    let on_seed_done = {
        let (abort, finished, writer) = (Arc::clone(&abort), Arc::clone(&finished), Arc::clone(&writer));
        Arc::new(move |s: &SeedSummary| {
            if abort.load(Ordering::SeqCst) {
                return;
            }
            let n = finished.fetch_add(1, Ordering::SeqCst) + 1;
            let mut w = writer.lock().unwrap_or_else(|e| e.into_inner());
            if let Err(e) = write_frame(&mut *w, &AgentMessage::Progress { seed: s.clone() }) {
                log::warn!("progress report failed: {e}");
            }
            if fail_after.is_some_and(|k| n >= k) {
                abort.store(true, Ordering::SeqCst);
            }
        })
    };
    let options = CrawlOptions {
        retry: start.retry.clone(),
        on_seed_done: Some(on_seed_done),
        abort: Some(Arc::clone(&abort)),
        ..CrawlOptions::default()
    };
    let result = crawl_assigned(&assigned, &config, &endpoint, &options);
    if abort.load(Ordering::SeqCst) {
        return Ok(None);
    }
    result
        .map(Some)
        .map_err(|e| CoordinatorError::Protocol(format!("crawl failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seeds(n: usize) -> Vec<SeedProfile> {
        (0..n).map(|i| SeedProfile::new(&format!("u{i}"), &format!("l{i}"), "pw")).collect()
    }

    #[test]
    fn five_seeds_two_agents() {
        let a = partition_seeds(&seeds(5), 2, 1, Path::new("s"));
        assert_eq!(a[0].seed_indices, [1, 3, 5]);
        assert_eq!(a[1].seed_indices, [2, 4]);
    }

    #[test]
    fn more_agents_than_seeds() {
        let a = partition_seeds(&seeds(3), 5, 1, Path::new("s"));
        let sizes: Vec<_> = a.iter().map(|a| a.seed_indices.len()).collect();
        assert_eq!(sizes, [1, 1, 1, 0, 0]);
    }

    proptest::proptest! {
        #[test]
        fn partition_is_balanced_permutation(n in 0usize..60, k in 1usize..12) {
            let a = partition_seeds(&seeds(n), k, 1, Path::new("s"));
            proptest::prop_assert_eq!(a.len(), k);
            let sizes: Vec<_> = a.iter().map(|a| a.seed_indices.len()).collect();
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            proptest::prop_assert!(hi - lo <= 1);
            let mut all: Vec<_> = a.iter().flat_map(|a| a.seed_indices.clone()).collect();
            all.sort_unstable();
            proptest::prop_assert_eq!(all, (1..=n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn raw_merge_concatenates_rows_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let header = RAW_HEADER.join(",");
        let s0 = dir.path().join("a.csv");
        let s1 = dir.path().join("b.csv");
        fs::write(&s0, format!("{header}\nprofile,u,1,f,\"multi\nline\",t\n")).unwrap();
        fs::write(&s1, format!("{header}\nprofile,v,2,f,x,t\nprofile,w,2,f,y,t\n")).unwrap();
        let out = dir.path().join("m.csv");
        let missing = dir.path().join("none.csv");
        let rows = merge_raw_shards([s0.as_path(), missing.as_path(), s1.as_path()], &out).unwrap();
        assert_eq!(rows, 3);
        assert_eq!(count_raw_rows(&out).unwrap(), 3);
        let text = fs::read_to_string(&out).unwrap();
        assert!(text.find(",u,").unwrap() < text.find(",v,").unwrap());
    }
}
