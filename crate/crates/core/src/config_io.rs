//! Seed file, crawl configuration and link-list files.
//!
//! * Seed file: CSV rows `profile_id,login,secret`, `#` comments, UTF-8.
//! * Config file: `key=value` lines, `#` comments. Relative paths resolve
//!   against the config file's directory.
//! * Link lists: one absolute profile URL per line, LF-terminated.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("malformed line {0}")]
    MalformedLine(usize),
    #[error("duplicate seed profile id {0:?}")]
    DuplicateSeed(String),
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("duplicate config key {0:?}")]
    DuplicateKey(String),
    #[error("missing required config key {0:?}")]
    MissingKey(&'static str),
    #[error("bad value for config key {0:?}")]
    BadValue(String),
    #[error("seedProfile and reextractLinksFile must be given together")]
    InconsistentPair,
    #[error("seedProfile={index} does not name a row of a {rows}-row seed file")]
    SeedIndexOutOfRange { index: usize, rows: usize },
    #[error("line {0}: not an absolute profile URL")]
    BadUrl(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedProfile {
    pub profile_id: String,
    pub login_name: String,
    pub secret: String,
    /// Where this seed's harvested friend links were written, once known.
    pub friend_links_path: Option<PathBuf>,
}

impl SeedProfile {
    pub fn new(profile_id: &str, login_name: &str, secret: &str) -> Self {
        SeedProfile {
            profile_id: profile_id.to_string(),
            login_name: login_name.to_string(),
            secret: secret.to_string(),
            friend_links_path: None,
        }
    }
}

fn open_existing(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => ConfigError::MissingFile(path.to_path_buf()),
        _ => ConfigError::Io(e),
    })
}

/// Reads a seed file, one [`SeedProfile`] per non-blank, non-comment row.
pub fn parse_seed_file(path: &Path) -> Result<Vec<SeedProfile>, ConfigError> {
    let text = open_existing(path)?;
    parse_seed_str(&text)
}

pub fn parse_seed_str(text: &str) -> Result<Vec<SeedProfile>, ConfigError> {
    let mut seen = HashSet::new();
    let mut seeds = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let malformed = || ConfigError::MalformedLine(idx + 1);
        let record = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(trimmed.as_bytes())
            .records()
            .next()
            .ok_or_else(malformed)?
            .map_err(|_| malformed())?;
        if record.len() < 3 || record.iter().take(3).any(str::is_empty) {
            return Err(malformed());
        }
        let seed = SeedProfile::new(&record[0], &record[1], &record[2]);
        if !seen.insert(seed.profile_id.clone()) {
            return Err(ConfigError::DuplicateSeed(seed.profile_id));
        }
        seeds.push(seed);
    }
    Ok(seeds)
}

pub fn write_seed_file(path: &Path, seeds: &[SeedProfile]) -> io::Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    for s in seeds {
        writer.write_record([&s.profile_id, &s.login_name, &s.secret])?;
    }
    writer.flush()
}

pub const DEFAULT_DEPTH: usize = 1;
pub const DEFAULT_AGENTS: usize = 1;
pub const DEFAULT_SESSIONS_PER_AGENT: usize = 1;
pub const DEFAULT_MIN_DELAY_MS: u64 = 200;
pub const DEFAULT_MAX_DELAY_MS: u64 = 800;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrawlConfig {
    pub friend_links_path: PathBuf,
    pub output_path: PathBuf,
    pub total_post: usize,
    pub reextract_links_path: Option<PathBuf>,
    /// 1-based row of the seed file used for re-extraction.
    pub seed_profile_index: Option<usize>,
    pub depth: usize,
    pub agents: usize,
    pub sessions_per_agent: usize,
    pub min_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl CrawlConfig {
    pub fn new(friend_links_path: PathBuf, output_path: PathBuf, total_post: usize) -> Self {
        CrawlConfig {
            friend_links_path,
            output_path,
            total_post,
            reextract_links_path: None,
            seed_profile_index: None,
            depth: DEFAULT_DEPTH,
            agents: DEFAULT_AGENTS,
            sessions_per_agent: DEFAULT_SESSIONS_PER_AGENT,
            min_delay_ms: DEFAULT_MIN_DELAY_MS,
            max_delay_ms: DEFAULT_MAX_DELAY_MS,
        }
    }

    pub fn is_reextraction(&self) -> bool {
        self.seed_profile_index.is_some()
    }

    /// Structural checks that need no other file.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.total_post == 0 {
            return Err(ConfigError::BadValue("totalPost".into()));
        }
        for (key, v) in [
            ("depth", self.depth),
            ("agents", self.agents),
            ("sessionsPerAgent", self.sessions_per_agent),
        ] {
            if v == 0 {
                return Err(ConfigError::BadValue(key.into()));
            }
        }
        if self.seed_profile_index == Some(0) {
            return Err(ConfigError::BadValue("seedProfile".into()));
        }
        if self.min_delay_ms > self.max_delay_ms {
            return Err(ConfigError::BadValue("maxDelayMs".into()));
        }
        if self.seed_profile_index.is_some() != self.reextract_links_path.is_some() {
            return Err(ConfigError::InconsistentPair);
        }
        Ok(())
    }

    /// Checks `seed_profile_index` against the rows actually present.
    pub fn validate_against_seeds(&self, seeds: &[SeedProfile]) -> Result<(), ConfigError> {
        self.validate()?;
        match self.seed_profile_index {
            Some(index) if index > seeds.len() => Err(ConfigError::SeedIndexOutOfRange {
                index,
                rows: seeds.len(),
            }),
            _ => Ok(()),
        }
    }

    /// Every key written explicitly; parsing the result reproduces `self`.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        line("friendLinks", self.friend_links_path.display().to_string());
        line("outputFile", self.output_path.display().to_string());
        line("totalPost", self.total_post.to_string());
        if let Some(p) = &self.reextract_links_path {
            line("reextractLinksFile", p.display().to_string());
        }
        if let Some(i) = self.seed_profile_index {
            line("seedProfile", i.to_string());
        }
        line("depth", self.depth.to_string());
        line("agents", self.agents.to_string());
        line("sessionsPerAgent", self.sessions_per_agent.to_string());
        line("minDelayMs", self.min_delay_ms.to_string());
        line("maxDelayMs", self.max_delay_ms.to_string());
        out
    }
}

/// Canonical key for each accepted spelling.
fn canonical_key(key: &str) -> Option<&'static str> {
    Some(match key {
        "friendLinks" | "friendLinksFile" => "friendLinks",
        "outputFile" => "outputFile",
        "totalPost" => "totalPost",
        "reextractLinksFile" => "reextractLinksFile",
        "seedProfile" => "seedProfile",
        "depth" => "depth",
        "agents" => "agents",
        "sessionsPerAgent" => "sessionsPerAgent",
        "minDelayMs" => "minDelayMs",
        "maxDelayMs" => "maxDelayMs",
        _ => return None,
    })
}

pub fn parse_config(path: &Path) -> Result<CrawlConfig, ConfigError> {
    let text = open_existing(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    parse_config_str(&text, base)
}

/// Parses config text; relative paths are joined onto `base_dir`.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<CrawlConfig, ConfigError> {
    let mut values: BTreeMap<&'static str, String> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or(ConfigError::MalformedLine(idx + 1))?;
        let key = key.trim();
        let canonical = canonical_key(key).ok_or_else(|| ConfigError::UnknownKey(key.into()))?;
        if values.insert(canonical, value.trim().to_string()).is_some() {
            return Err(ConfigError::DuplicateKey(canonical.into()));
        }
    }

    let path_of = |key: &'static str| -> Result<Option<PathBuf>, ConfigError> {
        match values.get(key) {
            None => Ok(None),
            Some(v) if v.is_empty() => Err(ConfigError::BadValue(key.into())),
            Some(v) => Ok(Some(resolve(base_dir, v))),
        }
    };
    let num_of = |key: &'static str| -> Result<Option<u64>, ConfigError> {
        values
            .get(key)
            .map(|v| v.parse::<u64>().map_err(|_| ConfigError::BadValue(key.into())))
            .transpose()
    };
    let positive = |key: &'static str, default: usize| -> Result<usize, ConfigError> {
        match num_of(key)? {
            None => Ok(default),
            Some(0) => Err(ConfigError::BadValue(key.into())),
            Some(n) => usize::try_from(n).map_err(|_| ConfigError::BadValue(key.into())),
        }
    };

    let friend_links_path = path_of("friendLinks")?.ok_or(ConfigError::MissingKey("friendLinks"))?;
    let output_path = path_of("outputFile")?.ok_or(ConfigError::MissingKey("outputFile"))?;
    if !values.contains_key("totalPost") {
        return Err(ConfigError::MissingKey("totalPost"));
    }
    let config = CrawlConfig {
        friend_links_path,
        output_path,
        total_post: positive("totalPost", 0)?,
        reextract_links_path: path_of("reextractLinksFile")?,
        seed_profile_index: match num_of("seedProfile")? {
            None => None,
            Some(0) => return Err(ConfigError::BadValue("seedProfile".into())),
            Some(n) => Some(n as usize),
        },
        depth: positive("depth", DEFAULT_DEPTH)?,
        agents: positive("agents", DEFAULT_AGENTS)?,
        sessions_per_agent: positive("sessionsPerAgent", DEFAULT_SESSIONS_PER_AGENT)?,
        min_delay_ms: num_of("minDelayMs")?.unwrap_or(DEFAULT_MIN_DELAY_MS),
        max_delay_ms: num_of("maxDelayMs")?.unwrap_or(DEFAULT_MAX_DELAY_MS),
    };
    config.validate()?;
    Ok(config)
}

fn resolve(base: &Path, value: &str) -> PathBuf {
    let p = Path::new(value);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Ordered, duplicate-free list of absolute profile URLs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinkList {
    urls: Vec<Url>,
}

impl LinkList {
    /// Keeps the first occurrence of every URL.
    pub fn from_urls<I: IntoIterator<Item = Url>>(urls: I) -> Self {
        let mut list = LinkList::default();
        list.extend(urls);
        list
    }

    pub fn extend<I: IntoIterator<Item = Url>>(&mut self, urls: I) {
        let mut seen: HashSet<Url> = self.urls.iter().cloned().collect();
        for url in urls {
            if seen.insert(url.clone()) {
                self.urls.push(url);
            }
        }
    }

    pub fn urls(&self) -> &[Url] {
        &self.urls
    }

    pub fn len(&self) -> usize {
        self.urls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.urls.is_empty()
    }

    pub fn into_urls(self) -> Vec<Url> {
        self.urls
    }
}

/// True when `url` is absolute and has a non-empty path segment.
pub fn is_profile_url(url: &Url) -> bool {
    !url.cannot_be_a_base()
        && url
            .path_segments()
            .map(|mut s| s.any(|seg| !seg.is_empty()))
            .unwrap_or(false)
}

pub fn parse_links_str(text: &str) -> Result<LinkList, ConfigError> {
    let mut urls = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let url = Url::parse(line).map_err(|_| ConfigError::BadUrl(idx + 1))?;
        if !is_profile_url(&url) {
            return Err(ConfigError::BadUrl(idx + 1));
        }
        urls.push(url);
    }
    Ok(LinkList::from_urls(urls))
}

pub fn read_links_file(path: &Path) -> Result<LinkList, ConfigError> {
    parse_links_str(&open_existing(path)?)
}

pub fn write_links<W: Write>(mut out: W, links: &LinkList) -> io::Result<()> {
    for url in links.urls() {
        writeln!(out, "{url}")?;
    }
    Ok(())
}

pub fn write_links_file(path: &Path, links: &LinkList) -> io::Result<()> {
    let mut file = io::BufWriter::new(fs::File::create(path)?);
    write_links(&mut file, links)?;
    file.flush()
}
