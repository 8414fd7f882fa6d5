//! Deterministic synthetic social network used as the crawl target.
//!
//! A [`FixtureNetwork`] holds profiles, their posts and an undirected
//! friendship edge set. [`render`] turns a profile into the About, friends
//! and timeline pages; [`server`] serves them over HTTP behind a login;
//! [`truth`] exports the generator's ground truth as flat tables.

mod generate;
pub mod render;
pub mod server;
pub mod truth;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io;
use std::path::Path;
use std::sync::OnceLock;

use chrono::{NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config_io::SeedProfile;
use crate::model::{Attribute, Gender, PostType, ReactionKind, Relationship};

pub use generate::{METRO_CITIES, default_city_weights, generate_network, generate_network_with, profile_id, GeneratorParams};

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("bad generator parameter: {0}")]
    BadParameter(String),
    #[error("unknown profile {0:?}")]
    UnknownProfile(String),
    #[error("invalid edge ({0}, {1})")]
    InvalidEdge(u32, u32),
    #[error("network file: {0}")]
    Codec(#[from] bincode::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Which attributes a profile shows publicly.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisclosureMask(BTreeMap<Attribute, bool>);

impl DisclosureMask {
    pub fn all(disclosed: bool) -> Self {
        DisclosureMask(Attribute::ALL.iter().map(|a| (*a, disclosed)).collect())
    }

    pub fn is_disclosed(&self, attr: Attribute) -> bool {
        self.0.get(&attr).copied().unwrap_or(false)
    }

    pub fn set(&mut self, attr: Attribute, disclosed: bool) {
        self.0.insert(attr, disclosed);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixturePost {
    pub post_type: PostType,
    pub title: String,
    pub content: String,
    pub date: NaiveDate,
    pub time: NaiveTime,
    pub comment_count: u64,
    pub reaction_counts: BTreeMap<ReactionKind, u64>,
    pub share_count: u64,
    /// Present exactly for videos.
    pub view_count: Option<u64>,
    pub tags: Vec<String>,
}

impl FixturePost {
    pub fn reaction_total(&self) -> u64 {
        self.reaction_counts.values().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureProfile {
    pub profile_id: String,
    pub gender: Gender,
    pub birthday: NaiveDate,
    pub email: String,
    pub phone: String,
    pub relationship_status: Relationship,
    pub hometown: String,
    pub current_city: String,
    pub family_members: Vec<String>,
    pub pages_liked: Vec<String>,
    pub groups_joined: Vec<String>,
    /// Newest first.
    pub posts: Vec<FixturePost>,
    pub disclosure: DisclosureMask,
}

/// Login credentials for a profile's account.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub profile_id: String,
    pub login: String,
    pub secret: String,
}

impl Account {
    pub fn to_seed(&self) -> SeedProfile {
        SeedProfile::new(&self.profile_id, &self.login, &self.secret)
    }
}

#[derive(Debug, Default)]
struct NetworkIndex {
    by_id: HashMap<String, usize>,
    neighbors: Vec<Vec<u32>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FixtureNetwork {
    pub rng_seed: u64,
    pub nodes: Vec<FixtureProfile>,
    pub accounts: Vec<Account>,
    /// Undirected edges as `(low, high)` node indices, sorted, unique.
    edges: Vec<(u32, u32)>,
    #[serde(skip)]
    index: OnceLock<NetworkIndex>,
}

impl Clone for FixtureNetwork {
    fn clone(&self) -> Self {
        FixtureNetwork {
            rng_seed: self.rng_seed,
            nodes: self.nodes.clone(),
            accounts: self.accounts.clone(),
            edges: self.edges.clone(),
            index: OnceLock::new(),
        }
    }
}

impl PartialEq for FixtureNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.rng_seed == other.rng_seed
            && self.nodes == other.nodes
            && self.accounts == other.accounts
            && self.edges == other.edges
    }
}

impl FixtureNetwork {
    /// Builds a network, canonicalising the edge set and rejecting self-loops
    /// and dangling endpoints.
    pub fn new(
        rng_seed: u64,
        nodes: Vec<FixtureProfile>,
        accounts: Vec<Account>,
        edges: Vec<(u32, u32)>,
    ) -> Result<Self, FixtureError> {
        let mut net = FixtureNetwork {
            rng_seed,
            nodes,
            accounts,
            edges: Vec::new(),
            index: OnceLock::new(),
        };
        net.set_edges(edges)?;
        Ok(net)
    }

    pub fn set_edges(&mut self, edges: Vec<(u32, u32)>) -> Result<(), FixtureError> {
        let n = self.nodes.len() as u32;
        let mut canonical = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a == b || a >= n || b >= n {
                return Err(FixtureError::InvalidEdge(a, b));
            }
            canonical.push((a.min(b), a.max(b)));
        }
        canonical.sort_unstable();
        canonical.dedup();
        self.edges = canonical;
        self.index = OnceLock::new();
        Ok(())
    }

    /// Adds a friendship between two profiles by id.
    pub fn add_friendship(&mut self, a: &str, b: &str) -> Result<(), FixtureError> {
        let ia = self.index_of(a)? as u32;
        let ib = self.index_of(b)? as u32;
        let mut edges = std::mem::take(&mut self.edges);
        edges.push((ia, ib));
        self.set_edges(edges)
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn index(&self) -> &NetworkIndex {
        self.index.get_or_init(|| {
            let mut neighbors = vec![Vec::new(); self.nodes.len()];
            for &(a, b) in &self.edges {
                neighbors[a as usize].push(b);
                neighbors[b as usize].push(a);
            }
            for list in &mut neighbors {
                list.sort_unstable();
            }
            let by_id = self
                .nodes
                .iter()
                .enumerate()
                .map(|(i, p)| (p.profile_id.clone(), i))
                .collect();
            NetworkIndex { by_id, neighbors }
        })
    }

    pub fn index_of(&self, profile_id: &str) -> Result<usize, FixtureError> {
        self.index()
            .by_id
            .get(profile_id)
            .copied()
            .ok_or_else(|| FixtureError::UnknownProfile(profile_id.to_string()))
    }

    pub fn profile(&self, profile_id: &str) -> Result<&FixtureProfile, FixtureError> {
        Ok(&self.nodes[self.index_of(profile_id)?])
    }

    pub fn profile_mut(&mut self, profile_id: &str) -> Result<&mut FixtureProfile, FixtureError> {
        let i = self.index_of(profile_id)?;
        Ok(&mut self.nodes[i])
    }

    /// Neighbour node indices in ascending order.
    pub fn neighbor_indices(&self, node: usize) -> &[u32] {
        &self.index().neighbors[node]
    }

    /// Friend profile ids in the order pages list them.
    pub fn friends_of(&self, profile_id: &str) -> Result<Vec<&str>, FixtureError> {
        let i = self.index_of(profile_id)?;
        Ok(self
            .neighbor_indices(i)
            .iter()
            .map(|&j| self.nodes[j as usize].profile_id.as_str())
            .collect())
    }

    pub fn degree(&self, profile_id: &str) -> Result<usize, FixtureError> {
        Ok(self.neighbor_indices(self.index_of(profile_id)?).len())
    }

    pub fn mean_degree(&self) -> f64 {
        if self.nodes.is_empty() {
            0.0
        } else {
            2.0 * self.edges.len() as f64 / self.nodes.len() as f64
        }
    }

    pub fn account(&self, profile_id: &str) -> Option<&Account> {
        self.accounts.iter().find(|a| a.profile_id == profile_id)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, FixtureError> {
        Ok(bincode::serialize(self)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FixtureError> {
        let net: FixtureNetwork = bincode::deserialize(bytes)?;
        // Re-validate: the file may have been produced elsewhere.
        let edges = net.edges.clone();
        FixtureNetwork::new(net.rng_seed, net.nodes, net.accounts, edges)
    }

    pub fn save(&self, path: &Path) -> Result<(), FixtureError> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, FixtureError> {
        Self::from_bytes(&fs::read(path)?)
    }
}
