//! Ground-truth export: profiles, posts and adjacency as flat CSV tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::{NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};

use super::{Account, DisclosureMask, FixtureError, FixtureNetwork, FixturePost, FixtureProfile};
use crate::model::{Attribute, Gender, PostType, ReactionKind, Relationship};

const LIST_SEP: char = ';';

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub profile_id: String,
    pub login: String,
    pub secret: String,
    pub gender: Gender,
    pub birthday: NaiveDate,
    pub email: String,
    pub phone: String,
    pub relationship_status: Relationship,
    pub hometown: String,
    pub current_city: String,
    pub family_members: String,
    pub pages_liked: String,
    pub groups_joined: String,
    /// Names of publicly shown attributes, `;`-separated.
    pub disclosed: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostRow {
    pub profile_id: String,
    /// 1-based, newest first.
    pub post_index: usize,
    pub post_type: PostType,
    pub title: String,
    pub content: String,
    pub date: NaiveDate,
    pub time: NaiveTime,
    pub comment_count: u64,
    pub like: u64,
    pub love: u64,
    pub haha: u64,
    pub wow: u64,
    pub sad: u64,
    pub angry: u64,
    pub share_count: u64,
    pub view_count: Option<u64>,
    pub tags: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjacencyRow {
    pub profile_a: String,
    pub profile_b: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruthTables {
    pub rng_seed: u64,
    pub profiles: Vec<ProfileRow>,
    pub posts: Vec<PostRow>,
    pub adjacency: Vec<AdjacencyRow>,
}

fn join(items: &[String]) -> String {
    items.join(&LIST_SEP.to_string())
}

fn split(s: &str) -> Vec<String> {
    if s.is_empty() {
        Vec::new()
    } else {
        s.split(LIST_SEP).map(str::to_string).collect()
    }
}

pub fn ground_truth(network: &FixtureNetwork) -> TruthTables {
    let mut profiles = Vec::with_capacity(network.len());
    let mut posts = Vec::new();
    let accounts: BTreeMap<&str, &Account> = network
        .accounts
        .iter()
        .map(|a| (a.profile_id.as_str(), a))
        .collect();
    for p in &network.nodes {
        let account = accounts.get(p.profile_id.as_str());
        let disclosed: Vec<String> = Attribute::ALL
            .iter()
            .filter(|a| p.disclosure.is_disclosed(**a))
            .map(|a| a.name().to_string())
            .collect();
        profiles.push(ProfileRow {
            profile_id: p.profile_id.clone(),
            login: account.map(|a| a.login.clone()).unwrap_or_default(),
            secret: account.map(|a| a.secret.clone()).unwrap_or_default(),
            gender: p.gender,
            birthday: p.birthday,
            email: p.email.clone(),
            phone: p.phone.clone(),
            relationship_status: p.relationship_status,
            hometown: p.hometown.clone(),
            current_city: p.current_city.clone(),
            family_members: join(&p.family_members),
            pages_liked: join(&p.pages_liked),
            groups_joined: join(&p.groups_joined),
            disclosed: join(&disclosed),
        });
        for (i, post) in p.posts.iter().enumerate() {
            let r = |k: ReactionKind| post.reaction_counts.get(&k).copied().unwrap_or(0);
            posts.push(PostRow {
                profile_id: p.profile_id.clone(),
                post_index: i + 1,
                post_type: post.post_type,
                title: post.title.clone(),
                content: post.content.clone(),
                date: post.date,
                time: post.time,
                comment_count: post.comment_count,
                like: r(ReactionKind::Like),
                love: r(ReactionKind::Love),
                haha: r(ReactionKind::Haha),
                wow: r(ReactionKind::Wow),
                sad: r(ReactionKind::Sad),
                angry: r(ReactionKind::Angry),
                share_count: post.share_count,
                view_count: post.view_count,
                tags: join(&post.tags),
            });
        }
    }
    let adjacency = network
        .edges()
        .iter()
        .map(|&(a, b)| AdjacencyRow {
            profile_a: network.nodes[a as usize].profile_id.clone(),
            profile_b: network.nodes[b as usize].profile_id.clone(),
        })
        .collect();
    TruthTables {
        rng_seed: network.rng_seed,
        profiles,
        posts,
        adjacency,
    }
}

fn write_table<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<(), FixtureError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_io)?;
    w.write_record(header).map_err(csv_io)?;
    for row in rows {
        w.serialize(row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn read_table<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, FixtureError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_io)?;
    r.deserialize().map(|row| row.map_err(csv_io)).collect()
}

fn csv_io(e: csv::Error) -> FixtureError {
    FixtureError::Io(std::io::Error::other(e))
}

pub const PROFILE_HEADER: [&str; 14] = [
    "profile_id", "login", "secret", "gender", "birthday", "email", "phone",
    "relationship_status", "hometown", "current_city", "family_members", "pages_liked",
    "groups_joined", "disclosed",
];
pub const POST_HEADER: [&str; 17] = [
    "profile_id", "post_index", "post_type", "title", "content", "date", "time",
    "comment_count", "like", "love", "haha", "wow", "sad", "angry", "share_count", "view_count",
    "tags",
];
pub const ADJACENCY_HEADER: [&str; 2] = ["profile_a", "profile_b"];

impl TruthTables {
    /// Writes `profiles.csv`, `posts.csv` and `adjacency.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), FixtureError> {
        fs::create_dir_all(dir)?;
        write_table(&dir.join("profiles.csv"), &self.profiles, &PROFILE_HEADER)?;
        write_table(&dir.join("posts.csv"), &self.posts, &POST_HEADER)?;
        write_table(&dir.join("adjacency.csv"), &self.adjacency, &ADJACENCY_HEADER)?;
        Ok(())
    }

    pub fn read_dir(dir: &Path, rng_seed: u64) -> Result<Self, FixtureError> {
        Ok(TruthTables {
            rng_seed,
            profiles: read_table(&dir.join("profiles.csv"))?,
            posts: read_table(&dir.join("posts.csv"))?,
            adjacency: read_table(&dir.join("adjacency.csv"))?,
        })
    }

    /// Rebuilds the network the tables were exported from.
    pub fn to_network(&self) -> Result<FixtureNetwork, FixtureError> {
        let mut posts_by_profile: BTreeMap<&str, Vec<&PostRow>> = BTreeMap::new();
        for row in &self.posts {
            posts_by_profile.entry(&row.profile_id).or_default().push(row);
        }
        let mut nodes = Vec::with_capacity(self.profiles.len());
        let mut accounts = Vec::new();
        let mut index = BTreeMap::new();
        for (i, row) in self.profiles.iter().enumerate() {
            index.insert(row.profile_id.as_str(), i as u32);
            let mut disclosure = DisclosureMask::all(false);
            for name in split(&row.disclosed) {
                let attr = Attribute::parse(&name)
                    .ok_or_else(|| FixtureError::BadParameter(format!("attribute {name}")))?;
                disclosure.set(attr, true);
            }
            let mut rows = posts_by_profile.remove(row.profile_id.as_str()).unwrap_or_default();
            rows.sort_by_key(|r| r.post_index);
            let posts = rows
                .into_iter()
                .map(|r| FixturePost {
                    post_type: r.post_type,
                    title: r.title.clone(),
                    content: r.content.clone(),
                    date: r.date,
                    time: r.time,
                    comment_count: r.comment_count,
                    reaction_counts: [
                        (ReactionKind::Like, r.like),
                        (ReactionKind::Love, r.love),
                        (ReactionKind::Haha, r.haha),
                        (ReactionKind::Wow, r.wow),
                        (ReactionKind::Sad, r.sad),
                        (ReactionKind::Angry, r.angry),
                    ]
                    .into_iter()
                    .collect(),
                    share_count: r.share_count,
                    view_count: r.view_count,
                    tags: split(&r.tags),
                })
                .collect();
            if !row.login.is_empty() {
                accounts.push(Account {
                    profile_id: row.profile_id.clone(),
                    login: row.login.clone(),
                    secret: row.secret.clone(),
                });
            }
            nodes.push(FixtureProfile {
                profile_id: row.profile_id.clone(),
                gender: row.gender,
                birthday: row.birthday,
                email: row.email.clone(),
                phone: row.phone.clone(),
                relationship_status: row.relationship_status,
                hometown: row.hometown.clone(),
                current_city: row.current_city.clone(),
                family_members: split(&row.family_members),
                pages_liked: split(&row.pages_liked),
                groups_joined: split(&row.groups_joined),
                posts,
                disclosure,
            });
        }
        let mut edges = Vec::with_capacity(self.adjacency.len());
        for row in &self.adjacency {
            let a = index.get(row.profile_a.as_str());
            let b = index.get(row.profile_b.as_str());
            match (a, b) {
                (Some(&a), Some(&b)) => edges.push((a, b)),
                _ => return Err(FixtureError::UnknownProfile(row.profile_a.clone())),
            }
        }
        FixtureNetwork::new(self.rng_seed, nodes, accounts, edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::{generate_network, GeneratorParams};

    fn net(n: usize, seed: u64) -> FixtureNetwork {
        generate_network(&GeneratorParams {
            n_profiles: n,
            rng_seed: seed,
            ..GeneratorParams::default()
        })
        .unwrap()
    }

    #[test]
    fn single_node_tables() {
        let t = ground_truth(&net(1, 4));
        assert_eq!(t.profiles.len(), 1);
        assert!(t.adjacency.is_empty());
    }

    #[test]
    fn adjacency_rows_match_edges_and_exports_are_stable() {
        let n = net(200, 8);
        let a = ground_truth(&n);
        assert_eq!(a.adjacency.len(), n.edges().len());
        assert_eq!(a, ground_truth(&n));
    }

    #[test]
    fn export_is_lossless_through_csv() {
        let n = net(150, 12);
        let dir = tempfile::tempdir().unwrap();
        ground_truth(&n).write_dir(dir.path()).unwrap();
        let back = TruthTables::read_dir(dir.path(), n.rng_seed).unwrap();
        assert_eq!(back, ground_truth(&n));
        assert_eq!(back.to_network().unwrap(), n);
    }
}
