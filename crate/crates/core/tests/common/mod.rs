//! Oracles and fixtures shared by the integration tests. Expected values
//! are derived from the generator's truth tables, never from crawler code.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use imcrawler_core::fixture::server::{FaultPlan, FixtureServer, ServerOptions};
use imcrawler_core::fixture::truth::{ground_truth, PostRow, ProfileRow, TruthTables};
use imcrawler_core::fixture::{generate_network, FixtureNetwork, GeneratorParams};
use imcrawler_core::model::{Attribute, ReactionKind};
use imcrawler_core::pipeline::{Field, PostRecord, ProfileRecord};
use url::Url;

pub fn network(n: usize, mean_degree: f64, seed: u64) -> Arc<FixtureNetwork> {
    Arc::new(
        generate_network(&GeneratorParams {
            n_profiles: n,
            mean_degree,
            rng_seed: seed,
            ..GeneratorParams::default()
        })
        .unwrap(),
    )
}

pub fn serve(net: &Arc<FixtureNetwork>) -> FixtureServer {
    serve_with(net, FaultPlan::default())
}

pub fn serve_with(net: &Arc<FixtureNetwork>, faults: FaultPlan) -> FixtureServer {
    FixtureServer::serve(
        Arc::clone(net),
        "127.0.0.1:0",
        ServerOptions {
            faults,
            ..ServerOptions::default()
        },
    )
    .unwrap()
}

pub fn truth(net: &FixtureNetwork) -> TruthTables {
    ground_truth(net)
}

/// Undirected adjacency from the truth table.
pub fn adjacency(t: &TruthTables) -> HashMap<String, BTreeSet<String>> {
    let mut adj: HashMap<String, BTreeSet<String>> =
        t.profiles.iter().map(|p| (p.profile_id.clone(), BTreeSet::new())).collect();
    for e in &t.adjacency {
        adj.get_mut(&e.profile_a).unwrap().insert(e.profile_b.clone());
        adj.get_mut(&e.profile_b).unwrap().insert(e.profile_a.clone());
    }
    adj
}

/// Hop distance (1..=depth) of every node reachable from `starts`,
/// excluding the starts, by repeated edge relaxation.
pub fn levels_by_relaxation(t: &TruthTables, starts: &[&str], depth: usize) -> BTreeMap<String, usize> {
    let mut dist: HashMap<&str, usize> = starts.iter().map(|s| (*s, 0)).collect();
    for round in 1..=depth {
        let mut next = Vec::new();
        for e in &t.adjacency {
            for (a, b) in [(&e.profile_a, &e.profile_b), (&e.profile_b, &e.profile_a)] {
                if dist.get(a.as_str()) == Some(&(round - 1)) && !dist.contains_key(b.as_str()) {
                    next.push(b.as_str());
                }
            }
        }
        for b in next {
            dist.entry(b).or_insert(round);
        }
    }
    dist.into_iter()
        .filter(|(_, d)| *d > 0)
        .map(|(k, d)| (k.to_string(), d))
        .collect()
}

/// Union of per-seed frontiers: everything within `depth` hops of any
/// seed (including other seeds reachable from one another).
pub fn frontier_union(t: &TruthTables, seeds: &[&str], depth: usize) -> BTreeSet<String> {
    seeds
        .iter()
        .flat_map(|s| levels_by_relaxation(t, &[s], depth).into_keys())
        .collect()
}

pub fn profile_url(endpoint: &Url, id: &str) -> String {
    endpoint.join(&format!("/profile/{id}")).unwrap().to_string()
}

fn split(s: &str) -> Vec<String> {
    if s.is_empty() {
        Vec::new()
    } else {
        s.split(';').map(str::to_string).collect()
    }
}

fn shown<T>(row: &ProfileRow, attr: Attribute, v: T) -> Field<T> {
    if row.disclosed.split(';').any(|d| d == attr.name()) {
        Field::Value(v)
    } else {
        Field::NotDisclosed
    }
}

/// The record a perfect crawl would store for `row`, provenance blanked.
pub fn expected_profile(t: &TruthTables, row: &ProfileRow, endpoint: &Url) -> ProfileRecord {
    let degree = t
        .adjacency
        .iter()
        .filter(|e| e.profile_a == row.profile_id || e.profile_b == row.profile_id)
        .count() as u64;
    ProfileRecord {
        profile_id: row.profile_id.clone(),
        profile_url: profile_url(endpoint, &row.profile_id),
        friend_count: Field::Value(degree),
        birthday: shown(row, Attribute::Birthday, row.birthday),
        email: shown(row, Attribute::Email, row.email.clone()),
        phone: shown(row, Attribute::Phone, row.phone.clone()),
        family_members: shown(row, Attribute::FamilyMembers, split(&row.family_members)),
        relationship_status: shown(row, Attribute::RelationshipStatus, row.relationship_status),
        gender: shown(row, Attribute::Gender, row.gender),
        hometown: shown(row, Attribute::Hometown, row.hometown.clone()),
        current_city: shown(row, Attribute::CurrentCity, row.current_city.clone()),
        pages_liked: shown(row, Attribute::PagesLiked, split(&row.pages_liked)),
        groups_joined: shown(row, Attribute::GroupsJoined, split(&row.groups_joined)),
        page_complete: true,
        seed_index: 0,
        captured_at: String::new(),
    }
}

pub fn expected_post(row: &PostRow) -> PostRecord {
    let counts = [
        (ReactionKind::Like, row.like),
        (ReactionKind::Love, row.love),
        (ReactionKind::Haha, row.haha),
        (ReactionKind::Wow, row.wow),
        (ReactionKind::Sad, row.sad),
        (ReactionKind::Angry, row.angry),
    ];
    PostRecord {
        profile_id: row.profile_id.clone(),
        post_index: row.post_index,
        post_type: Field::Value(row.post_type),
        title: Field::Value(row.title.clone()),
        content: Field::Value(row.content.clone()),
        date: Field::Value(row.date),
        time: Field::Value(row.time),
        comment_count: Field::Value(row.comment_count),
        emotion_counts: counts.iter().map(|(k, v)| (*k, Field::Value(*v))).collect(),
        share_count: Field::Value(row.share_count),
        view_count: row.view_count.map(Field::Value),
        reaction_total: Field::Value(counts.iter().map(|(_, v)| v).sum()),
        tags: Field::Value(split(&row.tags)),
        seed_index: 0,
        captured_at: String::new(),
    }
}

/// Expected posts of one profile, capped at `total_post`.
pub fn expected_posts(t: &TruthTables, profile_id: &str, total_post: usize) -> Vec<PostRecord> {
    t.posts
        .iter()
        .filter(|p| p.profile_id == profile_id && p.post_index <= total_post)
        .map(expected_post)
        .collect()
}

pub fn blank_profile(p: &ProfileRecord) -> ProfileRecord {
    p.content()
}

pub fn blank_post(p: &PostRecord) -> PostRecord {
    p.content()
}

pub fn ids(xs: impl IntoIterator<Item = impl AsRef<str>>) -> BTreeSet<String> {
    xs.into_iter().map(|x| x.as_ref().to_string()).collect()
}
