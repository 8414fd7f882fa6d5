//! City filter and disclosure / wall-activity statistics.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use super::records::{Disclosure, Field, PostRecord, ProfileRecord};
use super::store::Store;
use super::PipelineError;
use crate::exec::{self, ExecMode};
use crate::model::{Attribute, ReactionKind};

fn city_key(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Profiles whose current city matches one of `cities`, ordered by id.
pub fn filter_by_city<S: AsRef<str>>(store: &Store, cities: &[S]) -> Vec<ProfileRecord> {
    filter_records(&store.profiles(), cities)
}

pub fn filter_records<S: AsRef<str>>(profiles: &[ProfileRecord], cities: &[S]) -> Vec<ProfileRecord> {
    let wanted: HashSet<String> = cities.iter().map(|c| city_key(c.as_ref())).collect();
    if wanted.is_empty() {
        return Vec::new();
    }
    profiles
        .iter()
        .filter(|p| match &p.current_city {
            Field::Value(city) => wanted.contains(&city_key(city)),
            _ => false,
        })
        .cloned()
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AttributeDisclosure {
    pub disclosed: usize,
    pub not_disclosed: usize,
    pub unparseable: usize,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DisclosureStats {
    pub population: usize,
    pub attributes: BTreeMap<&'static str, AttributeDisclosure>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PostTypeStats {
    pub total_posts: usize,
    /// Posts per type; posts without a parsed type count under `unknown`.
    pub by_type: BTreeMap<String, usize>,
    pub posts_per_profile: BTreeMap<String, usize>,
    pub reaction_totals: BTreeMap<&'static str, u64>,
    pub tag_frequency: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BehaviorSummary {
    pub disclosure: DisclosureStats,
    pub posts: PostTypeStats,
}

pub fn disclosure_stats(population: &[ProfileRecord]) -> DisclosureStats {
    let n = population.len();
    let attributes = Attribute::ALL
        .into_iter()
        .map(|attr| {
            let mut d = AttributeDisclosure::default();
            for p in population {
                match p.disclosure(attr) {
                    Disclosure::Disclosed => d.disclosed += 1,
                    Disclosure::NotDisclosed => d.not_disclosed += 1,
                    Disclosure::Unparseable => d.unparseable += 1,
                }
            }
            d.rate = if n == 0 { 0.0 } else { d.disclosed as f64 / n as f64 };
            (attr.name(), d)
        })
        .collect();
    DisclosureStats { population: n, attributes }
}

fn add_posts(stats: &mut PostTypeStats, profile_id: &str, posts: &[PostRecord]) {
    stats.total_posts += posts.len();
    stats.posts_per_profile.insert(profile_id.to_string(), posts.len());
    for post in posts {
        let ty = match &post.post_type {
            Field::Value(t) => t.as_str().to_string(),
            _ => "unknown".to_string(),
        };
        *stats.by_type.entry(ty).or_default() += 1;
        for (kind, count) in &post.emotion_counts {
            if let Field::Value(c) = count {
                *stats.reaction_totals.entry(kind.as_str()).or_default() += c;
            }
        }
        if let Field::Value(tags) = &post.tags {
            for tag in tags {
                *stats.tag_frequency.entry(tag.clone()).or_default() += 1;
            }
        }
    }
}

pub fn post_stats(posts_by_profile: &[(String, Vec<PostRecord>)]) -> PostTypeStats {
    let mut stats = PostTypeStats {
        reaction_totals: ReactionKind::ALL.into_iter().map(|k| (k.as_str(), 0)).collect(),
        ..Default::default()
    };
    for (id, posts) in posts_by_profile {
        add_posts(&mut stats, id, posts);
    }
    stats
}

/// Statistics over `population`, with posts taken from the store.
pub fn behavior_summary(store: &Store, population: &[ProfileRecord]) -> Result<BehaviorSummary, PipelineError> {
    behavior_summary_with(store, population, ExecMode::default())
}

pub fn behavior_summary_with(
    store: &Store,
    population: &[ProfileRecord],
    mode: ExecMode,
) -> Result<BehaviorSummary, PipelineError> {
    if population.is_empty() {
        return Err(PipelineError::EmptyPopulation);
    }
    let mut seen = HashSet::new();
    let unique: Vec<&ProfileRecord> = population.iter().filter(|p| seen.insert(p.profile_id.as_str())).collect();
    let posts = exec::map(mode, &unique, |p| (p.profile_id.clone(), store.posts_of(&p.profile_id)));
    Ok(BehaviorSummary {
        disclosure: disclosure_stats(population),
        posts: post_stats(&posts),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Gender, PostType};

    fn profile(id: &str, city: Field<String>, gender: Field<Gender>) -> ProfileRecord {
        ProfileRecord {
            profile_id: id.into(),
            profile_url: format!("http://h/profile/{id}"),
            friend_count: Field::Value(0),
            birthday: Field::NotDisclosed,
            email: Field::NotDisclosed,
            phone: Field::NotDisclosed,
            family_members: Field::NotDisclosed,
            relationship_status: Field::NotDisclosed,
            gender,
            hometown: Field::NotDisclosed,
            current_city: city,
            pages_liked: Field::NotDisclosed,
            groups_joined: Field::NotDisclosed,
            page_complete: true,
            seed_index: 1,
            captured_at: "t".into(),
        }
    }

    fn post(id: &str, index: usize, ty: PostType, likes: u64, tags: &[&str]) -> PostRecord {
        let mut emotion_counts: BTreeMap<_, _> = ReactionKind::ALL.into_iter().map(|k| (k, Field::Value(0))).collect();
        emotion_counts.insert(ReactionKind::Like, Field::Value(likes));
        PostRecord {
            profile_id: id.into(),
            post_index: index,
            post_type: Field::Value(ty),
            title: Field::Value("t".into()),
            content: Field::Value("c".into()),
            date: Field::NotDisclosed,
            time: Field::NotDisclosed,
            comment_count: Field::Value(0),
            emotion_counts,
            share_count: Field::Value(0),
            view_count: None,
            reaction_total: Field::Value(likes),
            tags: Field::Value(tags.iter().map(|s| s.to_string()).collect()),
            seed_index: 1,
            captured_at: "t".into(),
        }
    }

    #[test]
    fn city_match_is_trimmed_and_case_insensitive() {
        let ps = vec![
            profile("a", Field::Value(" delhi ".into()), Field::NotDisclosed),
            profile("b", Field::Value("Pune".into()), Field::NotDisclosed),
            profile("c", Field::NotDisclosed, Field::NotDisclosed),
            profile("d", Field::Value("Chennai".into()), Field::NotDisclosed),
        ];
        let ids: Vec<_> = filter_records(&ps, &["Delhi", "PUNE"]).into_iter().map(|p| p.profile_id).collect();
        assert_eq!(ids, ["a", "b"]);
        assert!(filter_records(&ps, &[] as &[&str]).is_empty());
        assert!(filter_records(&ps, &["NOT_DISCLOSED"]).is_empty());
    }

    #[test]
    fn summary_counts() {
        let store = Store::in_memory();
        let ps = vec![
            profile("a", Field::NotDisclosed, Field::Value(Gender::Female)),
            profile("b", Field::NotDisclosed, Field::Value(Gender::Male)),
        ];
        for p in &ps {
            store.insert_profile(p.clone());
        }
        store.insert_post(post("a", 1, PostType::Photo, 3, &["b"]));
        store.insert_post(post("a", 2, PostType::Text, 2, &["b", "c"]));
        store.insert_post(post("b", 1, PostType::Photo, 0, &[]));
        let s = behavior_summary(&store, &ps).unwrap();
        assert_eq!(s.disclosure.attributes["gender"].rate, 1.0);
        assert_eq!(s.disclosure.attributes["email"].rate, 0.0);
        assert_eq!(s.posts.total_posts, 3);
        assert_eq!(s.posts.by_type.values().sum::<usize>(), 3);
        assert_eq!(s.posts.by_type["photo"], 2);
        assert_eq!(s.posts.posts_per_profile["a"], 2);
        assert_eq!(s.posts.reaction_totals["like"], 5);
        assert_eq!(s.posts.tag_frequency["b"], 2);
        for d in s.disclosure.attributes.values() {
            assert_eq!(d.disclosed + d.not_disclosed + d.unparseable, 2);
        }
    }

    #[test]
    fn empty_population_is_an_error() {
        assert!(matches!(
            behavior_summary(&Store::in_memory(), &[]),
            Err(PipelineError::EmptyPopulation)
        ));
    }
}
