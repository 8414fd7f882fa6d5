use chrono::{Duration, NaiveDate, NaiveTime};
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Account, DisclosureMask, FixtureError, FixtureNetwork, FixturePost, FixtureProfile};
use crate::exec::{self, ExecMode};
use crate::model::{Attribute, Gender, PostType, ReactionKind, Relationship};

pub const METRO_CITIES: [&str; 4] = ["Bangalore", "Delhi", "Mumbai", "Pune"];
pub const OTHER_CITIES: [&str; 8] = [
    "Chennai", "Kolkata", "Hyderabad", "Jaipur", "Lucknow", "Srinagar", "Bhopal", "Kochi",
];

const FIRST_NAMES: [&str; 16] = [
    "aarav", "diya", "kabir", "meera", "rohan", "sana", "vikram", "zoya", "arjun", "isha", "nikhil",
    "priya", "farhan", "tara", "yusuf", "anaya",
];
const PAGES: [&str; 16] = [
    "Cricket Fans", "Bollywood Buzz", "Street Food Diaries", "Monsoon Clicks", "Indie Music Hub",
    "Tech Talk", "Daily Quotes", "Travel & Trails", "Chai Lovers", "Football Nation",
    "Startup Stories", "Book Nook", "Photography Club", "Comedy Central India", "Yoga Daily",
    "Retro Gaming",
];
const GROUPS: [&str; 12] = [
    "Alumni Network", "Flat Hunters", "Weekend Trekkers", "Coding Circle", "Foodies United",
    "Parents Forum", "Book Swap", "Cycling Crew", "Job Leads", "Music Jam", "Pet Owners",
    "Language Exchange",
];
const WORDS: [&str; 32] = [
    "monsoon", "chai", "traffic", "weekend", "friends", "family", "cricket", "match", "movie",
    "sunset", "festival", "lights", "road", "trip", "exam", "results", "birthday", "party",
    "office", "rain", "street", "food", "music", "it's", "great", "today", "finally", "&",
    "\"best\"", "memories", "new", "home",
];

/// Arguments of [`generate_network`].
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorParams {
    pub n_profiles: usize,
    pub mean_degree: f64,
    /// City name to weight. The key `other` draws from a pool of non-metro cities.
    pub city_weights: Vec<(String, f64)>,
    /// Probability that any one attribute is shown publicly.
    pub disclosure_rate: f64,
    /// Inclusive range of posts per profile.
    pub posts_per_profile: (usize, usize),
    pub rng_seed: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            n_profiles: 200,
            mean_degree: 10.0,
            city_weights: default_city_weights(),
            disclosure_rate: 0.6,
            posts_per_profile: (0, 12),
            rng_seed: 0,
        }
    }
}

pub fn default_city_weights() -> Vec<(String, f64)> {
    vec![
        ("Bangalore".into(), 6.0),
        ("Delhi".into(), 6.0),
        ("Mumbai".into(), 6.0),
        ("Pune".into(), 5.0),
        ("other".into(), 77.0),
    ]
}

impl GeneratorParams {
    fn validate(&self) -> Result<(), FixtureError> {
        let bad = |m: &str| Err(FixtureError::BadParameter(m.to_string()));
        if self.n_profiles == 0 {
            return bad("n_profiles must be at least 1");
        }
        if self.n_profiles > u32::MAX as usize {
            return bad("n_profiles too large");
        }
        if !(self.mean_degree.is_finite() && self.mean_degree > 0.0) {
            return bad("mean_degree must be positive");
        }
        if self.city_weights.is_empty()
            || self.city_weights.iter().any(|(_, w)| !w.is_finite() || *w < 0.0)
            || self.city_weights.iter().all(|(_, w)| *w == 0.0)
        {
            return bad("city weights must be non-negative and not all zero");
        }
        if !(0.0..=1.0).contains(&self.disclosure_rate) {
            return bad("disclosure_rate must lie in [0, 1]");
        }
        if self.posts_per_profile.0 > self.posts_per_profile.1 {
            return bad("posts_per_profile range is empty");
        }
        Ok(())
    }
}

const STREAM_EDGES: u64 = 1 << 40;
const STREAM_PROFILES: u64 = 2 << 40;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn generate_network(params: &GeneratorParams) -> Result<FixtureNetwork, FixtureError> {
    generate_network_with(params, ExecMode::default())
}

/// Same output for every `mode`: each row and profile has its own RNG stream.
pub fn generate_network_with(
    params: &GeneratorParams,
    mode: ExecMode,
) -> Result<FixtureNetwork, FixtureError> {
    params.validate()?;
    let n = params.n_profiles;
    let edge_rows = exec::map_range(mode, n, |i| edge_row(params, i));
    let edges: Vec<(u32, u32)> = edge_rows.into_iter().flatten().collect();

    let mut neighbors = vec![Vec::new(); n];
    for &(a, b) in &edges {
        neighbors[a as usize].push(b);
        neighbors[b as usize].push(a);
    }
    let cities = WeightedIndex::new(params.city_weights.iter().map(|(_, w)| *w))
        .map_err(|e| FixtureError::BadParameter(e.to_string()))?;
    let generated = exec::map_range(mode, n, |i| profile(params, &cities, i, &neighbors[i]));
    let (nodes, accounts) = generated.into_iter().unzip();
    FixtureNetwork::new(params.rng_seed, nodes, accounts, edges)
}

/// G(n, p) row `i`: partners `j > i`, drawn with geometric skips.
fn edge_row(params: &GeneratorParams, i: usize) -> Vec<(u32, u32)> {
    let n = params.n_profiles;
    if n < 2 {
        return Vec::new();
    }
    let p = (params.mean_degree / (n - 1) as f64).min(1.0);
    if p >= 1.0 {
        return ((i + 1)..n).map(|j| (i as u32, j as u32)).collect();
    }
    let mut rng = stream_rng(params.rng_seed, STREAM_EDGES | i as u64);
    let log_q = (1.0 - p).ln();
    let mut out = Vec::new();
    let mut j = i as f64;
    loop {
        let u: f64 = rng.gen();
        let skip = ((1.0 - u).ln() / log_q).floor();
        j += 1.0 + skip;
        if j >= n as f64 {
            break;
        }
        out.push((i as u32, j as u32));
    }
    out
}

pub fn profile_id(index: usize) -> String {
    format!("u{index}")
}

fn rounded_large(rng: &mut ChaCha8Rng, lo: u64, hi: u64, step: u64) -> u64 {
    rng.gen_range(lo / step..=hi / step) * step
}

fn count(rng: &mut ChaCha8Rng, small_max: u64, big_chance: f64) -> u64 {
    if rng.gen_bool(big_chance) {
        rounded_large(rng, 1_000, 49_900, 100)
    } else {
        rng.gen_range(0..=small_max)
    }
}

fn pick_distinct<T: Clone>(rng: &mut ChaCha8Rng, pool: &[T], k: usize) -> Vec<T> {
    pool.choose_multiple(rng, k.min(pool.len())).cloned().collect()
}

fn profile(
    params: &GeneratorParams,
    cities: &WeightedIndex<f64>,
    i: usize,
    friends: &[u32],
) -> (FixtureProfile, Account) {
    let mut rng = stream_rng(params.rng_seed, STREAM_PROFILES | i as u64);
    let n = params.n_profiles;
    let id = profile_id(i);

    let gender = *[Gender::Male, Gender::Female, Gender::Unspecified]
        .choose_weighted(&mut rng, |g| match g {
            Gender::Unspecified => 4,
            _ => 48,
        })
        .expect("non-empty");
    let birthday = NaiveDate::from_ymd_opt(rng.gen_range(1960..=2002), 1, 1).expect("valid")
        + Duration::days(rng.gen_range(0..365));
    let first = FIRST_NAMES.choose(&mut rng).expect("non-empty");
    let email = format!("{first}.{id}@mail.test");
    let phone = format!("+91 9{:09}", rng.gen_range(0..1_000_000_000u64));
    let relationship_status = *Relationship::ALL.choose(&mut rng).expect("non-empty");
    let all_cities: Vec<&str> = METRO_CITIES.iter().chain(OTHER_CITIES.iter()).copied().collect();
    let hometown = all_cities.choose(&mut rng).expect("non-empty").to_string();
    let (city_key, _) = &params.city_weights[cities.sample(&mut rng)];
    let current_city = if city_key.eq_ignore_ascii_case("other") {
        OTHER_CITIES.choose(&mut rng).expect("non-empty").to_string()
    } else {
        city_key.clone()
    };

    let family_size = rng.gen_range(0..=3usize).min(n - 1);
    let mut family_members = Vec::with_capacity(family_size);
    while family_members.len() < family_size {
        let j = rng.gen_range(0..n);
        let fid = profile_id(j);
        if j != i && !family_members.contains(&fid) {
            family_members.push(fid);
        }
    }
    let n_pages = rng.gen_range(1..=5);
    let pages_liked = pick_distinct(&mut rng, &PAGES, n_pages)
        .into_iter()
        .map(String::from)
        .collect();
    let n_groups = rng.gen_range(1..=4);
    let groups_joined = pick_distinct(&mut rng, &GROUPS, n_groups)
        .into_iter()
        .map(String::from)
        .collect();

    let mut disclosure = DisclosureMask::default();
    for attr in Attribute::ALL {
        disclosure.set(attr, rng.gen_bool(params.disclosure_rate));
    }

    let (lo, hi) = params.posts_per_profile;
    let n_posts = rng.gen_range(lo..=hi);
    let friend_ids: Vec<String> = friends.iter().map(|&j| profile_id(j as usize)).collect();
    let mut date = NaiveDate::from_ymd_opt(2018, 6, 30).expect("valid");
    let mut latest_minute = 24 * 60 - 1;
    let mut posts = Vec::with_capacity(n_posts);
    for k in 0..n_posts {
        let gap = rng.gen_range(0..=9);
        if gap > 0 {
            date -= Duration::days(gap);
            latest_minute = 24 * 60 - 1;
        }
        let minute = rng.gen_range(0..=latest_minute);
        latest_minute = minute;
        let time = NaiveTime::from_hms_opt(minute / 60, minute % 60, 0).expect("valid");
        posts.push(post(&mut rng, k, date, time, &friend_ids));
    }

    let secret: String = (0..10)
        .map(|_| *b"abcdefghijkmnpqrstuvwxyz23456789".choose(&mut rng).expect("non-empty") as char)
        .collect();
    let account = Account {
        profile_id: id.clone(),
        login: format!("login.{id}"),
        secret,
    };
    let profile = FixtureProfile {
        profile_id: id,
        gender,
        birthday,
        email,
        phone,
        relationship_status,
        hometown,
        current_city,
        family_members,
        pages_liked,
        groups_joined,
        posts,
        disclosure,
    };
    (profile, account)
}

fn post(
    rng: &mut ChaCha8Rng,
    k: usize,
    date: NaiveDate,
    time: NaiveTime,
    friends: &[String],
) -> FixturePost {
    let post_type = *PostType::ALL
        .choose_weighted(rng, |t| match t {
            PostType::Text => 40,
            PostType::Photo => 30,
            PostType::Video => 15,
            PostType::Link => 15,
        })
        .expect("non-empty");
    let title = format!(
        "{} {} #{}",
        WORDS.choose(rng).expect("non-empty"),
        WORDS.choose(rng).expect("non-empty"),
        k + 1
    );
    let n_words = rng.gen_range(4..=16);
    let content = (0..n_words)
        .map(|_| *WORDS.choose(rng).expect("non-empty"))
        .collect::<Vec<_>>()
        .join(" ");
    let comment_count = count(rng, 60, 0.03);
    let reaction_counts = ReactionKind::ALL
        .iter()
        .map(|kind| {
            let n = match kind {
                ReactionKind::Like => count(rng, 300, 0.03),
                _ => rng.gen_range(0..=25),
            };
            (*kind, n)
        })
        .collect();
    let share_count = count(rng, 40, 0.05);
    let view_count = (post_type == PostType::Video).then(|| match rng.gen_range(0..3) {
        0 => rng.gen_range(100..1_000),
        1 => rounded_large(rng, 1_000, 999_900, 100),
        _ => rounded_large(rng, 1_000_000, 9_900_000, 100_000),
    });
    let n_tags = rng.gen_range(0..=2usize);
    let tags = pick_distinct(rng, friends, n_tags);
    FixturePost {
        post_type,
        title,
        content,
        date,
        time,
        comment_count,
        reaction_counts,
        share_count,
        view_count,
        tags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, mean_degree: f64, seed: u64) -> GeneratorParams {
        GeneratorParams {
            n_profiles: n,
            mean_degree,
            rng_seed: seed,
            ..GeneratorParams::default()
        }
    }

    #[test]
    fn single_node_has_no_edges() {
        let net = generate_network(&params(1, 5.0, 1)).unwrap();
        assert_eq!(net.len(), 1);
        assert!(net.edges().is_empty());
        assert!(net.nodes[0].family_members.is_empty());
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = generate_network(&params(500, 10.0, 42)).unwrap();
        let b = generate_network(&params(500, 10.0, 42)).unwrap();
        assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap());
        let c = generate_network(&params(500, 10.0, 43)).unwrap();
        assert_ne!(a.to_bytes().unwrap(), c.to_bytes().unwrap());
    }

    #[test]
    fn modes_produce_identical_networks() {
        let p = params(300, 8.0, 9);
        let outputs: Vec<_> = ExecMode::available()
            .into_iter()
            .map(|m| generate_network_with(&p, m).unwrap().to_bytes().unwrap())
            .collect();
        assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn realized_mean_degree() {
        // Degree sum over the generated edge set.
        let net = generate_network(&params(1000, 20.0, 7)).unwrap();
        let degree_sum: usize = (0..net.len()).map(|i| net.neighbor_indices(i).len()).sum();
        let mean = degree_sum as f64 / net.len() as f64;
        assert!((17.0..=23.0).contains(&mean), "mean degree {mean}");
        for seed in 0..5 {
            let net = generate_network(&params(200, 6.0, seed)).unwrap();
            assert!((net.mean_degree() - 6.0).abs() <= 0.15 * 6.0, "{}", net.mean_degree());
        }
    }

    #[test]
    fn dense_request_saturates() {
        let net = generate_network(&params(5, 100.0, 1)).unwrap();
        assert_eq!(net.edges().len(), 10);
    }

    #[test]
    fn structural_invariants() {
        let net = generate_network(&params(300, 12.0, 5)).unwrap();
        for (i, p) in net.nodes.iter().enumerate() {
            assert!(!net.neighbor_indices(i).contains(&(i as u32)));
            for &j in net.neighbor_indices(i) {
                assert!(net.neighbor_indices(j as usize).contains(&(i as u32)));
            }
            assert!(p.posts.windows(2).all(|w| (w[0].date, w[0].time) >= (w[1].date, w[1].time)));
            for post in &p.posts {
                assert_eq!(post.view_count.is_some(), post.post_type == PostType::Video);
                assert!(post.tags.iter().all(|t| net.friends_of(&p.profile_id).unwrap().contains(&t.as_str())));
            }
            assert!(!p.family_members.contains(&p.profile_id));
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let bad = [
            GeneratorParams { n_profiles: 0, ..GeneratorParams::default() },
            GeneratorParams { mean_degree: 0.0, ..GeneratorParams::default() },
            GeneratorParams { disclosure_rate: 1.5, ..GeneratorParams::default() },
            GeneratorParams { city_weights: vec![("Delhi".into(), 0.0)], ..GeneratorParams::default() },
            GeneratorParams { city_weights: vec![("Delhi".into(), -1.0)], ..GeneratorParams::default() },
            GeneratorParams { posts_per_profile: (3, 1), ..GeneratorParams::default() },
        ];
        for p in bad {
            assert!(matches!(generate_network(&p), Err(FixtureError::BadParameter(_))), "{p:?}");
        }
    }

    #[test]
    fn city_assignment_follows_weights() {
        let p = GeneratorParams {
            n_profiles: 4000,
            city_weights: vec![("Delhi".into(), 1.0), ("Pune".into(), 3.0)],
            ..params(4000, 2.0, 11)
        };
        let net = generate_network(&p).unwrap();
        let pune = net.nodes.iter().filter(|p| p.current_city == "Pune").count();
        assert_eq!(
            pune + net.nodes.iter().filter(|p| p.current_city == "Delhi").count(),
            4000
        );
        // Binomial(4000, 0.75): sd ~ 27.
        assert!((2850..=3150).contains(&pune), "{pune}");
    }
}
