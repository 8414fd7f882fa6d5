mod common;

use std::collections::BTreeSet;
use std::fs;

use imcrawler_core::config_io::{read_links_file, write_links_file, CrawlConfig, LinkList, SeedProfile};
use imcrawler_core::crawl::{crawl, crawl_with, CrawlError, CrawlOptions, RetryPolicy};
use imcrawler_core::fixture::render::PageKind;
use imcrawler_core::fixture::server::FaultPlan;
use imcrawler_core::pipeline::normalize_raw;
use url::Url;

use common::*;

fn config(dir: &std::path::Path, total_post: usize, depth: usize) -> CrawlConfig {
    let mut c = CrawlConfig::new(dir.join("links.txt"), dir.join("raw.csv"), total_post);
    c.depth = depth;
    c.min_delay_ms = 0;
    c.max_delay_ms = 0;
    c
}

fn quick() -> CrawlOptions {
    CrawlOptions {
        retry: RetryPolicy::immediate(3),
        ..CrawlOptions::default()
    }
}

#[test]
fn crawl_output_matches_ground_truth() {
    let net = network(80, 4.0, 11);
    let t = truth(&net);
    let server = serve(&net);
    let endpoint = server.base_url();
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 5, 2);
    let seeds = vec![net.accounts[0].to_seed()];
    let summary = crawl_with(&seeds, &cfg, &endpoint, &quick()).unwrap();

    let expected = frontier_union(&t, &["u0"], 2);
    let links: BTreeSet<String> = read_links_file(&cfg.friend_links_path)
        .unwrap()
        .urls()
        .iter()
        .map(|u| u.path().trim_start_matches("/profile/").to_string())
        .collect();
    assert_eq!(links, expected);
    assert_eq!(summary.profiles_captured, expected.len());
    assert_eq!(summary.fetch_errors, 0);

    let norm = normalize_raw(&cfg.output_path).unwrap();
    assert!(norm.skipped.is_empty(), "{:?}", norm.skipped);
    assert_eq!(norm.rows_total, norm.rows_used);
    assert_eq!(ids(norm.profiles.iter().map(|p| &p.profile_id)), expected);
    for p in &norm.profiles {
        let row = t.profiles.iter().find(|r| r.profile_id == p.profile_id).unwrap();
        assert_eq!(blank_profile(p), expected_profile(&t, row, &endpoint), "{}", p.profile_id);
        assert_eq!(p.seed_index, 1);
    }
    let mut got: Vec<_> = norm.posts.iter().map(blank_post).collect();
    got.sort_by(|a, b| (&a.profile_id, a.post_index).cmp(&(&b.profile_id, b.post_index)));
    let mut want: Vec<_> = expected.iter().flat_map(|id| expected_posts(&t, id, 5)).collect();
    want.sort_by(|a, b| (&a.profile_id, a.post_index).cmp(&(&b.profile_id, b.post_index)));
    assert_eq!(got, want);

    let counters = server.session_counters();
    assert_eq!((counters.logins, counters.logouts, counters.active), (1, 1, 0));
}

#[test]
fn reextraction_visits_only_listed_profiles() {
    let net = network(40, 4.0, 3);
    let server = serve(&net);
    let endpoint = server.base_url();
    let dir = tempfile::tempdir().unwrap();
    let listed = ["u5", "u9", "u17"];
    let redo = dir.path().join("redo.txt");
    write_links_file(
        &redo,
        &LinkList::from_urls(listed.iter().map(|id| Url::parse(&profile_url(&endpoint, id)).unwrap())),
    )
    .unwrap();
    let mut cfg = config(dir.path(), 3, 1);
    cfg.reextract_links_path = Some(redo);
    cfg.seed_profile_index = Some(2);
    let seeds: Vec<SeedProfile> = net.accounts[..3].iter().map(|a| a.to_seed()).collect();
    let summary = crawl_with(&seeds, &cfg, &endpoint, &quick()).unwrap();

    assert_eq!(summary.per_seed.len(), 1);
    assert_eq!(summary.per_seed[0].seed_index, 2);
    assert!(!cfg.friend_links_path.exists());
    assert_eq!(server.total_served(PageKind::Friends), 0);
    let norm = normalize_raw(&cfg.output_path).unwrap();
    assert_eq!(ids(norm.profiles.iter().map(|p| &p.profile_id)), ids(listed));
    assert!(norm.profiles.iter().all(|p| p.seed_index == 2));
}

#[test]
fn wrong_secret_fails_every_login() {
    let net = network(10, 3.0, 1);
    let server = serve(&net);
    let dir = tempfile::tempdir().unwrap();
    let mut seed = net.accounts[0].to_seed();
    seed.secret = "nope".into();
    let err = crawl(&[seed], &config(dir.path(), 1, 1), &server.base_url()).unwrap_err();
    assert!(matches!(err, CrawlError::AllSeedsFailedLogin(_)));
    assert_eq!(server.session_counters().failed_logins, 1);
}

#[test]
fn one_bad_seed_does_not_stop_the_others() {
    let net = network(30, 3.0, 2);
    let server = serve(&net);
    let dir = tempfile::tempdir().unwrap();
    let mut bad = net.accounts[1].to_seed();
    bad.secret = "nope".into();
    let seeds = vec![net.accounts[0].to_seed(), bad];
    let summary = crawl_with(&seeds, &config(dir.path(), 1, 1), &server.base_url(), &quick()).unwrap();
    assert!(summary.per_seed[0].logged_in);
    assert!(!summary.per_seed[1].logged_in);
    assert!(summary.per_seed[1].error.is_some());
    assert!(summary.profiles_captured > 0);
}

#[test]
fn transient_errors_are_retried() {
    let net = network(20, 19.0, 4);
    let mut faults = FaultPlan::default();
    faults.fail_about_times.insert("u3".into(), 2);
    faults.fail_about_times.insert("u4".into(), 5);
    let server = serve_with(&net, faults);
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 1, 1);
    let summary = crawl_with(&[net.accounts[0].to_seed()], &cfg, &server.base_url(), &quick()).unwrap();
    assert_eq!(server.served_count("u3", PageKind::About), 1);
    assert_eq!(server.served_count("u4", PageKind::About), 0);
    let norm = normalize_raw(&cfg.output_path).unwrap();
    let captured = ids(norm.profiles.iter().map(|p| &p.profile_id));
    assert!(captured.contains("u3"));
    assert!(!captured.contains("u4"));
    assert_eq!(summary.fetch_errors, 1);
    assert!(summary.failed_urls().iter().any(|u| u.ends_with("/profile/u4")));
}

#[test]
fn expired_session_aborts_the_seed() {
    let net = network(50, 10.0, 5);
    let server = serve_with(
        &net,
        FaultPlan {
            expire_sessions_after: Some(8),
            ..FaultPlan::default()
        },
    );
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 1, 1);
    let summary = crawl_with(&[net.accounts[0].to_seed()], &cfg, &server.base_url(), &quick()).unwrap();
    let seed = &summary.per_seed[0];
    assert!(seed.error.is_some());
    assert!(seed.profiles_captured < seed.frontier);
    assert_eq!(seed.failed_urls.len(), seed.frontier - seed.profiles_captured);
    let norm = normalize_raw(&cfg.output_path).unwrap();
    assert_eq!(norm.profiles.len(), seed.profiles_captured);
}

#[test]
fn concurrent_sessions_cover_every_seed() {
    let net = network(60, 5.0, 6);
    let t = truth(&net);
    let server = serve(&net);
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), 2, 1);
    cfg.sessions_per_agent = 3;
    let seeds: Vec<SeedProfile> = net.accounts[..4].iter().map(|a| a.to_seed()).collect();
    let summary = crawl_with(&seeds, &cfg, &server.base_url(), &quick()).unwrap();
    assert_eq!(summary.per_seed.iter().map(|s| s.seed_index).collect::<Vec<_>>(), [1, 2, 3, 4]);
    let counters = server.session_counters();
    assert_eq!((counters.logins, counters.logouts), (4, 4));
    let norm = normalize_raw(&cfg.output_path).unwrap();
    assert!(norm.skipped.is_empty());
    for s in 0..4 {
        let id = format!("u{s}");
        let friends = levels_by_relaxation(&t, &[&id], 1);
        let got = ids(norm.profiles.iter().filter(|p| p.seed_index == s + 1).map(|p| &p.profile_id));
        assert_eq!(got, ids(friends.keys()), "seed {id}");
    }
    let raw = fs::read_to_string(&cfg.output_path).unwrap();
    assert_eq!(raw.lines().next().unwrap(), "capture_kind,profile_url,seed_index,field,value,captured_at");
}
