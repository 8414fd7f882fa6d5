use std::fs;
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

fn imcrawler(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imcrawler"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = imcrawler(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn manifest(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn unknown_subcommand_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(imcrawler(dir.path(), &["bogus"]).status.code(), Some(2));
    assert_eq!(imcrawler(dir.path(), &["crawl"]).status.code(), Some(2));
}

#[test]
fn missing_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = imcrawler(dir.path(), &["crawl", "--config", "missing.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error[CONFIG]"), "{stderr}");
}

#[test]
fn help_lists_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["--help"]);
    let help = String::from_utf8_lossy(&out.stdout);
    for name in [
        "generate", "serve", "crawl", "coordinate", "agent", "normalize", "verify", "load", "filter", "stats", "demo",
    ] {
        assert!(help.contains(name), "{name} missing");
    }
}

#[test]
fn demo_is_deterministic_and_stages_rerun_identically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["demo", "--seed", "42", "--n", "500", "--out", "a"]);
    ok(d, &["demo", "--seed", "42", "--n", "500", "--out", "b"]);
    let stats = fs::read(d.join("a/stats.json")).unwrap();
    assert_eq!(stats, fs::read(d.join("b/stats.json")).unwrap());
    let m = manifest(&d.join("a/manifest.json"));
    assert_eq!(m["subcommand"], "demo");
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["result"]["junk_after_reextraction"], 0);

    // Each stage, re-run on its own inputs, reproduces the demo's output.
    let a = d.join("a");
    ok(&a, &["normalize", "--raw", "raw.csv", "--out", "re_structured"]);
    for f in ["profiles.csv", "posts.csv", "skipped.csv"] {
        assert_eq!(
            fs::read(a.join("structured").join(f)).unwrap(),
            fs::read(a.join("re_structured").join(f)).unwrap(),
            "{f}"
        );
    }
    ok(&a, &["verify", "--in", "structured", "--report", "re_report.csv", "--reextract-out", "re_redo.txt", "--total-post", "10"]);
    assert_eq!(fs::read(a.join("report.csv")).unwrap(), fs::read(a.join("re_report.csv")).unwrap());
    assert_eq!(fs::read(a.join("redo.txt")).unwrap(), fs::read(a.join("re_redo.txt")).unwrap());

    ok(&a, &["load", "--in", "structured", "--db", "re_store.db", "--total-post", "10"]);
    ok(&a, &["load", "--in", "structured_redo", "--db", "re_store.db", "--total-post", "10"]);
    assert_eq!(fs::read(a.join("store.db")).unwrap(), fs::read(a.join("re_store.db")).unwrap());

    ok(&a, &["filter", "--db", "store.db", "--cities", "Bangalore,Delhi,Mumbai,Pune", "--out", "re_sample.csv"]);
    assert_eq!(fs::read(a.join("sample.csv")).unwrap(), fs::read(a.join("re_sample.csv")).unwrap());
    ok(&a, &["stats", "--db", "store.db", "--population", "sample.csv", "--out", "re_stats.json"]);
    assert_eq!(stats, fs::read(a.join("re_stats.json")).unwrap());
    assert_eq!(manifest(&a.join("re_stats.json.manifest.json"))["subcommand"], "stats");
}

#[test]
fn subprocess_agents_against_a_served_network() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--n", "120", "--seed", "5", "--seed-accounts", "3", "--out", "network.bin"]);
    let mut server = Command::new(env!("CARGO_BIN_EXE_imcrawler"))
        .current_dir(d)
        .args(["serve", "--network", "network.bin", "--bind", "127.0.0.1:0", "--url-file", "url.txt", "--for-secs", "120"])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let started = Instant::now();
    while !d.join("url.txt").exists() {
        assert!(started.elapsed() < Duration::from_secs(30), "server did not start");
        std::thread::sleep(Duration::from_millis(50));
    }
    std::thread::sleep(Duration::from_millis(50));
    let url = fs::read_to_string(d.join("url.txt")).unwrap().trim().to_string();
    fs::write(
        d.join("crawl.cfg"),
        "friendLinksFile=links.txt\noutputFile=raw.csv\ntotalPost=4\ndepth=2\nminDelayMs=0\nmaxDelayMs=0\n",
    )
    .unwrap();

    ok(d, &["crawl", "--config", "crawl.cfg", "--endpoint", &url]);
    ok(
        d,
        &["coordinate", "--config", "crawl.cfg", "--endpoint", &url, "--agents", "2", "--sessions", "2", "--merged", "merged.csv", "--subprocess"],
    );
    let _ = server.kill();
    let _ = server.wait();

    let m = manifest(&d.join("merged.csv.manifest.json"));
    assert_eq!(m["subcommand"], "coordinate");
    let agents = m["result"]["agents"].as_array().unwrap();
    assert_eq!(agents.len(), 2);
    let shard_rows: u64 = agents.iter().map(|a| a["shard_rows"].as_u64().unwrap()).sum();
    assert_eq!(m["result"]["merged_rows"].as_u64().unwrap(), shard_rows);
    for a in 0..2 {
        let shard = manifest(&d.join(format!("shards/agent-{a}.raw.csv.manifest.json")));
        assert_eq!(shard["subcommand"], "agent");
        assert_eq!(shard["exit_code"], 0);
    }

    // One process and two agents capture the same records.
    ok(d, &["normalize", "--raw", "raw.csv", "--out", "one"]);
    ok(d, &["normalize", "--raw", "merged.csv", "--out", "many"]);
    ok(d, &["load", "--in", "one", "--db", "one.db"]);
    ok(d, &["load", "--in", "many", "--db", "many.db"]);
    let one = manifest(&d.join("one.db.manifest.json"));
    let many = manifest(&d.join("many.db.manifest.json"));
    assert_eq!(one["result"]["stored_profiles"], many["result"]["stored_profiles"]);
    assert_eq!(one["result"]["stored_posts"], many["result"]["stored_posts"]);
}
