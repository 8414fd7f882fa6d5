//! Verification checks and the re-extraction list.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::records::{CaptureKey, Field, PostRecord, ProfileRecord};
use super::PipelineError;
use crate::exec::{self, ExecMode};
use crate::model::Attribute;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationPolicy {
    /// Upper bound on post rows per capture; `None` skips the bound.
    pub total_post: Option<usize>,
    pub require_page_complete: bool,
    /// Make the reaction total consistency check required instead of a flag.
    pub require_reaction_consistency: bool,
}

impl Default for VerificationPolicy {
    fn default() -> Self {
        VerificationPolicy {
            total_post: None,
            require_page_complete: true,
            require_reaction_consistency: false,
        }
    }
}

impl VerificationPolicy {
    pub fn with_total_post(total_post: usize) -> Self {
        VerificationPolicy {
            total_post: Some(total_post),
            ..VerificationPolicy::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Ok,
    Junk,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub required: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub profile_id: String,
    pub profile_url: String,
    pub seed_index: usize,
    pub captured_at: String,
    pub checks: Vec<CheckResult>,
    pub verdict: Verdict,
}

impl VerificationReport {
    pub fn failed_required(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|c| c.required && !c.passed)
            .map(|c| c.name)
            .collect()
    }

    pub fn flags(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|c| !c.required && !c.passed)
            .map(|c| c.name)
            .collect()
    }

    pub fn capture_key(&self) -> CaptureKey {
        CaptureKey {
            profile_id: self.profile_id.clone(),
            seed_index: self.seed_index,
            captured_at: self.captured_at.clone(),
        }
    }
}

fn check(name: &'static str, required: bool, failures: Vec<String>) -> CheckResult {
    CheckResult {
        name,
        passed: failures.is_empty(),
        required,
        detail: failures.join("; "),
    }
}

fn profile_unparseable(p: &ProfileRecord) -> Vec<String> {
    let mut out: Vec<String> = Attribute::ALL
        .iter()
        .filter(|a| p.disclosure(**a) == super::records::Disclosure::Unparseable)
        .map(|a| a.name().to_string())
        .collect();
    if p.friend_count.is_unparseable() {
        out.push("friend_count".into());
    }
    out
}

/// Posts grouped by the capture they belong to.
pub fn posts_by_capture(posts: &[PostRecord]) -> HashMap<CaptureKey, Vec<&PostRecord>> {
    let mut map: HashMap<CaptureKey, Vec<&PostRecord>> = HashMap::new();
    for p in posts {
        map.entry(p.capture_key()).or_default().push(p);
    }
    map
}

pub fn verify_profile(p: &ProfileRecord, posts: &[&PostRecord], policy: &VerificationPolicy) -> VerificationReport {
    let mut checks = Vec::new();
    checks.push(check(
        "profile_id_present",
        true,
        if p.profile_id.trim().is_empty() { vec!["empty profile id".into()] } else { vec![] },
    ));
    checks.push(check(
        "friend_count_parseable",
        true,
        match &p.friend_count {
            Field::Value(_) => vec![],
            Field::NotDisclosed => vec!["friend count missing".into()],
            Field::Unparseable(raw) => vec![format!("friend count {raw:?}")],
        },
    ));
    checks.push(check(
        "sections_resolved",
        true,
        Attribute::ALL
            .iter()
            .filter(|a| p.disclosure(**a) == super::records::Disclosure::Unparseable)
            .map(|a| format!("{} unresolved", a.name()))
            .collect(),
    ));
    let mut post_failures = Vec::new();
    let mut seen = HashSet::new();
    for post in posts {
        if !seen.insert(post.post_index) {
            post_failures.push(format!("post {} repeated", post.post_index));
        }
        if policy.total_post.is_some_and(|t| post.post_index > t) {
            post_failures.push(format!("post index {} beyond total", post.post_index));
        }
    }
    if let Some(t) = policy.total_post.filter(|t| posts.len() > *t) {
        post_failures.push(format!("{} posts for total {t}", posts.len()));
    }
    checks.push(check("post_rows_within_total", true, post_failures));
    let mut unparseable = profile_unparseable(p);
    for post in posts {
        unparseable.extend(
            post.unparseable_fields()
                .into_iter()
                .map(|f| format!("post {} {f}", post.post_index)),
        );
    }
    checks.push(check("no_unparseable", true, unparseable));
    checks.push(check(
        "page_complete",
        policy.require_page_complete,
        if p.page_complete { vec![] } else { vec!["page end marker missing".into()] },
    ));
    checks.push(check(
        "reaction_total_consistent",
        policy.require_reaction_consistency,
        posts
            .iter()
            .filter(|post| post.reactions_consistent() == Some(false))
            .map(|post| format!("post {}", post.post_index))
            .collect(),
    ));
    let verdict = if checks.iter().any(|c| c.required && !c.passed) {
        Verdict::Junk
    } else {
        Verdict::Ok
    };
    VerificationReport {
        profile_id: p.profile_id.clone(),
        profile_url: p.profile_url.clone(),
        seed_index: p.seed_index,
        captured_at: p.captured_at.clone(),
        checks,
        verdict,
    }
}

/// One report per profile record, in input order.
pub fn verify(profiles: &[ProfileRecord], posts: &[PostRecord], policy: &VerificationPolicy) -> Vec<VerificationReport> {
    verify_with(profiles, posts, policy, ExecMode::default())
}

pub fn verify_with(
    profiles: &[ProfileRecord],
    posts: &[PostRecord],
    policy: &VerificationPolicy,
    mode: ExecMode,
) -> Vec<VerificationReport> {
    let by_capture = posts_by_capture(posts);
    exec::map(mode, profiles, |p| {
        let linked = by_capture.get(&p.capture_key()).map(Vec::as_slice).unwrap_or(&[]);
        verify_profile(p, linked, policy)
    })
}

pub const REPORT_HEADER: [&str; 7] = [
    "profile_id",
    "profile_url",
    "seed_index",
    "captured_at",
    "verdict",
    "failed_checks",
    "flags",
];

pub fn write_report(path: &Path, reports: &[VerificationReport]) -> Result<(), PipelineError> {
    let io = |e: csv::Error| PipelineError::Io(std::io::Error::other(e));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(REPORT_HEADER).map_err(io)?;
    for r in reports {
        let verdict = match r.verdict {
            Verdict::Ok => "ok",
            Verdict::Junk => "junk",
        };
        w.write_record([
            r.profile_id.clone(),
            r.profile_url.clone(),
            r.seed_index.to_string(),
            r.captured_at.clone(),
            verdict.to_string(),
            r.failed_required().join(";"),
            r.flags().join(";"),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the URL of every junk capture, in report order, to `out_path`
/// (friend-link list format). A URL junk in several captures is listed
/// once. Returns the number of lines written.
pub fn emit_reextract_list(reports: &[VerificationReport], out_path: &Path) -> Result<usize, PipelineError> {
    let write_failure = |e: std::io::Error| PipelineError::WriteFailure(out_path.to_path_buf(), e.to_string());
    if let Some(parent) = out_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(write_failure)?;
    }
    let mut seen = HashSet::new();
    let mut out = std::io::BufWriter::new(std::fs::File::create(out_path).map_err(write_failure)?);
    for r in reports.iter().filter(|r| r.verdict == Verdict::Junk) {
        if seen.insert(r.profile_url.as_str()) {
            writeln!(out, "{}", r.profile_url).map_err(write_failure)?;
        }
    }
    out.flush().map_err(write_failure)?;
    Ok(seen.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn profile(id: &str) -> ProfileRecord {
        ProfileRecord {
            profile_id: id.into(),
            profile_url: format!("http://h/profile/{id}"),
            friend_count: Field::Value(3),
            birthday: Field::NotDisclosed,
            email: Field::Value("a@b.c".into()),
            phone: Field::NotDisclosed,
            family_members: Field::Value(vec![]),
            relationship_status: Field::NotDisclosed,
            gender: Field::NotDisclosed,
            hometown: Field::NotDisclosed,
            current_city: Field::Value("Delhi".into()),
            pages_liked: Field::NotDisclosed,
            groups_joined: Field::NotDisclosed,
            page_complete: true,
            seed_index: 1,
            captured_at: "t".into(),
        }
    }

    fn post(id: &str, index: usize) -> PostRecord {
        PostRecord {
            profile_id: id.into(),
            post_index: index,
            post_type: Field::Value(crate::model::PostType::Text),
            title: Field::Value("t".into()),
            content: Field::Value("c".into()),
            date: Field::Unparseable("x".into()),
            time: Field::Unparseable("x".into()),
            comment_count: Field::Value(0),
            emotion_counts: BTreeMap::new(),
            share_count: Field::Value(0),
            view_count: None,
            reaction_total: Field::Value(0),
            tags: Field::Value(vec![]),
            seed_index: 1,
            captured_at: "t".into(),
        }
    }

    #[test]
    fn fully_parsed_record_is_ok() {
        let r = verify(&[profile("u1")], &[], &VerificationPolicy::with_total_post(5));
        assert_eq!(r[0].verdict, Verdict::Ok);
        assert!(r[0].failed_required().is_empty());
    }

    #[test]
    fn unparseable_friend_count_is_junk() {
        let mut p = profile("u1");
        p.friend_count = Field::Unparseable("banana".into());
        let r = verify(&[p], &[], &VerificationPolicy::default());
        assert_eq!(r[0].verdict, Verdict::Junk);
        assert!(r[0].failed_required().contains(&"friend_count_parseable"));
    }

    #[test]
    fn truncated_page_is_junk() {
        let mut p = profile("u1");
        p.page_complete = false;
        let r = verify(&[p], &[], &VerificationPolicy::default());
        assert_eq!(r[0].failed_required(), ["page_complete"]);
    }

    #[test]
    fn posts_are_linked_by_capture() {
        let p = profile("u1");
        let mut other = post("u1", 1);
        other.captured_at = "another".into();
        let r = verify(&[p], &[post("u1", 1), post("u1", 2), other], &VerificationPolicy::with_total_post(1));
        let failed = r[0].failed_required();
        assert!(failed.contains(&"post_rows_within_total"));
        assert!(failed.contains(&"no_unparseable"));
    }

    #[test]
    fn reaction_mismatch_is_only_a_flag() {
        let mut q = post("u1", 1);
        q.date = Field::Value(chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap());
        q.time = Field::Value(chrono::NaiveTime::from_hms_opt(1, 0, 0).unwrap());
        q.emotion_counts = crate::model::ReactionKind::ALL.iter().map(|k| (*k, Field::Value(1))).collect();
        q.reaction_total = Field::Value(5);
        let r = verify(&[profile("u1")], &[q], &VerificationPolicy::default());
        assert_eq!(r[0].verdict, Verdict::Ok);
        assert_eq!(r[0].flags(), ["reaction_total_consistent"]);
    }

    #[test]
    fn reextract_list_counts_junk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("redo.txt");
        let mut profiles: Vec<_> = (0..100).map(|i| profile(&format!("u{i}"))).collect();
        assert_eq!(emit_reextract_list(&verify(&profiles, &[], &Default::default()), &path).unwrap(), 0);
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "");
        for i in [3, 10, 50, 99] {
            profiles[i].page_complete = false;
        }
        let reports = verify(&profiles, &[], &Default::default());
        assert_eq!(emit_reextract_list(&reports, &path).unwrap(), 4);
        let links = crate::config_io::read_links_file(&path).unwrap();
        assert_eq!(links.len(), 4);
        assert_eq!(links.urls()[0].as_str(), "http://h/profile/u3");
    }
}
