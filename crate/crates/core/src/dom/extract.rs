//! Page-level extractors: friend links, personal attributes, posts.
//!
//! Extractors are generic over [`PageFetcher`], so they run the same against
//! a logged-in HTTP session or an in-memory page map.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use super::rules::{apply_rule, apply_rule_at, RuleError, RuleSet};
use super::parse_dom;
use crate::config_io::LinkList;
use crate::model::{Attribute, ReactionKind};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FetchFailure {
    /// The server no longer accepts the session.
    Unauthorized,
    Status(u16),
    Transport(String),
}

impl fmt::Display for FetchFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FetchFailure::Unauthorized => f.write_str("unauthorized"),
            FetchFailure::Status(s) => write!(f, "HTTP {s}"),
            FetchFailure::Transport(m) => write!(f, "transport: {m}"),
        }
    }
}

/// Source of page bodies. One fetch at a time.
pub trait PageFetcher {
    fn fetch(&mut self, url: &Url) -> Result<String, FetchFailure>;
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtractError {
    #[error("fetching page {page_no} ({url}) failed: {message}")]
    Fetch {
        page_no: usize,
        url: String,
        status: Option<u16>,
        message: String,
    },
    #[error("session expired after {pages_fetched} pages")]
    AuthExpired { pages_fetched: usize },
    #[error(transparent)]
    Rule(#[from] RuleError),
}

impl ExtractError {
    /// Transport failures and 5xx responses may succeed on retry.
    pub fn is_transient(&self) -> bool {
        matches!(self, ExtractError::Fetch { status: None, .. })
            || matches!(self, ExtractError::Fetch { status: Some(s), .. } if *s >= 500)
    }
}

/// A captured field value as written to the raw file.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RawValue {
    Text(String),
    /// The profile hides this attribute.
    NotDisclosed,
    /// The element does not exist for this item (e.g. views on a text post).
    NotPresent,
    /// Shown, but with no entries.
    Empty,
}

pub const NOT_DISCLOSED: &str = "NOT_DISCLOSED";
pub const NOT_PRESENT: &str = "NOT_PRESENT";
pub const EMPTY: &str = "EMPTY";

impl RawValue {
    pub fn text(s: impl Into<String>) -> Self {
        let s = s.into();
        if s.is_empty() {
            RawValue::Empty
        } else {
            RawValue::Text(s)
        }
    }

    pub fn encode(&self) -> &str {
        match self {
            RawValue::Text(s) => s,
            RawValue::NotDisclosed => NOT_DISCLOSED,
            RawValue::NotPresent => NOT_PRESENT,
            RawValue::Empty => EMPTY,
        }
    }

    pub fn decode(s: &str) -> Self {
        match s {
            NOT_DISCLOSED => RawValue::NotDisclosed,
            NOT_PRESENT => RawValue::NotPresent,
            EMPTY | "" => RawValue::Empty,
            _ => RawValue::Text(s.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptureKind {
    Profile,
    Post,
}

/// One row of the raw output file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRow {
    pub capture_kind: CaptureKind,
    pub profile_url: String,
    pub seed_index: usize,
    pub field: String,
    pub value: String,
    pub captured_at: String,
}

pub const RAW_HEADER: [&str; 6] = [
    "capture_kind",
    "profile_url",
    "seed_index",
    "field",
    "value",
    "captured_at",
];

pub const PAGE_COMPLETE_FIELD: &str = "page_complete";
pub const FRIEND_COUNT_FIELD: &str = "friend_count";

/// Raw field name of an About-page attribute, e.g. `basic_information.email`.
pub fn attribute_field(attr: Attribute) -> String {
    format!("{}.{}", attr.section().name(), attr.name())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawProfileCapture {
    pub profile_url: Url,
    /// Whether the page-end marker was present.
    pub page_complete: bool,
    /// List attributes contribute one entry per item.
    pub fields: Vec<(String, RawValue)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawPostCapture {
    pub profile_url: Url,
    /// 1-based, newest first.
    pub post_index: usize,
    /// Keyed by attribute (`title`, `emotion.like`, ...); tags one entry per tag.
    pub fields: Vec<(String, RawValue)>,
}

impl RawProfileCapture {
    pub fn to_rows(&self, seed_index: usize, captured_at: &str) -> Vec<RawRow> {
        let row = |field: &str, value: &str| RawRow {
            capture_kind: CaptureKind::Profile,
            profile_url: self.profile_url.to_string(),
            seed_index,
            field: field.to_string(),
            value: value.to_string(),
            captured_at: captured_at.to_string(),
        };
        let mut rows: Vec<RawRow> = self.fields.iter().map(|(f, v)| row(f, v.encode())).collect();
        rows.push(row(PAGE_COMPLETE_FIELD, if self.page_complete { "true" } else { "false" }));
        rows
    }
}

impl RawPostCapture {
    pub fn to_rows(&self, seed_index: usize, captured_at: &str) -> Vec<RawRow> {
        self.fields
            .iter()
            .map(|(f, v)| RawRow {
                capture_kind: CaptureKind::Post,
                profile_url: self.profile_url.to_string(),
                seed_index,
                field: format!("{}.{}", self.post_index, f),
                value: v.encode().to_string(),
                captured_at: captured_at.to_string(),
            })
            .collect()
    }
}

/// `profile_url` with `/{page}` appended and an optional `?page=N`.
pub fn page_url(profile_url: &Url, page: &str, page_no: Option<usize>) -> Url {
    let mut url = profile_url.clone();
    let path = format!("{}/{}", url.path().trim_end_matches('/'), page);
    url.set_path(&path);
    url.set_query(page_no.map(|n| format!("page={n}")).as_deref());
    url.set_fragment(None);
    url
}

/// Drops query, fragment and trailing slash.
pub fn normalize_profile_url(url: &Url) -> Url {
    let mut out = url.clone();
    out.set_query(None);
    out.set_fragment(None);
    let trimmed = out.path().trim_end_matches('/').to_string();
    if !trimmed.is_empty() {
        out.set_path(&trimmed);
    }
    out
}

/// Last non-empty path segment.
pub fn profile_id_from_path(path: &str) -> Option<&str> {
    path.split(['?', '#'])
        .next()
        .unwrap_or("")
        .rsplit('/')
        .find(|s| !s.is_empty())
}

pub fn profile_id_from_url(url: &Url) -> Option<String> {
    profile_id_from_path(url.path()).map(str::to_string)
}

fn fetch_page<F: PageFetcher>(
    fetcher: &mut F,
    url: &Url,
    page_no: usize,
    pages_fetched: usize,
) -> Result<String, ExtractError> {
    fetcher.fetch(url).map_err(|failure| match failure {
        FetchFailure::Unauthorized => ExtractError::AuthExpired { pages_fetched },
        FetchFailure::Status(s) => ExtractError::Fetch {
            page_no,
            url: url.to_string(),
            status: Some(s),
            message: failure.to_string(),
        },
        FetchFailure::Transport(m) => ExtractError::Fetch {
            page_no,
            url: url.to_string(),
            status: None,
            message: m,
        },
    })
}

/// Walks `next` links from `first` until there is none (or one repeats),
/// calling `on_page` for each parsed page. `on_page` returns false to stop
/// early. Returns the number of pages fetched.
fn paginate<F, P>(fetcher: &mut F, rules: &RuleSet, first: Url, mut on_page: P) -> Result<usize, ExtractError>
where
    F: PageFetcher,
    P: FnMut(&Url, &super::DomTree) -> Result<bool, ExtractError>,
{
    let next_rule = rules.get("pager.next")?;
    let mut seen = HashSet::new();
    let mut url = first;
    let mut fetched = 0;
    loop {
        seen.insert(url.clone());
        let html = fetch_page(fetcher, &url, fetched + 1, fetched)?;
        fetched += 1;
        let dom = parse_dom(html.as_bytes());
        if !on_page(&url, &dom)? {
            return Ok(fetched);
        }
        let next = apply_rule(&dom, next_rule)?;
        match next.first().and_then(|h| url.join(h).ok()) {
            Some(n) if !seen.contains(&n) => url = n,
            _ => return Ok(fetched),
        }
    }
}

/// All friend profile URLs across every friends page, in document order,
/// deduplicated.
pub fn extract_friend_links<F: PageFetcher>(
    fetcher: &mut F,
    rules: &RuleSet,
    profile_url: &Url,
) -> Result<LinkList, ExtractError> {
    let link_rule = rules.get("friends.link")?;
    let mut links = Vec::new();
    paginate(fetcher, rules, page_url(profile_url, "friends", Some(1)), |url, dom| {
        for href in apply_rule(dom, link_rule)? {
            if let Ok(u) = url.join(&href) {
                links.push(normalize_profile_url(&u));
            }
        }
        Ok(true)
    })?;
    Ok(LinkList::from_urls(links))
}

pub fn extract_personal_attributes<F: PageFetcher>(
    fetcher: &mut F,
    rules: &RuleSet,
    profile_url: &Url,
) -> Result<RawProfileCapture, ExtractError> {
    let url = page_url(profile_url, "about", None);
    let html = fetch_page(fetcher, &url, 1, 0)?;
    let dom = parse_dom(html.as_bytes());
    let page_complete = !apply_rule(&dom, rules.get("about.complete")?)?.is_empty();
    let mut fields = Vec::new();
    for attr in Attribute::ALL {
        let field = attribute_field(attr);
        let shown = apply_rule(&dom, rules.get(&format!("about.{}", attr.name()))?)?;
        let Some(value) = shown.into_iter().next() else {
            fields.push((field, RawValue::NotDisclosed));
            continue;
        };
        if !attr.is_list() {
            fields.push((field, RawValue::text(value)));
            continue;
        }
        let items = apply_rule(&dom, rules.get(&format!("about.{}.item", attr.name()))?)?;
        if items.is_empty() {
            fields.push((field.clone(), RawValue::Empty));
        }
        for item in items {
            fields.push((field.clone(), RawValue::text(item)));
        }
    }
    let friend_count = apply_rule(&dom, rules.get("about.friend_count")?)?;
    let value = match friend_count.into_iter().next() {
        Some(v) => RawValue::text(v),
        None => RawValue::NotDisclosed,
    };
    fields.push((FRIEND_COUNT_FIELD.to_string(), value));
    Ok(RawProfileCapture {
        profile_url: profile_url.clone(),
        page_complete,
        fields,
    })
}

/// Scalar post attributes and the rule that captures each.
const POST_SCALARS: [(&str, &str); 9] = [
    ("type", "post.type"),
    ("title", "post.title"),
    ("content", "post.content"),
    ("date", "post.date"),
    ("time", "post.time"),
    ("comments", "post.comments"),
    ("shares", "post.shares"),
    ("views", "post.views"),
    ("reactions", "post.reactions"),
];

/// Up to `total_post` posts, newest first. Timeline pages are fetched only
/// until enough posts are collected.
pub fn extract_post_attributes<F: PageFetcher>(
    fetcher: &mut F,
    rules: &RuleSet,
    profile_url: &Url,
    total_post: usize,
) -> Result<Vec<RawPostCapture>, ExtractError> {
    let (captures, _) = extract_posts_counted(fetcher, rules, profile_url, total_post)?;
    Ok(captures)
}

/// As [`extract_post_attributes`], also returning the timeline pages fetched.
pub fn extract_posts_counted<F: PageFetcher>(
    fetcher: &mut F,
    rules: &RuleSet,
    profile_url: &Url,
    total_post: usize,
) -> Result<(Vec<RawPostCapture>, usize), ExtractError> {
    let post_rule = rules.get("timeline.post")?;
    let tags_rule = rules.get("post.tags")?;
    let tag_item_rule = rules.get("post.tags.item")?;
    let mut captures = Vec::new();
    if total_post == 0 {
        return Ok((captures, 0));
    }
    let first = page_url(profile_url, "timeline", Some(1));
    let pages = paginate(fetcher, rules, first, |_, dom| {
        for node in post_rule.select(dom, dom.root()) {
            if captures.len() == total_post {
                break;
            }
            let mut fields = Vec::with_capacity(POST_SCALARS.len() + ReactionKind::ALL.len() + 2);
            for (name, rule) in POST_SCALARS {
                fields.push((name.to_string(), first_or_absent(dom, node, rules, rule)?));
            }
            for kind in ReactionKind::ALL {
                let rule = format!("post.emotion.{}", kind.as_str());
                fields.push((format!("emotion.{}", kind.as_str()), first_or_absent(dom, node, rules, &rule)?));
            }
            if apply_rule_at(dom, node, tags_rule)?.is_empty() {
                fields.push(("tags".to_string(), RawValue::NotPresent));
            } else {
                let tags = apply_rule_at(dom, node, tag_item_rule)?;
                if tags.is_empty() {
                    fields.push(("tags".to_string(), RawValue::Empty));
                }
                fields.extend(tags.into_iter().map(|t| ("tags".to_string(), RawValue::text(t))));
            }
            captures.push(RawPostCapture {
                profile_url: profile_url.clone(),
                post_index: captures.len() + 1,
                fields,
            });
        }
        Ok(captures.len() < total_post)
    })?;
    Ok((captures, pages))
}

fn first_or_absent(
    dom: &super::DomTree,
    node: super::NodeId,
    rules: &RuleSet,
    rule: &str,
) -> Result<RawValue, ExtractError> {
    let found = apply_rule_at(dom, node, rules.get(rule)?)?;
    Ok(match found.into_iter().next() {
        Some(v) => RawValue::text(v),
        None => RawValue::NotPresent,
    })
}
