//! Raw capture rows to structured records.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use url::Url;

use super::records::{parse_date, parse_time, write_posts_csv, write_profiles_csv, Field, PostRecord, ProfileRecord};
use super::PipelineError;
use crate::dom::extract::{
    attribute_field, normalize_profile_url, profile_id_from_path, profile_id_from_url, CaptureKind, RawValue,
    FRIEND_COUNT_FIELD, PAGE_COMPLETE_FIELD, RAW_HEADER,
};
use crate::dom::strip_markup;
use crate::exec::{self, ExecMode};
use crate::model::{parse_count, Attribute, Gender, PostType, ReactionKind, Relationship};

/// A raw row that could not be used, with its 1-based line number.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SkippedRow {
    pub line: u64,
    pub reason: String,
    pub raw: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Normalized {
    pub profiles: Vec<ProfileRecord>,
    pub posts: Vec<PostRecord>,
    pub skipped: Vec<SkippedRow>,
    /// Data rows read (header excluded).
    pub rows_total: usize,
    /// Rows that contributed to a record.
    pub rows_used: usize,
}

struct Row {
    line: u64,
    kind: CaptureKind,
    url: Url,
    seed_index: usize,
    field: String,
    value: String,
    captured_at: String,
}

/// Rows of one capture (one profile visit), in file order.
struct Group {
    profile_id: String,
    url: Url,
    seed_index: usize,
    captured_at: String,
    rows: Vec<Row>,
}

pub fn normalize_raw(raw_path: &Path) -> Result<Normalized, PipelineError> {
    normalize_raw_with(raw_path, ExecMode::default())
}

pub fn normalize_raw_with(raw_path: &Path, mode: ExecMode) -> Result<Normalized, PipelineError> {
    let text = std::fs::read(raw_path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => PipelineError::MissingInput(raw_path.to_path_buf()),
        _ => PipelineError::Io(e),
    })?;
    Ok(normalize_bytes(&text, mode))
}

fn record_text(record: &csv::StringRecord) -> String {
    record.iter().collect::<Vec<_>>().join(",")
}

fn parse_row(record: &csv::StringRecord, line: u64) -> Result<Row, String> {
    if record.len() != RAW_HEADER.len() {
        return Err(format!("expected {} columns, found {}", RAW_HEADER.len(), record.len()));
    }
    let kind = match &record[0] {
        "profile" => CaptureKind::Profile,
        "post" => CaptureKind::Post,
        k => return Err(format!("unknown capture kind {k:?}")),
    };
    let url = Url::parse(&record[1]).map_err(|e| format!("bad profile url: {e}"))?;
    let seed_index = record[2].parse().map_err(|_| format!("bad seed index {:?}", &record[2]))?;
    Ok(Row {
        line,
        kind,
        url: normalize_profile_url(&url),
        seed_index,
        field: record[3].to_string(),
        value: record[4].to_string(),
        captured_at: record[5].to_string(),
    })
}

/// Normalizes raw CSV content. Groups are formed from consecutive rows with
/// the same profile URL, seed and capture time.
pub fn normalize_bytes(raw: &[u8], mode: ExecMode) -> Normalized {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(raw);
    let mut out = Normalized::default();
    let mut groups: Vec<Group> = Vec::new();
    let mut first = true;
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                out.rows_total += 1;
                out.skipped.push(SkippedRow {
                    line: e.position().map(|p| p.line()).unwrap_or(line),
                    reason: e.to_string(),
                    raw: String::new(),
                });
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(line);
        if std::mem::take(&mut first) && record.iter().eq(RAW_HEADER.iter().copied()) {
            continue;
        }
        out.rows_total += 1;
        let row = match parse_row(&record, line) {
            Ok(r) => r,
            Err(reason) => {
                out.skipped.push(SkippedRow {
                    line,
                    reason,
                    raw: record_text(&record),
                });
                continue;
            }
        };
        let Some(profile_id) = profile_id_from_url(&row.url) else {
            out.skipped.push(SkippedRow {
                line,
                reason: "profile url has no id".into(),
                raw: record_text(&record),
            });
            continue;
        };
        match groups.last_mut() {
            Some(g) if g.url == row.url && g.seed_index == row.seed_index && g.captured_at == row.captured_at => {
                g.rows.push(row)
            }
            _ => groups.push(Group {
                profile_id,
                url: row.url.clone(),
                seed_index: row.seed_index,
                captured_at: row.captured_at.clone(),
                rows: vec![row],
            }),
        }
    }
    let results = exec::map(mode, &groups, normalize_group);
    for r in results {
        out.profiles.extend(r.profile);
        out.posts.extend(r.posts);
        out.rows_used += r.rows_used;
        out.skipped.extend(r.skipped);
    }
    out.skipped.sort_by_key(|s| s.line);
    out
}

#[derive(Default)]
struct GroupResult {
    profile: Option<ProfileRecord>,
    posts: Vec<PostRecord>,
    rows_used: usize,
    skipped: Vec<SkippedRow>,
}

fn skip(row: &Row, reason: String) -> SkippedRow {
    SkippedRow {
        line: row.line,
        reason,
        raw: format!("{},{},{}", row.url, row.field, row.value),
    }
}

fn normalize_group(group: &Group) -> GroupResult {
    let mut result = GroupResult::default();
    let mut profile_fields: BTreeMap<&str, Vec<RawValue>> = BTreeMap::new();
    let mut post_fields: BTreeMap<usize, BTreeMap<&str, Vec<RawValue>>> = BTreeMap::new();
    let profile_names: Vec<String> = Attribute::ALL.iter().map(|a| attribute_field(*a)).collect();
    for row in &group.rows {
        let value = RawValue::decode(&row.value);
        match row.kind {
            CaptureKind::Profile => {
                let known = row.field == FRIEND_COUNT_FIELD
                    || row.field == PAGE_COMPLETE_FIELD
                    || profile_names.iter().any(|n| *n == row.field);
                if !known {
                    result.skipped.push(skip(row, format!("unknown profile field {:?}", row.field)));
                    continue;
                }
                profile_fields.entry(row.field.as_str()).or_default().push(value);
            }
            CaptureKind::Post => {
                let parsed = row
                    .field
                    .split_once('.')
                    .and_then(|(i, attr)| Some((i.parse::<usize>().ok().filter(|i| *i > 0)?, attr)));
                let Some((index, attr)) = parsed else {
                    result.skipped.push(skip(row, format!("bad post field {:?}", row.field)));
                    continue;
                };
                post_fields.entry(index).or_default().entry(attr).or_default().push(value);
            }
        }
        result.rows_used += 1;
    }
    if !profile_fields.is_empty() {
        result.profile = Some(build_profile(group, &profile_fields));
    }
    for (index, fields) in &post_fields {
        result.posts.push(build_post(group, *index, fields));
    }
    result
}

fn single(values: Option<&Vec<RawValue>>) -> &RawValue {
    static MISSING: RawValue = RawValue::NotPresent;
    values.and_then(|v| v.first()).unwrap_or(&MISSING)
}

/// Parses a scalar: markup stripped, then `parse`.
fn scalar<T>(raw: &RawValue, parse: impl Fn(&str) -> Option<T>) -> Field<T> {
    match raw {
        RawValue::NotDisclosed => Field::NotDisclosed,
        RawValue::Text(s) => {
            let clean = strip_markup(s);
            match parse(&clean) {
                Some(v) => Field::Value(v),
                None => Field::Unparseable(clean),
            }
        }
        RawValue::Empty => Field::Unparseable(String::new()),
        RawValue::NotPresent => Field::Unparseable(crate::dom::extract::NOT_PRESENT.to_string()),
    }
}

fn non_empty(s: &str) -> Option<String> {
    (!s.is_empty()).then(|| s.to_string())
}

fn list(values: Option<&Vec<RawValue>>, item: impl Fn(&str) -> Option<String>) -> Field<Vec<String>> {
    let Some(values) = values else {
        return Field::Unparseable(crate::dom::extract::NOT_PRESENT.to_string());
    };
    let mut out = Vec::new();
    for v in values {
        match v {
            RawValue::NotDisclosed if values.len() == 1 => return Field::NotDisclosed,
            RawValue::Empty if values.len() == 1 => return Field::Value(Vec::new()),
            RawValue::Text(s) => {
                let clean = strip_markup(s);
                match item(&clean) {
                    Some(i) => out.push(i),
                    None => return Field::Unparseable(clean),
                }
            }
            other => return Field::Unparseable(other.encode().to_string()),
        }
    }
    Field::Value(out)
}

fn build_profile(group: &Group, fields: &BTreeMap<&str, Vec<RawValue>>) -> ProfileRecord {
    let get = |a: Attribute| fields.get(attribute_field(a).as_str());
    let text = |a: Attribute| scalar(single(get(a)), non_empty);
    ProfileRecord {
        profile_id: group.profile_id.clone(),
        profile_url: group.url.to_string(),
        friend_count: scalar(single(fields.get(FRIEND_COUNT_FIELD)), parse_count),
        birthday: scalar(single(get(Attribute::Birthday)), parse_date),
        email: text(Attribute::Email),
        phone: text(Attribute::Phone),
        family_members: list(get(Attribute::FamilyMembers), non_empty),
        relationship_status: scalar(single(get(Attribute::RelationshipStatus)), Relationship::from_label),
        gender: scalar(single(get(Attribute::Gender)), Gender::from_label),
        hometown: text(Attribute::Hometown),
        current_city: text(Attribute::CurrentCity),
        pages_liked: list(get(Attribute::PagesLiked), non_empty),
        groups_joined: list(get(Attribute::GroupsJoined), non_empty),
        page_complete: matches!(single(fields.get(PAGE_COMPLETE_FIELD)), RawValue::Text(t) if t == "true"),
        seed_index: group.seed_index,
        captured_at: group.captured_at.clone(),
    }
}

fn build_post(group: &Group, index: usize, fields: &BTreeMap<&str, Vec<RawValue>>) -> PostRecord {
    let get = |name: &str| single(fields.get(name));
    let count = |name: &str| scalar(get(name), parse_count);
    let tags = match fields.get("tags") {
        Some(v) if matches!(v.as_slice(), [RawValue::NotPresent]) => Field::Value(Vec::new()),
        v => list(v, |href| profile_id_from_path(href).map(str::to_string)),
    };
    PostRecord {
        profile_id: group.profile_id.clone(),
        post_index: index,
        post_type: scalar(get("type"), PostType::parse),
        title: scalar(get("title"), non_empty),
        content: scalar(get("content"), non_empty),
        date: scalar(get("date"), parse_date),
        time: scalar(get("time"), parse_time),
        comment_count: count("comments"),
        emotion_counts: ReactionKind::ALL
            .iter()
            .map(|k| (*k, count(&format!("emotion.{}", k.as_str()))))
            .collect(),
        share_count: count("shares"),
        view_count: match get("views") {
            RawValue::NotPresent => None,
            v => Some(scalar(v, parse_count)),
        },
        reaction_total: count("reactions"),
        tags,
        seed_index: group.seed_index,
        captured_at: group.captured_at.clone(),
    }
}

/// Writes `profiles.csv`, `posts.csv` and `skipped.csv` into `dir`.
pub fn write_structured(dir: &Path, normalized: &Normalized) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir)?;
    write_profiles_csv(&dir.join("profiles.csv"), &normalized.profiles)?;
    write_posts_csv(&dir.join("posts.csv"), &normalized.posts)?;
    let mut w = csv::Writer::from_path(dir.join("skipped.csv")).map_err(|e| PipelineError::Io(std::io::Error::other(e)))?;
    w.write_record(["line", "reason", "raw"])
        .map_err(|e| PipelineError::Io(std::io::Error::other(e)))?;
    for s in &normalized.skipped {
        w.write_record([s.line.to_string(), s.reason.clone(), s.raw.clone()])
            .map_err(|e| PipelineError::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `profiles.csv` and `posts.csv` from a structured directory.
pub fn read_structured(dir: &Path) -> Result<(Vec<ProfileRecord>, Vec<PostRecord>), PipelineError> {
    Ok((
        super::records::read_profiles_csv(&dir.join("profiles.csv"))?,
        super::records::read_posts_csv(&dir.join("posts.csv"))?,
    ))
}
