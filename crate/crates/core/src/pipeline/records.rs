//! Structured profile and post records and their CSV encoding.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::{NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::model::{Attribute, Gender, PostType, ReactionKind, Relationship, DATE_FORMAT, TIME_FORMAT};

pub const NOT_DISCLOSED: &str = "NOT_DISCLOSED";
pub const NOT_PRESENT: &str = "NOT_PRESENT";
pub const EMPTY_LIST: &str = "EMPTY";
pub const UNPARSEABLE_PREFIX: &str = "UNPARSEABLE:";
const LIST_SEP: char = ';';

/// A parsed field: a value, hidden by the profile, or flagged for
/// verification with the text that failed to parse.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field<T> {
    Value(T),
    NotDisclosed,
    Unparseable(String),
}

impl<T> Field<T> {
    pub fn value(&self) -> Option<&T> {
        match self {
            Field::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_unparseable(&self) -> bool {
        matches!(self, Field::Unparseable(_))
    }
}

/// Text form of a field value in the structured CSV files.
pub trait CellValue: Sized {
    fn to_cell(&self) -> String;
    fn from_cell(s: &str) -> Option<Self>;
}

impl CellValue for String {
    fn to_cell(&self) -> String {
        self.clone()
    }
    fn from_cell(s: &str) -> Option<Self> {
        Some(s.to_string())
    }
}

impl CellValue for u64 {
    fn to_cell(&self) -> String {
        self.to_string()
    }
    fn from_cell(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}

impl CellValue for NaiveDate {
    fn to_cell(&self) -> String {
        self.format("%Y-%m-%d").to_string()
    }
    fn from_cell(s: &str) -> Option<Self> {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
    }
}

impl CellValue for NaiveTime {
    fn to_cell(&self) -> String {
        self.format(TIME_FORMAT).to_string()
    }
    fn from_cell(s: &str) -> Option<Self> {
        NaiveTime::parse_from_str(s, TIME_FORMAT).ok()
    }
}

impl CellValue for Gender {
    fn to_cell(&self) -> String {
        self.label().to_string()
    }
    fn from_cell(s: &str) -> Option<Self> {
        Gender::from_label(s)
    }
}

impl CellValue for Relationship {
    fn to_cell(&self) -> String {
        self.label().to_string()
    }
    fn from_cell(s: &str) -> Option<Self> {
        Relationship::from_label(s)
    }
}

impl CellValue for PostType {
    fn to_cell(&self) -> String {
        self.as_str().to_string()
    }
    fn from_cell(s: &str) -> Option<Self> {
        PostType::parse(s)
    }
}

impl CellValue for Vec<String> {
    fn to_cell(&self) -> String {
        if self.is_empty() {
            EMPTY_LIST.to_string()
        } else {
            self.join(&LIST_SEP.to_string())
        }
    }
    fn from_cell(s: &str) -> Option<Self> {
        Some(match s {
            EMPTY_LIST | "" => Vec::new(),
            _ => s.split(LIST_SEP).map(str::to_string).collect(),
        })
    }
}

impl<T: CellValue> Field<T> {
    pub fn encode(&self) -> String {
        match self {
            Field::Value(v) => v.to_cell(),
            Field::NotDisclosed => NOT_DISCLOSED.to_string(),
            Field::Unparseable(raw) => format!("{UNPARSEABLE_PREFIX}{raw}"),
        }
    }

    pub fn decode(s: &str) -> Self {
        if s == NOT_DISCLOSED {
            return Field::NotDisclosed;
        }
        if let Some(raw) = s.strip_prefix(UNPARSEABLE_PREFIX) {
            return Field::Unparseable(raw.to_string());
        }
        match T::from_cell(s) {
            Some(v) => Field::Value(v),
            None => Field::Unparseable(s.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub profile_id: String,
    pub profile_url: String,
    pub friend_count: Field<u64>,
    pub birthday: Field<NaiveDate>,
    pub email: Field<String>,
    pub phone: Field<String>,
    pub family_members: Field<Vec<String>>,
    pub relationship_status: Field<Relationship>,
    pub gender: Field<Gender>,
    pub hometown: Field<String>,
    pub current_city: Field<String>,
    pub pages_liked: Field<Vec<String>>,
    pub groups_joined: Field<Vec<String>>,
    pub page_complete: bool,
    pub seed_index: usize,
    pub captured_at: String,
}

/// Disclosure state of one attribute, independent of its value type.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Disclosure {
    Disclosed,
    NotDisclosed,
    Unparseable,
}

fn disclosure<T>(f: &Field<T>) -> Disclosure {
    match f {
        Field::Value(_) => Disclosure::Disclosed,
        Field::NotDisclosed => Disclosure::NotDisclosed,
        Field::Unparseable(_) => Disclosure::Unparseable,
    }
}

impl ProfileRecord {
    pub fn disclosure(&self, attr: Attribute) -> Disclosure {
        match attr {
            Attribute::Gender => disclosure(&self.gender),
            Attribute::Birthday => disclosure(&self.birthday),
            Attribute::Email => disclosure(&self.email),
            Attribute::Phone => disclosure(&self.phone),
            Attribute::RelationshipStatus => disclosure(&self.relationship_status),
            Attribute::Hometown => disclosure(&self.hometown),
            Attribute::CurrentCity => disclosure(&self.current_city),
            Attribute::FamilyMembers => disclosure(&self.family_members),
            Attribute::PagesLiked => disclosure(&self.pages_liked),
            Attribute::GroupsJoined => disclosure(&self.groups_joined),
        }
    }

    /// Encoded value of `attr` as it appears in profiles.csv.
    pub fn encoded(&self, attr: Attribute) -> String {
        match attr {
            Attribute::Gender => self.gender.encode(),
            Attribute::Birthday => self.birthday.encode(),
            Attribute::Email => self.email.encode(),
            Attribute::Phone => self.phone.encode(),
            Attribute::RelationshipStatus => self.relationship_status.encode(),
            Attribute::Hometown => self.hometown.encode(),
            Attribute::CurrentCity => self.current_city.encode(),
            Attribute::FamilyMembers => self.family_members.encode(),
            Attribute::PagesLiked => self.pages_liked.encode(),
            Attribute::GroupsJoined => self.groups_joined.encode(),
        }
    }

    /// Identity of the capture this record came from.
    pub fn capture_key(&self) -> CaptureKey {
        CaptureKey {
            profile_id: self.profile_id.clone(),
            seed_index: self.seed_index,
            captured_at: self.captured_at.clone(),
        }
    }

    /// The record without capture provenance, for content comparison.
    pub fn content(&self) -> ProfileRecord {
        ProfileRecord {
            seed_index: 0,
            captured_at: String::new(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CaptureKey {
    pub profile_id: String,
    pub seed_index: usize,
    pub captured_at: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostRecord {
    pub profile_id: String,
    pub post_index: usize,
    pub post_type: Field<PostType>,
    pub title: Field<String>,
    pub content: Field<String>,
    pub date: Field<NaiveDate>,
    pub time: Field<NaiveTime>,
    pub comment_count: Field<u64>,
    /// One entry per reaction kind.
    pub emotion_counts: BTreeMap<ReactionKind, Field<u64>>,
    pub share_count: Field<u64>,
    /// `None` when the post shows no view count.
    pub view_count: Option<Field<u64>>,
    pub reaction_total: Field<u64>,
    /// Profile ids tagged in the post.
    pub tags: Field<Vec<String>>,
    pub seed_index: usize,
    pub captured_at: String,
}

impl PostRecord {
    pub fn capture_key(&self) -> CaptureKey {
        CaptureKey {
            profile_id: self.profile_id.clone(),
            seed_index: self.seed_index,
            captured_at: self.captured_at.clone(),
        }
    }

    pub fn content(&self) -> PostRecord {
        PostRecord {
            seed_index: 0,
            captured_at: String::new(),
            ..self.clone()
        }
    }

    /// Names of fields that failed to parse.
    pub fn unparseable_fields(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |name: &str, bad: bool| {
            if bad {
                out.push(name.to_string());
            }
        };
        check("post_type", self.post_type.is_unparseable());
        check("title", self.title.is_unparseable());
        check("content", self.content.is_unparseable());
        check("date", self.date.is_unparseable());
        check("time", self.time.is_unparseable());
        check("comment_count", self.comment_count.is_unparseable());
        for (k, v) in &self.emotion_counts {
            check(k.as_str(), v.is_unparseable());
        }
        check("share_count", self.share_count.is_unparseable());
        check("view_count", self.view_count.as_ref().is_some_and(Field::is_unparseable));
        check("reaction_total", self.reaction_total.is_unparseable());
        check("tags", self.tags.is_unparseable());
        out
    }

    /// `Some(false)` when the total and every per-kind count are known and disagree.
    pub fn reactions_consistent(&self) -> Option<bool> {
        let total = *self.reaction_total.value()?;
        let mut sum = 0;
        for kind in ReactionKind::ALL {
            sum += *self.emotion_counts.get(&kind)?.value()?;
        }
        Some(sum == total)
    }
}

pub const PROFILE_HEADER: [&str; 16] = [
    "profile_id",
    "profile_url",
    "friend_count",
    "birthday",
    "email",
    "phone",
    "family_members",
    "relationship_status",
    "gender",
    "hometown",
    "current_city",
    "pages_liked",
    "groups_joined",
    "page_complete",
    "seed_index",
    "captured_at",
];

pub const POST_HEADER: [&str; 20] = [
    "profile_id",
    "post_index",
    "post_type",
    "title",
    "content",
    "date",
    "time",
    "comment_count",
    "like",
    "love",
    "haha",
    "wow",
    "sad",
    "angry",
    "share_count",
    "view_count",
    "reaction_total",
    "tags",
    "seed_index",
    "captured_at",
];

impl ProfileRecord {
    pub fn to_row(&self) -> Vec<String> {
        vec![
            self.profile_id.clone(),
            self.profile_url.clone(),
            self.friend_count.encode(),
            self.birthday.encode(),
            self.email.encode(),
            self.phone.encode(),
            self.family_members.encode(),
            self.relationship_status.encode(),
            self.gender.encode(),
            self.hometown.encode(),
            self.current_city.encode(),
            self.pages_liked.encode(),
            self.groups_joined.encode(),
            self.page_complete.to_string(),
            self.seed_index.to_string(),
            self.captured_at.clone(),
        ]
    }

    pub fn from_row(row: &csv::StringRecord) -> Option<ProfileRecord> {
        if row.len() != PROFILE_HEADER.len() {
            return None;
        }
        Some(ProfileRecord {
            profile_id: row[0].to_string(),
            profile_url: row[1].to_string(),
            friend_count: Field::decode(&row[2]),
            birthday: Field::decode(&row[3]),
            email: Field::decode(&row[4]),
            phone: Field::decode(&row[5]),
            family_members: Field::decode(&row[6]),
            relationship_status: Field::decode(&row[7]),
            gender: Field::decode(&row[8]),
            hometown: Field::decode(&row[9]),
            current_city: Field::decode(&row[10]),
            pages_liked: Field::decode(&row[11]),
            groups_joined: Field::decode(&row[12]),
            page_complete: row[13].parse().ok()?,
            seed_index: row[14].parse().ok()?,
            captured_at: row[15].to_string(),
        })
    }
}

impl PostRecord {
    pub fn to_row(&self) -> Vec<String> {
        let mut row = vec![
            self.profile_id.clone(),
            self.post_index.to_string(),
            self.post_type.encode(),
            self.title.encode(),
            self.content.encode(),
            self.date.encode(),
            self.time.encode(),
            self.comment_count.encode(),
        ];
        for kind in ReactionKind::ALL {
            row.push(match self.emotion_counts.get(&kind) {
                Some(f) => f.encode(),
                None => NOT_PRESENT.to_string(),
            });
        }
        row.push(self.share_count.encode());
        row.push(match &self.view_count {
            Some(f) => f.encode(),
            None => NOT_PRESENT.to_string(),
        });
        row.push(self.reaction_total.encode());
        row.push(self.tags.encode());
        row.push(self.seed_index.to_string());
        row.push(self.captured_at.clone());
        row
    }

    pub fn from_row(row: &csv::StringRecord) -> Option<PostRecord> {
        if row.len() != POST_HEADER.len() {
            return None;
        }
        let emotion_counts = ReactionKind::ALL
            .iter()
            .enumerate()
            .map(|(i, k)| (*k, Field::decode(&row[8 + i])))
            .collect();
        Some(PostRecord {
            profile_id: row[0].to_string(),
            post_index: row[1].parse().ok()?,
            post_type: Field::decode(&row[2]),
            title: Field::decode(&row[3]),
            content: Field::decode(&row[4]),
            date: Field::decode(&row[5]),
            time: Field::decode(&row[6]),
            comment_count: Field::decode(&row[7]),
            emotion_counts,
            share_count: Field::decode(&row[14]),
            view_count: match &row[15] {
                NOT_PRESENT => None,
                s => Some(Field::decode(s)),
            },
            reaction_total: Field::decode(&row[16]),
            tags: Field::decode(&row[17]),
            seed_index: row[18].parse().ok()?,
            captured_at: row[19].to_string(),
        })
    }
}

/// Parses a displayed date (`5 March 2021`) or ISO date.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, DATE_FORMAT)
        .or_else(|_| NaiveDate::parse_from_str(s, "%Y-%m-%d"))
        .ok()
}

pub fn parse_time(s: &str) -> Option<NaiveTime> {
    NaiveTime::parse_from_str(s, TIME_FORMAT).ok()
}

fn csv_err(e: csv::Error) -> PipelineError {
    PipelineError::Io(std::io::Error::other(e))
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_profiles_csv(path: &Path, profiles: &[ProfileRecord]) -> Result<(), PipelineError> {
    write_csv(path, &PROFILE_HEADER, profiles.iter().map(ProfileRecord::to_row))
}

pub fn write_posts_csv(path: &Path, posts: &[PostRecord]) -> Result<(), PipelineError> {
    write_csv(path, &POST_HEADER, posts.iter().map(PostRecord::to_row))
}

fn read_csv<T>(path: &Path, header: &[&str], parse: fn(&csv::StringRecord) -> Option<T>) -> Result<Vec<T>, PipelineError> {
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
                PipelineError::MissingInput(path.to_path_buf())
            }
            _ => csv_err(e),
        })?;
    let found = r.headers().map_err(csv_err)?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(PipelineError::BadHeader(path.to_path_buf()));
    }
    let mut out = Vec::new();
    for record in r.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        out.push(parse(&record).ok_or_else(|| PipelineError::BadRecord {
            path: path.to_path_buf(),
            line,
        })?);
    }
    Ok(out)
}

pub fn read_profiles_csv(path: &Path) -> Result<Vec<ProfileRecord>, PipelineError> {
    read_csv(path, &PROFILE_HEADER, ProfileRecord::from_row)
}

pub fn read_posts_csv(path: &Path) -> Result<Vec<PostRecord>, PipelineError> {
    read_csv(path, &POST_HEADER, PostRecord::from_row)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_codec() {
        assert_eq!(Field::<u64>::decode("12"), Field::Value(12));
        assert_eq!(Field::<u64>::decode("NOT_DISCLOSED"), Field::NotDisclosed);
        assert_eq!(Field::<u64>::decode("UNPARSEABLE:banana"), Field::Unparseable("banana".into()));
        assert_eq!(Field::<u64>::decode("banana"), Field::Unparseable("banana".into()));
        let list: Field<Vec<String>> = Field::Value(vec![]);
        assert_eq!(list.encode(), "EMPTY");
        assert_eq!(Field::<Vec<String>>::decode("EMPTY"), list);
        let g = Field::Value(Relationship::Complicated);
        assert_eq!(Field::<Relationship>::decode(&g.encode()), g);
    }

    #[test]
    fn displayed_dates_parse() {
        assert_eq!(parse_date("5 March 2021"), NaiveDate::from_ymd_opt(2021, 3, 5));
        assert_eq!(parse_date("25 December 1999"), NaiveDate::from_ymd_opt(1999, 12, 25));
        assert_eq!(parse_date("2021-03-05"), NaiveDate::from_ymd_opt(2021, 3, 5));
        assert_eq!(parse_date("yesterday"), None);
        assert_eq!(parse_time("09:05"), NaiveTime::from_hms_opt(9, 5, 0));
    }
}
