//! Deduplicating record store persisted as one JSON document.
//!
//! Keys: `profile_id` for profiles, `(profile_id, post_index)` for posts.
//! The first write for a key wins. Saving writes keys in sorted order via a
//! temporary file and rename, so identical contents give identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::records::{PostRecord, ProfileRecord};
use super::verify::{Verdict, VerificationReport};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("store {0} is not a valid store file: {1}")]
    Corrupt(PathBuf, String),
    #[error("in-memory store has no file")]
    NoPath,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreData {
    pub profiles: BTreeMap<String, ProfileRecord>,
    pub posts: BTreeMap<String, BTreeMap<usize, PostRecord>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted,
    Duplicate,
}

pub enum StoreRecord {
    Profile(ProfileRecord),
    Post(PostRecord),
}

pub struct Store {
    path: Option<PathBuf>,
    data: Mutex<StoreData>,
    conflicts: AtomicUsize,
}

impl Store {
    pub fn in_memory() -> Store {
        Store {
            path: None,
            data: Mutex::new(StoreData::default()),
            conflicts: AtomicUsize::new(0),
        }
    }

    /// Opens the store at `path`, empty if the file does not exist yet.
    pub fn open(path: &Path) -> Result<Store, StoreError> {
        let data = match fs::read(path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map_err(|e| StoreError::Corrupt(path.to_path_buf(), e.to_string()))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => StoreData::default(),
            Err(source) => {
                return Err(StoreError::Io {
                    path: path.to_path_buf(),
                    source,
                })
            }
        };
        Ok(Store {
            path: Some(path.to_path_buf()),
            data: Mutex::new(data),
            conflicts: AtomicUsize::new(0),
        })
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, StoreData> {
        self.data.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn dedup_insert(&self, record: StoreRecord) -> InsertOutcome {
        match record {
            StoreRecord::Profile(p) => self.insert_profile(p),
            StoreRecord::Post(p) => self.insert_post(p),
        }
    }

    pub fn insert_profile(&self, record: ProfileRecord) -> InsertOutcome {
        let mut data = self.lock();
        match data.profiles.get(&record.profile_id) {
            Some(existing) => {
                if existing.content() != record.content() {
                    self.conflicts.fetch_add(1, Ordering::Relaxed);
                    log::warn!(
                        "conflicting duplicate for profile {} (seed {} kept, seed {} dropped)",
                        record.profile_id,
                        existing.seed_index,
                        record.seed_index
                    );
                }
                InsertOutcome::Duplicate
            }
            None => {
                data.profiles.insert(record.profile_id.clone(), record);
                InsertOutcome::Inserted
            }
        }
    }

    pub fn insert_post(&self, record: PostRecord) -> InsertOutcome {
        let mut data = self.lock();
        let posts = data.posts.entry(record.profile_id.clone()).or_default();
        match posts.get(&record.post_index) {
            Some(existing) => {
                if existing.content() != record.content() {
                    self.conflicts.fetch_add(1, Ordering::Relaxed);
                    log::warn!(
                        "conflicting duplicate for post {}#{}",
                        record.profile_id,
                        record.post_index
                    );
                }
                InsertOutcome::Duplicate
            }
            None => {
                posts.insert(record.post_index, record);
                InsertOutcome::Inserted
            }
        }
    }

    /// Duplicates whose content differed from the stored row.
    pub fn conflicts(&self) -> usize {
        self.conflicts.load(Ordering::Relaxed)
    }

    pub fn profile_count(&self) -> usize {
        self.lock().profiles.len()
    }

    pub fn post_count(&self) -> usize {
        self.lock().posts.values().map(BTreeMap::len).sum()
    }

    pub fn profile(&self, profile_id: &str) -> Option<ProfileRecord> {
        self.lock().profiles.get(profile_id).cloned()
    }

    /// All profiles, ordered by id.
    pub fn profiles(&self) -> Vec<ProfileRecord> {
        self.lock().profiles.values().cloned().collect()
    }

    /// Posts of one profile, ordered by index.
    pub fn posts_of(&self, profile_id: &str) -> Vec<PostRecord> {
        self.lock()
            .posts
            .get(profile_id)
            .map(|m| m.values().cloned().collect())
            .unwrap_or_default()
    }

    pub fn snapshot(&self) -> StoreData {
        self.lock().clone()
    }

    pub fn save(&self) -> Result<(), StoreError> {
        let path = self.path.as_ref().ok_or(StoreError::NoPath)?;
        self.save_to(path)
    }

    pub fn save_to(&self, path: &Path) -> Result<(), StoreError> {
        let io = |source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut bytes = serde_json::to_vec(&*self.lock()).map_err(|e| io(std::io::Error::other(e)))?;
        bytes.push(b'\n');
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(io)?;
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, &bytes).map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub profiles_inserted: usize,
    pub profiles_duplicate: usize,
    pub posts_inserted: usize,
    pub posts_duplicate: usize,
    /// Profile captures skipped because verification marked them junk.
    pub junk_skipped: usize,
}

/// Inserts every record whose capture verified ok, in input order.
pub fn load_records(
    store: &Store,
    profiles: &[ProfileRecord],
    posts: &[PostRecord],
    reports: &[VerificationReport],
) -> LoadReport {
    let ok: std::collections::HashSet<_> = reports
        .iter()
        .filter(|r| r.verdict == Verdict::Ok)
        .map(VerificationReport::capture_key)
        .collect();
    let mut report = LoadReport::default();
    for p in profiles {
        if !ok.contains(&p.capture_key()) {
            report.junk_skipped += 1;
            continue;
        }
        match store.insert_profile(p.clone()) {
            InsertOutcome::Inserted => report.profiles_inserted += 1,
            InsertOutcome::Duplicate => report.profiles_duplicate += 1,
        }
    }
    for p in posts.iter().filter(|p| ok.contains(&p.capture_key())) {
        match store.insert_post(p.clone()) {
            InsertOutcome::Inserted => report.posts_inserted += 1,
            InsertOutcome::Duplicate => report.posts_duplicate += 1,
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::records::Field;

    fn profile(id: &str, seed: usize, city: &str) -> ProfileRecord {
        ProfileRecord {
            profile_id: id.into(),
            profile_url: format!("http://h/profile/{id}"),
            friend_count: Field::Value(1),
            birthday: Field::NotDisclosed,
            email: Field::NotDisclosed,
            phone: Field::NotDisclosed,
            family_members: Field::NotDisclosed,
            relationship_status: Field::NotDisclosed,
            gender: Field::NotDisclosed,
            hometown: Field::NotDisclosed,
            current_city: Field::Value(city.into()),
            pages_liked: Field::NotDisclosed,
            groups_joined: Field::NotDisclosed,
            page_complete: true,
            seed_index: seed,
            captured_at: format!("t{seed}"),
        }
    }

    #[test]
    fn first_write_wins() {
        let s = Store::in_memory();
        assert_eq!(s.insert_profile(profile("u1", 1, "Pune")), InsertOutcome::Inserted);
        assert_eq!(s.insert_profile(profile("u1", 2, "Pune")), InsertOutcome::Duplicate);
        assert_eq!(s.conflicts(), 0);
        assert_eq!(s.insert_profile(profile("u1", 3, "Delhi")), InsertOutcome::Duplicate);
        assert_eq!(s.conflicts(), 1);
        assert_eq!(s.profile_count(), 1);
        assert_eq!(s.profile("u1").unwrap().seed_index, 1);
    }

    #[test]
    fn concurrent_inserts_of_one_key() {
        let s = Store::in_memory();
        let inserted = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for t in 0..8 {
                let (s, inserted) = (&s, &inserted);
                scope.spawn(move || {
                    if s.insert_profile(profile("u9", t, "Pune")) == InsertOutcome::Inserted {
                        inserted.fetch_add(1, Ordering::SeqCst);
                    }
                });
            }
        });
        assert_eq!(inserted.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn save_and_reopen_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.db");
        let s = Store::open(&path).unwrap();
        s.insert_profile(profile("u2", 1, "Pune"));
        s.insert_profile(profile("u10", 1, "Delhi"));
        s.save().unwrap();
        let first = fs::read(&path).unwrap();
        let again = Store::open(&path).unwrap();
        assert_eq!(again.snapshot(), s.snapshot());
        again.insert_profile(profile("u2", 2, "Pune"));
        again.save().unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn corrupt_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.db");
        fs::write(&path, "not json").unwrap();
        assert!(matches!(Store::open(&path), Err(StoreError::Corrupt(..))));
    }
}
