//! Append-only output files shared between session workers.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use url::Url;

use crate::dom::extract::{RawRow, RAW_HEADER};

fn open_append(path: &Path) -> io::Result<(File, bool)> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let empty = file.metadata()?.len() == 0;
    Ok((file, empty))
}

/// Raw capture CSV. Each [`RawSink::append`] lands as one contiguous block.
pub struct RawSink {
    path: PathBuf,
    writer: Mutex<csv::Writer<BufWriter<File>>>,
}

impl RawSink {
    pub fn open(path: &Path) -> io::Result<RawSink> {
        let (file, empty) = open_append(path)?;
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(BufWriter::new(file));
        if empty {
            writer.write_record(RAW_HEADER)?;
            writer.flush()?;
        }
        Ok(RawSink {
            path: path.to_path_buf(),
            writer: Mutex::new(writer),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, rows: &[RawRow]) -> io::Result<()> {
        let mut w = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        for row in rows {
            w.serialize(row).map_err(io::Error::other)?;
        }
        w.flush()
    }
}

/// Friend-link list file, one URL per line.
pub struct LinkSink {
    writer: Mutex<BufWriter<File>>,
}

impl LinkSink {
    pub fn open(path: &Path) -> io::Result<LinkSink> {
        let (file, _) = open_append(path)?;
        Ok(LinkSink {
            writer: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn append<'a, I: IntoIterator<Item = &'a Url>>(&self, urls: I) -> io::Result<()> {
        let mut w = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        for url in urls {
            writeln!(w, "{url}")?;
        }
        w.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::extract::CaptureKind;

    fn row(v: &str) -> RawRow {
        RawRow {
            capture_kind: CaptureKind::Profile,
            profile_url: "http://h/profile/u1".into(),
            seed_index: 1,
            field: "friend_count".into(),
            value: v.into(),
            captured_at: "t".into(),
        }
    }

    #[test]
    fn header_written_once_and_rows_appended() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw.csv");
        RawSink::open(&path).unwrap().append(&[row("1")]).unwrap();
        RawSink::open(&path).unwrap().append(&[row("2, with comma")]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], RAW_HEADER.join(","));
        assert!(lines[2].contains("\"2, with comma\""));
    }

    #[test]
    fn concurrent_appends_stay_contiguous() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw.csv");
        let sink = RawSink::open(&path).unwrap();
        std::thread::scope(|s| {
            for t in 0..4 {
                let sink = &sink;
                s.spawn(move || {
                    for _ in 0..50 {
                        let rows: Vec<_> = (0..5).map(|_| row(&t.to_string())).collect();
                        sink.append(&rows).unwrap();
                    }
                });
            }
        });
        let text = fs::read_to_string(&path).unwrap();
        let values: Vec<_> = text.lines().skip(1).map(|l| l.split(',').nth(4).unwrap()).collect();
        assert_eq!(values.len(), 1000);
        for block in values.chunks(5) {
            assert!(block.iter().all(|v| *v == block[0]));
        }
    }
}
