//! Host/agent control messages: a 4-byte big-endian length followed by
//! that many bytes of JSON.

use std::io::{self, Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config_io::SeedProfile;
use crate::crawl::{CrawlSummary, RetryPolicy, SeedSummary};

pub const MAX_FRAME: usize = 64 << 20;

/// Host to agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum HostMessage {
    Start(StartCommand),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartCommand {
    pub agent_id: usize,
    pub seed_indices: Vec<usize>,
    /// Seed rows, parallel to `seed_indices`.
    pub seeds: Vec<SeedProfile>,
    /// Crawl configuration in config-file syntax with absolute paths.
    pub config_blob: String,
    pub endpoint: String,
    pub shard_path: String,
    pub links_path: String,
    pub sessions: usize,
    pub retry: RetryPolicy,
    /// Test hook: drop the connection after this many seeds finish.
    #[serde(default)]
    pub fail_after_seeds: Option<usize>,
}

/// Agent to host.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AgentMessage {
    Hello { agent_id: usize },
    Progress { seed: SeedSummary },
    Done { summary: CrawlSummary },
    Failed { error: String },
}

pub fn write_frame<W: Write, T: Serialize>(w: &mut W, msg: &T) -> io::Result<()> {
    let body = serde_json::to_vec(msg).map_err(io::Error::other)?;
    let len = u32::try_from(body.len()).map_err(|_| io::Error::other("frame too large"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(&body)?;
    w.flush()
}

/// `Ok(None)` on a clean end of stream before a frame starts.
pub fn read_frame<R: Read, T: DeserializeOwned>(r: &mut R) -> io::Result<Option<T>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("frame of {len} bytes")));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    serde_json::from_slice(&body)
        .map(Some)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_round_trip() {
        let msgs = vec![
            AgentMessage::Hello { agent_id: 2 },
            AgentMessage::Failed { error: "x".into() },
            AgentMessage::Done {
                summary: CrawlSummary::default(),
            },
        ];
        let mut buf = Vec::new();
        for m in &msgs {
            write_frame(&mut buf, m).unwrap();
        }
        let mut r = buf.as_slice();
        let mut back = Vec::new();
        while let Some(m) = read_frame::<_, AgentMessage>(&mut r).unwrap() {
            back.push(m);
        }
        assert_eq!(back, msgs);
    }

    #[test]
    fn json_shape() {
        let v = serde_json::to_value(AgentMessage::Hello { agent_id: 1 }).unwrap();
        assert_eq!(v, serde_json::json!({"status": "hello", "agent_id": 1}));
    }

    #[test]
    fn truncated_frame_is_an_error() {
        let mut buf = Vec::new();
        write_frame(&mut buf, &AgentMessage::Hello { agent_id: 1 }).unwrap();
        buf.truncate(buf.len() - 1);
        assert!(read_frame::<_, AgentMessage>(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn oversized_length_is_rejected() {
        let buf = (MAX_FRAME as u32 + 1).to_be_bytes();
        assert!(read_frame::<_, AgentMessage>(&mut &buf[..]).is_err());
    }
}
