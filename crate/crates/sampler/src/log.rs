//! Fixed-width binary trajectory logs for offline debugging.
//!
//! Record layout, little-endian, 24 bytes per record:
//!
//! | offset | size | field     | type |
//! |--------|------|-----------|------|
//! | 0      | 4    | iteration | u32  |
//! | 4      | 4    | m         | u32  |
//! | 8      | 4    | state     | u32  |
//! | 12     | 4    | action    | u32  |
//! | 16     | 8    | estimate  | f64  |

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::SamplerError;

pub const RECORD_BYTES: usize = 24;

/// One trajectory of a batch: where it started, which action it probed, and
/// the rollout estimate it produced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub iteration: u32,
    pub m: u32,
    pub state: u32,
    pub action: u32,
    pub estimate: f64,
}

impl TrajectoryRecord {
    fn to_bytes(self) -> [u8; RECORD_BYTES] {
        let mut buf = [0u8; RECORD_BYTES];
        buf[0..4].copy_from_slice(&self.iteration.to_le_bytes());
        buf[4..8].copy_from_slice(&self.m.to_le_bytes());
        buf[8..12].copy_from_slice(&self.state.to_le_bytes());
        buf[12..16].copy_from_slice(&self.action.to_le_bytes());
        buf[16..24].copy_from_slice(&self.estimate.to_le_bytes());
        buf
    }

    fn from_bytes(buf: &[u8]) -> TrajectoryRecord {
        TrajectoryRecord {
            iteration: u32::from_le_bytes(buf[0..4].try_into().unwrap()),
            m: u32::from_le_bytes(buf[4..8].try_into().unwrap()),
            state: u32::from_le_bytes(buf[8..12].try_into().unwrap()),
            action: u32::from_le_bytes(buf[12..16].try_into().unwrap()),
            estimate: f64::from_le_bytes(buf[16..24].try_into().unwrap()),
        }
    }
}

pub fn write_trajectory_log(
    path: &Path,
    records: &[TrajectoryRecord],
) -> Result<(), SamplerError> {
    let mut writer = BufWriter::new(File::create(path)?);
    for rec in records {
        writer.write_all(&rec.to_bytes())?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_trajectory_log(path: &Path) -> Result<Vec<TrajectoryRecord>, SamplerError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() % RECORD_BYTES != 0 {
        return Err(SamplerError::MalformedLog(format!(
            "{} is {} bytes, not a multiple of the {}-byte record size",
            path.display(),
            bytes.len(),
            RECORD_BYTES
        )));
    }
    Ok(bytes.chunks_exact(RECORD_BYTES).map(TrajectoryRecord::from_bytes).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_round_trips() {
        let records = vec![
            TrajectoryRecord { iteration: 0, m: 0, state: 3, action: 1, estimate: 2.5 },
            TrajectoryRecord { iteration: 7, m: 41, state: 0, action: 0, estimate: 0.0 },
            TrajectoryRecord { iteration: 7, m: 42, state: 9, action: 2, estimate: -0.0 },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("batch.trajlog");
        write_trajectory_log(&path, &records).unwrap();
        assert_eq!(read_trajectory_log(&path).unwrap(), records);
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 3 * RECORD_BYTES as u64);
    }

    #[test]
    fn truncated_log_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.trajlog");
        std::fs::write(&path, [0u8; RECORD_BYTES + 5]).unwrap();
        let err = read_trajectory_log(&path).unwrap_err();
        assert!(matches!(err, SamplerError::MalformedLog(_)));
    }
}
