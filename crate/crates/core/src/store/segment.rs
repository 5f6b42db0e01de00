//! Append-only segment files.
//!
//! Record layout: `u32 LE body length | u32 LE crc32(body) | body`, where the
//! body is `u16 len + interface | u16 len + instance | f64 time | u64 sequence
//! | u8 flags | u32 len + payload`, all little endian.

use super::{StoreError, StoredEvent};
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

const HEADER: usize = 8;
const FLAG_UNKNOWN: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordLocation {
    pub segment: u32,
    pub offset: u64,
    pub len: u32,
}

pub fn encode_body(e: &StoredEvent) -> Vec<u8> {
    let mut b = Vec::with_capacity(32 + e.interface.len() + e.instance.len() + e.payload.len());
    b.extend_from_slice(&(e.interface.len() as u16).to_le_bytes());
    b.extend_from_slice(e.interface.as_bytes());
    b.extend_from_slice(&(e.instance.len() as u16).to_le_bytes());
    b.extend_from_slice(e.instance.as_bytes());
    b.extend_from_slice(&e.time.to_le_bytes());
    b.extend_from_slice(&e.sequence.to_le_bytes());
    b.push(if e.unknown_instance { FLAG_UNKNOWN } else { 0 });
    b.extend_from_slice(&(e.payload.len() as u32).to_le_bytes());
    b.extend_from_slice(&e.payload);
    b
}

pub fn decode_body(b: &[u8]) -> Option<StoredEvent> {
    let mut pos = 0usize;
    let mut take = |n: usize| -> Option<&[u8]> {
        let s = b.get(pos..pos + n)?;
        pos += n;
        Some(s)
    };
    let il = u16::from_le_bytes(take(2)?.try_into().ok()?) as usize;
    let interface = String::from_utf8(take(il)?.to_vec()).ok()?;
    let nl = u16::from_le_bytes(take(2)?.try_into().ok()?) as usize;
    let instance = String::from_utf8(take(nl)?.to_vec()).ok()?;
    let time = f64::from_le_bytes(take(8)?.try_into().ok()?);
    let sequence = u64::from_le_bytes(take(8)?.try_into().ok()?);
    let flags = take(1)?[0];
    let pl = u32::from_le_bytes(take(4)?.try_into().ok()?) as usize;
    let payload = take(pl)?.to_vec();
    if pos != b.len() {
        return None;
    }
    Some(StoredEvent { interface, instance, time, sequence, payload, unknown_instance: flags & FLAG_UNKNOWN != 0 })
}

fn segment_path(dir: &Path, n: u32) -> PathBuf {
    dir.join(format!("segment-{n:06}.log"))
}

/// Writer over a directory of rolling segments.
#[derive(Debug)]
pub struct SegmentLog {
    dir: PathBuf,
    current: u32,
    size: u64,
    file: File,
    max_bytes: u64,
}

/// Outcome of scanning existing segments.
pub struct Recovered {
    pub log: SegmentLog,
    pub records: Vec<(StoredEvent, RecordLocation)>,
    /// Bytes dropped from a torn tail record.
    pub truncated_bytes: u64,
}

impl SegmentLog {
    pub fn open(dir: &Path, max_bytes: u64) -> Result<Recovered, StoreError> {
        fs::create_dir_all(dir)?;
        let mut numbers: Vec<u32> = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                name.strip_prefix("segment-")?.strip_suffix(".log")?.parse().ok()
            })
            .collect();
        numbers.sort_unstable();
        let mut records = Vec::new();
        let mut truncated_bytes = 0;
        let last = numbers.last().copied();
        for &n in &numbers {
            let path = segment_path(dir, n);
            let data = fs::read(&path)?;
            let mut off = 0usize;
            while off < data.len() {
                let torn = |what: &str| StoreError::Corrupt { segment: n, offset: off as u64, reason: what.to_string() };
                if data.len() - off < HEADER {
                    if Some(n) == last {
                        break;
                    }
                    return Err(torn("short header"));
                }
                let len = u32::from_le_bytes(data[off..off + 4].try_into().expect("4 bytes")) as usize;
                let crc = u32::from_le_bytes(data[off + 4..off + 8].try_into().expect("4 bytes"));
                let Some(body) = data.get(off + HEADER..off + HEADER + len) else {
                    if Some(n) == last {
                        break;
                    }
                    return Err(torn("short body"));
                };
                if crc32fast::hash(body) != crc {
                    return Err(torn("checksum mismatch"));
                }
                let event = decode_body(body).ok_or_else(|| torn("undecodable record"))?;
                records.push((event, RecordLocation { segment: n, offset: off as u64, len: len as u32 }));
                off += HEADER + len;
            }
            if off < data.len() {
                truncated_bytes = (data.len() - off) as u64;
                let f = OpenOptions::new().write(true).open(&path)?;
                f.set_len(off as u64)?;
            }
        }
        let current = last.unwrap_or(0);
        let path = segment_path(dir, current);
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let size = file.metadata()?.len();
        Ok(Recovered {
            log: SegmentLog { dir: dir.to_path_buf(), current, size, file, max_bytes },
            records,
            truncated_bytes,
        })
    }

    pub fn append(&mut self, e: &StoredEvent) -> Result<RecordLocation, StoreError> {
        let body = encode_body(e);
        let total = (HEADER + body.len()) as u64;
        if self.size > 0 && self.size + total > self.max_bytes {
            self.file.flush()?;
            self.current += 1;
            self.file = OpenOptions::new().create(true).append(true).open(segment_path(&self.dir, self.current))?;
            self.size = 0;
        }
        let mut rec = Vec::with_capacity(total as usize);
        rec.extend_from_slice(&(body.len() as u32).to_le_bytes());
        rec.extend_from_slice(&crc32fast::hash(&body).to_le_bytes());
        rec.extend_from_slice(&body);
        self.file.write_all(&rec)?;
        let loc = RecordLocation { segment: self.current, offset: self.size, len: body.len() as u32 };
        self.size += total;
        Ok(loc)
    }

    pub fn read(&self, loc: RecordLocation) -> Result<StoredEvent, StoreError> {
        let mut f = File::open(segment_path(&self.dir, loc.segment))?;
        f.seek(SeekFrom::Start(loc.offset))?;
        let mut rec = vec![0u8; HEADER + loc.len as usize];
        f.read_exact(&mut rec)?;
        let body = &rec[HEADER..];
        let crc = u32::from_le_bytes(rec[4..8].try_into().expect("4 bytes"));
        let bad = |reason: &str| StoreError::Corrupt { segment: loc.segment, offset: loc.offset, reason: reason.into() };
        if crc32fast::hash(body) != crc {
            return Err(bad("checksum mismatch"));
        }
        decode_body(body).ok_or_else(|| bad("undecodable record"))
    }

    pub fn sync(&mut self) -> Result<(), StoreError> {
        self.file.flush()?;
        self.file.sync_data()?;
        Ok(())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn body_round_trip() {
        let e = StoredEvent {
            interface: "i".into(),
            instance: "x-1".into(),
            time: 12.5,
            sequence: 7,
            payload: b"{\"a\":1}".to_vec(),
            unknown_instance: true,
        };
        assert_eq!(decode_body(&encode_body(&e)), Some(e));
        assert_eq!(decode_body(&[1, 2, 3]), None);
    }
}
