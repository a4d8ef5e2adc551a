//! Write-ahead log: fixed-size segments of length-prefixed, crc-trailed
//! records. The log is the source of truth; everything else is a replay of
//! it. Opening scans all segments, validates the record chain, and truncates
//! the first damage it finds so the appender continues from a clean tail.

pub mod record;

use std::fs::{self, File, OpenOptions};
use std::io::{Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::codec::{crc32c, Dec, Enc};
use crate::error::Result;

pub use record::WalOp;

/// How hard an append pushes bytes toward the platter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Durability {
    /// fsync on every append.
    Always,
    /// fsync when this much time has passed since the last sync.
    Batched(Duration),
}

impl Durability {
    pub fn batched_default() -> Durability {
        Durability::Batched(Duration::from_millis(5))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct WalOptions {
    pub durability: Durability,
    pub max_segment_bytes: u64,
}

impl Default for WalOptions {
    fn default() -> Self {
        WalOptions {
            durability: Durability::Always,
            max_segment_bytes: 64 * 1024 * 1024,
        }
    }
}

// Frame: [len: u32][body: len bytes][crc32c(body): u32], body = lsn + op.
const FRAME_OVERHEAD: u64 = 8;
const MIN_BODY: usize = 9; // lsn + op tag
const MAX_BODY: usize = 1 << 30;

fn segment_path(dir: &Path, start_lsn: u64) -> PathBuf {
    dir.join(format!("{start_lsn:020}.log"))
}

fn list_segments(dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let mut segments = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if let Some(stem) = name.strip_suffix(".log") {
            if let Ok(start) = stem.parse::<u64>() {
                segments.push((start, path));
            }
        }
    }
    segments.sort_unstable_by_key(|(s, _)| *s);
    Ok(segments)
}

fn sync_dir(dir: &Path) -> Result<()> {
    File::open(dir)?.sync_all()?;
    Ok(())
}

pub struct Wal {
    dir: PathBuf,
    opts: WalOptions,
    file: File,
    seg_start: u64,
    seg_bytes: u64,
    next_lsn: u64,
    last_sync: Instant,
    unsynced: bool,
}

impl Wal {
    /// Open (or create) the log under `dir`, returning the appender plus
    /// every valid record. A bad crc, a broken lsn chain, or a torn frame
    /// ends the valid prefix: the offending bytes are truncated away and any
    /// later segments deleted.
    pub fn open(dir: &Path, opts: WalOptions) -> Result<(Wal, Vec<(u64, WalOp)>)> {
        fs::create_dir_all(dir)?;
        let segments = list_segments(dir)?;
        let mut records = Vec::new();
        let mut expected = segments.first().map_or(1, |(s, _)| *s);
        let mut keep: Option<(u64, PathBuf, u64)> = None; // start, path, valid bytes
        let mut cut = false;

        for (idx, (start, path)) in segments.iter().enumerate() {
            if cut || *start != expected {
                // Chain broken before this segment: everything from here on
                // is beyond the valid prefix.
                fs::remove_file(path)?;
                cut = true;
                continue;
            }
            let bytes = fs::read(path)?;
            let valid = scan_segment(&bytes, &mut expected, &mut records);
            keep = Some((*start, path.clone(), valid));
            if (valid as usize) < bytes.len() {
                cut = true;
            } else if idx + 1 < segments.len() && segments[idx + 1].0 != expected {
                cut = true;
            }
        }

        let (seg_start, file, seg_bytes) = match keep {
            Some((start, path, valid)) => {
                let file = OpenOptions::new().read(true).write(true).open(&path)?;
                file.set_len(valid)?;
                (start, file, valid)
            }
            None => {
                let path = segment_path(dir, 1);
                let file = OpenOptions::new()
                    .read(true)
                    .write(true)
                    .create(true)
                    .truncate(true)
                    .open(&path)?;
                sync_dir(dir)?;
                (1, file, 0)
            }
        };
        let mut file = file;
        file.seek(SeekFrom::End(0))?;

        let wal = Wal {
            dir: dir.to_path_buf(),
            opts,
            file,
            seg_start,
            seg_bytes,
            next_lsn: expected,
            last_sync: Instant::now(),
            unsynced: false,
        };
        Ok((wal, records))
    }

    pub fn next_lsn(&self) -> u64 {
        self.next_lsn
    }

    pub fn last_lsn(&self) -> u64 {
        self.next_lsn - 1
    }

    /// Append one record and return its lsn.
    pub fn append(&mut self, op: &WalOp) -> Result<u64> {
        let lsn = self.next_lsn;
        let mut body = Enc::with_capacity(64);
        body.u64(lsn);
        op.encode(&mut body);
        let body = body.into_bytes();
        let total = body.len() as u64 + FRAME_OVERHEAD;

        if self.seg_bytes > 0 && self.seg_bytes + total > self.opts.max_segment_bytes {
            self.roll(lsn)?;
        }

        let mut frame = Vec::with_capacity(body.len() + 8);
        frame.extend_from_slice(&(body.len() as u32).to_le_bytes());
        frame.extend_from_slice(&body);
        frame.extend_from_slice(&crc32c(&body).to_le_bytes());
        self.file.write_all(&frame)?;
        self.seg_bytes += total;
        self.next_lsn += 1;

        match self.opts.durability {
            Durability::Always => {
                self.file.sync_data()?;
                self.last_sync = Instant::now();
            }
            Durability::Batched(window) => {
                self.unsynced = true;
                if self.last_sync.elapsed() >= window {
                    self.sync()?;
                }
            }
        }
        Ok(lsn)
    }

    /// Force everything written so far to disk.
    pub fn sync(&mut self) -> Result<()> {
        self.file.sync_data()?;
        self.unsynced = false;
        self.last_sync = Instant::now();
        Ok(())
    }

    fn roll(&mut self, next_start: u64) -> Result<()> {
        self.file.sync_data()?;
        let path = segment_path(&self.dir, next_start);
        self.file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(true)
            .open(&path)?;
        sync_dir(&self.dir)?;
        self.seg_start = next_start;
        self.seg_bytes = 0;
        Ok(())
    }

    pub fn segment_count(&self) -> Result<usize> {
        Ok(list_segments(&self.dir)?.len())
    }

    /// Discard every existing segment and start a fresh one whose first
    /// record will carry `lsn`. Recovery uses this when the log ends before
    /// the checkpoint it accompanies: those records are already durable in
    /// the checkpoint, and appending past a gap would break the lsn chain.
    pub fn reset_to(&mut self, lsn: u64) -> Result<()> {
        for (_, path) in list_segments(&self.dir)? {
            fs::remove_file(path)?;
        }
        let path = segment_path(&self.dir, lsn);
        self.file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(true)
            .open(&path)?;
        sync_dir(&self.dir)?;
        self.seg_start = lsn;
        self.seg_bytes = 0;
        self.next_lsn = lsn;
        self.unsynced = false;
        Ok(())
    }

    /// Delete segments whose records all have lsn ≤ `upto`. The engine
    /// guarantees `upto` is covered by a checkpoint before calling this.
    pub fn prune(&mut self, upto: u64) -> Result<usize> {
        let segments = list_segments(&self.dir)?;
        let mut deleted = 0;
        for window in segments.windows(2) {
            let (_, path) = &window[0];
            let (next_start, _) = window[1];
            if next_start <= upto + 1 {
                fs::remove_file(path)?;
                deleted += 1;
            }
        }
        if deleted > 0 {
            sync_dir(&self.dir)?;
        }
        Ok(deleted)
    }
}

impl Drop for Wal {
    fn drop(&mut self) {
        if self.unsynced {
            let _ = self.file.sync_data();
        }
    }
}

/// Decode records from one segment's bytes, pushing valid ones and bumping
/// `expected`. Returns the byte length of the valid prefix.
fn scan_segment(bytes: &[u8], expected: &mut u64, out: &mut Vec<(u64, WalOp)>) -> u64 {
    let mut pos = 0usize;
    loop {
        if bytes.len() - pos < 4 {
            return pos as u64;
        }
        let len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        if !(MIN_BODY..=MAX_BODY).contains(&len) || bytes.len() - pos < 4 + len + 4 {
            return pos as u64;
        }
        let body = &bytes[pos + 4..pos + 4 + len];
        let stored = u32::from_le_bytes(bytes[pos + 4 + len..pos + 8 + len].try_into().unwrap());
        if crc32c(body) != stored {
            return pos as u64;
        }
        let mut dec = Dec::new(body);
        let lsn = match dec.u64() {
            Ok(l) => l,
            Err(_) => return pos as u64,
        };
        if lsn != *expected {
            return pos as u64;
        }
        let op = match WalOp::decode(&mut dec) {
            Ok(op) if dec.is_empty() => op,
            _ => return pos as u64,
        };
        out.push((lsn, op));
        *expected += 1;
        pos += 8 + len;
    }
}

/// Read every valid record without opening an appender (no truncation).
pub fn read_all(dir: &Path) -> Result<Vec<(u64, WalOp)>> {
    let mut records = Vec::new();
    if !dir.exists() {
        return Ok(records);
    }
    let segments = list_segments(dir)?;
    let mut expected = segments.first().map_or(1, |(s, _)| *s);
    for (start, path) in &segments {
        if *start != expected {
            break;
        }
        let bytes = fs::read(path)?;
        let valid = scan_segment(&bytes, &mut expected, &mut records);
        if (valid as usize) < bytes.len() {
            break;
        }
    }
    Ok(records)
}

/// First lsn still present in the log directory, if any segments exist.
pub fn first_lsn(dir: &Path) -> Result<Option<u64>> {
    if !dir.exists() {
        return Ok(None);
    }
    Ok(list_segments(dir)?.first().map(|(s, _)| *s))
}
