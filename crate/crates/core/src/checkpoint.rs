//! On-disk snapshots of engine state.
//!
//! Layout under `<data>/checkpoint/`:
//!
//! ```text
//! CURRENT                    newest complete checkpoint's lsn, decimal text
//! <lsn, 20 digits>/
//!     meta                   magic + lsn
//!     catalog
//!     topology
//!     attributes
//!     vectors.meta           per-collection metadata and segment ids
//!     vectors/<name>/<segment id, 20 digits>.seg
//! ```
//!
//! Every file carries a trailing crc. A checkpoint is built in a `tmp-`
//! directory, fsynced, then renamed into place before CURRENT is swapped,
//! so a crash leaves either the old checkpoint or the new one, never a
//! half-written mix. Loading prefers CURRENT and walks older directories
//! when it is damaged.

use std::fs::{self, File};
use std::io::Write as _;
use std::path::Path;

use crate::codec::{check_trailing_crc, Dec, Enc};
use crate::engine::State;
use crate::error::{EngineError, Result};
use crate::vector::segment::Segment;
use crate::vector::Collection;

const META_MAGIC: &[u8; 4] = b"ACK1";

fn dir_name(lsn: u64) -> String {
    format!("{lsn:020}")
}

fn seg_file_name(id: u64) -> String {
    format!("{id:020}.seg")
}

fn write_file(path: &Path, body: Vec<u8>) -> Result<()> {
    let mut f = File::create(path)?;
    f.write_all(&body)?;
    f.sync_all()?;
    Ok(())
}

fn sync_dir(path: &Path) -> Result<()> {
    File::open(path)?.sync_all()?;
    Ok(())
}

/// Write a checkpoint of `state` under `root`, making it CURRENT.
pub fn write(root: &Path, state: &State) -> Result<()> {
    fs::create_dir_all(root)?;
    let lsn = state.applied_lsn;
    let final_dir = root.join(dir_name(lsn));
    let tmp_dir = root.join(format!("tmp-{}", dir_name(lsn)));
    if tmp_dir.exists() {
        fs::remove_dir_all(&tmp_dir)?;
    }

    if !final_dir.exists() {
        fs::create_dir(&tmp_dir)?;

        let mut enc = Enc::new();
        enc.raw(META_MAGIC);
        enc.u64(lsn);
        write_file(&tmp_dir.join("meta"), enc.finish_with_crc())?;

        let mut enc = Enc::new();
        state.catalog.encode(&mut enc);
        write_file(&tmp_dir.join("catalog"), enc.finish_with_crc())?;

        let mut enc = Enc::new();
        state.topo.encode_image(&mut enc);
        write_file(&tmp_dir.join("topology"), enc.finish_with_crc())?;

        let mut enc = Enc::new();
        state.attrs.encode(&mut enc);
        write_file(&tmp_dir.join("attributes"), enc.finish_with_crc())?;

        let mut enc = Enc::new();
        enc.u32(state.vectors.len() as u32);
        for (_, col) in state.vectors.iter() {
            col.encode_meta(&mut enc);
        }
        write_file(&tmp_dir.join("vectors.meta"), enc.finish_with_crc())?;

        for (name, col) in state.vectors.iter() {
            let col_dir = tmp_dir.join("vectors").join(name);
            fs::create_dir_all(&col_dir)?;
            for seg in col.segments() {
                write_file(&col_dir.join(seg_file_name(seg.id)), seg.encode_bytes())?;
            }
            sync_dir(&col_dir)?;
        }
        if tmp_dir.join("vectors").exists() {
            sync_dir(&tmp_dir.join("vectors"))?;
        }
        sync_dir(&tmp_dir)?;
        fs::rename(&tmp_dir, &final_dir)?;
        sync_dir(root)?;
    }

    // Swap CURRENT last; readers that race see the previous checkpoint.
    let cur_tmp = root.join("CURRENT.tmp");
    write_file(&cur_tmp, lsn.to_string().into_bytes())?;
    fs::rename(&cur_tmp, root.join("CURRENT"))?;
    sync_dir(root)?;
    Ok(())
}

fn read_checked(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    let body = check_trailing_crc(&raw, &path.display().to_string())?;
    Ok(body.to_vec())
}

fn expect_done(dec: &Dec, what: &str) -> Result<()> {
    if dec.remaining() != 0 {
        return Err(EngineError::CorruptCheckpoint(format!(
            "{what}: {} trailing bytes",
            dec.remaining()
        )));
    }
    Ok(())
}

fn load_dir(dir: &Path, threshold: usize) -> Result<(State, u64)> {
    let body = read_checked(&dir.join("meta"))?;
    let mut dec = Dec::new(&body);
    let mut magic = [0u8; 4];
    for b in &mut magic {
        *b = dec.u8()?;
    }
    if &magic != META_MAGIC {
        return Err(EngineError::CorruptCheckpoint(
            "bad checkpoint magic".into(),
        ));
    }
    let lsn = dec.u64()?;
    expect_done(&dec, "meta")?;

    let body = read_checked(&dir.join("catalog"))?;
    let mut dec = Dec::new(&body);
    let catalog = crate::catalog::Catalog::decode(&mut dec)?;
    expect_done(&dec, "catalog")?;

    let body = read_checked(&dir.join("topology"))?;
    let mut dec = Dec::new(&body);
    let topo = crate::graph::GraphTopology::decode_image(&mut dec, threshold)?;
    expect_done(&dec, "topology")?;

    let body = read_checked(&dir.join("attributes"))?;
    let mut dec = Dec::new(&body);
    let attrs = crate::attrs::AttributeStore::decode(&mut dec)?;
    expect_done(&dec, "attributes")?;

    let body = read_checked(&dir.join("vectors.meta"))?;
    let mut dec = Dec::new(&body);
    let count = dec.u32()?;
    let mut vectors = crate::vector::VectorStore::new();
    for _ in 0..count {
        let (mut col, seg_ids) = Collection::decode_meta(&mut dec)?;
        let col_dir = dir.join("vectors").join(col.name());
        let mut segs = Vec::with_capacity(seg_ids.len());
        for &id in &seg_ids {
            let raw = fs::read(col_dir.join(seg_file_name(id)))?;
            segs.push(Segment::decode_bytes(&raw)?);
        }
        col.attach_segments(segs, &seg_ids)?;
        vectors.attach(col)?;
    }
    expect_done(&dec, "vectors.meta")?;

    Ok((
        State {
            catalog,
            topo,
            attrs,
            vectors,
            applied_lsn: lsn,
        },
        lsn,
    ))
}

fn list_checkpoint_lsns(root: &Path) -> Result<Vec<u64>> {
    let mut lsns = Vec::new();
    for entry in fs::read_dir(root)? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if name.starts_with("tmp-") {
            // Leftover from an interrupted write.
            let _ = fs::remove_dir_all(entry.path());
            continue;
        }
        if let Ok(lsn) = name.parse::<u64>() {
            lsns.push(lsn);
        }
    }
    lsns.sort_unstable();
    Ok(lsns)
}

/// Load the newest usable checkpoint under `root`. Damaged candidates are
/// skipped in favor of older ones; no usable checkpoint is `None`, not an
/// error, because a full log replay may still recover the state.
pub fn load_best(root: &Path, threshold: usize) -> Result<Option<(State, u64)>> {
    if !root.exists() {
        return Ok(None);
    }
    let mut candidates = list_checkpoint_lsns(root)?;

    // CURRENT names the preferred candidate; order the rest newest first.
    let current: Option<u64> = fs::read_to_string(root.join("CURRENT"))
        .ok()
        .and_then(|s| s.trim().parse().ok());
    candidates.reverse();
    if let Some(cur) = current {
        if let Some(pos) = candidates.iter().position(|&l| l == cur) {
            let c = candidates.remove(pos);
            candidates.insert(0, c);
        }
    }

    for lsn in candidates {
        match load_dir(&root.join(dir_name(lsn)), threshold) {
            Ok((state, lsn)) => return Ok(Some((state, lsn))),
            Err(_) => continue,
        }
    }
    Ok(None)
}
