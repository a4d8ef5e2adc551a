//! Layered navigable proximity graph. Nodes are dense ordinals assigned by
//! insertion; the caller supplies distance closures (smaller is closer), so
//! the graph never sees raw vectors. Level assignment is a pure function of
//! (seed, ordinal), making rebuilds with the same insertion order reproduce
//! the same graph bit for bit.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::codec::{Dec, Enc};
use crate::error::{EngineError, Result};

pub const NO_NODE: u32 = u32::MAX;
const MAX_LEVEL: usize = 31;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// A (distance, node) pair ordered by distance then id, so heap behavior is
/// a total order and search results are deterministic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub d: f32,
    pub id: u32,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d.total_cmp(&other.d).then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
pub struct HnswGraph {
    m: usize,
    m0: usize,
    ef_construction: usize,
    seed: u64,
    ml: f64,
    entry: u32,
    max_level: usize,
    /// links[node][level] = neighbor ids.
    links: Vec<Vec<Vec<u32>>>,
}

impl HnswGraph {
    pub fn new(m: usize, ef_construction: usize, seed: u64) -> Self {
        let m = m.max(2);
        HnswGraph {
            m,
            m0: m * 2,
            ef_construction: ef_construction.max(m),
            seed,
            ml: 1.0 / (m as f64).ln(),
            entry: NO_NODE,
            max_level: 0,
            links: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn entry_point(&self) -> Option<u32> {
        (self.entry != NO_NODE).then_some(self.entry)
    }

    fn assign_level(&self, ordinal: u32) -> usize {
        let r = splitmix64(self.seed ^ ordinal as u64);
        // 53 uniform mantissa bits mapped into (0, 1].
        let u = ((r >> 11) as f64 + 1.0) / (1u64 << 53) as f64;
        ((-u.ln() * self.ml) as usize).min(MAX_LEVEL)
    }

    fn neighbors(&self, node: u32, level: usize) -> &[u32] {
        self.links[node as usize]
            .get(level)
            .map_or(&[], |v| v.as_slice())
    }

    /// Strictly-improving greedy descent within one level.
    fn greedy_step(&self, dist: &impl Fn(u32) -> f32, mut ep: u32, level: usize) -> u32 {
        let mut best = dist(ep);
        loop {
            let mut improved = false;
            for &nb in self.neighbors(ep, level) {
                let d = dist(nb);
                if d < best {
                    best = d;
                    ep = nb;
                    improved = true;
                }
            }
            if !improved {
                return ep;
            }
        }
    }

    /// Beam search within one level. Returns accepted entries sorted by
    /// (distance, id) ascending, plus whether the candidate frontier drained
    /// completely (meaning every node reachable from `eps` was visited).
    fn search_layer(
        &self,
        dist: &impl Fn(u32) -> f32,
        eps: &[u32],
        ef: usize,
        level: usize,
        accept: Option<&dyn Fn(u32) -> bool>,
    ) -> (Vec<Entry>, bool) {
        let mut visited = vec![false; self.links.len()];
        let mut cand: BinaryHeap<std::cmp::Reverse<Entry>> = BinaryHeap::new();
        let mut result: BinaryHeap<Entry> = BinaryHeap::new();
        let admit = |e: Entry, result: &BinaryHeap<Entry>| {
            result.len() < ef || e < *result.peek().unwrap()
        };
        for &ep in eps {
            if visited[ep as usize] {
                continue;
            }
            visited[ep as usize] = true;
            let e = Entry { d: dist(ep), id: ep };
            cand.push(std::cmp::Reverse(e));
            if accept.map_or(true, |f| f(ep)) {
                result.push(e);
                if result.len() > ef {
                    result.pop();
                }
            }
        }
        let mut drained = true;
        while let Some(std::cmp::Reverse(c)) = cand.pop() {
            if result.len() >= ef && c > *result.peek().unwrap() {
                drained = false;
                break;
            }
            for &nb in self.neighbors(c.id, level) {
                if visited[nb as usize] {
                    continue;
                }
                visited[nb as usize] = true;
                let e = Entry { d: dist(nb), id: nb };
                if admit(e, &result) {
                    cand.push(std::cmp::Reverse(e));
                    if accept.map_or(true, |f| f(nb)) {
                        result.push(e);
                        if result.len() > ef {
                            result.pop();
                        }
                    }
                }
            }
        }
        let mut out = result.into_vec();
        out.sort_unstable();
        (out, drained)
    }

    /// Diversity-pruning neighbor selection: a candidate is kept only if it
    /// is closer to the query than to every already-kept neighbor; pruned
    /// candidates backfill remaining slots in distance order.
    fn select_neighbors(
        &self,
        cands: &[Entry],
        max: usize,
        dist2: &impl Fn(u32, u32) -> f32,
    ) -> Vec<u32> {
        let mut selected: Vec<Entry> = Vec::with_capacity(max);
        let mut pruned: Vec<Entry> = Vec::new();
        for &c in cands {
            if selected.len() >= max {
                break;
            }
            if selected.iter().all(|s| c.d < dist2(c.id, s.id)) {
                selected.push(c);
            } else {
                pruned.push(c);
            }
        }
        let mut out: Vec<u32> = selected.iter().map(|e| e.id).collect();
        for p in pruned {
            if out.len() >= max {
                break;
            }
            out.push(p.id);
        }
        out
    }

    fn max_links(&self, level: usize) -> usize {
        if level == 0 {
            self.m0
        } else {
            self.m
        }
    }

    /// Insert the next node (ordinal = current len). `dist2(a, b)` must
    /// return the distance between stored nodes a and b, where the new
    /// node's vector is already addressable at its ordinal.
    pub fn insert(&mut self, dist2: &impl Fn(u32, u32) -> f32) -> u32 {
        let ordinal = self.links.len() as u32;
        let level = self.assign_level(ordinal);
        self.links.push(vec![Vec::new(); level + 1]);
        if self.entry == NO_NODE {
            self.entry = ordinal;
            self.max_level = level;
            return ordinal;
        }

        let dq = |n: u32| dist2(n, ordinal);
        let mut ep = self.entry;
        for l in (level + 1..=self.max_level).rev() {
            ep = self.greedy_step(&dq, ep, l);
        }
        let mut eps = vec![ep];
        for l in (0..=level.min(self.max_level)).rev() {
            let (cands, _) = self.search_layer(&dq, &eps, self.ef_construction, l, None);
            let selected = self.select_neighbors(&cands, self.max_links(l), dist2);
            for &nb in &selected {
                self.links[ordinal as usize][l].push(nb);
                self.links[nb as usize][l].push(ordinal);
                if self.links[nb as usize][l].len() > self.max_links(l) {
                    self.prune_links(nb, l, dist2);
                }
            }
            eps = cands.iter().map(|e| e.id).collect();
            if eps.is_empty() {
                eps = vec![ep];
            }
        }
        if level > self.max_level {
            self.max_level = level;
            self.entry = ordinal;
        }
        ordinal
    }

    fn prune_links(&mut self, node: u32, level: usize, dist2: &impl Fn(u32, u32) -> f32) {
        let mut entries: Vec<Entry> = self.links[node as usize][level]
            .iter()
            .map(|&nb| Entry { d: dist2(nb, node), id: nb })
            .collect();
        entries.sort_unstable();
        entries.dedup_by_key(|e| e.id);
        let kept = self.select_neighbors(&entries, self.max_links(level), dist2);
        self.links[node as usize][level] = kept;
    }

    /// k-nearest search. With an acceptance filter the beam only banks
    /// accepted nodes, so an underfull result means the whole reachable
    /// graph was already visited; the beam width is max(ef, k) and widens
    /// implicitly to exhaustion, never stopping early with fewer than
    /// min(k, accepted-reachable) hits.
    pub fn search(
        &self,
        dist: &impl Fn(u32) -> f32,
        k: usize,
        ef: usize,
        accept: Option<&dyn Fn(u32) -> bool>,
    ) -> (Vec<Entry>, bool) {
        if self.is_empty() || k == 0 {
            return (Vec::new(), true);
        }
        let mut ep = self.entry;
        for l in (1..=self.max_level).rev() {
            ep = self.greedy_step(dist, ep, l);
        }
        let ef = ef.max(k);
        let (mut out, drained) = self.search_layer(dist, &[ep], ef, 0, accept);
        out.truncate(k);
        (out, drained)
    }

    pub fn encode(&self, enc: &mut Enc) {
        enc.u32(self.m as u32);
        enc.u32(self.ef_construction as u32);
        enc.u64(self.seed);
        enc.u32(self.entry);
        enc.u8(self.max_level as u8);
        enc.u32(self.links.len() as u32);
        for node in &self.links {
            enc.u8((node.len() - 1) as u8);
            for level in node {
                enc.u32(level.len() as u32);
                for &nb in level {
                    enc.u32(nb);
                }
            }
        }
    }

    pub fn decode(dec: &mut Dec) -> Result<HnswGraph> {
        let m = dec.u32()? as usize;
        let ef_construction = dec.u32()? as usize;
        let seed = dec.u64()?;
        let entry = dec.u32()?;
        let max_level = dec.u8()? as usize;
        let n = dec.u32()? as usize;
        let mut links = Vec::with_capacity(n);
        for _ in 0..n {
            let top = dec.u8()? as usize;
            let mut node = Vec::with_capacity(top + 1);
            for _ in 0..=top {
                let cnt = dec.u32()? as usize;
                let mut level = Vec::with_capacity(cnt);
                for _ in 0..cnt {
                    let nb = dec.u32()?;
                    if nb as usize >= n {
                        return Err(EngineError::CorruptCheckpoint(
                            "link to out-of-range node".into(),
                        ));
                    }
                    level.push(nb);
                }
                node.push(level);
            }
            links.push(node);
        }
        if n > 0 && entry as usize >= n {
            return Err(EngineError::CorruptCheckpoint("entry out of range".into()));
        }
        if m < 2 {
            return Err(EngineError::CorruptCheckpoint("bad m".into()));
        }
        Ok(HnswGraph {
            m,
            m0: m * 2,
            ef_construction,
            seed,
            ml: 1.0 / (m as f64).ln(),
            entry,
            max_level,
            links,
        })
    }
}
