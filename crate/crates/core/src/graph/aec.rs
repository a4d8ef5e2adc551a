//! Adaptive edge collection: a per-(vertex, direction, label) container that
//! stores few edges as a sorted contiguous array and switches to an ordered
//! set once the count crosses a threshold. Iteration order is ascending
//! `EdgeKey` order in both representations, so the switch is invisible to
//! readers.

use std::collections::BTreeSet;

use crate::value::EdgeKey;

/// Which representation an [`AdaptiveEdgeCollection`] currently uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Repr {
    Small,
    Large,
}

#[derive(Debug, Clone)]
enum Store {
    Small(Vec<EdgeKey>),
    Large(Box<BTreeSet<EdgeKey>>),
}

#[derive(Debug, Clone)]
pub struct AdaptiveEdgeCollection {
    store: Store,
}

impl Default for AdaptiveEdgeCollection {
    fn default() -> Self {
        Self::new()
    }
}

impl AdaptiveEdgeCollection {
    pub fn new() -> Self {
        AdaptiveEdgeCollection {
            store: Store::Small(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        match &self.store {
            Store::Small(v) => v.len(),
            Store::Large(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn repr(&self) -> Repr {
        match &self.store {
            Store::Small(_) => Repr::Small,
            Store::Large(_) => Repr::Large,
        }
    }

    /// Insert a key, upgrading Small → Large when the count would exceed
    /// `threshold`. Returns false (and changes nothing) on duplicates.
    pub fn insert(&mut self, key: EdgeKey, threshold: usize) -> bool {
        match &mut self.store {
            Store::Small(v) => match v.binary_search(&key) {
                Ok(_) => false,
                Err(pos) => {
                    if v.len() < threshold {
                        // Grow in ~25% steps instead of doubling: keeps the
                        // array's capacity within 1.25n + 4 keys so the Small
                        // footprint stays below the ordered-set model at
                        // every size, which the representation comparison
                        // relies on.
                        if v.len() == v.capacity() {
                            v.reserve_exact((v.len() / 4).max(4));
                        }
                        v.insert(pos, key);
                    } else {
                        let mut set: BTreeSet<EdgeKey> = v.drain(..).collect();
                        set.insert(key);
                        self.store = Store::Large(Box::new(set));
                    }
                    true
                }
            },
            Store::Large(s) => s.insert(key),
        }
    }

    /// Remove a key. The representation never downgrades Large → Small.
    pub fn remove(&mut self, key: &EdgeKey) -> bool {
        match &mut self.store {
            Store::Small(v) => match v.binary_search(key) {
                Ok(pos) => {
                    v.remove(pos);
                    true
                }
                Err(_) => false,
            },
            Store::Large(s) => s.remove(key),
        }
    }

    pub fn contains(&self, key: &EdgeKey) -> bool {
        match &self.store {
            Store::Small(v) => v.binary_search(key).is_ok(),
            Store::Large(s) => s.contains(key),
        }
    }

    /// Ascending iteration over all stored keys.
    pub fn iter(&self) -> AecIter<'_> {
        match &self.store {
            Store::Small(v) => AecIter::Small(v.iter()),
            Store::Large(s) => AecIter::Large(s.iter()),
        }
    }

    /// Heap bytes attributable to this collection's edge storage.
    ///
    /// The Small side reports the real Vec allocation. The Large side cannot
    /// be introspected, so it uses a structural model of std's B-tree nodes
    /// (capacity 11, ~8 keys per node under random insertion, internal nodes
    /// carrying 12 child pointers) plus the boxed set struct itself.
    pub fn heap_bytes(&self) -> usize {
        const KEY: usize = std::mem::size_of::<EdgeKey>();
        const LEAF: usize = 16 + 11 * KEY;
        const INTERNAL: usize = LEAF + 12 * 8;
        match &self.store {
            Store::Small(v) => v.capacity() * KEY,
            Store::Large(s) => {
                let n = s.len();
                let set_struct = 16;
                if n == 0 {
                    return set_struct;
                }
                let mut level = n.div_ceil(8);
                let mut bytes = level * LEAF + set_struct;
                while level > 1 {
                    level = level.div_ceil(9);
                    bytes += level * INTERNAL;
                }
                bytes
            }
        }
    }
}

pub enum AecIter<'a> {
    Small(std::slice::Iter<'a, EdgeKey>),
    Large(std::collections::btree_set::Iter<'a, EdgeKey>),
}

impl<'a> Iterator for AecIter<'a> {
    type Item = &'a EdgeKey;

    fn next(&mut self) -> Option<&'a EdgeKey> {
        match self {
            AecIter::Small(it) => it.next(),
            AecIter::Large(it) => it.next(),
        }
    }
}
