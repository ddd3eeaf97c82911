//! The IOMMU's dedicated TLB: an exact-LRU translation cache with the two
//! performance counters the hardware exposes (accesses and misses).

use std::collections::{BTreeMap, HashMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    Hit,
    Miss,
}

#[derive(Debug, Clone)]
pub struct TlbState {
    capacity: usize,
    /// page -> recency stamp
    entries: HashMap<u64, u64>,
    /// recency stamp -> page; the smallest stamp is the LRU victim.
    order: BTreeMap<u64, u64>,
    next_stamp: u64,
    accesses: u64,
    misses: u64,
}

impl TlbState {
    pub fn new(capacity_entries: usize) -> Self {
        TlbState {
            capacity: capacity_entries.max(1),
            entries: HashMap::new(),
            order: BTreeMap::new(),
            next_stamp: 0,
            accesses: 0,
            misses: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn accesses(&self) -> u64 {
        self.accesses
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn reset_counters(&mut self) {
        self.accesses = 0;
        self.misses = 0;
    }

    /// Translate one page: refresh recency on a hit; install the entry
    /// (evicting the LRU victim when full) on a miss.
    pub fn access(&mut self, page: u64) -> Lookup {
        self.accesses += 1;
        let stamp = self.next_stamp;
        self.next_stamp += 1;
        if let Some(old) = self.entries.insert(page, stamp) {
            self.order.remove(&old);
            self.order.insert(stamp, page);
            return Lookup::Hit;
        }
        self.misses += 1;
        self.order.insert(stamp, page);
        if self.entries.len() > self.capacity {
            let (&victim_stamp, &victim_page) = self.order.iter().next().expect("non-empty");
            self.order.remove(&victim_stamp);
            self.entries.remove(&victim_page);
        }
        Lookup::Miss
    }
}
