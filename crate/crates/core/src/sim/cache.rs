//! Set-associative cache model with LRU, FIFO and random replacement.

use crate::geometry::CacheGeometry;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Replacement {
    Lru,
    Fifo,
    Random,
}

impl std::str::FromStr for Replacement {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lru" => Ok(Replacement::Lru),
            "fifo" => Ok(Replacement::Fifo),
            "random" => Ok(Replacement::Random),
            other => Err(format!("unknown replacement policy `{other}`")),
        }
    }
}

/// Who placed a line in the cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Demand,
    Prefetch,
    Precondition,
}

#[derive(Debug, Clone)]
pub struct LineEntry {
    pub line: u64,
    pub origin: Origin,
    pub last_use: u64,
    pub inserted: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Hit,
    Miss,
}

pub struct Cache {
    sets: Vec<Vec<LineEntry>>,
    assoc: usize,
    policy: Replacement,
    clock: u64,
}

impl Cache {
    pub fn new(geom: &CacheGeometry, policy: Replacement) -> Self {
        Cache {
            sets: vec![Vec::new(); geom.num_sets() as usize],
            assoc: geom.associativity(),
            policy,
            clock: 0,
        }
    }

    pub fn clear(&mut self) {
        for s in &mut self.sets {
            s.clear();
        }
        self.clock = 0;
    }

    pub fn contains(&self, geom: &CacheGeometry, line: u64) -> bool {
        let set = geom.set_of_line(line) as usize;
        self.sets[set].iter().any(|e| e.line == line)
    }

    /// Look up a line and update recency on hit; does not insert.
    pub fn lookup(&mut self, geom: &CacheGeometry, line: u64) -> Access {
        self.clock += 1;
        let set = geom.set_of_line(line) as usize;
        if let Some(e) = self.sets[set].iter_mut().find(|e| e.line == line) {
            if self.policy == Replacement::Lru {
                e.last_use = self.clock;
            }
            Access::Hit
        } else {
            Access::Miss
        }
    }

    /// Insert a line, evicting per policy when the set is full.
    /// Returns the evicted line, if any.
    pub fn insert(
        &mut self,
        geom: &CacheGeometry,
        line: u64,
        origin: Origin,
        rng: &mut ChaCha8Rng,
    ) -> Option<u64> {
        self.clock += 1;
        let set = geom.set_of_line(line) as usize;
        debug_assert!(!self.sets[set].iter().any(|e| e.line == line));
        let mut evicted = None;
        if self.sets[set].len() >= self.assoc {
            let victim = match self.policy {
                Replacement::Lru => self.sets[set]
                    .iter()
                    .enumerate()
                    .min_by_key(|(_, e)| e.last_use)
                    .map(|(i, _)| i)
                    .unwrap(),
                Replacement::Fifo => self.sets[set]
                    .iter()
                    .enumerate()
                    .min_by_key(|(_, e)| e.inserted)
                    .map(|(i, _)| i)
                    .unwrap(),
                Replacement::Random => rng.random_range(0..self.sets[set].len()),
            };
            evicted = Some(self.sets[set].remove(victim).line);
        }
        self.sets[set].push(LineEntry {
            line,
            origin,
            last_use: self.clock,
            inserted: self.clock,
        });
        evicted
    }

    /// Remove a specific line if present.
    pub fn evict_line(&mut self, geom: &CacheGeometry, line: u64) -> bool {
        let set = geom.set_of_line(line) as usize;
        if let Some(i) = self.sets[set].iter().position(|e| e.line == line) {
            self.sets[set].remove(i);
            true
        } else {
            false
        }
    }

    pub fn set_entries(&self, set: usize) -> &[LineEntry] {
        &self.sets[set]
    }

    pub fn num_sets(&self) -> usize {
        self.sets.len()
    }

    /// Entries of a set ordered most-recently-used first.
    pub fn set_by_recency(&self, set: usize) -> Vec<&LineEntry> {
        let mut v: Vec<&LineEntry> = self.sets[set].iter().collect();
        v.sort_by_key(|e| std::cmp::Reverse(e.last_use));
        v
    }

    /// Least-recently-used entry among those matching a predicate.
    pub fn least_recent_matching<F: Fn(&LineEntry) -> bool>(
        &self,
        set: usize,
        pred: F,
    ) -> Option<u64> {
        self.sets[set]
            .iter()
            .filter(|e| pred(e))
            .min_by_key(|e| e.last_use)
            .map(|e| e.line)
    }

    pub fn occupancy_ok(&self) -> bool {
        self.sets.iter().all(|s| s.len() <= self.assoc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn setup(policy: Replacement) -> (CacheGeometry, Cache, ChaCha8Rng) {
        let geom = CacheGeometry::default();
        let cache = Cache::new(&geom, policy);
        (geom, cache, ChaCha8Rng::seed_from_u64(0))
    }

    fn line(geom: &CacheGeometry, tag: u64, set: u64) -> u64 {
        tag * geom.num_sets() + set
    }

    #[test]
    fn cold_miss_then_hit() {
        let (geom, mut c, mut rng) = setup(Replacement::Lru);
        let l = line(&geom, 3, 0);
        assert_eq!(c.lookup(&geom, l), Access::Miss);
        c.insert(&geom, l, Origin::Demand, &mut rng);
        assert_eq!(c.lookup(&geom, l), Access::Hit);
    }

    #[test]
    fn lru_evicts_first_of_five() {
        let (geom, mut c, mut rng) = setup(Replacement::Lru);
        for t in 0..5 {
            let l = line(&geom, t, 0);
            assert_eq!(c.lookup(&geom, l), Access::Miss);
            c.insert(&geom, l, Origin::Demand, &mut rng);
        }
        assert!(!c.contains(&geom, line(&geom, 0, 0)));
        for t in 1..5 {
            assert!(c.contains(&geom, line(&geom, t, 0)));
        }
    }

    #[test]
    fn fifo_ignores_reuse() {
        let (geom, mut c, mut rng) = setup(Replacement::Fifo);
        for t in 0..4 {
            c.insert(&geom, line(&geom, t, 0), Origin::Demand, &mut rng);
        }
        // touch the oldest line; FIFO still evicts it
        assert_eq!(c.lookup(&geom, line(&geom, 0, 0)), Access::Hit);
        c.insert(&geom, line(&geom, 4, 0), Origin::Demand, &mut rng);
        assert!(!c.contains(&geom, line(&geom, 0, 0)));
    }

    #[test]
    fn occupancy_bounded() {
        let (geom, mut c, mut rng) = setup(Replacement::Random);
        for t in 0..64 {
            let l = line(&geom, t, 5);
            if c.lookup(&geom, l) == Access::Miss {
                c.insert(&geom, l, Origin::Demand, &mut rng);
            }
            assert!(c.occupancy_ok());
        }
        assert_eq!(c.set_entries(5).len(), 4);
    }
}
