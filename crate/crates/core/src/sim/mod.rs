//! Deterministic behavioral model of the memory subsystem and branch
//! predictor. Executes testcases strictly in order, one instruction at a
//! time, and reports the observable state difference.

mod branch;
mod cache;
mod prefetch;
mod previct;

pub use branch::{BranchPredictor, BranchResolution, DEFAULT_BHR_BITS, DEFAULT_ENTRIES};
pub use cache::{Access, Cache, Origin, Replacement};
pub use prefetch::{base_count, Prefetcher, DELTA_MAX, TESTED_GAP_MAX};
pub use previct::{PrevictionFire, PrevictionWindow};

use crate::geometry::{CacheGeometry, PhysAddr};
use crate::instantiate::{Instr, Testcase};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Instruction addresses start here and step by 4 bytes.
pub const INSTR_BASE: u64 = 0x1000;
pub const INSTR_SIZE: u64 = 4;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub geometry: CacheGeometry,
    pub policy: Replacement,
    pub seed: u64,
    pub previction_enabled: bool,
    pub prefetcher_enabled: bool,
    pub stream_cap: usize,
    pub pht_entries: usize,
    pub bhr_bits: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            geometry: CacheGeometry::default(),
            policy: Replacement::Lru,
            seed: 0,
            previction_enabled: true,
            prefetcher_enabled: true,
            stream_cap: 2,
            pht_entries: DEFAULT_ENTRIES,
            bhr_bits: DEFAULT_BHR_BITS,
        }
    }
}

/// Hardware counters exposed by the model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub instructions: u64,
    pub previctions: u64,
    pub prefetch_issues: u64,
    pub branches: u64,
    pub mispredictions: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadEvent {
    pub instr_idx: usize,
    pub addr: PhysAddr,
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrevictionEvent {
    pub line: u64,
    pub instr_idx: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchEvent {
    pub instr_idx: usize,
    pub taken: bool,
    pub mispredicted: bool,
}

/// Behavioral outcome of executing one testcase: the difference between the
/// initial (empty) and final state of the monitored structures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    /// set index -> lines with origin, most recently used first.
    pub final_cache: Vec<(u64, Vec<(u64, Origin)>)>,
    pub loads: Vec<LoadEvent>,
    pub previctions: Vec<PrevictionEvent>,
    /// Prefetched lines in issue order.
    pub prefetched: Vec<u64>,
    pub branches: Vec<BranchEvent>,
    pub counters: Counters,
    /// (address, cached) per scheduled probe.
    pub probe_results: Vec<(PhysAddr, bool)>,
}

impl Observation {
    pub fn branch_stats(&self) -> (u64, u64) {
        (self.counters.branches, self.counters.mispredictions)
    }
}

pub struct SimState {
    cfg: SimConfig,
    cache: Cache,
    prefetcher: Prefetcher,
    window: PrevictionWindow,
    predictor: BranchPredictor,
    vars: HashMap<u32, bool>,
    rng: ChaCha8Rng,
    counters: Counters,
    /// Instructions the prefetcher observes (cache-hit loads excluded).
    visible: u64,
}

impl SimState {
    pub fn new(cfg: SimConfig) -> Self {
        let cache = Cache::new(&cfg.geometry, cfg.policy);
        let prefetcher = Prefetcher::new(cfg.stream_cap);
        let predictor = BranchPredictor::new(cfg.pht_entries, cfg.bhr_bits);
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        SimState {
            cache,
            prefetcher,
            window: PrevictionWindow::new(),
            predictor,
            vars: HashMap::new(),
            rng,
            counters: Counters::default(),
            visible: 0,
            cfg,
        }
    }

    pub fn geometry(&self) -> &CacheGeometry {
        &self.cfg.geometry
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    /// Refresh the microarchitectural state: empty cache, cleared streams
    /// and history registers, counters at their initial values.
    pub fn reset(&mut self) {
        self.cache.clear();
        self.prefetcher.clear();
        self.window.clear();
        self.predictor.clear();
        self.vars.clear();
        self.rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        self.counters = Counters::default();
        self.visible = 0;
    }

    /// Report presence of the address's line without mutating state.
    pub fn probe(&self, a: PhysAddr) -> bool {
        let line = self.cfg.geometry.line_of(a);
        self.cache.contains(&self.cfg.geometry, line)
    }

    /// Run one precondition load: fills the cache but stays invisible to
    /// the prefetcher and the previction window.
    pub fn precondition_load(&mut self, a: PhysAddr) {
        let geom = self.cfg.geometry.clone();
        let line = geom.line_of(a);
        if self.cache.lookup(&geom, line) == Access::Miss {
            self.cache
                .insert(&geom, line, Origin::Precondition, &mut self.rng);
        }
    }

    /// Run one demand load, feeding the previction window and (on misses)
    /// the prefetcher. Returns the access outcome plus event records.
    pub fn demand_load(
        &mut self,
        a: PhysAddr,
        instr_idx: usize,
        previctions: &mut Vec<PrevictionEvent>,
        prefetched: &mut Vec<u64>,
    ) -> Access {
        let geom = self.cfg.geometry.clone();
        let line = geom.line_of(a);
        let access = self.cache.lookup(&geom, line);
        let hit = access == Access::Hit;

        if !hit {
            self.visible += 1;
        }

        if self.cfg.previction_enabled {
            self.window.push(&geom, a, instr_idx);
            if let Some(fire) = self.window.check(&geom) {
                self.counters.previctions += 1;
                previctions.push(PrevictionEvent {
                    line: fire.victim_line,
                    instr_idx,
                });
                self.cache.evict_line(&geom, fire.victim_line);
                // a half-primed set additionally loses its older primed line
                let set = fire.set as usize;
                let primed: Vec<u64> = self
                    .cache
                    .set_entries(set)
                    .iter()
                    .filter(|e| e.origin == Origin::Precondition)
                    .map(|e| e.line)
                    .collect();
                if primed.len() == 2 {
                    if let Some(victim) = self
                        .cache
                        .least_recent_matching(set, |e| e.origin == Origin::Precondition)
                    {
                        self.cache.evict_line(&geom, victim);
                    }
                }
            }
        }

        if !hit {
            self.cache.insert(&geom, line, Origin::Demand, &mut self.rng);
        }

        if self.cfg.prefetcher_enabled {
            let issues = self
                .prefetcher
                .on_demand_access(&geom, line, hit, self.visible);
            for l in issues {
                if !self.cache.contains(&geom, l) {
                    self.counters.prefetch_issues += 1;
                    prefetched.push(l);
                    self.cache.insert(&geom, l, Origin::Prefetch, &mut self.rng);
                }
            }
        }

        access
    }

    pub fn streams_allocated(&self) -> usize {
        self.prefetcher.streams_allocated()
    }

    /// Execute a testcase. Does not reset beforehand; callers decide
    /// whether to start from a refreshed state or a primed one.
    pub fn execute(&mut self, tc: &Testcase) -> Observation {
        let mut previctions = Vec::new();
        let mut prefetched = Vec::new();
        let mut loads = Vec::new();
        let mut branches = Vec::new();

        for a in &tc.pre_loads {
            self.precondition_load(*a);
        }

        let mut pc = 0usize;
        while pc < tc.instructions.len() {
            self.counters.instructions += 1;
            let mut next = pc + 1;
            match &tc.instructions[pc] {
                Instr::Load(a) => {
                    let access = self.demand_load(*a, pc, &mut previctions, &mut prefetched);
                    loads.push(LoadEvent {
                        instr_idx: pc,
                        addr: *a,
                        hit: access == Access::Hit,
                    });
                }
                Instr::Arith | Instr::Nop => {
                    self.visible += 1;
                }
                Instr::SetVar { var, value } => {
                    self.visible += 1;
                    self.vars.insert(*var, *value);
                }
                Instr::Branch { var, value, steps } => {
                    self.visible += 1;
                    let outcome = self.vars.get(var).copied().unwrap_or(false) == *value;
                    let addr = INSTR_BASE + pc as u64 * INSTR_SIZE;
                    let r = self.predictor.execute(addr, outcome);
                    self.counters.branches += 1;
                    if r.mispredicted {
                        self.counters.mispredictions += 1;
                    }
                    branches.push(BranchEvent {
                        instr_idx: pc,
                        taken: outcome,
                        mispredicted: r.mispredicted,
                    });
                    if outcome {
                        next = pc + *steps as usize;
                    }
                }
            }
            pc = next;
        }

        let mut final_cache = Vec::new();
        for set in 0..self.cache.num_sets() {
            let entries = self.cache.set_by_recency(set);
            if !entries.is_empty() {
                final_cache.push((
                    set as u64,
                    entries.iter().map(|e| (e.line, e.origin)).collect(),
                ));
            }
        }

        let probe_results = tc.probes.iter().map(|a| (*a, self.probe(*a))).collect();

        Observation {
            final_cache,
            loads,
            previctions,
            prefetched,
            branches,
            counters: self.counters,
            probe_results,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instantiate::Instr;

    fn cfg() -> SimConfig {
        SimConfig::default()
    }

    fn load(geom: &CacheGeometry, tag: u64, set: u64, word: u64) -> Instr {
        Instr::Load(geom.compose_addr(tag, set, word << 2).unwrap())
    }

    fn tc(instrs: Vec<Instr>) -> Testcase {
        Testcase {
            id: 0,
            pre_loads: vec![],
            instructions: instrs,
            run_count: 1,
            mutation_coords: vec![],
            probes: vec![],
        }
    }

    #[test]
    fn reset_clears_everything() {
        let mut sim = SimState::new(cfg());
        let geom = sim.geometry().clone();
        let t = tc((0..4).map(|i| load(&geom, i, 0, 0)).collect());
        sim.execute(&t);
        assert!(!sim.execute(&tc(vec![])).final_cache.is_empty());
        sim.reset();
        let obs = sim.execute(&tc(vec![]));
        assert!(obs.final_cache.is_empty());
        // reset is idempotent
        sim.reset();
        sim.reset();
        assert!(sim.execute(&tc(vec![])).final_cache.is_empty());
    }

    #[test]
    fn three_load_stream_prefetches_three() {
        let mut sim = SimState::new(cfg());
        let geom = sim.geometry().clone();
        // mid-page placement: tag 2 at 128 sets = line 256, page offset 0
        // use set base 8 to stay clear of the page edge
        let t = tc(vec![
            load(&geom, 2, 8, 0),
            load(&geom, 2, 9, 0),
            load(&geom, 2, 10, 0),
        ]);
        let obs = sim.execute(&t);
        assert_eq!(obs.prefetched.len(), 3);
        let l3 = geom.line_of(geom.compose_addr(2, 10, 0).unwrap());
        assert_eq!(obs.prefetched, vec![l3 + 1, l3 + 2, l3 + 3]);
    }

    #[test]
    fn five_load_stream_prefetches_four() {
        let mut sim = SimState::new(cfg());
        let geom = sim.geometry().clone();
        let t = tc((0..5).map(|i| load(&geom, 2, 8 + i, 0)).collect());
        let obs = sim.execute(&t);
        assert_eq!(obs.prefetched.len(), 4);
    }

    #[test]
    fn unequal_strides_do_not_prefetch() {
        let mut sim = SimState::new(cfg());
        let geom = sim.geometry().clone();
        let t = tc(vec![
            load(&geom, 2, 10, 0),
            load(&geom, 2, 12, 0),
            load(&geom, 2, 15, 0),
        ]);
        let obs = sim.execute(&t);
        assert!(obs.prefetched.is_empty());
    }

    #[test]
    fn stride_two_prefetches_ahead() {
        let mut sim = SimState::new(cfg());
        let geom = sim.geometry().clone();
        let t = tc(vec![
            load(&geom, 2, 10, 0),
            load(&geom, 2, 12, 0),
            load(&geom, 2, 14, 0),
        ]);
        let obs = sim.execute(&t);
        let l3 = geom.line_of(geom.compose_addr(2, 14, 0).unwrap());
        assert_eq!(obs.prefetched, vec![l3 + 2, l3 + 4, l3 + 6]);
    }

    #[test]
    fn page_boundary_clips_prefetches() {
        let mut sim = SimState::new(cfg());
        let geom = sim.geometry().clone();
        // lines 59,60,61 of page 0; targets 62,63 stay, 64 crosses
        let t = tc(vec![
            load(&geom, 0, 59, 0),
            load(&geom, 0, 60, 0),
            load(&geom, 0, 61, 0),
        ]);
        let obs = sim.execute(&t);
        assert_eq!(obs.prefetched, vec![62, 63]);
    }

    #[test]
    fn preloaded_first_address_suppresses_prefetch() {
        let mut sim = SimState::new(cfg());
        let geom = sim.geometry().clone();
        let first = geom.compose_addr(2, 8, 0).unwrap();
        let t = Testcase {
            pre_loads: vec![first],
            ..tc(vec![
                load(&geom, 2, 8, 0),
                load(&geom, 2, 9, 0),
                load(&geom, 2, 10, 0),
            ])
        };
        let obs = sim.execute(&t);
        assert!(obs.prefetched.is_empty());
        assert!(obs.loads[0].hit);
    }

    #[test]
    fn interleaved_hit_load_is_invisible() {
        let mut sim = SimState::new(cfg());
        let geom = sim.geometry().clone();
        // preloaded off-page line interleaves as a hit: same behavior as
        // the pure three-load stream
        let other = geom.compose_addr(7, 40, 0).unwrap();
        let t = Testcase {
            pre_loads: vec![other],
            ..tc(vec![
                load(&geom, 2, 8, 0),
                Instr::Load(other),
                load(&geom, 2, 9, 0),
                load(&geom, 2, 10, 0),
            ])
        };
        let obs = sim.execute(&t);
        assert_eq!(obs.prefetched.len(), 3);
    }

    #[test]
    fn arith_gap_changes_prefetch_count() {
        let geom = CacheGeometry::default();
        for (gap, expect) in [(0u64, 3usize), (3, 4), (4, 7), (5, 3), (8, 3)] {
            let mut sim = SimState::new(cfg());
            let mut instrs = vec![load(&geom, 2, 8, 0), load(&geom, 2, 9, 0)];
            for _ in 0..gap {
                instrs.push(Instr::Arith);
            }
            instrs.push(load(&geom, 2, 10, 0));
            let obs = sim.execute(&tc(instrs));
            assert_eq!(obs.prefetched.len(), expect, "gap {gap}");
        }
    }

    #[test]
    fn only_two_streams_ever_issue() {
        let mut sim = SimState::new(cfg());
        let geom = sim.geometry().clone();
        // three interleaved streams from three distinct pages
        let mut instrs = Vec::new();
        for k in 0..3 {
            for (t, s0) in [(2u64, 8u64), (4, 16), (6, 24)] {
                instrs.push(load(&geom, t, s0 + k, 0));
            }
        }
        let obs = sim.execute(&tc(instrs));
        assert_eq!(sim.streams_allocated(), 2);
        // first two streams issued 3 lines each
        assert_eq!(obs.prefetched.len(), 6);
    }

    #[test]
    fn previction_evicts_the_triple_line() {
        let mut sim = SimState::new(cfg());
        let geom = sim.geometry().clone();
        let t = tc(vec![
            load(&geom, 10, 0, 8), // bus 2
            load(&geom, 10, 0, 0), // bus 0
            load(&geom, 10, 0, 1),
            load(&geom, 11, 0, 0),
            load(&geom, 12, 0, 0),
        ]);
        let obs = sim.execute(&t);
        assert_eq!(obs.previctions.len(), 1);
        let triple_line = geom.line_of(geom.compose_addr(10, 0, 0).unwrap());
        assert!(!sim.probe(geom.compose_addr(10, 0, 0).unwrap()));
        assert_eq!(obs.previctions[0].line, triple_line);
    }

    #[test]
    fn counterexample_pair_differs_only_in_first_offset() {
        // five loads to set 0; the first load's address flips between
        // 0x80100000 (bus 0) and 0x80100020 (bus 2) while the second sits
        // at bus 3, so only the second input previcts
        let geom = CacheGeometry::default();
        let tag = 0x40080;
        let build = |first_word: u64| {
            tc(vec![
                load(&geom, tag, 0, first_word),
                load(&geom, tag, 0, 12), // bus 3
                load(&geom, tag, 0, 13), // bus 3
                load(&geom, 11, 0, 0),
                load(&geom, 12, 0, 0),
            ])
        };
        let mut sim = SimState::new(cfg());
        let quiet = sim.execute(&build(0)); // 0x80100000, bus 0 == 3+1 mod 4
        assert!(quiet.previctions.is_empty());
        assert!(sim.probe(PhysAddr(0x8010_0000)));

        sim.reset();
        let fired = sim.execute(&build(8)); // 0x80100020, bus 2 != 0
        assert_eq!(fired.previctions.len(), 1);
        assert!(!sim.probe(PhysAddr(0x8010_0020)));
    }

    #[test]
    fn primed_pair_loses_older_line_on_previction() {
        let mut sim = SimState::new(cfg());
        let geom = sim.geometry().clone();
        let p1 = geom.compose_addr(20, 0, 0).unwrap();
        let p2 = geom.compose_addr(21, 0, 0).unwrap();
        let t = Testcase {
            pre_loads: vec![p1, p2],
            ..tc(vec![
                load(&geom, 10, 0, 8),
                load(&geom, 10, 0, 0),
                load(&geom, 10, 0, 1),
                load(&geom, 11, 0, 0),
                load(&geom, 11, 0, 4),
            ])
        };
        let obs = sim.execute(&t);
        assert_eq!(obs.previctions.len(), 1);
        assert!(!sim.probe(p1), "older primed line previcted");
        assert!(sim.probe(p2), "younger primed line survives");
    }

    #[test]
    fn branch_default_variable_is_false() {
        let mut sim = SimState::new(cfg());
        let t = tc(vec![Instr::Branch {
            var: 0,
            value: false,
            steps: 2,
        }]);
        let obs = sim.execute(&t);
        assert!(obs.branches[0].taken);
    }

    #[test]
    fn branch_jumps_forward() {
        let mut sim = SimState::new(cfg());
        let geom = sim.geometry().clone();
        let t = tc(vec![
            Instr::SetVar { var: 0, value: true },
            Instr::Branch {
                var: 0,
                value: true,
                steps: 2,
            },
            load(&geom, 5, 0, 0), // skipped
            load(&geom, 6, 0, 0),
        ]);
        let obs = sim.execute(&t);
        assert_eq!(obs.loads.len(), 1);
        assert_eq!(obs.loads[0].instr_idx, 3);
    }

    #[test]
    fn deterministic_observations() {
        let geom = CacheGeometry::default();
        let t = tc((0..6).map(|i| load(&geom, i, i % 3, 0)).collect());
        let mut a = SimState::new(cfg());
        let mut b = SimState::new(cfg());
        assert_eq!(a.execute(&t), b.execute(&t));
    }

    #[test]
    fn probe_results_reported() {
        let mut sim = SimState::new(cfg());
        let geom = sim.geometry().clone();
        let a = geom.compose_addr(3, 0, 0).unwrap();
        let b = geom.compose_addr(4, 0, 0).unwrap();
        let t = Testcase {
            probes: vec![a, b],
            ..tc(vec![Instr::Load(a)])
        };
        let obs = sim.execute(&t);
        assert_eq!(obs.probe_results, vec![(a, true), (b, false)]);
    }
}
