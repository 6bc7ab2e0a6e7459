//! Parameterized eviction strategy: a preloaded victim line followed by a
//! three-level loop of same-set loads, classified by whether the victim
//! survives. Runs with the prefetcher and the previction rule disabled,
//! modeling a core that has neither.

use crate::archive::{MutCoord, Record, TrialSummary};
use crate::expand::{expand, DEFAULT_EXPANSION_CAP};
use crate::geometry::{CacheGeometry, PhysAddr};
use crate::gts::parse_gts;
use crate::instantiate::{instantiate, AddressStore};
use crate::sim::{SimConfig, SimState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvictionParams {
    pub s: u64,
    pub c: u64,
    pub d: u64,
    pub l: u64,
}

/// The specification text equivalent to the three-level access loop:
/// for (s = 0; s <= S - D; s += L) for (c = 0; c <= C; c++)
/// for (d = 0; d <= D; d++) access a[s + d].
pub fn eviction_gts(p: EvictionParams) -> String {
    assert!(p.l >= 1 && p.s >= p.d);
    let outer = (p.s - p.d) / p.l + 1;
    format!(
        "pre{{ M[t=tv,s=s1] }} (((M[t=t0,s=s1])^{{{inner},t+=1}})^{{{mid}}})^{{{outer},t+={step}}}",
        inner = p.d + 1,
        mid = p.c + 1,
        outer = outer,
        step = p.l,
    )
}

/// Tag indices the loop touches, in access order (relative to the loop's
/// base tag).
pub fn eviction_tag_sequence(p: EvictionParams) -> Vec<u64> {
    let mut out = Vec::new();
    let mut s = 0;
    while s <= p.s - p.d {
        for _ in 0..=p.c {
            for d in 0..=p.d {
                out.push(s + d);
            }
        }
        s += p.l;
    }
    out
}

/// Brute-force reference: true-LRU trace over one set, returning whether
/// the victim line is evicted.
pub fn lru_eviction_oracle(associativity: usize, loop_tags: &[u64]) -> bool {
    // victim uses a sentinel tag distinct from every loop tag
    let victim = u64::MAX;
    let mut recency: Vec<u64> = vec![victim];
    for &t in loop_tags {
        if let Some(pos) = recency.iter().position(|&x| x == t) {
            recency.remove(pos);
            recency.push(t);
        } else {
            if recency.len() == associativity {
                recency.remove(0);
            }
            recency.push(t);
        }
    }
    !recency.contains(&victim)
}

/// Execute the grid point `reps` times through the full pipeline and
/// return its archive record. Each trial runs on a freshly seeded state so
/// random replacement draws fresh victims.
pub fn run_eviction_point(
    p: EvictionParams,
    geom: &CacheGeometry,
    cfg: &SimConfig,
    reps: u64,
    seed: u64,
    id: u64,
) -> Record {
    let ast = parse_gts(&eviction_gts(p)).expect("eviction gts parses");
    let variants = expand(&ast, seed, DEFAULT_EXPANSION_CAP).expect("eviction gts expands");
    let mut store = AddressStore::new(seed);
    let (seq, plan) = &variants[0];
    let tc = instantiate(seq, plan, &mut store, geom, id)
        .expect("eviction gts instantiates")
        .next()
        .expect("one testcase");

    let mut trials = Vec::with_capacity(reps as usize);
    let mut first_obs = None;
    for trial in 0..reps {
        let mut sim = SimState::new(SimConfig {
            geometry: geom.clone(),
            previction_enabled: false,
            prefetcher_enabled: false,
            seed: seed ^ (id << 20) ^ trial,
            ..cfg.clone()
        });
        sim.reset();
        let obs = sim.execute(&tc);
        trials.push(TrialSummary::from_observation(&obs, &tc.pre_loads, geom));
        if first_obs.is_none() {
            first_obs = Some(obs);
        }
    }
    Record {
        id,
        provenance: format!("grid[S={},C={},D={},L={}]", p.s, p.c, p.d, p.l),
        coords: [p.s, p.c, p.d, p.l]
            .iter()
            .enumerate()
            .map(|(i, v)| MutCoord {
                instr_idx: i,
                value: *v,
                addr: PhysAddr(*v),
            })
            .collect(),
        run_count: reps,
        observation: first_obs.expect("at least one trial"),
        trials,
    }
}

/// Run a full (S, C, D, L) grid; L starts at 1, the others at 0, D never
/// exceeds S.
#[allow(clippy::too_many_arguments)]
pub fn run_eviction_grid(
    s_max: u64,
    c_max: u64,
    d_max: u64,
    l_max: u64,
    geom: &CacheGeometry,
    cfg: &SimConfig,
    reps: u64,
    seed: u64,
) -> Vec<(EvictionParams, Record)> {
    let mut out = Vec::new();
    let mut id = 0u64;
    for s in 0..=s_max {
        for c in 0..=c_max {
            for d in 0..=d_max.min(s) {
                for l in 1..=l_max {
                    let p = EvictionParams { s, c, d, l };
                    let r = run_eviction_point(p, geom, cfg, reps, seed, id);
                    out.push((p, r));
                    id += 1;
                }
            }
        }
    }
    out
}
