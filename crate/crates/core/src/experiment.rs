//! The run pipeline: parse, expand, instantiate, execute in parallel, and
//! emit archive records ordered by testcase id.

use crate::archive::{ArchiveMeta, MutCoord, Record, TrialSummary, SCHEMA_VERSION};
use crate::config::{ExperimentConfig, PinKind};
use crate::expand::{expand, ExpandError, MutationMode};
use crate::gts::{parse_gts, GtsAst, ParseError};
use crate::instantiate::{instantiate, AddressStore, InstantiateError, Testcase};
use crate::sim::{SimConfig, SimState};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("gts parse error: {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Expand(#[from] ExpandError),
    #[error(transparent)]
    Instantiate(#[from] InstantiateError),
    #[error("config: {0}")]
    Config(String),
    #[error("total testcase count {total} exceeds the cap {cap}; shard the run")]
    TooManyTestcases { total: u64, cap: u64 },
}

/// Derive the per-trial simulator seed from the root seed. Stable across
/// shardings and worker counts.
pub fn trial_seed(root: u64, testcase_id: u64, trial: u64) -> u64 {
    root.wrapping_add(testcase_id.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(trial.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub struct RunOutput {
    pub meta: ArchiveMeta,
    pub records: Vec<Record>,
    pub variants: usize,
    pub total_testcases: u64,
}

/// Run one experiment family, optionally restricted to a shard
/// (`id % shard_count == shard_index`).
pub fn run_experiment(
    cfg: &ExperimentConfig,
    gts_text: &str,
    shard: Option<(u64, u64)>,
) -> Result<RunOutput, ExperimentError> {
    let ast = parse_gts(gts_text)?;
    let variants = expand(&ast, cfg.seed, cfg.expansion_cap)?;

    let mut store = AddressStore::new(cfg.seed);
    apply_pins(&mut store, &ast, cfg)?;

    // resolve every variant up front so ids are globally sequential
    let mut streams = Vec::with_capacity(variants.len());
    let mut next_id = 0u64;
    let mut mutation_mode = MutationMode::None;
    let mut targets: Vec<usize> = Vec::new();
    for (seq, plan) in &variants {
        let stream = instantiate(seq, plan, &mut store, &cfg.geometry, next_id)?;
        next_id = next_id.saturating_add(stream.len());
        if plan.mode != MutationMode::None {
            mutation_mode = plan.mode;
            targets = plan.targets.clone();
        }
        streams.push((stream, seq.run_count));
    }
    if next_id > cfg.expansion_cap {
        return Err(ExperimentError::TooManyTestcases {
            total: next_id,
            cap: cfg.expansion_cap,
        });
    }

    let mut work: Vec<(Testcase, u64, &str)> = Vec::new();
    for ((stream, run_count), (seq, _)) in streams.into_iter().zip(&variants) {
        for tc in stream {
            if let Some((index, count)) = shard {
                if tc.id % count != index {
                    continue;
                }
            }
            work.push((tc, run_count, seq.provenance.as_str()));
        }
    }

    let sim_base = SimConfig {
        geometry: cfg.geometry.clone(),
        policy: cfg.policy,
        seed: 0,
        previction_enabled: cfg.previction,
        prefetcher_enabled: cfg.prefetcher,
        ..SimConfig::default()
    };

    let run_one = |(tc, run_count, provenance): &(Testcase, u64, &str)| -> Record {
        let mut trials = Vec::with_capacity(*run_count as usize);
        let mut first_obs = None;
        for trial in 0..*run_count {
            let mut sim = SimState::new(SimConfig {
                seed: trial_seed(cfg.seed, tc.id, trial),
                ..sim_base.clone()
            });
            sim.reset();
            let obs = sim.execute(tc);
            trials.push(TrialSummary::from_observation(&obs, &tc.pre_loads, &cfg.geometry));
            if first_obs.is_none() {
                first_obs = Some(obs);
            }
        }
        Record {
            id: tc.id,
            provenance: provenance.to_string(),
            coords: tc
                .mutation_coords
                .iter()
                .map(|&(instr_idx, value)| MutCoord {
                    instr_idx,
                    value,
                    addr: match &tc.instructions[instr_idx] {
                        crate::instantiate::Instr::Load(a) => *a,
                        _ => unreachable!("mutation targets are loads"),
                    },
                })
                .collect(),
            run_count: *run_count,
            observation: first_obs.expect("run_count >= 1"),
            trials,
        }
    };

    let mut records: Vec<Record> = if cfg.jobs == Some(1) {
        work.iter().map(run_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs.unwrap_or(0))
            .build()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        pool.install(|| work.par_iter().map(run_one).collect())
    };
    records.sort_by_key(|r| r.id);

    Ok(RunOutput {
        meta: ArchiveMeta {
            schema: SCHEMA_VERSION,
            geometry: cfg.geometry.clone(),
            policy: cfg.policy,
            seed: cfg.seed,
            mutation_mode,
            targets,
            gts: gts_text.to_string(),
        },
        variants: variants.len(),
        total_testcases: next_id,
        records,
    })
}

fn apply_pins(
    store: &mut AddressStore,
    ast: &GtsAst,
    cfg: &ExperimentConfig,
) -> Result<(), ExperimentError> {
    for (sym_name, kind, value) in &cfg.pins {
        let sym = ast
            .symbols
            .lookup(sym_name)
            .ok_or_else(|| ExperimentError::Config(format!("pinned symbol `{sym_name}` not in gts")))?;
        match kind {
            PinKind::Tag => {
                if *value >= cfg.geometry.tag_count() {
                    return Err(ExperimentError::Config(format!(
                        "pinned tag {value} out of range"
                    )));
                }
                store.pin_tag(sym, *value);
            }
            PinKind::Set => {
                if *value >= cfg.geometry.num_sets() {
                    return Err(ExperimentError::Config(format!(
                        "pinned set {value} out of range"
                    )));
                }
                store.pin_set(sym, *value);
            }
        }
    }
    Ok(())
}
