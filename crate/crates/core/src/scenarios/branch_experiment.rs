//! Branch-predictor structure experiment: an initial block of conditional
//! branches, a setup branch steering into one of two history-filling paths,
//! distance padding, and a spy branch whose outcome follows the path. The
//! program is laid out in 3-instruction units so every branch address is
//! congruent modulo 3 and maps to one predictor table.

use crate::instantiate::{Instr, Testcase};
use crate::sim::{SimConfig, SimState};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BpError {
    #[error("trials must be positive")]
    NoTrials,
}

const V1: u32 = 0;
const V2: u32 = 1;
const VALWAYS: u32 = 2;

/// Built experiment: the two per-phase program variants plus the spy
/// branch's instruction index.
pub struct BpExperiment {
    program_true: Testcase,
    program_false: Testcase,
    pub spy_idx: usize,
    pub x: u64,
    pub y: u64,
}

fn branch(var: u32, value: bool, steps: u64) -> Instr {
    Instr::Branch { var, value, steps }
}

fn setvar(var: u32, value: bool) -> Instr {
    Instr::SetVar { var, value }
}

/// One 3-instruction unit keeps branch addresses congruent mod 3.
fn unit(first: Instr, second: Instr) -> [Instr; 3] {
    [first, second, Instr::Nop]
}

impl BpExperiment {
    /// `x` initial conditional branches, `y` padding nops before the spy.
    /// Each steering path holds `bhr_bits` branch outcomes including the
    /// setup branch, so the history register is filled exactly.
    pub fn build(x: u64, y: u64, bhr_bits: u32) -> Self {
        assert!(bhr_bits >= 2);
        let path1_units = bhr_bits as u64 - 2;
        let path2_units = bhr_bits as u64 - 1;
        let skip = 3 * bhr_bits as u64;
        let build_variant = |v: bool| {
            let mut p: Vec<Instr> = Vec::new();
            p.extend(unit(setvar(VALWAYS, true), Instr::Nop));
            for _ in 0..x {
                p.extend(unit(branch(V1, true, 3), setvar(V2, true)));
            }
            p.extend(unit(setvar(V1, v), Instr::Nop));
            // taken: land on the second history path
            p.extend(unit(branch(V1, false, skip), Instr::Nop));
            for _ in 0..path1_units {
                p.extend(unit(branch(V2, true, 3), setvar(V2, true)));
            }
            // path one ends by jumping over path two
            p.extend(unit(branch(VALWAYS, true, skip), Instr::Nop));
            for _ in 0..path2_units {
                p.extend(unit(branch(V2, false, 3), setvar(V2, true)));
            }
            let padded = y.div_ceil(3) * 3;
            for _ in 0..padded {
                p.push(Instr::Nop);
            }
            let spy_idx = p.len();
            p.extend(unit(branch(V1, true, 3), setvar(V2, true)));
            (p, spy_idx)
        };
        let (pt, spy_idx) = build_variant(true);
        let (pf, _) = build_variant(false);
        let mk = |instructions: Vec<Instr>| Testcase {
            id: 0,
            pre_loads: vec![],
            instructions,
            run_count: 1,
            mutation_coords: vec![],
            probes: vec![],
        };
        BpExperiment {
            program_true: mk(pt),
            program_false: mk(pf),
            spy_idx,
            x,
            y,
        }
    }

    pub fn variant(&self, v: bool) -> &Testcase {
        if v {
            &self.program_true
        } else {
            &self.program_false
        }
    }
}

/// Run the experiment: `trials` consecutive executions on one predictor
/// state, alternating the steering value every 16 executions, returning
/// the spy branch's misprediction fraction.
pub fn run_bp_experiment(
    x: u64,
    y: u64,
    trials: u64,
    cfg: &SimConfig,
) -> Result<f64, BpError> {
    if trials == 0 {
        return Err(BpError::NoTrials);
    }
    let exp = BpExperiment::build(x, y, cfg.bhr_bits);
    let mut sim = SimState::new(cfg.clone());
    sim.reset();
    let mut spy_mispredictions = 0u64;
    for trial in 0..trials {
        let v = (trial / 16) % 2 == 0;
        let obs = sim.execute(exp.variant(v));
        let spy = obs
            .branches
            .iter()
            .find(|b| b.instr_idx == exp.spy_idx)
            .expect("spy branch executes once per trial");
        // the spy's outcome must follow the steering value
        debug_assert_eq!(spy.taken, v);
        if spy.mispredicted {
            spy_mispredictions += 1;
        }
    }
    Ok(spy_mispredictions as f64 / trials as f64)
}
