//! Equivalence checking of generated blocks against the Boolean oracle.
//!
//! Every case is a list of clock cycles. Data inputs change at the start of
//! a cycle, the clock (when the block has one) rises at mid-cycle, and the
//! outputs are sampled after the settle window, before the rising edge.
//! Cycles flagged as warmup drive the block into a known state and are not
//! compared.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::engine::{bits_to_pwl, run_transient, SimError, SimOptions, Waveform};
use crate::gates::{build_block, build_xax, BlockKind, Block, GenError, GenOptions, GateKind, XaxWiring};
use crate::golden::{eval_gate, step_dff, step_dlatch, step_xax_wired, ClockEdge, XaxState};
use crate::measure::{classify, Level};
use crate::netlist::{expand, Device, NetlistError, Source};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error("case {case}: {source}")]
    Sim { case: usize, source: SimError },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub vdd: f64,
    pub clock: f64,
    pub tstep: f64,
    /// Rise and fall time of every stimulus edge.
    pub edge: f64,
    /// Sample point as a fraction of the clock period after the cycle start.
    pub settle_fraction: f64,
    pub seed: u64,
    pub sequences: usize,
    pub cycles: usize,
    pub gen: GenOptions,
    pub wiring: XaxWiring,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            vdd: 1.0,
            clock: 1e-9,
            tstep: 1e-12,
            edge: 10e-12,
            settle_fraction: 0.4,
            seed: 0,
            sequences: 100,
            cycles: 8,
            gen: GenOptions::default(),
            wiring: XaxWiring::default(),
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<(), VerifyError> {
        let positive = [self.vdd, self.clock, self.tstep, self.edge];
        if positive.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(VerifyError::Config("vdd, clock, tstep and edge must be positive".into()));
        }
        if !(self.settle_fraction > 0.0 && self.settle_fraction < 0.5) {
            return Err(VerifyError::Config(
                "settle fraction must lie in (0, 0.5) so samples precede the clock edge".into(),
            ));
        }
        if self.edge >= self.settle_fraction * self.clock {
            return Err(VerifyError::Config("edge time must be shorter than the settle window".into()));
        }
        Ok(())
    }

    fn options(&self, cycles: usize) -> SimOptions {
        SimOptions::new(self.tstep, cycles as f64 * self.clock)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    Exhaustive,
    Random,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Exhaustive => "exhaustive",
            Mode::Random => "random",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cycle {
    /// Data inputs in the block's input order (clock excluded).
    pub inputs: Vec<bool>,
    /// Whether the clock rises in this cycle. Ignored for unclocked blocks.
    pub edge: bool,
}

impl Cycle {
    pub fn new(inputs: &[bool], edge: bool) -> Self {
        Self {
            inputs: inputs.to_vec(),
            edge,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Case {
    pub cycles: Vec<Cycle>,
    /// Leading cycles that are driven but not compared.
    pub warmup: usize,
}

/// Port roles of a block for testbench construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interface {
    pub inputs: Vec<&'static str>,
    pub clock: Option<&'static str>,
    pub outputs: Vec<&'static str>,
}

pub fn interface(kind: BlockKind) -> Interface {
    match kind {
        BlockKind::Gate(GateKind::Not) => Interface {
            inputs: vec!["a"],
            clock: None,
            outputs: vec!["y"],
        },
        BlockKind::Gate(_) => Interface {
            inputs: vec!["a", "b"],
            clock: None,
            outputs: vec!["y"],
        },
        BlockKind::DLatch => Interface {
            inputs: vec!["d", "en"],
            clock: None,
            outputs: vec!["q"],
        },
        BlockKind::Dff => Interface {
            inputs: vec!["d"],
            clock: Some("clk"),
            outputs: vec!["q"],
        },
        BlockKind::Xax => Interface {
            inputs: vec!["x_in", "a_in", "s_in"],
            clock: Some("clk"),
            outputs: vec!["x_out", "acc_out"],
        },
    }
}

/// Reference model state for one case.
#[derive(Debug, Clone, Copy)]
enum Oracle {
    Gate(GateKind),
    Latch(bool),
    Dff(bool),
    Xax(XaxState, XaxWiring),
}

impl Oracle {
    fn new(kind: BlockKind, wiring: XaxWiring) -> Self {
        match kind {
            BlockKind::Gate(g) => Oracle::Gate(g),
            BlockKind::DLatch => Oracle::Latch(false),
            BlockKind::Dff => Oracle::Dff(false),
            BlockKind::Xax => Oracle::Xax(XaxState::default(), wiring),
        }
    }

    /// Outputs seen at this cycle's sample instant, then the clock update.
    fn step(&mut self, c: &Cycle) -> Vec<bool> {
        let i = &c.inputs;
        match self {
            Oracle::Gate(g) => vec![eval_gate(*g, i).expect("arity fixed by interface")],
            Oracle::Latch(q) => {
                *q = step_dlatch(i[0], i[1], *q);
                vec![*q]
            }
            Oracle::Dff(q) => {
                let out = *q;
                let edge = if c.edge { ClockEdge::Rising } else { ClockEdge::None };
                *q = step_dff(i[0], edge, *q);
                vec![out]
            }
            Oracle::Xax(state, wiring) => {
                let (out, next) = step_xax_wired(i[0], i[1], i[2], *state, wiring);
                if c.edge {
                    *state = next;
                }
                vec![out.x_out, out.acc_out]
            }
        }
    }
}

fn bits(n: usize, width: usize) -> Vec<bool> {
    (0..width).rev().map(|k| n >> k & 1 == 1).collect()
}

/// Vector order visiting every ordered pair of distinct vectors once.
pub fn transition_complete_order(count: usize) -> Vec<usize> {
    if count <= 1 {
        return vec![0; count];
    }
    // Hierholzer on the complete digraph
    let mut next: Vec<Vec<usize>> = (0..count)
        .map(|i| (0..count).rev().filter(|&j| j != i).collect())
        .collect();
    let mut stack = vec![0];
    let mut path = Vec::new();
    while let Some(&v) = stack.last() {
        match next[v].pop() {
            Some(w) => stack.push(w),
            None => path.push(stack.pop().expect("non-empty")),
        }
    }
    path.reverse();
    path
}

fn xax_preset(target: XaxState, wiring: &XaxWiring) -> Vec<Cycle> {
    let first = Cycle::new(&[false, false, false], true);
    // after the first cycle xr and ar are zero; pick s so acc lands on target
    let known = XaxState::default();
    let (_, probe) = step_xax_wired(target.xr, target.ar, false, known, wiring);
    let s = probe.acc != target.acc;
    vec![first, Cycle::new(&[target.xr, target.ar, s], true)]
}

/// Canonical exhaustive stimulus for a block.
pub fn exhaustive_cases(kind: BlockKind, wiring: &XaxWiring) -> Vec<Case> {
    match kind {
        BlockKind::Gate(g) => {
            let n = g.input_count();
            let cycles = transition_complete_order(1 << n)
                .into_iter()
                .map(|v| Cycle::new(&bits(v, n), false))
                .collect();
            vec![Case { cycles, warmup: 0 }]
        }
        BlockKind::DLatch => (0..8)
            .map(|i| {
                let [q0, d, en] = [i & 4 != 0, i & 2 != 0, i & 1 != 0];
                Case {
                    cycles: vec![Cycle::new(&[q0, true], false), Cycle::new(&[q0, false], false), Cycle::new(&[d, en], false)],
                    warmup: 1,
                }
            })
            .collect(),
        BlockKind::Dff => (0..8)
            .map(|i| {
                let [q0, d, edge] = [i & 4 != 0, i & 2 != 0, i & 1 != 0];
                Case {
                    cycles: vec![Cycle::new(&[q0], true), Cycle::new(&[d], edge), Cycle::new(&[d], false)],
                    warmup: 1,
                }
            })
            .collect(),
        BlockKind::Xax => (0..64)
            .map(|i| {
                let state = XaxState::from_index(i >> 3);
                let mut cycles = xax_preset(state, wiring);
                cycles.push(Cycle::new(&bits(i & 7, 3), true));
                cycles.push(Cycle::new(&[false, false, false], true));
                Case { cycles, warmup: 2 }
            })
            .collect(),
    }
}

/// Seeded random sequences; warmup cycles precede the compared ones.
pub fn random_cases(kind: BlockKind, cfg: &VerifyConfig) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let width = interface(kind).inputs.len();
    let (warmup, clocked) = match kind {
        BlockKind::Gate(_) => (0, false),
        BlockKind::DLatch => (1, false),
        BlockKind::Dff => (1, true),
        BlockKind::Xax => (2, true),
    };
    (0..cfg.sequences)
        .map(|_| {
            let mut prev: Option<Vec<bool>> = None;
            let cycles = (0..warmup + cfg.cycles)
                .map(|k| {
                    let mut inputs: Vec<bool> = (0..width).map(|_| rng.random()).collect();
                    // closing the latch while d moves is a hold race, not a logic case
                    if let (BlockKind::DLatch, Some(p)) = (kind, &prev) {
                        if p[1] && !inputs[1] {
                            inputs[0] = p[0];
                        }
                    }
                    let mut edge = clocked && rng.random();
                    if k < warmup {
                        // warmup loads state: latch open, clock edges present
                        if kind == BlockKind::DLatch {
                            inputs[1] = true;
                        }
                        edge = clocked;
                    }
                    if kind == BlockKind::Xax {
                        edge = true;
                    }
                    prev = Some(inputs.clone());
                    Cycle { inputs, edge }
                })
                .collect();
            Case { cycles, warmup }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Pass,
    /// A settled 0/1 disagreed with the oracle.
    Mismatch,
    /// A sample fell between the logic thresholds.
    Unsettled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Divergence {
    pub case: usize,
    pub cycle: usize,
    pub time: f64,
    pub signal: String,
    pub expected: bool,
    pub observed: Level,
    pub voltage: f64,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "case {} cycle {} t = {:.4e} s: {} expected {} observed {} ({:.4} V)",
            self.case,
            self.cycle,
            self.time,
            self.signal,
            u8::from(self.expected),
            self.observed.symbol(),
            self.voltage
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseResult {
    pub samples: usize,
    pub divergences: Vec<Divergence>,
    pub warnings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub block: String,
    pub mode: Mode,
    pub cases: usize,
    /// Distinct input vectors per cycle covered by the stimulus.
    pub vectors: usize,
    pub samples: usize,
    pub seed: Option<u64>,
    pub outcome: Outcome,
    pub first_divergence: Option<Divergence>,
    pub mismatches: usize,
    pub unsettled: usize,
    pub solver_warnings: usize,
    pub stimulus: String,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "block: {}", self.block)?;
        writeln!(f, "mode: {}", self.mode)?;
        writeln!(f, "stimulus: {}", self.stimulus)?;
        if let Some(seed) = self.seed {
            writeln!(f, "seed: {seed}")?;
        }
        writeln!(f, "cases: {}", self.cases)?;
        writeln!(f, "vectors: {}", self.vectors)?;
        writeln!(f, "samples: {}", self.samples)?;
        if self.solver_warnings > 0 {
            writeln!(f, "solver warnings: {}", self.solver_warnings)?;
        }
        match (&self.outcome, &self.first_divergence) {
            (Outcome::Pass, _) => write!(f, "PASS"),
            (outcome, Some(d)) => {
                let label = if *outcome == Outcome::Mismatch { "FAIL (mismatch)" } else { "FAIL (unsettled)" };
                writeln!(f, "mismatches: {}, unsettled samples: {}", self.mismatches, self.unsettled)?;
                write!(f, "{label}: first divergence at {d}")
            }
            (_, None) => write!(f, "FAIL"),
        }
    }
}

/// Testbench around a block: PWL sources on every input, a clock, the
/// supply and one instance whose nets carry the port names.
pub fn testbench(block: &Block, case: &Case, cfg: &VerifyConfig) -> crate::netlist::Circuit {
    let iface = interface(block.kind);
    let mut c = block.library.clone();
    c.title = format!("{} testbench", block.name);
    let t = cfg.clock;
    for (k, port) in iface.inputs.iter().enumerate() {
        let levels: Vec<(f64, bool)> = case
            .cycles
            .iter()
            .enumerate()
            .map(|(n, cyc)| (n as f64 * t, cyc.inputs[k]))
            .collect();
        c.top.devices.push(Device::vsource(&format!("V{port}"), port, "0", bits_to_pwl(&levels, cfg.vdd, cfg.edge)));
    }
    if let Some(clk) = iface.clock {
        let mut levels = vec![(0.0, false)];
        for (n, cyc) in case.cycles.iter().enumerate() {
            let start = n as f64 * t;
            levels.push((start, false));
            if cyc.edge {
                levels.push((start + 0.5 * t, true));
            }
        }
        c.top.devices.push(Device::vsource(&format!("V{clk}"), clk, "0", bits_to_pwl(&levels, cfg.vdd, cfg.edge)));
    }
    if block.ports.iter().any(|p| p == "vdd") {
        c.top.devices.push(Device::vsource("Vsupply", "vdd", "0", Source::Dc(cfg.vdd)));
    }
    c.top.instances.push(block.self_named_instance("XDUT"));
    c
}

fn compare(kind: BlockKind, case: &Case, index: usize, wf: &Waveform, cfg: &VerifyConfig) -> (usize, Vec<Divergence>) {
    let iface = interface(kind);
    let mut oracle = Oracle::new(kind, cfg.wiring);
    let mut samples = 0;
    let mut out = Vec::new();
    for (n, cycle) in case.cycles.iter().enumerate() {
        let expected = oracle.step(cycle);
        if n < case.warmup {
            continue;
        }
        let time = (n as f64 + cfg.settle_fraction) * cfg.clock;
        for (signal, &want) in iface.outputs.iter().zip(&expected) {
            samples += 1;
            let voltage = wf.value_at(signal, time).expect("output net exists");
            let observed = classify(voltage, cfg.vdd);
            if observed != Level::from_bool(want) {
                out.push(Divergence {
                    case: index,
                    cycle: n,
                    time,
                    signal: signal.to_string(),
                    expected: want,
                    observed,
                    voltage,
                });
            }
        }
    }
    (samples, out)
}

/// Simulates one case and compares it with the oracle.
pub fn check_case(block: &Block, case: &Case, index: usize, cfg: &VerifyConfig) -> Result<CaseResult, VerifyError> {
    let flat = expand(&testbench(block, case, cfg))?;
    let wf = run_transient(&flat, &cfg.options(case.cycles.len()))
        .map_err(|source| VerifyError::Sim { case: index, source })?;
    let (samples, divergences) = compare(block.kind, case, index, &wf, cfg);
    Ok(CaseResult {
        samples,
        divergences,
        warnings: wf.warnings.len(),
    })
}

fn describe(kind: BlockKind, cfg: &VerifyConfig) -> String {
    let clocked = interface(kind).clock.is_some();
    format!(
        "vdd {} V, cycle {:e} s, tstep {:e} s, edges {:e} s; inputs change at cycle start{}; outputs sampled at {}% of the cycle",
        cfg.vdd,
        cfg.clock,
        cfg.tstep,
        cfg.edge,
        if clocked { ", clock rises at 50%" } else { "" },
        cfg.settle_fraction * 100.0
    )
}

/// Runs `cases` (in parallel) and merges the results in case order.
pub fn check_cases(block: &Block, cases: &[Case], mode: Mode, cfg: &VerifyConfig) -> Result<Report, VerifyError> {
    cfg.validate()?;
    let results = cases
        .par_iter()
        .enumerate()
        .map(|(i, c)| check_case(block, c, i, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let divergences: Vec<&Divergence> = results.iter().flat_map(|r| &r.divergences).collect();
    let unsettled = divergences.iter().filter(|d| d.observed == Level::X).count();
    let first_divergence = divergences.first().map(|d| (*d).clone());
    let outcome = match &first_divergence {
        None => Outcome::Pass,
        Some(d) if d.observed == Level::X => Outcome::Unsettled,
        Some(_) => Outcome::Mismatch,
    };
    let mut vectors: Vec<&Vec<bool>> = cases.iter().flat_map(|c| c.cycles.iter().map(|y| &y.inputs)).collect();
    vectors.sort();
    vectors.dedup();
    Ok(Report {
        block: block.kind.to_string(),
        mode,
        cases: cases.len(),
        vectors: vectors.len(),
        samples: results.iter().map(|r| r.samples).sum(),
        seed: (mode == Mode::Random).then_some(cfg.seed),
        outcome,
        mismatches: divergences.len() - unsettled,
        unsettled,
        first_divergence,
        solver_warnings: results.iter().map(|r| r.warnings).sum(),
        stimulus: describe(block.kind, cfg),
    })
}

/// Generates `kind` and checks it against the oracle.
pub fn equivalence_check(kind: BlockKind, mode: Mode, cfg: &VerifyConfig) -> Result<Report, VerifyError> {
    cfg.validate()?;
    let block = match kind {
        BlockKind::Xax => build_xax(&cfg.wiring, &cfg.gen)?,
        other => build_block(other, &cfg.gen),
    };
    let cases = match mode {
        Mode::Exhaustive => exhaustive_cases(kind, &cfg.wiring),
        Mode::Random => random_cases(kind, cfg),
    };
    check_cases(&block, &cases, mode, cfg)
}
