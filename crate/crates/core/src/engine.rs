//! Fixed-step transient analysis of a [`FlatCircuit`].
//!
//! Each step freezes memristor states, solves the resistive network by
//! modified nodal analysis (dense LU with partial pivoting), iterates MOSFET
//! switch regions to a fixed point, and then advances every memristor state
//! under its solved branch voltage.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::device::{state_derivative, MemristorParams, MemristorState, MosfetParams};
use crate::netlist::validate::{dc_edges, unreachable_from_ground};
use crate::netlist::{FlatCircuit, FlatElement, Source};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation options: {0}")]
    Options(String),
    #[error("t = {time:e} s: singular system, floating nets: {}", nets.join(", "))]
    Singular { time: f64, nets: Vec<String> },
    #[error("t = {time:e} s: switch regions did not settle, devices: {}", devices.join(", "))]
    Oscillation { time: f64, devices: Vec<String> },
}

/// What to do when MOSFET regions keep changing after `max_switch_iters`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OscillationPolicy {
    /// Keep the iterate with the smallest voltage change and record a warning.
    AcceptBest,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimOptions {
    pub tstep: f64,
    pub tstop: f64,
    pub max_switch_iters: usize,
    pub voltage_tol: f64,
    pub state_substeps: usize,
    pub clamp_states: bool,
    pub on_oscillation: OscillationPolicy,
}

impl SimOptions {
    pub fn new(tstep: f64, tstop: f64) -> Self {
        Self {
            tstep,
            tstop,
            max_switch_iters: 50,
            voltage_tol: 1e-6,
            state_substeps: 4,
            clamp_states: true,
            on_oscillation: OscillationPolicy::AcceptBest,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.tstep > 0.0 && self.tstop >= self.tstep) {
            return Err(SimError::Options("require 0 < tstep <= tstop".into()));
        }
        if self.max_switch_iters == 0 || self.state_substeps == 0 {
            return Err(SimError::Options(
                "max_switch_iters and state_substeps must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.tstop / self.tstep).round() as usize
    }
}

/// Sampled simulation results, one column per net, source and memristor.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Waveform {
    pub time: Vec<f64>,
    pub nets: Vec<String>,
    pub voltages: Vec<Vec<f64>>,
    pub sources: Vec<String>,
    /// Voltage across each source, plus minus minus terminal.
    pub source_voltages: Vec<Vec<f64>>,
    /// Current delivered out of each source's plus terminal.
    pub source_currents: Vec<Vec<f64>>,
    pub memristors: Vec<String>,
    pub states: Vec<Vec<f64>>,
    /// Largest KCL imbalance over all nets at each sample (A).
    pub kcl_residual: Vec<f64>,
    pub warnings: Vec<String>,
}

impl Waveform {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// Looks up a column: a net name (or `v(net)`), `i(source)` or `x(memristor)`.
    pub fn signal(&self, name: &str) -> Option<&[f64]> {
        let inner = |prefix: &str| {
            let lower = name.to_ascii_lowercase();
            if lower.starts_with(prefix) && name.ends_with(')') {
                Some(&name[prefix.len()..name.len() - 1])
            } else {
                None
            }
        };
        if let Some(src) = inner("i(") {
            let idx = self.sources.iter().position(|s| s == src)?;
            return Some(&self.source_currents[idx]);
        }
        if let Some(dev) = inner("x(") {
            let idx = self.memristors.iter().position(|s| s == dev)?;
            return Some(&self.states[idx]);
        }
        let net = inner("v(").unwrap_or(name);
        let net = if crate::netlist::is_ground(net) { "0" } else { net };
        let idx = self.nets.iter().position(|n| n == net)?;
        Some(&self.voltages[idx])
    }

    /// Linearly interpolated value of a column at time `t`.
    pub fn value_at(&self, name: &str, t: f64) -> Option<f64> {
        let ys = self.signal(name)?;
        Some(interpolate(&self.time, ys, t))
    }

    pub fn source_voltage(&self, source: &str) -> Option<&[f64]> {
        let idx = self.sources.iter().position(|s| s == source)?;
        Some(&self.source_voltages[idx])
    }
}

pub(crate) fn interpolate(time: &[f64], ys: &[f64], t: f64) -> f64 {
    if time.is_empty() {
        return 0.0;
    }
    if t <= time[0] {
        return ys[0];
    }
    let idx = time.partition_point(|&x| x <= t);
    if idx >= time.len() {
        return ys[ys.len() - 1];
    }
    let (t0, t1) = (time[idx - 1], time[idx]);
    ys[idx - 1] + (ys[idx] - ys[idx - 1]) * (t - t0) / (t1 - t0)
}

/// Per-step dynamic state carried between solves.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    /// Node voltages indexed by net, ground included.
    pub voltages: Vec<f64>,
    /// Memristor states indexed by device.
    pub states: Vec<f64>,
    /// MOSFET on/off regions indexed by device.
    pub regions: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepSolution {
    pub voltages: Vec<f64>,
    /// Current delivered by each source, in `flat.sources()` order.
    pub source_currents: Vec<f64>,
    pub regions: Vec<bool>,
    pub iterations: usize,
    /// Set when regions were still changing at the iteration limit.
    pub unsettled: Vec<String>,
}

#[derive(Debug, Clone)]
enum Stamp {
    Conductance { a: usize, b: usize, g: f64 },
    Memristor { a: usize, b: usize, params: MemristorParams },
    Capacitor { a: usize, b: usize, c: f64 },
    Mosfet { d: usize, g: usize, s: usize, params: MosfetParams },
    Source { p: usize, m: usize, branch: usize },
}

/// Iterations that update every switch region at once before falling back
/// to one flip per iteration.
const SIMULTANEOUS_UPDATES: usize = 3;

/// Precomputed view of a circuit ready for repeated solves.
pub struct Engine<'a> {
    flat: &'a FlatCircuit,
    stamps: Vec<Stamp>,
    source_devices: Vec<usize>,
    memristor_devices: Vec<usize>,
    size: usize,
    nodes: usize,
}

fn add_g(m: &mut DMatrix<f64>, a: usize, b: usize, g: f64) {
    // unknown k holds net k+1; ground is eliminated
    if a > 0 {
        m[(a - 1, a - 1)] += g;
    }
    if b > 0 {
        m[(b - 1, b - 1)] += g;
    }
    if a > 0 && b > 0 {
        m[(a - 1, b - 1)] -= g;
        m[(b - 1, a - 1)] -= g;
    }
}

impl<'a> Engine<'a> {
    /// Fails when part of the circuit has no conductive path to ground.
    pub fn new(flat: &'a FlatCircuit) -> Result<Self, SimError> {
        let nodes = flat.nets.len();
        let mut stamps = Vec::with_capacity(flat.devices.len());
        let mut source_devices = Vec::new();
        let mut memristor_devices = Vec::new();
        for (i, d) in flat.devices.iter().enumerate() {
            let n = &d.nodes;
            stamps.push(match &d.element {
                FlatElement::Resistor { resistance } => Stamp::Conductance {
                    a: n[0],
                    b: n[1],
                    g: 1.0 / resistance,
                },
                FlatElement::Capacitor { capacitance, .. } => Stamp::Capacitor {
                    a: n[0],
                    b: n[1],
                    c: *capacitance,
                },
                FlatElement::VSource(_) => {
                    source_devices.push(i);
                    Stamp::Source {
                        p: n[0],
                        m: n[1],
                        branch: nodes - 1 + source_devices.len() - 1,
                    }
                }
                FlatElement::Memristor { params, .. } => {
                    memristor_devices.push(i);
                    Stamp::Memristor {
                        a: n[0],
                        b: n[1],
                        params: *params,
                    }
                }
                FlatElement::Mosfet { params } => Stamp::Mosfet {
                    d: n[0],
                    g: n[1],
                    s: n[2],
                    params: *params,
                },
            });
        }
        let edges = flat.devices.iter().flat_map(|d| match d.element {
            FlatElement::Capacitor { .. } => vec![(d.nodes[0], d.nodes[1])],
            _ => dc_edges(d),
        });
        let floating = unreachable_from_ground(nodes, edges);
        if !floating.is_empty() {
            return Err(SimError::Singular {
                time: 0.0,
                nets: floating.iter().map(|&k| flat.nets[k].clone()).collect(),
            });
        }
        Ok(Self {
            flat,
            stamps,
            size: nodes - 1 + source_devices.len(),
            source_devices,
            memristor_devices,
            nodes,
        })
    }

    pub fn flat(&self) -> &FlatCircuit {
        self.flat
    }

    /// State at power-up: 0 V everywhere, memristors at `x0`, regions
    /// evaluated from the 0 V guess.
    pub fn initial_state(&self) -> StepState {
        let voltages = vec![0.0; self.nodes];
        let states = self
            .flat
            .devices
            .iter()
            .map(|d| match d.element {
                FlatElement::Memristor { x0, .. } => x0,
                _ => 0.0,
            })
            .collect();
        let regions = self.evaluate_regions(&voltages);
        StepState {
            voltages,
            states,
            regions,
        }
    }

    fn evaluate_regions(&self, v: &[f64]) -> Vec<bool> {
        self.stamps
            .iter()
            .map(|s| match *s {
                Stamp::Mosfet { g, s, params, .. } => params.is_on(v[g] - v[s]),
                _ => false,
            })
            .collect()
    }

    /// Distance of each MOSFET's gate drive from its threshold.
    fn region_margins(&self, v: &[f64]) -> Vec<f64> {
        self.stamps
            .iter()
            .map(|s| match *s {
                Stamp::Mosfet { g, s, params, .. } => ((v[g] - v[s]).abs() - params.v_th).abs(),
                _ => 0.0,
            })
            .collect()
    }

    fn source_value(&self, device: usize, t: f64) -> f64 {
        match &self.flat.devices[device].element {
            FlatElement::VSource(src) => src.value_at(t),
            _ => 0.0,
        }
    }

    /// Builds the MNA system for frozen states and the given regions.
    /// `cap_history` holds capacitor voltages from the previous sample and
    /// `h` the companion step.
    fn assemble(
        &self,
        t: f64,
        h: f64,
        prev: &StepState,
        cap_history: &[f64],
        regions: &[bool],
    ) -> (DMatrix<f64>, DVector<f64>) {
        let mut m = DMatrix::zeros(self.size, self.size);
        let mut rhs = DVector::zeros(self.size);
        for (i, stamp) in self.stamps.iter().enumerate() {
            match *stamp {
                Stamp::Conductance { a, b, g } => add_g(&mut m, a, b, g),
                Stamp::Memristor { a, b, ref params } => {
                    let r = crate::device::memristance(MemristorState::new(prev.states[i]), params);
                    add_g(&mut m, a, b, 1.0 / r)
                }
                Stamp::Capacitor { a, b, c } => {
                    let g = c / h;
                    add_g(&mut m, a, b, g);
                    let ieq = g * cap_history[i];
                    if a > 0 {
                        rhs[a - 1] += ieq;
                    }
                    if b > 0 {
                        rhs[b - 1] -= ieq;
                    }
                }
                Stamp::Mosfet { d, s, params, .. } => {
                    let g = if regions[i] {
                        1.0 / params.r_ds_on
                    } else {
                        1.0 / params.r_ds_off
                    };
                    add_g(&mut m, d, s, g)
                }
                Stamp::Source { p, m: minus, branch } => {
                    if p > 0 {
                        m[(p - 1, branch)] += 1.0;
                        m[(branch, p - 1)] += 1.0;
                    }
                    if minus > 0 {
                        m[(minus - 1, branch)] -= 1.0;
                        m[(branch, minus - 1)] -= 1.0;
                    }
                    rhs[branch] = self.source_value(i, t);
                }
            }
        }
        (m, rhs)
    }

    fn singular_nets(&self, m: &DMatrix<f64>) -> Vec<String> {
        let mut nets: Vec<String> = (1..self.nodes)
            .filter(|&k| m.row(k - 1).iter().all(|&x| x == 0.0))
            .map(|k| self.flat.nets[k].clone())
            .collect();
        if nets.is_empty() {
            nets.push("(numerically singular)".into());
        }
        nets
    }

    /// Solves one time point: network solve with frozen memristor states and
    /// capacitor history, iterated over MOSFET switch regions.
    pub fn solve_step(
        &self,
        t: f64,
        h: f64,
        prev: &StepState,
        cap_history: &[f64],
        options: &SimOptions,
    ) -> Result<StepSolution, SimError> {
        let mut regions = prev.regions.clone();
        let mut last = prev.voltages.clone();
        let mut best: Option<(f64, Vec<f64>, Vec<f64>, Vec<bool>)> = None;
        let mut flipping: Vec<bool> = vec![false; regions.len()];
        for iter in 1..=options.max_switch_iters {
            let (m, rhs) = self.assemble(t, h, prev, cap_history, &regions);
            let x = match m.clone().lu().solve(&rhs) {
                Some(x) => x,
                None => {
                    return Err(SimError::Singular {
                        time: t,
                        nets: self.singular_nets(&m),
                    })
                }
            };
            let mut voltages = Vec::with_capacity(self.nodes);
            voltages.push(0.0);
            voltages.extend(x.iter().take(self.nodes - 1));
            let currents: Vec<f64> = (0..self.source_devices.len())
                .map(|k| -x[self.nodes - 1 + k])
                .collect();
            let mut next = self.evaluate_regions(&voltages);
            if next == regions {
                return Ok(StepSolution {
                    voltages,
                    source_currents: currents,
                    regions,
                    iterations: iter,
                    unsettled: Vec::new(),
                });
            }
            let change = voltages
                .iter()
                .zip(&last)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if best.as_ref().is_none_or(|b| change < b.0) {
                best = Some((change, voltages.clone(), currents, regions.clone()));
            }
            for (f, (a, b)) in flipping.iter_mut().zip(next.iter().zip(&regions)) {
                *f |= a != b;
            }
            if iter >= SIMULTANEOUS_UPDATES {
                // Simultaneous updates can cycle in cross-coupled loops; flip
                // only the most decisive device and re-solve.
                let margins = self.region_margins(&voltages);
                let pick = (0..next.len())
                    .filter(|&k| next[k] != regions[k])
                    .max_by(|&a, &b| margins[a].total_cmp(&margins[b]).then(b.cmp(&a)))
                    .expect("regions differ");
                next = regions.clone();
                next[pick] = !next[pick];
            }
            last = voltages;
            regions = next;
        }
        let devices: Vec<String> = flipping
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(|(i, _)| self.flat.devices[i].name.clone())
            .collect();
        if options.on_oscillation == OscillationPolicy::Fail {
            return Err(SimError::Oscillation { time: t, devices });
        }
        let (_, voltages, source_currents, regions) = best.expect("at least one iteration");
        Ok(StepSolution {
            voltages,
            source_currents,
            regions,
            iterations: options.max_switch_iters,
            unsettled: devices,
        })
    }

    /// Largest KCL imbalance over all non-ground nets, summed device by device
    /// from the solved voltages.
    pub fn kcl_residual(
        &self,
        h: f64,
        prev: &StepState,
        cap_history: &[f64],
        sol: &StepSolution,
    ) -> f64 {
        let v = &sol.voltages;
        let mut into = vec![0.0; self.nodes];
        let mut flow = |a: usize, b: usize, i: f64| {
            // i flows from a to b
            into[a] -= i;
            into[b] += i;
        };
        let mut src = 0;
        for (k, stamp) in self.stamps.iter().enumerate() {
            match *stamp {
                Stamp::Conductance { a, b, g } => flow(a, b, g * (v[a] - v[b])),
                Stamp::Memristor { a, b, ref params } => {
                    let r = crate::device::memristance(MemristorState::new(prev.states[k]), params);
                    flow(a, b, (v[a] - v[b]) / r)
                }
                Stamp::Capacitor { a, b, c } => {
                    flow(a, b, c / h * ((v[a] - v[b]) - cap_history[k]))
                }
                Stamp::Mosfet { d, s, params, .. } => {
                    let r = if sol.regions[k] {
                        params.r_ds_on
                    } else {
                        params.r_ds_off
                    };
                    flow(d, s, (v[d] - v[s]) / r)
                }
                Stamp::Source { p, m, .. } => {
                    // delivered current leaves the plus terminal into the net
                    flow(m, p, sol.source_currents[src]);
                    src += 1;
                }
            }
        }
        into.iter().skip(1).fold(0.0, |acc, x| acc.max(x.abs()))
    }

    /// Advances memristor states over `dt` under the solved branch voltages.
    pub fn advance_states(&self, states: &mut [f64], voltages: &[f64], dt: f64, options: &SimOptions) {
        let n = options.state_substeps;
        let hs = dt / n as f64;
        for &i in &self.memristor_devices {
            if let Stamp::Memristor { a, b, ref params } = self.stamps[i] {
                let v = voltages[a] - voltages[b];
                let clamp = |x: f64| {
                    if options.clamp_states {
                        x.clamp(0.0, 1.0)
                    } else {
                        x
                    }
                };
                let mut x = states[i];
                for _ in 0..n {
                    let k1 = state_derivative(MemristorState::new(x), v, params);
                    let mid = clamp(x + 0.5 * hs * k1);
                    let k2 = state_derivative(MemristorState::new(mid), v, params);
                    x = clamp(x + hs * k2);
                }
                states[i] = x;
            }
        }
    }

    fn capacitor_voltages(&self, voltages: &[f64]) -> Vec<f64> {
        self.stamps
            .iter()
            .map(|s| match *s {
                Stamp::Capacitor { a, b, .. } => voltages[a] - voltages[b],
                _ => 0.0,
            })
            .collect()
    }

    /// Runs the fixed-step march from `t = 0` to `tstop`.
    pub fn run(&self, options: &SimOptions) -> Result<Waveform, SimError> {
        options.validate()?;
        let flat = self.flat;
        let steps = options.steps();
        let h = options.tstep;
        let mut wf = Waveform {
            nets: flat.nets.clone(),
            voltages: vec![Vec::with_capacity(steps + 1); self.nodes],
            sources: self
                .source_devices
                .iter()
                .map(|&i| flat.devices[i].name.clone())
                .collect(),
            source_voltages: vec![Vec::with_capacity(steps + 1); self.source_devices.len()],
            source_currents: vec![Vec::with_capacity(steps + 1); self.source_devices.len()],
            memristors: self
                .memristor_devices
                .iter()
                .map(|&i| flat.devices[i].name.clone())
                .collect(),
            states: vec![Vec::with_capacity(steps + 1); self.memristor_devices.len()],
            ..Default::default()
        };
        let mut state = self.initial_state();
        let mut cap_history: Vec<f64> = flat
            .devices
            .iter()
            .map(|d| match d.element {
                FlatElement::Capacitor { ic, .. } => ic,
                _ => 0.0,
            })
            .collect();
        for n in 0..=steps {
            let t = n as f64 * h;
            if n > 0 {
                let voltages = state.voltages.clone();
                self.advance_states(&mut state.states, &voltages, h, options);
            }
            let sol = self.solve_step(t, h, &state, &cap_history, options)?;
            if !sol.unsettled.is_empty() {
                wf.warnings.push(format!(
                    "t = {t:e} s: switch regions still changing after {} iterations ({})",
                    sol.iterations,
                    sol.unsettled.join(", ")
                ));
            }
            wf.kcl_residual.push(self.kcl_residual(h, &state, &cap_history, &sol));
            wf.time.push(t);
            for (col, v) in wf.voltages.iter_mut().zip(&sol.voltages) {
                col.push(*v);
            }
            for (k, &i) in self.source_devices.iter().enumerate() {
                let nodes = &flat.devices[i].nodes;
                wf.source_voltages[k].push(sol.voltages[nodes[0]] - sol.voltages[nodes[1]]);
                wf.source_currents[k].push(sol.source_currents[k]);
            }
            for (k, &i) in self.memristor_devices.iter().enumerate() {
                wf.states[k].push(state.states[i]);
            }
            cap_history = self.capacitor_voltages(&sol.voltages);
            state.voltages = sol.voltages;
            state.regions = sol.regions;
        }
        Ok(wf)
    }
}

/// Runs a transient analysis of `flat` with `options`.
pub fn run_transient(flat: &FlatCircuit, options: &SimOptions) -> Result<Waveform, SimError> {
    Engine::new(flat)?.run(options)
}

/// Single network solve at time `t` from a given dynamic state, with
/// capacitors treated as open circuits.
pub fn solve_step(
    flat: &FlatCircuit,
    t: f64,
    prev: &StepState,
    options: &SimOptions,
) -> Result<StepSolution, SimError> {
    let engine = Engine::new(flat)?;
    let caps = vec![0.0; flat.devices.len()];
    engine.solve_step(t, f64::INFINITY, prev, &caps, options)
}

/// Source helper for stimulus generation: a rail-to-rail PWL from bit levels.
pub fn bits_to_pwl(bits: &[(f64, bool)], vdd: f64, edge: f64) -> Source {
    let mut points: Vec<(f64, f64)> = Vec::new();
    let level = |b: bool| if b { vdd } else { 0.0 };
    for &(t, b) in bits {
        match points.last() {
            None => points.push((0.0, level(b))),
            Some(&(_, v)) if v != level(b) => {
                points.push((t, v));
                points.push((t + edge, level(b)));
            }
            _ => {}
        }
    }
    Source::Pwl(points)
}
