//! Netlist generators for MRL blocks, device census and area accounting.
//!
//! Every block is emitted as a subcircuit whose children are other generated
//! subcircuits, so a census of the parent is the census of its children plus
//! its own devices.
//!
//! Memristor orientation: the first terminal is the bar side, and a positive
//! voltage from bar side to the other terminal lowers the resistance. In an
//! AND pair both bar sides face the output, so a current between unequal
//! inputs switches the device on the high input off and the one on the low
//! input on, pulling the output low. The OR pair is the mirror image.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::device::{MemristorParams, MosfetParams};
use crate::netlist::{Body, Circuit, Device, Element, Instance, Model, ModelKind, Subckt};

pub const MEMRISTOR_MODEL: &str = "mrl_mem";
pub const NMOS_MODEL: &str = "mrl_nmos";
pub const PMOS_MODEL: &str = "mrl_pmos";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("{block} has {expected} ports, {found} nets given")]
    PortArity {
        block: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid XAX wiring: {0}")]
    Wiring(String),
    #[error("unknown block '{0}'")]
    UnknownBlock(String),
    #[error("baseline cell count must be positive")]
    ZeroBaseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum GateKind {
    And,
    Or,
    Nand,
    Nor,
    Not,
    Xor,
}

impl GateKind {
    pub const ALL: [GateKind; 6] = [
        GateKind::And,
        GateKind::Or,
        GateKind::Nand,
        GateKind::Nor,
        GateKind::Not,
        GateKind::Xor,
    ];

    pub fn input_count(self) -> usize {
        match self {
            GateKind::Not => 1,
            _ => 2,
        }
    }

    pub fn subckt_name(self) -> &'static str {
        match self {
            GateKind::And => "mrl_and",
            GateKind::Or => "mrl_or",
            GateKind::Nand => "mrl_nand",
            GateKind::Nor => "mrl_nor",
            GateKind::Not => "mrl_not",
            GateKind::Xor => "mrl_xor",
        }
    }

    pub fn needs_supply(self) -> bool {
        !matches!(self, GateKind::And | GateKind::Or)
    }
}

/// Every block the generators can emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BlockKind {
    Gate(GateKind),
    DLatch,
    Dff,
    Xax,
}

impl BlockKind {
    pub const ALL: [BlockKind; 9] = [
        BlockKind::Gate(GateKind::And),
        BlockKind::Gate(GateKind::Or),
        BlockKind::Gate(GateKind::Nand),
        BlockKind::Gate(GateKind::Nor),
        BlockKind::Gate(GateKind::Not),
        BlockKind::Gate(GateKind::Xor),
        BlockKind::DLatch,
        BlockKind::Dff,
        BlockKind::Xax,
    ];
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BlockKind::Gate(GateKind::And) => "and",
            BlockKind::Gate(GateKind::Or) => "or",
            BlockKind::Gate(GateKind::Nand) => "nand",
            BlockKind::Gate(GateKind::Nor) => "nor",
            BlockKind::Gate(GateKind::Not) => "not",
            BlockKind::Gate(GateKind::Xor) => "xor",
            BlockKind::DLatch => "dlatch",
            BlockKind::Dff => "dff",
            BlockKind::Xax => "xax",
        };
        f.write_str(s)
    }
}

impl FromStr for BlockKind {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BlockKind::ALL
            .into_iter()
            .find(|b| b.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| GenError::UnknownBlock(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct DeviceCensus {
    pub memristors: usize,
    pub transistors: usize,
    /// Complementary P/N pairs sharing gate and drain.
    pub inverter_cells: usize,
}

impl std::ops::Add for DeviceCensus {
    type Output = DeviceCensus;

    fn add(self, o: DeviceCensus) -> DeviceCensus {
        DeviceCensus {
            memristors: self.memristors + o.memristors,
            transistors: self.transistors + o.transistors,
            inverter_cells: self.inverter_cells + o.inverter_cells,
        }
    }
}

impl std::iter::Sum for DeviceCensus {
    fn sum<I: Iterator<Item = DeviceCensus>>(iter: I) -> Self {
        iter.fold(DeviceCensus::default(), |a, b| a + b)
    }
}

impl fmt::Display for DeviceCensus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "memristors: {}", self.memristors)?;
        writeln!(f, "transistors: {}", self.transistors)?;
        write!(f, "inverter_cells: {}", self.inverter_cells)
    }
}

/// Which XAX stages are registered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct XaxWiring {
    pub x_stage: bool,
    pub a_stage: bool,
    pub acc_stage: bool,
}

impl Default for XaxWiring {
    fn default() -> Self {
        Self {
            x_stage: true,
            a_stage: true,
            acc_stage: true,
        }
    }
}

impl XaxWiring {
    pub fn flip_flops(&self) -> usize {
        [self.x_stage, self.a_stage, self.acc_stage]
            .iter()
            .filter(|&&b| b)
            .count()
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.flip_flops() == 0 {
            return Err(GenError::Wiring("at least one stage must be registered".into()));
        }
        Ok(())
    }
}

/// Device models and initial state used by the generators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenOptions {
    pub memristor: MemristorParams,
    pub nmos: MosfetParams,
    pub pmos: MosfetParams,
    /// Initial state written on every generated memristor.
    pub x0: f64,
    /// Load on every inverter output (F); zero omits it.
    pub load_cap: f64,
}

impl Default for GenOptions {
    fn default() -> Self {
        Self {
            memristor: MemristorParams::default(),
            nmos: MosfetParams::nmos(),
            pmos: MosfetParams::pmos(),
            x0: 0.5,
            load_cap: 100e-15,
        }
    }
}

/// A generated subcircuit together with every definition it depends on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Block {
    pub kind: BlockKind,
    pub name: String,
    pub ports: Vec<String>,
    pub library: Circuit,
    pub census: DeviceCensus,
}

impl Block {
    /// Instance line binding this block's ports, in order, to `nets`.
    pub fn instantiate(&self, instance: &str, nets: &[&str]) -> Result<Instance, GenError> {
        if nets.len() != self.ports.len() {
            return Err(GenError::PortArity {
                block: self.name.clone(),
                expected: self.ports.len(),
                found: nets.len(),
            });
        }
        Ok(Instance::new(instance, nets, &self.name))
    }

    /// Instance whose port nets carry the port names.
    pub fn self_named_instance(&self, instance: &str) -> Instance {
        let ports: Vec<&str> = self.ports.iter().map(String::as_str).collect();
        Instance::new(instance, &ports, &self.name)
    }

    /// The library as standalone netlist text.
    pub fn netlist_text(&self) -> String {
        self.library.to_string()
    }
}

struct Builder<'a> {
    opts: &'a GenOptions,
    library: Circuit,
}

impl<'a> Builder<'a> {
    fn new(opts: &'a GenOptions, title: &str) -> Self {
        let mut library = Circuit::new(title);
        library.add_model(Model::from_memristor(MEMRISTOR_MODEL, &opts.memristor));
        library.add_model(Model::from_mosfet(NMOS_MODEL, &opts.nmos));
        library.add_model(Model::from_mosfet(PMOS_MODEL, &opts.pmos));
        Self { opts, library }
    }

    fn memristor(&self, name: &str, a: &str, b: &str, polarity: i8) -> Device {
        let mut d = Device::memristor(name, a, b, MEMRISTOR_MODEL, Some(self.opts.x0));
        if let Element::Memristor { polarity: p, .. } = &mut d.element {
            *p = polarity;
        }
        d
    }

    fn define(&mut self, name: &str, ports: &[&str], body: Body) {
        if self.library.subckts.contains_key(name) {
            return;
        }
        self.library.add_subckt(Subckt {
            name: name.to_string(),
            ports: ports.iter().map(|p| p.to_string()).collect(),
            body,
        });
    }

    fn gate(&mut self, kind: GateKind) -> &'static str {
        let name = kind.subckt_name();
        if self.library.subckts.contains_key(name) {
            return name;
        }
        match kind {
            GateKind::And => {
                // a -> y -> b chain; both bar sides on y
                let body = Body {
                    devices: vec![self.memristor("Y1", "a", "y", -1), self.memristor("Y2", "y", "b", 1)],
                    instances: vec![],
                };
                self.define(name, &["a", "b", "y"], body);
            }
            GateKind::Or => {
                let body = Body {
                    devices: vec![self.memristor("Y1", "a", "y", 1), self.memristor("Y2", "y", "b", -1)],
                    instances: vec![],
                };
                self.define(name, &["a", "b", "y"], body);
            }
            GateKind::Not => {
                let mut devices = vec![
                    Device::mosfet("MP", "y", "a", "vdd", "vdd", PMOS_MODEL),
                    Device::mosfet("MN", "y", "a", "0", "0", NMOS_MODEL),
                ];
                if self.opts.load_cap > 0.0 {
                    devices.push(Device::capacitor("CL", "y", "0", self.opts.load_cap));
                }
                let body = Body {
                    devices,
                    instances: vec![],
                };
                self.define(name, &["a", "y", "vdd"], body);
            }
            GateKind::Nand | GateKind::Nor => {
                let pair = self.gate(if kind == GateKind::Nand {
                    GateKind::And
                } else {
                    GateKind::Or
                });
                let inv = self.gate(GateKind::Not);
                let body = Body {
                    devices: vec![],
                    instances: vec![
                        Instance::new("X1", &["a", "b", "n"], pair),
                        Instance::new("X2", &["n", "y", "vdd"], inv),
                    ],
                };
                self.define(name, &["a", "b", "y", "vdd"], body);
            }
            GateKind::Xor => {
                // (a OR b) AND NAND(a, b); the final AND is not restored
                let or = self.gate(GateKind::Or);
                let nand = self.gate(GateKind::Nand);
                let and = self.gate(GateKind::And);
                let body = Body {
                    devices: vec![],
                    instances: vec![
                        Instance::new("X1", &["a", "b", "o"], or),
                        Instance::new("X2", &["a", "b", "nd", "vdd"], nand),
                        Instance::new("X3", &["o", "nd", "y"], and),
                    ],
                };
                self.define(name, &["a", "b", "y", "vdd"], body);
            }
        }
        name
    }

    /// Gated SR latch: AND front end into a cross-coupled NOR pair.
    fn dlatch(&mut self) -> &'static str {
        let name = "mrl_dlatch";
        let inv = self.gate(GateKind::Not);
        let and = self.gate(GateKind::And);
        let nor = self.gate(GateKind::Nor);
        let body = Body {
            devices: vec![],
            instances: vec![
                Instance::new("XI", &["d", "db", "vdd"], inv),
                Instance::new("XS", &["d", "en", "s"], and),
                Instance::new("XR", &["db", "en", "r"], and),
                Instance::new("XQ", &["r", "qb", "q", "vdd"], nor),
                Instance::new("XQB", &["s", "q", "qb", "vdd"], nor),
            ],
        };
        self.define(name, &["d", "en", "q", "vdd"], body);
        name
    }

    /// Master-slave flip-flop; the master is open while the clock is low.
    ///
    /// The slave takes both polarities from the master's cross-coupled pair,
    /// so its input inverter moves to the master input: `d` is buffered twice
    /// and only ever drives an inverter gate. An unrestored divider feeding
    /// `d` then sees no DC load from the master's AND pair.
    fn dff(&mut self) -> &'static str {
        let name = "mrl_dff";
        let inv = self.gate(GateKind::Not);
        let and = self.gate(GateKind::And);
        let nor = self.gate(GateKind::Nor);
        let master = "mrl_latch_master";
        self.define(
            master,
            &["d", "en", "q", "qb", "vdd"],
            Body {
                devices: vec![],
                instances: vec![
                    Instance::new("XI1", &["d", "db", "vdd"], inv),
                    Instance::new("XI2", &["db", "dr", "vdd"], inv),
                    Instance::new("XS", &["dr", "en", "s"], and),
                    Instance::new("XR", &["db", "en", "r"], and),
                    Instance::new("XQ", &["r", "qb", "q", "vdd"], nor),
                    Instance::new("XQB", &["s", "q", "qb", "vdd"], nor),
                ],
            },
        );
        let slave = "mrl_latch_slave";
        self.define(
            slave,
            &["d", "db", "en", "q", "vdd"],
            Body {
                devices: vec![],
                instances: vec![
                    Instance::new("XS", &["d", "en", "s"], and),
                    Instance::new("XR", &["db", "en", "r"], and),
                    Instance::new("XQ", &["r", "qb", "q", "vdd"], nor),
                    Instance::new("XQB", &["s", "q", "qb", "vdd"], nor),
                ],
            },
        );
        let body = Body {
            devices: vec![],
            instances: vec![
                Instance::new("XC", &["clk", "clkb", "vdd"], inv),
                Instance::new("XM", &["d", "clkb", "qm", "qmb", "vdd"], master),
                Instance::new("XS", &["qm", "qmb", "clk", "q", "vdd"], slave),
            ],
        };
        self.define(name, &["d", "clk", "q", "vdd"], body);
        name
    }

    fn xax(&mut self, wiring: &XaxWiring) -> &'static str {
        let name = "mrl_xax";
        let dff = self.dff();
        let xor = self.gate(GateKind::Xor);
        let and = self.gate(GateKind::And);
        let mut devices = Vec::new();
        let mut instances = Vec::new();
        if wiring.x_stage {
            instances.push(Instance::new("XXR", &["x_in", "clk", "x_out", "vdd"], dff));
        } else {
            devices.push(Device::resistor("RXW", "x_in", "x_out", 1.0));
        }
        let ar = if wiring.a_stage {
            instances.push(Instance::new("XAR", &["a_in", "clk", "ar", "vdd"], dff));
            "ar"
        } else {
            "a_in"
        };
        let t3 = if wiring.acc_stage { "t3" } else { "acc_out" };
        instances.push(Instance::new("XX1", &["x_in", "x_out", "t1", "vdd"], xor));
        instances.push(Instance::new("XA", &["t1", ar, "t2"], and));
        instances.push(Instance::new("XX2", &["t2", "s_in", t3, "vdd"], xor));
        if wiring.acc_stage {
            instances.push(Instance::new("XACC", &["t3", "clk", "acc_out", "vdd"], dff));
        }
        self.define(
            name,
            &["x_in", "a_in", "s_in", "x_out", "acc_out", "clk", "vdd"],
            Body { devices, instances },
        );
        name
    }

    fn finish(self, kind: BlockKind, name: &str) -> Block {
        let ports = self.library.subckts[name].ports.clone();
        let census = census(&self.library, name);
        Block {
            kind,
            name: name.to_string(),
            ports,
            library: self.library,
            census,
        }
    }
}

pub fn build_gate(kind: GateKind, opts: &GenOptions) -> Block {
    let mut b = Builder::new(opts, &format!("MRL {kind:?} gate"));
    let name = b.gate(kind);
    b.finish(BlockKind::Gate(kind), name)
}

pub fn build_dlatch(opts: &GenOptions) -> Block {
    let mut b = Builder::new(opts, "MRL D latch");
    let name = b.dlatch();
    b.finish(BlockKind::DLatch, name)
}

pub fn build_dff(opts: &GenOptions) -> Block {
    let mut b = Builder::new(opts, "MRL master-slave D flip-flop");
    let name = b.dff();
    b.finish(BlockKind::Dff, name)
}

pub fn build_xax(wiring: &XaxWiring, opts: &GenOptions) -> Result<Block, GenError> {
    wiring.validate()?;
    let mut b = Builder::new(opts, "MRL XAX cell");
    let name = b.xax(wiring);
    Ok(b.finish(BlockKind::Xax, name))
}

pub fn build_block(kind: BlockKind, opts: &GenOptions) -> Block {
    match kind {
        BlockKind::Gate(g) => build_gate(g, opts),
        BlockKind::DLatch => build_dlatch(opts),
        BlockKind::Dff => build_dff(opts),
        BlockKind::Xax => build_xax(&XaxWiring::default(), opts).expect("default wiring is valid"),
    }
}

fn local_census(body: &Body, models: &BTreeMap<String, Model>) -> DeviceCensus {
    let mut memristors = 0;
    let mut transistors = 0;
    // (drain, gate) -> (pmos count, nmos count)
    let mut pairs: BTreeMap<(&str, &str), (usize, usize)> = BTreeMap::new();
    for d in &body.devices {
        match &d.element {
            Element::Memristor { .. } => memristors += 1,
            Element::Mosfet { model } => {
                transistors += 1;
                let key = (d.terminals[0].as_str(), d.terminals[1].as_str());
                let e = pairs.entry(key).or_default();
                let is_p = models.get(model).map(|m| m.kind == ModelKind::Pmos);
                if is_p.unwrap_or(model == PMOS_MODEL) {
                    e.0 += 1;
                } else {
                    e.1 += 1;
                }
            }
            _ => {}
        }
    }
    let inverter_cells = pairs.values().map(|&(p, n)| p.min(n)).sum();
    DeviceCensus {
        memristors,
        transistors,
        inverter_cells,
    }
}

fn census_memo<'a>(
    circuit: &'a Circuit,
    name: &'a str,
    memo: &mut HashMap<&'a str, DeviceCensus>,
) -> DeviceCensus {
    if let Some(c) = memo.get(name) {
        return *c;
    }
    let Some(sub) = circuit.subckts.get(name) else {
        return DeviceCensus::default();
    };
    let mut total = local_census(&sub.body, &circuit.models);
    for inst in &sub.body.instances {
        total = total + census_memo(circuit, &inst.subckt, memo);
    }
    memo.insert(name, total);
    total
}

/// Recursive device count of subcircuit `name` in `circuit`.
pub fn census(circuit: &Circuit, name: &str) -> DeviceCensus {
    census_memo(circuit, name, &mut HashMap::new())
}

/// Device count of a circuit's top level, including instantiated subcircuits.
pub fn census_top(circuit: &Circuit) -> DeviceCensus {
    let mut memo = HashMap::new();
    let mut total = local_census(&circuit.top, &circuit.models);
    for inst in &circuit.top.instances {
        total = total + census_memo(circuit, &inst.subckt, &mut memo);
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreaReport {
    pub inverter_cells: usize,
    pub baseline_cells: usize,
    pub cell_area_um2: f64,
    /// Memristors sit above the CMOS layers and add no footprint.
    pub mrl_area_um2: f64,
    pub baseline_area_um2: f64,
    /// Fractional saving, `(baseline - cells) / baseline`.
    pub saving: f64,
}

pub fn area_report(
    census: &DeviceCensus,
    baseline_cells: usize,
    cell_area_um2: f64,
) -> Result<AreaReport, GenError> {
    if baseline_cells == 0 {
        return Err(GenError::ZeroBaseline);
    }
    let cells = census.inverter_cells;
    Ok(AreaReport {
        inverter_cells: cells,
        baseline_cells,
        cell_area_um2,
        mrl_area_um2: cells as f64 * cell_area_um2,
        baseline_area_um2: baseline_cells as f64 * cell_area_um2,
        saving: (baseline_cells as f64 - cells as f64) / baseline_cells as f64,
    })
}
