//! Hierarchical netlists: data model, SPICE-like text grammar, subcircuit
//! expansion and structural validation.
//!
//! Grammar accepted by [`parse`]:
//!
//! ```text
//! <title line>
//! R<name> n+ n- <value>
//! C<name> n+ n- <value> [ic=<v0>]
//! V<name> n+ n- DC <value> | PWL( t1 v1 t2 v2 ... )
//! Y<name> n+ n- <modelname> [x0=<val>] [polarity=1|-1]
//! M<name> nd ng ns nb <modelname>
//! X<name> <ports...> <subcktname>
//! .model <name> memristor|nmos|pmos <key>=<val> ...
//! .subckt <name> <ports...> / .ends
//! .tran <tstep> <tstop>
//! .end
//! ```
//!
//! Ground is spelled `0` or `gnd`. Full-line comments start with `*`,
//! trailing comments with `;`, and a line starting with `+` continues the
//! previous one.

mod expand;
mod parse;
pub(crate) mod validate;
mod write;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::device::{MemristorParams, MosfetParams};

pub use expand::{expand, FlatCircuit, FlatDevice, FlatElement};
pub use parse::{parse, parse_value};
pub use validate::{validate, Diagnostic, DiagnosticKind, Severity};
pub use write::format_value;

/// Canonical name of the ground net.
pub const GROUND: &str = "0";

pub fn is_ground(net: &str) -> bool {
    net == "0" || net.eq_ignore_ascii_case("gnd")
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetlistError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: unknown device prefix '{prefix}' in '{name}'")]
    UnknownDevice {
        line: usize,
        prefix: char,
        name: String,
    },
    #[error("line {line}: {name} expects {expected}, found {found} fields")]
    Arity {
        line: usize,
        name: String,
        expected: String,
        found: usize,
    },
    #[error("line {line}: duplicate name '{name}'")]
    Duplicate { line: usize, name: String },
    #[error("line {line}, column {column}: malformed number '{text}'")]
    Number {
        line: usize,
        column: usize,
        text: String,
    },
    #[error("undefined subcircuit '{0}'")]
    UndefinedSubckt(String),
    #[error("instance '{instance}' binds {found} nets but subcircuit '{subckt}' has {expected} ports")]
    PortCount {
        instance: String,
        subckt: String,
        expected: usize,
        found: usize,
    },
    #[error("recursive subcircuit instantiation: {0}")]
    Recursion(String),
    #[error("undefined model '{model}' used by '{device}'")]
    UndefinedModel { device: String, model: String },
    #[error("model '{model}' has kind {found}, but '{device}' needs {expected}")]
    ModelKind {
        device: String,
        model: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("model '{model}': {message}")]
    ModelParam { model: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Source {
    Dc(f64),
    /// Piecewise-linear `(time, value)` breakpoints, times non-decreasing.
    Pwl(Vec<(f64, f64)>),
}

impl Source {
    /// Value at time `t`; PWL holds its first value before the first point
    /// and its last value after the last one.
    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            Source::Dc(v) => *v,
            Source::Pwl(points) => {
                let Some(&(t0, v0)) = points.first() else {
                    return 0.0;
                };
                if t <= t0 {
                    return v0;
                }
                // first breakpoint strictly after t
                let idx = points.partition_point(|&(pt, _)| pt <= t);
                if idx >= points.len() {
                    return points[points.len() - 1].1;
                }
                let (ta, va) = points[idx - 1];
                let (tb, vb) = points[idx];
                if tb == ta {
                    vb
                } else {
                    va + (vb - va) * (t - ta) / (tb - ta)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DeviceKind {
    Memristor,
    Mosfet,
    Resistor,
    Capacitor,
    VSource,
}

impl DeviceKind {
    pub fn arity(self) -> usize {
        match self {
            DeviceKind::Mosfet => 4,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Element {
    Resistor {
        resistance: f64,
    },
    Capacitor {
        capacitance: f64,
        ic: Option<f64>,
    },
    VSource(Source),
    /// Terminal order is [bar side, other side] unless `polarity` is -1.
    Memristor {
        model: String,
        x0: Option<f64>,
        polarity: i8,
    },
    /// Terminals are [drain, gate, source, bulk].
    Mosfet {
        model: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Device {
    pub name: String,
    pub terminals: Vec<String>,
    pub element: Element,
}

impl Device {
    pub fn kind(&self) -> DeviceKind {
        match self.element {
            Element::Resistor { .. } => DeviceKind::Resistor,
            Element::Capacitor { .. } => DeviceKind::Capacitor,
            Element::VSource(_) => DeviceKind::VSource,
            Element::Memristor { .. } => DeviceKind::Memristor,
            Element::Mosfet { .. } => DeviceKind::Mosfet,
        }
    }

    pub fn resistor(name: &str, a: &str, b: &str, resistance: f64) -> Self {
        Self::new(name, &[a, b], Element::Resistor { resistance })
    }

    pub fn capacitor(name: &str, a: &str, b: &str, capacitance: f64) -> Self {
        Self::new(
            name,
            &[a, b],
            Element::Capacitor {
                capacitance,
                ic: None,
            },
        )
    }

    pub fn vsource(name: &str, plus: &str, minus: &str, source: Source) -> Self {
        Self::new(name, &[plus, minus], Element::VSource(source))
    }

    pub fn memristor(name: &str, bar: &str, other: &str, model: &str, x0: Option<f64>) -> Self {
        Self::new(
            name,
            &[bar, other],
            Element::Memristor {
                model: model.to_string(),
                x0,
                polarity: 1,
            },
        )
    }

    pub fn mosfet(name: &str, drain: &str, gate: &str, source: &str, bulk: &str, model: &str) -> Self {
        Self::new(
            name,
            &[drain, gate, source, bulk],
            Element::Mosfet {
                model: model.to_string(),
            },
        )
    }

    fn new(name: &str, terminals: &[&str], element: Element) -> Self {
        Self {
            name: name.to_string(),
            terminals: terminals.iter().map(|t| t.to_string()).collect(),
            element,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Instance {
    pub name: String,
    pub ports: Vec<String>,
    pub subckt: String,
}

impl Instance {
    pub fn new(name: &str, ports: &[&str], subckt: &str) -> Self {
        Self {
            name: name.to_string(),
            ports: ports.iter().map(|p| p.to_string()).collect(),
            subckt: subckt.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Body {
    pub devices: Vec<Device>,
    pub instances: Vec<Instance>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Subckt {
    pub name: String,
    pub ports: Vec<String>,
    pub body: Body,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ModelKind {
    Memristor,
    Nmos,
    Pmos,
}

impl ModelKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ModelKind::Memristor => "memristor",
            ModelKind::Nmos => "nmos",
            ModelKind::Pmos => "pmos",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Model {
    pub name: String,
    pub kind: ModelKind,
    pub params: BTreeMap<String, f64>,
}

impl Model {
    pub fn new(name: &str, kind: ModelKind) -> Self {
        Self {
            name: name.to_string(),
            kind,
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn from_memristor(name: &str, p: &MemristorParams) -> Self {
        use crate::device::{StateMap, Window};
        Model::new(name, ModelKind::Memristor)
            .with("r_on", p.r_on)
            .with("r_off", p.r_off)
            .with("l_disc", p.l_disc)
            .with("l_taox", p.l_taox)
            .with("area", p.area)
            .with("n_min", p.n_min)
            .with("n_max", p.n_max)
            .with("z_v0", p.z_v0)
            .with("c31", p.c31)
            .with("v_char", p.v_char)
            .with("p", p.window_exponent)
            .with(
                "window",
                match p.window {
                    Window::Biolek => 1.0,
                    Window::Joglekar => 2.0,
                },
            )
            .with(
                "state_map",
                match p.state_map {
                    StateMap::ConductanceLinear => 0.0,
                    StateMap::ResistanceLinear => 1.0,
                },
            )
    }

    pub fn from_mosfet(name: &str, p: &MosfetParams) -> Self {
        use crate::device::Polarity;
        let kind = match p.polarity {
            Polarity::N => ModelKind::Nmos,
            Polarity::P => ModelKind::Pmos,
        };
        Model::new(name, kind)
            .with("v_th", p.v_th)
            .with("r_ds_on", p.r_ds_on)
            .with("r_ds_off", p.r_ds_off)
    }

    /// Resolves the card into memristor parameters; unset keys keep defaults.
    pub fn memristor_params(&self) -> Result<MemristorParams, NetlistError> {
        use crate::device::{StateMap, Window};
        let mut p = MemristorParams::default();
        for (key, &v) in &self.params {
            match key.as_str() {
                "r_on" => p.r_on = v,
                "r_off" => p.r_off = v,
                "l_disc" => p.l_disc = v,
                "l_taox" => p.l_taox = v,
                "area" => p.area = v,
                "n_min" => p.n_min = v,
                "n_max" => p.n_max = v,
                "z_v0" => p.z_v0 = v,
                "c31" => p.c31 = v,
                "v_char" => p.v_char = v,
                "p" => p.window_exponent = v,
                "window" => {
                    p.window = match v as i64 {
                        1 => Window::Biolek,
                        2 => Window::Joglekar,
                        _ => return Err(self.param_error("window must be 1 (biolek) or 2 (joglekar)")),
                    }
                }
                "state_map" => {
                    p.state_map = match v as i64 {
                        0 => StateMap::ConductanceLinear,
                        1 => StateMap::ResistanceLinear,
                        _ => return Err(self.param_error("state_map must be 0 or 1")),
                    }
                }
                other => return Err(self.param_error(&format!("unknown parameter '{other}'"))),
            }
        }
        p.validate()
            .map_err(|e| self.param_error(&e.to_string()))?;
        Ok(p)
    }

    pub fn mosfet_params(&self) -> Result<MosfetParams, NetlistError> {
        let mut p = match self.kind {
            ModelKind::Pmos => MosfetParams::pmos(),
            _ => MosfetParams::nmos(),
        };
        for (key, &v) in &self.params {
            match key.as_str() {
                "v_th" | "vth" => p.v_th = v,
                "r_ds_on" | "ron" => p.r_ds_on = v,
                "r_ds_off" | "roff" => p.r_ds_off = v,
                other => return Err(self.param_error(&format!("unknown parameter '{other}'"))),
            }
        }
        p.validate()
            .map_err(|e| self.param_error(&e.to_string()))?;
        Ok(p)
    }

    fn param_error(&self, message: &str) -> NetlistError {
        NetlistError::ModelParam {
            model: self.name.clone(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Analysis {
    Tran { tstep: f64, tstop: f64 },
}

/// A parsed, possibly hierarchical circuit.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Circuit {
    pub title: String,
    pub top: Body,
    pub subckts: BTreeMap<String, Subckt>,
    pub models: BTreeMap<String, Model>,
    pub analyses: Vec<Analysis>,
}

impl Circuit {
    pub fn new(title: &str) -> Self {
        Self {
            title: title.to_string(),
            ..Default::default()
        }
    }

    pub fn add_model(&mut self, model: Model) {
        self.models.insert(model.name.clone(), model);
    }

    pub fn add_subckt(&mut self, subckt: Subckt) {
        self.subckts.insert(subckt.name.clone(), subckt);
    }

    /// Copies every subcircuit and model of `other` into `self`.
    pub fn merge_library(&mut self, other: &Circuit) {
        for s in other.subckts.values() {
            self.subckts.entry(s.name.clone()).or_insert_with(|| s.clone());
        }
        for m in other.models.values() {
            self.models.entry(m.name.clone()).or_insert_with(|| m.clone());
        }
    }

    pub fn tran(&self) -> Option<(f64, f64)> {
        self.analyses.iter().find_map(|a| match *a {
            Analysis::Tran { tstep, tstop } => Some((tstep, tstop)),
        })
    }
}
