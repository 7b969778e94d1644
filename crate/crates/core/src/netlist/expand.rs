use std::collections::HashMap;

use serde::Serialize;

use super::{is_ground, Body, Circuit, Element, ModelKind, NetlistError, Source, GROUND};
use crate::device::{MemristorParams, MosfetParams};

/// Default state applied to memristors declared without `x0`.
pub const DEFAULT_X0: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FlatElement {
    Resistor {
        resistance: f64,
    },
    Capacitor {
        capacitance: f64,
        ic: f64,
    },
    VSource(Source),
    /// `nodes[0]` is always the bar side after expansion; polarity flips are
    /// resolved by swapping terminals.
    Memristor {
        params: MemristorParams,
        x0: f64,
        x0_given: bool,
    },
    Mosfet {
        params: MosfetParams,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatDevice {
    pub name: String,
    pub nodes: Vec<usize>,
    pub element: FlatElement,
}

/// Fully expanded circuit. Net 0 is ground.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatCircuit {
    pub nets: Vec<String>,
    pub devices: Vec<FlatDevice>,
}

impl FlatCircuit {
    pub fn net_index(&self, name: &str) -> Option<usize> {
        if is_ground(name) {
            return Some(0);
        }
        self.nets.iter().position(|n| n == name)
    }

    pub fn device_index(&self, name: &str) -> Option<usize> {
        self.devices.iter().position(|d| d.name == name)
    }

    pub fn sources(&self) -> impl Iterator<Item = (usize, &FlatDevice)> {
        self.devices
            .iter()
            .enumerate()
            .filter(|(_, d)| matches!(d.element, FlatElement::VSource(_)))
    }

    pub fn memristors(&self) -> impl Iterator<Item = (usize, &FlatDevice)> {
        self.devices
            .iter()
            .enumerate()
            .filter(|(_, d)| matches!(d.element, FlatElement::Memristor { .. }))
    }
}

struct Expander<'a> {
    circuit: &'a Circuit,
    nets: Vec<String>,
    net_ids: HashMap<String, usize>,
    devices: Vec<FlatDevice>,
    memristor_models: HashMap<String, MemristorParams>,
    mosfet_models: HashMap<String, MosfetParams>,
}

impl<'a> Expander<'a> {
    fn net(&mut self, name: &str) -> usize {
        if is_ground(name) {
            return 0;
        }
        if let Some(&id) = self.net_ids.get(name) {
            return id;
        }
        let id = self.nets.len();
        self.nets.push(name.to_string());
        self.net_ids.insert(name.to_string(), id);
        id
    }

    fn model(&self, device: &str, name: &str) -> Result<&'a super::Model, NetlistError> {
        self.circuit
            .models
            .get(name)
            .ok_or_else(|| NetlistError::UndefinedModel {
                device: device.to_string(),
                model: name.to_string(),
            })
    }

    fn memristor_params(&mut self, device: &str, name: &str) -> Result<MemristorParams, NetlistError> {
        if let Some(p) = self.memristor_models.get(name) {
            return Ok(*p);
        }
        let model = self.model(device, name)?;
        if model.kind != ModelKind::Memristor {
            return Err(NetlistError::ModelKind {
                device: device.to_string(),
                model: name.to_string(),
                expected: "memristor",
                found: model.kind.keyword(),
            });
        }
        let p = model.memristor_params()?;
        self.memristor_models.insert(name.to_string(), p);
        Ok(p)
    }

    fn mosfet_params(&mut self, device: &str, name: &str) -> Result<MosfetParams, NetlistError> {
        if let Some(p) = self.mosfet_models.get(name) {
            return Ok(*p);
        }
        let model = self.model(device, name)?;
        if model.kind == ModelKind::Memristor {
            return Err(NetlistError::ModelKind {
                device: device.to_string(),
                model: name.to_string(),
                expected: "nmos or pmos",
                found: model.kind.keyword(),
            });
        }
        let p = model.mosfet_params()?;
        self.mosfet_models.insert(name.to_string(), p);
        Ok(p)
    }

    /// `bind` maps local net names of this scope to global names.
    fn body(
        &mut self,
        body: &Body,
        prefix: &str,
        bind: &HashMap<String, String>,
        stack: &mut Vec<String>,
    ) -> Result<(), NetlistError> {
        let resolve = |local: &str| -> String {
            if is_ground(local) {
                GROUND.to_string()
            } else if let Some(global) = bind.get(local) {
                global.clone()
            } else {
                format!("{prefix}{local}")
            }
        };
        for d in &body.devices {
            let name = format!("{prefix}{}", d.name);
            let mut nodes: Vec<usize> = d.terminals.iter().map(|t| self.net(&resolve(t))).collect();
            let element = match &d.element {
                Element::Resistor { resistance } => FlatElement::Resistor {
                    resistance: *resistance,
                },
                Element::Capacitor { capacitance, ic } => FlatElement::Capacitor {
                    capacitance: *capacitance,
                    ic: ic.unwrap_or(0.0),
                },
                Element::VSource(s) => FlatElement::VSource(s.clone()),
                Element::Memristor { model, x0, polarity } => {
                    if *polarity < 0 {
                        nodes.swap(0, 1);
                    }
                    FlatElement::Memristor {
                        params: self.memristor_params(&name, model)?,
                        x0: x0.unwrap_or(DEFAULT_X0),
                        x0_given: x0.is_some(),
                    }
                }
                Element::Mosfet { model } => FlatElement::Mosfet {
                    params: self.mosfet_params(&name, model)?,
                },
            };
            self.devices.push(FlatDevice {
                name,
                nodes,
                element,
            });
        }
        for inst in &body.instances {
            let sub = self
                .circuit
                .subckts
                .get(&inst.subckt)
                .ok_or_else(|| NetlistError::UndefinedSubckt(inst.subckt.clone()))?;
            if stack.contains(&sub.name) {
                let mut chain = stack.clone();
                chain.push(sub.name.clone());
                return Err(NetlistError::Recursion(chain.join(" -> ")));
            }
            if sub.ports.len() != inst.ports.len() {
                return Err(NetlistError::PortCount {
                    instance: format!("{prefix}{}", inst.name),
                    subckt: sub.name.clone(),
                    expected: sub.ports.len(),
                    found: inst.ports.len(),
                });
            }
            let child_bind: HashMap<String, String> = sub
                .ports
                .iter()
                .zip(&inst.ports)
                .map(|(port, actual)| (port.clone(), resolve(actual)))
                .collect();
            let child_prefix = format!("{prefix}{}.", inst.name);
            stack.push(sub.name.clone());
            self.body(&sub.body, &child_prefix, &child_bind, stack)?;
            stack.pop();
        }
        Ok(())
    }
}

/// Inlines every subcircuit instance, naming inner devices and nets by their
/// dot-separated instance path. Net numbering follows first use in a
/// depth-first walk, devices before instances, so it is stable for equal input.
pub fn expand(circuit: &Circuit) -> Result<FlatCircuit, NetlistError> {
    let mut ex = Expander {
        circuit,
        nets: vec![GROUND.to_string()],
        net_ids: HashMap::new(),
        devices: Vec::new(),
        memristor_models: HashMap::new(),
        mosfet_models: HashMap::new(),
    };
    ex.body(&circuit.top, "", &HashMap::new(), &mut Vec::new())?;
    Ok(FlatCircuit {
        nets: ex.nets,
        devices: ex.devices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse;

    #[test]
    fn instance_paths() {
        let text = "t\n.model mr memristor\n.subckt pair a b\nYM1 a m mr\nYM2 m b mr x0=1\n.ends\nV1 in 0 DC 1\nX1 in gnd pair\n.end";
        let flat = expand(&parse(text).unwrap()).unwrap();
        let names: Vec<_> = flat.devices.iter().map(|d| d.name.as_str()).collect();
        assert_eq!(names, vec!["V1", "X1.YM1", "X1.YM2"]);
        assert_eq!(flat.nets, vec!["0", "in", "X1.m"]);
        assert_eq!(flat.devices[2].nodes, vec![2, 0]);
        assert!(matches!(flat.devices[1].element, FlatElement::Memristor { x0, x0_given: false, .. } if x0 == 0.5));
    }

    #[test]
    fn polarity_flip_swaps_terminals() {
        let text = "t\n.model mr memristor\nY1 a b mr polarity=-1\nR1 a 0 1\nR2 b 0 1\n.end";
        let flat = expand(&parse(text).unwrap()).unwrap();
        assert_eq!(flat.devices[0].nodes, vec![2, 1]);
    }

    #[test]
    fn empty_circuit_has_only_ground() {
        let flat = expand(&parse("t\n.end").unwrap()).unwrap();
        assert_eq!(flat.nets, vec!["0"]);
        assert!(flat.devices.is_empty());
    }

    #[test]
    fn recursion_is_detected() {
        let text = "t\n.subckt loop a\nX1 a loop\n.ends\nX1 n loop\n.end";
        assert!(matches!(expand(&parse(text).unwrap()), Err(NetlistError::Recursion(_))));
    }

    #[test]
    fn undefined_and_mismatched() {
        let c = parse("t\nX1 a b nothing\n.end").unwrap();
        assert!(matches!(expand(&c), Err(NetlistError::UndefinedSubckt(_))));
        let c = parse("t\n.subckt s a b\nR1 a b 1\n.ends\nX1 a s\n.end").unwrap();
        assert!(matches!(expand(&c), Err(NetlistError::PortCount { expected: 2, found: 1, .. })));
        let c = parse("t\nY1 a 0 nomodel\n.end").unwrap();
        assert!(matches!(expand(&c), Err(NetlistError::UndefinedModel { .. })));
        let c = parse("t\n.model n nmos\nY1 a 0 n\n.end").unwrap();
        assert!(matches!(expand(&c), Err(NetlistError::ModelKind { .. })));
    }

    #[test]
    fn nested_expansion_is_deterministic() {
        let text = "t\n.model mr memristor\n.subckt leaf a b\nY1 a i mr\nR1 i b 1k\n.ends\n.subckt mid p q\nX1 p n leaf\nX2 n q leaf\n.ends\nX1 u 0 mid\nX2 u v mid\nR9 v 0 1\n.end";
        let c = parse(text).unwrap();
        let a = expand(&c).unwrap();
        let b = expand(&c).unwrap();
        assert_eq!(a, b);
        assert!(a.nets.contains(&"X2.X1.i".to_string()));
        for d in &a.devices {
            assert!(d.nodes.iter().all(|&n| n < a.nets.len()));
        }
    }
}
