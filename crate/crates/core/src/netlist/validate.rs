use std::fmt;

use serde::Serialize;

use super::{FlatCircuit, FlatElement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum DiagnosticKind {
    /// Net touched by exactly one device terminal and not driven by a source.
    FloatingNet { net: String },
    /// Net with no conductive path to ground.
    NoDcPath { net: String },
    /// Memristor without `x0`; the default state was applied.
    DefaultState { device: String },
    /// Terminal refers to a net index outside the net table.
    BadNetIndex { device: String, index: usize },
    /// Net table does not start with ground.
    MissingGround,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub kind: DiagnosticKind,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        match &self.kind {
            DiagnosticKind::FloatingNet { net } => write!(f, "{level}: net '{net}' is floating (single terminal)"),
            DiagnosticKind::NoDcPath { net } => write!(f, "{level}: net '{net}' has no DC path to ground"),
            DiagnosticKind::DefaultState { device } => {
                write!(f, "{level}: memristor '{device}' has no x0, using {}", super::expand::DEFAULT_X0)
            }
            DiagnosticKind::BadNetIndex { device, index } => {
                write!(f, "{level}: device '{device}' refers to missing net index {index}")
            }
            DiagnosticKind::MissingGround => write!(f, "{level}: circuit has no ground net"),
        }
    }
}

fn find(parent: &mut [usize], mut a: usize) -> usize {
    while parent[a] != a {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    a
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra.max(rb)] = ra.min(rb);
    }
}

/// Terminal pairs that conduct at DC (capacitors and MOSFET gates do not).
pub(crate) fn dc_edges(device: &super::FlatDevice) -> Vec<(usize, usize)> {
    match device.element {
        FlatElement::Capacitor { .. } => Vec::new(),
        FlatElement::Mosfet { .. } => vec![(device.nodes[0], device.nodes[2])],
        _ => vec![(device.nodes[0], device.nodes[1])],
    }
}

/// Nets (by index) that cannot reach ground through `edges`.
pub(crate) fn unreachable_from_ground(
    net_count: usize,
    edges: impl IntoIterator<Item = (usize, usize)>,
) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..net_count).collect();
    for (a, b) in edges {
        union(&mut parent, a, b);
    }
    (1..net_count).filter(|&n| find(&mut parent, n) != 0).collect()
}

/// Structural checks on an expanded circuit. Problems are returned as data.
pub fn validate(flat: &FlatCircuit) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let n = flat.nets.len();
    if n == 0 || !super::is_ground(&flat.nets[0]) {
        out.push(Diagnostic {
            severity: Severity::Error,
            kind: DiagnosticKind::MissingGround,
        });
        return out;
    }
    let mut bad = false;
    for d in &flat.devices {
        for &idx in &d.nodes {
            if idx >= n {
                bad = true;
                out.push(Diagnostic {
                    severity: Severity::Error,
                    kind: DiagnosticKind::BadNetIndex {
                        device: d.name.clone(),
                        index: idx,
                    },
                });
            }
        }
    }
    if bad {
        return out;
    }

    let mut touches = vec![0usize; n];
    let mut driven = vec![false; n];
    for d in &flat.devices {
        for &idx in &d.nodes {
            touches[idx] += 1;
        }
        if matches!(d.element, FlatElement::VSource(_)) {
            for &idx in &d.nodes {
                driven[idx] = true;
            }
        }
    }
    for net in 1..n {
        if touches[net] == 1 && !driven[net] {
            out.push(Diagnostic {
                severity: Severity::Warning,
                kind: DiagnosticKind::FloatingNet {
                    net: flat.nets[net].clone(),
                },
            });
        }
    }
    let unreachable = unreachable_from_ground(n, flat.devices.iter().flat_map(dc_edges));
    for net in unreachable {
        out.push(Diagnostic {
            severity: Severity::Warning,
            kind: DiagnosticKind::NoDcPath {
                net: flat.nets[net].clone(),
            },
        });
    }
    for d in &flat.devices {
        if let FlatElement::Memristor { x0_given: false, .. } = d.element {
            out.push(Diagnostic {
                severity: Severity::Warning,
                kind: DiagnosticKind::DefaultState {
                    device: d.name.clone(),
                },
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{expand, parse};

    fn diags(text: &str) -> Vec<Diagnostic> {
        validate(&expand(&parse(text).unwrap()).unwrap())
    }

    #[test]
    fn clean_divider() {
        let d = diags("t\n.model mr memristor\nV1 vdd 0 DC 1\nY1 vdd out mr x0=1\nY2 out 0 mr x0=0\n.end");
        assert!(d.is_empty(), "{d:?}");
    }

    #[test]
    fn capacitor_only_node() {
        let d = diags("t\nV1 in 0 DC 1\nR1 in 0 1k\nC1 in out 1p\n.end");
        assert!(d.iter().any(|x| x.kind == DiagnosticKind::NoDcPath { net: "out".into() }));
        assert!(d.iter().all(|x| x.severity == Severity::Warning));
    }

    #[test]
    fn default_state_warning() {
        let d = diags("t\n.model mr memristor\nV1 a 0 DC 1\nY1 a 0 mr\n.end");
        assert_eq!(
            d,
            vec![Diagnostic {
                severity: Severity::Warning,
                kind: DiagnosticKind::DefaultState { device: "Y1".into() }
            }]
        );
    }

    #[test]
    fn gate_only_net_is_floating() {
        let d = diags("t\n.model n nmos\nV1 d 0 DC 1\nM1 d g 0 0 n\n.end");
        assert!(d.iter().any(|x| x.kind == DiagnosticKind::FloatingNet { net: "g".into() }));
        assert!(d.iter().any(|x| x.kind == DiagnosticKind::NoDcPath { net: "g".into() }));
    }

    #[test]
    fn bad_index_is_an_error() {
        let mut flat = expand(&parse("t\nR1 a 0 1\n.end").unwrap()).unwrap();
        flat.devices[0].nodes[0] = 9;
        let d = validate(&flat);
        assert_eq!(d[0].severity, Severity::Error);
    }
}
