//! Boolean reference semantics for every generated block.

use serde::Serialize;
use thiserror::Error;

use crate::gates::{GateKind, XaxWiring};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{kind:?} takes {expected} inputs, got {found}")]
pub struct ArityError {
    pub kind: GateKind,
    pub expected: usize,
    pub found: usize,
}

pub fn eval_gate(kind: GateKind, inputs: &[bool]) -> Result<bool, ArityError> {
    let expected = kind.input_count();
    if inputs.len() != expected {
        return Err(ArityError {
            kind,
            expected,
            found: inputs.len(),
        });
    }
    Ok(match kind {
        GateKind::Not => !inputs[0],
        GateKind::And => inputs[0] && inputs[1],
        GateKind::Or => inputs[0] || inputs[1],
        GateKind::Nand => !(inputs[0] && inputs[1]),
        GateKind::Nor => !(inputs[0] || inputs[1]),
        GateKind::Xor => inputs[0] ^ inputs[1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ClockEdge {
    Rising,
    None,
}

pub fn step_dff(d: bool, edge: ClockEdge, q: bool) -> bool {
    match edge {
        ClockEdge::Rising => d,
        ClockEdge::None => q,
    }
}

/// Level-sensitive latch: transparent while `en` is high.
pub fn step_dlatch(d: bool, en: bool, q: bool) -> bool {
    if en {
        d
    } else {
        q
    }
}

/// The three register bits of an XAX cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub struct XaxState {
    pub xr: bool,
    pub ar: bool,
    pub acc: bool,
}

impl XaxState {
    pub fn from_index(i: usize) -> Self {
        Self {
            xr: i & 4 != 0,
            ar: i & 2 != 0,
            acc: i & 1 != 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct XaxOutputs {
    pub x_out: bool,
    pub acc_out: bool,
}

/// One clock cycle of the default XAX wiring: outputs observed before the
/// edge, then the register update.
pub fn step_xax(x_in: bool, a_in: bool, s_in: bool, state: XaxState) -> (XaxOutputs, XaxState) {
    step_xax_wired(x_in, a_in, s_in, state, &XaxWiring::default())
}

/// Like [`step_xax`] for any register placement. An unregistered stage passes
/// its input straight through, so its state bit simply mirrors the input.
pub fn step_xax_wired(
    x_in: bool,
    a_in: bool,
    s_in: bool,
    state: XaxState,
    wiring: &XaxWiring,
) -> (XaxOutputs, XaxState) {
    let xr = if wiring.x_stage { state.xr } else { x_in };
    let ar = if wiring.a_stage { state.ar } else { a_in };
    let datapath = ((x_in ^ xr) & ar) ^ s_in;
    let acc_now = if wiring.acc_stage { state.acc } else { datapath };
    let outputs = XaxOutputs {
        x_out: xr,
        acc_out: acc_now,
    };
    let next = XaxState {
        xr: x_in,
        ar: a_in,
        acc: datapath,
    };
    (outputs, next)
}
