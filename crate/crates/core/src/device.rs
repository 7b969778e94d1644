//! Behavioral device models: the Pt/TaOx/Ta memristor and a switch-level MOSFET.
//!
//! Everything here is a pure function over small value types so the transient
//! engine can evaluate devices from any number of concurrent runs.

use serde::Serialize;
use thiserror::Error;

/// Elementary charge in coulombs.
pub const ELEMENTARY_CHARGE: f64 = 1.602176634e-19;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("invalid memristor parameters: {0}")]
    Memristor(String),
    #[error("invalid mosfet parameters: {0}")]
    Mosfet(String),
}

/// How the normalized state maps onto device resistance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StateMap {
    /// G(x) = x/R_on + (1-x)/R_off
    ConductanceLinear,
    /// R(x) = x*R_on + (1-x)*R_off
    ResistanceLinear,
}

/// Window applied to the state drift so the state saturates at its rails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Window {
    /// Direction dependent: `1 - x^2p` while rising, `1 - (1-x)^2p` while falling.
    Biolek,
    /// Direction independent: `1 - (2x-1)^2p`.
    Joglekar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemristorParams {
    /// Low resistance state, logic 1 (Ω).
    pub r_on: f64,
    /// High resistance state, logic 0 (Ω).
    pub r_off: f64,
    /// Disc length (m).
    pub l_disc: f64,
    /// Total oxide length, disc plus plug (m).
    pub l_taox: f64,
    /// Filament cross-section (m²).
    pub area: f64,
    /// Vacancy concentration at x = 0 (m⁻³).
    pub n_min: f64,
    /// Vacancy concentration at x = 1 (m⁻³).
    pub n_max: f64,
    /// Charge number of the oxygen vacancies.
    pub z_v0: f64,
    /// Ionic-current coefficient (A·m/V).
    pub c31: f64,
    /// Characteristic voltage of the sinh ionic-current law (V).
    pub v_char: f64,
    pub window_exponent: f64,
    pub window: Window,
    pub state_map: StateMap,
}

impl Default for MemristorParams {
    fn default() -> Self {
        Self {
            r_on: 1e3,
            r_off: 1e6,
            l_disc: 4e-9,
            l_taox: 11e-9,
            area: 3.14e-14,
            n_min: 4e25,
            n_max: 2e27,
            z_v0: 2.0,
            c31: 6e-12,
            v_char: 0.25,
            window_exponent: 1.0,
            window: Window::Biolek,
            state_map: StateMap::ConductanceLinear,
        }
    }
}

impl MemristorParams {
    pub fn validate(&self) -> Result<(), DeviceError> {
        let fail = |m: &str| Err(DeviceError::Memristor(m.to_string()));
        if !(self.r_on > 0.0 && self.r_off > self.r_on) {
            return fail("require r_off > r_on > 0");
        }
        if !(self.n_min >= 0.0 && self.n_max > self.n_min) {
            return fail("require n_max > n_min >= 0");
        }
        if !(self.l_disc > 0.0 && self.l_taox > self.l_disc) {
            return fail("require l_taox > l_disc > 0");
        }
        if !(self.area > 0.0) {
            return fail("require area > 0");
        }
        if !(self.z_v0 > 0.0 && self.c31 > 0.0 && self.v_char > 0.0) {
            return fail("require z_v0, c31 and v_char > 0");
        }
        if !(self.window_exponent > 0.0) {
            return fail("require window_exponent > 0");
        }
        Ok(())
    }

    /// Length of the plug zone in series with the disc.
    pub fn l_plug(&self) -> f64 {
        self.l_taox - self.l_disc
    }

    /// Ionic current driving vacancy migration for a device voltage `v`.
    pub fn ionic_current(&self, v: f64) -> f64 {
        -(self.c31 / self.l_disc) * (v / self.v_char).sinh()
    }

    fn window_factor(&self, x: f64, rising: bool) -> f64 {
        let p2 = 2.0 * self.window_exponent;
        match self.window {
            Window::Biolek if rising => 1.0 - x.powf(p2),
            Window::Biolek => 1.0 - (1.0 - x).powf(p2),
            Window::Joglekar => 1.0 - (2.0 * x - 1.0).abs().powf(p2),
        }
    }
}

/// Normalized vacancy concentration, `x = (N - N_min) / (N_max - N_min)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct MemristorState(f64);

impl MemristorState {
    pub const OFF: MemristorState = MemristorState(0.0);
    pub const ON: MemristorState = MemristorState(1.0);

    /// Builds a state, clamping into `[0, 1]`.
    pub fn new(x: f64) -> Self {
        MemristorState(x.clamp(0.0, 1.0))
    }

    pub fn x(self) -> f64 {
        self.0
    }

    pub fn from_concentration(n: f64, params: &MemristorParams) -> Self {
        Self::new((n - params.n_min) / (params.n_max - params.n_min))
    }

    pub fn concentration(self, params: &MemristorParams) -> f64 {
        params.n_min + self.0 * (params.n_max - params.n_min)
    }
}

/// State-dependent resistance of the device.
pub fn memristance(state: MemristorState, params: &MemristorParams) -> f64 {
    let x = state.x();
    match params.state_map {
        StateMap::ConductanceLinear => 1.0 / (x / params.r_on + (1.0 - x) / params.r_off),
        StateMap::ResistanceLinear => x * params.r_on + (1.0 - x) * params.r_off,
    }
}

/// Time derivative of the normalized state for a voltage `v` across the device,
/// measured from the bar (polarity) terminal to the other one.
///
/// Positive `v` drives the device toward `R_on`.
pub fn state_derivative(state: MemristorState, v: f64, params: &MemristorParams) -> f64 {
    let i_ion = params.ionic_current(v);
    let dn_dt = -i_ion / (ELEMENTARY_CHARGE * params.z_v0 * params.area * params.l_disc);
    let dx_dt = dn_dt / (params.n_max - params.n_min);
    if dx_dt == 0.0 {
        return 0.0;
    }
    let w = params.window_factor(state.x(), dx_dt > 0.0).max(0.0);
    dx_dt * w
}

pub fn memristor_current(state: MemristorState, v: f64, params: &MemristorParams) -> f64 {
    v / memristance(state, params)
}

/// Advances `state` over `dt` under a constant device voltage using
/// `substeps` explicit midpoint steps, clamping to `[0, 1]` after each one.
pub fn advance_state(
    state: MemristorState,
    v: f64,
    dt: f64,
    substeps: usize,
    params: &MemristorParams,
) -> MemristorState {
    let h = dt / substeps.max(1) as f64;
    let mut s = state;
    for _ in 0..substeps.max(1) {
        let k1 = state_derivative(s, v, params);
        let mid = MemristorState::new(s.x() + 0.5 * h * k1);
        let k2 = state_derivative(mid, v, params);
        s = MemristorState::new(s.x() + h * k2);
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Polarity {
    N,
    P,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MosfetParams {
    pub polarity: Polarity,
    pub v_th: f64,
    pub r_ds_on: f64,
    pub r_ds_off: f64,
}

impl MosfetParams {
    pub fn nmos() -> Self {
        Self {
            polarity: Polarity::N,
            v_th: 0.4,
            r_ds_on: 100.0,
            r_ds_off: 1e9,
        }
    }

    pub fn pmos() -> Self {
        Self {
            polarity: Polarity::P,
            ..Self::nmos()
        }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        if !(self.v_th > 0.0) {
            return Err(DeviceError::Mosfet("require v_th > 0".into()));
        }
        if !(self.r_ds_on > 0.0 && self.r_ds_off >= 1000.0 * self.r_ds_on) {
            return Err(DeviceError::Mosfet(
                "require r_ds_off >= 1000 * r_ds_on > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn is_on(&self, v_gs: f64) -> bool {
        match self.polarity {
            Polarity::N => v_gs > self.v_th,
            Polarity::P => v_gs < -self.v_th,
        }
    }
}

/// Switch-level channel conductance. `_v_ds` is unused by this model.
pub fn mosfet_conductance(v_gs: f64, _v_ds: f64, params: &MosfetParams) -> f64 {
    if params.is_on(v_gs) {
        1.0 / params.r_ds_on
    } else {
        1.0 / params.r_ds_off
    }
}
