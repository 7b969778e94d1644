//! Simulation and verification of hybrid memristor-CMOS ratioed logic (MRL).
//!
//! The crate is layered bottom-up:
//!
//! - [`device`]: memristor and switch-level MOSFET models
//! - [`netlist`]: SPICE-like grammar, hierarchy expansion and validation
//! - [`gates`]: generators for MRL gates, latch, flip-flop and the XAX cell
//! - [`engine`]: fixed-step transient analysis
//! - [`measure`]: digitization, slew, delay, energy and waveform export
//! - [`golden`]: Boolean reference models
//! - [`verify`]: analog-versus-golden equivalence checking

pub mod device;
pub mod engine;
pub mod gates;
pub mod golden;
pub mod measure;
pub mod netlist;
pub mod verify;
