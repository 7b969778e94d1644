//! Logic-level digitization, timing, energy and waveform export.
//!
//! Logic thresholds are 30% and 70% of the supply; the same levels define
//! slew. Propagation delay uses 50% crossings.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::engine::{interpolate, Waveform};

pub const LOW_FRACTION: f64 = 0.3;
pub const HIGH_FRACTION: f64 = 0.7;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("unknown signal '{0}'")]
    UnknownSignal(String),
    #[error("unknown source '{0}'")]
    UnknownSource(String),
    #[error("signal '{signal}' has no full transition with index {index}")]
    NoEdge { signal: String, index: usize },
    #[error("output transition at {time:e} s of '{signal}' has no input transition to pair with")]
    Unpaired { signal: String, time: f64 },
    #[error("invalid window [{start:e}, {end:e}] s")]
    Window { start: f64, end: f64 },
    #[error("vdd must be positive, got {0}")]
    Vdd(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Level {
    Zero,
    One,
    X,
}

impl Level {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Level::One
        } else {
            Level::Zero
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Level::Zero => Some(false),
            Level::One => Some(true),
            Level::X => None,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Level::Zero => '0',
            Level::One => '1',
            Level::X => 'x',
        }
    }
}

pub fn classify(v: f64, vdd: f64) -> Level {
    if v >= HIGH_FRACTION * vdd {
        Level::One
    } else if v <= LOW_FRACTION * vdd {
        Level::Zero
    } else {
        Level::X
    }
}

/// Thresholded view of a set of signals. Each signal is a list of
/// `(time, level)` events with no two consecutive levels equal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DigitalTrace {
    pub vdd: f64,
    pub signals: Vec<String>,
    pub events: Vec<Vec<(f64, Level)>>,
}

impl DigitalTrace {
    pub fn events_of(&self, signal: &str) -> Option<&[(f64, Level)]> {
        let idx = self.signals.iter().position(|s| s == signal)?;
        Some(&self.events[idx])
    }

    /// Level in force at time `t` (the last event at or before `t`).
    pub fn level_at(&self, signal: &str, t: f64) -> Option<Level> {
        let events = self.events_of(signal)?;
        let idx = events.partition_point(|&(te, _)| te <= t);
        Some(if idx == 0 { events.first()?.1 } else { events[idx - 1].1 })
    }

    /// Renders the trace back to rail voltages (X at mid-supply) on `time`.
    pub fn to_waveform(&self, time: &[f64]) -> Waveform {
        let voltages = self
            .signals
            .iter()
            .map(|s| {
                time.iter()
                    .map(|&t| match self.level_at(s, t) {
                        Some(Level::One) => self.vdd,
                        Some(Level::Zero) | None => 0.0,
                        Some(Level::X) => 0.5 * self.vdd,
                    })
                    .collect()
            })
            .collect();
        Waveform {
            time: time.to_vec(),
            nets: self.signals.clone(),
            voltages,
            ..Default::default()
        }
    }
}

fn crossing(t0: f64, v0: f64, t1: f64, v1: f64, level: f64) -> f64 {
    if v1 == v0 {
        return t1;
    }
    (t0 + (level - v0) * (t1 - t0) / (v1 - v0)).clamp(t0, t1)
}

fn digitize_one(time: &[f64], ys: &[f64], vdd: f64) -> Vec<(f64, Level)> {
    let (low, high) = (LOW_FRACTION * vdd, HIGH_FRACTION * vdd);
    let mut out: Vec<(f64, Level)> = Vec::new();
    let Some(&first) = ys.first() else {
        return out;
    };
    out.push((time[0], classify(first, vdd)));
    for i in 1..ys.len() {
        let prev = out.last().expect("non-empty").1;
        let next = classify(ys[i], vdd);
        if next == prev {
            continue;
        }
        let (t0, v0, t1, v1) = (time[i - 1], ys[i - 1], time[i], ys[i]);
        match (prev, next) {
            (Level::Zero, Level::One) => {
                out.push((crossing(t0, v0, t1, v1, low), Level::X));
                out.push((crossing(t0, v0, t1, v1, high), Level::One));
            }
            (Level::One, Level::Zero) => {
                out.push((crossing(t0, v0, t1, v1, high), Level::X));
                out.push((crossing(t0, v0, t1, v1, low), Level::Zero));
            }
            (Level::Zero, Level::X) | (Level::X, Level::Zero) => {
                out.push((crossing(t0, v0, t1, v1, low), next))
            }
            _ => out.push((crossing(t0, v0, t1, v1, high), next)),
        }
    }
    out
}

pub fn digitize(wf: &Waveform, signals: &[&str], vdd: f64) -> Result<DigitalTrace, MeasureError> {
    if !(vdd > 0.0) {
        return Err(MeasureError::Vdd(vdd));
    }
    let events = signals
        .iter()
        .map(|&s| {
            let ys = wf.signal(s).ok_or_else(|| MeasureError::UnknownSignal(s.to_string()))?;
            Ok(digitize_one(&wf.time, ys, vdd))
        })
        .collect::<Result<_, MeasureError>>()?;
    Ok(DigitalTrace {
        vdd,
        signals: signals.iter().map(|s| s.to_string()).collect(),
        events,
    })
}

/// A full rail-to-rail transition. `start` is where the signal left its old
/// level and `end` where it reached the new one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub rising: bool,
    pub start: f64,
    pub end: f64,
}

/// Complete 0→1 and 1→0 transitions of one digitized signal. Excursions into
/// X that return to the original level are not edges.
pub fn edges(events: &[(f64, Level)]) -> Vec<Edge> {
    let mut out = Vec::new();
    let mut stable: Option<Level> = None;
    let mut left_at = f64::NAN;
    for &(t, level) in events {
        match (stable, level) {
            (_, Level::X) => {
                if stable.is_some() && left_at.is_nan() {
                    left_at = t;
                }
            }
            (Some(old), new) if old != new => {
                let start = if left_at.is_nan() { t } else { left_at };
                out.push(Edge {
                    rising: new == Level::One,
                    start,
                    end: t,
                });
                stable = Some(new);
                left_at = f64::NAN;
            }
            (_, new) => {
                stable = Some(new);
                left_at = f64::NAN;
            }
        }
    }
    out
}

fn signal_edges(wf: &Waveform, signal: &str, vdd: f64) -> Result<Vec<Edge>, MeasureError> {
    let ys = wf
        .signal(signal)
        .ok_or_else(|| MeasureError::UnknownSignal(signal.to_string()))?;
    Ok(edges(&digitize_one(&wf.time, ys, vdd)))
}

/// 30%-to-70% transition time of the `index`-th full edge of `signal`.
pub fn slew_time(wf: &Waveform, signal: &str, index: usize, vdd: f64) -> Result<f64, MeasureError> {
    let edges = signal_edges(wf, signal, vdd)?;
    let edge = edges.get(index).ok_or_else(|| MeasureError::NoEdge {
        signal: signal.to_string(),
        index,
    })?;
    Ok(edge.end - edge.start)
}

fn mid_crossing(wf: &Waveform, signal: &str, edge: &Edge, vdd: f64) -> f64 {
    let ys = wf.signal(signal).expect("checked by caller");
    let mid = 0.5 * vdd;
    let lo = wf.time.partition_point(|&t| t < edge.start).saturating_sub(1);
    let hi = wf.time.partition_point(|&t| t <= edge.end).min(wf.time.len() - 1);
    for i in lo..hi {
        let (a, b) = (ys[i] - mid, ys[i + 1] - mid);
        let crosses = if edge.rising { a < 0.0 && b >= 0.0 } else { a > 0.0 && b <= 0.0 };
        if crosses {
            return crossing(wf.time[i], ys[i], wf.time[i + 1], ys[i + 1], mid);
        }
    }
    0.5 * (edge.start + edge.end)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelayPair {
    pub t_in: f64,
    pub t_out: f64,
    pub delay: f64,
    /// False when no input transition precedes the output transition.
    pub causal: bool,
}

/// 50%-to-50% delay of every output transition, paired with the latest
/// input transition at or before it. An output transition that precedes
/// every input transition is paired with the first one and flagged.
pub fn propagation_delay(
    wf: &Waveform,
    input: &str,
    output: &str,
    vdd: f64,
) -> Result<Vec<DelayPair>, MeasureError> {
    let ins: Vec<f64> = signal_edges(wf, input, vdd)?
        .iter()
        .map(|e| mid_crossing(wf, input, e, vdd))
        .collect();
    let outs: Vec<f64> = signal_edges(wf, output, vdd)?
        .iter()
        .map(|e| mid_crossing(wf, output, e, vdd))
        .collect();
    outs.into_iter()
        .map(|t_out| {
            let k = ins.partition_point(|&t| t <= t_out);
            let (t_in, causal) = match k {
                0 => match ins.first() {
                    Some(&t) => (t, false),
                    None => {
                        return Err(MeasureError::Unpaired {
                            signal: output.to_string(),
                            time: t_out,
                        })
                    }
                },
                k => (ins[k - 1], true),
            };
            Ok(DelayPair {
                t_in,
                t_out,
                delay: t_out - t_in,
                causal,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Energy {
    pub joules: f64,
    pub avg_watts: f64,
}

fn check_window(wf: &Waveform, (start, end): (f64, f64)) -> Result<(), MeasureError> {
    let (first, last) = match (wf.time.first(), wf.time.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(MeasureError::Window { start, end }),
    };
    if !(start < end && start >= first && end <= last * (1.0 + 1e-12)) {
        return Err(MeasureError::Window { start, end });
    }
    Ok(())
}

/// Energy delivered by `source` over `window`, trapezoid rule on the
/// sampled power with the window ends interpolated.
pub fn supply_energy(wf: &Waveform, source: &str, window: (f64, f64)) -> Result<Energy, MeasureError> {
    let idx = wf
        .sources
        .iter()
        .position(|s| s == source)
        .ok_or_else(|| MeasureError::UnknownSource(source.to_string()))?;
    check_window(wf, window)?;
    let power: Vec<f64> = wf.source_voltages[idx]
        .iter()
        .zip(&wf.source_currents[idx])
        .map(|(v, i)| v * i)
        .collect();
    let (start, end) = window;
    let mut pts = vec![(start, interpolate(&wf.time, &power, start))];
    let lo = wf.time.partition_point(|&t| t <= start);
    let hi = wf.time.partition_point(|&t| t < end);
    pts.extend((lo..hi).map(|i| (wf.time[i], power[i])));
    pts.push((end, interpolate(&wf.time, &power, end)));
    let joules = pts
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum::<f64>();
    Ok(Energy {
        joules,
        avg_watts: joules / (end - start),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupplyReport {
    pub per_supply: Vec<(String, Energy)>,
    pub total: Energy,
}

pub fn supplies_energy(
    wf: &Waveform,
    sources: &[&str],
    window: (f64, f64),
) -> Result<SupplyReport, MeasureError> {
    let per_supply = sources
        .iter()
        .map(|&s| Ok((s.to_string(), supply_energy(wf, s, window)?)))
        .collect::<Result<Vec<_>, MeasureError>>()?;
    let joules: f64 = per_supply.iter().map(|(_, e)| e.joules).sum();
    Ok(SupplyReport {
        per_supply,
        total: Energy {
            joules,
            avg_watts: joules / (window.1 - window.0),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerEstimate {
    pub alpha: f64,
    pub c: f64,
    pub f: f64,
    pub vdd: f64,
    pub p_dyn: f64,
}

/// Switching power estimate `alpha * C * f * vdd^2`.
pub fn dynamic_power(alpha: f64, c: f64, f: f64, vdd: f64) -> PowerEstimate {
    PowerEstimate {
        alpha,
        c,
        f,
        vdd,
        p_dyn: alpha * c * f * vdd * vdd,
    }
}

/// Writes `time,<signals>` followed by one row per sample.
pub fn write_csv<W: Write>(wf: &Waveform, signals: &[&str], out: W) -> Result<(), MeasureError> {
    let columns = signals
        .iter()
        .map(|&s| wf.signal(s).ok_or_else(|| MeasureError::UnknownSignal(s.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(std::iter::once("time").chain(signals.iter().copied()))?;
    for (i, t) in wf.time.iter().enumerate() {
        w.write_record(std::iter::once(t.to_string()).chain(columns.iter().map(|c| c[i].to_string())))?;
    }
    w.flush()?;
    Ok(())
}

fn vcd_value(level: Level) -> vcd::Value {
    match level {
        Level::Zero => vcd::Value::V0,
        Level::One => vcd::Value::V1,
        Level::X => vcd::Value::X,
    }
}

/// Writes the trace as a value change dump with a 1 ps timescale.
pub fn write_vcd<W: Write>(trace: &DigitalTrace, out: W) -> Result<(), MeasureError> {
    let mut w = vcd::Writer::new(out);
    w.timescale(1, vcd::TimescaleUnit::PS)?;
    w.add_module("top")?;
    let ids = trace
        .signals
        .iter()
        .map(|s| w.add_wire(1, &s.replace(' ', "_")))
        .collect::<std::io::Result<Vec<_>>>()?;
    w.upscope()?;
    w.enddefinitions()?;

    let mut changes: Vec<(u64, usize, Level)> = trace
        .events
        .iter()
        .enumerate()
        .flat_map(|(k, ev)| ev.iter().map(move |&(t, l)| ((t * 1e12).round().max(0.0) as u64, k, l)))
        .collect();
    // stable sort keeps per-signal event order within one tick
    changes.sort_by_key(|c| c.0);
    let mut last_time = None;
    let mut current: Vec<Option<Level>> = vec![None; ids.len()];
    let mut i = 0;
    while i < changes.len() {
        let t = changes[i].0;
        let mut j = i;
        let mut tick: Vec<Option<Level>> = vec![None; ids.len()];
        while j < changes.len() && changes[j].0 == t {
            tick[changes[j].1] = Some(changes[j].2);
            j += 1;
        }
        for (k, level) in tick.into_iter().enumerate() {
            let Some(level) = level else { continue };
            if current[k] == Some(level) {
                continue;
            }
            if last_time != Some(t) {
                w.timestamp(t)?;
                last_time = Some(t);
            }
            w.change_scalar(ids[k], vcd_value(level))?;
            current[k] = Some(level);
        }
        i = j;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave(time: Vec<f64>, cols: Vec<(&str, Vec<f64>)>) -> Waveform {
        Waveform {
            time,
            nets: cols.iter().map(|c| c.0.to_string()).collect(),
            voltages: cols.into_iter().map(|c| c.1).collect(),
            ..Default::default()
        }
    }

    fn ramp(n: usize, t_end: f64) -> Vec<f64> {
        (0..=n).map(|i| i as f64 * t_end / n as f64).collect()
    }

    #[test]
    fn constant_levels() {
        let wf = wave(vec![0.0, 1.0], vec![("a", vec![0.95, 0.95]), ("b", vec![0.5, 0.5])]);
        let tr = digitize(&wf, &["a", "b"], 1.0).unwrap();
        assert_eq!(tr.events[0], vec![(0.0, Level::One)]);
        assert_eq!(tr.events[1], vec![(0.0, Level::X)]);
        assert!(matches!(digitize(&wf, &["zz"], 1.0), Err(MeasureError::UnknownSignal(_))));
    }

    #[test]
    fn ramp_events_at_thresholds() {
        let t = ramp(10, 1e-9);
        let v: Vec<f64> = t.iter().map(|x| x / 1e-9).collect();
        let tr = digitize(&wave(t, vec![("a", v)]), &["a"], 1.0).unwrap();
        let ev = &tr.events[0];
        assert_eq!(ev.len(), 3);
        assert_eq!(ev[0], (0.0, Level::Zero));
        assert_eq!(ev[1].1, Level::X);
        assert!((ev[1].0 - 0.3e-9).abs() < 1e-21);
        assert!((ev[2].0 - 0.7e-9).abs() < 1e-21);
    }

    #[test]
    fn slew_of_ramp_and_step() {
        let t = ramp(1000, 1e-9);
        let v: Vec<f64> = t.iter().map(|x| x / 1e-9).collect();
        let wf = wave(t, vec![("a", v)]);
        assert!((slew_time(&wf, "a", 0, 1.0).unwrap() - 0.4e-9).abs() < 1e-18);

        let wf = wave(vec![0.0, 1e-12, 2e-12], vec![("s", vec![0.0, 1.0, 1.0])]);
        let s = slew_time(&wf, "s", 0, 1.0).unwrap();
        assert!(s > 0.0 && s <= 1e-12);
    }

    #[test]
    fn glitch_is_not_an_edge() {
        let wf = wave(vec![0.0, 1.0, 2.0], vec![("g", vec![0.0, 0.6, 0.0])]);
        assert!(matches!(slew_time(&wf, "g", 0, 1.0), Err(MeasureError::NoEdge { .. })));
    }

    #[test]
    fn delay_of_shifted_copy() {
        let t = ramp(200, 200e-12);
        let step = |t0: f64| -> Vec<f64> {
            t.iter().map(|&x| ((x - t0) / 20e-12).clamp(0.0, 1.0)).collect()
        };
        let wf = wave(t.clone(), vec![("in", step(50e-12)), ("out", step(60e-12)), ("same", step(50e-12))]);
        let d = propagation_delay(&wf, "in", "out", 1.0).unwrap();
        assert_eq!(d.len(), 1);
        assert!((d[0].delay - 10e-12).abs() < 1e-18);
        assert!(d[0].causal);
        let d = propagation_delay(&wf, "in", "same", 1.0).unwrap();
        assert_eq!(d[0].delay, 0.0);
        let d = propagation_delay(&wf, "out", "in", 1.0).unwrap();
        assert!(d[0].delay < 0.0 && !d[0].causal);
        let flat = wave(t.clone(), vec![("in", vec![0.0; t.len()]), ("out", step(60e-12))]);
        assert!(matches!(
            propagation_delay(&flat, "in", "out", 1.0),
            Err(MeasureError::Unpaired { .. })
        ));
    }

    fn dc_supply(n: usize, tstop: f64, v: f64, i: f64) -> Waveform {
        let time = ramp(n, tstop);
        Waveform {
            sources: vec!["V1".into()],
            source_voltages: vec![vec![v; time.len()]],
            source_currents: vec![vec![i; time.len()]],
            time,
            ..Default::default()
        }
    }

    #[test]
    fn dc_energy() {
        let wf = dc_supply(1000, 1e-6, 1.0, 1e-3);
        let e = supply_energy(&wf, "V1", (0.0, 1e-6)).unwrap();
        assert!((e.joules - 1e-9).abs() < 1e-21);
        assert!((e.avg_watts - 1e-3).abs() < 1e-15);
        let z = supply_energy(&dc_supply(10, 1e-6, 1.0, 0.0), "V1", (0.0, 1e-6)).unwrap();
        assert_eq!(z.joules, 0.0);
        assert!(matches!(supply_energy(&wf, "V9", (0.0, 1e-6)), Err(MeasureError::UnknownSource(_))));
        assert!(matches!(supply_energy(&wf, "V1", (0.0, 2e-6)), Err(MeasureError::Window { .. })));
    }

    #[test]
    fn two_supplies_sum() {
        let mut wf = dc_supply(100, 1e-6, 1.0, 1e-3);
        wf.sources.push("V2".into());
        wf.source_voltages.push(vec![2.0; wf.len()]);
        wf.source_currents.push(vec![1e-3; wf.len()]);
        let r = supplies_energy(&wf, &["V1", "V2"], (0.0, 1e-6)).unwrap();
        assert_eq!(r.per_supply.len(), 2);
        assert!((r.total.joules - 3e-9).abs() < 1e-20);
    }

    #[test]
    fn dynamic_power_fixtures() {
        assert_eq!(dynamic_power(1.0, 1e-12, 1e9, 1.0).p_dyn, 1e-3);
        assert_eq!(dynamic_power(0.0, 1e-12, 1e9, 1.0).p_dyn, 0.0);
        assert!((dynamic_power(0.5, 2e-12, 500e6, 1.0).p_dyn - 0.5e-3).abs() < 1e-18);
        let p = dynamic_power(0.3, 3e-12, 7e8, 0.8).p_dyn;
        assert_eq!(dynamic_power(0.3, 3e-12, 7e8, 1.6).p_dyn, 4.0 * p);
    }

    #[test]
    fn csv_shapes() {
        let wf = wave(vec![0.0, 1e-12], vec![("a", vec![0.1, 0.2])]);
        let mut buf = Vec::new();
        write_csv(&wf, &["a"], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "time,a\n0,0.1\n0.000000000001,0.2\n");
        let empty = wave(vec![], vec![("a", vec![])]);
        let mut buf = Vec::new();
        write_csv(&empty, &["a"], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "time,a\n");
    }

    #[test]
    fn vcd_single_change() {
        let tr = DigitalTrace {
            vdd: 1.0,
            signals: vec!["q".into()],
            events: vec![vec![(0.0, Level::Zero), (5e-12, Level::One)]],
        };
        let mut buf = Vec::new();
        write_vcd(&tr, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("$timescale 1 ps $end"));
        let body = text.split("$enddefinitions $end").nth(1).unwrap();
        let lines: Vec<&str> = body.lines().filter(|l| !l.is_empty()).collect();
        assert_eq!(lines, vec!["#0", "0!", "#5", "1!"]);
    }

    #[test]
    fn vcd_writes_x() {
        let tr = DigitalTrace {
            vdd: 1.0,
            signals: vec!["q".into()],
            events: vec![vec![(0.0, Level::X)]],
        };
        let mut buf = Vec::new();
        write_vcd(&tr, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("x!"));
    }

    #[test]
    fn rail_rendering_is_idempotent() {
        let t = ramp(100, 1e-9);
        let v: Vec<f64> = t.iter().map(|x| (x * 2e10).sin() * 0.5 + 0.5).collect();
        let tr = digitize(&wave(t.clone(), vec![("s", v)]), &["s"], 1.0).unwrap();
        let rails = tr.to_waveform(&t);
        let again = digitize(&rails, &["s"], 1.0).unwrap();
        let levels = |tr: &DigitalTrace| tr.events[0].iter().map(|e| e.1).collect::<Vec<_>>();
        assert_eq!(levels(&tr), levels(&again));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn slew_and_delay_shift_invariant(shift in 0.0f64..50e-12, rise in 5e-12f64..40e-12, lag in 1e-12f64..30e-12) {
                let t = ramp(400, 400e-12);
                let make = |t0: f64| -> Vec<f64> {
                    t.iter().map(|&x| ((x - t0) / rise).clamp(0.0, 1.0)).collect()
                };
                let a = wave(t.clone(), vec![("in", make(100e-12)), ("out", make(100e-12 + lag))]);
                let b = wave(t.clone(), vec![("in", make(100e-12 + shift)), ("out", make(100e-12 + lag + shift))]);
                let sa = slew_time(&a, "out", 0, 1.0).unwrap();
                let sb = slew_time(&b, "out", 0, 1.0).unwrap();
                prop_assert!((sa - sb).abs() < 1e-15);
                let da = propagation_delay(&a, "in", "out", 1.0).unwrap()[0].delay;
                let db = propagation_delay(&b, "in", "out", 1.0).unwrap()[0].delay;
                prop_assert!((da - db).abs() < 1e-15);
                prop_assert!((da - lag).abs() < 1e-15);
            }

            #[test]
            fn slew_scales_with_dilation(k in 1.0f64..5.0) {
                let t = ramp(400, 400e-12);
                let v: Vec<f64> = t.iter().map(|&x| ((x - 100e-12) / 30e-12).clamp(0.0, 1.0)).collect();
                let a = wave(t.clone(), vec![("s", v.clone())]);
                let b = wave(t.iter().map(|x| x * k).collect(), vec![("s", v)]);
                let sa = slew_time(&a, "s", 0, 1.0).unwrap();
                let sb = slew_time(&b, "s", 0, 1.0).unwrap();
                prop_assert!((sb - k * sa).abs() < 1e-15 * k);
            }

            #[test]
            fn energy_is_additive(split in 0.01f64..0.99, n in 10usize..200) {
                let time = ramp(n, 1e-6);
                let p: Vec<f64> = time.iter().map(|t| 1.0 + (t * 1e7).sin()).collect();
                let wf = Waveform {
                    sources: vec!["V".into()],
                    source_voltages: vec![vec![1.0; time.len()]],
                    source_currents: vec![p],
                    time,
                    ..Default::default()
                };
                let mid = split * 1e-6;
                let whole = supply_energy(&wf, "V", (0.0, 1e-6)).unwrap().joules;
                let left = supply_energy(&wf, "V", (0.0, mid)).unwrap().joules;
                let right = supply_energy(&wf, "V", (mid, 1e-6)).unwrap().joules;
                prop_assert!((whole - left - right).abs() < 1e-12 * whole.abs());
            }

            #[test]
            fn energy_refinement_consistent(n in 200usize..400) {
                let smooth = |n: usize| {
                    let time = ramp(n, 1e-6);
                    let i: Vec<f64> = time.iter().map(|t| 1e-3 * (1.0 + 0.5 * (t * 3e6).sin())).collect();
                    Waveform {
                        sources: vec!["V".into()],
                        source_voltages: vec![vec![1.0; time.len()]],
                        source_currents: vec![i],
                        time,
                        ..Default::default()
                    }
                };
                let coarse = supply_energy(&smooth(n), "V", (0.0, 1e-6)).unwrap().joules;
                let fine = supply_energy(&smooth(2 * n), "V", (0.0, 1e-6)).unwrap().joules;
                prop_assert!(((coarse - fine) / fine).abs() < 1e-3);
            }
        }
    }
}
