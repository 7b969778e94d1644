//! `mrlsim`: simulate netlists, generate MRL blocks, verify them against
//! their Boolean models and print the area/delay/power comparison.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use mrl_core::engine::{bits_to_pwl, run_transient, OscillationPolicy, SimOptions, Waveform};
use mrl_core::gates::{area_report, build_block, BlockKind, DeviceCensus, GenOptions};
use mrl_core::measure::{digitize, propagation_delay, supply_energy, write_csv, write_vcd};
use mrl_core::netlist::{expand, parse, parse_value, validate, Device, Severity, Source};
use mrl_core::verify::{equivalence_check, Mode, VerifyConfig};

/// Published inverter-cell count of the CMOS XAX baselines.
const BASELINE_CELLS: usize = 27;

/// Literature rows of the comparison table: design, CMOS cells, memristors,
/// delay (ps), power (µW). Quoted, never measured.
const LITERATURE: [(&str, usize, Option<usize>, f64, f64); 3] = [
    ("XAX-module [12]", 27, None, 57.0, 49.45),
    ("XAX-module [13]", 27, None, 83.0, 41.00),
    ("MRL XAX (published)", 23, Some(62), 54.0, 40.32),
];

#[derive(Parser)]
#[command(name = "mrlsim", version, about = "Transient simulation and verification of memristor ratioed logic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a transient analysis on a netlist file
    Sim(SimArgs),
    /// Print the netlist and device census of a generated block
    Gen(GenArgs),
    /// Check a generated block against its Boolean model
    Verify(VerifyArgs),
    /// Print the device, area, delay and power comparison
    Report(ReportArgs),
}

fn positive(text: &str) -> Result<f64, String> {
    match parse_value(text) {
        Some(v) if v > 0.0 && v.is_finite() => Ok(v),
        Some(_) => Err(format!("'{text}' must be positive")),
        None => Err(format!("'{text}' is not a number (SPICE suffixes like 1p, 2n are accepted)")),
    }
}

fn block_kind(text: &str) -> Result<BlockKind, String> {
    text.parse().map_err(|e: mrl_core::gates::GenError| e.to_string())
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Vcd,
    Both,
}

#[derive(Args)]
struct SimArgs {
    /// Netlist file
    netlist: PathBuf,
    /// Supply voltage used for logic thresholds in VCD output (V)
    #[arg(long, env = "MRLSIM_VDD", default_value = "1", value_parser = positive)]
    vdd: f64,
    /// Time step; overrides the netlist's .tran card
    #[arg(long, env = "MRLSIM_TSTEP", value_parser = positive)]
    tstep: Option<f64>,
    /// Stop time; overrides the netlist's .tran card
    #[arg(long, env = "MRLSIM_TSTOP", value_parser = positive)]
    tstop: Option<f64>,
    /// Directory for waveform files
    #[arg(long, env = "MRLSIM_OUT", default_value = ".")]
    out: PathBuf,
    #[arg(long, env = "MRLSIM_FORMAT", value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Print a JSON summary instead of text
    #[arg(long, env = "MRLSIM_JSON")]
    json: bool,
}

#[derive(Args)]
struct GenArgs {
    /// and, or, nand, nor, not, xor, dlatch, dff or xax
    #[arg(value_parser = block_kind)]
    block: BlockKind,
    /// Also write <block>.cir into this directory
    #[arg(long, env = "MRLSIM_OUT")]
    out: Option<PathBuf>,
    #[arg(long, env = "MRLSIM_JSON")]
    json: bool,
}

#[derive(Args)]
struct Timing {
    #[arg(long, env = "MRLSIM_VDD", default_value = "1", value_parser = positive)]
    vdd: f64,
    /// Clock period, one input vector per period
    #[arg(long, env = "MRLSIM_CLOCK", default_value = "1n", value_parser = positive)]
    clock: f64,
    #[arg(long, env = "MRLSIM_TSTEP", default_value = "1p", value_parser = positive)]
    tstep: f64,
}

#[derive(Args)]
#[group(multiple = false)]
struct ModeFlags {
    /// Enumerate every input (and state) combination; the default
    #[arg(long)]
    exhaustive: bool,
    /// Seeded random sequences
    #[arg(long)]
    random: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(value_parser = block_kind)]
    block: BlockKind,
    #[command(flatten)]
    mode: ModeFlags,
    #[command(flatten)]
    timing: Timing,
    #[arg(long, env = "MRLSIM_SEED", default_value_t = 0)]
    seed: u64,
    /// Random sequences to run
    #[arg(long, default_value_t = 100)]
    sequences: usize,
    /// Compared cycles per random sequence
    #[arg(long, default_value_t = 8)]
    cycles: usize,
    #[arg(long, env = "MRLSIM_JSON")]
    json: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    timing: Timing,
    #[arg(long, env = "MRLSIM_JSON")]
    json: bool,
}

/// Failure carrying the process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Self::new(1, format!("{e:#}"))
    }
}

fn census_line(c: &DeviceCensus) -> String {
    format!(
        "memristors: {}, transistors: {}, inverter cells: {}",
        c.memristors, c.transistors, c.inverter_cells
    )
}

fn sim(args: &SimArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.netlist)
        .map_err(|e| Failure::new(2, format!("{}: {e}", args.netlist.display())))?;
    let circuit = parse(&text).map_err(|e| Failure::new(2, format!("{}: {e}", args.netlist.display())))?;
    let flat = expand(&circuit).map_err(|e| Failure::new(2, format!("{}: {e}", args.netlist.display())))?;
    let diagnostics = validate(&flat);
    for d in &diagnostics {
        eprintln!("{d}");
    }
    if diagnostics.iter().any(|d| d.severity == Severity::Error) {
        return Err(Failure::new(2, "netlist failed validation"));
    }
    let tran = circuit.tran();
    let tstep = args.tstep.or(tran.map(|t| t.0));
    let tstop = args.tstop.or(tran.map(|t| t.1));
    let (Some(tstep), Some(tstop)) = (tstep, tstop) else {
        return Err(Failure::new(2, "no .tran card; pass --tstep and --tstop"));
    };
    let mut options = SimOptions::new(tstep, tstop);
    options.on_oscillation = OscillationPolicy::Fail;
    options.validate().map_err(|e| Failure::new(2, e.to_string()))?;
    let wf = run_transient(&flat, &options).map_err(|e| Failure::new(3, e.to_string()))?;

    let stem = args.netlist.file_stem().and_then(|s| s.to_str()).unwrap_or("sim");
    let files = write_waveforms(&wf, &args.out, stem, args.format, args.vdd)?;
    let nets = &wf.nets[1..];
    if args.json {
        let finals: serde_json::Map<String, serde_json::Value> = nets
            .iter()
            .map(|n| (n.clone(), json!(wf.signal(n).and_then(|s| s.last()).copied())))
            .collect();
        let summary = json!({
            "title": circuit.title,
            "tstep": tstep,
            "tstop": tstop,
            "samples": wf.len(),
            "final": finals,
            "warnings": wf.warnings,
            "files": files,
        });
        println!("{}", serde_json::to_string_pretty(&summary).map_err(anyhow::Error::from)?);
    } else {
        println!("{}: {} samples, tstep {tstep:e} s, tstop {tstop:e} s", circuit.title, wf.len());
        for n in nets {
            let v = wf.signal(n).and_then(|s| s.last()).copied().unwrap_or(0.0);
            println!("v({n}) = {v:.6} V");
        }
        for w in &wf.warnings {
            println!("warning: {w}");
        }
        for f in &files {
            println!("wrote {f}");
        }
    }
    Ok(())
}

fn write_waveforms(wf: &Waveform, dir: &Path, stem: &str, format: Format, vdd: f64) -> Result<Vec<String>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let nets: Vec<&str> = wf.nets[1..].iter().map(String::as_str).collect();
    let mut files = Vec::new();
    if matches!(format, Format::Csv | Format::Both) {
        let path = dir.join(format!("{stem}.csv"));
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_csv(wf, &nets, io::BufWriter::new(file))?;
        files.push(path.display().to_string());
    }
    if matches!(format, Format::Vcd | Format::Both) {
        let path = dir.join(format!("{stem}.vcd"));
        let trace = digitize(wf, &nets, vdd)?;
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_vcd(&trace, io::BufWriter::new(file))?;
        files.push(path.display().to_string());
    }
    Ok(files)
}

fn gen(args: &GenArgs) -> Result<(), Failure> {
    let block = build_block(args.block, &GenOptions::default());
    let text = block.netlist_text();
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(format!("{}.cir", args.block));
        fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
    }
    if args.json {
        let out = json!({ "block": args.block.to_string(), "subckt": block.name, "ports": block.ports, "census": block.census, "netlist": text });
        println!("{}", serde_json::to_string_pretty(&out).map_err(anyhow::Error::from)?);
    } else {
        print!("{text}");
        println!("* {}", census_line(&block.census));
    }
    Ok(())
}

fn verify(args: &VerifyArgs) -> Result<(), Failure> {
    let mode = if args.mode.random { Mode::Random } else { Mode::Exhaustive };
    let cfg = VerifyConfig {
        vdd: args.timing.vdd,
        clock: args.timing.clock,
        tstep: args.timing.tstep,
        seed: args.seed,
        sequences: args.sequences,
        cycles: args.cycles,
        ..VerifyConfig::default()
    };
    let report = equivalence_check(args.block, mode, &cfg).map_err(|e| Failure::new(2, e.to_string()))?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?);
    } else {
        println!("{report}");
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::new(1, ""))
    }
}

/// Clock-to-x_out delay and average supply power of the generated XAX cell
/// shifting an alternating bit pattern.
fn measure_xax(t: &Timing) -> Result<(f64, f64)> {
    let block = build_block(BlockKind::Xax, &GenOptions::default());
    let cycles = 6;
    let period = t.clock;
    let edge = 0.01 * period;
    let mut c = block.library.clone();
    c.title = "xax measurement".into();
    let x: Vec<(f64, bool)> = (0..cycles).map(|k| (k as f64 * period, k % 2 == 1)).collect();
    c.top.devices.push(Device::vsource("Vx_in", "x_in", "0", bits_to_pwl(&x, t.vdd, edge)));
    c.top.devices.push(Device::vsource("Va_in", "a_in", "0", Source::Dc(0.0)));
    c.top.devices.push(Device::vsource("Vs_in", "s_in", "0", Source::Dc(0.0)));
    let mut clk = vec![(0.0, false)];
    for k in 0..cycles {
        let start = k as f64 * period;
        clk.push((start, false));
        clk.push((start + 0.5 * period, true));
    }
    c.top.devices.push(Device::vsource("Vclk", "clk", "0", bits_to_pwl(&clk, t.vdd, edge)));
    c.top.devices.push(Device::vsource("Vsupply", "vdd", "0", Source::Dc(t.vdd)));
    c.top.instances.push(block.self_named_instance("XDUT"));
    let tstop = cycles as f64 * period;
    let wf = run_transient(&expand(&c)?, &SimOptions::new(t.tstep, tstop))?;
    let delays: Vec<f64> = propagation_delay(&wf, "clk", "x_out", t.vdd)?
        .into_iter()
        .filter(|d| d.causal)
        .map(|d| d.delay)
        .collect();
    anyhow::ensure!(!delays.is_empty(), "x_out never switched");
    let delay = delays.iter().sum::<f64>() / delays.len() as f64;
    let power = supply_energy(&wf, "Vsupply", (period, tstop))?.avg_watts;
    Ok((delay, power))
}

fn report(args: &ReportArgs) -> Result<(), Failure> {
    let block = build_block(BlockKind::Xax, &GenOptions::default());
    let area = area_report(&block.census, BASELINE_CELLS, 1.0).map_err(anyhow::Error::from)?;
    let (delay, power) = measure_xax(&args.timing)?;
    let saving = format!("{:.1}%", 100.0 * area.saving);
    if args.json {
        let rows: Vec<_> = LITERATURE
            .iter()
            .map(|&(design, cells, mem, d, p)| {
                json!({ "design": design, "cmos_cells": cells, "memristors": mem, "delay_ps": d, "power_uw": p, "source": "literature" })
            })
            .collect();
        let out = json!({
            "literature": rows,
            "generated": {
                "design": "MRL XAX (generated)",
                "cmos_cells": block.census.inverter_cells,
                "transistors": block.census.transistors,
                "memristors": block.census.memristors,
                "delay_ps": delay * 1e12,
                "power_uw": power * 1e6,
                "source": "measured, switch-level models; not comparable to the literature absolutes",
            },
            "area": area,
            "saving": saving,
            "stimulus": { "vdd": args.timing.vdd, "clock": args.timing.clock, "tstep": args.timing.tstep },
        });
        println!("{}", serde_json::to_string_pretty(&out).map_err(anyhow::Error::from)?);
        return Ok(());
    }
    let mut s = String::new();
    s += &format!(
        "stimulus: vdd {} V, clock {:e} s, tstep {:e} s\n",
        args.timing.vdd, args.timing.clock, args.timing.tstep
    );
    s += "design: CMOS inverter cells, transistors, memristors, delay, power\n";
    for (design, cells, mem, d, p) in LITERATURE {
        let mem = mem.map_or("-".to_string(), |m| m.to_string());
        s += &format!("{design}: {cells}, -, {mem}, {d} ps [a], {p:.2} uW [a]\n");
    }
    let c = &block.census;
    s += &format!(
        "MRL XAX (generated): {}, {}, {}, {:.1} ps [b], {:.2} uW [b]\n",
        c.inverter_cells,
        c.transistors,
        c.memristors,
        delay * 1e12,
        power * 1e6
    );
    s += "[a] literature values, quoted and never measured here\n";
    s += "[b] measured clk to x_out delay and average supply power with switch-level transistors; not comparable to the published absolute values\n";
    s += &format!(
        "area saving: ({} - {}) / {} = {saving} fewer inverter cells\n",
        area.baseline_cells, area.inverter_cells, area.baseline_cells
    );
    io::stdout().write_all(s.as_bytes()).map_err(anyhow::Error::from)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sim(a) => sim(a),
        Command::Gen(a) => gen(a),
        Command::Verify(a) => verify(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}
