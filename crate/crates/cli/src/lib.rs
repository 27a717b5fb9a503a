//! Subcommands behind the `freqsep` binary.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use freqsep_core::analysis::{attenuation_report, frf_compare, BandAttenuation, FrfDiscrepancy};
use freqsep_core::plantsim::DEFAULT_SAMPLE_RATE_HZ;
use freqsep_core::scheduler::RegionSummary;
use freqsep_core::{
    controller_reference, design_bank, make_synthetic_scenario, run_open_loop, run_with, BankSpec, Difficulty, Error,
    EventKind, RunLimits, Scenario, SimulationTrace, TraceSummary, TransferFunction,
};
use serde::{Deserialize, Serialize};

pub const SEED_ENV: &str = "SUBBAND_FFC_SEED";
pub const DEFAULT_SEED: u64 = 1;
const PSD_SEGMENT: usize = 4096;

pub const TRACE_FILE: &str = "trace.csv";
pub const BASELINE_FILE: &str = "baseline.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SCENARIO_FILE: &str = "scenario.json";
pub const REPORT_FILE: &str = "report.json";
pub const BANK_FILE: &str = "bank.json";

#[derive(Debug, Parser)]
#[command(
    name = "freqsep",
    version,
    about = "Frequency-separated adaptive feedforward simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Design a cosine-modulated analysis bank and report its attenuation
    DesignBank(DesignBankArgs),
    /// Run a closed-loop simulation and write its trace
    Simulate(SimulateArgs),
    /// Summarize a simulation directory
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct DesignBankArgs {
    #[arg(long, default_value_t = 4)]
    pub regions: usize,
    #[arg(long, default_value_t = 64)]
    pub taps: usize,
    #[arg(long, default_value_t = 110.0)]
    pub atten_db: f64,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE_HZ)]
    pub fs_hz: f64,
    /// write coefficients here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// builtin name (smoke, desk, full) or path to a scenario JSON file
    #[arg(long, default_value = "smoke")]
    pub scenario: String,
    #[arg(long)]
    pub out: PathBuf,
    /// overrides every generator seed of the scenario
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 400_000)]
    pub samples: usize,
    /// stop this many samples after the last region freezes
    #[arg(long, default_value_t = 60_000)]
    pub tail: usize,
    /// add measurement noise this many dB below the disturbance at the error sensor
    #[arg(long)]
    pub noise_db: Option<f64>,
    /// record the uncontrolled loop only
    #[arg(long)]
    pub open_loop: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// directory written by `simulate`
    pub dir: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// the command ran but missed its target; `log` is the normal output
    #[error("{reason}")]
    Shortfall { log: String, reason: String },
    #[error("region {region} diverged: {reason}")]
    Diverged { region: usize, reason: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Shortfall { .. } => 2,
            Self::Diverged { .. } => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::RegionDiverged { region, k, reason } => Self::Diverged {
                region,
                reason: format!("{reason} (sample {k})"),
            },
            other => Self::Usage(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(path, e))?;
    std::io::Write::write_all(&mut w, b"\n").map_err(|e| io_err(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| io_err(path, e))
}

fn write_trace(path: &Path, t: &SimulationTrace) -> Result<(), CliError> {
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    t.write_csv(BufWriter::new(f)).map_err(|e| io_err(path, e))
}

fn read_trace(path: &Path) -> Result<SimulationTrace, CliError> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    SimulationTrace::read_csv(BufReader::new(f)).map_err(|e| io_err(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BankReport {
    pub regions: usize,
    pub taps: usize,
    pub fs_hz: f64,
    pub target_db: f64,
    pub measured_db: f64,
    pub beta: f64,
    pub band_edges: Vec<(f64, f64)>,
    pub filters: Vec<Vec<f64>>,
}

pub fn design_bank_cmd(args: &DesignBankArgs) -> Result<String, CliError> {
    let spec = BankSpec::new(args.regions, args.taps, args.atten_db, args.fs_hz);
    spec.validate()?;
    let bank = match design_bank(&spec) {
        Ok(b) => b,
        Err(Error::Design {
            target_db,
            achievable_db,
        }) => {
            return Err(CliError::Shortfall {
                log: String::new(),
                reason: format!("target {target_db} dB not reached; achieved {achievable_db:.1} dB"),
            })
        }
        Err(e) => return Err(e.into()),
    };
    let report = BankReport {
        regions: args.regions,
        taps: args.taps,
        fs_hz: args.fs_hz,
        target_db: args.atten_db,
        measured_db: bank.measured_attenuation_db(),
        beta: bank.beta,
        band_edges: bank.band_edges.clone(),
        filters: bank.filters.iter().map(|h| h.b().to_vec()).collect(),
    };
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        write_json(&dir.join(BANK_FILE), &report)?;
    }
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} bands, {} taps, fs {} Hz, Kaiser beta {:.3}",
        report.regions, report.taps, report.fs_hz, report.beta
    );
    for (i, (lo, hi)) in report.band_edges.iter().enumerate() {
        let _ = writeln!(s, "  band {i}: {lo:.1} - {hi:.1} Hz");
    }
    let _ = writeln!(
        s,
        "stopband attenuation {:.1} dB (target {} dB)",
        report.measured_db, report.target_db
    );
    Ok(s)
}

pub fn load_scenario(name: &str, seed: Option<u64>) -> Result<Scenario, CliError> {
    let sc = match name.parse::<Difficulty>() {
        Ok(d) => make_synthetic_scenario(seed.unwrap_or(DEFAULT_SEED), d),
        Err(_) if Path::new(name).is_file() => {
            let sc: Scenario = read_json(Path::new(name))?;
            match seed {
                Some(s) => sc.with_seed(s),
                None => sc,
            }
        }
        Err(e) => return Err(CliError::Usage(format!("{e}; no such scenario file either"))),
    };
    sc.validate()?;
    Ok(sc)
}

/// Everything `simulate` records besides the raw streams.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub open_loop: bool,
    /// every region froze by meeting the convergence test
    pub converged: bool,
    /// first sample after the last region froze
    pub settled_at: Option<usize>,
    pub budget_exhausted: Vec<usize>,
    pub attenuation: Vec<BandAttenuation>,
    #[serde(flatten)]
    pub trace: TraceSummary,
}

fn measure_window(settled_at: Option<usize>, len: usize) -> usize {
    match settled_at {
        Some(s) if len > s && len - s >= 256 => s,
        _ => len / 2,
    }
}

fn attenuation(
    baseline: &SimulationTrace,
    trace: &SimulationTrace,
    band_edges: &[(f64, f64)],
    fs: f64,
    start: usize,
) -> Result<Vec<BandAttenuation>, CliError> {
    let seg = PSD_SEGMENT.min(trace.len() - start);
    Ok(attenuation_report(
        &baseline.e[start..],
        &trace.e[start..],
        band_edges,
        fs,
        seg,
    )?)
}

pub fn simulate_cmd(args: &SimulateArgs) -> Result<String, CliError> {
    let mut sc = load_scenario(&args.scenario, args.seed)?;
    if let Some(db) = args.noise_db {
        sc = sc.with_noise_below_disturbance(db);
    }
    fs::create_dir_all(&args.out).map_err(|e| io_err(&args.out, e))?;
    write_json(&args.out.join(SCENARIO_FILE), &sc)?;

    let trace = if args.open_loop {
        let mut t = run_open_loop(&sc, args.samples)?;
        t.band_edges = sc.build_bank()?.band_edges;
        t
    } else {
        run_with(
            &sc,
            RunLimits {
                total_samples: args.samples,
                tail_after_freeze: Some(args.tail),
            },
        )?
    };
    let baseline = run_open_loop(&sc, trace.len())?;
    write_trace(&args.out.join(TRACE_FILE), &trace)?;
    write_trace(&args.out.join(BASELINE_FILE), &baseline)?;

    let settled_at = trace.settled_at();
    let start = measure_window(settled_at, trace.len());
    let summary = RunSummary {
        scenario: sc.name.clone(),
        open_loop: args.open_loop,
        converged: !args.open_loop && trace.all_converged(),
        settled_at,
        budget_exhausted: trace
            .events
            .iter()
            .filter(|e| e.kind == EventKind::BudgetExhausted)
            .map(|e| e.region)
            .collect(),
        attenuation: if trace.len() >= 16 {
            attenuation(&baseline, &trace, &trace.band_edges, sc.sample_rate_hz, start)?
        } else {
            Vec::new()
        },
        trace: trace.summary(),
    };
    write_json(&args.out.join(SUMMARY_FILE), &summary)?;

    let mut s = String::new();
    let _ = writeln!(
        s,
        "scenario {} ({} samples) -> {}",
        sc.name,
        trace.len(),
        args.out.display()
    );
    for e in &trace.events {
        let _ = writeln!(s, "  k={:>7} region {} {:?}", e.k, e.region, e.kind);
    }
    for b in &summary.attenuation {
        let _ = writeln!(s, "  band {}: {:.2} dB", b.band, b.attenuation_db);
    }
    if args.open_loop {
        return Ok(s);
    }
    if summary.converged {
        Ok(s)
    } else {
        let reason = if settled_at.is_none() {
            "not every region froze within the sample budget".to_string()
        } else {
            format!("regions {:?} froze on their sample budget", summary.budget_exhausted)
        };
        Err(CliError::Shortfall { log: s, reason })
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RegionFit {
    pub region: usize,
    pub channel: usize,
    pub model: FrfDiscrepancy,
    pub controller: FrfDiscrepancy,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub samples: usize,
    pub measured_from: usize,
    pub attenuation: Vec<BandAttenuation>,
    pub regions: Vec<RegionFit>,
}

fn region_fit(sc: &Scenario, trace: &SimulationTrace, r: &RegionSummary) -> Result<RegionFit, CliError> {
    let fs = sc.sample_rate_hz;
    let band = trace.band_edges[r.region];
    let model = frf_compare(&r.model.rhat(fs)?, &sc.plants[r.channel], band)?;
    let reference = controller_reference(sc, trace, r.region)?;
    let controller = frf_compare(
        &TransferFunction::fir(r.theta_q.clone(), fs)?,
        &TransferFunction::fir(reference, fs)?,
        band,
    )?;
    Ok(RegionFit {
        region: r.region,
        channel: r.channel,
        model,
        controller,
    })
}

pub fn report_cmd(args: &ReportArgs) -> Result<String, CliError> {
    let dir = &args.dir;
    let sc: Scenario = read_json(&dir.join(SCENARIO_FILE))?;
    let summary: RunSummary = read_json(&dir.join(SUMMARY_FILE))?;
    let mut trace = read_trace(&dir.join(TRACE_FILE))?;
    let baseline = read_trace(&dir.join(BASELINE_FILE))?;
    if trace.len() != summary.trace.samples || baseline.len() != trace.len() {
        return Err(CliError::Usage(format!(
            "{}: trace has {} samples, baseline {}, summary {}",
            dir.display(),
            trace.len(),
            baseline.len(),
            summary.trace.samples
        )));
    }
    if trace.len() < 16 {
        return Err(CliError::Usage(format!(
            "{}: trace too short to report on",
            dir.display()
        )));
    }
    trace.sample_rate_hz = summary.trace.sample_rate_hz;
    trace.band_edges = summary.trace.band_edges.clone();
    trace.events = summary.trace.events.clone();
    trace.regions = summary.trace.regions.clone();

    let start = measure_window(summary.settled_at, trace.len());
    let atten = attenuation(&baseline, &trace, &trace.band_edges, trace.sample_rate_hz, start)?;
    let fits = if summary.open_loop {
        Vec::new()
    } else {
        trace
            .regions
            .iter()
            .map(|r| region_fit(&sc, &trace, r))
            .collect::<Result<Vec<_>, _>>()?
    };
    let report = Report {
        scenario: summary.scenario.clone(),
        samples: trace.len(),
        measured_from: start,
        attenuation: atten,
        regions: fits,
    };
    write_json(&dir.join(REPORT_FILE), &report)?;

    let mut s = String::new();
    let _ = writeln!(
        s,
        "scenario {} ({} samples, measured from {})",
        report.scenario, report.samples, start
    );
    let _ = writeln!(s, "band        Hz range   attenuation dB");
    for b in &report.attenuation {
        let _ = writeln!(
            s,
            "{:>4} {:>7.0}-{:<7.0} {:>10.2}",
            b.band, b.lo_hz, b.hi_hz, b.attenuation_db
        );
    }
    if !report.regions.is_empty() {
        let _ = writeln!(s, "region  model dB  model deg  ctl dB  ctl deg");
        for f in &report.regions {
            let _ = writeln!(
                s,
                "{:>6} {:>9.3} {:>10.2} {:>7.3} {:>8.2}",
                f.region,
                f.model.max_mag_db,
                f.model.max_phase_deg,
                f.controller.max_mag_db,
                f.controller.max_phase_deg
            );
        }
    }
    Ok(s)
}

pub fn execute(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::DesignBank(a) => design_bank_cmd(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Report(a) => report_cmd(a),
    }
}
