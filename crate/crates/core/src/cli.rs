//! Experiment runner behind the `sqgate` binary.
//!
//! An [`ExperimentSpec`] comes from a JSON config file, command-line flags,
//! or both (flags win). Exit codes: 0 on success, 1 on a config or I/O
//! error, 2 when `validate` finds a failing check.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gaussian::{variance_db, GaussianState};
use crate::metrics::{fidelity, squeezing_db, wigner, GridSpec};
use crate::oracle::{run_suite, NamedVerdict};
use crate::protocol::{
    complex_config, run_complex, run_complex_shots, run_gate_analytic, run_gate_shots, Axis,
    GateConfig, GateResult,
};
use crate::tomography::{ellipse, reconstruct, HomodyneDataset, Reconstruction};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SQGATE_OUT_DIR";

/// Shot count used by `tomo` when none is given.
pub const DEFAULT_TOMO_SHOTS: usize = 100_000;

/// Randomized state pairs checked by `validate`.
pub const VALIDATE_PAIRS: usize = 50;

const MC_BATCHES: usize = 10;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Model(#[from] crate::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        1
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Subcommand, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// One gate evaluation, written as a single sweep row
    Gate,
    /// Fidelity and output squeezing against target squeezing
    SweepTarget,
    /// Fidelity against EPR quality at a fixed target
    SweepEpr,
    /// Fourier rotation followed by the squeezing gate
    Complex,
    /// Shot simulation plus moment-method reconstruction
    Tomo,
    /// Run the brute-force oracle suite
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Gate => "gate",
            Command::SweepTarget => "sweep-target",
            Command::SweepEpr => "sweep-epr",
            Command::Complex => "complex",
            Command::Tomo => "tomo",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

fn default_target() -> f64 {
    10.0
}
fn default_epr() -> f64 {
    12.0
}
fn one() -> f64 {
    1.0
}

/// Everything one run needs. Mirrors the JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub command: Command,
    #[serde(default = "default_target")]
    pub target_db: f64,
    #[serde(default = "default_epr")]
    pub epr_db: f64,
    #[serde(default)]
    pub axis: Axis,
    #[serde(default)]
    pub gain_x: Option<f64>,
    #[serde(default)]
    pub gain_p: Option<f64>,
    #[serde(default = "one")]
    pub coupler_rd: f64,
    #[serde(default = "one")]
    pub detection_eta: f64,
    #[serde(default)]
    pub start: Option<f64>,
    #[serde(default)]
    pub stop: Option<f64>,
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub n_shots: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    /// Output LO phases in radians for shot runs.
    #[serde(default)]
    pub phases: Option<Vec<f64>>,
    #[serde(default)]
    pub input_x: f64,
    #[serde(default)]
    pub input_p: f64,
    /// `tomo` only: run the six-input phase-space scenario.
    #[serde(default)]
    pub fig3: bool,
    /// `complex` only: also write input/output Wigner grids here.
    #[serde(default)]
    pub wigner_out: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            target_db: default_target(),
            epr_db: default_epr(),
            axis: Axis::Amplitude,
            gain_x: None,
            gain_p: None,
            coupler_rd: 1.0,
            detection_eta: 1.0,
            start: None,
            stop: None,
            step: None,
            n_shots: 0,
            seed: 0,
            out: None,
            format: Format::Csv,
            phases: None,
            input_x: 0.0,
            input_p: 0.0,
            fig3: false,
            wigner_out: None,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.target_db >= 0.0) || !self.target_db.is_finite() {
            return bad(format!("negative target: target_db = {}", self.target_db));
        }
        if !(self.epr_db >= 0.0) || !self.epr_db.is_finite() {
            return bad(format!(
                "epr_db must be finite and >= 0, got {}",
                self.epr_db
            ));
        }
        if let Some(p) = &self.phases {
            if p.is_empty() || p.iter().any(|v| !v.is_finite()) {
                return bad("phases must be a non-empty list of finite radians".into());
            }
        }
        if !self.input_x.is_finite() || !self.input_p.is_finite() {
            return bad("input displacement must be finite".into());
        }
        if matches!(self.command, Command::SweepTarget | Command::SweepEpr) {
            let (start, stop, step) = self.range();
            if !(step > 0.0) || !step.is_finite() {
                return bad(format!("step must be > 0, got {step}"));
            }
            if !(stop >= start) || !start.is_finite() || !stop.is_finite() {
                return bad(format!("empty range {start}..{stop}"));
            }
            if start < 0.0 {
                return bad(format!("negative range start {start}"));
            }
        }
        if self.command == Command::Tomo && self.out.is_none() && out_dir().is_none() {
            return bad("tomo needs --out or SQGATE_OUT_DIR".into());
        }
        self.gate_config(self.target_db).map(|_| ())
    }

    /// Sweep range with per-command defaults.
    pub fn range(&self) -> (f64, f64, f64) {
        let (s, e, d) = match self.command {
            Command::SweepEpr => (0.0, 20.0, 1.0),
            _ => (1.0, 15.0, 0.5),
        };
        (
            self.start.unwrap_or(s),
            self.stop.unwrap_or(e),
            self.step.unwrap_or(d),
        )
    }

    /// Inclusive sweep points `start + k·step`.
    pub fn sweep_points(&self) -> Vec<f64> {
        let (start, stop, step) = self.range();
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..n).map(|k| start + k as f64 * step).collect()
    }

    fn phases(&self) -> Vec<f64> {
        self.phases
            .clone()
            .unwrap_or_else(|| vec![0.0, FRAC_PI_4, FRAC_PI_2])
    }

    fn input(&self) -> Result<GaussianState, CliError> {
        Ok(GaussianState::vacuum(1)?.displace(0, self.input_x, self.input_p)?)
    }

    fn apply_knobs(&self, mut cfg: GateConfig) -> GateConfig {
        cfg.gain_x = self.gain_x;
        cfg.gain_p = self.gain_p;
        cfg.coupler_rd = self.coupler_rd;
        cfg.detection_eta = self.detection_eta;
        cfg
    }

    fn gate_config_with(&self, target_db: f64, epr_db: f64) -> Result<GateConfig, CliError> {
        let cfg = self.apply_knobs(GateConfig::for_target(target_db, self.axis, epr_db)?);
        cfg.validate()?;
        Ok(cfg)
    }

    fn gate_config(&self, target_db: f64) -> Result<GateConfig, CliError> {
        self.gate_config_with(target_db, self.epr_db)
    }
}

/// Parses and validates a JSON config file. Unknown keys are rejected.
pub fn load_config(path: &Path) -> Result<ExperimentSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_config(text: &str) -> Result<ExperimentSpec, CliError> {
    let spec: ExperimentSpec =
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Parser)]
#[command(
    name = "sqgate",
    version,
    about = "EPR-assisted feed-forward squeezing gate simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    /// JSON experiment config; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub target_db: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub epr_db: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub axis: Option<AxisArg>,
    #[arg(long, global = true)]
    pub gain_x: Option<f64>,
    #[arg(long, global = true)]
    pub gain_p: Option<f64>,
    #[arg(long, global = true)]
    pub coupler_rd: Option<f64>,
    #[arg(long, global = true)]
    pub detection_eta: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub start: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub stop: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub step: Option<f64>,
    #[arg(long, global = true)]
    pub shots: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Comma-separated output LO phases in radians
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub phases: Option<Vec<f64>>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub input_x: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub input_p: Option<f64>,
    #[arg(long, global = true)]
    pub fig3: bool,
    #[arg(long, global = true)]
    pub wigner_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AxisArg {
    Amplitude,
    Phase,
}

impl Cli {
    /// Builds the spec: config file first, then flag overrides.
    pub fn to_spec(&self) -> Result<ExperimentSpec, CliError> {
        let mut spec = match (&self.config, self.command) {
            (Some(path), cmd) => {
                let text = std::fs::read_to_string(path).map_err(io_err(path))?;
                let mut s: ExperimentSpec = serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                if let Some(c) = cmd {
                    s.command = c;
                }
                s
            }
            (None, Some(cmd)) => ExperimentSpec::new(cmd),
            (None, None) => {
                return Err(CliError::Config(
                    "no command given (use a subcommand or --config)".into(),
                ))
            }
        };
        macro_rules! set {
            ($field:ident, $value:expr) => {
                if let Some(v) = $value {
                    spec.$field = v;
                }
            };
        }
        set!(target_db, self.target_db);
        set!(epr_db, self.epr_db);
        set!(
            axis,
            self.axis.map(|a| match a {
                AxisArg::Amplitude => Axis::Amplitude,
                AxisArg::Phase => Axis::Phase,
            })
        );
        set!(coupler_rd, self.coupler_rd);
        set!(detection_eta, self.detection_eta);
        set!(n_shots, self.shots);
        set!(seed, self.seed);
        set!(format, self.format);
        set!(input_x, self.input_x);
        set!(input_p, self.input_p);
        if self.gain_x.is_some() {
            spec.gain_x = self.gain_x;
        }
        if self.gain_p.is_some() {
            spec.gain_p = self.gain_p;
        }
        if self.start.is_some() {
            spec.start = self.start;
        }
        if self.stop.is_some() {
            spec.stop = self.stop;
        }
        if self.step.is_some() {
            spec.step = self.step;
        }
        if self.out.is_some() {
            spec.out = self.out.clone();
        }
        if self.phases.is_some() {
            spec.phases = self.phases.clone();
        }
        if self.wigner_out.is_some() {
            spec.wigner_out = self.wigner_out.clone();
        }
        spec.fig3 |= self.fig3;
        spec.validate()?;
        Ok(spec)
    }
}

/// Entry point used by the binary. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let outcome = cli.to_spec().and_then(|spec| run(&spec));
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("sqgate: {e}");
            e.exit_code()
        }
    }
}

fn out_dir() -> Option<PathBuf> {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from)
}

fn extension(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

/// Resolved destination for the main output; `None` means stdout.
pub fn output_path(spec: &ExperimentSpec) -> Option<PathBuf> {
    spec.out.clone().or_else(|| {
        out_dir().map(|d| {
            d.join(format!(
                "{}.{}",
                spec.command.name(),
                extension(spec.format)
            ))
        })
    })
}

fn emit(spec: &ExperimentSpec, body: &str) -> Result<(), CliError> {
    match output_path(spec) {
        Some(path) => write_file(&path, body),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(body.as_bytes())
                .map_err(io_err(Path::new("<stdout>")))
        }
    }
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    std::fs::write(path, body).map_err(io_err(path))
}

/// Executes a validated spec and returns the exit code.
pub fn run(spec: &ExperimentSpec) -> Result<i32, CliError> {
    spec.validate()?;
    match spec.command {
        Command::Gate => {
            let row = sweep_row(spec, spec.target_db, spec.epr_db, spec.seed)?;
            emit(spec, &render_rows(&[row], spec.format))?;
        }
        Command::SweepTarget | Command::SweepEpr => {
            let rows = sweep(spec)?;
            emit(spec, &render_rows(&rows, spec.format))?;
        }
        Command::Complex => run_complex_command(spec)?,
        Command::Tomo => {
            if spec.fig3 {
                run_fig3(spec)?
            } else {
                run_tomo(spec)?
            }
        }
        Command::Validate => {
            let verdicts = run_suite(spec.seed, VALIDATE_PAIRS)?;
            let all_pass = verdicts.iter().all(|v| v.verdict.pass);
            emit(spec, &render_validation(&verdicts, all_pass))?;
            return Ok(if all_pass { 0 } else { 2 });
        }
    }
    Ok(0)
}

/// One line of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub target_db: f64,
    pub epr_db: f64,
    #[serde(rename = "R")]
    pub reflectivity: f64,
    pub gx: f64,
    pub gp: f64,
    pub fidelity: f64,
    pub sq_out_db: f64,
    pub antisq_out_db: f64,
    pub mc_fidelity: Option<f64>,
    pub mc_stderr: Option<f64>,
}

pub const SWEEP_HEADER: &str =
    "target_db,epr_db,R,gx,gp,fidelity,sq_out_db,antisq_out_db,mc_fidelity,mc_stderr";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn render_rows(rows: &[SweepRow], format: Format) -> String {
    match format {
        Format::Csv => {
            let mut s = String::from(SWEEP_HEADER);
            s.push('\n');
            for r in rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{}",
                    r.target_db,
                    r.epr_db,
                    r.reflectivity,
                    r.gx,
                    r.gp,
                    r.fidelity,
                    r.sq_out_db,
                    r.antisq_out_db,
                    opt(r.mc_fidelity),
                    opt(r.mc_stderr)
                );
            }
            s
        }
        Format::Json => serde_json::to_string_pretty(rows).expect("rows serialize") + "\n",
    }
}

/// Monte Carlo fidelity of a shot run and its batch standard error.
pub fn mc_fidelity(
    target: &GaussianState,
    data: &HomodyneDataset,
) -> Result<(f64, Option<f64>), CliError> {
    let full = reconstruct(data)?;
    let f = fidelity(target, &full.state)?.fidelity;
    let chunk = data.len() / MC_BATCHES;
    let batches: Option<Vec<f64>> = (0..MC_BATCHES)
        .map(|b| {
            let part = HomodyneDataset {
                shots: data.shots[b * chunk..(b + 1) * chunk].to_vec(),
                provenance: data.provenance.clone(),
            };
            let rec = reconstruct(&part).ok()?;
            fidelity(target, &rec.state).ok().map(|r| r.fidelity)
        })
        .collect();
    let stderr = batches.map(|fs| {
        let n = fs.len() as f64;
        let m = fs.iter().sum::<f64>() / n;
        let var = fs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    });
    Ok((f, stderr))
}

fn sweep_row(
    spec: &ExperimentSpec,
    target_db: f64,
    epr_db: f64,
    seed: u64,
) -> Result<SweepRow, CliError> {
    let cfg = spec.gate_config_with(target_db, epr_db)?;
    let input = spec.input()?;
    let res = run_gate_analytic(&cfg, &input)?;
    let (gx, gp) = cfg.gains()?;
    let sq = squeezing_db(&res.output)?;
    let (mc_fidelity, mc_stderr) = if spec.n_shots > 0 {
        let data = run_gate_shots(&cfg, &input, spec.n_shots, &spec.phases(), seed)?;
        let (f, se) = mc_fidelity(&res.target, &data)?;
        (Some(f), se)
    } else {
        (None, None)
    };
    Ok(SweepRow {
        target_db,
        epr_db,
        reflectivity: cfg.reflectivity,
        gx,
        gp,
        fidelity: fidelity(&res.target, &res.output)?.fidelity,
        sq_out_db: sq.min_variance_db,
        antisq_out_db: sq.max_variance_db,
        mc_fidelity,
        mc_stderr,
    })
}

/// Evaluates every sweep point; rows come back in sweep order.
pub fn sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRow>, CliError> {
    spec.sweep_points()
        .into_par_iter()
        .enumerate()
        .map(|(k, v)| {
            let seed = spec.seed.wrapping_add(k as u64);
            match spec.command {
                Command::SweepEpr => sweep_row(spec, spec.target_db, v, seed),
                _ => sweep_row(spec, v, spec.epr_db, seed),
            }
        })
        .collect()
}

/// Summary of the Fourier-then-squeeze run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexReport {
    pub target_db: f64,
    pub epr_db: f64,
    #[serde(rename = "R")]
    pub reflectivity: f64,
    pub gx: f64,
    pub gp: f64,
    pub fidelity: f64,
    /// Power (variance plus squared mean) of the squeezed quadrature, dB over SNL.
    pub signal_power_db: f64,
    /// Variance of the conjugate quadrature, dB over SNL.
    pub conjugate_variance_db: f64,
    pub x_power_db: f64,
    pub p_power_db: f64,
    pub x_variance_db: f64,
    pub p_variance_db: f64,
    pub mc_fidelity: Option<f64>,
    pub mc_stderr: Option<f64>,
}

/// Analytic report for the complex operation on `input`.
pub fn complex_report(
    target_db: f64,
    epr_db: f64,
    input: &GaussianState,
    knobs: Option<&ExperimentSpec>,
) -> Result<(ComplexReport, GateResult), CliError> {
    let mut cfg = complex_config(target_db, epr_db, input)?;
    if let Some(spec) = knobs {
        cfg = spec.apply_knobs(cfg);
    }
    let res = run_complex(&cfg, input)?;
    let (gx, gp) = cfg.gains()?;
    let out = &res.output;
    let power = |k: usize| out.cov()[(k, k)] + out.mean()[k].powi(2);
    let signal = if cfg.reflectivity <= 0.5 { 0 } else { 1 };
    let report = ComplexReport {
        target_db,
        epr_db,
        reflectivity: cfg.reflectivity,
        gx,
        gp,
        fidelity: fidelity(&res.target, out)?.fidelity,
        signal_power_db: variance_db(power(signal)),
        conjugate_variance_db: variance_db(out.cov()[(1 - signal, 1 - signal)]),
        x_power_db: variance_db(power(0)),
        p_power_db: variance_db(power(1)),
        x_variance_db: variance_db(out.cov()[(0, 0)]),
        p_variance_db: variance_db(out.cov()[(1, 1)]),
        mc_fidelity: None,
        mc_stderr: None,
    };
    Ok((report, res))
}

const COMPLEX_HEADER: &str = "target_db,epr_db,R,gx,gp,fidelity,signal_power_db,conjugate_variance_db,x_power_db,p_power_db,x_variance_db,p_variance_db,mc_fidelity,mc_stderr";

fn run_complex_command(spec: &ExperimentSpec) -> Result<(), CliError> {
    let input = spec.input()?;
    let (mut report, res) = complex_report(spec.target_db, spec.epr_db, &input, Some(spec))?;
    if spec.n_shots > 0 {
        let data = run_complex_shots(&res.config, &input, spec.n_shots, &spec.phases(), spec.seed)?;
        let (f, se) = mc_fidelity(&res.target, &data)?;
        report.mc_fidelity = Some(f);
        report.mc_stderr = se;
    }
    let body = match spec.format {
        Format::Csv => {
            let r = &report;
            format!(
                "{COMPLEX_HEADER}\n{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.target_db,
                r.epr_db,
                r.reflectivity,
                r.gx,
                r.gp,
                r.fidelity,
                r.signal_power_db,
                r.conjugate_variance_db,
                r.x_power_db,
                r.p_power_db,
                r.x_variance_db,
                r.p_variance_db,
                opt(r.mc_fidelity),
                opt(r.mc_stderr)
            )
        }
        Format::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
    };
    emit(spec, &body)?;
    if let Some(path) = &spec.wigner_out {
        let grid = GridSpec::square(8.0, 0.1);
        let w_in = wigner(&input, &grid)?;
        let w_out = wigner(&res.output, &grid)?;
        let mut s = String::from("x,p,w_input,w_output\n");
        for j in 0..grid.np() {
            for i in 0..grid.nx() {
                let _ = writeln!(
                    s,
                    "{},{},{},{}",
                    grid.x(i),
                    grid.p(j),
                    w_in.at(i, j),
                    w_out.at(i, j)
                );
            }
        }
        write_file(path, &s)?;
    }
    Ok(())
}

/// Reconstruction summary written next to a tomography dataset.
#[derive(Debug, Clone, Serialize)]
pub struct TomoReport {
    pub label: String,
    pub target_db: f64,
    pub axis: Axis,
    pub mean: [f64; 2],
    /// `[V_XX, V_XP, V_PP]`
    pub cov: [f64; 3],
    pub mean_stderr: [f64; 2],
    pub cov_stderr: [f64; 3],
    pub analytic_mean: [f64; 2],
    pub analytic_cov: [f64; 3],
    pub within_3_stderr: bool,
    pub clamped: bool,
    pub fidelity: f64,
    pub analytic_fidelity: f64,
}

fn tomo_report(
    label: &str,
    cfg: &GateConfig,
    axis: Axis,
    res: &GateResult,
    rec: &Reconstruction,
) -> Result<TomoReport, CliError> {
    let c = rec.state.cov();
    let a = res.output.cov();
    let se = [rec.cov_stderr.xx, rec.cov_stderr.xp, rec.cov_stderr.pp];
    let cov = [c[(0, 0)], c[(0, 1)], c[(1, 1)]];
    let analytic_cov = [a[(0, 0)], a[(0, 1)], a[(1, 1)]];
    let within = cov
        .iter()
        .zip(analytic_cov)
        .zip(se)
        .all(|((x, y), s)| (x - y).abs() <= 3.0 * s);
    Ok(TomoReport {
        label: label.to_string(),
        target_db: cfg.target_db(),
        axis,
        mean: [rec.state.mean()[0], rec.state.mean()[1]],
        cov,
        mean_stderr: rec.mean_stderr,
        cov_stderr: se,
        analytic_mean: [res.output.mean()[0], res.output.mean()[1]],
        analytic_cov,
        within_3_stderr: within,
        clamped: rec.clamped,
        fidelity: fidelity(&res.target, &rec.state)?.fidelity,
        analytic_fidelity: fidelity(&res.target, &res.output)?.fidelity,
    })
}

fn tomo_shots(spec: &ExperimentSpec) -> usize {
    if spec.n_shots == 0 {
        DEFAULT_TOMO_SHOTS
    } else {
        spec.n_shots
    }
}

fn companion(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn run_tomo(spec: &ExperimentSpec) -> Result<(), CliError> {
    let out = output_path(&ExperimentSpec {
        format: Format::Csv,
        ..spec.clone()
    })
    .expect("validated: tomo has an output path");
    let cfg = spec.gate_config(spec.target_db)?;
    let input = spec.input()?;
    let mut data = run_gate_shots(&cfg, &input, tomo_shots(spec), &spec.phases(), spec.seed)?;
    data.provenance.label = Some("gate".into());
    data.save(&out).map_err(io_err(&out))?;
    let res = run_gate_analytic(&cfg, &input)?;
    let rec = reconstruct(&data)?;
    let report = tomo_report("gate", &cfg, spec.axis, &res, &rec)?;
    let path = companion(&out, ".recon.json");
    write_file(
        &path,
        &(serde_json::to_string_pretty(&report).expect("serializes") + "\n"),
    )
}

/// One input of the six-state phase-space test.
#[derive(Debug, Clone, Copy)]
pub struct Fig3Scenario {
    pub label: &'static str,
    pub target_db: f64,
    pub axis: Axis,
    pub input: (f64, f64),
}

/// Coherent inputs spread over phase space; A–C squeeze X, D–F squeeze P.
pub const FIG3_SCENARIOS: [Fig3Scenario; 6] = [
    Fig3Scenario {
        label: "A",
        target_db: 4.1,
        axis: Axis::Amplitude,
        input: (2.0, 1.0),
    },
    Fig3Scenario {
        label: "B",
        target_db: 7.2,
        axis: Axis::Amplitude,
        input: (-1.0, 2.0),
    },
    Fig3Scenario {
        label: "C",
        target_db: 10.0,
        axis: Axis::Amplitude,
        input: (-2.0, -1.0),
    },
    Fig3Scenario {
        label: "D",
        target_db: 4.1,
        axis: Axis::Phase,
        input: (1.0, -2.0),
    },
    Fig3Scenario {
        label: "E",
        target_db: 7.2,
        axis: Axis::Phase,
        input: (2.5, 0.5),
    },
    Fig3Scenario {
        label: "F",
        target_db: 10.0,
        axis: Axis::Phase,
        input: (-0.5, -2.5),
    },
];

/// Shot run, reconstruction and analytic prediction for one scenario.
pub fn fig3_scenario(
    spec: &ExperimentSpec,
    sc: &Fig3Scenario,
    seed: u64,
) -> Result<(TomoReport, GateResult, Reconstruction), CliError> {
    let cfg = spec.apply_knobs(GateConfig::for_target(sc.target_db, sc.axis, spec.epr_db)?);
    let input = GaussianState::vacuum(1)?.displace(0, sc.input.0, sc.input.1)?;
    let data = run_gate_shots(&cfg, &input, tomo_shots(spec), &spec.phases(), seed)?;
    let res = run_gate_analytic(&cfg, &input)?;
    let rec = reconstruct(&data)?;
    let report = tomo_report(sc.label, &cfg, sc.axis, &res, &rec)?;
    Ok((report, res, rec))
}

fn run_fig3(spec: &ExperimentSpec) -> Result<(), CliError> {
    let out = output_path(&ExperimentSpec {
        format: Format::Csv,
        ..spec.clone()
    })
    .expect("validated: tomo has an output path");
    let results = FIG3_SCENARIOS
        .iter()
        .enumerate()
        .map(|(k, sc)| fig3_scenario(spec, sc, spec.seed.wrapping_add(k as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from("scenario,source,x,p\n");
    for (report, res, rec) in &results {
        for (source, state) in [("predicted", &res.output), ("measured", &rec.state)] {
            for pt in ellipse(state, 1.0)? {
                let _ = writeln!(csv, "{},{},{},{}", report.label, source, pt[0], pt[1]);
            }
        }
    }
    write_file(&out, &csv)?;
    let reports: Vec<&TomoReport> = results.iter().map(|r| &r.0).collect();
    let path = companion(&out, ".recon.json");
    write_file(
        &path,
        &(serde_json::to_string_pretty(&reports).expect("serializes") + "\n"),
    )
}

#[derive(Serialize)]
struct ValidationOutput<'a> {
    all_pass: bool,
    verdicts: &'a [NamedVerdict],
}

fn render_validation(verdicts: &[NamedVerdict], all_pass: bool) -> String {
    serde_json::to_string_pretty(&ValidationOutput { all_pass, verdicts }).expect("serializes")
        + "\n"
}
