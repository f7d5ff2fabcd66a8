//! The `qcdma` command-line tool.
//!
//! Exit codes: 0 on success, 1 on a numeric failure, 2 on a usage or
//! configuration error.

mod config;
mod plot;
mod sweep;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{ChaosSource, ChannelSpec, ConfigError, ModelSpec, RunConfig};
pub use plot::{render_svg, PlotOptions};
pub use sweep::{grid, run_sweep, SweepRow, SweepVar, SWEEP_HEADER};

use crate::chaos::{correction_factor_from_psd, empirical_correction_factor, generate_phase_process, PsdSpec};
use crate::chaos::{CorrectionFactor, DEFAULT_BAND};
use crate::montecarlo::{self, Model};
use crate::network::{secret_key_rate, SkrBreakdown, User, UserParams, UserRate};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "QCDMA_CONFIG";

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or input files.
    Usage(String),
    /// The computation itself failed.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::InvalidParameter { .. } | crate::Error::CorrectionMismatch { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(format!("config error: {e}"))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "qcdma", version, about = "Key rates for two-user CV-QKD over a shared channel with chaotic phase coding")]
pub struct Cli {
    /// Run configuration file.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one operating point and print every intermediate quantity.
    Point(PointArgs),
    /// Evaluate key rates over a grid and write a CSV.
    Sweep(SweepArgs),
    /// Compare Monte Carlo statistics against the analytic values.
    Mc(McArgs),
    /// Analytic and empirical correction factors of the configured spectra.
    Chaos(ChaosArgs),
    /// Render CSV columns as an SVG line plot.
    Plot(PlotArgs),
}

#[derive(Debug, Args, Default, Clone)]
pub struct Overrides {
    /// Distance in km (uses the configured attenuation).
    #[arg(long)]
    pub d: Option<f64>,
    /// Correction factor for both users.
    #[arg(long)]
    pub m: Option<f64>,
    /// Modulation variance for both users.
    #[arg(long = "v-s")]
    pub v_s: Option<f64>,
    /// Eve's EPR variance.
    #[arg(long)]
    pub w: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PointArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    /// Print a JSON object after the key=value lines.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Swept variable; `m` and `v_s` produce one curve per value over the
    /// distance grid.
    #[arg(long, value_enum)]
    pub var: SweepVar,
    #[arg(long, allow_hyphen_values = true)]
    pub min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub step: Option<f64>,
    /// Explicit comma-separated values instead of min/max/step.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with_all = ["min", "max", "step"])]
    pub values: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.0)]
    pub d_min: f64,
    #[arg(long, default_value_t = 60.0)]
    pub d_max: f64,
    #[arg(long, default_value_t = 1.0)]
    pub d_step: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Overwrite an existing output file.
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum McModel {
    Averaged,
    Explicit,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = McModel::Averaged)]
    pub model: McModel,
    /// Comparison CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the raw batch statistics.
    #[arg(long)]
    pub stats_out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct ChaosArgs {
    /// Flat band over the default band tuned to this factor, instead of the
    /// config spectra.
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub realizations: usize,
    #[arg(long, default_value_t = 102.4)]
    pub duration: f64,
    #[arg(long, default_value_t = 0.05)]
    pub dt: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Write one synthesized phase trajectory of user 1 as CSV.
    #[arg(long)]
    pub process_out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub x: String,
    /// Comma-separated y columns.
    #[arg(long, value_delimiter = ',', required = true)]
    pub y: Vec<String>,
    /// Column splitting rows into separate curves.
    #[arg(long)]
    pub group: Option<String>,
    #[arg(long)]
    pub logy: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Point(a) => point(&load(cli)?, a),
        Command::Sweep(a) => sweep(&load(cli)?, a),
        Command::Mc(a) => mc(&load(cli)?, a),
        Command::Chaos(a) => chaos(cli, a),
        Command::Plot(a) => plot(a),
    }
}

fn load(cli: &Cli) -> CliResult<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("no config file given (use --config or {CONFIG_ENV})")))?;
    let cfg = RunConfig::load(path)?;
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

/// Applies command-line overrides to a config.
pub fn apply_overrides(cfg: &RunConfig, o: &Overrides) -> crate::Result<RunConfig> {
    let mut c = cfg.clone();
    if let Some(d) = o.d {
        c.channel_at(d)?;
        c.channel.distance = Some(d);
        c.channel.eta = None;
    }
    if let Some(m) = o.m {
        CorrectionFactor::new(m)?;
        c.chaos = [ChaosSource::Factor(m), ChaosSource::Factor(m)];
    }
    if let Some(v_s) = o.v_s {
        c.user1 = UserParams::new(v_s, c.user1.v_0)?;
        c.user2 = UserParams::new(v_s, c.user2.v_0)?;
    }
    if let Some(w) = o.w {
        c.channel.w = w;
    }
    c.params()?;
    Ok(c)
}

fn create_output(path: &Path, force: bool) -> CliResult<BufWriter<File>> {
    if path.exists() && !force {
        return Err(CliError::Usage(format!(
            "refusing to overwrite {} (use --force)",
            path.display()
        )));
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", path.display())))
}

fn io_err(e: io::Error) -> CliError {
    CliError::Numeric(format!("write failed: {e}"))
}

/// Flat `key=value` view of a breakdown; numbers use the shortest
/// representation that parses back to the same `f64`.
pub fn breakdown_fields(b: &SkrBreakdown) -> Vec<(String, String)> {
    let mut out = vec![("eta".to_string(), b.eta.to_string())];
    for u in User::BOTH {
        let r: &UserRate = b.user(u);
        let k = u.number();
        let mut push = |name: &str, v: String| out.push((format!("{name}{k}"), v));
        push("v_b", r.v_b.to_string());
        push("v_b_given_a", r.v_b_given_a.to_string());
        push("i_ab", r.i_ab.to_string());
        push("xi", r.xi.to_string());
        push("psi", r.psi.to_string());
        push("xi_derived", r.xi_derived.to_string());
        push("xi_paper_literal", r.xi_paper_literal.to_string());
        push("psi_derived", r.psi_derived.to_string());
        push("psi_paper_literal", r.psi_paper_literal.to_string());
        push("nu_sq_e_max", r.eve_spectrum_sq[0].to_string());
        push("nu_sq_e_min", r.eve_spectrum_sq[1].to_string());
        push("nu_sq_cond_max", r.cond_spectrum_sq[0].to_string());
        push("nu_sq_cond_min", r.cond_spectrum_sq[1].to_string());
        push("s_e", r.s_e.to_string());
        push("s_e_cond", r.s_e_cond.to_string());
        push("chi", r.chi.to_string());
        push("chi_raw", r.chi_raw.to_string());
        push("r", r.r.to_string());
        push("r_raw", r.r_raw.to_string());
        push("sub_vacuum", r.sub_vacuum.to_string());
        push("r_baseline", r.r_baseline.to_string());
    }
    out.push(("r_total".to_string(), b.r_total.to_string()));
    out.push(("r_baseline".to_string(), b.r_baseline.to_string()));
    out
}

fn point(cfg: &RunConfig, a: &PointArgs) -> CliResult<()> {
    let cfg = apply_overrides(cfg, &a.overrides)?;
    let b = secret_key_rate(&cfg.params()?)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for (k, v) in breakdown_fields(&b) {
        writeln!(out, "{k}={v}").map_err(io_err)?;
    }
    if a.json {
        let json = serde_json::to_string(&b).map_err(|e| CliError::Numeric(e.to_string()))?;
        writeln!(out, "{json}").map_err(io_err)?;
    }
    Ok(())
}

fn sweep(cfg: &RunConfig, a: &SweepArgs) -> CliResult<()> {
    let cfg = apply_overrides(cfg, &a.overrides)?;
    let values = match (&a.values, a.min, a.max, a.step) {
        (Some(v), ..) => {
            if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                return Err(CliError::Usage("--values must be a non-empty list of numbers".into()));
            }
            v.clone()
        }
        (None, Some(lo), Some(hi), Some(step)) => grid(lo, hi, step).map_err(CliError::Usage)?,
        _ => return Err(CliError::Usage("give --values or all of --min, --max, --step".into())),
    };
    let distances = match a.var {
        SweepVar::D => Vec::new(),
        _ => grid(a.d_min, a.d_max, a.d_step).map_err(CliError::Usage)?,
    };
    let rows = run_sweep(&cfg, a.var, &values, &distances)?;
    let mut out = create_output(&a.out, a.force)?;
    sweep::write_csv(&rows, &mut out).map_err(io_err)?;
    out.flush().map_err(io_err)?;
    let flagged = rows.iter().filter(|r| r.degenerate).count();
    if flagged > 0 {
        eprintln!("note: {flagged} grid point(s) failed to evaluate and were written as 0 with degenerate=1");
    }
    Ok(())
}

fn mc(cfg: &RunConfig, a: &McArgs) -> CliResult<()> {
    let cfg = apply_overrides(cfg, &a.overrides)?;
    let p = cfg.params()?;
    let batch = match a.model {
        McModel::Averaged => montecarlo::simulate_averaged(&p, a.samples, a.seed)?,
        McModel::Explicit => {
            montecarlo::simulate_explicit_phase(&p, &cfg.psd(User::One)?, &cfg.psd(User::Two)?, a.samples, a.seed)?
        }
    };
    let stats = montecarlo::empirical_stats(&batch)?;
    drop(batch);
    for d in &stats.degenerate {
        eprintln!("note: {d}");
    }
    if stats.model == Model::ExplicitPhase {
        eprintln!("note: the explicit-phase model is compared against the phase-averaged formulas");
    }
    let rows = montecarlo::compare_with_analytic(&p, &stats)?;
    match &a.out {
        Some(path) => {
            let mut out = create_output(path, a.force)?;
            montecarlo::write_comparison_csv(&rows, &mut out)?;
            out.flush().map_err(io_err)?;
        }
        None => montecarlo::write_comparison_csv(&rows, io::stdout().lock())?,
    }
    if let Some(path) = &a.stats_out {
        let mut out = create_output(path, a.force)?;
        stats.write_csv(&mut out)?;
        out.flush().map_err(io_err)?;
    }
    Ok(())
}

fn chaos(cli: &Cli, a: &ChaosArgs) -> CliResult<()> {
    let spectra: Vec<(String, PsdSpec)> = match a.m {
        Some(m) => vec![("both".into(), PsdSpec::flat_band_for(m, DEFAULT_BAND.0, DEFAULT_BAND.1)?)],
        None => {
            let cfg = load(cli)?;
            vec![("1".into(), cfg.psd(User::One)?), ("2".into(), cfg.psd(User::Two)?)]
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for (k, (label, psd)) in spectra.iter().enumerate() {
        let analytic = correction_factor_from_psd(psd)?.value();
        let quadrature = (-psd.phase_variance_quadrature()?).exp();
        let e = empirical_correction_factor(psd, a.realizations, a.duration, a.dt, a.seed.wrapping_add(k as u64))?;
        let z = if e.std_err > 0.0 { (e.m_hat - analytic) / e.std_err } else { 0.0 };
        writeln!(
            out,
            "user={label} m_analytic={analytic} m_quadrature={quadrature} m_empirical={} std_err={} z_score={z} \
             second_harmonic={} realizations={}",
            e.m_hat, e.std_err, e.second_harmonic, e.realizations
        )
        .map_err(io_err)?;
    }
    if let Some(path) = &a.process_out {
        let process = generate_phase_process(&spectra[0].1, a.duration, a.dt, a.seed)?;
        let mut w = create_output(path, a.force)?;
        process.write_csv(&mut w)?;
        w.flush().map_err(io_err)?;
    }
    Ok(())
}

fn plot(a: &PlotArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&a.input)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", a.input.display())))?;
    let opts = PlotOptions {
        x: a.x.clone(),
        y: a.y.clone(),
        group: a.group.clone(),
        logy: a.logy,
    };
    let (svg, notes) = render_svg(&text, &opts).map_err(CliError::Usage)?;
    for n in notes {
        eprintln!("note: {n}");
    }
    let mut out = create_output(&a.out, a.force)?;
    out.write_all(svg.as_bytes()).map_err(io_err)?;
    out.flush().map_err(io_err)?;
    Ok(())
}
