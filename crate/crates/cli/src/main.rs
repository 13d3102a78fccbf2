//! `mfhurst` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

use mfhurst::hurstscale::{apply_correction, fit_scaling, DEFAULT_A1};
use mfhurst::ingest::{load_price_csv, validate_span, write_price_csv, ColumnSpec, PriceSeries};
use mfhurst::io;
use mfhurst::mfdfa::mfdfa_values;
use mfhurst::pipeline::{run_pipeline, window_for_dates, MfdfaSettings, PipelineConfig};
use mfhurst::rolling::{annotate_events, rolling_ghe, EventSet, RollingConfig};
use mfhurst::spectrum::{singularity_spectrum, strengths};
use mfhurst::synth::{self, CascadeSpec, RNG_ALGORITHM};
use mfhurst::transform::{derive_all, descriptive_stats, DEFAULT_JACKKNIFE_BLOCKS};
use mfhurst::{DerivedSeriesF64, Error, Result, SeriesKind};

#[derive(Parser, Debug)]
#[command(
    name = "mfhurst",
    version,
    about = "Multifractal DFA and rolling Hurst-exponent analysis"
)]
struct Cli {
    /// Pipeline TOML; its [mfdfa] section also seeds the defaults of other subcommands.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files (created if missing).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for synthetic generators.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load and validate a price CSV; write it in canonical `date,close` form.
    Ingest(IngestArgs),
    /// Descriptive statistics with jackknife errors for all derived series.
    Stats(StatsArgs),
    /// Generalized Hurst exponents h(q) of one series.
    Mfdfa(MfdfaArgs),
    /// Singularity spectrum and multifractal strengths from a ghe.csv.
    Spectrum(SpectrumArgs),
    /// Rolling-window h(2) and strengths, segmented by events.
    Roll(RollArgs),
    /// Generate a synthetic series.
    Synth(SynthArgs),
    /// Apply or fit the finite-sample correction H2(n) = H2 n / (n + a1).
    HurstCorrect(HurstCorrectArgs),
    /// Run the full pipeline described by --config.
    Run,
}

#[derive(Args, Debug, Clone)]
struct ColumnArgs {
    #[arg(long, default_value = "date")]
    date_col: String,
    #[arg(long, default_value = "close")]
    price_col: String,
    /// chrono format of the date column (ISO-8601 when omitted).
    #[arg(long)]
    date_format: Option<String>,
    /// Drop rows with missing, unparseable or non-positive prices.
    #[arg(long)]
    skip_bad_rows: bool,
}

impl ColumnArgs {
    fn spec(&self) -> ColumnSpec {
        ColumnSpec {
            date_col: self.date_col.clone(),
            price_col: self.price_col.clone(),
            date_format: self.date_format.clone(),
            skip_bad_rows: self.skip_bad_rows,
        }
    }
}

#[derive(Args, Debug)]
struct IngestArgs {
    input: PathBuf,
    #[command(flatten)]
    columns: ColumnArgs,
    /// With --expected-end, report coverage of this span.
    #[arg(long, requires = "expected_end")]
    expected_start: Option<NaiveDate>,
    #[arg(long, requires = "expected_start")]
    expected_end: Option<NaiveDate>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    /// Price CSV.
    input: PathBuf,
    #[command(flatten)]
    columns: ColumnArgs,
    /// Jackknife blocks.
    #[arg(long, default_value_t = DEFAULT_JACKKNIFE_BLOCKS)]
    blocks: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum KindArg {
    Returns,
    #[value(name = "abs_returns", alias = "abs-returns")]
    AbsReturns,
    #[value(name = "vol_increments", alias = "vol-increments")]
    VolIncrements,
}

/// A `date,value` series CSV, or a price CSV when `--prices` is given.
#[derive(Args, Debug)]
struct SeriesArgs {
    input: PathBuf,
    /// Treat the input as prices and analyse the derived series chosen by --kind.
    #[arg(long)]
    prices: bool,
    #[arg(long, value_enum, default_value = "returns", requires = "prices")]
    kind: KindArg,
    #[command(flatten)]
    columns: ColumnArgs,
}

#[derive(Args, Debug, Default)]
struct MfdfaFlags {
    #[arg(long, allow_negative_numbers = true)]
    q_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    q_max: Option<f64>,
    #[arg(long)]
    q_step: Option<f64>,
    #[arg(long)]
    s_min: Option<usize>,
    #[arg(long)]
    s_max: Option<usize>,
    #[arg(long)]
    n_scales: Option<usize>,
    #[arg(long)]
    detrend_order: Option<usize>,
    /// Smallest scale used in the log-log fit.
    #[arg(long)]
    fit_min: Option<usize>,
    /// Largest scale used in the log-log fit.
    #[arg(long)]
    fit_max: Option<usize>,
}

impl MfdfaFlags {
    fn apply(&self, mut s: MfdfaSettings) -> MfdfaSettings {
        s.q_min = self.q_min.unwrap_or(s.q_min);
        s.q_max = self.q_max.unwrap_or(s.q_max);
        s.q_step = self.q_step.unwrap_or(s.q_step);
        s.s_min = self.s_min.unwrap_or(s.s_min);
        s.s_max = self.s_max.or(s.s_max);
        s.n_scales = self.n_scales.unwrap_or(s.n_scales);
        s.detrend_order = self.detrend_order.unwrap_or(s.detrend_order);
        s.fit_min = self.fit_min.or(s.fit_min);
        s.fit_max = self.fit_max.or(s.fit_max);
        s
    }
}

#[derive(Args, Debug)]
struct MfdfaArgs {
    #[command(flatten)]
    series: SeriesArgs,
    #[command(flatten)]
    mfdfa: MfdfaFlags,
    /// Also write fluctuation.csv (q, s, F).
    #[arg(long)]
    fluctuation: bool,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    /// A ghe.csv written by `mfdfa`.
    input: PathBuf,
}

#[derive(Args, Debug)]
struct RollArgs {
    #[command(flatten)]
    series: SeriesArgs,
    #[command(flatten)]
    mfdfa: MfdfaFlags,
    /// Observations per window (1095 for weekend-trading calendars, else 750).
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, default_value_t = 1)]
    step: usize,
    /// `name,date` CSV of events (built-in set when omitted).
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum SynthKind {
    Noise,
    Fgn,
    Cascade,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: SynthKind,
    /// Length (noise, fgn).
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// Hurst exponent (fgn).
    #[arg(long, default_value_t = 0.5)]
    h: f64,
    /// Heavy weight in (0.5, 1) (cascade).
    #[arg(long, default_value_t = 0.75)]
    p: f64,
    /// Cascade levels; the output has 2^levels points.
    #[arg(long, default_value_t = 16)]
    levels: u32,
    /// Output file name inside --out-dir.
    #[arg(long, default_value = "series.csv")]
    output: String,
}

#[derive(Args, Debug)]
struct HurstCorrectArgs {
    /// Measured h(2) to correct.
    #[arg(
        long,
        required_unless_present = "fit",
        conflicts_with = "fit",
        requires = "n"
    )]
    h2: Option<f64>,
    /// Sample size of the measurement.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_A1)]
    a1: f64,
    /// `n,h2` CSV to fit (H2, a1) from.
    #[arg(long)]
    fit: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.class().exit_code() as u8)
        }
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Command::Run = cli.command {
        return run(&cli);
    }
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| usage(format!("thread pool: {e}")))?;
    }
    let base = match &cli.config {
        Some(p) => load_config(p)?.mfdfa,
        None => MfdfaSettings::default(),
    };
    let out = Output::new(cli.out_dir.clone().unwrap_or_else(|| PathBuf::from(".")))?;
    match &cli.command {
        Command::Ingest(a) => ingest(a, &out),
        Command::Stats(a) => stats(a, &out),
        Command::Mfdfa(a) => mfdfa(a, base, &out),
        Command::Spectrum(a) => spectrum(a, &out),
        Command::Roll(a) => roll(a, base, &out),
        Command::Synth(a) => synth(a, cli.seed, &out),
        Command::HurstCorrect(a) => hurst_correct(a, &out),
        Command::Run => unreachable!("handled above"),
    }
}

fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => usage(format!("config file {} not found", path.display())),
        _ => Error::io(path.display().to_string(), e),
    })?;
    PipelineConfig::from_toml(&text)
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        Ok(Self { dir })
    }

    fn write(
        &self,
        name: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<()> {
        let mut buf = Vec::new();
        fill(&mut buf).map_err(|e| Error::io(name, e))?;
        let path = self.dir.join(name);
        fs::write(&path, buf).map_err(|e| Error::io(path.display().to_string(), e))?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

fn load_prices(path: &Path, columns: &ColumnArgs) -> Result<PriceSeries<f64>> {
    let (series, report) = load_price_csv::<f64>(path, &columns.spec())?;
    if !report.skipped.is_empty() {
        log::warn!(
            "{}: skipped {} bad rows",
            path.display(),
            report.skipped.len()
        );
    }
    if report.reordered {
        log::warn!(
            "{}: rows were not in date order and have been sorted",
            path.display()
        );
    }
    Ok(series)
}

fn load_series(a: &SeriesArgs) -> Result<DerivedSeriesF64> {
    if a.prices {
        let [r, ar, vi] = derive_all(&load_prices(&a.input, &a.columns)?)?;
        return Ok(match a.kind {
            KindArg::Returns => r,
            KindArg::AbsReturns => ar,
            KindArg::VolIncrements => vi,
        });
    }
    let file = fs::File::open(&a.input).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => {
            Error::Ingest(mfhurst::ingest::IngestError::FileNotFound(a.input.clone()))
        }
        _ => Error::io(a.input.display().to_string(), e),
    })?;
    let source = a
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(io::read_series_csv(file, SeriesKind::Raw, &source)?)
}

fn ingest(a: &IngestArgs, out: &Output) -> Result<()> {
    let (series, report) = load_price_csv::<f64>(&a.input, &a.columns.spec())?;
    println!(
        "{}: {} rows read, {} kept, {} skipped{}",
        a.input.display(),
        report.rows_read,
        series.len(),
        report.skipped.len(),
        if report.reordered {
            ", reordered by date"
        } else {
            ""
        }
    );
    for s in &report.skipped {
        println!("  skipped row {}: {}", s.row, s.reason);
    }
    if let (Some(start), Some(end)) = (a.expected_start, a.expected_end) {
        if start >= end {
            return Err(usage(format!("expected span {start}..{end} is empty")));
        }
        let c = validate_span(&series, start, end);
        println!(
            "coverage {:?}: {} to {}, {} observations, largest gap {} days ending {}, {} gaps over 5 days",
            c.status,
            c.first,
            c.last,
            c.count,
            c.largest_gap.days,
            c.largest_gap.to,
            c.long_gaps.len()
        );
    }
    out.write("prices.csv", |b| write_price_csv(&series, b))
}

fn stats(a: &StatsArgs, out: &Output) -> Result<()> {
    let prices = load_prices(&a.input, &a.columns)?;
    let rows = derive_all(&prices)?
        .iter()
        .map(|s| Ok((s.kind(), descriptive_stats(s, a.blocks)?)))
        .collect::<Result<Vec<_>>>()?;
    out.write("stats.csv", |b| io::write_stats_csv(&rows, b))
}

fn mfdfa(a: &MfdfaArgs, base: MfdfaSettings, out: &Output) -> Result<()> {
    let config = a.mfdfa.apply(base).to_config()?;
    let series = load_series(&a.series)?;
    let (curve, surface) = mfdfa_values(series.values(), &config)?;
    if let Some(h2) = curve.h(2.0) {
        println!(
            "h(2) = {h2:.6} over {} observations ({})",
            series.len(),
            curve.quality().label()
        );
    }
    out.write("ghe.csv", |b| io::write_ghe_csv(&curve, b))?;
    if a.fluctuation {
        out.write("fluctuation.csv", |b| {
            io::write_fluctuation_csv(&surface, b)
        })?;
    }
    Ok(())
}

fn spectrum(a: &SpectrumArgs, out: &Output) -> Result<()> {
    let file = fs::File::open(&a.input).map_err(|e| Error::io(a.input.display().to_string(), e))?;
    let curve = io::read_ghe_csv::<f64, _>(file)?;
    let alpha = singularity_spectrum(&curve)?;
    let rows = strengths(&curve, &alpha)?;
    out.write("alpha.csv", |b| io::write_alpha_csv(&alpha, b))?;
    out.write("strength.csv", |b| io::write_strength_csv(&rows, b))
}

fn roll(a: &RollArgs, base: MfdfaSettings, out: &Output) -> Result<()> {
    let mfdfa = a.mfdfa.apply(base).to_config()?;
    let events = match &a.events {
        Some(p) => {
            let f = fs::File::open(p).map_err(|e| Error::io(p.display().to_string(), e))?;
            io::read_events_csv(f)?
        }
        None => EventSet::default_events(),
    };
    let series = load_series(&a.series)?;
    let window = a
        .window
        .unwrap_or_else(|| window_for_dates(series.dates().iter().copied()));
    let config = RollingConfig {
        window,
        step: a.step,
        mfdfa,
    };
    let result = rolling_ghe(&series, &config)?;
    let annotated = annotate_events(&result, &events);
    println!("{} windows of {window} observations", result.rows.len());
    out.write("rolling.csv", |b| io::write_rolling_csv(&annotated, b))?;
    out.write("segments.csv", |b| io::write_segments_csv(&annotated, b))
}

fn synth(a: &SynthArgs, seed: Option<u64>, out: &Output) -> Result<()> {
    let (series, description) = match a.kind {
        SynthKind::Noise => {
            let seed = seed.unwrap_or(0);
            (
                synth::gaussian_noise::<f64>(a.n, seed)?,
                format!("gaussian noise n={} seed={seed}", a.n),
            )
        }
        SynthKind::Fgn => {
            let seed = seed.unwrap_or(0);
            let (s, method) = synth::fgn_with_method::<f64>(a.n, a.h, seed)?;
            (
                s,
                format!("fgn n={} H={} seed={seed} method={method:?}", a.n, a.h),
            )
        }
        SynthKind::Cascade => {
            let spec = CascadeSpec {
                levels: a.levels,
                weight: a.p,
                seed,
            };
            let seed = seed.map_or("none".to_string(), |s| s.to_string());
            (
                synth::binomial_cascade::<f64>(&spec)?,
                format!("binomial cascade levels={} p={} seed={seed}", a.levels, a.p),
            )
        }
    };
    let comments = [
        format!("generator: {description}"),
        format!("rng: {RNG_ALGORITHM}"),
        format!("tool: mfhurst {}", env!("CARGO_PKG_VERSION")),
    ];
    out.write(&a.output, |b| io::write_series_csv(&series, &comments, b))
}

fn hurst_correct(a: &HurstCorrectArgs, out: &Output) -> Result<()> {
    if let Some(path) = &a.fit {
        let file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let points = io::read_points_csv::<f64, _>(file)?;
        let fit = fit_scaling(&points)?;
        println!(
            "H2 = {} a1 = {} residual = {:e} after {} iterations",
            fit.h2_inf, fit.a1, fit.residual_norm, fit.iterations
        );
        return out.write("scaling_fit.csv", |b| io::write_scaling_fit_csv(&fit, b));
    }
    let (h2, n) = match (a.h2, a.n) {
        (Some(h2), Some(n)) => (h2, n),
        _ => return Err(usage("--h2 and --n are required unless --fit is given")),
    };
    let corrected = apply_correction(h2, n, a.a1)?;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{corrected}").map_err(|e| Error::io("stdout", e))
}

fn run(cli: &Cli) -> Result<()> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| usage("`run` needs --config <file>"))?;
    let mut config = load_config(path)?;
    if let Some(dir) = &cli.out_dir {
        config.out_dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        for input in &mut config.inputs {
            if let Some(s) = &mut input.synthetic {
                s.seed = seed;
            }
        }
    }
    let manifest = run_pipeline(&config, cli.threads)?;
    for record in &manifest.outputs {
        println!("wrote {}", config.out_dir.join(&record.file).display());
    }
    println!(
        "wrote {}",
        config
            .out_dir
            .join(mfhurst::pipeline::MANIFEST_FILE)
            .display()
    );
    Ok(())
}
