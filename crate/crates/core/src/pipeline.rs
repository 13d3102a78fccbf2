//! End-to-end run: ingest -> transforms -> stats -> rolling GHE -> event annotation,
//! written to one output directory together with a JSON manifest.
//!
//! Everything is written to a staging directory first and moved into place only when
//! the whole run has succeeded. The manifest omits the output directory and thread
//! count, so identical inputs give byte-identical manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::{
    load_price_csv, validate_span, ColumnSpec, CoverageReport, Observation, PriceSeries,
};
use crate::io;
use crate::mfdfa::{q_range, MfdfaConfig, ScaleGrid};
use crate::rolling::{
    annotate_events, rolling_ghe, EventSet, RollingConfig, CALENDAR_WINDOW, HURST_Q, TRADING_WINDOW,
};
use crate::spectrum::DEFAULT_STRENGTH_Q;
use crate::synth::{self, CascadeSpec, RNG_ALGORITHM};
use crate::transform::{derive_all, descriptive_stats, SeriesKind, DEFAULT_JACKKNIFE_BLOCKS};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TOOL_NAME: &str = "mfhurst";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfdfaSettings {
    pub q_min: f64,
    pub q_max: f64,
    pub q_step: f64,
    pub s_min: usize,
    pub s_max: Option<usize>,
    pub n_scales: usize,
    pub detrend_order: usize,
    pub fit_min: Option<usize>,
    pub fit_max: Option<usize>,
}

impl Default for MfdfaSettings {
    fn default() -> Self {
        use crate::mfdfa::*;
        Self {
            q_min: DEFAULT_Q_MIN,
            q_max: DEFAULT_Q_MAX,
            q_step: DEFAULT_Q_STEP,
            s_min: DEFAULT_S_MIN,
            s_max: None,
            n_scales: DEFAULT_N_SCALES,
            detrend_order: DEFAULT_DETREND_ORDER,
            fit_min: None,
            fit_max: None,
        }
    }
}

impl MfdfaSettings {
    /// Invalid settings are configuration (usage) errors, not numerical failures.
    pub fn to_config(&self) -> Result<MfdfaConfig<f64>> {
        let fit_range = match (self.fit_min, self.fit_max) {
            (None, None) => None,
            (lo, hi) => Some((lo.unwrap_or(0), hi.unwrap_or(usize::MAX))),
        };
        let config = MfdfaConfig {
            scales: ScaleGrid::Auto {
                s_min: self.s_min,
                s_max: self.s_max,
                count: self.n_scales,
            },
            q_grid: q_range(self.q_min, self.q_max, self.q_step).map_err(invalid_settings)?,
            detrend_order: self.detrend_order,
            fit_range,
        };
        config.validate().map_err(invalid_settings)?;
        Ok(config)
    }
}

fn invalid_settings(e: crate::mfdfa::MfdfaError) -> Error {
    Error::Config(format!("mfdfa settings: {e}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    Noise,
    Fgn,
    Cascade,
}

/// Generated input; the values drive log-returns of a synthetic price path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticInput {
    pub kind: SyntheticKind,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub hurst: Option<f64>,
    #[serde(default)]
    pub weight: Option<f64>,
    #[serde(default)]
    pub levels: Option<u32>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticInput>,
    /// Defaults to the file stem (or `synthetic`).
    #[serde(default)]
    pub instrument: Option<String>,
    #[serde(default)]
    pub columns: ColumnSpec,
    #[serde(default)]
    pub expected_start: Option<NaiveDate>,
    #[serde(default)]
    pub expected_end: Option<NaiveDate>,
}

impl InputSpec {
    pub fn file(path: impl Into<PathBuf>) -> Self {
        Self {
            path: Some(path.into()),
            synthetic: None,
            instrument: None,
            columns: ColumnSpec::default(),
            expected_start: None,
            expected_end: None,
        }
    }

    pub fn synthetic(spec: SyntheticInput) -> Self {
        Self {
            path: None,
            synthetic: Some(spec),
            ..Self::file("")
        }
    }

    fn name(&self) -> String {
        if let Some(i) = &self.instrument {
            return i.clone();
        }
        match &self.path {
            Some(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "input".into()),
            None => "synthetic".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RollingSettings {
    /// Observations per window; chosen from the calendar when absent
    /// (1095 if weekends are traded, 750 otherwise).
    pub window: Option<usize>,
    pub step: usize,
    /// `name,date` CSV; the built-in event set when absent.
    pub events: Option<PathBuf>,
}

impl Default for RollingSettings {
    fn default() -> Self {
        Self {
            window: None,
            step: 1,
            events: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub inputs: Vec<InputSpec>,
    /// Series kinds that get a rolling analysis.
    pub kinds: Vec<SeriesKind>,
    pub stats_blocks: usize,
    pub mfdfa: MfdfaSettings,
    pub rolling: RollingSettings,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            kinds: SeriesKind::DERIVED.to_vec(),
            stats_blocks: DEFAULT_JACKKNIFE_BLOCKS,
            mfdfa: MfdfaSettings::default(),
            rolling: RollingSettings::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Rejects every inconsistency before any computation.
    pub fn validate(&self) -> Result<ValidatedConfig> {
        let usage = |m: String| Err(Error::Config(m));
        if self.inputs.is_empty() {
            return usage("no inputs given".into());
        }
        if self.kinds.is_empty() || self.kinds.contains(&SeriesKind::Raw) {
            return usage(
                "kinds must be a non-empty subset of returns/abs_returns/vol_increments".into(),
            );
        }
        if self.stats_blocks < 2 {
            return usage(format!(
                "stats_blocks must be at least 2, got {}",
                self.stats_blocks
            ));
        }
        if self.rolling.step == 0 {
            return usage("rolling step must be at least 1".into());
        }
        let mut names = std::collections::HashSet::new();
        for input in &self.inputs {
            match (&input.path, &input.synthetic) {
                (Some(_), None) | (None, Some(_)) => {}
                _ => return usage("each input needs exactly one of `path` or `synthetic`".into()),
            }
            if let Some(s) = &input.synthetic {
                validate_synthetic(s)?;
            }
            if let (Some(a), Some(b)) = (input.expected_start, input.expected_end) {
                if a >= b {
                    return usage(format!("expected span {a}..{b} is empty"));
                }
            }
            if !names.insert(input.name()) {
                return usage(format!("duplicate instrument name `{}`", input.name()));
            }
        }
        let mfdfa = self.mfdfa.to_config()?;
        for q in [HURST_Q, DEFAULT_STRENGTH_Q] {
            if mfdfa.q_index(q).is_none() {
                return usage(format!(
                    "the q grid must contain ±{q} for the rolling summaries"
                ));
            }
        }
        if let Some(w) = self.rolling.window {
            mfdfa.scales_for(w)?;
        }
        let events = match &self.rolling.events {
            Some(p) => {
                let f = fs::File::open(p).map_err(|e| Error::io(p.display().to_string(), e))?;
                io::read_events_csv(f)?
            }
            None => EventSet::default_events(),
        };
        let parent = self
            .out_dir
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        if !parent.is_dir() {
            return usage(format!("output parent {} does not exist", parent.display()));
        }
        if self.out_dir.is_dir()
            && !self.out_dir.join(MANIFEST_FILE).exists()
            && dir_nonempty(&self.out_dir)?
        {
            return usage(format!(
                "output directory {} is not empty and holds no previous run",
                self.out_dir.display()
            ));
        }
        Ok(ValidatedConfig { mfdfa, events })
    }
}

fn validate_synthetic(s: &SyntheticInput) -> Result<()> {
    let missing = |f: &str| Error::Config(format!("synthetic {:?} input needs `{f}`", s.kind));
    match s.kind {
        SyntheticKind::Noise => {
            s.n.ok_or_else(|| missing("n"))?;
        }
        SyntheticKind::Fgn => {
            s.n.ok_or_else(|| missing("n"))?;
            let h = s.hurst.ok_or_else(|| missing("hurst"))?;
            if !(h > 0.0 && h < 1.0) {
                return Err(synth::SynthError::InvalidHurst(h).into());
            }
        }
        SyntheticKind::Cascade => {
            CascadeSpec {
                levels: s.levels.ok_or_else(|| missing("levels"))?,
                weight: s.weight.ok_or_else(|| missing("weight"))?,
                seed: None,
            }
            .validate()?;
        }
    }
    Ok(())
}

fn dir_nonempty(p: &Path) -> Result<bool> {
    Ok(fs::read_dir(p)
        .map_err(|e| Error::io(p.display().to_string(), e))?
        .next()
        .is_some())
}

pub struct ValidatedConfig {
    pub mfdfa: MfdfaConfig<f64>,
    pub events: EventSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub instrument: String,
    pub path: Option<String>,
    pub sha256: Option<String>,
    pub observations: usize,
    pub window: usize,
    pub coverage: Option<serde_json::Value>,
    pub skipped_rows: usize,
    pub dropped_zero_returns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: PipelineConfig,
    pub config_sha256: String,
    pub rng: Option<String>,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<FileRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Runs the pipeline on `threads` workers (rayon default when `None`).
pub fn run_pipeline(config: &PipelineConfig, threads: Option<usize>) -> Result<Manifest> {
    let validated = config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let staging = staging_dir(&config.out_dir);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(staging.display().to_string(), e))?;
    }
    fs::create_dir_all(&staging).map_err(|e| Error::io(staging.display().to_string(), e))?;

    let result = pool.install(|| execute(config, &validated, &staging));
    match result {
        Ok(manifest) => {
            if config.out_dir.exists() {
                fs::remove_dir_all(&config.out_dir)
                    .map_err(|e| Error::io(config.out_dir.display().to_string(), e))?;
            }
            fs::rename(&staging, &config.out_dir)
                .map_err(|e| Error::io(config.out_dir.display().to_string(), e))?;
            Ok(manifest)
        }
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            Err(e)
        }
    }
}

fn staging_dir(out: &Path) -> PathBuf {
    let name = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    out.with_file_name(format!(".{name}.partial"))
}

struct Writer<'a> {
    root: &'a Path,
    records: Vec<FileRecord>,
}

impl Writer<'_> {
    fn write(
        &mut self,
        rel: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<()> {
        let mut buf = Vec::new();
        fill(&mut buf).map_err(|e| Error::io(rel, e))?;
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        }
        fs::write(&path, &buf).map_err(|e| Error::io(path.display().to_string(), e))?;
        self.records.push(FileRecord {
            file: rel.to_string(),
            sha256: sha256_hex(&buf),
            bytes: buf.len() as u64,
        });
        Ok(())
    }
}

fn execute(
    config: &PipelineConfig,
    validated: &ValidatedConfig,
    staging: &Path,
) -> Result<Manifest> {
    let mut writer = Writer {
        root: staging,
        records: Vec::new(),
    };
    let mut inputs = Vec::new();
    let multi = config.inputs.len() > 1;
    let mut used_rng = false;

    for input in &config.inputs {
        let name = input.name();
        let prefix = if multi {
            format!("{name}/")
        } else {
            String::new()
        };
        let (prices, record_path, checksum, skipped) = match (&input.path, &input.synthetic) {
            (Some(path), _) => {
                let bytes = fs::read(path).map_err(|e| match e.kind() {
                    std::io::ErrorKind::NotFound => {
                        Error::Ingest(crate::ingest::IngestError::FileNotFound(path.clone()))
                    }
                    _ => Error::io(path.display().to_string(), e),
                })?;
                let (mut series, report) = load_price_csv::<f64>(path, &input.columns)?;
                if input.instrument.is_some() {
                    series = PriceSeries::new(name.clone(), series.observations().to_vec())?;
                }
                (
                    series,
                    Some(path.display().to_string()),
                    Some(sha256_hex(&bytes)),
                    report.skipped.len(),
                )
            }
            (None, Some(s)) => {
                used_rng = true;
                (synthetic_prices(s, &name)?, None, None, 0)
            }
            (None, None) => unreachable!("validated"),
        };

        let coverage: Option<CoverageReport> = match (input.expected_start, input.expected_end) {
            (Some(a), Some(b)) => Some(validate_span(&prices, a, b)),
            _ => None,
        };

        let derived = derive_all(&prices)?;
        let labels = ["returns.csv", "abs_returns.csv", "vol_increments.csv"];
        for (series, file) in derived.iter().zip(labels) {
            writer.write(&format!("{prefix}{file}"), |b| {
                io::write_series_csv(series, &[], b)
            })?;
        }

        let stats = derived
            .iter()
            .map(|s| Ok((s.kind(), descriptive_stats(s, config.stats_blocks)?)))
            .collect::<Result<Vec<_>>>()?;
        writer.write(&format!("{prefix}stats.csv"), |b| {
            io::write_stats_csv(&stats, b)
        })?;

        let window = config
            .rolling
            .window
            .unwrap_or_else(|| default_window(prices.observations()));
        let rolling_config = RollingConfig {
            window,
            step: config.rolling.step,
            mfdfa: validated.mfdfa.clone(),
        };
        let wanted: Vec<_> = derived
            .iter()
            .filter(|s| config.kinds.contains(&s.kind()))
            .collect();
        for series in wanted {
            let result = rolling_ghe(series, &rolling_config)?;
            let annotated = annotate_events(&result, &validated.events);
            writer.write(
                &format!("{prefix}rolling_{}.csv", series.kind().label()),
                |b| io::write_rolling_csv(&annotated, b),
            )?;
        }

        inputs.push(InputRecord {
            instrument: name,
            path: record_path,
            sha256: checksum,
            observations: prices.len(),
            window,
            coverage: coverage.map(|c| serde_json::to_value(c).expect("serializable")),
            skipped_rows: skipped,
            dropped_zero_returns: derived[2].dropped_zeros(),
        });
    }

    let mut recorded = config.clone();
    recorded.out_dir = PathBuf::new();
    let config_json = serde_json::to_vec(&recorded).expect("config serializes");
    let manifest = Manifest {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        config: recorded,
        config_sha256: sha256_hex(&config_json),
        rng: used_rng.then(|| RNG_ALGORITHM.to_string()),
        inputs,
        outputs: writer.records,
    };
    let mut f =
        fs::File::create(staging.join(MANIFEST_FILE)).map_err(|e| Error::io(MANIFEST_FILE, e))?;
    serde_json::to_writer_pretty(&mut f, &manifest)
        .map_err(|e| Error::io(MANIFEST_FILE, e.into()))?;
    writeln!(f).map_err(|e| Error::io(MANIFEST_FILE, e))?;
    Ok(manifest)
}

/// 1095 observations for series that trade on weekends, 750 otherwise.
pub fn default_window<T>(observations: &[Observation<T>]) -> usize {
    window_for_dates(observations.iter().map(|o| o.date))
}

/// Calendar-based window choice: more than 10% weekend dates means a market that
/// trades every day.
pub fn window_for_dates(dates: impl IntoIterator<Item = NaiveDate>) -> usize {
    let (mut weekend, mut total) = (0usize, 0usize);
    for d in dates {
        total += 1;
        if matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            weekend += 1;
        }
    }
    if weekend * 10 > total {
        CALENDAR_WINDOW
    } else {
        TRADING_WINDOW
    }
}

/// Price path `100 exp(0.01 * cumsum(z))` where `z` is the standardised generator output.
pub fn synthetic_prices(spec: &SyntheticInput, name: &str) -> Result<PriceSeries<f64>> {
    let values = match spec.kind {
        SyntheticKind::Noise => synth::gaussian_noise::<f64>(spec.n.unwrap_or(0), spec.seed)?,
        SyntheticKind::Fgn => {
            synth::fgn::<f64>(spec.n.unwrap_or(0), spec.hurst.unwrap_or(0.5), spec.seed)?
        }
        SyntheticKind::Cascade => synth::binomial_cascade::<f64>(&CascadeSpec {
            levels: spec.levels.unwrap_or(0),
            weight: spec.weight.unwrap_or(0.0),
            seed: Some(spec.seed),
        })?,
    };
    let v = values.values();
    let mean = crate::scalar::mean(v);
    let sd = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64).sqrt();
    let start = synth::synthetic_epoch();
    let mut log_price = 100f64.ln();
    let mut obs = vec![Observation {
        date: start,
        close: 100.0,
    }];
    for (i, x) in v.iter().enumerate() {
        log_price += 0.01 * (x - mean) / sd;
        obs.push(Observation {
            date: start + chrono::Duration::days(i as i64 + 1),
            close: log_price.exp(),
        });
    }
    Ok(PriceSeries::new(name, obs)?)
}
