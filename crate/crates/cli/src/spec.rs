//! Command-line and config-file front end, resolved into a [`SweepSpec`].

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use binoisy::montecarlo::{McSettings, MAX_JOINT_ALPHABET};
use binoisy::planner::Decoder;
use binoisy::{ConstellationKind, SystemConfig};
use clap::{Args, Parser, Subcommand};

use crate::error::SpecError;
use crate::parse::{parse_bool, parse_config, parse_constellation_list, parse_evm_list, parse_snr_range, ConfigFile};

const DEFAULT_SNR: &str = "0:30:5";
const DEFAULT_EVM: &str = "-10";
const DEFAULT_ANTENNAS: usize = 4;
/// Upper bound on antennas per side; the solvers only need `M/N`, but the
/// Monte Carlo paths allocate `N×M` matrices.
pub const MAX_ANTENNAS: usize = 4096;

#[derive(Debug, Parser)]
#[command(name = "binoisy", version, about = "Achievable rates of MIMO channels with transmit and receive noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Replica rates over a grid of constellations, SNRs and EVMs.
    RateSweep(Options),
    /// Replica rates next to finite-size Monte Carlo estimates.
    Validate(Options),
    /// Largest EVM that keeps the rate loss within a budget, per SNR.
    EvmPlan(Options),
}

#[derive(Debug, Args)]
struct Options {
    /// Flat key = value file with defaults for any of the flags below.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// matched, mismatched, both or highsnr (rate-sweep only).
    #[arg(long)]
    mode: Option<String>,
    /// Comma-separated list: gaussian, bpsk, qpsk, psk8, qam16, qam64.
    #[arg(long)]
    constellation: Option<String>,
    /// SNR grid in dB, start:stop:step.
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    /// Comma-separated EVM values in dB; -inf means ideal hardware.
    #[arg(long, allow_hyphen_values = true)]
    evm: Option<String>,
    /// Transmit antennas.
    #[arg(long = "M")]
    m: Option<String>,
    /// Receive antennas.
    #[arg(long = "N")]
    n: Option<String>,
    /// Monte Carlo seed (validate).
    #[arg(long)]
    seed: Option<String>,
    /// Allowed fractional rate loss (evm-plan).
    #[arg(long)]
    loss: Option<String>,
    /// matched or mismatched (evm-plan).
    #[arg(long)]
    decoder: Option<String>,
    /// Channel draws (validate).
    #[arg(long)]
    channels: Option<String>,
    /// Noise draws per channel and input for discrete inputs (validate).
    #[arg(long = "noise-draws")]
    noise_draws: Option<String>,
    /// Output file; standard output when absent or `-`.
    #[arg(long, short)]
    output: Option<String>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Report rates in nats instead of bits.
    #[arg(long)]
    nats: bool,
    /// Exit with status 0 even if some points fail to converge.
    #[arg(long = "allow-partial")]
    allow_partial: bool,
    /// Fill the wall_ms column (makes output run-dependent).
    #[arg(long)]
    timing: bool,
}

/// Replica evaluations requested by `rate-sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateMode {
    Matched,
    Mismatched,
    /// Closed-form `γ̄ → ∞` limits for Gaussian inputs.
    HighSnr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    RateSweep { modes: Vec<RateMode> },
    Validate { settings_seed: u64, channels: Option<usize>, noise_draws: Option<usize> },
    EvmPlan { loss: f64, decoder: Decoder },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

impl FromStr for Format {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, SpecError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(SpecError::value("format", format!("`{other}` is not csv or json"))),
        }
    }
}

/// A fully resolved, validated run.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub task: Task,
    pub constellations: Vec<ConstellationKind>,
    pub snr_db: Vec<f64>,
    pub evm_db: Vec<f64>,
    pub m: usize,
    pub n: usize,
    /// `None` writes to standard output.
    pub output: Option<PathBuf>,
    pub format: Format,
    pub nats: bool,
    pub allow_partial: bool,
    pub timing: bool,
}

impl SweepSpec {
    /// Parses a full command line (program name first). A `--config` file is
    /// read and its values apply wherever the corresponding flag is absent.
    pub fn from_argv<I, T>(argv: I) -> Result<Self, SpecError>
    where
        I: IntoIterator<Item = T>,
        T: Into<OsString> + Clone,
    {
        let cli = Cli::try_parse_from(argv)?;
        let (name, opts) = match &cli.command {
            Command::RateSweep(o) => ("rate-sweep", o),
            Command::Validate(o) => ("validate", o),
            Command::EvmPlan(o) => ("evm-plan", o),
        };
        let file = match &opts.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| SpecError::ConfigIo {
                    path: path.display().to_string(),
                    source,
                })?;
                parse_config(&text)?
            }
            None => ConfigFile::default(),
        };
        resolve(name, opts, &file)
    }
}

/// Flag value if given, else the config file's.
fn pick<'a>(flag: &'a Option<String>, file: &'a ConfigFile, key: &str) -> Option<&'a str> {
    flag.as_deref().or_else(|| file.get(key))
}

fn parse_num<T: FromStr>(key: &'static str, text: &str) -> Result<T, SpecError> {
    text.trim().parse().map_err(|_| SpecError::value(key, format!("`{}` is not a valid value", text.trim())))
}

fn antennas(key: &'static str, text: Option<&str>) -> Result<usize, SpecError> {
    let v = match text {
        Some(t) => parse_num::<usize>(key, t)?,
        None => DEFAULT_ANTENNAS,
    };
    if v == 0 || v > MAX_ANTENNAS {
        return Err(SpecError::value(key, format!("antenna count must be in 1..={MAX_ANTENNAS}, got {v}")));
    }
    Ok(v)
}

fn flag(value: bool, file: &ConfigFile, key: &'static str) -> Result<bool, SpecError> {
    Ok(value || file.get(key).map(|t| parse_bool(key, t)).transpose()?.unwrap_or(false))
}

fn resolve(command: &str, o: &Options, file: &ConfigFile) -> Result<SweepSpec, SpecError> {
    let mode = pick(&o.mode, file, "mode").map(|m| m.trim().to_ascii_lowercase());
    let task = match command {
        "rate-sweep" => {
            let modes = match mode.as_deref().unwrap_or("both") {
                "matched" => vec![RateMode::Matched],
                "mismatched" => vec![RateMode::Mismatched],
                "both" => vec![RateMode::Matched, RateMode::Mismatched],
                "highsnr" => vec![RateMode::HighSnr],
                other => return Err(SpecError::value("mode", format!("`{other}` is not matched, mismatched, both or highsnr"))),
            };
            Task::RateSweep { modes }
        }
        other => {
            if let Some(m) = mode.as_deref() {
                if m != other {
                    return Err(SpecError::value("mode", format!("`{m}` conflicts with the {other} command")));
                }
            }
            if other == "validate" {
                let positive = |key: &'static str, t: Option<&str>| -> Result<Option<usize>, SpecError> {
                    t.map(|t| {
                        let v = parse_num::<usize>(key, t)?;
                        if v == 0 {
                            return Err(SpecError::value(key, "must be positive"));
                        }
                        Ok(v)
                    })
                    .transpose()
                };
                Task::Validate {
                    settings_seed: pick(&o.seed, file, "seed").map(|t| parse_num("seed", t)).transpose()?.unwrap_or(1),
                    channels: positive("channels", pick(&o.channels, file, "channels"))?,
                    noise_draws: positive("noise-draws", pick(&o.noise_draws, file, "noise-draws"))?,
                }
            } else {
                let loss: f64 = pick(&o.loss, file, "loss").map(|t| parse_num("loss", t)).transpose()?.unwrap_or(0.05);
                if !(loss > 0.0 && loss < 1.0) {
                    return Err(SpecError::value("loss", format!("must lie in (0, 1), got {loss}")));
                }
                let decoder = pick(&o.decoder, file, "decoder")
                    .map(Decoder::from_str)
                    .transpose()
                    .map_err(|e| SpecError::value("decoder", e.to_string()))?
                    .unwrap_or(Decoder::Matched);
                Task::EvmPlan { loss, decoder }
            }
        }
    };

    let constellations = parse_constellation_list(pick(&o.constellation, file, "constellation").unwrap_or("gaussian"))?;
    let snr_db = parse_snr_range(pick(&o.snr, file, "snr").unwrap_or(DEFAULT_SNR))?;
    let evm_db = match &task {
        // The planner searches over EVM itself.
        Task::EvmPlan { .. } => vec![f64::NEG_INFINITY],
        _ => parse_evm_list(pick(&o.evm, file, "evm").unwrap_or(DEFAULT_EVM))?,
    };
    let m = antennas("M", pick(&o.m, file, "m"))?;
    let n = antennas("N", pick(&o.n, file, "n"))?;
    let output = pick(&o.output, file, "output").filter(|p| *p != "-").map(PathBuf::from);
    let format = match pick(&o.format, file, "format") {
        Some(f) => f.parse()?,
        None => Format::Csv,
    };

    let spec = SweepSpec {
        task,
        constellations,
        snr_db,
        evm_db,
        m,
        n,
        output,
        format,
        nats: flag(o.nats, file, "nats")?,
        allow_partial: flag(o.allow_partial, file, "allow-partial")?,
        timing: flag(o.timing, file, "timing")?,
    };
    spec.check()?;
    Ok(spec)
}

impl SweepSpec {
    /// Rejects combinations that every point would fail on.
    fn check(&self) -> Result<(), SpecError> {
        for &snr in &self.snr_db {
            for &evm in &self.evm_db {
                SystemConfig::new(self.m, self.n, snr, evm)?;
            }
        }
        match &self.task {
            Task::RateSweep { modes } if modes.contains(&RateMode::HighSnr) => {
                if let Some(k) = self.constellations.iter().find(|k| **k != ConstellationKind::Gaussian) {
                    return Err(SpecError::value("constellation", format!("high-SNR limits exist for gaussian inputs only, not {k}")));
                }
                if self.evm_db.iter().any(|e| !e.is_finite()) {
                    return Err(SpecError::value("evm", "high-SNR limits need a finite EVM"));
                }
            }
            Task::Validate { channels, .. } => {
                for &k in &self.constellations {
                    if k.is_discrete() {
                        let size = binoisy::Constellation::new(k, 1.0)?.points().len() as u128;
                        let joint = size.checked_pow(self.m as u32).unwrap_or(u128::MAX);
                        if joint > MAX_JOINT_ALPHABET as u128 {
                            return Err(SpecError::value(
                                "constellation",
                                format!("{k} with M={} needs {joint} joint symbols; the Monte Carlo limit is {MAX_JOINT_ALPHABET}", self.m),
                            ));
                        }
                    }
                }
                if channels.is_some_and(|c| c < 2) {
                    return Err(SpecError::value("channels", "need at least 2 channel draws"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Monte Carlo settings for `kind` under a validate task.
    pub fn mc_settings(&self, kind: ConstellationKind) -> Option<McSettings> {
        let Task::Validate { settings_seed, channels, noise_draws } = &self.task else {
            return None;
        };
        let mut s = if kind.is_discrete() { McSettings::discrete(*settings_seed) } else { McSettings::gaussian(*settings_seed) };
        if let Some(c) = channels {
            s.n_channels = *c;
        }
        if let Some(d) = noise_draws {
            s.n_noise = *d;
        }
        Some(s)
    }
}
