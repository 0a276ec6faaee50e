//! Command-line grammar, config-file merging and typed run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "purify",
    version,
    about = "Probabilistic quantum state purification toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Recursion values pₙ, fₙ, n/pₙ for the depolarizing channel.
    Analytic(Flags),
    /// Optimal protocols from the semidefinite programs.
    Sdp {
        #[command(subcommand)]
        mode: SdpMode,
    },
    /// Positivity certificates.
    Certify {
        #[command(subcommand)]
        what: CertifyTarget,
    },
    /// Simulate purification circuits.
    Circuit {
        #[command(subcommand)]
        kind: CircuitKind,
    },
    /// Copies needed to reach a goal fidelity.
    SampleComplexity(Flags),
    /// Recursive purification trace.
    Recurse(Flags),
}

#[derive(Subcommand, Debug)]
pub enum SdpMode {
    /// Maximal fidelity at success probability --p.
    Fidelity(Flags),
    /// Maximal success probability at fidelity --f.
    Probability(Flags),
    /// Fidelity over a probability grid --p-grid.
    Sweep(Flags),
}

#[derive(Subcommand, Debug)]
pub enum CertifyTarget {
    /// Two-copy golden-point certificate.
    Golden(Flags),
}

#[derive(Subcommand, Debug)]
pub enum CircuitKind {
    /// Fixed-angle three-copy circuit.
    Three(Flags),
    /// LCU block encoding of the symmetric projector.
    Lcu(Flags),
    /// Trainable four-copy ansatz.
    Four(Flags),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Every flag is accepted as text and validated after merging with the config file.
#[derive(Args, Debug, Clone, Default)]
pub struct Flags {
    /// Noise model: depolarizing, pauli or ad.
    #[arg(long)]
    pub noise: Option<String>,
    #[arg(long)]
    pub d: Option<String>,
    #[arg(long)]
    pub delta: Option<String>,
    /// lo:hi:count, endpoints included.
    #[arg(long)]
    pub delta_grid: Option<String>,
    /// Copy count; `recurse` accepts a comma-separated list.
    #[arg(long)]
    pub n: Option<String>,
    /// Success probability, or `golden`.
    #[arg(long)]
    pub p: Option<String>,
    /// Fidelity, or `golden`.
    #[arg(long)]
    pub f: Option<String>,
    #[arg(long)]
    pub f_goal: Option<String>,
    /// lo:hi:count, endpoints included.
    #[arg(long)]
    pub p_grid: Option<String>,
    #[arg(long)]
    pub n_max: Option<String>,
    #[arg(long)]
    pub depth: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Training restarts for `circuit four --train`.
    #[arg(long)]
    pub restarts: Option<String>,
    /// Train the four-copy ansatz instead of evaluating reference angles.
    #[arg(long)]
    pub train: bool,
    /// Write the circuit netlist to this file.
    #[arg(long)]
    pub netlist: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat key=value file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Flags {
    fn entries(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("noise", self.noise.clone()),
            ("d", self.d.clone()),
            ("delta", self.delta.clone()),
            ("delta-grid", self.delta_grid.clone()),
            ("n", self.n.clone()),
            ("p", self.p.clone()),
            ("f", self.f.clone()),
            ("f-goal", self.f_goal.clone()),
            ("p-grid", self.p_grid.clone()),
            ("n-max", self.n_max.clone()),
            ("depth", self.depth.clone()),
            ("seed", self.seed.clone()),
            ("restarts", self.restarts.clone()),
            ("train", self.train.then(|| "true".to_string())),
            (
                "netlist",
                self.netlist.as_ref().map(|p| p.display().to_string()),
            ),
            (
                "format",
                self.format.map(|f| format!("{f:?}").to_lowercase()),
            ),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
        ]
    }
}

const KNOWN_KEYS: [&str; 17] = [
    "noise",
    "d",
    "delta",
    "delta-grid",
    "n",
    "p",
    "f",
    "f-goal",
    "p-grid",
    "n-max",
    "depth",
    "seed",
    "restarts",
    "train",
    "netlist",
    "format",
    "out",
];

/// Parses a flat `key = value` file; `#` starts a comment, `_` and `-` are interchangeable in keys.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("config line {}: expected key=value", lineno + 1))
        })?;
        let key = k.trim().replace('_', "-");
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!(
                "config line {}: unknown key `{}`",
                lineno + 1,
                k.trim()
            )));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

/// Config-file values overridden by explicit flags.
pub fn merge(flags: &Flags) -> Result<BTreeMap<String, String>, CliError> {
    let mut merged = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            parse_config(&text)?
        }
        None => BTreeMap::new(),
    };
    for (k, v) in flags.entries() {
        if let Some(v) = v {
            merged.insert(k.to_string(), v);
        }
    }
    Ok(merged)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    Depolarizing,
    Pauli,
    AmplitudeDamping,
}

impl FromStr for NoiseKind {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.to_ascii_lowercase().as_str() {
            "depolarizing" | "depol" => Ok(NoiseKind::Depolarizing),
            "pauli" => Ok(NoiseKind::Pauli),
            "ad" | "amplitude-damping" => Ok(NoiseKind::AmplitudeDamping),
            other => Err(CliError::Usage(format!(
                "unknown noise `{other}` (depolarizing | pauli | ad)"
            ))),
        }
    }
}

/// A number or the literal `golden`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Target {
    Value(f64),
    Golden,
}

/// Inclusive evenly spaced grid `lo:hi:count`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.hi
                } else {
                    self.lo + step * i as f64
                }
            })
            .collect()
    }
}

impl FromStr for Grid {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Usage(format!("grid `{s}` must be lo:hi:count"));
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, count] = parts.as_slice() else {
            return Err(bad());
        };
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        let count: usize = count.trim().parse().map_err(|_| bad())?;
        if count == 0 || !lo.is_finite() || !hi.is_finite() || hi < lo {
            return Err(bad());
        }
        Ok(Grid { lo, hi, count })
    }
}

/// Typed view of the merged parameters.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: String,
    pub params: BTreeMap<String, String>,
    pub noise: NoiseKind,
    pub d: Option<usize>,
    pub delta: Option<f64>,
    pub delta_grid: Option<Grid>,
    pub n: Vec<usize>,
    pub p: Option<Target>,
    pub f: Option<Target>,
    pub f_goal: Option<f64>,
    pub p_grid: Option<Grid>,
    pub n_max: Option<usize>,
    pub depth: Option<usize>,
    pub seed: u64,
    pub restarts: Option<usize>,
    pub train: bool,
    pub netlist: Option<PathBuf>,
    pub format: Format,
    pub out: Option<PathBuf>,
}

fn typed<T: FromStr>(params: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, CliError> {
    params
        .get(key)
        .map(|v| {
            v.trim()
                .parse::<T>()
                .map_err(|_| CliError::Usage(format!("invalid value for --{key}: `{v}`")))
        })
        .transpose()
}

fn target(params: &BTreeMap<String, String>, key: &str) -> Result<Option<Target>, CliError> {
    match params.get(key).map(|s| s.trim()) {
        Some("golden") => Ok(Some(Target::Golden)),
        Some(_) => Ok(typed::<f64>(params, key)?.map(Target::Value)),
        None => Ok(None),
    }
}

impl RunConfig {
    pub fn from_params(command: &str, params: BTreeMap<String, String>) -> Result<Self, CliError> {
        let n = match params.get("n") {
            Some(s) => s
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse::<usize>()
                        .map_err(|_| CliError::Usage(format!("invalid value for --n: `{s}`")))
                })
                .collect::<Result<Vec<_>, _>>()?,
            None => Vec::new(),
        };
        let format = match params.get("format").map(|s| s.as_str()) {
            None | Some("json") => Format::Json,
            Some("csv") => Format::Csv,
            Some(other) => {
                return Err(CliError::Usage(format!(
                    "unknown format `{other}` (json | csv)"
                )))
            }
        };
        let train = match params.get("train").map(|s| s.as_str()) {
            None | Some("false") => false,
            Some("true") => true,
            Some(other) => {
                return Err(CliError::Usage(format!(
                    "invalid value for --train: `{other}`"
                )))
            }
        };
        Ok(Self {
            command: command.to_string(),
            noise: typed(&params, "noise")?.unwrap_or(NoiseKind::Depolarizing),
            d: typed(&params, "d")?,
            delta: typed(&params, "delta")?,
            delta_grid: typed(&params, "delta-grid")?,
            n,
            p: target(&params, "p")?,
            f: target(&params, "f")?,
            f_goal: typed(&params, "f-goal")?,
            p_grid: typed(&params, "p-grid")?,
            n_max: typed(&params, "n-max")?,
            depth: typed(&params, "depth")?,
            seed: typed(&params, "seed")?.unwrap_or(0),
            restarts: typed(&params, "restarts")?,
            train,
            netlist: params.get("netlist").map(PathBuf::from),
            format,
            out: params.get("out").map(PathBuf::from),
            params,
        })
    }

    pub fn require_d(&self) -> Result<usize, CliError> {
        self.d
            .ok_or_else(|| CliError::Usage(format!("{} needs --d", self.command)))
    }

    /// The single `n`, or `default` when none was given.
    pub fn single_n(&self, default: Option<usize>) -> Result<usize, CliError> {
        match (self.n.as_slice(), default) {
            ([n], _) => Ok(*n),
            ([], Some(n)) => Ok(n),
            ([], None) => Err(CliError::Usage(format!("{} needs --n", self.command))),
            _ => Err(CliError::Usage(format!(
                "{} takes a single --n",
                self.command
            ))),
        }
    }

    /// Either `--delta` or `--delta-grid`, never both.
    pub fn deltas(&self) -> Result<Vec<f64>, CliError> {
        match (self.delta, self.delta_grid) {
            (Some(d), None) => Ok(vec![d]),
            (None, Some(g)) => Ok(g.values()),
            (Some(_), Some(_)) => Err(CliError::Usage(
                "give --delta or --delta-grid, not both".into(),
            )),
            (None, None) => Err(CliError::Usage(format!(
                "{} needs --delta or --delta-grid",
                self.command
            ))),
        }
    }

    /// Enforces that exactly the listed selectors among p, f, f-goal and p-grid are present.
    pub fn expect_selectors(&self, wanted: &[&str]) -> Result<(), CliError> {
        for key in ["p", "f", "f-goal", "p-grid"] {
            let present = self.params.contains_key(key);
            let needed = wanted.contains(&key);
            if needed && !present {
                return Err(CliError::Usage(format!("{} needs --{key}", self.command)));
            }
            if present && !needed {
                return Err(CliError::Usage(format!(
                    "{} does not take --{key}",
                    self.command
                )));
            }
        }
        Ok(())
    }

    pub fn out_path(&self) -> Option<&Path> {
        self.out.as_deref()
    }
}
