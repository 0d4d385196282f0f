//! Run configuration: flat `key=value` files overlaid with command-line flags.
//!
//! Every subcommand accepts a fixed set of keys. A key may come from the
//! configuration file or from a `--key value` flag; flags win. Unknown keys,
//! missing required keys and out-of-range values are reported with the key
//! name. The fully resolved configuration is written next to the outputs so a
//! run can be repeated exactly with `--config <that file>`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Fit,
    Calibrate,
    Screen,
    TuneGamma,
    Simulate,
    Report,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Fit,
        Command::Calibrate,
        Command::Screen,
        Command::TuneGamma,
        Command::Simulate,
        Command::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Calibrate => "calibrate",
            Command::Screen => "screen",
            Command::TuneGamma => "tune-gamma",
            Command::Simulate => "simulate",
            Command::Report => "report",
        }
    }

    pub fn about(self) -> &'static str {
        match self {
            Command::Fit => "Fit Cox survival and censoring models and tabulate their curves",
            Command::Calibrate => "Calibrate a screening threshold with a high-probability risk guarantee",
            Command::Screen => "Select test subjects by conformal p-values with FDR control",
            Command::TuneGamma => "Choose the conformity-score offset on tuning data",
            Command::Simulate => "Run the replicate simulation protocol",
            Command::Report => "Summarize a per-replicate metrics table",
        }
    }

    pub fn from_name(name: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == name)
    }

    /// Keys accepted by this command.
    pub fn keys(self) -> impl Iterator<Item = &'static KeySpec> {
        KEYS.iter().filter(move |k| k.commands.contains(&self))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl ConfigError {
    fn new(key: &str, reason: impl Into<String>) -> Self {
        Self {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration key '{}': {}", self.key, self.reason)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy)]
pub enum Kind {
    /// Real in the open unit interval.
    Open01,
    /// Real in `[0, 1]`.
    Unit,
    Positive,
    NonNegative,
    Percent,
    Count { min: usize },
    Seed,
    Bool,
    /// Existing file.
    InputFile,
    /// Comma-separated existing files; may be empty.
    InputFiles,
    Output,
    Choice(&'static [&'static str]),
    /// Comma-separated positive reals.
    PositiveList,
    /// Comma-separated nonnegative reals; may be empty.
    NonNegativeList,
    /// `auto` or a nonnegative real.
    AutoOrNonNegative,
    /// `auto` or a positive real.
    AutoOrPositive,
    /// Three shares summing to 1.
    Fractions,
    /// `all` or comma-separated method names.
    Methods,
}

pub struct KeySpec {
    pub name: &'static str,
    /// `None` marks a required key; an empty default marks an optional one.
    pub default: Option<&'static str>,
    pub kind: Kind,
    pub commands: &'static [Command],
    pub help: &'static str,
}

use Command::*;

const ALL_COMMANDS: &[Command] = &[Fit, Calibrate, Screen, TuneGamma, Simulate, Report];
const METHODS: &[&str] = &["greedy", "bonferroni", "multiplier", "ltt", "conformal", "model_based", "oracle"];

pub static KEYS: &[KeySpec] = &[
    KeySpec { name: "out", default: None, kind: Kind::Output, commands: ALL_COMMANDS, help: "output directory" },
    KeySpec { name: "seed", default: Some("0"), kind: Kind::Seed, commands: &[Calibrate, Screen, TuneGamma, Simulate], help: "master seed" },
    KeySpec { name: "workers", default: Some("1"), kind: Kind::Count { min: 1 }, commands: ALL_COMMANDS, help: "worker threads (results do not depend on it)" },
    KeySpec { name: "data", default: None, kind: Kind::InputFile, commands: &[Fit, TuneGamma], help: "dataset CSV (id,time,event,x1,...)" },
    KeySpec { name: "predict", default: Some(""), kind: Kind::InputFiles, commands: &[Fit], help: "covariate or dataset CSVs to tabulate curves for" },
    KeySpec { name: "grid_points", default: Some("200"), kind: Kind::Count { min: 2 }, commands: &[Fit], help: "knots of the tabulation grid" },
    KeySpec { name: "grid_end", default: Some("auto"), kind: Kind::AutoOrPositive, commands: &[Fit], help: "last knot (auto: largest observed time)" },
    KeySpec { name: "max_iter", default: Some("50"), kind: Kind::Count { min: 1 }, commands: &[Fit], help: "Newton iterations" },
    KeySpec { name: "cal", default: None, kind: Kind::InputFile, commands: &[Calibrate, Screen], help: "calibration dataset CSV" },
    KeySpec { name: "s_curves", default: None, kind: Kind::InputFile, commands: &[Calibrate, Screen], help: "survival curves of the calibration subjects" },
    KeySpec { name: "g_curves", default: None, kind: Kind::InputFile, commands: &[Calibrate, Screen], help: "censoring curves of the calibration subjects" },
    KeySpec { name: "test_curves", default: None, kind: Kind::InputFile, commands: &[Screen], help: "survival curves of the test subjects" },
    KeySpec { name: "alpha", default: None, kind: Kind::Open01, commands: &[Calibrate, Screen, TuneGamma, Simulate], help: "target risk level" },
    KeySpec { name: "delta", default: Some("0.1"), kind: Kind::Open01, commands: &[Calibrate, Simulate], help: "confidence level" },
    KeySpec { name: "t0", default: None, kind: Kind::Positive, commands: &[Calibrate, Screen, TuneGamma], help: "horizon" },
    KeySpec { name: "flavor", default: Some("et"), kind: Kind::Choice(&["et", "ft"]), commands: &[Calibrate, Simulate], help: "IPCW estimator" },
    KeySpec { name: "method", default: Some("greedy"), kind: Kind::Choice(&["greedy", "bonferroni", "multiplier", "ltt"]), commands: &[Calibrate], help: "calibrator" },
    KeySpec { name: "grid_size", default: Some("200"), kind: Kind::Count { min: 2 }, commands: &[Calibrate, Simulate], help: "threshold grid size" },
    KeySpec { name: "n_min", default: Some("10"), kind: Kind::Count { min: 0 }, commands: &[Calibrate, Simulate], help: "smallest selection for the delta method" },
    KeySpec { name: "winsor_pct", default: Some("99"), kind: Kind::Percent, commands: &[Calibrate, Screen, TuneGamma, Simulate], help: "weight winsorization percentile" },
    KeySpec { name: "multiplier_draws", default: Some("1000"), kind: Kind::Count { min: 1 }, commands: &[Calibrate, Simulate], help: "Gaussian multiplier draws" },
    KeySpec { name: "gamma", default: Some("0"), kind: Kind::AutoOrNonNegative, commands: &[Screen], help: "conformity offset or auto" },
    KeySpec { name: "nu", default: Some("0.9"), kind: Kind::Unit, commands: &[Screen, Simulate], help: "abstention threshold" },
    KeySpec { name: "bootstrap_b", default: Some("500"), kind: Kind::Count { min: 1 }, commands: &[Screen, Simulate], help: "abstention bootstrap resamples" },
    KeySpec { name: "extrapolate", default: Some("false"), kind: Kind::Bool, commands: &[Screen], help: "evaluate curves past their grid" },
    KeySpec { name: "tune_data", default: Some(""), kind: Kind::InputFiles, commands: &[Screen], help: "tuning dataset for gamma=auto" },
    KeySpec { name: "tune_reps", default: Some("20"), kind: Kind::Count { min: 1 }, commands: &[Screen, TuneGamma, Simulate], help: "tuning splits" },
    KeySpec { name: "criterion", default: Some("fisher"), kind: Kind::Choice(&["fisher", "bh_count"]), commands: &[Screen, TuneGamma], help: "tuning criterion" },
    KeySpec { name: "candidates", default: Some(""), kind: Kind::NonNegativeList, commands: &[TuneGamma], help: "gamma candidates (default: 0 and event-time deciles)" },
    KeySpec { name: "fractions", default: Some("0.5,0.25,0.25"), kind: Kind::Fractions, commands: &[TuneGamma], help: "tuning split shares" },
    KeySpec { name: "population", default: Some("weibull"), kind: Kind::Choice(&["weibull", "curves"]), commands: &[Simulate], help: "generative population" },
    KeySpec { name: "pop_s_curves", default: Some(""), kind: Kind::InputFiles, commands: &[Simulate], help: "event curves of the fixed design" },
    KeySpec { name: "pop_g_curves", default: Some(""), kind: Kind::InputFiles, commands: &[Simulate], help: "censoring curves of the fixed design" },
    KeySpec { name: "pop_covariates", default: Some(""), kind: Kind::InputFiles, commands: &[Simulate], help: "covariates of the fixed design" },
    KeySpec { name: "n_train", default: Some("5000"), kind: Kind::Count { min: 2 }, commands: &[Simulate], help: "training split size" },
    KeySpec { name: "n_cal", default: Some("1000"), kind: Kind::Count { min: 1 }, commands: &[Simulate], help: "calibration split size" },
    KeySpec { name: "n_test", default: Some("1000"), kind: Kind::Count { min: 1 }, commands: &[Simulate], help: "test split size" },
    KeySpec { name: "horizons", default: Some("3"), kind: Kind::PositiveList, commands: &[Simulate], help: "horizons t0" },
    KeySpec { name: "methods", default: Some("all"), kind: Kind::Methods, commands: &[Simulate], help: "methods to run" },
    KeySpec { name: "replicates", default: Some("100"), kind: Kind::Count { min: 1 }, commands: &[Simulate], help: "replicates" },
    KeySpec { name: "sim_gamma", default: Some("auto"), kind: Kind::AutoOrNonNegative, commands: &[Simulate], help: "conformity offset or auto" },
    KeySpec { name: "write_datasets", default: Some("false"), kind: Kind::Bool, commands: &[Simulate], help: "also write every replicate's samples" },
    KeySpec { name: "metrics", default: None, kind: Kind::InputFile, commands: &[Report], help: "per-replicate metrics CSV" },
];

fn lookup(name: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.name == name)
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ConfigError::new(key, format!("'{v}' is not a finite number")))
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn check(key_spec: &KeySpec, v: &str) -> Result<(), ConfigError> {
    let key = key_spec.name;
    let range = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(ConfigError::new(key, format!("{v} is out of range: {what}")))
        }
    };
    match key_spec.kind {
        Kind::Open01 => {
            let x = parse_f64(key, v)?;
            range(x > 0.0 && x < 1.0, "must lie in (0, 1)")
        }
        Kind::Unit => {
            let x = parse_f64(key, v)?;
            range((0.0..=1.0).contains(&x), "must lie in [0, 1]")
        }
        Kind::Positive => range(parse_f64(key, v)? > 0.0, "must be > 0"),
        Kind::NonNegative => range(parse_f64(key, v)? >= 0.0, "must be >= 0"),
        Kind::Percent => {
            let x = parse_f64(key, v)?;
            range((0.0..=100.0).contains(&x), "must lie in [0, 100]")
        }
        Kind::Count { min } => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| ConfigError::new(key, format!("'{v}' is not a nonnegative integer")))?;
            range(n >= min, &format!("must be >= {min}"))
        }
        Kind::Seed => v
            .trim()
            .parse::<u64>()
            .map(|_| ())
            .map_err(|_| ConfigError::new(key, format!("'{v}' is not an unsigned 64-bit integer"))),
        Kind::Bool => match v.trim() {
            "true" | "false" => Ok(()),
            _ => Err(ConfigError::new(key, format!("'{v}' is not true or false"))),
        },
        Kind::InputFile => {
            if Path::new(v.trim()).is_file() {
                Ok(())
            } else {
                Err(ConfigError::new(key, format!("file '{v}' does not exist")))
            }
        }
        Kind::InputFiles => list(v).try_for_each(|p| {
            if Path::new(p).is_file() {
                Ok(())
            } else {
                Err(ConfigError::new(key, format!("file '{p}' does not exist")))
            }
        }),
        Kind::Output => range(!v.trim().is_empty(), "must name a directory"),
        Kind::Choice(options) => {
            if options.contains(&v.trim()) {
                Ok(())
            } else {
                Err(ConfigError::new(key, format!("'{v}' is not one of {}", options.join("|"))))
            }
        }
        Kind::PositiveList => {
            let xs = list(v).map(|s| parse_f64(key, s)).collect::<Result<Vec<_>, _>>()?;
            range(!xs.is_empty() && xs.iter().all(|x| *x > 0.0), "needs one or more values > 0")
        }
        Kind::NonNegativeList => {
            let xs = list(v).map(|s| parse_f64(key, s)).collect::<Result<Vec<_>, _>>()?;
            range(xs.iter().all(|x| *x >= 0.0), "values must be >= 0")
        }
        Kind::AutoOrNonNegative => {
            if v.trim() == "auto" {
                Ok(())
            } else {
                range(parse_f64(key, v)? >= 0.0, "must be auto or >= 0")
            }
        }
        Kind::AutoOrPositive => {
            if v.trim() == "auto" {
                Ok(())
            } else {
                range(parse_f64(key, v)? > 0.0, "must be auto or > 0")
            }
        }
        Kind::Fractions => {
            let xs = list(v).map(|s| parse_f64(key, s)).collect::<Result<Vec<_>, _>>()?;
            range(
                xs.len() == 3 && xs.iter().all(|x| *x > 0.0) && (xs.iter().sum::<f64>() - 1.0).abs() < 1e-9,
                "needs three positive shares summing to 1",
            )
        }
        Kind::Methods => {
            if v.trim() == "all" {
                return Ok(());
            }
            let names: Vec<&str> = list(v).collect();
            if names.is_empty() {
                return Err(ConfigError::new(key, "no methods listed"));
            }
            match names.iter().find(|n| !METHODS.contains(n)) {
                Some(bad) => Err(ConfigError::new(key, format!("unknown method '{bad}'"))),
                None => Ok(()),
            }
        }
    }
}

/// Parses `key=value` lines. Blank lines and `#` comments are skipped;
/// hyphens in keys are read as underscores.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::new(&format!("line {}", lineno + 1), "expected key=value"))?;
        out.push((k.trim().replace('-', "_"), v.trim().to_string()));
    }
    Ok(out)
}

/// Resolved configuration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    values: BTreeMap<String, String>,
}

/// Merges file entries and flag entries (flags win), fills defaults and
/// validates every value.
pub fn parse_config(
    command: Command,
    file_entries: &[(String, String)],
    flag_entries: &[(String, String)],
) -> Result<RunConfig, ConfigError> {
    let mut values = BTreeMap::new();
    for (k, v) in file_entries.iter().chain(flag_entries) {
        match lookup(k) {
            Some(s) if s.commands.contains(&command) => {
                values.insert(k.clone(), v.clone());
            }
            Some(_) => return Err(ConfigError::new(k, format!("not accepted by '{}'", command.name()))),
            None => return Err(ConfigError::new(k, "unknown key")),
        }
    }
    for s in command.keys() {
        let v = match (values.get(s.name), s.default) {
            (Some(v), _) => v.clone(),
            (None, Some(d)) => d.to_string(),
            (None, None) => return Err(ConfigError::new(s.name, "required but not set")),
        };
        check(s, &v)?;
        values.insert(s.name.to_string(), v);
    }
    let cfg = RunConfig { command, values };
    cfg.cross_check()?;
    Ok(cfg)
}

impl RunConfig {
    fn cross_check(&self) -> Result<(), ConfigError> {
        if self.command == Command::Screen && self.str("gamma") == "auto" && self.str("tune_data").is_empty() {
            return Err(ConfigError::new("tune_data", "required when gamma=auto"));
        }
        if self.command == Command::Simulate && self.str("population") == "curves" {
            for key in ["pop_s_curves", "pop_g_curves", "pop_covariates"] {
                if self.str(key).is_empty() {
                    return Err(ConfigError::new(key, "required when population=curves"));
                }
            }
        }
        Ok(())
    }

    pub fn str(&self, key: &str) -> &str {
        self.values.get(key).map(|s| s.trim()).unwrap_or("")
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.str(key).parse().expect("validated number")
    }

    pub fn usize(&self, key: &str) -> usize {
        self.str(key).parse().expect("validated count")
    }

    pub fn u64(&self, key: &str) -> u64 {
        self.str(key).parse().expect("validated seed")
    }

    pub fn bool(&self, key: &str) -> bool {
        self.str(key) == "true"
    }

    pub fn path(&self, key: &str) -> PathBuf {
        PathBuf::from(self.str(key))
    }

    /// `None` for `auto`.
    pub fn auto_f64(&self, key: &str) -> Option<f64> {
        match self.str(key) {
            "auto" => None,
            v => Some(v.parse().expect("validated number")),
        }
    }

    pub fn f64_list(&self, key: &str) -> Vec<f64> {
        list(self.str(key)).map(|s| s.parse().expect("validated number")).collect()
    }

    pub fn str_list(&self, key: &str) -> Vec<String> {
        list(self.str(key)).map(str::to_string).collect()
    }

    /// Effective configuration in the file format, keys sorted.
    pub fn to_text(&self) -> String {
        let mut s = format!("# effective configuration of `lowrisk {}`\n", self.command.name());
        for (k, v) in &self.values {
            s.push_str(&format!("{k}={v}\n"));
        }
        s
    }
}
