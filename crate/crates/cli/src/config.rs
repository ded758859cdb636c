//! Run configuration: a TOML file layer under a flag layer, every field
//! defaulted, and a content digest that makes each reported number
//! traceable to the exact configuration that produced it.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use pmoc_core::polybasis::FamilyKind;
use pmoc_core::scheme::SchemeKind;

/// Name of the environment variable providing the default output
/// directory when neither the config file nor `--out` sets one.
pub const OUT_DIR_ENV: &str = "PMOC_OUT_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config file {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {message}")]
    Invalid { message: String },
}

fn invalid(message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        message: message.into(),
    }
}

/// Mechanical system to optimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SystemChoice {
    Acrobot,
    #[serde(rename = "3crobot")]
    #[value(name = "3crobot")]
    Threecrobot,
    Pointmass,
    Pendulum,
}

impl SystemChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            SystemChoice::Acrobot => "acrobot",
            SystemChoice::Threecrobot => "3crobot",
            SystemChoice::Pointmass => "pointmass",
            SystemChoice::Pendulum => "pendulum",
        }
    }
}

impl fmt::Display for SystemChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Discretization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeChoice {
    Pmoc,
    DaeEl,
    OdeEl,
}

/// Presentation order for comparison tables.
pub const SCHEME_ORDER: [SchemeChoice; 3] =
    [SchemeChoice::Pmoc, SchemeChoice::DaeEl, SchemeChoice::OdeEl];

impl SchemeChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeChoice::Pmoc => "pmoc",
            SchemeChoice::DaeEl => "dae-el",
            SchemeChoice::OdeEl => "ode-el",
        }
    }

    pub fn kind(&self) -> SchemeKind {
        match self {
            SchemeChoice::Pmoc => SchemeKind::Pmoc,
            SchemeChoice::DaeEl => SchemeKind::DaeEl,
            SchemeChoice::OdeEl => SchemeKind::OdeEl,
        }
    }
}

impl fmt::Display for SchemeChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Collocation-grid polynomial family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BasisChoice {
    Chebyshev,
    Legendre,
}

impl BasisChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            BasisChoice::Chebyshev => "chebyshev",
            BasisChoice::Legendre => "legendre",
        }
    }

    pub fn family(&self) -> FamilyKind {
        match self {
            BasisChoice::Chebyshev => FamilyKind::Chebyshev,
            BasisChoice::Legendre => FamilyKind::Legendre,
        }
    }
}

impl fmt::Display for BasisChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Family of initial control guesses rolled out by forward simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GuessStrategy {
    /// `u(t) = amplitude · sin(frequency · t + phase)`.
    Sinusoid,
    /// Constant torque on the first joint plus a proportional hold on the
    /// remaining joints.
    ConstantPd,
}

/// Initial-guess parameters. Local-optimum selection depends on them, so
/// they are explicit, defaulted, and folded into the config digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuessConfig {
    pub strategy: GuessStrategy,
    pub amplitude: f64,
    /// Radians per time unit.
    pub frequency: f64,
    pub phase: f64,
    pub torque: f64,
    pub kp: f64,
}

impl Default for GuessConfig {
    fn default() -> Self {
        GuessConfig {
            strategy: GuessStrategy::Sinusoid,
            amplitude: 1.0,
            frequency: 1.0,
            phase: 0.0,
            torque: 0.5,
            kp: 5.0,
        }
    }
}

/// Solver stopping tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// `max |c(x)|` at which an iterate counts as feasible.
    pub feasibility: f64,
    /// Projected-stationarity threshold for optimality.
    pub optimality: f64,
    /// Major-iteration cap.
    pub max_major: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feasibility: 1e-6,
            optimality: 1e-5,
            max_major: 2000,
        }
    }
}

/// Where artifacts land. The directory resolves, in order, to the
/// configured value, `$PMOC_OUT_DIR`, then the working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    pub report: String,
    pub trajectory: String,
}

impl Default for OutputPaths {
    fn default() -> Self {
        OutputPaths {
            dir: None,
            report: "report.jsonl".to_string(),
            trajectory: "trajectory.csv".to_string(),
        }
    }
}

impl OutputPaths {
    pub fn resolved_dir(&self) -> PathBuf {
        self.dir.clone().unwrap_or_else(default_out_dir)
    }
}

/// `$PMOC_OUT_DIR`, else the working directory.
pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// One benchmark run, fully specified. Parseable from a TOML file and
/// from flags; flags override the file; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemChoice,
    pub scheme: SchemeChoice,
    pub basis: BasisChoice,
    /// Collocation grid size.
    pub n: usize,
    /// `[lo, hi]` for the horizon; `lo == hi` fixes it.
    pub tf_bounds: [f64; 2],
    /// Promote free link lengths to decision variables (3crobot only).
    pub optimize_lengths: bool,
    pub guess: GuessConfig,
    /// Multistart count; seed 0 is the unperturbed guess.
    pub seeds: usize,
    pub tolerances: Tolerances,
    pub outputs: OutputPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            system: SystemChoice::Acrobot,
            scheme: SchemeChoice::Pmoc,
            basis: BasisChoice::Chebyshev,
            n: 64,
            tf_bounds: [1.0, 10.0],
            optimize_lengths: false,
            guess: GuessConfig::default(),
            seeds: 1,
            tolerances: Tolerances::default(),
            outputs: OutputPaths::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n < 2 {
            return Err(invalid(format!("grid size n = {} is below 2", self.n)));
        }
        let [lo, hi] = self.tf_bounds;
        if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 || hi < lo {
            return Err(invalid(format!(
                "tf_bounds = [{lo}, {hi}] must satisfy 0 < lo <= hi with finite entries"
            )));
        }
        if self.seeds == 0 {
            return Err(invalid("seeds must be at least 1"));
        }
        if self.optimize_lengths && self.system != SystemChoice::Threecrobot {
            return Err(invalid(format!(
                "optimize_lengths applies only to the 3crobot; the {} has no free design lengths",
                self.system
            )));
        }
        let t = &self.tolerances;
        if !(t.feasibility > 0.0 && t.optimality > 0.0) || t.max_major == 0 {
            return Err(invalid(
                "tolerances must be positive and max_major at least 1",
            ));
        }
        let g = &self.guess;
        for (name, value) in [
            ("amplitude", g.amplitude),
            ("frequency", g.frequency),
            ("phase", g.phase),
            ("torque", g.torque),
            ("kp", g.kp),
        ] {
            if !value.is_finite() {
                return Err(invalid(format!("guess.{name} must be finite, got {value}")));
            }
        }
        Ok(())
    }

    /// Content digest over the semantic fields (output locations excluded:
    /// they cannot change any reported number).
    pub fn digest(&self) -> String {
        let payload = serde_json::json!({
            "system": self.system,
            "scheme": self.scheme,
            "basis": self.basis,
            "n": self.n,
            "tf_bounds": self.tf_bounds,
            "optimize_lengths": self.optimize_lengths,
            "guess": self.guess,
            "seeds": self.seeds,
            "tolerances": self.tolerances,
        });
        let mut hasher = Sha256::new();
        hasher.update(payload.to_string().as_bytes());
        let mut out = String::with_capacity(64);
        for byte in hasher.finalize() {
            use fmt::Write;
            let _ = write!(out, "{byte:02x}");
        }
        out
    }
}

/// Flag layer: every `Some` wins over the file value. `run` accepts at
/// most one `--scheme`; `compare` accepts several (default: all three).
#[derive(Debug, Clone, Default, clap::Args)]
pub struct ConfigOverrides {
    /// TOML configuration file; flags override its values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Mechanical system.
    #[arg(long, value_enum)]
    pub system: Option<SystemChoice>,
    /// Discretization scheme (repeatable under `compare`).
    #[arg(long = "scheme", value_enum)]
    pub scheme: Vec<SchemeChoice>,
    /// Collocation-grid polynomial family.
    #[arg(long, value_enum)]
    pub basis: Option<BasisChoice>,
    /// Collocation grid size.
    #[arg(long)]
    pub n: Option<usize>,
    /// Lower horizon bound.
    #[arg(long)]
    pub tf_min: Option<f64>,
    /// Upper horizon bound; equal to the lower bound fixes the horizon.
    #[arg(long)]
    pub tf_max: Option<f64>,
    /// Promote free link lengths to decision variables (3crobot only).
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub optimize_lengths: Option<bool>,
    /// Multistart count.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Initial-guess family.
    #[arg(long, value_enum)]
    pub guess_strategy: Option<GuessStrategy>,
    #[arg(long)]
    pub guess_amplitude: Option<f64>,
    #[arg(long)]
    pub guess_frequency: Option<f64>,
    #[arg(long)]
    pub guess_phase: Option<f64>,
    #[arg(long)]
    pub guess_torque: Option<f64>,
    #[arg(long)]
    pub guess_kp: Option<f64>,
    /// Feasibility tolerance.
    #[arg(long)]
    pub feas_tol: Option<f64>,
    /// Optimality tolerance.
    #[arg(long)]
    pub opt_tol: Option<f64>,
    /// Major-iteration cap.
    #[arg(long)]
    pub max_major: Option<usize>,
    /// Output directory (default: $PMOC_OUT_DIR, then the working directory).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Report file name within the output directory.
    #[arg(long, value_name = "NAME")]
    pub report_file: Option<String>,
    /// Trajectory CSV file name within the output directory.
    #[arg(long, value_name = "NAME")]
    pub trajectory_file: Option<String>,
}

impl ConfigOverrides {
    fn resolved_without_scheme(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.system {
            cfg.system = v;
        }
        if let Some(v) = self.basis {
            cfg.basis = v;
        }
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.tf_min {
            cfg.tf_bounds[0] = v;
        }
        if let Some(v) = self.tf_max {
            cfg.tf_bounds[1] = v;
        }
        if let Some(v) = self.optimize_lengths {
            cfg.optimize_lengths = v;
        }
        if let Some(v) = self.seeds {
            cfg.seeds = v;
        }
        if let Some(v) = self.guess_strategy {
            cfg.guess.strategy = v;
        }
        if let Some(v) = self.guess_amplitude {
            cfg.guess.amplitude = v;
        }
        if let Some(v) = self.guess_frequency {
            cfg.guess.frequency = v;
        }
        if let Some(v) = self.guess_phase {
            cfg.guess.phase = v;
        }
        if let Some(v) = self.guess_torque {
            cfg.guess.torque = v;
        }
        if let Some(v) = self.guess_kp {
            cfg.guess.kp = v;
        }
        if let Some(v) = self.feas_tol {
            cfg.tolerances.feasibility = v;
        }
        if let Some(v) = self.opt_tol {
            cfg.tolerances.optimality = v;
        }
        if let Some(v) = self.max_major {
            cfg.tolerances.max_major = v;
        }
        if let Some(v) = &self.out {
            cfg.outputs.dir = Some(v.clone());
        }
        if let Some(v) = &self.report_file {
            cfg.outputs.report = v.clone();
        }
        if let Some(v) = &self.trajectory_file {
            cfg.outputs.trajectory = v.clone();
        }
        Ok(cfg)
    }

    /// Resolve for a single run.
    pub fn resolve_run(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = self.resolved_without_scheme()?;
        match self.scheme.len() {
            0 => {}
            1 => cfg.scheme = self.scheme[0],
            k => {
                return Err(invalid(format!(
                    "run accepts a single --scheme, got {k}; use `compare` for several"
                )))
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Resolve for a comparison: one config per requested scheme (default
    /// all three), identical in everything but the scheme, with
    /// scheme-suffixed artifact names so the outputs never collide.
    pub fn resolve_compare(&self) -> Result<Vec<RunConfig>, ConfigError> {
        let base = self.resolved_without_scheme()?;
        let schemes: Vec<SchemeChoice> = if self.scheme.is_empty() {
            SCHEME_ORDER.to_vec()
        } else {
            self.scheme.clone()
        };
        if schemes.len() < 2 {
            return Err(invalid(
                "compare needs at least two --scheme values (or none, meaning all three)",
            ));
        }
        for (i, s) in schemes.iter().enumerate() {
            if schemes[..i].contains(s) {
                return Err(invalid(format!("scheme {s} listed twice")));
            }
        }
        let mut configs = Vec::with_capacity(schemes.len());
        for scheme in schemes {
            let mut cfg = base.clone();
            cfg.scheme = scheme;
            cfg.outputs.report = suffixed(&base.outputs.report, scheme.as_str());
            cfg.outputs.trajectory = suffixed(&base.outputs.trajectory, scheme.as_str());
            cfg.validate()?;
            configs.push(cfg);
        }
        Ok(configs)
    }
}

/// `report.jsonl` + `pmoc` → `report-pmoc.jsonl`.
fn suffixed(name: &str, tag: &str) -> String {
    match name.rsplit_once('.') {
        Some((stem, ext)) => format!("{stem}-{tag}.{ext}"),
        None => format!("{name}-{tag}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_validate_and_digest_is_hex() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let digest = cfg.digest();
        assert_eq!(digest.len(), 64);
        assert!(digest.chars().all(|c| c.is_ascii_hexdigit()));
    }

    #[test]
    fn flags_override_file_which_overrides_defaults() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            file,
            "system = \"pendulum\"\nn = 12\ntf_bounds = [2.0, 2.0]\n\n[guess]\namplitude = 0.7"
        )
        .unwrap();
        let overrides = ConfigOverrides {
            config: Some(file.path().to_path_buf()),
            n: Some(24),
            ..Default::default()
        };
        let cfg = overrides.resolve_run().unwrap();
        assert_eq!(cfg.system, SystemChoice::Pendulum); // file layer
        assert_eq!(cfg.n, 24); // flag wins over file
        assert_eq!(cfg.tf_bounds, [2.0, 2.0]);
        assert_eq!(cfg.guess.amplitude, 0.7);
        assert_eq!(cfg.guess.frequency, 1.0); // untouched default
        assert_eq!(cfg.scheme, SchemeChoice::Pmoc);
    }

    #[test]
    fn unknown_file_fields_are_rejected() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "granularity = 4").unwrap();
        let overrides = ConfigOverrides {
            config: Some(file.path().to_path_buf()),
            ..Default::default()
        };
        match overrides.resolve_run() {
            Err(ConfigError::Parse { message, .. }) => {
                assert!(message.contains("granularity"), "{message}")
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn three_link_system_spells_with_a_digit() {
        let mut cfg = RunConfig::default();
        cfg.system = SystemChoice::Threecrobot;
        let text = toml::to_string(&cfg).unwrap();
        assert!(text.contains("\"3crobot\""), "{text}");
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn digest_ignores_output_paths_but_tracks_semantics() {
        let base = RunConfig::default();
        let mut moved = base.clone();
        moved.outputs.dir = Some(PathBuf::from("/somewhere/else"));
        moved.outputs.report = "renamed.jsonl".into();
        assert_eq!(base.digest(), moved.digest());

        let mut refined = base.clone();
        refined.n = 65;
        assert_ne!(base.digest(), refined.digest());
        let mut reguessed = base.clone();
        reguessed.guess.amplitude = 1.25;
        assert_ne!(base.digest(), reguessed.digest());
    }

    #[test]
    fn misconfigurations_are_caught() {
        let mut cfg = RunConfig::default();
        cfg.tf_bounds = [3.0, 1.0];
        assert!(cfg.validate().is_err());

        let mut cfg = RunConfig::default();
        cfg.tf_bounds = [0.0, 1.0];
        assert!(cfg.validate().is_err());

        let mut cfg = RunConfig::default();
        cfg.optimize_lengths = true; // acrobot has no free lengths
        assert!(cfg.validate().is_err());

        let mut cfg = RunConfig::default();
        cfg.seeds = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn compare_resolution_builds_scheme_variants() {
        let overrides = ConfigOverrides {
            system: Some(SystemChoice::Pointmass),
            n: Some(6),
            ..Default::default()
        };
        let configs = overrides.resolve_compare().unwrap();
        assert_eq!(configs.len(), 3);
        assert_eq!(configs[0].scheme, SchemeChoice::Pmoc);
        assert_eq!(configs[0].outputs.report, "report-pmoc.jsonl");
        assert_eq!(configs[1].outputs.report, "report-dae-el.jsonl");
        assert_eq!(configs[2].outputs.trajectory, "trajectory-ode-el.csv");

        let dup = ConfigOverrides {
            scheme: vec![SchemeChoice::Pmoc, SchemeChoice::Pmoc],
            ..Default::default()
        };
        assert!(dup.resolve_compare().is_err());

        let single = ConfigOverrides {
            scheme: vec![SchemeChoice::Pmoc],
            ..Default::default()
        };
        assert!(single.resolve_compare().is_err());
    }

    #[test]
    fn run_rejects_repeated_scheme_flags() {
        let overrides = ConfigOverrides {
            scheme: vec![SchemeChoice::Pmoc, SchemeChoice::OdeEl],
            ..Default::default()
        };
        assert!(overrides.resolve_run().is_err());
    }
}
