//! Run configuration: a flat `key = value` text format with dotted section
//! keys, layered as defaults, then the config file, then `--set` pairs,
//! then the dedicated flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Subcommand;
use sternpath::oracle::{GridSpec, Grid1D};
use sternpath::{derive_timing, Apparatus, GaussianPacket, Timing, UnitSystem};

use crate::error::{CliError, CliResult};

/// Delay after the field exit used when no evaluation time is given.
pub const DEFAULT_DELAY: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Subcommand)]
pub enum Experiment {
    /// Histogram of classical detector displacements over random spin orientations
    Classical,
    /// z-marginal of the entangled spinor packet at one time
    Evolve,
    /// Collapsed and collapse-free z-resolved spin density matrices
    Density,
    /// Mean-field ensemble histogram against its closed form
    Meanfield,
    /// Grid propagation against the closed-form packet
    OracleCompare,
    /// Back-extrapolate branch centroids to the collapse point
    Backtrack,
    /// Recombination fidelity after a reversing second stage
    Recombine,
    /// Grid propagation through the field layers with a peak count
    Sandwich,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Classical,
        Experiment::Evolve,
        Experiment::Density,
        Experiment::Meanfield,
        Experiment::OracleCompare,
        Experiment::Backtrack,
        Experiment::Recombine,
        Experiment::Sandwich,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Classical => "classical",
            Experiment::Evolve => "evolve",
            Experiment::Density => "density",
            Experiment::Meanfield => "meanfield",
            Experiment::OracleCompare => "oracle-compare",
            Experiment::Backtrack => "backtrack",
            Experiment::Recombine => "recombine",
            Experiment::Sandwich => "sandwich",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| format!("unknown experiment {s:?}"))
    }
}

/// Packet parameters; the source `y` is always `apparatus.y_a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketConfig {
    pub sigma: f64,
    pub k_y: f64,
    pub x: f64,
    pub z: f64,
    pub t_prime: f64,
    /// Spin polar angle; `pi/2` with `alpha = 0` is the `+x` state.
    pub beta: f64,
    pub alpha: f64,
}

impl Default for PacketConfig {
    fn default() -> Self {
        Self { sigma: 1.0, k_y: 10.0, x: 0.0, z: 0.0, t_prime: 0.0, beta: std::f64::consts::FRAC_PI_2, alpha: 0.0 }
    }
}

impl PacketConfig {
    pub fn build(&self, y_a: f64) -> sternpath::Result<GaussianPacket> {
        let mut p = GaussianPacket::new(self.sigma, y_a, self.k_y)?.with_orientation(self.beta, self.alpha)?;
        p.x_a[0] = self.x;
        p.x_a[2] = self.z;
        p.t_prime = self.t_prime;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub units: UnitSystem,
    pub apparatus: Apparatus,
    pub packet: PacketConfig,
    pub n: usize,
    pub seed: u64,
    /// Evaluation time; `None` means field exit plus [`DEFAULT_DELAY`].
    pub t: Option<f64>,
    pub bins: usize,
    /// z samples along the evolve and density lines.
    pub points: usize,
    pub out: PathBuf,
    pub grid: GridSpec<f64>,
    pub detectors: usize,
    pub second_stage: bool,
    pub phase_error: f64,
    pub sandwich_n_points: Option<usize>,
    pub sandwich_max_dt: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Classical,
            units: UnitSystem::default(),
            apparatus: Apparatus { y_a: 0.0, y_b: 5.0, y_c: 5.5, y_d: 55.5, grad_bz: 200.0 },
            packet: PacketConfig::default(),
            n: 100_000,
            seed: 0,
            t: None,
            bins: 40,
            points: 1001,
            out: PathBuf::from("out"),
            grid: GridSpec::default(),
            detectors: 5,
            second_stage: true,
            phase_error: 0.0,
            sandwich_n_points: None,
            sandwich_max_dt: 1e-2,
        }
    }
}

/// Values taken from dedicated command-line flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub t: Option<f64>,
    pub bins: Option<usize>,
    /// `key=value` pairs applied after the config file.
    pub set: Vec<String>,
}

fn value<T: FromStr>(key: &str, raw: &str) -> CliResult<T> {
    raw.parse().map_err(|_| CliError::Parse(format!("{key}: cannot parse {raw:?}")))
}

fn optional<T: FromStr>(key: &str, raw: &str) -> CliResult<Option<T>> {
    if raw == "auto" {
        Ok(None)
    } else {
        value(key, raw).map(Some)
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Validation(msg()))
    }
}

impl RunConfig {
    /// Sets one dotted key from its text value.
    pub fn apply(&mut self, key: &str, raw: &str) -> CliResult<()> {
        match key {
            "experiment" => self.experiment = raw.parse().map_err(CliError::Parse)?,
            "units.hbar" => self.units.hbar = value(key, raw)?,
            "units.mass" => self.units.mass = value(key, raw)?,
            "units.mu_b" => self.units.mu_b = value(key, raw)?,
            "apparatus.y_a" => self.apparatus.y_a = value(key, raw)?,
            "apparatus.y_b" => self.apparatus.y_b = value(key, raw)?,
            "apparatus.y_c" => self.apparatus.y_c = value(key, raw)?,
            "apparatus.y_d" => self.apparatus.y_d = value(key, raw)?,
            "apparatus.grad_bz" => self.apparatus.grad_bz = value(key, raw)?,
            "packet.sigma" => self.packet.sigma = value(key, raw)?,
            "packet.k_y" => self.packet.k_y = value(key, raw)?,
            "packet.x" => self.packet.x = value(key, raw)?,
            "packet.z" => self.packet.z = value(key, raw)?,
            "packet.t_prime" => self.packet.t_prime = value(key, raw)?,
            "packet.beta" => self.packet.beta = value(key, raw)?,
            "packet.alpha" => self.packet.alpha = value(key, raw)?,
            "run.n" => self.n = value(key, raw)?,
            "run.seed" => self.seed = value(key, raw)?,
            "run.t" => self.t = optional(key, raw)?,
            "run.bins" => self.bins = value(key, raw)?,
            "run.points" => self.points = value(key, raw)?,
            "run.out" => self.out = PathBuf::from(raw),
            "grid.n_points" => self.grid.n_points = value(key, raw)?,
            "grid.half_width" => self.grid.half_width = optional(key, raw)?,
            "grid.max_dt" => self.grid.max_dt = value(key, raw)?,
            "grid.impulsive" => self.grid.impulsive = value(key, raw)?,
            "backtrack.detectors" => self.detectors = value(key, raw)?,
            "recombine.second_stage" => self.second_stage = value(key, raw)?,
            "recombine.phase_error" => self.phase_error = value(key, raw)?,
            "sandwich.n_points" => self.sandwich_n_points = optional(key, raw)?,
            "sandwich.max_dt" => self.sandwich_max_dt = value(key, raw)?,
            _ => return Err(CliError::Parse(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`.
    ///
    /// Blank lines and `#` comments are skipped; a key may appear once.
    pub fn merge_text(&mut self, text: &str) -> CliResult<()> {
        let mut seen = std::collections::HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split_once('#').map_or(line, |(head, _)| head).trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| CliError::Parse(format!("line {}: {msg}", i + 1));
            let (key, raw) = line.split_once('=').ok_or_else(|| at(format!("expected key = value, got {line:?}")))?;
            let (key, raw) = (key.trim(), raw.trim());
            if raw.is_empty() {
                return Err(at(format!("{key}: empty value")));
            }
            if !seen.insert(key.to_string()) {
                return Err(at(format!("{key}: duplicate key")));
            }
            self.apply(key, raw).map_err(|e| at(e.to_string()))?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut c = Self::default();
        c.merge_text(text)?;
        Ok(c)
    }

    /// Every key in canonical order; unset optional keys are omitted.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let f = |x: f64| format!("{x:?}");
        let mut out = vec![
            ("experiment", self.experiment.name().to_string()),
            ("units.hbar", f(self.units.hbar)),
            ("units.mass", f(self.units.mass)),
            ("units.mu_b", f(self.units.mu_b)),
            ("apparatus.y_a", f(self.apparatus.y_a)),
            ("apparatus.y_b", f(self.apparatus.y_b)),
            ("apparatus.y_c", f(self.apparatus.y_c)),
            ("apparatus.y_d", f(self.apparatus.y_d)),
            ("apparatus.grad_bz", f(self.apparatus.grad_bz)),
            ("packet.sigma", f(self.packet.sigma)),
            ("packet.k_y", f(self.packet.k_y)),
            ("packet.x", f(self.packet.x)),
            ("packet.z", f(self.packet.z)),
            ("packet.t_prime", f(self.packet.t_prime)),
            ("packet.beta", f(self.packet.beta)),
            ("packet.alpha", f(self.packet.alpha)),
            ("run.n", self.n.to_string()),
            ("run.seed", self.seed.to_string()),
        ];
        if let Some(t) = self.t {
            out.push(("run.t", f(t)));
        }
        out.extend([
            ("run.bins", self.bins.to_string()),
            ("run.points", self.points.to_string()),
            ("run.out", self.out.to_string_lossy().into_owned()),
            ("grid.n_points", self.grid.n_points.to_string()),
        ]);
        if let Some(h) = self.grid.half_width {
            out.push(("grid.half_width", f(h)));
        }
        out.extend([
            ("grid.max_dt", f(self.grid.max_dt)),
            ("grid.impulsive", self.grid.impulsive.to_string()),
            ("backtrack.detectors", self.detectors.to_string()),
            ("recombine.second_stage", self.second_stage.to_string()),
            ("recombine.phase_error", f(self.phase_error)),
        ]);
        if let Some(n) = self.sandwich_n_points {
            out.push(("sandwich.n_points", n.to_string()));
        }
        out.push(("sandwich.max_dt", f(self.sandwich_max_dt)));
        out
    }

    /// Text form accepted by [`RunConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.pairs() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Defaults, then the optional config file, then the overrides.
    pub fn assemble(experiment: Experiment, path: Option<&Path>, overrides: &Overrides) -> CliResult<Self> {
        let mut c = Self::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
            c.merge_text(&text)?;
        }
        for pair in &overrides.set {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| CliError::Parse(format!("--set expects key=value, got {pair:?}")))?;
            c.apply(k.trim(), v.trim())?;
        }
        c.experiment = experiment;
        if let Some(out) = &overrides.out {
            c.out = out.clone();
        }
        c.seed = overrides.seed.unwrap_or(c.seed);
        c.n = overrides.n.unwrap_or(c.n);
        c.t = overrides.t.or(c.t);
        c.bins = overrides.bins.unwrap_or(c.bins);
        Ok(c)
    }

    pub fn build_packet(&self) -> sternpath::Result<GaussianPacket> {
        self.packet.build(self.apparatus.y_a)
    }

    pub fn timing(&self) -> sternpath::Result<Timing> {
        derive_timing(&self.apparatus, &self.build_packet()?, &self.units)
    }

    /// Evaluation time for the time-resolved experiments.
    pub fn eval_time(&self, timing: &Timing) -> f64 {
        self.t.unwrap_or(timing.t_c + DEFAULT_DELAY)
    }

    /// Checks every sub-configuration; all failures are validation errors.
    pub fn validate(&self) -> CliResult<()> {
        let invalid = |e: sternpath::Error| CliError::Validation(e.to_string());
        self.units.validate().map_err(invalid)?;
        self.apparatus.validate().map_err(invalid)?;
        self.timing().map_err(invalid)?;
        check(self.n >= 1, || "run.n must be >= 1".into())?;
        check(self.bins >= 1, || "run.bins must be >= 1".into())?;
        check(self.points >= 2, || "run.points must be >= 2".into())?;
        if let Some(t) = self.t {
            check(t.is_finite(), || format!("run.t must be finite, got {t}"))?;
        }
        Grid1D::new(-1.0, 1.0, self.grid.n_points).map_err(invalid)?;
        if let Some(h) = self.grid.half_width {
            check(h > 0.0 && h.is_finite(), || format!("grid.half_width must be > 0, got {h}"))?;
        }
        check(self.grid.max_dt > 0.0 && self.grid.max_dt.is_finite(), || {
            format!("grid.max_dt must be > 0, got {}", self.grid.max_dt)
        })?;
        check(self.detectors >= 3, || "backtrack.detectors must be >= 3".into())?;
        check(self.phase_error.is_finite(), || "recombine.phase_error must be finite".into())?;
        if let Some(n) = self.sandwich_n_points {
            Grid1D::new(-1.0, 1.0, n).map_err(invalid)?;
        }
        check(self.sandwich_max_dt > 0.0 && self.sandwich_max_dt.is_finite(), || {
            format!("sandwich.max_dt must be > 0, got {}", self.sandwich_max_dt)
        })?;
        Ok(())
    }
}
