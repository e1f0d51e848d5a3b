//! Tracker configuration and run manifests, both stored as flat
//! `key=value` text. Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::features::{parse_channels, ChannelGroup};
use crate::solver::{BinSolver, SolverParams};

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub lambda: f64,
    pub gamma: f64,
    /// Base context score `s`; 0 disables context learning.
    pub base_score: f64,
    /// Keyfilter stepsize `T`.
    pub stepsize: usize,
    pub context_patches: usize,
    pub mu0: f64,
    pub beta: f64,
    pub mu_max: f64,
    pub admm_iters: usize,
    pub cell_size: usize,
    /// Search region extent is `(1 + padding)` times the target extent.
    pub padding: f64,
    /// Upper bound on the search grid side, in cells.
    pub max_cells: usize,
    pub scales: usize,
    pub scale_step: f64,
    pub scale_penalty: f64,
    pub learning_rate: f64,
    pub output_sigma_factor: f64,
    pub channels: Vec<ChannelGroup>,
    pub bin_solver: BinSolver,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        let solver = SolverParams::default();
        TrackerConfig {
            lambda: solver.lambda,
            gamma: solver.gamma,
            base_score: 0.28,
            stepsize: crate::scheduler::DEFAULT_STEPSIZE,
            context_patches: crate::context::DEFAULT_PATCHES,
            mu0: solver.mu0,
            beta: solver.beta,
            mu_max: solver.mu_max,
            admm_iters: solver.admm_iters,
            cell_size: 4,
            padding: 1.0,
            max_cells: 64,
            scales: 5,
            scale_step: 1.02,
            scale_penalty: 0.995,
            learning_rate: 0.013,
            output_sigma_factor: 1.0 / 16.0,
            channels: ChannelGroup::ALL.to_vec(),
            bin_solver: BinSolver::ShermanMorrison,
        }
    }
}

/// `(key, description)` for every recognized key, in file order.
pub const KEYS: &[(&str, &str)] = &[
    ("lambda", "ridge weight"),
    ("gamma", "keyfilter weight"),
    ("base_score", "context base score s"),
    ("stepsize", "keyfilter stepsize T"),
    ("context_patches", "number of context patches"),
    ("mu0", "initial ADMM penalty"),
    ("beta", "ADMM penalty growth"),
    ("mu_max", "ADMM penalty cap"),
    ("admm_iters", "ADMM iterations per frame"),
    ("cell_size", "feature cell size in pixels"),
    ("padding", "search region padding"),
    ("max_cells", "maximum search grid side in cells"),
    ("scales", "scale pyramid levels"),
    ("scale_step", "scale pyramid step"),
    ("scale_penalty", "per-level scale penalty"),
    ("learning_rate", "appearance model rate"),
    ("output_sigma_factor", "label bandwidth factor"),
    ("channels", "feature channels, comma separated"),
    ("bin_solver", "per-bin solver: sm or dense"),
];

impl TrackerConfig {
    pub fn solver_params(&self) -> SolverParams {
        SolverParams {
            lambda: self.lambda,
            gamma: self.gamma,
            mu0: self.mu0,
            beta: self.beta,
            mu_max: self.mu_max,
            admm_iters: self.admm_iters,
            bin_solver: self.bin_solver,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solver_params().validate()?;
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.base_score >= 0.0 && self.base_score.is_finite()) {
            return bad("base_score must be non-negative");
        }
        if self.stepsize == 0 || self.cell_size == 0 || self.max_cells < 4 {
            return bad("stepsize, cell_size and max_cells must be positive (max_cells >= 4)");
        }
        if !(self.padding > 0.0 && self.padding.is_finite()) {
            return bad("padding must be positive");
        }
        if self.scales == 0 || self.scales.is_multiple_of(2) {
            return bad("scales must be odd");
        }
        if !(self.scale_step >= 1.0 && self.scale_step.is_finite()) {
            return bad("scale_step must be >= 1");
        }
        if !(self.scale_penalty > 0.0 && self.scale_penalty <= 1.0) {
            return bad("scale_penalty must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.learning_rate) {
            return bad("learning_rate must lie in [0, 1]");
        }
        if !(self.output_sigma_factor > 0.0 && self.output_sigma_factor.is_finite()) {
            return bad("output_sigma_factor must be positive");
        }
        if self.channels.is_empty() {
            return bad("no feature channels");
        }
        Ok(())
    }

    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
            v.trim().parse().map_err(|_| format!("cannot parse {v:?}"))
        }
        match key.trim() {
            "lambda" => self.lambda = num(value)?,
            "gamma" => self.gamma = num(value)?,
            "base_score" => self.base_score = num(value)?,
            "stepsize" => self.stepsize = num(value)?,
            "context_patches" => self.context_patches = num(value)?,
            "mu0" => self.mu0 = num(value)?,
            "beta" => self.beta = num(value)?,
            "mu_max" => self.mu_max = num(value)?,
            "admm_iters" => self.admm_iters = num(value)?,
            "cell_size" => self.cell_size = num(value)?,
            "padding" => self.padding = num(value)?,
            "max_cells" => self.max_cells = num(value)?,
            "scales" => self.scales = num(value)?,
            "scale_step" => self.scale_step = num(value)?,
            "scale_penalty" => self.scale_penalty = num(value)?,
            "learning_rate" => self.learning_rate = num(value)?,
            "output_sigma_factor" => self.output_sigma_factor = num(value)?,
            "channels" => self.channels = parse_channels(value).map_err(|e| e.to_string())?,
            "bin_solver" => {
                self.bin_solver = match value.trim() {
                    "sm" | "sherman_morrison" => BinSolver::ShermanMorrison,
                    "dense" => BinSolver::Dense,
                    other => return Err(format!("unknown bin solver {other:?}")),
                }
            }
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "lambda" => self.lambda.to_string(),
            "gamma" => self.gamma.to_string(),
            "base_score" => self.base_score.to_string(),
            "stepsize" => self.stepsize.to_string(),
            "context_patches" => self.context_patches.to_string(),
            "mu0" => self.mu0.to_string(),
            "beta" => self.beta.to_string(),
            "mu_max" => self.mu_max.to_string(),
            "admm_iters" => self.admm_iters.to_string(),
            "cell_size" => self.cell_size.to_string(),
            "padding" => self.padding.to_string(),
            "max_cells" => self.max_cells.to_string(),
            "scales" => self.scales.to_string(),
            "scale_step" => self.scale_step.to_string(),
            "scale_penalty" => self.scale_penalty.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "output_sigma_factor" => self.output_sigma_factor.to_string(),
            "channels" => self
                .channels
                .iter()
                .map(|c| c.name())
                .collect::<Vec<_>>()
                .join(","),
            "bin_solver" => match self.bin_solver {
                BinSolver::ShermanMorrison => "sm".to_string(),
                BinSolver::Dense => "dense".to_string(),
            },
            _ => return None,
        })
    }

    /// Every key, one per line. `f64` values use the shortest round-trip
    /// representation, so parsing the output restores the config exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, _) in KEYS {
            let _ = writeln!(out, "{key}={}", self.get(key).expect("known key"));
        }
        out
    }

    /// Applies `key=value` lines on top of `self`.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (idx, line) in text.lines().enumerate() {
            let Some((key, value)) = split_line(line) else { continue };
            self.set(key, value).map_err(|reason| Error::Config {
                origin: origin.to_string(),
                line: idx + 1,
                reason,
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = TrackerConfig::default();
        cfg.apply_text(text, origin)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TrackerConfig::from_text(&text, &path.display().to_string())
    }
}

/// `None` for blank and comment lines; a line without `=` yields an empty key
/// so the caller reports it.
fn split_line(line: &str) -> Option<(&str, &str)> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return None;
    }
    Some(line.split_once('=').unwrap_or(("", line)))
}

pub const MANIFEST_FILE: &str = "manifest.txt";

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config: TrackerConfig,
    pub sequences: Vec<PathBuf>,
    pub output: PathBuf,
    pub seed: u64,
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "output={}", self.output.display());
        for s in &self.sequences {
            let _ = writeln!(out, "sequence={}", s.display());
        }
        out.push_str(&self.config.to_text());
        out
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let mut config = TrackerConfig::default();
        let mut sequences = Vec::new();
        let mut output = None;
        let mut seed = 0;
        for (idx, line) in text.lines().enumerate() {
            let Some((key, value)) = split_line(line) else { continue };
            let err = |reason: String| Error::Config {
                origin: origin.to_string(),
                line: idx + 1,
                reason,
            };
            match key.trim() {
                "seed" => seed = value.trim().parse().map_err(|_| err(format!("bad seed {value:?}")))?,
                "output" => output = Some(PathBuf::from(value.trim())),
                "sequence" => sequences.push(PathBuf::from(value.trim())),
                k => config.set(k, value).map_err(err)?,
            }
        }
        config.validate()?;
        let output = output.ok_or_else(|| Error::Config {
            origin: origin.to_string(),
            line: 0,
            reason: "missing output".into(),
        })?;
        Ok(RunManifest {
            config,
            sequences,
            output,
            seed,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, self.to_text()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunManifest::from_text(&text, &path.display().to_string())
    }
}
