//! Sectioned `key = value` run configuration.
//!
//! ```text
//! [model]
//! gamma = 3
//! delta = 0.4        # sets r = delta * rho; give either r or delta
//!
//! [grid]
//! y_max = 2
//! intervals = 40
//! steps = 100
//!
//! [solver]
//! eps = 1e-3
//!
//! [experiment]
//! n = 2
//! deltas = 0.32, 1/3, 0.4
//! reservations = 0, 0.5, 1
//! schedule = 0.24; 0.5; 1.0, 1.5
//! seed = 7
//! n_paths = 100000
//! y0 = 1
//!
//! [output]
//! dir = out
//! ```
//!
//! Numbers may be written as ratios (`1/3`). Unknown sections and keys are
//! rejected.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use contractlab_core::{ModelParams, ModelSpec, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Firstbest,
    Solve,
    Scheduled,
    Simulate,
    Diagnostics,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Firstbest => "firstbest",
            Mode::Solve => "solve",
            Mode::Scheduled => "scheduled",
            Mode::Simulate => "simulate",
            Mode::Diagnostics => "diagnostics",
        }
    }
}

impl FromStr for Mode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "firstbest" => Ok(Mode::Firstbest),
            "solve" => Ok(Mode::Solve),
            "scheduled" => Ok(Mode::Scheduled),
            "simulate" => Ok(Mode::Simulate),
            "diagnostics" => Ok(Mode::Diagnostics),
            other => Err(ConfigError::new(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl ConfigError {
    fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub y_max: f64,
    pub intervals: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Option<Mode>,
    pub n: usize,
    pub schedules: Vec<Vec<f64>>,
    pub deltas: Vec<f64>,
    pub reservations: Vec<f64>,
    pub zeta: Option<f64>,
    pub seed: u64,
    pub n_paths: usize,
    pub y0: f64,
    pub region_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    /// `delta` as written, when `r` was derived from it.
    pub delta: Option<f64>,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub experiment: ExperimentConfig,
    pub output_dir: PathBuf,
}

type Section = BTreeMap<String, (String, usize)>;

/// Parses a number, accepting `a/b` ratios.
pub fn parse_number(text: &str) -> Result<f64, ConfigError> {
    let t = text.trim();
    let value = match t.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a
                .trim()
                .parse()
                .map_err(|_| ConfigError::new(format!("bad number {t:?}")))?;
            let b: f64 = b
                .trim()
                .parse()
                .map_err(|_| ConfigError::new(format!("bad number {t:?}")))?;
            a / b
        }
        None => t.parse().map_err(|_| ConfigError::new(format!("bad number {t:?}")))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ConfigError::new(format!("number {t:?} is not finite")))
    }
}

fn parse_list(text: &str) -> Result<Vec<f64>, ConfigError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_number)
        .collect()
}

fn parse_sections(text: &str) -> Result<BTreeMap<String, Section>, ConfigError> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim().to_string();
            if !matches!(name.as_str(), "model" | "grid" | "solver" | "experiment" | "output") {
                return Err(ConfigError::new(format!("line {line_no}: unknown section [{name}]")));
            }
            if sections.contains_key(&name) {
                return Err(ConfigError::new(format!("line {line_no}: section [{name}] repeated")));
            }
            sections.insert(name.clone(), Section::new());
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::new(format!("line {line_no}: expected key = value")));
        };
        let Some(section) = current.as_ref() else {
            return Err(ConfigError::new(format!("line {line_no}: key outside of a section")));
        };
        let key = key.trim().to_string();
        let entry = sections.get_mut(section).expect("section inserted on header");
        if entry.insert(key.clone(), (value.trim().to_string(), line_no)).is_some() {
            return Err(ConfigError::new(format!(
                "line {line_no}: key {key} repeated in [{section}]"
            )));
        }
    }
    Ok(sections)
}

struct Reader {
    name: &'static str,
    entries: Section,
}

impl Reader {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    fn number(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.take(key)
            .map(|(v, line)| parse_number(&v).map_err(|e| ConfigError::new(format!("line {line}: {key}: {e}"))))
            .transpose()
    }

    fn count(&mut self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.take(key)
            .map(|(v, line)| {
                v.parse::<usize>().map_err(|_| {
                    ConfigError::new(format!("line {line}: {key} must be a nonnegative integer, got {v:?}"))
                })
            })
            .transpose()
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_iter().next() {
            Some((key, (_, line))) => Err(ConfigError::new(format!(
                "line {line}: unknown key {key} in [{}]",
                self.name
            ))),
            None => Ok(()),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections = parse_sections(text)?;
        let mut section = |name: &'static str| Reader {
            name,
            entries: sections.remove(name).unwrap_or_default(),
        };

        let mut m = section("model");
        let defaults = ModelSpec::default();
        let mut model = ModelSpec {
            gamma: m.number("gamma")?.unwrap_or(defaults.gamma),
            r: defaults.r,
            rho: m.number("rho")?.unwrap_or(defaults.rho),
            sigma: m.number("sigma")?.unwrap_or(defaults.sigma),
            k: m.number("k")?.unwrap_or(defaults.k),
            a_bar: m.number("a_bar")?.unwrap_or(defaults.a_bar),
            horizon: m.number("horizon")?.unwrap_or(defaults.horizon),
            cost_c2: m.number("cost_c2")?.unwrap_or(defaults.cost_c2),
            cost_c1: m.number("cost_c1")?.unwrap_or(defaults.cost_c1),
        };
        let r = m.number("r")?;
        let delta = m.number("delta")?;
        match (r, delta) {
            (Some(_), Some(_)) => return Err(ConfigError::new("[model] sets both r and delta")),
            (Some(r), None) => model.r = r,
            (None, Some(d)) => model.r = d * model.rho,
            (None, None) => {}
        }
        m.finish()?;

        let mut g = section("grid");
        let grid = GridConfig {
            y_max: g.number("y_max")?.unwrap_or(2.0),
            intervals: g.count("intervals")?.unwrap_or(40),
            steps: g.count("steps")?.unwrap_or(100),
        };
        g.finish()?;

        let mut s = section("solver");
        let base = SolverConfig::default();
        let solver = SolverConfig {
            eps: s.number("eps")?.unwrap_or(base.eps),
            max_policy_iters: s.count("max_policy_iters")?.unwrap_or(base.max_policy_iters),
            policy_tol: s.number("policy_tol")?.unwrap_or(base.policy_tol),
        };
        s.finish()?;

        let mut e = section("experiment");
        let mode = e.take("mode").map(|(v, _)| v.parse()).transpose()?;
        let n = match e.take("n") {
            Some((v, line)) => v
                .parse::<usize>()
                .map_err(|_| ConfigError::new(format!("line {line}: n must be a nonnegative integer, got {v:?}")))?,
            None => 1,
        };
        let schedules = match e.take("schedule") {
            Some((v, line)) => v
                .split(';')
                .map(|part| parse_list(part).map_err(|err| ConfigError::new(format!("line {line}: schedule: {err}"))))
                .collect::<Result<Vec<_>, _>>()?,
            None => Vec::new(),
        };
        let list = |e: &mut Reader, key: &str| -> Result<Option<Vec<f64>>, ConfigError> {
            e.take(key)
                .map(|(v, line)| parse_list(&v).map_err(|err| ConfigError::new(format!("line {line}: {key}: {err}"))))
                .transpose()
        };
        let deltas = list(&mut e, "deltas")?.unwrap_or_default();
        let reservations = list(&mut e, "reservations")?.unwrap_or_else(|| vec![0.0]);
        let zeta = e.number("zeta")?;
        let seed = match e.take("seed") {
            Some((v, line)) => v
                .parse::<u64>()
                .map_err(|_| ConfigError::new(format!("line {line}: seed must be an unsigned integer, got {v:?}")))?,
            None => 0,
        };
        let n_paths = e.count("n_paths")?.unwrap_or(10_000);
        let y0 = e.number("y0")?.unwrap_or(1.0);
        let region_tol = e.number("region_tol")?;
        e.finish()?;

        let mut o = section("output");
        let output_dir = o
            .take("dir")
            .map_or_else(|| PathBuf::from("out"), |(v, _)| PathBuf::from(v));
        o.finish()?;

        Ok(Self {
            model,
            delta,
            grid,
            solver,
            experiment: ExperimentConfig {
                mode,
                n,
                schedules,
                deltas,
                reservations,
                zeta,
                seed,
                n_paths,
                y0,
                region_tol,
            },
            output_dir,
        })
    }

    /// Model parameters for each entry of the delta sweep, or the base model
    /// when no sweep is given.
    pub fn model_variants(&self) -> Result<Vec<(f64, ModelParams)>, ConfigError> {
        let invalid = |e: contractlab_core::Error| ConfigError::new(e.to_string());
        if self.experiment.deltas.is_empty() {
            let p = ModelParams::new(self.model).map_err(invalid)?;
            return Ok(vec![(self.delta.unwrap_or(p.delta()), p)]);
        }
        self.experiment
            .deltas
            .iter()
            .map(|&d| {
                let spec = ModelSpec {
                    r: d * self.model.rho,
                    ..self.model
                };
                ModelParams::new(spec).map(|p| (d, p)).map_err(invalid)
            })
            .collect()
    }

    /// Checks everything a run of `mode` needs before any solver work starts.
    pub fn validate(&self, mode: Mode) -> Result<(), ConfigError> {
        if let Some(m) = self.experiment.mode {
            if m != mode {
                return Err(ConfigError::new(format!(
                    "config requests mode {} but {} was given",
                    m.name(),
                    mode.name()
                )));
            }
        }
        self.model_variants()?;
        self.solver.validate().map_err(|e| ConfigError::new(e.to_string()))?;
        contractlab_core::Grid::new(
            self.grid.y_max,
            self.grid.intervals,
            self.grid.steps,
            self.model.horizon,
        )
        .map_err(|e| ConfigError::new(e.to_string()))?;
        let horizon = self.model.horizon;
        let e = &self.experiment;
        match mode {
            Mode::Firstbest => {
                if e.reservations.iter().any(|&r| r < 0.0) {
                    return Err(ConfigError::new("reservations must be nonnegative"));
                }
                if let Some(z) = e.zeta {
                    if e.n > 0 && !(z > 0.0 && z < horizon / e.n as f64) {
                        return Err(ConfigError::new(format!("zeta must lie in (0, T/N), got {z}")));
                    }
                }
            }
            Mode::Scheduled => {
                if e.schedules.is_empty() {
                    return Err(ConfigError::new("scheduled mode needs [experiment] schedule"));
                }
                for times in &e.schedules {
                    if times.is_empty() {
                        return Err(ConfigError::new("empty schedule entry"));
                    }
                    for (j, &t) in times.iter().enumerate() {
                        if !(t > 0.0 && t < horizon) {
                            return Err(ConfigError::new(format!("schedule time {t} outside (0, {horizon})")));
                        }
                        if j > 0 && t <= times[j - 1] {
                            return Err(ConfigError::new("schedule times must be strictly increasing"));
                        }
                    }
                }
            }
            Mode::Simulate => {
                if e.n_paths == 0 {
                    return Err(ConfigError::new("n_paths must be at least 1"));
                }
                if !(e.y0 >= 0.0 && e.y0 <= self.grid.y_max) {
                    return Err(ConfigError::new(format!("y0 must lie in [0, y_max], got {}", e.y0)));
                }
            }
            Mode::Solve | Mode::Diagnostics => {}
        }
        if let Some(tol) = e.region_tol {
            if !(tol > 0.0) {
                return Err(ConfigError::new("region_tol must be positive"));
            }
        }
        Ok(())
    }

    /// Renders the resolved configuration in the input format.
    pub fn render(&self, mode: Mode) -> String {
        let m = &self.model;
        let e = &self.experiment;
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let mut out = String::new();
        let _ = writeln!(out, "[model]");
        for (k, v) in [
            ("gamma", m.gamma),
            ("r", m.r),
            ("rho", m.rho),
            ("sigma", m.sigma),
            ("k", m.k),
            ("a_bar", m.a_bar),
            ("horizon", m.horizon),
            ("cost_c2", m.cost_c2),
            ("cost_c1", m.cost_c1),
        ] {
            let _ = writeln!(out, "{k} = {v:?}");
        }
        let _ = writeln!(
            out,
            "\n[grid]\ny_max = {:?}\nintervals = {}\nsteps = {}",
            self.grid.y_max, self.grid.intervals, self.grid.steps
        );
        let _ = writeln!(
            out,
            "\n[solver]\neps = {:?}\nmax_policy_iters = {}\npolicy_tol = {:?}",
            self.solver.eps, self.solver.max_policy_iters, self.solver.policy_tol
        );
        let _ = writeln!(out, "\n[experiment]\nmode = {}\nn = {}", mode.name(), e.n);
        if !e.schedules.is_empty() {
            let s: Vec<String> = e.schedules.iter().map(|t| list(t)).collect();
            let _ = writeln!(out, "schedule = {}", s.join("; "));
        }
        if !e.deltas.is_empty() {
            let _ = writeln!(out, "deltas = {}", list(&e.deltas));
        }
        let _ = writeln!(out, "reservations = {}", list(&e.reservations));
        if let Some(z) = e.zeta {
            let _ = writeln!(out, "zeta = {z:?}");
        }
        let _ = writeln!(out, "seed = {}\nn_paths = {}\ny0 = {:?}", e.seed, e.n_paths, e.y0);
        if let Some(t) = e.region_tol {
            let _ = writeln!(out, "region_tol = {t:?}");
        }
        let _ = writeln!(out, "\n[output]\ndir = {}", self.output_dir.display());
        out
    }
}
