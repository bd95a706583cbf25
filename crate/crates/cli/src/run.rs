use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use contractlab_core::numeric::interp_uniform;
use contractlab_core::scheme::default_region_tol;
use contractlab_core::sim::Histogram;
use contractlab_core::{
    fb_bounds, simulate_value, solve_recursive, solve_scheduled, BonusScheme, Diagnostics, Grid, GridPolicy,
    LevelSolution, ModelParams, SimConfig,
};
use log::info;
use rayon::prelude::*;

use crate::config::{Mode, RunConfig};
use crate::csv::{export_surface_csv, fmt_num, write_table};
use crate::RunError;

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub eps: Option<f64>,
    pub seed: Option<u64>,
}

/// Reads `config_path`, applies overrides and runs `mode`. Returns the
/// output directory.
pub fn run(mode: Mode, config_path: &Path, overrides: &Overrides) -> Result<PathBuf, RunError> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| RunError::Validation(format!("cannot read config {}: {e}", config_path.display())))?;
    let mut cfg =
        RunConfig::parse(&text).map_err(|e| RunError::Validation(format!("{}: {e}", config_path.display())))?;
    if let Some(out) = &overrides.out {
        cfg.output_dir = out.clone();
    }
    if let Some(eps) = overrides.eps {
        cfg.solver.eps = eps;
    }
    if let Some(seed) = overrides.seed {
        cfg.experiment.seed = seed;
    }
    run_with_config(mode, &cfg)
}

pub fn run_with_config(mode: Mode, cfg: &RunConfig) -> Result<PathBuf, RunError> {
    cfg.validate(mode)?;
    let start = Instant::now();
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out).map_err(RunError::io(&out))?;
    let outcome = execute(mode, cfg, &out);
    let status = match &outcome {
        Ok(()) => "ok".to_string(),
        Err(e) => format!("failed: {e}"),
    };
    let manifest = manifest(mode, cfg, &status, start.elapsed().as_secs_f64());
    let path = out.join("manifest.txt");
    let written = fs::write(&path, manifest).map_err(RunError::io(path));
    outcome?;
    written?;
    Ok(out)
}

fn manifest(mode: Mode, cfg: &RunConfig, status: &str, wall: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "contractlab {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "contractlab-core {}", contractlab_core::VERSION);
    let _ = writeln!(s, "mode = {}", mode.name());
    let _ = writeln!(s, "status = {status}");
    let _ = writeln!(s, "threads = {}", rayon::current_num_threads());
    let _ = writeln!(s, "wall_time_s = {wall:.3}");
    let _ = writeln!(s, "\n# resolved config");
    s.push_str(&cfg.render(mode));
    s
}

fn execute(mode: Mode, cfg: &RunConfig, out: &Path) -> Result<(), RunError> {
    let variants = cfg.model_variants()?;
    let grid = Grid::new(cfg.grid.y_max, cfg.grid.intervals, cfg.grid.steps, cfg.model.horizon)?;
    if mode == Mode::Firstbest {
        return firstbest(cfg, &variants, out);
    }
    let sweep = variants.len() > 1;
    variants.par_iter().try_for_each(|(delta, params)| {
        let dir = if sweep {
            out.join(format!("delta_{}", fmt_num(*delta)))
        } else {
            out.to_path_buf()
        };
        fs::create_dir_all(&dir).map_err(RunError::io(&dir))?;
        info!("{} run for delta = {delta} in {}", mode.name(), dir.display());
        let entry = Entry {
            cfg,
            params,
            grid: &grid,
            dir: &dir,
        };
        match mode {
            Mode::Solve => entry.solve(),
            Mode::Scheduled => entry.scheduled(),
            Mode::Simulate => entry.simulate(),
            Mode::Diagnostics => entry.diagnostics(),
            Mode::Firstbest => unreachable!("handled above"),
        }
    })
}

fn firstbest(cfg: &RunConfig, variants: &[(f64, ModelParams)], out: &Path) -> Result<(), RunError> {
    let e = &cfg.experiment;
    let cases: Vec<(f64, &ModelParams, f64)> = variants
        .iter()
        .flat_map(|(d, p)| e.reservations.iter().map(move |&r| (*d, p, r)))
        .collect();
    let rows = cases
        .par_iter()
        .map(|&(delta, p, reservation)| {
            let b = fb_bounds(reservation, e.n, e.zeta, p)?;
            Ok(vec![
                fmt_num(delta),
                fmt_num(reservation),
                b.regime.label().to_string(),
                fmt_num(b.lower),
                fmt_num(b.upper),
                fmt_num(b.lambda_lower),
                fmt_num(b.lambda_upper),
            ])
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    let path = out.join("firstbest.csv");
    write_table(
        &path,
        &[
            "delta",
            "reservation",
            "regime",
            "lower",
            "upper",
            "lambda_lower",
            "lambda_upper",
        ],
        &rows,
    )
    .map_err(RunError::io(path))
}

struct Entry<'a> {
    cfg: &'a RunConfig,
    params: &'a ModelParams,
    grid: &'a Grid,
    dir: &'a Path,
}

impl Entry<'_> {
    fn surface(&self, name: &str, rows: &[Vec<f64>]) -> Result<(), RunError> {
        let path = self.dir.join(name);
        export_surface_csv(&path, self.grid.ts(), self.grid.ys(), rows).map_err(RunError::io(path))
    }

    fn table(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), RunError> {
        let path = self.dir.join(name);
        write_table(&path, header, rows).map_err(RunError::io(path))
    }

    fn solve_levels(&self, n: usize) -> Result<(Vec<LevelSolution>, Vec<BonusScheme>), RunError> {
        let levels = solve_recursive(n, self.params, self.grid, &self.cfg.solver)?;
        let tol = self
            .cfg
            .experiment
            .region_tol
            .unwrap_or(default_region_tol(self.cfg.solver.eps));
        let schemes = BonusScheme::from_levels(&levels, self.params, self.grid, tol);
        Ok((levels, schemes))
    }

    fn solve(&self) -> Result<(), RunError> {
        let (levels, schemes) = self.solve_levels(self.cfg.experiment.n)?;
        for level in &levels {
            self.surface(&format!("value_n{}.csv", level.surface.level), level.surface.rows())?;
        }
        for scheme in &schemes {
            self.surface(&format!("scheme_n{}.csv", scheme.level), &scheme.eta)?;
            let region: Vec<Vec<f64>> = scheme
                .region
                .iter()
                .map(|row| row.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
                .collect();
            self.surface(&format!("region_n{}.csv", scheme.level), &region)?;
        }
        Ok(())
    }

    fn scheduled(&self) -> Result<(), RunError> {
        let schedules = &self.cfg.experiment.schedules;
        let surfaces = schedules
            .par_iter()
            .map(|times| solve_scheduled(times, self.params, self.grid, &self.cfg.solver))
            .collect::<Result<Vec<_>, _>>()?;
        for (j, s) in surfaces.iter().enumerate() {
            self.surface(&format!("scheduled_s{}.csv", j + 1), s.rows())?;
        }
        let most = schedules.iter().map(Vec::len).max().unwrap_or(0);
        let levels = solve_recursive(most, self.params, self.grid, &self.cfg.solver)?;
        let mut rows = Vec::new();
        for (j, (times, s)) in schedules.iter().zip(&surfaces).enumerate() {
            for (i, &y) in self.grid.ys().iter().enumerate() {
                let fixed = s.get(0, i);
                let optimal = levels[times.len()].surface.get(0, i);
                rows.push(vec![
                    (j + 1).to_string(),
                    times.len().to_string(),
                    fmt_num(y),
                    fmt_num(fixed),
                    fmt_num(optimal),
                    fmt_num(optimal - fixed),
                ]);
            }
        }
        self.table(
            "scheduled_comparison.csv",
            &["schedule", "count", "y", "scheduled", "optimal", "gap"],
            &rows,
        )
    }

    fn simulate(&self) -> Result<(), RunError> {
        let e = &self.cfg.experiment;
        let (levels, schemes) = self.solve_levels(e.n)?;
        let policy = GridPolicy::new(&levels, &schemes, self.params, self.grid)?;
        let res = simulate_value(
            &policy,
            &SimConfig::new(e.n_paths, e.seed, e.y0),
            self.params,
            self.grid,
        )?;
        let pde = interp_uniform(levels[e.n].surface.slice(0), self.grid.h(), e.y0);
        self.table(
            "simulation.csv",
            &[
                "y0",
                "n",
                "n_paths",
                "seed",
                "estimate",
                "standard_error",
                "pde_value",
                "bonuses_paid",
                "max_bonuses_per_path",
                "absorbed_paths",
            ],
            &[vec![
                fmt_num(e.y0),
                e.n.to_string(),
                res.n_paths.to_string(),
                e.seed.to_string(),
                fmt_num(res.estimate),
                fmt_num(res.standard_error),
                fmt_num(pde),
                res.bonuses_paid.to_string(),
                res.max_bonuses_per_path.to_string(),
                res.absorbed_paths.to_string(),
            ]],
        )?;
        self.table(
            "bonus_times.csv",
            &["lo", "hi", "count"],
            &histogram_rows(&res.bonus_times),
        )?;
        self.table(
            "bonus_sizes.csv",
            &["lo", "hi", "count"],
            &histogram_rows(&res.bonus_sizes),
        )
    }

    fn diagnostics(&self) -> Result<(), RunError> {
        let (levels, schemes) = self.solve_levels(self.cfg.experiment.n)?;
        let d = Diagnostics::compute(&levels, &schemes, self.grid);
        let mut rows = vec![
            metric("max_convexity", fmt_num(d.max_convexity)),
            metric("max_abs_value", fmt_num(d.max_abs_value)),
            metric("max_obstacle_residual", fmt_num(d.max_obstacle_residual)),
            metric("monotonicity_violations", d.monotonicity_violations.to_string()),
            metric("no_firing_violations", d.no_firing_violations.to_string()),
            metric("max_eta_excess", fmt_num(d.max_eta_excess)),
            metric("eta_monotonicity_flips", d.eta_monotonicity_flips.to_string()),
            metric("dominance_violations", d.dominance_violations.to_string()),
            metric(
                "max_policy_rounds",
                levels
                    .iter()
                    .map(|l| l.max_policy_rounds)
                    .max()
                    .unwrap_or(0)
                    .to_string(),
            ),
            metric(
                "convexity_clamps",
                levels.iter().map(|l| l.convexity_clamps).sum::<usize>().to_string(),
            ),
        ];
        for (k, (&hello, min_y)) in d.golden_hello.iter().zip(&d.golden_hello_min_y).enumerate() {
            let level = k + 1;
            rows.push(metric(&format!("golden_hello_n{level}"), u8::from(hello).to_string()));
            rows.push(metric(
                &format!("golden_hello_min_y_n{level}"),
                min_y.map_or_else(|| "nan".to_string(), fmt_num),
            ));
        }
        self.table("diagnostics.csv", &["metric", "value"], &rows)
    }
}

fn metric(name: &str, value: String) -> Vec<String> {
    vec![name.to_string(), value]
}

fn histogram_rows(h: &Histogram) -> Vec<Vec<String>> {
    let bins = h.counts.len();
    let width = (h.hi - h.lo) / bins as f64;
    h.counts
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            vec![
                fmt_num(h.lo + width * j as f64),
                fmt_num(h.lo + width * (j + 1) as f64),
                c.to_string(),
            ]
        })
        .collect()
}
