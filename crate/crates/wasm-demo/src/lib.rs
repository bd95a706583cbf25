//! wasm-bindgen bindings for the browser demo in `www/`.
//!
//! Errors cross the boundary as plain strings.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use contractlab_core::scheme::default_region_tol;
use contractlab_core::{
    fb_bounds, simulate_value, solve_recursive, BonusScheme, Grid, GridPolicy, LevelSolution, ModelParams, SimConfig,
    SolverConfig,
};
use wasm_bindgen::prelude::wasm_bindgen;

const MAX_INTERVALS: usize = 400;
const MAX_STEPS: usize = 2000;
const MAX_PATHS: usize = 200_000;

fn params(delta: f64) -> Result<ModelParams, String> {
    ModelParams::with_delta(delta).map_err(|e| e.to_string())
}

/// First-best bounds against the reservation payment, flattened as
/// `[R, lower, upper]` triples for `points` values of `R` in `[0, r_max]`.
#[wasm_bindgen]
pub fn first_best_curve(delta: f64, rights: usize, r_max: f64, points: usize) -> Result<Vec<f64>, String> {
    let p = params(delta)?;
    if !(r_max >= 0.0) || !(2..=1000).contains(&points) {
        return Err(format!(
            "need r_max >= 0 and 2 <= points <= 1000, got {r_max}, {points}"
        ));
    }
    let mut out = Vec::with_capacity(3 * points);
    for j in 0..points {
        let reservation = r_max * j as f64 / (points - 1) as f64;
        let b = fb_bounds(reservation, rights, None, &p).map_err(|e| e.to_string())?;
        out.extend([reservation, b.lower, b.upper]);
    }
    Ok(out)
}

/// Value surfaces, bonus schemes and intervention regions for `0..=rights`
/// remaining bonuses.
#[wasm_bindgen]
pub struct Solution {
    params: ModelParams,
    grid: Grid,
    levels: Vec<LevelSolution>,
    schemes: Vec<BonusScheme>,
}

#[wasm_bindgen]
impl Solution {
    #[wasm_bindgen(constructor)]
    pub fn new(delta: f64, rights: usize, intervals: usize, steps: usize) -> Result<Solution, String> {
        if intervals > MAX_INTERVALS || steps > MAX_STEPS || rights > 8 {
            return Err(format!(
                "demo limits: intervals <= {MAX_INTERVALS}, steps <= {MAX_STEPS}, rights <= 8"
            ));
        }
        let params = params(delta)?;
        let grid = Grid::new(2.0, intervals, steps, params.horizon()).map_err(|e| e.to_string())?;
        let cfg = SolverConfig::default();
        let levels = solve_recursive(rights, &params, &grid, &cfg).map_err(|e| e.to_string())?;
        let schemes = BonusScheme::from_levels(&levels, &params, &grid, default_region_tol(cfg.eps));
        Ok(Solution {
            params,
            grid,
            levels,
            schemes,
        })
    }

    pub fn rights(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn ys(&self) -> Vec<f64> {
        self.grid.ys().to_vec()
    }

    /// `V^level(t, .)` at the grid time nearest `t`.
    pub fn value_row(&self, level: usize, t: f64) -> Result<Vec<f64>, String> {
        let m = self.time_index(t);
        self.level(level).map(|l| l.surface.slice(m).to_vec())
    }

    /// Bonus sizes at time `t`, zero outside the intervention region.
    pub fn eta_row(&self, level: usize, t: f64) -> Result<Vec<f64>, String> {
        let m = self.time_index(t);
        self.scheme(level).map(|s| s.eta[m].clone())
    }

    /// Intervention region at time `t` as 1/0 flags.
    pub fn region_row(&self, level: usize, t: f64) -> Result<Vec<u8>, String> {
        let m = self.time_index(t);
        self.scheme(level)
            .map(|s| s.region[m].iter().map(|&b| u8::from(b)).collect())
    }

    /// Monte Carlo replay of the solved policy from `y0` with every right
    /// available: `[estimate, standard_error, pde_value, bonuses_per_path]`.
    pub fn simulate(&self, y0: f64, paths: usize, seed: u32) -> Result<Vec<f64>, String> {
        if paths == 0 || paths > MAX_PATHS {
            return Err(format!("paths must lie in 1..={MAX_PATHS}"));
        }
        let policy =
            GridPolicy::new(&self.levels, &self.schemes, &self.params, &self.grid).map_err(|e| e.to_string())?;
        let cfg = SimConfig::new(paths, u64::from(seed), y0);
        let res = simulate_value(&policy, &cfg, &self.params, &self.grid).map_err(|e| e.to_string())?;
        let top = &self.levels[self.rights()];
        let pde = contractlab_core::numeric::interp_uniform(top.surface.slice(0), self.grid.h(), y0);
        Ok(vec![
            res.estimate,
            res.standard_error,
            pde,
            res.bonuses_paid as f64 / paths as f64,
        ])
    }
}

impl Solution {
    fn time_index(&self, t: f64) -> usize {
        self.grid.nearest_time_index(t)
    }

    fn level(&self, level: usize) -> Result<&LevelSolution, String> {
        self.levels
            .get(level)
            .ok_or_else(|| format!("level {level} not solved (max {})", self.rights()))
    }

    fn scheme(&self, level: usize) -> Result<&BonusScheme, String> {
        if level == 0 {
            return Err("level 0 has no bonus scheme".to_string());
        }
        self.schemes
            .get(level - 1)
            .ok_or_else(|| format!("level {level} not solved (max {})", self.rights()))
    }
}
