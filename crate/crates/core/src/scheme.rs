//! Optimal bonus scheme, intervention regions and structural diagnostics
//! extracted from solved level surfaces.

use rayon::prelude::*;

use crate::grid::Grid;
use crate::hjb::{intervention_at, LevelSolution, ValueSurface};
use crate::model::ModelParams;

/// Smallest maximizer `eta` of `V(y_i - eta) - (1 + k) eta^gamma` on the slice.
pub fn extract_eta(prev_slice: &[f64], i: usize, params: &ModelParams, grid: &Grid) -> f64 {
    if i == 0 {
        return 0.0;
    }
    intervention_at(prev_slice, i, params, grid.h()).1
}

/// Derivative-threshold form of the optimal bonus: the smallest grid offset
/// `eta` at which the slope of the slice over `[y_i - eta - h, y_i - eta]` is at
/// least the cost slope `-(1 + k) ((eta + h)^gamma - eta^gamma) / h`.
pub fn eta_by_threshold(prev_slice: &[f64], i: usize, params: &ModelParams, grid: &Grid) -> f64 {
    let h = grid.h();
    let (gamma, cost) = (params.gamma(), 1.0 + params.k());
    for j in (1..=i).rev() {
        let eta = (i - j) as f64 * h;
        let slope = (prev_slice[j] - prev_slice[j - 1]) / h;
        let cost_slope = cost * ((eta + h).powf(gamma) - eta.powf(gamma)) / h;
        if slope >= -cost_slope {
            return eta;
        }
    }
    i as f64 * h
}

/// Default region tolerance: the penalty parameter itself.
///
/// Nodes where the penalty binds sit within about `eps (1 + |V|)` of the
/// obstacle; wider bands admit near-contact continuation nodes.
pub fn default_region_tol(eps: f64) -> f64 {
    eps
}

/// Nodes where `V^n` touches `M V^{n-1}` and the bonus paid exceeds half a cell.
///
/// `eta` is the raw bonus field; the terminal row and `y = 0` are never in the region.
pub fn intervention_region(
    vn: &ValueSurface,
    mv_prev: &ValueSurface,
    eta: &[Vec<f64>],
    grid: &Grid,
    tol: f64,
) -> Vec<Vec<bool>> {
    let steps = grid.steps();
    let half_cell = 0.5 * grid.h();
    (0..=steps)
        .map(|m| {
            (0..=grid.intervals())
                .map(|i| {
                    if m == steps || i == 0 {
                        return false;
                    }
                    let v = vn.get(m, i);
                    (v - mv_prev.get(m, i)).abs() <= tol * (1.0 + v.abs()) && eta[m][i] > half_cell
                })
                .collect()
        })
        .collect()
}

/// Optimal bonus field and intervention region for one level `n >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BonusScheme {
    pub level: usize,
    /// `eta^{n,*}` where the region is active, 0 elsewhere.
    pub eta: Vec<Vec<f64>>,
    pub region: Vec<Vec<bool>>,
}

impl BonusScheme {
    /// Builds the scheme of `level` from the level's solution and the level below it.
    pub fn from_solutions(
        level: &LevelSolution,
        prev: &ValueSurface,
        params: &ModelParams,
        grid: &Grid,
        tol: f64,
    ) -> Self {
        let raw = raw_eta(prev, params, grid);
        let obstacle = level
            .obstacle
            .clone()
            .unwrap_or_else(|| ValueSurface::new(level.surface.level, prev.rows().to_vec()));
        let region = intervention_region(&level.surface, &obstacle, &raw, grid, tol);
        let eta = raw
            .into_iter()
            .zip(&region)
            .map(|(row, mask)| {
                row.into_iter()
                    .zip(mask)
                    .map(|(e, &r)| if r { e } else { 0.0 })
                    .collect()
            })
            .collect();
        Self {
            level: level.surface.level,
            eta,
            region,
        }
    }

    /// Schemes for every level `n >= 1` of a recursive solve, in level order.
    pub fn from_levels(levels: &[LevelSolution], params: &ModelParams, grid: &Grid, tol: f64) -> Vec<Self> {
        levels
            .windows(2)
            .map(|w| Self::from_solutions(&w[1], &w[0].surface, params, grid, tol))
            .collect()
    }

    pub fn region_at(&self, m: usize) -> &[bool] {
        &self.region[m]
    }

    /// Smallest `y` in the region at time index `m`.
    pub fn min_region_y(&self, m: usize, grid: &Grid) -> Option<f64> {
        self.region[m].iter().position(|&r| r).map(|i| grid.y(i))
    }
}

fn raw_eta(prev: &ValueSurface, params: &ModelParams, grid: &Grid) -> Vec<Vec<f64>> {
    prev.rows()
        .par_iter()
        .map(|row| (0..row.len()).map(|i| extract_eta(row, i, params, grid)).collect())
        .collect()
}

/// Machine-checkable summary of the structural properties of a recursive solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// Largest discrete second derivative `(V_{i+1} - 2 V_i + V_{i-1}) / h^2` over all levels.
    pub max_convexity: f64,
    pub max_abs_value: f64,
    /// Largest `M V^{n-1} - V^n` over levels `n >= 1`.
    pub max_obstacle_residual: f64,
    /// Nodes with `V^n < V^{n-1} - 1e-8`.
    pub monotonicity_violations: usize,
    /// Nodes with `eta >= y + h`.
    pub no_firing_violations: usize,
    /// Largest `eta - y` over region nodes.
    pub max_eta_excess: f64,
    /// Sign changes of `eta^{1,*}(t, .)` along `y`, summed over time rows.
    pub eta_monotonicity_flips: usize,
    /// Per scheme, whether the region is nonempty at `t = 0`.
    pub golden_hello: Vec<bool>,
    /// Per scheme, the smallest `y` in the region at `t = 0`.
    pub golden_hello_min_y: Vec<Option<f64>>,
    pub dominance_violations: usize,
}

impl Diagnostics {
    pub fn compute(levels: &[LevelSolution], schemes: &[BonusScheme], grid: &Grid) -> Self {
        let h = grid.h();
        let mut max_convexity = f64::NEG_INFINITY;
        let mut max_abs_value = 0.0f64;
        let mut max_obstacle_residual = f64::NEG_INFINITY;
        let mut monotonicity_violations = 0;
        for (n, level) in levels.iter().enumerate() {
            let rows = level.surface.rows();
            for (m, row) in rows.iter().enumerate() {
                for i in 1..row.len().saturating_sub(1) {
                    let q = (row[i + 1] - 2.0 * row[i] + row[i - 1]) / (h * h);
                    max_convexity = max_convexity.max(q);
                }
                for (i, &v) in row.iter().enumerate() {
                    max_abs_value = max_abs_value.max(v.abs());
                    if let Some(obstacle) = &level.obstacle {
                        max_obstacle_residual = max_obstacle_residual.max(obstacle.get(m, i) - v);
                    }
                    if n > 0 && v < levels[n - 1].surface.get(m, i) - 1e-8 {
                        monotonicity_violations += 1;
                    }
                }
            }
        }
        let mut no_firing_violations = 0;
        let mut max_eta_excess = f64::NEG_INFINITY;
        for scheme in schemes {
            for (row, mask) in scheme.eta.iter().zip(&scheme.region) {
                for (i, (&eta, &inside)) in row.iter().zip(mask).enumerate() {
                    let y = grid.y(i);
                    if eta >= y + h {
                        no_firing_violations += 1;
                    }
                    if inside {
                        max_eta_excess = max_eta_excess.max(eta - y);
                    }
                }
            }
        }
        let eta_monotonicity_flips = schemes.iter().find(|s| s.level == 1).map_or(0, |s| {
            s.eta
                .iter()
                .zip(&s.region)
                .map(|(row, mask)| sign_flips(row, mask))
                .sum()
        });
        Self {
            max_convexity,
            max_abs_value,
            max_obstacle_residual,
            monotonicity_violations,
            no_firing_violations,
            max_eta_excess,
            eta_monotonicity_flips,
            golden_hello: schemes.iter().map(|s| s.region[0].iter().any(|&r| r)).collect(),
            golden_hello_min_y: schemes.iter().map(|s| s.min_region_y(0, grid)).collect(),
            dominance_violations: levels.iter().map(|l| l.dominance_violations).sum(),
        }
    }
}

/// Sign changes between consecutive nonzero increments over region nodes.
fn sign_flips(row: &[f64], mask: &[bool]) -> usize {
    let values: Vec<f64> = row.iter().zip(mask).filter(|(_, &m)| m).map(|(&v, _)| v).collect();
    let mut flips = 0;
    let mut last_sign = 0.0f64;
    for w in values.windows(2) {
        let d = w[1] - w[0];
        if d.abs() <= 1e-12 {
            continue;
        }
        let s = d.signum();
        if last_sign != 0.0 && s != last_sign {
            flips += 1;
        }
        last_sign = s;
    }
    flips
}
