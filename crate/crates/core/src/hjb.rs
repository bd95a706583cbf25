//! Penalized implicit finite-difference solver for the recursive system of
//! HJB variational inequalities.
//!
//! Level `n` (bonus rights remaining) solves, backward from `g^n` at `T`,
//!
//! ```text
//! -v_t + rho v - r y v_y - sup_z { r h(a(z)) v_y + rho a(z) + 1/2 r^2 sigma^2 z^2 v_yy }
//!      - (1/eps) (M v^{n-1} - v)^+ = 0,         v(t, 0) = 0,
//! ```
//!
//! where `M` is the intervention operator against the converged level
//! `n - 1`. Each time step is an implicit Euler step solved by policy
//! iteration: the control is improved pointwise, then the frozen-policy
//! tridiagonal system (with the penalty active set on its diagonal) is solved
//! directly.

use log::warn;

use crate::error::{Error, Result};
use crate::grid::{Grid, Stencil};
use crate::model::ModelParams;
use crate::numeric::{golden_section_max, interp_cubic_uniform};

/// Second differences above this are treated as a solver defect.
pub const CONCAVITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub eps: f64,
    pub max_policy_iters: usize,
    pub policy_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            max_policy_iters: 50,
            policy_tol: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn with_eps(eps: f64) -> Self {
        Self { eps, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParams(format!("eps must be positive, got {}", self.eps)));
        }
        if self.max_policy_iters == 0 {
            return Err(Error::InvalidParams("max_policy_iters must be positive".into()));
        }
        if !(self.policy_tol > 0.0) {
            return Err(Error::InvalidParams("policy_tol must be positive".into()));
        }
        Ok(())
    }
}

/// One value function `V^{p,n}` on the grid, indexed `[m][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface {
    pub level: usize,
    data: Vec<Vec<f64>>,
}

impl ValueSurface {
    pub fn new(level: usize, data: Vec<Vec<f64>>) -> Self {
        Self { level, data }
    }

    pub fn get(&self, m: usize, i: usize) -> f64 {
        self.data[m][i]
    }

    pub fn slice(&self, m: usize) -> &[f64] {
        &self.data[m]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }
}

/// Optimal controls recorded at every node, indexed `[m][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyField {
    pub z_star: Vec<Vec<f64>>,
    pub a_star: Vec<Vec<f64>>,
    pub active_penalty: Vec<Vec<bool>>,
}

impl PolicyField {
    fn with_shape(rows: usize, cols: usize) -> Self {
        Self {
            z_star: vec![vec![0.0; cols]; rows],
            a_star: vec![vec![0.0; cols]; rows],
            active_penalty: vec![vec![false; cols]; rows],
        }
    }
}

/// Converged level together with the obstacle it was penalized against.
#[derive(Debug, Clone)]
pub struct LevelSolution {
    pub surface: ValueSurface,
    pub policy: PolicyField,
    /// `M V^{n-1}` on the grid; `None` for level 0.
    pub obstacle: Option<ValueSurface>,
    pub max_policy_rounds: usize,
    /// Rows of the assembled systems that were not diagonally dominant.
    pub dominance_violations: usize,
    /// Converged nodes where a positive second difference was clamped.
    pub convexity_clamps: usize,
    pub max_clamped_q: f64,
}

/// Outcome of the pointwise maximization in the Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZChoice {
    pub z: f64,
    pub a: f64,
    pub value: f64,
}

/// Maximizes `r h(a(z)) p + rho a(z) + 1/2 q r^2 sigma^2 z^2` over
/// `z in {0} U [h'(0), h'(a_bar)]`.
///
/// `p` and `q` are the first and second derivatives of the value in `y`.
/// Larger `z` is dominated once effort saturates, and the interval below
/// `h'(0)` induces no effort, so the zero corner covers it.
pub fn optimize_z(p: f64, q: f64, params: &ModelParams) -> Result<ZChoice> {
    if q > CONCAVITY_TOL {
        return Err(Error::ConcavityViolation { q });
    }
    let q = q.min(0.0);
    let (r, rho, sigma) = (params.r(), params.rho(), params.sigma());
    let diffusion = 0.5 * q * r * r * sigma * sigma;
    let objective = |z: f64| {
        let a = params.best_response(z);
        r * params.h(a) * p + rho * a + diffusion * z * z
    };
    let z_lo = params.beta();
    let z_hi = params.h_prime(params.a_bar());
    let (z, value) = golden_section_max(objective, z_lo, z_hi, 1e-12);
    if value > 0.0 {
        Ok(ZChoice {
            z,
            a: params.best_response(z),
            value,
        })
    } else {
        Ok(ZChoice {
            z: 0.0,
            a: 0.0,
            value: 0.0,
        })
    }
}

/// Best bonus at node `i`: `max_{0 <= eta <= y_i} V(y_i - eta) - (1 + k) eta^gamma`.
///
/// Returns `(value, eta)` with ties resolved to the smallest `eta`. The grid
/// argmax is refined by golden-section search over one cell on either side,
/// with `V` interpolated by four-point cubics.
pub fn intervention_at(slice: &[f64], i: usize, params: &ModelParams, h: f64) -> (f64, f64) {
    let y = i as f64 * h;
    let (gamma, cost) = (params.gamma(), 1.0 + params.k());
    let mut best_j = i;
    let mut best = slice[i];
    for j in (0..i).rev() {
        let eta = (i - j) as f64 * h;
        let v = slice[j] - cost * eta.powf(gamma);
        if v > best {
            best = v;
            best_j = j;
        }
    }
    if i == 0 {
        return (slice[0], 0.0);
    }
    let eta_grid = (i - best_j) as f64 * h;
    let lo = (eta_grid - h).max(0.0);
    let hi = (eta_grid + h).min(y);
    let objective = |eta: f64| interp_cubic_uniform(slice, h, y - eta) - cost * eta.powf(gamma);
    let (eta_ref, v_ref) = golden_section_max(objective, lo, hi, 1e-13 * (1.0 + y));
    if v_ref > best + 1e-15 * (1.0 + best.abs()) {
        (v_ref, eta_ref)
    } else {
        (best, eta_grid)
    }
}

/// Discrete intervention operator `M V(y) = sup_{0 <= eta <= y} V(y - eta) - (1 + k) eta^gamma`.
pub fn intervention_m(slice: &[f64], params: &ModelParams, grid: &Grid) -> Vec<f64> {
    (0..slice.len())
        .map(|i| intervention_at(slice, i, params, grid.h()).0)
        .collect()
}

/// Result of one implicit time step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub values: Vec<f64>,
    pub z: Vec<f64>,
    pub a: Vec<f64>,
    pub active: Vec<bool>,
    pub rounds: usize,
    pub dominance_violations: usize,
    /// Nodes of the final round whose second difference exceeded the
    /// concavity tolerance and was clamped to 0 before optimizing.
    pub convexity_clamps: usize,
    pub max_clamped_q: f64,
}

/// Solves the penalized implicit equation at one time level by policy iteration.
///
/// `right_boundary` is the Dirichlet value at `y_max`; `y = 0` is pinned to 0.
/// `time_index` only labels errors. Positive second differences of the
/// current iterate are clamped to 0 and counted.
pub fn step_backward(
    u_next: &[f64],
    obstacle: Option<&[f64]>,
    right_boundary: f64,
    time_index: usize,
    params: &ModelParams,
    grid: &Grid,
    cfg: &SolverConfig,
) -> Result<StepOutcome> {
    let last = grid.intervals();
    assert_eq!(u_next.len(), last + 1, "slice length must be I + 1");
    if let Some(o) = obstacle {
        assert_eq!(o.len(), last + 1, "obstacle length must be I + 1");
    }
    let (h, dt) = (grid.h(), grid.dt());
    let (r, rho, sigma) = (params.r(), params.rho(), params.sigma());
    let inv_eps = 1.0 / cfg.eps;

    let mut u = u_next.to_vec();
    u[0] = 0.0;
    u[last] = right_boundary;

    let mut z = vec![0.0; last + 1];
    let mut a = vec![0.0; last + 1];
    let mut active = vec![false; last + 1];
    let mut lower = vec![0.0; last + 1];
    let mut diag = vec![1.0; last + 1];
    let mut upper = vec![0.0; last + 1];
    let mut rhs = vec![0.0; last + 1];
    rhs[last] = right_boundary;

    let mut change = f64::INFINITY;
    for round in 1..=cfg.max_policy_iters {
        let mut violations = 0;
        let mut clamps = 0;
        let mut max_q = 0.0f64;
        for i in 1..last {
            let st = Stencil::at(&u, i, h);
            let q = st.second_derivative(h);
            if q > CONCAVITY_TOL {
                clamps += 1;
                max_q = max_q.max(q);
            }
            let choice = optimize_z(st.central_first, q.min(0.0), params)?;
            z[i] = choice.z;
            a[i] = choice.a;
            active[i] = obstacle.is_some_and(|o| o[i] - u[i] > 0.0);

            let drift = r * (grid.y(i) + params.h(choice.a));
            let diffusion = 0.5 * r * r * sigma * sigma * choice.z * choice.z / (h * h);
            let penalty = if active[i] { inv_eps } else { 0.0 };
            lower[i] = -(diffusion - drift / (2.0 * h));
            upper[i] = -(diffusion + drift / (2.0 * h));
            diag[i] = 1.0 / dt + rho + 2.0 * diffusion + penalty;
            rhs[i] = u_next[i] / dt + rho * choice.a + obstacle.map_or(0.0, |o| penalty * o[i]);
            if diag[i].abs() < lower[i].abs() + upper[i].abs() {
                violations += 1;
            }
        }
        let next = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
        change = next.iter().zip(&u).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
        u = next;
        if change <= cfg.policy_tol {
            return Ok(StepOutcome {
                values: u,
                z,
                a,
                active,
                rounds: round,
                dominance_violations: violations,
                convexity_clamps: clamps,
                max_clamped_q: max_q,
            });
        }
    }
    Err(Error::NonConvergence {
        time_index,
        rounds: cfg.max_policy_iters,
        residual: change,
    })
}

/// Thomas algorithm; `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot.abs() < 1e-300 {
        return Err(Error::Singular { row: 0 });
    }
    c[0] = upper[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * c[i - 1];
        if pivot.abs() < 1e-300 || !pivot.is_finite() {
            return Err(Error::Singular { row: i });
        }
        c[i] = if i + 1 < n { upper[i] / pivot } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Backward march shared by the level, free and scheduled solves.
struct March<'a> {
    params: &'a ModelParams,
    grid: &'a Grid,
    cfg: &'a SolverConfig,
}

struct MarchOutput {
    rows: Vec<Vec<f64>>,
    policy: PolicyField,
    max_rounds: usize,
    violations: usize,
    clamps: usize,
    max_clamped_q: f64,
}

impl March<'_> {
    fn run<B, O>(&self, terminal: Vec<f64>, boundary: B, obstacle: O, jumps: &[usize]) -> Result<MarchOutput>
    where
        B: Fn(usize) -> f64,
        O: Fn(usize) -> Option<Vec<f64>>,
    {
        let steps = self.grid.steps();
        let cols = self.grid.intervals() + 1;
        let mut rows = vec![Vec::new(); steps + 1];
        let mut policy = PolicyField::with_shape(steps + 1, cols);
        rows[steps] = terminal;
        let mut max_rounds = 0;
        let mut violations = 0;
        let mut clamps = 0;
        let mut max_clamped_q = 0.0f64;
        for m in (0..steps).rev() {
            let obstacle_row = obstacle(m);
            let out = step_backward(
                &rows[m + 1],
                obstacle_row.as_deref(),
                boundary(m),
                m,
                self.params,
                self.grid,
                self.cfg,
            )?;
            max_rounds = max_rounds.max(out.rounds);
            violations += out.dominance_violations;
            clamps += out.convexity_clamps;
            max_clamped_q = max_clamped_q.max(out.max_clamped_q);
            policy.z_star[m] = out.z;
            policy.a_star[m] = out.a;
            policy.active_penalty[m] = out.active;
            let mut values = out.values;
            for _ in jumps.iter().filter(|&&j| j == m) {
                values = intervention_m(&values, self.params, self.grid);
            }
            rows[m] = values;
        }
        // no control acts at T itself; carry the last step's policy so lookups near T stay continuous
        if steps > 0 {
            policy.z_star[steps] = policy.z_star[steps - 1].clone();
            policy.a_star[steps] = policy.a_star[steps - 1].clone();
        }
        if violations > 0 {
            warn!("{violations} assembled rows were not diagonally dominant");
        }
        Ok(MarchOutput {
            rows,
            policy,
            max_rounds,
            violations,
            clamps,
            max_clamped_q,
        })
    }
}

/// Solves level `n` against the converged level `n - 1` (`prev`, absent for `n = 0`).
///
/// The value at `y_max` is the analytic lower bound, raised to the obstacle
/// where the obstacle is higher.
pub fn solve_level(
    n: usize,
    prev: Option<&ValueSurface>,
    params: &ModelParams,
    grid: &Grid,
    cfg: &SolverConfig,
) -> Result<LevelSolution> {
    cfg.validate()?;
    if n > 0 && prev.is_none() {
        return Err(Error::InvalidParams(format!(
            "level {n} needs the level {} surface",
            n - 1
        )));
    }
    let prev = if n == 0 { None } else { prev };
    let obstacle = prev.map(|p| {
        ValueSurface::new(
            n,
            p.rows().iter().map(|row| intervention_m(row, params, grid)).collect(),
        )
    });
    let terminal: Vec<f64> = grid.ys().iter().map(|&y| params.terminal_g(n, y)).collect();
    let y_max = grid.y_max();
    let march = March { params, grid, cfg };
    let last = grid.intervals();
    let out = march.run(
        terminal,
        |m| {
            let lower = params.lower_bound(n, grid.t(m), y_max);
            obstacle.as_ref().map_or(lower, |o| lower.max(o.get(m, last)))
        },
        |m| obstacle.as_ref().map(|o| o.slice(m).to_vec()),
        &[],
    )?;
    Ok(LevelSolution {
        surface: ValueSurface::new(n, out.rows),
        policy: out.policy,
        obstacle,
        max_policy_rounds: out.max_rounds,
        dominance_violations: out.violations,
        convexity_clamps: out.clamps,
        max_clamped_q: out.max_clamped_q,
    })
}

/// Solves levels `0..=n_max`, each penalized against the previous one.
pub fn solve_recursive(
    n_max: usize,
    params: &ModelParams,
    grid: &Grid,
    cfg: &SolverConfig,
) -> Result<Vec<LevelSolution>> {
    let mut levels: Vec<LevelSolution> = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let prev = levels.last().map(|l| &l.surface);
        let sol = solve_level(n, prev, params, grid, cfg)?;
        levels.push(sol);
    }
    Ok(levels)
}

/// Level-0 dynamics with terminal data `g^j` and no obstacle.
pub fn solve_free(
    terminal_level: usize,
    params: &ModelParams,
    grid: &Grid,
    cfg: &SolverConfig,
) -> Result<ValueSurface> {
    cfg.validate()?;
    let terminal: Vec<f64> = grid
        .ys()
        .iter()
        .map(|&y| params.terminal_g(terminal_level, y))
        .collect();
    let coef = params.terminal_coefficient(terminal_level);
    let (d, horizon, y_max) = (params.d(), params.horizon(), grid.y_max());
    let march = March { params, grid, cfg };
    let out = march.run(
        terminal,
        |m| -coef * (d * (grid.t(m) - horizon)).exp() * y_max.powf(params.gamma()),
        |_| None,
        &[],
    )?;
    Ok(ValueSurface::new(0, out.rows))
}

/// Coefficient `c(t)` such that `-c(t) y^gamma` is the value of zero effort with
/// bonuses forced at the scheduled indices and split optimally.
fn scheduled_zero_effort_coefficients(jumps: &[usize], params: &ModelParams, grid: &Grid) -> Vec<f64> {
    let steps = grid.steps();
    let g = params.gamma();
    let bonus_weight = (1.0 + params.k()).powf(-1.0 / (g - 1.0));
    let mut coef = vec![0.0; steps + 1];
    coef[steps] = 1.0;
    for m in (0..steps).rev() {
        let mut c = coef[m + 1] * (-params.d() * grid.dt()).exp();
        for _ in jumps.iter().filter(|&&j| j == m) {
            c = (bonus_weight + c.powf(-1.0 / (g - 1.0))).powf(-(g - 1.0));
        }
        coef[m] = c;
    }
    coef
}

/// Level-0 equation with a mandatory intervention at each scheduled time.
///
/// Times snap to the nearest grid time (at most `T - dt`); the slice at that
/// time is replaced by `M` of itself before marching on.
pub fn solve_scheduled(times: &[f64], params: &ModelParams, grid: &Grid, cfg: &SolverConfig) -> Result<ValueSurface> {
    cfg.validate()?;
    let horizon = params.horizon();
    for (j, &t) in times.iter().enumerate() {
        if !(t > 0.0 && t < horizon) {
            return Err(Error::Domain(format!("scheduled time {t} outside (0, {horizon})")));
        }
        if j > 0 && t <= times[j - 1] {
            return Err(Error::Domain("scheduled times must be strictly increasing".into()));
        }
    }
    let jumps: Vec<usize> = times
        .iter()
        .map(|&t| grid.nearest_time_index(t).min(grid.steps() - 1))
        .collect();
    let coefs = scheduled_zero_effort_coefficients(&jumps, params, grid);
    let first_jump = jumps.iter().copied().max();
    let terminal: Vec<f64> = grid.ys().iter().map(|&y| params.terminal_g(0, y)).collect();
    let y_max = grid.y_max();
    let boundary = |m: usize| match first_jump {
        Some(j) if m <= j => -coefs[m] * y_max.powf(params.gamma()),
        _ => params.lower_bound(0, grid.t(m), y_max),
    };
    let march = March { params, grid, cfg };
    let out = march.run(terminal, boundary, |_| None, &jumps)?;
    Ok(ValueSurface::new(0, out.rows))
}
