//! Monte Carlo replay of a feedback contract on the continuation-utility
//! dynamics `dY = r (Y + h(a)) dt + r Z sigma dB`, with bonus jumps and
//! absorption at `Y = 0`.

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hjb::LevelSolution;
use crate::model::ModelParams;
use crate::scheme::BonusScheme;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    /// Euler step; `None` uses the grid time step.
    pub dt_sim: Option<f64>,
    pub seed: u64,
    pub y0: f64,
}

impl SimConfig {
    pub fn new(n_paths: usize, seed: u64, y0: f64) -> Self {
        Self {
            n_paths,
            dt_sim: None,
            seed,
            y0,
        }
    }
}

/// Control and bonus decision at one `(level, t, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub z: f64,
    pub a: f64,
    pub pay_now: bool,
    pub eta: f64,
}

impl Decision {
    pub const IDLE: Decision = Decision {
        z: 0.0,
        a: 0.0,
        pay_now: false,
        eta: 0.0,
    };
}

/// Feedback contract driving the simulation.
pub trait FeedbackPolicy: Sync {
    /// Number of bonus rights at the start of the contract.
    fn initial_level(&self) -> usize;
    fn decide(&self, level: usize, t: f64, y: f64) -> Decision;
}

/// Constant effort incentive and no bonuses.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPolicy {
    pub z: f64,
    pub a: f64,
}

impl FeedbackPolicy for ConstantPolicy {
    fn initial_level(&self) -> usize {
        0
    }

    fn decide(&self, _level: usize, _t: f64, y: f64) -> Decision {
        if y <= 0.0 {
            return Decision::IDLE;
        }
        Decision {
            z: self.z,
            a: self.a,
            pay_now: false,
            eta: 0.0,
        }
    }
}

/// Policy read off solved level surfaces.
pub struct GridPolicy<'a> {
    levels: &'a [LevelSolution],
    schemes: &'a [BonusScheme],
    params: &'a ModelParams,
    grid: &'a Grid,
}

impl<'a> GridPolicy<'a> {
    /// `schemes[j]` must describe level `j + 1`.
    pub fn new(
        levels: &'a [LevelSolution],
        schemes: &'a [BonusScheme],
        params: &'a ModelParams,
        grid: &'a Grid,
    ) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidParams("at least one solved level is required".into()));
        }
        if schemes.len() + 1 < levels.len() || schemes.iter().enumerate().any(|(j, s)| s.level != j + 1) {
            return Err(Error::InvalidParams("schemes must cover levels 1..=N in order".into()));
        }
        Ok(Self {
            levels,
            schemes,
            params,
            grid,
        })
    }

    /// Interpolated policy of `level` at `(t, y)`.
    ///
    /// `z` and `eta` are bilinear in `(t, y)`; the bonus fires when the nearest
    /// node lies in the region. States above `y_max` are clamped.
    pub fn lookup(&self, level: usize, t: f64, y: f64) -> Decision {
        if y <= 0.0 {
            return Decision::IDLE;
        }
        let g = self.grid;
        let y = if y > g.y_max() {
            debug!("state {y} above y_max {} clamped", g.y_max());
            g.y_max()
        } else {
            y
        };
        let t = t.clamp(0.0, g.horizon());
        let (m0, wt) = cell(t, g.dt(), g.steps());
        let (i0, wy) = cell(y, g.h(), g.intervals());
        let z_field = &self.levels[level].policy.z_star;
        let z = bilinear(z_field, m0, i0, wt, wy);
        let (pay_now, eta) = match level.checked_sub(1).and_then(|j| self.schemes.get(j)) {
            Some(s) => {
                let mn = m0 + usize::from(wt >= 0.5);
                let in_ = i0 + usize::from(wy >= 0.5);
                (s.region[mn][in_], bilinear(&s.eta, m0, i0, wt, wy))
            }
            None => (false, 0.0),
        };
        Decision {
            z,
            a: self.params.best_response(z),
            pay_now,
            eta,
        }
    }
}

impl FeedbackPolicy for GridPolicy<'_> {
    fn initial_level(&self) -> usize {
        self.levels.len() - 1
    }

    fn decide(&self, level: usize, t: f64, y: f64) -> Decision {
        self.lookup(level, t, y)
    }
}

fn cell(x: f64, step: f64, last: usize) -> (usize, f64) {
    let s = x / step;
    let j = (s.floor() as usize).min(last - 1);
    (j, (s - j as f64).clamp(0.0, 1.0))
}

fn bilinear(field: &[Vec<f64>], m: usize, i: usize, wt: f64, wy: f64) -> f64 {
    let lo = field[m][i] * (1.0 - wy) + field[m][i + 1] * wy;
    let hi = field[m + 1][i] * (1.0 - wy) + field[m + 1][i + 1] * wy;
    lo * (1.0 - wt) + hi * wt
}

/// Equal-width histogram on `[lo, hi]`; values outside land in the end bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        Self {
            lo,
            hi,
            counts: vec![0; bins],
        }
    }

    pub fn add(&mut self, x: f64) {
        let bins = self.counts.len();
        let pos = ((x - self.lo) / (self.hi - self.lo) * bins as f64).floor();
        let idx = (pos.max(0.0) as usize).min(bins - 1);
        self.counts[idx] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub estimate: f64,
    pub standard_error: f64,
    pub n_paths: usize,
    pub bonus_times: Histogram,
    pub bonus_sizes: Histogram,
    pub bonuses_paid: u64,
    pub max_bonuses_per_path: usize,
    pub absorbed_paths: u64,
}

#[derive(Debug, Default)]
struct PathOutcome {
    payoff: f64,
    bonuses: Vec<(f64, f64)>,
    absorbed: bool,
}

const HISTOGRAM_BINS: usize = 20;

/// Simulates `policy` from `y0` and returns the mean discounted principal payoff.
///
/// Bonuses are paid at Euler times; rights still held at `T` are valued by the
/// terminal function of the remaining level.
pub fn simulate_value<P: FeedbackPolicy>(
    policy: &P,
    cfg: &SimConfig,
    params: &ModelParams,
    grid: &Grid,
) -> Result<SimResult> {
    if cfg.n_paths == 0 {
        return Err(Error::InvalidParams("n_paths must be at least 1".into()));
    }
    if !(cfg.y0 >= 0.0 && cfg.y0 <= grid.y_max()) {
        return Err(Error::Domain(format!("y0 = {} outside [0, {}]", cfg.y0, grid.y_max())));
    }
    let horizon = params.horizon();
    let dt_req = cfg.dt_sim.unwrap_or(grid.dt());
    if !(dt_req > 0.0 && dt_req <= horizon) {
        return Err(Error::InvalidParams(format!("dt_sim = {dt_req} outside (0, T]")));
    }
    let steps = (horizon / dt_req - 1e-9).ceil().max(1.0) as usize;
    let dt = horizon / steps as f64;

    let outcomes: Vec<PathOutcome> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path| simulate_path(policy, cfg, path as u64, steps, dt, params))
        .collect();

    let n = outcomes.len() as f64;
    let mean = outcomes.iter().map(|o| o.payoff).sum::<f64>() / n;
    let var = if outcomes.len() > 1 {
        outcomes.iter().map(|o| (o.payoff - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let mut bonus_times = Histogram::new(0.0, horizon, HISTOGRAM_BINS);
    let mut bonus_sizes = Histogram::new(0.0, grid.y_max(), HISTOGRAM_BINS);
    let mut max_bonuses_per_path = 0;
    for o in &outcomes {
        max_bonuses_per_path = max_bonuses_per_path.max(o.bonuses.len());
        for &(t, eta) in &o.bonuses {
            bonus_times.add(t);
            bonus_sizes.add(eta);
        }
    }
    Ok(SimResult {
        estimate: mean,
        standard_error: (var / n).sqrt(),
        n_paths: cfg.n_paths,
        bonuses_paid: bonus_times.total(),
        bonus_times,
        bonus_sizes,
        max_bonuses_per_path,
        absorbed_paths: outcomes.iter().filter(|o| o.absorbed).count() as u64,
    })
}

fn simulate_path<P: FeedbackPolicy>(
    policy: &P,
    cfg: &SimConfig,
    path: u64,
    steps: usize,
    dt: f64,
    params: &ModelParams,
) -> PathOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(path);
    let (r, rho, sigma, gamma) = (params.r(), params.rho(), params.sigma(), params.gamma());
    let bonus_cost = 1.0 + params.k();
    let sqrt_dt = dt.sqrt();
    let mut out = PathOutcome::default();
    let mut y = cfg.y0;
    let mut level = policy.initial_level();
    for step in 0..steps {
        if y <= 0.0 {
            out.absorbed = true;
            return out;
        }
        let t = step as f64 * dt;
        let discount = (-rho * t).exp();
        let mut dec = policy.decide(level, t, y);
        if level > 0 && dec.pay_now && dec.eta > 0.0 {
            let eta = dec.eta.min(y * (1.0 - 1e-12));
            out.payoff -= discount * bonus_cost * eta.powf(gamma);
            out.bonuses.push((t, eta));
            y -= eta;
            level -= 1;
            dec = policy.decide(level, t, y);
        }
        out.payoff += dec.a * (discount - (-rho * (t + dt)).exp());
        let xi: f64 = StandardNormal.sample(&mut rng);
        y += r * (y + params.h(dec.a)) * dt + r * dec.z * sigma * sqrt_dt * xi;
        if y < 0.0 {
            y = 0.0;
        }
    }
    if y <= 0.0 {
        out.absorbed = true;
        return out;
    }
    out.payoff += (-rho * params.horizon()).exp() * params.terminal_g(level, y);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_zero_effort_growth() {
        let p = ModelParams::new(crate::model::ModelSpec {
            sigma: 1e-300,
            ..Default::default()
        })
        .unwrap();
        let g = Grid::new(2.0, 40, 100, 2.0).unwrap();
        let cfg = SimConfig {
            dt_sim: Some(1e-5),
            ..SimConfig::new(1, 7, 1.0)
        };
        let res = simulate_value(&ConstantPolicy { z: 0.0, a: 0.0 }, &cfg, &p, &g).unwrap();
        assert!(
            (res.estimate + (0.1f64).exp()).abs() < 1e-5,
            "estimate {}",
            res.estimate
        );
        assert_eq!(res.standard_error, 0.0);
    }

    #[test]
    fn seeds_control_reproducibility() {
        let p = ModelParams::with_delta(0.4).unwrap();
        let g = Grid::new(2.0, 40, 100, 2.0).unwrap();
        let pol = ConstantPolicy { z: 3.0, a: 2.0 };
        let a = simulate_value(&pol, &SimConfig::new(1, 1, 1.0), &p, &g).unwrap();
        let b = simulate_value(&pol, &SimConfig::new(1, 1, 1.0), &p, &g).unwrap();
        let c = simulate_value(&pol, &SimConfig::new(1, 2, 1.0), &p, &g).unwrap();
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_ne!(a.estimate, c.estimate);
    }

    #[test]
    fn invalid_inputs_rejected() {
        let p = ModelParams::with_delta(0.4).unwrap();
        let g = Grid::new(2.0, 40, 100, 2.0).unwrap();
        let pol = ConstantPolicy { z: 0.0, a: 0.0 };
        assert!(matches!(
            simulate_value(&pol, &SimConfig::new(10, 1, 2.5), &p, &g),
            Err(Error::Domain(_))
        ));
        assert!(simulate_value(&pol, &SimConfig::new(0, 1, 1.0), &p, &g).is_err());
    }

    #[test]
    fn zero_start_is_absorbed() {
        let p = ModelParams::with_delta(0.4).unwrap();
        let g = Grid::new(2.0, 40, 100, 2.0).unwrap();
        let res = simulate_value(&ConstantPolicy { z: 3.0, a: 2.0 }, &SimConfig::new(5, 1, 0.0), &p, &g).unwrap();
        assert_eq!(res.estimate, 0.0);
        assert_eq!(res.absorbed_paths, 5);
    }

    #[test]
    fn bilinear_identities() {
        let field = vec![vec![0.0, 1.0], vec![2.0, 3.0]];
        assert_eq!(bilinear(&field, 0, 0, 0.0, 0.0), 0.0);
        assert_eq!(bilinear(&field, 0, 0, 1.0, 1.0), 3.0);
        assert_eq!(bilinear(&field, 0, 0, 0.5, 0.5), 1.5);
    }

    #[test]
    fn histogram_bins() {
        let mut h = Histogram::new(0.0, 2.0, 4);
        for x in [0.0, 0.49, 0.5, 1.99, 2.0, 5.0, -1.0] {
            h.add(x);
        }
        assert_eq!(h.counts, vec![3, 1, 0, 3]);
    }
}
