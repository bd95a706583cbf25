//! First-best value bounds by Lagrangian duality.
//!
//! For a multiplier `lambda <= 0` on the participation constraint the
//! principal's problem separates into pointwise conjugate evaluations:
//!
//! ```text
//! lambda u(R) - sum_i e^{-rho tau_i} F^{*,k}(lambda e^{(rho-r) tau_i})
//!             - e^{-rho T} F^{*,0}(lambda e^{(rho-r) T})
//!             + int_0^T rho e^{-rho t} G*(delta lambda e^{(rho-r) t}) dt
//! ```
//!
//! Minimizing over `lambda` with a fixed admissible schedule gives a lower
//! bound; replacing the bonus terms by their best case over all timings gives
//! the upper bound. When `delta gamma = 1` the bonus terms do not depend on
//! timing and both bounds coincide.

use crate::error::{domain, Error, Result};
use crate::model::ModelParams;
use crate::numeric::{adaptive_simpson, golden_section_min};

const QUAD_TOL: f64 = 1e-10;
const LAMBDA_WIDTH: f64 = 1e-10;
const MAX_BRACKET: f64 = 1152921504606846976.0; // 2^60
const REGIME_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `tau_i = (i - 1) zeta`
    FrontLoaded,
    /// `tau_i = T - (N - i + 1) zeta`
    BackLoaded,
}

/// Deterministic bonus dates used to build the constructive lower bound.
#[derive(Debug, Clone, PartialEq)]
pub struct FbSchedule {
    taus: Vec<f64>,
    zeta: f64,
    direction: Direction,
}

impl FbSchedule {
    pub fn new(count: usize, zeta: f64, direction: Direction, horizon: f64) -> Result<Self> {
        if count > 0 && !(zeta > 0.0 && zeta < horizon / count as f64) {
            return Err(domain(format!(
                "zeta must lie in (0, T/N) = (0, {}), got {zeta}",
                horizon / count as f64
            )));
        }
        let taus = (1..=count)
            .map(|i| match direction {
                Direction::FrontLoaded => (i - 1) as f64 * zeta,
                Direction::BackLoaded => horizon - (count - i + 1) as f64 * zeta,
            })
            .collect();
        Ok(Self { taus, zeta, direction })
    }

    pub fn empty() -> Self {
        Self {
            taus: Vec::new(),
            zeta: 0.0,
            direction: Direction::FrontLoaded,
        }
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }
    pub fn zeta(&self) -> f64 {
        self.zeta
    }
    pub fn direction(&self) -> Direction {
        self.direction
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    DeltaGammaAbove1,
    DeltaGammaBelow1,
    DeltaGammaEquals1,
}

impl Regime {
    pub fn of(params: &ModelParams) -> Self {
        let x = params.delta() * params.gamma() - 1.0;
        if x.abs() <= REGIME_TOL {
            Regime::DeltaGammaEquals1
        } else if x > 0.0 {
            Regime::DeltaGammaAbove1
        } else {
            Regime::DeltaGammaBelow1
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Regime::DeltaGammaAbove1 => "deltaGammaAbove1",
            Regime::DeltaGammaBelow1 => "deltaGammaBelow1",
            Regime::DeltaGammaEquals1 => "deltaGammaEquals1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstBestBounds {
    pub lower: f64,
    pub upper: f64,
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    pub regime: Regime,
}

/// `int_0^T rho e^{-rho t} G*(delta lambda e^{(rho - r) t}) dt`.
pub fn effort_integral(lambda: f64, params: &ModelParams) -> f64 {
    let (rho, r, delta) = (params.rho(), params.r(), params.delta());
    let integrand = |t: f64| {
        let p = delta * lambda * ((rho - r) * t).exp();
        let a = params.g_star_argmax(p);
        rho * (-rho * t).exp() * (a + params.h(a) * p)
    };
    adaptive_simpson(integrand, 0.0, params.horizon(), QUAD_TOL)
}

/// `-e^{-rho tau} F^{*,k}(lambda e^{(rho - r) tau})`, the dual value of one bonus paid at `tau`.
pub fn bonus_term(lambda: f64, tau: f64, k_eff: f64, params: &ModelParams) -> f64 {
    let (rho, r) = (params.rho(), params.r());
    -(-rho * tau).exp() * params.f_star(lambda * ((rho - r) * tau).exp(), k_eff)
}

fn terminal_term(lambda: f64, params: &ModelParams) -> f64 {
    bonus_term(lambda, params.horizon(), 0.0, params)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda <= 0.0) {
        return Err(domain(format!("multiplier must be nonpositive, got {lambda}")));
    }
    Ok(())
}

/// Dual objective for a fixed bonus schedule at reservation payment `reservation`.
pub fn fb_inner_objective(lambda: f64, reservation: f64, schedule: &FbSchedule, params: &ModelParams) -> Result<f64> {
    check_lambda(lambda)?;
    if !(reservation >= 0.0) {
        return Err(domain(format!(
            "reservation payment must be nonnegative, got {reservation}"
        )));
    }
    Ok(schedule_objective(
        lambda,
        params.utility(reservation),
        schedule,
        params,
    ))
}

fn schedule_objective(lambda: f64, utility: f64, schedule: &FbSchedule, params: &ModelParams) -> f64 {
    let bonuses: f64 = schedule
        .taus()
        .iter()
        .map(|&tau| bonus_term(lambda, tau, params.k(), params))
        .sum();
    lambda * utility + bonuses + terminal_term(lambda, params) + effort_integral(lambda, params)
}

/// Relaxed dual objective where every bonus is paid at its most favourable date.
fn relaxed_objective(lambda: f64, utility: f64, count: usize, params: &ModelParams) -> f64 {
    let best_tau = match Regime::of(params) {
        Regime::DeltaGammaAbove1 => 0.0,
        Regime::DeltaGammaBelow1 | Regime::DeltaGammaEquals1 => params.horizon(),
    };
    lambda * utility
        + count as f64 * bonus_term(lambda, best_tau, params.k(), params)
        + terminal_term(lambda, params)
        + effort_integral(lambda, params)
}

/// Minimizes a convex function over `(-inf, 0]`.
///
/// The bracket `[-L, 0]` doubles from `L = 1` until the objective stops
/// decreasing toward `-L`, then golden-section search narrows it to width
/// `1e-10`.
pub fn minimize_lambda<F: Fn(f64) -> f64>(objective: F) -> Result<(f64, f64)> {
    let mut span = 1.0;
    loop {
        if objective(-span) >= objective(-0.5 * span) {
            break;
        }
        span *= 2.0;
        if span > MAX_BRACKET {
            return Err(Error::UnboundedBelow { bracket: span });
        }
    }
    let (x, v) = golden_section_min(&objective, -span, 0.0, LAMBDA_WIDTH);
    let at_zero = objective(0.0);
    if at_zero <= v {
        Ok((0.0, at_zero))
    } else {
        Ok((x, v))
    }
}

/// First-best bounds at reservation payment `reservation` with `count` bonuses.
///
/// `zeta` defaults to `T / (2 N)`.
pub fn fb_bounds(reservation: f64, count: usize, zeta: Option<f64>, params: &ModelParams) -> Result<FirstBestBounds> {
    if !(reservation >= 0.0) {
        return Err(domain(format!(
            "reservation payment must be nonnegative, got {reservation}"
        )));
    }
    fb_bounds_at_utility(params.utility(reservation), count, zeta, params)
}

/// Same as [`fb_bounds`] but parameterized by the reservation utility `u(R)`.
pub fn fb_bounds_at_utility(
    utility: f64,
    count: usize,
    zeta: Option<f64>,
    params: &ModelParams,
) -> Result<FirstBestBounds> {
    if !(utility >= 0.0) {
        return Err(domain(format!(
            "reservation utility must be nonnegative, got {utility}"
        )));
    }
    let horizon = params.horizon();
    let zeta = zeta.unwrap_or(if count > 0 { horizon / (2.0 * count as f64) } else { 0.0 });
    let regime = Regime::of(params);
    let direction = match regime {
        Regime::DeltaGammaBelow1 => Direction::BackLoaded,
        _ => Direction::FrontLoaded,
    };
    let schedule = FbSchedule::new(count, zeta, direction, horizon)?;

    let (lambda_upper, upper) = minimize_lambda(|l| relaxed_objective(l, utility, count, params))?;
    if regime == Regime::DeltaGammaEquals1 {
        return Ok(FirstBestBounds {
            lower: upper,
            upper,
            lambda_lower: lambda_upper,
            lambda_upper,
            regime,
        });
    }
    let (lambda_lower, lower) = minimize_lambda(|l| schedule_objective(l, utility, &schedule, params))?;
    Ok(FirstBestBounds {
        lower,
        upper,
        lambda_lower,
        lambda_upper,
        regime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(delta: f64) -> ModelParams {
        ModelParams::with_delta(delta).unwrap()
    }

    const CAP: f64 = 1.573_877_361_149_47; // 4 (1 - e^{-0.5})

    #[test]
    fn schedules() {
        let f = FbSchedule::new(3, 0.5, Direction::FrontLoaded, 2.0).unwrap();
        assert_eq!(f.taus(), &[0.0, 0.5, 1.0]);
        let b = FbSchedule::new(3, 0.5, Direction::BackLoaded, 2.0).unwrap();
        assert_eq!(b.taus(), &[0.5, 1.0, 1.5]);
        assert!(FbSchedule::new(2, 1.0, Direction::BackLoaded, 2.0).is_err());
        assert!(FbSchedule::new(2, 0.0, Direction::BackLoaded, 2.0).is_err());
        assert!(FbSchedule::new(0, 0.0, Direction::BackLoaded, 2.0)
            .unwrap()
            .taus()
            .is_empty());
    }

    #[test]
    fn objective_at_zero_multiplier_is_schedule_free() {
        let p = params(0.4);
        for n in 0..3 {
            let s = FbSchedule::new(n, 0.3, Direction::FrontLoaded, 2.0).unwrap();
            let v = fb_inner_objective(0.0, 0.0, &s, &p).unwrap();
            assert_relative_eq!(v, CAP, epsilon = 1e-9);
        }
        assert!(fb_inner_objective(0.1, 0.0, &FbSchedule::empty(), &p).is_err());
    }

    #[test]
    fn effort_integral_slope_at_zero() {
        // h(a_bar) (1 - e^{-r T}) with r = 0.1, h(4) = 12
        let p = params(0.4);
        let step = 1e-6;
        let centre = -1e-5;
        let slope = (effort_integral(centre + step, &p) - effort_integral(centre - step, &p)) / (2.0 * step);
        assert_relative_eq!(slope, 12.0 * (1.0 - (-0.2f64).exp()), max_relative = 1e-6);
        assert_relative_eq!(12.0 * (1.0 - (-0.2f64).exp()), 2.175_23, epsilon = 1e-5);
    }

    #[test]
    fn quadrature_matches_riemann_sum() {
        let p = params(0.4);
        let n = 1_000_000;
        let dt = p.horizon() / n as f64;
        let riemann: f64 = (0..n)
            .map(|j| {
                let t = (j as f64 + 0.5) * dt;
                let arg = -p.delta() * ((p.rho() - p.r()) * t).exp();
                p.rho() * (-p.rho() * t).exp() * p.conj_g_star(arg).unwrap() * dt
            })
            .sum();
        let expected = riemann + terminal_term(-1.0, &p);
        let v = fb_inner_objective(-1.0, 0.0, &FbSchedule::empty(), &p).unwrap();
        assert!((v - expected).abs() < 1e-6, "{v} vs {expected}");
    }

    #[test]
    fn minimize_quadratics() {
        let (l, v) = minimize_lambda(|l| (l + 1.0) * (l + 1.0)).unwrap();
        assert!((l + 1.0).abs() < 1e-8 && v < 1e-15);
        let (l, v) = minimize_lambda(|l| (l - 1.0) * (l - 1.0)).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(v, 1.0);
        assert!(matches!(minimize_lambda(|l| l), Err(Error::UnboundedBelow { .. })));
    }

    #[test]
    fn minimize_matches_dense_scan_at_unit_delta_gamma() {
        let p = ModelParams::new(crate::model::ModelSpec {
            r: 0.25 / 3.0,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(Regime::of(&p), Regime::DeltaGammaEquals1);
        let f = |l: f64| relaxed_objective(l, 0.0, 2, &p);
        let (_, v) = minimize_lambda(f).unwrap();
        let scan = (0..=100_000)
            .map(|j| f(-20.0 * j as f64 / 100_000.0))
            .fold(f64::INFINITY, f64::min);
        assert!(v > 0.0 && v < CAP);
        assert!(v <= scan + 1e-10 && scan - v < 1e-6, "{v} vs scan {scan}");
    }

    #[test]
    fn unit_delta_gamma_bounds_coincide() {
        let p = ModelParams::new(crate::model::ModelSpec {
            r: 0.25 / 3.0,
            ..Default::default()
        })
        .unwrap();
        for r in [0.0, 0.5, 1.0] {
            let b = fb_bounds(r, 2, None, &p).unwrap();
            assert_eq!(b.regime, Regime::DeltaGammaEquals1);
            assert!(b.upper - b.lower <= 1e-8);
            // any admissible schedule attains the same dual value
            let s = FbSchedule::new(2, 0.3, Direction::FrontLoaded, 2.0).unwrap();
            let (_, v) = minimize_lambda(|l| schedule_objective(l, p.utility(r), &s, &p)).unwrap();
            assert!((v - b.upper).abs() <= 1e-8 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn non_degenerate_at_zero_reservation() {
        for delta in [0.32, 1.0 / 3.0, 0.4, 1.08] {
            let b = fb_bounds(0.0, 2, None, &params(delta)).unwrap();
            assert!(
                b.lower > 0.0 && b.lower <= b.upper + 1e-9 && b.upper < CAP,
                "{delta}: {b:?}"
            );
            assert!(b.lambda_lower <= 0.0 && b.lambda_upper <= 0.0);
        }
    }

    #[test]
    fn regimes_and_structural_order() {
        assert_eq!(Regime::of(&params(0.32)), Regime::DeltaGammaBelow1);
        assert_eq!(Regime::of(&params(0.4)), Regime::DeltaGammaAbove1);
        let b = fb_bounds(0.5, 2, Some(0.3), &params(0.32)).unwrap();
        assert!(b.lower <= b.upper + 1e-9);
        assert!(fb_bounds(0.5, 2, Some(1.5), &params(0.32)).is_err());
    }

    #[test]
    fn upper_nonincreasing_in_reservation() {
        for delta in [0.32, 1.08] {
            let p = params(delta);
            let ups: Vec<f64> = (0..20)
                .map(|j| fb_bounds(j as f64 * 0.1, 2, None, &p).unwrap().upper)
                .collect();
            assert!(ups.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{ups:?}");
        }
    }

    #[test]
    fn lower_nondecreasing_in_count_at_unit_delta_gamma() {
        let p = ModelParams::new(crate::model::ModelSpec {
            r: 0.25 / 3.0,
            ..Default::default()
        })
        .unwrap();
        let lows: Vec<f64> = (0..=4).map(|n| fb_bounds(0.3, n, None, &p).unwrap().lower).collect();
        assert!(lows.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{lows:?}");
    }

    proptest! {
        #[test]
        fn front_loading_dominates_when_agent_impatient(lambda in -20.0f64..-1e-3, zeta in 0.05f64..0.95) {
            let p = params(0.4);
            let front = FbSchedule::new(2, zeta, Direction::FrontLoaded, 2.0).unwrap();
            let back = FbSchedule::new(2, zeta, Direction::BackLoaded, 2.0).unwrap();
            let vf = fb_inner_objective(lambda, 0.2, &front, &p).unwrap();
            let vb = fb_inner_objective(lambda, 0.2, &back, &p).unwrap();
            prop_assert!(vf >= vb - 1e-12);
        }
    }
}
