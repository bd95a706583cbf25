//! Economic primitives of the sequential-bonus contracting model.
//!
//! The agent has power utility `u(x) = x^(1/gamma)`, quadratic effort cost
//! `h(a) = c2 a^2 + c1 a` on `A = [0, a_bar]`, and discounts at rate `r`. The
//! principal discounts at `rho` and pays a proportional transaction cost `k`
//! on every bonus. Everything in this module is a closed-form function of
//! [`ModelParams`].

use crate::error::{domain, Error, Result};
use crate::numeric::bisect;

/// Plain description of the model, validated into [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub gamma: f64,
    pub r: f64,
    pub rho: f64,
    pub sigma: f64,
    pub k: f64,
    pub a_bar: f64,
    pub horizon: f64,
    pub cost_c2: f64,
    pub cost_c1: f64,
}

impl Default for ModelSpec {
    /// Baseline calibration: `u(y) = y^(1/3)`, `h(a) = a^2/2 + a`,
    /// `A = [0, 4]`, `k = 0.1`, `sigma = 0.9`, `T = 2`, `rho = 0.25`, `r = 0.1`.
    fn default() -> Self {
        Self {
            gamma: 3.0,
            r: 0.1,
            rho: 0.25,
            sigma: 0.9,
            k: 0.1,
            a_bar: 4.0,
            horizon: 2.0,
            cost_c2: 0.5,
            cost_c1: 1.0,
        }
    }
}

/// Validated model parameters with the derived rates `delta = r / rho` and
/// `d = rho - r * gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    spec: ModelSpec,
    delta: f64,
    d: f64,
}

impl ModelParams {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        let ModelSpec {
            gamma,
            r,
            rho,
            sigma,
            k,
            a_bar,
            horizon,
            cost_c2,
            cost_c1,
        } = spec;
        let all = [gamma, r, rho, sigma, k, a_bar, horizon, cost_c2, cost_c1];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("all parameters must be finite".into()));
        }
        if gamma <= 2.0 {
            return Err(Error::InvalidParams(format!("gamma must exceed 2, got {gamma}")));
        }
        for (name, v) in [
            ("r", r),
            ("rho", rho),
            ("sigma", sigma),
            ("k", k),
            ("a_bar", a_bar),
            ("horizon", horizon),
            ("cost_c2", cost_c2),
            ("cost_c1", cost_c1),
        ] {
            if v <= 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            spec,
            delta: r / rho,
            d: rho - r * gamma,
        })
    }

    /// Default parameters with the agent's rate set to `r = delta * rho`.
    pub fn with_delta(delta: f64) -> Result<Self> {
        let base = ModelSpec::default();
        Self::new(ModelSpec {
            r: delta * base.rho,
            ..base
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }
    pub fn gamma(&self) -> f64 {
        self.spec.gamma
    }
    pub fn r(&self) -> f64 {
        self.spec.r
    }
    pub fn rho(&self) -> f64 {
        self.spec.rho
    }
    pub fn sigma(&self) -> f64 {
        self.spec.sigma
    }
    pub fn k(&self) -> f64 {
        self.spec.k
    }
    pub fn a_bar(&self) -> f64 {
        self.spec.a_bar
    }
    pub fn horizon(&self) -> f64 {
        self.spec.horizon
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn d(&self) -> f64 {
        self.d
    }
    /// `h''(0)`.
    pub fn alpha(&self) -> f64 {
        2.0 * self.spec.cost_c2
    }
    /// `h'(0)`.
    pub fn beta(&self) -> f64 {
        self.spec.cost_c1
    }

    pub fn utility(&self, payment: f64) -> f64 {
        payment.powf(1.0 / self.spec.gamma)
    }

    /// `u^{-1}(y) = y^gamma`.
    pub fn inverse_utility(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(domain(format!("promised utility must be nonnegative, got {y}")));
        }
        Ok(y.powf(self.spec.gamma))
    }

    pub fn cost(&self, a: f64) -> Result<f64> {
        self.check_effort(a)?;
        Ok(self.h(a))
    }

    pub fn cost_prime(&self, a: f64) -> Result<f64> {
        self.check_effort(a)?;
        Ok(self.h_prime(a))
    }

    fn check_effort(&self, a: f64) -> Result<()> {
        if !(0.0..=self.spec.a_bar).contains(&a) {
            return Err(domain(format!("effort {a} outside [0, {}]", self.spec.a_bar)));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn h(&self, a: f64) -> f64 {
        (self.spec.cost_c2 * a + self.spec.cost_c1) * a
    }

    #[inline]
    pub(crate) fn h_prime(&self, a: f64) -> f64 {
        2.0 * self.spec.cost_c2 * a + self.spec.cost_c1
    }

    /// Smallest maximizer of `a -> z a - h(a)` over `[0, a_bar]`.
    #[inline]
    pub fn best_response(&self, z: f64) -> f64 {
        ((z - self.spec.cost_c1) / (2.0 * self.spec.cost_c2)).clamp(0.0, self.spec.a_bar)
    }

    /// `H(y, z) = sup_a r (z a - y - h(a))`.
    pub fn hamiltonian(&self, y: f64, z: f64) -> f64 {
        let a = self.best_response(z);
        self.spec.r * (z * a - y - self.h(a))
    }

    /// Concave conjugate `G*(p) = max_{a in A} (a + h(a) p)` for `p <= 0`.
    pub fn conj_g_star(&self, p: f64) -> Result<f64> {
        if !(p <= 0.0) {
            return Err(domain(format!("G* requires p <= 0, got {p}")));
        }
        let a = self.g_star_argmax(p);
        Ok(a + self.h(a) * p)
    }

    pub(crate) fn g_star_argmax(&self, p: f64) -> f64 {
        if p == 0.0 {
            return self.spec.a_bar;
        }
        // stationary point of a (1 + p c1) + p c2 a^2
        let a = (1.0 + p * self.spec.cost_c1) / (-2.0 * p * self.spec.cost_c2);
        a.clamp(0.0, self.spec.a_bar)
    }

    /// `F^{*,k}(p) = inf_{y >= 0} (y p + (1 + k) y^gamma)` for `p <= 0`.
    pub fn conj_f_star(&self, p: f64, k_eff: f64) -> Result<f64> {
        if !(p <= 0.0) {
            return Err(domain(format!("F* requires p <= 0, got {p}")));
        }
        if !(k_eff >= 0.0) {
            return Err(domain(format!("cost rate must be nonnegative, got {k_eff}")));
        }
        Ok(self.f_star(p, k_eff))
    }

    #[inline]
    pub(crate) fn f_star(&self, p: f64, k_eff: f64) -> f64 {
        let g = self.spec.gamma;
        let scale = 1.0 + k_eff;
        -(g - 1.0) * scale * (-p / (scale * g)).powf(g / (g - 1.0))
    }

    /// Coefficient `A^n` of the terminal function `g^n(y) = -A^n y^gamma`.
    pub fn terminal_coefficient(&self, n: usize) -> f64 {
        let g = self.spec.gamma;
        let s = (1.0 + self.spec.k).powf(1.0 / (g - 1.0));
        (s / (n as f64 + s)).powf(g - 1.0)
    }

    /// `g^n(y) = M^n F(y)`, the value of splitting `y` optimally over `n` bonuses
    /// and the terminal payment.
    pub fn terminal_g(&self, n: usize, y: f64) -> f64 {
        -self.terminal_coefficient(n) * y.powf(self.spec.gamma)
    }

    /// `A^{(n,d)}(t)`: constant `A^n` when `d > 0`, time-varying otherwise.
    pub fn envelope_coefficient(&self, n: usize, t: f64) -> f64 {
        if self.d > 0.0 {
            return self.terminal_coefficient(n);
        }
        let g = self.spec.gamma;
        let s = (1.0 + self.spec.k).powf(1.0 / (g - 1.0));
        let e = (self.d * (t - self.spec.horizon) / (g - 1.0)).exp();
        (s / (n as f64 * e + s)).powf(g - 1.0)
    }

    /// Coefficient of the analytic lower bound `-A^{(n,d)}(t) e^{d(t-T)} y^gamma`.
    pub fn lower_bound_coefficient(&self, n: usize, t: f64) -> f64 {
        self.envelope_coefficient(n, t) * (self.d * (t - self.spec.horizon)).exp()
    }

    /// Zero-effort lower bound on the level-`n` value at `(t, y)`.
    pub fn lower_bound(&self, n: usize, t: f64, y: f64) -> f64 {
        -self.lower_bound_coefficient(n, t) * y.powf(self.spec.gamma)
    }
}

/// Parameters `(b, c, M)` and thresholds of the explicit supersolution
///
/// `phi(t, y) = -A^{(n,d)}(t) e^{d(t-T)} y^gamma + M e^{(T-t) b} (1 - e^{-c y})`.
///
/// `M` is stored as its logarithm since the admissible constants are
/// astronomically large at realistic parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaEnvelope {
    pub b: f64,
    pub c: f64,
    pub log_m: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub d: f64,
    pub n: usize,
}

impl DeltaEnvelope {
    pub fn new(b: f64, c: f64, m: f64, y_lo: f64, y_hi: f64, d: f64, n: usize) -> Result<Self> {
        if !(c > 0.0 && m > 0.0 && b > 0.0) {
            return Err(Error::InvalidParams(format!("need b, c, M > 0, got ({b}, {c}, {m})")));
        }
        if !(y_lo > 0.0 && y_lo <= y_hi) {
            return Err(Error::InvalidParams(format!(
                "need 0 < y_lo <= y_hi, got ({y_lo}, {y_hi})"
            )));
        }
        Ok(Self {
            b,
            c,
            log_m: m.ln(),
            y_lo,
            y_hi,
            d,
            n,
        })
    }

    pub fn m(&self) -> f64 {
        self.log_m.exp()
    }

    /// Membership in both admissible sets for `params` (thresholds recomputed).
    pub fn certifies(&self, params: &ModelParams) -> bool {
        let Ok(min) = envelope_minimums(params, self.n) else {
            return false;
        };
        self.b >= params.r() * self.c && self.c > min.c && self.log_m > min.log_m(self.c)
    }
}

struct EnvelopeMinimums {
    c: f64,
    y_lo: f64,
    y_hi: f64,
    rho_a_bar: f64,
    interior_coef: f64,
}

impl EnvelopeMinimums {
    /// Log of the larger of the two lower bounds on `M` at spread `c`.
    fn log_m(&self, c: f64) -> f64 {
        let first = self.rho_a_bar.ln() + c * self.y_lo;
        if self.interior_coef > 0.0 {
            // The growth factor is evaluated at e^{c y_hi}, which dominates e^{r y_hi}
            // because c > r for every admissible c.
            first.max(self.interior_coef.ln() + c * self.y_hi)
        } else {
            first
        }
    }
}

fn envelope_minimums(params: &ModelParams, n_max: usize) -> Result<EnvelopeMinimums> {
    let (r, rho, sigma, g) = (params.r(), params.rho(), params.sigma(), params.gamma());
    let (alpha, beta, a_bar) = (params.alpha(), params.beta(), params.a_bar());
    let h_bar = params.h(a_bar);
    let a_n = params.terminal_coefficient(n_max);
    let kappa = if params.d() > 0.0 {
        (params.d() * params.horizon()).exp()
    } else {
        1.0
    };
    let s2 = r * r * sigma * sigma;
    let denom = s2 * alpha * a_n * g * (g - 1.0);

    // Effort level at which the interior maximizer saturates, as a function of y.
    let effort_at = |log_y: f64| (rho * kappa / (denom * ((g - 2.0) * log_y).exp()) - beta) / alpha;
    let y_lo = solve_threshold(effort_at, a_bar, "lower")?;
    let y_hi = solve_threshold(effort_at, 0.0, "upper")?;

    let c = (r * h_bar + (r * r * h_bar * h_bar + 2.0 * s2 * beta * beta).sqrt()) / (s2 * beta * beta);
    let interior_coef =
        0.5 * rho * rho * kappa / (s2 * alpha * alpha * a_n * g * (g - 1.0) * y_lo.powf(g - 2.0)) - rho * beta / alpha;
    Ok(EnvelopeMinimums {
        c,
        y_lo,
        y_hi,
        rho_a_bar: rho * a_bar,
        interior_coef,
    })
}

/// Solves `effort_at(ln y) = target` for `y > 0`; `effort_at` is decreasing in `y`.
fn solve_threshold<F: Fn(f64) -> f64>(effort_at: F, target: f64, which: &str) -> Result<f64> {
    let f = |x: f64| effort_at(x) - target;
    let mut lo = -1.0;
    let mut hi = 1.0;
    while f(lo) <= 0.0 {
        lo *= 2.0;
        if lo < -700.0 {
            return Err(Error::Configuration(format!(
                "cannot bracket {which} envelope threshold: effort stays below {target} as y -> 0"
            )));
        }
    }
    while f(hi) >= 0.0 {
        hi *= 2.0;
        if hi > 700.0 {
            return Err(Error::Configuration(format!(
                "cannot bracket {which} envelope threshold: effort stays above {target} as y grows"
            )));
        }
    }
    Ok(bisect(f, lo, hi, 200).exp())
}

/// Picks `(b, c, M)` at 5% above the smallest admissible values for `n_max` rights.
pub fn build_envelope(params: &ModelParams, n_max: usize) -> Result<DeltaEnvelope> {
    let min = envelope_minimums(params, n_max)?;
    let c = 1.05 * min.c;
    let b = 1.05 * params.r() * c;
    let log_m = min.log_m(c) + 1.05f64.ln();
    Ok(DeltaEnvelope {
        b,
        c,
        log_m,
        y_lo: min.y_lo,
        y_hi: min.y_hi,
        d: params.d(),
        n: n_max,
    })
}

/// Evaluates the supersolution for level `n` with the constants of `env`.
///
/// Returns `+inf` where the bump term overflows `f64`.
pub fn supersolution_phi(t: f64, y: f64, n: usize, env: &DeltaEnvelope, params: &ModelParams) -> Result<f64> {
    if !(0.0..=params.horizon()).contains(&t) {
        return Err(domain(format!("t = {t} outside [0, T]")));
    }
    if !(y >= 0.0) {
        return Err(domain(format!("y = {y} must be nonnegative")));
    }
    let base = params.lower_bound(n, t, y);
    if y == 0.0 {
        return Ok(base);
    }
    let log_bump = env.log_m + (params.horizon() - t) * env.b + (-(-env.c * y).exp_m1()).ln();
    Ok(base + log_bump.exp())
}
