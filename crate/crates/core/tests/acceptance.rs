use std::time::{Duration, Instant};

use contractlab_core::firstbest::fb_bounds_at_utility;
use contractlab_core::hjb::{intervention_m, optimize_z, solve_recursive, solve_scheduled, LevelSolution};
use contractlab_core::scheme::{default_region_tol, BonusScheme, Diagnostics};
use contractlab_core::sim::{simulate_value, GridPolicy, SimConfig};
use contractlab_core::{build_envelope, fb_bounds, supersolution_phi, Grid, ModelParams, ModelSpec, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CAP: f64 = 1.573_877_361_149_47;

fn report(id: &str, pass: bool, elapsed: Duration, limit_s: f64, detail: &str) -> bool {
    let in_time = elapsed.as_secs_f64() < limit_s;
    let ok = pass && in_time;
    println!(
        "{} criterion {id}: {detail} [{:.2}s / limit {limit_s}s]",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    ok
}

fn baseline_grid(p: &ModelParams) -> Grid {
    Grid::new(2.0, 40, 100, p.horizon()).unwrap()
}

fn solve(delta: f64, n: usize) -> (ModelParams, Grid, Vec<LevelSolution>) {
    let p = ModelParams::with_delta(delta).unwrap();
    let g = baseline_grid(&p);
    let levels = solve_recursive(n, &p, &g, &SolverConfig::default()).unwrap();
    (p, g, levels)
}

fn criterion_01_conjugate_oracles() -> bool {
    let start = Instant::now();
    let p = ModelParams::new(ModelSpec::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let points = 1_000_000;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x: f64 = -10.0 * rng.random::<f64>();
        let k = 0.1;
        let y_star = (-x / ((1.0 + k) * 3.0)).sqrt();
        let y_hi = 2.0 * y_star + 1.0;
        let brute_f = (0..=points)
            .map(|j| {
                let y = y_hi * j as f64 / points as f64;
                y * x + (1.0 + k) * y.powi(3)
            })
            .fold(f64::INFINITY, f64::min);
        let brute_g = (0..=points)
            .map(|j| {
                let a = p.a_bar() * j as f64 / points as f64;
                a + p.cost(a).unwrap() * x
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let f = p.conj_f_star(x, k).unwrap();
        let g = p.conj_g_star(x).unwrap();
        worst = worst.max((f - brute_f).abs() / brute_f.abs().max(1e-12));
        if g != brute_g {
            worst = worst.max((g - brute_g).abs() / brute_g.abs().max(1e-12));
        }
    }
    report(
        "1",
        worst <= 1e-6,
        start.elapsed(),
        5.0,
        &format!("max relative error {worst:.2e} (<= 1e-6)"),
    )
}

fn criterion_02_coincidence_at_unit_delta_gamma() -> bool {
    let start = Instant::now();
    let spec = ModelSpec {
        r: 0.25 / 3.0,
        ..ModelSpec::default()
    };
    let p = ModelParams::new(spec).unwrap();
    let gaps: Vec<f64> = [0.0, 0.5, 1.0]
        .iter()
        .map(|&r| {
            let b = fb_bounds(r, 2, None, &p).unwrap();
            b.upper - b.lower
        })
        .collect();
    let worst = gaps.iter().fold(0.0f64, |a, g| a.max(g.abs()));
    report(
        "2",
        worst <= 1e-8,
        start.elapsed(),
        1.0,
        &format!("max |upper - lower| = {worst:.2e} (<= 1e-8)"),
    )
}

fn criterion_03_non_degeneracy() -> bool {
    let start = Instant::now();
    let mut ok = true;
    let mut detail = String::new();
    for delta in [0.32, 1.0 / 3.0, 1.08] {
        let p = ModelParams::with_delta(delta).unwrap();
        let b = fb_bounds(0.0, 2, None, &p).unwrap();
        for v in [b.lower, b.upper] {
            ok &= v > 1e-3 && v < CAP - 1e-3;
        }
        detail += &format!("delta {delta:.4}: [{:.6}, {:.6}]; ", b.lower, b.upper);
    }
    report(
        "3",
        ok,
        start.elapsed(),
        2.0,
        &format!("{detail}all within (1e-3, {:.6})", CAP - 1e-3),
    )
}

fn criterion_04_intervention_iterates() -> bool {
    let start = Instant::now();
    let p = ModelParams::new(ModelSpec::default()).unwrap();
    let g = Grid::new(2.0, 400, 1, p.horizon()).unwrap();
    let mut slice: Vec<f64> = g.ys().iter().map(|&y| p.terminal_g(0, y)).collect();
    let mut ok = true;
    let mut detail = String::new();
    for n in 1..=4 {
        slice = intervention_m(&slice, &p, &g);
        let mut worst_ratio = 0.0f64;
        for (i, &y) in g.ys().iter().enumerate() {
            let err = (slice[i] - p.terminal_g(n, y)).abs();
            ok &= err <= 2e-2 * y.powi(3) + 1e-15;
            if y > 0.0 {
                worst_ratio = worst_ratio.max(err / y.powi(3));
            }
        }
        detail += &format!("n={n}: max err/y^3 {worst_ratio:.2e}; ");
    }
    report("4", ok, start.elapsed(), 10.0, &format!("{detail}bound 2e-2"))
}

fn criterion_05_obstacle_and_structure() -> bool {
    let start = Instant::now();
    let eps = SolverConfig::default().eps;
    let mut fails: Vec<String> = Vec::new();
    let mut worst_lower = f64::INFINITY;
    let mut worst_upper = f64::INFINITY;
    for delta in [0.32, 0.4, 1.08] {
        let (p, g, levels) = solve(delta, 2);
        let schemes = BonusScheme::from_levels(&levels, &p, &g, default_region_tol(eps));
        let env = build_envelope(&p, 2).unwrap();
        let last_t = g.steps();
        let mut bc = true;
        let mut residual = f64::INFINITY;
        let mut mono = true;
        let mut max_second_diff = f64::NEG_INFINITY;
        let mut max_abs = 0.0f64;
        let mut firing = true;
        let mut lower_ok = true;
        let mut upper_ok = true;
        for l in &levels {
            let n = l.surface.level;
            for (i, &y) in g.ys().iter().enumerate() {
                bc &= l.surface.get(last_t, i) == p.terminal_g(n, y);
            }
            for m in 0..=last_t {
                bc &= l.surface.get(m, 0) == 0.0;
                let row = l.surface.slice(m);
                for i in 0..row.len() {
                    let v = row[i];
                    max_abs = max_abs.max(v.abs());
                    if let Some(o) = &l.obstacle {
                        residual = residual.min(v - o.get(m, i));
                    }
                    if n > 0 {
                        mono &= v >= levels[n - 1].surface.get(m, i) - 1e-8;
                    }
                    if i > 0 && i + 1 < row.len() {
                        max_second_diff = max_second_diff.max(row[i + 1] - 2.0 * v + row[i - 1]);
                    }
                    let (t, y) = (g.t(m), g.y(i));
                    let lower = v - p.lower_bound(n, t, y);
                    let upper = supersolution_phi(t, y, n, &env, &p).unwrap() - v;
                    worst_lower = worst_lower.min(lower);
                    worst_upper = worst_upper.min(upper);
                    lower_ok &= lower >= -1e-6;
                    upper_ok &= upper >= -1e-6;
                }
            }
        }
        for s in &schemes {
            for (m, row) in s.eta.iter().enumerate() {
                let prev = levels[s.level - 1].surface.slice(m);
                for (i, &y) in g.ys().iter().enumerate() {
                    let raw = contractlab_core::scheme::extract_eta(prev, i, &p, &g);
                    firing &= row[i] < y + g.h() || y == 0.0 && row[i] == 0.0;
                    firing &= raw < y + g.h() || y == 0.0 && raw == 0.0;
                }
            }
        }
        let concave = max_second_diff <= 1e-3 * max_abs;
        let checks = [
            ("a", bc),
            ("b", residual >= -10.0 * eps),
            ("c", mono),
            ("d", concave),
            ("e", firing),
            ("f", lower_ok && upper_ok),
        ];
        for (name, ok) in checks {
            if !ok {
                fails.push(format!("delta {delta}: ({name})"));
            }
        }
        println!(
            "  delta {delta}: min obstacle residual {residual:.2e}, max second difference {max_second_diff:.2e} vs {:.2e}, lower-envelope slack {:.2e}",
            1e-3 * max_abs,
            worst_lower
        );
    }
    let detail = format!(
        "(a)-(f) at delta 0.32/0.4/1.08, N=2; min(V - lower) {worst_lower:.2e}, min(phi - V) {worst_upper:.2e}; failing: {}",
        if fails.is_empty() { "none".to_string() } else { fails.join(", ") }
    );
    report("5", fails.is_empty(), start.elapsed(), 60.0, &detail)
}

fn criterion_06_first_best_dominance() -> bool {
    let start = Instant::now();
    let mut ok = true;
    let mut worst = f64::NEG_INFINITY;
    for delta in [0.36, 0.4, 1.08] {
        let (p, g, levels) = solve(delta, 2);
        for (i, &y) in g.ys().iter().enumerate() {
            let v = levels[2].surface.get(0, i);
            let upper = fb_bounds_at_utility(y, 2, None, &p).unwrap().upper;
            let excess = v - upper - 1e-2 * (1.0 + v.abs());
            worst = worst.max(excess);
            ok &= excess <= 0.0;
        }
    }
    report(
        "6",
        ok,
        start.elapsed(),
        30.0,
        &format!("max of V2(0,y) - upper - 1e-2(1+|V|) = {worst:.2e} (<= 0)"),
    )
}

fn criterion_07_discretionary_dominates_scheduled() -> bool {
    let start = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    for delta in [0.32, 0.4, 1.08] {
        let (p, g, levels) = solve(delta, 1);
        for t1 in [0.24, 0.5, 1.0, 1.5] {
            let sched = solve_scheduled(&[t1], &p, &g, &SolverConfig::default()).unwrap();
            for i in 0..=g.intervals() {
                worst = worst.max(sched.get(0, i) - levels[1].surface.get(0, i));
            }
        }
    }
    report(
        "7",
        worst <= 1e-3,
        start.elapsed(),
        60.0,
        &format!("max scheduled - V1 = {worst:.2e} (<= 1e-3)"),
    )
}

fn criterion_08_hamiltonian_optimizer() -> bool {
    let start = Instant::now();
    let p = ModelParams::with_delta(0.4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (r, rho, sigma) = (p.r(), p.rho(), p.sigma());
    let z_max = p.cost_prime(p.a_bar()).unwrap() * 2.0;
    let points = 100_000;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = rng.random_range(-10.0..10.0);
        let q = rng.random_range(-10.0..=0.0);
        let brute = (0..=points)
            .map(|j| {
                let z = z_max * j as f64 / points as f64;
                let a = p.best_response(z);
                r * p.cost(a).unwrap() * x + rho * a + 0.5 * q * r * r * sigma * sigma * z * z
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let got = optimize_z(x, q, &p).unwrap();
        worst = worst.max((got.value - brute).abs());
    }
    report(
        "8",
        worst <= 1e-4,
        start.elapsed(),
        5.0,
        &format!("max |value - brute force| = {worst:.2e} (<= 1e-4)"),
    )
}

fn criterion_09_monte_carlo_consistency() -> bool {
    let start = Instant::now();
    let (p, g, levels) = solve(0.4, 0);
    let policy = GridPolicy::new(&levels, &[], &p, &g).unwrap();
    let cfg = SimConfig::new(100_000, 2024, 1.0);
    let a = simulate_value(&policy, &cfg, &p, &g).unwrap();
    let b = simulate_value(&policy, &cfg, &p, &g).unwrap();
    let pde = levels[0].surface.get(0, 20);
    let gap = (a.estimate - pde).abs();
    let bound = 3.0 * a.standard_error + 0.05;
    let deterministic = a.estimate.to_bits() == b.estimate.to_bits();
    report(
        "9",
        gap <= bound && deterministic,
        start.elapsed(),
        60.0,
        &format!(
            "MC {:.5} (SE {:.2e}) vs PDE {pde:.5}: gap {gap:.2e} <= {bound:.2e}; reproducible {deterministic}",
            a.estimate, a.standard_error
        ),
    )
}

fn criterion_10_regime_flags() -> bool {
    let start = Instant::now();
    let eps = SolverConfig::default().eps;
    let mut flags = Vec::new();
    let mut ok = true;
    for (delta, expect) in [(0.32, false), (0.4, true), (1.08, true)] {
        let (p, g, levels) = solve(delta, 1);
        let schemes = BonusScheme::from_levels(&levels, &p, &g, default_region_tol(eps));
        let d = Diagnostics::compute(&levels, &schemes, &g);
        let hello = d.golden_hello[0];
        let mut good = hello == expect;
        if delta > 1.0 {
            good &= d.golden_hello_min_y[0].is_some_and(|y| y > g.h());
        }
        if !good {
            let dump: String = schemes[0].region[0]
                .iter()
                .map(|&r| if r { '#' } else { '.' })
                .collect();
            println!("  warning: delta {delta} golden hello {hello} (expected {expect}); t=0 region {dump}");
        }
        ok &= good;
        flags.push(format!("delta {delta}: {hello} (min y {:?})", d.golden_hello_min_y[0]));
    }
    report("10", ok, start.elapsed(), 60.0, &flags.join("; "))
}

type Criterion = (&'static str, fn() -> bool, bool);

fn main() {
    let criteria: [Criterion; 10] = [
        ("1", criterion_01_conjugate_oracles, true),
        ("2", criterion_02_coincidence_at_unit_delta_gamma, true),
        ("3", criterion_03_non_degeneracy, true),
        ("4", criterion_04_intervention_iterates, true),
        ("5", criterion_05_obstacle_and_structure, true),
        ("6", criterion_06_first_best_dominance, true),
        ("7", criterion_07_discretionary_dominates_scheduled, true),
        ("8", criterion_08_hamiltonian_optimizer, true),
        ("9", criterion_09_monte_carlo_consistency, true),
        // qualitative flags warn instead of failing
        ("10", criterion_10_regime_flags, false),
    ];
    let mut failed = Vec::new();
    for (id, run, hard) in criteria {
        let ok = std::panic::catch_unwind(run).unwrap_or_else(|_| {
            println!("FAIL criterion {id}: panicked");
            false
        });
        if !ok && hard {
            failed.push(id);
        } else if !ok {
            println!("WARN criterion {id} is soft; not counted as a failure");
        }
    }
    if failed.is_empty() {
        println!("acceptance: all hard criteria passed");
    } else {
        println!("acceptance: failing criteria {}", failed.join(", "));
        std::process::exit(1);
    }
}
