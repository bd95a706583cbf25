//! Small one-dimensional numerical routines shared across the crate.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of `f` on `[lo, hi]`.
///
/// Returns the best point seen (including both endpoints) and its value. For
/// unimodal `f` this is the maximizer to within `tol`; for a convex `f` the
/// endpoint comparison still recovers the maximum.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let fa = f(a);
    let fb = f(b);
    let mut best = if fb > fa { (b, fb) } else { (a, fa) };
    if b - a <= tol {
        return best;
    }
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    for (x, fx) in [(x1, f1), (x2, f2)] {
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Golden-section search for the minimum of `f` on `[lo, hi]`.
pub fn golden_section_min<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (x, v) = golden_section_max(|x| -f(x), lo, hi, tol);
    (x, -v)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Bisection root of a continuous `f` on a bracket where `f(lo)` and `f(hi)` differ in sign.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let mut flo = f(lo);
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Linear interpolation of `values` sampled at `x_j = j * step`, clamped to the sampled range.
pub fn interp_uniform(values: &[f64], step: f64, x: f64) -> f64 {
    let last = values.len() - 1;
    if x <= 0.0 {
        return values[0];
    }
    let s = x / step;
    let j = s.floor() as usize;
    if j >= last {
        return values[last];
    }
    let w = s - j as f64;
    values[j] * (1.0 - w) + values[j + 1] * w
}

/// Four-point Lagrange interpolation of `values` sampled at `x_j = j * step`.
///
/// Uses the nodes `j - 1 ..= j + 2` around the cell containing `x`, shifted
/// inward at the ends; exact for cubics. Falls back to linear interpolation
/// on fewer than four samples.
pub fn interp_cubic_uniform(values: &[f64], step: f64, x: f64) -> f64 {
    let n = values.len();
    if n < 4 {
        return interp_uniform(values, step, x);
    }
    let last = n - 1;
    if x <= 0.0 {
        return values[0];
    }
    let s = x / step;
    if s >= last as f64 {
        return values[last];
    }
    let j = s.floor() as usize;
    let base = j.saturating_sub(1).min(n - 4);
    let u = s - base as f64;
    let (f0, f1, f2, f3) = (values[base], values[base + 1], values[base + 2], values[base + 3]);
    let l0 = -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0;
    let l1 = u * (u - 2.0) * (u - 3.0) / 2.0;
    let l2 = -u * (u - 1.0) * (u - 3.0) / 2.0;
    let l3 = u * (u - 1.0) * (u - 2.0) / 6.0;
    f0 * l0 + f1 * l1 + f2 * l2 + f3 * l3
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_interior_max() {
        let (x, v) = golden_section_max(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6);
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn golden_handles_convex_by_endpoints() {
        let (x, _) = golden_section_max(|x| (x - 0.4) * (x - 0.4), 0.0, 1.0, 1e-10);
        assert_eq!(x, 1.0);
    }

    #[test]
    fn simpson_integrates_exponential() {
        let v = adaptive_simpson(|t: f64| t.exp(), 0.0, 2.0, 1e-12);
        assert!((v - (2.0f64.exp() - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn bisect_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 200);
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn cubic_interp_exact_on_cubics() {
        let step = 0.1;
        let v: Vec<f64> = (0..12)
            .map(|j| (j as f64 * step).powi(3) - 2.0 * j as f64 * step)
            .collect();
        for x in [0.0, 0.03, 0.15, 0.57, 1.04, 1.1] {
            let exact = x * x * x - 2.0 * x;
            assert!((interp_cubic_uniform(&v, step, x) - exact).abs() < 1e-12, "x = {x}");
        }
        assert!((interp_cubic_uniform(&v, step, 0.3) - v[3]).abs() < 1e-14);
        assert_eq!(interp_cubic_uniform(&[0.0, 1.0], 1.0, 0.5), 0.5);
    }

    #[test]
    fn interp_matches_nodes_and_midpoints() {
        let v = [0.0, 1.0, 4.0];
        assert_eq!(interp_uniform(&v, 0.5, 0.5), 1.0);
        assert_eq!(interp_uniform(&v, 0.5, 0.75), 2.5);
        assert_eq!(interp_uniform(&v, 0.5, 3.0), 4.0);
    }
}
