//! Uniform space-time grid and three-point finite-difference stencils.

use crate::error::{Error, Result};

/// Uniform grid `y_i = i h` on `[0, y_max]` and `t_m = m dt` on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    y_max: f64,
    intervals: usize,
    h: f64,
    steps: usize,
    dt: f64,
    ys: Vec<f64>,
    ts: Vec<f64>,
}

impl Grid {
    /// Builds a grid with `intervals` spatial cells and `steps` time steps.
    pub fn new(y_max: f64, intervals: usize, steps: usize, horizon: f64) -> Result<Self> {
        if !(y_max > 0.0 && y_max.is_finite()) {
            return Err(Error::InvalidParams(format!("y_max must be positive, got {y_max}")));
        }
        if intervals < 2 {
            return Err(Error::InvalidParams(format!(
                "need at least 2 spatial intervals, got {intervals}"
            )));
        }
        if steps < 1 {
            return Err(Error::InvalidParams("need at least one time step".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParams(format!("horizon must be positive, got {horizon}")));
        }
        let h = y_max / intervals as f64;
        let dt = horizon / steps as f64;
        let mut ys: Vec<f64> = (0..=intervals).map(|i| i as f64 * h).collect();
        ys[intervals] = y_max;
        let mut ts: Vec<f64> = (0..=steps).map(|m| m as f64 * dt).collect();
        ts[steps] = horizon;
        Ok(Self {
            y_max,
            intervals,
            h,
            steps,
            dt,
            ys,
            ts,
        })
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }
    /// Index of the last spatial node (`I`).
    pub fn intervals(&self) -> usize {
        self.intervals
    }
    /// Index of the last time node (`M`).
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn horizon(&self) -> f64 {
        self.ts[self.steps]
    }
    pub fn ys(&self) -> &[f64] {
        &self.ys
    }
    pub fn ts(&self) -> &[f64] {
        &self.ts
    }
    pub fn y(&self, i: usize) -> f64 {
        self.ys[i]
    }
    pub fn t(&self, m: usize) -> f64 {
        self.ts[m]
    }

    /// Nearest time index to `t`.
    pub fn nearest_time_index(&self, t: f64) -> usize {
        ((t / self.dt).round().max(0.0) as usize).min(self.steps)
    }
}

/// Differences of a slice at an interior node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    /// `v[i+1] - v[i]`
    pub forward: f64,
    /// `v[i] - v[i-1]`
    pub backward: f64,
    /// `(v[i+1] - v[i-1]) / (2h)`
    pub central_first: f64,
    /// `v[i+1] - 2 v[i] + v[i-1]`; divide by `h^2` for the second derivative.
    pub second_diff: f64,
}

impl Stencil {
    pub fn at(values: &[f64], i: usize, h: f64) -> Self {
        assert!(
            i >= 1 && i + 1 < values.len(),
            "stencil needs an interior index, got {i} of {}",
            values.len()
        );
        let forward = values[i + 1] - values[i];
        let backward = values[i] - values[i - 1];
        Self {
            forward,
            backward,
            central_first: (forward + backward) / (2.0 * h),
            second_diff: forward - backward,
        }
    }

    pub fn second_derivative(&self, h: f64) -> f64 {
        self.second_diff / (h * h)
    }
}
