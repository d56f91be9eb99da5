//! Dormand-Prince 5(4) with FSAL and step clipping onto an output grid.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]);
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub atol: f64,
    pub rtol: f64,
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
    /// Bound the local error per unit time (`err / h`) instead of per step,
    /// so the global error stays below `tol * t_end`.
    pub per_unit_time: bool,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            atol: tol,
            rtol: tol,
            h_init: None,
            h_max: f64::INFINITY,
            max_steps: 10_000_000,
            per_unit_time: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates from `t_grid[0]` and calls `observe(i, t_grid[i], y)` at every
/// grid point, including the first. Steps are shortened to land on grid
/// points exactly, so outputs do not depend on interpolation.
pub fn integrate<S, F>(
    sys: &S,
    y0: &[C64],
    t_grid: &[f64],
    opts: OdeOptions,
    mut observe: F,
) -> Result<OdeStats>
where
    S: OdeSystem,
    F: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y0.len(),
        });
    }
    if t_grid.is_empty() {
        return Ok(OdeStats::default());
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("t_grid", "must be strictly increasing"));
    }

    let mut stats = OdeStats::default();
    let mut y = y0.to_vec();
    let mut t = t_grid[0];
    observe(0, t, &y)?;
    if t_grid.len() == 1 {
        return Ok(stats);
    }

    let mut k1 = vec![C64::default(); n];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut k5 = k1.clone();
    let mut k6 = k1.clone();
    let mut k7 = k1.clone();
    let mut ytmp = k1.clone();
    let mut ynew = k1.clone();

    sys.rhs(t, &y, &mut k1);
    stats.rhs_evals += 1;

    let span = t_grid[t_grid.len() - 1] - t;
    let mut h = match opts.h_init {
        Some(h) => h,
        None => initial_step(&y, &k1, opts, span),
    }
    .min(opts.h_max);

    let mut next = 1;
    let mut steps = 0;
    while next < t_grid.len() {
        let target = t_grid[next];
        let mut hs = h;
        let mut lands = false;
        if t + hs >= target - 1e-12 * target.abs().max(1.0) {
            hs = target - t;
            lands = true;
        }
        if hs <= f64::EPSILON * t.abs().max(1.0) * 16.0 {
            return Err(Error::StepUnderflow { t, h: hs });
        }
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::StepUnderflow { t, h: hs });
        }

        for i in 0..n {
            ytmp[i] = y[i] + k1[i] * (hs * A21);
        }
        sys.rhs(t + C2 * hs, &ytmp, &mut k2);
        for i in 0..n {
            ytmp[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * hs;
        }
        sys.rhs(t + C3 * hs, &ytmp, &mut k3);
        for i in 0..n {
            ytmp[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * hs;
        }
        sys.rhs(t + C4 * hs, &ytmp, &mut k4);
        for i in 0..n {
            ytmp[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * hs;
        }
        sys.rhs(t + C5 * hs, &ytmp, &mut k5);
        for i in 0..n {
            ytmp[i] = y[i]
                + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * hs;
        }
        sys.rhs(t + hs, &ytmp, &mut k6);
        for i in 0..n {
            ynew[i] = y[i]
                + (k1[i] * A71 + k3[i] * A73 + k4[i] * A74 + k5[i] * A75 + k6[i] * A76) * hs;
        }
        sys.rhs(t + hs, &ynew, &mut k7);
        stats.rhs_evals += 6;

        let mut err = 0.0f64;
        for i in 0..n {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7)
                * hs;
            let sc = opts.atol + opts.rtol * y[i].norm().max(ynew[i].norm());
            err = err.max(e.norm() / sc);
        }
        let order = if opts.per_unit_time {
            err /= hs;
            0.25
        } else {
            0.2
        };
        if !err.is_finite() {
            stats.rejected += 1;
            h = hs * 0.1;
            continue;
        }

        if err <= 1.0 {
            stats.accepted += 1;
            t = if lands { target } else { t + hs };
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            if lands {
                observe(next, t, &y)?;
                next += 1;
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-order)).clamp(0.2, 5.0) };
            // A clipped step says nothing about the natural step size.
            let base = if lands { h.max(hs) } else { hs };
            h = (base * fac).min(opts.h_max);
        } else {
            stats.rejected += 1;
            h = hs * (0.9 * err.powf(-order)).clamp(0.1, 1.0);
        }
    }
    Ok(stats)
}

fn initial_step(y: &[C64], f: &[C64], opts: OdeOptions, span: f64) -> f64 {
    let mut d0 = 0.0f64;
    let mut d1 = 0.0f64;
    for (yi, fi) in y.iter().zip(f) {
        let sc = opts.atol + opts.rtol * yi.norm();
        d0 = d0.max(yi.norm() / sc);
        d1 = d1.max(fi.norm() / sc);
    }
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span).max(1e-12 * span)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay {
        lambda: C64,
    }

    impl OdeSystem for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[C64], dy: &mut [C64]) {
            dy[0] = self.lambda * y[0];
        }
    }

    struct Oscillator;

    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[C64], dy: &mut [C64]) {
            dy[0] = y[1];
            dy[1] = -y[0];
        }
    }

    #[test]
    fn complex_exponential_to_tolerance() {
        let sys = Decay {
            lambda: C64::new(-0.3, 2.0),
        };
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let mut max_err = 0.0f64;
        integrate(&sys, &[C64::new(1.0, 0.0)], &grid, OdeOptions::with_tol(1e-10), |_, t, y| {
            max_err = max_err.max((y[0] - (sys.lambda * t).exp()).norm());
            Ok(())
        })
        .unwrap();
        assert!(max_err < 1e-8, "{max_err}");
    }

    #[test]
    fn fifth_order_convergence() {
        // Halving the tolerance by 2^5 should roughly halve the step size.
        let count = |tol| {
            let grid = [0.0, 20.0];
            integrate(&Oscillator, &[C64::new(1.0, 0.0), C64::default()], &grid, OdeOptions::with_tol(tol), |_, _, _| Ok(()))
                .unwrap()
                .accepted
        };
        let a = count(1e-6) as f64;
        let b = count(1e-6 / 32.0) as f64;
        assert!((b / a - 2.0).abs() < 0.4, "{a} {b}");
    }

    #[test]
    fn lands_on_grid() {
        let grid = [0.0, 0.1, 0.15, 3.0];
        let mut seen = vec![];
        integrate(&Oscillator, &[C64::new(1.0, 0.0), C64::default()], &grid, OdeOptions::with_tol(1e-9), |i, t, _| {
            seen.push((i, t));
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![(0, 0.0), (1, 0.1), (2, 0.15), (3, 3.0)]);
    }

    #[test]
    fn rejects_bad_grid() {
        let r = integrate(&Oscillator, &[C64::default(); 2], &[0.0, 0.0], OdeOptions::with_tol(1e-9), |_, _, _| Ok(()));
        assert!(r.is_err());
    }
}
