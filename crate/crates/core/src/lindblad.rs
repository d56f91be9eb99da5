//! Master-equation dynamics with rotation noise about the three spin axes and
//! independent single-atom loss from each well.
//!
//! The density matrix is block diagonal in the total atom number. Blocks are
//! stored densely, row-major, in one flat buffer so that the whole state is a
//! single ODE vector.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{moments_slice, ModelParams, SpinBasis, SpinMoments};
use crate::ode::{integrate, OdeOptions, OdeStats, OdeSystem};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseChannels {
    #[serde(default)]
    pub gamma1: f64,
    #[serde(default)]
    pub gamma2: f64,
    #[serde(default)]
    pub gamma3: f64,
    #[serde(default, rename = "gammaL")]
    pub gamma_l: f64,
    #[serde(default, rename = "gammaR")]
    pub gamma_r: f64,
}

impl NoiseChannels {
    pub fn phase(gamma: f64) -> Self {
        Self { gamma3: gamma, ..Self::default() }
    }

    pub fn number(gamma: f64) -> Self {
        Self { gamma2: gamma, ..Self::default() }
    }

    pub fn tunneling(gamma: f64) -> Self {
        Self { gamma1: gamma, ..Self::default() }
    }

    pub fn loss(gamma: f64) -> Self {
        Self {
            gamma_l: gamma,
            gamma_r: gamma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma3", self.gamma3),
            ("gammaL", self.gamma_l),
            ("gammaR", self.gamma_r),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, "rate must be finite and >= 0"));
            }
        }
        Ok(())
    }

    pub fn has_loss(&self) -> bool {
        self.gamma_l > 0.0 || self.gamma_r > 0.0
    }

    pub fn max_rate(&self) -> f64 {
        [self.gamma1, self.gamma2, self.gamma3, self.gamma_l, self.gamma_r]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Block-diagonal density matrix over sectors `n_min..=n_max`. Sectors
/// outside that range are exactly empty.
#[derive(Debug, Clone, PartialEq)]
pub struct SectoredDensityMatrix {
    n_min: usize,
    n_max: usize,
    offsets: Vec<usize>,
    data: Vec<C64>,
}

impl SectoredDensityMatrix {
    pub fn zeros(n_min: usize, n_max: usize) -> Self {
        assert!(n_min <= n_max);
        let mut offsets = Vec::with_capacity(n_max - n_min + 2);
        let mut off = 0;
        for n in n_min..=n_max {
            offsets.push(off);
            off += (n + 1) * (n + 1);
        }
        offsets.push(off);
        Self {
            n_min,
            n_max,
            offsets,
            data: vec![C64::default(); off],
        }
    }

    /// Fixed-`n` state given as an `(n+1) x (n+1)` block.
    pub fn from_block(n: usize, block: &Array2<C64>) -> Result<Self> {
        if block.dim() != (n + 1, n + 1) {
            return Err(Error::DimensionMismatch {
                expected: n + 1,
                got: block.nrows(),
            });
        }
        let mut s = Self::zeros(n, n);
        for ((k, l), v) in block.indexed_iter() {
            s.data[k * (n + 1) + l] = *v;
        }
        Ok(s)
    }

    pub fn pure(psi: &[f64]) -> Self {
        let n = psi.len() - 1;
        let mut s = Self::zeros(n, n);
        for k in 0..=n {
            for l in 0..=n {
                s.data[k * (n + 1) + l] = C64::new(psi[k] * psi[l], 0.0);
            }
        }
        s
    }

    pub fn n_min(&self) -> usize {
        self.n_min
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn offset(&self, n: usize) -> usize {
        self.offsets[n - self.n_min]
    }

    pub fn block_slice(&self, n: usize) -> &[C64] {
        let i = n - self.n_min;
        &self.data[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn block(&self, n: usize) -> ArrayView2<'_, C64> {
        ArrayView2::from_shape((n + 1, n + 1), self.block_slice(n)).expect("block shape")
    }

    /// Same state embedded in a larger sector range.
    pub fn extended(&self, n_min: usize) -> Self {
        let n_min = n_min.min(self.n_min);
        let mut out = Self::zeros(n_min, self.n_max);
        for n in self.n_min..=self.n_max {
            let dst = out.offset(n);
            out.data[dst..dst + (n + 1) * (n + 1)].copy_from_slice(self.block_slice(n));
        }
        out
    }

    pub fn sector_probabilities(&self) -> Vec<(usize, f64)> {
        (self.n_min..=self.n_max)
            .map(|n| {
                let b = self.block_slice(n);
                (n, (0..=n).map(|k| b[k * (n + 1) + k].re).sum())
            })
            .collect()
    }

    pub fn trace(&self) -> f64 {
        self.sector_probabilities().iter().map(|(_, p)| p).sum()
    }

    pub fn mean_atom_number(&self) -> f64 {
        self.sector_probabilities().iter().map(|(n, p)| *n as f64 * p).sum()
    }

    /// Expectation values summed over sectors.
    pub fn moments(&self) -> SpinMoments {
        let mut m = SpinMoments::default();
        for n in self.n_min..=self.n_max {
            m.add(&moments_slice(n, self.block_slice(n)));
        }
        m
    }

    /// `|sum_n tr(rho_n a_L^dag a_R)| / sqrt(<n_L><n_R>)`.
    pub fn coherence_g1(&self) -> Result<f64> {
        self.moments().coherence()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let mut e = 0.0f64;
        for n in self.n_min..=self.n_max {
            let d = n + 1;
            let b = self.block_slice(n);
            for k in 0..d {
                for l in k..d {
                    e = e.max((b[k * d + l] - b[l * d + k].conj()).norm());
                }
            }
        }
        e
    }

    /// First sector whose block plus `delta * I` is not positive definite.
    pub fn positivity_violation(&self, delta: f64) -> Option<usize> {
        (self.n_min..=self.n_max).find(|&n| !cholesky_ok(n + 1, self.block_slice(n), delta))
    }
}

fn cholesky_ok(d: usize, a: &[C64], delta: f64) -> bool {
    let mut l = vec![C64::default(); d * d];
    for j in 0..d {
        let mut diag = a[j * d + j].re + delta;
        for k in 0..j {
            diag -= l[j * d + k].norm_sqr();
        }
        if diag <= 0.0 || !diag.is_finite() {
            return false;
        }
        let ljj = diag.sqrt();
        l[j * d + j] = C64::new(ljj, 0.0);
        for i in j + 1..d {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k].conj();
            }
            l[i * d + j] = s / ljj;
        }
    }
    true
}

/// Tridiagonal `A` with real entries; `upper[k] = A[k][k+1]`, `lower[k] = A[k+1][k]`.
struct Tri<'a> {
    upper: &'a [f64],
    lower: &'a [f64],
}

/// `out = [A, x]` for a traceless-diagonal tridiagonal `A`.
fn commutator(d: usize, a: &Tri, x: &[C64], out: &mut [C64]) {
    for k in 0..d {
        for l in 0..d {
            let mut s = C64::default();
            if k + 1 < d {
                s += x[(k + 1) * d + l] * a.upper[k];
            }
            if k > 0 {
                s += x[(k - 1) * d + l] * a.lower[k - 1];
            }
            if l > 0 {
                s -= x[k * d + l - 1] * a.upper[l - 1];
            }
            if l + 1 < d {
                s -= x[k * d + l + 1] * a.lower[l];
            }
            out[k * d + l] = s;
        }
    }
}

struct Sector {
    n: usize,
    offset: usize,
    /// Diagonal of H.
    h_diag: Vec<f64>,
    /// Off-diagonal of H (symmetric).
    h_off: Vec<f64>,
    /// raise/2: off-diagonal of S1 and upper part of K where S2 = -i K.
    half_raise: Vec<f64>,
    neg_half_raise: Vec<f64>,
}

/// Right-hand side of the master equation on a sector range.
pub struct Liouvillian {
    noise: NoiseChannels,
    n_min: usize,
    n_max: usize,
    len: usize,
    sectors: Vec<Sector>,
}

impl Liouvillian {
    pub fn new(p: &ModelParams, noise: &NoiseChannels, n_min: usize, n_max: usize) -> Result<Self> {
        p.validate()?;
        noise.validate()?;
        let layout = SectoredDensityMatrix::zeros(n_min, n_max);
        let sectors = (n_min..=n_max)
            .map(|n| {
                let b = SpinBasis::new(n);
                let half_raise: Vec<f64> = (0..n).map(|k| 0.5 * b.raise(k)).collect();
                Sector {
                    n,
                    offset: layout.offset(n),
                    h_diag: (0..=n)
                        .map(|k| {
                            let m = b.m(k);
                            p.epsilon * m + p.u * m * m
                        })
                        .collect(),
                    h_off: half_raise.iter().map(|r| -p.j * r).collect(),
                    neg_half_raise: half_raise.iter().map(|r| -r).collect(),
                    half_raise,
                }
            })
            .collect();
        Ok(Self {
            noise: *noise,
            n_min,
            n_max,
            len: layout.len(),
            sectors,
        })
    }

    pub fn apply(&self, rho: &SectoredDensityMatrix) -> Result<SectoredDensityMatrix> {
        if rho.n_min != self.n_min || rho.n_max != self.n_max {
            return Err(Error::DimensionMismatch {
                expected: self.len,
                got: rho.len(),
            });
        }
        let mut out = SectoredDensityMatrix::zeros(self.n_min, self.n_max);
        self.rhs_into(&rho.data, &mut out.data);
        Ok(out)
    }

    fn rhs_into(&self, y: &[C64], dy: &mut [C64]) {
        let nc = &self.noise;
        let dmax = self.n_max + 1;
        let mut c = vec![C64::default(); dmax * dmax];
        let mut cc = vec![C64::default(); dmax * dmax];
        let minus_i = C64::new(0.0, -1.0);
        for sec in &self.sectors {
            let n = sec.n;
            let d = n + 1;
            let x = &y[sec.offset..sec.offset + d * d];
            let out = &mut dy[sec.offset..sec.offset + d * d];
            let c = &mut c[..d * d];
            let cc = &mut cc[..d * d];

            // -i [H, rho]
            let h = Tri {
                upper: &sec.h_off,
                lower: &sec.h_off,
            };
            commutator(d, &h, x, c);
            for k in 0..d {
                for l in 0..d {
                    let i = k * d + l;
                    let diag = (sec.h_diag[k] - sec.h_diag[l]) * x[i];
                    out[i] = minus_i * (c[i] + diag);
                }
            }

            if nc.gamma1 > 0.0 {
                let s1 = Tri {
                    upper: &sec.half_raise,
                    lower: &sec.half_raise,
                };
                commutator(d, &s1, x, c);
                commutator(d, &s1, c, cc);
                out.iter_mut().zip(cc.iter()).for_each(|(o, v)| *o -= *v * nc.gamma1);
            }
            if nc.gamma2 > 0.0 {
                // [S2, [S2, rho]] = -[K, [K, rho]]
                let k_op = Tri {
                    upper: &sec.half_raise,
                    lower: &sec.neg_half_raise,
                };
                commutator(d, &k_op, x, c);
                commutator(d, &k_op, c, cc);
                out.iter_mut().zip(cc.iter()).for_each(|(o, v)| *o += *v * nc.gamma2);
            }
            let nf = n as f64;
            for k in 0..d {
                for l in 0..d {
                    let i = k * d + l;
                    let dm = k as f64 - l as f64;
                    let loss = 0.5 * nc.gamma_l * (2.0 * nf - k as f64 - l as f64)
                        + 0.5 * nc.gamma_r * (k + l) as f64;
                    out[i] -= x[i] * (nc.gamma3 * dm * dm + loss);
                }
            }

            // Gain from sector n + 1: a_L keeps k, a_R lowers k by one.
            if n < self.n_max && (nc.gamma_l > 0.0 || nc.gamma_r > 0.0) {
                let up = &self.sectors[n + 1 - self.n_min];
                let du = d + 1;
                let src = &y[up.offset..up.offset + du * du];
                for k in 0..d {
                    let nl_k = (n + 1 - k) as f64;
                    let nr_k = (k + 1) as f64;
                    for l in 0..d {
                        let nl_l = (n + 1 - l) as f64;
                        let nr_l = (l + 1) as f64;
                        out[k * d + l] += src[k * du + l] * (nc.gamma_l * (nl_k * nl_l).sqrt())
                            + src[(k + 1) * du + l + 1] * (nc.gamma_r * (nr_k * nr_l).sqrt());
                    }
                }
            }
        }
    }
}

impl OdeSystem for Liouvillian {
    fn dim(&self) -> usize {
        self.len
    }

    fn rhs(&self, _t: f64, y: &[C64], dy: &mut [C64]) {
        self.rhs_into(y, dy);
    }
}

/// `d rho / dt` for the given parameters and noise.
pub fn apply_liouvillian(
    rho: &SectoredDensityMatrix,
    p: &ModelParams,
    nc: &NoiseChannels,
) -> Result<SectoredDensityMatrix> {
    Liouvillian::new(p, nc, rho.n_min, rho.n_max)?.apply(rho)
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolutionResult {
    pub t: Vec<f64>,
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
    pub s3: Vec<f64>,
    pub s3sq: Vec<f64>,
    pub g1: Vec<f64>,
    pub n_mean: Vec<f64>,
    pub gamma: Vec<Option<f64>>,
    pub trace: Vec<f64>,
    pub max_hermiticity_error: f64,
    #[serde(skip)]
    pub stats: OdeStats,
}

/// Integrates the master equation and samples observables on `t_grid`.
///
/// The Γ column is the logarithmic derivative of g1, which coincides with
/// that of `<S1>` whenever the atom number is conserved.
pub fn evolve(
    rho0: &SectoredDensityMatrix,
    p: &ModelParams,
    nc: &NoiseChannels,
    t_grid: &[f64],
    tol: f64,
) -> Result<EvolutionResult> {
    evolve_observed(rho0, p, nc, t_grid, tol, |_, _| Ok(()))
}

/// As [`evolve`], also handing the full state at every grid time to `observe`.
pub fn evolve_observed<F>(
    rho0: &SectoredDensityMatrix,
    p: &ModelParams,
    nc: &NoiseChannels,
    t_grid: &[f64],
    tol: f64,
    mut observe: F,
) -> Result<EvolutionResult>
where
    F: FnMut(f64, &SectoredDensityMatrix) -> Result<()>,
{
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::invalid("tol", "must be finite and > 0"));
    }
    if rho0.n_max() != p.n {
        return Err(Error::DimensionMismatch {
            expected: p.n,
            got: rho0.n_max(),
        });
    }
    let n_min = if nc.has_loss() { 0 } else { rho0.n_min() };
    let start = rho0.extended(n_min);
    let liou = Liouvillian::new(p, nc, n_min, p.n)?;

    let cap = t_grid.len();
    let mut res = EvolutionResult {
        t: Vec::with_capacity(cap),
        s1: Vec::with_capacity(cap),
        s2: Vec::with_capacity(cap),
        s3: Vec::with_capacity(cap),
        s3sq: Vec::with_capacity(cap),
        g1: Vec::with_capacity(cap),
        n_mean: Vec::with_capacity(cap),
        gamma: Vec::new(),
        trace: Vec::with_capacity(cap),
        max_hermiticity_error: 0.0,
        stats: OdeStats::default(),
    };
    let mut state = start.clone();
    let delta = 10.0 * tol;
    let stats = integrate(&liou, start.as_slice(), t_grid, OdeOptions::with_tol(tol), |_, t, y| {
        state.as_mut_slice().copy_from_slice(y);
        if let Some(sector) = state.positivity_violation(delta) {
            return Err(Error::Positivity { sector, t });
        }
        let m = state.moments();
        res.t.push(t);
        res.s1.push(m.s1());
        res.s2.push(m.s2());
        res.s3.push(m.s3);
        res.s3sq.push(m.s3sq);
        res.g1.push(m.coherence().unwrap_or(f64::NAN));
        res.n_mean.push(state.mean_atom_number());
        res.trace.push(m.trace);
        res.max_hermiticity_error = res.max_hermiticity_error.max(state.hermiticity_error());
        observe(t, &state)
    })?;
    res.stats = stats;
    let log_g1: Vec<f64> = res.g1.iter().map(|g| if *g > 0.0 { g.ln() } else { f64::NAN }).collect();
    res.gamma = log_derivative(&res.t, &log_g1)
        .into_iter()
        .map(|d| d.map(|v| -v))
        .collect();
    Ok(res)
}

/// `-d/dt log y` with second-order finite differences; `None` from the first
/// non-positive sample onward.
pub fn instantaneous_rate(t: &[f64], y: &[f64]) -> Vec<Option<f64>> {
    let logs: Vec<f64> = y.iter().map(|v| if *v > 0.0 { v.ln() } else { f64::NAN }).collect();
    log_derivative(t, &logs).into_iter().map(|d| d.map(|v| -v)).collect()
}

fn log_derivative(t: &[f64], f: &[f64]) -> Vec<Option<f64>> {
    let n = t.len();
    let valid = f.iter().position(|v| !v.is_finite()).unwrap_or(n);
    let mut out = vec![None; n];
    if valid < 2 {
        return out;
    }
    if valid == 2 {
        let d = (f[1] - f[0]) / (t[1] - t[0]);
        out[0] = Some(d);
        out[1] = Some(d);
        return out;
    }
    for i in 0..valid {
        let (a, b, c, x0, x1, x2, at) = if i == 0 {
            (0, 1, 2, t[0], t[1], t[2], 0)
        } else if i == valid - 1 {
            (i - 2, i - 1, i, t[i - 2], t[i - 1], t[i], 2)
        } else {
            (i - 1, i, i + 1, t[i - 1], t[i], t[i + 1], 1)
        };
        let h1 = x1 - x0;
        let h2 = x2 - x1;
        let d = match at {
            0 => {
                -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * f[a] + (h1 + h2) / (h1 * h2) * f[b]
                    - h1 / (h2 * (h1 + h2)) * f[c]
            }
            1 => {
                -h2 / (h1 * (h1 + h2)) * f[a] + (h2 - h1) / (h1 * h2) * f[b]
                    + h1 / (h2 * (h1 + h2)) * f[c]
            }
            _ => {
                h2 / (h1 * (h1 + h2)) * f[a] - (h1 + h2) / (h1 * h2) * f[b]
                    + (h1 + 2.0 * h2) / (h2 * (h1 + h2)) * f[c]
            }
        };
        out[i] = Some(d);
    }
    out
}

/// Mean of `-d log y / dt` over `[t0, t1]`, from the endpoint values.
pub fn average_rate(t: &[f64], y: &[f64], t0: f64, t1: f64) -> Option<f64> {
    let i0 = t.iter().position(|&x| x >= t0)?;
    let i1 = t.iter().rposition(|&x| x <= t1)?;
    if i1 <= i0 || y[i0] <= 0.0 || y[i1] <= 0.0 {
        return None;
    }
    Some(-(y[i1].ln() - y[i0].ln()) / (t[i1] - t[i0]))
}

/// Centered moving average of the defined entries over a window of width `w`.
pub fn boxcar(t: &[f64], v: &[Option<f64>], w: f64) -> Vec<Option<f64>> {
    (0..t.len())
        .map(|i| {
            v[i]?;
            let (mut s, mut c) = (0.0, 0usize);
            for j in 0..t.len() {
                if (t[j] - t[i]).abs() <= 0.5 * w {
                    if let Some(x) = v[j] {
                        s += x;
                        c += 1;
                    }
                }
            }
            Some(s / c as f64)
        })
        .collect()
}

/// Uniform grid `0, dt, ..., t_end`.
pub fn uniform_grid(t_end: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| t_end * i as f64 / steps as f64).collect()
}
