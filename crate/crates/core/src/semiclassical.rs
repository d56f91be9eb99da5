//! Truncated-Wigner ensemble on the Bloch sphere.
//!
//! Points are unit vectors `(sin θ cos φ, sin θ sin φ, cos θ)`; the classical
//! spin has length `N/2`, so `n = (N/2) cos θ`. Each trajectory owns a
//! ChaCha8 stream selected by its index, so results do not depend on how
//! trajectories are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lindblad::NoiseChannels;
use crate::model::{characteristic_params, ModelParams};

pub type Vec3 = [f64; 3];

const POLE: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePoint {
    pub theta: f64,
    pub phi: f64,
}

impl PhasePoint {
    pub fn to_vec3(self) -> Vec3 {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    pub fn from_vec3(v: Vec3) -> Self {
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        Self {
            theta: (v[2] / r).clamp(-1.0, 1.0).acos(),
            phi: v[1].atan2(v[0]),
        }
    }

    pub fn near_pole(self) -> bool {
        self.theta.cos().abs() > POLE
    }
}

#[derive(Debug, Clone)]
pub struct PhaseEnsemble {
    pub n: usize,
    pub seed: u64,
    pub points: Vec<PhasePoint>,
}

fn trajectory_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Phase and population-imbalance spreads `(var φ, var cos θ)` of the
/// squeezed Gaussian ground state.
pub fn ground_variances(p: &ModelParams) -> (f64, f64) {
    let xi2 = characteristic_params(p).xi.powi(2);
    let n = p.n as f64;
    (xi2 / n, 1.0 / (xi2 * n))
}

fn sample_point(rng: &mut ChaCha8Rng, sd_phi: f64, sd_c: f64) -> Vec3 {
    let phi = Normal::new(0.0, sd_phi).expect("finite sd").sample(rng);
    let dist_c = Normal::new(0.0, sd_c).expect("finite sd");
    let c = loop {
        let c: f64 = dist_c.sample(rng);
        if c.abs() < 1.0 {
            break c;
        }
    };
    let st = (1.0 - c * c).sqrt();
    [st * phi.cos(), st * phi.sin(), c]
}

/// Samples `m` points of the ground-state Wigner distribution centered on
/// `(θ, φ) = (π/2, 0)`.
pub fn sample_ground_wigner(p: &ModelParams, m: usize, seed: u64) -> Result<PhaseEnsemble> {
    check_gaussian_regime(p)?;
    if m == 0 {
        return Err(Error::invalid("trajectories", "must be >= 1"));
    }
    let (vp, vc) = ground_variances(p);
    let points = (0..m)
        .into_par_iter()
        .map(|i| PhasePoint::from_vec3(sample_point(&mut trajectory_rng(seed, i), vp.sqrt(), vc.sqrt())))
        .collect();
    Ok(PhaseEnsemble { n: p.n, seed, points })
}

fn check_gaussian_regime(p: &ModelParams) -> Result<()> {
    p.validate()?;
    let u = p.u_dimless();
    if u >= (p.n as f64).powi(2) {
        return Err(Error::FockRegime { u });
    }
    Ok(())
}

fn rot_x(v: Vec3, a: f64) -> Vec3 {
    let (s, c) = a.sin_cos();
    [v[0], v[1] * c - v[2] * s, v[1] * s + v[2] * c]
}

fn rot_y(v: Vec3, a: f64) -> Vec3 {
    let (s, c) = a.sin_cos();
    [v[0] * c + v[2] * s, v[1], -v[0] * s + v[2] * c]
}

fn rot_z(v: Vec3, a: f64) -> Vec3 {
    let (s, c) = a.sin_cos();
    [v[0] * c - v[1] * s, v[0] * s + v[1] * c, v[2]]
}

/// Right-handed rotation of `v` about spin axis `axis` (1, 2 or 3).
pub fn rotate(v: Vec3, axis: usize, angle: f64) -> Vec3 {
    match axis {
        1 => rot_x(v, angle),
        2 => rot_y(v, angle),
        3 => rot_z(v, angle),
        _ => panic!("spin axis must be 1, 2 or 3"),
    }
}

/// Classical energy `ε S3 - J S1 + U S3²` of a unit vector on the sphere of
/// radius `N/2`.
pub fn classical_energy(v: Vec3, p: &ModelParams) -> f64 {
    let s = p.n as f64 / 2.0;
    p.epsilon * s * v[2] - p.j * s * v[0] + p.u * s * s * v[2] * v[2]
}

fn strang(v: Vec3, p: &ModelParams, tau: f64) -> Vec3 {
    let s = p.n as f64 / 2.0;
    let v = rot_x(v, -0.5 * p.j * tau);
    let v = rot_z(v, (p.epsilon + 2.0 * p.u * s * v[2]) * tau);
    rot_x(v, -0.5 * p.j * tau)
}

/// One fourth-order step of `dS/dt = ∇H × S`, composed from exact rotations
/// (tunneling about S1, interaction shear about S3) with Yoshida weights.
pub fn classical_flow(v: Vec3, p: &ModelParams, dt: f64) -> Vec3 {
    let cbrt2 = 2f64.cbrt();
    let w1 = 1.0 / (2.0 - cbrt2);
    let w0 = -cbrt2 * w1;
    let v = strang(v, p, w1 * dt);
    let v = strang(v, p, w0 * dt);
    strang(v, p, w1 * dt)
}

/// [`classical_flow`] on a [`PhasePoint`]; the flag marks pole-adjacent
/// results where `φ` is ill-defined.
pub fn classical_flow_point(pt: PhasePoint, p: &ModelParams, dt: f64) -> (PhasePoint, bool) {
    let out = PhasePoint::from_vec3(classical_flow(pt.to_vec3(), p, dt));
    (out, out.near_pole())
}

/// Rigid rotation about `axis` by `δ ~ N(0, 2γ dt)`.
pub fn stochastic_kick(v: Vec3, axis: usize, gamma: f64, dt: f64, rng: &mut ChaCha8Rng) -> Vec3 {
    if gamma <= 0.0 {
        return v;
    }
    let delta = Normal::new(0.0, (2.0 * gamma * dt).sqrt()).expect("finite sd").sample(rng);
    rotate(v, axis, delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoherenceEstimate {
    /// `(1 + 1/N) |<S+>| / sqrt(<n_L><n_R>)` from the sampled unit vectors;
    /// the factor restores the Wigner radius `sqrt(s(s+1))`.
    pub direct: f64,
    pub gaussian: f64,
    /// Principal variances of the tangent-plane covariance.
    pub var_a: f64,
    pub var_b: f64,
    pub var_phi: f64,
    pub var_n: f64,
    pub stderr: f64,
    pub excluded: usize,
}

impl CoherenceEstimate {
    pub fn estimators_disagree(&self) -> bool {
        (self.direct - self.gaussian).abs() > 0.05 * self.direct.abs().max(1e-300)
    }
}

/// Both coherence estimators for a set of unit vectors.
pub fn ensemble_coherence(points: &[Vec3], n: usize) -> CoherenceEstimate {
    let m = points.len() as f64;
    let nf = n as f64;
    let mut mean = [0.0; 3];
    for v in points {
        for i in 0..3 {
            mean[i] += v[i];
        }
    }
    mean.iter_mut().for_each(|x| *x /= m);
    let radius_fix = 1.0 + 1.0 / nf;
    let transverse = (mean[0] * mean[0] + mean[1] * mean[1]).sqrt();
    let direct = radius_fix * transverse / (1.0 - mean[2] * mean[2]).max(1e-300).sqrt();

    // Rotate the mean direction onto +x: first about z, then about y.
    let az = mean[1].atan2(mean[0]);
    let el = mean[2].atan2(transverse);
    let mut sum = [0.0; 2];
    let mut sxx = 0.0;
    let mut tangent = Vec::with_capacity(points.len());
    for v in points {
        let w = rot_y(rot_z(*v, -az), el);
        sxx += w[0] * w[0];
        if w[2].abs() > POLE {
            continue;
        }
        let t = [w[1].atan2(w[0]), w[2]];
        sum[0] += t[0];
        sum[1] += t[1];
        tangent.push(t);
    }
    let kept = tangent.len() as f64;
    let mu = [sum[0] / kept, sum[1] / kept];
    let (mut cpp, mut ccc, mut cpc) = (0.0, 0.0, 0.0);
    for t in &tangent {
        let a = t[0] - mu[0];
        let b = t[1] - mu[1];
        cpp += a * a;
        ccc += b * b;
        cpc += a * b;
    }
    let denom = (kept - 1.0).max(1.0);
    cpp /= denom;
    ccc /= denom;
    cpc /= denom;
    let half_tr = 0.5 * (cpp + ccc);
    let disc = (0.25 * (cpp - ccc).powi(2) + cpc * cpc).sqrt();
    let var_a = half_tr + disc;
    let var_b = half_tr - disc;
    let gaussian = crate::bosonic::gaussian_coherence(nf, var_a, var_b);

    let mean_x = mean[0] * az.cos() * el.cos() + mean[1] * az.sin() * el.cos() + mean[2] * el.sin();
    let var_x = (sxx / m - mean_x * mean_x).max(0.0) * m / (m - 1.0).max(1.0);
    CoherenceEstimate {
        direct,
        gaussian,
        var_a,
        var_b,
        var_phi: cpp,
        var_n: 0.25 * nf * nf * ccc,
        stderr: radius_fix * (var_x / m).sqrt(),
        excluded: points.len() - tangent.len(),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SemiclassicalOptions {
    pub trajectories: usize,
    pub seed: u64,
    /// Defaults to `min(0.02/ω_J, 0.1/γ_max)`.
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SemiclassicalResult {
    pub t: Vec<f64>,
    pub direct: Vec<f64>,
    pub gaussian: Vec<f64>,
    pub var_phi: Vec<f64>,
    pub var_n: Vec<f64>,
    pub stderr: Vec<f64>,
    pub pole_points: Vec<usize>,
}

pub fn default_dt(p: &ModelParams, nc: &NoiseChannels) -> f64 {
    let w = characteristic_params(p).omega_j;
    let g = nc.max_rate();
    let dt = 0.02 / w;
    if g > 0.0 {
        dt.min(0.1 / g)
    } else {
        dt
    }
}

/// Propagates a sampled ground-state ensemble with flow-then-kick splitting
/// and records both coherence estimators on `t_grid`.
pub fn run_ensemble(
    p: &ModelParams,
    nc: &NoiseChannels,
    t_grid: &[f64],
    opts: SemiclassicalOptions,
) -> Result<SemiclassicalResult> {
    check_gaussian_regime(p)?;
    nc.validate()?;
    if nc.has_loss() {
        return Err(Error::invalid("noise", "loss channels have no phase-space representation here"));
    }
    if opts.trajectories < 2 {
        return Err(Error::invalid("trajectories", "must be >= 2"));
    }
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("t_grid", "must be non-empty and strictly increasing"));
    }
    let dt_max = opts.dt.unwrap_or_else(|| default_dt(p, nc));
    if !(dt_max > 0.0 && dt_max.is_finite()) {
        return Err(Error::invalid("dt", "must be finite and > 0"));
    }
    let (vp, vc) = ground_variances(p);
    let (sd_p, sd_c) = (vp.sqrt(), vc.sqrt());
    let rates = [nc.gamma1, nc.gamma2, nc.gamma3];
    let t0 = t_grid[0];

    let paths: Vec<Vec<Vec3>> = (0..opts.trajectories)
        .into_par_iter()
        .map(|i| {
            let mut rng = trajectory_rng(opts.seed, i);
            let mut v = sample_point(&mut rng, sd_p, sd_c);
            let mut out = Vec::with_capacity(t_grid.len());
            let mut t = t0;
            for &target in t_grid {
                let span = target - t;
                if span > 0.0 {
                    let steps = (span / dt_max).ceil().max(1.0) as usize;
                    let h = span / steps as f64;
                    for _ in 0..steps {
                        v = classical_flow(v, p, h);
                        for (axis, &g) in rates.iter().enumerate() {
                            v = stochastic_kick(v, axis + 1, g, h, &mut rng);
                        }
                    }
                }
                t = target;
                out.push(v);
            }
            out
        })
        .collect();

    let mut res = SemiclassicalResult {
        t: t_grid.to_vec(),
        direct: vec![],
        gaussian: vec![],
        var_phi: vec![],
        var_n: vec![],
        stderr: vec![],
        pole_points: vec![],
    };
    let mut slice = Vec::with_capacity(opts.trajectories);
    for (j, &t) in t_grid.iter().enumerate() {
        slice.clear();
        slice.extend(paths.iter().map(|path| path[j]));
        let est = ensemble_coherence(&slice, p.n);
        if est.estimators_disagree() {
            log::warn!(
                "t = {t:.4}: direct ({:.4}) and Gaussian ({:.4}) estimators differ by more than 5%",
                est.direct,
                est.gaussian
            );
        }
        res.direct.push(est.direct);
        res.gaussian.push(est.gaussian);
        res.var_phi.push(est.var_phi);
        res.var_n.push(est.var_n);
        res.stderr.push(est.stderr);
        res.pole_points.push(est.excluded);
    }
    Ok(res)
}
