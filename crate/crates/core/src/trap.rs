//! Double-well mean-field solver and two-mode parameter extraction.
//!
//! The longitudinal problem is solved on a 1D grid in oscillator units of the
//! axial trap (`a_x = sqrt(hbar / m omega_x)`, energies in `hbar omega_x`).
//! The transverse degrees of freedom enter through a local equation of state:
//! at linear density `n` the transverse profile is the ground state of the
//! radial 2D GP equation, which depends only on `kappa = a_s n`. The table
//! [`TransverseEos`] holds its chemical potential and on-axis density.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::constants::{H, HBAR, RB87_MASS, RB87_SCATTERING_LENGTH};
use crate::error::{Error, Result};
use crate::tridiag::{SymTridiag, TridiagLu};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSpec {
    /// Well separation (m).
    pub d: f64,
    /// Barrier height as `E / h` (Hz).
    #[serde(rename = "V0")]
    pub v0: f64,
    /// Axial trap frequency (rad/s).
    pub omega_x: f64,
    /// Transverse trap frequency (rad/s).
    pub omega_perp: f64,
    #[serde(rename = "N")]
    pub n: usize,
    /// Atomic mass (kg).
    #[serde(default = "default_mass")]
    pub mass: f64,
    /// s-wave scattering length (m).
    #[serde(default = "default_a_s")]
    pub a_s: f64,
}

fn default_mass() -> f64 {
    RB87_MASS
}

fn default_a_s() -> f64 {
    RB87_SCATTERING_LENGTH
}

impl TrapSpec {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, "must be finite and > 0"))
            }
        };
        pos("d", self.d)?;
        pos("omega_x", self.omega_x)?;
        pos("omega_perp", self.omega_perp)?;
        pos("mass", self.mass)?;
        if !(self.v0.is_finite() && self.v0 >= 0.0) {
            return Err(Error::invalid("V0", "must be finite and >= 0"));
        }
        if !(self.a_s.is_finite() && self.a_s >= 0.0) {
            return Err(Error::invalid("a_s", "must be finite and >= 0"));
        }
        if self.n < 1 {
            return Err(Error::invalid("N", "must be >= 1"));
        }
        Ok(())
    }

    pub fn axial_length(&self) -> f64 {
        (HBAR / (self.mass * self.omega_x)).sqrt()
    }

    pub fn transverse_length(&self) -> f64 {
        (HBAR / (self.mass * self.omega_perp)).sqrt()
    }

    /// Axial oscillator energy as a frequency (Hz).
    pub fn f_x(&self) -> f64 {
        self.omega_x / (2.0 * PI)
    }

    /// Quasi-1D coupling `g_1D = 2 hbar omega_perp a_s` (J m).
    pub fn g1d(&self) -> f64 {
        2.0 * HBAR * self.omega_perp * self.a_s
    }

    /// Longitudinal potential `V_par(x)` in joules.
    pub fn potential(&self, x: f64) -> f64 {
        let half = 0.5 * self.d;
        if x.abs() <= half {
            H * self.v0 * (PI * x / self.d).cos().powi(2)
        } else {
            0.5 * self.mass * self.omega_x.powi(2) * (x.abs() - half).powi(2)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_points")]
    pub points: usize,
    /// Grid length in units of `d`.
    #[serde(default = "default_extent")]
    pub extent: f64,
}

fn default_points() -> usize {
    2048
}

fn default_extent() -> f64 {
    6.0
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points: default_points(),
            extent: default_extent(),
        }
    }
}

/// Radial ground-state equation of state of a harmonically confined 2D slice.
///
/// `mu(kappa)` is the transverse chemical potential in units of
/// `hbar omega_perp` (1 at `kappa = 0`), `center(kappa)` the on-axis density
/// in units of `1 / (pi a_perp^2)` per atom (1 at `kappa = 0`).
#[derive(Debug, Clone)]
pub struct TransverseEos {
    kappa: Vec<f64>,
    mu: Vec<f64>,
    dmu: Vec<f64>,
    center: Vec<f64>,
}

impl TransverseEos {
    pub fn shared() -> &'static TransverseEos {
        static EOS: OnceLock<TransverseEos> = OnceLock::new();
        EOS.get_or_init(|| TransverseEos::build(200, 1e-5, 300.0).expect("radial equation of state"))
    }

    pub fn build(points: usize, k_min: f64, k_max: f64) -> Result<Self> {
        let mut kappa = vec![0.0];
        let ratio = (k_max / k_min).powf(1.0 / (points - 1) as f64);
        kappa.extend((0..points).map(|i| k_min * ratio.powi(i as i32)));
        let mut mu = Vec::with_capacity(kappa.len());
        let mut center = Vec::with_capacity(kappa.len());
        let mut guess: Option<(f64, Vec<f64>)> = None;
        for &k in &kappa {
            let (m, c, dens) = radial_ground_state(k, guess.as_ref())?;
            mu.push(m);
            center.push(c);
            guess = Some((k, dens));
        }
        // Remove the discretization offset of the noninteracting limit.
        let (m0, c0) = (mu[0], center[0]);
        mu.iter_mut().for_each(|m| *m += 1.0 - m0);
        center.iter_mut().for_each(|c| *c /= c0);
        let dmu = derivative(&kappa, &mu);
        Ok(Self { kappa, mu, dmu, center })
    }

    fn locate(&self, k: f64) -> (usize, f64) {
        let k = k.max(0.0);
        let last = self.kappa.len() - 1;
        if k >= self.kappa[last] {
            return (last - 1, (k - self.kappa[last - 1]) / (self.kappa[last] - self.kappa[last - 1]));
        }
        let i = self.kappa.partition_point(|&x| x <= k).saturating_sub(1).min(last - 1);
        (i, (k - self.kappa[i]) / (self.kappa[i + 1] - self.kappa[i]))
    }

    fn interp(&self, table: &[f64], k: f64) -> f64 {
        let (i, w) = self.locate(k);
        table[i] * (1.0 - w) + table[i + 1] * w
    }

    pub fn mu(&self, k: f64) -> f64 {
        self.interp(&self.mu, k)
    }

    pub fn dmu(&self, k: f64) -> f64 {
        self.interp(&self.dmu, k)
    }

    pub fn center(&self, k: f64) -> f64 {
        self.interp(&self.center, k)
    }
}

fn derivative(x: &[f64], f: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let (a, b) = if i == 0 {
                (0, 1)
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            if i == 0 || i == n - 1 {
                (f[b] - f[a]) / (x[b] - x[a])
            } else {
                let h1 = x[i] - x[a];
                let h2 = x[b] - x[i];
                -h2 / (h1 * (h1 + h2)) * f[a] + (h2 - h1) / (h1 * h2) * f[i] + h1 / (h2 * (h1 + h2)) * f[b]
            }
        })
        .collect()
}

/// One backward-Euler step of the normalized gradient flow,
/// `(1 + tau H) psi' = psi`, followed by renormalization with weight `w`.
fn gradient_flow_step(diag: &[f64], off: &[f64], tau: f64, psi: &mut [f64], w: f64) {
    let d: Vec<f64> = diag.iter().map(|x| 1.0 + tau * x).collect();
    let o: Vec<f64> = off.iter().map(|x| tau * x).collect();
    TridiagLu::factor(&o, &d, &o, f64::MIN_POSITIVE).solve(psi);
    let n = (psi.iter().map(|p| p * p).sum::<f64>() * w).sqrt();
    psi.iter_mut().for_each(|p| *p /= n);
}

/// Radial GP `[-lap/2 + r^2/2 + 4 pi kappa |chi|^2] chi = mu chi` with
/// `int |chi|^2 2 pi r dr = 1`, in transverse oscillator units. Returns
/// `(mu, pi |chi(0)|^2, psi)` where `psi = sqrt(2 pi r dr) chi` is the
/// unit-norm cell amplitude.
fn radial_ground_state(kappa: f64, guess: Option<&(f64, Vec<f64>)>) -> Result<(f64, f64, Vec<f64>)> {
    const NR: usize = 1500;
    let r_max = 2.0 * kappa.powf(0.25) + 7.0;
    let dr = r_max / NR as f64;
    let r: Vec<f64> = (0..NR).map(|i| (i as f64 + 0.5) * dr).collect();
    let mut main0 = vec![0.0; NR];
    let mut off = vec![0.0; NR - 1];
    for i in 0..NR {
        let rp = r[i] + 0.5 * dr;
        let rm = if i == 0 { 0.0 } else { r[i] - 0.5 * dr };
        main0[i] = (rp + rm) / (2.0 * r[i] * dr * dr) + 0.5 * r[i] * r[i];
        if i + 1 < NR {
            off[i] = -rp / (2.0 * dr * dr * (r[i] * r[i + 1]).sqrt());
        }
    }
    // |chi_i|^2 = psi_i^2 / (2 pi r_i dr)
    let cell: Vec<f64> = r.iter().map(|ri| 2.0 * PI * ri * dr).collect();
    let mut psi: Vec<f64> = match guess {
        Some((_, prev)) if prev.len() == NR => prev.clone(),
        _ => r.iter().zip(&cell).map(|(x, c)| ((-x * x).exp() / PI * c).sqrt()).collect(),
    };
    let g = 4.0 * PI * kappa;
    let tau = 2.0;
    let max_iter = 20_000;
    let mut diag = vec![0.0; NR];
    for it in 0..max_iter {
        for i in 0..NR {
            diag[i] = main0[i] + g * psi[i] * psi[i] / cell[i];
        }
        let prev = psi.clone();
        gradient_flow_step(&diag, &off, tau, &mut psi, 1.0);
        let peak = psi.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let change = psi.iter().zip(&prev).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())) / peak;
        if change < 1e-13 {
            let t = SymTridiag::new(
                (0..NR).map(|i| main0[i] + g * psi[i] * psi[i] / cell[i]).collect(),
                off.clone(),
            );
            let mut hpsi = vec![0.0; NR];
            t.matvec(&psi, &mut hpsi);
            let mu: f64 = psi.iter().zip(&hpsi).map(|(a, b)| a * b).sum();
            return Ok((mu, PI * psi[0] * psi[0] / cell[0], psi));
        }
        if it + 1 == max_iter {
            return Err(Error::NoConvergence {
                what: "radial ground state",
                iterations: max_iter,
                residual: change,
            });
        }
    }
    unreachable!()
}

/// Converged longitudinal ground state and its low-lying modes.
#[derive(Debug, Clone)]
pub struct GroundSolution {
    /// Grid positions (m).
    pub x: Vec<f64>,
    /// Grid spacing (m).
    pub dx: f64,
    /// Normalized `phi_0` in `m^{-1/2}`.
    pub phi0: Vec<f64>,
    /// Longitudinal ground-state energy with the on-axis mean field (Hz).
    pub mu_parallel: f64,
    /// 1D chemical potential without the transverse zero point (Hz).
    pub mu_chemical: f64,
    /// Transverse zero-point energy `hbar omega_perp` (Hz).
    pub transverse_zero_point: f64,
    pub residual: f64,
    pub iterations: usize,
    // Scaled-unit working data for the excited-mode problem.
    veff: Vec<f64>,
    kappa: Vec<f64>,
    dx_scaled: f64,
}

struct Scaled {
    x: Vec<f64>,
    dx: f64,
    v: Vec<f64>,
    /// `a_s N / a_x`: converts `|phi|^2` (scaled) into `kappa`.
    kappa_per_density: f64,
    /// `omega_perp / omega_x`.
    w_ratio: f64,
}

fn scaled_problem(spec: &TrapSpec, grid: &GridSpec) -> Result<Scaled> {
    spec.validate()?;
    if grid.points < 16 || !(grid.extent > 1.0) {
        return Err(Error::invalid("grid", "needs >= 16 points and extent > 1"));
    }
    let ax = spec.axial_length();
    let length = grid.extent * spec.d / ax;
    let dx = length / grid.points as f64;
    let x: Vec<f64> = (0..grid.points).map(|i| -0.5 * length + (i as f64 + 0.5) * dx).collect();
    let e_unit = HBAR * spec.omega_x;
    let v = x.iter().map(|xi| spec.potential(xi * ax) / e_unit).collect();
    Ok(Scaled {
        x,
        dx,
        v,
        kappa_per_density: spec.a_s * spec.n as f64 / ax,
        w_ratio: spec.omega_perp / spec.omega_x,
    })
}

fn mean_field(s: &Scaled, eos: &TransverseEos, phi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let kappa: Vec<f64> = phi.iter().map(|p| s.kappa_per_density * p * p).collect();
    let veff = s
        .v
        .iter()
        .zip(&kappa)
        .map(|(v, k)| v + s.w_ratio * (eos.mu(*k) - 1.0))
        .collect();
    (veff, kappa)
}

fn fd_hamiltonian(veff: &[f64], dx: f64) -> SymTridiag {
    let t = 0.5 / (dx * dx);
    SymTridiag::new(veff.iter().map(|v| v + 2.0 * t).collect(), vec![-t; veff.len() - 1])
}

fn normalize(phi: &mut [f64], dx: f64) {
    let n = (phi.iter().map(|p| p * p).sum::<f64>() * dx).sqrt();
    phi.iter_mut().for_each(|p| *p /= n);
}

fn symmetrize(phi: &mut [f64]) {
    let n = phi.len();
    for i in 0..n / 2 {
        let m = 0.5 * (phi[i] + phi[n - 1 - i]);
        phi[i] = m;
        phi[n - 1 - i] = m;
    }
}

fn imaginary_time(s: &Scaled, eos: &TransverseEos, steps: usize, dtau: f64) -> Vec<f64> {
    let n = s.x.len();
    let length = n as f64 * s.dx;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let kin: Vec<f64> = (0..n)
        .map(|i| {
            let j = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
            let k = 2.0 * PI * j / length;
            (-0.5 * k * k * dtau).exp()
        })
        .collect();
    let width = 1.0 + s.x.iter().fold(0.0f64, |a, x| a.max(x.abs())) / 4.0;
    let mut phi: Vec<f64> = s.x.iter().map(|x| (-(x * x) / (2.0 * width * width)).exp()).collect();
    normalize(&mut phi, s.dx);
    let mut buf = vec![C64::default(); n];
    for _ in 0..steps {
        let (veff, _) = mean_field(s, eos, &phi);
        for i in 0..n {
            buf[i] = C64::new(phi[i] * (-0.5 * dtau * veff[i]).exp(), 0.0);
        }
        fwd.process(&mut buf);
        buf.iter_mut().zip(&kin).for_each(|(b, k)| *b *= *k);
        inv.process(&mut buf);
        let scale = 1.0 / n as f64;
        for i in 0..n {
            phi[i] = buf[i].re * scale;
        }
        let (veff, _) = mean_field(s, eos, &phi);
        for i in 0..n {
            phi[i] *= (-0.5 * dtau * veff[i]).exp();
        }
        symmetrize(&mut phi);
        normalize(&mut phi, s.dx);
    }
    phi
}

/// Ground state of the longitudinal mean-field equation.
///
/// Imaginary-time split-step propagation provides the starting point; a
/// self-consistent finite-difference eigen-iteration with density mixing then
/// drives the residual of the discretized equation below `1e-8`.
pub fn solve_gp_ground(spec: &TrapSpec, grid: &GridSpec) -> Result<GroundSolution> {
    let s = scaled_problem(spec, grid)?;
    let eos = TransverseEos::shared();
    let mut phi = imaginary_time(&s, eos, 1500, 0.01);

    let tol = 1e-8;
    let max_iter = 20_000;
    let tau = 50.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        let (veff, _) = mean_field(&s, eos, &phi);
        let ham = fd_hamiltonian(&veff, s.dx);
        residual = gp_residual(&ham, &phi, s.dx).0;
        if residual <= tol {
            break;
        }
        gradient_flow_step(&ham.diag, &ham.off, tau, &mut phi, s.dx);
        symmetrize(&mut phi);
    }
    if residual > tol {
        return Err(Error::NoConvergence {
            what: "longitudinal ground state",
            iterations,
            residual,
        });
    }

    let (veff, kappa) = mean_field(&s, eos, &phi);
    let ham = fd_hamiltonian(&veff, s.dx);
    let mut hphi = vec![0.0; phi.len()];
    ham.matvec(&phi, &mut hphi);
    let mu_chem: f64 = phi.iter().zip(&hphi).map(|(a, b)| a * b).sum::<f64>() * s.dx;

    let n = phi.len();
    let inv_dx2 = 1.0 / (s.dx * s.dx);
    let mut kinetic = 0.0;
    let mut potential = 0.0;
    let mut on_axis = 0.0;
    for i in 0..n {
        let left = if i > 0 { phi[i - 1] } else { 0.0 };
        let right = if i + 1 < n { phi[i + 1] } else { 0.0 };
        kinetic += -0.5 * phi[i] * (left - 2.0 * phi[i] + right) * inv_dx2;
        potential += s.v[i] * phi[i] * phi[i];
        // g n_3D(x, 0) = 4 hbar omega_perp kappa center(kappa)
        on_axis += s.w_ratio * 4.0 * kappa[i] * eos.center(kappa[i]) * phi[i] * phi[i];
    }
    let fx = spec.f_x();
    let ax = spec.axial_length();
    Ok(GroundSolution {
        x: s.x.iter().map(|x| x * ax).collect(),
        dx: s.dx * ax,
        phi0: phi.iter().map(|p| p / ax.sqrt()).collect(),
        mu_parallel: (kinetic + potential + on_axis) * s.dx * fx,
        mu_chemical: mu_chem * fx,
        transverse_zero_point: spec.omega_perp / (2.0 * PI),
        residual,
        iterations,
        veff,
        kappa,
        dx_scaled: s.dx,
    })
}

/// L2 residual `||H phi - mu phi||` and the Rayleigh quotient `mu`.
fn gp_residual(ham: &SymTridiag, phi: &[f64], dx: f64) -> (f64, f64) {
    let mut hphi = vec![0.0; phi.len()];
    ham.matvec(phi, &mut hphi);
    let mu: f64 = phi.iter().zip(&hphi).map(|(a, b)| a * b).sum::<f64>() * dx;
    let r = (hphi.iter().zip(phi).map(|(h, p)| (h - mu * p).powi(2)).sum::<f64>() * dx).sqrt();
    (r, mu)
}

#[derive(Debug, Clone)]
pub struct Modes {
    /// `E_j = lambda_j - lambda_0` (Hz), `E_0 = 0`.
    pub energies: Vec<f64>,
    /// Normalized mode functions in `m^{-1/2}`, sign fixed so that the first
    /// extremum is positive.
    pub phi: Vec<Vec<f64>>,
}

/// Eigenmodes of the linear operator `-hbar^2/2m d^2/dx^2 + V_eff[phi_0] - mu`.
pub fn excited_modes(spec: &TrapSpec, ground: &GroundSolution, count: usize) -> Result<Modes> {
    let ham = fd_hamiltonian(&ground.veff, ground.dx_scaled);
    let eig = ham.lowest(count.max(1))?;
    let fx = spec.f_x();
    let ax = spec.axial_length();
    Ok(Modes {
        energies: eig.values.iter().map(|l| (l - eig.values[0]) * fx).collect(),
        phi: (0..eig.values.len())
            .map(|j| {
                let norm = 1.0 / (ground.dx_scaled.sqrt() * ax.sqrt());
                eig.vector(j).iter().map(|v| v * norm).collect()
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityFlags {
    pub two_mode_valid: bool,
    pub fock: bool,
    pub loss_enhanced: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoModeExtraction {
    #[serde(rename = "V0")]
    pub v0: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub mu_parallel: f64,
    pub mu_chemical: f64,
    /// `E_1..E_3` (Hz).
    pub energies: Vec<f64>,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "U")]
    pub u: f64,
    pub u_dimless: f64,
    pub xi: f64,
    /// Josephson frequency `omega_J / 2 pi` (Hz).
    pub omega_j_hz: f64,
    /// `int g |phi_L|^2 |phi_R|^2 / int g |phi_L|^4`, the neglected cross term.
    pub cross_ratio: f64,
    pub flags: ValidityFlags,
}

/// Localized modes `(phi_0 ± phi_1)/sqrt(2)` in `m^{-1/2}`.
pub fn localized_modes(phi0: &[f64], phi1: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let l = phi0.iter().zip(phi1).map(|(a, b)| s * (a + b)).collect();
    let r = phi0.iter().zip(phi1).map(|(a, b)| s * (a - b)).collect();
    (l, r)
}

/// Two-mode parameters from the ground state and first excited mode.
///
/// `J = E_1`; `U = int g_eff |phi_L|^4` where `g_eff = d mu_loc / d n` is the
/// local interaction strength of the transverse equation of state (it equals
/// `g_1D` in the quasi-1D limit).
pub fn extract_two_mode(spec: &TrapSpec, ground: &GroundSolution, modes: &Modes) -> Result<TwoModeExtraction> {
    if modes.phi.len() < 2 {
        return Err(Error::invalid("modes", "need at least the first excited mode"));
    }
    let eos = TransverseEos::shared();
    let (l, r) = localized_modes(&ground.phi0, &modes.phi[1]);
    // g_eff in J m: hbar omega_perp a_s mu'(kappa)
    let g_unit = HBAR * spec.omega_perp * spec.a_s;
    let mut u_ll = 0.0;
    let mut u_lr = 0.0;
    for i in 0..l.len() {
        let g = g_unit * eos.dmu(ground.kappa[i]);
        u_ll += g * l[i].powi(4);
        u_lr += g * l[i] * l[i] * r[i] * r[i];
    }
    u_ll *= ground.dx / H;
    u_lr *= ground.dx / H;
    let j = modes.energies[1];
    if !(j > 0.0) {
        return Err(Error::invalid("J", "tunneling splitting must be positive"));
    }
    let nf = spec.n as f64;
    let u_dimless = nf * u_ll / j;
    let xi = (1.0 + u_dimless).powf(0.25);
    let xi2 = xi * xi;
    Ok(TwoModeExtraction {
        v0: spec.v0,
        n: spec.n,
        mu_parallel: ground.mu_parallel,
        mu_chemical: ground.mu_chemical,
        energies: modes.energies.iter().skip(1).copied().collect(),
        j,
        u: u_ll,
        u_dimless,
        xi,
        omega_j_hz: (j * (j + nf * u_ll)).sqrt(),
        cross_ratio: u_lr / u_ll,
        flags: ValidityFlags {
            two_mode_valid: spec.v0 > ground.mu_parallel,
            fock: xi2 > nf,
            loss_enhanced: xi2 > 2.0 * nf.sqrt(),
        },
    })
}

/// Ground state, four modes and the two-mode extraction in one call.
pub fn analyze(spec: &TrapSpec, grid: &GridSpec) -> Result<(GroundSolution, Modes, TwoModeExtraction)> {
    let g = solve_gp_ground(spec, grid)?;
    let m = excited_modes(spec, &g, 4)?;
    let e = extract_two_mode(spec, &g, &m)?;
    Ok((g, m, e))
}

/// Extraction over every `(N, V0)` pair, computed in parallel; rows are
/// ordered by `N` then `V0`.
pub fn sweep(base: &TrapSpec, grid: &GridSpec, ns: &[usize], v0s: &[f64]) -> Vec<Result<TwoModeExtraction>> {
    let points: Vec<(usize, f64)> = ns.iter().flat_map(|&n| v0s.iter().map(move |&v| (n, v))).collect();
    points
        .par_iter()
        .map(|&(n, v0)| {
            let spec = TrapSpec { n, v0, ..*base };
            analyze(&spec, grid).map(|(_, _, e)| e)
        })
        .collect()
}

/// Barrier height at which `mu_par(V0) = V0`, by bisection in `[lo, hi]` (Hz).
pub fn validity_boundary(base: &TrapSpec, grid: &GridSpec, lo: f64, hi: f64, tol_hz: f64) -> Result<f64> {
    let f = |v0: f64| -> Result<f64> {
        let spec = TrapSpec { v0, ..*base };
        Ok(v0 - solve_gp_ground(&spec, grid)?.mu_parallel)
    };
    let (mut a, mut b) = (lo, hi);
    let (mut fa, fb) = (f(a)?, f(b)?);
    if fa * fb > 0.0 {
        return Err(Error::invalid("V0 range", "does not bracket mu_par = V0"));
    }
    while b - a > tol_hz {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fa * fm <= 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    pub(crate) fn reference_trap() -> TrapSpec {
        TrapSpec {
            d: 5e-6,
            v0: 470.0,
            omega_x: 2.0 * PI * 200.0,
            omega_perp: 2.0 * PI * 500.0,
            n: 200,
            mass: RB87_MASS,
            a_s: RB87_SCATTERING_LENGTH,
        }
    }

    #[test]
    fn potential_is_continuous() {
        let s = reference_trap();
        let e = 1e-15;
        assert!(s.potential(0.5 * s.d - e).abs() < 1e-36);
        assert!(s.potential(0.5 * s.d + e).abs() < 1e-36);
        assert_abs_diff_eq!(s.potential(0.0) / H, 470.0, epsilon = 1e-9);
    }

    #[test]
    fn eos_limits() {
        let eos = TransverseEos::shared();
        assert_abs_diff_eq!(eos.mu(0.0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eos.center(0.0), 1.0, epsilon = 1e-12);
        // Perturbatively mu = 1 + 2 kappa for a Gaussian profile.
        assert!((eos.dmu(1e-4) - 2.0).abs() < 2e-3, "{}", eos.dmu(1e-4));
        // Thomas-Fermi limit mu -> 2 sqrt(kappa).
        assert!((eos.mu(200.0) / (2.0 * 200f64.sqrt()) - 1.0).abs() < 0.03);
        // Known crossover law sqrt(1 + 4 kappa) holds to about 1%.
        for k in [0.1, 0.5, 2.0] {
            assert!((eos.mu(k) / (1.0 + 4.0 * k).sqrt() - 1.0).abs() < 0.015, "{k}");
        }
    }

    #[test]
    fn reference_point_extraction() {
        let (g, m, e) = analyze(&reference_trap(), &GridSpec::default()).unwrap();
        assert!(g.residual <= 1e-8);
        assert!((g.mu_parallel / 425.0 - 1.0).abs() < 0.1, "{}", g.mu_parallel);
        assert!(e.j > 0.5 && e.j < 2.0, "{}", e.j);
        assert!(e.omega_j_hz <= 30.0);
        assert!(e.flags.two_mode_valid && !e.flags.fock);
        assert!(e.cross_ratio < 1e-2);
        assert!(m.energies.windows(2).all(|w| w[0] <= w[1]));

        // Modes alternate even / odd.
        let n = g.x.len();
        for (j, phi) in m.phi.iter().enumerate() {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let peak = phi.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let asym = (0..n).map(|i| (phi[i] - sign * phi[n - 1 - i]).abs()).fold(0.0, f64::max);
            assert!(asym < 1e-8 * peak, "mode {j}: {asym}");
        }
        // phi_L lives on the left.
        let (l, _) = localized_modes(&g.phi0, &m.phi[1]);
        let left: f64 = l[..n / 2].iter().map(|x| x * x).sum::<f64>() * g.dx;
        assert!(left > 0.99);
    }

    #[test]
    fn grid_refinement_changes_mu_little() {
        let a = solve_gp_ground(&reference_trap(), &GridSpec::default()).unwrap();
        let b = solve_gp_ground(&reference_trap(), &GridSpec { points: 4096, extent: 6.0 }).unwrap();
        assert!((a.mu_parallel / b.mu_parallel - 1.0).abs() < 1e-3);
    }

    #[test]
    fn single_well_has_no_doublet() {
        let (_, m, _) = analyze(&TrapSpec { v0: 0.0, ..reference_trap() }, &GridSpec::default()).unwrap();
        // Flat-bottomed single well: the first excitation is a dipole mode,
        // an order of magnitude above the tunneling doublet at V0 = 470 Hz.
        assert!(m.energies[1] > 10.0, "{}", m.energies[1]);
    }

    #[test]
    fn interaction_scales_out_with_scattering_length() {
        let small = |f: f64| analyze(&TrapSpec { a_s: f * RB87_SCATTERING_LENGTH, ..reference_trap() }, &GridSpec::default()).unwrap().2;
        let a = small(1e-3);
        let b = small(1e-4);
        assert!((a.j / b.j - 1.0).abs() < 0.05);
        assert!((a.u / b.u - 10.0).abs() < 0.1);
    }

    #[test]
    fn mu_parallel_grows_with_n() {
        let mus: Vec<f64> = [100, 200, 400]
            .iter()
            .map(|&n| solve_gp_ground(&TrapSpec { n, ..reference_trap() }, &GridSpec::default()).unwrap().mu_parallel)
            .collect();
        assert!(mus.windows(2).all(|w| w[0] < w[1]), "{mus:?}");
    }

    #[test]
    fn harmonic_noninteracting_limit() {
        let spec = TrapSpec { d: 1e-12, v0: 0.0, a_s: 0.0, ..reference_trap() };
        let grid = GridSpec { points: 1024, extent: 12e-6 / 1e-12 };
        let g = solve_gp_ground(&spec, &grid).unwrap();
        assert!((g.mu_parallel / 100.0 - 1.0).abs() < 1e-3, "{}", g.mu_parallel);
    }
}
