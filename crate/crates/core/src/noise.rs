//! Magnetic-noise models mapped onto master-equation rates, and the
//! lifetime-versus-distance fit for atoms held near a conducting chip.
//!
//! Everything here is SI: lengths in m, rates in 1/s, spectral densities
//! in T^2/Hz, magnetic moments in J/T.

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::constants::{BOHR_MAGNETON, C_LIGHT, HBAR, KB, MU0, RB87_GF};
use crate::{Error, Result};

/// `g_F mu_B` for the trapped Rb87 F = 2 manifold.
pub const RB87_MU_F: f64 = RB87_GF * BOHR_MAGNETON;
pub const RB87_F: f64 = 2.0;

/// Spin-flip matrix element relative to `mu_F sqrt(F)`, fixed so that the
/// default chip constants give c1 = 8.5 um^2/s.
pub const MATRIX_ELEMENT_FACTOR: f64 = 1.0609;

/// Gold: resistivity proportional to absolute temperature (Ohm m / K).
pub const GOLD_RESISTIVITY_SLOPE: f64 = 2.44e-8 / 293.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    /// Longitudinal field noise with correlations `exp(-|x - x'| / lambda_c)`.
    JohnsonExpCorr {
        b_pp: f64,
        lambda_c: f64,
        #[serde(default = "default_mu_f")]
        mu_f: f64,
        #[serde(default = "default_f")]
        f: f64,
    },
    /// Fluctuating linear field gradient; `eta` in (J/m)^2 s.
    TechnicalSlope { eta: f64 },
    /// White transverse noise at the Larmor frequency, driving spin flips.
    FlatSpectrum {
        b_minus_plus: f64,
        #[serde(default = "default_mu_f")]
        mu_f: f64,
        #[serde(default = "default_f")]
        f: f64,
    },
}

fn default_mu_f() -> f64 {
    RB87_MU_F
}

fn default_f() -> f64 {
    RB87_F
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::invalid(field, format!("must be finite and >= 0, got {v}")));
    }
    Ok(())
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::JohnsonExpCorr { b_pp, lambda_c, mu_f, f } => {
                non_negative("b_pp", b_pp)?;
                non_negative("mu_f", mu_f)?;
                non_negative("f", f)?;
                if !(lambda_c.is_finite() && lambda_c > 0.0) {
                    return Err(Error::invalid("lambda_c", "must be > 0"));
                }
            }
            NoiseModel::TechnicalSlope { eta } => non_negative("eta", eta)?,
            NoiseModel::FlatSpectrum { b_minus_plus, mu_f, f } => {
                non_negative("b_minus_plus", b_minus_plus)?;
                non_negative("mu_f", mu_f)?;
                non_negative("f", f)?;
            }
        }
        Ok(())
    }
}

/// Overlaps `alpha_ij = int int rho_i(x) rho_j(x') exp(-|x-x'|/lambda_c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelOverlaps {
    pub ll: f64,
    pub rr: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dephasing {
    pub gamma_p: f64,
    pub alpha: Option<KernelOverlaps>,
    /// `lambda_c >= d`: the wells see nearly the same field and dephasing
    /// is suppressed.
    pub long_correlation: bool,
}

/// `sum_j w_j exp(-|x_i - x_j| / lambda)` on a uniform grid in O(n), by a
/// forward and a backward first-order recursion.
pub fn exp_kernel_convolve(w: &[f64], dx: f64, lambda: f64) -> Vec<f64> {
    let n = w.len();
    let q = (-dx / lambda).exp();
    let mut fwd = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..n {
        acc = acc * q + w[i];
        fwd[i] = acc;
    }
    let mut out = vec![0.0; n];
    acc = 0.0;
    for i in (0..n).rev() {
        acc = acc * q + w[i];
        out[i] = fwd[i] + acc - w[i];
    }
    out
}

fn check_density(name: &str, rho: &[f64], dx: f64) -> Result<()> {
    if rho.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid(name, "density must be finite and non-negative"));
    }
    let norm: f64 = rho.iter().sum::<f64>() * dx;
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(name, format!("density integrates to {norm}, expected 1")));
    }
    Ok(())
}

pub fn kernel_overlaps(rho_l: &[f64], rho_r: &[f64], dx: f64, lambda_c: f64) -> Result<KernelOverlaps> {
    if rho_l.len() != rho_r.len() {
        return Err(Error::DimensionMismatch {
            expected: rho_l.len(),
            got: rho_r.len(),
        });
    }
    if !(dx > 0.0 && lambda_c > 0.0) {
        return Err(Error::invalid("dx", "grid spacing and lambda_c must be > 0"));
    }
    check_density("rho_l", rho_l, dx)?;
    check_density("rho_r", rho_r, dx)?;
    let kl = exp_kernel_convolve(rho_l, dx, lambda_c);
    let kr = exp_kernel_convolve(rho_r, dx, lambda_c);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * dx * dx;
    Ok(KernelOverlaps {
        ll: dot(rho_l, &kl),
        rr: dot(rho_r, &kr),
        lr: dot(rho_l, &kr),
    })
}

/// Coefficient of the `S3` double commutator, in 1/s. `d` is the well
/// separation; the densities are only used by the correlated-noise model.
pub fn dephasing_rate(model: &NoiseModel, rho_l: &[f64], rho_r: &[f64], dx: f64, d: f64) -> Result<Dephasing> {
    model.validate()?;
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::invalid("d", "well separation must be > 0"));
    }
    match *model {
        NoiseModel::JohnsonExpCorr { b_pp, lambda_c, mu_f, f } => {
            let a = kernel_overlaps(rho_l, rho_r, dx, lambda_c)?;
            let gamma_n = (mu_f * f / HBAR).powi(2) * b_pp;
            let long = lambda_c >= d;
            if long {
                warn!("lambda_c = {lambda_c:.3e} m >= d = {d:.3e} m: dephasing is suppressed");
            }
            Ok(Dephasing {
                gamma_p: (0.5 * gamma_n * (a.ll + a.rr - 2.0 * a.lr)).max(0.0),
                alpha: Some(a),
                long_correlation: long,
            })
        }
        NoiseModel::TechnicalSlope { eta } => Ok(Dephasing {
            gamma_p: 0.5 * (d / HBAR).powi(2) * eta,
            alpha: None,
            long_correlation: true,
        }),
        NoiseModel::FlatSpectrum { .. } => Err(Error::invalid(
            "kind",
            "flat_spectrum describes transverse noise and produces loss, not dephasing",
        )),
    }
}

/// Per-well loss rate from spin flips, in 1/s.
pub fn loss_rate(model: &NoiseModel) -> Result<f64> {
    model.validate()?;
    match *model {
        NoiseModel::FlatSpectrum { b_minus_plus, mu_f, f } => Ok(mu_f * mu_f * f * b_minus_plus / (HBAR * HBAR)),
        _ => Err(Error::invalid("kind", "loss requires a flat_spectrum model")),
    }
}

/// Transverse spectral density that produces the loss rate `gamma` (1/s).
pub fn spectrum_for_loss_rate(gamma: f64, mu_f: f64, f: f64) -> f64 {
    gamma * HBAR * HBAR / (mu_f * mu_f * f)
}

/// Wire and atom constants entering the Johnson spin-flip estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChipConstants {
    /// Conducting layer thickness (m).
    pub h: f64,
    /// Wire temperature (K).
    pub temperature: f64,
    /// Larmor angular frequency (rad/s).
    pub omega: f64,
    /// Resistivity per kelvin (Ohm m / K).
    pub resistivity_slope: f64,
    pub mu_f: f64,
    pub f: f64,
    pub matrix_element_factor: f64,
    /// Lifetime multiplier from Zeeman cascading and finite wire width.
    pub cascade_factor: f64,
}

impl Default for ChipConstants {
    fn default() -> Self {
        ChipConstants {
            h: 0.5e-6,
            temperature: 400.0,
            omega: 2.0 * std::f64::consts::PI * 500e3,
            resistivity_slope: GOLD_RESISTIVITY_SLOPE,
            mu_f: RB87_MU_F,
            f: RB87_F,
            matrix_element_factor: MATRIX_ELEMENT_FACTOR,
            cascade_factor: 2.0,
        }
    }
}

impl ChipConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("h", self.h),
            ("temperature", self.temperature),
            ("omega", self.omega),
            ("resistivity_slope", self.resistivity_slope),
            ("mu_f", self.mu_f),
            ("f", self.f),
            ("matrix_element_factor", self.matrix_element_factor),
            ("cascade_factor", self.cascade_factor),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn resistivity(&self) -> f64 {
        self.resistivity_slope * self.temperature
    }

    pub fn skin_depth(&self) -> f64 {
        (2.0 * self.resistivity() / (MU0 * self.omega)).sqrt()
    }

    pub fn thermal_occupation(&self) -> f64 {
        KB * self.temperature / (HBAR * self.omega)
    }

    /// Free-space magnetic-dipole spin-flip rate at the Larmor frequency.
    pub fn free_space_rate(&self) -> f64 {
        let mu_t = self.mu_f * self.f.sqrt() * self.matrix_element_factor;
        MU0 * mu_t * mu_t * self.omega.powi(3) / (3.0 * std::f64::consts::PI * HBAR * C_LIGHT.powi(3))
    }

    /// `c1` in `1/tau_Johnson = c1 / z0^2` (m^2/s), for an infinite thin
    /// layer and no cascading.
    pub fn johnson_c1(&self) -> f64 {
        let delta = self.skin_depth();
        (3.0f64 / 8.0).powi(2)
            * (self.thermal_occupation() + 1.0)
            * self.free_space_rate()
            * (C_LIGHT / self.omega).powi(3)
            * 2.0
            * self.h
            / (delta * delta)
    }

    /// Johnson rate at distance `z0` including the finite layer thickness,
    /// which flattens the `1/z0^2` law once `z0` approaches `h`.
    pub fn johnson_rate_thin_layer(&self, z0: f64) -> f64 {
        self.johnson_c1() / (z0 * (z0 + self.h))
    }

    /// `c2` (m^2/s) produced by current noise `i_noise` (A/sqrt(Hz)).
    pub fn technical_c2(&self, i_noise: f64) -> f64 {
        (MU0 * self.mu_f / (2.0 * std::f64::consts::PI * HBAR)).powi(2) * i_noise * i_noise
    }

    /// Inverse of [`technical_c2`](Self::technical_c2).
    pub fn current_noise(&self, c2: f64) -> f64 {
        c2.max(0.0).sqrt() * 2.0 * std::f64::consts::PI * HBAR / (MU0 * self.mu_f)
    }
}

/// Fractional departure of the Johnson rate from the `1/z0^2` law.
pub fn thin_layer_deviation(z0: f64, h: f64) -> f64 {
    h / (z0 + h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LifetimeRow {
    /// Atom-surface distance (m).
    pub z0: f64,
    /// Measured lifetime with vacuum losses already removed (s).
    pub tau: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifetimeDataset {
    pub rows: Vec<LifetimeRow>,
    pub chip: ChipConstants,
}

impl LifetimeDataset {
    pub fn validate(&self) -> Result<()> {
        self.chip.validate()?;
        if self.rows.len() < 3 {
            return Err(Error::invalid("rows", format!("need at least 3 points, got {}", self.rows.len())));
        }
        for (i, r) in self.rows.iter().enumerate() {
            if !(r.z0 > 0.0 && r.tau > 0.0 && r.sigma > 0.0) || !(r.z0 + r.tau + r.sigma).is_finite() {
                return Err(Error::invalid(format!("rows[{i}]"), "z0, tau and sigma must be > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LifetimeFit {
    /// `c1 + c2` from `tau = z0^2 / c_total` (m^2/s).
    pub c_total: f64,
    pub c1_model: f64,
    /// Johnson coefficient after the cascade/geometry correction.
    pub c1_cascaded: f64,
    pub c2: f64,
    /// Current noise (A/sqrt(Hz)). When `johnson_dominated`, an upper bound.
    pub current: f64,
    pub johnson_dominated: bool,
    /// Exponent from an unconstrained weighted power-law fit.
    pub slope_free: f64,
    pub points: usize,
}

/// Weighted fit of `log tau` with the exponent fixed at 2, plus a free
/// exponent diagnostic. Weights use `sigma_log = sigma / tau`.
pub fn fit_lifetimes(data: &LifetimeDataset) -> Result<LifetimeFit> {
    data.validate()?;
    let mut sw = 0.0;
    let mut swy = 0.0;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for r in &data.rows {
        let w = (r.tau / r.sigma).powi(2);
        let x = r.z0.ln();
        let y = r.tau.ln();
        sw += w;
        swy += w * (2.0 * x - y);
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let c_total = (swy / sw).exp();
    let det = sw * sxx - sx * sx;
    let slope_free = if det.abs() > 1e-300 {
        (sw * sxy - sx * sy) / det
    } else {
        f64::NAN
    };
    let c1_model = data.chip.johnson_c1();
    let c1_cascaded = c1_model / data.chip.cascade_factor;
    let c2 = c_total - c1_model;
    let johnson_dominated = c2 <= 0.0;
    let current = if johnson_dominated {
        // Everything beyond the cascaded Johnson estimate could be technical.
        data.chip.current_noise(c_total - c1_cascaded)
    } else {
        data.chip.current_noise(c2)
    };
    Ok(LifetimeFit {
        c_total,
        c1_model,
        c1_cascaded,
        c2,
        current,
        johnson_dominated,
        slope_free,
        points: data.rows.len(),
    })
}

/// Combined lifetime `z0^2 / (c1 + c2)`.
pub fn combined_lifetime(c1: f64, c2: f64, z0: f64) -> f64 {
    z0 * z0 / (c1 + c2)
}

/// Lifetimes drawn from `tau = z0^2 / c_total` with multiplicative
/// log-normal scatter of relative size `rel_sigma`.
pub fn synthetic_lifetimes(c_total: f64, z0s: &[f64], rel_sigma: f64, seed: u64) -> Vec<LifetimeRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, rel_sigma.max(0.0)).expect("finite sigma");
    z0s.iter()
        .map(|&z0| {
            let tau = z0 * z0 / c_total * normal.sample(&mut rng).exp();
            LifetimeRow {
                z0,
                tau,
                sigma: rel_sigma.max(1e-6) * tau,
            }
        })
        .collect()
}
