//! Closed-form predictions of the linearized (Bogoliubov) excitation theory.
//!
//! Quadratures: `S3 = sqrt(N/2) X / xi` and `phi = sqrt(2/N) xi P` with
//! `b = (X + iP)/sqrt(2)` evolving as `exp(-i omega_J t)`. Rotation noise
//! about S2 diffuses X, about S3 diffuses P.

use num_complex::Complex64 as C64;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RateKind {
    Phase,
    Number,
    Loss,
}

/// `Gamma(t) = lo cos^2(omega t) + hi sin^2(omega t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePrediction {
    pub kind: RateKind,
    pub gamma_in: f64,
    pub xi: f64,
    pub omega_j: f64,
    pub at_zero: f64,
    pub at_quarter: f64,
}

impl RatePrediction {
    pub fn rate(&self, t: f64) -> f64 {
        let (s, c) = (self.omega_j * t).sin_cos();
        self.at_zero * c * c + self.at_quarter * s * s
    }

    pub fn avg(&self) -> f64 {
        0.5 * (self.at_zero + self.at_quarter)
    }

    pub fn min(&self) -> f64 {
        self.at_zero.min(self.at_quarter)
    }

    pub fn max(&self) -> f64 {
        self.at_zero.max(self.at_quarter)
    }

    /// Period of `Gamma(t)`: half the Josephson period.
    pub fn period(&self) -> f64 {
        std::f64::consts::PI / self.omega_j
    }
}

pub fn phase_noise_rate(gamma3: f64, xi: f64, omega_j: f64) -> RatePrediction {
    RatePrediction {
        kind: RateKind::Phase,
        gamma_in: gamma3,
        xi,
        omega_j,
        at_zero: gamma3,
        at_quarter: gamma3 * xi.powi(-4),
    }
}

pub fn number_noise_rate(gamma2: f64, xi: f64, omega_j: f64) -> RatePrediction {
    RatePrediction {
        kind: RateKind::Number,
        gamma_in: gamma2,
        xi,
        omega_j,
        at_zero: gamma2,
        at_quarter: gamma2 * xi.powi(4),
    }
}

/// Loss-induced decoherence `gamma (1 - 1/xi^2) / 2N [c(t) + s(t) xi^4]`
/// with `c = cos^2`, `s = sin^2`.
pub fn loss_decoherence_estimate(gamma_loss: f64, xi: f64, n: f64, omega_j: f64) -> RatePrediction {
    let pre = gamma_loss * (1.0 - xi.powi(-2)) / (2.0 * n);
    RatePrediction {
        kind: RateKind::Loss,
        gamma_in: gamma_loss,
        xi,
        omega_j,
        at_zero: pre,
        at_quarter: pre * xi.powi(4),
    }
}

/// Imbalance kick `1 - 1/xi^2` (in units of a single atom) per loss event.
pub fn loss_kick(xi: f64) -> f64 {
    1.0 - xi.powi(-2)
}

/// Least-squares `(c, s)` in `Gamma(t) = pre [c cos^2 + s xi^4 sin^2]`,
/// the constant-weight version of the loss estimate fitted to a measured
/// rate series.
pub fn fit_loss_weights(pred: &RatePrediction, t: &[f64], gamma: &[f64]) -> Option<(f64, f64)> {
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&ti, &gi) in t.iter().zip(gamma) {
        if !gi.is_finite() {
            continue;
        }
        let (s, c) = (pred.omega_j * ti).sin_cos();
        let f1 = pred.at_zero * c * c;
        let f2 = pred.at_quarter * s * s;
        a11 += f1 * f1;
        a12 += f1 * f2;
        a22 += f2 * f2;
        b1 += f1 * gi;
        b2 += f2 * gi;
    }
    let det = a11 * a22 - a12 * a12;
    if det.abs() < 1e-300 {
        return None;
    }
    Some(((a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BosonicMoments {
    pub bdag_b: f64,
    pub b2: C64,
    pub s1: f64,
    /// `<b^dag b> > N/10`: the linearization is no longer trustworthy.
    pub breakdown: bool,
}

/// Diffusion constants `(D2, D3)` of `<b^dag b>` for number and phase noise.
pub fn diffusion_constants(gamma2: f64, gamma3: f64, xi: f64, n: f64) -> (f64, f64) {
    (0.5 * gamma2 * n * xi * xi, 0.5 * gamma3 * n / (xi * xi))
}

/// Moments at time `t` under number noise `gamma2` and phase noise `gamma3`.
///
/// `d<b^dag b>/dt = D2 + D3` and `d<b^2>/dt = -2i omega <b^2> + D2 - D3`.
pub fn bosonic_moments(
    t: f64,
    gamma2: f64,
    gamma3: f64,
    xi: f64,
    omega_j: f64,
    n: f64,
    bdag_b0: f64,
    b2_0: C64,
) -> BosonicMoments {
    let (d2, d3) = diffusion_constants(gamma2, gamma3, xi, n);
    let bdag_b = bdag_b0 + (d2 + d3) * t;
    let rot = C64::from_polar(1.0, -2.0 * omega_j * t);
    let b2 = b2_0 * rot + (C64::new(1.0, 0.0) - rot) * C64::new(0.0, -(d2 - d3) / (2.0 * omega_j));
    BosonicMoments {
        bdag_b,
        b2,
        s1: s1_from_moments(n, xi, bdag_b, b2),
        breakdown: bdag_b > n / 10.0,
    }
}

/// `<S1> = N/2 - [(xi^2 + xi^-2)(2<b^dag b> + 1) - 2 - (xi^2 - xi^-2) 2 Re<b^2>] / 4`.
pub fn s1_from_moments(n: f64, xi: f64, bdag_b: f64, b2: C64) -> f64 {
    let x2 = xi * xi;
    let xm2 = 1.0 / x2;
    0.5 * n - 0.25 * ((x2 + xm2) * (2.0 * bdag_b + 1.0) - 2.0 - (x2 - xm2) * 2.0 * b2.re)
}

/// Ground-state (or thermal with occupation `n_t`) coherence
/// `1 - [(xi^2 + xi^-2)(2 n_t + 1) - 2] / 2N`.
pub fn thermal_coherence(n: f64, xi: f64, n_t: f64) -> f64 {
    s1_from_moments(n, xi, n_t, C64::default()) / (0.5 * n)
}

/// Coherence of a Gaussian phase-space distribution with principal variances
/// `da2`, `db2`: `exp[-(da2 + db2 - 2/N)/2]`.
pub fn gaussian_coherence(n: f64, da2: f64, db2: f64) -> f64 {
    (-(da2 + db2 - 2.0 / n) / 2.0).exp()
}
