//! Two-mode Bose-Hubbard model in the pseudo-spin (S3) basis.
//!
//! Basis index `k = n_R = 0..=N`, so `S3 = diag(N/2 - k)` runs from `+N/2`
//! down to `-N/2`. `S+ = a_L^dag a_R` maps `k` to `k - 1`.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tridiag::SymTridiag;

/// Hamiltonian parameters. Energies are in units where `j` sets the scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(rename = "J", default = "one")]
    pub j: f64,
    /// On-site interaction per pair.
    #[serde(rename = "U")]
    pub u: f64,
}

fn one() -> f64 {
    1.0
}

impl ModelParams {
    pub fn new(n: usize, epsilon: f64, j: f64, u: f64) -> Result<Self> {
        let p = Self { n, epsilon, j, u };
        p.validate()?;
        Ok(p)
    }

    /// Parameters with `J = 1` and a given dimensionless `u = N U / J`.
    pub fn from_u(n: usize, u_dimless: f64) -> Result<Self> {
        Self::new(n, 0.0, 1.0, u_dimless / n as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::invalid("N", "must be >= 1"));
        }
        if !(self.j.is_finite() && self.j > 0.0) {
            return Err(Error::invalid("J", "must be finite and > 0"));
        }
        if !(self.u.is_finite() && self.u >= 0.0) {
            return Err(Error::invalid("U", "must be finite and >= 0 (attractive interactions are out of scope)"));
        }
        if !self.epsilon.is_finite() {
            return Err(Error::invalid("epsilon", "must be finite"));
        }
        Ok(())
    }

    pub fn u_dimless(&self) -> f64 {
        self.n as f64 * self.u / self.j
    }

    /// Same parameters restricted to a sector with `n` atoms.
    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Rabi,
    Josephson,
    Fock,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Characteristics {
    pub u: f64,
    pub xi: f64,
    pub omega_j: f64,
    pub eps_c: f64,
    pub regime: Regime,
}

/// Squeezing factor, Josephson frequency, critical imbalance and regime.
///
/// Regime intervals are half-open: `u = 1` is Josephson and `u = N^2` is Fock.
pub fn characteristic_params(p: &ModelParams) -> Characteristics {
    let u = p.u_dimless();
    let xi = (1.0 + u).powf(0.25);
    let omega_j = (p.j * (p.j + p.n as f64 * p.u)).sqrt();
    let eps_c = if u > 1.0 {
        (u.powf(2.0 / 3.0) - 1.0).powf(1.5)
    } else {
        0.0
    };
    let n2 = (p.n as f64).powi(2);
    let regime = if u < 1.0 {
        Regime::Rabi
    } else if u < n2 {
        Regime::Josephson
    } else {
        Regime::Fock
    };
    Characteristics {
        u,
        xi,
        omega_j,
        eps_c,
        regime,
    }
}

/// Labels and matrix elements of the spin-`N/2` basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpinBasis {
    pub n: usize,
}

impl SpinBasis {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn dim(&self) -> usize {
        self.n + 1
    }

    pub fn s(&self) -> f64 {
        self.n as f64 / 2.0
    }

    /// S3 eigenvalue `(n_L - n_R) / 2` of basis state `k`.
    pub fn m(&self, k: usize) -> f64 {
        self.s() - k as f64
    }

    /// `<k | S+ | k+1> = sqrt((N - k)(k + 1))`.
    pub fn raise(&self, k: usize) -> f64 {
        (((self.n - k) * (k + 1)) as f64).sqrt()
    }

    pub fn n_left(&self, k: usize) -> f64 {
        (self.n - k) as f64
    }

    pub fn n_right(&self, k: usize) -> f64 {
        k as f64
    }

    pub fn s1_tridiag(&self) -> SymTridiag {
        SymTridiag::new(
            vec![0.0; self.dim()],
            (0..self.n).map(|k| 0.5 * self.raise(k)).collect(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub s1: Array2<C64>,
    pub s2: Array2<C64>,
    pub s3: Array2<C64>,
}

pub fn build_spin_operators(basis: SpinBasis) -> SpinOperators {
    let d = basis.dim();
    let mut s1 = Array2::zeros((d, d));
    let mut s2 = Array2::zeros((d, d));
    let mut s3 = Array2::zeros((d, d));
    for k in 0..d {
        s3[[k, k]] = C64::new(basis.m(k), 0.0);
        if k + 1 < d {
            let r = 0.5 * basis.raise(k);
            s1[[k, k + 1]] = C64::new(r, 0.0);
            s1[[k + 1, k]] = C64::new(r, 0.0);
            // S2 = (S+ - S-) / 2i with S+ above the diagonal.
            s2[[k, k + 1]] = C64::new(0.0, -r);
            s2[[k + 1, k]] = C64::new(0.0, r);
        }
    }
    SpinOperators { s1, s2, s3 }
}

/// `H = eps S3 - J S1 + U S3^2` for a sector with `p.n` atoms.
pub fn hamiltonian_tridiag(p: &ModelParams) -> SymTridiag {
    let b = SpinBasis::new(p.n);
    let diag = (0..b.dim())
        .map(|k| {
            let m = b.m(k);
            p.epsilon * m + p.u * m * m
        })
        .collect();
    let off = (0..p.n).map(|k| -0.5 * p.j * b.raise(k)).collect();
    SymTridiag::new(diag, off)
}

pub fn build_hamiltonian(p: &ModelParams) -> Array2<C64> {
    tridiag_to_dense(&hamiltonian_tridiag(p))
}

pub fn tridiag_to_dense(t: &SymTridiag) -> Array2<C64> {
    let d = t.len();
    let mut h = Array2::zeros((d, d));
    for k in 0..d {
        h[[k, k]] = C64::new(t.diag[k], 0.0);
        if k + 1 < d {
            h[[k, k + 1]] = C64::new(t.off[k], 0.0);
            h[[k + 1, k]] = C64::new(t.off[k], 0.0);
        }
    }
    h
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    pub psi: Vec<f64>,
    /// Set when the two lowest levels are closer than `1e-12 ||H||`; `psi` is
    /// then the even-parity combination.
    pub degenerate: bool,
}

impl GroundState {
    pub fn density(&self) -> Array2<C64> {
        let d = self.psi.len();
        Array2::from_shape_fn((d, d), |(k, l)| C64::new(self.psi[k] * self.psi[l], 0.0))
    }
}

pub fn ground_state(h: &SymTridiag) -> Result<GroundState> {
    let eig = h.eigh()?;
    let n = eig.n;
    let norm = h.norm_inf();
    let degenerate = n > 1 && (eig.values[1] - eig.values[0]).abs() < 1e-12 * norm;
    let mut psi = eig.vector(0).to_vec();
    if degenerate {
        let even = |v: &[f64]| -> Vec<f64> { (0..n).map(|k| v[k] + v[n - 1 - k]).collect() };
        let mut cand = even(eig.vector(0));
        if cand.iter().map(|x| x * x).sum::<f64>() < 1e-8 {
            cand = even(eig.vector(1));
        }
        let nrm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
        psi = cand.into_iter().map(|x| x / nrm).collect();
        crate::tridiag::normalize_sign(&mut psi);
    }
    Ok(GroundState {
        energy: eig.values[0],
        psi,
        degenerate,
    })
}

/// Thermal state `exp(-H / kT) / Z`; `kt = 0` is the ground-state projector.
pub fn thermal_state(h: &SymTridiag, kt: f64) -> Result<Array2<C64>> {
    if !(kt >= 0.0 && kt.is_finite()) {
        return Err(Error::invalid("kT", "must be finite and >= 0"));
    }
    if kt == 0.0 {
        return Ok(ground_state(h)?.density());
    }
    let eig = h.eigh()?;
    let e0 = eig.values[0];
    let w: Vec<f64> = eig.values.iter().map(|e| (-(e - e0) / kt).exp()).collect();
    let z: f64 = w.iter().sum();
    let d = eig.n;
    let mut rho = Array2::<C64>::zeros((d, d));
    for (j, wj) in w.iter().enumerate() {
        let pj = wj / z;
        if pj < 1e-300 {
            continue;
        }
        let v = eig.vector(j);
        for k in 0..d {
            let a = pj * v[k];
            for l in 0..d {
                rho[[k, l]].re += a * v[l];
            }
        }
    }
    Ok(rho)
}

/// Bose occupation `1 / (exp(omega / kT) - 1)` of the Josephson mode.
pub fn thermal_occupation(omega: f64, kt: f64) -> f64 {
    if kt <= 0.0 {
        0.0
    } else {
        1.0 / (omega / kt).exp_m1()
    }
}

/// First and second moments of a single-sector (possibly unnormalized) block.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpinMoments {
    pub trace: f64,
    pub s_plus: C64,
    pub s3: f64,
    pub s3sq: f64,
    pub n_left: f64,
    pub n_right: f64,
}

impl SpinMoments {
    pub fn s1(&self) -> f64 {
        self.s_plus.re
    }

    /// `<S2> = Im <S+>`.
    pub fn s2(&self) -> f64 {
        self.s_plus.im
    }

    pub fn add(&mut self, o: &SpinMoments) {
        self.trace += o.trace;
        self.s_plus += o.s_plus;
        self.s3 += o.s3;
        self.s3sq += o.s3sq;
        self.n_left += o.n_left;
        self.n_right += o.n_right;
    }

    pub fn coherence(&self) -> Result<f64> {
        let denom = self.n_left * self.n_right;
        if denom <= 0.0 {
            return Err(Error::Undefined("n_L n_R = 0"));
        }
        Ok(self.s_plus.norm() / denom.sqrt())
    }
}

/// Moments of a row-major `(n+1) x (n+1)` block stored in a slice.
pub fn moments_slice(n: usize, rho: &[C64]) -> SpinMoments {
    let b = SpinBasis::new(n);
    let d = b.dim();
    debug_assert_eq!(rho.len(), d * d);
    let mut out = SpinMoments::default();
    for k in 0..d {
        let p = rho[k * d + k].re;
        let m = b.m(k);
        out.trace += p;
        out.s3 += m * p;
        out.s3sq += m * m * p;
        out.n_left += b.n_left(k) * p;
        out.n_right += b.n_right(k) * p;
        if k + 1 < d {
            // tr(rho S+) = sum_k <k|S+|k+1> rho[k+1][k]
            out.s_plus += rho[(k + 1) * d + k] * b.raise(k);
        }
    }
    out
}

pub fn moments(rho: &Array2<C64>) -> SpinMoments {
    let d = rho.nrows();
    let std = rho.as_standard_layout();
    moments_slice(d - 1, std.as_slice().expect("standard layout"))
}

/// `|<a_L^dag a_R>| / sqrt(<n_L><n_R>)`.
pub fn coherence_g1(rho: &Array2<C64>) -> Result<f64> {
    moments(rho).coherence()
}
