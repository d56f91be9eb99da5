//! Dense reference propagator on the full two-mode Fock space `n_L + n_R <= N`,
//! built from ladder operators without touching the sectored solver.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use bjj_core::lindblad::{evolve_observed, NoiseChannels, SectoredDensityMatrix};
use bjj_core::model::ModelParams;

pub type CMat = DMatrix<C64>;

pub struct FockSpace {
    pub n_max: usize,
    /// `(n_L, n_R)` per basis index.
    pub states: Vec<(usize, usize)>,
}

impl FockSpace {
    pub fn new(n_max: usize) -> Self {
        let mut states = Vec::new();
        for n in 0..=n_max {
            for nr in 0..=n {
                states.push((n - nr, nr));
            }
        }
        Self { n_max, states }
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index(&self, nl: usize, nr: usize) -> Option<usize> {
        self.states.iter().position(|&s| s == (nl, nr))
    }

    pub fn a_left(&self) -> CMat {
        let d = self.dim();
        let mut a = CMat::zeros(d, d);
        for (j, &(nl, nr)) in self.states.iter().enumerate() {
            if nl > 0 {
                let i = self.index(nl - 1, nr).unwrap();
                a[(i, j)] = C64::new((nl as f64).sqrt(), 0.0);
            }
        }
        a
    }

    pub fn a_right(&self) -> CMat {
        let d = self.dim();
        let mut a = CMat::zeros(d, d);
        for (j, &(nl, nr)) in self.states.iter().enumerate() {
            if nr > 0 {
                let i = self.index(nl, nr - 1).unwrap();
                a[(i, j)] = C64::new((nr as f64).sqrt(), 0.0);
            }
        }
        a
    }
}

pub struct Spin {
    pub s1: CMat,
    pub s2: CMat,
    pub s3: CMat,
    pub al: CMat,
    pub ar: CMat,
}

pub fn spin(fs: &FockSpace) -> Spin {
    let al = fs.a_left();
    let ar = fs.a_right();
    let ald = al.adjoint();
    let ard = ar.adjoint();
    let half = C64::new(0.5, 0.0);
    let s1 = (&ald * &ar + &ard * &al) * half;
    let s2 = (&ald * &ar - &ard * &al) * C64::new(0.0, -0.5);
    let s3 = (&ald * &al - &ard * &ar) * half;
    Spin { s1, s2, s3, al, ar }
}

fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Column-stacking Lindblad generator: `vec(A X B) = (B^T kron A) vec(X)`.
pub fn superoperator(fs: &FockSpace, p: &ModelParams, nc: &NoiseChannels) -> CMat {
    let sp = spin(fs);
    let d = fs.dim();
    let id = CMat::identity(d, d);
    let c = |x: f64| C64::new(x, 0.0);
    let h = &sp.s3 * c(p.epsilon) - &sp.s1 * c(p.j) + &sp.s3 * &sp.s3 * c(p.u);
    let mut l = (kron(&id, &h) - kron(&h.transpose(), &id)) * C64::new(0.0, -1.0);
    let mut dissipate = |op: &CMat, rate: f64| {
        if rate == 0.0 {
            return;
        }
        let od = op.adjoint();
        let odo = &od * op;
        let term = kron(&op.conjugate(), op) - (kron(&id, &odo) + kron(&odo.transpose(), &id)) * c(0.5);
        l += term * c(rate);
    };
    // -g [S,[S,rho]] = 2g D[S] rho for Hermitian S.
    dissipate(&sp.s1, 2.0 * nc.gamma1);
    dissipate(&sp.s2, 2.0 * nc.gamma2);
    dissipate(&sp.s3, 2.0 * nc.gamma3);
    dissipate(&sp.al, nc.gamma_l);
    dissipate(&sp.ar, nc.gamma_r);
    l
}

/// Embeds a single-sector block (basis `k = n_R`) into the full space.
pub fn embed(fs: &FockSpace, n: usize, block: &[C64]) -> CMat {
    let d = fs.dim();
    let mut rho = CMat::zeros(d, d);
    for k in 0..=n {
        for l in 0..=n {
            let i = fs.index(n - k, k).unwrap();
            let j = fs.index(n - l, l).unwrap();
            rho[(i, j)] = block[k * (n + 1) + l];
        }
    }
    rho
}

pub fn reference_evolve(fs: &FockSpace, p: &ModelParams, nc: &NoiseChannels, rho0: &CMat, t: f64) -> CMat {
    let d = fs.dim();
    let l = superoperator(fs, p, nc) * C64::new(t, 0.0);
    let prop = l.exp();
    let v0 = DMatrix::from_column_slice(d * d, 1, rho0.as_slice());
    let v = prop * v0;
    DMatrix::from_column_slice(d, d, v.as_slice())
}

/// Largest deviation between the sectored solver and the dense reference at
/// time `t`, over all stored matrix elements; off-sector elements of the
/// reference must vanish.
pub fn compare_with_reference(p: &ModelParams, nc: &NoiseChannels, block: &[C64], t: f64, tol: f64) -> f64 {
    let n = p.n;
    let fs = FockSpace::new(n);
    let rho0 = embed(&fs, n, block);
    let reference = reference_evolve(&fs, p, nc, &rho0, t);

    let b = ndarray::Array2::from_shape_vec((n + 1, n + 1), block.to_vec()).unwrap();
    let start = SectoredDensityMatrix::from_block(n, &b).unwrap();
    let mut last: Option<SectoredDensityMatrix> = None;
    evolve_observed(&start, p, nc, &[0.0, t], tol, |_, s| {
        last = Some(s.clone());
        Ok(())
    })
    .unwrap();
    let state = last.unwrap();

    let mut ours = CMat::zeros(fs.dim(), fs.dim());
    for m in state.n_min()..=state.n_max() {
        let blk = state.block_slice(m);
        ours += embed(&fs, m, blk);
    }
    (ours - reference).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Random normalized pure state in sector `n` from uniform coefficients.
pub fn pure_block(n: usize, coeffs: &[(f64, f64)]) -> Vec<C64> {
    let psi: Vec<C64> = coeffs.iter().take(n + 1).map(|&(a, b)| C64::new(a, b)).collect();
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let psi: Vec<C64> = psi.iter().map(|z| z / norm).collect();
    let d = n + 1;
    let mut out = vec![C64::default(); d * d];
    for k in 0..d {
        for l in 0..d {
            out[k * d + l] = psi[k] * psi[l].conj();
        }
    }
    out
}
