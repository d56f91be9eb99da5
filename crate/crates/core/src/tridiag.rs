//! Real symmetric tridiagonal eigensolvers.
//!
//! `eigh` is implicit QL with Wilkinson shifts and is used for the full
//! spectrum of the two-mode Hamiltonian. `lowest` uses Sturm-sequence
//! bisection plus inverse iteration and is meant for a handful of modes
//! on long grids.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

/// Eigenvalues in ascending order with eigenvectors stored column-major
/// (`vectors[j * n + i]` is component `i` of eigenvector `j`).
#[derive(Debug, Clone)]
pub struct Eigen {
    pub n: usize,
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

impl Eigen {
    pub fn vector(&self, j: usize) -> &[f64] {
        &self.vectors[j * self.n..(j + 1) * self.n]
    }
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len().max(1), "off-diagonal length must be n - 1");
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn norm_inf(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].abs();
                if i > 0 {
                    s += self.off[i - 1].abs();
                }
                if i + 1 < n {
                    s += self.off[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
    }

    /// Full eigendecomposition by implicit QL.
    pub fn eigh(&self) -> Result<Eigen> {
        let n = self.len();
        let mut d = self.diag.clone();
        let mut e = vec![0.0; n];
        e[..n.saturating_sub(1)].copy_from_slice(&self.off);
        let mut z = vec![0.0; n * n];
        for i in 0..n {
            z[i * n + i] = 1.0;
        }

        for l in 0..n {
            let mut iter = 0;
            loop {
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= f64::EPSILON * dd {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                iter += 1;
                if iter > 60 {
                    return Err(Error::NoConvergence {
                        what: "tridiagonal QL",
                        iterations: iter,
                        residual: e[l].abs(),
                    });
                }
                let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                let mut r = g.hypot(1.0);
                g = d[m] - d[l] + e[l] / (g + r.copysign(g));
                let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
                let mut deflated = false;
                let mut i = m;
                while i > l {
                    i -= 1;
                    let f = s * e[i];
                    let b = c * e[i];
                    r = f.hypot(g);
                    e[i + 1] = r;
                    if r == 0.0 {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        deflated = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    let (lo, hi) = z.split_at_mut((i + 1) * n);
                    let zi = &mut lo[i * n..];
                    let zi1 = &mut hi[..n];
                    for k in 0..n {
                        let f = zi1[k];
                        zi1[k] = s * zi[k] + c * f;
                        zi[k] = c * zi[k] - s * f;
                    }
                }
                if deflated {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
        let values = order.iter().map(|&j| d[j]).collect();
        let mut vectors = Vec::with_capacity(n * n);
        for &j in &order {
            let mut v = z[j * n..(j + 1) * n].to_vec();
            normalize_sign(&mut v);
            vectors.extend_from_slice(&v);
        }
        Ok(Eigen { n, values, vectors })
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn sturm_count(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt() * (1.0 + self.norm_inf());
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.len() {
            let b2 = if i > 0 { self.off[i - 1] * self.off[i - 1] } else { 0.0 };
            q = self.diag[i] - x - if i > 0 { b2 / q } else { 0.0 };
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let norm = self.norm_inf();
        let (mut lo, mut hi) = (-norm - 1.0, norm + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.sturm_count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Lowest `count` eigenpairs via bisection and inverse iteration.
    pub fn lowest(&self, count: usize) -> Result<Eigen> {
        let n = self.len();
        let count = count.min(n);
        let norm = self.norm_inf().max(f64::MIN_POSITIVE);
        let mut values: Vec<f64> = Vec::with_capacity(count);
        let mut vectors: Vec<f64> = Vec::with_capacity(count * n);
        for k in 0..count {
            let lambda = self.eigenvalue(k);
            let lu = TridiagLu::factor(
                &self.off,
                &self.diag.iter().map(|d| d - lambda).collect::<Vec<_>>(),
                &self.off,
                f64::EPSILON * norm,
            );
            let mut v: Vec<f64> = (0..n)
                .map(|i| 1.0 + 0.1 * ((i * 7 + k * 13) % 17) as f64 / 17.0)
                .collect();
            for _ in 0..4 {
                lu.solve(&mut v);
                // Re-orthogonalize against already accepted vectors that are
                // numerically close in eigenvalue.
                for (j, &lj) in values.iter().enumerate() {
                    if (lambda - lj).abs() <= 1e-6 * norm {
                        let prev: &[f64] = &vectors[j * n..(j + 1) * n];
                        let dot: f64 = prev.iter().zip(&v).map(|(a, b)| a * b).sum();
                        v.iter_mut().zip(prev).for_each(|(x, p)| *x -= dot * p);
                    }
                }
                let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if nrm == 0.0 || !nrm.is_finite() {
                    return Err(Error::NoConvergence {
                        what: "inverse iteration",
                        iterations: 4,
                        residual: f64::NAN,
                    });
                }
                v.iter_mut().for_each(|x| *x /= nrm);
            }
            normalize_sign(&mut v);
            // Rayleigh quotient is more accurate than the bisection midpoint
            // once the vector has converged.
            let mut tv = vec![0.0; n];
            self.matvec(&v, &mut tv);
            let rq: f64 = v.iter().zip(&tv).map(|(a, b)| a * b).sum();
            values.push(rq);
            vectors.extend_from_slice(&v);
        }
        Ok(Eigen { n, values, vectors })
    }
}

/// Makes the first component of largest magnitude positive.
pub fn normalize_sign(v: &mut [f64]) {
    let mut best = 0.0;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best * (1.0 + 1e-10) {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// LU factorization with partial pivoting of a general tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct TridiagLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    ipiv: Vec<usize>,
}

impl TridiagLu {
    /// `lower[i]` is A[i+1][i], `upper[i]` is A[i][i+1]. Zero pivots are
    /// replaced by `pivot_floor` so that the factorization can be used for
    /// inverse iteration at an exact eigenvalue.
    pub fn factor(lower: &[f64], diag: &[f64], upper: &[f64], pivot_floor: f64) -> Self {
        let n = diag.len();
        let mut dl = lower.to_vec();
        let mut d = diag.to_vec();
        let mut du = upper.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut ipiv: Vec<usize> = (0..n).collect();
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = pivot_floor.max(f64::MIN_POSITIVE);
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                ipiv[i] = i + 1;
            }
        }
        if n > 0 && d[n - 1] == 0.0 {
            d[n - 1] = pivot_floor.max(f64::MIN_POSITIVE);
        }
        Self { dl, d, du, du2, ipiv }
    }

    pub fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            let ip = self.ipiv[i];
            let temp = b[2 * i + 1 - ip] - self.dl[i] * b[ip];
            b[i] = b[ip];
            b[i + 1] = temp;
        }
        if n == 0 {
            return;
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_tridiag(n: usize, seed: u64) -> SymTridiag {
        let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let diag = (0..n).map(|_| next()).collect();
        let off = (0..n.saturating_sub(1)).map(|_| next()).collect();
        SymTridiag::new(diag, off)
    }

    #[test]
    fn ql_residuals_and_orthogonality() {
        for (n, seed) in [(1, 1), (2, 2), (7, 3), (40, 4)] {
            let t = random_tridiag(n, seed);
            let eig = t.eigh().unwrap();
            let mut tv = vec![0.0; n];
            for j in 0..n {
                t.matvec(eig.vector(j), &mut tv);
                for i in 0..n {
                    assert!((tv[i] - eig.values[j] * eig.vector(j)[i]).abs() < 1e-12);
                }
                for k in 0..n {
                    let dot: f64 = eig.vector(j).iter().zip(eig.vector(k)).map(|(a, b)| a * b).sum();
                    let want = if j == k { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-12);
                }
            }
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn ql_matches_nalgebra() {
        let n = 25;
        let t = random_tridiag(n, 99);
        let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = t.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = t.off[i];
                m[(i + 1, i)] = t.off[i];
            }
        }
        let mut want: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        want.sort_by(f64::total_cmp);
        let got = t.eigh().unwrap().values;
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bisection_and_inverse_iteration_agree_with_ql() {
        let t = random_tridiag(60, 7);
        let full = t.eigh().unwrap();
        let low = t.lowest(5).unwrap();
        for j in 0..5 {
            assert!((full.values[j] - low.values[j]).abs() < 1e-12);
            let dot: f64 = full.vector(j).iter().zip(low.vector(j)).map(|(a, b)| a * b).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn pivoted_lu_solves_general_tridiagonal() {
        let lower = [3.0, -1.0, 0.5, 2.0];
        let diag = [0.0, 1.0, -2.0, 0.1, 4.0];
        let upper = [1.0, 2.0, -3.0, 1.0];
        let x_true = [1.0, -2.0, 0.5, 3.0, -1.0];
        let mut b = [0.0; 5];
        for i in 0..5 {
            b[i] = diag[i] * x_true[i];
            if i > 0 {
                b[i] += lower[i - 1] * x_true[i - 1];
            }
            if i < 4 {
                b[i] += upper[i] * x_true[i + 1];
            }
        }
        TridiagLu::factor(&lower, &diag, &upper, 1e-300).solve(&mut b);
        for i in 0..5 {
            assert!((b[i] - x_true[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn sign_convention() {
        let mut v = vec![0.1, -0.9, 0.9];
        normalize_sign(&mut v);
        assert_eq!(v, vec![-0.1, 0.9, -0.9]);
    }
}
