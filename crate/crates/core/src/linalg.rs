//! Banded symmetric matrices, their Cholesky factorization, and the symmetric
//! tridiagonal eigensolver (Sturm bisection plus inverse iteration).

use crate::error::{Error, Result};

/// Symmetric matrix stored as its lower band (half-bandwidth `bw`).
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if i - j > self.bw {
            None
        } else {
            Some(i * (self.bw + 1) + self.bw + j - i)
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.idx(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Adds `v` to entry `(i, j)` (and implicitly `(j, i)`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j).expect("entry outside the band");
        self.data[k] += v;
    }

    /// `a * self + b * other` for matrices of equal shape.
    pub fn combine(&self, a: f64, other: &BandedSym, b: f64) -> BandedSym {
        assert_eq!((self.n, self.bw), (other.n, other.bw));
        BandedSym {
            n: self.n,
            bw: self.bw,
            data: self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> BandedSym {
        BandedSym { n: self.n, bw: self.bw, data: self.data.iter().map(|x| a * x).collect() }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        y.iter_mut().for_each(|v| *v = 0.0);
        let w = self.bw + 1;
        for i in 0..self.n {
            let row = &self.data[i * w..(i + 1) * w];
            let j0 = i.saturating_sub(self.bw);
            let mut acc = row[self.bw] * x[i];
            for j in j0..i {
                let a = row[self.bw + j - i];
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc;
        }
    }

    pub fn dot(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(y).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Cholesky factorization `A = L Lᵀ` within the band.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut l = self.data.clone();
        for j in 0..n {
            let k0 = j.saturating_sub(bw);
            let mut d = l[j * w + bw];
            for k in k0..j {
                let v = l[j * w + bw + k - j];
                d -= v * v;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Numerical(format!("matrix not positive definite at row {j}")));
            }
            let d = d.sqrt();
            l[j * w + bw] = d;
            for i in (j + 1)..n.min(j + bw + 1) {
                let k0 = i.saturating_sub(bw);
                let mut s = l[i * w + bw + j - i];
                for k in k0..j {
                    s -= l[i * w + bw + k - i] * l[j * w + bw + k - j];
                }
                l[i * w + bw + j - i] = s / d;
            }
        }
        Ok(BandCholesky { n, bw, l })
    }
}

/// Lower-band Cholesky factor.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        for i in 0..n {
            let k0 = i.saturating_sub(bw);
            let mut s = x[i];
            for k in k0..i {
                s -= self.l[i * w + bw + k - i] * x[k];
            }
            x[i] = s / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            let x_i = x[i] / self.l[i * w + bw];
            x[i] = x_i;
            let k0 = i.saturating_sub(bw);
            for k in k0..i {
                x[k] -= self.l[i * w + bw + k - i] * x_i;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len());
        Self { diag, off }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Number of eigenvalues strictly less than `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.dim() {
            let denom = if q == 0.0 { f64::EPSILON * (self.off[i - 1].abs() + 1e-300) } else { q };
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / denom;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= f64::EPSILON * scale * 1e-3 {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvector for eigenvalue `lambda` by inverse iteration, unit Euclidean norm.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.dim();
        let shift = lambda + 1e-13 * lambda.abs().max(1.0);
        let lu = PivotedTridiagonal::factor(self, shift);
        // deterministic, non-degenerate start vector
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_7).fract()).collect();
        for _ in 0..3 {
            lu.solve_in_place(&mut x);
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= norm);
        }
        x
    }
}

/// LU with partial pivoting of a shifted tridiagonal matrix `T - σI`.
struct PivotedTridiagonal {
    // U has diag d, first super u1, second super u2; L has multipliers m
    d: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    m: Vec<f64>,
    swapped: Vec<bool>,
}

impl PivotedTridiagonal {
    fn factor(t: &SymTridiagonal, shift: f64) -> Self {
        let n = t.dim();
        let mut d: Vec<f64> = t.diag.iter().map(|v| v - shift).collect();
        let mut u1: Vec<f64> = t.off.clone();
        u1.push(0.0);
        let mut u2 = vec![0.0; n];
        let mut lower: Vec<f64> = t.off.clone();
        let mut m = vec![0.0; n];
        let mut swapped = vec![false; n];
        let tiny = 1e-300;
        for i in 0..n.saturating_sub(1) {
            if lower[i].abs() > d[i].abs() {
                // swap rows i and i+1
                swapped[i] = true;
                let (a, b, c) = (d[i], u1[i], u2[i]);
                d[i] = lower[i];
                u1[i] = d[i + 1];
                u2[i] = if i + 1 < n - 1 { u1[i + 1] } else { 0.0 };
                let mult = a / d[i];
                m[i] = mult;
                d[i + 1] = b - mult * u1[i];
                if i + 1 < n - 1 {
                    u1[i + 1] = c - mult * u2[i];
                }
            } else {
                let piv = if d[i] == 0.0 { tiny } else { d[i] };
                d[i] = piv;
                let mult = lower[i] / piv;
                m[i] = mult;
                d[i + 1] -= mult * u1[i];
                u2[i] = 0.0;
            }
            lower[i] = 0.0;
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        Self { d, u1, u2, m, swapped }
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let n = x.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                x.swap(i, i + 1);
            }
            x[i + 1] -= self.m[i] * x[i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            if i + 1 < n {
                s -= self.u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * x[i + 2];
            }
            x[i] = s / self.d[i];
        }
    }
}

/// Solves a general tridiagonal system (sub, diag, sup) by the Thomas algorithm.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::Numerical("zero pivot in tridiagonal solve".into()));
    }
    d[0] = rhs[0] / beta;
    for i in 1..n {
        c[i - 1] = sup[i - 1] / beta;
        beta = diag[i] - sub[i - 1] * c[i - 1];
        if beta == 0.0 {
            return Err(Error::Numerical("zero pivot in tridiagonal solve".into()));
        }
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / beta;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn laplacian(n: usize) -> SymTridiagonal {
        SymTridiagonal::new(vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn tridiagonal_eigenvalues_closed_form() {
        let n = 50;
        let t = laplacian(n);
        for k in [0, 1, 10, 49] {
            let exact = 2.0 - 2.0 * (PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert_relative_eq!(t.eigenvalue(k), exact, max_relative = 1e-13);
        }
    }

    #[test]
    fn tridiagonal_eigenvectors_orthonormal() {
        let n = 200;
        let t = laplacian(n);
        let vs: Vec<Vec<f64>> = (0..6).map(|k| t.eigenvector(t.eigenvalue(k))).collect();
        for i in 0..6 {
            for j in 0..6 {
                let d: f64 = vs[i].iter().zip(&vs[j]).map(|(a, b)| a * b).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((d - target).abs() < 1e-10, "({i},{j}) {d}");
            }
        }
    }

    #[test]
    fn banded_cholesky_matches_dense() {
        let n = 30;
        let bw = 3;
        let mut a = BandedSym::zeros(n, bw);
        for i in 0..n {
            a.add(i, i, 10.0 + i as f64 * 0.1);
            for k in 1..=bw {
                if i >= k {
                    a.add(i, i - k, -1.0 / k as f64);
                }
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = a.cholesky().unwrap().solve(&b);
        let r = a.mul_vec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12);
        }
        let dense = a.to_dense();
        let xd = dense.lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
        for (u, v) in x.iter().zip(xd.iter()) {
            assert_relative_eq!(u, v, epsilon = 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = BandedSym::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(1, 0, 2.0);
        assert!(a.cholesky().is_err());
    }

    #[test]
    fn thomas_solves() {
        let x = solve_tridiagonal(&[-1.0, -1.0], &[2.0, 2.0, 2.0], &[-1.0, -1.0], &[1.0, 0.0, 1.0]).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-14);
    }
}
