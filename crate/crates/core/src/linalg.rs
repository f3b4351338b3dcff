//! Small dense kernels: symmetric eigenproblems (Householder reduction and
//! implicit QL), LU with partial pivoting, and the two least-squares fits the
//! observables need.
//!
//! Matrices are row-major `n x n` slices. Eigenvectors are returned one per
//! contiguous row: vector `k` occupies `[k * n, (k + 1) * n)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

const EPS: f64 = f64::EPSILON;
const MAX_QL_SWEEPS: usize = 60;

/// Eigenvalues (ascending) and optionally eigenvectors of the symmetric
/// matrix `a`.
pub fn symmetric_eigen(a: &[f64], n: usize, vectors: bool) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    if a.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, found: a.len() });
    }
    if n == 0 {
        return Ok((Vec::new(), vectors.then(Vec::new)));
    }
    let mut v = a.to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    householder_tridiagonalize(&mut v, n, &mut d, &mut e);
    // e[i] couples i-1 and i; shift to couple i and i+1
    let off: Vec<f64> = (1..n).map(|i| e[i]).collect();
    if vectors {
        // rows of zt are eigenvectors; start from the transposed reduction basis
        let mut zt = vec![0.0; n * n];
        for k in 0..n {
            for i in 0..n {
                zt[i * n + k] = v[k * n + i];
            }
        }
        tridiagonal_eigen(&mut d, &off, Some(&mut zt))?;
        Ok((d, Some(zt)))
    } else {
        tridiagonal_eigen(&mut d, &off, None)?;
        Ok((d, None))
    }
}

/// Householder reduction to tridiagonal form. On return `v` holds the
/// orthogonal reduction matrix, `d` the diagonal and `e[1..]` the
/// subdiagonal.
fn householder_tridiagonalize(v: &mut [f64], n: usize, d: &mut [f64], e: &mut [f64]) {
    let at = |r: usize, c: usize| r * n + c;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = libm::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in j + 1..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `off` (`off[i]` couples `i` and `i + 1`).
///
/// `d` is overwritten with ascending eigenvalues. When given, the rows of
/// `zt` (an `n x n` row-major basis, e.g. the identity) are rotated so that
/// row `k` becomes the eigenvector of eigenvalue `d[k]` expressed in that
/// basis.
pub fn tridiagonal_eigen(d: &mut [f64], off: &[f64], mut zt: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    if off.len() + 1 != n {
        return Err(Error::DimensionMismatch { expected: n - 1, found: off.len() });
    }
    if let Some(z) = zt.as_deref() {
        if z.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: z.len() });
        }
    }
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > EPS * tst1 {
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_QL_SWEEPS {
                    return Err(Error::NoConvergence { iterations: MAX_QL_SWEEPS });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = zt.as_deref_mut() {
                        let (lo, hi) = z.split_at_mut((i + 1) * n);
                        let row_i = &mut lo[i * n..];
                        let row_i1 = &mut hi[..n];
                        for k in 0..n {
                            let hk = row_i1[k];
                            row_i1[k] = s * row_i[k] + c * hk;
                            row_i[k] = c * row_i[k] - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= EPS * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    // selection sort keeps the pairing with rows of zt
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        for j in i + 1..n {
            if d[j] < d[k] {
                k = j;
            }
        }
        if k != i {
            d.swap(i, k);
            if let Some(z) = zt.as_deref_mut() {
                for c in 0..n {
                    z.swap(i * n + c, k * n + c);
                }
            }
        }
    }
    Ok(())
}

/// LU factorization with partial pivoting of a dense square matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    pivots: Vec<usize>,
}

impl Lu {
    pub fn factor(mut a: Vec<f64>, n: usize) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: a.len() });
        }
        let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        let mut pivots = vec![0; n];
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| a[x * n + k].abs().total_cmp(&a[y * n + k].abs()))
                .unwrap();
            if a[p * n + k].abs() <= EPS * scale * n as f64 {
                return Err(Error::SingularMatrix);
            }
            pivots[k] = p;
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
            }
            let pivot = a[k * n + k];
            for r in k + 1..n {
                let factor = a[r * n + k] / pivot;
                a[r * n + k] = factor;
                if factor != 0.0 {
                    for c in k + 1..n {
                        a[r * n + c] -= factor * a[k * n + c];
                    }
                }
            }
        }
        Ok(Self { n, lu: a, pivots })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            b.swap(k, self.pivots[k]);
        }
        for r in 0..n {
            let mut acc = b[r];
            for c in 0..r {
                acc -= self.lu[r * n + c] * b[c];
            }
            b[r] = acc;
        }
        for r in (0..n).rev() {
            let mut acc = b[r];
            for c in r + 1..n {
                acc -= self.lu[r * n + c] * b[c];
            }
            b[r] = acc / self.lu[r * n + r];
        }
    }

    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut col = vec![0.0; n];
        for c in 0..n {
            col.iter_mut().for_each(|x| *x = 0.0);
            col[c] = 1.0;
            self.solve(&mut col);
            for r in 0..n {
                inv[r * n + c] = col[r];
            }
        }
        inv
    }
}

/// Ordinary least squares `y ≈ slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    let m = x.len() as f64;
    if x.len() < 2 {
        return Err(Error::FitDegeneracy);
    }
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|xi| (xi - mx) * (xi - mx)).sum();
    if sxx <= EPS * m * (mx * mx).max(1.0) {
        return Err(Error::FitDegeneracy);
    }
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(xi, yi)| {
        let r = yi - slope * xi - intercept;
        r * r
    }).sum();
    Ok(LineFit { slope, intercept, residual: libm::sqrt(ss / m) })
}

/// Least squares `y ≈ a * u + b * w` without intercept, returning
/// `(a, b, rms residual)`.
pub fn fit_two_columns(u: &[f64], w: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if u.len() != y.len() || w.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), found: u.len().min(w.len()) });
    }
    // Householder QR on the two columns keeps the fit well conditioned.
    let m = y.len();
    if m < 2 {
        return Err(Error::FitDegeneracy);
    }
    let mut q0: Vec<f64> = u.to_vec();
    let mut q1: Vec<f64> = w.to_vec();
    let mut rhs: Vec<f64> = y.to_vec();
    let mut r = [[0.0; 2]; 2];
    let n0 = libm::sqrt(q0.iter().map(|x| x * x).sum::<f64>());
    let n1 = libm::sqrt(q1.iter().map(|x| x * x).sum::<f64>());
    if n0 == 0.0 || n1 == 0.0 {
        return Err(Error::FitDegeneracy);
    }
    // modified Gram-Schmidt, twice for stability
    r[0][0] = n0;
    q0.iter_mut().for_each(|x| *x /= n0);
    for _ in 0..2 {
        let c: f64 = q0.iter().zip(&q1).map(|(a, b)| a * b).sum();
        r[0][1] += c;
        q1.iter_mut().zip(&q0).for_each(|(b, a)| *b -= c * a);
    }
    let n1p = libm::sqrt(q1.iter().map(|x| x * x).sum::<f64>());
    if n1p <= 1e-10 * n1 {
        return Err(Error::FitDegeneracy);
    }
    r[1][1] = n1p;
    q1.iter_mut().for_each(|x| *x /= n1p);
    let c0: f64 = q0.iter().zip(&rhs).map(|(a, b)| a * b).sum();
    let c1: f64 = q1.iter().zip(&rhs).map(|(a, b)| a * b).sum();
    let b = c1 / r[1][1];
    let a = (c0 - r[0][1] * b) / r[0][0];
    for i in 0..m {
        rhs[i] -= a * u[i] + b * w[i];
    }
    let rms = libm::sqrt(rhs.iter().map(|x| x * x).sum::<f64>() / m as f64);
    Ok((a, b, rms))
}
