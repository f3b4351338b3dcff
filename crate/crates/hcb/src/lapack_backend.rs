//! Dense symmetric kernels from the system LAPACK: `dsyevr` for spectra and
//! Bunch-Kaufman `dsytrf`/`dsytrs` for shifted solves.

use std::sync::OnceLock;

use hcb_core::spectra::{NativeBackend, ShiftedSolver, SymmetricBackend};
use hcb_core::{Error, Result};

#[derive(Debug, Clone, Copy, Default)]
pub struct LapackBackend;

fn lapack_int(n: usize) -> Result<i32> {
    i32::try_from(n).map_err(|_| Error::Capacity { requested: n, max: i32::MAX as usize })
}

impl SymmetricBackend for LapackBackend {
    fn name(&self) -> &'static str {
        "lapack-dsyevr"
    }

    fn eigh(&self, n: usize, mut matrix: Vec<f64>, vectors: bool) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        if matrix.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: matrix.len() });
        }
        if n == 0 {
            return Ok((Vec::new(), vectors.then(Vec::new)));
        }
        let ni = lapack_int(n)?;
        let jobz = if vectors { b'V' } else { b'N' };
        let mut found = 0;
        let mut w = vec![0.0; n];
        let mut z = if vectors { vec![0.0; n * n] } else { vec![0.0; 1] };
        let ldz = if vectors { ni } else { 1 };
        let mut isuppz = vec![0i32; 2 * n];
        let mut info = 0;
        let mut work_query = [0.0];
        let mut iwork_query = [0i32];
        // SAFETY: buffers sized per the dsyevr contract; workspace query first.
        unsafe {
            lapack::dsyevr(
                jobz, b'A', b'L', ni, &mut matrix, ni, 0.0, 0.0, 0, 0, 0.0, &mut found, &mut w, &mut z, ldz,
                &mut isuppz, &mut work_query, -1, &mut iwork_query, -1, &mut info,
            );
        }
        if info != 0 {
            return Err(Error::Backend("dsyevr workspace query failed"));
        }
        let lwork = work_query[0] as usize;
        let liwork = iwork_query[0] as usize;
        let mut work = vec![0.0; lwork];
        let mut iwork = vec![0i32; liwork];
        unsafe {
            lapack::dsyevr(
                jobz, b'A', b'L', ni, &mut matrix, ni, 0.0, 0.0, 0, 0, 0.0, &mut found, &mut w, &mut z, ldz,
                &mut isuppz, &mut work, lapack_int(lwork)?, &mut iwork, lapack_int(liwork)?, &mut info,
            );
        }
        if info != 0 || found != ni {
            return Err(Error::Backend("dsyevr failed"));
        }
        drop(matrix);
        // column-major Z: column k (eigenvector k) is already contiguous
        Ok((w, vectors.then_some(z)))
    }

    fn factor_shifted(&self, n: usize, mut matrix: Vec<f64>, shift: f64) -> Result<Box<dyn ShiftedSolver>> {
        if matrix.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: matrix.len() });
        }
        for i in 0..n {
            matrix[i * n + i] -= shift;
        }
        let ni = lapack_int(n)?;
        let mut ipiv = vec![0i32; n];
        let mut info = 0;
        let mut query = [0.0];
        unsafe {
            lapack::dsytrf(b'L', ni, &mut matrix, ni, &mut ipiv, &mut query, -1, &mut info);
        }
        let lwork = (query[0] as usize).max(1);
        let mut work = vec![0.0; lwork];
        unsafe {
            lapack::dsytrf(b'L', ni, &mut matrix, ni, &mut ipiv, &mut work, lapack_int(lwork)?, &mut info);
        }
        if info > 0 {
            return Err(Error::SingularMatrix);
        }
        if info < 0 {
            return Err(Error::Backend("dsytrf failed"));
        }
        Ok(Box::new(LdltSolver { n, factor: matrix, ipiv }))
    }
}

/// Checks `dsyevr` on a dense 320 x 320 problem. Some OpenBLAS builds pick a
/// faulty kernel at runtime; the residual catches it.
pub fn probe() -> Result<()> {
    let n = 320;
    let a: Vec<f64> = (0..n * n)
        .map(|k| {
            let (r, c) = (k / n, k % n);
            let (lo, hi) = (r.min(c), r.max(c));
            ((lo * 13 + hi * 5) as f64).sin()
        })
        .collect();
    let (w, z) = LapackBackend.eigh(n, a.clone(), true)?;
    let z = z.expect("vectors requested");
    for k in (0..n).step_by(53) {
        let v = &z[k * n..(k + 1) * n];
        for r in 0..n {
            let av: f64 = (0..n).map(|c| a[r * n + c] * v[c]).sum();
            if (av - w[k] * v[r]).abs() > 1e-9 {
                return Err(Error::Backend("LAPACK self-check failed"));
            }
        }
    }
    Ok(())
}

/// LAPACK when it passes [`probe`], otherwise the pure-Rust backend.
pub fn select_backend() -> &'static dyn SymmetricBackend {
    static CHOICE: OnceLock<bool> = OnceLock::new();
    let lapack_ok = *CHOICE.get_or_init(|| match probe() {
        Ok(()) => true,
        Err(e) => {
            log::warn!("{e}; falling back to the native eigensolver (set OPENBLAS_CORETYPE=Haswell to fix)");
            false
        }
    });
    if lapack_ok {
        &LapackBackend
    } else {
        &NativeBackend
    }
}

struct LdltSolver {
    n: usize,
    factor: Vec<f64>,
    ipiv: Vec<i32>,
}

impl ShiftedSolver for LdltSolver {
    fn solve(&self, rhs: &mut [f64]) -> Result<()> {
        if rhs.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: rhs.len() });
        }
        let ni = lapack_int(self.n)?;
        let mut info = 0;
        unsafe {
            lapack::dsytrs(b'L', ni, 1, &self.factor, ni, &self.ipiv, rhs, ni, &mut info);
        }
        if info != 0 {
            return Err(Error::Backend("dsytrs failed"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> Vec<f64> {
        (0..n * n)
            .map(|k| {
                let (r, c) = (k / n, k % n);
                let (lo, hi) = (r.min(c), r.max(c));
                ((lo * 13 + hi * 5) as f64).sin()
            })
            .collect()
    }

    #[test]
    fn agrees_with_native() {
        let n = 37;
        let a = sample(n);
        let (wl, zl) = LapackBackend.eigh(n, a.clone(), true).unwrap();
        let (wn, _) = NativeBackend.eigh(n, a.clone(), false).unwrap();
        for (x, y) in wl.iter().zip(&wn) {
            assert!((x - y).abs() < 1e-12);
        }
        let z = zl.unwrap();
        for k in 0..n {
            let v = &z[k * n..(k + 1) * n];
            for r in 0..n {
                let av: f64 = (0..n).map(|c| a[r * n + c] * v[c]).sum();
                assert!((av - wl[k] * v[r]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn probe_passes() {
        probe().unwrap();
        assert_eq!(select_backend().name(), "lapack-dsyevr");
    }

    #[test]
    fn shifted_solve() {
        let n = 20;
        let a = sample(n);
        let solver = LapackBackend.factor_shifted(n, a.clone(), 0.37).unwrap();
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut x = b.clone();
        solver.solve(&mut x).unwrap();
        for r in 0..n {
            let ax: f64 = (0..n).map(|c| a[r * n + c] * x[c]).sum::<f64>() - 0.37 * x[r];
            assert!((ax - b[r]).abs() < 1e-9);
        }
    }
}
