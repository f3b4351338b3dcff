//! Sector diagonalization.
//!
//! Full mode densifies the sector Hamiltonian and hands it to a
//! [`SymmetricBackend`]. Window mode finds the eigenpairs nearest a target
//! energy with thick-restart (Krylov-Schur) Lanczos on `(H - σ)^-1`; the
//! shifted system is factored densely up to [`DENSE_LIMIT`] and solved with
//! MINRES above it.
//!
//! Energies are in the frame rotating at the qubit frequency. The vacuum has
//! energy zero, and in the lab frame it is the global ground state, so no
//! offset is subtracted (see [`EigenDecomposition::ground_offset`]).

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::basis::SectorBasis;
use crate::hamiltonian::{build_sector_hamiltonian, DisorderRealization};
use crate::lattice::LatticeSpec;
use crate::linalg::{symmetric_eigen, Lu};
use crate::sparse::SparseOperator;
use crate::{Error, Result};

/// Largest sector handled by the dense path.
pub const DENSE_LIMIT: usize = 16384;
/// Eigenvalues closer than this are flagged as one degenerate cluster.
pub const DEGENERACY_GAP: f64 = 1e-10;
/// Required `‖H v - ε v‖` for every returned pair.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

/// Window-mode requests on sectors up to this size are answered densely.
const WINDOW_DENSE_CUTOFF: usize = 600;

/// Repeated solves with a factored `A - σ I`.
pub trait ShiftedSolver: Send + Sync {
    fn solve(&self, rhs: &mut [f64]) -> Result<()>;
}

/// Dense symmetric eigen- and linear solvers.
pub trait SymmetricBackend: Sync {
    fn name(&self) -> &'static str;

    /// Ascending eigenvalues of the row-major `n x n` symmetric `matrix`,
    /// and, when `vectors` is set, the eigenvectors stored one per
    /// contiguous block of `n`.
    fn eigh(&self, n: usize, matrix: Vec<f64>, vectors: bool) -> Result<(Vec<f64>, Option<Vec<f64>>)>;

    /// Factors `matrix - shift * I`.
    fn factor_shifted(&self, n: usize, matrix: Vec<f64>, shift: f64) -> Result<Box<dyn ShiftedSolver>>;
}

/// Pure-Rust backend: Householder tridiagonalization with implicit QL, and
/// LU with partial pivoting. Cubic and single-threaded; fine up to a few
/// thousand states.
#[derive(Debug, Clone, Copy, Default)]
pub struct NativeBackend;

struct LuSolver(Lu);

impl ShiftedSolver for LuSolver {
    fn solve(&self, rhs: &mut [f64]) -> Result<()> {
        if rhs.len() != self.0.dim() {
            return Err(Error::DimensionMismatch { expected: self.0.dim(), found: rhs.len() });
        }
        self.0.solve(rhs);
        Ok(())
    }
}

impl SymmetricBackend for NativeBackend {
    fn name(&self) -> &'static str {
        "native-householder-ql"
    }

    fn eigh(&self, n: usize, matrix: Vec<f64>, vectors: bool) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        symmetric_eigen(&matrix, n, vectors)
    }

    fn factor_shifted(&self, n: usize, mut matrix: Vec<f64>, shift: f64) -> Result<Box<dyn ShiftedSolver>> {
        if matrix.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: matrix.len() });
        }
        for i in 0..n {
            matrix[i * n + i] -= shift;
        }
        Ok(Box::new(LuSolver(Lu::factor(matrix, n)?)))
    }
}

/// What [`diagonalize_sector`] should return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Every eigenpair (dense path).
    Full,
    /// Every eigenvalue, no vectors (dense path).
    ValuesOnly,
    /// The `count` eigenpairs nearest `target`.
    Window { target: f64, count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub residual_tolerance: f64,
    pub dense_limit: usize,
    /// Restart cap for the window-mode iteration.
    pub max_restarts: usize,
    /// Relative tolerance of the MINRES inner solves.
    pub inner_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { residual_tolerance: RESIDUAL_TOLERANCE, dense_limit: DENSE_LIMIT, max_restarts: 300, inner_tolerance: 1e-12 }
    }
}

/// Eigenpairs of one sector, ascending in energy.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    sector: usize,
    dim: usize,
    values: Vec<f64>,
    vectors: Option<Vec<f64>>,
    residual: f64,
    orthonormality: f64,
    degenerate: Vec<bool>,
}

impl EigenDecomposition {
    fn new(sector: usize, dim: usize, values: Vec<f64>, vectors: Option<Vec<f64>>) -> Self {
        let degenerate = degeneracy_flags(&values);
        Self { sector, dim, values, vectors, residual: 0.0, orthonormality: 0.0, degenerate }
    }

    /// Excitation number `n`.
    pub fn sector(&self) -> usize {
        self.sector
    }

    /// Dimension of the sector.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn has_vectors(&self) -> bool {
        self.vectors.is_some()
    }

    /// Eigenvector `k` in sector-basis order.
    pub fn vector(&self, k: usize) -> Option<&[f64]> {
        self.vectors.as_ref().map(|v| &v[k * self.dim..(k + 1) * self.dim])
    }

    /// Largest `‖H v - ε v‖` over the returned pairs (zero without vectors).
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Largest `|v_k · v_l - δ_kl|` observed by the orthonormality check.
    pub fn orthonormality(&self) -> f64 {
        self.orthonormality
    }

    /// Offset subtracted from the raw sector eigenvalues. Always zero: the
    /// vacuum sits at zero and is the lab-frame ground state.
    pub fn ground_offset(&self) -> f64 {
        0.0
    }

    /// Per-eigenvalue flag: part of a cluster with gap below [`DEGENERACY_GAP`].
    pub fn degenerate(&self) -> &[bool] {
        &self.degenerate
    }

    /// Index ranges of eigenvalue clusters (singletons included).
    pub fn clusters(&self) -> Vec<Range<usize>> {
        clusters(&self.values)
    }

    /// Index of the eigenvalue nearest `energy` (lowest index on ties).
    pub fn nearest(&self, energy: f64) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (k, &e) in self.values.iter().enumerate() {
            if best.is_none_or(|b| (e - energy).abs() < (self.values[b] - energy).abs()) {
                best = Some(k);
            }
        }
        best
    }
}

fn degeneracy_flags(values: &[f64]) -> Vec<bool> {
    let mut flags = vec![false; values.len()];
    for k in 1..values.len() {
        if values[k] - values[k - 1] < DEGENERACY_GAP {
            flags[k] = true;
            flags[k - 1] = true;
        }
    }
    flags
}

fn clusters(values: &[f64]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || values[k] - values[k - 1] >= DEGENERACY_GAP {
            out.push(start..k);
            start = k;
        }
    }
    out
}

/// `max ε - min ε`.
pub fn sector_bandwidth(dec: &EigenDecomposition) -> Result<f64> {
    match (dec.values.first(), dec.values.last()) {
        (Some(lo), Some(hi)) => Ok(hi - lo),
        _ => Err(Error::InvalidArgument("bandwidth of an empty decomposition")),
    }
}

/// Diagonalizes with the pure-Rust backend and default options.
pub fn diagonalize_sector(h: &SparseOperator<f64>, sector: usize, mode: Mode) -> Result<EigenDecomposition> {
    diagonalize_sector_with(h, sector, mode, &NativeBackend, &SolverOptions::default())
}

/// Builds and diagonalizes the sector with `n` excitations.
pub fn diagonalize_lattice_sector(
    lattice: &LatticeSpec,
    disorder: &DisorderRealization,
    j: f64,
    basis: &SectorBasis,
    mode: Mode,
    backend: &dyn SymmetricBackend,
    options: &SolverOptions,
) -> Result<EigenDecomposition> {
    let h = build_sector_hamiltonian(lattice, disorder, j, basis)?;
    diagonalize_sector_with(&h, basis.excitations(), mode, backend, options)
}

pub fn diagonalize_sector_with(
    h: &SparseOperator<f64>,
    sector: usize,
    mode: Mode,
    backend: &dyn SymmetricBackend,
    options: &SolverOptions,
) -> Result<EigenDecomposition> {
    if !h.is_hermitian() {
        return Err(Error::NotHermitian { deviation: h.hermitian_deviation() });
    }
    let n = h.dim();
    let mut dec = match mode {
        Mode::Full | Mode::ValuesOnly => {
            if n > options.dense_limit {
                return Err(Error::Capacity { requested: n, max: options.dense_limit });
            }
            let vectors = mode == Mode::Full;
            let (values, vecs) = backend.eigh(n, h.to_dense(), vectors)?;
            EigenDecomposition::new(sector, n, values, vecs)
        }
        Mode::Window { target, count } => {
            if count == 0 || count > n {
                return Err(Error::InvalidArgument("window count must be between 1 and the sector dimension"));
            }
            if n <= WINDOW_DENSE_CUTOFF.max(krylov_size(count) + 1) {
                let (values, vecs) = backend.eigh(n, h.to_dense(), true)?;
                let (values, vecs) = select_nearest(&values, &vecs.unwrap(), n, target, count);
                EigenDecomposition::new(sector, n, values, Some(vecs))
            } else {
                let (values, vecs) = shift_invert_window(h, target, count, backend, options)?;
                EigenDecomposition::new(sector, n, values, Some(vecs))
            }
        }
    };
    if dec.vectors.is_some() {
        dec.residual = max_residual(h, &dec);
        dec.orthonormality = orthonormality_deviation(&dec);
        let bound = options.residual_tolerance;
        if dec.residual > bound || dec.orthonormality > bound {
            return Err(Error::Inaccurate { residual: dec.residual, orthonormality: dec.orthonormality });
        }
    }
    Ok(dec)
}

fn select_nearest(values: &[f64], vectors: &[f64], n: usize, target: f64, count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| (values[a] - target).abs().total_cmp(&(values[b] - target).abs()).then(a.cmp(&b)));
    order.truncate(count);
    order.sort_unstable();
    let vals = order.iter().map(|&k| values[k]).collect();
    let mut vecs = Vec::with_capacity(count * n);
    for &k in &order {
        vecs.extend_from_slice(&vectors[k * n..(k + 1) * n]);
    }
    (vals, vecs)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

fn max_residual(h: &SparseOperator<f64>, dec: &EigenDecomposition) -> f64 {
    let mut hv = vec![0.0; dec.dim];
    let mut worst = 0.0f64;
    for k in 0..dec.len() {
        let v = dec.vector(k).unwrap();
        h.apply(v, &mut hv);
        axpy(-dec.values[k], v, &mut hv);
        worst = worst.max(norm2(&hv));
    }
    worst
}

/// Checks a strided sample of at most 32 vectors against every vector.
fn orthonormality_deviation(dec: &EigenDecomposition) -> f64 {
    let m = dec.len();
    let stride = m.div_ceil(32).max(1);
    let mut worst = 0.0f64;
    for k in (0..m).step_by(stride) {
        let vk = dec.vector(k).unwrap();
        for l in 0..m {
            let d = dot(vk, dec.vector(l).unwrap());
            let expect = if k == l { 1.0 } else { 0.0 };
            worst = worst.max((d - expect).abs());
        }
    }
    worst
}

fn krylov_size(count: usize) -> usize {
    (2 * count + 20).max(40)
}

fn random_unit(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let s = norm2(&v);
    v.iter_mut().for_each(|x| *x /= s);
    v
}

struct Minres<'a> {
    h: &'a SparseOperator<f64>,
    shift: f64,
    tolerance: f64,
    max_iterations: usize,
}

impl ShiftedSolver for Minres<'_> {
    fn solve(&self, rhs: &mut [f64]) -> Result<()> {
        let x = minres(self.h, self.shift, rhs, self.tolerance, self.max_iterations)?;
        rhs.copy_from_slice(&x);
        Ok(())
    }
}

/// MINRES for `(H - shift) x = b` (Paige-Saunders, unpreconditioned).
pub fn minres(h: &SparseOperator<f64>, shift: f64, b: &[f64], tolerance: f64, max_iterations: usize) -> Result<Vec<f64>> {
    let n = h.dim();
    let mut x = vec![0.0; n];
    let beta1 = norm2(b);
    if beta1 == 0.0 {
        return Ok(x);
    }
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = b.to_vec();
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let (mut oldb, mut beta, mut dbar, mut epsln) = (0.0, beta1, 0.0, 0.0);
    let mut phibar = beta1;
    let (mut cs, mut sn) = (-1.0, 0.0);
    for itn in 1..=max_iterations {
        let s = 1.0 / beta;
        v.iter_mut().zip(&y).for_each(|(vi, yi)| *vi = s * yi);
        h.apply(&v, &mut y);
        axpy(-shift, &v, &mut y);
        if itn >= 2 {
            axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = dot(&v, &y);
        axpy(-alfa / beta, &r2, &mut y);
        core::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        oldb = beta;
        beta = norm2(&r2);
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = libm::hypot(gbar, beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let denom = 1.0 / gamma;
        core::mem::swap(&mut w1, &mut w2);
        core::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * denom;
        }
        axpy(phi, &w, &mut x);
        if phibar <= tolerance * beta1 || beta == 0.0 {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence { iterations: max_iterations })
}

fn shift_invert_window(
    h: &SparseOperator<f64>,
    target: f64,
    count: usize,
    backend: &dyn SymmetricBackend,
    options: &SolverOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = h.dim();
    let scale = 1.0 + h.norm_bound();
    let build = |shift: f64| -> Result<Box<dyn ShiftedSolver + '_>> {
        if n <= options.dense_limit {
            backend.factor_shifted(n, h.to_dense(), shift)
        } else {
            Ok(Box::new(Minres { h, shift, tolerance: options.inner_tolerance, max_iterations: 20 * n }))
        }
    };
    // An exact eigenvalue at the target makes the shifted matrix singular.
    let solver = match build(target) {
        Ok(s) => s,
        Err(Error::SingularMatrix) => {
            build(target + 1e-7 * scale)?
        }
        Err(e) => return Err(e),
    };
    krylov_schur(h, count, solver.as_ref(), options)
}

/// Thick-restart Lanczos on `(H - shift)^-1` with full reorthogonalization.
fn krylov_schur(
    h: &SparseOperator<f64>,
    count: usize,
    solver: &dyn ShiftedSolver,
    options: &SolverOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = h.dim();
    let m = krylov_size(count).min(n - 1);
    let keep = (count + (m - count) / 2).min(m - 1);
    let stride = m + 1;
    let mut proj = vec![0.0; stride * stride];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    basis.push(random_unit(n, 0x5eed));
    let mut fresh_seed = 1u64;
    for _ in 0..options.max_restarts {
        while basis.len() <= m {
            let j = basis.len() - 1;
            let mut w = basis[j].clone();
            solver.solve(&mut w)?;
            let scale = norm2(&w);
            for _ in 0..2 {
                for (i, vi) in basis.iter().enumerate() {
                    let c = dot(vi, &w);
                    axpy(-c, vi, &mut w);
                    proj[i * stride + j] += c;
                }
            }
            let mut beta = norm2(&w);
            if beta <= 1e-12 * scale {
                // invariant subspace: continue with a fresh orthogonal direction
                beta = 0.0;
                w = random_unit(n, fresh_seed);
                fresh_seed += 1;
                for _ in 0..2 {
                    for vi in &basis {
                        let c = dot(vi, &w);
                        axpy(-c, vi, &mut w);
                    }
                }
                let s = norm2(&w);
                w.iter_mut().for_each(|x| *x /= s);
            } else {
                w.iter_mut().for_each(|x| *x /= beta);
            }
            proj[(j + 1) * stride + j] = beta;
            basis.push(w);
        }
        let beta = proj[m * stride + m - 1];
        let mut a = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let v = proj[i * stride + j];
                a[i * m + j] = v;
                a[j * m + i] = v;
            }
        }
        let (theta, s) = symmetric_eigen(&a, m, true)?;
        let s = s.unwrap();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&x, &y| theta[y].abs().total_cmp(&theta[x].abs()).then(x.cmp(&y)));
        let estimate = |k: usize| (beta * s[k * m + m - 1]).abs();
        let top = theta[order[0]].abs();
        let converged = order[..count].iter().all(|&k| estimate(k) <= 1e-11 * top.max(theta[k].abs()));
        let ritz = |k: usize| -> Vec<f64> {
            let mut x = vec![0.0; n];
            for (i, vi) in basis.iter().take(m).enumerate() {
                axpy(s[k * m + i], vi, &mut x);
            }
            x
        };
        if converged {
            let mut pairs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(count);
            let mut hx = vec![0.0; n];
            let mut ok = true;
            for &k in &order[..count] {
                let mut x = ritz(k);
                let nx = norm2(&x);
                x.iter_mut().for_each(|v| *v /= nx);
                h.apply(&x, &mut hx);
                let lambda = dot(&x, &hx);
                axpy(-lambda, &x, &mut hx);
                if norm2(&hx) > options.residual_tolerance {
                    ok = false;
                    break;
                }
                pairs.push((lambda, x));
            }
            if ok {
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                let values = pairs.iter().map(|p| p.0).collect();
                let mut vectors = Vec::with_capacity(count * n);
                for (_, x) in pairs {
                    vectors.extend_from_slice(&x);
                }
                return Ok((values, vectors));
            }
        }
        // thick restart on the `keep` dominant Ritz vectors
        let mut next: Vec<Vec<f64>> = order[..keep].iter().map(|&k| ritz(k)).collect();
        next.push(basis.pop().unwrap());
        basis = next;
        proj.iter_mut().for_each(|x| *x = 0.0);
        for (i, &k) in order[..keep].iter().enumerate() {
            proj[i * stride + i] = theta[k];
        }
    }
    Err(Error::NoConvergence { iterations: options.max_restarts })
}
