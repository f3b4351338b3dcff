//! Short-iterative Lanczos propagation `ψ(t) = exp(-iHt) ψ(0)` for a
//! time-independent hermitian `H`.
//!
//! Each step builds one Krylov space of dimension at most `max_subspace` and
//! then picks the longest step whose error estimate
//! `β_m |[exp(-iT dt) e_1]_m|` stays below the tolerance.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::basis::PureState;
use crate::linalg::tridiagonal_eigen;
use crate::sparse::SparseOperator;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionOptions {
    /// Error allowed per step.
    pub tolerance: f64,
    pub max_subspace: usize,
    /// Steps allowed before giving up.
    pub max_steps: usize,
}

impl Default for EvolutionOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_subspace: 30, max_steps: 1_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvolutionReport {
    pub steps: usize,
    pub matvecs: usize,
    /// `| ‖ψ(t)‖ - ‖ψ(0)‖ |`.
    pub norm_drift: f64,
    /// `| <H>_t - <H>_0 |`.
    pub energy_drift: f64,
    /// Row-sum bound on `‖H‖`.
    pub norm_bound: f64,
}

/// Evolves `state` for `duration` under `h`.
pub fn evolve(state: &PureState, h: &SparseOperator<Complex64>, duration: f64, tolerance: f64) -> Result<PureState> {
    let opts = EvolutionOptions { tolerance, ..EvolutionOptions::default() };
    let (out, _) = evolve_with(state, h, &[duration], &opts, |_, _| Ok(()))?;
    Ok(out)
}

/// Evolves through ascending `checkpoints`, calling `on_checkpoint(k, ψ(t_k))`
/// at each. Returns the state at the last checkpoint.
pub fn evolve_with<F>(
    state: &PureState,
    h: &SparseOperator<Complex64>,
    checkpoints: &[f64],
    opts: &EvolutionOptions,
    mut on_checkpoint: F,
) -> Result<(PureState, EvolutionReport)>
where
    F: FnMut(usize, &PureState) -> Result<()>,
{
    let dim = h.dim();
    if state.amplitudes().len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: state.amplitudes().len() });
    }
    if !h.is_hermitian() {
        return Err(Error::NotHermitian { deviation: h.hermitian_deviation() });
    }
    if checkpoints.iter().any(|t| !t.is_finite() || *t < 0.0) || checkpoints.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("checkpoints must be finite, nonnegative and ascending"));
    }
    if opts.max_subspace < 2 || !(opts.tolerance > 0.0) {
        return Err(Error::InvalidArgument("evolution options"));
    }
    let mut psi = state.amplitudes().to_vec();
    let norm0 = norm(&psi);
    let mut report = EvolutionReport { norm_bound: h.norm_bound(), ..EvolutionReport::default() };
    let energy0 = expectation(h, &psi);
    let mut workspace = Workspace::new(dim, opts.max_subspace);
    let mut t = 0.0;
    let mut dt_guess = 1.0 / report.norm_bound.max(1e-300);
    for (k, &target) in checkpoints.iter().enumerate() {
        while t < target {
            if report.steps >= opts.max_steps {
                return Err(Error::NoConvergence { iterations: report.steps });
            }
            let remaining = target - t;
            let dt = workspace.step(h, &mut psi, remaining.min(dt_guess.max(remaining * 1e-12)), opts, &mut report)?;
            t = if dt >= remaining { target } else { t + dt };
            dt_guess = dt * 1.25;
            report.steps += 1;
        }
        let snapshot = PureState::new(state.space().clone(), psi.clone())?;
        on_checkpoint(k, &snapshot)?;
    }
    report.norm_drift = (norm(&psi) - norm0).abs();
    report.energy_drift = (expectation(h, &psi) - energy0).abs();
    Ok((PureState::new(state.space().clone(), psi)?, report))
}

fn norm(v: &[Complex64]) -> f64 {
    libm::sqrt(v.iter().map(|a| a.norm_sqr()).sum::<f64>())
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `<ψ|H|ψ>` (real for hermitian `H`).
pub fn expectation(h: &SparseOperator<Complex64>, psi: &[Complex64]) -> f64 {
    let mut hpsi = vec![Complex64::default(); psi.len()];
    h.apply(psi, &mut hpsi);
    inner(psi, &hpsi).re
}

struct Workspace {
    basis: Vec<Vec<Complex64>>,
    w: Vec<Complex64>,
}

impl Workspace {
    fn new(dim: usize, m: usize) -> Self {
        Self { basis: (0..=m).map(|_| vec![Complex64::default(); dim]).collect(), w: vec![Complex64::default(); dim] }
    }

    /// Advances `psi` by at most `dt_max`; returns the step taken.
    fn step(
        &mut self,
        h: &SparseOperator<Complex64>,
        psi: &mut [Complex64],
        dt_max: f64,
        opts: &EvolutionOptions,
        report: &mut EvolutionReport,
    ) -> Result<f64> {
        let beta0 = norm(psi);
        if beta0 == 0.0 {
            return Ok(dt_max);
        }
        let scale = report.norm_bound.max(1e-300);
        let mut alpha = Vec::with_capacity(opts.max_subspace);
        let mut beta = Vec::with_capacity(opts.max_subspace);
        self.basis[0].iter_mut().zip(psi.iter()).for_each(|(b, p)| *b = p / beta0);
        let mut m = 0;
        let mut exact = false;
        while m < opts.max_subspace {
            h.apply(&self.basis[m], &mut self.w);
            report.matvecs += 1;
            let a = inner(&self.basis[m], &self.w).re;
            alpha.push(a);
            for _ in 0..2 {
                for vi in &self.basis[..=m] {
                    let c = inner(vi, &self.w);
                    self.w.iter_mut().zip(vi).for_each(|(wj, vj)| *wj -= c * vj);
                }
            }
            let b = norm(&self.w);
            m += 1;
            if b <= 1e-13 * scale {
                exact = true;
                beta.push(0.0);
                break;
            }
            beta.push(b);
            let next = &mut self.basis[m];
            next.iter_mut().zip(&self.w).for_each(|(x, wj)| *x = wj / b);
        }
        // eigen-decomposition of the projected tridiagonal
        let mut evals = alpha.clone();
        let mut zt = vec![0.0; m * m];
        for i in 0..m {
            zt[i * m + i] = 1.0;
        }
        tridiagonal_eigen(&mut evals, &beta[..m - 1], Some(&mut zt))?;
        let coeffs = |dt: f64| -> Vec<Complex64> {
            let mut c = vec![Complex64::default(); m];
            for k in 0..m {
                let q = &zt[k * m..(k + 1) * m];
                let phase = Complex64::from_polar(q[0], -evals[k] * dt);
                for (ci, qi) in c.iter_mut().zip(q) {
                    *ci += phase * qi;
                }
            }
            c
        };
        let residual_coupling = beta[m - 1];
        let mut dt = dt_max;
        let mut c = coeffs(dt);
        if !exact {
            let mut tries = 0;
            while residual_coupling * c[m - 1].norm() * beta0 > opts.tolerance {
                dt *= 0.7;
                c = coeffs(dt);
                tries += 1;
                if tries > 200 {
                    return Err(Error::NoConvergence { iterations: tries });
                }
            }
        }
        psi.iter_mut().for_each(|p| *p = Complex64::default());
        for (ci, vi) in c.iter().zip(&self.basis[..m]) {
            let s = ci * beta0;
            psi.iter_mut().zip(vi).for_each(|(p, v)| *p += s * v);
        }
        Ok(dt)
    }
}
