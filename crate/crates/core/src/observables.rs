//! Transverse correlations, correlation-length fits, reduced density
//! matrices, second Rényi entropies and area/volume scaling fits.
//!
//! Logarithms are natural throughout.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::basis::{PureState, Space};
use crate::lattice::{LatticeSpec, Subset};
use crate::linalg::{fit_line, fit_two_columns};
use crate::sparse::Scalar;
use crate::{Error, Result};

/// Default cap on the number of sites of a reduced density matrix.
pub const DEFAULT_MAX_SUBSET_SITES: usize = 8;
/// Pairs with `|C|²` below this are left out of the correlation fit.
pub const CORRELATION_FLOOR: f64 = 1e-12;
/// Correlation length reported for saturated fits.
pub const DEFAULT_XI_CAP: f64 = 100.0;
/// Slopes at or above this count as distance independent.
pub const SATURATION_SLOPE: f64 = -1e-6;
const TRACE_TOLERANCE: f64 = 1e-8;

/// Symmetric `N x N` matrix of `C^x_ij = <σx_i σx_j> - <σx_i><σx_j>`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    sites: usize,
    values: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn from_values(sites: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != sites * sites {
            return Err(Error::DimensionMismatch { expected: sites * sites, found: values.len() });
        }
        Ok(Self { sites, values })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.sites + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entrywise mean, used for degenerate clusters.
    pub fn average(items: &[CorrelationMatrix]) -> Result<Self> {
        let first = items.first().ok_or(Error::InvalidArgument("nothing to average"))?;
        let mut values = vec![0.0; first.values.len()];
        for c in items {
            if c.sites != first.sites {
                return Err(Error::DimensionMismatch { expected: first.sites, found: c.sites });
            }
            values.iter_mut().zip(&c.values).for_each(|(a, b)| *a += b);
        }
        let k = items.len() as f64;
        values.iter_mut().for_each(|a| *a /= k);
        Ok(Self { sites: first.sites, values })
    }
}

/// `C^x` for a sector or full-space state.
pub fn correlation_matrix(state: &PureState, lattice: &LatticeSpec) -> Result<CorrelationMatrix> {
    if state.sites() != lattice.num_sites() {
        return Err(Error::DimensionMismatch { expected: lattice.num_sites(), found: state.sites() });
    }
    Ok(correlations(state.space(), state.amplitudes()))
}

/// `C^x` for real sector amplitudes, e.g. an eigenvector.
pub fn correlation_matrix_real(space: &Space, amplitudes: &[f64]) -> Result<CorrelationMatrix> {
    if amplitudes.len() != space.dimension() {
        return Err(Error::DimensionMismatch { expected: space.dimension(), found: amplitudes.len() });
    }
    Ok(correlations(space, amplitudes))
}

fn correlations<T: Scalar>(space: &Space, psi: &[T]) -> CorrelationMatrix {
    let n = space.sites();
    let mut single = vec![0.0; n];
    if let Space::Full { .. } = space {
        for (i, s) in single.iter_mut().enumerate() {
            let bit = 1usize << i;
            let mut acc = T::default();
            for (m, &a) in psi.iter().enumerate() {
                acc += a.conj() * psi[m ^ bit];
            }
            *s = acc.real();
        }
    }
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0 - single[i] * single[i];
        for j in i + 1..n {
            let flip = (1u64 << i) | (1u64 << j);
            let mut acc = T::default();
            match space {
                Space::Full { .. } => {
                    for (m, &a) in psi.iter().enumerate() {
                        acc += a.conj() * psi[m ^ flip as usize];
                    }
                }
                Space::Sector(basis) => {
                    for (k, &mask) in basis.states().iter().enumerate() {
                        let bi = (mask >> i) & 1;
                        let bj = (mask >> j) & 1;
                        if bi != bj {
                            let other = basis.index_of(mask ^ flip).expect("hop stays in sector");
                            acc += psi[k].conj() * psi[other];
                        }
                    }
                }
            }
            let c = acc.real() - single[i] * single[j];
            values[i * n + j] = c;
            values[j * n + i] = c;
        }
    }
    CorrelationMatrix { sites: n, values }
}

/// Exponential fit `|C_ij|² ≈ A exp(-d_ij / ξ)` over nearest and
/// next-nearest pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationFit {
    pub amplitude: f64,
    pub xi: f64,
    /// RMS residual of the log-linear fit.
    pub residual: f64,
    pub saturated: bool,
    pub used_pairs: usize,
    /// Pairs at distance 1 or 2 dropped by the floor.
    pub excluded_pairs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationFitOptions {
    pub floor: f64,
    pub xi_cap: f64,
}

impl Default for CorrelationFitOptions {
    fn default() -> Self {
        Self { floor: CORRELATION_FLOOR, xi_cap: DEFAULT_XI_CAP }
    }
}

pub fn fit_correlation_length(c: &CorrelationMatrix, lattice: &LatticeSpec) -> Result<CorrelationFit> {
    fit_correlation_length_with(c, lattice, &CorrelationFitOptions::default())
}

/// Least squares of `log |C|²` against Manhattan distance `d ∈ {1, 2}`.
///
/// A slope at or above [`SATURATION_SLOPE`], or a length beyond the cap,
/// sets `saturated` and reports `ξ = xi_cap`.
pub fn fit_correlation_length_with(
    c: &CorrelationMatrix,
    lattice: &LatticeSpec,
    opts: &CorrelationFitOptions,
) -> Result<CorrelationFit> {
    let n = lattice.num_sites();
    if c.sites != n {
        return Err(Error::DimensionMismatch { expected: n, found: c.sites });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = 0;
    let mut seen = [false; 2];
    for i in 0..n {
        for j in i + 1..n {
            let d = lattice.manhattan_distance(i, j)?;
            if d == 0 || d > 2 {
                continue;
            }
            let sq = c.get(i, j) * c.get(i, j);
            if sq < opts.floor {
                excluded += 1;
                continue;
            }
            seen[d - 1] = true;
            xs.push(d as f64);
            ys.push(libm::log(sq));
        }
    }
    if xs.is_empty() {
        return Err(Error::NoSignal);
    }
    if !(seen[0] && seen[1]) {
        return Err(Error::FitDegeneracy);
    }
    let fit = fit_line(&xs, &ys)?;
    let amplitude = libm::exp(fit.intercept);
    let (xi, saturated) = if fit.slope >= SATURATION_SLOPE || -1.0 / fit.slope > opts.xi_cap {
        (opts.xi_cap, true)
    } else {
        (-1.0 / fit.slope, false)
    };
    Ok(CorrelationFit { amplitude, xi, residual: fit.residual, saturated, used_pairs: xs.len(), excluded_pairs: excluded })
}

/// Hermitian density matrix over `2^V` local configurations; local bit `k`
/// is the occupation of the `k`-th subset member (ascending site order).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn from_entries(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: data.len() });
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim + c]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `Tr ρ²` for hermitian `ρ`.
    pub fn purity(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Gathers the local index of every subset member configuration.
fn local_index(mask: u64, members: &[usize]) -> usize {
    members.iter().enumerate().fold(0, |acc, (k, &s)| acc | ((((mask >> s) & 1) as usize) << k))
}

/// Basis states grouped by their configuration outside a subset.
///
/// Shared by all states of one space, so bulk entropy evaluation pays the
/// grouping once per subset.
#[derive(Debug, Clone)]
pub struct SubsetPartition {
    volume: usize,
    /// (state index, local index) sorted by outside configuration.
    entries: Vec<(u32, u16)>,
    /// Group boundaries into `entries`.
    groups: Vec<u32>,
}

impl SubsetPartition {
    pub fn new(space: &Space, subset: &Subset, max_sites: usize) -> Result<Self> {
        let v = subset.volume();
        if v > max_sites || v > 15 {
            return Err(Error::SubsetTooLarge { size: v, max: max_sites.min(15) });
        }
        if subset.mask() >> space.sites() != 0 {
            return Err(Error::InvalidArgument("subset lies outside the lattice"));
        }
        let dim = space.dimension();
        if dim > u32::MAX as usize {
            return Err(Error::Capacity { requested: dim, max: u32::MAX as usize });
        }
        let sub = subset.mask();
        let mut keyed: Vec<(u64, u32, u16)> = (0..dim)
            .map(|i| {
                let m = space.mask(i);
                (m & !sub, i as u32, local_index(m, subset.members()) as u16)
            })
            .collect();
        keyed.sort_unstable_by_key(|&(rest, i, _)| (rest, i));
        let mut groups = vec![0u32];
        for k in 1..keyed.len() {
            if keyed[k].0 != keyed[k - 1].0 {
                groups.push(k as u32);
            }
        }
        groups.push(keyed.len() as u32);
        let entries = keyed.into_iter().map(|(_, i, l)| (i, l)).collect();
        Ok(Self { volume: v, entries, groups })
    }

    pub fn local_dim(&self) -> usize {
        1 << self.volume
    }

    pub fn density_matrix<T: Scalar>(&self, psi: &[T]) -> DensityMatrix {
        let d = self.local_dim();
        let mut acc = vec![T::default(); d * d];
        for g in self.groups.windows(2) {
            let block = &self.entries[g[0] as usize..g[1] as usize];
            for &(a, la) in block {
                let xa = psi[a as usize];
                if xa == T::default() {
                    continue;
                }
                let row = &mut acc[la as usize * d..(la as usize + 1) * d];
                for &(b, lb) in block {
                    row[lb as usize] += xa * psi[b as usize].conj();
                }
            }
        }
        DensityMatrix { dim: d, data: acc.into_iter().map(|x| x.to_complex()).collect() }
    }
}

/// `ρ_X = Tr_{X̄} |ψ><ψ|` with the default size cap.
pub fn reduced_density_matrix(state: &PureState, subset: &Subset) -> Result<DensityMatrix> {
    reduced_density_matrix_with(state, subset, DEFAULT_MAX_SUBSET_SITES)
}

pub fn reduced_density_matrix_with(state: &PureState, subset: &Subset, max_sites: usize) -> Result<DensityMatrix> {
    let part = SubsetPartition::new(state.space(), subset, max_sites)?;
    Ok(part.density_matrix(state.amplitudes()))
}

/// `-ln Tr ρ²`.
pub fn renyi2_entropy(rho: &DensityMatrix) -> Result<f64> {
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > TRACE_TOLERANCE || tr.im.abs() > TRACE_TOLERANCE {
        return Err(Error::TraceDeviation { trace: tr.re });
    }
    Ok((-libm::log(rho.purity())).max(0.0))
}

/// `𝒮_X = 2 S_2(ρ_X)` for a pure state.
pub fn entanglement_entropy(state: &PureState, subset: &Subset) -> Result<f64> {
    Ok(2.0 * renyi2_entropy(&reduced_density_matrix(state, subset)?)?)
}

/// Precomputed partitions for evaluating every subset of a catalog on many
/// states of one space.
#[derive(Debug, Clone)]
pub struct EntropyEvaluator {
    partitions: Vec<SubsetPartition>,
    volumes: Vec<f64>,
    areas: Vec<f64>,
}

impl EntropyEvaluator {
    pub fn new(space: &Space, subsets: &[Subset], max_sites: usize) -> Result<Self> {
        let partitions = subsets.iter().map(|s| SubsetPartition::new(space, s, max_sites)).collect::<Result<_>>()?;
        Ok(Self {
            partitions,
            volumes: subsets.iter().map(|s| s.volume() as f64).collect(),
            areas: subsets.iter().map(|s| s.area() as f64).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.partitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partitions.is_empty()
    }

    /// `𝒮_X` for every subset.
    pub fn entropies<T: Scalar>(&self, psi: &[T]) -> Result<Vec<f64>> {
        self.partitions.iter().map(|p| Ok(2.0 * renyi2_entropy(&p.density_matrix(psi))?)).collect()
    }

    pub fn fit(&self, entropies: &[f64]) -> Result<(f64, f64, f64)> {
        fit_two_columns(&self.volumes, &self.areas, entropies)
    }
}

/// Least-squares coefficients of `𝒮_X ≈ s_V V_X + s_A A_X`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyFit {
    pub s_v: f64,
    pub s_a: f64,
    /// RMS residual.
    pub residual: f64,
    pub policy: String,
}

impl EntropyFit {
    /// `s_V / s_A`.
    pub fn ratio(&self) -> f64 {
        self.s_v / self.s_a
    }
}

/// Fits precomputed entropies against the subsets' volumes and areas.
pub fn fit_entropy_values(entropies: &[f64], subsets: &[Subset], policy: &str) -> Result<EntropyFit> {
    if entropies.len() != subsets.len() {
        return Err(Error::DimensionMismatch { expected: subsets.len(), found: entropies.len() });
    }
    let v: Vec<f64> = subsets.iter().map(|s| s.volume() as f64).collect();
    let a: Vec<f64> = subsets.iter().map(|s| s.area() as f64).collect();
    let (s_v, s_a, residual) = fit_two_columns(&v, &a, entropies)?;
    Ok(EntropyFit { s_v, s_a, residual, policy: policy.into() })
}

pub fn fit_entropy_scaling(state: &PureState, subsets: &[Subset], policy: &str) -> Result<EntropyFit> {
    let s: Vec<f64> = subsets.iter().map(|x| entanglement_entropy(state, x)).collect::<Result<_>>()?;
    fit_entropy_values(&s, subsets, policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::sector_basis;
    use crate::lattice::{build_square_lattice, SubsetPolicy};
    use alloc::sync::Arc;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn plaquette_ground_state_correlations() {
        let lat = build_square_lattice(2, 2).unwrap();
        let basis = Arc::new(sector_basis(4, 1).unwrap());
        let psi = PureState::from_real(basis, &[0.5; 4]).unwrap();
        let cm = correlation_matrix(&psi, &lat).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!((cm.get(i, j) - 0.5).abs() < 1e-15);
                }
            }
        }
        let fit = fit_correlation_length(&cm, &lat).unwrap();
        assert!(fit.saturated);
        assert_eq!(fit.xi, DEFAULT_XI_CAP);
    }

    #[test]
    fn product_state_has_no_signal() {
        let lat = build_square_lattice(2, 2).unwrap();
        let psi = PureState::vacuum(4).unwrap();
        let cm = correlation_matrix(&psi, &lat).unwrap();
        assert!(cm.values().iter().enumerate().all(|(k, v)| k % 5 == 0 || *v == 0.0));
        assert_eq!(fit_correlation_length(&cm, &lat), Err(Error::NoSignal));
    }

    #[test]
    fn full_space_single_site_terms() {
        // (|0> + |1>)/√2 on each of two sites: <σx> = 1, connected part zero
        let lat = build_square_lattice(1, 2).unwrap();
        let psi = PureState::new(Space::Full { sites: 2 }, vec![c(0.5); 4]).unwrap();
        let cm = correlation_matrix(&psi, &lat).unwrap();
        assert!(cm.get(0, 1).abs() < 1e-15);
        assert!(cm.get(0, 0).abs() < 1e-15);
    }

    #[test]
    fn synthetic_exponential_recovered() {
        let lat = build_square_lattice(3, 3).unwrap();
        let n = 9;
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let d = lat.manhattan_distance(i, j).unwrap() as f64;
                v[i * n + j] = libm::exp(-d / 2.0);
            }
        }
        let cm = CorrelationMatrix::from_values(n, v).unwrap();
        let fit = fit_correlation_length(&cm, &lat).unwrap();
        assert!((fit.xi - 1.0).abs() < 1e-12 && (fit.amplitude - 1.0).abs() < 1e-12);
        assert!(!fit.saturated);
    }

    #[test]
    fn bell_pair() {
        let lat = build_square_lattice(1, 2).unwrap();
        let s = 1.0 / libm::sqrt(2.0);
        let psi = PureState::new(Space::Full { sites: 2 }, vec![c(0.0), c(s), c(s), c(0.0)]).unwrap();
        let x = Subset::from_sites(&lat, &[0]).unwrap();
        let rho = reduced_density_matrix(&psi, &x).unwrap();
        assert!((rho.get(0, 0).re - 0.5).abs() < 1e-15 && (rho.get(1, 1).re - 0.5).abs() < 1e-15);
        assert!(rho.get(0, 1).norm() < 1e-15);
        let e = entanglement_entropy(&psi, &x).unwrap();
        assert!((e - 2.0 * core::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn renyi_closed_forms() {
        let rho = DensityMatrix::from_entries(2, vec![c(0.75), c(0.0), c(0.0), c(0.25)]).unwrap();
        assert!((renyi2_entropy(&rho).unwrap() - libm::log(1.6)).abs() < 1e-15);
        let bad = DensityMatrix::from_entries(2, vec![c(0.75), c(0.0), c(0.0), c(0.5)]).unwrap();
        assert!(matches!(renyi2_entropy(&bad), Err(Error::TraceDeviation { .. })));
        let pure = DensityMatrix::from_entries(1, vec![c(1.0)]).unwrap();
        assert_eq!(renyi2_entropy(&pure).unwrap(), 0.0);
    }

    #[test]
    fn subset_cap() {
        let lat = build_square_lattice(3, 3).unwrap();
        let psi = PureState::vacuum(9).unwrap();
        let x = Subset::from_sites(&lat, &[0, 1, 2, 3, 4, 5, 6, 7, 8][..8]).unwrap();
        assert!(reduced_density_matrix_with(&psi, &x, 7).is_err());
        let rho = reduced_density_matrix(&psi, &x).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn synthetic_entropy_fit() {
        let lat = build_square_lattice(4, 4).unwrap();
        let subsets = lat.enumerate_subsets(SubsetPolicy::Rectangles).unwrap();
        let s: Vec<f64> = subsets.iter().map(|x| 0.3 * x.volume() as f64 + 0.1 * x.area() as f64).collect();
        let fit = fit_entropy_values(&s, &subsets, "rectangles").unwrap();
        assert!((fit.s_v - 0.3).abs() < 1e-10 && (fit.s_a - 0.1).abs() < 1e-10);
        let psi = PureState::vacuum(16).unwrap();
        let fit = fit_entropy_scaling(&psi, &subsets, "rectangles").unwrap();
        assert!(fit.s_v.abs() < 1e-10 && fit.s_a.abs() < 1e-10);
    }

    #[test]
    fn sector_and_full_partitions_agree() {
        let lat = build_square_lattice(2, 3).unwrap();
        let basis = Arc::new(sector_basis(6, 3).unwrap());
        let amps: Vec<f64> = (0..basis.len()).map(|k| libm::sin(k as f64 + 0.3)).collect();
        let nrm = libm::sqrt(amps.iter().map(|a| a * a).sum::<f64>());
        let amps: Vec<f64> = amps.iter().map(|a| a / nrm).collect();
        let psi = PureState::from_real(basis, &amps).unwrap();
        let full = crate::basis::embed_full(&psi).unwrap();
        for x in lat.enumerate_subsets(SubsetPolicy::Rectangles).unwrap() {
            let a = entanglement_entropy(&psi, &x).unwrap();
            let b = entanglement_entropy(&full, &x).unwrap();
            assert!((a - b).abs() < 1e-12);
            let xc = x.complement(&lat).unwrap();
            assert!((a - entanglement_entropy(&psi, &xc).unwrap()).abs() < 1e-9);
        }
        let ca = correlation_matrix(&psi, &lat).unwrap();
        let cb = correlation_matrix(&full, &lat).unwrap();
        for (a, b) in ca.values().iter().zip(cb.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
