//! Per-state correlation length and entropy scaling, batched over the
//! eigenstates of a sector or over prepared states.

use std::sync::Arc;

use hcb_core::basis::{PureState, SectorBasis, Space};
use hcb_core::lattice::{LatticeSpec, Subset};
use hcb_core::observables::{
    correlation_matrix, correlation_matrix_real, fit_correlation_length_with, CorrelationFitOptions, CorrelationMatrix, EntropyEvaluator,
};
use hcb_core::spectra::EigenDecomposition;
use hcb_core::{Complex64, Error, Result};
use rayon::prelude::*;

/// Fit results for one state or one degenerate cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct StateObservables {
    /// `None` when no pair carries signal or only one distance survives.
    pub xi: Option<f64>,
    pub xi_saturated: bool,
    pub s_v: f64,
    pub s_a: f64,
    pub entropy_residual: f64,
}

impl StateObservables {
    pub fn ratio(&self) -> f64 {
        self.s_v / self.s_a
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenstateRecord {
    pub sector: usize,
    /// First index of the cluster in ascending order.
    pub index: usize,
    pub energy: f64,
    pub cluster_size: usize,
    pub observables: StateObservables,
}

/// Precomputed subset partitions for one space.
pub struct StateAnalyzer {
    lattice: LatticeSpec,
    space: Space,
    evaluator: EntropyEvaluator,
    fit_options: CorrelationFitOptions,
}

impl StateAnalyzer {
    pub fn new(
        lattice: &LatticeSpec,
        space: Space,
        subsets: &[Subset],
        max_subset_sites: usize,
        fit_options: CorrelationFitOptions,
    ) -> Result<Self> {
        let evaluator = EntropyEvaluator::new(&space, subsets, max_subset_sites)?;
        Ok(Self { lattice: lattice.clone(), space, evaluator, fit_options })
    }

    pub fn for_sector(
        lattice: &LatticeSpec,
        basis: Arc<SectorBasis>,
        subsets: &[Subset],
        max_subset_sites: usize,
        fit_options: CorrelationFitOptions,
    ) -> Result<Self> {
        Self::new(lattice, Space::Sector(basis), subsets, max_subset_sites, fit_options)
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    fn correlations(&self, psi: &[Complex64]) -> Result<CorrelationMatrix> {
        let state = PureState::new(self.space.clone(), psi.to_vec())?;
        correlation_matrix(&state, &self.lattice)
    }

    fn summarize(&self, corr: &CorrelationMatrix, entropies: &[f64]) -> Result<StateObservables> {
        let (xi, xi_saturated) = match fit_correlation_length_with(corr, &self.lattice, &self.fit_options) {
            Ok(fit) => (Some(fit.xi), fit.saturated),
            Err(Error::NoSignal | Error::FitDegeneracy) => (None, false),
            Err(e) => return Err(e),
        };
        let (s_v, s_a, entropy_residual) = self.evaluator.fit(entropies)?;
        Ok(StateObservables { xi, xi_saturated, s_v, s_a, entropy_residual })
    }

    /// Observables of a normalized state given by its amplitudes.
    pub fn complex_state(&self, psi: &[Complex64]) -> Result<StateObservables> {
        let corr = self.correlations(psi)?;
        let entropies = self.evaluator.entropies(psi)?;
        self.summarize(&corr, &entropies)
    }

    /// Observables of a real sector vector.
    pub fn real_state(&self, psi: &[f64]) -> Result<StateObservables> {
        let corr = correlation_matrix_real(&self.space, psi)?;
        let entropies = self.evaluator.entropies(psi)?;
        self.summarize(&corr, &entropies)
    }

    /// Degenerate members are averaged: correlation matrices entrywise,
    /// entropies per subset.
    fn cluster(&self, vectors: &[&[f64]]) -> Result<StateObservables> {
        let mut corrs = Vec::with_capacity(vectors.len());
        let mut entropies = vec![0.0; self.evaluator.len()];
        for v in vectors {
            corrs.push(correlation_matrix_real(&self.space, v)?);
            for (acc, s) in entropies.iter_mut().zip(self.evaluator.entropies(*v)?) {
                *acc += s;
            }
        }
        let k = vectors.len() as f64;
        entropies.iter_mut().for_each(|s| *s /= k);
        self.summarize(&CorrelationMatrix::average(&corrs)?, &entropies)
    }

    /// One record per degenerate cluster whose first index is kept by
    /// `keep`. Requires eigenvectors.
    pub fn eigenstates(
        &self,
        dec: &EigenDecomposition,
        keep: impl Fn(usize) -> bool + Sync,
    ) -> Result<Vec<EigenstateRecord>> {
        if !dec.has_vectors() {
            return Err(Error::InvalidArgument("eigenstate observables need eigenvectors"));
        }
        if dec.dim() != self.space.dimension() {
            return Err(Error::DimensionMismatch { expected: self.space.dimension(), found: dec.dim() });
        }
        let clusters: Vec<_> = dec.clusters().into_iter().filter(|c| keep(c.start)).collect();
        clusters
            .par_iter()
            .map(|range| {
                let vectors: Vec<&[f64]> = range.clone().map(|k| dec.vector(k).expect("vectors present")).collect();
                let energy = range.clone().map(|k| dec.values()[k]).sum::<f64>() / range.len() as f64;
                Ok(EigenstateRecord {
                    sector: dec.sector(),
                    index: range.start,
                    energy,
                    cluster_size: range.len(),
                    observables: self.cluster(&vectors)?,
                })
            })
            .collect()
    }
}

/// Median of finite values; `None` when there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Indices of the `fraction` of `energies` closest to `target`, at least one.
pub fn nearest_fraction(energies: &[f64], target: f64, fraction: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..energies.len()).collect();
    order.sort_by(|&a, &b| (energies[a] - target).abs().total_cmp(&(energies[b] - target).abs()).then(a.cmp(&b)));
    let take = ((energies.len() as f64 * fraction).round() as usize).clamp(1.min(energies.len()), energies.len());
    order.truncate(take);
    order
}

/// Arithmetic mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use hcb_core::basis::sector_basis;
    use hcb_core::hamiltonian::{build_sector_hamiltonian, DisorderRealization};
    use hcb_core::lattice::{build_square_lattice, SubsetPolicy};
    use hcb_core::spectra::{diagonalize_sector, Mode};

    #[test]
    fn cluster_records_cover_spectrum() {
        let lattice = build_square_lattice(2, 3).unwrap();
        let basis = Arc::new(sector_basis(6, 3).unwrap());
        let h = build_sector_hamiltonian(&lattice, &DisorderRealization::clean(6), 1.0, &basis).unwrap();
        let dec = diagonalize_sector(&h, 3, Mode::Full).unwrap();
        let subsets = lattice.enumerate_subsets(SubsetPolicy::Rectangles).unwrap();
        let analyzer =
            StateAnalyzer::for_sector(&lattice, basis, &subsets, 8, CorrelationFitOptions::default()).unwrap();
        let records = analyzer.eigenstates(&dec, |_| true).unwrap();
        assert_eq!(records.iter().map(|r| r.cluster_size).sum::<usize>(), dec.len());
        let complex: Vec<_> = dec.vector(0).unwrap().iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let via_complex = analyzer.complex_state(&complex).unwrap();
        if records[0].cluster_size == 1 {
            assert!((via_complex.s_v - records[0].observables.s_v).abs() < 1e-10);
        }
    }

    #[test]
    fn helpers() {
        assert_eq!(median([3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median([4.0, 1.0]), Some(2.5));
        assert_eq!(median([]), None);
        assert_eq!(nearest_fraction(&[-2.0, -1.0, 0.1, 1.0, 2.0], 0.0, 0.4), vec![2, 1]);
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert!((m - 2.0).abs() < 1e-15 && (s - 2f64.sqrt()).abs() < 1e-15);
    }
}
