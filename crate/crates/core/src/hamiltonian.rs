//! Sector Hamiltonians in the frame rotating at the qubit frequency, the
//! driven full-space Hamiltonian in the frame rotating at the drive
//! frequency, and per-site frequency disorder.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::basis::SectorBasis;
use crate::lattice::LatticeSpec;
use crate::sparse::SparseOperator;
use crate::{Error, Result};

/// Largest site count for which the full `2^N` driven Hamiltonian is built.
pub const MAX_FULL_SPACE_SITES: usize = 24;

/// Per-site frequency offsets `ΔE_i` in units of `J`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderRealization {
    detunings: Vec<f64>,
    seed: u64,
    spread: f64,
    rms: f64,
}

impl DisorderRealization {
    /// Zero offsets on every site.
    pub fn clean(sites: usize) -> Self {
        Self { detunings: vec![0.0; sites], seed: 0, spread: 0.0, rms: 0.0 }
    }

    /// Explicit offsets, e.g. replayed from a result file.
    pub fn from_detunings(detunings: Vec<f64>, seed: u64, spread: f64) -> Self {
        let rms = rms(&detunings);
        Self { detunings, seed, spread, rms }
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Configured standard deviation `Δω`.
    pub fn spread(&self) -> f64 {
        self.spread
    }

    /// Empirical root-mean-square of the drawn offsets.
    pub fn rms(&self) -> f64 {
        self.rms
    }

    pub fn sites(&self) -> usize {
        self.detunings.len()
    }
}

fn rms(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    libm::sqrt(v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64)
}

/// Draws `ΔE_i ~ N(0, spread²)` i.i.d. from ChaCha8 seeded with `seed`.
///
/// With `exact_rms` the draw is rescaled so its empirical RMS equals `spread`.
pub fn sample_disorder(sites: usize, spread: f64, seed: u64, exact_rms: bool) -> Result<DisorderRealization> {
    if !(spread >= 0.0) || !spread.is_finite() {
        return Err(Error::InvalidArgument("disorder spread must be finite and nonnegative"));
    }
    if spread == 0.0 {
        return Ok(DisorderRealization { seed, ..DisorderRealization::clean(sites) });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, spread).map_err(|_| Error::InvalidArgument("disorder spread"))?;
    let mut detunings: Vec<f64> = (0..sites).map(|_| normal.sample(&mut rng)).collect();
    if exact_rms {
        let r = rms(&detunings);
        if r > 0.0 {
            detunings.iter_mut().for_each(|d| *d *= spread / r);
        }
    }
    let rms = rms(&detunings);
    Ok(DisorderRealization { detunings, seed, spread, rms })
}

fn check_sites(lattice: &LatticeSpec, disorder: &DisorderRealization) -> Result<()> {
    if disorder.sites() != lattice.num_sites() {
        return Err(Error::DimensionMismatch { expected: lattice.num_sites(), found: disorder.sites() });
    }
    Ok(())
}

fn check_hopping(j: f64) -> Result<()> {
    if !(j > 0.0) || !j.is_finite() {
        return Err(Error::InvalidArgument("hopping J must be positive"));
    }
    Ok(())
}

fn onsite(disorder: &[f64], mask: u64, shift: f64) -> f64 {
    let mut e = 0.0;
    let mut rest = mask;
    while rest != 0 {
        let i = rest.trailing_zeros() as usize;
        e += disorder[i] + shift;
        rest &= rest - 1;
    }
    e
}

/// Hamiltonian of the sector spanned by `basis`, rotating at `ω_q`.
///
/// Diagonal: `Σ_{i occupied} ΔE_i`. Off-diagonal: `-J` between configurations
/// related by moving one excitation across one bond.
pub fn build_sector_hamiltonian(
    lattice: &LatticeSpec,
    disorder: &DisorderRealization,
    j: f64,
    basis: &SectorBasis,
) -> Result<SparseOperator<f64>> {
    check_hopping(j)?;
    check_sites(lattice, disorder)?;
    if basis.sites() != lattice.num_sites() {
        return Err(Error::DimensionMismatch { expected: lattice.num_sites(), found: basis.sites() });
    }
    let d = disorder.detunings();
    let rows = basis.states().iter().map(|&m| {
        let mut row = Vec::with_capacity(1 + lattice.bonds().len());
        row.push((basis.index_of(m).unwrap(), onsite(d, m, 0.0)));
        for &(a, b) in lattice.bonds() {
            if ((m >> a) ^ (m >> b)) & 1 == 1 {
                let hopped = m ^ ((1 << a) | (1 << b));
                // the hopped mask keeps its popcount, so it is in the basis
                row.push((basis.index_of(hopped).unwrap(), -j));
            }
        }
        row
    });
    SparseOperator::from_rows(basis.len(), rows, true)
}

/// Full-space Hamiltonian under a coherent drive, rotating at `ω_d = ω_q + δ`.
///
/// `coupling[i]` is `g̃ α̃_i`; the drive term is `g̃ (Σ + Σ†)` with
/// `Σ = Σ_i α̃_i σ⁻_i`, so `⟨0|H|1_i⟩ = g̃ α̃_i` and `⟨1_i|H|0⟩ = conj(g̃ α̃_i)`.
/// The diagonal is `Σ_i (ΔE_i - δ) n_i` and hopping is `-J` per bond.
pub fn build_driven_hamiltonian(
    lattice: &LatticeSpec,
    disorder: &DisorderRealization,
    j: f64,
    coupling: &[Complex64],
    detuning: f64,
) -> Result<SparseOperator<Complex64>> {
    check_hopping(j)?;
    check_sites(lattice, disorder)?;
    let n = lattice.num_sites();
    if coupling.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: coupling.len() });
    }
    if n > MAX_FULL_SPACE_SITES {
        return Err(Error::Capacity { requested: n, max: MAX_FULL_SPACE_SITES });
    }
    let d = disorder.detunings();
    let dim = 1usize << n;
    let rows = (0..dim as u64).map(|m| {
        let mut row = Vec::with_capacity(1 + lattice.bonds().len() + n);
        row.push((m as usize, Complex64::new(onsite(d, m, -detuning), 0.0)));
        for &(a, b) in lattice.bonds() {
            if ((m >> a) ^ (m >> b)) & 1 == 1 {
                row.push(((m ^ ((1 << a) | (1 << b))) as usize, Complex64::new(-j, 0.0)));
            }
        }
        for (i, &g) in coupling.iter().enumerate() {
            if g == Complex64::new(0.0, 0.0) {
                continue;
            }
            let col = (m ^ (1 << i)) as usize;
            if (m >> i) & 1 == 1 {
                // row has site i occupied: raising term conj(g) σ⁺_i
                row.push((col, g.conj()));
            } else {
                row.push((col, g));
            }
        }
        row
    });
    SparseOperator::from_rows(dim, rows, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::sector_basis;
    use crate::lattice::build_square_lattice;

    #[test]
    fn clean_disorder_is_zero() {
        let d = sample_disorder(16, 0.0, 7, false).unwrap();
        assert!(d.detunings().iter().all(|&x| x == 0.0));
        assert_eq!(d.rms(), 0.0);
    }

    #[test]
    fn disorder_reproducible_per_seed() {
        let a = sample_disorder(16, 0.2, 11, false).unwrap();
        let b = sample_disorder(16, 0.2, 11, false).unwrap();
        let c = sample_disorder(16, 0.2, 12, false).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.detunings(), c.detunings());
        assert!(a.rms() > 0.1 && a.rms() < 0.3, "rms {}", a.rms());
        let e = sample_disorder(16, 0.2, 11, true).unwrap();
        assert!((e.rms() - 0.2).abs() < 1e-14);
        assert!(sample_disorder(4, -1.0, 0, false).is_err());
    }

    #[test]
    fn disorder_rms_converges() {
        let mean = (0..1000u64)
            .map(|s| sample_disorder(16, 0.2, s, false).unwrap().rms())
            .sum::<f64>()
            / 1000.0;
        assert!((mean - 0.2).abs() < 0.2 * 0.02, "mean rms {mean}");
    }

    #[test]
    fn four_cycle_hopping() {
        let l = build_square_lattice(2, 2).unwrap();
        let b = sector_basis(4, 1).unwrap();
        let h = build_sector_hamiltonian(&l, &DisorderRealization::clean(4), 1.0, &b).unwrap();
        // basis order = sites 0..3; the 4-cycle is 0-1, 0-2, 1-3, 2-3
        let expected = [
            [0.0, -1.0, -1.0, 0.0],
            [-1.0, 0.0, 0.0, -1.0],
            [-1.0, 0.0, 0.0, -1.0],
            [0.0, -1.0, -1.0, 0.0],
        ];
        let dense = h.to_dense();
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(dense[r * 4 + c], expected[r][c]);
            }
        }
    }

    #[test]
    fn empty_and_full_sectors() {
        let l = build_square_lattice(2, 3).unwrap();
        let d = sample_disorder(6, 0.3, 5, false).unwrap();
        let h0 = build_sector_hamiltonian(&l, &d, 1.0, &sector_basis(6, 0).unwrap()).unwrap();
        assert_eq!(h0.to_dense(), [0.0]);
        let h6 = build_sector_hamiltonian(&l, &d, 1.0, &sector_basis(6, 6).unwrap()).unwrap();
        let total: f64 = d.detunings().iter().sum();
        assert!((h6.to_dense()[0] - total).abs() < 1e-15);
    }

    #[test]
    fn row_sparsity_bound() {
        let l = build_square_lattice(3, 3).unwrap();
        let d = sample_disorder(9, 0.2, 1, false).unwrap();
        for n in 0..=9 {
            let b = sector_basis(9, n).unwrap();
            let h = build_sector_hamiltonian(&l, &d, 1.0, &b).unwrap();
            for (r, &m) in b.states().iter().enumerate() {
                let touching = l
                    .bonds()
                    .iter()
                    .filter(|&&(a, c)| (m >> a) & 1 == 1 || (m >> c) & 1 == 1)
                    .count();
                assert!(h.row(r).0.len() <= 1 + touching);
                for (&c, &v) in h.row(r).0.iter().zip(h.row(r).1) {
                    if c as usize != r {
                        assert_eq!(v, -1.0);
                    }
                }
            }
        }
    }

    #[test]
    fn single_qubit_drive() {
        let l = build_square_lattice(1, 1).unwrap();
        let g = 0.3;
        let h = build_driven_hamiltonian(&l, &DisorderRealization::clean(1), 1.0, &[Complex64::new(g, 0.0)], 0.7)
            .unwrap();
        let d = h.to_dense();
        assert_eq!(d, [Complex64::new(0.0, 0.0), Complex64::new(g, 0.0), Complex64::new(g, 0.0), Complex64::new(-0.7, 0.0)]);
    }

    #[test]
    fn drive_matrix_elements() {
        let l = build_square_lattice(2, 2).unwrap();
        let coupling: Vec<Complex64> = (0..4).map(|i| Complex64::new(0.1 * i as f64, 0.05)).collect();
        let h = build_driven_hamiltonian(&l, &DisorderRealization::clean(4), 1.0, &coupling, 0.0).unwrap();
        for i in 0..4 {
            assert_eq!(h.get(0, 1 << i), coupling[i]);
            assert_eq!(h.get(1 << i, 0), coupling[i].conj());
        }
    }

    #[test]
    fn undriven_is_block_diagonal() {
        let l = build_square_lattice(2, 3).unwrap();
        let d = sample_disorder(6, 0.2, 3, false).unwrap();
        let delta = -0.4;
        let h = build_driven_hamiltonian(&l, &d, 1.0, &[Complex64::new(0.0, 0.0); 6], delta).unwrap();
        for r in 0..64usize {
            for &c in h.row(r).0 {
                assert_eq!(r.count_ones(), c.count_ones());
            }
        }
        for n in 0..=6 {
            let b = sector_basis(6, n).unwrap();
            let hs = build_sector_hamiltonian(&l, &d, 1.0, &b).unwrap();
            for (r, &mr) in b.states().iter().enumerate() {
                for (c, &mc) in b.states().iter().enumerate() {
                    let shift = if r == c { delta * n as f64 } else { 0.0 };
                    let full = h.get(mr as usize, mc as usize);
                    assert!((full.re - (hs.get(r, c) - shift)).abs() < 1e-14);
                    assert_eq!(full.im, 0.0);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let l = build_square_lattice(2, 2).unwrap();
        let b = sector_basis(4, 2).unwrap();
        assert!(build_sector_hamiltonian(&l, &DisorderRealization::clean(4), 0.0, &b).is_err());
        assert!(matches!(
            build_sector_hamiltonian(&l, &DisorderRealization::clean(3), 1.0, &b),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            build_driven_hamiltonian(&l, &DisorderRealization::clean(4), 1.0, &[Complex64::new(0.0, 0.0); 3], 0.0),
            Err(Error::DimensionMismatch { expected: 4, found: 3 })
        ));
    }
}
