//! Resonator drive: the effective drive operator `Σ = Σ_i α̃_i σ⁻_i` and its
//! strength `g̃`, evolution of the vacuum under the driven Hamiltonian, and
//! overlap spectra of the prepared states.
//!
//! The Hamiltonian term is `g̃ (Σ + Σ†)`, so the vacuum couples to the
//! single excitation on site `i` with matrix element `g̃ α̃_i`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{PureState, SectorBasis, Space};
use crate::hamiltonian::{build_driven_hamiltonian, DisorderRealization};
use crate::krylov::{evolve_with, EvolutionOptions, EvolutionReport};
use crate::lattice::LatticeSpec;
use crate::sparse::SparseOperator;
use crate::spectra::EigenDecomposition;
use crate::{Error, Result};

/// Ratio used to read "much smaller than" in the dispersive checks.
pub const DISPERSIVE_RATIO: f64 = 10.0;
/// Sectors carrying more weight than this must have a decomposition.
pub const SECTOR_WEIGHT_FLOOR: f64 = 1e-8;

/// One qubit coupled to its own resonator on the drive line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonatorCoupling {
    pub site: usize,
    /// Resonator minus qubit frequency, `Δ_i`.
    pub detuning: f64,
    /// Qubit-resonator coupling `g_i`.
    pub coupling: f64,
    /// Resonator linewidth `κ_i`.
    pub linewidth: f64,
    /// Position along the drive line, `τ_i`.
    pub delay: f64,
}

/// Parameters of one drive line.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveSpec {
    pub sites: usize,
    pub resonators: Vec<ResonatorCoupling>,
    /// Input field amplitude `Ω` (square root of a photon flux).
    pub field: f64,
    /// Angular drive frequency `ω_d`, in the inverse units of `delay`.
    pub drive_frequency: f64,
    /// `δ = ω_d - ω_q`, in the units of the resonator energies.
    pub detuning: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriveWarning {
    /// `|δ|` is not much smaller than `|Δ_i|`.
    DetuningNotDispersive { site: usize },
    /// `κ_i` is not much smaller than `|Δ_i|`.
    LinewidthNotDispersive { site: usize },
}

impl DriveSpec {
    /// Checks the dispersive assumptions behind the adiabatic elimination.
    pub fn validate(&self) -> Result<Vec<DriveWarning>> {
        let mut warnings = Vec::new();
        let mut seen = vec![false; self.sites];
        for r in &self.resonators {
            if r.site >= self.sites {
                return Err(Error::IndexOutOfRange { index: r.site, sites: self.sites });
            }
            if seen[r.site] {
                return Err(Error::InvalidArgument("site listed twice on one drive line"));
            }
            seen[r.site] = true;
            if r.detuning == 0.0 || !r.detuning.is_finite() {
                return Err(Error::ZeroDivisor("resonator detuning"));
            }
            if !(r.linewidth >= 0.0) {
                return Err(Error::InvalidArgument("resonator linewidth must be nonnegative"));
            }
            if self.detuning.abs() * DISPERSIVE_RATIO > r.detuning.abs() {
                warnings.push(DriveWarning::DetuningNotDispersive { site: r.site });
            }
            if r.linewidth * DISPERSIVE_RATIO > r.detuning.abs() {
                warnings.push(DriveWarning::LinewidthNotDispersive { site: r.site });
            }
        }
        Ok(warnings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriveSource {
    Derived,
    RandomPhase { seed: u64 },
}

/// `g̃` and the normalized amplitudes `α̃_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveOperator {
    strength: f64,
    amplitudes: Vec<Complex64>,
    source: DriveSource,
}

impl DriveOperator {
    /// Normalizes `amplitudes` and keeps `strength` as `g̃`.
    pub fn new(strength: f64, amplitudes: Vec<Complex64>, source: DriveSource) -> Result<Self> {
        let nrm = libm::sqrt(amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>());
        if nrm == 0.0 {
            return Err(Error::ZeroDrive);
        }
        let amplitudes = amplitudes.into_iter().map(|a| a / nrm).collect();
        Ok(Self { strength, amplitudes, source })
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn source(&self) -> DriveSource {
        self.source
    }

    /// Same amplitudes with `g̃` replaced.
    pub fn with_strength(&self, strength: f64) -> Self {
        Self { strength, ..self.clone() }
    }

    /// Per-site products `g̃ α̃_i`, as taken by the driven Hamiltonian.
    pub fn couplings(&self) -> Vec<Complex64> {
        self.amplitudes.iter().map(|a| a * self.strength).collect()
    }
}

/// Adiabatic elimination of the resonators:
/// `α̃_i ∝ -(√κ_i g_i / Δ_i) sin(ω_d τ_i)` normalized by `√K`, and
/// `g̃ = Ω √(2K)` with `K = Σ_i κ_i g_i² sin²(ω_d τ_i) / Δ_i²`.
pub fn derive_drive_operator(spec: &DriveSpec) -> Result<DriveOperator> {
    spec.validate()?;
    let mut raw = vec![Complex64::default(); spec.sites];
    let mut k = 0.0;
    for r in &spec.resonators {
        let s = libm::sin(spec.drive_frequency * r.delay);
        // exact standing-wave nodes
        let s = if s.abs() < 1e-15 { 0.0 } else { s };
        let a = -libm::sqrt(r.linewidth) * r.coupling * s / r.detuning;
        raw[r.site] = Complex64::new(a, 0.0);
        k += a * a;
    }
    if k == 0.0 {
        return Err(Error::ZeroDrive);
    }
    let root = libm::sqrt(k);
    let amplitudes = raw.into_iter().map(|a| a / root).collect();
    Ok(DriveOperator { strength: spec.field * libm::sqrt(2.0 * k), amplitudes, source: DriveSource::Derived })
}

/// `α̃_i = e^{iφ_i} / √N` with `φ_i` uniform on `[0, 2π)` from ChaCha8.
pub fn random_phase_drive(lattice: &LatticeSpec, seed: u64, strength: f64) -> DriveOperator {
    let n = lattice.num_sites();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / libm::sqrt(n as f64);
    let amplitudes = (0..n)
        .map(|_| {
            let phi = rng.random::<f64>() * core::f64::consts::TAU;
            Complex64::from_polar(scale, phi)
        })
        .collect();
    DriveOperator { strength, amplitudes, source: DriveSource::RandomPhase { seed } }
}

/// Default preparation time `8 J / g̃²`.
pub fn default_duration(j: f64, strength: f64) -> f64 {
    8.0 * j / (strength * strength)
}

/// Evolves the vacuum under the driven Hamiltonian (frame rotating at the
/// drive frequency) for `duration`, or `8 J / g̃²` when `None`.
pub fn prepare_coherent_like(
    lattice: &LatticeSpec,
    disorder: &DisorderRealization,
    j: f64,
    drive: &DriveOperator,
    detuning: f64,
    duration: Option<f64>,
) -> Result<PureState> {
    let duration = match duration {
        Some(t) => t,
        None if drive.strength() == 0.0 => 0.0,
        None => default_duration(j, drive.strength()),
    };
    let (states, _) = prepare_checkpoints(lattice, disorder, j, drive, detuning, &[duration], &EvolutionOptions::default())?;
    Ok(states.into_iter().next().unwrap())
}

/// Prepared states at each of the ascending `times`.
pub fn prepare_checkpoints(
    lattice: &LatticeSpec,
    disorder: &DisorderRealization,
    j: f64,
    drive: &DriveOperator,
    detuning: f64,
    times: &[f64],
    opts: &EvolutionOptions,
) -> Result<(Vec<PureState>, EvolutionReport)> {
    let n = lattice.num_sites();
    if drive.amplitudes().len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: drive.amplitudes().len() });
    }
    let vacuum = PureState::vacuum(n)?;
    if drive.strength() == 0.0 {
        return Ok((times.iter().map(|_| vacuum.clone()).collect(), EvolutionReport::default()));
    }
    let h = build_driven_hamiltonian(lattice, disorder, j, &drive.couplings(), detuning)?;
    let mut out = Vec::with_capacity(times.len());
    let (_, report) = evolve_with(&vacuum, &h, times, opts, |_, s| {
        out.push(s.clone());
        Ok(())
    })?;
    Ok((out, report))
}

/// Weight of a prepared state on one eigenvalue cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapRecord {
    pub n: usize,
    /// Energy in the frame rotating at the qubit frequency (cluster mean).
    pub epsilon: f64,
    /// `Σ_k |<n, ε_k|ψ>|²` over the cluster.
    pub weight: f64,
    pub cluster_size: usize,
}

/// Overlaps of several full-space states with every eigenvector of one
/// sector; one record list per state.
pub fn sector_overlaps(states: &[&PureState], dec: &EigenDecomposition, basis: &SectorBasis) -> Result<Vec<Vec<OverlapRecord>>> {
    if !dec.has_vectors() || dec.len() != basis.len() {
        return Err(Error::MissingSector(basis.excitations()));
    }
    let projected: Vec<Vec<Complex64>> = states
        .iter()
        .map(|s| match s.space() {
            Space::Full { sites } if *sites == basis.sites() => {
                Ok(basis.states().iter().map(|&m| s.amplitudes()[m as usize]).collect())
            }
            _ => Err(Error::InvalidArgument("overlaps expect full-space states on the same lattice")),
        })
        .collect::<Result<_>>()?;
    let mut weights = vec![vec![0.0; dec.len()]; states.len()];
    for k in 0..dec.len() {
        let v = dec.vector(k).unwrap();
        for (p, w) in projected.iter().zip(weights.iter_mut()) {
            let amp: Complex64 = v.iter().zip(p).map(|(a, b)| b * *a).sum();
            w[k] = amp.norm_sqr();
        }
    }
    let clusters = dec.clusters();
    Ok(weights
        .iter()
        .map(|w| {
            clusters
                .iter()
                .map(|r| OverlapRecord {
                    n: dec.sector(),
                    epsilon: dec.values()[r.clone()].iter().sum::<f64>() / r.len() as f64,
                    weight: w[r.clone()].iter().sum(),
                    cluster_size: r.len(),
                })
                .collect()
        })
        .collect())
}

/// Overlap spectrum of `state` against a set of sector decompositions
/// (pairs of decomposition and its basis).
pub fn overlap_spectrum(state: &PureState, decs: &[(&EigenDecomposition, &SectorBasis)]) -> Result<Vec<OverlapRecord>> {
    let weights = crate::basis::sector_weights(state);
    for (n, &w) in weights.iter().enumerate() {
        if w > SECTOR_WEIGHT_FLOOR && !decs.iter().any(|(d, _)| d.sector() == n) {
            return Err(Error::MissingSector(n));
        }
    }
    let mut out = Vec::new();
    for (dec, basis) in decs {
        out.extend(sector_overlaps(&[state], dec, basis)?.pop().unwrap());
    }
    Ok(out)
}

/// Weight-weighted mean and standard deviation of `ε - nδ`, and the total
/// weight, over `records`.
pub fn detuning_line_statistics(records: &[OverlapRecord], detuning: f64) -> (f64, f64, f64) {
    let total: f64 = records.iter().map(|r| r.weight).sum();
    if total == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let offset = |r: &OverlapRecord| r.epsilon - r.n as f64 * detuning;
    let mean = records.iter().map(|r| r.weight * offset(r)).sum::<f64>() / total;
    let var = records.iter().map(|r| r.weight * (offset(r) - mean) * (offset(r) - mean)).sum::<f64>() / total;
    (mean, libm::sqrt(var), total)
}

/// Total weight within `|ε - nδ| ≤ half_width`.
pub fn weight_near_line(records: &[OverlapRecord], detuning: f64, half_width: f64) -> f64 {
    records
        .iter()
        .filter(|r| (r.epsilon - r.n as f64 * detuning).abs() <= half_width)
        .map(|r| r.weight)
        .sum()
}

/// Mean and standard deviation of `ε - nδ` for a normalized sector state
/// `psi` under the sector Hamiltonian `h`, from `<H>` and `<H²>` without
/// diagonalizing.
pub fn sector_energy_moments(h: &SparseOperator<f64>, psi: &[Complex64], n: usize, detuning: f64) -> Result<(f64, f64)> {
    if psi.len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: psi.len() });
    }
    let mut hpsi = vec![Complex64::default(); psi.len()];
    h.apply(psi, &mut hpsi);
    let first: f64 = psi.iter().zip(&hpsi).map(|(a, b)| (a.conj() * b).re).sum();
    let second: f64 = hpsi.iter().map(|b| b.norm_sqr()).sum();
    let var = (second - first * first).max(0.0);
    Ok((first - n as f64 * detuning, libm::sqrt(var)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::sector_basis;
    use crate::hamiltonian::{build_sector_hamiltonian, sample_disorder};
    use crate::lattice::build_square_lattice;
    use crate::spectra::{diagonalize_sector, Mode};
    use core::f64::consts::{FRAC_PI_2, PI};

    fn line(resonators: Vec<ResonatorCoupling>, sites: usize) -> DriveSpec {
        DriveSpec { sites, resonators, field: 0.7, drive_frequency: 1.0, detuning: 0.01 }
    }

    fn res(site: usize, delay: f64) -> ResonatorCoupling {
        ResonatorCoupling { site, detuning: 200.0, coupling: 20.0, linewidth: 1.0, delay }
    }

    #[test]
    fn single_resonator_closed_form() {
        let op = derive_drive_operator(&line(vec![res(0, FRAC_PI_2)], 1)).unwrap();
        assert!((op.amplitudes()[0] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        let expect = libm::sqrt(2.0) * 0.7 * 1.0 * 20.0 / 200.0;
        assert!((op.strength() - expect).abs() < 1e-15);
        // product invariant
        let prod = op.couplings()[0];
        assert!((prod.re + expect).abs() < 1e-15);
    }

    #[test]
    fn node_and_symmetry() {
        let op = derive_drive_operator(&line(vec![res(0, PI), res(1, FRAC_PI_2)], 2)).unwrap();
        assert_eq!(op.amplitudes()[0], Complex64::default());
        let op = derive_drive_operator(&line(vec![res(0, FRAC_PI_2), res(1, FRAC_PI_2)], 2)).unwrap();
        for a in op.amplitudes() {
            assert!((a.norm() - 1.0 / libm::sqrt(2.0)).abs() < 1e-15);
        }
        assert_eq!(derive_drive_operator(&line(vec![res(0, PI)], 1)), Err(Error::ZeroDrive));
    }

    #[test]
    fn field_rescaling() {
        let spec = line(vec![res(0, 0.3), res(2, 1.1)], 3);
        let a = derive_drive_operator(&spec).unwrap();
        let b = derive_drive_operator(&DriveSpec { field: 2.1, ..spec }).unwrap();
        assert_eq!(a.amplitudes(), b.amplitudes());
        assert!((b.strength() / a.strength() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn dispersive_warnings() {
        let mut spec = line(vec![res(0, 1.0)], 1);
        assert!(spec.validate().unwrap().is_empty());
        spec.detuning = 50.0;
        spec.resonators[0].linewidth = 30.0;
        assert_eq!(spec.validate().unwrap().len(), 2);
    }

    #[test]
    fn random_phases() {
        let lat = build_square_lattice(4, 4).unwrap();
        let a = random_phase_drive(&lat, 1, 1.0);
        let b = random_phase_drive(&lat, 2, 1.0);
        assert_eq!(a, random_phase_drive(&lat, 1, 1.0));
        let na: f64 = a.amplitudes().iter().map(|x| x.norm_sqr()).sum();
        assert!((na - 1.0).abs() < 1e-15);
        let ov: Complex64 = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| x.conj() * y).sum();
        assert!(ov.norm() < 1.0 - 1e-6);
    }

    #[test]
    fn undriven_vacuum_stays() {
        let lat = build_square_lattice(2, 2).unwrap();
        let dis = DisorderRealization::clean(4);
        let drive = random_phase_drive(&lat, 3, 0.0);
        let psi = prepare_coherent_like(&lat, &dis, 1.0, &drive, -1.0, None).unwrap();
        assert_eq!(psi.amplitudes()[0], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn overlaps_sum_to_one() {
        let lat = build_square_lattice(2, 3).unwrap();
        let dis = sample_disorder(6, 0.2, 4, false).unwrap();
        let drive = random_phase_drive(&lat, 9, 0.5);
        let psi = prepare_coherent_like(&lat, &dis, 1.0, &drive, -1.0, Some(5.0)).unwrap();
        let bases: Vec<_> = (0..=6).map(|n| sector_basis(6, n).unwrap()).collect();
        let decs: Vec<_> = bases
            .iter()
            .map(|b| {
                let h = build_sector_hamiltonian(&lat, &dis, 1.0, b).unwrap();
                diagonalize_sector(&h, b.excitations(), Mode::Full).unwrap()
            })
            .collect();
        let pairs: Vec<_> = decs.iter().zip(&bases).collect();
        let recs = overlap_spectrum(&psi, &pairs).unwrap();
        let total: f64 = recs.iter().map(|r| r.weight).sum();
        assert!((total - 1.0).abs() < 1e-8);
        assert!(overlap_spectrum(&psi, &pairs[..3]).is_err());
        let vac = PureState::vacuum(6).unwrap();
        let recs = overlap_spectrum(&vac, &pairs).unwrap();
        let hit: Vec<_> = recs.iter().filter(|r| r.weight > 1e-12).collect();
        assert_eq!(hit.len(), 1);
        assert_eq!((hit[0].n, hit[0].epsilon), (0, 0.0));
    }

    #[test]
    fn moments_match_overlap_statistics() {
        use alloc::sync::Arc;
        use crate::basis::project_sector;
        let lat = build_square_lattice(2, 3).unwrap();
        let dis = sample_disorder(6, 0.3, 2, false).unwrap();
        let drive = random_phase_drive(&lat, 5, 0.8);
        let psi = prepare_coherent_like(&lat, &dis, 1.0, &drive, 0.5, Some(4.0)).unwrap();
        let basis = Arc::new(sector_basis(6, 3).unwrap());
        let h = build_sector_hamiltonian(&lat, &dis, 1.0, &basis).unwrap();
        let dec = diagonalize_sector(&h, 3, Mode::Full).unwrap();
        let part = project_sector(&psi, &basis).unwrap().state.unwrap();
        let full = crate::basis::embed_full(&part).unwrap();
        let recs = sector_overlaps(&[&full], &dec, &basis).unwrap().remove(0);
        let (mean, sd, total) = detuning_line_statistics(&recs, 0.5);
        let (m, s) = sector_energy_moments(&h, part.amplitudes(), 3, 0.5).unwrap();
        assert!((total - 1.0).abs() < 1e-10);
        assert!((mean - m).abs() < 1e-10 && (sd - s).abs() < 1e-9);
    }
}
