//! Fixed excitation-number bases and pure states over a sector or the full
//! `2^N` space.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::{Error, Result};

/// `binomial(n, k)` for `n < 64`, zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// Ascending list of `N`-bit masks with exactly `n` bits set.
///
/// Masks are ranked with the combinatorial number system: for fixed popcount,
/// numeric order coincides with colexicographic order of the set-bit
/// positions, so a mask with set bits `c_0 < c_1 < ...` sits at position
/// `sum_k binomial(c_k, k + 1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectorBasis {
    sites: usize,
    excitations: usize,
    states: Vec<u64>,
    // binomial(c, k) at index c * (excitations + 1) + k
    ranks: Vec<u64>,
}

/// Enumerates the sector of `n` excitations on `sites` sites.
pub fn sector_basis(sites: usize, n: usize) -> Result<SectorBasis> {
    SectorBasis::new(sites, n)
}

impl SectorBasis {
    pub fn new(sites: usize, n: usize) -> Result<Self> {
        if sites > 63 {
            return Err(Error::Capacity { requested: sites, max: 63 });
        }
        if n > sites {
            return Err(Error::ExcitationOutOfRange { n, sites });
        }
        let size = binomial(sites, n) as usize;
        let mut states = Vec::with_capacity(size);
        if n == 0 {
            states.push(0);
        } else {
            let limit = 1u64 << sites;
            let mut mask = (1u64 << n) - 1;
            while mask < limit {
                states.push(mask);
                // Gosper's hack: next larger integer with the same popcount.
                let low = mask & mask.wrapping_neg();
                let ripple = mask + low;
                mask = (((ripple ^ mask) >> 2) / low) | ripple;
            }
        }
        debug_assert_eq!(states.len(), size);
        let mut ranks = vec![0u64; sites.max(1) * (n + 1)];
        for c in 0..sites {
            for k in 0..=n {
                ranks[c * (n + 1) + k] = binomial(c, k);
            }
        }
        Ok(Self { sites, excitations: n, states, ranks })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn excitations(&self) -> usize {
        self.excitations
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    /// Position of `mask` in the basis, if it belongs to this sector.
    #[inline]
    pub fn index_of(&self, mask: u64) -> Option<usize> {
        if mask >> self.sites != 0 || mask.count_ones() as usize != self.excitations {
            return None;
        }
        let stride = self.excitations + 1;
        let mut rest = mask;
        let mut k = 1;
        let mut idx = 0u64;
        while rest != 0 {
            let c = rest.trailing_zeros() as usize;
            idx += self.ranks[c * stride + k];
            rest &= rest - 1;
            k += 1;
        }
        Some(idx as usize)
    }
}

/// Hilbert space a [`PureState`] lives in.
#[derive(Debug, Clone)]
pub enum Space {
    /// Fixed excitation number.
    Sector(Arc<SectorBasis>),
    /// All `2^N` configurations, indexed by their bitmask.
    Full { sites: usize },
}

impl Space {
    pub fn sites(&self) -> usize {
        match self {
            Space::Sector(b) => b.sites(),
            Space::Full { sites } => *sites,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Space::Sector(b) => b.len(),
            Space::Full { sites } => 1usize << sites,
        }
    }

    /// Bitmask of the configuration at `index`.
    #[inline]
    pub fn mask(&self, index: usize) -> u64 {
        match self {
            Space::Sector(b) => b.states()[index],
            Space::Full { .. } => index as u64,
        }
    }

    /// Index of the configuration `mask`, if it is part of the space.
    #[inline]
    pub fn index_of(&self, mask: u64) -> Option<usize> {
        match self {
            Space::Sector(b) => b.index_of(mask),
            Space::Full { sites } => (mask >> sites == 0).then_some(mask as usize),
        }
    }
}

/// Tolerance on the Euclidean norm of a [`PureState`].
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Normalized amplitude vector over a sector or the full space.
#[derive(Debug, Clone)]
pub struct PureState {
    space: Space,
    amplitudes: Vec<Complex64>,
}

pub(crate) fn norm(v: &[Complex64]) -> f64 {
    libm::sqrt(v.iter().map(|a| a.norm_sqr()).sum::<f64>())
}

impl PureState {
    /// Wraps amplitudes that are already normalized within [`NORM_TOLERANCE`].
    pub fn new(space: Space, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != space.dimension() {
            return Err(Error::DimensionMismatch { expected: space.dimension(), found: amplitudes.len() });
        }
        if (norm(&amplitudes) - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidArgument("state is not normalized"));
        }
        Ok(Self { space, amplitudes })
    }

    /// Rescales `amplitudes` to unit norm.
    pub fn normalized(space: Space, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != space.dimension() {
            return Err(Error::DimensionMismatch { expected: space.dimension(), found: amplitudes.len() });
        }
        let nrm = norm(&amplitudes);
        if nrm == 0.0 {
            return Err(Error::ZeroDivisor("state normalization"));
        }
        amplitudes.iter_mut().for_each(|a| *a /= nrm);
        Ok(Self { space, amplitudes })
    }

    /// Real amplitudes in sector order, e.g. an eigenvector column.
    pub fn from_real(basis: Arc<SectorBasis>, amplitudes: &[f64]) -> Result<Self> {
        let amps = amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect();
        Self::new(Space::Sector(basis), amps)
    }

    /// Single configuration `mask` of the full space.
    pub fn basis_state(sites: usize, mask: u64) -> Result<Self> {
        if sites > 30 {
            return Err(Error::Capacity { requested: sites, max: 30 });
        }
        if mask >> sites != 0 {
            return Err(Error::InvalidArgument("mask has bits beyond the lattice"));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << sites];
        amps[mask as usize] = Complex64::new(1.0, 0.0);
        Ok(Self { space: Space::Full { sites }, amplitudes: amps })
    }

    /// All sites empty, in the full space.
    pub fn vacuum(sites: usize) -> Result<Self> {
        Self::basis_state(sites, 0)
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn sites(&self) -> usize {
        self.space.sites()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        if self.amplitudes.len() != other.amplitudes.len() {
            return Err(Error::DimensionMismatch { expected: self.amplitudes.len(), found: other.amplitudes.len() });
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }
}

/// Places a sector state into the full `2^N` space.
pub fn embed_full(state: &PureState) -> Result<PureState> {
    match state.space() {
        Space::Full { .. } => Ok(state.clone()),
        Space::Sector(basis) => {
            if basis.sites() > 30 {
                return Err(Error::Capacity { requested: basis.sites(), max: 30 });
            }
            let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << basis.sites()];
            for (&mask, &a) in basis.states().iter().zip(state.amplitudes()) {
                amps[mask as usize] = a;
            }
            Ok(PureState { space: Space::Full { sites: basis.sites() }, amplitudes: amps })
        }
    }
}

/// Restriction of a full-space state to one excitation sector.
#[derive(Debug, Clone)]
pub struct Projection {
    /// Renormalized restriction; `None` when the sector carries no weight.
    pub state: Option<PureState>,
    /// Squared norm of the restriction before renormalization.
    pub weight: f64,
}

/// Post-selects `state` onto the sector with `basis.excitations()` excitations.
pub fn project_sector(state: &PureState, basis: &Arc<SectorBasis>) -> Result<Projection> {
    let Space::Full { sites } = *state.space() else {
        return Err(Error::InvalidArgument("projection expects a full-space state"));
    };
    if sites != basis.sites() {
        return Err(Error::DimensionMismatch { expected: sites, found: basis.sites() });
    }
    let amps: Vec<Complex64> = basis.states().iter().map(|&m| state.amplitudes()[m as usize]).collect();
    let weight = amps.iter().map(|a| a.norm_sqr()).sum::<f64>();
    if weight == 0.0 {
        return Ok(Projection { state: None, weight });
    }
    let scale = 1.0 / libm::sqrt(weight);
    let amps = amps.into_iter().map(|a| a * scale).collect();
    Ok(Projection { state: Some(PureState { space: Space::Sector(basis.clone()), amplitudes: amps }), weight })
}

/// Squared-norm weight of `state` in every sector `n = 0..=N`.
pub fn sector_weights(state: &PureState) -> Vec<f64> {
    let n = state.sites();
    let mut w = vec![0.0; n + 1];
    for (i, a) in state.amplitudes().iter().enumerate() {
        w[state.space().mask(i).count_ones() as usize] += a.norm_sqr();
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn sector_sizes() {
        assert_eq!(sector_basis(16, 8).unwrap().len(), 12870);
        let vac = sector_basis(16, 0).unwrap();
        assert_eq!(vac.states(), &[0]);
        assert_eq!(sector_basis(4, 1).unwrap().states(), &[0b0001, 0b0010, 0b0100, 0b1000]);
        assert_eq!(sector_basis(4, 4).unwrap().states(), &[0b1111]);
        assert_eq!(sector_basis(3, 4), Err(Error::ExcitationOutOfRange { n: 4, sites: 3 }));
    }

    #[test]
    fn ranking_matches_position() {
        for n in 0..=10 {
            let b = sector_basis(10, n).unwrap();
            for (i, &m) in b.states().iter().enumerate() {
                assert_eq!(b.index_of(m), Some(i));
            }
            assert!(b.states().windows(2).all(|w| w[0] < w[1]));
        }
        let b = sector_basis(6, 3).unwrap();
        assert_eq!(b.index_of(0b11), None);
        assert_eq!(b.index_of(0b111 << 6), None);
    }

    #[test]
    fn embed_vacuum_and_uniform() {
        let b = Arc::new(sector_basis(3, 0).unwrap());
        let s = PureState::new(Space::Sector(b), vec![c(1.0)]).unwrap();
        let f = embed_full(&s).unwrap();
        assert_eq!(f.amplitudes()[0], c(1.0));
        assert!(f.amplitudes()[1..].iter().all(|a| a.norm() == 0.0));

        let b = Arc::new(sector_basis(2, 1).unwrap());
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let s = PureState::new(Space::Sector(b.clone()), vec![c(h), c(h)]).unwrap();
        let f = embed_full(&s).unwrap();
        assert_eq!(f.amplitudes(), &[c(0.0), c(h), c(h), c(0.0)]);
        let back = project_sector(&f, &b).unwrap();
        assert_eq!(back.state.unwrap().amplitudes(), s.amplitudes());
        assert!((back.weight - 1.0).abs() < 1e-15);
    }

    #[test]
    fn projection_weights() {
        let vac = PureState::vacuum(4).unwrap();
        let b0 = Arc::new(sector_basis(4, 0).unwrap());
        let b1 = Arc::new(sector_basis(4, 1).unwrap());
        let p = project_sector(&vac, &b0).unwrap();
        assert_eq!(p.weight, 1.0);
        assert_eq!(p.state.unwrap().amplitudes(), &[c(1.0)]);
        let p = project_sector(&vac, &b1).unwrap();
        assert_eq!(p.weight, 0.0);
        assert!(p.state.is_none());

        // (|n=1 uniform> + |0011>) / sqrt 2
        let mut amps = vec![c(0.0); 16];
        for m in [1usize, 2, 4, 8] {
            amps[m] = c(0.5 / core::f64::consts::SQRT_2);
        }
        amps[0b0011] = c(core::f64::consts::FRAC_1_SQRT_2);
        let s = PureState::new(Space::Full { sites: 4 }, amps).unwrap();
        let p = project_sector(&s, &b1).unwrap();
        assert!((p.weight - 0.5).abs() < 1e-15);
        let w = sector_weights(&s);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_unnormalized_and_mismatched() {
        let b = Arc::new(sector_basis(2, 1).unwrap());
        assert!(PureState::new(Space::Sector(b.clone()), vec![c(1.0), c(1.0)]).is_err());
        assert!(matches!(
            PureState::new(Space::Sector(b), vec![c(1.0)]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }
}
