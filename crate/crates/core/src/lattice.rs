//! Open-boundary square lattices and the subset catalogs used for entropy
//! scaling fits.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Largest lattice accepted by [`build_square_lattice`].
pub const DEFAULT_MAX_SITES: usize = 20;

/// Open-boundary square lattice with nearest-neighbour bonds.
///
/// Sites are numbered row-major: site `r * cols + c` sits at `(x, y) = (c, r)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeSpec {
    rows: usize,
    cols: usize,
    sites: Vec<(i64, i64)>,
    bonds: Vec<(usize, usize)>,
}

/// Builds a `rows x cols` lattice, refusing anything above [`DEFAULT_MAX_SITES`].
pub fn build_square_lattice(rows: usize, cols: usize) -> Result<LatticeSpec> {
    LatticeSpec::with_max_sites(rows, cols, DEFAULT_MAX_SITES)
}

impl LatticeSpec {
    pub fn with_max_sites(rows: usize, cols: usize, max_sites: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("lattice dimensions must be positive"));
        }
        let n = rows
            .checked_mul(cols)
            .ok_or(Error::Capacity { requested: usize::MAX, max: max_sites })?;
        // Masks are u64 and full-space indices are usize.
        let max = max_sites.min(63);
        if n > max {
            return Err(Error::Capacity { requested: n, max });
        }
        let sites = (0..n).map(|i| ((i % cols) as i64, (i / cols) as i64)).collect();
        let mut bonds = Vec::with_capacity(rows * (cols - 1) + cols * (rows - 1));
        for i in 0..n {
            let (r, c) = (i / cols, i % cols);
            if c + 1 < cols {
                bonds.push((i, i + 1));
            }
            if r + 1 < rows {
                bonds.push((i, i + cols));
            }
        }
        Ok(Self { rows, cols, sites, bonds })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of sites `N`.
    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    /// `(x, y)` coordinates indexed by site.
    pub fn sites(&self) -> &[(i64, i64)] {
        &self.sites
    }

    /// Unordered nearest-neighbour pairs, each stored once as `(i, j)` with `i < j`.
    pub fn bonds(&self) -> &[(usize, usize)] {
        &self.bonds
    }

    pub fn coordinates(&self, site: usize) -> Result<(i64, i64)> {
        self.sites
            .get(site)
            .copied()
            .ok_or(Error::IndexOutOfRange { index: site, sites: self.num_sites() })
    }

    /// `|x_i - x_j| + |y_i - y_j|`.
    pub fn manhattan_distance(&self, i: usize, j: usize) -> Result<usize> {
        let (xi, yi) = self.coordinates(i)?;
        let (xj, yj) = self.coordinates(j)?;
        Ok(((xi - xj).unsigned_abs() + (yi - yj).unsigned_abs()) as usize)
    }

    /// Mask with every site set.
    pub fn full_mask(&self) -> u64 {
        (1u64 << self.num_sites()) - 1
    }

    /// Number of bonds with exactly one endpoint inside `mask`.
    pub fn boundary_bonds(&self, mask: u64) -> usize {
        self.bonds
            .iter()
            .filter(|&&(i, j)| ((mask >> i) & 1) != ((mask >> j) & 1))
            .count()
    }

    /// Subset catalog for an entropy scaling fit.
    ///
    /// Fails with [`Error::FitDegeneracy`] when the `(V, A)` pairs of the
    /// catalog do not span two dimensions.
    pub fn enumerate_subsets(&self, policy: SubsetPolicy) -> Result<Vec<Subset>> {
        let n = self.num_sites();
        let mut out = Vec::new();
        match policy {
            SubsetPolicy::Rectangles => {
                let cap = n / 2;
                for h in 1..=self.rows {
                    for w in 1..=self.cols {
                        if h * w > cap || h * w == n {
                            continue;
                        }
                        for r0 in 0..=(self.rows - h) {
                            for c0 in 0..=(self.cols - w) {
                                let mut mask = 0u64;
                                for r in r0..r0 + h {
                                    for c in c0..c0 + w {
                                        mask |= 1 << (r * self.cols + c);
                                    }
                                }
                                out.push(Subset::from_mask(self, mask)?);
                            }
                        }
                    }
                }
            }
            SubsetPolicy::BlockPowerset { k, row, col } => {
                if k == 0 || row + k > self.rows || col + k > self.cols {
                    return Err(Error::InvalidArgument("block does not fit inside the lattice"));
                }
                let block: Vec<usize> = (row..row + k)
                    .flat_map(|r| (col..col + k).map(move |c| r * self.cols + c))
                    .collect();
                for pick in 1u64..(1u64 << block.len()) {
                    let mask = block
                        .iter()
                        .enumerate()
                        .filter(|(b, _)| (pick >> b) & 1 == 1)
                        .fold(0u64, |m, (_, &s)| m | (1 << s));
                    if mask != self.full_mask() {
                        out.push(Subset::from_mask(self, mask)?);
                    }
                }
            }
        }
        if !design_has_rank_two(&out) {
            return Err(Error::FitDegeneracy);
        }
        Ok(out)
    }
}

/// Which subsets enter an entropy scaling fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsetPolicy {
    /// Every axis-aligned sub-rectangle with at most `N / 2` sites.
    Rectangles,
    /// Every nonempty subset of the `k x k` block whose top-left site is `(row, col)`.
    BlockPowerset { k: usize, row: usize, col: usize },
}

impl SubsetPolicy {
    pub fn tag(&self) -> alloc::string::String {
        match self {
            SubsetPolicy::Rectangles => "rectangles".into(),
            SubsetPolicy::BlockPowerset { k, row, col } => {
                alloc::format!("block-powerset(k={k},row={row},col={col})")
            }
        }
    }
}

/// A proper nonempty set of sites with its volume and boundary size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subset {
    members: Vec<usize>,
    mask: u64,
    area: usize,
}

impl Subset {
    pub fn from_mask(lattice: &LatticeSpec, mask: u64) -> Result<Self> {
        let n = lattice.num_sites();
        if mask == 0 || mask & !lattice.full_mask() != 0 || mask == lattice.full_mask() {
            return Err(Error::InvalidArgument("subset must be a proper nonempty set of lattice sites"));
        }
        let members = (0..n).filter(|&i| (mask >> i) & 1 == 1).collect();
        Ok(Self { members, mask, area: lattice.boundary_bonds(mask) })
    }

    pub fn from_sites(lattice: &LatticeSpec, sites: &[usize]) -> Result<Self> {
        let n = lattice.num_sites();
        let mut mask = 0u64;
        for &s in sites {
            if s >= n {
                return Err(Error::IndexOutOfRange { index: s, sites: n });
            }
            mask |= 1 << s;
        }
        Self::from_mask(lattice, mask)
    }

    /// Ascending site indices.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    /// `V_X`, the number of member sites.
    pub fn volume(&self) -> usize {
        self.members.len()
    }

    /// `A_X`, the number of bonds leaving the subset.
    pub fn area(&self) -> usize {
        self.area
    }

    pub fn complement(&self, lattice: &LatticeSpec) -> Result<Self> {
        Self::from_mask(lattice, lattice.full_mask() & !self.mask)
    }
}

fn design_has_rank_two(subsets: &[Subset]) -> bool {
    let (mut vv, mut aa, mut va) = (0.0f64, 0.0f64, 0.0f64);
    for s in subsets {
        let (v, a) = (s.volume() as f64, s.area() as f64);
        vv += v * v;
        aa += a * a;
        va += v * a;
    }
    let det = vv * aa - va * va;
    vv > 0.0 && aa > 0.0 && det > 1e-12 * vv * aa
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_by_four_counts() {
        let l = build_square_lattice(4, 4).unwrap();
        assert_eq!(l.num_sites(), 16);
        assert_eq!(l.bonds().len(), 24);
    }

    #[test]
    fn single_site_lattice() {
        let l = build_square_lattice(1, 1).unwrap();
        assert_eq!(l.num_sites(), 1);
        assert!(l.bonds().is_empty());
    }

    #[test]
    fn two_by_two_is_a_four_cycle() {
        let l = build_square_lattice(2, 2).unwrap();
        let mut bonds = l.bonds().to_vec();
        bonds.sort();
        assert_eq!(bonds, [(0, 1), (0, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn capacity_limit() {
        assert!(matches!(build_square_lattice(5, 5), Err(Error::Capacity { requested: 25, .. })));
        assert!(matches!(build_square_lattice(0, 3), Err(Error::InvalidArgument(_))));
        assert!(LatticeSpec::with_max_sites(5, 5, 25).is_ok());
    }

    #[test]
    fn distances() {
        let l = build_square_lattice(4, 4).unwrap();
        assert_eq!(l.manhattan_distance(0, 15).unwrap(), 6);
        assert_eq!(l.manhattan_distance(7, 7).unwrap(), 0);
        let l = build_square_lattice(2, 3).unwrap();
        // (0,0) is site 0, (x=2, y=1) is site 5.
        assert_eq!(l.manhattan_distance(0, 5).unwrap(), 3);
        assert!(matches!(l.manhattan_distance(0, 6), Err(Error::IndexOutOfRange { index: 6, .. })));
    }

    #[test]
    fn rectangle_catalog_areas() {
        let l = build_square_lattice(4, 4).unwrap();
        let subsets = l.enumerate_subsets(SubsetPolicy::Rectangles).unwrap();
        let corner = subsets.iter().find(|s| s.mask() == 1).unwrap();
        assert_eq!((corner.volume(), corner.area()), (1, 2));
        let interior = subsets.iter().find(|s| s.mask() == 1 << 5).unwrap();
        assert_eq!((interior.volume(), interior.area()), (1, 4));
        let block = subsets.iter().find(|s| s.mask() == 0b11_0011).unwrap();
        assert_eq!((block.volume(), block.area()), (4, 4));
        assert!(subsets.iter().all(|s| s.volume() <= 8));
        assert_eq!(subsets.len(), 91);
    }

    #[test]
    fn two_by_two_single_site() {
        let l = build_square_lattice(2, 2).unwrap();
        let s = Subset::from_sites(&l, &[3]).unwrap();
        assert_eq!((s.volume(), s.area()), (1, 2));
    }

    #[test]
    fn block_powerset() {
        let l = build_square_lattice(4, 4).unwrap();
        let subsets = l
            .enumerate_subsets(SubsetPolicy::BlockPowerset { k: 3, row: 0, col: 0 })
            .unwrap();
        assert_eq!(subsets.len(), 511);
        // A 2x2 lattice block covering everything drops the full set.
        let l = build_square_lattice(2, 2).unwrap();
        let subsets = l
            .enumerate_subsets(SubsetPolicy::BlockPowerset { k: 2, row: 0, col: 0 })
            .unwrap();
        assert_eq!(subsets.len(), 14);
    }

    #[test]
    fn degenerate_catalogs() {
        // Only single sites with V = A = 1 remain.
        let l = build_square_lattice(1, 2).unwrap();
        assert_eq!(l.enumerate_subsets(SubsetPolicy::Rectangles), Err(Error::FitDegeneracy));
        let l = build_square_lattice(1, 1).unwrap();
        assert_eq!(l.enumerate_subsets(SubsetPolicy::Rectangles), Err(Error::FitDegeneracy));
    }

    #[test]
    fn improper_subsets_rejected() {
        let l = build_square_lattice(2, 2).unwrap();
        assert!(Subset::from_mask(&l, 0).is_err());
        assert!(Subset::from_mask(&l, 0b1111).is_err());
        assert!(Subset::from_mask(&l, 0b1_0000).is_err());
    }
}
