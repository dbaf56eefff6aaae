use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Default cap on the memory footprint of one dense matrix over the basis: 4 GiB.
pub const DEFAULT_MEMORY_CAP: u64 = 4 * 1024 * 1024 * 1024;

const BYTES_PER_ENTRY: u128 = 16; // complex f64

/// Occupation-number state of the chain: one particle count per site.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FockState {
    occ: Vec<u32>,
}

impl FockState {
    pub fn new(occ: Vec<u32>) -> Self {
        FockState { occ }
    }

    pub fn occupations(&self) -> &[u32] {
        &self.occ
    }

    pub fn sites(&self) -> usize {
        self.occ.len()
    }

    pub fn total(&self) -> u32 {
        self.occ.iter().sum()
    }

    /// True when every site holds at most one particle.
    pub fn is_hardcore(&self) -> bool {
        self.occ.iter().all(|&n| n <= 1)
    }
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, n) in self.occ.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, ">")
    }
}

/// Number of occupation vectors of length `sites` summing to `particles`:
/// C(particles + sites - 1, particles). Returns `None` on overflow.
pub fn sector_dimension(sites: usize, particles: u32) -> Option<u128> {
    if sites == 0 {
        return Some(if particles == 0 { 1 } else { 0 });
    }
    let n = particles as u128 + sites as u128 - 1;
    let k = (particles as u128).min(sites as u128 - 1);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)?;
        acc /= i + 1;
    }
    Some(acc)
}

/// Enumeration of the fixed-particle-number sector, ordered by
/// lexicographically decreasing occupation vectors. The ordering is
/// deterministic, and positions are recovered by combinatorial ranking
/// rather than hashing.
#[derive(Debug)]
pub struct FockBasis {
    sites: usize,
    particles: u32,
    states: Vec<FockState>,
    // subdim[s][p] = number of vectors of length s summing to p, for ranking
    subdim: Vec<Vec<u64>>,
}

impl FockBasis {
    /// Enumerate the basis under the default 4 GiB dense-matrix memory cap.
    pub fn enumerate(sites: usize, particles: u32) -> Result<Arc<FockBasis>> {
        Self::enumerate_with_cap(sites, particles, DEFAULT_MEMORY_CAP)
    }

    /// Enumerate the basis, rejecting sectors whose dense matrices would
    /// exceed `memory_cap` bytes.
    pub fn enumerate_with_cap(
        sites: usize,
        particles: u32,
        memory_cap: u64,
    ) -> Result<Arc<FockBasis>> {
        if sites == 0 {
            return Err(Error::InvalidParams("chain must have at least one site".into()));
        }
        let dim = sector_dimension(sites, particles)
            .ok_or_else(|| Error::InvalidParams("basis dimension overflows u128".into()))?;
        let required = dim.checked_mul(dim).and_then(|d| d.checked_mul(BYTES_PER_ENTRY));
        match required {
            Some(r) if r <= memory_cap as u128 => {}
            _ => {
                return Err(Error::BasisTooLarge {
                    dim: dim.min(usize::MAX as u128) as usize,
                    required: required.unwrap_or(u128::MAX),
                    cap: memory_cap,
                })
            }
        }
        let dim = dim as usize;

        let mut subdim = vec![vec![0u64; particles as usize + 1]; sites + 1];
        subdim[0][0] = 1;
        for s in 1..=sites {
            for p in 0..=particles as usize {
                subdim[s][p] = sector_dimension(s, p as u32).unwrap_or(u64::MAX as u128) as u64;
            }
        }

        let mut states = Vec::with_capacity(dim);
        let mut occ = vec![0u32; sites];
        enumerate_rec(&mut occ, 0, particles, &mut states);
        debug_assert_eq!(states.len(), dim);

        Ok(Arc::new(FockBasis { sites, particles, states, subdim }))
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn particles(&self) -> u32 {
        self.particles
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[FockState] {
        &self.states
    }

    pub fn state(&self, index: usize) -> &FockState {
        &self.states[index]
    }

    /// Position of an occupation vector in the enumeration, by combinatorial
    /// ranking over the lexicographically decreasing order. O(sites * max_occ).
    pub fn index_of(&self, occ: &[u32]) -> Option<usize> {
        if occ.len() != self.sites || occ.iter().sum::<u32>() != self.particles {
            return None;
        }
        let mut rank = 0u64;
        let mut remaining = self.particles;
        for (site, &n) in occ.iter().enumerate() {
            let tail_sites = self.sites - site - 1;
            // states with a larger count at this site come first
            for v in (n + 1)..=remaining {
                rank += self.subdim[tail_sites][(remaining - v) as usize];
            }
            remaining -= n;
        }
        Some(rank as usize)
    }

    /// True when the two bases describe the same sector.
    pub fn same_sector(&self, other: &FockBasis) -> bool {
        self.sites == other.sites && self.particles == other.particles
    }
}

fn enumerate_rec(occ: &mut [u32], site: usize, remaining: u32, out: &mut Vec<FockState>) {
    if site == occ.len() - 1 {
        occ[site] = remaining;
        out.push(FockState::new(occ.to_vec()));
        return;
    }
    for v in (0..=remaining).rev() {
        occ[site] = v;
        enumerate_rec(occ, site + 1, remaining - v, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions_match_figures() {
        assert_eq!(FockBasis::enumerate(6, 3).unwrap().dim(), 56);
        assert_eq!(FockBasis::enumerate(8, 4).unwrap().dim(), 330);
        assert_eq!(FockBasis::enumerate(10, 5).unwrap().dim(), 2002);
        assert_eq!(FockBasis::enumerate(1, 7).unwrap().dim(), 1);
        assert_eq!(FockBasis::enumerate(4, 0).unwrap().dim(), 1);
    }

    #[test]
    fn rejects_zero_sites() {
        assert!(FockBasis::enumerate(0, 3).is_err());
    }

    #[test]
    fn rejects_oversized_sector() {
        let err = FockBasis::enumerate_with_cap(10, 5, 1024).unwrap_err();
        match err {
            Error::BasisTooLarge { dim, .. } => assert_eq!(dim, 2002),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn ordering_is_lexicographically_decreasing() {
        let basis = FockBasis::enumerate(4, 3).unwrap();
        for w in basis.states().windows(2) {
            assert!(w[0].occupations() > w[1].occupations());
        }
        assert_eq!(basis.state(0).occupations(), &[3, 0, 0, 0]);
        assert_eq!(basis.state(basis.dim() - 1).occupations(), &[0, 0, 0, 3]);
    }

    #[test]
    fn two_site_single_particle_order() {
        let basis = FockBasis::enumerate(2, 1).unwrap();
        assert_eq!(basis.state(0).occupations(), &[1, 0]);
        assert_eq!(basis.state(1).occupations(), &[0, 1]);
    }

    #[test]
    fn index_lookup_inverts_enumeration() {
        for (sites, particles) in [(1usize, 7u32), (3, 2), (5, 4), (6, 3), (8, 4)] {
            let basis = FockBasis::enumerate(sites, particles).unwrap();
            let expected = sector_dimension(sites, particles).unwrap() as usize;
            assert_eq!(basis.dim(), expected);
            for (i, s) in basis.states().iter().enumerate() {
                assert_eq!(basis.index_of(s.occupations()), Some(i));
            }
        }
    }

    #[test]
    fn index_rejects_wrong_sector() {
        let basis = FockBasis::enumerate(3, 2).unwrap();
        assert_eq!(basis.index_of(&[1, 1, 1]), None);
        assert_eq!(basis.index_of(&[2, 0]), None);
    }

    #[test]
    fn hardcore_flag() {
        assert!(FockState::new(vec![1, 1, 0, 1]).is_hardcore());
        assert!(!FockState::new(vec![2, 0, 1]).is_hardcore());
    }
}
