//! Bit-packed periodic lattices, coordinate arithmetic and fcc geometry.
//!
//! Both models keep their state in a flat `Vec<u64>` so the schedulers can
//! hand the same words to several workers through [`SharedBits`]. All edges
//! are powers of two, which turns periodic wrapping into a bit mask.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::rng::WordSource;

/// Integer lattice coordinates. Two dimensional lattices leave `z` at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct SiteCoord {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl SiteCoord {
    pub const fn new2(x: usize, y: usize) -> Self {
        Self { x, y, z: 0 }
    }

    pub const fn new3(x: usize, y: usize, z: usize) -> Self {
        Self { x, y, z }
    }

    pub fn as_array(self) -> [usize; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [usize; 3]) -> Self {
        Self::new3(a[0], a[1], a[2])
    }

    /// Reduce every coordinate modulo the (power of two) edge.
    #[inline]
    pub fn wrap(self, mask: usize) -> Self {
        Self::new3(self.x & mask, self.y & mask, self.z & mask)
    }

    /// Periodic translation by a signed offset.
    #[inline]
    pub fn offset(self, d: [isize; 3], mask: usize) -> Self {
        Self::new3(
            self.x.wrapping_add_signed(d[0]) & mask,
            self.y.wrapping_add_signed(d[1]) & mask,
            self.z.wrapping_add_signed(d[2]) & mask,
        )
    }
}

/// Validate a lattice edge and return `log2(edge)`.
pub fn check_edge(edge: usize, min: usize) -> Result<u32> {
    if edge < min || !edge.is_power_of_two() {
        return Err(Error::BadEdge { edge, min });
    }
    Ok(edge.trailing_zeros())
}

/// Single-bit access used by the update kernels.
///
/// Sequential code goes through [`PlainBits`]; concurrent workers each hold
/// a copy of [`SharedBits`] and rely on the decomposition to keep their
/// footprints apart.
pub trait BitAccess {
    fn get(&self, bit: usize) -> bool;
    fn flip(&mut self, bit: usize);
}

pub struct PlainBits<'a>(pub &'a mut [u64]);

impl BitAccess for PlainBits<'_> {
    #[inline(always)]
    fn get(&self, bit: usize) -> bool {
        (self.0[bit >> 6] >> (bit & 63)) & 1 == 1
    }

    #[inline(always)]
    fn flip(&mut self, bit: usize) {
        self.0[bit >> 6] ^= 1u64 << (bit & 63);
    }
}

const _: () = assert!(std::mem::align_of::<u64>() == std::mem::align_of::<AtomicU64>());
const _: () = assert!(std::mem::size_of::<u64>() == std::mem::size_of::<AtomicU64>());

/// Word storage shared between workers.
///
/// Bits owned by different domains can live in the same word, so flips are
/// atomic XORs. Relaxed ordering suffices: workers synchronize on a barrier
/// between intervals and never touch each other's bits inside one.
#[derive(Clone, Copy)]
pub struct SharedBits<'a>(&'a [AtomicU64]);

impl<'a> SharedBits<'a> {
    pub fn new(words: &'a mut [u64]) -> Self {
        let len = words.len();
        let ptr = words.as_mut_ptr() as *const AtomicU64;
        // SAFETY: same size and alignment (checked above), and the exclusive
        // borrow guarantees no non-atomic access for 'a.
        Self(unsafe { std::slice::from_raw_parts(ptr, len) })
    }
}

impl BitAccess for SharedBits<'_> {
    #[inline(always)]
    fn get(&self, bit: usize) -> bool {
        (self.0[bit >> 6].load(Ordering::Relaxed) >> (bit & 63)) & 1 == 1
    }

    #[inline(always)]
    fn flip(&mut self, bit: usize) {
        self.0[bit >> 6].fetch_xor(1u64 << (bit & 63), Ordering::Relaxed);
    }
}

/// Slopes of the octahedron surface on an `L x L` periodic grid.
///
/// Bit 1 encodes slope `+1`, bit 0 encodes `-1`. The x plane occupies the
/// first `plane_bits` bits of `words`, the y plane the next `plane_bits`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlopeField {
    edge: usize,
    shift: u32,
    plane_bits: usize,
    words: Vec<u64>,
}

impl SlopeField {
    pub const MIN_EDGE: usize = 4;

    fn zeroed(edge: usize) -> Result<Self> {
        let shift = check_edge(edge, Self::MIN_EDGE)?;
        let plane_words = (edge * edge).div_ceil(64);
        Ok(Self {
            edge,
            shift,
            plane_bits: plane_words * 64,
            words: vec![0; 2 * plane_words],
        })
    }

    /// Flat initial condition: the checkerboard zigzag with
    /// `sx(i, j) = +1` for odd `i` and `sy(i, j) = +1` for odd `j`.
    pub fn flat(edge: usize) -> Result<Self> {
        let mut f = Self::zeroed(edge)?;
        for j in 0..edge {
            for i in 0..edge {
                f.set_sx(i, j, if i % 2 == 1 { 1 } else { -1 });
                f.set_sy(i, j, if j % 2 == 1 { 1 } else { -1 });
            }
        }
        Ok(f)
    }

    pub fn edge(&self) -> usize {
        self.edge
    }

    pub fn shift(&self) -> u32 {
        self.shift
    }

    pub fn plane_bits(&self) -> usize {
        self.plane_bits
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    #[inline]
    pub fn sx_bit(&self, i: usize, j: usize) -> usize {
        ((j & (self.edge - 1)) << self.shift) | (i & (self.edge - 1))
    }

    #[inline]
    pub fn sy_bit(&self, i: usize, j: usize) -> usize {
        self.plane_bits + self.sx_bit(i, j)
    }

    fn bit(&self, b: usize) -> i8 {
        if (self.words[b >> 6] >> (b & 63)) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    fn set_bit(&mut self, b: usize, slope: i8) {
        let m = 1u64 << (b & 63);
        if slope > 0 {
            self.words[b >> 6] |= m;
        } else {
            self.words[b >> 6] &= !m;
        }
    }

    pub fn sx(&self, i: usize, j: usize) -> i8 {
        self.bit(self.sx_bit(i, j))
    }

    pub fn sy(&self, i: usize, j: usize) -> i8 {
        self.bit(self.sy_bit(i, j))
    }

    pub fn set_sx(&mut self, i: usize, j: usize, slope: i8) {
        self.set_bit(self.sx_bit(i, j), slope)
    }

    pub fn set_sy(&mut self, i: usize, j: usize, slope: i8) {
        self.set_bit(self.sy_bit(i, j), slope)
    }

    /// Per-row sums of `sx` and per-column sums of `sy`.
    pub fn closure_sums(&self) -> (Vec<i64>, Vec<i64>) {
        let l = self.edge;
        let rows = (0..l)
            .map(|j| (0..l).map(|i| self.sx(i, j) as i64).sum())
            .collect();
        let cols = (0..l)
            .map(|i| (0..l).map(|j| self.sy(i, j) as i64).sum())
            .collect();
        (rows, cols)
    }
}

/// The twelve fcc nearest-neighbour offsets: permutations of `(±1, ±1, 0)`.
pub const FCC_OFFSETS: [[isize; 3]; 12] = [
    [1, 1, 0],
    [-1, 1, 0],
    [1, -1, 0],
    [-1, -1, 0],
    [1, 0, 1],
    [-1, 0, 1],
    [1, 0, -1],
    [-1, 0, -1],
    [0, 1, 1],
    [0, -1, 1],
    [0, 1, -1],
    [0, -1, -1],
];

/// A simple-cubic site belongs to the fcc sublattice iff `x ^ y ^ z` is even.
#[inline]
pub fn fcc_is_valid(p: SiteCoord) -> bool {
    (p.x ^ p.y ^ p.z) & 1 == 0
}

/// The twelve periodic nearest neighbours of a valid fcc site.
pub fn fcc_neighbors(p: SiteCoord, edge: usize) -> Result<[SiteCoord; 12]> {
    check_edge(edge, OccupancyLattice::MIN_EDGE)?;
    if p.x >= edge || p.y >= edge || p.z >= edge {
        return Err(Error::OutOfRange(p));
    }
    if !fcc_is_valid(p) {
        return Err(Error::InvalidParity(p));
    }
    let mask = edge - 1;
    Ok(FCC_OFFSETS.map(|d| p.offset(d, mask)))
}

/// Species map of the binary alloy: one bit per simple-cubic site,
/// 1 for species B. Odd-parity sites stay 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyLattice {
    edge: usize,
    shift: u32,
    words: Vec<u64>,
}

impl OccupancyLattice {
    pub const MIN_EDGE: usize = 4;

    /// All sites species A.
    pub fn empty(edge: usize) -> Result<Self> {
        let shift = check_edge(edge, Self::MIN_EDGE)?;
        Ok(Self {
            edge,
            shift,
            words: vec![0; (edge * edge * edge).div_ceil(64)],
        })
    }

    /// Homogeneous random mixture: every fcc site is B with probability `conc`.
    pub fn random_alloy<R: WordSource>(edge: usize, conc: f64, rng: &mut R) -> Result<Self> {
        if !(0.0..=1.0).contains(&conc) {
            return Err(Error::BadConcentration(conc));
        }
        let mut lat = Self::empty(edge)?;
        for z in 0..edge {
            for y in 0..edge {
                for x in ((y + z) & 1..edge).step_by(2) {
                    if rng.uniform() < conc {
                        let b = lat.bit_index(SiteCoord::new3(x, y, z));
                        lat.words[b >> 6] |= 1 << (b & 63);
                    }
                }
            }
        }
        Ok(lat)
    }

    pub fn edge(&self) -> usize {
        self.edge
    }

    pub fn shift(&self) -> u32 {
        self.shift
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    pub fn valid_site_count(&self) -> u64 {
        (self.edge as u64).pow(3) / 2
    }

    #[inline]
    pub fn bit_index(&self, p: SiteCoord) -> usize {
        (((p.z << self.shift) | p.y) << self.shift) | p.x
    }

    fn check(&self, p: SiteCoord) -> Result<()> {
        if p.x >= self.edge || p.y >= self.edge || p.z >= self.edge {
            return Err(Error::OutOfRange(p));
        }
        if !fcc_is_valid(p) {
            return Err(Error::InvalidParity(p));
        }
        Ok(())
    }

    /// `true` if the site holds species B.
    pub fn is_b(&self, p: SiteCoord) -> Result<bool> {
        self.check(p)?;
        let b = self.bit_index(p);
        Ok((self.words[b >> 6] >> (b & 63)) & 1 == 1)
    }

    pub fn set(&mut self, p: SiteCoord, species_b: bool) -> Result<()> {
        self.check(p)?;
        let b = self.bit_index(p);
        if species_b {
            self.words[b >> 6] |= 1 << (b & 63);
        } else {
            self.words[b >> 6] &= !(1 << (b & 63));
        }
        Ok(())
    }

    pub fn count_b(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// `true` if every odd-parity site still carries a zero bit.
    pub fn odd_sites_clear(&self) -> bool {
        let l = self.edge;
        (0..l).all(|z| {
            (0..l).all(|y| {
                (1 - ((y + z) & 1)..l).step_by(2).all(|x| {
                    let b = self.bit_index(SiteCoord::new3(x, y, z));
                    (self.words[b >> 6] >> (b & 63)) & 1 == 0
                })
            })
        })
    }

    /// Iterate over every valid fcc site in z, y, x order.
    pub fn valid_sites(&self) -> impl Iterator<Item = SiteCoord> + '_ {
        let l = self.edge;
        (0..l).flat_map(move |z| {
            (0..l).flat_map(move |y| {
                ((y + z) & 1..l)
                    .step_by(2)
                    .map(move |x| SiteCoord::new3(x, y, z))
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{RngKind, RngStream};
    use proptest::prelude::*;

    #[test]
    fn flat_slopes_close() {
        for l in [4, 8, 16] {
            let f = SlopeField::flat(l).unwrap();
            let (rows, cols) = f.closure_sums();
            assert!(rows.iter().all(|&s| s == 0));
            assert!(cols.iter().all(|&s| s == 0));
        }
    }

    #[test]
    fn flat_slopes_reject_bad_edges() {
        assert_eq!(
            SlopeField::flat(6).unwrap_err(),
            Error::BadEdge { edge: 6, min: 4 }
        );
        assert!(SlopeField::flat(2).is_err());
        assert!(SlopeField::flat(0).is_err());
    }

    #[test]
    fn fcc_parity_examples() {
        assert!(fcc_is_valid(SiteCoord::new3(0, 0, 0)));
        assert!(!fcc_is_valid(SiteCoord::new3(1, 0, 0)));
        assert!(fcc_is_valid(SiteCoord::new3(1, 1, 0)));
    }

    #[test]
    fn fcc_neighbors_match_distance_scan() {
        // Oracle: every sc site at squared periodic distance 2.
        let l = 8usize;
        let origin = SiteCoord::new3(0, 0, 0);
        let mut scan = Vec::new();
        let d = |a: usize| {
            let a = a.min(l - a);
            a * a
        };
        for z in 0..l {
            for y in 0..l {
                for x in 0..l {
                    if d(x) + d(y) + d(z) == 2 {
                        scan.push(SiteCoord::new3(x, y, z));
                    }
                }
            }
        }
        let mut got = fcc_neighbors(origin, l).unwrap().to_vec();
        got.sort();
        scan.sort();
        assert_eq!(got, scan);
        for want in [
            SiteCoord::new3(1, 1, 0),
            SiteCoord::new3(7, 1, 0),
            SiteCoord::new3(0, 7, 7),
        ] {
            assert!(got.contains(&want));
        }
    }

    #[test]
    fn fcc_neighbors_reject_odd_parity() {
        assert_eq!(
            fcc_neighbors(SiteCoord::new3(1, 0, 0), 8).unwrap_err(),
            Error::InvalidParity(SiteCoord::new3(1, 0, 0))
        );
    }

    #[test]
    fn alloy_extremes() {
        let mut rng = RngStream::new(RngKind::Lcg64, 3);
        let a = OccupancyLattice::random_alloy(8, 0.0, &mut rng).unwrap();
        assert_eq!(a.count_b(), 0);
        let b = OccupancyLattice::random_alloy(8, 1.0, &mut rng).unwrap();
        assert_eq!(b.count_b(), 256);
        assert!(b.odd_sites_clear());
        assert!(OccupancyLattice::random_alloy(8, 1.5, &mut rng).is_err());
        assert!(OccupancyLattice::random_alloy(8, -0.1, &mut rng).is_err());
    }

    #[test]
    fn alloy_binomial_count() {
        let mut rng = RngStream::new(RngKind::Lcg64, 99);
        let lat = OccupancyLattice::random_alloy(64, 0.325, &mut rng).unwrap();
        let n = 131072.0f64;
        let mean = n * 0.325;
        let sd = (n * 0.325 * 0.675).sqrt();
        assert!((lat.count_b() as f64 - mean).abs() < 5.0 * sd);
        assert!(lat.odd_sites_clear());
    }

    #[test]
    fn valid_site_iteration_counts() {
        let lat = OccupancyLattice::empty(16).unwrap();
        assert_eq!(lat.valid_sites().count() as u64, lat.valid_site_count());
        assert!(lat.valid_sites().all(fcc_is_valid));
    }

    proptest! {
        #[test]
        fn neighbor_relation_is_symmetric(x in 0usize..16, y in 0usize..16, z in 0usize..16) {
            let p = SiteCoord::new3(x, y, z);
            prop_assume!(fcc_is_valid(p));
            for q in fcc_neighbors(p, 16).unwrap() {
                prop_assert!(fcc_is_valid(q));
                prop_assert!(fcc_neighbors(q, 16).unwrap().contains(&p));
            }
        }

        #[test]
        fn slope_bits_round_trip(i in 0usize..32, j in 0usize..32, sx in any::<bool>(), sy in any::<bool>()) {
            let mut f = SlopeField::flat(32).unwrap();
            let (sx, sy) = (if sx { 1 } else { -1 }, if sy { 1 } else { -1 });
            f.set_sx(i, j, sx);
            f.set_sy(i, j, sy);
            prop_assert_eq!(f.sx(i, j), sx);
            prop_assert_eq!(f.sy(i, j), sy);
        }

        #[test]
        fn occupancy_round_trip(x in 0usize..8, y in 0usize..8, z in 0usize..8, b in any::<bool>()) {
            let p = SiteCoord::new3(x, y, z);
            prop_assume!(fcc_is_valid(p));
            let mut lat = OccupancyLattice::empty(8).unwrap();
            lat.set(p, b).unwrap();
            prop_assert_eq!(lat.is_b(p).unwrap(), b);
            prop_assert_eq!(lat.count_b(), b as u64);
        }
    }
}
