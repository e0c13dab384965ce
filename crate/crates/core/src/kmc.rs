//! Kawasaki exchange dynamics of a binary alloy on the fcc lattice.
//!
//! A B particle hops to a neighbouring A site with the Metropolis
//! probability `min(1, exp(-(n_i - n_f) eps))`, where `n_i` and `n_f` count
//! the B neighbours of the old and new position. The exchange partner is
//! left out of both counts.

use serde::{Deserialize, Serialize};

use crate::decomposition::{Counters, Footprint, Kernel, SiteBox, WriteSink};
use crate::error::{Error, Result};
use crate::lattice::{check_edge, fcc_is_valid, fcc_neighbors, BitAccess, OccupancyLattice, PlainBits, SiteCoord, FCC_OFFSETS};
use crate::rng::{RngStream, WordSource};

/// Largest edge whose fcc site count still fits the 32-bit sampler.
pub const MAX_EDGE: usize = 1 << 10;

/// Which species may start an attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActiveMode {
    /// Attempts on an A site end at once.
    BOnly,
    /// An attempt on an A site picks a neighbour and, if it holds B, moves
    /// that particle onto the chosen site.
    Both,
}

/// Model parameters. The jump frequency is fixed to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmcParams {
    pub eps: f64,
    pub active: ActiveMode,
}

impl KmcParams {
    pub fn new(eps: f64, active: ActiveMode) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::Param(format!("eps = {eps} must be finite and >= 0")));
        }
        Ok(Self { eps, active })
    }
}

/// Metropolis acceptance for a particle going from `n_i` to `n_f` like
/// neighbours.
pub fn metropolis_prob(n_i: u32, n_f: u32, params: &KmcParams) -> f64 {
    if n_f >= n_i {
        1.0
    } else {
        (-((n_i - n_f) as f64) * params.eps).exp()
    }
}

/// A proposed hop of the B particle at `i` to the A site `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExchangeContext {
    pub i: SiteCoord,
    pub f: SiteCoord,
    /// B neighbours of `i`, not counting `f`.
    pub n_i: u32,
    /// B neighbours of `f`, not counting `i`.
    pub n_f: u32,
}

impl ExchangeContext {
    pub fn new(lat: &OccupancyLattice, i: SiteCoord, f: SiteCoord) -> Result<Self> {
        let l = lat.edge();
        let ni = fcc_neighbors(i, l)?;
        if !ni.contains(&f) {
            return Err(Error::Param(format!("{f:?} is not a neighbour of {i:?}")));
        }
        let count = |p: SiteCoord, skip: SiteCoord| -> Result<u32> {
            let mut n = 0;
            for q in fcc_neighbors(p, l)? {
                if q != skip && lat.is_b(q)? {
                    n += 1;
                }
            }
            Ok(n)
        };
        Ok(Self {
            i,
            f,
            n_i: count(i, f)?,
            n_f: count(f, i)?,
        })
    }

    pub fn probability(&self, params: &KmcParams) -> f64 {
        metropolis_prob(self.n_i, self.n_f, params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KmcOutcome {
    Exchanged,
    RejectedSpecies,
    RejectedProb,
}

/// One attempt at a valid site.
pub fn kmc_attempt(
    lat: &mut OccupancyLattice,
    site: SiteCoord,
    params: &KmcParams,
    rng: &mut RngStream,
) -> Result<KmcOutcome> {
    let l = lat.edge();
    if site.x >= l || site.y >= l || site.z >= l {
        return Err(Error::OutOfRange(site));
    }
    if !fcc_is_valid(site) {
        return Err(Error::InvalidParity(site));
    }
    let kernel = KmcKernel::new(l, *params)?;
    let mut bits = PlainBits(lat.words_mut());
    Ok(kernel.attempt_detailed(&mut bits, site, rng, &mut crate::decomposition::NoLog))
}

/// `L^3 / 2` attempts at uniformly random valid sites.
pub fn kmc_mcs_sequential(lat: &mut OccupancyLattice, params: &KmcParams, rng: &mut RngStream) -> Result<Counters> {
    let kernel = KmcKernel::new(lat.edge(), *params)?;
    Ok(crate::decomposition::run_sequential(&kernel, lat.words_mut(), rng))
}

/// Mean number of A neighbours of a B particle.
pub fn open_bonds_per_particle(lat: &OccupancyLattice) -> Result<f64> {
    let words = lat.words();
    let mask = lat.edge() - 1;
    let get = |p: SiteCoord| {
        let b = lat.bit_index(p);
        (words[b >> 6] >> (b & 63)) & 1 == 1
    };
    let (mut particles, mut open) = (0u64, 0u64);
    for p in lat.valid_sites() {
        if get(p) {
            particles += 1;
            open += FCC_OFFSETS.iter().filter(|&&d| !get(p.offset(d, mask))).count() as u64;
        }
    }
    if particles == 0 {
        return Err(Error::NoParticles);
    }
    Ok(open as f64 / particles as f64)
}

/// The exchange update in the form the schedulers drive.
#[derive(Debug, Clone)]
pub struct KmcKernel {
    edge: usize,
    shift: u32,
    params: KmcParams,
    /// Acceptance threshold on a 32-bit word, indexed by `n_i - n_f > 0`.
    thr: [f64; 13],
    /// Bit offsets of the twelve neighbours, as wrapped deltas.
    offsets: [[isize; 3]; 12],
}

impl KmcKernel {
    pub fn new(edge: usize, params: KmcParams) -> Result<Self> {
        let shift = check_edge(edge, OccupancyLattice::MIN_EDGE)?;
        if edge > MAX_EDGE {
            return Err(Error::BadEdge {
                edge,
                min: OccupancyLattice::MIN_EDGE,
            });
        }
        let params = KmcParams::new(params.eps, params.active)?;
        let mut thr = [0.0; 13];
        for (d, t) in thr.iter_mut().enumerate() {
            *t = metropolis_prob(d as u32, 0, &params) * 4_294_967_296.0;
        }
        Ok(Self {
            edge,
            shift,
            params,
            thr,
            offsets: FCC_OFFSETS,
        })
    }

    pub fn params(&self) -> KmcParams {
        self.params
    }

    #[inline(always)]
    fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (((z << self.shift) | y) << self.shift) | x
    }

    #[inline(always)]
    fn neighbor(&self, p: SiteCoord, k: usize) -> SiteCoord {
        p.offset(self.offsets[k], self.edge - 1)
    }

    #[inline(always)]
    fn b_neighbors<B: BitAccess>(&self, bits: &B, p: SiteCoord) -> u32 {
        let mask = self.edge - 1;
        let mut n = 0;
        for d in &self.offsets {
            let q = p.offset(*d, mask);
            n += bits.get(self.index(q.x, q.y, q.z)) as u32;
        }
        n
    }

    #[inline]
    pub(crate) fn attempt_detailed<B: BitAccess, S: WriteSink>(
        &self,
        bits: &mut B,
        site: SiteCoord,
        rng: &mut RngStream,
        sink: &mut S,
    ) -> KmcOutcome {
        let si = self.index(site.x, site.y, site.z);
        let here_b = bits.get(si);
        if !here_b && self.params.active == ActiveMode::BOnly {
            return KmcOutcome::RejectedSpecies;
        }
        let f = self.neighbor(site, rng.below(12) as usize);
        let fi = self.index(f.x, f.y, f.z);
        if bits.get(fi) == here_b {
            return KmcOutcome::RejectedSpecies;
        }
        let (b_pos, a_pos) = if here_b { (site, f) } else { (f, site) };
        // a_pos holds A, so it never adds to the first count; b_pos holds B
        // and is removed from the second.
        let n_from = self.b_neighbors(bits, b_pos);
        let n_to = self.b_neighbors(bits, a_pos) - 1;
        if n_to < n_from {
            let t = self.thr[(n_from - n_to) as usize];
            if (rng.next_word() as f64) >= t {
                return KmcOutcome::RejectedProb;
            }
        }
        bits.flip(si);
        bits.flip(fi);
        sink.record(si);
        sink.record(fi);
        KmcOutcome::Exchanged
    }
}

impl Kernel for KmcKernel {
    fn dims(&self) -> usize {
        3
    }

    fn edge(&self) -> usize {
        self.edge
    }

    fn volume(&self) -> u64 {
        (self.edge as u64).pow(3) / 2
    }

    fn footprint(&self) -> Footprint {
        Footprint {
            read: (-2, 2),
            write: (-1, 1),
        }
    }

    /// One bit per simple-cubic site of an `e^3` block.
    fn block_bytes(&self, e: usize) -> usize {
        (e * e * e).div_ceil(8)
    }

    fn count_in_box(&self, b: &SiteBox) -> u64 {
        let v = b.volume();
        if b.extent.iter().any(|e| e % 2 == 0) {
            v / 2
        } else if (b.origin[0] ^ b.origin[1] ^ b.origin[2]) & 1 == 0 {
            (v + 1) / 2
        } else {
            (v - 1) / 2
        }
    }

    #[inline]
    fn sample_in_box<R: WordSource>(&self, b: &SiteBox, rng: &mut R) -> SiteCoord {
        let mask = self.edge - 1;
        let [ex, ey, ez] = b.extent;
        if ex % 2 == 0 {
            let idx = rng.below((ex / 2 * ey * ez) as u32) as u64;
            let (xh, rest) = crate::decomposition::div_rem(idx, ex / 2);
            let (ly, lz) = crate::decomposition::div_rem(rest, ey);
            let y = (b.origin[1] + ly) & mask;
            let z = (b.origin[2] + lz as usize) & mask;
            let x = (b.origin[0] + 2 * xh + ((b.origin[0] + y + z) & 1)) & mask;
            SiteCoord::new3(x, y, z)
        } else {
            let n = b.volume() as u32;
            loop {
                let p = b.decode(rng.below(n) as u64, mask);
                if fcc_is_valid(p) {
                    return p;
                }
            }
        }
    }

    #[inline]
    fn sample_site<R: WordSource>(&self, rng: &mut R) -> SiteCoord {
        let idx = rng.below(self.volume() as u32) as usize;
        let half = self.shift - 1;
        let xh = idx & ((1 << half) - 1);
        let rest = idx >> half;
        let y = rest & (self.edge - 1);
        let z = rest >> self.shift;
        SiteCoord::new3(2 * xh + ((y + z) & 1), y, z)
    }

    fn site_index(&self, p: SiteCoord) -> usize {
        self.index(p.x, p.y, p.z)
    }

    #[inline]
    fn attempt<B: BitAccess, S: WriteSink>(
        &self,
        bits: &mut B,
        site: SiteCoord,
        rng: &mut RngStream,
        sink: &mut S,
    ) -> bool {
        self.attempt_detailed(bits, site, rng, sink) == KmcOutcome::Exchanged
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngKind;
    use proptest::prelude::*;

    fn params(eps: f64, active: ActiveMode) -> KmcParams {
        KmcParams::new(eps, active).unwrap()
    }

    #[test]
    fn metropolis_values() {
        let p = params(1.5, ActiveMode::BOnly);
        assert_eq!(metropolis_prob(4, 7, &p), 1.0);
        assert!((metropolis_prob(7, 4, &p) - 0.011108996538242306).abs() < 1e-15);
        assert_eq!(metropolis_prob(5, 5, &p), 1.0);
        let zero = params(0.0, ActiveMode::BOnly);
        for a in 0..=12 {
            for b in 0..=12 {
                assert_eq!(metropolis_prob(a, b, &zero), 1.0);
            }
        }
        assert!(KmcParams::new(-1.0, ActiveMode::Both).is_err());
        assert!(KmcParams::new(f64::NAN, ActiveMode::Both).is_err());
    }

    #[test]
    fn a_site_rejected_in_b_only_mode() {
        let mut lat = OccupancyLattice::empty(8).unwrap();
        lat.set(SiteCoord::new3(1, 1, 0), true).unwrap();
        let before = lat.clone();
        let mut rng = RngStream::new(RngKind::Lcg64, 1);
        let out = kmc_attempt(&mut lat, SiteCoord::new3(0, 0, 0), &params(1.5, ActiveMode::BOnly), &mut rng).unwrap();
        assert_eq!(out, KmcOutcome::RejectedSpecies);
        assert_eq!(lat, before);
        assert!(kmc_attempt(&mut lat, SiteCoord::new3(1, 0, 0), &params(1.5, ActiveMode::BOnly), &mut rng).is_err());
    }

    #[test]
    fn isolated_particle_always_hops() {
        let p = params(1.5, ActiveMode::BOnly);
        let mut rng = RngStream::new(RngKind::Lcg64, 5);
        let mut lat = OccupancyLattice::empty(8).unwrap();
        let mut pos = SiteCoord::new3(2, 2, 2);
        lat.set(pos, true).unwrap();
        for _ in 0..50 {
            assert_eq!(kmc_attempt(&mut lat, pos, &p, &mut rng).unwrap(), KmcOutcome::Exchanged);
            assert_eq!(lat.count_b(), 1);
            pos = lat.valid_sites().find(|&q| lat.is_b(q).unwrap()).unwrap();
        }
    }

    /// Independent count: scan every sc site at squared distance 2.
    fn brute_count(lat: &OccupancyLattice, p: SiteCoord, skip: SiteCoord) -> u32 {
        let l = lat.edge() as isize;
        let mut n = 0;
        for q in lat.valid_sites() {
            let d = |a: usize, b: usize| {
                let t = (a as isize - b as isize).rem_euclid(l);
                t.min(l - t)
            };
            let r2 = d(p.x, q.x).pow(2) + d(p.y, q.y).pow(2) + d(p.z, q.z).pow(2);
            if r2 == 2 && q != skip && lat.is_b(q).unwrap() {
                n += 1;
            }
        }
        n
    }

    #[test]
    fn constructed_configuration_acceptance() {
        // B at i = (1,1,0) with eight B neighbours moving to f = (2,2,0)
        // where it would have five.
        let mut lat = OccupancyLattice::empty(4).unwrap();
        let i = SiteCoord::new3(1, 1, 0);
        let f = SiteCoord::new3(2, 2, 0);
        lat.set(i, true).unwrap();
        let ni = fcc_neighbors(i, 4).unwrap();
        let nf = fcc_neighbors(f, 4).unwrap();
        let mut placed_i = 0;
        for &q in ni.iter().filter(|&&q| q != f && !nf.contains(&q)) {
            if placed_i < 8 {
                lat.set(q, true).unwrap();
                placed_i += 1;
            }
        }
        for &q in ni.iter().filter(|&&q| q != f && nf.contains(&q) && q != i) {
            if placed_i < 8 {
                lat.set(q, true).unwrap();
                placed_i += 1;
            }
        }
        let ctx = ExchangeContext::new(&lat, i, f).unwrap();
        assert_eq!(ctx.n_i, brute_count(&lat, i, f));
        assert_eq!(ctx.n_i, 8);
        // Add B neighbours of f until it counts five.
        for &q in nf.iter().filter(|&&q| q != i && !ni.contains(&q)) {
            if ExchangeContext::new(&lat, i, f).unwrap().n_f >= 5 {
                break;
            }
            if !lat.is_b(q).unwrap() {
                lat.set(q, true).unwrap();
            }
        }
        let ctx = ExchangeContext::new(&lat, i, f).unwrap();
        assert_eq!(ctx.n_f, brute_count(&lat, f, i));
        assert_eq!(ctx.n_i, brute_count(&lat, i, f));
        assert_eq!((ctx.n_i, ctx.n_f), (8, 5));
        let p = params(1.5, ActiveMode::BOnly);
        assert_eq!(ctx.probability(&p), (-4.5f64).exp());

        // The kernel applies the same probability: compare the acceptance
        // rate over many attempts that pick f.
        let kernel = KmcKernel::new(4, p).unwrap();
        let k_f = FCC_OFFSETS.iter().position(|&d| i.offset(d, 3) == f).unwrap();
        let mut rng = RngStream::new(RngKind::Lcg64, 77);
        let (mut tries, mut acc) = (0u64, 0u64);
        while tries < 200_000 {
            let mut words = lat.words().to_vec();
            let mut probe = rng.clone();
            if probe.below(12) as usize != k_f {
                rng.below(12);
                continue;
            }
            tries += 1;
            let mut bits = PlainBits(&mut words);
            if kernel.attempt(&mut bits, i, &mut rng, &mut crate::decomposition::NoLog) {
                acc += 1;
            }
        }
        let expect = (-4.5f64).exp();
        let sigma = (expect * (1.0 - expect) / tries as f64).sqrt();
        assert!(((acc as f64 / tries as f64) - expect).abs() < 5.0 * sigma);
    }

    #[test]
    fn open_bonds_extremes() {
        let mut lat = OccupancyLattice::empty(8).unwrap();
        assert_eq!(open_bonds_per_particle(&lat), Err(Error::NoParticles));
        lat.set(SiteCoord::new3(3, 1, 0), true).unwrap();
        assert_eq!(open_bonds_per_particle(&lat).unwrap(), 12.0);
        let mut rng = RngStream::new(RngKind::Lcg64, 1);
        let full = OccupancyLattice::random_alloy(8, 1.0, &mut rng).unwrap();
        assert_eq!(open_bonds_per_particle(&full).unwrap(), 0.0);
        let mix = OccupancyLattice::random_alloy(32, 0.325, &mut rng).unwrap();
        let ob = open_bonds_per_particle(&mix).unwrap();
        assert!((ob - 8.1).abs() < 0.15, "{ob}");
    }

    #[test]
    fn empty_lattice_never_exchanges() {
        let mut lat = OccupancyLattice::empty(8).unwrap();
        let mut rng = RngStream::new(RngKind::Lcg64, 2);
        for active in [ActiveMode::BOnly, ActiveMode::Both] {
            let c = kmc_mcs_sequential(&mut lat, &params(1.5, active), &mut rng).unwrap();
            assert_eq!(c.successes, 0);
            assert_eq!(c.attempts, 256);
        }
    }

    #[test]
    fn success_fraction_drops_during_quench() {
        let p = params(1.5, ActiveMode::BOnly);
        let mut rng = RngStream::new(RngKind::Lcg64, 2024);
        let mut lat = OccupancyLattice::random_alloy(16, 0.325, &mut rng).unwrap();
        let first = kmc_mcs_sequential(&mut lat, &p, &mut rng).unwrap();
        let mut last = first;
        for _ in 1..500 {
            last = kmc_mcs_sequential(&mut lat, &p, &mut rng).unwrap();
        }
        assert!(last.successes < first.successes, "{first:?} -> {last:?}");
    }

    #[test]
    fn sampler_hits_only_valid_sites_uniformly() {
        let k = KmcKernel::new(8, params(1.0, ActiveMode::BOnly)).unwrap();
        let mut rng = RngStream::new(RngKind::Lcg64, 9);
        let mut hits = vec![0u32; 512];
        for _ in 0..256 * 200 {
            let p = k.sample_site(&mut rng);
            assert!(fcc_is_valid(p));
            hits[k.site_index(p)] += 1;
        }
        let valid: Vec<_> = hits.iter().enumerate().filter(|(i, _)| {
            let (x, y, z) = (i & 7, (i >> 3) & 7, i >> 6);
            (x ^ y ^ z) & 1 == 0
        }).map(|(_, &h)| h).collect();
        assert_eq!(valid.len(), 256);
        assert!(valid.iter().all(|&h| h > 100 && h < 300));
    }

    #[test]
    fn box_counts_match_enumeration() {
        let k = KmcKernel::new(8, params(1.0, ActiveMode::BOnly)).unwrap();
        for origin in [[0, 0, 0], [1, 0, 0], [7, 6, 5], [3, 3, 3]] {
            for extent in [[3, 3, 3], [2, 3, 5], [8, 8, 8], [5, 1, 1], [1, 1, 1]] {
                let b = SiteBox { origin, extent };
                let mut n = 0;
                for idx in 0..b.volume() {
                    n += fcc_is_valid(b.decode(idx, 7)) as u64;
                }
                assert_eq!(k.count_in_box(&b), n, "{b:?}");
                if n > 0 {
                    let mut rng = RngStream::new(RngKind::Lcg32, 4);
                    for _ in 0..50 {
                        let p = k.sample_in_box(&b, &mut rng);
                        assert!(fcc_is_valid(p) && b.contains(p, 8));
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn detailed_balance(a in 0u32..=12, b in 0u32..=12, eps in 0.0f64..5.0) {
            let p = params(eps, ActiveMode::BOnly);
            let ratio = metropolis_prob(a, b, &p) / metropolis_prob(b, a, &p);
            let expect = (-(a as f64 - b as f64) * eps).exp();
            prop_assert!((ratio / expect - 1.0).abs() < 1e-12);
        }

        #[test]
        fn modes_agree_on_every_pair(seed in any::<u64>(), eps in 0.0f64..3.0) {
            // For a B/A pair, B_ONLY evaluates the hop from the B side and
            // BOTH from whichever side was drawn; both must give the same
            // counts and probability.
            let mut rng = RngStream::new(RngKind::Lcg64, seed);
            let lat = OccupancyLattice::random_alloy(8, 0.4, &mut rng).unwrap();
            let p = params(eps, ActiveMode::Both);
            for site in lat.valid_sites().take(64) {
                for f in fcc_neighbors(site, 8).unwrap() {
                    let (sb, fb) = (lat.is_b(site).unwrap(), lat.is_b(f).unwrap());
                    if sb == fb {
                        continue;
                    }
                    let (bp, ap) = if sb { (site, f) } else { (f, site) };
                    let ctx = ExchangeContext::new(&lat, bp, ap).unwrap();
                    let kernel = KmcKernel::new(8, p).unwrap();
                    let words = lat.words().to_vec();
                    let bits = PlainBits(&mut words.clone());
                    let n_from = kernel.b_neighbors(&bits, bp);
                    let n_to = kernel.b_neighbors(&bits, ap) - 1;
                    prop_assert_eq!((n_from, n_to), (ctx.n_i, ctx.n_f));
                }
            }
        }

        #[test]
        fn species_conserved(seed in any::<u64>(), both in any::<bool>(), mcs in 1usize..4) {
            let mode = if both { ActiveMode::Both } else { ActiveMode::BOnly };
            let mut rng = RngStream::new(RngKind::Lcg64, seed);
            let mut lat = OccupancyLattice::random_alloy(8, 0.325, &mut rng).unwrap();
            let n = lat.count_b();
            for _ in 0..mcs {
                kmc_mcs_sequential(&mut lat, &params(1.5, mode), &mut rng).unwrap();
            }
            prop_assert_eq!(lat.count_b(), n);
            prop_assert!(lat.odd_sites_clear());
        }
    }
}
