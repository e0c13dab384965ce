//! Update schedulers.
//!
//! Every scheduler performs exactly one Monte Carlo step per call, that is
//! `Kernel::volume()` update attempts, and returns the attempt and success
//! counts. Parallel schedulers split the lattice into domains whose update
//! footprints cannot overlap inside one barrier interval:
//!
//! * [`run_dead_border_sweep`]: cells updated concurrently, a strip of each
//!   cell left frozen; the cell origin moves at random between sweeps.
//! * [`run_double_tiling_round`]: tiles bisected in every direction into
//!   `2^d` sets, one set active at a time, either single-hit or full update.
//! * [`run_two_layer`]: an outer decomposition whose active cells are
//!   distributed over the workers with an inner single-hit double tiling.
//! * [`run_cache_blocked_sequential`]: single threaded, randomly ordered
//!   blocks small enough to stay cache resident.
//!
//! All scheduling decisions (origins, set sequences, cell order) come from a
//! dedicated schedule stream, so they do not depend on the worker count.

mod cache_block;
mod dead_border;
mod double_tiling;
mod engine;
mod schedule;
mod two_layer;

use std::collections::HashMap;
use std::ops::AddAssign;

pub use cache_block::{cache_budget_from_env, run_cache_blocked_sequential, CacheBlockPlan};
pub use dead_border::{run_dead_border_sweep, DeadBorderPlan};
pub use double_tiling::{run_double_tiling_round, DoubleTilingPlan};
pub use schedule::{
    schedule_ahead_of_time, schedule_naive, utilization_fraction, Activation, BlockSchedule,
};
pub use two_layer::{run_two_layer, OuterPlan, TwoLayerPlan};

use crate::lattice::{BitAccess, PlainBits, SiteCoord};
use crate::rng::{RngStream, WordSource};

/// Attempt bookkeeping of one or more sweeps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub attempts: u64,
    pub successes: u64,
}

impl AddAssign for Counters {
    fn add_assign(&mut self, rhs: Self) {
        self.attempts += rhs.attempts;
        self.successes += rhs.successes;
    }
}

/// Per-axis offsets, relative to the update anchor, that an attempt may
/// read and write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Footprint {
    pub read: (isize, isize),
    pub write: (isize, isize),
}

impl Footprint {
    /// Minimum separation, in anchor rows, between concurrently updated
    /// anchor ranges so that no write of one can meet a read or write of
    /// the other.
    pub fn interaction_range(&self) -> usize {
        (self.write.1 - self.read.0).max(self.read.1 - self.write.0) as usize
    }
}

/// A periodic box of sites: `origin + [0, extent)` on every axis, wrapped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiteBox {
    pub origin: [usize; 3],
    pub extent: [usize; 3],
}

impl SiteBox {
    pub fn volume(&self) -> u64 {
        self.extent.iter().map(|&e| e as u64).product()
    }

    /// Decode a box-local linear index (x fastest) into global coordinates.
    #[inline]
    pub fn decode(&self, idx: u64, mask: usize) -> SiteCoord {
        let [ex, ey, _] = self.extent;
        let (x, rest) = div_rem(idx, ex);
        let (y, z) = div_rem(rest, ey);
        SiteCoord::new3(
            (self.origin[0] + x) & mask,
            (self.origin[1] + y) & mask,
            (self.origin[2] + z as usize) & mask,
        )
    }

    pub fn contains(&self, p: SiteCoord, edge: usize) -> bool {
        let mask = edge - 1;
        p.as_array()
            .iter()
            .zip(self.origin.iter().zip(self.extent.iter()))
            .all(|(&c, (&o, &e))| (c.wrapping_sub(o) & mask) < e)
    }
}

#[inline(always)]
pub(crate) fn div_rem(a: u64, d: usize) -> (usize, u64) {
    if d.is_power_of_two() {
        ((a & (d as u64 - 1)) as usize, a >> d.trailing_zeros())
    } else {
        ((a % d as u64) as usize, a / d as u64)
    }
}

/// Receives the storage sites written by an accepted update.
pub trait WriteSink {
    fn record(&mut self, site: usize);
}

/// Sink that discards everything; compiles away.
pub struct NoLog;

impl WriteSink for NoLog {
    #[inline(always)]
    fn record(&mut self, _site: usize) {}
}

/// A local update rule together with the lattice geometry it runs on.
pub trait Kernel: Sync {
    /// Number of lattice dimensions (2 or 3).
    fn dims(&self) -> usize;
    /// Lattice edge `L`.
    fn edge(&self) -> usize;
    /// Update sites per Monte Carlo step.
    fn volume(&self) -> u64;
    fn footprint(&self) -> Footprint;
    /// Bytes of lattice storage covered by a cube (or square) of edge `e`.
    fn block_bytes(&self, e: usize) -> usize;
    /// Number of update sites inside a box.
    fn count_in_box(&self, b: &SiteBox) -> u64;
    /// Uniform update site inside a box holding at least one.
    fn sample_in_box<R: WordSource>(&self, b: &SiteBox, rng: &mut R) -> SiteCoord;
    /// Uniform update site over the whole lattice.
    fn sample_site<R: WordSource>(&self, rng: &mut R) -> SiteCoord;
    /// Storage index identifying a site in write logs.
    fn site_index(&self, p: SiteCoord) -> usize;
    /// One update attempt anchored at `site`; `true` if the state changed.
    fn attempt<B: BitAccess, S: WriteSink>(
        &self,
        bits: &mut B,
        site: SiteCoord,
        rng: &mut RngStream,
        sink: &mut S,
    ) -> bool;

    /// Box covering the whole lattice.
    fn whole(&self) -> SiteBox {
        let l = self.edge();
        let mut extent = [1; 3];
        extent[..self.dims()].fill(l);
        SiteBox {
            origin: [0; 3],
            extent,
        }
    }
}

/// One write by one worker inside one barrier interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WriteEvent {
    pub interval: u64,
    pub worker: u32,
    /// Anchor of the update that performed the write.
    pub anchor: usize,
    pub site: usize,
}

/// Instrumented write log shared by successive scheduler calls.
#[derive(Debug, Default)]
pub struct WriteLog {
    pub events: Vec<WriteEvent>,
    next_interval: u64,
}

impl WriteLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of barrier intervals seen so far.
    pub fn intervals(&self) -> u64 {
        self.next_interval
    }

    fn reserve_intervals(&mut self, n: u64) -> u64 {
        let base = self.next_interval;
        self.next_interval += n;
        base
    }

    /// `(interval, site)` pairs written by more than one worker.
    pub fn conflicts(&self) -> Vec<(u64, usize)> {
        let mut owner: HashMap<(u64, usize), u32> = HashMap::new();
        let mut bad = Vec::new();
        for e in &self.events {
            match owner.get(&(e.interval, e.site)) {
                Some(&w) if w != e.worker => bad.push((e.interval, e.site)),
                Some(_) => {}
                None => {
                    owner.insert((e.interval, e.site), e.worker);
                }
            }
        }
        bad.sort_unstable();
        bad.dedup();
        bad
    }
}

/// Plain random-site sequential sweep: `volume()` attempts at uniformly
/// drawn sites. The reference dynamics for every other scheduler.
pub fn run_sequential<K: Kernel>(kernel: &K, words: &mut [u64], rng: &mut RngStream) -> Counters {
    let mut bits = PlainBits(words);
    let n = kernel.volume();
    let mut successes = 0;
    for _ in 0..n {
        let site = kernel.sample_site(rng);
        successes += kernel.attempt(&mut bits, site, rng, &mut NoLog) as u64;
    }
    Counters {
        attempts: n,
        successes,
    }
}

/// In-place Fisher-Yates shuffle driven by a word source.
pub(crate) fn shuffle<T, R: WordSource>(v: &mut [T], rng: &mut R) {
    for i in (1..v.len()).rev() {
        let j = rng.below(i as u32 + 1) as usize;
        v.swap(i, j);
    }
}
