use super::engine::{execute, Hits, Layout, Round};
use super::{shuffle, Counters, Kernel, SiteBox, WriteLog};
use crate::error::{Error, Result};
use crate::rng::{RngStream, WordSource};

/// Tiles of edge `tile_edge`, each bisected along every axis into `2^d`
/// domains of edge `tile_edge / 2`. Domain `s` of every tile belongs to set
/// `s`; members of one set are a full domain apart and run concurrently.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DoubleTilingPlan {
    pub tile_edge: usize,
    /// One attempt per domain per activation instead of a full update.
    pub single_hit: bool,
}

impl DoubleTilingPlan {
    pub fn new(tile_edge: usize, single_hit: bool) -> Self {
        Self {
            tile_edge,
            single_hit,
        }
    }

    pub fn domain_edge(&self) -> usize {
        self.tile_edge / 2
    }

    pub fn set_count(&self, dims: usize) -> usize {
        1 << dims
    }

    /// Attempts a domain receives per activation.
    pub fn hits_per_round<K: Kernel>(&self, kernel: &K) -> u64 {
        if self.single_hit {
            1
        } else {
            let mut b = kernel.whole();
            b.extent[..kernel.dims()].fill(self.domain_edge());
            kernel.count_in_box(&b)
        }
    }

    pub fn validate<K: Kernel>(&self, kernel: &K) -> Result<()> {
        validate_tiling(kernel, self.tile_edge, kernel.edge())
    }

    /// Domains of the whole lattice, grouped by set.
    pub fn domains<K: Kernel>(&self, kernel: &K) -> Vec<Vec<SiteBox>> {
        tile_layout(kernel.dims(), &kernel.whole(), self.tile_edge, kernel.edge()).sets
    }
}

/// `tile_edge` must be even, divide `region_edge`, and give domains at least
/// as wide as the kernel interaction range.
pub(crate) fn validate_tiling<K: Kernel>(kernel: &K, tile_edge: usize, region_edge: usize) -> Result<()> {
    if tile_edge < 2 || tile_edge % 2 != 0 {
        return Err(Error::Geometry(format!("tile edge {tile_edge} must be even")));
    }
    if tile_edge > region_edge || region_edge % tile_edge != 0 {
        return Err(Error::Geometry(format!(
            "tile edge {tile_edge} does not divide {region_edge}"
        )));
    }
    let range = kernel.footprint().interaction_range();
    if tile_edge / 2 < range {
        return Err(Error::Geometry(format!(
            "domain edge {} is below the kernel interaction range {range}",
            tile_edge / 2
        )));
    }
    Ok(())
}

/// Double tiling of `region` (tile edge dividing every decomposed extent).
pub(crate) fn tile_layout(dims: usize, region: &SiteBox, tile_edge: usize, edge: usize) -> Layout {
    let e = tile_edge / 2;
    let mut tiles = [1usize; 3];
    for d in 0..dims {
        tiles[d] = region.extent[d] / tile_edge;
    }
    let sets = (0..1usize << dims)
        .map(|set| {
            let mut doms = Vec::with_capacity(tiles.iter().product());
            for tz in 0..tiles[2] {
                for ty in 0..tiles[1] {
                    for tx in 0..tiles[0] {
                        let t = [tx, ty, tz];
                        let mut b = *region;
                        for d in 0..dims {
                            let lo = t[d] * tile_edge + ((set >> d) & 1) * e;
                            b.origin[d] = (region.origin[d] + lo) % edge;
                            b.extent[d] = e;
                        }
                        doms.push(b);
                    }
                }
            }
            doms
        })
        .collect();
    Layout { sets, active: None }
}

/// One Monte Carlo step of double tiling.
///
/// Single-hit: a set is drawn uniformly (with replacement), each of its
/// domains gets one attempt, workers meet at the barrier, repeat until the
/// step has seen `volume()` attempts. Full update: the sets run once each in
/// a random order, every domain receiving as many attempts as it has sites.
pub fn run_double_tiling_round<K: Kernel>(
    kernel: &K,
    words: &mut [u64],
    plan: &DoubleTilingPlan,
    streams: &mut [RngStream],
    schedule: &mut RngStream,
    log: Option<&mut WriteLog>,
) -> Result<Counters> {
    plan.validate(kernel)?;
    let dims = kernel.dims();
    let layout = tile_layout(dims, &kernel.whole(), plan.tile_edge, kernel.edge());
    let per_set = layout.sets[0].len();
    let n_sets = plan.set_count(dims);
    let rounds: Vec<Round> = if plan.single_hit {
        let volume = kernel.volume();
        debug_assert_eq!(volume % per_set as u64, 0);
        (0..volume / per_set as u64)
            .map(|_| Round {
                layout: 0,
                set: schedule.below(n_sets as u32) as usize,
                count: per_set,
                hits: Hits::One,
            })
            .collect()
    } else {
        let mut order: Vec<usize> = (0..n_sets).collect();
        shuffle(&mut order, schedule);
        order
            .into_iter()
            .map(|set| Round {
                layout: 0,
                set,
                count: per_set,
                hits: Hits::Volume,
            })
            .collect()
    };
    Ok(execute(kernel, words, &[layout], &rounds, streams, log))
}
