use super::{shuffle, Counters, Kernel, NoLog, SiteBox};
use crate::error::{Error, Result};
use crate::lattice::PlainBits;
use crate::rng::RngStream;

/// Environment variable overriding the cache budget, in KiB.
pub const CACHE_ENV: &str = "LF_CACHE_KB";

/// Default budget: a typical 32 KiB L1 data cache.
pub const DEFAULT_CACHE_BYTES: usize = 32 * 1024;

/// Cache budget in bytes, from `LF_CACHE_KB` if set and valid.
pub fn cache_budget_from_env() -> usize {
    std::env::var(CACHE_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&kb| kb > 0)
        .map(|kb| kb * 1024)
        .unwrap_or(DEFAULT_CACHE_BYTES)
}

/// Sequential updating in randomly ordered blocks whose storage fits in
/// half of the cache budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheBlockPlan {
    pub block_edge: usize,
    pub cache_budget: usize,
}

impl CacheBlockPlan {
    pub fn new(block_edge: usize, cache_budget: usize) -> Self {
        Self {
            block_edge,
            cache_budget,
        }
    }

    /// Largest power-of-two block edge that fits the budget.
    pub fn sized_for<K: Kernel>(kernel: &K, cache_budget: usize) -> Result<Self> {
        let mut e = kernel.edge();
        while e > 1 && kernel.block_bytes(e) > cache_budget / 2 {
            e /= 2;
        }
        let plan = Self::new(e, cache_budget);
        plan.validate(kernel)?;
        Ok(plan)
    }

    pub fn block_bytes<K: Kernel>(&self, kernel: &K) -> usize {
        kernel.block_bytes(self.block_edge)
    }

    pub fn validate<K: Kernel>(&self, kernel: &K) -> Result<()> {
        let l = kernel.edge();
        if self.block_edge == 0 || self.block_edge > l || l % self.block_edge != 0 {
            return Err(Error::Geometry(format!(
                "block edge {} does not divide lattice edge {l}",
                self.block_edge
            )));
        }
        if kernel.count_in_box(&self.blocks(kernel)[0]) == 0 {
            return Err(Error::Geometry("blocks hold no update sites".into()));
        }
        let bytes = self.block_bytes(kernel);
        if bytes > self.cache_budget / 2 {
            return Err(Error::Geometry(format!(
                "block of {bytes} bytes exceeds half the cache budget of {} bytes",
                self.cache_budget
            )));
        }
        Ok(())
    }

    pub fn blocks<K: Kernel>(&self, kernel: &K) -> Vec<SiteBox> {
        let dims = kernel.dims();
        let n = kernel.edge() / self.block_edge;
        let mut counts = [1usize; 3];
        counts[..dims].fill(n);
        let mut out = Vec::with_capacity(counts.iter().product());
        for bz in 0..counts[2] {
            for by in 0..counts[1] {
                for bx in 0..counts[0] {
                    let idx = [bx, by, bz];
                    let mut b = kernel.whole();
                    for d in 0..dims {
                        b.origin[d] = idx[d] * self.block_edge;
                        b.extent[d] = self.block_edge;
                    }
                    out.push(b);
                }
            }
        }
        out
    }
}

/// One Monte Carlo step: blocks visited once each in random order, every
/// block receiving as many random attempts as it has sites.
pub fn run_cache_blocked_sequential<K: Kernel>(
    kernel: &K,
    words: &mut [u64],
    plan: &CacheBlockPlan,
    rng: &mut RngStream,
) -> Result<Counters> {
    plan.validate(kernel)?;
    let mut blocks = plan.blocks(kernel);
    shuffle(&mut blocks, rng);
    let mut bits = PlainBits(words);
    let mut c = Counters::default();
    for b in &blocks {
        let n = kernel.count_in_box(b);
        for _ in 0..n {
            let site = kernel.sample_in_box(b, rng);
            c.successes += kernel.attempt(&mut bits, site, rng, &mut NoLog) as u64;
        }
        c.attempts += n;
    }
    Ok(c)
}
