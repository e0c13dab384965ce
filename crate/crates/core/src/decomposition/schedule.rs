use num_rational::Ratio;

use crate::error::{Error, Result};

/// One block update: `block` for Monte Carlo step `mcs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Activation {
    pub mcs: u64,
    pub block: usize,
}

/// Assignment of block updates to scheduling steps of `workers` slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSchedule {
    pub blocks: usize,
    pub workers: usize,
    pub mcs: u64,
    pub steps: Vec<Vec<Activation>>,
}

impl BlockSchedule {
    /// Occupied worker slots over all slots.
    pub fn busy_fraction(&self) -> Ratio<u64> {
        let used: u64 = self.steps.iter().map(|s| s.len() as u64).sum();
        Ratio::new(used, (self.steps.len() * self.workers) as u64)
    }

    /// Fraction of steps during which every worker is busy.
    pub fn full_step_fraction(&self) -> Ratio<u64> {
        let full = self.steps.iter().filter(|s| s.len() == self.workers).count();
        Ratio::new(full as u64, self.steps.len() as u64)
    }

    /// Every block appears exactly once in every step count.
    pub fn each_block_once_per_mcs(&self) -> bool {
        let mut seen = vec![0u32; self.blocks * self.mcs as usize];
        for a in self.steps.iter().flatten() {
            if a.mcs >= self.mcs || a.block >= self.blocks {
                return false;
            }
            seen[a.mcs as usize * self.blocks + a.block] += 1;
        }
        seen.iter().all(|&n| n == 1)
    }

    /// No step is short of workers, except possibly the last.
    pub fn full_except_last(&self) -> bool {
        match self.steps.split_last() {
            Some((_, rest)) => rest.iter().all(|s| s.len() == self.workers),
            None => true,
        }
    }

    /// No step runs the same block twice or mixes in updates of a step count
    /// before the previous one finished.
    pub fn is_ordered(&self) -> bool {
        let flat: Vec<_> = self.steps.iter().flatten().collect();
        flat.windows(2).all(|w| w[0].mcs <= w[1].mcs)
    }
}

fn check(blocks: usize, workers: usize) -> Result<()> {
    if workers == 0 || blocks < workers {
        return Err(Error::Geometry(format!(
            "{blocks} blocks cannot keep {workers} workers busy"
        )));
    }
    Ok(())
}

/// Each step count scheduled on its own: `ceil(m / n)` steps, the last one
/// running only `m mod n` blocks.
pub fn schedule_naive(blocks: usize, workers: usize, mcs: u64) -> Result<BlockSchedule> {
    check(blocks, workers)?;
    let mut steps = Vec::new();
    for t in 0..mcs {
        let acts: Vec<_> = (0..blocks).map(|block| Activation { mcs: t, block }).collect();
        steps.extend(acts.chunks(workers).map(<[_]>::to_vec));
    }
    Ok(BlockSchedule {
        blocks,
        workers,
        mcs,
        steps,
    })
}

/// Ahead-of-time scheduling: when `m mod n != 0` the free slots of a step
/// are filled with blocks of the following step count, so every step but
/// the final one of the run keeps all workers busy.
pub fn schedule_ahead_of_time(blocks: usize, workers: usize, mcs: u64) -> Result<BlockSchedule> {
    check(blocks, workers)?;
    let acts: Vec<Activation> = (0..mcs)
        .flat_map(|t| (0..blocks).map(move |block| Activation { mcs: t, block }))
        .collect();
    Ok(BlockSchedule {
        blocks,
        workers,
        mcs,
        steps: acts.chunks(workers).map(<[_]>::to_vec).collect(),
    })
}

/// Fraction of time a device with `n` compute units is fully used when `m`
/// domains are scheduled without ahead-of-time updates: `q / (q + 1)` with
/// `q = m / n` in integer division (valid for `m mod n > 0`).
pub fn utilization_fraction(blocks: usize, workers: usize) -> Ratio<u64> {
    let q = (blocks / workers) as u64;
    Ratio::new(q, q + 1)
}
