use super::dead_border::DeadBorderPlan;
use super::double_tiling::{tile_layout, validate_tiling};
use super::engine::{execute, Hits, Layout, Round};
use super::{shuffle, Counters, Kernel, WriteLog};
use crate::error::{Error, Result};
use crate::rng::{RngStream, WordSource};

/// Device-layer decomposition of a two-layer plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OuterPlan {
    DeadBorder(DeadBorderPlan),
    /// Outer tiles of this edge, bisected into `2^d` sets of blocks.
    DoubleTiling { tile_edge: usize },
}

/// Outer cells activated one after another; inside the active cell an inner
/// single-hit double tiling spreads the attempts over all workers. With a
/// dead-border outer layer the inner tiling covers the whole cell and hits
/// landing on the frozen strip are spent without an update, so every live
/// site keeps the same attempt rate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoLayerPlan {
    pub outer: OuterPlan,
    pub inner_tile_edge: usize,
}

impl TwoLayerPlan {
    pub fn validate<K: Kernel>(&self, kernel: &K) -> Result<()> {
        let l = kernel.edge();
        match &self.outer {
            OuterPlan::DeadBorder(db) => {
                db.validate(kernel)?;
                validate_tiling(kernel, self.inner_tile_edge, db.cell_edge)?;
                if l % self.inner_tile_edge != 0 {
                    return Err(Error::Geometry(format!(
                        "inner tile edge {} does not divide {l}",
                        self.inner_tile_edge
                    )));
                }
            }
            OuterPlan::DoubleTiling { tile_edge } => {
                let t = *tile_edge;
                if t < 2 || t % 2 != 0 || t > l || l % t != 0 {
                    return Err(Error::Geometry(format!(
                        "outer tile edge {t} must be even and divide {l}"
                    )));
                }
                validate_tiling(kernel, self.inner_tile_edge, t / 2)?;
            }
        }
        Ok(())
    }
}

fn single_hit_rounds(
    layout_idx: usize,
    layout: &Layout,
    budget: u64,
    schedule: &mut RngStream,
    out: &mut Vec<Round>,
) {
    let n_sets = layout.sets.len() as u32;
    let mut remaining = budget;
    while remaining > 0 {
        let set = schedule.below(n_sets) as usize;
        let n = layout.sets[set].len() as u64;
        let count = n.min(remaining);
        out.push(Round {
            layout: layout_idx,
            set,
            count: count as usize,
            hits: Hits::One,
        });
        remaining -= count;
    }
}

/// One Monte Carlo step of the two-layer scheme. Each outer cell (or block)
/// receives as many attempts as it has sites; the inner layer hands them out
/// one per inner domain per barrier interval.
pub fn run_two_layer<K: Kernel>(
    kernel: &K,
    words: &mut [u64],
    plan: &mut TwoLayerPlan,
    streams: &mut [RngStream],
    schedule: &mut RngStream,
    log: Option<&mut WriteLog>,
) -> Result<Counters> {
    plan.validate(kernel)?;
    let l = kernel.edge();
    let dims = kernel.dims();
    let t = plan.inner_tile_edge;
    let mut layouts = Vec::new();
    let mut rounds = Vec::new();
    match &mut plan.outer {
        OuterPlan::DeadBorder(db) => {
            db.advance(l, schedule);
            let cells = db.cells(kernel);
            let budget = kernel.count_in_box(&cells[0].0);
            let mut order: Vec<usize> = (0..cells.len()).collect();
            shuffle(&mut order, schedule);
            for c in order {
                let mut layout = tile_layout(dims, &cells[c].0, t, l);
                layout.active = Some(cells[c].1);
                single_hit_rounds(layouts.len(), &layout, budget, schedule, &mut rounds);
                layouts.push(layout);
            }
        }
        OuterPlan::DoubleTiling { tile_edge } => {
            let outer = tile_layout(dims, &kernel.whole(), *tile_edge, l);
            let mut set_order: Vec<usize> = (0..outer.sets.len()).collect();
            shuffle(&mut set_order, schedule);
            for s in set_order {
                let mut blocks = outer.sets[s].clone();
                shuffle(&mut blocks, schedule);
                for block in blocks {
                    let layout = tile_layout(dims, &block, t, l);
                    let budget = kernel.count_in_box(&block);
                    single_hit_rounds(layouts.len(), &layout, budget, schedule, &mut rounds);
                    layouts.push(layout);
                }
            }
        }
    }
    Ok(execute(kernel, words, &layouts, &rounds, streams, log))
}
