use super::engine::{execute, Hits, Layout, Round};
use super::{Counters, Kernel, SiteBox, WriteLog};
use crate::error::{Error, Result};
use crate::lattice::SiteCoord;
use crate::rng::{RngStream, WordSource};

/// Cells of edge `cell_edge` along the first `dims` axes, each updated by
/// one worker with its last `border` anchor rows left out. Undecomposed axes
/// span the whole lattice, so `dims = 1` gives slabs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeadBorderPlan {
    pub dims: usize,
    pub cell_edge: usize,
    pub border: usize,
    /// Offset of the cell grid, redrawn every `move_period` sweeps.
    pub origin: [usize; 3],
    pub move_period: u64,
    sweeps_since_move: u64,
}

impl DeadBorderPlan {
    pub fn new(dims: usize, cell_edge: usize, border: usize) -> Self {
        Self {
            dims,
            cell_edge,
            border,
            origin: [0; 3],
            move_period: 1,
            sweeps_since_move: u64::MAX,
        }
    }

    /// Keep the grid at `origin` for good.
    pub fn with_fixed_origin(mut self, origin: [usize; 3]) -> Self {
        self.origin = origin;
        self.move_period = u64::MAX;
        self.sweeps_since_move = 0;
        self
    }

    pub fn cells_per_dim(&self, edge: usize) -> usize {
        edge / self.cell_edge
    }

    fn degenerate(&self, edge: usize) -> bool {
        self.cells_per_dim(edge) == 1 && self.border == 0
    }

    pub fn validate<K: Kernel>(&self, kernel: &K) -> Result<()> {
        let l = kernel.edge();
        if self.dims == 0 || self.dims > kernel.dims() {
            return Err(Error::Geometry(format!(
                "dead border over {} axes on a {}d lattice",
                self.dims,
                kernel.dims()
            )));
        }
        if self.cell_edge == 0 || self.cell_edge > l || l % self.cell_edge != 0 {
            return Err(Error::Geometry(format!(
                "cell edge {} does not divide lattice edge {l}",
                self.cell_edge
            )));
        }
        if 2 * self.border >= self.cell_edge {
            return Err(Error::Geometry(format!(
                "border {} leaves no interior in a cell of edge {}",
                self.border, self.cell_edge
            )));
        }
        let range = kernel.footprint().interaction_range();
        if self.cells_per_dim(l) > 1 && self.border < range {
            return Err(Error::Geometry(format!(
                "border {} is narrower than the kernel interaction range {range}",
                self.border
            )));
        }
        if self.move_period == 0 {
            return Err(Error::Geometry("move period must be positive".into()));
        }
        Ok(())
    }

    /// Full cell boxes and their active (non-border) parts.
    pub fn cells<K: Kernel>(&self, kernel: &K) -> Vec<(SiteBox, SiteBox)> {
        let l = kernel.edge();
        let n = self.cells_per_dim(l);
        let mut counts = [1usize; 3];
        counts[..self.dims].fill(n);
        let whole = kernel.whole();
        let interior = if self.degenerate(l) {
            self.cell_edge
        } else {
            self.cell_edge - self.border
        };
        let mut out = Vec::with_capacity(counts.iter().product());
        for cz in 0..counts[2] {
            for cy in 0..counts[1] {
                for cx in 0..counts[0] {
                    let idx = [cx, cy, cz];
                    let mut cell = whole;
                    let mut active = whole;
                    for d in 0..self.dims {
                        let o = (self.origin[d] + idx[d] * self.cell_edge) % l;
                        cell.origin[d] = o;
                        cell.extent[d] = self.cell_edge;
                        active.origin[d] = o;
                        active.extent[d] = interior;
                    }
                    out.push((cell, active));
                }
            }
        }
        out
    }

    /// `true` if `p` lies in the frozen strip of the current grid.
    pub fn is_border(&self, p: SiteCoord, edge: usize) -> bool {
        if self.degenerate(edge) {
            return false;
        }
        let a = p.as_array();
        (0..self.dims).any(|d| {
            let local = (a[d] + edge - self.origin[d] % edge) % self.cell_edge;
            local >= self.cell_edge - self.border
        })
    }

    /// Redraw the origin if the move period elapsed.
    pub(crate) fn advance(&mut self, edge: usize, schedule: &mut RngStream) {
        if self.sweeps_since_move >= self.move_period {
            for d in 0..self.dims {
                self.origin[d] = schedule.below(edge as u32) as usize;
            }
            self.sweeps_since_move = 0;
        }
        self.sweeps_since_move += 1;
    }
}

/// One dead-border sweep: every cell receives as many attempts as it has
/// sites, all drawn from its active part, with cells spread round-robin
/// over the workers. A single barrier interval.
pub fn run_dead_border_sweep<K: Kernel>(
    kernel: &K,
    words: &mut [u64],
    plan: &mut DeadBorderPlan,
    streams: &mut [RngStream],
    schedule: &mut RngStream,
    log: Option<&mut WriteLog>,
) -> Result<Counters> {
    plan.validate(kernel)?;
    plan.advance(kernel.edge(), schedule);
    let cells = plan.cells(kernel);
    let cell_volume = kernel.count_in_box(&cells[0].0);
    let layout = Layout {
        sets: vec![cells.iter().map(|c| c.1).collect()],
        active: None,
    };
    let rounds = [Round {
        layout: 0,
        set: 0,
        count: cells.len(),
        hits: Hits::Fixed(cell_volume),
    }];
    Ok(execute(kernel, words, &[layout], &rounds, streams, log))
}
