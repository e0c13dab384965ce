//! Octahedron model of 2+1 dimensional KPZ growth.
//!
//! An update anchored at `(i, j)` looks at the slopes
//! `sx(i, j), sx(i+1, j)` and `sy(i, j), sy(i, j+1)`. The pattern
//! `(-1, +1; -1, +1)` is a local minimum of `h(i, j)`; flipping all four
//! slopes raises it by 2 (deposition, probability `p`). The reverse pattern
//! is a local maximum and is lowered with probability `q`.

use serde::{Deserialize, Serialize};

use crate::decomposition::{Counters, Footprint, Kernel, SiteBox, WriteSink};
use crate::error::{Error, Result};
use crate::lattice::{check_edge, BitAccess, PlainBits, SiteCoord, SlopeField};
use crate::rng::{RngStream, WordSource};

/// Largest edge whose site count still fits the 32-bit sampler.
pub const MAX_EDGE: usize = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KpzParams {
    pub p: f64,
    pub q: f64,
}

impl KpzParams {
    /// `p = q = 0` is accepted and freezes the surface.
    pub fn new(p: f64, q: f64) -> Result<Self> {
        for (name, v) in [("p", p), ("q", q)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Param(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(Self { p, q })
    }

    /// `2p / (p + q) - 1`; undefined when both rates vanish.
    pub fn lambda_eff(&self) -> Option<f64> {
        let s = self.p + self.q;
        (s > 0.0).then(|| 2.0 * self.p / s - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KpzOutcome {
    Deposited,
    Detached,
    Rejected,
}

/// Bit positions of the four stencil slopes of anchor `(i, j)`.
#[inline(always)]
fn stencil(shift: u32, mask: usize, plane: usize, i: usize, j: usize) -> [usize; 4] {
    let i1 = (i + 1) & mask;
    let j1 = (j + 1) & mask;
    let row = j << shift;
    [row | i, row | i1, plane + (row | i), plane + ((j1 << shift) | i)]
}

/// Pattern of the stencil: `Some(true)` for a local minimum, `Some(false)`
/// for a local maximum.
#[inline(always)]
fn pattern<B: BitAccess>(bits: &B, s: &[usize; 4]) -> Option<bool> {
    let a = bits.get(s[0]);
    let b = bits.get(s[1]);
    let c = bits.get(s[2]);
    let d = bits.get(s[3]);
    if !a && b && !c && d {
        Some(true)
    } else if a && !b && c && !d {
        Some(false)
    } else {
        None
    }
}

/// One attempt at `site` with a supplied uniform `r` in `[0, 1)`.
pub fn kpz_attempt(field: &mut SlopeField, site: SiteCoord, params: &KpzParams, r: f64) -> KpzOutcome {
    let l = field.edge();
    let (shift, plane) = (field.shift(), field.plane_bits());
    let s = stencil(shift, l - 1, plane, site.x & (l - 1), site.y & (l - 1));
    let mut bits = PlainBits(field.words_mut());
    let outcome = match pattern(&bits, &s) {
        Some(true) if r < params.p => KpzOutcome::Deposited,
        Some(false) if r < params.q => KpzOutcome::Detached,
        _ => return KpzOutcome::Rejected,
    };
    for b in s {
        bits.flip(b);
    }
    outcome
}

/// Integer surface heights reconstructed from a slope field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeightField {
    edge: usize,
    h: Vec<i64>,
}

impl HeightField {
    /// Heights in row-major order (`i` fastest).
    pub fn new(edge: usize, h: Vec<i64>) -> Result<Self> {
        if edge == 0 || h.len() != edge * edge {
            return Err(Error::Param(format!(
                "{} heights do not fill a {edge} x {edge} grid",
                h.len()
            )));
        }
        Ok(Self { edge, h })
    }

    pub fn edge(&self) -> usize {
        self.edge
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.h[j * self.edge + i]
    }

    pub fn values(&self) -> &[i64] {
        &self.h
    }

    pub fn sum(&self) -> i64 {
        self.h.iter().sum()
    }
}

/// Heights with `h(0, 0) = 0`, integrating `sx` along row 0 and then `sy`
/// up each column. Fails if any edge of the periodic grid disagrees with
/// its slope, i.e. if the heights would depend on the path.
pub fn reconstruct_heights(field: &SlopeField) -> Result<HeightField> {
    let l = field.edge();
    let mut h = vec![0i64; l * l];
    for i in 1..l {
        h[i] = h[i - 1] + field.sx(i, 0) as i64;
    }
    for j in 1..l {
        for i in 0..l {
            h[j * l + i] = h[(j - 1) * l + i] + field.sy(i, j) as i64;
        }
    }
    for j in 0..l {
        for i in 0..l {
            let here = h[j * l + i];
            let left = h[j * l + (i + l - 1) % l];
            let below = h[((j + l - 1) % l) * l + i];
            if here - left != field.sx(i, j) as i64 || here - below != field.sy(i, j) as i64 {
                return Err(Error::Closure(format!(
                    "slopes around ({i}, {j}) do not integrate"
                )));
            }
        }
    }
    HeightField::new(l, h)
}

/// Squared interface width: the variance of the heights over all `L^2`
/// sites. Sums are exact integers.
pub fn interface_width(h: &HeightField) -> f64 {
    let n = h.h.len() as i128;
    let s: i128 = h.h.iter().map(|&v| v as i128).sum();
    let s2: i128 = h.h.iter().map(|&v| (v as i128) * (v as i128)).sum();
    (n * s2 - s * s) as f64 / (n * n) as f64
}

/// `L^2` attempts at uniformly random sites.
pub fn kpz_sweep_sequential(field: &mut SlopeField, params: &KpzParams, rng: &mut RngStream) -> Result<Counters> {
    let kernel = KpzKernel::new(field.edge(), *params)?;
    Ok(crate::decomposition::run_sequential(&kernel, field.words_mut(), rng))
}

/// The octahedron update in the form the schedulers drive.
#[derive(Debug, Clone, Copy)]
pub struct KpzKernel {
    edge: usize,
    shift: u32,
    plane: usize,
    p_thr: f64,
    q_thr: f64,
    params: KpzParams,
}

impl KpzKernel {
    pub fn new(edge: usize, params: KpzParams) -> Result<Self> {
        let shift = check_edge(edge, SlopeField::MIN_EDGE)?;
        if edge > MAX_EDGE {
            return Err(Error::BadEdge {
                edge,
                min: SlopeField::MIN_EDGE,
            });
        }
        let params = KpzParams::new(params.p, params.q)?;
        let plane_words = (edge * edge).div_ceil(64);
        Ok(Self {
            edge,
            shift,
            plane: plane_words * 64,
            // word < p * 2^32 is exactly uniform() < p
            p_thr: params.p * 4_294_967_296.0,
            q_thr: params.q * 4_294_967_296.0,
            params,
        })
    }

    pub fn for_field(field: &SlopeField, params: KpzParams) -> Result<Self> {
        Self::new(field.edge(), params)
    }

    pub fn params(&self) -> KpzParams {
        self.params
    }
}

impl Kernel for KpzKernel {
    fn dims(&self) -> usize {
        2
    }

    fn edge(&self) -> usize {
        self.edge
    }

    fn volume(&self) -> u64 {
        (self.edge * self.edge) as u64
    }

    fn footprint(&self) -> Footprint {
        Footprint {
            read: (0, 1),
            write: (0, 1),
        }
    }

    /// Both slope planes of an `e x e` block, one bit per slope.
    fn block_bytes(&self, e: usize) -> usize {
        (e * e).div_ceil(4)
    }

    fn count_in_box(&self, b: &SiteBox) -> u64 {
        (b.extent[0] * b.extent[1]) as u64
    }

    #[inline]
    fn sample_in_box<R: WordSource>(&self, b: &SiteBox, rng: &mut R) -> SiteCoord {
        let idx = rng.below((b.extent[0] * b.extent[1]) as u32) as u64;
        b.decode(idx, self.edge - 1)
    }

    #[inline]
    fn sample_site<R: WordSource>(&self, rng: &mut R) -> SiteCoord {
        let idx = rng.below((self.edge * self.edge) as u32) as usize;
        SiteCoord::new2(idx & (self.edge - 1), idx >> self.shift)
    }

    fn site_index(&self, p: SiteCoord) -> usize {
        (p.y << self.shift) | p.x
    }

    #[inline]
    fn attempt<B: BitAccess, S: WriteSink>(
        &self,
        bits: &mut B,
        site: SiteCoord,
        rng: &mut RngStream,
        sink: &mut S,
    ) -> bool {
        let mask = self.edge - 1;
        let s = stencil(self.shift, mask, self.plane, site.x, site.y);
        let thr = match pattern(bits, &s) {
            Some(true) => self.p_thr,
            Some(false) => self.q_thr,
            None => return false,
        };
        if (rng.next_word() as f64) >= thr {
            return false;
        }
        for b in s {
            bits.flip(b);
        }
        sink.record(s[0]);
        sink.record(s[1]);
        sink.record(s[3] - self.plane);
        true
    }
}
