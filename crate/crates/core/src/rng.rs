//! Per-worker pseudorandom streams.
//!
//! Three generator families are provided:
//!
//! * `Lcg32`: `x <- 1664525 x + 1013904223 (mod 2^32)`, the full word is
//!   returned.
//! * `Lcg64`: `x <- 6364136223846793005 x + 1442695040888963407 (mod 2^64)`,
//!   the high 32 bits are returned. Supports O(log n) skip-ahead, which is
//!   how independent worker streams are carved out of one sequence.
//! * `TinyMt`: the 127-bit state TinyMT32 generator. Each stream gets its
//!   own `(mat1, mat2, tmat)` parameter set; stream 0 uses the reference
//!   set, the others are searched deterministically and admitted only after
//!   their characteristic polynomial is shown to be primitive.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LCG32_MUL: u32 = 1_664_525;
pub const LCG32_INC: u32 = 1_013_904_223;
pub const LCG64_MUL: u64 = 6_364_136_223_846_793_005;
pub const LCG64_INC: u64 = 1_442_695_040_888_963_407;

/// Default distance between consecutive skip-ahead streams.
pub const DEFAULT_STRIDE: u64 = 1 << 40;

/// Additive offset between LCG32 stream seeds.
const LCG32_STREAM_OFFSET: u32 = 0x9E37_79B9;

/// Source of uniformly distributed 32-bit words.
pub trait WordSource {
    fn next_word(&mut self) -> u32;

    /// Uniform in `[0, 1)` with 32-bit resolution.
    #[inline]
    fn uniform(&mut self) -> f64 {
        self.next_word() as f64 * (1.0 / 4_294_967_296.0)
    }

    /// Uniform integer in `[0, n)`. Uses the high bits of the word, so weak
    /// low-order LCG bits never decide the result. Unbiased (Lemire).
    #[inline]
    fn below(&mut self, n: u32) -> u32 {
        debug_assert!(n > 0);
        let mut m = self.next_word() as u64 * n as u64;
        if (m as u32) < n {
            let threshold = n.wrapping_neg() % n;
            while (m as u32) < threshold {
                m = self.next_word() as u64 * n as u64;
            }
        }
        (m >> 32) as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RngKind {
    Lcg32,
    Lcg64,
    TinyMt,
}

impl RngKind {
    pub fn name(self) -> &'static str {
        match self {
            RngKind::Lcg32 => "lcg32",
            RngKind::Lcg64 => "lcg64",
            RngKind::TinyMt => "tinymt",
        }
    }
}

impl fmt::Display for RngKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RngKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lcg32" => Ok(RngKind::Lcg32),
            "lcg64" => Ok(RngKind::Lcg64),
            "tinymt" => Ok(RngKind::TinyMt),
            _ => Err(Error::Param(format!("unknown generator `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lcg32 {
    pub state: u32,
}

impl WordSource for Lcg32 {
    #[inline]
    fn next_word(&mut self) -> u32 {
        self.state = self.state.wrapping_mul(LCG32_MUL).wrapping_add(LCG32_INC);
        self.state
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lcg64 {
    pub state: u64,
}

impl Lcg64 {
    /// Affine map `(mul, inc)` equal to `n` applications of one step,
    /// built by repeated squaring without any division.
    pub fn jump_coefficients(mut n: u64) -> (u64, u64) {
        let (mut acc_mul, mut acc_inc) = (1u64, 0u64);
        let (mut cur_mul, mut cur_inc) = (LCG64_MUL, LCG64_INC);
        while n > 0 {
            if n & 1 == 1 {
                acc_mul = acc_mul.wrapping_mul(cur_mul);
                acc_inc = acc_inc.wrapping_mul(cur_mul).wrapping_add(cur_inc);
            }
            cur_inc = cur_mul.wrapping_add(1).wrapping_mul(cur_inc);
            cur_mul = cur_mul.wrapping_mul(cur_mul);
            n >>= 1;
        }
        (acc_mul, acc_inc)
    }

    pub fn skip(&mut self, n: u64) {
        let (m, c) = Self::jump_coefficients(n);
        self.state = m.wrapping_mul(self.state).wrapping_add(c);
    }
}

impl WordSource for Lcg64 {
    #[inline]
    fn next_word(&mut self) -> u32 {
        self.state = self.state.wrapping_mul(LCG64_MUL).wrapping_add(LCG64_INC);
        (self.state >> 32) as u32
    }
}

/// TinyMT32 parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TinyMtParams {
    pub mat1: u32,
    pub mat2: u32,
    pub tmat: u32,
}

impl TinyMtParams {
    /// Reference parameter set of the TinyMT32 distribution.
    pub const REFERENCE: TinyMtParams = TinyMtParams {
        mat1: 0x8f70_11ee,
        mat2: 0xfc78_ff1f,
        tmat: 0x3793_fdff,
    };

    /// Parameter set for stream `id`. Id 0 is the reference set; other ids
    /// run a deterministic search seeded by the id and return the first
    /// candidate with a certified period of `2^127 - 1`.
    pub fn for_stream(id: u32) -> Self {
        if id == 0 {
            return Self::REFERENCE;
        }
        let mut sm = SplitMix64(0x7469_6e79_6d74_0000 ^ ((id as u64) << 20));
        loop {
            let w = sm.next_u64();
            let t = sm.next_u64();
            let cand = TinyMtParams {
                mat1: w as u32,
                mat2: (w >> 32) as u32,
                // Any tempering matrix keeps the period; force a nonzero one.
                tmat: (t as u32) | 1,
            };
            if cand.has_full_period() {
                return cand;
            }
        }
    }

    /// Certify the period `2^127 - 1` of the state recurrence.
    ///
    /// The minimal polynomial of one output bit is recovered with
    /// Berlekamp-Massey; since 127 is prime and `2^127 - 1` is a Mersenne
    /// prime, a degree-127 irreducible polynomial is primitive. Irreducibility
    /// is Rabin's test for prime degree: `x^(2^127) = x mod p` and `p` has no
    /// root in GF(2).
    pub fn has_full_period(&self) -> bool {
        let mut g = TinyMt32 {
            s: [1, 0, 0, 0],
            params: *self,
        };
        let bits: Vec<u8> = (0..2 * 127)
            .map(|_| {
                g.next_state();
                (g.s[3] & 1) as u8
            })
            .collect();
        let (poly, degree) = berlekamp_massey(&bits);
        if degree != 127 {
            return false;
        }
        // Characteristic polynomial is the reciprocal of the connection
        // polynomial: bit k holds the coefficient of x^k.
        let mut p: u128 = 0;
        for (k, &c) in poly.iter().enumerate().take(128) {
            if c == 1 {
                p |= 1u128 << (127 - k);
            }
        }
        if p & 1 == 0 || p.count_ones() % 2 == 0 {
            return false;
        }
        let mut r: u128 = 2;
        for _ in 0..127 {
            r = gf2_mulmod(r, r, p);
        }
        r == 2
    }
}

/// Multiply two polynomials of degree < 127 modulo `p` (degree 127).
fn gf2_mulmod(a: u128, b: u128, p: u128) -> u128 {
    let mut r = 0u128;
    for i in (0..127).rev() {
        r <<= 1;
        if (r >> 127) & 1 == 1 {
            r ^= p;
        }
        if (b >> i) & 1 == 1 {
            r ^= a;
        }
    }
    r
}

/// Shortest LFSR generating `s` over GF(2). Returns the connection
/// polynomial coefficients `c[0..=len]` (with `c[0] = 1`) and its length.
fn berlekamp_massey(s: &[u8]) -> (Vec<u8>, usize) {
    let n = s.len();
    let mut c = vec![0u8; n + 1];
    let mut b = vec![0u8; n + 1];
    c[0] = 1;
    b[0] = 1;
    let mut len = 0usize;
    let mut m = 1usize;
    for i in 0..n {
        let mut d = s[i];
        for j in 1..=len {
            d ^= c[j] & s[i - j];
        }
        if d == 0 {
            m += 1;
        } else if 2 * len <= i {
            let t = c.clone();
            for j in 0..=n - m {
                c[j + m] ^= b[j];
            }
            len = i + 1 - len;
            b = t;
            m = 1;
        } else {
            for j in 0..=n - m {
                c[j + m] ^= b[j];
            }
            m += 1;
        }
    }
    c.truncate(len + 1);
    (c, len)
}

/// TinyMT32 with 127 bits of state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TinyMt32 {
    s: [u32; 4],
    params: TinyMtParams,
}

impl TinyMt32 {
    const MASK: u32 = 0x7fff_ffff;
    const SH0: u32 = 1;
    const SH1: u32 = 10;
    const SH8: u32 = 8;
    const MIN_LOOP: u32 = 8;
    const PRE_LOOP: u32 = 8;

    pub fn new(seed: u32, params: TinyMtParams) -> Self {
        let mut s = [seed, params.mat1, params.mat2, params.tmat];
        for i in 1..Self::MIN_LOOP {
            let prev = s[((i - 1) & 3) as usize];
            s[(i & 3) as usize] ^=
                i.wrapping_add(1_812_433_253u32.wrapping_mul(prev ^ (prev >> 30)));
        }
        if s[0] & Self::MASK == 0 && s[1] == 0 && s[2] == 0 && s[3] == 0 {
            s = [b'T' as u32, b'I' as u32, b'N' as u32, b'Y' as u32];
        }
        let mut g = Self { s, params };
        for _ in 0..Self::PRE_LOOP {
            g.next_state();
        }
        g
    }

    pub fn params(&self) -> TinyMtParams {
        self.params
    }

    #[inline]
    fn next_state(&mut self) {
        let s = &mut self.s;
        let mut y = s[3];
        let mut x = (s[0] & Self::MASK) ^ s[1] ^ s[2];
        x ^= x << Self::SH0;
        y ^= (y >> Self::SH0) ^ x;
        s[0] = s[1];
        s[1] = s[2];
        s[2] = x ^ (y << Self::SH1);
        s[3] = y;
        if y & 1 == 1 {
            s[1] ^= self.params.mat1;
            s[2] ^= self.params.mat2;
        }
    }

    #[inline]
    fn temper(&self) -> u32 {
        let mut t0 = self.s[3];
        let t1 = self.s[0].wrapping_add(self.s[2] >> Self::SH8);
        t0 ^= t1;
        if t1 & 1 == 1 {
            t0 ^= self.params.tmat;
        }
        t0
    }
}

impl WordSource for TinyMt32 {
    #[inline]
    fn next_word(&mut self) -> u32 {
        self.next_state();
        self.temper()
    }
}

/// SplitMix64, used only to derive seeds and parameter candidates.
#[derive(Debug, Clone, Copy)]
pub struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// Mix a seed with a purpose tag into an unrelated 64-bit seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut sm = SplitMix64(seed ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    sm.next_u64()
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Generator {
    Lcg32(Lcg32),
    Lcg64(Lcg64),
    TinyMt(TinyMt32),
}

/// One worker's random stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    gen: Generator,
    stream_id: u32,
}

impl RngStream {
    /// The seed stream (stream 0) of a generator family.
    pub fn new(kind: RngKind, seed: u64) -> Self {
        Self::stream(kind, seed, 0, DEFAULT_STRIDE)
    }

    fn stream(kind: RngKind, seed: u64, id: u32, stride: u64) -> Self {
        let gen = match kind {
            RngKind::Lcg32 => Generator::Lcg32(Lcg32 {
                state: (seed as u32).wrapping_add(id.wrapping_mul(LCG32_STREAM_OFFSET)),
            }),
            RngKind::Lcg64 => {
                let mut g = Lcg64 { state: seed };
                g.skip((id as u64).wrapping_mul(stride));
                Generator::Lcg64(g)
            }
            RngKind::TinyMt => Generator::TinyMt(TinyMt32::new(
                (seed ^ (seed >> 32)) as u32,
                TinyMtParams::for_stream(id),
            )),
        };
        Self { gen, stream_id: id }
    }

    pub fn kind(&self) -> RngKind {
        match self.gen {
            Generator::Lcg32(_) => RngKind::Lcg32,
            Generator::Lcg64(_) => RngKind::Lcg64,
            Generator::TinyMt(_) => RngKind::TinyMt,
        }
    }

    pub fn stream_id(&self) -> u32 {
        self.stream_id
    }

    /// Raw 64-bit LCG state, if this is an `Lcg64` stream.
    pub fn lcg64_state(&self) -> Option<u64> {
        match self.gen {
            Generator::Lcg64(g) => Some(g.state),
            _ => None,
        }
    }

    /// The stream advanced by `n` steps, in O(log n).
    pub fn skip_ahead(&self, n: u64) -> Result<RngStream> {
        match &self.gen {
            Generator::Lcg64(g) => {
                let mut g = *g;
                g.skip(n);
                Ok(RngStream {
                    gen: Generator::Lcg64(g),
                    stream_id: self.stream_id,
                })
            }
            _ => Err(Error::UnsupportedGenerator {
                required: RngKind::Lcg64.name(),
                actual: self.kind().name(),
            }),
        }
    }
}

impl WordSource for RngStream {
    #[inline]
    fn next_word(&mut self) -> u32 {
        match &mut self.gen {
            Generator::Lcg32(g) => g.next_word(),
            Generator::Lcg64(g) => g.next_word(),
            Generator::TinyMt(g) => g.next_word(),
        }
    }
}

/// `count` independent streams from one seed.
///
/// `Lcg64` stream `k` is the seed stream skipped by `k * stride`, so streams
/// cover disjoint windows of one period as long as no worker draws more
/// than `stride` words. `Lcg32` streams use additively offset seeds and
/// `TinyMt` streams use distinct certified parameter sets.
pub fn split_streams(kind: RngKind, seed: u64, count: usize, stride: u64) -> Vec<RngStream> {
    (0..count)
        .map(|k| RngStream::stream(kind, seed, k as u32, stride))
        .collect()
}
