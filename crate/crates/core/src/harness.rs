//! Experiment runner and measurements.
//!
//! [`run_experiment`] drives one configured model and scheduler for a number
//! of independent realizations and records an observable time series for
//! each: the squared interface width for KPZ, the open bonds per particle for
//! KMC. Wall time covers the update calls only.

use std::time::Instant;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::decomposition::{
    cache_budget_from_env, run_cache_blocked_sequential, run_dead_border_sweep, run_double_tiling_round,
    run_sequential, run_two_layer, schedule_ahead_of_time, schedule_naive, utilization_fraction, CacheBlockPlan,
    Counters, DeadBorderPlan, DoubleTilingPlan, Kernel, OuterPlan, TwoLayerPlan, WriteLog,
};
use crate::error::{Error, Result};
use crate::kmc::{open_bonds_per_particle, ActiveMode, KmcKernel, KmcParams};
use crate::kpz::{interface_width, reconstruct_heights, KpzKernel, KpzParams};
use crate::lattice::{OccupancyLattice, SlopeField};
use crate::rng::{derive_seed, split_streams, RngKind, RngStream, DEFAULT_STRIDE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Kpz { p: f64, q: f64 },
    Kmc { conc: f64, eps: f64, both_active: bool },
}

impl ModelConfig {
    pub fn observable_name(&self) -> &'static str {
        match self {
            ModelConfig::Kpz { .. } => "w2",
            ModelConfig::Kmc { .. } => "open_bonds_per_particle",
        }
    }

    /// Default dead-border width: the interaction range of the kernel.
    pub fn default_border(&self) -> usize {
        match self {
            ModelConfig::Kpz { .. } => 1,
            ModelConfig::Kmc { .. } => 3,
        }
    }

    pub fn dims(&self) -> usize {
        match self {
            ModelConfig::Kpz { .. } => 2,
            ModelConfig::Kmc { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OuterConfig {
    DeadBorder { dims: usize, cell_edge: usize, border: usize },
    DoubleTiling { tile_edge: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchedulerConfig {
    Sequential,
    /// `block_edge` and `cache_bytes` default to the largest block fitting
    /// the budget from `LF_CACHE_KB`.
    CacheBlocked {
        block_edge: Option<usize>,
        cache_bytes: Option<usize>,
    },
    DeadBorder {
        dims: usize,
        cell_edge: usize,
        border: usize,
    },
    DoubleTiling {
        tile_edge: usize,
        single_hit: bool,
    },
    TwoLayer {
        outer: OuterConfig,
        inner_tile_edge: usize,
    },
}

impl SchedulerConfig {
    pub fn name(&self) -> &'static str {
        match self {
            SchedulerConfig::Sequential => "seq",
            SchedulerConfig::CacheBlocked { .. } => "cache",
            SchedulerConfig::DeadBorder { .. } => "deadborder",
            SchedulerConfig::DoubleTiling { .. } => "doubletile",
            SchedulerConfig::TwoLayer { .. } => "twolayer",
        }
    }

    pub fn is_parallel(&self) -> bool {
        !matches!(self, SchedulerConfig::Sequential | SchedulerConfig::CacheBlocked { .. })
    }
}

/// Times at which the observable is recorded. `t = 0` and the final step
/// are always included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleSchedule {
    /// `t = round(factor^k)` for `k = 0, 1, ...`.
    Exponential { factor: f64 },
    Every { interval: u64 },
    Explicit { times: Vec<u64> },
}

impl Default for SampleSchedule {
    fn default() -> Self {
        SampleSchedule::Exponential { factor: 1.1 }
    }
}

impl SampleSchedule {
    pub fn times(&self, mcs: u64) -> Result<Vec<u64>> {
        let mut t = vec![0];
        match self {
            SampleSchedule::Exponential { factor } => {
                if !(*factor > 1.0 && factor.is_finite()) {
                    return Err(Error::Param(format!("sampling factor {factor} must exceed 1")));
                }
                let mut x = 1.0f64;
                while x.round() <= mcs as f64 {
                    t.push(x.round() as u64);
                    x *= factor;
                }
            }
            SampleSchedule::Every { interval } => {
                if *interval == 0 {
                    return Err(Error::Param("sampling interval must be positive".into()));
                }
                t.extend((1..=mcs / interval).map(|k| k * interval));
            }
            SampleSchedule::Explicit { times } => {
                if let Some(&bad) = times.iter().find(|&&x| x > mcs) {
                    return Err(Error::Param(format!("sample time {bad} beyond run length {mcs}")));
                }
                t.extend(times.iter().copied());
            }
        }
        t.push(mcs);
        t.sort_unstable();
        t.dedup();
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub size: usize,
    pub scheduler: SchedulerConfig,
    pub workers: usize,
    #[serde(with = "wide_u64")]
    pub seed: u64,
    pub rng: RngKind,
    #[serde(with = "wide_u64")]
    pub stride: u64,
    pub mcs: u64,
    pub samples: SampleSchedule,
    pub realizations: u32,
}

impl ExperimentConfig {
    pub fn kpz(size: usize, p: f64, q: f64) -> Self {
        Self::with_model(ModelConfig::Kpz { p, q }, size)
    }

    pub fn kmc(size: usize, conc: f64, eps: f64) -> Self {
        Self::with_model(
            ModelConfig::Kmc {
                conc,
                eps,
                both_active: false,
            },
            size,
        )
    }

    fn with_model(model: ModelConfig, size: usize) -> Self {
        Self {
            model,
            size,
            scheduler: SchedulerConfig::Sequential,
            workers: 1,
            seed: 1,
            rng: RngKind::Lcg64,
            stride: DEFAULT_STRIDE,
            mcs: 100,
            samples: SampleSchedule::default(),
            realizations: 1,
        }
    }

    /// Full check of the configuration; no work is done.
    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::Param("at least one realization is required".into()));
        }
        if self.workers == 0 {
            return Err(Error::Param("at least one worker is required".into()));
        }
        if self.stride == 0 {
            return Err(Error::Param("stream stride must be positive".into()));
        }
        self.samples.times(self.mcs)?;
        match &self.model {
            ModelConfig::Kpz { p, q } => {
                let k = KpzKernel::new(self.size, KpzParams::new(*p, *q)?)?;
                Scheduler::new(&self.scheduler, &k)?;
            }
            ModelConfig::Kmc { conc, eps, both_active } => {
                if !(0.0..=1.0).contains(conc) {
                    return Err(Error::BadConcentration(*conc));
                }
                let k = KmcKernel::new(self.size, kmc_params(*eps, *both_active)?)?;
                Scheduler::new(&self.scheduler, &k)?;
            }
        }
        Ok(())
    }
}

/// 64-bit integers as `0x` strings, since some formats stop at `i64`.
mod wide_u64 {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:#x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let s = String::deserialize(d)?;
        match s.strip_prefix("0x") {
            Some(hex) => u64::from_str_radix(hex, 16),
            None => s.parse(),
        }
        .map_err(D::Error::custom)
    }
}

fn kmc_params(eps: f64, both_active: bool) -> Result<KmcParams> {
    let mode = if both_active { ActiveMode::Both } else { ActiveMode::BOnly };
    KmcParams::new(eps, mode)
}

/// A scheduler with its mutable plan state (the dead-border origin).
#[derive(Debug, Clone)]
pub enum Scheduler {
    Sequential,
    CacheBlocked(CacheBlockPlan),
    DeadBorder(DeadBorderPlan),
    DoubleTiling(DoubleTilingPlan),
    TwoLayer(TwoLayerPlan),
}

impl Scheduler {
    pub fn new<K: Kernel>(cfg: &SchedulerConfig, kernel: &K) -> Result<Self> {
        let s = match cfg {
            SchedulerConfig::Sequential => Scheduler::Sequential,
            SchedulerConfig::CacheBlocked { block_edge, cache_bytes } => {
                let budget = cache_bytes.unwrap_or_else(cache_budget_from_env);
                let plan = match block_edge {
                    Some(e) => CacheBlockPlan::new(*e, budget),
                    None => CacheBlockPlan::sized_for(kernel, budget)?,
                };
                plan.validate(kernel)?;
                Scheduler::CacheBlocked(plan)
            }
            SchedulerConfig::DeadBorder { dims, cell_edge, border } => {
                let plan = DeadBorderPlan::new(*dims, *cell_edge, *border);
                plan.validate(kernel)?;
                Scheduler::DeadBorder(plan)
            }
            SchedulerConfig::DoubleTiling { tile_edge, single_hit } => {
                let plan = DoubleTilingPlan::new(*tile_edge, *single_hit);
                plan.validate(kernel)?;
                Scheduler::DoubleTiling(plan)
            }
            SchedulerConfig::TwoLayer { outer, inner_tile_edge } => {
                let outer = match outer {
                    OuterConfig::DeadBorder { dims, cell_edge, border } => {
                        OuterPlan::DeadBorder(DeadBorderPlan::new(*dims, *cell_edge, *border))
                    }
                    OuterConfig::DoubleTiling { tile_edge } => OuterPlan::DoubleTiling { tile_edge: *tile_edge },
                };
                let plan = TwoLayerPlan {
                    outer,
                    inner_tile_edge: *inner_tile_edge,
                };
                plan.validate(kernel)?;
                Scheduler::TwoLayer(plan)
            }
        };
        Ok(s)
    }

    /// One Monte Carlo step. Sequential schedulers use `streams[0]` only.
    pub fn step<K: Kernel>(
        &mut self,
        kernel: &K,
        words: &mut [u64],
        streams: &mut [RngStream],
        schedule: &mut RngStream,
        log: Option<&mut WriteLog>,
    ) -> Result<Counters> {
        match self {
            Scheduler::Sequential => Ok(run_sequential(kernel, words, &mut streams[0])),
            Scheduler::CacheBlocked(plan) => run_cache_blocked_sequential(kernel, words, plan, &mut streams[0]),
            Scheduler::DeadBorder(plan) => run_dead_border_sweep(kernel, words, plan, streams, schedule, log),
            Scheduler::DoubleTiling(plan) => run_double_tiling_round(kernel, words, plan, streams, schedule, log),
            Scheduler::TwoLayer(plan) => run_two_layer(kernel, words, plan, streams, schedule, log),
        }
    }
}

/// Random streams of one realization.
#[derive(Debug, Clone)]
pub struct RealizationStreams {
    pub init: RngStream,
    pub schedule: RngStream,
    pub workers: Vec<RngStream>,
}

impl RealizationStreams {
    pub fn new(cfg: &ExperimentConfig, realization: u32) -> Self {
        let seed = derive_seed(cfg.seed, realization as u64);
        Self {
            init: RngStream::new(cfg.rng, derive_seed(seed, 1)),
            schedule: RngStream::new(cfg.rng, derive_seed(seed, 2)),
            workers: split_streams(cfg.rng, derive_seed(seed, 3), cfg.workers, cfg.stride),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub t: u64,
    pub value: f64,
    /// Cumulative since `t = 0`.
    pub attempts: u64,
    pub successes: u64,
    /// Cumulative update time.
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub realization: u32,
    pub observable: &'static str,
    pub rows: Vec<SampleRow>,
}

impl TimeSeries {
    pub fn value_at(&self, t: u64) -> Option<f64> {
        self.rows.iter().find(|r| r.t == t).map(|r| r.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub attempts: u64,
    pub wall_seconds: f64,
    pub updates_per_second: f64,
}

impl ThroughputReport {
    fn new(attempts: u64, wall_seconds: f64) -> Self {
        Self {
            attempts,
            wall_seconds,
            updates_per_second: if wall_seconds > 0.0 {
                attempts as f64 / wall_seconds
            } else {
                0.0
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub series: Vec<TimeSeries>,
    pub throughput: ThroughputReport,
}

impl ExperimentResult {
    /// Ensemble statistics of the observable at time `t`.
    pub fn ensemble_at(&self, t: u64) -> Option<EnsembleStats> {
        let v: Option<Vec<f64>> = self.series.iter().map(|s| s.value_at(t)).collect();
        EnsembleStats::from_samples(&v?)
    }
}

/// Model state that a realization evolves.
trait ModelState {
    type K: Kernel;
    fn kernel(&self) -> &Self::K;
    fn parts(&mut self) -> (&Self::K, &mut [u64]);
    fn observe(&self) -> Result<f64>;
    fn check(&self) -> Result<()>;
}

struct KpzState {
    kernel: KpzKernel,
    field: SlopeField,
}

impl ModelState for KpzState {
    type K = KpzKernel;
    fn kernel(&self) -> &KpzKernel {
        &self.kernel
    }
    fn parts(&mut self) -> (&KpzKernel, &mut [u64]) {
        (&self.kernel, self.field.words_mut())
    }
    fn observe(&self) -> Result<f64> {
        Ok(interface_width(&reconstruct_heights(&self.field)?))
    }
    fn check(&self) -> Result<()> {
        let (rows, cols) = self.field.closure_sums();
        if rows.iter().chain(&cols).any(|&s| s != 0) {
            return Err(Error::Invariant("slope closure sums changed".into()));
        }
        reconstruct_heights(&self.field).map(|_| ())
    }
}

struct KmcState {
    kernel: KmcKernel,
    lat: OccupancyLattice,
    particles: u64,
}

impl ModelState for KmcState {
    type K = KmcKernel;
    fn kernel(&self) -> &KmcKernel {
        &self.kernel
    }
    fn parts(&mut self) -> (&KmcKernel, &mut [u64]) {
        (&self.kernel, self.lat.words_mut())
    }
    fn observe(&self) -> Result<f64> {
        open_bonds_per_particle(&self.lat)
    }
    fn check(&self) -> Result<()> {
        if self.lat.count_b() != self.particles {
            return Err(Error::Invariant(format!(
                "B count changed from {} to {}",
                self.particles,
                self.lat.count_b()
            )));
        }
        if !self.lat.odd_sites_clear() {
            return Err(Error::Invariant("particle on an odd-parity site".into()));
        }
        Ok(())
    }
}

fn run_realization<M: ModelState>(
    state: &mut M,
    cfg: &ExperimentConfig,
    streams: &mut RealizationStreams,
    times: &[u64],
    realization: u32,
    observable: &'static str,
) -> Result<TimeSeries> {
    let mut sched = Scheduler::new(&cfg.scheduler, state.kernel())?;
    let volume = state.kernel().volume();
    let mut total = Counters::default();
    let mut wall = 0.0f64;
    let mut rows = Vec::with_capacity(times.len());
    let mut t = 0;
    for &target in times {
        let start = Instant::now();
        while t < target {
            let (kernel, words) = state.parts();
            total += sched.step(kernel, words, &mut streams.workers, &mut streams.schedule, None)?;
            t += 1;
        }
        wall += start.elapsed().as_secs_f64();
        if total.attempts != t * volume {
            return Err(Error::Invariant(format!(
                "{} attempts after {t} steps of {volume} sites",
                total.attempts
            )));
        }
        rows.push(SampleRow {
            t,
            value: state.observe()?,
            attempts: total.attempts,
            successes: total.successes,
            wall_ms: wall * 1e3,
        });
    }
    state.check()?;
    Ok(TimeSeries {
        realization,
        observable,
        rows,
    })
}

/// Run every realization of `cfg`. Deterministic for a fixed configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let times = cfg.samples.times(cfg.mcs)?;
    let observable = cfg.model.observable_name();
    let mut series = Vec::with_capacity(cfg.realizations as usize);
    let (mut attempts, mut wall) = (0u64, 0.0f64);
    for r in 0..cfg.realizations {
        let mut streams = RealizationStreams::new(cfg, r);
        let ts = match &cfg.model {
            ModelConfig::Kpz { p, q } => {
                let mut st = KpzState {
                    kernel: KpzKernel::new(cfg.size, KpzParams::new(*p, *q)?)?,
                    field: SlopeField::flat(cfg.size)?,
                };
                run_realization(&mut st, cfg, &mut streams, &times, r, observable)?
            }
            ModelConfig::Kmc { conc, eps, both_active } => {
                let lat = OccupancyLattice::random_alloy(cfg.size, *conc, &mut streams.init)?;
                let mut st = KmcState {
                    kernel: KmcKernel::new(cfg.size, kmc_params(*eps, *both_active)?)?,
                    particles: lat.count_b(),
                    lat,
                };
                run_realization(&mut st, cfg, &mut streams, &times, r, observable)?
            }
        };
        let last = ts.rows.last().expect("t = 0 is always sampled");
        attempts += last.attempts;
        wall += last.wall_ms / 1e3;
        series.push(ts);
    }
    Ok(ExperimentResult {
        series,
        throughput: ThroughputReport::new(attempts, wall),
    })
}

/// Mean and standard error of independent samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleStats {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
}

impl EnsembleStats {
    pub fn from_samples(v: &[f64]) -> Option<Self> {
        if v.is_empty() {
            return None;
        }
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            f64::INFINITY
        };
        Some(Self { n, mean, stderr })
    }

    /// Difference of the means in units of the combined standard error.
    pub fn z_score(&self, other: &Self) -> f64 {
        let se = (self.stderr.powi(2) + other.stderr.powi(2)).sqrt();
        if se == 0.0 {
            if self.mean == other.mean {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - other.mean).abs() / se
        }
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_exponent(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Param("need at least two matching points".into()));
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return Err(Error::Param("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPoint {
    pub size: usize,
    /// Median wall time per Monte Carlo step over the repetitions.
    pub seconds_per_mcs: f64,
    /// `(max - min) / median` over the repetitions.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub points: Vec<ScalingPoint>,
    pub exponent: f64,
    /// Set when a timing spread exceeds 20%.
    pub advice: Option<String>,
}

/// Runtime exponent of wall time per step against the lattice edge. Each
/// size is timed `repeats` times with `base.mcs` steps.
pub fn measure_scaling(base: &ExperimentConfig, sizes: &[usize], repeats: usize) -> Result<ScalingReport> {
    if sizes.len() < 3 {
        return Err(Error::Param("scaling needs at least three sizes".into()));
    }
    let ratio = sizes[1] as f64 / sizes[0] as f64;
    if ratio <= 1.0
        || sizes
            .windows(2)
            .any(|w| (w[1] as f64 / w[0] as f64 - ratio).abs() > 1e-9)
    {
        return Err(Error::Param("sizes must form an increasing geometric progression".into()));
    }
    if base.mcs == 0 || repeats == 0 {
        return Err(Error::Param("scaling needs at least one step and one repeat".into()));
    }
    let mut points = Vec::new();
    for &size in sizes {
        let mut cfg = base.clone();
        cfg.size = size;
        cfg.realizations = 1;
        cfg.samples = SampleSchedule::Explicit { times: vec![] };
        let mut t = Vec::with_capacity(repeats);
        for k in 0..repeats {
            cfg.seed = derive_seed(base.seed, k as u64);
            let r = run_experiment(&cfg)?;
            t.push(r.throughput.wall_seconds / cfg.mcs as f64);
        }
        t.sort_by(f64::total_cmp);
        let med = t[t.len() / 2];
        points.push(ScalingPoint {
            size,
            seconds_per_mcs: med,
            spread: (t[t.len() - 1] - t[0]) / med,
        });
    }
    let x: Vec<f64> = points.iter().map(|p| p.size as f64).collect();
    let y: Vec<f64> = points.iter().map(|p| p.seconds_per_mcs).collect();
    let exponent = fit_exponent(&x, &y)?;
    let noisy: Vec<_> = points.iter().filter(|p| p.spread > 0.2).map(|p| p.size).collect();
    let advice = (!noisy.is_empty()).then(|| {
        format!("timing spread above 20% at sizes {noisy:?}; re-run on an idle machine or with more steps")
    });
    Ok(ScalingReport {
        points,
        exponent,
        advice,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyRow {
    pub workers: usize,
    pub updates_per_second: f64,
    pub speedup: f64,
    pub efficiency: f64,
    /// More workers than hardware threads.
    pub oversubscribed: bool,
}

/// Speedup and efficiency relative to one worker on the same scheduler.
pub fn measure_efficiency(cfg: &ExperimentConfig, worker_counts: &[usize]) -> Result<Vec<EfficiencyRow>> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut counts = vec![1];
    counts.extend(worker_counts.iter().copied().filter(|&w| w != 1));
    let mut base = 0.0;
    let mut rows = Vec::new();
    for w in counts {
        let mut c = cfg.clone();
        c.workers = w;
        c.samples = SampleSchedule::Explicit { times: vec![] };
        let ups = run_experiment(&c)?.throughput.updates_per_second;
        if w == 1 {
            base = ups;
        }
        let speedup = if base > 0.0 { ups / base } else { 0.0 };
        rows.push(EfficiencyRow {
            workers: w,
            updates_per_second: ups,
            speedup,
            efficiency: speedup / w as f64,
            oversubscribed: w > threads,
        });
    }
    Ok(rows)
}

/// Busy-slot accounting of block schedules with and without ahead-of-time
/// updates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtilizationReport {
    pub blocks: usize,
    pub workers: usize,
    /// `q / (q + 1)` with `q = m / n` in integer division.
    pub formula: Ratio<u64>,
    pub naive_full_steps: Ratio<u64>,
    pub naive_busy_slots: Ratio<u64>,
    pub ahead_full_steps: Ratio<u64>,
}

pub fn utilization_report(blocks: usize, workers: usize, mcs: u64) -> Result<UtilizationReport> {
    let naive = schedule_naive(blocks, workers, mcs)?;
    let ahead = schedule_ahead_of_time(blocks, workers, mcs)?;
    Ok(UtilizationReport {
        blocks,
        workers,
        formula: utilization_fraction(blocks, workers),
        naive_full_steps: naive.full_step_fraction(),
        naive_busy_slots: naive.busy_fraction(),
        ahead_full_steps: ahead.full_step_fraction(),
    })
}

/// Size of the largest CPU cache reported by the kernel, in bytes.
pub fn last_level_cache_bytes() -> Option<usize> {
    let dir = std::fs::read_dir("/sys/devices/system/cpu/cpu0/cache").ok()?;
    dir.filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("index"))
        .filter_map(|e| std::fs::read_to_string(e.path().join("size")).ok())
        .filter_map(|s| parse_cache_size(s.trim()))
        .max()
}

fn parse_cache_size(s: &str) -> Option<usize> {
    let (num, mult) = match s.chars().last()? {
        'K' | 'k' => (&s[..s.len() - 1], 1 << 10),
        'M' | 'm' => (&s[..s.len() - 1], 1 << 20),
        'G' | 'g' => (&s[..s.len() - 1], 1 << 30),
        _ => (s, 1),
    };
    num.trim().parse::<usize>().ok().map(|n| n * mult)
}
