//! Quick invariant and oracle checks, runnable from the command line.

use crate::decomposition::{schedule_ahead_of_time, schedule_naive, utilization_fraction, Kernel, WriteLog};
use crate::harness::{OuterConfig, RealizationStreams, Scheduler, SchedulerConfig};
use crate::kmc::{metropolis_prob, ActiveMode, KmcKernel, KmcParams};
use crate::kpz::{interface_width, reconstruct_heights, KpzKernel, KpzParams};
use crate::lattice::{fcc_is_valid, fcc_neighbors, OccupancyLattice, SiteCoord, SlopeField};
use crate::rng::{RngKind, RngStream, SplitMix64, WordSource};
use crate::harness::ExperimentConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<String, String>) -> CheckResult {
    match f() {
        Ok(detail) => CheckResult {
            name,
            passed: true,
            detail,
        },
        Err(detail) => CheckResult {
            name,
            passed: false,
            detail,
        },
    }
}

fn fcc_geometry() -> Result<String, String> {
    let l = 16;
    let lat = OccupancyLattice::empty(l).map_err(|e| e.to_string())?;
    let mut n = 0;
    for p in lat.valid_sites() {
        n += 1;
        let nb = fcc_neighbors(p, l).map_err(|e| e.to_string())?;
        for q in nb {
            if !fcc_is_valid(q) {
                return Err(format!("{q:?} has odd parity"));
            }
            if !fcc_neighbors(q, l).map_err(|e| e.to_string())?.contains(&p) {
                return Err(format!("{p:?} -> {q:?} not symmetric"));
            }
        }
    }
    if n != 2048 {
        return Err(format!("{n} valid sites"));
    }
    Ok("2048 sites, 12 symmetric neighbours each".into())
}

fn detailed_balance() -> Result<String, String> {
    for eps in [0.5, 1.5, 3.0] {
        let p = KmcParams::new(eps, ActiveMode::BOnly).map_err(|e| e.to_string())?;
        for a in 0..=12u32 {
            for b in 0..=12u32 {
                let ratio = metropolis_prob(a, b, &p) / metropolis_prob(b, a, &p);
                let expect = (-(a as f64 - b as f64) * eps).exp();
                if (ratio / expect - 1.0).abs() > 1e-12 {
                    return Err(format!("eps {eps}, ({a}, {b}): {ratio} vs {expect}"));
                }
            }
        }
    }
    Ok("all count pairs, eps in {0.5, 1.5, 3.0}".into())
}

fn skip_ahead() -> Result<String, String> {
    let mut sm = SplitMix64(0x5eed);
    for _ in 0..100 {
        let seed = sm.next_u64();
        let n = sm.next_u64() % 100_001;
        let mut it = RngStream::new(RngKind::Lcg64, seed);
        for _ in 0..n {
            it.next_word();
        }
        let jumped = RngStream::new(RngKind::Lcg64, seed)
            .skip_ahead(n)
            .map_err(|e| e.to_string())?;
        if jumped.lcg64_state() != it.lcg64_state() {
            return Err(format!("seed {seed:#x}, n {n}"));
        }
    }
    Ok("100 random (seed, n) pairs bit-exact".into())
}

fn flat_width() -> Result<String, String> {
    let f = SlopeField::flat(8).map_err(|e| e.to_string())?;
    let w = interface_width(&reconstruct_heights(&f).map_err(|e| e.to_string())?);
    if w != 0.5 {
        return Err(format!("W^2 = {w}"));
    }
    Ok("W^2 = 0.5".into())
}

fn schedules() -> Result<String, String> {
    for m in 1..=64usize {
        for n in 1..=16usize.min(m) {
            let s = schedule_ahead_of_time(m, n, 3).map_err(|e| e.to_string())?;
            if !s.each_block_once_per_mcs() || !s.full_except_last() {
                return Err(format!("ahead-of-time schedule ({m}, {n})"));
            }
            if m % n != 0 {
                let naive = schedule_naive(m, n, 3).map_err(|e| e.to_string())?;
                if naive.full_step_fraction() != utilization_fraction(m, n) {
                    return Err(format!("naive utilization ({m}, {n})"));
                }
            }
        }
    }
    Ok("m <= 64, n <= 16".into())
}

fn kpz_schedulers() -> Vec<SchedulerConfig> {
    vec![
        SchedulerConfig::Sequential,
        SchedulerConfig::CacheBlocked {
            block_edge: Some(8),
            cache_bytes: Some(1 << 15),
        },
        SchedulerConfig::DeadBorder {
            dims: 2,
            cell_edge: 16,
            border: 1,
        },
        SchedulerConfig::DoubleTiling {
            tile_edge: 8,
            single_hit: true,
        },
        SchedulerConfig::TwoLayer {
            outer: OuterConfig::DeadBorder {
                dims: 2,
                cell_edge: 16,
                border: 1,
            },
            inner_tile_edge: 4,
        },
    ]
}

fn kmc_schedulers() -> Vec<SchedulerConfig> {
    vec![
        SchedulerConfig::Sequential,
        SchedulerConfig::CacheBlocked {
            block_edge: Some(8),
            cache_bytes: Some(1 << 15),
        },
        SchedulerConfig::DeadBorder {
            dims: 3,
            cell_edge: 8,
            border: 3,
        },
        SchedulerConfig::DoubleTiling {
            tile_edge: 8,
            single_hit: true,
        },
        SchedulerConfig::TwoLayer {
            outer: OuterConfig::DoubleTiling { tile_edge: 16 },
            inner_tile_edge: 8,
        },
    ]
}

fn run_logged<K: Kernel>(
    kernel: &K,
    words: &mut [u64],
    sched: &SchedulerConfig,
    cfg: &ExperimentConfig,
    mcs: u64,
) -> Result<WriteLog, String> {
    let mut s = Scheduler::new(sched, kernel).map_err(|e| e.to_string())?;
    let mut st = RealizationStreams::new(cfg, 0);
    let mut log = WriteLog::new();
    for _ in 0..mcs {
        s.step(kernel, words, &mut st.workers, &mut st.schedule, Some(&mut log))
            .map_err(|e| e.to_string())?;
    }
    Ok(log)
}

fn conservation_and_disjointness() -> Result<String, String> {
    let mut cfg = ExperimentConfig::kpz(32, 1.0, 0.0);
    cfg.workers = 3;
    let kpz = KpzKernel::new(32, KpzParams::new(1.0, 0.0).unwrap()).map_err(|e| e.to_string())?;
    for sched in kpz_schedulers() {
        let mut f = SlopeField::flat(32).map_err(|e| e.to_string())?;
        let log = run_logged(&kpz, f.words_mut(), &sched, &cfg, 20)?;
        let (rows, cols) = f.closure_sums();
        if rows.iter().chain(&cols).any(|&s| s != 0) {
            return Err(format!("KPZ closure broken by {}", sched.name()));
        }
        if !log.conflicts().is_empty() {
            return Err(format!("KPZ write conflict under {}", sched.name()));
        }
    }
    let kmc = KmcKernel::new(16, KmcParams::new(1.5, ActiveMode::Both).unwrap()).map_err(|e| e.to_string())?;
    for sched in kmc_schedulers() {
        let mut rng = RngStream::new(RngKind::Lcg64, 17);
        let mut lat = OccupancyLattice::random_alloy(16, 0.325, &mut rng).map_err(|e| e.to_string())?;
        let n = lat.count_b();
        let log = run_logged(&kmc, lat.words_mut(), &sched, &cfg, 10)?;
        if lat.count_b() != n || !lat.odd_sites_clear() {
            return Err(format!("KMC species not conserved by {}", sched.name()));
        }
        if !log.conflicts().is_empty() {
            return Err(format!("KMC write conflict under {}", sched.name()));
        }
    }
    Ok("every scheduler, both models".into())
}

fn sampler_parity() -> Result<String, String> {
    let k = KmcKernel::new(8, KmcParams::new(1.0, ActiveMode::BOnly).unwrap()).map_err(|e| e.to_string())?;
    let mut rng = RngStream::new(RngKind::TinyMt, 3);
    for _ in 0..10_000 {
        let p: SiteCoord = k.sample_site(&mut rng);
        if !fcc_is_valid(p) {
            return Err(format!("sampled {p:?}"));
        }
    }
    Ok("10^4 draws on valid sites".into())
}

/// Every quick check, in a fixed order.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        check("fcc geometry", fcc_geometry),
        check("detailed balance", detailed_balance),
        check("skip-ahead", skip_ahead),
        check("flat interface width", flat_width),
        check("block schedules", schedules),
        check("conservation and write disjointness", conservation_and_disjointness),
        check("site sampler parity", sampler_parity),
    ]
}
