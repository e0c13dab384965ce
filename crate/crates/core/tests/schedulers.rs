use lf_core::decomposition::{
    run_cache_blocked_sequential, run_dead_border_sweep, run_double_tiling_round, run_sequential, run_two_layer,
    CacheBlockPlan, DeadBorderPlan, DoubleTilingPlan, Kernel, OuterPlan, TwoLayerPlan, WriteLog,
};
use lf_core::harness::{ExperimentConfig, OuterConfig, RealizationStreams, Scheduler, SchedulerConfig};
use lf_core::kmc::{ActiveMode, KmcKernel, KmcParams};
use lf_core::kpz::{reconstruct_heights, KpzKernel, KpzParams};
use lf_core::lattice::{OccupancyLattice, SiteCoord, SlopeField};
use lf_core::rng::{split_streams, RngKind, RngStream};

fn kpz(l: usize) -> KpzKernel {
    KpzKernel::new(l, KpzParams::new(1.0, 0.0).unwrap()).unwrap()
}

fn kmc(l: usize) -> KmcKernel {
    KmcKernel::new(l, KmcParams::new(1.5, ActiveMode::Both).unwrap()).unwrap()
}

fn streams(n: usize, seed: u64) -> (Vec<RngStream>, RngStream) {
    (
        split_streams(RngKind::Lcg64, seed, n, 1 << 40),
        RngStream::new(RngKind::Lcg64, seed ^ 0xabcdef),
    )
}

fn alloy(l: usize, seed: u64) -> OccupancyLattice {
    OccupancyLattice::random_alloy(l, 0.325, &mut RngStream::new(RngKind::Lcg64, seed)).unwrap()
}

#[test]
fn double_tiling_sets_are_separated() {
    for (dims, sets) in [(2usize, 4usize), (3, 8)] {
        let plan = DoubleTilingPlan::new(8, true);
        let doms = if dims == 2 { plan.domains(&kpz(32)) } else { plan.domains(&kmc(32)) };
        assert_eq!(doms.len(), sets);
        assert_eq!(plan.set_count(dims), sets);
        let e = plan.domain_edge();
        for set in &doms {
            for (a, da) in set.iter().enumerate() {
                for db in &set[a + 1..] {
                    // Some axis separates the two domains by a full domain.
                    let apart = (0..dims).any(|d| {
                        let gap = (db.origin[d] + 32 - da.origin[d]) % 32;
                        gap >= 2 * e && 32 - gap >= 2 * e
                    });
                    assert!(apart, "{da:?} {db:?}");
                }
            }
        }
    }
}

#[test]
fn single_hit_step_counts_exactly() {
    let k = kpz(64);
    let mut f = SlopeField::flat(64).unwrap();
    let (mut ws, mut sch) = streams(4, 1);
    let c = run_double_tiling_round(&k, f.words_mut(), &DoubleTilingPlan::new(8, true), &mut ws, &mut sch, None)
        .unwrap();
    assert_eq!(c.attempts, 4096);
}

fn kpz_configs() -> Vec<SchedulerConfig> {
    vec![
        SchedulerConfig::CacheBlocked {
            block_edge: Some(16),
            cache_bytes: Some(1 << 15),
        },
        SchedulerConfig::DeadBorder {
            dims: 2,
            cell_edge: 16,
            border: 1,
        },
        SchedulerConfig::DeadBorder {
            dims: 1,
            cell_edge: 16,
            border: 1,
        },
        SchedulerConfig::DoubleTiling {
            tile_edge: 8,
            single_hit: true,
        },
        SchedulerConfig::DoubleTiling {
            tile_edge: 8,
            single_hit: false,
        },
        SchedulerConfig::TwoLayer {
            outer: OuterConfig::DeadBorder {
                dims: 2,
                cell_edge: 16,
                border: 1,
            },
            inner_tile_edge: 4,
        },
        SchedulerConfig::TwoLayer {
            outer: OuterConfig::DoubleTiling { tile_edge: 32 },
            inner_tile_edge: 4,
        },
    ]
}

fn kmc_configs() -> Vec<SchedulerConfig> {
    vec![
        SchedulerConfig::CacheBlocked {
            block_edge: Some(8),
            cache_bytes: Some(1 << 15),
        },
        SchedulerConfig::DeadBorder {
            dims: 3,
            cell_edge: 8,
            border: 3,
        },
        SchedulerConfig::DeadBorder {
            dims: 1,
            cell_edge: 8,
            border: 3,
        },
        SchedulerConfig::DoubleTiling {
            tile_edge: 8,
            single_hit: true,
        },
        SchedulerConfig::TwoLayer {
            outer: OuterConfig::DeadBorder {
                dims: 3,
                cell_edge: 16,
                border: 3,
            },
            inner_tile_edge: 8,
        },
        SchedulerConfig::TwoLayer {
            outer: OuterConfig::DoubleTiling { tile_edge: 16 },
            inner_tile_edge: 8,
        },
    ]
}

fn step_all<K: Kernel>(k: &K, words: &mut [u64], cfg: &SchedulerConfig, workers: usize, mcs: u64, log: &mut WriteLog) {
    let mut ecfg = ExperimentConfig::kpz(16, 1.0, 0.0);
    ecfg.workers = workers;
    let mut st = RealizationStreams::new(&ecfg, 7);
    let mut s = Scheduler::new(cfg, k).unwrap();
    for _ in 0..mcs {
        let c = s.step(k, words, &mut st.workers, &mut st.schedule, Some(log)).unwrap();
        assert_eq!(c.attempts, k.volume(), "{}", cfg.name());
    }
}

#[test]
fn kpz_schedulers_conserve_and_never_collide() {
    let k = kpz(32);
    for cfg in kpz_configs() {
        let mut f = SlopeField::flat(32).unwrap();
        let mut log = WriteLog::new();
        step_all(&k, f.words_mut(), &cfg, 4, 30, &mut log);
        let (rows, cols) = f.closure_sums();
        assert!(rows.iter().chain(&cols).all(|&s| s == 0), "{}", cfg.name());
        reconstruct_heights(&f).unwrap();
        assert!(log.conflicts().is_empty(), "{}", cfg.name());
        assert_eq!(log.events.is_empty(), !cfg.is_parallel());
    }
}

#[test]
fn kmc_schedulers_conserve_and_never_collide() {
    let k = kmc(32);
    for cfg in kmc_configs() {
        let mut lat = alloy(32, 3);
        let n = lat.count_b();
        let mut log = WriteLog::new();
        step_all(&k, lat.words_mut(), &cfg, 4, 4, &mut log);
        assert_eq!(lat.count_b(), n, "{}", cfg.name());
        assert!(lat.odd_sites_clear());
        assert!(log.conflicts().is_empty(), "{}", cfg.name());
    }
}

#[test]
fn parallel_runs_are_reproducible() {
    let k = kpz(32);
    for cfg in kpz_configs() {
        let run = || {
            let mut f = SlopeField::flat(32).unwrap();
            let mut log = WriteLog::new();
            step_all(&k, f.words_mut(), &cfg, 3, 10, &mut log);
            f
        };
        assert_eq!(run(), run(), "{}", cfg.name());
    }
}

#[test]
fn dead_border_heights_stay_put() {
    let l = 128;
    let k = kpz(l);
    let mut f = SlopeField::flat(l).unwrap();
    let mut plan = DeadBorderPlan::new(2, 64, 1);
    let (mut ws, mut sch) = streams(4, 5);
    let mut interior = vec![false; l * l];
    for _ in 0..100 {
        let before = reconstruct_heights(&f).unwrap();
        let mut log = WriteLog::new();
        run_dead_border_sweep(&k, f.words_mut(), &mut plan, &mut ws, &mut sch, Some(&mut log)).unwrap();
        let after = reconstruct_heights(&f).unwrap();
        // Heights are pinned at (0, 0); a border site fixes the offset.
        let mut offset = None;
        for j in 0..l {
            for i in 0..l {
                let p = SiteCoord::new2(i, j);
                let d = after.get(i, j) - before.get(i, j);
                if plan.is_border(p, l) {
                    assert_eq!(*offset.get_or_insert(d), d, "border height moved at {p:?}");
                } else {
                    interior[j * l + i] = true;
                }
            }
        }
        for e in &log.events {
            let a = SiteCoord::new2(e.anchor % l, e.anchor / l);
            assert!(!plan.is_border(a, l));
        }
    }
    assert!(interior.iter().all(|&x| x), "some site never left the border");
}

#[test]
fn two_layer_respects_outer_borders() {
    let l = 64;
    let k = kpz(l);
    let mut f = SlopeField::flat(l).unwrap();
    let mut plan = TwoLayerPlan {
        outer: OuterPlan::DeadBorder(DeadBorderPlan::new(2, 16, 1)),
        inner_tile_edge: 4,
    };
    let (mut ws, mut sch) = streams(4, 8);
    for _ in 0..20 {
        let mut log = WriteLog::new();
        let c = run_two_layer(&k, f.words_mut(), &mut plan, &mut ws, &mut sch, Some(&mut log)).unwrap();
        assert_eq!(c.attempts, 4096);
        assert!(log.conflicts().is_empty());
        let OuterPlan::DeadBorder(db) = &plan.outer else { unreachable!() };
        for e in &log.events {
            assert!(!db.is_border(SiteCoord::new2(e.anchor % l, e.anchor / l), l));
        }
    }
}

#[test]
fn single_cell_two_layer_is_double_tiling() {
    let k = kpz(32);
    let mut a = SlopeField::flat(32).unwrap();
    let mut b = a.clone();
    let (mut wa, mut sa) = streams(2, 9);
    let (mut wb, mut sb) = streams(2, 9);
    let mut plan = TwoLayerPlan {
        outer: OuterPlan::DeadBorder(DeadBorderPlan::new(2, 32, 0).with_fixed_origin([0; 3])),
        inner_tile_edge: 8,
    };
    let dt = DoubleTilingPlan::new(8, true);
    for _ in 0..10 {
        run_two_layer(&k, a.words_mut(), &mut plan, &mut wa, &mut sa, None).unwrap();
        run_double_tiling_round(&k, b.words_mut(), &dt, &mut wb, &mut sb, None).unwrap();
    }
    assert_eq!(a, b);
}

#[test]
fn whole_system_block_matches_sequential() {
    let k = kpz(64);
    let mut a = SlopeField::flat(64).unwrap();
    let mut b = a.clone();
    let mut ra = RngStream::new(RngKind::TinyMt, 4);
    let mut rb = ra.clone();
    let plan = CacheBlockPlan::new(64, 1 << 20);
    for _ in 0..5 {
        run_sequential(&k, a.words_mut(), &mut ra);
        run_cache_blocked_sequential(&k, b.words_mut(), &plan, &mut rb).unwrap();
    }
    assert_eq!(a, b);

    let k = kmc(16);
    let mut a = alloy(16, 2);
    let mut b = a.clone();
    let plan = CacheBlockPlan::new(16, 1 << 20);
    for _ in 0..5 {
        run_sequential(&k, a.words_mut(), &mut ra);
        run_cache_blocked_sequential(&k, b.words_mut(), &plan, &mut rb).unwrap();
    }
    assert_eq!(a, b);
}

#[test]
fn cache_block_budget_enforced() {
    let k = kpz(256);
    // 64 x 64 block = 1 KiB of slopes.
    assert!(CacheBlockPlan::new(64, 2048).validate(&k).is_ok());
    assert!(CacheBlockPlan::new(64, 2047).validate(&k).is_err());
    assert!(CacheBlockPlan::new(48, 1 << 20).validate(&k).is_err());
    let auto = CacheBlockPlan::sized_for(&k, 32 * 1024).unwrap();
    assert_eq!(auto.block_edge, 256);
    let auto = CacheBlockPlan::sized_for(&kmc(256), 32 * 1024).unwrap();
    assert_eq!(auto.block_edge, 32);
}

#[test]
fn geometry_errors() {
    let k = kmc(32);
    assert!(DeadBorderPlan::new(3, 8, 2).validate(&k).is_err());
    assert!(DeadBorderPlan::new(3, 6, 1).validate(&k).is_err());
    assert!(DeadBorderPlan::new(3, 8, 4).validate(&k).is_err());
    assert!(DoubleTilingPlan::new(4, true).validate(&k).is_err());
    assert!(DoubleTilingPlan::new(12, true).validate(&k).is_err());
    assert!(DoubleTilingPlan::new(6, true).validate(&k).is_err());
    assert!(DoubleTilingPlan::new(8, true).validate(&k).is_ok());
}
