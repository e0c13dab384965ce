//! Barrier-synchronized execution of precomputed rounds.
//!
//! A scheduler turns one Monte Carlo step into a list of [`Round`]s. Each
//! round activates the first `count` domains of one set of a [`Layout`];
//! domain `j` goes to worker `j % workers`, so the work split depends only on
//! the worker count. Workers wait on a barrier after every round.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use super::{Counters, Kernel, NoLog, SiteBox, WriteEvent, WriteLog, WriteSink};
use crate::lattice::{BitAccess, PlainBits, SharedBits};
use crate::rng::RngStream;

/// Domains grouped into sets whose members may run concurrently.
#[derive(Debug, Clone, Default)]
pub(crate) struct Layout {
    pub sets: Vec<Vec<SiteBox>>,
    /// Anchors outside this box are frozen: attempts drawn there count but
    /// change nothing.
    pub active: Option<SiteBox>,
}

/// Attempts a domain receives when its set is activated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Hits {
    One,
    Volume,
    Fixed(u64),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Round {
    pub layout: usize,
    pub set: usize,
    pub count: usize,
    pub hits: Hits,
}

trait IntervalSink: WriteSink {
    fn begin(&mut self, interval: u64);
    fn anchor(&mut self, anchor: usize);
}

impl IntervalSink for NoLog {
    #[inline(always)]
    fn begin(&mut self, _: u64) {}
    #[inline(always)]
    fn anchor(&mut self, _: usize) {}
}

struct Recorder {
    worker: u32,
    interval: u64,
    anchor: usize,
    events: Vec<WriteEvent>,
}

impl WriteSink for Recorder {
    fn record(&mut self, site: usize) {
        self.events.push(WriteEvent {
            interval: self.interval,
            worker: self.worker,
            anchor: self.anchor,
            site,
        });
    }
}

impl IntervalSink for Recorder {
    fn begin(&mut self, interval: u64) {
        self.interval = interval;
    }
    fn anchor(&mut self, anchor: usize) {
        self.anchor = anchor;
    }
}

/// Generation-counting barrier that spins briefly, then yields. Rounds are
/// short, so parking on a condition variable costs more than the work.
struct Barrier {
    workers: usize,
    arrived: AtomicUsize,
    generation: AtomicU64,
    spins: u32,
}

impl Barrier {
    fn new(workers: usize) -> Self {
        let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
        Self {
            workers,
            arrived: AtomicUsize::new(0),
            generation: AtomicU64::new(0),
            // Spinning only helps when every worker has its own thread.
            spins: if workers <= threads { 1 << 12 } else { 0 },
        }
    }

    fn wait(&self) {
        let gen = self.generation.load(Ordering::Acquire);
        if self.arrived.fetch_add(1, Ordering::AcqRel) + 1 == self.workers {
            self.arrived.store(0, Ordering::Relaxed);
            self.generation.store(gen + 1, Ordering::Release);
            return;
        }
        let mut n = 0;
        while self.generation.load(Ordering::Acquire) == gen {
            if n < self.spins {
                std::hint::spin_loop();
                n += 1;
            } else {
                std::thread::yield_now();
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn worker_loop<K: Kernel, B: BitAccess, S: IntervalSink>(
    kernel: &K,
    bits: &mut B,
    layouts: &[Layout],
    rounds: &[Round],
    worker: usize,
    workers: usize,
    rng: &mut RngStream,
    sink: &mut S,
    interval_base: u64,
    barrier: Option<&Barrier>,
) -> Counters {
    let mut c = Counters::default();
    let edge = kernel.edge();
    for (r, round) in rounds.iter().enumerate() {
        sink.begin(interval_base + r as u64);
        let layout = &layouts[round.layout];
        let domains = &layout.sets[round.set][..round.count];
        for dom in domains.iter().skip(worker).step_by(workers) {
            let hits = match round.hits {
                Hits::One => 1,
                Hits::Fixed(n) => n,
                Hits::Volume => kernel.count_in_box(dom),
            };
            for _ in 0..hits {
                let site = kernel.sample_in_box(dom, rng);
                if let Some(a) = &layout.active {
                    if !a.contains(site, edge) {
                        continue;
                    }
                }
                sink.anchor(kernel.site_index(site));
                c.successes += kernel.attempt(bits, site, rng, sink) as u64;
            }
            c.attempts += hits;
        }
        if let Some(b) = barrier {
            b.wait();
        }
    }
    c
}

/// Run `rounds` with one worker per stream.
pub(crate) fn execute<K: Kernel>(
    kernel: &K,
    words: &mut [u64],
    layouts: &[Layout],
    rounds: &[Round],
    streams: &mut [RngStream],
    log: Option<&mut WriteLog>,
) -> Counters {
    let workers = streams.len();
    assert!(workers >= 1, "at least one worker stream is required");
    let base = match &log {
        Some(l) => l.next_interval,
        None => 0,
    };

    if workers == 1 {
        let mut bits = PlainBits(words);
        let rng = &mut streams[0];
        return match log {
            None => worker_loop(kernel, &mut bits, layouts, rounds, 0, 1, rng, &mut NoLog, 0, None),
            Some(log) => {
                let mut rec = Recorder {
                    worker: 0,
                    interval: base,
                    anchor: 0,
                    events: Vec::new(),
                };
                let c = worker_loop(kernel, &mut bits, layouts, rounds, 0, 1, rng, &mut rec, base, None);
                log.events.append(&mut rec.events);
                log.reserve_intervals(rounds.len() as u64);
                c
            }
        };
    }

    let shared = SharedBits::new(words);
    let barrier = Barrier::new(workers);
    let logging = log.is_some();
    let results: Vec<(Counters, Vec<WriteEvent>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = streams
            .iter_mut()
            .enumerate()
            .map(|(w, rng)| {
                let barrier = &barrier;
                scope.spawn(move || {
                    let mut bits = shared;
                    if logging {
                        let mut rec = Recorder {
                            worker: w as u32,
                            interval: base,
                            anchor: 0,
                            events: Vec::new(),
                        };
                        let c = worker_loop(
                            kernel, &mut bits, layouts, rounds, w, workers, rng, &mut rec, base,
                            Some(barrier),
                        );
                        (c, rec.events)
                    } else {
                        let c = worker_loop(
                            kernel, &mut bits, layouts, rounds, w, workers, rng, &mut NoLog, base,
                            Some(barrier),
                        );
                        (c, Vec::new())
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });

    let mut total = Counters::default();
    let mut events = Vec::new();
    for (c, mut ev) in results {
        total += c;
        events.append(&mut ev);
    }
    if let Some(log) = log {
        log.events.append(&mut events);
        log.reserve_intervals(rounds.len() as u64);
    }
    total
}
