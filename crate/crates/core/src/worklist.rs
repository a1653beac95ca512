//! Concurrent soft-priority worklist.
//!
//! Items carry an integer bin (`floor(t / scale)`). Bins live in a shared
//! ordered map; each bin holds a lock-protected bag of chunks. Worker threads
//! push into thread-local chunks and only touch the shared map when a chunk
//! fills up or when their local supply runs dry, at which point they take a
//! whole chunk from the earliest non-empty bin they can see. Priorities are
//! hints: a pop may return an item from a later bin than the true global
//! minimum (a priority inversion).
//!
//! With one thread and `chunk_size == 1` every push is immediately global and
//! every pop takes the earliest bin, so pops come out in nondecreasing bin
//! order.

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use parking_lot::{Mutex, RwLock};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WorkItem {
    pub node: usize,
    pub bin: u64,
}

impl WorkItem {
    pub fn new(node: usize, bin: u64) -> Self {
        Self { node, bin }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorklistConfig {
    pub scale: f64,
    pub chunk_size: usize,
    /// Record how far each pop lands from the earliest visible bin.
    pub track_inversions: bool,
}

pub const DEFAULT_CHUNK_SIZE: usize = 64;

impl WorklistConfig {
    pub fn new(scale: f64, chunk_size: usize) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidConfig(format!("scale must be positive, got {scale}")));
        }
        if chunk_size == 0 {
            return Err(Error::InvalidConfig("chunk size must be >= 1".into()));
        }
        Ok(Self { scale, chunk_size, track_inversions: false })
    }

    pub fn with_inversions(mut self, on: bool) -> Self {
        self.track_inversions = on;
        self
    }

    #[inline]
    pub fn bin(&self, t: f64) -> u64 {
        bin_unchecked(t, self.scale)
    }
}

/// `floor(t / scale)`; infinite times are never enqueued.
pub fn bin_of(t: f64, scale: f64) -> Result<u64> {
    if t == f64::INFINITY {
        return Err(Error::InfiniteArrival);
    }
    if !(t >= 0.0) || !(scale > 0.0) {
        return Err(Error::InvalidConfig(format!("cannot bin t={t} with scale={scale}")));
    }
    Ok(bin_unchecked(t, scale))
}

#[inline]
fn bin_unchecked(t: f64, scale: f64) -> u64 {
    // Float-to-int casts saturate, so huge quotients land in the last bin.
    (t / scale).floor() as u64
}

struct Bag {
    chunks: Mutex<BagInner>,
    len: AtomicUsize,
}

#[derive(Default)]
struct BagInner {
    chunks: Vec<Vec<WorkItem>>,
    // Set when the bag is unlinked from the map; pushers must look it up again.
    retired: bool,
}

impl Bag {
    fn new() -> Arc<Self> {
        Arc::new(Self { chunks: Mutex::new(BagInner::default()), len: AtomicUsize::new(0) })
    }
}

/// Per-run counters reported by [`Worklist::run_until_quiescent`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub pushes: u64,
    pub pops: u64,
    /// Pops whose bin was later than the earliest bin visible at that moment.
    pub inversions: u64,
    /// Inversion distance in bins -> number of pops.
    pub inversion_histogram: BTreeMap<u64, u64>,
}

impl RunStats {
    fn merge(&mut self, other: &RunStats) {
        self.pushes += other.pushes;
        self.pops += other.pops;
        self.inversions += other.inversions;
        for (k, v) in &other.inversion_histogram {
            *self.inversion_histogram.entry(*k).or_default() += v;
        }
    }
}

pub struct Worklist {
    config: WorklistConfig,
    bins: RwLock<BTreeMap<u64, Arc<Bag>>>,
    /// Items pushed and not yet completed, including thread-local ones.
    pending: AtomicU64,
    aborted: AtomicBool,
}

impl Worklist {
    pub fn new(config: WorklistConfig) -> Self {
        Self {
            config,
            bins: RwLock::new(BTreeMap::new()),
            pending: AtomicU64::new(0),
            aborted: AtomicBool::new(false),
        }
    }

    pub fn config(&self) -> &WorklistConfig {
        &self.config
    }

    pub fn handle(&self) -> WorkerHandle<'_> {
        WorkerHandle {
            list: self,
            push_bufs: Vec::new(),
            pop_chunk: Vec::new(),
            pop_bin: 0,
            stats: RunStats::default(),
        }
    }

    pub fn pending(&self) -> u64 {
        self.pending.load(Ordering::Acquire)
    }

    fn publish(&self, bin: u64, chunk: Vec<WorkItem>) {
        debug_assert!(!chunk.is_empty());
        let mut chunk = Some(chunk);
        loop {
            let existing = self.bins.read().get(&bin).cloned();
            let bag = match existing {
                Some(bag) => bag,
                None => self.bins.write().entry(bin).or_insert_with(Bag::new).clone(),
            };
            let mut inner = bag.chunks.lock();
            if inner.retired {
                continue;
            }
            inner.chunks.push(chunk.take().expect("chunk published once"));
            bag.len.fetch_add(1, Ordering::Release);
            return;
        }
    }

    /// Takes one chunk from the earliest non-empty bin, unlinking drained
    /// bins encountered on the way.
    fn take_earliest(&self) -> Option<(u64, Vec<WorkItem>)> {
        let mut drained = Vec::new();
        let mut found = None;
        {
            let map = self.bins.read();
            for (&bin, bag) in map.iter() {
                if bag.len.load(Ordering::Acquire) == 0 {
                    drained.push(bin);
                    continue;
                }
                let mut inner = bag.chunks.lock();
                if let Some(chunk) = inner.chunks.pop() {
                    bag.len.fetch_sub(1, Ordering::Release);
                    found = Some((bin, chunk));
                    break;
                }
                drained.push(bin);
            }
        }
        if !drained.is_empty() {
            self.unlink(&drained);
        }
        found
    }

    fn unlink(&self, bins: &[u64]) {
        let mut map = self.bins.write();
        for bin in bins {
            let Some(bag) = map.get(bin) else { continue };
            let mut inner = bag.chunks.lock();
            if inner.chunks.is_empty() {
                inner.retired = true;
                drop(inner);
                map.remove(bin);
            }
        }
    }

    fn earliest_visible(&self) -> Option<u64> {
        let map = self.bins.read();
        map.iter().find(|(_, bag)| bag.len.load(Ordering::Acquire) > 0).map(|(&b, _)| b)
    }

    /// Seeds the list with `initial`, then runs `threads` workers until no
    /// work exists or can be created.
    ///
    /// Each worker thread owns a state built by `init(thread_index)`; the
    /// states are returned in thread order. `worker` may push new items
    /// through the handle it is given. A panic in any worker stops the other
    /// threads and is re-raised here; the list must not be reused afterwards.
    pub fn run_until_quiescent<S, I, W>(
        &self,
        initial: impl IntoIterator<Item = WorkItem>,
        threads: usize,
        init: I,
        worker: W,
    ) -> (Vec<S>, RunStats)
    where
        S: Send,
        I: Fn(usize) -> S + Sync,
        W: Fn(&mut S, WorkItem, &mut WorkerHandle<'_>) + Sync,
    {
        let threads = threads.max(1);
        let mut stats = RunStats::default();
        {
            let mut seed = self.handle();
            for item in initial {
                seed.push(item);
            }
            seed.flush();
            stats.merge(&seed.stats);
        }

        let results: Vec<(S, RunStats)> = if threads == 1 {
            vec![self.worker_loop(0, &init, &worker)]
        } else {
            thread::scope(|scope| {
                let handles: Vec<_> = (0..threads)
                    .map(|tid| {
                        let init = &init;
                        let worker = &worker;
                        scope.spawn(move || self.worker_loop(tid, init, worker))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| match h.join() {
                        Ok(r) => r,
                        Err(payload) => panic::resume_unwind(payload),
                    })
                    .collect()
            })
        };

        let mut states = Vec::with_capacity(results.len());
        for (state, s) in results {
            stats.merge(&s);
            states.push(state);
        }
        (states, stats)
    }

    fn worker_loop<S, I, W>(&self, tid: usize, init: &I, worker: &W) -> (S, RunStats)
    where
        I: Fn(usize) -> S,
        W: Fn(&mut S, WorkItem, &mut WorkerHandle<'_>),
    {
        let mut state = init(tid);
        let mut handle = self.handle();
        let mut idle_rounds = 0u32;
        loop {
            if self.aborted.load(Ordering::Relaxed) {
                break;
            }
            match handle.pop() {
                Some(item) => {
                    idle_rounds = 0;
                    let outcome =
                        panic::catch_unwind(AssertUnwindSafe(|| worker(&mut state, item, &mut handle)));
                    if let Err(payload) = outcome {
                        self.aborted.store(true, Ordering::Relaxed);
                        panic::resume_unwind(payload);
                    }
                    self.pending.fetch_sub(1, Ordering::AcqRel);
                }
                None => {
                    // Nothing visible here. Once pending reaches zero it stays
                    // there: new pushes only come from items still in flight.
                    if self.pending.load(Ordering::Acquire) == 0 {
                        break;
                    }
                    idle_rounds += 1;
                    if idle_rounds < 64 {
                        std::hint::spin_loop();
                    } else if idle_rounds < 256 {
                        thread::yield_now();
                    } else {
                        thread::sleep(Duration::from_micros(50));
                    }
                }
            }
        }
        handle.flush();
        (state, handle.stats)
    }
}

/// One thread's view of a [`Worklist`].
pub struct WorkerHandle<'a> {
    list: &'a Worklist,
    push_bufs: Vec<(u64, Vec<WorkItem>)>,
    pop_chunk: Vec<WorkItem>,
    pop_bin: u64,
    stats: RunStats,
}

impl WorkerHandle<'_> {
    pub fn push(&mut self, item: WorkItem) {
        self.list.pending.fetch_add(1, Ordering::AcqRel);
        self.stats.pushes += 1;
        let chunk_size = self.list.config.chunk_size;
        let pos = match self.push_bufs.iter().position(|(b, _)| *b == item.bin) {
            Some(p) => p,
            None => {
                self.push_bufs.push((item.bin, Vec::with_capacity(chunk_size)));
                self.push_bufs.len() - 1
            }
        };
        let buf = &mut self.push_bufs[pos].1;
        buf.push(item);
        if buf.len() >= chunk_size {
            let (bin, chunk) = self.push_bufs.swap_remove(pos);
            self.list.publish(bin, chunk);
        }
    }

    /// Makes every locally buffered item globally visible.
    pub fn flush(&mut self) {
        for (bin, chunk) in self.push_bufs.drain(..) {
            if !chunk.is_empty() {
                self.list.publish(bin, chunk);
            }
        }
    }

    fn local_push_min(&self) -> Option<usize> {
        self.push_bufs
            .iter()
            .enumerate()
            .filter(|(_, (_, c))| !c.is_empty())
            .min_by_key(|(_, (b, _))| *b)
            .map(|(i, _)| i)
    }

    /// Returns an item from the earliest bin this thread knows about, or
    /// `None` if nothing is visible to it. `None` is not a termination signal.
    pub fn pop(&mut self) -> Option<WorkItem> {
        let local = self.local_push_min();
        let item = match (self.pop_chunk.is_empty(), local) {
            (false, Some(p)) if self.push_bufs[p].0 < self.pop_bin => self.take_local(p),
            (false, _) => self.pop_chunk.pop(),
            (true, _) => {
                self.flush();
                let (bin, chunk) = self.list.take_earliest()?;
                self.pop_bin = bin;
                self.pop_chunk = chunk;
                self.pop_chunk.pop()
            }
        }?;
        self.stats.pops += 1;
        if self.list.config.track_inversions {
            self.record_inversion(item);
        }
        Some(item)
    }

    fn take_local(&mut self, pos: usize) -> Option<WorkItem> {
        let item = self.push_bufs[pos].1.pop();
        if self.push_bufs[pos].1.is_empty() {
            self.push_bufs.swap_remove(pos);
        }
        item
    }

    fn record_inversion(&mut self, item: WorkItem) {
        let mut earliest = item.bin;
        if let Some(b) = self.list.earliest_visible() {
            earliest = earliest.min(b);
        }
        if let Some(p) = self.local_push_min() {
            earliest = earliest.min(self.push_bufs[p].0);
        }
        if !self.pop_chunk.is_empty() {
            earliest = earliest.min(self.pop_bin);
        }
        if item.bin > earliest {
            self.stats.inversions += 1;
            *self.stats.inversion_histogram.entry(item.bin - earliest).or_default() += 1;
        }
    }
}
