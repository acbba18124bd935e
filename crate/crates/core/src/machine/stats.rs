//! Run counters and the per-component timing breakdown.

use std::time::{Duration, Instant};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunStats {
    /// Instructions dispatched by the default emulator plus micro-ops
    /// dispatched by S.emulators.
    pub dispatches: u64,
    pub type_test_evals: u64,
    pub guard_evals: u64,
    pub side_exits_elementary: u64,
    pub side_exits_gc: u64,
    pub rebuilds: u64,
    pub reclamations: u64,
    /// Reclamations started by an S.emulator GC exit.
    pub reclamations_in_semulator: u64,
    pub heap_doublings: u64,
    pub head_entries: u64,
    /// Head entries taken while an S.emulator was running.
    pub specialized_head_entries: u64,
    pub semulator_runs: u64,
    pub mark_calls: u64,
    pub installs: u64,
    pub solutions: Vec<String>,
}

impl RunStats {
    /// Adds `other`'s counters; solutions are kept from `self`.
    pub fn accumulate(&mut self, other: &RunStats) {
        self.dispatches += other.dispatches;
        self.type_test_evals += other.type_test_evals;
        self.guard_evals += other.guard_evals;
        self.side_exits_elementary += other.side_exits_elementary;
        self.side_exits_gc += other.side_exits_gc;
        self.rebuilds += other.rebuilds;
        self.reclamations += other.reclamations;
        self.reclamations_in_semulator += other.reclamations_in_semulator;
        self.heap_doublings += other.heap_doublings;
        self.head_entries += other.head_entries;
        self.specialized_head_entries += other.specialized_head_entries;
        self.semulator_runs += other.semulator_runs;
        self.mark_calls += other.mark_calls;
        self.installs += other.installs;
    }

    pub fn side_exits(&self) -> u64 {
        self.side_exits_elementary + self.side_exits_gc
    }

    /// Type tests plus guards per head entry.
    pub fn tests_per_entry(&self) -> f64 {
        if self.head_entries == 0 {
            return 0.0;
        }
        (self.type_test_evals + self.guard_evals) as f64 / self.head_entries as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Component {
    DefaultEmulator,
    Overflow,
    GarbageCollector,
    MonitorTraceBuilder,
    TraceCompiler,
    SEmulator,
}

impl Component {
    pub const ALL: [Component; 6] = [
        Component::DefaultEmulator,
        Component::Overflow,
        Component::GarbageCollector,
        Component::MonitorTraceBuilder,
        Component::TraceCompiler,
        Component::SEmulator,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Component::DefaultEmulator => "default_emulator",
            Component::Overflow => "overflow",
            Component::GarbageCollector => "garbage_collector",
            Component::MonitorTraceBuilder => "monitor_and_trace_builder",
            Component::TraceCompiler => "trace_compiler",
            Component::SEmulator => "s_emulator",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TimingBreakdown {
    pub components: [Duration; 6],
}

impl TimingBreakdown {
    pub fn get(&self, c: Component) -> Duration {
        self.components[c as usize]
    }

    pub fn total(&self) -> Duration {
        self.components.iter().sum()
    }

    pub fn add(&mut self, other: &TimingBreakdown) {
        for (a, b) in self.components.iter_mut().zip(other.components) {
            *a += b;
        }
    }

    pub fn scaled(&self, div: u32) -> TimingBreakdown {
        let mut out = *self;
        for c in out.components.iter_mut() {
            *c /= div.max(1);
        }
        out
    }
}

/// Attributes wall time to the innermost active component. Time is charged
/// at every transition, so the components always add up to the span between
/// `start` and `stop`.
#[derive(Debug)]
pub struct Timer {
    stack: Vec<Component>,
    since: Instant,
    started: Option<Instant>,
    pub breakdown: TimingBreakdown,
    pub elapsed: Duration,
}

impl Default for Timer {
    fn default() -> Self {
        Timer {
            stack: Vec::new(),
            since: Instant::now(),
            started: None,
            breakdown: TimingBreakdown::default(),
            elapsed: Duration::ZERO,
        }
    }
}

impl Timer {
    fn charge(&mut self, now: Instant) {
        if let Some(&top) = self.stack.last() {
            self.breakdown.components[top as usize] += now - self.since;
        }
        self.since = now;
    }

    pub fn start(&mut self) {
        let now = Instant::now();
        self.stack.clear();
        self.stack.push(Component::DefaultEmulator);
        self.since = now;
        self.started = Some(now);
    }

    pub fn stop(&mut self) {
        let now = Instant::now();
        self.charge(now);
        self.stack.clear();
        if let Some(s) = self.started.take() {
            self.elapsed += now - s;
        }
    }

    #[inline]
    pub fn enter(&mut self, c: Component) {
        if self.stack.is_empty() {
            return;
        }
        self.charge(Instant::now());
        self.stack.push(c);
    }

    #[inline]
    pub fn leave(&mut self) {
        if self.stack.len() <= 1 {
            return;
        }
        self.charge(Instant::now());
        self.stack.pop();
    }

    pub fn reset(&mut self) {
        *self = Timer::default();
    }
}
