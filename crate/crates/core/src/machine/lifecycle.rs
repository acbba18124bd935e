//! Counter ticks, COLD/CRITICAL/HOT transitions, S.emulator installation
//! and side-exit handling.

use std::rc::Rc;

use super::{Component, Machine, MachineError, SemResult};
use crate::compiler::{CodeAddr, PredId, PredState};
use crate::monitor::FlowKind;
use crate::specialized::{compile_trace, ExitKind, SEmulator};
use crate::specialized::Exit;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    Critical { pred: PredId, counter: u64 },
    Installed { pred: PredId, generation: u32 },
    SideExit {
        pred: PredId,
        kind: ExitKind,
        baddr: Option<CodeAddr>,
        generation: u32,
    },
    /// A GC exception was handled and the S.emulator resumed at op `op`,
    /// the heap check of the instruction at `addr`.
    GcResume {
        pred: PredId,
        addr: CodeAddr,
        op: usize,
        generation: u32,
    },
    RebuildStarted { pred: PredId },
    Pinned { pred: PredId },
    /// Recording exceeded the node cap.
    Abandoned { pred: PredId },
    /// The trace failed validation or lacked the entry.
    Rejected { pred: PredId },
}

impl Machine {
    /// Counter tick at a clause entry.
    pub(crate) fn tick_counter(&mut self, pred: PredId, enter: CodeAddr) {
        if pred == PredId::QUERY {
            return;
        }
        self.stats.head_entries += 1;
        if self.in_semulator {
            self.stats.specialized_head_entries += 1;
        }
        self.program.pred_mut(pred).call_counter += 1;
        if self.config.jit && !self.in_semulator {
            self.check_recording_budget(pred);
            self.maybe_transition(pred, enter);
        }
    }

    /// A recording whose predicate is no longer entered would keep markup
    /// on for good. After ten times `hot - critical` entries elsewhere it is compiled
    /// as it stands.
    fn check_recording_budget(&mut self, pred: PredId) {
        let Some(owner) = self.monitor.recording() else { return };
        if owner == pred {
            return;
        }
        self.foreign_ticks += 1;
        if self.foreign_ticks >= 10 * self.config.hot.saturating_sub(self.config.critical).max(1) {
            self.go_hot(owner);
        }
    }

    fn maybe_transition(&mut self, pred: PredId, enter: CodeAddr) {
        let (critical, hot) = (self.config.critical, self.config.hot.max(self.config.critical));
        let e = self.program.pred(pred);
        if e.pinned_default || e.call_counter < e.blacklisted_until {
            return;
        }
        let counter = e.call_counter;
        match e.state {
            PredState::Cold => {
                if counter >= critical && !self.monitor.enabled {
                    self.monitor.enable_markup(pred, enter);
                    self.make_critical(pred);
                }
            }
            PredState::Critical => {
                if self.monitor.recording() != Some(pred) {
                    // Deferred start, e.g. a rebuild requested while another
                    // predicate was being recorded.
                    if !self.monitor.enabled {
                        match self.program.pred(pred).semulator_record.clone() {
                            Some(r) => self.monitor.reopen(r, None),
                            None => self.monitor.enable_markup(pred, enter),
                        }
                        self.make_critical(pred);
                    }
                    return;
                }
                let e = self.program.pred(pred);
                if e.rebuild_pending || counter - e.critical_at >= hot - critical {
                    self.go_hot(pred);
                }
            }
            PredState::Hot => {}
        }
    }

    fn make_critical(&mut self, pred: PredId) {
        let e = self.program.pred_mut(pred);
        e.state = PredState::Critical;
        e.critical_at = e.call_counter;
        self.foreign_ticks = 0;
        let counter = e.call_counter;
        self.events.push(Event::Critical { pred, counter });
    }

    fn go_hot(&mut self, pred: PredId) {
        self.timer.enter(Component::MonitorTraceBuilder);
        let record = self.monitor.finalize_trace();
        self.timer.leave();
        self.timer.enter(Component::TraceCompiler);
        let generation = self.program.pred(pred).generation + 1;
        let sem = compile_trace(&self.program, pred, record, generation);
        self.timer.leave();
        let Some(sem) = sem else {
            self.reject(pred);
            return;
        };
        if self.config.validate {
            let v = sem.validate(&self.code);
            if !v.is_empty() {
                self.reject(pred);
                return;
            }
        }
        if self.config.trace_dump {
            self.debug_log.push(format!(
                "trace {} generation {}\n{}",
                self.program.pred_name(pred),
                generation,
                sem.record.dump(&self.code)
            ));
        }
        if self.config.disasm {
            self.debug_log.push(sem.disassemble(&self.program));
        }
        let e = self.program.pred_mut(pred);
        if e.rebuild_pending {
            self.stats.rebuilds += 1;
        }
        e.rebuild_pending = false;
        e.generation = generation;
        e.state = PredState::Hot;
        e.semulator_record = None;
        let sem = Rc::new(sem);
        e.semulator = Some(Rc::clone(&sem));
        self.installed.push(sem);
        self.stats.installs += 1;
        self.events.push(Event::Installed { pred, generation });
    }

    fn reject(&mut self, pred: PredId) {
        let hot = self.config.hot;
        let e = self.program.pred_mut(pred);
        e.state = PredState::Cold;
        e.rebuild_pending = false;
        e.blacklisted_until = e.call_counter + 10 * hot;
        self.events.push(Event::Rejected { pred });
    }

    /// Drops an over-long recording and blacklists its predicate for a while.
    pub(crate) fn abandon_recording(&mut self) {
        let Some(pred) = self.monitor.recording() else { return };
        self.monitor.abandon();
        let hot = self.config.hot;
        let e = self.program.pred_mut(pred);
        e.state = PredState::Cold;
        e.rebuild_pending = false;
        e.semulator = None;
        e.semulator_record = None;
        e.blacklisted_until = e.call_counter + 10 * hot;
        self.events.push(Event::Abandoned { pred });
    }

    /// The S.emulator to run for a call landing at `pred`'s entry, if any.
    pub(crate) fn select_emulator(&self, pred: PredId) -> Option<Rc<SEmulator>> {
        if self.monitor.enabled || !self.config.jit {
            return None;
        }
        let e = self.program.pred(pred);
        if e.state != PredState::Hot {
            return None;
        }
        e.semulator.clone()
    }

    pub(crate) fn run_semulator(&mut self, sem: Rc<SEmulator>) -> Result<SemResult, MachineError> {
        match self.enter_semulator(&sem)? {
            Exit::Completed => Ok(SemResult::Continue),
            Exit::CompletedFail => Ok(SemResult::Fail),
            Exit::Elementary { baddr, from } => {
                self.elementary_exit(&sem, baddr, from);
                Ok(SemResult::Continue)
            }
        }
    }

    pub(crate) fn note_gc_resume(&mut self, sem: &SEmulator, addr: CodeAddr, op: usize) {
        self.events.push(Event::SideExit {
            pred: sem.pred,
            kind: ExitKind::GcException,
            baddr: Some(addr),
            generation: sem.generation,
        });
        self.events.push(Event::GcResume {
            pred: sem.pred,
            addr,
            op,
            generation: sem.generation,
        });
    }

    fn elementary_exit(&mut self, sem: &SEmulator, baddr: Option<CodeAddr>, from: Option<(usize, FlowKind)>) {
        let pred = sem.pred;
        self.stats.side_exits_elementary += 1;
        self.events.push(Event::SideExit {
            pred,
            kind: ExitKind::ElementaryBlock,
            baddr,
            generation: sem.generation,
        });
        let max = self.config.max_rebuilds;
        let mutability = self.config.mutability;
        let e = self.program.pred_mut(pred);
        e.semulator = None;
        if !mutability || e.rebuilds >= max {
            e.pinned_default = true;
            e.state = PredState::Cold;
            self.events.push(Event::Pinned { pred });
            return;
        }
        e.rebuilds += 1;
        e.rebuild_pending = true;
        e.state = PredState::Critical;
        self.events.push(Event::RebuildStarted { pred });
        if self.monitor.enabled {
            e.semulator_record = Some(sem.record.clone());
        } else {
            self.monitor.reopen(sem.record.clone(), from);
            self.make_critical(pred);
        }
    }
}
