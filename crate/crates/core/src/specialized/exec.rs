//! The S.emulator dispatch loop.

use std::rc::Rc;

use super::{MicroOp, SEmulator};
use crate::compiler::CodeAddr;
use crate::machine::{Component, Flow, Machine, MachineError};
use crate::monitor::FlowKind;

/// Why an S.emulator returned control, with the rebuild address `BADDR`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Exit {
    /// Continue in the default emulator at `P`.
    Completed,
    /// The default emulator must backtrack.
    CompletedFail,
    /// Untraced behaviour. With `baddr` the instruction at that address
    /// restarts; otherwise `P` is already set. `from` links a rebuilt trace.
    Elementary {
        baddr: Option<CodeAddr>,
        from: Option<(usize, FlowKind)>,
    },
}

impl Machine {
    pub(crate) fn execute_semulator(&mut self, sem: &Rc<SEmulator>) -> Result<Exit, MachineError> {
        let code = Rc::clone(&self.code);
        let mark = self.cps.len();
        let mut pc = sem.head;
        loop {
            self.stats.dispatches += 1;
            match &sem.ops[pc] {
                MicroOp::GcGuard { addr, need } => {
                    let need = *need as usize;
                    if self.heap.top() + need > self.heap_capacity {
                        self.stats.side_exits_gc += 1;
                        self.reclaim_heap(need)?;
                        pc = sem.lookup(*addr).expect("clause entries are mapped");
                        self.note_gc_resume(sem, *addr, pc);
                    } else {
                        pc += 1;
                    }
                }
                MicroOp::Action { addr, block, fail } => match self.exec_block(*addr, &code[*addr], *block) {
                    Flow::Backtrack => pc = *fail,
                    _ => pc += 1,
                },
                MicroOp::Deref { addr, block } => {
                    self.deref_operand(&code[*addr], *block);
                    pc += 1;
                }
                MicroOp::Guard { addr, slot, arms } => {
                    self.stats.guard_evals += 1;
                    let t = self.opnd[*slot as usize].tag();
                    match arms.iter().find(|(s, _)| s.contains(t)) {
                        Some(&(_, target)) => pc = target,
                        None => {
                            self.p = *addr;
                            return Ok(Exit::Elementary {
                                baddr: Some(*addr),
                                from: None,
                            });
                        }
                    }
                }
                MicroOp::ModeGuard { addr, arms } => {
                    self.stats.guard_evals += 1;
                    match arms.iter().find(|(m, _)| *m == self.mode) {
                        Some(&(_, target)) => pc = target,
                        None => {
                            self.p = *addr;
                            return Ok(Exit::Elementary {
                                baddr: Some(*addr),
                                from: None,
                            });
                        }
                    }
                }
                MicroOp::Switch { addr, arms, fail } => match self.exec_block(*addr, &code[*addr], 2) {
                    Flow::Backtrack => pc = *fail,
                    _ => match arms.iter().find(|(a, _)| *a == self.p) {
                        Some(&(_, target)) => pc = target,
                        None => {
                            self.p = *addr;
                            return Ok(Exit::Elementary {
                                baddr: Some(*addr),
                                from: None,
                            });
                        }
                    },
                },
                MicroOp::SetP(a) => {
                    self.p = *a;
                    pc += 1;
                }
                MicroOp::Return { arms } => {
                    let p = self.p;
                    match arms.iter().find(|(a, _)| *a == p).map(|&(_, t)| t).or_else(|| sem.lookup(p)) {
                        Some(t) => pc = t,
                        None => return Ok(Exit::Completed),
                    }
                }
                MicroOp::Backtrack { .. } => {
                    if self.cps.len() <= mark {
                        return Ok(Exit::CompletedFail);
                    }
                    self.backtrack();
                    match sem.lookup(self.p) {
                        Some(t) => pc = t,
                        None => return Ok(Exit::Completed),
                    }
                }
                MicroOp::SideExit { from } => {
                    return Ok(Exit::Elementary {
                        baddr: None,
                        from: from.map(|n| (n, FlowKind::Next)),
                    });
                }
                MicroOp::Jump(t) => pc = *t,
            }
        }
    }

    /// Runs `sem` from its head with the timer and flags set.
    pub(crate) fn enter_semulator(&mut self, sem: &Rc<SEmulator>) -> Result<Exit, MachineError> {
        self.in_semulator = true;
        self.stats.semulator_runs += 1;
        self.timer.enter(Component::SEmulator);
        let r = self.execute_semulator(sem);
        self.timer.leave();
        self.in_semulator = false;
        r
    }
}
