//! S.emulators: micro-op programs compiled from one recorded trace.
//!
//! Test blocks of the trace become guards that exit back to the default
//! emulator on tags never observed; everything else reuses the default
//! block bodies.

mod compile;
mod exec;

use std::fmt::Write;

use crate::compiler::{CodeAddr, Instr, PredId, Program};
use crate::machine::Mode;
use crate::monitor::{validate_record, FlowKind, TraceRecord, TraceViolation};
use crate::term::TagSet;

pub use compile::compile_trace;
pub(crate) use exec::Exit;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MicroOp {
    /// Heap check of a clause entry. Failing raises a GC exception; the
    /// S.emulator reclaims and resumes at the entry's mapped generic version.
    GcGuard { addr: CodeAddr, need: u32 },
    /// Runs one block body; a backtrack goes to `fail`.
    Action { addr: CodeAddr, block: u8, fail: usize },
    /// Var check and dereference loop fused: loads the dereferenced operand.
    Deref { addr: CodeAddr, block: u8 },
    /// Branches on the operand's tag; an unlisted tag is a side exit that
    /// restarts the instruction at `addr` in the default emulator.
    Guard { addr: CodeAddr, slot: u8, arms: Vec<(TagSet, usize)> },
    ModeGuard { addr: CodeAddr, arms: Vec<(Mode, usize)> },
    /// Runs the switch body, then continues at the arm for the selected
    /// clause address. Unrecorded targets exit to the default emulator.
    Switch { addr: CodeAddr, arms: Vec<(CodeAddr, usize)>, fail: usize },
    SetP(CodeAddr),
    /// Continues at the continuation `P` if it is traced, else completes.
    Return { arms: Vec<(CodeAddr, usize)> },
    /// Restores the youngest choice point and continues at its alternative.
    /// Failing below the entry choice point completes with failure.
    Backtrack { from: Option<usize> },
    /// Static transfer to code outside the trace.
    SideExit { from: Option<usize> },
    Jump(usize),
}

impl MicroOp {
    pub fn targets_mut(&mut self) -> Vec<&mut usize> {
        match self {
            MicroOp::Action { fail, .. } => vec![fail],
            MicroOp::Guard { arms, .. } => arms.iter_mut().map(|(_, t)| t).collect(),
            MicroOp::ModeGuard { arms, .. } => arms.iter_mut().map(|(_, t)| t).collect(),
            MicroOp::Switch { arms, fail, .. } => {
                let mut v: Vec<&mut usize> = arms.iter_mut().map(|(_, t)| t).collect();
                v.push(fail);
                v
            }
            MicroOp::Return { arms } => arms.iter_mut().map(|(_, t)| t).collect(),
            MicroOp::Jump(t) => vec![t],
            _ => Vec::new(),
        }
    }
}

/// Exit reason register `K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExitKind {
    /// Control left the trace through a dynamic transfer; not a failure of
    /// specialization.
    Completed,
    /// An untraced edge was taken.
    ElementaryBlock,
    GcException,
}

/// How a pruned type test is covered in the compiled code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GuardSite {
    Runtime { addr: CodeAddr, block: u8 },
    /// Elided: the operand's known tags all take one edge.
    Proven { addr: CodeAddr, block: u8, known: TagSet, arm: TagSet },
}

impl GuardSite {
    pub fn addr(&self) -> CodeAddr {
        match *self {
            GuardSite::Runtime { addr, .. } | GuardSite::Proven { addr, .. } => addr,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SEmulator {
    pub pred: PredId,
    pub generation: u32,
    pub ops: Vec<MicroOp>,
    pub head: usize,
    /// Op index for each traced instruction address, valid for any machine
    /// state reaching that address.
    pub entry_map: Vec<u32>,
    pub sites: Vec<GuardSite>,
    pub record: TraceRecord,
}

const NO_ENTRY: u32 = u32::MAX;

impl SEmulator {
    #[inline]
    pub fn lookup(&self, addr: CodeAddr) -> Option<usize> {
        match self.entry_map.get(addr) {
            Some(&i) if i != NO_ENTRY => Some(i as usize),
            _ => None,
        }
    }

    pub fn disassemble(&self, program: &Program) -> String {
        let mut out = format!(
            "s.emulator {} generation {} ({} ops, head @{})\n",
            program.pred_name(self.pred),
            self.generation,
            self.ops.len(),
            self.head
        );
        for (i, op) in self.ops.iter().enumerate() {
            let (kind, detail, exit) = op_columns(op);
            let _ = writeln!(out, "{i:5} {kind:<10} {detail:<40} {exit}");
        }
        out
    }

    /// Structural checks over the trace and the code compiled from it.
    pub fn validate(&self, code: &[Instr]) -> Vec<TraceViolation> {
        let mut out = validate_record(&self.record, code);
        let compiled: std::collections::HashSet<CodeAddr> = self.ops.iter().filter_map(op_addr).collect();
        for n in &self.record.nodes {
            if n.kind != crate::machine::BlockKind::TypeTest || !compiled.contains(&n.addr) {
                continue;
            }
            let cfg = crate::machine::instruction_metadata(code[n.addr].opcode());
            let pruned = cfg.block(n.block).successors.iter().any(|(_, t)| {
                !n.edges.iter().any(|e| match (e.flow, t) {
                    (FlowKind::Intra, crate::machine::Target::Block(b)) => self.record.nodes[e.to].block == *b,
                    (FlowKind::Next, crate::machine::Target::Next) => true,
                    (FlowKind::Backtrack, crate::machine::Target::Backtrack) => true,
                    _ => false,
                })
            });
            let sites: Vec<&GuardSite> = self.sites.iter().filter(|s| s.addr() == n.addr).collect();
            let proven_ok = sites.iter().all(|s| match s {
                GuardSite::Proven { known, arm, .. } => known.is_subset(*arm),
                GuardSite::Runtime { .. } => true,
            });
            if pruned && (sites.is_empty() || !proven_ok) {
                out.push(TraceViolation::UnguardedTest {
                    addr: n.addr,
                    block: n.block,
                });
            }
        }
        for n in &self.record.nodes {
            let Instr::SwitchOnTerm(table) = &code[n.addr] else { continue };
            if n.kind != crate::machine::BlockKind::Multiway || !compiled.contains(&n.addr) {
                continue;
            }
            let targets: Vec<CodeAddr> = table
                .targets()
                .into_iter()
                .filter_map(|l| match l {
                    crate::compiler::Label::Addr(a) => Some(a),
                    crate::compiler::Label::Fail => None,
                })
                .collect();
            let complete = self.ops.iter().all(|op| match op {
                MicroOp::Switch { addr, arms, fail } if *addr == n.addr => {
                    arms.iter().all(|(a, _)| targets.contains(a))
                        && matches!(self.ops.get(*fail), Some(MicroOp::Backtrack { .. }))
                }
                _ => true,
            }) && self.ops.iter().any(|op| matches!(op, MicroOp::Switch { addr, .. } if *addr == n.addr));
            if !complete {
                out.push(TraceViolation::IncompleteSwitch { addr: n.addr });
            }
        }
        out
    }
}

fn op_addr(op: &MicroOp) -> Option<CodeAddr> {
    match *op {
        MicroOp::GcGuard { addr, .. }
        | MicroOp::Action { addr, .. }
        | MicroOp::Deref { addr, .. }
        | MicroOp::Guard { addr, .. }
        | MicroOp::ModeGuard { addr, .. }
        | MicroOp::Switch { addr, .. } => Some(addr),
        _ => None,
    }
}

/// Kind, detail and exit target of one op.
fn op_columns(op: &MicroOp) -> (&'static str, String, String) {
    let arms_at = |arms: &[(CodeAddr, usize)]| arms.iter().map(|(a, t)| format!("@{a}->{t}")).collect::<Vec<_>>().join(" ");
    match op {
        MicroOp::GcGuard { addr, need } => ("gc_guard", format!("@{addr} need {need}"), "gc".to_owned()),
        MicroOp::Action { addr, block, fail } => {
            let exit = if *fail == usize::MAX { "-".to_owned() } else { format!("fail->{fail}") };
            ("action", format!("@{addr}.{block}"), exit)
        }
        MicroOp::Deref { addr, block } => ("deref", format!("@{addr}.{block}"), "-".to_owned()),
        MicroOp::Guard { addr, slot, arms } => {
            let arms: Vec<String> = arms.iter().map(|(s, t)| format!("{s}->{t}")).collect();
            ("guard", format!("opnd{slot} [{}]", arms.join(" ")), format!("exit@{addr}"))
        }
        MicroOp::ModeGuard { addr, arms } => {
            let arms: Vec<String> = arms.iter().map(|(m, t)| format!("{m:?}->{t}")).collect();
            ("mode_guard", format!("[{}]", arms.join(" ")), format!("exit@{addr}"))
        }
        MicroOp::Switch { addr, arms, fail } => ("switch", format!("@{addr} [{}] fail->{fail}", arms_at(arms)), format!("exit@{addr}")),
        MicroOp::SetP(a) => ("set_p", format!("@{a}"), "-".to_owned()),
        MicroOp::Return { arms } => ("return", format!("[{}]", arms_at(arms)), "complete".to_owned()),
        MicroOp::Backtrack { .. } => ("backtrack", String::new(), "complete".to_owned()),
        MicroOp::SideExit { .. } => ("side_exit", String::new(), "exit@P".to_owned()),
        MicroOp::Jump(t) => ("jump", format!("{t}"), "-".to_owned()),
    }
}

#[cfg(test)]
mod tests;
