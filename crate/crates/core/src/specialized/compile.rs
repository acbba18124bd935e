//! Trace compilation.
//!
//! Code is laid out depth-first from the head. Each node may be compiled in
//! a few versions keyed by what is known about register tags and the
//! read/write mode on entry; a version is only reached along static edges
//! that establish its knowledge, so guards it omits are proven redundant.
//! Dynamic entries (returns, backtracking, the head) use the version that
//! assumes nothing.

use std::collections::HashMap;

use super::{GuardSite, MicroOp, SEmulator, NO_ENTRY};
use crate::compiler::{CodeAddr, Const, Instr, Label, Operand, PredId, Program, Reg};
use crate::machine::{instruction_metadata, BlockKind, EdgeCond, Mode, Role, Target};
use crate::monitor::{FlowKind, TraceRecord};
use crate::term::{Tag, TagSet};

/// Versions per node beyond the generic one.
const MAX_VERSIONS: usize = 4;
const MAX_Y: usize = 32;
const NONE: usize = usize::MAX;
/// Pseudo block: the instruction finished through a test edge.
const END: u8 = u8::MAX;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Know {
    regs: Vec<TagSet>,
    mode: Option<Mode>,
}

impl Know {
    fn top(n: usize) -> Know {
        Know {
            regs: vec![TagSet::ALL; n],
            mode: None,
        }
    }

    fn is_top(&self) -> bool {
        self.mode.is_none() && self.regs.iter().all(|&s| s == TagSet::ALL)
    }

    fn drop_ref(&mut self) {
        for s in self.regs.iter_mut() {
            if s.contains(Tag::Ref) {
                *s = TagSet::ALL;
            }
        }
    }
}

struct Compiler<'a> {
    code: &'a [Instr],
    program: &'a Program,
    record: &'a TraceRecord,
    nx: usize,
    ops: Vec<MicroOp>,
    labels: Vec<usize>,
    versions: HashMap<(CodeAddr, u8, Know), usize>,
    version_count: HashMap<(CodeAddr, u8), usize>,
    queue: Vec<(CodeAddr, u8, Know, usize)>,
    backtracks: HashMap<Option<usize>, usize>,
    sites: Vec<GuardSite>,
}

/// What a var-check block tests.
enum Tested {
    Reg(usize),
    Const(TagSet),
    Heap,
}

impl<'a> Compiler<'a> {
    fn slot(&self, r: Reg) -> Option<usize> {
        match r {
            Reg::X(i) => Some(i as usize),
            Reg::Y(i) if (i as usize) <= MAX_Y => Some(self.nx + i as usize),
            Reg::Y(_) => None,
        }
    }

    fn top(&self) -> Know {
        Know::top(self.nx + MAX_Y + 1)
    }

    fn new_label(&mut self) -> usize {
        self.labels.push(NONE);
        self.labels.len() - 1
    }

    fn bind_here(&mut self, label: usize) {
        self.labels[label] = self.ops.len();
    }

    /// Label of `(addr, block)` compiled under `know`, queueing it if new.
    fn label(&mut self, addr: CodeAddr, block: u8, know: Know) -> usize {
        let know = self.widen(addr, block, know);
        if let Some(&l) = self.versions.get(&(addr, block, know.clone())) {
            return l;
        }
        let l = self.new_label();
        self.register(addr, block, &know, l);
        self.queue.push((addr, block, know, l));
        l
    }

    fn widen(&self, addr: CodeAddr, block: u8, know: Know) -> Know {
        if know.is_top() || self.versions.contains_key(&(addr, block, know.clone())) {
            return know;
        }
        if self.version_count.get(&(addr, block)).copied().unwrap_or(0) >= MAX_VERSIONS {
            return self.top();
        }
        know
    }

    fn register(&mut self, addr: CodeAddr, block: u8, know: &Know, l: usize) {
        if !know.is_top() {
            *self.version_count.entry((addr, block)).or_default() += 1;
        }
        self.versions.insert((addr, block, know.clone()), l);
    }

    /// Either jumps to an existing version or binds a new one here and
    /// returns the state to keep compiling inline.
    fn continue_to(&mut self, addr: CodeAddr, block: u8, know: Know) -> Option<(CodeAddr, u8, Know)> {
        let know = self.widen(addr, block, know);
        if let Some(&l) = self.versions.get(&(addr, block, know.clone())) {
            self.ops.push(MicroOp::Jump(l));
            return None;
        }
        let l = self.new_label();
        self.register(addr, block, &know, l);
        self.bind_here(l);
        Some((addr, block, know))
    }

    fn drain(&mut self) {
        while let Some((addr, b, k, l)) = self.queue.pop() {
            if self.labels[l] != NONE {
                continue;
            }
            self.bind_here(l);
            self.run(addr, b, k);
        }
    }

    fn node_id(&self, addr: CodeAddr, block: u8) -> Option<usize> {
        self.record.node_id(addr, block)
    }

    /// Shared out-of-line backtrack op for failures at `from`.
    fn backtrack_label(&mut self, addr: CodeAddr, from: Option<usize>) -> usize {
        let top = self.top();
        // Alternatives seen from this instruction get dynamic entries.
        let mut alts = Vec::new();
        for n in &self.record.nodes {
            if n.addr == addr {
                for e in n.successors(FlowKind::Backtrack) {
                    alts.push(self.record.nodes[e.to].addr);
                }
            }
        }
        for a in alts {
            self.label(a, 0, top.clone());
        }
        if let Some(&l) = self.backtracks.get(&from) {
            return l;
        }
        let l = self.new_label();
        self.backtracks.insert(from, l);
        l
    }

    fn tested(&self, ins: &Instr, b: u8) -> Tested {
        let op = |o: Operand| match o {
            Operand::Reg(r) => self.slot(r).map_or(Tested::Heap, Tested::Reg),
            Operand::Int(_) => Tested::Const(TagSet::INT),
        };
        match ins {
            Instr::GetConstant { arg, .. } | Instr::GetNil { arg } | Instr::GetStructure { arg, .. } | Instr::GetList { arg } => {
                Tested::Reg(*arg as usize)
            }
            Instr::SwitchOnTerm(_) => Tested::Reg(1),
            Instr::Arith { a, b: ob, .. } | Instr::Compare { a, b: ob, .. } => op(if b == 0 { *a } else { *ob }),
            Instr::Is { lhs, val } => {
                if b == 0 {
                    op(*val)
                } else {
                    op(Operand::Reg(*lhs))
                }
            }
            Instr::TypeTest { reg, .. } => op(Operand::Reg(*reg)),
            _ => Tested::Heap,
        }
    }

    /// Where the instruction goes after its var check sees dereferenced tag
    /// `t`, looking through any tag tests.
    fn walk(&self, ins: &Instr, vc: u8, t: Tag) -> Target {
        let cfg = instruction_metadata(ins.opcode());
        let pick = |b: u8| -> Target {
            for (cond, target) in &cfg.block(b).successors {
                let hit = match cond {
                    EdgeCond::Tags(s) => s.contains(t),
                    EdgeCond::Accepted | EdgeCond::Rejected => {
                        let Instr::TypeTest { check, .. } = ins else { unreachable!() };
                        check.accepts().contains(t) == (*cond == EdgeCond::Accepted)
                    }
                    _ => false,
                };
                if hit {
                    return *target;
                }
            }
            unreachable!("{}: no edge for {t:?}", cfg.block(b).id)
        };
        // The deref loop's edges agree with the var check's on bound values.
        let mut target = pick(vc);
        if let Target::Block(d) = target {
            if cfg.block(d).role == Role::Deref {
                target = pick(d);
            }
        }
        while let Target::Block(k) = target {
            if cfg.block(k).role != Role::TagTest {
                break;
            }
            target = pick(k);
        }
        target
    }

    fn set(&self, know: &mut Know, r: Reg, s: TagSet) {
        if let Some(i) = self.slot(r) {
            know.regs[i] = s;
        }
    }

    fn get(&self, know: &Know, r: Reg) -> TagSet {
        self.slot(r).map_or(TagSet::ALL, |i| know.regs[i])
    }

    fn clear_y(&self, know: &mut Know) {
        for s in &mut know.regs[self.nx + 1..] {
            *s = TagSet::ALL;
        }
    }

    /// Knowledge after body block `b` of `ins` ran.
    fn transfer(&self, mut k: Know, ins: &Instr, b: u8) -> Know {
        let x = |i: u16| Reg::X(i);
        let ctag = |c: &Const| TagSet::of(c.cell().tag());
        if instruction_metadata(ins.opcode()).block(b).role == Role::Bind {
            k.drop_ref();
        }
        match (ins, b) {
            (Instr::Allocate { .. } | Instr::Deallocate, _) => self.clear_y(&mut k),
            (Instr::Call { .. } | Instr::Execute { .. }, _) => k.mode = None,
            (Instr::GetVariable { reg, arg }, _) => {
                let s = self.get(&k, x(*arg));
                self.set(&mut k, *reg, s);
            }
            (Instr::GetConstant { c, arg }, 2) => self.set(&mut k, x(*arg), ctag(c)),
            (Instr::GetNil { arg }, 2) => self.set(&mut k, x(*arg), TagSet::NIL),
            (Instr::GetStructure { arg, .. }, 2) => {
                self.set(&mut k, x(*arg), TagSet::STRUCT);
                k.mode = Some(Mode::Write);
            }
            (Instr::GetList { arg }, 2) => {
                self.set(&mut k, x(*arg), TagSet::LIST);
                k.mode = Some(Mode::Write);
            }
            (Instr::GetStructure { .. } | Instr::GetList { .. }, 4) => k.mode = Some(Mode::Read),
            (Instr::UnifyVariable { reg }, 1) => self.set(&mut k, *reg, TagSet::ALL),
            (Instr::UnifyVariable { reg }, 2) => self.set(&mut k, *reg, TagSet::REF),
            (Instr::PutVariable { reg, arg }, _) => {
                self.set(&mut k, *reg, TagSet::REF);
                if let Some(a) = arg {
                    self.set(&mut k, x(*a), TagSet::REF);
                }
            }
            (Instr::PutValue { reg, arg }, _) => {
                let s = self.get(&k, *reg);
                self.set(&mut k, x(*arg), s);
            }
            (Instr::PutConstant { c, arg }, _) => self.set(&mut k, x(*arg), ctag(c)),
            (Instr::PutNil { arg }, _) => self.set(&mut k, x(*arg), TagSet::NIL),
            (Instr::PutStructure { arg, .. }, _) => {
                self.set(&mut k, x(*arg), TagSet::STRUCT);
                k.mode = Some(Mode::Write);
            }
            (Instr::PutList { arg }, _) => {
                self.set(&mut k, x(*arg), TagSet::LIST);
                k.mode = Some(Mode::Write);
            }
            (Instr::Arith { dst, .. }, 6) => self.set(&mut k, *dst, TagSet::INT),
            (Instr::Is { lhs, .. }, 5) => self.set(&mut k, *lhs, TagSet::INT),
            _ => {}
        }
        k
    }

    /// Static `P` after the instruction at `addr` completes normally.
    fn static_next(&self, addr: CodeAddr, ins: &Instr) -> Option<CodeAddr> {
        match ins {
            Instr::Call { pred } | Instr::Execute { pred } => Some(self.program.pred(*pred).entry),
            Instr::Try { clause, .. } | Instr::Retry { clause } | Instr::Trust { clause } => Some(*clause),
            Instr::Proceed | Instr::SwitchOnTerm(_) | Instr::Fail | Instr::Answer { .. } => None,
            _ => Some(addr + 1),
        }
    }

    /// Compiles inline from `(addr, block)` until control reaches an
    /// already compiled version or leaves through a dynamic transfer.
    fn run(&mut self, mut addr: CodeAddr, mut b: u8, mut k: Know) {
        loop {
            let next = if b == END {
                self.instruction_end(addr, None, k)
            } else {
                self.step(addr, b, k)
            };
            match next {
                Some((a, nb, nk)) => {
                    addr = a;
                    b = nb;
                    k = nk;
                }
                None => return,
            }
        }
    }

    fn instruction_end(&mut self, addr: CodeAddr, from: Option<usize>, k: Know) -> Option<(CodeAddr, u8, Know)> {
        let ins = &self.code[addr];
        if matches!(ins, Instr::TypeTest { .. }) && from.is_none() {
            self.ops.push(MicroOp::SetP(addr + 1));
        }
        if let Instr::Proceed = ins {
            let top = self.top();
            let mut arms = Vec::new();
            let targets: Vec<CodeAddr> = self
                .node_id(addr, 0)
                .map(|n| self.record.nodes[n].successors(FlowKind::Next).map(|e| self.record.nodes[e.to].addr).collect())
                .unwrap_or_default();
            for t in targets {
                let l = self.label(t, 0, top.clone());
                arms.push((t, l));
            }
            self.ops.push(MicroOp::Return { arms });
            return None;
        }
        let t = self.static_next(addr, ins).expect("dynamic transfer handled elsewhere");
        if self.node_id(t, 0).is_some() {
            self.continue_to(t, 0, k)
        } else {
            let from = from.or_else(|| self.last_node_of(addr));
            self.ops.push(MicroOp::SideExit { from });
            None
        }
    }

    fn last_node_of(&self, addr: CodeAddr) -> Option<usize> {
        let cfg = instruction_metadata(self.code[addr].opcode());
        (0..cfg.blocks.len() as u8)
            .rev()
            .filter(|&b| cfg.has_edge(b, Target::Next))
            .find_map(|b| self.node_id(addr, b))
    }

    /// Emits block `b` and returns where to continue inline.
    fn step(&mut self, addr: CodeAddr, b: u8, k: Know) -> Option<(CodeAddr, u8, Know)> {
        let code = self.code;
        let ins = &code[addr];
        let cfg = instruction_metadata(ins.opcode());
        let blk = cfg.block(b);
        match blk.role {
            Role::VarCheck => return self.fused_test(addr, b, k),
            Role::Deref | Role::TagTest => {
                // Never entered directly; restart the instruction if it is.
                self.ops.push(MicroOp::Guard {
                    addr,
                    slot: 0,
                    arms: Vec::new(),
                });
                return None;
            }
            Role::ModeSwitch => {
                let pick = |m: Mode| {
                    blk.successors
                        .iter()
                        .find_map(|(c, t)| match (c, t) {
                            (EdgeCond::Mode(mm), Target::Block(n)) if *mm == m => Some(*n),
                            _ => None,
                        })
                        .expect("mode edge")
                };
                if let Some(m) = k.mode {
                    return self.continue_to(addr, pick(m), k);
                }
                let modes = self.node_id(addr, b).map(|n| self.record.nodes[n].modes.clone()).unwrap_or_default();
                let mut arms = Vec::new();
                for m in modes {
                    let mut km = k.clone();
                    km.mode = Some(m);
                    let l = self.label(addr, pick(m), km);
                    arms.push((m, l));
                }
                self.ops.push(MicroOp::ModeGuard { addr, arms });
                return None;
            }
            Role::Body | Role::Bind => {}
        }
        if blk.kind == BlockKind::GcCheck {
            let Instr::Enter { heap, .. } = ins else { unreachable!() };
            self.ops.push(MicroOp::GcGuard { addr, need: *heap });
            return self.continue_to(addr, 1, k);
        }
        if blk.kind == BlockKind::Multiway {
            return self.switch(addr, b, k);
        }
        let from = self.node_id(addr, b);
        let can_fail = blk.successors.iter().any(|(_, t)| *t == Target::Backtrack);
        let fail = if can_fail { self.backtrack_label(addr, from) } else { NONE };
        self.ops.push(MicroOp::Action { addr, block: b, fail });
        let ok = blk.successors.iter().find(|(_, t)| *t != Target::Backtrack).map(|(_, t)| *t);
        let k = self.transfer(k, ins, b);
        match ok {
            Some(Target::Block(n)) => self.continue_to(addr, n, k),
            Some(Target::Next) => self.instruction_end(addr, from, k),
            Some(_) => unreachable!("body block with exception edge"),
            // Only backtracks; the action always takes `fail`.
            None => None,
        }
    }

    fn fused_test(&mut self, addr: CodeAddr, vc: u8, k: Know) -> Option<(CodeAddr, u8, Know)> {
        let code = self.code;
        let ins = &code[addr];
        let cfg = instruction_metadata(ins.opcode());
        let slot = match ins {
            Instr::Arith { .. } | Instr::Compare { .. } | Instr::Is { .. } if vc >= 3 => 1,
            _ => 0,
        };
        self.ops.push(MicroOp::Deref { addr, block: vc });
        let (reg, known) = match self.tested(ins, vc) {
            Tested::Reg(i) => (Some(i), k.regs[i]),
            Tested::Const(s) => (None, s),
            Tested::Heap => (None, TagSet::ALL),
        };
        let dl = cfg
            .block(vc)
            .successors
            .iter()
            .find_map(|(c, t)| match (c, t) {
                (EdgeCond::Tags(s), Target::Block(n)) if *s == TagSet::REF => Some(*n),
                _ => None,
            })
            .expect("var check without deref loop");
        let mut observed = TagSet::EMPTY;
        if let Some(n) = self.node_id(addr, vc) {
            observed = observed.union(self.record.nodes[n].observed.intersect(TagSet::NON_REF));
        }
        if let Some(n) = self.node_id(addr, dl) {
            observed = observed.union(self.record.nodes[n].observed);
        }
        let mut arms: Vec<(TagSet, Target)> = Vec::new();
        for t in observed.intersect(known).iter() {
            let target = self.walk(ins, vc, t);
            match arms.iter_mut().find(|(_, tt)| *tt == target) {
                Some((s, _)) => *s = s.union(TagSet::of(t)),
                None => arms.push((TagSet::of(t), target)),
            }
        }
        let arm_know = |s: TagSet| {
            let mut ka = k.clone();
            if let Some(i) = reg {
                ka.regs[i] = s;
            }
            ka
        };
        if arms.len() == 1 && known.is_subset(arms[0].0) {
            let (s, target) = arms[0];
            self.sites.push(GuardSite::Proven {
                addr,
                block: vc,
                known,
                arm: s,
            });
            let ka = arm_know(known);
            return match target {
                Target::Block(n) => self.continue_to(addr, n, ka),
                Target::Next => self.continue_to(addr, END, ka),
                Target::Backtrack => {
                    let from = self.node_id(addr, vc);
                    let l = self.backtrack_label(addr, from);
                    self.ops.push(MicroOp::Jump(l));
                    None
                }
                Target::HeapException => unreachable!(),
            };
        }
        self.sites.push(GuardSite::Runtime { addr, block: vc });
        let mut out = Vec::new();
        for (s, target) in arms {
            let ka = arm_know(s);
            let l = match target {
                Target::Block(n) => self.label(addr, n, ka),
                Target::Next => self.label(addr, END, ka),
                Target::Backtrack => {
                    let from = self.node_id(addr, vc);
                    self.backtrack_label(addr, from)
                }
                Target::HeapException => unreachable!(),
            };
            out.push((s, l));
        }
        self.ops.push(MicroOp::Guard {
            addr,
            slot,
            arms: out,
        });
        None
    }

    fn switch(&mut self, addr: CodeAddr, b: u8, k: Know) -> Option<(CodeAddr, u8, Know)> {
        let Instr::SwitchOnTerm(table) = &self.code[addr] else { unreachable!() };
        let from = self.node_id(addr, b);
        let fail = self.backtrack_label(addr, from);
        let targets: Vec<CodeAddr> = from
            .map(|n| self.record.nodes[n].successors(FlowKind::Next).map(|e| self.record.nodes[e.to].addr).collect())
            .unwrap_or_default();
        let mut arms = Vec::new();
        for t in targets {
            let label = Label::Addr(t);
            let mut tags = TagSet::EMPTY;
            if table.var == label {
                tags = tags.union(TagSet::REF);
            }
            for (c, l) in &table.consts {
                if *l == label {
                    tags = tags.union(TagSet::of(c.cell().tag()));
                }
            }
            if table.const_default == label {
                tags = tags.union(TagSet::ATOMIC);
            }
            if table.list == label {
                tags = tags.union(TagSet::LIST);
            }
            if table.struct_default == label || table.structs.iter().any(|(_, l)| *l == label) {
                tags = tags.union(TagSet::STRUCT);
            }
            let mut kt = k.clone();
            kt.regs[1] = kt.regs[1].intersect(tags);
            let l = self.label(t, 0, kt);
            arms.push((t, l));
        }
        self.ops.push(MicroOp::Switch { addr, arms, fail });
        None
    }
}

/// Compiles a finalized trace into an S.emulator for `pred`. Returns `None`
/// when the trace lacks the predicate's entry.
pub fn compile_trace(program: &Program, pred: PredId, record: TraceRecord, generation: u32) -> Option<SEmulator> {
    let entry = program.pred(pred).entry;
    record.node_id(entry, 0)?;
    let mut c = Compiler {
        code: &program.code,
        program,
        record: &record,
        nx: program.num_x.max(1),
        ops: Vec::new(),
        labels: Vec::new(),
        versions: HashMap::new(),
        version_count: HashMap::new(),
        queue: Vec::new(),
        backtracks: HashMap::new(),
        sites: Vec::new(),
    };
    let top = c.top();
    let head = c.label(entry, 0, top.clone());
    c.drain();
    // Every clause entry gets a generic version for resuming after a GC
    // exception, compiled last so the specialized versions come first.
    let enters: Vec<CodeAddr> = record
        .nodes
        .iter()
        .filter(|n| n.block == 0 && matches!(program.code[n.addr], Instr::Enter { .. }))
        .map(|n| n.addr)
        .collect();
    for a in enters {
        c.label(a, 0, top.clone());
    }
    c.drain();
    let mut bts: Vec<(Option<usize>, usize)> = c.backtracks.iter().map(|(f, l)| (*f, *l)).collect();
    bts.sort();
    for (from, l) in bts {
        c.bind_here(l);
        c.ops.push(MicroOp::Backtrack { from });
    }
    let labels = c.labels;
    let mut ops = c.ops;
    for op in ops.iter_mut() {
        for t in op.targets_mut() {
            if *t != NONE {
                *t = labels[*t];
            }
        }
    }
    let mut entry_map = vec![NO_ENTRY; program.code.len()];
    for ((addr, b, k), l) in &c.versions {
        if *b == 0 && k.is_top() {
            entry_map[*addr] = labels[*l] as u32;
        }
    }
    Some(SEmulator {
        pred,
        generation,
        head: labels[head],
        ops,
        entry_map,
        sites: c.sites,
        record,
    })
}
