//! The default emulator.
//!
//! Every instruction runs by walking its basic-block graph (see [`cfg`]).
//! The same block bodies are reused by S.emulators, which is what keeps the
//! two execution modes in agreement.

pub mod cfg;
mod gc;
mod lifecycle;
mod render;
pub mod stats;

use std::rc::Rc;

use thiserror::Error;

use crate::compiler::{CodeAddr, CompileError, Instr, Label, Operand, PredId, Program, Query, Reg};
use crate::monitor::Monitor;
use crate::specialized::SEmulator;
use crate::symbol::Functor;
use crate::term::{bind_cell, deref_cell, unify_cells, Addr, Cell, Heap, Tag, Trail, TrailMark};

pub use cfg::{instruction_metadata, BlockId, BlockKind, EdgeCond, InstructionCfg, Mode, Role, Target};
pub use lifecycle::Event;
pub use stats::{Component, RunStats, TimingBreakdown};

#[derive(Debug, Clone)]
pub struct Config {
    pub critical: u64,
    pub hot: u64,
    /// Specialization enabled at all.
    pub jit: bool,
    /// Rebuild S.emulators after elementary side exits. Without it the first
    /// such exit demotes the predicate to the default emulator for good.
    pub mutability: bool,
    pub heap_cells: usize,
    pub max_heap_cells: usize,
    /// Check every executed block transition against the static graphs.
    pub validate: bool,
    pub trace_dump: bool,
    pub disasm: bool,
    pub max_rebuilds: u32,
    pub trace_cap: usize,
}

pub const DEFAULT_HEAP_CELLS: usize = 1 << 20;

impl Default for Config {
    fn default() -> Self {
        Config {
            critical: 500,
            hot: 1000,
            jit: true,
            mutability: true,
            heap_cells: DEFAULT_HEAP_CELLS,
            max_heap_cells: 1 << 28,
            validate: cfg!(debug_assertions),
            trace_dump: false,
            disasm: false,
            max_rebuilds: 8,
            trace_cap: 4096,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MachineError {
    #[error("heap exhausted: {live} live cells exceed the limit of {limit}")]
    HeapExhausted { live: usize, limit: usize },
    #[error(transparent)]
    Compile(#[from] CompileError),
}

/// Outcome of one block body.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flow {
    Goto(u8),
    /// Instruction finished; `P` holds the next address.
    Next,
    Backtrack,
    /// Heap check failed; the instruction restarts after reclamation.
    Gc,
}

/// What a test block saw, for the monitor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Observed {
    None,
    Tag(Tag),
    Mode(Mode),
}

#[derive(Debug, Clone)]
pub(crate) struct Frame {
    pub ys: Vec<Cell>,
    pub cp: CodeAddr,
    pub ce: Option<usize>,
    pub cut_b: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct ChoicePoint {
    pub args: Vec<Cell>,
    pub e: Option<usize>,
    pub frames_len: usize,
    pub cp: CodeAddr,
    pub b0: usize,
    pub h: Addr,
    pub mark: TrailMark,
    pub alt: CodeAddr,
}

const HALT: CodeAddr = usize::MAX;

pub struct Machine {
    pub program: Program,
    pub config: Config,
    pub stats: RunStats,
    pub timer: stats::Timer,
    pub monitor: Monitor,
    pub events: Vec<Event>,
    /// Trace dumps and disassemblies produced while running, when enabled.
    pub debug_log: Vec<String>,
    /// Every S.emulator installed so far, superseded ones included.
    pub installed: Vec<Rc<SEmulator>>,
    pub(crate) code: Rc<[Instr]>,
    /// Predicate whose calls land at each address.
    pub(crate) entry_owner: Vec<Option<PredId>>,
    pub heap: Heap,
    pub trail: Trail,
    pub(crate) heap_capacity: usize,
    pub(crate) x: Vec<Cell>,
    pub(crate) frames: Vec<Frame>,
    pub(crate) e: Option<usize>,
    pub(crate) cps: Vec<ChoicePoint>,
    pub(crate) p: CodeAddr,
    pub(crate) cp: CodeAddr,
    pub(crate) b0: usize,
    pub(crate) s: Addr,
    pub(crate) mode: Mode,
    /// Dereferenced operands of the current instruction.
    pub(crate) opnd: [Cell; 2],
    pub(crate) observed: Observed,
    pub(crate) in_semulator: bool,
    /// Head entries of other predicates seen by the current recording.
    pub(crate) foreign_ticks: u64,
    solutions: Vec<String>,
    answer_names: Vec<String>,
}

impl Machine {
    pub fn new(program: Program, config: Config) -> Machine {
        let heap_capacity = config.heap_cells.max(64);
        let mut m = Machine {
            program,
            config,
            stats: RunStats::default(),
            timer: stats::Timer::default(),
            monitor: Monitor::default(),
            events: Vec::new(),
            debug_log: Vec::new(),
            installed: Vec::new(),
            code: Rc::from(Vec::new()),
            entry_owner: Vec::new(),
            heap: Heap::with_capacity(heap_capacity),
            trail: Trail::new(),
            heap_capacity,
            x: Vec::new(),
            frames: Vec::new(),
            e: None,
            cps: Vec::new(),
            p: 0,
            cp: HALT,
            b0: 0,
            s: 0,
            mode: Mode::Read,
            opnd: [Cell::Nil; 2],
            observed: Observed::None,
            in_semulator: false,
            foreign_ticks: 0,
            solutions: Vec::new(),
            answer_names: Vec::new(),
        };
        m.refresh_code();
        m
    }

    fn refresh_code(&mut self) {
        self.code = Rc::from(self.program.code.clone());
        self.entry_owner = vec![None; self.code.len()];
        for (i, p) in self.program.preds.iter().enumerate() {
            self.entry_owner[p.entry] = Some(PredId(i as u32));
        }
        self.x = vec![Cell::Nil; self.program.num_x + 1];
    }

    pub fn compile_query(&mut self, text: &str) -> Result<Query, MachineError> {
        let q = self.program.parse_query(text)?;
        self.refresh_code();
        Ok(q)
    }

    pub fn heap_capacity(&self) -> usize {
        self.heap_capacity
    }

    /// Compiles and runs `text`, returning every solution.
    pub fn solve(&mut self, text: &str) -> Result<Vec<String>, MachineError> {
        let q = self.compile_query(text)?;
        self.run_query(&q)
    }

    fn reset_state(&mut self, q: &Query) {
        self.heap.truncate(0);
        self.trail = Trail::new();
        self.trail.set_boundary(0);
        self.frames.clear();
        self.cps.clear();
        self.e = None;
        self.p = q.entry;
        self.cp = HALT;
        self.b0 = 0;
        self.x.iter_mut().for_each(|c| *c = Cell::Nil);
        self.solutions.clear();
        self.answer_names = q.vars.clone();
        self.monitor.break_flow();
    }

    /// Enumerates every solution of a compiled query in depth-first order.
    pub fn run_query(&mut self, q: &Query) -> Result<Vec<String>, MachineError> {
        self.reset_state(q);
        self.timer.start();
        let result = self.run_loop();
        self.timer.stop();
        result?;
        let sols = std::mem::take(&mut self.solutions);
        self.stats.solutions.extend(sols.iter().cloned());
        Ok(sols)
    }

    fn run_loop(&mut self) -> Result<(), MachineError> {
        loop {
            if let Some(pred) = self.entry_owner[self.p] {
                if let Some(sem) = self.select_emulator(pred) {
                    match self.run_semulator(sem)? {
                        SemResult::Continue => continue,
                        SemResult::Fail => {
                            if !self.backtrack() {
                                return Ok(());
                            }
                            continue;
                        }
                    }
                }
            }
            if !self.dispatch_instruction()? && !self.backtrack() {
                return Ok(());
            }
        }
    }

    /// Executes the instruction at `P` by walking its graph. Returns false
    /// when the instruction raised a backtrack.
    pub fn dispatch_instruction(&mut self) -> Result<bool, MachineError> {
        let addr = self.p;
        let code = Rc::clone(&self.code);
        let ins = &code[addr];
        let cfg = instruction_metadata(ins.opcode());
        self.stats.dispatches += 1;
        let mut b = cfg.entry;
        loop {
            if self.monitor.enabled {
                self.mark_block(addr, b);
            }
            let flow = self.exec_block(addr, ins, b);
            let kind = cfg.block(b).kind;
            if kind == BlockKind::TypeTest {
                self.stats.type_test_evals += 1;
            }
            if self.monitor.enabled {
                self.monitor.note(flow, self.observed);
            }
            if self.config.validate {
                validate_transition(cfg, b, flow);
            }
            match flow {
                Flow::Goto(n) => b = n,
                Flow::Next => return Ok(true),
                Flow::Backtrack => return Ok(false),
                Flow::Gc => {
                    self.reclaim_heap(heap_need(ins))?;
                    b = cfg.entry;
                }
            }
        }
    }

    fn mark_block(&mut self, addr: CodeAddr, b: u8) {
        self.timer.enter(Component::MonitorTraceBuilder);
        self.stats.mark_calls += 1;
        let kind = instruction_metadata(self.code[addr].opcode()).block(b).kind;
        let over = self.monitor.mark_block(addr, b, kind, self.config.trace_cap);
        self.timer.leave();
        if over {
            self.abandon_recording();
        }
    }

    /// Pops to the youngest choice point and restores the machine from it.
    /// Returns false when there is none, ending the query.
    pub fn backtrack(&mut self) -> bool {
        let Some(cp) = self.cps.last() else {
            return false;
        };
        self.trail.restore(&mut self.heap, cp.mark);
        self.heap.truncate(cp.h);
        for (i, a) in cp.args.iter().enumerate() {
            self.x[i + 1] = *a;
        }
        self.e = cp.e;
        self.cp = cp.cp;
        self.b0 = cp.b0;
        self.p = cp.alt;
        true
    }

    fn cut_to(&mut self, b: usize) {
        if self.cps.len() > b {
            self.cps.truncate(b);
            self.trail.release_to(b);
            self.update_boundary();
        }
    }

    fn update_boundary(&mut self) {
        self.trail.set_boundary(self.cps.last().map_or(0, |c| c.h));
    }

    #[inline]
    fn get_reg(&self, r: Reg) -> Cell {
        match r {
            Reg::X(i) => self.x[i as usize],
            Reg::Y(i) => self.frames[self.e.expect("Y register without environment")].ys[i as usize - 1],
        }
    }

    #[inline]
    fn set_reg(&mut self, r: Reg, c: Cell) {
        match r {
            Reg::X(i) => self.x[i as usize] = c,
            Reg::Y(i) => {
                let e = self.e.expect("Y register without environment");
                self.frames[e].ys[i as usize - 1] = c;
            }
        }
    }

    fn operand(&self, o: Operand) -> Cell {
        match o {
            Operand::Int(i) => Cell::Int(i),
            Operand::Reg(r) => self.get_reg(r),
        }
    }

    fn functor_at(&self, c: Cell) -> Functor {
        match c {
            Cell::Str(a) => match self.heap.get(a) {
                Cell::Functor(f) => f,
                other => unreachable!("structure at {a} points to {other:?}"),
            },
            other => unreachable!("functor of {other:?}"),
        }
    }

    /// Raw operand tested by the var-check block `b` of `ins`, and the
    /// operand slot its dereferenced value goes to.
    pub(crate) fn test_operand(&self, ins: &Instr, b: u8) -> (Cell, usize) {
        match ins {
            Instr::GetConstant { arg, .. }
            | Instr::GetNil { arg }
            | Instr::GetStructure { arg, .. }
            | Instr::GetList { arg } => (self.x[*arg as usize], 0),
            Instr::UnifyConstant { .. } | Instr::UnifyNil => (self.heap.get(self.s), 0),
            Instr::SwitchOnTerm(_) => (self.x[1], 0),
            Instr::Arith { a, b: ob, .. } | Instr::Compare { a, b: ob, .. } => {
                if b == 0 {
                    (self.operand(*a), 0)
                } else {
                    (self.operand(*ob), 1)
                }
            }
            Instr::Is { lhs, val } => {
                if b == 0 {
                    (self.operand(*val), 0)
                } else {
                    (self.get_reg(*lhs), 1)
                }
            }
            Instr::TypeTest { reg, .. } => (self.get_reg(*reg), 0),
            other => unreachable!("{other:?} has no tested operand"),
        }
    }

    /// Fused var-check and dereference, as run by S.emulators.
    #[inline]
    pub(crate) fn deref_operand(&mut self, ins: &Instr, b: u8) -> Tag {
        let (raw, slot) = self.test_operand(ins, b);
        let d = deref_cell(&self.heap, raw);
        self.opnd[slot] = d;
        d.tag()
    }

    fn slot_of(ins: &Instr, b: u8) -> usize {
        match ins {
            Instr::Arith { .. } | Instr::Compare { .. } | Instr::Is { .. } if b >= 3 => 1,
            _ => 0,
        }
    }

    /// Follows the edge of a test block labelled with `tag`.
    fn test_edge(&mut self, addr: CodeAddr, ins: &Instr, b: u8, tag: Tag) -> Flow {
        let blk = instruction_metadata(ins.opcode()).block(b);
        for (cond, target) in &blk.successors {
            let hit = match cond {
                EdgeCond::Tags(s) => s.contains(tag),
                EdgeCond::Accepted | EdgeCond::Rejected => {
                    let Instr::TypeTest { check, .. } = ins else { unreachable!() };
                    check.accepts().contains(tag) == (*cond == EdgeCond::Accepted)
                }
                _ => false,
            };
            if hit {
                return match target {
                    Target::Block(n) => Flow::Goto(*n),
                    Target::Next => {
                        self.p = addr + 1;
                        Flow::Next
                    }
                    Target::Backtrack => Flow::Backtrack,
                    Target::HeapException => Flow::Gc,
                };
            }
        }
        unreachable!("{}: no edge for {tag:?}", blk.id)
    }

    fn bind_var(&mut self, var: Cell, value: Cell) {
        let Cell::Ref(a) = var else { unreachable!("binding non-variable {var:?}") };
        bind_cell(&mut self.heap, a, value, &mut self.trail);
    }

    fn unify(&mut self, a: Cell, b: Cell) -> bool {
        unify_cells(&mut self.heap, a, b, &mut self.trail)
    }

    #[inline]
    fn next(&mut self, addr: CodeAddr) -> Flow {
        self.p = addr + 1;
        Flow::Next
    }

    fn ok(&mut self, addr: CodeAddr, ok: bool) -> Flow {
        if ok {
            self.next(addr)
        } else {
            Flow::Backtrack
        }
    }

    fn pred_entry(&self, pred: PredId) -> CodeAddr {
        self.program.pred(pred).entry
    }

    /// Runs the body of block `b` of the instruction at `addr`.
    pub(crate) fn exec_block(&mut self, addr: CodeAddr, ins: &Instr, b: u8) -> Flow {
        let role = instruction_metadata(ins.opcode()).block(b).role;
        match role {
            Role::VarCheck => {
                let (raw, slot) = self.test_operand(ins, b);
                self.opnd[slot] = raw;
                let t = raw.tag();
                self.observed = Observed::Tag(t);
                return self.test_edge(addr, ins, b, t);
            }
            Role::Deref => {
                let slot = Self::slot_of(ins, b);
                let d = deref_cell(&self.heap, self.opnd[slot]);
                self.opnd[slot] = d;
                let t = d.tag();
                self.observed = Observed::Tag(t);
                return self.test_edge(addr, ins, b, t);
            }
            Role::TagTest => {
                let t = self.opnd[Self::slot_of(ins, b)].tag();
                self.observed = Observed::Tag(t);
                return self.test_edge(addr, ins, b, t);
            }
            Role::ModeSwitch => {
                self.observed = Observed::Mode(self.mode);
                return mode_target(ins, b, self.mode);
            }
            Role::Body | Role::Bind => {}
        }
        self.observed = Observed::None;
        match (ins, b) {
            (Instr::Enter { heap, .. }, 0) => {
                if self.heap.top() + *heap as usize > self.heap_capacity {
                    Flow::Gc
                } else {
                    Flow::Goto(1)
                }
            }
            (Instr::Enter { pred, .. }, 1) => {
                self.tick_counter(*pred, addr);
                self.next(addr)
            }
            (Instr::Allocate { size }, _) => {
                let pos = self.e.map_or(0, |e| e + 1).max(self.cps.last().map_or(0, |c| c.frames_len));
                self.frames.truncate(pos);
                self.frames.push(Frame {
                    ys: vec![Cell::Nil; *size as usize],
                    cp: self.cp,
                    ce: self.e,
                    cut_b: self.b0,
                });
                self.e = Some(pos);
                self.next(addr)
            }
            (Instr::Deallocate, _) => {
                let f = &self.frames[self.e.expect("deallocate without environment")];
                self.cp = f.cp;
                self.e = f.ce;
                self.next(addr)
            }
            (Instr::Call { pred }, _) => {
                self.cp = addr + 1;
                self.b0 = self.cps.len();
                self.p = self.pred_entry(*pred);
                Flow::Next
            }
            (Instr::Execute { pred }, _) => {
                self.b0 = self.cps.len();
                self.p = self.pred_entry(*pred);
                Flow::Next
            }
            (Instr::Proceed, _) => {
                self.p = self.cp;
                Flow::Next
            }
            (Instr::GetVariable { reg, arg }, _) => {
                self.set_reg(*reg, self.x[*arg as usize]);
                self.next(addr)
            }
            (Instr::GetValue { reg, arg }, _) => {
                let ok = self.unify(self.get_reg(*reg), self.x[*arg as usize]);
                self.ok(addr, ok)
            }
            (Instr::GetConstant { c, .. }, 2) | (Instr::UnifyConstant { c }, 3) => {
                self.bind_var(self.opnd[0], c.cell());
                self.advance_s(ins);
                self.next(addr)
            }
            (Instr::GetConstant { c, .. }, 3) | (Instr::UnifyConstant { c }, 4) => {
                self.advance_s(ins);
                let ok = self.opnd[0] == c.cell();
                self.ok(addr, ok)
            }
            (Instr::GetNil { .. }, 2) | (Instr::UnifyNil, 3) => {
                self.bind_var(self.opnd[0], Cell::Nil);
                self.advance_s(ins);
                self.next(addr)
            }
            (Instr::GetNil { .. }, 3) | (Instr::UnifyNil, 4) => {
                self.advance_s(ins);
                let ok = self.opnd[0] == Cell::Nil;
                self.ok(addr, ok)
            }
            (Instr::GetStructure { functor, .. }, 2) => {
                let h = self.heap.push(Cell::Functor(*functor));
                self.bind_var(self.opnd[0], Cell::Str(h));
                self.mode = Mode::Write;
                self.next(addr)
            }
            (Instr::GetStructure { functor, .. }, 4) => {
                let Cell::Str(a) = self.opnd[0] else { unreachable!() };
                if self.heap.get(a) == Cell::Functor(*functor) {
                    self.s = a + 1;
                    self.mode = Mode::Read;
                    self.next(addr)
                } else {
                    Flow::Backtrack
                }
            }
            (Instr::GetList { .. }, 2) => {
                let h = self.heap.top();
                self.bind_var(self.opnd[0], Cell::List(h));
                self.mode = Mode::Write;
                self.next(addr)
            }
            (Instr::GetList { .. }, 4) => {
                let Cell::List(a) = self.opnd[0] else { unreachable!() };
                self.s = a;
                self.mode = Mode::Read;
                self.next(addr)
            }
            (Instr::UnifyVariable { reg }, 1) => {
                let c = self.heap_cell_ref(self.s);
                self.set_reg(*reg, c);
                self.s += 1;
                self.next(addr)
            }
            (Instr::UnifyVariable { reg }, 2) => {
                let a = self.heap.new_var();
                self.set_reg(*reg, Cell::Ref(a));
                self.next(addr)
            }
            (Instr::UnifyValue { reg }, 1) => {
                let c = self.heap_cell_ref(self.s);
                self.s += 1;
                let ok = self.unify(self.get_reg(*reg), c);
                self.ok(addr, ok)
            }
            (Instr::UnifyValue { reg }, 2) => {
                let c = self.get_reg(*reg);
                self.heap.push(c);
                self.next(addr)
            }
            (Instr::UnifyConstant { c }, 5) => {
                self.heap.push(c.cell());
                self.next(addr)
            }
            (Instr::UnifyNil, 5) => {
                self.heap.push(Cell::Nil);
                self.next(addr)
            }
            (Instr::UnifyVoid { n }, 1) => {
                self.s += *n as usize;
                self.next(addr)
            }
            (Instr::UnifyVoid { n }, 2) => {
                for _ in 0..*n {
                    self.heap.new_var();
                }
                self.next(addr)
            }
            (Instr::PutVariable { reg, arg }, _) => {
                let a = self.heap.new_var();
                self.set_reg(*reg, Cell::Ref(a));
                if let Some(i) = arg {
                    self.x[*i as usize] = Cell::Ref(a);
                }
                self.next(addr)
            }
            (Instr::PutValue { reg, arg }, _) => {
                self.x[*arg as usize] = self.get_reg(*reg);
                self.next(addr)
            }
            (Instr::PutConstant { c, arg }, _) => {
                self.x[*arg as usize] = c.cell();
                self.next(addr)
            }
            (Instr::PutNil { arg }, _) => {
                self.x[*arg as usize] = Cell::Nil;
                self.next(addr)
            }
            (Instr::PutStructure { functor, arg }, _) => {
                let h = self.heap.push(Cell::Functor(*functor));
                self.x[*arg as usize] = Cell::Str(h);
                self.mode = Mode::Write;
                self.next(addr)
            }
            (Instr::PutList { arg }, _) => {
                self.x[*arg as usize] = Cell::List(self.heap.top());
                self.mode = Mode::Write;
                self.next(addr)
            }
            (Instr::SwitchOnTerm(table), 2) => {
                let d = self.opnd[0];
                self.observed = Observed::Tag(d.tag());
                let (_, label) = table.select(d, |c| self.functor_at(c));
                match label {
                    Label::Addr(a) => {
                        self.p = a;
                        Flow::Next
                    }
                    Label::Fail => Flow::Backtrack,
                }
            }
            (Instr::Try { clause, arity }, _) => {
                let args = self.x[1..=*arity as usize].to_vec();
                let h = self.heap.top();
                let mark = self.trail.mark();
                self.cps.push(ChoicePoint {
                    args,
                    e: self.e,
                    frames_len: self.frames.len(),
                    cp: self.cp,
                    b0: self.b0,
                    h,
                    mark,
                    alt: addr + 1,
                });
                self.trail.set_boundary(h);
                self.p = *clause;
                Flow::Next
            }
            (Instr::Retry { clause }, _) => {
                self.cps.last_mut().expect("retry without choice point").alt = addr + 1;
                self.p = *clause;
                Flow::Next
            }
            (Instr::Trust { clause }, _) => {
                self.cps.pop().expect("trust without choice point");
                self.trail.release_to(self.cps.len());
                self.update_boundary();
                self.p = *clause;
                Flow::Next
            }
            (Instr::Fail, _) => Flow::Backtrack,
            (Instr::NeckCut, _) => {
                self.cut_to(self.b0);
                self.next(addr)
            }
            (Instr::Cut, _) => {
                let b = self.frames[self.e.expect("cut without environment")].cut_b;
                self.cut_to(b);
                self.next(addr)
            }
            (Instr::Arith { op, dst, .. }, 6) => {
                let (Cell::Int(a), Cell::Int(b)) = (self.opnd[0], self.opnd[1]) else { unreachable!() };
                match op.apply(a, b) {
                    Some(v) => {
                        self.set_reg(*dst, Cell::Int(v));
                        self.next(addr)
                    }
                    None => Flow::Backtrack,
                }
            }
            (Instr::Compare { op, .. }, 6) => {
                let (Cell::Int(a), Cell::Int(b)) = (self.opnd[0], self.opnd[1]) else { unreachable!() };
                let ok = op.holds(a, b);
                self.ok(addr, ok)
            }
            (Instr::Is { .. }, 5) => {
                self.bind_var(self.opnd[1], self.opnd[0]);
                self.next(addr)
            }
            (Instr::Is { .. }, 7) => {
                let ok = self.opnd[0] == self.opnd[1];
                self.ok(addr, ok)
            }
            (Instr::Unify { a, b }, _) => {
                let ok = self.unify(self.get_reg(*a), self.get_reg(*b));
                self.ok(addr, ok)
            }
            (Instr::Answer { n }, _) => {
                self.record_answer(*n as usize);
                Flow::Backtrack
            }
            (ins, b) => unreachable!("no body for block {b} of {ins:?}"),
        }
    }

    /// Register view of the heap cell at `a`: unbound cells become a
    /// reference to themselves, everything else is copied.
    #[inline]
    fn heap_cell_ref(&self, a: Addr) -> Cell {
        match self.heap.get(a) {
            Cell::Ref(_) => Cell::Ref(a),
            c => c,
        }
    }

    fn advance_s(&mut self, ins: &Instr) {
        if matches!(ins, Instr::UnifyConstant { .. } | Instr::UnifyNil) {
            self.s += 1;
        }
    }

    fn record_answer(&mut self, n: usize) {
        let vals: Vec<Cell> = self.x[1..=n].to_vec();
        let text = render::answer(&self.heap, &self.program.symbols, &self.answer_names, &vals);
        self.solutions.push(text);
    }

    /// Current program counter.
    pub fn p(&self) -> CodeAddr {
        self.p
    }
}

fn mode_target(ins: &Instr, b: u8, mode: Mode) -> Flow {
    let blk = instruction_metadata(ins.opcode()).block(b);
    for (cond, t) in &blk.successors {
        if let (EdgeCond::Mode(m), Target::Block(n)) = (cond, t) {
            if *m == mode {
                return Flow::Goto(*n);
            }
        }
    }
    unreachable!("{}: no edge for {mode:?}", blk.id)
}

/// Heap cells the instruction's GC check reserves.
pub(crate) fn heap_need(ins: &Instr) -> usize {
    match ins {
        Instr::Enter { heap, .. } => *heap as usize,
        _ => 0,
    }
}

/// Panics unless `b --flow--> ...` is an edge of the static graph.
pub(crate) fn validate_transition(cfg: &InstructionCfg, b: u8, flow: Flow) {
    let target = match flow {
        Flow::Goto(n) => Target::Block(n),
        Flow::Next => Target::Next,
        Flow::Backtrack => Target::Backtrack,
        Flow::Gc => Target::HeapException,
    };
    assert!(
        cfg.has_edge(b, target),
        "executed {}.{b} -> {target:?}, which is not an edge of the graph",
        cfg.opcode.name()
    );
}

pub(crate) enum SemResult {
    /// Continue in the default emulator at `P`.
    Continue,
    /// Backtrack in the default emulator.
    Fail,
}
