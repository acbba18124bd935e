//! Markup: recording executed basic blocks into a trace graph while a
//! predicate is critical, plus the structural validator run on finalized
//! traces.

use std::collections::HashMap;
use std::fmt::Write;

use crate::compiler::{CodeAddr, Instr, PredId};
use crate::machine::{instruction_metadata, BlockKind, Flow, Mode, Observed, Role, Target};
use crate::term::TagSet;

/// How control reached the next recorded block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FlowKind {
    /// Within one instruction.
    Intra,
    /// To the first block of the instruction at `P`.
    Next,
    Backtrack,
    /// Restart of the instruction after a heap reclamation.
    Gc,
}

impl FlowKind {
    fn of(flow: Flow) -> FlowKind {
        match flow {
            Flow::Goto(_) => FlowKind::Intra,
            Flow::Next => FlowKind::Next,
            Flow::Backtrack => FlowKind::Backtrack,
            Flow::Gc => FlowKind::Gc,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FlowKind::Intra => "intra",
            FlowKind::Next => "next",
            FlowKind::Backtrack => "backtrack",
            FlowKind::Gc => "gc",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEdge {
    pub to: usize,
    pub flow: FlowKind,
    /// Tags observed by the source block when this edge was taken.
    pub tags: TagSet,
    pub modes: Vec<Mode>,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceNode {
    pub addr: CodeAddr,
    pub block: u8,
    pub kind: BlockKind,
    pub observed: TagSet,
    pub modes: Vec<Mode>,
    pub hits: u64,
    pub edges: Vec<TraceEdge>,
}

impl TraceNode {
    pub fn successors(&self, flow: FlowKind) -> impl Iterator<Item = &TraceEdge> {
        self.edges.iter().filter(move |e| e.flow == flow)
    }
}

/// Blocks recorded for one predicate, keyed by `(address, block)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TraceRecord {
    pub pred: Option<PredId>,
    pub nodes: Vec<TraceNode>,
    pub index: HashMap<(CodeAddr, u8), usize>,
}

impl TraceRecord {
    pub fn node(&self, addr: CodeAddr, block: u8) -> Option<&TraceNode> {
        self.index.get(&(addr, block)).map(|&i| &self.nodes[i])
    }

    pub fn node_id(&self, addr: CodeAddr, block: u8) -> Option<usize> {
        self.index.get(&(addr, block)).copied()
    }

    fn intern(&mut self, addr: CodeAddr, block: u8, kind: BlockKind) -> usize {
        if let Some(&i) = self.index.get(&(addr, block)) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(TraceNode {
            addr,
            block,
            kind,
            observed: TagSet::EMPTY,
            modes: Vec::new(),
            hits: 0,
            edges: Vec::new(),
        });
        self.index.insert((addr, block), i);
        i
    }

    fn add_edge(&mut self, from: usize, to: usize, flow: FlowKind, observed: Observed) {
        let node = &mut self.nodes[from];
        let (tag, mode) = match observed {
            Observed::Tag(t) => (TagSet::of(t), None),
            Observed::Mode(m) => (TagSet::EMPTY, Some(m)),
            Observed::None => (TagSet::EMPTY, None),
        };
        node.observed = node.observed.union(tag);
        if let Some(m) = mode {
            if !node.modes.contains(&m) {
                node.modes.push(m);
            }
        }
        if let Some(e) = node.edges.iter_mut().find(|e| e.to == to && e.flow == flow) {
            e.tags = e.tags.union(tag);
            if let Some(m) = mode {
                if !e.modes.contains(&m) {
                    e.modes.push(m);
                }
            }
            e.count += 1;
            return;
        }
        node.edges.push(TraceEdge {
            to,
            flow,
            tags: tag,
            modes: mode.into_iter().collect(),
            count: 1,
        });
    }

    /// Number of recorded predecessors of every node.
    pub fn predecessor_counts(&self) -> Vec<usize> {
        let mut n = vec![0; self.nodes.len()];
        for node in &self.nodes {
            for e in &node.edges {
                n[e.to] += 1;
            }
        }
        n
    }

    /// One line per recorded edge: `addr opcode block-id kind edge-taken`.
    pub fn dump(&self, code: &[Instr]) -> String {
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        order.sort_by_key(|&i| (self.nodes[i].addr, self.nodes[i].block));
        let mut out = String::new();
        for i in order {
            let n = &self.nodes[i];
            let op = code[n.addr].opcode();
            let id = instruction_metadata(op).block(n.block).id;
            if n.edges.is_empty() {
                let _ = writeln!(out, "{} {} {} {} -", n.addr, op.name(), id, n.kind.name());
            }
            for e in &n.edges {
                let to = &self.nodes[e.to];
                let _ = writeln!(
                    out,
                    "{} {} {} {} {}->{}.{}{}",
                    n.addr,
                    op.name(),
                    id,
                    n.kind.name(),
                    e.flow.name(),
                    to.addr,
                    to.block,
                    if e.tags.is_empty() { String::new() } else { format!(" {}", e.tags) }
                );
            }
        }
        out
    }
}

#[derive(Debug, Default)]
pub struct Monitor {
    /// Markup is on: every executed block gets marked.
    pub enabled: bool,
    record: TraceRecord,
    last: Option<usize>,
    /// Flow and observation of the last marked block, applied on the next mark.
    pending: Option<(FlowKind, Observed)>,
}

impl Monitor {
    pub fn recording(&self) -> Option<PredId> {
        if self.enabled {
            self.record.pred
        } else {
            None
        }
    }

    /// Starts a fresh recording for `pred`. The clause entry at `enter` has
    /// already run both of its blocks, so they are seeded.
    pub fn enable_markup(&mut self, pred: PredId, enter: CodeAddr) {
        self.record = TraceRecord {
            pred: Some(pred),
            ..TraceRecord::default()
        };
        let a = self.record.intern(enter, 0, BlockKind::GcCheck);
        let b = self.record.intern(enter, 1, BlockKind::Plain);
        self.record.nodes[a].hits += 1;
        self.record.nodes[b].hits += 1;
        self.record.add_edge(a, b, FlowKind::Intra, Observed::None);
        self.last = Some(b);
        self.pending = None;
        self.enabled = true;
    }

    /// Resumes recording on top of an existing trace, after a side exit.
    /// `from` names the node and flow the exit left through, so the next
    /// marked block is linked to it.
    pub fn reopen(&mut self, record: TraceRecord, from: Option<(usize, FlowKind)>) {
        self.record = record;
        self.last = from.map(|(n, _)| n);
        self.pending = from.map(|(_, f)| (f, Observed::None));
        self.enabled = true;
    }

    /// Records that block `block` of the instruction at `addr` is about to
    /// run. Returns true once the recording exceeds `cap` nodes.
    pub fn mark_block(&mut self, addr: CodeAddr, block: u8, kind: BlockKind, cap: usize) -> bool {
        let id = self.record.intern(addr, block, kind);
        self.record.nodes[id].hits += 1;
        if let (Some(from), Some((flow, obs))) = (self.last, self.pending.take()) {
            self.record.add_edge(from, id, flow, obs);
        }
        self.last = Some(id);
        self.record.nodes.len() > cap
    }

    /// Outcome of the block marked last.
    pub fn note(&mut self, flow: Flow, observed: Observed) {
        self.pending = Some((FlowKind::of(flow), observed));
    }

    /// Forgets the last marked block, so the next mark starts a new path.
    pub fn break_flow(&mut self) {
        self.last = None;
        self.pending = None;
    }

    pub fn disable_markup(&mut self) {
        self.enabled = false;
        self.last = None;
        self.pending = None;
    }

    /// Stops recording and hands back the trace.
    pub fn finalize_trace(&mut self) -> TraceRecord {
        self.disable_markup();
        std::mem::take(&mut self.record)
    }

    pub fn abandon(&mut self) {
        self.disable_markup();
        self.record = TraceRecord::default();
    }

    pub fn record(&self) -> &TraceRecord {
        &self.record
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceViolation {
    /// An edge that is not in the instruction's static graph.
    UnsoundEdge { addr: CodeAddr, block: u8, flow: FlowKind },
    /// A type test whose untaken edges have no guard.
    UnguardedTest { addr: CodeAddr, block: u8 },
    /// A recorded switch lacking a bucket arm or its default exit.
    IncompleteSwitch { addr: CodeAddr },
    TestBeforeGcCheck { addr: CodeAddr },
}

/// Checks edge soundness and the GC-check ordering of a recorded trace.
pub fn validate_record(record: &TraceRecord, code: &[Instr]) -> Vec<TraceViolation> {
    let mut out = Vec::new();
    for n in &record.nodes {
        let cfg = instruction_metadata(code[n.addr].opcode());
        for e in &n.edges {
            let to = &record.nodes[e.to];
            let ok = match e.flow {
                FlowKind::Intra => to.addr == n.addr && cfg.has_edge(n.block, Target::Block(to.block)),
                FlowKind::Next => to.block == 0 && cfg.has_edge(n.block, Target::Next),
                FlowKind::Backtrack => to.block == 0 && cfg.has_edge(n.block, Target::Backtrack),
                FlowKind::Gc => to.addr == n.addr && to.block == 0 && cfg.has_edge(n.block, Target::HeapException),
            };
            if !ok {
                out.push(TraceViolation::UnsoundEdge {
                    addr: n.addr,
                    block: n.block,
                    flow: e.flow,
                });
            }
        }
        if n.kind == BlockKind::TypeTest {
            // A GC check retained after this test inside the same instruction.
            let mut seen = vec![false; record.nodes.len()];
            let mut stack: Vec<usize> = n.successors(FlowKind::Intra).map(|e| e.to).collect();
            while let Some(i) = stack.pop() {
                if std::mem::replace(&mut seen[i], true) {
                    continue;
                }
                if record.nodes[i].kind == BlockKind::GcCheck {
                    out.push(TraceViolation::TestBeforeGcCheck { addr: n.addr });
                }
                stack.extend(record.nodes[i].successors(FlowKind::Intra).map(|e| e.to));
            }
        }
    }
    out
}

/// Static role of a recorded node's block.
pub fn role_of(code: &[Instr], n: &TraceNode) -> Role {
    instruction_metadata(code[n.addr].opcode()).block(n.block).role
}

#[cfg(test)]
mod tests;
