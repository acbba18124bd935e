//! Static basic-block graphs of every opcode.
//!
//! Each instruction is executed by walking its graph from block 0. Block
//! bodies live in the emulator; this module only describes shape, kinds and
//! edge labels, which is what the monitor and trace compiler reason over.

use std::fmt;
use std::sync::OnceLock;

use crate::compiler::Opcode;
use crate::term::TagSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BlockKind {
    Plain,
    TypeTest,
    DerefLoop,
    GcCheck,
    Choice,
    Multiway,
}

impl BlockKind {
    pub fn name(self) -> &'static str {
        match self {
            BlockKind::Plain => "PLAIN",
            BlockKind::TypeTest => "TYPE_TEST",
            BlockKind::DerefLoop => "DEREF_LOOP",
            BlockKind::GcCheck => "GC_CHECK",
            BlockKind::Choice => "CHOICE",
            BlockKind::Multiway => "MULTIWAY",
        }
    }
}

/// What a block does, beyond its kind. The trace compiler fuses a
/// `VarCheck`, its `DerefLoop` and a following `TagTest` into one guard.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Body,
    /// Tests the raw (not yet dereferenced) operand for `REF`.
    VarCheck,
    Deref,
    /// Tests the dereferenced operand.
    TagTest,
    /// Branches on read/write mode.
    ModeSwitch,
    /// Binds an unbound variable; invalidates knowledge about unbound cells.
    Bind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Read,
    Write,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeCond {
    Always,
    Tags(TagSet),
    /// Tags accepted by the instruction's own check (`type_test`).
    Accepted,
    Rejected,
    Mode(Mode),
    Ok,
    Fail,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Target {
    Block(u8),
    /// Falls through to the instruction at `P`.
    Next,
    Backtrack,
    HeapException,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockId {
    pub opcode: Opcode,
    pub ordinal: u8,
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.opcode.name(), self.ordinal)
    }
}

#[derive(Clone, Debug)]
pub struct BasicBlock {
    pub id: BlockId,
    pub kind: BlockKind,
    pub role: Role,
    pub successors: Vec<(EdgeCond, Target)>,
}

#[derive(Clone, Debug)]
pub struct InstructionCfg {
    pub opcode: Opcode,
    pub entry: u8,
    pub blocks: Vec<BasicBlock>,
}

impl InstructionCfg {
    pub fn block(&self, ordinal: u8) -> &BasicBlock {
        &self.blocks[ordinal as usize]
    }

    /// True iff `to` is a successor target of block `from`.
    pub fn has_edge(&self, from: u8, to: Target) -> bool {
        self.block(from).successors.iter().any(|(_, t)| *t == to)
    }
}

struct Builder {
    opcode: Opcode,
    blocks: Vec<BasicBlock>,
}

impl Builder {
    fn new(opcode: Opcode) -> Self {
        Builder { opcode, blocks: Vec::new() }
    }

    fn block(mut self, kind: BlockKind, role: Role, successors: &[(EdgeCond, Target)]) -> Self {
        let ordinal = self.blocks.len() as u8;
        self.blocks.push(BasicBlock {
            id: BlockId { opcode: self.opcode, ordinal },
            kind,
            role,
            successors: successors.to_vec(),
        });
        self
    }

    fn plain(self, successors: &[(EdgeCond, Target)]) -> Self {
        self.block(BlockKind::Plain, Role::Body, successors)
    }

    fn build(self) -> InstructionCfg {
        InstructionCfg {
            opcode: self.opcode,
            entry: 0,
            blocks: self.blocks,
        }
    }
}

use EdgeCond as C;
use Target as T;

const NEXT: &[(EdgeCond, Target)] = &[(C::Always, T::Next)];
const OK_FAIL: &[(EdgeCond, Target)] = &[(C::Ok, T::Next), (C::Fail, T::Backtrack)];

fn b(n: u8) -> Target {
    T::Block(n)
}

fn var_check(bd: Builder, on_ref: u8, on_nonref: u8) -> Builder {
    bd.block(
        BlockKind::TypeTest,
        Role::VarCheck,
        &[(C::Tags(TagSet::REF), b(on_ref)), (C::Tags(TagSet::NON_REF), b(on_nonref))],
    )
}

fn deref_loop(bd: Builder, on_unbound: Target, on_bound: Target) -> Builder {
    let me = b(bd.blocks.len() as u8);
    bd.block(
        BlockKind::DerefLoop,
        Role::Deref,
        &[(C::Always, me), (C::Tags(TagSet::REF), on_unbound), (C::Tags(TagSet::NON_REF), on_bound)],
    )
}

fn tag_test(bd: Builder, pass: TagSet, on_pass: Target) -> Builder {
    bd.block(
        BlockKind::TypeTest,
        Role::TagTest,
        &[(C::Tags(pass), on_pass), (C::Tags(TagSet::NON_REF.minus(pass)), T::Backtrack)],
    )
}

/// Dereference-and-check-integer prologue starting at block `base`; falls
/// through to `base + 3`.
fn int_operand(bd: Builder, base: u8) -> Builder {
    let bd = var_check(bd, base + 1, base + 2);
    let bd = deref_loop(bd, T::Backtrack, b(base + 2));
    tag_test(bd, TagSet::INT, b(base + 3))
}

fn mode_switch(bd: Builder, read: u8, write: u8) -> Builder {
    bd.block(
        BlockKind::Plain,
        Role::ModeSwitch,
        &[(C::Mode(Mode::Read), b(read)), (C::Mode(Mode::Write), b(write))],
    )
}

fn build(op: Opcode) -> InstructionCfg {
    use Opcode as O;
    let bd = Builder::new(op);
    let bd = match op {
        O::Enter => bd
            .block(BlockKind::GcCheck, Role::Body, &[(C::Ok, b(1)), (C::Fail, T::HeapException)])
            .plain(NEXT),
        O::Allocate
        | O::Deallocate
        | O::Call
        | O::Execute
        | O::Proceed
        | O::GetVariable
        | O::PutVariable
        | O::PutValue
        | O::PutConstant
        | O::PutNil
        | O::PutStructure
        | O::PutList
        | O::NeckCut
        | O::Cut => bd.plain(NEXT),
        O::GetValue | O::Unify => bd.block(BlockKind::Plain, Role::Bind, OK_FAIL),
        O::GetConstant | O::GetNil => {
            let bd = var_check(bd, 1, 3);
            let bd = deref_loop(bd, b(2), b(3));
            bd.block(BlockKind::Plain, Role::Bind, NEXT).plain(OK_FAIL)
        }
        O::GetStructure | O::GetList => {
            let pass = if op == O::GetList { TagSet::LIST } else { TagSet::STRUCT };
            let bd = var_check(bd, 1, 3);
            let bd = deref_loop(bd, b(2), b(3));
            let bd = bd.block(BlockKind::Plain, Role::Bind, NEXT);
            let bd = tag_test(bd, pass, b(4));
            if op == O::GetList {
                bd.plain(NEXT)
            } else {
                bd.plain(OK_FAIL)
            }
        }
        O::UnifyVariable | O::UnifyVoid => mode_switch(bd, 1, 2).plain(NEXT).plain(NEXT),
        O::UnifyValue => mode_switch(bd, 1, 2)
            .block(BlockKind::Plain, Role::Bind, OK_FAIL)
            .plain(NEXT),
        O::UnifyConstant | O::UnifyNil => {
            let bd = mode_switch(bd, 1, 5);
            let bd = var_check(bd, 2, 4);
            let bd = deref_loop(bd, b(3), b(4));
            bd.block(BlockKind::Plain, Role::Bind, NEXT).plain(OK_FAIL).plain(NEXT)
        }
        O::SwitchOnTerm => {
            let bd = var_check(bd, 1, 2);
            let bd = deref_loop(bd, b(2), b(2));
            bd.block(
                BlockKind::Multiway,
                Role::Body,
                &[
                    (C::Tags(TagSet::REF), T::Next),
                    (C::Tags(TagSet::ATOMIC), T::Next),
                    (C::Tags(TagSet::LIST), T::Next),
                    (C::Tags(TagSet::STRUCT), T::Next),
                    (C::Fail, T::Backtrack),
                ],
            )
        }
        O::Try | O::Retry | O::Trust => bd.block(BlockKind::Choice, Role::Body, NEXT),
        O::Fail | O::Answer => bd.plain(&[(C::Always, T::Backtrack)]),
        O::Arith | O::Compare => {
            let bd = int_operand(bd, 0);
            let bd = int_operand(bd, 3);
            bd.plain(OK_FAIL)
        }
        O::Is => {
            let bd = int_operand(bd, 0);
            let bd = var_check(bd, 4, 6);
            let bd = deref_loop(bd, b(5), b(6));
            let bd = bd.block(BlockKind::Plain, Role::Bind, NEXT);
            let bd = tag_test(bd, TagSet::INT, b(7));
            bd.plain(OK_FAIL)
        }
        O::TypeTest => {
            let bd = var_check(bd, 1, 2);
            let bd = deref_loop(bd, b(2), b(2));
            bd.block(
                BlockKind::TypeTest,
                Role::TagTest,
                &[(C::Accepted, T::Next), (C::Rejected, T::Backtrack)],
            )
        }
    };
    let cfg = bd.build();
    check_structure(&cfg);
    cfg
}

/// Structural invariants asserted when the table is built.
fn check_structure(cfg: &InstructionCfg) {
    let n = cfg.blocks.len();
    let mut reach = vec![false; n];
    let mut stack = vec![cfg.entry as usize];
    // Blocks a TYPE_TEST can reach within this instruction.
    let mut after_test = vec![false; n];
    while let Some(i) = stack.pop() {
        if reach[i] {
            continue;
        }
        reach[i] = true;
        for (_, t) in &cfg.blocks[i].successors {
            if let T::Block(j) = t {
                stack.push(*j as usize);
            }
        }
    }
    assert!(reach.iter().all(|r| *r), "{:?}: unreachable block", cfg.opcode);
    for (i, blk) in cfg.blocks.iter().enumerate() {
        match blk.kind {
            BlockKind::TypeTest => {
                assert!(blk.successors.len() >= 2, "{}: type test needs two edges", blk.id);
                let mut stack = vec![i];
                while let Some(k) = stack.pop() {
                    for (_, t) in &cfg.blocks[k].successors {
                        if let T::Block(j) = t {
                            if !after_test[*j as usize] {
                                after_test[*j as usize] = true;
                                stack.push(*j as usize);
                            }
                        }
                    }
                }
            }
            BlockKind::Multiway => assert!(blk.successors.len() >= 3, "{}: multiway needs three edges", blk.id),
            _ => {}
        }
    }
    for (i, blk) in cfg.blocks.iter().enumerate() {
        if blk.kind == BlockKind::GcCheck {
            assert!(!after_test[i], "{}: GC check after a type test", blk.id);
        }
    }
}

static TABLE: OnceLock<Vec<InstructionCfg>> = OnceLock::new();

fn table() -> &'static [InstructionCfg] {
    TABLE.get_or_init(|| Opcode::ALL.iter().map(|&op| build(op)).collect())
}

/// The static graph of `op`. Block ids are stable for the process lifetime.
pub fn instruction_metadata(op: Opcode) -> &'static InstructionCfg {
    &table()[op as usize]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(op: Opcode, kind: BlockKind) -> usize {
        instruction_metadata(op).blocks.iter().filter(|b| b.kind == kind).count()
    }

    #[test]
    fn table_order_matches_opcodes() {
        for op in Opcode::ALL {
            assert_eq!(instruction_metadata(op).opcode, op);
        }
    }

    #[test]
    fn proceed_is_one_plain_block() {
        let m = instruction_metadata(Opcode::Proceed);
        assert_eq!(m.blocks.len(), 1);
        assert_eq!(m.blocks[0].kind, BlockKind::Plain);
    }

    #[test]
    fn get_constant_has_one_deref_and_one_test() {
        assert_eq!(count(Opcode::GetConstant, BlockKind::DerefLoop), 1);
        assert_eq!(count(Opcode::GetConstant, BlockKind::TypeTest), 1);
    }

    #[test]
    fn switch_has_one_multiway() {
        assert_eq!(count(Opcode::SwitchOnTerm, BlockKind::Multiway), 1);
    }

    #[test]
    fn metadata_is_stable() {
        let a = instruction_metadata(Opcode::GetList) as *const _;
        let b = instruction_metadata(Opcode::GetList) as *const _;
        assert_eq!(a, b);
    }

    #[test]
    fn deref_loops_follow_a_var_check() {
        for op in Opcode::ALL {
            let m = instruction_metadata(op);
            for (i, blk) in m.blocks.iter().enumerate() {
                if blk.kind == BlockKind::DerefLoop {
                    let preds: Vec<&BasicBlock> = m
                        .blocks
                        .iter()
                        .filter(|p| p.id.ordinal as usize != i && p.successors.iter().any(|(_, t)| *t == Target::Block(i as u8)))
                        .collect();
                    assert!(preds.iter().all(|p| p.role == Role::VarCheck), "{}", blk.id);
                    assert!(m.has_edge(i as u8, Target::Block(i as u8)), "{} lacks back-edge", blk.id);
                }
            }
        }
    }
}
