//! The reduced WAM instruction set.

use std::fmt;

use crate::symbol::{Functor, Sym, SymbolTable};
use crate::term::{Cell, Tag};

pub type CodeAddr = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredId(pub u32);

impl PredId {
    /// Owner of query code; never ticked.
    pub const QUERY: PredId = PredId(u32::MAX - 1);
}

/// `X(1)..X(n)` double as the argument registers `A1..An`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Reg {
    X(u16),
    Y(u16),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Const {
    Atom(Sym),
    Int(i64),
    Nil,
}

impl Const {
    pub fn cell(self) -> Cell {
        match self {
            Const::Atom(a) => Cell::Atom(a),
            Const::Int(i) => Cell::Int(i),
            Const::Nil => Cell::Nil,
        }
    }

    pub fn from_cell(cell: Cell) -> Option<Const> {
        match cell {
            Cell::Atom(a) => Some(Const::Atom(a)),
            Cell::Int(i) => Some(Const::Int(i)),
            Cell::Nil => Some(Const::Nil),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    Reg(Reg),
    Int(i64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    IntDiv,
    Mod,
    Rem,
}

impl ArithOp {
    pub fn apply(self, a: i64, b: i64) -> Option<i64> {
        match self {
            ArithOp::Add => a.checked_add(b),
            ArithOp::Sub => a.checked_sub(b),
            ArithOp::Mul => a.checked_mul(b),
            ArithOp::IntDiv => {
                if b == 0 {
                    None
                } else {
                    a.checked_div(b)
                }
            }
            ArithOp::Mod => {
                if b == 0 {
                    None
                } else {
                    let r = a.checked_rem(b)?;
                    Some(if r != 0 && (r < 0) != (b < 0) { r + b } else { r })
                }
            }
            ArithOp::Rem => {
                if b == 0 {
                    None
                } else {
                    a.checked_rem(b)
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ArithOp::Add => "add",
            ArithOp::Sub => "sub",
            ArithOp::Mul => "mul",
            ArithOp::IntDiv => "div",
            ArithOp::Mod => "mod",
            ArithOp::Rem => "rem",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CmpOp::Lt => "lt",
            CmpOp::Le => "le",
            CmpOp::Gt => "gt",
            CmpOp::Ge => "ge",
            CmpOp::Eq => "eq_num",
            CmpOp::Ne => "ne_num",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TypeCheck {
    Var,
    Nonvar,
    Integer,
    Atom,
    Atomic,
    Compound,
}

impl TypeCheck {
    /// Dereferenced tags accepted by the check.
    pub fn accepts(self) -> crate::term::TagSet {
        use crate::term::TagSet;
        match self {
            TypeCheck::Var => TagSet::REF,
            TypeCheck::Nonvar => TagSet::NON_REF,
            TypeCheck::Integer => TagSet::INT,
            // `[]` is an atom at the language level.
            TypeCheck::Atom => TagSet::ATOM.union(TagSet::NIL),
            TypeCheck::Atomic => TagSet::ATOMIC,
            TypeCheck::Compound => TagSet::STRUCT.union(TagSet::LIST),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TypeCheck::Var => "var",
            TypeCheck::Nonvar => "nonvar",
            TypeCheck::Integer => "integer",
            TypeCheck::Atom => "atom",
            TypeCheck::Atomic => "atomic",
            TypeCheck::Compound => "compound",
        }
    }
}

/// Target of a `switch_on_term` bucket.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Addr(CodeAddr),
    Fail,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SwitchTable {
    pub var: Label,
    pub consts: Vec<(Const, Label)>,
    pub const_default: Label,
    pub list: Label,
    pub structs: Vec<(Functor, Label)>,
    pub struct_default: Label,
}

impl SwitchTable {
    /// Bucket selected for a dereferenced first argument of tag `tag`.
    pub fn select(&self, first: Cell, functor_of: impl Fn(Cell) -> Functor) -> (Bucket, Label) {
        match first.tag() {
            Tag::Ref => (Bucket::Var, self.var),
            Tag::Atom | Tag::Int | Tag::Nil => {
                let c = Const::from_cell(first).expect("atomic cell");
                let l = self
                    .consts
                    .iter()
                    .find(|(k, _)| *k == c)
                    .map_or(self.const_default, |(_, l)| *l);
                (Bucket::Const, l)
            }
            Tag::List => (Bucket::List, self.list),
            Tag::Struct => {
                let f = functor_of(first);
                let l = self
                    .structs
                    .iter()
                    .find(|(k, _)| *k == f)
                    .map_or(self.struct_default, |(_, l)| *l);
                (Bucket::Struct, l)
            }
        }
    }

    /// Every distinct target the switch can transfer to.
    pub fn targets(&self) -> Vec<Label> {
        let mut out = vec![self.var, self.const_default, self.list, self.struct_default];
        out.extend(self.consts.iter().map(|(_, l)| *l));
        out.extend(self.structs.iter().map(|(_, l)| *l));
        let mut seen = Vec::new();
        out.retain(|l| {
            if seen.contains(l) {
                false
            } else {
                seen.push(*l);
                true
            }
        });
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Bucket {
    Var,
    Const,
    List,
    Struct,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Instr {
    /// Clause head entry: heap check for the whole clause, counter tick and
    /// emulator selection.
    Enter { pred: PredId, heap: u32 },
    Allocate { size: u16 },
    Deallocate,
    Call { pred: PredId },
    Execute { pred: PredId },
    Proceed,

    GetVariable { reg: Reg, arg: u16 },
    GetValue { reg: Reg, arg: u16 },
    GetConstant { c: Const, arg: u16 },
    GetNil { arg: u16 },
    GetStructure { functor: Functor, arg: u16 },
    GetList { arg: u16 },

    UnifyVariable { reg: Reg },
    UnifyValue { reg: Reg },
    UnifyConstant { c: Const },
    UnifyNil,
    UnifyVoid { n: u16 },

    PutVariable { reg: Reg, arg: Option<u16> },
    PutValue { reg: Reg, arg: u16 },
    PutConstant { c: Const, arg: u16 },
    PutNil { arg: u16 },
    PutStructure { functor: Functor, arg: u16 },
    PutList { arg: u16 },

    SwitchOnTerm(Box<SwitchTable>),
    Try { clause: CodeAddr, arity: u16 },
    Retry { clause: CodeAddr },
    Trust { clause: CodeAddr },
    Fail,

    /// Cut to the choice point level recorded at predicate entry (`B0`).
    NeckCut,
    /// Cut to the level saved in the current environment.
    Cut,

    Arith { op: ArithOp, dst: Reg, a: Operand, b: Operand },
    Compare { op: CmpOp, a: Operand, b: Operand },
    Is { lhs: Reg, val: Operand },
    Unify { a: Reg, b: Reg },
    TypeTest { check: TypeCheck, reg: Reg },

    /// Query epilogue: records the bindings held in `A1..An`.
    Answer { n: u16 },
}

/// Opcode discriminant; one CFG per opcode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Opcode {
    Enter,
    Allocate,
    Deallocate,
    Call,
    Execute,
    Proceed,
    GetVariable,
    GetValue,
    GetConstant,
    GetNil,
    GetStructure,
    GetList,
    UnifyVariable,
    UnifyValue,
    UnifyConstant,
    UnifyNil,
    UnifyVoid,
    PutVariable,
    PutValue,
    PutConstant,
    PutNil,
    PutStructure,
    PutList,
    SwitchOnTerm,
    Try,
    Retry,
    Trust,
    Fail,
    NeckCut,
    Cut,
    Arith,
    Compare,
    Is,
    Unify,
    TypeTest,
    Answer,
}

impl Opcode {
    pub const ALL: [Opcode; 36] = [
        Opcode::Enter,
        Opcode::Allocate,
        Opcode::Deallocate,
        Opcode::Call,
        Opcode::Execute,
        Opcode::Proceed,
        Opcode::GetVariable,
        Opcode::GetValue,
        Opcode::GetConstant,
        Opcode::GetNil,
        Opcode::GetStructure,
        Opcode::GetList,
        Opcode::UnifyVariable,
        Opcode::UnifyValue,
        Opcode::UnifyConstant,
        Opcode::UnifyNil,
        Opcode::UnifyVoid,
        Opcode::PutVariable,
        Opcode::PutValue,
        Opcode::PutConstant,
        Opcode::PutNil,
        Opcode::PutStructure,
        Opcode::PutList,
        Opcode::SwitchOnTerm,
        Opcode::Try,
        Opcode::Retry,
        Opcode::Trust,
        Opcode::Fail,
        Opcode::NeckCut,
        Opcode::Cut,
        Opcode::Arith,
        Opcode::Compare,
        Opcode::Is,
        Opcode::Unify,
        Opcode::TypeTest,
        Opcode::Answer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Opcode::Enter => "enter",
            Opcode::Allocate => "allocate",
            Opcode::Deallocate => "deallocate",
            Opcode::Call => "call",
            Opcode::Execute => "execute",
            Opcode::Proceed => "proceed",
            Opcode::GetVariable => "get_variable",
            Opcode::GetValue => "get_value",
            Opcode::GetConstant => "get_constant",
            Opcode::GetNil => "get_nil",
            Opcode::GetStructure => "get_structure",
            Opcode::GetList => "get_list",
            Opcode::UnifyVariable => "unify_variable",
            Opcode::UnifyValue => "unify_value",
            Opcode::UnifyConstant => "unify_constant",
            Opcode::UnifyNil => "unify_nil",
            Opcode::UnifyVoid => "unify_void",
            Opcode::PutVariable => "put_variable",
            Opcode::PutValue => "put_value",
            Opcode::PutConstant => "put_constant",
            Opcode::PutNil => "put_nil",
            Opcode::PutStructure => "put_structure",
            Opcode::PutList => "put_list",
            Opcode::SwitchOnTerm => "switch_on_term",
            Opcode::Try => "try",
            Opcode::Retry => "retry",
            Opcode::Trust => "trust",
            Opcode::Fail => "fail",
            Opcode::NeckCut => "neck_cut",
            Opcode::Cut => "cut",
            Opcode::Arith => "arith",
            Opcode::Compare => "compare",
            Opcode::Is => "is",
            Opcode::Unify => "unify",
            Opcode::TypeTest => "type_test",
            Opcode::Answer => "answer",
        }
    }
}

impl Instr {
    pub fn opcode(&self) -> Opcode {
        match self {
            Instr::Enter { .. } => Opcode::Enter,
            Instr::Allocate { .. } => Opcode::Allocate,
            Instr::Deallocate => Opcode::Deallocate,
            Instr::Call { .. } => Opcode::Call,
            Instr::Execute { .. } => Opcode::Execute,
            Instr::Proceed => Opcode::Proceed,
            Instr::GetVariable { .. } => Opcode::GetVariable,
            Instr::GetValue { .. } => Opcode::GetValue,
            Instr::GetConstant { .. } => Opcode::GetConstant,
            Instr::GetNil { .. } => Opcode::GetNil,
            Instr::GetStructure { .. } => Opcode::GetStructure,
            Instr::GetList { .. } => Opcode::GetList,
            Instr::UnifyVariable { .. } => Opcode::UnifyVariable,
            Instr::UnifyValue { .. } => Opcode::UnifyValue,
            Instr::UnifyConstant { .. } => Opcode::UnifyConstant,
            Instr::UnifyNil => Opcode::UnifyNil,
            Instr::UnifyVoid { .. } => Opcode::UnifyVoid,
            Instr::PutVariable { .. } => Opcode::PutVariable,
            Instr::PutValue { .. } => Opcode::PutValue,
            Instr::PutConstant { .. } => Opcode::PutConstant,
            Instr::PutNil { .. } => Opcode::PutNil,
            Instr::PutStructure { .. } => Opcode::PutStructure,
            Instr::PutList { .. } => Opcode::PutList,
            Instr::SwitchOnTerm(_) => Opcode::SwitchOnTerm,
            Instr::Try { .. } => Opcode::Try,
            Instr::Retry { .. } => Opcode::Retry,
            Instr::Trust { .. } => Opcode::Trust,
            Instr::Fail => Opcode::Fail,
            Instr::NeckCut => Opcode::NeckCut,
            Instr::Cut => Opcode::Cut,
            Instr::Arith { .. } => Opcode::Arith,
            Instr::Compare { .. } => Opcode::Compare,
            Instr::Is { .. } => Opcode::Is,
            Instr::Unify { .. } => Opcode::Unify,
            Instr::TypeTest { .. } => Opcode::TypeTest,
            Instr::Answer { .. } => Opcode::Answer,
        }
    }

    /// Heap cells the instruction may push. Structure arguments are pushed by
    /// the `unify_*` instructions that follow in write mode.
    pub fn heap_need(&self) -> usize {
        match self {
            Instr::GetStructure { .. } | Instr::PutStructure { .. } => 1,
            Instr::PutVariable { .. }
            | Instr::UnifyVariable { .. }
            | Instr::UnifyValue { .. }
            | Instr::UnifyConstant { .. }
            | Instr::UnifyNil => 1,
            Instr::UnifyVoid { n } => *n as usize,
            _ => 0,
        }
    }

    pub fn display<'a>(&'a self, symbols: &'a SymbolTable) -> InstrDisplay<'a> {
        InstrDisplay { instr: self, symbols }
    }
}

pub struct InstrDisplay<'a> {
    instr: &'a Instr,
    symbols: &'a SymbolTable,
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reg::X(i) => write!(f, "X{i}"),
            Reg::Y(i) => write!(f, "Y{i}"),
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Reg(r) => write!(f, "{r}"),
            Operand::Int(i) => write!(f, "#{i}"),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Addr(a) => write!(f, "@{a}"),
            Label::Fail => f.write_str("fail"),
        }
    }
}

impl InstrDisplay<'_> {
    fn konst(&self, c: Const) -> String {
        match c {
            Const::Atom(a) => self.symbols.name(a).to_owned(),
            Const::Int(i) => i.to_string(),
            Const::Nil => "[]".to_owned(),
        }
    }
}

impl fmt::Display for InstrDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = self.instr.opcode().name();
        let s = self.symbols;
        match self.instr {
            Instr::Enter { pred, heap } => write!(f, "{name} #{}, {heap}", pred.0),
            Instr::Call { pred } | Instr::Execute { pred } => write!(f, "{name} #{}", pred.0),
            Instr::Allocate { size } => write!(f, "{name} {size}"),
            Instr::GetVariable { reg, arg } | Instr::GetValue { reg, arg } | Instr::PutValue { reg, arg } => {
                write!(f, "{name} {reg}, A{arg}")
            }
            Instr::PutVariable { reg, arg } => match arg {
                Some(a) => write!(f, "{name} {reg}, A{a}"),
                None => write!(f, "{name} {reg}"),
            },
            Instr::GetConstant { c, arg } | Instr::PutConstant { c, arg } => write!(f, "{name} {}, A{arg}", self.konst(*c)),
            Instr::GetNil { arg } | Instr::GetList { arg } | Instr::PutNil { arg } | Instr::PutList { arg } => {
                write!(f, "{name} A{arg}")
            }
            Instr::GetStructure { functor, arg } | Instr::PutStructure { functor, arg } => {
                write!(f, "{name} {}, A{arg}", functor.display(s))
            }
            Instr::UnifyVariable { reg } | Instr::UnifyValue { reg } => write!(f, "{name} {reg}"),
            Instr::UnifyConstant { c } => write!(f, "{name} {}", self.konst(*c)),
            Instr::UnifyVoid { n } => write!(f, "{name} {n}"),
            Instr::SwitchOnTerm(t) => {
                write!(f, "{name} var:{} const:[", t.var)?;
                for (c, l) in &t.consts {
                    write!(f, "{}->{l} ", self.konst(*c))?;
                }
                write!(f, "else {}] list:{} struct:[", t.const_default, t.list)?;
                for (fu, l) in &t.structs {
                    write!(f, "{}->{l} ", fu.display(s))?;
                }
                write!(f, "else {}]", t.struct_default)
            }
            Instr::Try { clause, arity } => write!(f, "{name} @{clause}/{arity}"),
            Instr::Retry { clause } | Instr::Trust { clause } => write!(f, "{name} @{clause}"),
            Instr::Arith { op, dst, a, b } => write!(f, "{} {dst}, {a}, {b}", op.name()),
            Instr::Compare { op, a, b } => write!(f, "{} {a}, {b}", op.name()),
            Instr::Is { lhs, val } => write!(f, "{name} {lhs}, {val}"),
            Instr::Unify { a, b } => write!(f, "{name} {a}, {b}"),
            Instr::TypeTest { check, reg } => write!(f, "{} {reg}", check.name()),
            Instr::Answer { n } => write!(f, "{name} {n}"),
            Instr::Deallocate | Instr::Proceed | Instr::Fail | Instr::NeckCut | Instr::Cut | Instr::UnifyNil => {
                f.write_str(name)
            }
        }
    }
}
