//! Clause compilation: head matching, body goals, inline builtins.

use std::collections::{HashMap, HashSet};

use super::instr::{ArithOp, CmpOp, Const, Instr, Operand, PredId, Reg, TypeCheck};
use super::CompileError;
use crate::reader::{SourceClause, Term};
use crate::symbol::{Functor, SymbolTable};

/// Resolves predicate calls while compiling; unresolved names are collected
/// and reported together at link time.
pub struct CompileCtx<'a> {
    pub symbols: &'a mut SymbolTable,
    pub preds: &'a HashMap<Functor, PredId>,
    pub undefined: &'a mut Vec<Functor>,
}

impl CompileCtx<'_> {
    fn functor(&mut self, name: &str, arity: usize) -> Functor {
        Functor::new(self.symbols.intern(name), arity as u32)
    }

    fn resolve(&mut self, name: &str, arity: usize) -> PredId {
        let f = self.functor(name, arity);
        match self.preds.get(&f) {
            Some(id) => *id,
            None => {
                if !self.undefined.contains(&f) {
                    self.undefined.push(f);
                }
                PredId(u32::MAX)
            }
        }
    }

    fn konst(&mut self, t: &Term) -> Option<Const> {
        match t {
            Term::Int(i) => Some(Const::Int(*i)),
            Term::Atom(a) if a == "[]" => Some(Const::Nil),
            Term::Atom(a) => Some(Const::Atom(self.symbols.intern(a))),
            _ => None,
        }
    }
}

#[derive(Debug)]
enum Goal<'t> {
    Call(&'t str, &'t [Term]),
    Cut,
    Fail,
    Unify(&'t Term, &'t Term),
    Is(&'t Term, &'t Term),
    Compare(CmpOp, &'t Term, &'t Term),
    Type(TypeCheck, &'t Term),
    /// Query epilogue reporting the named variables.
    Answer(Vec<Term>),
}

impl Goal<'_> {
    fn is_call(&self) -> bool {
        matches!(self, Goal::Call(..) | Goal::Answer(_))
    }
}

const UNSUPPORTED: &[(&str, usize)] = &[
    (";", 2),
    ("->", 2),
    ("\\+", 1),
    ("\\=", 2),
    ("==", 2),
    ("\\==", 2),
    ("call", 1),
    ("findall", 3),
    ("assert", 1),
    ("asserta", 1),
    ("assertz", 1),
    ("retract", 1),
    ("write", 1),
    ("nl", 0),
    ("halt", 0),
    ("functor", 3),
    ("arg", 3),
    ("=..", 2),
];

fn classify(goal: &Term) -> Result<Option<Goal<'_>>, CompileError> {
    let (name, args) = match goal {
        Term::Atom(a) => (a.as_str(), &[][..]),
        Term::Compound(f, args) => (f.as_str(), args.as_slice()),
        other => return Err(CompileError::InvalidGoal(other.to_string())),
    };
    let g = match (name, args) {
        ("true", []) => return Ok(None),
        ("!", []) => Goal::Cut,
        ("fail" | "false", []) => Goal::Fail,
        ("=", [a, b]) => Goal::Unify(a, b),
        ("is", [a, b]) => Goal::Is(a, b),
        ("<", [a, b]) => Goal::Compare(CmpOp::Lt, a, b),
        ("=<", [a, b]) => Goal::Compare(CmpOp::Le, a, b),
        (">", [a, b]) => Goal::Compare(CmpOp::Gt, a, b),
        (">=", [a, b]) => Goal::Compare(CmpOp::Ge, a, b),
        ("=:=", [a, b]) => Goal::Compare(CmpOp::Eq, a, b),
        ("=\\=", [a, b]) => Goal::Compare(CmpOp::Ne, a, b),
        ("var", [a]) => Goal::Type(TypeCheck::Var, a),
        ("nonvar", [a]) => Goal::Type(TypeCheck::Nonvar, a),
        ("integer", [a]) => Goal::Type(TypeCheck::Integer, a),
        ("atom", [a]) => Goal::Type(TypeCheck::Atom, a),
        ("atomic", [a]) => Goal::Type(TypeCheck::Atomic, a),
        ("compound", [a]) => Goal::Type(TypeCheck::Compound, a),
        _ => {
            if UNSUPPORTED.contains(&(name, args.len())) {
                return Err(CompileError::UnsupportedBuiltin(goal.to_string()));
            }
            Goal::Call(name, args)
        }
    };
    Ok(Some(g))
}

/// Compiled code of one clause (addresses are resolved later by the linker).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClauseCode {
    pub instrs: Vec<Instr>,
    /// Highest X register index used.
    pub max_x: u16,
}

struct Gen<'c, 'a> {
    ctx: &'c mut CompileCtx<'a>,
    out: Vec<Instr>,
    regs: HashMap<String, Reg>,
    seen: HashSet<String>,
    occurrences: HashMap<String, usize>,
    next_x: u16,
    has_env: bool,
}

impl Gen<'_, '_> {
    fn temp(&mut self) -> u16 {
        let t = self.next_x;
        self.next_x += 1;
        t
    }

    fn is_void(&self, v: &str) -> bool {
        self.occurrences.get(v).copied().unwrap_or(0) <= 1
    }

    fn reg_of(&mut self, v: &str) -> Reg {
        if let Some(r) = self.regs.get(v) {
            return *r;
        }
        let r = Reg::X(self.temp());
        self.regs.insert(v.to_owned(), r);
        r
    }

    /// Returns (register, first occurrence).
    fn var(&mut self, v: &str) -> (Reg, bool) {
        let r = self.reg_of(v);
        (r, self.seen.insert(v.to_owned()))
    }

    /// With `reuse_args`, a temporary first seen as a top-level argument
    /// lives in that argument register. Only safe when no call follows,
    /// since argument setup for a call would overwrite it.
    fn head(&mut self, args: &[Term], reuse_args: bool) {
        let mut pending: Vec<(u16, &Term)> = Vec::new();
        for (i, arg) in args.iter().enumerate() {
            let ai = i as u16 + 1;
            match arg {
                Term::Var(v) => {
                    if self.is_void(v) {
                        continue;
                    }
                    if reuse_args && !self.regs.contains_key(v) {
                        self.regs.insert(v.clone(), Reg::X(ai));
                        self.seen.insert(v.clone());
                        continue;
                    }
                    let (reg, first) = self.var(v);
                    self.out.push(if first {
                        Instr::GetVariable { reg, arg: ai }
                    } else {
                        Instr::GetValue { reg, arg: ai }
                    });
                }
                Term::Compound(..) => self.get_compound(arg, ai, &mut pending),
                constant => {
                    let c = self.ctx.konst(constant).expect("atomic head argument");
                    self.out.push(match c {
                        Const::Nil => Instr::GetNil { arg: ai },
                        c => Instr::GetConstant { c, arg: ai },
                    });
                }
            }
        }
        let mut i = 0;
        while i < pending.len() {
            let (x, t) = pending[i];
            self.get_compound(t, x, &mut pending);
            i += 1;
        }
    }

    fn get_compound<'t>(&mut self, t: &'t Term, xi: u16, pending: &mut Vec<(u16, &'t Term)>) {
        let Term::Compound(name, args) = t else { unreachable!() };
        if name == "." && args.len() == 2 {
            self.out.push(Instr::GetList { arg: xi });
        } else {
            let functor = self.ctx.functor(name, args.len());
            self.out.push(Instr::GetStructure { functor, arg: xi });
        }
        for a in args {
            match a {
                Term::Var(v) => {
                    if self.is_void(v) {
                        self.out.push(Instr::UnifyVoid { n: 1 });
                        continue;
                    }
                    let (reg, first) = self.var(v);
                    self.out.push(if first {
                        Instr::UnifyVariable { reg }
                    } else {
                        Instr::UnifyValue { reg }
                    });
                }
                Term::Compound(..) => {
                    let x = self.temp();
                    self.out.push(Instr::UnifyVariable { reg: Reg::X(x) });
                    pending.push((x, a));
                }
                constant => {
                    let c = self.ctx.konst(constant).expect("atomic argument");
                    self.out.push(match c {
                        Const::Nil => Instr::UnifyNil,
                        c => Instr::UnifyConstant { c },
                    });
                }
            }
        }
    }

    /// Builds a compound term bottom-up into X register `target`.
    fn build(&mut self, t: &Term, target: u16) {
        let Term::Compound(name, args) = t else { unreachable!() };
        let nested: Vec<Option<u16>> = args
            .iter()
            .map(|a| {
                if let Term::Compound(..) = a {
                    let x = self.temp();
                    self.build(a, x);
                    Some(x)
                } else {
                    None
                }
            })
            .collect();
        if name == "." && args.len() == 2 {
            self.out.push(Instr::PutList { arg: target });
        } else {
            let functor = self.ctx.functor(name, args.len());
            self.out.push(Instr::PutStructure { functor, arg: target });
        }
        for (a, n) in args.iter().zip(nested) {
            if let Some(x) = n {
                self.out.push(Instr::UnifyValue { reg: Reg::X(x) });
                continue;
            }
            match a {
                Term::Var(v) => {
                    if self.is_void(v) {
                        self.out.push(Instr::UnifyVoid { n: 1 });
                        continue;
                    }
                    let (reg, first) = self.var(v);
                    self.out.push(if first {
                        Instr::UnifyVariable { reg }
                    } else {
                        Instr::UnifyValue { reg }
                    });
                }
                constant => {
                    let c = self.ctx.konst(constant).expect("atomic argument");
                    self.out.push(match c {
                        Const::Nil => Instr::UnifyNil,
                        c => Instr::UnifyConstant { c },
                    });
                }
            }
        }
    }

    fn put_args(&mut self, args: &[Term]) {
        for (j, arg) in args.iter().enumerate() {
            let aj = j as u16 + 1;
            match arg {
                Term::Var(v) => {
                    if self.is_void(v) {
                        let reg = Reg::X(self.temp());
                        self.out.push(Instr::PutVariable { reg, arg: Some(aj) });
                        continue;
                    }
                    let (reg, first) = self.var(v);
                    self.out.push(if first {
                        Instr::PutVariable { reg, arg: Some(aj) }
                    } else {
                        Instr::PutValue { reg, arg: aj }
                    });
                }
                Term::Compound(..) => self.build(arg, aj),
                constant => {
                    let c = self.ctx.konst(constant).expect("atomic argument");
                    self.out.push(match c {
                        Const::Nil => Instr::PutNil { arg: aj },
                        c => Instr::PutConstant { c, arg: aj },
                    });
                }
            }
        }
    }

    /// Puts an arbitrary term in a register for an inline builtin.
    fn materialize(&mut self, t: &Term) -> Reg {
        match t {
            Term::Var(v) => {
                let (reg, first) = if self.is_void(v) {
                    (Reg::X(self.temp()), true)
                } else {
                    self.var(v)
                };
                if first {
                    self.out.push(Instr::PutVariable { reg, arg: None });
                }
                reg
            }
            Term::Compound(..) => {
                let x = self.temp();
                self.build(t, x);
                Reg::X(x)
            }
            constant => {
                let x = self.temp();
                let c = self.ctx.konst(constant).expect("atomic term");
                self.out.push(match c {
                    Const::Nil => Instr::PutNil { arg: x },
                    c => Instr::PutConstant { c, arg: x },
                });
                Reg::X(x)
            }
        }
    }

    fn eval(&mut self, t: &Term) -> Operand {
        match t {
            Term::Int(i) => Operand::Int(*i),
            Term::Compound(op, args) if args.len() == 2 => {
                let aop = match op.as_str() {
                    "+" => ArithOp::Add,
                    "-" => ArithOp::Sub,
                    "*" => ArithOp::Mul,
                    "//" | "/" => ArithOp::IntDiv,
                    "mod" => ArithOp::Mod,
                    "rem" => ArithOp::Rem,
                    _ => return Operand::Reg(self.materialize(t)),
                };
                let a = self.eval(&args[0]);
                let b = self.eval(&args[1]);
                let dst = Reg::X(self.temp());
                self.out.push(Instr::Arith { op: aop, dst, a, b });
                Operand::Reg(dst)
            }
            Term::Compound(op, args) if args.len() == 1 && op == "-" => {
                let b = self.eval(&args[0]);
                let dst = Reg::X(self.temp());
                self.out.push(Instr::Arith {
                    op: ArithOp::Sub,
                    dst,
                    a: Operand::Int(0),
                    b,
                });
                Operand::Reg(dst)
            }
            Term::Compound(op, args) if args.len() == 1 && op == "+" => self.eval(&args[0]),
            other => Operand::Reg(self.materialize(other)),
        }
    }
}

fn count_vars(t: &Term, counts: &mut HashMap<String, usize>, chunks: &mut HashMap<String, HashSet<usize>>, chunk: usize) {
    let mut vs = Vec::new();
    t.visit_vars(&mut vs);
    for v in vs {
        *counts.entry(v.to_owned()).or_default() += 1;
        chunks.entry(v.to_owned()).or_default().insert(chunk);
    }
}

fn goal_terms<'t>(g: &'t Goal<'t>) -> Vec<&'t Term> {
    match g {
        Goal::Call(_, args) => args.iter().collect(),
        Goal::Unify(a, b) | Goal::Is(a, b) | Goal::Compare(_, a, b) => vec![a, b],
        Goal::Type(_, a) => vec![a],
        Goal::Answer(vs) => vs.iter().collect(),
        Goal::Cut | Goal::Fail => vec![],
    }
}

fn compile_body(
    head: Option<(&Term, PredId)>,
    body: &[Term],
    answer: Option<Vec<Term>>,
    ctx: &mut CompileCtx<'_>,
) -> Result<ClauseCode, CompileError> {
    let mut goals = Vec::new();
    for g in body {
        if let Some(g) = classify(g)? {
            goals.push(g);
        }
    }
    if let Some(vs) = answer {
        goals.push(Goal::Answer(vs));
    }

    let mut counts = HashMap::new();
    let mut chunks: HashMap<String, HashSet<usize>> = HashMap::new();
    if let Some((h, _)) = head {
        count_vars(h, &mut counts, &mut chunks, 0);
    }
    let mut chunk = 0;
    for g in &goals {
        for t in goal_terms(g) {
            count_vars(t, &mut counts, &mut chunks, chunk);
        }
        if g.is_call() {
            chunk += 1;
        }
    }
    let calls = goals.iter().filter(|g| g.is_call()).count();
    let last_is_call = goals.last().is_some_and(|g| g.is_call());
    let has_env = calls >= 2 || (calls == 1 && !last_is_call) || goals.iter().any(|g| matches!(g, Goal::Answer(_)));

    let mut regs = HashMap::new();
    let mut ys = 0u16;
    if has_env {
        // Permanent variables in order of first occurrence.
        let mut order: Vec<String> = Vec::new();
        let mut push_vars = |t: &Term| {
            let mut vs = Vec::new();
            t.visit_vars(&mut vs);
            for v in vs {
                if !order.iter().any(|o| o == v) {
                    order.push(v.to_owned());
                }
            }
        };
        if let Some((h, _)) = head {
            push_vars(h);
        }
        for g in &goals {
            goal_terms(g).into_iter().for_each(&mut push_vars);
        }
        for v in order {
            if chunks[&v].len() > 1 {
                ys += 1;
                regs.insert(v, Reg::Y(ys));
            }
        }
    }

    let head_arity = head.map_or(0, |(h, _)| h.args().len());
    let max_arity = goals
        .iter()
        .map(|g| match g {
            Goal::Call(_, args) => args.len(),
            Goal::Answer(vs) => vs.len(),
            _ => 0,
        })
        .chain(std::iter::once(head_arity))
        .max()
        .unwrap_or(0);

    let mut gen = Gen {
        ctx,
        out: Vec::new(),
        regs,
        seen: HashSet::new(),
        occurrences: counts,
        next_x: max_arity as u16 + 1,
        has_env,
    };
    let pred = head.map_or(PredId::QUERY, |(_, p)| p);
    gen.out.push(Instr::Enter { pred, heap: 0 });
    if has_env {
        gen.out.push(Instr::Allocate { size: ys });
    }
    if let Some((h, _)) = head {
        gen.head(h.args(), calls == 0);
    }
    let n = goals.len();
    let mut ends_with_call = false;
    for (i, g) in goals.into_iter().enumerate() {
        let last = i + 1 == n;
        match g {
            Goal::Call(name, args) => {
                gen.put_args(args);
                let pred = gen.ctx.resolve(name, args.len());
                if last {
                    if gen.has_env {
                        gen.out.push(Instr::Deallocate);
                    }
                    gen.out.push(Instr::Execute { pred });
                    ends_with_call = true;
                } else {
                    gen.out.push(Instr::Call { pred });
                }
            }
            Goal::Answer(vs) => {
                gen.put_args(&vs);
                gen.out.push(Instr::Answer { n: vs.len() as u16 });
                ends_with_call = true;
            }
            Goal::Cut => gen.out.push(if gen.has_env { Instr::Cut } else { Instr::NeckCut }),
            Goal::Fail => gen.out.push(Instr::Fail),
            Goal::Unify(a, b) => {
                let a = gen.materialize(a);
                let b = gen.materialize(b);
                gen.out.push(Instr::Unify { a, b });
            }
            Goal::Is(lhs, rhs) => {
                let val = gen.eval(rhs);
                let lhs = gen.materialize(lhs);
                gen.out.push(Instr::Is { lhs, val });
            }
            Goal::Compare(op, a, b) => {
                let a = gen.eval(a);
                let b = gen.eval(b);
                gen.out.push(Instr::Compare { op, a, b });
            }
            Goal::Type(check, a) => {
                let reg = gen.materialize(a);
                gen.out.push(Instr::TypeTest { check, reg });
            }
        }
    }
    if !ends_with_call {
        if gen.has_env {
            gen.out.push(Instr::Deallocate);
        }
        gen.out.push(Instr::Proceed);
    }
    let need: usize = gen.out.iter().map(Instr::heap_need).sum();
    gen.out[0] = Instr::Enter { pred, heap: need as u32 };
    Ok(ClauseCode {
        max_x: gen.next_x - 1,
        instrs: gen.out,
    })
}

/// Compiles one clause of predicate `pred`.
pub fn compile_clause(clause: &SourceClause, pred: PredId, ctx: &mut CompileCtx<'_>) -> Result<ClauseCode, CompileError> {
    compile_body(Some((&clause.head, pred)), &clause.body, None, ctx)
}

/// Compiles a query; its code ends in `answer` over `vars` instead of `proceed`.
pub fn compile_query_body(goals: &[Term], vars: &[String], ctx: &mut CompileCtx<'_>) -> Result<ClauseCode, CompileError> {
    let answer = vars.iter().map(|v| Term::Var(v.clone())).collect();
    compile_body(None, goals, Some(answer), ctx)
}
