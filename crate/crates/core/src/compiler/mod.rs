//! Compilation of source clauses to WAM-style code, first-argument indexing
//! and linking into a code area plus predicate table.

pub mod codegen;
pub mod index;
pub mod instr;

use std::collections::HashMap;
use std::rc::Rc;

use thiserror::Error;

pub use codegen::{compile_clause, ClauseCode, CompileCtx};
pub use index::build_first_arg_index;
pub use instr::*;

use crate::reader::{self, ParseError, SourceProgram, Term};
use crate::monitor::TraceRecord;
use crate::specialized::SEmulator;
use crate::symbol::{Functor, SymbolTable};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("unsupported builtin in goal {0}")]
    UnsupportedBuiltin(String),
    #[error("not a callable goal: {0}")]
    InvalidGoal(String),
    #[error("clause head is not callable: {0}")]
    InvalidHead(String),
    #[error("{}", .0.iter().map(|p| format!("{p} undefined")).collect::<Vec<_>>().join(", "))]
    Undefined(Vec<String>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PredState {
    Cold,
    Critical,
    Hot,
}

#[derive(Debug, Clone)]
pub struct PredicateEntry {
    pub functor: Functor,
    /// Where calls land: the switch, a try chain, or the only clause.
    pub entry: CodeAddr,
    /// Code address of each clause, in source order.
    pub clauses: Vec<CodeAddr>,
    /// Address of the `switch_on_term`, when indexed.
    pub index: Option<CodeAddr>,
    pub call_counter: u64,
    pub state: PredState,
    /// Counter value at which the entry became critical.
    pub critical_at: u64,
    pub semulator: Option<Rc<SEmulator>>,
    /// Trace kept for a rebuild that could not start recording yet.
    pub semulator_record: Option<TraceRecord>,
    /// Generation of the last installed S.emulator (0 = never installed).
    pub generation: u32,
    pub rebuilds: u32,
    pub rebuild_pending: bool,
    /// Permanently excluded from specialization.
    pub pinned_default: bool,
    pub blacklisted_until: u64,
}

impl PredicateEntry {
    fn new(functor: Functor) -> Self {
        PredicateEntry {
            functor,
            entry: 0,
            clauses: Vec::new(),
            index: None,
            call_counter: 0,
            state: PredState::Cold,
            critical_at: 0,
            semulator: None,
            semulator_record: None,
            generation: 0,
            rebuilds: 0,
            rebuild_pending: false,
            pinned_default: false,
            blacklisted_until: 0,
        }
    }

    /// Clears all specialization state, keeping the compiled code.
    pub fn reset_runtime(&mut self) {
        let clauses = std::mem::take(&mut self.clauses);
        *self = PredicateEntry {
            entry: self.entry,
            clauses,
            index: self.index,
            ..PredicateEntry::new(self.functor)
        };
    }
}

/// Linked program: code area plus predicate table.
#[derive(Debug, Clone)]
pub struct Program {
    pub symbols: SymbolTable,
    pub code: Vec<Instr>,
    pub preds: Vec<PredicateEntry>,
    pub pred_ids: HashMap<Functor, PredId>,
    /// Number of X registers any code in the area may touch.
    pub num_x: usize,
    pub initialization: Option<Term>,
}

/// Compiled query: code address plus the names of its answer variables.
#[derive(Debug, Clone)]
pub struct Query {
    pub entry: CodeAddr,
    pub vars: Vec<String>,
}

impl Program {
    pub fn pred(&self, id: PredId) -> &PredicateEntry {
        &self.preds[id.0 as usize]
    }

    pub fn pred_mut(&mut self, id: PredId) -> &mut PredicateEntry {
        &mut self.preds[id.0 as usize]
    }

    pub fn lookup(&self, name: &str, arity: u32) -> Option<PredId> {
        let sym = self.symbols.lookup(name)?;
        self.pred_ids.get(&Functor::new(sym, arity)).copied()
    }

    pub fn pred_name(&self, id: PredId) -> String {
        if id == PredId::QUERY {
            return "$query/0".to_owned();
        }
        self.pred(id).functor.display(&self.symbols).to_string()
    }

    /// Compiles a query and appends its code to the code area.
    pub fn compile_query(&mut self, goal: &Term) -> Result<Query, CompileError> {
        let mut vars = Vec::new();
        goal.visit_vars(&mut vars);
        let mut names: Vec<String> = Vec::new();
        for v in vars {
            if !v.starts_with('_') && !names.iter().any(|n| n == v) {
                names.push(v.to_owned());
            }
        }
        let goals = reader::conjuncts(goal.clone());
        let mut undefined = Vec::new();
        let mut ctx = CompileCtx {
            symbols: &mut self.symbols,
            preds: &self.pred_ids,
            undefined: &mut undefined,
        };
        let cc = codegen::compile_query_body(&goals, &names, &mut ctx)?;
        if !undefined.is_empty() {
            let names = undefined.iter().map(|f| f.display(&self.symbols).to_string()).collect();
            return Err(CompileError::Undefined(names));
        }
        let entry = self.code.len();
        self.num_x = self.num_x.max(cc.max_x as usize + 1);
        self.code.extend(cc.instrs);
        Ok(Query { entry, vars: names })
    }

    pub fn parse_query(&mut self, text: &str) -> Result<Query, CompileError> {
        let goal = reader::parse_term(text)?;
        self.compile_query(&goal)
    }

    /// Disassembly of the whole code area.
    pub fn disassemble(&self) -> String {
        let mut out = String::new();
        let mut owner: HashMap<CodeAddr, String> = HashMap::new();
        for p in &self.preds {
            owner.insert(p.entry, p.functor.display(&self.symbols).to_string());
        }
        for (addr, ins) in self.code.iter().enumerate() {
            if let Some(name) = owner.get(&addr) {
                out.push_str(&format!("{name}:\n"));
            }
            out.push_str(&format!("{addr:6}  {}\n", ins.display(&self.symbols)));
        }
        out
    }
}

/// Compiles and links a parsed program. Every predicate starts cold with a
/// zero counter.
pub fn link_program(source: &SourceProgram) -> Result<Program, CompileError> {
    let mut symbols = SymbolTable::new();
    // Preserve first-definition order so predicate ids are stable.
    let mut pred_ids: HashMap<Functor, PredId> = HashMap::new();
    let mut preds: Vec<PredicateEntry> = Vec::new();
    let mut grouped: Vec<Vec<usize>> = Vec::new();
    for (i, clause) in source.clauses.iter().enumerate() {
        let (name, arity) = match &clause.head {
            Term::Atom(a) => (a.as_str(), 0),
            Term::Compound(f, args) => (f.as_str(), args.len()),
            other => return Err(CompileError::InvalidHead(other.to_string())),
        };
        let f = Functor::new(symbols.intern(name), arity as u32);
        let id = *pred_ids.entry(f).or_insert_with(|| {
            preds.push(PredicateEntry::new(f));
            grouped.push(Vec::new());
            PredId(preds.len() as u32 - 1)
        });
        grouped[id.0 as usize].push(i);
    }

    let mut code: Vec<Instr> = Vec::new();
    let mut num_x = 1;
    let mut undefined = Vec::new();
    for (p, clause_ids) in grouped.iter().enumerate() {
        let mut compiled = Vec::new();
        for &ci in clause_ids {
            let mut ctx = CompileCtx {
                symbols: &mut symbols,
                preds: &pred_ids,
                undefined: &mut undefined,
            };
            let cc = compile_clause(&source.clauses[ci], PredId(p as u32), &mut ctx)?;
            num_x = num_x.max(cc.max_x as usize + 1);
            compiled.push(cc);
        }
        let first_args: Vec<Option<Term>> = clause_ids
            .iter()
            .map(|&ci| source.clauses[ci].head.args().first().cloned())
            .collect();
        let arity = preds[p].functor.arity as u16;
        let start = code.len();
        let sizes: Vec<usize> = compiled.iter().map(|c| c.instrs.len()).collect();
        let index_code = build_first_arg_index(start, arity, &first_args, &sizes, &mut symbols);
        let index_len = index_code.as_ref().map_or(0, Vec::len);
        let mut addr = start + index_len;
        let entry = &mut preds[p];
        entry.index = match index_code.as_deref() {
            Some([Instr::SwitchOnTerm(_), ..]) => Some(start),
            _ => None,
        };
        entry.entry = start;
        for cc in &compiled {
            entry.clauses.push(addr);
            addr += cc.instrs.len();
        }
        if let Some(ix) = index_code {
            code.extend(ix);
        }
        for cc in compiled {
            code.extend(cc.instrs);
        }
    }
    if !undefined.is_empty() {
        let names = undefined.iter().map(|f| f.display(&symbols).to_string()).collect();
        return Err(CompileError::Undefined(names));
    }
    debug_assert!(code.iter().all(|i| !matches!(i, Instr::Call { pred } | Instr::Execute { pred } if pred.0 == u32::MAX)));
    Ok(Program {
        symbols,
        code,
        preds,
        pred_ids,
        num_x,
        initialization: source.initialization.clone(),
    })
}

/// Parses and links program text.
pub fn load_program(text: &str) -> Result<Program, CompileError> {
    let source = reader::parse_program(text)?;
    link_program(&source)
}

#[cfg(test)]
mod tests;
