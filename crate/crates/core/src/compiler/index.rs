//! Static first-argument indexing.

use super::instr::{CodeAddr, Const, Instr, Label, SwitchTable};
use crate::reader::Term;
use crate::symbol::{Functor, SymbolTable};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Key {
    Var,
    Const(Const),
    List,
    Struct(Functor),
}

fn key_of(t: Option<&Term>, symbols: &mut SymbolTable) -> Key {
    match t {
        None | Some(Term::Var(_)) => Key::Var,
        Some(Term::Int(i)) => Key::Const(Const::Int(*i)),
        Some(Term::Atom(a)) if a == "[]" => Key::Const(Const::Nil),
        Some(Term::Atom(a)) => Key::Const(Const::Atom(symbols.intern(a))),
        Some(Term::Compound(f, args)) if f == "." && args.len() == 2 => Key::List,
        Some(Term::Compound(f, args)) => Key::Struct(Functor::new(symbols.intern(f), args.len() as u32)),
    }
}

/// Builds the dispatch code placed at `start`, in front of the clauses of a
/// predicate. `sizes[i]` is the code length of clause `i`; clauses are laid
/// out contiguously right after the returned code.
///
/// Single-clause predicates get no index. Nullary predicates with several
/// clauses get a bare try chain.
pub fn build_first_arg_index(
    start: CodeAddr,
    arity: u16,
    first_args: &[Option<Term>],
    sizes: &[usize],
    symbols: &mut SymbolTable,
) -> Option<Vec<Instr>> {
    let n = first_args.len();
    if n < 2 {
        return None;
    }
    let all: Vec<usize> = (0..n).collect();
    if arity == 0 {
        let offsets = clause_offsets(start + n, sizes);
        return Some(chain(&all, &offsets, arity));
    }

    let keys: Vec<Key> = first_args.iter().map(|t| key_of(t.as_ref(), symbols)).collect();
    let select = |pred: &dyn Fn(Key) -> bool| -> Vec<usize> {
        (0..n).filter(|&i| keys[i] == Key::Var || pred(keys[i])).collect()
    };
    let mut const_keys: Vec<Const> = Vec::new();
    let mut struct_keys: Vec<Functor> = Vec::new();
    for k in &keys {
        match *k {
            Key::Const(c) if !const_keys.contains(&c) => const_keys.push(c),
            Key::Struct(f) if !struct_keys.contains(&f) => struct_keys.push(f),
            _ => {}
        }
    }
    let const_sets: Vec<Vec<usize>> = const_keys.iter().map(|c| select(&|k| k == Key::Const(*c))).collect();
    let struct_sets: Vec<Vec<usize>> = struct_keys.iter().map(|f| select(&|k| k == Key::Struct(*f))).collect();
    let var_only = select(&|_| false);
    let list_set = select(&|k| k == Key::List);

    // Distinct multi-clause subsets each get one try chain.
    let mut chains: Vec<Vec<usize>> = vec![all.clone()];
    for s in const_sets.iter().chain(&struct_sets).chain([&var_only, &list_set]) {
        if s.len() >= 2 && !chains.contains(s) {
            chains.push(s.clone());
        }
    }
    let index_len = 1 + chains.iter().map(Vec::len).sum::<usize>();
    let offsets = clause_offsets(start + index_len, sizes);
    let mut chain_addr = Vec::new();
    let mut code = Vec::new();
    let mut at = start + 1;
    for c in &chains {
        chain_addr.push(at);
        at += c.len();
        code.extend(chain(c, &offsets, arity));
    }
    let label = |s: &Vec<usize>| -> Label {
        match s.len() {
            0 => Label::Fail,
            1 => Label::Addr(offsets[s[0]]),
            _ => Label::Addr(chain_addr[chains.iter().position(|c| c == s).unwrap()]),
        }
    };
    let table = SwitchTable {
        var: label(&all),
        consts: const_keys.iter().zip(&const_sets).map(|(c, s)| (*c, label(s))).collect(),
        const_default: label(&var_only),
        list: label(&list_set),
        structs: struct_keys.iter().zip(&struct_sets).map(|(f, s)| (*f, label(s))).collect(),
        struct_default: label(&var_only),
    };
    let mut out = vec![Instr::SwitchOnTerm(Box::new(table))];
    out.extend(code);
    Some(out)
}

fn clause_offsets(mut at: CodeAddr, sizes: &[usize]) -> Vec<CodeAddr> {
    sizes
        .iter()
        .map(|s| {
            let a = at;
            at += s;
            a
        })
        .collect()
}

fn chain(clauses: &[usize], offsets: &[CodeAddr], arity: u16) -> Vec<Instr> {
    let last = clauses.len() - 1;
    clauses
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let clause = offsets[c];
            match i {
                0 => Instr::Try { clause, arity },
                i if i == last => Instr::Trust { clause },
                _ => Instr::Retry { clause },
            }
        })
        .collect()
}
