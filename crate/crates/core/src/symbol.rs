//! Atom and functor-name interning.

use std::collections::HashMap;
use std::fmt;

/// Interned atom or functor name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sym(pub u32);

#[derive(Debug, Default, Clone)]
pub struct SymbolTable {
    names: Vec<String>,
    ids: HashMap<String, Sym>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> Sym {
        if let Some(&sym) = self.ids.get(name) {
            return sym;
        }
        let sym = Sym(self.names.len() as u32);
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), sym);
        sym
    }

    pub fn lookup(&self, name: &str) -> Option<Sym> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, sym: Sym) -> &str {
        &self.names[sym.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// `name/arity`, used for predicate keys and diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Functor {
    pub name: Sym,
    pub arity: u32,
}

impl Functor {
    pub fn new(name: Sym, arity: u32) -> Self {
        Functor { name, arity }
    }

    pub fn display<'a>(&self, symbols: &'a SymbolTable) -> FunctorDisplay<'a> {
        FunctorDisplay {
            name: symbols.name(self.name),
            arity: self.arity,
        }
    }
}

pub struct FunctorDisplay<'a> {
    name: &'a str,
    arity: u32,
}

impl fmt::Display for FunctorDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}
