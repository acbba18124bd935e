//! Printing of answer bindings in canonical syntax.

use std::collections::HashMap;
use std::fmt::Write;

use crate::symbol::SymbolTable;
use crate::term::{deref_cell, Addr, Cell, Heap};

struct Renderer<'a> {
    heap: &'a Heap,
    symbols: &'a SymbolTable,
    /// Unbound variables, numbered by first appearance.
    names: HashMap<Addr, usize>,
    out: String,
}

impl Renderer<'_> {
    fn term(&mut self, c: Cell) {
        match deref_cell(self.heap, c) {
            Cell::Ref(a) => {
                let n = self.names.len();
                let n = *self.names.entry(a).or_insert(n);
                let _ = write!(self.out, "_G{n}");
            }
            Cell::Atom(s) => self.out.push_str(self.symbols.name(s)),
            Cell::Int(i) => {
                let _ = write!(self.out, "{i}");
            }
            Cell::Nil => self.out.push_str("[]"),
            Cell::List(mut a) => {
                self.out.push('[');
                self.term(self.heap.get(a));
                loop {
                    match deref_cell(self.heap, self.heap.get(a + 1)) {
                        Cell::List(b) => {
                            self.out.push(',');
                            self.term(self.heap.get(b));
                            a = b;
                        }
                        Cell::Nil => break,
                        other => {
                            self.out.push('|');
                            self.term(other);
                            break;
                        }
                    }
                }
                self.out.push(']');
            }
            Cell::Str(a) => {
                let Cell::Functor(f) = self.heap.get(a) else {
                    unreachable!("structure without functor at {a}")
                };
                self.out.push_str(self.symbols.name(f.name));
                self.out.push('(');
                for i in 0..f.arity as usize {
                    if i > 0 {
                        self.out.push(',');
                    }
                    self.term(self.heap.get(a + 1 + i));
                }
                self.out.push(')');
            }
            Cell::Functor(_) => unreachable!("functor cell in a register"),
        }
    }
}

/// Renders `X = v, Y = w`, or `yes` for a query without variables.
pub(crate) fn answer(heap: &Heap, symbols: &SymbolTable, names: &[String], vals: &[Cell]) -> String {
    if names.is_empty() {
        return "yes".to_owned();
    }
    let mut r = Renderer {
        heap,
        symbols,
        names: HashMap::new(),
        out: String::new(),
    };
    for (i, (n, v)) in names.iter().zip(vals).enumerate() {
        if i > 0 {
            r.out.push_str(", ");
        }
        r.out.push_str(n);
        r.out.push_str(" = ");
        r.term(*v);
    }
    r.out
}
