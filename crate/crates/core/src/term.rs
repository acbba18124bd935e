//! Heap cells, binding, dereferencing, unification and the trail.
//!
//! Every variable lives on the heap. An unbound variable is a `Ref` cell that
//! points at itself; binding overwrites it with either a `Ref` to another cell
//! or an immediate value. There is no occurs-check, so unifying a variable
//! with a term containing it builds a cyclic term, which is undefined here.

use std::fmt;

use crate::symbol::{Functor, Sym};

pub type Addr = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cell {
    /// Variable reference. Unbound iff it points at its own address.
    Ref(Addr),
    Atom(Sym),
    Int(i64),
    /// Points at a `Functor` cell followed by `arity` argument cells.
    Str(Addr),
    /// Points at two contiguous cells: head, tail.
    List(Addr),
    Nil,
    /// Heap-only header of a structure; never held in a register.
    Functor(Functor),
}

/// Term tag as seen by type tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Ref = 0,
    Atom = 1,
    Int = 2,
    Struct = 3,
    List = 4,
    Nil = 5,
}

impl Tag {
    pub const ALL: [Tag; 6] = [Tag::Ref, Tag::Atom, Tag::Int, Tag::Struct, Tag::List, Tag::Nil];

    pub fn name(self) -> &'static str {
        match self {
            Tag::Ref => "REF",
            Tag::Atom => "ATOM",
            Tag::Int => "INT",
            Tag::Struct => "STRUCT",
            Tag::List => "LIST",
            Tag::Nil => "NIL",
        }
    }
}

impl Cell {
    pub fn tag(self) -> Tag {
        match self {
            Cell::Ref(_) => Tag::Ref,
            Cell::Atom(_) => Tag::Atom,
            Cell::Int(_) => Tag::Int,
            Cell::Str(_) => Tag::Struct,
            Cell::List(_) => Tag::List,
            Cell::Nil => Tag::Nil,
            Cell::Functor(_) => unreachable!("functor header has no term tag"),
        }
    }

    /// Heap address this cell points to, if any.
    pub fn pointer(self) -> Option<Addr> {
        match self {
            Cell::Ref(a) | Cell::Str(a) | Cell::List(a) => Some(a),
            _ => None,
        }
    }

    pub fn with_pointer(self, addr: Addr) -> Cell {
        match self {
            Cell::Ref(_) => Cell::Ref(addr),
            Cell::Str(_) => Cell::Str(addr),
            Cell::List(_) => Cell::List(addr),
            other => other,
        }
    }
}

/// A set of term tags, used to label type-test edges and guards.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct TagSet(u8);

impl TagSet {
    pub const EMPTY: TagSet = TagSet(0);
    pub const ALL: TagSet = TagSet(0b11_1111);
    pub const REF: TagSet = TagSet::of(Tag::Ref);
    pub const NON_REF: TagSet = TagSet(0b11_1110);
    pub const INT: TagSet = TagSet::of(Tag::Int);
    pub const ATOM: TagSet = TagSet::of(Tag::Atom);
    pub const LIST: TagSet = TagSet::of(Tag::List);
    pub const NIL: TagSet = TagSet::of(Tag::Nil);
    pub const STRUCT: TagSet = TagSet::of(Tag::Struct);
    pub const ATOMIC: TagSet = TagSet(TagSet::ATOM.0 | TagSet::INT.0 | TagSet::NIL.0);

    pub const fn of(tag: Tag) -> TagSet {
        TagSet(1 << tag as u8)
    }

    pub const fn union(self, other: TagSet) -> TagSet {
        TagSet(self.0 | other.0)
    }

    pub const fn intersect(self, other: TagSet) -> TagSet {
        TagSet(self.0 & other.0)
    }

    pub const fn minus(self, other: TagSet) -> TagSet {
        TagSet(self.0 & !other.0)
    }

    pub const fn complement(self) -> TagSet {
        TagSet(!self.0 & TagSet::ALL.0)
    }

    pub const fn contains(self, tag: Tag) -> bool {
        self.0 & (1 << tag as u8) != 0
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: TagSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Tag> {
        Tag::ALL.into_iter().filter(move |t| self.contains(*t))
    }
}

impl fmt::Debug for TagSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for TagSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == TagSet::ALL {
            return f.write_str("*");
        }
        f.write_str("{")?;
        for (i, t) in self.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            f.write_str(t.name())?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, Default)]
pub struct Heap {
    cells: Vec<Cell>,
}

impl Heap {
    pub fn new() -> Self {
        Heap::default()
    }

    pub fn with_capacity(cells: usize) -> Self {
        Heap {
            cells: Vec::with_capacity(cells),
        }
    }

    /// Heap top (`H`).
    #[inline]
    pub fn top(&self) -> Addr {
        self.cells.len()
    }

    #[inline]
    pub fn get(&self, addr: Addr) -> Cell {
        self.cells[addr]
    }

    #[inline]
    pub fn set(&mut self, addr: Addr, cell: Cell) {
        self.cells[addr] = cell;
    }

    #[inline]
    pub fn push(&mut self, cell: Cell) -> Addr {
        let addr = self.cells.len();
        self.cells.push(cell);
        addr
    }

    /// Pushes a fresh unbound variable and returns its address.
    #[inline]
    pub fn new_var(&mut self) -> Addr {
        let addr = self.cells.len();
        self.cells.push(Cell::Ref(addr));
        addr
    }

    pub fn truncate(&mut self, top: Addr) {
        self.cells.truncate(top);
    }

    pub fn is_unbound(&self, addr: Addr) -> bool {
        self.cells[addr] == Cell::Ref(addr)
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub(crate) fn replace_cells(&mut self, cells: Vec<Cell>) {
        self.cells = cells;
    }

    pub fn reserve_total(&mut self, total: usize) {
        if total > self.cells.capacity() {
            self.cells.reserve_exact(total - self.cells.len());
        }
    }
}

/// Entry-count checkpoint produced by [`Trail::mark`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrailMark {
    depth: usize,
    len: usize,
}

#[derive(Debug, Clone)]
pub struct Trail {
    entries: Vec<Addr>,
    marks: Vec<usize>,
    /// Variables at or above this address are newer than the youngest choice
    /// point and need no trailing. `usize::MAX` trails everything.
    boundary: Addr,
}

impl Default for Trail {
    fn default() -> Self {
        Trail {
            entries: Vec::new(),
            marks: Vec::new(),
            boundary: usize::MAX,
        }
    }
}

impl Trail {
    pub fn new() -> Self {
        Trail::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Addr] {
        &self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut Vec<Addr> {
        &mut self.entries
    }

    pub fn set_boundary(&mut self, boundary: Addr) {
        self.boundary = boundary;
    }

    #[inline]
    pub fn record(&mut self, addr: Addr) {
        if addr < self.boundary {
            self.entries.push(addr);
        }
    }

    pub fn mark(&mut self) -> TrailMark {
        self.marks.push(self.entries.len());
        TrailMark {
            depth: self.marks.len() - 1,
            len: self.entries.len(),
        }
    }

    pub fn boundary(&self) -> Addr {
        self.boundary
    }

    /// Number of open marks.
    pub fn depth(&self) -> usize {
        self.marks.len()
    }

    /// Undoes back to `mark` but leaves it open, for retrying the same
    /// choice point.
    pub fn restore(&mut self, heap: &mut Heap, mark: TrailMark) {
        assert_eq!(self.marks.len(), mark.depth + 1, "stale trail mark");
        self.undo_to_len(heap, mark.len);
    }

    /// Drops open marks down to `depth` without undoing anything.
    pub fn release_to(&mut self, depth: usize) {
        self.marks.truncate(depth);
    }

    /// Resets every variable trailed after `len` to unbound and truncates.
    pub fn undo_to_len(&mut self, heap: &mut Heap, len: usize) {
        for &addr in &self.entries[len..] {
            heap.set(addr, Cell::Ref(addr));
        }
        self.entries.truncate(len);
    }
}

/// Follows a binding chain from `addr` to a non-variable cell or an unbound variable.
#[inline]
pub fn deref(heap: &Heap, mut addr: Addr) -> Addr {
    loop {
        match heap.get(addr) {
            Cell::Ref(next) if next != addr => addr = next,
            _ => return addr,
        }
    }
}

/// Dereferences a register value. Unbound variables come back as `Ref` to
/// themselves; everything else comes back as the bound value.
#[inline]
pub fn deref_cell(heap: &Heap, mut cell: Cell) -> Cell {
    while let Cell::Ref(addr) = cell {
        let next = heap.get(addr);
        if next == cell {
            return cell;
        }
        cell = next;
    }
    cell
}

/// Binds the unbound variable at `var` to the term at `target`.
pub fn bind(heap: &mut Heap, var: Addr, target: Addr, trail: &mut Trail) {
    bind_cell(heap, var, Cell::Ref(target), trail);
}

/// Binds the unbound variable at `var` to an arbitrary cell value.
#[inline]
pub fn bind_cell(heap: &mut Heap, var: Addr, value: Cell, trail: &mut Trail) {
    assert!(heap.is_unbound(var), "bind on a bound cell at {var}");
    heap.set(var, value);
    trail.record(var);
}

pub fn undo_to_mark(heap: &mut Heap, trail: &mut Trail, mark: TrailMark) {
    assert_eq!(trail.marks.len(), mark.depth + 1, "stale trail mark");
    let len = trail.marks.pop().expect("undo_to_mark without an open mark");
    debug_assert_eq!(len, mark.len);
    trail.undo_to_len(heap, len);
}

/// Unifies the terms stored at two heap addresses.
pub fn unify(heap: &mut Heap, a: Addr, b: Addr, trail: &mut Trail) -> bool {
    unify_cells(heap, Cell::Ref(a), Cell::Ref(b), trail)
}

/// Structural unification of two register values. On failure every binding
/// made during the attempt is undone, whether or not it was trailed.
pub fn unify_cells(heap: &mut Heap, a: Cell, b: Cell, trail: &mut Trail) -> bool {
    let trail_len = trail.len();
    let mut bound: Vec<Addr> = Vec::new();
    if unify_inner(heap, a, b, trail, &mut bound) {
        return true;
    }
    for addr in bound {
        heap.set(addr, Cell::Ref(addr));
    }
    trail.entries.truncate(trail_len);
    false
}

fn unify_inner(heap: &mut Heap, a: Cell, b: Cell, trail: &mut Trail, bound: &mut Vec<Addr>) -> bool {
    let mut work = vec![(a, b)];
    while let Some((a, b)) = work.pop() {
        let a = deref_cell(heap, a);
        let b = deref_cell(heap, b);
        if a == b {
            continue;
        }
        match (a, b) {
            (Cell::Ref(x), Cell::Ref(y)) => {
                // Younger variable points at the older one.
                let (young, old) = if x > y { (x, y) } else { (y, x) };
                bind_cell(heap, young, Cell::Ref(old), trail);
                bound.push(young);
            }
            (Cell::Ref(x), other) | (other, Cell::Ref(x)) => {
                bind_cell(heap, x, other, trail);
                bound.push(x);
            }
            (Cell::Str(x), Cell::Str(y)) => {
                let (fx, fy) = (heap.get(x), heap.get(y));
                if fx != fy {
                    return false;
                }
                let Cell::Functor(f) = fx else {
                    unreachable!("structure pointer at {x} does not address a functor")
                };
                for i in (1..=f.arity as usize).rev() {
                    work.push((heap.get(x + i), heap.get(y + i)));
                }
            }
            (Cell::List(x), Cell::List(y)) => {
                work.push((heap.get(x + 1), heap.get(y + 1)));
                work.push((heap.get(x), heap.get(y)));
            }
            _ => return false,
        }
    }
    true
}
