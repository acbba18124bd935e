//! Heap reclamation: order-preserving mark and compact.
//!
//! Compaction keeps relative cell order, so binding direction and every
//! choice point's saved heap top stay meaningful after remapping.

use super::{Component, Machine, MachineError};
use crate::term::{Addr, Cell};

fn mark_from(cells: &[Cell], live: &mut [bool], root: Cell, stack: &mut Vec<Cell>) {
    stack.push(root);
    while let Some(c) = stack.pop() {
        match c {
            Cell::Ref(a) => {
                if !live[a] {
                    live[a] = true;
                    if cells[a] != Cell::Ref(a) {
                        stack.push(cells[a]);
                    }
                }
            }
            Cell::List(a) => {
                for i in a..a + 2 {
                    if !live[i] {
                        live[i] = true;
                        stack.push(cells[i]);
                    }
                }
            }
            Cell::Str(a) => {
                if live[a] {
                    continue;
                }
                let Cell::Functor(f) = cells[a] else {
                    unreachable!("structure without functor at {a}")
                };
                live[a] = true;
                for i in a + 1..=a + f.arity as usize {
                    if !live[i] {
                        live[i] = true;
                        stack.push(cells[i]);
                    }
                }
            }
            _ => {}
        }
    }
}

impl Machine {
    /// Compacts the heap and grows it if less than half is free afterwards.
    /// `need` is the number of cells the interrupted instruction reserves.
    pub(crate) fn reclaim_heap(&mut self, need: usize) -> Result<(), MachineError> {
        self.timer.enter(Component::GarbageCollector);
        self.stats.reclamations += 1;
        if self.in_semulator {
            self.stats.reclamations_in_semulator += 1;
        }
        self.compact();
        self.timer.leave();

        let live = self.heap.top();
        if live + need > self.heap_capacity / 2 {
            self.timer.enter(Component::Overflow);
            let mut cap = self.heap_capacity;
            while live + need > cap / 2 {
                cap *= 2;
            }
            if cap > self.config.max_heap_cells {
                self.timer.leave();
                return Err(MachineError::HeapExhausted {
                    live: live + need,
                    limit: self.config.max_heap_cells,
                });
            }
            self.heap_capacity = cap;
            self.heap.reserve_total(cap);
            self.stats.heap_doublings += 1;
            self.timer.leave();
        }
        Ok(())
    }

    fn compact(&mut self) {
        let cells = self.heap.cells();
        let n = cells.len();
        let mut live = vec![false; n];
        let mut stack = Vec::new();
        for &c in &self.x {
            mark_from(cells, &mut live, c, &mut stack);
        }
        for f in &self.frames {
            for &c in &f.ys {
                mark_from(cells, &mut live, c, &mut stack);
            }
        }
        for cp in &self.cps {
            for &c in &cp.args {
                mark_from(cells, &mut live, c, &mut stack);
            }
        }
        for &a in self.trail.entries() {
            if a < n {
                mark_from(cells, &mut live, Cell::Ref(a), &mut stack);
            }
        }

        // fwd[i] = live cells below i, for every i in 0..=n.
        let mut fwd = Vec::with_capacity(n + 1);
        let mut k = 0;
        for &l in &live {
            fwd.push(k);
            k += l as usize;
        }
        fwd.push(k);
        let remap = |c: Cell| -> Cell {
            match c.pointer() {
                Some(a) => c.with_pointer(fwd[a]),
                None => c,
            }
        };
        let mut to = Vec::with_capacity(self.heap_capacity.max(k));
        for (i, &c) in cells.iter().enumerate() {
            if live[i] {
                to.push(remap(c));
            }
        }
        self.heap.replace_cells(to);
        for c in self.x.iter_mut() {
            *c = remap(*c);
        }
        for f in self.frames.iter_mut() {
            for c in f.ys.iter_mut() {
                *c = remap(*c);
            }
        }
        for cp in self.cps.iter_mut() {
            for c in cp.args.iter_mut() {
                *c = remap(*c);
            }
            cp.h = fwd[cp.h.min(n)];
        }
        for a in self.trail.entries_mut().iter_mut() {
            *a = fwd[(*a).min(n)];
        }
        let b: Addr = self.trail.boundary();
        if b != usize::MAX {
            self.trail.set_boundary(fwd[b.min(n)]);
        }
    }
}
