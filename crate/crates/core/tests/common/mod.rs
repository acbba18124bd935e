//! Reference tree-walking interpreter and random program generator shared by
//! the integration tests.

#![allow(dead_code)]

use std::fmt::Write;
use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::Rng;

use tracewam::compiler::load_program;
use tracewam::machine::{Config, Machine};

/// Terms with numbered variables. Lists use `'.'/2` and `[]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum T {
    V(usize),
    A(&'static str),
    I(i64),
    S(&'static str, Vec<T>),
}

pub fn cons(h: T, t: T) -> T {
    T::S(".", vec![h, t])
}

pub const NIL: T = T::A("[]");

#[derive(Clone, Debug)]
pub struct Clause {
    pub head: T,
    pub body: Vec<T>,
    pub nvars: usize,
}

#[derive(Clone, Debug)]
pub struct Program {
    pub clauses: Vec<Clause>,
}

impl Program {
    pub fn text(&self) -> String {
        let mut out = String::new();
        for c in &self.clauses {
            out.push_str(&source(&c.head, "V"));
            if !c.body.is_empty() {
                out.push_str(" :- ");
                let goals: Vec<String> = c.body.iter().map(|g| source(g, "V")).collect();
                out.push_str(&goals.join(", "));
            }
            out.push_str(".\n");
        }
        out
    }
}

const INFIX: [&str; 10] = ["=", "is", "<", ">", "=<", ">=", "+", "-", "*", "//"];

/// Source syntax; variable `i` is written `{prefix}{i}`.
pub fn source(t: &T, prefix: &str) -> String {
    match t {
        T::V(i) => format!("{prefix}{i}"),
        T::A(a) => a.to_string(),
        T::I(i) => i.to_string(),
        T::S(".", _) => {
            let mut out = String::from("[");
            let mut t = t;
            let mut first = true;
            loop {
                match t {
                    T::S(".", a) => {
                        if !first {
                            out.push(',');
                        }
                        first = false;
                        out.push_str(&source(&a[0], prefix));
                        t = &a[1];
                    }
                    T::A("[]") => break,
                    other => {
                        out.push('|');
                        out.push_str(&source(other, prefix));
                        break;
                    }
                }
            }
            out.push(']');
            out
        }
        T::S(f, a) if a.len() == 2 && (INFIX.contains(f) || *f == "mod") => {
            format!("({} {f} {})", source(&a[0], prefix), source(&a[1], prefix))
        }
        T::S(f, a) => {
            let args: Vec<String> = a.iter().map(|x| source(x, prefix)).collect();
            format!("{f}({})", args.join(", "))
        }
    }
}

struct Goals {
    goal: T,
    cut_to: usize,
    next: Option<Rc<Goals>>,
}

/// Why a search was abandoned. Such cases say nothing about the engine.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Skip {
    /// A binding would have created a cyclic term.
    Cyclic,
    TooLong,
}

pub struct Oracle<'a> {
    program: &'a Program,
    store: Vec<Option<T>>,
    trail: Vec<usize>,
    names: Vec<(String, usize)>,
    answers: Vec<String>,
    next_level: usize,
    steps: u64,
    skip: Option<Skip>,
}

const STEP_LIMIT: u64 = 200_000;

impl<'a> Oracle<'a> {
    pub fn new(program: &'a Program) -> Self {
        Oracle {
            program,
            store: Vec::new(),
            trail: Vec::new(),
            names: Vec::new(),
            answers: Vec::new(),
            next_level: 1,
            steps: 0,
            skip: None,
        }
    }

    /// All answers to the conjunction `goals` over `nvars` query variables,
    /// with `names` giving each answer variable's display name and number.
    pub fn solve(mut self, goals: &[T], nvars: usize, names: &[(String, usize)]) -> Result<Vec<String>, Skip> {
        self.store = vec![None; nvars];
        self.names = names.to_vec();
        let list = push_goals(goals, 0, None);
        self.run(list);
        match self.skip {
            Some(s) => Err(s),
            None => Ok(self.answers),
        }
    }

    fn deref(&self, t: &T) -> T {
        let mut t = t.clone();
        while let T::V(i) = t {
            match &self.store[i] {
                Some(v) => t = v.clone(),
                None => break,
            }
        }
        t
    }

    fn occurs(&self, v: usize, t: &T) -> bool {
        match self.deref(t) {
            T::V(i) => i == v,
            T::S(_, a) => a.iter().any(|x| self.occurs(v, x)),
            _ => false,
        }
    }

    fn bind(&mut self, v: usize, t: T) -> bool {
        if self.occurs(v, &t) {
            self.skip = Some(Skip::Cyclic);
            return false;
        }
        self.store[v] = Some(t);
        self.trail.push(v);
        true
    }

    fn unify(&mut self, a: &T, b: &T) -> bool {
        let (a, b) = (self.deref(a), self.deref(b));
        match (&a, &b) {
            (T::V(i), T::V(j)) if i == j => true,
            (T::V(i), _) => self.bind(*i, b),
            (_, T::V(j)) => self.bind(*j, a),
            (T::A(x), T::A(y)) => x == y,
            (T::I(x), T::I(y)) => x == y,
            (T::S(f, xs), T::S(g, ys)) => {
                f == g && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| self.unify(x, y))
            }
            _ => false,
        }
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let v = self.trail.pop().unwrap();
            self.store[v] = None;
        }
    }

    fn eval(&self, t: &T) -> Option<i64> {
        match self.deref(t) {
            T::I(i) => Some(i),
            T::S(op, a) if a.len() == 2 => {
                let (x, y) = (self.eval(&a[0])?, self.eval(&a[1])?);
                match op {
                    "+" => x.checked_add(y),
                    "-" => x.checked_sub(y),
                    "*" => x.checked_mul(y),
                    "//" => x.checked_div(y),
                    "mod" => (y != 0).then(|| x.rem_euclid(y) + if y < 0 && x.rem_euclid(y) != 0 { y } else { 0 }),
                    _ => None,
                }
            }
            T::S("-", a) if a.len() == 1 => self.eval(&a[0])?.checked_neg(),
            _ => None,
        }
    }

    fn rename(&mut self, t: &T, base: usize) -> T {
        match t {
            T::V(i) => T::V(base + i),
            T::S(f, a) => T::S(f, a.iter().map(|x| self.rename(x, base)).collect()),
            other => other.clone(),
        }
    }

    /// Returns the level a cut is unwinding to, if any.
    fn run(&mut self, goals: Option<Rc<Goals>>) -> Option<usize> {
        if self.skip.is_some() {
            return Some(0);
        }
        self.steps += 1;
        if self.steps > STEP_LIMIT {
            self.skip = Some(Skip::TooLong);
            return Some(0);
        }
        let Some(node) = goals else {
            let a = self.render_answer();
            self.answers.push(a);
            return None;
        };
        let rest = node.next.clone();
        let goal = self.deref(&node.goal);
        let simple = |o: &mut Self, ok: bool| if ok { o.run(rest.clone()) } else { None };
        match &goal {
            T::A("true") => self.run(rest),
            T::A("fail") => None,
            T::A("!") => Some(self.run(rest).unwrap_or(node.cut_to)),
            T::S("=", a) => {
                let mark = self.trail.len();
                let r = if self.unify(&a[0], &a[1]) { self.run(rest) } else { None };
                self.undo(mark);
                r
            }
            T::S("is", a) => {
                let mark = self.trail.len();
                let r = match self.eval(&a[1]) {
                    Some(v) if self.unify(&a[0], &T::I(v)) => self.run(rest),
                    _ => None,
                };
                self.undo(mark);
                r
            }
            T::S(op @ ("<" | ">" | "=<" | ">="), a) => {
                let ok = match (self.eval(&a[0]), self.eval(&a[1])) {
                    (Some(x), Some(y)) => match *op {
                        "<" => x < y,
                        ">" => x > y,
                        "=<" => x <= y,
                        _ => x >= y,
                    },
                    _ => false,
                };
                simple(self, ok)
            }
            T::S(test @ ("var" | "nonvar" | "integer" | "atom" | "atomic" | "compound"), a) if a.len() == 1 => {
                let t = self.deref(&a[0]);
                let ok = match *test {
                    "var" => matches!(t, T::V(_)),
                    "nonvar" => !matches!(t, T::V(_)),
                    "integer" => matches!(t, T::I(_)),
                    "atom" => matches!(t, T::A(_)),
                    "atomic" => matches!(t, T::A(_) | T::I(_)),
                    _ => matches!(t, T::S(..)),
                };
                simple(self, ok)
            }
            _ => self.call(&goal, rest),
        }
    }

    fn call(&mut self, goal: &T, rest: Option<Rc<Goals>>) -> Option<usize> {
        let level = self.next_level;
        self.next_level += 1;
        let key = indicator(goal);
        let program = self.program;
        for c in program.clauses.iter().filter(|c| indicator(&c.head) == key) {
            let mark = self.trail.len();
            let base = self.store.len();
            self.store.extend(std::iter::repeat_n(None, c.nvars));
            let head = self.rename(&c.head, base);
            let r = if self.unify(&head, goal) {
                let body: Vec<T> = c.body.iter().map(|g| self.rename(g, base)).collect();
                let goals = push_goals(&body, level, rest.clone());
                self.run(goals)
            } else {
                None
            };
            self.undo(mark);
            self.store.truncate(base);
            match r {
                Some(l) if l == level => return None,
                Some(l) => return Some(l),
                None => {}
            }
        }
        None
    }

    fn render_answer(&self) -> String {
        if self.names.is_empty() {
            return "yes".to_owned();
        }
        let mut fresh = Vec::new();
        let parts: Vec<String> = self
            .names
            .iter()
            .map(|(n, v)| {
                let mut out = format!("{n} = ");
                self.render(&T::V(*v), &mut fresh, &mut out);
                out
            })
            .collect();
        parts.join(", ")
    }

    fn render(&self, t: &T, fresh: &mut Vec<usize>, out: &mut String) {
        match self.deref(t) {
            T::V(i) => {
                let n = fresh.iter().position(|&v| v == i).unwrap_or_else(|| {
                    fresh.push(i);
                    fresh.len() - 1
                });
                let _ = write!(out, "_G{n}");
            }
            T::A(a) => out.push_str(a),
            T::I(i) => {
                let _ = write!(out, "{i}");
            }
            T::S(".", a) => {
                out.push('[');
                self.render(&a[0], fresh, out);
                let mut tail = self.deref(&a[1]);
                loop {
                    match tail {
                        T::S(".", b) => {
                            out.push(',');
                            self.render(&b[0], fresh, out);
                            tail = self.deref(&b[1]);
                        }
                        T::A("[]") => break,
                        other => {
                            out.push('|');
                            self.render(&other, fresh, out);
                            break;
                        }
                    }
                }
                out.push(']');
            }
            T::S(f, a) => {
                out.push_str(f);
                out.push('(');
                for (i, x) in a.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    self.render(x, fresh, out);
                }
                out.push(')');
            }
        }
    }
}

fn indicator(t: &T) -> (&'static str, usize) {
    match t {
        T::A(a) => (a, 0),
        T::S(f, a) => (f, a.len()),
        _ => ("", usize::MAX),
    }
}

fn push_goals(goals: &[T], cut_to: usize, rest: Option<Rc<Goals>>) -> Option<Rc<Goals>> {
    goals.iter().rev().fold(rest, |next, g| {
        Some(Rc::new(Goals {
            goal: g.clone(),
            cut_to,
            next,
        }))
    })
}

/// A random program with its queries.
#[derive(Clone, Debug)]
pub struct Case {
    pub program: Program,
    pub queries: Vec<Query>,
}

#[derive(Clone, Debug)]
pub struct Query {
    pub goals: Vec<T>,
    pub nvars: usize,
}

impl Query {
    pub fn text(&self) -> String {
        let g: Vec<String> = self.goals.iter().map(|g| source(g, "Q")).collect();
        g.join(", ")
    }

    /// Answer variables in order of first appearance.
    pub fn names(&self) -> Vec<(String, usize)> {
        let mut seen = Vec::new();
        fn walk(t: &T, seen: &mut Vec<usize>) {
            match t {
                T::V(i) if !seen.contains(i) => seen.push(*i),
                T::S(_, a) => a.iter().for_each(|x| walk(x, seen)),
                _ => {}
            }
        }
        self.goals.iter().for_each(|g| walk(g, &mut seen));
        seen.into_iter().map(|i| (format!("Q{i}"), i)).collect()
    }
}

const PREDS: [&str; 6] = ["p0", "p1", "p2", "p3", "p4", "p5"];
const ATOMS: [&str; 3] = ["a", "b", "c"];

struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    nvars: usize,
}

impl<R: Rng> Gen<'_, R> {
    fn term(&mut self, depth: usize) -> T {
        let leaf = depth == 0 || self.rng.gen_bool(0.45);
        if leaf {
            return match self.rng.gen_range(0..10) {
                0..=3 => T::V(self.rng.gen_range(0..self.nvars)),
                4..=5 => T::A(ATOMS.choose(self.rng).unwrap()),
                6..=7 => T::I(self.rng.gen_range(0..5)),
                _ => NIL,
            };
        }
        match self.rng.gen_range(0..3) {
            0 => T::S("f", vec![self.term(depth - 1)]),
            1 => T::S("g", vec![self.term(depth - 1), self.term(depth - 1)]),
            _ => cons(self.term(depth - 1), self.term(depth - 1)),
        }
    }

    fn small(&mut self) -> T {
        if self.rng.gen_bool(0.6) {
            T::V(self.rng.gen_range(0..self.nvars))
        } else {
            T::I(self.rng.gen_range(0..6))
        }
    }

    fn goal(&mut self, callable: &[(&'static str, usize)], depth: usize) -> T {
        let builtin = callable.is_empty() || self.rng.gen_bool(0.4);
        if !builtin {
            let &(name, arity) = callable.choose(self.rng).unwrap();
            return self.call(name, arity, depth);
        }
        match self.rng.gen_range(0..10) {
            0 => T::A("!"),
            1 => T::S("=", vec![T::V(self.rng.gen_range(0..self.nvars)), self.term(depth)]),
            2 => {
                let op = ["+", "-", "*", "//", "mod"].choose(self.rng).unwrap();
                let e = T::S(op, vec![self.small(), self.small()]);
                T::S("is", vec![T::V(self.rng.gen_range(0..self.nvars)), e])
            }
            3 => {
                let op = ["<", ">", "=<", ">="].choose(self.rng).unwrap();
                T::S(op, vec![self.small(), self.small()])
            }
            4 => T::A("fail"),
            5 => T::A("true"),
            _ => {
                let test = ["var", "nonvar", "integer", "atom", "atomic", "compound"].choose(self.rng).unwrap();
                T::S(test, vec![T::V(self.rng.gen_range(0..self.nvars))])
            }
        }
    }

    fn call(&mut self, name: &'static str, arity: usize, depth: usize) -> T {
        if arity == 0 {
            return T::A(name);
        }
        T::S(name, (0..arity).map(|_| self.arg(depth)).collect())
    }

    fn arg(&mut self, depth: usize) -> T {
        if self.rng.gen_bool(0.5) {
            T::V(self.rng.gen_range(0..self.nvars))
        } else {
            self.term(depth)
        }
    }
}

/// A program of up to six predicates in which each predicate only calls
/// earlier ones, so every query terminates. Terms nest at most `depth` deep.
pub fn gen_case<R: Rng>(rng: &mut R, depth: usize) -> Case {
    let npreds = rng.gen_range(2..=PREDS.len());
    let sigs: Vec<(&'static str, usize)> = (0..npreds).map(|i| (PREDS[i], rng.gen_range(0..=3))).collect();
    let mut clauses = Vec::new();
    for (i, &(name, arity)) in sigs.iter().enumerate() {
        for _ in 0..rng.gen_range(1..=4) {
            let nvars = rng.gen_range(1..=4);
            let mut g = Gen { rng: &mut *rng, nvars };
            let head = g.call(name, arity, depth.min(2));
            let nbody = g.rng.gen_range(0..=3);
            let body = (0..nbody).map(|_| g.goal(&sigs[..i], depth.min(2))).collect();
            clauses.push(Clause { head, body, nvars });
        }
    }
    let mut queries = Vec::new();
    for _ in 0..4 {
        let nvars = rng.gen_range(1..=3);
        let mut g = Gen { rng: &mut *rng, nvars };
        let n = g.rng.gen_range(1..=2);
        let goals = (0..n)
            .map(|_| {
                let &(name, arity) = sigs[sigs.len() / 2..].choose(g.rng).unwrap();
                g.call(name, arity, depth)
            })
            .collect();
        queries.push(Query { goals, nvars });
    }
    Case {
        program: Program { clauses },
        queries,
    }
}

/// Oracle answers, or why the query was skipped.
pub fn oracle_answers(program: &Program, q: &Query) -> Result<Vec<String>, Skip> {
    Oracle::new(program).solve(&q.goals, q.nvars, &q.names())
}

/// Engine answers for each query in turn, all in one machine.
pub fn engine_answers(program: &Program, queries: &[Query], config: Config) -> Vec<Vec<String>> {
    let text = program.text();
    let compiled = load_program(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
    let mut m = Machine::new(compiled, config);
    queries
        .iter()
        .map(|q| m.solve(&q.text()).unwrap_or_else(|e| panic!("{e}\n{text}\n?- {}", q.text())))
        .collect()
}

/// Low thresholds so that short random runs reach the specializer.
pub fn eager_config() -> Config {
    Config {
        critical: 2,
        hot: 4,
        validate: true,
        ..Config::default()
    }
}

pub fn seed() -> u64 {
    tracewam::bench::seed()
}
