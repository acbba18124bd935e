use super::*;

const HOT: &str = "
degree(rio, 36).
degree(maringa, 32).
degree(curitiba, 22).
hotsummer(X) :- degree(X, Y), Y > 30.
";

fn clause_code(p: &Program, name: &str, arity: u32, clause: usize) -> Vec<Instr> {
    let id = p.lookup(name, arity).unwrap();
    let entry = p.pred(id);
    let start = entry.clauses[clause];
    let end = entry
        .clauses
        .get(clause + 1)
        .copied()
        .unwrap_or_else(|| p.code[start..].iter().position(|i| matches!(i, Instr::Proceed | Instr::Execute { .. })).unwrap() + start + 1);
    p.code[start..end].to_vec()
}

fn sym(p: &Program, s: &str) -> Const {
    Const::Atom(p.symbols.lookup(s).unwrap())
}

#[test]
fn fact_maps_to_get_constant() {
    let p = load_program(HOT).unwrap();
    let code = clause_code(&p, "degree", 2, 0);
    assert_eq!(
        code,
        vec![
            Instr::Enter { pred: PredId(0), heap: 0 },
            Instr::GetConstant { c: sym(&p, "rio"), arg: 1 },
            Instr::GetConstant { c: Const::Int(36), arg: 2 },
            Instr::Proceed,
        ]
    );
}

#[test]
fn append_base_clause() {
    let p = load_program("append([], L, L).\nappend([H|T], L, [H|R]) :- append(T, L, R).").unwrap();
    let code = clause_code(&p, "append", 3, 0);
    assert_eq!(
        code,
        vec![
            Instr::Enter { pred: PredId(0), heap: 0 },
            Instr::GetNil { arg: 1 },
            Instr::GetValue { reg: Reg::X(2), arg: 3 },
            Instr::Proceed,
        ]
    );
    let rec = clause_code(&p, "append", 3, 1);
    assert!(matches!(rec[1], Instr::GetList { arg: 1 }));
    assert!(matches!(rec.last(), Some(Instr::Execute { pred: PredId(0) })));
    // Write-mode head needs two cells for [H|R].
    assert!(matches!(rec[0], Instr::Enter { heap: 4, .. }));
}

#[test]
fn hotsummer_uses_environment() {
    let p = load_program(HOT).unwrap();
    let code = clause_code(&p, "hotsummer", 1, 0);
    let ops: Vec<&str> = code.iter().map(|i| i.opcode().name()).collect();
    assert_eq!(
        ops,
        vec!["enter", "allocate", "get_variable", "put_value", "put_variable", "call", "compare", "deallocate", "proceed"]
    );
    // Only Y survives the call.
    assert!(matches!(code[4], Instr::PutVariable { reg: Reg::Y(1), arg: Some(2) }));
    assert!(matches!(code[6], Instr::Compare { op: CmpOp::Gt, b: Operand::Int(30), .. }));
}

#[test]
fn degree_gets_constant_table() {
    let p = load_program(HOT).unwrap();
    let d = p.pred(p.lookup("degree", 2).unwrap());
    let ix = d.index.expect("indexed");
    let Instr::SwitchOnTerm(t) = &p.code[ix] else { panic!() };
    let keys: Vec<(Const, Label)> = t.consts.clone();
    assert_eq!(
        keys,
        vec![
            (sym(&p, "rio"), Label::Addr(d.clauses[0])),
            (sym(&p, "maringa"), Label::Addr(d.clauses[1])),
            (sym(&p, "curitiba"), Label::Addr(d.clauses[2])),
        ]
    );
    assert_eq!(t.const_default, Label::Fail);
    assert_eq!(t.list, Label::Fail);
    let Label::Addr(chain) = t.var else { panic!() };
    assert_eq!(
        &p.code[chain..chain + 3],
        &[
            Instr::Try { clause: d.clauses[0], arity: 2 },
            Instr::Retry { clause: d.clauses[1] },
            Instr::Trust { clause: d.clauses[2] },
        ]
    );
}

#[test]
fn append_switches_on_nil_and_list() {
    let p = load_program("app([], L, L).\napp([H|T], L, [H|R]) :- app(T, L, R).").unwrap();
    let a = p.pred(PredId(0));
    let Instr::SwitchOnTerm(t) = &p.code[a.index.unwrap()] else { panic!() };
    assert_eq!(t.consts, vec![(Const::Nil, Label::Addr(a.clauses[0]))]);
    assert_eq!(t.list, Label::Addr(a.clauses[1]));
    assert_eq!(t.struct_default, Label::Fail);
}

#[test]
fn single_clause_has_no_index() {
    let p = load_program(HOT).unwrap();
    let h = p.pred(p.lookup("hotsummer", 1).unwrap());
    assert_eq!(h.index, None);
    assert_eq!(h.entry, h.clauses[0]);
}

#[test]
fn var_clauses_stay_in_every_bucket() {
    let p = load_program("f(a, 1).\nf(X, 2).\nf([_], 3).\nf(g(_), 4).").unwrap();
    let f = p.pred(PredId(0));
    let Instr::SwitchOnTerm(t) = &p.code[f.index.unwrap()] else { panic!() };
    let chain_of = |l: Label| -> Vec<CodeAddr> {
        match l {
            Label::Fail => vec![],
            Label::Addr(a) if f.clauses.contains(&a) => vec![a],
            Label::Addr(mut a) => {
                let mut out = vec![];
                loop {
                    match &p.code[a] {
                        Instr::Try { clause, .. } | Instr::Retry { clause } => out.push(*clause),
                        Instr::Trust { clause } => {
                            out.push(*clause);
                            return out;
                        }
                        other => panic!("{other:?}"),
                    }
                    a += 1;
                }
            }
        }
    };
    let c = &f.clauses;
    assert_eq!(chain_of(t.consts[0].1), vec![c[0], c[1]]);
    assert_eq!(chain_of(t.const_default), vec![c[1]]);
    assert_eq!(chain_of(t.list), vec![c[1], c[2]]);
    assert_eq!(chain_of(t.structs[0].1), vec![c[1], c[3]]);
    assert_eq!(chain_of(t.var), c.clone());
}

#[test]
fn undefined_predicate_is_a_link_error() {
    let err = load_program("p(X) :- q(X).").unwrap_err();
    assert_eq!(err.to_string(), "q/1 undefined");
}

#[test]
fn empty_program_links() {
    let p = load_program("").unwrap();
    assert!(p.code.is_empty());
    assert!(p.preds.is_empty());
}

#[test]
fn unsupported_builtin_names_goal() {
    let err = load_program("p(X) :- assert(q(X)).").unwrap_err();
    assert_eq!(err, CompileError::UnsupportedBuiltin("assert(q(X))".into()));
    assert!(err.to_string().contains("assert(q(X))"));
}

#[test]
fn linked_entries_start_cold() {
    let p = load_program(HOT).unwrap();
    assert_eq!(p.preds.len(), 2);
    for e in &p.preds {
        assert_eq!(e.state, PredState::Cold);
        assert_eq!(e.call_counter, 0);
    }
}

#[test]
fn every_clause_ends_in_a_transfer() {
    let p = load_program(HOT).unwrap();
    for e in &p.preds {
        for (i, &start) in e.clauses.iter().enumerate() {
            let end = e.clauses.get(i + 1).copied().unwrap_or(p.code.len());
            let end = if i + 1 == e.clauses.len() {
                p.preds.iter().map(|q| q.entry).filter(|&a| a > start).min().unwrap_or(end)
            } else {
                end
            };
            assert!(matches!(p.code[end - 1], Instr::Proceed | Instr::Execute { .. }));
        }
    }
}

#[test]
fn query_ends_in_answer() {
    let mut p = load_program(HOT).unwrap();
    let q = p.parse_query("hotsummer(X)").unwrap();
    assert_eq!(q.vars, vec!["X".to_string()]);
    assert!(matches!(p.code.last(), Some(Instr::Answer { n: 1 })));
    assert!(matches!(p.code[q.entry], Instr::Enter { pred: PredId::QUERY, .. }));
}

#[test]
fn arithmetic_flattens_to_temporaries() {
    let p = load_program("f(X, Y) :- Y is X * 2 + 1.").unwrap();
    let ops: Vec<&str> = p.code.iter().map(|i| i.opcode().name()).collect();
    assert_eq!(ops, vec!["enter", "arith", "arith", "is", "proceed"]);
}
