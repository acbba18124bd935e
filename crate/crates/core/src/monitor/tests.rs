use super::*;
use crate::compiler::{load_program, Instr};
use crate::machine::{Config, Machine};
use crate::term::Tag;

#[test]
fn marks_link_consecutive_blocks() {
    let mut m = Monitor {
        enabled: true,
        ..Monitor::default()
    };
    m.mark_block(10, 0, BlockKind::TypeTest, 100);
    m.note(Flow::Goto(1), Observed::Tag(Tag::Ref));
    m.mark_block(10, 1, BlockKind::DerefLoop, 100);
    m.note(Flow::Next, Observed::Tag(Tag::Int));
    m.mark_block(11, 0, BlockKind::Plain, 100);
    let r = m.record();
    assert_eq!(r.nodes.len(), 3);
    let a = r.node(10, 0).unwrap();
    assert_eq!(a.edges.len(), 1);
    assert_eq!(a.edges[0].flow, FlowKind::Intra);
    assert_eq!(a.edges[0].tags, TagSet::REF);
    let b = r.node(10, 1).unwrap();
    assert_eq!(b.successors(FlowKind::Next).count(), 1);
    assert_eq!(r.predecessor_counts(), vec![0, 1, 1]);
}

#[test]
fn repeated_edges_merge_tags_and_count() {
    let mut m = Monitor {
        enabled: true,
        ..Monitor::default()
    };
    for t in [Tag::Int, Tag::Atom, Tag::Int] {
        m.break_flow();
        m.mark_block(5, 0, BlockKind::TypeTest, 100);
        m.note(Flow::Goto(2), Observed::Tag(t));
        m.mark_block(5, 2, BlockKind::Plain, 100);
    }
    let n = m.record().node(5, 0).unwrap();
    assert_eq!(n.hits, 3);
    assert_eq!(n.edges.len(), 1);
    assert_eq!(n.edges[0].count, 3);
    assert_eq!(n.edges[0].tags, TagSet::INT.union(TagSet::ATOM));
    assert_eq!(n.observed, n.edges[0].tags);
}

#[test]
fn break_flow_starts_a_new_path() {
    let mut m = Monitor {
        enabled: true,
        ..Monitor::default()
    };
    m.mark_block(1, 0, BlockKind::Plain, 100);
    m.note(Flow::Next, Observed::None);
    m.break_flow();
    m.mark_block(7, 0, BlockKind::Plain, 100);
    assert!(m.record().nodes.iter().all(|n| n.edges.is_empty()));
}

#[test]
fn cap_is_reported() {
    let mut m = Monitor {
        enabled: true,
        ..Monitor::default()
    };
    assert!(!m.mark_block(0, 0, BlockKind::Plain, 2));
    assert!(!m.mark_block(1, 0, BlockKind::Plain, 2));
    assert!(m.mark_block(2, 0, BlockKind::Plain, 2));
}

#[test]
fn markup_lifecycle() {
    let mut m = Monitor::default();
    assert_eq!(m.recording(), None);
    m.enable_markup(PredId(3), 20);
    assert_eq!(m.recording(), Some(PredId(3)));
    let seeded = m.record();
    assert_eq!(seeded.node(20, 0).unwrap().kind, BlockKind::GcCheck);
    assert_eq!(seeded.node(20, 0).unwrap().edges[0].to, seeded.node_id(20, 1).unwrap());
    m.note(Flow::Next, Observed::None);
    m.mark_block(21, 0, BlockKind::Plain, 100);
    let r = m.finalize_trace();
    assert!(!m.enabled);
    assert_eq!(m.recording(), None);
    assert_eq!(r.pred, Some(PredId(3)));
    assert_eq!(r.node(20, 1).unwrap().successors(FlowKind::Next).count(), 1);
    assert!(m.record().nodes.is_empty());
}

#[test]
fn reopen_continues_from_exit_node() {
    let mut m = Monitor::default();
    m.enable_markup(PredId(0), 0);
    let r = m.finalize_trace();
    let from = r.node_id(0, 1).unwrap();
    m.reopen(r, Some((from, FlowKind::Next)));
    assert!(m.enabled);
    m.mark_block(4, 0, BlockKind::Plain, 100);
    let n = m.record().node(0, 1).unwrap();
    let e = n.successors(FlowKind::Next).next().unwrap();
    assert_eq!(m.record().nodes[e.to].addr, 4);
}

#[test]
fn abandon_discards_everything() {
    let mut m = Monitor::default();
    m.enable_markup(PredId(1), 0);
    m.abandon();
    assert!(!m.enabled);
    assert!(m.record().nodes.is_empty());
}

fn recorded_trace(text: &str, query: &str) -> (TraceRecord, Vec<Instr>) {
    let config = Config {
        critical: 2,
        hot: 1_000_000,
        validate: true,
        ..Config::default()
    };
    let mut m = Machine::new(load_program(text).unwrap(), config);
    m.solve(query).unwrap();
    assert!(m.monitor.enabled);
    let code = m.program.code.clone();
    (m.monitor.finalize_trace(), code)
}

const LEN: &str = "len([], N, N).
len([_|T], N0, N) :- N1 is N0 + 1, len(T, N1, N).";

#[test]
fn machine_recordings_are_sound() {
    let (r, code) = recorded_trace(LEN, "len([a,b,c,d,e,f], 0, N)");
    assert!(r.nodes.len() > 5);
    assert_eq!(validate_record(&r, &code), vec![]);
    let dump = r.dump(&code);
    assert!(dump.lines().all(|l| l.split(' ').count() >= 5), "{dump}");
    assert!(dump.contains("GC_CHECK"));
}

#[test]
fn foreign_edges_are_unsound() {
    let (mut r, code) = recorded_trace(LEN, "len([a,b,c,d,e,f], 0, N)");
    let a = r.nodes.iter().position(|n| n.block == 0).unwrap();
    let b = r.nodes.iter().position(|n| n.addr != r.nodes[a].addr).unwrap();
    r.add_edge(a, b, FlowKind::Intra, Observed::None);
    assert!(validate_record(&r, &code)
        .iter()
        .any(|v| matches!(v, TraceViolation::UnsoundEdge { flow: FlowKind::Intra, .. })));
}

#[test]
fn test_before_gc_check_is_flagged() {
    let (_, code) = recorded_trace(LEN, "len([a], 0, N)");
    let enter = code.iter().position(|i| matches!(i, Instr::Enter { .. })).unwrap();
    let mut r = TraceRecord::default();
    let t = r.intern(enter, 1, BlockKind::TypeTest);
    let g = r.intern(enter, 0, BlockKind::GcCheck);
    r.add_edge(t, g, FlowKind::Intra, Observed::None);
    assert!(validate_record(&r, &code).contains(&TraceViolation::TestBeforeGcCheck { addr: enter }));
}
