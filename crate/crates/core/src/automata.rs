//! Boolean automata: one-way NFA operations, two-way acceptance,
//! crossing-sequence conversion and the factor languages between two states.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::machines::Move;
use crate::words::{Symbol, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AutomatonKind {
    OneWay,
    TwoWay,
}

impl AutomatonKind {
    pub fn token(self) -> &'static str {
        match self {
            AutomatonKind::OneWay => "nfa",
            AutomatonKind::TwoWay => "2nfa",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub sym: Symbol,
    pub dst: usize,
    pub mv: Move,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Automaton {
    pub name: String,
    pub kind: AutomatonKind,
    pub alphabet: Vec<Symbol>,
    pub states: Vec<String>,
    pub initial: usize,
    pub finals: BTreeSet<usize>,
    pub edges: Vec<Edge>,
}

/// Per state and symbol, the `(target, move)` pairs.
pub type EdgeIndex = Vec<Vec<Vec<(usize, Move)>>>;

impl Automaton {
    pub fn sym_index(&self, c: Symbol) -> Option<usize> {
        self.alphabet.iter().position(|&a| a == c)
    }

    pub fn is_final(&self, q: usize) -> bool {
        self.finals.contains(&q)
    }

    pub fn index(&self) -> EdgeIndex {
        let mut idx = vec![vec![vec![]; self.alphabet.len()]; self.states.len()];
        for e in &self.edges {
            if let Some(s) = self.sym_index(e.sym) {
                idx[e.src][s].push((e.dst, e.mv));
            }
        }
        idx
    }

    pub fn normalize(&mut self) {
        let alpha = self.alphabet.clone();
        let pos = |c: Symbol| alpha.iter().position(|&a| a == c).unwrap_or(usize::MAX);
        self.edges
            .sort_by(|a, b| (a.src, pos(a.sym), a.mv, a.dst).cmp(&(b.src, pos(b.sym), b.mv, b.dst)));
        self.edges.dedup();
    }

    pub fn state_id(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    /// The same automaton read as two-way.
    pub fn as_two_way(&self) -> Automaton {
        let mut a = self.clone();
        a.kind = AutomatonKind::TwoWay;
        a
    }
}

/// Collects states and edges, allowing several initial states.
#[derive(Debug, Clone)]
pub struct NfaBuilder {
    pub alphabet: Vec<Symbol>,
    pub names: Vec<String>,
    pub initials: Vec<usize>,
    pub finals: BTreeSet<usize>,
    pub edges: Vec<Edge>,
}

impl NfaBuilder {
    pub fn new(alphabet: &[Symbol]) -> Self {
        NfaBuilder {
            alphabet: alphabet.to_vec(),
            names: vec![],
            initials: vec![],
            finals: BTreeSet::new(),
            edges: vec![],
        }
    }

    pub fn add_state(&mut self, name: impl Into<String>) -> usize {
        self.names.push(name.into());
        self.names.len() - 1
    }

    pub fn edge(&mut self, src: usize, sym: Symbol, dst: usize) {
        self.edges.push(Edge {
            src,
            sym,
            dst,
            mv: Move::Right,
        });
    }

    /// Single-initial automaton; several initial states get a fresh initial
    /// state copying their outgoing edges.
    pub fn finish(mut self, name: impl Into<String>, kind: AutomatonKind) -> Automaton {
        let mut init: Vec<usize> = self.initials.clone();
        init.sort_unstable();
        init.dedup();
        let initial = if init.len() == 1 {
            init[0]
        } else {
            let fresh = self.names.len();
            let mut label = String::from("init");
            while self.names.contains(&label) {
                label.push('\'');
            }
            self.names.push(label);
            let copies: Vec<Edge> = self
                .edges
                .iter()
                .filter(|e| init.contains(&e.src))
                .map(|e| Edge { src: fresh, ..e.clone() })
                .collect();
            self.edges.extend(copies);
            if init.iter().any(|q| self.finals.contains(q)) {
                self.finals.insert(fresh);
            }
            fresh
        };
        let mut a = Automaton {
            name: name.into(),
            kind,
            alphabet: self.alphabet,
            states: self.names,
            initial,
            finals: self.finals,
            edges: self.edges,
        };
        a.normalize();
        a
    }
}

fn require_one_way(a: &Automaton, op: &str) -> Result<()> {
    if a.kind != AutomatonKind::OneWay || a.edges.iter().any(|e| e.mv == Move::Left) {
        return Err(Error::domain(format!("{op} expects a one-way automaton")));
    }
    Ok(())
}

fn reachable(a: &Automaton) -> Vec<bool> {
    let mut seen = vec![false; a.states.len()];
    let mut stack = vec![a.initial];
    seen[a.initial] = true;
    while let Some(q) = stack.pop() {
        for e in a.edges.iter().filter(|e| e.src == q) {
            if !seen[e.dst] {
                seen[e.dst] = true;
                stack.push(e.dst);
            }
        }
    }
    seen
}

pub fn nfa_empty(a: &Automaton) -> Result<bool> {
    require_one_way(a, "nfa_empty")?;
    let seen = reachable(a);
    Ok(!a.finals.iter().any(|&f| seen[f]))
}

pub fn nfa_accepts(a: &Automaton, u: &[Symbol]) -> bool {
    let idx = a.index();
    let mut cur = BTreeSet::from([a.initial]);
    for &c in u {
        let Some(s) = a.sym_index(c) else {
            return false;
        };
        cur = cur
            .iter()
            .flat_map(|&q| idx[q][s].iter().filter(|(_, m)| *m == Move::Right).map(|&(d, _)| d))
            .collect();
        if cur.is_empty() {
            return false;
        }
    }
    cur.iter().any(|&q| a.is_final(q))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Equivalence {
    Equivalent,
    /// A shortest word accepted by exactly one side.
    Counterexample(Word),
}

impl Equivalence {
    pub fn holds(&self) -> bool {
        matches!(self, Equivalence::Equivalent)
    }
}

/// Language equivalence by a joint subset construction; counterexamples are shortest.
pub fn nfa_equivalent(a: &Automaton, b: &Automaton) -> Result<Equivalence> {
    require_one_way(a, "nfa_equivalent")?;
    require_one_way(b, "nfa_equivalent")?;
    let sa: BTreeSet<Symbol> = a.alphabet.iter().copied().collect();
    let sb: BTreeSet<Symbol> = b.alphabet.iter().copied().collect();
    if sa != sb {
        return Err(Error::AlphabetMismatch(format!(
            "{} and {} use different alphabets",
            a.name, b.name
        )));
    }
    let alphabet: Vec<Symbol> = a.alphabet.clone();
    let ia = a.index();
    let ib = b.index();
    let step = |idx: &EdgeIndex, aut: &Automaton, set: &[u32], c: Symbol| -> Vec<u32> {
        let s = aut.sym_index(c).expect("alphabets checked");
        let mut out: Vec<u32> = set
            .iter()
            .flat_map(|&q| idx[q as usize][s].iter().map(|&(d, _)| d as u32))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    };
    let acc = |aut: &Automaton, set: &[u32]| set.iter().any(|&q| aut.is_final(q as usize));
    type Key = (Vec<u32>, Vec<u32>);
    let start: Key = (vec![a.initial as u32], vec![b.initial as u32]);
    let mut parent: HashMap<Key, Option<(Key, Symbol)>> = HashMap::new();
    parent.insert(start.clone(), None);
    let mut queue = VecDeque::from([start]);
    while let Some(key) = queue.pop_front() {
        if acc(a, &key.0) != acc(b, &key.1) {
            let mut w = vec![];
            let mut k = key;
            while let Some(Some((p, c))) = parent.get(&k) {
                w.push(*c);
                k = p.clone();
            }
            w.reverse();
            return Ok(Equivalence::Counterexample(w));
        }
        for &c in &alphabet {
            let next = (step(&ia, a, &key.0, c), step(&ib, b, &key.1, c));
            if next.0.is_empty() && next.1.is_empty() {
                continue;
            }
            if !parent.contains_key(&next) {
                parent.insert(next.clone(), Some((key.clone(), c)));
                queue.push_back(next);
            }
        }
    }
    Ok(Equivalence::Equivalent)
}

/// Reversed one-way automaton.
pub fn nfa_reverse(a: &Automaton) -> Result<Automaton> {
    require_one_way(a, "nfa_reverse")?;
    let mut b = NfaBuilder::new(&a.alphabet);
    b.names = a.states.clone();
    b.initials = a.finals.iter().copied().collect();
    b.finals.insert(a.initial);
    for e in &a.edges {
        b.edge(e.dst, e.sym, e.src);
    }
    Ok(b.finish(format!("{}_rev", a.name), AutomatonKind::OneWay))
}

/// Is there an accepting run on `u` whose crossing sequences have length at most `crossing_bound`?
pub fn twoway_accepts(a: &Automaton, u: &[Symbol], crossing_bound: usize) -> bool {
    if crossing_bound == 0 || u.iter().any(|&c| a.sym_index(c).is_none()) {
        return false;
    }
    let idx = a.index();
    let n = u.len();
    let syms: Vec<usize> = u.iter().map(|&c| a.sym_index(c).unwrap()).collect();
    if crossing_bound >= a.states.len() {
        // Any accepting run can be shortened to one without repeated configurations.
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([(a.initial, 1usize)]);
        seen.insert((a.initial, 1usize));
        while let Some((q, pos)) = queue.pop_front() {
            if pos == n + 1 {
                if a.is_final(q) {
                    return true;
                }
                continue;
            }
            for &(d, m) in &idx[q][syms[pos - 1]] {
                if let Some(np) = m.apply(pos) {
                    if seen.insert((d, np)) {
                        queue.push_back((d, np));
                    }
                }
            }
        }
        return false;
    }
    // Small bounds: search with explicit per-position visit counts.
    let mut counts = vec![0usize; n + 2];
    counts[1] = 1;
    let mut seen = HashSet::new();
    bounded_search(a, &idx, &syms, crossing_bound, a.initial, 1, &mut counts, &mut seen)
}

#[allow(clippy::too_many_arguments)]
fn bounded_search(
    a: &Automaton,
    idx: &EdgeIndex,
    syms: &[usize],
    bound: usize,
    q: usize,
    pos: usize,
    counts: &mut Vec<usize>,
    seen: &mut HashSet<(usize, usize, Vec<usize>)>,
) -> bool {
    let n = syms.len();
    if pos == n + 1 {
        return a.is_final(q);
    }
    if !seen.insert((q, pos, counts.clone())) {
        return false;
    }
    for &(d, m) in &idx[q][syms[pos - 1]] {
        let Some(np) = m.apply(pos) else { continue };
        if counts[np] >= bound {
            continue;
        }
        counts[np] += 1;
        let ok = bounded_search(a, idx, syms, bound, d, np, counts, seen);
        counts[np] -= 1;
        if ok {
            return true;
        }
    }
    false
}

// ---------------------------------------------------------------------------
// crossing-sequence cells

/// States visited at one position by a run, in visit order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CrossingSequenceState {
    pub states: Vec<usize>,
}

impl CrossingSequenceState {
    pub fn is_repetition_free(&self) -> bool {
        let set: HashSet<usize> = self.states.iter().copied().collect();
        !self.states.is_empty() && set.len() == self.states.len()
    }
}

const MARK_A: u8 = 1;
const MARK_B: u8 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Visit {
    state: usize,
    dir: Move,
    /// 0 before the first marked configuration, 1 between, 2 after the second.
    phase: u8,
    mark: u8,
}

impl Visit {
    fn pred_phase(&self) -> u8 {
        match self.mark {
            0 => self.phase,
            MARK_A => 0,
            MARK_B => 1,
            _ => 0,
        }
    }
}

/// A visit at the previous position reached from the right, waiting for its left-moving predecessor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Pending {
    state: usize,
    pred_phase: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Cell {
    Open {
        visits: Vec<Visit>,
        req: Vec<Pending>,
        /// Marks placed at this position or to its left.
        seen: u8,
    },
    Done {
        state: usize,
    },
}

impl Cell {
    fn marks_here(&self) -> u8 {
        match self {
            Cell::Open { visits, .. } => visits.iter().fold(0, |m, v| m | v.mark),
            Cell::Done { .. } => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorOrder {
    /// The first marked configuration is at or left of the second.
    Forward,
    /// The second marked configuration is at or left of the first.
    Backward,
}

struct CellEngine<'a> {
    a: &'a Automaton,
    idx: EdgeIndex,
    marks: Option<(usize, usize, FactorOrder)>,
    left_target: Vec<bool>,
    has_dir: [Vec<bool>; 2],
}

fn dir_slot(m: Move) -> usize {
    match m {
        Move::Right => 0,
        Move::Left => 1,
    }
}

impl<'a> CellEngine<'a> {
    fn new(a: &'a Automaton, marks: Option<(usize, usize, FactorOrder)>) -> Self {
        let mut left_target = vec![false; a.states.len()];
        let mut has_dir = [vec![false; a.states.len()], vec![false; a.states.len()]];
        for e in &a.edges {
            if e.mv == Move::Left {
                left_target[e.dst] = true;
            }
            has_dir[dir_slot(e.mv)][e.src] = true;
        }
        CellEngine {
            a,
            idx: a.index(),
            marks,
            left_target,
            has_dir,
        }
    }

    fn phases(&self) -> u8 {
        if self.marks.is_some() {
            3
        } else {
            1
        }
    }

    /// `(mark, phase)` options for a visit of `state` whose predecessor has `pred` phase.
    fn mark_options(&self, state: usize, pred: u8) -> Vec<(u8, u8)> {
        let mut out = vec![(0, pred)];
        if let Some((q1, q2, _)) = self.marks {
            if state == q1 && pred == 0 {
                out.push((MARK_A, 1));
                if state == q2 {
                    out.push((MARK_A | MARK_B, 2));
                }
            }
            if state == q2 && pred == 1 {
                out.push((MARK_B, 2));
            }
        }
        out
    }

    fn seen_ok(&self, seen_before: u8, here: u8) -> bool {
        let Some((_, _, order)) = self.marks else {
            return true;
        };
        let seen = seen_before | here;
        if seen_before & here != 0 {
            return false;
        }
        match order {
            FactorOrder::Forward => here & MARK_B == 0 || seen & MARK_A != 0,
            FactorOrder::Backward => here & MARK_A == 0 || seen & MARK_B != 0,
        }
    }

    fn initial_cells(&self) -> Vec<Cell> {
        let mut out = vec![];
        if self.a.is_final(self.a.initial) && self.marks.is_none() {
            out.push(Cell::Done {
                state: self.a.initial,
            });
        }
        let la = vec![(self.a.initial, 0u8)];
        self.build_cells(&la, vec![], 0, true, &mut out);
        out
    }

    /// All cells whose left arrivals are `la`, with `req` carried from the previous position.
    fn build_cells(&self, la: &[(usize, u8)], req: Vec<Pending>, seen_before: u8, first: bool, out: &mut Vec<Cell>) {
        let mut visits = vec![];
        let mut used = HashSet::new();
        let (s0, p0) = la[0];
        for (mark, phase) in self.mark_options(s0, p0) {
            used.insert((s0, phase));
            visits.push(Visit {
                state: s0,
                dir: Move::Right,
                phase,
                mark,
            });
            self.extend(la, 1, &mut visits, &mut used, &req, seen_before, first, out);
            visits.pop();
            used.remove(&(s0, phase));
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn extend(
        &self,
        la: &[(usize, u8)],
        la_next: usize,
        visits: &mut Vec<Visit>,
        used: &mut HashSet<(usize, u8)>,
        req: &[Pending],
        seen_before: u8,
        first: bool,
        out: &mut Vec<Cell>,
    ) {
        let last = visits.len() - 1;
        let max_len = self.a.states.len() * self.phases() as usize;
        let state = visits[last].state;
        // Option 1: depart right.
        if self.has_dir[0][state] {
            visits[last].dir = Move::Right;
            if la_next == la.len() {
                let here = visits.iter().fold(0, |m, v| m | v.mark);
                if self.seen_ok(seen_before, here) {
                    out.push(Cell::Open {
                        visits: visits.clone(),
                        req: req.to_vec(),
                        seen: seen_before | here,
                    });
                }
            }
            if visits.len() < max_len {
                // next visit arrives from the right
                for s in 0..self.a.states.len() {
                    if !self.left_target[s] {
                        continue;
                    }
                    for pred in 0..self.phases() {
                        for (mark, phase) in self.mark_options(s, pred) {
                            if used.contains(&(s, phase)) {
                                continue;
                            }
                            used.insert((s, phase));
                            visits.push(Visit {
                                state: s,
                                dir: Move::Right,
                                phase,
                                mark,
                            });
                            self.extend(la, la_next, visits, used, req, seen_before, first, out);
                            visits.pop();
                            used.remove(&(s, phase));
                        }
                    }
                }
            }
        }
        // Option 2: depart left; the next visit is the next left arrival.
        if !first && la_next < la.len() && self.has_dir[1][state] && visits.len() < max_len {
            visits[last].dir = Move::Left;
            let (s, pred) = la[la_next];
            for (mark, phase) in self.mark_options(s, pred) {
                if used.contains(&(s, phase)) {
                    continue;
                }
                used.insert((s, phase));
                visits.push(Visit {
                    state: s,
                    dir: Move::Right,
                    phase,
                    mark,
                });
                self.extend(la, la_next + 1, visits, used, req, seen_before, first, out);
                visits.pop();
                used.remove(&(s, phase));
            }
            visits[last].dir = Move::Right;
        }
        visits[last].dir = Move::Right;
    }

    fn successors(&self, cell: &Cell, sym: usize) -> Vec<Cell> {
        let Cell::Open { visits, req, seen } = cell else {
            return vec![];
        };
        let mut out = vec![];
        let mut la = vec![];
        self.choose(visits, req, *seen, sym, 0, 0, &mut la, &mut out);
        out.sort();
        out.dedup();
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn choose(
        &self,
        visits: &[Visit],
        req: &[Pending],
        seen: u8,
        sym: usize,
        j: usize,
        left_used: usize,
        la: &mut Vec<(usize, u8)>,
        out: &mut Vec<Cell>,
    ) {
        if j == visits.len() {
            if left_used != req.len() {
                return;
            }
            let next_req: Vec<Pending> = (1..visits.len())
                .filter(|&k| visits[k - 1].dir == Move::Right)
                .map(|k| Pending {
                    state: visits[k].state,
                    pred_phase: visits[k].pred_phase(),
                })
                .collect();
            if la.len() == 1 && self.a.is_final(la[0].0) {
                let complete = match self.marks {
                    None => true,
                    Some(_) => la[0].1 == 2,
                };
                if complete {
                    out.push(Cell::Done { state: la[0].0 });
                }
            }
            self.build_cells(la, next_req, seen, false, out);
            return;
        }
        let v = &visits[j];
        for &(dst, mv) in &self.idx[v.state][sym] {
            if mv != v.dir {
                continue;
            }
            match mv {
                Move::Left => {
                    let Some(p) = req.get(left_used) else { continue };
                    if p.state != dst || p.pred_phase != v.phase {
                        continue;
                    }
                    self.choose(visits, req, seen, sym, j + 1, left_used + 1, la, out);
                }
                Move::Right => {
                    la.push((dst, v.phase));
                    self.choose(visits, req, seen, sym, j + 1, left_used, la, out);
                    la.pop();
                }
            }
        }
    }
}

fn state_label(a: &Automaton, cell: &Cell, marked: bool) -> String {
    match cell {
        Cell::Done { state } => format!("end:{}", a.states[*state]),
        Cell::Open { visits, req, seen } => {
            let mut s = String::from("[");
            for (i, v) in visits.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                s.push_str(&a.states[v.state]);
                s.push(if v.dir == Move::Right { '>' } else { '<' });
                if marked {
                    s.push_str(&format!("{}{}", v.phase, ["", "A", "B", "AB"][v.mark as usize]));
                }
            }
            if !req.is_empty() {
                s.push('|');
                for (i, p) in req.iter().enumerate() {
                    if i > 0 {
                        s.push(',');
                    }
                    s.push_str(&a.states[p.state]);
                    if marked {
                        s.push_str(&p.pred_phase.to_string());
                    }
                }
            }
            s.push(']');
            if marked {
                s.push_str(&seen.to_string());
            }
            s
        }
    }
}

/// Explored cell graph: cells, per-symbol successor lists, and initial cells.
struct CellGraph {
    cells: Vec<Cell>,
    succ: Vec<Vec<Vec<usize>>>,
    initial: Vec<usize>,
}

fn explore(engine: &CellEngine, budget: usize) -> Result<CellGraph> {
    let mut ids: HashMap<Cell, usize> = HashMap::new();
    let mut cells = vec![];
    let mut queue = VecDeque::new();
    let mut intern = |c: Cell, cells: &mut Vec<Cell>, queue: &mut VecDeque<usize>| -> usize {
        if let Some(&i) = ids.get(&c) {
            return i;
        }
        let i = cells.len();
        ids.insert(c.clone(), i);
        cells.push(c);
        queue.push_back(i);
        i
    };
    let initial: Vec<usize> = engine
        .initial_cells()
        .into_iter()
        .map(|c| intern(c, &mut cells, &mut queue))
        .collect();
    let nsym = engine.a.alphabet.len();
    let mut succ: Vec<Vec<Vec<usize>>> = vec![];
    while let Some(i) = queue.pop_front() {
        if cells.len() > budget {
            return Err(Error::BoundExceeded(format!(
                "crossing-sequence construction exceeded {budget} states"
            )));
        }
        let mut row = vec![];
        for s in 0..nsym {
            let next = engine.successors(&cells[i].clone(), s);
            row.push(next.into_iter().map(|c| intern(c, &mut cells, &mut queue)).collect());
        }
        if succ.len() <= i {
            succ.resize(i + 1, vec![]);
        }
        succ[i] = row;
    }
    succ.resize(cells.len(), vec![vec![]; nsym]);
    Ok(CellGraph {
        cells,
        succ,
        initial,
    })
}

/// Result of the crossing-sequence conversion, keeping the crossing sequence of each state.
#[derive(Debug, Clone)]
pub struct CsConversion {
    pub automaton: Automaton,
    /// Crossing sequence of each state; `None` for a fresh initial state.
    pub cells: Vec<Option<CrossingSequenceState>>,
}

pub const DEFAULT_STATE_BUDGET: usize = 200_000;

pub fn cs_conversion(a: &Automaton, budget: usize) -> Result<CsConversion> {
    let engine = CellEngine::new(a, None);
    let g = explore(&engine, budget)?;
    let mut b = NfaBuilder::new(&a.alphabet);
    let mut names = HashSet::new();
    let mut cells = vec![];
    for (i, c) in g.cells.iter().enumerate() {
        let mut label = state_label(a, c, false);
        if !names.insert(label.clone()) {
            label = format!("{label}~{i}");
        }
        b.add_state(label);
        cells.push(Some(CrossingSequenceState {
            states: match c {
                Cell::Open { visits, .. } => visits.iter().map(|v| v.state).collect(),
                Cell::Done { state } => vec![*state],
            },
        }));
        if matches!(c, Cell::Done { .. }) {
            b.finals.insert(i);
        }
        for (s, targets) in g.succ[i].iter().enumerate() {
            for &t in targets {
                b.edge(i, a.alphabet[s], t);
            }
        }
    }
    b.initials = g.initial.clone();
    if b.initials.is_empty() {
        let none = b.add_state("none");
        b.initials.push(none);
        cells.push(None);
    }
    let multi = {
        let mut v = b.initials.clone();
        v.sort_unstable();
        v.dedup();
        v.len() > 1
    };
    let automaton = b.finish(format!("{}_cs", a.name), AutomatonKind::OneWay);
    if multi {
        cells.push(None);
    }
    Ok(CsConversion { automaton, cells })
}

/// One-way automaton over crossing sequences with the same language.
pub fn twoway_to_oneway(a: &Automaton) -> Result<Automaton> {
    if a.kind == AutomatonKind::OneWay {
        let mut b = a.clone();
        b.edges.retain(|e| e.mv == Move::Right);
        return Ok(b);
    }
    Ok(cs_conversion(a, DEFAULT_STATE_BUDGET)?.automaton)
}

/// Factors `u[i1..i2]` of accepted words whose run visits `(q1, i1)` and later `(q2, i2)`.
///
/// With [`FactorOrder::Forward`] positions satisfy `i1 <= i2`; with
/// [`FactorOrder::Backward`] the factor is `u[i2..i1]` with `i2 <= i1`.
pub fn factor_language_ordered(a: &Automaton, q1: usize, q2: usize, order: FactorOrder) -> Result<Automaton> {
    if q1 >= a.states.len() || q2 >= a.states.len() {
        return Err(Error::domain("factor_language: unknown state"));
    }
    let two = a.as_two_way();
    let engine = CellEngine::new(&two, Some((q1, q2, order)));
    let g = explore(&engine, DEFAULT_STATE_BUDGET)?;
    let n = g.cells.len();
    // co-reachability towards an end cell
    let mut pred: Vec<Vec<usize>> = vec![vec![]; n];
    for i in 0..n {
        for targets in &g.succ[i] {
            for &t in targets {
                pred[t].push(i);
            }
        }
    }
    let mut coreach = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&i| matches!(g.cells[i], Cell::Done { .. })).collect();
    for &i in &stack {
        coreach[i] = true;
    }
    while let Some(i) = stack.pop() {
        for &p in &pred[i] {
            if !coreach[p] {
                coreach[p] = true;
                stack.push(p);
            }
        }
    }
    let (open_mark, close_mark) = match order {
        FactorOrder::Forward => (MARK_A, MARK_B),
        FactorOrder::Backward => (MARK_B, MARK_A),
    };
    let in_region = |c: &Cell| -> bool {
        match c {
            Cell::Done { .. } => false,
            Cell::Open { seen, .. } => {
                let here = c.marks_here();
                let before = seen & !here;
                seen & open_mark != 0 && before & close_mark == 0
            }
        }
    };
    let mut b = NfaBuilder::new(&a.alphabet);
    let mut map = HashMap::new();
    for (i, c) in g.cells.iter().enumerate() {
        if in_region(c) && coreach[i] {
            map.insert(i, b.add_state(format!("c{i}")));
        }
    }
    let acc = b.add_state("acc");
    b.finals.insert(acc);
    for (&i, &si) in &map {
        let c = &g.cells[i];
        if c.marks_here() & open_mark != 0 {
            b.initials.push(si);
        }
        let closes = c.marks_here() & close_mark != 0;
        for (s, targets) in g.succ[i].iter().enumerate() {
            for &t in targets {
                if closes {
                    if coreach[t] {
                        b.edge(si, a.alphabet[s], acc);
                    }
                } else if let Some(&st) = map.get(&t) {
                    b.edge(si, a.alphabet[s], st);
                }
            }
        }
    }
    b.edges.sort();
    b.edges.dedup();
    b.initials.sort_unstable();
    let name = format!("{}_factors_{}_{}", a.name, a.states[q1], a.states[q2]);
    Ok(trim(&b.finish(name, AutomatonKind::OneWay)))
}

pub fn factor_language(a: &Automaton, q1: usize, q2: usize) -> Result<Automaton> {
    factor_language_ordered(a, q1, q2, FactorOrder::Forward)
}

/// Removes states that are not both accessible and co-accessible (keeps the initial state).
pub fn trim(a: &Automaton) -> Automaton {
    let fwd = reachable(a);
    let n = a.states.len();
    let mut bwd = vec![false; n];
    let mut stack: Vec<usize> = a.finals.iter().copied().collect();
    for &f in &stack {
        bwd[f] = true;
    }
    while let Some(q) = stack.pop() {
        for e in a.edges.iter().filter(|e| e.dst == q) {
            if !bwd[e.src] {
                bwd[e.src] = true;
                stack.push(e.src);
            }
        }
    }
    let keep: Vec<bool> = (0..n).map(|q| q == a.initial || (fwd[q] && bwd[q])).collect();
    let mut remap = vec![usize::MAX; n];
    let mut states = vec![];
    for q in 0..n {
        if keep[q] {
            remap[q] = states.len();
            states.push(a.states[q].clone());
        }
    }
    let mut out = Automaton {
        name: a.name.clone(),
        kind: a.kind,
        alphabet: a.alphabet.clone(),
        states,
        initial: remap[a.initial],
        finals: a
            .finals
            .iter()
            .filter(|&&f| keep[f])
            .map(|&f| remap[f])
            .collect(),
        edges: a
            .edges
            .iter()
            .filter(|e| keep[e.src] && keep[e.dst] && fwd[e.src] && bwd[e.dst])
            .map(|e| Edge {
                src: remap[e.src],
                dst: remap[e.dst],
                ..e.clone()
            })
            .collect(),
    };
    out.normalize();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::machines::domain_automaton;
    use crate::words::{word, words_up_to};

    fn nfa(alpha: &[Symbol], n: usize, init: usize, finals: &[usize], edges: &[(usize, Symbol, usize)]) -> Automaton {
        let mut b = NfaBuilder::new(alpha);
        for i in 0..n {
            b.add_state(format!("s{i}"));
        }
        b.initials.push(init);
        b.finals.extend(finals.iter().copied());
        for &(s, c, d) in edges {
            b.edge(s, c, d);
        }
        b.finish("t", AutomatonKind::OneWay)
    }

    #[test]
    fn emptiness() {
        let a = nfa(&['a'], 1, 0, &[], &[(0, 'a', 0)]);
        assert!(nfa_empty(&a).unwrap());
        let a = nfa(&['a'], 1, 0, &[0], &[]);
        assert!(!nfa_empty(&a).unwrap());
        let a = nfa(&['a'], 2, 0, &[1], &[(0, 'a', 1), (1, 'a', 1)]);
        assert!(!nfa_empty(&a).unwrap());
        assert!(nfa_empty(&fixtures::t2().pipe(|t| domain_automaton(&t))).is_err());
    }

    trait Pipe: Sized {
        fn pipe<R>(self, f: impl FnOnce(Self) -> R) -> R {
            f(self)
        }
    }
    impl<T> Pipe for T {}

    #[test]
    fn equivalence() {
        // (a|b)*a two ways
        let x = nfa(&['a', 'b'], 2, 0, &[1], &[(0, 'a', 0), (0, 'b', 0), (0, 'a', 1)]);
        let y = nfa(
            &['a', 'b'],
            2,
            0,
            &[1],
            &[(0, 'b', 0), (0, 'a', 1), (1, 'a', 1), (1, 'b', 0)],
        );
        assert_eq!(nfa_equivalent(&x, &y).unwrap(), Equivalence::Equivalent);
        assert_eq!(nfa_equivalent(&x, &x).unwrap(), Equivalence::Equivalent);
        let star = nfa(&['a'], 1, 0, &[0], &[(0, 'a', 0)]);
        let plus = nfa(&['a'], 2, 0, &[1], &[(0, 'a', 1), (1, 'a', 1)]);
        assert_eq!(
            nfa_equivalent(&star, &plus).unwrap(),
            Equivalence::Counterexample(vec![])
        );
        let other = nfa(&['b'], 1, 0, &[0], &[]);
        assert!(matches!(nfa_equivalent(&star, &other), Err(Error::AlphabetMismatch(_))));
    }

    #[test]
    fn t2_acceptance() {
        let a = domain_automaton(&fixtures::t2());
        assert!(twoway_accepts(&a, &word("#ab#"), 3));
        assert!(!twoway_accepts(&a, &word("ab"), 3));
        assert!(!twoway_accepts(&a, &word("#ab#"), 2));
        let mut e = a.clone();
        e.finals.insert(e.initial);
        assert!(twoway_accepts(&e, &[], 1));
    }

    #[test]
    fn t2_conversion() {
        let a = domain_automaton(&fixtures::t2());
        let conv = cs_conversion(&a, DEFAULT_STATE_BUDGET).unwrap();
        for c in conv.cells.iter().flatten() {
            assert!(c.is_repetition_free());
        }
        for u in words_up_to(&a.alphabet, 6) {
            let expect = u.len() >= 2
                && u[0] == '#'
                && u[u.len() - 1] == '#'
                && u[1..u.len() - 1].iter().all(|&c| c != '#');
            assert_eq!(nfa_accepts(&conv.automaton, &u), expect, "{u:?}");
        }
    }

    #[test]
    fn one_way_shape_conversion() {
        let a = nfa(&['a', 'b'], 2, 0, &[1], &[(0, 'a', 0), (0, 'b', 1), (1, 'a', 1)]).as_two_way();
        let c = twoway_to_oneway(&a).unwrap();
        for u in words_up_to(&['a', 'b'], 6) {
            assert_eq!(nfa_accepts(&c, &u), nfa_accepts(&a, &u));
        }
        let empty = nfa(&['a'], 1, 0, &[], &[(0, 'a', 0)]).as_two_way();
        assert!(nfa_empty(&twoway_to_oneway(&empty).unwrap()).unwrap());
    }

    #[test]
    fn reverse_language() {
        let x = nfa(&['a', 'b'], 3, 0, &[2], &[(0, 'a', 1), (1, 'b', 2)]);
        let r = nfa_reverse(&x).unwrap();
        assert!(nfa_accepts(&r, &word("ba")));
        assert!(!nfa_accepts(&r, &word("ab")));
    }
}
