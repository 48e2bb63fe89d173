//! Deciding whether a two-way transducer has a one-way equivalent.
//!
//! A z-shaped transducer is reduced in two steps: first to one whose backward
//! pass is silent (`build_eznft`), then to a one-way transducer
//! (`build_nft_from_eznft`). Each step keeps exactly the pairs whose outputs
//! split into bounded periodic pieces, so the input is one-way definable iff
//! neither step loses part of the domain. A general two-way machine is
//! flattened by repeatedly replacing its z-motions with one-way components
//! (`squeeze_transducer`).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::automata::{nfa_empty, nfa_equivalent, twoway_to_oneway, Equivalence, DEFAULT_STATE_BUDGET};
use crate::error::{Error, Result};
use crate::implicit::{lazy_equivalent, materialize, trim_transducer, Implicit};
use crate::machines::{
    domain_automaton, forward_part, machine_stats, serialize_transducer, Move, Transducer,
    TransducerKind, Transition,
};
use crate::oracle::{enumerate_relation, relations_equal_up_to, RelationComparison};
use crate::runs::{Side, ZRunOutputs};
use crate::words::{periodic_decompose, power, words_up_to, Symbol, Word};
use crate::zmotion::{induced_znft, shape_domain, InducedZnft};

// ---------------------------------------------------------------------------
// Decompositions of single runs

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct P1Decomposition {
    pub ell: usize,
    pub w: Word,
    pub t1: Word,
    pub t2: Word,
    pub t3: Word,
    pub w_prime: Word,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct P2Decomposition {
    pub ell1: usize,
    pub ell2: usize,
    pub w: Word,
    pub w_prime: Word,
    pub t1: Word,
    pub t2: Word,
    pub t3: Word,
}

/// Same fields as [`P2Decomposition`]; the middle also contains the whole backward output.
pub type P3Decomposition = P2Decomposition;

/// `z = t1 · t2^k` with both pieces at most `max` long.
pub fn prefix_power_split(z: &[Symbol], max: usize) -> Option<(Word, Word, usize)> {
    for a in 0..=max.min(z.len()) {
        let rest = &z[a..];
        if rest.is_empty() {
            return Some((z.to_vec(), vec![], 0));
        }
        for b in 1..=max.min(rest.len()) {
            if rest.len() % b == 0 && rest.chunks(b).all(|ch| ch == &rest[..b]) {
                return Some((z[..a].to_vec(), rest[..b].to_vec(), rest.len() / b));
            }
        }
    }
    None
}

fn cat(parts: &[&[Symbol]]) -> Word {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

/// Splits the output of a z-shaped run as `w · t1 t2^k · t3 · w'` where
/// `w` is the first-pass output left of `ell`, `t3` the backward output left
/// of `ell`, and every `t` is at most `2k` long.
pub fn check_p1(o: &ZRunOutputs, k: usize) -> Option<P1Decomposition> {
    let n = o.n;
    let bound = 2 * k;
    if n <= 1 {
        return Some(P1Decomposition {
            ell: n,
            w: vec![],
            t1: vec![],
            t2: vec![],
            t3: vec![],
            w_prime: o.out3(1, n + 1),
        });
    }
    for ell in 1..=n {
        let t3 = o.out2(1, ell);
        if t3.len() > bound {
            // grows with ell
            break;
        }
        let middle = cat(&[&o.out1(ell, n), &o.out2(ell, n)]);
        if let Some((t1, t2, reps)) = prefix_power_split(&middle, bound) {
            let d = P1Decomposition {
                ell,
                w: o.out1(1, ell),
                t1,
                t2,
                t3,
                w_prime: o.out3(1, n + 1),
            };
            debug_assert_eq!(cat(&[&d.t1, &power(&d.t2, reps)]), middle);
            return Some(d);
        }
    }
    None
}

/// The second-pass-silent case: `w · t1 t2^k t3 · w'` with the middle made of
/// the first-pass output right of `ell1` and the last-pass output left of `ell2`.
pub fn check_p2(o: &ZRunOutputs, k: usize) -> Result<Option<P2Decomposition>> {
    if (2..=o.n).any(|i| !o.backward[i].is_empty()) {
        return Err(Error::domain("check_p2 needs a run with a silent backward pass"));
    }
    Ok(split_three(o, k, false))
}

/// Like [`check_p2`] for any z-shaped run: the middle also holds the backward
/// output, which must be short on both ends.
pub fn check_p3(o: &ZRunOutputs, k: usize) -> Option<P3Decomposition> {
    split_three(o, k, true)
}

fn split_three(o: &ZRunOutputs, k: usize, with_backward: bool) -> Option<P2Decomposition> {
    let n = o.n;
    let bound = 3 * k;
    if n == 0 {
        return Some(P2Decomposition {
            ell1: 0,
            ell2: 0,
            w: vec![],
            w_prime: vec![],
            t1: vec![],
            t2: vec![],
            t3: vec![],
        });
    }
    for ell1 in 1..=n {
        if o.out3(1, ell1).len() > bound {
            break;
        }
        if with_backward && o.out2(1, ell1).len() > bound {
            break;
        }
        for ell2 in ell1..=n {
            if o.out1(ell2, n).len() > bound || (with_backward && o.out2(ell2, n).len() > bound) {
                continue;
            }
            let back = if with_backward { o.out2(1, n) } else { vec![] };
            let middle = cat(&[&o.out1(ell1, n), &back, &o.out3(1, ell2)]);
            if let Some(d) = periodic_decompose(&middle, bound) {
                debug_assert_eq!(d.reconstruct(), middle);
                return Some(P2Decomposition {
                    ell1,
                    ell2,
                    w: o.out1(1, ell1),
                    w_prime: o.out3(ell2, n + 1),
                    t1: d.t1,
                    t2: d.t2,
                    t3: d.t3,
                });
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Guessed words with lazily fixed letters

/// Guessed `t1`, `t2` and (for the three-piece pattern) `t3`; `None` marks
/// a letter not fixed yet.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Pieces {
    p: [Vec<Option<Symbol>>; 3],
    tail: bool,
}

/// Piece index and offset; offset `len` of `t1` or `t2` is written `(1, 0)`.
type Pos = (u8, u8);

const CYCLE: Pos = (1, 0);

impl Pieces {
    fn new(l1: usize, l2: usize, l3: usize, tail: bool) -> Self {
        Pieces {
            p: [vec![None; l1], vec![None; l2], vec![None; l3]],
            tail,
        }
    }

    fn len(&self, piece: u8) -> usize {
        self.p[piece as usize].len()
    }

    fn norm(&self, (piece, off): Pos) -> Pos {
        match piece {
            0 if off as usize >= self.len(0) => CYCLE,
            1 if off as usize >= self.len(1) => CYCLE,
            _ => (piece, off),
        }
    }

    fn start(&self) -> Pos {
        self.norm((0, 0))
    }

    fn end(&self) -> Pos {
        if self.tail {
            (2, self.len(2) as u8)
        } else {
            CYCLE
        }
    }

    fn closure(&self, pos: Pos) -> Vec<Pos> {
        if self.tail && pos == CYCLE {
            vec![CYCLE, (2, 0)]
        } else {
            vec![pos]
        }
    }

    fn at_end(&self, pos: Pos) -> bool {
        self.closure(pos).contains(&self.end())
    }

    fn links(&self, from: Pos, to: Pos) -> bool {
        self.closure(from).contains(&to)
    }

    fn slot(&self, (piece, off): Pos) -> Option<Option<Symbol>> {
        self.p[piece as usize].get(off as usize).copied()
    }

    fn set(&mut self, (piece, off): Pos, c: Symbol) {
        self.p[piece as usize][off as usize] = Some(c);
    }

    fn advance(&self, (piece, off): Pos) -> Pos {
        self.norm((piece, off + 1))
    }

    /// All positions, each piece offset once.
    fn positions(&self) -> Vec<Pos> {
        let mut v: Vec<Pos> = (0..self.len(0)).map(|i| (0, i as u8)).collect();
        v.push(CYCLE);
        v.extend((1..self.len(1)).map(|i| (1, i as u8)));
        if self.tail {
            v.extend((0..=self.len(2)).map(|i| (2, i as u8)));
        }
        v
    }

    /// Reads `c` forward from `pos`.
    fn read(&self, pos: Pos, c: Symbol) -> Vec<(Pieces, Pos)> {
        let mut out = vec![];
        for q in self.closure(pos) {
            match self.slot(q) {
                Some(Some(x)) if x == c => out.push((self.clone(), self.advance(q))),
                Some(None) => {
                    let mut p = self.clone();
                    p.set(q, c);
                    out.push((p, self.advance(q)));
                }
                _ => {}
            }
        }
        out
    }

    fn read_word(&self, pos: Pos, w: &[Symbol]) -> Vec<(Pieces, Pos)> {
        let mut cur = vec![(self.clone(), pos)];
        for &c in w {
            cur = cur.into_iter().flat_map(|(p, q)| p.read(q, c)).collect();
            if cur.is_empty() {
                break;
            }
        }
        cur
    }

    /// Reads `c` backward, ending just before `pos` (two-piece pattern only).
    fn read_back(&self, (piece, off): Pos, c: Symbol) -> Vec<(Pieces, Pos)> {
        let mut cands = vec![];
        if off > 0 {
            cands.push((piece, off - 1));
        } else if (piece, off) == CYCLE {
            if self.len(0) > 0 {
                cands.push((0, self.len(0) as u8 - 1));
            }
            if self.len(1) > 0 {
                cands.push((1, self.len(1) as u8 - 1));
            }
        }
        let mut out = vec![];
        for q in cands {
            match self.slot(q) {
                Some(Some(x)) if x == c => out.push((self.clone(), q)),
                Some(None) => {
                    let mut p = self.clone();
                    p.set(q, c);
                    out.push((p, q));
                }
                _ => {}
            }
        }
        out
    }

    /// Reads `w` right to left, as if prepending it.
    fn read_word_back(&self, pos: Pos, w: &[Symbol]) -> Vec<(Pieces, Pos)> {
        let mut cur = vec![(self.clone(), pos)];
        for &c in w.iter().rev() {
            cur = cur.into_iter().flat_map(|(p, q)| p.read_back(q, c)).collect();
            if cur.is_empty() {
                break;
            }
        }
        cur
    }

    /// Emits `count` letters from `pos`, fixing unknown letters in every possible way.
    fn emit(&self, pos: Pos, count: usize, letters: &[Symbol]) -> Vec<(Pieces, Pos, Word)> {
        let mut cur = vec![(self.clone(), pos, vec![])];
        for _ in 0..count {
            let mut next = vec![];
            for (p, q, w) in cur {
                for q2 in p.closure(q) {
                    match p.slot(q2) {
                        Some(Some(x)) => {
                            let mut w2 = w.clone();
                            w2.push(x);
                            next.push((p.clone(), p.advance(q2), w2));
                        }
                        Some(None) => {
                            for &c in letters {
                                let mut p2 = p.clone();
                                p2.set(q2, c);
                                let mut w2 = w.clone();
                                w2.push(c);
                                let adv = p2.advance(q2);
                                next.push((p2, adv, w2));
                            }
                        }
                        None => {}
                    }
                }
            }
            cur = next;
            if cur.is_empty() {
                break;
            }
        }
        cur
    }
}

// ---------------------------------------------------------------------------
// Indexed access to an explicit machine

struct Moves {
    /// `right[q][s]` = `(out, dst)` of right moves.
    right: Vec<Vec<Vec<(Word, usize)>>>,
    left: Vec<Vec<Vec<(Word, usize)>>>,
    /// `left_into[q'][s]` = `(out, src)` of left moves into `q'`.
    left_into: Vec<Vec<Vec<(Word, usize)>>>,
}

impl Moves {
    fn new(t: &Transducer) -> Self {
        let (n, k) = (t.states.len(), t.alphabet.len());
        let mut m = Moves {
            right: vec![vec![vec![]; k]; n],
            left: vec![vec![vec![]; k]; n],
            left_into: vec![vec![vec![]; k]; n],
        };
        for tr in &t.transitions {
            let s = t.sym_index(tr.sym).expect("validated symbol");
            match tr.mv {
                Move::Right => m.right[tr.src][s].push((tr.out.clone(), tr.dst)),
                Move::Left => {
                    m.left[tr.src][s].push((tr.out.clone(), tr.dst));
                    m.left_into[tr.dst][s].push((tr.out.clone(), tr.src));
                }
            }
        }
        m
    }
}

// ---------------------------------------------------------------------------
// T': the backward pass made silent

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum PrimeMode {
    /// Before `ell`: the backward output so far, which becomes `t3`.
    Collect { t3: Word },
    /// From `ell` on: pointers for the first-pass output (`f`), the
    /// backward output read right to left (`b`) and the emitted output (`e`).
    Verify {
        t3: Word,
        pieces: Pieces,
        f: Pos,
        b: Pos,
        e: Pos,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct FwdCore {
    /// First-pass state here.
    p: usize,
    /// Guessed backward state here.
    q: usize,
    /// Guessed letter here.
    sigma: Symbol,
    /// Backward state at position 1, where the last pass starts.
    q1: usize,
    mode: PrimeMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum PrimeState {
    Init,
    Fwd(FwdCore),
    Back { q1: usize, t3: Word },
    Third(usize),
}

/// T' as a lazily explored machine.
struct PrimeMachine<'a> {
    z: &'a Transducer,
    mv: Moves,
    bound: usize,
    emit: bool,
    letters: Vec<Symbol>,
}

impl<'a> PrimeMachine<'a> {
    fn new(z: &'a Transducer, k: usize, emit: bool) -> Self {
        PrimeMachine {
            z,
            mv: Moves::new(z),
            bound: 2 * k,
            emit,
            letters: z.output_letters(),
        }
    }

    fn sym(&self, c: Symbol) -> usize {
        self.z.sym_index(c).expect("letter of the alphabet")
    }

    fn mode_options(&self, mode: &PrimeMode) -> Vec<PrimeMode> {
        let mut v = vec![mode.clone()];
        if let PrimeMode::Collect { t3 } = mode {
            for l1 in 0..=self.bound {
                for l2 in 0..=self.bound {
                    let pieces = Pieces::new(l1, l2, 0, false);
                    let start = pieces.start();
                    v.push(PrimeMode::Verify {
                        t3: t3.clone(),
                        f: start,
                        b: CYCLE,
                        e: start,
                        pieces,
                    });
                }
            }
        }
        v
    }

    /// Applies one simulated step with forward output `x` and backward output `y`.
    fn mode_step(&self, mode: &PrimeMode, x: &[Symbol], y: &[Symbol]) -> Vec<(PrimeMode, Word)> {
        match mode {
            PrimeMode::Collect { t3 } => {
                if t3.len() + y.len() > self.bound {
                    return vec![];
                }
                vec![(PrimeMode::Collect { t3: cat(&[y, t3]) }, x.to_vec())]
            }
            PrimeMode::Verify { t3, pieces, f, b, e } => {
                let mut out = vec![];
                for (p1, f2) in pieces.read_word(*f, x) {
                    for (p2, b2) in p1.read_word_back(*b, y) {
                        if self.emit {
                            for (p3, e2, w) in p2.emit(*e, x.len() + y.len(), &self.letters) {
                                out.push((
                                    PrimeMode::Verify { t3: t3.clone(), pieces: p3, f: f2, b: b2, e: e2 },
                                    w,
                                ));
                            }
                        } else {
                            out.push((
                                PrimeMode::Verify { t3: t3.clone(), pieces: p2, f: f2, b: b2, e: *e },
                                vec![],
                            ));
                        }
                    }
                }
                out
            }
        }
    }

    /// First-pass steps from forward state `p` and backward state `q` on `a`.
    fn advance(&self, p: usize, q: Option<usize>, q1: Option<usize>, a: Symbol, mode: &PrimeMode) -> Vec<(Word, FwdCore)> {
        let s = self.sym(a);
        let mut out = vec![];
        for m in self.mode_options(mode) {
            for (x, p2) in &self.mv.right[p][s] {
                // backward transition (q', sigma', y, q, -1) guessed here
                for (bs, &sigma) in self.z.alphabet.iter().enumerate() {
                    let targets: Vec<(Word, usize, usize)> = match q {
                        Some(q) => self.mv.left_into[q][bs].iter().map(|(y, src)| (y.clone(), *src, q)).collect(),
                        None => (0..self.z.states.len())
                            .flat_map(|dst| self.mv.left_into[dst][bs].iter().map(move |(y, src)| (y.clone(), *src, dst)))
                            .collect(),
                    };
                    for (y, q_next, q_here) in targets {
                        for (m2, w) in self.mode_step(&m, x, &y) {
                            out.push((
                                w,
                                FwdCore { p: *p2, q: q_next, sigma, q1: q1.unwrap_or(q_here), mode: m2 },
                            ));
                        }
                    }
                }
            }
        }
        out
    }

    fn turn(&self, core: &FwdCore, a: Symbol) -> Option<PrimeState> {
        if a != core.sigma || core.p != core.q {
            return None;
        }
        match &core.mode {
            PrimeMode::Collect { t3 } => Some(PrimeState::Back { q1: core.q1, t3: t3.clone() }),
            PrimeMode::Verify { t3, f, b, .. } => (f == b).then(|| PrimeState::Back { q1: core.q1, t3: t3.clone() }),
        }
    }
}

impl Implicit for PrimeMachine<'_> {
    type State = PrimeState;

    fn alphabet(&self) -> &[Symbol] {
        &self.z.alphabet
    }

    fn initial(&self) -> Vec<PrimeState> {
        vec![PrimeState::Init]
    }

    fn is_final(&self, s: &PrimeState) -> bool {
        match s {
            PrimeState::Init => self.z.is_final(self.z.initial),
            PrimeState::Third(r) => self.z.is_final(*r),
            _ => false,
        }
    }

    fn successors(&self, s: &PrimeState, a: Symbol) -> Vec<(Word, PrimeState, Move)> {
        let sym = self.sym(a);
        match s {
            PrimeState::Init => {
                let q0 = self.z.initial;
                let mut out: Vec<(Word, PrimeState, Move)> = self.mv.right[q0][sym]
                    .iter()
                    .filter(|(_, d)| self.z.is_final(*d))
                    .map(|(x, d)| (x.clone(), PrimeState::Third(*d), Move::Right))
                    .collect();
                let start = PrimeMode::Collect { t3: vec![] };
                out.extend(
                    self.advance(q0, None, None, a, &start)
                        .into_iter()
                        .map(|(w, c)| (w, PrimeState::Fwd(c), Move::Right)),
                );
                out
            }
            PrimeState::Fwd(core) => {
                let mut out = vec![];
                if let Some(b) = self.turn(core, a) {
                    out.push((vec![], b, Move::Left));
                }
                if a == core.sigma {
                    out.extend(
                        self.advance(core.p, Some(core.q), Some(core.q1), a, &core.mode)
                            .into_iter()
                            .map(|(w, c)| (w, PrimeState::Fwd(c), Move::Right)),
                    );
                }
                out
            }
            PrimeState::Back { q1, t3 } => {
                let mut out = vec![(vec![], s.clone(), Move::Left)];
                for (x, r2) in &self.mv.right[*q1][sym] {
                    out.push((cat(&[t3, x]), PrimeState::Third(*r2), Move::Right));
                }
                out
            }
            PrimeState::Third(r) => self.mv.right[*r][sym]
                .iter()
                .map(|(x, d)| (x.clone(), PrimeState::Third(*d), Move::Right))
                .collect(),
        }
    }

    fn label(&self, s: &PrimeState) -> String {
        let st = |q: usize| self.z.states[q].clone();
        match s {
            PrimeState::Init => "init".into(),
            PrimeState::Fwd(c) => format!("f[{},{},{},{},{}]", st(c.p), st(c.q), c.sigma, st(c.q1), mode_label(&c.mode)),
            PrimeState::Back { q1, t3 } => format!("b[{},{}]", st(*q1), t3.iter().collect::<String>()),
            PrimeState::Third(r) => format!("t[{}]", st(*r)),
        }
    }
}

fn pieces_label(p: &Pieces) -> String {
    p.p.iter()
        .map(|w| w.iter().map(|c| c.unwrap_or('?')).collect::<String>())
        .collect::<Vec<_>>()
        .join("|")
}

fn mode_label(m: &PrimeMode) -> String {
    match m {
        PrimeMode::Collect { t3 } => format!("c:{}", t3.iter().collect::<String>()),
        PrimeMode::Verify { t3, pieces, f, b, e } => format!(
            "v:{}:{}:{:?}{:?}{:?}",
            t3.iter().collect::<String>(),
            pieces_label(pieces),
            f,
            b,
            e
        ),
    }
}

/// Domain of T' as a one-way automaton, following its last pass alongside.
struct PrimeDomain<'a> {
    m: PrimeMachine<'a>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum DomState {
    Start,
    Mid(FwdCore, usize),
    Done,
}

impl Implicit for PrimeDomain<'_> {
    type State = DomState;

    fn alphabet(&self) -> &[Symbol] {
        &self.m.z.alphabet
    }

    fn initial(&self) -> Vec<DomState> {
        vec![DomState::Start]
    }

    fn is_final(&self, s: &DomState) -> bool {
        match s {
            DomState::Start => self.m.z.is_final(self.m.z.initial),
            DomState::Done => true,
            DomState::Mid(..) => false,
        }
    }

    fn successors(&self, s: &DomState, a: Symbol) -> Vec<(Word, DomState, Move)> {
        let z = self.m.z;
        let sym = self.m.sym(a);
        let right = &self.m.mv.right;
        let mut out = BTreeSet::new();
        match s {
            DomState::Start => {
                if right[z.initial][sym].iter().any(|(_, d)| z.is_final(*d)) {
                    out.insert(DomState::Done);
                }
                for (_, st, _) in self.m.successors(&PrimeState::Init, a) {
                    if let PrimeState::Fwd(core) = st {
                        for (_, r2) in &right[core.q1][sym] {
                            out.insert(DomState::Mid(core.clone(), *r2));
                        }
                    }
                }
            }
            DomState::Mid(core, r) => {
                for (_, st, _) in self.m.successors(&PrimeState::Fwd(core.clone()), a) {
                    match st {
                        PrimeState::Fwd(c2) => {
                            for (_, r2) in &right[*r][sym] {
                                out.insert(DomState::Mid(c2.clone(), *r2));
                            }
                        }
                        PrimeState::Back { .. } => {
                            if right[*r][sym].iter().any(|(_, d)| z.is_final(*d)) {
                                out.insert(DomState::Done);
                            }
                        }
                        _ => {}
                    }
                }
            }
            DomState::Done => {}
        }
        out.into_iter().map(|d| (vec![], d, Move::Right)).collect()
    }
}

// ---------------------------------------------------------------------------
// T'': the one-way machine

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum DoublePhase {
    /// Before `ell1`: the last-pass output so far.
    Collect { c: Word },
    /// Between `ell1` and `ell2`: `f` follows the first-pass output, `g` the
    /// last-pass output as (start, current), `e` the emitted output. The
    /// start of `g` is guessed when it reads its first letter.
    Middle { c: Word, pieces: Pieces, f: Pos, g: Option<(Pos, Pos)>, e: Pos },
    /// From `ell2` on: the rest of the middle has been emitted, so the
    /// first-pass output still to come is known exactly.
    Tail { expect: Word },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum DoubleState {
    Start,
    Sim { p: usize, qprev: usize, r: usize, phase: DoublePhase },
    Done,
}

struct DoubleMachine<'a> {
    e: &'a Transducer,
    mv: Moves,
    bound: usize,
    letters: Vec<Symbol>,
    /// States entered by a backward move; the backward pass ends in one.
    left_targets: Vec<usize>,
    /// First-pass states that can still reach a turn.
    can_turn: Vec<bool>,
    /// Last-pass states that can still reach a final state.
    can_finish: Vec<bool>,
    /// Bitset per first-pass state of the backward-pass states its runs can reach.
    backs: Vec<Vec<u64>>,
}

fn bit(set: &[u64], i: usize) -> bool {
    set[i / 64] >> (i % 64) & 1 == 1
}

/// For every state, the states reachable by turning somewhere to its right
/// and then moving left.
fn backward_reach(e: &Transducer) -> Vec<Vec<u64>> {
    let n = e.states.len();
    let words = n.div_ceil(64);
    let mut left_succ: Vec<Vec<usize>> = vec![vec![]; n];
    let mut right_succ: Vec<Vec<usize>> = vec![vec![]; n];
    for t in &e.transitions {
        match t.mv {
            Move::Left => left_succ[t.src].push(t.dst),
            Move::Right => right_succ[t.src].push(t.dst),
        }
    }
    // left closure of the left successors
    let mut sets: Vec<Vec<u64>> = (0..n)
        .map(|p| {
            let mut set = vec![0u64; words];
            let mut stack: Vec<usize> = left_succ[p].clone();
            while let Some(q) = stack.pop() {
                if !bit(&set, q) {
                    set[q / 64] |= 1 << (q % 64);
                    stack.extend(left_succ[q].iter().copied());
                }
            }
            set
        })
        .collect();
    loop {
        let mut changed = false;
        for p in 0..n {
            for &d in &right_succ[p] {
                if d == p {
                    continue;
                }
                for w in 0..words {
                    let add = sets[d][w] & !sets[p][w];
                    if add != 0 {
                        sets[p][w] |= add;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return sets;
        }
    }
}

impl<'a> DoubleMachine<'a> {
    fn new(e: &'a Transducer, k: usize) -> Result<Self> {
        if e.transitions.iter().any(|t| t.mv == Move::Left && !t.out.is_empty()) {
            return Err(Error::domain("backward transitions must output nothing"));
        }
        let left_targets: BTreeSet<usize> =
            e.transitions.iter().filter(|t| t.mv == Move::Left).map(|t| t.dst).collect();
        let n = e.states.len();
        let mut can_turn: Vec<bool> = (0..n)
            .map(|q| e.transitions.iter().any(|t| t.src == q && t.mv == Move::Left))
            .collect();
        let mut can_finish = vec![false; n];
        loop {
            let mut changed = false;
            for t in e.transitions.iter().filter(|t| t.mv == Move::Right) {
                if can_turn[t.dst] && !can_turn[t.src] {
                    can_turn[t.src] = true;
                    changed = true;
                }
                if (e.is_final(t.dst) || can_finish[t.dst]) && !can_finish[t.src] {
                    can_finish[t.src] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        Ok(DoubleMachine {
            e,
            backs: backward_reach(e),
            can_turn,
            can_finish,
            left_targets: left_targets.into_iter().collect(),
            mv: Moves::new(e),
            bound: 3 * k,
            letters: e.output_letters(),
        })
    }

    /// Phases available before a step, with the letters emitted by the switch.
    fn phase_options(&self, ph: &DoublePhase) -> Vec<(DoublePhase, Word)> {
        let mut v = vec![(ph.clone(), vec![])];
        if let DoublePhase::Collect { c } = ph {
            for l1 in 0..=self.bound {
                for l2 in 0..=self.bound {
                    for l3 in 0..=self.bound {
                        let pieces = Pieces::new(l1, l2, l3, true);
                        let start = pieces.start();
                        v.push((DoublePhase::Middle { c: c.clone(), pieces, f: start, g: None, e: start }, vec![]));
                    }
                }
            }
            // straight to the tail: the middle is the owed output followed by
            // `c`, and two bounded pieces always cover it
            for expect in words_up_to(&self.letters, self.bound) {
                let emitted = cat(&[&expect, c]);
                v.push((DoublePhase::Tail { expect }, emitted));
            }
        } else {
            let tails = self.to_tail(ph);
            v.extend(tails);
        }
        v
    }

    fn to_tail(&self, ph: &DoublePhase) -> Vec<(DoublePhase, Word)> {
        let DoublePhase::Middle { c, pieces, f, g, e } = ph else {
            return vec![];
        };
        let mut v = BTreeSet::new();
        for owed in 0..=self.bound {
            for (p2, e2, w) in pieces.emit(*e, owed + c.len(), &self.letters) {
                if !p2.at_end(e2) {
                    continue;
                }
                // every letter from `f` to the end is fixed now
                for (p3, f3, expect) in p2.emit(*f, owed, &self.letters) {
                    let closes = p3.read_word(f3, c).into_iter().any(|(p4, f4)| match g {
                        Some((g0, cur)) => p4.links(f4, *g0) && p4.at_end(*cur),
                        None => p4.at_end(f4),
                    });
                    if closes {
                        v.insert((DoublePhase::Tail { expect }, w.clone()));
                    }
                }
            }
        }
        v.into_iter().collect()
    }

    /// One step with first-pass output `x` and last-pass output `z`.
    fn phase_step(&self, ph: &DoublePhase, x: &[Symbol], z: &[Symbol]) -> Vec<(DoublePhase, Word)> {
        match ph {
            DoublePhase::Collect { c } => {
                if c.len() + z.len() > self.bound {
                    return vec![];
                }
                vec![(DoublePhase::Collect { c: cat(&[c, z]) }, x.to_vec())]
            }
            DoublePhase::Middle { c, pieces, f, g, e } => {
                let mut out = vec![];
                for (p1, f2) in pieces.read_word(*f, x) {
                    let starts: Vec<Pos> = match g {
                        _ if z.is_empty() => vec![],
                        Some((g0, _)) => vec![*g0],
                        None => p1.positions(),
                    };
                    let mut reads: Vec<(Pieces, Option<(Pos, Pos)>)> = vec![];
                    if z.is_empty() {
                        reads.push((p1.clone(), *g));
                    }
                    for g0 in starts {
                        let cur = g.map_or(g0, |(_, cur)| cur);
                        for (p2, g2) in p1.read_word(cur, z) {
                            reads.push((p2, Some((g0, g2))));
                        }
                    }
                    for (p2, g2) in reads {
                        for (p3, e2, w) in p2.emit(*e, x.len() + z.len(), &self.letters) {
                            out.push((DoublePhase::Middle { c: c.clone(), pieces: p3, f: f2, g: g2, e: e2 }, w));
                        }
                    }
                }
                out
            }
            DoublePhase::Tail { expect } => match expect.strip_prefix(x) {
                Some(rest) => vec![(DoublePhase::Tail { expect: rest.to_vec() }, z.to_vec())],
                None => vec![],
            },
        }
    }

    fn closes(&self, ph: &DoublePhase) -> bool {
        matches!(ph, DoublePhase::Tail { expect } if expect.is_empty())
    }
}

impl Implicit for DoubleMachine<'_> {
    type State = DoubleState;

    fn alphabet(&self) -> &[Symbol] {
        &self.e.alphabet
    }

    fn initial(&self) -> Vec<DoubleState> {
        vec![DoubleState::Start]
    }

    fn is_final(&self, s: &DoubleState) -> bool {
        match s {
            DoubleState::Start => self.e.is_final(self.e.initial),
            DoubleState::Done => true,
            DoubleState::Sim { .. } => false,
        }
    }

    fn successors(&self, s: &DoubleState, a: Symbol) -> Vec<(Word, DoubleState, Move)> {
        self.successors_where(s, a, &|_, _, _| true)
    }

    fn label(&self, s: &DoubleState) -> String {
        self.state_label(s)
    }
}

impl DoubleMachine<'_> {
    /// Successors whose simulated triple `(p, qprev, r)` satisfies `keep`.
    fn successors_where(
        &self,
        s: &DoubleState,
        a: Symbol,
        keep: &dyn Fn(usize, usize, usize) -> bool,
    ) -> Vec<(Word, DoubleState, Move)> {
        let e = self.e;
        let sym = e.sym_index(a).expect("letter of the alphabet");
        let right = &self.mv.right;
        let mut out: BTreeSet<(Word, DoubleState)> = BTreeSet::new();
        match s {
            DoubleState::Start => {
                for (x, d) in &right[e.initial][sym] {
                    if e.is_final(*d) {
                        out.insert((x.clone(), DoubleState::Done));
                    }
                }
                for (ph, pre) in self.phase_options(&DoublePhase::Collect { c: vec![] }) {
                    for (x, p2) in right[e.initial][sym].iter().filter(|(_, p2)| self.can_turn[*p2]) {
                        for &q1 in self.left_targets.iter().filter(|&&q1| bit(&self.backs[*p2], q1)) {
                            for (z, r2) in right[q1][sym]
                                .iter()
                                .filter(|(_, r2)| self.can_finish[*r2] && keep(*p2, q1, *r2))
                            {
                                for (ph2, w) in self.phase_step(&ph, x, z) {
                                    out.insert((
                                        cat(&[&pre, &w]),
                                        DoubleState::Sim { p: *p2, qprev: q1, r: *r2, phase: ph2 },
                                    ));
                                }
                            }
                        }
                    }
                }
            }
            DoubleState::Sim { p, qprev, r, phase } => {
                for (ph, pre) in self.phase_options(phase) {
                    // last letter: turn back into qprev and finish the last pass
                    if self.mv.left[*p][sym].iter().any(|(_, d)| d == qprev) {
                        for (z, f) in &right[*r][sym] {
                            if !e.is_final(*f) {
                                continue;
                            }
                            for (ph2, w) in self.phase_step(&ph, &[], z) {
                                if self.closes(&ph2) {
                                    out.insert((cat(&[&pre, &w]), DoubleState::Done));
                                }
                            }
                        }
                    }
                    for (x, p2) in right[*p][sym].iter().filter(|(_, p2)| self.can_turn[*p2]) {
                        for (_, q) in self.mv.left_into[*qprev][sym].iter().filter(|(_, q)| bit(&self.backs[*p2], *q)) {
                            for (z, r2) in right[*r][sym]
                                .iter()
                                .filter(|(_, r2)| self.can_finish[*r2] && keep(*p2, *q, *r2))
                            {
                                for (ph2, w) in self.phase_step(&ph, x, z) {
                                    out.insert((
                                        cat(&[&pre, &w]),
                                        DoubleState::Sim { p: *p2, qprev: *q, r: *r2, phase: ph2 },
                                    ));
                                }
                            }
                        }
                    }
                }
            }
            DoubleState::Done => {}
        }
        out.into_iter().map(|(w, d)| (w, d, Move::Right)).collect()
    }

    fn state_label(&self, s: &DoubleState) -> String {
        let st = |q: usize| self.e.states[q].clone();
        match s {
            DoubleState::Start => "start".into(),
            DoubleState::Done => "done".into(),
            DoubleState::Sim { p, qprev, r, phase } => {
                let ph = match phase {
                    DoublePhase::Collect { c } => format!("c:{}", c.iter().collect::<String>()),
                    DoublePhase::Middle { c, pieces, f, g, e } => format!(
                        "m:{}:{}:{f:?}{g:?}{e:?}",
                        c.iter().collect::<String>(),
                        pieces_label(pieces)
                    ),
                    DoublePhase::Tail { expect } => format!("t:{}", expect.iter().collect::<String>()),
                };
                format!("<{}|{}|{}|{ph}>", st(*p), st(*qprev), st(*r))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Configuration and verdicts

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefinabilityConfig {
    /// Bound used in place of the machine's own constant when set.
    pub k_override: Option<usize>,
    /// Cap on squeeze rounds; the square of the state count when unset.
    pub max_squeeze_iterations: Option<usize>,
    pub crossing_bound: usize,
    pub oracle_word_bound: usize,
    /// Cap on the states of every explored construction.
    pub state_budget: usize,
}

impl Default for DefinabilityConfig {
    fn default() -> Self {
        DefinabilityConfig {
            k_override: None,
            max_squeeze_iterations: None,
            crossing_bound: 3,
            oracle_word_bound: 5,
            state_budget: DEFAULT_STATE_BUDGET,
        }
    }
}

impl DefinabilityConfig {
    pub fn with_k(k: usize) -> Self {
        DefinabilityConfig {
            k_override: Some(k),
            ..Default::default()
        }
    }

    /// The bound in force for `t`, and whether it reaches the machine's own constant.
    pub fn k_for(&self, t: &Transducer) -> (usize, bool) {
        let true_k = machine_stats(t).k;
        match self.k_override {
            Some(k) => (k, k >= true_k),
            None => (true_k, true),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Definable,
    NotDefinable,
    BoundExceeded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefutationKind {
    /// A domain word none of whose runs splits with a silent-backward shape.
    BackwardSplit,
    /// A domain word none of whose runs splits into a one-way shape.
    ForwardSplit,
    /// A z-motion component of a two-way machine is not one-way definable.
    Component,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Refutation {
    pub kind: RefutationKind,
    pub word: Option<Word>,
    /// Name of the failing z-motion component.
    pub component: Option<String>,
    /// The component machine in file format.
    pub component_machine: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Witness {
    Machine(Transducer),
    Refutation(Refutation),
    /// Why a bound was hit.
    Exhausted(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefinabilityVerdict {
    pub outcome: Outcome,
    pub witness: Option<Witness>,
    pub iterations_used: usize,
    pub config: DefinabilityConfig,
    pub k_used: usize,
    /// Whether `k_used` reaches the machine's own constant, so that a
    /// negative answer is final and not only a failure at the bound.
    pub k_is_complete: bool,
}

impl DefinabilityVerdict {
    pub fn witness_machine(&self) -> Option<&Transducer> {
        match &self.witness {
            Some(Witness::Machine(t)) => Some(t),
            _ => None,
        }
    }

    pub fn refutation(&self) -> Option<&Refutation> {
        match &self.witness {
            Some(Witness::Refutation(r)) => Some(r),
            _ => None,
        }
    }

    fn exhausted(config: &DefinabilityConfig, k: (usize, bool), iterations: usize, why: String) -> Self {
        DefinabilityVerdict {
            outcome: Outcome::BoundExceeded,
            witness: Some(Witness::Exhausted(why)),
            iterations_used: iterations,
            config: config.clone(),
            k_used: k.0,
            k_is_complete: k.1,
        }
    }
}

fn empty_nft(t: &Transducer) -> Transducer {
    let mut e = Transducer::new(format!("{}_empty", t.name), TransducerKind::Nft, &t.alphabet);
    e.states.push("q".into());
    e
}

/// Fails when the bounded relation has an input with two outputs.
fn check_functional(t: &Transducer, config: &DefinabilityConfig) -> Result<()> {
    let rel = enumerate_relation(t, config.oracle_word_bound, config.crossing_bound);
    match rel.ambiguous_inputs().first() {
        Some(u) => Err(Error::NotFunctional(format!(
            "input {:?} has several outputs",
            u.iter().collect::<String>()
        ))),
        None => Ok(()),
    }
}

// ---------------------------------------------------------------------------
// Constructions

fn require_znft(z: &Transducer) -> Result<()> {
    if !z.kind.is_zshaped() {
        return Err(Error::domain(format!("expected a znft, got {}", z.kind.token())));
    }
    Ok(())
}

/// Refuses bounds whose guessed pieces alone would outgrow the state budget.
fn check_guess_space(t: &Transducer, piece_bound: usize, budget: usize) -> Result<()> {
    let letters = t.output_letters().len().max(1) as f64;
    let words: f64 = (0..=piece_bound).map(|i| letters.powi(i as i32)).sum();
    let splits = ((piece_bound + 1) * (piece_bound + 1)) as f64;
    if words > budget as f64 || splits > budget as f64 {
        return Err(Error::BoundExceeded(format!(
            "pieces of length {piece_bound} over {letters} letters exceed the budget of {budget} states"
        )));
    }
    Ok(())
}

fn has_silent_backward(z: &Transducer) -> bool {
    z.transitions.iter().all(|t| t.mv == Move::Right || t.out.is_empty())
}

/// T': same relation as `z` restricted to the pairs with a run that splits
/// per [`check_p1`] at the configured bound; its backward pass is silent.
pub fn build_eznft(z: &Transducer, config: &DefinabilityConfig) -> Result<Transducer> {
    require_znft(z)?;
    if has_silent_backward(z) {
        // every run already splits with the whole backward pass as `t3 = ε`
        let mut e = z.clone();
        e.kind = TransducerKind::Eznft;
        e.name = format!("{}_eps", z.name);
        return Ok(e);
    }
    let (k, _) = config.k_for(z);
    check_guess_space(z, 2 * k, config.state_budget)?;
    let m = PrimeMachine::new(z, k, true);
    materialize(&m, TransducerKind::Eznft, &format!("{}_eps", z.name), config.state_budget)
}

/// T'': a one-way transducer for the pairs of `e` whose runs split per [`check_p2`].
pub fn build_nft_from_eznft(e: &Transducer, config: &DefinabilityConfig) -> Result<Transducer> {
    if e.kind != TransducerKind::Eznft {
        return Err(Error::domain(format!("expected an eznft, got {}", e.kind.token())));
    }
    let (k, _) = config.k_for(e);
    check_guess_space(e, 3 * k, config.state_budget)?;
    let m = DoubleMachine::new(e, k)?;
    materialize(&m, TransducerKind::Nft, &format!("{}_nft", e.name), config.state_budget)
}

/// Outputs of T' on `u`, without building it.
pub fn eval_eznft_lazily(z: &Transducer, config: &DefinabilityConfig, u: &[Symbol]) -> Result<BTreeSet<Word>> {
    require_znft(z)?;
    let (k, _) = config.k_for(z);
    check_guess_space(z, 2 * k, config.state_budget)?;
    Ok(crate::implicit::zshaped_eval(&PrimeMachine::new(z, k, true), u))
}

/// Outputs of T'' built over the eznft `e` on `u`, without building it.
pub fn eval_nft_lazily(e: &Transducer, config: &DefinabilityConfig, u: &[Symbol]) -> Result<BTreeSet<Word>> {
    let (k, _) = config.k_for(e);
    check_guess_space(e, 3 * k, config.state_budget)?;
    let m = DoubleMachine::new(e, k)?;
    let pinned = Pinned { live: live_zrun_states(e, u), m };
    Ok(crate::implicit::oneway_eval(&pinned, u))
}

/// States on some accepting z-shaped run of `e` on `u`, per configuration index.
fn live_zrun_states(e: &Transducer, u: &[Symbol]) -> Vec<BTreeSet<usize>> {
    let shape = crate::runs::zshape(u.len());
    let mut layers: Vec<BTreeSet<usize>> = vec![BTreeSet::from([e.initial])];
    let mut edges: Vec<Vec<(usize, usize)>> = vec![];
    for w in shape.windows(2) {
        let mv = if w[1] > w[0] { Move::Right } else { Move::Left };
        let c = u[w[0] - 1];
        let cur = layers.last().expect("non-empty");
        let es: Vec<(usize, usize)> = e
            .transitions
            .iter()
            .filter(|t| t.mv == mv && t.sym == c && cur.contains(&t.src))
            .map(|t| (t.src, t.dst))
            .collect();
        layers.push(es.iter().map(|&(_, d)| d).collect());
        edges.push(es);
    }
    let mut live: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); layers.len()];
    let last = layers.len() - 1;
    live[last] = layers[last].iter().copied().filter(|&q| e.is_final(q)).collect();
    for k in (0..edges.len()).rev() {
        let next = live[k + 1].clone();
        live[k] = edges[k].iter().filter(|(_, d)| next.contains(d)).map(|&(s, _)| s).collect();
    }
    live
}

/// T'' restricted to simulated states that occur on accepting runs of the
/// eznft on one fixed word.
struct Pinned<'a> {
    m: DoubleMachine<'a>,
    live: Vec<BTreeSet<usize>>,
}

impl Pinned<'_> {
    /// Whether the simulation after `k` letters agrees with the live states.
    fn agrees(&self, k: usize, s: &DoubleState) -> bool {
        let n = (self.live.len() + 1) / 3;
        match s {
            DoubleState::Sim { p, qprev, r, .. } => {
                k < n
                    && self.live[k].contains(p)
                    && self.live[2 * n - 1 - k].contains(qprev)
                    && self.live[2 * n - 2 + k].contains(r)
            }
            _ => true,
        }
    }
}

impl Implicit for Pinned<'_> {
    type State = (usize, DoubleState);

    fn alphabet(&self) -> &[Symbol] {
        self.m.alphabet()
    }

    fn initial(&self) -> Vec<Self::State> {
        vec![(0, DoubleState::Start)]
    }

    fn is_final(&self, (_, s): &Self::State) -> bool {
        self.m.is_final(s)
    }

    fn successors(&self, (k, s): &Self::State, c: Symbol) -> Vec<(Word, Self::State, Move)> {
        if self.live.iter().any(|l| l.is_empty()) {
            return vec![];
        }
        let n = (self.live.len() + 1) / 3;
        let step = k + 1;
        let keep = |p: usize, qprev: usize, r: usize| {
            step < n
                && self.live[step].contains(&p)
                && self.live[2 * n - 1 - step].contains(&qprev)
                && self.live[2 * n - 2 + step].contains(&r)
        };
        self.m
            .successors_where(s, c, &keep)
            .into_iter()
            .filter(|(_, d, _)| self.agrees(step, d))
            .map(|(w, d, mv)| (w, (k + 1, d), mv))
            .collect()
    }
}

/// Whether a z-shaped transducer has a one-way equivalent.
pub fn decide_znft_definable(z: &Transducer, config: &DefinabilityConfig) -> Result<DefinabilityVerdict> {
    require_znft(z)?;
    check_functional(z, config)?;
    decide_znft_unchecked(z, config)
}

fn decide_znft_unchecked(z: &Transducer, config: &DefinabilityConfig) -> Result<DefinabilityVerdict> {
    let k = config.k_for(z);
    let verdict = |outcome, witness| DefinabilityVerdict {
        outcome,
        witness: Some(witness),
        iterations_used: 0,
        config: config.clone(),
        k_used: k.0,
        k_is_complete: k.1,
    };
    let exhausted = |e: Error| DefinabilityVerdict::exhausted(config, k, 0, e.to_string());
    let dom = match shape_domain(z, config.state_budget) {
        Ok(d) => d,
        Err(Error::BoundExceeded(m)) => return Ok(exhausted(Error::BoundExceeded(m))),
        Err(e) => return Err(e),
    };
    if nfa_empty(&dom)? {
        return Ok(verdict(Outcome::Definable, Witness::Machine(empty_nft(z))));
    }
    if let Some(refuted) = refute_backward_split(z, &dom, config)? {
        return Ok(match refuted {
            Ok(w) => verdict(Outcome::NotDefinable, Witness::Refutation(w)),
            Err(e) => exhausted(e),
        });
    }
    let e = match build_eznft(z, config) {
        Ok(e) => e,
        Err(err @ Error::BoundExceeded(_)) => return Ok(exhausted(err)),
        Err(err) => return Err(err),
    };
    let nft = match build_nft_from_eznft(&e, config) {
        Ok(n) => n,
        Err(err @ Error::BoundExceeded(_)) => return Ok(exhausted(err)),
        Err(err) => return Err(err),
    };
    if let Equivalence::Counterexample(w) = nfa_equivalent(&dom, &domain_automaton(&nft))? {
        return Ok(verdict(
            Outcome::NotDefinable,
            Witness::Refutation(Refutation {
                kind: RefutationKind::ForwardSplit,
                word: Some(w),
                component: None,
                component_machine: None,
            }),
        ));
    }
    let mut nft = nft;
    nft.name = format!("{}_oneway", z.name);
    match relations_equal_up_to(&nft, z, config.oracle_word_bound, config.crossing_bound)? {
        RelationComparison::Equal => Ok(verdict(Outcome::Definable, Witness::Machine(nft))),
        RelationComparison::Differ { input, .. } => Err(Error::domain(format!(
            "one-way witness disagrees on {:?}",
            input.iter().collect::<String>()
        ))),
    }
}

/// Compares the domain of `z` with the domain of T'. `Some(Ok)` is a refutation.
fn refute_backward_split(
    z: &Transducer,
    dom: &crate::automata::Automaton,
    config: &DefinabilityConfig,
) -> Result<Option<std::result::Result<Refutation, Error>>> {
    if has_silent_backward(z) {
        return Ok(None);
    }
    let (k, _) = config.k_for(z);
    if let Err(e) = check_guess_space(z, 2 * k, config.state_budget) {
        return Ok(Some(Err(e)));
    }
    let prime = PrimeDomain {
        m: PrimeMachine::new(z, k, false),
    };
    match lazy_equivalent(dom, &prime, config.state_budget) {
        Ok(Equivalence::Equivalent) => Ok(None),
        Ok(Equivalence::Counterexample(w)) => Ok(Some(Ok(Refutation {
            kind: RefutationKind::BackwardSplit,
            word: Some(w),
            component: None,
            component_machine: None,
        }))),
        Err(e @ Error::BoundExceeded(_)) => Ok(Some(Err(e))),
        Err(e) => Err(e),
    }
}

// ---------------------------------------------------------------------------
// Squeezing two-way machines

/// One-way components for every z-motion of `t`, or the first failure.
pub struct Components {
    pub left: BTreeMap<(usize, usize), Transducer>,
    pub right: BTreeMap<(usize, usize), Transducer>,
}

pub enum ComponentCheck {
    Ready(Components),
    Failed(DefinabilityVerdict, InducedZnft),
    Exhausted(DefinabilityVerdict),
}

fn induced_all(t: &Transducer) -> Result<Vec<InducedZnft>> {
    let mut out = vec![];
    for side in [Side::Left, Side::Right] {
        for q1 in 0..t.states.len() {
            for q2 in 0..t.states.len() {
                let z = induced_znft(t, q1, q2, side)?;
                if !z.base.finals.is_empty() {
                    out.push(z);
                }
            }
        }
    }
    Ok(out)
}

/// Decides every induced z-motion component, cheap refutations first.
pub fn check_components(t: &Transducer, config: &DefinabilityConfig) -> Result<ComponentCheck> {
    let induced = induced_all(t)?;
    let mut doms = vec![];
    for z in &induced {
        let dom = match shape_domain(&z.base, config.state_budget) {
            Ok(d) => d,
            Err(Error::BoundExceeded(m)) => {
                return Ok(ComponentCheck::Exhausted(DefinabilityVerdict::exhausted(
                    config,
                    config.k_for(&z.base),
                    0,
                    m,
                )))
            }
            Err(e) => return Err(e),
        };
        doms.push(dom);
    }
    for (z, dom) in induced.iter().zip(&doms) {
        if nfa_empty(dom)? {
            continue;
        }
        match refute_backward_split(&z.base, dom, config)? {
            None => {}
            Some(Ok(r)) => {
                let k = config.k_for(&z.base);
                let v = DefinabilityVerdict {
                    outcome: Outcome::NotDefinable,
                    witness: Some(Witness::Refutation(r)),
                    iterations_used: 0,
                    config: config.clone(),
                    k_used: k.0,
                    k_is_complete: k.1,
                };
                return Ok(ComponentCheck::Failed(v, z.clone()));
            }
            Some(Err(e)) => {
                return Ok(ComponentCheck::Exhausted(DefinabilityVerdict::exhausted(
                    config,
                    config.k_for(&z.base),
                    0,
                    e.to_string(),
                )))
            }
        }
    }
    let mut comps = Components {
        left: BTreeMap::new(),
        right: BTreeMap::new(),
    };
    for z in induced {
        let v = decide_znft_unchecked(&z.base, config)?;
        match v.outcome {
            Outcome::Definable => {
                let m = v.witness_machine().cloned().expect("definable verdicts carry a machine");
                match z.side {
                    Side::Left => comps.left.insert((z.q1, z.q2), m),
                    Side::Right => comps.right.insert((z.q1, z.q2), m),
                };
            }
            Outcome::NotDefinable => return Ok(ComponentCheck::Failed(v, z)),
            Outcome::BoundExceeded => return Ok(ComponentCheck::Exhausted(v)),
        }
    }
    Ok(ComponentCheck::Ready(comps))
}

/// Assembles the squeezed machine from one-way components.
///
/// States are those of `t` followed by a copy of every component; right-side
/// components run with their moves reversed.
pub fn assemble_squeeze(t: &Transducer, comps: &Components) -> Transducer {
    let mut out = Transducer::new(format!("{}_sq", t.name), TransducerKind::TwoNft, &t.alphabet);
    out.states = t.states.clone();
    out.finals = t.finals.clone();
    // offset, initial, component, side, (q1, q2)
    let mut blocks: Vec<(usize, &Transducer, Side, usize, usize)> = vec![];
    for (side, map) in [(Side::Left, &comps.left), (Side::Right, &comps.right)] {
        for (&(q1, q2), c) in map {
            let off = out.states.len();
            let tag = if side == Side::Left { "L" } else { "R" };
            for s in &c.states {
                out.states.push(format!("{tag}.{}.{}.{s}", t.states[q1], t.states[q2]));
            }
            blocks.push((off, c, side, q1, q2));
        }
    }
    let dir = |side: Side| if side == Side::Left { Move::Right } else { Move::Left };
    let entries_of = |q: usize| -> Vec<(usize, &Transducer, Side)> {
        blocks
            .iter()
            .filter(|b| b.3 == q)
            .map(|b| (b.0 + b.1.initial, b.1, b.2))
            .collect()
    };
    let mut trans: Vec<Transition> = t.transitions.clone();
    // T-mode transitions entering a z-motion at their target
    for tr in &t.transitions {
        for (init, _, _) in entries_of(tr.dst) {
            trans.push(Transition { dst: init, ..tr.clone() });
        }
    }
    for &(off, c, side, _, q2) in &blocks {
        let m = dir(side);
        for tr in &c.transitions {
            trans.push(Transition {
                src: off + tr.src,
                sym: tr.sym,
                out: tr.out.clone(),
                dst: off + tr.dst,
                mv: m,
            });
            if !c.is_final(tr.dst) {
                continue;
            }
            // leaving the z-motion: continue as t from q2 on the same letter
            for t2 in t.transitions.iter().filter(|x| x.src == q2 && x.sym == tr.sym) {
                let out_w = cat(&[&tr.out, &t2.out]);
                trans.push(Transition { src: off + tr.src, sym: tr.sym, out: out_w.clone(), dst: t2.dst, mv: t2.mv });
                for (init, _, _) in entries_of(t2.dst) {
                    trans.push(Transition { src: off + tr.src, sym: tr.sym, out: out_w.clone(), dst: init, mv: t2.mv });
                }
            }
            // or start the next z-motion from q2 right away
            for (init, next, nside) in entries_of(q2) {
                let noff = init - next.initial;
                for t3 in next.transitions.iter().filter(|x| x.src == next.initial && x.sym == tr.sym) {
                    trans.push(Transition {
                        src: off + tr.src,
                        sym: tr.sym,
                        out: cat(&[&tr.out, &t3.out]),
                        dst: noff + t3.dst,
                        mv: dir(nside),
                    });
                }
            }
        }
    }
    // z-motions starting at the first position from the initial state
    let inits: Vec<usize> = std::iter::once(t.initial).chain(entries_of(t.initial).into_iter().map(|e| e.0)).collect();
    if inits.len() > 1 {
        let fresh = out.states.len();
        out.states.push("init".into());
        let copies: Vec<Transition> = trans
            .iter()
            .filter(|x| inits.contains(&x.src))
            .map(|x| Transition { src: fresh, ..x.clone() })
            .collect();
        trans.extend(copies);
        if out.finals.contains(&t.initial) {
            out.finals.insert(fresh);
        }
        out.initial = fresh;
    } else {
        out.initial = t.initial;
    }
    out.transitions = trans;
    out.normalize();
    trim_transducer(&out)
}

/// One squeeze round, or `None` when some z-motion component is not one-way definable.
pub fn squeeze_transducer(t: &Transducer, config: &DefinabilityConfig) -> Result<Option<Transducer>> {
    require_unshaped(t)?;
    let t = as_two_way(t);
    match check_components(&t, config)? {
        ComponentCheck::Ready(c) => Ok(Some(assemble_squeeze(&t, &c))),
        _ => Ok(None),
    }
}

/// Z-shaped kinds filter runs by shape, which a plain two-way reading drops.
fn require_unshaped(t: &Transducer) -> Result<()> {
    if t.kind.is_zshaped() {
        return Err(Error::domain(format!(
            "expected a one-way or two-way transducer, got {}; use decide_znft_definable",
            t.kind.token()
        )));
    }
    Ok(())
}

fn as_two_way(t: &Transducer) -> Transducer {
    let mut v = t.clone();
    v.kind = TransducerKind::TwoNft;
    v
}

/// The machine without its backward transitions, as a one-way transducer.
pub fn strip_backward(t: &Transducer) -> Transducer {
    let mut f = forward_part(t);
    f.kind = TransducerKind::Nft;
    trim_transducer(&f)
}

/// Whether a two-way transducer has a one-way equivalent, with the one-way
/// machine or the failing component as evidence.
pub fn decide_oneway_definable(t: &Transducer, config: &DefinabilityConfig) -> Result<DefinabilityVerdict> {
    require_unshaped(t)?;
    check_functional(t, config)?;
    let t0 = as_two_way(t);
    let k = config.k_for(&t0);
    let n = t0.states.len();
    let max_iter = config.max_squeeze_iterations.unwrap_or(n * n);
    let target = twoway_to_oneway(&domain_automaton(&t0))?;
    let done = |w: Transducer, iterations: usize| -> Result<DefinabilityVerdict> {
        match relations_equal_up_to(&w, t, config.oracle_word_bound, config.crossing_bound)? {
            RelationComparison::Equal => Ok(DefinabilityVerdict {
                outcome: Outcome::Definable,
                witness: Some(Witness::Machine(w)),
                iterations_used: iterations,
                config: config.clone(),
                k_used: k.0,
                k_is_complete: k.1,
            }),
            RelationComparison::Differ { input, .. } => Err(Error::domain(format!(
                "one-way witness disagrees on {:?}",
                input.iter().collect::<String>()
            ))),
        }
    };
    if nfa_empty(&target)? {
        let mut e = empty_nft(&t0);
        e.name = format!("{}_oneway", t.name);
        return done(e, 0);
    }
    let mut cur = t0.clone();
    for i in 0..=max_iter {
        let stripped = strip_backward(&cur);
        if nfa_equivalent(&domain_automaton(&stripped), &target)?.holds() {
            let mut w = stripped;
            w.name = format!("{}_oneway", t.name);
            return done(w, i);
        }
        if i == max_iter {
            break;
        }
        match check_components(&cur, config)? {
            ComponentCheck::Ready(c) => cur = assemble_squeeze(&cur, &c),
            ComponentCheck::Failed(v, z) => {
                let Some(Witness::Refutation(mut r)) = v.witness else {
                    unreachable!("failed components carry a refutation")
                };
                r.component = Some(z.base.name.clone());
                r.component_machine = Some(serialize_transducer(&z.base));
                r.kind = RefutationKind::Component;
                return Ok(DefinabilityVerdict {
                    outcome: Outcome::NotDefinable,
                    witness: Some(Witness::Refutation(r)),
                    iterations_used: i,
                    config: config.clone(),
                    k_used: v.k_used,
                    k_is_complete: v.k_is_complete,
                });
            }
            ComponentCheck::Exhausted(mut v) => {
                v.iterations_used = i;
                return Ok(v);
            }
        }
        if cur.states.len() > config.state_budget {
            break;
        }
    }
    Ok(DefinabilityVerdict::exhausted(
        config,
        k,
        max_iter,
        "squeeze rounds did not remove every backward move".into(),
    ))
}

// ---------------------------------------------------------------------------
// Subsequentiality

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subsequentiality {
    Subsequential,
    /// Two runs on `input` whose outputs drift apart without bound.
    Diverging { input: Word, out1: Word, out2: Word },
}

impl Subsequentiality {
    pub fn holds(&self) -> bool {
        matches!(self, Subsequentiality::Subsequential)
    }
}

fn strip_common_prefix(a: &[Symbol], b: &[Symbol]) -> (Word, Word) {
    let l = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    (a[l..].to_vec(), b[l..].to_vec())
}

/// Twinning check on the square of a trimmed functional one-way transducer.
pub fn is_subsequential(t: &Transducer) -> Result<Subsequentiality> {
    if !t.kind.is_one_way() {
        return Err(Error::domain("is_subsequential needs a one-way transducer"));
    }
    if !crate::machines::is_functional_oneway(t)?.is_functional() {
        return Err(Error::NotFunctional(t.name.clone()));
    }
    let t = crate::machines::trim_oneway(t);
    let n = t.states.len();
    let cap = 2 * t.max_output_len().max(1) * n * n + 1;
    let idx = t.index();
    type Key = (usize, usize, Word, Word);
    let start: Key = (t.initial, t.initial, vec![], vec![]);
    let mut parent: BTreeMap<Key, Option<(Key, Symbol, Word, Word)>> = BTreeMap::new();
    parent.insert(start.clone(), None);
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(key) = queue.pop_front() {
        let (p, q, d1, d2) = key.clone();
        for (s, &c) in t.alphabet.iter().enumerate() {
            for &i in &idx[p][s] {
                for &j in &idx[q][s] {
                    let (a, b) = (&t.transitions[i], &t.transitions[j]);
                    let (e1, e2) = strip_common_prefix(&cat(&[&d1, &a.out]), &cat(&[&d2, &b.out]));
                    let next: Key = (a.dst, b.dst, e1, e2);
                    if parent.contains_key(&next) {
                        continue;
                    }
                    parent.insert(next.clone(), Some((key.clone(), c, a.out.clone(), b.out.clone())));
                    if next.2.len() + next.3.len() > cap {
                        let (mut input, mut o1, mut o2) = (vec![], vec![], vec![]);
                        let mut cur = next;
                        while let Some(Some((prev, c, x, y))) = parent.get(&cur).cloned() {
                            input.push(c);
                            o1.splice(0..0, x);
                            o2.splice(0..0, y);
                            cur = prev;
                        }
                        input.reverse();
                        return Ok(Subsequentiality::Diverging { input, out1: o1, out2: o2 });
                    }
                    queue.push_back(next);
                }
            }
        }
    }
    Ok(Subsequentiality::Subsequential)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::implicit::{oneway_eval, zshaped_eval};
    use crate::machines::eval;
    use crate::runs::enumerate_accepting_runs;
    use crate::words::word;

    fn zruns(z: &Transducer, u: &str) -> Vec<ZRunOutputs> {
        enumerate_accepting_runs(z, &word(u), 3)
            .iter()
            .map(|r| ZRunOutputs::from_run(z, r).unwrap())
            .collect()
    }

    #[test]
    fn p1_on_forward_copy() {
        let z = fixtures::identity_forward();
        let o = &zruns(&z, "abba")[0];
        let d = check_p1(o, 1).unwrap();
        assert_eq!(d.ell, 1);
        assert!(d.t3.is_empty());
        let ell_n = (1..=o.n).find(|&l| o.out2(1, l).len() <= 2 && o.out1(1, l) == word("abb"));
        assert_eq!(ell_n, Some(4));
    }

    #[test]
    fn p1_fails_on_long_mirror() {
        let z = fixtures::mirror();
        let o = &zruns(&z, "#abaabbbabbaabaaabbab#")[0];
        assert!(check_p1(o, 2).is_none());
        let short = &zruns(&z, "#abab#")[0];
        assert!(check_p1(short, 2).is_some());
    }

    #[test]
    fn prefix_power() {
        assert_eq!(prefix_power_split(&word("xababab"), 2), Some((word("x"), word("ab"), 3)));
        assert_eq!(prefix_power_split(&word(""), 0), Some((vec![], vec![], 0)));
        assert_eq!(prefix_power_split(&word("abc"), 1), None);
    }

    #[test]
    fn eznft_of_forward_copy_matches() {
        let z = fixtures::identity_forward();
        let cfg = DefinabilityConfig::with_k(1);
        let e = build_eznft(&z, &cfg).unwrap();
        for u in words_up_to(&z.alphabet, 5) {
            assert_eq!(zshaped_eval(&e, &u), eval(&z, &u).unwrap(), "{u:?}");
        }
    }

    #[test]
    fn nft_of_forward_copy_matches() {
        let z = fixtures::identity_forward();
        let cfg = DefinabilityConfig::with_k(1);
        let e = build_eznft(&z, &cfg).unwrap();
        let n = build_nft_from_eznft(&e, &cfg).unwrap();
        for u in words_up_to(&z.alphabet, 5) {
            assert_eq!(oneway_eval(&n, &u), eval(&z, &u).unwrap(), "{u:?}");
        }
    }

    #[test]
    fn mirror_is_refuted_at_the_first_step() {
        let z = fixtures::mirror();
        let v = decide_znft_definable(&z, &DefinabilityConfig::with_k(2)).unwrap();
        assert_eq!(v.outcome, Outcome::NotDefinable);
        let r = v.refutation().unwrap();
        assert_eq!(r.kind, RefutationKind::BackwardSplit);
        let w = r.word.clone().unwrap();
        for run in enumerate_accepting_runs(&z, &w, 3) {
            assert!(check_p1(&ZRunOutputs::from_run(&z, &run).unwrap(), 2).is_none());
        }
    }

    #[test]
    fn forward_copy_is_definable() {
        let z = fixtures::identity_forward();
        let v = decide_znft_definable(&z, &DefinabilityConfig::with_k(1)).unwrap();
        assert_eq!(v.outcome, Outcome::Definable);
        assert!(v.witness_machine().unwrap().kind.is_one_way());
    }

    #[test]
    fn subsequential_examples() {
        assert!(is_subsequential(&fixtures::t0()).unwrap().holds());
        assert!(!is_subsequential(&fixtures::t1()).unwrap().holds());
    }
}

