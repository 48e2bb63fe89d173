//! Z-motion transductions induced by a two-way transducer, the mirror
//! construction, and shape-respecting domains of z-shaped transducers.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::automata::{
    factor_language_ordered, nfa_reverse, trim, Automaton, AutomatonKind, FactorOrder, NfaBuilder,
};
use crate::error::{Error, Result};
use crate::machines::{domain_automaton, eval_twoway, Move, Transducer, TransducerKind, Transition};
use crate::runs::Side;
use crate::words::{mirror_word, Symbol, Word};

/// A transducer read right to left: it starts on the last letter and accepts
/// when it leaves the word on the left.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MirroredTransducer {
    /// The machine with every move reversed.
    pub swapped: Transducer,
}

impl MirroredTransducer {
    /// Undoes the mirror.
    pub fn mirror(&self) -> Transducer {
        swap_moves(&self.swapped)
    }

    /// Outputs on `u`, evaluated as the unmirrored machine on the reversed word.
    pub fn eval(&self, u: &[Symbol], crossing_bound: usize) -> Result<BTreeSet<Word>> {
        eval_twoway(&two_way_view(&self.mirror()), &mirror_word(u), crossing_bound)
    }
}

fn two_way_view(t: &Transducer) -> Transducer {
    let mut v = t.clone();
    if v.kind.is_one_way() {
        v.kind = TransducerKind::TwoNft;
    }
    v
}

fn swap_moves(t: &Transducer) -> Transducer {
    let mut m = t.clone();
    for tr in &mut m.transitions {
        tr.mv = tr.mv.flip();
    }
    if m.kind.is_one_way() {
        m.kind = TransducerKind::TwoNft;
    }
    m.normalize();
    m
}

pub fn mirror_transducer(t: &Transducer) -> MirroredTransducer {
    let mut swapped = swap_moves(t);
    swapped.name = format!("{}_mirror", t.name);
    MirroredTransducer { swapped }
}

/// A z-shaped transducer realizing the z-motions of a source machine between two states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InducedZnft {
    pub base: Transducer,
    pub source: String,
    pub q1: usize,
    pub q2: usize,
    pub side: Side,
}

/// Pass tag of a state of an induced znft.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Pass {
    First(usize),
    Second(usize),
    Third(usize, usize),
    Accept,
}

/// The z-motions from `q1` to `q2` of `t`, entering from the left (`Side::Left`)
/// or from the right (`Side::Right`, read on the reversed factor), restricted
/// to factors of accepted words.
pub fn induced_znft(t: &Transducer, q1: usize, q2: usize, side: Side) -> Result<InducedZnft> {
    if q1 >= t.states.len() || q2 >= t.states.len() {
        return Err(Error::domain("induced_znft: unknown state"));
    }
    let dom = domain_automaton(t).as_two_way();
    let (moves_of, factors) = match side {
        Side::Left => (
            t.transitions.clone(),
            factor_language_ordered(&dom, q1, q2, FactorOrder::Forward)?,
        ),
        Side::Right => (
            swap_moves(t).transitions,
            nfa_reverse(&factor_language_ordered(&dom, q1, q2, FactorOrder::Backward)?)?,
        ),
    };
    let factors = trim(&factors);
    let base = build_induced(t, &moves_of, &factors, q1, q2, side);
    Ok(InducedZnft {
        base,
        source: t.name.clone(),
        q1,
        q2,
        side,
    })
}

fn build_induced(
    t: &Transducer,
    moves: &[Transition],
    factors: &Automaton,
    q1: usize,
    q2: usize,
    side: Side,
) -> Transducer {
    let fidx = factors.index();
    let fsteps = |s: usize, c: Symbol| -> Vec<usize> {
        match factors.sym_index(c) {
            Some(k) => fidx[s][k].iter().map(|&(d, _)| d).collect(),
            None => vec![],
        }
    };
    let f_accepts_after = |s: usize, c: Symbol| fsteps(s, c).iter().any(|&d| factors.is_final(d));
    let tag = match side {
        Side::Left => "L",
        Side::Right => "R",
    };
    let mut out = Transducer::new(
        format!("{}_{}_{}_{}", t.name, tag, t.states[q1], t.states[q2]),
        TransducerKind::Znft,
        &t.alphabet,
    );
    let mut seen: Interner<Pass> = Interner::default();
    let name_of = |p: &Pass| -> String {
        match p {
            Pass::First(q) => format!("{}.1", t.states[*q]),
            Pass::Second(q) => format!("{}.2", t.states[*q]),
            Pass::Third(q, s) => format!("{}.3.{}", t.states[*q], s),
            Pass::Accept => "acc".to_string(),
        }
    };
    let intern = |p: Pass, seen: &mut Interner<Pass>, out: &mut Transducer| -> usize {
        seen.intern(p, || out.states.push(name_of(&p)))
    };
    out.initial = intern(Pass::First(q1), &mut seen, &mut out);
    let mut trans = vec![];
    while let Some((p, src)) = seen.next() {
        match p {
            Pass::First(q) => {
                for tr in moves.iter().filter(|tr| tr.src == q) {
                    let dst = match tr.mv {
                        Move::Right => Pass::First(tr.dst),
                        Move::Left => Pass::Second(tr.dst),
                    };
                    let d = intern(dst, &mut seen, &mut out);
                    trans.push(Transition { src, sym: tr.sym, out: tr.out.clone(), dst: d, mv: tr.mv });
                }
                if q == q2 {
                    // a one-letter factor: the z-motion is a single configuration
                    for &c in &t.alphabet {
                        if f_accepts_after(factors.initial, c) {
                            let d = intern(Pass::Accept, &mut seen, &mut out);
                            trans.push(Transition { src, sym: c, out: vec![], dst: d, mv: Move::Right });
                        }
                    }
                }
            }
            Pass::Second(q) => {
                for tr in moves.iter().filter(|tr| tr.src == q) {
                    match tr.mv {
                        Move::Left => {
                            let d = intern(Pass::Second(tr.dst), &mut seen, &mut out);
                            trans.push(Transition { src, sym: tr.sym, out: tr.out.clone(), dst: d, mv: Move::Left });
                        }
                        Move::Right => {
                            for s in fsteps(factors.initial, tr.sym) {
                                let d = intern(Pass::Third(tr.dst, s), &mut seen, &mut out);
                                trans.push(Transition { src, sym: tr.sym, out: tr.out.clone(), dst: d, mv: Move::Right });
                            }
                        }
                    }
                }
            }
            Pass::Third(q, s) => {
                for tr in moves.iter().filter(|tr| tr.src == q && tr.mv == Move::Right) {
                    for s2 in fsteps(s, tr.sym) {
                        let d = intern(Pass::Third(tr.dst, s2), &mut seen, &mut out);
                        trans.push(Transition { src, sym: tr.sym, out: tr.out.clone(), dst: d, mv: Move::Right });
                    }
                }
                if q == q2 {
                    for &c in &t.alphabet {
                        if f_accepts_after(s, c) {
                            let d = intern(Pass::Accept, &mut seen, &mut out);
                            trans.push(Transition { src, sym: c, out: vec![], dst: d, mv: Move::Right });
                        }
                    }
                }
            }
            Pass::Accept => {
                out.finals.insert(src);
            }
        }
    }
    out.transitions = trans;
    out.normalize();
    out
}

/// One-way automaton for the inputs having a z-shaped accepting run.
///
/// It guesses the backward state at each position and follows the three
/// passes in parallel; at most `budget` states are built.
pub fn shape_domain(z: &Transducer, budget: usize) -> Result<Automaton> {
    shape_domain_with(
        &z.alphabet,
        z.initial,
        &|q| z.is_final(q),
        &ShapeIndex::new(z),
        budget,
        &z.name,
    )
}

/// Moves of a z-shaped machine split by direction.
pub(crate) struct ShapeIndex {
    /// `fwd[q][s]` = targets of right moves from `q` on symbol index `s`.
    pub fwd: Vec<Vec<Vec<usize>>>,
    /// `bwd_into[q'][s]` = sources `q` of left moves `q -> q'` on `s`.
    pub bwd_into: Vec<Vec<Vec<usize>>>,
    /// `bwd[q][s]` = targets of left moves from `q` on `s`.
    pub bwd: Vec<Vec<Vec<usize>>>,
}

impl ShapeIndex {
    pub fn new(z: &Transducer) -> Self {
        let n = z.states.len();
        let k = z.alphabet.len();
        let mut fwd = vec![vec![vec![]; k]; n];
        let mut bwd = vec![vec![vec![]; k]; n];
        let mut bwd_into = vec![vec![vec![]; k]; n];
        for tr in &z.transitions {
            let s = z.sym_index(tr.sym).unwrap();
            match tr.mv {
                Move::Right => fwd[tr.src][s].push(tr.dst),
                Move::Left => {
                    bwd[tr.src][s].push(tr.dst);
                    bwd_into[tr.dst][s].push(tr.src);
                }
            }
        }
        for v in [&mut fwd, &mut bwd, &mut bwd_into] {
            for row in v.iter_mut() {
                for l in row.iter_mut() {
                    l.sort_unstable();
                    l.dedup();
                }
            }
        }
        ShapeIndex { fwd, bwd_into, bwd }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum ShapeState {
    Start,
    /// Forward state here, backward state one to the left, third-pass state here.
    Mid(usize, usize, usize),
    Done,
}

pub(crate) fn shape_domain_with(
    alphabet: &[Symbol],
    initial: usize,
    is_final: &dyn Fn(usize) -> bool,
    ix: &ShapeIndex,
    budget: usize,
    name: &str,
) -> Result<Automaton> {
    let mut b = NfaBuilder::new(alphabet);
    let mut seen: Interner<ShapeState> = Interner::default();
    let intern = |s: ShapeState, seen: &mut Interner<ShapeState>, b: &mut NfaBuilder| -> usize {
        seen.intern(s, || {
            b.add_state(match s {
                ShapeState::Start => "start".to_string(),
                ShapeState::Mid(p, q, r) => format!("{p}.{q}.{r}"),
                ShapeState::Done => "done".to_string(),
            });
        })
    };
    let start = intern(ShapeState::Start, &mut seen, &mut b);
    b.initials.push(start);
    if is_final(initial) {
        b.finals.insert(start);
    }
    let nq = ix.fwd.len();
    while let Some((st, src)) = seen.next() {
        if seen.len() > budget {
            return Err(Error::BoundExceeded(format!(
                "shape domain exceeded {budget} states"
            )));
        }
        for (s, &c) in alphabet.iter().enumerate() {
            let mut targets = BTreeSet::new();
            match st {
                ShapeState::Start => {
                    // n = 1
                    if ix.fwd[initial][s].iter().any(|&f| is_final(f)) {
                        targets.insert(ShapeState::Done);
                    }
                    // n >= 2: p2 from q0, guess q1 and r2
                    for &p2 in &ix.fwd[initial][s] {
                        for q1 in 0..nq {
                            for &r2 in &ix.fwd[q1][s] {
                                targets.insert(ShapeState::Mid(p2, q1, r2));
                            }
                        }
                    }
                }
                ShapeState::Mid(p, qprev, r) => {
                    // last letter: turn from p back to qprev, finish the third pass
                    if ix.bwd[p][s].contains(&qprev) && ix.fwd[r][s].iter().any(|&f| is_final(f)) {
                        targets.insert(ShapeState::Done);
                    }
                    for &p2 in &ix.fwd[p][s] {
                        for &q in &ix.bwd_into[qprev][s] {
                            for &r2 in &ix.fwd[r][s] {
                                targets.insert(ShapeState::Mid(p2, q, r2));
                            }
                        }
                    }
                }
                ShapeState::Done => {}
            }
            for tgt in targets {
                let d = intern(tgt, &mut seen, &mut b);
                if tgt == ShapeState::Done {
                    b.finals.insert(d);
                }
                b.edge(src, c, d);
            }
        }
    }
    Ok(trim(&b.finish(format!("{name}_shape_dom"), AutomatonKind::OneWay)))
}

/// Numbers keys in discovery order and hands them out for exploration.
#[derive(Debug)]
pub(crate) struct Interner<K> {
    ids: HashMap<K, usize>,
    queue: VecDeque<(K, usize)>,
}

impl<K> Default for Interner<K> {
    fn default() -> Self {
        Interner {
            ids: HashMap::new(),
            queue: VecDeque::new(),
        }
    }
}

impl<K: std::hash::Hash + Eq + Clone> Interner<K> {
    /// Id of `k`; `on_new` runs once when `k` is first seen.
    pub fn intern(&mut self, k: K, on_new: impl FnOnce()) -> usize {
        if let Some(&i) = self.ids.get(&k) {
            return i;
        }
        on_new();
        let i = self.ids.len();
        self.ids.insert(k.clone(), i);
        self.queue.push_back((k, i));
        i
    }

    pub fn next(&mut self) -> Option<(K, usize)> {
        self.queue.pop_front()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZmotionPair {
    pub input: Word,
    pub output: Word,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::nfa_accepts;
    use crate::fixtures;
    use crate::machines::{eval, eval_oneway};
    use crate::words::{word, words_up_to};

    #[test]
    fn mirror_of_t0() {
        let t0 = fixtures::t0();
        let m = mirror_transducer(&t0);
        for u in words_up_to(&t0.alphabet, 4) {
            assert_eq!(m.eval(&u, 2).unwrap(), eval_oneway(&t0, &mirror_word(&u)).unwrap());
        }
    }

    #[test]
    fn mirror_is_an_involution() {
        for (_, t) in fixtures::corpus() {
            let twice = mirror_transducer(&mirror_transducer(&t).swapped).swapped;
            assert_eq!(twice.transitions, two_way_view(&t).transitions);
        }
    }

    #[test]
    fn shape_domain_of_mirror() {
        let z = fixtures::mirror();
        let d = shape_domain(&z, 10_000).unwrap();
        for u in words_up_to(&z.alphabet, 5) {
            assert_eq!(nfa_accepts(&d, &u), !eval(&z, &u).unwrap().is_empty(), "{u:?}");
        }
    }

    #[test]
    fn induced_on_t2_spans_the_marked_word() {
        let t2 = fixtures::t2();
        let (q0, q3) = (t2.state_id("q0").unwrap(), t2.state_id("q3").unwrap());
        let z = induced_znft(&t2, q0, q3, Side::Left).unwrap();
        assert_eq!(eval(&z.base, &word("#ab#")).unwrap(), BTreeSet::from([word("#ba")]));
        assert!(eval(&z.base, &word("#ab")).unwrap().is_empty());
    }
}
