//! Machines given by a successor function, explored on demand.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Debug;
use std::hash::Hash;

use crate::automata::{Automaton, Equivalence};
use crate::error::{Error, Result};
use crate::machines::{Move, Transducer, TransducerKind, Transition};
use crate::runs::zshape;
use crate::words::{Symbol, Word};
use crate::zmotion::Interner;

/// A transducer whose states are generated lazily.
pub trait Implicit {
    type State: Clone + Eq + Hash + Ord + Debug;

    fn alphabet(&self) -> &[Symbol];
    fn initial(&self) -> Vec<Self::State>;
    fn is_final(&self, s: &Self::State) -> bool;
    fn successors(&self, s: &Self::State, c: Symbol) -> Vec<(Word, Self::State, Move)>;

    /// Printable state name used when materializing.
    fn label(&self, s: &Self::State) -> String {
        format!("{s:?}")
    }
}

impl Implicit for Transducer {
    type State = usize;

    fn alphabet(&self) -> &[Symbol] {
        &self.alphabet
    }

    fn initial(&self) -> Vec<usize> {
        vec![self.initial]
    }

    fn is_final(&self, s: &usize) -> bool {
        Transducer::is_final(self, *s)
    }

    fn successors(&self, s: &usize, c: Symbol) -> Vec<(Word, usize, Move)> {
        self.transitions
            .iter()
            .filter(|tr| tr.src == *s && tr.sym == c)
            .map(|tr| (tr.out.clone(), tr.dst, tr.mv))
            .collect()
    }

    fn label(&self, s: &usize) -> String {
        self.states[*s].clone()
    }
}

impl Implicit for Automaton {
    type State = usize;

    fn alphabet(&self) -> &[Symbol] {
        &self.alphabet
    }

    fn initial(&self) -> Vec<usize> {
        vec![self.initial]
    }

    fn is_final(&self, s: &usize) -> bool {
        Automaton::is_final(self, *s)
    }

    fn successors(&self, s: &usize, c: Symbol) -> Vec<(Word, usize, Move)> {
        self.edges
            .iter()
            .filter(|e| e.src == *s && e.sym == c)
            .map(|e| (vec![], e.dst, e.mv))
            .collect()
    }
}

/// Builds the reachable part as an explicit transducer of the given kind.
///
/// Several initial states get a fresh initial state copying their moves.
pub fn materialize<M: Implicit>(
    m: &M,
    kind: TransducerKind,
    name: &str,
    budget: usize,
) -> Result<Transducer> {
    let mut out = Transducer::new(name, kind, m.alphabet());
    let mut seen: Interner<M::State> = Interner::default();
    let inits: Vec<usize> = m
        .initial()
        .into_iter()
        .map(|s| {
            let label = m.label(&s);
            seen.intern(s, || out.states.push(label))
        })
        .collect();
    let mut trans = vec![];
    while let Some((s, src)) = seen.next() {
        if seen.len() > budget {
            return Err(Error::BoundExceeded(format!(
                "{name}: more than {budget} states"
            )));
        }
        if m.is_final(&s) {
            out.finals.insert(src);
        }
        for &c in m.alphabet() {
            for (w, d, mv) in m.successors(&s, c) {
                let label = m.label(&d);
                let dst = seen.intern(d, || out.states.push(label));
                trans.push(Transition { src, sym: c, out: w, dst, mv });
            }
        }
    }
    out.initial = match inits.as_slice() {
        [one] => *one,
        _ => {
            let fresh = out.states.len();
            out.states.push("init".to_string());
            let copies: Vec<Transition> = trans
                .iter()
                .filter(|t| inits.contains(&t.src))
                .map(|t| Transition { src: fresh, ..t.clone() })
                .collect();
            trans.extend(copies);
            if inits.iter().any(|i| out.finals.contains(i)) {
                out.finals.insert(fresh);
            }
            fresh
        }
    };
    out.transitions = trans;
    out.normalize();
    Ok(trim_transducer(&out))
}

/// Keeps states that are reachable and can reach a final state, ignoring moves.
pub fn trim_transducer(t: &Transducer) -> Transducer {
    let n = t.states.len();
    let mut succs: Vec<Vec<usize>> = vec![vec![]; n];
    let mut preds: Vec<Vec<usize>> = vec![vec![]; n];
    for tr in &t.transitions {
        succs[tr.src].push(tr.dst);
        preds[tr.dst].push(tr.src);
    }
    let mut fwd = vec![false; n];
    let mut stack = vec![t.initial];
    fwd[t.initial] = true;
    while let Some(q) = stack.pop() {
        for &d in &succs[q] {
            if !fwd[d] {
                fwd[d] = true;
                stack.push(d);
            }
        }
    }
    let mut bwd = vec![false; n];
    let mut stack: Vec<usize> = t.finals.iter().copied().collect();
    for &f in &stack {
        bwd[f] = true;
    }
    while let Some(q) = stack.pop() {
        for &p in &preds[q] {
            if !bwd[p] {
                bwd[p] = true;
                stack.push(p);
            }
        }
    }
    let keep: Vec<bool> = (0..n).map(|q| q == t.initial || (fwd[q] && bwd[q])).collect();
    let mut map = vec![usize::MAX; n];
    let mut out = Transducer::new(t.name.clone(), t.kind, &t.alphabet);
    for q in 0..n {
        if keep[q] {
            map[q] = out.states.len();
            out.states.push(t.states[q].clone());
        }
    }
    out.initial = map[t.initial];
    out.finals = t.finals.iter().filter(|&&f| keep[f]).map(|&f| map[f]).collect();
    out.transitions = t
        .transitions
        .iter()
        .filter(|tr| keep[tr.src] && keep[tr.dst] && fwd[tr.src] && bwd[tr.dst])
        .map(|tr| Transition { src: map[tr.src], dst: map[tr.dst], ..tr.clone() })
        .collect();
    out.normalize();
    out
}

/// Outputs of z-shaped accepting runs on `u`.
pub fn zshaped_eval<M: Implicit>(m: &M, u: &[Symbol]) -> BTreeSet<Word> {
    let shape = zshape(u.len());
    let steps: Vec<(Symbol, Move)> = shape
        .windows(2)
        .map(|p| (u[p[0] - 1], if p[1] > p[0] { Move::Right } else { Move::Left }))
        .collect();
    eval_along(m, &steps)
}

/// Outputs of forward-only accepting runs on `u`.
pub fn oneway_eval<M: Implicit>(m: &M, u: &[Symbol]) -> BTreeSet<Word> {
    let steps: Vec<(Symbol, Move)> = u.iter().map(|&c| (c, Move::Right)).collect();
    eval_along(m, &steps)
}

/// Outputs of the runs following `steps` that end in a final state.
///
/// States are layered first and pruned to those that can still finish, so
/// outputs are only built along runs that succeed.
fn eval_along<M: Implicit>(m: &M, steps: &[(Symbol, Move)]) -> BTreeSet<Word> {
    let mut layers: Vec<Vec<M::State>> = vec![];
    let mut first: Vec<M::State> = m.initial();
    first.sort();
    first.dedup();
    layers.push(first);
    // edges[k] = (src, out, dst) between layers k and k + 1
    let mut edges: Vec<Vec<(usize, Word, usize)>> = vec![];
    for &(c, mv) in steps {
        let cur = layers.last().expect("at least one layer");
        let mut ids: HashMap<M::State, usize> = HashMap::new();
        let mut next: Vec<M::State> = vec![];
        let mut es = vec![];
        for (i, s) in cur.iter().enumerate() {
            for (o, d, m2) in m.successors(s, c) {
                if m2 == mv {
                    let j = *ids.entry(d.clone()).or_insert_with(|| {
                        next.push(d);
                        next.len() - 1
                    });
                    es.push((i, o, j));
                }
            }
        }
        edges.push(es);
        layers.push(next);
    }
    let last = layers.last().expect("at least one layer");
    let last_len = layers.len() - 1;
    let mut live: Vec<Vec<bool>> = layers.iter().map(|l| vec![false; l.len()]).collect();
    for (i, s) in last.iter().enumerate() {
        live[last_len][i] = m.is_final(s);
    }
    for k in (0..edges.len()).rev() {
        for (i, _, j) in &edges[k] {
            if live[k + 1][*j] {
                live[k][*i] = true;
            }
        }
    }
    let mut cur: Vec<BTreeSet<Word>> = live[0].iter().map(|&l| if l { BTreeSet::from([vec![]]) } else { BTreeSet::new() }).collect();
    for (k, es) in edges.iter().enumerate() {
        let mut next: Vec<BTreeSet<Word>> = vec![BTreeSet::new(); live[k + 1].len()];
        for (i, o, j) in es {
            if !live[k + 1][*j] {
                continue;
            }
            for w in &cur[*i] {
                let mut w2 = w.clone();
                w2.extend(o);
                next[*j].insert(w2);
            }
        }
        cur = next;
    }
    cur.into_iter()
        .zip(&live[last_len])
        .filter(|(_, &l)| l)
        .flat_map(|(ws, _)| ws)
        .collect()
}

/// Language equivalence of two one-way machines seen as automata, with a
/// shortest counterexample; at most `budget` subset pairs are explored.
pub fn lazy_equivalent<A: Implicit, B: Implicit>(a: &A, b: &B, budget: usize) -> Result<Equivalence> {
    if a.alphabet() != b.alphabet() {
        return Err(Error::AlphabetMismatch(format!(
            "{:?} vs {:?}",
            a.alphabet(),
            b.alphabet()
        )));
    }
    let mut sa = Stepper::new(a);
    let mut sb = Stepper::new(b);
    let start = (sa.start(), sb.start());
    let mut parent: HashMap<(usize, usize), Option<((usize, usize), Symbol)>> = HashMap::new();
    parent.insert(start, None);
    let mut queue = VecDeque::from([start]);
    while let Some(pair) = queue.pop_front() {
        if sa.accepting(pair.0) != sb.accepting(pair.1) {
            let mut w = vec![];
            let mut cur = pair;
            while let Some(Some((prev, c))) = parent.get(&cur) {
                w.push(*c);
                cur = *prev;
            }
            w.reverse();
            return Ok(Equivalence::Counterexample(w));
        }
        if parent.len() > budget || sa.weight + sb.weight > budget.saturating_mul(SUBSET_WEIGHT) {
            return Err(Error::BoundExceeded(format!(
                "equivalence check explored more than {budget} subset pairs"
            )));
        }
        for &c in a.alphabet() {
            let next = (sa.step(pair.0, c), sb.step(pair.1, c));
            if let std::collections::hash_map::Entry::Vacant(e) = parent.entry(next) {
                e.insert(Some((pair, c)));
                queue.push_back(next);
            }
        }
    }
    Ok(Equivalence::Equivalent)
}

/// Average subset size allowed per explored pair before giving up.
const SUBSET_WEIGHT: usize = 16;

/// Subset construction with memoized successors.
struct Stepper<'a, M: Implicit> {
    m: &'a M,
    /// Total size of the stored subsets.
    weight: usize,
    sets: Vec<BTreeSet<M::State>>,
    ids: BTreeMap<BTreeSet<M::State>, usize>,
    memo: HashMap<(usize, Symbol), usize>,
    state_succ: HashMap<(M::State, Symbol), Vec<M::State>>,
}

impl<'a, M: Implicit> Stepper<'a, M> {
    fn new(m: &'a M) -> Self {
        Stepper {
            m,
            weight: 0,
            sets: vec![],
            ids: BTreeMap::new(),
            memo: HashMap::new(),
            state_succ: HashMap::new(),
        }
    }

    fn id(&mut self, s: BTreeSet<M::State>) -> usize {
        if let Some(&i) = self.ids.get(&s) {
            return i;
        }
        self.weight += s.len();
        self.sets.push(s.clone());
        self.ids.insert(s, self.sets.len() - 1);
        self.sets.len() - 1
    }

    fn start(&mut self) -> usize {
        let s = self.m.initial().into_iter().collect();
        self.id(s)
    }

    fn accepting(&self, i: usize) -> bool {
        self.sets[i].iter().any(|s| self.m.is_final(s))
    }

    fn step(&mut self, i: usize, c: Symbol) -> usize {
        if let Some(&j) = self.memo.get(&(i, c)) {
            return j;
        }
        let mut next = BTreeSet::new();
        for s in self.sets[i].clone() {
            let succ = self
                .state_succ
                .entry((s.clone(), c))
                .or_insert_with(|| {
                    self.m
                        .successors(&s, c)
                        .into_iter()
                        .filter(|(_, _, mv)| *mv == Move::Right)
                        .map(|(_, d, _)| d)
                        .collect()
                });
            next.extend(succ.iter().cloned());
        }
        let j = self.id(next);
        self.memo.insert((i, c), j);
        j
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::machines::eval;
    use crate::words::words_up_to;

    #[test]
    fn explicit_machines_agree_with_eval() {
        let z = fixtures::mirror();
        for u in words_up_to(&z.alphabet, 5) {
            assert_eq!(zshaped_eval(&z, &u), eval(&z, &u).unwrap());
        }
        let t1 = fixtures::t1();
        for u in words_up_to(&t1.alphabet, 5) {
            assert_eq!(oneway_eval(&t1, &u), eval(&t1, &u).unwrap());
        }
    }

    #[test]
    fn materialize_round_trip() {
        let t1 = fixtures::t1();
        let m = materialize(&t1, TransducerKind::Nft, "t1", 100).unwrap();
        for u in words_up_to(&t1.alphabet, 5) {
            assert_eq!(oneway_eval(&m, &u), eval(&t1, &u).unwrap());
        }
    }

    #[test]
    fn lazy_equivalence_finds_shortest_difference() {
        use crate::machines::domain_automaton;
        let d0 = domain_automaton(&fixtures::t0());
        let d1 = domain_automaton(&fixtures::t1());
        assert_eq!(lazy_equivalent(&d0, &d0, 1000).unwrap(), Equivalence::Equivalent);
        assert_eq!(
            lazy_equivalent(&d0, &d1, 1000).unwrap(),
            Equivalence::Counterexample(vec!['b'])
        );
    }
}
