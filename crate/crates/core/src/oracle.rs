//! Brute-force ground truth: bounded relations, bounded equivalence and
//! refutation searches by pumping.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::automata::Automaton;
use crate::error::{Error, Result};
use crate::machines::{eval_twoway, Relation, Transducer};
use crate::par::{map_items, Strategy};
use crate::runs::{enumerate_accepting_runs, find_loops, pump_input, Loop, Run, Side, ZRunOutputs};
use crate::words::{are_conjugate, fit_arithmetic_family, primitive_root, words_up_to, Symbol, Word};
use crate::zmotion::shape_domain;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundedRelation {
    pub pairs: BTreeSet<(Word, Word)>,
    pub word_bound: usize,
    pub crossing_bound: usize,
}

impl BoundedRelation {
    pub fn relation(&self) -> Relation {
        Relation {
            pairs: self.pairs.clone(),
        }
    }

    /// Inputs with at least two outputs.
    pub fn ambiguous_inputs(&self) -> Vec<Word> {
        let mut count: BTreeMap<&Word, usize> = BTreeMap::new();
        for (u, _) in &self.pairs {
            *count.entry(u).or_default() += 1;
        }
        count.into_iter().filter(|(_, c)| *c > 1).map(|(u, _)| u.clone()).collect()
    }
}

fn outputs(t: &Transducer, u: &[Symbol], crossing_bound: usize) -> BTreeSet<Word> {
    eval_twoway(t, u, crossing_bound.max(1)).unwrap_or_default()
}

pub fn enumerate_relation(t: &Transducer, word_bound: usize, crossing_bound: usize) -> BoundedRelation {
    enumerate_relation_with(t, word_bound, crossing_bound, Strategy::Parallel)
}

pub fn enumerate_relation_with(
    t: &Transducer,
    word_bound: usize,
    crossing_bound: usize,
    strategy: Strategy,
) -> BoundedRelation {
    let words = words_up_to(&t.alphabet, word_bound);
    let outs = map_items(&words, strategy, |u| outputs(t, u, crossing_bound));
    let pairs = words
        .into_iter()
        .zip(outs)
        .flat_map(|(u, vs)| vs.into_iter().map(move |v| (u.clone(), v)))
        .collect();
    BoundedRelation {
        pairs,
        word_bound,
        crossing_bound,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelationComparison {
    Equal,
    Differ {
        input: Word,
        left: BTreeSet<Word>,
        right: BTreeSet<Word>,
    },
}

impl RelationComparison {
    pub fn is_equal(&self) -> bool {
        matches!(self, RelationComparison::Equal)
    }
}

/// Compares the relations on all words up to `word_bound`; the counterexample
/// is the first disagreeing input in length-lexicographic order.
pub fn relations_equal_up_to(
    t1: &Transducer,
    t2: &Transducer,
    word_bound: usize,
    crossing_bound: usize,
) -> Result<RelationComparison> {
    if t1.alphabet != t2.alphabet {
        return Err(Error::AlphabetMismatch(format!(
            "{:?} vs {:?}",
            t1.alphabet, t2.alphabet
        )));
    }
    let words = words_up_to(&t1.alphabet, word_bound);
    let diffs = map_items(&words, Strategy::Parallel, |u| {
        let (a, b) = (outputs(t1, u, crossing_bound), outputs(t2, u, crossing_bound));
        (a != b).then_some((a, b))
    });
    Ok(words
        .into_iter()
        .zip(diffs)
        .find_map(|(u, d)| d.map(|(left, right)| RelationComparison::Differ { input: u, left, right }))
        .unwrap_or(RelationComparison::Equal))
}

/// Words of `dom` up to `max_len` in length-lexicographic order, at most `limit` of them.
pub fn domain_words(dom: &Automaton, max_len: usize, limit: usize) -> Vec<Word> {
    let idx = dom.index();
    let mut out = vec![];
    let mut layer: Vec<(Word, BTreeSet<usize>)> = vec![(vec![], BTreeSet::from([dom.initial]))];
    for len in 0..=max_len {
        for (w, set) in &layer {
            if set.iter().any(|&q| dom.is_final(q)) {
                out.push(w.clone());
                if out.len() >= limit {
                    return out;
                }
            }
        }
        if len == max_len {
            break;
        }
        let mut next = vec![];
        for (w, set) in &layer {
            for (k, &c) in dom.alphabet.iter().enumerate() {
                let s2: BTreeSet<usize> = set.iter().flat_map(|&q| idx[q][k].iter().map(|&(d, _)| d)).collect();
                if !s2.is_empty() {
                    let mut w2 = w.clone();
                    w2.push(c);
                    next.push((w2, s2));
                }
            }
        }
        layer = next;
    }
    out
}

/// Cap on the words inspected by the refutation searches.
pub const SEARCH_WORD_LIMIT: usize = 200_000;

/// Accepting z-shaped runs of `z` on each domain word, shortest words first,
/// until `visit` returns a value.
fn search_zruns<R>(
    z: &Transducer,
    max_word_len: usize,
    mut visit: impl FnMut(&Word, &[(Run, ZRunOutputs)]) -> Option<R>,
) -> Result<Option<R>> {
    if !z.kind.is_zshaped() {
        return Err(Error::domain("expected a z-shaped transducer"));
    }
    let dom = shape_domain(z, crate::automata::DEFAULT_STATE_BUDGET)?;
    for u in domain_words(&dom, max_word_len, SEARCH_WORD_LIMIT) {
        let runs: Vec<(Run, ZRunOutputs)> = enumerate_accepting_runs(z, &u, 3)
            .into_iter()
            .map(|r| {
                let o = ZRunOutputs::from_run(z, &r)?;
                Ok((r, o))
            })
            .collect::<Result<_>>()?;
        if let Some(found) = visit(&u, &runs) {
            return Ok(Some(found));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct P1Violation {
    pub word: Word,
    pub output: Word,
    pub run: Run,
}

/// A word with an output none of whose runs splits as required at bound `k`.
pub fn p1_violation_search(z: &Transducer, max_word_len: usize, k: usize) -> Result<Option<P1Violation>> {
    search_zruns(z, max_word_len, |u, runs| {
        let mut by_output: BTreeMap<Word, Vec<&(Run, ZRunOutputs)>> = BTreeMap::new();
        for r in runs {
            by_output.entry(r.1.total()).or_default().push(r);
        }
        by_output.into_iter().find_map(|(v, rs)| {
            rs.iter()
                .all(|(_, o)| crate::definability::check_p1(o, k).is_none())
                .then(|| P1Violation {
                    word: u.clone(),
                    output: v,
                    run: rs[0].0.clone(),
                })
        })
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConjugateLoopWitness {
    pub word: Word,
    pub lp: Loop,
    pub v1: Word,
    pub v2: Word,
}

/// A loop whose first- and second-pass outputs are nonempty with
/// non-conjugate primitive roots.
pub fn conjugate_loop_refute(z: &Transducer, max_word_len: usize) -> Result<Option<ConjugateLoopWitness>> {
    search_zruns(z, max_word_len, |u, runs| {
        runs.iter().find_map(|(r, o)| {
            find_loops(r).into_iter().find_map(|lp| {
                let (v1, v2) = (o.out1(lp.i, lp.j), o.out2(lp.i, lp.j));
                if v1.is_empty() || v2.is_empty() {
                    return None;
                }
                let (m1, m2) = (primitive_root(&v1).ok()?, primitive_root(&v2).ok()?);
                (!are_conjugate(&m1, &m2)).then(|| ConjugateLoopWitness {
                    word: u.clone(),
                    lp,
                    v1,
                    v2,
                })
            })
        })
    })
}

/// Pumped outputs of a conjugate-loop witness for `k = 0..=max_k`.
pub fn pumped_family(z: &Transducer, w: &ConjugateLoopWitness, max_k: usize) -> Result<Vec<Word>> {
    (0..=max_k)
        .map(|k| {
            let u = pump_input(&w.word, w.lp.i, w.lp.j, k);
            let outs = eval_twoway(z, &u, 3)?;
            outs.into_iter()
                .next()
                .ok_or_else(|| Error::domain("pumped word left the domain"))
        })
        .collect()
}

/// True when no `β1 β2^k β3` fits the pumped family of the witness.
pub fn pumped_family_is_not_arithmetic(z: &Transducer, w: &ConjugateLoopWitness) -> Result<bool> {
    Ok(fit_arithmetic_family(&pumped_family(z, w, 4)?)?.is_none())
}

/// Every `(factor, output)` of a z-motion between `q1` and `q2` embedded in an
/// accepting run of `t` on a word of length at most `word_bound`.
///
/// On the right side the factor is read backward, as the mirror sees it.
pub fn embedded_zmotions(
    t: &Transducer,
    q1: usize,
    q2: usize,
    side: Side,
    word_bound: usize,
    crossing_bound: usize,
) -> BTreeSet<(Word, Word)> {
    let mut found = BTreeSet::new();
    for u in words_up_to(&t.alphabet, word_bound) {
        for r in enumerate_accepting_runs(t, &u, crossing_bound) {
            let outs: Vec<&Word> = r.steps.iter().map(|&s| &t.transitions[s].out).collect();
            for a in 0..r.configs.len() {
                if r.configs[a].0 != q1 {
                    continue;
                }
                for b in a..r.configs.len() {
                    if r.configs[b].0 != q2 {
                        continue;
                    }
                    let (i1, i2) = (r.configs[a].1, r.configs[b].1);
                    let (lo, hi) = match side {
                        Side::Left if i1 <= i2 => (i1, i2),
                        Side::Right if i2 <= i1 => (i2, i1),
                        _ => continue,
                    };
                    if hi > u.len() {
                        continue;
                    }
                    let m = hi - lo + 1;
                    let local: Vec<usize> = r.configs[a..=b]
                        .iter()
                        .map(|&(_, p)| match side {
                            Side::Left => p as isize - lo as isize + 1,
                            Side::Right => hi as isize - p as isize + 1,
                        })
                        .map(|p| p.max(0) as usize)
                        .collect();
                    let mut want = crate::runs::zshape(m);
                    want.pop();
                    if local != want {
                        continue;
                    }
                    let mut factor = u[lo - 1..hi].to_vec();
                    if side == Side::Right {
                        factor.reverse();
                    }
                    let v: Word = outs[a..b].iter().flat_map(|w| w.iter().copied()).collect();
                    found.insert((factor, v));
                }
            }
        }
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::words::word;

    fn pairs(v: &[(&str, &str)]) -> BTreeSet<(Word, Word)> {
        v.iter().map(|(a, b)| (word(a), word(b))).collect()
    }

    #[test]
    fn t0_at_bound_two() {
        let r = enumerate_relation(&fixtures::t0(), 2, 1);
        assert_eq!(r.pairs, pairs(&[("a", "a"), ("aa", "aa"), ("ba", "aa")]));
        assert!(enumerate_relation(&fixtures::empty(), 4, 2).pairs.is_empty());
    }

    #[test]
    fn t2_at_bound_four() {
        let r = enumerate_relation(&fixtures::t2(), 4, 3);
        let want = pairs(&[
            ("##", "##"),
            ("#a#", "#a#"),
            ("#b#", "#b#"),
            ("#ab#", "#ba#"),
            ("#ba#", "#ab#"),
            ("#aa#", "#aa#"),
            ("#bb#", "#bb#"),
        ]);
        assert_eq!(r.pairs, want);
    }

    #[test]
    fn bounded_equivalence() {
        let (t0, t1) = (fixtures::t0(), fixtures::t1());
        assert!(relations_equal_up_to(&t0, &t0, 5, 1).unwrap().is_equal());
        assert!(relations_equal_up_to(&t0, &fixtures::t0_renamed(), 6, 1).unwrap().is_equal());
        match relations_equal_up_to(&t0, &t1, 5, 1).unwrap() {
            RelationComparison::Differ { input, left, .. } => {
                assert_eq!(input, word("b"));
                assert!(left.is_empty());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn strategies_give_the_same_relation() {
        let t = fixtures::t2();
        assert_eq!(
            enumerate_relation_with(&t, 5, 3, Strategy::Parallel),
            enumerate_relation_with(&t, 5, 3, Strategy::Sequential)
        );
    }

    #[test]
    fn embedded_zmotions_of_t2() {
        let t2 = fixtures::t2();
        let (q0, q3) = (t2.state_id("q0").unwrap(), t2.state_id("q3").unwrap());
        let found = embedded_zmotions(&t2, q0, q3, Side::Left, 5, 3);
        assert!(found.contains(&(word("#ab#"), word("#ba"))));
        assert!(found.iter().all(|(f, _)| f.first() == Some(&'#') && f.last() == Some(&'#')));
    }
}
