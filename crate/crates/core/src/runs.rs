//! Runs and their analysis: shapes, crossing sequences, loops, pass-segmented
//! outputs of z-shaped runs, and the squeeze operation on one-step sequences.

use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::automata::Automaton;
use crate::error::{Error, Result};
use crate::machines::{Transducer, TransducerKind, Transition};
use crate::words::{Symbol, Word};

/// A run: configurations `(state, position)` and the transitions between them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub configs: Vec<(usize, usize)>,
    pub input: Word,
    /// `steps[k]` is the transition index leading from `configs[k]` to `configs[k + 1]`.
    pub steps: Vec<usize>,
}

impl Run {
    pub fn shape(&self) -> Vec<usize> {
        self.configs.iter().map(|&(_, p)| p).collect()
    }

    pub fn output(&self, t: &Transducer) -> Word {
        self.steps
            .iter()
            .flat_map(|&i| t.transitions[i].out.iter().copied())
            .collect()
    }

    /// Checks that every step is licensed and the run starts at position 1.
    pub fn is_valid_for(&self, t: &Transducer) -> bool {
        if self.configs.first().map(|c| c.1) != Some(1) || self.steps.len() + 1 != self.configs.len() {
            return false;
        }
        self.steps.iter().enumerate().all(|(k, &ti)| {
            let Some(tr) = t.transitions.get(ti) else {
                return false;
            };
            let (q, p) = self.configs[k];
            let (q2, p2) = self.configs[k + 1];
            p >= 1
                && p <= self.input.len()
                && tr.src == q
                && tr.dst == q2
                && tr.sym == self.input[p - 1]
                && tr.mv.apply(p) == Some(p2)
        })
    }

    pub fn is_accepting_for(&self, t: &Transducer) -> bool {
        let (q, p) = *self.configs.last().expect("runs are nonempty");
        self.is_valid_for(t) && p == self.input.len() + 1 && t.is_final(q)
    }

    pub fn max_crossing(&self) -> usize {
        let mut counts = vec![0usize; self.input.len() + 2];
        for &(_, p) in &self.configs {
            counts[p] += 1;
        }
        counts.into_iter().max().unwrap_or(0)
    }
}

/// Positions of a z-shaped run on a word of length `n`: `1..n`, `n-1..1`, `2..n+1`.
pub fn zshape(n: usize) -> Vec<usize> {
    match n {
        0 => vec![1],
        1 => vec![1, 2],
        _ => {
            let mut v: Vec<usize> = (1..=n).collect();
            v.extend((1..n).rev());
            v.extend(2..=n + 1);
            v
        }
    }
}

pub fn is_zshape(shape: &[usize], n: usize) -> bool {
    shape == zshape(n).as_slice()
}

/// Reads an automaton as a transducer with empty outputs.
pub fn automaton_as_transducer(a: &Automaton) -> Transducer {
    let mut t = Transducer {
        name: a.name.clone(),
        kind: match a.kind {
            crate::automata::AutomatonKind::OneWay => TransducerKind::Nft,
            crate::automata::AutomatonKind::TwoWay => TransducerKind::TwoNft,
        },
        alphabet: a.alphabet.clone(),
        states: a.states.clone(),
        initial: a.initial,
        finals: a.finals.clone(),
        transitions: a
            .edges
            .iter()
            .map(|e| Transition {
                src: e.src,
                sym: e.sym,
                out: vec![],
                dst: e.dst,
                mv: e.mv,
            })
            .collect(),
    };
    t.normalize();
    t
}

/// All accepting runs on `u` with crossing sequences of length at most
/// `crossing_bound`, ordered lexicographically by transition index.
/// Z-shaped kinds only yield runs of the z shape.
pub fn enumerate_accepting_runs(t: &Transducer, u: &[Symbol], crossing_bound: usize) -> Vec<Run> {
    let mut out = vec![];
    if crossing_bound == 0 || u.iter().any(|&c| t.sym_index(c).is_none()) {
        return out;
    }
    let idx = t.index();
    let syms: Vec<usize> = u.iter().map(|&c| t.sym_index(c).unwrap()).collect();
    let shape = t.kind.is_zshaped().then(|| zshape(u.len()));
    let mut counts = vec![0usize; u.len() + 2];
    counts[1] = 1;
    let mut configs = vec![(t.initial, 1)];
    let mut steps = vec![];
    dfs_runs(
        t,
        &idx,
        &syms,
        u,
        crossing_bound,
        shape.as_deref(),
        &mut counts,
        &mut configs,
        &mut steps,
        &mut out,
    );
    out
}

#[allow(clippy::too_many_arguments)]
fn dfs_runs(
    t: &Transducer,
    idx: &[Vec<Vec<usize>>],
    syms: &[usize],
    u: &[Symbol],
    bound: usize,
    shape: Option<&[usize]>,
    counts: &mut Vec<usize>,
    configs: &mut Vec<(usize, usize)>,
    steps: &mut Vec<usize>,
    out: &mut Vec<Run>,
) {
    let (q, pos) = *configs.last().unwrap();
    let n = syms.len();
    if pos == n + 1 {
        let shape_ok = shape.is_none_or(|s| s.len() == configs.len());
        if t.is_final(q) && shape_ok {
            out.push(Run {
                configs: configs.clone(),
                input: u.to_vec(),
                steps: steps.clone(),
            });
        }
        return;
    }
    for &ti in &idx[q][syms[pos - 1]] {
        let tr = &t.transitions[ti];
        let Some(np) = tr.mv.apply(pos) else { continue };
        if let Some(s) = shape {
            if s.get(configs.len()) != Some(&np) {
                continue;
            }
        }
        if counts[np] >= bound {
            continue;
        }
        counts[np] += 1;
        configs.push((tr.dst, np));
        steps.push(ti);
        dfs_runs(t, idx, syms, u, bound, shape, counts, configs, steps, out);
        steps.pop();
        configs.pop();
        counts[np] -= 1;
    }
}

/// Outputs of the z-shaped accepting runs.
pub(crate) fn zshaped_outputs(t: &Transducer, u: &[Symbol]) -> BTreeSet<Word> {
    let shape = zshape(u.len());
    let idx = t.index();
    let mut cur: BTreeSet<(usize, Word)> = BTreeSet::from([(t.initial, vec![])]);
    for k in 0..shape.len() - 1 {
        let (pos, next) = (shape[k], shape[k + 1]);
        let Some(s) = t.sym_index(u[pos - 1]) else {
            return BTreeSet::new();
        };
        let mut nxt = BTreeSet::new();
        for (q, o) in &cur {
            for &ti in &idx[*q][s] {
                let tr = &t.transitions[ti];
                if tr.mv.apply(pos) == Some(next) {
                    let mut o2 = o.clone();
                    o2.extend_from_slice(&tr.out);
                    nxt.insert((tr.dst, o2));
                }
            }
        }
        cur = nxt;
    }
    cur.into_iter()
        .filter(|(q, _)| t.is_final(*q))
        .map(|(_, o)| o)
        .collect()
}

type Memo = HashMap<(usize, usize, Vec<u8>), Rc<BTreeSet<Word>>>;

/// Outputs of accepting runs whose crossing sequences stay within `bound`.
pub(crate) fn bounded_outputs(t: &Transducer, u: &[Symbol], bound: usize) -> BTreeSet<Word> {
    let idx = t.index();
    let Some(syms) = u.iter().map(|&c| t.sym_index(c)).collect::<Option<Vec<_>>>() else {
        return BTreeSet::new();
    };
    let mut counts = vec![0u8; u.len() + 2];
    counts[1] = 1;
    let bound = bound.min(u8::MAX as usize) as u8;
    let mut memo = Memo::new();
    let r = suffixes(t, &idx, &syms, bound, t.initial, 1, &mut counts, &mut memo);
    (*r).clone()
}

#[allow(clippy::too_many_arguments)]
fn suffixes(
    t: &Transducer,
    idx: &[Vec<Vec<usize>>],
    syms: &[usize],
    bound: u8,
    q: usize,
    pos: usize,
    counts: &mut Vec<u8>,
    memo: &mut Memo,
) -> Rc<BTreeSet<Word>> {
    let n = syms.len();
    if pos == n + 1 {
        let mut s = BTreeSet::new();
        if t.is_final(q) {
            s.insert(vec![]);
        }
        return Rc::new(s);
    }
    let key = (q, pos, counts.clone());
    if let Some(r) = memo.get(&key) {
        return r.clone();
    }
    let mut acc = BTreeSet::new();
    for &ti in &idx[q][syms[pos - 1]] {
        let tr = &t.transitions[ti];
        let Some(np) = tr.mv.apply(pos) else { continue };
        if counts[np] >= bound {
            continue;
        }
        counts[np] += 1;
        let rest = suffixes(t, idx, syms, bound, tr.dst, np, counts, memo);
        counts[np] -= 1;
        for w in rest.iter() {
            let mut o = tr.out.clone();
            o.extend_from_slice(w);
            acc.insert(o);
        }
    }
    let r = Rc::new(acc);
    memo.insert(key, r.clone());
    r
}

/// States of the configurations at position `i`, in run order.
pub fn crossing_sequence(r: &Run, i: usize) -> Result<Vec<usize>> {
    if i == 0 || i > r.input.len() + 1 {
        return Err(Error::domain(format!(
            "position {i} is outside 1..={}",
            r.input.len() + 1
        )));
    }
    Ok(r.configs.iter().filter(|c| c.1 == i).map(|c| c.0).collect())
}

// ---------------------------------------------------------------------------
// one-step sequences and z-motions

/// Unit steps, starting at 1 and ending at the maximum value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OneStepSequence {
    pub values: Vec<usize>,
}

impl OneStepSequence {
    pub fn new(values: Vec<usize>) -> Result<Self> {
        let ok = values.first() == Some(&1)
            && values.windows(2).all(|w| w[0].abs_diff(w[1]) == 1)
            && values.last() == values.iter().max();
        if !ok {
            return Err(Error::domain(format!("{values:?} is not a one-step sequence")));
        }
        Ok(OneStepSequence { values })
    }

    pub fn max_value(&self) -> usize {
        *self.values.iter().max().unwrap()
    }

    /// Largest number of occurrences of one value.
    pub fn crossing_number(&self) -> usize {
        let mut counts = vec![0usize; self.max_value() + 1];
        for &v in &self.values {
            counts[v] += 1;
        }
        counts.into_iter().max().unwrap_or(0)
    }

    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[1] == w[0] + 1)
    }
}

/// A z-motion given by its pair of reversals and its extent, all 1-based indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ZMotion {
    /// Position of the first reversal in the reversal list (1-based).
    pub rank: usize,
    pub first_reversal: usize,
    pub second_reversal: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZMotionReport {
    pub reversals: Vec<usize>,
    pub zmotions: Vec<ZMotion>,
    pub is_single_zmotion: bool,
}

/// Indices `1 < r < n` with `a[r+1] = a[r-1]`, 1-based.
pub fn reversals(s: &[usize]) -> Vec<usize> {
    (2..s.len())
        .filter(|&r| s[r] == s[r - 2])
        .collect()
}

/// Reversals and z-motions of a unit-step sequence (1-based indices).
pub fn zmotion_check(s: &[usize]) -> ZMotionReport {
    let n = s.len();
    let revs = reversals(s);
    let l = revs.len();
    let a = |i: usize| s[i - 1];
    // r_0 = 1, r_1..r_l, r_{l+1} = n
    let r = |i: usize| -> usize {
        if i == 0 {
            1
        } else if i == l + 1 {
            n
        } else {
            revs[i - 1]
        }
    };
    let mut zmotions = vec![];
    for i in 1..l {
        let (ri, rj) = (r(i), r(i + 1));
        let start = (r(i - 1)..ri).find(|&e| a(e) == a(rj));
        let end = (rj + 1..=r(i + 2)).find(|&f| a(f) == a(ri));
        if let (Some(start), Some(end)) = (start, end) {
            zmotions.push(ZMotion {
                rank: i,
                first_reversal: ri,
                second_reversal: rj,
                start,
                end,
            });
        }
    }
    let is_single_zmotion = l == 2 && zmotions.iter().any(|z| z.start == 1 && z.end == n);
    ZMotionReport {
        reversals: revs,
        zmotions,
        is_single_zmotion,
    }
}

fn shares_reversal(x: &ZMotion, y: &ZMotion) -> bool {
    let xs = [x.first_reversal, x.second_reversal];
    xs.contains(&y.first_reversal) || xs.contains(&y.second_reversal)
}

fn disjoint(s: &[usize], x: &ZMotion, y: &ZMotion) -> bool {
    let consecutive = x.rank + 2 == y.rank || y.rank + 2 == x.rank;
    let a = |i: usize| s[i - 1];
    let (xlo, xhi) = (
        a(x.first_reversal).min(a(x.second_reversal)),
        a(x.first_reversal).max(a(x.second_reversal)),
    );
    let (ylo, yhi) = (
        a(y.first_reversal).min(a(y.second_reversal)),
        a(y.first_reversal).max(a(y.second_reversal)),
    );
    let positional = xhi < ylo || yhi < xlo;
    !consecutive || positional
}

/// Largest sequence handled by the exact squeeze computation.
pub const SQUEEZE_MAX_LEN: usize = 20;

/// Every sequence obtained by removing a consistent set of pairwise disjoint z-motions.
pub fn sequence_squeeze_step(s: &OneStepSequence) -> Result<BTreeSet<OneStepSequence>> {
    if s.values.len() > SQUEEZE_MAX_LEN {
        return Err(Error::BoundExceeded(format!(
            "exact squeeze is limited to {SQUEEZE_MAX_LEN} values"
        )));
    }
    let zs = zmotion_check(&s.values).zmotions;
    let mut out = BTreeSet::new();
    let mut chosen: Vec<usize> = vec![];
    subsets(&s.values, &zs, 0, &mut chosen, &mut out);
    Ok(out)
}

fn subsets(
    s: &[usize],
    zs: &[ZMotion],
    k: usize,
    chosen: &mut Vec<usize>,
    out: &mut BTreeSet<OneStepSequence>,
) {
    if k == zs.len() {
        let mut drop = vec![false; s.len() + 1];
        for &c in chosen.iter() {
            for d in drop.iter_mut().take(zs[c].end + 1).skip(zs[c].first_reversal + 1) {
                *d = true;
            }
        }
        let values = (1..=s.len()).filter(|&i| !drop[i]).map(|i| s[i - 1]).collect();
        out.insert(OneStepSequence { values });
        return;
    }
    subsets(s, zs, k + 1, chosen, out);
    let ok = chosen
        .iter()
        .all(|&c| !shares_reversal(&zs[c], &zs[k]) && disjoint(s, &zs[c], &zs[k]));
    if ok {
        chosen.push(k);
        subsets(s, zs, k + 1, chosen, out);
        chosen.pop();
    }
}

/// Least number of squeeze iterations reaching the increasing sequence `1..m`.
pub fn squeeze_reaches_identity(s: &OneStepSequence, max_iters: usize) -> Result<Option<usize>> {
    let mut level: BTreeSet<OneStepSequence> = BTreeSet::from([s.clone()]);
    let mut seen = level.clone();
    for k in 0..=max_iters {
        if level.iter().any(|x| x.is_monotone()) {
            return Ok(Some(k));
        }
        if k == max_iters {
            break;
        }
        let mut next = BTreeSet::new();
        for x in &level {
            for y in sequence_squeeze_step(x)? {
                if seen.insert(y.clone()) {
                    next.insert(y);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        // Sequences already seen reach the same sets later; only new ones matter.
        level = next;
    }
    Ok(None)
}

/// All one-step sequences with values in `1..=max_value`, length at most `max_len`,
/// and crossing number at most `max_crossing`.
pub fn one_step_sequences(max_value: usize, max_len: usize, max_crossing: usize) -> Vec<OneStepSequence> {
    let mut out = vec![];
    let mut cur = vec![1usize];
    let mut counts = vec![0usize; max_value + 2];
    counts[1] = 1;
    gen_sequences(max_value, max_len, max_crossing, &mut cur, &mut counts, &mut out);
    out
}

fn gen_sequences(
    max_value: usize,
    max_len: usize,
    max_crossing: usize,
    cur: &mut Vec<usize>,
    counts: &mut Vec<usize>,
    out: &mut Vec<OneStepSequence>,
) {
    let last = *cur.last().unwrap();
    if Some(&last) == cur.iter().max() {
        out.push(OneStepSequence { values: cur.clone() });
    }
    if cur.len() == max_len {
        return;
    }
    for next in [last + 1, last.wrapping_sub(1)] {
        if next == 0 || next > max_value || counts[next] >= max_crossing {
            continue;
        }
        counts[next] += 1;
        cur.push(next);
        gen_sequences(max_value, max_len, max_crossing, cur, counts, out);
        cur.pop();
        counts[next] -= 1;
    }
}

// ---------------------------------------------------------------------------
// loops

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Loop {
    pub i: usize,
    pub j: usize,
    pub crossing_seq: Vec<usize>,
    pub letter: Symbol,
}

impl Loop {
    pub fn is_empty(&self) -> bool {
        self.i == self.j
    }
}

/// Pairs `i <= j <= n` with equal crossing sequences and letters, sorted by `(i, j)`.
pub fn find_loops(r: &Run) -> Vec<Loop> {
    let n = r.input.len();
    let cs: Vec<Vec<usize>> = (1..=n)
        .map(|i| crossing_sequence(r, i).expect("in range"))
        .collect();
    let mut out = vec![];
    for i in 1..=n {
        for j in i..=n {
            if cs[i - 1] == cs[j - 1] && r.input[i - 1] == r.input[j - 1] {
                out.push(Loop {
                    i,
                    j,
                    crossing_seq: cs[i - 1].clone(),
                    letter: r.input[i - 1],
                });
            }
        }
    }
    out
}

/// The input with `u[i..j-1]` repeated `k` times.
pub fn pump_input(u: &[Symbol], i: usize, j: usize, k: usize) -> Word {
    let mut w = u[..i - 1].to_vec();
    for _ in 0..k {
        w.extend_from_slice(&u[i - 1..j - 1]);
    }
    w.extend_from_slice(&u[j - 1..]);
    w
}

/// The run on `pump_input(u, i, j, k)` obtained by repeating the part of `r`
/// inside the loop `k` times.
///
/// Each visit of a position of the pumped word replays the visit with the
/// same index at the matching position of `r`; fails if the states disagree.
pub fn pump_run(r: &Run, l: &Loop, k: usize) -> Result<Run> {
    let n = r.input.len();
    let (i, j) = (l.i, l.j);
    if i == 0 || i > j || j > n {
        return Err(Error::domain("loop outside the word"));
    }
    let width = j - i;
    let input = pump_input(&r.input, i, j, k);
    let big = input.len();
    let to_orig = |p: usize| -> usize {
        if p < i {
            p
        } else if p < i + k * width {
            i + (p - i) % width
        } else {
            p + width - k * width
        }
    };
    let mut visits: Vec<Vec<usize>> = vec![vec![]; n + 2];
    for (t, &(_, p)) in r.configs.iter().enumerate() {
        visits[p].push(t);
    }
    let mut counts = vec![0usize; big + 2];
    let mut pos = 1usize;
    counts[1] = 1;
    let mut t = *visits[to_orig(1)].first().ok_or_else(|| Error::domain("run never visits the start"))?;
    if r.configs[t].0 != r.configs[0].0 {
        return Err(Error::domain("loop does not pump: start states differ"));
    }
    let mut configs = vec![(r.configs[t].0, 1)];
    let mut steps = vec![];
    let cap = r.configs.len() * (k + 1) + 1;
    while t + 1 < r.configs.len() {
        if steps.len() > cap {
            return Err(Error::domain("pumped run does not terminate"));
        }
        let step = r.steps[t];
        let next_pos = if r.configs[t + 1].1 > r.configs[t].1 { pos + 1 } else { pos - 1 };
        counts[next_pos] += 1;
        let m = counts[next_pos];
        let Some(&t2) = visits[to_orig(next_pos)].get(m - 1) else {
            return Err(Error::domain("loop does not pump: visit counts differ"));
        };
        if r.configs[t2].0 != r.configs[t + 1].0 {
            return Err(Error::domain("loop does not pump: states differ"));
        }
        steps.push(step);
        configs.push((r.configs[t2].0, next_pos));
        pos = next_pos;
        t = t2;
    }
    if pos != big + 1 {
        return Err(Error::domain("pumped run stops inside the word"));
    }
    Ok(Run { configs, input, steps })
}

// ---------------------------------------------------------------------------
// pass-segmented outputs

/// Outputs of a z-shaped run split by pass.
///
/// `forward[i]` is the output of the step from position `i` to `i + 1` on the
/// first pass, `backward[i]` the step from `i` to `i - 1` on the second pass
/// (`backward[n]` is the turn), and `third[i]` the step from `i` to `i + 1` on
/// the last pass (`third[1]` is the second turn). Unused slots are empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZRunOutputs {
    pub n: usize,
    pub forward: Vec<Word>,
    pub backward: Vec<Word>,
    pub third: Vec<Word>,
    /// States per pass: `first[i]`, `second[i]`, `last[i]` for `i` in `1..=n+1`.
    pub first_states: Vec<Option<usize>>,
    pub second_states: Vec<Option<usize>>,
    pub last_states: Vec<Option<usize>>,
}

fn concat<'a>(parts: impl Iterator<Item = &'a Word>) -> Word {
    parts.flat_map(|w| w.iter().copied()).collect()
}

impl ZRunOutputs {
    pub fn from_run(t: &Transducer, r: &Run) -> Result<Self> {
        let n = r.input.len();
        if !is_zshape(&r.shape(), n) {
            return Err(Error::domain("run is not z-shaped"));
        }
        let mut o = ZRunOutputs {
            n,
            forward: vec![vec![]; n + 2],
            backward: vec![vec![]; n + 2],
            third: vec![vec![]; n + 2],
            first_states: vec![None; n + 2],
            second_states: vec![None; n + 2],
            last_states: vec![None; n + 2],
        };
        let out = |k: usize| t.transitions[r.steps[k]].out.clone();
        if n == 0 {
            return Ok(o);
        }
        if n == 1 {
            o.first_states[1] = Some(r.configs[0].0);
            o.second_states[1] = Some(r.configs[0].0);
            o.last_states[1] = Some(r.configs[0].0);
            o.last_states[2] = Some(r.configs[1].0);
            o.third[1] = out(0);
            return Ok(o);
        }
        // configs: 0..n-1 first pass, n-1..2n-2 second pass (n..1), 2n-2.. third pass (1..n+1)
        for i in 1..=n {
            o.first_states[i] = Some(r.configs[i - 1].0);
        }
        for k in 0..n - 1 {
            o.forward[k + 1] = out(k);
        }
        // second pass: configs[n-1 + m] at position n - m
        for m in 0..n {
            o.second_states[n - m] = Some(r.configs[n - 1 + m].0);
        }
        for m in 0..n - 1 {
            o.backward[n - m] = out(n - 1 + m);
        }
        // third pass: configs[2n-2 + m] at position 1 + m
        for m in 0..=n {
            o.last_states[1 + m] = Some(r.configs[2 * n - 2 + m].0);
        }
        for m in 0..n {
            o.third[1 + m] = out(2 * n - 2 + m);
        }
        Ok(o)
    }

    pub fn out1(&self, i: usize, j: usize) -> Word {
        concat((i..j).map(|k| &self.forward[k]))
    }

    pub fn out2(&self, i: usize, j: usize) -> Word {
        concat((i + 1..=j).rev().map(|k| &self.backward[k]))
    }

    pub fn out3(&self, i: usize, j: usize) -> Word {
        concat((i..j).map(|k| &self.third[k]))
    }

    pub fn out_pass(&self, pass: u8, i: usize, j: usize) -> Result<Word> {
        match pass {
            1 => Ok(self.out1(i, j)),
            2 => Ok(self.out2(i, j)),
            3 => Ok(self.out3(i, j)),
            _ => Err(Error::domain(format!("pass must be 1, 2 or 3, not {pass}"))),
        }
    }

    pub fn total(&self) -> Word {
        let n = self.n;
        if n == 0 {
            return vec![];
        }
        let mut v = self.out1(1, n);
        v.extend(self.out2(1, n));
        v.extend(self.out3(1, n + 1));
        v
    }

    /// Output pieces around one loop `(i, j)`.
    pub fn single_loop(&self, i: usize, j: usize) -> SingleLoopPieces {
        let n = self.n;
        let cat = |a: Word, b: Word| -> Word { a.into_iter().chain(b).collect() };
        SingleLoopPieces {
            x0: self.out1(1, i),
            v1: self.out1(i, j),
            x1: cat(self.out1(j, n), self.out2(j, n)),
            v2: self.out2(i, j),
            x2: cat(self.out2(1, i), self.out3(1, i)),
            v3: self.out3(i, j),
            x3: self.out3(j, n + 1),
        }
    }

    /// Output pieces around two loops `(i1, j1)` and `(i2, j2)` with `j1 <= i2`.
    pub fn loop_decompose(&self, first: &Loop, second: &Loop) -> Result<TwoLoopPieces> {
        let (i1, j1, i2, j2) = (first.i, first.j, second.i, second.j);
        if !(i1 <= j1 && j1 <= i2 && i2 <= j2 && j2 <= self.n) {
            return Err(Error::domain("loops must be ordered and inside the word"));
        }
        let n = self.n;
        let cat = |a: Word, b: Word| -> Word { a.into_iter().chain(b).collect() };
        Ok(TwoLoopPieces {
            x0: self.out1(1, i1),
            v1: self.out1(i1, j1),
            x1: self.out1(j1, i2),
            w1: self.out1(i2, j2),
            x2: cat(self.out1(j2, n), self.out2(j2, n)),
            w2: self.out2(i2, j2),
            x3: self.out2(j1, i2),
            v2: self.out2(i1, j1),
            x4: cat(self.out2(1, i1), self.out3(1, i1)),
            v3: self.out3(i1, j1),
            x5: self.out3(j1, i2),
            w3: self.out3(i2, j2),
            x6: self.out3(j2, n + 1),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingleLoopPieces {
    pub x0: Word,
    pub v1: Word,
    pub x1: Word,
    pub v2: Word,
    pub x2: Word,
    pub v3: Word,
    pub x3: Word,
}

impl SingleLoopPieces {
    /// `x0 v1^k x1 v2^k x2 v3^k x3`
    pub fn pumped(&self, k: usize) -> Word {
        use crate::words::power;
        let mut w = self.x0.clone();
        w.extend(power(&self.v1, k));
        w.extend_from_slice(&self.x1);
        w.extend(power(&self.v2, k));
        w.extend_from_slice(&self.x2);
        w.extend(power(&self.v3, k));
        w.extend_from_slice(&self.x3);
        w
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoLoopPieces {
    pub x0: Word,
    pub v1: Word,
    pub x1: Word,
    pub w1: Word,
    pub x2: Word,
    pub w2: Word,
    pub x3: Word,
    pub v2: Word,
    pub x4: Word,
    pub v3: Word,
    pub x5: Word,
    pub w3: Word,
    pub x6: Word,
}

impl TwoLoopPieces {
    /// Output after pumping the first loop `k1` times and the second `k2` times.
    pub fn pumped(&self, k1: usize, k2: usize) -> Word {
        use crate::words::power;
        let parts: Vec<Word> = vec![
            self.x0.clone(),
            power(&self.v1, k1),
            self.x1.clone(),
            power(&self.w1, k2),
            self.x2.clone(),
            power(&self.w2, k2),
            self.x3.clone(),
            power(&self.v2, k1),
            self.x4.clone(),
            power(&self.v3, k1),
            self.x5.clone(),
            power(&self.w3, k2),
            self.x6.clone(),
        ];
        parts.concat()
    }
}

/// Pumped output of a loop in a run that never moves left: `x0 v^k x1`.
pub fn oneway_pumped_output(t: &Transducer, r: &Run, l: &Loop, k: usize) -> Result<Word> {
    if r.configs.windows(2).any(|w| w[1].1 != w[0].1 + 1) {
        return Err(Error::domain("run moves left"));
    }
    let seg = |a: usize, b: usize| -> Word {
        concat((a - 1..b - 1).map(|s| &t.transitions[r.steps[s]].out))
    };
    let n = r.input.len();
    let mut w = seg(1, l.i);
    w.extend(crate::words::power(&seg(l.i, l.j), k));
    w.extend(seg(l.j, n + 1));
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// A loop `(i, j)` inside `[k, l]` whose pass output has length in `1..=bound`,
/// with the output on the given side of it also at most `bound`.
pub fn find_output_bounded_loop(
    r: &Run,
    outs: &ZRunOutputs,
    pass: u8,
    k: usize,
    l: usize,
    bound: usize,
    side: Side,
) -> Result<Option<Loop>> {
    let whole = outs.out_pass(pass, k, l)?;
    if whole.len() <= bound {
        return Ok(None);
    }
    for lp in find_loops(r) {
        if lp.i < k || lp.j > l || lp.is_empty() {
            continue;
        }
        let inner = outs.out_pass(pass, lp.i, lp.j)?.len();
        let outer = match side {
            Side::Left => outs.out_pass(pass, k, lp.i)?.len(),
            Side::Right => outs.out_pass(pass, lp.j, l)?.len(),
        };
        if (1..=bound).contains(&inner) && outer <= bound {
            return Ok(Some(lp));
        }
    }
    Ok(None)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::words::word;

    #[test]
    fn t2_run_shape() {
        let runs = enumerate_accepting_runs(&fixtures::t2(), &word("#a#"), 3);
        assert_eq!(runs.len(), 1);
        assert_eq!(runs[0].shape(), vec![1, 2, 3, 2, 1, 2, 3, 4]);
        assert!(runs[0].is_accepting_for(&fixtures::t2()));
        let mut t = fixtures::t2();
        t.finals.clear();
        assert!(enumerate_accepting_runs(&t, &word("#a#"), 3).is_empty());
        for r in enumerate_accepting_runs(&fixtures::t1(), &word("abba"), 2) {
            assert_eq!(r.shape(), vec![1, 2, 3, 4, 5]);
        }
    }

    #[test]
    fn crossing_sequences_of_the_example_run() {
        let r = Run {
            configs: vec![(1, 1), (2, 2), (3, 1), (4, 2), (5, 1), (6, 2), (7, 3)],
            input: word("ab"),
            steps: vec![0; 6],
        };
        assert_eq!(crossing_sequence(&r, 1).unwrap(), vec![1, 3, 5]);
        assert_eq!(crossing_sequence(&r, 2).unwrap(), vec![2, 4, 6]);
        assert_eq!(crossing_sequence(&r, 3).unwrap(), vec![7]);
        assert!(crossing_sequence(&r, 4).is_err());
    }

    #[test]
    fn zmotion_examples() {
        let z = zmotion_check(&[1, 2, 3, 2, 1, 2, 3]);
        assert_eq!(z.reversals, vec![3, 5]);
        assert!(z.is_single_zmotion);
        assert!(zmotion_check(&[4, 3, 2, 3, 4, 3, 2]).is_single_zmotion);
        let m = zmotion_check(&[1, 2, 3]);
        assert!(m.reversals.is_empty() && !m.is_single_zmotion);
    }

    #[test]
    fn squeeze_examples() {
        let s = OneStepSequence::new(vec![1, 2, 3, 2, 1, 2, 3]).unwrap();
        let step = sequence_squeeze_step(&s).unwrap();
        assert!(step.contains(&OneStepSequence::new(vec![1, 2, 3]).unwrap()));
        assert!(step.contains(&s));
        assert_eq!(squeeze_reaches_identity(&s, 4).unwrap(), Some(1));
        let m = OneStepSequence::new(vec![1, 2, 3]).unwrap();
        assert_eq!(sequence_squeeze_step(&m).unwrap(), BTreeSet::from([m.clone()]));
        assert_eq!(squeeze_reaches_identity(&m, 0).unwrap(), Some(0));
        assert!(OneStepSequence::new(vec![2, 3]).is_err());
    }

    #[test]
    fn loops_on_t2() {
        let t2 = fixtures::t2();
        let r = &enumerate_accepting_runs(&t2, &word("#aa#"), 3)[0];
        let loops = find_loops(r);
        assert!(loops.iter().any(|l| (l.i, l.j) == (2, 3)));
        assert!(loops.iter().filter(|l| l.is_empty()).count() == 4);
        let r = &enumerate_accepting_runs(&t2, &word("#ab#"), 3)[0];
        assert!(!find_loops(r).iter().any(|l| (l.i, l.j) == (2, 3)));
    }

    #[test]
    fn zrun_outputs_total() {
        let t2 = fixtures::t2();
        for u in ["##", "#a#", "#ab#", "#bba#"] {
            let r = &enumerate_accepting_runs(&t2, &word(u), 3)[0];
            let o = ZRunOutputs::from_run(&t2, r).unwrap();
            assert_eq!(o.total(), r.output(&t2));
        }
    }
}
