//! Transducer data model, the machine text format, evaluation and statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::automata::{Automaton, AutomatonKind, Edge};
use crate::error::{Error, Result};
use crate::words::{render, Symbol, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Move {
    Right,
    Left,
}

impl Move {
    pub fn delta(self) -> isize {
        match self {
            Move::Right => 1,
            Move::Left => -1,
        }
    }

    pub fn flip(self) -> Move {
        match self {
            Move::Right => Move::Left,
            Move::Left => Move::Right,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Move::Right => "+1",
            Move::Left => "-1",
        }
    }

    /// Target position after moving from `pos`; `None` when falling off the left end.
    pub fn apply(self, pos: usize) -> Option<usize> {
        match self {
            Move::Right => Some(pos + 1),
            Move::Left => pos.checked_sub(1).filter(|&p| p >= 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransducerKind {
    Nft,
    Dft,
    TwoNft,
    TwoDft,
    Znft,
    Eznft,
}

impl TransducerKind {
    pub fn token(self) -> &'static str {
        match self {
            TransducerKind::Nft => "nft",
            TransducerKind::Dft => "dft",
            TransducerKind::TwoNft => "2nft",
            TransducerKind::TwoDft => "2dft",
            TransducerKind::Znft => "znft",
            TransducerKind::Eznft => "eznft",
        }
    }

    pub fn is_one_way(self) -> bool {
        matches!(self, TransducerKind::Nft | TransducerKind::Dft)
    }

    /// Accepting runs must follow the forward / backward / forward shape.
    pub fn is_zshaped(self) -> bool {
        matches!(self, TransducerKind::Znft | TransducerKind::Eznft)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Transition {
    pub src: usize,
    pub sym: Symbol,
    pub out: Word,
    pub dst: usize,
    pub mv: Move,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transducer {
    pub name: String,
    pub kind: TransducerKind,
    pub alphabet: Vec<Symbol>,
    pub states: Vec<String>,
    pub initial: usize,
    pub finals: BTreeSet<usize>,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Machine {
    Automaton(Automaton),
    Transducer(Transducer),
}

impl Machine {
    pub fn name(&self) -> &str {
        match self {
            Machine::Automaton(a) => &a.name,
            Machine::Transducer(t) => &t.name,
        }
    }

    pub fn state_count(&self) -> usize {
        match self {
            Machine::Automaton(a) => a.states.len(),
            Machine::Transducer(t) => t.states.len(),
        }
    }

    pub fn alphabet(&self) -> &[Symbol] {
        match self {
            Machine::Automaton(a) => &a.alphabet,
            Machine::Transducer(t) => &t.alphabet,
        }
    }
}

/// Per state and per symbol, the indices of outgoing transitions.
pub type TransitionIndex = Vec<Vec<Vec<usize>>>;

impl Transducer {
    pub fn new(name: impl Into<String>, kind: TransducerKind, alphabet: &[Symbol]) -> Self {
        Transducer {
            name: name.into(),
            kind,
            alphabet: alphabet.to_vec(),
            states: vec![],
            initial: 0,
            finals: BTreeSet::new(),
            transitions: vec![],
        }
    }

    /// Index of the state called `name`, declaring it if needed.
    pub fn state(&mut self, name: &str) -> usize {
        if let Some(i) = self.states.iter().position(|s| s == name) {
            return i;
        }
        self.states.push(name.to_string());
        self.states.len() - 1
    }

    pub fn state_id(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn add(&mut self, src: &str, sym: Symbol, out: &str, dst: &str, mv: Move) -> &mut Self {
        let src = self.state(src);
        let dst = self.state(dst);
        self.transitions.push(Transition {
            src,
            sym,
            out: out.chars().collect(),
            dst,
            mv,
        });
        self
    }

    pub fn set_initial(&mut self, name: &str) -> &mut Self {
        self.initial = self.state(name);
        self
    }

    pub fn set_final(&mut self, name: &str) -> &mut Self {
        let q = self.state(name);
        self.finals.insert(q);
        self
    }

    pub fn is_final(&self, q: usize) -> bool {
        self.finals.contains(&q)
    }

    pub fn sym_index(&self, c: Symbol) -> Option<usize> {
        self.alphabet.iter().position(|&a| a == c)
    }

    pub fn index(&self) -> TransitionIndex {
        let mut idx = vec![vec![vec![]; self.alphabet.len()]; self.states.len()];
        for (i, t) in self.transitions.iter().enumerate() {
            if let Some(s) = self.sym_index(t.sym) {
                idx[t.src][s].push(i);
            }
        }
        idx
    }

    /// Sorts and deduplicates transitions into canonical order.
    pub fn normalize(&mut self) {
        let alpha = self.alphabet.clone();
        let pos = |c: Symbol| alpha.iter().position(|&a| a == c).unwrap_or(usize::MAX);
        self.transitions
            .sort_by(|a, b| {
                (a.src, pos(a.sym), &a.out, a.mv, a.dst).cmp(&(b.src, pos(b.sym), &b.out, b.mv, b.dst))
            });
        self.transitions.dedup();
    }

    /// Checks the structural invariants of the declared kind, then normalizes.
    pub fn validated(mut self) -> Result<Self> {
        check_transducer(&self, &HashMap::new())?;
        self.normalize();
        Ok(self)
    }

    pub fn max_output_len(&self) -> usize {
        self.transitions.iter().map(|t| t.out.len()).max().unwrap_or(0)
    }

    /// Letters occurring in some output.
    pub fn output_letters(&self) -> Vec<Symbol> {
        let mut seen = BTreeSet::new();
        for t in &self.transitions {
            seen.extend(t.out.iter().copied());
        }
        self.alphabet
            .iter()
            .copied()
            .filter(|c| seen.contains(c))
            .collect()
    }
}

fn check_transducer(t: &Transducer, lines: &HashMap<usize, usize>) -> Result<()> {
    let line_of = |i: usize| lines.get(&i).copied().unwrap_or(0);
    if t.states.is_empty() {
        return Err(Error::KindViolation {
            line: 0,
            message: "machine declares no states".into(),
        });
    }
    let mut seen_out: HashMap<(usize, Symbol, usize, Move), &Word> = HashMap::new();
    let mut seen_det: HashSet<(usize, Symbol)> = HashSet::new();
    for (i, tr) in t.transitions.iter().enumerate() {
        let line = line_of(i);
        if tr.src >= t.states.len() || tr.dst >= t.states.len() {
            return Err(Error::UnknownState {
                line,
                name: format!("#{}", tr.src.max(tr.dst)),
            });
        }
        if !t.alphabet.contains(&tr.sym) {
            return Err(Error::UnknownSymbol {
                line,
                symbol: tr.sym.to_string(),
            });
        }
        if let Some(c) = tr.out.iter().find(|c| !t.alphabet.contains(c)) {
            return Err(Error::UnknownSymbol {
                line,
                symbol: c.to_string(),
            });
        }
        if t.kind.is_one_way() && tr.mv == Move::Left {
            return Err(Error::KindViolation {
                line,
                message: format!("a {} cannot move left", t.kind.token()),
            });
        }
        if t.kind == TransducerKind::Eznft && tr.mv == Move::Left && !tr.out.is_empty() {
            return Err(Error::KindViolation {
                line,
                message: "an eznft must output nothing on backward moves".into(),
            });
        }
        if let Some(prev) = seen_out.insert((tr.src, tr.sym, tr.dst, tr.mv), &tr.out) {
            if prev != &tr.out {
                return Err(Error::KindViolation {
                    line,
                    message: "two outputs for the same source, symbol, target and move".into(),
                });
            }
            continue;
        }
        if matches!(t.kind, TransducerKind::Dft | TransducerKind::TwoDft)
            && !seen_det.insert((tr.src, tr.sym))
        {
            return Err(Error::KindViolation {
                line,
                message: format!("a {} must be deterministic", t.kind.token()),
            });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// text format

fn escape_symbol(c: Symbol) -> String {
    match c {
        '#' => "\\h".into(),
        '\\' => "\\\\".into(),
        c => c.to_string(),
    }
}

fn escape_word(w: &[Symbol]) -> String {
    if w.is_empty() {
        return "eps".into();
    }
    let s: String = w.iter().map(|&c| escape_symbol(c)).collect();
    if s == "eps" {
        "\\eps".into()
    } else {
        s
    }
}

fn unescape(tok: &str, line: usize, column: usize) -> Result<Word> {
    let mut out = vec![];
    let mut chars = tok.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some('h') => out.push('#'),
                Some(c) => out.push(c),
                None => {
                    return Err(Error::Syntax {
                        line,
                        column,
                        message: "dangling escape".into(),
                    })
                }
            },
            '#' => {
                return Err(Error::Syntax {
                    line,
                    column,
                    message: "write `#` as \\h".into(),
                })
            }
            c => out.push(c),
        }
    }
    Ok(out)
}

struct Tok<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Tok<'_>> {
    let mut out = vec![];
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Tok {
                    text: &line[s..i],
                    column: line[..s].chars().count() + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Tok {
            text: &line[s..],
            column: line[..s].chars().count() + 1,
        });
    }
    out
}

enum ParsedKind {
    Automaton(AutomatonKind),
    Transducer(TransducerKind),
}

fn parse_kind(tok: &Tok, line: usize) -> Result<ParsedKind> {
    Ok(match tok.text {
        "nft" => ParsedKind::Transducer(TransducerKind::Nft),
        "dft" => ParsedKind::Transducer(TransducerKind::Dft),
        "2nft" => ParsedKind::Transducer(TransducerKind::TwoNft),
        "2dft" => ParsedKind::Transducer(TransducerKind::TwoDft),
        "znft" => ParsedKind::Transducer(TransducerKind::Znft),
        "eznft" => ParsedKind::Transducer(TransducerKind::Eznft),
        "nfa" => ParsedKind::Automaton(AutomatonKind::OneWay),
        "2nfa" => ParsedKind::Automaton(AutomatonKind::TwoWay),
        other => {
            return Err(Error::Syntax {
                line,
                column: tok.column,
                message: format!("unknown machine type `{other}`"),
            })
        }
    })
}

struct RawTransition {
    line: usize,
    src: (String, usize),
    sym: (String, usize),
    out: Option<(String, usize)>,
    mv: Move,
    dst: (String, usize),
}

/// Parses a machine file.
pub fn parse_machine(text: &str) -> Result<Machine> {
    let mut name: Option<String> = None;
    let mut kind: Option<ParsedKind> = None;
    let mut alphabet: Option<Vec<Symbol>> = None;
    let mut states: Option<Vec<String>> = None;
    let mut initial: Option<(String, usize, usize)> = None;
    let mut finals: Option<(Vec<(String, usize)>, usize)> = None;
    let mut raw: Vec<RawTransition> = vec![];
    let mut last_line = 0;

    for (ln0, line) in text.lines().enumerate() {
        let ln = ln0 + 1;
        last_line = ln;
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let toks = tokenize(line);
        let head = &toks[0];
        let dup = |what: &str| Error::Syntax {
            line: ln,
            column: head.column,
            message: format!("duplicate `{what}` line"),
        };
        let arity = |n: usize| -> Result<()> {
            if toks.len() != n {
                let column = toks.get(n).map_or(line.chars().count() + 1, |t| t.column);
                return Err(Error::Syntax {
                    line: ln,
                    column,
                    message: format!("`{}` expects {} argument(s)", head.text, n - 1),
                });
            }
            Ok(())
        };
        match head.text {
            "machine" => {
                arity(2)?;
                if name.replace(toks[1].text.to_string()).is_some() {
                    return Err(dup("machine"));
                }
            }
            "type" => {
                arity(2)?;
                if kind.replace(parse_kind(&toks[1], ln)?).is_some() {
                    return Err(dup("type"));
                }
            }
            "alphabet" => {
                let mut syms = vec![];
                for t in &toks[1..] {
                    let w = unescape(t.text, ln, t.column)?;
                    if w.len() != 1 {
                        return Err(Error::Syntax {
                            line: ln,
                            column: t.column,
                            message: format!("symbol `{}` is not a single character", t.text),
                        });
                    }
                    if syms.contains(&w[0]) {
                        return Err(Error::Syntax {
                            line: ln,
                            column: t.column,
                            message: format!("symbol `{}` declared twice", t.text),
                        });
                    }
                    syms.push(w[0]);
                }
                if alphabet.replace(syms).is_some() {
                    return Err(dup("alphabet"));
                }
            }
            "states" => {
                let mut names: Vec<String> = vec![];
                for t in &toks[1..] {
                    if names.iter().any(|n| n == t.text) {
                        return Err(Error::Syntax {
                            line: ln,
                            column: t.column,
                            message: format!("state `{}` declared twice", t.text),
                        });
                    }
                    names.push(t.text.to_string());
                }
                if states.replace(names).is_some() {
                    return Err(dup("states"));
                }
            }
            "initial" => {
                arity(2)?;
                if initial
                    .replace((toks[1].text.to_string(), ln, toks[1].column))
                    .is_some()
                {
                    return Err(dup("initial"));
                }
            }
            "final" => {
                let fs = toks[1..]
                    .iter()
                    .map(|t| (t.text.to_string(), t.column))
                    .collect();
                if finals.replace((fs, ln)).is_some() {
                    return Err(dup("final"));
                }
            }
            "t" => {
                let is_automaton = matches!(kind, Some(ParsedKind::Automaton(_)));
                if kind.is_none() {
                    return Err(Error::Syntax {
                        line: ln,
                        column: head.column,
                        message: "transition before the `type` line".into(),
                    });
                }
                let n = if is_automaton { 5 } else { 6 };
                arity(n)?;
                let mv_tok = &toks[n - 2];
                let mv = match mv_tok.text {
                    "+1" => Move::Right,
                    "-1" => Move::Left,
                    other => {
                        return Err(Error::Syntax {
                            line: ln,
                            column: mv_tok.column,
                            message: format!("move must be +1 or -1, found `{other}`"),
                        })
                    }
                };
                raw.push(RawTransition {
                    line: ln,
                    src: (toks[1].text.to_string(), toks[1].column),
                    sym: (toks[2].text.to_string(), toks[2].column),
                    out: (!is_automaton).then(|| (toks[3].text.to_string(), toks[3].column)),
                    mv,
                    dst: (toks[n - 1].text.to_string(), toks[n - 1].column),
                });
            }
            other => {
                return Err(Error::Syntax {
                    line: ln,
                    column: head.column,
                    message: format!("unknown keyword `{other}`"),
                })
            }
        }
    }

    let missing = |what: &str| Error::Syntax {
        line: last_line + 1,
        column: 1,
        message: format!("missing `{what}` line"),
    };
    let name = name.ok_or_else(|| missing("machine"))?;
    let kind = kind.ok_or_else(|| missing("type"))?;
    let alphabet = alphabet.ok_or_else(|| missing("alphabet"))?;
    let states = states.ok_or_else(|| missing("states"))?;
    let (init_name, init_line, _) = initial.ok_or_else(|| missing("initial"))?;
    let (final_names, final_line) = finals.ok_or_else(|| missing("final"))?;

    let lookup = |n: &str, line: usize| -> Result<usize> {
        states
            .iter()
            .position(|s| s == n)
            .ok_or_else(|| Error::UnknownState {
                line,
                name: n.to_string(),
            })
    };
    let initial = lookup(&init_name, init_line)?;
    let mut final_set = BTreeSet::new();
    for (f, _) in &final_names {
        final_set.insert(lookup(f, final_line)?);
    }

    let mut lines = HashMap::new();
    let mut trans = vec![];
    for (i, r) in raw.iter().enumerate() {
        let src = lookup(&r.src.0, r.line)?;
        let dst = lookup(&r.dst.0, r.line)?;
        let sym_w = unescape(&r.sym.0, r.line, r.sym.1)?;
        if sym_w.len() != 1 || !alphabet.contains(&sym_w[0]) {
            return Err(Error::UnknownSymbol {
                line: r.line,
                symbol: r.sym.0.clone(),
            });
        }
        let out = match &r.out {
            None => vec![],
            Some((o, _)) if o == "eps" => vec![],
            Some((o, col)) => unescape(o, r.line, *col)?,
        };
        lines.insert(i, r.line);
        trans.push(Transition {
            src,
            sym: sym_w[0],
            out,
            dst,
            mv: r.mv,
        });
    }

    match kind {
        ParsedKind::Transducer(k) => {
            let mut t = Transducer {
                name,
                kind: k,
                alphabet,
                states,
                initial,
                finals: final_set,
                transitions: trans,
            };
            check_transducer(&t, &lines)?;
            t.normalize();
            Ok(Machine::Transducer(t))
        }
        ParsedKind::Automaton(k) => {
            for (i, tr) in trans.iter().enumerate() {
                if k == AutomatonKind::OneWay && tr.mv == Move::Left {
                    return Err(Error::KindViolation {
                        line: lines[&i],
                        message: "an nfa cannot move left".into(),
                    });
                }
            }
            let mut a = Automaton {
                name,
                kind: k,
                alphabet,
                states,
                initial,
                finals: final_set,
                edges: trans
                    .into_iter()
                    .map(|t| Edge {
                        src: t.src,
                        sym: t.sym,
                        dst: t.dst,
                        mv: t.mv,
                    })
                    .collect(),
            };
            a.normalize();
            Ok(Machine::Automaton(a))
        }
    }
}

pub fn parse_transducer(text: &str) -> Result<Transducer> {
    match parse_machine(text)? {
        Machine::Transducer(t) => Ok(t),
        Machine::Automaton(_) => Err(Error::domain("expected a transducer, found an automaton")),
    }
}

/// State names usable as single tokens: whitespace becomes `_` and repeats
/// get a `~k` suffix.
fn printable_names(states: &[String]) -> Vec<String> {
    let mut taken = HashSet::new();
    states
        .iter()
        .map(|s| {
            let mut base: String = s.split_whitespace().collect::<Vec<_>>().join("_");
            if base.is_empty() || base.starts_with('#') {
                base.insert(0, '_');
            }
            let mut name = base.clone();
            let mut k = 1;
            while !taken.insert(name.clone()) {
                name = format!("{base}~{k}");
                k += 1;
            }
            name
        })
        .collect()
}

fn header(
    out: &mut String,
    name: &str,
    kind: &str,
    alphabet: &[Symbol],
    states: &[String],
    initial: usize,
    finals: &BTreeSet<usize>,
) {
    let _ = writeln!(out, "machine {name}");
    let _ = writeln!(out, "type {kind}");
    let mut line = String::from("alphabet");
    for &c in alphabet {
        line.push(' ');
        line.push_str(&escape_symbol(c));
    }
    let _ = writeln!(out, "{line}");
    let mut line = String::from("states");
    for s in states {
        line.push(' ');
        line.push_str(s);
    }
    let _ = writeln!(out, "{line}");
    let _ = writeln!(out, "initial {}", states[initial]);
    let mut line = String::from("final");
    for &f in finals {
        line.push(' ');
        line.push_str(&states[f]);
    }
    let _ = writeln!(out, "{line}");
}

/// Canonical text form of a machine.
pub fn serialize_machine(m: &Machine) -> String {
    let mut out = String::new();
    match m {
        Machine::Transducer(t) => {
            let mut t = t.clone();
            t.normalize();
            t.states = printable_names(&t.states);
            header(
                &mut out,
                &t.name,
                t.kind.token(),
                &t.alphabet,
                &t.states,
                t.initial,
                &t.finals,
            );
            for tr in &t.transitions {
                let _ = writeln!(
                    out,
                    "t {} {} {} {} {}",
                    t.states[tr.src],
                    escape_symbol(tr.sym),
                    escape_word(&tr.out),
                    tr.mv.token(),
                    t.states[tr.dst]
                );
            }
        }
        Machine::Automaton(a) => {
            let mut a = a.clone();
            a.normalize();
            a.states = printable_names(&a.states);
            header(
                &mut out,
                &a.name,
                a.kind.token(),
                &a.alphabet,
                &a.states,
                a.initial,
                &a.finals,
            );
            for e in &a.edges {
                let _ = writeln!(
                    out,
                    "t {} {} {} {}",
                    a.states[e.src],
                    escape_symbol(e.sym),
                    e.mv.token(),
                    a.states[e.dst]
                );
            }
        }
    }
    out
}

pub fn serialize_transducer(t: &Transducer) -> String {
    serialize_machine(&Machine::Transducer(t.clone()))
}

// ---------------------------------------------------------------------------
// evaluation

pub(crate) fn check_word(alphabet: &[Symbol], u: &[Symbol]) -> Result<()> {
    match u.iter().find(|c| !alphabet.contains(c)) {
        Some(c) => Err(Error::domain(format!("symbol `{c}` is not in the alphabet"))),
        None => Ok(()),
    }
}

/// Outputs of the accepting runs of a one-way transducer on `u`.
pub fn eval_oneway(t: &Transducer, u: &[Symbol]) -> Result<BTreeSet<Word>> {
    if !t.kind.is_one_way() {
        return Err(Error::domain(format!(
            "eval_oneway expects an nft or dft, found {}",
            t.kind.token()
        )));
    }
    check_word(&t.alphabet, u)?;
    Ok(eval_forward_only(t, u))
}

/// One-way semantics using only the right-moving transitions of `t`.
pub(crate) fn eval_forward_only(t: &Transducer, u: &[Symbol]) -> BTreeSet<Word> {
    let idx = t.index();
    let mut cur: BTreeSet<(usize, Word)> = BTreeSet::new();
    cur.insert((t.initial, vec![]));
    for &c in u {
        let Some(s) = t.sym_index(c) else {
            return BTreeSet::new();
        };
        let mut next = BTreeSet::new();
        for (q, out) in &cur {
            for &ti in &idx[*q][s] {
                let tr = &t.transitions[ti];
                if tr.mv == Move::Right {
                    let mut o = out.clone();
                    o.extend_from_slice(&tr.out);
                    next.insert((tr.dst, o));
                }
            }
        }
        cur = next;
    }
    cur.into_iter()
        .filter(|(q, _)| t.is_final(*q))
        .map(|(_, o)| o)
        .collect()
}

/// Outputs of the accepting runs of a two-way transducer on `u` whose crossing
/// sequences are at most `crossing_bound` long. Z-shaped kinds only count
/// runs of the forward / backward / forward shape.
pub fn eval_twoway(t: &Transducer, u: &[Symbol], crossing_bound: usize) -> Result<BTreeSet<Word>> {
    if crossing_bound == 0 {
        return Err(Error::domain("crossing bound must be at least 1"));
    }
    check_word(&t.alphabet, u)?;
    if t.kind.is_zshaped() {
        return Ok(crate::runs::zshaped_outputs(t, u));
    }
    if t.kind.is_one_way() {
        return Ok(eval_forward_only(t, u));
    }
    Ok(crate::runs::bounded_outputs(t, u, crossing_bound))
}

/// Evaluates any kind with its natural semantics; two-way kinds use the state count as crossing bound.
pub fn eval(t: &Transducer, u: &[Symbol]) -> Result<BTreeSet<Word>> {
    if t.kind.is_one_way() {
        eval_oneway(t, u)
    } else {
        eval_twoway(t, u, t.states.len().max(1))
    }
}

/// Erases outputs. Z-shaped kinds map to a plain two-way automaton, which
/// over-approximates their shape-filtered domain; see `zmotion::shape_domain`.
pub fn domain_automaton(t: &Transducer) -> Automaton {
    let mut a = Automaton {
        name: format!("{}_dom", t.name),
        kind: if t.kind.is_one_way() {
            AutomatonKind::OneWay
        } else {
            AutomatonKind::TwoWay
        },
        alphabet: t.alphabet.clone(),
        states: t.states.clone(),
        initial: t.initial,
        finals: t.finals.clone(),
        edges: t
            .transitions
            .iter()
            .map(|tr| Edge {
                src: tr.src,
                sym: tr.sym,
                dst: tr.dst,
                mv: tr.mv,
            })
            .collect(),
    };
    a.normalize();
    a
}

/// Right-moving part of `t`, read as a one-way transducer.
pub fn forward_part(t: &Transducer) -> Transducer {
    let mut f = t.clone();
    f.kind = TransducerKind::Nft;
    f.transitions.retain(|tr| tr.mv == Move::Right);
    f
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Functionality {
    Functional,
    /// An input with two distinct outputs.
    Counterexample { input: Word, out1: Word, out2: Word },
}

impl Functionality {
    pub fn is_functional(&self) -> bool {
        matches!(self, Functionality::Functional)
    }
}

/// Delay between two output streams once their common prefix is removed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum Delay {
    /// The first copy is ahead by this word.
    First(Word),
    /// The second copy is ahead by this word.
    Second(Word),
}

impl Delay {
    pub(crate) fn zero() -> Self {
        Delay::First(vec![])
    }

    pub(crate) fn len(&self) -> usize {
        match self {
            Delay::First(w) | Delay::Second(w) => w.len(),
        }
    }

    /// Appends `x` to the first stream and `y` to the second; `None` on mismatch.
    pub(crate) fn step(&self, x: &[Symbol], y: &[Symbol]) -> Option<Delay> {
        let (mut a, mut b) = match self {
            Delay::First(w) => (w.clone(), vec![]),
            Delay::Second(w) => (vec![], w.clone()),
        };
        a.extend_from_slice(x);
        b.extend_from_slice(y);
        let k = a.len().min(b.len());
        if a[..k] != b[..k] {
            return None;
        }
        Some(if a.len() >= b.len() {
            Delay::First(a[k..].to_vec())
        } else {
            Delay::Second(b[k..].to_vec())
        })
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.len() == 0
    }
}

/// Functionality of a one-way transducer by squaring with delay tracking.
pub fn is_functional_oneway(t: &Transducer) -> Result<Functionality> {
    if !t.kind.is_one_way() {
        return Err(Error::domain(format!(
            "is_functional_oneway expects an nft or dft, found {}",
            t.kind.token()
        )));
    }
    let trimmed = trim_oneway(t);
    let t = &trimmed;
    let m = t.states.len();
    let cap = t.max_output_len() * m * m;
    let idx = t.index();
    // Breadth-first over (p, q, delay); parents keep the input and both outputs.
    type Node = (usize, usize, Delay);
    let start: Node = (t.initial, t.initial, Delay::zero());
    let mut parent: HashMap<Node, Option<(Node, Symbol, Word, Word)>> = HashMap::new();
    parent.insert(start.clone(), None);
    let mut queue = VecDeque::from([start]);
    let rebuild = |parent: &HashMap<Node, Option<(Node, Symbol, Word, Word)>>, mut n: Node| {
        let mut input = vec![];
        let mut o1 = vec![];
        let mut o2 = vec![];
        let mut segs = vec![];
        while let Some(Some((p, c, x, y))) = parent.get(&n) {
            segs.push((*c, x.clone(), y.clone()));
            n = p.clone();
        }
        segs.reverse();
        for (c, x, y) in segs {
            input.push(c);
            o1.extend(x);
            o2.extend(y);
        }
        (input, o1, o2)
    };
    while let Some(node) = queue.pop_front() {
        let (p, q, ref d) = node;
        if t.is_final(p) && t.is_final(q) && !d.is_zero() {
            let (input, out1, out2) = rebuild(&parent, node.clone());
            return Ok(Functionality::Counterexample { input, out1, out2 });
        }
        for s in 0..t.alphabet.len() {
            for &i in &idx[p][s] {
                for &j in &idx[q][s] {
                    let (ti, tj) = (&t.transitions[i], &t.transitions[j]);
                    let nd = d.step(&ti.out, &tj.out);
                    let diverged = match &nd {
                        None => true,
                        Some(nd) => nd.len() > cap,
                    };
                    if diverged {
                        // Both copies are co-accessible after a trim, so finish with
                        // any common accepting suffix to exhibit two outputs.
                        if let Some(w) = finish_pair(t, ti.dst, tj.dst) {
                            let (mut input, mut o1, mut o2) = rebuild(&parent, node.clone());
                            input.push(t.alphabet[s]);
                            o1.extend_from_slice(&ti.out);
                            o2.extend_from_slice(&tj.out);
                            input.extend_from_slice(&w.0);
                            o1.extend(w.1);
                            o2.extend(w.2);
                            if o1 != o2 {
                                return Ok(Functionality::Counterexample { input, out1: o1, out2: o2 });
                            }
                        }
                        continue;
                    }
                    let next: Node = (ti.dst, tj.dst, nd.unwrap());
                    if !parent.contains_key(&next) {
                        parent.insert(
                            next.clone(),
                            Some((node.clone(), t.alphabet[s], ti.out.clone(), tj.out.clone())),
                        );
                        queue.push_back(next);
                    }
                }
            }
        }
    }
    Ok(Functionality::Functional)
}

/// Shortest common suffix word leading both states to acceptance, with the two outputs.
fn finish_pair(t: &Transducer, p: usize, q: usize) -> Option<(Word, Word, Word)> {
    let idx = t.index();
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    queue.push_back((p, q, vec![], vec![], vec![]));
    seen.insert((p, q));
    while let Some((a, b, w, o1, o2)) = queue.pop_front() {
        if t.is_final(a) && t.is_final(b) {
            return Some((w, o1, o2));
        }
        for s in 0..t.alphabet.len() {
            for &i in &idx[a][s] {
                for &j in &idx[b][s] {
                    let (ti, tj) = (&t.transitions[i], &t.transitions[j]);
                    if seen.insert((ti.dst, tj.dst)) {
                        let mut w2 = w.clone();
                        w2.push(t.alphabet[s]);
                        let mut x = o1.clone();
                        x.extend_from_slice(&ti.out);
                        let mut y = o2.clone();
                        y.extend_from_slice(&tj.out);
                        queue.push_back((ti.dst, tj.dst, w2, x, y));
                    }
                }
            }
        }
    }
    None
}

/// Keeps only states that are accessible and co-accessible in the forward graph.
pub fn trim_oneway(t: &Transducer) -> Transducer {
    let n = t.states.len();
    let mut fwd = vec![false; n];
    let mut stack = vec![t.initial];
    fwd[t.initial] = true;
    while let Some(q) = stack.pop() {
        for tr in t.transitions.iter().filter(|tr| tr.src == q && tr.mv == Move::Right) {
            if !fwd[tr.dst] {
                fwd[tr.dst] = true;
                stack.push(tr.dst);
            }
        }
    }
    let mut bwd = vec![false; n];
    let mut stack: Vec<usize> = t.finals.iter().copied().collect();
    for &f in &stack {
        bwd[f] = true;
    }
    while let Some(q) = stack.pop() {
        for tr in t.transitions.iter().filter(|tr| tr.dst == q && tr.mv == Move::Right) {
            if !bwd[tr.src] {
                bwd[tr.src] = true;
                stack.push(tr.src);
            }
        }
    }
    let mut out = t.clone();
    out.transitions
        .retain(|tr| tr.mv == Move::Right && fwd[tr.src] && bwd[tr.src] && fwd[tr.dst] && bwd[tr.dst]);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineStats {
    pub state_count: usize,
    pub max_output_len: usize,
    pub alphabet_size: usize,
    #[serde(rename = "K")]
    pub k: usize,
}

impl MachineStats {
    pub fn formula(state_count: usize, max_output_len: usize, alphabet_size: usize) -> usize {
        2 * max_output_len * state_count.pow(3) * alphabet_size
    }

    pub fn is_consistent(&self) -> bool {
        self.k == Self::formula(self.state_count, self.max_output_len, self.alphabet_size)
    }
}

pub fn machine_stats(t: &Transducer) -> MachineStats {
    let m = t.states.len();
    let o = t.max_output_len();
    let s = t.alphabet.len();
    MachineStats {
        state_count: m,
        max_output_len: o,
        alphabet_size: s,
        k: MachineStats::formula(m, o, s),
    }
}

/// A finite set of input/output pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub pairs: BTreeSet<(Word, Word)>,
}

impl Relation {
    pub fn is_functional(&self) -> bool {
        let mut seen: BTreeMap<&Word, &Word> = BTreeMap::new();
        self.pairs
            .iter()
            .all(|(u, v)| seen.insert(u, v).is_none_or(|prev| prev == v))
    }

    pub fn domain(&self) -> BTreeSet<Word> {
        self.pairs.iter().map(|(u, _)| u.clone()).collect()
    }

    pub fn is_subset(&self, other: &Relation) -> bool {
        self.pairs.is_subset(&other.pairs)
    }

    pub fn render_pairs(&self) -> Vec<(String, String)> {
        self.pairs
            .iter()
            .map(|(u, v)| (render(u), render(v)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::words::word;

    #[test]
    fn t0_round_trip() {
        let t0 = fixtures::t0();
        let text = serialize_transducer(&t0);
        let back = parse_transducer(&text).unwrap();
        assert_eq!(back, t0);
        assert_eq!(serialize_transducer(&back), text);
    }

    #[test]
    fn t2_transition_lines() {
        // seven transition schemes, three of them ranging over both letters
        let text = serialize_transducer(&fixtures::t2());
        assert_eq!(text.lines().filter(|l| l.starts_with("t ")).count(), 10);
    }

    #[test]
    fn kind_violation() {
        let text = "machine bad\ntype nft\nalphabet a\nstates p\ninitial p\nfinal p\nt p a a -1 p\n";
        match parse_machine(text) {
            Err(Error::KindViolation { line, .. }) => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn located_errors() {
        let text = "machine m\ntype nft\nalphabet a\nstates p\ninitial p\nfinal p\nt p b a +1 p\n";
        assert!(matches!(
            parse_machine(text),
            Err(Error::UnknownSymbol { line: 7, .. })
        ));
        let text = "machine m\ntype nft\nalphabet a\nstates p\ninitial p\nfinal p\nt p a a +1 r\n";
        assert!(matches!(
            parse_machine(text),
            Err(Error::UnknownState { line: 7, .. })
        ));
        let text = "machine m\ntype nft\nalphabet a\nstates p\ninitial p\nfinal p\nt p a a +2 p\n";
        assert!(matches!(
            parse_machine(text),
            Err(Error::Syntax { line: 7, column: 9, .. })
        ));
        let text = "machine m\ntype weird\n";
        assert!(matches!(
            parse_machine(text),
            Err(Error::Syntax { line: 2, column: 6, .. })
        ));
    }

    #[test]
    fn empty_transition_section() {
        let mut t = Transducer::new("e", TransducerKind::Nft, &['a']);
        t.set_initial("p");
        let text = serialize_transducer(&t);
        assert_eq!(text, "machine e\ntype nft\nalphabet a\nstates p\ninitial p\nfinal\n");
        assert_eq!(parse_transducer(&text).unwrap(), t);
    }

    #[test]
    fn escapes() {
        let mut t = Transducer::new("esc", TransducerKind::Nft, &['e', 'p', 's', '#']);
        t.set_initial("q");
        t.add("q", 'e', "eps", "q", Move::Right);
        t.add("q", '#', "#e", "q", Move::Right);
        t.set_final("q");
        let text = serialize_transducer(&t);
        assert!(text.contains("t q e \\eps +1 q"));
        assert!(text.contains("t q \\h \\he +1 q"));
        let back = parse_transducer(&text).unwrap();
        assert_eq!(back.transitions, {
            let mut c = t.clone();
            c.normalize();
            c.transitions
        });
    }

    #[test]
    fn oneway_eval_examples() {
        let t0 = fixtures::t0();
        let t1 = fixtures::t1();
        assert_eq!(eval_oneway(&t0, &word("ba")).unwrap(), BTreeSet::from([word("aa")]));
        assert!(eval_oneway(&t0, &word("ab")).unwrap().is_empty());
        assert_eq!(eval_oneway(&t1, &word("ab")).unwrap(), BTreeSet::from([word("bb")]));
        assert_eq!(eval_oneway(&t1, &word("aa")).unwrap(), BTreeSet::from([word("aa")]));
        assert!(eval_oneway(&t0, &word("ac")).is_err());
    }

    #[test]
    fn twoway_eval_examples() {
        let t2 = fixtures::t2();
        assert_eq!(
            eval_twoway(&t2, &word("#ab#"), 3).unwrap(),
            BTreeSet::from([word("#ba#")])
        );
        assert!(eval_twoway(&t2, &word("#"), 3).unwrap().is_empty());
    }

    #[test]
    fn stats() {
        assert_eq!(machine_stats(&fixtures::t2()).k, 750);
        let mut t = Transducer::new("one", TransducerKind::Nft, &['a']);
        t.add("p", 'a', "a", "p", Move::Right);
        let s = machine_stats(&t);
        assert_eq!((s.state_count, s.max_output_len, s.k), (1, 1, 2));
        assert!(s.is_consistent());
        let mut t = Transducer::new("eps", TransducerKind::Nft, &['a', 'b']);
        t.add("p", 'a', "", "q", Move::Right);
        assert_eq!(machine_stats(&t).k, 0);
    }

    #[test]
    fn functionality_examples() {
        assert!(is_functional_oneway(&fixtures::t1()).unwrap().is_functional());
        assert!(is_functional_oneway(&fixtures::t0()).unwrap().is_functional());
        let mut t = Transducer::new("two", TransducerKind::Nft, &['a']);
        t.set_initial("q0");
        t.add("q0", 'a', "a", "qf", Move::Right);
        t.add("q0", 'a', "aa", "qf", Move::Right);
        t.set_final("qf");
        match is_functional_oneway(&t).unwrap() {
            Functionality::Counterexample { input, out1, out2 } => {
                assert_eq!(input, word("a"));
                let outs = BTreeSet::from([out1, out2]);
                assert_eq!(outs, BTreeSet::from([word("a"), word("aa")]));
            }
            Functionality::Functional => panic!("should not be functional"),
        }
    }

    #[test]
    fn awkward_state_names_serialize() {
        let mut t = Transducer::new("m", TransducerKind::Nft, &['a']);
        t.states = vec!["(1, 2)".into(), "(1,_2)".into(), "(1,_2)".into()];
        t.initial = 0;
        t.finals.insert(2);
        t.transitions.push(Transition { src: 0, sym: 'a', out: word("a"), dst: 1, mv: Move::Right });
        t.transitions.push(Transition { src: 1, sym: 'a', out: vec![], dst: 2, mv: Move::Right });
        let back = parse_transducer(&serialize_transducer(&t)).unwrap();
        assert_eq!(back.states, ["(1,_2)", "(1,_2)~1", "(1,_2)~2"]);
        assert_eq!(eval(&back, &word("aa")).unwrap(), eval(&t, &word("aa")).unwrap());
    }
}
