//! Command-line front end: argument parsing, dispatch and report formatting.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::automata::{nfa_accepts, nfa_equivalent, twoway_accepts, twoway_to_oneway, Automaton, AutomatonKind, Equivalence};
use crate::definability::{
    decide_oneway_definable, decide_znft_definable, is_subsequential, squeeze_transducer, DefinabilityConfig,
    DefinabilityVerdict, Outcome, Subsequentiality, Witness,
};
use crate::error::{Error, Result};
use crate::machines::{
    domain_automaton, eval, eval_twoway, is_functional_oneway, parse_machine, parse_transducer, serialize_machine,
    serialize_transducer, Functionality, Machine, Transducer,
};
use crate::oracle::{domain_words, enumerate_relation, p1_violation_search, relations_equal_up_to, RelationComparison};
use crate::words::{render, word, Word};
use crate::zmotion::shape_domain;

const DEFAULT_MAX_LEN: usize = 5;
const DOMAIN_LISTING_LIMIT: usize = 64;

#[derive(Debug, Parser)]
#[command(name = "twoway", version, about = "Two-way to one-way transducer definability workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Longest word enumerated by bounded checks.
    #[arg(long, global = true)]
    pub max_len: Option<usize>,

    /// Decomposition bound used instead of the machine's own constant.
    #[arg(long, global = true)]
    pub k_override: Option<usize>,

    /// Cap on squeeze rounds.
    #[arg(long, global = true)]
    pub max_iterations: Option<usize>,

    /// Longest crossing sequence explored when running two-way machines.
    #[arg(long, global = true)]
    pub crossing_bound: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Outputs of a transducer on a word, or acceptance for an automaton.
    Eval { file: PathBuf, word: String },
    /// One-way automaton for the domain.
    Domain { file: PathBuf },
    /// Whether a transducer realizes a partial function.
    Functional { file: PathBuf },
    /// Equivalence of two machines.
    Equiv { file1: PathBuf, file2: PathBuf },
    /// Crossing-sequence conversion of a two-way automaton.
    ToOneway { file: PathBuf },
    /// Decide one-way definability of a transducer.
    Definable { file: PathBuf },
    /// One squeeze round on a two-way transducer.
    Squeeze { file: PathBuf },
    /// Twinning check on a one-way transducer.
    Subsequential { file: PathBuf },
    /// Brute-force relation of one machine, or bounded comparison of two.
    Oracle { file1: PathBuf, file2: Option<PathBuf> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

/// The sign of an answer, which fixes the exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Positive,
    Negative,
    BoundExceeded,
    InputError,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Positive => 0,
            Verdict::Negative => 1,
            Verdict::BoundExceeded => 2,
            Verdict::InputError => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOutcome {
    pub verdict: Verdict,
    /// First line of the text report.
    pub conclusion: String,
    /// Further human-readable lines.
    pub lines: Vec<String>,
    pub details: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub inputs: Value,
    pub outcome: ReportOutcome,
    /// Witness machines in file format and witness words, by name.
    pub witnesses: Map<String, Value>,
    pub bounds_used: Value,
    pub timing_ms: u64,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        self.outcome.verdict.exit_code()
    }
}

pub fn format_report(r: &Report, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string(r).expect("reports serialize"),
        Format::Text => {
            let mut out = r.outcome.conclusion.clone();
            for l in &r.outcome.lines {
                out.push('\n');
                out.push_str(l);
            }
            out
        }
    }
}

/// What the process should print and return.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub status: i32,
    pub stdout: String,
    pub stderr: String,
    pub report: Option<Report>,
}

/// Parses `argv` (program name first), runs the command and formats the report.
pub fn run_command<I, T>(argv: I) -> Invocation
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Invocation {
                    status: 0,
                    stdout: text,
                    stderr: String::new(),
                    report: None,
                },
                _ => Invocation {
                    status: 3,
                    stdout: String::new(),
                    stderr: text,
                    report: None,
                },
            };
        }
    };
    let started = Instant::now();
    let mut report = execute(&cli);
    report.timing_ms = started.elapsed().as_millis() as u64;
    let text = format_report(&report, cli.format);
    let mut inv = Invocation {
        status: report.exit_code(),
        stdout: String::new(),
        stderr: String::new(),
        report: Some(report),
    };
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, format!("{text}\n")) {
                inv.status = 3;
                inv.stderr = format!("cannot write {}: {e}", path.display());
            }
        }
        None => inv.stdout = text,
    }
    inv
}

fn config_of(cli: &Cli) -> DefinabilityConfig {
    let mut c = DefinabilityConfig {
        k_override: cli.k_override,
        max_squeeze_iterations: cli.max_iterations,
        ..Default::default()
    };
    if let Some(cb) = cli.crossing_bound {
        c.crossing_bound = cb;
    }
    c
}

fn bounds_of(cli: &Cli) -> Value {
    let c = config_of(cli);
    json!({
        "max_len": cli.max_len,
        "k_override": c.k_override,
        "max_iterations": c.max_squeeze_iterations,
        "crossing_bound": c.crossing_bound,
        "oracle_word_bound": c.oracle_word_bound,
        "state_budget": c.state_budget,
    })
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Eval { .. } => "eval",
        Command::Domain { .. } => "domain",
        Command::Functional { .. } => "functional",
        Command::Equiv { .. } => "equiv",
        Command::ToOneway { .. } => "to-oneway",
        Command::Definable { .. } => "definable",
        Command::Squeeze { .. } => "squeeze",
        Command::Subsequential { .. } => "subsequential",
        Command::Oracle { .. } => "oracle",
    }
}

fn inputs_of(c: &Command) -> Value {
    let p = |f: &PathBuf| Value::String(f.display().to_string());
    match c {
        Command::Eval { file, word } => json!({ "files": [p(file)], "word": word }),
        Command::Domain { file }
        | Command::Functional { file }
        | Command::ToOneway { file }
        | Command::Definable { file }
        | Command::Squeeze { file }
        | Command::Subsequential { file } => json!({ "files": [p(file)] }),
        Command::Equiv { file1, file2 } => json!({ "files": [p(file1), p(file2)] }),
        Command::Oracle { file1, file2 } => {
            let mut fs = vec![p(file1)];
            fs.extend(file2.iter().map(p));
            json!({ "files": fs })
        }
    }
}

/// Body of a report before the shared fields are filled in.
struct Answer {
    verdict: Verdict,
    conclusion: String,
    lines: Vec<String>,
    details: Value,
    witnesses: Map<String, Value>,
}

impl Answer {
    fn new(verdict: Verdict, conclusion: impl Into<String>) -> Self {
        Answer {
            verdict,
            conclusion: conclusion.into(),
            lines: vec![],
            details: Value::Null,
            witnesses: Map::new(),
        }
    }

    fn details(mut self, d: Value) -> Self {
        self.details = d;
        self
    }

    fn witness(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.witnesses.insert(key.into(), v.into());
        self
    }

    fn line(mut self, l: impl Into<String>) -> Self {
        self.lines.push(l.into());
        self
    }
}

fn execute(cli: &Cli) -> Report {
    let answer = dispatch(cli).unwrap_or_else(|e| match e {
        Error::BoundExceeded(m) => Answer::new(Verdict::BoundExceeded, format!("BOUND EXCEEDED: {m}")),
        e => Answer::new(Verdict::InputError, format!("ERROR: {e}")),
    });
    Report {
        command: command_name(&cli.command).into(),
        inputs: inputs_of(&cli.command),
        outcome: ReportOutcome {
            verdict: answer.verdict,
            conclusion: answer.conclusion,
            lines: answer.lines,
            details: answer.details,
        },
        witnesses: answer.witnesses,
        bounds_used: bounds_of(cli),
        timing_ms: 0,
    }
}

fn load(path: &PathBuf) -> Result<Machine> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_machine(&text)
}

fn load_transducer(path: &PathBuf) -> Result<Transducer> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_transducer(&text)
}

fn one_way(a: &Automaton) -> Result<Automaton> {
    match a.kind {
        AutomatonKind::OneWay => Ok(a.clone()),
        AutomatonKind::TwoWay => twoway_to_oneway(a),
    }
}

fn shown(w: &[char]) -> String {
    if w.is_empty() {
        "ε".into()
    } else {
        render(w)
    }
}

fn parse_word(m: &Machine, s: &str) -> Result<Word> {
    let w = word(s);
    if let Some(c) = w.iter().find(|c| !m.alphabet().contains(c)) {
        return Err(Error::domain(format!("symbol `{c}` is not in the alphabet")));
    }
    Ok(w)
}

fn dispatch(cli: &Cli) -> Result<Answer> {
    let cfg = config_of(cli);
    match &cli.command {
        Command::Eval { file, word } => {
            let m = load(file)?;
            let u = parse_word(&m, word)?;
            match &m {
                Machine::Automaton(a) => {
                    let ok = match a.kind {
                        AutomatonKind::OneWay => nfa_accepts(a, &u),
                        AutomatonKind::TwoWay => twoway_accepts(a, &u, cfg.crossing_bound),
                    };
                    Ok(if ok {
                        Answer::new(Verdict::Positive, "ACCEPTED")
                    } else {
                        Answer::new(Verdict::Negative, "REJECTED")
                    })
                }
                Machine::Transducer(t) => {
                    let outs = match cli.crossing_bound {
                        Some(cb) => eval_twoway(t, &u, cb)?,
                        None => eval(t, &u)?,
                    };
                    let rendered: Vec<String> = outs.iter().map(|o| shown(o)).collect();
                    let Some((first, rest)) = rendered.split_first() else {
                        return Ok(Answer::new(Verdict::Negative, "NO OUTPUT (word outside the domain)")
                            .details(json!({ "outputs": [] })));
                    };
                    let mut a = Answer::new(Verdict::Positive, first.clone()).details(json!({ "outputs": rendered }));
                    for r in rest {
                        a = a.line(r.clone());
                    }
                    Ok(a)
                }
            }
        }
        Command::Domain { file } => {
            let m = load(file)?;
            let dom = match &m {
                Machine::Automaton(a) => one_way(a)?,
                Machine::Transducer(t) if t.kind.is_zshaped() => shape_domain(t, cfg.state_budget)?,
                Machine::Transducer(t) => one_way(&domain_automaton(t))?,
            };
            let len = cli.max_len.unwrap_or(DEFAULT_MAX_LEN);
            let words: Vec<String> = domain_words(&dom, len, DOMAIN_LISTING_LIMIT).iter().map(|w| shown(w)).collect();
            let text = serialize_machine(&Machine::Automaton(dom.clone()));
            let verdict = if words.is_empty() && crate::automata::nfa_empty(&dom)? {
                Verdict::Negative
            } else {
                Verdict::Positive
            };
            let head = if verdict == Verdict::Negative { "EMPTY DOMAIN" } else { "DOMAIN" };
            let mut a = Answer::new(verdict, format!("{head} ({} states)", dom.states.len()))
                .details(json!({ "states": dom.states.len(), "words": words }))
                .witness("witness_machine", text.clone());
            a = a.line(format!("words up to length {len}: {}", words.join(" ")));
            Ok(a.line(text.trim_end().to_string()))
        }
        Command::Functional { file } => {
            let t = load_transducer(file)?;
            if t.kind.is_one_way() {
                return Ok(match is_functional_oneway(&t)? {
                    Functionality::Functional => Answer::new(Verdict::Positive, "FUNCTIONAL").details(json!({ "exact": true })),
                    Functionality::Counterexample { input, out1, out2 } => {
                        Answer::new(Verdict::Negative, format!("NOT FUNCTIONAL on {}", shown(&input)))
                            .details(json!({ "exact": true }))
                            .witness("input", shown(&input))
                            .witness("outputs", json!([shown(&out1), shown(&out2)]))
                    }
                });
            }
            let len = cli.max_len.unwrap_or(DEFAULT_MAX_LEN);
            let rel = enumerate_relation(&t, len, cfg.crossing_bound);
            Ok(match rel.ambiguous_inputs().first() {
                None => Answer::new(Verdict::Positive, format!("FUNCTIONAL up to length {len}"))
                    .details(json!({ "exact": false })),
                Some(u) => {
                    let outs: Vec<String> = rel.pairs.iter().filter(|(x, _)| x == u).map(|(_, v)| shown(v)).collect();
                    Answer::new(Verdict::Negative, format!("NOT FUNCTIONAL on {}", shown(u)))
                        .details(json!({ "exact": false }))
                        .witness("input", shown(u))
                        .witness("outputs", outs)
                }
            })
        }
        Command::Equiv { file1, file2 } => {
            let (m1, m2) = (load(file1)?, load(file2)?);
            match (&m1, &m2) {
                (Machine::Automaton(a), Machine::Automaton(b)) => Ok(match nfa_equivalent(&one_way(a)?, &one_way(b)?)? {
                    Equivalence::Equivalent => Answer::new(Verdict::Positive, "EQUIVALENT").details(json!({ "exact": true })),
                    Equivalence::Counterexample(w) => {
                        Answer::new(Verdict::Negative, format!("NOT EQUIVALENT on {}", shown(&w)))
                            .details(json!({ "exact": true }))
                            .witness("word", shown(&w))
                    }
                }),
                (Machine::Transducer(a), Machine::Transducer(b)) => {
                    let len = cli.max_len.unwrap_or(DEFAULT_MAX_LEN);
                    compare(a, b, len, cfg.crossing_bound, "EQUIVALENT up to length", "NOT EQUIVALENT on")
                }
                _ => Err(Error::domain("equiv needs two automata or two transducers")),
            }
        }
        Command::ToOneway { file } => match load(file)? {
            Machine::Automaton(a) => {
                let o = twoway_to_oneway(&a)?;
                let text = serialize_machine(&Machine::Automaton(o.clone()));
                Ok(Answer::new(Verdict::Positive, format!("ONE-WAY ({} states)", o.states.len()))
                    .details(json!({ "states": o.states.len() }))
                    .witness("witness_machine", text.clone())
                    .line(text.trim_end().to_string()))
            }
            Machine::Transducer(_) => Err(Error::domain(
                "to-oneway converts automata; use `definable` for transducers",
            )),
        },
        Command::Definable { file } => {
            let t = load_transducer(file)?;
            let v = if t.kind.is_zshaped() {
                decide_znft_definable(&t, &cfg)?
            } else {
                decide_oneway_definable(&t, &cfg)?
            };
            definable_answer(&t, &v, cli.max_len)
        }
        Command::Squeeze { file } => {
            let t = load_transducer(file)?;
            Ok(match squeeze_transducer(&t, &cfg)? {
                Some(s) => {
                    let text = serialize_transducer(&s);
                    Answer::new(Verdict::Positive, format!("SQUEEZED ({} states)", s.states.len()))
                        .details(json!({ "states": s.states.len() }))
                        .witness("witness_machine", text.clone())
                        .line(text.trim_end().to_string())
                }
                None => Answer::new(Verdict::Negative, "NO SQUEEZE (a z-motion component is not one-way definable)"),
            })
        }
        Command::Subsequential { file } => {
            let t = load_transducer(file)?;
            Ok(match is_subsequential(&t)? {
                Subsequentiality::Subsequential => Answer::new(Verdict::Positive, "SUBSEQUENTIAL"),
                Subsequentiality::Diverging { input, out1, out2 } => {
                    Answer::new(Verdict::Negative, format!("NOT SUBSEQUENTIAL (diverging on {})", shown(&input)))
                        .witness("input", shown(&input))
                        .witness("outputs", json!([shown(&out1), shown(&out2)]))
                }
            })
        }
        Command::Oracle { file1, file2 } => {
            let len = cli.max_len.unwrap_or(DEFAULT_MAX_LEN);
            let a = load_transducer(file1)?;
            match file2 {
                Some(f2) => {
                    let b = load_transducer(f2)?;
                    compare(&a, &b, len, cfg.crossing_bound, "equal at bound", "differ on")
                }
                None => {
                    let rel = enumerate_relation(&a, len, cfg.crossing_bound);
                    let pairs: Vec<(String, String)> =
                        rel.pairs.iter().map(|(u, v)| (shown(u), shown(v))).collect();
                    let mut ans = Answer::new(Verdict::Positive, format!("{} pairs at bound {len}", pairs.len()))
                        .details(json!({ "pairs": pairs.len(), "functional": rel.ambiguous_inputs().is_empty() }))
                        .witness("pairs", serde_json::to_value(&pairs).expect("pairs serialize"));
                    for (u, v) in &pairs {
                        ans = ans.line(format!("{u} -> {v}"));
                    }
                    Ok(ans)
                }
            }
        }
    }
}

fn compare(a: &Transducer, b: &Transducer, len: usize, cb: usize, same: &str, differ: &str) -> Result<Answer> {
    Ok(match relations_equal_up_to(a, b, len, cb)? {
        RelationComparison::Equal => Answer::new(Verdict::Positive, format!("{same} {len}")).details(json!({ "exact": false })),
        RelationComparison::Differ { input, left, right } => {
            let l: Vec<String> = left.iter().map(|w| shown(w)).collect();
            let r: Vec<String> = right.iter().map(|w| shown(w)).collect();
            Answer::new(Verdict::Negative, format!("{differ} {}", shown(&input)))
                .details(json!({ "exact": false }))
                .witness("word", shown(&input))
                .witness("left_outputs", l)
                .witness("right_outputs", r)
        }
    })
}

fn definable_answer(t: &Transducer, v: &DefinabilityVerdict, max_len: Option<usize>) -> Result<Answer> {
    let details = json!({
        "outcome": v.outcome,
        "iterations_used": v.iterations_used,
        "k_used": v.k_used,
        "k_is_complete": v.k_is_complete,
    });
    let ans = match (&v.outcome, &v.witness) {
        (Outcome::Definable, Some(Witness::Machine(w))) => {
            let text = serialize_transducer(w);
            Answer::new(Verdict::Positive, format!("DEFINABLE (witness: {} states)", w.states.len()))
                .witness("witness_machine", text.clone())
                .line(text.trim_end().to_string())
        }
        (Outcome::NotDefinable, Some(Witness::Refutation(r))) => {
            let mut a = Answer::new(
                Verdict::Negative,
                format!("NOT DEFINABLE ({})", serde_json::to_value(r.kind).expect("kind serializes").as_str().unwrap_or("")),
            );
            if !v.k_is_complete {
                a = a.line(format!("refuted at K = {}, below the machine's own bound", v.k_used));
            }
            if let Some(w) = &r.word {
                a = a.witness("word", shown(w)).line(format!("word: {}", shown(w)));
            }
            if let Some(c) = &r.component {
                a = a.witness("component", c.clone()).line(format!("component: {c}"));
            }
            // a brute-force word the failing z-shaped machine cannot split at this K
            let z = match &r.component_machine {
                Some(text) => {
                    a = a.witness("component_machine", text.clone());
                    Some(parse_transducer(text)?)
                }
                None if t.kind.is_zshaped() => Some(t.clone()),
                None => None,
            };
            if let (Some(z), Some(len)) = (z, max_len) {
                if let Some(p) = p1_violation_search(&z, len, v.k_used)? {
                    a = a
                        .witness("violation_word", shown(&p.word))
                        .witness("violation_output", shown(&p.output))
                        .line(format!("unsplittable: {} -> {}", shown(&p.word), shown(&p.output)));
                }
            }
            a
        }
        (_, Some(Witness::Exhausted(why))) => Answer::new(
            Verdict::BoundExceeded,
            format!("BOUND EXCEEDED: {}", why.trim_start_matches("bound exceeded: ")),
        ),
        _ => return Err(Error::domain("verdict without evidence")),
    };
    Ok(ans.details(details))
}
