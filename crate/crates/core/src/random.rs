//! Seeded random machines for property tests and benchmarks.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::automata::{Automaton, AutomatonKind, Edge};
use crate::machines::{Move, Transducer, TransducerKind, Transition};
use crate::words::Symbol;

/// A two-way automaton with 1 to `max_states` states; each possible edge is
/// present with probability `density`.
pub fn random_two_way_automaton(seed: u64, max_states: usize, alphabet: &[Symbol], density: f64) -> Automaton {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_states.max(1));
    let mut edges = vec![];
    for src in 0..n {
        for &sym in alphabet {
            for dst in 0..n {
                for mv in [Move::Right, Move::Left] {
                    if rng.gen_bool(density) {
                        edges.push(Edge { src, sym, dst, mv });
                    }
                }
            }
        }
    }
    let finals: BTreeSet<usize> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
    let mut a = Automaton {
        name: format!("rand2nfa_{seed}"),
        kind: AutomatonKind::TwoWay,
        alphabet: alphabet.to_vec(),
        states: (0..n).map(|i| format!("s{i}")).collect(),
        initial: 0,
        finals,
        edges,
    };
    a.normalize();
    a
}

/// A one-way transducer with 1 to `max_states` states and outputs of length
/// at most `max_out` over `alphabet`.
pub fn random_nft(seed: u64, max_states: usize, alphabet: &[Symbol], max_out: usize, density: f64) -> Transducer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_states.max(1));
    let mut t = Transducer::new(format!("randnft_{seed}"), TransducerKind::Nft, alphabet);
    t.states = (0..n).map(|i| format!("s{i}")).collect();
    t.initial = 0;
    for src in 0..n {
        for &sym in alphabet {
            for dst in 0..n {
                if rng.gen_bool(density) {
                    let len = rng.gen_range(0..=max_out);
                    let out = (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
                    t.transitions.push(Transition {
                        src,
                        sym,
                        out,
                        dst,
                        mv: Move::Right,
                    });
                }
            }
        }
    }
    t.finals = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
    t.normalize();
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_machine() {
        let ab = ['a', 'b'];
        assert_eq!(random_nft(7, 4, &ab, 2, 0.3), random_nft(7, 4, &ab, 2, 0.3));
        assert_eq!(
            random_two_way_automaton(7, 4, &ab, 0.2),
            random_two_way_automaton(7, 4, &ab, 0.2)
        );
    }
}
