//! Word combinatorics: primitive roots, conjugacy, periodic decompositions.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Symbol = char;
pub type Word = Vec<Symbol>;

pub fn word(s: &str) -> Word {
    s.chars().collect()
}

pub fn render(w: &[Symbol]) -> String {
    w.iter().collect()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn power(u: &[Symbol], k: usize) -> Word {
    let mut out = Vec::with_capacity(u.len() * k);
    for _ in 0..k {
        out.extend_from_slice(u);
    }
    out
}

/// Shortest `v` with `u = v^k`.
pub fn primitive_root(u: &[Symbol]) -> Result<Word> {
    if u.is_empty() {
        return Err(Error::domain("primitive root of the empty word"));
    }
    let n = u.len();
    for p in 1..=n {
        if n % p == 0 && (p..n).all(|i| u[i] == u[i - p]) {
            return Ok(u[..p].to_vec());
        }
    }
    unreachable!("p = n always divides n")
}

pub fn is_factor(needle: &[Symbol], hay: &[Symbol]) -> bool {
    needle.is_empty() || hay.windows(needle.len()).any(|w| w == needle)
}

pub fn are_conjugate(u: &[Symbol], v: &[Symbol]) -> bool {
    if u.len() != v.len() {
        return false;
    }
    if u.is_empty() {
        return true;
    }
    let uu = power(u, 2);
    is_factor(v, &uu)
}

pub fn mirror_word(u: &[Symbol]) -> Word {
    u.iter().rev().copied().collect()
}

/// True iff `u^n` and `v^n` share a factor of length `|u| + |v| - gcd(|u|, |v|)`.
pub fn fine_wilf_premise_holds(u: &[Symbol], v: &[Symbol], n: usize) -> bool {
    if u.is_empty() || v.is_empty() {
        return false;
    }
    let need = u.len() + v.len() - gcd(u.len(), v.len());
    let un = power(u, n);
    let vn = power(v, n);
    if un.len() < need || vn.len() < need {
        return false;
    }
    let factors: HashSet<&[Symbol]> = un.windows(need).collect();
    vn.windows(need).any(|w| factors.contains(w))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicDecomposition {
    pub t1: Word,
    pub t2: Word,
    pub repeat_count: usize,
    pub t3: Word,
}

impl PeriodicDecomposition {
    pub fn reconstruct(&self) -> Word {
        let mut out = self.t1.clone();
        out.extend(power(&self.t2, self.repeat_count));
        out.extend_from_slice(&self.t3);
        out
    }
}

/// Splits `z` as `t1 · t2^k · t3` with every piece at most `max_piece_len` long.
///
/// Among all such splits the one with the lexicographically least
/// `(|t1|, |t2|, |t3|)` is returned, ties going to the smallest `k`.
pub fn periodic_decompose(z: &[Symbol], max_piece_len: usize) -> Option<PeriodicDecomposition> {
    let n = z.len();
    for a in 0..=max_piece_len.min(n) {
        for b in 0..=max_piece_len {
            for c in 0..=max_piece_len.min(n - a) {
                let middle = &z[a..n - c];
                let found = if middle.is_empty() {
                    Some((vec![], 0))
                } else if b == 0 || middle.len() % b != 0 {
                    None
                } else {
                    let t2 = &middle[..b];
                    let periodic = middle.chunks(b).all(|ch| ch == t2);
                    periodic.then(|| (t2.to_vec(), middle.len() / b))
                };
                if let Some((t2, k)) = found {
                    if middle.is_empty() && b > 0 {
                        // same split already reported with b = 0
                        continue;
                    }
                    return Some(PeriodicDecomposition {
                        t1: z[..a].to_vec(),
                        t2,
                        repeat_count: k,
                        t3: z[n - c..].to_vec(),
                    });
                }
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArithmeticFamilyWitness {
    pub beta1: Word,
    pub beta2: Word,
    pub beta3: Word,
}

impl ArithmeticFamilyWitness {
    pub fn member(&self, k: usize) -> Word {
        let mut out = self.beta1.clone();
        out.extend(power(&self.beta2, k));
        out.extend_from_slice(&self.beta3);
        out
    }
}

/// Fits `family[k] = beta1 · beta2^k · beta3`.
pub fn fit_arithmetic_family(family: &[Word]) -> Result<Option<ArithmeticFamilyWitness>> {
    if family.len() < 3 {
        return Err(Error::domain(
            "an arithmetic family needs at least three members",
        ));
    }
    let f0 = &family[0];
    let f1 = &family[1];
    if f1.len() < f0.len() {
        return Ok(None);
    }
    let d = f1.len() - f0.len();
    if family
        .iter()
        .enumerate()
        .any(|(k, f)| f.len() != f0.len() + k * d)
    {
        return Ok(None);
    }
    for i in 0..=f0.len() {
        let cand = ArithmeticFamilyWitness {
            beta1: f0[..i].to_vec(),
            beta2: f1[i..i + d].to_vec(),
            beta3: f0[i..].to_vec(),
        };
        if family.iter().enumerate().all(|(k, f)| &cand.member(k) == f) {
            return Ok(Some(cand));
        }
    }
    Ok(None)
}

/// Two-parameter variant: `grid[k1][k2] = b1 · b2^k1 · b3 · b4^k2 · b5`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoLoopWitness {
    pub beta1: Word,
    pub beta2: Word,
    pub beta3: Word,
    pub beta4: Word,
    pub beta5: Word,
}

impl TwoLoopWitness {
    pub fn member(&self, k1: usize, k2: usize) -> Word {
        let mut out = self.beta1.clone();
        out.extend(power(&self.beta2, k1));
        out.extend_from_slice(&self.beta3);
        out.extend(power(&self.beta4, k2));
        out.extend_from_slice(&self.beta5);
        out
    }
}

pub fn fit_two_loop_family(grid: &[Vec<Word>]) -> Result<Option<TwoLoopWitness>> {
    if grid.len() < 2 || grid.iter().any(|row| row.len() < 2) {
        return Err(Error::domain("a two-loop family needs a grid of at least 2x2"));
    }
    let g00 = &grid[0][0];
    let (g10, g01) = (&grid[1][0], &grid[0][1]);
    if g10.len() < g00.len() || g01.len() < g00.len() {
        return Ok(None);
    }
    let d1 = g10.len() - g00.len();
    let d2 = g01.len() - g00.len();
    for i in 0..=g00.len() {
        for j in i..=g00.len() {
            let cand = TwoLoopWitness {
                beta1: g00[..i].to_vec(),
                beta2: g10[i..i + d1].to_vec(),
                beta3: g00[i..j].to_vec(),
                beta4: g01[j..j + d2].to_vec(),
                beta5: g00[j..].to_vec(),
            };
            let ok = grid.iter().enumerate().all(|(k1, row)| {
                row.iter()
                    .enumerate()
                    .all(|(k2, g)| &cand.member(k1, k2) == g)
            });
            if ok {
                return Ok(Some(cand));
            }
        }
    }
    Ok(None)
}

/// All words over `alphabet` of length exactly `len`, in length-lexicographic order.
pub fn words_of_length(alphabet: &[Symbol], len: usize) -> Vec<Word> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        let mut next = Vec::with_capacity(out.len() * alphabet.len());
        for w in &out {
            for &a in alphabet {
                let mut w2 = w.clone();
                w2.push(a);
                next.push(w2);
            }
        }
        out = next;
    }
    out
}

/// All words over `alphabet` of length at most `max_len`, shortest first.
pub fn words_up_to(alphabet: &[Symbol], max_len: usize) -> Vec<Word> {
    (0..=max_len)
        .flat_map(|l| words_of_length(alphabet, l))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        word(s)
    }

    #[test]
    fn roots() {
        assert_eq!(primitive_root(&w("abab")).unwrap(), w("ab"));
        assert_eq!(primitive_root(&w("aab")).unwrap(), w("aab"));
        assert_eq!(primitive_root(&w("aaaa")).unwrap(), w("a"));
        assert!(primitive_root(&[]).is_err());
    }

    #[test]
    fn conjugacy() {
        assert!(are_conjugate(&w("ab"), &w("ba")));
        assert!(are_conjugate(&w("aab"), &w("aba")));
        assert!(!are_conjugate(&w("ab"), &w("aa")));
        assert!(are_conjugate(&[], &[]));
        assert!(!are_conjugate(&[], &w("a")));
    }

    #[test]
    fn mirrors() {
        assert_eq!(mirror_word(&w("abc")), w("cba"));
        assert_eq!(mirror_word(&[]), Vec::<char>::new());
        assert_eq!(mirror_word(&w("aa")), w("aa"));
    }

    #[test]
    fn fine_wilf_examples() {
        assert!(fine_wilf_premise_holds(&w("ab"), &w("ba"), 2));
        assert!(!fine_wilf_premise_holds(&w("ab"), &w("cd"), 5));
        assert!(fine_wilf_premise_holds(&w("a"), &w("a"), 1));
    }

    #[test]
    fn arithmetic_families() {
        let fam = vec![w("ac"), w("abc"), w("abbc")];
        let wit = fit_arithmetic_family(&fam).unwrap().unwrap();
        assert_eq!((wit.beta1, wit.beta2, wit.beta3), (w("a"), w("b"), w("c")));
        let wit = fit_arithmetic_family(&[w("x"), w("x"), w("x")]).unwrap().unwrap();
        assert!(wit.beta2.is_empty());
        assert_eq!(wit.member(5), w("x"));
        assert!(fit_arithmetic_family(&[w("a"), w("ab"), w("aabb")]).unwrap().is_none());
        assert!(fit_arithmetic_family(&[w("a"), w("ab")]).is_err());
    }

    #[test]
    fn two_loop_family() {
        let truth = TwoLoopWitness {
            beta1: w("x"),
            beta2: w("ab"),
            beta3: w("y"),
            beta4: w("c"),
            beta5: w("z"),
        };
        let grid: Vec<Vec<Word>> = (0..3)
            .map(|k1| (0..3).map(|k2| truth.member(k1, k2)).collect())
            .collect();
        let fit = fit_two_loop_family(&grid).unwrap().unwrap();
        for k1 in 0..3 {
            for k2 in 0..3 {
                assert_eq!(fit.member(k1, k2), grid[k1][k2]);
            }
        }
        let mut broken = grid.clone();
        broken[2][2] = w("nope");
        assert!(fit_two_loop_family(&broken).unwrap().is_none());
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(words_up_to(&['a', 'b'], 3).len(), 15);
        assert_eq!(words_of_length(&['a', 'b', 'c'], 2).len(), 9);
    }
}
