//! Exhaustive enumeration of products of two matrices.
//!
//! This is the brute-force side of every closed-form check in the crate: it
//! multiplies matrices explicitly and knows nothing about canonical forms.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mat2::{op_norm, spectral_radius, Matrix2};

/// Largest word length accepted by the enumerators (about 4M products).
pub const MAX_ENUMERATION_LENGTH: usize = 22;

/// Number of leading letters fixed per parallel task.
const SPLIT_DEPTH: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WordError {
    #[error("word is empty")]
    Empty,
    #[error("block {index} has a zero exponent where the closed form needs n, m >= 1")]
    ZeroExponent { index: usize },
    #[error("cannot parse word {0:?}: expected letters H and R, optionally with ^k")]
    Parse(String),
    #[error("length {requested} exceeds the enumeration guard of {guard}")]
    BudgetExceeded { requested: usize, guard: usize },
    #[error(transparent)]
    Domain(#[from] crate::canonical::CanonicalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Letter {
    H,
    R,
}

/// The product `H^{n_k} R^{m_k} ··· H^{n_1} R^{m_1}` stored as blocks
/// `[(n_1, m_1), …, (n_k, m_k)]`, rightmost block first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Word {
    blocks: Vec<(u32, u32)>,
}

impl Word {
    pub fn new(blocks: Vec<(u32, u32)>) -> Result<Self, WordError> {
        let w = Word { blocks };
        if w.total_length() == 0 {
            return Err(WordError::Empty);
        }
        Ok(w)
    }

    /// Single block `H^n R^m`.
    pub fn block(n: u32, m: u32) -> Result<Self, WordError> {
        Word::new(vec![(n, m)])
    }

    pub fn blocks(&self) -> &[(u32, u32)] {
        &self.blocks
    }

    pub fn total_length(&self) -> u64 {
        self.blocks
            .iter()
            .map(|&(n, m)| u64::from(n) + u64::from(m))
            .sum()
    }

    pub fn h_count(&self) -> u64 {
        self.blocks.iter().map(|&(n, _)| u64::from(n)).sum()
    }

    /// Fails unless every exponent is at least one.
    pub fn require_positive_exponents(&self) -> Result<(), WordError> {
        match self.blocks.iter().position(|&(n, m)| n == 0 || m == 0) {
            Some(index) => Err(WordError::ZeroExponent { index }),
            None => Ok(()),
        }
    }

    /// Letters in product order, leftmost factor first.
    pub fn letters(&self) -> Vec<Letter> {
        let mut out = Vec::with_capacity(self.total_length() as usize);
        for &(n, m) in self.blocks.iter().rev() {
            out.extend(std::iter::repeat_n(Letter::H, n as usize));
            out.extend(std::iter::repeat_n(Letter::R, m as usize));
        }
        out
    }

    /// Builds the block form of a letter sequence (leftmost factor first),
    /// merging runs so that interior exponents are nonzero.
    pub fn from_letters(letters: &[Letter]) -> Result<Self, WordError> {
        if letters.is_empty() {
            return Err(WordError::Empty);
        }
        // Walk from the rightmost factor: R^{m_1} first, then H^{n_1}, ...
        let mut blocks: Vec<(u32, u32)> = Vec::new();
        let mut cur = (0u32, 0u32);
        for &l in letters.iter().rev() {
            match l {
                Letter::R => {
                    if cur.0 > 0 {
                        blocks.push(cur);
                        cur = (0, 0);
                    }
                    cur.1 += 1;
                }
                Letter::H => cur.0 += 1,
            }
        }
        blocks.push(cur);
        Word::new(blocks)
    }

    /// Equivalent word (same spectral radius) with every exponent nonzero,
    /// obtained by cyclic rotation, or `None` if the word uses one letter only.
    pub fn cyclic_normal_form(&self) -> Option<Word> {
        let letters = self.letters();
        let first_h = letters.iter().position(|&l| l == Letter::H)?;
        letters.iter().position(|&l| l == Letter::R)?;
        // Rotate so the sequence starts with H and ends with R.
        let len = letters.len();
        let mut start = first_h;
        while letters[(start + len - 1) % len] != Letter::R {
            start = (start + 1) % len;
        }
        let rotated: Vec<Letter> = (0..len).map(|i| letters[(start + i) % len]).collect();
        Word::from_letters(&rotated).ok()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for &(n, m) in self.blocks.iter().rev() {
            for (letter, k) in [("H", n), ("R", m)] {
                if k == 0 {
                    continue;
                }
                if !first {
                    f.write_str(" ")?;
                }
                first = false;
                if k == 1 {
                    f.write_str(letter)?;
                } else {
                    write!(f, "{letter}^{k}")?;
                }
            }
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = WordError;

    /// Accepts `HRHR`, `H R^3 H^2 R`, etc.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut letters = Vec::new();
        let mut chars = s.chars().filter(|c| !c.is_whitespace()).peekable();
        while let Some(c) = chars.next() {
            let letter = match c {
                'H' | 'h' => Letter::H,
                'R' | 'r' => Letter::R,
                _ => return Err(WordError::Parse(s.to_string())),
            };
            let mut count = 1usize;
            if chars.peek() == Some(&'^') {
                chars.next();
                let mut digits = String::new();
                while let Some(d) = chars.peek().copied().filter(char::is_ascii_digit) {
                    digits.push(d);
                    chars.next();
                }
                count = digits
                    .parse()
                    .map_err(|_| WordError::Parse(s.to_string()))?;
            }
            letters.extend(std::iter::repeat_n(letter, count));
        }
        Word::from_letters(&letters)
    }
}

/// The explicit product `H^{n_k} R^{m_k} ··· H^{n_1} R^{m_1}`.
pub fn word_matrix(h: &Matrix2, r: &Matrix2, w: &Word) -> Matrix2 {
    w.blocks
        .iter()
        .rev()
        .fold(Matrix2::IDENTITY, |acc, &(n, m)| {
            acc * h.pow(u64::from(n)) * r.pow(u64::from(m))
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub length: usize,
    /// `min ρ(w)^{1/L}` over all words of length `L`.
    pub min_rho: f64,
    /// `min ‖w‖^{1/L}` over all words of length `L`.
    pub min_norm: f64,
    pub argmin_rho: Word,
    pub argmin_norm: Word,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthTable {
    pub rows: Vec<GrowthRow>,
}

impl GrowthTable {
    /// CSV with header `length,min_rho,min_norm,argmin_word`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("length,min_rho,min_norm,argmin_word\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{:e},{:e},{}\n",
                row.length,
                row.min_rho,
                row.min_norm,
                compact(&row.argmin_rho)
            ));
        }
        out
    }
}

/// Letter string without separators, e.g. `HRHR`.
pub fn compact(w: &Word) -> String {
    w.letters()
        .iter()
        .map(|l| match l {
            Letter::H => 'H',
            Letter::R => 'R',
        })
        .collect()
}

/// Best candidate so far at one length, ordered by value then by the bit code
/// of the word so that merges are independent of how work was split.
#[derive(Debug, Clone, Copy)]
struct Best {
    value: f64,
    code: u64,
}

impl Best {
    const NONE: Best = Best {
        value: f64::INFINITY,
        code: u64::MAX,
    };

    fn offer(&mut self, value: f64, code: u64) {
        if value < self.value || (value == self.value && code < self.code) {
            *self = Best { value, code };
        }
    }

    fn merge(mut self, other: Best) -> Best {
        self.offer(other.value, other.code);
        self
    }
}

#[derive(Debug, Clone)]
struct LevelBests {
    rho: Vec<Best>,
    norm: Vec<Best>,
}

impl LevelBests {
    fn new(levels: usize) -> Self {
        LevelBests {
            rho: vec![Best::NONE; levels + 1],
            norm: vec![Best::NONE; levels + 1],
        }
    }

    fn merge(mut self, other: LevelBests) -> LevelBests {
        for (a, b) in self.rho.iter_mut().zip(other.rho) {
            *a = a.merge(b);
        }
        for (a, b) in self.norm.iter_mut().zip(other.norm) {
            *a = a.merge(b);
        }
        self
    }
}

/// Bit `i` of `code` (from the most significant of `len` bits) selects the
/// `i`-th factor from the left: 0 → H, 1 → R.
fn decode(code: u64, len: usize) -> Word {
    let letters: Vec<Letter> = (0..len)
        .map(|i| {
            if (code >> (len - 1 - i)) & 1 == 0 {
                Letter::H
            } else {
                Letter::R
            }
        })
        .collect();
    Word::from_letters(&letters).expect("non-empty")
}

fn visit<F>(
    h: &Matrix2,
    r: &Matrix2,
    prefix: Matrix2,
    code: u64,
    depth: usize,
    max: usize,
    f: &mut F,
) where
    F: FnMut(&Matrix2, u64, usize),
{
    f(&prefix, code, depth);
    if depth == max {
        return;
    }
    visit(h, r, prefix * *h, code << 1, depth + 1, max, f);
    visit(h, r, prefix * *r, (code << 1) | 1, depth + 1, max, f);
}

/// Calls `f(product, code, length)` for every word of length `1..=max_len`.
/// Work is split on the first few letters and run in parallel; `f` builds a
/// per-task accumulator that is merged with `merge`.
fn for_all_words<A, I, F, M>(h: &Matrix2, r: &Matrix2, max_len: usize, init: I, f: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, &Matrix2, u64, usize) + Sync,
    M: Fn(A, A) -> A + Sync,
{
    let split = SPLIT_DEPTH.min(max_len);
    // Short words (length < split) are handled serially.
    let mut head = init();
    for len in 1..split {
        for code in 0..(1u64 << len) {
            let w = decode(code, len);
            f(&mut head, &word_matrix(h, r, &w), code, len);
        }
    }
    let tails = (0..(1u64 << split))
        .into_par_iter()
        .map(|code| {
            let mut acc = init();
            let prefix = word_matrix(h, r, &decode(code, split));
            visit(h, r, prefix, code, split, max_len, &mut |m, c, d| {
                f(&mut acc, m, c, d)
            });
            acc
        })
        .reduce(&init, &merge);
    merge(head, tails)
}

/// Spectral radius of a word product. When `H` has rank one every word that
/// contains it has rank at most one, and `|tr|` is used directly.
#[derive(Debug, Clone, Copy)]
struct WordRho {
    rank_one_h: bool,
}

impl WordRho {
    fn new(h: &Matrix2) -> Self {
        let scale = h.frobenius_norm();
        WordRho {
            rank_one_h: h.det().abs() <= RANK_ONE_TOL * scale * scale,
        }
    }

    fn of(&self, m: &Matrix2, contains_h: bool) -> f64 {
        if self.rank_one_h && contains_h {
            m.trace().abs()
        } else {
            spectral_radius(m)
        }
    }

    fn of_code(&self, m: &Matrix2, code: u64, len: usize) -> f64 {
        self.of(m, code != (1u64 << len) - 1)
    }
}

const RANK_ONE_TOL: f64 = 1e-12;

fn check_guard(l_max: usize) -> Result<(), WordError> {
    if l_max > MAX_ENUMERATION_LENGTH {
        return Err(WordError::BudgetExceeded {
            requested: l_max,
            guard: MAX_ENUMERATION_LENGTH,
        });
    }
    Ok(())
}

/// For every `L ≤ l_max`, the minimum of `ρ(w)^{1/L}` and `‖w‖^{1/L}` over all
/// `2^L` words of length `L`.
pub fn enumerate_min_growth(
    h: &Matrix2,
    r: &Matrix2,
    l_max: usize,
) -> Result<GrowthTable, WordError> {
    check_guard(l_max)?;
    if l_max == 0 {
        return Ok(GrowthTable { rows: Vec::new() });
    }
    let rho = WordRho::new(h);
    let bests = for_all_words(
        h,
        r,
        l_max,
        || LevelBests::new(l_max),
        |acc, m, code, len| {
            let inv = 1.0 / len as f64;
            acc.rho[len].offer(rho.of_code(m, code, len).powf(inv), code);
            acc.norm[len].offer(op_norm(m).powf(inv), code);
        },
        LevelBests::merge,
    );
    let rows = (1..=l_max)
        .map(|len| GrowthRow {
            length: len,
            min_rho: bests.rho[len].value,
            min_norm: bests.norm[len].value,
            argmin_rho: decode(bests.rho[len].code, len),
            argmin_norm: decode(bests.norm[len].code, len),
        })
        .collect();
    Ok(GrowthTable { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub word: String,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewFormulaReport {
    pub l_max: usize,
    pub words_checked: u64,
    pub slack: f64,
    pub rho_r: f64,
    /// `ρ(H R^n)^{1/(n+1)}` for `n = 0..l_max−1`, from explicit products.
    pub single_block_terms: Vec<f64>,
    pub violations: Vec<Violation>,
    /// Smallest `lhs − rhs` over all words; equality cases sit at zero.
    pub min_gap: f64,
}

pub const NEWFORMULA_SLACK: f64 = 1e-12;

/// Checks `ρ(w)^{1/|w|} ≥ min(ρ(R), min_{n<|w|} ρ(HR^n)^{1/(n+1)})` for every
/// word up to length `l_max`.
pub fn verify_newformula(
    h: &Matrix2,
    r: &Matrix2,
    l_max: usize,
) -> Result<NewFormulaReport, WordError> {
    check_guard(l_max)?;
    crate::canonical::reduce(h, r)?;
    let rho = WordRho::new(h);
    let rho_r = spectral_radius(r);
    let terms: Vec<f64> = (0..l_max)
        .map(|n| {
            rho.of(&(*h * r.pow(n as u64)), true)
                .powf(1.0 / (n as f64 + 1.0))
        })
        .collect();
    // rhs for length L uses n < L.
    let mut rhs_by_len = vec![f64::INFINITY; l_max + 1];
    let mut running = f64::INFINITY;
    for len in 1..=l_max {
        running = running.min(terms[len - 1]);
        rhs_by_len[len] = rho_r.min(running);
    }

    #[derive(Default)]
    struct Acc {
        checked: u64,
        min_gap: f64,
        violations: Vec<(u64, usize, f64, f64)>,
    }
    let acc = for_all_words(
        h,
        r,
        l_max,
        || Acc {
            min_gap: f64::INFINITY,
            ..Acc::default()
        },
        |acc, m, code, len| {
            let lhs = rho.of_code(m, code, len).powf(1.0 / len as f64);
            let rhs = rhs_by_len[len];
            acc.checked += 1;
            acc.min_gap = acc.min_gap.min(lhs - rhs);
            if lhs < rhs - NEWFORMULA_SLACK {
                acc.violations.push((code, len, lhs, rhs));
            }
        },
        |mut a, b| {
            a.checked += b.checked;
            a.min_gap = a.min_gap.min(b.min_gap);
            a.violations.extend(b.violations);
            a
        },
    );
    let mut violations = acc.violations;
    violations.sort_by_key(|&(code, len, _, _)| (len, code));
    Ok(NewFormulaReport {
        l_max,
        words_checked: acc.checked,
        slack: NEWFORMULA_SLACK,
        rho_r,
        single_block_terms: terms,
        violations: violations
            .into_iter()
            .map(|(code, len, lhs, rhs)| Violation {
                word: compact(&decode(code, len)),
                lhs,
                rhs,
            })
            .collect(),
        min_gap: acc.min_gap,
    })
}

/// `min(ρ(R), ρ(H), min_{1≤m≤L−1} ρ(HR^m)^{1/(m+1)})` from explicit products:
/// the value the brute-force minimum over words of length `≤ L` must equal.
pub fn single_block_minimum(h: &Matrix2, r: &Matrix2, l: usize) -> f64 {
    let rho = WordRho::new(h);
    (0..l)
        .map(|m| {
            rho.of(&(*h * r.pow(m as u64)), true)
                .powf(1.0 / (m as f64 + 1.0))
        })
        .fold(spectral_radius(r), f64::min)
}
