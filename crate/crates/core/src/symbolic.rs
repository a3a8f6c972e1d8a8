//! Words over the symbol set and their block structure.
//!
//! A block is a maximal run of symbols sharing a group (hence a fixed point).
//! Maps inside a block commute, so a block is determined by its group and
//! per-member counts, and two words with the same [`BlockSignature`] compose
//! to the identical map.

use std::fmt;

use num_rational::BigRational;
use num_traits::{Num, One};
use serde::{Deserialize, Serialize};

use crate::error::{CfsError, Result};
use crate::system::{map_in, AffineMap1D, CfsSystem, Params, ProbVector, Rational, Symbol};

/// Default limit on enumerated states.
pub const DEFAULT_BUDGET: u128 = 100_000_000;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(pub Vec<Symbol>);

impl Word {
    pub fn new(symbols: Vec<Symbol>) -> Self {
        Self(symbols)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }
}

impl From<Vec<(usize, usize)>> for Word {
    /// 0-based pairs.
    fn from(v: Vec<(usize, usize)>) -> Self {
        Word(v.into_iter().map(|(g, m)| Symbol::new(g, m)).collect())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// One run of a single group: member counts, sorted by member, zeros omitted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Block {
    pub group: usize,
    pub counts: Vec<(usize, u32)>,
}

impl Block {
    pub fn len(&self) -> u32 {
        self.counts.iter().map(|&(_, c)| c).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn add(&mut self, member: usize) {
        match self.counts.binary_search_by_key(&member, |&(m, _)| m) {
            Ok(i) => self.counts[i].1 += 1,
            Err(i) => self.counts.insert(i, (member, 1)),
        }
    }

    /// Ratio of the block's composed map, `Π λ^count`.
    pub fn ratio_in<T: Num + Clone>(&self, params: &Params<T>) -> T {
        let mut r = T::one();
        for &(m, c) in &self.counts {
            let l = params.ratio(Symbol::new(self.group, m));
            for _ in 0..c {
                r = r * l.clone();
            }
        }
        r
    }

    fn symbols(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.counts
            .iter()
            .flat_map(move |&(m, c)| std::iter::repeat_n(Symbol::new(self.group, m), c as usize))
    }
}

impl Serialize for Block {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            group: usize,
            counts: Vec<[usize; 2]>,
        }
        Repr {
            group: self.group + 1,
            counts: self.counts.iter().map(|&(m, c)| [m + 1, c as usize]).collect(),
        }
        .serialize(s)
    }
}

/// Canonical block structure of a word: its exact-overlap class.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct BlockSignature {
    pub blocks: Vec<Block>,
}

impl BlockSignature {
    /// Number of blocks `B`.
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Length of any word with this signature.
    pub fn word_len(&self) -> usize {
        self.blocks.iter().map(|b| b.len() as usize).sum()
    }

    /// The word with each block's members in increasing order.
    pub fn representative(&self) -> Word {
        Word(self.blocks.iter().flat_map(Block::symbols).collect())
    }

    /// Same class, members in decreasing order inside each block.
    pub fn reversed_representative(&self) -> Word {
        Word(
            self.blocks
                .iter()
                .flat_map(|b| b.symbols().collect::<Vec<_>>().into_iter().rev())
                .collect(),
        )
    }

    pub fn count_vector(&self, sys: &CfsSystem) -> Vec<u32> {
        let mut out = vec![0; sys.symbol_count()];
        for b in &self.blocks {
            for &(m, c) in &b.counts {
                out[sys.flat_index(Symbol::new(b.group, m))] += c;
            }
        }
        out
    }

    pub fn ratio_in<T: Num + Clone>(&self, params: &Params<T>) -> T {
        self.blocks
            .iter()
            .fold(T::one(), |acc, b| acc * b.ratio_in(params))
    }
}

pub fn decompose(w: &Word) -> BlockSignature {
    let mut blocks: Vec<Block> = Vec::new();
    for s in &w.0 {
        match blocks.last_mut() {
            Some(b) if b.group == s.group => b.add(s.member),
            _ => blocks.push(Block {
                group: s.group,
                counts: vec![(s.member, 1)],
            }),
        }
    }
    BlockSignature { blocks }
}

pub fn same_block_structure(w1: &Word, w2: &Word) -> bool {
    w1.len() == w2.len() && decompose(w1) == decompose(w2)
}

/// `f_{w_1} ∘ … ∘ f_{w_n}` by direct left-to-right composition.
pub fn compose_in<T: Num + Clone>(params: &Params<T>, w: &Word) -> Result<AffineMap1D<T>> {
    if w.is_empty() {
        return Err(CfsError::EmptyWord);
    }
    Ok(w
        .0
        .iter()
        .fold(AffineMap1D::identity(), |acc, &s| acc.compose(&map_in(params, s))))
}

pub fn compose(sys: &CfsSystem, w: &Word) -> Result<AffineMap1D<f64>> {
    for &s in &w.0 {
        sys.check_symbol(s)?;
    }
    compose_in(sys.params(), w)
}

pub fn compose_exact(sys: &CfsSystem, w: &Word) -> Result<AffineMap1D<Rational>> {
    let params = sys.exact_params().ok_or(CfsError::NotRational)?;
    for &s in &w.0 {
        sys.check_symbol(s)?;
    }
    compose_in(params, w)
}

/// `Π(w) = f_w(0)` from the block representation:
/// `t_{b_1} + Σ_l λ_{b_1}…λ_{b_l}(t_{b_{l+1}} − t_{b_l})`, closed by a
/// terminal step towards 0.
pub fn project_signature_in<T: Num + Clone>(params: &Params<T>, sig: &BlockSignature) -> Result<T> {
    let first = sig.blocks.first().ok_or(CfsError::EmptyWord)?;
    let mut value = params.fixed_point(first.group).clone();
    let mut prefix = T::one();
    for (l, b) in sig.blocks.iter().enumerate() {
        prefix = prefix * b.ratio_in(params);
        let here = params.fixed_point(b.group).clone();
        let next = match sig.blocks.get(l + 1) {
            Some(nb) => params.fixed_point(nb.group).clone(),
            None => T::zero(),
        };
        value = value + prefix.clone() * (next - here);
    }
    Ok(value)
}

pub fn project(sys: &CfsSystem, w: &Word) -> Result<f64> {
    for &s in &w.0 {
        sys.check_symbol(s)?;
    }
    project_signature_in(sys.params(), &decompose(w))
}

pub fn project_exact(sys: &CfsSystem, w: &Word) -> Result<Rational> {
    let params = sys.exact_params().ok_or(CfsError::NotRational)?;
    for &s in &w.0 {
        sys.check_symbol(s)?;
    }
    project_signature_in(params, &decompose(w))
}

/// Occurrences of each symbol, indexed like [`CfsSystem::symbols`].
pub fn count_vector(sys: &CfsSystem, w: &Word) -> Vec<u32> {
    let mut out = vec![0; sys.symbol_count()];
    for &s in &w.0 {
        out[sys.flat_index(s)] += 1;
    }
    out
}

/// `ln k!` for `k ≤ n`, by cumulative sums.
pub(crate) struct LnFactorial(Vec<f64>);

impl LnFactorial {
    pub(crate) fn new(n: usize) -> Self {
        let mut v = Vec::with_capacity(n + 1);
        v.push(0.0);
        for k in 1..=n {
            v.push(v[k - 1] + (k as f64).ln());
        }
        Self(v)
    }

    pub(crate) fn get(&mut self, k: usize) -> f64 {
        while self.0.len() <= k {
            let j = self.0.len();
            let prev = self.0[j - 1];
            self.0.push(prev + (j as f64).ln());
        }
        self.0[k]
    }
}

/// Total `p`-weight of all words with this signature:
/// `p_w · Π_blocks |b|! / Π #_{i,j}b!`, in log space.
pub fn class_weight(sig: &BlockSignature, p: &ProbVector) -> f64 {
    let mut lf = LnFactorial::new(sig.word_len());
    let mut ln_w = 0.0;
    for b in &sig.blocks {
        ln_w += lf.get(b.len() as usize);
        for &(m, c) in &b.counts {
            let pm = p.get(Symbol::new(b.group, m));
            if pm == 0.0 {
                return 0.0;
            }
            ln_w += c as f64 * pm.ln() - lf.get(c as usize);
        }
    }
    ln_w.exp()
}

pub fn class_weight_exact(sig: &BlockSignature, p: &ProbVector) -> Result<Rational> {
    let weights = p.exact_weights().ok_or(CfsError::NotRational)?;
    let fact = |n: u32| -> BigRational {
        let mut acc = num_bigint::BigInt::one();
        for k in 2..=n {
            acc *= k;
        }
        BigRational::from_integer(acc)
    };
    let mut w = Rational::one();
    for b in &sig.blocks {
        w *= fact(b.len());
        for &(m, c) in &b.counts {
            w /= fact(c);
            let pm = &weights[b.group][m];
            for _ in 0..c {
                w *= pm;
            }
        }
    }
    Ok(w)
}

/// All words of length `n`, lexicographic.
pub struct WordIter {
    symbols: Vec<Symbol>,
    digits: Vec<usize>,
    done: bool,
}

impl Iterator for WordIter {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        if self.done {
            return None;
        }
        let word = Word(self.digits.iter().map(|&d| self.symbols[d]).collect());
        // odometer increment, last position fastest
        let mut i = self.digits.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.digits[i] += 1;
            if self.digits[i] < self.symbols.len() {
                break;
            }
            self.digits[i] = 0;
        }
        Some(word)
    }
}

pub fn enumerate_words(sys: &CfsSystem, n: usize, budget: u128) -> Result<WordIter> {
    let l = sys.symbol_count() as u128;
    let needed = (0..n).try_fold(1u128, |acc, _| acc.checked_mul(l)).unwrap_or(u128::MAX);
    if needed > budget {
        return Err(CfsError::BudgetExceeded { needed, budget });
    }
    Ok(WordIter {
        symbols: sys.symbols(),
        digits: vec![0; n],
        done: false,
    })
}

/// Weak compositions of `total` into `parts` nonnegative entries.
pub(crate) fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    fn rec(left: u32, parts: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for c in (0..=left).rev() {
            cur.push(c);
            rec(left - c, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(total, parts, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

fn binomial_u128(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Number of distinct block signatures of length `n`.
pub fn signature_count(sys: &CfsSystem, n: usize) -> u128 {
    let groups = sys.group_count();
    let per_block = |g: usize, b: usize| -> u128 {
        let k = sys.group_size(g) as u128;
        binomial_u128(b as u128 + k - 1, k - 1)
    };
    // ending[len][g]: signatures of length len whose last block has group g
    let mut ending = vec![vec![0u128; groups]; n + 1];
    for len in 1..=n {
        for g in 0..groups {
            let mut total = per_block(g, len);
            for b in 1..len {
                let prev: u128 = (0..groups)
                    .filter(|&h| h != g)
                    .map(|h| ending[len - b][h])
                    .fold(0u128, u128::saturating_add);
                total = total.saturating_add(prev.saturating_mul(per_block(g, b)));
            }
            ending[len][g] = total;
        }
    }
    if n == 0 {
        1
    } else {
        ending[n].iter().copied().fold(0u128, u128::saturating_add)
    }
}

/// Every block signature realised by words of length `n`.
pub fn enumerate_signatures(sys: &CfsSystem, n: usize, budget: u128) -> Result<Vec<BlockSignature>> {
    let needed = signature_count(sys, n);
    if needed > budget {
        return Err(CfsError::BudgetExceeded { needed, budget });
    }
    fn rec(
        sys: &CfsSystem,
        left: usize,
        last: Option<usize>,
        cur: &mut Vec<Block>,
        out: &mut Vec<BlockSignature>,
    ) {
        if left == 0 {
            out.push(BlockSignature { blocks: cur.clone() });
            return;
        }
        for g in 0..sys.group_count() {
            if Some(g) == last {
                continue;
            }
            for b in 1..=left {
                for comp in compositions(b as u32, sys.group_size(g)) {
                    let counts = comp
                        .iter()
                        .enumerate()
                        .filter(|&(_, &c)| c > 0)
                        .map(|(m, &c)| (m, c))
                        .collect();
                    cur.push(Block { group: g, counts });
                    rec(sys, left - b, Some(g), cur, out);
                    cur.pop();
                }
            }
        }
    }
    let mut out = Vec::with_capacity(needed as usize);
    rec(sys, n, None, &mut Vec::new(), &mut out);
    Ok(out)
}
