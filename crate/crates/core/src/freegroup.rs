//! Reduced words in free groups and free products of free groups.
//!
//! A word `[x0, x1, ..., xn]` denotes the composite `x0 ∘ x1 ∘ ... ∘ xn`. Words
//! are kept freely reduced at all times. Letters carry a factor tag so the same
//! machinery indexes free products `F_{r0} * F_{r1} * ...`; reduction never
//! cancels letters from different factors because they are distinct generators.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A generator or inverse generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub factor: u16,
    pub index: u16,
    pub inverse: bool,
}

impl Letter {
    /// Generator `index` (0-based) of factor 0.
    pub fn gen(index: u16) -> Self {
        Letter { factor: 0, index, inverse: false }
    }

    /// Inverse of generator `index` of factor 0.
    pub fn inv(index: u16) -> Self {
        Letter { factor: 0, index, inverse: true }
    }

    pub fn tagged(factor: u16, index: u16, inverse: bool) -> Self {
        Letter { factor, index, inverse }
    }

    pub fn inverse(self) -> Self {
        Letter { inverse: !self.inverse, ..self }
    }

    pub fn same_generator(self, other: Letter) -> bool {
        self.factor == other.factor && self.index == other.index
    }

    pub fn cancels(self, other: Letter) -> bool {
        self.same_generator(other) && self.inverse != other.inverse
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factor == 0 {
            write!(f, "g{}", self.index + 1)?;
        } else {
            write!(f, "g{}.{}", self.factor, self.index + 1)?;
        }
        if self.inverse {
            write!(f, "^-1")?;
        }
        Ok(())
    }
}

impl FromStr for Letter {
    type Err = Error;

    /// Accepts `g2`, `g2^-1`, `G2` (inverse) and factor-tagged `g1.2`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad letter '{s}'"));
        let (body, mut inverse) = match s.strip_suffix("^-1") {
            Some(b) => (b, true),
            None => (s, false),
        };
        let rest = if let Some(r) = body.strip_prefix('g') {
            r
        } else if let Some(r) = body.strip_prefix('G') {
            inverse = !inverse;
            r
        } else {
            return Err(bad());
        };
        let (factor, index) = match rest.split_once('.') {
            Some((f, i)) => (f.parse::<u16>().map_err(|_| bad())?, i.parse::<u16>().map_err(|_| bad())?),
            None => (0, rest.parse::<u16>().map_err(|_| bad())?),
        };
        if index == 0 {
            return Err(bad());
        }
        Ok(Letter { factor, index: index - 1, inverse })
    }
}

/// A freely reduced word.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn identity() -> Self {
        Word(Vec::new())
    }

    /// Reduces an arbitrary letter sequence.
    pub fn from_letters(letters: &[Letter]) -> Self {
        reduce(letters)
    }

    pub fn letter(l: Letter) -> Self {
        Word(vec![l])
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> Option<Letter> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<Letter> {
        self.0.last().copied()
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.inverse()).collect())
    }

    /// Reduced product `self · other`.
    pub fn mul(&self, other: &Word) -> Word {
        let mut out = self.0.clone();
        for &l in &other.0 {
            push_reduced(&mut out, l);
        }
        Word(out)
    }

    /// `self` followed by `l`, assuming no cancellation.
    pub fn extended(&self, l: Letter) -> Word {
        debug_assert!(self.last().is_none_or(|x| !x.cancels(l)));
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.extend_from_slice(&self.0);
        v.push(l);
        Word(v)
    }

    /// `self^k` for `k ≥ 0`.
    pub fn pow(&self, k: usize) -> Word {
        let mut acc = Word::identity();
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Replaces every letter through `f`, then reduces.
    pub fn map_letters<F: FnMut(Letter) -> Letter>(&self, f: F) -> Word {
        reduce(&self.0.iter().copied().map(f).collect::<Vec<_>>())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "e");
        }
        for (k, l) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;

    /// Whitespace- or `*`-separated letters; `e` or an empty string is the identity.
    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .split(|c: char| c.is_whitespace() || c == '*' || c == ',')
            .filter(|t| !t.is_empty() && *t != "e")
            .map(Letter::from_str)
            .collect::<Result<Vec<_>>>()?;
        Ok(reduce(&letters))
    }
}

fn push_reduced(stack: &mut Vec<Letter>, l: Letter) {
    if stack.last().is_some_and(|top| top.cancels(l)) {
        stack.pop();
    } else {
        stack.push(l);
    }
}

/// Free reduction.
pub fn reduce(letters: &[Letter]) -> Word {
    let mut stack = Vec::with_capacity(letters.len());
    for &l in letters {
        push_reduced(&mut stack, l);
    }
    Word(stack)
}

/// Strips matching first/last letters until the word is cyclically reduced.
pub fn cyclic_reduce(w: &Word) -> Word {
    let v = &w.0;
    let (mut i, mut j) = (0, v.len());
    while j - i >= 2 && v[i].cancels(v[j - 1]) {
        i += 1;
        j -= 1;
    }
    Word(v[i..j].to_vec())
}

/// Ranks of the free factors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    ranks: Vec<u16>,
    letters: Vec<Letter>,
}

impl Alphabet {
    pub fn new(ranks: &[u16]) -> Self {
        let mut letters = Vec::new();
        for (f, &r) in ranks.iter().enumerate() {
            for i in 0..r {
                letters.push(Letter::tagged(f as u16, i, false));
                letters.push(Letter::tagged(f as u16, i, true));
            }
        }
        Alphabet { ranks: ranks.to_vec(), letters }
    }

    /// Free group on `p` generators.
    pub fn free(p: usize) -> Self {
        Alphabet::new(&[p as u16])
    }

    pub fn ranks(&self) -> &[u16] {
        &self.ranks
    }

    pub fn total_rank(&self) -> usize {
        self.ranks.iter().map(|&r| r as usize).sum()
    }

    /// All letters, `g, g^-1` per generator, factors in order.
    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    /// Position of a letter in [`Alphabet::letters`].
    pub fn position(&self, l: Letter) -> Option<usize> {
        let f = l.factor as usize;
        if f >= self.ranks.len() || l.index >= self.ranks[f] {
            return None;
        }
        let offset: usize = self.ranks[..f].iter().map(|&r| 2 * r as usize).sum();
        Some(offset + 2 * l.index as usize + l.inverse as usize)
    }

    pub fn contains(&self, l: Letter) -> bool {
        self.position(l).is_some()
    }

    /// Letters that may follow `prev` in a reduced word.
    pub fn successors(&self, prev: Option<Letter>) -> impl Iterator<Item = Letter> + '_ {
        self.letters
            .iter()
            .copied()
            .filter(move |l| prev.is_none_or(|p| !p.cancels(*l)))
    }

    /// Number of reduced words of length exactly `n`.
    pub fn sphere_size(&self, n: usize) -> usize {
        let k = self.letters.len();
        if n == 0 {
            1
        } else if k == 0 {
            0
        } else {
            k * (k - 1).pow(n as u32 - 1)
        }
    }
}

/// All reduced words of one length.
#[derive(Debug, Clone)]
pub struct WordGeneration {
    pub n: usize,
    pub words: Vec<Word>,
}

/// Iterator over generations `0..=max_len`, each built from the previous one.
pub struct Generations<'a> {
    alphabet: &'a Alphabet,
    current: Option<WordGeneration>,
    max_len: usize,
}

impl Iterator for Generations<'_> {
    type Item = WordGeneration;

    fn next(&mut self) -> Option<WordGeneration> {
        let next = match &self.current {
            None => WordGeneration { n: 0, words: vec![Word::identity()] },
            Some(g) if g.n >= self.max_len => return None,
            Some(g) => WordGeneration {
                n: g.n + 1,
                words: g
                    .words
                    .iter()
                    .flat_map(|w| self.alphabet.successors(w.last()).map(move |l| w.extended(l)))
                    .collect(),
            },
        };
        self.current = Some(next.clone());
        Some(next)
    }
}

/// Reduced words grouped by length, `n = 0..=max_len`.
pub fn enumerate_generations(alphabet: &Alphabet, max_len: usize) -> Generations<'_> {
    Generations { alphabet, current: None, max_len }
}

/// Same as [`enumerate_generations`] over the free product of free groups of
/// the given ranks.
pub fn free_product_enumerate(ranks: &[u16], max_len: usize) -> Vec<WordGeneration> {
    let alphabet = Alphabet::new(ranks);
    enumerate_generations(&alphabet, max_len).collect()
}

/// All reduced words of length at most `max_len`, shortest first.
pub fn ball(alphabet: &Alphabet, max_len: usize) -> Vec<Word> {
    enumerate_generations(alphabet, max_len).flat_map(|g| g.words).collect()
}

/// Depth-first visit of every reduced word of length at most `max_len`.
pub fn for_each_word<F: FnMut(&[Letter])>(alphabet: &Alphabet, max_len: usize, mut f: F) {
    fn go<F: FnMut(&[Letter])>(a: &Alphabet, buf: &mut Vec<Letter>, max_len: usize, f: &mut F) {
        f(buf);
        if buf.len() == max_len {
            return;
        }
        let prev = buf.last().copied();
        for l in a.successors(prev).collect::<Vec<_>>() {
            buf.push(l);
            go(a, buf, max_len, f);
            buf.pop();
        }
    }
    let mut buf = Vec::with_capacity(max_len);
    go(alphabet, &mut buf, max_len, &mut f);
}

fn sort_canonical(set: BTreeSet<Word>) -> Vec<Word> {
    let mut v: Vec<Word> = set.into_iter().collect();
    v.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    v
}

fn single_generator(alphabet: &Alphabet, g: &Word) -> Result<Letter> {
    match g.letters() {
        [l] if alphabet.contains(*l) => Ok(Letter { inverse: false, ..*l }),
        _ => Err(Error::NotAGenerator(g.to_string())),
    }
}

/// The conjugacy class of `g` intersected with the ball of radius `max_len`.
///
/// Every conjugate has a unique reduced form `u c u⁻¹` with `c` a cyclic
/// permutation of the cyclic reduction of `g` and no cancellation at either
/// junction; those forms are enumerated directly.
pub fn conjugacy_reps(alphabet: &Alphabet, g: &Word, max_len: usize) -> Result<Vec<Word>> {
    let core = cyclic_reduce(g);
    if core.is_empty() {
        return Err(Error::TrivialElement);
    }
    let n = core.len();
    let mut out = BTreeSet::new();
    if n > max_len {
        return Ok(Vec::new());
    }
    let half = (max_len - n) / 2;
    let rotations: BTreeSet<Word> = (0..n)
        .map(|k| {
            let mut v = core.letters()[k..].to_vec();
            v.extend_from_slice(&core.letters()[..k]);
            Word(v)
        })
        .collect();
    let prefixes = ball(alphabet, half);
    for c in &rotations {
        let (first, last) = (c.first().unwrap(), c.last().unwrap());
        for u in &prefixes {
            if let Some(t) = u.last() {
                if t.cancels(first) || t == last {
                    continue;
                }
            }
            let mut v = u.letters().to_vec();
            v.extend_from_slice(c.letters());
            v.extend(u.inverse().letters());
            out.insert(Word(v));
        }
    }
    Ok(sort_canonical(out))
}

/// Whether `w` is the canonical representative of its coset `w⟨g⟩`.
pub fn is_coset_rep(w: &Word, g: Letter) -> bool {
    w.last().is_none_or(|l| !l.same_generator(g))
}

/// Whether `w` is the canonical representative of its double coset `⟨f⟩w⟨g⟩`.
pub fn is_double_coset_rep(w: &Word, f: Letter, g: Letter, exclude_identity: bool) -> bool {
    match (w.first(), w.last()) {
        (Some(a), Some(b)) => !a.same_generator(f) && !b.same_generator(g),
        _ => !exclude_identity,
    }
}

/// Representatives of `Γ/⟨g⟩`: reduced words not ending in `g^{±1}`.
pub fn coset_reps(alphabet: &Alphabet, g: &Word, max_len: usize) -> Result<Vec<Word>> {
    let gl = single_generator(alphabet, g)?;
    Ok(ball(alphabet, max_len).into_iter().filter(|w| is_coset_rep(w, gl)).collect())
}

/// Representatives of `⟨f⟩\Γ/⟨g⟩`: reduced words neither starting with
/// `f^{±1}` nor ending with `g^{±1}`; the identity is dropped when
/// `exclude_identity` is set.
pub fn double_coset_reps(
    alphabet: &Alphabet,
    f: &Word,
    g: &Word,
    max_len: usize,
    exclude_identity: bool,
) -> Result<Vec<Word>> {
    let fl = single_generator(alphabet, f)?;
    let gl = single_generator(alphabet, g)?;
    Ok(ball(alphabet, max_len)
        .into_iter()
        .filter(|w| is_double_coset_rep(w, fl, gl, exclude_identity))
        .collect())
}

impl serde::Serialize for Letter {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl serde::Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}
