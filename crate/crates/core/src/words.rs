//! Words in the free semigroup on `n` generators, ordered by length and then
//! lexicographically, and the index tables used to lay out truncated Fock
//! spaces.

use std::cmp::Ordering;
use std::fmt;

/// A word `g_{i1} g_{i2} ... g_{ik}`; letters are 1-based and the empty word
/// is the unit.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Word {
    letters: Vec<usize>,
}

impl Word {
    pub fn empty() -> Self {
        Word { letters: Vec::new() }
    }

    pub fn letter(i: usize) -> Self {
        assert!(i >= 1, "letters are 1-based");
        Word { letters: vec![i] }
    }

    pub fn from_letters(letters: &[usize]) -> Self {
        assert!(letters.iter().all(|&i| i >= 1), "letters are 1-based");
        Word { letters: letters.to_vec() }
    }

    pub fn letters(&self) -> &[usize] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Word { letters }
    }

    pub fn reversed(&self) -> Word {
        let mut letters = self.letters.clone();
        letters.reverse();
        Word { letters }
    }

    /// If `self = prefix * rest`, returns `rest`.
    pub fn strip_prefix(&self, prefix: &Word) -> Option<Word> {
        self.letters
            .strip_prefix(prefix.letters.as_slice())
            .map(Word::from_letters)
    }

    /// If `self = rest * suffix`, returns `rest`.
    pub fn strip_suffix(&self, suffix: &Word) -> Option<Word> {
        self.letters
            .strip_suffix(suffix.letters.as_slice())
            .map(Word::from_letters)
    }

    pub fn max_letter(&self) -> usize {
        self.letters.iter().copied().max().unwrap_or(0)
    }

    /// All words over `n` letters of length exactly `len`, in order.
    pub fn all_of_length(n: usize, len: usize) -> Vec<Word> {
        let count = n.checked_pow(len as u32).expect("word count overflow");
        (0..count).map(|k| Word::from_rank(n, len, k)).collect()
    }

    fn from_rank(n: usize, len: usize, mut k: usize) -> Word {
        let mut letters = vec![1; len];
        for pos in (0..len).rev() {
            letters[pos] = k % n + 1;
            k /= n;
        }
        Word { letters }
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| self.letters.cmp(&other.letters))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "g0");
        }
        for &i in &self.letters {
            write!(f, "g{i}")?;
        }
        Ok(())
    }
}

/// All words of length at most `max_len` over `n` letters, in graded order,
/// with O(length) index lookup.
#[derive(Clone, Debug)]
pub struct WordTable {
    n: usize,
    max_len: usize,
    words: Vec<Word>,
    level_start: Vec<usize>,
}

impl WordTable {
    pub fn new(n: usize, max_len: usize) -> Self {
        assert!(n >= 1, "need at least one generator");
        let mut words = Vec::new();
        let mut level_start = Vec::with_capacity(max_len + 2);
        for len in 0..=max_len {
            level_start.push(words.len());
            words.extend(Word::all_of_length(n, len));
        }
        level_start.push(words.len());
        WordTable { n, max_len, words, level_start }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn word(&self, idx: usize) -> &Word {
        &self.words[idx]
    }

    /// Index range of the words of length `len`.
    pub fn level(&self, len: usize) -> std::ops::Range<usize> {
        self.level_start[len]..self.level_start[len + 1]
    }

    pub fn index(&self, w: &Word) -> Option<usize> {
        if w.len() > self.max_len || w.letters.iter().any(|&i| i > self.n) {
            return None;
        }
        let rank = w.letters.iter().fold(0usize, |acc, &i| acc * self.n + (i - 1));
        Some(self.level_start[w.len()] + rank)
    }
}
