//! Tokens, sequences, and n-gram multisets.
//!
//! Ids `0..3` are reserved for the begin, end, and unknown markers; surface
//! tokens start at id 3 in the order they were supplied. Begin/end markers
//! are model-side only and never stored inside a [`Sequence`].

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::ops::Deref;
use std::path::Path;

use crate::error::{Error, Result};

pub type TokenId = u32;

pub const BOS: TokenId = 0;
pub const EOS: TokenId = 1;
pub const UNK: TokenId = 2;

pub const BOS_SURFACE: &str = "<s>";
pub const EOS_SURFACE: &str = "</s>";
pub const UNK_SURFACE: &str = "<unk>";

const RESERVED: [&str; 3] = [BOS_SURFACE, EOS_SURFACE, UNK_SURFACE];
const FIRST_REGULAR: TokenId = 3;

/// Bijection between surface strings and token ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    surfaces: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    /// Builds a vocabulary from distinct surface tokens.
    ///
    /// Duplicates, empty strings, strings containing whitespace, and the
    /// reserved marker strings are rejected.
    pub fn new<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self::reserved_only();
        for tok in tokens {
            let tok = tok.into();
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::invalid(format!("invalid vocabulary token {tok:?}")));
            }
            if RESERVED.contains(&tok.as_str()) {
                return Err(Error::invalid(format!("reserved marker {tok:?} in vocabulary")));
            }
            if vocab.index.contains_key(&tok) {
                return Err(Error::invalid(format!("duplicate vocabulary token {tok:?}")));
            }
            vocab.push(tok);
        }
        Ok(vocab)
    }

    /// Collects every whitespace token of `texts` in first-occurrence order.
    pub fn from_texts<I, S>(texts: I, lowercase: bool) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Self::reserved_only();
        for text in texts {
            for tok in text.as_ref().split_whitespace() {
                let tok = normalize(tok, lowercase);
                if RESERVED.contains(&tok.as_str()) || vocab.index.contains_key(&tok) {
                    continue;
                }
                vocab.push(tok);
            }
        }
        vocab
    }

    fn reserved_only() -> Self {
        let mut vocab = Vocabulary {
            surfaces: Vec::new(),
            index: HashMap::new(),
        };
        for r in RESERVED {
            vocab.push(r.to_string());
        }
        vocab
    }

    fn push(&mut self, tok: String) {
        let id = self.surfaces.len() as TokenId;
        self.index.insert(tok.clone(), id);
        self.surfaces.push(tok);
    }

    /// Reads a vocabulary file: UTF-8, one token per line, blank lines ignored.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::new(text.lines().map(str::trim).filter(|l| !l.is_empty()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for tok in self.regular_tokens() {
            out.push_str(tok);
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Number of ids, reserved markers included.
    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.num_regular() == 0
    }

    /// Number of surface tokens, reserved markers excluded.
    pub fn num_regular(&self) -> usize {
        self.surfaces.len() - FIRST_REGULAR as usize
    }

    pub fn regular_ids(&self) -> std::ops::Range<TokenId> {
        FIRST_REGULAR..self.surfaces.len() as TokenId
    }

    pub fn regular_tokens(&self) -> impl Iterator<Item = &str> {
        self.surfaces[FIRST_REGULAR as usize..].iter().map(String::as_str)
    }

    pub fn id(&self, surface: &str) -> Option<TokenId> {
        self.index.get(surface).copied()
    }

    pub fn surface(&self, id: TokenId) -> Option<&str> {
        self.surfaces.get(id as usize).map(String::as_str)
    }

    pub fn contains_id(&self, id: TokenId) -> bool {
        (id as usize) < self.surfaces.len()
    }

    /// Whitespace tokenization. Unknown tokens (and stray marker strings) map
    /// to the unknown id; never fails.
    pub fn tokenize(&self, text: &str, lowercase: bool) -> Sequence {
        text.split_whitespace()
            .map(|tok| {
                let tok = normalize(tok, lowercase);
                match self.index.get(&tok) {
                    Some(&id) if id >= FIRST_REGULAR => id,
                    _ => UNK,
                }
            })
            .collect()
    }

    /// Maps already-split tokens to ids with the same unknown-token policy.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Sequence {
        tokens
            .iter()
            .map(|t| match self.index.get(t.as_ref()) {
                Some(&id) if id >= FIRST_REGULAR => id,
                _ => UNK,
            })
            .collect()
    }

    pub fn surfaces<'a>(&'a self, seq: &'a [TokenId]) -> impl Iterator<Item = &'a str> + 'a {
        seq.iter().map(|&id| self.surface(id).unwrap_or(UNK_SURFACE))
    }

    /// Joins surface strings with single spaces.
    pub fn detokenize(&self, seq: &[TokenId]) -> String {
        self.surfaces(seq).collect::<Vec<_>>().join(" ")
    }

    pub fn validate(&self, seq: &[TokenId]) -> Result<()> {
        match seq.iter().find(|&&id| id == BOS || id == EOS || !self.contains_id(id)) {
            Some(&bad) => Err(Error::invalid(format!("token id {bad} is not a valid sequence token"))),
            None => Ok(()),
        }
    }
}

fn normalize(tok: &str, lowercase: bool) -> String {
    if lowercase {
        tok.to_lowercase()
    } else {
        tok.to_string()
    }
}

/// An ordered list of token ids. Ordering is lexicographic over ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct Sequence(Vec<TokenId>);

impl Sequence {
    pub fn new(ids: Vec<TokenId>) -> Self {
        Sequence(ids)
    }

    pub fn empty() -> Self {
        Sequence(Vec::new())
    }

    pub fn ids(&self) -> &[TokenId] {
        &self.0
    }

    pub fn into_ids(self) -> Vec<TokenId> {
        self.0
    }

    pub fn push(&mut self, id: TokenId) {
        self.0.push(id)
    }

    pub fn extended(&self, id: TokenId) -> Sequence {
        let mut ids = Vec::with_capacity(self.0.len() + 1);
        ids.extend_from_slice(&self.0);
        ids.push(id);
        Sequence(ids)
    }
}

impl Deref for Sequence {
    type Target = [TokenId];

    fn deref(&self) -> &[TokenId] {
        &self.0
    }
}

impl From<Vec<TokenId>> for Sequence {
    fn from(ids: Vec<TokenId>) -> Self {
        Sequence(ids)
    }
}

impl From<&[TokenId]> for Sequence {
    fn from(ids: &[TokenId]) -> Self {
        Sequence(ids.to_vec())
    }
}

impl FromIterator<TokenId> for Sequence {
    fn from_iter<I: IntoIterator<Item = TokenId>>(iter: I) -> Self {
        Sequence(iter.into_iter().collect())
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

/// Multiset of contiguous n-grams, stored sorted by n-gram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramBag {
    order: usize,
    grams: Vec<(Box<[TokenId]>, usize)>,
    total: usize,
}

impl NGramBag {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Sum of all counts.
    pub fn total(&self) -> usize {
        self.total
    }

    /// Number of distinct n-grams.
    pub fn distinct(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn count(&self, gram: &[TokenId]) -> usize {
        self.grams
            .binary_search_by(|(g, _)| g.as_ref().cmp(gram))
            .map(|i| self.grams[i].1)
            .unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[TokenId], usize)> {
        self.grams.iter().map(|(g, c)| (g.as_ref(), *c))
    }

    /// Size of the multiset intersection: sum over n-grams of the smaller count.
    pub fn intersection_total(&self, other: &NGramBag) -> usize {
        merge_fold(&self.grams, &other.grams, |(g, _)| g, |acc, a, b| acc + a.1.min(b.1))
    }

    /// Number of n-gram types present in both bags.
    pub fn intersection_distinct(&self, other: &NGramBag) -> usize {
        merge_fold(&self.grams, &other.grams, |(g, _)| g, |acc, _, _| acc + 1)
    }

    pub fn to_set(&self) -> NGramSet {
        NGramSet {
            order: self.order,
            grams: self.grams.iter().map(|(g, _)| g.clone()).collect(),
        }
    }
}

/// Set of contiguous n-grams, stored sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramSet {
    order: usize,
    grams: Vec<Box<[TokenId]>>,
}

impl NGramSet {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn contains(&self, gram: &[TokenId]) -> bool {
        self.grams.binary_search_by(|g| g.as_ref().cmp(gram)).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[TokenId]> {
        self.grams.iter().map(AsRef::as_ref)
    }

    pub fn intersection_len(&self, other: &NGramSet) -> usize {
        merge_fold(&self.grams, &other.grams, |g| g, |acc, _, _| acc + 1)
    }
}

// Walks two sorted lists, folding over the keys they share.
fn merge_fold<T, K, F>(a: &[T], b: &[T], key: K, mut f: F) -> usize
where
    K: Fn(&T) -> &Box<[TokenId]>,
    F: FnMut(usize, &T, &T) -> usize,
{
    let (mut i, mut j, mut acc) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match key(&a[i]).cmp(key(&b[j])) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                acc = f(acc, &a[i], &b[j]);
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// All contiguous n-grams of `seq` with multiplicity.
pub fn ngram_bag(seq: &[TokenId], n: usize) -> Result<NGramBag> {
    if n == 0 {
        return Err(Error::invalid("n-gram order must be at least 1"));
    }
    let mut windows: Vec<&[TokenId]> = if seq.len() >= n { seq.windows(n).collect() } else { Vec::new() };
    let total = windows.len();
    windows.sort_unstable();
    let mut grams: Vec<(Box<[TokenId]>, usize)> = Vec::new();
    for w in windows {
        match grams.last_mut() {
            Some((g, c)) if g.as_ref() == w => *c += 1,
            _ => grams.push((w.into(), 1)),
        }
    }
    Ok(NGramBag { order: n, grams, total })
}

/// Distinct contiguous n-grams of `seq`.
pub fn ngram_set(seq: &[TokenId], n: usize) -> Result<NGramSet> {
    ngram_bag(seq, n).map(|b| b.to_set())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab_vocab() -> Vocabulary {
        Vocabulary::new(["a", "b"]).unwrap()
    }

    #[test]
    fn reserved_ids_precede_tokens() {
        let v = ab_vocab();
        assert_eq!(v.id("<s>"), Some(BOS));
        assert_eq!(v.id("</s>"), Some(EOS));
        assert_eq!(v.id("<unk>"), Some(UNK));
        assert_eq!(v.id("a"), Some(3));
        assert_eq!(v.id("b"), Some(4));
        assert_eq!(v.num_regular(), 2);
        assert_eq!(v.len(), 5);
    }

    #[test]
    fn tokenize_known_unknown_and_lowercase() {
        let v = ab_vocab();
        let (a, b) = (v.id("a").unwrap(), v.id("b").unwrap());
        assert_eq!(v.tokenize("a b a", false).ids(), &[a, b, a]);
        assert_eq!(v.tokenize("a z", false).ids(), &[a, UNK]);
        assert_eq!(v.tokenize("A b", true).ids(), &[a, b]);
        assert_eq!(v.tokenize("A b", false).ids(), &[UNK, b]);
        assert_eq!(v.tokenize("  ", false).len(), 0);
    }

    #[test]
    fn marker_strings_in_text_become_unknown() {
        let v = ab_vocab();
        assert_eq!(v.tokenize("<s> a </s>", false).ids(), &[UNK, 3, UNK]);
    }

    #[test]
    fn vocabulary_rejects_duplicates_and_markers() {
        assert!(Vocabulary::new(["a", "a"]).is_err());
        assert!(Vocabulary::new(["<unk>"]).is_err());
        assert!(Vocabulary::new(["a b"]).is_err());
        assert!(Vocabulary::new([""]).is_err());
    }

    #[test]
    fn vocabulary_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        let v = Vocabulary::new(["the", "cat", "sat"]).unwrap();
        v.save(&path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "the\ncat\nsat\n");
        assert_eq!(Vocabulary::load(&path).unwrap(), v);
    }

    #[test]
    fn bag_examples() {
        let (a, b, c) = (3, 4, 5);
        let bag = ngram_bag(&[a, b, b], 1).unwrap();
        assert_eq!(bag.count(&[a]), 1);
        assert_eq!(bag.count(&[b]), 2);
        assert_eq!(bag.total(), 3);
        assert_eq!(bag.distinct(), 2);

        let bag = ngram_bag(&[a, b, c], 2).unwrap();
        assert_eq!(bag.count(&[a, b]), 1);
        assert_eq!(bag.count(&[b, c]), 1);
        assert_eq!(bag.total(), 2);

        assert!(ngram_bag(&[a], 2).unwrap().is_empty());
        assert!(ngram_bag(&[a], 0).is_err());
    }

    #[test]
    fn set_examples() {
        let (a, b) = (3, 4);
        let set = ngram_set(&[a, b, b], 1).unwrap();
        assert_eq!(set.iter().collect::<Vec<_>>(), vec![&[a][..], &[b][..]]);
        let set = ngram_set(&[a, b, a, b], 2).unwrap();
        assert_eq!(set.len(), 2);
        assert!(set.contains(&[a, b]) && set.contains(&[b, a]));
        assert!(ngram_set(&[], 1).unwrap().is_empty());
        assert!(ngram_set(&[a], 0).is_err());
    }

    #[test]
    fn multiset_intersection_uses_min_counts() {
        let x = ngram_bag(&[3, 4, 4], 1).unwrap();
        let y = ngram_bag(&[4, 5], 1).unwrap();
        assert_eq!(x.intersection_total(&y), 1);
        assert_eq!(x.intersection_distinct(&y), 1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn bag_and_set_sizes(seq in proptest::collection::vec(3u32..8, 0..12), n in 1usize..5) {
                let bag = ngram_bag(&seq, n).unwrap();
                let set = ngram_set(&seq, n).unwrap();
                let expected = (seq.len() + 1).saturating_sub(n);
                prop_assert_eq!(bag.total(), expected);
                prop_assert_eq!(bag.iter().map(|(_, c)| c).sum::<usize>(), expected);
                prop_assert!(bag.iter().all(|(_, c)| c >= 1));
                prop_assert!(set.len() <= bag.total());
                prop_assert_eq!(set.len(), bag.distinct());
            }

            #[test]
            fn detokenize_then_tokenize_round_trips(ids in proptest::collection::vec(3u32..9, 0..10)) {
                let vocab = Vocabulary::new(["p", "q", "r", "s", "t", "u"]).unwrap();
                let text = vocab.detokenize(&ids);
                let back = vocab.tokenize(&text, false);
                prop_assert_eq!(back.ids(), &ids[..]);
                prop_assert_eq!(vocab.tokenize(&text, false), vocab.tokenize(&text, false));
            }
        }
    }
}
