//! Topic-pattern and header-prefix matching.

use super::key::RoutingError;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Word(String),
    /// `*`: exactly one segment.
    Star,
    /// `#`: zero or more segments.
    Hash,
}

/// Topic-exchange binding pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicPattern {
    segments: Vec<Segment>,
}

impl TopicPattern {
    pub fn parse(pattern: &str) -> Result<Self, RoutingError> {
        if pattern.is_empty() {
            return Err(RoutingError::InvalidPattern(pattern.to_string()));
        }
        let segments = pattern
            .split('.')
            .map(|s| match s {
                "*" => Ok(Segment::Star),
                "#" => Ok(Segment::Hash),
                w if !w.is_empty() && !w.contains(['*', '#']) => Ok(Segment::Word(w.to_string())),
                _ => Err(RoutingError::InvalidPattern(pattern.to_string())),
            })
            .collect::<Result<_, _>>()?;
        Ok(TopicPattern { segments })
    }

    /// Direct (non-indexed) match of one key.
    pub fn matches(&self, key: &str) -> bool {
        let words: Vec<&str> = key.split('.').collect();
        fn go(p: &[Segment], w: &[&str]) -> bool {
            match p.split_first() {
                None => w.is_empty(),
                Some((Segment::Hash, rest)) => (0..=w.len()).any(|i| go(rest, &w[i..])),
                Some((Segment::Star, rest)) => !w.is_empty() && go(rest, &w[1..]),
                Some((Segment::Word(s), rest)) => w.first() == Some(&s.as_str()) && go(rest, &w[1..]),
            }
        }
        go(&self.segments, &words)
    }
}

#[derive(Debug, Clone)]
struct TrieNode<V> {
    words: BTreeMap<String, TrieNode<V>>,
    star: Option<Box<TrieNode<V>>>,
    hash: Option<Box<TrieNode<V>>>,
    values: Vec<V>,
}

impl<V> Default for TrieNode<V> {
    fn default() -> Self {
        TrieNode { words: BTreeMap::new(), star: None, hash: None, values: Vec::new() }
    }
}

/// Segment trie over topic patterns; lookup cost depends on key length,
/// not on the number of bindings.
#[derive(Debug, Clone)]
pub struct TopicTrie<V> {
    root: TrieNode<V>,
}

impl<V> Default for TopicTrie<V> {
    fn default() -> Self {
        TopicTrie { root: TrieNode::default() }
    }
}

impl<V: Clone + Ord> TopicTrie<V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, pattern: &TopicPattern, value: V) {
        let mut node = &mut self.root;
        for s in &pattern.segments {
            node = match s {
                Segment::Word(w) => node.words.entry(w.clone()).or_default(),
                Segment::Star => node.star.get_or_insert_with(Default::default),
                Segment::Hash => node.hash.get_or_insert_with(Default::default),
            };
        }
        node.values.push(value);
    }

    /// All values whose pattern matches `key`, sorted and deduplicated.
    pub fn lookup(&self, key: &str) -> Vec<V> {
        let words: Vec<&str> = key.split('.').collect();
        let mut out = Vec::new();
        Self::walk(&self.root, &words, &mut out);
        out.sort();
        out.dedup();
        out
    }

    fn walk(node: &TrieNode<V>, words: &[&str], out: &mut Vec<V>) {
        if let Some(h) = &node.hash {
            for i in 0..=words.len() {
                Self::walk(h, &words[i..], out);
            }
        }
        let Some((first, rest)) = words.split_first() else {
            out.extend(node.values.iter().cloned());
            return;
        };
        if let Some(n) = node.words.get(*first) {
            Self::walk(n, rest, out);
        }
        if let Some(n) = &node.star {
            Self::walk(n, rest, out);
        }
    }
}

/// Header-exchange rule table: a rule `p` matches a type `t` when the
/// segments of `p` are a prefix of the segments of `t`.
#[derive(Debug, Clone)]
pub struct PrefixTable<V> {
    root: PrefixNode<V>,
}

#[derive(Debug, Clone)]
struct PrefixNode<V> {
    children: BTreeMap<String, PrefixNode<V>>,
    values: Vec<V>,
}

impl<V> Default for PrefixNode<V> {
    fn default() -> Self {
        PrefixNode { children: BTreeMap::new(), values: Vec::new() }
    }
}

impl<V> Default for PrefixTable<V> {
    fn default() -> Self {
        PrefixTable { root: PrefixNode::default() }
    }
}

impl<V: Clone + Ord> PrefixTable<V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, prefix: &str, value: V) {
        let mut node = &mut self.root;
        for s in prefix.split('.') {
            node = node.children.entry(s.to_string()).or_default();
        }
        node.values.push(value);
    }

    pub fn lookup(&self, event_type: &str) -> Vec<V> {
        let mut out = Vec::new();
        let mut node = &self.root;
        for s in event_type.split('.') {
            match node.children.get(s) {
                Some(n) => {
                    node = n;
                    out.extend(n.values.iter().cloned());
                }
                None => break,
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

/// Segment-prefix test used by header bindings.
pub fn header_prefix_matches(prefix: &str, event_type: &str) -> bool {
    let p: Vec<&str> = prefix.split('.').collect();
    let t: Vec<&str> = event_type.split('.').collect();
    p.len() <= t.len() && p.iter().zip(&t).all(|(a, b)| a == b)
}
