use serde::{Deserialize, Serialize};

/// One query/response example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExamplePair<X, Y> {
    pub query: X,
    pub response: Y,
}

impl<X, Y> ExamplePair<X, Y> {
    pub fn new(query: X, response: Y) -> Self {
        Self { query, response }
    }
}

/// Ordered sequence of examples used as the in-context dataset.
///
/// Order is significant: it is the order in which examples are rendered to
/// (or conditioned on by) the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContextDataset<X, Y> {
    pairs: Vec<ExamplePair<X, Y>>,
}

impl<X, Y> Default for ContextDataset<X, Y> {
    fn default() -> Self {
        Self { pairs: Vec::new() }
    }
}

impl<X, Y> ContextDataset<X, Y> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: Vec<ExamplePair<X, Y>>) -> Self {
        Self { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn reserve(&mut self, additional: usize) {
        self.pairs.reserve(additional);
    }

    pub fn push(&mut self, pair: ExamplePair<X, Y>) {
        self.pairs.push(pair);
    }

    pub fn pairs(&self) -> &[ExamplePair<X, Y>] {
        &self.pairs
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ExamplePair<X, Y>> {
        self.pairs.iter()
    }

    pub fn into_pairs(self) -> Vec<ExamplePair<X, Y>> {
        self.pairs
    }

    pub fn responses(&self) -> impl Iterator<Item = &Y> {
        self.pairs.iter().map(|p| &p.response)
    }
}

impl<X: Clone, Y: Clone> ContextDataset<X, Y> {
    /// The first `n` examples (or all of them if there are fewer).
    pub fn prefix(&self, n: usize) -> Self {
        Self {
            pairs: self.pairs[..n.min(self.pairs.len())].to_vec(),
        }
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &Self) -> Self {
        let mut pairs = Vec::with_capacity(self.len() + other.len());
        pairs.extend_from_slice(&self.pairs);
        pairs.extend_from_slice(&other.pairs);
        Self { pairs }
    }
}

impl<X, Y> FromIterator<ExamplePair<X, Y>> for ContextDataset<X, Y> {
    fn from_iter<I: IntoIterator<Item = ExamplePair<X, Y>>>(iter: I) -> Self {
        Self {
            pairs: iter.into_iter().collect(),
        }
    }
}

impl<X, Y> FromIterator<(X, Y)> for ContextDataset<X, Y> {
    fn from_iter<I: IntoIterator<Item = (X, Y)>>(iter: I) -> Self {
        Self {
            pairs: iter.into_iter().map(|(x, y)| ExamplePair::new(x, y)).collect(),
        }
    }
}

impl<'a, X, Y> IntoIterator for &'a ContextDataset<X, Y> {
    type Item = &'a ExamplePair<X, Y>;
    type IntoIter = std::slice::Iter<'a, ExamplePair<X, Y>>;

    fn into_iter(self) -> Self::IntoIter {
        self.pairs.iter()
    }
}
