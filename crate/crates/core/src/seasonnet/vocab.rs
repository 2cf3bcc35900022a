use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub const UNK_TOKEN: &str = "<unk>";

/// Whitespace tokenization of a normalized query; never empty.
pub fn tokenize(query: &str) -> Vec<&str> {
    let tokens: Vec<&str> = query.split_whitespace().collect();
    if tokens.is_empty() {
        vec![UNK_TOKEN]
    } else {
        tokens
    }
}

/// Token → row index. Index 0 is always the unknown token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocab {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocab {
    pub fn new() -> Self {
        let mut v = Self {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        v.insert(UNK_TOKEN);
        v
    }

    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v = Self::new();
        for t in tokens {
            v.insert(t.as_ref());
        }
        v
    }

    /// Returns the index of `token`, adding it if absent.
    pub fn insert(&mut self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        let i = self.tokens.len();
        self.tokens.push(token.to_owned());
        self.index.insert(token.to_owned(), i);
        i
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Index of `token`, or of the unknown token when out of vocabulary.
    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(self.unk())
    }

    pub fn unk(&self) -> usize {
        0
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn encode(&self, query: &str) -> Vec<usize> {
        tokenize(query).into_iter().map(|t| self.id(t)).collect()
    }
}

/// Vocabulary of tokens occurring at least `min_freq` times, in sorted order.
pub fn corpus_vocab<'a>(queries: impl IntoIterator<Item = &'a str>, min_freq: usize) -> Vocab {
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for q in queries {
        for t in q.split_whitespace() {
            *freq.entry(t).or_default() += 1;
        }
    }
    Vocab::from_tokens(
        freq.into_iter()
            .filter(|(_, c)| *c >= min_freq)
            .map(|(t, _)| t),
    )
}

/// Trainable embedding table, one `dim`-wide row per vocabulary entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    vocab: Vocab,
    dim: usize,
    data: Vec<f64>,
}

impl Embeddings {
    pub fn zeros(vocab: Vocab, dim: usize) -> Self {
        let data = vec![0.0; vocab.len() * dim];
        Self { vocab, dim, data }
    }

    /// Rows drawn uniformly from `[-scale, scale]`.
    pub fn random_uniform(vocab: Vocab, dim: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..vocab.len() * dim)
            .map(|_| rng.random_range(-scale..=scale))
            .collect();
        Self { vocab, dim, data }
    }

    pub fn from_parts(vocab: Vocab, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != vocab.len() * dim {
            return Err(Error::Shape(format!(
                "embedding data has {} values, expected {}x{}",
                data.len(),
                vocab.len(),
                dim
            )));
        }
        Ok(Self { vocab, dim, data })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub(crate) fn row_mut(&mut self, id: usize) -> &mut [f64] {
        &mut self.data[id * self.dim..(id + 1) * self.dim]
    }

    /// Row for `token`, or the unknown row.
    pub fn lookup(&self, token: &str) -> &[f64] {
        self.row(self.vocab.id(token))
    }

    /// Mean of the rows of `ids`; `ids` must be non-empty.
    pub fn mean_of(&self, ids: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &id in ids {
            for (o, x) in out.iter_mut().zip(self.row(id)) {
                *o += x;
            }
        }
        let n = ids.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }

    /// Mean-pooled query vector; out-of-vocabulary tokens use the unknown row.
    pub fn embed_query(&self, query: &str) -> Vec<f64> {
        self.mean_of(&self.vocab.encode(query))
    }
}

/// Parses `token v1 .. vd` lines. The unknown token is prepended with a
/// zero row. A leading `<count> <dim>` header line is skipped.
pub fn parse_embeddings<R: BufRead>(reader: R, dim: usize) -> Result<Embeddings> {
    if dim == 0 {
        return Err(Error::InvalidConfig(
            "embedding dim must be positive".into(),
        ));
    }
    let mut vocab = Vocab::new();
    let mut data = vec![0.0; dim];
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else { continue };
        let values: Vec<&str> = parts.collect();
        if i == 0
            && values.len() == 1
            && token.parse::<u64>().is_ok()
            && values[0].parse::<u64>().is_ok()
        {
            continue;
        }
        if values.len() != dim {
            return Err(Error::parse(
                i + 1,
                format!(
                    "expected {dim} values for {token:?}, found {}",
                    values.len()
                ),
            ));
        }
        if vocab.get(token).is_some() {
            continue;
        }
        for v in values {
            data.push(
                v.parse()
                    .map_err(|_| Error::parse(i + 1, format!("bad float {v:?}")))?,
            );
        }
        vocab.insert(token);
    }
    Embeddings::from_parts(vocab, dim, data)
}

pub fn load_embeddings(path: &Path, dim: usize) -> Result<Embeddings> {
    let file = File::open(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    parse_embeddings(BufReader::new(file), dim)
}
