use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// Pre-trained word vectors, all of the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    entries: HashMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::config("embedding dimension must be positive"));
        }
        Ok(EmbeddingTable {
            dimension,
            entries: HashMap::new(),
        })
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f32>) -> Result<()> {
        let token = token.into();
        if vector.len() != self.dimension {
            return Err(Error::load(format!(
                "embedding for {token:?} has length {}, expected {}",
                vector.len(),
                self.dimension
            )));
        }
        self.entries.insert(token, vector);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.entries.get(token).map(Vec::as_slice)
    }

    /// Reads the word2vec text format: a `<vocab_size> <dimension>` header,
    /// then one `<token> <v1> ... <vdim>` line per word.
    pub fn from_word2vec_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(line) => line.map_err(|e| Error::load(format!("embeddings: {e}")))?,
            None => return Err(Error::load("embeddings: empty file")),
        };
        let mut parts = header.split_whitespace();
        let (vocab, dim) = match (parts.next(), parts.next(), parts.next()) {
            (Some(v), Some(d), None) => (v.parse::<usize>(), d.parse::<usize>()),
            _ => return Err(Error::load(format!("embeddings: bad header {header:?}"))),
        };
        let (vocab, dim) = match (vocab, dim) {
            (Ok(v), Ok(d)) if d > 0 => (v, d),
            _ => return Err(Error::load(format!("embeddings: bad header {header:?}"))),
        };

        let mut table = EmbeddingTable::new(dim)?;
        table.entries.reserve(vocab);
        let mut read = 0usize;
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::load(format!("embeddings: {e}")))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().expect("non-empty line has a token");
            let vector = fields
                .map(str::parse::<f32>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Error::load(format!("embeddings line {}: {e}", lineno + 2)))?;
            if vector.len() != dim || vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::load(format!(
                    "embeddings line {}: expected {dim} finite values, found {}",
                    lineno + 2,
                    vector.len()
                )));
            }
            table.entries.insert(token.to_string(), vector);
            read += 1;
        }
        if read != vocab {
            return Err(Error::load(format!(
                "embeddings: header declares {vocab} tokens but the file holds {read}"
            )));
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_word2vec_text(BufReader::new(file))
    }
}

/// Sums the embeddings of all in-vocabulary tokens. Returns the sum and the
/// number of skipped out-of-vocabulary tokens.
pub fn embed_document<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> (Vec<f32>, usize) {
    let mut sum = vec![0.0f32; table.dimension()];
    let mut skipped = 0;
    for token in tokens {
        match table.get(token.as_ref()) {
            Some(v) => sum.iter_mut().zip(v).for_each(|(s, x)| *s += x),
            None => skipped += 1,
        }
    }
    (sum, skipped)
}
