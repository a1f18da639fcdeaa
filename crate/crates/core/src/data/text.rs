use std::fs;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};

use super::{embed_document, factorize, Dataset, DatasetKind, EmbeddingTable};
use crate::error::{Error, Result};

/// Token statistics gathered while embedding a corpus.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TextDiagnostics {
    pub documents: usize,
    pub tokens: usize,
    pub skipped_tokens: usize,
}

/// Reads one label per line.
pub fn read_label_lines(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(|l| l.trim().to_string()).collect())
}

/// Loads a one-document-per-line corpus with a matching labels file. Each
/// document is lowercased, split on whitespace and embedded as the sum of its
/// word vectors.
pub fn load_text(
    corpus_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    table: &EmbeddingTable,
) -> Result<(Dataset, TextDiagnostics)> {
    let cp = corpus_path.as_ref();
    let corpus = fs::read_to_string(cp).map_err(|e| Error::io(cp, e))?;
    let labels = read_label_lines(labels_path)?;
    embed_corpus(&corpus, &labels, table)
}

pub(crate) fn embed_corpus(
    corpus: &str,
    labels: &[String],
    table: &EmbeddingTable,
) -> Result<(Dataset, TextDiagnostics)> {
    let docs: Vec<&str> = corpus.lines().collect();
    if docs.len() != labels.len() {
        return Err(Error::load(format!(
            "corpus has {} documents but labels file has {} lines",
            docs.len(),
            labels.len()
        )));
    }
    let dim = table.dimension();
    let mut diag = TextDiagnostics {
        documents: docs.len(),
        ..Default::default()
    };
    let mut values = Vec::with_capacity(docs.len() * dim);
    for doc in &docs {
        let lowered = doc.to_lowercase();
        let tokens: Vec<&str> = lowered.split_whitespace().collect();
        let (v, skipped) = embed_document(&tokens, table);
        diag.tokens += tokens.len();
        diag.skipped_tokens += skipped;
        values.extend(v);
    }
    if diag.skipped_tokens > 0 {
        log::info!(
            "{} of {} tokens were not in the embedding vocabulary",
            diag.skipped_tokens,
            diag.tokens
        );
    }
    let features = ArrayD::from_shape_vec(IxDyn(&[docs.len(), dim]), values)
        .map_err(|e| Error::load(e.to_string()))?;
    let (codes, names) = factorize(labels);
    let c = names.len();
    let ds = Dataset::from_indices(features, &codes, c, DatasetKind::Text, Some(names))?;
    Ok((ds, diag))
}
