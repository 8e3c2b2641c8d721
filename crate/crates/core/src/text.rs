//! Unigram TF-IDF featurization and keyword search.
//!
//! Weights use raw term counts and smoothed idf,
//! `idf(t) = ln((1 + n_docs) / (1 + df(t))) + 1`, and each document vector is
//! L2-normalized so every stored weight lies in (0, 1].

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusManifest, DocumentId};
use crate::par;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("min_df must be at least 1")]
    InvalidMinDf,
    #[error("{path}: line {line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TextError + '_ {
    move |source| TextError::Io { path: path.to_path_buf(), source }
}

/// Lowercased maximal alphanumeric runs of at least two characters.
fn distinct_terms(doc: &[String]) -> Vec<&str> {
    let mut uniq: Vec<&str> = doc.iter().map(String::as_str).collect();
    uniq.sort_unstable();
    uniq.dedup();
    uniq
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| t.chars().nth(1).is_some()).map(str::to_lowercase).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index_of: HashMap<String, usize>,
    doc_freq: Vec<u32>,
    n_docs: usize,
}

impl Vocabulary {
    /// Keeps every term that occurs in at least `min_df` documents.
    pub fn build(docs: &[Vec<String>], min_df: u32) -> Result<Self, TextError> {
        if docs.is_empty() {
            return Err(TextError::EmptyCorpus);
        }
        if min_df == 0 {
            return Err(TextError::InvalidMinDf);
        }
        let partials = par::map_range(docs.len(), |i| distinct_terms(&docs[i]));
        let mut df: BTreeMap<&str, u32> = BTreeMap::new();
        for doc in &partials {
            for t in doc {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        let (terms, doc_freq): (Vec<String>, Vec<u32>) =
            df.into_iter().filter(|&(_, c)| c >= min_df).map(|(t, c)| (t.to_string(), c)).unzip();
        Ok(Self::from_parts(terms, doc_freq, docs.len()))
    }

    fn from_parts(terms: Vec<String>, doc_freq: Vec<u32>, n_docs: usize) -> Self {
        let index_of = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { terms, index_of, doc_freq, n_docs }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index_of.get(term).copied()
    }

    pub fn doc_freq(&self, index: usize) -> u32 {
        self.doc_freq[index]
    }

    pub fn idf(&self, index: usize) -> f64 {
        let n = self.n_docs as f64;
        ((1.0 + n) / (1.0 + self.doc_freq[index] as f64)).ln() + 1.0
    }

    /// Writes `{term, index, doc_freq}` lines.
    pub fn write_jsonl(&self, path: &Path) -> Result<(), TextError> {
        #[derive(Serialize)]
        struct Line<'a> {
            term: &'a str,
            index: usize,
            doc_freq: u32,
        }
        let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
        for (index, term) in self.terms.iter().enumerate() {
            let line = Line { term, index, doc_freq: self.doc_freq[index] };
            serde_json::to_writer(&mut w, &line).expect("vocab line serializes");
            w.write_all(b"\n").map_err(io_err(path))?;
        }
        w.flush().map_err(io_err(path))
    }

    /// Reads a vocabulary file. `n_docs` is the corpus size it was built
    /// over (the number of vectors in the companion tfidf file).
    pub fn read_jsonl(path: &Path, n_docs: usize) -> Result<Self, TextError> {
        #[derive(Deserialize)]
        struct Line {
            term: String,
            index: usize,
            doc_freq: u32,
        }
        let reader = BufReader::new(File::open(path).map_err(io_err(path))?);
        let mut terms = Vec::new();
        let mut dfs = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(io_err(path))?;
            if line.trim().is_empty() {
                continue;
            }
            let fail = |message: String| TextError::Format { path: path.to_path_buf(), line: i + 1, message };
            let l: Line = serde_json::from_str(&line).map_err(|e| fail(e.to_string()))?;
            if l.index != terms.len() {
                return Err(fail(format!("index {} out of sequence", l.index)));
            }
            if terms.last().is_some_and(|prev: &String| prev.as_str() >= l.term.as_str()) {
                return Err(fail(format!("term {:?} not in sorted order", l.term)));
            }
            if l.doc_freq == 0 || l.doc_freq as usize > n_docs {
                return Err(fail(format!("doc_freq {} outside 1..={n_docs}", l.doc_freq)));
            }
            terms.push(l.term);
            dfs.push(l.doc_freq);
        }
        Ok(Self::from_parts(terms, dfs, n_docs))
    }
}

/// Sparse vector with strictly increasing indices and positive values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn empty(dim: usize) -> Self {
        SparseVector { dim, indices: Vec::new(), values: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn get(&self, index: u32) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(i) => self.values[i],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i as usize] = v;
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    fn is_well_formed(&self) -> bool {
        self.indices.len() == self.values.len()
            && self.indices.windows(2).all(|w| w[0] < w[1])
            && self.indices.last().is_none_or(|&i| (i as usize) < self.dim)
            && self.values.iter().all(|&v| v > 0.0 && v.is_finite())
    }
}

/// L2-normalized TF-IDF vector of one document. Out-of-vocabulary terms are
/// ignored; a document with none in vocabulary maps to the empty vector.
pub fn featurize_tfidf(doc: &[String], vocab: &Vocabulary) -> SparseVector {
    let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
    for t in doc {
        if let Some(i) = vocab.index_of(t) {
            *counts.entry(i).or_insert(0) += 1;
        }
    }
    let mut indices = Vec::with_capacity(counts.len());
    let mut values = Vec::with_capacity(counts.len());
    for (i, tf) in counts {
        indices.push(i as u32);
        values.push(tf as f64 * vocab.idf(i));
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        values.iter_mut().for_each(|v| *v /= norm);
    }
    SparseVector { dim: vocab.len(), indices, values }
}

/// Featurizes every document against a vocabulary built from the same docs.
pub fn featurize_corpus(docs: &[Vec<String>], min_df: u32) -> Result<(Vocabulary, Vec<SparseVector>), TextError> {
    let vocab = Vocabulary::build(docs, min_df)?;
    let vectors = par::map_slice(docs, |d| featurize_tfidf(d, &vocab));
    Ok((vocab, vectors))
}

/// Term -> postings of (document ordinal, weight), postings sorted by ordinal.
#[derive(Clone, Debug)]
pub struct InvertedIndex {
    postings: Vec<Vec<(u32, f64)>>,
    n_docs: usize,
}

impl InvertedIndex {
    pub fn build(vectors: &[SparseVector], vocab_len: usize) -> Self {
        let mut postings = vec![Vec::new(); vocab_len];
        for (doc, v) in vectors.iter().enumerate() {
            for (term, w) in v.iter() {
                postings[term as usize].push((doc as u32, w));
            }
        }
        InvertedIndex { postings, n_docs: vectors.len() }
    }

    pub fn postings(&self, term: usize) -> &[(u32, f64)] {
        &self.postings[term]
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SearchHit {
    pub ordinal: usize,
    pub score: f64,
}

/// Ranks documents by the summed TF-IDF weight of the distinct query terms.
///
/// Terms are accumulated in vocabulary order, so scores are bit-identical to
/// a dense dot product with the query's 0/1 indicator vector. Ties go to the
/// lower ordinal; zero scores are dropped.
pub fn keyword_search(index: &InvertedIndex, vocab: &Vocabulary, query: &str, limit: usize) -> Vec<SearchHit> {
    let mut terms: Vec<usize> = tokenize(query).iter().filter_map(|t| vocab.index_of(t)).collect();
    terms.sort_unstable();
    terms.dedup();
    let mut scores: HashMap<u32, f64> = HashMap::new();
    for t in terms {
        for &(doc, w) in index.postings(t) {
            *scores.entry(doc).or_insert(0.0) += w;
        }
    }
    let mut hits: Vec<SearchHit> = scores
        .into_iter()
        .filter(|&(_, s)| s > 0.0)
        .map(|(d, score)| SearchHit { ordinal: d as usize, score })
        .collect();
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.ordinal.cmp(&b.ordinal)));
    hits.truncate(limit);
    hits
}

/// Concatenated page text of a document: `<text_dir>/<doc_id>/page-<n>.txt`
/// in page order, newline-joined. Missing directories yield an empty string.
pub fn read_document_text(text_dir: &Path, doc_id: &DocumentId) -> Result<String, TextError> {
    let dir = text_dir.join(doc_id.as_str());
    let entries = match std::fs::read_dir(&dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(String::new()),
        Err(e) => return Err(io_err(&dir)(e)),
    };
    let mut pages: Vec<(u32, PathBuf)> = Vec::new();
    for entry in entries {
        let path = entry.map_err(io_err(&dir))?.path();
        let n = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("page-")?.strip_suffix(".txt")?.parse().ok());
        if let Some(n) = n {
            pages.push((n, path));
        }
    }
    pages.sort();
    let mut text = String::new();
    for (_, path) in pages {
        let bytes = std::fs::read(&path).map_err(io_err(&path))?;
        text.push_str(&String::from_utf8_lossy(&bytes));
        text.push('\n');
    }
    Ok(text)
}

/// Tokenized document text for every manifest record, in manifest order.
pub fn load_corpus_tokens(manifest: &CorpusManifest, text_dir: &Path) -> Result<Vec<Vec<String>>, TextError> {
    par::map_slice(manifest.records(), |r| read_document_text(text_dir, &r.id).map(|t| tokenize(&t)))
        .into_iter()
        .collect()
}

#[derive(Serialize, Deserialize)]
struct VectorLine {
    doc_id: DocumentId,
    indices: Vec<u32>,
    values: Vec<f64>,
}

/// Writes `{doc_id, indices, values}` lines, one per document.
pub fn write_vectors(path: &Path, ids: &[DocumentId], vectors: &[SparseVector]) -> Result<(), TextError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for (id, v) in ids.iter().zip(vectors) {
        let line = VectorLine { doc_id: id.clone(), indices: v.indices.clone(), values: v.values.clone() };
        serde_json::to_writer(&mut w, &line).expect("vector line serializes");
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_vectors(path: &Path, dim: usize) -> Result<(Vec<DocumentId>, Vec<SparseVector>), TextError> {
    let reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut ids = Vec::new();
    let mut vectors = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let fail = |message: String| TextError::Format { path: path.to_path_buf(), line: i + 1, message };
        let l: VectorLine = serde_json::from_str(&line).map_err(|e| fail(e.to_string()))?;
        let v = SparseVector { dim, indices: l.indices, values: l.values };
        if !v.is_well_formed() {
            return Err(fail("malformed sparse vector".into()));
        }
        ids.push(l.doc_id);
        vectors.push(v);
    }
    Ok((ids, vectors))
}

/// Counts the lines of a vectors file (the `n_docs` of its vocabulary).
pub fn count_vectors(path: &Path) -> Result<usize, TextError> {
    let reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut n = 0;
    for line in reader.lines() {
        if !line.map_err(io_err(path))?.trim().is_empty() {
            n += 1;
        }
    }
    Ok(n)
}

/// File names used inside a text-feature directory.
pub const VOCAB_FILE: &str = "vocab.jsonl";
pub const TFIDF_FILE: &str = "tfidf.jsonl";

/// A vocabulary with its document vectors, as written by `featurize-text`.
#[derive(Clone, Debug)]
pub struct TextArtifacts {
    pub vocab: Vocabulary,
    pub ids: Vec<DocumentId>,
    pub vectors: Vec<SparseVector>,
}

impl TextArtifacts {
    /// Tokenizes every manifest document's text sidecars and builds vectors.
    pub fn build(manifest: &CorpusManifest, text_dir: &Path, min_df: u32) -> Result<Self, TextError> {
        let tokens = load_corpus_tokens(manifest, text_dir)?;
        let (vocab, vectors) = featurize_corpus(&tokens, min_df)?;
        let ids = manifest.records().iter().map(|r| r.id.clone()).collect();
        Ok(TextArtifacts { vocab, ids, vectors })
    }

    pub fn write(&self, dir: &Path) -> Result<(), TextError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        self.vocab.write_jsonl(&dir.join(VOCAB_FILE))?;
        write_vectors(&dir.join(TFIDF_FILE), &self.ids, &self.vectors)
    }

    /// Loads `vocab.jsonl` and `tfidf.jsonl` from `dir`.
    pub fn load(dir: &Path) -> Result<Self, TextError> {
        Self::load_files(&dir.join(VOCAB_FILE), &dir.join(TFIDF_FILE))
    }

    pub fn load_files(vocab_path: &Path, tfidf_path: &Path) -> Result<Self, TextError> {
        let n_docs = count_vectors(tfidf_path)?;
        let vocab = Vocabulary::read_jsonl(vocab_path, n_docs)?;
        let (ids, vectors) = read_vectors(tfidf_path, vocab.len())?;
        Ok(TextArtifacts { vocab, ids, vectors })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Positions whose document passes `keep`, in file order.
    pub fn select(&self, mut keep: impl FnMut(&DocumentId) -> bool) -> Vec<usize> {
        (0..self.ids.len()).filter(|&i| keep(&self.ids[i])).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("The court, FILED."), ["the", "court", "filed"]);
        assert_eq!(tokenize("A b2 c"), ["b2"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("N2O5 über-cool"), ["n2o5", "über", "cool"]);
    }

    #[test]
    fn vocabulary_counts_documents() {
        let docs = vec![toks("aa bb aa"), toks("bb cc")];
        let v = Vocabulary::build(&docs, 1).unwrap();
        assert_eq!(v.terms(), ["aa", "bb", "cc"]);
        assert_eq!((0..3).map(|i| v.doc_freq(i)).collect::<Vec<_>>(), [1, 2, 1]);
        let v2 = Vocabulary::build(&docs, 2).unwrap();
        assert_eq!(v2.terms(), ["bb"]);
        assert!(matches!(Vocabulary::build(&[], 1), Err(TextError::EmptyCorpus)));
    }

    #[test]
    fn hand_computed_weights() {
        let docs = vec![toks("court court filed"), toks("farm")];
        let (_, vecs) = featurize_corpus(&docs, 1).unwrap();
        // vocab: court, farm, filed; all df = 1 so idf cancels.
        assert_eq!(vecs[0].indices, [0, 2]);
        assert!((vecs[0].values[0] - 2.0 / 5f64.sqrt()).abs() < 1e-9);
        assert!((vecs[0].values[1] - 1.0 / 5f64.sqrt()).abs() < 1e-9);
        assert!((vecs[0].values[0] - 0.894427).abs() < 1e-6);
    }

    #[test]
    fn out_of_vocabulary_doc_is_empty() {
        let docs = vec![toks("alpha beta")];
        let vocab = Vocabulary::build(&docs, 1).unwrap();
        let v = featurize_tfidf(&toks("gamma delta"), &vocab);
        assert!(v.is_empty());
        assert_eq!(v.dim, 2);
    }

    #[test]
    fn search_single_posting_and_miss() {
        let docs = vec![toks("unique words"), toks("other words")];
        let (vocab, vecs) = featurize_corpus(&docs, 1).unwrap();
        let idx = InvertedIndex::build(&vecs, vocab.len());
        let hits = keyword_search(&idx, &vocab, "unique", 10);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].ordinal, 0);
        assert!(keyword_search(&idx, &vocab, "nothing here", 10).is_empty());
        let both = keyword_search(&idx, &vocab, "words", 1);
        assert_eq!(both.len(), 1);
    }

    #[test]
    fn idf_monotone_in_doc_freq() {
        let docs = vec![toks("aa bb cc"), toks("aa bb"), toks("aa")];
        let v = Vocabulary::build(&docs, 1).unwrap();
        assert!(v.idf(2) > v.idf(1));
        assert!(v.idf(1) > v.idf(0));
    }

    proptest! {
        #[test]
        fn vectors_are_unit_norm(docs in proptest::collection::vec("[a-e ]{0,40}", 1..20)) {
            let docs: Vec<Vec<String>> = docs.iter().map(|d| tokenize(d)).collect();
            let (_, vecs) = featurize_corpus(&docs, 1).unwrap();
            for v in vecs {
                prop_assert!(v.is_well_formed());
                if !v.is_empty() {
                    prop_assert!((v.norm() - 1.0).abs() < 1e-9);
                    prop_assert!(v.values.iter().all(|&x| x > 0.0 && x <= 1.0));
                }
            }
        }
    }
}
