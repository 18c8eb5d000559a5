//! Document clusters: ingestion, sentence splitting and tokenization.
//!
//! A [`Corpus`] is one cluster of related documents. Sentences carry a
//! corpus-global, dense `sent_id` assigned in document order, so sorting by
//! `sent_id` is the same as sorting by source position.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record on line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("empty corpus")]
    Empty,
    #[error("duplicate document id `{0}`")]
    DuplicateDocId(String),
    #[error("document `{0}` contains no sentences")]
    EmptyDocument(String),
}

/// On-disk layout accepted by [`load_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    /// One JSON object per line with `doc_id`, optional `title`, and `text`.
    Jsonl,
    /// A directory where each `*.txt` file is one document.
    PlainDir,
}

/// Unprocessed document as it appears in a corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub sent_id: usize,
    pub doc_id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub length_words: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: Option<String>,
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub cluster_id: String,
    pub documents: Vec<Document>,
}

impl Corpus {
    /// Splits and tokenizes raw documents, assigning dense sentence ids.
    ///
    /// Fragments that produce no tokens (stray punctuation) are dropped, so a
    /// document made only of such fragments is an error.
    pub fn from_raw(
        cluster_id: impl Into<String>,
        raw: impl IntoIterator<Item = RawDocument>,
    ) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        let mut documents = Vec::new();
        let mut next_id = 0;
        for doc in raw {
            if !seen.insert(doc.doc_id.clone()) {
                return Err(CorpusError::DuplicateDocId(doc.doc_id));
            }
            let mut sentences = Vec::new();
            for text in split_sentences(&doc.text) {
                let tokens = tokenize(&text);
                if tokens.is_empty() {
                    continue;
                }
                sentences.push(Sentence {
                    sent_id: next_id,
                    doc_id: doc.doc_id.clone(),
                    length_words: tokens.len(),
                    text,
                    tokens,
                });
                next_id += 1;
            }
            if sentences.is_empty() {
                return Err(CorpusError::EmptyDocument(doc.doc_id));
            }
            documents.push(Document {
                doc_id: doc.doc_id,
                title: doc.title,
                sentences,
            });
        }
        if documents.is_empty() {
            return Err(CorpusError::Empty);
        }
        Ok(Corpus {
            cluster_id: cluster_id.into(),
            documents,
        })
    }

    /// Parses a jsonl corpus held in memory.
    pub fn from_jsonl(cluster_id: impl Into<String>, input: &str) -> Result<Self, CorpusError> {
        let mut raw = Vec::new();
        for (i, line) in input.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let doc: RawDocument =
                serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            raw.push(doc);
        }
        Self::from_raw(cluster_id, raw)
    }

    /// All sentences in document order.
    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> + '_ {
        self.documents.iter().flat_map(|d| d.sentences.iter())
    }

    pub fn num_sentences(&self) -> usize {
        self.documents.iter().map(|d| d.sentences.len()).sum()
    }

    pub fn num_documents(&self) -> usize {
        self.documents.len()
    }

    pub fn total_words(&self) -> usize {
        self.sentences().map(|s| s.length_words).sum()
    }

    pub fn sentence(&self, sent_id: usize) -> Option<&Sentence> {
        // Documents hold contiguous id ranges in order.
        let idx = self
            .documents
            .partition_point(|d| d.sentences.last().is_some_and(|s| s.sent_id < sent_id));
        self.documents
            .get(idx)?
            .sentences
            .iter()
            .find(|s| s.sent_id == sent_id)
    }

    /// Index of the document holding each sentence, by `sent_id`.
    pub fn document_of_sentence(&self) -> Vec<usize> {
        self.documents
            .iter()
            .enumerate()
            .flat_map(|(d, doc)| std::iter::repeat_n(d, doc.sentences.len()))
            .collect()
    }

    /// Hex SHA-256 over the canonical serialized form.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("corpus serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Loads a corpus from disk. The cluster id is the file stem (jsonl) or the
/// directory name (plain-dir).
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let cluster_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match format {
        CorpusFormat::Jsonl => {
            let text = fs::read_to_string(path).map_err(io_err)?;
            Corpus::from_jsonl(cluster_id, &text)
        }
        CorpusFormat::PlainDir => {
            let mut files: Vec<_> = fs::read_dir(path)
                .map_err(io_err)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "txt"))
                .collect();
            files.sort();
            let mut raw = Vec::with_capacity(files.len());
            for file in files {
                let text = fs::read_to_string(&file).map_err(|source| CorpusError::Io {
                    path: file.display().to_string(),
                    source,
                })?;
                let doc_id = file
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                raw.push(RawDocument {
                    doc_id,
                    title: None,
                    text,
                });
            }
            Corpus::from_raw(cluster_id, raw)
        }
    }
}

/// Words ending in a period that never end a sentence.
const ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "mt.", "ft.", "gen.", "col.",
    "lt.", "sgt.", "capt.", "gov.", "sen.", "rep.", "rev.", "hon.", "pres.", "u.s.", "u.k.",
    "u.n.", "e.u.", "e.g.", "i.e.", "etc.", "vs.", "inc.", "ltd.", "co.", "corp.", "no.",
    "jan.", "feb.", "mar.", "apr.", "aug.", "sept.", "sep.", "oct.", "nov.", "dec.", "a.m.",
    "p.m.", "approx.", "dept.", "est.", "fig.",
];

fn is_abbreviation(word: &str) -> bool {
    let word = word.trim_start_matches(|c: char| !c.is_alphanumeric());
    let lower = word.to_lowercase();
    if ABBREVIATIONS.contains(&lower.as_str()) {
        return true;
    }
    // Single-letter initials such as "J." in "J. Smith".
    let mut chars = word.chars();
    matches!((chars.next(), chars.next(), chars.next()), (Some(c), Some('.'), None) if c.is_uppercase())
}

/// Rule-based sentence splitter.
///
/// A boundary is a `.`, `?` or `!` (optionally followed by closing quotes or
/// brackets) followed by whitespace and then an uppercase letter, except when
/// the word carrying a period is a known abbreviation or an initial.
pub fn split_sentences(raw_text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = raw_text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        let (_, c) = chars[i];
        if matches!(c, '.' | '?' | '!') {
            let mut end = i + 1;
            while end < chars.len() && matches!(chars[end].1, '.' | '?' | '!') {
                end += 1;
            }
            while end < chars.len() && matches!(chars[end].1, '"' | '\'' | ')' | ']' | '”' | '’')
            {
                end += 1;
            }
            let mut next = end;
            while next < chars.len() && chars[next].1.is_whitespace() {
                next += 1;
            }
            let boundary = next > end && next < chars.len() && chars[next].1.is_uppercase();
            if boundary && !(c == '.' && ends_with_abbreviation(raw_text, start, chars[i].0)) {
                let end_byte = chars.get(end).map_or(raw_text.len(), |&(b, _)| b);
                push_trimmed(&mut out, &raw_text[start..end_byte]);
                start = chars[next].0;
                i = next;
                continue;
            }
            i = end;
            continue;
        }
        i += 1;
    }
    push_trimmed(&mut out, &raw_text[start..]);
    out
}

fn ends_with_abbreviation(text: &str, start: usize, period_byte: usize) -> bool {
    let word = text[start..=period_byte]
        .rsplit(char::is_whitespace)
        .next()
        .unwrap_or("");
    is_abbreviation(word)
}

fn push_trimmed(out: &mut Vec<String>, piece: &str) {
    let piece = piece.trim();
    if !piece.is_empty() {
        out.push(piece.to_string());
    }
}

/// Lowercases and splits on any non-alphanumeric character.
pub fn tokenize(sentence_text: &str) -> Vec<String> {
    sentence_text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}
