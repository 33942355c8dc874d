//! Text normalization and tokenization for news/post bodies.
//!
//! The cleaning order is fixed: lowercase, drop `@`/`#` runs, drop URL-shaped
//! substrings, replace remaining non-alphanumerics (except intra-word
//! apostrophes) with spaces, collapse whitespace. Tokenization then splits on
//! whitespace and removes stop words.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("failed to read stop-word file {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("stop-word file line {line}: `{text}` is not a single token")]
    BadStopword { line: usize, text: String },
}

/// The active stop-word set. Loaded from a one-token-per-line text file
/// (`#` starts a comment line); entries are lowercased on load.
#[derive(Debug, Clone, Default)]
pub struct StopwordSet {
    words: HashSet<String>,
}

impl StopwordSet {
    pub fn empty() -> StopwordSet {
        StopwordSet::default()
    }

    pub fn from_words<I, S>(words: I) -> StopwordSet
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        StopwordSet {
            words: words
                .into_iter()
                .map(|w| w.as_ref().to_lowercase())
                .collect(),
        }
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<StopwordSet, PreprocessError> {
        let mut words = HashSet::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line.map_err(|source| PreprocessError::Io {
                path: "<reader>".to_string(),
                source,
            })?;
            let entry = line.trim();
            if entry.is_empty() || entry.starts_with('#') {
                continue;
            }
            if entry.split_whitespace().count() != 1 {
                return Err(PreprocessError::BadStopword {
                    line: i + 1,
                    text: entry.to_string(),
                });
            }
            words.insert(entry.to_lowercase());
        }
        Ok(StopwordSet { words })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<StopwordSet, PreprocessError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| PreprocessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        StopwordSet::from_reader(file)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// A document reduced to its cleaned token sequence. Tokens are lowercase
/// `[a-z0-9']` words, in original order, with stop words removed. Documents
/// stay positionally aligned with the `NewsRecord` slice they came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessedDoc {
    pub tokens: Vec<String>,
}

impl ProcessedDoc {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_lowercase() || c.is_ascii_digit()
}

/// Removes, from `text`, every maximal run that starts with one of the
/// trigger prefixes and extends to the next whitespace. A single space is
/// left in place of each removed run.
fn remove_runs(text: &str, starts_here: impl Fn(&str) -> bool) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while !rest.is_empty() {
        if starts_here(rest) {
            let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
            rest = &rest[end..];
            out.push(' ');
        } else {
            let mut chars = rest.chars();
            out.push(chars.next().expect("nonempty"));
            rest = chars.as_str();
        }
    }
    out
}

/// Normalizes raw text into cleaned lowercase words.
///
/// Total function: any input, including empty, yields a (possibly empty)
/// cleaned string. Applying it twice gives the same result as applying it
/// once.
pub fn normalize(text: &str) -> String {
    let lowered = text.to_lowercase();
    let no_tags = remove_runs(&lowered, |s| s.starts_with('@') || s.starts_with('#'));
    let no_urls = remove_runs(&no_tags, |s| {
        s.starts_with("http://") || s.starts_with("https://") || s.starts_with("www.")
    });

    let chars: Vec<char> = no_urls.chars().collect();
    let mut filtered = String::with_capacity(chars.len());
    for (i, &c) in chars.iter().enumerate() {
        let intra_word_apostrophe = c == '\''
            && i > 0
            && i + 1 < chars.len()
            && is_word_char(chars[i - 1])
            && is_word_char(chars[i + 1]);
        if is_word_char(c) || intra_word_apostrophe {
            filtered.push(c);
        } else {
            filtered.push(' ');
        }
    }

    let mut out = String::with_capacity(filtered.len());
    for word in filtered.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Splits normalized text on whitespace and drops stop words, preserving
/// the original token order.
pub fn tokenize_and_filter(cleaned: &str, stopwords: &StopwordSet) -> Vec<String> {
    cleaned
        .split_whitespace()
        .filter(|token| !stopwords.contains(token))
        .map(str::to_string)
        .collect()
}

/// Full preprocessing of one raw text: normalize then tokenize/filter.
pub fn process(text: &str, stopwords: &StopwordSet) -> ProcessedDoc {
    ProcessedDoc {
        tokens: tokenize_and_filter(&normalize(text), stopwords),
    }
}
