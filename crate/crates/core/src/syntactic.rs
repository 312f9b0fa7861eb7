//! Character-level string similarity against a fixed taxonomy.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::text::{canonicalize_title, sorted_intersection_len, QgramTokenizer};

/// Ordered standard titles. Index `k` means the same title everywhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    titles: Vec<String>,
    groups: Vec<Option<String>>,
    version: String,
}

impl Taxonomy {
    pub fn new<S: AsRef<str>>(titles: &[S]) -> Result<Self> {
        Self::with_groups(titles.iter().map(|t| (t.as_ref(), None)))
    }

    pub fn with_groups<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, Option<&'a str>)>,
    {
        let mut seen = BTreeSet::new();
        let mut titles = Vec::new();
        let mut groups = Vec::new();
        for (raw, group) in rows {
            let t = canonicalize_title(raw)?;
            if !seen.insert(t.clone()) {
                return Err(Error::Data(format!("duplicate standard title {t:?}")));
            }
            titles.push(t);
            groups.push(group.map(str::to_string));
        }
        if titles.is_empty() {
            return Err(Error::Degenerate("taxonomy has no titles".into()));
        }
        let mut h = Sha256::new();
        for t in &titles {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        let version = hex::encode(h.finalize());
        Ok(Self {
            titles,
            groups,
            version,
        })
    }

    pub fn len(&self) -> usize {
        self.titles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.titles.is_empty()
    }

    pub fn titles(&self) -> &[String] {
        &self.titles
    }

    pub fn title(&self, k: usize) -> &str {
        &self.titles[k]
    }

    pub fn group(&self, k: usize) -> Option<&str> {
        self.groups[k].as_deref()
    }

    pub fn index_of(&self, title: &str) -> Option<usize> {
        let t = canonicalize_title(title).ok()?;
        self.titles.iter().position(|x| *x == t)
    }

    /// SHA-256 of the ordered titles.
    pub fn version(&self) -> &str {
        &self.version
    }

    /// Rows `title<TAB>group`; the group column may be empty or absent.
    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.splitn(2, '\t');
            let title = parts.next().unwrap_or_default().to_string();
            let group = parts
                .next()
                .map(str::trim)
                .filter(|g| !g.is_empty())
                .map(str::to_string);
            if canonicalize_title(&title).is_err() {
                return Err(Error::format(i + 1, "empty standard title"));
            }
            rows.push((title, group));
        }
        Self::with_groups(rows.iter().map(|(t, g)| (t.as_str(), g.as_deref())))
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        for (t, g) in self.titles.iter().zip(&self.groups) {
            writeln!(w, "{t}\t{}", g.as_deref().unwrap_or(""))?;
        }
        Ok(())
    }
}

/// `|A ∩ B| / sqrt(|A| |B|)` over padded character 3-gram sets.
pub fn string_cosine(a: &str, b: &str) -> Result<f64> {
    string_cosine_with(&QgramTokenizer::default(), a, b)
}

pub fn string_cosine_with(tok: &QgramTokenizer, a: &str, b: &str) -> Result<f64> {
    let ga = tok.gram_set(&canonicalize_title(a)?);
    let gb = tok.gram_set(&canonicalize_title(b)?);
    set_cosine(&ga, &gb)
}

fn set_cosine(a: &[String], b: &[String]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Degenerate(
            "string too short to produce any q-grams".into(),
        ));
    }
    let inter = sorted_intersection_len(a, b) as f64;
    Ok((inter / ((a.len() * b.len()) as f64).sqrt()).min(1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntacticVector {
    pub values: Vec<f64>,
    pub taxonomy_version: String,
}

/// Taxonomy with every standard title's gram set computed once.
#[derive(Debug, Clone)]
pub struct SyntacticEncoder {
    taxonomy: Taxonomy,
    tokenizer: QgramTokenizer,
    standard_grams: Vec<Vec<String>>,
}

impl SyntacticEncoder {
    pub fn new(taxonomy: Taxonomy, tokenizer: QgramTokenizer) -> Result<Self> {
        let standard_grams = taxonomy
            .titles()
            .iter()
            .map(|t| tokenizer.gram_set(t))
            .collect();
        Ok(Self {
            taxonomy,
            tokenizer,
            standard_grams,
        })
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn dim(&self) -> usize {
        self.taxonomy.len()
    }

    pub fn encode(&self, title: &str) -> Result<SyntacticVector> {
        let g = self.tokenizer.gram_set(&canonicalize_title(title)?);
        let values = self
            .standard_grams
            .iter()
            .map(|s| set_cosine(&g, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(SyntacticVector {
            values,
            taxonomy_version: self.taxonomy.version().to_string(),
        })
    }
}

pub fn build_syntactic_vector(title: &str, taxonomy: &Taxonomy) -> Result<SyntacticVector> {
    SyntacticEncoder::new(taxonomy.clone(), QgramTokenizer::default())?.encode(title)
}
