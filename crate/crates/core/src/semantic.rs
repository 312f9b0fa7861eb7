//! Semantic title vectors.
//!
//! [`SemanticProvider`] is the injection point for a sentence encoder. Two
//! providers ship with the crate: a deterministic signed feature-hashing
//! encoder over character trigrams and word unigrams, and a loader for
//! externally computed vectors.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{canonicalize_title, QgramTokenizer};
use crate::tsv::{fmt_vector, header_value, parse_header, parse_vector_row};

/// Where a cached vector came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    /// Loaded from the precomputed file at this path.
    Precomputed(String),
    /// Produced by the named encoder.
    Encoder(String),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Precomputed(p) => write!(f, "precomputed:{p}"),
            Provenance::Encoder(id) => write!(f, "encoder:{id}"),
        }
    }
}

/// Maps a title to a unit-norm vector of fixed dimension. Implementations
/// must be deterministic.
pub trait SemanticProvider: Send + Sync {
    fn dim(&self) -> usize;

    fn id(&self) -> String;

    fn embed(&self, title: &str) -> Result<Vec<f64>> {
        self.embed_with_provenance(title).map(|(v, _)| v)
    }

    fn embed_with_provenance(&self, title: &str) -> Result<(Vec<f64>, Provenance)>;
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn normalize(v: &mut [f64]) -> Result<()> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Degenerate("cannot normalize a zero vector".into()));
    }
    v.iter_mut().for_each(|x| *x /= n);
    Ok(())
}

/// Signed feature hashing of padded character trigrams plus word unigrams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedNgramEncoder {
    dim: usize,
    seed: u64,
}

impl HashedNgramEncoder {
    pub const MIN_DIM: usize = 8;

    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < Self::MIN_DIM {
            return Err(Error::Config(format!(
                "hashed encoder dimension must be at least {}, got {dim}",
                Self::MIN_DIM
            )));
        }
        Ok(Self { dim, seed })
    }

    pub fn tokens(title: &str) -> Vec<String> {
        let grams = QgramTokenizer::default().grams(title);
        grams
            .into_iter()
            .map(|g| format!("c:{g}"))
            .chain(title.split_whitespace().map(|w| format!("w:{w}")))
            .collect()
    }
}

impl SemanticProvider for HashedNgramEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn id(&self) -> String {
        format!("hashed-ngram(d={},seed={})", self.dim, self.seed)
    }

    fn embed_with_provenance(&self, title: &str) -> Result<(Vec<f64>, Provenance)> {
        let title = canonicalize_title(title)?;
        let mut v = vec![0.0; self.dim];
        for tok in Self::tokens(&title) {
            let h = fnv1a(self.seed, tok.as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            let sign = if splitmix64(h) & 1 == 0 { 1.0 } else { -1.0 };
            v[bucket] += sign;
        }
        normalize(&mut v)?;
        Ok((v, Provenance::Encoder(self.id())))
    }
}

pub fn hashed_ngram_embed(title: &str, dim: usize, seed: u64) -> Result<Vec<f64>> {
    HashedNgramEncoder::new(dim, seed)?.embed(title)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub vector: Vec<f64>,
    pub provenance: Provenance,
}

/// Title-keyed vectors of one shared dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingCache {
    dim: usize,
    entries: BTreeMap<String, CacheEntry>,
}

impl EmbeddingCache {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, title: &str) -> Option<&CacheEntry> {
        self.entries.get(title)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &CacheEntry)> + '_ {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn insert(&mut self, title: String, vector: Vec<f64>, provenance: Provenance) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::dim(format!(
                "vector of dimension {} in a cache of dimension {}",
                vector.len(),
                self.dim
            )));
        }
        self.entries.insert(title, CacheEntry { vector, provenance });
        Ok(())
    }

    /// Writes `#embeddings d=<dim> normalize=<flag>` and one row per title.
    pub fn write_tsv<W: Write>(&self, mut w: W, normalize: bool) -> Result<()> {
        writeln!(w, "#embeddings d={} normalize={normalize}", self.dim)?;
        for (t, e) in &self.entries {
            writeln!(w, "{t}\t{}", fmt_vector(&e.vector))?;
        }
        Ok(())
    }

    /// Parses the embedding TSV; `source` becomes each entry's provenance.
    pub fn read_tsv<R: BufRead>(reader: R, source: &str) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format(1, "empty embedding file"))??;
        let fields = parse_header(&header, "embeddings")?;
        let dim: usize = header_value(&fields, "d")?
            .parse()
            .map_err(|_| Error::format(1, "bad d="))?;
        let renormalize: bool = header_value(&fields, "normalize")?
            .parse()
            .map_err(|_| Error::format(1, "normalize= must be true or false"))?;
        let mut cache = Self::new(dim);
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let (title, mut v) = parse_vector_row(&line, lineno)?;
            if v.len() != dim {
                return Err(Error::format(
                    lineno,
                    format!("{} values, header says d={dim}", v.len()),
                ));
            }
            if cache.entries.contains_key(&title) {
                return Err(Error::format(lineno, format!("duplicate title {title:?}")));
            }
            if renormalize {
                normalize(&mut v).map_err(|e| Error::format(lineno, e.to_string()))?;
            }
            cache.insert(title, v, Provenance::Precomputed(source.to_string()))?;
        }
        Ok(cache)
    }
}

pub fn load_precomputed(path: &Path) -> Result<EmbeddingCache> {
    let file = std::fs::File::open(path)?;
    EmbeddingCache::read_tsv(std::io::BufReader::new(file), &path.display().to_string())
}

/// Serves vectors from an [`EmbeddingCache`], optionally falling back to a
/// hashed encoder for titles the cache lacks.
#[derive(Debug, Clone)]
pub struct PrecomputedProvider {
    cache: EmbeddingCache,
    fallback: Option<HashedNgramEncoder>,
}

impl PrecomputedProvider {
    pub fn new(cache: EmbeddingCache, fallback: Option<HashedNgramEncoder>) -> Result<Self> {
        if let Some(f) = &fallback {
            if f.dim() != cache.dim() {
                return Err(Error::Config(format!(
                    "fallback dimension {} differs from precomputed dimension {}",
                    f.dim(),
                    cache.dim()
                )));
            }
        }
        Ok(Self { cache, fallback })
    }
}

impl SemanticProvider for PrecomputedProvider {
    fn dim(&self) -> usize {
        self.cache.dim()
    }

    fn id(&self) -> String {
        match &self.fallback {
            Some(f) => format!("precomputed+{}", f.id()),
            None => "precomputed".into(),
        }
    }

    fn embed_with_provenance(&self, title: &str) -> Result<(Vec<f64>, Provenance)> {
        let key = canonicalize_title(title)?;
        match (self.cache.get(&key), &self.fallback) {
            (Some(e), _) => {
                let mut v = e.vector.clone();
                normalize(&mut v)?;
                Ok((v, e.provenance.clone()))
            }
            (None, Some(f)) => f.embed_with_provenance(&key),
            (None, None) => Err(Error::Lookup(format!("no precomputed vector for {key:?}"))),
        }
    }
}

/// Embeds every title; missing titles are reported together.
pub fn embed_titles<S: AsRef<str>>(provider: &dyn SemanticProvider, titles: &[S]) -> Result<EmbeddingCache> {
    let mut cache = EmbeddingCache::new(provider.dim());
    let mut missing = Vec::new();
    for t in titles {
        let key = canonicalize_title(t.as_ref())?;
        match provider.embed_with_provenance(&key) {
            Ok((v, prov)) => cache.insert(key, v, prov)?,
            Err(Error::Lookup(_)) => missing.push(key),
            Err(e) => return Err(e),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Lookup(format!(
            "no vectors for {} title(s): {}",
            missing.len(),
            missing.join(", ")
        )));
    }
    Ok(cache)
}

/// Provider selection: `hashed` or `precomputed:<path>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderSpec {
    Hashed,
    Precomputed(PathBuf),
}

impl FromStr for ProviderSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "hashed" => Ok(ProviderSpec::Hashed),
            Some(("precomputed", p)) if !p.is_empty() => Ok(ProviderSpec::Precomputed(p.into())),
            _ => Err(Error::Config(format!(
                "provider must be \"hashed\" or \"precomputed:<path>\", got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for ProviderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderSpec::Hashed => f.write_str("hashed"),
            ProviderSpec::Precomputed(p) => write!(f, "precomputed:{}", p.display()),
        }
    }
}

impl Serialize for ProviderSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ProviderSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl ProviderSpec {
    pub fn build(&self, dim: usize, seed: u64, fallback: bool) -> Result<Box<dyn SemanticProvider>> {
        let hashed = HashedNgramEncoder::new(dim, seed)?;
        match self {
            ProviderSpec::Hashed => Ok(Box::new(hashed)),
            ProviderSpec::Precomputed(path) => {
                let cache = load_precomputed(path)?;
                if cache.dim() != dim {
                    return Err(Error::Config(format!(
                        "precomputed vectors have d={}, configured d_b={dim}",
                        cache.dim()
                    )));
                }
                Ok(Box::new(PrecomputedProvider::new(cache, fallback.then_some(hashed))?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::cosine_sim;

    #[test]
    fn hashed_is_deterministic_and_unit() {
        let a = hashed_ngram_embed("software engineer", 128, 1).unwrap();
        let b = hashed_ngram_embed("software engineer", 128, 1).unwrap();
        assert_eq!(a, b);
        let n: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-9);
        assert!(matches!(hashed_ngram_embed("x", 7, 0), Err(Error::Config(_))));
    }

    #[test]
    fn shared_ngrams_raise_similarity() {
        let se = hashed_ngram_embed("software engineer", 128, 0).unwrap();
        let sd = hashed_ngram_embed("software developer", 128, 0).unwrap();
        let pc = hashed_ngram_embed("pastry chef", 128, 0).unwrap();
        assert!(cosine_sim(&se, &sd).unwrap() > cosine_sim(&se, &pc).unwrap());
    }

    #[test]
    fn load_counts_and_rejects_short_rows() {
        let ok = "#embeddings d=4 normalize=false\na\t1,0,0,0\nb\t0,1,0,0\n";
        let c = EmbeddingCache::read_tsv(ok.as_bytes(), "mem").unwrap();
        assert_eq!((c.len(), c.dim()), (2, 4));
        let bad = "#embeddings d=4 normalize=false\na\t1,0,0,0\nb\t0,1,0\n";
        let err = EmbeddingCache::read_tsv(bad.as_bytes(), "mem").unwrap_err();
        assert!(matches!(err, Error::Format { line: 3, .. }), "{err}");
        let dup = "#embeddings d=2 normalize=false\nA\t1,0\na\t0,1\n";
        assert!(matches!(
            EmbeddingCache::read_tsv(dup.as_bytes(), "mem"),
            Err(Error::Format { line: 3, .. })
        ));
    }

    #[test]
    fn normalize_flag_rescales() {
        let src = "#embeddings d=2 normalize=true\na\t3,4\n";
        let c = EmbeddingCache::read_tsv(src.as_bytes(), "mem").unwrap();
        assert_eq!(c.get("a").unwrap().vector, vec![0.6, 0.8]);
    }

    #[test]
    fn export_then_load_round_trips() {
        let enc = HashedNgramEncoder::new(16, 3).unwrap();
        let cache = embed_titles(&enc, &["data analyst", "pastry chef"]).unwrap();
        let mut buf = Vec::new();
        cache.write_tsv(&mut buf, false).unwrap();
        let back = EmbeddingCache::read_tsv(buf.as_slice(), "x").unwrap();
        for (t, e) in cache.iter() {
            let b = &back.get(t).unwrap().vector;
            for (x, y) in e.vector.iter().zip(b) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn embed_titles_fallback_and_provenance() {
        let enc = HashedNgramEncoder::new(8, 0).unwrap();
        assert!(embed_titles(&enc, &[] as &[&str]).unwrap().is_empty());
        assert_eq!(embed_titles(&enc, &["a", "b", "c"]).unwrap().len(), 3);

        let src = "#embeddings d=8 normalize=false\nknown\t1,0,0,0,0,0,0,0\n";
        let cache = EmbeddingCache::read_tsv(src.as_bytes(), "vecs.tsv").unwrap();
        let strict = PrecomputedProvider::new(cache.clone(), None).unwrap();
        let err = embed_titles(&strict, &["known", "u1", "u2"]).unwrap_err();
        assert!(matches!(&err, Error::Lookup(m) if m.contains("u1") && m.contains("u2")));

        let mixed = PrecomputedProvider::new(cache, Some(enc)).unwrap();
        let out = embed_titles(&mixed, &["known", "other"]).unwrap();
        assert_eq!(
            out.get("known").unwrap().provenance,
            Provenance::Precomputed("vecs.tsv".into())
        );
        assert_eq!(out.get("other").unwrap().provenance, Provenance::Encoder(enc.id()));
    }

    #[test]
    fn provider_spec_parsing() {
        assert_eq!("hashed".parse::<ProviderSpec>().unwrap(), ProviderSpec::Hashed);
        assert_eq!(
            "precomputed:/tmp/v.tsv".parse::<ProviderSpec>().unwrap(),
            ProviderSpec::Precomputed("/tmp/v.tsv".into())
        );
        assert!("bert".parse::<ProviderSpec>().is_err());
    }
}
