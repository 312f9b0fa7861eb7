//! Shared helpers for the title-keyed vector TSV formats.

use crate::error::{Error, Result};
use crate::text::canonicalize_title;

/// Shortest representation that parses back to the identical `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn fmt_vector(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

pub fn parse_vector(s: &str, line: usize) -> Result<Vec<f64>> {
    s.split(',')
        .map(|tok| {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| Error::format(line, format!("bad number {tok:?}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::format(line, format!("non-finite value {tok:?}")))
            }
        })
        .collect()
}

/// Splits `title<TAB>v1,v2,...` and canonicalizes the title.
pub fn parse_vector_row(row: &str, line: usize) -> Result<(String, Vec<f64>)> {
    let (title, values) = row
        .split_once('\t')
        .ok_or_else(|| Error::format(line, "expected title<TAB>values"))?;
    let title = canonicalize_title(title).map_err(|e| Error::format(line, e.to_string()))?;
    Ok((title, parse_vector(values, line)?))
}

/// Parses `#<tag> k=v k=v` into its key/value pairs.
pub fn parse_header<'a>(line: &'a str, tag: &str) -> Result<Vec<(&'a str, &'a str)>> {
    let rest = line
        .strip_prefix('#')
        .and_then(|l| l.strip_prefix(tag))
        .ok_or_else(|| Error::format(1, format!("expected header starting with #{tag}")))?;
    rest.split_whitespace()
        .map(|kv| {
            kv.split_once('=')
                .ok_or_else(|| Error::format(1, format!("malformed header field {kv:?}")))
        })
        .collect()
}

pub fn header_value<'a>(fields: &[(&'a str, &'a str)], key: &str) -> Result<&'a str> {
    fields
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::format(1, format!("header lacks {key}=")))
}
