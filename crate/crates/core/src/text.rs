//! Title canonicalization and character q-gram tokenization.

use crate::error::{Error, Result};

/// Lowercases, strips control characters, trims and collapses whitespace.
///
/// Idempotent. Fails when nothing is left.
pub fn canonicalize_title(raw: &str) -> Result<String> {
    let cleaned: String = raw
        .chars()
        .map(|c| if c.is_whitespace() { ' ' } else { c })
        .filter(|c| !c.is_control())
        .flat_map(char::to_lowercase)
        .collect();
    let out = cleaned.split_whitespace().collect::<Vec<_>>().join(" ");
    if out.is_empty() {
        return Err(Error::Degenerate(format!(
            "title {raw:?} is empty after normalization"
        )));
    }
    Ok(out)
}

/// Character q-gram tokenizer over a whole string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QgramTokenizer {
    pub q: usize,
    /// Pads with `q - 1` copies of `^` in front and `$` behind.
    pub padding: bool,
}

impl Default for QgramTokenizer {
    fn default() -> Self {
        Self { q: 3, padding: true }
    }
}

impl QgramTokenizer {
    /// All q-grams in order, duplicates kept.
    pub fn grams(&self, s: &str) -> Vec<String> {
        let mut chars: Vec<char> = Vec::with_capacity(s.len() + 2 * self.q);
        if self.padding {
            chars.extend(std::iter::repeat_n('^', self.q.saturating_sub(1)));
        }
        chars.extend(s.chars());
        if self.padding {
            chars.extend(std::iter::repeat_n('$', self.q.saturating_sub(1)));
        }
        if self.q == 0 || chars.len() < self.q {
            return Vec::new();
        }
        chars.windows(self.q).map(|w| w.iter().collect()).collect()
    }

    /// Sorted, deduplicated q-gram set.
    pub fn gram_set(&self, s: &str) -> Vec<String> {
        let mut g = self.grams(s);
        g.sort_unstable();
        g.dedup();
        g
    }
}

/// Size of the intersection of two sorted, deduplicated slices.
pub(crate) fn sorted_intersection_len<T: Ord>(a: &[T], b: &[T]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_examples() {
        assert_eq!(
            canonicalize_title("  Software   Engineer ").unwrap(),
            "software engineer"
        );
        assert_eq!(canonicalize_title("SDE").unwrap(), "sde");
        assert_eq!(canonicalize_title("a\tb\u{7}c").unwrap(), "a bc");
        assert!(matches!(
            canonicalize_title(" \u{1} \n"),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn padded_trigrams() {
        let t = QgramTokenizer::default();
        assert_eq!(t.grams("abcd"), vec!["^^a", "^ab", "abc", "bcd", "cd$", "d$$"]);
        let bare = QgramTokenizer { q: 3, padding: false };
        assert!(bare.grams("ab").is_empty());
    }

    proptest! {
        #[test]
        fn canonicalize_is_idempotent(s in "\\PC{0,24}") {
            if let Ok(once) = canonicalize_title(&s) {
                prop_assert_eq!(canonicalize_title(&once).unwrap(), once);
            }
        }
    }
}
