use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Ranked candidates and relevant candidates for a set of queries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RankingResult {
    queries: Vec<(Vec<usize>, BTreeSet<usize>)>,
}

impl RankingResult {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one query; the ranking may not repeat a candidate.
    pub fn push<I: IntoIterator<Item = usize>>(&mut self, ranking: Vec<usize>, relevant: I) -> Result<()> {
        let distinct: BTreeSet<usize> = ranking.iter().copied().collect();
        if distinct.len() != ranking.len() {
            return Err(Error::Evaluation("ranking repeats a candidate".into()));
        }
        self.queries.push((ranking, relevant.into_iter().collect()));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("rank cutoff must be at least 1".into()));
    }
    Ok(())
}

/// Mean over queries of `|relevant ∩ top-n| / n`; 0 for no queries.
pub fn precision_at_n(results: &RankingResult, n: usize) -> Result<f64> {
    check_n(n)?;
    if results.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = results
        .queries
        .iter()
        .map(|(r, rel)| r.iter().take(n).filter(|c| rel.contains(c)).count() as f64 / n as f64)
        .sum();
    Ok(total / results.len() as f64)
}

/// Fraction of queries with at least one relevant candidate in the top n.
/// Equals `n * precision_at_n` when every query has exactly one relevant.
pub fn hit_rate_at_n(results: &RankingResult, n: usize) -> Result<f64> {
    check_n(n)?;
    if results.is_empty() {
        return Ok(0.0);
    }
    let hits = results
        .queries
        .iter()
        .filter(|(r, rel)| r.iter().take(n).any(|c| rel.contains(c)))
        .count();
    Ok(hits as f64 / results.len() as f64)
}

/// Mean NDCG@n with binary gains and a `1 / log2(rank + 1)` discount.
pub fn ndcg_at_n(results: &RankingResult, n: usize) -> Result<f64> {
    check_n(n)?;
    if results.is_empty() {
        return Ok(0.0);
    }
    let discount = |rank: usize| 1.0 / ((rank + 1) as f64).log2();
    let total: f64 = results
        .queries
        .iter()
        .map(|(r, rel)| {
            let dcg: f64 = r
                .iter()
                .take(n)
                .enumerate()
                .filter(|(_, c)| rel.contains(c))
                .map(|(i, _)| discount(i + 1))
                .sum();
            let ideal: f64 = (1..=rel.len().min(n)).map(discount).sum();
            if ideal > 0.0 {
                dcg / ideal
            } else {
                0.0
            }
        })
        .sum();
    Ok(total / results.len() as f64)
}

/// Area under the ROC curve via the Mann-Whitney statistic; ties count
/// one half. Exact: the pair count is accumulated in integers.
pub fn auc(positives: &[f64], negatives: &[f64]) -> Result<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::Evaluation(
            "AUC needs at least one positive and one negative score".into(),
        ));
    }
    if positives.iter().chain(negatives).any(|s| s.is_nan()) {
        return Err(Error::Numeric("NaN score in AUC input".into()));
    }
    let mut all: Vec<(f64, bool)> = positives
        .iter()
        .map(|&s| (s, true))
        .chain(negatives.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Twice the number of (positive > negative) pairs plus ties.
    let mut twice: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        let (mut p, mut q) = (0u128, 0u128);
        while j < all.len() && all[j].0 == all[i].0 {
            if all[j].1 {
                p += 1;
            } else {
                q += 1;
            }
            j += 1;
        }
        twice += p * (2 * neg_below + q);
        neg_below += q;
        i = j;
    }
    let denom = 2 * positives.len() as u128 * negatives.len() as u128;
    Ok(twice as f64 / denom as f64)
}

/// Average precision at `k` for a single relevant item: `1 / rank` when it
/// appears in the top `k`.
pub fn average_precision_at_k<T: PartialEq>(ranking: &[T], relevant: &T, k: usize) -> f64 {
    ranking
        .iter()
        .take(k)
        .position(|c| c == relevant)
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}
