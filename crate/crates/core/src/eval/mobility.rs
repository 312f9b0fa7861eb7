use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::average_precision_at_k;
use crate::error::{Error, Result};
use crate::model::MapperModel;

pub const CUTOFF: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityReport {
    pub map_at_10: f64,
    pub queries: usize,
    pub mapped: bool,
}

/// Next-title model: transition counts with a popularity fallback.
#[derive(Debug, Default)]
struct FrequencyModel {
    next: BTreeMap<String, BTreeMap<String, u64>>,
    popularity: BTreeMap<String, u64>,
}

fn by_count_then_name(m: &BTreeMap<String, u64>) -> Vec<&str> {
    let mut v: Vec<(&str, u64)> = m.iter().map(|(k, c)| (k.as_str(), *c)).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    v.into_iter().map(|(k, _)| k).collect()
}

impl FrequencyModel {
    fn observe(&mut self, from: &str, to: &str) {
        *self
            .next
            .entry(from.to_string())
            .or_default()
            .entry(to.to_string())
            .or_default() += 1;
        *self.popularity.entry(to.to_string()).or_default() += 1;
    }

    fn predict(&self, from: &str, k: usize) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .next
            .get(from)
            .map(by_count_then_name)
            .unwrap_or_default();
        out.truncate(k);
        if out.len() < k {
            for t in by_count_then_name(&self.popularity) {
                if out.len() == k {
                    break;
                }
                if !out.contains(&t) {
                    out.push(t);
                }
            }
        }
        out
    }
}

/// MAP@10 of a first-order transition-frequency predictor. The final
/// transition of each trajectory is held out and predicted from the
/// transitions that remain.
pub fn mobility_map_at_10(trajectories: &BTreeMap<String, Vec<String>>) -> Result<f64> {
    let usable: Vec<&Vec<String>> = trajectories.values().filter(|t| t.len() >= 2).collect();
    if usable.is_empty() {
        return Err(Error::Evaluation("no trajectory has two or more jobs".into()));
    }
    let mut model = FrequencyModel::default();
    for t in &usable {
        for w in t[..t.len() - 1].windows(2) {
            model.observe(&w[0], &w[1]);
        }
    }
    let total: f64 = usable
        .iter()
        .map(|t| {
            let n = t.len();
            let ranked = model.predict(&t[n - 2], CUTOFF);
            average_precision_at_k(&ranked, &t[n - 1].as_str(), CUTOFF)
        })
        .sum();
    Ok(total / usable.len() as f64)
}

/// Replaces every title by the mapper's top-1 standard title.
pub fn map_trajectories(
    trajectories: &BTreeMap<String, Vec<String>>,
    model: &MapperModel,
) -> Result<BTreeMap<String, Vec<String>>> {
    let mut distinct: Vec<&str> = trajectories.values().flatten().map(String::as_str).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.is_empty() {
        return Ok(BTreeMap::new());
    }
    let mapped = model.map_topk(&distinct, 1)?;
    let lookup: BTreeMap<&str, &str> = distinct
        .iter()
        .zip(&mapped)
        .map(|(t, m)| (*t, m.entries[0].0.as_str()))
        .collect();
    Ok(trajectories
        .iter()
        .map(|(p, ts)| (p.clone(), ts.iter().map(|t| lookup[t.as_str()].to_string()).collect()))
        .collect())
}

/// MAP@10 on raw titles, or on titles mapped through `mapper` first.
pub fn map_at_10_mobility(
    trajectories: &BTreeMap<String, Vec<String>>,
    mapper: Option<&MapperModel>,
) -> Result<MobilityReport> {
    let (map, mapped) = match mapper {
        Some(m) => (mobility_map_at_10(&map_trajectories(trajectories, m)?)?, true),
        None => (mobility_map_at_10(trajectories)?, false),
    };
    Ok(MobilityReport {
        map_at_10: map,
        queries: trajectories.values().filter(|t| t.len() >= 2).count(),
        mapped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trajs(rows: &[&[&str]]) -> BTreeMap<String, Vec<String>> {
        rows.iter()
            .enumerate()
            .map(|(i, r)| (format!("p{i}"), r.iter().map(|s| s.to_string()).collect()))
            .collect()
    }

    #[test]
    fn deterministic_chain_scores_one() {
        let t = trajs(&[&["a", "b", "a", "b"], &["a", "b", "a", "b"], &["b", "a", "b", "a"]]);
        assert_eq!(mobility_map_at_10(&t).unwrap(), 1.0);
    }

    #[test]
    fn second_place_scores_half() {
        // Before the held-out step "a" is followed by "c" twice and "b" once.
        let t = trajs(&[&["a", "c", "a", "c", "a", "b", "a", "b"]]);
        assert_eq!(mobility_map_at_10(&t).unwrap(), 0.5);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(mobility_map_at_10(&trajs(&[&["a"]])).is_err());
        assert!(mobility_map_at_10(&BTreeMap::new()).is_err());
    }
}
