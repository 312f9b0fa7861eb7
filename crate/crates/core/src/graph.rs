//! Resume ingestion and the directed job-transition graph.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::canonicalize_title;

/// One line of a resume.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobRecord {
    pub person_id: String,
    pub title: String,
    pub company_id: String,
    pub start: NaiveDate,
    pub end: Option<NaiveDate>,
}

impl JobRecord {
    pub fn validate(&self) -> Result<()> {
        canonicalize_title(&self.title)?;
        if let Some(end) = self.end {
            if end < self.start {
                return Err(Error::Data(format!(
                    "record for {} ({}) ends {end} before it starts {}",
                    self.person_id, self.title, self.start
                )));
            }
        }
        Ok(())
    }
}

/// Reads one [`JobRecord`] per non-blank line.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<JobRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JobRecord =
            serde_json::from_str(&line).map_err(|e| Error::format(i + 1, e.to_string()))?;
        rec.validate()
            .map_err(|e| Error::format(i + 1, e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records<W: Write>(mut w: W, records: &[JobRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Canonical title sequences per person, in chronological order.
///
/// Ties on start date break by end date (open-ended last), then by input
/// order. Persons come out sorted by id so the result does not depend on
/// the order of the input list.
pub fn trajectories(records: &[JobRecord]) -> Result<BTreeMap<String, Vec<String>>> {
    let mut by_person: BTreeMap<&str, Vec<(usize, &JobRecord)>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        r.validate()?;
        by_person.entry(&r.person_id).or_default().push((i, r));
    }
    let mut out = BTreeMap::new();
    for (person, mut jobs) in by_person {
        jobs.sort_by(|(ia, a), (ib, b)| {
            a.start
                .cmp(&b.start)
                .then_with(|| match (a.end, b.end) {
                    (Some(x), Some(y)) => x.cmp(&y),
                    (Some(_), None) => std::cmp::Ordering::Less,
                    (None, Some(_)) => std::cmp::Ordering::Greater,
                    (None, None) => std::cmp::Ordering::Equal,
                })
                .then(ia.cmp(ib))
        });
        let titles = jobs
            .iter()
            .map(|(_, r)| canonicalize_title(&r.title))
            .collect::<Result<Vec<_>>>()?;
        out.insert(person.to_string(), titles);
    }
    Ok(out)
}

/// Directed graph of observed title-to-title moves with global weights
/// `W_ij = e_ij / sum(e)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransitionGraph {
    nodes: BTreeSet<String>,
    counts: BTreeMap<(String, String), u64>,
    total: u64,
}

impl TransitionGraph {
    pub fn from_trajectories(trajs: &BTreeMap<String, Vec<String>>) -> Self {
        let mut g = Self::default();
        for titles in trajs.values() {
            g.nodes.extend(titles.iter().cloned());
            for w in titles.windows(2) {
                g.add_transition(&w[0], &w[1], 1);
            }
        }
        g
    }

    fn add_transition(&mut self, from: &str, to: &str, n: u64) {
        self.nodes.insert(from.to_string());
        self.nodes.insert(to.to_string());
        *self
            .counts
            .entry((from.to_string(), to.to_string()))
            .or_insert(0) += n;
        self.total += n;
    }

    pub fn nodes(&self) -> &BTreeSet<String> {
        &self.nodes
    }

    pub fn edge_count(&self) -> usize {
        self.counts.len()
    }

    pub fn total_transitions(&self) -> u64 {
        self.total
    }

    pub fn count(&self, from: &str, to: &str) -> u64 {
        self.counts
            .get(&(from.to_string(), to.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn weight(&self, from: &str, to: &str) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(from, to) as f64 / self.total as f64
        }
    }

    pub fn contains_edge(&self, from: &str, to: &str) -> bool {
        self.counts.contains_key(&(from.to_string(), to.to_string()))
    }

    /// `(source, target, count, weight)` in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, u64, f64)> + '_ {
        self.counts.iter().map(move |((a, b), &c)| {
            (a.as_str(), b.as_str(), c, c as f64 / self.total as f64)
        })
    }

    /// TSV with a header line, one `source\ttarget\tcount\tweight` row per edge.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "#transitions nodes={} edges={} total={}", self.nodes.len(), self.counts.len(), self.total)?;
        for (a, b, c, wt) in self.edges() {
            writeln!(w, "{a}\t{b}\t{c}\t{wt:?}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut g = Self::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 3 {
                return Err(Error::format(i + 1, "expected source, target, count"));
            }
            let n: u64 = cols[2]
                .parse()
                .map_err(|_| Error::format(i + 1, format!("bad count {:?}", cols[2])))?;
            let a = canonicalize_title(cols[0]).map_err(|e| Error::format(i + 1, e.to_string()))?;
            let b = canonicalize_title(cols[1]).map_err(|e| Error::format(i + 1, e.to_string()))?;
            g.add_transition(&a, &b, n);
        }
        Ok(g)
    }
}

pub fn build_transition_graph(records: &[JobRecord]) -> Result<TransitionGraph> {
    Ok(TransitionGraph::from_trajectories(&trajectories(records)?))
}

/// A hyperbolic training relation: the later job is the parent of the earlier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ParentChildPair {
    pub parent: String,
    pub child: String,
}

pub fn pairs_from_trajectories(trajs: &BTreeMap<String, Vec<String>>) -> Vec<ParentChildPair> {
    trajs
        .values()
        .flat_map(|titles| titles.windows(2))
        .filter(|w| w[0] != w[1])
        .map(|w| ParentChildPair {
            parent: w[1].clone(),
            child: w[0].clone(),
        })
        .collect()
}

/// One pair per consecutive distinct transition; duplicates are kept.
pub fn extract_parent_child_pairs(records: &[JobRecord]) -> Result<Vec<ParentChildPair>> {
    Ok(pairs_from_trajectories(&trajectories(records)?))
}

pub fn write_pairs<W: Write>(mut w: W, pairs: &[ParentChildPair]) -> Result<()> {
    writeln!(w, "#pairs parent\tchild")?;
    for p in pairs {
        writeln!(w, "{}\t{}", p.parent, p.child)?;
    }
    Ok(())
}

pub fn read_pairs<R: BufRead>(reader: R) -> Result<Vec<ParentChildPair>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let (p, c) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(i + 1, "expected parent<TAB>child"))?;
        out.push(ParentChildPair {
            parent: canonicalize_title(p).map_err(|e| Error::format(i + 1, e.to_string()))?,
            child: canonicalize_title(c).map_err(|e| Error::format(i + 1, e.to_string()))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(person: &str, title: &str, year: i32) -> JobRecord {
        JobRecord {
            person_id: person.into(),
            title: title.into(),
            company_id: "c".into(),
            start: NaiveDate::from_ymd_opt(year, 1, 1).unwrap(),
            end: None,
        }
    }

    #[test]
    fn single_edge() {
        let g = build_transition_graph(&[rec("p", "A", 2000), rec("p", "B", 2001)]).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.weight("a", "b"), 1.0);
        let g = build_transition_graph(&[
            rec("p", "A", 2000),
            rec("p", "B", 2001),
            rec("q", "A", 2000),
            rec("q", "B", 2003),
        ])
        .unwrap();
        assert_eq!(g.count("a", "b"), 2);
        assert_eq!(g.weight("a", "b"), 1.0);
    }

    #[test]
    fn three_transitions_split_evenly() {
        let g = build_transition_graph(&[
            rec("p", "C", 2002),
            rec("p", "A", 2000),
            rec("p", "B", 2001),
            rec("q", "A", 2000),
            rec("q", "C", 2001),
        ])
        .unwrap();
        for (a, b) in [("a", "b"), ("b", "c"), ("a", "c")] {
            assert!((g.weight(a, b) - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(!g.contains_edge("b", "a"));
        let total: f64 = g.edges().map(|e| e.3).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pairs_put_later_job_as_parent() {
        let pairs =
            extract_parent_child_pairs(&[rec("p", "SWE", 2010), rec("p", "MLE", 2014)]).unwrap();
        assert_eq!(
            pairs,
            vec![ParentChildPair {
                parent: "mle".into(),
                child: "swe".into()
            }]
        );
        assert!(extract_parent_child_pairs(&[rec("p", "x", 2000)]).unwrap().is_empty());
        let five: Vec<_> = (0..5).map(|i| rec("p", &format!("t{i}"), 2000 + i)).collect();
        assert_eq!(extract_parent_child_pairs(&five).unwrap().len(), 4);
    }

    #[test]
    fn self_transition_counts_but_is_not_a_pair() {
        let recs = [rec("p", "A", 2000), rec("p", "a ", 2001), rec("p", "B", 2002)];
        let g = build_transition_graph(&recs).unwrap();
        assert_eq!(g.count("a", "a"), 1);
        assert_eq!(extract_parent_child_pairs(&recs).unwrap().len(), 1);
    }

    #[test]
    fn same_start_ties_break_on_end_then_input_order() {
        let d = |y| NaiveDate::from_ymd_opt(y, 1, 1).unwrap();
        let mut a = rec("p", "A", 2000);
        a.end = None;
        let mut b = rec("p", "B", 2000);
        b.end = Some(d(2001));
        let t = trajectories(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(t["p"], vec!["b", "a"]);
        let c = rec("p", "C", 2000);
        let t = trajectories(&[a, c]).unwrap();
        assert_eq!(t["p"], vec!["a", "c"]);
    }

    #[test]
    fn end_before_start_rejected() {
        let mut r = rec("p", "A", 2000);
        r.end = NaiveDate::from_ymd_opt(1999, 1, 1);
        assert!(build_transition_graph(&[r]).is_err());
    }

    #[test]
    fn jsonl_round_trip_and_null_end() {
        let line = r#"{"person_id":"p1","title":"Data Analyst","company_id":"c9","start":"2019-03-01","end":null}"#;
        let recs = read_records(line.as_bytes()).unwrap();
        assert_eq!(recs[0].end, None);
        let mut buf = Vec::new();
        write_records(&mut buf, &recs).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), line);
    }

    #[test]
    fn tsv_round_trip() {
        let g = build_transition_graph(&[
            rec("p", "A", 2000),
            rec("p", "B", 2001),
            rec("p", "C", 2002),
        ])
        .unwrap();
        let mut buf = Vec::new();
        g.write_tsv(&mut buf).unwrap();
        let back = TransitionGraph::read_tsv(buf.as_slice()).unwrap();
        assert_eq!(back, g);
    }
}
