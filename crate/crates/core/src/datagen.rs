//! Synthetic taxonomies, noisy title variants and career histories.

use std::collections::BTreeSet;

use chrono::{Months, NaiveDate};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{JobRecord, ParentChildPair};
use crate::model::LabeledTitle;
use crate::syntactic::Taxonomy;
use crate::text::QgramTokenizer;

const SENIORITY: &[&str] = &[
    "senior", "junior", "lead", "principal", "chief", "assistant", "associate", "head", "staff",
    "deputy", "trainee", "regional",
];

const DOMAINS: &[&str] = &[
    "software", "data", "marketing", "finance", "clinical", "civil", "mechanical", "electrical",
    "sales", "payroll", "logistics", "warehouse", "retail", "legal", "research", "quality",
    "security", "network", "cloud", "product", "brand", "content", "customer", "nursing",
    "pharmacy", "dental", "veterinary", "kitchen", "hotel", "aviation", "marine", "mining",
    "forestry", "energy", "insurance", "banking", "audit", "tax", "procurement", "facilities",
    "laboratory", "museum", "library", "school", "fitness", "fashion", "graphic", "media",
];

const ROLES: &[&str] = &[
    "engineer", "analyst", "manager", "consultant", "technician", "specialist", "coordinator",
    "director", "officer", "administrator", "designer", "developer", "scientist", "assistant",
    "supervisor", "inspector", "planner", "architect", "advisor", "operator", "clerk", "editor",
    "instructor", "auditor", "buyer", "recruiter", "strategist", "therapist", "surveyor",
    "controller",
];

/// Noise operations applied to a standard title to derive a variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseOp {
    /// Swap two adjacent characters inside one token.
    SwapChars,
    /// Remove one token (only for titles with two or more tokens).
    DropToken,
    /// Replace the first token by its initial.
    Abbreviate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Number of standard titles (groups).
    pub groups: usize,
    /// Noisy variants per group.
    pub synonyms: usize,
    pub min_edits: usize,
    pub max_edits: usize,
    pub persons: usize,
    pub jobs_per_person: usize,
    /// Symmetric Dirichlet concentration of each transition-matrix row.
    pub concentration: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            groups: 200,
            synonyms: 5,
            min_edits: 1,
            max_edits: 3,
            persons: 2000,
            jobs_per_person: 6,
            concentration: 0.1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.groups == 0 || self.synonyms == 0 || self.persons == 0 || self.jobs_per_person == 0 {
            return Err(Error::Config(
                "groups, synonyms, persons and jobs_per_person must all be at least 1".into(),
            ));
        }
        if self.min_edits > self.max_edits {
            return Err(Error::Config(format!(
                "min_edits {} exceeds max_edits {}",
                self.min_edits, self.max_edits
            )));
        }
        if !(self.concentration > 0.0) || !self.concentration.is_finite() {
            return Err(Error::Config("concentration must be positive".into()));
        }
        Ok(())
    }
}

/// Row-stochastic group transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    rows: Vec<Vec<f64>>,
}

impl TransitionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        for (i, r) in rows.iter().enumerate() {
            let s: f64 = r.iter().sum();
            if r.len() != n || r.iter().any(|p| *p < 0.0 || !p.is_finite()) || (s - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("transition row {i} is not a distribution")));
            }
        }
        Ok(Self { rows })
    }

    pub fn identity(n: usize) -> Self {
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { rows }
    }

    /// Each row drawn from a symmetric Dirichlet via normalized Gamma draws.
    pub fn dirichlet<R: Rng + ?Sized>(n: usize, alpha: f64, rng: &mut R) -> Result<Self> {
        let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::Config(format!("gamma({alpha}): {e}")))?;
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let mut r: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
            let mut s: f64 = r.iter().sum();
            if s <= 0.0 {
                // Every draw underflowed; fall back to a single random successor.
                r[rng.random_range(0..n)] = 1.0;
                s = 1.0;
            }
            r.iter_mut().for_each(|p| *p /= s);
            rows.push(r);
        }
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }
}

fn standard_titles<R: Rng + ?Sized>(g: usize, rng: &mut R) -> Result<Vec<String>> {
    let mut combos = Vec::new();
    for d in DOMAINS {
        for r in ROLES {
            combos.push(format!("{d} {r}"));
        }
    }
    let plain = combos.clone();
    for s in SENIORITY {
        for c in &plain {
            combos.push(format!("{s} {c}"));
        }
    }
    if g > combos.len() {
        return Err(Error::Config(format!(
            "word bank supports at most {} groups, asked for {g}",
            combos.len()
        )));
    }
    let mut picked: Vec<String> = combos.choose_multiple(rng, g).cloned().collect();
    picked.sort();
    Ok(picked)
}

pub fn apply_noise<R: Rng + ?Sized>(title: &str, op: NoiseOp, rng: &mut R) -> String {
    let mut tokens: Vec<String> = title.split(' ').map(str::to_string).collect();
    match op {
        NoiseOp::SwapChars => {
            let candidates: Vec<usize> = (0..tokens.len())
                .filter(|&i| tokens[i].chars().count() >= 2)
                .collect();
            if let Some(&t) = candidates.choose(rng) {
                let mut chars: Vec<char> = tokens[t].chars().collect();
                let i = rng.random_range(0..chars.len() - 1);
                chars.swap(i, i + 1);
                tokens[t] = chars.into_iter().collect();
            }
        }
        NoiseOp::DropToken => {
            if tokens.len() >= 2 {
                let i = rng.random_range(0..tokens.len());
                tokens.remove(i);
            }
        }
        NoiseOp::Abbreviate => {
            if let Some(c) = tokens[0].chars().next() {
                tokens[0] = c.to_string();
            }
        }
    }
    tokens.join(" ")
}

fn gram_counts(tok: &QgramTokenizer, s: &str) -> Vec<String> {
    let mut g = tok.grams(s);
    g.sort_unstable();
    g
}

/// Shared q-grams counted with multiplicity.
fn shared_count(a: &[String], b: &[String]) -> usize {
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

/// True when `variant` shares strictly more 3-grams with standard `own`
/// than with any other standard.
pub fn is_planted(variant: &str, own: usize, standard_grams: &[Vec<String>]) -> bool {
    let g = gram_counts(&QgramTokenizer::default(), variant);
    let mine = shared_count(&g, &standard_grams[own]);
    standard_grams
        .iter()
        .enumerate()
        .all(|(k, s)| k == own || shared_count(&g, s) < mine)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthTaxonomy {
    pub taxonomy: Taxonomy,
    /// `variants[g]` lists the noisy titles of group `g`.
    pub variants: Vec<Vec<String>>,
}

impl SynthTaxonomy {
    pub fn labels(&self) -> Vec<LabeledTitle> {
        self.variants
            .iter()
            .enumerate()
            .flat_map(|(g, vs)| {
                vs.iter().map(move |v| LabeledTitle {
                    title: v.clone(),
                    standard: self.taxonomy.title(g).to_string(),
                })
            })
            .collect()
    }
}

const MAX_ATTEMPTS: usize = 200;

/// Standard titles plus `synonyms` distinct noisy variants per group.
pub fn gen_taxonomy(config: &SynthConfig) -> Result<SynthTaxonomy> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let titles = standard_titles(config.groups, &mut rng)?;
    let rows: Vec<(&str, Option<String>)> = titles
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), Some(format!("g{i}"))))
        .collect();
    let taxonomy = Taxonomy::with_groups(rows.iter().map(|(t, g)| (*t, g.as_deref())))?;
    let tok = QgramTokenizer::default();
    let grams: Vec<Vec<String>> = titles.iter().map(|t| gram_counts(&tok, t)).collect();
    let ops = [NoiseOp::SwapChars, NoiseOp::DropToken, NoiseOp::Abbreviate];

    let mut variants = Vec::with_capacity(titles.len());
    for (g, standard) in titles.iter().enumerate() {
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(config.synonyms);
        while out.len() < config.synonyms {
            let mut accepted = None;
            for _ in 0..MAX_ATTEMPTS {
                let k = rng.random_range(config.min_edits..=config.max_edits);
                let mut v = standard.clone();
                for _ in 0..k {
                    v = apply_noise(&v, *ops.choose(&mut rng).expect("non-empty"), &mut rng);
                }
                let fresh = config.max_edits == 0 || !seen.contains(&v);
                if fresh && is_planted(&v, g, &grams) {
                    accepted = Some(v);
                    break;
                }
            }
            let v = accepted.ok_or_else(|| {
                Error::Config(format!(
                    "could not derive {} distinct variants of {standard:?}",
                    config.synonyms
                ))
            })?;
            seen.insert(v.clone());
            out.push(v);
        }
        variants.push(out);
    }
    Ok(SynthTaxonomy { taxonomy, variants })
}

/// Career histories: each person walks `jobs_per_person` steps over groups
/// and takes a random variant title of the current group at each step.
pub fn gen_resumes(config: &SynthConfig, synth: &SynthTaxonomy) -> Result<(Vec<JobRecord>, TransitionMatrix)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0fc0_ffee);
    let g = synth.taxonomy.len();
    let matrix = TransitionMatrix::dirichlet(g, config.concentration, &mut rng)?;
    let records = walk(config, synth, &matrix, &mut rng)?;
    Ok((records, matrix))
}

pub fn gen_resumes_with(
    config: &SynthConfig,
    synth: &SynthTaxonomy,
    matrix: &TransitionMatrix,
) -> Result<Vec<JobRecord>> {
    config.validate()?;
    if matrix.len() != synth.taxonomy.len() {
        return Err(Error::Config(format!(
            "transition matrix has {} rows for {} groups",
            matrix.len(),
            synth.taxonomy.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0fc0_ffee);
    walk(config, synth, matrix, &mut rng)
}

fn walk<R: Rng + ?Sized>(
    config: &SynthConfig,
    synth: &SynthTaxonomy,
    matrix: &TransitionMatrix,
    rng: &mut R,
) -> Result<Vec<JobRecord>> {
    let g = synth.taxonomy.len();
    let samplers = (0..g)
        .map(|i| WeightedIndex::new(matrix.row(i)).map_err(|e| Error::Config(format!("transition row {i}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let epoch = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
    let mut records = Vec::with_capacity(config.persons * config.jobs_per_person);
    for p in 0..config.persons {
        let person_id = format!("p{p:06}");
        let mut group = rng.random_range(0..g);
        let mut start = epoch
            .checked_add_months(Months::new(rng.random_range(0..120)))
            .expect("date in range");
        for j in 0..config.jobs_per_person {
            if j > 0 {
                group = samplers[group].sample(rng);
            }
            let title = synth.variants[group]
                .choose(rng)
                .expect("at least one variant")
                .clone();
            let months = rng.random_range(6..60);
            let next = start
                .checked_add_months(Months::new(months))
                .expect("date in range");
            let end = (j + 1 < config.jobs_per_person).then_some(next);
            records.push(JobRecord {
                person_id: person_id.clone(),
                title,
                company_id: format!("c{:04}", rng.random_range(0..5000)),
                start,
                end,
            });
            start = next;
        }
    }
    Ok(records)
}

/// Edges of a complete tree with `branching` children per node and `depth`
/// levels below the root. Node names encode their path (`r`, `r.0`, `r.0.2`).
pub fn balanced_tree_pairs(branching: usize, depth: usize) -> Vec<ParentChildPair> {
    let mut pairs = Vec::new();
    let mut level = vec!["r".to_string()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for parent in &level {
            for c in 0..branching {
                let child = format!("{parent}.{c}");
                pairs.push(ParentChildPair {
                    parent: parent.clone(),
                    child: child.clone(),
                });
                next.push(child);
            }
        }
        level = next;
    }
    pairs
}
