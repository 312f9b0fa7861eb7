use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::syntactic::Taxonomy;
use crate::text::canonicalize_title;

/// A raw title with its ground-truth standard title.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LabeledTitle {
    pub title: String,
    pub standard: String,
}

/// Reads `raw_title<TAB>standard_title` rows. Both sides are canonicalized.
pub fn read_labels<R: BufRead>(reader: R) -> Result<Vec<LabeledTitle>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (title, standard) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(i + 1, "expected raw_title<TAB>standard_title"))?;
        let title = canonicalize_title(title).map_err(|e| Error::format(i + 1, e.to_string()))?;
        let standard =
            canonicalize_title(standard).map_err(|e| Error::format(i + 1, e.to_string()))?;
        out.push(LabeledTitle { title, standard });
    }
    Ok(out)
}

pub fn write_labels<W: Write>(mut w: W, labels: &[LabeledTitle]) -> Result<()> {
    for l in labels {
        writeln!(w, "{}\t{}", l.title, l.standard)?;
    }
    Ok(())
}

/// Taxonomy index of every label; unknown standard titles are a data error.
pub fn label_indices(labels: &[LabeledTitle], taxonomy: &Taxonomy) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|l| {
            taxonomy.index_of(&l.standard).ok_or_else(|| {
                Error::Data(format!("standard title {:?} is not in the taxonomy", l.standard))
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.64,
            val: 0.16,
            test: 0.20,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions {parts:?} must lie in [0, 1] and sum to 1"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub train: Vec<LabeledTitle>,
    pub val: Vec<LabeledTitle>,
    pub test: Vec<LabeledTitle>,
}

/// Seeded shuffle, then contiguous train/val/test slices.
pub fn split_dataset(labels: &[LabeledTitle], fractions: SplitFractions, seed: u64) -> Result<DataSplit> {
    fractions.validate()?;
    let mut items = labels.to_vec();
    items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = items.len();
    let n_train = (fractions.train * n as f64).round() as usize;
    let n_val = ((fractions.val * n as f64).round() as usize).min(n - n_train.min(n));
    let n_train = n_train.min(n);
    let test = items.split_off(n_train + n_val);
    let val = items.split_off(n_train);
    let split = DataSplit {
        train: items,
        val,
        test,
    };
    for (name, part, frac) in [
        ("train", &split.train, fractions.train),
        ("validation", &split.val, fractions.val),
        ("test", &split.test, fractions.test),
    ] {
        if part.is_empty() && frac > 0.0 {
            return Err(Error::Config(format!(
                "{name} split is empty ({n} labeled titles)"
            )));
        }
    }
    Ok(split)
}
