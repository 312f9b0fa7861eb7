//! Poincaré-ball embeddings trained from parent–child pairs with
//! Riemannian SGD.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::ParentChildPair;
use crate::tsv::{fmt_vector, header_value, parse_header, parse_vector_row};

/// Projection keeps every point at norm at most `1 - BOUNDARY_EPS`.
pub const BOUNDARY_EPS: f64 = 1e-5;

fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// A point strictly inside the unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BallPoint(Vec<f64>);

impl BallPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        check_inside(&coords)?;
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }
}

fn check_inside(x: &[f64]) -> Result<f64> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite ball coordinate".into()));
    }
    let n2 = sq_norm(x);
    if n2 >= 1.0 {
        return Err(Error::Domain(format!(
            "point with squared norm {n2} is not inside the unit ball"
        )));
    }
    Ok(n2)
}

/// `ln(x + sqrt(x^2 - 1))` with `x` clamped to `>= 1`.
pub fn arcosh(x: f64) -> f64 {
    let x = x.max(1.0);
    (x + (x * x - 1.0).sqrt()).ln()
}

/// Hyperbolic distance
/// `arcosh(1 + 2|a-b|^2 / ((1-|a|^2)(1-|b|^2)))`.
pub fn poincare_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim(format!(
            "distance between dimensions {} and {}",
            a.len(),
            b.len()
        )));
    }
    let na = check_inside(a)?;
    let nb = check_inside(b)?;
    Ok(distance_unchecked(a, b, na, nb))
}

fn distance_unchecked(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    arcosh(1.0 + 2.0 * diff / ((1.0 - na) * (1.0 - nb)))
}

/// `2 / (1 - |x|^2)`; the metric tensor is its square times the identity.
pub fn conformal_factor(x: &[f64]) -> Result<f64> {
    let n2 = check_inside(x)?;
    Ok(2.0 / (1.0 - n2))
}

/// Inverse-metric scaling `((1 - |x|^2)^2 / 4) * grad`.
pub fn riemannian_rescale(x: &[f64], euclid_grad: &[f64]) -> Vec<f64> {
    let s = (1.0 - sq_norm(x)).powi(2) / 4.0;
    euclid_grad.iter().map(|g| s * g).collect()
}

/// Rescales onto the sphere of radius `1 - BOUNDARY_EPS` when outside it.
pub fn project_to_ball(mut x: Vec<f64>) -> Result<BallPoint> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("cannot project a non-finite vector".into()));
    }
    project_in_place(&mut x);
    Ok(BallPoint(x))
}

fn project_in_place(x: &mut [f64]) {
    let max = 1.0 - BOUNDARY_EPS;
    let n = sq_norm(x).sqrt();
    if n >= max {
        let s = max / n;
        x.iter_mut().for_each(|v| *v *= s);
    }
}

/// Euclidean gradient of `d(u, v)` with respect to `u`.
pub fn distance_gradient(u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if u.len() != v.len() {
        return Err(Error::dim(format!("gradient between dimensions {} and {}", u.len(), v.len())));
    }
    let (nu, nv) = (check_inside(u)?, check_inside(v)?);
    let mut g = vec![0.0; u.len()];
    distance_grad_u(u, v, nu, nv, &mut g, 1.0);
    Ok(g)
}

fn distance_grad_u(u: &[f64], v: &[f64], nu: f64, nv: f64, out: &mut [f64], scale: f64) {
    let alpha = 1.0 - nu;
    let beta = 1.0 - nv;
    let diff: f64 = u.iter().zip(v).map(|(x, y)| (x - y) * (x - y)).sum();
    let gamma = 1.0 + 2.0 * diff / (alpha * beta);
    let root = (gamma * gamma - 1.0).max(1e-15).sqrt();
    let uv: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
    let coef_u = (nv - 2.0 * uv + 1.0) / (alpha * alpha);
    let front = 4.0 / (beta * root);
    for ((o, &ui), &vi) in out.iter_mut().zip(u).zip(v) {
        *o += scale * front * (coef_u * ui - vi / alpha);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoincareConfig {
    pub dim: usize,
    pub epochs: usize,
    pub lr: f64,
    pub negatives: usize,
    pub burn_in_epochs: usize,
    /// Learning-rate multiplier applied during burn-in.
    pub burn_in_factor: f64,
    pub init_bound: f64,
    pub seed: u64,
}

impl Default for PoincareConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            epochs: 200,
            lr: 0.3,
            negatives: 10,
            burn_in_epochs: 10,
            burn_in_factor: 0.1,
            init_bound: 1e-3,
            seed: 0,
        }
    }
}

/// Title -> ball point lookup for one trained embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicEmbeddingTable {
    dim: usize,
    index: BTreeMap<String, usize>,
    points: Vec<Vec<f64>>,
}

impl HyperbolicEmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            index: BTreeMap::new(),
            points: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, title: &str) -> Option<&[f64]> {
        self.index.get(title).map(|&i| self.points[i].as_slice())
    }

    /// Coordinates for `title`, or the origin when it is unknown.
    pub fn get_or_origin(&self, title: &str) -> Vec<f64> {
        self.get(title)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; self.dim])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> + '_ {
        self.index
            .iter()
            .map(move |(t, &i)| (t.as_str(), self.points[i].as_slice()))
    }

    pub fn insert(&mut self, title: String, point: BallPoint) -> Result<()> {
        if point.0.len() != self.dim {
            return Err(Error::dim(format!(
                "point of dimension {} in a table of dimension {}",
                point.0.len(),
                self.dim
            )));
        }
        match self.index.get(&title) {
            Some(&i) => self.points[i] = point.0,
            None => {
                self.index.insert(title, self.points.len());
                self.points.push(point.0);
            }
        }
        Ok(())
    }

    pub fn write_tsv<W: Write>(&self, mut w: W, seed: u64) -> Result<()> {
        writeln!(w, "#poincare m={} seed={seed}", self.dim)?;
        for (t, p) in self.iter() {
            writeln!(w, "{t}\t{}", fmt_vector(p))?;
        }
        Ok(())
    }

    /// Returns the table and the seed recorded in its header.
    pub fn read_tsv<R: BufRead>(reader: R) -> Result<(Self, u64)> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format(1, "empty embedding file"))??;
        let fields = parse_header(&header, "poincare")?;
        let dim: usize = header_value(&fields, "m")?
            .parse()
            .map_err(|_| Error::format(1, "bad m="))?;
        let seed: u64 = header_value(&fields, "seed")?
            .parse()
            .map_err(|_| Error::format(1, "bad seed="))?;
        let mut table = Self::new(dim);
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let (title, v) = parse_vector_row(&line, lineno)?;
            if v.len() != dim {
                return Err(Error::format(
                    lineno,
                    format!("{} values, header says m={dim}", v.len()),
                ));
            }
            if table.get(&title).is_some() {
                return Err(Error::format(lineno, format!("duplicate title {title:?}")));
            }
            let p = BallPoint::new(v).map_err(|e| Error::format(lineno, e.to_string()))?;
            table.insert(title, p)?;
        }
        Ok((table, seed))
    }
}

/// Filtered mean rank of each pair's parent among all other titles, ordered
/// by distance from the child (rank 1 = nearest). Other known parents of the
/// same child are skipped.
pub fn mean_parent_rank(table: &HyperbolicEmbeddingTable, pairs: &[ParentChildPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Degenerate("no pairs to rank".into()));
    }
    let mut parents: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for p in pairs {
        parents.entry(&p.child).or_default().insert(&p.parent);
    }
    let lookup = |t: &str| {
        table
            .get(t)
            .ok_or_else(|| Error::Lookup(format!("no embedding for {t:?}")))
    };
    let mut total = 0.0;
    for p in pairs {
        let c = lookup(&p.child)?;
        let target = poincare_distance(c, lookup(&p.parent)?)?;
        let known = &parents[p.child.as_str()];
        let mut rank = 1usize;
        for (t, x) in table.iter() {
            if t == p.child || known.contains(t) {
                continue;
            }
            if poincare_distance(c, x)? < target {
                rank += 1;
            }
        }
        total += rank as f64;
    }
    Ok(total / pairs.len() as f64)
}

struct Sampler {
    n: usize,
    excluded: Vec<BTreeSet<usize>>,
    explicit: Vec<Option<Vec<usize>>>,
}

impl Sampler {
    fn new(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut excluded = vec![BTreeSet::new(); n];
        for &(child, parent) in edges {
            excluded[child].insert(parent);
        }
        for (i, ex) in excluded.iter_mut().enumerate() {
            ex.insert(i);
        }
        let explicit = excluded
            .iter()
            .map(|ex| {
                let eligible = n - ex.len();
                (eligible * 4 < n).then(|| (0..n).filter(|j| !ex.contains(j)).collect())
            })
            .collect();
        Self {
            n,
            excluded,
            explicit,
        }
    }

    fn sample<R: Rng>(&self, child: usize, k: usize, rng: &mut R, out: &mut Vec<usize>) {
        out.clear();
        match &self.explicit[child] {
            Some(list) if list.is_empty() => {}
            Some(list) => out.extend((0..k).map(|_| list[rng.random_range(0..list.len())])),
            None => {
                while out.len() < k {
                    let j = rng.random_range(0..self.n);
                    if !self.excluded[child].contains(&j) {
                        out.push(j);
                    }
                }
            }
        }
    }
}

pub fn train_poincare(pairs: &[ParentChildPair], config: &PoincareConfig) -> Result<HyperbolicEmbeddingTable> {
    train_poincare_with(pairs, config, |_, _| {})
}

/// Trains the embedding, calling `on_epoch(epoch, table)` after each epoch.
///
/// Each pair contributes the softmax loss
/// `-log(exp(-d(c, p)) / sum_{x in N ∪ {p}} exp(-d(c, x)))` with `N` drawn
/// uniformly from titles that are neither the child nor one of its parents.
/// When a child has no eligible negatives the child itself stands in as a
/// zero-distance reference term.
pub fn train_poincare_with<F>(
    pairs: &[ParentChildPair],
    config: &PoincareConfig,
    mut on_epoch: F,
) -> Result<HyperbolicEmbeddingTable>
where
    F: FnMut(usize, &HyperbolicEmbeddingTable),
{
    if config.dim < 2 {
        return Err(Error::Config(format!(
            "poincare dimension must be at least 2, got {}",
            config.dim
        )));
    }
    if pairs.is_empty() {
        return Err(Error::Degenerate("no parent-child pairs to embed".into()));
    }
    if !(config.lr > 0.0) || config.init_bound <= 0.0 || config.init_bound >= 0.5 {
        return Err(Error::Config("poincare lr and init_bound must be positive (init_bound < 0.5)".into()));
    }
    let titles: BTreeSet<&str> = pairs
        .iter()
        .flat_map(|p| [p.parent.as_str(), p.child.as_str()])
        .collect();
    let index: BTreeMap<String, usize> = titles
        .iter()
        .enumerate()
        .map(|(i, t)| (t.to_string(), i))
        .collect();
    let edges: Vec<(usize, usize)> = pairs
        .iter()
        .map(|p| (index[&p.child], index[&p.parent]))
        .collect();
    let n = index.len();
    let m = config.dim;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut points: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| rng.random_range(-config.init_bound..config.init_bound))
                .collect()
        })
        .collect();
    let sampler = Sampler::new(n, &edges);
    let mut order: Vec<usize> = (0..edges.len()).collect();
    let mut negs = Vec::with_capacity(config.negatives);
    let mut grads: Vec<Vec<f64>> = Vec::new();

    let mut table = HyperbolicEmbeddingTable {
        dim: m,
        index,
        points: Vec::new(),
    };

    for epoch in 0..config.epochs {
        let lr = if epoch < config.burn_in_epochs {
            config.lr * config.burn_in_factor
        } else {
            config.lr
        };
        order.shuffle(&mut rng);
        for &e in &order {
            let (c, p) = edges[e];
            sampler.sample(c, config.negatives, &mut rng, &mut negs);
            // Candidates: parent first, then negatives.
            let cands: Vec<usize> = std::iter::once(p).chain(negs.iter().copied()).collect();
            let nc = sq_norm(&points[c]);
            let norms: Vec<f64> = cands.iter().map(|&x| sq_norm(&points[x])).collect();
            let dists: Vec<f64> = cands
                .iter()
                .zip(&norms)
                .map(|(&x, &nx)| distance_unchecked(&points[c], &points[x], nc, nx))
                .collect();
            // Softmax over -d; the self term (d = 0) joins when there are
            // no negatives.
            let self_term = negs.is_empty();
            let max = dists
                .iter()
                .map(|d| -d)
                .chain(self_term.then_some(0.0))
                .fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = dists.iter().map(|d| (-d - max).exp()).collect();
            let z: f64 = weights.iter().sum::<f64>() + if self_term { (-max).exp() } else { 0.0 };
            // dL/dd_x = [x == parent] - softmax_x
            let coefs: Vec<f64> = weights
                .iter()
                .enumerate()
                .map(|(i, w)| if i == 0 { 1.0 - w / z } else { -w / z })
                .collect();

            grads.clear();
            grads.resize(cands.len() + 1, vec![0.0; m]);
            for (i, &x) in cands.iter().enumerate() {
                if coefs[i] == 0.0 {
                    continue;
                }
                let (gc, rest) = grads.split_first_mut().expect("non-empty");
                distance_grad_u(&points[c], &points[x], nc, norms[i], gc, coefs[i]);
                distance_grad_u(&points[x], &points[c], norms[i], nc, &mut rest[i], coefs[i]);
            }
            apply_update(&mut points[c], &grads[0], lr);
            for (i, &x) in cands.iter().enumerate() {
                if x != c {
                    apply_update(&mut points[x], &grads[i + 1], lr);
                }
            }
        }
        table.points = points.clone();
        on_epoch(epoch, &table);
    }
    table.points = points;
    Ok(table)
}

fn apply_update(x: &mut [f64], grad: &[f64], lr: f64) {
    let step = riemannian_rescale(x, grad);
    for (v, s) in x.iter_mut().zip(step) {
        *v -= lr * s;
    }
    project_in_place(x);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(p: &str, c: &str) -> ParentChildPair {
        ParentChildPair {
            parent: p.into(),
            child: c.into(),
        }
    }

    #[test]
    fn distance_examples() {
        assert_eq!(poincare_distance(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        // arcosh(1 + 2 * 0.5 / 0.5625), evaluated with mpmath at 40 digits.
        let d = poincare_distance(&[0.5, 0.0], &[0.0, 0.5]).unwrap();
        assert!((d - 1.680_699_772_428_003_6).abs() < 1e-6, "{d}");
        assert!(matches!(
            poincare_distance(&[1.0, 0.0], &[0.0, 0.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn conformal_factor_cases() {
        assert_eq!(conformal_factor(&[0.0, 0.0]).unwrap(), 2.0);
        let r = 0.5f64.sqrt();
        assert!((conformal_factor(&[r, 0.0]).unwrap() - 4.0).abs() < 1e-12);
        let mut last = 0.0;
        for k in 0..20 {
            let f = conformal_factor(&[k as f64 * 0.049, 0.0]).unwrap();
            assert!(f > last);
            last = f;
        }
        assert!(conformal_factor(&[0.6, 0.8]).is_err());
    }

    #[test]
    fn rescale_at_origin_and_zero() {
        assert_eq!(riemannian_rescale(&[0.0, 0.0], &[4.0, -8.0]), vec![1.0, -2.0]);
        assert_eq!(riemannian_rescale(&[0.3, 0.1], &[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn rescaled_gradient_is_a_descent_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let u: Vec<f64> = (0..4).map(|_| rng.random_range(-0.4..0.4)).collect();
            let v: Vec<f64> = (0..4).map(|_| rng.random_range(-0.4..0.4)).collect();
            let mut g = vec![0.0; 4];
            distance_grad_u(&u, &v, sq_norm(&u), sq_norm(&v), &mut g, 1.0);
            let step = riemannian_rescale(&u, &g);
            let moved: Vec<f64> = u.iter().zip(&step).map(|(a, s)| a - 1e-4 * s).collect();
            let before = poincare_distance(&u, &v).unwrap();
            let after = poincare_distance(&moved, &v).unwrap();
            assert!(after < before);
            // Gradient itself against central differences.
            for k in 0..4 {
                let mut up = u.clone();
                up[k] += 1e-6;
                let mut dn = u.clone();
                dn[k] -= 1e-6;
                let fd = (poincare_distance(&up, &v).unwrap() - poincare_distance(&dn, &v).unwrap()) / 2e-6;
                assert!((fd - g[k]).abs() < 1e-5 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn projection_cases() {
        assert_eq!(project_to_ball(vec![0.1, 0.1]).unwrap().coords(), &[0.1, 0.1]);
        let p = project_to_ball(vec![2.0, 0.0]).unwrap();
        assert!((p.coords()[0] - 0.99999).abs() < 1e-15);
        let again = project_to_ball(p.coords().to_vec()).unwrap();
        assert_eq!(again, p);
        assert!(matches!(project_to_ball(vec![f64::NAN]), Err(Error::Numeric(_))));
    }

    #[test]
    fn config_errors() {
        let cfg = PoincareConfig { dim: 1, ..Default::default() };
        assert!(matches!(train_poincare(&[pair("a", "b")], &cfg), Err(Error::Config(_))));
        assert!(matches!(
            train_poincare(&[], &PoincareConfig::default()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn single_pair_distance_shrinks_and_stays_in_ball() {
        let cfg = PoincareConfig {
            dim: 5,
            epochs: 10,
            lr: 1e-3,
            seed: 11,
            ..Default::default()
        };
        let mut dists = Vec::new();
        let pairs = [pair("p", "c")];
        train_poincare_with(&pairs, &cfg, |_, t| {
            for (_, x) in t.iter() {
                assert!(sq_norm(x).sqrt() <= 1.0 - BOUNDARY_EPS + 1e-15);
            }
            dists.push(poincare_distance(t.get("p").unwrap(), t.get("c").unwrap()).unwrap());
        })
        .unwrap();
        assert_eq!(dists.len(), 10);
        for w in dists.windows(2) {
            assert!(w[1] < w[0], "{dists:?}");
        }
    }

    #[test]
    fn seeded_training_is_reproducible() {
        let pairs = [pair("a", "b"), pair("a", "c"), pair("b", "d"), pair("c", "e")];
        let cfg = PoincareConfig {
            dim: 3,
            epochs: 30,
            seed: 5,
            ..Default::default()
        };
        assert_eq!(train_poincare(&pairs, &cfg).unwrap(), train_poincare(&pairs, &cfg).unwrap());
    }

    #[test]
    fn tsv_round_trip_is_exact() {
        let pairs = [pair("a", "b"), pair("a", "c")];
        let cfg = PoincareConfig { dim: 4, epochs: 5, ..Default::default() };
        let t = train_poincare(&pairs, &cfg).unwrap();
        let mut buf = Vec::new();
        t.write_tsv(&mut buf, 9).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("#poincare m=4 seed=9\n"));
        let (back, seed) = HyperbolicEmbeddingTable::read_tsv(buf.as_slice()).unwrap();
        assert_eq!(seed, 9);
        assert_eq!(back, t);
    }
}
