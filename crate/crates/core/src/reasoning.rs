//! Neural logical reasoning over similarity events.
//!
//! An event vector encodes the proposition "title j is similar to standard
//! title k" in one view. NOT and OR are small learned networks; TRUE is a
//! learned anchor and FALSE is defined as NOT(TRUE). The clause vector that
//! feeds the classifier is the OR-fold of every negated event, which needs
//! no label. The label enters only through [`clause_truth_loss`].

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coattention::init_weight;
use crate::error::{Error, Result};
use crate::numerics::{AdamConfig, AdamState, Tape, Tensor, Var};

/// Learnable weights for one view. Matrices are `[out, in]`, biases `[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReasoningParams {
    /// First encoder layer, block acting on the title vector.
    pub enc_w1j: Tensor,
    /// First encoder layer, block acting on the candidate vector.
    pub enc_w1v: Tensor,
    pub enc_b1: Tensor,
    pub enc_w2: Tensor,
    pub enc_b2: Tensor,
    pub not_w: Tensor,
    pub not_b: Tensor,
    pub or_wl: Tensor,
    pub or_wr: Tensor,
    pub or_b: Tensor,
    /// `[1, d_r]`, kept at unit length.
    pub truth: Tensor,
}

pub const PARAM_NAMES: [&str; 11] = [
    "enc_w1j", "enc_w1v", "enc_b1", "enc_w2", "enc_b2", "not_w", "not_b", "or_wl", "or_wr", "or_b", "truth",
];

impl ReasoningParams {
    /// `d_j` and `d_v` are the title and candidate vector widths of the view.
    pub fn init<R: Rng + ?Sized>(d_j: usize, d_v: usize, d_r: usize, rng: &mut R) -> Result<Self> {
        if d_r == 0 || d_j == 0 || d_v == 0 {
            return Err(Error::Config("reasoning dimensions must be positive".into()));
        }
        let h = 2 * d_r;
        let mut truth = Tensor::uniform(&[1, d_r], 1.0, rng)?;
        normalize_row(truth.data_mut());
        Ok(Self {
            enc_w1j: init_weight(&[h, d_j], d_j + d_v, rng)?,
            enc_w1v: init_weight(&[h, d_v], d_j + d_v, rng)?,
            enc_b1: init_weight(&[h], d_j + d_v, rng)?,
            enc_w2: init_weight(&[d_r, h], h, rng)?,
            enc_b2: init_weight(&[d_r], h, rng)?,
            not_w: init_weight(&[d_r, d_r], d_r, rng)?,
            not_b: init_weight(&[d_r], d_r, rng)?,
            or_wl: init_weight(&[d_r, d_r], 2 * d_r, rng)?,
            or_wr: init_weight(&[d_r, d_r], 2 * d_r, rng)?,
            or_b: init_weight(&[d_r], 2 * d_r, rng)?,
            truth,
        })
    }

    pub fn d_r(&self) -> usize {
        self.not_w.shape()[0]
    }

    pub fn input_dims(&self) -> (usize, usize) {
        (self.enc_w1j.cols(), self.enc_w1v.cols())
    }

    pub fn tensors(&self) -> [&Tensor; 11] {
        [
            &self.enc_w1j, &self.enc_w1v, &self.enc_b1, &self.enc_w2, &self.enc_b2, &self.not_w,
            &self.not_b, &self.or_wl, &self.or_wr, &self.or_b, &self.truth,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 11] {
        [
            &mut self.enc_w1j,
            &mut self.enc_w1v,
            &mut self.enc_b1,
            &mut self.enc_w2,
            &mut self.enc_b2,
            &mut self.not_w,
            &mut self.not_b,
            &mut self.or_wl,
            &mut self.or_wr,
            &mut self.or_b,
            &mut self.truth,
        ]
    }

    pub fn from_tensors(t: Vec<Tensor>) -> Result<Self> {
        let [enc_w1j, enc_w1v, enc_b1, enc_w2, enc_b2, not_w, not_b, or_wl, or_wr, or_b, truth]: [Tensor; 11] =
            t.try_into().map_err(|v: Vec<Tensor>| {
                Error::dim(format!("reasoning needs 11 tensors, got {}", v.len()))
            })?;
        let p = Self {
            enc_w1j,
            enc_w1v,
            enc_b1,
            enc_w2,
            enc_b2,
            not_w,
            not_b,
            or_wl,
            or_wr,
            or_b,
            truth,
        };
        p.check_shapes()?;
        Ok(p)
    }

    pub fn check_shapes(&self) -> Result<()> {
        if self.not_w.ndim() != 2 || self.enc_w1j.ndim() != 2 || self.enc_w1v.ndim() != 2 {
            return Err(Error::dim("reasoning weights must be matrices"));
        }
        let r = self.d_r();
        let h = 2 * r;
        let (dj, dv) = self.input_dims();
        let want: [&[usize]; 11] = [
            &[h, dj],
            &[h, dv],
            &[h],
            &[r, h],
            &[r],
            &[r, r],
            &[r],
            &[r, r],
            &[r, r],
            &[r],
            &[1, r],
        ];
        for ((name, t), w) in PARAM_NAMES.iter().zip(self.tensors()).zip(want) {
            if t.shape() != w {
                return Err(Error::dim(format!(
                    "reasoning {name} has shape {:?}, expected {w:?}",
                    t.shape()
                )));
            }
        }
        Ok(())
    }

    /// Rescales TRUE to unit length; called after every optimizer step.
    pub fn renormalize_truth(&mut self) {
        normalize_row(self.truth.data_mut());
    }

    pub fn register(&self, tape: &mut Tape) -> ReasoningVars {
        ReasoningVars(self.tensors().map(|t| tape.param(t)))
    }

    fn constants(&self, tape: &mut Tape) -> ReasoningVars {
        ReasoningVars(self.tensors().map(|t| tape.constant(t.clone())))
    }
}

fn normalize_row(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Tape handles in [`PARAM_NAMES`] order.
#[derive(Debug, Clone, Copy)]
pub struct ReasoningVars(pub [Var; 11]);

impl ReasoningVars {
    pub fn truth(&self) -> Var {
        self.0[10]
    }

    /// Events for every (title, candidate) pair: `j` is `[B, d_j]`, `v` is
    /// `[Y, d_v]`, the result is `[B * Y, d_r]` with row `i * Y + k`.
    pub fn events(&self, tape: &mut Tape, j: Var, v: Var) -> Result<Var> {
        let [w1j, w1v, b1, w2, b2, ..] = self.0;
        let hj = tape.matmul_nt(j, w1j)?;
        let hv = tape.matmul_nt(v, w1v)?;
        let hv = tape.add_row(hv, b1)?;
        let pre = tape.pairwise_add(hj, hv)?;
        let h = tape.tanh(pre)?;
        let o = tape.matmul_nt(h, w2)?;
        let o = tape.add_row(o, b2)?;
        tape.tanh(o)
    }

    pub fn not(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let y = tape.matmul_nt(x, self.0[5])?;
        let y = tape.add_row(y, self.0[6])?;
        tape.tanh(y)
    }

    /// OR of two row sets; either side may be a single broadcast row.
    pub fn or(&self, tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
        let la = tape.matmul_nt(a, self.0[7])?;
        let rb = tape.matmul_nt(b, self.0[8])?;
        let (ra, rbn) = (tape.value(la).rows(), tape.value(rb).rows());
        let s = if ra == rbn {
            tape.add(la, rb)?
        } else if rbn == 1 {
            tape.add_row(la, rb)?
        } else if ra == 1 {
            tape.add_row(rb, la)?
        } else {
            return Err(Error::dim(format!("or: {ra} rows against {rbn} rows")));
        };
        let s = tape.add_row(s, self.0[9])?;
        tape.tanh(s)
    }

    pub fn falsity(&self, tape: &mut Tape) -> Result<Var> {
        self.not(tape, self.truth())
    }

    /// Left fold of OR over `negated` (`[B * Y, d_r]`) in candidate `order`.
    pub fn fold(&self, tape: &mut Tape, negated: Var, batch: usize, order: &[usize]) -> Result<Var> {
        let y = tape.value(negated).rows() / batch.max(1);
        if order.is_empty() || batch == 0 {
            return Err(Error::Degenerate("clause over an empty candidate set".into()));
        }
        if y * batch != tape.value(negated).rows() || order.iter().any(|&k| k >= y) {
            return Err(Error::dim("fold order does not match the event matrix"));
        }
        let rows = |k: usize| (0..batch).map(|i| i * y + k).collect::<Vec<_>>();
        let mut acc = tape.gather_rows(negated, &rows(order[0]))?;
        if order.len() == 1 {
            return Ok(acc);
        }
        // OR(acc, n_k) = tanh(acc Wl^T + n_k Wr^T + b); the right-hand
        // projection is shared by every step.
        let right = tape.matmul_nt(negated, self.0[8])?;
        for &k in &order[1..] {
            let l = tape.matmul_nt(acc, self.0[7])?;
            let r = tape.gather_rows(right, &rows(k))?;
            let s = tape.add(l, r)?;
            let s = tape.add_row(s, self.0[9])?;
            acc = tape.tanh(s)?;
        }
        Ok(acc)
    }

    /// Mean over rows of `1 - cos(OR(clause, e_correct), TRUE)`.
    pub fn clause_truth_loss(&self, tape: &mut Tape, clause: Var, correct: Var) -> Result<Var> {
        let o = self.or(tape, clause, correct)?;
        let c = tape.cosine_rows(o, self.truth())?;
        let l = tape.affine(c, -1.0, 1.0)?;
        tape.mean(l)
    }

    /// The six logical regularizers over the rows of `x`, plus their sum
    /// divided by `batch_size`.
    pub fn regularizers(&self, tape: &mut Tape, x: Var, batch_size: usize) -> Result<RegularizerVars> {
        let t = self.truth();
        let f = self.falsity(tape)?;
        let nx = self.not(tape, x)?;
        let nnx = self.not(tape, nx)?;
        let or_xf = self.or(tape, x, f)?;
        let or_xt = self.or(tape, x, t)?;
        let or_xx = self.or(tape, x, x)?;
        let or_xnx = self.or(tape, x, nx)?;

        // sim = (cos + 1) / 2, so 1 - sim = (1 - cos) / 2.
        let term = |tape: &mut Tape, a: Var, b: Var, positive: bool| -> Result<Var> {
            let c = tape.cosine_rows(a, b)?;
            let s = if positive {
                tape.affine(c, 0.5, 0.5)?
            } else {
                tape.affine(c, -0.5, 0.5)?
            };
            tape.sum(s)
        };
        let r = [
            term(tape, x, nx, true)?,
            term(tape, x, nnx, false)?,
            term(tape, or_xf, x, false)?,
            term(tape, or_xt, t, false)?,
            term(tape, or_xx, x, false)?,
            term(tape, or_xnx, t, false)?,
        ];
        let mut total = r[0];
        for &q in &r[1..] {
            total = tape.add(total, q)?;
        }
        let total = tape.affine(total, 1.0 / batch_size.max(1) as f64, 0.0)?;
        Ok(RegularizerVars { r, total })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RegularizerVars {
    pub r: [Var; 6],
    pub total: Var,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizerValues {
    pub r: [f64; 6],
    pub total: f64,
}

fn row_matrix(rows: &[Vec<f64>]) -> Result<Tensor> {
    Tensor::from_rows(rows)
}

fn one_row(v: &[f64]) -> Result<Tensor> {
    Tensor::matrix(1, v.len(), v.to_vec())
}

pub fn encode_event(j: &[f64], v: &[f64], p: &ReasoningParams) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let vars = p.constants(&mut tape);
    let jv = tape.constant(one_row(j)?);
    let vv = tape.constant(one_row(v)?);
    let e = vars.events(&mut tape, jv, vv)?;
    Ok(tape.value(e).data().to_vec())
}

pub fn not_op(e: &[f64], p: &ReasoningParams) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let vars = p.constants(&mut tape);
    let x = tape.constant(one_row(e)?);
    let y = vars.not(&mut tape, x)?;
    Ok(tape.value(y).data().to_vec())
}

pub fn or_op(a: &[f64], b: &[f64], p: &ReasoningParams) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let vars = p.constants(&mut tape);
    let x = tape.constant(one_row(a)?);
    let y = tape.constant(one_row(b)?);
    let o = vars.or(&mut tape, x, y)?;
    Ok(tape.value(o).data().to_vec())
}

/// Candidate order for one fold: taxonomy order without a seed, otherwise a
/// seeded shuffle.
pub fn fold_order(n: usize, shuffle_seed: Option<u64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(seed) = shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    order
}

/// Label-free clause vector for one title against every candidate.
pub fn clause_representation(
    j: &[f64],
    candidates: &[Vec<f64>],
    p: &ReasoningParams,
    shuffle_seed: Option<u64>,
) -> Result<Vec<f64>> {
    if candidates.is_empty() {
        return Err(Error::Degenerate("clause over an empty candidate set".into()));
    }
    let mut tape = Tape::new();
    let vars = p.constants(&mut tape);
    let jv = tape.constant(one_row(j)?);
    let cv = tape.constant(row_matrix(candidates)?);
    let e = vars.events(&mut tape, jv, cv)?;
    let n = vars.not(&mut tape, e)?;
    let out = vars.fold(&mut tape, n, 1, &fold_order(candidates.len(), shuffle_seed))?;
    Ok(tape.value(out).data().to_vec())
}

pub fn clause_truth_loss(clause: &[f64], e_correct: &[f64], p: &ReasoningParams) -> Result<f64> {
    let mut tape = Tape::new();
    let vars = p.constants(&mut tape);
    let c = tape.constant(one_row(clause)?);
    let e = tape.constant(one_row(e_correct)?);
    let l = vars.clause_truth_loss(&mut tape, c, e)?;
    tape.value(l).item()
}

/// Regularizer values over `vectors`, total averaged over their count.
pub fn logical_regularizers(vectors: &[Vec<f64>], p: &ReasoningParams) -> Result<RegularizerValues> {
    if vectors.is_empty() {
        return Ok(RegularizerValues {
            r: [0.0; 6],
            total: 0.0,
        });
    }
    let mut tape = Tape::new();
    let vars = p.constants(&mut tape);
    let x = tape.constant(row_matrix(vectors)?);
    let rv = vars.regularizers(&mut tape, x, vectors.len())?;
    let mut r = [0.0; 6];
    for (dst, v) in r.iter_mut().zip(rv.r) {
        *dst = tape.value(v).item()?;
    }
    Ok(RegularizerValues {
        r,
        total: tape.value(rv.total).item()?,
    })
}

/// Trains NOT, OR and TRUE on the regularizers alone over fixed `vectors`
/// (`[n, d_r]`). Returns the regularizer total before each step and after
/// the last one.
pub fn fit_logic_modules(
    p: &mut ReasoningParams,
    vectors: &Tensor,
    steps: usize,
    adam: AdamConfig,
) -> Result<Vec<f64>> {
    // Only NOT, OR and TRUE appear in the regularizers.
    const TRAINED: [usize; 6] = [5, 6, 7, 8, 9, 10];
    let mut state = {
        let t = p.tensors();
        AdamState::new(adam, &TRAINED.map(|i| t[i]))
    };
    let n = vectors.rows();
    let mut curve = Vec::with_capacity(steps + 1);
    for _ in 0..=steps {
        let mut tape = Tape::new();
        let vars = p.register(&mut tape);
        let x = tape.constant(vectors.clone());
        let rv = vars.regularizers(&mut tape, x, n)?;
        curve.push(tape.value(rv.total).item()?);
        if curve.len() > steps {
            break;
        }
        let mut g = tape.backward(rv.total)?;
        let grads: Vec<Tensor> = TRAINED
            .iter()
            .map(|&i| g.take(vars.0[i]).expect("parameter gradient"))
            .collect();
        let mut sel: Vec<&mut Tensor> = p
            .tensors_mut()
            .into_iter()
            .enumerate()
            .filter(|(i, _)| TRAINED.contains(i))
            .map(|(_, t)| t)
            .collect();
        state.step(&mut sel, &grads.iter().collect::<Vec<_>>())?;
        p.renormalize_truth();
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::cosine_sim;
    use crate::numerics::gradcheck::max_relative_error;

    fn params(seed: u64) -> ReasoningParams {
        ReasoningParams::init(4, 4, 6, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    fn unit_vectors(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                normalize_row(&mut v);
                v
            })
            .collect()
    }

    #[test]
    fn event_is_deterministic_with_width_d_r() {
        let p = params(1);
        let j = [0.1, 0.2, -0.3, 0.4];
        let v = [0.5, -0.1, 0.0, 0.2];
        let a = encode_event(&j, &v, &p).unwrap();
        assert_eq!(a.len(), 6);
        assert_eq!(a, encode_event(&j, &v, &p).unwrap());
        assert!(encode_event(&j[..3], &v, &p).is_err());
    }

    #[test]
    fn single_candidate_fold_is_negation() {
        let p = params(2);
        let j = [0.3, 0.1, 0.0, -0.2];
        let c = vec![vec![0.2, 0.2, 0.1, 0.9]];
        let e = encode_event(&j, &c[0], &p).unwrap();
        let want = not_op(&e, &p).unwrap();
        let got = clause_representation(&j, &c, &p, Some(3)).unwrap();
        assert_eq!(got, want);
        assert!(clause_representation(&j, &[], &p, None).is_err());
    }

    #[test]
    fn fold_matches_hand_unrolled() {
        let p = params(3);
        let j = [0.3, -0.4, 0.2, 0.1];
        let cands = unit_vectors(3, 4, 8);
        let seed = 17;
        let order = fold_order(3, Some(seed));
        let n: Vec<Vec<f64>> = cands
            .iter()
            .map(|c| not_op(&encode_event(&j, c, &p).unwrap(), &p).unwrap())
            .collect();
        let inner = or_op(&n[order[0]], &n[order[1]], &p).unwrap();
        let want = or_op(&inner, &n[order[2]], &p).unwrap();
        let got = clause_representation(&j, &cands, &p, Some(seed)).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(got, clause_representation(&j, &cands, &p, Some(seed)).unwrap());
    }

    #[test]
    fn truth_loss_bounds() {
        let p = params(4);
        let l = clause_truth_loss(&[0.1; 6], &[0.3; 6], &p).unwrap();
        assert!((0.0..=2.0).contains(&l));
        // Make OR ignore its inputs and output exactly TRUE's direction.
        let mut q = p.clone();
        q.or_wl = Tensor::zeros(&[6, 6]).unwrap();
        q.or_wr = Tensor::zeros(&[6, 6]).unwrap();
        q.truth = Tensor::matrix(1, 6, vec![0.5, 0.5, 0.5, 0.5, 0.0, 0.0]).unwrap();
        q.or_b = Tensor::vector(vec![0.3, 0.3, 0.3, 0.3, 0.0, 0.0]).unwrap();
        assert!(clause_truth_loss(&[0.1; 6], &[0.3; 6], &q).unwrap().abs() < 1e-12);
    }

    #[test]
    fn regularizer_ranges() {
        let p = params(5);
        let zero = logical_regularizers(&[], &p).unwrap();
        assert_eq!(zero.r, [0.0; 6]);
        let xs = unit_vectors(7, 6, 1);
        let r = logical_regularizers(&xs, &p).unwrap();
        for q in r.r {
            assert!((0.0..=7.0).contains(&q));
        }
        assert!((r.total - r.r.iter().sum::<f64>() / 7.0).abs() < 1e-12);
    }

    #[test]
    fn logic_fit_improves_laws() {
        let mut p = params(6);
        let xs = unit_vectors(32, 6, 2);
        let before_nn: f64 = xs
            .iter()
            .map(|x| cosine_sim(x, &not_op(&not_op(x, &p).unwrap(), &p).unwrap()).unwrap())
            .sum();
        let t = Tensor::from_rows(&xs).unwrap();
        let adam = AdamConfig {
            lr: 1e-2,
            ..AdamConfig::default()
        };
        let curve = fit_logic_modules(&mut p, &t, 200, adam).unwrap();
        assert!(curve.last().unwrap() < &curve[0]);
        let after_nn: f64 = xs
            .iter()
            .map(|x| cosine_sim(x, &not_op(&not_op(x, &p).unwrap(), &p).unwrap()).unwrap())
            .sum();
        assert!(after_nn > before_nn);
        let truth = p.truth.data().to_vec();
        assert!((truth.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        let falsity = not_op(&truth, &p).unwrap();
        let or_f: f64 = xs
            .iter()
            .map(|x| cosine_sim(x, &or_op(x, &falsity, &p).unwrap()).unwrap())
            .sum::<f64>()
            / 32.0;
        assert!(or_f > 0.5, "{or_f}");
    }

    #[test]
    fn gradients_through_events_fold_and_regularizers() {
        let p = params(7);
        let mut inputs: Vec<Tensor> = p.tensors().into_iter().cloned().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        inputs.push(Tensor::uniform(&[2, 4], 1.0, &mut rng).unwrap());
        inputs.push(Tensor::uniform(&[3, 4], 1.0, &mut rng).unwrap());
        let f = |t: &mut Tape, v: &[Var]| {
            let vars = ReasoningVars(v[..11].try_into().unwrap());
            let e = vars.events(t, v[11], v[12])?;
            let n = vars.not(t, e)?;
            let clause = vars.fold(t, n, 2, &[2, 0, 1])?;
            let correct = t.gather_rows(e, &[1, 5])?;
            let ct = vars.clause_truth_loss(t, clause, correct)?;
            let all = t.concat(&[clause, e], 0)?;
            let reg = vars.regularizers(t, all, 2)?;
            t.add(ct, reg.total)
        };
        let err = max_relative_error(&f, &inputs, 1e-6).unwrap();
        assert!(err <= 1e-4, "{err}");
    }
}
