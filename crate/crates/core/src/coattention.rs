//! Co-attention across the topological, semantic and syntactic views.
//!
//! Each title carries one vector per view, so every affinity is a scalar
//! bilinear form `tanh(x W y^T)`. Keys mix a view's own projection with the
//! affinity-weighted projections of the other two views, and the attended
//! vector is `softmax(K) * x` over the vector's components.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor, Var};

/// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub(crate) fn init_weight<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Result<Tensor> {
    Tensor::uniform(shape, 1.0 / (fan_in as f64).sqrt(), rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ViewDims {
    pub d_h: usize,
    pub d_b: usize,
    pub d_s: usize,
}

/// Learnable co-attention weights.
///
/// Affinity matrices `aff_*` are bilinear forms with shape `[left, right]`.
/// Key weights are stored `[out, in]`: `w_bh` maps the semantic vector into
/// the topological key, `w_hb` maps the topological vector into the semantic
/// key, and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct CoAttentionParams {
    pub aff_hb: Tensor,
    pub aff_hs: Tensor,
    pub aff_bs: Tensor,
    pub w_h: Tensor,
    pub w_b: Tensor,
    pub w_s: Tensor,
    pub w_bh: Tensor,
    pub w_sh: Tensor,
    pub w_hb: Tensor,
    pub w_sb: Tensor,
    pub w_hs: Tensor,
    pub w_bs: Tensor,
}

pub const PARAM_NAMES: [&str; 12] = [
    "aff_hb", "aff_hs", "aff_bs", "w_h", "w_b", "w_s", "w_bh", "w_sh", "w_hb", "w_sb", "w_hs", "w_bs",
];

impl CoAttentionParams {
    pub fn init<R: Rng + ?Sized>(dims: ViewDims, rng: &mut R) -> Result<Self> {
        let ViewDims { d_h, d_b, d_s } = dims;
        Ok(Self {
            aff_hb: init_weight(&[d_h, d_b], d_h, rng)?,
            aff_hs: init_weight(&[d_h, d_s], d_h, rng)?,
            aff_bs: init_weight(&[d_b, d_s], d_b, rng)?,
            w_h: init_weight(&[d_h, d_h], d_h, rng)?,
            w_b: init_weight(&[d_b, d_b], d_b, rng)?,
            w_s: init_weight(&[d_s, d_s], d_s, rng)?,
            w_bh: init_weight(&[d_h, d_b], d_b, rng)?,
            w_sh: init_weight(&[d_h, d_s], d_s, rng)?,
            w_hb: init_weight(&[d_b, d_h], d_h, rng)?,
            w_sb: init_weight(&[d_b, d_s], d_s, rng)?,
            w_hs: init_weight(&[d_s, d_h], d_h, rng)?,
            w_bs: init_weight(&[d_s, d_b], d_b, rng)?,
        })
    }

    pub fn dims(&self) -> ViewDims {
        ViewDims {
            d_h: self.w_h.shape()[0],
            d_b: self.w_b.shape()[0],
            d_s: self.w_s.shape()[0],
        }
    }

    /// Parameters in [`PARAM_NAMES`] order.
    pub fn tensors(&self) -> [&Tensor; 12] {
        [
            &self.aff_hb, &self.aff_hs, &self.aff_bs, &self.w_h, &self.w_b, &self.w_s, &self.w_bh,
            &self.w_sh, &self.w_hb, &self.w_sb, &self.w_hs, &self.w_bs,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 12] {
        [
            &mut self.aff_hb,
            &mut self.aff_hs,
            &mut self.aff_bs,
            &mut self.w_h,
            &mut self.w_b,
            &mut self.w_s,
            &mut self.w_bh,
            &mut self.w_sh,
            &mut self.w_hb,
            &mut self.w_sb,
            &mut self.w_hs,
            &mut self.w_bs,
        ]
    }

    /// Rebuilds from tensors in [`PARAM_NAMES`] order, checking shapes.
    pub fn from_tensors(t: Vec<Tensor>) -> Result<Self> {
        let [aff_hb, aff_hs, aff_bs, w_h, w_b, w_s, w_bh, w_sh, w_hb, w_sb, w_hs, w_bs]: [Tensor; 12] =
            t.try_into().map_err(|v: Vec<Tensor>| {
                Error::dim(format!("co-attention needs 12 tensors, got {}", v.len()))
            })?;
        let p = Self {
            aff_hb,
            aff_hs,
            aff_bs,
            w_h,
            w_b,
            w_s,
            w_bh,
            w_sh,
            w_hb,
            w_sb,
            w_hs,
            w_bs,
        };
        p.check_shapes()?;
        Ok(p)
    }

    pub fn check_shapes(&self) -> Result<()> {
        if self.w_h.ndim() != 2 || self.w_b.ndim() != 2 || self.w_s.ndim() != 2 {
            return Err(Error::dim("co-attention self weights must be matrices"));
        }
        let ViewDims { d_h, d_b, d_s } = self.dims();
        let want = [
            [d_h, d_b],
            [d_h, d_s],
            [d_b, d_s],
            [d_h, d_h],
            [d_b, d_b],
            [d_s, d_s],
            [d_h, d_b],
            [d_h, d_s],
            [d_b, d_h],
            [d_b, d_s],
            [d_s, d_h],
            [d_s, d_b],
        ];
        for ((name, t), w) in PARAM_NAMES.iter().zip(self.tensors()).zip(want) {
            if t.shape() != w {
                return Err(Error::dim(format!(
                    "co-attention {name} has shape {:?}, expected {w:?}",
                    t.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn register(&self, tape: &mut Tape) -> CoAttentionVars {
        let v = self.tensors().map(|t| tape.param(t));
        CoAttentionVars(v)
    }
}

/// Tape handles for [`CoAttentionParams`], in [`PARAM_NAMES`] order.
#[derive(Debug, Clone, Copy)]
pub struct CoAttentionVars(pub [Var; 12]);

#[derive(Debug, Clone, Copy)]
pub struct CoAttended {
    pub a_hb: Var,
    pub a_hs: Var,
    pub a_bs: Var,
    pub k_h: Var,
    pub k_b: Var,
    pub k_s: Var,
    pub x_h: Var,
    pub x_b: Var,
    pub x_s: Var,
}

fn bilinear(tape: &mut Tape, x: Var, w: Var, y: Var) -> Result<Var> {
    let xw = tape.matmul(x, w)?;
    let p = tape.mul(xw, y)?;
    let s = tape.row_sums(p)?;
    tape.tanh(s)
}

fn key(tape: &mut Tape, own: (Var, Var), a: (Var, Var, Var), b: (Var, Var, Var)) -> Result<Var> {
    let mut acc = tape.matmul_nt(own.0, own.1)?;
    for (aff, x, w) in [a, b] {
        let scaled = tape.mul_col(x, aff)?;
        let proj = tape.matmul_nt(scaled, w)?;
        acc = tape.add(acc, proj)?;
    }
    tape.tanh(acc)
}

/// Batched co-attention. Inputs are `[B, d_h]`, `[B, d_b]`, `[B, d_s]`.
pub fn co_attend(tape: &mut Tape, p: &CoAttentionVars, x_h: Var, x_b: Var, x_s: Var) -> Result<CoAttended> {
    let [aff_hb, aff_hs, aff_bs, w_h, w_b, w_s, w_bh, w_sh, w_hb, w_sb, w_hs, w_bs] = p.0;
    let a_hb = bilinear(tape, x_h, aff_hb, x_b)?;
    let a_hs = bilinear(tape, x_h, aff_hs, x_s)?;
    let a_bs = bilinear(tape, x_b, aff_bs, x_s)?;
    let k_h = key(tape, (x_h, w_h), (a_hb, x_b, w_bh), (a_hs, x_s, w_sh))?;
    let k_b = key(tape, (x_b, w_b), (a_hb, x_h, w_hb), (a_bs, x_s, w_sb))?;
    let k_s = key(tape, (x_s, w_s), (a_hs, x_h, w_hs), (a_bs, x_b, w_bs))?;
    let attend = |tape: &mut Tape, x: Var, k: Var| -> Result<Var> {
        let w = tape.softmax(k)?;
        tape.mul(w, x)
    };
    Ok(CoAttended {
        a_hb,
        a_hs,
        a_bs,
        k_h,
        k_b,
        k_s,
        x_h: attend(tape, x_h, k_h)?,
        x_b: attend(tape, x_b, k_b)?,
        x_s: attend(tape, x_s, k_s)?,
    })
}

fn check_inputs(x_h: &[f64], x_b: &[f64], x_s: &[f64], p: &CoAttentionParams) -> Result<()> {
    let d = p.dims();
    if (x_h.len(), x_b.len(), x_s.len()) != (d.d_h, d.d_b, d.d_s) {
        return Err(Error::dim(format!(
            "view dimensions ({}, {}, {}) do not match parameters ({}, {}, {})",
            x_h.len(),
            x_b.len(),
            x_s.len(),
            d.d_h,
            d.d_b,
            d.d_s
        )));
    }
    Ok(())
}

fn single(x_h: &[f64], x_b: &[f64], x_s: &[f64], p: &CoAttentionParams) -> Result<(Tape, CoAttended)> {
    check_inputs(x_h, x_b, x_s, p)?;
    let mut tape = Tape::new();
    let vars = CoAttentionVars(p.tensors().map(|t| tape.constant(t.clone())));
    let h = tape.constant(Tensor::matrix(1, x_h.len(), x_h.to_vec())?);
    let b = tape.constant(Tensor::matrix(1, x_b.len(), x_b.to_vec())?);
    let s = tape.constant(Tensor::matrix(1, x_s.len(), x_s.to_vec())?);
    let out = co_attend(&mut tape, &vars, h, b, s)?;
    Ok((tape, out))
}

/// `(a_hb, a_hs, a_bs)` for one title.
pub fn affinities(x_h: &[f64], x_b: &[f64], x_s: &[f64], p: &CoAttentionParams) -> Result<(f64, f64, f64)> {
    let (t, o) = single(x_h, x_b, x_s, p)?;
    Ok((t.value(o.a_hb).item()?, t.value(o.a_hs).item()?, t.value(o.a_bs).item()?))
}

/// `(K_h, K_b, K_s)` for one title.
pub fn attention_keys(
    x_h: &[f64],
    x_b: &[f64],
    x_s: &[f64],
    p: &CoAttentionParams,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let (t, o) = single(x_h, x_b, x_s, p)?;
    Ok((
        t.value(o.k_h).data().to_vec(),
        t.value(o.k_b).data().to_vec(),
        t.value(o.k_s).data().to_vec(),
    ))
}

/// `softmax(k) * x`.
pub fn apply(x: &[f64], k: &[f64]) -> Result<Vec<f64>> {
    if x.len() != k.len() || x.is_empty() {
        return Err(Error::dim(format!(
            "attention over {} components with {} keys",
            x.len(),
            k.len()
        )));
    }
    let w = crate::numerics::softmax(&Tensor::vector(k.to_vec())?)?;
    Ok(w.data().iter().zip(x).map(|(a, b)| a * b).collect())
}
