//! Finite-difference gradient checking.
//!
//! The central-difference path only ever evaluates the forward pass, so it
//! is independent of the reverse-mode rules it is used to check.

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Evaluates `f` on fresh constants and returns the scalar result.
pub fn evaluate<F>(f: &F, inputs: &[Tensor]) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    tape.value(out).item()
}

/// Reverse-mode gradients of `f` with respect to every input.
pub fn analytic<F>(f: &F, inputs: &[Tensor]) -> Result<Vec<Tensor>>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t)).collect();
    let out = f(&mut tape, &vars)?;
    let mut grads = tape.backward(out)?;
    vars.iter()
        .map(|&v| {
            grads
                .take(v)
                .ok_or_else(|| Error::Contract("missing gradient for input".into()))
        })
        .collect()
}

/// Central differences `(f(x+h) - f(x-h)) / 2h` for every entry of
/// `inputs[which]`.
pub fn central_difference<F>(f: &F, inputs: &[Tensor], which: usize, h: f64) -> Result<Vec<f64>>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut work = inputs.to_vec();
    let n = work[which].len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let orig = work[which].data()[i];
        work[which].data_mut()[i] = orig + h;
        let up = evaluate(f, &work)?;
        work[which].data_mut()[i] = orig - h;
        let down = evaluate(f, &work)?;
        work[which].data_mut()[i] = orig;
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// `|a - b| / max(|a|, |b|)` in the L2 norm; 0 when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Largest relative error over all inputs of `f`.
pub fn max_relative_error<F>(f: &F, inputs: &[Tensor], h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let analytic = analytic(f, inputs)?;
    let mut worst: f64 = 0.0;
    for (i, g) in analytic.iter().enumerate() {
        let fd = central_difference(f, inputs, i, h)?;
        worst = worst.max(relative_error(g.data(), &fd));
    }
    Ok(worst)
}
