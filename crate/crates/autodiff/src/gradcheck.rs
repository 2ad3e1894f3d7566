//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Result, TensorError};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Which coordinates of each input are perturbed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coordinates {
    All,
    /// At most this many randomly chosen coordinates per input.
    Sample(usize),
}

/// Outcome of a gradient check.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub max_abs_error: f64,
    pub coordinates_checked: usize,
    /// `(input, coordinate, analytic, numeric)` of the worst coordinate.
    pub worst: Option<(usize, usize, f64, f64)>,
}

/// Compares analytic gradients of the scalar built by `f` against
/// `(f(x + eps) - f(x - eps)) / (2 eps)` for every coordinate of every input.
///
/// Per coordinate the error is `|a - n| / max(|a|, |n|, floor)` with
/// `floor = 1e-6 * max(1, |f(x)|)`, so coordinates whose gradient is below the
/// rounding noise of the central difference are compared absolutely.
pub fn gradient_check<F>(f: F, inputs: &[Tensor], eps: f64) -> Result<f64>
where
    F: FnMut(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut rng = rand::rng();
    gradient_check_report(f, inputs, eps, Coordinates::All, &mut rng).map(|r| r.max_relative_error)
}

pub fn gradient_check_report<F, R>(
    mut f: F,
    inputs: &[Tensor],
    eps: f64,
    coords: Coordinates,
    rng: &mut R,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &[Var]) -> Result<Var>,
    R: Rng + ?Sized,
{
    let mut eval = |values: &[Tensor], with_grad: bool| -> Result<(f64, Vec<Option<Vec<f64>>>)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values
            .iter()
            .map(|t| tape.leaf(t.clone().with_requires_grad(with_grad)))
            .collect();
        let out = f(&mut tape, &vars)?;
        let Some(value) = tape.value(out).item() else {
            return Err(TensorError::Contract(format!(
                "gradient check needs a scalar output, got shape {:?}",
                tape.value(out).shape()
            )));
        };
        if !with_grad {
            return Ok((value, Vec::new()));
        }
        let grads = if tape.value(out).requires_grad() {
            tape.backward(out)?;
            vars.iter().map(|v| tape.grad(*v).map(<[f64]>::to_vec)).collect()
        } else {
            vec![None; vars.len()]
        };
        Ok((value, grads))
    };

    let (f0, analytic) = eval(inputs, true)?;
    let floor = 1e-6 * f0.abs().max(1.0);
    let mut work: Vec<Tensor> = inputs.to_vec();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        max_abs_error: 0.0,
        coordinates_checked: 0,
        worst: None,
    };

    for k in 0..inputs.len() {
        let n = inputs[k].len();
        let picked: Vec<usize> = match coords {
            Coordinates::All => (0..n).collect(),
            Coordinates::Sample(m) if m >= n => (0..n).collect(),
            Coordinates::Sample(m) => {
                let mut idx = sample(rng, n, m).into_vec();
                idx.sort_unstable();
                idx
            }
        };
        for i in picked {
            let orig = inputs[k].data()[i];
            work[k].data_mut()[i] = orig + eps;
            let (plus, _) = eval(&work, false)?;
            work[k].data_mut()[i] = orig - eps;
            let (minus, _) = eval(&work, false)?;
            work[k].data_mut()[i] = orig;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[k].as_ref().map_or(0.0, |g| g[i]);
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(floor);
            report.coordinates_checked += 1;
            report.max_abs_error = report.max_abs_error.max(abs);
            if rel > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = report.max_relative_error.max(rel);
                report.worst = Some((k, i, a, numeric));
            }
        }
    }
    Ok(report)
}
