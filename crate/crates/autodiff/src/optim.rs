//! First-order optimizers operating on [`Parameter`] gradients.

use crate::error::{config_err, dim_err, Result};
use crate::tensor::Parameter;

/// Adaptive moment estimation with bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Default for Adam {
    fn default() -> Self {
        Self::new(0.9, 0.999, 1e-8)
    }
}

impl Adam {
    pub fn new(beta1: f64, beta2: f64, eps: f64) -> Self {
        Self { beta1, beta2, eps, step: 0, first: Vec::new(), second: Vec::new() }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update using each parameter's stored gradient; a missing
    /// gradient counts as zero.
    pub fn step(&mut self, params: &mut [Parameter], lr: f64) -> Result<()> {
        if !(lr > 0.0) || !lr.is_finite() {
            return config_err("adam", format!("learning rate must be positive, got {lr}"));
        }
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![0.0; p.tensor.len()]).collect();
            self.second = self.first.clone();
        }
        if self.first.len() != params.len()
            || self.first.iter().zip(params.iter()).any(|(m, p)| m.len() != p.tensor.len())
        {
            return dim_err("adam", "optimizer state does not match the parameter list");
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let grad = p.tensor.grad().map(<[f64]>::to_vec);
            let Some(g) = grad else { continue };
            let data = p.tensor.data_mut();
            for i in 0..data.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                data[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Plain stochastic gradient descent.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Sgd;

impl Sgd {
    pub fn step(&mut self, params: &mut [Parameter], lr: f64) -> Result<()> {
        if !(lr > 0.0) || !lr.is_finite() {
            return config_err("sgd", format!("learning rate must be positive, got {lr}"));
        }
        for p in params.iter_mut() {
            let Some(g) = p.tensor.grad().map(<[f64]>::to_vec) else { continue };
            p.tensor.data_mut().iter_mut().zip(&g).for_each(|(w, gv)| *w -= lr * gv);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn param(values: &[f64]) -> Parameter {
        Parameter::new("x", Tensor::new(vec![values.len()], values.to_vec()).unwrap(), true)
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = [param(&[1.5, -2.0])];
        p[0].tensor.set_grad(Some(vec![0.0, 0.0]));
        Adam::default().step(&mut p, 0.1).unwrap();
        assert_eq!(p[0].tensor.data(), &[1.5, -2.0]);
    }

    #[test]
    fn single_step_descends_parabola() {
        let mut p = [param(&[1.0])];
        p[0].tensor.set_grad(Some(vec![2.0]));
        Adam::default().step(&mut p, 0.01).unwrap();
        let x = p[0].tensor.data()[0];
        assert!(x < 1.0 && x > 0.0);
    }

    #[test]
    fn quadratic_converges() {
        // f(x, y) = (x - 1)^2 + 10 (y + 2)^2
        let mut p = [param(&[0.0, 0.0])];
        let mut opt = Adam::default();
        let f = |d: &[f64]| (d[0] - 1.0).powi(2) + 10.0 * (d[1] + 2.0).powi(2);
        for _ in 0..500 {
            let d = p[0].tensor.data().to_vec();
            p[0].tensor.set_grad(Some(vec![2.0 * (d[0] - 1.0), 20.0 * (d[1] + 2.0)]));
            opt.step(&mut p, 0.05).unwrap();
        }
        assert!(f(p[0].tensor.data()) < 1e-6, "loss {}", f(p[0].tensor.data()));
    }

    #[test]
    fn rejects_nonpositive_rate() {
        let mut p = [param(&[1.0])];
        assert!(Adam::default().step(&mut p, 0.0).is_err());
        assert!(Adam::default().step(&mut p, -1.0).is_err());
        assert!(Sgd.step(&mut p, 0.0).is_err());
    }
}
