//! Parameterised building blocks.
//!
//! Layers do not own tensors. They hold indices into a [`ParamStore`], and a
//! forward pass receives the bound [`Var`]s for the whole store, so the same
//! layer description can be evaluated against perturbed copies of the
//! parameters (finite differences) without rebuilding anything.

use std::collections::HashSet;

use rand::Rng;

use crate::error::{config_err, Result};
use crate::tape::{Tape, Var};
use crate::tensor::{Parameter, Tensor};

/// Ordered collection of uniquely named parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_params(params: Vec<Parameter>) -> Result<Self> {
        let mut seen = HashSet::new();
        for p in &params {
            if !seen.insert(p.name.as_str()) {
                return config_err("param_store", format!("duplicate parameter name {:?}", p.name));
            }
        }
        Ok(Self { params })
    }

    /// Registers a parameter and returns its index.
    ///
    /// # Panics
    /// If the name is already taken; names are assigned by layer
    /// constructors, so a clash is a programming error.
    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor, regularized: bool) -> usize {
        let name = name.into();
        assert!(self.index_of(&name).is_none(), "duplicate parameter name {name:?}");
        self.params.push(Parameter::new(name, tensor, regularized));
        self.params.len() - 1
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar entries.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.tensor.len()).sum()
    }

    /// Records every parameter on the tape, in store order.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.iter().map(|p| tape.param(&p.tensor)).collect()
    }

    /// Records every parameter as a constant, for inference passes that
    /// never call `backward`.
    pub fn bind_frozen(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.iter().map(|p| tape.constant(p.tensor.clone())).collect()
    }

    /// The bound variables of the regularized parameters.
    pub fn regularized_vars(&self, bound: &[Var]) -> Vec<Var> {
        self.params
            .iter()
            .zip(bound)
            .filter(|(p, _)| p.regularized)
            .map(|(_, v)| *v)
            .collect()
    }

    /// Copies gradients from the tape into the parameters' grad slots.
    pub fn collect_grads(&mut self, tape: &Tape, bound: &[Var]) {
        for (p, v) in self.params.iter_mut().zip(bound) {
            let g = tape.grad(*v).map(<[f64]>::to_vec);
            p.tensor.set_grad(g);
        }
    }
}

/// Fan-in scaled normal initialisation, `std = sqrt(2 / fan_in)`.
pub fn he_normal<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor {
    Tensor::randn(shape, (2.0 / fan_in as f64).sqrt(), rng)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    kernel: usize,
    bias: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Self {
        let fan_in = in_channels * kernel_size * kernel_size;
        let k = he_normal(&[out_channels, in_channels, kernel_size, kernel_size], fan_in, rng);
        let kernel = store.add(format!("{name}.kernel"), k, true);
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[out_channels]), false);
        Self { kernel, bias, in_channels, out_channels, kernel_size, stride, padding }
    }

    pub fn forward(&self, tape: &mut Tape, bound: &[Var], x: Var) -> Result<Var> {
        tape.conv2d(x, bound[self.kernel], bound[self.bias], self.stride, self.padding)
    }

    pub fn kernel_index(&self) -> usize {
        self.kernel
    }

    pub fn bias_index(&self) -> usize {
        self.bias
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    weight: usize,
    bias: usize,
    pub in_features: usize,
    pub out_features: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_features: usize,
        out_features: usize,
        rng: &mut R,
    ) -> Self {
        let w = he_normal(&[out_features, in_features], in_features, rng);
        let weight = store.add(format!("{name}.weight"), w, true);
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[out_features]), false);
        Self { weight, bias, in_features, out_features }
    }

    /// All-zero weights and bias: the layer starts out emitting zeros.
    pub fn zeroed(store: &mut ParamStore, name: &str, in_features: usize, out_features: usize) -> Self {
        let weight = store.add(format!("{name}.weight"), Tensor::zeros(&[out_features, in_features]), true);
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[out_features]), false);
        Self { weight, bias, in_features, out_features }
    }

    pub fn forward(&self, tape: &mut Tape, bound: &[Var], x: Var) -> Result<Var> {
        tape.linear(x, bound[self.weight], bound[self.bias])
    }
}

/// Two 3x3 convolutions with a ReLU between them, plus an identity skip
/// (or a 1x1 projection when the channel count changes). No normalisation.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualBlock {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
    pub skip: Option<Conv2d>,
}

impl ResidualBlock {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        rng: &mut R,
    ) -> Self {
        let conv1 = Conv2d::new(store, &format!("{name}.conv1"), in_channels, out_channels, 3, 1, 1, rng);
        let conv2 = Conv2d::new(store, &format!("{name}.conv2"), out_channels, out_channels, 3, 1, 1, rng);
        let skip = (in_channels != out_channels)
            .then(|| Conv2d::new(store, &format!("{name}.skip"), in_channels, out_channels, 1, 1, 0, rng));
        Self { conv1, conv2, skip }
    }

    pub fn out_channels(&self) -> usize {
        self.conv2.out_channels
    }

    pub fn forward(&self, tape: &mut Tape, bound: &[Var], x: Var) -> Result<Var> {
        let h = self.conv1.forward(tape, bound, x)?;
        let h = tape.relu(h);
        let branch = self.conv2.forward(tape, bound, h)?;
        let skip = match &self.skip {
            Some(proj) => proj.forward(tape, bound, x)?,
            None => x,
        };
        tape.add(branch, skip)
    }
}
