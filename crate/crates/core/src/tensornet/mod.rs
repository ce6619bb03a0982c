//! Minimal differentiable building blocks.
//!
//! Everything is 64-bit and 2-D. Layers expose explicit `forward` and
//! `backward` calls; callers compose them by hand and keep whatever
//! intermediate values the backward pass needs.

mod checkpoint;
mod gradcheck;
mod layers;
mod matrix;
mod optim;

pub use checkpoint::{Checkpoint, NamedTensor};
pub use gradcheck::grad_check;
pub use layers::{
    relu, relu_backward, sigmoid, sigmoid_backward, sigmoid_scalar, tanh, tanh_backward, Linear,
};
pub use matrix::Matrix;
pub use optim::{sgd_step, Adam, AdamConfig, Optimizer, OptimizerKind, SgdConfig};

use rand::Rng;

/// A trainable tensor and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Matrix,
    pub grad: Matrix,
}

impl Param {
    pub fn new(value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Param { value, grad }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Param::new(Matrix::zeros(rows, cols))
    }

    /// `uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn uniform_fan_in<R: Rng + ?Sized>(
        rows: usize,
        cols: usize,
        fan_in: usize,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        Param::new(Matrix::random_uniform(rows, cols, -bound, bound, rng))
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Anything that owns an ordered list of [`Param`]s.
///
/// The order is stable; checkpoints, optimizers and gradient buffers all
/// rely on it.
pub trait Parameterized {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    /// Names matching [`Parameterized::params`] one to one.
    fn param_names(&self) -> Vec<String> {
        (0..self.params().len()).map(|i| format!("p{i}")).collect()
    }

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Zeroed matrices shaped like every parameter.
    fn grad_buffer(&self) -> Vec<Matrix> {
        self.params()
            .iter()
            .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
            .collect()
    }

    /// Adds an external gradient buffer into the parameter grads.
    fn accumulate_grads(&mut self, grads: &[Matrix]) {
        for (p, g) in self.params_mut().into_iter().zip(grads) {
            p.grad.add_assign(g);
        }
    }

    fn to_checkpoint(&self) -> Checkpoint {
        let tensors = self
            .param_names()
            .into_iter()
            .zip(self.params())
            .map(|(name, p)| NamedTensor::new(name, p.value.clone()))
            .collect();
        Checkpoint::new(tensors)
    }

    /// Loads values by name; every parameter must be present with the
    /// matching shape.
    fn load_checkpoint(&mut self, ckpt: &Checkpoint) -> crate::Result<()> {
        let names = self.param_names();
        for (name, p) in names.iter().zip(self.params_mut()) {
            let t = ckpt
                .get(name)
                .ok_or_else(|| crate::Error::Checkpoint(format!("missing tensor {name}")))?;
            if t.value.shape() != p.value.shape() {
                return Err(crate::Error::Checkpoint(format!(
                    "tensor {name} has shape {:?}, expected {:?}",
                    t.value.shape(),
                    p.value.shape()
                )));
            }
            p.value = t.value.clone();
            p.zero_grad();
        }
        Ok(())
    }
}

impl Parameterized for Vec<Param> {
    fn params(&self) -> Vec<&Param> {
        self.iter().collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.iter_mut().collect()
    }
}
