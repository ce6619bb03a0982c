use rand::Rng;

use super::{Matrix, Param, Parameterized};
use crate::{Error, Result};

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Matrix) -> Matrix {
    x.map(sigmoid_scalar)
}

/// Gradient through a sigmoid given its output `y`.
pub fn sigmoid_backward(y: &Matrix, upstream: &Matrix) -> Matrix {
    let mut out = upstream.clone();
    for (g, &s) in out.as_mut_slice().iter_mut().zip(y.as_slice()) {
        *g *= s * (1.0 - s);
    }
    out
}

pub fn relu(x: &Matrix) -> Matrix {
    x.map(|v| v.max(0.0))
}

/// Gradient through a ReLU given its pre-activation input.
pub fn relu_backward(pre: &Matrix, upstream: &Matrix) -> Matrix {
    let mut out = upstream.clone();
    for (g, &z) in out.as_mut_slice().iter_mut().zip(pre.as_slice()) {
        if z <= 0.0 {
            *g = 0.0;
        }
    }
    out
}

pub fn tanh(x: &Matrix) -> Matrix {
    x.map(f64::tanh)
}

/// Gradient through tanh given its output `y`.
pub fn tanh_backward(y: &Matrix, upstream: &Matrix) -> Matrix {
    let mut out = upstream.clone();
    for (g, &t) in out.as_mut_slice().iter_mut().zip(y.as_slice()) {
        *g *= 1.0 - t * t;
    }
    out
}

/// Affine map `y = x W + b` with `W: in x out` and `b: 1 x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Param,
    pub b: Param,
}

impl Linear {
    /// Uniform fan-in weights, zero bias.
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        Linear {
            w: Param::uniform_fan_in(input, output, input, rng),
            b: Param::zeros(1, output),
        }
    }

    pub fn from_parts(w: Matrix, b: Matrix) -> Result<Self> {
        if b.rows() != 1 || b.cols() != w.cols() {
            return Err(Error::ShapeMismatch {
                op: "linear bias",
                left: w.shape(),
                right: b.shape(),
            });
        }
        Ok(Linear {
            w: Param::new(w),
            b: Param::new(b),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w.value.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w.value.cols()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut y = x.matmul(&self.w.value)?;
        let b = self.b.value.row(0);
        for r in 0..y.rows() {
            for (v, bias) in y.row_mut(r).iter_mut().zip(b) {
                *v += bias;
            }
        }
        Ok(y)
    }

    /// Accumulates `dW`, `db` into the given buffers and returns `dx`.
    pub fn backward_into(
        &self,
        x: &Matrix,
        upstream: &Matrix,
        gw: &mut Matrix,
        gb: &mut Matrix,
    ) -> Matrix {
        Matrix::gemm_acc(true, x, false, upstream, gw);
        gb.add_assign(&upstream.col_sums());
        upstream
            .matmul_t(&self.w.value)
            .expect("upstream columns match layer output")
    }

    /// Accumulates into the layer's own grads and returns `dx`.
    pub fn backward(&mut self, x: &Matrix, upstream: &Matrix) -> Matrix {
        let mut gw = std::mem::replace(&mut self.w.grad, Matrix::zeros(0, 0));
        let mut gb = std::mem::replace(&mut self.b.grad, Matrix::zeros(0, 0));
        let dx = self.backward_into(x, upstream, &mut gw, &mut gb);
        self.w.grad = gw;
        self.b.grad = gb;
        dx
    }
}

impl Parameterized for Linear {
    fn params(&self) -> Vec<&Param> {
        vec![&self.w, &self.b]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w, &mut self.b]
    }

    fn param_names(&self) -> Vec<String> {
        vec!["w".into(), "b".into()]
    }
}
