use serde::{Deserialize, Serialize};

use super::{Matrix, Param};
use crate::{Error, Result};

/// Plain SGD with L2 weight decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub l2: f64,
}

impl SgdConfig {
    pub fn new(learning_rate: f64, l2: f64) -> Result<Self> {
        let cfg = SgdConfig { learning_rate, l2 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !(self.l2 >= 0.0) {
            return Err(Error::Config(format!(
                "sgd needs learning_rate > 0 and l2 >= 0, got {} / {}",
                self.learning_rate, self.l2
            )));
        }
        Ok(())
    }
}

/// `value <- value - lr * (grad + l2 * value)`, then zero the grads.
pub fn sgd_step(params: &mut [&mut Param], cfg: &SgdConfig) {
    for p in params.iter_mut() {
        let Param { value, grad } = &mut **p;
        for (v, g) in value.as_mut_slice().iter_mut().zip(grad.as_slice()) {
            *v -= cfg.learning_rate * (g + cfg.l2 * *v);
        }
        p.zero_grad();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64, l2: f64) -> Self {
        AdamConfig {
            learning_rate,
            l2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with L2 folded into the gradient.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    t: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Self {
        Adam {
            cfg,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [&mut Param]) {
        if self.m.len() != params.len() {
            self.m = params
                .iter()
                .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
                .collect();
            self.v = self.m.clone();
            self.t = 0;
        }
        self.t += 1;
        let c = self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let Param { value, grad } = &mut **p;
            let it = value
                .as_mut_slice()
                .iter_mut()
                .zip(grad.as_slice())
                .zip(m.as_mut_slice().iter_mut().zip(v.as_mut_slice()));
            for ((w, g), (mi, vi)) in it {
                let g = g + c.l2 * *w;
                *mi = c.beta1 * *mi + (1.0 - c.beta1) * g;
                *vi = c.beta2 * *vi + (1.0 - c.beta2) * g * g;
                *w -= c.learning_rate * (*mi / bc1) / ((*vi / bc2).sqrt() + c.eps);
            }
            p.zero_grad();
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

/// Runtime-selected optimizer.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd(SgdConfig),
    Adam(Adam),
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, l2: f64) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd(SgdConfig { learning_rate, l2 }),
            OptimizerKind::Adam => Optimizer::Adam(Adam::new(AdamConfig::new(learning_rate, l2))),
        }
    }

    pub fn step(&mut self, params: &mut [&mut Param]) {
        match self {
            Optimizer::Sgd(cfg) => sgd_step(params, cfg),
            Optimizer::Adam(adam) => adam.step(params),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64, g: f64) -> Param {
        let mut p = Param::new(Matrix::from_rows(&[&[v]]));
        p.grad.set(0, 0, g);
        p
    }

    #[test]
    fn sgd_examples() {
        let mut p = scalar(1.0, 1.0);
        sgd_step(
            &mut [&mut p],
            &SgdConfig {
                learning_rate: 0.1,
                l2: 0.0,
            },
        );
        assert!((p.value.get(0, 0) - 0.9).abs() < 1e-15);
        assert_eq!(p.grad.get(0, 0), 0.0);

        let mut p = scalar(1.0, 0.0);
        sgd_step(
            &mut [&mut p],
            &SgdConfig {
                learning_rate: 0.1,
                l2: 1.0,
            },
        );
        assert!((p.value.get(0, 0) - 0.9).abs() < 1e-15);

        let mut p = scalar(0.37, 0.0);
        sgd_step(
            &mut [&mut p],
            &SgdConfig {
                learning_rate: 0.1,
                l2: 0.0,
            },
        );
        assert_eq!(p.value.get(0, 0), 0.37);
    }

    #[test]
    fn sgd_config_rejects_nonpositive_rate() {
        assert!(SgdConfig::new(0.0, 0.0).is_err());
        assert!(SgdConfig::new(0.1, -1.0).is_err());
        assert!(SgdConfig::new(0.1, 0.0).is_ok());
    }

    #[test]
    fn adam_moves_against_gradient() {
        let mut p = scalar(1.0, 2.0);
        let mut adam = Adam::new(AdamConfig::new(0.1, 0.0));
        adam.step(&mut [&mut p]);
        assert!((p.value.get(0, 0) - 0.9).abs() < 1e-6);
        assert_eq!(p.grad.get(0, 0), 0.0);
    }
}
