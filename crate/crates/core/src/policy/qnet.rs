use rand::Rng;

use crate::tensornet::{relu, relu_backward, Linear, Matrix, Param, Parameterized};

/// `Q(s, a) = V(s) + A(s, a) - mean_a' A(s, a')` over the candidate set.
pub fn dueling_combine(value: f64, advantages: &[f64]) -> Vec<f64> {
    if advantages.is_empty() {
        return Vec::new();
    }
    let mean = advantages.iter().sum::<f64>() / advantages.len() as f64;
    advantages.iter().map(|a| value + (a - mean)).collect()
}

/// Value head over the state, advantage head over `[state; action]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DuelingQNet {
    pub value_hidden: Linear,
    pub value_out: Linear,
    pub adv_hidden: Linear,
    pub adv_out: Linear,
}

#[derive(Debug, Clone)]
pub struct QTrace {
    xs: Matrix,
    v_pre: Matrix,
    v_act: Matrix,
    xa: Matrix,
    a_pre: Matrix,
    a_act: Matrix,
    pub value: f64,
    pub advantages: Vec<f64>,
    pub q: Vec<f64>,
}

impl DuelingQNet {
    pub fn new<R: Rng + ?Sized>(dim: usize, hidden: usize, rng: &mut R) -> Self {
        DuelingQNet {
            value_hidden: Linear::new(dim, hidden, rng),
            value_out: Linear::new(hidden, 1, rng),
            adv_hidden: Linear::new(2 * dim, hidden, rng),
            adv_out: Linear::new(hidden, 1, rng),
        }
    }

    pub fn dim(&self) -> usize {
        self.value_hidden.input_dim()
    }

    /// Q values for every row of `actions`.
    pub fn forward(&self, state: &[f64], actions: &Matrix) -> QTrace {
        let d = state.len();
        let k = actions.rows();
        let xs = Matrix::row_vector(state);
        let v_pre = self.value_hidden.forward(&xs).expect("state width");
        let v_act = relu(&v_pre);
        let value = self
            .value_out
            .forward(&v_act)
            .expect("hidden width")
            .get(0, 0);

        let mut xa = Matrix::zeros(k, 2 * d);
        for i in 0..k {
            let row = xa.row_mut(i);
            row[..d].copy_from_slice(state);
            row[d..].copy_from_slice(actions.row(i));
        }
        let a_pre = self.adv_hidden.forward(&xa).expect("state + action width");
        let a_act = relu(&a_pre);
        let advantages = self
            .adv_out
            .forward(&a_act)
            .expect("hidden width")
            .into_vec();
        let q = dueling_combine(value, &advantages);
        QTrace {
            xs,
            v_pre,
            v_act,
            xa,
            a_pre,
            a_act,
            value,
            advantages,
            q,
        }
    }

    /// Accumulates grads for upstream `dq` and returns the gradients with
    /// respect to the state vector and each action row.
    pub fn backward_into(
        &self,
        trace: &QTrace,
        dq: &[f64],
        grads: &mut [Matrix],
    ) -> (Vec<f64>, Matrix) {
        let k = dq.len();
        let d = self.dim();
        let dv: f64 = dq.iter().sum();
        let mean = dv / k as f64;
        let da = Matrix::from_vec(k, 1, dq.iter().map(|g| g - mean).collect()).expect("column");

        let [g_vh_w, g_vh_b, g_vo_w, g_vo_b, g_ah_w, g_ah_b, g_ao_w, g_ao_b] = grads else {
            panic!("dueling net has eight parameters");
        };
        let d_vact = self.value_out.backward_into(
            &trace.v_act,
            &Matrix::from_rows(&[&[dv]]),
            g_vo_w,
            g_vo_b,
        );
        let d_vpre = relu_backward(&trace.v_pre, &d_vact);
        let d_xs = self
            .value_hidden
            .backward_into(&trace.xs, &d_vpre, g_vh_w, g_vh_b);

        let d_aact = self
            .adv_out
            .backward_into(&trace.a_act, &da, g_ao_w, g_ao_b);
        let d_apre = relu_backward(&trace.a_pre, &d_aact);
        let d_xa = self
            .adv_hidden
            .backward_into(&trace.xa, &d_apre, g_ah_w, g_ah_b);

        let mut ds = d_xs.row(0).to_vec();
        let mut d_actions = Matrix::zeros(k, d);
        for i in 0..k {
            let row = d_xa.row(i);
            for (s, v) in ds.iter_mut().zip(&row[..d]) {
                *s += v;
            }
            d_actions.row_mut(i).copy_from_slice(&row[d..]);
        }
        (ds, d_actions)
    }
}

impl Parameterized for DuelingQNet {
    fn params(&self) -> Vec<&Param> {
        [
            &self.value_hidden,
            &self.value_out,
            &self.adv_hidden,
            &self.adv_out,
        ]
        .into_iter()
        .flat_map(|l| [&l.w, &l.b])
        .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        [
            &mut self.value_hidden,
            &mut self.value_out,
            &mut self.adv_hidden,
            &mut self.adv_out,
        ]
        .into_iter()
        .flat_map(|l| [&mut l.w, &mut l.b])
        .collect()
    }

    fn param_names(&self) -> Vec<String> {
        ["value_hidden", "value_out", "adv_hidden", "adv_out"]
            .iter()
            .flat_map(|n| [format!("{n}.w"), format!("{n}.b")])
            .collect()
    }
}
