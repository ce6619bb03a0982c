use std::collections::BTreeSet;

use rand::Rng;

use crate::graphdata::NormalizedAdjacency;
use crate::tensornet::{relu_backward, Matrix, Param, Parameterized};

/// Node features plus the normalized adjacency of one state.
#[derive(Debug, Clone)]
pub struct GraphInput {
    pub features: Matrix,
    pub adjacency: NormalizedAdjacency,
    pub student: usize,
    pub target: usize,
}

impl GraphInput {
    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }
}

/// `H' = ReLU(Λ H W + H B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnLayer {
    pub w: Param,
    pub b: Param,
}

/// Stack of graph-convolution layers over frozen node features.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnEncoder {
    pub layers: Vec<GcnLayer>,
}

/// Forward values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct EncoderTrace {
    /// `rows[l]`: rows of layer `l`'s output that were computed (`l >= 1`);
    /// `rows[0]` is unused.
    rows: Vec<Vec<usize>>,
    /// Full-height activations; only the computed rows are meaningful.
    hs: Vec<Matrix>,
    agg: Vec<Matrix>,
    pre: Vec<Matrix>,
    pub output: Matrix,
}

impl EncoderTrace {
    /// Output rows, aligned with the `rows` passed to `forward`.
    pub fn out_rows(&self) -> &[usize] {
        self.rows.last().expect("at least one layer")
    }
}

impl GcnEncoder {
    /// Neighbor weights uniform in `±1/sqrt(dim)`, self weights identity.
    pub fn new<R: Rng + ?Sized>(dim: usize, layers: usize, rng: &mut R) -> Self {
        let layers = (0..layers)
            .map(|_| GcnLayer {
                w: Param::uniform_fan_in(dim, dim, dim, rng),
                b: Param::new(Matrix::identity(dim)),
            })
            .collect();
        GcnEncoder { layers }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn dim(&self) -> usize {
        self.layers[0].w.value.rows()
    }

    /// Runs every layer; `rows` restricts the final output (and therefore
    /// the work done below it) to those nodes.
    pub fn forward(&self, input: &GraphInput, rows: Option<&[usize]>) -> EncoderTrace {
        let n = input.num_nodes();
        let depth = self.layers.len();
        let all: Vec<usize> = (0..n).collect();
        let mut needed = vec![Vec::new(); depth + 1];
        needed[depth] = rows.map_or_else(|| all.clone(), |r| r.to_vec());
        for l in (1..depth).rev() {
            if rows.is_none() {
                needed[l] = all.clone();
                continue;
            }
            let mut set: BTreeSet<usize> = needed[l + 1].iter().copied().collect();
            for &i in &needed[l + 1] {
                set.extend(input.adjacency.row(i).iter().map(|&(j, _)| j));
            }
            needed[l] = set.into_iter().collect();
        }

        let d = input.features.cols();
        let mut hs = Vec::with_capacity(depth + 1);
        hs.push(input.features.clone());
        let mut agg = Vec::with_capacity(depth);
        let mut pre = Vec::with_capacity(depth);
        for (l, layer) in self.layers.iter().enumerate() {
            let r = &needed[l + 1];
            let a = input.adjacency.aggregate(&hs[l], Some(r));
            let x = hs[l].select_rows(r);
            let mut z = Matrix::zeros(r.len(), d);
            Matrix::gemm_acc(false, &a, false, &layer.w.value, &mut z);
            Matrix::gemm_acc(false, &x, false, &layer.b.value, &mut z);
            let mut h = Matrix::zeros(n, d);
            for (k, &i) in r.iter().enumerate() {
                for (o, v) in h.row_mut(i).iter_mut().zip(z.row(k)) {
                    *o = v.max(0.0);
                }
            }
            hs.push(h);
            agg.push(a);
            pre.push(z);
        }
        let output = hs[depth].select_rows(&needed[depth]);
        EncoderTrace {
            rows: needed,
            hs,
            agg,
            pre,
            output,
        }
    }

    /// Accumulates parameter grads for an upstream gradient on
    /// `trace.output`. `grads` follows [`Parameterized::params`] order.
    pub fn backward_into(
        &self,
        input: &GraphInput,
        trace: &EncoderTrace,
        d_out: &Matrix,
        grads: &mut [Matrix],
    ) {
        let n = input.num_nodes();
        let depth = self.layers.len();
        let mut d_rows = d_out.clone();
        for l in (0..depth).rev() {
            let layer = &self.layers[l];
            let r = &trace.rows[l + 1];
            let dz = relu_backward(&trace.pre[l], &d_rows);
            let x = trace.hs[l].select_rows(r);
            let (gw, rest) = grads[2 * l..].split_at_mut(1);
            Matrix::gemm_acc(true, &trace.agg[l], false, &dz, &mut gw[0]);
            Matrix::gemm_acc(true, &x, false, &dz, &mut rest[0]);
            if l == 0 {
                break;
            }
            let mut d_full = Matrix::zeros(n, dz.cols());
            let da = dz.matmul_t(&layer.w.value).expect("square layer");
            input.adjacency.scatter_transpose(&da, Some(r), &mut d_full);
            let dx = dz.matmul_t(&layer.b.value).expect("square layer");
            for (k, &i) in r.iter().enumerate() {
                for (o, v) in d_full.row_mut(i).iter_mut().zip(dx.row(k)) {
                    *o += v;
                }
            }
            d_rows = d_full.select_rows(&trace.rows[l]);
        }
    }
}

impl Parameterized for GcnEncoder {
    fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|l| [&l.w, &l.b]).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.w, &mut l.b])
            .collect()
    }

    fn param_names(&self) -> Vec<String> {
        (0..self.layers.len())
            .flat_map(|l| [format!("gcn{l}.w"), format!("gcn{l}.b")])
            .collect()
    }
}
