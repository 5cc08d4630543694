//! Multilayer perceptrons over the tape.
//!
//! A model owns plain tensors. Each training step watches the parameters on
//! a fresh tape (capturing vars in a fixed canonical order), runs the
//! forward, and applies SGD from the tape's gradients. Value-only forwards
//! bypass the tape entirely, which is what makes stop-gradient branches
//! structurally incapable of receiving gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::uniform;
use crate::scalar::Scalar;
use crate::tape::{add_bias_values, matmul_values, relu_values, BnState, Tape, Var};
use crate::tensor::Tensor;

/// Fully connected layer; weight is `[in, out]`, bias `[out]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Linear<S: Scalar = f64> {
    pub w: Tensor<S>,
    pub b: Tensor<S>,
}

impl<S: Scalar> Linear<S> {
    /// Uniform fan-in initialization: both weight and bias are drawn from
    /// `U[-1/sqrt(in_dim), 1/sqrt(in_dim)]`, weight row-major first.
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = S::of(1.0 / (in_dim as f64).sqrt());
        let w: Vec<S> = (0..in_dim * out_dim).map(|_| uniform(rng, -bound, bound)).collect();
        let b: Vec<S> = (0..out_dim).map(|_| uniform(rng, -bound, bound)).collect();
        Linear {
            w: Tensor::new([in_dim, out_dim], w).expect("sized above"),
            b: Tensor::new([out_dim], b).expect("sized above"),
        }
    }

    /// Square identity layer: `W = I`, `b = 0`.
    pub fn identity(dim: usize) -> Self {
        let mut w = vec![S::zero(); dim * dim];
        for i in 0..dim {
            w[i * dim + i] = S::one();
        }
        Linear {
            w: Tensor::new([dim, dim], w).expect("sized above"),
            b: Tensor::zeros([dim]),
        }
    }
}

/// Batch normalization with learnable per-feature scale and shift.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BatchNorm<S: Scalar = f64> {
    pub gamma: Tensor<S>,
    pub beta: Tensor<S>,
    pub state: BnState<S>,
}

impl<S: Scalar> BatchNorm<S> {
    pub fn new(dim: usize) -> Self {
        BatchNorm {
            gamma: Tensor::new([dim], vec![S::one(); dim]).expect("sized above"),
            beta: Tensor::zeros([dim]),
            state: BnState::new(dim),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
struct Block<S: Scalar> {
    linear: Linear<S>,
    bn: Option<BatchNorm<S>>,
    relu: bool,
}

/// Architecture of an MLP encoder: `input_dim -> hidden... -> repr_dim`,
/// optionally batch-normalized before each hidden rectifier.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub repr_dim: usize,
    pub batch_norm: bool,
}

impl EncoderSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.repr_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::param("encoder layer widths must be positive"));
        }
        Ok(())
    }
}

/// Sequential MLP. Hidden blocks are linear + optional batch norm + relu;
/// the output block is purely linear.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Mlp<S: Scalar = f64> {
    blocks: Vec<Block<S>>,
}

impl<S: Scalar> Mlp<S> {
    pub fn encoder(spec: &EncoderSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let mut blocks = Vec::new();
        let mut prev = spec.input_dim;
        for &h in &spec.hidden {
            blocks.push(Block {
                linear: Linear::init(prev, h, rng),
                bn: spec.batch_norm.then(|| BatchNorm::new(h)),
                relu: true,
            });
            prev = h;
        }
        blocks.push(Block { linear: Linear::init(prev, spec.repr_dim, rng), bn: None, relu: false });
        Ok(Mlp { blocks })
    }

    /// Single linear layer.
    pub fn linear(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        Mlp { blocks: vec![Block { linear: Linear::init(in_dim, out_dim, rng), bn: None, relu: false }] }
    }

    /// Two-layer MLP with a rectified hidden layer.
    pub fn two_layer(in_dim: usize, hidden: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        Mlp {
            blocks: vec![
                Block { linear: Linear::init(in_dim, hidden, rng), bn: None, relu: true },
                Block { linear: Linear::init(hidden, out_dim, rng), bn: None, relu: false },
            ],
        }
    }

    /// Single identity-initialized linear layer, so the map starts as the
    /// identity function.
    pub fn identity(dim: usize) -> Self {
        Mlp { blocks: vec![Block { linear: Linear::identity(dim), bn: None, relu: false }] }
    }

    pub fn in_dim(&self) -> usize {
        self.blocks[0].linear.w.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        let last = self.blocks.last().expect("an mlp has at least one block");
        last.linear.w.shape()[1]
    }

    /// Learnable parameters in canonical order: per block, weight, bias,
    /// then batch-norm gamma and beta when present. Running statistics are
    /// state, not parameters.
    pub fn params(&self) -> Vec<&Tensor<S>> {
        let mut out = Vec::new();
        for blk in &self.blocks {
            out.push(&blk.linear.w);
            out.push(&blk.linear.b);
            if let Some(bn) = &blk.bn {
                out.push(&bn.gamma);
                out.push(&bn.beta);
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        let mut out = Vec::new();
        for blk in &mut self.blocks {
            out.push(&mut blk.linear.w);
            out.push(&mut blk.linear.b);
            if let Some(bn) = &mut blk.bn {
                out.push(&mut bn.gamma);
                out.push(&mut bn.beta);
            }
        }
        out
    }

    pub fn n_params(&self) -> usize {
        self.params().len()
    }

    /// Registers every parameter on the tape, in canonical order.
    pub fn watch(&self, tape: &mut Tape<S>) -> Vec<Var> {
        self.params().into_iter().map(|p| tape.leaf(p)).collect()
    }

    /// Tape forward using previously watched parameter vars.
    ///
    /// `training` selects batch-norm mode; training mode updates the running
    /// statistics as a side effect.
    pub fn forward_tape(
        &mut self,
        tape: &mut Tape<S>,
        vars: &[Var],
        x: Var,
        training: bool,
    ) -> Result<Var> {
        if vars.len() != self.n_params() {
            return Err(Error::contract(format!(
                "expected {} watched vars, got {}",
                self.n_params(),
                vars.len()
            )));
        }
        let mut cursor = 0;
        let next = |n: &mut usize| {
            let v = vars[*n];
            *n += 1;
            v
        };
        let mut h = x;
        for blk in &mut self.blocks {
            let w = next(&mut cursor);
            let b = next(&mut cursor);
            h = tape.matmul(h, w)?;
            h = tape.add_bias(h, b)?;
            if let Some(bn) = &mut blk.bn {
                let gamma = next(&mut cursor);
                let beta = next(&mut cursor);
                h = tape.batch_norm(h, gamma, beta, &mut bn.state, training)?;
            }
            if blk.relu {
                h = tape.relu(h)?;
            }
        }
        Ok(h)
    }

    /// Value-only forward in training mode: batch statistics, running stats
    /// updated. No gradient can flow to this path.
    pub fn forward_train(&mut self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let (mut rows, _) = x.dims2()?;
        let mut data = x.data().to_vec();
        for blk in &mut self.blocks {
            let (in_d, out_d) = blk.linear.w.dims2()?;
            if data.len() / rows != in_d {
                return Err(Error::shape(
                    "mlp_forward",
                    format!("width {} does not match layer input {in_d}", data.len() / rows),
                ));
            }
            data = matmul_values(&data, (rows, in_d), blk.linear.w.data(), out_d);
            data = add_bias_values(&data, (rows, out_d), blk.linear.b.data());
            if let Some(bn) = &mut blk.bn {
                if rows < 2 {
                    return Err(Error::param("batch_norm training mode needs a batch of at least 2"));
                }
                data = bn_train_values(&data, (rows, out_d), bn)?;
            }
            if blk.relu {
                data = relu_values(&data);
            }
            rows = data.len() / out_d;
        }
        let width = self.out_dim();
        Tensor::new([rows, width], data)
    }

    /// Value-only forward in evaluation mode: running statistics, no state
    /// mutation. This is the frozen-feature path.
    pub fn forward_eval(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let (rows, _) = x.dims2()?;
        let mut data = x.data().to_vec();
        for blk in &self.blocks {
            let (in_d, out_d) = blk.linear.w.dims2()?;
            if data.len() / rows != in_d {
                return Err(Error::shape(
                    "mlp_forward",
                    format!("width {} does not match layer input {in_d}", data.len() / rows),
                ));
            }
            data = matmul_values(&data, (rows, in_d), blk.linear.w.data(), out_d);
            data = add_bias_values(&data, (rows, out_d), blk.linear.b.data());
            if let Some(bn) = &blk.bn {
                data = bn_eval_values(&data, (rows, out_d), bn);
            }
            if blk.relu {
                data = relu_values(&data);
            }
        }
        let width = self.out_dim();
        Tensor::new([rows, width], data)
    }

    /// SGD update from the tape's gradients: `p <- p - lr * (g + wd * p)`.
    /// Parameters the loss never touched decay but receive no gradient.
    pub fn sgd_step(&mut self, tape: &Tape<S>, vars: &[Var], lr: S, weight_decay: S) -> Result<()> {
        if vars.len() != self.n_params() {
            return Err(Error::contract(format!(
                "expected {} watched vars, got {}",
                self.n_params(),
                vars.len()
            )));
        }
        for (param, &var) in self.params_mut().into_iter().zip(vars) {
            let grads = tape.grad(var);
            let data = param.data_mut();
            for (i, p) in data.iter_mut().enumerate() {
                let g = grads.map_or(S::zero(), |gs| gs[i]);
                *p = *p - lr * (g + weight_decay * *p);
            }
        }
        Ok(())
    }

    /// EMA blend of learnable parameters: `self <- alpha * self +
    /// (1 - alpha) * online`. Running statistics are not blended; the owner
    /// of this network maintains them through its own forwards.
    pub fn blend_from(&mut self, online: &Mlp<S>, alpha: S) -> Result<()> {
        if !(alpha >= S::zero() && alpha <= S::one()) {
            return Err(Error::param(format!("ema rate must lie in [0, 1], got {alpha}")));
        }
        let online_params = online.params();
        let mut mine = self.params_mut();
        if online_params.len() != mine.len() {
            return Err(Error::shape("ema", "parameter lists differ in length".to_string()));
        }
        for (t, o) in mine.iter_mut().zip(online_params) {
            if t.shape() != o.shape() {
                return Err(Error::shape("ema", "parameter shapes differ".to_string()));
            }
            for (tv, &ov) in t.data_mut().iter_mut().zip(o.data()) {
                *tv = alpha * *tv + (S::one() - alpha) * ov;
            }
        }
        Ok(())
    }
}

fn bn_train_values<S: Scalar>(
    x: &[S],
    (b, d): (usize, usize),
    bn: &mut BatchNorm<S>,
) -> Result<Vec<S>> {
    let gs = bn.gamma.data();
    let bs = bn.beta.data();
    let bnf = S::of(b as f64);
    let mut out = vec![S::zero(); b * d];
    for j in 0..d {
        let mut mean = S::zero();
        for i in 0..b {
            mean = mean + x[i * d + j];
        }
        mean = mean / bnf;
        let mut var = S::zero();
        for i in 0..b {
            let diff = x[i * d + j] - mean;
            var = var + diff * diff;
        }
        var = var / bnf;
        let inv = (var + bn.state.eps).sqrt().recip();
        for i in 0..b {
            out[i * d + j] = gs[j] * ((x[i * d + j] - mean) * inv) + bs[j];
        }
        let m = bn.state.momentum;
        bn.state.running_mean[j] = m * bn.state.running_mean[j] + (S::one() - m) * mean;
        bn.state.running_var[j] = m * bn.state.running_var[j] + (S::one() - m) * var;
    }
    Ok(out)
}

fn bn_eval_values<S: Scalar>(x: &[S], (b, d): (usize, usize), bn: &BatchNorm<S>) -> Vec<S> {
    let gs = bn.gamma.data();
    let bs = bn.beta.data();
    let mut out = vec![S::zero(); b * d];
    for j in 0..d {
        let inv = (bn.state.running_var[j] + bn.state.eps).sqrt().recip();
        for i in 0..b {
            out[i * d + j] = gs[j] * ((x[i * d + j] - bn.state.running_mean[j]) * inv) + bs[j];
        }
    }
    out
}
