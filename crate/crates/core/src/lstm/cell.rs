//! A single LSTM layer: parameters, one-step forward, and the matching
//! one-step backward used by BPTT.
//!
//! ```text
//! f_t = σ(W_fx x_t + W_fh h_{t-1} + b_f)
//! i_t = σ(W_ix x_t + W_ih h_{t-1} + b_i)
//! g_t = tanh(W_gx x_t + W_gh h_{t-1} + b_g)
//! o_t = σ(W_ox x_t + W_oh h_{t-1} + b_o)
//! c_t = f_t ⊙ c_{t-1} + i_t ⊙ g_t
//! h_t = o_t ⊙ tanh(c_t)
//! ```
//!
//! [`CellVariant::AsPrinted`] replaces the input path with the additive form
//! `i_t = σ(..) + tanh(..)`, `c_t = f_t ⊙ c_{t-1} + i_t`. It drops the
//! multiplicative input gating and exists for comparison only.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::rng::SplitMix64;
use super::LstmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellVariant {
    #[default]
    Standard,
    AsPrinted,
}

impl std::str::FromStr for CellVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(Self::Standard),
            "as_printed" => Ok(Self::AsPrinted),
            other => Err(format!(
                "unknown cell variant `{other}` (expected standard or as_printed)"
            )),
        }
    }
}

/// Weights of one gate: input projection, recurrent projection, bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub w_x: Matrix,
    pub w_h: Matrix,
    pub b: Vec<f64>,
}

impl GateParams {
    fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_x: Matrix::zeros(hidden, input),
            w_h: Matrix::zeros(hidden, hidden),
            b: vec![0.0; hidden],
        }
    }

    /// `out = W_x x + W_h h + b`
    #[inline]
    fn preactivation(&self, x: &[f64], h: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.b);
        self.w_x.mul_vec_add(x, out);
        self.w_h.mul_vec_add(h, out);
    }

    /// Accumulates parameter gradients for pre-activation gradient `da` and
    /// adds the input/recurrent gradients to `dx` and `dh_prev`.
    #[inline]
    fn backward(
        &self,
        grad: &mut GateParams,
        da: &[f64],
        x: &[f64],
        h_prev: &[f64],
        dx: &mut [f64],
        dh_prev: &mut [f64],
    ) {
        grad.w_x.add_outer(da, x);
        grad.w_h.add_outer(da, h_prev);
        for (b, d) in grad.b.iter_mut().zip(da) {
            *b += d;
        }
        self.w_x.t_mul_vec_add(da, dx);
        self.w_h.t_mul_vec_add(da, dh_prev);
    }
}

/// Parameters of one LSTM layer, one [`GateParams`] per gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayerParams {
    pub forget: GateParams,
    pub input: GateParams,
    pub candidate: GateParams,
    pub output: GateParams,
}

impl LstmLayerParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            forget: GateParams::zeros(input, hidden),
            input: GateParams::zeros(input, hidden),
            candidate: GateParams::zeros(input, hidden),
            output: GateParams::zeros(input, hidden),
        }
    }

    pub fn input_size(&self) -> usize {
        self.forget.w_x.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.forget.b.len()
    }

    pub fn gates(&self) -> [(&'static str, &GateParams); 4] {
        [
            ("f", &self.forget),
            ("i", &self.input),
            ("g", &self.candidate),
            ("o", &self.output),
        ]
    }

    /// All twelve parameter tensors in the fixed order
    /// `w_fx w_fh b_f w_ix w_ih b_i w_gx w_gh b_g w_ox w_oh b_o`.
    pub fn tensors(&self) -> [&[f64]; 12] {
        let [f, i, g, o] = [&self.forget, &self.input, &self.candidate, &self.output];
        [
            f.w_x.as_slice(),
            f.w_h.as_slice(),
            &f.b,
            i.w_x.as_slice(),
            i.w_h.as_slice(),
            &i.b,
            g.w_x.as_slice(),
            g.w_h.as_slice(),
            &g.b,
            o.w_x.as_slice(),
            o.w_h.as_slice(),
            &o.b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 12] {
        let [f, i, g, o] = [
            &mut self.forget,
            &mut self.input,
            &mut self.candidate,
            &mut self.output,
        ];
        [
            f.w_x.as_mut_slice(),
            f.w_h.as_mut_slice(),
            &mut f.b,
            i.w_x.as_mut_slice(),
            i.w_h.as_mut_slice(),
            &mut i.b,
            g.w_x.as_mut_slice(),
            g.w_h.as_mut_slice(),
            &mut g.b,
            o.w_x.as_mut_slice(),
            o.w_h.as_mut_slice(),
            &mut o.b,
        ]
    }

    /// Checks internal shape consistency.
    pub fn validate(&self) -> Result<(), String> {
        let (input, hidden) = (self.input_size(), self.hidden_size());
        if input == 0 || hidden == 0 {
            return Err("zero-sized layer".into());
        }
        for (name, g) in self.gates() {
            if g.w_x.rows() != hidden || g.w_x.cols() != input {
                return Err(format!("w_{name}x has shape {}x{}", g.w_x.rows(), g.w_x.cols()));
            }
            if g.w_h.rows() != hidden || g.w_h.cols() != hidden {
                return Err(format!("w_{name}h has shape {}x{}", g.w_h.rows(), g.w_h.cols()));
            }
            if g.b.len() != hidden {
                return Err(format!("b_{name} has length {}", g.b.len()));
            }
        }
        if self.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err("non-finite parameter".into());
        }
        Ok(())
    }
}

/// Uniform weights in `[-1/√hidden, 1/√hidden)` drawn from SplitMix64 in
/// tensor order; `b_f = 1`, other biases zero.
pub fn init_weights(input: usize, hidden: usize, seed: u64) -> LstmLayerParams {
    assert!(input >= 1 && hidden >= 1, "layer sizes must be >= 1");
    let bound = 1.0 / (hidden as f64).sqrt();
    let mut rng = SplitMix64::new(seed);
    let mut layer = LstmLayerParams::zeros(input, hidden);
    for gate in [
        &mut layer.forget,
        &mut layer.input,
        &mut layer.candidate,
        &mut layer.output,
    ] {
        for w in gate.w_x.as_mut_slice() {
            *w = rng.symmetric(bound);
        }
        for w in gate.w_h.as_mut_slice() {
            *w = rng.symmetric(bound);
        }
    }
    layer.forget.b.fill(1.0);
    layer
}

/// Hidden and cell vectors carried between time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Everything one step's backward pass needs.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub f: Vec<f64>,
    /// σ of the input-gate pre-activation.
    pub i: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Advances one time step.
pub fn cell_forward(
    params: &LstmLayerParams,
    variant: CellVariant,
    x: &[f64],
    prev: &LstmState,
) -> Result<(LstmState, StepCache), LstmError> {
    let hidden = params.hidden_size();
    if x.len() != params.input_size() || prev.h.len() != hidden || prev.c.len() != hidden {
        return Err(LstmError::ShapeMismatch(format!(
            "cell expects input {} / hidden {}, got input {} / h {} / c {}",
            params.input_size(),
            hidden,
            x.len(),
            prev.h.len(),
            prev.c.len()
        )));
    }
    let mut f = vec![0.0; hidden];
    let mut i = vec![0.0; hidden];
    let mut g = vec![0.0; hidden];
    let mut o = vec![0.0; hidden];
    params.forget.preactivation(x, &prev.h, &mut f);
    params.input.preactivation(x, &prev.h, &mut i);
    params.candidate.preactivation(x, &prev.h, &mut g);
    params.output.preactivation(x, &prev.h, &mut o);

    let mut c = vec![0.0; hidden];
    let mut h = vec![0.0; hidden];
    let mut tanh_c = vec![0.0; hidden];
    for k in 0..hidden {
        f[k] = sigmoid(f[k]);
        i[k] = sigmoid(i[k]);
        g[k] = g[k].tanh();
        o[k] = sigmoid(o[k]);
        let write = match variant {
            CellVariant::Standard => i[k] * g[k],
            CellVariant::AsPrinted => i[k] + g[k],
        };
        c[k] = f[k] * prev.c[k] + write;
        tanh_c[k] = c[k].tanh();
        h[k] = o[k] * tanh_c[k];
    }
    let cache = StepCache {
        x: x.to_vec(),
        h_prev: prev.h.clone(),
        c_prev: prev.c.clone(),
        f,
        i,
        g,
        o,
        tanh_c,
    };
    Ok((LstmState { h, c }, cache))
}

/// Scratch buffers for [`cell_backward`], sized to one layer.
#[derive(Debug, Clone)]
pub(crate) struct BackwardScratch {
    da_f: Vec<f64>,
    da_i: Vec<f64>,
    da_g: Vec<f64>,
    da_o: Vec<f64>,
}

impl BackwardScratch {
    pub(crate) fn new(hidden: usize) -> Self {
        Self {
            da_f: vec![0.0; hidden],
            da_i: vec![0.0; hidden],
            da_g: vec![0.0; hidden],
            da_o: vec![0.0; hidden],
        }
    }
}

/// Backward through one step.
///
/// `dh` is the total gradient reaching `h_t`, `dc` the gradient reaching
/// `c_t` from step `t+1`; on return `dc` holds the gradient for `c_{t-1}`.
/// Parameter gradients accumulate into `grad`; `dx` and `dh_prev` are
/// overwritten.
#[allow(clippy::too_many_arguments)]
pub(crate) fn cell_backward(
    params: &LstmLayerParams,
    variant: CellVariant,
    cache: &StepCache,
    dh: &[f64],
    dc: &mut [f64],
    grad: &mut LstmLayerParams,
    dx: &mut [f64],
    dh_prev: &mut [f64],
    scratch: &mut BackwardScratch,
) {
    let hidden = params.hidden_size();
    for k in 0..hidden {
        let (f, i, g, o, tc) = (cache.f[k], cache.i[k], cache.g[k], cache.o[k], cache.tanh_c[k]);
        scratch.da_o[k] = dh[k] * tc * o * (1.0 - o);
        let dck = dc[k] + dh[k] * o * (1.0 - tc * tc);
        scratch.da_f[k] = dck * cache.c_prev[k] * f * (1.0 - f);
        match variant {
            CellVariant::Standard => {
                scratch.da_i[k] = dck * g * i * (1.0 - i);
                scratch.da_g[k] = dck * i * (1.0 - g * g);
            }
            CellVariant::AsPrinted => {
                scratch.da_i[k] = dck * i * (1.0 - i);
                scratch.da_g[k] = dck * (1.0 - g * g);
            }
        }
        dc[k] = dck * f;
    }
    dx.fill(0.0);
    dh_prev.fill(0.0);
    let (x, hp) = (&cache.x, &cache.h_prev);
    params.forget.backward(&mut grad.forget, &scratch.da_f, x, hp, dx, dh_prev);
    params.input.backward(&mut grad.input, &scratch.da_i, x, hp, dx, dh_prev);
    params.candidate.backward(&mut grad.candidate, &scratch.da_g, x, hp, dx, dh_prev);
    params.output.backward(&mut grad.output, &scratch.da_o, x, hp, dx, dh_prev);
}
