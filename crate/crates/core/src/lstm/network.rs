//! Stacked LSTM layers with a linear head on the last hidden state.

use serde::{Deserialize, Serialize};

use super::cell::{
    cell_backward, cell_forward, init_weights, BackwardScratch, CellVariant, LstmLayerParams,
    LstmState, StepCache,
};
use super::matrix::dot;
use super::rng::SplitMix64;
use super::LstmError;

/// Dense map from the top layer's final `h` to one scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseHead {
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmNetwork {
    pub cell_variant: CellVariant,
    pub layers: Vec<LstmLayerParams>,
    pub head: DenseHead,
}

/// Gradients with the same shapes as an [`LstmNetwork`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LstmLayerParams>,
    pub head: DenseHead,
}

/// Per-layer, per-step activations from [`LstmNetwork::forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub steps: Vec<Vec<StepCache>>,
}

impl ForwardCache {
    fn last_h(&self) -> Vec<f64> {
        let top = self.steps.last().expect("at least one layer");
        let last = top.last().expect("at least one step");
        last.o.iter().zip(&last.tanh_c).map(|(o, t)| o * t).collect()
    }
}

impl LstmNetwork {
    /// Seeds one SplitMix64 stream with `seed` and draws from it a seed per
    /// layer (bottom to top) and then one for the head.
    pub fn init(input_size: usize, hidden_sizes: &[usize], variant: CellVariant, seed: u64) -> Self {
        assert!(!hidden_sizes.is_empty(), "need at least one layer");
        let mut seeds = SplitMix64::new(seed);
        let mut layers = Vec::with_capacity(hidden_sizes.len());
        let mut input = input_size;
        for &hidden in hidden_sizes {
            layers.push(init_weights(input, hidden, seeds.next_u64()));
            input = hidden;
        }
        let mut head_rng = SplitMix64::new(seeds.next_u64());
        let bound = 1.0 / (input as f64).sqrt();
        let head = DenseHead {
            weights: (0..input).map(|_| head_rng.symmetric(bound)).collect(),
            bias: 0.0,
        };
        Self {
            cell_variant: variant,
            layers,
            head,
        }
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(LstmLayerParams::hidden_size).collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.tensors().map(<[f64]>::len))
            .sum::<usize>()
            + self.head.weights.len()
            + 1
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.layers.is_empty() {
            return Err("network has no layers".into());
        }
        let mut input = self.input_size();
        for (k, layer) in self.layers.iter().enumerate() {
            layer.validate().map_err(|e| format!("layers[{k}]: {e}"))?;
            if layer.input_size() != input {
                return Err(format!(
                    "layers[{k}]: input size {} does not match {input}",
                    layer.input_size()
                ));
            }
            input = layer.hidden_size();
        }
        if self.head.weights.len() != input {
            return Err(format!(
                "head: {} weights for hidden size {input}",
                self.head.weights.len()
            ));
        }
        if !self.head.bias.is_finite() || self.head.weights.iter().any(|w| !w.is_finite()) {
            return Err("head: non-finite parameter".into());
        }
        Ok(())
    }

    /// Runs every layer over the window (`steps` rows of `input_size`) and
    /// returns the head output with the activations needed for backward.
    pub fn forward(&self, window: &[f64], steps: usize) -> Result<(f64, ForwardCache), LstmError> {
        let input = self.input_size();
        if steps == 0 || window.len() != steps * input {
            return Err(LstmError::ShapeMismatch(format!(
                "window of {} values is not {steps} steps x {input} features",
                window.len()
            )));
        }
        if window.iter().any(|v| !v.is_finite()) {
            return Err(LstmError::NonFiniteInput);
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut seq: Vec<Vec<f64>> = window.chunks_exact(input).map(<[f64]>::to_vec).collect();
        for layer in &self.layers {
            let mut state = LstmState::zeros(layer.hidden_size());
            let mut layer_caches = Vec::with_capacity(steps);
            let mut outputs = Vec::with_capacity(steps);
            for x in &seq {
                let (next, cache) = cell_forward(layer, self.cell_variant, x, &state)?;
                outputs.push(next.h.clone());
                layer_caches.push(cache);
                state = next;
            }
            caches.push(layer_caches);
            seq = outputs;
        }
        let h_last = seq.last().expect("steps > 0");
        let prediction = dot(&self.head.weights, h_last) + self.head.bias;
        Ok((prediction, ForwardCache { steps: caches }))
    }

    pub fn predict(&self, window: &[f64], steps: usize) -> Result<f64, LstmError> {
        self.forward(window, steps).map(|(p, _)| p)
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| LstmLayerParams::zeros(l.input_size(), l.hidden_size()))
                .collect(),
            head: DenseHead {
                weights: vec![0.0; self.head.weights.len()],
                bias: 0.0,
            },
        }
    }

    /// Reverse-mode gradients of `d_prediction * prediction` with respect to
    /// every parameter, accumulated into `grad`.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        d_prediction: f64,
        grad: &mut Gradients,
    ) -> Result<(), LstmError> {
        self.check_cache(cache)?;
        let h_last = cache.last_h();
        for (g, h) in grad.head.weights.iter_mut().zip(&h_last) {
            *g += d_prediction * h;
        }
        grad.head.bias += d_prediction;

        let steps = cache.steps[0].len();
        let top_hidden = self.head.weights.len();
        // Gradient arriving at each step's h from above (the head or the next layer).
        let mut dh_from_above = vec![vec![0.0; top_hidden]; steps];
        for (d, w) in dh_from_above[steps - 1].iter_mut().zip(&self.head.weights) {
            *d = d_prediction * w;
        }

        for (k, layer) in self.layers.iter().enumerate().rev() {
            let hidden = layer.hidden_size();
            let mut dh_next = vec![0.0; hidden];
            let mut dc = vec![0.0; hidden];
            let mut dh = vec![0.0; hidden];
            let mut dx_seq = vec![vec![0.0; layer.input_size()]; steps];
            let mut scratch = BackwardScratch::new(hidden);
            for t in (0..steps).rev() {
                for ((d, a), n) in dh.iter_mut().zip(&dh_from_above[t]).zip(&dh_next) {
                    *d = a + n;
                }
                cell_backward(
                    layer,
                    self.cell_variant,
                    &cache.steps[k][t],
                    &dh,
                    &mut dc,
                    &mut grad.layers[k],
                    &mut dx_seq[t],
                    &mut dh_next,
                    &mut scratch,
                );
            }
            dh_from_above = dx_seq;
        }
        Ok(())
    }

    /// Fresh gradient set for one prediction; see [`backward_into`](Self::backward_into).
    pub fn backward(&self, cache: &ForwardCache, d_prediction: f64) -> Result<Gradients, LstmError> {
        let mut grad = self.zero_gradients();
        self.backward_into(cache, d_prediction, &mut grad)?;
        Ok(grad)
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<(), LstmError> {
        if cache.steps.len() != self.layers.len() || cache.steps[0].is_empty() {
            return Err(LstmError::CacheMismatch(format!(
                "cache has {} layers, network {}",
                cache.steps.len(),
                self.layers.len()
            )));
        }
        let steps = cache.steps[0].len();
        for (k, (layer, lc)) in self.layers.iter().zip(&cache.steps).enumerate() {
            if lc.len() != steps
                || lc.iter().any(|s| {
                    s.x.len() != layer.input_size() || s.f.len() != layer.hidden_size()
                })
            {
                return Err(LstmError::CacheMismatch(format!("layer {k} shapes differ")));
            }
        }
        Ok(())
    }

    /// Parameter tensors in a fixed order: each layer's twelve tensors bottom
    /// to top, then head weights, then head bias.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            out.extend(l.tensors_mut());
        }
        out.push(&mut self.head.weights);
        out.push(std::slice::from_mut(&mut self.head.bias));
        out
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            out.extend(l.tensors());
        }
        out.push(&self.head.weights);
        out.push(std::slice::from_ref(&self.head.bias));
        out
    }
}

impl Gradients {
    /// Same order as [`LstmNetwork::tensors`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            out.extend(l.tensors());
        }
        out.push(&self.head.weights);
        out.push(std::slice::from_ref(&self.head.bias));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            out.extend(l.tensors_mut());
        }
        out.push(&mut self.head.weights);
        out.push(std::slice::from_mut(&mut self.head.bias));
        out
    }

    /// `self += other`, element by element in tensor order.
    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            for x in t {
                *x *= k;
            }
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}
