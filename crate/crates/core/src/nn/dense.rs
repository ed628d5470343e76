//! Fully connected networks with tanh hidden layers and a linear output.
//!
//! Parameters live in one flat buffer. Layer `k` stores its weight matrix
//! row-major as `fan_in x fan_out`, followed by `fan_out` biases, so a batch
//! forward pass is `Y = X W + b`.

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::NnError;

static GENERATION: AtomicU64 = AtomicU64::new(1);

fn next_generation() -> u64 {
    GENERATION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug)]
pub struct DenseNet {
    sizes: Vec<usize>,
    params: Vec<f64>,
    generation: u64,
}

impl Clone for DenseNet {
    fn clone(&self) -> Self {
        DenseNet {
            sizes: self.sizes.clone(),
            params: self.params.clone(),
            generation: self.generation,
        }
    }
}

impl PartialEq for DenseNet {
    fn eq(&self, other: &Self) -> bool {
        self.sizes == other.sizes && self.params == other.params
    }
}

/// Activations saved by [`DenseNet::forward`] for the matching backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    generation: u64,
    /// Input to every layer: the batch itself, then each hidden tanh output.
    inputs: Vec<Array2<f64>>,
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

impl DenseNet {
    /// All-zero network.
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "a network needs input and output sizes");
        assert!(sizes.iter().all(|&s| s > 0), "layer sizes must be positive");
        DenseNet {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
            generation: next_generation(),
        }
    }

    /// Scaled-uniform initialization: weights of hidden layers drawn from
    /// `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`, the output layer
    /// shrunk by `output_gain`, biases zero.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], output_gain: f64, rng: &mut R) -> Self {
        let mut net = DenseNet::zeros(sizes);
        let layers = net.num_layers();
        let mut offset = 0;
        for k in 0..layers {
            let (fan_in, fan_out) = (sizes[k], sizes[k + 1]);
            let mut bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            if k + 1 == layers {
                bound *= output_gain;
            }
            for w in &mut net.params[offset..offset + fan_in * fan_out] {
                *w = rng.random_range(-bound..=bound);
            }
            offset += (fan_in + 1) * fan_out;
        }
        net
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self, NnError> {
        let expected = param_count(sizes);
        if params.len() != expected {
            return Err(NnError::Dimension {
                what: "parameter vector",
                expected,
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(NnError::NonFinite("parameters".into()));
        }
        let mut net = DenseNet::zeros(sizes);
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access. Invalidates outstanding forward caches.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.generation = next_generation();
        &mut self.params
    }

    fn layer(&self, k: usize) -> (ArrayView2<'_, f64>, &[f64]) {
        let offset = self.layer_offset(k);
        let (fan_in, fan_out) = (self.sizes[k], self.sizes[k + 1]);
        let w = ArrayView2::from_shape((fan_in, fan_out), &self.params[offset..offset + fan_in * fan_out])
            .expect("layer shape");
        let b = &self.params[offset + fan_in * fan_out..offset + (fan_in + 1) * fan_out];
        (w, b)
    }

    fn layer_offset(&self, k: usize) -> usize {
        self.sizes[..=k].windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    /// Batch forward pass; rows of `input` are samples.
    pub fn forward(&self, input: ArrayView2<'_, f64>) -> Result<(Array2<f64>, ForwardCache), NnError> {
        if input.ncols() != self.input_size() {
            return Err(NnError::Dimension {
                what: "network input",
                expected: self.input_size(),
                got: input.ncols(),
            });
        }
        let layers = self.num_layers();
        let mut inputs = Vec::with_capacity(layers);
        let mut x = input.to_owned();
        for k in 0..layers {
            let (w, b) = self.layer(k);
            let mut z = Array2::<f64>::zeros((x.nrows(), w.ncols()));
            general_mat_mul(1.0, &x, &w, 0.0, &mut z);
            let b = ndarray::ArrayView1::from(b);
            z += &b;
            if k + 1 < layers {
                z.mapv_inplace(f64::tanh);
            }
            inputs.push(x);
            x = z;
        }
        Ok((
            x,
            ForwardCache {
                generation: self.generation,
                inputs,
            },
        ))
    }

    /// Forward pass without keeping a cache.
    pub fn predict(&self, input: ArrayView2<'_, f64>) -> Result<Array2<f64>, NnError> {
        self.forward(input).map(|(y, _)| y)
    }

    pub fn forward_one(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        Ok(self.predict(x)?.into_raw_vec_and_offset().0)
    }

    /// Reverse-mode gradients of `sum(grad_output * output)` with respect to
    /// every parameter, in the flat parameter layout.
    pub fn backward(&self, cache: &ForwardCache, grad_output: ArrayView2<'_, f64>) -> Result<Vec<f64>, NnError> {
        if cache.generation != self.generation || cache.inputs.len() != self.num_layers() {
            return Err(NnError::StaleCache);
        }
        let batch = cache.inputs[0].nrows();
        if grad_output.dim() != (batch, self.output_size()) {
            return Err(NnError::Dimension {
                what: "output gradient",
                expected: batch * self.output_size(),
                got: grad_output.len(),
            });
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = grad_output.to_owned();
        for k in (0..self.num_layers()).rev() {
            let a = &cache.inputs[k];
            let (fan_in, fan_out) = (self.sizes[k], self.sizes[k + 1]);
            let offset = self.layer_offset(k);
            {
                let (gw, gb) = grads[offset..offset + (fan_in + 1) * fan_out].split_at_mut(fan_in * fan_out);
                let mut gw = ndarray::ArrayViewMut2::from_shape((fan_in, fan_out), gw).expect("layer shape");
                general_mat_mul(1.0, &a.t(), &delta, 0.0, &mut gw);
                let colsum: Array1<f64> = delta.sum_axis(Axis(0));
                gb.copy_from_slice(colsum.as_slice().expect("contiguous"));
            }
            if k > 0 {
                let (w, _) = self.layer(k);
                let mut prev = Array2::<f64>::zeros((batch, fan_in));
                general_mat_mul(1.0, &delta, &w.t(), 0.0, &mut prev);
                // a = tanh(z) for hidden layers
                prev.zip_mut_with(a, |d, &h| *d *= 1.0 - h * h);
                delta = prev;
            }
        }
        Ok(grads)
    }

    /// `self <- tau * live + (1 - tau) * self`, elementwise.
    pub fn soft_update_from(&mut self, live: &DenseNet, tau: f64) -> Result<(), NnError> {
        soft_update(live.params(), self.params_mut(), tau)
    }
}

/// Elementwise `target <- tau * live + (1 - tau) * target`.
pub fn soft_update(live: &[f64], target: &mut [f64], tau: f64) -> Result<(), NnError> {
    if live.len() != target.len() {
        return Err(NnError::Dimension {
            what: "soft update target",
            expected: live.len(),
            got: target.len(),
        });
    }
    for (t, &l) in target.iter_mut().zip(live) {
        *t = tau * l + (1.0 - tau) * *t;
    }
    Ok(())
}
