//! Fully connected tanh networks over a flat parameter vector.
//!
//! Parameter layout, layer by layer: the `out x in` weight matrix in
//! row-major order, then the `out` biases.

use crate::error::{check_len, Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpShape {
    widths: Vec<usize>,
}

/// Per-layer outputs of one forward pass; `layers[0]` is the input.
#[derive(Debug, Clone)]
pub struct Activations {
    pub layers: Vec<Vec<f64>>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.layers.last().expect("at least the input layer")
    }
}

impl MlpShape {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::contract(format!(
                "layer widths {widths:?} need at least two positive entries"
            )));
        }
        Ok(Self { widths })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn layer_count(&self) -> usize {
        self.widths.len() - 1
    }

    /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0.
    pub fn init_params(&self, rng: &mut Rng) -> Vec<f64> {
        let mut params = Vec::with_capacity(self.param_count());
        for w in self.widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng::uniform(rng, -bound, bound)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        params
    }

    pub fn forward(&self, params: &[f64], input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(params, input)?.layers.pop().unwrap())
    }

    pub fn forward_cached(&self, params: &[f64], input: &[f64]) -> Result<Activations> {
        check_len("network input", self.input_dim(), input.len())?;
        check_len("network parameters", self.param_count(), params.len())?;
        let mut layers = Vec::with_capacity(self.widths.len());
        layers.push(input.to_vec());
        let mut offset = 0;
        for l in 0..self.layer_count() {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let weights = &params[offset..offset + n_in * n_out];
            let biases = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let x = &layers[l];
            let mut out = biases.to_vec();
            if n_in == 1 {
                for (o, w) in out.iter_mut().zip(weights) {
                    *o += w * x[0];
                }
            } else {
                for (o, row) in out.iter_mut().zip(weights.chunks_exact(n_in)) {
                    *o += dot(row, x);
                }
            }
            if l + 1 < self.layer_count() {
                for o in &mut out {
                    *o = tanh(*o);
                }
            }
            layers.push(out);
            offset += n_in * n_out + n_out;
        }
        Ok(Activations { layers })
    }

    /// Accumulates `d(loss)/d(params)` into `grad`, given `d_out = d(loss)/d(output)`.
    pub fn backward(&self, params: &[f64], acts: &Activations, d_out: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(d_out.len(), self.output_dim());
        debug_assert_eq!(grad.len(), self.param_count());
        let mut delta = d_out.to_vec();
        let mut offset = self.param_count();
        for l in (0..self.layer_count()).rev() {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            offset -= n_in * n_out + n_out;
            let a_prev = &acts.layers[l];
            let w_off = offset;
            let b_off = offset + n_in * n_out;
            for j in 0..n_out {
                let dj = delta[j];
                if dj == 0.0 {
                    continue;
                }
                grad[b_off + j] += dj;
                let g = &mut grad[w_off + j * n_in..w_off + (j + 1) * n_in];
                for (gi, ai) in g.iter_mut().zip(a_prev) {
                    *gi += dj * ai;
                }
            }
            if l > 0 {
                let weights = &params[w_off..w_off + n_in * n_out];
                let mut prev = vec![0.0; n_in];
                for j in 0..n_out {
                    let dj = delta[j];
                    if dj == 0.0 {
                        continue;
                    }
                    for (p, w) in prev.iter_mut().zip(&weights[j * n_in..(j + 1) * n_in]) {
                        *p += w * dj;
                    }
                }
                // a_prev = tanh(z_prev)
                for (p, a) in prev.iter_mut().zip(a_prev) {
                    *p *= 1.0 - a * a;
                }
                delta = prev;
            }
        }
    }
}

/// Four independent accumulators so the reduction vectorises.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    let mut acc = [0.0; 4];
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `tanh` through `exp`, which is several times cheaper than the libm
/// routine here; relative error stays below 1e-11.
#[inline]
pub(crate) fn tanh(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 0.02 {
        let x2 = x * x;
        return x * (1.0 - x2 * (1.0 / 3.0 - x2 * (2.0 / 15.0)));
    }
    let e = (-2.0 * ax).exp();
    ((1.0 - e) / (1.0 + e)).copysign(x)
}

/// A network together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    shape: MlpShape,
    params: Vec<f64>,
}

impl Mlp {
    pub fn new(widths: Vec<usize>, rng: &mut Rng) -> Result<Self> {
        let shape = MlpShape::new(widths)?;
        let params = shape.init_params(rng);
        Ok(Self { shape, params })
    }

    pub fn from_params(widths: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        let shape = MlpShape::new(widths)?;
        check_len("network parameters", shape.param_count(), params.len())?;
        Ok(Self { shape, params })
    }

    pub fn shape(&self) -> &MlpShape {
        &self.shape
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.shape.forward(&self.params, input)
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<Activations> {
        self.shape.forward_cached(&self.params, input)
    }

    pub fn backward(&self, acts: &Activations, d_out: &[f64], grad: &mut [f64]) {
        self.shape.backward(&self.params, acts, d_out, grad)
    }

    /// Scalar output of a single-output network.
    pub fn value(&self, input: &[f64]) -> Result<f64> {
        Ok(self.forward(input)?[0])
    }
}
