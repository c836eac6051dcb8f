use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gradcheck::ParamVector;
use crate::error::{ensure_dim, ensure_finite, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed in terms of the activation output `y`.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "identity" | "linear" => Ok(Activation::Identity),
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::Parse(format!("unknown activation `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }
}

/// Weights and biases of a feed-forward network.
///
/// `sizes = [in, h1, ..., out]`. Hidden layers use `hidden`, the last layer
/// uses `output`. The same type doubles as a gradient buffer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    sizes: Vec<usize>,
    hidden: Activation,
    output: Activation,
    data: Vec<f64>,
}

/// Post-activation values of every layer, input included.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache holds at least the input")
    }
}

/// Number of parameters for a layer-size list.
pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl MlpParams {
    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidConfig(
                "a network needs at least an input and an output size".into(),
            ));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidConfig("layer sizes must be positive".into()));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            hidden,
            output,
            data: vec![0.0; param_count(sizes)],
        })
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut params = Self::zeros(sizes, hidden, output)?;
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for x in &mut params.data[offset..offset + fan_in * fan_out] {
                *x = rng.random_range(-bound..bound);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(params)
    }

    /// A gradient buffer with the same shape, filled with zeros.
    pub fn zeros_like(&self) -> Self {
        Self {
            sizes: self.sizes.clone(),
            hidden: self.hidden,
            output: self.output,
            data: vec![0.0; self.data.len()],
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.sizes == other.sizes
    }

    /// Multiply the last layer's weights and bias by `factor`.
    pub fn scale_output_layer(&mut self, factor: f64) {
        let n = self.sizes.len();
        let (fan_in, fan_out) = (self.sizes[n - 2], self.sizes[n - 1]);
        let start = self.data.len() - (fan_in * fan_out + fan_out);
        for x in &mut self.data[start..] {
            *x *= factor;
        }
    }

    fn activation_for(&self, layer: usize) -> Activation {
        if layer + 2 == self.sizes.len() {
            self.output
        } else {
            self.hidden
        }
    }

    /// Network output for one input.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        ensure_dim("mlp input", self.input_dim(), input.len())?;
        ensure_finite("mlp input", input)?;
        let mut current = input.to_vec();
        let mut offset = 0;
        for layer in 0..self.sizes.len() - 1 {
            current = self.layer_forward(layer, &mut offset, &current);
        }
        ensure_finite("mlp output", &current)?;
        Ok(current)
    }

    /// Forward pass keeping every layer's activations for [`Self::backward`].
    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache> {
        ensure_dim("mlp input", self.input_dim(), input.len())?;
        ensure_finite("mlp input", input)?;
        let mut activations = Vec::with_capacity(self.sizes.len());
        activations.push(input.to_vec());
        let mut offset = 0;
        for layer in 0..self.sizes.len() - 1 {
            let next = self.layer_forward(layer, &mut offset, activations.last().unwrap());
            activations.push(next);
        }
        ensure_finite("mlp output", activations.last().unwrap())?;
        Ok(ForwardCache { activations })
    }

    #[inline]
    fn layer_forward(&self, layer: usize, offset: &mut usize, x: &[f64]) -> Vec<f64> {
        let (fan_in, fan_out) = (self.sizes[layer], self.sizes[layer + 1]);
        let weights = &self.data[*offset..*offset + fan_in * fan_out];
        let bias = &self.data[*offset + fan_in * fan_out..*offset + fan_in * fan_out + fan_out];
        *offset += fan_in * fan_out + fan_out;
        let act = self.activation_for(layer);
        weights
            .chunks_exact(fan_in)
            .zip(bias)
            .map(|(row, b)| act.apply(b + dot(row, x)))
            .collect()
    }

    /// Accumulate `d loss / d params` into `grad` given `d loss / d output`.
    /// Returns `d loss / d input`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        d_output: &[f64],
        grad: &mut MlpParams,
    ) -> Result<Vec<f64>> {
        ensure_dim("mlp output gradient", self.output_dim(), d_output.len())?;
        if !self.same_shape(grad) {
            return Err(Error::DimensionMismatch {
                context: "gradient buffer",
                expected: self.data.len(),
                got: grad.data.len(),
            });
        }
        let n_layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut acc = 0;
        for w in self.sizes.windows(2) {
            offsets.push(acc);
            acc += w[0] * w[1] + w[1];
        }

        let mut delta = d_output.to_vec();
        for layer in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.sizes[layer], self.sizes[layer + 1]);
            let act = self.activation_for(layer);
            let out = &cache.activations[layer + 1];
            for (d, y) in delta.iter_mut().zip(out) {
                *d *= act.derivative_from_output(*y);
            }
            let input = &cache.activations[layer];
            let off = offsets[layer];
            let (gw, gb) = grad.data[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
            for ((row, gbias), d) in gw.chunks_exact_mut(fan_in).zip(gb.iter_mut()).zip(&delta) {
                *gbias += d;
                if *d != 0.0 {
                    for (g, x) in row.iter_mut().zip(input) {
                        *g += d * x;
                    }
                }
            }
            let weights = &self.data[off..off + fan_in * fan_out];
            let mut prev = vec![0.0; fan_in];
            for (row, d) in weights.chunks_exact(fan_in).zip(&delta) {
                if *d != 0.0 {
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
            }
            delta = prev;
        }
        ensure_finite("mlp gradient", &grad.data)?;
        Ok(delta)
    }

    /// Add `scale * other` in place. Shapes must agree.
    pub fn add_scaled(&mut self, other: &MlpParams, scale: f64) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::DimensionMismatch {
                context: "mlp add",
                expected: self.data.len(),
                got: other.data.len(),
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for x in &mut self.data {
            *x *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Rebuild from a layer-size list and a flat buffer (checkpoint loading).
    pub fn from_parts(
        sizes: Vec<usize>,
        hidden: Activation,
        output: Activation,
        data: Vec<f64>,
    ) -> Result<Self> {
        let expected = param_count(&sizes);
        ensure_dim("mlp parameter buffer", expected, data.len())?;
        ensure_finite("mlp parameters", &data)?;
        let mut params = Self::zeros(&sizes, hidden, output)?;
        params.data = data;
        Ok(params)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ParamVector for MlpParams {
    fn param_count(&self) -> usize {
        self.data.len()
    }

    fn param(&self, i: usize) -> f64 {
        self.data[i]
    }

    fn set_param(&mut self, i: usize, value: f64) {
        self.data[i] = value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = MlpParams::zeros(&[3, 5, 2], Activation::Tanh, Activation::Identity).unwrap();
        assert_eq!(net.forward(&[0.3, -2.0, 7.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = MlpParams::from_parts(
            vec![2, 2],
            Activation::Tanh,
            Activation::Identity,
            vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        )
        .unwrap();
        assert_eq!(net.forward(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn seeded_221_matches_hand_rolled_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut net = MlpParams::init(&[2, 2, 1], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        // give the biases non-zero values so they are exercised too
        let p = net.as_mut_slice();
        p[4] = 0.1;
        p[5] = -0.2;
        p[8] = 0.05;
        let p = net.as_slice().to_vec();
        let x = [0.5, -0.5];
        // layout: W1 (2x2) b1 (2) W2 (1x2) b2 (1)
        let h0 = (p[0] * x[0] + p[1] * x[1] + p[4]).tanh();
        let h1 = (p[2] * x[0] + p[3] * x[1] + p[5]).tanh();
        let expected = p[6] * h0 + p[7] * h1 + p[8];
        let got = net.forward(&x).unwrap();
        assert!((got[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn parameter_count_depends_only_on_sizes() {
        assert_eq!(param_count(&[4, 8, 3]), 4 * 8 + 8 + 8 * 3 + 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = MlpParams::init(&[4, 8, 3], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        assert_eq!(a.as_slice().len(), param_count(&[4, 8, 3]));
    }

    #[test]
    fn rejects_bad_input() {
        let net = MlpParams::zeros(&[2, 1], Activation::Tanh, Activation::Identity).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(net.forward(&[1.0, f64::NAN]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = MlpParams::init(&[5, 16, 16, 4], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let x = [0.1, -0.4, 2.0, 0.0, 1.5];
        let a = net.forward(&x).unwrap();
        let b = net.forward(&x).unwrap();
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
        assert_eq!(net.forward_cached(&x).unwrap().output(), a.as_slice());
    }

    #[test]
    fn linear_scalar_gradient_is_input() {
        // loss = w * x, so dL/dw = x and dL/db = 1
        let net = MlpParams::from_parts(vec![1, 1], Activation::Tanh, Activation::Identity, vec![0.7, 0.0]).unwrap();
        let cache = net.forward_cached(&[3.0]).unwrap();
        let mut g = net.zeros_like();
        net.backward(&cache, &[1.0], &mut g).unwrap();
        assert_eq!(g.as_slice(), &[3.0, 1.0]);
    }
}
