use rand::Rng;

use crate::checkpoint::{Block, LayerRecord};
use crate::error::{NnError, Result};
use crate::layers::{Cache, Layer, LayerSpec};
use crate::tensor::{Scalar, Tensor};

/// Intermediates recorded by one traced forward pass.
#[derive(Clone, Debug)]
pub struct Trace<F> {
    caches: Vec<Cache<F>>,
}

/// A feed-forward stack of layers with a fixed per-sample input shape.
#[derive(Clone, Debug)]
pub struct Network<F = f32> {
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
    layers: Vec<Layer<F>>,
    last: Option<Trace<F>>,
}

impl<F: Scalar> Network<F> {
    pub fn new<R: Rng + ?Sized>(input_shape: &[usize], specs: &[LayerSpec], rng: &mut R) -> Result<Self> {
        let layers = specs
            .iter()
            .map(|s| Layer::new(s.clone(), rng))
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(input_shape, layers)
    }

    pub fn from_layers(input_shape: &[usize], layers: Vec<Layer<F>>) -> Result<Self> {
        let mut shape = input_shape.to_vec();
        for l in &layers {
            shape = l.spec().output_shape(&shape)?;
        }
        Ok(Self {
            input_shape: input_shape.to_vec(),
            output_shape: shape,
            layers,
            last: None,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    pub fn layers(&self) -> &[Layer<F>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<F>] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().flat_map(|l| l.params()).map(|p| p.len()).sum()
    }

    fn check_input(&self, x: &Tensor<F>) -> Result<()> {
        let s = x.shape();
        if s.len() != self.input_shape.len() + 1 {
            return Err(NnError::ShapeMismatch {
                context: "network input rank".into(),
                expected: format!("[N, {:?}]", self.input_shape),
                got: s.to_vec(),
            });
        }
        for (axis, (got, want)) in s[1..].iter().zip(&self.input_shape).enumerate() {
            if got != want {
                return Err(NnError::ShapeMismatch {
                    context: format!("network input axis {}", axis + 1),
                    expected: format!("{want}"),
                    got: s.to_vec(),
                });
            }
        }
        Ok(())
    }

    /// Forward pass without recording intermediates.
    pub fn infer(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for l in &self.layers {
            cur = l.forward(&cur)?.0;
        }
        Ok(cur)
    }

    /// Forward pass returning an explicit trace for [`Network::backward_traced`].
    pub fn forward_traced(&self, x: &Tensor<F>) -> Result<(Tensor<F>, Trace<F>)> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for l in &self.layers {
            let (y, c) = l.forward(&cur)?;
            caches.push(c);
            cur = y;
        }
        Ok((cur, Trace { caches }))
    }

    /// Accumulates parameter gradients for a traced pass and returns the
    /// gradient with respect to the network input.
    pub fn backward_traced(&mut self, trace: &Trace<F>, grad_out: &Tensor<F>) -> Result<Tensor<F>> {
        if trace.caches.len() != self.layers.len() {
            return Err(NnError::InvalidSpec("trace does not belong to this network".into()));
        }
        let mut g = grad_out.clone();
        for (l, c) in self.layers.iter_mut().zip(&trace.caches).rev() {
            g = l.backward(c, &g)?;
        }
        Ok(g)
    }

    /// Forward pass that keeps its trace for a later [`Network::backward`].
    pub fn forward(&mut self, x: &Tensor<F>) -> Result<Tensor<F>> {
        let (y, t) = self.forward_traced(x)?;
        self.last = Some(t);
        Ok(y)
    }

    pub fn backward(&mut self, grad_out: &Tensor<F>) -> Result<Tensor<F>> {
        let trace = self.last.take().ok_or(NnError::BackwardBeforeForward)?;
        let g = self.backward_traced(&trace, grad_out);
        self.last = Some(trace);
        g
    }

    pub fn zero_grad(&mut self) {
        self.layers.iter_mut().for_each(|l| l.zero_grad());
    }

    /// Every parameter tensor in layer order.
    pub fn params(&self) -> Vec<&Tensor<F>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn grads(&self) -> Vec<&Tensor<F>> {
        self.layers.iter().flat_map(|l| l.grads()).collect()
    }

    /// Mutable parameters paired with their gradients, in layer order.
    pub fn params_and_grads(&mut self) -> Vec<(&mut Tensor<F>, &Tensor<F>)> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            let (p, g) = l.params_and_grads();
            out.extend(p.iter_mut().zip(g.iter()));
        }
        out
    }

    pub fn cast<G: Scalar>(&self) -> Network<G> {
        Network {
            input_shape: self.input_shape.clone(),
            output_shape: self.output_shape.clone(),
            layers: self.layers.iter().map(|l| l.cast()).collect(),
            last: None,
        }
    }

    /// Minimum absolute pre-activation over all kinked activations in a
    /// trace; useful to keep finite-difference probes away from kinks.
    pub fn min_kink_distance(&self, trace: &Trace<F>) -> f64 {
        let mut m = f64::INFINITY;
        for (l, c) in self.layers.iter().zip(&trace.caches) {
            if let (LayerSpec::Activation(a), Cache::InputOutput(x, _)) = (l.spec(), c) {
                if a.has_kink() {
                    for v in x.data() {
                        m = m.min(v.as_f64().abs());
                    }
                }
            }
        }
        m
    }
}

impl Network<f32> {
    pub fn to_block(&self, name: &str) -> Block {
        Block {
            name: name.to_string(),
            input_shape: self.input_shape.clone(),
            layers: self.layers.iter().map(LayerRecord::from_layer).collect(),
        }
    }

    pub fn from_block(block: &Block) -> Result<Self> {
        let layers = block
            .layers
            .iter()
            .map(|r| r.to_layer())
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(&block.input_shape, layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::Activation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn backward_before_forward_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Network::<f32>::new(&[2], &[LayerSpec::dense(2, 1)], &mut rng).unwrap();
        assert!(matches!(
            net.backward(&Tensor::zeros(&[1, 1])),
            Err(NnError::BackwardBeforeForward)
        ));
    }

    #[test]
    fn two_layer_matches_hand_composition() {
        // y = tanh(W1 x + b1); z = W2 y + b2 on a flattened 2x2 input.
        let w1 = vec![0.5, -0.25, 0.1, 0.2, -0.3, 0.4, 0.05, -0.6];
        let b1 = vec![0.1, -0.2];
        let w2 = vec![1.5, -0.7];
        let b2 = vec![0.3];
        let layers = vec![
            Layer::with_params(LayerSpec::Flatten, vec![]).unwrap(),
            Layer::with_params(
                LayerSpec::dense(4, 2),
                vec![Tensor::new(&[2, 4], w1.clone()).unwrap(), Tensor::new(&[2], b1.clone()).unwrap()],
            )
            .unwrap(),
            Layer::with_params(LayerSpec::Activation(Activation::Tanh), vec![]).unwrap(),
            Layer::with_params(
                LayerSpec::dense(2, 1),
                vec![Tensor::new(&[1, 2], w2.clone()).unwrap(), Tensor::new(&[1], b2.clone()).unwrap()],
            )
            .unwrap(),
        ];
        let net = Network::<f64>::from_layers(&[1, 2, 2], layers).unwrap();
        let x = [1.0, 2.0, -1.0, 0.5];
        let out = net.infer(&Tensor::new(&[1, 1, 2, 2], x.to_vec()).unwrap()).unwrap();
        let h0 = (0.5 * 1.0 - 0.25 * 2.0 + 0.1 * -1.0 + 0.2 * 0.5 + 0.1f64).tanh();
        let h1 = (-0.3 * 1.0 + 0.4 * 2.0 + 0.05 * -1.0 - 0.6 * 0.5 - 0.2f64).tanh();
        let expected = 1.5 * h0 - 0.7 * h1 + 0.3;
        assert!((out[0] - expected).abs() < 1e-6);
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let specs = [
            LayerSpec::conv(1, 4, 3, 2),
            LayerSpec::Activation(Activation::LeakyRelu),
            LayerSpec::Flatten,
            LayerSpec::dense(4 * 4 * 5, 3),
        ];
        let net = Network::<f32>::new(&[1, 8, 10], &specs, &mut rng).unwrap();
        let x = crate::init::uniform(&[2, 1, 8, 10], 1.0, &mut rng);
        assert_eq!(net.infer(&x).unwrap(), net.infer(&x).unwrap());
    }

    #[test]
    fn input_axis_diagnostics() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Network::<f32>::new(&[1, 8, 10], &[LayerSpec::conv(1, 2, 3, 1)], &mut rng).unwrap();
        let err = net.infer(&Tensor::zeros(&[1, 1, 8, 9])).unwrap_err().to_string();
        assert!(err.contains("axis 3"), "{err}");
    }
}
