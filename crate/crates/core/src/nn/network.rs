use rand::Rng;

use super::{LayerSpec, NnError, Tensor};

/// A sequential stack of layers over a fixed input shape, with all
/// parameters in one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<LayerSpec>,
    input_shape: Vec<usize>,
    /// Output shape after each layer.
    shapes: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

/// Activations recorded by a forward pass; `acts[0]` is the input.
#[derive(Debug, Clone)]
pub struct Trace {
    acts: Vec<Tensor>,
}

impl Trace {
    pub fn output(&self) -> &Tensor {
        self.acts.last().expect("trace holds at least the input")
    }

    pub fn into_output(mut self) -> Tensor {
        self.acts.pop().expect("trace holds at least the input")
    }
}

impl Network {
    /// Zero-initialized network.
    pub fn new(layers: Vec<LayerSpec>, input_shape: &[usize]) -> Result<Self, NnError> {
        let mut shapes = Vec::with_capacity(layers.len());
        let mut offsets = Vec::with_capacity(layers.len() + 1);
        let mut current = input_shape.to_vec();
        let mut total = 0;
        for layer in &layers {
            current = layer.output_shape(&current)?;
            shapes.push(current.clone());
            offsets.push(total);
            total += layer.param_count();
        }
        offsets.push(total);
        Ok(Self {
            layers,
            input_shape: input_shape.to_vec(),
            shapes,
            offsets,
            params: vec![0.0; total],
        })
    }

    pub fn initialized<R: Rng + ?Sized>(layers: Vec<LayerSpec>, input_shape: &[usize], rng: &mut R) -> Result<Self, NnError> {
        let mut net = Self::new(layers, input_shape)?;
        let params: Vec<f64> = net.layers.iter().flat_map(|l| l.init_params(rng)).collect();
        net.params = params;
        Ok(net)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().map(Vec::as_slice).unwrap_or(&self.input_shape)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<(), NnError> {
        if params.len() != self.params.len() {
            return Err(NnError::ParamCount {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        self.params = params;
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn layer_params(&self, i: usize) -> &[f64] {
        &self.params[self.offsets[i]..self.offsets[i + 1]]
    }

    fn check_input(&self, input: &Tensor) -> Result<(), NnError> {
        if input.shape() != self.input_shape.as_slice() {
            return Err(NnError::Shape {
                layer: "network input".into(),
                expected: format!("{:?}", self.input_shape),
                got: input.shape().to_vec(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor, NnError> {
        self.check_input(input)?;
        let mut x = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(self.layer_params(i), &x, &self.shapes[i]);
        }
        Ok(x)
    }

    pub fn forward_traced(&self, input: &Tensor) -> Result<Trace, NnError> {
        self.check_input(input)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.clone());
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer.forward(self.layer_params(i), &acts[i], &self.shapes[i]);
            acts.push(next);
        }
        Ok(Trace { acts })
    }

    /// Backpropagates `grad_out` through a traced pass, accumulating into
    /// `param_grad` (same layout as [`Network::params`]). Returns the input gradient.
    pub fn backward(&self, trace: &Trace, grad_out: Tensor, param_grad: &mut [f64]) -> Tensor {
        debug_assert_eq!(param_grad.len(), self.params.len());
        let mut g = grad_out;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let pg = &mut param_grad[self.offsets[i]..self.offsets[i + 1]];
            g = layer.backward(self.layer_params(i), &trace.acts[i], &trace.acts[i + 1], &g, pg);
        }
        g
    }
}
