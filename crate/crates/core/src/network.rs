//! Fully connected networks: specs, seeded initialization and evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{gemm_acc, Tensor};

/// Name of the initialization scheme, recorded alongside run results.
pub const INIT_SCHEME: &str = "glorot-uniform, zero bias";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: ActivationKind,
    pub has_bias: bool,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: ActivationKind, has_bias: bool) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
            has_bias,
        }
    }

    pub fn param_count(&self) -> usize {
        self.in_dim * self.out_dim + if self.has_bias { self.out_dim } else { 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = Self { layers };
        spec.validate()?;
        Ok(spec)
    }

    /// Biased MLP with the given hidden widths and an identity output layer.
    pub fn mlp(input: usize, hidden: &[usize], output: usize, activation: ActivationKind) -> Result<Self> {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        let mut layers: Vec<LayerSpec> = dims
            .windows(2)
            .map(|w| LayerSpec::new(w[0], w[1], activation, true))
            .collect();
        layers.push(LayerSpec::new(
            *dims.last().unwrap(),
            output,
            ActivationKind::Identity,
            true,
        ));
        Self::new(layers)
    }

    /// 9 → 100 → 100 → 100 → 100 → 1 with biases everywhere.
    pub fn benchmark(activation: ActivationKind) -> Self {
        Self::mlp(9, &[100; 4], 1, activation).expect("benchmark spec is valid")
    }

    /// Benchmark shape whose first layer has no bias and the given activation;
    /// the setting under which an even first activation makes the whole
    /// network even in its input.
    pub fn benchmark_unbiased_first(first: ActivationKind, rest: ActivationKind) -> Self {
        let mut spec = Self::benchmark(rest);
        spec.layers[0].activation = first;
        spec.layers[0].has_bias = false;
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Spec("network has no layers".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.in_dim == 0 || l.out_dim == 0 {
                return Err(Error::Spec(format!("layer {i} has a zero dimension")));
            }
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::Spec(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    pair[0].out_dim,
                    i + 1,
                    pair[1].in_dim
                )));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    weights: Vec<Tensor>,
    biases: Vec<Option<Tensor>>,
}

/// Tape handles for one layer's parameters.
#[derive(Debug, Clone, Copy)]
pub struct LayerVars {
    pub weight: Var,
    pub bias: Option<Var>,
}

impl Network {
    /// Glorot-uniform weights, zero biases, fully determined by `seed`.
    pub fn build(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(spec.layers.len());
        let mut biases = Vec::with_capacity(spec.layers.len());
        for l in &spec.layers {
            let limit = (6.0 / (l.in_dim + l.out_dim) as f64).sqrt();
            let data = (0..l.in_dim * l.out_dim)
                .map(|_| rng.random_range(-limit..=limit))
                .collect();
            weights.push(Tensor::new(vec![l.out_dim, l.in_dim], data)?);
            biases.push(l.has_bias.then(|| Tensor::zeros(&[l.out_dim])));
        }
        Ok(Self {
            spec,
            weights,
            biases,
        })
    }

    /// Assembles a network from explicit parameters, checking every shape.
    pub fn from_parts(spec: NetworkSpec, weights: Vec<Tensor>, biases: Vec<Option<Tensor>>) -> Result<Self> {
        spec.validate()?;
        if weights.len() != spec.layers.len() || biases.len() != spec.layers.len() {
            return Err(Error::Spec(format!(
                "{} layers but {} weight and {} bias entries",
                spec.layers.len(),
                weights.len(),
                biases.len()
            )));
        }
        for (i, (l, (w, b))) in spec.layers.iter().zip(weights.iter().zip(&biases)).enumerate() {
            if w.shape() != [l.out_dim, l.in_dim] {
                return Err(Error::Spec(format!(
                    "layer {i} weight shape {:?}, expected [{}, {}]",
                    w.shape(),
                    l.out_dim,
                    l.in_dim
                )));
            }
            match (l.has_bias, b) {
                (true, Some(b)) if b.shape() == [l.out_dim] => {}
                (false, None) => {}
                _ => return Err(Error::Spec(format!("layer {i} bias does not match its spec"))),
            }
        }
        Ok(Self {
            spec,
            weights,
            biases,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[Tensor] {
        &self.weights
    }

    pub fn biases(&self) -> &[Option<Tensor>] {
        &self.biases
    }

    pub fn weight_mut(&mut self, layer: usize) -> &mut Tensor {
        &mut self.weights[layer]
    }

    pub fn bias_mut(&mut self, layer: usize) -> Option<&mut Tensor> {
        self.biases[layer].as_mut()
    }

    pub fn num_layers(&self) -> usize {
        self.spec.layers.len()
    }

    pub fn param_count(&self) -> usize {
        self.spec.param_count()
    }

    /// Parameters in checkpoint order: per layer, weights row-major then bias.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            if let Some(b) = b {
                out.extend_from_slice(b.data());
            }
        }
        out
    }

    /// Copy of this network with layer `layer_index` using `kind`; weights untouched.
    pub fn replace_activation(&self, layer_index: usize, kind: ActivationKind) -> Result<Self> {
        if layer_index >= self.num_layers() {
            return Err(Error::Spec(format!(
                "layer index {layer_index} out of range for {} layers",
                self.num_layers()
            )));
        }
        let mut net = self.clone();
        net.spec.layers[layer_index].activation = kind;
        Ok(net)
    }

    /// Batched evaluation: `batch` is `n × input_dim`, result `n × output_dim`.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        self.check_input(batch, "forward")?;
        let mut x = batch.clone();
        for i in 0..self.spec.layers.len() {
            let act = self.spec.layers[i].activation;
            x = self.affine(i, &x)?.map(|v| act.eval(v));
        }
        Ok(x)
    }

    /// The pre-activation `x·Wᵀ + b` of every layer for `batch`.
    pub fn pre_activations(&self, batch: &Tensor) -> Result<Vec<Tensor>> {
        self.check_input(batch, "pre_activations")?;
        let mut out = Vec::with_capacity(self.spec.layers.len());
        let mut x = batch.clone();
        for i in 0..self.spec.layers.len() {
            let z = self.affine(i, &x)?;
            let act = self.spec.layers[i].activation;
            x = z.map(|v| act.eval(v));
            out.push(z);
        }
        Ok(out)
    }

    fn check_input(&self, batch: &Tensor, op: &'static str) -> Result<()> {
        let (n, d) = batch.matrix_dims(op)?;
        if d != self.spec.input_dim() {
            return Err(Error::Dimension {
                op,
                left: batch.shape().to_vec(),
                right: vec![n, self.spec.input_dim()],
            });
        }
        Ok(())
    }

    fn affine(&self, i: usize, x: &Tensor) -> Result<Tensor> {
        let l = &self.spec.layers[i];
        let n = x.rows();
        let wt = self.weights[i].transpose()?;
        let mut out = vec![0.0; n * l.out_dim];
        gemm_acc(x.data(), wt.data(), &mut out, n, l.in_dim, l.out_dim);
        if let Some(b) = &self.biases[i] {
            for row in out.chunks_exact_mut(l.out_dim) {
                for (o, &bias) in row.iter_mut().zip(b.data()) {
                    *o += bias;
                }
            }
        }
        Tensor::new(vec![n, l.out_dim], out)
    }

    /// Registers every parameter as a leaf on `tape`.
    pub fn register(&self, tape: &mut Tape) -> Vec<LayerVars> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| LayerVars {
                weight: tape.leaf(w.clone()),
                bias: b.as_ref().map(|b| tape.leaf(b.clone())),
            })
            .collect()
    }

    /// Differentiable forward pass over parameters previously [`register`]ed.
    ///
    /// [`register`]: Network::register
    pub fn forward_on_tape(&self, tape: &mut Tape, params: &[LayerVars], input: Var) -> Result<Var> {
        let d = tape.value(input).cols();
        if d != self.spec.input_dim() {
            return Err(Error::Dimension {
                op: "forward",
                left: tape.value(input).shape().to_vec(),
                right: vec![self.spec.input_dim()],
            });
        }
        let mut x = input;
        for (l, p) in self.spec.layers.iter().zip(params) {
            let wt = tape.transpose(p.weight)?;
            let mut z = tape.matmul(x, wt)?;
            if let Some(b) = p.bias {
                z = tape.add_bias(z, b)?;
            }
            x = tape.activation(z, l.activation);
        }
        Ok(x)
    }
}

/// Anything that maps `n × d` inputs to one prediction per row.
pub trait Predictor {
    fn input_dim(&self) -> usize;
    fn predict(&self, batch: &Tensor) -> Result<Vec<f64>>;
}

impl Predictor for Network {
    fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    /// First output column of [`Network::forward`].
    fn predict(&self, batch: &Tensor) -> Result<Vec<f64>> {
        let out = self.forward(batch)?;
        let c = out.cols();
        Ok(out.data().iter().step_by(c).copied().collect())
    }
}

/// Wraps a plain function of one input row as a [`Predictor`].
pub struct FnPredictor<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64> FnPredictor<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64> Predictor for FnPredictor<F> {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn predict(&self, batch: &Tensor) -> Result<Vec<f64>> {
        let (n, d) = batch.matrix_dims("predict")?;
        if d != self.dim {
            return Err(Error::Dimension {
                op: "predict",
                left: batch.shape().to_vec(),
                right: vec![n, self.dim],
            });
        }
        Ok((0..n).map(|i| (self.f)(batch.row(i))).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_param_count() {
        let spec = NetworkSpec::benchmark(ActivationKind::Relu);
        assert_eq!(spec.param_count(), 31_401);
        let net = Network::build(spec, 1).unwrap();
        assert_eq!(net.flat_params().len(), 31_401);
        assert_eq!(net.spec().layers[4].activation, ActivationKind::Identity);
    }

    #[test]
    fn build_is_seed_determined() {
        let spec = NetworkSpec::benchmark(ActivationKind::Tanh);
        let a = Network::build(spec.clone(), 42).unwrap();
        let b = Network::build(spec.clone(), 42).unwrap();
        let c = Network::build(spec, 43).unwrap();
        assert_eq!(a.flat_params(), b.flat_params());
        assert_ne!(a.flat_params(), c.flat_params());
        for (l, w) in a.spec().layers.iter().zip(a.weights()) {
            let limit = (6.0 / (l.in_dim + l.out_dim) as f64).sqrt();
            assert!(w.data().iter().all(|v| v.abs() <= limit));
        }
        assert!(a.biases().iter().flatten().all(|b| b.data().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn bad_chaining_rejected() {
        let layers = vec![
            LayerSpec::new(9, 10, ActivationKind::Relu, true),
            LayerSpec::new(11, 1, ActivationKind::Identity, true),
        ];
        assert!(matches!(NetworkSpec::new(layers), Err(Error::Spec(_))));
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let spec = NetworkSpec::new(vec![LayerSpec::new(3, 3, ActivationKind::Identity, false)]).unwrap();
        let net = Network::from_parts(spec, vec![Tensor::identity(3)], vec![None]).unwrap();
        let x = Tensor::from_rows(&[vec![1.0, -2.0, 0.5], vec![3.0, 0.0, -7.0]]).unwrap();
        assert_eq!(net.forward(&x).unwrap(), x);
    }

    #[test]
    fn zero_network_predicts_zero() {
        let spec = NetworkSpec::mlp(4, &[5, 5], 1, ActivationKind::Sigmoid).unwrap();
        let weights = spec.layers.iter().map(|l| Tensor::zeros(&[l.out_dim, l.in_dim])).collect();
        let biases = spec.layers.iter().map(|l| Some(Tensor::zeros(&[l.out_dim]))).collect();
        let mut net = Network::from_parts(spec, weights, biases).unwrap();
        // Sigmoid(0) = 0.5 feeds the next layer; zero weights still cancel it.
        let x = Tensor::filled(&[3, 4], 1.5);
        assert!(net.forward(&x).unwrap().data().iter().all(|&v| v == 0.0));
        net.bias_mut(2).unwrap().data_mut()[0] = 0.25;
        assert!(net.forward(&x).unwrap().data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let net = Network::build(NetworkSpec::benchmark(ActivationKind::Relu), 0).unwrap();
        assert!(matches!(net.forward(&Tensor::zeros(&[2, 8])), Err(Error::Dimension { .. })));
    }

    #[test]
    fn replace_activation_is_local() {
        let net = Network::build(NetworkSpec::benchmark(ActivationKind::Relu), 3).unwrap();
        let sg = net.replace_activation(0, ActivationKind::Seagull).unwrap();
        assert_eq!(sg.spec().layers[0].activation, ActivationKind::Seagull);
        for i in 1..4 {
            assert_eq!(sg.spec().layers[i].activation, ActivationKind::Relu);
        }
        assert_eq!(sg.weights(), net.weights());
        assert_eq!(sg.replace_activation(0, ActivationKind::Relu).unwrap(), net);
        assert_eq!(net.replace_activation(2, ActivationKind::Relu).unwrap(), net);
        assert!(net.replace_activation(5, ActivationKind::Relu).is_err());
    }

    #[test]
    fn tape_forward_matches_plain_forward_bitwise() {
        let net = Network::build(NetworkSpec::benchmark(ActivationKind::Softplus), 9).unwrap();
        let x = Tensor::new(vec![4, 9], (0..36).map(|i| (i as f64 * 0.37).sin() * 2.0).collect()).unwrap();
        let mut tape = Tape::new();
        let params = net.register(&mut tape);
        let input = tape.constant(x.clone());
        let out = net.forward_on_tape(&mut tape, &params, input).unwrap();
        assert_eq!(tape.value(out), &net.forward(&x).unwrap());
    }
}
