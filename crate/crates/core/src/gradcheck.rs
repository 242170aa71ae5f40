//! Finite-difference helpers for checking tape gradients.
//!
//! The numeric side only uses [`Network::forward`] and [`mse_loss`], never
//! the tape, so it stays an independent check of [`Tape::backward`].
//!
//! [`Tape::backward`]: crate::autodiff::Tape::backward

use crate::autodiff::{mse_loss, Tape};
use crate::error::Result;
use crate::network::Network;
use crate::tensor::Tensor;

/// `(f(x+h) − f(x−h)) / 2h`
pub fn central_difference(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// `|a − b| / max(|a|, |b|, floor)`.
///
/// The floor keeps the ratio meaningful when both values are at the level of
/// the difference quotient's rounding noise.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Which parameter of a network to perturb.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRef {
    Weight { layer: usize, index: usize },
    Bias { layer: usize, index: usize },
}

/// MSE of the network's predictions against `targets` (plain forward pass).
pub fn network_mse(net: &Network, inputs: &Tensor, targets: &Tensor) -> Result<f64> {
    mse_loss(&net.forward(inputs)?, targets)
}

/// Central difference of [`network_mse`] with respect to one parameter.
pub fn numeric_param_grad(net: &Network, param: ParamRef, inputs: &Tensor, targets: &Tensor, h: f64) -> Result<f64> {
    let mut probe = net.clone();
    let original = *param_mut(&mut probe, param);
    *param_mut(&mut probe, param) = original + h;
    let plus = network_mse(&probe, inputs, targets)?;
    *param_mut(&mut probe, param) = original - h;
    let minus = network_mse(&probe, inputs, targets)?;
    Ok((plus - minus) / (2.0 * h))
}

/// For every pre-activation feeding a non-differentiable point, which side
/// of each kink it lies on.
pub fn kink_pattern(net: &Network, inputs: &Tensor) -> Result<Vec<bool>> {
    let mut pattern = Vec::new();
    for (layer, z) in net.spec().layers.iter().zip(net.pre_activations(inputs)?) {
        for &k in layer.activation.kinks() {
            pattern.extend(z.data().iter().map(|&v| v >= k));
        }
    }
    Ok(pattern)
}

/// True when moving `param` by ±h changes [`kink_pattern`], so a central
/// difference straddles a point where the loss is not differentiable.
pub fn straddles_kink(net: &Network, param: ParamRef, inputs: &Tensor, h: f64) -> Result<bool> {
    let mut probe = net.clone();
    let original = *param_mut(&mut probe, param);
    *param_mut(&mut probe, param) = original + h;
    let plus = kink_pattern(&probe, inputs)?;
    *param_mut(&mut probe, param) = original - h;
    Ok(plus != kink_pattern(&probe, inputs)?)
}

fn param_mut(net: &mut Network, param: ParamRef) -> &mut f64 {
    match param {
        ParamRef::Weight { layer, index } => &mut net.weight_mut(layer).data_mut()[index],
        ParamRef::Bias { layer, index } => &mut net.bias_mut(layer).expect("layer has a bias").data_mut()[index],
    }
}

/// Tape gradients of the MSE loss: per layer, `(dW, Some(db))`.
pub fn analytic_param_grads(net: &Network, inputs: &Tensor, targets: &Tensor) -> Result<Vec<(Tensor, Option<Tensor>)>> {
    let mut tape = Tape::new();
    let params = net.register(&mut tape);
    let x = tape.constant(inputs.clone());
    let y = tape.constant(targets.clone());
    let pred = net.forward_on_tape(&mut tape, &params, x)?;
    let loss = tape.mse(pred, y)?;
    let mut grads = tape.backward(loss)?;
    Ok(params
        .iter()
        .map(|p| (grads.take(p.weight), p.bias.map(|b| grads.take(b))))
        .collect())
}
