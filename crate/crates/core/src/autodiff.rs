//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records each primitive with its forward value. Calling
//! [`Tape::backward`] on a scalar node walks the tape in reverse and returns
//! the adjoint of every node that depends on a leaf. Nodes are appended in
//! evaluation order, so the tape is always topologically sorted.
//!
//! ```
//! use seagull::autodiff::Tape;
//! use seagull::Tensor;
//!
//! let mut tape = Tape::new();
//! let w = tape.leaf(Tensor::scalar(3.0));
//! let sq = tape.mul(w, w).unwrap();
//! let loss = tape.sum(sq);
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(w).data(), &[6.0]);
//! ```

use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    Constant,
    MatMul(Var, Var),
    Transpose(Var),
    AddBias(Var, Var),
    Activation(Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    Mse(Var, Var),
    Mae(Var, Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
    /// Local derivative saved by elementwise ops.
    saved: Option<Tensor>,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    adjoints: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Adjoint of `v`; zeros when `v` does not influence the loss.
    pub fn get(&self, v: Var) -> Tensor {
        match &self.adjoints[v.0] {
            Some(t) => t.clone(),
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }

    pub fn take(&mut self, v: Var) -> Tensor {
        self.adjoints[v.0]
            .take()
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[v.0]))
    }

    pub fn is_reachable(&self, v: Var) -> bool {
        self.adjoints[v.0].is_some()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Drops every recorded node; the allocation is kept for the next pass.
    pub fn reset(&mut self) {
        self.nodes.clear();
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// A differentiable input (a parameter).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// An input that receives no gradient (data, targets).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant, false)
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
            saved: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn grad_any(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let g = self.grad_any(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), g))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).transpose()?;
        let g = self.grad_any(&[a]);
        Ok(self.push(value, Op::Transpose(a), g))
    }

    /// Adds a length-`n` bias to every row of an `m×n` matrix.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let xv = self.value(x);
        let bv = self.value(b);
        let (_, n) = xv.matrix_dims("add_bias")?;
        if bv.shape() != [n] {
            return Err(Error::Dimension {
                op: "add_bias",
                left: xv.shape().to_vec(),
                right: bv.shape().to_vec(),
            });
        }
        let mut value = xv.clone();
        for row in value.data_mut().chunks_exact_mut(n) {
            for (o, &bias) in row.iter_mut().zip(bv.data()) {
                *o += bias;
            }
        }
        let g = self.grad_any(&[x, b]);
        Ok(self.push(value, Op::AddBias(x, b), g))
    }

    pub fn activation(&mut self, x: Var, kind: ActivationKind) -> Var {
        let g = self.grad_any(&[x]);
        let input = self.value(x);
        if !g {
            let value = input.map(|v| kind.eval(v));
            return self.push(value, Op::Activation(x), false);
        }
        let mut value = input.clone();
        let mut deriv = input.clone();
        for (v, d) in value.data_mut().iter_mut().zip(deriv.data_mut()) {
            (*v, *d) = kind.eval_deriv(*v);
        }
        let out = self.push(value, Op::Activation(x), true);
        self.nodes[out.0].saved = Some(deriv);
        out
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same("add", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let g = self.grad_any(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), g))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same("mul", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let g = self.grad_any(&[a, b]);
        Ok(self.push(value, Op::Mul(a, b), g))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).map(|x| factor * x);
        let g = self.grad_any(&[a]);
        self.push(value, Op::Scale(a, factor), g)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        let g = self.grad_any(&[a]);
        self.push(value, Op::Sum(a), g)
    }

    /// Mean squared error between two tensors with the same element count.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        let value = mse_loss(self.value(pred), self.value(target))?;
        let g = self.grad_any(&[pred, target]);
        Ok(self.push(Tensor::scalar(value), Op::Mse(pred, target), g))
    }

    /// Mean absolute error; differentiable with `sign(0) = 0`.
    pub fn mae(&mut self, pred: Var, target: Var) -> Result<Var> {
        let value = mae_metric(self.value(pred), self.value(target))?;
        let g = self.grad_any(&[pred, target]);
        Ok(self.push(Tensor::scalar(value), Op::Mae(pred, target), g))
    }

    fn check_same(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::Dimension {
                op,
                left: sa.to_vec(),
                right: sb.to_vec(),
            });
        }
        Ok(())
    }

    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let loss_value = self.value(loss);
        if loss_value.len() != 1 {
            return Err(Error::NonScalarLoss(loss_value.shape().to_vec()));
        }
        let mut adj: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        adj[loss.0] = Some(Tensor::filled(loss_value.shape(), 1.0));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = adj[i].take() else { continue };
            match node.op {
                Op::Leaf | Op::Constant => {}
                Op::MatMul(a, b) => {
                    if self.needs(a) {
                        let bt = self.value(b).transpose()?;
                        accumulate(&mut adj, a, g.matmul(&bt)?);
                    }
                    if self.needs(b) {
                        accumulate(&mut adj, b, self.value(a).t_matmul(&g)?);
                    }
                }
                Op::Transpose(a) => accumulate(&mut adj, a, g.transpose()?),
                Op::AddBias(x, b) => {
                    if self.needs(b) {
                        accumulate(&mut adj, b, g.sum_rows()?);
                    }
                    if self.needs(x) {
                        accumulate(&mut adj, x, g.clone());
                    }
                }
                Op::Activation(x) => {
                    let local = node.saved.as_ref().expect("saved on record");
                    accumulate(&mut adj, x, g.zip_map(local, |up, d| up * d));
                }
                Op::Add(a, b) => {
                    if self.needs(a) {
                        accumulate(&mut adj, a, g.clone());
                    }
                    if self.needs(b) {
                        accumulate(&mut adj, b, g.clone());
                    }
                }
                Op::Mul(a, b) => {
                    if self.needs(a) {
                        accumulate(&mut adj, a, g.zip_map(self.value(b), |u, y| u * y));
                    }
                    if self.needs(b) {
                        accumulate(&mut adj, b, g.zip_map(self.value(a), |u, x| u * x));
                    }
                }
                Op::Scale(a, factor) => accumulate(&mut adj, a, g.map(|u| u * factor)),
                Op::Sum(a) => {
                    let up = g.data()[0];
                    accumulate(&mut adj, a, Tensor::filled(self.value(a).shape(), up));
                }
                Op::Mse(p, t) => {
                    let up = g.data()[0];
                    let n = self.value(p).len() as f64;
                    let (pv, tv) = (self.value(p), self.value(t));
                    let coef = 2.0 * up / n;
                    let dp = Tensor::new(
                        pv.shape().to_vec(),
                        pv.data()
                            .iter()
                            .zip(tv.data())
                            .map(|(&a, &b)| coef * (a - b))
                            .collect(),
                    )?;
                    if self.needs(t) {
                        let dt = dp.map(|x| -x).reshape(tv.shape().to_vec())?;
                        accumulate(&mut adj, t, dt);
                    }
                    if self.needs(p) {
                        accumulate(&mut adj, p, dp);
                    }
                }
                Op::Mae(p, t) => {
                    let up = g.data()[0];
                    let n = self.value(p).len() as f64;
                    let (pv, tv) = (self.value(p), self.value(t));
                    let coef = up / n;
                    let dp = Tensor::new(
                        pv.shape().to_vec(),
                        pv.data()
                            .iter()
                            .zip(tv.data())
                            .map(|(&a, &b)| coef * signum0(a - b))
                            .collect(),
                    )?;
                    if self.needs(t) {
                        let dt = dp.map(|x| -x).reshape(tv.shape().to_vec())?;
                        accumulate(&mut adj, t, dt);
                    }
                    if self.needs(p) {
                        accumulate(&mut adj, p, dp);
                    }
                }
            }
            // Leaves keep their adjoint; intermediates are not needed after
            // propagation but are kept so callers can inspect them.
            adj[i] = Some(g);
        }

        Ok(Gradients {
            adjoints: adj,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }
}

fn accumulate(adj: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut adj[v.0] {
        Some(existing) => existing.axpy(1.0, &g),
        slot @ None => *slot = Some(g),
    }
}

fn signum0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_pair(op: &'static str, pred: &Tensor, target: &Tensor) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::Dimension {
            op,
            left: pred.shape().to_vec(),
            right: target.shape().to_vec(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty(op));
    }
    Ok(())
}

/// Mean of squared differences.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<f64> {
    check_pair("mse_loss", pred, target)?;
    let total = pred
        .data()
        .iter()
        .zip(target.data())
        .fold(0.0, |acc, (&p, &t)| acc + (p - t) * (p - t));
    Ok(total / pred.len() as f64)
}

/// Mean absolute error, `(1/n) Σ |y - ŷ|`.
pub fn mae_metric(pred: &Tensor, target: &Tensor) -> Result<f64> {
    mae_slices(pred.data(), target.data()).map_err(|e| match e {
        Error::Dimension { .. } => Error::Dimension {
            op: "mae_metric",
            left: pred.shape().to_vec(),
            right: target.shape().to_vec(),
        },
        other => other,
    })
}

pub fn mae_slices(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::Dimension {
            op: "mae_metric",
            left: vec![pred.len()],
            right: vec![target.len()],
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("mae_metric"));
    }
    let total = pred
        .iter()
        .zip(target)
        .fold(0.0, |acc, (&p, &t)| acc + (p - t).abs());
    Ok(total / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::scalar(3.0));
        let sq = tape.mul(w, w).unwrap();
        let grads = tape.backward(sq).unwrap();
        assert_eq!(grads.get(w).data(), &[6.0]);
    }

    #[test]
    fn unreachable_leaf_gets_zero() {
        let mut tape = Tape::new();
        let p = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
        let q = tape.leaf(Tensor::scalar(2.0));
        let loss = tape.scale(q, 4.0);
        let grads = tape.backward(loss).unwrap();
        assert!(!grads.is_reachable(p));
        assert_eq!(grads.get(p).data(), &[0.0, 0.0]);
        assert_eq!(grads.get(q).data(), &[4.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let p = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(tape.backward(p), Err(Error::NonScalarLoss(_))));
    }

    #[test]
    fn losses_by_hand() {
        let pred = Tensor::vector(vec![1.0, 3.0]);
        let zero = Tensor::vector(vec![0.0, 0.0]);
        assert_eq!(mse_loss(&pred, &zero).unwrap(), 5.0);
        assert_eq!(mse_loss(&pred, &pred).unwrap(), 0.0);
        let pm = Tensor::vector(vec![1.0, -1.0]);
        assert_eq!(mae_metric(&pm, &zero).unwrap(), 1.0);
        assert_eq!(mae_metric(&pm, &pm).unwrap(), 0.0);
        assert!(matches!(mae_slices(&[], &[]), Err(Error::Empty(_))));
        assert!(mse_loss(&pred, &Tensor::vector(vec![1.0])).is_err());
    }

    #[test]
    fn bias_identity_and_hand_value() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_rows(&[vec![1.0, 1.0]]).unwrap());
        let b = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
        let y = tape.add_bias(x, b).unwrap();
        assert_eq!(tape.value(y).data(), &[2.0, 3.0]);
        let z = tape.leaf(Tensor::vector(vec![0.0, 0.0]));
        let y0 = tape.add_bias(x, z).unwrap();
        assert_eq!(tape.value(y0), tape.value(x));
        let bad = tape.leaf(Tensor::vector(vec![0.0; 3]));
        assert!(tape.add_bias(x, bad).is_err());
    }

    #[test]
    fn activation_forward_and_seagull_backward() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::zeros(&[2, 3]));
        let s = tape.activation(z, ActivationKind::Seagull);
        assert!(tape.value(s).data().iter().all(|&v| v == 0.0));
        let r = tape.constant(Tensor::vector(vec![-2.0]));
        let rr = tape.activation(r, ActivationKind::Relu);
        assert_eq!(tape.value(rr).data(), &[0.0]);

        let x = tape.leaf(Tensor::scalar(1.0));
        let a = tape.activation(x, ActivationKind::Seagull);
        let grads = tape.backward(a).unwrap();
        assert_eq!(grads.get(x).data(), &[1.0]);
    }

    #[test]
    fn reset_makes_tape_reusable() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::scalar(2.0));
        let l = tape.mul(w, w).unwrap();
        let g1 = tape.backward(l).unwrap().get(w);
        tape.reset();
        assert!(tape.is_empty());
        let w = tape.leaf(Tensor::scalar(2.0));
        let l = tape.mul(w, w).unwrap();
        assert_eq!(tape.backward(l).unwrap().get(w), g1);
    }
}
