//! Empirical symmetry gaps of a model over the `(u, v, w)` input layout, and
//! the exact two-layer network computing `sin(x·y)`.

use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::datagen::{points_to_tensor, Domain, Point9};
use crate::error::{Error, Result};
use crate::network::{LayerSpec, Network, NetworkSpec, Predictor};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    pub mean: f64,
    pub max: f64,
}

impl GapStats {
    fn between(a: &[f64], b: &[f64]) -> Self {
        let mut sum = 0.0;
        let mut max = 0.0f64;
        for (x, y) in a.iter().zip(b) {
            let d = (x - y).abs();
            sum += d;
            max = max.max(d);
        }
        Self {
            mean: sum / a.len() as f64,
            max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub n_samples: usize,
    /// `|f̂(u,v,w) − f̂(v,u,w)|`
    pub exchange_gap: GapStats,
    /// `|f̂(u,v,w) − f̂(m,m,w)|` with `m = (u+v)/2`
    pub trivial_gap: GapStats,
    /// `|f̂(x) − f̂(−x)|`
    pub evenness_gap: GapStats,
    pub seed: u64,
    pub domain: Domain,
}

/// Samples `n` points from `domain` and measures the three gaps of `model`.
pub fn measure_symmetry<P: Predictor + ?Sized>(model: &P, n: usize, seed: u64, domain: Domain) -> Result<SymmetryReport> {
    if model.input_dim() != 9 {
        return Err(Error::Dimension {
            op: "measure_symmetry",
            left: vec![model.input_dim()],
            right: vec![9],
        });
    }
    let points = domain.sample(n, seed)?;
    let eval = |pts: &[Point9]| -> Result<Vec<f64>> { model.predict(&points_to_tensor(pts)?) };
    let base = eval(&points)?;
    let swapped = eval(&points.iter().map(Point9::swap_uv).collect::<Vec<_>>())?;
    let averaged = eval(&points.iter().map(Point9::average_uv).collect::<Vec<_>>())?;
    let negated = eval(&points.iter().map(Point9::negate).collect::<Vec<_>>())?;
    Ok(SymmetryReport {
        n_samples: n,
        exchange_gap: GapStats::between(&base, &swapped),
        trivial_gap: GapStats::between(&base, &averaged),
        evenness_gap: GapStats::between(&base, &negated),
        seed,
        domain,
    })
}

/// `(x, y) → (x+y, x−y) → squares → (·)/4 difference → sin`, which is
/// `sin(¼((x+y)² − (x−y)²)) = sin(xy)`.
pub fn make_sinxy_network() -> Network {
    let spec = NetworkSpec::new(vec![
        LayerSpec::new(2, 2, ActivationKind::Square, false),
        LayerSpec::new(2, 1, ActivationKind::Sine, false),
    ])
    .expect("valid chain");
    let w1 = Tensor::from_rows(&[vec![1.0, 1.0], vec![1.0, -1.0]]).expect("2x2");
    let w2 = Tensor::from_rows(&[vec![0.25, -0.25]]).expect("1x2");
    Network::from_parts(spec, vec![w1, w2], vec![None, None]).expect("shapes match spec")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::triangle_area;
    use crate::network::FnPredictor;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn sinxy_hand_points() {
        let net = make_sinxy_network();
        let x = Tensor::from_rows(&[vec![1.0, FRAC_PI_2], vec![0.0, 1.7], vec![0.0, -3.0]]).unwrap();
        let out = net.forward(&x).unwrap();
        assert!((out.data()[0] - 1.0).abs() < 1e-15);
        assert_eq!(out.data()[1], 0.0);
        assert_eq!(out.data()[2], 0.0);
    }

    #[test]
    fn true_area_has_zero_exchange_gap_and_nonzero_trivial_gap() {
        let oracle = FnPredictor::new(9, |x: &[f64]| triangle_area(&Point9::from_slice(x)));
        let r = measure_symmetry(&oracle, 2000, 3, Domain::Cube).unwrap();
        assert_eq!(r.exchange_gap.max, 0.0);
        assert!(r.trivial_gap.max > 0.1);
        assert!(r.exchange_gap.mean >= 0.0 && r.evenness_gap.mean >= 0.0);
    }

    #[test]
    fn wrong_input_dim_rejected() {
        let net = make_sinxy_network();
        assert!(measure_symmetry(&net, 10, 0, Domain::Cube).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let net = Network::build(NetworkSpec::benchmark(ActivationKind::Relu), 2).unwrap();
        let a = measure_symmetry(&net, 200, 9, Domain::Sphere).unwrap();
        let b = measure_symmetry(&net, 200, 9, Domain::Sphere).unwrap();
        assert_eq!(a, b);
    }
}
