//! Lossless, versioned text checkpoints for [`Network`].
//!
//! ```text
//! seagull-checkpoint 1
//! layers 2
//! layer 0 2 2 square nobias
//! layer 1 2 1 sine nobias
//! params 6
//! 3ff0000000000000
//! ...
//! end
//! ```
//!
//! Parameters are the IEEE-754 bit patterns of each `f64` in hex, one per
//! line, ordered layer by layer: weights row-major (`out × in`), then bias.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::network::{LayerSpec, Network, NetworkSpec};
use crate::tensor::Tensor;

pub const MAGIC: &str = "seagull-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

pub fn to_string(net: &Network) -> String {
    let spec = net.spec();
    let mut s = String::new();
    writeln!(s, "{MAGIC} {FORMAT_VERSION}").unwrap();
    writeln!(s, "layers {}", spec.layers.len()).unwrap();
    for (i, l) in spec.layers.iter().enumerate() {
        let bias = if l.has_bias { "bias" } else { "nobias" };
        writeln!(s, "layer {i} {} {} {} {bias}", l.in_dim, l.out_dim, l.activation).unwrap();
    }
    let params = net.flat_params();
    writeln!(s, "params {}", params.len()).unwrap();
    for p in params {
        writeln!(s, "{:016x}", p.to_bits()).unwrap();
    }
    s.push_str("end\n");
    s
}

pub fn from_str(text: &str) -> Result<Network> {
    let err = |msg: String| Error::Checkpoint(msg);
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| err(format!("truncated: expected {what}")))
    };

    let (_, header) = next("header")?;
    let mut h = header.split_whitespace();
    if h.next() != Some(MAGIC) {
        return Err(err(format!("not a checkpoint (header {header:?})")));
    }
    let version: u32 = h
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| err("missing format version".into()))?;
    if version != FORMAT_VERSION {
        return Err(err(format!(
            "unsupported format version {version} (this build reads {FORMAT_VERSION})"
        )));
    }

    let (ln, count_line) = next("layer count")?;
    let n_layers: usize = count_line
        .strip_prefix("layers ")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| err(format!("line {ln}: expected `layers <n>`")))?;

    let mut layers = Vec::with_capacity(n_layers);
    for i in 0..n_layers {
        let (ln, line) = next("layer spec")?;
        let f: Vec<&str> = line.split_whitespace().collect();
        let parsed = match f.as_slice() {
            ["layer", idx, input, output, act, bias] if idx.parse() == Ok(i) => {
                let in_dim = input.parse().ok();
                let out_dim = output.parse().ok();
                let has_bias = match *bias {
                    "bias" => Some(true),
                    "nobias" => Some(false),
                    _ => None,
                };
                let activation: Option<ActivationKind> = act.parse().ok();
                match (in_dim, out_dim, activation, has_bias) {
                    (Some(a), Some(b), Some(k), Some(hb)) => Some(LayerSpec::new(a, b, k, hb)),
                    _ => None,
                }
            }
            _ => None,
        };
        layers.push(parsed.ok_or_else(|| err(format!("line {ln}: malformed layer {i}: {line:?}")))?);
    }
    let spec = NetworkSpec::new(layers)?;

    let (ln, params_line) = next("parameter count")?;
    let n_params: usize = params_line
        .strip_prefix("params ")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| err(format!("line {ln}: expected `params <n>`")))?;
    if n_params != spec.param_count() {
        return Err(err(format!(
            "shape mismatch: spec needs {} parameters, file declares {n_params}",
            spec.param_count()
        )));
    }
    let mut values = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        let (ln, line) = next("parameter")?;
        if line.len() != 16 {
            return Err(err(format!("line {ln}: bad parameter {line:?}")));
        }
        let bits = u64::from_str_radix(line, 16)
            .map_err(|_| err(format!("line {ln}: bad parameter {line:?}")))?;
        values.push(f64::from_bits(bits));
    }
    match next("end marker")? {
        (_, "end") => {}
        (ln, other) => return Err(err(format!("line {ln}: expected `end`, found {other:?}"))),
    }

    let mut rest = values.into_iter();
    let mut weights = Vec::with_capacity(spec.layers.len());
    let mut biases = Vec::with_capacity(spec.layers.len());
    for l in &spec.layers {
        let w: Vec<f64> = rest.by_ref().take(l.in_dim * l.out_dim).collect();
        weights.push(Tensor::new(vec![l.out_dim, l.in_dim], w)?);
        biases.push(if l.has_bias {
            Some(Tensor::vector(rest.by_ref().take(l.out_dim).collect()))
        } else {
            None
        });
    }
    Network::from_parts(spec, weights, biases)
}

pub fn save(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_string(net))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Network> {
    from_str(&fs::read_to_string(path)?)
}
