//! Synthetic regression data over three points in ℝ³.
//!
//! Features are the nine coordinates `(u, v, w)`; labels are a target
//! function (triangle area or solid angle) passed through an optional
//! transform, with optional Gaussian label noise.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub type Vec3 = [f64; 3];

/// Tolerance on `‖u‖ - 1` accepted by [`solid_angle`].
pub const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point9 {
    pub u: Vec3,
    pub v: Vec3,
    pub w: Vec3,
}

impl Point9 {
    pub fn new(u: Vec3, v: Vec3, w: Vec3) -> Self {
        Self { u, v, w }
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            u: [x[0], x[1], x[2]],
            v: [x[3], x[4], x[5]],
            w: [x[6], x[7], x[8]],
        }
    }

    pub fn to_array(&self) -> [f64; 9] {
        let (u, v, w) = (self.u, self.v, self.w);
        [u[0], u[1], u[2], v[0], v[1], v[2], w[0], w[1], w[2]]
    }

    /// `(v, u, w)`
    pub fn swap_uv(&self) -> Self {
        Self::new(self.v, self.u, self.w)
    }

    /// `((u+v)/2, (u+v)/2, w)`
    pub fn average_uv(&self) -> Self {
        let m = [
            (self.u[0] + self.v[0]) / 2.0,
            (self.u[1] + self.v[1]) / 2.0,
            (self.u[2] + self.v[2]) / 2.0,
        ];
        Self::new(m, m, self.w)
    }

    pub fn negate(&self) -> Self {
        let n = |a: Vec3| [-a[0], -a[1], -a[2]];
        Self::new(n(self.u), n(self.v), n(self.w))
    }
}

pub fn points_to_tensor(points: &[Point9]) -> Result<Tensor> {
    if points.is_empty() {
        return Err(Error::Empty("points_to_tensor"));
    }
    let data = points.iter().flat_map(|p| p.to_array()).collect();
    Tensor::new(vec![points.len(), 9], data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    /// Uniform on `[-2, 2]^9`.
    Cube,
    /// Each of `u`, `v`, `w` uniform on the unit sphere.
    Sphere,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cube => "cube",
            Self::Sphere => "sphere",
        })
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cube" => Ok(Self::Cube),
            "sphere" => Ok(Self::Sphere),
            _ => Err(Error::Config(format!("unknown domain {s:?}; valid: cube, sphere"))),
        }
    }
}

impl Domain {
    pub fn sample(self, n: usize, seed: u64) -> Result<Vec<Point9>> {
        match self {
            Self::Cube => sample_cube(n, seed),
            Self::Sphere => sample_sphere_triple(n, seed),
        }
    }
}

pub fn sample_cube(n: usize, seed: u64) -> Result<Vec<Point9>> {
    if n < 1 {
        return Err(Error::Empty("sample_cube"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coord = || rng.random_range(-2.0..=2.0);
    Ok((0..n)
        .map(|_| {
            let mut x = [0.0; 9];
            x.iter_mut().for_each(|c| *c = coord());
            Point9::from_slice(&x)
        })
        .collect())
}

pub fn sample_sphere_triple(n: usize, seed: u64) -> Result<Vec<Point9>> {
    if n < 1 {
        return Err(Error::Empty("sample_sphere_triple"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = || loop {
        let g: Vec3 = [
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        ];
        let norm = norm(g);
        if norm > 1e-10 {
            break [g[0] / norm, g[1] / norm, g[2] / norm];
        }
    };
    Ok((0..n).map(|_| Point9::new(unit(), unit(), unit())).collect())
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Area of the triangle `(u, v, w)` via the 2×2 determinants of the
/// edge vectors `v - u` and `w - u`.
///
/// `u` and `v` are put in lexicographic order first, so swapping them gives
/// a bitwise identical result rather than one equal up to rounding.
pub fn triangle_area(p: &Point9) -> f64 {
    let lex = |a: &Vec3, b: &Vec3| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne());
    let p = match lex(&p.u, &p.v) {
        Some(std::cmp::Ordering::Greater) => p.swap_uv(),
        _ => *p,
    };
    let [x1, x2, x3, x4, x5, x6, x7, x8, x9] = p.to_array();
    let a = (x4 - x1) * (x8 - x2) - (x7 - x1) * (x5 - x2);
    let b = (x4 - x1) * (x9 - x3) - (x7 - x1) * (x6 - x3);
    let c = (x5 - x2) * (x9 - x3) - (x8 - x2) * (x6 - x3);
    0.5 * (a * a + b * b + c * c).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolidAngleVariant {
    /// `2 atan z` for `z ≥ 0`, `π + 2 atan z` for `z < 0`.
    Paper,
    /// `2 atan2(|(u×v)·w|, 1 + u·v + v·w + w·u)`, in `[0, 2π]`.
    Standard,
}

/// Solid angle subtended by the spherical triangle with unit vertices `u, v, w`.
pub fn solid_angle(p: &Point9, variant: SolidAngleVariant) -> Result<f64> {
    for (which, x) in [("u", p.u), ("v", p.v), ("w", p.w)] {
        let n = norm(x);
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::NotUnit { which, norm: n });
        }
    }
    let num = dot(cross(p.u, p.v), p.w).abs();
    let den = 1.0 + dot(p.u, p.v) + dot(p.v, p.w) + dot(p.w, p.u);
    let half = num.atan2(den);
    Ok(match variant {
        SolidAngleVariant::Standard => 2.0 * half,
        // atan2 lies in [0, π] since num ≥ 0. For den > 0 it equals atan z;
        // for den < 0 it equals atan z + π, so the z < 0 branch is 2·half − π.
        // den == 0 is z = +∞ (2 atan z = π), which 2·half already gives.
        // num == 0 is z = ±0, which the printed formula sends to 0.
        SolidAngleVariant::Paper => {
            if num == 0.0 {
                0.0
            } else if den < 0.0 {
                2.0 * half - PI
            } else {
                2.0 * half
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    TriangleArea,
    SolidAnglePaper,
    SolidAngleStandard,
}

impl TargetKind {
    pub fn eval(self, p: &Point9) -> Result<f64> {
        match self {
            Self::TriangleArea => Ok(triangle_area(p)),
            Self::SolidAnglePaper => solid_angle(p, SolidAngleVariant::Paper),
            Self::SolidAngleStandard => solid_angle(p, SolidAngleVariant::Standard),
        }
    }

    pub fn default_domain(self) -> Domain {
        match self {
            Self::TriangleArea => Domain::Cube,
            Self::SolidAnglePaper | Self::SolidAngleStandard => Domain::Sphere,
        }
    }

    pub fn check_domain(self, domain: Domain) -> Result<()> {
        if self != Self::TriangleArea && domain != Domain::Sphere {
            return Err(Error::Config(format!(
                "target {self} needs unit vectors (sphere domain), got {domain:?}"
            )));
        }
        Ok(())
    }

    pub const NAMES: &'static str = "triangle-area, solid-angle, solid-angle-standard";
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::TriangleArea => "triangle-area",
            Self::SolidAnglePaper => "solid-angle",
            Self::SolidAngleStandard => "solid-angle-standard",
        })
    }
}

impl FromStr for TargetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triangle-area" | "area" => Ok(Self::TriangleArea),
            "solid-angle" | "solid-angle-paper" => Ok(Self::SolidAnglePaper),
            "solid-angle-standard" => Ok(Self::SolidAngleStandard),
            _ => Err(Error::Config(format!("unknown target {s:?}; valid: {}", Self::NAMES))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    /// `f`
    Identity,
    /// `log(1 + f)`
    Log1pF,
    /// `e^f / 100`
    ExpFdiv100,
    /// `sin(f)`
    SinF,
    /// `√((f² + 3) / (f + 1))`
    SqrtRatioF,
}

impl TransformKind {
    pub const ALL: [Self; 5] = [
        Self::Identity,
        Self::Log1pF,
        Self::ExpFdiv100,
        Self::SinF,
        Self::SqrtRatioF,
    ];

    pub const NAMES: &'static str = "identity, log1p, exp-div-100, sin, sqrt-ratio";

    pub fn apply(self, f: f64) -> Result<f64> {
        match self {
            Self::Identity => Ok(f),
            Self::Log1pF => {
                if f <= -1.0 {
                    return Err(Error::TransformDomain { transform: "log1p", value: f });
                }
                Ok(f.ln_1p())
            }
            Self::ExpFdiv100 => Ok(f.exp() / 100.0),
            Self::SinF => Ok(f.sin()),
            Self::SqrtRatioF => {
                if f <= -1.0 {
                    return Err(Error::TransformDomain { transform: "sqrt-ratio", value: f });
                }
                Ok(((f * f + 3.0) / (f + 1.0)).sqrt())
            }
        }
    }

    /// Label used in report tables.
    pub fn formula(self) -> &'static str {
        match self {
            Self::Identity => "f(x)",
            Self::Log1pF => "log(1+f(x))",
            Self::ExpFdiv100 => "e^f(x)/100",
            Self::SinF => "sin(f(x))",
            Self::SqrtRatioF => "sqrt((f^2(x)+3)/(f(x)+1))",
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Identity => "identity",
            Self::Log1pF => "log1p",
            Self::ExpFdiv100 => "exp-div-100",
            Self::SinF => "sin",
            Self::SqrtRatioF => "sqrt-ratio",
        })
    }
}

impl FromStr for TransformKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "f" => Ok(Self::Identity),
            "log1p" => Ok(Self::Log1pF),
            "exp-div-100" | "exp" => Ok(Self::ExpFdiv100),
            "sin" => Ok(Self::SinF),
            "sqrt-ratio" => Ok(Self::SqrtRatioF),
            _ => Err(Error::Config(format!("unknown transform {s:?}; valid: {}", Self::NAMES))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// σ = relative_sigma · std(labels)
    DatasetStd,
    /// σᵢ = relative_sigma · |yᵢ|
    PerLabelRelative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub enabled: bool,
    pub relative_sigma: f64,
    pub mode: NoiseMode,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            enabled: false,
            relative_sigma: 0.05,
            mode: NoiseMode::DatasetStd,
            seed: 0,
        }
    }

    /// 5% of the label standard deviation.
    pub fn five_percent(seed: u64) -> Self {
        Self {
            enabled: true,
            seed,
            ..Self::none()
        }
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::none()
    }
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

pub fn add_noise(labels: &[f64], spec: &NoiseSpec) -> Result<Vec<f64>> {
    if labels.is_empty() {
        return Err(Error::Empty("add_noise"));
    }
    if !(spec.relative_sigma >= 0.0 && spec.relative_sigma.is_finite()) {
        return Err(Error::Config(format!(
            "noise relative_sigma must be >= 0, got {}",
            spec.relative_sigma
        )));
    }
    if !spec.enabled || spec.relative_sigma == 0.0 {
        return Ok(labels.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noisy = match spec.mode {
        NoiseMode::DatasetStd => {
            let sigma = spec.relative_sigma * std_dev(labels);
            let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
            labels.iter().map(|&y| y + normal.sample(&mut rng)).collect()
        }
        NoiseMode::PerLabelRelative => labels
            .iter()
            .map(|&y| {
                let z: f64 = StandardNormal.sample(&mut rng);
                y + spec.relative_sigma * y.abs() * z
            })
            .collect(),
    };
    Ok(noisy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub target: TargetKind,
    pub transform: TransformKind,
    pub noise: NoiseSpec,
    pub seed: u64,
    pub domain: Domain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Tensor,
    pub labels: Tensor,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(features: Tensor, labels: Tensor, provenance: Provenance) -> Result<Self> {
        let (n, _) = features.matrix_dims("dataset")?;
        if labels.len() != n {
            return Err(Error::Dimension {
                op: "dataset",
                left: features.shape().to_vec(),
                right: labels.shape().to_vec(),
            });
        }
        Ok(Self {
            features,
            labels,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn points(&self) -> Vec<Point9> {
        (0..self.len()).map(|i| Point9::from_slice(self.features.row(i))).collect()
    }

    /// Writes `x1..x9,y` with a leading `# provenance: {json}` comment.
    /// Floats use shortest round-trip formatting, so reading back is exact.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(fs::File::create(path)?);
        writeln!(out, "# provenance: {}", serde_json::to_string(&self.provenance)?)?;
        let d = self.feature_dim();
        let header: Vec<String> = (1..=d).map(|i| format!("x{i}")).chain(["y".to_string()]).collect();
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.len() {
            let row: Vec<String> = self
                .features
                .row(i)
                .iter()
                .chain(std::iter::once(&self.labels.data()[i]))
                .map(|v| format!("{v:?}"))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let reader = BufReader::new(fs::File::open(path)?);
        let bad = |m: String| Error::DatasetFormat(m);
        let mut provenance = None;
        let mut width = None;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(json) = line.strip_prefix("# provenance:") {
                provenance = Some(serde_json::from_str(json.trim())?);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            if width.is_none() {
                width = Some(line.split(',').count());
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(format!("line {}: {e}", i + 1)))?;
            if Some(vals.len()) != width {
                return Err(bad(format!("line {}: expected {width:?} columns", i + 1)));
            }
            let (y, x) = vals.split_last().unwrap();
            features.extend_from_slice(x);
            labels.push(*y);
        }
        let width = width.ok_or_else(|| bad("missing header".into()))?;
        let provenance = provenance.ok_or_else(|| bad("missing provenance comment".into()))?;
        if labels.is_empty() {
            return Err(Error::Empty("read_csv"));
        }
        Dataset::new(
            Tensor::new(vec![labels.len(), width - 1], features)?,
            Tensor::vector(labels),
            provenance,
        )
    }
}

/// Samples `n` points from `domain`, labels them with `transform(target(p))`
/// and optionally perturbs the labels. Sampling uses `seed`; noise uses
/// `noise.seed`, so the two streams are independent.
pub fn make_dataset(
    target: TargetKind,
    transform: TransformKind,
    noise: NoiseSpec,
    n: usize,
    seed: u64,
    domain: Domain,
) -> Result<Dataset> {
    target.check_domain(domain)?;
    let points = domain.sample(n, seed)?;
    let clean = points
        .iter()
        .map(|p| transform.apply(target.eval(p)?))
        .collect::<Result<Vec<f64>>>()?;
    let labels = add_noise(&clean, &noise)?;
    Dataset::new(
        points_to_tensor(&points)?,
        Tensor::vector(labels),
        Provenance {
            target,
            transform,
            noise,
            seed,
            domain,
        },
    )
}
