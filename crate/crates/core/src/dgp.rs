//! Synthetic data generating processes.
//!
//! Covariates are drawn independently from `U([0, 1])`. The response models are
//! the location model, the constant treatment effect model, and the two
//! product-type models whose conditional means have no marginal signal.

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal, StudentT};

use crate::error::{Error, Result};
use crate::rng::{RngStream, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgpKind {
    /// `y = mu + eps`.
    Location,
    /// `y = theta * d + eps`, `d ~ Bern(xi)`.
    CausalConstant,
    /// `y = sgn(x1 - 0.5) sgn(x2 - 0.5) + eps`, `p = 2`.
    Checkerboard,
    /// `y = (x1 - 0.5)(x2 - 0.5) + eps`, `p = 2`.
    Product,
    /// `y = d (x1 - 0.5)(x2 - 0.5) + eps`, `d ~ Bern(xi)`.
    CausalProduct,
}

impl DgpKind {
    pub fn is_causal(self) -> bool {
        matches!(self, DgpKind::CausalConstant | DgpKind::CausalProduct)
    }
}

/// Noise family. Every family is scaled to standard deviation `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    Gaussian,
    /// Student-t with the given degrees of freedom (must exceed 2).
    StudentT(f64),
    /// `+sigma` or `-sigma` with probability one half each.
    TwoPointSymmetric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgpSpec {
    pub kind: DgpKind,
    pub n: usize,
    pub p: usize,
    pub mu: f64,
    pub theta: f64,
    pub sigma: f64,
    pub noise: Noise,
    pub xi: f64,
    pub seed: u64,
}

impl DgpSpec {
    /// Location model `y = mu + N(0, sigma^2)` with `p` uniform covariates.
    pub fn location(n: usize, p: usize, mu: f64, sigma: f64) -> Self {
        Self { kind: DgpKind::Location, n, p, mu, theta: 0.0, sigma, noise: Noise::Gaussian, xi: 0.5, seed: 0 }
    }

    pub fn causal_constant(n: usize, p: usize, theta: f64, xi: f64, sigma: f64) -> Self {
        Self { kind: DgpKind::CausalConstant, n, p, mu: 0.0, theta, sigma, noise: Noise::Gaussian, xi, seed: 0 }
    }

    pub fn checkerboard(n: usize, sigma: f64) -> Self {
        Self { kind: DgpKind::Checkerboard, n, p: 2, mu: 0.0, theta: 0.0, sigma, noise: Noise::Gaussian, xi: 0.5, seed: 0 }
    }

    pub fn product(n: usize, sigma: f64) -> Self {
        Self { kind: DgpKind::Product, n, p: 2, mu: 0.0, theta: 0.0, sigma, noise: Noise::Gaussian, xi: 0.5, seed: 0 }
    }

    pub fn causal_product(n: usize, xi: f64, sigma: f64) -> Self {
        Self { kind: DgpKind::CausalProduct, n, p: 2, mu: 0.0, theta: 0.0, sigma, noise: Noise::Gaussian, xi, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_noise(mut self, noise: Noise) -> Self {
        self.noise = noise;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidSpec("n must be at least 1".into()));
        }
        if self.p == 0 {
            return Err(Error::InvalidSpec("p must be at least 1".into()));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidSpec(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return Err(Error::InvalidSpec(format!("xi must lie in (0, 1), got {}", self.xi)));
        }
        if let Noise::StudentT(df) = self.noise {
            if !(df > 2.0) {
                return Err(Error::InvalidSpec(format!("Student-t noise needs df > 2, got {df}")));
            }
        }
        if matches!(self.kind, DgpKind::Checkerboard | DgpKind::Product | DgpKind::CausalProduct) && self.p != 2 {
            return Err(Error::InvalidSpec(format!("{:?} model requires p = 2, got p = {}", self.kind, self.p)));
        }
        Ok(())
    }

    /// Conditional mean `E[y | x]` of the generating process.
    pub fn true_mean(&self, x: &[f64]) -> f64 {
        match self.kind {
            DgpKind::Location => self.mu,
            DgpKind::CausalConstant => self.theta * self.xi,
            DgpKind::Checkerboard => sgn(x[0] - 0.5) * sgn(x[1] - 0.5),
            DgpKind::Product => (x[0] - 0.5) * (x[1] - 0.5),
            DgpKind::CausalProduct => self.xi * (x[0] - 0.5) * (x[1] - 0.5),
        }
    }

    /// Conditional average treatment effect `theta(x)`; zero for models without treatment.
    pub fn true_effect(&self, x: &[f64]) -> f64 {
        match self.kind {
            DgpKind::CausalConstant => self.theta,
            DgpKind::CausalProduct => (x[0] - 0.5) * (x[1] - 0.5),
            _ => 0.0,
        }
    }

    /// True when `true_mean` does not depend on `x`.
    pub fn has_constant_mean(&self) -> bool {
        matches!(self.kind, DgpKind::Location | DgpKind::CausalConstant)
    }

    fn signal(&self, x: &[f64], d: Option<u8>) -> f64 {
        let d = d.map(f64::from).unwrap_or(0.0);
        match self.kind {
            DgpKind::Location => self.mu,
            DgpKind::CausalConstant => self.theta * d,
            DgpKind::Checkerboard => sgn(x[0] - 0.5) * sgn(x[1] - 0.5),
            DgpKind::Product => (x[0] - 0.5) * (x[1] - 0.5),
            DgpKind::CausalProduct => d * (x[0] - 0.5) * (x[1] - 0.5),
        }
    }

    pub(crate) fn draw_noise(&self, rng: &mut StreamRng) -> f64 {
        match self.noise {
            Noise::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                self.sigma * z
            }
            Noise::StudentT(df) => {
                // validated df > 2
                let t = StudentT::new(df).expect("df validated").sample(rng);
                self.sigma * t / (df / (df - 2.0)).sqrt()
            }
            Noise::TwoPointSymmetric => {
                if rng.random::<bool>() {
                    self.sigma
                } else {
                    -self.sigma
                }
            }
        }
    }
}

/// `sgn(0) = +1`.
fn sgn(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Observed sample: covariates (column-major), responses, and optionally the
/// treatment indicator together with its known propensity.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    columns: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub d: Option<Vec<u8>>,
    pub xi: Option<f64>,
}

impl Dataset {
    /// Builds a dataset from covariate columns.
    pub fn from_columns(columns: Vec<Vec<f64>>, y: Vec<f64>, d: Option<Vec<u8>>, xi: Option<f64>) -> Result<Self> {
        let p = columns.len();
        if p == 0 {
            return Err(Error::ShapeMismatch("at least one covariate column is required".into()));
        }
        let n = y.len();
        if n == 0 {
            return Err(Error::EmptyData);
        }
        if let Some(bad) = columns.iter().position(|c| c.len() != n) {
            return Err(Error::ShapeMismatch(format!("column {bad} has {} rows, expected {n}", columns[bad].len())));
        }
        if columns.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("covariates must lie in [0, 1]".into()));
        }
        match (&d, xi) {
            (Some(d), Some(xi)) => {
                if d.len() != n {
                    return Err(Error::ShapeMismatch(format!("treatment vector has {} entries, expected {n}", d.len())));
                }
                if d.iter().any(|&v| v > 1) {
                    return Err(Error::InvalidArgument("treatment indicators must be 0 or 1".into()));
                }
                if !(xi > 0.0 && xi < 1.0) {
                    return Err(Error::InvalidArgument(format!("propensity must lie in (0, 1), got {xi}")));
                }
            }
            (Some(_), None) => return Err(Error::InvalidArgument("treatment indicator given without propensity".into())),
            (None, _) => {}
        }
        Ok(Self { n, p, columns, y, d, xi })
    }

    /// Builds a dataset from row vectors.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let p = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::ShapeMismatch("rows have unequal length".into()));
        }
        let columns = (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Self::from_columns(columns, y, None, None)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn x(&self, i: usize, j: usize) -> f64 {
        self.columns[j][i]
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn is_causal(&self) -> bool {
        self.d.is_some()
    }

    /// Same covariates and treatments with a replacement response vector.
    pub fn with_responses(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.n {
            return Err(Error::ShapeMismatch(format!("{} responses for {} samples", y.len(), self.n)));
        }
        Ok(Self { y, ..self.clone() })
    }
}

/// Draws a dataset from `spec` using the stream `(spec.seed, 0)`.
pub fn sample(spec: &DgpSpec) -> Result<Dataset> {
    sample_with(spec, &RngStream::new(spec.seed, 0))
}

/// Draws a dataset from `spec` on an explicit stream.
pub fn sample_with(spec: &DgpSpec, stream: &RngStream) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = stream.rng();
    let n = spec.n;
    let columns: Vec<Vec<f64>> = (0..spec.p).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
    let d = if spec.kind.is_causal() {
        let bern = Bernoulli::new(spec.xi).expect("xi validated");
        Some((0..n).map(|_| u8::from(bern.sample(&mut rng))).collect::<Vec<u8>>())
    } else {
        None
    };
    let mut row = vec![0.0; spec.p];
    let y = (0..n)
        .map(|i| {
            for (r, c) in row.iter_mut().zip(&columns) {
                *r = c[i];
            }
            spec.signal(&row, d.as_ref().map(|d| d[i])) + spec.draw_noise(&mut rng)
        })
        .collect();
    let xi = spec.kind.is_causal().then_some(spec.xi);
    Ok(Dataset { n, p: spec.p, columns, y, d, xi })
}

/// Fresh responses for the covariates (and treatments) already in `data`.
pub fn regenerate_responses(data: &Dataset, spec: &DgpSpec, stream: &RngStream) -> Result<Dataset> {
    let y = fresh_responses(data, spec, &mut stream.rng())?;
    data.with_responses(y)
}

pub(crate) fn fresh_responses(data: &Dataset, spec: &DgpSpec, rng: &mut StreamRng) -> Result<Vec<f64>> {
    spec.validate()?;
    if data.p() != spec.p {
        return Err(Error::ShapeMismatch(format!("dataset has p = {}, spec has p = {}", data.p(), spec.p)));
    }
    if data.is_causal() != spec.kind.is_causal() {
        return Err(Error::ShapeMismatch("treatment indicator presence does not match the model".into()));
    }
    let mut row = vec![0.0; data.p()];
    Ok((0..data.n())
        .map(|i| {
            for (j, r) in row.iter_mut().enumerate() {
                *r = data.x(i, j);
            }
            spec.signal(&row, data.d.as_ref().map(|d| d[i])) + spec.draw_noise(rng)
        })
        .collect())
}
