use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Matérn smoothness. `SquaredExponential` is the infinite-smoothness limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothness {
    Half,
    ThreeHalves,
    #[default]
    FiveHalves,
    SquaredExponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelParams {
    /// Prior variance of the standardized objective.
    pub variance: f64,
    pub length_scale: f64,
    pub smoothness: Smoothness,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self { variance: 1.0, length_scale: 0.2, smoothness: Smoothness::FiveHalves }
    }
}

pub fn matern_kernel(a: f64, b: f64, p: &KernelParams) -> f64 {
    let r = (a - b).abs() / p.length_scale;
    let shape = match p.smoothness {
        Smoothness::Half => (-r).exp(),
        Smoothness::ThreeHalves => {
            let s = 3f64.sqrt() * r;
            (1.0 + s) * (-s).exp()
        }
        Smoothness::FiveHalves => {
            let s = 5f64.sqrt() * r;
            (1.0 + s + s * s / 3.0) * (-s).exp()
        }
        Smoothness::SquaredExponential => (-0.5 * r * r).exp(),
    };
    p.variance * shape
}

const MAX_JITTER: f64 = 1e-4;

/// Gaussian-process model of the tuning objective over `[0, 1]`.
///
/// Observations are standardized before conditioning on a zero-mean prior;
/// the noise variance and kernel variance act on the standardized scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpSurrogate {
    pub samples: Vec<f64>,
    pub observations: Vec<f64>,
    pub kernel: KernelParams,
    pub noise_variance: f64,
    pub obs_mean: f64,
    pub obs_scale: f64,
    /// Diagonal jitter that was needed to factor the kernel matrix.
    pub jitter: f64,
    #[serde(skip)]
    factor: Option<Cholesky<f64, Dyn>>,
    #[serde(skip)]
    weights: DVector<f64>,
}

impl PartialEq for GpSurrogate {
    fn eq(&self, other: &Self) -> bool {
        self.samples == other.samples
            && self.observations == other.observations
            && self.kernel == other.kernel
            && self.noise_variance == other.noise_variance
    }
}

impl GpSurrogate {
    pub fn new(kernel: KernelParams, noise_variance: f64) -> Self {
        Self {
            samples: Vec::new(),
            observations: Vec::new(),
            kernel,
            noise_variance,
            obs_mean: 0.0,
            obs_scale: 1.0,
            jitter: 0.0,
            factor: None,
            weights: DVector::zeros(0),
        }
    }

    pub fn fit(kernel: KernelParams, noise_variance: f64, samples: &[f64], observations: &[f64]) -> Result<Self> {
        let mut gp = Self::new(kernel, noise_variance);
        gp.samples = samples.to_vec();
        gp.observations = observations.to_vec();
        gp.refit()?;
        Ok(gp)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn add(&mut self, alpha: f64, phi: f64) -> Result<()> {
        self.samples.push(alpha);
        self.observations.push(phi);
        self.refit()
    }

    /// Rebuild standardization and factorization, e.g. after deserializing.
    pub fn refit(&mut self) -> Result<()> {
        if self.samples.len() != self.observations.len() {
            return Err(Error::dims("samples and observations differ in length"));
        }
        let w = self.samples.len();
        if w == 0 {
            self.factor = None;
            return Ok(());
        }
        let n = w as f64;
        self.obs_mean = self.observations.iter().sum::<f64>() / n;
        let var = self.observations.iter().map(|y| (y - self.obs_mean).powi(2)).sum::<f64>() / n;
        self.obs_scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let mut k = DMatrix::from_fn(w, w, |i, j| matern_kernel(self.samples[i], self.samples[j], &self.kernel));
        for i in 0..w {
            k[(i, i)] += self.noise_variance;
        }
        let mut jitter = 0.0;
        let chol = loop {
            let mut kj = k.clone();
            for i in 0..w {
                kj[(i, i)] += jitter;
            }
            if let Some(c) = Cholesky::new(kj) {
                if (0..w).all(|i| c.l_dirty()[(i, i)] > 0.0) {
                    break c;
                }
            }
            jitter = if jitter == 0.0 { 1e-12 * self.kernel.variance.max(1e-300) } else { jitter * 10.0 };
            if jitter > MAX_JITTER * self.kernel.variance {
                return Err(Error::SingularKernel { jitter });
            }
        };
        self.jitter = jitter;
        let y = DVector::from_iterator(w, self.observations.iter().map(|v| (v - self.obs_mean) / self.obs_scale));
        self.weights = chol.solve(&y);
        self.factor = Some(chol);
        Ok(())
    }

    /// Posterior mean and standard deviation at `alpha`, on the original scale.
    pub fn posterior(&self, alpha: f64) -> (f64, f64) {
        let prior = self.kernel.variance;
        let Some(chol) = &self.factor else {
            return (self.obs_mean, self.obs_scale * prior.sqrt());
        };
        let ks = DVector::from_iterator(self.samples.len(), self.samples.iter().map(|&s| matern_kernel(alpha, s, &self.kernel)));
        let mean = ks.dot(&self.weights);
        let v = chol.l().solve_lower_triangular(&ks).expect("cholesky factor has a positive diagonal");
        let var = (prior - v.norm_squared()).max(0.0);
        (self.obs_mean + self.obs_scale * mean, self.obs_scale * var.sqrt())
    }

    pub fn posterior_mean(&self, alpha: f64) -> f64 {
        self.posterior(alpha).0
    }
}

/// Uniform grid of `points` values on `[0, 1]`.
pub fn unit_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Upper confidence bound `mean + kappa * std`.
pub fn ucb(gp: &GpSurrogate, alpha: f64, kappa: f64) -> f64 {
    let (m, s) = gp.posterior(alpha);
    m + kappa * s
}

/// Grid maximizer of the UCB acquisition, ties toward smaller `alpha`.
pub fn propose_next(gp: &GpSurrogate, kappa: f64, grid: &[f64]) -> f64 {
    let values: Vec<f64> = grid.iter().map(|&a| ucb(gp, a, kappa)).collect();
    grid[argmax(&values)]
}

/// Grid maximizer of the posterior mean.
pub fn posterior_argmax(gp: &GpSurrogate, grid: &[f64]) -> f64 {
    let values: Vec<f64> = grid.iter().map(|&a| gp.posterior_mean(a)).collect();
    grid[argmax(&values)]
}

/// Average the posterior means of several models over `grid` and return the
/// maximizer together with the averaged curve.
pub fn aggregate_runs(models: &[GpSurrogate], grid: &[f64]) -> Result<(f64, Vec<f64>)> {
    if models.is_empty() {
        return Err(Error::config("aggregation needs at least one model"));
    }
    let n = models.len() as f64;
    let curve: Vec<f64> = grid.iter().map(|&a| models.iter().map(|m| m.posterior_mean(a)).sum::<f64>() / n).collect();
    Ok((grid[argmax(&curve)], curve))
}
