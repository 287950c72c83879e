//! Exact t-SNE with perplexity calibration, plus a silhouette score for
//! judging cluster separation.
//!
//! Inputs are matrices with one point per row.

use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal};

use crate::error::{CvError, Result};
use crate::seeding::rng_for;

pub const DISTANCE_FLOOR: f64 = 1e-12;
pub const KL_FLOOR: f64 = 1e-12;
const BETA_MIN: f64 = 1e-20;
const BETA_MAX: f64 = 1e20;
const SEARCH_STEPS: usize = 50;
const PERPLEXITY_TOL: f64 = 1e-5;
const STREAM_INIT: u64 = 0x75_6e;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    pub exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub init_std: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            exaggeration: 12.0,
            exaggeration_iterations: 250,
            init_std: 1e-2,
            seed: 0,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if n < 5 {
            return Err(CvError::InvalidParameter(format!("t-SNE needs at least 5 points, got {n}")));
        }
        if !(self.perplexity > 1.0) || self.perplexity >= (n as f64 - 1.0) / 3.0 {
            return Err(CvError::Config(format!(
                "perplexity {} must lie in (1, {})",
                self.perplexity,
                (n as f64 - 1.0) / 3.0
            )));
        }
        if !(self.learning_rate > 0.0) || !(self.init_std > 0.0) {
            return Err(CvError::Config("learning_rate and init_std must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Embedding {
    /// `N × 2`.
    pub points: DMatrix<f64>,
    /// KL(P‖Q) at the initial layout, without exaggeration.
    pub initial_kl: f64,
    pub final_kl: f64,
}

pub fn squared_distances(data: &DMatrix<f64>) -> DMatrix<f64> {
    let n = data.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (data.row(i) - data.row(j)).norm_squared();
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// Row `i` is `p_{·|i}` with perplexity matched by bisection on the
/// Gaussian precision.
pub fn conditional_affinities(data: &DMatrix<f64>, perplexity: f64) -> Result<DMatrix<f64>> {
    let n = data.nrows();
    if n < 2 {
        return Err(CvError::InvalidParameter("need at least two points".into()));
    }
    if !(perplexity > 1.0) || perplexity > (n - 1) as f64 {
        return Err(CvError::InvalidParameter(format!("perplexity {perplexity} out of range")));
    }
    let dist = squared_distances(data);
    if dist.iter().any(|v| !v.is_finite()) {
        return Err(CvError::InvalidParameter("non-finite pairwise distances".into()));
    }
    let target = perplexity.ln();
    let mut p = DMatrix::zeros(n, n);
    let mut row = vec![0.0; n];
    for i in 0..n {
        let d: Vec<f64> = (0..n)
            .map(|j| if j == i { 0.0 } else { dist[(i, j)].max(DISTANCE_FLOOR) })
            .collect();
        let d_min = (0..n).filter(|&j| j != i).map(|j| d[j]).fold(f64::INFINITY, f64::min);
        // gaps below rounding level are treated as ties
        let gaps: Vec<f64> = d
            .iter()
            .map(|&v| {
                let g = v - d_min;
                if g <= 1e-12 * d_min {
                    0.0
                } else {
                    g
                }
            })
            .collect();
        let entropy = |beta: f64, row: &mut [f64]| {
            let mut sum = 0.0;
            for j in 0..n {
                row[j] = if j == i { 0.0 } else { (-beta * gaps[j]).exp() };
                sum += row[j];
            }
            let mut h = 0.0;
            for v in row.iter_mut() {
                *v /= sum;
                if *v > 0.0 {
                    h -= *v * v.ln();
                }
            }
            h
        };
        let (mut lo, mut hi) = (BETA_MIN.ln(), BETA_MAX.ln());
        let mut log_beta = 0.0f64;
        for _ in 0..SEARCH_STEPS {
            let h = entropy(log_beta.exp(), &mut row);
            if (h.exp() - perplexity).abs() < PERPLEXITY_TOL {
                break;
            }
            // entropy decreases with precision
            if h > target {
                lo = log_beta;
            } else {
                hi = log_beta;
            }
            log_beta = 0.5 * (lo + hi);
        }
        entropy(log_beta.exp(), &mut row);
        for j in 0..n {
            p[(i, j)] = row[j];
        }
    }
    Ok(p)
}

/// Symmetrized joint affinities `(p_{j|i} + p_{i|j}) / 2N`.
pub fn calibrate_affinities(data: &DMatrix<f64>, perplexity: f64) -> Result<DMatrix<f64>> {
    let cond = conditional_affinities(data, perplexity)?;
    let n = cond.nrows() as f64;
    Ok((&cond + cond.transpose()) / (2.0 * n))
}

/// Student-t joint similarities of a layout, normalized to unit sum.
pub fn low_dim_affinities(points: &DMatrix<f64>) -> DMatrix<f64> {
    let (q, _) = student_kernel(points);
    q
}

fn student_kernel(points: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = points.nrows();
    let mut num = DMatrix::zeros(n, n);
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = points[(i, 0)] - points[(j, 0)];
            let dy = points[(i, 1)] - points[(j, 1)];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[(i, j)] = v;
            num[(j, i)] = v;
            sum += 2.0 * v;
        }
    }
    (&num / sum, num)
}

pub fn kl_divergence(p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    p.iter()
        .zip(q.iter())
        .filter(|(p, _)| **p > 0.0)
        .map(|(&p, &q)| {
            let p = p.max(KL_FLOOR);
            p * (p / q.max(KL_FLOOR)).ln()
        })
        .sum()
}

pub fn embed(data: &DMatrix<f64>, config: &TsneConfig) -> Result<Embedding> {
    let keys: Vec<u64> = (0..data.nrows() as u64).collect();
    embed_with_keys(data, &keys, config)
}

/// As [`embed`], with the initial position of row `i` drawn from a stream
/// keyed by `keys[i]`, so permuting rows and keys together permutes the
/// result.
pub fn embed_with_keys(data: &DMatrix<f64>, keys: &[u64], config: &TsneConfig) -> Result<Embedding> {
    let n = data.nrows();
    config.validate(n)?;
    if keys.len() != n {
        return Err(CvError::DimensionMismatch {
            expected: n,
            got: keys.len(),
        });
    }
    let p = calibrate_affinities(data, config.perplexity)?;
    let normal = Normal::new(0.0, config.init_std)
        .map_err(|e| CvError::Config(format!("init_std: {e}")))?;
    let mut y = DMatrix::zeros(n, 2);
    for (i, &key) in keys.iter().enumerate() {
        let mut rng = rng_for(config.seed, &[STREAM_INIT, key]);
        y[(i, 0)] = normal.sample(&mut rng);
        y[(i, 1)] = normal.sample(&mut rng);
    }
    let initial_kl = kl_divergence(&p, &low_dim_affinities(&y));
    if !initial_kl.is_finite() {
        return Err(CvError::Divergence("non-finite initial KL".into()));
    }

    let mut velocity = DMatrix::<f64>::zeros(n, 2);
    let mut grad = DMatrix::<f64>::zeros(n, 2);
    for it in 0..config.iterations {
        let scale = if it < config.exaggeration_iterations {
            config.exaggeration
        } else {
            1.0
        };
        let momentum = if it < config.momentum_switch {
            config.initial_momentum
        } else {
            config.final_momentum
        };
        let (q, num) = student_kernel(&y);
        grad.fill(0.0);
        for i in 0..n {
            let (mut gx, mut gy) = (0.0, 0.0);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = (scale * p[(i, j)] - q[(i, j)]) * num[(i, j)];
                gx += w * (y[(i, 0)] - y[(j, 0)]);
                gy += w * (y[(i, 1)] - y[(j, 1)]);
            }
            grad[(i, 0)] = 4.0 * gx;
            grad[(i, 1)] = 4.0 * gy;
        }
        velocity = &velocity * momentum - &grad * config.learning_rate;
        y += &velocity;
        let mean = y.row_mean();
        for mut row in y.row_iter_mut() {
            row -= &mean;
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(CvError::Divergence(format!("non-finite layout at iteration {it}")));
        }
    }
    let final_kl = kl_divergence(&p, &low_dim_affinities(&y));
    if !final_kl.is_finite() {
        return Err(CvError::Divergence("non-finite final KL".into()));
    }
    Ok(Embedding {
        points: y,
        initial_kl,
        final_kl,
    })
}

/// Mean silhouette coefficient under Euclidean distance. Points in singleton
/// clusters contribute 0.
pub fn silhouette_score(data: &DMatrix<f64>, labels: &[usize]) -> Result<f64> {
    let n = data.nrows();
    if labels.len() != n {
        return Err(CvError::DimensionMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    labels.iter().for_each(|&l| sizes[l] += 1);
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(CvError::InvalidParameter("silhouette needs at least two clusters".into()));
    }
    let dist = squared_distances(data).map(f64::sqrt);
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if j != i {
                sums[labels[j]] += dist[(i, j)];
            }
        }
        let own = labels[i];
        if sizes[own] < 2 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}
