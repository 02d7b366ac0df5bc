//! Background patch statistics and LDA appearance weights.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linalg::{Cholesky, Matrix};
use crate::error::{check_dim, Error, Result};
use crate::imaging::FeatureVector;
use crate::scalar::Scalar;

/// Ridge added to the background covariance diagonal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Ridge<T> {
    Fixed(T),
    /// `fraction * trace(cov) / dim`.
    TraceFraction(T),
}

impl<T: Scalar> Default for Ridge<T> {
    fn default() -> Self {
        Ridge::TraceFraction(T::lit(0.01))
    }
}

impl<T: Scalar> Ridge<T> {
    fn resolve(&self, cov: &Matrix<T>) -> Result<T> {
        let lambda = match *self {
            Ridge::Fixed(l) => l,
            Ridge::TraceFraction(f) => f * cov.trace() / T::from_count(cov.dim().max(1)),
        };
        if !(lambda >= T::zero()) || !lambda.is_finite() {
            return Err(Error::InvalidConfig(format!("ridge must be finite and >= 0, got {lambda}")));
        }
        Ok(lambda)
    }
}

/// One-pass mean/covariance accumulator with an order-stable merge.
#[derive(Clone, Debug)]
pub struct CovarianceAccumulator<T> {
    count: usize,
    mean: Vec<T>,
    /// Upper triangle (row-major, full storage) of the centered scatter.
    scatter: Vec<T>,
}

impl<T: Scalar> CovarianceAccumulator<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![T::zero(); dim],
            scatter: vec![T::zero(); dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, x: &[T]) -> Result<()> {
        let d = self.dim();
        check_dim(d, x.len())?;
        self.count += 1;
        let n = T::from_count(self.count);
        let delta: Vec<T> = x.iter().zip(&self.mean).map(|(&v, &m)| v - m).collect();
        for (m, &dv) in self.mean.iter_mut().zip(&delta) {
            *m = *m + dv / n;
        }
        // delta_i * (x_j - new_mean_j)
        for i in 0..d {
            let di = delta[i];
            if di == T::zero() {
                continue;
            }
            let row = &mut self.scatter[i * d..(i + 1) * d];
            for j in i..d {
                row[j] = row[j] + di * (x[j] - self.mean[j]);
            }
        }
        Ok(())
    }

    /// Combines two partial accumulators.
    pub fn merge(mut self, other: &Self) -> Result<Self> {
        let d = self.dim();
        check_dim(d, other.dim())?;
        if other.count == 0 {
            return Ok(self);
        }
        if self.count == 0 {
            return Ok(other.clone());
        }
        let na = T::from_count(self.count);
        let nb = T::from_count(other.count);
        let n = na + nb;
        let delta: Vec<T> = other.mean.iter().zip(&self.mean).map(|(&b, &a)| b - a).collect();
        let w = na * nb / n;
        for i in 0..d {
            for j in i..d {
                let k = i * d + j;
                self.scatter[k] = self.scatter[k] + other.scatter[k] + delta[i] * delta[j] * w;
            }
        }
        for (m, &dv) in self.mean.iter_mut().zip(&delta) {
            *m = *m + dv * nb / n;
        }
        self.count += other.count;
        Ok(self)
    }

    /// Population covariance plus ridge.
    pub fn finish(&self, ridge: Ridge<T>) -> Result<BackgroundStats<T>> {
        if self.count < 2 {
            return Err(Error::InsufficientData(format!(
                "background statistics need at least 2 patches, got {}",
                self.count
            )));
        }
        let d = self.dim();
        let n = T::from_count(self.count);
        let mut sigma = Matrix::zeros(d);
        for i in 0..d {
            for j in i..d {
                let v = self.scatter[i * d + j] / n;
                sigma.set(i, j, v);
                sigma.set(j, i, v);
            }
        }
        let lambda = ridge.resolve(&sigma)?;
        sigma.add_diagonal(lambda);
        Ok(BackgroundStats {
            mean: FeatureVector::new(self.mean.clone()),
            sigma,
            lambda,
            count: self.count,
        })
    }
}

/// Dataset-wide patch mean and ridge-regularized covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundStats<T> {
    pub mean: FeatureVector<T>,
    /// Covariance with `lambda` already added to the diagonal.
    pub sigma: Matrix<T>,
    pub lambda: T,
    pub count: usize,
}

impl<T: Scalar> BackgroundStats<T> {
    pub fn dim(&self) -> usize {
        self.mean.dim()
    }

    /// Factors the covariance once for repeated weight solves.
    pub fn whitener(&self) -> Result<LdaWhitener<T>> {
        Ok(LdaWhitener {
            mean: self.mean.clone(),
            factor: self.sigma.cholesky()?,
        })
    }
}

/// Streams patch features through a single accumulator.
pub fn fit_background<T, I, V>(patches: I, ridge: Ridge<T>) -> Result<BackgroundStats<T>>
where
    T: Scalar,
    I: IntoIterator<Item = V>,
    V: AsRef<[T]>,
{
    let mut iter = patches.into_iter().peekable();
    let dim = match iter.peek() {
        Some(v) => v.as_ref().len(),
        None => return Err(Error::InsufficientData("no background patches".into())),
    };
    let mut acc = CovarianceAccumulator::new(dim);
    for v in iter {
        acc.push(v.as_ref())?;
    }
    acc.finish(ridge)
}

/// Parallel variant: fixed-size chunks are accumulated independently and merged
/// in chunk order, so the result does not depend on thread scheduling.
pub fn fit_background_par<T, V>(
    patches: &[V],
    ridge: Ridge<T>,
    chunk: usize,
) -> Result<BackgroundStats<T>>
where
    T: Scalar,
    V: AsRef<[T]> + Sync,
{
    let dim = match patches.first() {
        Some(v) => v.as_ref().len(),
        None => return Err(Error::InsufficientData("no background patches".into())),
    };
    let partials: Vec<Result<CovarianceAccumulator<T>>> = patches
        .par_chunks(chunk.max(1))
        .map(|block| {
            let mut acc = CovarianceAccumulator::new(dim);
            for v in block {
                acc.push(v.as_ref())?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = CovarianceAccumulator::new(dim);
    for part in partials {
        total = total.merge(&part?)?;
    }
    total.finish(ridge)
}

/// Cholesky-factored background model producing `w = sigma^-1 (t - mu)`.
#[derive(Clone, Debug)]
pub struct LdaWhitener<T> {
    mean: FeatureVector<T>,
    factor: Cholesky<T>,
}

impl<T: Scalar> LdaWhitener<T> {
    pub fn dim(&self) -> usize {
        self.mean.dim()
    }

    pub fn weights(&self, template: &[T]) -> Result<FeatureVector<T>> {
        check_dim(self.dim(), template.len())?;
        let centered: Vec<T> = template.iter().zip(self.mean.iter()).map(|(&t, &m)| t - m).collect();
        Ok(FeatureVector::new(self.factor.solve(&centered)?))
    }
}

/// One-off LDA weights; factor once with [`BackgroundStats::whitener`] when solving repeatedly.
pub fn lda_weights<T: Scalar>(template: &[T], stats: &BackgroundStats<T>) -> Result<FeatureVector<T>> {
    stats.whitener()?.weights(template)
}
