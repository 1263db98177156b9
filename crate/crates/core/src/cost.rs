//! Duplicate-penalised invariance cost and held-out validation.
//!
//! For a candidate `g`, priors `g_0 = id, g_1, ...` and an input `X`:
//!
//! ```text
//! cost = |f(g(X)) - f(X)| / prod_i |g(X) - g_i(X)|^2
//! ```
//!
//! The cost is `+inf` when any squared distance falls below
//! `1e-12 * D`, when `g(X)` is not a valid kernel input, or when `f` returns
//! something non-finite.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernel::{norm, random_state, EnergyModel, GridDims, SamplingRanges, StateVector};
use crate::relations::{squared_distance, AffineRelation};

/// Squared-distance floor below which a candidate counts as a duplicate.
pub fn duplicate_guard(dims: GridDims) -> f64 {
    1e-12 * dims.state_len() as f64
}

fn check_priors(priors: &[AffineRelation], dims: GridDims) -> Result<()> {
    let first = priors
        .first()
        .ok_or_else(|| Error::Config("prior relations must include the identity".into()))?;
    if !first.is_identity() {
        return Err(Error::Config("the first prior relation must be the identity".into()));
    }
    if let Some(p) = priors.iter().find(|p| p.dims != dims) {
        return Err(Error::Dimension {
            expected: dims.state_len(),
            actual: p.state_len(),
        });
    }
    Ok(())
}

struct Member {
    flat: Vec<f64>,
    energy: Vec<f64>,
    prior_images: Vec<Vec<f64>>,
}

/// A batch of inputs with `f(X)` and every prior image `g_i(X)` precomputed,
/// so repeated cost evaluations only pay for `g(X)` and `f(g(X))`.
pub struct CostContext<'a, M: EnergyModel + ?Sized> {
    model: &'a M,
    dims: GridDims,
    guard: f64,
    members: Vec<Member>,
}

impl<'a, M: EnergyModel + ?Sized> CostContext<'a, M> {
    pub fn new(model: &'a M, priors: &[AffineRelation], batch: &[StateVector]) -> Result<Self> {
        let first = batch
            .first()
            .ok_or_else(|| Error::Config("cost batch must not be empty".into()))?;
        let dims = first.dims;
        check_priors(priors, dims)?;
        let mut members = Vec::with_capacity(batch.len());
        for state in batch {
            if state.dims != dims {
                return Err(Error::Dimension {
                    expected: dims.state_len(),
                    actual: state.dims.state_len(),
                });
            }
            let flat = state.flatten();
            let energy = model.energy(state)?.0;
            let prior_images = priors.iter().map(|p| p.apply(&flat)).collect::<Result<_>>()?;
            members.push(Member {
                flat,
                energy,
                prior_images,
            });
        }
        Ok(CostContext {
            model,
            dims,
            guard: duplicate_guard(dims),
            members,
        })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    fn member_cost(&self, g: &AffineRelation, m: &Member) -> Result<f64> {
        let image = g.apply(&m.flat)?;
        let mut denominator = 1.0;
        for prior in &m.prior_images {
            let d2 = squared_distance(&image, prior);
            if d2.is_nan() || d2 < self.guard {
                return Ok(f64::INFINITY);
            }
            denominator *= d2;
        }
        let moved = StateVector::unflatten(&image, self.dims)?;
        if moved.check_kernel_inputs().is_err() {
            return Ok(f64::INFINITY);
        }
        let energy = match self.model.energy(&moved) {
            Ok(e) => e.0,
            Err(_) => return Ok(f64::INFINITY),
        };
        if energy.len() != m.energy.len() {
            return Err(Error::Dimension {
                expected: m.energy.len(),
                actual: energy.len(),
            });
        }
        let diff: Vec<f64> = energy.iter().zip(&m.energy).map(|(a, b)| a - b).collect();
        let numerator = match norm(&diff) {
            Ok(n) => n,
            Err(_) => return Ok(f64::INFINITY),
        };
        let cost = numerator / denominator;
        Ok(if cost.is_nan() { f64::INFINITY } else { cost })
    }

    fn check_dims(&self, g: &AffineRelation) -> Result<()> {
        if g.dims != self.dims {
            return Err(Error::Dimension {
                expected: self.dims.state_len(),
                actual: g.state_len(),
            });
        }
        Ok(())
    }

    /// Per-member costs in batch order.
    pub fn member_costs(&self, g: &AffineRelation, exec: Execution) -> Result<Vec<f64>> {
        self.check_dims(g)?;
        exec.map(&self.members, |m| self.member_cost(g, m))
            .into_iter()
            .collect()
    }

    /// Mean cost over the batch, accumulated in batch order. `+inf` absorbs.
    pub fn cost(&self, g: &AffineRelation, exec: Execution) -> Result<f64> {
        let costs = self.member_costs(g, exec)?;
        let mut total = 0.0;
        for c in &costs {
            if c.is_infinite() {
                return Ok(f64::INFINITY);
            }
            total += c;
        }
        Ok(total / costs.len() as f64)
    }
}

pub fn cost_single<M: EnergyModel + ?Sized>(
    g: &AffineRelation,
    priors: &[AffineRelation],
    state: &StateVector,
    model: &M,
) -> Result<f64> {
    CostContext::new(model, priors, std::slice::from_ref(state))?.cost(g, Execution::Sequential)
}

pub fn cost_batch<M: EnergyModel + ?Sized>(
    g: &AffineRelation,
    priors: &[AffineRelation],
    batch: &[StateVector],
    model: &M,
) -> Result<f64> {
    CostContext::new(model, priors, batch)?.cost(g, Execution::default())
}

/// Settings for held-out validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub n_holdout: usize,
    pub tol_validate: f64,
    /// Minimum distance from every prior; `None` means `1e-6 * sqrt(D)`.
    pub distinct: Option<f64>,
    pub ranges: SamplingRanges,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            n_holdout: 50,
            tol_validate: 1e-8,
            distinct: None,
            ranges: SamplingRanges::default(),
        }
    }
}

impl ValidationConfig {
    pub fn distinct_for(&self, dims: GridDims) -> f64 {
        self.distinct
            .unwrap_or_else(|| 1e-6 * (dims.state_len() as f64).sqrt())
    }

    pub fn check(&self) -> Result<()> {
        if self.n_holdout < 1 {
            return Err(Error::Config("holdout count must be at least 1".into()));
        }
        if !self.tol_validate.is_finite() || self.tol_validate <= 0.0 {
            return Err(Error::Config("validation tolerance must be positive".into()));
        }
        if let Some(d) = self.distinct {
            if !d.is_finite() || d < 0.0 {
                return Err(Error::Config("distinctness threshold must be nonnegative".into()));
            }
        }
        self.ranges.check()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub max_rel_err: f64,
    pub mean_rel_err: f64,
    pub min_prior_distance: f64,
    pub n_inputs: usize,
    pub passed: bool,
}

/// Relative invariance error of `g` on one input, and its distance to the
/// nearest prior.
pub fn relative_error<M: EnergyModel + ?Sized>(
    g: &AffineRelation,
    priors: &[AffineRelation],
    state: &StateVector,
    model: &M,
) -> Result<(f64, f64)> {
    let flat = state.flatten();
    let image = g.apply(&flat)?;
    let mut min_distance = f64::INFINITY;
    for prior in priors {
        let d = squared_distance(&image, &prior.apply(&flat)?).sqrt();
        min_distance = min_distance.min(d);
    }
    let base = model.energy(state)?.0;
    let floor = 1e-12 * state.dims.t as f64;
    let moved = StateVector::unflatten(&image, state.dims)?;
    let rel = match model.energy(&moved) {
        Ok(e) if e.len() == base.len() => {
            let diff: Vec<f64> = e.0.iter().zip(&base).map(|(a, b)| a - b).collect();
            match (norm(&diff), norm(&base)) {
                (Ok(num), Ok(den)) => num / (den + floor),
                _ => f64::INFINITY,
            }
        }
        _ => f64::INFINITY,
    };
    Ok((if rel.is_nan() { f64::INFINITY } else { rel }, min_distance))
}

/// Checks `g` on `n_holdout` fresh random inputs drawn from `rng`.
pub fn validate<M: EnergyModel + ?Sized, R: Rng + ?Sized>(
    g: &AffineRelation,
    priors: &[AffineRelation],
    model: &M,
    rng: &mut R,
    config: &ValidationConfig,
    exec: Execution,
) -> Result<ValidationReport> {
    config.check()?;
    let dims = g.dims;
    if let Some(p) = priors.iter().find(|p| p.dims != dims) {
        return Err(Error::Dimension {
            expected: dims.state_len(),
            actual: p.state_len(),
        });
    }
    let states = (0..config.n_holdout)
        .map(|_| random_state(dims, &config.ranges, rng))
        .collect::<Result<Vec<_>>>()?;
    validate_on(g, priors, model, &states, config, exec)
}

/// Validation on an explicit set of inputs.
pub fn validate_on<M: EnergyModel + ?Sized>(
    g: &AffineRelation,
    priors: &[AffineRelation],
    model: &M,
    states: &[StateVector],
    config: &ValidationConfig,
    exec: Execution,
) -> Result<ValidationReport> {
    let rows = exec
        .map(states, |s| relative_error(g, priors, s, model))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut max_rel_err: f64 = 0.0;
    let mut sum = 0.0;
    let mut min_prior_distance = f64::INFINITY;
    for &(rel, dist) in &rows {
        max_rel_err = max_rel_err.max(rel);
        sum += rel;
        min_prior_distance = min_prior_distance.min(dist);
    }
    let n = rows.len();
    let mean_rel_err = if n == 0 { 0.0 } else { sum / n as f64 };
    let passed = max_rel_err < config.tol_validate && min_prior_distance > config.distinct_for(g.dims);
    Ok(ValidationReport {
        max_rel_err,
        mean_rel_err,
        min_prior_distance,
        n_inputs: n,
        passed,
    })
}
