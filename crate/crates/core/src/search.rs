//! Stochastic hill climbing over affine relations, with restarts.
//!
//! A descent starts from a randomly perturbed identity and proposes
//! mutations of a few coefficients at a time. Improvements are always
//! accepted; non-improving proposals are accepted with a fixed probability.
//! The step size halves whenever the best cost has not improved for a whole
//! stagnation window. A converged descent is validated on fresh inputs and,
//! if it passes, joins the prior set so later descents are pushed away from
//! it.
//!
//! # Random streams
//!
//! All randomness derives from `SearchConfig::seed`. Descent `r` draws from
//! ChaCha8 stream `2r` and its validation from stream `2r + 1`, so a restart
//! can be recomputed in isolation.

use std::time::Instant;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cost::{relative_error, validate, CostContext, ValidationConfig, ValidationReport};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernel::{random_state, EnergyModel, GridDims};
use crate::relations::{Alpha, AffineRelation, Space};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub space: Space,
    pub dims: GridDims,
    pub batch_size: usize,
    pub max_iterations: u64,
    /// Probability of accepting a proposal that does not improve the cost.
    pub p_accept: f64,
    pub sigma_init: f64,
    pub sigma_mut: f64,
    /// Mean number of coefficients perturbed per mutation.
    pub k_mut: f64,
    /// Probability that a mutation is a discrete move rather than Gaussian noise.
    pub structured_prob: f64,
    pub stagnation_window: u64,
    pub sigma_floor: f64,
    pub epsilon_converge: f64,
    pub max_relations: usize,
    pub max_restarts: usize,
    /// Total cost-evaluation budget across all descents.
    pub max_evaluations: Option<u64>,
    pub seed: u64,
    pub validation: ValidationConfig,
    /// Upper bound on stored trace points per descent.
    pub trace_points: usize,
    /// Box bound applied to every perturbable coefficient during search.
    pub coef_bound: Option<f64>,
    /// Times a converged descent may enlarge its batch with failing inputs.
    pub refine_rounds: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            space: Space::Diagonal,
            dims: GridDims::discovery(),
            batch_size: 8,
            max_iterations: 200_000,
            p_accept: 0.02,
            sigma_init: 0.5,
            sigma_mut: 0.1,
            k_mut: 2.0,
            structured_prob: 0.99,
            stagnation_window: 5000,
            sigma_floor: 1e-6,
            epsilon_converge: 1e-10,
            max_relations: 4,
            max_restarts: 50,
            max_evaluations: None,
            seed: 0,
            validation: ValidationConfig::default(),
            trace_points: 200,
            coef_bound: Some(10.0),
            refine_rounds: 8,
        }
    }
}

impl SearchConfig {
    pub fn check(&self) -> Result<()> {
        self.dims.check()?;
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1");
        }
        if self.max_iterations < 1 || self.stagnation_window < 1 || self.max_restarts < 1 {
            return bad("iteration, stagnation and restart counts must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.p_accept) {
            return bad("p_accept must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.structured_prob) {
            return bad("structured_prob must lie in [0, 1]");
        }
        for (name, v) in [
            ("sigma_init", self.sigma_init),
            ("sigma_mut", self.sigma_mut),
            ("sigma_floor", self.sigma_floor),
            ("epsilon_converge", self.epsilon_converge),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!("{name} must be positive and finite")));
            }
        }
        if !self.k_mut.is_finite() || self.k_mut < 1.0 {
            return bad("k_mut must be at least 1");
        }
        self.validation.check()
    }

    /// Generator for descent `restart`.
    pub fn descent_rng(&self, restart: usize) -> ChaCha8Rng {
        stream(self.seed, 2 * restart as u64)
    }

    /// Generator for validating the result of descent `restart`.
    pub fn validation_rng(&self, restart: usize) -> ChaCha8Rng {
        stream(self.seed, 2 * restart as u64 + 1)
    }
}

const MAX_INIT_DRAWS: usize = 1000;

pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Identity plus i.i.d. Gaussian noise of scale `sigma_init` on every
/// perturbable coefficient (linear part and offsets).
pub fn init_params<R: Rng + ?Sized>(space: Space, dims: GridDims, rng: &mut R, sigma_init: f64) -> AffineRelation {
    let mut rel = AffineRelation::identity_in(space, dims);
    rel.meta.name = None;
    if sigma_init > 0.0 {
        let noise = Normal::new(0.0, sigma_init).expect("positive scale");
        for k in 0..rel.coefficient_count() {
            *rel.coefficient_mut(k) += noise.sample(rng);
        }
    }
    rel
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MutationParams {
    pub sigma: f64,
    pub k_mean: f64,
    pub structured_prob: f64,
}

/// Draws `K >= 1` from a geometric law with mean `k_mean`, capped at `max`.
fn geometric_count<R: Rng + ?Sized>(rng: &mut R, k_mean: f64, max: usize) -> usize {
    let q = 1.0 / k_mean.max(1.0);
    let mut k = 1;
    while k < max && rng.random::<f64>() >= q {
        k += 1;
    }
    k
}

/// Proposes a neighbour of `rel`.
///
/// With probability `structured_prob` the move is discrete: one coefficient
/// reverts to its identity value or flips sign, and in the signed-perm-scale
/// space two ssh targets may swap instead. Otherwise `K` distinct
/// coefficients receive `N(0, sigma)` noise.
pub fn mutate<R: Rng + ?Sized>(rel: &AffineRelation, rng: &mut R, params: &MutationParams) -> AffineRelation {
    let mut out = rel.clone();
    let count = out.coefficient_count();
    if params.structured_prob > 0.0 && rng.random_bool(params.structured_prob) {
        let swap = match &mut out.alpha {
            Alpha::SignedPermScale { ssh_perm, .. } if ssh_perm.len() >= 2 && rng.random_bool(1.0 / 3.0) => {
                let pair = index::sample(rng, ssh_perm.len(), 2);
                ssh_perm.swap(pair.index(0), pair.index(1));
                true
            }
            _ => false,
        };
        if !swap {
            let k = rng.random_range(0..count);
            if rng.random_bool(0.5) {
                *out.coefficient_mut(k) = rel.identity_coefficient(k);
            } else {
                let c = out.coefficient_mut(k);
                *c = -*c;
            }
        }
        return out;
    }
    if params.sigma > 0.0 {
        let k = geometric_count(rng, params.k_mean, count);
        let noise = Normal::new(0.0, params.sigma).expect("positive scale");
        for idx in index::sample(rng, count, k) {
            *out.coefficient_mut(idx) += noise.sample(rng);
        }
    }
    out
}

/// Acceptance rule: strict improvements always, otherwise with probability
/// `p_accept`; an infinite proposal is never accepted.
pub fn accept<R: Rng + ?Sized>(current: f64, proposed: f64, p_accept: f64, rng: &mut R) -> bool {
    if proposed < current {
        true
    } else if proposed.is_infinite() || proposed.is_nan() {
        false
    } else {
        rng.random_bool(p_accept)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: u64,
    /// Best cost so far; `None` stands for `+inf`.
    pub cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Descent {
    pub relation: AffineRelation,
    pub cost: f64,
    pub evaluations: u64,
    pub converged: bool,
    pub trace: Vec<TracePoint>,
}

fn finite_or_none(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// One descent from a fresh random start, returning the best relation seen.
pub fn minimize<M: EnergyModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    priors: &[AffineRelation],
    config: &SearchConfig,
    rng: &mut R,
) -> Result<Descent> {
    minimize_with_budget(model, priors, config, rng, config.max_iterations)
}

fn minimize_with_budget<M: EnergyModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    priors: &[AffineRelation],
    config: &SearchConfig,
    rng: &mut R,
    budget: u64,
) -> Result<Descent> {
    let mut batch = (0..config.batch_size)
        .map(|_| random_state(config.dims, &config.validation.ranges, rng))
        .collect::<Result<Vec<_>>>()?;
    let mut ctx = CostContext::new(model, priors, &batch)?;
    let exec = Execution::Sequential;
    let mut evaluations = 0u64;

    let mut current = init_params(config.space, config.dims, rng, config.sigma_init);
    let mut current_cost = ctx.cost(&current, exec)?;
    evaluations += 1;
    let mut draws = 1;
    while current_cost.is_infinite() && draws < MAX_INIT_DRAWS && evaluations < budget {
        current = init_params(config.space, config.dims, rng, config.sigma_init);
        current_cost = ctx.cost(&current, exec)?;
        evaluations += 1;
        draws += 1;
    }
    let mut best = current.clone();
    let mut best_cost = current_cost;

    let stride = (config.max_iterations / config.trace_points.max(1) as u64).max(1);
    let mut trace = vec![TracePoint {
        iteration: 0,
        cost: finite_or_none(best_cost),
    }];

    let mut params = MutationParams {
        sigma: config.sigma_mut,
        k_mean: config.k_mut,
        structured_prob: config.structured_prob,
    };
    let mut since_improvement = 0u64;
    let mut iteration = 0u64;
    let mut refinements = 0usize;

    while evaluations < budget {
        if best_cost < config.epsilon_converge {
            if refinements >= config.refine_rounds {
                break;
            }
            let failing = screen_failures(&best, priors, model, config, rng)?;
            if failing.is_empty() {
                break;
            }
            refinements += 1;
            batch.extend(failing);
            ctx = CostContext::new(model, priors, &batch)?;
            best_cost = ctx.cost(&best, exec)?;
            evaluations += 1;
            current = best.clone();
            current_cost = best_cost;
            params.sigma = config.sigma_mut;
            since_improvement = 0;
            continue;
        }
        iteration += 1;
        let mut proposal = mutate(&current, rng, &params);
        if let Some(bound) = config.coef_bound {
            proposal.clamp_coefficients(bound);
        }
        let cost = ctx.cost(&proposal, exec)?;
        evaluations += 1;
        let improved = cost < best_cost;
        if accept(current_cost, cost, config.p_accept, rng) {
            current = proposal;
            current_cost = cost;
        }
        if improved {
            best = current.clone();
            best_cost = cost;
            since_improvement = 0;
        } else {
            since_improvement += 1;
            if since_improvement >= config.stagnation_window {
                since_improvement = 0;
                current = best.clone();
                current_cost = best_cost;
                if params.sigma > config.sigma_floor {
                    params.sigma = (params.sigma * 0.5).max(config.sigma_floor);
                } else {
                    // stalled at the floor: enlarge the batch or give up
                    if refinements >= config.refine_rounds {
                        break;
                    }
                    let failing = screen_failures(&best, priors, model, config, rng)?;
                    if failing.is_empty() {
                        break;
                    }
                    refinements += 1;
                    batch.extend(failing);
                    ctx = CostContext::new(model, priors, &batch)?;
                    best_cost = ctx.cost(&best, exec)?;
                    evaluations += 1;
                    current_cost = best_cost;
                    params.sigma = config.sigma_mut;
                }
            }
        }
        if iteration.is_multiple_of(stride) {
            trace.push(TracePoint {
                iteration,
                cost: finite_or_none(best_cost),
            });
        }
    }
    if trace.last().map(|p| p.iteration) != Some(iteration) {
        trace.push(TracePoint {
            iteration,
            cost: finite_or_none(best_cost),
        });
    }
    Ok(Descent {
        relation: best,
        cost: best_cost,
        evaluations,
        converged: best_cost < config.epsilon_converge,
        trace,
    })
}

/// Draws `batch_size` fresh inputs and keeps those on which `g` is not
/// invariant to within the validation tolerance.
fn screen_failures<M: EnergyModel + ?Sized, R: Rng + ?Sized>(
    g: &AffineRelation,
    priors: &[AffineRelation],
    model: &M,
    config: &SearchConfig,
    rng: &mut R,
) -> Result<Vec<crate::kernel::StateVector>> {
    let mut failing = Vec::new();
    for _ in 0..config.batch_size {
        let s = random_state(config.dims, &config.validation.ranges, rng)?;
        let (rel, _) = relative_error(g, priors, &s, model)?;
        if rel.is_nan() || rel >= config.validation.tol_validate {
            failing.push(s);
        }
    }
    Ok(failing)
}

/// Summary of one descent inside a discovery run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentRecord {
    pub restart: usize,
    pub cost: Option<f64>,
    pub evaluations: u64,
    pub converged: bool,
    pub validation: Option<ValidationReport>,
    /// Index into `SearchResult::relations` when the descent was recorded.
    pub recorded_as: Option<usize>,
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub descents: usize,
    pub failed_descents: usize,
    pub evaluations: u64,
    /// Wall time in seconds; excluded from serialized results.
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub relations: Vec<AffineRelation>,
    pub descents: Vec<DescentRecord>,
    pub stats: SearchStats,
}

struct Attempt {
    descent: Descent,
    report: Option<ValidationReport>,
}

fn attempt<M: EnergyModel + ?Sized>(
    model: &M,
    priors: &[AffineRelation],
    config: &SearchConfig,
    restart: usize,
    budget: u64,
) -> Result<Attempt> {
    let mut rng = config.descent_rng(restart);
    let descent = minimize_with_budget(model, priors, config, &mut rng, budget)?;
    let report = if descent.converged {
        let mut vrng = config.validation_rng(restart);
        Some(validate(
            &descent.relation,
            priors,
            model,
            &mut vrng,
            &config.validation,
            Execution::Sequential,
        )?)
    } else {
        None
    };
    Ok(Attempt { descent, report })
}

/// Repeated descents until `max_relations` relations are recorded,
/// `max_restarts` descents have failed, or the evaluation budget runs out.
///
/// Descents run speculatively in waves on `exec`. Results are consumed in
/// restart order; once a relation is recorded the rest of the wave was
/// computed against stale priors and is recomputed. The outcome is therefore
/// identical for every execution mode.
pub fn discover<M: EnergyModel + ?Sized>(model: &M, config: &SearchConfig, exec: Execution) -> Result<SearchResult> {
    config.check()?;
    let started = Instant::now();
    let mut priors = vec![AffineRelation::identity(config.dims)];
    let mut result = SearchResult {
        relations: Vec::new(),
        descents: Vec::new(),
        stats: SearchStats::default(),
    };
    let wave = exec.width();
    let mut restart = 0usize;

    'outer: while result.relations.len() < config.max_relations && result.stats.failed_descents < config.max_restarts {
        let remaining = config.max_evaluations.map(|cap| cap.saturating_sub(result.stats.evaluations));
        if remaining == Some(0) {
            break;
        }
        let width = wave.min(config.max_restarts - result.stats.failed_descents);
        let budget = remaining.map_or(config.max_iterations, |r| config.max_iterations.min(r));
        // Only the first descent of a wave is guaranteed the full remaining
        // budget; later ones are recomputed when the budget would be shared.
        let attempts = exec.map_range(width, |w| attempt(model, &priors, config, restart + w, budget));
        for (w, outcome) in attempts.into_iter().enumerate() {
            let Attempt { descent, report } = outcome?;
            let spent = result.stats.evaluations;
            if let Some(cap) = config.max_evaluations {
                if w > 0 && spent + descent.evaluations > cap {
                    // would have run with a smaller budget serially
                    continue 'outer;
                }
            }
            let index = restart;
            restart += 1;
            result.stats.descents += 1;
            result.stats.evaluations += descent.evaluations;
            let passed = report.as_ref().is_some_and(|r| r.passed);
            let mut record = DescentRecord {
                restart: index,
                cost: finite_or_none(descent.cost),
                evaluations: descent.evaluations,
                converged: descent.converged,
                validation: report,
                recorded_as: None,
                trace: descent.trace,
            };
            if passed {
                let k = result.relations.len();
                let mut rel = descent.relation;
                rel.meta.name = Some(format!("discovered-{}", k + 1));
                rel.meta.seed = Some(config.seed);
                rel.meta.cost = Some(descent.cost);
                rel.meta.iterations = Some(descent.evaluations);
                priors.push(rel.clone());
                result.relations.push(rel);
                record.recorded_as = Some(k);
                result.descents.push(record);
                continue 'outer;
            }
            result.stats.failed_descents += 1;
            result.descents.push(record);
            if result.stats.failed_descents >= config.max_restarts {
                break 'outer;
            }
            if config.max_evaluations.is_some_and(|cap| result.stats.evaluations >= cap) {
                break 'outer;
            }
        }
    }
    result.stats.wall_time = started.elapsed().as_secs_f64();
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{EnergySeries, Kernel, StateVector};
    use crate::relations::{negate_ssh, scale_ssh};

    fn small() -> SearchConfig {
        SearchConfig {
            max_iterations: 20_000,
            max_relations: 1,
            max_restarts: 3,
            ..SearchConfig::default()
        }
    }

    #[test]
    fn defaults_are_valid() {
        let cfg = SearchConfig::default();
        cfg.check().unwrap();
        assert_eq!(cfg.batch_size, 8);
        assert_eq!(cfg.max_iterations, 200_000);
        assert_eq!(cfg.p_accept, 0.02);
        assert_eq!(cfg.epsilon_converge, 1e-10);
        assert_eq!(cfg.space, Space::Diagonal);
    }

    #[test]
    fn config_check_rejects_bad_values() {
        for cfg in [
            SearchConfig { batch_size: 0, ..small() },
            SearchConfig { p_accept: 1.5, ..small() },
            SearchConfig { sigma_mut: 0.0, ..small() },
            SearchConfig { k_mut: 0.5, ..small() },
            SearchConfig { stagnation_window: 0, ..small() },
        ] {
            assert!(matches!(cfg.check(), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn zero_init_noise_is_identity() {
        let dims = GridDims::discovery();
        for space in [Space::Dense, Space::Diagonal, Space::SignedPermScale] {
            let rel = init_params(space, dims, &mut stream(3, 0), 0.0);
            assert!(rel.is_identity(), "{space:?}");
        }
    }

    #[test]
    fn init_is_seeded() {
        let dims = GridDims::discovery();
        let a = init_params(Space::Diagonal, dims, &mut stream(5, 0), 0.5);
        let b = init_params(Space::Diagonal, dims, &mut stream(5, 0), 0.5);
        assert_eq!(a, b);
        for seed in 0..100u64 {
            let x = init_params(Space::Diagonal, dims, &mut stream(seed, 0), 0.5);
            let y = init_params(Space::Diagonal, dims, &mut stream(seed + 100, 0), 0.5);
            assert_ne!(x, y);
        }
    }

    #[test]
    fn mutation_without_noise_or_moves_is_a_no_op() {
        let rel = init_params(Space::Diagonal, GridDims::discovery(), &mut stream(1, 0), 0.5);
        let params = MutationParams { sigma: 0.0, k_mean: 2.0, structured_prob: 0.0 };
        let mut rng = stream(1, 1);
        for _ in 0..100 {
            assert_eq!(mutate(&rel, &mut rng, &params), rel);
        }
    }

    #[test]
    fn mutation_touches_few_coordinates() {
        let rel = AffineRelation::identity_in(Space::Diagonal, GridDims::discovery());
        let params = MutationParams { sigma: 0.1, k_mean: 2.0, structured_prob: 0.0 };
        let mut rng = stream(2, 0);
        let n = rel.coefficient_count();
        let mut total = 0usize;
        for _ in 0..2000 {
            let m = mutate(&rel, &mut rng, &params);
            let changed = (0..n).filter(|&k| m.coefficient(k) != rel.coefficient(k)).count();
            assert!((1..=n).contains(&changed));
            total += changed;
        }
        let mean = total as f64 / 2000.0;
        assert!((mean - 2.0).abs() < 0.2, "mean K {mean}");
    }

    #[test]
    fn mutation_noise_has_requested_scale() {
        let rel = AffineRelation::identity_in(Space::Diagonal, GridDims::discovery());
        let params = MutationParams { sigma: 0.1, k_mean: 1.0, structured_prob: 0.0 };
        let mut rng = stream(4, 0);
        let n = rel.coefficient_count();
        let mut sq = 0.0;
        let mut count = 0usize;
        for _ in 0..10_000 {
            let m = mutate(&rel, &mut rng, &params);
            for k in 0..n {
                let d = m.coefficient(k) - rel.coefficient(k);
                if d != 0.0 {
                    sq += d * d;
                    count += 1;
                }
            }
        }
        let sd = (sq / count as f64).sqrt();
        assert!((sd - 0.1).abs() < 0.01, "sd {sd}");
    }

    #[test]
    fn structured_moves_stay_on_the_lattice() {
        let dims = GridDims::discovery();
        let rel = negate_ssh(dims);
        let params = MutationParams { sigma: 0.1, k_mean: 2.0, structured_prob: 1.0 };
        let mut rng = stream(6, 0);
        for _ in 0..500 {
            let m = mutate(&rel, &mut rng, &params);
            for k in 0..m.coefficient_count() {
                assert_eq!(m.coefficient(k).abs(), rel.coefficient(k).abs());
            }
            m.check().unwrap();
        }
    }

    #[test]
    fn acceptance_rule() {
        let mut rng = stream(7, 0);
        for _ in 0..1000 {
            assert!(accept(1.0, 0.5, 0.0, &mut rng));
            assert!(accept(f64::INFINITY, 3.0, 0.0, &mut rng));
            assert!(!accept(1.0, f64::INFINITY, 1.0, &mut rng));
            assert!(!accept(1.0, 2.0, 0.0, &mut rng));
            assert!(!accept(1.0, 1.0, 0.0, &mut rng));
        }
        let hits = (0..10_000).filter(|_| accept(1.0, 1.0, 0.02, &mut rng)).count();
        let freq = hits as f64 / 10_000.0;
        assert!((freq - 0.02).abs() < 0.005, "freq {freq}");
    }

    #[test]
    fn constant_model_converges_immediately() {
        let model = |s: &StateVector| Ok(EnergySeries(vec![1.0; s.dims.t]));
        let cfg = small();
        let priors = [AffineRelation::identity(cfg.dims)];
        let d = minimize(&model, &priors, &cfg, &mut cfg.descent_rng(0)).unwrap();
        assert_eq!(d.cost, 0.0);
        assert!(d.converged);
        assert!(d.evaluations <= 2, "{}", d.evaluations);
    }

    #[test]
    fn best_so_far_trace_never_increases() {
        let cfg = SearchConfig {
            refine_rounds: 0,
            p_accept: 0.3,
            trace_points: 500,
            ..small()
        };
        let priors = [AffineRelation::identity(cfg.dims)];
        let d = minimize(&Kernel::Cyclic, &priors, &cfg, &mut cfg.descent_rng(1)).unwrap();
        let costs: Vec<f64> = d.trace.iter().map(|p| p.cost.unwrap_or(f64::INFINITY)).collect();
        assert!(costs.len() > 10);
        assert!(costs.windows(2).all(|w| w[1] <= w[0]), "{costs:?}");
        assert_eq!(*costs.last().unwrap(), d.cost);
        assert!(d.evaluations <= cfg.max_iterations);
    }

    #[test]
    fn minimize_returns_a_relation_no_worse_than_its_trace() {
        let cfg = SearchConfig { p_accept: 0.0, ..small() };
        let priors = [AffineRelation::identity(cfg.dims)];
        let d = minimize(&Kernel::Cyclic, &priors, &cfg, &mut cfg.descent_rng(2)).unwrap();
        let first = d.trace[0].cost.unwrap_or(f64::INFINITY);
        assert!(d.cost <= first);
    }

    #[test]
    fn no_relations_requested_means_no_work() {
        let cfg = SearchConfig { max_relations: 0, ..small() };
        let r = discover(&Kernel::Cyclic, &cfg, Execution::Sequential).unwrap();
        assert!(r.relations.is_empty());
        assert!(r.descents.is_empty());
        assert_eq!(r.stats.evaluations, 0);
    }

    #[test]
    fn evaluation_budget_is_respected() {
        let cfg = SearchConfig {
            max_evaluations: Some(5_000),
            max_relations: 4,
            ..small()
        };
        let r = discover(&Kernel::Cyclic, &cfg, Execution::Sequential).unwrap();
        assert!(r.stats.evaluations <= 5_000);
        assert_eq!(r.stats.descents, r.descents.len());
    }

    #[test]
    fn discover_finds_a_validated_relation() {
        let cfg = SearchConfig {
            max_evaluations: Some(200_000),
            max_relations: 1,
            ..SearchConfig::default()
        };
        let r = discover(&Kernel::Cyclic, &cfg, Execution::Sequential).unwrap();
        assert_eq!(r.relations.len(), 1);
        let rel = &r.relations[0];
        assert_eq!(rel.name(), Some("discovered-1"));
        assert_eq!(rel.meta.seed, Some(0));
        assert!(rel.meta.cost.unwrap() < 1e-10);
        let rec = r.descents.iter().find(|d| d.recorded_as == Some(0)).unwrap();
        let report = rec.validation.as_ref().unwrap();
        assert!(report.passed && report.max_rel_err < 1e-8);
    }

    #[test]
    fn discover_is_deterministic_across_modes() {
        let cfg = SearchConfig {
            max_evaluations: Some(60_000),
            max_relations: 2,
            ..SearchConfig::default()
        };
        let seq = discover(&Kernel::Cyclic, &cfg, Execution::Sequential).unwrap();
        let again = discover(&Kernel::Cyclic, &cfg, Execution::Sequential).unwrap();
        let pool = rayon_pool(4);
        let par = pool(&|| discover(&Kernel::Cyclic, &cfg, Execution::Parallel).unwrap());
        for other in [&again, &par] {
            assert_eq!(seq.relations, other.relations);
            assert_eq!(seq.descents, other.descents);
            assert_eq!(seq.stats.evaluations, other.stats.evaluations);
        }
    }

    #[cfg(feature = "parallel")]
    fn rayon_pool(n: usize) -> impl Fn(&(dyn Fn() -> SearchResult + Sync)) -> SearchResult {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        move |f| pool.install(f)
    }

    #[cfg(not(feature = "parallel"))]
    fn rayon_pool(_: usize) -> impl Fn(&(dyn Fn() -> SearchResult + Sync)) -> SearchResult {
        |f| f()
    }

    #[test]
    fn second_relation_is_distinct_from_the_first() {
        let dims = GridDims::discovery();
        let first = negate_ssh(dims).to_dense();
        let priors = vec![AffineRelation::identity(dims), first.clone()];
        // a near-copy of a recorded prior is not worth recording again
        let report = validate(
            &first,
            &priors,
            &Kernel::Cyclic,
            &mut stream(9, 1),
            &ValidationConfig::default(),
            Execution::Sequential,
        )
        .unwrap();
        assert!(!report.passed);
        let doubled = scale_ssh(dims, 2.0);
        let report = validate(
            &doubled,
            &priors,
            &Kernel::Cyclic,
            &mut stream(9, 1),
            &ValidationConfig::default(),
            Execution::Sequential,
        )
        .unwrap();
        assert!(!report.passed && report.max_rel_err > 1.0);
    }
}
