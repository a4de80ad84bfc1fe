//! Minimum-cost sensor activation under a predictive-MSE cap.
//!
//! For a query location `x_*` and bound `qos_var`, find the activation mask
//! minimizing total activation cost subject to `mse(mask) < qos_var`, where
//! `mse(mask)` is the affine estimator's MSE using only the active sensors.
//! The constraint enters through an accept/reject utility: `-cost` when the
//! bound holds, `-inf` otherwise.
//!
//! [`cem_select`] solves this with the cross-entropy method over independent
//! Bernoulli activations; [`brute_force_select`] enumerates all `2^N` masks.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::gp::{Location, Prior};
use crate::moments::Quadrature;
use crate::obs::{moment_bundle_with, MomentBundle, SensorArray};
use crate::sblue::predictive_mse;
use crate::{par, rng};
use rand::Rng;

/// Largest array [`brute_force_select`] will enumerate.
pub const BRUTE_FORCE_LIMIT: usize = 22;

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionProblem {
    pub query: Location,
    /// Upper bound on the predictive MSE at `query` (strict).
    pub qos_var: f64,
    pub arr: SensorArray,
    pub prior: Prior,
}

impl SelectionProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.qos_var > 0.0 && self.qos_var.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "qos_var must be positive, got {}",
                self.qos_var
            )));
        }
        if !self.query.is_finite() {
            return Err(Error::InvalidArgument(
                "query location must be finite".into(),
            ));
        }
        self.prior.validate()
    }
}

/// Which sensors are switched on, aligned with the array's canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActivationMask {
    pub bits: Vec<bool>,
}

impl ActivationMask {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn empty(n: usize) -> Self {
        Self {
            bits: vec![false; n],
        }
    }

    pub fn full(n: usize) -> Self {
        Self {
            bits: vec![true; n],
        }
    }

    /// Mask whose bit `j` is bit `j` of `code`.
    pub fn from_code(n: usize, code: u64) -> Self {
        Self {
            bits: (0..n).map(|j| (code >> j) & 1 == 1).collect(),
        }
    }

    pub fn code(&self) -> u64 {
        self.bits
            .iter()
            .enumerate()
            .fold(0, |acc, (j, &b)| acc | ((b as u64) << j))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn active(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    /// Lexicographic order on the bit vector, `false < true`, index 0 first.
    pub fn lex_cmp(&self, other: &Self) -> Ordering {
        self.bits.cmp(&other.bits)
    }
}

/// `-cost` if `mse < qos_var`, else `-inf`.
pub fn accept_reject(mse: f64, cost: f64, qos_var: f64) -> f64 {
    if mse < qos_var {
        -cost
    } else {
        f64::NEG_INFINITY
    }
}

/// Shares one full-array moment bundle across all mask evaluations.
#[derive(Debug, Clone)]
pub struct SelectionEvaluator {
    bundle: MomentBundle,
    costs: Vec<f64>,
    qos_var: f64,
}

impl SelectionEvaluator {
    pub fn new(problem: &SelectionProblem) -> Result<Self> {
        Self::with_quadrature(problem, &Quadrature::default())
    }

    pub fn with_quadrature(problem: &SelectionProblem, quad: &Quadrature) -> Result<Self> {
        problem.validate()?;
        let bundle = moment_bundle_with(&problem.prior, &problem.arr, problem.query, quad)?;
        let costs = problem.arr.sensors().iter().map(|s| s.cost).collect();
        Ok(Self {
            bundle,
            costs,
            qos_var: problem.qos_var,
        })
    }

    pub fn from_bundle(bundle: MomentBundle, costs: Vec<f64>, qos_var: f64) -> Self {
        assert_eq!(bundle.dim(), costs.len());
        Self {
            bundle,
            costs,
            qos_var,
        }
    }

    pub fn dim(&self) -> usize {
        self.costs.len()
    }

    pub fn qos_var(&self) -> f64 {
        self.qos_var
    }

    pub fn bundle(&self) -> &MomentBundle {
        &self.bundle
    }

    pub fn with_qos(&self, qos_var: f64) -> Self {
        Self {
            qos_var,
            ..self.clone()
        }
    }

    pub fn cost(&self, mask: &ActivationMask) -> f64 {
        mask.active().iter().map(|&i| self.costs[i]).sum()
    }

    pub fn mse(&self, mask: &ActivationMask) -> Result<f64> {
        if mask.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: mask.len(),
            });
        }
        predictive_mse(&self.bundle.select(&mask.active()))
    }

    pub fn utility(&self, mask: &ActivationMask) -> Result<f64> {
        Ok(accept_reject(
            self.mse(mask)?,
            self.cost(mask),
            self.qos_var,
        ))
    }
}

pub fn utility(problem: &SelectionProblem, mask: &ActivationMask) -> Result<f64> {
    SelectionEvaluator::new(problem)?.utility(mask)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CemConfig {
    /// Masks sampled per iteration.
    pub n_samples: usize,
    pub elite_fraction: f64,
    /// Weight of the new elite frequencies in the probability update.
    pub smoothing: f64,
    pub max_iters: usize,
    pub p_init: f64,
    pub seed: u64,
}

impl Default for CemConfig {
    fn default() -> Self {
        Self {
            n_samples: 50,
            elite_fraction: 0.1,
            smoothing: 0.7,
            max_iters: 10,
            p_init: 0.5,
            seed: 0,
        }
    }
}

impl CemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_samples < 10 {
            return bad(format!("n_samples must be >= 10, got {}", self.n_samples));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return bad(format!(
                "elite_fraction must be in (0, 1), got {}",
                self.elite_fraction
            ));
        }
        if self.elite_fraction * (self.n_samples as f64) < 1.0 {
            return bad("elite_fraction * n_samples must be >= 1".into());
        }
        if !(self.smoothing > 0.0 && self.smoothing <= 1.0) {
            return bad(format!(
                "smoothing must be in (0, 1], got {}",
                self.smoothing
            ));
        }
        if self.max_iters < 1 {
            return bad("max_iters must be >= 1".into());
        }
        if !(self.p_init > 0.0 && self.p_init < 1.0) {
            return bad(format!("p_init must be in (0, 1), got {}", self.p_init));
        }
        Ok(())
    }

    pub fn n_elite(&self) -> usize {
        (self.elite_fraction * self.n_samples as f64).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CemState {
    /// Bernoulli activation probabilities.
    pub p: Vec<f64>,
    /// Elite threshold of the last iteration (`-inf` if nothing was feasible).
    pub beta: f64,
    pub best_mask: ActivationMask,
    pub best_utility: f64,
    pub iter: usize,
}

/// Per-iteration trace record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CemIteration {
    pub iter: usize,
    pub beta: f64,
    pub best_utility: f64,
    pub p_mean: f64,
    pub n_feasible: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CemOutcome {
    pub state: CemState,
    pub trace: Vec<CemIteration>,
}

fn p_mean(p: &[f64]) -> f64 {
    if p.is_empty() {
        0.0
    } else {
        p.iter().sum::<f64>() / p.len() as f64
    }
}

pub fn cem_select(problem: &SelectionProblem, cfg: &CemConfig) -> Result<CemOutcome> {
    cem_select_with(&SelectionEvaluator::new(problem)?, cfg)
}

/// Cross-entropy search. The empty mask is tried first: with nonnegative
/// costs it is optimal whenever it is feasible.
pub fn cem_select_with(eval: &SelectionEvaluator, cfg: &CemConfig) -> Result<CemOutcome> {
    cfg.validate()?;
    let n = eval.dim();
    let mut p = vec![cfg.p_init; n];

    let empty = ActivationMask::empty(n);
    let u0 = eval.utility(&empty)?;
    if u0.is_finite() {
        let state = CemState {
            p,
            beta: u0,
            best_mask: empty,
            best_utility: u0,
            iter: 1,
        };
        let trace = vec![CemIteration {
            iter: 1,
            beta: u0,
            best_utility: u0,
            p_mean: cfg.p_init,
            n_feasible: 1,
        }];
        return Ok(CemOutcome { state, trace });
    }

    let mut rng = rng::stream(cfg.seed, "selection", "cem");
    let mut best_mask = empty;
    let mut best_utility = f64::NEG_INFINITY;
    let mut beta = f64::NEG_INFINITY;
    let mut trace = Vec::with_capacity(cfg.max_iters);
    let mut iter = 0;

    while iter < cfg.max_iters {
        iter += 1;
        let masks: Vec<ActivationMask> = (0..cfg.n_samples)
            .map(|_| ActivationMask::new(p.iter().map(|&pj| rng.random::<f64>() < pj).collect()))
            .collect();
        let utils = par::collect_results(par::map_slice(&masks, |m| eval.utility(m)))?;

        for (m, &u) in masks.iter().zip(&utils) {
            if u > best_utility {
                best_utility = u;
                best_mask = m.clone();
            }
        }

        let mut finite: Vec<f64> = utils.iter().cloned().filter(|u| u.is_finite()).collect();
        if finite.is_empty() {
            // nothing to learn from; keep p and resample
            beta = f64::NEG_INFINITY;
        } else {
            finite.sort_by(|a, b| b.partial_cmp(a).unwrap());
            beta = finite[cfg.n_elite().min(finite.len()) - 1];
            let elites: Vec<&ActivationMask> = masks
                .iter()
                .zip(&utils)
                .filter(|(_, &u)| u >= beta)
                .map(|(m, _)| m)
                .collect();
            let n_el = elites.len() as f64;
            for (j, pj) in p.iter_mut().enumerate() {
                let freq = elites.iter().filter(|m| m.bits[j]).count() as f64 / n_el;
                *pj = (cfg.smoothing * freq + (1.0 - cfg.smoothing) * *pj).clamp(0.0, 1.0);
            }
        }
        trace.push(CemIteration {
            iter,
            beta,
            best_utility,
            p_mean: p_mean(&p),
            n_feasible: finite.len(),
        });
        if p.iter().all(|&pj| pj <= 1e-3 || pj >= 1.0 - 1e-3) {
            break;
        }
    }

    if best_utility == f64::NEG_INFINITY {
        let full = ActivationMask::full(n);
        let full_mse = eval.mse(&full)?;
        let u = accept_reject(full_mse, eval.cost(&full), eval.qos_var());
        if u.is_finite() {
            best_utility = u;
            best_mask = full;
        } else {
            return Err(Error::Infeasible {
                full_mse,
                qos_var: eval.qos_var(),
            });
        }
    }

    Ok(CemOutcome {
        state: CemState {
            p,
            beta,
            best_mask,
            best_utility,
            iter,
        },
        trace,
    })
}

/// Predictive MSE of every mask of a small array, indexed by mask code.
#[derive(Debug, Clone, PartialEq)]
pub struct MseTable {
    n: usize,
    mse: Vec<f64>,
    costs: Vec<f64>,
}

impl MseTable {
    pub fn build(eval: &SelectionEvaluator) -> Result<Self> {
        let n = eval.dim();
        if n > BRUTE_FORCE_LIMIT {
            return Err(Error::TooLarge {
                n,
                limit: BRUTE_FORCE_LIMIT,
            });
        }
        let total = 1usize << n;
        let mse = par::collect_results(par::map_range(total, |code| {
            eval.mse(&ActivationMask::from_code(n, code as u64))
        }))?;
        Ok(Self {
            n,
            mse,
            costs: eval.costs.clone(),
        })
    }

    pub fn mse(&self, mask: &ActivationMask) -> f64 {
        self.mse[mask.code() as usize]
    }

    pub fn utility(&self, mask: &ActivationMask, qos_var: f64) -> f64 {
        let cost = mask.active().iter().map(|&i| self.costs[i]).sum();
        accept_reject(self.mse(mask), cost, qos_var)
    }

    /// Best mask under `qos_var`; ties go to the lexicographically smallest
    /// mask. Returns the empty mask with `-inf` when nothing is feasible.
    pub fn optimum(&self, qos_var: f64) -> (ActivationMask, f64) {
        let mut best = ActivationMask::empty(self.n);
        let mut best_u = self.utility(&best, qos_var);
        for code in 1..self.mse.len() as u64 {
            let m = ActivationMask::from_code(self.n, code);
            let u = self.utility(&m, qos_var);
            if u > best_u || (u == best_u && m.lex_cmp(&best) == Ordering::Less) {
                best = m;
                best_u = u;
            }
        }
        (best, best_u)
    }
}

/// Exact optimum by enumeration of all `2^N` masks.
pub fn brute_force_select(problem: &SelectionProblem) -> Result<(ActivationMask, f64)> {
    if problem.arr.len() > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            n: problem.arr.len(),
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let eval = SelectionEvaluator::new(problem)?;
    Ok(MseTable::build(&eval)?.optimum(problem.qos_var))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Feasibility {
    Feasible { full_mse: f64 },
    Infeasible { full_mse: f64 },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }
}

/// Feasible iff activating every sensor meets the MSE bound.
pub fn feasibility_check(problem: &SelectionProblem) -> Result<Feasibility> {
    let eval = SelectionEvaluator::new(problem)?;
    let full_mse = eval.mse(&ActivationMask::full(eval.dim()))?;
    Ok(if full_mse < problem.qos_var {
        Feasibility::Feasible { full_mse }
    } else {
        Feasibility::Infeasible { full_mse }
    })
}
