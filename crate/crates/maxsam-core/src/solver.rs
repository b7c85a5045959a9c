//! Likelihood-maximizing parameter search.
//!
//! Positive parameters are iterated in log space (`theta = ln param`),
//! which makes the log-likelihood a concave function of `theta` with
//! gradient `observed - expected` and Hessian `-Cov(constraints)`.
//! Stage 1 runs an L-BFGS ascent; stage 2 polishes with a damped
//! Newton step on the gradient system (skipped when stage 1 already
//! meets `eps`). Nodes with identical constraint tuples share one
//! unknown, and parameters driven to the saturation cap are frozen and
//! flagged.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSet;
use crate::ensemble::pairs::{max_pair_product, pair_ln_z, pair_means, pair_moments, Params};
use crate::ensemble::HiddenVariables;
use crate::error::{Error, Result};
use crate::model::Model;

/// Default maximum relative constraint error.
pub const DEFAULT_EPS: f64 = 1e-6;
/// Default outer iteration budget.
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Parameters above this cap correspond to pair probabilities within
/// 1e-12 of 1 against any non-vanishing partner; they are frozen and
/// flagged instead of diverging.
const PARAM_CAP: f64 = 1e14;
const THETA_CAP: f64 = 32.236_191_301_916_64; // ln(PARAM_CAP)
/// Pair products must stay strictly below 1 for the weighted models.
const DOMAIN_MARGIN: f64 = 1e-12;

const STAGE1_MAX_FRACTION: f64 = 0.5;
const ARMIJO_C1: f64 = 1e-4;
const LBFGS_MEMORY: usize = 10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// max over constraints of |observed - expected| / max(observed, 1)
    pub max_rel_error: f64,
    pub log_likelihood: f64,
    /// (node, parameter index) pairs frozen at the saturation cap
    pub boundary_flags: Vec<(usize, usize)>,
    pub converged: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    /// Maximum allowed relative error (default 1e-6).
    pub eps: Option<f64>,
    /// Outer iteration budget (default 10_000).
    pub max_iter: Option<usize>,
    /// Warm start; reusing a previous solution refines it.
    pub init: Option<HiddenVariables>,
    /// Run the stage-2 system polish even when stage 1 meets eps.
    pub force_refine: bool,
}

/// Finds the likelihood-maximizing hidden variables for `observed`.
pub fn solve(observed: &ConstraintSet, options: &SolveOptions) -> Result<(HiddenVariables, SolveReport)> {
    let eps = options.eps.unwrap_or(DEFAULT_EPS);
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let max_iter = options.max_iter.unwrap_or(DEFAULT_MAX_ITER);
    let sys = GroupedSystem::new(observed);
    let mut state = sys.initial_state(options.init.as_ref())?;
    let mut iterations = 0usize;

    // outer rounds let freezes settle; the active set shrinks or stays
    let mut rounds = 0;
    loop {
        rounds += 1;
        let stage1_budget = ((max_iter as f64 * STAGE1_MAX_FRACTION) as usize).max(50);
        let met_eps = sys.lbfgs_ascent(&mut state, eps, stage1_budget, &mut iterations);
        let refine = options.force_refine || !met_eps;
        if refine && iterations < max_iter {
            sys.newton_polish(&mut state, eps, max_iter, &mut iterations);
        }
        let changed = sys.update_freezes(&mut state, eps);
        if !changed || rounds >= 6 || iterations >= max_iter {
            break;
        }
    }

    // never report a state worse than the best iterate seen
    let best = state.best.clone().unwrap_or_else(|| state.theta.clone());
    state.theta = best;
    let (hv, report) = sys.finish(&state, eps, iterations)?;
    if !report.max_rel_error.is_finite() || !report.log_likelihood.is_finite() {
        return Err(Error::Solver(format!(
            "non-finite state reached: max_rel_error={}, log_likelihood={}",
            report.max_rel_error, report.log_likelihood
        )));
    }
    Ok((hv, report))
}

/// Re-evaluates a given solution against the data without iterating.
pub fn residual_report(hv: &HiddenVariables, observed: &ConstraintSet, eps: f64) -> Result<SolveReport> {
    let expected = crate::ensemble::expected_constraints(hv)?;
    let max_rel_error = observed.max_rel_error(&expected);
    let log_likelihood = crate::ensemble::log_likelihood(hv, observed)?;
    Ok(SolveReport {
        iterations: 0,
        max_rel_error,
        log_likelihood,
        boundary_flags: Vec::new(),
        converged: max_rel_error <= eps,
    })
}

struct Group {
    /// Observed constraint value per slot (zero-padded to 3).
    obs: [f64; 3],
    count: f64,
    members: Vec<usize>,
}

struct GroupedSystem {
    model: Model,
    arity: usize,
    groups: Vec<Group>,
    /// unknown -> (slot, group); pinned (zero-constraint) parameters
    /// are not unknowns
    unknowns: Vec<(usize, usize)>,
    /// [slot][group] -> unknown index
    index: Vec<Vec<Option<usize>>>,
}

struct State {
    theta: Vec<f64>,
    frozen: Vec<bool>,
    /// best iterate by relative error
    best: Option<Vec<f64>>,
    best_err: f64,
}

impl GroupedSystem {
    fn new(observed: &ConstraintSet) -> Self {
        let model = observed.model();
        let arity = model.arity();
        let n = observed.n();
        let mut by_tuple: BTreeMap<[u64; 3], Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            let mut key = [0u64; 3];
            for a in 0..arity {
                key[a] = observed.value(a, i).to_bits();
            }
            by_tuple.entry(key).or_default().push(i);
        }
        let mut groups = Vec::with_capacity(by_tuple.len());
        for (key, members) in by_tuple {
            let mut obs = [0.0; 3];
            for a in 0..arity {
                obs[a] = f64::from_bits(key[a]);
            }
            groups.push(Group { obs, count: members.len() as f64, members });
        }
        let mut unknowns = Vec::new();
        let mut index = vec![vec![None; groups.len()]; arity];
        for a in 0..arity {
            for (g, grp) in groups.iter().enumerate() {
                if grp.obs[a] > 0.0 {
                    index[a][g] = Some(unknowns.len());
                    unknowns.push((a, g));
                }
            }
        }
        GroupedSystem { model, arity, groups, unknowns, index }
    }

    fn initial_state(&self, init: Option<&HiddenVariables>) -> Result<State> {
        let mut theta = vec![0.0; self.unknowns.len()];
        if let Some(hv) = init {
            if hv.model() != self.model {
                return Err(Error::Incompatible(format!(
                    "init parameters are {} but constraints are {}",
                    hv.model(),
                    self.model
                )));
            }
            for (d, &(a, g)) in self.unknowns.iter().enumerate() {
                let rep = self.groups[g].members[0];
                if rep >= hv.n() {
                    return Err(Error::Dimension("init has wrong node count".into()));
                }
                let p = hv.param(a, rep);
                if p <= 0.0 {
                    return Err(Error::Domain(format!(
                        "init parameter {a} of node {rep} must be positive for a positive constraint"
                    )));
                }
                theta[d] = p.ln().min(THETA_CAP);
            }
        } else {
            // weak-coupling guesses: expected sums reduce to products of
            // the per-sequence scale-free seeds
            let totals: Vec<f64> = (0..self.arity)
                .map(|a| self.groups.iter().map(|g| g.obs[a] * g.count).sum())
                .collect();
            for (d, &(a, g)) in self.unknowns.iter().enumerate() {
                let v = self.groups[g].obs[a];
                let seed = match self.model {
                    Model::Ubcm | Model::Dbcm | Model::Rbcm => v / totals[a].sqrt().max(1.0),
                    Model::Uwcm | Model::Dwcm | Model::Rwcm => v / (1.0 + totals[a]).sqrt(),
                    Model::Uecm => {
                        if a == 0 {
                            v / totals[0].sqrt().max(1.0)
                        } else {
                            v / (1.0 + totals[1])
                        }
                    }
                };
                theta[d] = seed.max(1e-12).ln();
            }
        }
        let mut state = State {
            theta,
            frozen: vec![false; self.unknowns.len()],
            best: None,
            best_err: f64::INFINITY,
        };
        self.rescale_into_domain(&mut state);
        let err = self.max_rel_error(&self.node_expectations(&self.group_params(&state)));
        state.best = Some(state.theta.clone());
        state.best_err = err;
        Ok(state)
    }

    /// Uniformly shrinks parameters until every pair product is in
    /// domain (weighted models only).
    fn rescale_into_domain(&self, state: &mut State) {
        if !self.model.weighted() {
            return;
        }
        for _ in 0..200 {
            let params = self.group_params(state);
            let mut worst = 0.0f64;
            for (g, pg) in params.iter().enumerate() {
                for (h, ph) in params.iter().enumerate().skip(g) {
                    if g == h && self.groups[g].count < 2.0 {
                        continue;
                    }
                    worst = worst.max(max_pair_product(self.model, *pg, *ph));
                }
            }
            if worst < 0.9 {
                return;
            }
            // products shrink by worst^-1 * 0.81 after both factors
            // scale by 0.9/sqrt(worst)
            let shift = (0.9 / worst.sqrt()).ln();
            for t in state.theta.iter_mut() {
                *t += shift;
            }
        }
    }

    fn group_params(&self, state: &State) -> Vec<Params> {
        let mut params = vec![[0.0; 3]; self.groups.len()];
        for (d, &(a, g)) in self.unknowns.iter().enumerate() {
            params[g][a] = state.theta[d].exp();
        }
        params
    }

    fn in_domain(&self, params: &[Params]) -> bool {
        if !self.model.weighted() {
            return true;
        }
        for (g, pg) in params.iter().enumerate() {
            // product limits also apply within a group of two or more
            // nodes, so pairing starts at (g, g)
            for (h, ph) in params.iter().enumerate().skip(g) {
                if g == h && self.groups[g].count < 2.0 {
                    continue;
                }
                if max_pair_product(self.model, *pg, *ph) >= 1.0 - DOMAIN_MARGIN {
                    return false;
                }
            }
        }
        true
    }

    /// Log-likelihood in the grouped representation; None out of domain.
    fn lambda(&self, state: &State) -> Option<f64> {
        let params = self.group_params(state);
        if !self.in_domain(&params) {
            return None;
        }
        let mut lam = 0.0;
        for (d, &(a, g)) in self.unknowns.iter().enumerate() {
            lam += self.groups[g].count * self.groups[g].obs[a] * state.theta[d];
        }
        for (g, pg) in params.iter().enumerate() {
            let grp = &self.groups[g];
            if grp.count > 1.0 {
                lam -= grp.count * (grp.count - 1.0) / 2.0 * pair_ln_z(self.model, *pg, *pg);
            }
            for (h, ph) in params.iter().enumerate().skip(g + 1) {
                lam -= grp.count * self.groups[h].count * pair_ln_z(self.model, *pg, *ph);
            }
        }
        lam.is_finite().then_some(lam)
    }

    /// Per-node expected constraints, one value per (slot, group).
    fn node_expectations(&self, params: &[Params]) -> Vec<Vec<f64>> {
        let gcount = self.groups.len();
        let mut exp = vec![vec![0.0; gcount]; self.arity];
        for (g, pg) in params.iter().enumerate() {
            if self.groups[g].count > 1.0 {
                let m = pair_means(self.model, *pg, *pg);
                for a in 0..self.arity {
                    exp[a][g] += (self.groups[g].count - 1.0) * m.mean_i[a];
                }
            }
            for (h, ph) in params.iter().enumerate() {
                if h == g {
                    continue;
                }
                let m = pair_means(self.model, *pg, *ph);
                for a in 0..self.arity {
                    exp[a][g] += self.groups[h].count * m.mean_i[a];
                }
            }
        }
        exp
    }

    fn max_rel_error(&self, exp: &[Vec<f64>]) -> f64 {
        let mut worst = 0.0f64;
        for &(a, g) in &self.unknowns {
            let obs = self.groups[g].obs[a];
            worst = worst.max((obs - exp[a][g]).abs() / obs.max(1.0));
        }
        worst
    }

    /// Gradient of lambda w.r.t. theta over all unknowns (frozen
    /// included): count * (observed - expected).
    fn gradient(&self, exp: &[Vec<f64>]) -> Vec<f64> {
        self.unknowns
            .iter()
            .map(|&(a, g)| self.groups[g].count * (self.groups[g].obs[a] - exp[a][g]))
            .collect()
    }

    fn record_best(&self, state: &mut State) {
        let err = self.max_rel_error(&self.node_expectations(&self.group_params(state)));
        if err < state.best_err {
            state.best_err = err;
            state.best = Some(state.theta.clone());
        }
    }

    /// Backtracking step along `dir` over the active coordinates,
    /// accepting on the Armijo condition for lambda. Returns false when
    /// no acceptable step exists.
    fn line_step(&self, state: &mut State, active: &[usize], dir: &[f64], lam0: f64, slope: f64) -> bool {
        let mut t = 1.0;
        for _ in 0..60 {
            let mut cand = state.theta.clone();
            for (k, &d) in active.iter().enumerate() {
                cand[d] = (cand[d] + t * dir[k]).min(THETA_CAP);
            }
            let cand_state = State { theta: cand, frozen: state.frozen.clone(), best: None, best_err: 0.0 };
            if let Some(lam) = self.lambda(&cand_state) {
                if lam >= lam0 + ARMIJO_C1 * t * slope {
                    state.theta = cand_state.theta;
                    return true;
                }
            }
            t *= 0.5;
        }
        false
    }

    /// Stage 1: L-BFGS ascent on the free log-parameters. Returns true
    /// when the eps target was met.
    ///
    /// Internally runs the standard two-loop recursion on the convex
    /// objective f = -lambda; `y` pairs are stored as differences of
    /// the f-gradient, so the curvature products are positive.
    fn lbfgs_ascent(&self, state: &mut State, eps: f64, budget: usize, iterations: &mut usize) -> bool {
        let active: Vec<usize> = (0..self.unknowns.len()).filter(|&d| !state.frozen[d]).collect();
        if active.is_empty() {
            return self.max_rel_error(&self.node_expectations(&self.group_params(state))) <= eps;
        }
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut mem: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new(); // (s, y_f, 1/(s.y_f))
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None; // (theta, grad_f)
        let mut stall = 0usize;
        let mut last_lam = f64::NEG_INFINITY;

        for _ in 0..budget {
            let params = self.group_params(state);
            let exp = self.node_expectations(&params);
            self.record_best(state);
            if self.max_rel_error(&exp) <= eps {
                return true;
            }
            let full_grad = self.gradient(&exp);
            let grad_f: Vec<f64> = active.iter().map(|&d| -full_grad[d]).collect();
            let theta_a: Vec<f64> = active.iter().map(|&d| state.theta[d]).collect();

            if let Some((pt, pg)) = prev.take() {
                let s: Vec<f64> = theta_a.iter().zip(&pt).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = grad_f.iter().zip(&pg).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > 1e-14 {
                    mem.push((s, y, 1.0 / sy));
                    if mem.len() > LBFGS_MEMORY {
                        mem.remove(0);
                    }
                }
            }

            let mut q = grad_f.clone();
            let mut alphas = vec![0.0; mem.len()];
            for (m, (s, y, rho_inv)) in mem.iter().enumerate().rev() {
                let alpha = rho_inv * dot(s, &q);
                alphas[m] = alpha;
                for (qi, yi) in q.iter_mut().zip(y) {
                    *qi -= alpha * yi;
                }
            }
            if let Some((s, y, _)) = mem.last() {
                let gamma = dot(s, y) / dot(y, y).max(1e-300);
                for qi in q.iter_mut() {
                    *qi *= gamma;
                }
            }
            for (m, (s, y, rho_inv)) in mem.iter().enumerate() {
                let beta = rho_inv * dot(y, &q);
                for (qi, si) in q.iter_mut().zip(s) {
                    *qi += si * (alphas[m] - beta);
                }
            }
            // q approximates H^-1 grad_f; the ascent step for lambda is -q
            let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
            let grad_lam: Vec<f64> = grad_f.iter().map(|v| -v).collect();
            let mut slope = dot(&dir, &grad_lam);
            if !(slope > 0.0) {
                let norm = dot(&grad_lam, &grad_lam).sqrt().max(1e-12);
                dir = grad_lam.iter().map(|g| g / norm).collect();
                slope = dot(&dir, &grad_lam);
            }

            let lam0 = match self.lambda(state) {
                Some(l) => l,
                None => return false,
            };
            prev = Some((theta_a, grad_f));
            *iterations += 1;
            if !self.line_step(state, &active, &dir, lam0, slope) {
                break;
            }
            let lam = self.lambda(state).unwrap_or(lam0);
            if (lam - last_lam).abs() <= 1e-13 * last_lam.abs().max(1.0) {
                stall += 1;
                if stall >= 8 {
                    break;
                }
            } else {
                stall = 0;
            }
            last_lam = lam;
        }
        self.record_best(state);
        self.max_rel_error(&self.node_expectations(&self.group_params(state))) <= eps
    }

    /// Fisher information (covariance of total constraints) over the
    /// active unknowns; exact Hessian of -lambda in theta.
    fn fisher(&self, params: &[Params], active: &[usize]) -> DMatrix<f64> {
        let pos: Vec<Option<usize>> = {
            let mut pos = vec![None; self.unknowns.len()];
            for (k, &d) in active.iter().enumerate() {
                pos[d] = Some(k);
            }
            pos
        };
        let dim = active.len();
        let mut j = DMatrix::zeros(dim, dim);
        let lookup = |a: usize, g: usize| self.index[a][g].and_then(|u| pos[u]);
        let mut add = |a: usize, g: usize, b: usize, h: usize, v: f64| {
            if let (Some(p), Some(q)) = (lookup(a, g), lookup(b, h)) {
                j[(p, q)] += v;
            }
        };
        for (g, pg) in params.iter().enumerate() {
            let mg = self.groups[g].count;
            if mg > 1.0 {
                let m = pair_moments(self.model, *pg, *pg);
                let pairs = mg * (mg - 1.0) / 2.0;
                for a in 0..self.arity {
                    for b in 0..self.arity {
                        let v = m.cov[a][b] + m.cov[a][3 + b] + m.cov[3 + a][b] + m.cov[3 + a][3 + b];
                        add(a, g, b, g, pairs * v);
                    }
                }
            }
            for (h, ph) in params.iter().enumerate().skip(g + 1) {
                let w = mg * self.groups[h].count;
                let m = pair_moments(self.model, *pg, *ph);
                for a in 0..self.arity {
                    for b in 0..self.arity {
                        add(a, g, b, g, w * m.cov[a][b]);
                        add(a, h, b, h, w * m.cov[3 + a][3 + b]);
                        add(a, g, b, h, w * m.cov[a][3 + b]);
                        add(a, h, b, g, w * m.cov[3 + a][b]);
                    }
                }
            }
        }
        j
    }

    /// Stage 2: Levenberg-damped Newton on the gradient system.
    fn newton_polish(&self, state: &mut State, eps: f64, max_iter: usize, iterations: &mut usize) {
        let active: Vec<usize> = (0..self.unknowns.len()).filter(|&d| !state.frozen[d]).collect();
        if active.is_empty() {
            return;
        }
        while *iterations < max_iter {
            let params = self.group_params(state);
            let exp = self.node_expectations(&params);
            self.record_best(state);
            if self.max_rel_error(&exp) <= eps {
                return;
            }
            let full_grad = self.gradient(&exp);
            let grad = DVector::from_iterator(active.len(), active.iter().map(|&d| full_grad[d]));
            let fisher = self.fisher(&params, &active);
            let scale = fisher.diagonal().iter().fold(0.0f64, |m, &v| m.max(v)).max(1e-300);

            let lam0 = match self.lambda(state) {
                Some(l) => l,
                None => return,
            };
            let mut mu = 0.0;
            let mut stepped = false;
            for _ in 0..12 {
                let mut m = fisher.clone();
                if mu > 0.0 {
                    for d in 0..active.len() {
                        m[(d, d)] += mu * scale;
                    }
                }
                if let Some(chol) = m.cholesky() {
                    let dir_v = chol.solve(&grad);
                    let dir: Vec<f64> = dir_v.iter().copied().collect();
                    let slope: f64 = dir.iter().zip(grad.iter()).map(|(a, b)| a * b).sum();
                    *iterations += 1;
                    if slope > 0.0 && self.line_step(state, &active, &dir, lam0, slope) {
                        stepped = true;
                        break;
                    }
                }
                mu = if mu == 0.0 { 1e-10 } else { mu * 100.0 };
            }
            if !stepped {
                return;
            }
        }
    }

    /// Freezes active unknowns stuck at the cap with positive residual,
    /// unfreezes frozen ones whose residual turned negative. Returns
    /// whether the frozen set changed.
    fn update_freezes(&self, state: &mut State, eps: f64) -> bool {
        let params = self.group_params(state);
        let exp = self.node_expectations(&params);
        if self.max_rel_error(&exp) <= eps {
            return false;
        }
        let mut changed = false;
        for (d, &(a, g)) in self.unknowns.iter().enumerate() {
            let residual = self.groups[g].obs[a] - exp[a][g];
            if !state.frozen[d] && state.theta[d] >= THETA_CAP - 1e-9 && residual > 0.0 {
                state.frozen[d] = true;
                state.theta[d] = THETA_CAP;
                changed = true;
            } else if state.frozen[d] && residual < 0.0 {
                state.frozen[d] = false;
                changed = true;
            }
        }
        changed
    }

    fn finish(&self, state: &State, eps: f64, iterations: usize) -> Result<(HiddenVariables, SolveReport)> {
        let n: usize = self.groups.iter().map(|g| g.members.len()).sum();
        let params = self.group_params(state);
        let mut vectors = vec![vec![0.0; n]; self.arity];
        for (g, grp) in self.groups.iter().enumerate() {
            for &i in &grp.members {
                for a in 0..self.arity {
                    vectors[a][i] = params[g][a];
                }
            }
        }
        let x = vectors[0].clone();
        let y = if self.arity >= 2 { vectors[1].clone() } else { Vec::new() };
        let z = if self.arity == 3 { vectors[2].clone() } else { Vec::new() };
        let hv = HiddenVariables::new(self.model, x, y, z)?;

        let exp = self.node_expectations(&params);
        let max_rel_error = self.max_rel_error(&exp);
        let log_likelihood = self.lambda(state).unwrap_or(f64::NAN);
        let mut boundary_flags = Vec::new();
        for (d, &(a, g)) in self.unknowns.iter().enumerate() {
            if state.frozen[d] || state.theta[d] >= THETA_CAP - 1e-9 {
                for &i in &self.groups[g].members {
                    boundary_flags.push((i, a));
                }
            }
        }
        boundary_flags.sort_unstable();
        let report = SolveReport {
            iterations,
            max_rel_error,
            log_likelihood,
            boundary_flags,
            converged: max_rel_error <= eps,
        };
        Ok((hv, report))
    }
}
