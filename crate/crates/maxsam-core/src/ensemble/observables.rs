//! Node-level ensemble quantities: pair laws, log-likelihood, its
//! gradient, expected constraints/matrices and exact constraint
//! variances.

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::model::Model;

use super::pairs::{self, pair_entries, pair_ln_z, pair_means, pair_moments};
use super::{HiddenVariables, PairDistribution};

fn check_pair(hv: &HiddenVariables, i: usize, j: usize) -> Result<()> {
    if i == j {
        return Err(Error::InvalidArgument(format!("pair ({i},{i}) has no law: no self-loops")));
    }
    if i >= hv.n() || j >= hv.n() {
        return Err(Error::Dimension(format!("pair ({i},{j}) out of range for n={}", hv.n())));
    }
    if let Some(p) = pairs::domain_violation(hv.model(), hv.params(i), hv.params(j)) {
        return Err(Error::Domain(format!("pair ({i},{j}) product {p} >= 1")));
    }
    Ok(())
}

/// The exact law of the pair (i, j) under the fitted model.
pub fn pair_distribution(hv: &HiddenVariables, i: usize, j: usize) -> Result<PairDistribution> {
    check_pair(hv, i, j)?;
    let pi = hv.params(i);
    let pj = hv.params(j);
    Ok(match hv.model() {
        Model::Ubcm => {
            let t = pi[0] * pj[0];
            PairDistribution::Bernoulli { p: t / (1.0 + t) }
        }
        Model::Dbcm => {
            let t = pi[0] * pj[1];
            PairDistribution::Bernoulli { p: t / (1.0 + t) }
        }
        Model::Rbcm => {
            let (t1, t2, t3) = (pi[0] * pj[1], pj[0] * pi[1], pi[2] * pj[2]);
            let d = 1.0 + t1 + t2 + t3;
            PairDistribution::Categorical4 {
                right: t1 / d,
                left: t2 / d,
                recip: t3 / d,
                none: 1.0 / d,
            }
        }
        Model::Uwcm => PairDistribution::Geometric { q: pi[0] * pj[0] },
        Model::Dwcm => PairDistribution::Geometric { q: pi[0] * pj[1] },
        Model::Rwcm => PairDistribution::ReciprocalTriple {
            a: pi[0] * pj[1],
            b: pj[0] * pi[1],
            c: pi[2] * pj[2],
        },
        Model::Uecm => {
            let u = pi[1] * pj[1];
            let v = pi[0] * pj[0];
            let g = 1.0 + u * (v - 1.0);
            PairDistribution::BernoulliGeometric { p: v * u / g, q: u }
        }
    })
}

fn check_shapes(hv: &HiddenVariables, observed: &ConstraintSet) -> Result<()> {
    if hv.model() != observed.model() {
        return Err(Error::Incompatible(format!(
            "hidden variables are {} but constraints are {}",
            hv.model(),
            observed.model()
        )));
    }
    if hv.n() != observed.n() {
        return Err(Error::Dimension(format!(
            "hidden variables have n={}, constraints n={}",
            hv.n(),
            observed.n()
        )));
    }
    Ok(())
}

/// Natural-log likelihood of the observed constraints under `hv`.
///
/// Equals ln P(G*|hv) for any graph G* realizing the constraints: the
/// constraints are sufficient statistics. Carried entirely in log
/// space; returns -inf when a zero parameter faces a positive
/// constraint.
pub fn log_likelihood(hv: &HiddenVariables, observed: &ConstraintSet) -> Result<f64> {
    check_shapes(hv, observed)?;
    hv.validate_domain()?;
    let n = hv.n();
    let mut lam = 0.0;
    for (a, params) in hv.vectors().iter().enumerate() {
        for i in 0..n {
            let obs = observed.value(a, i);
            if obs > 0.0 {
                lam += obs * params[i].ln(); // -inf when the parameter is 0
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            lam -= pair_ln_z(hv.model(), hv.params(i), hv.params(j));
        }
    }
    Ok(lam)
}

/// Analytic gradient of the log-likelihood, one vector per parameter
/// kind. Components of zero-constraint nodes (pinned parameters) are
/// reported as 0; a zero parameter facing a positive constraint is a
/// boundary evaluation error.
pub fn likelihood_gradient(hv: &HiddenVariables, observed: &ConstraintSet) -> Result<Vec<Vec<f64>>> {
    check_shapes(hv, observed)?;
    hv.validate_domain()?;
    let n = hv.n();
    let model = hv.model();
    let arity = model.arity();
    for a in 0..arity {
        for i in 0..n {
            if observed.value(a, i) > 0.0 && hv.param(a, i) == 0.0 {
                return Err(Error::Domain(format!(
                    "gradient at domain boundary: parameter {a} of node {i} is 0 with positive constraint"
                )));
            }
        }
    }
    let mut grad = vec![vec![0.0; n]; arity];
    // obs/param part
    for a in 0..arity {
        for i in 0..n {
            let obs = observed.value(a, i);
            if obs > 0.0 {
                grad[a][i] = obs / hv.param(a, i);
            }
        }
    }
    // minus d(ln Z_ij)/d(param)
    for i in 0..n {
        let pi = hv.params(i);
        for j in 0..n {
            if i == j {
                continue;
            }
            let pj = hv.params(j);
            match model {
                Model::Ubcm => {
                    let t = pi[0] * pj[0];
                    grad[0][i] -= pj[0] / (1.0 + t);
                }
                Model::Dbcm => {
                    grad[0][i] -= pj[1] / (1.0 + pi[0] * pj[1]);
                    grad[1][i] -= pj[0] / (1.0 + pj[0] * pi[1]);
                }
                Model::Rbcm => {
                    let d = 1.0 + pi[0] * pj[1] + pj[0] * pi[1] + pi[2] * pj[2];
                    grad[0][i] -= pj[1] / d;
                    grad[1][i] -= pj[0] / d;
                    grad[2][i] -= pj[2] / d;
                }
                Model::Uwcm => {
                    grad[0][i] -= pj[0] / (1.0 - pi[0] * pj[0]);
                }
                Model::Dwcm => {
                    grad[0][i] -= pj[1] / (1.0 - pi[0] * pj[1]);
                    grad[1][i] -= pj[0] / (1.0 - pj[0] * pi[1]);
                }
                Model::Rwcm => {
                    let a = pi[0] * pj[1];
                    let b = pj[0] * pi[1];
                    let ab = a * b;
                    grad[0][i] -= pj[1] / (1.0 - a) - pj[0] * pi[1] * pj[1] / (1.0 - ab);
                    grad[1][i] -= pj[0] / (1.0 - b) - pi[0] * pj[0] * pj[1] / (1.0 - ab);
                    grad[2][i] -= pj[2] / (1.0 - pi[2] * pj[2]);
                }
                Model::Uecm => {
                    let u = pi[1] * pj[1];
                    let v = pi[0] * pj[0];
                    let g = 1.0 + u * (v - 1.0);
                    grad[0][i] -= pj[0] * u / g;
                    grad[1][i] -= pj[1] / (1.0 - u) + pj[1] * (v - 1.0) / g;
                }
            }
        }
    }
    // pinned components are excluded from the system
    for a in 0..arity {
        for i in 0..n {
            if observed.value(a, i) == 0.0 && hv.param(a, i) == 0.0 {
                grad[a][i] = 0.0;
            }
        }
    }
    Ok(grad)
}

/// Ensemble expectations of the model's constraints.
pub fn expected_constraints(hv: &HiddenVariables) -> Result<ConstraintSet> {
    hv.validate_domain()?;
    let n = hv.n();
    let model = hv.model();
    let arity = model.arity();
    let mut vectors = vec![vec![0.0; n]; arity];
    for i in 0..n {
        let pi = hv.params(i);
        for j in (i + 1)..n {
            let m = pair_means(model, pi, hv.params(j));
            for a in 0..arity {
                vectors[a][i] += m.mean_i[a];
                vectors[a][j] += m.mean_j[a];
            }
        }
    }
    ConstraintSet::expected(model, vectors)
}

/// Entrywise connection probabilities and (for weighted models)
/// expected weights; the diagonal is zero.
#[derive(Debug, Clone)]
pub struct ExpectedMatrices {
    pub n: usize,
    /// Row-major <a_ij> = P(entry (i,j) nonzero).
    pub connect: Vec<f64>,
    /// Row-major <w_ij>; None for binary models where it equals
    /// `connect`.
    pub weight: Option<Vec<f64>>,
}

impl ExpectedMatrices {
    pub fn connect_at(&self, i: usize, j: usize) -> f64 {
        self.connect[i * self.n + j]
    }

    pub fn weight_at(&self, i: usize, j: usize) -> f64 {
        match &self.weight {
            Some(w) => w[i * self.n + j],
            None => self.connect[i * self.n + j],
        }
    }
}

pub fn expected_matrices(hv: &HiddenVariables) -> Result<ExpectedMatrices> {
    hv.validate_domain()?;
    let n = hv.n();
    let model = hv.model();
    let mut connect = vec![0.0; n * n];
    let mut weight = if model.weighted() { Some(vec![0.0; n * n]) } else { None };
    for i in 0..n {
        let pi = hv.params(i);
        for j in (i + 1)..n {
            let e = pair_entries(model, pi, hv.params(j));
            connect[i * n + j] = e.p_ij;
            connect[j * n + i] = e.p_ji;
            if let Some(w) = weight.as_mut() {
                w[i * n + j] = e.w_ij;
                w[j * n + i] = e.w_ji;
            }
        }
    }
    Ok(ExpectedMatrices { n, connect, weight })
}

/// Exact per-node variances of the constraints, in constraint-vector
/// order.
pub fn constraint_variances(hv: &HiddenVariables) -> Result<Vec<Vec<f64>>> {
    hv.validate_domain()?;
    let n = hv.n();
    let model = hv.model();
    let arity = model.arity();
    let mut vars = vec![vec![0.0; n]; arity];
    for i in 0..n {
        let pi = hv.params(i);
        for j in (i + 1)..n {
            let m = pair_moments(model, pi, hv.params(j));
            for a in 0..arity {
                vars[a][i] += m.cov[a][a];
                vars[a][j] += m.cov[3 + a][3 + a];
            }
        }
    }
    Ok(vars)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ALL_MODELS;

    fn hv(model: Model, x: &[f64], y: &[f64], z: &[f64]) -> HiddenVariables {
        HiddenVariables::new(model, x.to_vec(), y.to_vec(), z.to_vec()).unwrap()
    }

    #[test]
    fn pair_law_examples() {
        let u = hv(Model::Ubcm, &[1.0, 1.0], &[], &[]);
        assert_eq!(
            pair_distribution(&u, 0, 1).unwrap(),
            PairDistribution::Bernoulli { p: 0.5 }
        );

        let r = hv(Model::Rbcm, &[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]);
        match pair_distribution(&r, 0, 1).unwrap() {
            PairDistribution::Categorical4 { right, left, recip, none } => {
                for p in [right, left, recip, none] {
                    assert!((p - 0.25).abs() < 1e-15);
                }
            }
            other => panic!("unexpected law {other:?}"),
        }

        let e = hv(Model::Uecm, &[1.0, 1.0], &[0.5f64.sqrt(), 0.5f64.sqrt()], &[]);
        match pair_distribution(&e, 0, 1).unwrap() {
            PairDistribution::BernoulliGeometric { p, q } => {
                assert!((p - 0.5).abs() < 1e-15);
                assert!((q - 0.5).abs() < 1e-15);
            }
            other => panic!("unexpected law {other:?}"),
        }
    }

    #[test]
    fn pair_law_rejects_diagonal_and_domain() {
        let u = hv(Model::Uwcm, &[1.5, 1.0], &[], &[]);
        assert!(pair_distribution(&u, 0, 0).is_err());
        assert!(pair_distribution(&u, 0, 1).is_err()); // 1.5 * 1.0 >= 1
    }

    #[test]
    fn log_likelihood_examples() {
        // single pair, p = 1/2
        let u = hv(Model::Ubcm, &[1.0, 1.0], &[], &[]);
        let obs = ConstraintSet::observed(Model::Ubcm, vec![vec![1.0, 1.0]]).unwrap();
        let lam = log_likelihood(&u, &obs).unwrap();
        assert!((lam - 0.5f64.ln()).abs() < 1e-12);

        // geometric pmf at w = 3 with q = 1/2
        let x = 0.5f64.sqrt();
        let w = hv(Model::Uwcm, &[x, x], &[], &[]);
        let obs = ConstraintSet::observed(Model::Uwcm, vec![vec![3.0, 3.0]]).unwrap();
        let lam = log_likelihood(&w, &obs).unwrap();
        assert!((lam - (0.5f64.powi(3) * 0.5).ln()).abs() < 1e-12, "{lam}");
    }

    #[test]
    fn gradient_single_pair_value() {
        let u = hv(Model::Ubcm, &[1.0, 1.0], &[], &[]);
        let obs = ConstraintSet::observed(Model::Ubcm, vec![vec![1.0, 1.0]]).unwrap();
        let g = likelihood_gradient(&u, &obs).unwrap();
        assert!((g[0][0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gradient_boundary_error() {
        let u = hv(Model::Ubcm, &[0.0, 1.0], &[], &[]);
        let obs = ConstraintSet::observed(Model::Ubcm, vec![vec![1.0, 1.0]]).unwrap();
        assert!(likelihood_gradient(&u, &obs).is_err());
    }

    #[test]
    fn symmetric_expectations() {
        // UBCM n=4, x = 2^{-1/2}: <k_i> = 3 * (1/2)/(3/2) = 1
        let x = 0.5f64.sqrt();
        let u = hv(Model::Ubcm, &[x; 4], &[], &[]);
        let e = expected_constraints(&u).unwrap();
        for i in 0..4 {
            assert!((e.value(0, i) - 1.0).abs() < 1e-12);
        }
        // UWCM n=3, x = 3^{-1/2}: <s_i> = 2 * (1/3)/(2/3) = 1
        let x = (1.0f64 / 3.0).sqrt();
        let w = hv(Model::Uwcm, &[x; 3], &[], &[]);
        let e = expected_constraints(&w).unwrap();
        for i in 0..3 {
            assert!((e.value(0, i) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_variances() {
        // UBCM n=3, x = 1: sigma^2[k_i] = 2 * 1/4
        let u = hv(Model::Ubcm, &[1.0; 3], &[], &[]);
        let v = constraint_variances(&u).unwrap();
        for i in 0..3 {
            assert!((v[0][i] - 0.5).abs() < 1e-14);
        }
        // UWCM single pair with q = 1/2: sigma^2 = q/(1-q)^2 = 2
        let x = 0.5f64.sqrt();
        let w = hv(Model::Uwcm, &[x, x], &[], &[]);
        let v = constraint_variances(&w).unwrap();
        assert!((v[0][0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn expected_matrix_values() {
        // UWCM q = 1/2 pair: <w> = 1
        let x = 0.5f64.sqrt();
        let w = hv(Model::Uwcm, &[x, x], &[], &[]);
        let m = expected_matrices(&w).unwrap();
        assert!((m.weight_at(0, 1) - 1.0).abs() < 1e-14);
        assert!((m.connect_at(0, 1) - 0.5).abs() < 1e-14);

        // UECM p = q = 1/2 pair: <w> = p/(1-q) = 1
        let e = hv(Model::Uecm, &[1.0, 1.0], &[0.5f64.sqrt(), 0.5f64.sqrt()], &[]);
        let m = expected_matrices(&e).unwrap();
        assert!((m.weight_at(0, 1) - 1.0).abs() < 1e-12);
    }

    /// RBCM pair probabilities sum to one for random valid parameters.
    #[test]
    fn rbcm_four_outcomes_sum_to_one() {
        let mut state = 9u64;
        let mut next = || {
            state = crate::rng::mix64(state);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 3.0
        };
        for _ in 0..50 {
            let r = hv(
                Model::Rbcm,
                &[next(), next(), next()],
                &[next(), next(), next()],
                &[next(), next(), next()],
            );
            for i in 0..3 {
                for j in 0..3 {
                    if i == j {
                        continue;
                    }
                    if let PairDistribution::Categorical4 { right, left, recip, none } =
                        pair_distribution(&r, i, j).unwrap()
                    {
                        assert!((right + left + recip + none - 1.0).abs() < 1e-14);
                    }
                }
            }
        }
    }

    /// RWCM step-2 trichotomy probabilities sum to one on a grid of
    /// (a, b) values.
    #[test]
    fn rwcm_trichotomy_normalizes() {
        for ia in 0..20 {
            for ib in 0..20 {
                let a = ia as f64 / 20.0;
                let b = ib as f64 / 20.0;
                let ab = a * b;
                let total = (1.0 - a) * (1.0 - b) + a * (1.0 - b) + b * (1.0 - a);
                assert!((total / (1.0 - ab) - 1.0).abs() < 1e-14);
            }
        }
    }

    /// param * dL/dparam = observed - expected, componentwise.
    #[test]
    fn gradient_expectation_identity() {
        let mut state = 77u64;
        let mut next = |scale: f64| {
            state = crate::rng::mix64(state);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * scale + 0.05
        };
        for model in ALL_MODELS {
            let n = 5;
            let scale = if model.weighted() { 0.35 } else { 2.0 };
            let x: Vec<f64> = (0..n).map(|_| next(scale)).collect();
            let y: Vec<f64> = if model.uses_y() { (0..n).map(|_| next(scale)).collect() } else { vec![] };
            let z: Vec<f64> = if model.uses_z() { (0..n).map(|_| next(scale)).collect() } else { vec![] };
            let h = HiddenVariables::new(model, x, y, z).unwrap();
            h.validate_domain().unwrap();
            // integer observed values keep ConstraintSet::observed happy
            let obs_vectors: Vec<Vec<f64>> = (0..model.arity())
                .map(|a| (0..n).map(|i| ((a + 2) * (i + 1) % 4 + 1) as f64).collect())
                .collect();
            let obs = ConstraintSet::expected(model, obs_vectors).unwrap();
            let grad = likelihood_gradient(&h, &obs).unwrap();
            let exp = expected_constraints(&h).unwrap();
            for a in 0..model.arity() {
                for i in 0..n {
                    let lhs = h.param(a, i) * grad[a][i];
                    let rhs = obs.value(a, i) - exp.value(a, i);
                    assert!(
                        (lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0),
                        "{model} a={a} i={i}: {lhs} vs {rhs}"
                    );
                }
            }
        }
    }
}
