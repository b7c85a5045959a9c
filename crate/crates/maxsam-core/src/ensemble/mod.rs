//! Exact per-pair laws, likelihoods, expectations and variances of the
//! seven ensembles.
//!
//! Every model factorizes over node pairs, so all ensemble quantities
//! reduce to sums of closed-form per-pair terms ([`pairs`]). Node-level
//! operations live in [`observables`] and are re-exported here.

pub(crate) mod pairs;
mod observables;

pub use observables::{
    constraint_variances, expected_constraints, expected_matrices, likelihood_gradient,
    log_likelihood, pair_distribution, ExpectedMatrices,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;

/// Likelihood parameters of a fitted ensemble: `x` for all models, `y`
/// for the two-parameter ones, `z` for the reciprocal ones.
///
/// Parameter vector `a` pairs with constraint vector `a` of the same
/// model: its entries are zero exactly where the constraint is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenVariables {
    model: Model,
    x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    z: Vec<f64>,
}

impl HiddenVariables {
    pub fn new(model: Model, x: Vec<f64>, y: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        let n = x.len();
        let expect_y = if model.uses_y() { n } else { 0 };
        let expect_z = if model.uses_z() { n } else { 0 };
        if y.len() != expect_y || z.len() != expect_z {
            return Err(Error::Dimension(format!(
                "{model} with n={n} expects y of length {expect_y} and z of length {expect_z}, got {} and {}",
                y.len(),
                z.len()
            )));
        }
        for (name, v) in [("x", &x), ("y", &y), ("z", &z)] {
            if let Some(i) = v.iter().position(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::Domain(format!(
                    "parameter {name}[{i}] = {} is negative or non-finite",
                    v[i]
                )));
            }
        }
        Ok(HiddenVariables { model, x, y, z })
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    /// Parameter triple of node `i`; unused slots read as 0.
    #[inline]
    pub fn params(&self, i: usize) -> [f64; 3] {
        [
            self.x[i],
            self.y.get(i).copied().unwrap_or(0.0),
            self.z.get(i).copied().unwrap_or(0.0),
        ]
    }

    /// Parameter `a` of node `i` (a < arity; 0 -> x, 1 -> y, 2 -> z).
    #[inline]
    pub fn param(&self, a: usize, i: usize) -> f64 {
        match a {
            0 => self.x[i],
            1 => self.y[i],
            _ => self.z[i],
        }
    }

    pub fn vectors(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = vec![&self.x];
        if self.model.uses_y() {
            v.push(&self.y);
        }
        if self.model.uses_z() {
            v.push(&self.z);
        }
        v
    }

    /// Checks the model's pairwise product constraints (`x_i x_j < 1`
    /// for UWCM, etc.) over all pairs.
    pub fn validate_domain(&self) -> Result<()> {
        let n = self.n();
        let check = |what: &str, v: f64, i: usize, j: usize| -> Result<()> {
            if v >= 1.0 {
                Err(Error::Domain(format!("{what} = {v} >= 1 for pair ({i},{j})")))
            } else {
                Ok(())
            }
        };
        for i in 0..n {
            for j in (i + 1)..n {
                match self.model {
                    Model::Ubcm | Model::Dbcm | Model::Rbcm => {}
                    Model::Uwcm => check("x_i*x_j", self.x[i] * self.x[j], i, j)?,
                    Model::Dwcm => {
                        check("x_i*y_j", self.x[i] * self.y[j], i, j)?;
                        check("x_j*y_i", self.x[j] * self.y[i], i, j)?;
                    }
                    Model::Rwcm => {
                        check("x_i*y_j", self.x[i] * self.y[j], i, j)?;
                        check("x_j*y_i", self.x[j] * self.y[i], i, j)?;
                        check("z_i*z_j", self.z[i] * self.z[j], i, j)?;
                    }
                    Model::Uecm => check("y_i*y_j", self.y[i] * self.y[j], i, j)?,
                }
            }
        }
        Ok(())
    }

    /// Applies a node relabeling: entry i of the result is entry
    /// `perm[i]` of the original.
    pub fn permuted(&self, perm: &[usize]) -> HiddenVariables {
        let take = |v: &[f64]| -> Vec<f64> {
            if v.is_empty() {
                Vec::new()
            } else {
                perm.iter().map(|&p| v[p]).collect()
            }
        };
        HiddenVariables {
            model: self.model,
            x: take(&self.x),
            y: take(&self.y),
            z: take(&self.z),
        }
    }
}

/// The law of one node pair (ordered pair for the directed independent
/// models, unordered otherwise).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairDistribution {
    /// UBCM / DBCM link indicator.
    Bernoulli { p: f64 },
    /// RBCM: single link i->j, single link j->i, mutual pair, nothing.
    Categorical4 { right: f64, left: f64, recip: f64, none: f64 },
    /// UWCM / DWCM weight: P(w) = q^w (1-q).
    Geometric { q: f64 },
    /// RWCM: a = x_i y_j, b = x_j y_i feed the non-reciprocated
    /// trichotomy and shifted-geometric magnitudes; c = z_i z_j is the
    /// reciprocated-weight geometric parameter.
    ReciprocalTriple { a: f64, b: f64, c: f64 },
    /// UECM: Bernoulli(p) link, then weight 1 + Geometric(q).
    BernoulliGeometric { p: f64, q: f64 },
}
