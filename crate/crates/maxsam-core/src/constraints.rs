//! Constraint vectors enforced by each model, and their computation
//! from graphs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{reciprocal_decompose, Graph};
use crate::model::Model;

/// Model-tagged constraint vectors, one entry per node per constraint
/// kind (see [`Model::constraint_names`] for the vector order).
///
/// Observed sets are integer-valued and satisfy the model's parity and
/// balance invariants; expected sets are real-valued.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    model: Model,
    vectors: Vec<Vec<f64>>,
}

impl ConstraintSet {
    /// Wraps observed (integer-valued) constraints, validating the
    /// model's invariants.
    pub fn observed(model: Model, vectors: Vec<Vec<f64>>) -> Result<Self> {
        let set = Self::expected(model, vectors)?;
        set.validate_observed()?;
        Ok(set)
    }

    /// Wraps real-valued constraints (ensemble expectations); only the
    /// shape and non-negativity are checked.
    pub fn expected(model: Model, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if vectors.len() != model.arity() {
            return Err(Error::Dimension(format!(
                "{model} takes {} constraint vectors, got {}",
                model.arity(),
                vectors.len()
            )));
        }
        let n = vectors[0].len();
        for (name, v) in model.constraint_names().iter().zip(&vectors) {
            if v.len() != n {
                return Err(Error::Dimension(format!(
                    "constraint vector {name} has length {}, expected {n}",
                    v.len()
                )));
            }
            if let Some(i) = v.iter().position(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::Constraint(format!(
                    "negative or non-finite {name} at node {i}: {}",
                    v[i]
                )));
            }
        }
        Ok(ConstraintSet { model, vectors })
    }

    fn validate_observed(&self) -> Result<()> {
        for (name, v) in self.model.constraint_names().iter().zip(&self.vectors) {
            if let Some(i) = v.iter().position(|x| x.fract() != 0.0) {
                return Err(Error::Constraint(format!(
                    "observed {name} must be integer-valued; node {i} has {}",
                    v[i]
                )));
            }
        }
        let sum = |idx: usize| self.vectors[idx].iter().sum::<f64>();
        match self.model {
            Model::Ubcm => {
                if sum(0) % 2.0 != 0.0 {
                    return Err(Error::Constraint("odd degree sum".into()));
                }
            }
            Model::Dbcm | Model::Dwcm => {
                if sum(0) != sum(1) {
                    let names = self.model.constraint_names();
                    return Err(Error::Constraint(format!(
                        "total {} ({}) != total {} ({})",
                        names[0],
                        sum(0),
                        names[1],
                        sum(1)
                    )));
                }
            }
            Model::Rbcm | Model::Rwcm => {
                let names = self.model.constraint_names();
                if sum(0) != sum(1) {
                    return Err(Error::Constraint(format!(
                        "total {} ({}) != total {} ({})",
                        names[0],
                        sum(0),
                        names[1],
                        sum(1)
                    )));
                }
                if sum(2) % 2.0 != 0.0 {
                    return Err(Error::Constraint(format!("odd {} sum", names[2])));
                }
            }
            Model::Uecm => {
                for i in 0..self.n() {
                    let (k, s) = (self.vectors[0][i], self.vectors[1][i]);
                    if s < k {
                        return Err(Error::Constraint(format!(
                            "s < k at node {i}: s={s}, k={k}"
                        )));
                    }
                    if (s == 0.0) != (k == 0.0) {
                        return Err(Error::Constraint(format!(
                            "s=0 with k>0 inconsistency at node {i} (k={k}, s={s})"
                        )));
                    }
                }
            }
            Model::Uwcm => {}
        }
        Ok(())
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn n(&self) -> usize {
        self.vectors[0].len()
    }

    /// Constraint vector `a` (in [`Model::constraint_names`] order).
    pub fn vector(&self, a: usize) -> &[f64] {
        &self.vectors[a]
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn value(&self, a: usize, i: usize) -> f64 {
        self.vectors[a][i]
    }

    /// Applies a node relabeling: entry i of the result is entry
    /// `perm[i]` of the original.
    pub fn permuted(&self, perm: &[usize]) -> ConstraintSet {
        let vectors = self
            .vectors
            .iter()
            .map(|v| perm.iter().map(|&p| v[p]).collect())
            .collect();
        ConstraintSet { model: self.model, vectors }
    }

    /// Max over constraints of |observed - expected| / max(observed, 1).
    pub fn max_rel_error(&self, other: &ConstraintSet) -> f64 {
        let mut worst = 0.0f64;
        for (va, vb) in self.vectors.iter().zip(&other.vectors) {
            for (&a, &b) in va.iter().zip(vb) {
                worst = worst.max((a - b).abs() / a.max(1.0));
            }
        }
        worst
    }
}

/// Computes the observed constraints of `g` under `model`.
///
/// Binary models accept weighted graphs only when all entries are <= 1;
/// directed models require directed graphs and vice versa.
pub fn compute_constraints(g: &Graph, model: Model) -> Result<ConstraintSet> {
    if model.directed() != g.directed() {
        return Err(Error::Incompatible(format!(
            "{model} requires a {} graph",
            if model.directed() { "directed" } else { "undirected" }
        )));
    }
    if !model.weighted() && g.entries().iter().any(|&w| w > 1) {
        return Err(Error::Incompatible(format!(
            "{model} is binary but the graph has weights > 1 (pass a binarized graph)"
        )));
    }
    let n = g.n();
    let vectors: Vec<Vec<f64>> = match model {
        Model::Ubcm => vec![g.degrees().iter().map(|&k| k as f64).collect()],
        Model::Uwcm => vec![g.strengths().iter().map(|&s| s as f64).collect()],
        Model::Dbcm => {
            let k_out = (0..n)
                .map(|i| g.row(i).iter().filter(|&&w| w > 0).count() as f64)
                .collect();
            let k_in = (0..n)
                .map(|j| (0..n).filter(|&i| g.entry(i, j) > 0).count() as f64)
                .collect();
            vec![k_out, k_in]
        }
        Model::Dwcm => {
            let s_out = (0..n).map(|i| g.row(i).iter().sum::<u64>() as f64).collect();
            let s_in = (0..n)
                .map(|j| (0..n).map(|i| g.entry(i, j)).sum::<u64>() as f64)
                .collect();
            vec![s_out, s_in]
        }
        Model::Rbcm | Model::Rwcm => {
            let mut right = vec![0.0; n];
            let mut left = vec![0.0; n];
            let mut recip = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let d = reciprocal_decompose(g, i, j)?;
                    if model == Model::Rbcm {
                        right[i] += f64::from(d.right > 0);
                        left[i] += f64::from(d.left > 0);
                        recip[i] += f64::from(d.recip > 0);
                    } else {
                        right[i] += d.right as f64;
                        left[i] += d.left as f64;
                        recip[i] += d.recip as f64;
                    }
                }
            }
            vec![right, left, recip]
        }
        Model::Uecm => {
            let k = g.degrees().iter().map(|&k| k as f64).collect();
            let s = g.strengths().iter().map(|&s| s as f64).collect();
            vec![k, s]
        }
    };
    ConstraintSet::observed(model, vectors)
}
