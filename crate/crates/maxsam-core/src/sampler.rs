//! Unbiased graph sampling from a fitted ensemble.
//!
//! Each sample is drawn pair by pair from the exact pair laws; the
//! random stream of a pair is keyed by (seed, sample index, pair
//! index), so samples regenerate independently and parallel generation
//! is reproducible. Pair indices follow row-major order: `i*n + j` over
//! i < j for the once-per-pair models, and over all ordered pairs for
//! DBCM/DWCM.
//!
//! Accumulators hold integer sums, so merged results are bit-identical
//! for any worker count.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constraints::{compute_constraints, ConstraintSet};
use crate::ensemble::HiddenVariables;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::io::edge_list_string;
use crate::model::Model;
use crate::rng::PairStream;

/// Inverse-transform geometric draw: P(w) = q^w (1-q).
pub fn draw_geometric(q: f64, stream: &mut PairStream) -> Result<u64> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::Domain(format!("geometric parameter {q} outside [0,1)")));
    }
    Ok(geometric_unchecked(q, stream))
}

#[inline]
fn geometric_unchecked(q: f64, stream: &mut PairStream) -> u64 {
    if q <= 0.0 {
        return 0;
    }
    // floor(ln U / ln q) with U in (0,1] inverts the geometric CDF
    let u = stream.uniform_open0();
    let w = (u.ln() / q.ln()).floor();
    if w >= u64::MAX as f64 {
        u64::MAX
    } else {
        w as u64
    }
}

/// Draws the two ordered entries of the pair (i, j) and returns
/// (w_ij, w_ji).
fn draw_pair(model: Model, hv: &HiddenVariables, i: usize, j: usize, s: &mut PairStream) -> (u64, u64) {
    let pi = hv.params(i);
    let pj = hv.params(j);
    match model {
        Model::Ubcm => {
            let t = pi[0] * pj[0];
            let w = u64::from(s.bernoulli(t / (1.0 + t)));
            (w, w)
        }
        Model::Dbcm => {
            let t1 = pi[0] * pj[1];
            let t2 = pj[0] * pi[1];
            let a = u64::from(s.bernoulli(t1 / (1.0 + t1)));
            let b = u64::from(s.bernoulli(t2 / (1.0 + t2)));
            (a, b)
        }
        Model::Rbcm => {
            let (t1, t2, t3) = (pi[0] * pj[1], pj[0] * pi[1], pi[2] * pj[2]);
            let d = 1.0 + t1 + t2 + t3;
            let u = s.uniform() * d;
            if u < t1 {
                (1, 0)
            } else if u < t1 + t2 {
                (0, 1)
            } else if u < t1 + t2 + t3 {
                (1, 1)
            } else {
                (0, 0)
            }
        }
        Model::Uwcm => {
            let w = geometric_unchecked(pi[0] * pj[0], s);
            (w, w)
        }
        Model::Dwcm => {
            let a = geometric_unchecked(pi[0] * pj[1], s);
            let b = geometric_unchecked(pj[0] * pi[1], s);
            (a, b)
        }
        Model::Rwcm => {
            let (a, b, c) = (pi[0] * pj[1], pj[0] * pi[1], pi[2] * pj[2]);
            // step 1: reciprocated weight
            let w_recip = geometric_unchecked(c, s);
            // step 2: which non-reciprocated direction exists, if any
            let ab = a * b;
            let u = s.uniform() * (1.0 - ab);
            let p_none = (1.0 - a) * (1.0 - b);
            let p_right = a * (1.0 - b);
            // step 3: its weight is 1 plus a geometric excess
            let (w_right, w_left) = if u < p_none {
                (0, 0)
            } else if u < p_none + p_right {
                (1 + geometric_unchecked(a, s), 0)
            } else {
                (0, 1 + geometric_unchecked(b, s))
            };
            (w_recip + w_right, w_recip + w_left)
        }
        Model::Uecm => {
            let u = pi[1] * pj[1];
            let v = pi[0] * pj[0];
            let g = 1.0 + u * (v - 1.0);
            let p = v * u / g;
            let w = if s.bernoulli(p) { 1 + geometric_unchecked(u, s) } else { 0 };
            (w, w)
        }
    }
}

/// Draws one graph; `sample_index` addresses the random streams.
pub fn sample_graph(hv: &HiddenVariables, seed: u64, sample_index: u64) -> Result<Graph> {
    hv.validate_domain()?;
    Ok(sample_graph_unchecked(hv, seed, sample_index))
}

fn sample_graph_unchecked(hv: &HiddenVariables, seed: u64, sample_index: u64) -> Graph {
    let model = hv.model();
    let n = hv.n();
    let mut entries = vec![0u64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let mut stream = PairStream::new(seed, sample_index, (i * n + j) as u64);
            let (w_ij, w_ji) = draw_pair(model, hv, i, j, &mut stream);
            entries[i * n + j] = w_ij;
            entries[j * n + i] = w_ji;
        }
    }
    Graph::from_entries(n, model.directed(), model.weighted(), entries)
        .expect("sampled entries satisfy the graph invariants")
}

/// Streaming first/second-moment accumulators over a seeded run of
/// samples. All sums are integers, so results are reproducible
/// byte-for-byte for any thread count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSet {
    pub model: Model,
    pub n: usize,
    pub count: u64,
    pub seed: u64,
    /// per-entry sums of 1[w_ij > 0]
    pub sum_binary: Vec<u64>,
    /// per-entry sums of w_ij (weighted models)
    pub sum_weight: Option<Vec<u64>>,
    /// per-entry sums of w_ij^2 (weighted models)
    pub sum_weight_sq: Option<Vec<u128>>,
    /// per-constraint per-node sums of the sampled constraint values
    pub sum_constraints: Vec<Vec<u64>>,
    /// per-constraint per-node sums of squares
    pub sum_constraints_sq: Vec<Vec<u128>>,
    /// directory samples were written to, when retained
    pub retained_dir: Option<PathBuf>,
}

impl SampleSet {
    fn empty(model: Model, n: usize, count: u64, seed: u64) -> Self {
        let arity = model.arity();
        SampleSet {
            model,
            n,
            count,
            seed,
            sum_binary: vec![0; n * n],
            sum_weight: model.weighted().then(|| vec![0; n * n]),
            sum_weight_sq: model.weighted().then(|| vec![0; n * n]),
            sum_constraints: vec![vec![0; n]; arity],
            sum_constraints_sq: vec![vec![0; n]; arity],
            retained_dir: None,
        }
    }

    fn absorb(&mut self, g: &Graph) {
        let n = self.n;
        for e in 0..n * n {
            let w = g.entries()[e];
            self.sum_binary[e] += u64::from(w > 0);
            if let Some(sw) = self.sum_weight.as_mut() {
                sw[e] += w;
            }
            if let Some(sq) = self.sum_weight_sq.as_mut() {
                sq[e] += u128::from(w) * u128::from(w);
            }
        }
        let c = compute_constraints(g, self.model).expect("sampled graph matches the model kind");
        for a in 0..self.model.arity() {
            for i in 0..n {
                let v = c.value(a, i) as u64;
                self.sum_constraints[a][i] += v;
                self.sum_constraints_sq[a][i] += u128::from(v) * u128::from(v);
            }
        }
    }

    fn merge(&mut self, other: &SampleSet) {
        for (a, b) in self.sum_binary.iter_mut().zip(&other.sum_binary) {
            *a += b;
        }
        if let (Some(a), Some(b)) = (self.sum_weight.as_mut(), other.sum_weight.as_ref()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        if let (Some(a), Some(b)) = (self.sum_weight_sq.as_mut(), other.sum_weight_sq.as_ref()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for a in 0..self.sum_constraints.len() {
            for i in 0..self.n {
                self.sum_constraints[a][i] += other.sum_constraints[a][i];
                self.sum_constraints_sq[a][i] += other.sum_constraints_sq[a][i];
            }
        }
    }

    /// Sample mean of 1[w_ij > 0].
    pub fn mean_binary(&self, i: usize, j: usize) -> f64 {
        self.sum_binary[i * self.n + j] as f64 / self.count as f64
    }

    /// Sample mean of w_ij (equals `mean_binary` for binary models).
    pub fn mean_weight(&self, i: usize, j: usize) -> f64 {
        match &self.sum_weight {
            Some(sw) => sw[i * self.n + j] as f64 / self.count as f64,
            None => self.mean_binary(i, j),
        }
    }

    /// Per-node sample mean of constraint `a`.
    pub fn constraint_mean(&self, a: usize, i: usize) -> f64 {
        self.sum_constraints[a][i] as f64 / self.count as f64
    }

    /// Per-node unbiased sample variance of constraint `a`.
    pub fn constraint_variance(&self, a: usize, i: usize) -> f64 {
        let m = self.count as f64;
        if m < 2.0 {
            return 0.0;
        }
        let sum = self.sum_constraints[a][i] as f64;
        let sq = self.sum_constraints_sq[a][i] as f64;
        ((sq - sum * sum / m) / (m - 1.0)).max(0.0)
    }
}

/// Sidecar metadata written next to retained samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleManifest {
    pub model: Model,
    pub n: usize,
    pub count: u64,
    pub seed: u64,
    /// sha256 of the parameter file the samples were drawn from
    pub hv_hash: String,
}

/// sha256 of the canonical JSON serialization of the parameters.
pub fn hv_hash(hv: &HiddenVariables) -> String {
    let bytes = serde_json::to_vec(hv).expect("parameters serialize");
    format!("sha256:{:x}", Sha256::digest(&bytes))
}

/// Draws `count` independent samples and accumulates their moments.
/// With `retain`, each graph is written to
/// `<dir>/samples/<index>.tsv` and a `manifest.json` is emitted.
pub fn sample_ensemble(
    hv: &HiddenVariables,
    count: u64,
    seed: u64,
    retain: Option<&Path>,
) -> Result<SampleSet> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    hv.validate_domain()?;
    let model = hv.model();
    let n = hv.n();

    let samples_dir = match retain {
        Some(dir) => {
            let d = dir.join("samples");
            fs::create_dir_all(&d)?;
            Some(d)
        }
        None => None,
    };

    let width = (count.max(1) - 1).to_string().len().max(4);
    // deterministic merge: chunk results are reduced in index order
    let chunk = 64u64;
    let starts: Vec<u64> = (0..count).step_by(chunk as usize).collect();
    let partials: Vec<Result<SampleSet>> = starts
        .par_iter()
        .map(|&start| {
            let stop = (start + chunk).min(count);
            let mut acc = SampleSet::empty(model, n, count, seed);
            for idx in start..stop {
                let g = sample_graph_unchecked(hv, seed, idx);
                acc.absorb(&g);
                if let Some(dir) = &samples_dir {
                    let path = dir.join(format!("{idx:0width$}.tsv"));
                    fs::write(&path, edge_list_string(&g))?;
                }
            }
            Ok(acc)
        })
        .collect();

    let mut set = SampleSet::empty(model, n, count, seed);
    for partial in partials {
        set.merge(&partial?);
    }
    if let Some(dir) = retain {
        let manifest = SampleManifest { model, n, count, seed, hv_hash: hv_hash(hv) };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        set.retained_dir = Some(dir.to_path_buf());
    }
    Ok(set)
}

/// Recomputes per-sample graphs of a seeded run, in sample order,
/// feeding each to `f`. The regeneration is exact because streams are
/// keyed by sample index.
pub fn for_each_sample<F: FnMut(u64, &Graph)>(
    hv: &HiddenVariables,
    count: u64,
    seed: u64,
    mut f: F,
) -> Result<()> {
    hv.validate_domain()?;
    for idx in 0..count {
        let g = sample_graph_unchecked(hv, seed, idx);
        f(idx, &g);
    }
    Ok(())
}

/// Parallel map over the samples of a seeded run; results are in
/// sample order.
pub fn map_samples<T: Send, F: Fn(u64, &Graph) -> T + Sync>(
    hv: &HiddenVariables,
    count: u64,
    seed: u64,
    f: F,
) -> Result<Vec<T>> {
    hv.validate_domain()?;
    Ok((0..count)
        .into_par_iter()
        .map(|idx| f(idx, &sample_graph_unchecked(hv, seed, idx)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve, SolveOptions};

    #[test]
    fn geometric_rejects_bad_parameter() {
        let mut s = PairStream::new(1, 0, 0);
        assert!(draw_geometric(1.0, &mut s).is_err());
        assert!(draw_geometric(-0.1, &mut s).is_err());
        assert_eq!(draw_geometric(0.0, &mut s).unwrap(), 0);
    }

    #[test]
    fn geometric_monte_carlo_moments() {
        let mut s = PairStream::new(99, 0, 0);
        let m = 1_000_000u64;
        let (mut sum, mut sq) = (0.0f64, 0.0f64);
        for _ in 0..m {
            let w = draw_geometric(0.5, &mut s).unwrap() as f64;
            sum += w;
            sq += w * w;
        }
        let mean = sum / m as f64;
        let var = sq / m as f64 - mean * mean;
        // q/(1-q) = 1 and q/(1-q)^2 = 2, 4-sigma Monte Carlo bands
        let se_mean = (2.0f64 / m as f64).sqrt();
        assert!((mean - 1.0).abs() < 4.0 * se_mean, "mean {mean}");
        assert!((var - 2.0).abs() < 0.03, "var {var}");
    }

    #[test]
    fn deterministic_ensemble_is_exact() {
        // k = (1,1,2) saturates: the sampled graph is always the path
        let c = ConstraintSet::observed(Model::Ubcm, vec![vec![1.0, 1.0, 2.0]]).unwrap();
        let (hv, _) = solve(&c, &SolveOptions::default()).unwrap();
        for idx in 0..20 {
            let g = sample_graph(&hv, 5, idx).unwrap();
            assert_eq!(g.entry(0, 2), 1);
            assert_eq!(g.entry(1, 2), 1);
            assert_eq!(g.entry(0, 1), 0);
        }
    }

    #[test]
    fn rbcm_draws_pairs_jointly() {
        let hv = HiddenVariables::new(
            Model::Rbcm,
            vec![0.8, 0.5, 0.9],
            vec![0.4, 0.7, 0.6],
            vec![0.9, 0.3, 0.5],
        )
        .unwrap();
        for idx in 0..50 {
            let g = sample_graph(&hv, 11, idx).unwrap();
            let rb = compute_constraints(&g, Model::Rbcm).unwrap();
            let db = compute_constraints(&g, Model::Dbcm).unwrap();
            for i in 0..3 {
                assert_eq!(rb.value(0, i) + rb.value(2, i), db.value(0, i));
                assert_eq!(rb.value(1, i) + rb.value(2, i), db.value(1, i));
            }
        }
    }

    #[test]
    fn rwcm_no_nonreciprocated_direction_when_ab_zero() {
        // a = b = 0, c = 0.49: only mutual weight appears
        let hv = HiddenVariables::new(
            Model::Rwcm,
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![0.7, 0.7],
        )
        .unwrap();
        let mut saw_recip = false;
        for idx in 0..200 {
            let g = sample_graph(&hv, 3, idx).unwrap();
            assert_eq!(g.entry(0, 1), g.entry(1, 0));
            saw_recip |= g.entry(0, 1) > 0;
        }
        assert!(saw_recip);
    }

    #[test]
    fn rwcm_exclusive_directions() {
        let hv = HiddenVariables::new(
            Model::Rwcm,
            vec![0.8, 0.6],
            vec![0.7, 0.9],
            vec![0.5, 0.5],
        )
        .unwrap();
        for idx in 0..300 {
            let g = sample_graph(&hv, 8, idx).unwrap();
            let d = crate::graph::reciprocal_decompose(&g, 0, 1).unwrap();
            assert_eq!(d.right * d.left, 0);
        }
    }

    #[test]
    fn sample_set_reproducible() {
        let hv = HiddenVariables::new(Model::Uwcm, vec![0.4, 0.6, 0.5], vec![], vec![]).unwrap();
        let a = sample_ensemble(&hv, 200, 77, None).unwrap();
        let b = sample_ensemble(&hv, 200, 77, None).unwrap();
        assert_eq!(a, b);
        let c = sample_ensemble(&hv, 200, 78, None).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn retained_layout() {
        let hv = HiddenVariables::new(Model::Ubcm, vec![1.0, 1.0], vec![], vec![]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let set = sample_ensemble(&hv, 3, 1, Some(dir.path())).unwrap();
        assert!(dir.path().join("manifest.json").is_file());
        for idx in 0..3 {
            assert!(dir.path().join("samples").join(format!("{idx:04}.tsv")).is_file());
        }
        assert_eq!(set.retained_dir.as_deref(), Some(dir.path()));
        let manifest: SampleManifest =
            serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
                .unwrap();
        assert_eq!(manifest.count, 3);
        assert_eq!(manifest.hv_hash, hv_hash(&hv));
    }

    #[test]
    fn uecm_symmetric_monte_carlo() {
        // p = q = 1/2 per pair: mean a -> 0.5, mean w -> 1
        let y = 0.5f64.sqrt();
        let hv = HiddenVariables::new(Model::Uecm, vec![1.0; 3], vec![y; 3], vec![]).unwrap();
        let m = 100_000u64;
        let set = sample_ensemble(&hv, m, 4, None).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let se_a = (0.25f64 / m as f64).sqrt();
                assert!((set.mean_binary(i, j) - 0.5).abs() < 4.0 * se_a);
                // Var(w) = p(1+q-p)/(1-q)^2 = 2
                let se_w = (2.0f64 / m as f64).sqrt();
                assert!((set.mean_weight(i, j) - 1.0).abs() < 4.0 * se_w);
            }
        }
    }
}
