//! Closed-form per-pair means, covariances, log-normalizations and
//! matrix entries, as functions of the two nodes' parameter triples.
//!
//! Conventions for one unordered pair (i, j):
//! - constraint slots are indexed in [`Model::constraint_names`] order;
//! - the pair's random contribution to node i's slot `a` and node j's
//!   slot `b` has covariance `cov[a][3 + b]`;
//! - `ln_z` is the pair's log partition function, so the log-likelihood
//!   is `sum_a,i obs[a][i] ln(param[a][i]) - sum_{i<j} ln_z`.
//!
//! Directed-independent models (DBCM, DWCM) bundle both link directions
//! of the pair into one term.

use crate::model::Model;

/// Parameter triple of a node; unused slots are zero.
pub(crate) type Params = [f64; 3];

#[derive(Debug, Clone, Copy)]
pub(crate) struct PairMeans {
    pub mean_i: [f64; 3],
    pub mean_j: [f64; 3],
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PairMoments {
    pub means: PairMeans,
    /// Covariance of (contrib_i[0..3], contrib_j[0..3]).
    pub cov: [[f64; 6]; 6],
}

/// Connection probabilities and expected weights of the two ordered
/// entries of the pair. `w` entries are meaningful for weighted models
/// only.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PairEntries {
    pub p_ij: f64,
    pub p_ji: f64,
    pub w_ij: f64,
    pub w_ji: f64,
}

#[inline]
fn geometric_mean_var(q: f64) -> (f64, f64) {
    let m = q / (1.0 - q);
    (m, m / (1.0 - q))
}

/// Log partition function of the pair.
pub(crate) fn pair_ln_z(model: Model, pi: Params, pj: Params) -> f64 {
    match model {
        Model::Ubcm => (pi[0] * pj[0]).ln_1p(),
        Model::Dbcm => (pi[0] * pj[1]).ln_1p() + (pj[0] * pi[1]).ln_1p(),
        Model::Rbcm => (pi[0] * pj[1] + pj[0] * pi[1] + pi[2] * pj[2]).ln_1p(),
        Model::Uwcm => -(-pi[0] * pj[0]).ln_1p(),
        Model::Dwcm => -(-pi[0] * pj[1]).ln_1p() - (-pj[0] * pi[1]).ln_1p(),
        Model::Rwcm => {
            let (a, b, c) = (pi[0] * pj[1], pj[0] * pi[1], pi[2] * pj[2]);
            (-a * b).ln_1p() - (-a).ln_1p() - (-b).ln_1p() - (-c).ln_1p()
        }
        Model::Uecm => {
            let u = pi[1] * pj[1];
            let v = pi[0] * pj[0];
            // G = 1 - u + v u, written for accuracy near u -> 0
            (u * (v - 1.0)).ln_1p() - (-u).ln_1p()
        }
    }
}

/// Expected pair contributions to the two nodes' constraints.
pub(crate) fn pair_means(model: Model, pi: Params, pj: Params) -> PairMeans {
    let mut mi = [0.0; 3];
    let mut mj = [0.0; 3];
    match model {
        Model::Ubcm => {
            let t = pi[0] * pj[0];
            let p = t / (1.0 + t);
            mi[0] = p;
            mj[0] = p;
        }
        Model::Dbcm => {
            let t1 = pi[0] * pj[1];
            let t2 = pj[0] * pi[1];
            let p1 = t1 / (1.0 + t1);
            let p2 = t2 / (1.0 + t2);
            mi = [p1, p2, 0.0];
            mj = [p2, p1, 0.0];
        }
        Model::Rbcm => {
            let (t1, t2, t3) = (pi[0] * pj[1], pj[0] * pi[1], pi[2] * pj[2]);
            let d = 1.0 + t1 + t2 + t3;
            mi = [t1 / d, t2 / d, t3 / d];
            mj = [t2 / d, t1 / d, t3 / d];
        }
        Model::Uwcm => {
            let (m, _) = geometric_mean_var(pi[0] * pj[0]);
            mi[0] = m;
            mj[0] = m;
        }
        Model::Dwcm => {
            let (m1, _) = geometric_mean_var(pi[0] * pj[1]);
            let (m2, _) = geometric_mean_var(pj[0] * pi[1]);
            mi = [m1, m2, 0.0];
            mj = [m2, m1, 0.0];
        }
        Model::Rwcm => {
            let (a, b, c) = (pi[0] * pj[1], pj[0] * pi[1], pi[2] * pj[2]);
            let ab = a * b;
            let m_right = a * (1.0 - b) / ((1.0 - a) * (1.0 - ab));
            let m_left = b * (1.0 - a) / ((1.0 - b) * (1.0 - ab));
            let (m_recip, _) = geometric_mean_var(c);
            mi = [m_right, m_left, m_recip];
            mj = [m_left, m_right, m_recip];
        }
        Model::Uecm => {
            let u = pi[1] * pj[1];
            let g = 1.0 + u * (pi[0] * pj[0] - 1.0);
            let p = pi[0] * pj[0] * u / g;
            mi = [p, p / (1.0 - u), 0.0];
            mj = mi;
        }
    }
    PairMeans { mean_i: mi, mean_j: mj }
}

/// Means plus the full covariance block of the pair contribution.
pub(crate) fn pair_moments(model: Model, pi: Params, pj: Params) -> PairMoments {
    let means = pair_means(model, pi, pj);
    let mut cov = [[0.0; 6]; 6];
    // spread Var(source) over every (slot, slot) pair fed by the same
    // underlying random variable
    let mut add = |slots: &[usize], var: f64| {
        for &s in slots {
            for &t in slots {
                cov[s][t] += var;
            }
        }
    };
    match model {
        Model::Ubcm => {
            let p = means.mean_i[0];
            add(&[0, 3], p * (1.0 - p));
        }
        Model::Dbcm => {
            let p1 = means.mean_i[0];
            let p2 = means.mean_i[1];
            add(&[0, 4], p1 * (1.0 - p1)); // i.out and j.in share a_ij
            add(&[3, 1], p2 * (1.0 - p2)); // j.out and i.in share a_ji
        }
        Model::Rbcm => {
            // multinomial over the three link outcomes
            let p = [means.mean_i[0], means.mean_i[1], means.mean_i[2]];
            // slot -> outcome index: i.(right,left,recip), j.(right,left,recip)
            let outcome = [0usize, 1, 2, 1, 0, 2];
            for (s, &os) in outcome.iter().enumerate() {
                for (t, &ot) in outcome.iter().enumerate() {
                    let c = if os == ot { p[os] * (1.0 - p[os]) } else { -p[os] * p[ot] };
                    cov[s][t] = c;
                }
            }
        }
        Model::Uwcm => {
            let (_, v) = geometric_mean_var(pi[0] * pj[0]);
            add(&[0, 3], v);
        }
        Model::Dwcm => {
            let (_, v1) = geometric_mean_var(pi[0] * pj[1]);
            let (_, v2) = geometric_mean_var(pj[0] * pi[1]);
            add(&[0, 4], v1);
            add(&[3, 1], v2);
        }
        Model::Rwcm => {
            let (a, b, c) = (pi[0] * pj[1], pj[0] * pi[1], pi[2] * pj[2]);
            let ab = a * b;
            let d2 = (1.0 - ab) * (1.0 - ab);
            let v_right = a * (1.0 - b) * (1.0 - a * ab) / ((1.0 - a) * (1.0 - a) * d2);
            let v_left = b * (1.0 - a) * (1.0 - b * ab) / ((1.0 - b) * (1.0 - b) * d2);
            // the two non-reciprocated weights exclude each other
            let c_rl = -ab / d2;
            let (_, v_recip) = geometric_mean_var(c);
            let base = [
                [v_right, c_rl, 0.0],
                [c_rl, v_left, 0.0],
                [0.0, 0.0, v_recip],
            ];
            // slot -> source: i.(right,left,recip) = (W>, W<, W=),
            // j.(right,left,recip) = (W<, W>, W=)
            let source = [0usize, 1, 2, 1, 0, 2];
            for (s, &vs) in source.iter().enumerate() {
                for (t, &vt) in source.iter().enumerate() {
                    cov[s][t] = base[vs][vt];
                }
            }
        }
        Model::Uecm => {
            let u = pi[1] * pj[1];
            let p = means.mean_i[0];
            let w = means.mean_i[1];
            let v_theta = p * (1.0 - p);
            let v_w = p * (1.0 + u - p) / ((1.0 - u) * (1.0 - u));
            let c_tw = (1.0 - p) * w;
            let base = [[v_theta, c_tw], [c_tw, v_w]];
            let source = [0usize, 1, 0, 0, 1, 0]; // slot 2 unused
            for s in [0usize, 1, 3, 4] {
                for t in [0usize, 1, 3, 4] {
                    cov[s][t] = base[source[s]][source[t]];
                }
            }
        }
    }
    PairMoments { means, cov }
}

/// Ordered-entry connection probabilities and expected weights.
pub(crate) fn pair_entries(model: Model, pi: Params, pj: Params) -> PairEntries {
    match model {
        Model::Ubcm | Model::Dbcm | Model::Rbcm => {
            let m = pair_means(model, pi, pj);
            let (p_ij, p_ji) = match model {
                Model::Ubcm => (m.mean_i[0], m.mean_i[0]),
                Model::Dbcm => (m.mean_i[0], m.mean_i[1]),
                // entry (i,j) is occupied by a right or a mutual link
                _ => (m.mean_i[0] + m.mean_i[2], m.mean_i[1] + m.mean_i[2]),
            };
            PairEntries { p_ij, p_ji, w_ij: p_ij, w_ji: p_ji }
        }
        Model::Uwcm => {
            let q = pi[0] * pj[0];
            let (m, _) = geometric_mean_var(q);
            PairEntries { p_ij: q, p_ji: q, w_ij: m, w_ji: m }
        }
        Model::Dwcm => {
            let q1 = pi[0] * pj[1];
            let q2 = pj[0] * pi[1];
            PairEntries {
                p_ij: q1,
                p_ji: q2,
                w_ij: geometric_mean_var(q1).0,
                w_ji: geometric_mean_var(q2).0,
            }
        }
        Model::Rwcm => {
            let (a, b, c) = (pi[0] * pj[1], pj[0] * pi[1], pi[2] * pj[2]);
            let ab = a * b;
            let m = pair_means(model, pi, pj);
            PairEntries {
                // w_ij = 0 needs no mutual weight and no i->j single link
                p_ij: 1.0 - (1.0 - c) * (1.0 - a) / (1.0 - ab),
                p_ji: 1.0 - (1.0 - c) * (1.0 - b) / (1.0 - ab),
                w_ij: m.mean_i[0] + m.mean_i[2],
                w_ji: m.mean_i[1] + m.mean_i[2],
            }
        }
        Model::Uecm => {
            let m = pair_means(model, pi, pj);
            PairEntries { p_ij: m.mean_i[0], p_ji: m.mean_i[0], w_ij: m.mean_i[1], w_ji: m.mean_i[1] }
        }
    }
}

/// Largest pair product the model's parameter domain bounds by 1
/// (0 for the binary models, which have no product constraint).
pub(crate) fn max_pair_product(model: Model, pi: Params, pj: Params) -> f64 {
    match model {
        Model::Ubcm | Model::Dbcm | Model::Rbcm => 0.0,
        Model::Uwcm => pi[0] * pj[0],
        Model::Dwcm => (pi[0] * pj[1]).max(pj[0] * pi[1]),
        Model::Rwcm => (pi[0] * pj[1]).max(pj[0] * pi[1]).max(pi[2] * pj[2]),
        Model::Uecm => pi[1] * pj[1],
    }
}

/// Per-pair product constraint violation: the offending product, if any.
pub(crate) fn domain_violation(model: Model, pi: Params, pj: Params) -> Option<f64> {
    let p = max_pair_product(model, pi, pj);
    (p >= 1.0).then_some(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ALL_MODELS;

    fn params_for(model: Model, base: (f64, f64, f64)) -> Params {
        match model.arity() {
            1 => [base.0, 0.0, 0.0],
            2 => [base.0, base.1, 0.0],
            _ => [base.0, base.1, base.2],
        }
    }

    /// Within-pair covariance blocks are symmetric and the i/j means are
    /// consistent with the slot swap conventions.
    #[test]
    fn block_symmetry() {
        for model in ALL_MODELS {
            let pi = params_for(model, (0.5, 0.3, 0.4));
            let pj = params_for(model, (0.7, 0.2, 0.6));
            let m = pair_moments(model, pi, pj);
            for s in 0..6 {
                for t in 0..6 {
                    assert!(
                        (m.cov[s][t] - m.cov[t][s]).abs() < 1e-14,
                        "{model} cov asymmetric at ({s},{t})"
                    );
                }
            }
            let swapped = pair_moments(model, pj, pi);
            for a in 0..3 {
                assert!((m.means.mean_i[a] - swapped.means.mean_j[a]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rwcm_exclusive_weights_anticorrelate() {
        let pi = [0.8, 0.5, 0.3];
        let pj = [0.6, 0.9, 0.5];
        let m = pair_moments(Model::Rwcm, pi, pj);
        // cov(W>, W<) = -<W>><W<>
        let expect = -(m.means.mean_i[0] * m.means.mean_i[1]);
        assert!((m.cov[0][1] - expect).abs() < 1e-12);
        // reciprocated weight independent of the others
        assert_eq!(m.cov[0][2], 0.0);
    }
}
