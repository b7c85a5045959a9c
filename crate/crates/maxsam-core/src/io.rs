//! File ingestion: matrix grids, edge lists and constraint columns.
//!
//! All formats are line-oriented with `#` comment lines. Weights are
//! non-negative integers; real-valued input is rejected, not rounded.

use std::collections::HashMap;

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::Model;

/// Result of parsing an edge list: the graph, plus the label -> dense
/// id mapping when the file used non-numeric node labels.
#[derive(Debug, Clone)]
pub struct ParsedEdgeList {
    pub graph: Graph,
    /// Dense id -> original label, in first-appearance order. None when
    /// the file used numeric ids directly.
    pub labels: Option<Vec<String>>,
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_weight(tok: &str, line: usize) -> Result<u64> {
    // accept integral floats like "3.0" but reject "3.5"
    if let Ok(v) = tok.parse::<u64>() {
        return Ok(v);
    }
    if let Ok(f) = tok.parse::<f64>() {
        if f.fract() == 0.0 && f >= 0.0 && f <= u64::MAX as f64 {
            return Ok(f as u64);
        }
        let reason = if f < 0.0 { "negative" } else { "non-integer" };
        return Err(Error::Parse { line, message: format!("{reason} entry '{tok}'") });
    }
    Err(Error::Parse { line, message: format!("invalid numeric entry '{tok}'") })
}

/// Parses a comma- or whitespace-separated numeric grid into a graph.
pub fn parse_matrix(text: &str, directed: bool, weighted: bool) -> Result<Graph> {
    let mut rows: Vec<Vec<u64>> = Vec::new();
    for (line, l) in data_lines(text) {
        let row: Vec<u64> = l
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| parse_weight(t, line))
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::Parse { line: 0, message: "empty matrix".into() });
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != n) {
        return Err(Error::Parse {
            line: bad + 1,
            message: format!("non-square matrix: row has {} columns, expected {n}", rows[bad].len()),
        });
    }
    Graph::from_entries(n, directed, weighted, rows.concat())
}

/// Parses `src dst [weight]` lines (tab or space separated).
///
/// Numeric node ids are used directly (with `n` fixing the node count,
/// or max id + 1 when `n` is None). Non-numeric tokens are treated as
/// labels and mapped to dense ids in first-appearance order. Undirected
/// edges may be listed once, or in both orientations with equal weight.
pub fn parse_edge_list(
    text: &str,
    n: Option<usize>,
    directed: bool,
    weighted: bool,
) -> Result<ParsedEdgeList> {
    let mut raw: Vec<(usize, String, String, u64)> = Vec::new();
    let mut all_numeric = true;
    for (line, l) in data_lines(text) {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() < 2 || toks.len() > 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 'src dst [weight]', got {} fields", toks.len()),
            });
        }
        let w = match toks.get(2) {
            Some(t) => parse_weight(t, line)?,
            None if weighted => {
                return Err(Error::Parse { line, message: "missing weight column".into() })
            }
            None => 1,
        };
        if w == 0 {
            return Err(Error::Parse { line, message: "weight must be positive".into() });
        }
        all_numeric &= toks[0].parse::<usize>().is_ok() && toks[1].parse::<usize>().is_ok();
        raw.push((line, toks[0].to_string(), toks[1].to_string(), w));
    }

    let mut labels: Option<Vec<String>> = None;
    let ids: Vec<(usize, usize, usize, u64)> = if all_numeric {
        raw.iter()
            .map(|(line, s, d, w)| (*line, s.parse().unwrap(), d.parse().unwrap(), *w))
            .collect()
    } else {
        let mut map: HashMap<String, usize> = HashMap::new();
        let mut order: Vec<String> = Vec::new();
        let mut resolve = |tok: &str| -> usize {
            *map.entry(tok.to_string()).or_insert_with(|| {
                order.push(tok.to_string());
                order.len() - 1
            })
        };
        let out = raw
            .iter()
            .map(|(line, s, d, w)| (*line, resolve(s), resolve(d), *w))
            .collect();
        labels = Some(order);
        out
    };

    let n = match n {
        Some(n) => n,
        None => ids.iter().map(|&(_, s, d, _)| s.max(d) + 1).max().unwrap_or(0),
    };
    let mut entries = vec![0u64; n * n];
    let mut seen: HashMap<(usize, usize), u64> = HashMap::new();
    for (line, src, dst, w) in ids {
        if src >= n || dst >= n {
            return Err(Error::Parse {
                line,
                message: format!("node id out of range: ({src},{dst}) with n={n}"),
            });
        }
        if src == dst {
            return Err(Error::Parse { line, message: format!("self-loop at node {src}") });
        }
        let key = if directed || src < dst { (src, dst) } else { (dst, src) };
        if let Some(&prev) = seen.get(&key) {
            // undirected lists may repeat an edge in the mirrored
            // orientation with equal weight; anything else is a duplicate
            if !directed && prev == w {
                continue;
            }
            return Err(Error::Parse {
                line,
                message: format!("duplicate edge ({src},{dst})"),
            });
        }
        seen.insert(key, w);
        entries[src * n + dst] = w;
        if !directed {
            entries[dst * n + src] = w;
        }
    }
    let graph = Graph::from_entries(n, directed, weighted, entries)?;
    Ok(ParsedEdgeList { graph, labels })
}

/// Parses whitespace-separated constraint columns, one node per line,
/// in the model's vector order.
pub fn parse_constraint_file(text: &str, model: Model) -> Result<ConstraintSet> {
    let arity = model.arity();
    let mut vectors: Vec<Vec<f64>> = vec![Vec::new(); arity];
    for (line, l) in data_lines(text) {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != arity {
            return Err(Error::Parse {
                line,
                message: format!(
                    "{model} expects {arity} column(s) ({}), got {}",
                    model.constraint_names().join(" "),
                    toks.len()
                ),
            });
        }
        for (a, t) in toks.iter().enumerate() {
            vectors[a].push(parse_weight(t, line)? as f64);
        }
    }
    if vectors[0].is_empty() {
        return Err(Error::Parse { line: 0, message: "empty constraint file".into() });
    }
    ConstraintSet::observed(model, vectors)
}

/// Serializes a graph as `src<TAB>dst<TAB>weight` lines (unordered
/// pairs i<j for undirected graphs, ordered pairs otherwise).
pub fn edge_list_string(g: &Graph) -> String {
    let mut out = String::new();
    let n = g.n();
    for i in 0..n {
        let start = if g.directed() { 0 } else { i + 1 };
        for j in start..n {
            if i == j {
                continue;
            }
            let w = g.entry(i, j);
            if w > 0 {
                out.push_str(&format!("{i}\t{j}\t{w}\n"));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_path_graph() {
        let g = parse_matrix("0 1 0\n1 0 1\n0 1 0\n", false, false).unwrap();
        assert_eq!(g.degrees(), vec![1, 2, 1]);
    }

    #[test]
    fn matrix_comments_and_commas() {
        let g = parse_matrix("# a path\n0,1,0\n1,0,1\n0,1,0\n", false, false).unwrap();
        assert_eq!(g.degrees(), vec![1, 2, 1]);
    }

    #[test]
    fn matrix_rejects_self_loop() {
        let err = parse_matrix("1 0\n0 0\n", false, false).unwrap_err().to_string();
        assert!(err.contains("self-loop"), "{err}");
    }

    #[test]
    fn matrix_rejects_asymmetry_when_undirected() {
        let err = parse_matrix("0 1\n0 0\n", false, false).unwrap_err().to_string();
        assert!(err.to_lowercase().contains("asymmetric"), "{err}");
    }

    #[test]
    fn matrix_rejects_non_square_and_fraction() {
        assert!(parse_matrix("0 1 0\n1 0 1\n", false, false).is_err());
        assert!(parse_matrix("0 1.5\n1.5 0\n", false, true).is_err());
    }

    #[test]
    fn edge_list_path() {
        let p = parse_edge_list("0\t1\t1\n1\t2\t1\n", Some(3), false, false).unwrap();
        assert_eq!(p.graph.degrees(), vec![1, 2, 1]);
        assert!(p.labels.is_none());
    }

    #[test]
    fn edge_list_directed_weighted() {
        let p = parse_edge_list("0 1 2\n1 0 3\n", Some(2), true, true).unwrap();
        assert_eq!(p.graph.entry(0, 1), 2);
        assert_eq!(p.graph.entry(1, 0), 3);
    }

    #[test]
    fn edge_list_errors() {
        assert!(parse_edge_list("2 2 1\n", Some(3), false, false)
            .unwrap_err()
            .to_string()
            .contains("self-loop"));
        assert!(parse_edge_list("0 5 1\n", Some(3), false, false).is_err());
        assert!(parse_edge_list("0 1 0\n", Some(2), false, true).is_err());
        // duplicate row
        assert!(parse_edge_list("0 1 1\n0 1 1\n", Some(2), false, false).is_err());
        // mirrored orientation, equal weight: deduplicated
        let p = parse_edge_list("0 1 2\n1 0 2\n", Some(2), false, true).unwrap();
        assert_eq!(p.graph.entry(0, 1), 2);
        // mirrored orientation, unequal weight: error
        assert!(parse_edge_list("0 1 2\n1 0 3\n", Some(2), false, true).is_err());
    }

    #[test]
    fn edge_list_labels_first_appearance() {
        let p = parse_edge_list("alice bob 2\nbob carol 1\n", None, false, true).unwrap();
        assert_eq!(p.labels.as_deref().unwrap(), ["alice", "bob", "carol"]);
        assert_eq!(p.graph.strengths(), vec![2, 3, 1]);
    }

    #[test]
    fn constraint_columns() {
        let c = parse_constraint_file("1\n2\n1\n", Model::Ubcm).unwrap();
        assert_eq!(c.vector(0), &[1.0, 2.0, 1.0]);
        let err = parse_constraint_file("1\n1\n1\n", Model::Ubcm).unwrap_err().to_string();
        assert!(err.contains("odd degree sum"), "{err}");
        assert!(parse_constraint_file("1 2\n1\n", Model::Ubcm).is_err());
        let err = parse_constraint_file("1 0\n1 2\n", Model::Uecm).unwrap_err().to_string();
        assert!(err.contains("node 0"), "{err}");
    }

    /// Edge-list and matrix forms of the same graph produce identical
    /// constraints.
    #[test]
    fn parse_round_trip_consistency() {
        let list = parse_edge_list("0 1 2\n1 2 1\n0 3 5\n", Some(4), false, true).unwrap();
        let mat = parse_matrix("0 2 0 5\n2 0 1 0\n0 1 0 0\n5 0 0 0\n", false, true).unwrap();
        assert_eq!(list.graph, mat);
        for model in [Model::Uwcm, Model::Uecm] {
            let a = crate::constraints::compute_constraints(&list.graph, model).unwrap();
            let b = crate::constraints::compute_constraints(&mat, model).unwrap();
            assert_eq!(a, b);
        }
        // serialization round trip
        let again =
            parse_edge_list(&edge_list_string(&mat), Some(4), false, true).unwrap();
        assert_eq!(again.graph, mat);
    }
}
