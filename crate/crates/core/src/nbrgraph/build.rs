use std::collections::{HashMap, VecDeque};

use num_complex::Complex64;

use super::{Edge, GraphError, LabeledDigraph, Vertex};
use crate::similitude::{IfsSpec, Similitude};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BuildOptions {
    /// Upper bound on candidate neighbor maps explored before giving up.
    pub max_vertices: usize,
    /// Added to the `2R` distance bound; `None` means `1e-6 · R`.
    pub prune_slack: Option<f64>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            max_vertices: 10_000,
            prune_slack: None,
        }
    }
}

/// Frontier expansion `h ↦ f_i⁻¹ h f_j` from the identity, followed by sink deletion.
///
/// Candidates are kept when `|h(0)| ≤ 2R + slack`; the surviving vertices are those with an
/// infinite outgoing path among candidates, so geometric intersection is never tested.
/// Vertex numbering follows breadth-first discovery.
pub fn build_neighbor_graph(ifs: &IfsSpec, opts: &BuildOptions) -> Result<LabeledDigraph, GraphError> {
    if opts.max_vertices == 0 {
        return Err(GraphError::Invalid("max_vertices must be at least 1".into()));
    }
    let m = ifs.len();
    let field = ifs.field();
    for f in ifs.maps() {
        f.a().embed_with_precision(field.descriptor().embed_precision.max(1e-9))?;
    }
    let radius = ifs.bounding_radius();
    let bound = 2.0 * radius + opts.prune_slack.unwrap_or(1e-6 * radius);
    // Numeric screening uses a margin far above rounding error; the exact map decides.
    let margin = 1e-9 * (1.0 + bound);

    let maps = ifs.maps();
    let inverses: Vec<Similitude> = maps.iter().map(Similitude::invert).collect();
    let num_maps: Vec<(Complex64, Complex64)> =
        maps.iter().map(|f| (f.a().embed(), f.b().embed())).collect();

    let identity = Similitude::identity(field);
    let mut index: HashMap<Similitude, usize> = HashMap::new();
    index.insert(identity.clone(), 0);
    let mut vertices = vec![identity];
    let mut edges = Vec::new();
    let mut queue = VecDeque::from([0usize]);

    while let Some(src) = queue.pop_front() {
        let h = vertices[src].clone();
        let (ha, hb) = (h.a().embed(), h.b().embed());
        for j in 1..=m {
            let bj = num_maps[j - 1].1;
            let hbj = ha * bj + hb;
            let mut hfj: Option<Similitude> = None;
            for i in 1..=m {
                if src == 0 && i == j {
                    continue;
                }
                let (ai, bi) = num_maps[i - 1];
                let approx = (hbj - bi) / ai;
                if approx.norm() > bound + margin {
                    continue;
                }
                let hfj = hfj.get_or_insert_with(|| h.compose(&maps[j - 1]));
                let cand = inverses[i - 1].compose(hfj);
                if cand.b().embed().norm() > bound {
                    continue;
                }
                let target = match index.get(&cand) {
                    Some(&t) => t,
                    None => {
                        if vertices.len() >= opts.max_vertices {
                            return Err(GraphError::FiniteTypeBudgetExceeded {
                                limit: opts.max_vertices,
                            });
                        }
                        let t = vertices.len();
                        index.insert(cand.clone(), t);
                        vertices.push(cand);
                        queue.push_back(t);
                        t
                    }
                };
                edges.push(Edge {
                    source: src,
                    target,
                    i,
                    j,
                });
            }
        }
    }

    let alive = survivors(vertices.len(), &edges);
    let all = LabeledDigraph::from_parts_unchecked(
        m,
        vertices
            .into_iter()
            .enumerate()
            .map(|(k, h)| Vertex {
                name: if k == 0 { "id".to_string() } else { h.to_string() },
                map: Some(h),
            })
            .collect(),
        edges,
    );
    let mut g = all.induced_subgraph(&alive);
    g.edges.sort();
    Ok(g)
}

/// Iterated deletion of vertices without outgoing edges; vertex 0 is never deleted.
fn survivors(n: usize, edges: &[Edge]) -> Vec<bool> {
    let mut out_degree = vec![0usize; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in edges {
        out_degree[e.source] += 1;
        preds[e.target].push(e.source);
    }
    let mut alive = vec![true; n];
    let mut stack: Vec<usize> = (1..n).filter(|&k| out_degree[k] == 0).collect();
    while let Some(v) = stack.pop() {
        if !alive[v] {
            continue;
        }
        alive[v] = false;
        for &p in &preds[v] {
            out_degree[p] -= 1;
            if p != 0 && out_degree[p] == 0 && alive[p] {
                stack.push(p);
            }
        }
    }
    alive
}
