//! Neighbor graphs and overlap graphs.
//!
//! Vertices are neighbor maps `h = f⁻¹g`; an edge `h → f_i⁻¹ h f_j` carries the label `(i, j)`.
//! Vertex 0 is always the identity. The overlap graph keeps the vertices from which the
//! identity can be reached again, i.e. the relative positions that contain a complete overlap.

mod build;
mod closure;

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{AlgebraError, FieldDescriptor, NumberField};
use crate::similitude::{MapSpec, Similitude};

pub use build::{build_neighbor_graph, BuildOptions};
pub use closure::{reachability_closure, BoolMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("more than {limit} candidate neighbor maps; the IFS may not be of finite type")]
    FiniteTypeBudgetExceeded { limit: usize },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("invalid quotient: {0}")]
    InvalidQuotient(String),
    #[error("invalid graph: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vertex {
    pub name: String,
    /// The neighbor map, absent for graphs given without an IFS.
    pub map: Option<Similitude>,
}

/// Edge `source → target` with label `(i, j)`, labels 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub i: usize,
    pub j: usize,
}

/// Directed graph on neighbor maps with `(i, j)`-labelled edges; vertex 0 is the identity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledDigraph {
    m: usize,
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
}

impl LabeledDigraph {
    /// Validates labels and endpoints. Edges are sorted and deduplicated.
    pub fn new(m: usize, vertices: Vec<Vertex>, mut edges: Vec<Edge>) -> Result<Self, GraphError> {
        if vertices.is_empty() {
            return Err(GraphError::Invalid("graph needs the identity vertex".into()));
        }
        if m == 0 {
            return Err(GraphError::Invalid("map count must be positive".into()));
        }
        if let Some(Some(h)) = vertices.first().map(|v| v.map.as_ref()) {
            if !h.is_identity() {
                return Err(GraphError::Invalid("vertex 0 must be the identity map".into()));
            }
        }
        let n = vertices.len();
        for e in &edges {
            if e.source >= n || e.target >= n {
                return Err(GraphError::Invalid(format!("edge {e:?} has an endpoint out of range")));
            }
            if !(1..=m).contains(&e.i) || !(1..=m).contains(&e.j) {
                return Err(GraphError::Invalid(format!("edge {e:?} has a label outside 1..={m}")));
            }
        }
        let mut seen = HashMap::new();
        for (k, v) in vertices.iter().enumerate() {
            if let Some(h) = &v.map {
                if let Some(prev) = seen.insert(h, k) {
                    return Err(GraphError::Invalid(format!(
                        "vertices {prev} and {k} carry the same map {h}"
                    )));
                }
            }
        }
        edges.sort();
        edges.dedup();
        Ok(LabeledDigraph { m, vertices, edges })
    }

    pub(crate) fn from_parts_unchecked(m: usize, vertices: Vec<Vertex>, edges: Vec<Edge>) -> Self {
        LabeledDigraph { m, vertices, edges }
    }

    /// Number of IFS maps, i.e. the label alphabet size.
    pub fn map_count(&self) -> usize {
        self.m
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, k: usize) -> &Vertex {
        &self.vertices[k]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn find_vertex(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.name == name)
    }

    pub fn find_map(&self, h: &Similitude) -> Option<usize> {
        self.vertices.iter().position(|v| v.map.as_ref() == Some(h))
    }

    /// Adjacency matrix ignoring labels.
    pub fn adjacency(&self) -> BoolMatrix {
        let mut m = BoolMatrix::zeros(self.vertices.len());
        for e in &self.edges {
            m.set(e.source, e.target, true);
        }
        m
    }

    /// `succ[i-1][s]`: sorted targets of edges leaving `s` with first label `i`.
    pub fn successors_by_label(&self) -> Vec<Vec<Vec<usize>>> {
        let mut succ = vec![vec![Vec::new(); self.vertices.len()]; self.m];
        for e in &self.edges {
            succ[e.i - 1][e.source].push(e.target);
        }
        for per_label in &mut succ {
            for targets in per_label {
                targets.sort_unstable();
                targets.dedup();
            }
        }
        succ
    }

    /// Keeps the vertices flagged in `keep` (vertex 0 must be kept), preserving their order.
    pub fn induced_subgraph(&self, keep: &[bool]) -> LabeledDigraph {
        assert!(keep[0], "the identity vertex is always kept");
        let mut new_index = vec![usize::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        for (k, v) in self.vertices.iter().enumerate() {
            if keep[k] {
                new_index[k] = vertices.len();
                vertices.push(v.clone());
            }
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| keep[e.source] && keep[e.target])
            .map(|e| Edge {
                source: new_index[e.source],
                target: new_index[e.target],
                ..*e
            })
            .collect();
        LabeledDigraph::from_parts_unchecked(self.m, vertices, edges)
    }

    /// Relabels the maps: new label `k` is the old label `ordering[k-1]`.
    pub fn permute_labels(&self, ordering: &[usize]) -> Result<LabeledDigraph, GraphError> {
        check_permutation(ordering, self.m).map_err(GraphError::Invalid)?;
        let mut new_label = vec![0; self.m + 1];
        for (k, &old) in ordering.iter().enumerate() {
            new_label[old] = k + 1;
        }
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                i: new_label[e.i],
                j: new_label[e.j],
                ..*e
            })
            .collect();
        LabeledDigraph::new(self.m, self.vertices.clone(), edges)
    }

    pub fn to_doc(&self, field: Option<&FieldDescriptor>) -> GraphDoc {
        GraphDoc {
            m: self.m,
            field: field.cloned(),
            vertices: self
                .vertices
                .iter()
                .map(|v| VertexDoc {
                    name: v.name.clone(),
                    map: v.map.as_ref().map(Similitude::to_spec),
                })
                .collect(),
            edges: self.edges.iter().map(|e| [e.source, e.target, e.i, e.j]).collect(),
        }
    }

    /// Rebuilds a graph from its JSON document. Vertex maps require a field, either passed in
    /// or embedded in the document.
    pub fn from_doc(doc: &GraphDoc, field: Option<&Arc<NumberField>>) -> Result<Self, GraphError> {
        let own_field;
        let field = match (field, &doc.field) {
            (Some(f), _) => Some(f),
            (None, Some(desc)) => {
                own_field = NumberField::new(desc.clone())?;
                Some(&own_field)
            }
            (None, None) => None,
        };
        let mut vertices = Vec::with_capacity(doc.vertices.len());
        for (k, v) in doc.vertices.iter().enumerate() {
            let map = match (&v.map, field) {
                (None, _) => None,
                (Some(spec), Some(field)) => Some(
                    Similitude::from_spec(field, spec)
                        .map_err(|e| GraphError::Invalid(format!("vertex {k}: {e}")))?,
                ),
                (Some(_), None) => {
                    return Err(GraphError::Invalid(format!(
                        "vertex {k} has a map but no field is available"
                    )))
                }
            };
            vertices.push(Vertex {
                name: v.name.clone(),
                map,
            });
        }
        let edges = doc
            .edges
            .iter()
            .map(|&[source, target, i, j]| Edge { source, target, i, j })
            .collect();
        LabeledDigraph::new(doc.m, vertices, edges)
    }

    /// Graphviz rendering with `(i,j)` edge labels.
    pub fn to_dot(&self, title: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{}\" {{", escape(title));
        let _ = writeln!(out, "  rankdir=LR;");
        for (k, v) in self.vertices.iter().enumerate() {
            let shape = if k == 0 { "doublecircle" } else { "ellipse" };
            let _ = writeln!(out, "  v{k} [label=\"{}\", shape={shape}];", escape(&v.name));
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  v{} -> v{} [label=\"({},{})\"];",
                e.source, e.target, e.i, e.j
            );
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub(crate) fn check_permutation(ordering: &[usize], m: usize) -> Result<(), String> {
    let set: BTreeSet<usize> = ordering.iter().copied().collect();
    if ordering.len() != m || set.len() != m || set.iter().any(|&k| k == 0 || k > m) {
        return Err(format!("ordering {ordering:?} is not a permutation of 1..={m}"));
    }
    Ok(())
}

/// JSON form of a graph: vertices with optional coefficient-vector maps, edges as 4-tuples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDoc {
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldDescriptor>,
    pub vertices: Vec<VertexDoc>,
    pub edges: Vec<[usize; 4]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexDoc {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapSpec>,
}

/// Keeps the identity and every vertex with a directed path of length ≥ 1 to it.
/// Labels and vertex order are preserved.
pub fn extract_overlap_graph(nbr: &LabeledDigraph) -> LabeledDigraph {
    let reach = reachability_closure(&nbr.adjacency());
    let keep: Vec<bool> = (0..nbr.vertex_count())
        .map(|k| k == 0 || reach.get(k, 0))
        .collect();
    nbr.induced_subgraph(&keep)
}

/// Merges classes of vertices generated by the given pairs. Each class is represented by its
/// smallest index; the identity may not be merged with anything else.
pub fn quotient_vertices(
    g: &LabeledDigraph,
    identify: &[(usize, usize)],
) -> Result<LabeledDigraph, GraphError> {
    let n = g.vertex_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b) in identify {
        if a >= n || b >= n {
            return Err(GraphError::InvalidQuotient(format!(
                "pair ({a}, {b}) refers to a vertex outside 0..{n}"
            )));
        }
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        parent[hi] = lo;
    }
    let root: Vec<usize> = (0..n).map(|k| find(&mut parent, k)).collect();
    if let Some(k) = (1..n).find(|&k| root[k] == 0) {
        return Err(GraphError::InvalidQuotient(format!(
            "vertex {k} ({}) would be merged with the identity",
            g.vertex(k).name
        )));
    }
    let mut new_index = vec![usize::MAX; n];
    let mut vertices = Vec::new();
    for k in 0..n {
        if root[k] == k {
            new_index[k] = vertices.len();
            vertices.push(g.vertex(k).clone());
        }
    }
    let edges = g
        .edges()
        .iter()
        .map(|e| Edge {
            source: new_index[root[e.source]],
            target: new_index[root[e.target]],
            ..*e
        })
        .collect();
    LabeledDigraph::new(g.map_count(), vertices, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn named(names: &[&str]) -> Vec<Vertex> {
        names
            .iter()
            .map(|n| Vertex {
                name: n.to_string(),
                map: None,
            })
            .collect()
    }

    fn e(source: usize, target: usize, i: usize, j: usize) -> Edge {
        Edge { source, target, i, j }
    }

    #[test]
    fn overlap_graph_keeps_vertices_returning_to_identity() {
        // 1 <-> 2 cycle never returns; 3 -> 0.
        let g = LabeledDigraph::new(
            2,
            named(&["0", "p", "q", "r"]),
            vec![e(0, 1, 1, 2), e(0, 3, 2, 1), e(1, 2, 1, 1), e(2, 1, 2, 2), e(3, 0, 1, 1)],
        )
        .unwrap();
        let og = extract_overlap_graph(&g);
        let names: Vec<_> = og.vertices().iter().map(|v| v.name.as_str()).collect();
        assert_eq!(names, ["0", "r"]);
        assert_eq!(og.edges(), &[e(0, 1, 2, 1), e(1, 0, 1, 1)]);
    }

    #[test]
    fn quotient_merges_and_collapses() {
        let g = LabeledDigraph::new(
            2,
            named(&["0", "u", "v"]),
            vec![e(0, 1, 2, 1), e(0, 2, 2, 1), e(1, 0, 1, 1), e(2, 0, 1, 1)],
        )
        .unwrap();
        assert_eq!(quotient_vertices(&g, &[]).unwrap(), g);
        let q = quotient_vertices(&g, &[(2, 1)]).unwrap();
        assert_eq!(q.vertex_count(), 2);
        assert_eq!(q.edges(), &[e(0, 1, 2, 1), e(1, 0, 1, 1)]);
        assert!(matches!(
            quotient_vertices(&g, &[(0, 1)]),
            Err(GraphError::InvalidQuotient(_))
        ));
    }

    #[test]
    fn label_permutation() {
        let g = LabeledDigraph::new(3, named(&["0", "a"]), vec![e(0, 1, 2, 3), e(1, 0, 3, 1)]).unwrap();
        let p = g.permute_labels(&[3, 2, 1]).unwrap();
        assert_eq!(p.edges(), &[e(0, 1, 2, 1), e(1, 0, 1, 3)]);
        assert!(g.permute_labels(&[1, 1, 2]).is_err());
    }

    #[test]
    fn invalid_edges_rejected() {
        assert!(LabeledDigraph::new(2, named(&["0"]), vec![e(0, 1, 1, 1)]).is_err());
        assert!(LabeledDigraph::new(2, named(&["0", "a"]), vec![e(0, 1, 3, 1)]).is_err());
    }

    #[test]
    fn doc_round_trip_and_dot() {
        let g = LabeledDigraph::new(2, named(&["0", "a\"b"]), vec![e(0, 1, 2, 1), e(1, 0, 1, 2)]).unwrap();
        let doc = g.to_doc(None);
        let json = serde_json::to_string(&doc).unwrap();
        let back = LabeledDigraph::from_doc(&serde_json::from_str(&json).unwrap(), None).unwrap();
        assert_eq!(back, g);
        let dot = g.to_dot("t");
        assert!(dot.contains("v0 -> v1 [label=\"(2,1)\"]"));
        assert!(dot.contains("a\\\"b"));
    }
}
