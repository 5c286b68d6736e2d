//! Construction of the non-overlapping GIFS from an overlap graph.
//!
//! Each attractor `B_k` is named by a set `S_k` of overlap vertices: `B_k` is what remains of
//! `A` after cutting away the overlaps `h(A)`, `h ∈ S_k`. Initialization assigns to piece `i`
//! the vertices reached from the identity by edges `(i, j)` with `j < i`; the recursion
//! `S_ik = S_i ∪ { s : t →ⁱ s, t ∈ S_k }` produces the pieces of every `B_k`.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nbrgraph::LabeledDigraph;

/// Default cap on the number of attractors.
pub const DEFAULT_BUDGET: usize = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GifsError {
    #[error("more than {limit} attractors would be created")]
    BudgetExceeded { limit: usize },
    #[error("invalid system: {0}")]
    Invalid(String),
}

/// Sorted, duplicate-free set of overlap-graph vertex indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OverlapSet(Vec<usize>);

impl OverlapSet {
    pub fn new(mut vertices: Vec<usize>) -> Self {
        vertices.sort_unstable();
        vertices.dedup();
        OverlapSet(vertices)
    }

    pub fn empty() -> Self {
        OverlapSet(Vec::new())
    }

    pub fn vertices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn contains_identity(&self) -> bool {
        self.0.first() == Some(&0)
    }

    pub fn without(&self, v: usize) -> OverlapSet {
        OverlapSet(self.0.iter().copied().filter(|&x| x != v).collect())
    }

    pub fn union(&self, other: &OverlapSet) -> OverlapSet {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        OverlapSet::new(v)
    }

    /// Vertex names, for reports.
    pub fn names(&self, og: &LabeledDigraph) -> Vec<String> {
        self.0.iter().map(|&v| og.vertex(v).name.clone()).collect()
    }
}

/// One term `f_i(B_target)` of an equation. `map` is 1-based, `target` 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term {
    pub map: usize,
    pub target: usize,
}

/// A system `B_k = ∪ f_i(B_{j(i,k)})`, `k = 1..n` (stored 0-based).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GifsSystem {
    m: usize,
    equations: Vec<Vec<Term>>,
    /// `S_k` per attractor; empty when the system was entered by hand.
    sets: Vec<OverlapSet>,
}

impl GifsSystem {
    /// Validates shape: labels within `1..=m` and strictly increasing, targets in range.
    pub fn new(m: usize, equations: Vec<Vec<Term>>, sets: Vec<OverlapSet>) -> Result<Self, GifsError> {
        let n = equations.len();
        if !sets.is_empty() && sets.len() != n {
            return Err(GifsError::Invalid(format!(
                "{} overlap sets for {n} equations",
                sets.len()
            )));
        }
        for (k, eq) in equations.iter().enumerate() {
            for w in eq.windows(2) {
                if w[0].map >= w[1].map {
                    return Err(GifsError::Invalid(format!(
                        "equation {} has labels out of order or repeated",
                        k + 1
                    )));
                }
            }
            for t in eq {
                if t.map == 0 || t.map > m || t.target >= n {
                    return Err(GifsError::Invalid(format!(
                        "equation {} has term {t:?} out of range",
                        k + 1
                    )));
                }
            }
        }
        Ok(GifsSystem { m, equations, sets })
    }

    /// Builds from 1-based `(map, target)` pairs, as equations are usually written.
    pub fn from_pairs(m: usize, equations: &[&[(usize, usize)]]) -> Result<Self, GifsError> {
        let eqs = equations
            .iter()
            .map(|eq| {
                eq.iter()
                    .map(|&(i, t)| {
                        if t == 0 {
                            Err(GifsError::Invalid("attractor indices are 1-based".into()))
                        } else {
                            Ok(Term { map: i, target: t - 1 })
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(m, eqs, Vec::new())
    }

    pub(crate) fn from_parts_unchecked(m: usize, equations: Vec<Vec<Term>>, sets: Vec<OverlapSet>) -> Self {
        GifsSystem { m, equations, sets }
    }

    pub fn map_count(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.equations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equations.is_empty()
    }

    pub fn equations(&self) -> &[Vec<Term>] {
        &self.equations
    }

    pub fn equation(&self, k: usize) -> &[Term] {
        &self.equations[k]
    }

    pub fn sets(&self) -> &[OverlapSet] {
        &self.sets
    }

    pub fn has_sets(&self) -> bool {
        !self.sets.is_empty()
    }

    pub fn with_sets(mut self, sets: Vec<OverlapSet>) -> Result<Self, GifsError> {
        if sets.len() != self.equations.len() {
            return Err(GifsError::Invalid("one overlap set per equation required".into()));
        }
        self.sets = sets;
        Ok(self)
    }

    /// Equation `k` as 1-based `(map, attractor)` pairs.
    pub fn equation_pairs(&self, k: usize) -> Vec<(usize, usize)> {
        self.equations[k].iter().map(|t| (t.map, t.target + 1)).collect()
    }

    pub fn to_doc(&self, og: Option<&LabeledDigraph>) -> GifsDoc {
        GifsDoc {
            m: self.m,
            attractors: self
                .equations
                .iter()
                .enumerate()
                .map(|(k, eq)| AttractorDoc {
                    index: k + 1,
                    equation: self.display_equation(k),
                    terms: eq.iter().map(|t| [t.map, t.target + 1]).collect(),
                    set: self.sets.get(k).map(|s| s.vertices().to_vec()),
                    set_names: match (og, self.sets.get(k)) {
                        (Some(og), Some(s)) => Some(s.names(og)),
                        _ => None,
                    },
                })
                .collect(),
        }
    }

    pub fn from_doc(doc: &GifsDoc) -> Result<Self, GifsError> {
        let mut equations = Vec::new();
        let mut sets = Vec::new();
        for (k, a) in doc.attractors.iter().enumerate() {
            if a.index != k + 1 {
                return Err(GifsError::Invalid(format!(
                    "attractor {} listed at position {}",
                    a.index,
                    k + 1
                )));
            }
            let terms = a
                .terms
                .iter()
                .map(|&[i, t]| {
                    t.checked_sub(1)
                        .map(|target| Term { map: i, target })
                        .ok_or_else(|| GifsError::Invalid("attractor indices are 1-based".into()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            equations.push(terms);
            if let Some(s) = &a.set {
                sets.push(OverlapSet::new(s.clone()));
            }
        }
        if !sets.is_empty() && sets.len() != equations.len() {
            return Err(GifsError::Invalid("either all or no attractors carry sets".into()));
        }
        Self::new(doc.m, equations, sets)
    }

    pub fn display_equation(&self, k: usize) -> String {
        let rhs: Vec<String> = self.equations[k]
            .iter()
            .map(|t| format!("f_{}(B_{})", t.map, t.target + 1))
            .collect();
        let rhs = if rhs.is_empty() { "∅".to_string() } else { rhs.join(" ∪ ") };
        format!("B_{} = {}", k + 1, rhs)
    }
}

impl fmt::Display for GifsSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 0..self.len() {
            writeln!(f, "{}", self.display_equation(k))?;
        }
        Ok(())
    }
}

/// JSON form of a system; attractor indices are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GifsDoc {
    pub m: usize,
    pub attractors: Vec<AttractorDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttractorDoc {
    pub index: usize,
    pub equation: String,
    /// `[map, attractor]` pairs.
    pub terms: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set_names: Option<Vec<String>>,
}

/// Result of the initialization step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Initialization {
    /// `S_i` for each map `i = 1..m` before renaming; may contain the identity.
    pub piece_sets: Vec<OverlapSet>,
    /// `B_1 = ∪ f_i(B_i)` over the surviving maps, with deduplicated names.
    pub first_equation: Vec<Term>,
    /// Distinct sets in naming order; `sets[0]` is `S_1 = ∅`.
    pub sets: Vec<OverlapSet>,
}

/// Incremental driver for the initialization and recursion.
pub struct GifsBuilder<'g> {
    og: &'g LabeledDigraph,
    m: usize,
    succ: Vec<Vec<Vec<usize>>>,
    piece_sets: Vec<OverlapSet>,
    sets: Vec<OverlapSet>,
    names: HashMap<OverlapSet, usize>,
    equations: Vec<Option<Vec<Term>>>,
    budget: usize,
    normalize: Option<Box<dyn FnMut(OverlapSet) -> OverlapSet + 'g>>,
}

impl<'g> GifsBuilder<'g> {
    pub fn new(og: &'g LabeledDigraph, budget: usize) -> Self {
        let m = og.map_count();
        let mut piece_sets = vec![OverlapSet::empty(); m];
        for e in og.edges().iter().filter(|e| e.source == 0 && e.j < e.i) {
            piece_sets[e.i - 1].0.push(e.target);
        }
        let piece_sets: Vec<OverlapSet> = piece_sets.into_iter().map(|s| OverlapSet::new(s.0)).collect();
        let mut builder = GifsBuilder {
            og,
            m,
            succ: og.successors_by_label(),
            piece_sets,
            sets: Vec::new(),
            names: HashMap::new(),
            equations: Vec::new(),
            budget: budget.max(1),
            normalize: None,
        };
        builder.name(OverlapSet::empty()).expect("budget ≥ 1");
        builder
    }

    /// Applies `f` to every new piece set that does not contain the identity before naming it.
    pub fn with_normalizer(mut self, f: impl FnMut(OverlapSet) -> OverlapSet + 'g) -> Self {
        self.normalize = Some(Box::new(f));
        self
    }

    /// Names `s` (after normalization) without expanding it.
    pub fn seed(&mut self, s: OverlapSet) -> Result<usize, GifsError> {
        let s = match (&mut self.normalize, s.contains_identity()) {
            (Some(f), false) => f(s),
            (_, _) => s,
        };
        self.name(s)
    }

    pub fn overlap_graph(&self) -> &LabeledDigraph {
        self.og
    }

    /// Current number of named attractors.
    pub fn attractor_count(&self) -> usize {
        self.sets.len()
    }

    pub fn set(&self, k: usize) -> &OverlapSet {
        &self.sets[k]
    }

    fn name(&mut self, s: OverlapSet) -> Result<usize, GifsError> {
        if let Some(&k) = self.names.get(&s) {
            return Ok(k);
        }
        if self.sets.len() >= self.budget {
            return Err(GifsError::BudgetExceeded { limit: self.budget });
        }
        let k = self.sets.len();
        self.names.insert(s.clone(), k);
        self.sets.push(s);
        self.equations.push(None);
        Ok(k)
    }

    /// `S_ik` for attractor `k` (0-based) and map `i` (1-based).
    pub fn piece_set(&self, i: usize, k: usize) -> OverlapSet {
        piece_set(&self.piece_sets[i - 1], &self.succ[i - 1], &self.sets[k])
    }

    /// Computes the equation of attractor `k`, naming new sets in ascending `i`.
    pub fn expand_equation(&mut self, k: usize) -> Result<&[Term], GifsError> {
        if self.equations[k].is_none() {
            let mut terms = Vec::new();
            for i in 1..=self.m {
                let s = self.piece_set(i, k);
                if s.contains_identity() {
                    continue;
                }
                let target = self.seed(s)?;
                terms.push(Term { map: i, target });
            }
            self.equations[k] = Some(terms);
        }
        Ok(self.equations[k].as_deref().unwrap())
    }

    pub fn initialize(&mut self) -> Result<Initialization, GifsError> {
        let first_equation = self.expand_equation(0)?.to_vec();
        Ok(Initialization {
            piece_sets: self.piece_sets.clone(),
            first_equation,
            sets: self.sets.clone(),
        })
    }

    /// Runs the recursion until every named attractor has an equation.
    pub fn finish(mut self) -> Result<GifsSystem, GifsError> {
        let mut k = 0;
        while k < self.sets.len() {
            self.expand_equation(k)?;
            k += 1;
        }
        let equations = self.equations.into_iter().map(Option::unwrap).collect();
        Ok(GifsSystem::from_parts_unchecked(self.m, equations, self.sets))
    }
}

fn piece_set(initial: &OverlapSet, succ_i: &[Vec<usize>], sk: &OverlapSet) -> OverlapSet {
    let mut v = initial.0.clone();
    for &t in sk.vertices() {
        v.extend_from_slice(&succ_i[t]);
    }
    OverlapSet::new(v)
}

/// Initialization alone: piece sets, the first equation and its deduplicated names.
pub fn init_overlap_sets(og: &LabeledDigraph) -> Initialization {
    GifsBuilder::new(og, DEFAULT_BUDGET)
        .initialize()
        .expect("the first equation names at most m + 1 sets")
}

/// Full construction with a cap on the number of attractors.
pub fn build_gifs(og: &LabeledDigraph, budget: usize) -> Result<GifsSystem, GifsError> {
    let mut b = GifsBuilder::new(og, budget);
    b.initialize()?;
    b.finish()
}

/// A failed consistency check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// 1-based attractor index, when the violation concerns one equation.
    pub equation: Option<usize>,
    pub label: Option<usize>,
    pub message: String,
}

/// Recomputes every `S_ik` from the graph and compares with the stored terms.
pub fn validate_gifs(system: &GifsSystem, og: &LabeledDigraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let v = |equation: Option<usize>, label: Option<usize>, message: String| Violation {
        equation,
        label,
        message,
    };
    if !system.has_sets() {
        out.push(v(None, None, "system carries no overlap sets".into()));
        return out;
    }
    if system.map_count() != og.map_count() {
        out.push(v(
            None,
            None,
            format!("system has {} maps, graph has {}", system.map_count(), og.map_count()),
        ));
        return out;
    }
    let sets = system.sets();
    if !sets[0].is_empty() {
        out.push(v(Some(1), None, "S_1 must be empty".into()));
    }
    let mut seen: HashMap<&OverlapSet, usize> = HashMap::new();
    for (k, s) in sets.iter().enumerate() {
        if s.vertices().iter().any(|&x| x >= og.vertex_count()) {
            out.push(v(Some(k + 1), None, format!("S_{} refers to unknown vertices", k + 1)));
            return out;
        }
        if s.contains_identity() {
            out.push(v(Some(k + 1), None, format!("S_{} contains the identity", k + 1)));
        }
        if let Some(prev) = seen.insert(s, k) {
            out.push(v(
                Some(k + 1),
                None,
                format!("S_{} duplicates S_{}", k + 1, prev + 1),
            ));
        }
    }
    let builder = GifsBuilder::new(og, DEFAULT_BUDGET);
    for (k, eq) in system.equations().iter().enumerate() {
        for i in 1..=system.map_count() {
            let expected = piece_set(&builder.piece_sets[i - 1], &builder.succ[i - 1], &sets[k]);
            let term = eq.iter().find(|t| t.map == i);
            match (expected.contains_identity(), term) {
                (true, None) => {}
                (true, Some(t)) => out.push(v(
                    Some(k + 1),
                    Some(i),
                    format!(
                        "piece {i} of B_{} is covered by overlaps but appears as f_{i}(B_{})",
                        k + 1,
                        t.target + 1
                    ),
                )),
                (false, None) => out.push(v(
                    Some(k + 1),
                    Some(i),
                    format!("piece {i} of B_{} is missing", k + 1),
                )),
                (false, Some(t)) if sets[t.target] != expected => out.push(v(
                    Some(k + 1),
                    Some(i),
                    format!(
                        "f_{i}(B_{}) in B_{}: target set {:?} differs from S_ik = {:?}",
                        t.target + 1,
                        k + 1,
                        sets[t.target].vertices(),
                        expected.vertices()
                    ),
                )),
                (false, Some(_)) => {}
            }
        }
    }
    out
}
