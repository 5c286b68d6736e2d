//! Post-processing of a raw system: reachability restriction, merging of identical attractors,
//! language-based pruning of overlap sets and detection of degenerate attractors.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dimension::{component_perron_roots, incidence_matrix, DimensionError};
use crate::gifsbuild::{GifsBuilder, GifsError, GifsSystem, OverlapSet, Term, DEFAULT_BUDGET};
use crate::nbrgraph::LabeledDigraph;

/// Default cap on determinized subset states in one inclusion check.
pub const DEFAULT_STATE_CAP: usize = 1 << 18;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReduceError {
    #[error("language inclusion needed more than {limit} subset states")]
    StateBudgetExceeded { limit: usize },
    #[error(transparent)]
    Gifs(#[from] GifsError),
    #[error(transparent)]
    Dimension(#[from] DimensionError),
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Keeps the attractors reachable from `B_1`, renumbered densely in their original order.
pub fn restrict_reachable(system: &GifsSystem) -> GifsSystem {
    let n = system.len();
    if n == 0 {
        return system.clone();
    }
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut queue = VecDeque::from([0usize]);
    while let Some(k) = queue.pop_front() {
        for t in system.equation(k) {
            if !seen[t.target] {
                seen[t.target] = true;
                queue.push_back(t.target);
            }
        }
    }
    select(system, &seen)
}

/// The strongly connected component of `B_1` in the target digraph, with terms leaving it
/// removed. Unlike `restrict_reachable` this changes equations, so it is a modelling step:
/// the dropped parts are lower-dimensional whenever the component carries the Perron root.
pub fn irreducible_part(system: &GifsSystem) -> GifsSystem {
    let n = system.len();
    if n == 0 {
        return system.clone();
    }
    let mut fwd = vec![false; n];
    let mut back = vec![false; n];
    let mut preds = vec![Vec::new(); n];
    for k in 0..n {
        for t in system.equation(k) {
            preds[t.target].push(k);
        }
    }
    for (mark, step) in [(&mut fwd, false), (&mut back, true)] {
        mark[0] = true;
        let mut queue = VecDeque::from([0usize]);
        while let Some(k) = queue.pop_front() {
            let next: Vec<usize> = if step {
                preds[k].clone()
            } else {
                system.equation(k).iter().map(|t| t.target).collect()
            };
            for t in next {
                if !mark[t] {
                    mark[t] = true;
                    queue.push_back(t);
                }
            }
        }
    }
    let keep: Vec<bool> = fwd.iter().zip(&back).map(|(a, b)| *a && *b).collect();
    select(system, &keep)
}

/// Subsystem on the attractors with `keep[k]`; terms into dropped attractors are removed.
fn select(system: &GifsSystem, keep: &[bool]) -> GifsSystem {
    let mut new_index = vec![usize::MAX; keep.len()];
    let mut next = 0;
    for (k, &kp) in keep.iter().enumerate() {
        if kp {
            new_index[k] = next;
            next += 1;
        }
    }
    let equations = system
        .equations()
        .iter()
        .zip(keep)
        .filter(|(_, &kp)| kp)
        .map(|(eq, _)| {
            eq.iter()
                .filter(|t| keep[t.target])
                .map(|t| Term {
                    map: t.map,
                    target: new_index[t.target],
                })
                .collect()
        })
        .collect();
    let sets = if system.has_sets() {
        system
            .sets()
            .iter()
            .zip(keep)
            .filter(|(_, &kp)| kp)
            .map(|(s, _)| s.clone())
            .collect()
    } else {
        Vec::new()
    };
    GifsSystem::from_parts_unchecked(system.map_count(), equations, sets)
}

/// Coarsest partition in which equal classes have equal equations up to renaming.
///
/// Refinement starts from a single class and splits by the signature `(map, class of target)`
/// until stable. Each class is represented by its smallest member.
pub fn merge_identical(system: &GifsSystem) -> (GifsSystem, ReductionReport) {
    let n = system.len();
    let mut class = vec![0usize; n];
    let mut count = usize::from(n > 0);
    loop {
        let mut ids: HashMap<(usize, Vec<(usize, usize)>), usize> = HashMap::new();
        let mut next = vec![0usize; n];
        for k in 0..n {
            let sig: Vec<(usize, usize)> = system
                .equation(k)
                .iter()
                .map(|t| (t.map, class[t.target]))
                .collect();
            let fresh = ids.len();
            next[k] = *ids.entry((class[k], sig)).or_insert(fresh);
        }
        let new_count = ids.len();
        class = next;
        if new_count == count {
            break;
        }
        count = new_count;
    }

    // Renumber classes by smallest member.
    let mut rep_of_class: HashMap<usize, usize> = HashMap::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut new_index = vec![0usize; n];
    for k in 0..n {
        let idx = *rep_of_class.entry(class[k]).or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        members[idx].push(k);
        new_index[k] = idx;
    }
    let equations = members
        .iter()
        .map(|ms| {
            system
                .equation(ms[0])
                .iter()
                .map(|t| Term {
                    map: t.map,
                    target: new_index[t.target],
                })
                .collect()
        })
        .collect();
    let sets = if system.has_sets() {
        members.iter().map(|ms| system.sets()[ms[0]].clone()).collect()
    } else {
        Vec::new()
    };
    let merged = GifsSystem::from_parts_unchecked(system.map_count(), equations, sets);
    let report = ReductionReport {
        before: n,
        after: merged.len(),
        merged_classes: members
            .iter()
            .filter(|ms| ms.len() > 1)
            .map(|ms| ms.iter().map(|k| k + 1).collect())
            .collect(),
        ..ReductionReport::default()
    };
    (merged, report)
}

/// Nondeterministic automaton over the overlap graph accepting the first-label words of paths
/// to the identity. The identity is final and absorbing: once a prefix reaches it every
/// extension is accepted, so edges leaving the identity play no part.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexAutomaton {
    m: usize,
    initial: usize,
    /// `delta[i-1][v]`: successors of `v` under label `i`, sorted; empty for the identity.
    delta: Vec<Vec<Vec<usize>>>,
    names: Vec<String>,
}

impl VertexAutomaton {
    pub fn new(og: &LabeledDigraph, initial: usize) -> Self {
        let mut delta = og.successors_by_label();
        for per_label in &mut delta {
            if let Some(first) = per_label.first_mut() {
                first.clear();
            }
        }
        VertexAutomaton {
            m: og.map_count(),
            initial,
            delta,
            names: og.vertices().iter().map(|v| v.name.clone()).collect(),
        }
    }

    pub fn alphabet_size(&self) -> usize {
        self.m
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn successors(&self, v: usize, label: usize) -> &[usize] {
        &self.delta[label - 1][v]
    }

    /// Simulates the subset automaton on a word of 1-based labels.
    pub fn accepts(&self, word: &[usize]) -> bool {
        let mut cur: BTreeSet<usize> = BTreeSet::from([self.initial]);
        for &a in word {
            if cur.contains(&0) {
                return true;
            }
            cur = cur.iter().flat_map(|&v| self.successors(v, a).iter().copied()).collect();
            if cur.is_empty() {
                return false;
            }
        }
        cur.contains(&0)
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph L {\n  rankdir=LR;\n");
        let _ = writeln!(out, "  start [shape=point];\n  start -> v{};", self.initial);
        for (v, name) in self.names.iter().enumerate() {
            let shape = if v == 0 { "doublecircle" } else { "circle" };
            let _ = writeln!(out, "  v{v} [label=\"{}\", shape={shape}];", name.replace('"', "\\\""));
        }
        let _ = writeln!(out, "  v0 -> v0 [label=\"*\"];");
        for (li, per) in self.delta.iter().enumerate() {
            for (v, succ) in per.iter().enumerate() {
                for t in succ {
                    let _ = writeln!(out, "  v{v} -> v{t} [label=\"{}\"];", li + 1);
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Inclusion answers keyed by `(s, targets)`.
type InclusionCache = RefCell<HashMap<(usize, Vec<usize>), Result<bool, ReduceError>>>;

/// Language inclusion checker with cached answers.
pub struct InclusionChecker<'g> {
    og: &'g LabeledDigraph,
    m: usize,
    delta: Vec<Vec<Vec<usize>>>,
    cap: usize,
    cache: InclusionCache,
}

impl<'g> InclusionChecker<'g> {
    pub fn new(og: &'g LabeledDigraph, cap: usize) -> Self {
        let a = VertexAutomaton::new(og, 0);
        InclusionChecker {
            og,
            m: og.map_count(),
            delta: a.delta,
            cap: cap.max(1),
            cache: RefCell::new(HashMap::new()),
        }
    }

    pub fn overlap_graph(&self) -> &LabeledDigraph {
        self.og
    }

    /// Shortest word in `L_s ∖ ⋃_{t∈T} L_t`, or `None` when `L_s ⊆ ⋃ L_t`.
    pub fn counterexample(&self, s: usize, targets: &[usize]) -> Result<Option<Vec<usize>>, ReduceError> {
        let n = self.og.vertex_count();
        if s >= n || targets.iter().any(|&t| t >= n) {
            return Err(ReduceError::Invalid("vertex out of range".into()));
        }
        let mut d0: Vec<usize> = targets.to_vec();
        d0.sort_unstable();
        d0.dedup();
        if d0.first() == Some(&0) {
            return Ok(None);
        }
        if s == 0 {
            return Ok(Some(Vec::new()));
        }
        // BFS over (state of L_s, determinized state of the union).
        let mut subsets: HashMap<Vec<usize>, usize> = HashMap::new();
        subsets.insert(d0.clone(), 0);
        let mut subset_list = vec![d0];
        let mut seen: HashSet<(usize, usize)> = HashSet::from([(s, 0)]);
        let mut nodes: Vec<(usize, usize, usize, usize)> = vec![(s, 0, usize::MAX, 0)];
        let mut head = 0;
        while head < nodes.len() {
            let (p, d, _, _) = nodes[head];
            for label in 1..=self.m {
                let step = &self.delta[label - 1];
                if step[p].is_empty() {
                    continue;
                }
                let mut next: Vec<usize> = subset_list[d]
                    .iter()
                    .flat_map(|&v| step[v].iter().copied())
                    .collect();
                next.sort_unstable();
                next.dedup();
                if next.first() == Some(&0) {
                    continue;
                }
                if step[p].first() == Some(&0) {
                    let mut word = vec![label];
                    let mut at = head;
                    while nodes[at].2 != usize::MAX {
                        word.push(nodes[at].3);
                        at = nodes[at].2;
                    }
                    word.reverse();
                    return Ok(Some(word));
                }
                let d_next = match subsets.get(&next) {
                    Some(&k) => k,
                    None => {
                        if subset_list.len() >= self.cap {
                            return Err(ReduceError::StateBudgetExceeded { limit: self.cap });
                        }
                        subsets.insert(next.clone(), subset_list.len());
                        subset_list.push(next);
                        subset_list.len() - 1
                    }
                };
                for &q in &step[p] {
                    if seen.insert((q, d_next)) {
                        nodes.push((q, d_next, head, label));
                    }
                }
            }
            head += 1;
        }
        Ok(None)
    }

    pub fn included(&self, s: usize, targets: &[usize]) -> Result<bool, ReduceError> {
        let key = (s, targets.to_vec());
        if let Some(r) = self.cache.borrow().get(&key) {
            return r.clone();
        }
        let r = self.counterexample(s, targets).map(|w| w.is_none());
        self.cache.borrow_mut().insert(key, r.clone());
        r
    }

    /// Drops, in ascending order, every vertex whose language is covered by the rest.
    /// Vertices whose check exceeds the state cap are kept and returned in the second list.
    pub fn prune_set(&self, set: &OverlapSet) -> (OverlapSet, Vec<usize>, Vec<usize>) {
        let mut cur = set.vertices().to_vec();
        let mut removed = Vec::new();
        let mut skipped = Vec::new();
        if set.contains_identity() {
            return (set.clone(), removed, skipped);
        }
        for &s in set.vertices() {
            let others: Vec<usize> = cur.iter().copied().filter(|&t| t != s).collect();
            if others.is_empty() {
                continue;
            }
            match self.included(s, &others) {
                Ok(true) => {
                    cur = others;
                    removed.push(s);
                }
                Ok(false) => {}
                Err(_) => skipped.push(s),
            }
        }
        (OverlapSet::new(cur), removed, skipped)
    }
}

/// `L_s ⊆ ⋃_{t∈T} L_t` with the default state cap.
pub fn language_included(og: &LabeledDigraph, s: usize, targets: &[usize]) -> Result<bool, ReduceError> {
    InclusionChecker::new(og, DEFAULT_STATE_CAP).included(s, targets)
}

/// Like [`language_included`], returning a shortest separating word when inclusion fails.
pub fn inclusion_counterexample(
    og: &LabeledDigraph,
    s: usize,
    targets: &[usize],
) -> Result<Option<Vec<usize>>, ReduceError> {
    InclusionChecker::new(og, DEFAULT_STATE_CAP).counterexample(s, targets)
}

/// Prunes every overlap set and rebuilds the recursion over the pruned sets, seeded with the
/// system's own sets in order; then merges identical attractors.
pub fn prune_redundant_vertices(
    system: &GifsSystem,
    og: &LabeledDigraph,
) -> Result<(GifsSystem, ReductionReport), ReduceError> {
    prune_with(system, og, &InclusionChecker::new(og, DEFAULT_STATE_CAP), DEFAULT_BUDGET)
}

fn prune_with(
    system: &GifsSystem,
    og: &LabeledDigraph,
    checker: &InclusionChecker<'_>,
    budget: usize,
) -> Result<(GifsSystem, ReductionReport), ReduceError> {
    if !system.has_sets() {
        return Err(ReduceError::Invalid("pruning needs a system with overlap sets".into()));
    }
    if system.map_count() != og.map_count() {
        return Err(ReduceError::Invalid("system and overlap graph disagree on the map count".into()));
    }
    let pruned: RefCell<Vec<PrunedSet>> = RefCell::new(Vec::new());
    let skipped: RefCell<BTreeSet<usize>> = RefCell::new(BTreeSet::new());
    let mut memo: HashMap<OverlapSet, OverlapSet> = HashMap::new();
    let rebuilt = {
        let normalize = |s: OverlapSet| {
            if let Some(r) = memo.get(&s) {
                return r.clone();
            }
            let (out, removed, skip) = checker.prune_set(&s);
            if !removed.is_empty() {
                pruned.borrow_mut().push(PrunedSet {
                    set: s.vertices().to_vec(),
                    removed: removed.clone(),
                });
            }
            skipped.borrow_mut().extend(skip);
            memo.insert(s, out.clone());
            out
        };
        let mut builder = GifsBuilder::new(og, budget).with_normalizer(normalize);
        for s in system.sets() {
            builder.seed(s.clone())?;
        }
        builder.finish()?
    };
    let (merged, mut report) = merge_identical(&rebuilt);
    report.before = system.len();
    report.pruned = pruned.into_inner();
    report.skipped_vertices = skipped.into_inner().into_iter().collect();
    Ok((merged, report))
}

/// Component-level spectral test: attractors that cannot reach a component with the maximal
/// Perron root are flagged.
pub fn flag_degenerate(system: &GifsSystem) -> Result<ReductionReport, ReduceError> {
    let n = system.len();
    let mut report = ReductionReport {
        before: n,
        after: n,
        ..ReductionReport::default()
    };
    if n == 0 {
        return Ok(report);
    }
    let m = incidence_matrix(system).to_f64();
    let comps = component_perron_roots(&m)?;
    let global = comps.iter().map(|c| c.1).fold(0.0, f64::max);
    let tol = 1e-9 * global.max(1.0);
    let mut comp_of = vec![0usize; n];
    for (c, (members, _)) in comps.iter().enumerate() {
        for &k in members {
            comp_of[k] = c;
        }
    }
    // Best Perron root reachable from each attractor.
    let mut best = vec![f64::NAN; n];
    for k in 0..n {
        let mut seen = vec![false; n];
        seen[k] = true;
        let mut stack = vec![k];
        let mut top = 0.0f64;
        while let Some(v) = stack.pop() {
            top = top.max(comps[comp_of[v]].1);
            for t in system.equation(v) {
                if !seen[t.target] {
                    seen[t.target] = true;
                    stack.push(t.target);
                }
            }
        }
        best[k] = top;
    }
    for k in 0..n {
        if best[k] < global - tol {
            report.degenerate.push(DegenerateFlag {
                attractor: k + 1,
                perron_root: best[k],
                reason: format!(
                    "reaches only components with Perron root ≤ {:.12}, below the maximum {:.12}",
                    best[k], global
                ),
            });
        }
    }
    Ok(report)
}

/// Flags degenerate attractors and removes them together with the terms that use them.
pub fn drop_degenerate(system: &GifsSystem) -> Result<(GifsSystem, ReductionReport), ReduceError> {
    let mut report = flag_degenerate(system)?;
    let mut keep = vec![true; system.len()];
    for f in &report.degenerate {
        if f.attractor > 1 {
            keep[f.attractor - 1] = false;
            report.removed.push(f.attractor);
        }
    }
    let out = select(system, &keep);
    report.after = out.len();
    Ok((out, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegenerateFlag {
    /// 1-based attractor index.
    pub attractor: usize,
    pub perron_root: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrunedSet {
    pub set: Vec<usize>,
    pub removed: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCount {
    pub stage: String,
    pub count: usize,
}

/// What a reduction step did. Attractor indices are 1-based and refer to the step's input.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub before: usize,
    pub after: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub merged_classes: Vec<Vec<usize>>,
    /// Dropped degenerate attractors, numbered as in the system of the round that dropped them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub removed: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate: Vec<DegenerateFlag>,
    /// Overlap sets shrunk by language inclusion, as vertex indices.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pruned: Vec<PrunedSet>,
    /// Vertices kept because their inclusion check exceeded the state cap.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped_vertices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stages: Vec<StageCount>,
    /// Whether the last full round left the system unchanged.
    #[serde(default)]
    pub fixpoint: bool,
    #[serde(default)]
    pub rounds: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReduceOptions {
    pub max_rounds: usize,
    pub state_cap: usize,
    pub budget: usize,
    /// Remove degenerate attractors in every round.
    pub drop_degenerate: bool,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        ReduceOptions {
            max_rounds: 32,
            state_cap: DEFAULT_STATE_CAP,
            budget: DEFAULT_BUDGET,
            drop_degenerate: false,
        }
    }
}

/// Repeats restrict → merge → prune → merge until nothing changes. Pruning is skipped without
/// an overlap graph or when the system carries no overlap sets.
pub fn reduce(
    system: &GifsSystem,
    og: Option<&LabeledDigraph>,
    opts: &ReduceOptions,
) -> Result<(GifsSystem, ReductionReport), ReduceError> {
    let mut report = ReductionReport {
        before: system.len(),
        ..ReductionReport::default()
    };
    let stage = |r: &mut ReductionReport, name: &str, s: &GifsSystem| {
        r.stages.push(StageCount {
            stage: name.to_string(),
            count: s.len(),
        })
    };
    stage(&mut report, "input", system);
    let checker = og.map(|g| InclusionChecker::new(g, opts.state_cap));
    let mut cur = system.clone();
    let mut skipped = BTreeSet::new();
    let mut dropped_any = false;
    for round in 1..=opts.max_rounds.max(1) {
        report.rounds = round;
        let prev = cur.clone();
        cur = restrict_reachable(&cur);
        stage(&mut report, "restrict", &cur);
        let (merged, r) = merge_identical(&cur);
        cur = merged;
        report.merged_classes.extend(r.merged_classes);
        stage(&mut report, "merge", &cur);
        // After a drop the equations no longer follow the set recursion, so a prune rebuild
        // would bring the dropped terms back.
        if let (Some(og), Some(checker), false) = (og, &checker, dropped_any) {
            if cur.has_sets() {
                let (pruned, r) = prune_with(&cur, og, checker, opts.budget)?;
                cur = restrict_reachable(&pruned);
                report.pruned.extend(r.pruned);
                skipped.extend(r.skipped_vertices);
                stage(&mut report, "prune", &cur);
            }
        }
        if opts.drop_degenerate {
            let (dropped, r) = drop_degenerate(&cur)?;
            if !r.removed.is_empty() {
                dropped_any = true;
                report.degenerate.extend(r.degenerate);
                report.removed.extend(r.removed);
                stage(&mut report, "drop", &dropped);
                let (merged, r) = merge_identical(&dropped);
                cur = merged;
                report.merged_classes.extend(r.merged_classes);
                stage(&mut report, "merge", &cur);
            }
        }
        if cur == prev {
            report.fixpoint = true;
            break;
        }
    }
    report.skipped_vertices = skipped.into_iter().collect();
    report.pruned.sort_by(|a, b| a.set.cmp(&b.set));
    report.pruned.dedup();
    if !opts.drop_degenerate {
        report.degenerate = flag_degenerate(&cur)?.degenerate;
    }
    report.after = cur.len();
    Ok((cur, report))
}
