//! Randomized property checks against independent oracles, shared by the core test suite and
//! the acceptance runner.

use std::sync::{Arc, OnceLock};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use gifs_core::algebra::{FieldDescriptor, FieldElement, NumberField, QPoly};
use gifs_core::dimension::{char_poly, IncidenceMatrix};
use gifs_core::nbrgraph::{reachability_closure, BoolMatrix, Edge, LabeledDigraph, Vertex};
use gifs_core::reduce::{inclusion_counterexample, language_included};

/// Runs `cases` cases from a fixed seed; the error names the minimal failing input.
fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn fields() -> &'static [Arc<NumberField>] {
    static FIELDS: OnceLock<Vec<Arc<NumberField>>> = OnceLock::new();
    FIELDS.get_or_init(|| {
        [
            (vec![4, 0, -1, 0, 1], Complex64::new(1.118034, 0.866025)),
            (vec![1, 2, 4, 2, 1], Complex64::new(-0.742934, 1.529086)),
            (vec![1, 0, 1], Complex64::new(0.0, 1.0)),
            (vec![1, -1, 1], Complex64::new(0.5, 0.866025)),
        ]
        .into_iter()
        .map(|(p, hint)| NumberField::new(FieldDescriptor::new(p, hint)).unwrap())
        .collect()
    })
}

fn rational() -> impl Strategy<Value = BigRational> {
    (-40i64..=40, 1i64..=12).prop_map(|(n, d)| BigRational::new(BigInt::from(n), BigInt::from(d)))
}

fn element(field: &Arc<NumberField>, coeffs: &[BigRational]) -> FieldElement {
    field.canonicalize(coeffs[..field.degree()].to_vec())
}

fn close(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= 1e-7 * (1.0 + a.norm().max(b.norm()))
}

pub fn field_axioms_and_inversion(cases: u32) -> Result<(), String> {
    let strategy = (
        0usize..4,
        prop::collection::vec(rational(), 4),
        prop::collection::vec(rational(), 4),
        prop::collection::vec(rational(), 4),
    );
    check(cases, strategy, |(which, a, b, c)| {
        let fs = fields();
        let f = &fs[which];
        let (a, b, c) = (element(f, &a), element(f, &b), element(f, &c));
        prop_assert_eq!(&(&a + &b), &(&b + &a));
        prop_assert_eq!(&(&a * &b), &(&b * &a));
        prop_assert_eq!(&(&(&a * &b) * &c), &(&a * &(&b * &c)));
        prop_assert_eq!(&(&a * &(&b + &c)), &(&(&a * &b) + &(&a * &c)));
        let same = a.clone();
        prop_assert!((&a - &same).is_zero());
        // The embedding is a ring homomorphism.
        prop_assert!(close((&a * &b).embed(), a.embed() * b.embed()));
        prop_assert!(close((&a + &c).embed(), a.embed() + c.embed()));
        if !a.is_zero() {
            let inv = a.inverse().unwrap();
            prop_assert!((&a * &inv).is_one());
            prop_assert!(close(inv.embed(), a.embed().inv()));
        } else {
            prop_assert!(a.inverse().is_err());
        }
        Ok(())
    })
}

/// Σ_{k=1}^{n} M^k by repeated boolean products, entry by entry.
fn power_sum_oracle(adj: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = adj.len();
    let mut power = adj.to_vec();
    let mut sum = adj.to_vec();
    for _ in 1..n {
        let mut next = vec![vec![false; n]; n];
        for r in 0..n {
            for k in 0..n {
                if power[r][k] {
                    for c in 0..n {
                        next[r][c] |= adj[k][c];
                    }
                }
            }
        }
        power = next;
        for r in 0..n {
            for c in 0..n {
                sum[r][c] |= power[r][c];
            }
        }
    }
    sum
}

fn digraph() -> impl Strategy<Value = Vec<Vec<bool>>> {
    (1usize..=64, 0.0f64..0.15).prop_flat_map(|(n, density)| {
        prop::collection::vec(prop::collection::vec(prop::bool::weighted(density), n), n)
    })
}

pub fn closure_matches_power_sum(cases: u32) -> Result<(), String> {
    check(cases, digraph(), |adj| {
        let got = reachability_closure(&BoolMatrix::from_rows(&adj)).rows();
        prop_assert_eq!(got, power_sum_oracle(&adj));
        Ok(())
    })
}

/// det(λI − A) by cofactor expansion along the first row, over Q[λ].
fn cofactor_char_poly(a: &[Vec<BigRational>]) -> QPoly {
    fn det(m: &[Vec<QPoly>]) -> QPoly {
        match m.len() {
            0 => QPoly::one(),
            1 => m[0][0].clone(),
            n => {
                let mut total = QPoly::zero();
                for col in 0..n {
                    if m[0][col].is_zero() {
                        continue;
                    }
                    let minor: Vec<Vec<QPoly>> = m[1..]
                        .iter()
                        .map(|row| {
                            row.iter()
                                .enumerate()
                                .filter(|(c, _)| *c != col)
                                .map(|(_, p)| p.clone())
                                .collect()
                        })
                        .collect();
                    let term = m[0][col].mul(&det(&minor));
                    total = if col % 2 == 0 {
                        total.add(&term)
                    } else {
                        total.sub(&term)
                    };
                }
                total
            }
        }
    }
    let n = a.len();
    let lambda = QPoly::from_ints([0, 1]);
    let m: Vec<Vec<QPoly>> = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| {
                    let entry = QPoly::constant(-a[r][c].clone());
                    if r == c {
                        entry.add(&lambda)
                    } else {
                        entry
                    }
                })
                .collect()
        })
        .collect();
    det(&m)
}

fn nonneg_matrix() -> impl Strategy<Value = Vec<Vec<BigRational>>> {
    let entry = prop_oneof![
        3 => Just(BigRational::from_integer(BigInt::from(0))),
        4 => (0i64..=4).prop_map(|n| BigRational::from_integer(BigInt::from(n))),
        2 => (0i64..=6, 1i64..=5).prop_map(|(n, d)| BigRational::new(BigInt::from(n), BigInt::from(d))),
    ];
    (1usize..=6)
        .prop_flat_map(move |n| prop::collection::vec(prop::collection::vec(entry.clone(), n), n))
}

pub fn char_poly_matches_cofactor_expansion(cases: u32) -> Result<(), String> {
    check(cases, nonneg_matrix(), |rows| {
        let m = IncidenceMatrix::from_rows(rows.clone()).unwrap();
        prop_assert_eq!(char_poly(&m), cofactor_char_poly(&rows));
        Ok(())
    })
}

const MAX_WORD: usize = 12;

/// Random overlap graph on `n` vertices (vertex 0 is the identity) as `(source, target, label)`.
fn automaton() -> impl Strategy<Value = (usize, usize, Vec<(usize, usize, usize)>)> {
    (2usize..=12, 2usize..=3).prop_flat_map(|(n, m)| {
        let edge = (1..n, 0..n, 1..=m);
        (Just(n), Just(m), prop::collection::vec(edge, 0..=3 * n))
    })
}

fn to_graph(n: usize, m: usize, edges: &[(usize, usize, usize)]) -> LabeledDigraph {
    let vertices = (0..n)
        .map(|k| Vertex {
            name: format!("v{k}"),
            map: None,
        })
        .collect();
    let edges = edges
        .iter()
        .map(|&(source, target, i)| Edge {
            source,
            target,
            i,
            j: i,
        })
        .collect();
    LabeledDigraph::new(m, vertices, edges).unwrap()
}

/// Bitmask NFA for the oracle: `step[v][a]` is the successor set of `v` on label `a + 1`.
struct Nfa {
    step: Vec<Vec<u16>>,
    m: usize,
}

impl Nfa {
    fn new(n: usize, m: usize, edges: &[(usize, usize, usize)]) -> Self {
        let mut step = vec![vec![0u16; m]; n];
        for &(s, t, i) in edges {
            step[s][i - 1] |= 1 << t;
        }
        Nfa { step, m }
    }

    /// Successor set, and whether the identity (absorbing, final) was hit.
    fn advance(&self, set: u16, a: usize) -> (u16, bool) {
        let mut next = 0u16;
        for (v, row) in self.step.iter().enumerate() {
            if set & (1 << v) != 0 {
                next |= row[a];
            }
        }
        (next & !1, next & 1 != 0)
    }

    fn accepts(&self, start: u16, word: &[usize]) -> bool {
        let mut cur = start;
        for &a in word {
            let (next, hit) = self.advance(cur, a - 1);
            if hit {
                return true;
            }
            cur = next;
        }
        false
    }

    /// Shortest word of length ≤ MAX_WORD accepted from `s` but not from `targets`.
    fn shortest_counterexample(&self, s: u16, targets: u16) -> Option<usize> {
        let mut frontier = vec![(s, targets)];
        for len in 1..=MAX_WORD {
            let mut next = Vec::new();
            for &(cs, ct) in &frontier {
                for a in 0..self.m {
                    let (ns, hs) = self.advance(cs, a);
                    let (nt, ht) = self.advance(ct, a);
                    if ht {
                        continue;
                    }
                    if hs {
                        return Some(len);
                    }
                    if ns != 0 {
                        next.push((ns, nt));
                    }
                }
            }
            if next.is_empty() {
                return None;
            }
            frontier = next;
        }
        None
    }
}

pub fn language_inclusion_matches_enumeration(cases: u32) -> Result<(), String> {
    check(
        cases,
        (automaton(), 1usize..64, 0u16..4096),
        |((n, m, edges), s_pick, t_mask)| {
            let og = to_graph(n, m, &edges);
            let nfa = Nfa::new(n, m, &edges);
            let s = 1 + s_pick % (n - 1);
            let targets: Vec<usize> = (1..n).filter(|&v| t_mask & (1 << (v - 1)) != 0).collect();
            let t_bits = targets.iter().fold(0u16, |acc, &v| acc | (1 << v));

            let included = language_included(&og, s, &targets).unwrap();
            let witness = inclusion_counterexample(&og, s, &targets).unwrap();
            prop_assert_eq!(included, witness.is_none());
            let enumerated = nfa.shortest_counterexample(1 << s, t_bits);
            match (&witness, enumerated) {
                (None, found) => prop_assert_eq!(found, None),
                (Some(w), found) => {
                    prop_assert!(nfa.accepts(1 << s, w));
                    prop_assert!(!nfa.accepts(t_bits, w));
                    if w.len() <= MAX_WORD {
                        prop_assert_eq!(found, Some(w.len()));
                    } else {
                        prop_assert_eq!(found, None);
                    }
                }
            }
            Ok(())
        },
    )
}
