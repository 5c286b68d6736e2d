//! Incidence matrices, characteristic polynomials, Perron roots and Hausdorff dimension.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{all_roots, QPoly};
use crate::gifsbuild::GifsSystem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DimensionError {
    #[error("Perron root iteration did not converge: {0}")]
    NonConvergence(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Nonnegative rational `n × n` matrix; for built systems, entry `(k, l)` counts the terms of
/// equation `k` that target `B_l`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IncidenceMatrix {
    rows: Vec<Vec<BigRational>>,
}

impl IncidenceMatrix {
    pub fn from_rows(rows: Vec<Vec<BigRational>>) -> Result<Self, DimensionError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(DimensionError::Invalid("matrix must be square".into()));
        }
        if rows.iter().flatten().any(Signed::is_negative) {
            return Err(DimensionError::Invalid("entries must be nonnegative".into()));
        }
        Ok(IncidenceMatrix { rows })
    }

    pub fn from_integers(rows: &[Vec<i64>]) -> Result<Self, DimensionError> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| BigRational::from_integer(x.into())).collect())
                .collect(),
        )
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<BigRational>] {
        &self.rows
    }

    pub fn get(&self, r: usize, c: usize) -> &BigRational {
        &self.rows[r][c]
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect())
            .collect()
    }

    /// Principal submatrix on `indices`.
    pub fn submatrix(&self, indices: &[usize]) -> IncidenceMatrix {
        IncidenceMatrix {
            rows: indices
                .iter()
                .map(|&r| indices.iter().map(|&c| self.rows[r][c].clone()).collect())
                .collect(),
        }
    }

    pub fn row_sums(&self) -> Vec<BigRational> {
        self.rows
            .iter()
            .map(|r| r.iter().fold(BigRational::zero(), |a, b| a + b))
            .collect()
    }
}

/// Multiplicity-counting incidence matrix of a system.
pub fn incidence_matrix(system: &GifsSystem) -> IncidenceMatrix {
    let n = system.len();
    let mut rows = vec![vec![BigRational::zero(); n]; n];
    for (k, eq) in system.equations().iter().enumerate() {
        for t in eq {
            rows[k][t.target] += BigRational::one();
        }
    }
    IncidenceMatrix { rows }
}

/// Exact `det(λI − M)`, monic, via the division-free Berkowitz recursion on an integer scaling.
pub fn char_poly(m: &IncidenceMatrix) -> QPoly {
    let n = m.size();
    if n == 0 {
        return QPoly::one();
    }
    let denom = m
        .rows
        .iter()
        .flatten()
        .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let scaled: Vec<Vec<BigInt>> = m
        .rows
        .iter()
        .map(|r| r.iter().map(|x| (x * &denom).to_integer()).collect())
        .collect();
    // Highest degree first.
    let int_coeffs = berkowitz(&scaled);
    // charpoly_M(λ) = D^{-n} charpoly_{DM}(Dλ)
    let mut coeffs = vec![BigRational::zero(); n + 1];
    for (pos, c) in int_coeffs.into_iter().enumerate() {
        let k = n - pos;
        coeffs[k] = BigRational::new(c, num_traits::pow(denom.clone(), n - k));
    }
    QPoly::new(coeffs)
}

/// Coefficients of `det(λI − A)`, highest degree first.
fn berkowitz(a: &[Vec<BigInt>]) -> Vec<BigInt> {
    let n = a.len();
    let mut vect = vec![BigInt::one(), -a[0][0].clone()];
    for r in 1..n {
        // t = [1, -a_rr, -R C, -R A C, ..., -R A^{r-1} C]
        let mut t = Vec::with_capacity(r + 2);
        t.push(BigInt::one());
        t.push(-a[r][r].clone());
        let mut v: Vec<BigInt> = (0..r).map(|i| a[i][r].clone()).collect();
        for step in 0..r {
            let dot: BigInt = (0..r).map(|j| &a[r][j] * &v[j]).sum();
            t.push(-dot);
            if step + 1 < r {
                v = (0..r)
                    .map(|i| (0..r).map(|j| &a[i][j] * &v[j]).sum())
                    .collect();
            }
        }
        let mut next = vec![BigInt::zero(); r + 2];
        for (i, out) in next.iter_mut().enumerate() {
            for (j, vj) in vect.iter().enumerate().take(i + 1) {
                if !vj.is_zero() && !t[i - j].is_zero() {
                    *out += &t[i - j] * vj;
                }
            }
        }
        vect = next;
    }
    vect
}

/// Strongly connected components of the support digraph, each with its Perron root.
pub fn component_perron_roots(m: &[Vec<f64>]) -> Result<Vec<(Vec<usize>, f64)>, DimensionError> {
    let n = m.len();
    let mut g = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for (r, row) in m.iter().enumerate() {
        for (c, &x) in row.iter().enumerate() {
            if x > 0.0 {
                g.add_edge(nodes[r], nodes[c], ());
            }
        }
    }
    let mut out = Vec::new();
    for comp in tarjan_scc(&g) {
        let mut idx: Vec<usize> = comp.iter().map(|v| v.index()).collect();
        idx.sort_unstable();
        let block: Vec<Vec<f64>> = idx
            .iter()
            .map(|&r| idx.iter().map(|&c| m[r][c]).collect())
            .collect();
        let root = irreducible_perron_root(&block)?;
        out.push((idx, root));
    }
    out.sort_by(|a, b| a.0[0].cmp(&b.0[0]));
    Ok(out)
}

const PERRON_TOL: f64 = 1e-13;
const PERRON_MAX_ITER: usize = 200_000;

/// Perron root of an irreducible nonnegative block by power iteration on `B + I`, bracketed by
/// Collatz–Wielandt bounds. A 1×1 block is its own root.
fn irreducible_perron_root(b: &[Vec<f64>]) -> Result<f64, DimensionError> {
    let n = b.len();
    if n == 1 {
        return Ok(b[0][0]);
    }
    let mut x = vec![1.0; n];
    let mut y = vec![0.0; n];
    for _ in 0..PERRON_MAX_ITER {
        for (r, yr) in y.iter_mut().enumerate() {
            *yr = x[r] + b[r].iter().zip(&x).map(|(a, xv)| a * xv).sum::<f64>();
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (yr, xr) in y.iter().zip(&x) {
            let q = yr / xr;
            lo = lo.min(q);
            hi = hi.max(q);
        }
        if hi - lo <= PERRON_TOL * hi {
            return Ok(0.5 * (lo + hi) - 1.0);
        }
        let scale = y.iter().cloned().fold(0.0, f64::max);
        if !(scale > 0.0 && scale.is_finite()) {
            break;
        }
        for (xr, yr) in x.iter_mut().zip(&y) {
            *xr = yr / scale;
        }
    }
    // Fall back to the largest real root of the characteristic polynomial, polished by Newton.
    let rows: Vec<Vec<BigRational>> = b
        .iter()
        .map(|r| r.iter().map(|&v| BigRational::from_float(v).unwrap_or_default()).collect())
        .collect();
    let p = char_poly(&IncidenceMatrix { rows });
    largest_real_root(&p).ok_or_else(|| {
        DimensionError::NonConvergence(format!("no Perron root found for a {n}×{n} block"))
    })
}

fn largest_real_root(p: &QPoly) -> Option<f64> {
    let mut best = all_roots(p)
        .into_iter()
        .filter(|z| z.im.abs() <= 1e-6 * z.norm().max(1.0))
        .map(|z| z.re)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))))?;
    let dp = p.derivative();
    for _ in 0..50 {
        let d = dp.eval_f64(best);
        if d == 0.0 {
            break;
        }
        let step = p.eval_f64(best) / d;
        best -= step;
        if step.abs() <= 1e-16 * best.abs().max(1.0) {
            break;
        }
    }
    Some(best)
}

/// Spectral radius of a nonnegative matrix: the largest Perron root over its components.
pub fn spectral_radius(m: &IncidenceMatrix) -> Result<f64, DimensionError> {
    spectral_radius_f64(&m.to_f64())
}

pub fn spectral_radius_f64(m: &[Vec<f64>]) -> Result<f64, DimensionError> {
    if m.is_empty() {
        return Ok(0.0);
    }
    Ok(component_perron_roots(m)?
        .into_iter()
        .map(|(_, r)| r)
        .fold(0.0, f64::max))
}

/// GIFS whose terms carry their own contraction ratios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedGifs {
    /// `equations[k]` lists `(ratio, target)` with 0-based targets.
    pub equations: Vec<Vec<(f64, usize)>>,
}

impl WeightedGifs {
    pub fn new(equations: Vec<Vec<(f64, usize)>>) -> Result<Self, DimensionError> {
        let n = equations.len();
        for (k, eq) in equations.iter().enumerate() {
            for &(r, t) in eq {
                if !(r > 0.0 && r < 1.0) {
                    return Err(DimensionError::Invalid(format!(
                        "equation {} has ratio {r} outside (0, 1)",
                        k + 1
                    )));
                }
                if t >= n {
                    return Err(DimensionError::Invalid(format!(
                        "equation {} targets attractor {} of {n}",
                        k + 1,
                        t + 1
                    )));
                }
            }
        }
        Ok(WeightedGifs { equations })
    }

    /// All terms of a built system with the common ratio `r`.
    pub fn from_system(system: &GifsSystem, ratio: f64) -> Result<Self, DimensionError> {
        Self::new(
            system
                .equations()
                .iter()
                .map(|eq| eq.iter().map(|t| (ratio, t.target)).collect())
                .collect(),
        )
    }

    /// `M(β)` with entries `Σ r_f^β`.
    pub fn matrix(&self, beta: f64) -> Vec<Vec<f64>> {
        let n = self.equations.len();
        let mut m = vec![vec![0.0; n]; n];
        for (k, eq) in self.equations.iter().enumerate() {
            for &(r, t) in eq {
                m[k][t] += r.powf(beta);
            }
        }
        m
    }
}

/// `β = log σ / (−log r)` for an equal-ratio system.
pub fn hausdorff_dim(system: &GifsSystem, ratio: f64) -> Result<f64, DimensionError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DimensionError::Invalid(format!("ratio {ratio} outside (0, 1)")));
    }
    let sigma = spectral_radius(&incidence_matrix(system))?;
    Ok(sigma.ln() / -ratio.ln())
}

/// Unique `β` with `ρ(M(β)) = 1`, by bisection.
pub fn hausdorff_dim_weighted(g: &WeightedGifs) -> Result<f64, DimensionError> {
    let terms = g.equations.iter().map(Vec::len).max().unwrap_or(0);
    let rmax = g
        .equations
        .iter()
        .flatten()
        .map(|&(r, _)| r)
        .fold(0.0f64, f64::max);
    if terms == 0 {
        return Ok(0.0);
    }
    let rho = |beta: f64| spectral_radius_f64(&g.matrix(beta));
    if rho(0.0)? <= 1.0 {
        return Ok(0.0);
    }
    let similarity = (terms as f64).ln() / -rmax.ln();
    let (mut lo, mut hi) = (0.0, (2.0 * similarity).max(1.0));
    while rho(hi)? > 1.0 {
        hi *= 2.0;
    }
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if rho(mid)? > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Best-effort minimal polynomial of `root` among the factors of `p`.
///
/// Rational roots are split off exactly. The remaining numeric roots are grouped into units
/// (a real root, or a complex-conjugate pair) and subsets of units are tried together with the
/// unit of `root`, fewest units first. The first product with integer coefficients that divides
/// exactly wins; `None` if the search cap is hit first.
pub fn factor_containing_root(p: &QPoly, root: f64) -> Option<QPoly> {
    use num_complex::Complex64;
    let sf = p.squarefree();
    let mut rest = sf.clone();
    for q in rational_roots(&sf) {
        let lin = QPoly::linear(q.clone());
        if (q.to_f64()? - root).abs() <= 1e-9 * root.abs().max(1.0) {
            return Some(lin);
        }
        rest = rest.exact_div(&lin)?;
    }
    let deg = rest.degree()?;
    if deg == 0 || rest.eval_f64(root).abs() > 1e-6 * (1.0 + root.abs()).powi(deg as i32) {
        return None;
    }
    let roots = all_roots(&rest);
    let anchor = (0..roots.len())
        .min_by(|&a, &b| (roots[a] - root).norm().total_cmp(&(roots[b] - root).norm()))?;

    let mut used = vec![false; roots.len()];
    let mut units: Vec<Vec<Complex64>> = Vec::new();
    let mut anchor_unit = 0;
    for k in 0..roots.len() {
        if used[k] {
            continue;
        }
        used[k] = true;
        let z = roots[k];
        let mut unit = vec![z];
        let mut has_anchor = k == anchor;
        if z.im.abs() > 1e-9 * (1.0 + z.norm()) {
            let partner = (0..roots.len())
                .filter(|&j| !used[j])
                .min_by(|&a, &b| (roots[a] - z.conj()).norm().total_cmp(&(roots[b] - z.conj()).norm()));
            if let Some(j) = partner {
                used[j] = true;
                unit.push(roots[j]);
                has_anchor |= j == anchor;
            }
        }
        if has_anchor {
            anchor_unit = units.len();
        }
        units.push(unit);
    }
    let others: Vec<usize> = (0..units.len()).filter(|&u| u != anchor_unit).collect();

    const MAX_SUBSETS: usize = 1 << 22;
    let mut tried = 0usize;
    for size in 0..=others.len() {
        for subset in combinations(others.len(), size) {
            tried += 1;
            if tried > MAX_SUBSETS {
                return None;
            }
            let mut poly = vec![Complex64::new(1.0, 0.0)];
            let chosen = std::iter::once(anchor_unit).chain(subset.iter().map(|&s| others[s]));
            for z in chosen.flat_map(|u| units[u].iter().copied()) {
                let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
                for (k, c) in poly.iter().enumerate() {
                    next[k + 1] += c;
                    next[k] -= c * z;
                }
                poly = next;
            }
            let rounded: Option<Vec<i64>> = poly
                .iter()
                .map(|c| {
                    let r = c.re.round();
                    let close = (c.re - r).abs() <= 1e-6 * (1.0 + r.abs()) && c.im.abs() <= 1e-6 * (1.0 + r.abs());
                    close.then_some(r as i64)
                })
                .collect();
            let Some(ints) = rounded else { continue };
            let cand = QPoly::from_ints(ints);
            if cand.divides(&rest) {
                return Some(cand);
            }
        }
    }
    None
}

/// Lexicographic k-subsets of 0..n, generated lazily.
fn combinations(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut cur: Option<Vec<usize>> = (k <= n).then(|| (0..k).collect());
    std::iter::from_fn(move || {
        let out = cur.clone()?;
        let c = cur.as_mut()?;
        match (0..k).rev().find(|&i| c[i] < n - k + i) {
            Some(i) => {
                c[i] += 1;
                for j in i + 1..k {
                    c[j] = c[j - 1] + 1;
                }
            }
            None => cur = None,
        }
        Some(out)
    })
}

/// Rational roots by the rational-root theorem on the integer-scaled polynomial.
pub fn rational_roots(p: &QPoly) -> Vec<BigRational> {
    let Some(deg) = p.degree() else { return Vec::new() };
    if deg == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut q = p.clone();
    while q.coeff(0).is_zero() && q.degree().unwrap_or(0) > 0 {
        if !out.contains(&BigRational::zero()) {
            out.push(BigRational::zero());
        }
        q = q.exact_div(&QPoly::linear(BigRational::zero())).unwrap();
    }
    let denom = q.coeffs().iter().fold(BigInt::one(), |a, c| a.lcm(c.denom()));
    let ints: Vec<BigInt> = q.coeffs().iter().map(|c| (c * &denom).to_integer()).collect();
    let (a0, an) = (ints[0].abs(), ints.last().unwrap().abs());
    let small = |x: &BigInt| x.to_u64().filter(|&v| v <= 1_000_000);
    let (Some(a0), Some(an)) = (small(&a0), small(&an)) else {
        return out;
    };
    let divisors = |v: u64| (1..=v).filter(move |d| v.is_multiple_of(*d));
    for num in divisors(a0) {
        for den in divisors(an) {
            for sign in [1i64, -1] {
                let cand = BigRational::new(BigInt::from(sign) * BigInt::from(num), BigInt::from(den));
                if !out.contains(&cand) && q.eval(&cand).is_zero() {
                    out.push(cand);
                }
            }
        }
    }
    out.sort();
    out
}

/// Summary of a dimension computation, serialized into reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub size: usize,
    pub matrix: Vec<Vec<String>>,
    /// Characteristic polynomial coefficients, constant term first.
    pub char_poly: Vec<String>,
    pub char_poly_text: String,
    pub perron_root: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perron_factor: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perron_factor_text: Option<String>,
}

pub fn dimension_report(system: &GifsSystem, ratio: Option<f64>) -> Result<DimensionReport, DimensionError> {
    let m = incidence_matrix(system);
    let p = char_poly(&m);
    let rho = spectral_radius(&m)?;
    let dimension = match ratio {
        Some(r) => Some(hausdorff_dim(system, r)?),
        None => None,
    };
    let factor = factor_containing_root(&p, rho);
    Ok(DimensionReport {
        size: m.size(),
        matrix: m
            .rows()
            .iter()
            .map(|r| r.iter().map(|x| x.to_string()).collect())
            .collect(),
        char_poly: p.coeffs().iter().map(|c| c.to_string()).collect(),
        char_poly_text: p.to_string(),
        perron_root: rho,
        ratio,
        dimension,
        perron_factor: factor
            .as_ref()
            .map(|f| f.coeffs().iter().map(|c| c.to_string()).collect()),
        perron_factor_text: factor.map(|f| f.to_string()),
    })
}
