use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::poly::{write_poly, QPoly};
use super::AlgebraError;

/// User-facing description of a number field `Q(λ) = Q[x]/(p)` with a chosen complex root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDescriptor {
    /// Integer coefficients of the monic minimal polynomial, constant term first.
    pub min_poly: Vec<i64>,
    /// Approximate location of the designated root, as `[re, im]`.
    pub root_hint: [f64; 2],
    #[serde(default = "default_embed_precision")]
    pub embed_precision: f64,
    /// Name of the generator used when printing elements.
    #[serde(default = "default_var")]
    pub var: String,
}

fn default_embed_precision() -> f64 {
    1e-12
}

fn default_var() -> String {
    "x".to_string()
}

impl FieldDescriptor {
    pub fn new(min_poly: Vec<i64>, root_hint: Complex64) -> Self {
        FieldDescriptor {
            min_poly,
            root_hint: [root_hint.re, root_hint.im],
            embed_precision: default_embed_precision(),
            var: default_var(),
        }
    }

    pub fn with_var(mut self, var: &str) -> Self {
        self.var = var.to_string();
        self
    }
}

/// A number field with its designated embedding into `C`, ready for arithmetic.
#[derive(Debug)]
pub struct NumberField {
    descriptor: FieldDescriptor,
    modulus: QPoly,
    root: Complex64,
}

impl NumberField {
    /// Validates the descriptor and refines the designated root.
    pub fn new(descriptor: FieldDescriptor) -> Result<Arc<Self>, AlgebraError> {
        let modulus = QPoly::from_ints(descriptor.min_poly.iter().copied());
        match modulus.degree() {
            None | Some(0) => {
                return Err(AlgebraError::InvalidDescriptor(
                    "minimal polynomial must have degree at least 1".into(),
                ))
            }
            _ if !modulus.is_monic() => {
                return Err(AlgebraError::InvalidDescriptor(
                    "minimal polynomial must be monic".into(),
                ))
            }
            _ => {}
        }
        if !(descriptor.embed_precision > 0.0) {
            return Err(AlgebraError::InvalidDescriptor(
                "embed_precision must be positive".into(),
            ));
        }
        let hint = Complex64::new(descriptor.root_hint[0], descriptor.root_hint[1]);
        let root = refine_root(&modulus, hint, descriptor.embed_precision)?;
        Ok(Arc::new(NumberField {
            descriptor,
            modulus,
            root,
        }))
    }

    /// `Q` itself, as the degree-one field `Q[x]/(x)`.
    pub fn rationals() -> Arc<Self> {
        Self::new(FieldDescriptor::new(vec![0, 1], Complex64::new(0.0, 0.0)))
            .expect("x is a valid modulus")
    }

    pub fn degree(&self) -> usize {
        self.modulus.degree().unwrap()
    }

    pub fn descriptor(&self) -> &FieldDescriptor {
        &self.descriptor
    }

    pub fn modulus(&self) -> &QPoly {
        &self.modulus
    }

    /// The designated complex root of the minimal polynomial.
    pub fn root(&self) -> Complex64 {
        self.root
    }

    pub fn var(&self) -> &str {
        &self.descriptor.var
    }

    pub fn zero(self: &Arc<Self>) -> FieldElement {
        FieldElement {
            field: Arc::clone(self),
            coeffs: vec![BigRational::zero(); self.degree()],
        }
    }

    pub fn one(self: &Arc<Self>) -> FieldElement {
        self.from_rational(BigRational::one())
    }

    /// The generator `λ`.
    pub fn generator(self: &Arc<Self>) -> FieldElement {
        self.canonicalize(vec![BigRational::zero(), BigRational::one()])
    }

    pub fn from_rational(self: &Arc<Self>, q: BigRational) -> FieldElement {
        self.canonicalize(vec![q])
    }

    pub fn from_int(self: &Arc<Self>, n: i64) -> FieldElement {
        self.from_rational(BigRational::from_integer(BigInt::from(n)))
    }

    /// Reduces an arbitrary coefficient vector modulo the minimal polynomial.
    pub fn canonicalize(self: &Arc<Self>, raw: Vec<BigRational>) -> FieldElement {
        let reduced = QPoly::new(raw).rem(&self.modulus);
        self.from_reduced(reduced)
    }

    fn from_reduced(self: &Arc<Self>, p: QPoly) -> FieldElement {
        let d = self.degree();
        let mut coeffs = p.into_coeffs();
        coeffs.resize(d, BigRational::zero());
        FieldElement {
            field: Arc::clone(self),
            coeffs,
        }
    }

    pub fn same_as(&self, other: &NumberField) -> bool {
        std::ptr::eq(self, other) || self.modulus == other.modulus && self.root == other.root
    }
}

/// Newton refinement from the hint; falls back to the nearest of all roots.
fn refine_root(p: &QPoly, hint: Complex64, precision: f64) -> Result<Complex64, AlgebraError> {
    let dp = p.derivative();
    let newton = |mut z: Complex64| -> Option<Complex64> {
        for _ in 0..200 {
            let d = dp.eval_complex(z);
            if d.norm() == 0.0 {
                return None;
            }
            let step = p.eval_complex(z) / d;
            z -= step;
            if !z.re.is_finite() || !z.im.is_finite() {
                return None;
            }
            if step.norm() <= 1e-15 * z.norm().max(1.0) {
                break;
            }
        }
        let d = dp.eval_complex(z);
        let residual_step = (p.eval_complex(z) / d).norm();
        (residual_step.is_finite() && residual_step <= precision).then_some(z)
    };
    if let Some(z) = newton(hint) {
        // Newton may wander off to a far root; accept only if it is also the nearest.
        let roots = all_roots(p);
        let nearest = roots
            .iter()
            .min_by(|a, b| (*a - hint).norm().total_cmp(&(*b - hint).norm()))
            .copied();
        match nearest {
            Some(n) if (n - z).norm() > 1e-6 * z.norm().max(1.0) => {}
            _ => return Ok(z),
        }
    }
    let roots = all_roots(p);
    let nearest = roots
        .into_iter()
        .min_by(|a, b| (*a - hint).norm().total_cmp(&(*b - hint).norm()))
        .ok_or_else(|| AlgebraError::RootRefinementFailed(format!("no roots found for {p}")))?;
    newton(nearest).ok_or_else(|| {
        AlgebraError::RootRefinementFailed(format!(
            "Newton iteration on {p} from {hint} did not converge to precision {precision:e}"
        ))
    })
}

/// All complex roots of `p` by simultaneous Aberth–Ehrlich iteration.
pub fn all_roots(p: &QPoly) -> Vec<Complex64> {
    let Some(d) = p.degree() else { return Vec::new() };
    if d == 0 {
        return Vec::new();
    }
    let c: Vec<f64> = p.monic().to_f64();
    let eval = |z: Complex64| {
        let (mut v, mut dv) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for &a in c.iter().rev() {
            dv = dv * z + v;
            v = v * z + a;
        }
        (v, dv)
    };
    // Starting points spread over a circle of the Fujiwara radius, rotated off the axes.
    let radius = 2.0
        * (0..d)
            .map(|k| c[k].abs().powf(1.0 / (d - k) as f64))
            .fold(0.0, f64::max)
            .max(1e-3);
    let mut z: Vec<Complex64> = (0..d)
        .map(|k| Complex64::from_polar(radius, std::f64::consts::TAU * k as f64 / d as f64 + 0.4))
        .collect();
    for _ in 0..1000 {
        let mut moved = 0.0f64;
        for k in 0..d {
            let (v, dv) = eval(z[k]);
            if v.norm() == 0.0 {
                continue;
            }
            let ratio = v / dv;
            let repulsion: Complex64 = (0..d)
                .filter(|&j| j != k)
                .map(|j| Complex64::new(1.0, 0.0) / (z[k] - z[j]))
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if step.re.is_finite() && step.im.is_finite() {
                z[k] -= step;
                moved = moved.max(step.norm() / z[k].norm().max(1.0));
            }
        }
        if moved <= 1e-15 {
            break;
        }
    }
    z
}

/// Element of a number field, stored as its reduced residue `c_0 + c_1 λ + … + c_{d-1} λ^{d-1}`.
#[derive(Clone)]
pub struct FieldElement {
    field: Arc<NumberField>,
    coeffs: Vec<BigRational>,
}

/// The four field operations accepted by [`FieldElement::arith`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl FieldElement {
    pub fn field(&self) -> &Arc<NumberField> {
        &self.field
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.coeffs[0].is_one() && self.coeffs[1..].iter().all(Zero::is_zero)
    }

    /// The rational value, if the element lies in `Q`.
    pub fn as_rational(&self) -> Option<&BigRational> {
        self.coeffs[1..]
            .iter()
            .all(Zero::is_zero)
            .then(|| &self.coeffs[0])
    }

    fn poly(&self) -> QPoly {
        QPoly::new(self.coeffs.clone())
    }

    fn check_field(&self, other: &FieldElement) {
        debug_assert!(
            self.field.same_as(&other.field),
            "mixing elements of different number fields"
        );
    }

    pub fn arith(&self, other: &FieldElement, op: ArithOp) -> Result<FieldElement, AlgebraError> {
        Ok(match op {
            ArithOp::Add => self + other,
            ArithOp::Sub => self - other,
            ArithOp::Mul => self * other,
            ArithOp::Div => self.checked_div(other)?,
        })
    }

    /// Multiplicative inverse by extended Euclid against the minimal polynomial.
    pub fn inverse(&self) -> Result<FieldElement, AlgebraError> {
        if self.is_zero() {
            return Err(AlgebraError::DivisionByZero);
        }
        if let Some(q) = self.as_rational() {
            return Ok(self.field.from_rational(q.recip()));
        }
        let (g, s, _) = self.poly().ext_gcd(self.field.modulus());
        if g.degree() != Some(0) {
            return Err(AlgebraError::NonInvertible(format!(
                "gcd({}, minimal polynomial) = {g}",
                self
            )));
        }
        Ok(self.field.canonicalize(s.into_coeffs()))
    }

    pub fn checked_div(&self, other: &FieldElement) -> Result<FieldElement, AlgebraError> {
        self.check_field(other);
        Ok(self * &other.inverse()?)
    }

    pub fn scale(&self, q: &BigRational) -> FieldElement {
        FieldElement {
            field: Arc::clone(&self.field),
            coeffs: self.coeffs.iter().map(|c| c * q).collect(),
        }
    }

    /// Value under the designated embedding.
    pub fn embed(&self) -> Complex64 {
        let root = self.field.root;
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| {
                acc * root + c.to_f64().unwrap_or(f64::NAN)
            })
    }

    /// Embedding with an explicit precision request.
    ///
    /// The error bound propagates the root's own refinement tolerance through Horner's scheme.
    pub fn embed_with_precision(&self, precision: f64) -> Result<Complex64, AlgebraError> {
        let root_err = self.field.descriptor.embed_precision;
        let r = self.field.root.norm() + root_err;
        // |d/dλ Σ c_k λ^k| ≤ Σ k |c_k| r^{k-1}
        let deriv_bound: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| k as f64 * c.to_f64().unwrap_or(f64::INFINITY).abs() * r.powi(k as i32 - 1))
            .sum();
        let rounding: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c.to_f64().unwrap_or(f64::INFINITY).abs() * r.powi(k as i32))
            .sum::<f64>()
            * 4.0
            * f64::EPSILON
            * self.coeffs.len() as f64;
        let bound = deriv_bound * root_err.min(1e-15 * r.max(1.0)) + rounding;
        if bound > precision {
            return Err(AlgebraError::RootRefinementFailed(format!(
                "embedding error bound {bound:e} exceeds requested precision {precision:e}"
            )));
        }
        Ok(self.embed())
    }
}

impl PartialEq for FieldElement {
    fn eq(&self, other: &Self) -> bool {
        self.check_field(other);
        self.coeffs == other.coeffs
    }
}

impl Eq for FieldElement {}

impl Hash for FieldElement {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.coeffs.hash(state);
    }
}

impl PartialOrd for FieldElement {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Lexicographic order on coefficients; used only to make output deterministic.
impl Ord for FieldElement {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.coeffs.cmp(&other.coeffs)
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FieldElement({self})")
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_poly(f, &self.coeffs, self.field.var())
    }
}

impl<'a> Add for &'a FieldElement {
    type Output = FieldElement;
    fn add(self, rhs: &'a FieldElement) -> FieldElement {
        self.check_field(rhs);
        FieldElement {
            field: Arc::clone(&self.field),
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub for &'a FieldElement {
    type Output = FieldElement;
    fn sub(self, rhs: &'a FieldElement) -> FieldElement {
        self.check_field(rhs);
        FieldElement {
            field: Arc::clone(&self.field),
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<'a> Mul for &'a FieldElement {
    type Output = FieldElement;
    fn mul(self, rhs: &'a FieldElement) -> FieldElement {
        self.check_field(rhs);
        let d = self.coeffs.len();
        let mut prod = vec![BigRational::zero(); 2 * d - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                if !b.is_zero() {
                    prod[i + j] += a * b;
                }
            }
        }
        // Reduce with the monic modulus from the top degree down.
        let m = self.field.modulus.coeffs();
        for k in (d..prod.len()).rev() {
            if prod[k].is_zero() {
                continue;
            }
            let c = std::mem::take(&mut prod[k]);
            for (j, mj) in m[..d].iter().enumerate() {
                if !mj.is_zero() {
                    prod[k - d + j] -= &c * mj;
                }
            }
        }
        prod.truncate(d);
        FieldElement {
            field: Arc::clone(&self.field),
            coeffs: prod,
        }
    }
}

impl Neg for &FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        FieldElement {
            field: Arc::clone(&self.field),
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for FieldElement {
            type Output = FieldElement;
            fn $m(self, rhs: FieldElement) -> FieldElement {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> Arc<NumberField> {
        NumberField::new(FieldDescriptor::new(vec![-1, 1, 1], Complex64::new(0.62, 0.0)).with_var("t"))
            .unwrap()
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn golden_ratio_identities() {
        let k = golden();
        let t = k.generator();
        let one = k.one();
        assert_eq!(&t * &t, &one - &t);
        assert_eq!(&t * &(&t + &one), one);
        assert_eq!(one.checked_div(&t).unwrap(), &t + &one);
    }

    #[test]
    fn division_by_zero_is_reported() {
        let k = golden();
        let err = k.one().checked_div(&k.zero()).unwrap_err();
        assert!(matches!(err, AlgebraError::DivisionByZero));
    }

    #[test]
    fn reducible_modulus_surfaces_as_non_invertible() {
        // x^2 - 1 = (x - 1)(x + 1); the element x - 1 is a zero divisor.
        let k = NumberField::new(FieldDescriptor::new(vec![-1, 0, 1], Complex64::new(1.1, 0.0))).unwrap();
        let e = &k.generator() - &k.one();
        assert!(matches!(e.inverse(), Err(AlgebraError::NonInvertible(_))));
    }

    #[test]
    fn embedding_of_generators() {
        let t = golden().generator().embed();
        assert!((t.re - 0.618_033_988_749_895).abs() < 1e-12 && t.im.abs() < 1e-15);
        assert_eq!(golden().zero().embed(), Complex64::new(0.0, 0.0));
        let gauss = NumberField::new(FieldDescriptor::new(vec![1, 0, 1], Complex64::new(0.1, 0.9))).unwrap();
        let i = gauss.generator().embed();
        assert!((i - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn hint_picks_the_nearest_root() {
        let gauss = NumberField::new(FieldDescriptor::new(vec![1, 0, 1], Complex64::new(0.3, -0.7))).unwrap();
        assert!((gauss.root() - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn canonicalize_reduces_and_normalizes() {
        let k = golden();
        let e = k.canonicalize(vec![q(0, 1), q(0, 1), q(1, 1)]);
        assert_eq!(e.coeffs(), &[q(1, 1), q(-1, 1)]);
        let r = NumberField::rationals().canonicalize(vec![q(2, 4)]);
        assert_eq!(r.coeffs(), &[q(1, 2)]);
        assert_eq!(k.canonicalize(e.coeffs().to_vec()), e);
    }

    #[test]
    fn invalid_descriptors_are_rejected() {
        assert!(NumberField::new(FieldDescriptor::new(vec![1], Complex64::new(0.0, 0.0))).is_err());
        assert!(NumberField::new(FieldDescriptor::new(vec![1, 2], Complex64::new(0.0, 0.0))).is_err());
    }

    #[test]
    fn precision_request_is_checked() {
        let t = golden().generator();
        assert!(t.embed_with_precision(1e-9).is_ok());
        assert!(t.embed_with_precision(1e-30).is_err());
    }

    #[test]
    fn display_uses_field_variable() {
        let k = golden();
        let e = &k.one() - &k.generator();
        assert_eq!(e.to_string(), "-t + 1");
    }
}
