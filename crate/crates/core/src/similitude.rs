//! Planar similitudes `z ↦ a·z + b` with coefficients in a number field.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{
    element_from_repr, element_to_repr, AlgebraError, FieldElement, NumberField, RationalRepr,
};

/// `z ↦ a·z + b` with `a ≠ 0`. Equality is structural on the canonical coefficients.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Similitude {
    a: FieldElement,
    b: FieldElement,
}

impl Similitude {
    /// Returns `None` when the multiplier is zero.
    pub fn new(a: FieldElement, b: FieldElement) -> Option<Self> {
        (!a.is_zero()).then_some(Similitude { a, b })
    }

    pub fn identity(field: &Arc<NumberField>) -> Self {
        Similitude {
            a: field.one(),
            b: field.zero(),
        }
    }

    pub fn translation(b: FieldElement) -> Self {
        Similitude {
            a: b.field().one(),
            b,
        }
    }

    pub fn a(&self) -> &FieldElement {
        &self.a
    }

    pub fn b(&self) -> &FieldElement {
        &self.b
    }

    pub fn field(&self) -> &Arc<NumberField> {
        self.a.field()
    }

    pub fn is_identity(&self) -> bool {
        self.a.is_one() && self.b.is_zero()
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &Similitude) -> Similitude {
        Similitude {
            a: &self.a * &other.a,
            b: &(&self.a * &other.b) + &self.b,
        }
    }

    pub fn invert(&self) -> Similitude {
        let inv = self.a.inverse().expect("similitude multiplier is nonzero");
        Similitude {
            b: -&(&inv * &self.b),
            a: inv,
        }
    }

    /// Numeric image of `z` under the designated embedding.
    pub fn evaluate(&self, z: Complex64) -> Complex64 {
        self.a.embed() * z + self.b.embed()
    }

    /// Like [`Self::evaluate`], but fails if the embedding cannot meet `precision`.
    pub fn evaluate_checked(&self, z: Complex64, precision: f64) -> Result<Complex64, AlgebraError> {
        let scale = z.norm() + 1.0;
        let a = self.a.embed_with_precision(precision / scale)?;
        let b = self.b.embed_with_precision(precision / scale)?;
        Ok(a * z + b)
    }

    /// Contraction ratio `|σ(a)|`.
    pub fn ratio(&self) -> f64 {
        self.a.embed().norm()
    }

    /// Fixed point `b / (1 - a)`, computed numerically.
    pub fn fixed_point(&self) -> Option<Complex64> {
        let a = self.a.embed();
        let denom = Complex64::new(1.0, 0.0) - a;
        (denom.norm() > 0.0).then(|| self.b.embed() / denom)
    }

    pub fn to_numeric(&self) -> NumericMap {
        NumericMap {
            a: self.a.embed(),
            b: self.b.embed(),
        }
    }

    pub fn to_spec(&self) -> MapSpec {
        MapSpec {
            a: element_to_repr(&self.a),
            b: element_to_repr(&self.b),
        }
    }

    pub fn from_spec(field: &Arc<NumberField>, spec: &MapSpec) -> Result<Self, String> {
        let a = element_from_repr(field, &spec.a)?;
        let b = element_from_repr(field, &spec.b)?;
        Similitude::new(a, b).ok_or_else(|| "map multiplier must be nonzero".to_string())
    }
}

impl fmt::Display for Similitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let z = if self.a.is_one() {
            "z".to_string()
        } else if (-&self.a).is_one() {
            "-z".to_string()
        } else {
            format!("({})*z", self.a)
        };
        if self.b.is_zero() {
            write!(f, "{z}")
        } else {
            write!(f, "{z} + ({})", self.b)
        }
    }
}

impl fmt::Debug for Similitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Similitude[{self}]")
    }
}

/// Serialized map: coefficient vectors of `a` and `b` over the field basis `1, λ, …`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub a: Vec<RationalRepr>,
    pub b: Vec<RationalRepr>,
}

/// Double-precision affine map used for rendering.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NumericMap {
    pub a: Complex64,
    pub b: Complex64,
}

impl NumericMap {
    pub fn identity() -> Self {
        NumericMap {
            a: Complex64::new(1.0, 0.0),
            b: Complex64::new(0.0, 0.0),
        }
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        self.a * z + self.b
    }

    pub fn compose(&self, other: &NumericMap) -> NumericMap {
        NumericMap {
            a: self.a * other.a,
            b: self.a * other.b + self.b,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IfsError {
    #[error("an IFS needs at least one map")]
    Empty,
    #[error("map {index} is not contractive (ratio {ratio})")]
    NotContractive { index: usize, ratio: f64 },
    #[error("maps have unequal contraction ratios: map 1 has {first}, map {index} has {other}")]
    UnequalRatios { index: usize, first: f64, other: f64 },
    #[error("map {index} belongs to a different number field")]
    FieldMismatch { index: usize },
}

/// An ordered list of contracting similitudes sharing one ratio.
#[derive(Clone, Debug)]
pub struct IfsSpec {
    field: Arc<NumberField>,
    maps: Vec<Similitude>,
    ratio: f64,
}

impl IfsSpec {
    pub fn new(field: Arc<NumberField>, maps: Vec<Similitude>) -> Result<Self, IfsError> {
        let first = maps.first().ok_or(IfsError::Empty)?.ratio();
        for (k, f) in maps.iter().enumerate() {
            if !f.field().same_as(&field) {
                return Err(IfsError::FieldMismatch { index: k + 1 });
            }
            let r = f.ratio();
            if !(r > 0.0 && r < 1.0) {
                return Err(IfsError::NotContractive { index: k + 1, ratio: r });
            }
            if (r - first).abs() > 1e-12 {
                return Err(IfsError::UnequalRatios {
                    index: k + 1,
                    first,
                    other: r,
                });
            }
        }
        Ok(IfsSpec {
            field,
            maps,
            ratio: first,
        })
    }

    pub fn field(&self) -> &Arc<NumberField> {
        &self.field
    }

    pub fn maps(&self) -> &[Similitude] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// Map `i`, 1-based as in edge labels.
    pub fn map(&self, i: usize) -> &Similitude {
        &self.maps[i - 1]
    }

    /// Radius of a disk around the origin containing the attractor: `max|b_i| / (1 - r)`.
    pub fn bounding_radius(&self) -> f64 {
        let max_b = self
            .maps
            .iter()
            .map(|f| f.b().embed().norm())
            .fold(0.0, f64::max);
        max_b / (1.0 - self.ratio)
    }

    /// Reorders maps: position `k` receives the old map `ordering[k]` (1-based).
    pub fn permuted(&self, ordering: &[usize]) -> IfsSpec {
        IfsSpec {
            field: Arc::clone(&self.field),
            maps: ordering.iter().map(|&o| self.maps[o - 1].clone()).collect(),
            ratio: self.ratio,
        }
    }

    pub fn numeric_maps(&self) -> Vec<NumericMap> {
        self.maps.iter().map(Similitude::to_numeric).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::FieldDescriptor;

    fn gauss() -> Arc<NumberField> {
        NumberField::new(FieldDescriptor::new(vec![1, 0, 1], Complex64::new(0.0, 1.0)).with_var("i")).unwrap()
    }

    #[test]
    fn point_reflection_is_an_involution() {
        let k = gauss();
        let f = Similitude::new(-k.one(), k.from_int(4)).unwrap();
        assert_eq!(f.invert(), f);
        assert!(f.compose(&f).is_identity());
    }

    #[test]
    fn identity_laws() {
        let k = gauss();
        let f = Similitude::new(k.generator(), k.from_int(3)).unwrap();
        let id = Similitude::identity(&k);
        assert_eq!(f.compose(&id), f);
        assert_eq!(id.compose(&f), f);
        assert_eq!(id.invert(), id);
        assert!(f.invert().compose(&f).is_identity());
    }

    #[test]
    fn zero_multiplier_rejected() {
        let k = gauss();
        assert!(Similitude::new(k.zero(), k.one()).is_none());
    }

    #[test]
    fn evaluate_numeric() {
        let k = gauss();
        let id = Similitude::identity(&k);
        let z = Complex64::new(1.0, 1.0);
        assert_eq!(id.evaluate(z), z);
        let half = crate::algebra::Rational::new(1.into(), 2.into());
        // (-i/2) z + 1
        let f4 = Similitude::new(-&k.generator().scale(&half), k.one()).unwrap();
        assert!((f4.evaluate(Complex64::new(0.0, 0.0)) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(f4.evaluate_checked(z, 1e-9).is_ok());
    }

    #[test]
    fn unequal_ratios_rejected() {
        let k = gauss();
        let half = crate::algebra::Rational::new(1.into(), 2.into());
        let third = crate::algebra::Rational::new(1.into(), 3.into());
        let maps = vec![
            Similitude::new(k.one().scale(&half), k.zero()).unwrap(),
            Similitude::new(k.one().scale(&third), k.one()).unwrap(),
        ];
        assert!(matches!(
            IfsSpec::new(k.clone(), maps),
            Err(IfsError::UnequalRatios { index: 2, .. })
        ));
        let expanding = vec![Similitude::new(k.from_int(2), k.zero()).unwrap()];
        assert!(matches!(IfsSpec::new(k, expanding), Err(IfsError::NotContractive { .. })));
    }

    #[test]
    fn interval_bounding_radius() {
        let k = NumberField::rationals();
        let half = crate::algebra::Rational::new(1.into(), 2.into());
        let maps = vec![
            Similitude::new(k.one().scale(&half), k.zero()).unwrap(),
            Similitude::new(k.one().scale(&half), k.one()).unwrap(),
        ];
        let ifs = IfsSpec::new(k, maps).unwrap();
        assert!((ifs.bounding_radius() - 2.0).abs() < 1e-15);
    }
}
