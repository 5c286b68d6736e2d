//! Exact arithmetic in a number field `Q(λ)` with a designated complex embedding.
//!
//! Every constant of one analysis lives in a single primitive field, so equality of neighbor
//! maps reduces to equality of reduced coefficient vectors.

mod field;
pub mod poly;

use thiserror::Error;

pub use field::{all_roots, ArithOp, FieldDescriptor, FieldElement, NumberField};
pub use num_rational::BigRational as Rational;
pub use poly::QPoly;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("element is not invertible (minimal polynomial is reducible): {0}")]
    NonInvertible(String),
    #[error("root refinement failed: {0}")]
    RootRefinementFailed(String),
    #[error("invalid field descriptor: {0}")]
    InvalidDescriptor(String),
}

/// Parses `"3"`, `"-1/2"` or `"0.25"` into an exact rational.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: num_bigint::BigInt = n.trim().parse().ok()?;
        let d: num_bigint::BigInt = d.trim().parse().ok()?;
        if num_traits::Zero::is_zero(&d) {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches(['-', '+']), frac);
        let n: num_bigint::BigInt = digits.parse().ok()?;
        let d = num_bigint::BigInt::from(10u32).pow(frac.len() as u32);
        let r = Rational::new(n, d);
        return Some(if neg { -r } else { r });
    }
    s.parse::<num_bigint::BigInt>().ok().map(Rational::from_integer)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("-1/2"), Some(Rational::new((-1).into(), 2.into())));
        assert_eq!(parse_rational("2/4"), Some(Rational::new(1.into(), 2.into())));
        assert_eq!(parse_rational("0.25"), Some(Rational::new(1.into(), 4.into())));
        assert_eq!(parse_rational("-0.5"), Some(Rational::new((-1).into(), 2.into())));
        assert_eq!(parse_rational("7"), Some(Rational::from_integer(7.into())));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
    }
}

/// Serialized rational: a JSON integer or a string such as `"-3/4"`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(untagged)]
pub enum RationalRepr {
    Int(i64),
    Text(String),
}

impl RationalRepr {
    pub fn parse(&self) -> Option<Rational> {
        match self {
            RationalRepr::Int(n) => Some(Rational::from_integer((*n).into())),
            RationalRepr::Text(s) => parse_rational(s),
        }
    }
}

impl From<&Rational> for RationalRepr {
    fn from(q: &Rational) -> Self {
        use num_traits::ToPrimitive;
        match (q.is_integer(), q.to_integer().to_i64()) {
            (true, Some(n)) => RationalRepr::Int(n),
            _ => RationalRepr::Text(q.to_string()),
        }
    }
}

/// Converts a serialized coefficient vector into a field element.
pub fn element_from_repr(
    field: &std::sync::Arc<NumberField>,
    coeffs: &[RationalRepr],
) -> Result<FieldElement, String> {
    let parsed = coeffs
        .iter()
        .map(|c| c.parse().ok_or_else(|| format!("invalid rational coefficient {c:?}")))
        .collect::<Result<Vec<_>, _>>()?;
    if parsed.len() > field.degree() {
        return Err(format!(
            "coefficient vector has {} entries but the field has degree {}",
            parsed.len(),
            field.degree()
        ));
    }
    Ok(field.canonicalize(parsed))
}

pub fn element_to_repr(e: &FieldElement) -> Vec<RationalRepr> {
    e.coeffs().iter().map(RationalRepr::from).collect()
}
