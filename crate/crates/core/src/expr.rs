//! Symbolic tableau coefficients built from scaled phi functions.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::phi::{self, MAX_ORDER};
use crate::scalar::Scalar;

/// Expression tree in the scalar variable `z`.
///
/// `Phi { order: k, scale: c }` stands for `phi_k(c z)`.
#[derive(Debug, Clone, PartialEq)]
pub enum PhiExpr {
    Const(Scalar),
    Z,
    Phi { order: u32, scale: Scalar },
    Sum(Vec<PhiExpr>),
    Product(Vec<PhiExpr>),
    Neg(Box<PhiExpr>),
}

impl PhiExpr {
    pub fn constant(c: impl Into<Scalar>) -> Self {
        PhiExpr::Const(c.into())
    }

    pub fn zero() -> Self {
        PhiExpr::Const(Scalar::zero())
    }

    /// `phi_k(z)`.
    pub fn phi(order: u32) -> Self {
        PhiExpr::Phi {
            order,
            scale: Scalar::one(),
        }
    }

    /// `phi_k(c z)`.
    pub fn phi_at(order: u32, scale: Scalar) -> Self {
        PhiExpr::Phi { order, scale }
    }

    /// `c * self`, folding unit and zero factors.
    pub fn scaled(self, c: Scalar) -> Self {
        if c.is_zero() {
            return PhiExpr::zero();
        }
        if c.same_as(Scalar::one()) {
            return self;
        }
        if let PhiExpr::Const(k) = self {
            return PhiExpr::Const(k * c);
        }
        PhiExpr::Product(vec![PhiExpr::Const(c), self])
    }

    pub fn is_const_zero(&self) -> bool {
        matches!(self, PhiExpr::Const(c) if c.is_zero())
    }

    /// Structural validation: no empty n-ary nodes, supported phi orders,
    /// finite constants and scales.
    pub fn validate(&self) -> Result<()> {
        match self {
            PhiExpr::Const(c) => {
                if c.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Structure(format!("non-finite constant {c}")))
                }
            }
            PhiExpr::Z => Ok(()),
            PhiExpr::Phi { order, scale } => {
                if *order > MAX_ORDER {
                    return Err(Error::Structure(format!(
                        "phi order {order} exceeds {MAX_ORDER}"
                    )));
                }
                if !scale.is_finite() {
                    return Err(Error::Structure(format!("non-finite phi scale {scale}")));
                }
                Ok(())
            }
            PhiExpr::Sum(children) | PhiExpr::Product(children) => {
                if children.is_empty() {
                    return Err(Error::Structure("empty sum or product".into()));
                }
                children.iter().try_for_each(PhiExpr::validate)
            }
            PhiExpr::Neg(child) => child.validate(),
        }
    }

    /// Evaluates the expression at `z`.
    pub fn eval(&self, z: f64) -> Result<f64> {
        if !z.is_finite() {
            return Err(Error::Domain(format!("expression evaluated at z = {z}")));
        }
        self.validate()?;
        Ok(self.eval_valid(z))
    }

    pub(crate) fn eval_valid(&self, z: f64) -> f64 {
        match self {
            PhiExpr::Const(c) => c.to_f64(),
            PhiExpr::Z => z,
            PhiExpr::Phi { order, scale } => phi::phi_unchecked(*order, scale.to_f64() * z),
            PhiExpr::Sum(children) => children.iter().map(|c| c.eval_valid(z)).sum(),
            PhiExpr::Product(children) => children.iter().map(|c| c.eval_valid(z)).product(),
            PhiExpr::Neg(child) => -child.eval_valid(z),
        }
    }

    /// Largest phi order appearing in the tree.
    pub fn max_order(&self) -> Option<u32> {
        match self {
            PhiExpr::Const(_) | PhiExpr::Z => None,
            PhiExpr::Phi { order, .. } => Some(*order),
            PhiExpr::Sum(c) | PhiExpr::Product(c) => c.iter().filter_map(PhiExpr::max_order).max(),
            PhiExpr::Neg(c) => c.max_order(),
        }
    }
}

impl Add for PhiExpr {
    type Output = PhiExpr;
    fn add(self, rhs: PhiExpr) -> PhiExpr {
        if self.is_const_zero() {
            return rhs;
        }
        if rhs.is_const_zero() {
            return self;
        }
        let mut terms = Vec::new();
        for e in [self, rhs] {
            match e {
                PhiExpr::Sum(inner) => terms.extend(inner),
                other => terms.push(other),
            }
        }
        PhiExpr::Sum(terms)
    }
}

impl Neg for PhiExpr {
    type Output = PhiExpr;
    fn neg(self) -> PhiExpr {
        match self {
            PhiExpr::Const(c) => PhiExpr::Const(-c),
            PhiExpr::Neg(inner) => *inner,
            other => PhiExpr::Neg(Box::new(other)),
        }
    }
}

impl Sub for PhiExpr {
    type Output = PhiExpr;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn sub(self, rhs: PhiExpr) -> PhiExpr {
        self + (-rhs)
    }
}

impl Mul for PhiExpr {
    type Output = PhiExpr;
    fn mul(self, rhs: PhiExpr) -> PhiExpr {
        if self.is_const_zero() || rhs.is_const_zero() {
            return PhiExpr::zero();
        }
        let mut factors = Vec::new();
        for e in [self, rhs] {
            match e {
                PhiExpr::Product(inner) => factors.extend(inner),
                other => factors.push(other),
            }
        }
        PhiExpr::Product(factors)
    }
}

impl Mul<PhiExpr> for Scalar {
    type Output = PhiExpr;
    fn mul(self, rhs: PhiExpr) -> PhiExpr {
        rhs.scaled(self)
    }
}

impl fmt::Display for PhiExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhiExpr::Const(c) => write!(f, "{c}"),
            PhiExpr::Z => write!(f, "z"),
            PhiExpr::Phi { order, scale } if scale.same_as(Scalar::one()) => {
                write!(f, "phi{order}(z)")
            }
            PhiExpr::Phi { order, scale } => write!(f, "phi{order}({scale} z)"),
            PhiExpr::Sum(children) => {
                write!(f, "(")?;
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
            PhiExpr::Product(children) => {
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        write!(f, "*")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
            PhiExpr::Neg(child) => write!(f, "-{child}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phi::phi;

    #[test]
    fn product_of_scaled_phis() {
        let half = Scalar::ratio(1, 2);
        let e = PhiExpr::Product(vec![
            PhiExpr::constant(half),
            PhiExpr::phi_at(1, half),
            PhiExpr::Sum(vec![PhiExpr::phi_at(0, half), PhiExpr::constant(-1)]),
        ]);
        let z = -2.0;
        let oracle = 0.5 * phi(1, -1.0).unwrap() * ((-1.0f64).exp() - 1.0);
        assert!((e.eval(z).unwrap() - oracle).abs() < 1e-15);
    }

    #[test]
    fn difference_at_origin() {
        let e = PhiExpr::Sum(vec![PhiExpr::phi(1), PhiExpr::Neg(Box::new(PhiExpr::phi(2)))]);
        assert_eq!(e.eval(0.0).unwrap(), 0.5);
        let built = PhiExpr::phi(1) - PhiExpr::phi(2);
        assert_eq!(built.eval(0.0).unwrap(), 0.5);
    }

    #[test]
    fn variable_node() {
        let e = PhiExpr::Z * PhiExpr::phi(1);
        let z = -3.0;
        assert!((e.eval(z).unwrap() - (z.exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(PhiExpr::Sum(vec![]).eval(0.0), Err(Error::Structure(_))));
        assert!(matches!(PhiExpr::Product(vec![]).eval(0.0), Err(Error::Structure(_))));
        let bad = PhiExpr::phi(MAX_ORDER + 1);
        assert!(matches!(bad.eval(-1.0), Err(Error::Structure(_))));
        let nan = PhiExpr::Const(Scalar::real(f64::NAN));
        assert!(matches!(nan.eval(-1.0), Err(Error::Structure(_))));
        assert!(matches!(PhiExpr::phi(1).eval(f64::INFINITY), Err(Error::Domain(_))));
    }

    #[test]
    fn folding() {
        assert!(PhiExpr::phi(1).scaled(Scalar::zero()).is_const_zero());
        assert_eq!(PhiExpr::phi(1).scaled(Scalar::one()), PhiExpr::phi(1));
        assert_eq!(PhiExpr::zero() + PhiExpr::phi(2), PhiExpr::phi(2));
        assert_eq!(-(-PhiExpr::phi(2)), PhiExpr::phi(2));
        assert_eq!(
            format!("{}", Scalar::ratio(1, 2) * PhiExpr::phi_at(1, Scalar::ratio(1, 2))),
            "1/2*phi1(1/2 z)"
        );
    }
}
