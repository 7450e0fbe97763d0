//! Small analytic expression trees for structure coefficients, vector fields,
//! and lifted maps. Expressions evaluate over any jet scalar, so one tree
//! serves plain evaluation, derivative extraction, and nested-jet pipelines.

use std::sync::Arc;

use crate::jet::Scalar;

/// Analytic expression in a fixed list of coordinates.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Coordinate slot: for x-only fields this is `x^i`; lifted maps address
    /// all `2n` slots (x first, then y).
    Coord(usize),
    Add(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Neg(Arc<Expr>),
    Recip(Arc<Expr>),
    Sin(Arc<Expr>),
    Cos(Arc<Expr>),
    Exp(Arc<Expr>),
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn coord(i: usize) -> Expr {
        Expr::Coord(i)
    }

    pub fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Arc::new(self), Arc::new(rhs))
    }

    pub fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Arc::new(self), Arc::new(rhs))
    }

    pub fn neg(self) -> Expr {
        Expr::Neg(Arc::new(self))
    }

    pub fn recip(self) -> Expr {
        Expr::Recip(Arc::new(self))
    }

    pub fn sin(self) -> Expr {
        Expr::Sin(Arc::new(self))
    }

    pub fn cos(self) -> Expr {
        Expr::Cos(Arc::new(self))
    }

    pub fn exp(self) -> Expr {
        Expr::Exp(Arc::new(self))
    }

    pub fn scaled(self, c: f64) -> Expr {
        Expr::constant(c).mul(self)
    }

    /// `offset + sum_i coeffs[i] * coord(i)`.
    pub fn linear(coeffs: &[f64], offset: f64) -> Expr {
        let mut e = Expr::constant(offset);
        for (i, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                e = e.add(Expr::coord(i).scaled(c));
            }
        }
        e
    }

    pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
        let mut it = terms.into_iter();
        let first = it.next().unwrap_or(Expr::Const(0.0));
        it.fold(first, |acc, t| acc.add(t))
    }

    /// Evaluate over any scalar ring; `coords` supplies each coordinate slot.
    /// `proto` fixes the nested shape of constants.
    pub fn eval<S: Scalar>(&self, coords: &[S], proto: &S) -> S {
        match self {
            Expr::Const(v) => proto.lift(*v),
            Expr::Coord(i) => coords[*i].clone(),
            Expr::Add(a, b) => a.eval(coords, proto).add(&b.eval(coords, proto)),
            Expr::Mul(a, b) => a.eval(coords, proto).mul(&b.eval(coords, proto)),
            Expr::Neg(a) => a.eval(coords, proto).neg(),
            Expr::Recip(a) => a.eval(coords, proto).recip(),
            Expr::Sin(a) => a.eval(coords, proto).sin(),
            Expr::Cos(a) => a.eval(coords, proto).cos(),
            Expr::Exp(a) => a.eval(coords, proto).exp(),
        }
    }

    pub fn eval_f64(&self, coords: &[f64]) -> f64 {
        self.eval(coords, &0.0)
    }

    /// Highest coordinate slot referenced, if any.
    pub fn max_coord(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Coord(i) => Some(*i),
            Expr::Add(a, b) | Expr::Mul(a, b) => match (a.max_coord(), b.max_coord()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
            Expr::Neg(a) | Expr::Recip(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) => {
                a.max_coord()
            }
        }
    }

    /// Substitute `coord(i) -> offset[i] + sum_j a[i][j] coord(j)`.
    pub fn substitute_affine(&self, a: &[Vec<f64>], offset: &[f64]) -> Expr {
        match self {
            Expr::Const(v) => Expr::Const(*v),
            Expr::Coord(i) => Expr::linear(&a[*i], offset[*i]),
            Expr::Add(x, y) => x
                .substitute_affine(a, offset)
                .add(y.substitute_affine(a, offset)),
            Expr::Mul(x, y) => x
                .substitute_affine(a, offset)
                .mul(y.substitute_affine(a, offset)),
            Expr::Neg(x) => x.substitute_affine(a, offset).neg(),
            Expr::Recip(x) => x.substitute_affine(a, offset).recip(),
            Expr::Sin(x) => x.substitute_affine(a, offset).sin(),
            Expr::Cos(x) => x.substitute_affine(a, offset).cos(),
            Expr::Exp(x) => x.substitute_affine(a, offset).exp(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{Jet, MultiIndex};

    #[test]
    fn eval_matches_hand_computation() {
        // 1 + 0.5 sin(x0 + 2 x1)
        let e = Expr::constant(1.0).add(Expr::linear(&[1.0, 2.0], 0.0).sin().scaled(0.5));
        let v = e.eval_f64(&[0.3, 0.2]);
        assert!((v - (1.0 + 0.5 * (0.7f64).sin())).abs() < 1e-15);
    }

    #[test]
    fn jet_eval_produces_derivatives() {
        let e = Expr::coord(0).mul(Expr::coord(0)).add(Expr::coord(1).exp());
        let x = Jet::seed(0, 2.0, 2, 2).unwrap();
        let y = Jet::seed(1, 0.0, 2, 2).unwrap();
        let j = e.eval(&[x, y], &Jet::constant(0.0, 2, 2).unwrap());
        assert!((j.value() - 5.0).abs() < 1e-15);
        assert!((j.partial(&MultiIndex::new(&[1, 0])).unwrap() - 4.0).abs() < 1e-15);
        assert!((j.partial(&MultiIndex::new(&[0, 2])).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn affine_substitution() {
        // f(x) = sin(x0); substitute x0 -> x0 + c
        let e = Expr::coord(0).sin();
        let shifted = e.substitute_affine(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.4, 0.0]);
        assert!((shifted.eval_f64(&[0.1, 0.0]) - (0.5f64).sin()).abs() < 1e-15);
    }
}
