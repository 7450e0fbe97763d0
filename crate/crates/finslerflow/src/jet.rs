//! Truncated multivariate Taylor (jet) arithmetic.
//!
//! A [`Jet`] carries every mixed partial derivative of a smooth function up to
//! a fixed total order (at most [`MAX_ORDER`]) in up to [`MAX_VARS`] variables.
//! The stored coefficient is the partial derivative itself, not the Taylor
//! coefficient; the order-0 entry is the function value. Multiplication is the
//! Leibniz rule with binomial weights, composition is univariate Faà di Bruno
//! in Horner form.
//!
//! Jets are generic over their scalar so that a whole evaluation pipeline can
//! itself be run in jet arithmetic (`Jet<Jet<f64>>`), which is how y-Hessians
//! of derived scalars such as the Ricci scalar are extracted.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{FinslerError, Result};

/// Highest total derivative order a jet can carry.
pub const MAX_ORDER: usize = 4;
/// Highest number of independent variables.
pub const MAX_VARS: usize = 8;

const NO_RANK: u32 = u32::MAX;

/// Exponent tuple of a mixed partial derivative, one entry per variable.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct MultiIndex {
    nvars: u8,
    exps: [u8; MAX_VARS],
}

impl MultiIndex {
    pub fn zero(nvars: usize) -> Self {
        assert!(nvars <= MAX_VARS);
        MultiIndex {
            nvars: nvars as u8,
            exps: [0; MAX_VARS],
        }
    }

    pub fn unit(nvars: usize, var: usize) -> Self {
        let mut m = Self::zero(nvars);
        m.exps[var] = 1;
        m
    }

    /// Build from explicit exponents, e.g. `[1, 0, 2]` for a third partial.
    pub fn new(exps: &[usize]) -> Self {
        assert!(exps.len() <= MAX_VARS);
        let mut m = Self::zero(exps.len());
        for (i, &e) in exps.iter().enumerate() {
            m.exps[i] = e as u8;
        }
        m
    }

    pub fn nvars(&self) -> usize {
        self.nvars as usize
    }

    pub fn degree(&self) -> usize {
        self.exps[..self.nvars()].iter().map(|&e| e as usize).sum()
    }

    pub fn exp(&self, var: usize) -> usize {
        self.exps[var] as usize
    }

    pub fn exponents(&self) -> &[u8] {
        &self.exps[..self.nvars()]
    }

    pub fn plus(&self, var: usize) -> Self {
        let mut m = *self;
        m.exps[var] += 1;
        m
    }
}

/// Shared per-(nvars, order) lookup data: the graded enumeration of
/// multi-indices, derivative shifts, and the Leibniz pair table.
///
/// The enumeration is graded by degree, so the table for order `m` is a prefix
/// of the table for order `m + 1`; jets of different orders can share ranks.
pub struct IndexTable {
    nvars: usize,
    order: usize,
    indices: Vec<MultiIndex>,
    rank: HashMap<MultiIndex, u32>,
    /// `up[r][v]` = rank of `indices[r] + e_v`, or `NO_RANK` past the order cap.
    up: Vec<[u32; MAX_VARS]>,
    mul_offsets: Vec<u32>,
    mul_pairs: Vec<(u32, u32, f64)>,
}

fn enumerate_degree(nvars: usize, degree: usize, out: &mut Vec<MultiIndex>) {
    fn rec(nvars: usize, var: usize, left: usize, cur: &mut MultiIndex, out: &mut Vec<MultiIndex>) {
        if var + 1 == nvars {
            cur.exps[var] = left as u8;
            out.push(*cur);
            return;
        }
        for e in (0..=left).rev() {
            cur.exps[var] = e as u8;
            rec(nvars, var + 1, left - e, cur, out);
        }
        cur.exps[var] = 0;
    }
    let mut cur = MultiIndex::zero(nvars);
    rec(nvars, 0, degree, &mut cur, out);
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut b = 1.0;
    for i in 0..k {
        b = b * (n - i) as f64 / (i + 1) as f64;
    }
    b
}

impl IndexTable {
    fn build(nvars: usize, order: usize) -> IndexTable {
        let mut indices = Vec::new();
        for d in 0..=order {
            enumerate_degree(nvars, d, &mut indices);
        }
        let rank: HashMap<MultiIndex, u32> = indices
            .iter()
            .enumerate()
            .map(|(r, m)| (*m, r as u32))
            .collect();
        let up = indices
            .iter()
            .map(|m| {
                let mut row = [NO_RANK; MAX_VARS];
                for (v, slot) in row.iter_mut().enumerate().take(nvars) {
                    if m.degree() < order {
                        *slot = rank[&m.plus(v)];
                    }
                }
                row
            })
            .collect();

        // Leibniz pairs: (fg)^(a) = sum_{b <= a} C(a, b) f^(b) g^(a-b).
        let mut mul_offsets = Vec::with_capacity(indices.len() + 1);
        let mut mul_pairs = Vec::new();
        mul_offsets.push(0u32);
        for target in &indices {
            let mut sub = MultiIndex::zero(nvars);
            loop {
                let mut coeff = 1.0;
                let mut rest = *target;
                for v in 0..nvars {
                    coeff *= binomial(target.exp(v), sub.exp(v));
                    rest.exps[v] = (target.exp(v) - sub.exp(v)) as u8;
                }
                mul_pairs.push((rank[&sub], rank[&rest], coeff));
                // advance `sub` through the box [0, target] in odometer order
                let mut v = 0;
                loop {
                    if v == nvars {
                        break;
                    }
                    if sub.exp(v) < target.exp(v) {
                        sub.exps[v] += 1;
                        break;
                    }
                    sub.exps[v] = 0;
                    v += 1;
                }
                if v == nvars {
                    break;
                }
            }
            mul_offsets.push(mul_pairs.len() as u32);
        }

        IndexTable {
            nvars,
            order,
            indices,
            rank,
            up,
            mul_offsets,
            mul_pairs,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn rank_of(&self, idx: &MultiIndex) -> Option<usize> {
        self.rank.get(idx).map(|&r| r as usize)
    }

    /// Rank of `indices[rank] + e_var`, if still within the order cap.
    pub fn up_rank(&self, rank: usize, var: usize) -> Option<usize> {
        let r = self.up[rank][var];
        (r != NO_RANK).then_some(r as usize)
    }

    /// Leibniz pair list (rank_a, rank_b, weight) for one target rank.
    pub fn mul_pairs_of(&self, target: usize) -> &[(u32, u32, f64)] {
        let lo = self.mul_offsets[target] as usize;
        let hi = self.mul_offsets[target + 1] as usize;
        &self.mul_pairs[lo..hi]
    }
}

/// Cached index tables; jets of equal shape share one `Arc`.
pub fn index_table(nvars: usize, order: usize) -> Arc<IndexTable> {
    static REGISTRY: OnceLock<Mutex<HashMap<(usize, usize), Arc<IndexTable>>>> = OnceLock::new();
    let reg = REGISTRY.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = reg.lock().unwrap();
    map.entry((nvars, order))
        .or_insert_with(|| Arc::new(IndexTable::build(nvars, order)))
        .clone()
}

/// Number of multi-indices with `nvars` variables and degree at most `order`.
pub fn table_len(nvars: usize, order: usize) -> usize {
    index_table(nvars, order).len()
}

/// Scalar ring a jet can be built over: `f64`, or another jet for nested
/// (pipeline-in-jet-arithmetic) evaluation.
pub trait Scalar: Clone + Send + Sync + 'static {
    /// Constant of the same nested shape as `self`.
    fn lift(&self, v: f64) -> Self;
    /// Leading (order-0, recursively scalar) value.
    fn value(&self) -> f64;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn scale(&self, c: f64) -> Self;
    /// `self += w * a * b`; the contraction primitive of every hot loop.
    fn mul_add_assign(&mut self, a: &Self, b: &Self, w: f64);
    fn recip(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn atan(&self) -> Self;
    fn is_finite(&self) -> bool;
}

impl Scalar for f64 {
    fn lift(&self, v: f64) -> f64 {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn add(&self, rhs: &f64) -> f64 {
        self + rhs
    }
    fn sub(&self, rhs: &f64) -> f64 {
        self - rhs
    }
    fn neg(&self) -> f64 {
        -self
    }
    fn mul(&self, rhs: &f64) -> f64 {
        self * rhs
    }
    fn scale(&self, c: f64) -> f64 {
        self * c
    }
    fn mul_add_assign(&mut self, a: &f64, b: &f64, w: f64) {
        *self = (w * a).mul_add(*b, *self);
    }
    fn recip(&self) -> f64 {
        1.0 / self
    }
    fn sqrt(&self) -> f64 {
        f64::sqrt(*self)
    }
    fn sin(&self) -> f64 {
        f64::sin(*self)
    }
    fn cos(&self) -> f64 {
        f64::cos(*self)
    }
    fn exp(&self) -> f64 {
        f64::exp(*self)
    }
    fn atan(&self) -> f64 {
        f64::atan(*self)
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

/// Dense truncated jet: all mixed partials of degree `<= order`.
#[derive(Clone)]
pub struct Jet<S = f64> {
    table: Arc<IndexTable>,
    c: Vec<S>,
}

impl<S: Scalar> Jet<S> {
    fn from_table(table: Arc<IndexTable>, c: Vec<S>) -> Jet<S> {
        debug_assert_eq!(table.len(), c.len());
        Jet { table, c }
    }

    pub fn constant(value: S, nvars: usize, order: usize) -> Result<Jet<S>> {
        if order > MAX_ORDER {
            return Err(FinslerError::OrderTooHigh {
                order,
                max: MAX_ORDER,
            });
        }
        if nvars > MAX_VARS {
            return Err(FinslerError::VarOutOfRange {
                var: nvars,
                nvars: MAX_VARS,
            });
        }
        let table = index_table(nvars, order);
        let mut c = vec![value.lift(0.0); table.len()];
        c[0] = value;
        Ok(Jet::from_table(table, c))
    }

    /// Jet of the coordinate function `var` with the given value.
    pub fn seed(var: usize, value: S, nvars: usize, order: usize) -> Result<Jet<S>> {
        if var >= nvars {
            return Err(FinslerError::VarOutOfRange { var, nvars });
        }
        let mut j = Jet::constant(value, nvars, order)?;
        if order >= 1 {
            // first-order entries sit right after the order-0 slot
            let r = j
                .table
                .rank_of(&MultiIndex::unit(nvars, var))
                .expect("unit index present");
            j.c[r] = j.c[0].lift(1.0);
        }
        Ok(j)
    }

    pub fn nvars(&self) -> usize {
        self.table.nvars()
    }

    pub fn order(&self) -> usize {
        self.table.order()
    }

    pub fn value(&self) -> &S {
        &self.c[0]
    }

    pub fn coeffs(&self) -> &[S] {
        &self.c
    }

    pub fn coeffs_mut(&mut self) -> &mut [S] {
        &mut self.c
    }

    pub fn table(&self) -> &Arc<IndexTable> {
        &self.table
    }

    /// Stored partial derivative for `idx`.
    pub fn partial(&self, idx: &MultiIndex) -> Result<S> {
        if idx.degree() > self.order() {
            return Err(FinslerError::DegreeTooHigh {
                degree: idx.degree(),
                order: self.order(),
            });
        }
        let r = self
            .table
            .rank_of(idx)
            .ok_or(FinslerError::VarOutOfRange {
                var: idx.nvars(),
                nvars: self.nvars(),
            })?;
        Ok(self.c[r].clone())
    }

    fn check_shape(&self, rhs: &Jet<S>) -> Result<()> {
        if self.nvars() != rhs.nvars() || self.order() != rhs.order() {
            return Err(FinslerError::ShapeMismatch {
                nvars_a: self.nvars(),
                order_a: self.order(),
                nvars_b: rhs.nvars(),
                order_b: rhs.order(),
            });
        }
        Ok(())
    }

    pub fn add(&self, rhs: &Jet<S>) -> Result<Jet<S>> {
        self.check_shape(rhs)?;
        let c = self
            .c
            .iter()
            .zip(&rhs.c)
            .map(|(a, b)| a.add(b))
            .collect();
        Ok(Jet::from_table(self.table.clone(), c))
    }

    pub fn sub(&self, rhs: &Jet<S>) -> Result<Jet<S>> {
        self.check_shape(rhs)?;
        let c = self
            .c
            .iter()
            .zip(&rhs.c)
            .map(|(a, b)| a.sub(b))
            .collect();
        Ok(Jet::from_table(self.table.clone(), c))
    }

    pub fn neg(&self) -> Jet<S> {
        Jet::from_table(self.table.clone(), self.c.iter().map(|a| a.neg()).collect())
    }

    pub fn scale(&self, w: f64) -> Jet<S> {
        Jet::from_table(
            self.table.clone(),
            self.c.iter().map(|a| a.scale(w)).collect(),
        )
    }

    /// Leibniz product truncated at the common order.
    pub fn mul(&self, rhs: &Jet<S>) -> Result<Jet<S>> {
        self.check_shape(rhs)?;
        let t = &self.table;
        let mut c = Vec::with_capacity(t.len());
        for target in 0..t.len() {
            let lo = t.mul_offsets[target] as usize;
            let hi = t.mul_offsets[target + 1] as usize;
            let mut acc = self.c[0].lift(0.0);
            for &(rb, rc, w) in &t.mul_pairs[lo..hi] {
                acc.mul_add_assign(&self.c[rb as usize], &rhs.c[rc as usize], w);
            }
            c.push(acc);
        }
        Ok(Jet::from_table(t.clone(), c))
    }

    /// Univariate composition `f(self)` from the outer derivatives
    /// `d⁰f .. dᵏf` evaluated at `self.value()` (k >= order).
    pub fn compose(&self, outer: &[S]) -> Result<Jet<S>> {
        let ord = self.order();
        if outer.len() < ord + 1 {
            return Err(FinslerError::InsufficientOrder {
                needed: ord + 1,
                got: outer.len(),
            });
        }
        let mut abar = self.clone();
        abar.c[0] = abar.c[0].lift(0.0);
        let mut fact = 1.0;
        for k in 1..=ord {
            fact *= k as f64;
        }
        let mut res = Jet::constant(outer[ord].scale(1.0 / fact), self.nvars(), ord)?;
        for k in (0..ord).rev() {
            res = res.mul(&abar)?;
            let mut fk = 1.0;
            for i in 1..=k {
                fk *= i as f64;
            }
            res.c[0] = res.c[0].add(&outer[k].scale(1.0 / fk));
        }
        Ok(res)
    }

    /// Jet of the partial derivative with respect to `var` (order drops by one).
    pub fn derivative(&self, var: usize) -> Result<Jet<S>> {
        if var >= self.nvars() {
            return Err(FinslerError::VarOutOfRange {
                var,
                nvars: self.nvars(),
            });
        }
        if self.order() == 0 {
            return Err(FinslerError::InsufficientOrder { needed: 1, got: 0 });
        }
        let out_table = index_table(self.nvars(), self.order() - 1);
        // graded enumeration: ranks in the smaller table match ours
        let c = (0..out_table.len())
            .map(|r| self.c[self.table.up[r][var] as usize].clone())
            .collect();
        Ok(Jet::from_table(out_table, c))
    }

    /// Same jet truncated to a lower order (prefix of the coefficient table).
    pub fn truncated(&self, order: usize) -> Result<Jet<S>> {
        if order > self.order() {
            return Err(FinslerError::InsufficientOrder {
                needed: order,
                got: self.order(),
            });
        }
        let out_table = index_table(self.nvars(), order);
        Ok(Jet::from_table(
            out_table.clone(),
            self.c[..out_table.len()].to_vec(),
        ))
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|a| a.is_finite())
    }

    pub fn sqrt(&self) -> Jet<S> {
        let v = &self.c[0];
        let s = v.sqrt();
        let i = s.recip();
        let i2 = i.mul(&i);
        let i3 = i2.mul(&i);
        let i5 = i3.mul(&i2);
        let i7 = i5.mul(&i2);
        let d = [
            s,
            i.scale(0.5),
            i3.scale(-0.25),
            i5.scale(0.375),
            i7.scale(-0.9375),
        ];
        self.compose(&d).expect("shape ok")
    }

    pub fn recip(&self) -> Jet<S> {
        let r = self.c[0].recip();
        let r2 = r.mul(&r);
        let r3 = r2.mul(&r);
        let r4 = r2.mul(&r2);
        let r5 = r4.mul(&r);
        let d = [r, r2.neg(), r3.scale(2.0), r4.scale(-6.0), r5.scale(24.0)];
        self.compose(&d).expect("shape ok")
    }

    pub fn sin(&self) -> Jet<S> {
        let s = self.c[0].sin();
        let c = self.c[0].cos();
        let d = [s.clone(), c.clone(), s.neg(), c.neg(), s];
        self.compose(&d).expect("shape ok")
    }

    pub fn cos(&self) -> Jet<S> {
        let s = self.c[0].sin();
        let c = self.c[0].cos();
        let d = [c.clone(), s.neg(), c.neg(), s, c];
        self.compose(&d).expect("shape ok")
    }

    pub fn exp(&self) -> Jet<S> {
        let e = self.c[0].exp();
        let d = [e.clone(), e.clone(), e.clone(), e.clone(), e];
        self.compose(&d).expect("shape ok")
    }

    pub fn atan(&self) -> Jet<S> {
        let v = &self.c[0];
        let one = v.lift(1.0);
        let w = one.add(&v.mul(v)).recip();
        let w2 = w.mul(&w);
        let w3 = w2.mul(&w);
        let w4 = w2.mul(&w2);
        let v2 = v.mul(v);
        let v3 = v2.mul(v);
        let d = [
            v.atan(),
            w,
            v.mul(&w2).scale(-2.0),
            v2.scale(6.0).sub(&one.scale(2.0)).mul(&w3),
            v.scale(24.0).sub(&v3.scale(24.0)).mul(&w4),
        ];
        self.compose(&d).expect("shape ok")
    }
}

impl<S: Scalar> std::fmt::Debug for Jet<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.nvars())
            .field("order", &self.order())
            .field("value", &self.c[0].value())
            .finish()
    }
}

/// Nested jets: a jet is itself a valid scalar. Shape mismatches inside a
/// pipeline are programming errors, hence the panics.
impl<S: Scalar> Scalar for Jet<S> {
    fn lift(&self, v: f64) -> Jet<S> {
        Jet::constant(self.c[0].lift(v), self.nvars(), self.order()).expect("shape ok")
    }
    fn value(&self) -> f64 {
        self.c[0].value()
    }
    fn add(&self, rhs: &Jet<S>) -> Jet<S> {
        Jet::add(self, rhs).expect("nested jet shape mismatch")
    }
    fn sub(&self, rhs: &Jet<S>) -> Jet<S> {
        Jet::sub(self, rhs).expect("nested jet shape mismatch")
    }
    fn neg(&self) -> Jet<S> {
        Jet::neg(self)
    }
    fn mul(&self, rhs: &Jet<S>) -> Jet<S> {
        Jet::mul(self, rhs).expect("nested jet shape mismatch")
    }
    fn scale(&self, c: f64) -> Jet<S> {
        Jet::scale(self, c)
    }
    fn mul_add_assign(&mut self, a: &Jet<S>, b: &Jet<S>, w: f64) {
        let t = &self.table;
        for target in 0..t.len() {
            let lo = t.mul_offsets[target] as usize;
            let hi = t.mul_offsets[target + 1] as usize;
            for &(rb, rc, bw) in &t.mul_pairs[lo..hi] {
                self.c[target].mul_add_assign(&a.c[rb as usize], &b.c[rc as usize], w * bw);
            }
        }
    }
    fn recip(&self) -> Jet<S> {
        Jet::recip(self)
    }
    fn sqrt(&self) -> Jet<S> {
        Jet::sqrt(self)
    }
    fn sin(&self) -> Jet<S> {
        Jet::sin(self)
    }
    fn cos(&self) -> Jet<S> {
        Jet::cos(self)
    }
    fn exp(&self) -> Jet<S> {
        Jet::exp(self)
    }
    fn atan(&self) -> Jet<S> {
        Jet::atan(self)
    }
    fn is_finite(&self) -> bool {
        Jet::is_finite(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jet(var: usize, v: f64, n: usize, ord: usize) -> Jet {
        Jet::seed(var, v, n, ord).unwrap()
    }

    #[test]
    fn seed_is_coordinate_function() {
        let j = jet(0, 2.0, 2, 2);
        assert_eq!(*j.value(), 2.0);
        assert_eq!(j.partial(&MultiIndex::new(&[1, 0])).unwrap(), 1.0);
        assert_eq!(j.partial(&MultiIndex::new(&[0, 1])).unwrap(), 0.0);
        assert_eq!(j.partial(&MultiIndex::new(&[1, 1])).unwrap(), 0.0);

        let j = jet(1, -0.5, 2, 4);
        assert_eq!(*j.value(), -0.5);
        assert_eq!(j.partial(&MultiIndex::new(&[0, 1])).unwrap(), 1.0);

        let j = jet(2, 0.0, 3, 1);
        assert_eq!(j.partial(&MultiIndex::new(&[0, 0, 1])).unwrap(), 1.0);
    }

    #[test]
    fn seed_rejects_bad_var() {
        assert!(matches!(
            Jet::<f64>::seed(3, 0.0, 2, 2),
            Err(FinslerError::VarOutOfRange { .. })
        ));
    }

    #[test]
    fn square_of_coordinate() {
        let v = jet(0, 3.0, 1, 2);
        let sq = v.mul(&v).unwrap();
        assert_eq!(*sq.value(), 9.0);
        assert_eq!(sq.partial(&MultiIndex::new(&[1])).unwrap(), 6.0);
        assert_eq!(sq.partial(&MultiIndex::new(&[2])).unwrap(), 2.0);
    }

    #[test]
    fn constant_times_jet_scales() {
        let c = Jet::constant(5.0, 2, 3).unwrap();
        let v = jet(1, 0.7, 2, 3);
        let w = v.sin();
        let p = c.mul(&w).unwrap();
        for (a, b) in p.coeffs().iter().zip(w.coeffs()) {
            assert!((a - 5.0 * b).abs() < 1e-14);
        }
    }

    #[test]
    fn sqrt_of_constant_and_linear() {
        let c = Jet::constant(4.0, 1, 2).unwrap();
        let s = c.sqrt();
        assert_eq!(*s.value(), 2.0);
        assert_eq!(s.partial(&MultiIndex::new(&[1])).unwrap(), 0.0);

        let a = jet(0, 4.0, 1, 2);
        let s = a.sqrt();
        assert!((s.value() - 2.0).abs() < 1e-15);
        assert!((s.partial(&MultiIndex::new(&[1])).unwrap() - 0.25).abs() < 1e-15);
        assert!((s.partial(&MultiIndex::new(&[2])).unwrap() + 0.03125).abs() < 1e-15);
    }

    #[test]
    fn quartic_fourth_derivative() {
        let v = jet(0, 1.0, 1, 4);
        let v2 = v.mul(&v).unwrap();
        let v4 = v2.mul(&v2).unwrap();
        assert_eq!(v4.partial(&MultiIndex::new(&[4])).unwrap(), 24.0);
    }

    #[test]
    fn bilinear_mixed_partial() {
        let v = jet(0, 2.0, 2, 2);
        let w = jet(1, 3.0, 2, 2);
        let p = v.mul(&w).unwrap();
        assert_eq!(p.partial(&MultiIndex::new(&[1, 1])).unwrap(), 1.0);
        assert_eq!(*p.value(), 6.0);
    }

    #[test]
    fn extract_rejects_high_degree() {
        let v = jet(0, 1.0, 2, 2);
        assert!(matches!(
            v.partial(&MultiIndex::new(&[2, 1])),
            Err(FinslerError::DegreeTooHigh { .. })
        ));
    }

    #[test]
    fn derivative_shifts_entries() {
        // f = v^3 w at (2, 5): df/dv = 3 v^2 w
        let v = jet(0, 2.0, 2, 4);
        let w = jet(1, 5.0, 2, 4);
        let f = v.mul(&v).unwrap().mul(&v).unwrap().mul(&w).unwrap();
        let fv = f.derivative(0).unwrap();
        assert_eq!(fv.order(), 3);
        assert!((fv.value() - 60.0).abs() < 1e-12);
        assert!((fv.partial(&MultiIndex::new(&[1, 0])).unwrap() - 60.0).abs() < 1e-12);
        assert!((fv.partial(&MultiIndex::new(&[0, 1])).unwrap() - 12.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let a = jet(0, 1.0, 2, 2);
        let b = jet(0, 1.0, 2, 3);
        assert!(matches!(
            a.mul(&b),
            Err(FinslerError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn nested_jet_hessian() {
        // outer jet in one variable s of f(s) = (3 + s)^2: f'' = 2
        let outer_seed = Jet::seed(0, 3.0, 1, 2).unwrap();
        let inner = Jet::<Jet<f64>>::constant(outer_seed.clone(), 1, 2).unwrap();
        let sq = inner.mul(&inner).unwrap();
        let out = sq.value();
        assert!((out.value() - 9.0).abs() < 1e-14);
        assert!((out.partial(&MultiIndex::new(&[1])).unwrap() - 6.0).abs() < 1e-14);
        assert!((out.partial(&MultiIndex::new(&[2])).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn table_sizes() {
        assert_eq!(table_len(4, 4), 70);
        assert_eq!(table_len(6, 4), 210);
        assert_eq!(table_len(4, 2), 15);
        assert_eq!(table_len(2, 4), 15);
    }
}
