//! Dense two-phase tableau simplex, generic over the scalar type.
//!
//! Solves `max c·x  s.t.  A x = b, x ≥ 0` with `b ≥ 0`. Pivoting follows
//! Bland's rule, so the exact-rational instantiation always terminates; the
//! `f64` instantiation treats magnitudes below `1e-11` as zero.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub trait LpScalar:
    Clone
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + PartialOrd
{
    fn is_pos(&self) -> bool;
    fn is_neg(&self) -> bool;
    fn is_nonzero(&self) -> bool {
        self.is_pos() || self.is_neg()
    }
}

const FLOAT_EPS: f64 = 1e-11;

impl LpScalar for f64 {
    fn is_pos(&self) -> bool {
        *self > FLOAT_EPS
    }
    fn is_neg(&self) -> bool {
        *self < -FLOAT_EPS
    }
}

impl LpScalar for BigRational {
    fn is_pos(&self) -> bool {
        self.is_positive()
    }
    fn is_neg(&self) -> bool {
        self.is_negative()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<T> {
    Optimal { x: Vec<T>, value: T },
    Infeasible,
    Unbounded,
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    /// Reduced costs; the last entry holds minus the objective value.
    obj: Vec<T>,
    basis: Vec<usize>,
    width: usize,
}

impl<T: LpScalar> Tableau<T> {
    fn rhs(&self) -> usize {
        self.width
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.rows[row][col].clone();
        for v in self.rows[row].iter_mut() {
            *v = v.clone() / p.clone();
        }
        let pivot_row = self.rows[row].clone();
        let eliminate = |target: &mut Vec<T>| {
            let f = target[col].clone();
            if f.is_nonzero() {
                for (t, p) in target.iter_mut().zip(&pivot_row) {
                    *t = t.clone() - f.clone() * p.clone();
                }
            }
            target[col] = T::zero();
        };
        for (r, target) in self.rows.iter_mut().enumerate() {
            if r != row {
                eliminate(target);
            }
        }
        eliminate(&mut self.obj);
        self.basis[row] = col;
    }

    /// Runs simplex iterations over the allowed columns. Returns false if unbounded.
    fn optimize(&mut self, allowed: usize) -> bool {
        loop {
            let Some(col) = (0..allowed).find(|&j| self.obj[j].is_pos()) else {
                return true;
            };
            let rhs = self.rhs();
            let mut best: Option<(usize, T)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                if row[col].is_pos() {
                    let ratio = row[rhs].clone() / row[col].clone();
                    let better = match &best {
                        None => true,
                        Some((br, bv)) => {
                            ratio < *bv
                                || (!(ratio.clone() - bv.clone()).is_nonzero()
                                    && self.basis[r] < self.basis[*br])
                        }
                    };
                    if better {
                        best = Some((r, ratio));
                    }
                }
            }
            let Some((row, _)) = best else {
                return false;
            };
            self.pivot(row, col);
        }
    }
}

/// Maximizes `c·x` subject to `a x = b`, `x ≥ 0`. Rows with negative `b`
/// are negated first.
pub fn maximize<T: LpScalar>(a: &[Vec<T>], b: &[T], c: &[T]) -> LpOutcome<T> {
    let m = a.len();
    let n = c.len();
    assert_eq!(b.len(), m);
    let width = n + m;

    let mut rows = Vec::with_capacity(m);
    for (r, (row, rhs)) in a.iter().zip(b).enumerate() {
        assert_eq!(row.len(), n);
        let flip = rhs.is_neg();
        let sign = |v: &T| if flip { -v.clone() } else { v.clone() };
        let mut full: Vec<T> = row.iter().map(sign).collect();
        full.extend((0..m).map(|k| if k == r { T::one() } else { T::zero() }));
        full.push(sign(rhs));
        rows.push(full);
    }

    // Phase 1: maximize −Σ artificials, starting from the artificial basis.
    let mut obj = vec![T::zero(); width + 1];
    for row in &rows {
        for j in 0..n {
            obj[j] = obj[j].clone() + row[j].clone();
        }
        obj[width] = obj[width].clone() + row[width].clone();
    }
    let mut t = Tableau {
        rows,
        obj,
        basis: (n..n + m).collect(),
        width,
    };
    t.optimize(n);
    if t.obj[width].is_pos() {
        return LpOutcome::Infeasible;
    }
    for r in 0..m {
        if t.basis[r] >= n {
            if let Some(col) = (0..n).find(|&j| t.rows[r][j].is_nonzero()) {
                t.pivot(r, col);
            }
        }
    }

    // Phase 2 reduced costs for the real objective.
    let mut obj: Vec<T> = c.iter().cloned().chain((0..=m).map(|_| T::zero())).collect();
    for (r, &bv) in t.basis.iter().enumerate() {
        if bv < n && c[bv].is_nonzero() {
            let cb = c[bv].clone();
            for (o, v) in obj.iter_mut().zip(&t.rows[r]) {
                *o = o.clone() - cb.clone() * v.clone();
            }
        }
    }
    t.obj = obj;
    if !t.optimize(n) {
        return LpOutcome::Unbounded;
    }

    let mut x = vec![T::zero(); n];
    for (r, &bv) in t.basis.iter().enumerate() {
        if bv < n {
            x[bv] = t.rows[r][width].clone();
        }
    }
    let value = -t.obj[width].clone();
    LpOutcome::Optimal { x, value }
}
