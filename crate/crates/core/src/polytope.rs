//! Vertex enumeration for small polyhedra `{x : a_i · x >= b_i}`.
//!
//! Every `dim`-subset of rows is solved as a square system; solutions that
//! satisfy all rows are vertices. Exponential, but the systems used here have
//! at most a few dozen rows in two to five dimensions.

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `coeffs · x >= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace<T> {
    pub coeffs: Vec<T>,
    pub rhs: T,
}

impl<T: Scalar> HalfSpace<T> {
    pub fn new(coeffs: Vec<T>, rhs: T) -> Self {
        Self { coeffs, rhs }
    }

    pub fn slack(&self, x: &[T]) -> T {
        self.coeffs
            .iter()
            .zip(x)
            .fold(T::zero(), |acc, (a, v)| acc + a.clone() * v.clone())
            - self.rhs.clone()
    }

    pub fn contains(&self, x: &[T]) -> bool {
        self.slack(x) >= T::zero() - T::tolerance()
    }
}

/// Default cap on the number of square systems solved.
pub const DEFAULT_SUBSET_LIMIT: u128 = 2_000_000;

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Solves the square system `rows · x = rhs`; `None` when singular.
pub fn solve_square<T: Scalar>(rows: &[&HalfSpace<T>]) -> Option<Vec<T>> {
    let n = rows.len();
    let mut m: Vec<Vec<T>> = rows
        .iter()
        .map(|r| {
            let mut v = r.coeffs.clone();
            v.push(r.rhs.clone());
            v
        })
        .collect();
    for col in 0..n {
        // partial pivoting by magnitude; any nonzero pivot works for exact types
        let piv = (col..n)
            .max_by(|&a, &b| {
                m[a][col]
                    .abs()
                    .partial_cmp(&m[b][col].abs())
                    .expect("comparable")
            })
            .expect("non-empty");
        if m[piv][col].near_zero() {
            return None;
        }
        m.swap(col, piv);
        let p = m[col][col].clone();
        for v in m[col].iter_mut() {
            *v = v.clone() / p.clone();
        }
        let pivot_row = m[col].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i == col || row[col].is_zero() {
                continue;
            }
            let f = row[col].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v = v.clone() - f.clone() * pv.clone();
            }
        }
    }
    Some(m.into_iter().map(|mut r| r.pop().expect("rhs")).collect())
}

fn same_point<T: Scalar>(a: &[T], b: &[T]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x.clone() - y.clone()).near_zero())
}

/// All vertices of `{x in R^dim : row · x >= rhs for every row}`, in discovery order.
pub fn enumerate_vertices<T: Scalar>(
    dim: usize,
    rows: &[HalfSpace<T>],
    limit: u128,
) -> Result<Vec<Vec<T>>> {
    for r in rows {
        if r.coeffs.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: r.coeffs.len(),
            });
        }
    }
    let work = binomial(rows.len(), dim);
    if work > limit {
        return Err(Error::TooLarge {
            what: "vertex enumeration",
            size: work,
            limit,
        });
    }
    let mut out: Vec<Vec<T>> = Vec::new();
    for subset in rows.iter().combinations(dim) {
        let Some(x) = solve_square(&subset) else {
            continue;
        };
        if rows.iter().all(|r| r.contains(&x)) && !out.iter().any(|v| same_point(v, &x)) {
            out.push(x);
        }
    }
    Ok(out)
}
