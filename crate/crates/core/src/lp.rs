//! Dense two-phase simplex with Bland's rule.
//!
//! Problems here have a handful of variables and at most a few hundred rows,
//! so a dense tableau is plenty. Over [`Rational`](crate::Rational) the result
//! is exact; over floats pivots below [`Scalar::tolerance`] are ignored.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Ge,
    Le,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow<T> {
    pub coeffs: Vec<T>,
    pub sense: Sense,
    pub rhs: T,
}

impl<T: Scalar> LpRow<T> {
    pub fn new(coeffs: Vec<T>, sense: Sense, rhs: T) -> Self {
        Self { coeffs, sense, rhs }
    }
}

/// `minimize objectiveᵀx` subject to `rows` and `x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T> {
    pub objective: Vec<T>,
    pub rows: Vec<LpRow<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<T> {
    Optimal { x: Vec<T>, value: T },
    Infeasible,
    Unbounded,
}

impl<T: Scalar> LpOutcome<T> {
    pub fn optimal(self) -> Option<(Vec<T>, T)> {
        match self {
            LpOutcome::Optimal { x, value } => Some((x, value)),
            _ => None,
        }
    }
}

struct Tableau<T> {
    a: Vec<Vec<T>>,
    rhs: Vec<T>,
    basis: Vec<usize>,
}

impl<T: Scalar> Tableau<T> {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.a[row][col].clone();
        for v in self.a[row].iter_mut() {
            *v = v.clone() / p.clone();
        }
        self.rhs[row] = self.rhs[row].clone() / p;
        let pivot_row = self.a[row].clone();
        let pivot_rhs = self.rhs[row].clone();
        for i in 0..self.a.len() {
            if i == row {
                continue;
            }
            let f = self.a[i][col].clone();
            if f.is_zero() {
                continue;
            }
            for (v, pv) in self.a[i].iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v = v.clone() - f.clone() * pv.clone();
                }
            }
            self.rhs[i] = self.rhs[i].clone() - f * pivot_rhs.clone();
        }
        self.basis[row] = col;
    }

    /// Runs simplex iterations for `cost` over the columns flagged in `allowed`.
    /// Returns `false` when unbounded.
    fn optimize(&mut self, cost: &[T], allowed: &[bool]) -> bool {
        let tol = T::tolerance();
        loop {
            let mut entering = None;
            for (j, &ok) in allowed.iter().enumerate() {
                if !ok || self.basis.contains(&j) {
                    continue;
                }
                let mut r = cost[j].clone();
                for (i, &b) in self.basis.iter().enumerate() {
                    if !cost[b].is_zero() && !self.a[i][j].is_zero() {
                        r = r - cost[b].clone() * self.a[i][j].clone();
                    }
                }
                if r < T::zero() - tol.clone() {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else {
                return true;
            };
            let mut leaving: Option<(usize, T)> = None;
            for i in 0..self.a.len() {
                let aij = &self.a[i][col];
                if *aij > tol {
                    let ratio = self.rhs[i].clone() / aij.clone();
                    let better = match &leaving {
                        None => true,
                        Some((k, best)) => {
                            ratio < *best || (ratio == *best && self.basis[i] < self.basis[*k])
                        }
                    };
                    if better {
                        leaving = Some((i, ratio));
                    }
                }
            }
            let Some((row, _)) = leaving else {
                return false;
            };
            self.pivot(row, col);
        }
    }

    fn objective(&self, cost: &[T]) -> T {
        self.basis
            .iter()
            .zip(&self.rhs)
            .fold(T::zero(), |acc, (&b, v)| acc + cost[b].clone() * v.clone())
    }
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(objective: Vec<T>) -> Self {
        Self {
            objective,
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn push(&mut self, coeffs: Vec<T>, sense: Sense, rhs: T) {
        debug_assert_eq!(coeffs.len(), self.num_vars());
        self.rows.push(LpRow::new(coeffs, sense, rhs));
    }

    pub fn solve(&self) -> LpOutcome<T> {
        let n = self.num_vars();
        let m = self.rows.len();
        if m == 0 {
            // x = 0 is feasible; any negative cost is unbounded
            if self.objective.iter().any(|c| *c < T::zero()) {
                return LpOutcome::Unbounded;
            }
            return LpOutcome::Optimal {
                x: vec![T::zero(); n],
                value: T::zero(),
            };
        }

        // normalize so every rhs is non-negative
        let rows: Vec<(Vec<T>, Sense, T)> = self
            .rows
            .iter()
            .map(|r| {
                if r.rhs < T::zero() {
                    let sense = match r.sense {
                        Sense::Ge => Sense::Le,
                        Sense::Le => Sense::Ge,
                        Sense::Eq => Sense::Eq,
                    };
                    (
                        r.coeffs.iter().map(|c| -c.clone()).collect(),
                        sense,
                        -r.rhs.clone(),
                    )
                } else {
                    (r.coeffs.clone(), r.sense, r.rhs.clone())
                }
            })
            .collect();

        let num_slack = rows.iter().filter(|r| r.1 != Sense::Eq).count();
        let num_art = rows.iter().filter(|r| r.1 != Sense::Le).count();
        let total = n + num_slack + num_art;
        let art_start = n + num_slack;

        let mut a = vec![vec![T::zero(); total]; m];
        let mut rhs = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let (mut s, mut art) = (n, art_start);
        for (i, (coeffs, sense, b)) in rows.into_iter().enumerate() {
            a[i][..n].clone_from_slice(&coeffs);
            match sense {
                Sense::Le => {
                    a[i][s] = T::one();
                    basis.push(s);
                    s += 1;
                }
                Sense::Ge => {
                    a[i][s] = -T::one();
                    s += 1;
                    a[i][art] = T::one();
                    basis.push(art);
                    art += 1;
                }
                Sense::Eq => {
                    a[i][art] = T::one();
                    basis.push(art);
                    art += 1;
                }
            }
            rhs.push(b);
        }
        let mut tab = Tableau { a, rhs, basis };

        let all = vec![true; total];
        if num_art > 0 {
            let mut phase1 = vec![T::zero(); total];
            for c in phase1.iter_mut().skip(art_start) {
                *c = T::one();
            }
            tab.optimize(&phase1, &all);
            if tab.objective(&phase1) > T::tolerance() {
                return LpOutcome::Infeasible;
            }
            // drive zero-level artificials out of the basis where possible
            for i in 0..m {
                if tab.basis[i] >= art_start {
                    if let Some(j) = (0..art_start)
                        .find(|&j| !tab.basis.contains(&j) && tab.a[i][j].abs() > T::tolerance())
                    {
                        tab.pivot(i, j);
                    }
                }
            }
        }

        let mut cost = vec![T::zero(); total];
        cost[..n].clone_from_slice(&self.objective);
        let allowed: Vec<bool> = (0..total).map(|j| j < art_start).collect();
        if !tab.optimize(&cost, &allowed) {
            return LpOutcome::Unbounded;
        }
        let mut x = vec![T::zero(); n];
        for (i, &b) in tab.basis.iter().enumerate() {
            if b < n {
                x[b] = tab.rhs[i].clone();
            }
        }
        let value = x
            .iter()
            .zip(&self.objective)
            .fold(T::zero(), |acc, (xi, ci)| acc + xi.clone() * ci.clone());
        LpOutcome::Optimal { x, value }
    }
}
