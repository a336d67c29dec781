//! Dense two-phase simplex over exact rationals with Bland's rule.
//!
//! Only meant for the tiny programs of this crate (at most a few dozen rows).

use num_traits::{Signed, Zero};

use crate::scalar::Rational;

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { value: Rational, x: Vec<Rational> },
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    obj: Vec<Rational>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn rhs(&self) -> usize {
        self.width
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (k, row) in self.rows.iter_mut().enumerate() {
            if k != r && !row[c].is_zero() {
                let factor = row[c];
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    if !pv.is_zero() {
                        *v -= factor * pv;
                    }
                }
            }
        }
        if !self.obj[c].is_zero() {
            let factor = self.obj[c];
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= factor * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Maximizes; `obj[j] < 0` marks an improving column.
    fn run(&mut self, allowed: impl Fn(usize) -> bool) -> bool {
        let rhs = self.rhs();
        loop {
            let Some(c) = (0..self.width).find(|&j| allowed(j) && self.obj[j].is_negative()) else {
                return true;
            };
            let mut best: Option<(usize, Rational)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                if row[c].is_positive() {
                    let ratio = row[rhs] / row[c];
                    let better = match &best {
                        None => true,
                        Some((br, bv)) => ratio < *bv || (ratio == *bv && self.basis[r] < self.basis[*br]),
                    };
                    if better {
                        best = Some((r, ratio));
                    }
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
    }
}

/// Maximize `c·x` subject to `A x = b`, `x ≥ 0`.
pub fn maximize(a: &[Vec<Rational>], b: &[Rational], c: &[Rational]) -> LpOutcome {
    let m = a.len();
    let n = c.len();
    let width = n + m;
    let mut rows = Vec::with_capacity(m);
    for (i, row) in a.iter().enumerate() {
        assert_eq!(row.len(), n, "constraint row {i} has wrong width");
        let sign = if b[i].is_negative() { -Rational::from_integer(1) } else { Rational::from_integer(1) };
        let mut r: Vec<Rational> = row.iter().map(|v| *v * sign).collect();
        r.extend((0..m).map(|k| if k == i { Rational::from_integer(1) } else { Rational::zero() }));
        r.push(b[i] * sign);
        rows.push(r);
    }
    // Phase one: maximize −Σ artificials.
    let mut obj = vec![Rational::zero(); width + 1];
    for r in &rows {
        for j in 0..n {
            obj[j] -= r[j];
        }
        obj[width] -= r[width];
    }
    let mut t = Tableau { rows, obj, basis: (n..n + m).collect(), width };
    t.run(|_| true);
    if t.obj[width].is_negative() {
        return LpOutcome::Infeasible;
    }
    // Drive zero-level artificials out of the basis; drop redundant rows.
    let mut r = 0;
    while r < t.rows.len() {
        if t.basis[r] >= n {
            if let Some(c) = (0..n).find(|&j| !t.rows[r][j].is_zero()) {
                t.pivot(r, c);
            } else {
                t.rows.remove(r);
                t.basis.remove(r);
                continue;
            }
        }
        r += 1;
    }
    // Phase two.
    let mut obj = vec![Rational::zero(); width + 1];
    for j in 0..n {
        obj[j] = -c[j];
    }
    for (row, &bcol) in t.rows.iter().zip(&t.basis) {
        let cb = c[bcol];
        if !cb.is_zero() {
            for j in 0..=width {
                obj[j] += cb * row[j];
            }
        }
    }
    t.obj = obj;
    if !t.run(|j| j < n) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![Rational::zero(); n];
    for (row, &bcol) in t.rows.iter().zip(&t.basis) {
        if bcol < n {
            x[bcol] = row[width];
        }
    }
    LpOutcome::Optimal { value: t.obj[width], x }
}

/// Is `z` a convex combination of `points`? Returns the weights if so.
pub fn convex_combination(points: &[Vec<Rational>], z: &[Rational]) -> Option<Vec<Rational>> {
    let d = z.len();
    let k = points.len();
    let mut a = vec![vec![Rational::zero(); k]; d + 1];
    for (j, p) in points.iter().enumerate() {
        for i in 0..d {
            a[i][j] = p[i];
        }
        a[d][j] = Rational::from_integer(1);
    }
    let mut b = z.to_vec();
    b.push(Rational::from_integer(1));
    match maximize(&a, &b, &vec![Rational::zero(); k]) {
        LpOutcome::Optimal { x, .. } => Some(x),
        _ => None,
    }
}
