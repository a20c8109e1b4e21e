//! Exact linear algebra over Q: nullspaces by row reduction and strict
//! homogeneous inequality systems by Fourier–Motzkin elimination.

use std::collections::HashSet;

use num_traits::{One, Signed, Zero};

use super::rational::Rational;

type Row = Vec<Rational>;

/// Basis of `{x ∈ Q^n : row · x = 0 for every row}`.
pub(crate) fn nullspace(rows: &[Row], n: usize) -> Vec<Row> {
    let mut m: Vec<Row> = rows.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..n {
        let Some(p) = (r..m.len()).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][col].recip();
        for v in m[r].iter_mut() {
            *v *= &inv;
        }
        let pivot_row = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != r && !row[col].is_zero() {
                let factor = row[col].clone();
                for (x, p) in row.iter_mut().zip(&pivot_row).take(n) {
                    *x -= &factor * p;
                }
            }
        }
        pivots.push(col);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    (0..n)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut v = vec![Rational::zero(); n];
            v[free] = Rational::one();
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[row][free].clone();
            }
            v
        })
        .collect()
}

/// Scales a row so its first nonzero entry has absolute value one. Positive
/// scaling leaves the solution set of `row · y > 0` unchanged.
fn normalize(mut row: Row) -> Row {
    if let Some(lead) = row.iter().find(|v| !v.is_zero()).map(|v| v.abs()) {
        if !lead.is_one() {
            let inv = lead.recip();
            for v in row.iter_mut() {
                *v *= &inv;
            }
        }
    }
    row
}

fn dedup(rows: impl IntoIterator<Item = Row>) -> Vec<Row> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for r in rows {
        let r = normalize(r);
        if seen.insert(r.clone()) {
            out.push(r);
        }
    }
    out
}

/// Finds `y ∈ Q^dim` with `row · y > 0` for every row, or `None` when no
/// such point exists.
pub(crate) fn strict_feasible(rows: &[Row], dim: usize) -> Option<Vec<Rational>> {
    let mut system = dedup(rows.iter().cloned());
    let mut alive: Vec<usize> = (0..dim).collect();
    let mut stages: Vec<(usize, Vec<Row>)> = Vec::new();

    loop {
        // A row with no variables left reads 0 > 0.
        if system.iter().any(|r| r.iter().all(Zero::is_zero)) {
            return None;
        }
        if system.is_empty() {
            break;
        }
        let var = *alive
            .iter()
            .filter(|&&v| system.iter().any(|r| !r[v].is_zero()))
            .min_by_key(|&&v| {
                let pos = system.iter().filter(|r| r[v].is_positive()).count();
                let neg = system.iter().filter(|r| r[v].is_negative()).count();
                (pos * neg) as isize - (pos + neg) as isize
            })
            .expect("a nonzero row has a live variable");

        let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), Vec::new());
        for r in &system {
            if r[var].is_positive() {
                pos.push(r);
            } else if r[var].is_negative() {
                neg.push(r);
            } else {
                rest.push(r.clone());
            }
        }
        let mut next = rest;
        for p in &pos {
            for q in &neg {
                let a = p[var].clone();
                let b = -q[var].clone();
                let combined: Row = p
                    .iter()
                    .zip(q.iter())
                    .map(|(pv, qv)| pv * &b + qv * &a)
                    .collect();
                next.push(combined);
            }
        }
        stages.push((var, system));
        alive.retain(|&v| v != var);
        system = dedup(next);
    }

    let mut y = vec![Rational::zero(); dim];
    for (var, rows) in stages.into_iter().rev() {
        let mut lower: Option<Rational> = None;
        let mut upper: Option<Rational> = None;
        for r in &rows {
            let c = &r[var];
            if c.is_zero() {
                continue;
            }
            let rest: Rational = r
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != var)
                .map(|(j, v)| v * &y[j])
                .sum();
            let bound = -rest / c;
            if c.is_positive() {
                if lower.as_ref().is_none_or(|l| bound > *l) {
                    lower = Some(bound);
                }
            } else if upper.as_ref().is_none_or(|u| bound < *u) {
                upper = Some(bound);
            }
        }
        y[var] = match (lower, upper) {
            (Some(l), Some(u)) => (l + u) / Rational::from_integer(2.into()),
            (Some(l), None) => l + Rational::one(),
            (None, Some(u)) => u - Rational::one(),
            (None, None) => Rational::zero(),
        };
    }
    Some(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrangement::rational::int;

    fn row(v: &[i64]) -> Row {
        v.iter().map(|&x| int(x)).collect()
    }

    fn dot(a: &[Rational], b: &[Rational]) -> Rational {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn nullspace_of_single_row() {
        let basis = nullspace(&[row(&[1, -1, 0])], 3);
        assert_eq!(basis.len(), 2);
        for b in &basis {
            assert!(dot(&row(&[1, -1, 0]), b).is_zero());
        }
        assert_eq!(nullspace(&[], 2).len(), 2);
        assert!(nullspace(&[row(&[1, 0]), row(&[0, 1])], 2).is_empty());
    }

    #[test]
    fn nullspace_with_dependent_rows() {
        let rows = [row(&[1, 2, 3]), row(&[2, 4, 6]), row(&[0, 0, 0])];
        let basis = nullspace(&rows, 3);
        assert_eq!(basis.len(), 2);
        for b in &basis {
            for r in &rows {
                assert!(dot(r, b).is_zero());
            }
        }
    }

    #[test]
    fn cyclic_order_is_infeasible() {
        // x1 > x2, x3 > x1, x2 > x3
        let rows = [row(&[1, -1, 0]), row(&[-1, 0, 1]), row(&[0, 1, -1])];
        assert!(strict_feasible(&rows, 3).is_none());
    }

    #[test]
    fn chain_order_has_witness() {
        let rows = [row(&[1, -1, 0]), row(&[0, 1, -1]), row(&[1, 0, -1])];
        let y = strict_feasible(&rows, 3).unwrap();
        for r in &rows {
            assert!(dot(r, &y).is_positive());
        }
    }

    #[test]
    fn opposite_constraints_are_infeasible() {
        assert!(strict_feasible(&[row(&[1, 2]), row(&[-2, -4])], 2).is_none());
        assert!(strict_feasible(&[row(&[0, 0])], 2).is_none());
    }

    #[test]
    fn empty_system_is_feasible() {
        assert_eq!(strict_feasible(&[], 0), Some(vec![]));
        assert_eq!(strict_feasible(&[], 2), Some(vec![int(0), int(0)]));
    }
}
