//! Bounded-variable revised simplex with Bland's rule.
//!
//! Solves `max cᵀx` subject to `Ax = b` and `0 <= x <= u`. Nonbasic
//! variables sit at either bound. Phase 1 starts from an all-artificial
//! basis; after it the artificials are fixed at zero.

use thiserror::Error;

const FEAS_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-11;
const TIE_TOL: f64 = 1e-12;
const REFACTOR_EVERY: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimplexError {
    #[error("problem has {columns} columns but {costs} costs and {bounds} bounds")]
    Shape {
        columns: usize,
        costs: usize,
        bounds: usize,
    },
    #[error("problem is infeasible (phase 1 residual {0:e})")]
    Infeasible(f64),
    #[error("objective is unbounded")]
    Unbounded,
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Equality-form program. Columns are sparse `(row, value)` lists.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub columns: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
    pub cost: Vec<f64>,
    /// Upper bounds; lower bounds are zero. May be infinite.
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    Lower,
    Upper,
}

struct Solver {
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<Status>,
    /// Row-major `m × m` basis inverse.
    binv: Vec<f64>,
    xb: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
    limit: usize,
}

impl Solver {
    fn new(lp: &LinearProgram) -> Self {
        let m = lp.rhs.len();
        let n = lp.columns.len();
        let sign: Vec<f64> = lp.rhs.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
        let mut cols: Vec<Vec<(usize, f64)>> = lp
            .columns
            .iter()
            .map(|c| c.iter().map(|&(r, v)| (r, v * sign[r])).collect())
            .collect();
        cols.extend((0..m).map(|r| vec![(r, 1.0)]));
        let mut upper = lp.upper.clone();
        upper.extend(std::iter::repeat_n(f64::INFINITY, m));
        let rhs: Vec<f64> = lp.rhs.iter().zip(&sign).map(|(b, s)| b * s).collect();
        let mut status = vec![Status::Lower; n];
        status.extend(std::iter::repeat_n(Status::Basic, m));
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        Self {
            m,
            cols,
            upper,
            xb: rhs.clone(),
            rhs,
            basis: (n..n + m).collect(),
            status,
            binv,
            iterations: 0,
            since_refactor: 0,
            limit: 200 * (n + 2 * m) + 10_000,
        }
    }

    fn value(&self, j: usize) -> f64 {
        match self.status[j] {
            Status::Lower => 0.0,
            Status::Upper => self.upper[j],
            Status::Basic => unreachable!("basic values live in xb"),
        }
    }

    /// Rebuild the basis inverse by Gauss-Jordan elimination and recompute
    /// basic values from scratch.
    fn refactor(&mut self) -> Result<(), SimplexError> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for &(r, v) in &self.cols[j] {
                a[r * m + k] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let piv = (col..m)
                .max_by(|&x, &y| a[x * m + col].abs().total_cmp(&a[y * m + col].abs()))
                .expect("nonempty");
            if a[piv * m + col].abs() < 1e-12 {
                return Err(SimplexError::Numerical("singular basis".into()));
            }
            if piv != col {
                for k in 0..m {
                    a.swap(piv * m + k, col * m + k);
                    inv.swap(piv * m + k, col * m + k);
                }
            }
            let p = a[col * m + col];
            for k in 0..m {
                a[col * m + k] /= p;
                inv[col * m + k] /= p;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = a[r * m + col];
                if f != 0.0 {
                    for k in 0..m {
                        a[r * m + k] -= f * a[col * m + k];
                        inv[r * m + k] -= f * inv[col * m + k];
                    }
                }
            }
        }
        self.binv = inv;

        let mut b = self.rhs.clone();
        for j in 0..self.cols.len() {
            if self.status[j] == Status::Upper {
                for &(r, v) in &self.cols[j] {
                    b[r] -= v * self.upper[j];
                }
            }
        }
        for i in 0..m {
            self.xb[i] = (0..m).map(|k| self.binv[i * m + k] * b[k]).sum();
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn iterate(&mut self, cost: &[f64]) -> Result<(), SimplexError> {
        let m = self.m;
        let mut y = vec![0.0; m];
        let mut alpha = vec![0.0; m];
        loop {
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            if self.iterations >= self.limit {
                return Err(SimplexError::IterationLimit(self.limit));
            }
            for (k, yk) in y.iter_mut().enumerate() {
                *yk = (0..m).map(|i| cost[self.basis[i]] * self.binv[i * m + k]).sum();
            }

            // Bland: the lowest-index improving variable enters.
            let entering = (0..self.cols.len()).find(|&j| {
                let st = self.status[j];
                if st == Status::Basic || self.upper[j] <= 0.0 {
                    return false;
                }
                let d = cost[j] - self.cols[j].iter().map(|&(r, v)| y[r] * v).sum::<f64>();
                (st == Status::Lower && d > COST_TOL) || (st == Status::Upper && d < -COST_TOL)
            });
            let Some(q) = entering else {
                return Ok(());
            };

            for (i, a) in alpha.iter_mut().enumerate() {
                *a = self.cols[q].iter().map(|&(r, v)| self.binv[i * m + r] * v).sum();
            }
            let s = if self.status[q] == Status::Lower { 1.0 } else { -1.0 };

            // Ratio test, ties to the lowest variable index.
            let mut best: Option<(usize, f64)> = None;
            for i in 0..m {
                let delta = s * alpha[i];
                let ratio = if delta > PIVOT_TOL {
                    self.xb[i] / delta
                } else if delta < -PIVOT_TOL && self.upper[self.basis[i]].is_finite() {
                    (self.upper[self.basis[i]] - self.xb[i]) / -delta
                } else {
                    continue;
                };
                let ratio = ratio.max(0.0);
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - TIE_TOL
                            || (ratio <= br + TIE_TOL && self.basis[i] < self.basis[bi])
                        {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }

            let flip = self.upper[q];
            self.iterations += 1;
            match best {
                Some((_, ratio)) if flip.is_finite() && flip <= ratio => {
                    self.bound_flip(q, s, flip, &alpha);
                }
                None if flip.is_finite() => self.bound_flip(q, s, flip, &alpha),
                None => return Err(SimplexError::Unbounded),
                Some((r, t)) => self.pivot(q, r, s, t, &alpha),
            }
        }
    }

    fn bound_flip(&mut self, q: usize, s: f64, t: f64, alpha: &[f64]) {
        for (x, a) in self.xb.iter_mut().zip(alpha) {
            *x -= s * t * a;
        }
        self.status[q] = if self.status[q] == Status::Lower {
            Status::Upper
        } else {
            Status::Lower
        };
    }

    fn pivot(&mut self, q: usize, r: usize, s: f64, t: f64, alpha: &[f64]) {
        let m = self.m;
        let entering_value = if self.status[q] == Status::Lower {
            t
        } else {
            self.upper[q] - t
        };
        for (x, a) in self.xb.iter_mut().zip(alpha) {
            *x -= s * t * a;
        }
        let leaving = self.basis[r];
        self.status[leaving] = if s * alpha[r] > 0.0 {
            Status::Lower
        } else {
            Status::Upper
        };
        self.basis[r] = q;
        self.status[q] = Status::Basic;
        self.xb[r] = entering_value;

        let p = alpha[r];
        for k in 0..m {
            self.binv[r * m + k] /= p;
        }
        for i in 0..m {
            if i == r || alpha[i] == 0.0 {
                continue;
            }
            let f = alpha[i];
            for k in 0..m {
                self.binv[i * m + k] -= f * self.binv[r * m + k];
            }
        }
        self.since_refactor += 1;
    }

    fn primal(&self) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.cols.len())
            .map(|j| {
                if self.status[j] == Status::Basic {
                    0.0
                } else {
                    self.value(j)
                }
            })
            .collect();
        for (i, &j) in self.basis.iter().enumerate() {
            x[j] = self.xb[i];
        }
        x
    }
}

/// Solve `lp` to optimality. The returned point is checked against every
/// constraint; a violation above `1e-9` is reported as a numerical error
/// rather than returned.
pub fn solve(lp: &LinearProgram) -> Result<SimplexSolution, SimplexError> {
    let n = lp.columns.len();
    if lp.cost.len() != n || lp.upper.len() != n {
        return Err(SimplexError::Shape {
            columns: n,
            costs: lp.cost.len(),
            bounds: lp.upper.len(),
        });
    }
    if lp.upper.iter().any(|u| u.is_nan() || *u < 0.0) {
        return Err(SimplexError::Numerical("negative or NaN upper bound".into()));
    }
    let m = lp.rhs.len();
    let mut s = Solver::new(lp);

    let mut phase1 = vec![0.0; n + m];
    phase1[n..].iter_mut().for_each(|c| *c = -1.0);
    s.iterate(&phase1)?;
    s.refactor()?;
    let residual: f64 = s.primal()[n..].iter().sum();
    let scale = 1.0 + lp.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if residual > FEAS_TOL * scale {
        return Err(SimplexError::Infeasible(residual));
    }
    s.upper[n..].iter_mut().for_each(|u| *u = 0.0);

    let mut phase2 = lp.cost.clone();
    phase2.extend(std::iter::repeat_n(0.0, m));
    s.iterate(&phase2)?;
    s.refactor()?;
    // A refactor can expose reduced costs hidden by drift.
    s.iterate(&phase2)?;

    let mut x = s.primal();
    x.truncate(n);
    verify(lp, &mut x)?;
    let objective = x.iter().zip(&lp.cost).map(|(a, c)| a * c).sum();
    Ok(SimplexSolution {
        x,
        objective,
        iterations: s.iterations,
    })
}

/// Check bounds and equalities, snapping values within tolerance onto
/// their bounds.
fn verify(lp: &LinearProgram, x: &mut [f64]) -> Result<(), SimplexError> {
    for (j, v) in x.iter_mut().enumerate() {
        if *v < -FEAS_TOL || *v > lp.upper[j] + FEAS_TOL {
            return Err(SimplexError::Numerical(format!(
                "variable {j} = {v:e} outside [0, {}]",
                lp.upper[j]
            )));
        }
        *v = v.clamp(0.0, lp.upper[j]);
    }
    let mut lhs = vec![0.0; lp.rhs.len()];
    for (col, v) in lp.columns.iter().zip(x.iter()) {
        for &(r, a) in col {
            lhs[r] += a * v;
        }
    }
    for (r, (l, b)) in lhs.iter().zip(&lp.rhs).enumerate() {
        if (l - b).abs() > FEAS_TOL {
            return Err(SimplexError::Numerical(format!(
                "row {r} residual {:e}",
                l - b
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(a: &[&[f64]], b: &[f64], c: &[f64], u: &[f64]) -> LinearProgram {
        let n = c.len();
        let columns = (0..n)
            .map(|j| {
                a.iter()
                    .enumerate()
                    .filter(|(_, row)| row[j] != 0.0)
                    .map(|(i, row)| (i, row[j]))
                    .collect()
            })
            .collect();
        LinearProgram {
            columns,
            rhs: b.to_vec(),
            cost: c.to_vec(),
            upper: u.to_vec(),
        }
    }

    #[test]
    fn textbook_problem() {
        // max 3x + 5y; x <= 4, 2y <= 12, 3x + 2y <= 18, with slacks.
        let inf = f64::INFINITY;
        let lp = dense(
            &[
                &[1.0, 0.0, 1.0, 0.0, 0.0],
                &[0.0, 2.0, 0.0, 1.0, 0.0],
                &[3.0, 2.0, 0.0, 0.0, 1.0],
            ],
            &[4.0, 12.0, 18.0],
            &[3.0, 5.0, 0.0, 0.0, 0.0],
            &[inf; 5],
        );
        let s = solve(&lp).unwrap();
        assert!((s.objective - 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn upper_bounds_bind_without_rows() {
        // max x + 2y with x + y + s = 10, x <= 3, y <= 4.
        let lp = dense(
            &[&[1.0, 1.0, 1.0]],
            &[10.0],
            &[1.0, 2.0, 0.0],
            &[3.0, 4.0, f64::INFINITY],
        );
        let s = solve(&lp).unwrap();
        assert_eq!(s.x[..2], [3.0, 4.0]);
        assert!((s.objective - 11.0).abs() < 1e-12);
    }

    #[test]
    fn negative_rhs_and_infeasibility() {
        // x - y = -2 with y <= 5: x = 0, y = 2 is feasible.
        let lp = dense(&[&[1.0, -1.0]], &[-2.0], &[-1.0, -1.0], &[10.0, 5.0]);
        let s = solve(&lp).unwrap();
        assert!((s.objective + 2.0).abs() < 1e-12);
        let bad = dense(&[&[1.0, -1.0]], &[-2.0], &[0.0, 0.0], &[10.0, 1.0]);
        assert!(matches!(solve(&bad), Err(SimplexError::Infeasible(_))));
    }

    #[test]
    fn unbounded_is_reported() {
        let lp = dense(&[&[1.0, -1.0]], &[0.0], &[1.0, 0.0], &[f64::INFINITY; 2]);
        assert_eq!(solve(&lp), Err(SimplexError::Unbounded));
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let lp = dense(
            &[&[1.0, 1.0], &[2.0, 2.0]],
            &[1.0, 2.0],
            &[1.0, 3.0],
            &[1.0, 1.0],
        );
        let s = solve(&lp).unwrap();
        assert!((s.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let lp = LinearProgram {
            columns: vec![vec![(0, 1.0)]],
            rhs: vec![1.0],
            cost: vec![],
            upper: vec![1.0],
        };
        assert!(matches!(solve(&lp), Err(SimplexError::Shape { .. })));
    }
}
