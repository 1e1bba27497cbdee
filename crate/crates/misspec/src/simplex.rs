//! Dense two-phase simplex for `min c^T x  s.t.  A x <= b, x >= 0`.
//!
//! Bland's rule is used for both entering and leaving variables, so the method
//! terminates on degenerate problems. Dual values are read off the reduced costs
//! of the slack columns.

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};

const PIVOT_TOL: f64 = 1e-12;
const MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vector,
    /// Dual multipliers of the `<=` rows (nonpositive at optimality).
    pub y: Vector,
    pub objective: f64,
}

impl LpSolution {
    /// `c^T x - b^T y`; zero at an optimal primal-dual pair.
    pub fn duality_gap(&self, b: &Vector) -> f64 {
        self.objective - b.dot(&self.y)
    }

    /// Largest violation of `A^T y <= c` and `y <= 0`.
    pub fn dual_infeasibility(&self, a: &Mat, c: &Vector) -> f64 {
        let reduced = a.transpose() * &self.y - c;
        let v1 = reduced.iter().copied().fold(0.0, f64::max);
        let v2 = self.y.iter().copied().fold(0.0, f64::max);
        v1.max(v2)
    }
}

struct Tableau {
    rows: usize,
    cols: usize,
    // rows x (cols + 1), last column is the right-hand side
    t: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * (self.cols + 1) + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    fn pivot(&mut self, r: usize, c: usize, obj: &mut [f64]) {
        let w = self.cols + 1;
        let p = self.at(r, c);
        for j in 0..w {
            self.t[r * w + j] /= p;
        }
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.at(i, c);
            if f != 0.0 {
                for j in 0..w {
                    self.t[i * w + j] -= f * self.t[r * w + j];
                }
            }
        }
        let f = obj[c];
        if f != 0.0 {
            for j in 0..w {
                obj[j] -= f * self.t[r * w + j];
            }
        }
        self.basis[r] = c;
    }

    /// Runs simplex iterations on the reduced-cost row `obj` restricted to `allowed` columns.
    fn optimize(&mut self, obj: &mut [f64], allowed: usize) -> Result<()> {
        for _ in 0..MAX_ITERS {
            let Some(enter) = (0..allowed).find(|&j| obj[j] < -PIVOT_TOL) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, enter);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    let better = match leave {
                        None => true,
                        Some((l, best)) => {
                            ratio < best - PIVOT_TOL
                                || ((ratio - best).abs() <= PIVOT_TOL && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::Invariant("linear program is unbounded".into()));
            };
            self.pivot(r, enter, obj);
        }
        Err(Error::Invariant("simplex iteration limit reached".into()))
    }
}

/// Solves `min c^T x  s.t.  a x <= b, x >= 0`.
pub fn solve(c: &Vector, a: &Mat, b: &Vector) -> Result<LpSolution> {
    let (m, n) = a.shape();
    if c.len() != n || b.len() != m {
        return Err(Error::Dimension("linear program shapes disagree".into()));
    }
    let flipped: Vec<bool> = b.iter().map(|&bi| bi < 0.0).collect();
    let n_art = flipped.iter().filter(|f| **f).count();
    let cols = n + m + n_art;
    let w = cols + 1;
    let mut t = vec![0.0; m * w];
    let mut basis = vec![0; m];
    let mut art = n + m;
    for i in 0..m {
        let sgn = if flipped[i] { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i * w + j] = sgn * a[(i, j)];
        }
        t[i * w + n + i] = sgn;
        t[i * w + cols] = sgn * b[i];
        if flipped[i] {
            t[i * w + art] = 1.0;
            basis[i] = art;
            art += 1;
        } else {
            basis[i] = n + i;
        }
    }
    let mut tab = Tableau { rows: m, cols, t, basis };

    if n_art > 0 {
        let mut obj = vec![0.0; w];
        for j in n + m..cols {
            obj[j] = 1.0;
        }
        for i in 0..m {
            if flipped[i] {
                for j in 0..w {
                    obj[j] -= tab.at(i, j);
                }
            }
        }
        tab.optimize(&mut obj, cols)?;
        if -obj[cols] > 1e-9 * (1.0 + b.amax()) {
            return Err(Error::Invariant("linear program is infeasible".into()));
        }
        // Drive any zero-level artificial out of the basis.
        let mut i = 0;
        while i < tab.rows {
            if tab.basis[i] >= n + m {
                match (0..n + m).find(|&j| tab.at(i, j).abs() > PIVOT_TOL) {
                    Some(j) => tab.pivot(i, j, &mut obj),
                    None => {
                        let w = tab.cols + 1;
                        tab.t.drain(i * w..(i + 1) * w);
                        tab.basis.remove(i);
                        tab.rows -= 1;
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    let mut obj = vec![0.0; w];
    for j in 0..n {
        obj[j] = c[j];
    }
    for i in 0..tab.rows {
        let bj = tab.basis[i];
        let cb = if bj < n { c[bj] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..w {
                obj[j] -= cb * tab.at(i, j);
            }
        }
    }
    tab.optimize(&mut obj, n + m)?;

    let mut x = Vector::zeros(n);
    for i in 0..tab.rows {
        if tab.basis[i] < n {
            x[tab.basis[i]] = tab.rhs(i);
        }
    }
    let y = Vector::from_iterator(m, (0..m).map(|i| -obj[n + i]));
    Ok(LpSolution { objective: c.dot(&x), x, y })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  (optimum 36 at (2, 6))
        let c = Vector::from_row_slice(&[-3.0, -5.0]);
        let a = Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 3.0, 2.0]);
        let b = Vector::from_row_slice(&[4.0, 12.0, 18.0]);
        let s = solve(&c, &a, &b).unwrap();
        assert!((s.objective + 36.0).abs() < 1e-10);
        assert!((s.x[0] - 2.0).abs() < 1e-10 && (s.x[1] - 6.0).abs() < 1e-10);
        assert!(s.duality_gap(&b).abs() < 1e-10);
        assert!(s.dual_infeasibility(&a, &c) < 1e-12);
    }

    #[test]
    fn needs_phase_one() {
        // min x + y s.t. x + y >= 2, x - y <= 1
        let c = Vector::from_row_slice(&[1.0, 1.0]);
        let a = Mat::from_row_slice(2, 2, &[-1.0, -1.0, 1.0, -1.0]);
        let b = Vector::from_row_slice(&[-2.0, 1.0]);
        let s = solve(&c, &a, &b).unwrap();
        assert!((s.objective - 2.0).abs() < 1e-10);
        assert!(s.duality_gap(&b).abs() < 1e-10);
        assert!(s.dual_infeasibility(&a, &c) < 1e-12);
    }

    #[test]
    fn detects_infeasible() {
        // x <= -1 with x >= 0
        let c = Vector::from_row_slice(&[1.0]);
        let a = Mat::from_row_slice(1, 1, &[1.0]);
        let b = Vector::from_row_slice(&[-1.0]);
        assert!(solve(&c, &a, &b).is_err());
    }

    #[test]
    fn detects_unbounded() {
        let c = Vector::from_row_slice(&[-1.0]);
        let a = Mat::from_row_slice(1, 1, &[-1.0]);
        let b = Vector::from_row_slice(&[0.0]);
        assert!(solve(&c, &a, &b).is_err());
    }
}
