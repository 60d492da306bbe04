//! Dense two-phase primal simplex with Bland's rule.
//!
//! Solves `min cᵀx  s.t.  A·x ≤ b,  x ≥ 0`. Small and deterministic: Bland's
//! pivoting rule (lowest eligible index enters, lowest basic index leaves on
//! ratio ties) cannot cycle, and identical inputs always take the identical
//! pivot path. Dense storage is appropriate here — the economic MPC produces
//! a few hundred variables at most.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("problem is infeasible (phase-1 objective {0:.3e})")]
    Infeasible(f64),
    #[error("problem is unbounded below")]
    Unbounded,
    #[error("constraint {row} has {got} coefficients, expected {expected}")]
    BadRow { row: usize, got: usize, expected: usize },
    #[error("pivot limit exceeded")]
    PivotLimit,
}

/// `min cᵀx  s.t.  rows · x ≤ rhs,  x ≥ 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

const EPS: f64 = 1e-9;

impl LinearProgram {
    pub fn solve(&self) -> Result<LpSolution, LpError> {
        let n = self.objective.len();
        let m = self.rows.len();
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != n {
                return Err(LpError::BadRow { row: i, got: row.len(), expected: n });
            }
        }

        // Tableau columns: n structural | m slacks | artificials | rhs.
        // Rows with negative rhs are flipped, which flips their slack sign
        // and requires an artificial basis column.
        let need_art: Vec<bool> = self.rhs.iter().map(|&b| b < 0.0).collect();
        let n_art = need_art.iter().filter(|&&f| f).count();
        let cols = n + m + n_art + 1;
        let mut t = vec![vec![0.0; cols]; m];
        let mut basis = vec![0usize; m];
        let mut art_col = n + m;
        for i in 0..m {
            let flip = if need_art[i] { -1.0 } else { 1.0 };
            for j in 0..n {
                t[i][j] = flip * self.rows[i][j];
            }
            t[i][n + i] = flip;
            t[i][cols - 1] = flip * self.rhs[i];
            if need_art[i] {
                t[i][art_col] = 1.0;
                basis[i] = art_col;
                art_col += 1;
            } else {
                basis[i] = n + i;
            }
        }

        let pivot_limit = 50 * (cols + m) + 1000;

        if n_art > 0 {
            // Phase 1: minimize the sum of artificials.
            let mut cost = vec![0.0; cols - 1];
            for c in cost.iter_mut().take(cols - 1).skip(n + m) {
                *c = 1.0;
            }
            let obj = simplex(&mut t, &mut basis, &cost, pivot_limit)?;
            if obj > 1e-7 {
                return Err(LpError::Infeasible(obj));
            }
            // Drive any degenerate artificial out of the basis.
            for i in 0..m {
                if basis[i] >= n + m {
                    if let Some(j) = (0..n + m).find(|&j| t[i][j].abs() > EPS) {
                        pivot(&mut t, i, j);
                        basis[i] = j;
                    }
                }
            }
            // Blank out artificial columns so phase 2 cannot re-enter them.
            for row in t.iter_mut() {
                for v in row.iter_mut().take(cols - 1).skip(n + m) {
                    *v = 0.0;
                }
            }
        }

        // Phase 2: original objective (zero cost on slacks and artificials).
        let mut cost = vec![0.0; cols - 1];
        cost[..n].copy_from_slice(&self.objective);
        simplex(&mut t, &mut basis, &cost, pivot_limit)?;

        let mut x = vec![0.0; n];
        for i in 0..m {
            if basis[i] < n {
                x[basis[i]] = t[i][cols - 1];
            }
        }
        let objective = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution { x, objective })
    }
}

/// Run Bland-rule simplex on the tableau in place; returns the objective.
fn simplex(
    t: &mut [Vec<f64>],
    basis: &mut [usize],
    cost: &[f64],
    pivot_limit: usize,
) -> Result<f64, LpError> {
    let m = t.len();
    if m == 0 {
        // No constraints: optimal at the origin unless some cost is negative.
        if cost.iter().any(|&c| c < -EPS) {
            return Err(LpError::Unbounded);
        }
        return Ok(0.0);
    }
    let cols = t[0].len();
    let rhs_col = cols - 1;

    for _ in 0..pivot_limit {
        // Reduced costs c_j - c_B·B⁻¹A_j straight off the tableau.
        let mut entering = None;
        for j in 0..rhs_col {
            let mut reduced = cost[j];
            for i in 0..m {
                let cb = cost[basis[i]];
                if cb != 0.0 {
                    reduced -= cb * t[i][j];
                }
            }
            if reduced < -EPS {
                entering = Some(j); // Bland: first (lowest) eligible index
                break;
            }
        }
        let Some(e) = entering else {
            let obj = (0..m).map(|i| cost[basis[i]] * t[i][rhs_col]).sum();
            return Ok(obj);
        };

        // Ratio test, ties broken by lowest basic variable index.
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            if t[i][e] > EPS {
                let ratio = t[i][rhs_col] / t[i][e];
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - EPS || (ratio < lr + EPS && basis[i] < basis[li]) {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((l, _)) = leave else { return Err(LpError::Unbounded) };
        pivot(t, l, e);
        basis[l] = e;
    }
    Err(LpError::PivotLimit)
}

fn pivot(t: &mut [Vec<f64>], row: usize, col: usize) {
    let cols = t[row].len();
    let p = t[row][col];
    for j in 0..cols {
        t[row][j] /= p;
    }
    for i in 0..t.len() {
        if i != row {
            let f = t[i][col];
            if f != 0.0 {
                for j in 0..cols {
                    t[i][j] -= f * t[row][j];
                }
            }
        }
    }
}
