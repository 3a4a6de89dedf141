//! Dense two-phase simplex for the small linear programs of the bilevel
//! solver: a handful of variables (one per destination state) and a handful
//! of rows (one incentive constraint per attack plus the simplex equality).
//!
//! Minimizes `c . x` subject to `A_ub x <= b_ub`, `A_eq x = b_eq`, `x >= 0`.
//! Bland's rule keeps the heavily degenerate incentive constraints (zero
//! right-hand sides) from cycling.

/// Pivoting tolerance.
const TOL: f64 = 1e-9;

/// Terminal states other than optimality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpError {
    Infeasible,
    Unbounded,
}

impl std::fmt::Display for LpError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LpError::Infeasible => write!(f, "linear program is infeasible"),
            LpError::Unbounded => write!(f, "linear program is unbounded"),
        }
    }
}

impl std::error::Error for LpError {}

/// An optimal vertex and its objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    /// `rows x (cols + 1)` matrix; last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
    /// Columns at or past this index are artificial and may never re-enter.
    artificial_start: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.t[r][self.cols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.t[row][col];
        let inv = 1.0 / piv;
        for v in self.t[row].iter_mut() {
            *v *= inv;
        }
        let pivot_row = self.t[row].clone();
        for (r, data) in self.t.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let factor = data[col];
            if factor == 0.0 {
                continue;
            }
            for (v, p) in data.iter_mut().zip(&pivot_row) {
                *v -= factor * p;
            }
        }
        self.basis[row] = col;
    }

    /// Runs simplex iterations for the given cost vector (length `cols`).
    /// Returns `false` when an unbounded ray is detected.
    fn optimize(&mut self, cost: &[f64]) -> bool {
        loop {
            // Reduced costs against the current basis.
            let mut reduced: Vec<f64> = cost.to_vec();
            for (r, &b) in self.basis.iter().enumerate() {
                let cb = cost[b];
                if cb == 0.0 {
                    continue;
                }
                for j in 0..self.cols {
                    reduced[j] -= cb * self.t[r][j];
                }
            }
            // Bland: smallest-index improving column.
            let entering = (0..self.artificial_start)
                .find(|&j| reduced[j] < -TOL && !self.basis.contains(&j));
            let Some(col) = entering else {
                return true;
            };
            // Ratio test; ties by smallest basic variable index (Bland).
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for r in 0..self.t.len() {
                let a = self.t[r][col];
                if a > TOL {
                    let ratio = self.rhs(r) / a;
                    let replace = match leave {
                        None => true,
                        Some(lr) => {
                            ratio < best_ratio - TOL
                                || (ratio < best_ratio + TOL && self.basis[r] < self.basis[lr])
                        }
                    };
                    if replace {
                        leave = Some(r);
                        best_ratio = ratio;
                    }
                }
            }
            let Some(row) = leave else {
                return false;
            };
            self.pivot(row, col);
        }
    }
}

/// Solves `min c . x` s.t. `A_ub x <= b_ub`, `A_eq x = b_eq`, `x >= 0`.
pub fn solve_lp(
    c: &[f64],
    a_ub: &[Vec<f64>],
    b_ub: &[f64],
    a_eq: &[Vec<f64>],
    b_eq: &[f64],
) -> Result<LpSolution, LpError> {
    let n = c.len();
    let m_ub = a_ub.len();
    let m_eq = a_eq.len();
    let m = m_ub + m_eq;
    assert_eq!(b_ub.len(), m_ub);
    assert_eq!(b_eq.len(), m_eq);

    // Layout: structural | slacks (one per ub row) | artificials (as needed).
    let slack_start = n;
    let art_start = n + m_ub;

    // Assemble rows with nonnegative right-hand sides.
    let mut rows: Vec<(Vec<f64>, f64, Option<usize>)> = Vec::with_capacity(m);
    for (r, (a, &b)) in a_ub.iter().zip(b_ub).enumerate() {
        assert_eq!(a.len(), n);
        let mut coeffs = a.clone();
        let mut rhs = b;
        let mut slack = 1.0;
        if rhs < 0.0 {
            coeffs.iter_mut().for_each(|v| *v = -*v);
            rhs = -rhs;
            slack = -1.0;
        }
        let mut full = vec![0.0; art_start];
        full[..n].copy_from_slice(&coeffs);
        full[slack_start + r] = slack;
        // A +1 slack is an immediate basic variable; a surplus needs an artificial.
        let basic = if slack > 0.0 { Some(slack_start + r) } else { None };
        rows.push((full, rhs, basic));
    }
    for (a, &b) in a_eq.iter().zip(b_eq) {
        assert_eq!(a.len(), n);
        let mut coeffs = a.clone();
        let mut rhs = b;
        if rhs < 0.0 {
            coeffs.iter_mut().for_each(|v| *v = -*v);
            rhs = -rhs;
        }
        let mut full = vec![0.0; art_start];
        full[..n].copy_from_slice(&coeffs);
        rows.push((full, rhs, None));
    }

    let n_art = rows.iter().filter(|(_, _, basic)| basic.is_none()).count();
    let cols = art_start + n_art;
    let mut t = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut next_art = art_start;
    for (coeffs, rhs, basic) in rows {
        let mut row = vec![0.0; cols + 1];
        row[..art_start].copy_from_slice(&coeffs);
        row[cols] = rhs;
        match basic {
            Some(b) => basis.push(b),
            None => {
                row[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            }
        }
        t.push(row);
    }

    let mut tab = Tableau {
        t,
        basis,
        cols,
        artificial_start: cols,
    };

    if n_art > 0 {
        // Phase 1: drive the artificials to zero.
        let mut phase1 = vec![0.0; cols];
        for j in art_start..cols {
            phase1[j] = 1.0;
        }
        // Artificials start basic and may leave but never re-enter.
        tab.artificial_start = art_start;
        if !tab.optimize(&phase1) {
            // Phase-1 objective is bounded below by zero; a ray here would be
            // a numerical artifact, treat as infeasible.
            return Err(LpError::Infeasible);
        }
        let phase1_value: f64 = tab
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= art_start)
            .map(|(r, _)| tab.rhs(r))
            .sum();
        if phase1_value > 1e-7 {
            return Err(LpError::Infeasible);
        }
        // Pivot residual artificials out of the basis where possible.
        for r in 0..tab.t.len() {
            if tab.basis[r] >= art_start {
                if let Some(col) = (0..art_start)
                    .find(|&j| tab.t[r][j].abs() > TOL && !tab.basis.contains(&j))
                {
                    tab.pivot(r, col);
                }
            }
        }
    }

    // Phase 2 over the original objective; artificial columns stay locked out.
    tab.artificial_start = art_start;
    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(c);
    if !tab.optimize(&cost) {
        return Err(LpError::Unbounded);
    }

    let mut x = vec![0.0; n];
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.rhs(r).max(0.0);
        }
    }
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok(LpSolution { x, objective })
}

/// Convenience: `min c . x` over the probability simplex with the extra
/// inequality rows `G x >= 0`.
pub fn solve_simplex_constrained(c: &[f64], g_ge_zero: &[Vec<f64>]) -> Result<LpSolution, LpError> {
    let n = c.len();
    let a_ub: Vec<Vec<f64>> = g_ge_zero
        .iter()
        .map(|g| g.iter().map(|&v| -v).collect())
        .collect();
    let b_ub = vec![0.0; a_ub.len()];
    let a_eq = vec![vec![1.0; n]];
    let b_eq = vec![1.0];
    solve_lp(c, &a_ub, &b_ub, &a_eq, &b_eq)
}
