//! Dense two-phase simplex solver for the small linear programs that appear
//! throughout the crate: best-response feasibility, incentive-compatible
//! commitment design, strict-interior points and per-piece maximization.
//!
//! The solver favours auditability over speed. Pivoting is deterministic:
//! Dantzig's rule with index tie-breaks, switching to Bland's rule after a
//! run of degenerate pivots so cycling is impossible. Identical inputs
//! always produce identical solutions.

use thiserror::Error;

/// Feasibility/optimality residual the caller may rely on.
pub const RESIDUAL_TOL: f64 = 1e-9;

// Ratio-test pivots below this threshold are treated as zero. Problem data
// here is payoff-scale (O(1) rows), so smaller entries are elimination
// noise and pivoting on them amplifies error catastrophically.
const PIVOT_TOL: f64 = 1e-7;
const COST_TOL: f64 = 1e-9;
const DEGENERATE_RATIO_TOL: f64 = 1e-10;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub rel: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, rel: Relation, rhs: f64) -> Self {
        Constraint { coeffs, rel, rhs }
    }
}

/// A linear program in maximization form. Variables are nonnegative unless
/// flagged free; free variables are internally split into differences of
/// nonnegative parts.
#[derive(Debug, Clone)]
pub struct Lp {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub free: Vec<bool>,
}

impl Lp {
    pub fn maximize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Lp { objective, constraints: Vec::new(), free: vec![false; n] }
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.objective.len());
        self.constraints.push(Constraint::new(coeffs, rel, rhs));
    }

    pub fn set_free(&mut self, var: usize) {
        self.free[var] = true;
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("numerical failure in simplex: {0}")]
    Numerical(String),
}

struct Tableau {
    rows: usize,
    cols: usize,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    basis: Vec<usize>,
    banned: Vec<bool>,
    force_bland: bool,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.a[row][col];
        let inv = 1.0 / piv;
        for v in self.a[row].iter_mut() {
            *v *= inv;
        }
        self.b[row] *= inv;
        self.a[row][col] = 1.0;
        for r in 0..self.rows {
            if r == row {
                continue;
            }
            let factor = self.a[r][col];
            if factor == 0.0 {
                continue;
            }
            for c in 0..self.cols {
                self.a[r][c] -= factor * self.a[row][c];
            }
            self.a[r][col] = 0.0;
            self.b[r] -= factor * self.b[row];
            if self.b[r].abs() < 1e-13 {
                self.b[r] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Runs the simplex loop maximizing `cost` (one entry per column).
    fn optimize(&mut self, cost: &[f64]) -> Result<(), LpError> {
        let mut degenerate_streak = 0usize;
        let max_iter = 50_000 + 200 * (self.rows + self.cols);
        for _ in 0..max_iter {
            // Reduced costs r_j = c_j - c_B . column_j.
            let mut reduced = vec![0.0; self.cols];
            for j in 0..self.cols {
                reduced[j] = cost[j];
            }
            for (i, &bi) in self.basis.iter().enumerate() {
                let cb = cost[bi];
                if cb == 0.0 {
                    continue;
                }
                for j in 0..self.cols {
                    reduced[j] -= cb * self.a[i][j];
                }
            }

            let use_bland = self.force_bland || degenerate_streak >= DEGENERATE_STREAK;
            let mut entering = None;
            if use_bland {
                for j in 0..self.cols {
                    if !self.banned[j] && reduced[j] > COST_TOL {
                        entering = Some(j);
                        break;
                    }
                }
            } else {
                let mut best = COST_TOL;
                for j in 0..self.cols {
                    if !self.banned[j] && reduced[j] > best {
                        best = reduced[j];
                        entering = Some(j);
                    }
                }
            }
            let Some(col) = entering else {
                return Ok(());
            };

            // Ratio test. Ties go to the smallest basis variable index in
            // Bland mode (anti-cycling) and to the largest pivot element
            // otherwise (numerical stability); both are deterministic.
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                if self.a[i][col] > PIVOT_TOL {
                    let ratio = self.b[i] / self.a[i][col];
                    match leaving {
                        None => leaving = Some((i, ratio)),
                        Some((li, lr)) => {
                            let tied = (ratio - lr).abs() <= 1e-12;
                            let prefer = if tied {
                                if use_bland {
                                    self.basis[i] < self.basis[li]
                                } else {
                                    self.a[i][col] > self.a[li][col]
                                }
                            } else {
                                ratio < lr
                            };
                            if prefer {
                                leaving = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((row, ratio)) = leaving else {
                return Err(LpError::Unbounded);
            };
            if ratio.abs() <= DEGENERATE_RATIO_TOL {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            self.pivot(row, col);
        }
        Err(LpError::Numerical("iteration limit exceeded".into()))
    }
}

/// Solves the program, maximizing its objective.
pub fn solve(lp: &Lp) -> Result<LpSolution, LpError> {
    match solve_attempt(lp, false) {
        Ok(sol) => Ok(sol),
        // Any failure gets one retry under Bland's rule from the start: a
        // genuinely infeasible or unbounded program keeps its verdict there,
        // while a Dantzig path corrupted by near-zero pivots gets a second
        // run down a different pivot sequence.
        Err(_) => solve_attempt(lp, true),
    }
}

fn solve_attempt(lp: &Lp, force_bland: bool) -> Result<LpSolution, LpError> {
    let n_orig = lp.objective.len();
    assert_eq!(lp.free.len(), n_orig);

    // Column layout: for each variable one column, plus a negative part for
    // free variables; then slack/surplus columns; then artificials.
    let mut col_of_var = Vec::with_capacity(n_orig);
    let mut neg_col_of_var = vec![None; n_orig];
    let mut n_cols = 0usize;
    for i in 0..n_orig {
        col_of_var.push(n_cols);
        n_cols += 1;
        if lp.free[i] {
            neg_col_of_var[i] = Some(n_cols);
            n_cols += 1;
        }
    }
    let n_structural = n_cols;

    let m = lp.constraints.len();
    let mut a = vec![vec![0.0; n_structural]; m];
    let mut b = vec![0.0; m];
    let mut rels = Vec::with_capacity(m);
    for (r, con) in lp.constraints.iter().enumerate() {
        assert_eq!(con.coeffs.len(), n_orig);
        let mut rel = con.rel;
        let mut rhs = con.rhs;
        let mut row = vec![0.0; n_structural];
        for i in 0..n_orig {
            row[col_of_var[i]] = con.coeffs[i];
            if let Some(nc) = neg_col_of_var[i] {
                row[nc] = -con.coeffs[i];
            }
        }
        if rhs < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
            rhs = -rhs;
            rel = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        a[r] = row;
        b[r] = rhs;
        rels.push(rel);
    }

    // Slack / surplus columns.
    let mut cols = n_structural;
    let mut slack_col = vec![None; m];
    for r in 0..m {
        match rels[r] {
            Relation::Le | Relation::Ge => {
                slack_col[r] = Some(cols);
                cols += 1;
            }
            Relation::Eq => {}
        }
    }
    // Artificial columns for Ge and Eq rows.
    let mut art_col = vec![None; m];
    for r in 0..m {
        if matches!(rels[r], Relation::Ge | Relation::Eq) {
            art_col[r] = Some(cols);
            cols += 1;
        }
    }

    let mut full = vec![vec![0.0; cols]; m];
    let mut basis = vec![0usize; m];
    for r in 0..m {
        full[r][..n_structural].copy_from_slice(&a[r]);
        match rels[r] {
            Relation::Le => {
                let sc = slack_col[r].unwrap();
                full[r][sc] = 1.0;
                basis[r] = sc;
            }
            Relation::Ge => {
                let sc = slack_col[r].unwrap();
                full[r][sc] = -1.0;
                let ac = art_col[r].unwrap();
                full[r][ac] = 1.0;
                basis[r] = ac;
            }
            Relation::Eq => {
                let ac = art_col[r].unwrap();
                full[r][ac] = 1.0;
                basis[r] = ac;
            }
        }
    }

    let is_artificial: Vec<bool> = (0..cols)
        .map(|c| art_col.iter().any(|&ac| ac == Some(c)))
        .collect();

    let mut tab = Tableau {
        rows: m,
        cols,
        a: full,
        b,
        basis,
        banned: vec![false; cols],
        force_bland,
    };

    // Phase 1: maximize -sum(artificials).
    if is_artificial.iter().any(|&x| x) {
        let cost: Vec<f64> = (0..cols).map(|c| if is_artificial[c] { -1.0 } else { 0.0 }).collect();
        tab.optimize(&cost)?;
        let infeas: f64 = tab
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &bi)| is_artificial[bi])
            .map(|(i, _)| tab.b[i])
            .sum();
        if infeas > RESIDUAL_TOL {
            return Err(LpError::Infeasible);
        }
        // Drive remaining artificials out of the basis on the largest
        // available pivot; rows with no usable pivot are redundant.
        let mut r = 0;
        while r < tab.rows {
            if is_artificial[tab.basis[r]] {
                let mut best: Option<usize> = None;
                for c in 0..cols {
                    if !is_artificial[c]
                        && tab.a[r][c].abs() > 1e-7
                        && best.is_none_or(|bc| tab.a[r][c].abs() > tab.a[r][bc].abs())
                    {
                        best = Some(c);
                    }
                }
                match best {
                    Some(c) => tab.pivot(r, c),
                    None => {
                        tab.a.remove(r);
                        tab.b.remove(r);
                        tab.basis.remove(r);
                        tab.rows -= 1;
                        continue;
                    }
                }
            }
            r += 1;
        }
        for c in 0..cols {
            if is_artificial[c] {
                tab.banned[c] = true;
            }
        }
    }

    // Phase 2.
    let mut cost = vec![0.0; cols];
    for i in 0..n_orig {
        cost[col_of_var[i]] = lp.objective[i];
        if let Some(nc) = neg_col_of_var[i] {
            cost[nc] = -lp.objective[i];
        }
    }
    tab.optimize(&cost)?;

    let mut col_values = vec![0.0; cols];
    for (i, &bi) in tab.basis.iter().enumerate() {
        col_values[bi] = tab.b[i];
    }
    let mut x = vec![0.0; n_orig];
    for i in 0..n_orig {
        x[i] = col_values[col_of_var[i]];
        if let Some(nc) = neg_col_of_var[i] {
            x[i] -= col_values[nc];
        }
    }
    let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    let sol = LpSolution { x, value };
    let violation = max_violation(lp, &sol.x);
    if violation > RESIDUAL_TOL {
        return Err(LpError::Numerical(format!(
            "solution violates constraints by {violation}"
        )));
    }
    Ok(sol)
}

/// Largest constraint violation of `x`, ignoring nonnegativity of free vars.
pub fn max_violation(lp: &Lp, x: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for con in &lp.constraints {
        let lhs: f64 = con.coeffs.iter().zip(x).map(|(c, v)| c * v).sum();
        let viol = match con.rel {
            Relation::Le => lhs - con.rhs,
            Relation::Ge => con.rhs - lhs,
            Relation::Eq => (lhs - con.rhs).abs(),
        };
        worst = worst.max(viol);
    }
    for (i, &free) in lp.free.iter().enumerate() {
        if !free {
            worst = worst.max(-x[i]);
        }
    }
    worst
}
