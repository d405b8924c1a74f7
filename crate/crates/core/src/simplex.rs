//! Dense two-phase simplex over exact rationals.
//!
//! All linear programs in this crate are small (tens of variables), so a
//! textbook dense tableau with Bland's anti-cycling rule is the right tool:
//! exact pivoting keeps every golden value an exact fraction.

use num::{One, Signed, Zero};

use crate::rational::Q;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<Q>,
    pub relation: Relation,
    pub rhs: Q,
    pub label: String,
}

impl Constraint {
    pub fn new(coeffs: Vec<Q>, relation: Relation, rhs: Q, label: impl Into<String>) -> Constraint {
        Constraint { coeffs, relation, rhs, label: label.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    NonNegative,
    Free,
}

/// Maximization problem. Variable bounds other than `x ≥ 0` are expressed as
/// ordinary constraints.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<Q>,
    pub constraints: Vec<Constraint>,
    pub var_kinds: Vec<VarKind>,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> LinearProgram {
        LinearProgram {
            num_vars,
            objective: vec![Q::zero(); num_vars],
            constraints: Vec::new(),
            var_kinds: vec![VarKind::NonNegative; num_vars],
        }
    }

    pub fn maximize(mut self, objective: Vec<Q>) -> LinearProgram {
        self.objective = objective;
        self
    }

    pub fn free_variables(mut self) -> LinearProgram {
        self.var_kinds = vec![VarKind::Free; self.num_vars];
        self
    }

    pub fn push(&mut self, constraint: Constraint) {
        self.constraints.push(constraint);
    }
}

#[derive(Clone, Debug)]
pub enum LpOutcome {
    Optimal { x: Vec<Q>, value: Q },
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<Q>>, // m x (n_cols + 1), last column is the RHS
    basis: Vec<usize>,
    n_cols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let pivot = self.rows[row][col].clone();
        let inv = Q::one() / pivot;
        for value in self.rows[row].iter_mut() {
            *value *= inv.clone();
        }
        for r in 0..self.rows.len() {
            if r == row || self.rows[r][col].is_zero() {
                continue;
            }
            let factor = self.rows[r][col].clone();
            for c in 0..=self.n_cols {
                let delta = factor.clone() * &self.rows[row][c];
                self.rows[r][c] -= delta;
            }
        }
        self.basis[row] = col;
    }

    /// Maximizes `costs·x` with Bland's rule; `allowed` masks entering columns.
    fn run(&mut self, costs: &[Q], allowed: &dyn Fn(usize) -> bool) -> Option<()> {
        loop {
            let reduced = |j: usize| -> Q {
                let mut r = costs[j].clone();
                for (i, &b) in self.basis.iter().enumerate() {
                    if !costs[b].is_zero() {
                        r -= costs[b].clone() * &self.rows[i][j];
                    }
                }
                r
            };
            let mut entering = None;
            for j in 0..self.n_cols {
                if allowed(j) && !self.basis.contains(&j) && reduced(j).is_positive() {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else { return Some(()) };
            let mut leaving: Option<(usize, Q)> = None;
            for i in 0..self.rows.len() {
                if self.rows[i][col].is_positive() {
                    let ratio = self.rows[i][self.n_cols].clone() / &self.rows[i][col];
                    let better = match &leaving {
                        None => true,
                        Some((best_row, best)) => {
                            ratio < *best || (ratio == *best && self.basis[i] < self.basis[*best_row])
                        }
                    };
                    if better {
                        leaving = Some((i, ratio));
                    }
                }
            }
            let Some((row, _)) = leaving else { return None };
            self.pivot(row, col);
        }
    }

    fn value_of(&self, costs: &[Q]) -> Q {
        let mut v = Q::zero();
        for (i, &b) in self.basis.iter().enumerate() {
            v += costs[b].clone() * &self.rows[i][self.n_cols];
        }
        v
    }
}

/// Solves the program; exact arithmetic throughout.
pub fn solve(lp: &LinearProgram) -> LpOutcome {
    // Column layout: for each structural variable one column (two when free),
    // then one slack per inequality, then artificials.
    let mut col_of_var: Vec<(usize, Option<usize>)> = Vec::new();
    let mut n_cols = 0usize;
    for kind in &lp.var_kinds {
        match kind {
            VarKind::NonNegative => {
                col_of_var.push((n_cols, None));
                n_cols += 1;
            }
            VarKind::Free => {
                col_of_var.push((n_cols, Some(n_cols + 1)));
                n_cols += 2;
            }
        }
    }
    let n_structural = n_cols;
    let m = lp.constraints.len();
    let n_slacks = lp.constraints.iter().filter(|c| c.relation != Relation::Eq).count();
    n_cols += n_slacks;

    let mut rows: Vec<Vec<Q>> = Vec::with_capacity(m);
    let mut slack_idx = n_structural;
    let mut slack_cols: Vec<Option<usize>> = Vec::with_capacity(m);
    for constraint in &lp.constraints {
        let mut row = vec![Q::zero(); n_cols + 1];
        for (v, coeff) in constraint.coeffs.iter().enumerate() {
            let (pos, neg) = col_of_var[v];
            row[pos] = coeff.clone();
            if let Some(neg) = neg {
                row[neg] = -coeff.clone();
            }
        }
        row[n_cols] = constraint.rhs.clone();
        match constraint.relation {
            Relation::Le => {
                row[slack_idx] = Q::one();
                slack_cols.push(Some(slack_idx));
                slack_idx += 1;
            }
            Relation::Ge => {
                row[slack_idx] = -Q::one();
                slack_cols.push(Some(slack_idx));
                slack_idx += 1;
            }
            Relation::Eq => slack_cols.push(None),
        }
        rows.push(row);
    }
    // Normalize RHS to be non-negative.
    for row in rows.iter_mut() {
        if row[n_cols].is_negative() {
            for value in row.iter_mut() {
                *value = -value.clone();
            }
        }
    }
    // Basis: slack column if it survived normalization with +1, else artificial.
    let mut basis = Vec::with_capacity(m);
    let mut artificial_cols = Vec::new();
    let mut extra = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let usable = slack_cols[i].filter(|&s| row[s].is_one());
        match usable {
            Some(s) => basis.push(s),
            None => {
                let col = n_cols + extra.len();
                artificial_cols.push(col);
                extra.push(i);
                basis.push(col);
            }
        }
    }
    let total_cols = n_cols + extra.len();
    for (j, &row_idx) in extra.iter().enumerate() {
        for (i, row) in rows.iter_mut().enumerate() {
            row.insert(n_cols + j, if i == row_idx { Q::one() } else { Q::zero() });
        }
    }
    let mut tableau = Tableau { rows, basis, n_cols: total_cols };

    // Phase 1: drive artificials to zero.
    if !artificial_cols.is_empty() {
        let mut costs = vec![Q::zero(); total_cols];
        for &a in &artificial_cols {
            costs[a] = -Q::one();
        }
        tableau.run(&costs, &|_| true).expect("phase 1 is bounded");
        if !tableau.value_of(&costs).is_zero() {
            return LpOutcome::Infeasible;
        }
        // Pivot lingering artificials out of the basis; a row that cannot be
        // pivoted is vacuous (0 = 0) and is dropped so no artificial can ever
        // re-enter with positive value.
        let mut i = 0;
        while i < tableau.basis.len() {
            if artificial_cols.contains(&tableau.basis[i]) {
                let col = (0..n_cols)
                    .find(|&j| !artificial_cols.contains(&j) && !tableau.rows[i][j].is_zero());
                match col {
                    Some(col) => {
                        tableau.pivot(i, col);
                        i += 1;
                    }
                    None => {
                        tableau.rows.remove(i);
                        tableau.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }

    // Phase 2.
    let mut costs = vec![Q::zero(); total_cols];
    for (v, coeff) in lp.objective.iter().enumerate() {
        let (pos, neg) = col_of_var[v];
        costs[pos] = coeff.clone();
        if let Some(neg) = neg {
            costs[neg] = -coeff.clone();
        }
    }
    let allowed = |j: usize| !artificial_cols.contains(&j);
    if tableau.run(&costs, &allowed).is_none() {
        return LpOutcome::Unbounded;
    }

    let mut x = vec![Q::zero(); lp.num_vars];
    for (v, &(pos, neg)) in col_of_var.iter().enumerate() {
        let mut value = Q::zero();
        for (i, &b) in tableau.basis.iter().enumerate() {
            if b == pos {
                value += tableau.rows[i][total_cols].clone();
            }
            if Some(b) == neg {
                value -= tableau.rows[i][total_cols].clone();
            }
        }
        x[v] = value;
    }
    let value = lp.objective.iter().zip(&x).fold(Q::zero(), |acc, (c, xi)| acc + c.clone() * xi);
    LpOutcome::Optimal { x, value }
}

/// Solves, and on infeasibility extracts an irreducible infeasible subset of
/// constraint labels by the deletion filter.
pub fn solve_or_explain(lp: &LinearProgram) -> Result<(Vec<Q>, Q)> {
    match solve(lp) {
        LpOutcome::Optimal { x, value } => Ok((x, value)),
        LpOutcome::Unbounded => Err(Error::LpUnbounded),
        LpOutcome::Infeasible => {
            let mut kept: Vec<usize> = (0..lp.constraints.len()).collect();
            let mut i = 0;
            while i < kept.len() {
                let mut trial = lp.clone();
                let mut without = kept.clone();
                without.remove(i);
                trial.constraints =
                    without.iter().map(|&j| lp.constraints[j].clone()).collect();
                if matches!(solve(&trial), LpOutcome::Infeasible) {
                    kept = without;
                } else {
                    i += 1;
                }
            }
            Err(Error::LpInfeasible(
                kept.into_iter().map(|j| lp.constraints[j].label.clone()).collect(),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    #[test]
    fn solves_basic_maximization() {
        // max x + y s.t. x + 2y <= 4, 3x + y <= 6.
        let mut lp = LinearProgram::new(2).maximize(vec![qi(1), qi(1)]);
        lp.push(Constraint::new(vec![qi(1), qi(2)], Relation::Le, qi(4), "c1"));
        lp.push(Constraint::new(vec![qi(3), qi(1)], Relation::Le, qi(6), "c2"));
        match solve(&lp) {
            LpOutcome::Optimal { x, value } => {
                assert_eq!(x, vec![q(8, 5), q(6, 5)]);
                assert_eq!(value, q(14, 5));
            }
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn handles_equality_and_free_variables() {
        // max y s.t. x + y = 1, x - y = 1/3 with free variables.
        let mut lp = LinearProgram::new(2).maximize(vec![qi(0), qi(1)]).free_variables();
        lp.push(Constraint::new(vec![qi(1), qi(1)], Relation::Eq, qi(1), "sum"));
        lp.push(Constraint::new(vec![qi(1), qi(-1)], Relation::Eq, q(1, 3), "diff"));
        match solve(&lp) {
            LpOutcome::Optimal { x, .. } => {
                assert_eq!(x, vec![q(2, 3), q(1, 3)]);
            }
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn free_variable_can_go_negative() {
        // max -x s.t. x >= -5 with x free: optimum at x = -5.
        let mut lp = LinearProgram::new(1).maximize(vec![qi(-1)]).free_variables();
        lp.push(Constraint::new(vec![qi(1)], Relation::Ge, qi(-5), "lb"));
        match solve(&lp) {
            LpOutcome::Optimal { x, value } => {
                assert_eq!(x, vec![qi(-5)]);
                assert_eq!(value, qi(5));
            }
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn detects_infeasibility_with_irreducible_subset() {
        let mut lp = LinearProgram::new(1);
        lp.push(Constraint::new(vec![qi(1)], Relation::Ge, qi(3), "x>=3"));
        lp.push(Constraint::new(vec![qi(1)], Relation::Le, qi(2), "x<=2"));
        lp.push(Constraint::new(vec![qi(1)], Relation::Le, qi(10), "x<=10"));
        match solve_or_explain(&lp) {
            Err(Error::LpInfeasible(labels)) => {
                assert_eq!(labels, vec!["x>=3".to_string(), "x<=2".to_string()]);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn detects_unbounded() {
        let lp = LinearProgram::new(1).maximize(vec![qi(1)]);
        assert!(matches!(solve(&lp), LpOutcome::Unbounded));
    }

    #[test]
    fn degenerate_program_terminates() {
        // A classic cycling-prone instance; Bland's rule must terminate.
        let mut lp = LinearProgram::new(4).maximize(vec![q(3, 4), qi(-150), q(1, 50), qi(-6)]);
        lp.push(Constraint::new(
            vec![q(1, 4), qi(-60), q(-1, 25), qi(9)],
            Relation::Le,
            qi(0),
            "r1",
        ));
        lp.push(Constraint::new(
            vec![q(1, 2), qi(-90), q(-1, 50), qi(3)],
            Relation::Le,
            qi(0),
            "r2",
        ));
        lp.push(Constraint::new(vec![qi(0), qi(0), qi(1), qi(0)], Relation::Le, qi(1), "r3"));
        match solve(&lp) {
            LpOutcome::Optimal { value, .. } => assert_eq!(value, q(1, 20)),
            other => panic!("expected optimum, got {other:?}"),
        }
    }
}
