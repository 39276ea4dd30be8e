//! Dense two-phase simplex over non-negative variables.
//!
//! Minimizes `c . x` subject to rows `a . x <= b` or `a . x >= b` with
//! `x >= 0`. Bland's rule on both the entering and leaving choice keeps the
//! method cycle-free and fully deterministic. Geared to the small dense
//! programs of the layout solver (tens of variables, a few hundred rows).

/// Row sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Ge,
}

/// One linear row `coeffs . x (<=|>=) rhs`.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub rel: Rel,
    pub rhs: f64,
}

impl Constraint {
    pub fn le(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self {
            coeffs,
            rel: Rel::Le,
            rhs,
        }
    }

    pub fn ge(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self {
            coeffs,
            rel: Rel::Ge,
            rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
    /// The iteration cap tripped; numerically suspect input.
    Failed,
}

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
const MAX_ITERS: usize = 200_000;

/// Solves `min c . x` over the rows, `x >= 0`.
pub fn solve(num_vars: usize, objective: &[f64], constraints: &[Constraint]) -> LpOutcome {
    assert_eq!(objective.len(), num_vars);
    let m = constraints.len();
    if m == 0 {
        // With x >= 0, the minimum of each term is at 0 unless some cost is
        // negative, which makes the problem unbounded.
        if objective.iter().any(|c| *c < -COST_TOL) {
            return LpOutcome::Unbounded;
        }
        return LpOutcome::Optimal {
            x: vec![0.0; num_vars],
            objective: 0.0,
        };
    }

    // Column layout: structural | slack/surplus (one per row) | artificial.
    let slack_base = num_vars;
    let mut artificial_rows = Vec::new();
    for (r, c) in constraints.iter().enumerate() {
        assert_eq!(c.coeffs.len(), num_vars, "row {r} width");
        let flipped = c.rhs < 0.0;
        let rel = match (c.rel, flipped) {
            (Rel::Le, false) | (Rel::Ge, true) => Rel::Le,
            (Rel::Ge, false) | (Rel::Le, true) => Rel::Ge,
        };
        if rel == Rel::Ge {
            artificial_rows.push(r);
        }
    }
    let art_base = slack_base + m;
    let num_cols = art_base + artificial_rows.len();

    let mut tableau: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut basis = vec![0usize; m];
    let mut next_art = 0usize;
    for (r, c) in constraints.iter().enumerate() {
        let mut row = vec![0.0; num_cols + 1];
        let sign = if c.rhs < 0.0 { -1.0 } else { 1.0 };
        for (j, a) in c.coeffs.iter().enumerate() {
            row[j] = sign * a;
        }
        row[num_cols] = sign * c.rhs;
        let rel = match (c.rel, sign < 0.0) {
            (Rel::Le, false) | (Rel::Ge, true) => Rel::Le,
            (Rel::Ge, false) | (Rel::Le, true) => Rel::Ge,
        };
        match rel {
            Rel::Le => {
                row[slack_base + r] = 1.0;
                basis[r] = slack_base + r;
            }
            Rel::Ge => {
                row[slack_base + r] = -1.0;
                row[art_base + next_art] = 1.0;
                basis[r] = art_base + next_art;
                next_art += 1;
            }
        }
        tableau.push(row);
    }

    if !artificial_rows.is_empty() {
        // Phase 1: minimize the artificial total.
        let mut cost = vec![0.0; num_cols + 1];
        for j in art_base..num_cols {
            cost[j] = 1.0;
        }
        price_out(&mut cost, &tableau, &basis);
        match run_simplex(&mut tableau, &mut basis, &mut cost, num_cols, art_base) {
            SimplexEnd::Optimal => {}
            // Phase 1 is bounded below by 0; an "unbounded" report means the
            // arithmetic went sideways.
            SimplexEnd::Unbounded | SimplexEnd::Stalled => return LpOutcome::Failed,
        }
        let phase1 = -cost[num_cols];
        if phase1 > FEAS_TOL {
            return LpOutcome::Infeasible;
        }
        // Drive any artificial still basic (at value 0) out of the basis.
        for r in 0..m {
            if basis[r] >= art_base {
                if let Some(j) = (0..art_base).find(|j| tableau[r][*j].abs() > PIVOT_TOL) {
                    pivot(&mut tableau, &mut basis, r, j);
                }
            }
        }
    }

    // Phase 2 with the real objective; artificial columns are barred from
    // entering (a redundant row may still hold one basic at zero).
    let mut cost = vec![0.0; num_cols + 1];
    cost[..num_vars].copy_from_slice(objective);
    price_out(&mut cost, &tableau, &basis);
    match run_simplex(&mut tableau, &mut basis, &mut cost, num_cols, art_base) {
        SimplexEnd::Optimal => {}
        SimplexEnd::Unbounded => return LpOutcome::Unbounded,
        SimplexEnd::Stalled => return LpOutcome::Failed,
    }

    let mut x = vec![0.0; num_vars];
    for (r, b) in basis.iter().enumerate() {
        if *b < num_vars {
            x[*b] = tableau[r][num_cols].max(0.0);
        }
    }
    let objective_value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    LpOutcome::Optimal {
        x,
        objective: objective_value,
    }
}

enum SimplexEnd {
    Optimal,
    Unbounded,
    Stalled,
}

/// Reduces the cost row against the current basic columns.
fn price_out(cost: &mut [f64], tableau: &[Vec<f64>], basis: &[usize]) {
    for (r, b) in basis.iter().enumerate() {
        let factor = cost[*b];
        if factor != 0.0 {
            for (c, t) in cost.iter_mut().zip(&tableau[r]) {
                *c -= factor * t;
            }
        }
    }
}

fn run_simplex(
    tableau: &mut [Vec<f64>],
    basis: &mut [usize],
    cost: &mut [f64],
    num_cols: usize,
    entering_limit: usize,
) -> SimplexEnd {
    for _ in 0..MAX_ITERS {
        // Bland: smallest-index column with a negative reduced cost.
        let entering = (0..entering_limit).find(|j| cost[*j] < -COST_TOL);
        let Some(j) = entering else {
            return SimplexEnd::Optimal;
        };

        let mut leave: Option<(usize, f64)> = None;
        for (r, row) in tableau.iter().enumerate() {
            if row[j] > PIVOT_TOL {
                let ratio = row[num_cols] / row[j];
                let better = match leave {
                    None => true,
                    Some((lr, lratio)) => {
                        ratio < lratio - PIVOT_TOL
                            || (ratio <= lratio + PIVOT_TOL && basis[r] < basis[lr])
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let Some((r, _)) = leave else {
            return SimplexEnd::Unbounded;
        };

        pivot_with_cost(tableau, basis, cost, r, j);
    }
    SimplexEnd::Stalled
}

fn pivot(tableau: &mut [Vec<f64>], basis: &mut [usize], r: usize, j: usize) {
    let p = tableau[r][j];
    for v in tableau[r].iter_mut() {
        *v /= p;
    }
    for rr in 0..tableau.len() {
        if rr != r {
            let factor = tableau[rr][j];
            if factor != 0.0 {
                for c in 0..tableau[rr].len() {
                    tableau[rr][c] -= factor * tableau[r][c];
                }
            }
        }
    }
    basis[r] = j;
}

fn pivot_with_cost(
    tableau: &mut [Vec<f64>],
    basis: &mut [usize],
    cost: &mut [f64],
    r: usize,
    j: usize,
) {
    pivot(tableau, basis, r, j);
    let factor = cost[j];
    if factor != 0.0 {
        for (c, t) in cost.iter_mut().zip(&tableau[r]) {
            *c -= factor * t;
        }
    }
}
