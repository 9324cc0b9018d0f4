//! Dense two-phase simplex with Bland's rule, sized for programs with a few
//! dozen variables.

const EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coefficients: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `maximize c·x  subject to  constraints, x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal {
        x: Vec<f64>,
        value: f64,
    },
    Infeasible,
    Unbounded,
    /// Pivot cap hit; cannot happen with Bland's rule barring numerical trouble.
    Stalled,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
}

enum Phase {
    Optimal,
    Unbounded,
    Stalled,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize, obj: &mut [f64]) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r && row[c] != 0.0 {
                let f = row[c];
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        let f = obj[c];
        if f != 0.0 {
            for (v, pv) in obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
        }
        self.basis[r] = c;
    }

    /// Reduced-cost row for maximizing `cost·x` with the current basis.
    fn objective_row(&self, cost: &[f64]) -> Vec<f64> {
        let mut obj: Vec<f64> = (0..=self.width).map(|j| if j < self.width { -cost[j] } else { 0.0 }).collect();
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = cost[b];
            if cb != 0.0 {
                for (o, v) in obj.iter_mut().zip(row) {
                    *o += cb * v;
                }
            }
        }
        obj
    }

    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) -> Phase {
        let mut obj = self.objective_row(cost);
        for _ in 0..MAX_PIVOTS {
            // Bland: lowest-index improving column
            let Some(c) = (0..self.width).find(|&j| allowed[j] && obj[j] < -EPS) else {
                return Phase::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[c] > EPS {
                    let ratio = row[self.width] / row[c];
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((j, best)) => {
                            if ratio < best - EPS || (ratio <= best + EPS && self.basis[i] < self.basis[j]) {
                                Some((i, ratio))
                            } else {
                                Some((j, best))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Phase::Unbounded;
            };
            self.pivot(r, c, &mut obj);
        }
        Phase::Stalled
    }
}

pub fn maximize(lp: &LinearProgram) -> LpOutcome {
    let n = lp.objective.len();
    let m = lp.constraints.len();
    // Normalize to nonnegative right-hand sides.
    let rows: Vec<(Vec<f64>, Relation, f64)> = lp
        .constraints
        .iter()
        .map(|c| {
            if c.rhs < 0.0 {
                let flipped = match c.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (c.coefficients.iter().map(|v| -v).collect(), flipped, -c.rhs)
            } else {
                (c.coefficients.clone(), c.relation, c.rhs)
            }
        })
        .collect();
    let slack_count = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let art_count = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let width = n + slack_count + art_count;
    let art_start = n + slack_count;

    let mut tab = Tableau { rows: Vec::with_capacity(m), basis: Vec::with_capacity(m), width };
    let (mut s, mut a) = (n, art_start);
    for (coef, rel, rhs) in &rows {
        let mut row = vec![0.0; width + 1];
        row[..n].copy_from_slice(coef);
        row[width] = *rhs;
        match rel {
            Relation::Le => {
                row[s] = 1.0;
                tab.basis.push(s);
                s += 1;
            }
            Relation::Ge => {
                row[s] = -1.0;
                s += 1;
                row[a] = 1.0;
                tab.basis.push(a);
                a += 1;
            }
            Relation::Eq => {
                row[a] = 1.0;
                tab.basis.push(a);
                a += 1;
            }
        }
        tab.rows.push(row);
    }

    if art_count > 0 {
        let cost: Vec<f64> = (0..width).map(|j| if j >= art_start { -1.0 } else { 0.0 }).collect();
        match tab.optimize(&cost, &vec![true; width]) {
            Phase::Optimal => {}
            Phase::Stalled => return LpOutcome::Stalled,
            Phase::Unbounded => unreachable!("phase one objective is bounded by zero"),
        }
        let infeasibility: f64 =
            tab.rows.iter().zip(&tab.basis).filter(|(_, b)| **b >= art_start).map(|(r, _)| r[width]).sum();
        if infeasibility > 1e-9 {
            return LpOutcome::Infeasible;
        }
        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < tab.rows.len() {
            if tab.basis[i] >= art_start {
                match (0..art_start).find(|&j| tab.rows[i][j].abs() > EPS) {
                    Some(j) => {
                        let mut dummy = vec![0.0; width + 1];
                        tab.pivot(i, j, &mut dummy);
                    }
                    None => {
                        tab.rows.remove(i);
                        tab.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    let cost: Vec<f64> = (0..width).map(|j| if j < n { lp.objective[j] } else { 0.0 }).collect();
    let allowed: Vec<bool> = (0..width).map(|j| j < art_start).collect();
    match tab.optimize(&cost, &allowed) {
        Phase::Optimal => {}
        Phase::Unbounded => return LpOutcome::Unbounded,
        Phase::Stalled => return LpOutcome::Stalled,
    }
    let mut x = vec![0.0; n];
    for (row, &b) in tab.rows.iter().zip(&tab.basis) {
        if b < n {
            x[b] = row[width];
        }
    }
    let value = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
    LpOutcome::Optimal { x, value }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(coefficients: Vec<f64>, relation: Relation, rhs: f64) -> Constraint {
        Constraint { coefficients, relation, rhs }
    }

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let lp = LinearProgram {
            objective: vec![3.0, 5.0],
            constraints: vec![
                c(vec![1.0, 0.0], Relation::Le, 4.0),
                c(vec![0.0, 2.0], Relation::Le, 12.0),
                c(vec![3.0, 2.0], Relation::Le, 18.0),
            ],
        };
        let LpOutcome::Optimal { x, value } = maximize(&lp) else { panic!() };
        assert!((value - 36.0).abs() < 1e-9);
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // max x - y, x + y = 1, x ≥ 0.25 (as -x ≤ -0.25), y ≥ 0.5 → x = 0.5
        let lp = LinearProgram {
            objective: vec![1.0, -1.0],
            constraints: vec![
                c(vec![1.0, 1.0], Relation::Eq, 1.0),
                c(vec![-1.0, 0.0], Relation::Le, -0.25),
                c(vec![0.0, 1.0], Relation::Ge, 0.5),
            ],
        };
        let LpOutcome::Optimal { x, value } = maximize(&lp) else { panic!() };
        assert!((value - 0.0).abs() < 1e-9);
        assert!((x[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let lp = LinearProgram {
            objective: vec![1.0],
            constraints: vec![c(vec![1.0], Relation::Le, 1.0), c(vec![1.0], Relation::Ge, 2.0)],
        };
        assert_eq!(maximize(&lp), LpOutcome::Infeasible);
        let lp = LinearProgram { objective: vec![1.0, 0.0], constraints: vec![c(vec![0.0, 1.0], Relation::Le, 1.0)] };
        assert_eq!(maximize(&lp), LpOutcome::Unbounded);
    }

    #[test]
    fn degenerate_program_terminates() {
        // Classic cycling example under Dantzig's rule (Beale).
        let lp = LinearProgram {
            objective: vec![0.75, -20.0, 0.5, -6.0],
            constraints: vec![
                c(vec![0.25, -8.0, -1.0, 9.0], Relation::Le, 0.0),
                c(vec![0.5, -12.0, -0.5, 3.0], Relation::Le, 0.0),
                c(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0),
            ],
        };
        let LpOutcome::Optimal { value, .. } = maximize(&lp) else { panic!() };
        assert!((value - 1.25).abs() < 1e-9);
    }
}
