//! Dense two-phase tableau simplex with Bland's rule.

use num_traits::{One, Signed, Zero};

use super::{Direction, LinearProgram, LpResult, Sense};
use crate::num::{RVec, Rational};

#[derive(Clone, Copy)]
enum ColKind {
    /// Positive part of original variable.
    Pos(usize),
    /// Negative part of a free original variable.
    NegPart(usize),
    Slack,
    Artificial,
}

struct Tableau {
    /// `m` constraint rows, each with `ncols + 1` entries (last is rhs).
    rows: Vec<Vec<Rational>>,
    /// Reduced-cost row, last entry is minus the objective value.
    obj: Vec<Rational>,
    basis: Vec<usize>,
    kinds: Vec<ColKind>,
}

impl Tableau {
    fn ncols(&self) -> usize {
        self.kinds.len()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        if !p.is_one() {
            let inv = p.recip();
            for v in self.rows[r].iter_mut() {
                if !v.is_zero() {
                    *v *= &inv;
                }
            }
        }
        let pivot_row = self.rows[r].clone();
        let eliminate = |row: &mut Vec<Rational>| {
            let f = row[c].clone();
            if f.is_zero() {
                return;
            }
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        };
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                eliminate(row);
            }
        }
        eliminate(&mut self.obj);
        self.basis[r] = c;
    }

    /// Loads a cost vector (minimization) into the reduced-cost row.
    fn set_costs(&mut self, costs: &[Rational]) {
        let n = self.ncols();
        let mut obj: Vec<Rational> = costs.to_vec();
        obj.push(Rational::zero());
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = &costs[b];
            if cb.is_zero() {
                continue;
            }
            for j in 0..=n {
                let v = &self.rows[r][j];
                if !v.is_zero() {
                    obj[j] -= cb * v;
                }
            }
        }
        self.obj = obj;
    }

    /// Runs Bland's rule to optimality. Returns the unbounded entering column
    /// if the objective is unbounded below.
    fn optimize(&mut self, allowed: impl Fn(usize) -> bool) -> Option<usize> {
        let n = self.ncols();
        loop {
            let entering = (0..n).find(|&j| allowed(j) && self.obj[j].is_negative());
            let Some(c) = entering else {
                return None;
            };
            let mut best: Option<(usize, Rational)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                if !row[c].is_positive() {
                    continue;
                }
                let ratio = &row[n] / &row[c];
                let better = match &best {
                    None => true,
                    Some((br, bv)) => {
                        ratio < *bv || (ratio == *bv && self.basis[r] < self.basis[*br])
                    }
                };
                if better {
                    best = Some((r, ratio));
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None => return Some(c),
            }
        }
    }

    fn column_values(&self) -> Vec<Rational> {
        let n = self.ncols();
        let mut vals = vec![Rational::zero(); n];
        for (r, &b) in self.basis.iter().enumerate() {
            vals[b] = self.rows[r][n].clone();
        }
        vals
    }
}

fn to_original(kinds: &[ColKind], vals: &[Rational], num_vars: usize) -> RVec {
    let mut x = vec![Rational::zero(); num_vars];
    for (kind, v) in kinds.iter().zip(vals) {
        match *kind {
            ColKind::Pos(k) => x[k] += v,
            ColKind::NegPart(k) => x[k] -= v,
            _ => {}
        }
    }
    x
}

pub(super) fn solve(lp: &LinearProgram) -> LpResult {
    let m = lp.rows.len();
    let nv = lp.num_vars;

    let mut kinds = Vec::new();
    for k in 0..nv {
        kinds.push(ColKind::Pos(k));
        if !lp.nonneg[k] {
            kinds.push(ColKind::NegPart(k));
        }
    }
    let n_struct = kinds.len();
    let slack_of: Vec<Option<usize>> = lp
        .rows
        .iter()
        .map(|row| {
            (row.sense == Sense::Le).then(|| {
                kinds.push(ColKind::Slack);
                kinds.len() - 1
            })
        })
        .collect();

    // Row sign so that every rhs is nonnegative.
    let sigma: Vec<bool> = lp.rows.iter().map(|r| r.rhs.is_negative()).collect();

    // Initial basis: slack when it enters with +1, artificial otherwise.
    let mut init_basic = vec![0usize; m];
    let mut needs_art = vec![false; m];
    for i in 0..m {
        match slack_of[i] {
            Some(s) if !sigma[i] => init_basic[i] = s,
            _ => {
                needs_art[i] = true;
                kinds.push(ColKind::Artificial);
                init_basic[i] = kinds.len() - 1;
            }
        }
    }
    let ncols = kinds.len();

    let mut rows = Vec::with_capacity(m);
    for (i, row) in lp.rows.iter().enumerate() {
        let mut t = vec![Rational::zero(); ncols + 1];
        let flip = |v: Rational| if sigma[i] { -v } else { v };
        let mut col = 0;
        for k in 0..nv {
            let a = &row.coeffs[k];
            t[col] = flip(a.clone());
            col += 1;
            if !lp.nonneg[k] {
                t[col] = flip(-a.clone());
                col += 1;
            }
        }
        debug_assert_eq!(col, n_struct);
        if let Some(s) = slack_of[i] {
            t[s] = flip(Rational::one());
        }
        if needs_art[i] {
            t[init_basic[i]] = Rational::one();
        }
        t[ncols] = flip(row.rhs.clone());
        rows.push(t);
    }

    let mut tab = Tableau {
        rows,
        obj: Vec::new(),
        basis: init_basic.clone(),
        kinds,
    };
    let is_art = |kinds: &[ColKind], j: usize| matches!(kinds[j], ColKind::Artificial);

    // Phase 1.
    if needs_art.iter().any(|&b| b) {
        let costs: Vec<Rational> = (0..ncols)
            .map(|j| {
                if is_art(&tab.kinds, j) {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            })
            .collect();
        tab.set_costs(&costs);
        let unb = tab.optimize(|_| true);
        debug_assert!(unb.is_none(), "phase 1 is bounded below by zero");
        let infeas = tab.obj[ncols].is_negative();
        if infeas {
            // Duals y = c_B B^-1, read off the columns of the initial basis.
            let value = -tab.obj[ncols].clone();
            let mut farkas = Vec::with_capacity(m);
            for i in 0..m {
                let col = init_basic[i];
                let mut yi = Rational::zero();
                for (r, &b) in tab.basis.iter().enumerate() {
                    if !costs[b].is_zero() {
                        yi += &costs[b] * &tab.rows[r][col];
                    }
                }
                // Undo the row flip and orient so that b^T w = -1.
                let w = if sigma[i] { yi } else { -yi };
                farkas.push(w / &value);
            }
            return LpResult::Infeasible { farkas };
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..m {
            if !is_art(&tab.kinds, tab.basis[r]) {
                continue;
            }
            if let Some(c) = (0..ncols).find(|&j| !is_art(&tab.kinds, j) && !tab.rows[r][j].is_zero()) {
                tab.pivot(r, c);
            }
        }
    }

    let Some((dir, c)) = &lp.objective else {
        let vals = tab.column_values();
        return LpResult::Optimal {
            solution: to_original(&tab.kinds, &vals, nv),
            value: Rational::zero(),
        };
    };

    // Phase 2 minimizes; maximization negates the costs.
    let costs: Vec<Rational> = tab
        .kinds
        .iter()
        .map(|kind| {
            let base = match *kind {
                ColKind::Pos(k) => c[k].clone(),
                ColKind::NegPart(k) => -c[k].clone(),
                _ => Rational::zero(),
            };
            match dir {
                Direction::Min => base,
                Direction::Max => -base,
            }
        })
        .collect();
    tab.set_costs(&costs);
    let kinds = tab.kinds.clone();
    let unbounded = tab.optimize(|j| !is_art(&kinds, j));
    let vals = tab.column_values();
    let point = to_original(&tab.kinds, &vals, nv);
    if let Some(col) = unbounded {
        let mut dvals = vec![Rational::zero(); ncols];
        dvals[col] = Rational::one();
        for (r, &b) in tab.basis.iter().enumerate() {
            dvals[b] = -tab.rows[r][col].clone();
        }
        let ray = to_original(&tab.kinds, &dvals, nv);
        return LpResult::Unbounded { point, ray };
    }
    let value = crate::num::dot(c, &point);
    LpResult::Optimal {
        solution: point,
        value,
    }
}
