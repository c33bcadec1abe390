//! Linear programming over exact rationals.
//!
//! [`LinearProgram`] is a small builder for bounded-variable programs with
//! `<=`, `=` and `>=` rows. Solving maps it to standard form and runs a dense
//! two-phase primal simplex with Bland's rule, either over [`Rat`] (default)
//! or over `f64` with absolute tolerance [`FLOAT_TOLERANCE`].
//!
//! ```
//! use illiquid::lp::{LinearProgram, Relation, Sense, Status};
//! use illiquid::num::int;
//!
//! let mut lp = LinearProgram::new(Sense::Maximize);
//! let x = lp.add_var(Some(int(0)), None);
//! lp.set_objective(x, int(1));
//! lp.add_row(vec![(x, int(1))], Relation::Le, int(3));
//! let sol = lp.solve().unwrap();
//! assert_eq!(sol.status, Status::Optimal);
//! assert_eq!(sol.x[x], int(3));
//! ```

mod field;
mod tableau;

use std::fmt;
use std::str::FromStr;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::num::{ExtReal, Rat};
use field::Field;
pub use field::FLOAT_TOLERANCE;
use tableau::{Outcome, Tableau};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("simplex iteration limit of {0} exceeded")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Arithmetic {
    #[default]
    Rational,
    Float,
}

impl FromStr for Arithmetic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rational" | "exact" => Ok(Arithmetic::Rational),
            "float" | "f64" => Ok(Arithmetic::Float),
            other => Err(format!("unknown arithmetic mode {other:?}")),
        }
    }
}

impl fmt::Display for Arithmetic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arithmetic::Rational => "rational",
            Arithmetic::Float => "float",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub arithmetic: Arithmetic,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            arithmetic: Arithmetic::Rational,
            max_iterations: 200_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Row {
    pub terms: Vec<(usize, Rat)>,
    pub relation: Relation,
    pub rhs: Rat,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<Rat>,
    pub lower: Vec<Option<Rat>>,
    pub upper: Vec<Option<Rat>>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: Status,
    /// Optimal point, or the last feasible vertex when unbounded; empty when infeasible.
    pub x: Vec<Rat>,
    pub objective: Rat,
    /// One multiplier per row, in the sign convention of [`LinearProgram::lagrangian_bound`].
    pub duals: Vec<Rat>,
    /// `c - A^T y` per variable.
    pub reduced_costs: Vec<Rat>,
    /// Improving recession direction when unbounded.
    pub ray: Option<Vec<Rat>>,
    pub iterations: usize,
}

enum VarMap {
    /// `x = base + z`
    Shift(usize, Rat),
    /// `x = base - z`
    Mirror(usize, Rat),
    /// `x = z+ - z-`
    Split(usize, usize),
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        LinearProgram {
            sense,
            objective: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn add_var(&mut self, lower: Option<Rat>, upper: Option<Rat>) -> usize {
        self.objective.push(Rat::zero());
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_nonneg(&mut self) -> usize {
        self.add_var(Some(Rat::zero()), None)
    }

    pub fn add_free(&mut self) -> usize {
        self.add_var(None, None)
    }

    pub fn set_objective(&mut self, var: usize, coef: Rat) {
        self.objective[var] = coef;
    }

    pub fn add_row(&mut self, terms: Vec<(usize, Rat)>, relation: Relation, rhs: Rat) -> usize {
        self.rows.push(Row {
            terms,
            relation,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        for (i, row) in self.rows.iter().enumerate() {
            if let Some((j, _)) = row.terms.iter().find(|(j, _)| *j >= n) {
                return Err(LpError::Malformed(format!(
                    "row {i} references variable {j} but only {n} exist"
                )));
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[Rat]) -> Rat {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Exact feasibility of `x` against rows and bounds.
    pub fn is_feasible(&self, x: &[Rat]) -> bool {
        if x.len() != self.num_vars() {
            return false;
        }
        for (j, v) in x.iter().enumerate() {
            if self.lower[j].as_ref().is_some_and(|l| v < l)
                || self.upper[j].as_ref().is_some_and(|u| v > u)
            {
                return false;
            }
        }
        self.rows.iter().all(|row| {
            let lhs: Rat = row.terms.iter().map(|(j, a)| a * &x[*j]).sum();
            match row.relation {
                Relation::Le => lhs <= row.rhs,
                Relation::Eq => lhs == row.rhs,
                Relation::Ge => lhs >= row.rhs,
            }
        })
    }

    /// Lagrangian dual bound for multipliers `y`.
    ///
    /// For minimization `<=` rows need `y <= 0` and `>=` rows `y >= 0`; for
    /// maximization the signs flip. Returns `None` on a sign violation,
    /// otherwise `b.y + opt_{l<=x<=u} (c - A^T y).x`, which bounds the optimum.
    pub fn lagrangian_bound(&self, y: &[Rat]) -> Option<ExtReal> {
        if y.len() != self.num_rows() {
            return None;
        }
        let minimize = self.sense == Sense::Minimize;
        for (row, yi) in self.rows.iter().zip(y) {
            let ok = match (row.relation, minimize) {
                (Relation::Eq, _) => true,
                (Relation::Le, true) | (Relation::Ge, false) => !yi.is_positive(),
                (Relation::Ge, true) | (Relation::Le, false) => !yi.is_negative(),
            };
            if !ok {
                return None;
            }
        }
        let d = self.reduced(y);
        let mut total = ExtReal::Finite(self.rows.iter().zip(y).map(|(r, yi)| &r.rhs * yi).sum());
        for (j, dj) in d.iter().enumerate() {
            if dj.is_zero() {
                continue;
            }
            // For minimization take the bound minimizing dj*x, for maximization the maximizing one.
            let use_lower = dj.is_positive() == minimize;
            let bound = if use_lower { &self.lower[j] } else { &self.upper[j] };
            let term = match bound {
                Some(b) => ExtReal::Finite(dj * b),
                None if minimize => ExtReal::NegInf,
                None => ExtReal::PosInf,
            };
            total = if minimize {
                add_down(&total, &term)
            } else {
                total.add(&term)
            };
        }
        Some(total)
    }

    fn reduced(&self, y: &[Rat]) -> Vec<Rat> {
        let mut d = self.objective.clone();
        for (row, yi) in self.rows.iter().zip(y) {
            if yi.is_zero() {
                continue;
            }
            for (j, a) in &row.terms {
                d[*j] -= a * yi;
            }
        }
        d
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        self.solve_with(&SolverOptions::default())
    }

    pub fn solve_with(&self, opts: &SolverOptions) -> Result<LpSolution, LpError> {
        self.validate()?;
        match opts.arithmetic {
            Arithmetic::Rational => self.solve_in::<Rat>(opts),
            Arithmetic::Float => self.solve_in::<f64>(opts),
        }
    }

    fn solve_in<F: Field>(&self, opts: &SolverOptions) -> Result<LpSolution, LpError> {
        let n = self.num_vars();
        let mut maps = Vec::with_capacity(n);
        let mut ns = 0usize;
        let mut bound_rows: Vec<(usize, Rat)> = Vec::new();
        for j in 0..n {
            match (&self.lower[j], &self.upper[j]) {
                (Some(l), u) => {
                    if let Some(u) = u {
                        if u < l {
                            return Ok(self.infeasible(0));
                        }
                        bound_rows.push((ns, u - l));
                    }
                    maps.push(VarMap::Shift(ns, l.clone()));
                    ns += 1;
                }
                (None, Some(u)) => {
                    maps.push(VarMap::Mirror(ns, u.clone()));
                    ns += 1;
                }
                (None, None) => {
                    maps.push(VarMap::Split(ns, ns + 1));
                    ns += 2;
                }
            }
        }

        // Standard-form rows over structural columns with nonnegative rhs.
        struct StdRow {
            terms: Vec<(usize, Rat)>,
            relation: Relation,
            rhs: Rat,
            flipped: bool,
        }
        let mut std_rows = Vec::with_capacity(self.rows.len() + bound_rows.len());
        for row in &self.rows {
            let mut terms = Vec::with_capacity(row.terms.len());
            let mut rhs = row.rhs.clone();
            for (j, a) in &row.terms {
                if a.is_zero() {
                    continue;
                }
                match &maps[*j] {
                    VarMap::Shift(c, base) => {
                        rhs -= a * base;
                        terms.push((*c, a.clone()));
                    }
                    VarMap::Mirror(c, base) => {
                        rhs -= a * base;
                        terms.push((*c, -a));
                    }
                    VarMap::Split(p, m) => {
                        terms.push((*p, a.clone()));
                        terms.push((*m, -a));
                    }
                }
            }
            std_rows.push(StdRow {
                terms,
                relation: row.relation,
                rhs,
                flipped: false,
            });
        }
        for (c, cap) in bound_rows {
            std_rows.push(StdRow {
                terms: vec![(c, Rat::from_integer(1.into()))],
                relation: Relation::Le,
                rhs: cap,
                flipped: false,
            });
        }
        for r in &mut std_rows {
            if r.rhs.is_negative() {
                r.rhs = -&r.rhs;
                for (_, a) in &mut r.terms {
                    *a = -&*a;
                }
                r.relation = match r.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                r.flipped = true;
            }
        }

        let m = std_rows.len();
        let n_slack = std_rows.iter().filter(|r| r.relation != Relation::Eq).count();
        let n_art = std_rows.iter().filter(|r| r.relation != Relation::Le).count();
        let ncols = ns + n_slack + n_art;
        let art_start = ns + n_slack;
        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut initial = Vec::with_capacity(m);
        let (mut next_slack, mut next_art) = (ns, art_start);
        for r in &std_rows {
            let mut dense = vec![F::nil(); ncols + 1];
            for (c, a) in &r.terms {
                dense[*c] = Field::add(&dense[*c], &F::from_rat(a));
            }
            dense[ncols] = F::from_rat(&r.rhs);
            let one = F::from_rat(&Rat::from_integer(1.into()));
            match r.relation {
                Relation::Le => {
                    dense[next_slack] = one;
                    basis.push(next_slack);
                    initial.push(next_slack);
                    next_slack += 1;
                }
                Relation::Ge => {
                    dense[next_slack] = one.neg();
                    next_slack += 1;
                    dense[next_art] = one;
                    basis.push(next_art);
                    initial.push(next_art);
                    next_art += 1;
                }
                Relation::Eq => {
                    dense[next_art] = one;
                    basis.push(next_art);
                    initial.push(next_art);
                    next_art += 1;
                }
            }
            rows.push(dense);
        }

        let mut tab = Tableau::new(rows, basis, ncols, opts.max_iterations);
        if n_art > 0 {
            let mut phase1 = vec![F::nil(); ncols];
            for c in phase1.iter_mut().skip(art_start) {
                *c = F::from_rat(&Rat::from_integer(1.into()));
            }
            tab.set_objective(&phase1);
            if let Outcome::Unbounded(_) = tab.run()? {
                unreachable!("phase one objective is bounded below");
            }
            if tab.objective_value().is_pos() {
                return Ok(self.infeasible(tab.iterations));
            }
            for i in 0..m {
                if tab.basis[i] < art_start {
                    continue;
                }
                if let Some(q) = (0..art_start).find(|&j| !tab.rows[i][j].is_nil()) {
                    tab.pivot(i, q);
                }
            }
            for b in tab.blocked.iter_mut().skip(art_start) {
                *b = true;
            }
        }

        let flip = self.sense == Sense::Maximize;
        let mut cost = vec![F::nil(); ncols];
        for (j, map) in maps.iter().enumerate() {
            let c = if flip { -&self.objective[j] } else { self.objective[j].clone() };
            match map {
                VarMap::Shift(col, _) => cost[*col] = F::from_rat(&c),
                VarMap::Mirror(col, _) => cost[*col] = F::from_rat(&-c),
                VarMap::Split(p, q) => {
                    cost[*p] = F::from_rat(&c);
                    cost[*q] = F::from_rat(&-c);
                }
            }
        }
        tab.set_objective(&cost);
        let outcome = tab.run()?;

        let z: Vec<Rat> = tab.values().iter().map(Field::to_rat).collect();
        let x: Vec<Rat> = maps
            .iter()
            .map(|map| match map {
                VarMap::Shift(c, base) => base + &z[*c],
                VarMap::Mirror(c, base) => base - &z[*c],
                VarMap::Split(p, q) => &z[*p] - &z[*q],
            })
            .collect();
        let mut duals: Vec<Rat> = Vec::with_capacity(self.rows.len());
        for (i, r) in std_rows.iter().enumerate().take(self.rows.len()) {
            let yhat = tab.obj[initial[i]].neg().to_rat();
            let y = if r.flipped != flip { -yhat } else { yhat };
            duals.push(y);
        }
        let reduced_costs = self.reduced(&duals);
        let objective = self.evaluate(&x);
        let (status, ray) = match outcome {
            Outcome::Optimal => (Status::Optimal, None),
            Outcome::Unbounded(q) => {
                let mut dz = vec![Rat::zero(); ncols];
                dz[q] = Rat::from_integer(1.into());
                for (i, &b) in tab.basis.iter().enumerate() {
                    dz[b] = tab.rows[i][q].neg().to_rat();
                }
                let dx = maps
                    .iter()
                    .map(|map| match map {
                        VarMap::Shift(c, _) => dz[*c].clone(),
                        VarMap::Mirror(c, _) => -&dz[*c],
                        VarMap::Split(p, q) => &dz[*p] - &dz[*q],
                    })
                    .collect();
                (Status::Unbounded, Some(dx))
            }
        };
        Ok(LpSolution {
            status,
            x,
            objective,
            duals,
            reduced_costs,
            ray,
            iterations: tab.iterations,
        })
    }

    fn infeasible(&self, iterations: usize) -> LpSolution {
        LpSolution {
            status: Status::Infeasible,
            x: Vec::new(),
            objective: Rat::zero(),
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            ray: None,
            iterations,
        }
    }
}

/// Sum with `+inf + -inf = -inf`, the lower-bound convention.
fn add_down(a: &ExtReal, b: &ExtReal) -> ExtReal {
    a.neg().add(&b.neg()).neg()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{frac, int};

    fn both(lp: &LinearProgram) -> [LpSolution; 2] {
        let exact = lp.solve().unwrap();
        let float = lp
            .solve_with(&SolverOptions {
                arithmetic: Arithmetic::Float,
                ..Default::default()
            })
            .unwrap();
        assert_eq!(exact.status, float.status);
        [exact, float]
    }

    fn assert_strong_duality(lp: &LinearProgram, sol: &LpSolution) {
        assert_eq!(sol.status, Status::Optimal);
        assert!(lp.is_feasible(&sol.x));
        let bound = lp.lagrangian_bound(&sol.duals).expect("dual signs");
        assert_eq!(bound, ExtReal::Finite(sol.objective.clone()));
    }

    #[test]
    fn bounded_max() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_nonneg();
        lp.set_objective(x, int(1));
        lp.add_row(vec![(x, int(1))], Relation::Le, int(3));
        let [sol, f] = both(&lp);
        assert_eq!(sol.x[x], int(3));
        assert_eq!(f.x[x], int(3));
        assert_eq!(sol.duals, vec![int(1)]);
        assert_strong_duality(&lp, &sol);
    }

    #[test]
    fn unbounded_with_ray() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_nonneg();
        lp.set_objective(x, int(1));
        let [sol, _] = both(&lp);
        assert_eq!(sol.status, Status::Unbounded);
        assert_eq!(sol.ray.unwrap(), vec![int(1)]);
    }

    #[test]
    fn infeasible_bounds_and_rows() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_nonneg();
        lp.add_row(vec![(x, int(1))], Relation::Le, int(-1));
        assert_eq!(both(&lp)[0].status, Status::Infeasible);

        let mut lp = LinearProgram::new(Sense::Minimize);
        lp.add_var(Some(int(2)), Some(int(1)));
        assert_eq!(lp.solve().unwrap().status, Status::Infeasible);
    }

    #[test]
    fn free_and_mirrored_variables() {
        // min x - 2y, x free, y <= 4, x - y >= -3, x + y = 1
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_free();
        let y = lp.add_var(None, Some(int(4)));
        lp.set_objective(x, int(1));
        lp.set_objective(y, int(-2));
        lp.add_row(vec![(x, int(1)), (y, int(-1))], Relation::Ge, int(-3));
        lp.add_row(vec![(x, int(1)), (y, int(1))], Relation::Eq, int(1));
        let [sol, f] = both(&lp);
        assert_eq!(sol.x, vec![int(-1), int(2)]);
        assert!((crate::num::to_f64(&f.objective) + 5.0).abs() < 1e-9);
        assert_strong_duality(&lp, &sol);
    }

    #[test]
    fn boxed_variables_duality() {
        // max 3a + 2b - c with 1/2 <= a <= 2, -1 <= b <= 1, c >= -5
        let mut lp = LinearProgram::new(Sense::Maximize);
        let a = lp.add_var(Some(frac(1, 2)), Some(int(2)));
        let b = lp.add_var(Some(int(-1)), Some(int(1)));
        let c = lp.add_var(Some(int(-5)), None);
        lp.set_objective(a, int(3));
        lp.set_objective(b, int(2));
        lp.set_objective(c, int(-1));
        lp.add_row(vec![(a, int(1)), (b, int(1)), (c, int(1))], Relation::Le, int(1));
        lp.add_row(vec![(a, int(2)), (c, int(-1))], Relation::Ge, int(0));
        let [sol, _] = both(&lp);
        assert_strong_duality(&lp, &sol);
        assert_eq!(sol.objective, int(13));
    }

    #[test]
    fn degenerate_cycling_instance_terminates() {
        // Beale's example, which cycles under the largest-coefficient rule.
        let mut lp = LinearProgram::new(Sense::Minimize);
        let v: Vec<usize> = (0..4).map(|_| lp.add_nonneg()).collect();
        for (j, c) in [frac(-3, 4), int(150), frac(-1, 50), int(6)].into_iter().enumerate() {
            lp.set_objective(v[j], c);
        }
        let rows = [
            [frac(1, 4), int(-60), frac(-1, 25), int(9)],
            [frac(1, 2), int(-90), frac(-1, 50), int(3)],
        ];
        for r in rows {
            lp.add_row(v.iter().copied().zip(r).collect(), Relation::Le, int(0));
        }
        lp.add_row(vec![(v[2], int(1))], Relation::Le, int(1));
        let [sol, _] = both(&lp);
        assert_eq!(sol.objective, frac(-1, 20));
        assert_strong_duality(&lp, &sol);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_nonneg();
        let y = lp.add_nonneg();
        lp.set_objective(x, int(1));
        lp.add_row(vec![(x, int(1)), (y, int(1))], Relation::Eq, int(2));
        lp.add_row(vec![(x, int(2)), (y, int(2))], Relation::Eq, int(4));
        let [sol, _] = both(&lp);
        assert_eq!(sol.x, vec![int(2), int(0)]);
        assert_strong_duality(&lp, &sol);
    }

    #[test]
    fn rejects_unknown_variable() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        lp.add_row(vec![(3, int(1))], Relation::Le, int(1));
        assert!(matches!(lp.solve(), Err(LpError::Malformed(_))));
    }

    #[test]
    fn iteration_cap_is_an_error() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_nonneg();
        let y = lp.add_nonneg();
        lp.set_objective(x, int(1));
        lp.set_objective(y, int(1));
        lp.add_row(vec![(x, int(1))], Relation::Le, int(1));
        lp.add_row(vec![(y, int(1))], Relation::Le, int(1));
        let opts = SolverOptions {
            max_iterations: 1,
            ..Default::default()
        };
        assert_eq!(lp.solve_with(&opts).unwrap_err(), LpError::IterationLimit(1));
    }
}
