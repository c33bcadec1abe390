//! Dense two-phase primal simplex with Bland's rule.
//!
//! The tableau works on `min c.z, A z = b, z >= 0, b >= 0` where every row
//! already has an initial basic column (slack or artificial).

use super::field::Field;
use super::LpError;

pub(crate) enum Outcome {
    Optimal,
    /// Entering column with no blocking row.
    Unbounded(usize),
}

pub(crate) struct Tableau<F> {
    /// `m` rows of `ncols + 1` entries; the last entry is the right-hand side.
    pub rows: Vec<Vec<F>>,
    /// Reduced costs, last entry holds minus the objective value.
    pub obj: Vec<F>,
    pub basis: Vec<usize>,
    pub ncols: usize,
    /// Columns that may never enter (artificials after phase one).
    pub blocked: Vec<bool>,
    pub iterations: usize,
    pub max_iterations: usize,
}

impl<F: Field> Tableau<F> {
    pub fn new(rows: Vec<Vec<F>>, basis: Vec<usize>, ncols: usize, max_iterations: usize) -> Self {
        Tableau {
            rows,
            obj: vec![F::nil(); ncols + 1],
            basis,
            ncols,
            blocked: vec![false; ncols],
            iterations: 0,
            max_iterations,
        }
    }

    /// Installs cost vector `c` (length `ncols`) and prices out the basis.
    pub fn set_objective(&mut self, c: &[F]) {
        let mut obj: Vec<F> = c.to_vec();
        obj.push(F::nil());
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = c[b].clone();
            if cb.is_nil() {
                continue;
            }
            for (o, a) in obj.iter_mut().zip(&self.rows[i]) {
                if !a.is_nil() {
                    o.sub_mul_assign(&cb, a);
                }
            }
        }
        for b in &self.basis {
            obj[*b] = F::nil();
        }
        self.obj = obj;
    }

    pub fn objective_value(&self) -> F {
        self.obj[self.ncols].neg()
    }

    pub fn pivot(&mut self, r: usize, q: usize) {
        let width = self.ncols + 1;
        let p = self.rows[r][q].clone();
        let mut support = Vec::new();
        for j in 0..width {
            if !self.rows[r][j].is_nil() {
                let v = self.rows[r][j].div(&p);
                self.rows[r][j] = v;
                support.push(j);
            } else {
                self.rows[r][j] = F::nil();
            }
        }
        let pivot_row = std::mem::take(&mut self.rows[r]);
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[q].is_nil() {
                continue;
            }
            let f = row[q].clone();
            for &j in &support {
                row[j].sub_mul_assign(&f, &pivot_row[j]);
            }
            row[q] = F::nil();
        }
        if !self.obj[q].is_nil() {
            let f = self.obj[q].clone();
            for &j in &support {
                self.obj[j].sub_mul_assign(&f, &pivot_row[j]);
            }
            self.obj[q] = F::nil();
        }
        self.rows[r] = pivot_row;
        self.basis[r] = q;
    }

    fn entering(&self) -> Option<usize> {
        (0..self.ncols).find(|&j| !self.blocked[j] && self.obj[j].is_neg())
    }

    fn leaving(&self, q: usize) -> Option<usize> {
        let rhs = self.ncols;
        let mut best: Option<(usize, F)> = None;
        for (i, row) in self.rows.iter().enumerate() {
            if !row[q].is_pos() {
                continue;
            }
            let ratio = row[rhs].div(&row[q]);
            best = match best {
                None => Some((i, ratio)),
                Some((k, br)) => {
                    if ratio.less(&br) || (!br.less(&ratio) && self.basis[i] < self.basis[k]) {
                        Some((i, ratio))
                    } else {
                        Some((k, br))
                    }
                }
            };
        }
        best.map(|(i, _)| i)
    }

    pub fn run(&mut self) -> Result<Outcome, LpError> {
        loop {
            let Some(q) = self.entering() else {
                return Ok(Outcome::Optimal);
            };
            let Some(r) = self.leaving(q) else {
                return Ok(Outcome::Unbounded(q));
            };
            if self.iterations >= self.max_iterations {
                return Err(LpError::IterationLimit(self.max_iterations));
            }
            self.iterations += 1;
            self.pivot(r, q);
        }
    }

    /// Current basic solution over all columns.
    pub fn values(&self) -> Vec<F> {
        let mut z = vec![F::nil(); self.ncols];
        for (i, &b) in self.basis.iter().enumerate() {
            z[b] = self.rows[i][self.ncols].clone();
        }
        z
    }
}
