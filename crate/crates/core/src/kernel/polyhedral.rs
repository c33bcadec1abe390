//! Polyhedral constraint sets containing the origin, and polyhedral cones.

use num_traits::{Signed, Zero};

use super::dd;
use super::KernelError;
use crate::lp::{LinearProgram, Relation, Sense, SolverOptions, Status};
use crate::num::{ExtReal, Rat};

/// Default largest dimension accepted by [`PolyhedralCone::convert`].
pub const DEFAULT_DIMENSION_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HalfSpace {
    pub normal: Vec<Rat>,
    pub offset: Rat,
}

/// `{x : a_i . x <= b_i}` with every `b_i >= 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyhedralSet {
    dim: usize,
    rows: Vec<HalfSpace>,
}

fn dot(a: &[Rat], b: &[Rat]) -> Rat {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl PolyhedralSet {
    pub fn new(dim: usize, rows: Vec<HalfSpace>) -> Result<Self, KernelError> {
        for r in &rows {
            if r.normal.len() != dim {
                return Err(KernelError::Dimension {
                    expected: dim,
                    found: r.normal.len(),
                });
            }
            if r.offset.is_negative() {
                return Err(KernelError::OriginInfeasible);
            }
        }
        Ok(PolyhedralSet { dim, rows })
    }

    pub fn whole(dim: usize) -> Self {
        PolyhedralSet { dim, rows: vec![] }
    }

    /// `{x : x >= 0}`.
    pub fn nonneg_orthant(dim: usize) -> Self {
        let rows = (0..dim)
            .map(|i| {
                let mut normal = vec![Rat::zero(); dim];
                normal[i] = -Rat::from_integer(1.into());
                HalfSpace {
                    normal,
                    offset: Rat::zero(),
                }
            })
            .collect();
        PolyhedralSet { dim, rows }
    }

    /// `{x : lo_i <= x_i <= hi_i}` with `lo <= 0 <= hi` (None for unbounded).
    pub fn boxed(lo: &[Option<Rat>], hi: &[Option<Rat>]) -> Result<Self, KernelError> {
        let dim = lo.len();
        if hi.len() != dim {
            return Err(KernelError::Dimension {
                expected: dim,
                found: hi.len(),
            });
        }
        let mut rows = Vec::new();
        for i in 0..dim {
            let unit = |sign: i64| {
                let mut n = vec![Rat::zero(); dim];
                n[i] = Rat::from_integer(sign.into());
                n
            };
            if let Some(h) = &hi[i] {
                rows.push(HalfSpace {
                    normal: unit(1),
                    offset: h.clone(),
                });
            }
            if let Some(l) = &lo[i] {
                rows.push(HalfSpace {
                    normal: unit(-1),
                    offset: -l,
                });
            }
        }
        PolyhedralSet::new(dim, rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[HalfSpace] {
        &self.rows
    }

    pub fn contains(&self, x: &[Rat]) -> bool {
        x.len() == self.dim && self.rows.iter().all(|r| dot(&r.normal, x) <= r.offset)
    }

    /// True when every offset is zero, so the set is a cone.
    pub fn is_conical(&self) -> bool {
        self.rows.iter().all(|r| r.offset.is_zero())
    }

    /// `alpha D`.
    pub fn scaled(&self, alpha: &Rat) -> Result<Self, KernelError> {
        if !alpha.is_positive() {
            return Err(KernelError::NonPositiveScale(alpha.clone()));
        }
        Ok(PolyhedralSet {
            dim: self.dim,
            rows: self
                .rows
                .iter()
                .map(|r| HalfSpace {
                    normal: r.normal.clone(),
                    offset: &r.offset * alpha,
                })
                .collect(),
        })
    }

    /// Support function `sup {v . x : x in D}`.
    pub fn support(&self, v: &[Rat]) -> Result<ExtReal, KernelError> {
        self.support_with(v, &SolverOptions::default())
    }

    pub fn support_with(&self, v: &[Rat], opts: &SolverOptions) -> Result<ExtReal, KernelError> {
        if v.len() != self.dim {
            return Err(KernelError::Dimension {
                expected: self.dim,
                found: v.len(),
            });
        }
        if v.iter().all(Zero::is_zero) {
            return Ok(ExtReal::zero());
        }
        let mut lp = LinearProgram::new(Sense::Maximize);
        let xs: Vec<usize> = (0..self.dim).map(|_| lp.add_free()).collect();
        for (x, c) in xs.iter().zip(v) {
            lp.set_objective(*x, c.clone());
        }
        for r in &self.rows {
            lp.add_row(
                xs.iter().copied().zip(r.normal.iter().cloned()).collect(),
                Relation::Le,
                r.offset.clone(),
            );
        }
        let sol = lp.solve_with(opts)?;
        Ok(match sol.status {
            Status::Optimal => ExtReal::Finite(sol.objective),
            Status::Unbounded => ExtReal::PosInf,
            Status::Infeasible => unreachable!("the origin is feasible"),
        })
    }

    fn active_normals(&self) -> Vec<Vec<Rat>> {
        self.rows
            .iter()
            .filter(|r| r.offset.is_zero())
            .map(|r| r.normal.clone())
            .collect()
    }

    fn all_normals(&self) -> Vec<Vec<Rat>> {
        self.rows.iter().map(|r| r.normal.clone()).collect()
    }

    /// `N_D(0)`, generated by the normals of rows active at the origin.
    pub fn normal_cone_origin(&self) -> PolyhedralCone {
        PolyhedralCone::Generators {
            dim: self.dim,
            rays: self.active_normals(),
        }
    }

    /// `D'`: the rows active at the origin with zero offsets.
    pub fn tangent_cone_origin(&self) -> PolyhedralCone {
        PolyhedralCone::Inequalities {
            dim: self.dim,
            rows: self.active_normals(),
        }
    }

    /// `D∞ = ∩ alpha D`: all rows with zero offsets.
    pub fn horizon_cone(&self) -> PolyhedralCone {
        PolyhedralCone::Inequalities {
            dim: self.dim,
            rows: self.all_normals(),
        }
    }

    /// Closed barrier cone, the polar of the horizon cone.
    pub fn barrier_cone_closure(&self) -> PolyhedralCone {
        PolyhedralCone::Generators {
            dim: self.dim,
            rays: self.all_normals(),
        }
    }

    /// Set with the same rows as a cone, e.g. for a derived model.
    pub fn from_cone(cone: &PolyhedralCone) -> Result<Self, KernelError> {
        let rows = match cone.to_inequalities()? {
            PolyhedralCone::Inequalities { rows, .. } => rows,
            PolyhedralCone::Generators { .. } => unreachable!(),
        };
        Ok(PolyhedralSet {
            dim: cone.dim(),
            rows: rows
                .into_iter()
                .map(|normal| HalfSpace {
                    normal,
                    offset: Rat::zero(),
                })
                .collect(),
        })
    }
}

/// Polyhedral cone in inequality or generator form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolyhedralCone {
    /// `{x : a_i . x <= 0}`.
    Inequalities { dim: usize, rows: Vec<Vec<Rat>> },
    /// `{sum lambda_i r_i : lambda >= 0}`.
    Generators { dim: usize, rays: Vec<Vec<Rat>> },
}

impl PolyhedralCone {
    pub fn dim(&self) -> usize {
        match self {
            PolyhedralCone::Inequalities { dim, .. } | PolyhedralCone::Generators { dim, .. } => *dim,
        }
    }

    pub fn contains(&self, x: &[Rat]) -> Result<bool, KernelError> {
        if x.len() != self.dim() {
            return Err(KernelError::Dimension {
                expected: self.dim(),
                found: x.len(),
            });
        }
        match self {
            PolyhedralCone::Inequalities { rows, .. } => {
                Ok(rows.iter().all(|a| !dot(a, x).is_positive()))
            }
            PolyhedralCone::Generators { rays, .. } => {
                if x.iter().all(Zero::is_zero) {
                    return Ok(true);
                }
                let mut lp = LinearProgram::new(Sense::Minimize);
                let lambda: Vec<usize> = rays.iter().map(|_| lp.add_nonneg()).collect();
                for (i, xi) in x.iter().enumerate() {
                    let terms = lambda
                        .iter()
                        .zip(rays)
                        .filter(|(_, r)| !r[i].is_zero())
                        .map(|(l, r)| (*l, r[i].clone()))
                        .collect();
                    lp.add_row(terms, Relation::Eq, xi.clone());
                }
                Ok(lp.solve()?.status == Status::Optimal)
            }
        }
    }

    /// Polar cone `{v : v . x <= 0 for all x in K}`.
    pub fn polar(&self) -> PolyhedralCone {
        match self {
            PolyhedralCone::Inequalities { dim, rows } => PolyhedralCone::Generators {
                dim: *dim,
                rays: rows.clone(),
            },
            PolyhedralCone::Generators { dim, rays } => PolyhedralCone::Inequalities {
                dim: *dim,
                rows: rays.clone(),
            },
        }
    }

    pub fn to_generators(&self) -> Result<PolyhedralCone, KernelError> {
        self.to_generators_capped(DEFAULT_DIMENSION_CAP)
    }

    pub fn to_generators_capped(&self, cap: usize) -> Result<PolyhedralCone, KernelError> {
        match self {
            PolyhedralCone::Generators { .. } => Ok(self.clone()),
            PolyhedralCone::Inequalities { dim, rows } => {
                if *dim > cap {
                    return Err(KernelError::DimensionCap { dim: *dim, cap });
                }
                let g = dd::cone_generators(*dim, rows);
                let mut rays = g.rays;
                for l in g.lineality {
                    rays.push(l.iter().map(|x| -x).collect());
                    rays.push(l);
                }
                Ok(PolyhedralCone::Generators { dim: *dim, rays })
            }
        }
    }

    pub fn to_inequalities(&self) -> Result<PolyhedralCone, KernelError> {
        self.to_inequalities_capped(DEFAULT_DIMENSION_CAP)
    }

    pub fn to_inequalities_capped(&self, cap: usize) -> Result<PolyhedralCone, KernelError> {
        match self {
            PolyhedralCone::Inequalities { .. } => Ok(self.clone()),
            PolyhedralCone::Generators { .. } => {
                Ok(self.polar().to_generators_capped(cap)?.polar())
            }
        }
    }

    /// Switches to the other representation.
    pub fn convert(&self) -> Result<PolyhedralCone, KernelError> {
        match self {
            PolyhedralCone::Inequalities { .. } => self.to_generators(),
            PolyhedralCone::Generators { .. } => self.to_inequalities(),
        }
    }

    /// Generators of the cone (converting if needed).
    pub fn generators(&self) -> Result<Vec<Vec<Rat>>, KernelError> {
        match self.to_generators()? {
            PolyhedralCone::Generators { rays, .. } => Ok(rays),
            PolyhedralCone::Inequalities { .. } => unreachable!(),
        }
    }

    /// Inequality rows of the cone (converting if needed).
    pub fn inequalities(&self) -> Result<Vec<Vec<Rat>>, KernelError> {
        match self.to_inequalities()? {
            PolyhedralCone::Inequalities { rows, .. } => Ok(rows),
            PolyhedralCone::Generators { .. } => unreachable!(),
        }
    }
}
