//! Double description: generators of `{x : a_i . x <= 0}`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::num::Rat;

pub(crate) struct Generators {
    pub rays: Vec<Vec<Rat>>,
    pub lineality: Vec<Vec<Rat>>,
}

fn dot(a: &[Rat], b: &[Rat]) -> Rat {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: &Rat, x: &[Rat], y: &[Rat]) -> Vec<Rat> {
    x.iter().zip(y).map(|(xi, yi)| alpha * xi + yi).collect()
}

/// Scales a nonzero vector to the primitive integer vector in its direction.
pub(crate) fn primitive(v: &[Rat]) -> Vec<Rat> {
    let lcm = v
        .iter()
        .fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
    let ints: Vec<BigInt> = v.iter().map(|r| r.numer() * (&lcm / r.denom())).collect();
    let gcd = ints.iter().fold(BigInt::zero(), |acc, n| acc.gcd(n));
    if gcd.is_zero() {
        return v.to_vec();
    }
    ints.into_iter()
        .map(|n| Rat::from_integer(n / &gcd))
        .collect()
}

/// Extreme rays and a lineality basis of the cone `{x : A x <= 0}` in `R^dim`.
pub(crate) fn cone_generators(dim: usize, rows: &[Vec<Rat>]) -> Generators {
    let mut lineality: Vec<Vec<Rat>> = (0..dim)
        .map(|i| {
            let mut e = vec![Rat::zero(); dim];
            e[i] = Rat::one();
            e
        })
        .collect();
    // Each ray carries the set of processed rows it makes tight.
    let mut rays: Vec<(Vec<Rat>, Vec<bool>)> = Vec::new();

    for (k, a) in rows.iter().enumerate() {
        if a.iter().all(Zero::is_zero) {
            for (_, z) in rays.iter_mut() {
                z.push(true);
            }
            continue;
        }
        if let Some(pos) = lineality.iter().position(|l| !dot(a, l).is_zero()) {
            let mut l = lineality.swap_remove(pos);
            let mut al = dot(a, &l);
            if al.is_positive() {
                l = l.iter().map(|x| -x).collect();
                al = -al;
            }
            for other in lineality.iter_mut() {
                let c = -(dot(a, other) / &al);
                if !c.is_zero() {
                    *other = axpy(&c, &l, other);
                }
            }
            for (r, z) in rays.iter_mut() {
                let c = -(dot(a, r) / &al);
                if !c.is_zero() {
                    *r = primitive(&axpy(&c, &l, r));
                }
                z.push(true);
            }
            let mut z = vec![true; k];
            z.push(false);
            rays.push((primitive(&l), z));
            continue;
        }

        let values: Vec<Rat> = rays.iter().map(|(r, _)| dot(a, r)).collect();
        let mut next: Vec<(Vec<Rat>, Vec<bool>)> = Vec::new();
        for ((r, z), v) in rays.iter().zip(&values) {
            if !v.is_positive() {
                let mut z = z.clone();
                z.push(v.is_zero());
                next.push((r.clone(), z));
            }
        }
        for (i, vi) in values.iter().enumerate() {
            if !vi.is_positive() {
                continue;
            }
            for (j, vj) in values.iter().enumerate() {
                if !vj.is_negative() || !adjacent(&rays, i, j) {
                    continue;
                }
                // vi * r_j - vj * r_i lies on the hyperplane a . x = 0.
                let combo: Vec<Rat> = rays[j]
                    .0
                    .iter()
                    .zip(&rays[i].0)
                    .map(|(rj, ri)| vi * rj - vj * ri)
                    .collect();
                let mut z: Vec<bool> = rays[i].1.iter().zip(&rays[j].1).map(|(p, q)| *p && *q).collect();
                z.push(true);
                next.push((primitive(&combo), z));
            }
        }
        rays = next;
    }

    let mut out: Vec<Vec<Rat>> = rays.into_iter().map(|(r, _)| r).collect();
    out.sort();
    out.dedup();
    Generators {
        rays: out,
        lineality: lineality.iter().map(|l| primitive(l)).collect(),
    }
}

/// Combinatorial adjacency: no third ray is tight on every row tight for both.
fn adjacent(rays: &[(Vec<Rat>, Vec<bool>)], i: usize, j: usize) -> bool {
    let common: Vec<usize> = rays[i]
        .1
        .iter()
        .zip(&rays[j].1)
        .enumerate()
        .filter(|(_, (p, q))| **p && **q)
        .map(|(k, _)| k)
        .collect();
    !rays.iter().enumerate().any(|(k, (_, z))| {
        k != i && k != j && common.iter().all(|&c| z[c])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::int;

    fn v(xs: &[i64]) -> Vec<Rat> {
        xs.iter().map(|x| int(*x)).collect()
    }

    #[test]
    fn orthant_in_three_dimensions() {
        let rows = vec![v(&[-1, 0, 0]), v(&[0, -1, 0]), v(&[0, 0, -1])];
        let g = cone_generators(3, &rows);
        assert!(g.lineality.is_empty());
        assert_eq!(g.rays, vec![v(&[0, 0, 1]), v(&[0, 1, 0]), v(&[1, 0, 0])]);
    }

    #[test]
    fn square_pyramid_has_four_rays() {
        // |x| <= z, |y| <= z
        let rows = vec![v(&[1, 0, -1]), v(&[-1, 0, -1]), v(&[0, 1, -1]), v(&[0, -1, -1])];
        let g = cone_generators(3, &rows);
        assert!(g.lineality.is_empty());
        assert_eq!(g.rays.len(), 4);
        for r in &g.rays {
            assert_eq!(r[2], int(1));
            assert_eq!(r[0].abs(), int(1));
            assert_eq!(r[1].abs(), int(1));
        }
    }

    #[test]
    fn halfplane_keeps_a_line() {
        let g = cone_generators(2, &[v(&[1, 0])]);
        assert_eq!(g.rays, vec![v(&[-1, 0])]);
        assert_eq!(g.lineality, vec![v(&[0, 1])]);
    }

    #[test]
    fn primitive_scaling() {
        let r = vec![Rat::new(2.into(), 3.into()), Rat::new((-4).into(), 9.into())];
        assert_eq!(primitive(&r), v(&[3, -2]));
    }
}
