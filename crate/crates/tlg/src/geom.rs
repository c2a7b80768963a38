//! Exact planar geometry over the rationals: lattice vectors, rational
//! points, orientation predicates and line intersections. Everything here is
//! decision-exact; no tolerances.

use crate::exact_algebra::Rat;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Integral lattice vector.
pub type V2 = [i64; 2];

pub fn dot(a: V2, b: V2) -> i64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn cross(a: V2, b: V2) -> i64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Counterclockwise quarter turn.
pub fn rot90(v: V2) -> V2 {
    [-v[1], v[0]]
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Primitive generator of the ray through `v`. Panics on the zero vector.
pub fn primitive(v: V2) -> V2 {
    let g = gcd(v[0], v[1]);
    assert!(g != 0, "primitive of zero vector");
    [v[0] / g, v[1] / g]
}

pub fn is_primitive(v: V2) -> bool {
    gcd(v[0], v[1]) == 1
}

pub fn v2_eq_zero(v: V2) -> bool {
    v == [0, 0]
}

pub fn neg(v: V2) -> V2 {
    [-v[0], -v[1]]
}

pub fn add(a: V2, b: V2) -> V2 {
    [a[0] + b[0], a[1] + b[1]]
}

pub fn sub(a: V2, b: V2) -> V2 {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn scale(v: V2, s: i64) -> V2 {
    [v[0] * s, v[1] * s]
}

/// Counterclockwise angular order starting at direction `(1,0)` (inclusive)
/// and sweeping a full turn. Vectors need not be primitive; parallel vectors
/// of the same orientation compare equal.
pub fn ccw_cmp(a: V2, b: V2) -> Ordering {
    assert!(a != [0, 0] && b != [0, 0]);
    let half = |v: V2| -> u8 {
        if v[1] > 0 || (v[1] == 0 && v[0] > 0) {
            0
        } else {
            1
        }
    };
    half(a).cmp(&half(b)).then_with(|| 0.cmp(&cross(a, b)))
}

/// Rational point in the plane (serialized as a two-element array).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct QP(pub [Rat; 2]);

impl QP {
    pub fn ints(x: i64, y: i64) -> QP {
        QP([Rat::from(x), Rat::from(y)])
    }

    pub fn x(&self) -> &Rat {
        &self.0[0]
    }

    pub fn y(&self) -> &Rat {
        &self.0[1]
    }

    /// `self + s * v` for a lattice direction `v`.
    pub fn advance(&self, v: V2, s: &Rat) -> QP {
        QP([
            self.x() + &(s * &Rat::from(v[0])),
            self.y() + &(s * &Rat::from(v[1])),
        ])
    }

    pub fn sub(&self, other: &QP) -> [Rat; 2] {
        [self.x() - other.x(), self.y() - other.y()]
    }

    pub fn midpoint(&self, other: &QP) -> QP {
        let h = Rat::new(1, 2);
        QP([
            &(self.x() + other.x()) * &h,
            &(self.y() + other.y()) * &h,
        ])
    }

    /// True if both coordinates are integers.
    pub fn is_lattice(&self) -> bool {
        self.x().is_integer() && self.y().is_integer()
    }
}

pub fn qcross(a: &[Rat; 2], b: &[Rat; 2]) -> Rat {
    &(&a[0] * &b[1]) - &(&a[1] * &b[0])
}

pub fn qdot(a: &[Rat; 2], b: &[Rat; 2]) -> Rat {
    &(&a[0] * &b[0]) + &(&a[1] * &b[1])
}

/// Pairing of a lattice covector with a rational vector.
pub fn qdot_iv(n: V2, v: &[Rat; 2]) -> Rat {
    &(&Rat::from(n[0]) * &v[0]) + &(&Rat::from(n[1]) * &v[1])
}

pub fn vq(v: V2) -> [Rat; 2] {
    [Rat::from(v[0]), Rat::from(v[1])]
}

/// Orientation of the triple `(a, b, c)`: 1 for counterclockwise, -1 for
/// clockwise, 0 for collinear.
pub fn orient(a: &QP, b: &QP, c: &QP) -> i64 {
    qcross(&b.sub(a), &c.sub(a)).signum()
}

/// Solves `p + s d = q + u e` for rational `(s, u)`; `None` if `d`, `e` are
/// parallel.
pub fn intersect_param(p: &QP, d: V2, q: &QP, e: V2) -> Option<(Rat, Rat)> {
    let det = cross(d, e);
    if det == 0 {
        return None;
    }
    let w = q.sub(p);
    let det = Rat::from(det);
    let s = &qcross(&w, &vq(e)) / &det;
    let u = &qcross(&w, &vq(d)) / &det;
    Some((s, u))
}

/// Parameter `s` with `p + s d = q`, if `q` lies on the line through `p`
/// with direction `d`.
pub fn collinear_param(p: &QP, d: V2, q: &QP) -> Option<Rat> {
    let w = q.sub(p);
    if !qcross(&w, &vq(d)).is_zero() {
        return None;
    }
    Some(if d[0] != 0 {
        &w[0] / &Rat::from(d[0])
    } else {
        &w[1] / &Rat::from(d[1])
    })
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Containment {
    Inside,
    Boundary,
    Outside,
}

/// Locates a point relative to a convex polygon given in counterclockwise
/// vertex order.
pub fn convex_contains(poly: &[QP], p: &QP) -> Containment {
    let mut on_edge = false;
    for i in 0..poly.len() {
        let a = &poly[i];
        let b = &poly[(i + 1) % poly.len()];
        match orient(a, b, p) {
            -1 => return Containment::Outside,
            0 => {
                // Collinear with the edge line; must lie within the edge's
                // bounding range to count as boundary.
                let d = b.sub(a);
                let t = if !d[0].is_zero() {
                    &(p.x() - a.x()) / &d[0]
                } else {
                    &(p.y() - a.y()) / &d[1]
                };
                if !t.is_negative() && (Rat::one() - t.clone()).signum() >= 0 {
                    on_edge = true;
                } else {
                    return Containment::Outside;
                }
            }
            _ => {}
        }
    }
    if on_edge {
        Containment::Boundary
    } else {
        Containment::Inside
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_helpers() {
        assert_eq!(cross([1, 0], [0, 1]), 1);
        assert_eq!(rot90([1, 0]), [0, 1]);
        assert_eq!(primitive([4, -6]), [2, -3]);
        assert!(is_primitive([3, 5]));
        assert!(!is_primitive([2, 4]));
    }

    #[test]
    fn ccw_order_starts_at_east() {
        let mut dirs = vec![[0, -1], [1, 1], [-1, 0], [1, 0], [0, 1], [-1, -1]];
        dirs.sort_by(|a, b| ccw_cmp(*a, *b));
        assert_eq!(
            dirs,
            vec![[1, 0], [1, 1], [0, 1], [-1, 0], [-1, -1], [0, -1]]
        );
    }

    #[test]
    fn intersections() {
        let p = QP::ints(0, 0);
        let q = QP::ints(2, -1);
        let (s, u) = intersect_param(&p, [1, 1], &q, [0, 1]).unwrap();
        assert_eq!(s, Rat::from(2));
        assert_eq!(u, Rat::from(3));
        assert!(intersect_param(&p, [1, 1], &q, [-2, -2]).is_none());
        assert_eq!(
            collinear_param(&p, [1, 2], &QP::ints(3, 6)),
            Some(Rat::from(3))
        );
        assert_eq!(collinear_param(&p, [1, 2], &QP::ints(3, 5)), None);
    }

    #[test]
    fn polygon_containment() {
        let hex: Vec<QP> = [[1, 0], [1, 1], [0, 1], [-1, 0], [-1, -1], [0, -1]]
            .iter()
            .map(|v| QP::ints(v[0], v[1]))
            .collect();
        assert_eq!(convex_contains(&hex, &QP::ints(0, 0)), Containment::Inside);
        assert_eq!(convex_contains(&hex, &QP::ints(1, 1)), Containment::Boundary);
        assert_eq!(
            convex_contains(&hex, &QP([Rat::new(1, 2), Rat::new(1, 2)])),
            Containment::Inside
        );
        assert_eq!(
            convex_contains(&hex, &QP([Rat::from(1), Rat::new(1, 2)])),
            Containment::Boundary
        );
        assert_eq!(convex_contains(&hex, &QP::ints(2, 0)), Containment::Outside);
    }
}
