//! Scene descriptions: the polyhedral data of a tropical manifold together
//! with its focus-focus singular points, boundary slabs and asymptotic data.
//!
//! A 2-dimensional scene consists of convex bounded cells, unbounded rays,
//! slabs (walls present from the start, carrying a function and a kink) and
//! singular points. Each singular point stores the invariant direction of
//! its monodromy, its order, and a cut direction: the affine structure is
//! realized on the complement of a wedge spread between `cut_dir` and its
//! monodromy image, with the two wedge boundary rays glued by the monodromy.
//!
//! 3-dimensional scenes only carry the polytope `sigma_0` (first bounded
//! cell) and decorated facets; they feed the boundary fast path exclusively.

use crate::exact_algebra::{binomial, Rat, Series, Term, WallFunction};
use crate::geom::{
    ccw_cmp, cross, dot, is_primitive, primitive, qcross, rot90, v2_eq_zero, vq, Containment,
    QP, V2,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("input polygon is not reflexive")]
    NotReflexive,
    #[error("facet is degenerate")]
    DegenerateFacet,
    #[error("invalid scene: {0}")]
    Invalid(String),
}

/// Support of a wall or slab: a bounded segment or a ray.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    Seg([QP; 2]),
    Ray { base: QP, dir: V2 },
}

impl Support {
    pub fn base(&self) -> &QP {
        match self {
            Support::Seg([a, _]) => a,
            Support::Ray { base, .. } => base,
        }
    }
}

/// One homogeneous part of a slab function, serialized as
/// `{"j": j, "coeffs": [["p/q", l], ...]}`.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Part {
    pub j: u32,
    pub coeffs: Vec<(Rat, i64)>,
}

/// A wall or slab of the scene: a supported piece of line with an attached
/// function `1 + sum_j g_j(t) z^(j dir)` and a kink of the affine structure.
/// `normal` is the primitive normal pointing towards the positive side;
/// `positive_side` repeats it for explicitness in the serialized form.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Wall {
    pub support: Support,
    pub dir: V2,
    pub parts: Vec<Part>,
    pub kink: i64,
    pub normal: V2,
    pub positive_side: V2,
}

impl Wall {
    pub fn func(&self) -> WallFunction {
        WallFunction {
            direction: self.dir.to_vec(),
            parts: self
                .parts
                .iter()
                .map(|p| (p.j, p.coeffs.iter().map(|(c, l)| (*l, c.clone())).collect()))
                .collect(),
        }
    }

    /// `(1 + z^dir)^len` with kink 1: the standard boundary slab.
    pub fn binomial_slab(support: Support, dir: V2, len: i64, normal: V2) -> Wall {
        let parts = (1..=len)
            .map(|j| Part {
                j: j as u32,
                coeffs: vec![(binomial(len, j as u32), 0)],
            })
            .collect();
        Wall {
            support,
            dir,
            parts,
            kink: 1,
            normal,
            positive_side: normal,
        }
    }
}

/// Unbounded ray of the polyhedral complex (not carrying a function; its
/// kink is derived from balancing at its base vertex).
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SceneRay {
    pub base: QP,
    pub dir: V2,
}

/// Focus-focus point with monodromy `m -> m + order*<n,m>*inv_dir` where
/// `n = rot90(inv_dir)`. The wedge between `cut_dir` and its image under the
/// monodromy is excised from the affine manifold.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SingularPoint {
    pub pos: QP,
    pub inv_dir: V2,
    pub order: i64,
    pub cut_dir: V2,
}

impl SingularPoint {
    /// Monodromy action on exponents after `loops` counterclockwise loops.
    pub fn apply_monodromy(&self, m: V2, loops: i64) -> V2 {
        let n = rot90(self.inv_dir);
        let c = loops * self.order * dot(n, m);
        [m[0] + c * self.inv_dir[0], m[1] + c * self.inv_dir[1]]
    }
}

/// Decoration of one boundary facet for the boundary fast path: explicit
/// coefficients and printed exponents per boundary lattice point.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct DecoratedFacet {
    pub vertices: Vec<Vec<i64>>,
    /// Triples (lattice point, coefficient, printed exponent).
    pub points: Vec<(Vec<i64>, Rat, Vec<i64>)>,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Scene {
    pub dim: usize,
    /// Convex cells, vertices in counterclockwise order (dim 2). The first
    /// cell is the central cell `sigma_0` when the scene has one.
    pub bounded_cells: Vec<Vec<Vec<Rat>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rays: Vec<SceneRay>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub slabs: Vec<Wall>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_walls: Vec<Wall>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub singular_points: Vec<SingularPoint>,
    pub xi: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decorated_facets: Option<Vec<DecoratedFacet>>,
    /// Free-form provenance notes (calibrated placements and the like).
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
}

impl Scene {
    /// Cell vertices as planar points (dim 2 only).
    pub fn cell2(&self, i: usize) -> Vec<QP> {
        assert_eq!(self.dim, 2);
        self.bounded_cells[i]
            .iter()
            .map(|p| {
                assert_eq!(p.len(), 2);
                QP([p[0].clone(), p[1].clone()])
            })
            .collect()
    }

    pub fn cells2(&self) -> Vec<Vec<QP>> {
        (0..self.bounded_cells.len()).map(|i| self.cell2(i)).collect()
    }

    pub fn from_cells2(cells: Vec<Vec<QP>>) -> Vec<Vec<Vec<Rat>>> {
        cells
            .into_iter()
            .map(|c| c.into_iter().map(|p| p.0.to_vec()).collect())
            .collect()
    }

    /// Whether the scene's ends are cylindrical, together with the recorded
    /// asymptotic direction. Cylindricity is a property of the construction
    /// (every end chart is bounded by parallel rays once the monodromy
    /// wedges are excised); scenes record the direction explicitly.
    pub fn is_asymptotically_cylindrical(&self) -> (bool, Vec<i64>) {
        (!self.xi.iter().all(|&c| c == 0), self.xi.clone())
    }

    pub fn contains_in_bounded(&self, p: &QP) -> bool {
        self.cells2()
            .iter()
            .any(|c| convex_contains_cell(c, p) != Containment::Outside)
    }

    /// The order-zero potential at `p`: zero on bounded cells, and on an
    /// unbounded cell the sum of `z^(-d)` over the parallel classes of the
    /// cell's unbounded edge directions `d`.
    pub fn order_zero_potential(&self, p: &QP) -> Series {
        assert_eq!(self.dim, 2);
        let mut out = Series::zero(0);
        if self.contains_in_bounded(p) {
            return out;
        }
        let Some((d1, d2)) = self.unbounded_sector(p) else {
            return out;
        };
        let mut dirs: Vec<V2> = vec![primitive(d1)];
        if primitive(d2) != primitive(d1) {
            dirs.push(primitive(d2));
        }
        for d in dirs {
            out.add_term(&Term::new(Rat::one(), vec![-d[0], -d[1]], 0));
        }
        out
    }

    /// The pair of ray directions bounding the unbounded cell containing `p`.
    fn unbounded_sector(&self, p: &QP) -> Option<(V2, V2)> {
        let mut rays = self.rays.clone();
        if rays.is_empty() {
            return None;
        }
        rays.sort_by(|a, b| ccw_cmp(a.dir, b.dir));
        let n = rays.len();
        for i in 0..n {
            let a = &rays[i];
            let b = &rays[(i + 1) % n];
            let ca = qcross(&vq(a.dir), &p.sub(&a.base));
            let cb = qcross(&vq(b.dir), &p.sub(&b.base));
            if ca.signum() >= 0 && cb.signum() <= 0 {
                return Some((a.dir, b.dir));
            }
        }
        None
    }

    /// True if every unbounded cell is a strictly convex sector: sorted
    /// counterclockwise, consecutive ray directions positively span.
    pub fn properness_check(&self) -> bool {
        assert_eq!(self.dim, 2);
        if self.rays.len() < 3 {
            return false;
        }
        let mut dirs: Vec<V2> = self.rays.iter().map(|r| primitive(r.dir)).collect();
        dirs.sort_by(|a, b| ccw_cmp(*a, *b));
        dirs.dedup();
        let n = dirs.len();
        (0..n).all(|i| cross(dirs[i], dirs[(i + 1) % n]) > 0)
    }

    /// Lattice multiplicity of a boundary facet: the determinant of its
    /// first three vertices (dim 3) or of its two endpoints (dim 2).
    pub fn mu_f(facet: &[Vec<i64>]) -> Result<i64, ModelError> {
        let d = match facet.first().map(|v| v.len()) {
            Some(2) if facet.len() >= 2 => {
                cross([facet[0][0], facet[0][1]], [facet[1][0], facet[1][1]])
            }
            Some(3) if facet.len() >= 3 => {
                let (a, b, c) = (&facet[0], &facet[1], &facet[2]);
                a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
                    + a[2] * (b[0] * c[1] - b[1] * c[0])
            }
            _ => return Err(ModelError::DegenerateFacet),
        };
        if d == 0 {
            return Err(ModelError::DegenerateFacet);
        }
        Ok(d.abs())
    }
}

fn convex_contains_cell(cell: &[QP], p: &QP) -> Containment {
    crate::geom::convex_contains(cell, p)
}

/// Polar dual of a lattice polygon with the origin in its interior:
/// one vertex per edge, solving `<v, w_i> = <v, w_{i+1}> = -1`. Errors with
/// [`ModelError::NotReflexive`] when the dual is not a lattice polygon.
pub fn polar_dual(xi_vertices: &[V2]) -> Result<Vec<V2>, ModelError> {
    let n = xi_vertices.len();
    if n < 3 {
        return Err(ModelError::NotReflexive);
    }
    for i in 0..n {
        if cross(xi_vertices[i], xi_vertices[(i + 1) % n]) <= 0 {
            // Origin not strictly inside or vertices not counterclockwise.
            return Err(ModelError::NotReflexive);
        }
    }
    let mut dual = Vec::with_capacity(n);
    for i in 0..n {
        let a = xi_vertices[i];
        let b = xi_vertices[(i + 1) % n];
        let d = cross(a, b);
        let vx = a[1] - b[1];
        let vy = b[0] - a[0];
        if vx % d != 0 || vy % d != 0 {
            return Err(ModelError::NotReflexive);
        }
        dual.push([vx / d, vy / d]);
    }
    Ok(dual)
}

/// Builds the standard scene of a reflexive polygon `Xi` (vertices in
/// counterclockwise order): the central cell is the polar dual `sigma_0`,
/// with one ray per vertex in the direction of the vertex, a kink-1 slab
/// `(1 + z^(edge dir))^len` on each boundary edge, and a single collapsed
/// focus-focus point of order `len` at each edge midpoint.
pub fn from_reflexive_polygon(xi_vertices: &[V2]) -> Result<Scene, ModelError> {
    let sigma0 = polar_dual(xi_vertices)?;
    // Reflexivity proper: the dual of the dual must return Xi.
    let back = polar_dual(&sigma0)?;
    let matches = (0..back.len()).any(|r| {
        (0..back.len()).all(|i| back[(i + r) % back.len()] == xi_vertices[i % xi_vertices.len()])
    }) && back.len() == xi_vertices.len();
    if !matches {
        return Err(ModelError::NotReflexive);
    }

    let n = sigma0.len();
    let cell: Vec<QP> = sigma0.iter().map(|v| QP::ints(v[0], v[1])).collect();
    let mut rays = Vec::new();
    let mut slabs = Vec::new();
    let mut sps = Vec::new();
    for i in 0..n {
        let va = sigma0[i];
        let vb = sigma0[(i + 1) % n];
        rays.push(SceneRay {
            base: QP::ints(va[0], va[1]),
            dir: primitive(va),
        });
        let edge = [vb[0] - va[0], vb[1] - va[1]];
        let len = crate::geom::gcd(edge[0], edge[1]);
        let dir = primitive(edge);
        // Outward normal of a counterclockwise edge.
        let normal = [dir[1], -dir[0]];
        let a = QP::ints(va[0], va[1]);
        let b = QP::ints(vb[0], vb[1]);
        let mid = a.midpoint(&b);
        slabs.push(Wall::binomial_slab(
            Support::Seg([a, b]),
            dir,
            len,
            normal,
        ));
        sps.push(SingularPoint {
            pos: mid,
            inv_dir: dir,
            order: len,
            cut_dir: primitive(vb),
        });
    }
    let scene = Scene {
        dim: 2,
        bounded_cells: Scene::from_cells2(vec![cell]),
        rays,
        slabs,
        initial_walls: Vec::new(),
        singular_points: sps,
        xi: primitive(sigma0[0]).to_vec(),
        decorated_facets: None,
        notes: String::new(),
    };
    validate(&scene)?;
    Ok(scene)
}

/// Structural sanity checks shared by all 2-dimensional scenes.
pub fn validate(scene: &Scene) -> Result<(), ModelError> {
    if scene.dim == 3 {
        return Ok(());
    }
    if scene.dim != 2 {
        return Err(ModelError::Invalid(format!("dim {} unsupported", scene.dim)));
    }
    for w in scene.slabs.iter().chain(&scene.initial_walls) {
        if v2_eq_zero(w.dir) || !is_primitive(w.dir) {
            return Err(ModelError::Invalid("wall direction not primitive".into()));
        }
        if dot(w.normal, w.dir) != 0 {
            return Err(ModelError::Invalid("wall normal not orthogonal".into()));
        }
        if dot(w.normal, w.positive_side) <= 0 {
            return Err(ModelError::Invalid("positive side disagrees with normal".into()));
        }
        if w.parts.iter().any(|p| p.j == 0) {
            return Err(ModelError::Invalid("slab part with j = 0".into()));
        }
    }
    for s in &scene.singular_points {
        if v2_eq_zero(s.inv_dir) || v2_eq_zero(s.cut_dir) || s.order <= 0 {
            return Err(ModelError::Invalid("bad singular point".into()));
        }
    }
    for cell in scene.cells2() {
        if cell.len() < 3 {
            return Err(ModelError::Invalid("cell with < 3 vertices".into()));
        }
        for i in 0..cell.len() {
            let (a, b, c) = (
                &cell[i],
                &cell[(i + 1) % cell.len()],
                &cell[(i + 2) % cell.len()],
            );
            if crate::geom::orient(a, b, c) <= 0 {
                return Err(ModelError::Invalid(
                    "cell not convex counterclockwise".into(),
                ));
            }
        }
    }
    Ok(())
}

/// Total slab function length along the boundary, per edge direction class;
/// used by consistency checks.
pub fn slab_length_profile(scene: &Scene) -> BTreeMap<V2, i64> {
    let mut out = BTreeMap::new();
    for s in &scene.slabs {
        let l: i64 = s
            .parts
            .iter()
            .map(|p| p.j as i64)
            .max()
            .unwrap_or(0);
        *out.entry(primitive(s.dir)).or_insert(0) += l;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hexagon_xi() -> Vec<V2> {
        vec![[1, 0], [0, 1], [-1, 1], [-1, 0], [0, -1], [1, -1]]
    }

    #[test]
    fn dual_of_hexagon() {
        let sigma0 = polar_dual(&hexagon_xi()).unwrap();
        assert_eq!(
            sigma0,
            vec![[-1, -1], [0, -1], [1, 0], [1, 1], [0, 1], [-1, 0]]
        );
    }

    #[test]
    fn p2_polygon_dual_matches() {
        let xi = vec![[2, -1], [-1, 2], [-1, -1]];
        let sigma0 = polar_dual(&xi).unwrap();
        assert_eq!(sigma0, vec![[-1, -1], [1, 0], [0, 1]]);
    }

    #[test]
    fn non_reflexive_rejected() {
        // Triangle with dual vertices off the lattice.
        let xi = vec![[1, 0], [0, 1], [-1, -3]];
        assert_eq!(from_reflexive_polygon(&xi).err(), Some(ModelError::NotReflexive));
        // Origin on the boundary.
        let xi = vec![[1, 0], [0, 1], [-1, 0]];
        assert_eq!(from_reflexive_polygon(&xi).err(), Some(ModelError::NotReflexive));
    }

    #[test]
    fn reflexive_scene_shape() {
        let s = from_reflexive_polygon(&hexagon_xi()).unwrap();
        assert_eq!(s.rays.len(), 6);
        assert_eq!(s.slabs.len(), 6);
        assert_eq!(s.singular_points.len(), 6);
        assert!(s.properness_check());
        // Boundary lattice points of sigma_0 = sum of slab lengths.
        let total: i64 = s
            .slabs
            .iter()
            .map(|w| w.parts.iter().map(|p| p.j as i64).max().unwrap())
            .sum();
        assert_eq!(total, 6);
        // All slabs have kink 1 and binomial coefficients.
        for w in &s.slabs {
            assert_eq!(w.kink, 1);
            assert_eq!(w.parts.len(), 1);
            assert_eq!(w.parts[0].coeffs, vec![(Rat::one(), 0)]);
        }
    }

    #[test]
    fn monodromy_action() {
        let sp = SingularPoint {
            pos: QP::ints(0, 0),
            inv_dir: [1, 0],
            order: 2,
            cut_dir: [0, 1],
        };
        // n = rot90(1,0) = (0,1); m = (a,b) -> (a + 2b, b).
        assert_eq!(sp.apply_monodromy([3, 1], 1), [5, 1]);
        assert_eq!(sp.apply_monodromy([3, 1], -1), [1, 1]);
        assert_eq!(sp.apply_monodromy([4, 0], 5), [4, 0]);
    }

    #[test]
    fn order_zero_potential_example() {
        // Naive fan-like scene: cell spanned by rays (1,0) and (0,1) gives
        // z^-(1,0) + z^-(0,1) on that cell, zero on the bounded cell.
        let tri = vec![QP::ints(1, 0), QP::ints(0, 1), QP::ints(0, 0)];
        let scene = Scene {
            dim: 2,
            bounded_cells: Scene::from_cells2(vec![vec![
                QP::ints(0, 0),
                QP::ints(1, 0),
                QP::ints(0, 1),
            ]]),
            rays: vec![
                SceneRay { base: tri[0].clone(), dir: [1, 0] },
                SceneRay { base: tri[1].clone(), dir: [0, 1] },
                SceneRay { base: tri[2].clone(), dir: [-1, -1] },
            ],
            slabs: vec![],
            initial_walls: vec![],
            singular_points: vec![],
            xi: vec![0, 1],
            decorated_facets: None,
            notes: String::new(),
        };
        let w0 = scene.order_zero_potential(&QP::ints(3, 2));
        assert_eq!(w0.coeff(&[-1, 0], 0), Rat::one());
        assert_eq!(w0.coeff(&[0, -1], 0), Rat::one());
        assert_eq!(w0.len(), 2);
        let inside = scene.order_zero_potential(&QP([Rat::new(1, 4), Rat::new(1, 4)]));
        assert!(inside.is_zero());
        assert!(scene.properness_check());
    }

    #[test]
    fn scene_json_round_trip() {
        let s = from_reflexive_polygon(&hexagon_xi()).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        let back: Scene = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
        let j2 = serde_json::to_string(&back).unwrap();
        assert_eq!(j, j2);
    }

    #[test]
    fn mu_f_values() {
        assert_eq!(Scene::mu_f(&[vec![1, 0], vec![0, 1]]), Ok(1));
        assert_eq!(
            Scene::mu_f(&[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]),
            Ok(1)
        );
        assert_eq!(
            Scene::mu_f(&[vec![1, 1, 1], vec![1, -1, -1], vec![-1, 1, -1]]),
            Ok(4)
        );
        assert!(Scene::mu_f(&[vec![1, 0], vec![2, 0]]).is_err());
    }
}
