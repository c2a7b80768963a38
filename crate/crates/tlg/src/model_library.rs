//! The built-in model catalog: every scene the binary and the test suite
//! refer to by name.
//!
//! Two-dimensional models come in three families:
//! * reflexive models (`p2`, `p1xp1`, `dp1`, `dp2`, `dp3`, `sdp01`..`sdp11`):
//!   the standard scene of a reflexive polygon, built by
//!   [`crate::tropical_model::from_reflexive_polygon`];
//! * the hexagonal family (`dp4`, `dp5a`, `dp5b`, `dp6a`, `dp6b`): the unit
//!   hexagon with a ring of quads out to the doubled hexagon, and extra
//!   focus-focus points on radial edges or rays;
//! * Hirzebruch models (`f2`, `f3`): two triangles sharing an interior slab.
//!
//! Three-dimensional models (`p3`, `fano3`) carry a polytope with decorated
//! facets and only feed the boundary fast path.

use crate::exact_algebra::Rat;
use crate::geom::{neg, primitive, rot90, QP, V2};
use crate::tropical_model::{
    from_reflexive_polygon, DecoratedFacet, ModelError, Part, Scene, SceneRay, SingularPoint,
    Support, Wall,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("unknown model '{0}'; available models: {}", CATALOG_NAMES.join(", "))]
    UnknownModel(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Names of every built-in model, in catalog order.
pub const CATALOG_NAMES: [&str; 23] = [
    "p2", "p1xp1", "dp1", "dp2", "dp3", "sdp01", "sdp02", "sdp03", "sdp04", "sdp05", "sdp06",
    "sdp07", "sdp08", "sdp09", "sdp10", "sdp11", "dp4", "dp5a", "dp5b", "dp6a", "dp6b", "f2",
    "f3",
];

// The array above must stay in sync with `describe`.
pub const CATALOG_NAMES_3D: [&str; 2] = ["p3", "fano3"];

/// All model names, 2d first, then 3d.
pub fn catalog() -> Vec<&'static str> {
    CATALOG_NAMES.iter().chain(CATALOG_NAMES_3D.iter()).copied().collect()
}

pub fn describe(name: &str) -> Option<&'static str> {
    Some(match name {
        "p2" => "projective plane",
        "p1xp1" => "product of two projective lines",
        "dp1" => "del Pezzo of degree 8 (one blown-up point)",
        "dp2" => "del Pezzo of degree 7",
        "dp3" => "del Pezzo of degree 6 (hexagon model)",
        "sdp01" | "sdp02" | "sdp03" | "sdp04" | "sdp05" | "sdp06" | "sdp07" | "sdp08"
        | "sdp09" | "sdp10" | "sdp11" => "singular del Pezzo (reflexive polygon model)",
        "dp4" => "del Pezzo of degree 5 (hexagonal family, one extra point)",
        "dp5a" => "del Pezzo of degree 4, first model (two extra points)",
        "dp5b" => "del Pezzo of degree 4, second model (two extra points)",
        "dp6a" => "del Pezzo of degree 3, first model (three extra points)",
        "dp6b" => "del Pezzo of degree 3, second model (three extra points)",
        "f2" => "Hirzebruch surface F2",
        "f3" => "Hirzebruch surface F3",
        "p3" => "projective 3-space (boundary potential only)",
        "fano3" => "Gorenstein toric Fano 3-fold (boundary potential only)",
        _ => return None,
    })
}

/// Vertices (counterclockwise) of the reflexive polygon `Xi` whose polar
/// dual is the central cell of the model's scene.
pub fn reflexive_vertices(name: &str) -> Option<Vec<V2>> {
    Some(match name {
        "p2" => vec![[2, -1], [-1, 2], [-1, -1]],
        "p1xp1" => vec![[-1, -1], [1, -1], [1, 1], [-1, 1]],
        "dp1" => vec![[-2, -1], [0, -1], [1, 0], [1, 2]],
        "dp2" => vec![[-1, -1], [1, -1], [1, 1], [0, 1], [-1, 0]],
        "dp3" => vec![[1, 0], [0, 1], [-1, 1], [-1, 0], [0, -1], [1, -1]],
        "sdp01" => vec![[-1, -1], [1, 0], [0, 1]],
        "sdp02" => vec![[-1, -1], [1, 0], [-1, 1]],
        "sdp03" => vec![[-1, -1], [0, -1], [1, 1], [-1, 0]],
        "sdp04" => vec![[-1, -1], [1, 0], [1, 1], [-1, 0]],
        "sdp05" => vec![[-1, -1], [1, -1], [0, 1], [-1, 0]],
        "sdp06" => vec![[-1, -1], [0, -1], [1, 0], [0, 1], [-1, 0]],
        "sdp07" => vec![[-2, -1], [0, -1], [1, 2]],
        "sdp08" => vec![[-1, -1], [1, -1], [1, 1], [-1, 0]],
        "sdp09" => vec![[-1, -1], [1, -1], [1, 0], [0, 1], [-1, 0]],
        "sdp10" => vec![[-2, -1], [-1, -1], [1, 0], [1, 2]],
        "sdp11" => vec![[-2, -1], [2, -1], [0, 1]],
        _ => return None,
    })
}

/// Builds the named model's scene.
pub fn scene(name: &str) -> Result<Scene, LibraryError> {
    if let Some(xi) = reflexive_vertices(name) {
        let mut s = from_reflexive_polygon(&xi)?;
        s.notes = format!("reflexive model {name}");
        return Ok(s);
    }
    match name {
        "dp4" => Ok(hex_family(
            &[HexSp::Radial(4)],
            "hexagonal family; extra point on the southwest radial edge",
        )),
        "dp5a" => Ok(hex_family(
            &[HexSp::Radial(4), HexSp::Radial(5)],
            "hexagonal family; extra points on the southwest and south radial edges",
        )),
        "dp5b" => Ok(hex_family(
            &[HexSp::Radial(4), HexSp::Radial(1)],
            "hexagonal family; extra points on the southwest and northeast radial edges",
        )),
        "dp6a" => Ok(hex_family(
            &[HexSp::Radial(3), HexSp::Radial(4), HexSp::Radial(5)],
            "hexagonal family; extra points on the west, southwest and south radial edges",
        )),
        "dp6b" => Ok(hex_family(
            &[HexSp::Radial(4), HexSp::RayAt(1), HexSp::RayAt(3)],
            "hexagonal family; extra points on the southwest radial edge and the northeast and west rays",
        )),
        "f2" => Ok(hirzebruch(2)),
        "f3" => Ok(hirzebruch(3)),
        "p3" => Ok(p3_scene()),
        "fano3" => Ok(fano3_scene()),
        other => Err(LibraryError::UnknownModel(other.to_string())),
    }
}

// ---------------------------------------------------------------------------
// Hexagonal family

/// Vertices of the unit hexagon, counterclockwise.
pub const HEX: [V2; 6] = [[1, 0], [1, 1], [0, 1], [-1, 0], [-1, -1], [0, -1]];

/// Placement of an extra focus-focus point in the hexagonal family: on the
/// midpoint of the `i`-th radial edge, or one unit out on the `i`-th ray.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HexSp {
    Radial(usize),
    RayAt(usize),
}

fn qp(v: V2) -> QP {
    QP::ints(v[0], v[1])
}

fn scale(v: V2, c: i64) -> V2 {
    [c * v[0], c * v[1]]
}

/// The hexagonal-family scene: unit hexagon `sigma_0`, ring of six quads out
/// to the doubled hexagon, kink-1 binomial slabs with midpoint focus-focus
/// points on the inner boundary, plain kink-1 slabs on the radial and outer
/// edges, rays from the outer vertices, and the given extra points. Each
/// extra point has invariant direction along its radial line, cut pointing
/// outward, and one inward-propagating germ `1 + z^(back at the point)`.
pub fn hex_family(extras: &[HexSp], notes: &str) -> Scene {
    let x = HEX;
    let mut cells: Vec<Vec<QP>> = vec![x.iter().map(|v| qp(*v)).collect()];
    let mut rays = Vec::new();
    let mut slabs = Vec::new();
    let mut sps = Vec::new();
    let mut initial = Vec::new();
    for i in 0..6 {
        let j = (i + 1) % 6;
        cells.push(vec![qp(x[i]), qp(scale(x[i], 2)), qp(scale(x[j], 2)), qp(x[j])]);
        let d = primitive([x[j][0] - x[i][0], x[j][1] - x[i][1]]);
        let normal = [d[1], -d[0]];
        // Inner boundary: binomial slab with its focus-focus point.
        slabs.push(Wall::binomial_slab(
            Support::Seg([qp(x[i]), qp(x[j])]),
            d,
            1,
            normal,
        ));
        // A generic position along the edge keeps scattering rays launched
        // from the origin away from the focus-focus points.
        sps.push(SingularPoint {
            pos: qp(x[i]).advance(d, &Rat::new(5, 13)),
            inv_dir: d,
            order: 1,
            cut_dir: x[j],
        });
        // Radial edge, plain kinked slab.
        slabs.push(Wall {
            support: Support::Seg([qp(x[i]), qp(scale(x[i], 2))]),
            dir: x[i],
            parts: Vec::new(),
            kink: 1,
            normal: rot90(x[i]),
            positive_side: rot90(x[i]),
        });
        // Outer boundary, plain kinked slab.
        slabs.push(Wall {
            support: Support::Seg([qp(scale(x[i], 2)), qp(scale(x[j], 2))]),
            dir: d,
            parts: Vec::new(),
            kink: 1,
            normal,
            positive_side: normal,
        });
        rays.push(SceneRay {
            base: qp(scale(x[i], 2)),
            dir: x[i],
        });
    }
    for e in extras {
        let (pos, out) = match *e {
            HexSp::Radial(i) => {
                let v = x[i];
                (qp(v).midpoint(&qp(scale(v, 2))), v)
            }
            HexSp::RayAt(i) => (qp(scale(x[i], 2)).advance(x[i], &Rat::new(19, 23)), x[i]),
        };
        sps.push(SingularPoint {
            pos: pos.clone(),
            inv_dir: out,
            order: 1,
            cut_dir: out,
        });
        let inward = neg(out);
        initial.push(Wall {
            support: Support::Ray {
                base: pos,
                dir: inward,
            },
            dir: inward,
            parts: vec![Part {
                j: 1,
                coeffs: vec![(Rat::one(), 0)],
            }],
            kink: 0,
            normal: rot90(inward),
            positive_side: rot90(inward),
        });
    }
    Scene {
        dim: 2,
        bounded_cells: Scene::from_cells2(cells),
        rays,
        slabs,
        initial_walls: initial,
        singular_points: sps,
        xi: vec![1, 0],
        decorated_facets: None,
        notes: notes.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Hirzebruch surfaces

/// The Hirzebruch surface scene: triangles `conv(v0, v1, v2)` and
/// `conv(v0, v2, v3)` with `v0 = (0,1)`, `v1 = (-1,0)`, `v2 = (0,-1)`,
/// `v3 = (1,m)`, kink-1 binomial boundary slabs with midpoint focus-focus
/// points, a plain kink-1 slab on the shared edge, and a ray per vertex.
pub fn hirzebruch(m: i64) -> Scene {
    let v0: V2 = [0, 1];
    let v1: V2 = [-1, 0];
    let v2: V2 = [0, -1];
    let v3: V2 = [1, m];
    let cells = vec![
        vec![qp(v0), qp(v1), qp(v2)],
        vec![qp(v0), qp(v2), qp(v3)],
    ];
    let boundary = [(v0, v1), (v1, v2), (v2, v3), (v3, v0)];
    let mut slabs = Vec::new();
    let mut sps = Vec::new();
    let mut rays = Vec::new();
    for (a, b) in boundary {
        let d = primitive([b[0] - a[0], b[1] - a[1]]);
        let normal = [d[1], -d[0]];
        slabs.push(Wall::binomial_slab(
            Support::Seg([qp(a), qp(b)]),
            d,
            1,
            normal,
        ));
        sps.push(SingularPoint {
            pos: qp(a).midpoint(&qp(b)),
            inv_dir: d,
            order: 1,
            cut_dir: primitive(b),
        });
    }
    // Shared interior edge.
    slabs.push(Wall {
        support: Support::Seg([qp(v0), qp(v2)]),
        dir: [0, -1],
        parts: Vec::new(),
        kink: 1,
        normal: [1, 0],
        positive_side: [1, 0],
    });
    for v in [v0, v1, v2, v3] {
        rays.push(SceneRay {
            base: qp(v),
            dir: primitive(v),
        });
    }
    Scene {
        dim: 2,
        bounded_cells: Scene::from_cells2(cells),
        rays,
        slabs,
        initial_walls: Vec::new(),
        singular_points: sps,
        xi: vec![0, -1],
        decorated_facets: None,
        notes: format!("Hirzebruch surface F{m}"),
    }
}

// ---------------------------------------------------------------------------
// Three-dimensional models

fn p3_scene() -> Scene {
    let vertices: [[i64; 3]; 4] = [[1, 0, 0], [0, 1, 0], [0, 0, 1], [-1, -1, -1]];
    let facets: [[usize; 3]; 4] = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
    let decorated = facets
        .iter()
        .map(|f| DecoratedFacet {
            vertices: f.iter().map(|&i| vertices[i].to_vec()).collect(),
            points: f
                .iter()
                .map(|&i| (vertices[i].to_vec(), Rat::one(), vertices[i].to_vec()))
                .collect(),
        })
        .collect();
    Scene {
        dim: 3,
        bounded_cells: vec![vertices
            .iter()
            .map(|v| v.iter().map(|&c| Rat::new(c, 1)).collect())
            .collect()],
        rays: Vec::new(),
        slabs: Vec::new(),
        initial_walls: Vec::new(),
        singular_points: Vec::new(),
        xi: vec![0, 0, 1],
        decorated_facets: Some(decorated),
        notes: "projective 3-space; boundary fast path only".into(),
    }
}

fn fano3_scene() -> Scene {
    // Vertices of the polytope.
    let a = [1i64, 1, 1];
    let b = [-1i64, -1, -1];
    let c = [1i64, -1, -1];
    let d = [-1i64, 1, -1];
    let e = [-1i64, -1, 1];
    // Facets with their vertices and the decorated boundary points: each
    // vertex with coefficient 1, each edge midpoint with coefficient 2. The
    // printed exponent of a midpoint of an edge through the apex `a` or of
    // the bottom triangle `cde` is the doubled midpoint; the midpoints of
    // edges through `b` print as themselves.
    let vertices = [a, b, c, d, e];
    let facets: &[(&[usize], &[([i64; 3], i64, [i64; 3])])] = &[
        // Facet x + y - z = 1: a, c, d.
        (&[0, 2, 3], &[([0, 0, -1], 2, [0, 0, -2])]),
        // Facet x - y + z = 1: a, c, e.
        (&[0, 2, 4], &[([0, -1, 0], 2, [0, -2, 0])]),
        // Facet -x + y + z = 1: a, d, e.
        (&[0, 3, 4], &[([-1, 0, 0], 2, [-2, 0, 0])]),
        // Facet z = -1: b, c, d.
        (
            &[1, 2, 3],
            &[
                ([0, -1, -1], 2, [0, -1, -1]),
                ([-1, 0, -1], 2, [-1, 0, -1]),
                ([0, 0, -1], 2, [0, 0, -2]),
            ],
        ),
        // Facet y = -1: b, c, e.
        (
            &[1, 2, 4],
            &[
                ([0, -1, -1], 2, [0, -1, -1]),
                ([-1, -1, 0], 2, [-1, -1, 0]),
                ([0, -1, 0], 2, [0, -2, 0]),
            ],
        ),
        // Facet x = -1: b, d, e.
        (
            &[1, 3, 4],
            &[
                ([-1, 0, -1], 2, [-1, 0, -1]),
                ([-1, -1, 0], 2, [-1, -1, 0]),
                ([-1, 0, 0], 2, [-2, 0, 0]),
            ],
        ),
    ];
    // Edge midpoints through the apex print doubled too.
    let apex_mids: [([i64; 3], [i64; 3]); 3] =
        [([1, 0, 0], [2, 0, 0]), ([0, 1, 0], [0, 2, 0]), ([0, 0, 1], [0, 0, 2])];
    let mut decorated = Vec::new();
    for (vs, mids) in facets {
        let mut points: Vec<(Vec<i64>, Rat, Vec<i64>)> = vs
            .iter()
            .map(|&i| (vertices[i].to_vec(), Rat::one(), vertices[i].to_vec()))
            .collect();
        for (m, coeff, printed) in *mids {
            points.push((m.to_vec(), Rat::new(*coeff, 1), printed.to_vec()));
        }
        // Apex-edge midpoints lie on the three upper facets.
        if vs.contains(&0) {
            for (m, printed) in &apex_mids {
                let on = vs
                    .iter()
                    .filter(|&&i| i != 0)
                    .any(|&i| {
                        let v = vertices[i];
                        (0..3).all(|k| (a[k] + v[k]) == 2 * m[k])
                    });
                if on {
                    points.push((m.to_vec(), Rat::new(2, 1), printed.to_vec()));
                }
            }
        }
        decorated.push(DecoratedFacet {
            vertices: vs.iter().map(|&i| vertices[i].to_vec()).collect(),
            points,
        });
    }
    Scene {
        dim: 3,
        bounded_cells: vec![vertices
            .iter()
            .map(|v| v.iter().map(|&cc| Rat::new(cc, 1)).collect())
            .collect()],
        rays: Vec::new(),
        slabs: Vec::new(),
        initial_walls: Vec::new(),
        singular_points: Vec::new(),
        xi: vec![0, 0, 1],
        decorated_facets: Some(decorated),
        notes: "Gorenstein toric Fano 3-fold; boundary fast path only".into(),
    }
}

// ---------------------------------------------------------------------------
// Golden data

/// A frozen potential: endpoint, truncation order, and the exact terms
/// `(coefficient, exponent, t-order)`.
#[derive(Clone, Debug)]
pub struct GoldenCase {
    pub point: QP,
    pub order: i64,
    pub terms: Vec<(i64, V2, i64)>,
}

fn hex_terms(torder: i64) -> Vec<(i64, V2, i64)> {
    HEX.iter().map(|&v| (1, v, torder)).collect()
}

/// Frozen chamber potentials per model. The chamber points were chosen in
/// generic positions of the documented chambers; the term lists are exact.
pub fn golden_cases(name: &str) -> Vec<GoldenCase> {
    match name {
        "p2" => vec![GoldenCase {
            point: QP([Rat::new(1, 7), Rat::new(1, 9)]),
            order: 1,
            terms: vec![(1, [1, 0], 1), (1, [0, 1], 1), (1, [-1, -1], 1)],
        }],
        "dp3" => vec![GoldenCase {
            point: QP([Rat::new(1, 7), Rat::new(1, 9)]),
            order: 1,
            terms: hex_terms(1),
        }],
        "dp4" => vec![
            GoldenCase {
                // Chamber u: below the diagonal wall.
                point: QP([Rat::new(1, 7), Rat::new(-1, 9)]),
                order: 3,
                terms: [hex_terms(2), vec![(1, [-1, 0], 3), (1, [-2, -1], 3)]].concat(),
            },
            GoldenCase {
                // Chamber u': above the diagonal wall.
                point: QP([Rat::new(-1, 9), Rat::new(1, 7)]),
                order: 3,
                terms: [hex_terms(2), vec![(1, [0, -1], 3), (1, [-1, -2], 3)]].concat(),
            },
        ],
        "dp5a" => vec![GoldenCase {
            point: QP([Rat::new(1, 7), Rat::new(-1, 9)]),
            order: 4,
            terms: [
                hex_terms(2),
                vec![
                    (1, [0, -1], 3),
                    (1, [-1, -1], 3),
                    (1, [-2, -1], 3),
                    (1, [-1, -2], 3),
                    (1, [-1, -1], 4),
                ],
            ]
            .concat(),
        }],
        "dp5b" => vec![GoldenCase {
            point: QP([Rat::new(1, 7), Rat::new(-1, 9)]),
            order: 3,
            terms: [
                hex_terms(2),
                vec![
                    (1, [0, -1], 3),
                    (1, [1, 0], 3),
                    (1, [2, 1], 3),
                    (1, [-1, -2], 3),
                ],
            ]
            .concat(),
        }],
        "dp6a" => vec![GoldenCase {
            point: QP([Rat::new(1, 7), Rat::new(-1, 9)]),
            order: 5,
            terms: [
                hex_terms(2),
                vec![
                    (2, [-1, -2], 3),
                    (1, [-1, -1], 3),
                    (2, [0, -1], 3),
                    (1, [0, -1], 4),
                    (1, [0, -1], 5),
                ],
            ]
            .concat(),
        }],
        "dp6b" => vec![GoldenCase {
            point: QP([Rat::new(1, 7), Rat::new(-1, 9)]),
            order: 3,
            terms: [
                hex_terms(2),
                vec![
                    (1, [-1, 1], 3),
                    (1, [-1, 0], 3),
                    (1, [-1, -2], 3),
                    (2, [0, -1], 3),
                    (1, [1, -1], 3),
                ],
            ]
            .concat(),
        }],
        "f2" => vec![GoldenCase {
            point: QP([Rat::new(-1, 7), Rat::new(1, 9)]),
            order: 2,
            terms: vec![
                (1, [-1, 0], 1),
                (1, [0, -1], 1),
                (1, [0, 1], 1),
                (1, [1, 2], 2),
            ],
        }],
        "f3" => vec![GoldenCase {
            point: QP([Rat::new(1, 7), Rat::new(1, 9)]),
            order: 3,
            terms: vec![
                (1, [-1, 0], 1),
                (1, [0, -1], 1),
                (1, [0, 1], 1),
                (1, [-1, 1], 1),
                (1, [-1, 1], 2),
                (1, [1, 3], 3),
                (1, [0, 2], 3),
            ],
        }],
        _ => Vec::new(),
    }
}

/// Frozen boundary potentials of the 3-dimensional models, as
/// `(coefficient, printed exponent)` at t-order 1.
pub fn golden_boundary(name: &str) -> Vec<(i64, [i64; 3])> {
    match name {
        "p3" => vec![
            (1, [1, 0, 0]),
            (1, [0, 1, 0]),
            (1, [0, 0, 1]),
            (1, [-1, -1, -1]),
        ],
        "fano3" => vec![
            (1, [1, 1, 1]),
            (1, [-1, -1, -1]),
            (1, [1, -1, -1]),
            (1, [-1, 1, -1]),
            (1, [-1, -1, 1]),
            (2, [2, 0, 0]),
            (2, [0, 2, 0]),
            (2, [0, 0, 2]),
            (2, [-2, 0, 0]),
            (2, [0, -2, 0]),
            (2, [0, 0, -2]),
            (2, [-1, -1, 0]),
            (2, [0, -1, -1]),
            (2, [-1, 0, -1]),
        ],
        _ => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tropical_model::validate;

    #[test]
    fn all_two_dimensional_models_validate() {
        for name in CATALOG_NAMES {
            let s = scene(name).unwrap();
            assert_eq!(s.dim, 2, "{name}");
            validate(&s).unwrap();
            assert!(s.properness_check(), "{name} rays are not proper");
        }
    }

    #[test]
    fn three_dimensional_models_have_decorations() {
        for name in CATALOG_NAMES_3D {
            let s = scene(name).unwrap();
            assert_eq!(s.dim, 3);
            assert!(s.decorated_facets.is_some());
        }
    }

    #[test]
    fn unknown_model_lists_catalog() {
        let err = scene("nope").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("nope") && msg.contains("dp5a") && msg.contains("sdp11"));
    }

    #[test]
    fn fano3_has_fourteen_decorated_points() {
        let s = scene("fano3").unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for f in s.decorated_facets.as_ref().unwrap() {
            for (m, _, _) in &f.points {
                seen.insert(m.clone());
            }
        }
        assert_eq!(seen.len(), 14);
    }
}
