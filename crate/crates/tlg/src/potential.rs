//! Superpotentials from broken lines, the boundary fast path, and the
//! mirror map read off at far points of the cylindrical end.

use crate::broken_lines::{enumerate, lines_to_series, LineError};
use crate::exact_algebra::{binomial, transport, Crossing, Rat, Series, Term};
use crate::geom::{primitive, QP, V2};
use crate::tropical_model::{Scene, Support};
use crate::wall_structure::{build, BuildError, Locate, WallStructure};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Line(#[from] LineError),
    #[error("depth unresolved at order {0}: no broken line contributes yet")]
    DepthUnresolved(i64),
    #[error("cylindricity violated: final exponent ({0}, {1}) is not a multiple of the asymptotic class")]
    CylindricityViolated(i64, i64),
    #[error("dimension-3 scene without facet decoration")]
    MissingDecoration,
    #[error("boundary fast path unavailable: {0}")]
    FastPathUnavailable(String),
    #[error("no general far point found along the asymptotic class")]
    NoFarPoint,
}

/// A superpotential at a point: the broken-line generating series, the
/// chamber of the endpoint (when inside the bounding box), and — once
/// checked — whether the series is stable under raising the order.
#[derive(Clone, Debug)]
pub struct Potential {
    pub series: Series,
    pub chamber: Option<usize>,
    pub ostensibly_algebraic: Option<bool>,
}

/// Sums all broken lines ending at `p` in an already-built structure.
pub fn superpotential_in(ws: &WallStructure, p: &QP) -> Result<Potential, PotentialError> {
    let lines = enumerate(ws, p)?;
    let chamber = match ws.locate(p) {
        Locate::Chamber(i) if ws.in_bounding_box(p) => Some(i),
        _ => None,
    };
    Ok(Potential {
        series: lines_to_series(&lines, ws.trunc),
        chamber,
        ostensibly_algebraic: None,
    })
}

/// Builds the order-`k` structure and sums the broken lines ending at `p`.
pub fn superpotential_at(scene: &Scene, p: &QP, k: i64) -> Result<Potential, PotentialError> {
    let ws = build(scene, k)?;
    superpotential_in(&ws, p)
}

/// Compares the order-`k` potential with the order-`k+1` potential truncated
/// back to `k`: agreement is the (finite-order) algebraicity signal.
pub fn check_ostensibly_algebraic(
    scene: &Scene,
    p: &QP,
    k: i64,
) -> Result<Potential, PotentialError> {
    let mut pot = superpotential_at(scene, p, k)?;
    let higher = superpotential_at(scene, p, k + 1)?;
    pot.ostensibly_algebraic = Some(higher.series.retrunc(k) == pot.series);
    Ok(pot)
}

/// The boundary fast path: `t * sum over boundary lattice points of sigma_0`
/// with binomial coefficients `C(l_edge, position)`, valid when every
/// boundary slab carries the binomial normal form. Dimension-3 scenes
/// require an explicit facet decoration.
pub fn boundary_potential(scene: &Scene) -> Result<Series, PotentialError> {
    if scene.dim == 3 {
        let facets = scene
            .decorated_facets
            .as_ref()
            .ok_or(PotentialError::MissingDecoration)?;
        let mut points: BTreeMap<Vec<i64>, (Rat, Vec<i64>)> = BTreeMap::new();
        for f in facets {
            for (m, c, printed) in &f.points {
                points.insert(m.clone(), (c.clone(), printed.clone()));
            }
        }
        return Ok(Series::from_terms(
            points.into_values().map(|(c, printed)| Term {
                coeff: c,
                exp: printed,
                torder: 1,
            }),
            1,
        ));
    }
    let sigma0 = scene.cell2(0);
    let mut terms = Vec::new();
    for i in 0..sigma0.len() {
        let a = &sigma0[i];
        let b = &sigma0[(i + 1) % sigma0.len()];
        if !a.is_lattice() || !b.is_lattice() {
            return Err(PotentialError::FastPathUnavailable(
                "sigma_0 has non-lattice vertices".into(),
            ));
        }
        let av: V2 = [a.x().floor_i64(), a.y().floor_i64()];
        let bv: V2 = [b.x().floor_i64(), b.y().floor_i64()];
        let ev: V2 = [bv[0] - av[0], bv[1] - av[1]];
        let ell = crate::geom::gcd(ev[0], ev[1]);
        let d = primitive(ev);
        check_binomial_slab(scene, a, b, ell)?;
        // Points a + l*d for l = 1..=ell: interior points with C(ell, l),
        // the endpoint b with coefficient 1; `a` is covered by the previous
        // edge, so every boundary lattice point appears exactly once.
        for l in 1..=ell {
            terms.push(Term {
                coeff: binomial(ell, l as u32),
                exp: vec![av[0] + l * d[0], av[1] + l * d[1]],
                torder: 1,
            });
        }
    }
    Ok(Series::from_terms(terms, 1))
}

fn check_binomial_slab(scene: &Scene, a: &QP, b: &QP, ell: i64) -> Result<(), PotentialError> {
    for slab in &scene.slabs {
        if let Support::Seg([sa, sb]) = &slab.support {
            if (sa == a && sb == b) || (sa == b && sb == a) {
                let f = slab.func();
                let expect: Vec<(u32, Vec<(i64, Rat)>)> = (1..=ell as u32)
                    .map(|j| (j, vec![(0, binomial(ell, j))]))
                    .collect();
                if f.parts == expect {
                    return Ok(());
                }
                return Err(PotentialError::FastPathUnavailable(format!(
                    "slab between ({}, {}) and ({}, {}) is not in binomial normal form",
                    a.x(),
                    a.y(),
                    b.x(),
                    b.y()
                )));
            }
        }
    }
    Err(PotentialError::FastPathUnavailable(format!(
        "no slab on the boundary edge from ({}, {}) to ({}, {})",
        a.x(),
        a.y(),
        b.x(),
        b.y()
    )))
}

/// The depth of a potential: the lowest `t`-order with a contribution.
pub fn depth(pot: &Potential, k: i64) -> Result<i64, PotentialError> {
    pot.series
        .min_torder()
        .ok_or(PotentialError::DepthUnresolved(k))
}

/// Pushes every term of a chamber potential through one wall crossing:
/// the change-of-chamber transformation. `sign` is +1 when moving from the
/// crossing normal's negative side to its positive side.
pub fn transport_series(
    series: &Series,
    crossing: &Crossing,
    sign: i64,
    trunc: i64,
) -> Result<Series, PotentialError> {
    let mut out = Series::zero(trunc);
    for term in series.iter_terms() {
        let piece = transport(&term, crossing, sign, trunc, None).map_err(|e| {
            PotentialError::FastPathUnavailable(format!("transport failed: {e}"))
        })?;
        out.add_series(&piece)
            .expect("matching truncation orders");
    }
    Ok(out)
}

/// The numbers `N_{d,l}` read off a stable far-point potential: each broken
/// line's exponent must be an integer multiple `c * xi` of the asymptotic
/// class; `c = 1` at order zero is the `w` line, and a line `a z^(-d xi) t^l`
/// contributes `N_{d,l} += a`.
#[derive(Clone, Debug)]
pub struct MirrorMap {
    pub xi: V2,
    pub n: BTreeMap<(i64, i64), Rat>,
}

/// Enumerates at far points along `+xi`, doubling the distance until the
/// series stabilizes, then extracts the mirror map.
pub fn asymptotic_n(scene: &Scene, k: i64) -> Result<MirrorMap, PotentialError> {
    let ws = build(scene, k)?;
    let series = far_series(&ws)?;
    mirror_map_from_series(&ws, &series)
}

fn xi2(ws: &WallStructure) -> V2 {
    let xi = &ws.scene.xi;
    primitive([xi[0], xi[1]])
}

/// A stable far-point series: enumerate at `R*xi + offset` for doubling `R`
/// until two consecutive radii agree.
pub fn far_series(ws: &WallStructure) -> Result<Series, PotentialError> {
    let xi = xi2(ws);
    let (lo, hi) = &ws.bbox;
    let extent = (hi.x() - lo.x()).abs() + (hi.y() - lo.y()).abs() + Rat::one();
    let offsets: [(i64, i64, i64); 4] = [(1, 101, 103), (1, 89, 97), (2, 101, 103), (3, 113, 127)];
    let mut radius = extent;
    let mut prev: Option<Series> = None;
    for _ in 0..10 {
        let base = QP([&radius * &Rat::from(xi[0]), &radius * &Rat::from(xi[1])]);
        let mut found = None;
        for (num, dx, dy) in offsets {
            let p = QP([
                base.x() + &Rat::new(num, dx),
                base.y() + &Rat::new(num, dy),
            ]);
            if ws.on_structure(&p) {
                continue;
            }
            if let Ok(lines) = enumerate(ws, &p) {
                found = Some(lines_to_series(&lines, ws.trunc));
                break;
            }
        }
        let Some(series) = found else {
            return Err(PotentialError::NoFarPoint);
        };
        if prev.as_ref() == Some(&series) {
            return Ok(series);
        }
        prev = Some(series);
        radius = &radius * &Rat::from(2);
    }
    Err(PotentialError::NoFarPoint)
}

fn mirror_map_from_series(
    ws: &WallStructure,
    series: &Series,
) -> Result<MirrorMap, PotentialError> {
    let xi = xi2(ws);
    let mut n: BTreeMap<(i64, i64), Rat> = BTreeMap::new();
    let mut saw_w = false;
    for term in series.iter_terms() {
        let m: V2 = [term.exp[0], term.exp[1]];
        // m = c * xi for an integer c.
        let c = if xi[0] != 0 { m[0] / xi[0] } else { m[1] / xi[1] };
        if [c * xi[0], c * xi[1]] != m {
            return Err(PotentialError::CylindricityViolated(m[0], m[1]));
        }
        if c == 1 && term.torder == 0 {
            if term.coeff != Rat::one() {
                return Err(PotentialError::CylindricityViolated(m[0], m[1]));
            }
            saw_w = true;
            continue;
        }
        let e = n.entry((-c, term.torder)).or_insert_with(Rat::zero);
        *e += term.coeff.clone();
    }
    if !saw_w {
        return Err(PotentialError::NoFarPoint);
    }
    n.retain(|_, c| !c.is_zero());
    Ok(MirrorMap { xi, n })
}

impl MirrorMap {
    /// The coordinate change `Phi(u) = u + sum_{l>0} (sum_d N_{d,l} u^{-d}) t^l`
    /// as a series in the single variable `u` (exponent index 0).
    pub fn mirror_map_series(&self, trunc: i64) -> Series {
        let mut terms = vec![Term {
            coeff: Rat::one(),
            exp: vec![1],
            torder: 0,
        }];
        for ((d, l), c) in &self.n {
            terms.push(Term {
                coeff: c.clone(),
                exp: vec![-d],
                torder: *l,
            });
        }
        Series::from_terms(terms, trunc)
    }

    /// `Phi` applied to the `w` monomial, as a 2-variable series in `z^xi`.
    pub fn phi_of_w(&self, trunc: i64) -> Series {
        let mut terms = vec![Term {
            coeff: Rat::one(),
            exp: self.xi.to_vec(),
            torder: 0,
        }];
        for ((d, l), c) in &self.n {
            terms.push(Term {
                coeff: c.clone(),
                exp: vec![-d * self.xi[0], -d * self.xi[1]],
                torder: *l,
            });
        }
        Series::from_terms(terms, trunc)
    }
}

/// Checks `W = Phi(w)` exactly: the stable far-point potential equals the
/// mirror map applied to the `w` monomial.
pub fn verify_w_equals_phi_w(scene: &Scene, k: i64) -> Result<bool, PotentialError> {
    let ws = build(scene, k)?;
    let series = far_series(&ws)?;
    let mm = mirror_map_from_series(&ws, &series)?;
    Ok(series == mm.phi_of_w(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tropical_model::from_reflexive_polygon;

    fn dp3_scene() -> Scene {
        from_reflexive_polygon(&[[1, 0], [0, 1], [-1, 1], [-1, 0], [0, -1], [1, -1]]).unwrap()
    }

    fn hexagon_series() -> Series {
        let exps: [[i64; 2]; 6] = [[1, 0], [0, 1], [1, 1], [-1, 0], [0, -1], [-1, -1]];
        Series::from_terms(
            exps.iter().map(|e| Term {
                coeff: Rat::one(),
                exp: e.to_vec(),
                torder: 1,
            }),
            1,
        )
    }

    #[test]
    fn dp3_superpotential_is_the_hexagon() {
        let scene = dp3_scene();
        let p = QP([Rat::new(1, 7), Rat::new(1, 9)]);
        let pot = superpotential_at(&scene, &p, 1).unwrap();
        assert_eq!(pot.series, hexagon_series());
        assert_eq!(depth(&pot, 1).unwrap(), 1);
    }

    #[test]
    fn dp3_boundary_fast_path_matches_engine() {
        let scene = dp3_scene();
        assert_eq!(boundary_potential(&scene).unwrap(), hexagon_series());
    }

    #[test]
    fn dp3_ostensibly_algebraic_at_order_one() {
        let scene = dp3_scene();
        let p = QP([Rat::new(1, 7), Rat::new(1, 9)]);
        let pot = check_ostensibly_algebraic(&scene, &p, 1).unwrap();
        assert_eq!(pot.ostensibly_algebraic, Some(true));
    }

    #[test]
    fn empty_series_depth_unresolved() {
        let pot = Potential {
            series: Series::zero(1),
            chamber: None,
            ostensibly_algebraic: None,
        };
        assert!(matches!(depth(&pot, 1), Err(PotentialError::DepthUnresolved(1))));
    }

    #[test]
    fn dp3_far_point_mirror_map() {
        let scene = dp3_scene();
        let mm = asymptotic_n(&scene, 2).unwrap();
        assert_eq!(mm.xi, primitive([-1, -1]));
        assert!(mm.n.keys().all(|(d, l)| *d >= 1 && *l >= 1));
        assert!(verify_w_equals_phi_w(&scene, 2).unwrap());
    }
}
