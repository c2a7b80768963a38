//! Broken-line enumeration by backward tracing.
//!
//! A broken line ending at `p` with final monomial `a z^m` is traced
//! backwards: starting at `p` we march along `+m` (the forward velocity of
//! the last piece is `-m`). At each transversal wall crossing the primitive
//! normal `n` is oriented with `<n, m> > 0`; then `e = <n, m>` is positive
//! and equal for the earlier piece, the local bend options are the terms of
//! `f^e` (an honest polynomial), and a branch picking `c t^tau z^(q m_w)`
//! rewinds the exponent to `m - q m_w`, multiplies the coefficient by `c`
//! and costs `kink * e + tau` orders of `t`. Wedge boundaries teleport the
//! state by the monodromy at no cost. A trace that escapes to infinity with
//! a primitive exponent is an admissible line (the initial coefficient is
//! normalized to 1).
//!
//! Hitting a joint, vertex, singular point or any coincidence aborts the
//! enumeration with [`LineError::JointHit`]: the endpoint is not general.

use crate::exact_algebra::{wall_power, Rat, Series, Term};
use crate::geom::{dot, neg, primitive, rot90, QP, V2};
use crate::wall_structure::{
    local_diagram_at, mat_vec, next_event, teleport, Locate, MarchEvent, WallStructure,
};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LineError {
    #[error("endpoint is not a general point of a chamber")]
    NonGeneralPoint,
    #[error("a trace hit a joint at ({0}, {1}); perturb the endpoint")]
    JointHit(Rat, Rat),
}

/// One straight piece of a (backward) trace. `len = None` is the unbounded
/// first piece of the line.
#[derive(Clone, Debug, Serialize)]
pub struct Piece {
    pub from: QP,
    pub dir: V2,
    pub len: Option<Rat>,
    pub exponent: V2,
}

#[derive(Clone, Debug, Serialize)]
pub struct BrokenLine {
    pub endpoint: QP,
    pub exponent: V2,
    pub coeff: Rat,
    pub torder: i64,
    /// Pieces in backward order: from the endpoint out to infinity.
    pub pieces: Vec<Piece>,
}

impl BrokenLine {
    pub fn term(&self) -> Term {
        Term {
            coeff: self.coeff.clone(),
            exp: self.exponent.to_vec(),
            torder: self.torder,
        }
    }
}

const BEND_CAP: usize = 32;
const TELEPORT_CAP: usize = 64;

#[derive(Clone)]
struct TraceState {
    pos: QP,
    exponent: V2,
    coeff: Rat,
    cost: i64,
    bends: usize,
    teleports: usize,
    pieces: Vec<Piece>,
}

/// Enumerates all broken lines with endpoint `p` and `t`-order at most the
/// structure's order. The result is sorted by `(torder, exponent)`.
pub fn enumerate(ws: &WallStructure, p: &QP) -> Result<Vec<BrokenLine>, LineError> {
    if ws.on_structure(p) {
        return Err(LineError::NonGeneralPoint);
    }
    let k = ws.trunc;
    let bound = exponent_bound(ws);
    let mut out = Vec::new();
    for mx in -bound..=bound {
        for my in -bound..=bound {
            if (mx, my) == (0, 0) {
                continue;
            }
            trace(ws, p, [mx, my], k, &mut out)?;
        }
    }
    out.sort_by(|a, b| {
        (a.torder, a.exponent, a.coeff.clone())
            .cmp(&(b.torder, b.exponent, b.coeff.clone()))
    });
    Ok(out)
}

/// Box bound on candidate final exponents: the asymptotic class plus what
/// bends can accumulate within the order budget. Every bend of size `q`
/// costs at least `q / jmax` orders, so the drift is at most
/// `jmax * k * max|m_w|`.
fn exponent_bound(ws: &WallStructure) -> i64 {
    let k = ws.trunc.max(0);
    // Max drift per unit of t-order over all affordable bends: a bend by
    // `q = j` at a part with minimal coefficient order `l` moves the
    // exponent by `j * |m_w|` and costs at least `max(l, 1)`.
    let mut rate: i64 = 0;
    for w in &ws.walls {
        if w.func.is_one() {
            continue;
        }
        let dmax = w.func.direction.iter().map(|c| c.abs()).max().unwrap_or(1);
        for (j, g) in &w.func.parts {
            let Some(lmin) = g.iter().map(|(l, _)| *l).min() else { continue };
            if lmin > k {
                continue;
            }
            let per = (*j as i64) * dmax;
            let cost = lmin.max(1);
            rate = rate.max((per + cost - 1) / cost);
        }
    }
    let cmax = ws
        .scene
        .rays
        .iter()
        .map(|r| primitive(r.dir).iter().map(|c| c.abs()).max().unwrap_or(1))
        .max()
        .unwrap_or(1);
    cmax + rate * k
}

/// Walls that can affect a trace within the order budget: kinked walls, and
/// walls with some bend part affordable at the structure's order.
fn tracer_walls(ws: &WallStructure) -> Vec<usize> {
    (0..ws.walls.len())
        .filter(|&i| {
            let w = &ws.walls[i];
            w.kink != 0
                || w
                    .func
                    .parts
                    .iter()
                    .any(|(_, g)| g.iter().any(|(l, _)| *l <= ws.trunc))
        })
        .collect()
}

fn trace(
    ws: &WallStructure,
    p: &QP,
    m0: V2,
    k: i64,
    out: &mut Vec<BrokenLine>,
) -> Result<(), LineError> {
    let all_walls: Vec<usize> = tracer_walls(ws);
    let mut stack = vec![TraceState {
        pos: p.clone(),
        exponent: m0,
        coeff: Rat::one(),
        cost: 0,
        bends: 0,
        teleports: 0,
        pieces: Vec::new(),
    }];
    let dbg = std::env::var("TLG_TRACE").ok().map(|v| {
        let p: Vec<i64> = v.split(',').map(|c| c.parse().unwrap()).collect();
        [p[0], p[1]]
    }) == Some(m0);
    while let Some(st) = stack.pop() {
        let dir = primitive(st.exponent);
        let ev = next_event(ws, &st.pos, dir, &all_walls);
        if dbg {
            eprintln!(
                "trace {:?}: at ({}, {}) exp {:?} cost {} -> {:?}",
                m0, st.pos.x(), st.pos.y(), st.exponent, st.cost,
                match &ev {
                    MarchEvent::Escape => "escape".to_string(),
                    MarchEvent::Wall { wall, at, .. } =>
                        format!("wall {} at ({}, {})", wall, at.x(), at.y()),
                    MarchEvent::Seam { walls, at, .. } =>
                        format!("seam {:?} at ({}, {})", walls, at.x(), at.y()),
                    MarchEvent::WedgeRay { wedge, at, .. } =>
                        format!("wedge {} at ({}, {})", wedge, at.x(), at.y()),
                    MarchEvent::Coincidence { at, .. } =>
                        format!("coincidence at ({}, {})", at.x(), at.y()),
                }
            );
        }
        match ev {
            MarchEvent::Escape => {
                if crate::geom::is_primitive(st.exponent) {
                    let mut pieces = st.pieces.clone();
                    pieces.push(Piece {
                        from: st.pos.clone(),
                        dir,
                        len: None,
                        exponent: st.exponent,
                    });
                    out.push(BrokenLine {
                        endpoint: p.clone(),
                        exponent: m0,
                        coeff: st.coeff,
                        torder: st.cost,
                        pieces,
                    });
                }
            }
            MarchEvent::Coincidence { at, .. } => {
                // A trace that cannot cross the coincident walls within the
                // remaining budget is irrelevant: prune it instead of
                // demanding a generic endpoint.
                if let Some(c) = joint_pass_cost(ws, &at, st.exponent) {
                    if st.cost + c > k {
                        continue;
                    }
                }
                return Err(LineError::JointHit(at.x().clone(), at.y().clone()));
            }
            MarchEvent::WedgeRay { wedge, boundary, at, s, u } => {
                if st.teleports >= TELEPORT_CAP {
                    continue;
                }
                let w = &ws.wedges[wedge];
                let (npos, mat) = teleport(w, boundary, &u, dir);
                let _ = at;
                let mut pieces = st.pieces.clone();
                pieces.push(Piece {
                    from: st.pos.clone(),
                    dir,
                    len: Some(s),
                    exponent: st.exponent,
                });
                stack.push(TraceState {
                    pos: npos,
                    exponent: mat_vec(&mat, st.exponent),
                    teleports: st.teleports + 1,
                    pieces,
                    ..st
                });
            }
            MarchEvent::Wall { wall, at, s } => {
                let w = &ws.walls[wall];
                let mut n = rot90(primitive(w.dir));
                if dot(n, st.exponent) < 0 {
                    n = neg(n);
                }
                let e = dot(n, st.exponent);
                debug_assert!(e > 0);
                let base_cost = w.kink * e;
                let budget = k - st.cost - base_cost;
                if budget < 0 {
                    continue;
                }
                let mut pieces = st.pieces.clone();
                pieces.push(Piece {
                    from: st.pos.clone(),
                    dir,
                    len: Some(s),
                    exponent: st.exponent,
                });
                let fd: V2 = [w.func.direction[0], w.func.direction[1]];
                let pow = wall_power(&w.func, e, budget, None)
                    .expect("positive wall power is polynomial");
                for ((q, tau), c) in pow {
                    let cost = st.cost + base_cost + tau;
                    debug_assert!(q >= 0 && tau >= 0 && cost <= k);
                    let bent = q != 0;
                    if bent && st.bends >= BEND_CAP {
                        continue;
                    }
                    let nm: V2 = [st.exponent[0] - q * fd[0], st.exponent[1] - q * fd[1]];
                    if nm == [0, 0] {
                        continue;
                    }
                    // The earlier piece must keep crossing the wall the same
                    // way; <n, nm> = e > 0 holds automatically since the
                    // wall function's monomials are parallel to the wall.
                    debug_assert_eq!(dot(n, nm), e);
                    stack.push(TraceState {
                        pos: at.clone(),
                        exponent: nm,
                        coeff: &st.coeff * &c,
                        cost,
                        bends: st.bends + usize::from(bent),
                        teleports: st.teleports,
                        pieces: pieces.clone(),
                    });
                }
            }
            MarchEvent::Seam { walls, wedge, at, s } => {
                // Composite seam crossing: the collinear wall bends apply,
                // then the teleport; the pieces commute (parallel crossings
                // commute, and the structure is monodromy-equivariant at
                // seams).
                if wedge.is_some() && st.teleports >= TELEPORT_CAP {
                    continue;
                }
                let mut n = rot90(primitive(ws.walls[walls[0]].dir));
                if dot(n, st.exponent) < 0 {
                    n = neg(n);
                }
                let e = dot(n, st.exponent);
                debug_assert!(e > 0);
                let base_cost: i64 = walls.iter().map(|&wi| ws.walls[wi].kink * e).sum();
                let budget = k - st.cost - base_cost;
                if budget < 0 {
                    continue;
                }
                let mut pieces = st.pieces.clone();
                pieces.push(Piece {
                    from: st.pos.clone(),
                    dir,
                    len: Some(s),
                    exponent: st.exponent,
                });
                let (npos, slit) = match &wedge {
                    Some((g, boundary, u)) => {
                        let (p, m) = teleport(&ws.wedges[*g], *boundary, u, dir);
                        (p, Some(m))
                    }
                    None => (at.clone(), None),
                };
                // Branches: fold the bends of every nontrivial wall.
                let mut branches: Vec<(V2, Rat, i64, usize)> =
                    vec![(st.exponent, Rat::one(), 0, 0)];
                for &wi in &walls {
                    let w = &ws.walls[wi];
                    if w.func.is_one() {
                        continue;
                    }
                    let fd: V2 = [w.func.direction[0], w.func.direction[1]];
                    let pow = wall_power(&w.func, e, budget, None)
                        .expect("positive wall power is polynomial");
                    let mut next = Vec::new();
                    for (m, c0, tau0, bends0) in &branches {
                        for ((q, tau), c) in &pow {
                            if tau0 + tau > budget {
                                continue;
                            }
                            next.push((
                                [m[0] - q * fd[0], m[1] - q * fd[1]],
                                c0 * c,
                                tau0 + tau,
                                bends0 + usize::from(*q != 0),
                            ));
                        }
                    }
                    branches = next;
                }
                for (nm, c, tau, bends) in branches {
                    let cost = st.cost + base_cost + tau;
                    if cost > k || nm == [0, 0] {
                        continue;
                    }
                    if bends > 0 && st.bends + bends > BEND_CAP {
                        continue;
                    }
                    let exponent = match &slit {
                        Some(m) => mat_vec(m, nm),
                        None => nm,
                    };
                    stack.push(TraceState {
                        pos: npos.clone(),
                        exponent,
                        coeff: &st.coeff * &c,
                        cost,
                        bends: st.bends + bends,
                        teleports: st.teleports + usize::from(slit.is_some()),
                        pieces: pieces.clone(),
                    });
                }
            }
        }
    }
    Ok(())
}

/// A lower bound for the t-order cost of continuing a trace with exponent
/// `m` through the point `at`: the sum of `kink * <n, m>` over all kinked
/// walls passing transversally through the point. Returns `None` when a
/// wedge boundary passes through the point (whose teleport could change the
/// exponent before the crossings, defeating the bound).
fn joint_pass_cost(ws: &WallStructure, at: &QP, m: V2) -> Option<i64> {
    for w in &ws.wedges {
        if w.degenerate {
            if crate::geom::collinear_param(&w.pos, w.w2, at)
                .map_or(false, |u| u.signum() >= 0)
            {
                return None;
            }
            continue;
        }
        for b in [w.w1, w.w2] {
            if crate::geom::collinear_param(&w.pos, b, at).map_or(false, |u| u.signum() >= 0) {
                return None;
            }
        }
    }
    let mut cost = 0;
    for w in ws.walls.iter() {
        if w.kink == 0 || crate::geom::cross(m, w.dir) == 0 {
            continue;
        }
        let Some(u) = w.param_of(at) else { continue };
        if !w.param_in_range(&u) {
            continue;
        }
        let n = rot90(primitive(w.dir));
        cost += w.kink * dot(n, m).abs();
    }
    Some(cost)
}

/// Sums the contributions of a set of broken lines to a series.
pub fn lines_to_series(lines: &[BrokenLine], trunc: i64) -> Series {
    Series::from_terms(lines.iter().map(|l| l.term()), trunc)
}

/// A point is general if it lies in a chamber interior and a trial
/// enumeration completes without hitting a joint.
pub fn is_general(ws: &WallStructure, p: &QP) -> bool {
    matches!(ws.locate(p), Locate::Chamber(_)) && enumerate(ws, p).is_ok()
}

/// Sanity check available on any traced line: replaying the pieces forward,
/// every wall crossed transversally at a non-bend point contributes only
/// kink cost, and the recorded torder matches the accumulated cost.
pub fn replay_torder(ws: &WallStructure, line: &BrokenLine) -> Option<i64> {
    // The backward trace already accumulates exactly these costs; recompute
    // from the recorded pieces.
    let mut cost = 0i64;
    for window in line.pieces.windows(2) {
        let (a, b) = (&window[0], &window[1]);
        let end = a.from.advance(a.dir, a.len.as_ref()?);
        // A teleport keeps the exponent class: detect by comparing mapped
        // exponents; bends happen at walls.
        let crossing_wall = ws
            .walls
            .iter()
            .find(|w| w.param_of(&end).is_some() && crate::geom::cross(w.dir, a.dir) != 0);
        if let Some(w) = crossing_wall {
            let mut n = rot90(primitive(w.dir));
            if dot(n, a.exponent) < 0 {
                n = neg(n);
            }
            let e = dot(n, a.exponent);
            cost += w.kink * e;
            if b.exponent != a.exponent {
                // Bend: its tau is the torder of the chosen term; recover it
                // from the wall function.
                let fd: V2 = [w.func.direction[0], w.func.direction[1]];
                let q = if fd[0] != 0 {
                    (a.exponent[0] - b.exponent[0]) / fd[0]
                } else {
                    (a.exponent[1] - b.exponent[1]) / fd[1]
                };
                let pow = wall_power(&w.func, e, ws.trunc, None).ok()?;
                let tau = pow
                    .keys()
                    .filter(|(x, _)| *x == q)
                    .map(|(_, l)| *l)
                    .min()?;
                cost += tau;
            }
        }
    }
    Some(cost)
}

/// The consistency data of the structure seen from a point: used by the
/// chamber-invariance tests. Returns the local diagram at `p` (useful when
/// `p` is a joint).
pub fn diagram_at(ws: &WallStructure, p: &QP) -> crate::scattering::LocalDiagram {
    local_diagram_at(ws, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tropical_model::from_reflexive_polygon;
    use crate::wall_structure::build;

    fn dp3_ws(k: i64) -> WallStructure {
        let scene =
            from_reflexive_polygon(&[[1, 0], [0, 1], [-1, 1], [-1, 0], [0, -1], [1, -1]])
                .unwrap();
        build(&scene, k).unwrap()
    }

    #[test]
    fn dp3_six_straight_lines() {
        let ws = dp3_ws(1);
        let p = QP([Rat::new(1, 7), Rat::new(1, 9)]);
        let lines = enumerate(&ws, &p).unwrap();
        let hex: Vec<V2> = vec![
            [-1, -1],
            [-1, 0],
            [0, -1],
            [0, 1],
            [1, 0],
            [1, 1],
        ];
        assert_eq!(lines.len(), 6, "{:#?}", lines.iter().map(|l| (l.exponent, l.torder, l.coeff.clone())).collect::<Vec<_>>());
        for l in &lines {
            assert_eq!(l.torder, 1);
            assert_eq!(l.coeff, Rat::one());
            assert!(hex.contains(&l.exponent));
        }
    }

    #[test]
    fn dp3_endpoint_on_wall_rejected() {
        let ws = dp3_ws(1);
        assert!(matches!(
            enumerate(&ws, &QP([Rat::one(), Rat::new(1, 3)])),
            Err(LineError::NonGeneralPoint)
        ));
    }

    #[test]
    fn dp3_order_zero_single_line_far_out() {
        // At order 0 beyond all walls, only the asymptotic class survives.
        // A point in the eastern cylindrical strip, outside the wedge.
        let ws = dp3_ws(0);
        let p = QP([Rat::new(91, 10), Rat::new(1, 3)]);
        let lines = enumerate(&ws, &p).unwrap();
        assert_eq!(lines.len(), 1, "{:#?}", lines);
        assert_eq!(lines[0].torder, 0);
        assert_eq!(lines[0].coeff, Rat::one());
    }

    #[test]
    fn dp3_chamber_invariance_inside_sigma0() {
        let ws = dp3_ws(2);
        let p1 = QP([Rat::new(1, 7), Rat::new(1, 9)]);
        let p2 = QP([Rat::new(-3, 11), Rat::new(2, 7)]);
        let s1 = lines_to_series(&enumerate(&ws, &p1).unwrap(), 2);
        let s2 = lines_to_series(&enumerate(&ws, &p2).unwrap(), 2);
        assert_eq!(s1, s2);
    }
}
