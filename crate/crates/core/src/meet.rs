//! Nearest points of the intersection of two sets, including emptiness
//! detection. Used for translated copies of a scenario's sets, whose
//! intersection has no precomputed description.

use nalgebra::{DMatrix, DVector};

use crate::error::{RegError, Result};
use crate::linalg;
use crate::sets::{gauss_newton, Point, SetSpec, Stacked};

const DYKSTRA_MAX_ITER: usize = 2000;
const DYKSTRA_TOL: f64 = 1e-13;
/// Alternating-projection gap above which two convex sets are declared
/// disjoint.
const EMPTY_GAP: f64 = 1e-7;

/// A nearest point of A ∩ B to x, None when the intersection is empty.
///
/// Affine pairs are solved in closed form, polyhedral pairs exactly via a
/// least-distance problem, smooth pairs by Gauss-Newton on the stacked
/// equations (a local nearest point), other convex pairs by Dykstra's
/// algorithm. Unions are distributed over their members.
pub fn nearest_in_intersection(a: &SetSpec, b: &SetSpec, x: &Point) -> Result<Option<Point>> {
    if let SetSpec::Union(ms) = a {
        return best_over(ms.iter().map(|m| nearest_in_intersection(m, b, x)), x);
    }
    if let SetSpec::Union(ms) = b {
        return best_over(ms.iter().map(|m| nearest_in_intersection(a, m, x)), x);
    }
    if let (SetSpec::Affine { basis: b1, offset: o1 }, SetSpec::Affine { basis: b2, offset: o2 }) = (a, b) {
        return Ok(affine_meet(b1, o1, b2, o2).map(|(basis, offset)| {
            &offset + &basis * (basis.transpose() * (x - &offset))
        }));
    }
    if let (Some((n1, c1)), Some((n2, c2))) = (a.constraints(), b.constraints()) {
        let n = x.len();
        let mut normals = DMatrix::zeros(n1.nrows() + n2.nrows(), n);
        let mut offsets = DVector::zeros(n1.nrows() + n2.nrows());
        for i in 0..n1.nrows() {
            normals.set_row(i, &n1.row(i));
            offsets[i] = c1[i];
        }
        for i in 0..n2.nrows() {
            normals.set_row(n1.nrows() + i, &n2.row(i));
            offsets[n1.nrows() + i] = c2[i];
        }
        let p = linalg::project_polyhedron(&normals, &offsets, x);
        // The least-distance solve is exact up to rounding; reject answers
        // that do not actually satisfy the constraints.
        return Ok(p.filter(|p| {
            (&normals * p - &offsets)
                .iter()
                .all(|v| *v <= 1e-8 * (1.0 + x.norm()))
        }));
    }
    if let (Some(e1), Some(e2)) = (a.equations(), b.equations()) {
        let stacked = Stacked(vec![e1, e2]);
        return match gauss_newton(&stacked as &dyn crate::sets::Residual, x) {
            Ok(p) => Ok(Some(p)),
            Err(RegError::ProjectionNotFound { .. }) | Err(RegError::RankDeficient { .. }) => Ok(None),
            Err(e) => Err(e),
        };
    }
    if a.is_convex() && b.is_convex() {
        return dykstra(a, b, x);
    }
    Err(RegError::Unsupported(format!(
        "intersection of a {} set with a {} set",
        a.kind(),
        b.kind()
    )))
}

/// Distance from x to A ∩ B; infinite when the intersection is empty.
pub fn distance_to_intersection(a: &SetSpec, b: &SetSpec, x: &Point) -> Result<f64> {
    Ok(match nearest_in_intersection(a, b, x)? {
        Some(p) => (x - p).norm(),
        None => f64::INFINITY,
    })
}

fn best_over(results: impl Iterator<Item = Result<Option<Point>>>, x: &Point) -> Result<Option<Point>> {
    let mut best: Option<Point> = None;
    let mut unsupported = None;
    let mut any_ok = false;
    for r in results {
        match r {
            Ok(Some(p)) => {
                any_ok = true;
                if best.as_ref().is_none_or(|q| (x - &p).norm() < (x - q).norm()) {
                    best = Some(p);
                }
            }
            Ok(None) => any_ok = true,
            Err(e @ RegError::Unsupported(_)) => unsupported = Some(e),
            Err(e) => return Err(e),
        }
    }
    match (any_ok, unsupported) {
        (_, Some(e)) if best.is_none() => Err(e),
        _ => Ok(best),
    }
}

/// Intersection of two affine subspaces as (orthonormal basis, point).
fn affine_meet(b1: &DMatrix<f64>, o1: &Point, b2: &DMatrix<f64>, o2: &Point) -> Option<(DMatrix<f64>, Point)> {
    // Solve o1 + B1 s = o2 + B2 t in the least-squares sense.
    let k1 = b1.ncols();
    let k2 = b2.ncols();
    let mut m = DMatrix::zeros(o1.len(), k1 + k2);
    for j in 0..k1 {
        m.set_column(j, &b1.column(j));
    }
    for j in 0..k2 {
        m.set_column(k1 + j, &(-b2.column(j)));
    }
    let rhs = o2 - o1;
    let p = if k1 + k2 == 0 {
        o1.clone()
    } else {
        let st = m.clone().svd(true, true).solve(&rhs, 1e-12).ok()?;
        o1 + b1 * st.rows(0, k1)
    };
    if (&p - o1 - b1 * (b1.transpose() * (&p - o1))).norm() > 1e-9 * (1.0 + p.norm())
        || (&p - o2 - b2 * (b2.transpose() * (&p - o2))).norm() > 1e-9 * (1.0 + p.norm())
    {
        return None;
    }
    let basis = crate::cones::subspace_intersection(b1, b2);
    Some((basis, p))
}

/// Dykstra's projection onto the intersection of two convex sets. Plain
/// alternating projections run first: they converge to a best pair, so a
/// persistent gap decides disjointness cheaply.
fn dykstra(a: &SetSpec, b: &SetSpec, x: &Point) -> Result<Option<Point>> {
    let mut u = x.clone();
    let mut gap = f64::INFINITY;
    for _ in 0..DYKSTRA_MAX_ITER {
        let ua = a.project(&u)?.first().clone();
        let ub = b.project(&ua)?.first().clone();
        gap = (&ua - &ub).norm();
        let step = (&ub - &u).norm();
        u = ub;
        if gap <= EMPTY_GAP || step <= DYKSTRA_TOL * (1.0 + x.norm()) {
            break;
        }
    }
    if gap > EMPTY_GAP {
        return Ok(None);
    }
    let n = x.len();
    let mut y = x.clone();
    let mut p = DVector::zeros(n);
    let mut q = DVector::zeros(n);
    let mut za = y.clone();
    for _ in 0..DYKSTRA_MAX_ITER {
        za = a.project(&(&y + &p))?.first().clone();
        p = &y + &p - &za;
        let yb = b.project(&(&za + &q))?.first().clone();
        q = &za + &q - &yb;
        let change = (&yb - &y).norm();
        y = yb;
        if change <= DYKSTRA_TOL * (1.0 + x.norm()) && (&za - &y).norm() <= DYKSTRA_TOL * (1.0 + x.norm()) {
            break;
        }
    }
    // Dykstra can stall on thin intersections; fall back to the point found
    // by alternating projections, which lies in both sets.
    if (&za - &y).norm() <= EMPTY_GAP {
        Ok(Some(y))
    } else {
        Ok(Some(u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p2(a: f64, b: f64) -> Point {
        DVector::from_vec(vec![a, b])
    }

    #[test]
    fn crossing_lines_meet_at_a_point() {
        let a = SetSpec::line(p2(0.0, 0.0), p2(1.0, 0.0)).unwrap();
        let b = SetSpec::line(p2(0.0, 0.3), p2(1.0, 1.0)).unwrap();
        let p = nearest_in_intersection(&a, &b, &p2(5.0, 5.0)).unwrap().unwrap();
        assert!((p - p2(-0.3, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn parallel_lines_are_disjoint() {
        let a = SetSpec::line(p2(0.0, 0.0), p2(1.0, 0.0)).unwrap();
        let b = SetSpec::line(p2(0.0, 0.1), p2(1.0, 0.0)).unwrap();
        assert!(nearest_in_intersection(&a, &b, &p2(0.0, 0.0)).unwrap().is_none());
        assert_eq!(distance_to_intersection(&a, &b, &p2(0.0, 0.0)).unwrap(), f64::INFINITY);
    }

    #[test]
    fn halfspaces_and_polyhedra() {
        let a = SetSpec::half_space(p2(0.0, 1.0), 0.0).unwrap();
        let b = SetSpec::line(p2(0.0, 0.0), p2(1.0, 1.0)).unwrap();
        let p = nearest_in_intersection(&a, &b, &p2(1.0, 3.0)).unwrap().unwrap();
        assert!((p - p2(0.0, 0.0)).norm() < 1e-9);
        let far = SetSpec::half_space(p2(0.0, -1.0), -1.0).unwrap();
        assert!(nearest_in_intersection(&a, &far, &p2(0.0, 0.0)).unwrap().is_none());
    }

    #[test]
    fn circle_and_line() {
        let c = SetSpec::sphere(p2(0.0, 0.0), 1.0).unwrap();
        let l = SetSpec::line(p2(0.0, 0.0), p2(1.0, 0.0)).unwrap();
        let p = nearest_in_intersection(&c, &l, &p2(0.9, 0.1)).unwrap().unwrap();
        assert!((p - p2(1.0, 0.0)).norm() < 1e-10);
        let off = SetSpec::line(p2(0.0, 1.5), p2(1.0, 0.0)).unwrap();
        assert!(nearest_in_intersection(&c, &off, &p2(0.0, 1.2)).unwrap().is_none());
    }

    #[test]
    fn convex_pairs_use_dykstra() {
        let ball = SetSpec::ball(p2(0.0, 0.0), 1.0).unwrap();
        let h = SetSpec::half_space(p2(-1.0, 0.0), -0.5).unwrap();
        let p = nearest_in_intersection(&ball, &h, &p2(0.0, 0.0)).unwrap().unwrap();
        assert!((p - p2(0.5, 0.0)).norm() < 1e-6);
        let gone = SetSpec::half_space(p2(-1.0, 0.0), -1.5).unwrap();
        assert!(nearest_in_intersection(&ball, &gone, &p2(0.0, 0.0)).unwrap().is_none());
    }

    #[test]
    fn unions_distribute() {
        let cross = SetSpec::union(vec![
            SetSpec::line(p2(0.0, 0.0), p2(1.0, 0.0)).unwrap(),
            SetSpec::line(p2(0.0, 0.0), p2(0.0, 1.0)).unwrap(),
        ])
        .unwrap();
        let l = SetSpec::line(p2(0.0, 0.2), p2(1.0, 0.0)).unwrap();
        let p = nearest_in_intersection(&cross, &l, &p2(0.3, 0.3)).unwrap().unwrap();
        assert!((p - p2(0.0, 0.2)).norm() < 1e-12);
    }
}
