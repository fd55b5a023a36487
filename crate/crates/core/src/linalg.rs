//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Singular values below this are treated as zero when extracting bases.
pub const RANK_CUTOFF: f64 = 1e-10;

/// Orthonormal basis (as columns) of the span of the columns of `m`.
pub fn orthonormal_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if m.ncols() == 0 || n == 0 {
        return DMatrix::zeros(n, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > RANK_CUTOFF)
        .map(|(i, _)| i)
        .collect();
    let mut out = DMatrix::zeros(n, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        out.set_column(j, &u.column(i));
    }
    out
}

/// Orthonormal basis of the orthogonal complement of span(`basis`) in R^n.
///
/// `basis` must have orthonormal columns.
pub fn complement(basis: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let k = basis.ncols();
    if k == 0 {
        return DMatrix::identity(n, n);
    }
    let proj = DMatrix::identity(n, n) - basis * basis.transpose();
    let eig = proj.symmetric_eigen();
    let keep: Vec<usize> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, l)| **l > 0.5)
        .map(|(i, _)| i)
        .collect();
    let mut out = DMatrix::zeros(n, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        out.set_column(j, &eig.eigenvectors.column(i));
    }
    out
}

/// Orthonormal basis of the null space of `m` (an r x n matrix).
pub fn nullspace(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    let rows = orthonormal_basis(&m.transpose());
    complement(&rows, n)
}

pub fn rank(m: &DMatrix<f64>) -> usize {
    orthonormal_basis(m).ncols()
}

/// Build an n x k matrix from column vectors.
pub fn columns(n: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

/// Cosines of the principal angles between two subspaces with orthonormal
/// bases, in decreasing order.
pub fn principal_cosines(q1: &DMatrix<f64>, q2: &DMatrix<f64>) -> Vec<f64> {
    if q1.ncols() == 0 || q2.ncols() == 0 {
        return Vec::new();
    }
    let m = q1.transpose() * q2;
    let mut s: Vec<f64> = m
        .singular_values()
        .iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Nonnegative least squares, min ||A x - b|| subject to x >= 0
/// (Lawson and Hanson active-set method).
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (m, n) = a.shape();
    let mut x = DVector::zeros(n);
    if n == 0 {
        return x;
    }
    let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    let tol = 10.0 * f64::EPSILON * scale * (m.max(n) as f64);
    let mut passive = vec![false; n];
    let mut w = a.transpose() * (b - a * &x);
    let mut outer = 0;
    while outer < 3 * n + 10 {
        outer += 1;
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let t = match candidate {
            Some(t) if w[t] > tol => t,
            _ => break,
        };
        passive[t] = true;
        let mut inner = 0;
        loop {
            inner += 1;
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let z_p = least_squares_on(a, b, &idx);
            let mut z = DVector::zeros(n);
            for (k, &j) in idx.iter().enumerate() {
                z[j] = z_p[k];
            }
            if idx.iter().all(|&j| z[j] > tol) {
                x = z;
                break;
            }
            if inner > 3 * n + 10 {
                // Numerical stalemate: keep the feasible part of z.
                for &j in &idx {
                    x[j] = z[j].max(0.0);
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for &j in &idx {
                if z[j] <= tol {
                    let denom = x[j] - z[j];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            x += (z - &x) * alpha;
            for &j in &idx {
                if x[j] <= tol {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if idx.iter().all(|&j| !passive[j]) {
                break;
            }
        }
        w = a.transpose() * (b - a * &x);
        // A freshly added index that could not stay positive is numerically
        // dual-feasible; stop selecting it again.
        if !passive[t] {
            w[t] = 0.0;
        }
    }
    x
}

fn least_squares_on(a: &DMatrix<f64>, b: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    let sub = a.select_columns(idx);
    let svd = sub.svd(true, true);
    svd.solve(b, 1e-13)
        .unwrap_or_else(|_| DVector::zeros(idx.len()))
}

/// Least-distance problem: the minimum-norm z with g z >= h, or None when
/// the constraints are infeasible.
pub fn least_distance(g: &DMatrix<f64>, h: &DVector<f64>) -> Option<DVector<f64>> {
    let (m, n) = g.shape();
    if m == 0 {
        return Some(DVector::zeros(n));
    }
    let mut e = DMatrix::zeros(n + 1, m);
    for j in 0..m {
        for i in 0..n {
            e[(i, j)] = g[(j, i)];
        }
        e[(n, j)] = h[j];
    }
    let mut f = DVector::zeros(n + 1);
    f[n] = 1.0;
    let u = nnls(&e, &f);
    let r = &e * &u - &f;
    if r.norm() < 1e-12 || r[n].abs() < 1e-14 {
        return None;
    }
    Some(DVector::from_fn(n, |i, _| -r[i] / r[n]))
}

/// Euclidean projection of `x` onto {y : normals * y <= offsets}, or None if
/// that polyhedron is empty.
pub fn project_polyhedron(
    normals: &DMatrix<f64>,
    offsets: &DVector<f64>,
    x: &DVector<f64>,
) -> Option<DVector<f64>> {
    let g = -normals;
    let h = normals * x - offsets;
    if h.iter().all(|v| *v <= 0.0) {
        return Some(x.clone());
    }
    least_distance(&g, &h).map(|z| x + z)
}

/// Projection of `v` onto the convex cone generated by the given columns,
/// returned together with the residual norm.
pub fn project_cone(gens: &DMatrix<f64>, v: &DVector<f64>) -> (DVector<f64>, f64) {
    if gens.ncols() == 0 {
        return (DVector::zeros(v.len()), v.norm());
    }
    let coef = nnls(gens, v);
    let p = gens * coef;
    let d = (v - &p).norm();
    (p, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn nnls_matches_unconstrained_when_interior() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = nnls(&a, &b);
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn nnls_clips_negative_direction() {
        let a = DMatrix::identity(2, 2);
        let b = DVector::from_vec(vec![-1.0, 2.0]);
        let x = nnls(&a, &b);
        assert_eq!(x[0], 0.0);
        assert_abs_diff_eq!(x[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn polyhedron_projection_onto_quadrant_corner() {
        let normals = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        let offsets = DVector::zeros(2);
        let x = DVector::from_vec(vec![-2.0, -3.0]);
        let p = project_polyhedron(&normals, &offsets, &x).unwrap();
        assert_abs_diff_eq!(p.norm(), 0.0, epsilon = 1e-12);
        let y = DVector::from_vec(vec![-2.0, 5.0]);
        let q = project_polyhedron(&normals, &offsets, &y).unwrap();
        assert_abs_diff_eq!(q[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q[1], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_polyhedron_is_reported() {
        let normals = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let offsets = DVector::from_vec(vec![-1.0, -1.0]);
        assert!(project_polyhedron(&normals, &offsets, &DVector::zeros(1)).is_none());
    }

    #[test]
    fn complement_and_nullspace_dimensions() {
        let b = orthonormal_basis(&DMatrix::from_row_slice(3, 1, &[1.0, 1.0, 0.0]));
        let c = complement(&b, 3);
        assert_eq!(c.ncols(), 2);
        assert_abs_diff_eq!((b.transpose() * &c).norm(), 0.0, epsilon = 1e-12);
        let ns = nullspace(&DMatrix::from_row_slice(1, 3, &[0.0, 0.0, 2.0]));
        assert_eq!(ns.ncols(), 2);
    }

    #[test]
    fn principal_cosines_of_lines_at_45_degrees() {
        let a = columns(2, &[DVector::from_vec(vec![1.0, 0.0])]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let b = columns(2, &[DVector::from_vec(vec![s, s])]);
        let c = principal_cosines(&a, &b);
        assert_abs_diff_eq!(c[0], s, epsilon = 1e-15);
    }
}
