//! Small dense SPD linear algebra and finite-difference oracles.
//!
//! Vectors and matrices are `nalgebra` dynamic types. The Cholesky factor is
//! computed here rather than through `nalgebra::Cholesky` so that a failure
//! reports the offending pivot.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// A point of the state space.
pub type Point = DVector<f64>;

/// Dense real matrix.
pub type Matrix = DMatrix<f64>;

/// Relative pivot threshold: a pivot must exceed this times the largest
/// diagonal entry.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

/// Relative symmetry tolerance used when accepting an SPD input.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Lower-triangular Cholesky factor `L` of an SPD matrix `A = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    lower: Matrix,
}

impl Cholesky {
    pub fn new(a: &Matrix) -> Result<Self> {
        check_symmetric(a)?;
        let n = a.nrows();
        let max_diag = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
        let threshold = PIVOT_TOLERANCE * max_diag;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut pivot = a[(j, j)];
            for k in 0..j {
                pivot -= l[(j, k)] * l[(j, k)];
            }
            if !(pivot > threshold) {
                return Err(Error::NotPositiveDefinite {
                    pivot: j,
                    value: pivot,
                    threshold,
                });
            }
            let root = pivot.sqrt();
            l[(j, j)] = root;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / root;
            }
        }
        Ok(Self { lower: l })
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    pub fn into_lower(self) -> Matrix {
        self.lower
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// Solves `A x = b` by forward and back substitution.
    pub fn solve(&self, b: &Point) -> Point {
        let n = self.dim();
        let l = &self.lower;
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[(k, i)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        y
    }

    /// `A⁻¹` column by column.
    pub fn inverse(&self) -> Matrix {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        for j in 0..n {
            let mut e = Point::zeros(n);
            e[j] = 1.0;
            inv.set_column(j, &self.solve(&e));
        }
        symmetrize(&mut inv);
        inv
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.lower.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

/// Returns `M` lower triangular with `M Mᵀ = A`.
pub fn spd_factor(a: &Matrix) -> Result<Matrix> {
    Cholesky::new(a).map(Cholesky::into_lower)
}

/// Solves `A x = b` for SPD `A`.
pub fn spd_solve(a: &Matrix, b: &Point) -> Result<Point> {
    if b.len() != a.nrows() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            got: b.len(),
        });
    }
    Ok(Cholesky::new(a)?.solve(b))
}

pub fn check_symmetric(a: &Matrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            let gap = (a[(i, j)] - a[(j, i)]).abs();
            if gap > SYMMETRY_TOLERANCE * scale {
                return Err(Error::NotSymmetric {
                    row: i,
                    col: j,
                    gap,
                });
            }
        }
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Replaces `A` with `(A + Aᵀ)/2`.
pub fn symmetrize(a: &mut Matrix) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

pub fn frobenius(a: &Matrix) -> f64 {
    a.norm()
}

/// `‖a − b‖ / ‖b‖`, falling back to the absolute error when `b` vanishes.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

pub fn min_eigenvalue(a: &Matrix) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.min()
}

/// Symmetric square root of a positive semi-definite matrix.
pub fn sym_sqrt(a: &Matrix) -> Matrix {
    let eig = SymmetricEigen::new(a.clone());
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * Matrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Default central-difference step for gradients.
pub fn gradient_step(x: &Point) -> f64 {
    1e-5 * (1.0 + x.norm())
}

/// Default second-difference step for Hessians.
pub fn hessian_step(x: &Point) -> f64 {
    1e-4 * (1.0 + x.norm())
}

fn eval<F: Fn(&Point) -> f64>(f: &F, x: &Point, coordinate: usize) -> Result<f64> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Oracle { coordinate })
    }
}

/// Central-difference gradient `(f(x + s eᵢ) − f(x − s eᵢ)) / 2s`.
pub fn finite_diff_gradient<F>(f: F, x: &Point, step: f64) -> Result<Point>
where
    F: Fn(&Point) -> f64,
{
    let mut g = Point::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let plus = eval(&f, &probe, i)?;
        probe[i] = x[i] - step;
        let minus = eval(&f, &probe, i)?;
        probe[i] = x[i];
        g[i] = (plus - minus) / (2.0 * step);
    }
    Ok(g)
}

/// Four-point second-difference Hessian, symmetrized.
pub fn finite_diff_hessian<F>(f: F, x: &Point, step: f64) -> Result<Matrix>
where
    F: Fn(&Point) -> f64,
{
    let n = x.len();
    let mut h = Matrix::zeros(n, n);
    let mut probe = x.clone();
    let denom = 4.0 * step * step;
    for i in 0..n {
        for j in i..n {
            let mut corner = |si: f64, sj: f64| -> Result<f64> {
                probe.copy_from(x);
                probe[i] += si * step;
                probe[j] += sj * step;
                eval(&f, &probe, i)
            };
            let pp = corner(1.0, 1.0)?;
            let pm = corner(1.0, -1.0)?;
            let mp = corner(-1.0, 1.0)?;
            let mm = corner(-1.0, -1.0)?;
            let v = (pp - pm - mp + mm) / denom;
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    symmetrize(&mut h);
    Ok(h)
}

/// Squared Euclidean distance.
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{NoiseStream, Purpose};

    fn random_spd(dim: usize, stream: &mut NoiseStream) -> Matrix {
        let b = Matrix::from_fn(dim, dim, |_, _| stream.normal());
        b.transpose() * &b + Matrix::identity(dim, dim)
    }

    #[test]
    fn identity_factor() {
        let i3 = Matrix::identity(3, 3);
        assert_eq!(spd_factor(&i3).unwrap(), i3);
    }

    #[test]
    fn diagonal_factor() {
        let a = Matrix::from_diagonal(&Point::from_vec(vec![4.0, 9.0]));
        let m = spd_factor(&a).unwrap();
        assert_eq!(m, Matrix::from_diagonal(&Point::from_vec(vec![2.0, 3.0])));
    }

    #[test]
    fn random_factor_multiplies_back() {
        let mut s = NoiseStream::new(11, Purpose::Auxiliary, 0, 0);
        let a = random_spd(5, &mut s);
        let m = spd_factor(&a).unwrap();
        let resid = frobenius(&(&m * m.transpose() - &a)) / frobenius(&a);
        assert!(resid < 1e-10, "residual {resid}");
    }

    #[test]
    fn indefinite_reports_pivot() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match spd_factor(&a) {
            Err(Error::NotPositiveDefinite { pivot, value, .. }) => {
                assert_eq!(pivot, 1);
                assert!((value + 3.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn asymmetric_rejected() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(spd_factor(&a), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn solves() {
        let b = Point::from_vec(vec![3.0, -1.0, 2.0]);
        assert_eq!(spd_solve(&Matrix::identity(3, 3), &b).unwrap(), b);
        let a = Matrix::from_diagonal(&Point::from_vec(vec![2.0, 4.0]));
        let x = spd_solve(&a, &Point::from_vec(vec![2.0, 4.0])).unwrap();
        assert!((x - Point::from_vec(vec![1.0, 1.0])).amax() < 1e-15);

        let mut s = NoiseStream::new(12, Purpose::Auxiliary, 0, 0);
        let a = random_spd(8, &mut s);
        let b = s.normal_vector(8);
        let x = spd_solve(&a, &b).unwrap();
        assert!((&a * &x - &b).norm() <= 1e-10 * b.norm());
    }

    #[test]
    fn singular_solve_fails() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(spd_solve(&a, &Point::from_vec(vec![1.0, 0.0])).is_err());
    }

    #[test]
    fn random_spd_round_trips() {
        let mut s = NoiseStream::new(13, Purpose::Auxiliary, 0, 0);
        for case in 0..100 {
            let d = 1 + case % 16;
            let a = random_spd(d, &mut s);
            let chol = Cholesky::new(&a).unwrap();
            let l = chol.lower();
            assert!(frobenius(&(l * l.transpose() - &a)) <= 1e-10 * frobenius(&a));
            let x = s.normal_vector(d);
            let back = chol.solve(&(&a * &x));
            assert!(relative_error(back.as_slice(), x.as_slice()) < 1e-8);
        }
    }

    #[test]
    fn log_det_and_inverse() {
        let a = Matrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let c = Cholesky::new(&a).unwrap();
        assert!((c.log_det() - 11.0f64.ln()).abs() < 1e-12);
        let prod = &a * c.inverse();
        assert!((prod - Matrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let x = Point::from_vec(vec![0.3, -2.0]);
        let g = finite_diff_gradient(|_| 5.0, &x, 1e-5).unwrap();
        assert_eq!(g, Point::zeros(2));
    }

    #[test]
    fn gradient_of_quadratic() {
        let x = Point::from_vec(vec![1.0, 2.0]);
        let g = finite_diff_gradient(|p| 0.5 * p.norm_squared(), &x, 1e-5).unwrap();
        assert!((g - &x).amax() < 1e-8);
    }

    #[test]
    fn hessian_of_quadratic() {
        let q = Matrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, -0.3, 0.0, -0.3, 4.0]);
        let x = Point::from_vec(vec![0.2, -0.7, 1.1]);
        let qq = q.clone();
        let h = finite_diff_hessian(move |p| 0.5 * p.dot(&(&qq * p)), &x, hessian_step(&x)).unwrap();
        assert!((h - q).amax() < 1e-6);
        let h0 = finite_diff_hessian(|_| 1.0, &x, 1e-4).unwrap();
        assert_eq!(h0, Matrix::zeros(3, 3));
    }

    #[test]
    fn non_finite_oracle() {
        let x = Point::from_vec(vec![0.0]);
        let r = finite_diff_gradient(|p| if p[0] > 0.0 { f64::INFINITY } else { 0.0 }, &x, 1e-3);
        assert!(matches!(r, Err(Error::Oracle { coordinate: 0 })));
    }

    #[test]
    fn sqrt_squares_back() {
        let a = Matrix::from_row_slice(2, 2, &[5.0, 2.0, 2.0, 3.0]);
        let r = sym_sqrt(&a);
        assert!((&r * &r - a).norm() < 1e-12);
    }
}
