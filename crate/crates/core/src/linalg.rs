//! Dense linear algebra for the tiny (d ≤ 4) matrices that show up in the
//! phase-function analysis: LU determinant and solve, and a Jacobi
//! eigensolver for symmetric matrices (used for ranks and pseudo-inverses).

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub n: usize,
    pub a: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Mat { n, a: vec![0.0; n * n] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    /// Determinant by LU with partial pivoting.
    pub fn det_lu(&self) -> f64 {
        let n = self.n;
        let mut a = self.a.clone();
        let mut det = 1.0;
        for k in 0..n {
            let mut piv = k;
            let mut best = a[k * n + k].abs();
            for i in (k + 1)..n {
                let v = a[i * n + k].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best == 0.0 {
                return 0.0;
            }
            if piv != k {
                for j in 0..n {
                    a.swap(k * n + j, piv * n + j);
                }
                det = -det;
            }
            det *= a[k * n + k];
            for i in (k + 1)..n {
                let factor = a[i * n + k] / a[k * n + k];
                for j in k..n {
                    a[i * n + j] -= factor * a[k * n + j];
                }
            }
        }
        det
    }

    /// Solves `A x = b` by Gaussian elimination with partial pivoting.
    /// Returns `None` when a pivot degenerates (singular to rounding).
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut a = self.a.clone();
        let mut x = b.to_vec();
        for k in 0..n {
            let mut piv = k;
            let mut best = a[k * n + k].abs();
            for i in (k + 1)..n {
                let v = a[i * n + k].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best < 1e-300 {
                return None;
            }
            if piv != k {
                for j in 0..n {
                    a.swap(k * n + j, piv * n + j);
                }
                x.swap(k, piv);
            }
            for i in (k + 1)..n {
                let factor = a[i * n + k] / a[k * n + k];
                for j in k..n {
                    a[i * n + j] -= factor * a[k * n + j];
                }
                x[i] -= factor * x[k];
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in (k + 1)..n {
                s -= a[k * n + j] * x[j];
            }
            x[k] = s / a[k * n + k];
        }
        Some(x)
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
    /// sorted ascending. Accurate to machine precision for these sizes.
    pub fn sym_eigenvalues(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = self.a.clone();
        for _sweep in 0..60 {
            let mut off = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a[i * n + j] * a[i * n + j];
                }
            }
            if off.sqrt() < 1e-300 {
                break;
            }
            let mut done = true;
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    if apq.abs() <= 1e-16 * (app.abs() + aqq.abs()).max(1e-300) {
                        continue;
                    }
                    done = false;
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                }
            }
            if done {
                break;
            }
        }
        let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        eig
    }

    /// Numerical rank of a symmetric matrix: eigenvalues above
    /// `tol * max(1, |λ|_max)` count.
    pub fn sym_rank(&self, tol: f64) -> usize {
        let eig = self.sym_eigenvalues();
        let scale = eig.iter().fold(1.0f64, |m, &e| m.max(e.abs()));
        eig.iter().filter(|e| e.abs() > tol * scale).count()
    }

    /// Solves `A x = b` for symmetric `A` via the eigendecomposition,
    /// truncating eigenvalues below `cutoff` (a pseudo-inverse step).
    /// Used by Newton when the Jacobian degenerates on a caustic.
    pub fn sym_pinv_solve(&self, b: &[f64], cutoff: f64) -> Vec<f64> {
        let n = self.n;
        let (eigvals, vecs) = self.sym_eigen_full();
        let mut x = vec![0.0; n];
        for (k, &lam) in eigvals.iter().enumerate() {
            if lam.abs() <= cutoff {
                continue;
            }
            let mut proj = 0.0;
            for i in 0..n {
                proj += vecs[i * n + k] * b[i];
            }
            let coef = proj / lam;
            for i in 0..n {
                x[i] += coef * vecs[i * n + k];
            }
        }
        x
    }

    /// Eigenvalues and eigenvectors (columns) of a symmetric matrix.
    pub fn sym_eigen_full(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut a = self.a.clone();
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        for _sweep in 0..60 {
            let mut done = true;
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    if apq.abs() <= 1e-16 * (app.abs() + aqq.abs()).max(1e-300) {
                        continue;
                    }
                    done = false;
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                }
            }
            if done {
                break;
            }
        }
        let eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
        (eig, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(n: usize, entries: &[f64]) -> Mat {
        Mat { n, a: entries.to_vec() }
    }

    #[test]
    fn lu_det_small() {
        let m = mat(2, &[1.0, 2.0, 3.0, 4.0]);
        assert!((m.det_lu() - (-2.0)).abs() < 1e-14);
        let m3 = mat(3, &[2.0, 0.0, 1.0, 0.0, 3.0, 0.0, 1.0, 0.0, 2.0]);
        assert!((m3.det_lu() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn solve_roundtrip() {
        let m = mat(3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 5.0]);
        let x = [1.0, -2.0, 0.25];
        let b: Vec<f64> = (0..3).map(|i| (0..3).map(|j| m.at(i, j) * x[j]).sum()).collect();
        let got = m.solve(&b).unwrap();
        for i in 0..3 {
            assert!((got[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobi_eigen_symmetric() {
        // eigenvalues of [[2,1],[1,2]] are 1 and 3
        let m = mat(2, &[2.0, 1.0, 1.0, 2.0]);
        let e = m.sym_eigenvalues();
        assert!((e[0] - 1.0).abs() < 1e-13);
        assert!((e[1] - 3.0).abs() < 1e-13);
        assert_eq!(m.sym_rank(1e-10), 2);
    }

    #[test]
    fn rank_of_rank_one_matrix() {
        // outer product ss^T with s = (1,1,1) has rank 1
        let mut m = Mat::zeros(3);
        for i in 0..3 {
            for j in 0..3 {
                m.set(i, j, 1.0);
            }
        }
        assert_eq!(m.sym_rank(1e-10), 1);
        let e = m.sym_eigenvalues();
        assert!((e[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_determinant_consistency() {
        let m = mat(3, &[3.0, 0.4, -0.2, 0.4, 2.0, 0.7, -0.2, 0.7, 1.5]);
        let prod: f64 = m.sym_eigenvalues().iter().product();
        assert!((prod - m.det_lu()).abs() < 1e-11);
    }
}
