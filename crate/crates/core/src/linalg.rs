//! Dense and banded linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen, LU};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenpairs of a matrix that is symmetric in the inner product
/// `⟨a, b⟩ = Σ wᵢ aᵢ bᵢ`.
///
/// The problem is transformed by `W^{1/2}`, solved as an ordinary symmetric
/// eigenproblem and transformed back. Eigenvalues are ascending; eigenvectors
/// are the columns of the returned matrix, normalized in the weighted norm.
pub fn weighted_symmetric_eigen(a: &DMatrix<f64>, w: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let mut b = DMatrix::from_fn(n, n, |i, j| sw[i] * a[(i, j)] / sw[j]);
    let bt = b.transpose();
    b += bt;
    b *= 0.5;
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])] / sw[r]);
    (values, vectors)
}

/// Relative defect `‖WA − (WA)ᵀ‖_F / ‖WA‖_F`.
pub fn weighted_symmetry_defect(a: &DMatrix<f64>, w: &[f64]) -> f64 {
    let n = a.nrows();
    let wa = DMatrix::from_fn(n, n, |i, j| w[i] * a[(i, j)]);
    let denom = wa.norm();
    if denom == 0.0 {
        return 0.0;
    }
    (&wa - wa.transpose()).norm() / denom
}

/// Dense real LU factorization that also solves with complex right-hand sides.
pub struct RealLu {
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
}

impl RealLu {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let lu = a.lu();
        if !lu.is_invertible() {
            return Err(Error::Singular("exactly singular matrix".into()));
        }
        Ok(RealLu { lu, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = DVector::from_column_slice(rhs);
        self.lu
            .solve(&b)
            .expect("factorization checked for invertibility")
            .as_slice()
            .to_vec()
    }

    pub fn solve_complex(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let re: Vec<f64> = rhs.iter().map(|z| z.re).collect();
        let im: Vec<f64> = rhs.iter().map(|z| z.im).collect();
        let xr = self.solve(&re);
        let xi = self.solve(&im);
        xr.into_iter()
            .zip(xi)
            .map(|(a, b)| Complex64::new(a, b))
            .collect()
    }

    /// Ratio of the largest to the smallest pivot magnitude; a cheap
    /// conditioning proxy.
    pub fn pivot_ratio(&self) -> f64 {
        let u = self.lu.u();
        let d: Vec<f64> = (0..self.n).map(|i| u[(i, i)].abs()).collect();
        let max = d.iter().cloned().fold(0.0, f64::max);
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }
}

/// Banded matrix with `kl` sub- and `ku` super-diagonals, factored in place by
/// Gaussian elimination without pivoting. Only suitable for matrices that are
/// (similar to) positive definite or diagonally dominant.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    // row-major band storage: data[i * width + (j + kl - i)]
    data: Vec<f64>,
    factored: bool,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandedMatrix {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
            factored: false,
        }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku);
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert!(!self.factored);
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    pub fn factor(&mut self) -> Result<()> {
        let n = self.n;
        for k in 0..n {
            let pivot = self.data[self.idx(k, k)];
            if pivot.abs() < 1e-300 {
                return Err(Error::Singular(format!("zero pivot at row {k}")));
            }
            let imax = (k + self.kl).min(n - 1);
            let jmax = (k + self.ku).min(n - 1);
            for i in k + 1..=imax {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                for j in k + 1..=jmax {
                    let kj = self.data[self.idx(k, j)];
                    let ij = self.idx(i, j);
                    self.data[ij] -= l * kj;
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert!(self.factored);
        let n = self.n;
        let mut y = rhs.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(self.kl);
            let mut s = y[i];
            for (j, yj) in y.iter().enumerate().take(i).skip(lo) {
                s -= self.data[self.idx(i, j)] * yj;
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + self.ku).min(n - 1);
            let mut s = y[i];
            for j in i + 1..=hi {
                s -= self.data[self.idx(i, j)] * y[j];
            }
            y[i] = s / self.data[self.idx(i, i)];
        }
        y
    }
}

/// Outcome of a GMRES solve.
#[derive(Debug, Clone)]
pub struct GmresReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Right-preconditioned restarted GMRES for `A x = b` with `x₀ = 0`.
///
/// `apply` computes `A v`, `precondition` approximates `A⁻¹ v`. The returned
/// residual is the true relative residual `‖b − A x‖ / ‖b‖`.
pub fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precondition: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    rel_tol: f64,
    restart: usize,
    max_iter: usize,
) -> (Vec<f64>, GmresReport) {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return (
            x,
            GmresReport {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
            },
        );
    }
    let mut total = 0;
    loop {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        if beta / bnorm <= rel_tol || total >= max_iter {
            return (
                x,
                GmresReport {
                    iterations: total,
                    relative_residual: beta / bnorm,
                    converged: beta / bnorm <= rel_tol,
                },
            );
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::new();
        let mut hess = vec![vec![0.0; restart]; restart + 1];
        let mut cs = vec![0.0; restart];
        let mut sn = vec![0.0; restart];
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..restart {
            let zk = precondition(&v[k]);
            let mut w = apply(&zk);
            z.push(zk);
            // modified Gram-Schmidt, applied twice for stability
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let hik = dot(&w, vi);
                    hess[i][k] += hik;
                    for (wj, vij) in w.iter_mut().zip(vi) {
                        *wj -= hik * vij;
                    }
                }
            }
            let hnext = norm(&w);
            hess[k + 1][k] = hnext;
            for i in 0..k {
                let t = cs[i] * hess[i][k] + sn[i] * hess[i + 1][k];
                hess[i + 1][k] = -sn[i] * hess[i][k] + cs[i] * hess[i + 1][k];
                hess[i][k] = t;
            }
            let denom = hess[k][k].hypot(hess[k + 1][k]);
            cs[k] = hess[k][k] / denom;
            sn[k] = hess[k + 1][k] / denom;
            hess[k][k] = denom;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k_used = k + 1;
            if g[k + 1].abs() / bnorm <= 0.1 * rel_tol || hnext == 0.0 || total >= max_iter {
                break;
            }
            v.push(w.iter().map(|wi| wi / hnext).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= hess[i][j] * y[j];
            }
            y[i] = s / hess[i][i];
        }
        for (yi, zi) in y.iter().zip(&z) {
            for (xj, zij) in x.iter_mut().zip(zi) {
                *xj += yi * zij;
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_eigen_of_diagonal_similarity() {
        // A = W^{-1} S with S symmetric is W-symmetric
        let s = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let w = [1.0, 2.0, 0.5];
        let a = DMatrix::from_fn(3, 3, |i, j| s[(i, j)] / w[i]);
        assert!(weighted_symmetry_defect(&a, &w) < 1e-15);
        let (vals, vecs) = weighted_symmetric_eigen(&a, &w);
        for (k, lam) in vals.iter().enumerate() {
            let v = vecs.column(k);
            let av = &a * v;
            assert!((av - v * *lam).norm() < 1e-12);
            let nw: f64 = (0..3).map(|i| w[i] * v[i] * v[i]).sum();
            assert!((nw - 1.0).abs() < 1e-12);
        }
        assert!(vals.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn banded_solve_matches_dense() {
        let n = 12;
        let mut b = BandedMatrix::zeros(n, 2, 3);
        let mut dense = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(2)..=(i + 3).min(n - 1) {
                let v = if i == j {
                    10.0
                } else {
                    ((i * 7 + j * 3) % 5) as f64 * 0.3 - 0.6
                };
                b.add(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mv = b.matvec(&rhs);
        let dmv = &dense * DVector::from_column_slice(&rhs);
        for (a, c) in mv.iter().zip(dmv.iter()) {
            assert!((a - c).abs() < 1e-13);
        }
        b.factor().unwrap();
        let x = b.solve(&rhs);
        let xd = dense.lu().solve(&DVector::from_column_slice(&rhs)).unwrap();
        for (a, c) in x.iter().zip(xd.iter()) {
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn gmres_solves_nonsymmetric_system() {
        let n = 40;
        let a = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                4.0 + i as f64 * 0.1
            } else {
                ((i * 13 + j * 7) % 11) as f64 / 40.0 - 0.12
            }
        });
        let b: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64).cos()).collect();
        let diag: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        let (x, rep) = gmres(
            |v| crate::grid::matvec(&a, v),
            |v| v.iter().zip(&diag).map(|(a, d)| a / d).collect(),
            &b,
            1e-12,
            30,
            200,
        );
        assert!(rep.converged, "{rep:?}");
        let ax = crate::grid::matvec(&a, &x);
        let res: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
        assert!(res.sqrt() < 1e-10);
    }

    #[test]
    fn complex_rhs_solve() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let lu = RealLu::new(a.clone()).unwrap();
        let x = lu.solve_complex(&[Complex64::new(1.0, 2.0), Complex64::new(0.0, -1.0)]);
        let r0 = Complex64::new(2.0, 0.0) * x[0] + x[1];
        let r1 = x[0] + Complex64::new(3.0, 0.0) * x[1];
        assert!((r0 - Complex64::new(1.0, 2.0)).norm() < 1e-14);
        assert!((r1 - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!(RealLu::new(DMatrix::zeros(2, 2)).is_err());
    }
}
