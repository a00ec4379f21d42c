//! Transverse growth rates of the line soliton.
//!
//! Substituting `e^{λt} cos(κy)` into `w_y = T w_t + L w` gives
//!
//! ```text
//! −κ² u₁ = A₁ᵘ(u₁, φ) + λ u₂,   −κ² φ = A₁ᵠ(u₁, φ),   −κ² u₂ = A₂ u₂ − λ u₁.
//! ```
//!
//! Eliminating `φ` leaves the Schur complement `S(κ)` on even `u₁`, and
//! eliminating `u₂ = λ (A₂ + κ²)⁻¹ u₁` the symmetric-definite pencil
//! `S(κ) u = −λ² (A₂ + κ²)⁻¹ u`.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fold_matrix, matvec, unfold_to_nodes, FieldRole, Grid1D, Parity, ParityTag};
use crate::linalg::RealLu;
use crate::operators::{a1_ground_state, apply_a1, assemble_a1, assemble_a2, sech, LinOp, Params};

/// Relative margin excluding `κ = 0` and `κ = ω₀`.
pub const BAND_MARGIN: f64 = 1e-3;

/// Unstable mode `e^{λt + it} cos(κy)·(u₁ + i u₂, φ)` on all grid nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstabilityMode {
    pub u1: Vec<f64>,
    pub phi: Vec<f64>,
    pub u2: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthPoint {
    pub kappa: f64,
    pub lambda: f64,
    /// Residual of the unreduced linear system, see [`Instability::certify`].
    pub residual: f64,
    pub mode: InstabilityMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthCurve {
    pub points: Vec<GrowthPoint>,
    /// `(κ, message)` for points where the solve failed.
    pub failures: Vec<(f64, String)>,
    pub omega0: f64,
}

/// Parity-folded operator pieces shared by all `κ`.
pub struct Instability<'g> {
    grid: &'g Grid1D,
    params: Params,
    omega0: f64,
    /// `A₁` blocks on (even u, odd φ), right-half coordinates.
    a11: DMatrix<f64>,
    a12: DMatrix<f64>,
    a21: DMatrix<f64>,
    a22: DMatrix<f64>,
    a2: DMatrix<f64>,
    /// Right-half quadrature weights.
    w: Vec<f64>,
}

impl<'g> Instability<'g> {
    pub fn new(grid: &'g Grid1D, params: &Params) -> Result<Self> {
        let (lam, _, _) = a1_ground_state(grid, params)?;
        let a1 = assemble_a1(grid, params)?.matrix;
        let a2 = assemble_a2(grid, params)?.matrix;
        let m = grid.interior_len();
        let h = m / 2;
        let blk = |r: usize, c: usize| a1.view((r * m, c * m), (m, m)).into_owned();
        Ok(Instability {
            grid,
            params: *params,
            omega0: (-lam).sqrt(),
            a11: fold_matrix(&blk(0, 0), Parity::Even),
            a12: fold_matrix(&blk(0, 1), Parity::Odd),
            a21: fold_matrix(&blk(1, 0), Parity::Even),
            a22: fold_matrix(&blk(1, 1), Parity::Odd),
            a2: fold_matrix(&a2, Parity::Even),
            w: grid.interior_weights()[h..].to_vec(),
        })
    }

    /// Discrete `ω₀` on this grid.
    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    fn shifted(a: &DMatrix<f64>, s: f64) -> DMatrix<f64> {
        let mut b = a.clone();
        for i in 0..b.nrows() {
            b[(i, i)] += s;
        }
        b
    }

    /// `S(κ) = A₁₁ + κ² − A₁₂ (A₂₂ + κ²)⁻¹ A₂₁` on even `u₁` (folded).
    pub fn schur(&self, kappa: f64) -> Result<LinOp> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "transverse wavenumber must be positive, got {kappa}"
            )));
        }
        let k2 = kappa * kappa;
        let lu = RealLu::new(Self::shifted(&self.a22, k2))?;
        let h = self.w.len();
        let mut x = DMatrix::zeros(h, h);
        for j in 0..h {
            let col: Vec<f64> = self.a21.column(j).iter().copied().collect();
            let s = lu.solve(&col);
            x.set_column(j, &nalgebra::DVector::from_vec(s));
        }
        let mut s = Self::shifted(&self.a11, k2) - &self.a12 * x;
        // remove rounding asymmetry in the weighted sense
        for i in 0..h {
            for j in 0..i {
                let a = 0.5 * (self.w[i] * s[(i, j)] + self.w[j] * s[(j, i)]);
                s[(i, j)] = a / self.w[i];
                s[(j, i)] = a / self.w[j];
            }
        }
        Ok(LinOp {
            matrix: s,
            weight: self.w.clone(),
            domain_tags: vec![ParityTag::EVEN],
            block_roles: vec![FieldRole::U1],
            ess_edge: 1.0 + k2,
            nodes: self.grid.interior_nodes()[h..].to_vec(),
            half_length: self.grid.half_length(),
        })
    }

    fn check_band(&self, kappa: f64) -> Result<()> {
        let tol = BAND_MARGIN * self.omega0 * (1.0 - 1e-9);
        if !(kappa >= tol) || (kappa - self.omega0).abs() < tol {
            return Err(Error::InvalidArgument(format!(
                "kappa must lie in (0, omega0) = (0, {:.6}) away from the endpoints by {:.0e}·omega0, got {kappa}",
                self.omega0, BAND_MARGIN
            )));
        }
        Ok(())
    }

    /// Growth rate `λ(κ)` and its mode.
    pub fn growth_rate(&self, kappa: f64) -> Result<GrowthPoint> {
        self.check_band(kappa)?;
        let k2 = kappa * kappa;
        let s = self.schur(kappa)?.matrix;
        let h = self.w.len();
        let sq: Vec<f64> = self.w.iter().map(|v| v.sqrt()).collect();
        let sim = |a: &DMatrix<f64>| {
            let mut b = DMatrix::from_fn(h, h, |i, j| sq[i] * a[(i, j)] / sq[j]);
            b = 0.5 * (&b + b.transpose());
            b
        };
        let hh = Self::shifted(&self.a2, k2);
        let chol = Cholesky::new(sim(&hh))
            .ok_or_else(|| Error::Singular("A2 + kappa^2 is not positive definite".into()))?;
        let l = chol.l();
        let core = l.transpose() * sim(&s) * &l;
        let core = 0.5 * (&core + core.transpose());
        let eig = SymmetricEigen::new(core);
        let (imin, mu) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        if mu >= 0.0 {
            return Err(Error::NoInstability { kappa, mu });
        }
        let z = eig.eigenvectors.column(imin).into_owned();
        let v = &l * z;
        let u0: Vec<f64> = (0..h).map(|i| v[i] / sq[i]).collect();
        // The transformed pencil spans ~N⁸ in magnitude, so the dense value
        // is only a starting point; refine on S u = μ H⁻¹ u directly.
        let h_lu = RealLu::new(hh.clone())?;
        let (mu, mut u) = self.refine_pencil(&s, &h_lu, mu, u0)?;
        if mu >= 0.0 {
            return Err(Error::NoInstability { kappa, mu });
        }
        let lambda = (-mu).sqrt();
        // unit weighted norm on the full line, positive overlap with e^{-x²}
        let x = &self.grid.interior_nodes()[h..];
        let nrm = (2.0 * (0..h).map(|i| self.w[i] * u[i] * u[i]).sum::<f64>()).sqrt();
        let proj: f64 = (0..h).map(|i| self.w[i] * u[i] * (-x[i] * x[i]).exp()).sum();
        let sign = if proj < 0.0 { -1.0 } else { 1.0 };
        u.iter_mut().for_each(|a| *a *= sign / nrm);

        let u2 = h_lu.solve(&u).into_iter().map(|a| lambda * a).collect::<Vec<_>>();
        let rhs: Vec<f64> = matvec(&self.a21, &u).into_iter().map(|a| -a).collect();
        let phi = RealLu::new(Self::shifted(&self.a22, k2))?.solve(&rhs);
        let n = self.grid.len();
        let mode = InstabilityMode {
            u1: unfold_to_nodes(&u, Parity::Even, n),
            phi: unfold_to_nodes(&phi, Parity::Odd, n),
            u2: unfold_to_nodes(&u2, Parity::Even, n),
        };
        let residual = self.certify(kappa, lambda, &mode);
        Ok(GrowthPoint {
            kappa,
            lambda,
            residual,
            mode,
        })
    }

    /// Inverse iteration with a fixed shift on `S u = μ H⁻¹ u`, finished by a
    /// weighted Rayleigh quotient.
    fn refine_pencil(&self, s: &DMatrix<f64>, h_lu: &RealLu, mu0: f64, mut u: Vec<f64>) -> Result<(f64, Vec<f64>)> {
        let n = u.len();
        let h_inv = |v: &[f64]| h_lu.solve(v);
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            m.set_column(j, &nalgebra::DVector::from_vec(h_inv(&e)));
        }
        let shifted = RealLu::new(s - &m * mu0)?;
        let winner = |a: &[f64], b: &[f64]| -> f64 { (0..n).map(|i| self.w[i] * a[i] * b[i]).sum() };
        let rq = |u: &[f64]| winner(u, &matvec(s, u)) / winner(u, &matvec(&m, u));
        let mut mu = rq(&u);
        for _ in 0..20 {
            let next = shifted.solve(&matvec(&m, &u));
            let nrm = winner(&next, &next).sqrt();
            u = next.into_iter().map(|a| a / nrm).collect();
            let new_mu = rq(&u);
            let done = (new_mu - mu).abs() <= 1e-15 * mu.abs().max(1.0);
            mu = new_mu;
            if done {
                break;
            }
        }
        Ok((mu, u))
    }

    /// Residual of the unreduced system, evaluated on full node fields with
    /// the directly applied operators:
    /// `‖(A₁ + κ²)(u₁,φ) + λ(u₂,0)‖ + ‖(A₂ + κ²)u₂ − λu₁‖`, relative to the
    /// size of the terms.
    pub fn certify(&self, kappa: f64, lambda: f64, mode: &InstabilityMode) -> f64 {
        let g = self.grid;
        let k2 = kappa * kappa;
        let x = g.nodes();
        let n = g.len();
        let (r1, r2) = apply_a1(&mode.u1, &mode.phi, g, &self.params);
        let d2u2 = g.apply_d2(&mode.u2);
        let beta = self.params.phi_weight();
        let mut res = 0.0;
        let mut scale = 0.0;
        for i in 1..n - 1 {
            let a2u2 = mode.u2[i] - d2u2[i] - 2.0 * sech(x[i]).powi(2) * mode.u2[i];
            let e1 = r1[i] + k2 * mode.u1[i] + lambda * mode.u2[i];
            let e2 = r2[i] + k2 * mode.phi[i];
            let e3 = a2u2 + k2 * mode.u2[i] - lambda * mode.u1[i];
            let w = g.weights()[i];
            res += w * (e1 * e1 + beta * e2 * e2 + e3 * e3);
            scale += w * (r1[i].powi(2) + beta * r2[i].powi(2) + a2u2 * a2u2 + (lambda * mode.u1[i]).powi(2));
        }
        (res / scale.max(f64::MIN_POSITIVE)).sqrt()
    }

    pub fn growth_curve(&self, kappas: &[f64]) -> GrowthCurve {
        let mut curve = GrowthCurve {
            points: Vec::new(),
            failures: Vec::new(),
            omega0: self.omega0,
        };
        for &k in kappas {
            match self.growth_rate(k) {
                Ok(p) => curve.points.push(p),
                Err(e) => curve.failures.push((k, e.to_string())),
            }
        }
        curve
    }
}

pub fn schur_s(kappa: f64, grid: &Grid1D, params: &Params) -> Result<LinOp> {
    Instability::new(grid, params)?.schur(kappa)
}

pub fn growth_rate(kappa: f64, grid: &Grid1D, params: &Params) -> Result<GrowthPoint> {
    Instability::new(grid, params)?.growth_rate(kappa)
}

pub fn growth_curve(kappas: &[f64], grid: &Grid1D, params: &Params) -> Result<GrowthCurve> {
    Ok(Instability::new(grid, params)?.growth_curve(kappas))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, parity_defect, Scheme};
    use crate::operators::{compute_point_spectrum, Subspace};

    fn setup(n: usize) -> Grid1D {
        build_grid(20.0, n, Scheme::ChebyshevMapped).unwrap()
    }

    #[test]
    fn schur_is_weighted_symmetric_and_rejects_nonpositive_kappa() {
        let g = setup(128);
        let inst = Instability::new(&g, &Params::default()).unwrap();
        assert!(inst.schur(0.0).is_err());
        assert!(inst.schur(-1.0).is_err());
        assert!(inst.schur(0.7).unwrap().symmetry_defect() < 1e-10);
    }

    #[test]
    fn schur_is_singular_at_the_bifurcation_frequency() {
        let g = setup(256);
        let inst = Instability::new(&g, &Params::default()).unwrap();
        let s = inst.schur(inst.omega0()).unwrap();
        let e = compute_point_spectrum(&s, Subspace::Full, 1).unwrap();
        assert!(e.eigenvalues[0].abs() < 1e-6, "{}", e.eigenvalues[0]);
        // below ω₀ the negative direction persists, above it is gone
        let below = compute_point_spectrum(&inst.schur(0.9 * inst.omega0()).unwrap(), Subspace::Full, 1).unwrap();
        assert!(below.eigenvalues[0] < 0.0);
        let above = inst.schur(1.1 * inst.omega0()).unwrap();
        let sp = crate::operators::localized_spectrum(&above, Subspace::Full).unwrap();
        assert!(sp.eigenvalues.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn growth_rate_mid_band() {
        let g = setup(256);
        let inst = Instability::new(&g, &Params::default()).unwrap();
        let p = inst.growth_rate(0.5 * inst.omega0()).unwrap();
        assert!((p.lambda - 0.9476).abs() < 1e-3, "{}", p.lambda);
        assert!(p.residual < 1e-7, "{}", p.residual);
        assert!(parity_defect(&p.mode.u1, Parity::Even) < 1e-14);
        assert!(parity_defect(&p.mode.u2, Parity::Even) < 1e-14);
        assert!(parity_defect(&p.mode.phi, Parity::Odd) < 1e-14);
    }

    #[test]
    fn out_of_band_inputs() {
        let g = setup(128);
        let inst = Instability::new(&g, &Params::default()).unwrap();
        let w0 = inst.omega0();
        assert!(matches!(inst.growth_rate(0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(inst.growth_rate(w0), Err(Error::InvalidArgument(_))));
        assert!(matches!(inst.growth_rate(1.2 * w0), Err(Error::NoInstability { .. })));
        assert!(inst.growth_rate(0.999 * w0).is_ok());
    }

    #[test]
    fn empty_curve() {
        let g = setup(64);
        let c = growth_curve(&[], &g, &Params::default()).unwrap();
        assert!(c.points.is_empty() && c.failures.is_empty());
    }
}
