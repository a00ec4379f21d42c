//! Periodic solitons bifurcating from the line soliton.
//!
//! Steady solutions `A = e^{it} u(x, y)` with real `u` and mean flow `φ`
//! satisfy
//!
//! ```text
//! u_yy = −u_xx + u − (γ₁u² + γ₂φ_x) u,     φ_yy = −γ₃φ_xx + γ₃(u²)_x .
//! ```
//!
//! We expand in `cos(nY)`, `Y = ωy`, `n = 0..=M`, and solve for the deviation
//! from the line soliton `(sech, tanh)` together with the frequency `ω`,
//! fixing the amplitude `s` of the first mode along the `ω₀` eigenfield of
//! `A₁`. The zeroth mean-flow mode is carried as `φ₀ₓ` (the star space), so
//! its equation is used in the integrated form `φ₀ₓ = P₀[u²]`.
//!
//! All fields are stored on the parity-folded right half of the grid; the
//! Newton corrections use GMRES with a block preconditioner built from the
//! linearization at the line soliton.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fold_field, parity_defect, unfold_to_nodes, FourierRing, Grid1D, Parity, ReducedGrid, RingParity, Scheme};
use crate::linalg::{gmres, RealLu};
use crate::operators::{a1_ground_state, assemble_a1, sech, Params, Subspace};

pub const DEFAULT_MODES: usize = 16;
pub const MIN_MODES: usize = 8;
pub const MAX_NEWTON_ITERATIONS: usize = 25;
pub const MAX_CONDITION: f64 = 1e12;
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Cosine-series steady state on all grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyField2D {
    /// `u[n]` is the coefficient of `cos(nY)`; all even in `x`.
    pub u: Vec<Vec<f64>>,
    /// `phi[n]` is the coefficient of `cos(nY)`; all odd in `x`. `phi[0]` is
    /// reconstructed from `phi0_x` by odd integration and need not decay.
    pub phi: Vec<Vec<f64>>,
    /// `∂ₓφ₀`, the representation of the zeroth mean-flow mode.
    pub phi0_x: Vec<f64>,
    pub omega: f64,
}

impl SteadyField2D {
    pub fn modes(&self) -> usize {
        self.u.len() - 1
    }

    /// Largest odd part of any `u_n` / even part of any `φ_n`, `n ≥ 1`, and
    /// of `u₀`, `∂ₓφ₀` relative to their parity.
    pub fn parity_defect(&self) -> f64 {
        let mut d = parity_defect(&self.u[0], Parity::Even).max(parity_defect(&self.phi0_x, Parity::Even));
        d = d.max(parity_defect(&self.phi[0], Parity::Odd));
        for k in 1..self.u.len() {
            d = d.max(parity_defect(&self.u[k], Parity::Even));
            d = d.max(parity_defect(&self.phi[k], Parity::Odd));
        }
        d
    }

    /// Largest `|u(x, y) − u(x, −y)|` over the nodes and `samples` points of
    /// one transverse period.
    pub fn reversibility_defect(&self, samples: usize) -> f64 {
        let period = 2.0 * std::f64::consts::PI / self.omega;
        let mut d = 0.0f64;
        for j in 0..samples {
            let y = period * j as f64 / samples as f64;
            for i in 0..self.u[0].len() {
                d = d.max((self.u_at(i, y) - self.u_at(i, -y)).abs());
            }
        }
        d
    }

    /// The line soliton `(sech, tanh)` with `M` empty higher modes.
    pub fn line_soliton(grid: &Grid1D, modes: usize, omega: f64) -> Self {
        let n = grid.len();
        let mut u = vec![vec![0.0; n]; modes + 1];
        let mut phi = vec![vec![0.0; n]; modes + 1];
        u[0] = grid.sample(sech);
        phi[0] = grid.sample(f64::tanh);
        SteadyField2D {
            u,
            phi,
            phi0_x: grid.sample(|x| sech(x).powi(2)),
            omega,
        }
    }

    /// Evaluates `u(x, y)` at node `i` and transverse coordinate `y`.
    pub fn u_at(&self, i: usize, y: f64) -> f64 {
        self.u
            .iter()
            .enumerate()
            .map(|(k, c)| c[i] * (k as f64 * self.omega * y).cos())
            .sum()
    }
}

/// Per-mode residual fields on all nodes (boundary entries zero). `phi[0]`
/// holds the integrated zeroth-mode residual `φ₀ₓ − P₀[u²]`.
#[derive(Debug, Clone)]
pub struct SteadyResidual {
    pub u: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
}

impl SteadyResidual {
    pub fn max_abs(&self) -> f64 {
        self.u
            .iter()
            .chain(&self.phi)
            .flat_map(|f| f.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// One converged branch point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchSample {
    pub s: f64,
    pub field: SteadyField2D,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolitonBranch {
    pub samples: Vec<BranchSample>,
    pub omega0: f64,
    /// Set when continuation stopped before `s_max`.
    pub truncated: bool,
}

/// Result of a Newton correction.
#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub field: SteadyField2D,
    pub iterations: usize,
    pub residual: f64,
    /// Largest LU pivot ratio among the preconditioner blocks.
    pub condition: f64,
}

/// Discretized steady problem on one grid.
pub struct SteadyProblem<'g> {
    grid: &'g Grid1D,
    params: Params,
    modes: usize,
    red: ReducedGrid,
    /// `cos(nY_j)`, `(M+1) × Ny`.
    table: DMatrix<f64>,
    /// `sech` and its profile terms on the right half.
    b: Vec<f64>,
    /// `A₁` on (even u, odd φ), folded.
    a1: DMatrix<f64>,
    omega0: f64,
    /// `ω₀` eigenfield `(ξᵤ, ξᵩ)`, right half.
    xi_u: Vec<f64>,
    xi_phi: Vec<f64>,
}

/// Flat unknown vector: for each mode `n`, `h` values of `u'_n` then `h`
/// values of `φ_n` (`φ'₀ₓ` for `n = 0`); `ω` last.
#[derive(Debug, Clone)]
struct Layout {
    h: usize,
    modes: usize,
}

impl Layout {
    fn len(&self) -> usize {
        2 * self.h * (self.modes + 1) + 1
    }
    fn u(&self, n: usize) -> std::ops::Range<usize> {
        2 * self.h * n..2 * self.h * n + self.h
    }
    fn v(&self, n: usize) -> std::ops::Range<usize> {
        2 * self.h * n + self.h..2 * self.h * (n + 1)
    }
    fn omega(&self) -> usize {
        self.len() - 1
    }
}

impl<'g> SteadyProblem<'g> {
    pub fn new(grid: &'g Grid1D, params: &Params, modes: usize) -> Result<Self> {
        params.validate()?;
        if modes < MIN_MODES {
            return Err(Error::InvalidArgument(format!(
                "need at least {MIN_MODES} transverse modes, got {modes}"
            )));
        }
        let (lam, xu, xp) = a1_ground_state(grid, params)?;
        let omega0 = (-lam).sqrt();
        let ring = FourierRing::new(modes, 2.0 * std::f64::consts::PI / omega0, RingParity::Even)?;
        let red = grid.reduced();
        let b = red.sample(sech);
        let (a1, _) = assemble_a1(grid, params)?.subspace_matrix(Subspace::Tagged)?;
        Ok(SteadyProblem {
            grid,
            params: *params,
            modes,
            table: ring.cosine_table(),
            b,
            a1,
            omega0,
            xi_u: fold_field(&xu),
            xi_phi: fold_field(&xp),
            red,
        })
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn grid(&self) -> &Grid1D {
        self.grid
    }

    /// The `ω₀` eigenfield of `A₁` on all nodes, unit weighted norm.
    pub fn eigenfield(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid.len();
        (
            unfold_to_nodes(&self.xi_u, Parity::Even, n),
            unfold_to_nodes(&self.xi_phi, Parity::Odd, n),
        )
    }

    fn layout(&self) -> Layout {
        Layout {
            h: self.red.len(),
            modes: self.modes,
        }
    }

    fn check_field(&self, f: &SteadyField2D) -> Result<()> {
        let n = self.grid.len();
        if f.modes() != self.modes || f.phi.len() != self.modes + 1 {
            return Err(Error::InvalidArgument(format!(
                "field has {} modes, problem has {}",
                f.modes(),
                self.modes
            )));
        }
        if f.u.iter().chain(&f.phi).any(|c| c.len() != n) || f.phi0_x.len() != n {
            return Err(Error::InvalidArgument("field length does not match the grid".into()));
        }
        if !(f.omega > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "frequency must be positive, got {}",
                f.omega
            )));
        }
        Ok(())
    }

    fn pack(&self, f: &SteadyField2D) -> Vec<f64> {
        let l = self.layout();
        let x = self.grid.nodes();
        let mut z = vec![0.0; l.len()];
        let u0: Vec<f64> = f.u[0].iter().zip(x).map(|(v, &x)| v - sech(x)).collect();
        let p0: Vec<f64> = f.phi0_x.iter().zip(x).map(|(v, &x)| v - sech(x).powi(2)).collect();
        z[l.u(0)].copy_from_slice(&fold_field(&u0));
        z[l.v(0)].copy_from_slice(&fold_field(&p0));
        for k in 1..=self.modes {
            z[l.u(k)].copy_from_slice(&fold_field(&f.u[k]));
            z[l.v(k)].copy_from_slice(&fold_field(&f.phi[k]));
        }
        z[l.omega()] = f.omega;
        z
    }

    fn unpack(&self, z: &[f64]) -> SteadyField2D {
        let l = self.layout();
        let g = self.grid;
        let n = g.len();
        let x = g.nodes();
        let du0 = unfold_to_nodes(&z[l.u(0)], Parity::Even, n);
        let dp0 = unfold_to_nodes(&z[l.v(0)], Parity::Even, n);
        let dphi0 = g.antiderivative_odd(&dp0);
        let mut u = Vec::with_capacity(self.modes + 1);
        let mut phi = Vec::with_capacity(self.modes + 1);
        u.push((0..n).map(|i| sech(x[i]) + du0[i]).collect());
        phi.push((0..n).map(|i| x[i].tanh() + dphi0[i]).collect());
        for k in 1..=self.modes {
            u.push(unfold_to_nodes(&z[l.u(k)], Parity::Even, n));
            phi.push(unfold_to_nodes(&z[l.v(k)], Parity::Odd, n));
        }
        SteadyField2D {
            u,
            phi,
            phi0_x: (0..n).map(|i| sech(x[i]).powi(2) + dp0[i]).collect(),
            omega: z[l.omega()],
        }
    }

    /// Physical-space samples `[(j, a)]` of `U` and `Φₓ` on the `Y`-grid.
    fn synthesize(&self, z: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let l = self.layout();
        let h = l.h;
        let mut cu = DMatrix::zeros(self.modes + 1, h);
        let mut cp = DMatrix::zeros(self.modes + 1, h);
        for a in 0..h {
            cu[(0, a)] = self.b[a] + z[l.u(0)][a];
            cp[(0, a)] = self.b[a] * self.b[a] + z[l.v(0)][a];
        }
        for k in 1..=self.modes {
            let dphi = crate::grid::matvec(&self.red.d1_odd, &z[l.v(k)]);
            for a in 0..h {
                cu[(k, a)] = z[l.u(k)][a];
                cp[(k, a)] = dphi[a];
            }
        }
        (self.table.transpose() * cu, self.table.transpose() * cp)
    }

    /// Cosine coefficients of samples on the `Y`-grid.
    fn project(&self, f: &DMatrix<f64>) -> DMatrix<f64> {
        let ny = self.table.ncols() as f64;
        let mut p = &self.table * f * (2.0 / ny);
        for a in 0..p.ncols() {
            p[(0, a)] *= 0.5;
        }
        p
    }

    fn amplitude_of(&self, z: &[f64]) -> f64 {
        let l = self.layout();
        let beta = self.params.phi_weight();
        let (u1, p1) = (&z[l.u(1)], &z[l.v(1)]);
        2.0 * (0..l.h)
            .map(|a| self.red.w[a] * (u1[a] * self.xi_u[a] + beta * p1[a] * self.xi_phi[a]))
            .sum::<f64>()
    }

    /// Residual vector in the unknown layout; the final entry is the
    /// amplitude constraint.
    fn residual_vec(&self, z: &[f64], s_target: f64) -> Vec<f64> {
        let l = self.layout();
        let h = l.h;
        let Params {
            gamma1: g1,
            gamma2: g2,
            gamma3: g3,
        } = self.params;
        let omega = z[l.omega()];
        let (uu, px) = self.synthesize(z);
        let f = uu.zip_zip_map(&px, &uu, |u, p, _| (g1 * u * u + g2 * p) * u);
        let q = uu.map(|u| u * u);
        let pf = self.project(&f);
        let pq = self.project(&q);
        let mut r = vec![0.0; l.len()];
        let mv = crate::grid::matvec;

        let u0 = &z[l.u(0)];
        let d2u0 = mv(&self.red.d2_even, u0);
        for a in 0..h {
            let b = self.b[a];
            // D2 sech = sech − 2 sech³ exactly
            r[l.u(0)][a] = d2u0[a] + (b - 2.0 * b * b * b) - (b + u0[a]) + pf[(0, a)];
            r[l.v(0)][a] = (b * b + z[l.v(0)][a]) - pq[(0, a)];
        }
        for k in 1..=self.modes {
            let k2w2 = (k * k) as f64 * omega * omega;
            let un = &z[l.u(k)];
            let pn = &z[l.v(k)];
            let d2u = mv(&self.red.d2_even, un);
            let d2p = mv(&self.red.d2_odd, pn);
            let pqk: Vec<f64> = (0..h).map(|a| pq[(k, a)]).collect();
            let dq = mv(&self.red.d1_even, &pqk);
            for a in 0..h {
                r[l.u(k)][a] = -k2w2 * un[a] + d2u[a] - un[a] + pf[(k, a)];
                r[l.v(k)][a] = -k2w2 * pn[a] + g3 * d2p[a] - g3 * dq[a];
            }
        }
        r[l.omega()] = self.amplitude_of(z) - s_target;
        r
    }

    /// Jacobian of [`Self::residual_vec`] at `z` applied to `dz`.
    fn jvp(&self, z: &[f64], uu: &DMatrix<f64>, px: &DMatrix<f64>, dz: &[f64]) -> Vec<f64> {
        let l = self.layout();
        let h = l.h;
        let Params {
            gamma1: g1,
            gamma2: g2,
            gamma3: g3,
        } = self.params;
        let omega = z[l.omega()];
        let dom = dz[l.omega()];
        let mut cdu = DMatrix::zeros(self.modes + 1, h);
        let mut cdp = DMatrix::zeros(self.modes + 1, h);
        for a in 0..h {
            cdu[(0, a)] = dz[l.u(0)][a];
            cdp[(0, a)] = dz[l.v(0)][a];
        }
        for k in 1..=self.modes {
            let dphi = crate::grid::matvec(&self.red.d1_odd, &dz[l.v(k)]);
            for a in 0..h {
                cdu[(k, a)] = dz[l.u(k)][a];
                cdp[(k, a)] = dphi[a];
            }
        }
        let du = self.table.transpose() * cdu;
        let dp = self.table.transpose() * cdp;
        let mut df = DMatrix::zeros(du.nrows(), h);
        let mut dq = DMatrix::zeros(du.nrows(), h);
        for j in 0..du.nrows() {
            for a in 0..h {
                let (u, p) = (uu[(j, a)], px[(j, a)]);
                df[(j, a)] = (3.0 * g1 * u * u + g2 * p) * du[(j, a)] + g2 * u * dp[(j, a)];
                dq[(j, a)] = 2.0 * u * du[(j, a)];
            }
        }
        let pf = self.project(&df);
        let pq = self.project(&dq);
        let mv = crate::grid::matvec;
        let mut r = vec![0.0; l.len()];
        let du0 = &dz[l.u(0)];
        let d2u0 = mv(&self.red.d2_even, du0);
        for a in 0..h {
            r[l.u(0)][a] = d2u0[a] - du0[a] + pf[(0, a)];
            r[l.v(0)][a] = dz[l.v(0)][a] - pq[(0, a)];
        }
        for k in 1..=self.modes {
            let kk = (k * k) as f64;
            let k2w2 = kk * omega * omega;
            let (un, pn) = (&dz[l.u(k)], &dz[l.v(k)]);
            let (zu, zp) = (&z[l.u(k)], &z[l.v(k)]);
            let d2u = mv(&self.red.d2_even, un);
            let d2p = mv(&self.red.d2_odd, pn);
            let pqk: Vec<f64> = (0..h).map(|a| pq[(k, a)]).collect();
            let dqx = mv(&self.red.d1_even, &pqk);
            for a in 0..h {
                r[l.u(k)][a] = -k2w2 * un[a] + d2u[a] - un[a] + pf[(k, a)] - 2.0 * kk * omega * dom * zu[a];
                r[l.v(k)][a] = -k2w2 * pn[a] + g3 * d2p[a] - g3 * dqx[a] - 2.0 * kk * omega * dom * zp[a];
            }
        }
        r[l.omega()] = self.amplitude_of(dz);
        r
    }

    /// Per-mode residual of `field` (no amplitude constraint).
    pub fn steady_residual(&self, field: &SteadyField2D) -> Result<SteadyResidual> {
        self.check_field(field)?;
        let z = self.pack(field);
        let r = self.residual_vec(&z, 0.0);
        let l = self.layout();
        let n = self.grid.len();
        let mut out = SteadyResidual {
            u: Vec::new(),
            phi: Vec::new(),
        };
        for k in 0..=self.modes {
            out.u.push(unfold_to_nodes(&r[l.u(k)], Parity::Even, n));
            let par = if k == 0 { Parity::Even } else { Parity::Odd };
            out.phi.push(unfold_to_nodes(&r[l.v(k)], par, n));
        }
        Ok(out)
    }

    /// Weighted projection of the first mode onto the `ω₀` eigenfield.
    pub fn amplitude(&self, field: &SteadyField2D) -> Result<f64> {
        self.check_field(field)?;
        Ok(self.amplitude_of(&self.pack(field)))
    }

    /// Weighted norm of the deviation from the line soliton, summed over
    /// modes (`φ₀` enters through `∂ₓφ₀`).
    pub fn perturbation_norm(&self, field: &SteadyField2D) -> Result<f64> {
        self.check_field(field)?;
        let z = self.pack(field);
        let l = self.layout();
        let beta = self.params.phi_weight();
        let sq = |v: &[f64], c: f64| 2.0 * c * v.iter().zip(&self.red.w).map(|(a, w)| w * a * a).sum::<f64>();
        let mut total = sq(&z[l.u(0)], 1.0) + sq(&z[l.v(0)], 1.0);
        for k in 1..=self.modes {
            total += sq(&z[l.u(k)], 1.0) + sq(&z[l.v(k)], beta);
        }
        Ok(total.sqrt())
    }

    /// Tangent predictor `(sech, tanh) + s cos(Y) ξ` at `ω₀`.
    pub fn predictor(&self, s: f64) -> SteadyField2D {
        let mut f = SteadyField2D::line_soliton(self.grid, self.modes, self.omega0);
        let (xu, xp) = self.eigenfield();
        f.u[1] = xu.iter().map(|v| s * v).collect();
        f.phi[1] = xp.iter().map(|v| s * v).collect();
        f
    }

    fn preconditioner(&self, z: &[f64]) -> Result<(Preconditioner, f64)> {
        let l = self.layout();
        let h = l.h;
        let omega = z[l.omega()];
        let beta = self.params.phi_weight();
        // mode 0 with the mean flow eliminated: 1 − ∂ₓ² − 3(γ₁ + γ₂) sech²
        let c0 = 3.0 * (self.params.gamma1 + self.params.gamma2);
        let mut k0 = -self.red.d2_even.clone();
        for a in 0..h {
            k0[(a, a)] += 1.0 - c0 * self.b[a] * self.b[a];
        }
        let mode0 = RealLu::new(k0)?;
        let mut cond = mode0.pivot_ratio();
        let mut blocks = Vec::with_capacity(self.modes);
        for k in 1..=self.modes {
            let kk = (k * k) as f64 * omega * omega;
            let dim = if k == 1 { 2 * h + 1 } else { 2 * h };
            let mut j = DMatrix::zeros(dim, dim);
            j.view_mut((0, 0), (2 * h, 2 * h)).copy_from(&(-&self.a1));
            for a in 0..2 * h {
                j[(a, a)] -= kk;
            }
            if k == 1 {
                for a in 0..h {
                    j[(a, 2 * h)] = -2.0 * omega * z[l.u(1)][a];
                    j[(h + a, 2 * h)] = -2.0 * omega * z[l.v(1)][a];
                    j[(2 * h, a)] = 2.0 * self.red.w[a] * self.xi_u[a];
                    j[(2 * h, h + a)] = 2.0 * beta * self.red.w[a] * self.xi_phi[a];
                }
            }
            let lu = RealLu::new(j)?;
            cond = cond.max(lu.pivot_ratio());
            blocks.push(lu);
        }
        Ok((
            Preconditioner {
                layout: l,
                mode0,
                blocks,
                b: self.b.clone(),
                gamma2: self.params.gamma2,
            },
            cond,
        ))
    }

    /// Bordered Newton correction onto `amplitude = s_target`.
    pub fn newton_correct(&self, field: &SteadyField2D, s_target: f64, tol: f64) -> Result<NewtonOutcome> {
        self.check_field(field)?;
        let mut z = self.pack(field);
        let rmax = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut r = self.residual_vec(&z, s_target);
        let mut res = rmax(&r);
        if res < tol {
            return Ok(NewtonOutcome {
                field: self.unpack(&z),
                iterations: 0,
                residual: res,
                condition: 1.0,
            });
        }
        let (pc, condition) = self.preconditioner(&z)?;
        if condition > MAX_CONDITION {
            return Err(Error::IllConditioned { estimate: condition });
        }
        for it in 1..=MAX_NEWTON_ITERATIONS {
            let (uu, px) = self.synthesize(&z);
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let (dz, _) = gmres(
                |v| self.jvp(&z, &uu, &px, v),
                |v| pc.apply(v),
                &rhs,
                1e-9,
                60,
                600,
            );
            z.iter_mut().zip(&dz).for_each(|(a, b)| *a += b);
            r = self.residual_vec(&z, s_target);
            res = rmax(&r);
            if !res.is_finite() {
                break;
            }
            if res < tol {
                return Ok(NewtonOutcome {
                    field: self.unpack(&z),
                    iterations: it,
                    residual: res,
                    condition,
                });
            }
        }
        Err(Error::NonConvergence {
            iterations: MAX_NEWTON_ITERATIONS,
            residual: res,
        })
    }

    /// Continues the branch from the line soliton to `s_max` in steps `ds`.
    pub fn continue_branch(&self, s_max: f64, ds: f64, tol: f64) -> Result<SolitonBranch> {
        if !(ds > 0.0 && ds <= s_max && s_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < ds <= s_max, got ds = {ds}, s_max = {s_max}"
            )));
        }
        let start = SteadyField2D::line_soliton(self.grid, self.modes, self.omega0);
        let res0 = self.steady_residual(&start)?.max_abs();
        let mut branch = SolitonBranch {
            samples: vec![BranchSample {
                s: 0.0,
                field: start,
                residual: res0,
            }],
            omega0: self.omega0,
            truncated: false,
        };
        let steps = (s_max / ds - 1e-9).ceil() as usize;
        let targets: Vec<f64> = (1..=steps).map(|j| (j as f64 * ds).min(s_max)).collect();
        for &target in &targets {
            match self.advance(&mut branch, target, tol) {
                Ok(()) => {}
                Err(_) => {
                    // one retry through the midpoint
                    let prev = branch.samples.last().map(|p| p.s).unwrap_or(0.0);
                    let mid = 0.5 * (prev + target);
                    if self.advance(&mut branch, mid, tol).is_err() {
                        branch.truncated = true;
                        return Ok(branch);
                    }
                    if self.advance(&mut branch, target, tol).is_err() {
                        branch.truncated = true;
                        return Ok(branch);
                    }
                }
            }
        }
        Ok(branch)
    }

    /// Predicts and corrects one step; appends the sample on success.
    fn advance(&self, branch: &mut SolitonBranch, target: f64, tol: f64) -> Result<()> {
        let guess = self.secant_predictor(branch, target);
        let out = self.newton_correct(&guess, target, tol)?;
        let certified = self.steady_residual(&out.field)?.max_abs();
        if certified >= tol {
            return Err(Error::NonConvergence {
                iterations: out.iterations,
                residual: certified,
            });
        }
        branch.samples.push(BranchSample {
            s: target,
            field: out.field,
            residual: certified,
        });
        Ok(())
    }

    fn secant_predictor(&self, branch: &SolitonBranch, target: f64) -> SteadyField2D {
        let n = branch.samples.len();
        if n < 2 {
            return self.predictor(target);
        }
        let a = &branch.samples[n - 2];
        let b = &branch.samples[n - 1];
        let t = (target - b.s) / (b.s - a.s);
        let za = self.pack(&a.field);
        let zb = self.pack(&b.field);
        let z: Vec<f64> = zb.iter().zip(&za).map(|(y, x)| y + t * (y - x)).collect();
        self.unpack(&z)
    }
}

struct Preconditioner {
    layout: Layout,
    mode0: RealLu,
    blocks: Vec<RealLu>,
    b: Vec<f64>,
    gamma2: f64,
}

impl Preconditioner {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let l = &self.layout;
        let h = l.h;
        let mut out = vec![0.0; r.len()];
        let (ru, rp) = (&r[l.u(0)], &r[l.v(0)]);
        let rhs: Vec<f64> = (0..h).map(|a| -(ru[a] - self.gamma2 * self.b[a] * rp[a])).collect();
        let du = self.mode0.solve(&rhs);
        for a in 0..h {
            out[l.u(0)][a] = du[a];
            out[l.v(0)][a] = rp[a] + 2.0 * self.b[a] * du[a];
        }
        for (idx, lu) in self.blocks.iter().enumerate() {
            let k = idx + 1;
            let mut rhs: Vec<f64> = r[l.u(k).start..l.v(k).end].to_vec();
            if k == 1 {
                rhs.push(r[l.omega()]);
            }
            let sol = lu.solve(&rhs);
            out[l.u(k).start..l.v(k).end].copy_from_slice(&sol[..2 * h]);
            if k == 1 {
                out[l.omega()] = sol[2 * h];
            }
        }
        out
    }
}

pub fn steady_residual(field: &SteadyField2D, grid: &Grid1D, params: &Params) -> Result<SteadyResidual> {
    SteadyProblem::new(grid, params, field.modes())?.steady_residual(field)
}

pub fn continue_branch(s_max: f64, ds: f64, grid: &Grid1D, params: &Params, modes: usize) -> Result<SolitonBranch> {
    SteadyProblem::new(grid, params, modes)?.continue_branch(s_max, ds, DEFAULT_TOLERANCE)
}

/// Grid description stored with serialized branches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub scheme: Scheme,
    pub half_length: f64,
    pub nodes: usize,
    pub map: f64,
    pub modes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDoc {
    pub s: f64,
    pub omega: f64,
    /// Row-major over `(mode, node)`.
    pub u_modes: Vec<f64>,
    /// Row-major over `(mode, node)`.
    pub phi_modes: Vec<f64>,
    pub phi0_x: Vec<f64>,
    pub residual: f64,
}

/// JSON document for a branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchDocument {
    pub params: Params,
    pub grid: GridMeta,
    pub omega0: f64,
    pub truncated: bool,
    pub samples: Vec<SampleDoc>,
}

impl BranchDocument {
    pub fn new(branch: &SolitonBranch, grid: &Grid1D, params: &Params) -> Self {
        let modes = branch.samples.first().map(|s| s.field.modes()).unwrap_or(0);
        BranchDocument {
            params: *params,
            grid: GridMeta {
                scheme: grid.scheme(),
                half_length: grid.half_length(),
                nodes: grid.len(),
                map: grid.map_parameter(),
                modes,
            },
            omega0: branch.omega0,
            truncated: branch.truncated,
            samples: branch
                .samples
                .iter()
                .map(|s| SampleDoc {
                    s: s.s,
                    omega: s.field.omega,
                    u_modes: s.field.u.concat(),
                    phi_modes: s.field.phi.concat(),
                    phi0_x: s.field.phi0_x.clone(),
                    residual: s.residual,
                })
                .collect(),
        }
    }

    pub fn to_branch(&self) -> SolitonBranch {
        let n = self.grid.nodes;
        let split = |v: &Vec<f64>| v.chunks(n).map(|c| c.to_vec()).collect::<Vec<_>>();
        SolitonBranch {
            omega0: self.omega0,
            truncated: self.truncated,
            samples: self
                .samples
                .iter()
                .map(|s| BranchSample {
                    s: s.s,
                    residual: s.residual,
                    field: SteadyField2D {
                        u: split(&s.u_modes),
                        phi: split(&s.phi_modes),
                        phi0_x: s.phi0_x.clone(),
                        omega: s.omega,
                    },
                })
                .collect(),
        }
    }
}
