//! The first-order spatial-dynamics operator `L`, its resolvent on the
//! imaginary axis, and the zero-mode solve `Lw = −N(w†)`.
//!
//! Writing `q = (u₁, u₂, φ)` and `p = (v₁, v₂, ψ)`, the linear part reads
//! `L(q, p) = (p, 𝔄q)` with `𝔄 = A₁ ⊕ A₂` (the `(u₁, φ)` rows of `A₁`, `A₂` on
//! `u₂`). Hence `(L − ik)w = w†` decouples into `(𝔄 + k²) q = p† + ik q†`
//! followed by `p = q† + ik q`.

use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::ops::Neg;

use crate::error::{Error, Result};
use crate::grid::{
    matvec, parity_defect, parity_project, unfold_to_nodes, FieldRole, Grid1D, Parity,
};
use crate::linalg::RealLu;
use crate::operators::{a1_ground_state, assemble_a1, assemble_a2, sech, LinOp, Params};

/// Six node fields `(u₁, v₁, u₂, v₂, φ, ψ)`; parities (even, even, even,
/// even, odd, odd) in the reflection-symmetric subspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector<T = f64> {
    pub u1: Vec<T>,
    pub v1: Vec<T>,
    pub u2: Vec<T>,
    pub v2: Vec<T>,
    pub phi: Vec<T>,
    pub psi: Vec<T>,
}

pub type ComplexState = StateVector<Complex64>;

pub const STATE_ROLES: [FieldRole; 6] = [
    FieldRole::U1,
    FieldRole::V1,
    FieldRole::U2,
    FieldRole::V2,
    FieldRole::Phi,
    FieldRole::Psi,
];

impl<T: Copy + Default + Neg<Output = T>> StateVector<T> {
    pub fn zeros(n: usize) -> Self {
        let z = vec![T::default(); n];
        StateVector {
            u1: z.clone(),
            v1: z.clone(),
            u2: z.clone(),
            v2: z.clone(),
            phi: z.clone(),
            psi: z,
        }
    }

    pub fn len(&self) -> usize {
        self.u1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u1.is_empty()
    }

    pub fn fields(&self) -> [&Vec<T>; 6] {
        [&self.u1, &self.v1, &self.u2, &self.v2, &self.phi, &self.psi]
    }

    pub fn fields_mut(&mut self) -> [&mut Vec<T>; 6] {
        [
            &mut self.u1,
            &mut self.v1,
            &mut self.u2,
            &mut self.v2,
            &mut self.phi,
            &mut self.psi,
        ]
    }

    pub fn from_fields(f: [Vec<T>; 6]) -> Self {
        let [u1, v1, u2, v2, phi, psi] = f;
        StateVector {
            u1,
            v1,
            u2,
            v2,
            phi,
            psi,
        }
    }

    /// The reverser `S(u₁,v₁,u₂,v₂,φ,ψ) = (u₁,−v₁,u₂,−v₂,φ,−ψ)`.
    pub fn reverse(&self) -> Self {
        let neg = |v: &Vec<T>| v.iter().map(|&x| -x).collect::<Vec<T>>();
        StateVector {
            u1: self.u1.clone(),
            v1: neg(&self.v1),
            u2: self.u2.clone(),
            v2: neg(&self.v2),
            phi: self.phi.clone(),
            psi: neg(&self.psi),
        }
    }

    /// The reflection `R`: `x ↦ −x` on every field, with `φ, ψ` also negated.
    pub fn reflect(&self) -> Self {
        let rev = |v: &Vec<T>, s: bool| {
            v.iter()
                .rev()
                .map(|&x| if s { -x } else { x })
                .collect::<Vec<T>>()
        };
        StateVector {
            u1: rev(&self.u1, false),
            v1: rev(&self.v1, false),
            u2: rev(&self.u2, false),
            v2: rev(&self.v2, false),
            phi: rev(&self.phi, true),
            psi: rev(&self.psi, true),
        }
    }
}

impl StateVector<f64> {
    pub fn to_complex(&self) -> ComplexState {
        let c = |v: &Vec<f64>| v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        StateVector::from_fields(self.fields().map(c))
    }

    /// Largest parity defect over the six fields relative to the symmetric tags.
    pub fn parity_defect(&self) -> f64 {
        self.fields()
            .iter()
            .zip(STATE_ROLES)
            .map(|(f, r)| parity_defect(f, r.symmetric_tag().parity))
            .fold(0.0, f64::max)
    }

    pub fn project_symmetric(&self) -> Self {
        let mut out = self.clone();
        for (f, r) in out.fields_mut().into_iter().zip(STATE_ROLES) {
            *f = parity_project(f, r.symmetric_tag().parity);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.fields()
            .iter()
            .flat_map(|f| f.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl ComplexState {
    pub fn re(&self) -> StateVector<f64> {
        StateVector::from_fields(self.fields().map(|f| f.iter().map(|z| z.re).collect()))
    }

    pub fn im(&self) -> StateVector<f64> {
        StateVector::from_fields(self.fields().map(|f| f.iter().map(|z| z.im).collect()))
    }

    pub fn from_parts(re: &StateVector<f64>, im: &StateVector<f64>) -> Self {
        let mut out = ComplexState::zeros(re.len());
        for ((o, a), b) in out.fields_mut().into_iter().zip(re.fields()).zip(im.fields()) {
            *o = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
        }
        out
    }

    pub fn scale(&self, c: Complex64) -> Self {
        StateVector::from_fields(self.fields().map(|f| f.iter().map(|z| z * c).collect()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (o, b) in out.fields_mut().into_iter().zip(other.fields()) {
            o.iter_mut().zip(b).for_each(|(x, y)| *x -= y);
        }
        out
    }
}

/// Weighted `L²` norm over all six fields, interior nodes only.
pub fn state_norm(s: &ComplexState, grid: &Grid1D) -> f64 {
    let w = grid.weights();
    let n = grid.len();
    s.fields()
        .iter()
        .map(|f| (1..n - 1).map(|i| w[i] * f[i].norm_sqr()).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// The six-block interior matrix of `L`, blocks ordered `(u₁,v₁,u₂,v₂,φ,ψ)`.
///
/// `L` is not symmetric; the weight carried by the returned [`LinOp`] is the
/// block quadrature weight (`γ₂/(2γ₃)` on the `φ, ψ` blocks) and `ess_edge` is
/// not meaningful (NaN).
pub fn assemble_l(grid: &Grid1D, params: &Params) -> Result<LinOp> {
    let a1 = assemble_a1(grid, params)?;
    let a2 = assemble_a2(grid, params)?;
    let m = grid.interior_len();
    let mut l = DMatrix::zeros(6 * m, 6 * m);
    // block indices
    let (u1, v1, u2, v2, ph, ps) = (0, m, 2 * m, 3 * m, 4 * m, 5 * m);
    for i in 0..m {
        l[(u1 + i, v1 + i)] = 1.0;
        l[(u2 + i, v2 + i)] = 1.0;
        l[(ph + i, ps + i)] = 1.0;
    }
    l.view_mut((v1, u1), (m, m)).copy_from(&a1.matrix.view((0, 0), (m, m)));
    l.view_mut((v1, ph), (m, m)).copy_from(&a1.matrix.view((0, m), (m, m)));
    l.view_mut((ps, u1), (m, m)).copy_from(&a1.matrix.view((m, 0), (m, m)));
    l.view_mut((ps, ph), (m, m)).copy_from(&a1.matrix.view((m, m), (m, m)));
    l.view_mut((v2, u2), (m, m)).copy_from(&a2.matrix);
    let w = grid.interior_weights();
    let beta = params.phi_weight();
    let weight = (0..6)
        .flat_map(|b| w.iter().map(move |v| if b >= 4 { beta * v } else { *v }))
        .collect();
    Ok(LinOp {
        matrix: l,
        weight,
        domain_tags: STATE_ROLES.iter().map(|r| r.symmetric_tag()).collect(),
        block_roles: STATE_ROLES.to_vec(),
        ess_edge: f64::NAN,
        nodes: grid.interior_nodes().to_vec(),
        half_length: grid.half_length(),
    })
}

/// `Lw` on node fields; rows are evaluated on interior nodes and the boundary
/// entries of the result are zero. `φ` may be star-decaying.
pub fn apply_l(w: &StateVector<f64>, grid: &Grid1D, params: &Params) -> StateVector<f64> {
    let n = grid.len();
    let x = grid.nodes();
    let (r1, r2) = crate::operators::apply_a1(&w.u1, &w.phi, grid, params);
    let d2u2 = grid.apply_d2(&w.u2);
    let mut out = StateVector::zeros(n);
    for i in 1..n - 1 {
        out.u1[i] = w.v1[i];
        out.v1[i] = r1[i];
        out.u2[i] = w.v2[i];
        out.v2[i] = w.u2[i] - d2u2[i] - 2.0 * sech(x[i]).powi(2) * w.u2[i];
        out.phi[i] = w.psi[i];
        out.psi[i] = r2[i];
    }
    out
}

pub fn apply_l_complex(w: &ComplexState, grid: &Grid1D, params: &Params) -> ComplexState {
    ComplexState::from_parts(&apply_l(&w.re(), grid, params), &apply_l(&w.im(), grid, params))
}

/// Nonlinear part `N(w)` of the perturbed spatial-dynamics system.
///
/// The `v₁` row carries `−γ₁ sech·u₂²` (the cubic `γ₁(u₁²+u₂²)u₁` expanded
/// about `u₁ = sech` contributes `sech·u₂²`, not `sech²·u₂²`).
pub fn apply_n(w: &StateVector<f64>, grid: &Grid1D, params: &Params) -> StateVector<f64> {
    let n = grid.len();
    let x = grid.nodes();
    let Params {
        gamma1: g1,
        gamma2: g2,
        gamma3: g3,
    } = *params;
    let phix = grid.apply_d1(&w.phi);
    let sq: Vec<f64> = (0..n).map(|i| w.u1[i].powi(2) + w.u2[i].powi(2)).collect();
    let dsq = grid.apply_d1(&sq);
    let mut out = StateVector::zeros(n);
    for i in 1..n - 1 {
        let s = sech(x[i]);
        let (a, b) = (w.u1[i], w.u2[i]);
        out.v1[i] = -3.0 * g1 * s * a * a - g1 * s * b * b - g2 * a * phix[i] - g1 * a.powi(3) - g1 * a * b * b;
        out.v2[i] = -2.0 * g1 * s * a * b - g2 * b * phix[i] - g1 * b.powi(3) - g1 * a * a * b;
        out.psi[i] = g3 * dsq[i];
    }
    out
}

/// Result of one resolvent solve.
#[derive(Debug, Clone)]
pub struct ResolventSolve {
    pub k: f64,
    pub solution: ComplexState,
    /// `‖(L − ik)w − w†‖ / ‖w†‖`, evaluated with [`apply_l`].
    pub residual: f64,
}

/// Relative distance below which `k` counts as one of `0, ±ω₀`.
pub const SINGULAR_MARGIN: f64 = 1e-3;

/// Shared operators for resolvent work on one grid.
pub struct Resolvent<'g> {
    grid: &'g Grid1D,
    params: Params,
    omega0: f64,
    a1: DMatrix<f64>,
    a2: DMatrix<f64>,
}

/// LU factors of `𝔄 + k²` and of its transpose at one `k`.
pub struct Factored {
    pub k: f64,
    a1: RealLu,
    a2: RealLu,
    a1t: RealLu,
    a2t: RealLu,
}

impl<'g> Resolvent<'g> {
    pub fn new(grid: &'g Grid1D, params: &Params) -> Result<Self> {
        let (lam, _, _) = a1_ground_state(grid, params)?;
        Ok(Resolvent {
            grid,
            params: *params,
            omega0: (-lam).sqrt(),
            a1: assemble_a1(grid, params)?.matrix,
            a2: assemble_a2(grid, params)?.matrix,
        })
    }

    /// Discrete `ω₀` on this grid.
    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn grid(&self) -> &Grid1D {
        self.grid
    }

    pub fn check_k(&self, k: f64) -> Result<()> {
        if !k.is_finite() {
            return Err(Error::InvalidArgument(format!("k must be finite, got {k}")));
        }
        let distance = [0.0, self.omega0, -self.omega0]
            .iter()
            .map(|s| (k - s).abs())
            .fold(f64::INFINITY, f64::min);
        if distance < SINGULAR_MARGIN * self.omega0 {
            return Err(Error::NearSingular { k, distance });
        }
        Ok(())
    }

    pub fn factor(&self, k: f64) -> Result<Factored> {
        self.check_k(k)?;
        self.factor_unchecked(k)
    }

    /// Factors without the distance guard; only an exactly singular system
    /// is rejected. Used to probe the blow-up next to the poles.
    pub fn factor_unchecked(&self, k: f64) -> Result<Factored> {
        let k2 = k * k;
        let shift = |a: &DMatrix<f64>| {
            let mut s = a.clone();
            for i in 0..s.nrows() {
                s[(i, i)] += k2;
            }
            s
        };
        let a1 = shift(&self.a1);
        let a2 = shift(&self.a2);
        Ok(Factored {
            k,
            a1t: RealLu::new(a1.transpose())?,
            a2t: RealLu::new(a2.transpose())?,
            a1: RealLu::new(a1)?,
            a2: RealLu::new(a2)?,
        })
    }

    /// `(L − ik)⁻¹` on interior values; `q = (u₁,u₂,φ)`, `p = (v₁,v₂,ψ)`.
    fn apply_inverse(&self, f: &Factored, q: [&[Complex64]; 3], p: [&[Complex64]; 3]) -> ([Vec<Complex64>; 3], [Vec<Complex64>; 3]) {
        let ik = Complex64::new(0.0, f.k);
        let m = q[0].len();
        let mut r1 = Vec::with_capacity(2 * m);
        r1.extend((0..m).map(|i| p[0][i] + ik * q[0][i]));
        r1.extend((0..m).map(|i| p[2][i] + ik * q[2][i]));
        let r2: Vec<Complex64> = (0..m).map(|i| p[1][i] + ik * q[1][i]).collect();
        let s1 = f.a1.solve_complex(&r1);
        let u2 = f.a2.solve_complex(&r2);
        let u1 = s1[..m].to_vec();
        let phi = s1[m..].to_vec();
        let v = |qd: &[Complex64], qq: &[Complex64]| -> Vec<Complex64> {
            qd.iter().zip(qq).map(|(a, b)| a + ik * b).collect()
        };
        let v1 = v(q[0], &u1);
        let v2 = v(q[1], &u2);
        let psi = v(q[2], &phi);
        ([u1, u2, phi], [v1, v2, psi])
    }

    /// `(L − ik)⁻ᴴ = (Lᵀ + ik)⁻¹` on interior values:
    /// `(𝔄ᵀ + k²) b = y_q − ik y_p`, `a = y_p − ik b`, returning `(a, b)`.
    fn apply_inverse_adjoint(&self, f: &Factored, yq: [&[Complex64]; 3], yp: [&[Complex64]; 3]) -> ([Vec<Complex64>; 3], [Vec<Complex64>; 3]) {
        let ik = Complex64::new(0.0, f.k);
        let m = yq[0].len();
        let mut r1 = Vec::with_capacity(2 * m);
        r1.extend((0..m).map(|i| yq[0][i] - ik * yp[0][i]));
        r1.extend((0..m).map(|i| yq[2][i] - ik * yp[2][i]));
        let r2: Vec<Complex64> = (0..m).map(|i| yq[1][i] - ik * yp[1][i]).collect();
        let s1 = f.a1t.solve_complex(&r1);
        let b2 = f.a2t.solve_complex(&r2);
        let b1 = s1[..m].to_vec();
        let bphi = s1[m..].to_vec();
        let a = |ypp: &[Complex64], bb: &[Complex64]| -> Vec<Complex64> {
            ypp.iter().zip(bb).map(|(y, b)| y - ik * b).collect()
        };
        ([a(yp[0], &b1), a(yp[1], &b2), a(yp[2], &bphi)], [b1, b2, bphi])
    }

    pub fn solve(&self, k: f64, rhs: &ComplexState) -> Result<ResolventSolve> {
        let f = self.factor(k)?;
        self.solve_factored(&f, rhs)
    }

    /// [`Resolvent::solve`] without the guard around `0, ±ω₀`.
    pub fn solve_unchecked(&self, k: f64, rhs: &ComplexState) -> Result<ResolventSolve> {
        let f = self.factor_unchecked(k)?;
        self.solve_factored(&f, rhs)
    }

    pub fn solve_factored(&self, f: &Factored, rhs: &ComplexState) -> Result<ResolventSolve> {
        let n = self.grid.len();
        if rhs.len() != n {
            return Err(Error::InvalidArgument(format!(
                "state has {} nodes, grid has {n}",
                rhs.len()
            )));
        }
        let int = |v: &Vec<Complex64>| v[1..n - 1].to_vec();
        let q = [int(&rhs.u1), int(&rhs.u2), int(&rhs.phi)];
        let p = [int(&rhs.v1), int(&rhs.v2), int(&rhs.psi)];
        let (qs, ps) = self.apply_inverse(f, [&q[0], &q[1], &q[2]], [&p[0], &p[1], &p[2]]);
        let ext = |v: &Vec<Complex64>| {
            let mut full = vec![Complex64::default(); n];
            full[1..n - 1].copy_from_slice(v);
            full
        };
        let solution = StateVector {
            u1: ext(&qs[0]),
            v1: ext(&ps[0]),
            u2: ext(&qs[1]),
            v2: ext(&ps[1]),
            phi: ext(&qs[2]),
            psi: ext(&ps[2]),
        };
        let mut rhs_int = rhs.clone();
        for fld in rhs_int.fields_mut() {
            fld[0] = Complex64::default();
            fld[n - 1] = Complex64::default();
        }
        let lw = apply_l_complex(&solution, self.grid, &self.params);
        let res = lw
            .sub(&solution.scale(Complex64::new(0.0, f.k)))
            .sub(&rhs_int);
        let denom = state_norm(&rhs_int, self.grid);
        let residual = if denom > 0.0 {
            state_norm(&res, self.grid) / denom
        } else {
            state_norm(&res, self.grid)
        };
        Ok(ResolventSolve {
            k: f.k,
            solution,
            residual,
        })
    }
}

/// Convenience wrapper building a [`Resolvent`] for a single solve.
pub fn solve_resolvent(k: f64, rhs: &ComplexState, grid: &Grid1D, params: &Params) -> Result<ResolventSolve> {
    Resolvent::new(grid, params)?.solve(k, rhs)
}

/// Operator-norm estimates of the resolvent at one wavenumber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventNorms {
    pub k: f64,
    /// `‖(L − ik)⁻¹‖` from `X̃_r` to itself.
    pub opnorm_xx: f64,
    /// `‖(L − ik)⁻¹‖` from `X̃_r` to the graph norm of `D̃_r`.
    pub opnorm_xd: f64,
}

pub const POWER_ITERATIONS: usize = 50;
pub const POWER_TOLERANCE: f64 = 1e-6;

/// Gram matrices of the phase-space norms on the reduced state `(u₁,v₁,φ,ψ)`
/// (interior values), block-diagonal.
struct NormGrams {
    x: [DMatrix<f64>; 4],
    d: [DMatrix<f64>; 4],
    x_chol: Vec<Cholesky<f64, nalgebra::Dyn>>,
}

impl NormGrams {
    fn new(grid: &Grid1D, params: &Params) -> Result<Self> {
        let n = grid.len();
        let m = n - 2;
        let w = grid.weights();
        let wi = grid.interior_weights();
        let l2 = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(wi));
        // H¹: Σ w (u² + u'²) with u' from the full-row derivative of the
        // zero-extended field
        let d1c = grid.d1().columns(1, m).into_owned();
        let mut wd1 = d1c.clone();
        for i in 0..n {
            for j in 0..m {
                wd1[(i, j)] *= w[i];
            }
        }
        let h1 = &l2 + d1c.transpose() * &wd1;
        // graph part ‖u − u''‖² on interior rows
        let mut g = -grid.interior_block(grid.d2());
        for i in 0..m {
            g[(i, i)] += 1.0;
        }
        let mut wg = g.clone();
        for i in 0..m {
            for j in 0..m {
                wg[(i, j)] *= wi[i];
            }
        }
        let graph = g.transpose() * wg;
        let g3 = params.gamma3;
        let x = [h1.clone(), l2.clone(), h1.clone(), &l2 / g3];
        let d = [graph.clone(), h1.clone(), graph * g3, h1];
        let x_chol = x
            .iter()
            .map(|a| {
                Cholesky::new(a.clone())
                    .ok_or_else(|| Error::Singular("norm Gram matrix not positive definite".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NormGrams { x, d, x_chol })
    }
}

fn real_apply(a: &DMatrix<f64>, v: &[Complex64]) -> Vec<Complex64> {
    let re: Vec<f64> = v.iter().map(|z| z.re).collect();
    let im: Vec<f64> = v.iter().map(|z| z.im).collect();
    let (r, i) = (matvec(a, &re), matvec(a, &im));
    r.into_iter().zip(i).map(|(a, b)| Complex64::new(a, b)).collect()
}

fn chol_solve(c: &Cholesky<f64, nalgebra::Dyn>, v: &[Complex64]) -> Vec<Complex64> {
    let re = c.solve(&nalgebra::DVector::from_iterator(v.len(), v.iter().map(|z| z.re)));
    let im = c.solve(&nalgebra::DVector::from_iterator(v.len(), v.iter().map(|z| z.im)));
    re.iter().zip(im.iter()).map(|(a, b)| Complex64::new(*a, *b)).collect()
}

fn gram_inner(g: &[DMatrix<f64>; 4], a: &[Vec<Complex64>; 4], b: &[Vec<Complex64>; 4]) -> f64 {
    (0..4)
        .map(|i| {
            let gb = real_apply(&g[i], &b[i]);
            a[i].iter().zip(&gb).map(|(x, y)| (x.conj() * y).re).sum::<f64>()
        })
        .sum()
}

/// Projects reduced interior blocks `(u₁,v₁,φ,ψ)` onto their symmetric parities.
fn project_reduced(v: &mut [Vec<Complex64>; 4]) {
    let pars = [Parity::Even, Parity::Even, Parity::Odd, Parity::Odd];
    for (f, p) in v.iter_mut().zip(pars) {
        let s = p.sign();
        let m = f.len();
        for i in 0..m / 2 {
            let a = f[i];
            let b = f[m - 1 - i];
            f[i] = 0.5 * (a + s * b);
            f[m - 1 - i] = 0.5 * (b + s * a);
        }
    }
}

impl Resolvent<'_> {
    /// `R x` for reduced blocks `(u₁,v₁,φ,ψ)` (with `u₂ = v₂ = 0`).
    fn reduced_forward(&self, f: &Factored, x: &[Vec<Complex64>; 4]) -> [Vec<Complex64>; 4] {
        let z = vec![Complex64::default(); x[0].len()];
        let (q, p) = self.apply_inverse(f, [&x[0], &z, &x[2]], [&x[1], &z, &x[3]]);
        let [u1, _, phi] = q;
        let [v1, _, psi] = p;
        [u1, v1, phi, psi]
    }

    fn reduced_adjoint(&self, f: &Factored, y: &[Vec<Complex64>; 4]) -> [Vec<Complex64>; 4] {
        let z = vec![Complex64::default(); y[0].len()];
        let (a, b) = self.apply_inverse_adjoint(f, [&y[0], &z, &y[2]], [&y[1], &z, &y[3]]);
        let [a1, _, aphi] = a;
        let [b1, _, bpsi] = b;
        [a1, b1, aphi, bpsi]
    }

    fn power_norm(&self, f: &Factored, grams: &NormGrams, target: &[DMatrix<f64>; 4], seed: u64) -> f64 {
        let m = self.grid.interior_len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x: [Vec<Complex64>; 4] = std::array::from_fn(|_| {
            (0..m)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect()
        });
        project_reduced(&mut x);
        let mut est = 0.0;
        for _ in 0..POWER_ITERATIONS {
            let nx = gram_inner(&grams.x, &x, &x).sqrt();
            x.iter_mut().for_each(|b| b.iter_mut().for_each(|z| *z /= nx));
            let y = self.reduced_forward(f, &x);
            let new_est = gram_inner(target, &y, &y).sqrt();
            let gy: [Vec<Complex64>; 4] = std::array::from_fn(|i| real_apply(&target[i], &y[i]));
            let z = self.reduced_adjoint(f, &gy);
            let mut next: [Vec<Complex64>; 4] =
                std::array::from_fn(|i| chol_solve(&grams.x_chol[i], &z[i]));
            project_reduced(&mut next);
            x = next;
            let done = (new_est - est).abs() <= POWER_TOLERANCE * new_est;
            est = new_est;
            if done {
                break;
            }
        }
        est
    }

    /// Power-iteration estimates of `‖(L−ik)⁻¹‖_{X→X}` and `‖(L−ik)⁻¹‖_{X→D}`
    /// on the reflection-symmetric subspace with `(u₂, v₂) = 0`.
    pub fn norms(&self, k: f64) -> Result<ResolventNorms> {
        let f = self.factor(k)?;
        let grams = NormGrams::new(self.grid, &self.params)?;
        Ok(self.norms_with(&f, &grams))
    }

    fn norms_with(&self, f: &Factored, grams: &NormGrams) -> ResolventNorms {
        ResolventNorms {
            k: f.k,
            opnorm_xx: self.power_norm(f, grams, &grams.x, 1),
            opnorm_xd: self.power_norm(f, grams, &grams.d, 2),
        }
    }
}

/// Resolvent norms for each `k`; all `|k|` must be at least `2ω₀`.
pub fn resolvent_norm_scan(k_list: &[f64], grid: &Grid1D, params: &Params) -> Result<Vec<ResolventNorms>> {
    let r = Resolvent::new(grid, params)?;
    for &k in k_list {
        if !(k.abs() >= 2.0 * r.omega0()) {
            return Err(Error::InvalidArgument(format!(
                "resolvent scan requires |k| >= 2 omega0 = {:.6}, got {k}",
                2.0 * r.omega0()
            )));
        }
    }
    let grams = NormGrams::new(grid, params)?;
    k_list
        .iter()
        .map(|&k| Ok(r.norms_with(&r.factor(k)?, &grams)))
        .collect()
}

/// Parity defect above which inputs to the zero-mode solve are rejected
/// (relative to the input's magnitude).
pub const PARITY_TOLERANCE: f64 = 1e-12;

/// Solves `Lw = −N(w†)` for `w†` in the symmetric subspace with `(u₂,v₂)=0`.
///
/// The `u₁` equation is the `c = 6` Schrödinger problem, posed here with
/// the discrete mean-flow coupling `D1∘T` (`T` the odd antiderivative) so
/// that the `v₁` row of the assembled `L` is satisfied to rounding;
/// `φ = T((u₁†)² + 2 sech·u₁)` and `v₁ = ψ = 0`.
pub fn solve_iooss_zero_mode(wdag: &StateVector<f64>, grid: &Grid1D, params: &Params) -> Result<StateVector<f64>> {
    params.validate()?;
    let n = grid.len();
    if wdag.len() != n {
        return Err(Error::InvalidArgument(format!(
            "state has {} nodes, grid has {n}",
            wdag.len()
        )));
    }
    let scale = wdag.max_abs().max(1.0);
    let defect = wdag.parity_defect();
    if defect > PARITY_TOLERANCE * scale {
        return Err(Error::ParityViolation { defect });
    }
    if wdag.u2.iter().chain(&wdag.v2).any(|v| *v != 0.0) {
        return Err(Error::InvalidArgument(
            "zero-mode solve requires (u2, v2) = (0, 0)".into(),
        ));
    }
    let x = grid.nodes();
    let red = grid.reduced();
    let h = red.len();
    let Params {
        gamma1: g1,
        gamma2: g2,
        ..
    } = *params;
    let ud = &wdag.u1;
    let phix_d = grid.apply_d1(&wdag.phi);
    let usq: Vec<f64> = ud.iter().map(|v| v * v).collect();
    let d1t_usq = grid.apply_d1(&grid.antiderivative_odd(&usq));
    let rhs_full: Vec<f64> = (0..n)
        .map(|i| {
            let s = sech(x[i]);
            3.0 * g1 * s * usq[i] + g2 * s * d1t_usq[i] + g2 * ud[i] * phix_d[i] + g1 * ud[i].powi(3)
        })
        .collect();
    let rhs: Vec<f64> = rhs_full[1 + h..n - 1].to_vec();

    let s: Vec<f64> = red.x.iter().map(|&v| sech(v)).collect();
    let mut k = -red.d2_even.clone();
    for a in 0..h {
        k[(a, a)] += 1.0 - params.potential() * s[a] * s[a];
        for b in 0..h {
            k[(a, b)] -= 2.0 * g2 * s[a] * red.d1_antideriv[(a, b)] * s[b];
        }
    }
    let u_half = RealLu::new(k)?.solve(&rhs);
    let u1 = unfold_to_nodes(&u_half, Parity::Even, n);
    let p: Vec<f64> = (0..n).map(|i| usq[i] + 2.0 * sech(x[i]) * u1[i]).collect();
    let phi = grid.antiderivative_odd(&p);
    let mut out = StateVector::zeros(n);
    out.u1 = u1;
    out.phi = phi;
    Ok(out)
}

/// `‖Lw + N(w†)‖ / ‖N(w†)‖` in the weighted interior norm.
pub fn iooss_residual(w: &StateVector<f64>, wdag: &StateVector<f64>, grid: &Grid1D, params: &Params) -> f64 {
    let lw = apply_l(w, grid, params).to_complex();
    let nw = apply_n(wdag, grid, params).to_complex();
    let mut sum = lw.clone();
    for (o, b) in sum.fields_mut().into_iter().zip(nw.fields()) {
        o.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    }
    let denom = state_norm(&nw, grid);
    let r = state_norm(&sum, grid);
    if denom > 0.0 {
        r / denom
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Scheme};

    fn grid(n: usize) -> Grid1D {
        build_grid(20.0, n, Scheme::ChebyshevMapped).unwrap()
    }

    fn smooth_state(g: &Grid1D, seed: u64) -> StateVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = StateVector::zeros(g.len());
        for f in s.fields_mut() {
            let (a, b, c) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.2..1.0), rng.gen_range(-2.0..2.0));
            *f = g.sample(|x| a * (-b * (x - c).powi(2)).exp());
            let n = f.len();
            f[0] = 0.0;
            f[n - 1] = 0.0;
        }
        s
    }

    #[test]
    fn reverser_and_reflection_are_involutions() {
        let g = grid(64);
        let s = smooth_state(&g, 3);
        assert_eq!(s.reverse().reverse(), s);
        assert_eq!(s.reflect().reflect(), s);
    }

    #[test]
    fn l_anticommutes_with_the_reverser() {
        let g = grid(64);
        let p = Params::default();
        for seed in 0..10 {
            let s = smooth_state(&g, seed);
            let a = apply_l(&s.reverse(), &g, &p);
            let b = apply_l(&s, &g, &p).reverse();
            for (x, y) in a.fields().iter().zip(b.fields()) {
                for (u, v) in x.iter().zip(y.iter()) {
                    assert!((u + v).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn assembled_l_matches_apply() {
        let g = grid(48);
        let p = Params::new(0.5, 1.5, 2.0).unwrap();
        let l = assemble_l(&g, &p).unwrap();
        let s = smooth_state(&g, 7);
        let n = g.len();
        let flat: Vec<f64> = s.fields().iter().flat_map(|f| f[1..n - 1].to_vec()).collect();
        let a = l.apply(&flat);
        let b = apply_l(&s, &g, &p);
        let bflat: Vec<f64> = b.fields().iter().flat_map(|f| f[1..n - 1].to_vec()).collect();
        for (x, y) in a.iter().zip(&bflat) {
            assert!((x - y).abs() < 1e-9 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn resolvent_round_trip() {
        let g = grid(128);
        let p = Params::default();
        let r = Resolvent::new(&g, &p).unwrap();
        let w = ComplexState::from_parts(&smooth_state(&g, 1), &smooth_state(&g, 2));
        let k = 3.7;
        let lw = apply_l_complex(&w, &g, &p);
        let rhs = lw.sub(&w.scale(Complex64::new(0.0, k)));
        let sol = r.solve(k, &rhs).unwrap();
        assert!(sol.residual < 1e-10, "{}", sol.residual);
        let err = state_norm(&sol.solution.sub(&w), &g) / state_norm(&w, &g);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = grid(64);
        let sol = solve_resolvent(2.0, &ComplexState::zeros(64), &g, &Params::default()).unwrap();
        assert!(sol.solution.fields().iter().all(|f| f.iter().all(|z| z.norm() == 0.0)));
    }

    #[test]
    fn near_singular_wavenumbers_rejected() {
        let g = grid(128);
        let r = Resolvent::new(&g, &Params::default()).unwrap();
        let w0 = r.omega0();
        assert!(matches!(r.check_k(0.0), Err(Error::NearSingular { .. })));
        assert!(matches!(r.check_k(-w0 * (1.0 + 5e-4)), Err(Error::NearSingular { .. })));
        assert!(r.check_k(w0 * (1.0 + 2e-3)).is_ok());
    }

    #[test]
    fn resolvent_is_reversible() {
        // S (L − ik)⁻¹ S = −(L + ik)⁻¹
        let g = grid(96);
        let p = Params::default();
        let r = Resolvent::new(&g, &p).unwrap();
        let x = smooth_state(&g, 11).to_complex();
        let k = 2.5;
        let a = r.solve(k, &x.reverse()).unwrap().solution.reverse();
        let b = r.solve(-k, &x).unwrap().solution.scale(Complex64::new(-1.0, 0.0));
        assert!(state_norm(&a.sub(&b), &g) < 1e-10 * state_norm(&b, &g));
    }

    #[test]
    fn iooss_zero_input_gives_zero() {
        let g = grid(64);
        let w = solve_iooss_zero_mode(&StateVector::zeros(64), &g, &Params::default()).unwrap();
        assert_eq!(w.max_abs(), 0.0);
    }

    #[test]
    fn iooss_rejects_parity_violation() {
        let g = grid(64);
        let mut w = StateVector::zeros(64);
        w.u1 = g.sample(|x| x * (-x * x).exp());
        assert!(matches!(
            solve_iooss_zero_mode(&w, &g, &Params::default()),
            Err(Error::ParityViolation { .. })
        ));
    }

    #[test]
    fn n_vanishes_to_second_order() {
        let g = grid(64);
        let p = Params::default();
        let s = smooth_state(&g, 5).project_symmetric();
        let small = StateVector::from_fields(s.fields().map(|f| f.iter().map(|v| 1e-4 * v).collect()));
        let a = apply_n(&small, &g, &p).max_abs();
        assert!(a < 1e-7 * (1.0 + apply_n(&s, &g, &p).max_abs()));
    }
}
