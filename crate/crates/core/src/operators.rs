//! Linearized operators about the bright line soliton and their point spectra.
//!
//! The two self-adjoint operators that govern the linearization are
//!
//! ```text
//! A₁(u, φ) = ( −u'' + u − (3γ₁+γ₂) sech² u − γ₂ sech φ',  −γ₃ φ'' + 2γ₃ (sech u)' )
//! A₂ u     =   −u'' + u − 2 sech² u
//! ```
//!
//! `A₁` is symmetric in the inner product `⟨u,ũ⟩ + γ₂/(2γ₃) ⟨φ,φ̃⟩`; its unique
//! negative eigenvalue `−ω₀²` sets the transverse bifurcation frequency.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    fold_matrix, unfold_to_nodes, FieldRole, Grid1D, Parity, ParityTag, Scheme,
};
use crate::linalg::{weighted_symmetric_eigen, weighted_symmetry_defect, BandedMatrix};

pub fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

/// Coefficients `(γ₁, γ₂, γ₃)` of the focussing elliptic-elliptic system
/// (`ε = 1`, `γ₁ + γ₂ = 2`, `γ₂, γ₃ > 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            gamma1: 1.0,
            gamma2: 1.0,
            gamma3: 1.0,
        }
    }
}

impl Params {
    pub fn new(gamma1: f64, gamma2: f64, gamma3: f64) -> Result<Self> {
        let p = Params {
            gamma1,
            gamma2,
            gamma3,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.gamma1, self.gamma2, self.gamma3]
            .iter()
            .all(|g| g.is_finite())
        {
            return Err(Error::InvalidParams("coefficients must be finite".into()));
        }
        if (self.gamma1 + self.gamma2 - 2.0).abs() > 1e-14 {
            return Err(Error::InvalidParams(format!(
                "focussing case requires gamma1 + gamma2 = 2, got {}",
                self.gamma1 + self.gamma2
            )));
        }
        if self.gamma2 <= 0.0 || self.gamma3 <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "gamma2 and gamma3 must be positive, got ({}, {})",
                self.gamma2, self.gamma3
            )));
        }
        Ok(())
    }

    /// Coefficient `3γ₁ + γ₂` of the sech² potential in the `u`-row of `A₁`.
    pub fn potential(&self) -> f64 {
        3.0 * self.gamma1 + self.gamma2
    }

    /// Weight `γ₂/(2γ₃)` of the `φ` block in the inner product making `A₁` symmetric.
    pub fn phi_weight(&self) -> f64 {
        self.gamma2 / (2.0 * self.gamma3)
    }
}

/// A discretized operator acting on the interior nodes of one or more field
/// blocks, symmetric in a diagonal weighted inner product.
#[derive(Debug, Clone)]
pub struct LinOp {
    pub matrix: DMatrix<f64>,
    /// Positive diagonal weight, one entry per unknown.
    pub weight: Vec<f64>,
    /// Parity of each block inside the reflection-symmetric subspace.
    pub domain_tags: Vec<ParityTag>,
    pub block_roles: Vec<FieldRole>,
    /// Lower edge of the essential spectrum of the continuous operator.
    pub ess_edge: f64,
    /// Interior node abscissae (shared by all blocks).
    pub nodes: Vec<f64>,
    pub half_length: f64,
}

/// Subspace on which a spectrum is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subspace {
    Full,
    /// Single-block operators only.
    Even,
    /// Single-block operators only.
    Odd,
    /// Each block restricted to its own domain tag.
    Tagged,
}

impl LinOp {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn blocks(&self) -> usize {
        self.block_roles.len()
    }

    pub fn block_len(&self) -> usize {
        self.nodes.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        crate::grid::matvec(&self.matrix, x)
    }

    /// `A + σ I`.
    pub fn shifted(&self, sigma: f64) -> LinOp {
        let mut out = self.clone();
        for i in 0..out.dim() {
            out.matrix[(i, i)] += sigma;
        }
        out.ess_edge += sigma;
        out
    }

    pub fn symmetry_defect(&self) -> f64 {
        weighted_symmetry_defect(&self.matrix, &self.weight)
    }

    /// `⟨a, b⟩` in the operator's weighted inner product.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weight
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }

    fn block_parities(&self, subspace: Subspace) -> Result<Option<Vec<Parity>>> {
        match subspace {
            Subspace::Full => Ok(None),
            Subspace::Tagged => Ok(Some(self.domain_tags.iter().map(|t| t.parity).collect())),
            Subspace::Even | Subspace::Odd => {
                if self.blocks() != 1 {
                    return Err(Error::InvalidArgument(
                        "a single parity only applies to single-block operators".into(),
                    ));
                }
                Ok(Some(vec![if subspace == Subspace::Even {
                    Parity::Even
                } else {
                    Parity::Odd
                }]))
            }
        }
    }

    /// Matrix and weight of the operator on a parity subspace, in folded
    /// right-half coordinates (block by block).
    pub fn subspace_matrix(&self, subspace: Subspace) -> Result<(DMatrix<f64>, Vec<f64>)> {
        let (a, w, _) = self.restrict(&self.block_parities(subspace)?);
        Ok((a, w))
    }

    /// Matrix, weight and abscissae of the operator restricted to a subspace.
    fn restrict(&self, parities: &Option<Vec<Parity>>) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
        let m = self.block_len();
        let nb = self.blocks();
        match parities {
            None => {
                let x = (0..nb).flat_map(|_| self.nodes.iter().copied()).collect();
                (self.matrix.clone(), self.weight.clone(), x)
            }
            Some(par) => {
                let h = m / 2;
                let mut a = DMatrix::zeros(nb * h, nb * h);
                for bi in 0..nb {
                    for bj in 0..nb {
                        let block = self.matrix.view((bi * m, bj * m), (m, m)).into_owned();
                        let f = fold_matrix(&block, par[bj]);
                        a.view_mut((bi * h, bj * h), (h, h)).copy_from(&f);
                    }
                }
                let w = (0..nb)
                    .flat_map(|b| self.weight[b * m + h..(b + 1) * m].iter().copied())
                    .collect();
                let x = (0..nb)
                    .flat_map(|_| self.nodes[h..].iter().copied())
                    .collect();
                (a, w, x)
            }
        }
    }
}

/// Localized eigenpairs below the essential-spectrum edge.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[k][b]` is block `b` of eigenvector `k` sampled on all
    /// grid nodes (zero boundary values), normalized in the weighted norm.
    pub eigenvectors: Vec<Vec<Vec<f64>>>,
    pub ess_edge: f64,
    pub localization: Vec<f64>,
}

/// Eigenvalues closer than this to the essential-spectrum edge are treated as
/// belonging to it.
pub const EDGE_TOLERANCE: f64 = 1e-8;

/// Minimal fraction of weighted mass in `|x| ≤ Lx/2` for a reported eigenpair.
pub const LOCALIZATION_THRESHOLD: f64 = 0.99;

/// All localized eigenpairs of `op` on `subspace` strictly below its
/// essential-spectrum edge, ascending.
pub fn localized_spectrum(op: &LinOp, subspace: Subspace) -> Result<SpectrumResult> {
    let parities = op.block_parities(subspace)?;
    let (a, w, x) = op.restrict(&parities);
    let (values, vectors) = weighted_symmetric_eigen(&a, &w);
    let nb = op.blocks();
    let sub_len = a.nrows() / nb;
    let n_nodes = op.block_len() + 2;
    let inner_cut = 0.5 * op.half_length;

    let mut result = SpectrumResult {
        eigenvalues: Vec::new(),
        eigenvectors: Vec::new(),
        ess_edge: op.ess_edge,
        localization: Vec::new(),
    };
    for (k, &lam) in values.iter().enumerate() {
        if lam >= op.ess_edge - EDGE_TOLERANCE {
            break;
        }
        let v = vectors.column(k);
        let total: f64 = (0..v.len()).map(|i| w[i] * v[i] * v[i]).sum();
        let inside: f64 = (0..v.len())
            .filter(|&i| x[i].abs() <= inner_cut)
            .map(|i| w[i] * v[i] * v[i])
            .sum();
        let loc = inside / total;
        if loc < LOCALIZATION_THRESHOLD {
            continue;
        }
        let mut blocks: Vec<Vec<f64>> = (0..nb)
            .map(|b| {
                let part: Vec<f64> = v.as_slice()[b * sub_len..(b + 1) * sub_len].to_vec();
                match &parities {
                    None => {
                        let mut full = vec![0.0; n_nodes];
                        full[1..n_nodes - 1].copy_from_slice(&part);
                        full
                    }
                    Some(par) => unfold_to_nodes(&part, par[b], n_nodes),
                }
            })
            .collect();
        normalize_blocks(op, &mut blocks);
        result.eigenvalues.push(lam);
        result.eigenvectors.push(blocks);
        result.localization.push(loc);
    }
    Ok(result)
}

/// Weighted unit norm and a deterministic sign: the projection onto
/// `e^{-x²}(1 + x)` of the first block with a non-negligible projection is
/// positive.
fn normalize_blocks(op: &LinOp, blocks: &mut [Vec<f64>]) {
    let m = op.block_len();
    let mut nrm = 0.0;
    for (b, f) in blocks.iter().enumerate() {
        for i in 0..m {
            nrm += op.weight[b * m + i] * f[i + 1] * f[i + 1];
        }
    }
    let nrm = nrm.sqrt();
    let mut sign = 1.0;
    for (b, f) in blocks.iter().enumerate() {
        let proj: f64 = (0..m)
            .map(|i| {
                let x = op.nodes[i];
                op.weight[b * m + i] * f[i + 1] * (-x * x).exp() * (1.0 + x)
            })
            .sum();
        if proj.abs() > 1e-8 * nrm {
            sign = proj.signum();
            break;
        }
    }
    for f in blocks.iter_mut() {
        for v in f.iter_mut() {
            *v *= sign / nrm;
        }
    }
}

/// The `count` lowest localized eigenpairs of `op` on `subspace`.
pub fn compute_point_spectrum(op: &LinOp, subspace: Subspace, count: usize) -> Result<SpectrumResult> {
    let mut all = localized_spectrum(op, subspace)?;
    if count > all.eigenvalues.len() {
        return Err(Error::SpectrumCount {
            requested: count,
            found: all.eigenvalues.len(),
        });
    }
    all.eigenvalues.truncate(count);
    all.eigenvectors.truncate(count);
    all.localization.truncate(count);
    Ok(all)
}

fn base_op(grid: &Grid1D, matrix: DMatrix<f64>, weight: Vec<f64>, tags: Vec<ParityTag>, roles: Vec<FieldRole>, edge: f64) -> LinOp {
    LinOp {
        matrix,
        weight,
        domain_tags: tags,
        block_roles: roles,
        ess_edge: edge,
        nodes: grid.interior_nodes().to_vec(),
        half_length: grid.half_length(),
    }
}

/// `u ↦ u − u'' − c sech²(x) u` with unit weight.
pub fn assemble_schrodinger(grid: &Grid1D, c: f64) -> LinOp {
    let d2 = grid.interior_block(grid.d2());
    let x = grid.interior_nodes();
    let m = x.len();
    let mut a = -d2;
    for i in 0..m {
        a[(i, i)] += 1.0 - c * sech(x[i]).powi(2);
    }
    base_op(
        grid,
        a,
        grid.interior_weights().to_vec(),
        vec![ParityTag::EVEN],
        vec![FieldRole::U2],
        1.0,
    )
}

/// `A₂ = 1 − ∂² − 2 sech²`, acting on the even component `u₂`.
pub fn assemble_a2(grid: &Grid1D, params: &Params) -> Result<LinOp> {
    params.validate()?;
    Ok(assemble_schrodinger(grid, 2.0))
}

/// Two-block operator `A₁` on `(u₁, φ)` with weight `diag(1, γ₂/(2γ₃))`.
pub fn assemble_a1(grid: &Grid1D, params: &Params) -> Result<LinOp> {
    params.validate()?;
    let d1 = grid.interior_block(grid.d1());
    let d2 = grid.interior_block(grid.d2());
    let x = grid.interior_nodes();
    let m = x.len();
    let s: Vec<f64> = x.iter().map(|&v| sech(v)).collect();
    let Params {
        gamma2: g2,
        gamma3: g3,
        ..
    } = *params;
    let mut a = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            a[(i, j)] = -d2[(i, j)];
            a[(i, m + j)] = -g2 * s[i] * d1[(i, j)];
            a[(m + i, j)] = 2.0 * g3 * d1[(i, j)] * s[j];
            a[(m + i, m + j)] = -g3 * d2[(i, j)];
        }
        a[(i, i)] += 1.0 - params.potential() * s[i] * s[i];
    }
    let w = grid.interior_weights();
    let beta = params.phi_weight();
    let weight = w.iter().copied().chain(w.iter().map(|v| beta * v)).collect();
    Ok(base_op(
        grid,
        a,
        weight,
        vec![ParityTag::EVEN, ParityTag::ODD],
        vec![FieldRole::U1, FieldRole::Phi],
        0.0,
    ))
}

/// Applies `A₁` to node fields `(u, φ)`; boundary rows of the result are zero.
pub fn apply_a1(u: &[f64], phi: &[f64], grid: &Grid1D, params: &Params) -> (Vec<f64>, Vec<f64>) {
    let x = grid.nodes();
    let n = x.len();
    let s: Vec<f64> = x.iter().map(|&v| sech(v)).collect();
    let d2u = grid.apply_d2(u);
    let d1phi = grid.apply_d1(phi);
    let d2phi = grid.apply_d2(phi);
    let su: Vec<f64> = s.iter().zip(u).map(|(a, b)| a * b).collect();
    let d1su = grid.apply_d1(&su);
    let mut r1 = vec![0.0; n];
    let mut r2 = vec![0.0; n];
    for i in 1..n - 1 {
        r1[i] = u[i] - d2u[i] - params.potential() * s[i] * s[i] * u[i] - params.gamma2 * s[i] * d1phi[i];
        r2[i] = -params.gamma3 * d2phi[i] + 2.0 * params.gamma3 * d1su[i];
    }
    (r1, r2)
}

/// `⟨A₁(u,φ), (u,φ)⟩` in the weighted inner product, evaluated from the
/// operator itself.
pub fn quadratic_form_a1(u: &[f64], phi: &[f64], grid: &Grid1D, params: &Params) -> f64 {
    let (r1, r2) = apply_a1(u, phi, grid, params);
    grid.inner(&r1, u) + params.phi_weight() * grid.inner(&r2, phi)
}

/// Right-hand side of the completed-square identity
/// `⟨u − u'' − 6 sech² u, u⟩ + (γ₂/2) ∫ (φ' − 2 sech u)²`.
///
/// On a summation-by-parts grid (Chebyshev, where `D2 = D1²` and the
/// quadrature is exact for the products involved) this agrees with
/// [`quadratic_form_a1`] to rounding; with finite differences the two differ
/// by the `O(h²)` gap between `D1²` and the three-point `D2`.
pub fn quadratic_form_identity(u: &[f64], phi: &[f64], grid: &Grid1D, params: &Params) -> f64 {
    let x = grid.nodes();
    let n = x.len();
    let d2u = grid.apply_d2(u);
    let d1phi = grid.apply_d1(phi);
    let mut schr = vec![0.0; n];
    for i in 1..n - 1 {
        schr[i] = u[i] - d2u[i] - 6.0 * sech(x[i]).powi(2) * u[i];
    }
    let sq: Vec<f64> = (0..n)
        .map(|i| (d1phi[i] - 2.0 * sech(x[i]) * u[i]).powi(2))
        .collect();
    grid.inner(&schr, u) + 0.5 * params.gamma2 * grid.quadrature(&sq)
}

/// Outer edge of the support of [`cutoff`].
pub const CUTOFF_SUPPORT: f64 = 4.0;

/// Smooth even cutoff: 1 on `[-1, 1]`, 0 outside `[-4, 4]`, glued with
/// `e^{-1/t}`.
pub fn cutoff(t: f64) -> f64 {
    let a = t.abs();
    if a <= 1.0 {
        return 1.0;
    }
    if a >= CUTOFF_SUPPORT {
        return 0.0;
    }
    let psi = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    let s = (a - 1.0) / (CUTOFF_SUPPORT - 1.0);
    psi(1.0 - s) / (psi(1.0 - s) + psi(s))
}

/// Trial pair `(sech x, 2 χ(x/R) tanh x)` with zero boundary values.
pub fn trial_pair(grid: &Grid1D, r: f64) -> (Vec<f64>, Vec<f64>) {
    let n = grid.len();
    let mut u = grid.sample(sech);
    let mut phi = grid.sample(|x| 2.0 * cutoff(x / r) * x.tanh());
    for f in [&mut u, &mut phi] {
        f[0] = 0.0;
        f[n - 1] = 0.0;
    }
    (u, phi)
}

/// Quadratic form of `A₁` on the trial family for each `R`; the values tend
/// to `−16/3`, which shows `A₁` is not non-negative.
pub fn form_limit_scan(r_list: &[f64], grid: &Grid1D, params: &Params) -> Result<Vec<f64>> {
    params.validate()?;
    let mut prev = 0.0;
    for &r in r_list {
        if !(r > prev) {
            return Err(Error::InvalidArgument(
                "cutoff radii must be positive and increasing".into(),
            ));
        }
        if r * CUTOFF_SUPPORT > grid.half_length() * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "cutoff support {} exceeds the half-length {}",
                r * CUTOFF_SUPPORT,
                grid.half_length()
            )));
        }
        prev = r;
    }
    Ok(r_list
        .iter()
        .map(|&r| {
            let (u, phi) = trial_pair(grid, r);
            quadratic_form_a1(&u, &phi, grid, params)
        })
        .collect())
}

/// Bifurcation frequency and the associated eigenfield of `A₁`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Omega0Result {
    pub omega0: f64,
    /// `(u₁, φ)` on all grid nodes, unit norm in the weighted inner product.
    pub eigenfield: (Vec<f64>, Vec<f64>),
    /// `|ω₀²|` difference between this grid and the independent scheme.
    pub discretization_gap: f64,
}

/// Lowest eigenvalue of `A₁` on the (even, odd) subspace and its eigenfield.
pub fn a1_ground_state(grid: &Grid1D, params: &Params) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let op = assemble_a1(grid, params)?;
    let spec = compute_point_spectrum(&op, Subspace::Tagged, 1)?;
    let lam = spec.eigenvalues[0];
    if lam >= 0.0 {
        return Err(Error::SpectrumCount {
            requested: 1,
            found: 0,
        });
    }
    let mut v = spec.eigenvectors.into_iter().next().expect("one eigenpair");
    let phi = v.pop().expect("phi block");
    let u = v.pop().expect("u block");
    Ok((lam, u, phi))
}

/// `ω₀` on `grid`, cross-checked against the other discretization: Chebyshev
/// results are compared with Richardson-extrapolated finite differences on
/// `N, 2N, 4N` nodes; finite-difference results with Chebyshev on `N` nodes.
pub fn omega0(grid: &Grid1D, params: &Params) -> Result<Omega0Result> {
    let (lam, u, phi) = a1_ground_state(grid, params)?;
    let other = match grid.scheme() {
        Scheme::ChebyshevMapped => -fd_richardson_omega0_sq(grid.half_length(), grid.len(), params)?,
        Scheme::FiniteDifference => {
            let cheb = Grid1D::new(
                grid.half_length(),
                grid.len(),
                Scheme::ChebyshevMapped,
                crate::grid::DEFAULT_CHEBYSHEV_MAP,
            )?;
            a1_ground_state(&cheb, params)?.0
        }
    };
    Ok(Omega0Result {
        omega0: (-lam).sqrt(),
        eigenfield: (u, phi),
        discretization_gap: (lam - other).abs(),
    })
}

/// Banded second-order finite-difference `A₁ − σ` on `n` nodes, unknowns
/// interleaved as `(u_i, φ_i)`.
fn fd_a1_banded(half_length: f64, n: usize, params: &Params, sigma: f64) -> (BandedMatrix, Vec<f64>) {
    let h = 2.0 * half_length / (n - 1) as f64;
    let m = n - 2;
    let x: Vec<f64> = (1..n - 1)
        .map(|j| half_length * (2.0 * j as f64 - (n - 1) as f64) / (n - 1) as f64)
        .collect();
    let s: Vec<f64> = x.iter().map(|&v| sech(v)).collect();
    let (g2, g3) = (params.gamma2, params.gamma3);
    let mut a = BandedMatrix::zeros(2 * m, 3, 3);
    let h2 = h * h;
    for i in 0..m {
        let (ui, pi) = (2 * i, 2 * i + 1);
        a.add(ui, ui, 2.0 / h2 + 1.0 - params.potential() * s[i] * s[i] - sigma);
        a.add(pi, pi, 2.0 * g3 / h2 - sigma);
        if i + 1 < m {
            a.add(ui, ui + 2, -1.0 / h2);
            a.add(ui, pi + 2, -g2 * s[i] / (2.0 * h));
            a.add(pi, pi + 2, -g3 / h2);
            a.add(pi, ui + 2, g3 * s[i + 1] / h);
        }
        if i > 0 {
            a.add(ui, ui - 2, -1.0 / h2);
            a.add(ui, pi - 2, g2 * s[i] / (2.0 * h));
            a.add(pi, pi - 2, -g3 / h2);
            a.add(pi, ui - 2, -g3 * s[i - 1] / h);
        }
    }
    let beta = params.phi_weight();
    let w = (0..2 * m).map(|k| if k % 2 == 0 { 1.0 } else { beta }).collect();
    (a, w)
}

/// Lowest eigenvalue of the finite-difference `A₁` by shifted inverse
/// iteration; `sigma` must lie below it.
fn fd_lowest_eigenvalue(half_length: f64, n: usize, params: &Params, sigma: f64) -> Result<f64> {
    let (a, w) = fd_a1_banded(half_length, n, params, 0.0);
    let (mut shifted, _) = fd_a1_banded(half_length, n, params, sigma);
    shifted.factor()?;
    let m = n - 2;
    let h = 2.0 * half_length / (n - 1) as f64;
    let mut v: Vec<f64> = (0..2 * m)
        .map(|k| {
            let x = -half_length + h * (k / 2 + 1) as f64;
            if k % 2 == 0 {
                sech(x)
            } else {
                x.tanh() * sech(x)
            }
        })
        .collect();
    let wnorm = |v: &[f64]| -> f64 { v.iter().zip(&w).map(|(a, b)| b * a * a).sum::<f64>().sqrt() };
    let mut rq_prev = f64::INFINITY;
    for it in 0..500 {
        let y = shifted.solve(&v);
        let ny = wnorm(&y);
        v = y.iter().map(|a| a / ny).collect();
        let av = a.matvec(&v);
        let rq: f64 = av.iter().zip(&v).zip(&w).map(|((p, q), wk)| wk * p * q).sum();
        if (rq - rq_prev).abs() <= 1e-15 * rq.abs().max(1.0) && it > 2 {
            return Ok(rq);
        }
        rq_prev = rq;
    }
    Err(Error::NonConvergence {
        iterations: 500,
        residual: f64::NAN,
    })
}

/// `ω₀²` from second-order finite differences on `n`, `2n` and `4n` nodes,
/// with the `h²` and `h⁴` error terms eliminated.
pub fn fd_richardson_omega0_sq(half_length: f64, n: usize, params: &Params) -> Result<f64> {
    params.validate()?;
    let coarse = Grid1D::new(half_length, n, Scheme::FiniteDifference, 0.0)?;
    let (lam0, _, _) = a1_ground_state(&coarse, params)?;
    let sigma = lam0 - 0.05 * lam0.abs() - 0.01;
    let sizes = [n, 2 * n, 4 * n];
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (k, &nk) in sizes.iter().enumerate() {
        let lam = if k == 0 {
            lam0
        } else {
            fd_lowest_eigenvalue(half_length, nk, params, sigma)?
        };
        let h = 2.0 * half_length / (nk - 1) as f64;
        rows.extend_from_slice(&[1.0, h * h, h.powi(4)]);
        rhs.push(lam);
    }
    let m = DMatrix::from_row_slice(3, 3, &rows);
    let sol = m
        .lu()
        .solve(&nalgebra::DVector::from_vec(rhs))
        .ok_or_else(|| Error::Singular("Richardson system".into()))?;
    Ok(-sol[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, parity_defect};

    fn cheb(n: usize) -> Grid1D {
        build_grid(20.0, n, Scheme::ChebyshevMapped).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(Params::new(1.0, 1.0, 1.0).is_ok());
        assert!(Params::new(1.0, 1.5, 1.0).is_err());
        assert!(Params::new(2.5, -0.5, 1.0).is_err());
        assert!(Params::new(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn free_operator_has_no_point_spectrum() {
        let g = cheb(128);
        let op = assemble_schrodinger(&g, 0.0);
        let s = localized_spectrum(&op, Subspace::Full).unwrap();
        assert!(s.eigenvalues.is_empty());
        assert!(matches!(
            compute_point_spectrum(&op, Subspace::Full, 1),
            Err(Error::SpectrumCount { requested: 1, found: 0 })
        ));
    }

    #[test]
    fn schrodinger_c6_odd_ground_state_is_translation_mode() {
        let g = cheb(256);
        let op = assemble_schrodinger(&g, 6.0);
        let s = compute_point_spectrum(&op, Subspace::Odd, 1).unwrap();
        assert!(s.eigenvalues[0].abs() < 1e-8);
        let v = &s.eigenvectors[0][0];
        assert!(parity_defect(v, Parity::Odd) < 1e-14);
        // sech' = -sech tanh, normalized
        let mut r = g.sample(|x| -sech(x) * x.tanh());
        let nr = g.l2_norm(&r);
        r.iter_mut().for_each(|v| *v /= nr);
        let sign = g.inner(&r, v).signum();
        let err: f64 = v.iter().zip(&r).map(|(a, b)| (a - sign * b).powi(2)).sum::<f64>();
        assert!(err.sqrt() < 1e-6);
    }

    #[test]
    fn a2_annihilates_sech() {
        let g = cheb(512);
        let op = assemble_a2(&g, &Params::default()).unwrap();
        let s = g.sample(sech);
        let r = op.apply(&s[1..511]);
        // the truncated tail sech(±20) only pollutes rows next to the boundary
        let rn = r
            .iter()
            .zip(&op.nodes)
            .filter(|(_, x)| x.abs() < 15.0)
            .map(|(v, _)| v.abs())
            .fold(0.0, f64::max);
        assert!(rn < 1e-8, "{rn}");
        let odd = localized_spectrum(&op, Subspace::Odd).unwrap();
        assert!(odd.eigenvalues.is_empty());
        let ds = g.apply_d1(&s);
        let r2 = op.apply(&ds[1..511]);
        assert!(r2.iter().any(|v| v.abs() > 1e-3));
    }

    #[test]
    fn a1_is_weighted_symmetric_on_both_schemes() {
        for scheme in [Scheme::ChebyshevMapped, Scheme::FiniteDifference] {
            let g = build_grid(20.0, 128, scheme).unwrap();
            let op = assemble_a1(&g, &Params::new(0.5, 1.5, 2.0).unwrap()).unwrap();
            assert!(op.symmetry_defect() < 1e-10, "{scheme}: {}", op.symmetry_defect());
        }
    }

    #[test]
    fn a1_translation_mode_lies_outside_the_symmetric_subspace() {
        let g = cheb(512);
        let p = Params::default();
        // derivative of the line-soliton profile (sech, tanh): (sech', sech²)
        let u = g.sample(|x| -sech(x) * x.tanh());
        let phi = g.sample(|x| sech(x).powi(2));
        let (r1, r2) = apply_a1(&u, &phi, &g, &p);
        let res = (g.inner(&r1, &r1) + g.inner(&r2, &r2)).sqrt();
        assert!(res < 1e-6, "{res}");
        assert!(parity_defect(&u, Parity::Odd) < 1e-15);
        assert!(parity_defect(&phi, Parity::Even) < 1e-15);
    }

    #[test]
    fn shift_moves_every_eigenvalue() {
        let g = cheb(128);
        let op = assemble_a1(&g, &Params::default()).unwrap();
        let base = compute_point_spectrum(&op, Subspace::Full, 1).unwrap();
        let shifted = compute_point_spectrum(&op.shifted(-0.5), Subspace::Full, 1).unwrap();
        assert!((shifted.eigenvalues[0] - base.eigenvalues[0] + 0.5).abs() < 1e-10);
    }

    #[test]
    fn single_parity_rejected_for_block_operators() {
        let g = cheb(64);
        let op = assemble_a1(&g, &Params::default()).unwrap();
        assert!(localized_spectrum(&op, Subspace::Even).is_err());
    }

    #[test]
    fn cutoff_profile() {
        assert_eq!(cutoff(0.3), 1.0);
        assert_eq!(cutoff(-1.0), 1.0);
        assert_eq!(cutoff(4.0), 0.0);
        assert!((cutoff(2.5) - 0.5).abs() < 1e-15);
        assert!(cutoff(1.5) > cutoff(3.0));
    }

    #[test]
    fn form_scan_rejects_oversized_support() {
        let g = cheb(64);
        let p = Params::default();
        assert!(form_limit_scan(&[6.0], &g, &p).is_err());
        assert!(form_limit_scan(&[3.0, 2.0], &g, &p).is_err());
        assert!(form_limit_scan(&[2.0, 5.0], &g, &p).is_ok());
    }

    #[test]
    fn zero_fields_have_zero_form() {
        let g = cheb(64);
        let z = vec![0.0; 64];
        assert_eq!(quadratic_form_a1(&z, &z, &g, &Params::default()), 0.0);
    }

    #[test]
    fn banded_fd_matches_dense_fd() {
        let p = Params::default();
        let g = build_grid(20.0, 128, Scheme::FiniteDifference).unwrap();
        let (dense, _, _) = a1_ground_state(&g, &p).unwrap();
        let banded = fd_lowest_eigenvalue(20.0, 128, &p, dense - 0.1).unwrap();
        assert!((dense - banded).abs() < 1e-11, "{dense} {banded}");
    }
}
