//! Truncated collocation grids on `[-Lx, Lx]`, parity bookkeeping and the
//! transverse Fourier ring.
//!
//! Two interchangeable discretizations are provided: second-order finite
//! differences on a uniform grid and a mapped spectral collocation on
//! Legendre-Gauss-Lobatto points (the `chebyshev-mapped` scheme; Lobatto
//! points cluster like Chebyshev points but give an exact
//! summation-by-parts quadrature). Both node sets are symmetric about the origin and
//! never contain `x = 0` (the node count is even), so a field splits cleanly
//! into even and odd parts by reversing the node order.
//!
//! Evanescent fields vanish at the two boundary nodes (homogeneous Dirichlet
//! truncation). Operators act on the `m = N - 2` interior nodes. For
//! parity-restricted work the interior is folded onto its right half, which
//! has `m / 2` nodes; see [`ReducedGrid`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default half-length of the truncated line; `sech(20) ≈ 4e-9`.
pub const DEFAULT_HALF_LENGTH: f64 = 20.0;

/// Default parameter of the Kosloff-Tal-Ezer map used by the Chebyshev scheme.
pub const DEFAULT_CHEBYSHEV_MAP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ChebyshevMapped,
    FiniteDifference,
}

impl Scheme {
    /// The other discretization, used for cross-checks.
    pub fn other(self) -> Self {
        match self {
            Scheme::ChebyshevMapped => Scheme::FiniteDifference,
            Scheme::FiniteDifference => Scheme::ChebyshevMapped,
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::ChebyshevMapped => write!(f, "chebyshev-mapped"),
            Scheme::FiniteDifference => write!(f, "finite-difference"),
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chebyshev-mapped" | "chebyshev" => Ok(Scheme::ChebyshevMapped),
            "finite-difference" | "fd" => Ok(Scheme::FiniteDifference),
            other => Err(Error::InvalidArgument(format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// Sign picked up under `x ↦ -x`.
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    /// Parity of the x-derivative of a field with this parity.
    pub fn derivative(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

/// Decay class of a field as `|x| → ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decay {
    Evanescent,
    /// The derivative decays but the field itself need not (mean-flow fields).
    Star,
}

/// Name of a component of the spatial-dynamics state `(u₁, v₁, u₂, v₂, φ, ψ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldRole {
    U1,
    V1,
    U2,
    V2,
    Phi,
    Psi,
}

impl FieldRole {
    /// Tag of the component inside the reflection-symmetric subspace.
    pub fn symmetric_tag(self) -> ParityTag {
        match self {
            FieldRole::U1 | FieldRole::V1 | FieldRole::U2 | FieldRole::V2 => ParityTag::EVEN,
            FieldRole::Phi | FieldRole::Psi => ParityTag::ODD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParityTag {
    pub parity: Parity,
    pub decay: Decay,
}

impl ParityTag {
    pub const EVEN: ParityTag = ParityTag {
        parity: Parity::Even,
        decay: Decay::Evanescent,
    };
    pub const ODD: ParityTag = ParityTag {
        parity: Parity::Odd,
        decay: Decay::Evanescent,
    };

    /// Builds a tag for a field of the given role. Star decay is reserved for
    /// the mean flow `φ`.
    pub fn for_role(role: FieldRole, parity: Parity, decay: Decay) -> Result<Self> {
        if decay == Decay::Star && role != FieldRole::Phi {
            return Err(Error::InvalidArgument(format!(
                "star decay is only admissible for the mean flow, not {role:?}"
            )));
        }
        Ok(ParityTag { parity, decay })
    }
}

/// A collocation grid on `[-Lx, Lx]`.
#[derive(Debug, Clone)]
pub struct Grid1D {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    d1: DMatrix<f64>,
    d2: DMatrix<f64>,
    scheme: Scheme,
    half_length: f64,
    map: f64,
    spectral: SpectralData,
}

/// Reference-interval data of the spectral scheme (empty for finite differences).
#[derive(Debug, Clone, Default)]
struct SpectralData {
    xi: Vec<f64>,
    wxi: Vec<f64>,
    pn: Vec<f64>,
    jac: Vec<f64>,
}

/// Builds a grid with the default Chebyshev map parameter.
pub fn build_grid(half_length: f64, n: usize, scheme: Scheme) -> Result<Grid1D> {
    Grid1D::new(half_length, n, scheme, DEFAULT_CHEBYSHEV_MAP)
}

impl Grid1D {
    /// `map` is the Kosloff-Tal-Ezer parameter `α ∈ [0, 1)` of the Chebyshev
    /// scheme (`x = Lx·asin(αξ)/asin(α)`, linear for `α = 0`); it is ignored
    /// by the finite-difference scheme.
    pub fn new(half_length: f64, n: usize, scheme: Scheme, map: f64) -> Result<Self> {
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "half-length must be positive, got {half_length}"
            )));
        }
        if n < 16 {
            return Err(Error::InvalidGrid(format!("need N >= 16 nodes, got {n}")));
        }
        if n % 2 == 1 {
            return Err(Error::InvalidGrid(format!(
                "N must be even so that the node set excludes x = 0, got {n}"
            )));
        }
        if !(0.0..1.0).contains(&map) {
            return Err(Error::InvalidGrid(format!(
                "Chebyshev map parameter must lie in [0, 1), got {map}"
            )));
        }
        let (nodes, weights, d1, d2, spectral) = match scheme {
            Scheme::FiniteDifference => {
                let (x, w, d1, d2) = finite_difference(half_length, n);
                (x, w, d1, d2, SpectralData::default())
            }
            Scheme::ChebyshevMapped => spectral(half_length, n, map),
        };
        Ok(Grid1D {
            nodes,
            weights,
            d1,
            d2,
            scheme,
            half_length,
            map,
            spectral,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn d1(&self) -> &DMatrix<f64> {
        &self.d1
    }

    pub fn d2(&self) -> &DMatrix<f64> {
        &self.d2
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn map_parameter(&self) -> f64 {
        self.map
    }

    /// Number of interior nodes `m = N - 2`.
    pub fn interior_len(&self) -> usize {
        self.nodes.len() - 2
    }

    pub fn interior_nodes(&self) -> &[f64] {
        &self.nodes[1..self.nodes.len() - 1]
    }

    pub fn interior_weights(&self) -> &[f64] {
        &self.weights[1..self.weights.len() - 1]
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }

    pub fn apply_d1(&self, field: &[f64]) -> Vec<f64> {
        matvec(&self.d1, field)
    }

    pub fn apply_d2(&self, field: &[f64]) -> Vec<f64> {
        matvec(&self.d2, field)
    }

    /// Interior block of a node-indexed matrix (evanescent columns dropped).
    pub fn interior_block(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.interior_len();
        a.view((1, 1), (m, m)).into_owned()
    }

    /// Extends interior values by zero boundary values.
    pub fn extend_interior(&self, interior: &[f64]) -> Vec<f64> {
        debug_assert_eq!(interior.len(), self.interior_len());
        let mut out = Vec::with_capacity(self.len());
        out.push(0.0);
        out.extend_from_slice(interior);
        out.push(0.0);
        out
    }

    /// Approximates `∫ f dx` over `[-Lx, Lx]`.
    pub fn quadrature(&self, field: &[f64]) -> f64 {
        quadrature(field, self)
    }

    /// `∫ a b dx`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }

    pub fn l2_norm(&self, a: &[f64]) -> f64 {
        self.inner(a, a).sqrt()
    }

    /// Odd antiderivative `φ(x) = ∫₀ˣ p` of the even part of `p`.
    ///
    /// For finite differences this is the trapezoid rule, for which the
    /// three-point second difference of `φ` equals the central first
    /// difference of `p` exactly. For Chebyshev the integration is carried
    /// out in coefficient space, so that `D1 φ = p` to rounding.
    pub fn antiderivative_odd(&self, p: &[f64]) -> Vec<f64> {
        let p = parity_project(p, Parity::Even);
        let n = self.len();
        let mut phi = vec![0.0; n];
        match self.scheme {
            Scheme::FiniteDifference => {
                let h = self.nodes[1] - self.nodes[0];
                let c = n / 2;
                phi[c] = 0.25 * h * (p[c - 1] + p[c]);
                for j in c + 1..n {
                    phi[j] = phi[j - 1] + 0.5 * h * (p[j - 1] + p[j]);
                }
            }
            Scheme::ChebyshevMapped => {
                // Legendre coefficients of p·x'(ξ), integrated term by term:
                // ∫ P_k = (P_{k+1} − P_{k−1}) / (2k + 1).
                let sd = &self.spectral;
                let deg = n - 1;
                let g: Vec<f64> = (0..n).map(|j| sd.wxi[j] * p[j] * sd.jac[j]).collect();
                let mut prev = vec![1.0; n];
                let mut cur = sd.xi.clone();
                let (mut p0_prev, mut p0_cur) = (1.0, 0.0);
                // k = 0 term
                let a0: f64 = 0.5 * g.iter().sum::<f64>();
                for j in 0..n {
                    phi[j] = a0 * sd.xi[j];
                }
                for k in 1..=deg {
                    let kf = k as f64;
                    let ck = if k < deg { (2.0 * kf + 1.0) / 2.0 } else { kf / 2.0 };
                    let ak = ck * g.iter().zip(&cur).map(|(a, b)| a * b).sum::<f64>();
                    let next: Vec<f64> = (0..n)
                        .map(|j| ((2.0 * kf + 1.0) * sd.xi[j] * cur[j] - kf * prev[j]) / (kf + 1.0))
                        .collect();
                    let p0_next = -kf * p0_prev / (kf + 1.0);
                    let at_zero = (p0_next - p0_prev) / (2.0 * kf + 1.0);
                    for j in 0..n {
                        phi[j] += ak * ((next[j] - prev[j]) / (2.0 * kf + 1.0) - at_zero);
                    }
                    prev = std::mem::replace(&mut cur, next);
                    p0_prev = std::mem::replace(&mut p0_cur, p0_next);
                }
            }
        }
        for j in 0..n / 2 {
            let right = phi[n - 1 - j];
            phi[j] = -right;
        }
        parity_project(&phi, Parity::Odd)
    }

    /// Evaluates the grid interpolant of `values` at `x`; zero outside the grid.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let l = self.half_length;
        if x < -l || x > l {
            return 0.0;
        }
        match self.scheme {
            Scheme::FiniteDifference => {
                let h = self.nodes[1] - self.nodes[0];
                let t = (x + l) / h;
                let j = (t.floor() as usize).min(self.len() - 2);
                let f = t - j as f64;
                values[j] * (1.0 - f) + values[j + 1] * f
            }
            Scheme::ChebyshevMapped => {
                let xi = if self.map > 0.0 {
                    ((x / l) * self.map.asin()).sin() / self.map
                } else {
                    x / l
                };
                // barycentric weights of Lobatto points are proportional to 1/P_deg
                let sd = &self.spectral;
                let mut num = 0.0;
                let mut den = 0.0;
                for j in 0..self.len() {
                    let diff = xi - sd.xi[j];
                    if diff.abs() < 1e-15 {
                        return values[j];
                    }
                    let wj = 1.0 / (sd.pn[j] * diff);
                    num += wj * values[j];
                    den += wj;
                }
                num / den
            }
        }
    }

    /// Parity-reduced operators on the right half of the interior.
    pub fn reduced(&self) -> ReducedGrid {
        ReducedGrid::new(self)
    }
}

/// Approximates `∫ field dx` with the grid's quadrature weights.
pub fn quadrature(field: &[f64], grid: &Grid1D) -> f64 {
    debug_assert_eq!(field.len(), grid.len());
    grid.weights.iter().zip(field).map(|(w, f)| w * f).sum()
}

/// Reverses the node order, i.e. evaluates `f(-x)` on the symmetric node set.
pub fn reflect(field: &[f64]) -> Vec<f64> {
    field.iter().rev().copied().collect()
}

/// Even or odd part of a field sampled on a symmetric node set. Idempotent.
pub fn parity_project(field: &[f64], parity: Parity) -> Vec<f64> {
    let s = parity.sign();
    field
        .iter()
        .zip(field.iter().rev())
        .map(|(a, b)| 0.5 * (a + s * b))
        .collect()
}

/// Parity projection driven by a [`ParityTag`].
pub fn parity_project_tagged(field: &[f64], tag: ParityTag) -> Vec<f64> {
    parity_project(field, tag.parity)
}

/// Largest magnitude of the component of `field` with the wrong parity.
pub fn parity_defect(field: &[f64], parity: Parity) -> f64 {
    let s = parity.sign();
    field
        .iter()
        .zip(field.iter().rev())
        .map(|(a, b)| 0.5 * (a - s * b).abs())
        .fold(0.0, f64::max)
}

pub(crate) fn matvec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let (r, c) = a.shape();
    debug_assert_eq!(c, x.len());
    let mut y = vec![0.0; r];
    // column-major storage: accumulate column by column
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        let col = a.column(j);
        for (yi, aij) in y.iter_mut().zip(col.iter()) {
            *yi += aij * xj;
        }
    }
    y
}

fn finite_difference(l: f64, n: usize) -> (Vec<f64>, Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
    let last = (n - 1) as f64;
    let nodes: Vec<f64> = (0..n)
        .map(|j| l * (2.0 * j as f64 - last) / last)
        .collect();
    let h = 2.0 * l / last;
    let mut weights = vec![h; n];
    weights[0] = 0.5 * h;
    weights[n - 1] = 0.5 * h;

    let mut d1 = DMatrix::zeros(n, n);
    let mut d2 = DMatrix::zeros(n, n);
    for i in 1..n - 1 {
        d1[(i, i - 1)] = -0.5 / h;
        d1[(i, i + 1)] = 0.5 / h;
        d2[(i, i - 1)] = 1.0 / (h * h);
        d2[(i, i)] = -2.0 / (h * h);
        d2[(i, i + 1)] = 1.0 / (h * h);
    }
    // second-order one-sided boundary rows
    d1[(0, 0)] = -1.5 / h;
    d1[(0, 1)] = 2.0 / h;
    d1[(0, 2)] = -0.5 / h;
    d1[(n - 1, n - 1)] = 1.5 / h;
    d1[(n - 1, n - 2)] = -2.0 / h;
    d1[(n - 1, n - 3)] = 0.5 / h;
    let h2 = h * h;
    for (k, c) in [2.0, -5.0, 4.0, -1.0].iter().enumerate() {
        d2[(0, k)] = c / h2;
        d2[(n - 1, n - 1 - k)] = c / h2;
    }
    (nodes, weights, d1, d2)
}

/// Legendre-Gauss-Lobatto points on `[-1, 1]` (increasing), their
/// quadrature weights and `P_deg` at each point.
fn lgl_points(deg: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = deg as f64;
    let mut xi: Vec<f64> = (0..=deg)
        .map(|j| -(std::f64::consts::PI * j as f64 / n).cos())
        .collect();
    let mut pn = vec![0.0; deg + 1];
    for _ in 0..100 {
        let mut change: f64 = 0.0;
        for (x, p) in xi.iter_mut().zip(pn.iter_mut()) {
            let (prev, cur) = legendre_pair(deg, *x);
            let step = (*x * cur - prev) / ((n + 1.0) * cur);
            *x -= step;
            *p = cur;
            change = change.max(step.abs());
        }
        if change < 1e-16 {
            break;
        }
    }
    // exact symmetry about the origin
    for j in 0..=deg / 2 {
        let s = 0.5 * (xi[deg - j] - xi[j]);
        xi[j] = -s;
        xi[deg - j] = s;
    }
    xi[0] = -1.0;
    xi[deg] = 1.0;
    for (x, p) in xi.iter().zip(pn.iter_mut()) {
        *p = legendre_pair(deg, *x).1;
    }
    let w = pn.iter().map(|p| 2.0 / (n * (n + 1.0) * p * p)).collect();
    (xi, w, pn)
}

/// `(P_{deg-1}(x), P_deg(x))` by the three-term recurrence.
fn legendre_pair(deg: usize, x: f64) -> (f64, f64) {
    let (mut prev, mut cur) = (1.0, x);
    for k in 1..deg {
        let next = ((2 * k + 1) as f64 * x * cur - k as f64 * prev) / (k + 1) as f64;
        prev = cur;
        cur = next;
    }
    (prev, cur)
}

fn spectral_jacobian(l: f64, xi: &[f64], map: f64) -> Vec<f64> {
    xi.iter()
        .map(|&s| {
            if map > 0.0 {
                l * map / (map.asin() * (1.0 - (map * s).powi(2)).sqrt())
            } else {
                l
            }
        })
        .collect()
}

/// Mapped Legendre-Gauss-Lobatto collocation. The quadrature integrates
/// `u·v'` exactly for interpolants `u, v`, so `W D1 + D1ᵀ W` vanishes away
/// from the two boundary entries and every operator assembled from `D1`,
/// `D2 = D1²` and diagonal coefficients is exactly symmetric in `W` on the
/// interior.
fn spectral(l: f64, n: usize, map: f64) -> (Vec<f64>, Vec<f64>, DMatrix<f64>, DMatrix<f64>, SpectralData) {
    let deg = n - 1;
    let (xi, wxi, pn) = lgl_points(deg);
    let nodes: Vec<f64> = xi
        .iter()
        .map(|&s| {
            if map > 0.0 {
                l * (map * s).asin() / map.asin()
            } else {
                l * s
            }
        })
        .collect();
    let jac = spectral_jacobian(l, &xi, map);
    let weights: Vec<f64> = wxi.iter().zip(&jac).map(|(w, d)| w * d).collect();

    let mut d1 = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            if i != j {
                let v = (pn[i] / pn[j]) / (xi[i] - xi[j]);
                d1[(i, j)] = v;
                s += v;
            }
        }
        d1[(i, i)] = -s;
    }
    for i in 0..n {
        let inv = 1.0 / jac[i];
        for j in 0..n {
            d1[(i, j)] *= inv;
        }
    }
    let d2 = &d1 * &d1;
    (nodes, weights, d1, d2, SpectralData { xi, wxi, pn, jac })
}

/// Parity-folded view of a grid.
///
/// A field of known parity on the interior is determined by its values on the
/// `h = m/2` right-half interior nodes. Folded derivative matrices map
/// right-half values of a field of one parity to right-half values of its
/// derivative; all fields are evanescent (zero boundary values).
#[derive(Debug, Clone)]
pub struct ReducedGrid {
    pub x: Vec<f64>,
    /// Right-half quadrature weights (the full integral is twice the sum).
    pub w: Vec<f64>,
    pub d2_even: DMatrix<f64>,
    pub d2_odd: DMatrix<f64>,
    /// Even field ↦ its (odd) derivative.
    pub d1_even: DMatrix<f64>,
    /// Odd field ↦ its (even) derivative.
    pub d1_odd: DMatrix<f64>,
    /// `D1 ∘ antiderivative` acting on even fields (identity up to the
    /// scheme's consistency error).
    pub d1_antideriv: DMatrix<f64>,
}

impl ReducedGrid {
    fn new(grid: &Grid1D) -> Self {
        let d1 = grid.interior_block(grid.d1());
        let d2 = grid.interior_block(grid.d2());
        let m = grid.interior_len();
        let h = m / 2;
        let x = grid.interior_nodes()[h..].to_vec();
        let w = grid.interior_weights()[h..].to_vec();

        // D1 ∘ T on even fields, assembled column by column
        let mut d1t = DMatrix::zeros(h, h);
        for b in 0..h {
            let mut e = vec![0.0; h];
            e[b] = 1.0;
            let full = unfold_to_nodes(&e, Parity::Even, grid.len());
            let phi = grid.antiderivative_odd(&full);
            let dphi = grid.apply_d1(&phi);
            for a in 0..h {
                d1t[(a, b)] = dphi[1 + h + a];
            }
        }

        ReducedGrid {
            x,
            w,
            d2_even: fold_matrix(&d2, Parity::Even),
            d2_odd: fold_matrix(&d2, Parity::Odd),
            d1_even: fold_matrix(&d1, Parity::Even),
            d1_odd: fold_matrix(&d1, Parity::Odd),
            d1_antideriv: d1t,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Half-line inner product; equals half of the full-line integral for
    /// fields of definite parity.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.w
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.x.iter().map(|&x| f(x)).collect()
    }
}

/// Folds an interior `m×m` operator whose input has parity `col` onto the
/// right-half coordinates. Rows are taken on the right half, so the output
/// parity is implied by the operator.
pub fn fold_matrix(a: &DMatrix<f64>, col: Parity) -> DMatrix<f64> {
    let m = a.nrows();
    let h = m / 2;
    let s = col.sign();
    DMatrix::from_fn(h, h, |r, c| a[(h + r, h + c)] + s * a[(h + r, h - 1 - c)])
}

/// Right-half interior values of a full node vector.
pub fn fold_field(full: &[f64]) -> Vec<f64> {
    let n = full.len();
    let h = (n - 2) / 2;
    full[1 + h..n - 1].to_vec()
}

/// Rebuilds a full node vector (zero boundary values) from right-half values.
pub fn unfold_to_nodes(half: &[f64], parity: Parity, n: usize) -> Vec<f64> {
    let h = half.len();
    debug_assert_eq!(2 * h + 2, n);
    let s = parity.sign();
    let mut out = vec![0.0; n];
    for (a, v) in half.iter().enumerate() {
        out[1 + h + a] = *v;
        out[h - a] = s * v;
    }
    out
}

/// Transverse Fourier ring: modes `0..=M` in `Y = ωy`, period `2π/ω` in `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierRing {
    pub modes: usize,
    pub period: f64,
    pub parity: RingParity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RingParity {
    Even,
    Odd,
    Full,
}

impl FourierRing {
    pub fn new(modes: usize, period: f64, parity: RingParity) -> Result<Self> {
        if modes < 1 {
            return Err(Error::InvalidArgument("Fourier ring needs M >= 1".into()));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "ring period must be positive, got {period}"
            )));
        }
        Ok(FourierRing {
            modes,
            period,
            parity,
        })
    }

    /// Number of uniform samples over one period that projects products of
    /// up to three members of the ring back onto modes `0..=M` without
    /// aliasing.
    pub fn dealiased_samples(&self) -> usize {
        4 * self.modes + 2
    }

    /// `cos(n Y_j)` for `n = 0..=M` and `Y_j = 2πj/Ny`, indexed `[(n, j)]`.
    pub fn cosine_table(&self) -> DMatrix<f64> {
        let ny = self.dealiased_samples();
        DMatrix::from_fn(self.modes + 1, ny, |n, j| {
            (2.0 * std::f64::consts::PI * (n * j) as f64 / ny as f64).cos()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sech(x: f64) -> f64 {
        1.0 / x.cosh()
    }

    #[test]
    fn rejects_odd_and_small_node_counts() {
        assert!(matches!(
            build_grid(20.0, 513, Scheme::FiniteDifference),
            Err(Error::InvalidGrid(_))
        ));
        assert!(build_grid(20.0, 14, Scheme::ChebyshevMapped).is_err());
        assert!(build_grid(-1.0, 64, Scheme::ChebyshevMapped).is_err());
    }

    #[test]
    fn uniform_spacing() {
        let g = build_grid(20.0, 512, Scheme::FiniteDifference).unwrap();
        let h = 40.0 / 511.0;
        for w in g.nodes().windows(2) {
            assert!((w[1] - w[0] - h).abs() < 1e-12);
        }
        assert_eq!(g.nodes()[0], -20.0);
        assert_eq!(g.nodes()[511], 20.0);
    }

    #[test]
    fn nodes_symmetric_and_weights_positive() {
        for scheme in [Scheme::FiniteDifference, Scheme::ChebyshevMapped] {
            let g = build_grid(20.0, 128, scheme).unwrap();
            let x = g.nodes();
            for j in 0..x.len() {
                assert_eq!(x[j], -x[x.len() - 1 - j]);
            }
            assert!(x.windows(2).all(|w| w[1] > w[0]));
            assert!(g.weights().iter().all(|&w| w > 0.0));
            assert!((g.weights().iter().sum::<f64>() - 40.0).abs() < 1e-10);
        }
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        for scheme in [Scheme::FiniteDifference, Scheme::ChebyshevMapped] {
            let g = build_grid(20.0, 256, scheme).unwrap();
            let d = g.apply_d1(&vec![1.0; 256]);
            assert!(d.iter().all(|v| v.abs() < 1e-10), "{scheme}");
        }
    }

    #[test]
    fn chebyshev_derivatives_of_soliton_profiles() {
        let g = build_grid(20.0, 512, Scheme::ChebyshevMapped).unwrap();
        let dtanh = g.apply_d1(&g.sample(f64::tanh));
        let err1 = dtanh
            .iter()
            .zip(g.nodes())
            .map(|(d, &x)| (d - sech(x).powi(2)).abs())
            .fold(0.0, f64::max);
        assert!(err1 < 1e-4, "{err1}");
        let d2 = g.apply_d2(&g.sample(sech));
        let err2 = d2
            .iter()
            .zip(g.nodes())
            .map(|(d, &x)| (d - (sech(x) - 2.0 * sech(x).powi(3))).abs())
            .fold(0.0, f64::max);
        assert!(err2 < 1e-3, "{err2}");
    }

    #[test]
    fn finite_difference_derivatives_are_second_order() {
        let errs: Vec<f64> = [256, 512]
            .iter()
            .map(|&n| {
                let g = build_grid(20.0, n, Scheme::FiniteDifference).unwrap();
                let d = g.apply_d1(&g.sample(f64::tanh));
                d.iter()
                    .zip(g.nodes())
                    .map(|(d, &x)| (d - sech(x).powi(2)).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        let order = (errs[0] / errs[1]).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
    }

    #[test]
    fn quadrature_of_sech_powers() {
        for scheme in [Scheme::FiniteDifference, Scheme::ChebyshevMapped] {
            let g = build_grid(20.0, 512, scheme).unwrap();
            let q2 = quadrature(&g.sample(|x| sech(x).powi(2)), &g);
            let q4 = quadrature(&g.sample(|x| sech(x).powi(4)), &g);
            assert!((q2 - 2.0).abs() < 1e-8, "{scheme}: {q2}");
            assert!((q4 - 4.0 / 3.0).abs() < 1e-8, "{scheme}: {q4}");
            assert_eq!(quadrature(&vec![0.0; 512], &g), 0.0);
        }
    }

    #[test]
    fn parity_projection_examples() {
        let g = build_grid(20.0, 64, Scheme::ChebyshevMapped).unwrap();
        let s = g.sample(sech);
        let t = g.sample(f64::tanh);
        assert_eq!(parity_project(&s, Parity::Even), s);
        assert!(parity_project(&t, Parity::Even).iter().all(|v| *v == 0.0));
        let sum: Vec<f64> = s.iter().zip(&t).map(|(a, b)| a + b).collect();
        let odd = parity_project(&sum, Parity::Odd);
        for (a, b) in odd.iter().zip(&t) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn star_tag_reserved_for_mean_flow() {
        assert!(ParityTag::for_role(FieldRole::Phi, Parity::Odd, Decay::Star).is_ok());
        assert!(ParityTag::for_role(FieldRole::U1, Parity::Even, Decay::Star).is_err());
        assert!(ParityTag::for_role(FieldRole::U1, Parity::Even, Decay::Evanescent).is_ok());
    }

    #[test]
    fn antiderivative_recovers_tanh() {
        for (scheme, tol) in [
            (Scheme::ChebyshevMapped, 1e-10),
            (Scheme::FiniteDifference, 2e-3),
        ] {
            let g = build_grid(20.0, 512, scheme).unwrap();
            let phi = g.antiderivative_odd(&g.sample(|x| sech(x).powi(2)));
            let err = phi
                .iter()
                .zip(g.nodes())
                .map(|(p, &x)| (p - x.tanh()).abs())
                .fold(0.0, f64::max);
            assert!(err < tol, "{scheme}: {err}");
        }
    }

    #[test]
    fn chebyshev_antiderivative_is_a_right_inverse_of_d1() {
        let g = build_grid(20.0, 256, Scheme::ChebyshevMapped).unwrap();
        let p = g.sample(|x| sech(x).powi(2) + 0.3 * (-x * x).exp());
        let back = g.apply_d1(&g.antiderivative_odd(&p));
        let err = back
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn finite_difference_antiderivative_matches_second_difference() {
        let g = build_grid(20.0, 128, Scheme::FiniteDifference).unwrap();
        let p = g.sample(|x| sech(x).powi(2));
        let phi = g.antiderivative_odd(&p);
        let lhs = g.apply_d2(&phi);
        let rhs = g.apply_d1(&p);
        for i in 1..127 {
            assert!((lhs[i] - rhs[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_reproduces_smooth_profiles() {
        for (scheme, tol) in [
            (Scheme::ChebyshevMapped, 1e-8),
            (Scheme::FiniteDifference, 1e-2),
        ] {
            let g = build_grid(20.0, 256, scheme).unwrap();
            let v = g.sample(sech);
            for &x in &[-3.3, -0.1, 0.0, 0.77, 5.5] {
                assert!((g.interpolate(&v, x) - sech(x)).abs() < tol, "{scheme} {x}");
            }
            assert_eq!(g.interpolate(&v, 25.0), 0.0);
        }
    }

    #[test]
    fn fold_and_unfold_round_trip() {
        let g = build_grid(10.0, 32, Scheme::ChebyshevMapped).unwrap();
        let f = g.sample(|x| x * (-x * x).exp());
        let mut f0 = f.clone();
        f0[0] = 0.0;
        f0[31] = 0.0;
        let back = unfold_to_nodes(&fold_field(&f0), Parity::Odd, 32);
        for (a, b) in back.iter().zip(&f0) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn folded_derivative_matches_full_derivative() {
        let g = build_grid(20.0, 128, Scheme::ChebyshevMapped).unwrap();
        let r = g.reduced();
        let f = g.sample(|x| sech(x).powi(2));
        let df_full = g.apply_d1(&f);
        let df_half = matvec(&r.d1_even, &fold_field(&f));
        for (a, b) in df_half.iter().zip(fold_field(&df_full)) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn cosine_table_dimensions() {
        let ring = FourierRing::new(16, 4.0, RingParity::Even).unwrap();
        let t = ring.cosine_table();
        assert_eq!(t.shape(), (17, 66));
        assert!(FourierRing::new(0, 1.0, RingParity::Even).is_err());
    }
}
