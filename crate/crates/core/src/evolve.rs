//! Split-step Fourier time stepping of the full two-dimensional system
//!
//! ```text
//! iA_t + A_xx + A_yy + (γ₁|A|² + γ₂φₓ)A = 0,     γ₃φₓₓ + φ_yy = γ₃(|A|²)ₓ
//! ```
//!
//! on a doubly periodic box, used as an independent check of the growth
//! rates from the pencil.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::instability::InstabilityMode;
use crate::operators::{sech, Params};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T: f64 = 30.0;
/// Upper edge of the linear growth window.
pub const WINDOW_TOP: f64 = 1e-2;
/// The window starts at this multiple of the seed amplitude.
pub const WINDOW_FLOOR: f64 = 3.0;

/// Periodic box `[−Lx, Lx) × [0, 2π/κ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain2D {
    pub nx: usize,
    pub ny: usize,
    pub half_length: f64,
    pub kappa: f64,
}

impl Domain2D {
    pub fn new(nx: usize, ny: usize, half_length: f64, kappa: f64) -> Result<Self> {
        if nx < 8 || ny < 1 || nx % 2 != 0 || (ny > 1 && ny % 2 != 0) {
            return Err(Error::InvalidGrid(format!(
                "periodic box needs even nx >= 8 and ny = 1 or even, got {nx} x {ny}"
            )));
        }
        if !(half_length > 0.0 && half_length.is_finite()) || !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "box needs Lx > 0 and κ > 0, got Lx = {half_length}, κ = {kappa}"
            )));
        }
        Ok(Domain2D {
            nx,
            ny,
            half_length,
            kappa,
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.y_period() / self.ny as f64
    }

    pub fn y_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.kappa
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_length + self.dx() * i as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        self.dy() * j as f64
    }

    /// Angular wavenumbers `(ξ, η)` of Fourier index `(i, j)`.
    fn wavenumbers(&self, i: usize, j: usize) -> (f64, f64) {
        let signed = |k: usize, n: usize| if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        (
            std::f64::consts::PI / self.half_length * signed(i, self.nx),
            self.kappa * signed(j, self.ny),
        )
    }

    /// 2/3-rule mask for quadratic products.
    fn keeps(&self, i: usize, j: usize) -> bool {
        let signed = |k: usize, n: usize| if k <= n / 2 { k as i64 } else { k as i64 - n as i64 };
        3 * signed(i, self.nx).unsigned_abs() as usize <= self.nx
            && 3 * signed(j, self.ny).unsigned_abs() as usize <= self.ny.max(3)
    }
}

/// Complex amplitude on the box, stored row-major as `a[j·nx + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2DC {
    pub domain: Domain2D,
    pub a: Vec<Complex64>,
    pub t: f64,
}

/// JSON snapshot of a [`Field2DC`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSnapshot {
    pub domain: Domain2D,
    pub t: f64,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl Field2DC {
    pub fn from_fn(domain: Domain2D, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let mut a = Vec::with_capacity(domain.len());
        for j in 0..domain.ny {
            for i in 0..domain.nx {
                a.push(f(domain.x(i), domain.y(j)));
            }
        }
        Field2DC { domain, a, t: 0.0 }
    }

    /// `e^{it} sech(x)`, independent of `y`.
    pub fn line_soliton(domain: Domain2D) -> Self {
        Self::from_fn(domain, |x, _| Complex64::new(sech(x), 0.0))
    }

    /// Line soliton plus `amp · (u₁ + i u₂)(x) cos(κy)`, with the mode taken
    /// from `grid` and rescaled so the seeded ring has norm `amp`.
    pub fn seeded(domain: Domain2D, mode: &InstabilityMode, grid: &Grid1D, amp: f64) -> Result<Self> {
        if grid.half_length() != domain.half_length {
            return Err(Error::InvalidArgument(format!(
                "mode grid half-length {} differs from the box {}",
                grid.half_length(),
                domain.half_length
            )));
        }
        let prof: Vec<Complex64> = (0..domain.nx)
            .map(|i| {
                let x = domain.x(i);
                Complex64::new(grid.interpolate(&mode.u1, x), grid.interpolate(&mode.u2, x))
            })
            .collect();
        let mut field = Self::line_soliton(domain);
        let mut seed = field.clone();
        for j in 0..domain.ny {
            let c = (domain.kappa * domain.y(j)).cos();
            for i in 0..domain.nx {
                seed.a[j * domain.nx + i] = prof[i] * c;
            }
        }
        let scale = amp / ring_norm(&seed);
        for (a, s) in field.a.iter_mut().zip(&seed.a) {
            *a += scale * s;
        }
        Ok(field)
    }

    /// `∫|A|²` over the box.
    pub fn mass(&self) -> f64 {
        self.a.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.domain.dx() * self.domain.dy()
    }

    pub fn to_snapshot(&self) -> FieldSnapshot {
        FieldSnapshot {
            domain: self.domain,
            t: self.t,
            re: self.a.iter().map(|v| v.re).collect(),
            im: self.a.iter().map(|v| v.im).collect(),
        }
    }

    pub fn from_snapshot(s: &FieldSnapshot) -> Result<Self> {
        if s.re.len() != s.domain.len() || s.im.len() != s.domain.len() {
            return Err(Error::InvalidArgument("snapshot size does not match its box".into()));
        }
        Ok(Field2DC {
            domain: s.domain,
            a: s.re.iter().zip(&s.im).map(|(&r, &i)| Complex64::new(r, i)).collect(),
            t: s.t,
        })
    }
}

/// Forward/inverse 2-D FFT on a row-major `ny × nx` array.
struct Fft2 {
    nx: usize,
    ny: usize,
    fx: Arc<dyn Fft<f64>>,
    ix: Arc<dyn Fft<f64>>,
    fy: Arc<dyn Fft<f64>>,
    iy: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(d: &Domain2D) -> Self {
        let mut p = FftPlanner::new();
        Fft2 {
            nx: d.nx,
            ny: d.ny,
            fx: p.plan_fft_forward(d.nx),
            ix: p.plan_fft_inverse(d.nx),
            fy: p.plan_fft_forward(d.ny),
            iy: p.plan_fft_inverse(d.ny),
        }
    }

    fn run(&self, a: &mut [Complex64], forward: bool) {
        let (fx, fy) = if forward { (&self.fx, &self.fy) } else { (&self.ix, &self.iy) };
        fx.process(a);
        if self.ny > 1 {
            let mut col = vec![Complex64::default(); self.ny];
            for i in 0..self.nx {
                for j in 0..self.ny {
                    col[j] = a[j * self.nx + i];
                }
                fy.process(&mut col);
                for j in 0..self.ny {
                    a[j * self.nx + i] = col[j];
                }
            }
        }
        if !forward {
            let s = 1.0 / (self.nx * self.ny) as f64;
            a.iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// `∂ₓφ` from `|A|²` by the multiplier `γ₃ξ²/(γ₃ξ² + η²)`, with 2/3-rule
/// dealiasing. The `(0, 0)` mode passes through unchanged so that the
/// y-independent reduction gives `φₓ = |A|²` exactly.
pub fn phi_x_of(a2: &[f64], domain: &Domain2D, params: &Params) -> Vec<f64> {
    phi_x_with(a2, domain, params, &Fft2::new(domain))
}

fn phi_x_with(a2: &[f64], d: &Domain2D, params: &Params, fft: &Fft2) -> Vec<f64> {
    let g3 = params.gamma3;
    let mut h: Vec<Complex64> = a2.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.run(&mut h, true);
    for j in 0..d.ny {
        for i in 0..d.nx {
            let (xi, eta) = d.wavenumbers(i, j);
            let m = if !d.keeps(i, j) {
                0.0
            } else if i == 0 && j == 0 {
                1.0
            } else {
                g3 * xi * xi / (g3 * xi * xi + eta * eta)
            };
            h[j * d.nx + i] *= m;
        }
    }
    fft.run(&mut h, false);
    h.into_iter().map(|v| v.re).collect()
}

/// Reusable stepper holding the FFT plans.
pub struct Stepper {
    domain: Domain2D,
    params: Params,
    fft: Fft2,
}

impl Stepper {
    pub fn new(domain: Domain2D, params: &Params) -> Result<Self> {
        params.validate()?;
        Ok(Stepper {
            fft: Fft2::new(&domain),
            domain,
            params: *params,
        })
    }

    fn linear(&self, a: &mut [Complex64], tau: f64) {
        self.fft.run(a, true);
        let d = &self.domain;
        for j in 0..d.ny {
            for i in 0..d.nx {
                let (xi, eta) = d.wavenumbers(i, j);
                a[j * d.nx + i] *= Complex64::from_polar(1.0, -(xi * xi + eta * eta) * tau);
            }
        }
        self.fft.run(a, false);
    }

    fn nonlinear(&self, a: &mut [Complex64], tau: f64) {
        let a2: Vec<f64> = a.iter().map(|v| v.norm_sqr()).collect();
        let px = phi_x_with(&a2, &self.domain, &self.params, &self.fft);
        let Params { gamma1, gamma2, .. } = self.params;
        for ((v, m), p) in a.iter_mut().zip(&a2).zip(&px) {
            *v *= Complex64::from_polar(1.0, (gamma1 * m + gamma2 * p) * tau);
        }
    }

    /// Strang step of signed length `dt`.
    fn strang(&self, field: &mut Field2DC, dt: f64) -> Result<()> {
        self.linear(&mut field.a, 0.5 * dt);
        self.nonlinear(&mut field.a, dt);
        self.linear(&mut field.a, 0.5 * dt);
        field.t += dt;
        if field.a.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite { t: field.t });
        }
        Ok(())
    }

    pub fn step(&self, field: &mut Field2DC, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        if field.domain != self.domain {
            return Err(Error::InvalidArgument("field and stepper boxes differ".into()));
        }
        self.strang(field, dt)
    }

    /// Advances to `t_end` in steps of (at most) `dt`.
    pub fn advance(&self, field: &mut Field2DC, t_end: f64, dt: f64) -> Result<()> {
        let steps = ((t_end - field.t) / dt).round().max(0.0) as usize;
        for _ in 0..steps {
            self.step(field, dt)?;
        }
        Ok(())
    }
}

/// One Strang step.
pub fn step(field: &Field2DC, dt: f64, params: &Params) -> Result<Field2DC> {
    let mut out = field.clone();
    Stepper::new(field.domain, params)?.step(&mut out, dt)?;
    Ok(out)
}

/// `L²` norm of the `cos κy` ring (both `η = ±κ`), normalized so that
/// `f(x) cos(κy)` has norm `‖f‖`.
pub fn ring_norm(field: &Field2DC) -> f64 {
    let d = &field.domain;
    if d.ny < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..d.nx {
        let mut c = Complex64::default();
        let mut s = Complex64::default();
        for j in 0..d.ny {
            let arg = d.kappa * d.y(j);
            c += field.a[j * d.nx + i] * arg.cos();
            s += field.a[j * d.nx + i] * arg.sin();
        }
        let scale = 2.0 / d.ny as f64;
        total += (c * scale).norm_sqr() + (s * scale).norm_sqr();
    }
    (total * d.dx()).sqrt()
}

/// Sampled time series of a run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GrowthSeries {
    pub t: Vec<f64>,
    pub perturbation: Vec<f64>,
    pub mass: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthMeasurement {
    pub lambda: f64,
    /// Time interval used for the fit.
    pub window: (f64, f64),
    pub series: GrowthSeries,
}

/// Least-squares slope of `ln y` against `t` over the samples with `y` in
/// `[lo, hi]`; `None` if fewer than three qualify.
pub fn log_slope(t: &[f64], y: &[f64], lo: f64, hi: f64) -> Option<(f64, (f64, f64))> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(_, &v)| v >= lo && v <= hi)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Some((sxy / sxx, (pts[0].0, pts[pts.len() - 1].0)))
}

/// Runs `field0` to `t_max` (or until the ring leaves the linear window)
/// recording the ring norm every `sample_every` steps.
pub fn run_series(field0: &Field2DC, t_max: f64, dt: f64, params: &Params, sample_every: usize) -> Result<GrowthSeries> {
    Ok(evolve_series(field0, t_max, dt, params, sample_every)?.0)
}

/// [`run_series`] that also returns the final field.
pub fn evolve_series(
    field0: &Field2DC,
    t_max: f64,
    dt: f64,
    params: &Params,
    sample_every: usize,
) -> Result<(GrowthSeries, Field2DC)> {
    let stepper = Stepper::new(field0.domain, params)?;
    let mut f = field0.clone();
    let mut series = GrowthSeries::default();
    let steps = (t_max / dt).round() as usize;
    let every = sample_every.max(1);
    for n in 0..=steps {
        if n % every == 0 {
            let r = ring_norm(&f);
            series.t.push(f.t);
            series.perturbation.push(r);
            series.mass.push(f.mass());
            if r > 10.0 * WINDOW_TOP {
                break;
            }
        }
        if n < steps {
            stepper.step(&mut f, dt)?;
        }
    }
    Ok((series, f))
}

/// Growth rate of the `cos κy` perturbation of a seeded line soliton.
pub fn measure_growth(field0: &Field2DC, amp: f64, t_max: f64, dt: f64, params: &Params) -> Result<GrowthMeasurement> {
    if !(amp > 0.0 && amp <= 1e-4) {
        return Err(Error::InvalidArgument(format!(
            "seed amplitude must be in (0, 1e-4], got {amp}"
        )));
    }
    let series = run_series(field0, t_max, dt, params, 10)?;
    match log_slope(&series.t, &series.perturbation, WINDOW_FLOOR * amp, WINDOW_TOP) {
        Some((lambda, window)) => Ok(GrowthMeasurement { lambda, window, series }),
        None => {
            let slope = log_slope(&series.t, &series.perturbation, 0.0, f64::INFINITY)
                .map(|s| s.0)
                .unwrap_or(0.0);
            Err(Error::NoGrowthWindow { slope })
        }
    }
}

/// Observed order of the splitting: log-log slope of the error against the
/// exact line soliton `e^{it} sech(x)` at `t_end` over the step sizes `dts`.
pub fn splitting_order(domain: Domain2D, params: &Params, t_end: f64, dts: &[f64]) -> Result<f64> {
    if dts.len() < 2 {
        return Err(Error::InvalidArgument("need at least two step sizes".into()));
    }
    let stepper = Stepper::new(domain, params)?;
    let mut pts = Vec::with_capacity(dts.len());
    for &dt in dts {
        let mut f = Field2DC::line_soliton(domain);
        stepper.advance(&mut f, t_end, dt)?;
        let err = f
            .a
            .iter()
            .enumerate()
            .map(|(k, v)| (v - Complex64::from_polar(sech(domain.x(k % domain.nx)), f.t)).norm())
            .fold(0.0, f64::max);
        pts.push((dt.ln(), err.ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box1(nx: usize) -> Domain2D {
        Domain2D::new(nx, 1, 20.0, 1.0).unwrap()
    }

    #[test]
    fn phi_x_of_constant_and_cosine() {
        let d = Domain2D::new(64, 8, 20.0, 0.7).unwrap();
        let p = Params::default();
        let c = phi_x_of(&vec![2.5; d.len()], &d, &p);
        // the mean passes through; no x-variation means no other content
        assert!(c.iter().all(|v| (v - 2.5).abs() < 1e-12));
        let xi0 = std::f64::consts::PI / 20.0 * 3.0;
        let f = Field2DC::from_fn(d, |x, _| Complex64::new((xi0 * x).cos(), 0.0));
        let a2: Vec<f64> = f.a.iter().map(|v| v.re).collect();
        let out = phi_x_of(&a2, &d, &p);
        for (a, b) in out.iter().zip(&a2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn phi_x_of_sech_squared_is_the_line_soliton_mean_flow() {
        let d = box1(256);
        let a2: Vec<f64> = (0..d.nx).map(|i| sech(d.x(i)).powi(2)).collect();
        let out = phi_x_of(&a2, &d, &Params::default());
        for (a, b) in out.iter().zip(&a2) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn y_dependent_mean_flow_has_no_x_mean() {
        let d = Domain2D::new(64, 8, 20.0, 0.7).unwrap();
        let f = Field2DC::from_fn(d, |_, y| Complex64::new((0.7 * y).cos(), 0.0));
        let a2: Vec<f64> = f.a.iter().map(|v| v.re).collect();
        // ξ = 0, η ≠ 0: multiplier zero
        assert!(phi_x_of(&a2, &d, &Params::default()).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn plane_wave_rotates_at_the_nonlinear_frequency() {
        let d = Domain2D::new(16, 4, 5.0, 1.0).unwrap();
        let a0 = 0.3;
        let mut f = Field2DC::from_fn(d, |_, _| Complex64::new(a0, 0.0));
        let s = Stepper::new(d, &Params::default()).unwrap();
        s.advance(&mut f, 1.0, 1e-2).unwrap();
        let exact = Complex64::from_polar(a0, 2.0 * a0 * a0 * f.t);
        assert!(f.a.iter().all(|v| (v - exact).norm() < 1e-12));
    }

    #[test]
    fn mass_is_conserved_per_step() {
        let d = Domain2D::new(128, 8, 20.0, 0.8).unwrap();
        let mut f = Field2DC::from_fn(d, |x, y| Complex64::new(sech(x) * (1.0 + 0.1 * (0.8 * y).cos()), 0.05 * x * sech(x)));
        let s = Stepper::new(d, &Params::default()).unwrap();
        for _ in 0..50 {
            let m0 = f.mass();
            s.step(&mut f, 1e-3).unwrap();
            assert!((f.mass() - m0).abs() < 1e-10 * m0);
        }
    }

    #[test]
    fn strang_step_is_time_reversible() {
        let d = Domain2D::new(64, 8, 20.0, 0.8).unwrap();
        let f0 = Field2DC::from_fn(d, |x, y| Complex64::new(sech(x) * (1.0 + 0.2 * (0.8 * y).cos()), 0.1 * sech(x)));
        let s = Stepper::new(d, &Params::default()).unwrap();
        let mut f = f0.clone();
        s.strang(&mut f, 1e-2).unwrap();
        s.strang(&mut f, -1e-2).unwrap();
        let err = f.a.iter().zip(&f0.a).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn y_homogeneous_data_stays_y_homogeneous() {
        let d = Domain2D::new(64, 8, 20.0, 0.8).unwrap();
        let mut f = Field2DC::from_fn(d, |x, _| Complex64::new(1.2 * sech(x), 0.0));
        let s = Stepper::new(d, &Params::default()).unwrap();
        s.advance(&mut f, 0.5, 1e-2).unwrap();
        for j in 1..d.ny {
            for i in 0..d.nx {
                assert!((f.a[j * d.nx + i] - f.a[i]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn line_soliton_keeps_its_shape() {
        let d = box1(256);
        let mut f = Field2DC::line_soliton(d);
        let s = Stepper::new(d, &Params::default()).unwrap();
        s.advance(&mut f, 10.0, 1e-3).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..d.nx {
            num += (f.a[i].norm() - sech(d.x(i))).powi(2);
            den += sech(d.x(i)).powi(2);
        }
        assert!((num / den).sqrt() < 1e-4);
    }

    #[test]
    fn rejects_bad_steps_and_boxes() {
        assert!(Domain2D::new(7, 1, 20.0, 1.0).is_err());
        assert!(Domain2D::new(64, 1, 20.0, 0.0).is_err());
        let d = box1(64);
        let f = Field2DC::line_soliton(d);
        assert!(step(&f, 0.0, &Params::default()).is_err());
        let mut bad = f.clone();
        bad.a[3] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(step(&bad, 1e-3, &Params::default()), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn splitting_is_second_order() {
        let order = splitting_order(box1(128), &Params::default(), 1.0, &[0.1, 0.05, 0.025]).unwrap();
        assert!((order - 2.0).abs() < 0.1, "{order}");
    }

    #[test]
    fn measured_growth_matches_the_pencil() {
        use crate::grid::{Scheme, DEFAULT_CHEBYSHEV_MAP};
        use crate::instability::Instability;
        let p = Params::default();
        let g = Grid1D::new(20.0, 128, Scheme::ChebyshevMapped, DEFAULT_CHEBYSHEV_MAP).unwrap();
        let ins = Instability::new(&g, &p).unwrap();
        let kappa = 0.5 * ins.omega0();
        let gp = ins.growth_rate(kappa).unwrap();
        let d = Domain2D::new(128, 8, 20.0, kappa).unwrap();
        let rate = |amp| {
            let f0 = Field2DC::seeded(d, &gp.mode, &g, amp).unwrap();
            measure_growth(&f0, amp, 30.0, 2e-3, &p).unwrap().lambda
        };
        let (a, b) = (rate(1e-4), rate(5e-5));
        assert!((a / gp.lambda - 1.0).abs() < 0.05, "{a} vs {}", gp.lambda);
        assert!((a / b - 1.0).abs() < 0.01);
    }

    #[test]
    fn no_growth_outside_the_band() {
        let p = Params::default();
        let d = Domain2D::new(128, 8, 20.0, 1.7).unwrap();
        let f0 = Field2DC::from_fn(d, |x, y| Complex64::new(sech(x) * (1.0 + 1e-4 * (1.7 * y).cos()), 0.0));
        assert!(matches!(
            measure_growth(&f0, 1e-4, 5.0, 5e-3, &p),
            Err(Error::NoGrowthWindow { slope }) if slope < 1e-2
        ));
    }

    #[test]
    fn snapshot_round_trip() {
        let f = Field2DC::from_fn(Domain2D::new(16, 2, 3.0, 1.0).unwrap(), |x, y| Complex64::new(x, y));
        assert_eq!(Field2DC::from_snapshot(&f.to_snapshot()).unwrap(), f);
    }

    #[test]
    fn log_slope_recovers_exponential_rate() {
        let t: Vec<f64> = (0..100).map(|k| 0.1 * k as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| 1e-5 * (0.7 * t).exp()).collect();
        let (s, w) = log_slope(&t, &y, 3e-5, 1e-2).unwrap();
        assert!((s - 0.7).abs() < 1e-12);
        assert!(w.0 > 1.0 && w.1 < 9.9);
        assert!(log_slope(&t, &y, 1.0, 2.0).is_none());
    }
}
