use rayon::prelude::*;
use serde_json::json;

use dslab::continuation::{BranchDocument, SteadyProblem};
use dslab::evolve::{self, Domain2D, Field2DC};
use dslab::instability::Instability;
use dslab::operators::{self, assemble_a1, assemble_a2, assemble_schrodinger, form_limit_scan, localized_spectrum, sech};
use dslab::resolvent::{resolvent_norm_scan, ComplexState, Resolvent};
use dslab::verify::{self, VerifyConfig};
use dslab::{Grid1D, Subspace};

use crate::config::Config;
use crate::output::{display, LinePlot, Sink};
use crate::{CliError, OperatorArg, SubspaceArg};

fn say(line: impl AsRef<str>) {
    println!("{}", line.as_ref());
}

pub fn spectrum(cfg: &Config, operator: OperatorArg, c: f64, subspace: SubspaceArg) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let params = cfg.params()?;
    let op = match operator {
        OperatorArg::Schrodinger => assemble_schrodinger(&grid, c),
        OperatorArg::A1 => assemble_a1(&grid, &params)?,
        OperatorArg::A2 => assemble_a2(&grid, &params)?,
    };
    let sub = match subspace {
        SubspaceArg::Full => Subspace::Full,
        SubspaceArg::Even => Subspace::Even,
        SubspaceArg::Odd => Subspace::Odd,
        SubspaceArg::Tagged => Subspace::Tagged,
    };
    let spec = localized_spectrum(&op, sub)?;
    let sink = Sink::new(cfg, "spectrum", json!({ "operator": format!("{operator:?}"), "c": c, "subspace": format!("{subspace:?}") }))?;
    say(format!("essential edge {:.12}", spec.ess_edge));
    let mut rows = Vec::new();
    for (k, (l, loc)) in spec.eigenvalues.iter().zip(&spec.localization).enumerate() {
        say(format!("λ{k} = {l:.12}  (localization {loc:.6})"));
        rows.push(vec![k as f64, *l, *loc]);
    }
    let p = sink.csv("spectrum.csv", &["index", "eigenvalue", "localization"], &rows)?;
    let mut cols = vec!["x".to_string()];
    for k in 0..spec.eigenvectors.len() {
        for b in 0..op.blocks() {
            cols.push(format!("v{k}_block{b}"));
        }
    }
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let vrows: Vec<Vec<f64>> = (0..grid.len())
        .map(|i| {
            std::iter::once(grid.nodes()[i])
                .chain(spec.eigenvectors.iter().flat_map(|v| v.iter().map(move |b| b[i])))
                .collect()
        })
        .collect();
    let q = sink.csv("spectrum_vectors.csv", &cols, &vrows)?;
    say(format!("wrote {} and {}", display(&p), display(&q)));
    Ok(())
}

pub fn omega0(cfg: &Config) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let params = cfg.params()?;
    let r = operators::omega0(&grid, &params)?;
    say(format!("omega0 = {:.12}", r.omega0));
    say(format!("omega0^2 = {:.12}", r.omega0 * r.omega0));
    say(format!("two-scheme gap on omega0^2 = {:.3e}", r.discretization_gap));
    let sink = Sink::new(cfg, "omega0", json!({}))?;
    let (u, phi) = &r.eigenfield;
    let rows: Vec<Vec<f64>> = (0..grid.len()).map(|i| vec![grid.nodes()[i], u[i], phi[i]]).collect();
    let p = sink.csv("omega0_eigenfield.csv", &["x", "u", "phi"], &rows)?;
    let q = sink.json(
        "omega0.json",
        &json!({ "omega0": r.omega0, "omega0_sq": r.omega0 * r.omega0, "discretization_gap": r.discretization_gap }),
    )?;
    say(format!("wrote {} and {}", display(&p), display(&q)));
    if !(r.discretization_gap < cfg.tol_eig) {
        return Err(CliError::Failed(format!(
            "two-scheme gap {:.3e} exceeds tol_eig = {:.1e}",
            r.discretization_gap, cfg.tol_eig
        )));
    }
    Ok(())
}

pub fn identity(cfg: &Config, fields: usize, radii: &[f64]) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let params = cfg.params()?;
    let values = form_limit_scan(radii, &grid, &params)?;
    let pairs = verify::identity_pairs(&grid, &params, fields, cfg.seed);
    let sink = Sink::new(cfg, "identity", json!({ "fields": fields, "radii": radii }))?;
    let rows: Vec<Vec<f64>> = pairs
        .iter()
        .enumerate()
        .map(|(k, (a, b))| vec![k as f64, *a, *b, (a - b).abs() / a.abs().max(b.abs())])
        .collect();
    let worst = rows.iter().map(|r| r[3]).fold(0.0, f64::max);
    let p = sink.csv("identity.csv", &["field", "direct", "identity", "relative_gap"], &rows)?;
    let target = -16.0 / 3.0;
    let lrows: Vec<Vec<f64>> = radii
        .iter()
        .zip(&values)
        .map(|(r, v)| vec![*r, *v, ((v - target) / target).abs()])
        .collect();
    for r in &lrows {
        say(format!("R = {:>6}: form = {:.8}  relative error vs −16/3 = {:.3e}", r[0], r[1], r[2]));
    }
    let q = sink.csv("form_limit.csv", &["R", "form", "relative_error"], &lrows)?;
    say(format!("worst identity gap over {fields} fields: {worst:.3e}"));
    say(format!("wrote {} and {}", display(&p), display(&q)));
    if !(worst < 1e-8) {
        return Err(CliError::Failed(format!("identity gap {worst:.3e} exceeds 1e-8")));
    }
    Ok(())
}

fn probe_rhs(grid: &Grid1D) -> ComplexState {
    let mut s = dslab::StateVector::zeros(grid.len());
    s.u1 = grid.sample(|x| sech(x));
    s.v1 = grid.sample(|x| sech(x).powi(2));
    s.phi = grid.sample(|x| x * sech(x));
    let n = grid.len();
    for f in s.fields_mut() {
        f[0] = 0.0;
        f[n - 1] = 0.0;
    }
    s.to_complex()
}

pub fn resolvent_scan(cfg: &Config, ks: &[f64]) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let params = cfg.params()?;
    let res = Resolvent::new(&grid, &params)?;
    for &k in ks {
        res.check_k(k)?;
    }
    let rhs = probe_rhs(&grid);
    let rows: Vec<Vec<f64>> = ks
        .par_iter()
        .map(|&k| -> Result<Vec<f64>, CliError> {
            let n = resolvent_norm_scan(&[k], &grid, &params)?.remove(0);
            let sol = res.solve(k, &rhs)?;
            Ok(vec![k, n.opnorm_xx, n.opnorm_xd, sol.residual])
        })
        .collect::<Result<_, _>>()?;
    for r in &rows {
        say(format!("k = {:>8}: ‖R‖_X = {:.6e}  ‖R‖_X→D = {:.6e}  probe residual {:.2e}", r[0], r[1], r[2], r[3]));
    }
    let sink = Sink::new(cfg, "resolvent-scan", json!({ "k": ks }))?;
    let p = sink.csv("resolvent_scan.csv", &["k", "opnorm_xx", "opnorm_xd", "probe_residual"], &rows)?;
    let plot = LinePlot {
        title: "Resolvent norm".into(),
        x_label: "log10 k".into(),
        y_label: "log10 ‖(L − ik)⁻¹‖_X".into(),
        points: rows.iter().map(|r| (r[0].log10(), r[1].log10())).collect(),
    };
    let q = sink.svg("resolvent_scan.svg", &plot)?;
    say(format!("wrote {} and {}", display(&p), display(&q)));
    let worst = rows.iter().map(|r| r[3]).fold(0.0, f64::max);
    if !(worst < cfg.tol_resolvent) {
        return Err(CliError::Failed(format!(
            "probe residual {worst:.3e} exceeds tol_resolvent = {:.1e}",
            cfg.tol_resolvent
        )));
    }
    Ok(())
}

pub fn continue_branch(cfg: &Config, s_max: f64, ds: f64) -> Result<(), CliError> {
    let grid = cfg.spectral_grid()?;
    let params = cfg.params()?;
    let problem = SteadyProblem::new(&grid, &params, cfg.modes)?;
    let branch = problem.continue_branch(s_max, ds, cfg.tol_newton)?;
    let sink = Sink::new(cfg, "continue", json!({ "s_max": s_max, "ds": ds }))?;
    let rows: Vec<Vec<f64>> = branch
        .samples
        .iter()
        .map(|s| vec![s.s, s.field.omega, s.field.omega - branch.omega0, s.residual])
        .collect();
    for r in &rows {
        say(format!("s = {:.4}: ω = {:.12}  ω − ω0 = {:+.3e}  residual {:.2e}", r[0], r[1], r[2], r[3]));
    }
    let p = sink.csv("branch.csv", &["s", "omega", "omega_minus_omega0", "residual"], &rows)?;
    let q = sink.json("branch.json", &BranchDocument::new(&branch, &grid, &params))?;
    let plot = LinePlot {
        title: "Periodic-soliton frequency".into(),
        x_label: "s".into(),
        y_label: "ω(s)".into(),
        points: rows.iter().map(|r| (r[0], r[1])).collect(),
    };
    let v = sink.svg("branch_omega.svg", &plot)?;
    say(format!("wrote {}, {} and {}", display(&p), display(&q), display(&v)));
    if branch.truncated {
        let last = branch.samples.last().map_or(0.0, |s| s.s);
        return Err(CliError::Failed(format!("branch truncated at s = {last}")));
    }
    Ok(())
}

pub fn growth(cfg: &Config, kappa: Option<f64>, fractions: &[f64]) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let params = cfg.params()?;
    let ins = Instability::new(&grid, &params)?;
    let om = ins.omega0();
    let kappas: Vec<f64> = match kappa {
        Some(k) => {
            if !(k > 0.0 && k < om) {
                return Err(CliError::Input(format!(
                    "precondition violated: kappa must lie in (0, omega0) = (0, {om:.6}), got {k}"
                )));
            }
            vec![k]
        }
        None => fractions.iter().map(|f| f * om).collect(),
    };
    let points: Vec<_> = kappas
        .par_iter()
        .map(|&k| ins.growth_rate(k))
        .collect::<Result<_, _>>()?;
    let rows: Vec<Vec<f64>> = points.iter().map(|p| vec![p.kappa, p.kappa / om, p.lambda, p.residual]).collect();
    say(format!("omega0 = {om:.12}"));
    for r in &rows {
        say(format!("κ = {:.6} ({:.3} ω0): λ = {:.10}  residual {:.2e}", r[0], r[1], r[2], r[3]));
    }
    let sink = Sink::new(cfg, "growth", json!({ "kappa": kappa, "fractions": fractions }))?;
    let p = sink.csv("growth.csv", &["kappa", "kappa_over_omega0", "lambda", "residual"], &rows)?;
    let plot = LinePlot {
        title: "Transverse growth rate".into(),
        x_label: "κ".into(),
        y_label: "λ(κ)".into(),
        points: rows.iter().map(|r| (r[0], r[2])).collect(),
    };
    let q = sink.svg("growth.svg", &plot)?;
    say(format!("wrote {} and {}", display(&p), display(&q)));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn evolve(cfg: &Config, kappa_frac: f64, amp: f64, t: f64, dt: f64, nx: usize, ny: usize) -> Result<(), CliError> {
    if !(t > 0.0 && dt > 0.0 && dt < t) {
        return Err(CliError::Input(format!("need 0 < dt < t, got dt = {dt}, t = {t}")));
    }
    if !(kappa_frac > 0.0) {
        return Err(CliError::Input(format!("kappa fraction must be positive, got {kappa_frac}")));
    }
    let grid = cfg.spectral_grid()?;
    let params = cfg.params()?;
    let ins = Instability::new(&grid, &params)?;
    let kappa = kappa_frac * ins.omega0();
    let d = Domain2D::new(nx, ny, cfg.half_length, kappa)?;
    let in_band = kappa_frac < 1.0 - dslab::instability::BAND_MARGIN;
    let (field0, pencil) = if in_band {
        let gp = ins.growth_rate(kappa)?;
        (Field2DC::seeded(d, &gp.mode, &grid, amp)?, Some(gp.lambda))
    } else {
        let f = Field2DC::from_fn(d, |x, y| (sech(x) * (1.0 + amp * (kappa * y).cos())).into());
        (f, None)
    };
    let (series, last) = evolve::evolve_series(&field0, t, dt, &params, 10)?;
    let sink = Sink::new(cfg, "evolve", json!({ "kappa_frac": kappa_frac, "amp": amp, "t": t, "dt": dt, "nx": nx, "ny": ny }))?;
    let rows: Vec<Vec<f64>> = (0..series.t.len())
        .map(|k| vec![series.t[k], series.perturbation[k], series.mass[k]])
        .collect();
    let p = sink.csv("evolve.csv", &["t", "perturbation_norm", "mass"], &rows)?;
    let q = sink.json("evolve_final.json", &last.to_snapshot())?;
    say(format!("wrote {} and {}", display(&p), display(&q)));
    match evolve::log_slope(&series.t, &series.perturbation, evolve::WINDOW_FLOOR * amp, evolve::WINDOW_TOP) {
        Some((lambda, (a, b))) => {
            say(format!("measured λ = {lambda:.8} over t ∈ [{a:.3}, {b:.3}]"));
            if let Some(l) = pencil {
                say(format!("pencil λ = {l:.8}  relative difference {:.3e}", (lambda / l - 1.0).abs()));
            }
        }
        None => {
            let s = evolve::log_slope(&series.t, &series.perturbation, 0.0, f64::INFINITY).map_or(0.0, |s| s.0);
            say(format!("no linear growth window; overall log-slope {s:.3e}"));
        }
    }
    Ok(())
}

pub fn verify(cfg: &Config, only: &[u32]) -> Result<(), CliError> {
    let vc = VerifyConfig {
        params: cfg.params()?,
        half_length: cfg.half_length,
        n: cfg.n,
        modes: cfg.modes,
        seed: cfg.seed,
    };
    let ids: Vec<u32> = if only.is_empty() { verify::CHECK_IDS.to_vec() } else { only.to_vec() };
    if let Some(bad) = ids.iter().find(|i| !verify::CHECK_IDS.contains(i)) {
        return Err(CliError::Input(format!("no check numbered {bad}")));
    }
    let checks: Vec<_> = ids.par_iter().map(|&id| verify::run_check(id, &vc)).collect();
    for c in &checks {
        say(c.line());
    }
    let sink = Sink::new(cfg, "verify", json!({ "only": only }))?;
    let mut rows = Vec::new();
    for c in &checks {
        // wall-clock parts would break byte-identical output
        for (k, p) in c.parts.iter().enumerate().filter(|(_, p)| !p.name.starts_with("runtime")) {
            rows.push(vec![c.id as f64, k as f64, p.value, p.passed as u8 as f64]);
        }
    }
    let p = sink.csv("verify.csv", &["check", "part", "value", "passed"], &rows)?;
    let q = sink.json("verify.json", &checks)?;
    say(format!("wrote {} and {}", display(&p), display(&q)));
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed()).map(|c| c.id.to_string()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("checks {} failed", failed.join(", "))))
    }
}
