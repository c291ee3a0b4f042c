//! One runner per task; each writes its tables into the output directory.

use std::path::{Path, PathBuf};

use num_complex::Complex;
use serde_json::{json, Map, Value};

use gpwave::analysis::{
    bilinear_integral_direct, bilinear_integral_spectral, decay_fit, phase_lower_bound_scan, phi_plus_time_bound_scan, RegionId,
    ScanResult, BOUNDED_PAIRS,
};
use gpwave::datum::gaussian_datum;
use gpwave::dynamics::{charge, energy, GpState, Scheme, Solver, SolverConfig};
use gpwave::io::{read_snapshot, write_norm_table, write_snapshot, NormRow};
use gpwave::normal_form::{duhamel_residual, normal_form_trajectory};
use gpwave::norms::{lp_norm, sobolev_norm};
use gpwave::operators::linear::propagate;
use gpwave::operators::phase::PhaseKind;
use gpwave::scattering::{correction_report, forward_backward_check, iterate, IterationDiagnostics, ScatteringConfig};
use gpwave::verify::{difference_bound_checks, phase_identity_checks, symbol_derivative_checks, write_report, Status};
use gpwave::{Error, Field64, Grid64, Representation};

use crate::config::*;

/// Failure of a run, mapped to the process exit code.
#[derive(Debug)]
pub enum RunError {
    Invalid(Vec<Violation>),
    Numerical(String),
    Other(String),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Invalid(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Other(_) => 1,
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::NumericalAbort { .. } | Error::Diverged(_) => RunError::Numerical(e.to_string()),
            Error::InvalidArgument(_) | Error::InvalidGrid(_) | Error::InsufficientSampling(_) => RunError::Invalid(vec![Violation {
                path: "task_params".into(),
                message: e.to_string(),
            }]),
            _ => RunError::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Other(e.to_string())
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Other(e.to_string())
    }
}

/// Files written by a task, relative to the output directory, and scalar
/// results echoed into the manifest.
#[derive(Debug, Default)]
pub struct Outputs {
    pub files: Vec<PathBuf>,
    /// Long-format tables `t,norm_name,value`, for plot scripts.
    pub long_tables: Vec<PathBuf>,
    pub summary: Map<String, Value>,
    /// Set when a verification task produced failing checks.
    pub checks_failed: bool,
}

impl Outputs {
    fn file(&mut self, name: &str) -> PathBuf {
        self.files.push(name.into());
        name.into()
    }

    fn long_table(&mut self, name: &str) -> PathBuf {
        self.long_tables.push(name.into());
        self.file(name)
    }

    fn note(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.into(), value.into());
    }
}

fn pad3(v: &Option<Vec<f64>>) -> [f64; 3] {
    let mut out = [0.0; 3];
    if let Some(v) = v {
        out[..v.len()].copy_from_slice(v);
    }
    out
}

pub fn grid(cfg: &ExperimentConfig) -> Result<Grid64, RunError> {
    Ok(Grid64::new(cfg.dim, cfg.grid.n, cfg.grid.box_length)?)
}

pub fn load_datum(cfg: &ExperimentConfig, grid: &Grid64) -> Result<Field64, RunError> {
    let d = &cfg.datum;
    match d.kind {
        DatumKind::Gaussian => Ok(gaussian_datum(
            grid,
            d.amplitude.expect("validated"),
            d.width.expect("validated"),
            pad3(&d.center),
            pad3(&d.wavevector),
        )?),
        DatumKind::FromFile => {
            let path = d.path.as_ref().expect("validated");
            let (field, _) = read_snapshot::<f64>(path).map_err(|e| RunError::Invalid(vec![Violation {
                path: "datum.path".into(),
                message: format!("{}: {e}", path.display()),
            }]))?;
            if field.grid() != grid {
                return Err(RunError::Invalid(vec![Violation {
                    path: "datum.path".into(),
                    message: format!("snapshot grid differs from the configured {}D {}-point grid", cfg.dim, cfg.grid.n),
                }]));
            }
            Ok(field.into_physical())
        }
    }
}

pub fn run_task(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outputs, RunError> {
    let g = grid(cfg)?;
    let mut out = Outputs::default();
    match &cfg.task_params {
        TaskParams::Simulate(p) => simulate(cfg, &g, p, out_dir, &mut out)?,
        TaskParams::Scatter(p) => scatter(cfg, &g, p, out_dir, &mut out)?,
        TaskParams::Decay(p) => decay(cfg, &g, p, out_dir, &mut out)?,
        TaskParams::PhaseScan(p) => phase_scan(cfg, p, out_dir, &mut out)?,
        TaskParams::VerifySymbols(p) => verify_symbols(cfg, p, out_dir, &mut out)?,
        TaskParams::NormalForm(p) => normal_form(cfg, &g, p, out_dir, &mut out)?,
        TaskParams::Oracle(p) => oracle(cfg, &g, p, out_dir, &mut out)?,
    }
    Ok(out)
}

fn norm_rows(t: f64, u: &Field64) -> Result<Vec<NormRow>, RunError> {
    Ok(vec![
        NormRow::new(t, "energy", energy(u)),
        NormRow::new(t, "charge", charge(u)),
        NormRow::new(t, "L2", lp_norm(u, 2.0)?),
        NormRow::new(t, "H1dot", sobolev_norm(u, 1.0, true)),
        NormRow::new(t, "L4", lp_norm(u, 4.0)?),
        NormRow::new(t, "Linf", lp_norm(u, f64::INFINITY)?),
    ])
}

fn simulate(cfg: &ExperimentConfig, g: &Grid64, p: &SimulateParams, dir: &Path, out: &mut Outputs) -> Result<(), RunError> {
    let u0 = load_datum(cfg, g)?;
    let every = p.sample_every.unwrap_or(p.t_end / 10.0);
    let samples: Vec<f64> = (1..).map(|k| k as f64 * every).take_while(|&t| t < p.t_end * (1.0 - 1e-12)).collect();
    let mut sc = SolverConfig::new(p.dt).with_samples(samples).with_scheme(match p.scheme {
        SchemeName::StrangRk4 => Scheme::StrangRk4,
        SchemeName::EtdRk2 => Scheme::EtdRk2,
    });
    sc.dealias = p.dealias;
    let ev = Solver::new(g, sc)?.evolve(&GpState::from_u(&u0), 0.0, p.t_end)?;
    let mut rows = Vec::new();
    for (t, u) in ev.u.times().iter().zip(ev.u.fields()) {
        rows.extend(norm_rows(*t, &u.in_representation(Representation::Physical))?);
    }
    write_norm_table(dir.join(out.long_table("norms.csv")), &rows)?;
    let (t_end, u_end) = ev.u.last().expect("trajectory holds the initial state");
    write_snapshot(dir.join(out.file("final.gpf")), &u_end.in_representation(Representation::Physical), t_end)?;
    out.note("steps", ev.steps);
    out.note("energy_drift", ev.energy_drift());
    out.note("charge_drift", ev.charge_drift());
    Ok(())
}

fn write_iterations(path: &Path, diag: &IterationDiagnostics) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sweep", "difference", "size"])?;
    for (k, (d, e)) in diag.differences.iter().zip(&diag.sizes).enumerate() {
        w.write_record([(k + 1).to_string(), format!("{d:e}"), format!("{e:e}")])?;
    }
    w.flush()?;
    Ok(())
}

fn scatter(cfg: &ExperimentConfig, g: &Grid64, p: &ScatterParams, dir: &Path, out: &mut Outputs) -> Result<(), RunError> {
    let phi = load_datum(cfg, g)?;
    let mut sc = ScatteringConfig::new(cfg.dim, p.t_start, p.t_max, p.nodes)?;
    if let Some(eps) = p.eps {
        sc.eps = eps;
    }
    if let Some(tol) = p.tol {
        sc.tol = tol;
    }
    if let Some(n) = p.max_sweeps {
        sc.sweeps = n;
    }
    let res = match iterate(&phi, &sc) {
        Ok(r) => r,
        Err(Error::Diverged(diag)) => {
            // keep the record of the failed iteration
            write_iterations(&dir.join(out.file("iteration.csv")), &diag)?;
            return Err(RunError::Numerical(format!("iteration diverged after {} sweeps", diag.differences.len())));
        }
        Err(e) => return Err(e.into()),
    };
    write_iterations(&dir.join(out.file("iteration.csv")), &res.diagnostics)?;
    let mut rows = Vec::new();
    for r in correction_report(&res, sc.eps)? {
        for (name, v) in [
            ("z_prime_H1dot", r.z_prime_h1),
            ("z_prime_Hepsdot", r.z_prime_h_eps),
            ("nu_H1dot", r.nu_h1),
            ("nu_H1dot_plus_H2dot", r.nu_h1_h2),
            ("nu_Hepsdot", r.nu_h_eps),
            ("z_second_H1dot", r.z_second_h1),
        ] {
            rows.push(NormRow::new(r.t, name, v));
        }
    }
    write_norm_table(dir.join(out.long_table("corrections.csv")), &rows)?;
    let (t, u_t) = res.u.get(0);
    write_snapshot(dir.join(out.file("u_T.gpf")), &u_t.in_representation(Representation::Physical), t)?;
    out.note("converged", res.converged);
    out.note("sweeps", res.sweeps);
    out.note("data_besov", res.data_besov);
    out.note("eps", sc.eps);
    if let Some(dt) = p.forward_backward_dt {
        let fb = forward_backward_check(&res, dt)?;
        out.note("forward_backward_relative_h1", fb.relative_h1);
    }
    if !res.converged {
        return Err(RunError::Numerical(format!("no convergence within {} sweeps", res.sweeps)));
    }
    Ok(())
}

fn decay(cfg: &ExperimentConfig, g: &Grid64, p: &DecayParams, dir: &Path, out: &mut Outputs) -> Result<(), RunError> {
    let spec = load_datum(cfg, g)?.into_spectral();
    let times: Vec<f64> = (0..p.samples).map(|k| p.t_min * (p.t_max / p.t_min).powf(k as f64 / (p.samples - 1) as f64)).collect();
    let name = |q: Option<f64>| q.map_or("Linf".to_string(), |q| format!("L{q}"));
    let mut rows = Vec::new();
    let mut series = vec![Vec::new(); p.exponents.len()];
    for &t in &times {
        let f = propagate(&spec, t).into_physical();
        for (s, q) in series.iter_mut().zip(&p.exponents) {
            let v = lp_norm(&f, q.unwrap_or(f64::INFINITY))?;
            rows.push(NormRow::new(t, name(*q), v));
            s.push(v);
        }
    }
    write_norm_table(dir.join(out.long_table("decay.csv")), &rows)?;
    let mut w = csv::Writer::from_path(dir.join(out.file("fits.csv")))?;
    w.write_record(["norm_name", "exponent", "intercept", "r_squared", "t_min", "t_max"])?;
    for (s, q) in series.iter().zip(&p.exponents) {
        let fit = decay_fit(&times, s)?;
        w.write_record([
            name(*q),
            format!("{:e}", fit.exponent),
            format!("{:e}", fit.intercept),
            format!("{:e}", fit.r_squared),
            format!("{:e}", fit.window.0),
            format!("{:e}", fit.window.1),
        ])?;
        out.note(&format!("exponent_{}", name(*q)), fit.exponent);
    }
    w.flush()?;
    Ok(())
}

fn scan_record(kind: &str, region: &str, p: &PhaseScanParams, seed: u64, r: &ScanResult) -> Vec<String> {
    let mut rec = vec![
        kind.to_string(),
        region.to_string(),
        r.samples.to_string(),
        format!("{:e}", p.delta),
        seed.to_string(),
        format!("{:e}", r.min_ratio),
        format!("{:e}", r.max_ratio),
    ];
    rec.extend(r.argmin.0.iter().chain(&r.argmin.1).map(|x| format!("{x:e}")));
    rec
}

fn phase_scan(cfg: &ExperimentConfig, p: &PhaseScanParams, dir: &Path, out: &mut Outputs) -> Result<(), RunError> {
    let pairs: Vec<(PhaseKind, RegionId)> = match (&p.kind, &p.region) {
        (Some(k), Some(r)) => vec![(k.parse()?, r.parse()?)],
        _ => BOUNDED_PAIRS.to_vec(),
    };
    let mut w = csv::Writer::from_path(dir.join(out.file("scan.csv")))?;
    w.write_record([
        "kind", "region", "samples", "delta", "seed", "min_ratio", "max_ratio", "xi1", "xi2", "xi3", "eta1", "eta2", "eta3",
    ])?;
    let mut worst = f64::INFINITY;
    for (kind, region) in pairs {
        let r = phase_lower_bound_scan(kind, region, p.samples, p.delta, cfg.seed)?;
        worst = worst.min(r.min_ratio);
        w.write_record(scan_record(kind.name(), region.name(), p, cfg.seed, &r))?;
    }
    if let Some(kappa) = p.time_bound_kappa {
        let t = phi_plus_time_bound_scan(p.samples, p.delta, kappa, cfg.seed)?;
        w.write_record(scan_record("phi_plus", "time_large_lambda", p, cfg.seed, &t.large_lambda))?;
        w.write_record(scan_record("phi_plus", "time_small_lambda", p, cfg.seed, &t.small_lambda))?;
        out.note("time_bound_min_ratio", t.min_ratio);
    }
    w.flush()?;
    out.note("min_ratio", worst);
    Ok(())
}

fn verify_symbols(cfg: &ExperimentConfig, p: &VerifySymbolsParams, dir: &Path, out: &mut Outputs) -> Result<(), RunError> {
    let mut checks = symbol_derivative_checks(p.h_scale);
    checks.extend(phase_identity_checks(p.samples, cfg.seed)?);
    checks.extend(difference_bound_checks(p.samples * 100, cfg.seed));
    write_report(dir.join(out.file("checks.csv")), &checks)?;
    let failed = checks.iter().filter(|c| c.status == Status::Fail).count();
    out.note("checks", checks.len());
    out.note("failed", failed);
    out.checks_failed = failed > 0;
    Ok(())
}

fn normal_form(cfg: &ExperimentConfig, g: &Grid64, p: &NormalFormParams, dir: &Path, out: &mut Outputs) -> Result<(), RunError> {
    let u0 = load_datum(cfg, g)?;
    let mut w = csv::Writer::from_path(dir.join(out.file("residual.csv")))?;
    w.write_record(["dt", "residual", "order"])?;
    let mut prev: Option<(f64, f64)> = None;
    let mut orders = Vec::new();
    for &dt in &p.dts {
        let samples: Vec<f64> = (1..).map(|k| k as f64 * dt).take_while(|&t| t < p.t_end * (1.0 - 1e-12)).collect();
        let ev = Solver::new(g, SolverConfig::new(dt).with_samples(samples))?.evolve(&GpState::from_u(&u0), 0.0, p.t_end)?;
        let res = duhamel_residual(&normal_form_trajectory(&ev.u)?, &ev.u, 0.0)?;
        let order = prev.map(|(dt0, r0)| (r0 / res).ln() / (dt0 / dt).ln());
        orders.extend(order);
        w.write_record([format!("{dt:e}"), format!("{res:e}"), order.map_or(String::new(), |o| format!("{o:e}"))])?;
        prev = Some((dt, res));
    }
    w.flush()?;
    out.note("min_order", orders.iter().copied().fold(f64::INFINITY, f64::min));
    Ok(())
}

fn oracle(cfg: &ExperimentConfig, g: &Grid64, p: &OracleParams, dir: &Path, out: &mut Outputs) -> Result<(), RunError> {
    let phi = load_datum(cfg, g)?;
    let d = &cfg.datum;
    let (a, w) = (d.amplitude.expect("validated"), d.width.expect("validated"));
    let (c, k0) = (pad3(&d.center), pad3(&d.wavevector));
    // transform of a e^{-|x-c|²/(2w²)} e^{ik₀·(x-c)} in 2D
    let hat = move |k: &[f64; 3]| {
        let r2 = (k[0] - k0[0]).powi(2) + (k[1] - k0[1]).powi(2);
        let mag = a * 2.0 * std::f64::consts::PI * w * w * (-r2 * w * w / 2.0).exp();
        Complex::from_polar(mag, -(k[0] * c[0] + k[1] * c[1]))
    };
    let idx: Vec<usize> = p.xi.iter().map(|l| g.flat_from_lattice(l)).collect();
    let mut wr = csv::Writer::from_path(dir.join(out.file("oracle.csv")))?;
    wr.write_record(["xi1", "xi2", "kind", "term", "spectral_re", "spectral_im", "direct_re", "direct_im", "relative_error"])?;
    let mut worst = 0.0f64;
    for kind in &p.kinds {
        let kind: PhaseKind = kind.parse()?;
        let spec = bilinear_integral_spectral(&phi, &phi, kind, p.term.into(), &idx, p.t_lo, p.t_hi, p.nodes)?;
        for ((&i, s), l) in idx.iter().zip(&spec).zip(&p.xi) {
            let direct = bilinear_integral_direct(&hat, &hat, kind, p.term.into(), &g.xi(i), p.t_lo, p.t_hi, g)?;
            let err = (direct - s).norm() / direct.norm();
            worst = worst.max(err);
            wr.write_record([
                l[0].to_string(),
                l[1].to_string(),
                kind.name().to_string(),
                format!("{:?}", p.term).to_lowercase(),
                format!("{:e}", s.re),
                format!("{:e}", s.im),
                format!("{:e}", direct.re),
                format!("{:e}", direct.im),
                format!("{err:e}"),
            ])?;
        }
    }
    wr.flush()?;
    out.note("max_relative_error", worst);
    Ok(())
}

/// Writes `<stem>.gp` for each long-format table; returns the script names.
pub fn emit_gnuplot(dir: &Path, out: &Outputs) -> Result<Vec<PathBuf>, RunError> {
    let mut scripts = Vec::new();
    for table in &out.long_tables {
        let names = long_table_names(&dir.join(table))?;
        let stem = table.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
        let script = PathBuf::from(format!("{stem}.gp"));
        let text = format!(
            "set datafile separator ','\nset terminal pngcairo size 900,600\nset output '{stem}.png'\n\
             set logscale xy\nset xlabel 't'\nset key outside\n\
             plot for [n in \"{}\"] '{}' using 1:(strcol(2) eq n ? abs($3) : NaN) with linespoints title n\n",
            names.join(" "),
            table.display()
        );
        std::fs::write(dir.join(&script), text)?;
        scripts.push(script);
    }
    Ok(scripts)
}

fn long_table_names(path: &Path) -> Result<Vec<String>, RunError> {
    let mut names: Vec<String> = Vec::new();
    for rec in csv::Reader::from_path(path)?.records() {
        let name = rec?[1].to_string();
        if !names.contains(&name) {
            names.push(name);
        }
    }
    Ok(names)
}

pub fn manifest(cfg: &ExperimentConfig, dir: &Path, out: &Outputs, extra: &[PathBuf]) -> Result<Value, RunError> {
    use sha2::{Digest, Sha256};
    let mut files = Vec::new();
    for f in out.files.iter().chain(extra) {
        let bytes = std::fs::read(dir.join(f))?;
        files.push(json!({
            "path": f.display().to_string(),
            "bytes": bytes.len(),
            "sha256": hex::encode(Sha256::digest(&bytes)),
        }));
    }
    Ok(json!({
        "name": cfg.name,
        "task": cfg.task.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "tolerance_table_version": gpwave::verify::TOLERANCE_TABLE_VERSION,
        "threads": rayon::current_num_threads(),
        "config": cfg,
        "summary": out.summary,
        "outputs": files,
    }))
}
