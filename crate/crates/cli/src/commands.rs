//! Subcommand bodies.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use lagsol_core::error::Error;
use lagsol_core::expander::{invert_angle_map, ExpanderProfile, InversionOptions};
use lagsol_core::export::{mesh_samples, read_mesh_csv, write_mesh_csv, write_ply, write_residual_csv, MeshRow, Projection};
use lagsol_core::geometry::{
    cnorm, expects_minimal, frame_at, immerse, inner, j_times, maslov_fit, sample_quadric, verify_point, PointResiduals,
    Quadric, QuadricPoint, SolitonCurve,
};
use lagsol_core::params::SolitonParams;
use lagsol_core::periodic::{
    brakke_family, level_set_points, CaseTag, DetectOptions, PeriodicCurve, PeriodicOrbit, PeriodicSpec,
    Periodicity, SearchOptions,
};
use lagsol_core::quad::QuadOptions;
use lagsol_core::reduced_ode::angle_diff;
use lagsol_core::translator::TranslatorProfile;
use num_complex::Complex64;

use crate::config;
use crate::{PeriodicData, Sampling};

const LAGRANGIAN_TOL: f64 = 1e-10;
const ANGLE_TOL: f64 = 1e-9;
const SOLITON_TOL: f64 = 1e-3;
const MINIMAL_TOL: f64 = 1e-4;
const MASLOV_TOL: f64 = 1e-8;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or construction data.
    Usage(String),
    /// A solver or integrator failed.
    Numerical(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::InvalidTarget(_) | Error::CaseMismatch(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numerical(format!("i/o: {e}"))
    }
}

type CliResult<T> = Result<T, CliError>;

/// Names of failed checks (empty when everything passed).
#[derive(Debug, Default)]
pub struct Outcome {
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn pass() -> Self {
        Self::default()
    }
}

pub fn exit_code(r: CliResult<Outcome>) -> u8 {
    match r {
        Ok(o) if o.failures.is_empty() => 0,
        Ok(o) => {
            eprintln!("verification failed: {}", o.failures.join(", "));
            4
        }
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(CliError::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            3
        }
    }
}

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

/// Named bounds checked against measured maxima.
#[derive(Debug, Default)]
struct Checks {
    rows: Vec<(String, f64, f64)>,
    notes: Vec<String>,
}

impl Checks {
    fn add(&mut self, name: &str, value: f64, bound: f64) {
        self.rows.push((name.to_string(), value, bound));
    }

    fn note(&mut self, line: String) {
        self.notes.push(line);
    }

    fn failures(&self) -> Vec<String> {
        self.rows
            .iter()
            .filter(|(_, v, b)| !(v < b))
            .map(|(n, _, _)| n.clone())
            .collect()
    }

    fn render(&self) -> String {
        let mut s = String::new();
        for (name, v, b) in &self.rows {
            let verdict = if v < b { "pass" } else { "FAIL" };
            s.push_str(&format!("{name} = {v:e} (bound {b:e}) {verdict}\n"));
        }
        for n in &self.notes {
            s.push_str(n);
            s.push('\n');
        }
        let status = if self.failures().is_empty() { "pass" } else { "fail" };
        s.push_str(&format!("status = {status}\n"));
        s
    }

    fn finish(self, out: &Path) -> CliResult<Outcome> {
        let text = self.render();
        print!("{text}");
        fs::write(out.join("summary.txt"), &text)?;
        Ok(Outcome {
            failures: self.failures(),
        })
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn check_sampling(s: &Sampling) -> CliResult<()> {
    if s.samples < 2 {
        return usage("--samples must be at least 2");
    }
    if s.points < 1 || s.verify_points < 1 {
        return usage("--points and --verify-points must be positive");
    }
    if !(s.spread > 0.0) {
        return usage("--spread must be positive");
    }
    Ok(())
}

fn grid(xs: &[QuadricPoint], ts: &[f64]) -> Vec<(QuadricPoint, f64)> {
    ts.iter().flat_map(|&t| xs.iter().map(move |x| (x.clone(), t))).collect()
}

fn prepare_out(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|e| CliError::Usage(format!("output directory {}: {e}", out.display())))
}

fn write_mesh(out: &Path, stem: &str, rows: &[MeshRow], sampling: &Sampling) -> CliResult<()> {
    write_mesh_csv(rows, BufWriter::new(File::create(out.join(format!("{stem}.csv")))?))?;
    if sampling.ply {
        let n = rows.first().map_or(1, |r| r.z.len());
        let proj = match &sampling.projection {
            Some(p) => Projection::parse(p, n)?,
            None => Projection::leading(n),
        };
        write_ply(rows, &proj, BufWriter::new(File::create(out.join(format!("{stem}.ply")))?))?;
    }
    Ok(())
}

fn write_run(out: &Path, map: &BTreeMap<String, String>) -> CliResult<()> {
    fs::write(out.join("run.cfg"), config::render(map))?;
    Ok(())
}

/// Lagrangian and angle checks at every sample, soliton check on an even
/// subset of at most `verify_points` samples.
fn check_mesh(
    curve: &dyn SolitonCurve,
    samples: &[(QuadricPoint, f64)],
    thetas: &[f64],
    verify_points: usize,
    checks: &mut Checks,
) -> CliResult<Vec<PointResiduals>> {
    let mut lag: f64 = 0.0;
    let mut ang: f64 = 0.0;
    for ((x, t), th) in samples.iter().zip(thetas) {
        let fr = frame_at(curve, x, *t)?;
        lag = lag.max(fr.lagrangian_residual());
        ang = ang.max(angle_diff(fr.angle(), *th).abs());
    }
    let stride = samples.len().div_ceil(verify_points).max(1);
    let residuals = samples
        .iter()
        .step_by(stride)
        .map(|(x, t)| verify_point(curve, x, *t))
        .collect::<Result<Vec<_>, _>>()?;
    let sol = residuals.iter().map(|r| r.soliton).fold(0.0, f64::max);
    checks.add("lagrangian_max", lag, LAGRANGIAN_TOL);
    checks.add("angle_max", ang, ANGLE_TOL);
    if expects_minimal(curve) {
        checks.add("mean_curvature_max", sol, MINIMAL_TOL);
    } else {
        checks.add("soliton_max", sol, SOLITON_TOL);
    }
    checks.note(format!("mesh_points = {}", samples.len()));
    checks.note(format!("soliton_checked_points = {}", residuals.len()));
    Ok(residuals)
}

fn sampled_mesh(
    out: &Path,
    curve: &dyn SolitonCurve,
    xs: &[QuadricPoint],
    ts: &[f64],
    sampling: &Sampling,
    checks: &mut Checks,
) -> CliResult<Vec<MeshRow>> {
    let samples = grid(xs, ts);
    let rows = mesh_samples(curve, &samples)?;
    write_mesh(out, "mesh", &rows, sampling)?;
    let thetas: Vec<f64> = rows.iter().map(|r| r.theta).collect();
    let residuals = check_mesh(curve, &samples, &thetas, sampling.verify_points, checks)?;
    write_residual_csv(&residuals, BufWriter::new(File::create(out.join("residuals.csv"))?))?;
    Ok(rows)
}

pub fn expander(
    out: &Path,
    n: Option<usize>,
    alpha: f64,
    a: Vec<f64>,
    psi: Option<Vec<f64>>,
    y_max: f64,
    sampling: &Sampling,
) -> CliResult<Outcome> {
    check_sampling(sampling)?;
    if let Some(n) = n {
        if n != a.len() {
            return usage(format!("--n {n} but --a has {} entries", a.len()));
        }
    }
    if !(y_max > 0.0) {
        return usage("--y-max must be positive");
    }
    let psi = psi.unwrap_or_else(|| vec![0.0; a.len()]);
    let profile = ExpanderProfile::new(alpha, a.clone(), psi.clone())?;
    prepare_out(out)?;

    let ys = linspace(-y_max, y_max, sampling.samples);
    let values = profile.profile_samples(&ys)?;
    profile.write_csv(&values, BufWriter::new(File::create(out.join("profile.csv"))?))?;

    let planes = profile.planes()?;
    let pb = profile.asymptotic_angles()?;
    let plane_text = format!(
        "L1_angles = {}\nL2_angles = {}\nphibar = {}\nphibar_sum = {}\n",
        list(&planes.l1),
        list(&planes.l2),
        list(&pb.phibar),
        pb.sum()
    );
    fs::write(out.join("planes.txt"), &plane_text)?;
    print!("{plane_text}");

    let xs = sample_quadric(profile.quadric(), sampling.points, sampling.spread, sampling.seed)?;
    let mut checks = Checks::default();
    let rows = sampled_mesh(out, &profile, &xs, &ys, sampling, &mut checks)?;
    if alpha == 0.0 {
        let (lo, hi) = rows
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), r| (l.min(r.theta), h.max(r.theta)));
        checks.add("theta_spread", hi - lo, ANGLE_TOL);
        checks.note("theta constant: special Lagrangian".into());
    }

    let mut run = BTreeMap::new();
    run.insert("command".into(), "expander".into());
    run.insert("alpha".into(), alpha.to_string());
    run.insert("a".into(), list(&a));
    run.insert("psi".into(), list(&psi));
    write_run(out, &run)?;
    checks.finish(out)
}

fn periodic_spec(data: &PeriodicData) -> CliResult<PeriodicSpec> {
    if data.qmax < 1 || !(data.detect_tol > 0.0) {
        return usage("--qmax must be positive and --detect-tol > 0");
    }
    let params = SolitonParams::new(data.lambdas.clone(), 1.0, data.alpha)?;
    Ok(PeriodicSpec::new(params, data.alphas.clone(), data.first_integral)?)
}

fn psi_of(data: &PeriodicData) -> Vec<f64> {
    data.psi.clone().unwrap_or_else(|| vec![0.0; data.lambdas.len()])
}

fn orbit_of(spec: &PeriodicSpec, data: &PeriodicData) -> CliResult<PeriodicOrbit> {
    Ok(spec.orbit_with(
        QuadOptions::default(),
        DetectOptions {
            qmax: data.qmax,
            tol: data.detect_tol,
        },
    )?)
}

fn orbit_text(orbit: &PeriodicOrbit) -> String {
    let mut s = format!(
        "u1 = {}\nu2 = {}\nS = {}\ngamma = {}\ncase = {}\n",
        orbit.u1,
        orbit.u2,
        orbit.period,
        list(&orbit.gamma),
        orbit.case_tag
    );
    match &orbit.verdict {
        Periodicity::Periodic { r, period, .. } => s.push_str(&format!("verdict = periodic\nr = {r}\nclosing_period = {period}\n")),
        Periodicity::QuasiPeriodic { qmax } => s.push_str(&format!("verdict = quasi-periodic (qmax {qmax})\n")),
    }
    s.push_str(&format!("topology = {}\n", orbit.topology));
    if let Some(w) = &orbit.warning {
        s.push_str(&format!("warning = {w}\n"));
    }
    s
}

/// The curve over one closing period, and that period.
fn closed_curve(spec: &PeriodicSpec, orbit: &PeriodicOrbit, psi: &[f64]) -> CliResult<(Box<dyn SolitonCurve>, f64)> {
    let Periodicity::Periodic { period, .. } = orbit.verdict else {
        return usage("the orbit does not close");
    };
    Ok((periodic_curve(spec, psi, -0.05 * period, 1.05 * period)?, period))
}

fn periodic_curve(spec: &PeriodicSpec, psi: &[f64], s_min: f64, s_max: f64) -> CliResult<Box<dyn SolitonCurve>> {
    Ok(match spec.case_tag() {
        CaseTag::I => Box::new(spec.hamiltonian_stationary(psi)?),
        CaseTag::II => Box::new(PeriodicCurve::new(spec, psi, s_min.min(0.0), s_max.max(0.0))?),
    })
}

pub fn periodic(out: &Path, command: &str, data: &PeriodicData, mesh: bool, sampling: &Sampling) -> CliResult<Outcome> {
    if command == "shrinker" && !(data.alpha < 0.0) {
        return usage("a compact shrinker needs α < 0");
    }
    check_sampling(sampling)?;
    let spec = periodic_spec(data)?;
    let psi = psi_of(data);
    let orbit = orbit_of(&spec, data)?;
    prepare_out(out)?;
    orbit.write_csv(BufWriter::new(File::create(out.join("orbit.csv"))?))?;
    let text = orbit_text(&orbit);
    print!("{text}");
    if !mesh {
        fs::write(out.join("summary.txt"), text + "status = pass\n")?;
        return Ok(Outcome::pass());
    }
    let mut checks = Checks::default();
    if !orbit.verdict.is_periodic() {
        checks.note("no mesh: the orbit does not close".into());
        return checks.finish(out);
    }
    let (curve, period) = closed_curve(&spec, &orbit, &psi)?;
    let ts = linspace(0.0, period, sampling.samples);
    let xs = sample_quadric(curve.quadric(), sampling.points, sampling.spread, sampling.seed)?;
    sampled_mesh(out, curve.as_ref(), &xs, &ts, sampling, &mut checks)?;

    let mut run = BTreeMap::new();
    run.insert("command".into(), command.to_string());
    run.insert("lambdas".into(), list(&data.lambdas));
    run.insert("alpha".into(), data.alpha.to_string());
    run.insert("alphas".into(), list(&data.alphas));
    run.insert("first-integral".into(), data.first_integral.to_string());
    run.insert("psi".into(), list(&psi));
    run.insert("s-min".into(), (-0.05 * period).to_string());
    run.insert("s-max".into(), (1.05 * period).to_string());
    write_run(out, &run)?;
    checks.finish(out)
}

pub fn periodic_search(
    out: &Path,
    data: &PeriodicData,
    target: Vec<f64>,
    tol: f64,
    max_iterations: usize,
) -> CliResult<Outcome> {
    if !(tol > 0.0) || max_iterations == 0 {
        return usage("--tol must be positive and --max-iterations nonzero");
    }
    let seed = periodic_spec(data)?;
    let res = lagsol_core::periodic::periodic_search(
        &seed,
        &target,
        SearchOptions {
            tol,
            max_iterations,
            detect: DetectOptions {
                qmax: data.qmax,
                tol: data.detect_tol,
            },
        },
    )?;
    prepare_out(out)?;
    res.orbit.write_csv(BufWriter::new(File::create(out.join("orbit.csv"))?))?;
    let text = format!(
        "iterations = {}\nresidual = {:e}\nalpha = {}\nalphas = {}\nfirst_integral = {}\n{}",
        res.iterations,
        res.residual,
        res.spec.alpha(),
        list(&res.spec.alphas),
        res.spec.a,
        orbit_text(&res.orbit)
    );
    print!("{text}");
    fs::write(out.join("search.txt"), &text)?;
    Ok(Outcome::pass())
}

fn translator_profile(alpha: f64, a: Vec<f64>, psi: Vec<f64>, k: Complex64) -> CliResult<TranslatorProfile> {
    Ok(TranslatorProfile::from_expander(ExpanderProfile::new(alpha, a, psi)?, Some(k))?)
}

fn parse_k(k: Option<Vec<f64>>) -> CliResult<Complex64> {
    match k.as_deref() {
        None => Ok(Complex64::new(0.0, 0.0)),
        Some([re, im]) => Ok(Complex64::new(*re, *im)),
        Some(_) => usage("--k takes `re,im`"),
    }
}

/// Spread of θ + ⟨JT, z⟩ over mesh rows.
fn maslov_from_rows(alpha: f64, rows: &[MeshRow]) -> lagsol_core::geometry::MaslovFit {
    let values: Vec<f64> = rows
        .iter()
        .map(|r| {
            let mut t = vec![Complex64::new(0.0, 0.0); r.z.len()];
            t[r.z.len() - 1] = Complex64::new(alpha, 0.0);
            r.theta + inner(&j_times(&t), &r.z)
        })
        .collect();
    maslov_fit(&values)
}

pub fn translator(
    out: &Path,
    alpha: f64,
    a: Vec<f64>,
    psi: Option<Vec<f64>>,
    k: Option<Vec<f64>>,
    y_max: f64,
    sampling: &Sampling,
) -> CliResult<Outcome> {
    check_sampling(sampling)?;
    if !(y_max > 0.0) {
        return usage("--y-max must be positive");
    }
    let k = parse_k(k)?;
    let psi = psi.unwrap_or_else(|| vec![0.0; a.len()]);
    let profile = translator_profile(alpha, a.clone(), psi.clone(), k)?;
    prepare_out(out)?;

    let ys = linspace(-y_max, y_max, sampling.samples);
    let xs = sample_quadric(profile.quadric(), sampling.points, sampling.spread, sampling.seed)?;
    let mut checks = Checks::default();
    let rows = sampled_mesh(out, &profile, &xs, &ys, sampling, &mut checks)?;

    if alpha != 0.0 {
        let fit = maslov_from_rows(alpha, &rows);
        let expected = alpha * k.im;
        checks.add("maslov_deviation", fit.max_deviation, MASLOV_TOL);
        checks.add("maslov_constant_error", angle_diff(fit.c, expected).abs(), MASLOV_TOL);
        checks.note(format!("maslov_constant = {} (expected {expected})", fit.c));
    }
    let signs = ys
        .iter()
        .map(|&y| profile.im_dbeta_ds(y))
        .collect::<Result<Vec<f64>, _>>()?;
    let monotone = signs.iter().all(|v| *v > 0.0) || signs.iter().all(|v| *v < 0.0);
    checks.add("im_beta_not_monotone", if monotone { 0.0 } else { 1.0 }, 0.5);
    checks.note(format!("injective = {monotone}"));
    checks.note(format!("infinite_oscillation = {}", profile.infinite_oscillation()));
    checks.note(format!("angle_oscillation = {}", profile.angle_oscillation()?));
    let planes = profile.planes()?;
    checks.note(format!("L1_angles = {}", list(&planes.l1)));
    checks.note(format!("L2_angles = {}", list(&planes.l2)));

    let mut run = BTreeMap::new();
    run.insert("command".into(), "translator".into());
    run.insert("alpha".into(), alpha.to_string());
    run.insert("a".into(), list(&a));
    run.insert("psi".into(), list(&psi));
    run.insert("k".into(), list(&[k.re, k.im]));
    write_run(out, &run)?;
    checks.finish(out)
}

pub fn invert_angles(alpha: f64, target: Vec<f64>, tol: f64) -> CliResult<Outcome> {
    if !(tol > 0.0) {
        return usage("--tol must be positive");
    }
    let res = invert_angle_map(
        alpha,
        &target,
        InversionOptions {
            tol,
            ..InversionOptions::default()
        },
    )?;
    println!("a = {}", list(&res.a));
    println!("achieved = {}", list(&res.achieved.phibar));
    println!("residual = {:e}", res.residual);
    println!("iterations = {}", res.iterations);
    Ok(Outcome::pass())
}

fn cfg_f64(map: &BTreeMap<String, String>, key: &str) -> CliResult<f64> {
    let v = map.get(key).ok_or_else(|| CliError::Usage(format!("run file lacks `{key}`")))?;
    v.parse()
        .map_err(|_| CliError::Usage(format!("run file: `{key}` is not a number")))
}

fn cfg_list(map: &BTreeMap<String, String>, key: &str) -> CliResult<Vec<f64>> {
    let v = map.get(key).ok_or_else(|| CliError::Usage(format!("run file lacks `{key}`")))?;
    v.split(',')
        .map(|c| c.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Usage(format!("run file: `{key}` is not a list of numbers")))
}

fn curve_from_run(map: &BTreeMap<String, String>) -> CliResult<(String, Box<dyn SolitonCurve>)> {
    let command = map
        .get("command")
        .cloned()
        .ok_or_else(|| CliError::Usage("run file lacks `command`".into()))?;
    let curve: Box<dyn SolitonCurve> = match command.as_str() {
        "expander" => Box::new(ExpanderProfile::new(
            cfg_f64(map, "alpha")?,
            cfg_list(map, "a")?,
            cfg_list(map, "psi")?,
        )?),
        "translator" => {
            let k = cfg_list(map, "k")?;
            Box::new(translator_profile(
                cfg_f64(map, "alpha")?,
                cfg_list(map, "a")?,
                cfg_list(map, "psi")?,
                parse_k(Some(k))?,
            )?)
        }
        "periodic" | "shrinker" => {
            let params = SolitonParams::new(cfg_list(map, "lambdas")?, 1.0, cfg_f64(map, "alpha")?)?;
            let spec = PeriodicSpec::new(params, cfg_list(map, "alphas")?, cfg_f64(map, "first-integral")?)?;
            periodic_curve(&spec, &cfg_list(map, "psi")?, cfg_f64(map, "s-min")?, cfg_f64(map, "s-max")?)?
        }
        other => return usage(format!("cannot verify runs of `{other}`")),
    };
    Ok((command, curve))
}

/// Rows y, r_1..r_n, phi_1..phi_n, theta of a profile file.
fn read_profile(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| CliError::Usage(format!("{} row {}: not numeric", path.display(), i + 1)))
        })
        .collect()
}

pub fn verify(dir: &Path, run: &Path, mesh: &Path, verify_points: usize, mesh_tol: f64) -> CliResult<Outcome> {
    if verify_points == 0 || !(mesh_tol > 0.0) {
        return usage("--verify-points must be positive and --mesh-tol > 0");
    }
    let run_text = fs::read_to_string(run).map_err(|e| CliError::Usage(format!("{}: {e}", run.display())))?;
    let map = config::to_map(config::parse(&run_text).map_err(|e| CliError::Usage(format!("{}: {e}", run.display())))?);
    let (command, curve) = curve_from_run(&map)?;
    let file = File::open(mesh).map_err(|e| CliError::Usage(format!("{}: {e}", mesh.display())))?;
    let rows = read_mesh_csv(BufReader::new(file))?;
    if rows.is_empty() {
        return usage("mesh has no rows");
    }

    let mut checks = Checks::default();
    let quadric = curve.quadric().clone();
    if rows.iter().any(|r| r.z.len() != quadric.ambient_dim()) {
        checks.add("mesh_shape", 1.0, 0.5);
        return checks.finish(dir);
    }
    let k = quadric.coord_dim();
    let mut samples = Vec::with_capacity(rows.len());
    let mut consistency: f64 = 0.0;
    let mut on_quadric: f64 = 0.0;
    for r in &rows {
        let cp = curve.point(r.t)?;
        let x: Vec<f64> = (0..k).map(|j| (r.z[j] * cp.w[j].conj()).re / cp.w[j].norm_sqr()).collect();
        let qp = QuadricPoint { x };
        let z = immerse(curve.as_ref(), &qp, r.t)?.z;
        let diff: Vec<Complex64> = z.iter().zip(&r.z).map(|(a, b)| a - b).collect();
        consistency = consistency.max(cnorm(&diff) / cnorm(&r.z).max(1.0));
        if let Quadric::Centred { lambdas, c } = &quadric {
            let q: f64 = lambdas.iter().zip(&qp.x).map(|(l, v)| l * v * v).sum();
            let scale: f64 = lambdas.iter().zip(&qp.x).map(|(l, v)| (l * v * v).abs()).sum::<f64>().max(1.0);
            on_quadric = on_quadric.max((q - c).abs() / scale);
        }
        samples.push((qp, r.t));
    }
    checks.add("mesh_consistency", consistency, mesh_tol);
    checks.add("quadric", on_quadric, mesh_tol);
    let thetas: Vec<f64> = rows.iter().map(|r| r.theta).collect();
    let residuals = check_mesh(curve.as_ref(), &samples, &thetas, verify_points, &mut checks)?;
    write_residual_csv(&residuals, BufWriter::new(File::create(dir.join("verify_residuals.csv"))?))?;

    if command == "translator" && curve.alpha() != 0.0 {
        let fit = maslov_from_rows(curve.alpha(), &rows);
        checks.add("maslov_deviation", fit.max_deviation, MASLOV_TOL);
    }
    let profile_path = dir.join("profile.csv");
    if command == "expander" && profile_path.exists() {
        let profile = ExpanderProfile::new(cfg_f64(&map, "alpha")?, cfg_list(&map, "a")?, cfg_list(&map, "psi")?)?;
        let table = read_profile(&profile_path)?;
        let n = profile.n();
        let ys: Vec<f64> = table.iter().map(|r| r[0]).collect();
        let mut worst: f64 = if table.iter().all(|r| r.len() == 2 * n + 2) { 0.0 } else { f64::INFINITY };
        if worst == 0.0 {
            for (row, v) in table.iter().zip(profile.profile_samples(&ys)?) {
                let mut expect = vec![v.y];
                expect.extend(v.r);
                expect.extend(v.phi);
                expect.push(v.theta);
                for (a, b) in row.iter().zip(&expect) {
                    worst = worst.max((a - b).abs() / b.abs().max(1.0));
                }
            }
        }
        checks.add("profile_consistency", worst, mesh_tol);
    }
    fs::write(dir.join("verify_summary.txt"), checks.render())?;
    let text = checks.render();
    print!("{text}");
    Ok(Outcome {
        failures: checks.failures(),
    })
}

pub fn flow_family(out: &Path, data: &PeriodicData, t_list: &[f64], sampling: &Sampling) -> CliResult<Outcome> {
    check_sampling(sampling)?;
    let spec = periodic_spec(data)?;
    let psi = psi_of(data);
    let orbit = orbit_of(&spec, data)?;
    let descriptors = t_list
        .iter()
        .map(|&t| brakke_family(&spec, &orbit, t))
        .collect::<Result<Vec<_>, _>>()?;
    let (curve, period) = closed_curve(&spec, &orbit, &psi)?;
    prepare_out(out)?;
    let ts = linspace(0.0, period, sampling.samples);
    let mut report = String::new();
    for (i, d) in descriptors.iter().enumerate() {
        let xs = level_set_points(d.m, d.n, d.t, sampling.points, sampling.spread, sampling.seed + i as u64)?;
        let rows = mesh_samples(curve.as_ref(), &grid(&xs, &ts))?;
        let stem = format!("flow_{i}");
        write_mesh(out, &stem, &rows, sampling)?;
        report.push_str(&format!(
            "{stem}: t = {}, topology = {}, singular_at_origin = {}\n",
            d.t, d.topology, d.singular_at_origin
        ));
    }
    print!("{report}");
    let mut f = File::create(out.join("flow_family.txt"))?;
    f.write_all(report.as_bytes())?;
    Ok(Outcome::pass())
}
