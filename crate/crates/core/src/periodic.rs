//! Periodic and quasi-periodic solutions of the reduced system.
//!
//! With G(u) = Q(u)e^{αu} having its unique critical point at u = 0, a
//! solution with first integral 0 < A < G(0)^{1/2} has u oscillating
//! between the two roots u₁ < 0 < u₂ of G = A². Over one period S of u each
//! angle φ_j advances by a fixed holonomy γ_j, and the curve closes up
//! exactly when every γ_j lies in πℚ. When A = G(0)^{1/2}, u ≡ 0 and the
//! solution is explicit (and Hamiltonian stationary).

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{invalid, Error, Result};
use crate::geometry::{CurvePoint, Parameter, Quadric, QuadricPoint, SolitonCurve};
use crate::ode::StepControl;
use crate::params::SolitonParams;
use crate::quad::{integrate, QuadOptions};
use crate::rational::{gcd, lcm, rational_approx};
use crate::reduced_ode::{fmt as fmt_f64, integrate_reduced_with, DenseTrajectory, ReducedState, TrajectorySpec};

/// Which sign pattern the quadric has.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// All λ_j = +1 and α < 0: compact quadric, compact solitons.
    A,
    /// Mixed signs, 1 ≤ m < n.
    B,
}

/// u constant (i) or oscillating (ii).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseTag {
    I,
    II,
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseTag::I => "i",
            CaseTag::II => "ii",
        })
    }
}

/// ∂/∂u ln G(u) = Σ λ_j/(α_j + λ_j u) + α.
fn dlng(lambdas: &[f64], alphas: &[f64], alpha: f64, u: f64) -> f64 {
    lambdas.iter().zip(alphas).map(|(l, a)| l / (a + l * u)).sum::<f64>() + alpha
}

fn domain_ends(lambdas: &[f64], alphas: &[f64]) -> (f64, f64) {
    let mut b1 = f64::NEG_INFINITY;
    let mut b2 = f64::INFINITY;
    for (l, a) in lambdas.iter().zip(alphas) {
        if *l > 0.0 {
            b1 = b1.max(-a);
        } else {
            b2 = b2.min(*a);
        }
    }
    (b1, b2)
}

/// Bisection for a decreasing function on the open interval (lo, hi);
/// `hi` may be +∞, in which case a finite upper bracket is found first.
fn bisect_decreasing<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<f64> {
    let mut lo = lo;
    let mut hi = hi;
    if hi.is_infinite() {
        let mut step = 1.0f64.max(lo.abs());
        let mut probe = lo + step;
        while f(probe) > 0.0 {
            lo = probe;
            step *= 2.0;
            probe = lo + step;
            if !probe.is_finite() {
                return invalid("no sign change before overflow");
            }
        }
        hi = probe;
    }
    if lo.is_infinite() {
        return invalid("left end of the bracket must be finite");
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let v = f(mid);
        if v == 0.0 {
            return Ok(mid);
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// The unique critical point of G(u) = ∏(α_j + λ_j u) e^{αu} on its domain.
pub fn critical_point(lambdas: &[f64], alphas: &[f64], alpha: f64) -> Result<f64> {
    if !lambdas.iter().any(|&l| l > 0.0) {
        return invalid("need at least one positive λ_j");
    }
    if lambdas.iter().all(|&l| l > 0.0) && alpha >= 0.0 {
        return invalid("with every λ_j = +1 a critical point needs α < 0");
    }
    let (b1, b2) = domain_ends(lambdas, alphas);
    bisect_decreasing(|u| dlng(lambdas, alphas, alpha, u), b1, b2)
}

/// Data of a periodic-type solution, rebased so that the critical point of
/// G sits at u = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSpec {
    pub params: SolitonParams,
    /// α_j at the critical point.
    pub alphas: Vec<f64>,
    /// First-integral constant at the critical point (positive).
    pub a: f64,
    /// Domain (β₁, β₂) of u.
    pub beta1: f64,
    pub beta2: f64,
    /// Where the critical point sat in the caller's base (u_*).
    pub u_shift: f64,
    pub family: Family,
}

impl PeriodicSpec {
    /// Validate and rebase. `alphas` and `a` describe the solution at any
    /// base point with u = 0 there; the stored data are moved to u_*.
    pub fn new(params: SolitonParams, alphas: Vec<f64>, a: f64) -> Result<Self> {
        params.validate()?;
        if !params.is_normalized() {
            return invalid("periodic data need normalized constants (λ_j = ±1, positives first, C = 1)");
        }
        let n = params.n();
        if alphas.len() != n {
            return invalid(format!("expected {n} values α_j"));
        }
        if alphas.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return invalid("every α_j must be positive");
        }
        if !(a > 0.0 && a.is_finite()) {
            return invalid("the first-integral constant A must be positive");
        }
        let family = if params.m() == n { Family::A } else { Family::B };
        let u_star = critical_point(&params.lambdas, &alphas, params.alpha)?;
        let rebased: Vec<f64> = alphas.iter().zip(&params.lambdas).map(|(x, l)| x + l * u_star).collect();
        if rebased.iter().any(|&x| x <= 0.0) {
            return invalid("critical point too close to the domain boundary");
        }
        let mut a_new = a * (-0.5 * params.alpha * u_star).exp();
        let g0: f64 = rebased.iter().product();
        if a_new * a_new > g0 * (1.0 + 1e-12) {
            return invalid(format!(
                "A = {a_new} at the critical point exceeds G(u_*)^(1/2) = {}",
                g0.sqrt()
            ));
        }
        if a_new * a_new > g0 {
            a_new = g0.sqrt();
        }
        let (beta1, beta2) = domain_ends(&params.lambdas, &rebased);
        Ok(Self {
            params,
            alphas: rebased,
            a: a_new,
            beta1,
            beta2,
            u_shift: u_star,
            family,
        })
    }

    pub fn n(&self) -> usize {
        self.alphas.len()
    }

    pub fn m(&self) -> usize {
        self.params.m()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.params.lambdas
    }

    pub fn alpha(&self) -> f64 {
        self.params.alpha
    }

    /// G(0) = α₁⋯αₙ.
    pub fn g0(&self) -> f64 {
        self.alphas.iter().product()
    }

    pub fn eval_g(&self, u: f64) -> f64 {
        self.alphas.iter().zip(self.lambdas()).map(|(a, l)| a + l * u).product::<f64>() * (self.alpha() * u).exp()
    }

    /// ln G(u) − 2 ln A, written as ln(G(0)/A²) + Σ ln(1 + λ_j u/α_j) + αu
    /// to keep relative accuracy when u and G(0) − A² are small.
    fn level(&self, u: f64) -> f64 {
        let mut s = self.alpha() * u + self.level_at_zero();
        for (a, l) in self.alphas.iter().zip(self.lambdas()) {
            let f = l * u / a;
            if f <= -1.0 {
                return f64::NEG_INFINITY;
            }
            s += f.ln_1p();
        }
        s
    }

    /// ln(G(0)/A²).
    fn level_at_zero(&self) -> f64 {
        self.alphas.iter().map(|a| a.ln()).sum::<f64>() - 2.0 * self.a.ln()
    }

    fn dlevel(&self, u: f64) -> f64 {
        dlng(self.lambdas(), &self.alphas, self.alpha(), u)
    }

    /// (i) when A² = G(0) to 1e−12 relative.
    pub fn case_tag(&self) -> CaseTag {
        let g0 = self.g0();
        if (g0 - self.a * self.a).abs() <= 1e-12 * g0 {
            CaseTag::I
        } else {
            CaseTag::II
        }
    }

    /// Warns when the oscillation is so small that the quadratures lose
    /// relative accuracy.
    pub fn conditioning_warning(&self) -> Option<String> {
        let g0 = self.g0();
        let gap = (g0 - self.a * self.a) / g0;
        (self.case_tag() == CaseTag::II && gap < 1e-10).then(|| {
            format!("(G(0) − A²)/G(0) = {gap:.3e} is below 1e-10; period and holonomies are ill-conditioned")
        })
    }

    /// Roots u₁ < 0 < u₂ of G(u) = A².
    pub fn turning_points(&self) -> Result<(f64, f64)> {
        if self.case_tag() == CaseTag::I {
            return Err(Error::CaseMismatch("u is constant when A² = G(0); there are no turning points".into()));
        }
        let u1 = bisect_decreasing(|u| -self.level(u), self.beta1, 0.0)?;
        let u2 = bisect_decreasing(|u| self.level(u), 0.0, self.beta2)?;
        Ok((u1, u2))
    }

    /// ln G(u₀ + δ) − ln G(u₀), accurate to full relative precision for
    /// small δ.
    fn level_increment(&self, u0: f64, delta: f64) -> f64 {
        let mut s = self.alpha() * delta;
        for (a, l) in self.alphas.iter().zip(self.lambdas()) {
            s += (l * delta / (a + l * u0)).ln_1p();
        }
        s
    }

    /// Integrate over v ∈ [u₁, u₂] with v = u₁ + (u₂ − u₁)sin²ξ. The callback
    /// receives v and dv/dξ divided by (G(v)/A² − 1)^{1/2}.
    ///
    /// The level ln(G/A²) is expanded about the nearer endpoint, and the
    /// endpoint residuals are interpolated away so it vanishes exactly at
    /// the computed u₁, u₂.
    fn turning_integral<F: Fn(f64, f64) -> f64>(&self, u1: f64, u2: f64, quad: QuadOptions, f: F) -> Result<f64> {
        let d = u2 - u1;
        let (h1, h2) = (self.level(u1), self.level(u2));
        let (s1, s2) = (self.dlevel(u1), self.dlevel(u2));
        let g = |xi: f64| {
            let (sn, cs) = xi.sin_cos();
            let tau = sn * sn;
            let v = u1 + d * tau;
            let mut h = if tau < 0.5 {
                self.level_increment(u1, d * tau) + tau * (h1 - h2)
            } else {
                self.level_increment(u2, -d * cs * cs) + cs * cs * (h2 - h1)
            };
            if !(h > 0.0) {
                h = if tau < 0.5 { s1 * d * tau } else { -s2 * d * cs * cs };
            }
            f(v, 2.0 * d * sn * cs / h.exp_m1().sqrt())
        };
        Ok(integrate(g, 0.0, FRAC_PI_2, quad)?.value)
    }

    /// S = ∫_{u₁}^{u₂} dv / (Q(v) − A²e^{−αv})^{1/2}.
    pub fn period(&self, u1: f64, u2: f64) -> Result<f64> {
        self.period_with(u1, u2, QuadOptions::default())
    }

    pub fn period_with(&self, u1: f64, u2: f64, quad: QuadOptions) -> Result<f64> {
        let alpha = self.alpha();
        let a = self.a;
        self.turning_integral(u1, u2, quad, |v, w| w * (0.5 * alpha * v).exp() / a)
    }

    /// γ_j = −∫_{u₁}^{u₂} Aλ_j dv / ((α_j + λ_j v)(G(v) − A²)^{1/2}).
    pub fn holonomies(&self, u1: f64, u2: f64) -> Result<Vec<f64>> {
        self.holonomies_with(u1, u2, QuadOptions::default())
    }

    pub fn holonomies_with(&self, u1: f64, u2: f64, quad: QuadOptions) -> Result<Vec<f64>> {
        (0..self.n())
            .map(|j| {
                let l = self.lambdas()[j];
                let aj = self.alphas[j];
                self.turning_integral(u1, u2, quad, |v, w| -l * w / (aj + l * v))
            })
            .collect()
    }

    /// lim_{A → G(0)^{1/2}} γ_j = −2πλ_jα_j^{−1}(2Σα_k^{−2})^{−1/2}.
    pub fn limit_gamma(&self) -> Vec<f64> {
        let s: f64 = self.alphas.iter().map(|a| a.powi(-2)).sum();
        let k = (2.0 * s).powf(-0.5);
        self.alphas
            .iter()
            .zip(self.lambdas())
            .map(|(a, l)| -2.0 * PI * l / a * k)
            .collect()
    }

    /// Small-oscillation period 2π(2α₁⋯αₙΣα_k^{−2})^{−1/2}.
    pub fn limit_period(&self) -> f64 {
        let s: f64 = self.alphas.iter().map(|a| a.powi(-2)).sum();
        2.0 * PI * (2.0 * self.g0() * s).powf(-0.5)
    }

    /// Turning points, period, holonomies and periodicity verdict with the
    /// default detection settings.
    pub fn orbit(&self) -> Result<PeriodicOrbit> {
        self.orbit_with(QuadOptions::default(), DetectOptions::default())
    }

    pub fn orbit_with(&self, quad: QuadOptions, detect: DetectOptions) -> Result<PeriodicOrbit> {
        let case_tag = self.case_tag();
        let (u1, u2, period, gamma) = match case_tag {
            CaseTag::I => {
                let s = self.limit_period();
                (0.0, 0.0, s, self.limit_gamma())
            }
            CaseTag::II => {
                let (u1, u2) = self.turning_points()?;
                (u1, u2, self.period_with(u1, u2, quad)?, self.holonomies_with(u1, u2, quad)?)
            }
        };
        let mut orbit = PeriodicOrbit {
            u1,
            u2,
            period,
            gamma,
            case_tag,
            verdict: Periodicity::QuasiPeriodic { qmax: detect.qmax },
            topology: String::new(),
            warning: self.conditioning_warning(),
            a: self.a,
            slopes: self.alphas.iter().zip(self.lambdas()).map(|(a, l)| l / a).collect(),
            family: self.family,
            m: self.m(),
        };
        orbit.verdict = detect_periodicity(&orbit, detect.tol, detect.qmax);
        orbit.topology = topology_tag(&orbit);
        Ok(orbit)
    }

    /// Initial data for the reduced system based at the critical point,
    /// with φ_j(0) = ψ_j and u increasing at s = 0.
    pub fn trajectory_spec(&self, psi: &[f64]) -> Result<TrajectorySpec> {
        if psi.len() != self.n() {
            return invalid(format!("expected {} values ψ_j", self.n()));
        }
        TrajectorySpec::with_first_integral(self.params.clone(), self.alphas.clone(), psi.to_vec(), self.a)
    }

    /// The explicit case-(i) solution.
    pub fn hamiltonian_stationary(&self, psi: &[f64]) -> Result<HamiltonianStationary> {
        if self.case_tag() != CaseTag::I {
            return Err(Error::CaseMismatch(format!(
                "explicit solution needs A² = G(0); here A² = {} and G(0) = {}",
                self.a * self.a,
                self.g0()
            )));
        }
        if psi.len() != self.n() {
            return invalid(format!("expected {} values ψ_j", self.n()));
        }
        Ok(HamiltonianStationary {
            spec: self.clone(),
            psi: psi.to_vec(),
            quadric: Quadric::Centred {
                lambdas: self.lambdas().to_vec(),
                c: 1.0,
            },
        })
    }
}

/// Settings for [`detect_periodicity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectOptions {
    pub qmax: i64,
    pub tol: f64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self { qmax: 64, tol: 1e-9 * 64.0 }
    }
}

/// Periodicity verdict.
#[derive(Debug, Clone, PartialEq)]
pub enum Periodicity {
    /// The curve closes after `period`. In case (ii) `numerators` are p_j
    /// with γ_j = 2πp_j/r and `period` = rS. In case (i) λ_j/α_j = μq_j with
    /// q_j = numerators_j / r, q_1 = 1, and `period` = 2πr/(Aμ).
    Periodic {
        r: i64,
        numerators: Vec<i64>,
        period: f64,
        mu: Option<f64>,
    },
    /// No rational structure with denominator ≤ qmax.
    QuasiPeriodic { qmax: i64 },
}

impl Periodicity {
    pub fn r(&self) -> Option<i64> {
        match self {
            Periodicity::Periodic { r, .. } => Some(*r),
            Periodicity::QuasiPeriodic { .. } => None,
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Periodicity::Periodic { .. })
    }
}

/// Period, holonomies and verdict of one solution.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOrbit {
    pub u1: f64,
    pub u2: f64,
    /// Period S of u (the small-oscillation limit in case (i)).
    pub period: f64,
    pub gamma: Vec<f64>,
    pub case_tag: CaseTag,
    pub verdict: Periodicity,
    pub topology: String,
    pub warning: Option<String>,
    pub a: f64,
    /// λ_j/α_j.
    pub slopes: Vec<f64>,
    pub family: Family,
    pub m: usize,
}

impl PeriodicOrbit {
    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    /// Columns: u1, u2, S, gamma_1..gamma_n, case_tag, periodic_r,
    /// topology_tag (periodic_r is 0 for quasi-periodic orbits).
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = vec!["u1".to_string(), "u2".into(), "S".into()];
        header.extend((1..=self.n()).map(|j| format!("gamma_{j}")));
        header.extend(["case_tag".to_string(), "periodic_r".into(), "topology_tag".into()]);
        writeln!(out, "{}", header.join(","))?;
        let mut row = vec![fmt_f64(self.u1), fmt_f64(self.u2), fmt_f64(self.period)];
        row.extend(self.gamma.iter().map(|&g| fmt_f64(g)));
        row.push(self.case_tag.to_string());
        row.push(self.verdict.r().unwrap_or(0).to_string());
        row.push(self.topology.clone());
        writeln!(out, "{}", row.join(","))
    }
}

/// Look for rational structure in an orbit.
///
/// Case (ii): the smallest r ≤ qmax with |γ_j − 2πp_j/r| < tol for all j.
/// Case (i): rational ratios of λ_j/α_j with common denominator ≤ qmax.
pub fn detect_periodicity(orbit: &PeriodicOrbit, tol: f64, qmax: i64) -> Periodicity {
    let quasi = Periodicity::QuasiPeriodic { qmax };
    match orbit.case_tag {
        CaseTag::II => {
            let mut fracs = Vec::with_capacity(orbit.n());
            for g in &orbit.gamma {
                match rational_approx(g / (2.0 * PI), qmax, tol / (2.0 * PI)) {
                    Some(pq) => fracs.push(pq),
                    None => return quasi,
                }
            }
            let r = fracs.iter().fold(1, |acc, &(_, q)| lcm(acc, q));
            if r > qmax {
                return quasi;
            }
            Periodicity::Periodic {
                r,
                numerators: fracs.iter().map(|&(p, q)| p * (r / q)).collect(),
                period: r as f64 * orbit.period,
                mu: None,
            }
        }
        CaseTag::I => {
            let mu = orbit.slopes[0];
            if !(mu > 0.0) {
                return quasi;
            }
            let mut fracs = Vec::with_capacity(orbit.n());
            for s in &orbit.slopes {
                match rational_approx(s / mu, qmax, tol) {
                    Some(pq) => fracs.push(pq),
                    None => return quasi,
                }
            }
            let r = fracs.iter().fold(1, |acc, &(_, q)| lcm(acc, q));
            if r > qmax {
                return quasi;
            }
            let numerators: Vec<i64> = fracs.iter().map(|&(p, q)| p * (r / q)).collect();
            debug_assert!(numerators.iter().fold(0, |g, &p| gcd(g, p)) >= 1);
            Periodicity::Periodic {
                r,
                numerators,
                period: 2.0 * PI * r as f64 / (orbit.a * mu),
                mu: Some(mu),
            }
        }
    }
}

/// Topology of the soliton built from an orbit.
pub fn topology_tag(orbit: &PeriodicOrbit) -> String {
    let n = orbit.n();
    let m = orbit.m;
    if !orbit.verdict.is_periodic() {
        return "non-closed immersion".into();
    }
    match orbit.family {
        Family::A => format!("S^1 x S^{}", n - 1),
        Family::B => format!("S^1 x S^{} x R^{}", m - 1, n - m),
    }
}

/// The explicit solution with u ≡ 0:
/// φ_j(s) = ψ_j − λ_jAs/α_j and θ(s) = Σψ_j − π/2 + αAs.
#[derive(Debug, Clone)]
pub struct HamiltonianStationary {
    pub spec: PeriodicSpec,
    pub psi: Vec<f64>,
    quadric: Quadric,
}

impl HamiltonianStationary {
    pub fn phis(&self, s: f64) -> Vec<f64> {
        let a = self.spec.a;
        self.psi
            .iter()
            .zip(&self.spec.alphas)
            .zip(self.spec.lambdas())
            .map(|((p, x), l)| p - l * a * s / x)
            .collect()
    }

    pub fn theta(&self, s: f64) -> f64 {
        self.psi.iter().sum::<f64>() - FRAC_PI_2 + self.spec.alpha() * self.spec.a * s
    }

    pub fn state(&self, s: f64) -> ReducedState {
        ReducedState {
            s,
            u: 0.0,
            phis: self.phis(s),
            theta: self.theta(s),
        }
    }
}

impl SolitonCurve for HamiltonianStationary {
    fn quadric(&self) -> &Quadric {
        &self.quadric
    }

    fn alpha(&self) -> f64 {
        self.spec.alpha()
    }

    fn parameter(&self) -> Parameter {
        Parameter::S
    }

    fn point(&self, s: f64) -> Result<CurvePoint> {
        let a = self.spec.a;
        let phis = self.phis(s);
        let mut w = Vec::with_capacity(phis.len());
        let mut dw = Vec::with_capacity(phis.len());
        for ((p, x), l) in phis.iter().zip(&self.spec.alphas).zip(self.spec.lambdas()) {
            let wj = Complex64::from_polar(x.sqrt(), *p);
            w.push(wj);
            dw.push(wj * Complex64::new(0.0, -l * a / x));
        }
        Ok(CurvePoint {
            t: s,
            w,
            dw,
            theta: self.theta(s),
            beta: None,
        })
    }
}

/// A case-(ii) solution sampled from the reduced system.
#[derive(Debug, Clone)]
pub struct PeriodicCurve {
    pub spec: PeriodicSpec,
    pub dense: DenseTrajectory,
    quadric: Quadric,
}

impl PeriodicCurve {
    /// Integrate over [s_min, s_max] (which must contain 0).
    pub fn new(spec: &PeriodicSpec, psi: &[f64], s_min: f64, s_max: f64) -> Result<Self> {
        let tspec = spec.trajectory_spec(psi)?;
        Ok(Self {
            spec: spec.clone(),
            dense: DenseTrajectory::new(&tspec, s_min, s_max)?,
            quadric: Quadric::Centred {
                lambdas: spec.lambdas().to_vec(),
                c: 1.0,
            },
        })
    }

    pub(crate) fn to_point(&self, st: &ReducedState) -> Result<CurvePoint> {
        let (w, dw) = self.dense.spec.lift(st)?;
        Ok(CurvePoint {
            t: st.s,
            w,
            dw,
            theta: st.theta,
            beta: None,
        })
    }
}

impl SolitonCurve for PeriodicCurve {
    fn quadric(&self) -> &Quadric {
        &self.quadric
    }

    fn alpha(&self) -> f64 {
        self.spec.alpha()
    }

    fn parameter(&self) -> Parameter {
        Parameter::S
    }

    fn point(&self, s: f64) -> Result<CurvePoint> {
        self.to_point(&self.dense.state_at(s)?)
    }

    fn points_around(&self, s: f64, offsets: &[f64]) -> Result<Vec<CurvePoint>> {
        self.dense
            .states_around(s, offsets)?
            .iter()
            .map(|st| self.to_point(st))
            .collect()
    }
}

/// Deviation of an integrated trajectory from the quasi-periodicity law
/// u(S) = u(0), φ_j(S) = φ_j(0) + γ_j, θ(S) = θ(0) + Σγ_j.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiPeriodicCheck {
    pub u: f64,
    pub phi: f64,
    pub theta: f64,
}

impl QuasiPeriodicCheck {
    pub fn max(&self) -> f64 {
        self.u.max(self.phi).max(self.theta)
    }
}

/// Integrate one period from the critical point and compare with the
/// quadrature values in `orbit`.
pub fn quasi_periodicity_check(spec: &PeriodicSpec, orbit: &PeriodicOrbit, psi: &[f64]) -> Result<QuasiPeriodicCheck> {
    let tspec = spec.trajectory_spec(psi)?;
    let ctl = StepControl {
        rtol: 1e-12,
        atol: 1e-14,
        ..StepControl::default()
    };
    let tr = integrate_reduced_with(&tspec, orbit.period, &ctl, &[])?;
    let end = tr.last();
    let start = tspec.initial_state();
    let phi = end
        .phis
        .iter()
        .zip(&start.phis)
        .zip(&orbit.gamma)
        .map(|((e, s), g)| (e - s - g).abs())
        .fold(0.0, f64::max);
    Ok(QuasiPeriodicCheck {
        u: (end.u - start.u).abs(),
        phi,
        theta: (end.theta - start.theta - orbit.gamma.iter().sum::<f64>()).abs(),
    })
}

/// Restricted derivative of (α, A) ↦ γ on directions preserving the
/// critical point, in relative coordinates δα_j/α_j, δA/A. Returns the
/// n × n matrix in an orthonormal basis of that subspace.
pub fn holonomy_jacobian(spec: &PeriodicSpec) -> Result<DMatrix<f64>> {
    let n = spec.n();
    // Constraint Σλ_j δα_j/α_j² = 0 in relative coordinates: Σ(λ_j/α_j)x_j = 0.
    let mut c = DVector::zeros(n + 1);
    for j in 0..n {
        c[j] = spec.lambdas()[j] / spec.alphas[j];
    }
    let basis = null_space_basis(&c);
    let h = 1e-5;
    let centre = || -> Result<Vec<f64>> {
        let (u1, u2) = spec.turning_points()?;
        spec.holonomies(u1, u2)
    };
    let mut jac = DMatrix::zeros(n, n);
    for (k, b) in basis.iter().enumerate() {
        let eval = |sign: f64| -> Result<Vec<f64>> {
            let alphas: Vec<f64> = (0..n).map(|j| spec.alphas[j] * (1.0 + sign * h * b[j])).collect();
            let a = spec.a * (1.0 + sign * h * b[n]);
            let s = PeriodicSpec::new(spec.params.clone(), alphas, a)?;
            if s.case_tag() == CaseTag::I {
                return invalid("finite-difference step reached A² = G(0)");
            }
            let (u1, u2) = s.turning_points()?;
            s.holonomies(u1, u2)
        };
        // One-sided near the case-(i) boundary, where one side leaves the data set.
        let (gp, gm, width) = match (eval(1.0), eval(-1.0)) {
            (Ok(p), Ok(m)) => (p, m, 2.0 * h),
            (Ok(p), Err(_)) => (p, centre()?, h),
            (Err(_), Ok(m)) => (centre()?, m, h),
            (Err(e), Err(_)) => return Err(e),
        };
        for j in 0..n {
            jac[(j, k)] = (gp[j] - gm[j]) / width;
        }
    }
    Ok(jac)
}

/// Orthonormal basis of the complement of a nonzero vector.
fn null_space_basis(c: &DVector<f64>) -> Vec<DVector<f64>> {
    let d = c.len();
    let cn = c.normalize();
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(d - 1);
    for i in 0..d {
        let mut v = DVector::zeros(d);
        v[i] = 1.0;
        v -= &cn * cn.dot(&v);
        for b in &out {
            v -= b * b.dot(&v);
        }
        if v.norm() > 1e-8 {
            out.push(v.normalize());
        }
        if out.len() == d - 1 {
            break;
        }
    }
    out
}

/// Settings for [`periodic_search`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub detect: DetectOptions,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 40,
            detect: DetectOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub spec: PeriodicSpec,
    pub orbit: PeriodicOrbit,
    pub iterations: usize,
    pub residual: f64,
}

/// Newton search for data whose holonomies equal `target`.
///
/// Moves (α, A) within the set keeping the critical point at 0; each step
/// solves the restricted linearization and is halved until the residual
/// decreases and the data stay in case (ii).
pub fn periodic_search(seed: &PeriodicSpec, target: &[f64], opts: SearchOptions) -> Result<SearchResult> {
    let n = seed.n();
    if target.len() != n {
        return Err(Error::InvalidTarget(format!("expected {n} target holonomies")));
    }
    if target.iter().any(|g| !g.is_finite()) {
        return Err(Error::InvalidTarget("target holonomies must be finite".into()));
    }
    let eval = |s: &PeriodicSpec| -> Result<(Vec<f64>, f64)> {
        let (u1, u2) = s.turning_points()?;
        let g = s.holonomies(u1, u2)?;
        let r = g.iter().zip(target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        Ok((g, r))
    };
    let mut spec = seed.clone();
    let (mut gamma, mut res) = eval(&spec)?;
    let mut iterations = 0;
    while res >= opts.tol {
        if iterations >= opts.max_iterations {
            return Err(Error::NonConvergence {
                iterations,
                residual: res,
                last: spec.alphas.iter().copied().chain([spec.a]).collect(),
            });
        }
        iterations += 1;
        let jac = holonomy_jacobian(&spec)?;
        let rhs = DVector::from_fn(n, |j, _| target[j] - gamma[j]);
        let step = jac
            .clone()
            .svd(true, true)
            .solve(&rhs, 1e-12 * jac.norm())
            .map_err(|e| Error::InvalidParameter(format!("singular holonomy derivative: {e}")))?;
        let mut c = DVector::zeros(n + 1);
        for j in 0..n {
            c[j] = spec.lambdas()[j] / spec.alphas[j];
        }
        let basis = null_space_basis(&c);
        let mut delta = DVector::zeros(n + 1);
        for (k, b) in basis.iter().enumerate() {
            delta += b * step[k];
        }
        let big = delta.amax();
        if big > 0.25 {
            delta *= 0.25 / big;
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let alphas: Vec<f64> = (0..n).map(|j| spec.alphas[j] * (1.0 + lambda * delta[j])).collect();
            let a = spec.a * (1.0 + lambda * delta[n]);
            let trial = PeriodicSpec::new(spec.params.clone(), alphas, a);
            if let Ok(t) = trial {
                if t.case_tag() == CaseTag::II {
                    if let Ok((g, r)) = eval(&t) {
                        if r < res {
                            spec = t;
                            gamma = g;
                            res = r;
                            accepted = true;
                            break;
                        }
                    }
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NonConvergence {
                iterations,
                residual: res,
                last: spec.alphas.iter().copied().chain([spec.a]).collect(),
            });
        }
    }
    let orbit = spec.orbit_with(QuadOptions::default(), opts.detect)?;
    Ok(SearchResult {
        spec,
        orbit,
        iterations,
        residual: res,
    })
}

/// Which coordinate is sent to infinity in [`reduction_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionSide {
    /// Append a coordinate with λ = −1 and α_n → ∞.
    Last,
    /// Prepend a coordinate with λ = +1 and α_1 → ∞.
    First,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionPoint {
    pub large: f64,
    pub gamma: Vec<f64>,
    /// max over the surviving indices of |γ_j − γ̃_j|, and |γ| of the
    /// added index.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionReport {
    pub reduced_gamma: Vec<f64>,
    pub points: Vec<ReductionPoint>,
    /// deviation(k) / deviation(k+1) for consecutive points.
    pub ratios: Vec<f64>,
}

/// Compare holonomies of (n+1)-dimensional data with one α_j large against
/// the n-dimensional `reduced` data, along α_j = large, A = large^{1/2}Ã.
pub fn reduction_check(reduced: &PeriodicSpec, side: ReductionSide, large: &[f64]) -> Result<ReductionReport> {
    let (u1, u2) = reduced.turning_points()?;
    let reduced_gamma = reduced.holonomies(u1, u2)?;
    let mut points = Vec::with_capacity(large.len());
    for &big in large {
        let (lambdas, alphas) = match side {
            ReductionSide::Last => {
                let mut l = reduced.lambdas().to_vec();
                l.push(-1.0);
                let mut a = reduced.alphas.clone();
                a.push(big);
                (l, a)
            }
            ReductionSide::First => {
                let mut l = vec![1.0];
                l.extend_from_slice(reduced.lambdas());
                let mut a = vec![big];
                a.extend_from_slice(&reduced.alphas);
                (l, a)
            }
        };
        let params = SolitonParams::normalized(&lambdas, reduced.alpha())?;
        let spec = PeriodicSpec::new(params, alphas, big.sqrt() * reduced.a)?;
        let (v1, v2) = spec.turning_points()?;
        let gamma = spec.holonomies(v1, v2)?;
        let (kept, added): (Vec<f64>, f64) = match side {
            ReductionSide::Last => (gamma[..gamma.len() - 1].to_vec(), gamma[gamma.len() - 1]),
            ReductionSide::First => (gamma[1..].to_vec(), gamma[0]),
        };
        let deviation = kept
            .iter()
            .zip(&reduced_gamma)
            .map(|(a, b)| (a - b).abs())
            .fold(added.abs(), f64::max);
        points.push(ReductionPoint {
            large: big,
            gamma,
            deviation,
        });
    }
    let ratios = points.windows(2).map(|w| w[0].deviation / w[1].deviation).collect();
    Ok(ReductionReport {
        reduced_gamma,
        points,
        ratios,
    })
}

/// The level set Σ_{j≤m}x_j² − Σ_{j>m}x_j² = t of the family L_t.
#[derive(Debug, Clone, PartialEq)]
pub struct BrakkeDescriptor {
    pub t: f64,
    pub m: usize,
    pub n: usize,
    pub topology: String,
    pub singular_at_origin: bool,
}

/// Descriptor of L_t for a closed solution with m positive signs.
pub fn brakke_family(spec: &PeriodicSpec, orbit: &PeriodicOrbit, t: f64) -> Result<BrakkeDescriptor> {
    if !orbit.verdict.is_periodic() {
        return invalid("the family L_t needs a closed (periodic) curve");
    }
    if !t.is_finite() {
        return invalid("t must be finite");
    }
    let (n, m) = (spec.n(), spec.m());
    let topology = if t > 0.0 {
        format!("S^1 x S^{} x R^{}", m - 1, n - m)
    } else if t < 0.0 {
        if m == n {
            return invalid("the level set is empty for t < 0 when every sign is positive");
        }
        format!("S^1 x S^{} x R^{}", n - m - 1, m)
    } else {
        "cone over S^1 x S^{m-1} x S^{n-m-1} with an isolated singular point at 0"
            .replace("{m-1}", &(m - 1).to_string())
            .replace("{n-m-1}", &(n as i64 - m as i64 - 1).to_string())
    };
    Ok(BrakkeDescriptor {
        t,
        m,
        n,
        topology,
        singular_at_origin: t == 0.0,
    })
}

/// Deterministic points on Σ_{j≤m}x_j² − Σ_{j>m}x_j² = t. The block
/// matching the sign of t lies on a sphere whose radius absorbs the other
/// block, which is drawn from [−spread, spread]; for t = 0 both blocks get
/// the same norm, drawn from (0, spread].
pub fn level_set_points(m: usize, n: usize, t: f64, count: usize, spread: f64, seed: u64) -> Result<Vec<QuadricPoint>> {
    if m == 0 || m > n {
        return invalid("need 1 ≤ m ≤ n");
    }
    if t < 0.0 && m == n {
        return invalid("the level set is empty for t < 0 when every sign is positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let box_dist = Uniform::new_inclusive(-spread, spread);
    let radius_dist = Uniform::new_inclusive(0.0, spread);
    let unit = |k: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nv > 1e-12 {
                return v.into_iter().map(|x| x / nv).collect();
            }
        }
    };
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut x = vec![0.0; n];
        if t > 0.0 || (t == 0.0 && m == n) {
            let rest: f64 = (m..n).map(|j| {
                x[j] = box_dist.sample(&mut rng);
                x[j] * x[j]
            }).sum();
            let r = (t + rest).sqrt();
            let d = unit(m, &mut rng);
            (0..m).for_each(|j| x[j] = r * d[j]);
        } else if t < 0.0 {
            let rest: f64 = (0..m).map(|j| {
                x[j] = box_dist.sample(&mut rng);
                x[j] * x[j]
            }).sum();
            let r = (-t + rest).sqrt();
            let d = unit(n - m, &mut rng);
            (m..n).for_each(|j| x[j] = r * d[j - m]);
        } else {
            let r = radius_dist.sample(&mut rng);
            let d1 = unit(m, &mut rng);
            let d2 = unit(n - m, &mut rng);
            (0..m).for_each(|j| x[j] = r * d1[j]);
            (m..n).for_each(|j| x[j] = r * d2[j - m]);
        }
        out.push(QuadricPoint { x });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(l: &[f64], alpha: f64, alphas: &[f64], a: f64) -> PeriodicSpec {
        PeriodicSpec::new(SolitonParams::normalized(l, alpha).unwrap(), alphas.to_vec(), a).unwrap()
    }

    #[test]
    fn critical_point_examples() {
        assert_relative_eq!(critical_point(&[1.0, -1.0], &[1.0, 3.0], 0.0).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(critical_point(&[1.0, 1.0], &[1.0, 1.0], -2.0).unwrap(), 0.0, epsilon = 1e-14);
        assert!(critical_point(&[1.0, 1.0], &[1.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn rebasing_moves_the_critical_point_to_zero() {
        let s = spec(&[1.0, -1.0], 0.0, &[1.0, 3.0], 1.0);
        assert_relative_eq!(s.alphas[0], 2.0, epsilon = 1e-14);
        assert_relative_eq!(s.alphas[1], 2.0, epsilon = 1e-14);
        assert_eq!(s.u_shift, 1.0);
        assert_eq!(s.beta1, -2.0);
        assert_eq!(s.beta2, 2.0);
    }

    #[test]
    fn case_classification() {
        assert_eq!(spec(&[1.0, -1.0], 0.0, &[1.0, 1.0], 1.0).case_tag(), CaseTag::I);
        assert_eq!(spec(&[1.0, -1.0], 0.0, &[1.0, 1.0], 0.9).case_tag(), CaseTag::II);
        assert_eq!(spec(&[1.0, 1.0], -2.0, &[1.0, 1.0], 1.0).case_tag(), CaseTag::I);
        assert!(PeriodicSpec::new(SolitonParams::normalized(&[1.0], -1.0).unwrap(), vec![1.0], 1.1).is_err());
    }

    #[test]
    fn turning_points_solve_the_level_equation() {
        let s = spec(&[1.0, 1.0], -2.0, &[1.0, 1.0], 0.5);
        let (u1, u2) = s.turning_points().unwrap();
        assert!(u1 < 0.0 && u2 > 0.0);
        assert_relative_eq!(s.eval_g(u1), 0.25, max_relative = 1e-13);
        assert_relative_eq!(s.eval_g(u2), 0.25, max_relative = 1e-13);
    }

    #[test]
    fn two_dimensional_special_lagrangian_holonomy_is_half_turn() {
        // Q = 1 − v² and ∫ dv/((1+v)(b² − v²)^{1/2}) = π/A on [−b, b].
        for a in [0.2, 0.6, 0.95] {
            let s = spec(&[1.0, -1.0], 0.0, &[1.0, 1.0], a);
            let o = s.orbit().unwrap();
            assert_relative_eq!(o.gamma[0], -PI, epsilon = 1e-10);
            assert_relative_eq!(o.gamma[1], PI, epsilon = 1e-10);
            // S = ∫ dv/(b² − v²)^{1/2} = π.
            assert_relative_eq!(o.period, PI, epsilon = 1e-10);
            assert_eq!(o.verdict.r(), Some(2));
        }
    }

    #[test]
    fn limits_match_closed_forms() {
        let s = spec(&[1.0], -1.0, &[1.0], 1.0);
        assert_relative_eq!(s.limit_gamma()[0], -2f64.sqrt() * PI, epsilon = 1e-14);
        let s = spec(&[1.0, -1.0], 0.0, &[1.0, 1.0], 1.0);
        assert_relative_eq!(s.limit_gamma()[0], -PI, epsilon = 1e-14);
        assert_relative_eq!(s.limit_gamma()[1], PI, epsilon = 1e-14);
    }

    #[test]
    fn near_limit_holonomy() {
        let s = spec(&[1.0, 1.0], -2.0, &[1.0, 1.0], 1.0 - 1e-6);
        let o = s.orbit().unwrap();
        for (g, l) in o.gamma.iter().zip(s.limit_gamma()) {
            assert!((g - l).abs() < 1e-2, "{g} vs {l}");
        }
        assert!((o.period - s.limit_period()).abs() < 1e-2);
    }

    #[test]
    fn explicit_solution_solves_the_reduced_system() {
        use crate::reduced_ode::reduced_rhs;
        let s = spec(&[1.0, -1.0], 0.0, &[1.0, 1.0], 1.0);
        let hs = s.hamiltonian_stationary(&[0.0, 0.0]).unwrap();
        let tspec = s.trajectory_spec(&[0.0, 0.0]).unwrap();
        for t in [0.0, 0.7, -3.0] {
            let st = hs.state(t);
            let d = reduced_rhs(&tspec, &st).unwrap();
            assert!(d.du.abs() < 1e-15);
            assert!((d.dphis[0] + 1.0).abs() < 1e-15 && (d.dphis[1] - 1.0).abs() < 1e-15);
            assert!(d.dtheta.abs() < 1e-15);
        }
        assert_eq!(hs.theta(5.0), -FRAC_PI_2);
        let o = s.orbit().unwrap();
        match o.verdict {
            Periodicity::Periodic { r, period, .. } => {
                assert_eq!(r, 1);
                assert_relative_eq!(period, 2.0 * PI, epsilon = 1e-12);
            }
            _ => panic!("expected a periodic verdict"),
        }
        assert!(spec(&[1.0, -1.0], 0.0, &[1.0, 1.0], 0.5).hamiltonian_stationary(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn brakke_descriptors() {
        let s = spec(&[1.0, -1.0], 0.0, &[1.0, 1.0], 0.9);
        let o = s.orbit().unwrap();
        let d = brakke_family(&s, &o, 0.0).unwrap();
        assert!(d.singular_at_origin);
        assert_eq!(brakke_family(&s, &o, 1.0).unwrap().topology, "S^1 x S^0 x R^1");
        assert!(!brakke_family(&s, &o, -1.0).unwrap().singular_at_origin);
        for t in [-1.0, 0.0, 2.0] {
            for p in level_set_points(1, 2, t, 5, 2.0, 1).unwrap() {
                assert!((p.x[0] * p.x[0] - p.x[1] * p.x[1] - t).abs() < 1e-12);
            }
        }
    }
}
