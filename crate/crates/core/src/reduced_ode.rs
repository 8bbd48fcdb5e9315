//! The curve equations behind the quadric construction, in full form
//! (complex w_j and the angle θ) and in reduced form (u, φ_j, θ), together
//! with the first integral that the reduced flow conserves.
//!
//! With w_j = r_j e^{iφ_j}, r_j² = α_j + λ_j u and Q(u) = ∏(α_j + λ_j u):
//!
//! ```text
//! u'   = 2 Q^{1/2} cos(φ − θ)
//! φ_j' = −λ_j Q^{1/2} sin(φ − θ) / (α_j + λ_j u)
//! θ'   = α Q^{1/2} sin(φ − θ)
//! ```
//!
//! and Q^{1/2} e^{αu/2} sin(φ − θ) is constant along solutions.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::ode::{self, OdeSystem, OutOfDomain, StepControl};
use crate::params::SolitonParams;

/// Integration stops once some α_j + λ_j u falls below this.
pub const DOMAIN_COLLAR: f64 = 1e-12;

/// Initial data for the curve equations at the base point s₀.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub params: SolitonParams,
    /// α_j = r_j(s₀)².
    pub alphas: Vec<f64>,
    /// Lifted φ_j(s₀).
    pub phi0: Vec<f64>,
    /// Lifted θ(s₀).
    pub theta0: f64,
    pub s0: f64,
}

/// Reduced variables at parameter value `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub s: f64,
    pub u: f64,
    pub phis: Vec<f64>,
    pub theta: f64,
}

impl ReducedState {
    /// φ = Σ φ_j.
    pub fn phi(&self) -> f64 {
        self.phis.iter().sum()
    }

    fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.phis.len() + 2);
        v.push(self.u);
        v.extend_from_slice(&self.phis);
        v.push(self.theta);
        v
    }

    fn from_vec(s: f64, y: &[f64]) -> Self {
        let n = y.len() - 2;
        Self {
            s,
            u: y[0],
            phis: y[1..=n].to_vec(),
            theta: y[n + 1],
        }
    }
}

/// s-derivatives of the reduced variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDerivative {
    pub du: f64,
    pub dphis: Vec<f64>,
    pub dtheta: f64,
}

impl ReducedDerivative {
    pub fn dphi(&self) -> f64 {
        self.dphis.iter().sum()
    }
}

/// Unreduced variables at parameter value `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    pub s: f64,
    pub ws: Vec<Complex64>,
    pub theta: f64,
}

impl FullState {
    /// u recovered from |w_j|² = α_j + λ_j u, averaged over j.
    pub fn u(&self, spec: &TrajectorySpec) -> f64 {
        let n = self.ws.len() as f64;
        self.ws
            .iter()
            .zip(&spec.alphas)
            .zip(&spec.params.lambdas)
            .map(|((w, a), l)| (w.norm_sqr() - a) / l)
            .sum::<f64>()
            / n
    }

    /// max_j | |w_j|² − λ_j u − α_j | for a reference value of u.
    pub fn lift_residual(&self, spec: &TrajectorySpec, u: f64) -> f64 {
        self.ws
            .iter()
            .zip(&spec.alphas)
            .zip(&spec.params.lambdas)
            .map(|((w, a), l)| (w.norm_sqr() - l * u - a).abs())
            .fold(0.0, f64::max)
    }
}

/// Difference of two angles reduced to (−π, π].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let d = (a - b).rem_euclid(tau);
    if d > std::f64::consts::PI {
        d - tau
    } else {
        d
    }
}

impl TrajectorySpec {
    pub fn new(params: SolitonParams, alphas: Vec<f64>, phi0: Vec<f64>, theta0: f64, s0: f64) -> Result<Self> {
        params.validate()?;
        let n = params.n();
        if alphas.len() != n || phi0.len() != n {
            return invalid(format!("expected {n} values for α_j and φ_j(s₀)"));
        }
        if alphas.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return invalid("every α_j = r_j(s₀)² must be positive");
        }
        if phi0.iter().any(|p| !p.is_finite()) || !theta0.is_finite() || !s0.is_finite() {
            return invalid("initial angles and base point must be finite");
        }
        Ok(Self {
            params,
            alphas,
            phi0,
            theta0,
            s0,
        })
    }

    /// Data with a prescribed first-integral value A, φ_j(s₀) = ψ_j and
    /// u increasing at s₀ (cos(φ − θ) ≥ 0).
    pub fn with_first_integral(params: SolitonParams, alphas: Vec<f64>, psi: Vec<f64>, a: f64) -> Result<Self> {
        let q0: f64 = alphas.iter().product();
        if !(q0 > 0.0) || a.abs() > q0.sqrt() * (1.0 + 1e-14) {
            return invalid(format!("|A| = {} exceeds Q(0)^(1/2) = {}", a.abs(), q0.sqrt()));
        }
        let ratio = (a / q0.sqrt()).clamp(-1.0, 1.0);
        let theta0 = psi.iter().sum::<f64>() - ratio.asin();
        Self::new(params, alphas, psi, theta0, 0.0)
    }

    pub fn n(&self) -> usize {
        self.alphas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.params.lambdas
    }

    pub fn alpha(&self) -> f64 {
        self.params.alpha
    }

    /// Q(u) = ∏ (α_j + λ_j u).
    pub fn eval_q(&self, u: f64) -> f64 {
        eval_q(&self.alphas, self.lambdas(), u)
    }

    /// The first-integral value fixed by the initial data.
    pub fn first_integral_constant(&self) -> f64 {
        let q0: f64 = self.alphas.iter().product();
        q0.sqrt() * (self.phi0.iter().sum::<f64>() - self.theta0).sin()
    }

    pub fn initial_state(&self) -> ReducedState {
        ReducedState {
            s: self.s0,
            u: 0.0,
            phis: self.phi0.clone(),
            theta: self.theta0,
        }
    }

    pub fn initial_full_state(&self) -> FullState {
        FullState {
            s: self.s0,
            ws: self
                .alphas
                .iter()
                .zip(&self.phi0)
                .map(|(a, p)| Complex64::from_polar(a.sqrt(), *p))
                .collect(),
            theta: self.theta0,
        }
    }

    /// Smallest radius factor min_j (α_j + λ_j u).
    pub fn min_factor(&self, u: f64) -> f64 {
        self.alphas
            .iter()
            .zip(self.lambdas())
            .map(|(a, l)| a + l * u)
            .fold(f64::INFINITY, f64::min)
    }

    /// The complex curve w_j(s) and its derivative at a reduced state.
    pub fn lift(&self, state: &ReducedState) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        if self.min_factor(state.u) <= 0.0 {
            return Err(Error::DomainEscape { s: state.s });
        }
        let ws: Vec<Complex64> = self
            .alphas
            .iter()
            .zip(self.lambdas())
            .zip(&state.phis)
            .map(|((a, l), p)| Complex64::from_polar((a + l * state.u).sqrt(), *p))
            .collect();
        let dws = full_rhs_w(self.lambdas(), &ws, state.theta);
        Ok((ws, dws))
    }
}

/// Q(u) = ∏ (α_j + λ_j u) for explicit data.
pub fn eval_q(alphas: &[f64], lambdas: &[f64], u: f64) -> f64 {
    alphas.iter().zip(lambdas).map(|(a, l)| a + l * u).product()
}

/// Right-hand side of the reduced system.
pub fn reduced_rhs(spec: &TrajectorySpec, state: &ReducedState) -> Result<ReducedDerivative> {
    let mut dy = vec![0.0; spec.n() + 2];
    ReducedSystem { spec }
        .rhs(state.s, &state.to_vec(), &mut dy)
        .map_err(|_| Error::DomainEscape { s: state.s })?;
    Ok(ReducedDerivative {
        du: dy[0],
        dphis: dy[1..=spec.n()].to_vec(),
        dtheta: dy[spec.n() + 1],
    })
}

/// Q(u)^{1/2} e^{αu/2} sin(φ − θ).
pub fn first_integral(spec: &TrajectorySpec, state: &ReducedState) -> Result<f64> {
    if spec.min_factor(state.u) <= 0.0 {
        return Err(Error::DomainEscape { s: state.s });
    }
    Ok(first_integral_raw(spec, state.u, state.phi() - state.theta))
}

fn first_integral_raw(spec: &TrajectorySpec, u: f64, phase: f64) -> f64 {
    spec.eval_q(u).sqrt() * (0.5 * spec.alpha() * u).exp() * phase.sin()
}

/// dw_j/ds = λ_j e^{iθ} conj(∏_{k≠j} w_k).
pub fn full_rhs_w(lambdas: &[f64], ws: &[Complex64], theta: f64) -> Vec<Complex64> {
    let n = ws.len();
    let e = Complex64::from_polar(1.0, theta);
    // Products excluding index j via prefix and suffix products.
    let mut prefix = vec![Complex64::new(1.0, 0.0); n + 1];
    for j in 0..n {
        prefix[j + 1] = prefix[j] * ws[j];
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let mut suffix = Complex64::new(1.0, 0.0);
    for j in (0..n).rev() {
        out[j] = lambdas[j] * e * (prefix[j] * suffix).conj();
        suffix *= ws[j];
    }
    out
}

struct ReducedSystem<'a> {
    spec: &'a TrajectorySpec,
}

impl OdeSystem for ReducedSystem<'_> {
    fn dim(&self) -> usize {
        self.spec.n() + 2
    }

    fn rhs(&self, _s: f64, y: &[f64], dy: &mut [f64]) -> std::result::Result<(), OutOfDomain> {
        let n = self.spec.n();
        let u = y[0];
        let mut sq = 1.0;
        for (a, l) in self.spec.alphas.iter().zip(self.spec.lambdas()) {
            let f = a + l * u;
            if !(f > 0.0) {
                return Err(OutOfDomain);
            }
            sq *= f.sqrt();
        }
        let phase: f64 = y[1..=n].iter().sum::<f64>() - y[n + 1];
        let (sn, cs) = phase.sin_cos();
        dy[0] = 2.0 * sq * cs;
        for j in 0..n {
            let l = self.spec.lambdas()[j];
            dy[1 + j] = -l * sq * sn / (self.spec.alphas[j] + l * u);
        }
        dy[n + 1] = self.spec.alpha() * sq * sn;
        Ok(())
    }

    fn invariant(&self, _s: f64, y: &[f64]) -> Option<f64> {
        let n = self.spec.n();
        if self.spec.min_factor(y[0]) <= 0.0 {
            return None;
        }
        let phase: f64 = y[1..=n].iter().sum::<f64>() - y[n + 1];
        Some(first_integral_raw(self.spec, y[0], phase))
    }

    fn check_state(&self, _s: f64, y: &[f64]) -> std::result::Result<(), OutOfDomain> {
        if self.spec.min_factor(y[0]) < DOMAIN_COLLAR {
            Err(OutOfDomain)
        } else {
            Ok(())
        }
    }
}

struct FullSystem<'a> {
    spec: &'a TrajectorySpec,
}

impl OdeSystem for FullSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.spec.n() + 1
    }

    fn rhs(&self, _s: f64, y: &[f64], dy: &mut [f64]) -> std::result::Result<(), OutOfDomain> {
        let n = self.spec.n();
        let ws: Vec<Complex64> = (0..n).map(|j| Complex64::new(y[2 * j], y[2 * j + 1])).collect();
        let theta = y[2 * n];
        let dws = full_rhs_w(self.spec.lambdas(), &ws, theta);
        for j in 0..n {
            dy[2 * j] = dws[j].re;
            dy[2 * j + 1] = dws[j].im;
        }
        let prod: Complex64 = ws.iter().product();
        dy[2 * n] = self.spec.alpha() * (Complex64::from_polar(1.0, -theta) * prod).im;
        Ok(())
    }

    fn check_state(&self, _s: f64, y: &[f64]) -> std::result::Result<(), OutOfDomain> {
        let n = self.spec.n();
        if (0..n).any(|j| y[2 * j] * y[2 * j] + y[2 * j + 1] * y[2 * j + 1] < DOMAIN_COLLAR) {
            Err(OutOfDomain)
        } else {
            Ok(())
        }
    }
}

/// Sampled reduced trajectory (every accepted step, in order of integration).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub spec: TrajectorySpec,
    pub states: Vec<ReducedState>,
    pub rejected_steps: usize,
}

impl Trajectory {
    /// max over samples of |first_integral − A| / max(1, |A|).
    pub fn max_relative_drift(&self) -> f64 {
        let a = self.spec.first_integral_constant();
        self.states
            .iter()
            .map(|st| (first_integral_raw(&self.spec, st.u, st.phi() - st.theta) - a).abs() / a.abs().max(1.0))
            .fold(0.0, f64::max)
    }

    pub fn last(&self) -> &ReducedState {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// The sample at exactly `s`, if integration was asked to hit it.
    pub fn at(&self, s: f64) -> Option<&ReducedState> {
        self.states.iter().find(|st| st.s == s)
    }

    /// Columns: s, u, phi_1..phi_n, theta, first_integral_residual.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.spec.n();
        let mut header = vec!["s".to_string(), "u".to_string()];
        header.extend((1..=n).map(|j| format!("phi_{j}")));
        header.push("theta".into());
        header.push("first_integral_residual".into());
        writeln!(out, "{}", header.join(","))?;
        let a = self.spec.first_integral_constant();
        for st in &self.states {
            let mut row = vec![fmt(st.s), fmt(st.u)];
            row.extend(st.phis.iter().map(|&p| fmt(p)));
            row.push(fmt(st.theta));
            row.push(fmt(first_integral_raw(&self.spec, st.u, st.phi() - st.theta) - a));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub(crate) fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

/// Sampled full trajectory.
#[derive(Debug, Clone)]
pub struct FullTrajectory {
    pub spec: TrajectorySpec,
    pub states: Vec<FullState>,
}

impl FullTrajectory {
    pub fn at(&self, s: f64) -> Option<&FullState> {
        self.states.iter().find(|st| st.s == s)
    }
}

fn control(tol: f64) -> Result<StepControl> {
    if !(tol > 0.0) {
        return invalid("tolerance must be positive");
    }
    Ok(StepControl {
        rtol: tol,
        atol: tol * 1e-2,
        ..StepControl::default()
    })
}

/// Integrate the reduced system from s₀ to `s_end` with local tolerance `tol`
/// (absolute tolerance `tol/100`).
pub fn integrate_reduced(spec: &TrajectorySpec, s_end: f64, tol: f64) -> Result<Trajectory> {
    integrate_reduced_with(spec, s_end, &control(tol)?, &[])
}

/// As [`integrate_reduced`] with explicit step control and output points.
pub fn integrate_reduced_with(spec: &TrajectorySpec, s_end: f64, ctl: &StepControl, outputs: &[f64]) -> Result<Trajectory> {
    let sys = ReducedSystem { spec };
    if spec.min_factor(0.0) < DOMAIN_COLLAR {
        return Err(Error::DomainEscape { s: spec.s0 });
    }
    let sol = ode::integrate(&sys, spec.s0, &spec.initial_state().to_vec(), s_end, ctl, outputs)?;
    Ok(Trajectory {
        spec: spec.clone(),
        states: sol.s.iter().zip(&sol.y).map(|(&s, y)| ReducedState::from_vec(s, y)).collect(),
        rejected_steps: sol.rejected,
    })
}

/// Integrate the unreduced system in (w_j, θ).
pub fn integrate_full(spec: &TrajectorySpec, s_end: f64, tol: f64) -> Result<FullTrajectory> {
    integrate_full_with(spec, s_end, &control(tol)?, &[])
}

pub fn integrate_full_with(spec: &TrajectorySpec, s_end: f64, ctl: &StepControl, outputs: &[f64]) -> Result<FullTrajectory> {
    let sys = FullSystem { spec };
    let init = spec.initial_full_state();
    let mut y0 = Vec::with_capacity(2 * spec.n() + 1);
    for w in &init.ws {
        y0.push(w.re);
        y0.push(w.im);
    }
    y0.push(init.theta);
    let sol = ode::integrate(&sys, spec.s0, &y0, s_end, ctl, outputs)?;
    let n = spec.n();
    Ok(FullTrajectory {
        spec: spec.clone(),
        states: sol
            .s
            .iter()
            .zip(&sol.y)
            .map(|(&s, y)| FullState {
                s,
                ws: (0..n).map(|j| Complex64::new(y[2 * j], y[2 * j + 1])).collect(),
                theta: y[2 * n],
            })
            .collect(),
    })
}

/// Reduced state at any s, obtained by re-integrating from the nearest stored
/// checkpoint with a tight tolerance.
///
/// Used where the curve must be sampled at arbitrary parameters, e.g. by
/// finite-difference stencils.
#[derive(Debug, Clone)]
pub struct DenseTrajectory {
    pub spec: TrajectorySpec,
    checkpoints: Vec<ReducedState>,
    ctl: StepControl,
}

impl DenseTrajectory {
    /// Build checkpoints covering [s_min, s_max] (which must contain s₀).
    pub fn new(spec: &TrajectorySpec, s_min: f64, s_max: f64) -> Result<Self> {
        if !(s_min <= spec.s0 && spec.s0 <= s_max) {
            return invalid("checkpoint range must contain the base point");
        }
        let ctl = StepControl {
            rtol: 1e-13,
            atol: 1e-15,
            ..StepControl::default()
        };
        let fwd = integrate_reduced_with(spec, s_max, &ctl, &[])?;
        let bwd = integrate_reduced_with(spec, s_min, &ctl, &[])?;
        let mut checkpoints: Vec<ReducedState> = bwd.states.into_iter().skip(1).rev().collect();
        checkpoints.extend(fwd.states);
        Ok(Self {
            spec: spec.clone(),
            checkpoints,
            ctl,
        })
    }

    fn nearest(&self, s: f64) -> &ReducedState {
        let k = self.checkpoints.partition_point(|c| c.s < s);
        let lo = k.saturating_sub(1);
        let hi = k.min(self.checkpoints.len() - 1);
        if (self.checkpoints[lo].s - s).abs() <= (self.checkpoints[hi].s - s).abs() {
            &self.checkpoints[lo]
        } else {
            &self.checkpoints[hi]
        }
    }

    /// Reduced states at `anchor + offsets[i]`, all integrated from the
    /// checkpoint nearest to `anchor` so the samples are mutually smooth.
    pub fn states_around(&self, anchor: f64, offsets: &[f64]) -> Result<Vec<ReducedState>> {
        let base = self.nearest(anchor).clone();
        let spec = TrajectorySpec {
            phi0: base.phis.clone(),
            theta0: base.theta,
            s0: base.s,
            alphas: self
                .spec
                .alphas
                .iter()
                .zip(self.spec.lambdas())
                .map(|(a, l)| a + l * base.u)
                .collect(),
            params: self.spec.params.clone(),
        };
        offsets
            .iter()
            .map(|&o| {
                let target = anchor + o;
                let tr = integrate_reduced_with(&spec, target, &self.ctl, &[])?;
                let mut st = tr.last().clone();
                st.u += base.u;
                Ok(st)
            })
            .collect()
    }

    pub fn state_at(&self, s: f64) -> Result<ReducedState> {
        Ok(self.states_around(s, &[0.0])?.remove(0))
    }
}
