//! Explicit self-expanders (and special Lagrangians for α = 0) on the round
//! quadric Σx_j² = 1, in the coordinate y with u = u_* + y².
//!
//! ```text
//! r_j(y) = (1/a_j + y²)^{1/2}
//! φ_j(y) = ψ_j + ∫₀^y dt / ((1/a_j + t²) P(t)^{1/2})
//! θ(y)   = Σ φ_j(y) + arg(y + i P(y)^{−1/2})
//! P(t)   = (∏(1 + a_k t²) e^{αt²} − 1) / t²
//! ```
//!
//! As y → ±∞ the angles φ_j tend to ψ_j ± φ̄_j, so the expander is
//! asymptotic to a pair of Lagrangian planes. The map a ↦ φ̄ is a
//! diffeomorphism onto the open simplex Σφ̄_j < π/2 for α > 0, which
//! [`invert_angle_map`] inverts by Newton's method.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::geometry::{CurvePoint, Parameter, Quadric, SolitonCurve};
use crate::params::SolitonParams;
use crate::quad::{integrate_half_line_scaled, integrate_piecewise, symmetric_breaks, QuadOptions};
use crate::reduced_ode::{fmt, TrajectorySpec};

/// ln(∏(1 + a_k t²) e^{αt²}).
fn log_e(alpha: f64, a: &[f64], t: f64) -> f64 {
    let t2 = t * t;
    a.iter().map(|ak| (ak * t2).ln_1p()).sum::<f64>() + alpha * t2
}

/// P(t), with the limit Σa_k + α at t = 0.
pub fn eval_p(alpha: f64, a: &[f64], t: f64) -> f64 {
    if t == 0.0 {
        return a.iter().sum::<f64>() + alpha;
    }
    let x = log_e(alpha, a, t);
    x.exp_m1() / (t * t)
}

/// P(t)^{−1/2}, evaluated without overflow for large t.
fn inv_sqrt_p(alpha: f64, a: &[f64], t: f64) -> f64 {
    if t == 0.0 {
        return 1.0 / (a.iter().sum::<f64>() + alpha).sqrt();
    }
    let x = log_e(alpha, a, t);
    if x < 40.0 {
        t.abs() / x.exp_m1().sqrt()
    } else {
        let ln_p = x + (-(-x).exp()).ln_1p() - 2.0 * t.abs().ln();
        (-0.5 * ln_p).exp()
    }
}

/// E/P where E = ∏(1 + a_k t²) e^{αt²}.
fn e_over_p(alpha: f64, a: &[f64], t: f64) -> f64 {
    if t == 0.0 {
        return 1.0 / (a.iter().sum::<f64>() + alpha);
    }
    let x = log_e(alpha, a, t);
    t * t / -(-x).exp_m1()
}

/// Length scales where the integrands change character.
fn scales(alpha: f64, a: &[f64]) -> Vec<f64> {
    let mut s: Vec<f64> = a.iter().map(|x| 1.0 / x.sqrt()).collect();
    if alpha > 0.0 {
        s.push(1.0 / alpha.sqrt());
    }
    s
}

/// dφ_j/dy.
fn dphi(alpha: f64, a: &[f64], j: usize, y: f64) -> f64 {
    a[j] / (1.0 + a[j] * y * y) * inv_sqrt_p(alpha, a, y)
}

fn check_inputs(alpha: f64, a: &[f64]) -> Result<()> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return invalid(format!("expanders need α ≥ 0, got {alpha}"));
    }
    if a.is_empty() {
        return invalid("need at least one a_j");
    }
    if a.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return invalid("every a_j must be positive");
    }
    Ok(())
}

/// Asymptotic angles φ̄_j.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleVector {
    pub phibar: Vec<f64>,
}

impl AngleVector {
    pub fn sum(&self) -> f64 {
        self.phibar.iter().sum()
    }
}

/// Values of the profile at one y.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileValue {
    pub y: f64,
    pub r: Vec<f64>,
    pub phi: Vec<f64>,
    pub theta: f64,
}

/// Lagrangian planes approached as y → +∞ (L₁) and y → −∞ (L₂), each given
/// by the angles of its coordinate lines.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanePair {
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExpanderProfile {
    pub alpha: f64,
    pub a: Vec<f64>,
    pub psi: Vec<f64>,
    /// Turning value u_* of the underlying reduced solution (u = u_* + y²).
    pub u_star: f64,
    pub quad: QuadOptions,
    quadric: Quadric,
}

impl ExpanderProfile {
    pub fn new(alpha: f64, a: Vec<f64>, psi: Vec<f64>) -> Result<Self> {
        check_inputs(alpha, &a)?;
        if psi.len() != a.len() {
            return invalid("need one ψ_j per a_j");
        }
        if psi.iter().any(|p| !p.is_finite()) {
            return invalid("ψ_j must be finite");
        }
        let n = a.len();
        Ok(Self {
            alpha,
            a,
            psi,
            u_star: 0.0,
            quad: QuadOptions {
                rtol: 1e-13,
                atol: 1e-16,
                ..QuadOptions::default()
            },
            quadric: Quadric::Centred {
                lambdas: vec![1.0; n],
                c: 1.0,
            },
        })
    }

    pub fn with_u_star(mut self, u_star: f64) -> Result<Self> {
        if self.a.iter().any(|a| 1.0 / a - u_star <= 0.0) {
            return invalid("u_* must leave every α_j = 1/a_j − u_* positive");
        }
        self.u_star = u_star;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn eval_p(&self, t: f64) -> f64 {
        eval_p(self.alpha, &self.a, t)
    }

    /// First-integral constant of the underlying solution (negative).
    pub fn first_integral(&self) -> f64 {
        -self.a.iter().map(|a| 1.0 / a.sqrt()).product::<f64>() * (0.5 * self.alpha * self.u_star).exp()
    }

    /// Reduced-system data based at the turning point (y = 0, s = 0), with
    /// u measured from u_*.
    pub fn turning_point_spec(&self) -> Result<TrajectorySpec> {
        let n = self.n();
        TrajectorySpec::new(
            SolitonParams::new(vec![1.0; n], 1.0, self.alpha)?,
            self.a.iter().map(|a| 1.0 / a).collect(),
            self.psi.clone(),
            self.psi.iter().sum::<f64>() + FRAC_PI_2,
            0.0,
        )
    }

    fn increments(&self, y0: f64, y1: f64) -> Result<Vec<f64>> {
        let br = symmetric_breaks(&scales(self.alpha, &self.a));
        (0..self.n())
            .map(|j| Ok(integrate_piecewise(|t| dphi(self.alpha, &self.a, j, t), y0, y1, &br, self.quad)?.value))
            .collect()
    }

    fn value_from_phis(&self, y: f64, phi: Vec<f64>) -> ProfileValue {
        let r = self.a.iter().map(|a| (1.0 / a + y * y).sqrt()).collect();
        let theta = phi.iter().sum::<f64>() + inv_sqrt_p(self.alpha, &self.a, y).atan2(y);
        ProfileValue { y, r, phi, theta }
    }

    /// r_j(y), φ_j(y), θ(y).
    pub fn profile_eval(&self, y: f64) -> Result<ProfileValue> {
        let inc = self.increments(0.0, y)?;
        let phi = self.psi.iter().zip(inc).map(|(p, d)| p + d).collect();
        Ok(self.value_from_phis(y, phi))
    }

    /// Evaluate at many y, integrating outward from 0 between consecutive
    /// values. Output order matches `ys`.
    pub fn profile_samples(&self, ys: &[f64]) -> Result<Vec<ProfileValue>> {
        let mut order: Vec<usize> = (0..ys.len()).collect();
        order.sort_by(|&i, &k| ys[i].total_cmp(&ys[k]));
        let mut out: Vec<Option<ProfileValue>> = vec![None; ys.len()];
        let split = order.partition_point(|&i| ys[i] < 0.0);
        // Nonnegative side, ascending.
        let mut y_prev = 0.0;
        let mut phi = self.psi.clone();
        for &i in &order[split..] {
            let inc = self.increments(y_prev, ys[i])?;
            phi.iter_mut().zip(inc).for_each(|(p, d)| *p += d);
            y_prev = ys[i];
            out[i] = Some(self.value_from_phis(ys[i], phi.clone()));
        }
        // Negative side, descending.
        let mut y_prev = 0.0;
        let mut phi = self.psi.clone();
        for &i in order[..split].iter().rev() {
            let inc = self.increments(y_prev, ys[i])?;
            phi.iter_mut().zip(inc).for_each(|(p, d)| *p += d);
            y_prev = ys[i];
            out[i] = Some(self.value_from_phis(ys[i], phi.clone()));
        }
        Ok(out.into_iter().map(|v| v.expect("every sample visited")).collect())
    }

    /// φ̄_j = ∫₀^∞ dt / ((1/a_j + t²) P(t)^{1/2}).
    pub fn asymptotic_angles(&self) -> Result<AngleVector> {
        let phibar = (0..self.n())
            .map(|j| {
                let aj = self.a[j];
                Ok(integrate_half_line_scaled(
                    |t| inv_sqrt_p(self.alpha, &self.a, t) / (1.0 / aj + t * t),
                    &scales(self.alpha, &self.a),
                    self.quad,
                )?
                .value)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AngleVector { phibar })
    }

    pub fn planes(&self) -> Result<PlanePair> {
        let pb = self.asymptotic_angles()?;
        Ok(PlanePair {
            l1: self.psi.iter().zip(&pb.phibar).map(|(p, b)| p + b).collect(),
            l2: self.psi.iter().zip(&pb.phibar).map(|(p, b)| p - b).collect(),
        })
    }

    /// s(y) measured from the turning point: ds/dy = e^{αy²/2} / (|A|₀ P^{1/2})
    /// with |A|₀ = ∏ a_j^{−1/2}.
    pub fn s_of_y(&self, y: f64) -> Result<f64> {
        self.s_between(0.0, y)
    }

    /// s(y1) − s(y0).
    pub fn s_between(&self, y0: f64, y1: f64) -> Result<f64> {
        Ok(integrate_piecewise(
            |t| self.ds_dy(t),
            y0,
            y1,
            &symmetric_breaks(&scales(self.alpha, &self.a)),
            self.quad,
        )?
        .value)
    }

    /// ds/dy = e^{αy²/2} / (|A|₀ P(y)^{1/2}) with |A|₀ = ∏ a_j^{−1/2}.
    pub fn ds_dy(&self, y: f64) -> f64 {
        let a0: f64 = self.a.iter().map(|a| 1.0 / a.sqrt()).product();
        (0.5 * self.alpha * y * y).exp() * inv_sqrt_p(self.alpha, &self.a, y) / a0
    }

    fn curve_point(&self, y: f64, phi: &[f64]) -> CurvePoint {
        let ip = inv_sqrt_p(self.alpha, &self.a, y);
        let mut w = Vec::with_capacity(self.n());
        let mut dw = Vec::with_capacity(self.n());
        for j in 0..self.n() {
            let r = (1.0 / self.a[j] + y * y).sqrt();
            let e = Complex64::from_polar(1.0, phi[j]);
            let dphi = ip / (1.0 / self.a[j] + y * y);
            w.push(e * r);
            dw.push(e * Complex64::new(y / r, r * dphi));
        }
        CurvePoint {
            t: y,
            w,
            dw,
            theta: phi.iter().sum::<f64>() + ip.atan2(y),
            beta: None,
        }
    }

    /// Columns: y, r_1..r_n, phi_1..phi_n, theta.
    pub fn write_csv<W: Write>(&self, values: &[ProfileValue], mut out: W) -> std::io::Result<()> {
        let n = self.n();
        let mut header = vec!["y".to_string()];
        header.extend((1..=n).map(|j| format!("r_{j}")));
        header.extend((1..=n).map(|j| format!("phi_{j}")));
        header.push("theta".into());
        writeln!(out, "{}", header.join(","))?;
        for v in values {
            let mut row = vec![fmt(v.y)];
            row.extend(v.r.iter().map(|&x| fmt(x)));
            row.extend(v.phi.iter().map(|&x| fmt(x)));
            row.push(fmt(v.theta));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

impl SolitonCurve for ExpanderProfile {
    fn quadric(&self) -> &Quadric {
        &self.quadric
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn parameter(&self) -> Parameter {
        Parameter::Y
    }

    fn point(&self, y: f64) -> Result<CurvePoint> {
        let pv = self.profile_eval(y)?;
        Ok(self.curve_point(y, &pv.phi))
    }

    fn points_around(&self, y: f64, offsets: &[f64]) -> Result<Vec<CurvePoint>> {
        let centre = self.profile_eval(y)?;
        offsets
            .iter()
            .map(|&o| {
                let inc = self.increments(y, y + o)?;
                let phi: Vec<f64> = centre.phi.iter().zip(inc).map(|(p, d)| p + d).collect();
                Ok(self.curve_point(y + o, &phi))
            })
            .collect()
    }

    fn u_at(&self, y: f64) -> f64 {
        self.u_star + y * y
    }
}

/// Φⁿ_j(a) = ∫₀^∞ a_j dy / ((1 + a_j y²) P(y)^{1/2}), integrated in panels
/// at the scales a_j^{−1/2}, α^{−1/2} with the tail mapped to a finite
/// interval.
pub fn angle_map(alpha: f64, a: &[f64]) -> Result<AngleVector> {
    angle_map_with(alpha, a, QuadOptions::default())
}

pub fn angle_map_with(alpha: f64, a: &[f64], quad: QuadOptions) -> Result<AngleVector> {
    check_inputs(alpha, a)?;
    let phibar = (0..a.len())
        .map(|j| {
            Ok(integrate_half_line_scaled(|y| dphi(alpha, a, j, y), &scales(alpha, a), quad)?
            .value)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AngleVector { phibar })
}

/// ∂Φⁿ_j/∂a_k by differentiating under the integral sign.
pub fn angle_map_jacobian(alpha: f64, a: &[f64]) -> Result<DMatrix<f64>> {
    angle_map_jacobian_with(alpha, a, QuadOptions::default())
}

pub fn angle_map_jacobian_with(alpha: f64, a: &[f64], quad: QuadOptions) -> Result<DMatrix<f64>> {
    check_inputs(alpha, a)?;
    let n = a.len();
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            let v = integrate_half_line_scaled(
                |y| {
                    let y2 = y * y;
                    let ip = inv_sqrt_p(alpha, a, y);
                    let bj = 1.0 + a[j] * y2;
                    let bk = 1.0 + a[k] * y2;
                    let mut d = -0.5 * a[j] * e_over_p(alpha, a, y) * ip / (bj * bk);
                    if j == k {
                        d += ip / (bj * bj);
                    }
                    d
                },
                &scales(alpha, a),
                QuadOptions {
                    atol: quad.atol.max(1e-15),
                    ..quad
                },
            )?;
            jac[(j, k)] = v.value;
        }
    }
    Ok(jac)
}

/// Result of inverting the angle map.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleInversion {
    pub a: Vec<f64>,
    pub achieved: AngleVector,
    pub residual: f64,
    pub iterations: usize,
}

/// Options for [`invert_angle_map`].
#[derive(Debug, Clone, Copy)]
pub struct InversionOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub quad: QuadOptions,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 50,
            quad: QuadOptions {
                rtol: 1e-13,
                atol: 1e-16,
                ..QuadOptions::default()
            },
        }
    }
}

/// Check a target against the image of the angle map.
pub fn validate_target(alpha: f64, target: &[f64]) -> Result<()> {
    if target.is_empty() {
        return Err(Error::InvalidTarget("empty target".into()));
    }
    if let Some(p) = target.iter().find(|&&p| !(p > 0.0 && p < FRAC_PI_2)) {
        return Err(Error::InvalidTarget(format!("every angle must lie in (0, π/2); got {p}")));
    }
    let sum: f64 = target.iter().sum();
    if alpha > 0.0 && sum >= FRAC_PI_2 {
        return Err(Error::InvalidTarget(format!(
            "for α > 0 the asymptotic angles must sum to less than π/2; got {sum}"
        )));
    }
    if alpha == 0.0 && (sum - FRAC_PI_2).abs() > 1e-9 {
        return Err(Error::InvalidTarget(format!(
            "for α = 0 the asymptotic angles must sum to π/2; got {sum}"
        )));
    }
    if alpha < 0.0 {
        return Err(Error::InvalidTarget("the angle map is defined for α ≥ 0".into()));
    }
    Ok(())
}

/// Solve Φⁿ(a) = target for a.
///
/// For α > 0 the solution is unique. For α = 0 the map is constant along
/// rays, and the representative with Σa_j = 1 is returned.
pub fn invert_angle_map(alpha: f64, target: &[f64], opts: InversionOptions) -> Result<AngleInversion> {
    validate_target(alpha, target)?;
    let n = target.len();
    let special = alpha == 0.0;

    let residual_vec = |ell: &[f64]| -> Result<(Vec<f64>, AngleVector)> {
        let a: Vec<f64> = ell.iter().map(|l| l.exp()).collect();
        let phi = angle_map_with(alpha, &a, opts.quad)?;
        let mut r: Vec<f64> = phi.phibar.iter().zip(target).map(|(p, t)| p - t).collect();
        if special {
            r[n - 1] = a.iter().sum::<f64>() - 1.0;
        }
        Ok((r, phi))
    };
    let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    // Symmetric starting point: a_j all equal, matching the target sum.
    let mut ell = if special {
        vec![(1.0 / n as f64).ln(); n]
    } else {
        let goal: f64 = target.iter().sum();
        let sym = |l: f64| -> Result<f64> {
            let a = vec![l.exp(); n];
            Ok(angle_map_with(alpha, &a, opts.quad)?.sum() - goal)
        };
        let (mut lo, mut hi) = (-40.0f64, 40.0f64);
        while sym(hi)? < 0.0 && hi < 400.0 {
            lo = hi;
            hi += 40.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sym(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 * (1.0 + mid.abs()) {
                break;
            }
        }
        vec![0.5 * (lo + hi); n]
    };

    let (mut r, mut phi) = residual_vec(&ell)?;
    let mut iterations = 0;
    while norm(&r) >= opts.tol {
        if iterations >= opts.max_iterations {
            return Err(Error::NonConvergence {
                iterations,
                residual: norm(&r),
                last: ell.iter().map(|l| l.exp()).collect(),
            });
        }
        iterations += 1;
        let a: Vec<f64> = ell.iter().map(|l| l.exp()).collect();
        let jac_a = angle_map_jacobian_with(alpha, &a, opts.quad)?;
        // Chain rule to log coordinates.
        let mut jac = DMatrix::from_fn(n, n, |j, k| jac_a[(j, k)] * a[k]);
        if special {
            for k in 0..n {
                jac[(n - 1, k)] = a[k];
            }
        }
        let step = jac
            .clone()
            .lu()
            .solve(&DVector::from_fn(n, |i, _| -r[i]))
            .or_else(|| jac.clone().svd(true, true).solve(&DVector::from_fn(n, |i, _| -r[i]), 1e-14).ok())
            .ok_or_else(|| Error::NonConvergence {
                iterations,
                residual: norm(&r),
                last: a.clone(),
            })?;
        let mut step: Vec<f64> = step.iter().copied().collect();
        let big = norm(&step);
        if big > 3.0 {
            step.iter_mut().for_each(|s| *s *= 3.0 / big);
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = ell.iter().zip(&step).map(|(l, s)| l + lambda * s).collect();
            let (rt, pt) = residual_vec(&trial)?;
            if norm(&rt) < norm(&r) {
                ell = trial;
                r = rt;
                phi = pt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NonConvergence {
                iterations,
                residual: norm(&r),
                last: a,
            });
        }
    }
    let residual = phi.phibar.iter().zip(target).map(|(p, t)| (p - t).abs()).fold(0.0, f64::max);
    Ok(AngleInversion {
        a: ell.iter().map(|l| l.exp()).collect(),
        achieved: phi,
        residual,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_4, PI};

    #[test]
    fn p_examples() {
        assert_relative_eq!(eval_p(0.0, &[1.0, 1.0], 1.0), 3.0, max_relative = 1e-15);
        assert_eq!(eval_p(0.0, &[1.0, 1.0], 0.0), 2.0);
        assert_relative_eq!(eval_p(0.0, &[1.0, 1.0], 1e-9), 2.0, max_relative = 1e-8);
        assert_relative_eq!(eval_p(0.5, &[1.0, 2.0], 1e-7), 3.5, max_relative = 1e-9);
        let big = eval_p(1.0, &[1.0, 1.0], 5.0);
        assert_relative_eq!(big, ((1.0f64 + 25.0).powi(2) * 25f64.exp() - 1.0) / 25.0, max_relative = 1e-13);
        assert!(inv_sqrt_p(1.0, &[1.0, 1.0], 20.0) > 0.0);
        assert_relative_eq!(inv_sqrt_p(1.0, &[1.0, 1.0], 5.0), 1.0 / big.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn turning_point_values() {
        let p = ExpanderProfile::new(0.0, vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        let v = p.profile_eval(0.0).unwrap();
        assert_eq!(v.r, vec![1.0, 1.0]);
        assert_eq!(v.phi, vec![0.0, 0.0]);
        assert_relative_eq!(v.theta, FRAC_PI_2);
    }

    #[test]
    fn special_lagrangian_angle_is_constant() {
        let p = ExpanderProfile::new(0.0, vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        for v in p.profile_samples(&[-7.0, -1.0, 0.3, 2.0, 30.0]).unwrap() {
            assert!((v.theta - FRAC_PI_2).abs() < 1e-12, "θ({}) = {}", v.y, v.theta);
        }
    }

    #[test]
    fn symmetric_closed_form() {
        // φ_j(y) = arctan(y / (2 + y²)^{1/2}) for a = (1, 1), α = 0.
        let p = ExpanderProfile::new(0.0, vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        for y in [0.5, 3.0, -2.0] {
            let v = p.profile_eval(y).unwrap();
            assert_relative_eq!(v.phi[0], (y / (2.0 + y * y).sqrt()).atan(), epsilon = 1e-13);
        }
        let pb = p.asymptotic_angles().unwrap();
        assert_relative_eq!(pb.phibar[0], FRAC_PI_4, epsilon = 1e-12);
        assert_relative_eq!(pb.phibar[1], FRAC_PI_4, epsilon = 1e-12);
    }

    #[test]
    fn one_dimensional_angle_is_right_angle() {
        for a in [0.01, 1.0, 250.0] {
            let p = ExpanderProfile::new(0.0, vec![a], vec![0.0]).unwrap();
            assert_relative_eq!(p.asymptotic_angles().unwrap().phibar[0], FRAC_PI_2, epsilon = 1e-12);
        }
    }

    #[test]
    fn positive_alpha_narrows_the_angle() {
        let p = ExpanderProfile::new(1.0, vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        let pb = p.asymptotic_angles().unwrap();
        assert!((pb.phibar[0] - pb.phibar[1]).abs() < 1e-14);
        assert!(pb.sum() < FRAC_PI_2);
    }

    #[test]
    fn two_quadrature_routes_agree() {
        let a = vec![0.7, 2.5, 1.1];
        let p = ExpanderProfile::new(0.8, a.clone(), vec![0.0; 3]).unwrap();
        let x = p.asymptotic_angles().unwrap();
        let y = angle_map(0.8, &a).unwrap();
        for (u, v) in x.phibar.iter().zip(&y.phibar) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let a = [0.6, 1.7];
        let jac = angle_map_jacobian(0.9, &a).unwrap();
        let q = QuadOptions {
            rtol: 1e-14,
            atol: 1e-17,
            ..QuadOptions::default()
        };
        for k in 0..2 {
            let h = 1e-5 * a[k];
            let mut ap = a;
            let mut am = a;
            ap[k] += h;
            am[k] -= h;
            let fp = angle_map_with(0.9, &ap, q).unwrap();
            let fm = angle_map_with(0.9, &am, q).unwrap();
            for j in 0..2 {
                let fd = (fp.phibar[j] - fm.phibar[j]) / (2.0 * h);
                assert!((fd - jac[(j, k)]).abs() < 1e-7, "({j},{k}): {fd} vs {}", jac[(j, k)]);
            }
        }
    }

    #[test]
    fn inversion_round_trip_and_symmetry() {
        let target = angle_map(1.0, &[1.0, 1.0]).unwrap();
        let inv = invert_angle_map(1.0, &target.phibar, InversionOptions::default()).unwrap();
        assert!((inv.a[0] - 1.0).abs() < 1e-8 && (inv.a[1] - 1.0).abs() < 1e-8);
        let inv = invert_angle_map(1.0, &[0.3, 0.3, 0.3], InversionOptions::default()).unwrap();
        assert!((inv.a[0] - inv.a[1]).abs() < 1e-9 * inv.a[0] && (inv.a[1] - inv.a[2]).abs() < 1e-9 * inv.a[0]);
    }

    #[test]
    fn special_lagrangian_inverse_is_normalized() {
        let inv = invert_angle_map(0.0, &[FRAC_PI_4, FRAC_PI_4], InversionOptions::default()).unwrap();
        assert!((inv.a[0] - 0.5).abs() < 1e-10 && (inv.a[1] - 0.5).abs() < 1e-10);
        let inv = invert_angle_map(0.0, &[0.3, 0.5, PI / 2.0 - 0.8], InversionOptions::default()).unwrap();
        assert!((inv.a.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(inv.residual < 1e-10);
    }

    #[test]
    fn invalid_targets_are_named() {
        assert!(matches!(invert_angle_map(1.0, &[0.8, 0.8], InversionOptions::default()), Err(Error::InvalidTarget(_))));
        assert!(matches!(invert_angle_map(1.0, &[-0.1, 0.3], InversionOptions::default()), Err(Error::InvalidTarget(_))));
        assert!(matches!(invert_angle_map(0.0, &[0.3, 0.3], InversionOptions::default()), Err(Error::InvalidTarget(_))));
    }

    #[test]
    fn expander_points_pass_geometric_checks() {
        use crate::geometry::{sample_quadric, verify_point};
        for alpha in [0.0, 1.0] {
            let p = ExpanderProfile::new(alpha, vec![1.0, 2.0], vec![0.1, -0.3]).unwrap();
            let xs = sample_quadric(p.quadric(), 6, 1.0, 7).unwrap();
            for (i, x) in xs.iter().enumerate() {
                let y = -2.0 + 0.8 * i as f64;
                let r = verify_point(&p, x, y).unwrap();
                assert!(r.lagrangian < 1e-10, "{r:?}");
                assert!(r.angle < 1e-9, "{r:?}");
                assert!(r.metric_block < 1e-10, "{r:?}");
                if alpha == 0.0 {
                    assert!(r.soliton < 1e-4, "{r:?}");
                } else {
                    assert!(r.soliton < 1e-3, "{r:?}");
                }
            }
        }
    }
}
