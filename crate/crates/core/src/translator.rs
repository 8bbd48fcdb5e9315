//! Lagrangian translating solitons over a paraboloid.
//!
//! An (n−1)-dimensional solution (w, θ) of the reduced system together with
//! β solving β' = e^{iθ} conj(w₁⋯w_{n−1}) gives
//! L = {(x₁w₁, …, x_{n−1}w_{n−1}, −½Σλ_jx_j² + β)}, translating with
//! velocity T = (0, …, 0, α). For α ≠ 0, β = ½u − (i/α)θ + K in closed form;
//! for α = 0 the imaginary part is the arclength-like quadrature −A·s.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::expander::{ExpanderProfile, PlanePair};
use crate::geometry::{
    immerse, maslov_fit, maslov_values, verify_point, CurvePoint, MaslovFit, Parameter, PointResiduals, Quadric,
    QuadricPoint, SolitonCurve,
};
use crate::periodic::{CaseTag, HamiltonianStationary, PeriodicCurve, PeriodicSpec};
use crate::reduced_ode::ReducedState;

/// The (n−1)-dimensional curve underneath a translator.
#[derive(Debug, Clone)]
pub enum TranslatorBase {
    /// Expander-type profile in the coordinate y (u = u_* + y²).
    Expander(ExpanderProfile),
    /// u ≡ 0, explicit in s.
    Stationary(HamiltonianStationary),
    /// Oscillating u, integrated in s; `angle_drift` = Σγ_j per period.
    Periodic { curve: PeriodicCurve, angle_drift: f64 },
}

/// Base data at one parameter value.
struct BaseSample {
    cp: CurvePoint,
    u: f64,
    /// ODE parameter s (only filled when α = 0).
    s: f64,
}

#[derive(Debug, Clone)]
pub struct TranslatorProfile {
    pub alpha: f64,
    pub base: TranslatorBase,
    pub k: Complex64,
    /// First-integral constant of the base.
    pub a: f64,
    quadric: Quadric,
}

impl TranslatorProfile {
    /// Over an expander-type base; K defaults to −u_*/2.
    pub fn from_expander(base: ExpanderProfile, k: Option<Complex64>) -> Result<Self> {
        let k = k.unwrap_or(Complex64::new(-0.5 * base.u_star, 0.0));
        Ok(Self {
            alpha: base.alpha,
            a: base.first_integral(),
            quadric: Quadric::Paraboloid {
                lambdas: vec![1.0; base.n()],
            },
            base: TranslatorBase::Expander(base),
            k,
        })
    }

    /// Over a periodic-type base with initial angles ψ. Case (ii) bases are
    /// integrated over [s_min, s_max]; K defaults to 0.
    pub fn from_periodic(spec: &PeriodicSpec, psi: &[f64], s_min: f64, s_max: f64, k: Option<Complex64>) -> Result<Self> {
        let quadric = Quadric::Paraboloid {
            lambdas: spec.lambdas().to_vec(),
        };
        let base = match spec.case_tag() {
            CaseTag::I => TranslatorBase::Stationary(spec.hamiltonian_stationary(psi)?),
            CaseTag::II => {
                let orbit = spec.orbit()?;
                TranslatorBase::Periodic {
                    curve: PeriodicCurve::new(spec, psi, s_min, s_max)?,
                    angle_drift: orbit.gamma.iter().sum(),
                }
            }
        };
        Ok(Self {
            alpha: spec.alpha(),
            a: spec.a,
            quadric,
            base,
            k: k.unwrap_or_default(),
        })
    }

    /// Ambient dimension n.
    pub fn n(&self) -> usize {
        self.quadric.lambdas().len() + 1
    }

    /// The same surface shifted by t·T: β ↦ β + tα.
    pub fn shifted(&self, t: f64) -> Self {
        let mut out = self.clone();
        out.k += self.alpha * t;
        out
    }

    fn base_samples(&self, t: f64, offsets: &[f64]) -> Result<Vec<BaseSample>> {
        let need_s = self.alpha == 0.0;
        match &self.base {
            TranslatorBase::Expander(p) => {
                let cps = p.points_around(t, offsets)?;
                let s0 = if need_s { p.s_of_y(t)? } else { 0.0 };
                cps.into_iter()
                    .zip(offsets)
                    .map(|(cp, o)| {
                        let s = if need_s { s0 + p.s_between(t, t + o)? } else { 0.0 };
                        Ok(BaseSample {
                            u: p.u_star + cp.t * cp.t,
                            s,
                            cp,
                        })
                    })
                    .collect()
            }
            TranslatorBase::Stationary(h) => offsets
                .iter()
                .map(|o| {
                    Ok(BaseSample {
                        cp: h.point(t + o)?,
                        u: 0.0,
                        s: t + o,
                    })
                })
                .collect(),
            TranslatorBase::Periodic { curve, .. } => {
                let states: Vec<ReducedState> = curve.dense.states_around(t, offsets)?;
                states
                    .iter()
                    .map(|st| {
                        Ok(BaseSample {
                            cp: curve.to_point(st)?,
                            u: st.u,
                            s: st.s,
                        })
                    })
                    .collect()
            }
        }
    }

    /// ds/dt for the base parameter t.
    fn ds_dt(&self, t: f64) -> f64 {
        match &self.base {
            TranslatorBase::Expander(p) => p.ds_dy(t),
            _ => 1.0,
        }
    }

    fn beta_of(&self, b: &BaseSample) -> Complex64 {
        if self.alpha != 0.0 {
            Complex64::new(0.5 * b.u, -b.cp.theta / self.alpha) + self.k
        } else {
            Complex64::new(0.5 * b.u, -self.a * b.s) + self.k
        }
    }

    /// e^{iθ} conj(∏w) · ds/dt.
    fn dbeta_of(&self, b: &BaseSample) -> Complex64 {
        let prod: Complex64 = b.cp.w.iter().product();
        Complex64::from_polar(1.0, b.cp.theta) * prod.conj() * self.ds_dt(b.cp.t)
    }

    fn complete(&self, b: BaseSample) -> CurvePoint {
        let beta = (self.beta_of(&b), self.dbeta_of(&b));
        CurvePoint {
            beta: Some(beta),
            ..b.cp
        }
    }

    /// β at the base parameter t.
    pub fn beta_eval(&self, t: f64) -> Result<Complex64> {
        let b = self.base_samples(t, &[0.0])?.remove(0);
        Ok(self.beta_of(&b))
    }

    /// Im dβ/ds = −A e^{−αu/2} at t.
    pub fn im_dbeta_ds(&self, t: f64) -> Result<f64> {
        let b = self.base_samples(t, &[0.0])?.remove(0);
        Ok(-self.a * (-0.5 * self.alpha * b.u).exp())
    }

    /// Whether θ is unbounded along the curve.
    pub fn infinite_oscillation(&self) -> bool {
        match &self.base {
            TranslatorBase::Expander(_) => false,
            TranslatorBase::Stationary(h) => self.alpha * h.spec.a != 0.0,
            TranslatorBase::Periodic { angle_drift, .. } => angle_drift.abs() > 1e-8,
        }
    }

    /// L₁ (y → +∞) and L₂ (y → −∞) for an expander base.
    pub fn planes(&self) -> Result<PlanePair> {
        match &self.base {
            TranslatorBase::Expander(p) => p.planes(),
            _ => invalid("asymptotic planes exist only over an expander-type base"),
        }
    }

    /// Spread of the Lagrangian angle over an expander base: θ ranges over
    /// (Σφ̄_j + Σψ_j, π − Σφ̄_j + Σψ_j), an interval of length π − 2Σφ̄_j.
    pub fn angle_oscillation(&self) -> Result<f64> {
        match &self.base {
            TranslatorBase::Expander(p) => Ok(std::f64::consts::PI - 2.0 * p.asymptotic_angles()?.sum()),
            _ => invalid("angle oscillation is bounded only over an expander-type base"),
        }
    }
}

/// The explicit translator with ψ = 0, K = −u_*/2 (u_* = 0 here).
pub fn default_translator(alpha: f64, a: Vec<f64>) -> Result<TranslatorProfile> {
    if alpha < 0.0 {
        return invalid("the explicit translator needs α ≥ 0");
    }
    let n1 = a.len();
    TranslatorProfile::from_expander(ExpanderProfile::new(alpha, a, vec![0.0; n1])?, None)
}

impl SolitonCurve for TranslatorProfile {
    fn quadric(&self) -> &Quadric {
        &self.quadric
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn parameter(&self) -> Parameter {
        match self.base {
            TranslatorBase::Expander(_) => Parameter::Y,
            _ => Parameter::S,
        }
    }

    fn point(&self, t: f64) -> Result<CurvePoint> {
        let b = self.base_samples(t, &[0.0])?.remove(0);
        Ok(self.complete(b))
    }

    fn points_around(&self, t: f64, offsets: &[f64]) -> Result<Vec<CurvePoint>> {
        Ok(self
            .base_samples(t, offsets)?
            .into_iter()
            .map(|b| self.complete(b))
            .collect())
    }

    fn u_at(&self, t: f64) -> f64 {
        match &self.base {
            TranslatorBase::Expander(p) => p.u_at(t),
            _ => 0.0,
        }
    }

    fn translation(&self) -> Option<Vec<Complex64>> {
        let mut v = vec![Complex64::new(0.0, 0.0); self.n()];
        v[self.n() - 1] = Complex64::new(self.alpha, 0.0);
        Some(v)
    }
}

/// The image of a translator under z_n ↦ −z_n: again a translator, with
/// λ ↦ −λ, α ↦ −α and θ ↦ θ + π.
#[derive(Debug, Clone)]
pub struct MirroredTranslator {
    pub inner: TranslatorProfile,
    quadric: Quadric,
}

impl MirroredTranslator {
    pub fn new(inner: TranslatorProfile) -> Self {
        let quadric = Quadric::Paraboloid {
            lambdas: inner.quadric.lambdas().iter().map(|l| -l).collect(),
        };
        Self { inner, quadric }
    }

    fn mirror(cp: CurvePoint) -> CurvePoint {
        CurvePoint {
            theta: cp.theta + std::f64::consts::PI,
            beta: cp.beta.map(|(b, db)| (-b, -db)),
            ..cp
        }
    }
}

impl SolitonCurve for MirroredTranslator {
    fn quadric(&self) -> &Quadric {
        &self.quadric
    }

    fn alpha(&self) -> f64 {
        -self.inner.alpha
    }

    fn parameter(&self) -> Parameter {
        self.inner.parameter()
    }

    fn point(&self, t: f64) -> Result<CurvePoint> {
        Ok(Self::mirror(self.inner.point(t)?))
    }

    fn points_around(&self, t: f64, offsets: &[f64]) -> Result<Vec<CurvePoint>> {
        Ok(self.inner.points_around(t, offsets)?.into_iter().map(Self::mirror).collect())
    }

    fn u_at(&self, t: f64) -> f64 {
        self.inner.u_at(t)
    }

    fn translation(&self) -> Option<Vec<Complex64>> {
        let mut v = self.inner.translation()?;
        v.iter_mut().for_each(|z| *z = -*z);
        Some(v)
    }
}

/// Residual summary over a set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslatorReport {
    pub points: Vec<PointResiduals>,
    pub max_lagrangian: f64,
    pub max_angle: f64,
    pub max_soliton: f64,
    /// Fit of θ + ⟨JT, F⟩ and its expected value α·Im K.
    pub maslov: MaslovFit,
    pub expected_c: f64,
    /// Im dβ/dt kept one strict sign over the samples.
    pub injective: bool,
    pub infinite_oscillation: bool,
}

impl TranslatorReport {
    /// |c_fit − α Im K| up to multiples of 2π.
    pub fn c_error(&self) -> f64 {
        crate::reduced_ode::angle_diff(self.maslov.c, self.expected_c).abs()
    }
}

/// Verify the translator equation H = T^⊥, the Lagrangian condition and the
/// angle identity θ + ⟨JT, F⟩ = α Im K at every sample.
pub fn translator_soliton_residual(
    profile: &TranslatorProfile,
    samples: &[(QuadricPoint, f64)],
) -> Result<TranslatorReport> {
    if profile.alpha == 0.0 {
        return invalid("the translator check needs α ≠ 0");
    }
    if samples.is_empty() {
        return invalid("no samples");
    }
    let points = samples
        .iter()
        .map(|(x, t)| verify_point(profile, x, *t))
        .collect::<Result<Vec<_>>>()?;
    let maslov = maslov_fit(&maslov_values(profile, samples)?);
    let signs = samples
        .iter()
        .map(|(_, t)| {
            let cp = profile.point(*t)?;
            Ok(cp.beta.map(|b| b.1.im).unwrap_or(0.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    let injective = signs.iter().all(|v| *v > 0.0) || signs.iter().all(|v| *v < 0.0);
    let fold = |f: fn(&PointResiduals) -> f64| points.iter().map(f).fold(0.0, f64::max);
    Ok(TranslatorReport {
        max_lagrangian: fold(|p| p.lagrangian),
        max_angle: fold(|p| p.angle),
        max_soliton: fold(|p| p.soliton),
        points,
        maslov,
        expected_c: profile.alpha * profile.k.im,
        injective,
        infinite_oscillation: profile.infinite_oscillation(),
    })
}

/// Distance from ι(x, y) to L₁ (y > 0) or L₂ (y < 0), divided by |y|.
pub fn plane_distance_ratio(profile: &TranslatorProfile, x: &QuadricPoint, y: f64) -> Result<f64> {
    if y == 0.0 {
        return Err(Error::InvalidParameter("y must be nonzero".into()));
    }
    let planes = profile.planes()?;
    let angles = if y > 0.0 { &planes.l1 } else { &planes.l2 };
    let z = immerse(profile, x, y)?.z;
    let n = z.len();
    let mut d2 = z[n - 1].im * z[n - 1].im;
    for (zj, ang) in z[..n - 1].iter().zip(angles) {
        let v = (zj * Complex64::from_polar(1.0, -ang)).im;
        d2 += v * v;
    }
    Ok(d2.sqrt() / y.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample_quadric;
    use crate::params::SolitonParams;
    use std::f64::consts::PI;

    #[test]
    fn anchor_value_at_origin() {
        for alpha in [0.5, 1.0, 3.0] {
            let p = default_translator(alpha, vec![1.0, 2.0]).unwrap();
            let x = QuadricPoint { x: vec![0.0, 0.0] };
            let z = immerse(&p, &x, 0.0).unwrap().z;
            assert!(z[0].norm() < 1e-15 && z[1].norm() < 1e-15);
            assert!((z[2] - Complex64::new(0.0, -PI / (2.0 * alpha))).norm() < 1e-10);
        }
    }

    #[test]
    fn closed_form_derivative_matches_ode() {
        let p = default_translator(1.0, vec![0.7, 1.5]).unwrap();
        for y in [-2.0, -0.3, 0.4, 1.7] {
            let h = 1e-4;
            let fd = (p.beta_eval(y + h).unwrap() - p.beta_eval(y - h).unwrap()) / (2.0 * h);
            let exact = p.point(y).unwrap().beta.unwrap().1;
            assert!((fd - exact).norm() < 1e-7 * exact.norm().max(1.0), "{fd} vs {exact}");
        }
    }

    #[test]
    fn imaginary_part_is_monotone() {
        let p = default_translator(2.0, vec![1.0]).unwrap();
        let ys: Vec<f64> = (-20..=20).map(|k| k as f64 * 0.25).collect();
        let vals: Vec<f64> = ys.iter().map(|&y| p.beta_eval(y).unwrap().im).collect();
        // A < 0 for this base, so Im β increases with s and y.
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
        assert!(p.im_dbeta_ds(0.3).unwrap() > 0.0);
    }

    #[test]
    fn special_lagrangian_branch_matches_quadrature() {
        let p = default_translator(0.0, vec![1.0, 3.0]).unwrap();
        let y = 1.3;
        let b = p.beta_eval(y).unwrap();
        let direct = crate::quad::integrate(
            |t| 1.0 / crate::expander::eval_p(0.0, &[1.0, 3.0], t).sqrt(),
            0.0,
            y,
            crate::quad::QuadOptions::default(),
        )
        .unwrap()
        .value;
        assert!((b.re - 0.5 * y * y).abs() < 1e-14);
        assert!((b.im - direct).abs() < 1e-10);
    }

    #[test]
    fn residuals_on_explicit_translator() {
        let p = default_translator(1.0, vec![1.0, 2.0]).unwrap();
        let xs = sample_quadric(p.quadric(), 6, 1.0, 7).unwrap();
        let samples: Vec<(QuadricPoint, f64)> = xs
            .into_iter()
            .zip([-1.5, -0.5, 0.1, 0.6, 1.2, 2.0])
            .collect();
        let r = translator_soliton_residual(&p, &samples).unwrap();
        assert!(r.max_lagrangian < 1e-10);
        assert!(r.max_angle < 1e-9);
        assert!(r.max_soliton < 1e-3, "{}", r.max_soliton);
        assert!(r.maslov.max_deviation < 1e-8);
        assert!(r.c_error() < 1e-8);
        assert!(r.injective);
        assert!(!r.infinite_oscillation);
    }

    #[test]
    fn mirrored_translator_is_a_translator() {
        let p = default_translator(1.0, vec![1.5]).unwrap();
        let m = MirroredTranslator::new(p.clone());
        let x = QuadricPoint { x: vec![0.8] };
        for y in [-1.0, 0.5] {
            let r = verify_point(&m, &x, y).unwrap();
            assert!(r.lagrangian < 1e-10 && r.angle < 1e-9 && r.soliton < 1e-3);
            let zp = immerse(&p, &x, y).unwrap().z;
            let zm = immerse(&m, &x, y).unwrap().z;
            assert!((zp[1] + zm[1]).norm() < 1e-14);
        }
    }

    #[test]
    fn periodic_base_flags() {
        let params = SolitonParams::new(vec![1.0, -1.0], 1.0, 0.5).unwrap();
        let spec = PeriodicSpec::new(params, vec![1.0, 1.0], 0.6).unwrap();
        let p = TranslatorProfile::from_periodic(&spec, &[0.0, 0.0], -5.0, 5.0, None).unwrap();
        let xs = sample_quadric(p.quadric(), 4, 1.0, 3).unwrap();
        let samples: Vec<(QuadricPoint, f64)> = xs.into_iter().zip([-3.0, -1.0, 0.5, 2.5]).collect();
        let r = translator_soliton_residual(&p, &samples).unwrap();
        assert!(r.injective);
        assert!(r.max_soliton < 1e-3, "{}", r.max_soliton);
        assert!(r.c_error() < 1e-8);
        let TranslatorBase::Periodic { angle_drift, .. } = p.base else {
            panic!("expected an oscillating base")
        };
        assert_eq!(r.infinite_oscillation, angle_drift.abs() > 1e-8);
    }

    #[test]
    fn distance_to_planes_decays() {
        let p = default_translator(1.0, vec![1.0, 1.0]).unwrap();
        let x = QuadricPoint { x: vec![0.5, -0.7] };
        let near = plane_distance_ratio(&p, &x, 4.0).unwrap();
        let far = plane_distance_ratio(&p, &x, 40.0).unwrap();
        assert!(far < near && far < 0.05, "{near} {far}");
        let near_neg = plane_distance_ratio(&p, &x, -4.0).unwrap();
        let far_neg = plane_distance_ratio(&p, &x, -400.0).unwrap();
        assert!(far_neg < near_neg && far_neg < 0.01, "{near_neg} {far_neg}");
    }

    #[test]
    fn shift_moves_along_translation() {
        let p = default_translator(1.5, vec![2.0]).unwrap();
        let q = p.shifted(0.7);
        let x = QuadricPoint { x: vec![0.3] };
        let zp = immerse(&p, &x, 0.9).unwrap().z;
        let zq = immerse(&q, &x, 0.9).unwrap().z;
        assert_eq!(zp[0], zq[0]);
        assert!((zq[1] - zp[1] - Complex64::new(1.5 * 0.7, 0.0)).norm() < 1e-14);
    }
}
