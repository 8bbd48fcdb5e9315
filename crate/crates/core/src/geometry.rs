//! Ambient points, tangent frames and verification residuals.
//!
//! A soliton is sampled as ι(x, t) = (x₁w₁(t), …, xₙwₙ(t)) for x on a centred
//! quadric, or (x₁w₁, …, x_{n−1}w_{n−1}, −½Σλ_jx_j² + β(t)) for x ∈ ℝ^{n−1}
//! on the translator paraboloid. The curve parameter t is either the ODE
//! parameter s or the expander coordinate y; every check below is
//! parametrization independent.
//!
//! Frames come from exact curve derivatives. The mean curvature oracle does
//! not: it differentiates the immersion numerically in a local chart and
//! takes the metric trace of the normal part of the Hessian.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::reduced_ode::angle_diff;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Real inner product ⟨a, b⟩ = Re Σ conj(a_k) b_k on ℂⁿ = ℝ²ⁿ.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

pub fn cnorm(a: &[Complex64]) -> f64 {
    inner(a, a).sqrt()
}

/// Multiplication by i (the complex structure J).
pub fn j_times(a: &[Complex64]) -> Vec<Complex64> {
    a.iter().map(|z| I * z).collect()
}

/// The quadric carrying the real directions of the construction.
#[derive(Debug, Clone, PartialEq)]
pub enum Quadric {
    /// Σ λ_j x_j² = C in ℝⁿ.
    Centred { lambdas: Vec<f64>, c: f64 },
    /// Σ_{j<n} λ_j x_j² + 2x_n = 0, parametrized by the first n−1 coordinates.
    Paraboloid { lambdas: Vec<f64> },
}

impl Quadric {
    /// Ambient complex dimension n.
    pub fn ambient_dim(&self) -> usize {
        match self {
            Quadric::Centred { lambdas, .. } => lambdas.len(),
            Quadric::Paraboloid { lambdas } => lambdas.len() + 1,
        }
    }

    /// Number of free real coordinates stored in a [`QuadricPoint`].
    pub fn coord_dim(&self) -> usize {
        match self {
            Quadric::Centred { lambdas, .. } => lambdas.len(),
            Quadric::Paraboloid { lambdas } => lambdas.len(),
        }
    }

    pub fn lambdas(&self) -> &[f64] {
        match self {
            Quadric::Centred { lambdas, .. } | Quadric::Paraboloid { lambdas } => lambdas,
        }
    }
}

/// A point of the quadric: all n coordinates (centred) or the n−1 free ones
/// (paraboloid).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadricPoint {
    pub x: Vec<f64>,
}

impl QuadricPoint {
    pub fn new(quadric: &Quadric, x: Vec<f64>) -> Result<Self> {
        if x.len() != quadric.coord_dim() {
            return invalid(format!("expected {} quadric coordinates", quadric.coord_dim()));
        }
        if let Quadric::Centred { lambdas, c } = quadric {
            let q: f64 = lambdas.iter().zip(&x).map(|(l, v)| l * v * v).sum();
            let scale: f64 = lambdas.iter().zip(&x).map(|(l, v)| (l * v * v).abs()).sum::<f64>().max(1.0);
            if (q - c).abs() > 1e-12 * scale {
                return invalid(format!("point is off the quadric by {:e}", q - c));
            }
        }
        Ok(Self { x })
    }

    /// Project radially onto a centred quadric (only valid when the
    /// quadratic form has the sign of C at x).
    pub fn project_centred(lambdas: &[f64], c: f64, x: &[f64]) -> Result<Self> {
        let q: f64 = lambdas.iter().zip(x).map(|(l, v)| l * v * v).sum();
        if !(q * c > 0.0) {
            return invalid("cannot project radially onto the quadric from this point");
        }
        let k = (c / q).sqrt();
        Ok(Self {
            x: x.iter().map(|v| v * k).collect(),
        })
    }
}

/// Curve data at one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub t: f64,
    pub w: Vec<Complex64>,
    pub dw: Vec<Complex64>,
    pub theta: f64,
    /// (β, dβ/dt) for translator curves.
    pub beta: Option<(Complex64, Complex64)>,
}

/// Which parameter a curve is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameter {
    /// The ODE parameter s.
    S,
    /// The expander coordinate y (u = u_* + y²).
    Y,
}

impl Parameter {
    pub fn label(self) -> &'static str {
        match self {
            Parameter::S => "s",
            Parameter::Y => "y",
        }
    }
}

/// A curve w(t) (and β(t) for translators) that generates a soliton.
pub trait SolitonCurve {
    fn quadric(&self) -> &Quadric;

    /// The soliton constant α.
    fn alpha(&self) -> f64;

    fn parameter(&self) -> Parameter;

    fn point(&self, t: f64) -> Result<CurvePoint>;

    /// Points at `t + offsets[i]`; implementors override this when
    /// neighbouring samples must be computed coherently.
    fn points_around(&self, t: f64, offsets: &[f64]) -> Result<Vec<CurvePoint>> {
        offsets.iter().map(|o| self.point(t + o)).collect()
    }

    /// The value of u at t, used to size finite-difference steps.
    fn u_at(&self, _t: f64) -> f64 {
        0.0
    }

    /// Translation vector for translators.
    fn translation(&self) -> Option<Vec<Complex64>> {
        None
    }
}

/// A point of L together with where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientPoint {
    pub z: Vec<Complex64>,
    pub x: QuadricPoint,
    pub t: f64,
    pub theta: f64,
}

fn embed(quadric: &Quadric, x: &[f64], cp: &CurvePoint) -> Vec<Complex64> {
    match quadric {
        Quadric::Centred { .. } => x.iter().zip(&cp.w).map(|(xi, w)| w * *xi).collect(),
        Quadric::Paraboloid { lambdas } => {
            let mut z: Vec<Complex64> = x.iter().zip(&cp.w).map(|(xi, w)| w * *xi).collect();
            let beta = cp.beta.expect("translator curve provides β").0;
            let q: f64 = lambdas.iter().zip(x).map(|(l, v)| l * v * v).sum();
            z.push(beta - 0.5 * q);
            z
        }
    }
}

/// The point ι(x, t) of L.
pub fn immerse<Cv: SolitonCurve + ?Sized>(curve: &Cv, x: &QuadricPoint, t: f64) -> Result<AmbientPoint> {
    let cp = curve.point(t)?;
    Ok(AmbientPoint {
        z: embed(curve.quadric(), &x.x, &cp),
        x: x.clone(),
        t,
        theta: cp.theta,
    })
}

/// Orthonormal tangent basis e_1..e_{n−1} of a centred quadric at x and the
/// unit normal e_n ∝ (λ_j x_j), oriented so det(e_1 … e_n) = +1 when n ≥ 2.
///
/// Returns the basis and det(e_1 … e_n) (which can only be −1 when n = 1).
pub fn quadric_basis(lambdas: &[f64], x: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<f64>, f64)> {
    let n = x.len();
    let nu: Vec<f64> = lambdas.iter().zip(x).map(|(l, v)| l * v).collect();
    let nn = nu.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(nn > 0.0) {
        return invalid("degenerate quadric point: all λ_j x_j vanish");
    }
    let en: Vec<f64> = nu.iter().map(|v| v / nn).collect();
    // Pivot on the largest |λ_j x_j|: that coordinate is solved for.
    let mut p = 0;
    for j in 1..n {
        if nu[j].abs() > nu[p].abs() {
            p = j;
        }
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n.saturating_sub(1));
    for j in (0..n).filter(|&j| j != p) {
        let mut v = vec![0.0; n];
        v[j] = 1.0;
        v[p] = -nu[j] / nu[p];
        // Two passes of modified Gram–Schmidt for a clean orthonormal set.
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
                v.iter_mut().zip(b).for_each(|(a, c)| *a -= d * c);
            }
            let d: f64 = v.iter().zip(&en).map(|(a, c)| a * c).sum();
            v.iter_mut().zip(&en).for_each(|(a, c)| *a -= d * c);
        }
        let vn = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= vn);
        basis.push(v);
    }
    let det = DMatrix::from_fn(n, n, |r, c| if c < n - 1 { basis[c][r] } else { en[r] }).determinant();
    let mut orientation = det.signum();
    if orientation < 0.0 && n >= 2 {
        basis[0].iter_mut().for_each(|a| *a = -*a);
        orientation = 1.0;
    }
    Ok((basis, en, orientation))
}

/// Tangent frame f_1..f_n of L, induced metric and determinant.
#[derive(Debug, Clone)]
pub struct Frame {
    pub f: Vec<Vec<Complex64>>,
    pub g: DMatrix<f64>,
    pub det_f: Complex64,
    /// det of the real frame on the quadric side; arg(orientation · det_f)
    /// is the Lagrangian angle.
    pub orientation: f64,
}

impl Frame {
    pub fn n(&self) -> usize {
        self.f.len()
    }

    /// Lagrangian angle read off the determinant.
    pub fn angle(&self) -> f64 {
        (self.det_f * self.orientation).arg()
    }

    /// max_{j,k} |⟨f_j, J f_k⟩| / (|f_j||f_k|).
    pub fn lagrangian_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.n() {
            let jf = j_times(&self.f[a]);
            for b in 0..self.n() {
                let r = inner(&self.f[b], &jf).abs() / (cnorm(&self.f[a]) * cnorm(&self.f[b]));
                worst = worst.max(r);
            }
        }
        worst
    }

    /// max_{j<n} |g_jn| / √(g_jj g_nn).
    pub fn block_residual(&self) -> f64 {
        let n = self.n();
        (0..n - 1)
            .map(|j| self.g[(j, n - 1)].abs() / (self.g[(j, j)] * self.g[(n - 1, n - 1)]).sqrt())
            .fold(0.0, f64::max)
    }

    /// Component of `v` normal to the tangent plane.
    pub fn project_normal(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.n();
        let rhs = DVector::from_fn(n, |a, _| inner(&self.f[a], v));
        let coef = self
            .g
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("induced metric is not positive definite".into()))?
            .solve(&rhs);
        let mut out = v.to_vec();
        for a in 0..n {
            for (o, f) in out.iter_mut().zip(&self.f[a]) {
                *o -= f * coef[a];
            }
        }
        Ok(out)
    }
}

fn complex_det(cols: &[Vec<Complex64>]) -> Complex64 {
    let n = cols.len();
    DMatrix::from_fn(n, n, |r, c| cols[c][r]).determinant()
}

fn metric(f: &[Vec<Complex64>]) -> DMatrix<f64> {
    let n = f.len();
    DMatrix::from_fn(n, n, |a, b| inner(&f[a], &f[b]))
}

fn frame_from_point(quadric: &Quadric, x: &[f64], cp: &CurvePoint) -> Result<Frame> {
    let (f, orientation) = match quadric {
        Quadric::Centred { lambdas, .. } => {
            let (basis, _, orientation) = quadric_basis(lambdas, x)?;
            let mut f: Vec<Vec<Complex64>> = basis
                .iter()
                .map(|e| e.iter().zip(&cp.w).map(|(ej, w)| w * *ej).collect())
                .collect();
            f.push(x.iter().zip(&cp.dw).map(|(xj, dw)| dw * *xj).collect());
            (f, orientation)
        }
        Quadric::Paraboloid { lambdas } => {
            let m = lambdas.len();
            let (beta, dbeta) = cp.beta.ok_or_else(|| Error::InvalidParameter("translator curve without β".into()))?;
            let _ = beta;
            let mut f = Vec::with_capacity(m + 1);
            for k in 0..m {
                let mut v = vec![Complex64::new(0.0, 0.0); m + 1];
                v[k] = cp.w[k];
                v[m] = Complex64::new(-lambdas[k] * x[k], 0.0);
                f.push(v);
            }
            let mut v: Vec<Complex64> = x.iter().zip(&cp.dw).map(|(xj, dw)| dw * *xj).collect();
            v.push(dbeta);
            f.push(v);
            (f, 1.0)
        }
    };
    let g = metric(&f);
    let det_f = complex_det(&f);
    Ok(Frame {
        f,
        g,
        det_f,
        orientation,
    })
}

/// The frame of L at ι(x, t).
pub fn frame_at<Cv: SolitonCurve + ?Sized>(curve: &Cv, x: &QuadricPoint, t: f64) -> Result<Frame> {
    let cp = curve.point(t)?;
    frame_from_point(curve.quadric(), &x.x, &cp)
}

/// |arg det f − θ(t)| minimized over 2π shifts.
pub fn lagrangian_angle_residual<Cv: SolitonCurve + ?Sized>(curve: &Cv, x: &QuadricPoint, t: f64) -> Result<f64> {
    let cp = curve.point(t)?;
    let fr = frame_from_point(curve.quadric(), &x.x, &cp)?;
    Ok(angle_diff(fr.angle(), cp.theta).abs())
}

/// Normal part of the position vector.
#[derive(Debug, Clone)]
pub struct NormalProjection {
    pub f_perp: Vec<Complex64>,
    /// ⟨F, Jf_n⟩ / g_nn, so that F^⊥ = coefficient · J f_n.
    pub coefficient: f64,
    /// max_{l<n} |⟨F, Jf_l⟩| / (|F| |f_l|).
    pub tangential_residual: f64,
    /// g_nn of the frame.
    pub g_nn: f64,
}

/// F^⊥ on a centred construction, expressed along J f_n.
pub fn normal_projection_f<Cv: SolitonCurve + ?Sized>(curve: &Cv, x: &QuadricPoint, t: f64) -> Result<NormalProjection> {
    if !matches!(curve.quadric(), Quadric::Centred { .. }) {
        return invalid("position-vector projection is defined for centred quadrics");
    }
    let cp = curve.point(t)?;
    let fr = frame_from_point(curve.quadric(), &x.x, &cp)?;
    let z = embed(curve.quadric(), &x.x, &cp);
    let n = fr.n();
    let jfn = j_times(&fr.f[n - 1]);
    let g_nn = fr.g[(n - 1, n - 1)];
    let coefficient = inner(&z, &jfn) / g_nn;
    let zn = cnorm(&z).max(f64::MIN_POSITIVE);
    let tangential_residual = (0..n - 1)
        .map(|l| inner(&z, &j_times(&fr.f[l])).abs() / (zn * cnorm(&fr.f[l])))
        .fold(0.0, f64::max);
    Ok(NormalProjection {
        f_perp: jfn.iter().map(|v| v * coefficient).collect(),
        coefficient,
        tangential_residual,
        g_nn,
    })
}

/// Default finite-difference step 10⁻³(1 + |u|)^{1/2}.
pub fn default_fd_step(u: f64) -> f64 {
    1e-3 * (1.0 + u.abs()).sqrt()
}

/// Mean curvature by finite differences of the immersion.
///
/// Local coordinates are (ξ_1..ξ_{n−1}, t): ξ moves along an orthonormal
/// tangent basis of the quadric (re-projected onto it) for centred
/// constructions, and along the free coordinates for translators. First and
/// second derivatives use central differences at steps h and h/2 combined by
/// Richardson extrapolation.
pub fn mean_curvature_fd<Cv: SolitonCurve + ?Sized>(curve: &Cv, x: &QuadricPoint, t: f64, h: Option<f64>) -> Result<Vec<Complex64>> {
    let quadric = curve.quadric();
    let n = quadric.ambient_dim();
    let ht = h.unwrap_or_else(|| default_fd_step(curve.u_at(t)));
    let xn = x.x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let hx = 1e-3 * (1.0 + xn).sqrt();
    let offsets = [-ht, -0.5 * ht, 0.0, 0.5 * ht, ht];
    let pts = curve.points_around(t, &offsets)?;
    let idx = |o: f64| offsets.iter().position(|&q| q == o).expect("stencil offset");

    // Chart: ξ ∈ ℝ^{n−1} ↦ quadric coordinates.
    let chart: Box<dyn Fn(&[f64]) -> Result<Vec<f64>>> = match quadric {
        Quadric::Centred { lambdas, c } => {
            let (basis, en, _) = quadric_basis(lambdas, &x.x)?;
            let x0 = x.x.clone();
            let lambdas = lambdas.clone();
            let c = *c;
            Box::new(move |xi: &[f64]| {
                let mut p = x0.clone();
                for (a, b) in basis.iter().enumerate() {
                    p.iter_mut().zip(b).for_each(|(pv, bv)| *pv += xi[a] * bv);
                }
                // Solve Σλ_j (p_j + τ e_n,j)² = C for the root near τ = 0.
                let qa: f64 = lambdas.iter().zip(&en).map(|(l, e)| l * e * e).sum();
                let qb: f64 = 2.0 * lambdas.iter().zip(&p).zip(&en).map(|((l, pv), e)| l * pv * e).sum::<f64>();
                let qc: f64 = lambdas.iter().zip(&p).map(|(l, pv)| l * pv * pv).sum::<f64>() - c;
                let disc = qb * qb - 4.0 * qa * qc;
                if disc < 0.0 {
                    return invalid("finite-difference stencil left the quadric chart");
                }
                let tau = -2.0 * qc / (qb + qb.signum() * disc.sqrt());
                p.iter_mut().zip(&en).for_each(|(pv, e)| *pv += tau * e);
                Ok(p)
            })
        }
        Quadric::Paraboloid { .. } => {
            let x0 = x.x.clone();
            Box::new(move |xi: &[f64]| Ok(x0.iter().zip(xi).map(|(a, b)| a + b).collect()))
        }
    };
    let d = n - 1; // chart dimension
    let at = |xi: &[f64], toff: f64| -> Result<Vec<Complex64>> { Ok(embed(quadric, &chart(xi)?, &pts[idx(toff)])) };

    let derivs = |k: f64| -> Result<(Vec<Vec<Complex64>>, Vec<Vec<Vec<Complex64>>>)> {
        let sx = hx * k;
        let st = ht * k;
        let zero = vec![0.0; d];
        let c0 = at(&zero, 0.0)?;
        let shift = |a: usize, v: f64| {
            let mut xi = vec![0.0; d];
            xi[a] = v;
            xi
        };
        let comb = |terms: &[(f64, &Vec<Complex64>)], div: f64| -> Vec<Complex64> {
            (0..n)
                .map(|i| terms.iter().map(|(c, v)| v[i] * *c).sum::<Complex64>() / div)
                .collect()
        };
        let mut first = vec![Vec::new(); n];
        let mut second = vec![vec![Vec::new(); n]; n];
        // Chart directions.
        for a in 0..d {
            let p = at(&shift(a, sx), 0.0)?;
            let m = at(&shift(a, -sx), 0.0)?;
            first[a] = comb(&[(1.0, &p), (-1.0, &m)], 2.0 * sx);
            second[a][a] = comb(&[(1.0, &p), (-2.0, &c0), (1.0, &m)], sx * sx);
            for b in 0..a {
                let mut xi = vec![0.0; d];
                let mut corners = Vec::with_capacity(4);
                for (sa, sb) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    xi.iter_mut().for_each(|v| *v = 0.0);
                    xi[a] = sa * sx;
                    xi[b] = sb * sx;
                    corners.push(at(&xi, 0.0)?);
                }
                let v = comb(
                    &[(1.0, &corners[0]), (-1.0, &corners[1]), (-1.0, &corners[2]), (1.0, &corners[3])],
                    4.0 * sx * sx,
                );
                second[a][b] = v.clone();
                second[b][a] = v;
            }
            // Mixed chart/curve derivative.
            let pp = at(&shift(a, sx), st)?;
            let pm = at(&shift(a, sx), -st)?;
            let mp = at(&shift(a, -sx), st)?;
            let mm = at(&shift(a, -sx), -st)?;
            let v = comb(&[(1.0, &pp), (-1.0, &pm), (-1.0, &mp), (1.0, &mm)], 4.0 * sx * st);
            second[a][d] = v.clone();
            second[d][a] = v;
        }
        // Curve direction.
        let p = at(&zero, st)?;
        let m = at(&zero, -st)?;
        first[d] = comb(&[(1.0, &p), (-1.0, &m)], 2.0 * st);
        second[d][d] = comb(&[(1.0, &p), (-2.0, &c0), (1.0, &m)], st * st);
        Ok((first, second))
    };

    let (f1, s1) = derivs(1.0)?;
    let (f2, s2) = derivs(0.5)?;
    let rich = |a: &Vec<Complex64>, b: &Vec<Complex64>| -> Vec<Complex64> {
        a.iter().zip(b).map(|(x1, x2)| (x2 * 4.0 - x1) / 3.0).collect()
    };
    let first: Vec<Vec<Complex64>> = f1.iter().zip(&f2).map(|(a, b)| rich(a, b)).collect();
    let g = metric(&first);
    let ginv = g
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("finite-difference metric is singular".into()))?;
    let frame = Frame {
        det_f: complex_det(&first),
        f: first,
        g,
        orientation: 1.0,
    };
    let mut hsum = vec![Complex64::new(0.0, 0.0); n];
    for a in 0..n {
        for b in 0..n {
            let hab = rich(&s1[a][b], &s2[a][b]);
            let w = ginv[(a, b)];
            hsum.iter_mut().zip(&hab).for_each(|(hv, v)| *hv += v * w);
        }
    }
    frame.project_normal(&hsum)
}

/// Pointwise verification residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResiduals {
    pub t: f64,
    pub lagrangian: f64,
    pub angle: f64,
    /// Relative soliton-equation residual, or |H| when the expected mean
    /// curvature vanishes identically.
    pub soliton: f64,
    pub metric_block: f64,
    /// Norm of the finite-difference mean curvature.
    pub h_norm: f64,
}

/// Whether the soliton residual is relative or the absolute |H| of a
/// minimal submanifold.
pub fn expects_minimal<Cv: SolitonCurve + ?Sized>(curve: &Cv) -> bool {
    curve.alpha() == 0.0
}

/// All residuals at ι(x, t): Lagrangian condition, angle, metric block
/// structure and the soliton equation against the finite-difference oracle.
pub fn verify_point<Cv: SolitonCurve + ?Sized>(curve: &Cv, x: &QuadricPoint, t: f64) -> Result<PointResiduals> {
    let cp = curve.point(t)?;
    let fr = frame_from_point(curve.quadric(), &x.x, &cp)?;
    let lagrangian = fr.lagrangian_residual();
    let angle = angle_diff(fr.angle(), cp.theta).abs();
    let hfd = mean_curvature_fd(curve, x, t, None)?;
    let h_norm = cnorm(&hfd);
    let soliton = match curve.quadric() {
        Quadric::Centred { c, .. } => {
            if expects_minimal(curve) {
                h_norm
            } else {
                let fp = normal_projection_f(curve, x, t)?;
                let diff: Vec<Complex64> = fp.f_perp.iter().zip(&hfd).map(|(a, b)| a * curve.alpha() - b * *c).collect();
                cnorm(&diff) / (h_norm * c.abs())
            }
        }
        Quadric::Paraboloid { .. } => {
            let tvec = curve.translation().expect("translator curve provides T");
            let tperp = fr.project_normal(&tvec)?;
            let diff: Vec<Complex64> = tperp.iter().zip(&hfd).map(|(a, b)| a - b).collect();
            let scale = cnorm(&tperp);
            if scale == 0.0 {
                h_norm
            } else {
                cnorm(&diff) / scale
            }
        }
    };
    Ok(PointResiduals {
        t,
        lagrangian,
        angle,
        soliton,
        metric_block: fr.block_residual(),
        h_norm,
    })
}

/// Best constant c with θ + ⟨JT, F⟩ ≡ c over the samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaslovFit {
    pub c: f64,
    pub max_deviation: f64,
}

/// Fit c to values of θ + ⟨JT, F⟩.
pub fn maslov_fit(values: &[f64]) -> MaslovFit {
    let c = values.iter().sum::<f64>() / values.len() as f64;
    let max_deviation = values.iter().map(|v| (v - c).abs()).fold(0.0, f64::max);
    MaslovFit { c, max_deviation }
}

/// θ + ⟨JT, F⟩ at every sample of a translator.
pub fn maslov_values<Cv: SolitonCurve + ?Sized>(curve: &Cv, samples: &[(QuadricPoint, f64)]) -> Result<Vec<f64>> {
    let tvec = curve
        .translation()
        .ok_or_else(|| Error::InvalidParameter("angle identity needs a translating soliton".into()))?;
    let jt = j_times(&tvec);
    samples
        .iter()
        .map(|(x, t)| {
            let p = immerse(curve, x, *t)?;
            Ok(p.theta + inner(&jt, &p.z))
        })
        .collect()
}

/// Fit c in θ = −⟨JT, F⟩ + c and report the largest deviation.
pub fn maslov_angle_check<Cv: SolitonCurve + ?Sized>(curve: &Cv, samples: &[(QuadricPoint, f64)]) -> Result<MaslovFit> {
    Ok(maslov_fit(&maslov_values(curve, samples)?))
}

/// Deterministic pseudo-random points on a quadric.
///
/// Centred: for Σλ_jx_j² = C the coordinates whose λ_j has the sign of C
/// form the sphere factor, the others are drawn uniformly from
/// [−spread, spread] and the sphere radius is adjusted. Paraboloid: free
/// coordinates uniform in [−spread, spread].
pub fn sample_quadric(quadric: &Quadric, count: usize, spread: f64, seed: u64) -> Result<Vec<QuadricPoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    match quadric {
        Quadric::Centred { lambdas, c } => {
            let sphere: Vec<usize> = (0..lambdas.len()).filter(|&j| lambdas[j] * c > 0.0).collect();
            if sphere.is_empty() {
                return invalid("quadric has no real points");
            }
            for _ in 0..count {
                let mut x = vec![0.0; lambdas.len()];
                let mut rest = 0.0;
                for j in 0..lambdas.len() {
                    if lambdas[j] * c < 0.0 {
                        x[j] = rng.gen_range(-spread..=spread) / lambdas[j].abs().sqrt();
                        rest += lambdas[j].abs() * x[j] * x[j];
                    }
                }
                let radius = (c.abs() + rest).sqrt();
                let mut dir: Vec<f64> = sphere.iter().map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                dir.iter_mut().for_each(|v| *v /= dn);
                for (k, &j) in sphere.iter().enumerate() {
                    x[j] = radius * dir[k] / lambdas[j].abs().sqrt();
                }
                out.push(QuadricPoint::new(quadric, x)?);
            }
        }
        Quadric::Paraboloid { lambdas } => {
            for _ in 0..count {
                out.push(QuadricPoint {
                    x: lambdas.iter().map(|_| rng.gen_range(-spread..=spread)).collect(),
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn tangent_basis_is_oriented_and_orthonormal() {
        let l = [1.0, -1.0, 1.0];
        let x = [1.2, 0.7, (1.0 - 1.44 + 0.49f64).sqrt()];
        let (b, en, o) = quadric_basis(&l, &x).unwrap();
        assert_eq!(o, 1.0);
        for (i, u) in b.iter().enumerate() {
            let dn: f64 = u.iter().zip(&en).map(|(a, c)| a * c).sum();
            assert!(dn.abs() < 1e-15);
            for (k, v) in b.iter().enumerate() {
                let d: f64 = u.iter().zip(v).map(|(a, c)| a * c).sum();
                assert!((d - if i == k { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
        let det = DMatrix::from_fn(3, 3, |r, c| if c < 2 { b[c][r] } else { en[r] }).determinant();
        assert_relative_eq!(det, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn off_quadric_points_are_rejected() {
        let q = Quadric::Centred {
            lambdas: vec![1.0, -1.0],
            c: 1.0,
        };
        assert!(QuadricPoint::new(&q, vec![2f64.sqrt(), 1.0]).is_ok());
        assert!(QuadricPoint::new(&q, vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn samples_lie_on_the_quadric() {
        let q = Quadric::Centred {
            lambdas: vec![2.0, -3.0, 1.0],
            c: -1.5,
        };
        let pts = sample_quadric(&q, 50, 2.0, 7).unwrap();
        assert_eq!(pts.len(), 50);
        let again = sample_quadric(&q, 50, 2.0, 7).unwrap();
        assert_eq!(pts, again);
    }

    #[test]
    fn normal_projection_of_vectors() {
        // Frame of the real plane ℝ² ⊂ ℂ²: the normal part is the imaginary part.
        let fr = Frame {
            f: vec![
                vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
                vec![Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)],
            ],
            g: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 5.0]),
            det_f: Complex64::new(2.0, 0.0),
            orientation: 1.0,
        };
        let v = [Complex64::new(3.0, -1.0), Complex64::new(-2.0, 4.0)];
        let p = fr.project_normal(&v).unwrap();
        assert!((p[0] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((p[1] - Complex64::new(0.0, 4.0)).norm() < 1e-14);
        assert!(fr.lagrangian_residual() < 1e-16);
    }
}
