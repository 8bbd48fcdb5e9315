//! Construction constants λ_j, C, α and their normal form.
//!
//! Any admissible constants can be brought to λ_j = ±1, C = 1 (positives
//! first) by rescaling the coordinates and the curve parameter. The
//! [`ScalingRecord`] keeps every factor so solutions of the normalized
//! problem can be mapped back to the original one.

use crate::error::{invalid, Result};

/// The constants of a quadric construction Σ λ_j x_j² = C with soliton
/// constant α.
#[derive(Debug, Clone, PartialEq)]
pub struct SolitonParams {
    pub lambdas: Vec<f64>,
    pub c: f64,
    pub alpha: f64,
}

impl SolitonParams {
    pub fn new(lambdas: Vec<f64>, c: f64, alpha: f64) -> Result<Self> {
        let p = Self { lambdas, c, alpha };
        p.validate()?;
        Ok(p)
    }

    /// Normal-form constants: λ_j = ±1 sorted positives first, C = 1.
    pub fn normalized(signs: &[f64], alpha: f64) -> Result<Self> {
        let p = Self::new(signs.to_vec(), 1.0, alpha)?;
        if !p.is_normalized() {
            return invalid("signs must be ±1 with positives first");
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() {
            return invalid("dimension must be at least 1");
        }
        if self.lambdas.iter().any(|&l| l == 0.0 || !l.is_finite()) {
            return invalid("every λ_j must be a nonzero finite real");
        }
        if self.c == 0.0 || !self.c.is_finite() {
            return invalid("C must be a nonzero finite real");
        }
        if !self.alpha.is_finite() {
            return invalid("α must be finite");
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    /// Number of positive λ_j.
    pub fn m(&self) -> usize {
        self.lambdas.iter().filter(|&&l| l > 0.0).count()
    }

    pub fn is_normalized(&self) -> bool {
        self.c == 1.0
            && self.lambdas.iter().all(|&l| l == 1.0 || l == -1.0)
            && self.lambdas.windows(2).all(|w| w[0] >= w[1])
    }
}

/// Multiplicative substitution factors taking quantities of one
/// construction to an equivalent one, plus a coordinate permutation.
///
/// Normalized index `i` corresponds to original index `perm[i]`. Angles θ
/// and φ_j are unchanged by every substitution here.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRecord {
    pub perm: Vec<usize>,
    /// s ↦ s_factor · s.
    pub s_factor: f64,
    /// w_j ↦ w_factor[j] · w_j (indexed in original order).
    pub w_factor: Vec<f64>,
    /// x_j ↦ x_factor[j] · x_j (indexed in original order).
    pub x_factor: Vec<f64>,
    /// u ↦ u_factor · u.
    pub u_factor: f64,
    /// α_j ↦ alphas_factor[j] · α_j (indexed in original order).
    pub alphas_factor: Vec<f64>,
    /// A ↦ a_factor · A.
    pub a_factor: f64,
    /// α ↦ alpha_factor · α.
    pub alpha_factor: f64,
}

impl ScalingRecord {
    pub fn identity(n: usize) -> Self {
        Self {
            perm: (0..n).collect(),
            s_factor: 1.0,
            w_factor: vec![1.0; n],
            x_factor: vec![1.0; n],
            u_factor: 1.0,
            alphas_factor: vec![1.0; n],
            a_factor: 1.0,
            alpha_factor: 1.0,
        }
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    fn permute_scaled(&self, v: &[f64], f: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&k| f[k] * v[k]).collect()
    }

    fn unpermute_scaled(&self, v: &[f64], f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (i, &k) in self.perm.iter().enumerate() {
            out[k] = v[i] / f[k];
        }
        out
    }

    fn unpermute(&self, v: &[f64]) -> Vec<f64> {
        self.unpermute_scaled(v, &vec![1.0; v.len()])
    }

    pub fn map_alpha(&self, alpha: f64) -> f64 {
        self.alpha_factor * alpha
    }

    pub fn map_first_integral(&self, a: f64) -> f64 {
        self.a_factor * a
    }

    pub fn map_s(&self, s: f64) -> f64 {
        self.s_factor * s
    }

    pub fn map_u(&self, u: f64) -> f64 {
        self.u_factor * u
    }

    pub fn map_alphas(&self, alphas: &[f64]) -> Vec<f64> {
        self.permute_scaled(alphas, &self.alphas_factor)
    }

    pub fn map_x(&self, x: &[f64]) -> Vec<f64> {
        self.permute_scaled(x, &self.x_factor)
    }

    pub fn map_angles(&self, phis: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&k| phis[k]).collect()
    }

    pub fn unmap_angles(&self, phis: &[f64]) -> Vec<f64> {
        self.unpermute(phis)
    }

    pub fn unmap_alphas(&self, alphas: &[f64]) -> Vec<f64> {
        self.unpermute_scaled(alphas, &self.alphas_factor)
    }

    pub fn unmap_x(&self, x: &[f64]) -> Vec<f64> {
        self.unpermute_scaled(x, &self.x_factor)
    }

    /// Compose with the dilation L ↦ tL of an n-dimensional construction.
    pub fn rescale(&self, t: f64) -> Result<Self> {
        rescale_solution(self, t)
    }

    /// The record undoing this one.
    pub fn inverse(&self) -> Self {
        let n = self.n();
        let mut inv_perm = vec![0; n];
        for (i, &k) in self.perm.iter().enumerate() {
            inv_perm[k] = i;
        }
        let reindex = |f: &[f64]| -> Vec<f64> { (0..n).map(|i| 1.0 / f[self.perm[i]]).collect() };
        Self {
            perm: inv_perm,
            s_factor: 1.0 / self.s_factor,
            w_factor: reindex(&self.w_factor),
            x_factor: reindex(&self.x_factor),
            u_factor: 1.0 / self.u_factor,
            alphas_factor: reindex(&self.alphas_factor),
            a_factor: 1.0 / self.a_factor,
            alpha_factor: 1.0 / self.alpha_factor,
        }
    }

    /// Largest relative deviation of any factor from `other`'s.
    pub fn distance(&self, other: &Self) -> f64 {
        if self.perm != other.perm {
            return f64::INFINITY;
        }
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        let mut d = rel(self.s_factor, other.s_factor)
            .max(rel(self.u_factor, other.u_factor))
            .max(rel(self.a_factor, other.a_factor))
            .max(rel(self.alpha_factor, other.alpha_factor));
        for j in 0..self.n() {
            d = d
                .max(rel(self.w_factor[j], other.w_factor[j]))
                .max(rel(self.x_factor[j], other.x_factor[j]))
                .max(rel(self.alphas_factor[j], other.alphas_factor[j]));
        }
        d
    }
}

/// Bring the constants to λ_j = ±1 (positives first), C = 1.
pub fn normalize(params: &SolitonParams) -> Result<(SolitonParams, ScalingRecord)> {
    params.validate()?;
    let n = params.n();
    let c = params.c;
    let ac = c.abs();
    let signs: Vec<f64> = params.lambdas.iter().map(|&l| (c * l).signum()).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    // Stable: positives keep their relative order, then negatives.
    perm.sort_by_key(|&k| if signs[k] > 0.0 { 0 } else { 1 });
    let prod_sqrt: f64 = params.lambdas.iter().map(|l| l.abs().sqrt()).product();
    let record = ScalingRecord {
        perm: perm.clone(),
        s_factor: c * ac.powf(-(n as f64) / 2.0) * prod_sqrt,
        w_factor: params.lambdas.iter().map(|l| (ac / l.abs()).sqrt()).collect(),
        x_factor: params.lambdas.iter().map(|l| (l.abs() / ac).sqrt()).collect(),
        u_factor: c,
        alphas_factor: params.lambdas.iter().map(|l| ac / l.abs()).collect(),
        a_factor: ac.powf(n as f64 / 2.0) / prod_sqrt,
        alpha_factor: 1.0 / c,
    };
    let normalized = SolitonParams {
        lambdas: perm.iter().map(|&k| signs[k]).collect(),
        c: 1.0,
        alpha: params.alpha / c,
    };
    Ok((normalized, record))
}

/// Compose the dilation L ↦ tL into `record`.
///
/// The dilation acts on an n-dimensional construction by α ↦ t⁻²α,
/// s ↦ t^{n−2}s, w_j ↦ t w_j, u ↦ t²u, α_j ↦ t²α_j, A ↦ tⁿA.
pub fn rescale_solution(record: &ScalingRecord, t: f64) -> Result<ScalingRecord> {
    if !(t > 0.0 && t.is_finite()) {
        return invalid(format!("dilation factor must be positive, got {t}"));
    }
    let n = record.n() as f64;
    let mut r = record.clone();
    r.alpha_factor *= t.powi(-2);
    r.s_factor *= t.powf(n - 2.0);
    r.w_factor.iter_mut().for_each(|f| *f *= t);
    r.u_factor *= t * t;
    r.alphas_factor.iter_mut().for_each(|f| *f *= t * t);
    r.a_factor *= t.powf(n);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn normal_form_of_mixed_signs() {
        let p = SolitonParams::new(vec![2.0, -3.0], 4.0, 1.0).unwrap();
        let (q, rec) = normalize(&p).unwrap();
        assert_eq!(q.lambdas, vec![1.0, -1.0]);
        assert_eq!(q.c, 1.0);
        assert_relative_eq!(q.alpha, 0.25);
        // s̃ = C|C|^{-n/2}∏|λ|^{1/2} s = 4·(1/4)·√6.
        assert_relative_eq!(rec.s_factor, 6f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(rec.a_factor, 4.0 / 6f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn already_normal_is_identity() {
        let p = SolitonParams::new(vec![1.0, 1.0, 1.0], 1.0, 0.0).unwrap();
        let (q, rec) = normalize(&p).unwrap();
        assert_eq!(q, p);
        assert!(rec.distance(&ScalingRecord::identity(3)) < 1e-15);
    }

    #[test]
    fn negative_c_flips_signs_and_alpha() {
        let p = SolitonParams::new(vec![-5.0], -2.0, 2.0).unwrap();
        let (q, _) = normalize(&p).unwrap();
        assert_eq!(q.lambdas, vec![1.0]);
        assert_eq!(q.c, 1.0);
        assert_relative_eq!(q.alpha, -1.0);
    }

    #[test]
    fn negatives_move_last() {
        let p = SolitonParams::new(vec![-1.0, 2.0, -3.0, 4.0], 1.0, 0.5).unwrap();
        let (q, rec) = normalize(&p).unwrap();
        assert_eq!(q.lambdas, vec![1.0, 1.0, -1.0, -1.0]);
        assert_eq!(rec.perm, vec![1, 3, 0, 2]);
        assert_eq!(q.m(), 2);
    }

    #[test]
    fn rejects_zero_constants() {
        assert!(SolitonParams::new(vec![1.0, 0.0], 1.0, 0.0).is_err());
        assert!(SolitonParams::new(vec![1.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn dilation_example() {
        let rec = ScalingRecord::identity(2);
        let r = rescale_solution(&rec, 2.0).unwrap();
        assert_relative_eq!(r.map_alpha(1.0), 0.25);
        assert_relative_eq!(r.map_first_integral(0.5), 2.0);
        assert_relative_eq!(r.s_factor, 1.0);
        assert!(rescale_solution(&rec, 0.0).is_err());
        assert!(rescale_solution(&rec, -1.0).is_err());
        assert!(rescale_solution(&rec, 1.0).unwrap().distance(&rec) == 0.0);
    }
}
