//! Dormand–Prince 5(4) integrator with PI step-size control.
//!
//! The integrator knows nothing about the soliton equations. Callers supply
//! a right-hand side that may refuse a state (outside its domain) and an
//! optional scalar invariant whose per-step drift is policed alongside the
//! embedded error estimate.

use crate::error::{Error, Result};

/// A right-hand side evaluation was refused because the state is outside the
/// domain of the vector field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutOfDomain;

pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, s: f64, y: &[f64], dy: &mut [f64]) -> std::result::Result<(), OutOfDomain>;

    /// Conserved quantity monitored during stepping.
    fn invariant(&self, _s: f64, _y: &[f64]) -> Option<f64> {
        None
    }

    /// Called on every accepted state; `Err` aborts with a domain escape.
    fn check_state(&self, _s: f64, _y: &[f64]) -> std::result::Result<(), OutOfDomain> {
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Invariant drift allowed per step, as a multiple of the local tolerance.
    pub invariant_factor: f64,
    pub max_steps: usize,
    /// Upper bound on |h|; `None` leaves it to the controller.
    pub h_max: Option<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            invariant_factor: 0.3,
            max_steps: 2_000_000,
            h_max: None,
        }
    }
}

impl StepControl {
    pub fn with_tol(rtol: f64) -> Self {
        Self {
            rtol,
            atol: rtol * 1e-2,
            ..Self::default()
        }
    }
}

/// States at every accepted step (and at requested output points).
#[derive(Debug, Clone, Default)]
pub struct Solution {
    pub s: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub rejected: usize,
}

impl Solution {
    pub fn last(&self) -> (f64, &[f64]) {
        let k = self.s.len() - 1;
        (self.s[k], &self.y[k])
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Work {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    ynew: Vec<f64>,
    err: Vec<f64>,
}

impl Work {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            ynew: vec![0.0; n],
            err: vec![0.0; n],
        }
    }
}

/// Attempt one step of size `h` from `(s, y)`; `k[0]` must hold f(s, y).
/// On success `ynew` and `k[6]` hold the new state and its derivative and the
/// scaled error norm is returned.
fn try_step<S: OdeSystem>(sys: &S, s: f64, y: &[f64], h: f64, w: &mut Work, ctl: &StepControl) -> std::result::Result<f64, OutOfDomain> {
    let n = y.len();
    macro_rules! stage {
        ($dst:expr, $c:expr, $($a:expr => $ki:expr),+) => {{
            for i in 0..n {
                w.tmp[i] = y[i] + h * (0.0 $(+ $a * w.k[$ki][i])+);
            }
            sys.rhs(s + $c * h, &w.tmp, &mut w.k[$dst])?;
        }};
    }
    stage!(1, C2, A21 => 0);
    stage!(2, C3, A31 => 0, A32 => 1);
    stage!(3, C4, A41 => 0, A42 => 1, A43 => 2);
    stage!(4, C5, A51 => 0, A52 => 1, A53 => 2, A54 => 3);
    stage!(5, 1.0, A61 => 0, A62 => 1, A63 => 2, A64 => 3, A65 => 4);
    for i in 0..n {
        w.ynew[i] = y[i] + h * (B1 * w.k[0][i] + B3 * w.k[2][i] + B4 * w.k[3][i] + B5 * w.k[4][i] + B6 * w.k[5][i]);
    }
    sys.rhs(s + h, &w.ynew, &mut w.k[6])?;
    let mut norm: f64 = 0.0;
    for i in 0..n {
        w.err[i] = h * (E1 * w.k[0][i] + E3 * w.k[2][i] + E4 * w.k[3][i] + E5 * w.k[4][i] + E6 * w.k[5][i] + E7 * w.k[6][i]);
        let sc = ctl.atol + ctl.rtol * y[i].abs().max(w.ynew[i].abs());
        norm = norm.max((w.err[i] / sc).abs());
    }
    if !norm.is_finite() {
        return Err(OutOfDomain);
    }
    Ok(norm)
}

/// Integrate from `(s0, y0)` to `s_end` (either direction).
///
/// Every accepted step is recorded. Points in `outputs` that lie strictly
/// between `s0` and `s_end` are hit exactly by shortening steps; they must be
/// sorted in the direction of integration.
pub fn integrate<S: OdeSystem>(sys: &S, s0: f64, y0: &[f64], s_end: f64, ctl: &StepControl, outputs: &[f64]) -> Result<Solution> {
    let n = sys.dim();
    assert_eq!(y0.len(), n, "state dimension mismatch");
    let mut sol = Solution {
        s: vec![s0],
        y: vec![y0.to_vec()],
        rejected: 0,
    };
    if s_end == s0 {
        return Ok(sol);
    }
    let dir = (s_end - s0).signum();
    let mut w = Work::new(n);
    let mut s = s0;
    let mut y = y0.to_vec();
    sys.rhs(s, &y, &mut w.k[0]).map_err(|_| Error::DomainEscape { s })?;
    let mut inv = sys.invariant(s, &y);

    // Initial step guess from the derivative scale.
    let mut d0: f64 = 0.0;
    let mut d1: f64 = 0.0;
    for i in 0..n {
        let sc = ctl.atol + ctl.rtol * y[i].abs();
        d0 = d0.max((y[i] / sc).abs());
        d1 = d1.max((w.k[0][i] / sc).abs());
    }
    let span = (s_end - s0).abs();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(span).min(ctl.h_max.unwrap_or(f64::INFINITY)).max(1e-12 * span.max(1.0));
    let mut err_old: f64 = 1e-4;
    let mut out_idx = outputs
        .iter()
        .position(|&o| (o - s0) * dir > 0.0)
        .unwrap_or(outputs.len());
    let mut last_domain_failure = false;
    let mut steps = 0usize;

    while (s_end - s) * dir > 0.0 {
        steps += 1;
        if steps > ctl.max_steps {
            return Err(Error::ToleranceFailure { s, h });
        }
        let mut target = s_end;
        if out_idx < outputs.len() && (outputs[out_idx] - s_end) * dir < 0.0 {
            target = outputs[out_idx];
        }
        let mut h_try = h;
        let mut hit = false;
        if (s + dir * h - target) * dir >= 0.0 {
            h_try = (target - s).abs();
            hit = true;
        }
        let h_floor = 1e-14 * s.abs().max(span).max(1.0);
        if h_try < h_floor && !(hit && h >= h_floor) {
            return Err(if last_domain_failure {
                Error::DomainEscape { s }
            } else {
                Error::ToleranceFailure { s, h }
            });
        }
        match try_step(sys, s, &y, dir * h_try, &mut w, ctl) {
            Err(OutOfDomain) => {
                last_domain_failure = true;
                sol.rejected += 1;
                h = 0.25 * h_try;
                continue;
            }
            Ok(norm) => {
                let snew = if hit { target } else { s + dir * h_try };
                let drift_ok = match (inv, sys.invariant(snew, &w.ynew)) {
                    (Some(a), Some(b)) => {
                        (b - a).abs() <= ctl.invariant_factor * (ctl.atol + ctl.rtol * a.abs())
                    }
                    _ => true,
                };
                if norm <= 1.0 && drift_ok {
                    last_domain_failure = false;
                    if sys.check_state(snew, &w.ynew).is_err() {
                        return Err(Error::DomainEscape { s: snew });
                    }
                    s = snew;
                    y.copy_from_slice(&w.ynew);
                    let (first, rest) = w.k.split_at_mut(1);
                    first[0].copy_from_slice(&rest[5]);
                    inv = sys.invariant(s, &y);
                    sol.s.push(s);
                    sol.y.push(y.clone());
                    if hit && out_idx < outputs.len() && target == outputs[out_idx] {
                        out_idx += 1;
                    }
                    // PI controller (Hairer–Wanner constants).
                    let nrm = norm.max(1e-10);
                    let fac = nrm.powf(0.17) / err_old.powf(0.04) / 0.9;
                    let fac = fac.clamp(0.1, 5.0);
                    err_old = nrm.max(1e-4);
                    let grow = h_try / fac;
                    h = if hit { h.max(grow) } else { grow };
                    if let Some(hm) = ctl.h_max {
                        h = h.min(hm);
                    }
                } else {
                    sol.rejected += 1;
                    let shrink = if norm > 1.0 {
                        (0.9 * norm.powf(-0.2)).clamp(0.1, 0.9)
                    } else {
                        0.5
                    };
                    h = h_try * shrink;
                }
            }
        }
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    struct Oscillator;
    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _s: f64, y: &[f64], dy: &mut [f64]) -> std::result::Result<(), OutOfDomain> {
            dy[0] = y[1];
            dy[1] = -y[0];
            Ok(())
        }
        fn invariant(&self, _s: f64, y: &[f64]) -> Option<f64> {
            Some(y[0] * y[0] + y[1] * y[1])
        }
    }

    #[test]
    fn harmonic_oscillator_forward_and_back() {
        let ctl = StepControl::default();
        let sol = integrate(&Oscillator, 0.0, &[1.0, 0.0], 20.0, &ctl, &[]).unwrap();
        let (s, y) = sol.last();
        assert_eq!(s, 20.0);
        assert_relative_eq!(y[0], 20f64.cos(), epsilon = 1e-8);
        assert_relative_eq!(y[1], -20f64.sin(), epsilon = 1e-8);
        let sol = integrate(&Oscillator, 0.0, &[1.0, 0.0], -3.0, &ctl, &[]).unwrap();
        assert_relative_eq!(sol.last().1[0], 3f64.cos(), epsilon = 1e-9);
    }

    #[test]
    fn output_points_are_hit_exactly() {
        let outs = [0.5, 1.0, 1.5];
        let sol = integrate(&Oscillator, 0.0, &[1.0, 0.0], 2.0, &StepControl::default(), &outs).unwrap();
        for o in outs {
            let k = sol.s.iter().position(|&s| s == o).expect("output point present");
            assert_relative_eq!(sol.y[k][0], o.cos(), epsilon = 1e-10);
        }
    }

    struct Blowup;
    impl OdeSystem for Blowup {
        fn dim(&self) -> usize {
            1
        }
        // y' = -1/(2 y) reaches y = 0 at s = 1 from y(0) = 1.
        fn rhs(&self, _s: f64, y: &[f64], dy: &mut [f64]) -> std::result::Result<(), OutOfDomain> {
            if y[0] <= 0.0 {
                return Err(OutOfDomain);
            }
            dy[0] = -0.5 / y[0];
            Ok(())
        }
        fn check_state(&self, _s: f64, y: &[f64]) -> std::result::Result<(), OutOfDomain> {
            if y[0] < 1e-6 {
                Err(OutOfDomain)
            } else {
                Ok(())
            }
        }
    }

    #[test]
    fn domain_escape_is_reported_near_the_breakdown() {
        match integrate(&Blowup, 0.0, &[1.0], 2.0, &StepControl::default(), &[]) {
            Err(Error::DomainEscape { s }) => assert!((s - 1.0).abs() < 1e-3, "s = {s}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
