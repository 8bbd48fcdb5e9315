//! Small-denominator rational detection.

/// Greatest common divisor (nonnegative).
pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Least common multiple (nonnegative); `lcm(0, x) = 0`.
pub fn lcm(a: i64, b: i64) -> i64 {
    if a == 0 || b == 0 {
        return 0;
    }
    (a / gcd(a, b) * b).abs()
}

/// The rational p/q (q > 0) with the smallest denominator in the open
/// interval (lo, hi), found by walking continued fractions. Gives up once
/// the denominator would exceed `qmax`.
pub fn simplest_in_interval(lo: f64, hi: f64, qmax: i64) -> Option<(i64, i64)> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return None;
    }
    simplest_rec(lo, hi, qmax, 0)
}

fn simplest_rec(lo: f64, hi: f64, qmax: i64, depth: usize) -> Option<(i64, i64)> {
    if depth > 64 {
        return None;
    }
    // An integer inside the interval: take the one closest to zero.
    if lo < 0.0 && hi > 0.0 {
        return Some((0, 1));
    }
    let fl = lo.floor();
    if fl + 1.0 < hi {
        let k = if lo >= 0.0 { fl + 1.0 } else { hi.ceil() - 1.0 };
        return Some((k as i64, 1));
    }
    // lo and hi share the integer part fl (hi may equal fl + 1).
    let lo_frac = lo - fl;
    let hi_frac = hi - fl;
    let new_lo = 1.0 / hi_frac;
    let new_hi = if lo_frac > 0.0 { 1.0 / lo_frac } else { f64::INFINITY };
    let (p, q) = if new_hi.is_infinite() {
        ((new_lo.floor() + 1.0) as i64, 1)
    } else {
        simplest_rec(new_lo, new_hi, qmax, depth + 1)?
    };
    // x = fl + 1/(p/q) = (fl·p + q)/p
    if p > qmax {
        return None;
    }
    Some((fl as i64 * p + q, p))
}

/// p/q with q ≤ qmax and |x − p/q| < tol, choosing the smallest q.
pub fn rational_approx(x: f64, qmax: i64, tol: f64) -> Option<(i64, i64)> {
    let (p, q) = simplest_in_interval(x - tol, x + tol, qmax)?;
    let g = gcd(p, q).max(1);
    Some((p / g, q / g))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gcd_lcm() {
        assert_eq!(gcd(12, -18), 6);
        assert_eq!(lcm(4, 6), 12);
        assert_eq!(lcm(0, 3), 0);
    }

    #[test]
    fn simple_fractions_are_found() {
        assert_eq!(rational_approx(0.5, 64, 1e-9), Some((1, 2)));
        assert_eq!(rational_approx(-0.5, 64, 1e-9), Some((-1, 2)));
        assert_eq!(rational_approx(2.0 / 7.0, 64, 1e-9), Some((2, 7)));
        assert_eq!(rational_approx(-13.0 / 11.0, 64, 1e-9), Some((-13, 11)));
        assert_eq!(rational_approx(3.0, 64, 1e-9), Some((3, 1)));
        assert_eq!(rational_approx(0.0, 64, 1e-9), Some((0, 1)));
    }

    #[test]
    fn irrationals_are_rejected() {
        assert_eq!(rational_approx(std::f64::consts::SQRT_2, 64, 1e-9), None);
        assert_eq!(rational_approx(1.0 / std::f64::consts::PI, 64, 1e-9), None);
    }

    #[test]
    fn smallest_denominator_wins() {
        // 0.3333 ± 0.01 contains 1/3 and many others.
        assert_eq!(simplest_in_interval(0.3233, 0.3433, 100), Some((1, 3)));
        assert_eq!(simplest_in_interval(0.6, 0.7, 100), Some((2, 3)));
    }
}
