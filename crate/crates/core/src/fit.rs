//! Small fitting and quadrature helpers shared by the diagnostics modules.

use alloc::vec::Vec;

use crate::math;

/// Ordinary least squares for y = a + b·x.
///
/// Returns `(intercept, slope, slope_se)` where `slope_se` is the standard
/// error of the slope (zero when fewer than three points).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let se = if n > 2 {
        let mut ssr = 0.0;
        for (&x, &y) in xs.iter().zip(ys) {
            let r = y - intercept - slope * x;
            ssr += r * r;
        }
        math::sqrt(ssr / ((nf - 2.0) * sxx))
    } else {
        0.0
    };
    Some((intercept, slope, se))
}

/// Log-log power-law fit y ≈ C·x^p over strictly positive samples.
///
/// Returns `(p, half_width, ln_c)`; the half width is twice the standard
/// error of the fitted exponent.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for (&x, &y) in xs.iter().zip(ys) {
        if x > 0.0 && y > 0.0 {
            lx.push(math::ln(x));
            ly.push(math::ln(y));
        }
    }
    let (c, p, se) = linear_fit(&lx, &ly)?;
    Some((p, 2.0 * se, c))
}

/// Number of decades spanned by the positive entries of `xs`.
pub fn decades(xs: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for &x in xs {
        if x > 0.0 {
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    if hi <= 0.0 || !lo.is_finite() || lo <= 0.0 {
        return 0.0;
    }
    math::ln(hi / lo) / core::f64::consts::LN_10
}

/// Median of a slice (the slice is copied and sorted).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Robust noise scale: 1.4826 × median absolute deviation from the median.
pub fn mad_sigma(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let m = median(values);
    let dev: Vec<f64> = values.iter().map(|&v| math::abs(v - m)).collect();
    1.4826 * median(&dev)
}

/// Composite Simpson rule for `f` on [a, b] with `n` (even) subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Trapezoid rule over uniformly spaced samples.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    h * (0.5 * values[0] + inner + 0.5 * values[values.len() - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fit_recovers_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let (a, b, se) = linear_fit(&xs, &ys).unwrap();
        assert!((a - 1.0).abs() < 1e-12);
        assert!((b - 2.0).abs() < 1e-12);
        assert!(se < 1e-12);
    }

    #[test]
    fn loglog_fit_recovers_power() {
        let xs: alloc::vec::Vec<f64> = (1..40).map(|i| i as f64 * 0.1).collect();
        let ys: alloc::vec::Vec<f64> = xs.iter().map(|&x| 3.0 * math::powf(x, 2.5)).collect();
        let (p, hw, lnc) = loglog_fit(&xs, &ys).unwrap();
        assert!((p - 2.5).abs() < 1e-10);
        assert!(hw < 1e-9);
        assert!((math::exp(lnc) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn simpson_integrates_cubic_exactly() {
        let v = simpson(|x| x * x * x, 0.0, 2.0, 16);
        assert!((v - 4.0).abs() < 1e-12);
    }

    #[test]
    fn median_and_mad() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(mad_sigma(&[1.0, 1.0, 1.0]) == 0.0);
    }
}
