//! Thin wrappers over `libm` so the rest of the crate stays `no_std`-clean.

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn powf(x: f64, p: f64) -> f64 {
    libm::pow(x, p)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

/// ln⁺(x) = max(ln x, 0), with ln⁺(x) = 0 for x ≤ 1 (including x ≤ 0).
#[inline]
pub fn ln_plus(x: f64) -> f64 {
    if x > 1.0 {
        ln(x)
    } else {
        0.0
    }
}

/// Positive part.
#[inline]
pub fn pos(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Maximum of a slice; NaNs propagate. Empty slices return −∞.
pub fn sup(values: &[f64]) -> f64 {
    values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
}

/// Minimum of a slice; empty slices return +∞.
pub fn inf(values: &[f64]) -> f64 {
    values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
}

/// Sup norm of a slice.
pub fn sup_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, &v| m.max(abs(v)))
}
