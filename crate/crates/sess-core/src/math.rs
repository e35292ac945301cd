//! Float helpers routed through `libm` so results are bit-identical across
//! platforms and across std/no_std builds.

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    // Correctly rounded per IEEE 754, so hardware sqrt would give the same
    // bits; going through libm keeps the no_std path on one code path.
    libm::sqrt(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

/// Logistic function `1 / (1 + e^{-t})`, saturating cleanly at 0 and 1.
#[inline]
pub(crate) fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + exp(-t))
}
