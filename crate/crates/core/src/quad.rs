//! Small quadrature helpers used for marginals, overlaps and centroids.

use crate::scalar::Real;

/// Evenly spaced points `lo, lo + h, ..., hi` (inclusive), `n >= 2`.
pub fn linspace<R: Real>(lo: R, hi: R, n: usize) -> Vec<R> {
    assert!(n >= 2, "linspace needs at least two points");
    let h = (hi - lo) / R::from_usize_lossy(n - 1);
    (0..n).map(|i| lo + h * R::from_usize_lossy(i)).collect()
}

/// Composite trapezoid rule on `n` equally spaced nodes.
///
/// For smooth integrands that decay to zero at both ends (Gaussians) this is
/// spectrally accurate, which is why it is the default here.
pub fn trapezoid<R: Real, F: FnMut(R) -> R>(lo: R, hi: R, n: usize, mut f: F) -> R {
    assert!(n >= 2, "trapezoid needs at least two nodes");
    let h = (hi - lo) / R::from_usize_lossy(n - 1);
    let half = R::lit(0.5);
    let mut acc = half * (f(lo) + f(hi));
    for i in 1..n - 1 {
        acc += f(lo + h * R::from_usize_lossy(i));
    }
    acc * h
}

/// Composite Simpson rule; `n` is rounded up to an odd node count.
pub fn simpson<R: Real, F: FnMut(R) -> R>(lo: R, hi: R, n: usize, mut f: F) -> R {
    let n = if n.is_multiple_of(2) { n + 1 } else { n.max(3) };
    let h = (hi - lo) / R::from_usize_lossy(n - 1);
    let mut acc = f(lo) + f(hi);
    for i in 1..n - 1 {
        let w = if i % 2 == 1 { R::lit(4.0) } else { R::lit(2.0) };
        acc += w * f(lo + h * R::from_usize_lossy(i));
    }
    acc * h / R::lit(3.0)
}
