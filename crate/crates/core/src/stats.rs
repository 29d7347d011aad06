//! Small descriptive statistics shared by the experiment code.

use crate::scalar::Real;

/// Least-squares line through `(x_i, y_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit<T> {
    pub slope: T,
    pub intercept: T,
    /// Root-mean-square residual.
    pub residual: T,
}

/// `None` with fewer than two points or when all `x` coincide.
pub fn fit_line<T: Real>(xs: &[T], ys: &[T]) -> Option<LineFit<T>> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let nn = T::from_count(n);
    let mx = xs[..n].iter().copied().sum::<T>() / nn;
    let my = ys[..n].iter().copied().sum::<T>() / nn;
    let sxx: T = xs[..n].iter().map(|&x| (x - mx) * (x - mx)).sum();
    if !(sxx > T::zero()) {
        return None;
    }
    let sxy: T = xs[..n].iter().zip(&ys[..n]).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: T = xs[..n]
        .iter()
        .zip(&ys[..n])
        .map(|(&x, &y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    Some(LineFit { slope, intercept, residual: (ss / nn).sqrt() })
}

pub fn mean<T: Real>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::nan();
    }
    xs.iter().copied().sum::<T>() / T::from_count(xs.len())
}

/// Standard deviation with the `n - 1` denominator, so two values `{a, b}`
/// give `|a - b| / sqrt(2)`. Zero for a single value.
pub fn std_dev<T: Real>(xs: &[T]) -> T {
    if xs.len() < 2 {
        return T::zero();
    }
    let m = mean(xs);
    let var = xs.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::from_count(xs.len() - 1);
    var.sqrt()
}
