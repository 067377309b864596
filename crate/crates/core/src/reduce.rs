//! Fixed-order compensated summation.
//!
//! Every quadrature and sample average in the crate funnels through
//! [`ordered_sum`], so results are bit-reproducible for a given input order.

/// Neumaier-compensated sum, reduced strictly left to right.
pub fn ordered_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Arithmetic mean via [`ordered_sum`]; `None` for an empty input.
pub fn ordered_mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(ordered_sum(values.iter().copied()) / values.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensates_cancellation() {
        let v = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(ordered_sum(v), 2.0);
    }

    #[test]
    fn repeated_constant_mean_is_exact() {
        let c = 2f64.ln();
        let v = vec![c; 100_000];
        assert_eq!(ordered_mean(&v), Some(c));
        assert_eq!(ordered_mean(&[]), None);
    }
}
