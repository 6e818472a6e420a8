//! Small special-function kernels needed by the sampling oracle.

/// Digamma function psi(x) for x > 0.
///
/// The recurrence psi(x+1) = psi(x) + 1/x shifts the argument above 10, where
/// the asymptotic expansion
///
/// psi(x) ~ ln x - 1/(2x) - 1/(12x^2) + 1/(120x^4) - 1/(252x^6) + ...
///
/// converges to well below 1e-12 absolute (the first dropped term at x = 10
/// is ~2e-14). Arguments here are Gamma shapes l_r + j >= 1, but any positive
/// input is accepted.
pub fn digamma(x: f64) -> f64 {
    assert!(x > 0.0, "digamma requires a positive argument, got {x}");
    let mut shift = 0.0;
    let mut x = x;
    while x < 10.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Coefficients are -B_{2k}/(2k) for Bernoulli numbers B_2..B_10.
    let tail = inv2
        * (-1.0 / 12.0
            + inv2
                * (1.0 / 120.0
                    + inv2 * (-1.0 / 252.0 + inv2 * (1.0 / 240.0 + inv2 * (-1.0 / 132.0)))));
    shift + x.ln() - 0.5 * inv + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    const EULER: f64 = 0.577_215_664_901_532_9;

    /// Closed-form oracle at integers: psi(m) = -EULER + H_{m-1}.
    fn digamma_integer(m: u64) -> f64 {
        -EULER + (1..m).map(|k| 1.0 / k as f64).sum::<f64>()
    }

    /// Closed-form oracle at half-integers:
    /// psi(m + 1/2) = -EULER - 2 ln 2 + 2 sum_{k=1}^{m} 1/(2k-1).
    fn digamma_half_integer(m: u64) -> f64 {
        -EULER - 2.0 * std::f64::consts::LN_2
            + 2.0 * (1..=m).map(|k| 1.0 / (2 * k - 1) as f64).sum::<f64>()
    }

    #[test]
    fn matches_known_values() {
        // psi(1) = -EULER, psi(2) = 1 - EULER, psi(4) = 11/6 - EULER.
        assert!((digamma(1.0) + EULER).abs() < 1e-13);
        assert!((digamma(2.0) - (1.0 - EULER)).abs() < 1e-13);
        assert!((digamma(4.0) - (11.0 / 6.0 - EULER)).abs() < 1e-13);
        // Frozen spot values used throughout the oracle tests.
        assert!((digamma(2.0) - 0.422_784_335_098_467_1).abs() < 1e-12);
        assert!((digamma(4.0) - 1.256_117_668_431_800_5).abs() < 1e-12);
    }

    #[test]
    fn matches_harmonic_oracle() {
        for m in 1..=50u64 {
            let got = digamma(m as f64);
            let want = digamma_integer(m);
            assert!((got - want).abs() < 1e-12, "digamma({m}): {got} vs {want}");
        }
        for &m in &[400u64, 2000, 100_000] {
            assert!((digamma(m as f64) - digamma_integer(m)).abs() < 1e-11);
        }
        for m in 0..=30u64 {
            let x = m as f64 + 0.5;
            let got = digamma(x);
            let want = digamma_half_integer(m);
            assert!((got - want).abs() < 1e-12, "digamma({x}): {got} vs {want}");
        }
    }

    #[test]
    fn recurrence_holds() {
        for i in 1..200 {
            let x = i as f64 * 0.25 + 0.1;
            let lhs = digamma(x + 1.0);
            let rhs = digamma(x) + 1.0 / x;
            assert!((lhs - rhs).abs() < 1e-12, "recurrence at {x}");
        }
    }

    #[test]
    fn approaches_log_for_large_arguments() {
        // psi(t) - ln t = -1/(2t) + O(1/t^2).
        for &t in &[1e3, 1e5, 1e7] {
            let gap = digamma(t) - t.ln();
            assert!((gap + 0.5 / t).abs() < 1.0 / (t * t));
        }
    }

    #[test]
    #[should_panic(expected = "positive")]
    fn rejects_nonpositive() {
        digamma(0.0);
    }
}
