//! Float math shim (std or libm) plus the numerically delicate scalar
//! helpers shared by the closed-form solvers, and the deterministic
//! fixed-shape reductions used by the Monte Carlo estimators.

#[cfg(feature = "std")]
macro_rules! shim {
    ($name:ident, $std:ident, $libm:ident) => {
        #[inline(always)]
        pub(crate) fn $name(x: f64) -> f64 {
            f64::$std(x)
        }
    };
}

#[cfg(not(feature = "std"))]
macro_rules! shim {
    ($name:ident, $std:ident, $libm:ident) => {
        #[inline(always)]
        pub(crate) fn $name(x: f64) -> f64 {
            libm::$libm(x)
        }
    };
}

shim!(exp, exp, exp);
shim!(expm1, exp_m1, expm1);
shim!(ln, ln, log);
shim!(sqrt, sqrt, sqrt);
shim!(sinh, sinh, sinh);
shim!(tanh, tanh, tanh);
shim!(cos, cos, cos);

#[inline(always)]
pub(crate) fn abs(x: f64) -> f64 {
    f64::from_bits(x.to_bits() & !(1u64 << 63))
}

/// coth(z) = 1/tanh(z). IEEE semantics give +inf at z = 0+, which is the
/// correct limit for every place this is used.
#[inline(always)]
pub(crate) fn coth(z: f64) -> f64 {
    1.0 / tanh(z)
}

/// The shape denominator `z - 2 tanh(z/2)`, computed without cancellation.
///
/// Below z = 0.1 the direct difference loses ~4 leading digits, so a series
/// (error < 1e-15 relative at the cutoff) takes over:
/// z^3/12 * (1 - z^2/10 + 17 z^4/1680 - 31 z^6/30240 + 691 z^8/6652800).
pub(crate) fn shape_denom(z: f64) -> f64 {
    if z < 0.1 {
        let z2 = z * z;
        z * z2 / 12.0
            * (1.0
                + z2 * (-1.0 / 10.0
                    + z2 * (17.0 / 1680.0 + z2 * (-31.0 / 30240.0 + z2 * (691.0 / 6652800.0)))))
    } else {
        z - 2.0 * tanh(0.5 * z)
    }
}

/// sinh(a)/sinh(b) for 0 <= a <= b, stable for arbitrarily large b.
///
/// Uses exp(a-b) * expm1(-2a) / expm1(-2b); never forms sinh of a large
/// argument, so parameter sweeps cannot overflow.
#[inline]
pub(crate) fn sinh_ratio(a: f64, b: f64) -> f64 {
    debug_assert!(a >= 0.0 && b > 0.0 && a <= b * (1.0 + 1e-12));
    if a == 0.0 {
        return 0.0;
    }
    exp(a - b) * (expm1(-2.0 * a) / expm1(-2.0 * b))
}

/// cosh(a)/sinh(b) for 0 <= a <= b, stable for arbitrarily large b.
#[inline]
pub(crate) fn cosh_sinh_ratio(a: f64, b: f64) -> f64 {
    debug_assert!(a >= 0.0 && b > 0.0 && a <= b * (1.0 + 1e-12));
    exp(a - b) * ((1.0 + exp(-2.0 * a)) / -expm1(-2.0 * b))
}

/// Compensated (Kahan) sequential sum of a short slice.
fn kahan_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for &x in xs {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

const PAIRWISE_LEAF: usize = 128;

/// Deterministic fixed-shape pairwise sum with compensated leaves.
///
/// The reduction tree depends only on the slice length, so the result is
/// bit-identical no matter how the entries were produced (serial or by any
/// number of workers) and carries O(log n) rounding growth.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_LEAF {
        kahan_sum(xs)
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Mean via the fixed-shape pairwise sum.
pub fn pairwise_mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

#[cfg(test)]
mod tests {
    // reference constants carry their full 40-digit provenance
    #![allow(clippy::excessive_precision)]

    use super::*;

    #[test]
    fn shape_denom_matches_reference() {
        // (z, z - 2tanh(z/2)) evaluated at 30 significant digits.
        let cases = [
            (1e-4, 8.3333333250000000084e-14),
            (0.01, 8.3332500008432454256e-8),
            (0.05, 1.0414063158625353995e-5),
            (0.099, 8.0779079347993080754e-5),
            (0.1, 8.3250084240055603227e-5),
            (0.2, 6.6401075008836576339e-4),
            (0.5, 1.0162675192581741444e-2),
            (1.0, 7.5765685479980482995e-2),
            (2.0, 4.7681168808847022376e-1),
            (5.0, 3.0267714036971394222),
        ];
        for (z, want) in cases {
            let got = shape_denom(z);
            // series branch is ~1e-15 accurate; the direct branch loses
            // z^2/12 of a digit budget to cancellation, worst at z = 0.1.
            let tol = if z < 0.1 { 2e-14 } else { 5e-13 };
            assert!(
                abs(got - want) <= tol * want,
                "shape_denom({z}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn sinh_ratios_match_direct_evaluation() {
        for &(a, b) in &[(0.3, 1.7), (0.0, 2.0), (1.0, 1.0), (1e-8, 0.5), (4.0, 9.0)] {
            let want = f64::sinh(a) / f64::sinh(b);
            let got = sinh_ratio(a, b);
            assert!(abs(got - want) <= 1e-14 * (1.0 + want), "a={a} b={b}");
            let want_c = f64::cosh(a) / f64::sinh(b);
            let got_c = cosh_sinh_ratio(a, b);
            assert!(abs(got_c - want_c) <= 1e-14 * (1.0 + want_c), "a={a} b={b}");
        }
    }

    #[test]
    fn sinh_ratio_survives_huge_arguments() {
        // sinh(a)/sinh(b) -> exp(a-b) for large a, b; direct sinh overflows.
        let r = sinh_ratio(900.0, 1000.0);
        assert!(abs(r - exp(-100.0)) <= 1e-14 * exp(-100.0));
        assert!(sinh_ratio(0.0, 5000.0) == 0.0);
        assert!(sinh_ratio(5000.0, 5000.0) == 1.0);
    }

    #[test]
    fn pairwise_sum_is_fixed_shape_and_accurate() {
        let xs: alloc::vec::Vec<f64> = (0..100_000)
            .map(|i| ((i * 2654435761u64 as usize) % 1000) as f64 * 1e-3 - 0.4995)
            .collect();
        let a = pairwise_sum(&xs);
        let b = pairwise_sum(&xs);
        assert_eq!(a.to_bits(), b.to_bits());
        // against a widened reference
        let exact: f64 = {
            let mut acc = 0f64;
            let mut c = 0f64;
            for &x in &xs {
                let y = x - c;
                let t = acc + y;
                c = (t - acc) - y;
                acc = t;
            }
            acc
        };
        assert!(abs(a - exact) <= 1e-9 * (1.0 + abs(exact)));
    }
}
