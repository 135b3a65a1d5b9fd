//! Standard normal density, distribution function and inverse Mills ratio.

use libm::erfc;

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Above this argument the Mills ratio is evaluated by continued fraction.
const DIRECT_LIMIT: f64 = 5.0;

pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `ln Φ(x)` without underflow in the lower tail.
pub fn ln_normal_cdf(x: f64) -> f64 {
    if x > 0.0 {
        (-normal_cdf(-x)).ln_1p()
    } else if x > -DIRECT_LIMIT {
        normal_cdf(x).ln()
    } else {
        // Φ(x) = φ(x) / λ(−x)
        -0.5 * x * x - LN_SQRT_2PI - mills_continued_fraction(-x).ln()
    }
}

/// Inverse Mills ratio `λ(u) = φ(u) / Φ(−u)`, the mean of a standard normal
/// truncated to `(u, ∞)`.
///
/// For `u ≤ 5` the ratio is formed directly from the complementary error
/// function; beyond that `Φ(−u)` loses relative precision long before it
/// underflows, so the ratio is evaluated as the continued fraction
/// `u + 1/(u + 2/(u + 3/(u + …)))`. Values below the smallest subnormal
/// (`u` below about −38.6) round to zero.
pub fn inverse_mills(u: f64) -> Result<f64> {
    if u.is_nan() {
        return Err(Error::Domain("inverse Mills ratio of NaN".into()));
    }
    if u.is_infinite() {
        return Err(Error::Domain(format!("inverse Mills ratio of {u}")));
    }
    Ok(inverse_mills_unchecked(u))
}

pub(crate) fn inverse_mills_unchecked(u: f64) -> f64 {
    if u <= DIRECT_LIMIT {
        normal_pdf(u) / normal_cdf(-u)
    } else {
        mills_continued_fraction(u)
    }
}

/// Modified Lentz evaluation of `u + 1/(u + 2/(u + 3/(u + …)))`, valid for `u > 0`.
fn mills_continued_fraction(u: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = u;
    let mut c = u;
    let mut d = 0.0;
    for j in 1..=500 {
        let a = j as f64;
        d = u + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = u + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mills_at_zero() {
        let l = inverse_mills(0.0).unwrap();
        assert!((l - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mills_tails() {
        let l = inverse_mills(-10.0).unwrap();
        assert!((l / 7.694_598_626_706_42e-23 - 1.0).abs() < 1e-12, "{l:e}");
        let l = inverse_mills(10.0).unwrap();
        assert!((l - 10.098_093_233_962_5).abs() < 1e-11, "{l}");
    }

    #[test]
    fn nan_is_rejected() {
        assert!(matches!(inverse_mills(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn branches_agree_at_switch() {
        let direct = normal_pdf(DIRECT_LIMIT) / normal_cdf(-DIRECT_LIMIT);
        let cf = mills_continued_fraction(DIRECT_LIMIT);
        assert!((direct / cf - 1.0).abs() < 1e-13);
    }

    #[test]
    fn log_cdf_continuity() {
        for x in [-5.0 - 1e-9, -5.0, -5.0 + 1e-9, 0.0, 1e-9] {
            let direct = normal_cdf(x).ln();
            assert!((ln_normal_cdf(x) - direct).abs() < 1e-12);
        }
        assert!((ln_normal_cdf(-40.0) - (-804.608_442_013_754_3)).abs() < 1e-9);
    }
}
