//! Chi-square tail probabilities and quantiles.
//!
//! The regularized incomplete gamma function is evaluated by its power
//! series for `x < a + 1` and by the Lentz continued fraction for the upper
//! tail otherwise; `ln Γ` uses the Lanczos approximation (g = 7, 9 terms).
//! Quantiles are found by bracketing and bisection on the upper tail to a
//! relative width of `1e-14`, which leaves the result accurate to better
//! than `1e-8` for every `dof ≤ 1024`.

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn prefactor(a: f64, x: f64) -> f64 {
    (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..10_000 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum * prefactor(a, x)
}

fn q_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    prefactor(a, x) * h
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x < a + 1.0 {
        p_series(a, x)
    } else {
        1.0 - q_continued_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 − P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x < a + 1.0 {
        1.0 - p_series(a, x)
    } else {
        q_continued_fraction(a, x)
    }
}

/// `P(X > x)` for `X ~ χ²(dof)`.
pub fn chi_square_sf(x: f64, dof: usize) -> f64 {
    gamma_q(dof as f64 / 2.0, x / 2.0)
}

/// The `x` with `P(X > x) = tail` for `X ~ χ²(dof)`, `0 < tail < 1`.
pub fn chi_square_upper_quantile(tail: f64, dof: usize) -> f64 {
    assert!(dof >= 1 && tail > 0.0 && tail < 1.0);
    let mut lo = 0.0;
    let mut hi = dof as f64 + 10.0;
    while chi_square_sf(hi, dof) > tail {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-14 * hi {
        let mid = 0.5 * (lo + hi);
        if chi_square_sf(mid, dof) > tail {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
    }

    // Reference values from scipy.special.gammainc / gammaincc.
    #[test]
    fn incomplete_gamma_reference() {
        assert!((gamma_p(2.5, 1.7) - 0.36143007689620493).abs() < 1e-13);
        assert!((gamma_q(10.0, 20.0) - 0.0049954123083075785).abs() < 1e-14);
        assert!((gamma_p(0.5, 0.01) - 0.11246291601828491).abs() < 1e-13);
    }

    // Reference values from scipy.stats.chi2.ppf(1 - 1e-4, dof).
    #[test]
    fn quantile_reference() {
        let table = [
            (1, 15.136705226623606),
            (2, 18.420680743952584),
            (3, 21.107513466160444),
            (5, 25.74483195905612),
            (10, 35.564013941952396),
            (50, 95.96874847816385),
            (100, 161.31865695904807),
            (1024, 1200.9168257209435),
        ];
        for (dof, want) in table {
            let got = chi_square_upper_quantile(1e-4, dof);
            assert!((got - want).abs() < 1e-8, "dof {dof}: {got} vs {want}");
        }
    }
}
