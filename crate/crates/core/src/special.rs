//! Special functions backing the t- and F-distribution p-values.
//!
//! Both tails reduce to the regularized incomplete beta function, evaluated
//! with a Lentz-style continued fraction. Accuracy is in the 1e-13 range
//! over the degrees of freedom this crate encounters; the test suite checks
//! the resulting p-values against an independent quadrature oracle.

/// Lanczos coefficients, g = 7, n = 9.
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "ln_gamma requires x > 0, got {x}");
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1−x) = π / sin(πx)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn betacf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 400;
    const EPS: f64 = 1e-15;
    const FPMIN: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let mf = m as f64;
        let m2 = 2.0 * mf;
        // even step
        let aa = mf * (b - mf) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        // odd step
        let aa = -(a + mf) * (qab + mf) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b) for a, b > 0, x in [0, 1].
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0, "reg_inc_beta requires a, b > 0");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_bt = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let bt = ln_bt.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        bt * betacf(a, b, x) / a
    } else {
        1.0 - bt * betacf(b, a, 1.0 - x) / b
    }
}

/// Two-sided p-value of a Student t statistic with `df` degrees of freedom:
/// P(|T| >= |t|) = I_{df/(df+t²)}(df/2, 1/2).
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    debug_assert!(df > 0.0);
    if !t.is_finite() {
        return 0.0;
    }
    reg_inc_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Survival function of the F distribution: P(F >= f) with (d1, d2) degrees
/// of freedom, computed as I_{d2/(d2+d1·f)}(d2/2, d1/2).
pub fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    debug_assert!(d1 > 0.0 && d2 > 0.0);
    if f <= 0.0 {
        return 1.0;
    }
    if !f.is_finite() {
        return 0.0;
    }
    reg_inc_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn ln_gamma_reference_values() {
        // Γ(0.5) = √π, Γ(1) = 1, and two long-precision references.
        assert!(close(ln_gamma(0.5), 0.5723649429247, 1e-13));
        assert!(ln_gamma(1.0).abs() < 1e-13);
        assert!(close(ln_gamma(3.7), 1.428072326665388, 1e-13));
        assert!(close(ln_gamma(10.5), 13.940625219403763, 1e-13));
        assert!(close(ln_gamma(171.0), 706.5730622457875, 1e-13));
    }

    #[test]
    fn ln_gamma_recurrence() {
        // Γ(x+1) = xΓ(x)
        for &x in &[0.3, 1.7, 4.2, 25.0] {
            let lhs = ln_gamma(x + 1.0);
            let rhs = ln_gamma(x) + (x as f64).ln();
            assert!(close(lhs, rhs, 1e-12), "x={x}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn inc_beta_reference_values() {
        assert!(close(reg_inc_beta(0.5, 0.5, 0.3), 0.36901011956554536, 1e-12));
        assert!(close(reg_inc_beta(5.0, 3.0, 0.7), 0.6470695, 1e-12));
        assert!(close(reg_inc_beta(1.0, 1.0, 0.25), 0.25, 1e-14));
        assert!(close(reg_inc_beta(30.0, 0.5, 0.99), 0.43933436890525074, 1e-12));
    }

    #[test]
    fn inc_beta_bounds_and_symmetry() {
        assert_eq!(reg_inc_beta(2.0, 3.0, 0.0), 0.0);
        assert_eq!(reg_inc_beta(2.0, 3.0, 1.0), 1.0);
        // I_x(a,b) + I_{1-x}(b,a) = 1
        for &(a, b, x) in &[(2.0, 3.0, 0.4), (0.5, 7.0, 0.1), (12.0, 1.5, 0.85)] {
            let s = reg_inc_beta(a, b, x) + reg_inc_beta(b, a, 1.0 - x);
            assert!((s - 1.0).abs() < 1e-13, "a={a} b={b} x={x}: {s}");
        }
    }

    #[test]
    fn t_p_reference_values() {
        assert!(close(student_t_two_sided_p(2.5, 7.0), 0.040992218585752874, 1e-12));
        assert!(close(student_t_two_sided_p(0.3, 3.0), 0.783763292039919, 1e-12));
        assert!(close(student_t_two_sided_p(1.0, 1.0), 0.5, 1e-12));
        assert!(close(
            student_t_two_sided_p(12.0, 58.0),
            2.3615708349395218e-17,
            1e-9
        ));
        assert_eq!(student_t_two_sided_p(0.0, 10.0), 1.0);
        assert_eq!(student_t_two_sided_p(f64::MAX, 10.0), 0.0);
    }

    #[test]
    fn f_sf_reference_values() {
        assert!(close(f_sf(13.5, 1.0, 4.0), 0.02131164112875672, 1e-12));
        assert!(close(f_sf(3.2, 2.0, 17.0), 0.06614256666642138, 1e-12));
        assert!(close(f_sf(0.5, 3.0, 8.0), 0.6926248669438462, 1e-12));
        assert_eq!(f_sf(0.0, 2.0, 5.0), 1.0);
    }

    #[test]
    fn t_and_f_tails_agree_for_one_numerator_df() {
        // P(F(1, ν) >= t²) equals the two-sided t tail with ν df.
        for &(t, df) in &[(1.3, 6.0), (2.9, 23.0), (0.4, 3.0)] {
            let pt = student_t_two_sided_p(t, df);
            let pf = f_sf(t * t, 1.0, df);
            assert!(close(pt, pf, 1e-12), "t={t} df={df}: {pt} vs {pf}");
        }
    }
}
