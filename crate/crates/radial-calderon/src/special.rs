//! Special functions used by the closed-form families and the radial
//! Fourier kernel.
//!
//! Bessel functions are restricted to the orders this crate needs: integer
//! and half-integer orders of `J`, plus `I_1`.

use statrs::function::gamma::{gamma, ln_gamma};
use std::f64::consts::PI;

/// Argument below which power series are used.
const SERIES_LIMIT: f64 = 12.0;

/// Surface area of the unit sphere in `R^d`, `2 pi^{d/2} / Gamma(d/2)`.
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    (2.0f64.ln() + h * PI.ln() - ln_gamma(h)).exp()
}

pub fn ln_gamma_fn(x: f64) -> f64 {
    ln_gamma(x)
}

pub fn gamma_fn(x: f64) -> f64 {
    gamma(x)
}

/// Power series for `J_nu(x)`, accurate for moderate `x`.
fn bessel_j_series(nu: f64, x: f64) -> f64 {
    if x == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    let half = x / 2.0;
    let y = -half * half;
    let mut term = (nu * half.ln() - ln_gamma(nu + 1.0)).exp();
    let mut sum = term;
    for m in 1..500 {
        let mf = m as f64;
        term *= y / (mf * (mf + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() && mf > half {
            break;
        }
    }
    sum
}

/// `J_n(x)` for integer `n` through the trapezoid rule on Bessel's integral,
/// which converges geometrically once the node count exceeds `n + x`.
fn bessel_jn_integral(n: u32, x: f64) -> f64 {
    let nf = n as f64;
    let count = (nf + x + 10.0 * x.cbrt() + 40.0).ceil() as usize;
    let h = 2.0 * PI / count as f64;
    let mut sum = 0.0;
    for i in 0..count {
        let tau = i as f64 * h;
        sum += (nf * tau - x * tau.sin()).cos();
    }
    sum / count as f64
}

fn is_half_integer(nu: f64) -> bool {
    (nu - nu.floor() - 0.5).abs() < 1e-12
}

fn is_integer(nu: f64) -> bool {
    (nu - nu.round()).abs() < 1e-12
}

/// The two lowest members of the order ladder with fractional part `frac`.
fn ladder_base(frac: f64, x: f64) -> (f64, f64) {
    if frac == 0.0 {
        if x <= SERIES_LIMIT {
            (bessel_j_series(0.0, x), bessel_j_series(1.0, x))
        } else {
            (bessel_jn_integral(0, x), bessel_jn_integral(1, x))
        }
    } else {
        let c = (2.0 / (PI * x)).sqrt();
        let (s, co) = x.sin_cos();
        (c * s, c * (s / x - co))
    }
}

/// Values `J_{frac+m}(x)` for `m = 0..=nmax`, where `frac` is `0` or `1/2`.
///
/// Upward recurrence is used up to the turning index `floor(x)`, Miller's
/// backward recurrence above it, matched at the turning index.
pub fn bessel_j_ladder(frac: f64, x: f64, nmax: usize) -> Vec<f64> {
    assert!(frac == 0.0 || frac == 0.5, "ladder fraction must be 0 or 1/2");
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        if frac == 0.0 {
            out[0] = 1.0;
        }
        return out;
    }
    let (j0, j1) = ladder_base(frac, x);
    out[0] = j0;
    if nmax == 0 {
        return out;
    }
    out[1] = j1;
    let turn = (x.floor() as usize).clamp(1, nmax);
    for m in 1..turn {
        let order = frac + m as f64;
        out[m + 1] = 2.0 * order / x * out[m] - out[m - 1];
    }
    if turn >= nmax {
        return out;
    }
    let start = nmax + 20 + (2.0 * ((nmax as f64).max(x) * 20.0).sqrt()) as usize;
    let mut above = 0.0;
    let mut cur = 1e-300;
    let mut tail = vec![0.0; nmax + 1];
    for m in (turn..start).rev() {
        // cur holds J_{frac+m+1}, compute J_{frac+m}.
        let order = frac + (m + 1) as f64;
        let next = 2.0 * order / x * cur - above;
        above = cur;
        cur = next;
        if m <= nmax {
            tail[m] = cur;
        }
        if cur.abs() > 1e250 {
            let scale = 1e-250;
            cur *= scale;
            above *= scale;
            for v in tail.iter_mut() {
                *v *= scale;
            }
        }
    }
    let scale = out[turn] / tail[turn];
    for m in turn + 1..=nmax {
        out[m] = tail[m] * scale;
    }
    out
}

/// Bessel function `J_nu(x)` for `x >= 0` and integer or half-integer `nu >= 0`.
pub fn bessel_j(nu: f64, x: f64) -> f64 {
    assert!(x >= 0.0, "bessel_j needs a nonnegative argument");
    if x <= SERIES_LIMIT {
        return bessel_j_series(nu, x);
    }
    if is_integer(nu) {
        return bessel_jn_integral(nu.round() as u32, x);
    }
    assert!(is_half_integer(nu), "bessel_j supports integer and half-integer orders");
    let m = nu.floor() as usize;
    bessel_j_ladder(0.5, x, m)[m]
}

pub fn bessel_j1(x: f64) -> f64 {
    if x < 0.0 {
        -bessel_j(1.0, -x)
    } else {
        bessel_j(1.0, x)
    }
}

/// Modified Bessel function `I_1(x)`.
pub fn bessel_i1(x: f64) -> f64 {
    if x < 0.0 {
        return -bessel_i1(-x);
    }
    if x <= 30.0 {
        let half = x / 2.0;
        let y = half * half;
        let mut term = half;
        let mut sum = term;
        for m in 1..400 {
            let mf = m as f64;
            term *= y / (mf * (mf + 1.0));
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        return sum;
    }
    // Large-argument expansion with mu = 4 nu^2 = 4.
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..40 {
        let odd = (2 * k - 1) as f64;
        term *= -(4.0 - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() < 1e-17 {
            break;
        }
        sum += term;
    }
    x.exp() / (2.0 * PI * x).sqrt() * sum
}

/// The radial Fourier kernel `Gamma(d/2) (2/z)^{d/2-1} J_{d/2-1}(z)`,
/// normalized to 1 at `z = 0`: `sin z / z` for `d = 3`, `J_0` for `d = 2`.
pub fn radial_kernel(d: usize, z: f64) -> f64 {
    let nu = d as f64 / 2.0 - 1.0;
    if z.abs() < 1e-8 {
        return 1.0 - z * z / (4.0 * (nu + 1.0));
    }
    match d {
        1 => z.cos(),
        3 => z.sin() / z,
        _ => (ln_gamma(nu + 1.0) + nu * (2.0 / z).ln()).exp() * bessel_j(nu, z),
    }
}

/// `C(n, k)` as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(2), 2.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(3), 4.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(4), 2.0 * PI * PI, max_relative = 1e-14);
    }

    #[test]
    fn reference_bessel_values() {
        // Reference values from standard tables.
        assert_relative_eq!(bessel_j(1.0, 2.0), 0.576_724_807_756_873_4, max_relative = 1e-13);
        assert_relative_eq!(bessel_j(0.0, 1.0), 0.765_197_686_557_966_6, max_relative = 1e-13);
        assert_relative_eq!(bessel_j(0.0, 20.0), 0.167_024_664_340_583_1, max_relative = 1e-11);
        assert_relative_eq!(bessel_j(1.0, 50.0), -0.097_511_828_125_175_14, max_relative = 1e-11);
        assert_relative_eq!(bessel_j(5.0, 30.0), -0.143_240_295_512_077_06, max_relative = 1e-11);
        assert_relative_eq!(bessel_i1(1.0), 0.565_159_103_992_485, max_relative = 1e-13);
        assert_relative_eq!(bessel_i1(40.0), 1.470_739_616_325_934_2e16, max_relative = 1e-11);
    }

    #[test]
    fn half_integer_orders_match_closed_forms() {
        for &x in &[0.3, 2.0, 11.0, 13.0, 40.0] {
            let c: f64 = (2.0 / (PI * x)).sqrt();
            let j32 = c * (x.sin() / x - x.cos());
            let j52 = c * ((3.0 / (x * x) - 1.0) * x.sin() - 3.0 * x.cos() / x);
            assert!((bessel_j(1.5, x) - j32).abs() < 1e-12, "x={x}");
            assert!((bessel_j(2.5, x) - j52).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn ladder_matches_series_and_integral() {
        for &x in &[0.5, 3.0, 9.5, 14.0, 27.0] {
            let ints = bessel_j_ladder(0.0, x, 45);
            let halves = bessel_j_ladder(0.5, x, 45);
            for m in 0..=45 {
                let reference = if x <= SERIES_LIMIT {
                    bessel_j_series(m as f64, x)
                } else {
                    bessel_jn_integral(m as u32, x)
                };
                assert!((ints[m] - reference).abs() < 1e-12, "x={x}, m={m}");
                let h = bessel_j_series(m as f64 + 0.5, x);
                if x <= SERIES_LIMIT {
                    assert!((halves[m] - h).abs() < 1e-12, "x={x}, m={m}");
                }
            }
        }
    }

    #[test]
    fn kernel_normalization() {
        assert_relative_eq!(radial_kernel(3, 1.3), 1.3f64.sin() / 1.3, max_relative = 1e-15);
        assert_relative_eq!(radial_kernel(2, 1.3), bessel_j(0.0, 1.3), max_relative = 1e-14);
        assert_relative_eq!(radial_kernel(5, 1e-10), 1.0);
        // d = 4: 2 J_1(z)/z.
        assert_relative_eq!(radial_kernel(4, 2.0), bessel_j(1.0, 2.0), max_relative = 1e-13);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(10, 3), 120.0);
        assert_eq!(binomial(4, 5), 0.0);
        assert_eq!(binomial(30, 15), 155_117_520.0);
    }
}
