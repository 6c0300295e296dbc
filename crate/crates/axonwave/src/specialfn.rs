//! Bessel, Hankel, and modified Bessel functions of orders 0 and 1.
//!
//! Arguments live in the closed first quadrant (`0 <= arg z <= pi/2`), the
//! envelope needed by the DtN coefficients `h(k_m R)` and by the stretched
//! PML arguments `k_m r~`. Three evaluation regimes are used:
//!
//! * power series for `J` and `Y` near the origin and near the real axis,
//! * a quadrature of the modified-Bessel integral representation when the
//!   imaginary part is large enough that `J + iY` would cancel,
//! * the large-argument asymptotic expansion of `H^(1)` for `|z| >= 13`.
//!
//! Real `K_0`, `K_1` use the small-argument series below `t = 2` and a
//! continued fraction (Temme/Steed CF2) above it.

use crate::quad;
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Crossover from series/integral evaluation to the asymptotic expansion.
const ASYMPTOTIC_RADIUS: f64 = 13.0;
/// Above this imaginary part, `J + iY` cancels too much; switch to the
/// modified-Bessel integral connection.
const SERIES_IMAG_LIMIT: f64 = 1.5;

fn check_order(order: u8) -> Result<()> {
    if order > 1 {
        return Err(Error::Domain(format!(
            "only orders 0 and 1 are supported, got {order}"
        )));
    }
    Ok(())
}

/// Bessel function of the first kind, `J_0` or `J_1`, for `x >= 0`.
pub fn bessel_j(order: u8, x: f64) -> Result<f64> {
    check_order(order)?;
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain(format!("bessel_j requires finite x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(if order == 0 { 1.0 } else { 0.0 });
    }
    Ok(hankel1(order, Complex64::new(x, 0.0))?.re)
}

/// Bessel function of the second kind, `Y_0` or `Y_1`, for `x > 0`.
pub fn bessel_y(order: u8, x: f64) -> Result<f64> {
    check_order(order)?;
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("bessel_y requires finite x > 0, got {x}")));
    }
    Ok(hankel1(order, Complex64::new(x, 0.0))?.im)
}

/// Hankel function of the first kind, `H^(1)_0` or `H^(1)_1`, on the closed
/// first quadrant (excluding the origin).
pub fn hankel1(order: u8, z: Complex64) -> Result<Complex64> {
    check_order(order)?;
    if z.re == 0.0 && z.im == 0.0 {
        return Err(Error::Domain(
            "hankel1 is singular at z = 0".to_string(),
        ));
    }
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain("hankel1 requires a finite argument".to_string()));
    }
    let tol = 1e-12 * z.norm();
    if z.im < -tol || z.re < -tol {
        return Err(Error::Domain(format!(
            "hankel1 argument must satisfy 0 <= arg(z) <= pi/2, got {z}"
        )));
    }
    let z = Complex64::new(z.re.max(0.0), z.im.max(0.0));

    if z.norm() >= ASYMPTOTIC_RADIUS {
        return Ok(hankel1_asymptotic(order, z));
    }
    if z.im <= SERIES_IMAG_LIMIT {
        let j = j_series(order, z);
        let y = y_series(order, z);
        return Ok(j + Complex64::i() * y);
    }
    // H_n^(1)(z) = (2/pi) e^{-i pi (n+1)/2} K_n(-i z), valid for arg z in (-pi/2, pi].
    let w = Complex64::new(z.im, -z.re); // -i z
    let k = bessel_k_integral(order, w);
    let phase = match order {
        0 => Complex64::new(0.0, -1.0),
        _ => Complex64::new(-1.0, 0.0),
    };
    Ok(phase * k * (2.0 / PI))
}

/// Modified Bessel function of the second kind, `K_0` or `K_1`, for real `t > 0`.
pub fn bessel_k(order: u8, t: f64) -> Result<f64> {
    check_order(order)?;
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::Domain(format!("bessel_k requires t > 0, got {t}")));
    }
    if t < 2.0 {
        Ok(bessel_k_series(order, t))
    } else {
        let (k0, k1) = bessel_k_cf2(t);
        Ok(if order == 0 { k0 } else { k1 })
    }
}

/// Logarithmic-derivative coefficient `h(t) = t H^(1)'_1(t) / H^(1)_1(t)`,
/// evaluated as `t H^(1)_0(t)/H^(1)_1(t) - 1`.
pub fn hankel_log_derivative(t: Complex64) -> Result<Complex64> {
    if t.re == 0.0 && t.im == 0.0 {
        return Err(Error::Domain(
            "hankel_log_derivative is singular at t = 0".to_string(),
        ));
    }
    // In the asymptotic regime take the ratio of the slowly varying factors
    // directly: the common prefactor e^{it} underflows for strongly
    // evanescent arguments (t far up the imaginary axis), which would turn
    // H0/H1 into 0/0, but it cancels exactly, leaving
    // H0/H1 = e^{i pi/2} S0/S1 = i S0/S1.
    if t.norm() >= ASYMPTOTIC_RADIUS && t.re >= -1e-12 * t.norm() && t.im >= -1e-12 * t.norm() {
        let s0 = hankel1_asymptotic_sum(0, t);
        let s1 = hankel1_asymptotic_sum(1, t);
        return Ok(Complex64::i() * t * s0 / s1 - 1.0);
    }
    let h0 = hankel1(0, t)?;
    let h1 = hankel1(1, t)?;
    Ok(t * h0 / h1 - 1.0)
}

fn j_series(order: u8, z: Complex64) -> Complex64 {
    let half = 0.5 * z;
    let q = half * half;
    let mut term = if order == 0 {
        Complex64::new(1.0, 0.0)
    } else {
        half
    };
    let mut sum = term;
    for k in 1..=60usize {
        term = -term * q / ((k * (k + order as usize)) as f64);
        sum += term;
    }
    sum
}

fn y_series(order: u8, z: Complex64) -> Complex64 {
    let half = 0.5 * z;
    let q = half * half;
    let log_term = half.ln() + EULER_GAMMA;
    let two_over_pi = 2.0 / PI;
    if order == 0 {
        // Y0 = (2/pi) [ (ln(z/2) + gamma) J0 + sum_{k>=1} (-1)^{k+1} H_k q^k / (k!)^2 ]
        let mut sum = Complex64::new(0.0, 0.0);
        let mut pow = Complex64::new(1.0, 0.0); // q^k / (k!)^2
        let mut harmonic = 0.0;
        let mut sign = 1.0;
        for k in 1..=60usize {
            pow = pow * q / ((k * k) as f64);
            harmonic += 1.0 / k as f64;
            sum += sign * harmonic * pow;
            sign = -sign;
        }
        two_over_pi * (log_term * j_series(0, z) + sum)
    } else {
        // Y1 = (2/pi)(ln(z/2)+gamma) J1 - 2/(pi z)
        //      - (z/(2 pi)) sum_{k>=0} (H_k + H_{k+1}) (-q)^k / (k! (k+1)!)
        let mut sum = Complex64::new(1.0, 0.0); // k = 0 term: (H_0 + H_1) / (0! 1!) = 1
        let mut pow = Complex64::new(1.0, 0.0); // (-q)^k / (k! (k+1)!)
        let mut harmonic_k = 0.0;
        for k in 1..=60usize {
            pow = -pow * q / ((k * (k + 1)) as f64);
            harmonic_k += 1.0 / k as f64;
            let harmonic_k1 = harmonic_k + 1.0 / (k as f64 + 1.0);
            sum += (harmonic_k + harmonic_k1) * pow;
        }
        two_over_pi * (log_term * j_series(1, z) - 1.0 / z) - half / PI * sum
    }
}

/// The slowly varying factor `S_n(z) = sum_k i^k a_k(n) / z^k` of the
/// large-argument expansion `H_n^(1)(z) = sqrt(2/(pi z)) e^{i omega} S_n(z)`.
fn hankel1_asymptotic_sum(order: u8, z: Complex64) -> Complex64 {
    let nu2 = 4.0 * (order as f64) * (order as f64);
    let i_over_z = Complex64::i() / z;
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut last = f64::INFINITY;
    for k in 1..=40usize {
        let odd = (2 * k - 1) as f64;
        term = term * (nu2 - odd * odd) / (8.0 * k as f64) * i_over_z;
        let mag = term.norm();
        if mag > last {
            break; // divergent tail of the asymptotic series
        }
        sum += term;
        last = mag;
        if mag < 1e-18 * sum.norm() {
            break;
        }
    }
    sum
}

fn hankel1_asymptotic(order: u8, z: Complex64) -> Complex64 {
    let omega = z - Complex64::new((order as f64) * PI / 2.0 + PI / 4.0, 0.0);
    (2.0 / (PI * z)).sqrt() * (Complex64::i() * omega).exp() * hankel1_asymptotic_sum(order, z)
}

/// `K_nu(w)` by quadrature of `int_0^inf e^{-w cosh t} cosh(nu t) dt`,
/// for `Re w > 0`.
fn bessel_k_integral(order: u8, w: Complex64) -> Complex64 {
    debug_assert!(w.re > 0.0);
    let t_max = (1.0 + 60.0 / w.re).acosh();
    // Resolve both the oscillation (frequency |Im w| sinh t) and the decay.
    let phase_span = w.im.abs() * t_max.sinh();
    let panels = (phase_span / 1.5).ceil().max(16.0) as usize;
    let rule = quad::gl16();
    let h = t_max / panels as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for &(x, wt) in rule {
            let t = mid + 0.5 * h * x;
            let f = (-w * t.cosh()).exp()
                * if order == 0 { 1.0 } else { (order as f64 * t).cosh() };
            total += wt * f;
        }
    }
    total * 0.5 * h
}

fn bessel_k_series(order: u8, t: f64) -> f64 {
    let q = 0.25 * t * t;
    let log_term = (0.5 * t).ln();
    // I0, I1 series (all-positive terms).
    let mut i0 = 1.0;
    let mut i1 = 0.5 * t;
    let mut term0 = 1.0;
    let mut term1 = 0.5 * t;
    for k in 1..=40usize {
        term0 *= q / ((k * k) as f64);
        term1 *= q / ((k * (k + 1)) as f64);
        i0 += term0;
        i1 += term1;
    }
    if order == 0 {
        // K0 = -(ln(t/2) + gamma) I0 + sum_{k>=1} H_k q^k / (k!)^2
        let mut sum = 0.0;
        let mut pow = 1.0;
        let mut harmonic = 0.0;
        for k in 1..=40usize {
            pow *= q / ((k * k) as f64);
            harmonic += 1.0 / k as f64;
            sum += harmonic * pow;
        }
        -(log_term + EULER_GAMMA) * i0 + sum
    } else {
        // K1 = 1/t + ln(t/2) I1 - (t/4) sum_k (psi(k+1) + psi(k+2)) q^k / (k!(k+1)!)
        let mut sum = 1.0 - 2.0 * EULER_GAMMA; // k = 0: psi(1) + psi(2) = -2 gamma + 1
        let mut pow = 1.0;
        let mut harmonic_k = 0.0;
        for k in 1..=40usize {
            pow *= q / ((k * (k + 1)) as f64);
            harmonic_k += 1.0 / k as f64;
            let harmonic_k1 = harmonic_k + 1.0 / (k as f64 + 1.0);
            sum += (-2.0 * EULER_GAMMA + harmonic_k + harmonic_k1) * pow;
        }
        1.0 / t + log_term * i1 - 0.25 * t * sum
    }
}

/// Temme/Steed continued fraction for `(K_0, K_1)` at real `t >= 2`.
fn bessel_k_cf2(t: f64) -> (f64, f64) {
    const EPS: f64 = 1e-16;
    let a1 = 0.25; // 0.25 - mu^2 with mu = 0
    let mut b = 2.0 * (1.0 + t);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..=10_000usize {
        a -= 2.0 * (i as f64 - 1.0);
        c = -a * c / i as f64;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    h *= a1;
    let k0 = (PI / (2.0 * t)).sqrt() * (-t).exp() / s;
    let k1 = k0 * (t + 0.5 - h) / t;
    (k0, k1)
}
