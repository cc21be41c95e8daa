//! Complex special functions: the Faddeeva function w(z), the scaled
//! complementary error function erfcx on the full complex plane, and the
//! Airy function Ai with its derivative.
//!
//! erfcx drives every closed-form half-line Gaussian integral in the
//! Brownian characteristic functions; Ai drives the Tracy-Widom oracle.

use crate::quad::composite_gauss_legendre;
use crate::Complex64;
use std::sync::OnceLock;

const N_FADDEEVA: usize = 64;

/// Coefficients of Weideman's rational expansion of w(z), computed once by a
/// direct real DFT of the tangent-transformed Gaussian. With 64 terms the
/// expansion is accurate to ~1e-14 relative over the closed upper half-plane.
fn faddeeva_coeffs() -> &'static (f64, Vec<f64>) {
    static COEFFS: OnceLock<(f64, Vec<f64>)> = OnceLock::new();
    COEFFS.get_or_init(|| {
        let n = N_FADDEEVA;
        let m = 2 * n;
        let m2 = 4 * n;
        let l = (n as f64 / std::f64::consts::SQRT_2).sqrt();
        // Sample g = exp(-t^2)(L^2 + t^2) at t = L tan(theta/2); the sample
        // vector is [0, g(theta_{-M+1}), ..., g(theta_{M-1})], fft-shifted.
        let mut samples = vec![0.0; m2];
        for (j, s) in samples.iter_mut().enumerate().skip(1) {
            let k = j as i64 - m as i64; // k = -M+1 .. M-1
            let theta = k as f64 * std::f64::consts::PI / m as f64;
            let t = l * (theta / 2.0).tan();
            *s = (-t * t).exp() * (l * l + t * t);
        }
        let mut shifted = vec![0.0; m2];
        for (j, sh) in shifted.iter_mut().enumerate() {
            *sh = samples[(j + m) % m2];
        }
        let mut a = vec![0.0; n + 1];
        for (idx, av) in a.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, s) in shifted.iter().enumerate() {
                acc += s * (2.0 * std::f64::consts::PI * (j * idx) as f64 / m2 as f64).cos();
            }
            *av = acc / m2 as f64;
        }
        // Polynomial coefficients in falling order: a_N z^{N-1} + ... + a_1.
        let poly: Vec<f64> = (1..=n).rev().map(|i| a[i]).collect();
        (l, poly)
    })
}

/// Faddeeva function w(z) = exp(-z^2) erfc(-iz), valid for all complex z.
pub fn faddeeva_w(z: Complex64) -> Complex64 {
    if z.im >= 0.0 {
        faddeeva_upper(z)
    } else {
        // w(z) = 2 exp(-z^2) - w(-z); the exponential is the genuine growth
        // of w in the lower half-plane.
         2.0 * (-z * z).exp() - faddeeva_upper(-z)
    }
}

fn faddeeva_upper(z: Complex64) -> Complex64 {
    let (l, poly) = faddeeva_coeffs();
    let r = 1.0 / (Complex64::new(*l, 0.0) - crate::I * z);
    let big_z = (Complex64::new(*l, 0.0) + crate::I * z) * r;
    let mut p = Complex64::new(0.0, 0.0);
    for c in poly {
        p = p * big_z + c;
    }
    2.0 * p * r * r + std::f64::consts::PI.sqrt().recip() * r
}

/// Scaled complementary error function erfcx(z) = exp(z^2) erfc(z) for
/// complex z. Grows like 2 exp(z^2) for Re z -> -infinity.
pub fn erfcx(z: Complex64) -> Complex64 {
    if z.re >= 0.0 {
        faddeeva_w(crate::I * z)
    } else {
        2.0 * (z * z).exp() - faddeeva_w(-crate::I * z)
    }
}

/// Complementary error function erfc(z) = exp(-z^2) erfcx(z).
pub fn erfc(z: Complex64) -> Complex64 {
    (-z * z).exp() * erfcx(z)
}

/// Airy function Ai(x) for real x, by quadrature of the left-contour
/// representation with the vertex moved to the real saddle point -sqrt(x)
/// for x > 0 (which removes all cancellation in the decaying tail).
pub fn airy_ai(x: f64) -> f64 {
    airy_contour(x, false)
}

/// Derivative Ai'(x), same contour with the integrand multiplied by the
/// integration variable.
pub fn airy_ai_prime(x: f64) -> f64 {
    airy_contour(x, true)
}

fn airy_contour(x: f64, derivative: bool) -> f64 {
    let vertex = if x > 0.04 { -x.sqrt() } else { -0.2 };
    // Endpoint magnitude e^{-r^3/3 + |x| r/2} must be negligible.
    let r = 5.2 + (1.5 * x.abs()).sqrt() + 2.0;
    let panels = (r / 2.0).ceil() as usize;
    let (ss, ws) = composite_gauss_legendre(24, panels.max(3), 0.0, r);
    let dir = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for (s, w) in ss.iter().zip(&ws) {
        // Upper ray contributes dir*f(v + s*dir); the lower ray is its
        // conjugate for real x, folded in by taking 2*Re at the end.
        let xi = Complex64::new(vertex, 0.0) + s * dir;
        let mut f = (-xi * xi * xi / 3.0 + x * xi).exp();
        if derivative {
            f *= xi;
        }
        acc += w * dir * f;
    }
    // Integral over the full contour / (2 pi i) = 2 Re(upper) / (2 pi i)
    // once orientation (lower to upper) is accounted for: the conjugate
    // lower-ray piece equals conj(acc), and (acc + conj(acc)) / (2 pi i)
    // has real part Im(acc)/pi.
    acc.im / std::f64::consts::PI
}

/// Ai(x) by the Maclaurin series; accurate for |x| up to ~5 and used as an
/// independent cross-check of the contour evaluation.
pub fn airy_ai_series(x: f64) -> f64 {
    let c1 = 0.3550280538878172; // Ai(0)
    let c2 = 0.2588194037928068; // -Ai'(0)
    let x3 = x * x * x;
    let (mut f, mut g) = (1.0, x);
    let (mut tf, mut tg) = (1.0, x);
    for k in 0..60 {
        let kf = k as f64;
        tf *= x3 / ((3.0 * kf + 2.0) * (3.0 * kf + 3.0));
        tg *= x3 / ((3.0 * kf + 3.0) * (3.0 * kf + 4.0));
        f += tf;
        g += tg;
        if tf.abs() + tg.abs() < 1e-18 * (f.abs() + g.abs()) {
            break;
        }
    }
    c1 * f - c2 * g
}

/// Airy kernel (Ai(x)Ai'(y) - Ai'(x)Ai(y)) / (x - y), with the confluent
/// diagonal form Ai'(m)^2 - m Ai(m)^2 near x = y.
pub fn airy_kernel(x: f64, y: f64) -> f64 {
    if (x - y).abs() < 1e-6 {
        let m = 0.5 * (x + y);
        let a = airy_ai(m);
        let ap = airy_ai_prime(m);
        ap * ap - m * a * a
    } else {
        (airy_ai(x) * airy_ai_prime(y) - airy_ai_prime(x) * airy_ai(y)) / (x - y)
    }
}
