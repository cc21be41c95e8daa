//! Quadrature rules: Gauss-Legendre on intervals, midpoint-trapezoid on
//! circles. Both are spectrally accurate on the analytic integrands this
//! crate produces.

/// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
///
/// Newton iteration on the Legendre polynomial recurrence; accurate to
/// machine precision for the orders used here (n <= a few hundred).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "empty quadrature rule");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_pd(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_pd(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        // Center node of odd rules sits exactly at 0.
        nodes[n / 2] = 0.0;
        let (_, d) = legendre_pd(n, 0.0);
        weights[n / 2] = 2.0 / (d * d);
    }
    (nodes, weights)
}

/// Legendre P_n(x) and its derivative by upward recurrence.
fn legendre_pd(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(n);
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    (
        xs.iter().map(|x| c + h * x).collect(),
        ws.iter().map(|w| h * w).collect(),
    )
}

/// Composite Gauss-Legendre: `panels` equal panels of `n` points on [a, b].
pub fn composite_gauss_legendre(n: usize, panels: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(panels >= 1);
    let mut nodes = Vec::with_capacity(n * panels);
    let mut weights = Vec::with_capacity(n * panels);
    let h = (b - a) / panels as f64;
    for p in 0..panels {
        let (xs, ws) = gauss_legendre_on(n, a + p as f64 * h, a + (p + 1) as f64 * h);
        nodes.extend(xs);
        weights.extend(ws);
    }
    (nodes, weights)
}

/// Equispaced midpoint angles for an n-node rule on a full circle; paired
/// with the constant weight 2*pi/n this is the trapezoid rule (spectral on
/// periodic analytic integrands). Midpoint offsets keep nodes off the real
/// axis, so conjugate-symmetric contours produce conjugate node pairs and no
/// node collides with real-axis structure.
pub fn circle_angles(n: usize) -> Vec<f64> {
    assert!(n >= 4, "too few circle nodes");
    (0..n)
        .map(|k| std::f64::consts::PI * (2.0 * k as f64 + 1.0) / n as f64)
        .collect()
}
