//! Equal-time multipoint distributions, every query at time 1. Two
//! independent Fredholm-determinant routes: one over m labeled copies of the
//! right contour with iterated heat factors on nested vertical lines, and
//! one on the real line in scattering form. An Airy-kernel Tracy-Widom
//! determinant on the half-line serves as the narrow-wedge oracle.

use crate::contour::{build_kpz_contours, ContourError, KpzVertexConfig, Nesting, Side};
use crate::kpz::{ChiParams, KpzError, KpzInitial};
use crate::quad::{composite_gauss_legendre, gauss_legendre_on};
use crate::series::det_dense;
use crate::special::airy_kernel;
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

pub use crate::special::airy_ai as airy;

#[derive(Debug, Error)]
pub enum EqualTimeError {
    #[error("need at least one query point")]
    EmptyQuery,
    #[error("query positions must be finite and strictly increasing")]
    QueryOrder,
    #[error("level index out of range")]
    LevelRange,
    #[error("determinant imaginary residue {0:e} exceeds 1e-8")]
    ImagResidual(f64),
    #[error(transparent)]
    Contour(#[from] ContourError),
    #[error(transparent)]
    Chi(#[from] KpzError),
}

/// Query points (position, threshold) at common time 1, positions strictly
/// increasing.
#[derive(Debug, Clone)]
pub struct EqualTimeQuery {
    points: Vec<(f64, f64)>,
}

impl EqualTimeQuery {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, EqualTimeError> {
        if points.is_empty() {
            return Err(EqualTimeError::EmptyQuery);
        }
        let finite = points.iter().all(|&(a, b)| a.is_finite() && b.is_finite());
        let ordered = points.windows(2).all(|w| w[0].0 < w[1].0);
        if !finite || !ordered {
            return Err(EqualTimeError::QueryOrder);
        }
        Ok(EqualTimeQuery { points })
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    fn alpha(&self, l: usize) -> f64 {
        self.points[l - 1].0
    }

    fn beta(&self, l: usize) -> f64 {
        self.points[l - 1].1
    }
}

/// Quadrature layout shared by both determinants.
#[derive(Debug, Clone, Copy)]
pub struct EqualTimeConfig {
    /// Nodes per ray on the level-1 contours.
    pub quad_order: usize,
    pub truncation_radius: f64,
    pub vertex: KpzVertexConfig,
    /// Half-width of the real grid carrying the scattering determinant.
    pub grid_half_width: f64,
    /// Nodes per panel on the real grid.
    pub grid_order: usize,
    /// The scattering chain's heat factor for level l integrates over the
    /// vertical line at l times this offset.
    pub line_offset: f64,
    /// Nodes per panel on vertical lines.
    pub line_order: usize,
}

impl Default for EqualTimeConfig {
    fn default() -> Self {
        EqualTimeConfig {
            quad_order: 96,
            truncation_radius: 8.0,
            vertex: KpzVertexConfig::default(),
            grid_half_width: 10.0,
            grid_order: 24,
            line_offset: -0.3,
            line_order: 12,
        }
    }
}

/// Heat factor carried by level l. Level 1 holds the cubic and the full
/// first query point; later levels hold increments between queries.
fn big_f(l: usize, q: &EqualTimeQuery, w: Complex64) -> Complex64 {
    if l == 1 {
        (-w * w * w / 3.0 + q.alpha(1) * w * w + q.beta(1) * w).exp()
    } else {
        ((q.alpha(l) - q.alpha(l - 1)) * w * w + (q.beta(l) - q.beta(l - 1)) * w).exp()
    }
}

/// Cumulative heat factor, the product of the level factors up to j.
fn f_cum(j: usize, q: &EqualTimeQuery, w: Complex64) -> Complex64 {
    (-w * w * w / 3.0 + q.alpha(j) * w * w + q.beta(j) * w).exp()
}

/// One vertical-line quadrature c + iR. Weights carry the 1/(2 pi i)
/// measure; d(point) = i dy keeps them real.
struct Station {
    points: Vec<Complex64>,
    weights: Vec<f64>,
}

fn vertical_station(c: f64, gamma: f64, lin: f64, freq: f64, order: usize) -> Station {
    let ymax = (42.0 / gamma).sqrt() + lin.abs() / (2.0 * gamma) + 1.0;
    let plen = (0.4f64).min(1.5 * order as f64 / freq.max(1.0));
    let panels = ((2.0 * ymax / plen).ceil() as usize).max(1);
    let (ys, ws) = composite_gauss_legendre(order, panels, -ymax, ymax);
    Station {
        points: ys.iter().map(|&y| Complex64::new(c, y)).collect(),
        weights: ws.iter().map(|w| w / (2.0 * std::f64::consts::PI)).collect(),
    }
}

/// Nested vertical lines for the labeled-contour chains. The first line
/// carries the cubic factor and the scattering growth (rate = support), so
/// it sits deep enough that |c| + alpha_1 - support stays at 1.2 or more;
/// later lines carry heat factors whose increments set their own decay.
fn t_stations(q: &EqualTimeQuery, support: f64, cfg: &EqualTimeConfig) -> Vec<Station> {
    let m = q.m();
    let c1 = -(support + 1.2 + (-q.alpha(1)).max(0.0));
    let mut out = Vec::with_capacity(m);
    for l in 1..=m {
        let c = c1 - 0.55 * (l as f64 - 1.0);
        let (gamma, lin) = if l == 1 {
            (c.abs() + q.alpha(1) - support, q.beta(1))
        } else {
            (q.alpha(l) - q.alpha(l - 1), q.beta(l) - q.beta(l - 1))
        };
        let ymax = (42.0 / gamma).sqrt() + lin.abs() / (2.0 * gamma) + 1.0;
        let freq = if l == 1 {
            ymax * ymax + c * c + 2.0 * q.alpha(1).abs() * c.abs() + lin.abs()
        } else {
            2.0 * gamma * c.abs() + lin.abs()
        };
        out.push(vertical_station(c, gamma, lin, freq, cfg.line_order));
    }
    out
}

/// Vertical lines for the scattering chain, levels 2..=m, line l at
/// l * line_offset. The columns they serve oscillate at frequencies up to
/// the grid half-width.
fn s_stations(q: &EqualTimeQuery, cfg: &EqualTimeConfig) -> Vec<Station> {
    (2..=q.m())
        .map(|l| {
            let c = cfg.line_offset * l as f64;
            let gamma = q.alpha(l) - q.alpha(l - 1);
            let lin = q.beta(l) - q.beta(l - 1);
            let freq = 2.0 * gamma * c.abs() + lin.abs() + cfg.grid_half_width;
            vertical_station(c, gamma, lin, freq, cfg.line_order)
        })
        .collect()
}

/// out(x) = scale(x) * sum_k w_k v_k / (p_k - x) over the previous station.
fn cauchy_step(
    prev: &Station,
    prev_vals: &[Complex64],
    cur: &Station,
    scale: impl Fn(Complex64) -> Complex64,
) -> Vec<Complex64> {
    cur.points
        .iter()
        .map(|&x| {
            let mut acc = Complex64::new(0.0, 0.0);
            for ((&p, &w), &v) in prev.points.iter().zip(&prev.weights).zip(prev_vals) {
                acc += w * v / (p - x);
            }
            scale(x) * acc
        })
        .collect()
}

/// Assembled Nystrom discretization: labeled nodes and the kernel matrix
/// with symmetric square-root quadrature weights folded in.
pub struct NystromSystem {
    pub labels: Vec<(usize, Complex64)>,
    pub matrix: Vec<Complex64>,
    pub dim: usize,
}

impl NystromSystem {
    /// det(I + K) of the weighted kernel.
    pub fn fredholm_det(&self) -> Complex64 {
        let mut a = self.matrix.clone();
        for d in 0..self.dim {
            a[d * self.dim + d] += 1.0;
        }
        det_dense(&mut a, self.dim)
    }
}

/// Labeled-contour system: nodes are (level, point) pairs over m copies of
/// the right contour; entry ((i,a),(j,b)) contracts the level-i line chain
/// against row point a and divides by the cumulative factor at column b.
pub fn t_system(
    q: &EqualTimeQuery,
    initial: &KpzInitial,
    chi_params: &ChiParams,
    cfg: &EqualTimeConfig,
) -> Result<NystromSystem, EqualTimeError> {
    let m = q.m();
    let fam = build_kpz_contours(1, cfg.vertex, cfg.truncation_radius, cfg.quad_order)?;
    let right = fam.contour(1, Side::Right, Nesting::Base);
    let stations = t_stations(q, initial.support_radius(), cfg);
    let nr = right.nodes.len();
    let chi_rows: Vec<Vec<Complex64>> = right
        .nodes
        .par_iter()
        .map(|rn| {
            stations[0]
                .points
                .iter()
                .map(|&x| initial.chi(rn.point, x, chi_params))
                .collect::<Result<Vec<_>, KpzError>>()
        })
        .collect::<Result<_, _>>()?;
    // Per column point eta: chain vectors by level, contracted onto the rows.
    let a_cols: Vec<Vec<Vec<Complex64>>> = (0..nr)
        .into_par_iter()
        .map(|b| {
            let mut g: Vec<Complex64> = stations[0]
                .points
                .iter()
                .zip(&chi_rows[b])
                .map(|(&x, &c)| big_f(1, q, x) * c)
                .collect();
            let mut per_level = Vec::with_capacity(m);
            for i in 1..=m {
                if i > 1 {
                    g = cauchy_step(&stations[i - 2], &g, &stations[i - 1], |x| big_f(i, q, x));
                }
                let st = &stations[i - 1];
                let vals: Vec<Complex64> = right
                    .nodes
                    .iter()
                    .map(|zn| {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for ((&p, &w), &v) in st.points.iter().zip(&st.weights).zip(&g) {
                            acc += w * v / (p - zn.point);
                        }
                        acc
                    })
                    .collect();
                per_level.push(vals);
            }
            per_level
        })
        .collect();
    let sw: Vec<Complex64> = right.nodes.iter().map(|n| n.base_weight.sqrt()).collect();
    let dim = m * nr;
    let mut labels = Vec::with_capacity(dim);
    for i in 1..=m {
        for n in &right.nodes {
            labels.push((i, n.point));
        }
    }
    let mut matrix = vec![Complex64::new(0.0, 0.0); dim * dim];
    for j in 1..=m {
        let fj: Vec<Complex64> = right.nodes.iter().map(|n| f_cum(j, q, n.point)).collect();
        for b in 0..nr {
            let col = (j - 1) * nr + b;
            for i in 1..=m {
                for a in 0..nr {
                    matrix[((i - 1) * nr + a) * dim + col] =
                        sw[a] * sw[b] * a_cols[b][i - 1][a] / fj[b];
                }
            }
        }
    }
    Ok(NystromSystem { labels, matrix, dim })
}

/// Probability that all equal-time events hold, via the labeled-contour
/// determinant.
pub fn fredholm_new(
    q: &EqualTimeQuery,
    initial: &KpzInitial,
    chi_params: &ChiParams,
    cfg: &EqualTimeConfig,
) -> Result<f64, EqualTimeError> {
    let det = t_system(q, initial, chi_params, cfg)?.fredholm_det();
    if det.im.abs() > 1e-8 {
        return Err(EqualTimeError::ImagResidual(det.im.abs()));
    }
    Ok(det.re)
}

/// One entry of the labeled-contour kernel at row (i, zeta), column (j, eta).
pub fn t_kernel(
    i: usize,
    zeta: Complex64,
    j: usize,
    eta: Complex64,
    q: &EqualTimeQuery,
    initial: &KpzInitial,
    chi_params: &ChiParams,
    cfg: &EqualTimeConfig,
) -> Result<Complex64, EqualTimeError> {
    let m = q.m();
    if i < 1 || i > m || j < 1 || j > m {
        return Err(EqualTimeError::LevelRange);
    }
    let stations = t_stations(q, initial.support_radius(), cfg);
    let mut g = Vec::with_capacity(stations[0].points.len());
    for &x in &stations[0].points {
        g.push(big_f(1, q, x) * initial.chi(eta, x, chi_params)?);
    }
    for l in 2..=i {
        g = cauchy_step(&stations[l - 2], &g, &stations[l - 1], |x| big_f(l, q, x));
    }
    let st = &stations[i - 1];
    let mut acc = Complex64::new(0.0, 0.0);
    for ((&p, &w), &v) in st.points.iter().zip(&st.weights).zip(&g) {
        acc += w * v / (p - zeta);
    }
    Ok(acc / f_cum(j, q, eta))
}

/// Scattering kernel on the real line at one position pair: double contour
/// integral of the cubic factors against the scattering function.
pub fn k_hypo(
    p: f64,
    qval: f64,
    alpha1: f64,
    initial: &KpzInitial,
    chi_params: &ChiParams,
    cfg: &EqualTimeConfig,
) -> Result<Complex64, EqualTimeError> {
    let fam = build_kpz_contours(1, cfg.vertex, cfg.truncation_radius, cfg.quad_order)?;
    let left = fam.contour(1, Side::Left, Nesting::Base);
    let right = fam.contour(1, Side::Right, Nesting::Base);
    let mut acc = Complex64::new(0.0, 0.0);
    for rn in &right.nodes {
        let e = rn.point;
        let den = (-e * e * e / 3.0 + alpha1 * e * e + p * e).exp();
        let mut inner = Complex64::new(0.0, 0.0);
        for ln in &left.nodes {
            let x = ln.point;
            inner += ln.base_weight
                * (-x * x * x / 3.0 + alpha1 * x * x + qval * x).exp()
                * initial.chi(e, x, chi_params)?;
        }
        acc += rn.base_weight * inner / den;
    }
    Ok(acc)
}

/// Real grid split exactly at the scattering kernel's indicator jump.
fn real_grid(cfg: &EqualTimeConfig) -> (Vec<f64>, Vec<f64>) {
    let w = cfg.grid_half_width;
    let panels = ((w / 2.5).ceil() as usize).max(1);
    let (mut xs, mut ws) = composite_gauss_legendre(cfg.grid_order, panels, -w, 0.0);
    let (x2, w2) = composite_gauss_legendre(cfg.grid_order, panels, 0.0, w);
    xs.extend(x2);
    ws.extend(w2);
    (xs, ws)
}

/// Columns of the first-level scattering factor: for each row point lambda,
/// the integral of the cubic factor against chi, weighted for the eta
/// contraction.
fn s_core(
    q: &EqualTimeQuery,
    initial: &KpzInitial,
    chi_params: &ChiParams,
    fam_left: &crate::contour::LabeledContour,
    fam_right: &crate::contour::LabeledContour,
    xs: &[f64],
) -> Result<Vec<Vec<Complex64>>, EqualTimeError> {
    let chi_grid: Vec<Vec<Complex64>> = fam_right
        .nodes
        .par_iter()
        .map(|rn| {
            fam_left
                .nodes
                .iter()
                .map(|ln| initial.chi(rn.point, ln.point, chi_params))
                .collect::<Result<Vec<_>, KpzError>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(xs
        .par_iter()
        .map(|&la| {
            (0..fam_right.nodes.len())
                .map(|b| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (ln, &c) in fam_left.nodes.iter().zip(&chi_grid[b]) {
                        acc += ln.base_weight * f_cum(1, q, ln.point) * (la * ln.point).exp() * c;
                    }
                    fam_right.nodes[b].base_weight * acc
                })
                .collect()
        })
        .collect())
}

/// Real-line scattering system. Columns with positive argument carry the
/// single-branch kernel; columns at or below zero run the heat chain over
/// the vertical lines.
pub fn s_system(
    q: &EqualTimeQuery,
    initial: &KpzInitial,
    chi_params: &ChiParams,
    cfg: &EqualTimeConfig,
) -> Result<NystromSystem, EqualTimeError> {
    let m = q.m();
    let fam = build_kpz_contours(1, cfg.vertex, cfg.truncation_radius, cfg.quad_order)?;
    let left = fam.contour(1, Side::Left, Nesting::Base);
    let right = fam.contour(1, Side::Right, Nesting::Base);
    let (xs, ws) = real_grid(cfg);
    let n = xs.len();
    let nr = right.nodes.len();
    let core = s_core(q, initial, chi_params, left, right, &xs)?;
    let stations = s_stations(q, cfg);
    let f_inv: Vec<Vec<Complex64>> = (1..=m)
        .map(|j| right.nodes.iter().map(|rn| 1.0 / f_cum(j, q, rn.point)).collect())
        .collect();
    let mut shat = vec![Complex64::new(0.0, 0.0); n * n];
    for c in 0..n {
        let mu = xs[c];
        if mu > 0.0 {
            for a in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for b in 0..nr {
                    acc -= core[a][b] * f_inv[0][b] * (-mu * right.nodes[b].point).exp();
                }
                shat[a * n + c] = acc;
            }
        } else if m > 1 {
            let mut g: Vec<Complex64> = stations[0]
                .points
                .iter()
                .map(|&x| big_f(2, q, x) * (-mu * x).exp())
                .collect();
            for i in 2..=m {
                if i > 2 {
                    g = cauchy_step(&stations[i - 3], &g, &stations[i - 2], |x| big_f(i, q, x));
                }
                let st = &stations[i - 2];
                let ends: Vec<Complex64> = right
                    .nodes
                    .iter()
                    .map(|rn| {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for ((&p, &w), &v) in st.points.iter().zip(&st.weights).zip(&g) {
                            acc += w * v / (p - rn.point);
                        }
                        acc
                    })
                    .collect();
                for a in 0..n {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for b in 0..nr {
                        acc += core[a][b] * f_inv[i - 1][b] * ends[b];
                    }
                    shat[a * n + c] += acc;
                }
            }
        }
    }
    let sq: Vec<f64> = ws.iter().map(|w| w.sqrt()).collect();
    let mut matrix = vec![Complex64::new(0.0, 0.0); n * n];
    for a in 0..n {
        for c in 0..n {
            matrix[a * n + c] = sq[a] * sq[c] * shat[a * n + c];
        }
    }
    let labels = xs.iter().map(|&x| (1usize, Complex64::new(x, 0.0))).collect();
    Ok(NystromSystem { labels, matrix, dim: n })
}

/// Same probability via the real-line scattering determinant.
pub fn fredholm_mqr(
    q: &EqualTimeQuery,
    initial: &KpzInitial,
    chi_params: &ChiParams,
    cfg: &EqualTimeConfig,
) -> Result<f64, EqualTimeError> {
    let det = s_system(q, initial, chi_params, cfg)?.fredholm_det();
    if det.im.abs() > 1e-8 {
        return Err(EqualTimeError::ImagResidual(det.im.abs()));
    }
    Ok(det.re)
}

/// One entry of the real-line scattering kernel.
pub fn s_kernel(
    lambda: f64,
    mu: f64,
    q: &EqualTimeQuery,
    initial: &KpzInitial,
    chi_params: &ChiParams,
    cfg: &EqualTimeConfig,
) -> Result<Complex64, EqualTimeError> {
    let m = q.m();
    let fam = build_kpz_contours(1, cfg.vertex, cfg.truncation_radius, cfg.quad_order)?;
    let left = fam.contour(1, Side::Left, Nesting::Base);
    let right = fam.contour(1, Side::Right, Nesting::Base);
    let core = s_core(q, initial, chi_params, left, right, &[lambda])?;
    let mut out = Complex64::new(0.0, 0.0);
    if mu > 0.0 {
        for (b, rn) in right.nodes.iter().enumerate() {
            out -= core[0][b] / f_cum(1, q, rn.point) * (-mu * rn.point).exp();
        }
    } else if m > 1 {
        let stations = s_stations(q, cfg);
        let mut g: Vec<Complex64> = stations[0]
            .points
            .iter()
            .map(|&x| big_f(2, q, x) * (-mu * x).exp())
            .collect();
        for i in 2..=m {
            if i > 2 {
                g = cauchy_step(&stations[i - 3], &g, &stations[i - 2], |x| big_f(i, q, x));
            }
            let st = &stations[i - 2];
            for (b, rn) in right.nodes.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for ((&p, &w), &v) in st.points.iter().zip(&st.weights).zip(&g) {
                    acc += w * v / (p - rn.point);
                }
                out += core[0][b] / f_cum(i, q, rn.point) * acc;
            }
        }
    }
    Ok(out)
}

/// GUE Tracy-Widom distribution: det(I - K_Ai) on (beta, inf), the
/// half-line mapped through x = beta + log(1/(1-u)).
pub fn tw_gue(beta: f64) -> f64 {
    tw_gue_order(beta, 48)
}

/// Same determinant at a chosen Gauss-Legendre order.
pub fn tw_gue_order(beta: f64, order: usize) -> f64 {
    let (us, uw) = gauss_legendre_on(order, 0.0, 1.0);
    let xs: Vec<f64> = us.iter().map(|&u| beta - (1.0 - u).ln()).collect();
    let sq: Vec<f64> = us.iter().zip(&uw).map(|(&u, &w)| (w / (1.0 - u)).sqrt()).collect();
    let mut a = vec![Complex64::new(0.0, 0.0); order * order];
    for r in 0..order {
        for c in 0..order {
            let d = if r == c { 1.0 } else { 0.0 };
            a[r * order + c] = Complex64::new(d - sq[r] * sq[c] * airy_kernel(xs[r], xs[c]), 0.0);
        }
    }
    det_dense(&mut a, order).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kpz::MultiNarrowWedge;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn nw_query(points: &[(f64, f64)]) -> EqualTimeQuery {
        EqualTimeQuery::new(points.to_vec()).unwrap()
    }

    /// Tail of the kernel trace on (beta, inf), same half-line transform.
    fn airy_tail_trace(beta: f64) -> f64 {
        let (us, uw) = gauss_legendre_on(64, 0.0, 1.0);
        us.iter()
            .zip(&uw)
            .map(|(&u, &w)| {
                let x = beta - (1.0 - u).ln();
                w / (1.0 - u) * airy_kernel(x, x)
            })
            .sum()
    }

    #[test]
    fn tw_gue_is_a_cdf() {
        assert!(tw_gue(6.0) >= 1.0 - 1e-6);
        let mut prev = 0.0;
        for k in -3..=3 {
            let v = tw_gue(k as f64);
            assert!(v > 0.0 && v < 1.0 + 1e-12, "tw({k}) = {v}");
            assert!(v >= prev, "not monotone at {k}");
            prev = v;
        }
        assert!((tw_gue_order(0.0, 48) - tw_gue_order(0.0, 96)).abs() < 1e-10);
    }

    #[test]
    fn tw_gue_tail_tracks_kernel_trace() {
        for beta in [2.0, 3.0] {
            let gap = 1.0 - tw_gue(beta);
            let tr = airy_tail_trace(beta);
            assert!(gap <= 2.0 * tr && gap >= 0.5 * tr, "beta {beta}: gap {gap} trace {tr}");
        }
    }

    #[test]
    fn narrow_wedge_determinant_matches_airy_oracle() {
        let cfg = EqualTimeConfig::default();
        let p = ChiParams::default();
        for beta in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let q = nw_query(&[(0.0, beta)]);
            let v = fredholm_new(&q, &KpzInitial::NarrowWedge, &p, &cfg).unwrap();
            let want = tw_gue(beta);
            assert!((v - want).abs() < 1e-6, "beta {beta}: det {v} vs oracle {want}");
        }
    }

    #[test]
    fn tail_threshold_reaches_one() {
        let cfg = EqualTimeConfig::default();
        let p = ChiParams::default();
        let q = nw_query(&[(0.0, 6.0)]);
        let v = fredholm_new(&q, &KpzInitial::NarrowWedge, &p, &cfg).unwrap();
        assert!((v - 1.0).abs() < 1e-4);
    }

    #[test]
    fn chain_kernel_matches_brute_tensor() {
        let cfg = EqualTimeConfig::default();
        let fine = EqualTimeConfig { line_order: 24, ..cfg };
        let p = ChiParams::default();
        let q = nw_query(&[(0.0, 0.3), (1.0, 0.8)]);
        let init = KpzInitial::NarrowWedge;
        let stations = t_stations(&q, 0.0, &fine);
        for (zeta, eta) in [(c(0.8, 0.9), c(0.6, -1.1)), (c(1.4, -0.4), c(0.5, 0.2))] {
            let fast = t_kernel(2, zeta, 1, eta, &q, &init, &p, &cfg).unwrap();
            let mut brute = Complex64::new(0.0, 0.0);
            for (&x1, &w1) in stations[0].points.iter().zip(&stations[0].weights) {
                let lead = w1 * big_f(1, &q, x1) * init.chi(eta, x1, &p).unwrap();
                for (&x2, &w2) in stations[1].points.iter().zip(&stations[1].weights) {
                    brute += lead * w2 * big_f(2, &q, x2) / ((x1 - x2) * (x2 - zeta));
                }
            }
            brute /= f_cum(1, &q, eta);
            assert!((fast - brute).norm() < 1e-10, "{fast} vs {brute}");
        }
    }

    #[test]
    fn labeled_and_real_line_determinants_agree() {
        let cfg = EqualTimeConfig::default();
        let p = ChiParams::default();
        let init = KpzInitial::NarrowWedge;
        let q1 = nw_query(&[(0.0, 0.3)]);
        let a = fredholm_new(&q1, &init, &p, &cfg).unwrap();
        let b = fredholm_mqr(&q1, &init, &p, &cfg).unwrap();
        assert!((a - b).abs() < 1e-6, "m=1: {a} vs {b}");
        let q2 = nw_query(&[(0.0, 0.0), (1.0, 1.0)]);
        let a = fredholm_new(&q2, &init, &p, &cfg).unwrap();
        let b = fredholm_mqr(&q2, &init, &p, &cfg).unwrap();
        assert!((a - b).abs() < 1e-6, "m=2: {a} vs {b}");
    }

    #[test]
    fn wedge_initial_data_agrees_between_routes() {
        let cfg = EqualTimeConfig::default();
        let p = ChiParams::default();
        let init = KpzInitial::Wedges(
            MultiNarrowWedge::new(vec![(0.4, 0.1), (-0.5, -0.3)]).unwrap(),
        );
        let q = nw_query(&[(-0.3, 0.5), (0.7, 1.0)]);
        let a = fredholm_new(&q, &init, &p, &cfg).unwrap();
        let b = fredholm_mqr(&q, &init, &p, &cfg).unwrap();
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        assert!(a > 0.0 && a < 1.0);
    }

    #[test]
    fn second_threshold_relaxes_to_marginal() {
        let cfg = EqualTimeConfig::default();
        let p = ChiParams::default();
        let init = KpzInitial::NarrowWedge;
        let m2 = fredholm_mqr(&nw_query(&[(0.0, 0.2), (1.0, 8.0)]), &init, &p, &cfg).unwrap();
        let m1 = fredholm_mqr(&nw_query(&[(0.0, 0.2)]), &init, &p, &cfg).unwrap();
        assert!((m2 - m1).abs() < 1e-4, "{m2} vs {m1}");
    }

    #[test]
    fn node_doubling_leaves_determinants_fixed() {
        let cfg = EqualTimeConfig::default();
        let p = ChiParams::default();
        let init = KpzInitial::NarrowWedge;
        let q = nw_query(&[(0.0, 0.1), (1.0, 0.9)]);
        let base = fredholm_new(&q, &init, &p, &cfg).unwrap();
        let fine = fredholm_new(
            &q,
            &init,
            &p,
            &EqualTimeConfig { quad_order: 192, line_order: 24, ..cfg },
        )
        .unwrap();
        assert!((base - fine).abs() < 1e-8, "{base} vs {fine}");
        let sbase = fredholm_mqr(&q, &init, &p, &cfg).unwrap();
        let sfine = fredholm_mqr(
            &q,
            &init,
            &p,
            &EqualTimeConfig { grid_order: 48, grid_half_width: 20.0, ..cfg },
        )
        .unwrap();
        assert!((sbase - sfine).abs() < 1e-7, "{sbase} vs {sfine}");
    }

    #[test]
    fn scattering_kernel_reduces_to_airy() {
        let cfg = EqualTimeConfig::default();
        let p = ChiParams::default();
        let init = KpzInitial::NarrowWedge;
        for (pp, qq) in [(-1.0, 0.5), (0.0, 0.0), (1.2, -0.4)] {
            let v = k_hypo(pp, qq, 0.0, &init, &p, &cfg).unwrap();
            let want = airy_kernel(pp, qq);
            assert!((v.re - want).abs() < 1e-8, "({pp},{qq}): {v} vs {want}");
            assert!(v.im.abs() < 1e-10);
        }
        let far = k_hypo(8.0, 8.0, 0.0, &init, &p, &cfg).unwrap();
        assert!(far.norm() < 1e-6);
        let d0 = k_hypo(0.0, 0.0, 0.0, &init, &p, &cfg).unwrap().re;
        let d2 = k_hypo(2.0, 2.0, 0.0, &init, &p, &cfg).unwrap().re;
        let d4 = k_hypo(4.0, 4.0, 0.0, &init, &p, &cfg).unwrap().re;
        assert!(d0 > d2 && d2 > d4 && d4 > 0.0);
    }

    #[test]
    fn vertical_line_reproduces_heat_kernel() {
        // int_{c+iR} e^{(q-p) xi + da xi^2} dxi/(2 pi i) at da = 0.7, c = -0.6.
        let (da, cc, diff) = (0.7, -0.6, 1.3);
        let st = vertical_station(cc, da, diff, 10.0, 16);
        let mut acc = Complex64::new(0.0, 0.0);
        for (&x, &w) in st.points.iter().zip(&st.weights) {
            acc += w * (diff * x + da * x * x).exp();
        }
        let exact = (-diff * diff / (4.0 * da)).exp() / (4.0 * std::f64::consts::PI * da).sqrt();
        assert!((acc.re - exact).abs() < 1e-12 && acc.im.abs() < 1e-12);
    }

    #[test]
    fn query_and_level_validation() {
        assert!(matches!(EqualTimeQuery::new(vec![]), Err(EqualTimeError::EmptyQuery)));
        assert!(matches!(
            EqualTimeQuery::new(vec![(0.0, 0.0), (0.0, 1.0)]),
            Err(EqualTimeError::QueryOrder)
        ));
        let q = nw_query(&[(0.0, 0.0)]);
        let r = t_kernel(
            2,
            c(1.0, 0.0),
            1,
            c(1.0, 0.0),
            &q,
            &KpzInitial::NarrowWedge,
            &ChiParams::default(),
            &EqualTimeConfig::default(),
        );
        assert!(matches!(r, Err(EqualTimeError::LevelRange)));
    }

    #[test]
    fn s_kernel_matches_system_entries() {
        let cfg = EqualTimeConfig::default();
        let p = ChiParams::default();
        let init = KpzInitial::NarrowWedge;
        let q = nw_query(&[(0.0, 0.0), (1.0, 1.0)]);
        let sys = s_system(&q, &init, &p, &cfg).unwrap();
        let (xs, ws) = real_grid(&cfg);
        for (a, c_) in [(10, 150), (100, 40)] {
            let direct = s_kernel(xs[a], xs[c_], &q, &init, &p, &cfg).unwrap();
            let folded = sys.matrix[a * sys.dim + c_] / (ws[a].sqrt() * ws[c_].sqrt());
            assert!((direct - folded).norm() < 1e-12);
        }
    }
}
