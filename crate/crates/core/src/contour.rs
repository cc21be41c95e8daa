//! Nested integration contours and quadrature on them.
//!
//! Two families: circles in the half-disks around -1 and 0 (discrete side),
//! and unbounded truncated-ray contours at angles 2pi/3 (left) and pi/5
//! (right) (continuum side). Circles carry spectrally accurate trapezoid
//! nodes; rays carry composite Gauss-Legendre nodes. Every node weight
//! already includes the parametrization derivative and the 1/(2pi i), but
//! not the z-dependent measure factor, which varies per z-vector and is
//! supplied by [`z_measure_factor`].

use crate::quad::{circle_angles, composite_gauss_legendre};
use crate::{two_pi_i, Complex64};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ContourError {
    #[error("invalid contour configuration: {0}")]
    Config(String),
    #[error("integrand returned a non-finite value at node {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Nesting {
    Out,
    Base,
    In,
}

#[derive(Debug, Clone, Copy)]
pub enum Shape {
    Circle { center: Complex64, radius: f64 },
    TruncatedRays { vertex: f64, angle: f64, truncation_radius: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct ContourNode {
    pub point: Complex64,
    /// Quadrature weight times d(point)/d(parameter), divided by 2 pi i.
    pub base_weight: Complex64,
}

#[derive(Debug, Clone)]
pub struct LabeledContour {
    pub level: usize,
    pub side: Side,
    pub nesting: Nesting,
    pub shape: Shape,
    pub nodes: Vec<ContourNode>,
}

/// All 2(2m-1) contours of one family. Per side: one base contour at level 1
/// and an in/out pair for each level 2..=m.
#[derive(Debug, Clone)]
pub struct ContourFamily {
    pub m: usize,
    pub contours: Vec<LabeledContour>,
}

impl ContourFamily {
    pub fn contour(&self, level: usize, side: Side, nesting: Nesting) -> &LabeledContour {
        self.contours
            .iter()
            .find(|c| c.level == level && c.side == side && c.nesting == nesting)
            .expect("contour family is complete by construction")
    }
}

/// Counterclockwise trapezoid nodes on a circle. Midpoint angles keep nodes
/// off the real axis, so node sets come in conjugate pairs.
pub fn circle_nodes(center: Complex64, radius: f64, n: usize) -> Vec<ContourNode> {
    circle_angles(n)
        .into_iter()
        .map(|phi| {
            let e = Complex64::from_polar(1.0, phi);
            ContourNode {
                point: center + radius * e,
                // i r e^{i phi} * (2 pi / n) / (2 pi i) = r e^{i phi} / n
                base_weight: radius * e / n as f64,
            }
        })
        .collect()
}

/// Nodes on the contour running from vertex + R e^{-i angle} up through the
/// vertex to vertex + R e^{i angle}, ordered along that orientation. Each ray
/// carries `panels` Gauss-Legendre panels of `per_panel` nodes.
pub fn ray_nodes(
    vertex: f64,
    angle: f64,
    truncation_radius: f64,
    per_panel: usize,
    panels: usize,
) -> Vec<ContourNode> {
    let (ss, ws) = composite_gauss_legendre(per_panel, panels, 0.0, truncation_radius);
    let v = Complex64::new(vertex, 0.0);
    let down = Complex64::from_polar(1.0, -angle);
    let up = Complex64::from_polar(1.0, angle);
    let mut nodes = Vec::with_capacity(2 * ss.len());
    // Lower ray traversed from the far end toward the vertex: d(point) points
    // along -down, hence the sign.
    for (s, w) in ss.iter().rev().zip(ws.iter().rev()) {
        nodes.push(ContourNode {
            point: v + s * down,
            base_weight: -w * down / two_pi_i(),
        });
    }
    for (s, w) in ss.iter().zip(&ws) {
        nodes.push(ContourNode {
            point: v + s * up,
            base_weight: w * up / two_pi_i(),
        });
    }
    nodes
}

#[derive(Debug, Clone, Copy)]
pub struct TasepRadiiConfig {
    pub base: f64,
    pub spacing: f64,
    pub nodes_per_circle: usize,
}

impl Default for TasepRadiiConfig {
    fn default() -> Self {
        TasepRadiiConfig { base: 0.25, spacing: 0.06, nodes_per_circle: 64 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KpzVertexConfig {
    /// Distance of the innermost vertex from the imaginary axis.
    pub base_offset: f64,
    pub spacing: f64,
    pub panels_per_ray: usize,
}

impl Default for KpzVertexConfig {
    fn default() -> Self {
        KpzVertexConfig { base_offset: 0.35, spacing: 0.35, panels_per_ray: 2 }
    }
}

/// Position p = 1..2m-1 counted from the outermost contour inward:
/// out contours of levels m..2, then the base, then in contours of 2..m.
fn position_label(m: usize, p: usize) -> (usize, Nesting) {
    if p < m {
        (m + 1 - p, Nesting::Out)
    } else if p == m {
        (1, Nesting::Base)
    } else {
        (p - m + 1, Nesting::In)
    }
}

/// Nested circles around -1 (left) and 0 (right). Radii descend from
/// base + spacing (m-1) for the outermost to base - spacing (m-1) for the
/// innermost; all must stay inside the half-disk of radius 1/2.
pub fn build_tasep_contours(
    m: usize,
    cfg: TasepRadiiConfig,
) -> Result<ContourFamily, ContourError> {
    if m == 0 {
        return Err(ContourError::Config("level count must be at least 1".into()));
    }
    if m > 1 && cfg.spacing <= 0.0 {
        return Err(ContourError::Config("circle radii collide: spacing must be positive".into()));
    }
    let r_max = cfg.base + cfg.spacing * (m as f64 - 1.0);
    let r_min = cfg.base - cfg.spacing * (m as f64 - 1.0);
    if r_max >= 0.5 {
        return Err(ContourError::Config(format!(
            "outermost radius {r_max} must stay below 1/2"
        )));
    }
    if r_min <= 0.0 {
        return Err(ContourError::Config(format!(
            "innermost radius {r_min} must stay positive"
        )));
    }
    let mut contours = Vec::with_capacity(2 * (2 * m - 1));
    for (side, center) in [
        (Side::Left, Complex64::new(-1.0, 0.0)),
        (Side::Right, Complex64::new(0.0, 0.0)),
    ] {
        for p in 1..=(2 * m - 1) {
            let (level, nesting) = position_label(m, p);
            let radius = cfg.base + cfg.spacing * (m as f64 - p as f64);
            contours.push(LabeledContour {
                level,
                side,
                nesting,
                shape: Shape::Circle { center, radius },
                nodes: circle_nodes(center, radius, cfg.nodes_per_circle),
            });
        }
    }
    Ok(ContourFamily { m, contours })
}

pub const LEFT_RAY_ANGLE: f64 = 2.0 * std::f64::consts::PI / 3.0;
pub const RIGHT_RAY_ANGLE: f64 = std::f64::consts::PI / 5.0;

/// Truncated-ray contours opening toward -infinity (left, angle 2pi/3) and
/// +infinity (right, angle pi/5). Out contours sit closest to the imaginary
/// axis. `quad_order` is the node count per ray, split evenly over the
/// configured panels.
pub fn build_kpz_contours(
    m: usize,
    cfg: KpzVertexConfig,
    truncation_radius: f64,
    quad_order: usize,
) -> Result<ContourFamily, ContourError> {
    if m == 0 {
        return Err(ContourError::Config("level count must be at least 1".into()));
    }
    if truncation_radius <= 0.0 {
        return Err(ContourError::Config("truncation radius must be positive".into()));
    }
    if m > 1 && cfg.spacing <= 0.0 {
        return Err(ContourError::Config("vertex collision: spacing must be positive".into()));
    }
    if cfg.base_offset <= 0.0 {
        return Err(ContourError::Config("base offset must be positive".into()));
    }
    let panels = cfg.panels_per_ray.max(1);
    if quad_order < 4 * panels {
        return Err(ContourError::Config(
            "need at least 4 quadrature nodes per ray panel".into(),
        ));
    }
    let per_panel = quad_order / panels;
    let mut contours = Vec::with_capacity(2 * (2 * m - 1));
    for (side, sign, angle) in [
        (Side::Left, -1.0, LEFT_RAY_ANGLE),
        (Side::Right, 1.0, RIGHT_RAY_ANGLE),
    ] {
        for p in 1..=(2 * m - 1) {
            let (level, nesting) = position_label(m, p);
            let vertex = sign * (cfg.base_offset + cfg.spacing * (p as f64 - 1.0));
            contours.push(LabeledContour {
                level,
                side,
                nesting,
                shape: Shape::TruncatedRays { vertex, angle, truncation_radius },
                nodes: ray_nodes(vertex, angle, truncation_radius, per_panel, panels),
            });
        }
    }
    Ok(ContourFamily { m, contours })
}

/// The measure factor that multiplies d(point)/(2 pi i) on each contour:
/// -z_{l-1}/(1-z_{l-1}) on out contours, 1/(1-z_{l-1}) on in contours
/// (level l >= 2), and 1 on the base contour.
pub fn z_measure_factor(level: usize, nesting: Nesting, z: &[Complex64]) -> Complex64 {
    match nesting {
        Nesting::Base => {
            assert_eq!(level, 1, "base contours live at level 1");
            Complex64::new(1.0, 0.0)
        }
        Nesting::Out => {
            assert!(level >= 2, "out contours live at levels >= 2");
            let zl = z[level - 2];
            -zl / (1.0 - zl)
        }
        Nesting::In => {
            assert!(level >= 2, "in contours live at levels >= 2");
            1.0 / (1.0 - z[level - 2])
        }
    }
}

/// Sum of base_weight * f(point) over the contour's nodes, i.e. the
/// quadrature realization of the d(point)/(2 pi i) integral.
pub fn contour_integrate<F>(contour: &LabeledContour, mut f: F) -> Result<Complex64, ContourError>
where
    F: FnMut(Complex64) -> Complex64,
{
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, node) in contour.nodes.iter().enumerate() {
        let v = f(node.point);
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(ContourError::NonFinite(i));
        }
        acc += node.base_weight * v;
    }
    Ok(acc)
}

#[derive(Debug, Clone)]
pub struct ZCycle {
    pub radius: f64,
    pub nodes: Vec<ContourNode>,
}

impl ZCycle {
    pub fn new(radius: f64, n: usize) -> Result<Self, ContourError> {
        if !(0.0..1.0).contains(&radius) || radius == 0.0 {
            return Err(ContourError::Config(format!(
                "z-cycle radius {radius} must lie in (0, 1)"
            )));
        }
        if n < 8 {
            return Err(ContourError::Config("z-cycle needs at least 8 nodes".into()));
        }
        Ok(ZCycle { radius, nodes: circle_nodes(Complex64::new(0.0, 0.0), radius, n) })
    }
}

/// Tensor-product evaluation of the iterated z-integrals with weight
/// 1/(z_l (1-z_l)) applied here; `g` receives the bare z-vector. With no
/// cycles this is just g of the empty vector.
pub fn z_cycle_integrate<G>(cycles: &[ZCycle], mut g: G) -> Result<Complex64, ContourError>
where
    G: FnMut(&[Complex64]) -> Complex64,
{
    let k = cycles.len();
    if k == 0 {
        let v = g(&[]);
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(ContourError::NonFinite(0));
        }
        return Ok(v);
    }
    let mut idx = vec![0usize; k];
    let mut z = vec![Complex64::new(0.0, 0.0); k];
    let mut acc = Complex64::new(0.0, 0.0);
    loop {
        let mut w = Complex64::new(1.0, 0.0);
        for (j, cycle) in cycles.iter().enumerate() {
            let node = &cycle.nodes[idx[j]];
            z[j] = node.point;
            w *= node.base_weight / (node.point * (1.0 - node.point));
        }
        let v = g(&z);
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(ContourError::NonFinite(idx[0]));
        }
        acc += w * v;
        // Odometer increment over the node grid.
        let mut j = 0;
        loop {
            idx[j] += 1;
            if idx[j] < cycles[j].nodes.len() {
                break;
            }
            idx[j] = 0;
            j += 1;
            if j == k {
                return Ok(acc);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::airy_ai_series;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tasep_family_m2_radii() {
        let fam = build_tasep_contours(2, TasepRadiiConfig::default()).unwrap();
        assert_eq!(fam.contours.len(), 6);
        let check = |lvl, nest, want_r: f64| {
            let c = fam.contour(lvl, Side::Left, nest);
            match c.shape {
                Shape::Circle { center, radius } => {
                    assert_abs_diff_eq!(center.re, -1.0);
                    assert_abs_diff_eq!(radius, want_r, epsilon = 1e-15);
                }
                _ => panic!("expected circle"),
            }
        };
        check(2, Nesting::Out, 0.31);
        check(1, Nesting::Base, 0.25);
        check(2, Nesting::In, 0.19);
    }

    #[test]
    fn tasep_family_rejects_oversized_radii() {
        let cfg = TasepRadiiConfig { base: 0.48, spacing: 0.06, nodes_per_circle: 64 };
        assert!(build_tasep_contours(2, cfg).is_err());
    }

    #[test]
    fn circle_reproduces_residues() {
        let fam = build_tasep_contours(1, TasepRadiiConfig::default()).unwrap();
        let right = fam.contour(1, Side::Right, Nesting::Base);
        let left = fam.contour(1, Side::Left, Nesting::Base);
        for k in -5i32..=5 {
            let v = contour_integrate(right, |w| w.powi(k)).unwrap();
            let want = if k == -1 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(v.re, want, epsilon = 1e-12);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
            let v = contour_integrate(left, |w| (w + 1.0).powi(k)).unwrap();
            assert_abs_diff_eq!(v.re, want, epsilon = 1e-12);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn kpz_node_count_and_half_plane() {
        let fam = build_kpz_contours(1, KpzVertexConfig::default(), 8.0, 24).unwrap();
        let left = fam.contour(1, Side::Left, Nesting::Base);
        assert_eq!(left.nodes.len(), 48);
        assert!(left.nodes.iter().all(|n| n.point.re < 0.0));
        let right = fam.contour(1, Side::Right, Nesting::Base);
        assert!(right.nodes.iter().all(|n| n.point.re > 0.0));
    }

    #[test]
    fn left_rays_integrate_to_airy() {
        // integral over the left contour of e^{-xi^3/3 + x xi} d(xi)/(2 pi i)
        // equals Ai(x).
        let cfg = KpzVertexConfig { base_offset: 0.5, spacing: 0.35, panels_per_ray: 2 };
        let fam = build_kpz_contours(1, cfg, 10.0, 48).unwrap();
        let left = fam.contour(1, Side::Left, Nesting::Base);
        for &x in &[0.0, 2.0] {
            let v = contour_integrate(left, |xi| (-xi * xi * xi / 3.0 + x * xi).exp()).unwrap();
            assert_abs_diff_eq!(v.re, airy_ai_series(x), epsilon = 1e-10);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn kpz_vertices_nest_out_to_in() {
        let fam = build_kpz_contours(3, KpzVertexConfig::default(), 8.0, 24).unwrap();
        let v = |lvl, nest| match fam.contour(lvl, Side::Left, nest).shape {
            Shape::TruncatedRays { vertex, .. } => vertex,
            _ => panic!("expected rays"),
        };
        // Left side: out contours closest to the axis, ins furthest.
        assert!(v(3, Nesting::Out) > v(2, Nesting::Out));
        assert!(v(2, Nesting::Out) > v(1, Nesting::Base));
        assert!(v(1, Nesting::Base) > v(2, Nesting::In));
        assert!(v(2, Nesting::In) > v(3, Nesting::In));
    }

    #[test]
    fn measure_factor_cases() {
        let z = [Complex64::new(0.5, 0.0)];
        let out = z_measure_factor(2, Nesting::Out, &z);
        assert_abs_diff_eq!(out.re, -1.0, epsilon = 1e-15);
        let inn = z_measure_factor(2, Nesting::In, &z);
        assert_abs_diff_eq!(inn.re, 2.0, epsilon = 1e-15);
        let base = z_measure_factor(1, Nesting::Base, &z);
        assert_abs_diff_eq!(base.re, 1.0, epsilon = 1e-15);
    }

    /// Laurent-coefficient oracle: the cycle integral extracts the z^{-1}
    /// coefficient of g(z)/(z(1-z)). The 1/(1-z) tail aliases onto that
    /// coefficient with magnitude radius^nodes, which sets the tolerance for
    /// 32 nodes at radius 0.5 (~2.3e-10) and vanishes for finite Laurent
    /// polynomials.
    #[test]
    fn z_cycle_against_laurent_oracle() {
        let c = ZCycle::new(0.5, 32).unwrap();
        let one = z_cycle_integrate(std::slice::from_ref(&c), |_| Complex64::new(1.0, 0.0))
            .unwrap();
        assert_abs_diff_eq!(one.re, 1.0, epsilon = 5e-10);
        let fine = ZCycle::new(0.5, 64).unwrap();
        let one = z_cycle_integrate(std::slice::from_ref(&fine), |_| Complex64::new(1.0, 0.0))
            .unwrap();
        assert_abs_diff_eq!(one.re, 1.0, epsilon = 1e-13);
        let zed = z_cycle_integrate(std::slice::from_ref(&c), |z| z[0]).unwrap();
        assert_abs_diff_eq!(zed.re, 0.0, epsilon = 5e-10);
        assert_abs_diff_eq!(zed.im, 0.0, epsilon = 5e-10);
        // g = (1 - 1/z)^2 (1 - z): g/(z(1-z)) = 1/z - 2/z^2 + 1/z^3, residue 1;
        // no tail, so quadrature is exact.
        let g = |z: &[Complex64]| {
            let z0 = z[0];
            let a = 1.0 - 1.0 / z0;
            a * a * (1.0 - z0)
        };
        for radius in [0.3, 0.5, 0.6] {
            let c = ZCycle::new(radius, 32).unwrap();
            let v = z_cycle_integrate(std::slice::from_ref(&c), g).unwrap();
            assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        }
        let two = [ZCycle::new(0.5, 32).unwrap(), ZCycle::new(0.5, 32).unwrap()];
        let v = z_cycle_integrate(&two, |_| Complex64::new(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn non_finite_integrand_is_an_error() {
        let fam = build_tasep_contours(1, TasepRadiiConfig::default()).unwrap();
        let c = fam.contour(1, Side::Right, Nesting::Base);
        let r = contour_integrate(c, |_| Complex64::new(f64::NAN, 0.0));
        assert!(matches!(r, Err(ContourError::NonFinite(_))));
    }
}
