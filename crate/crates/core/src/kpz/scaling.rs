//! The 1:2:3 scaling bridge between TASEP and the fixed-point formulas.
//!
//! A fixed-point query (alpha, tau, beta) pulls back to the lattice as
//! particle index k = tau/(2 eps^{3/2}) - alpha/eps - beta/(2 sqrt(eps)),
//! site a = 2 alpha/eps and time t = 2 tau/eps^{3/2}, every O(1) freedom
//! resolved by nearest-integer rounding. convergence_study drives the
//! discretized system through Monte Carlo at a decreasing sequence of eps
//! and tabulates the gap to the limit value; the exact lattice series is
//! far out of reach at these sizes (hundreds of particles), so the Monte
//! Carlo estimator with its binomial stderr is the recorded limitation.

use super::{
    chi_mnw, joint_cdf, ChiParams, KpzError, KpzInitial, KpzQueryList, MultiNarrowWedge,
};
use crate::series::TruncationParams;
use crate::tasep::{
    ch_eval, discretize_mnw_depth, mc_joint_cdf, SimConfig, TasepError, TasepInitial, TasepQuery,
    TasepQueryList,
};
use crate::Complex64;

/// Nearest-integer realization of the scaled query parameters.
pub fn scale_query(q: &KpzQueryList, eps: f64) -> Result<Vec<TasepQuery>, KpzError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(TasepError::StepSize.into());
    }
    let e32 = eps.powf(-1.5);
    q.entries()
        .iter()
        .map(|e| {
            let k = (0.5 * e32 * e.tau - e.alpha / eps - 0.5 * e.beta / eps.sqrt()).round();
            if k < 1.0 {
                return Err(KpzError::ScaleIndex(k as i64));
            }
            let a = (2.0 * e.alpha / eps).round() as i64;
            Ok(TasepQuery { k: k as usize, t: 2.0 * e32 * e.tau, a })
        })
        .collect()
}

/// (eps/4)^{1/2} ch_{Y}(-1/2 + sqrt(eps) eta / 2, -1/2 + sqrt(eps) xi / 2),
/// the lattice characteristic function in fixed-point coordinates.
pub fn rescaled_ch(
    y: &TasepInitial,
    eps: f64,
    eta: Complex64,
    xi: Complex64,
) -> Result<Complex64, TasepError> {
    let half = 0.5 * eps.sqrt();
    let v = Complex64::new(-0.5, 0.0) + half * eta;
    let u = Complex64::new(-0.5, 0.0) + half * xi;
    Ok(half * ch_eval(y, v, u)?)
}

/// Smallest C with |rescaled_ch| <= e^{C(|xi|^2+|eta|^2+|xi|+|eta|+1)}/Re(eta)
/// over the sampled points. The quadratic-exponent shape is only claimed for
/// |sqrt(eps) eta|, |sqrt(eps) xi| < 1/100, so keep the points inside that.
pub fn fit_bound_constant(
    y: &TasepInitial,
    eps: f64,
    points: &[(Complex64, Complex64)],
) -> Result<f64, TasepError> {
    let mut c = f64::NEG_INFINITY;
    for &(eta, xi) in points {
        let val = rescaled_ch(y, eps, eta, xi)?.norm();
        let quad = xi.norm_sqr() + eta.norm_sqr() + xi.norm() + eta.norm() + 1.0;
        c = c.max((val * eta.re).ln() / quad);
    }
    Ok(c)
}

/// Default probe grid for the quadratic bound, valid for every eps <= 0.1.
pub fn bound_gate_points() -> Vec<(Complex64, Complex64)> {
    let c = Complex64::new;
    vec![
        (c(0.02, 0.0), c(-0.02, 0.0)),
        (c(0.015, 0.012), c(-0.01, -0.015)),
        (c(0.028, -0.008), c(-0.025, 0.01)),
        (c(0.006, 0.0), c(-0.03, 0.0)),
    ]
}

#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub eps: f64,
    /// The query after pullback: one (k, t, a) per fixed-point event.
    pub scaled: Vec<TasepQuery>,
    pub mc_estimate: f64,
    pub mc_stderr: f64,
    /// |mc_estimate - kpz_value|.
    pub abs_error: f64,
    /// Fitted quadratic-bound constant at this eps (sanity gate).
    pub bound_c: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub kpz_value: f64,
    pub kpz_truncation: f64,
    pub rows: Vec<ConvergenceRow>,
}

/// Largest lattice horizon the study will simulate; 2 tau / eps^{3/2}
/// beyond this is rejected rather than left to run for hours.
const HORIZON_BUDGET: f64 = 5.0e4;

/// Lattice-to-limit convergence table. For each eps the profile is
/// discretized (leftmost cluster cut just past the largest queried index,
/// which is exact: a particle is only ever blocked from the right), the
/// query pulled back through scale_query, and the event estimated by Monte
/// Carlo; the limit column is the fixed-point series value. No rate is
/// asserted here, only the tabulated error sequence.
pub fn convergence_study(
    mnw: &MultiNarrowWedge,
    q: &KpzQueryList,
    eps_list: &[f64],
    tp: &TruncationParams,
    sim: &SimConfig,
) -> Result<ConvergenceTable, KpzError> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(TasepError::StepSize.into());
    }
    let tau_max = q.entries().iter().map(|e| e.tau).fold(0.0, f64::max);
    let kpz = joint_cdf(&KpzInitial::Wedges(mnw.clone()), q, &ChiParams::default(), tp)?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let horizon = 2.0 * eps.powf(-1.5) * tau_max;
        if horizon > HORIZON_BUDGET {
            return Err(KpzError::ScaleBudget(horizon));
        }
        let scaled = scale_query(q, eps)?;
        let k_max = scaled.iter().map(|s| s.k).max().unwrap();
        let n_finite = discretize_mnw_depth(mnw, eps, 1)?.n() - 1;
        let depth = (k_max + 1).saturating_sub(n_finite).max(1);
        let y = discretize_mnw_depth(mnw, eps, depth)?;
        let ql = TasepQueryList::new(scaled.clone(), y.n())?;
        let (mc_estimate, mc_stderr) = mc_joint_cdf(&y, &ql, sim)?;
        let bound_c = fit_bound_constant(&y, eps, &bound_gate_points())?;
        rows.push(ConvergenceRow {
            eps,
            scaled,
            mc_estimate,
            mc_stderr,
            abs_error: (mc_estimate - kpz.probability).abs(),
            bound_c,
        });
    }
    Ok(ConvergenceTable {
        kpz_value: kpz.probability,
        kpz_truncation: kpz.truncation_estimate,
        rows,
    })
}

/// Pointwise gap |rescaled_ch - chi_mnw| at one (eta, xi), with the
/// leftmost cluster cut at `depth` particles (the walk construction only
/// feels depth through geometrically small tails).
pub fn rescaled_ch_gap(
    mnw: &MultiNarrowWedge,
    eps: f64,
    depth: usize,
    eta: Complex64,
    xi: Complex64,
    p: &ChiParams,
) -> Result<f64, KpzError> {
    let y = discretize_mnw_depth(mnw, eps, depth)?;
    let lattice = rescaled_ch(&y, eps, eta, xi)?;
    let limit = chi_mnw(mnw, eta, xi, p)?;
    Ok((lattice - limit).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kpz::KpzQuery;

    fn queries(list: Vec<(f64, f64, f64)>) -> KpzQueryList {
        KpzQueryList::new(
            list.into_iter().map(|(alpha, tau, beta)| KpzQuery { alpha, tau, beta }).collect(),
        )
        .unwrap()
    }

    #[test]
    fn scaled_indices_follow_the_one_two_three_exponents() {
        let q = queries(vec![(0.5, 1.0, 0.3)]);
        let s = scale_query(&q, 0.04).unwrap();
        // eps^{-3/2} = 125: k = round(62.5 - 12.5 - 0.75), a = 2*0.5/0.04.
        assert_eq!(s[0].k, 49);
        assert_eq!(s[0].a, 25);
        assert!((s[0].t - 250.0).abs() < 1e-9);

        let impossible = queries(vec![(0.0, 0.01, 50.0)]);
        assert!(matches!(scale_query(&impossible, 0.1), Err(KpzError::ScaleIndex(_))));
    }

    #[test]
    fn rescaled_ch_approaches_chi_limits() {
        let p = ChiParams::default();
        let eta = Complex64::new(1.0, 0.3);
        let xi = Complex64::new(-1.0, -0.2);
        for mnw in [
            MultiNarrowWedge::single(0.0, 0.0),
            MultiNarrowWedge::new(vec![(0.0, 0.0), (-0.6, 0.0), (-1.3, 0.0)]).unwrap(),
        ] {
            let mut gaps = Vec::new();
            for eps in [0.02, 0.01, 0.005] {
                gaps.push(rescaled_ch_gap(&mnw, eps, 220, eta, xi, &p).unwrap());
            }
            // Index rounding costs O(1), so the rescaled gap decays ~sqrt(eps).
            assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "gaps {gaps:?}");
            assert!(gaps[2] < 0.75 * gaps[0] && gaps[2] < 0.2, "gaps {gaps:?}");
        }
        // Generic wedge heights add floor jitter from theta/(2 sqrt(eps)),
        // so only the coarse decrease is stable on a short eps grid.
        let bumpy = MultiNarrowWedge::new(vec![(0.0, 0.0), (-0.6, 0.3), (-1.3, -0.25)]).unwrap();
        let wide = rescaled_ch_gap(&bumpy, 0.02, 220, eta, xi, &p).unwrap();
        let fine = rescaled_ch_gap(&bumpy, 0.0025, 220, eta, xi, &p).unwrap();
        assert!(fine < 0.85 * wide, "coarse {wide} vs fine {fine}");
    }

    #[test]
    fn uniform_bound_constant_stays_tame() {
        let mnw = MultiNarrowWedge::new(vec![(0.0, 0.0), (-0.8, -0.4)]).unwrap();
        for eps in [0.1, 0.05, 0.025] {
            let y = discretize_mnw_depth(&mnw, eps, 200).unwrap();
            let c = fit_bound_constant(&y, eps, &bound_gate_points()).unwrap();
            assert!(c.is_finite() && c < 2.0, "eps = {eps}: C = {c}");
        }
    }

    #[test]
    fn study_rejects_oversized_and_degenerate_inputs() {
        let mnw = MultiNarrowWedge::single(0.0, 0.0);
        let q = queries(vec![(0.0, 1.0, 0.0)]);
        let tp = TruncationParams::default();
        let sim = SimConfig::new(7, 100, 10.0).unwrap();
        assert!(matches!(
            convergence_study(&mnw, &q, &[1e-4], &tp, &sim),
            Err(KpzError::ScaleBudget(_))
        ));
        let tight = MultiNarrowWedge::new(vec![(0.0, 0.0), (-0.05, -1.0)]).unwrap();
        assert!(matches!(
            convergence_study(&tight, &q, &[0.2], &tp, &sim),
            Err(KpzError::Tasep(TasepError::BlockOverlap))
        ));
        assert!(convergence_study(&mnw, &q, &[0.05, 0.1], &tp, &sim).is_err());
    }

    #[test]
    fn miniature_study_produces_a_sane_table() {
        let mnw = MultiNarrowWedge::single(0.0, 0.0);
        let q = queries(vec![(0.0, 1.0, 0.0)]);
        let tp = TruncationParams::default();
        let sim = SimConfig::new(41, 4000, 40.0).unwrap();
        let table = convergence_study(&mnw, &q, &[0.25, 0.15], &tp, &sim).unwrap();
        assert!(table.kpz_value > 0.9 && table.kpz_value < 1.0);
        assert_eq!(table.rows.len(), 2);
        for row in &table.rows {
            assert!(row.mc_stderr > 0.0 && row.mc_stderr < 0.02);
            assert!(row.abs_error.is_finite());
            assert!(row.scaled[0].k >= 1);
        }
        // Same seed, same table.
        let again = convergence_study(&mnw, &q, &[0.25, 0.15], &tp, &sim).unwrap();
        assert_eq!(again.rows[0].mc_estimate, table.rows[0].mc_estimate);
        assert_eq!(again.rows[1].mc_estimate, table.rows[1].mc_estimate);
    }
}
