//! The invariant suite behind the `verify` subcommand. Quick covers every
//! module with sub-minute checks; full adds the heavyweight cross-method
//! agreements and the scaling convergence tables.

use crate::run::Row;
use kpzmp::contour::TasepRadiiConfig;
use kpzmp::equal_time::{fredholm_mqr, fredholm_new, tw_gue, EqualTimeConfig, EqualTimeQuery};
use kpzmp::kpz::{
    chi_mnw, chi_single_wedge, convergence_study, joint_cdf, recommended_params, rescaled_ch_gap,
    ChiParams, KpzInitial, KpzQuery, KpzQueryList, MultiNarrowWedge,
};
use kpzmp::series::TruncationParams;
use kpzmp::tasep::{
    binom_identity_check, ch_eval, ch_path_oracle, ctmc_joint_cdf, discretize_mnw, height_encode,
    joint_cdf as tasep_joint_cdf, joint_cdf_with_radii, mc_joint_cdf, poisson_tail, SimConfig,
    TasepInitial, TasepQuery, TasepQueryList,
};
use kpzmp::Complex64;

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub gap: f64,
}

fn check(
    out: &mut Vec<Check>,
    name: &'static str,
    body: impl FnOnce() -> Result<(bool, f64), String>,
) {
    let (pass, gap) = match body() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("  {name}: error: {e}");
            (false, f64::NAN)
        }
    };
    println!("  {} {name} (gap {gap:.3e})", if pass { "PASS" } else { "FAIL" });
    out.push(Check { name, pass, gap });
}

fn nw_query(beta: f64) -> KpzQueryList {
    KpzQueryList::new(vec![KpzQuery { alpha: 0.0, tau: 1.0, beta }]).unwrap()
}

fn quick_suite(seed: u64, checks: &mut Vec<Check>) {
    let c = Complex64::new;

    check(checks, "tasep_ch_walk_oracle", || {
        let y = TasepInitial::new(vec![2, 0, -1, -5]).map_err(|e| e.to_string())?;
        let v = c(0.2, 0.4);
        let u = c(-0.45, 0.1);
        let gap = (ch_eval(&y, v, u).map_err(|e| e.to_string())? - ch_path_oracle(&y, v, u))
            .norm();
        Ok((gap < 1e-10, gap))
    });

    check(checks, "tasep_binomial_identity", || {
        let y = TasepInitial::step(6);
        let mut worst: f64 = 0.0;
        for i in 1..=4 {
            for z in -6..=2 {
                let (lhs, rhs) = binom_identity_check(&y, z, i);
                worst = worst.max((lhs - rhs).abs());
            }
        }
        Ok((worst < 1e-9, worst))
    });

    check(checks, "tasep_z_radius_invariance", || {
        let y = TasepInitial::new(vec![0, -1]).map_err(|e| e.to_string())?;
        let q = TasepQueryList::new(vec![TasepQuery { k: 2, t: 1.0, a: 0 }], 2)
            .map_err(|e| e.to_string())?;
        let mut tp = TruncationParams { n_total_max: 3, ..TruncationParams::default() };
        tp.z_radius = 0.4;
        let a = tasep_joint_cdf(&y, &q, &tp).map_err(|e| e.to_string())?.probability;
        tp.z_radius = 0.55;
        let b = tasep_joint_cdf(&y, &q, &tp).map_err(|e| e.to_string())?.probability;
        let gap = (a - b).abs();
        Ok((gap < 1e-9, gap))
    });

    check(checks, "tasep_contour_spacing_invariance", || {
        let y = TasepInitial::new(vec![0, -1]).map_err(|e| e.to_string())?;
        let q = TasepQueryList::new(vec![TasepQuery { k: 2, t: 1.0, a: 0 }], 2)
            .map_err(|e| e.to_string())?;
        let tp = TruncationParams { n_total_max: 3, ..TruncationParams::default() };
        let a = tasep_joint_cdf(&y, &q, &tp).map_err(|e| e.to_string())?.probability;
        let alt = TasepRadiiConfig { base: 0.22, spacing: 0.05, nodes_per_circle: 64 };
        let b = joint_cdf_with_radii(&y, &q, &tp, &alt).map_err(|e| e.to_string())?.probability;
        let gap = (a - b).abs();
        Ok((gap < 1e-8, gap))
    });

    check(checks, "tasep_series_vs_exact_solver", || {
        let y = TasepInitial::new(vec![0, -1]).map_err(|e| e.to_string())?;
        let q = TasepQueryList::new(vec![TasepQuery { k: 2, t: 1.0, a: 0 }], 2)
            .map_err(|e| e.to_string())?;
        let tp = TruncationParams { n_total_max: 4, ..TruncationParams::default() };
        let series = tasep_joint_cdf(&y, &q, &tp).map_err(|e| e.to_string())?.probability;
        let exact = ctmc_joint_cdf(&y, &q).map_err(|e| e.to_string())?;
        let gap = (series - exact).abs();
        Ok((gap < 1e-5, gap))
    });

    check(checks, "tasep_mc_vs_exact_solver", || {
        let y = TasepInitial::new(vec![0, -1]).map_err(|e| e.to_string())?;
        let q = TasepQueryList::new(
            vec![TasepQuery { k: 1, t: 0.8, a: 1 }, TasepQuery { k: 2, t: 1.5, a: 0 }],
            2,
        )
        .map_err(|e| e.to_string())?;
        let exact = ctmc_joint_cdf(&y, &q).map_err(|e| e.to_string())?;
        let cfg = SimConfig::new(seed, 40_000, 2.0).map_err(|e| e.to_string())?;
        let (est, se) = mc_joint_cdf(&y, &q, &cfg).map_err(|e| e.to_string())?;
        let gap = (est - exact).abs();
        Ok((gap < 3.5 * se, gap))
    });

    check(checks, "tasep_free_particle_poisson", || {
        let y = TasepInitial::new(vec![0]).map_err(|e| e.to_string())?;
        let q = TasepQueryList::new(vec![TasepQuery { k: 1, t: 1.0, a: 1 }], 1)
            .map_err(|e| e.to_string())?;
        let exact = ctmc_joint_cdf(&y, &q).map_err(|e| e.to_string())?;
        let gap = (exact - poisson_tail(1.0, 1)).abs();
        Ok((gap < 1e-12, gap))
    });

    check(checks, "chi_wedge_shift_vs_mnw", || {
        let p = ChiParams::default();
        let mnw = MultiNarrowWedge::single(0.4, -0.3);
        let mut worst: f64 = 0.0;
        for (eta, xi) in [(c(1.0, 0.2), c(-0.8, 0.1)), (c(0.5, -0.6), c(-1.2, 0.4))] {
            let a = chi_single_wedge(0.4, -0.3, eta, xi);
            let b = chi_mnw(&mnw, eta, xi, &p).map_err(|e| e.to_string())?;
            worst = worst.max((a - b).norm());
        }
        Ok((worst < 1e-8, worst))
    });

    check(checks, "chi_heat_shift_identity", || {
        let gap = kpzmp::kpz::heat_shift_identity_check(c(0.7, 0.4), 0.8, 0.3, 64)
            .map_err(|e| e.to_string())?;
        Ok((gap < 1e-10, gap))
    });

    check(checks, "chi_growth_bound", || {
        let p = ChiParams::default();
        let mnw = MultiNarrowWedge::new(vec![(0.5, 0.1), (-0.4, -0.2)]).map_err(|e| e.to_string())?;
        let l = mnw.support_radius();
        let beta = mnw.theta_max();
        let mut all = true;
        for (eta, xi) in [
            (c(0.6, 1.0), c(-0.7, -0.5)),
            (c(1.5, -2.0), c(-0.3, 2.2)),
            (c(0.2, 0.0), c(-2.0, 0.0)),
        ] {
            let v = chi_mnw(&mnw, eta, xi, &p).map_err(|e| e.to_string())?;
            all &= kpzmp::kpz::verify_bound(l, beta, eta, xi, v);
        }
        Ok((all, 0.0))
    });

    check(checks, "scaling_wedge_heights", || {
        let mnw = MultiNarrowWedge::new(vec![(0.0, 0.0), (-0.7, 0.45)]).map_err(|e| e.to_string())?;
        let eps = 0.05;
        let y = discretize_mnw(&mnw, eps).map_err(|e| e.to_string())?;
        let h = height_encode(&y, (y.y_bot(), 1)).map_err(|e| e.to_string())?;
        let mut worst: f64 = 0.0;
        for &(om, th) in mnw.wedges() {
            let site = 2 * (om / eps).floor() as i64;
            worst = worst.max((eps.sqrt() * h.value(site) as f64 - th).abs());
        }
        Ok((worst <= 2.0 * eps.sqrt() + 1e-12, worst))
    });

    check(checks, "scaling_rescaled_ch_decay", || {
        let mnw = MultiNarrowWedge::single(0.0, 0.0);
        let p = ChiParams::default();
        let eta = Complex64::new(1.0, 0.3);
        let xi = Complex64::new(-1.0, -0.2);
        let wide = rescaled_ch_gap(&mnw, 0.02, 150, eta, xi, &p).map_err(|e| e.to_string())?;
        let fine = rescaled_ch_gap(&mnw, 0.005, 150, eta, xi, &p).map_err(|e| e.to_string())?;
        Ok((fine < wide, fine))
    });

    check(checks, "equal_time_tw_gue", || {
        let q = EqualTimeQuery::new(vec![(0.0, 0.0)]).map_err(|e| e.to_string())?;
        let det = fredholm_new(&q, &KpzInitial::NarrowWedge, &ChiParams::default(),
            &EqualTimeConfig::default())
        .map_err(|e| e.to_string())?;
        let gap = (det - tw_gue(0.0)).abs();
        Ok((gap < 1e-6, gap))
    });

    check(checks, "equal_time_route_agreement", || {
        let q = EqualTimeQuery::new(vec![(0.0, 0.2), (0.6, 0.9)]).map_err(|e| e.to_string())?;
        let p = ChiParams::default();
        let cfg = EqualTimeConfig::default();
        let a = fredholm_new(&q, &KpzInitial::NarrowWedge, &p, &cfg).map_err(|e| e.to_string())?;
        let b = fredholm_mqr(&q, &KpzInitial::NarrowWedge, &p, &cfg).map_err(|e| e.to_string())?;
        let gap = (a - b).abs();
        Ok((gap < 1e-6, gap))
    });

    check(checks, "kpz_shell_decay", || {
        let q = KpzQueryList::new(vec![
            KpzQuery { alpha: 0.0, tau: 1.0, beta: 0.3 },
            KpzQuery { alpha: 0.2, tau: 1.8, beta: 0.6 },
        ])
        .map_err(|e| e.to_string())?;
        let tp = TruncationParams {
            n_total_max: 2,
            ray_order: 16,
            ..recommended_params(2)
        };
        let r = joint_cdf(&KpzInitial::NarrowWedge, &q, &ChiParams::default(), &tp)
            .map_err(|e| e.to_string())?;
        let decays = r.shell_magnitudes.windows(2).skip(1).all(|w| w[1] < w[0]);
        Ok((decays && r.probability > 0.0 && r.probability < 1.0, r.truncation_estimate))
    });
}

fn full_suite(seed: u64, checks: &mut Vec<Check>) {
    check(checks, "equal_time_tw_gue_grid", || {
        let p = ChiParams::default();
        let cfg = EqualTimeConfig::default();
        let mut worst: f64 = 0.0;
        for beta in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let q = EqualTimeQuery::new(vec![(0.0, beta)]).map_err(|e| e.to_string())?;
            let det =
                fredholm_new(&q, &KpzInitial::NarrowWedge, &p, &cfg).map_err(|e| e.to_string())?;
            worst = worst.max((det - tw_gue(beta)).abs());
        }
        Ok((worst < 1e-6, worst))
    });

    check(checks, "equal_time_routes_m3", || {
        let q = EqualTimeQuery::new(vec![(-0.4, 0.1), (0.3, 0.6), (1.0, 1.4)])
            .map_err(|e| e.to_string())?;
        let p = ChiParams::default();
        let cfg = EqualTimeConfig::default();
        let a = fredholm_new(&q, &KpzInitial::NarrowWedge, &p, &cfg).map_err(|e| e.to_string())?;
        let b = fredholm_mqr(&q, &KpzInitial::NarrowWedge, &p, &cfg).map_err(|e| e.to_string())?;
        let gap = (a - b).abs();
        Ok((gap < 1e-6, gap))
    });

    check(checks, "kpz_one_point_vs_tw", || {
        let r = joint_cdf(
            &KpzInitial::NarrowWedge,
            &nw_query(-0.5),
            &ChiParams::default(),
            &recommended_params(1),
        )
        .map_err(|e| e.to_string())?;
        let gap = (r.probability - tw_gue(-0.5)).abs();
        Ok((gap < (1e-3f64).max(3.0 * r.truncation_estimate), gap))
    });

    check(checks, "kpz_marginalization", || {
        let p = ChiParams::default();
        let two = KpzQueryList::new(vec![
            KpzQuery { alpha: 0.0, tau: 1.0, beta: 0.2 },
            KpzQuery { alpha: 0.4, tau: 2.0, beta: 8.0 },
        ])
        .map_err(|e| e.to_string())?;
        let one = nw_query(0.2);
        let tp = recommended_params(2);
        let a = joint_cdf(&KpzInitial::NarrowWedge, &two, &p, &tp).map_err(|e| e.to_string())?;
        let b = joint_cdf(&KpzInitial::NarrowWedge, &one, &p, &recommended_params(1))
            .map_err(|e| e.to_string())?;
        let gap = (a.probability - b.probability).abs();
        let tol = (1e-3f64).max(a.truncation_estimate + b.truncation_estimate);
        Ok((gap < tol, gap))
    });

    check(checks, "kpz_vs_equal_time_pair", || {
        let p = ChiParams::default();
        let q = KpzQueryList::new(vec![
            KpzQuery { alpha: 0.0, tau: 1.0, beta: 0.0 },
            KpzQuery { alpha: 0.5, tau: 1.0, beta: 0.5 },
        ])
        .map_err(|e| e.to_string())?;
        let series = joint_cdf(&KpzInitial::NarrowWedge, &q, &p, &recommended_params(2))
            .map_err(|e| e.to_string())?;
        let det = fredholm_new(
            &EqualTimeQuery::new(vec![(0.0, 0.0), (0.5, 0.5)]).map_err(|e| e.to_string())?,
            &KpzInitial::NarrowWedge,
            &p,
            &EqualTimeConfig::default(),
        )
        .map_err(|e| e.to_string())?;
        let gap = (series.probability - det).abs();
        let tol = (1e-2f64).max(3.0 * series.truncation_estimate);
        Ok((gap < tol, gap))
    });

    check(checks, "scaling_convergence_trend", || {
        let mnw = MultiNarrowWedge::single(0.0, 0.0);
        let sim = SimConfig::new(seed, 20_000, 600.0).map_err(|e| e.to_string())?;
        let table = convergence_study(
            &mnw,
            &nw_query(0.0),
            &[0.1, 0.05, 0.025],
            &recommended_params(1),
            &sim,
        )
        .map_err(|e| e.to_string())?;
        let errs: Vec<f64> = table.rows.iter().map(|r| r.abs_error).collect();
        let trend = errs.windows(2).all(|w| w[1] < w[0]);
        let bounds = table.rows.iter().all(|r| r.bound_c < 2.0);
        Ok((trend && bounds, *errs.last().unwrap()))
    });
}

/// Run the suite; returns CSV rows (value 1 = pass) and whether all passed.
pub fn verify_all(full: bool, seed: u64) -> (Vec<Row>, bool) {
    let mut checks = Vec::new();
    println!("quick suite:");
    quick_suite(seed, &mut checks);
    if full {
        println!("full suite:");
        full_suite(seed, &mut checks);
    }
    let passed = checks.iter().filter(|c| c.pass).count();
    println!("{passed}/{} checks passed", checks.len());
    let all = passed == checks.len();
    let rows = checks
        .into_iter()
        .map(|c| Row {
            id: "verify".into(),
            method: c.name.into(),
            value: if c.pass { 1.0 } else { 0.0 },
            spread: if c.gap.is_finite() { c.gap } else { -1.0 },
        })
        .collect();
    (rows, all)
}
