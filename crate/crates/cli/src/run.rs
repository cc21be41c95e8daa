//! Scenario execution: domain-object construction (failures are schema
//! errors, exit 2), computation (failures are numeric errors, exit 3) and
//! CSV emission with pinned float formatting.

use crate::config::{InitialSpec, Kind, QuerySpec, Scenario, TruncationSpec};
use kpzmp::equal_time::{fredholm_mqr, fredholm_new, EqualTimeConfig, EqualTimeQuery};
use kpzmp::kpz::{
    chi_mnw, chi_uc, convergence_study, joint_cdf as kpz_joint_cdf, recommended_params,
    ChiParams, CompactUC, KpzInitial, KpzQuery, KpzQueryList, MultiNarrowWedge,
};
use kpzmp::series::TruncationParams;
use kpzmp::tasep::{
    joint_cdf as tasep_joint_cdf, SimConfig, TasepInitial, TasepQuery, TasepQueryList,
};

#[derive(Debug)]
pub enum CliError {
    /// Config/schema problems: exit 2.
    Schema(String),
    /// Tolerance or numeric-validation failures: exit 3.
    Numeric(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Schema(m) | CliError::Numeric(m) => m,
        }
    }
}

pub fn schema<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Schema(e.to_string())
}

fn numeric<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Numeric(e.to_string())
}

#[derive(Debug, Clone)]
pub struct Row {
    pub id: String,
    pub method: String,
    pub value: f64,
    /// Statistical stderr or series truncation estimate, whichever applies.
    pub spread: f64,
}

impl Row {
    fn new(id: &str, method: impl Into<String>, value: f64, spread: f64) -> Row {
        Row { id: id.to_string(), method: method.into(), value, spread }
    }
}

/// Pinned-format CSV so identical runs give identical bytes; the wall-time
/// column is the one exception and carries the measured seconds.
pub fn write_csv<W: std::io::Write>(w: W, rows: &[Row], wall_s: f64) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["scenario_id", "method", "value", "stderr_or_truncation", "wall_time_s"])?;
    let wall = format!("{wall_s:.3}");
    for r in rows {
        out.write_record([
            r.id.as_str(),
            r.method.as_str(),
            &format!("{:.12e}", r.value),
            &format!("{:.6e}", r.spread),
            &wall,
        ])?;
    }
    out.flush()
}

fn wedges_from(spec: &[(crate::config::Dec, crate::config::Dec)]) -> Result<MultiNarrowWedge, CliError> {
    MultiNarrowWedge::new(spec.iter().map(|(o, t)| (o.0, t.0)).collect()).map_err(schema)
}

fn kpz_initial(s: &Scenario) -> Result<KpzInitial, CliError> {
    match &s.initial {
        Some(InitialSpec::Wedges(w)) => {
            if w.len() == 1 && w[0].0 .0 == 0.0 && w[0].1 .0 == 0.0 {
                Ok(KpzInitial::NarrowWedge)
            } else {
                Ok(KpzInitial::Wedges(wedges_from(w)?))
            }
        }
        None => Ok(KpzInitial::NarrowWedge),
        Some(_) => Err(CliError::Schema(format!(
            "kind {} needs an initial condition of narrow wedges",
            s.kind
        ))),
    }
}

fn kpz_queries(s: &Scenario) -> Result<KpzQueryList, CliError> {
    match &s.queries {
        Some(QuerySpec::Kpz(list)) => KpzQueryList::new(
            list.iter()
                .map(|q| KpzQuery { alpha: q.alpha.0, tau: q.tau.0, beta: q.beta.0 })
                .collect(),
        )
        .map_err(schema),
        _ => Err(CliError::Schema(format!("kind {} needs queries.kpz", s.kind))),
    }
}

fn truncation(s: &Scenario, base: TruncationParams) -> TruncationParams {
    s.truncation.unwrap_or_else(TruncationSpec::default).apply(base)
}

fn run_tasep_prob(s: &Scenario) -> Result<Vec<Row>, CliError> {
    let y = match &s.initial {
        Some(InitialSpec::Particles(p)) => TasepInitial::new(p.clone()).map_err(schema)?,
        _ => return Err(CliError::Schema("tasep_prob needs initial.particles".into())),
    };
    let q = match &s.queries {
        Some(QuerySpec::Tasep(list)) => TasepQueryList::new(
            list.iter().map(|e| TasepQuery { k: e.k, t: e.t.0, a: e.a }).collect(),
            y.n(),
        )
        .map_err(schema)?,
        _ => return Err(CliError::Schema("tasep_prob needs queries.tasep".into())),
    };
    let tp = truncation(s, TruncationParams::default());
    let r = tasep_joint_cdf(&y, &q, &tp).map_err(numeric)?;
    Ok(vec![Row::new(&s.id, "tasep_series", r.probability, r.truncation_estimate)])
}

fn run_kpz_prob(s: &Scenario) -> Result<Vec<Row>, CliError> {
    let init = kpz_initial(s)?;
    let q = kpz_queries(s)?;
    let tp = truncation(s, recommended_params(q.m()));
    let r = kpz_joint_cdf(&init, &q, &ChiParams::default(), &tp).map_err(numeric)?;
    Ok(vec![Row::new(&s.id, "kpz_series", r.probability, r.truncation_estimate)])
}

fn run_chi_eval(s: &Scenario) -> Result<Vec<Row>, CliError> {
    let points = match &s.queries {
        Some(QuerySpec::Chi(p)) if !p.is_empty() => p.clone(),
        _ => return Err(CliError::Schema("chi_eval needs queries.chi points".into())),
    };
    let p = ChiParams::default();
    let mut rows = Vec::new();
    match &s.initial {
        Some(InitialSpec::Wedges(w)) => {
            let mnw = wedges_from(w)?;
            for (j, (eta, xi)) in points.iter().enumerate() {
                let v = chi_mnw(&mnw, eta.c64(), xi.c64(), &p).map_err(numeric)?;
                rows.push(Row::new(&s.id, format!("chi_mnw_re[{j}]"), v.re, 0.0));
                rows.push(Row::new(&s.id, format!("chi_mnw_im[{j}]"), v.im, 0.0));
            }
        }
        Some(InitialSpec::Sampled(pts)) => {
            if pts.len() < 2 || pts.windows(2).any(|w| w[0].0 .0 >= w[1].0 .0) {
                return Err(CliError::Schema(
                    "sampled profile needs at least two strictly increasing x values".into(),
                ));
            }
            let xs: Vec<f64> = pts.iter().map(|(x, _)| x.0).collect();
            let vs: Vec<f64> = pts.iter().map(|(_, v)| v.0).collect();
            let support = xs[0].abs().max(xs[xs.len() - 1].abs());
            let beta_max = vs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let (lo, hi) = (xs[0], xs[xs.len() - 1]);
            let evaluator = move |x: f64| -> f64 {
                if x < lo || x > hi {
                    return f64::NEG_INFINITY;
                }
                let j = xs.partition_point(|&t| t <= x).min(xs.len() - 1).max(1);
                let w = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
                vs[j - 1] * (1.0 - w) + vs[j] * w
            };
            let uc = CompactUC { support, beta_max, evaluator };
            for (j, (eta, xi)) in points.iter().enumerate() {
                let (v, gap) = chi_uc(&uc, eta.c64(), xi.c64(), &p).map_err(numeric)?;
                rows.push(Row::new(&s.id, format!("chi_uc_re[{j}]"), v.re, gap.norm()));
                rows.push(Row::new(&s.id, format!("chi_uc_im[{j}]"), v.im, gap.norm()));
            }
        }
        _ => return Err(CliError::Schema("chi_eval needs initial.wedges or initial.sampled".into())),
    }
    Ok(rows)
}

fn run_equal_time(s: &Scenario) -> Result<Vec<Row>, CliError> {
    let init = kpz_initial(s)?;
    let q = match &s.queries {
        Some(QuerySpec::EqualTime(pts)) => {
            EqualTimeQuery::new(pts.iter().map(|(a, b)| (a.0, b.0)).collect()).map_err(schema)?
        }
        _ => return Err(CliError::Schema("equal_time needs queries.equal_time".into())),
    };
    let p = ChiParams::default();
    let cfg = EqualTimeConfig::default();
    let new = fredholm_new(&q, &init, &p, &cfg).map_err(numeric)?;
    let mqr = fredholm_mqr(&q, &init, &p, &cfg).map_err(numeric)?;
    Ok(vec![
        Row::new(&s.id, "fredholm_new", new, 0.0),
        Row::new(&s.id, "fredholm_mqr", mqr, 0.0),
        Row::new(&s.id, "route_gap", (new - mqr).abs(), 0.0),
    ])
}

fn run_convergence(s: &Scenario, seed_override: Option<u64>) -> Result<Vec<Row>, CliError> {
    let mnw = match &s.initial {
        Some(InitialSpec::Wedges(w)) => wedges_from(w)?,
        _ => return Err(CliError::Schema("convergence needs initial.wedges".into())),
    };
    let q = kpz_queries(s)?;
    let eps: Vec<f64> = match &s.eps_list {
        Some(list) if !list.is_empty() => list.iter().map(|d| d.0).collect(),
        _ => return Err(CliError::Schema("convergence needs a decreasing eps_list".into())),
    };
    if eps.windows(2).any(|w| w[1] >= w[0]) || eps.iter().any(|&e| e <= 0.0) {
        return Err(CliError::Schema("eps_list must be positive and strictly decreasing".into()));
    }
    let samples = s.samples.unwrap_or(20_000);
    let seed = seed_override.or(s.seed).unwrap_or(0);
    let horizon = q.entries().iter().map(|e| e.tau).fold(0.0, f64::max)
        * 2.0
        * eps.last().unwrap().powf(-1.5);
    let sim = SimConfig::new(seed, samples, horizon).map_err(schema)?;
    let tp = truncation(s, recommended_params(q.m()));
    let table = convergence_study(&mnw, &q, &eps, &tp, &sim).map_err(numeric)?;
    let mut rows =
        vec![Row::new(&s.id, "kpz_series", table.kpz_value, table.kpz_truncation)];
    for r in &table.rows {
        rows.push(Row::new(&s.id, format!("tasep_mc[eps={}]", r.eps), r.mc_estimate, r.mc_stderr));
        rows.push(Row::new(&s.id, format!("abs_error[eps={}]", r.eps), r.abs_error, r.mc_stderr));
        rows.push(Row::new(&s.id, format!("bound_c[eps={}]", r.eps), r.bound_c, 0.0));
    }
    Ok(rows)
}

/// Execute one scenario; `kind_flag` is the subcommand the user invoked and
/// must match the file.
pub fn execute(
    s: &Scenario,
    kind_flag: Kind,
    seed_override: Option<u64>,
) -> Result<Vec<Row>, CliError> {
    if s.kind != kind_flag {
        return Err(CliError::Schema(format!(
            "scenario kind {} does not match the {} subcommand",
            s.kind, kind_flag
        )));
    }
    match s.kind {
        Kind::TasepProb => run_tasep_prob(s),
        Kind::KpzProb => run_kpz_prob(s),
        Kind::ChiEval => run_chi_eval(s),
        Kind::EqualTime => run_equal_time(s),
        Kind::Convergence => run_convergence(s, seed_override),
        Kind::Verify => Err(CliError::Schema(
            "verify runs the built-in suite; use the verify subcommand without a kind file".into(),
        )),
    }
}
