//! Grid sweep: closed forms and Monte-Carlo estimates at every grid point.

use dheac::analytics::{self, Accounting, MetricsRecord};
use dheac::baselines;
use dheac::lottery::{self, McSummary};
use dheac::netgen::{generate_network, NetworkConfig, Request};
use dheac::rng::SeedStream;
use rayon::prelude::*;

use crate::config::{Chi, Mode, SweepSpec};
use crate::format::{num, opt_num, CsvTable};
use crate::{provenance, svg, OutputFile, Result};

pub const HEADER: [&str; 43] = [
    "mode",
    "m",
    "q",
    "demand",
    "skew",
    "total_capacity",
    "caps",
    "k_req",
    "feasible",
    "K",
    "ell_anc",
    "inner_max",
    "b2_max_quota",
    "P_lower",
    "P_upper",
    "P_b2",
    "P_b1",
    "L_opt",
    "L_cons",
    "L_b2",
    "L_b1",
    "THR_lower",
    "THR_upper",
    "THR_b2",
    "THR_b1",
    "L_ratio_opt",
    "L_ratio_cons",
    "THR_ratio_opt",
    "THR_ratio_cons",
    "trials",
    "mc_P_opt",
    "mc_P_opt_se",
    "mc_L_opt",
    "mc_L_opt_se",
    "mc_THR_opt",
    "mc_attempts_opt",
    "mc_P_cons",
    "mc_P_cons_se",
    "mc_L_cons",
    "mc_L_cons_se",
    "mc_THR_cons",
    "mc_attempts_cons",
    "seed",
];

/// One grid coordinate; `index` is its position in canonical order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub index: u64,
    pub m: usize,
    pub q: f64,
    pub demand: f64,
    pub skew: f64,
}

/// Canonical order: m, then q, then demand, then skew.
pub fn grid_points(spec: &SweepSpec) -> Vec<GridPoint> {
    let mut out = Vec::new();
    for &m in &spec.m_values {
        for &q in &spec.q_values {
            for &demand in &spec.demand_values {
                for &skew in &spec.skew_values {
                    out.push(GridPoint {
                        index: out.len() as u64,
                        m,
                        q,
                        demand,
                        skew,
                    });
                }
            }
        }
    }
    out
}

/// Everything computed at one point.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub point: GridPoint,
    pub total: usize,
    pub net: Option<NetworkConfig>,
    pub k_req: Option<usize>,
    pub metrics: Option<MetricsRecord>,
    pub b1: Option<baselines::BaselineResult>,
    pub mc_opt: Option<McSummary>,
    pub mc_cons: Option<McSummary>,
}

impl PointResult {
    pub fn feasible(&self) -> bool {
        self.metrics.is_some()
    }
}

fn is_infeasibility(e: &dheac::Error) -> bool {
    matches!(
        e,
        dheac::Error::ResourceShortage { .. } | dheac::Error::Infeasible { .. }
    )
}

/// Evaluates one point. Shortage is reported as an infeasible point; any other
/// error aborts the sweep.
pub fn evaluate_point(spec: &SweepSpec, point: GridPoint, with_mc: bool) -> Result<PointResult> {
    let total = spec.total_for(point.m);
    let mut out = PointResult {
        point,
        total,
        net: None,
        k_req: None,
        metrics: None,
        b1: None,
        mc_opt: None,
        mc_cons: None,
    };
    let net = generate_network(point.m, point.skew, total)?;
    let req = Request::from_demand(point.demand, total)?;
    out.k_req = Some(req.k_req);
    let params = spec.params.model(point.q);
    let metrics = match analytics::evaluate(&net, &req, &params) {
        Ok(m) => m,
        Err(e) if is_infeasibility(&e) => {
            out.net = Some(net);
            return Ok(out);
        }
        Err(e) => return Err(e.into()),
    };
    out.b1 = Some(baselines::b1_evaluate(&net, &req, &params)?);
    out.metrics = Some(metrics);
    if with_mc {
        let stream = SeedStream::new(spec.seed).point(point.index);
        for chi in &spec.chi {
            let mode = Accounting::from(*chi);
            let summary = lottery::simulate(
                &net,
                &req,
                &params,
                mode,
                spec.trials,
                stream.point(*chi as u64),
            )?;
            match chi {
                Chi::Optimistic => out.mc_opt = Some(summary),
                Chi::Conservative => out.mc_cons = Some(summary),
            }
        }
    }
    out.net = Some(net);
    Ok(out)
}

/// Runs every point on the current rayon pool; results come back in canonical order.
pub fn evaluate_grid(spec: &SweepSpec, with_mc: bool) -> Result<Vec<PointResult>> {
    grid_points(spec)
        .into_par_iter()
        .map(|p| evaluate_point(spec, p, with_mc))
        .collect()
}

fn caps_cell(net: &Option<NetworkConfig>) -> String {
    net.as_ref()
        .map(|n| {
            n.caps()
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(";")
        })
        .unwrap_or_default()
}

fn mc_cells(summary: &Option<McSummary>) -> [String; 6] {
    match summary {
        Some(s) => [
            num(s.success_rate),
            num(s.success_se),
            num(s.mean_latency),
            num(s.latency_se),
            num(s.throughput),
            num(s.mean_attempts),
        ],
        None => Default::default(),
    }
}

fn row(spec: &SweepSpec, mode: Mode, r: &PointResult) -> Vec<String> {
    let p = &r.point;
    let chi_on = |c: Chi| spec.chi.contains(&c);
    let mut cells = vec![
        mode.name().to_owned(),
        p.m.to_string(),
        num(p.q),
        num(p.demand),
        num(p.skew),
        r.total.to_string(),
        caps_cell(&r.net),
        r.k_req.map(|k| k.to_string()).unwrap_or_default(),
        (r.feasible() as u8).to_string(),
    ];
    match &r.metrics {
        Some(mr) => {
            let b1 = r.b1.as_ref();
            let ratio = |c: Chi, f: f64| if chi_on(c) { num(f) } else { String::new() };
            cells.extend([
                mr.winners.to_string(),
                mr.ell_anc.to_string(),
                mr.inner_max.to_string(),
                mr.b2_max_quota.to_string(),
                num(mr.p_lower),
                num(mr.p_upper),
                num(mr.p_b2),
                opt_num(b1.and_then(|b| b.success)),
                num(mr.l_optimistic),
                num(mr.l_conservative),
                num(mr.l_b2),
                opt_num(b1.and_then(|b| b.latency)),
                num(mr.thr_lower),
                num(mr.thr_upper),
                num(mr.thr_b2),
                opt_num(b1.and_then(|b| b.throughput)),
                ratio(Chi::Optimistic, mr.latency_ratio(Accounting::Optimistic)),
                ratio(Chi::Conservative, mr.latency_ratio(Accounting::Conservative)),
                ratio(Chi::Optimistic, mr.breakeven_ratio(Accounting::Optimistic)),
                ratio(Chi::Conservative, mr.breakeven_ratio(Accounting::Conservative)),
            ]);
        }
        None => cells.extend(std::iter::repeat_n(String::new(), 20)),
    }
    if mode == Mode::Mc {
        cells.push(spec.trials.to_string());
        cells.extend(mc_cells(&r.mc_opt));
        cells.extend(mc_cells(&r.mc_cons));
    } else {
        cells.extend(std::iter::repeat_n(String::new(), 13));
    }
    cells.push(spec.seed.to_string());
    cells
}

/// Builds the sweep table: one row per grid point per requested mode
/// (analytic and/or mc), grouped by point.
pub fn sweep_table(spec: &SweepSpec, results: &[PointResult]) -> CsvTable {
    let mut table = CsvTable::new(&HEADER);
    table.comment(&provenance(spec));
    let modes: Vec<Mode> = spec
        .modes
        .iter()
        .copied()
        .filter(|m| matches!(m, Mode::Analytic | Mode::Mc))
        .collect();
    for r in results {
        for &mode in &modes {
            table.push(row(spec, mode, r));
        }
    }
    table
}

/// Picks the grid value nearest `target`.
pub(crate) fn nearest(values: &[f64], target: f64) -> f64 {
    values
        .iter()
        .copied()
        .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
        .expect("non-empty axis")
}

/// The full sweep command: CSV plus optional latency-ratio heatmaps over (m, q)
/// at the grid point nearest s = 1.0, demand = 0.40.
pub fn run(spec: &SweepSpec, with_svg: bool) -> Result<Vec<OutputFile>> {
    spec.validate()?;
    let with_mc = spec.modes.contains(&Mode::Mc);
    let results = evaluate_grid(spec, with_mc)?;
    let mut files = vec![OutputFile::new("sweep.csv", sweep_table(spec, &results).render())];
    if with_svg {
        let skew = nearest(&spec.skew_values, 1.0);
        let demand = nearest(&spec.demand_values, 0.40);
        for chi in &spec.chi {
            let mode = Accounting::from(*chi);
            let matrix: Vec<Vec<Option<f64>>> = spec
                .m_values
                .iter()
                .map(|&m| {
                    spec.q_values
                        .iter()
                        .map(|&q| {
                            results
                                .iter()
                                .find(|r| {
                                    r.point.m == m
                                        && r.point.q == q
                                        && r.point.skew == skew
                                        && r.point.demand == demand
                                })
                                .and_then(|r| r.metrics.as_ref())
                                .map(|mr| mr.latency_ratio(mode))
                        })
                        .collect()
                })
                .collect();
            let title = format!(
                "L_D / L_B2 ({}), s = {}, demand = {}",
                mode.name(),
                num(skew),
                num(demand)
            );
            files.push(OutputFile::new(
                format!("latency_ratio_{}.svg", mode.name()),
                svg::heatmap(&title, "m", "q", &spec.m_values, &spec.q_values, &matrix),
            ));
        }
    }
    Ok(files)
}
