//! Node-level fairness tables: Jain index against skew and demand, an (m, s)
//! heatmap and per-node probability ECDFs.

use std::collections::BTreeMap;

use dheac::analytics;
use dheac::lottery::{estimate_fairness, exact_node_probs, FairnessReport};
use dheac::netgen::{generate_network, NetworkConfig, Request};
use dheac::partition::safe_select_k;
use dheac::qverify;
use dheac::rng::SeedStream;
use rayon::prelude::*;

use crate::config::SweepSpec;
use crate::format::{num, opt_num, CsvTable};
use crate::sweep::nearest;
use crate::{provenance, svg, OutputFile, Result};

/// Trial count below which the Jain estimate is flagged as noisy.
pub const RECOMMENDED_TRIALS: u64 = 10_000;

pub const HEADER: [&str; 15] = [
    "m",
    "demand",
    "skew",
    "total_capacity",
    "k_req",
    "K",
    "trials",
    "jain",
    "jain_exact",
    "jain_measured_quota",
    "min_node_prob",
    "max_node_prob",
    "nodes",
    "ecdf_file",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FairnessOptions {
    /// Network size for the skew and demand curves.
    pub curve_m: usize,
    pub heatmap_demand: f64,
    pub ecdf_m: usize,
    pub ecdf_demand: f64,
}

impl Default for FairnessOptions {
    fn default() -> Self {
        FairnessOptions {
            curve_m: 16,
            heatmap_demand: 0.40,
            ecdf_m: 16,
            ecdf_demand: 0.40,
        }
    }
}

/// Fairness at one (m, demand, skew) point.
#[derive(Debug, Clone)]
pub struct FairnessPoint {
    pub m: usize,
    pub demand: f64,
    pub skew: f64,
    pub total: usize,
    pub net: NetworkConfig,
    pub k_req: usize,
    pub winners: usize,
    pub report: FairnessReport,
    /// Jain of the enumerated node probabilities, when enumeration fits.
    pub jain_exact: Option<f64>,
    /// Jain when quotas are drawn uniformly from the feasible set, when the
    /// embedded state fits the sparse guard.
    pub jain_measured_quota: Option<f64>,
}

type Key = (usize, u64, u64);

fn key(m: usize, demand: f64, skew: f64) -> Key {
    (m, demand.to_bits(), skew.to_bits())
}

/// Stream for a point, independent of which other points are evaluated.
pub fn point_stream(seed: u64, m: usize, demand: f64, skew: f64) -> SeedStream {
    SeedStream::new(seed)
        .point(m as u64)
        .point(demand.to_bits())
        .point(skew.to_bits())
}

fn capacity_limited<T>(r: dheac::Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(dheac::Error::Capacity { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn evaluate_point(spec: &SweepSpec, m: usize, demand: f64, skew: f64) -> Result<FairnessPoint> {
    let total = spec.total_for(m);
    let net = generate_network(m, skew, total)?;
    let req = Request::from_demand(demand, total)?;
    let beta = spec.params.beta;
    let winners = safe_select_k(req.k_req, net.caps(), beta)?;
    let report = estimate_fairness(&net, &req, beta, spec.trials, point_stream(spec.seed, m, demand, skew))?;
    let jain_exact = capacity_limited(exact_node_probs(&net, &req, beta))?
        .map(|p| analytics::jain_index(&p))
        .transpose()?;
    let jain_measured_quota = match capacity_limited(qverify::build_for_request(&net, &req, beta))? {
        Some((_, state)) => Some(qverify::measured_quota_jain(&state, &net)?),
        None => None,
    };
    Ok(FairnessPoint {
        m,
        demand,
        skew,
        total,
        k_req: req.k_req,
        winners,
        net,
        report,
        jain_exact,
        jain_measured_quota,
    })
}

fn ecdf_name(p: &FairnessPoint) -> String {
    format!("ecdf_m{}_d{}_s{}.csv", p.m, num(p.demand), num(p.skew))
}

fn row(spec: &SweepSpec, p: &FairnessPoint, ecdf_file: &str) -> Vec<String> {
    let probs = &p.report.node_probs;
    let lo = probs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    vec![
        p.m.to_string(),
        num(p.demand),
        num(p.skew),
        p.total.to_string(),
        p.k_req.to_string(),
        p.winners.to_string(),
        p.report.trials.to_string(),
        num(p.report.jain),
        opt_num(p.jain_exact),
        opt_num(p.jain_measured_quota),
        num(lo),
        num(hi),
        probs.len().to_string(),
        ecdf_file.to_owned(),
        spec.seed.to_string(),
    ]
}

/// Result of the fairness command.
#[derive(Debug, Clone)]
pub struct FairnessRun {
    pub files: Vec<OutputFile>,
    pub warnings: Vec<String>,
    pub points: Vec<FairnessPoint>,
}

pub fn run(spec: &SweepSpec, opts: &FairnessOptions, with_svg: bool) -> Result<FairnessRun> {
    spec.validate()?;
    let mut warnings = Vec::new();
    if spec.trials < RECOMMENDED_TRIALS {
        warnings.push(format!(
            "warning: {} trials per point; at least {RECOMMENDED_TRIALS} are recommended for stable Jain estimates",
            spec.trials
        ));
    }
    let heat_demand = nearest(&spec.demand_values, opts.heatmap_demand);

    let mut wanted: Vec<(usize, f64, f64)> = Vec::new();
    for &d in &spec.demand_values {
        for &s in &spec.skew_values {
            wanted.push((opts.curve_m, d, s));
        }
    }
    for &m in &spec.m_values {
        for &s in &spec.skew_values {
            wanted.push((m, heat_demand, s));
        }
    }
    for &s in &spec.skew_values {
        wanted.push((opts.ecdf_m, opts.ecdf_demand, s));
    }
    let mut seen = std::collections::BTreeSet::new();
    wanted.retain(|&(m, d, s)| seen.insert(key(m, d, s)));

    let points: BTreeMap<Key, FairnessPoint> = wanted
        .par_iter()
        .map(|&(m, d, s)| evaluate_point(spec, m, d, s).map(|p| (key(m, d, s), p)))
        .collect::<Result<_>>()?;

    let is_ecdf = |p: &FairnessPoint| p.m == opts.ecdf_m && p.demand == opts.ecdf_demand;
    let ecdf_cell = |p: &FairnessPoint| if is_ecdf(p) { ecdf_name(p) } else { String::new() };
    let prov = provenance(spec);
    let table = |rows: Vec<&FairnessPoint>| {
        let mut t = CsvTable::new(&HEADER);
        t.comment(&prov);
        for p in rows {
            t.push(row(spec, p, &ecdf_cell(p)));
        }
        t.render()
    };

    let mut by_skew = Vec::new();
    for &d in &spec.demand_values {
        for &s in &spec.skew_values {
            by_skew.push(&points[&key(opts.curve_m, d, s)]);
        }
    }
    let mut by_demand = Vec::new();
    for &s in &spec.skew_values {
        for &d in &spec.demand_values {
            by_demand.push(&points[&key(opts.curve_m, d, s)]);
        }
    }
    let mut heat = Vec::new();
    for &m in &spec.m_values {
        for &s in &spec.skew_values {
            heat.push(&points[&key(m, heat_demand, s)]);
        }
    }

    let mut files = vec![
        OutputFile::new("jain_vs_skew.csv", table(by_skew)),
        OutputFile::new("jain_vs_demand.csv", table(by_demand)),
        OutputFile::new("fairness_heatmap.csv", table(heat)),
    ];
    for &s in &spec.skew_values {
        let p = &points[&key(opts.ecdf_m, opts.ecdf_demand, s)];
        let mut t = CsvTable::new(&["node_prob", "fraction"]);
        t.comment(&prov);
        t.comment(&format!(
            "m = {}, demand = {}, skew = {}, trials = {}",
            p.m,
            num(p.demand),
            num(p.skew),
            p.report.trials
        ));
        for &(x, f) in &p.report.ecdf {
            t.push(vec![num(x), num(f)]);
        }
        files.push(OutputFile::new(ecdf_name(p), t.render()));
    }
    if with_svg {
        let matrix: Vec<Vec<Option<f64>>> = spec
            .m_values
            .iter()
            .map(|&m| {
                spec.skew_values
                    .iter()
                    .map(|&s| Some(points[&key(m, heat_demand, s)].report.jain))
                    .collect()
            })
            .collect();
        files.push(OutputFile::new(
            "fairness_heatmap.svg",
            svg::heatmap(
                &format!("Jain index, demand = {}", num(heat_demand)),
                "m",
                "s",
                &spec.m_values,
                &spec.skew_values,
                &matrix,
            ),
        ));
    }
    Ok(FairnessRun {
        files,
        warnings,
        points: points.into_values().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> SweepSpec {
        SweepSpec {
            m_values: vec![4, 8],
            demand_values: vec![0.2, 0.4],
            skew_values: vec![0.0, 2.0],
            trials: 2_000,
            ..SweepSpec::default()
        }
    }

    #[test]
    fn emits_expected_files() {
        let opts = FairnessOptions {
            curve_m: 8,
            ecdf_m: 8,
            ..FairnessOptions::default()
        };
        let run = run(&small_spec(), &opts, true).unwrap();
        let names: Vec<&str> = run.files.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(
            names,
            vec![
                "jain_vs_skew.csv",
                "jain_vs_demand.csv",
                "fairness_heatmap.csv",
                "ecdf_m8_d0.4_s0.csv",
                "ecdf_m8_d0.4_s2.csv",
                "fairness_heatmap.svg",
            ]
        );
        assert_eq!(run.warnings.len(), 1);
        let skew = &run.files[0].contents;
        assert_eq!(skew.lines().filter(|l| !l.starts_with('#')).count(), 5);
    }

    #[test]
    fn symmetric_network_is_nearly_perfectly_fair() {
        let spec = SweepSpec {
            trials: 20_000,
            ..small_spec()
        };
        let p = evaluate_point(&spec, 8, 0.4, 0.0).unwrap();
        assert!(p.report.jain > 0.995, "{}", p.report.jain);
        assert!((p.jain_exact.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn point_streams_do_not_depend_on_grid() {
        let a = evaluate_point(&small_spec(), 4, 0.4, 2.0).unwrap();
        let wider = SweepSpec {
            m_values: vec![4, 8, 16],
            ..small_spec()
        };
        let b = evaluate_point(&wider, 4, 0.4, 2.0).unwrap();
        assert_eq!(a.report.node_probs, b.report.node_probs);
    }
}
