//! Throughput break-even map THR_B2 / THR_D over the (m, q) plane.

use dheac::analytics::Accounting;

use crate::config::SweepSpec;
use crate::format::{num, CsvTable};
use crate::sweep::{evaluate_grid, PointResult};
use crate::{provenance, svg, OutputFile, Result};

pub const HEADER: [&str; 16] = [
    "m",
    "q",
    "demand",
    "skew",
    "total_capacity",
    "k_req",
    "feasible",
    "K",
    "THR_upper",
    "THR_lower",
    "THR_b2",
    "L_opt",
    "L_cons",
    "L_b2",
    "THR_ratio_opt",
    "THR_ratio_cons",
];

/// `ratio[i][j]` for `m_values[i]`, `q_values[j]`; `None` where infeasible.
pub type Matrix = Vec<Vec<Option<f64>>>;

#[derive(Debug, Clone)]
pub struct BreakevenRun {
    pub files: Vec<OutputFile>,
    pub optimistic: Matrix,
    pub conservative: Matrix,
}

/// Restricts the spec to one (skew, demand) slice.
pub fn slice_spec(spec: &SweepSpec, skew: f64, demand: f64) -> SweepSpec {
    SweepSpec {
        skew_values: vec![skew],
        demand_values: vec![demand],
        ..spec.clone()
    }
}

fn matrix(spec: &SweepSpec, results: &[PointResult], mode: Accounting) -> Matrix {
    let nq = spec.q_values.len();
    results
        .chunks(nq)
        .map(|row| {
            row.iter()
                .map(|r| r.metrics.as_ref().map(|mr| mr.breakeven_ratio(mode)))
                .collect()
        })
        .collect()
}

fn matrix_csv(spec: &SweepSpec, m: &Matrix, mode: Accounting, prov: &str) -> String {
    let mut header = vec!["m".to_owned()];
    header.extend(spec.q_values.iter().map(|&q| format!("q={}", num(q))));
    let mut t = CsvTable::new(&header);
    t.comment(prov);
    t.comment(&format!("THR_B2 / THR_D, {} accounting; below 1 favours the two-layer protocol", mode.name()));
    for (mv, row) in spec.m_values.iter().zip(m) {
        let mut cells = vec![mv.to_string()];
        cells.extend(row.iter().map(|v| v.map(num).unwrap_or_default()));
        t.push(cells);
    }
    t.render()
}

pub fn run(spec: &SweepSpec, skew: f64, demand: f64, with_svg: bool) -> Result<BreakevenRun> {
    let spec = slice_spec(spec, skew, demand);
    spec.validate()?;
    let results = evaluate_grid(&spec, false)?;
    let prov = provenance(&spec);

    let mut long = CsvTable::new(&HEADER);
    long.comment(&prov);
    for r in &results {
        let p = &r.point;
        let mut cells = vec![
            p.m.to_string(),
            num(p.q),
            num(p.demand),
            num(p.skew),
            r.total.to_string(),
            r.k_req.map(|k| k.to_string()).unwrap_or_default(),
            (r.feasible() as u8).to_string(),
        ];
        match &r.metrics {
            Some(mr) => cells.extend([
                mr.winners.to_string(),
                num(mr.thr_upper),
                num(mr.thr_lower),
                num(mr.thr_b2),
                num(mr.l_optimistic),
                num(mr.l_conservative),
                num(mr.l_b2),
                num(mr.breakeven_ratio(Accounting::Optimistic)),
                num(mr.breakeven_ratio(Accounting::Conservative)),
            ]),
            None => cells.extend(std::iter::repeat_n(String::new(), 9)),
        }
        long.push(cells);
    }

    let optimistic = matrix(&spec, &results, Accounting::Optimistic);
    let conservative = matrix(&spec, &results, Accounting::Conservative);
    let mut files = vec![
        OutputFile::new("breakeven.csv", long.render()),
        OutputFile::new(
            "breakeven_optimistic.csv",
            matrix_csv(&spec, &optimistic, Accounting::Optimistic, &prov),
        ),
        OutputFile::new(
            "breakeven_conservative.csv",
            matrix_csv(&spec, &conservative, Accounting::Conservative, &prov),
        ),
    ];
    if with_svg {
        for (mode, m) in [(Accounting::Optimistic, &optimistic), (Accounting::Conservative, &conservative)] {
            files.push(OutputFile::new(
                format!("breakeven_{}.svg", mode.name()),
                svg::heatmap(
                    &format!("THR_B2 / THR_D ({}), s = {}, demand = {}", mode.name(), num(skew), num(demand)),
                    "m",
                    "q",
                    &spec.m_values,
                    &spec.q_values,
                    m,
                ),
            ));
        }
    }
    Ok(BreakevenRun {
        files,
        optimistic,
        conservative,
    })
}
