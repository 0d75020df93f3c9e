//! Raw per-trial dumps for one explicit network point.

use dheac::analytics::{Accounting, ModelParams};
use dheac::lottery::{simulate, McSummary, Protocol};
use dheac::netgen::{NetworkConfig, Request};
use dheac::rng::SeedStream;
use rayon::prelude::*;

use crate::config::Chi;
use crate::format::{num, CsvTable};
use crate::{OutputFile, Result};

pub const HEADER: [&str; 9] = [
    "trial",
    "chi",
    "succeeded",
    "winners",
    "quotas",
    "qubits",
    "attempts",
    "latency",
    "seed",
];

#[derive(Debug, Clone)]
pub struct McRun {
    pub file: OutputFile,
    pub summaries: Vec<(Chi, McSummary)>,
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// Stream used for one accounting mode; the dump and the summary share it.
pub fn chi_stream(seed: u64, chi: Chi) -> SeedStream {
    SeedStream::new(seed).point(chi as u64)
}

pub fn run(
    net: &NetworkConfig,
    req: &Request,
    params: &ModelParams,
    chis: &[Chi],
    trials: u64,
    seed: u64,
) -> Result<McRun> {
    let protocol = Protocol::new(net, *req, *params)?;
    let mut table = CsvTable::new(&HEADER);
    table.comment(&format!("dheac {}", env!("CARGO_PKG_VERSION")));
    table.comment(&format!(
        "caps = {}, k_req = {}, K = {}, ell_anc = {}",
        join(net.caps()),
        req.k_req,
        protocol.winner_count(),
        protocol.ell_anc()
    ));
    table.comment(&format!(
        "q = {}, M = {}, t_gen = {}, t_dist = {}, t_meas = {}, t_ctl = {}, r = {}, beta = {}",
        num(params.loss),
        params.max_attempts,
        num(params.t_gen),
        num(params.t_dist),
        num(params.t_meas),
        num(params.t_ctl),
        num(params.rounds),
        num(params.beta)
    ));
    table.comment(&format!("seed = {seed}, trials = {trials}"));

    let mut summaries = Vec::new();
    for &chi in chis {
        let mode = Accounting::from(chi);
        let stream = chi_stream(seed, chi);
        let outcomes = (0..trials)
            .into_par_iter()
            .map(|t| protocol.run_trial(mode, &mut stream.trial_rng(t)))
            .collect::<dheac::Result<Vec<_>>>()?;
        for (t, o) in outcomes.iter().enumerate() {
            table.push(vec![
                t.to_string(),
                mode.name().to_owned(),
                (o.succeeded as u8).to_string(),
                join(&o.winners),
                join(&o.quotas),
                o.qubits.to_string(),
                o.attempts_total.to_string(),
                num(o.latency),
                seed.to_string(),
            ]);
        }
        summaries.push((chi, simulate(net, req, params, mode, trials, stream)?));
    }
    for (chi, s) in &summaries {
        table.comment(&format!(
            "{}: success = {} +- {}, latency = {} +- {}, throughput = {}",
            Accounting::from(*chi).name(),
            num(s.success_rate),
            num(s.success_se),
            num(s.mean_latency),
            num(s.latency_se),
            num(s.throughput)
        ));
    }
    Ok(McRun {
        file: OutputFile::new("mc_trials.csv", table.render()),
        summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_agrees_with_summary() {
        let net = NetworkConfig::from_caps(vec![5, 3, 2], 0.0).unwrap();
        let req = Request::new(4).unwrap();
        let params = ModelParams::default().with_loss(0.3);
        let run = run(&net, &req, &params, &[Chi::Optimistic], 500, 9).unwrap();
        let body: Vec<&str> = run.file.contents.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body.len(), 501);
        let ok = body[1..].iter().filter(|l| l.split(',').nth(2) == Some("1")).count();
        assert_eq!(ok as u64, run.summaries[0].1.successes);
    }

    #[test]
    fn shortage_is_exit_code_3() {
        let net = NetworkConfig::from_caps(vec![2, 2], 0.0).unwrap();
        let req = Request::new(5).unwrap();
        let err = run(&net, &req, &ModelParams::default(), &[Chi::Optimistic], 10, 1).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
