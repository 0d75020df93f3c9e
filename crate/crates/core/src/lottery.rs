//! Monte-Carlo execution of protocol rounds.
//!
//! One round: choose the winner count, draw a uniform `K`-subset of QLANs (the
//! outer Dicke measurement), round quotas over the winners' capacities, draw a
//! uniform `k_i`-subset of nodes inside each winner (the inner measurement), then
//! deliver every accounted qubit through a lossy channel with at most `M`
//! attempts each.
//!
//! Trial `t` of a run always uses stream `t` of the caller's [`SeedStream`], and
//! partial results are reduced in trial order, so every summary here is
//! bit-identical for any worker count.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;

use crate::analytics::{self, ancilla_bits, Accounting, ModelParams};
use crate::netgen::{NetworkConfig, Request};
use crate::partition::{
    binomial, expected_quota_round, for_each_combination, quota_round, safe_select_k, Allocation,
};
use crate::rng::SeedStream;
use crate::{Error, Result};

/// Trials handled by one unit of parallel work.
const CHUNK: u64 = 1024;

/// Largest number of outer subsets [`exact_node_probs`] will enumerate.
pub const EXACT_SUBSET_LIMIT: u128 = 1_000_000;

/// Uniform `k`-subset of `0..m`, ascending.
pub fn sample_outer<R: Rng + ?Sized>(m: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k == 0 || k > m {
        return Err(Error::invalid(format!("need 1 <= K <= m, got K = {k}, m = {m}")));
    }
    Ok(sorted_sample(m, k, rng))
}

/// Uniform `k`-subset of a QLAN's `n` nodes, ascending.
pub fn sample_inner<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k > n {
        return Err(Error::invalid(format!("quota {k} exceeds {n} available nodes")));
    }
    Ok(sorted_sample(n, k, rng))
}

fn sorted_sample<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    if k == n {
        return (0..n).collect();
    }
    let mut picked = index::sample(rng, n, k).into_vec();
    picked.sort_unstable();
    picked
}

/// Attempts until the first success, truncated at `max_attempts`.
/// Returns `(attempts used, delivered)`.
fn deliver<R: Rng + ?Sized>(loss: f64, max_attempts: u32, rng: &mut R) -> (u32, bool) {
    for attempt in 1..=max_attempts {
        if rng.random::<f64>() >= loss {
            return (attempt, true);
        }
    }
    (max_attempts, false)
}

/// Result of one completed round.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub succeeded: bool,
    pub winners: Vec<usize>,
    pub quotas: Vec<usize>,
    /// Node indices (local to each winning QLAN) aligned with `winners`.
    pub winning_nodes: Vec<Vec<usize>>,
    /// Qubits whose delivery the accounting mode charges for success.
    pub qubits: usize,
    /// Delivery attempts spent on those qubits.
    pub attempts_total: u64,
    /// Sampled end-to-end latency in ms.
    pub latency: f64,
}

/// A prepared protocol instance: winner count and ancilla size are fixed per
/// (network, request, params) and computed once.
#[derive(Debug, Clone)]
pub struct Protocol<'a> {
    net: &'a NetworkConfig,
    req: Request,
    params: ModelParams,
    winners: usize,
    ell_anc: usize,
}

impl<'a> Protocol<'a> {
    pub fn new(net: &'a NetworkConfig, req: Request, params: ModelParams) -> Result<Self> {
        params.validate()?;
        let winners = safe_select_k(req.k_req, net.caps(), params.beta)?;
        Ok(Protocol {
            net,
            req,
            params,
            winners,
            ell_anc: ancilla_bits(net.caps()),
        })
    }

    pub fn winner_count(&self) -> usize {
        self.winners
    }

    pub fn ell_anc(&self) -> usize {
        self.ell_anc
    }

    /// The lossless lottery chain: outer winners, rounded quotas, inner winners.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Allocation, Vec<Vec<usize>>)> {
        let caps = self.net.caps();
        let winners = sample_outer(self.net.m(), self.winners, rng)?;
        // The measured winner set carries no order; round over a uniformly random
        // presentation so the final positional tie-break favours no QLAN.
        let mut order: Vec<usize> = (0..winners.len()).collect();
        order.shuffle(rng);
        let presented: Vec<usize> = order.iter().map(|&j| caps[winners[j]]).collect();
        let mut quotas = vec![0; winners.len()];
        for (&j, q) in order.iter().zip(quota_round(self.req.k_req, &presented)?) {
            quotas[j] = q;
        }
        let allocation = Allocation { winners, quotas };
        allocation.validate(caps, self.req.k_req)?;
        let nodes = allocation
            .winners
            .iter()
            .zip(&allocation.quotas)
            .map(|(&i, &k)| sample_inner(caps[i], k, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok((allocation, nodes))
    }

    /// Runs one full round including lossy delivery.
    pub fn run_trial<R: Rng + ?Sized>(&self, mode: Accounting, rng: &mut R) -> Result<TrialOutcome> {
        let (allocation, winning_nodes) = self.draw(rng)?;
        let ModelParams {
            loss,
            max_attempts,
            t_gen,
            t_dist,
            t_meas,
            ..
        } = self.params;
        let m = self.net.m();

        // Outer payload: one Dicke qubit per QLAN, then the ancilla bits when they
        // are charged.
        let chi = match mode {
            Accounting::Optimistic => 0,
            Accounting::Conservative => self.ell_anc,
        };
        let mut succeeded = true;
        let mut qubits = 0usize;
        let mut attempts_total = 0u64;
        let mut outer_attempts = 0u64;
        let mut next_winner = allocation.winners.iter().peekable();
        for qubit in 0..m + chi {
            let (attempts, ok) = deliver(loss, max_attempts, rng);
            outer_attempts += attempts as u64;
            let charged = match mode {
                Accounting::Conservative => true,
                Accounting::Optimistic => next_winner.next_if_eq(&&qubit).is_some(),
            };
            if charged {
                qubits += 1;
                attempts_total += attempts as u64;
                succeeded &= ok;
            }
        }

        // Inner layer runs in parallel across winners; the slowest one sets the pace.
        let mut inner_max = 0u64;
        for &quota in &allocation.quotas {
            let mut local = 0u64;
            for _ in 0..quota {
                let (attempts, ok) = deliver(loss, max_attempts, rng);
                local += attempts as u64;
                succeeded &= ok;
            }
            qubits += quota;
            attempts_total += local;
            inner_max = inner_max.max(local);
        }

        let latency = (t_gen + t_dist * outer_attempts as f64 + t_meas)
            + (t_gen + t_dist * inner_max as f64 + t_meas);
        Ok(TrialOutcome {
            succeeded,
            winners: allocation.winners,
            quotas: allocation.quotas,
            winning_nodes,
            qubits,
            attempts_total,
            latency,
        })
    }
}

/// Convenience wrapper for a single round.
pub fn run_trial<R: Rng + ?Sized>(
    net: &NetworkConfig,
    req: &Request,
    params: &ModelParams,
    mode: Accounting,
    rng: &mut R,
) -> Result<TrialOutcome> {
    Protocol::new(net, *req, *params)?.run_trial(mode, rng)
}

/// Aggregate of a Monte-Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub trials: u64,
    pub successes: u64,
    pub success_rate: f64,
    /// Binomial standard error of `success_rate`.
    pub success_se: f64,
    pub mean_latency: f64,
    pub latency_se: f64,
    /// `success_rate / mean_latency`.
    pub throughput: f64,
    pub mean_attempts: f64,
}

#[derive(Default, Clone, Copy)]
struct ChunkStats {
    successes: u64,
    attempts: u64,
    latency_sum: f64,
    latency_sq_sum: f64,
}

fn chunk_ranges(trials: u64) -> Vec<(u64, u64)> {
    (0..trials.div_ceil(CHUNK))
        .map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(trials)))
        .collect()
}

/// Runs `trials` independent rounds and summarises them.
pub fn simulate(
    net: &NetworkConfig,
    req: &Request,
    params: &ModelParams,
    mode: Accounting,
    trials: u64,
    stream: SeedStream,
) -> Result<McSummary> {
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    let protocol = Protocol::new(net, *req, *params)?;
    let chunks = chunk_ranges(trials)
        .into_par_iter()
        .map(|(start, end)| {
            let mut stats = ChunkStats::default();
            for t in start..end {
                let outcome = protocol.run_trial(mode, &mut stream.trial_rng(t))?;
                stats.successes += outcome.succeeded as u64;
                stats.attempts += outcome.attempts_total;
                stats.latency_sum += outcome.latency;
                stats.latency_sq_sum += outcome.latency * outcome.latency;
            }
            Ok(stats)
        })
        .collect::<Result<Vec<_>>>()?;

    let total = chunks.iter().fold(ChunkStats::default(), |acc, c| ChunkStats {
        successes: acc.successes + c.successes,
        attempts: acc.attempts + c.attempts,
        latency_sum: acc.latency_sum + c.latency_sum,
        latency_sq_sum: acc.latency_sq_sum + c.latency_sq_sum,
    });
    let n = trials as f64;
    let success_rate = total.successes as f64 / n;
    let mean_latency = total.latency_sum / n;
    let var = (total.latency_sq_sum / n - mean_latency * mean_latency).max(0.0);
    Ok(McSummary {
        trials,
        successes: total.successes,
        success_rate,
        success_se: analytics::binomial_sigma(success_rate, trials),
        mean_latency,
        latency_se: (var / n).sqrt(),
        throughput: analytics::throughput(success_rate, mean_latency)?,
        mean_attempts: total.attempts as f64 / n,
    })
}

/// Node-level fairness estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessReport {
    /// Empirical win probability of every node, QLAN by QLAN.
    pub node_probs: Vec<f64>,
    pub jain: f64,
    pub trials: u64,
    pub ecdf: Vec<(f64, f64)>,
}

impl FairnessReport {
    /// Mean node probability within each QLAN (`None` for QLANs without nodes).
    pub fn qlan_probs(&self, net: &NetworkConfig) -> Vec<Option<f64>> {
        qlan_means(&self.node_probs, net)
    }
}

pub(crate) fn qlan_means(node_probs: &[f64], net: &NetworkConfig) -> Vec<Option<f64>> {
    net.node_offsets()
        .iter()
        .zip(net.caps())
        .map(|(&start, &n)| {
            (n > 0).then(|| node_probs[start..start + n].iter().sum::<f64>() / n as f64)
        })
        .collect()
}

/// Estimates per-node win probabilities over `trials` lossless rounds.
///
/// Delivery loss is ignored: fairness is measured conditional on completion.
pub fn estimate_fairness(
    net: &NetworkConfig,
    req: &Request,
    beta: f64,
    trials: u64,
    stream: SeedStream,
) -> Result<FairnessReport> {
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    let params = ModelParams {
        beta,
        ..ModelParams::default()
    };
    let protocol = Protocol::new(net, *req, params)?;
    let offsets = net.node_offsets();
    let nodes = net.total();
    let counts = chunk_ranges(trials)
        .into_par_iter()
        .map(|(start, end)| {
            let mut wins = vec![0u64; nodes];
            for t in start..end {
                let (allocation, picked) = protocol.draw(&mut stream.trial_rng(t))?;
                for (&q, local) in allocation.winners.iter().zip(&picked) {
                    for &node in local {
                        wins[offsets[q] + node] += 1;
                    }
                }
            }
            Ok(wins)
        })
        .try_reduce(
            || vec![0u64; nodes],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;

    let node_probs: Vec<f64> = counts.iter().map(|&c| c as f64 / trials as f64).collect();
    Ok(FairnessReport {
        jain: analytics::jain_index(&node_probs)?,
        ecdf: analytics::ecdf(&node_probs)?,
        node_probs,
        trials,
    })
}

/// Exact per-QLAN node win probability by enumerating every outer winner set,
/// averaging the rounded quota over the random winner presentation order.
pub fn exact_qlan_probs(net: &NetworkConfig, req: &Request, beta: f64) -> Result<Vec<f64>> {
    let caps = net.caps();
    let m = net.m();
    let k = safe_select_k(req.k_req, caps, beta)?;
    let subsets = binomial(m, k);
    if subsets > EXACT_SUBSET_LIMIT {
        return Err(Error::Capacity {
            what: "outer winner-set enumeration",
            size: subsets,
            limit: EXACT_SUBSET_LIMIT,
        });
    }
    let mut quota_sums = vec![0.0f64; m];
    let mut failure = None;
    for_each_combination(m, k, |subset| {
        if failure.is_some() {
            return;
        }
        let winner_caps: Vec<usize> = subset.iter().map(|&i| caps[i]).collect();
        match expected_quota_round(req.k_req, &winner_caps) {
            Ok(q) => subset.iter().zip(q).for_each(|(&i, qi)| quota_sums[i] += qi),
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(quota_sums
        .iter()
        .zip(caps)
        .map(|(&s, &n)| if n == 0 { 0.0 } else { s / (subsets as f64 * n as f64) })
        .collect())
}

/// Exact per-node win probabilities, in the same node order as [`FairnessReport::node_probs`].
pub fn exact_node_probs(net: &NetworkConfig, req: &Request, beta: f64) -> Result<Vec<f64>> {
    let per_qlan = exact_qlan_probs(net, req, beta)?;
    Ok(per_qlan
        .iter()
        .zip(net.caps())
        .flat_map(|(&p, &n)| std::iter::repeat_n(p, n))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::generate_network;
    use crate::partition::enum_partitions;
    use crate::stats::chi_square_uniform;
    use std::collections::BTreeMap;

    fn net(caps: &[usize]) -> NetworkConfig {
        NetworkConfig::from_caps(caps.to_vec(), 0.0).unwrap()
    }

    #[test]
    fn outer_edge_cases() {
        let mut rng = SeedStream::new(1).trial_rng(0);
        assert_eq!(sample_outer(3, 3, &mut rng).unwrap(), vec![0, 1, 2]);
        assert!(sample_outer(3, 4, &mut rng).is_err());
        assert!(sample_outer(3, 0, &mut rng).is_err());
    }

    #[test]
    fn outer_singletons_uniform() {
        let stream = SeedStream::new(11);
        let draws = 100_000u64;
        let mut counts = [0u64; 4];
        for t in 0..draws {
            counts[sample_outer(4, 1, &mut stream.trial_rng(t)).unwrap()[0]] += 1;
        }
        let sigma = (0.25f64 * 0.75 / draws as f64).sqrt();
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.25).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn outer_triples_pass_chi_square() {
        let stream = SeedStream::new(12);
        let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
        for t in 0..100_000 {
            *counts.entry(sample_outer(6, 3, &mut stream.trial_rng(t)).unwrap()).or_default() += 1;
        }
        assert_eq!(counts.len(), 20);
        let observed: Vec<u64> = counts.values().copied().collect();
        assert!(chi_square_uniform(&observed).passes(0.01));
    }

    #[test]
    fn inner_edge_cases_and_marginals() {
        let mut rng = SeedStream::new(2).trial_rng(0);
        assert!(sample_inner(5, 0, &mut rng).unwrap().is_empty());
        assert_eq!(sample_inner(5, 5, &mut rng).unwrap(), vec![0, 1, 2, 3, 4]);
        assert!(sample_inner(2, 3, &mut rng).is_err());

        let stream = SeedStream::new(3);
        let draws = 100_000u64;
        let mut counts = [0u64; 8];
        for t in 0..draws {
            for node in sample_inner(8, 2, &mut stream.trial_rng(t)).unwrap() {
                counts[node] += 1;
            }
        }
        let sigma = (0.25f64 * 0.75 / draws as f64).sqrt();
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.25).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn lossless_trial_always_succeeds() {
        let network = generate_network(8, 1.0, 80).unwrap();
        let req = Request::from_demand(0.4, 80).unwrap();
        let params = ModelParams::default().with_loss(0.0);
        let protocol = Protocol::new(&network, req, params).unwrap();
        let stream = SeedStream::new(4);
        for t in 0..200 {
            for mode in Accounting::BOTH {
                let out = protocol.run_trial(mode, &mut stream.trial_rng(t)).unwrap();
                assert!(out.succeeded);
                assert_eq!(out.attempts_total, out.qubits as u64);
                let expected_qubits = match mode {
                    Accounting::Optimistic => protocol.winner_count() + req.k_req,
                    Accounting::Conservative => 8 + protocol.ell_anc() + req.k_req,
                };
                assert_eq!(out.qubits, expected_qubits);
                assert_eq!(out.quotas.iter().sum::<usize>(), req.k_req);
                for (nodes, &q) in out.winning_nodes.iter().zip(&out.quotas) {
                    assert_eq!(nodes.len(), q);
                }
            }
        }
    }

    #[test]
    fn trial_allocations_are_feasible_partitions() {
        let network = net(&[10, 10, 10, 10]);
        let req = Request::new(8).unwrap();
        let params = ModelParams::default();
        let stream = SeedStream::new(5);
        for t in 0..500 {
            let out = run_trial(&network, &req, &params, Accounting::Optimistic, &mut stream.trial_rng(t))
                .unwrap();
            assert!(out.attempts_total >= out.qubits as u64);
            let caps: Vec<usize> = out.winners.iter().map(|&i| network.caps()[i]).collect();
            assert!(enum_partitions(req.k_req, &caps).contains(&out.quotas));
        }
    }

    #[test]
    fn trial_propagates_shortage() {
        let mut rng = SeedStream::new(6).trial_rng(0);
        let err = run_trial(
            &net(&[1, 1]),
            &Request::new(5).unwrap(),
            &ModelParams::default(),
            Accounting::Optimistic,
            &mut rng,
        );
        assert!(matches!(err, Err(Error::ResourceShortage { .. })));
    }

    #[test]
    fn simulate_is_deterministic_across_pools() {
        let network = net(&[10, 10, 10, 10]);
        let req = Request::new(8).unwrap();
        let params = ModelParams::default().with_loss(0.15);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate(&network, &req, &params, Accounting::Conservative, 5000, SeedStream::new(9)))
                .unwrap()
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn sampled_latency_mean_tracks_model_in_outer_stage() {
        // With one winner taking the whole request the inner max is deterministic in
        // structure, so the mean latency must match the closed form.
        let network = net(&[6]);
        let req = Request::new(6).unwrap();
        let params = ModelParams {
            beta: 0.0,
            ..ModelParams::default().with_loss(0.3)
        };
        let s = simulate(&network, &req, &params, Accounting::Optimistic, 50_000, SeedStream::new(10)).unwrap();
        let model =
            analytics::latency_dheac(1, 1, 6, 0, &params, Accounting::Optimistic).unwrap();
        assert!((s.mean_latency - model).abs() < 4.0 * s.latency_se, "{} vs {model}", s.mean_latency);
    }

    #[test]
    fn fairness_trivial_cases() {
        let report = estimate_fairness(&net(&[10]), &Request::new(10).unwrap(), 0.1, 100, SeedStream::new(1)).unwrap();
        assert!(report.node_probs.iter().all(|&p| p == 1.0));
        assert_eq!(report.jain, 1.0);
        assert_eq!(report.ecdf, vec![(1.0, 1.0)]);

        let report =
            estimate_fairness(&net(&[10, 10, 10, 10]), &Request::new(20).unwrap(), 0.1, 20_000, SeedStream::new(2))
                .unwrap();
        assert!(report.jain > 0.998);
        assert!(analytics::jain_index(&report.node_probs).unwrap() == report.jain);
    }

    #[test]
    fn exact_probabilities() {
        let p = exact_node_probs(&net(&[4, 4]), &Request::new(4).unwrap(), 0.0).unwrap();
        assert_eq!(p, vec![0.5; 8]);
        let p = exact_node_probs(&net(&[10, 10, 10, 10]), &Request::new(20).unwrap(), 0.1).unwrap();
        assert!(p.iter().all(|&x| (x - p[0]).abs() < 1e-15));
        // Sum of node probabilities is the expected number of winners.
        let network = net(&[8, 4, 2, 2]);
        let p = exact_node_probs(&network, &Request::new(4).unwrap(), 0.1).unwrap();
        assert!((p.iter().sum::<f64>() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn exact_guard() {
        let network = generate_network(32, 0.0, 320).unwrap();
        let err = exact_node_probs(&network, &Request::new(160).unwrap(), 0.1);
        assert!(matches!(err, Err(Error::Capacity { .. })));
    }

    #[test]
    fn mc_agrees_with_exact_oracle() {
        let network = net(&[8, 4, 2, 2]);
        let req = Request::new(4).unwrap();
        let trials = 100_000;
        let report = estimate_fairness(&network, &req, 0.1, trials, SeedStream::new(77)).unwrap();
        let exact = exact_node_probs(&network, &req, 0.1).unwrap();
        for (mc, ex) in report.node_probs.iter().zip(&exact) {
            let sigma = analytics::binomial_sigma(*ex, trials);
            assert!((mc - ex).abs() <= 3.0 * sigma + 1e-15, "{mc} vs {ex}");
        }
    }
}
