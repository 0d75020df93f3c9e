//! Sparse-amplitude model of the embedded winner/quota state.
//!
//! The outer register holds a Dicke state `|D^m_K>`; conditioned on each winner
//! set `S`, the ancilla registers hold an equal superposition of every feasible
//! quota vector in `Ω_S`. Each branch is normalised separately, so measuring the
//! outer register alone is exactly uniform over `K`-subsets and measuring the
//! ancillas then yields a uniform feasible quota vector for that subset.
//!
//! Only labelled outcomes with non-zero amplitude are stored; Z-basis statistics
//! ignore phases, so amplitudes are real in practice.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;

use crate::analytics;
use crate::netgen::{NetworkConfig, Request};
use crate::partition::{
    binomial, count_partitions, enum_partitions, for_each_combination, Allocation,
};
use crate::{Error, Result};

/// Largest register size accepted by [`build_dicke`].
pub const DICKE_MAX_QUBITS: usize = 20;
/// Largest number of labelled outcomes a state may carry.
pub const OUTCOME_LIMIT: u128 = 1_000_000;
/// Normalisation slack tolerated before measuring.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Amplitudes over labelled basis outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseState<L: Ord> {
    amplitudes: BTreeMap<L, Complex64>,
}

impl<L: Ord + Clone> SparseState<L> {
    /// Wraps raw amplitudes without checking normalisation.
    pub fn from_amplitudes(amplitudes: BTreeMap<L, Complex64>) -> Self {
        SparseState { amplitudes }
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn amplitude(&self, label: &L) -> Complex64 {
        self.amplitudes.get(label).copied().unwrap_or_default()
    }

    pub fn set_amplitude(&mut self, label: L, amplitude: Complex64) {
        self.amplitudes.insert(label, amplitude);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&L, &Complex64)> {
        self.amplitudes.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn ensure_normalized(&self) -> Result<()> {
        let norm = self.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvariantViolation(format!(
                "state norm^2 is {norm}, expected 1"
            )));
        }
        Ok(())
    }

    /// Born-rule probabilities of every stored outcome.
    pub fn probabilities(&self) -> BTreeMap<L, f64> {
        self.amplitudes
            .iter()
            .map(|(l, a)| (l.clone(), a.norm_sqr()))
            .collect()
    }

    /// Prepares repeated measurement of a normalised state.
    pub fn sampler(&self) -> Result<Sampler<L>> {
        self.ensure_normalized()?;
        let mut labels = Vec::with_capacity(self.len());
        let mut cumulative = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        for (label, amp) in &self.amplitudes {
            let p = amp.norm_sqr();
            if p > 0.0 {
                acc += p;
                labels.push(label.clone());
                cumulative.push(acc);
            }
        }
        Ok(Sampler { labels, cumulative })
    }

    /// Samples one outcome with probability `|amplitude|^2`.
    pub fn measure<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<L> {
        Ok(self.sampler()?.draw(rng))
    }
}

/// Inverse-CDF sampler over a normalised state's outcomes.
#[derive(Debug, Clone)]
pub struct Sampler<L> {
    labels: Vec<L>,
    cumulative: Vec<f64>,
}

impl<L: Clone> Sampler<L> {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> L {
        let total = *self.cumulative.last().expect("normalised state has support");
        let u = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        self.labels[i.min(self.labels.len() - 1)].clone()
    }
}

/// `|D^m_K>` as a uniform superposition over `K`-subsets of `0..m`.
pub fn build_dicke(m: usize, k: usize) -> Result<SparseState<Vec<usize>>> {
    if k == 0 || k > m {
        return Err(Error::invalid(format!("need 1 <= K <= m, got K = {k}, m = {m}")));
    }
    if m > DICKE_MAX_QUBITS {
        return Err(Error::Capacity {
            what: "Dicke register",
            size: m as u128,
            limit: DICKE_MAX_QUBITS as u128,
        });
    }
    let amp = Complex64::new(1.0 / (binomial(m, k) as f64).sqrt(), 0.0);
    let mut amplitudes = BTreeMap::new();
    for_each_combination(m, k, |s| {
        amplitudes.insert(s.to_vec(), amp);
    });
    Ok(SparseState { amplitudes })
}

/// The outer Dicke state with every feasible quota vector loaded per winner set.
pub fn build_embedded(net: &NetworkConfig, k_req: usize, k: usize) -> Result<SparseState<Allocation>> {
    let m = net.m();
    if k == 0 || k > m {
        return Err(Error::invalid(format!("need 1 <= K <= m, got K = {k}, m = {m}")));
    }
    let caps = net.caps();
    let subsets = binomial(m, k);
    if subsets > OUTCOME_LIMIT {
        return Err(Error::Capacity {
            what: "outer winner sets",
            size: subsets,
            limit: OUTCOME_LIMIT,
        });
    }
    let mut widest = 0u128;
    let mut empty = None;
    for_each_combination(m, k, |s| {
        let sub_caps: Vec<usize> = s.iter().map(|&i| caps[i]).collect();
        let n = count_partitions(k_req, &sub_caps);
        if n == 0 && empty.is_none() {
            empty = Some(s.to_vec());
        }
        widest = widest.max(n);
    });
    if let Some(s) = empty {
        return Err(Error::Infeasible {
            requested: k_req,
            available: s.iter().map(|&i| caps[i]).sum(),
        });
    }
    let size = subsets.saturating_mul(widest);
    if size > OUTCOME_LIMIT {
        return Err(Error::Capacity {
            what: "embedded winner/quota outcomes",
            size,
            limit: OUTCOME_LIMIT,
        });
    }

    let outer = 1.0 / (subsets as f64).sqrt();
    let mut amplitudes = BTreeMap::new();
    for_each_combination(m, k, |s| {
        let sub_caps: Vec<usize> = s.iter().map(|&i| caps[i]).collect();
        let omega = enum_partitions(k_req, &sub_caps);
        let amp = Complex64::new(outer / (omega.len() as f64).sqrt(), 0.0);
        for v in omega.vectors {
            amplitudes.insert(
                Allocation {
                    winners: s.to_vec(),
                    quotas: v,
                },
                amp,
            );
        }
    });
    Ok(SparseState { amplitudes })
}

/// Distribution of the outer (winner-set) measurement.
pub fn marginal_outer(state: &SparseState<Allocation>) -> Result<BTreeMap<Vec<usize>, f64>> {
    state.ensure_normalized()?;
    let mut out: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for (label, amp) in state.iter() {
        *out.entry(label.winners.clone()).or_default() += amp.norm_sqr();
    }
    Ok(out)
}

/// Distribution of the ancilla (quota) measurement given winner set `winners`.
pub fn conditional_inner(
    state: &SparseState<Allocation>,
    winners: &[usize],
) -> Result<BTreeMap<Vec<usize>, f64>> {
    state.ensure_normalized()?;
    let branch: Vec<(Vec<usize>, f64)> = state
        .iter()
        .filter(|(l, _)| l.winners == winners)
        .map(|(l, a)| (l.quotas.clone(), a.norm_sqr()))
        .collect();
    let mass: f64 = branch.iter().map(|(_, p)| p).sum();
    if mass <= 0.0 {
        return Err(Error::invalid(format!("winner set {winners:?} has zero probability")));
    }
    Ok(branch.into_iter().map(|(v, p)| (v, p / mass)).collect())
}

/// Number of supported outcomes that break the winner/quota invariants.
pub fn feasibility_violations(
    state: &SparseState<Allocation>,
    net: &NetworkConfig,
    k_req: usize,
    k: usize,
) -> usize {
    state
        .iter()
        .filter(|(_, a)| a.norm_sqr() > 0.0)
        .filter(|(label, _)| {
            label.winners.len() != k
                || label.winners.windows(2).any(|w| w[0] >= w[1])
                || label.validate(net.caps(), k_req).is_err()
        })
        .count()
}

/// Largest deviation of the outer marginal from `1 / C(m, K)`.
pub fn outer_uniformity_error(state: &SparseState<Allocation>, m: usize, k: usize) -> Result<f64> {
    let marginal = marginal_outer(state)?;
    let expected = 1.0 / binomial(m, k) as f64;
    let missing = binomial(m, k) as usize - marginal.len();
    let worst = marginal
        .values()
        .map(|p| (p - expected).abs())
        .fold(0.0, f64::max);
    Ok(if missing > 0 { worst.max(expected) } else { worst })
}

/// Largest deviation of any conditional quota distribution from `1 / |Ω_S|`.
pub fn conditional_uniformity_error(state: &SparseState<Allocation>) -> Result<f64> {
    state.ensure_normalized()?;
    let mut branches: BTreeMap<&[usize], Vec<f64>> = BTreeMap::new();
    for (label, amp) in state.iter() {
        branches.entry(&label.winners).or_default().push(amp.norm_sqr());
    }
    let mut worst = 0.0f64;
    for probs in branches.values() {
        let mass: f64 = probs.iter().sum();
        let expected = 1.0 / probs.len() as f64;
        worst = probs.iter().map(|p| (p / mass - expected).abs()).fold(worst, f64::max);
    }
    Ok(worst)
}

/// Node-level Jain index when quotas come from measuring the ancillas (uniform
/// over `Ω_S`) rather than from deterministic rounding.
pub fn measured_quota_jain(state: &SparseState<Allocation>, net: &NetworkConfig) -> Result<f64> {
    state.ensure_normalized()?;
    let mut expected_quota = vec![0.0; net.m()];
    for (label, amp) in state.iter() {
        let p = amp.norm_sqr();
        for (&i, &q) in label.winners.iter().zip(&label.quotas) {
            expected_quota[i] += p * q as f64;
        }
    }
    let node_probs: Vec<f64> = expected_quota
        .iter()
        .zip(net.caps())
        .flat_map(|(&e, &n)| std::iter::repeat_n(if n == 0 { 0.0 } else { e / n as f64 }, n))
        .collect();
    analytics::jain_index(&node_probs)
}

/// Convenience: the embedded state for a request, with `K` from the safe selection.
pub fn build_for_request(
    net: &NetworkConfig,
    req: &Request,
    beta: f64,
) -> Result<(usize, SparseState<Allocation>)> {
    let k = crate::partition::safe_select_k(req.k_req, net.caps(), beta)?;
    Ok((k, build_embedded(net, req.k_req, k)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lottery::sample_outer;
    use crate::netgen::generate_network;
    use crate::rng::SeedStream;
    use crate::stats::chi_square_uniform;
    use proptest::prelude::*;
    use rand::Rng;
    use std::collections::BTreeMap;

    fn net(caps: &[usize]) -> NetworkConfig {
        NetworkConfig::from_caps(caps.to_vec(), 0.0).unwrap()
    }

    #[test]
    fn dicke_examples() {
        let d = build_dicke(2, 1).unwrap();
        assert_eq!(d.len(), 2);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((d.amplitude(&vec![0]).re - h).abs() < 1e-15);
        assert!((d.amplitude(&vec![1]).re - h).abs() < 1e-15);

        let d = build_dicke(4, 2).unwrap();
        assert_eq!(d.len(), 6);
        assert!(d.probabilities().values().all(|p| (p - 1.0 / 6.0).abs() < 1e-15));

        let d = build_dicke(3, 3).unwrap();
        assert_eq!(d.len(), 1);
        assert!((d.amplitude(&vec![0, 1, 2]).re - 1.0).abs() < 1e-15);

        assert!(matches!(build_dicke(21, 2), Err(Error::Capacity { .. })));
        assert!(build_dicke(3, 4).is_err());
    }

    #[test]
    fn forced_partition() {
        let network = net(&[1, 1]);
        let s = build_embedded(&network, 2, 2).unwrap();
        assert_eq!(s.len(), 1);
        let only = Allocation {
            winners: vec![0, 1],
            quotas: vec![1, 1],
        };
        assert!((s.amplitude(&only).re - 1.0).abs() < 1e-15);
        let mut rng = SeedStream::new(1).trial_rng(0);
        for _ in 0..100 {
            assert_eq!(s.measure(&mut rng).unwrap(), only);
        }
    }

    #[test]
    fn three_by_three() {
        let network = net(&[2, 2, 2]);
        let s = build_embedded(&network, 2, 2).unwrap();
        assert_eq!(s.len(), 9);
        let outer = marginal_outer(&s).unwrap();
        assert_eq!(outer.len(), 3);
        assert!(outer.values().all(|p| (p - 1.0 / 3.0).abs() < 1e-12));
        for subset in outer.keys() {
            let cond = conditional_inner(&s, subset).unwrap();
            let keys: Vec<Vec<usize>> = cond.keys().cloned().collect();
            assert_eq!(keys, vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
            assert!(cond.values().all(|p| (p - 1.0 / 3.0).abs() < 1e-12));
        }
        assert_eq!(feasibility_violations(&s, &network, 2, 2), 0);
    }

    #[test]
    fn outer_marginal_matches_dicke() {
        let network = net(&[5, 1, 3, 2]);
        let s = build_embedded(&network, 3, 2).unwrap();
        let dicke = build_dicke(4, 2).unwrap().probabilities();
        let outer = marginal_outer(&s).unwrap();
        assert_eq!(outer.len(), dicke.len());
        for (k, p) in &dicke {
            assert!((outer[k] - p).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_branch_is_infeasible() {
        // K = 1 but QLAN 1 alone cannot hold 3 nodes.
        let err = build_embedded(&net(&[3, 1]), 3, 1);
        assert!(matches!(err, Err(Error::Infeasible { .. })));
    }

    #[test]
    fn guard_rejects_large_states() {
        let network = generate_network(20, 0.0, 400).unwrap();
        assert!(matches!(build_embedded(&network, 100, 10), Err(Error::Capacity { .. })));
    }

    #[test]
    fn unnormalised_state_cannot_be_measured() {
        let mut s = build_embedded(&net(&[2, 2, 2]), 2, 2).unwrap();
        let label = s.iter().next().unwrap().0.clone();
        let amp = s.amplitude(&label);
        s.set_amplitude(label, amp * 2.0);
        let mut rng = SeedStream::new(1).trial_rng(0);
        assert!(matches!(s.measure(&mut rng), Err(Error::InvariantViolation(_))));
        assert!(marginal_outer(&s).is_err());
    }

    #[test]
    fn measurement_outer_marginal_passes_chi_square() {
        let network = net(&[3, 3, 3, 3]);
        let req = Request::new(4).unwrap();
        let (k, s) = build_for_request(&network, &req, 0.1).unwrap();
        assert_eq!(k, 2);
        let sampler = s.sampler().unwrap();
        let stream = SeedStream::new(21);
        let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
        for t in 0..100_000 {
            *counts.entry(sampler.draw(&mut stream.trial_rng(t)).winners).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        let observed: Vec<u64> = counts.values().copied().collect();
        assert!(chi_square_uniform(&observed).passes(0.01));
    }

    #[test]
    fn joint_distribution_matches_two_stage_sampler() {
        let network = net(&[3, 2, 2, 1]);
        let k_req = 3;
        let k = 2;
        let s = build_embedded(&network, k_req, k).unwrap();
        let sampler = s.sampler().unwrap();
        let draws = 100_000u64;
        let quantum_stream = SeedStream::new(31);
        let classical_stream = SeedStream::new(32);
        let mut quantum: BTreeMap<Allocation, u64> = BTreeMap::new();
        let mut classical: BTreeMap<Allocation, u64> = BTreeMap::new();
        for t in 0..draws {
            *quantum.entry(sampler.draw(&mut quantum_stream.trial_rng(t))).or_default() += 1;
            let mut rng = classical_stream.trial_rng(t);
            let winners = sample_outer(4, k, &mut rng).unwrap();
            let caps: Vec<usize> = winners.iter().map(|&i| network.caps()[i]).collect();
            let omega = enum_partitions(k_req, &caps);
            let quotas = omega.vectors[rng.random_range(0..omega.len())].clone();
            *classical.entry(Allocation { winners, quotas }).or_default() += 1;
        }
        let keys: std::collections::BTreeSet<&Allocation> = quantum.keys().chain(classical.keys()).collect();
        let tv: f64 = keys
            .iter()
            .map(|k| {
                let a = *quantum.get(*k).unwrap_or(&0) as f64 / draws as f64;
                let b = *classical.get(*k).unwrap_or(&0) as f64 / draws as f64;
                (a - b).abs()
            })
            .sum::<f64>()
            / 2.0;
        // Two independent empirical distributions over ~20 cells: E[TV] ~ 0.005.
        assert!(tv < 0.02, "total variation {tv}");
    }

    #[test]
    fn rounding_is_a_point_in_the_measured_support() {
        // Measured ancillas spread over Ω_S; deterministic rounding picks one member.
        let network = net(&[4, 4, 4]);
        let s = build_embedded(&network, 4, 2).unwrap();
        let cond = conditional_inner(&s, &[0, 1]).unwrap();
        assert!(cond.len() > 1);
        let rounded = crate::partition::quota_round(4, &[4, 4]).unwrap();
        assert!(cond.contains_key(&rounded));
        assert!(cond[&rounded] < 1.0);
        let j = measured_quota_jain(&s, &network).unwrap();
        assert!(j > 0.0 && j <= 1.0 + 1e-12);
    }

    proptest! {
        #[test]
        fn embedded_state_invariants(caps in prop::collection::vec(0usize..5, 2..6), frac in 0.0f64..=1.0) {
            let network = net(&caps);
            let total = network.total();
            prop_assume!(total > 0);
            let k_req = 1 + ((total - 1) as f64 * frac) as usize;
            let req = Request::new(k_req).unwrap();
            let (k, s) = build_for_request(&network, &req, 0.1).unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
            prop_assert!(outer_uniformity_error(&s, network.m(), k).unwrap() <= 1e-12);
            prop_assert!(conditional_uniformity_error(&s).unwrap() <= 1e-12);
            prop_assert_eq!(feasibility_violations(&s, &network, k_req, k), 0);
        }
    }
}
