//! Measurement-level checks of the embedded winner/quota state.

use std::collections::BTreeMap;
use std::fmt::Write;

use dheac::analytics;
use dheac::lottery::exact_node_probs;
use dheac::netgen::{NetworkConfig, Request};
use dheac::partition::{safe_select_k, Allocation};
use dheac::qverify::{self, NORM_TOLERANCE};
use dheac::rng::SeedStream;
use dheac::stats::{chi_square_uniform, ChiSquareTest};

use crate::format::num;
use crate::{CliError, Result};

/// Analytic uniformity tolerance.
pub const UNIFORMITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub draws: u64,
    pub seed: u64,
    pub beta: f64,
    pub significance: f64,
    /// Test hook: scale one amplitude so the state is no longer normalised.
    pub corrupt: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            draws: 100_000,
            seed: 1,
            beta: 0.10,
            significance: 0.01,
            corrupt: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct SubsetTest {
    pub winners: Vec<usize>,
    pub draws: u64,
    pub partitions: usize,
    pub test: ChiSquareTest,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub caps: Vec<usize>,
    pub k_req: usize,
    pub winners: usize,
    pub outcomes: usize,
    pub draws: u64,
    pub checks: Vec<Check>,
    pub outer: ChiSquareTest,
    pub conditional: Vec<SubsetTest>,
    pub jain_rounded: Option<f64>,
    pub jain_measured_quota: f64,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "caps = ({}), k_req = {}, K = {}", join(&self.caps), self.k_req, self.winners);
        let _ = writeln!(s, "outcomes with nonzero amplitude: {}", self.outcomes);
        let _ = writeln!(s, "draws: {}", self.draws);
        let _ = writeln!(
            s,
            "outer chi2 = {} (dof {}), p = {}",
            num(self.outer.statistic),
            self.outer.dof,
            num(self.outer.p_value)
        );
        for t in &self.conditional {
            let _ = writeln!(
                s,
                "  S = {{{}}}: draws {}, |Omega_S| = {}, chi2 = {} (dof {}), p = {}",
                join(&t.winners),
                t.draws,
                t.partitions,
                num(t.test.statistic),
                t.test.dof,
                num(t.test.p_value)
            );
        }
        let _ = writeln!(
            s,
            "jain (rounded quotas) = {}, jain (measured quotas) = {}",
            self.jain_rounded.map(num).unwrap_or_else(|| "n/a".into()),
            num(self.jain_measured_quota)
        );
        for c in &self.checks {
            let _ = writeln!(s, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        s
    }
}

/// Builds the state, measures it `draws` times and runs every check.
pub fn run(net: &NetworkConfig, req: &Request, opts: &VerifyOptions) -> Result<VerifyReport> {
    if opts.draws == 0 {
        return Err(CliError::Usage("draws must be >= 1".into()));
    }
    let k = safe_select_k(req.k_req, net.caps(), opts.beta)?;
    let mut state = match qverify::build_embedded(net, req.k_req, k) {
        Err(e @ dheac::Error::Capacity { .. }) => {
            return Err(CliError::Usage(format!(
                "{e}; reduce m (at most {} QLANs) or k_req so that C(m, K) times the largest feasible-quota count stays below {}",
                qverify::DICKE_MAX_QUBITS,
                qverify::OUTCOME_LIMIT
            )))
        }
        other => other?,
    };
    if opts.corrupt {
        let label = state.iter().next().map(|(l, _)| l.clone()).expect("non-empty state");
        let amp = state.amplitude(&label);
        state.set_amplitude(label, amp * 1.5);
    }
    state.ensure_normalized()?;

    let mut checks = Vec::new();
    let norm = state.norm_sqr();
    checks.push(Check {
        name: "normalisation",
        passed: (norm - 1.0).abs() <= NORM_TOLERANCE,
        detail: format!("|psi|^2 = {}", num(norm)),
    });
    let outer_err = qverify::outer_uniformity_error(&state, net.m(), k)?;
    checks.push(Check {
        name: "outer-uniformity",
        passed: outer_err <= UNIFORMITY_TOLERANCE,
        detail: format!("max |P(S) - 1/C(m,K)| = {}", num(outer_err)),
    });
    let cond_err = qverify::conditional_uniformity_error(&state)?;
    checks.push(Check {
        name: "conditional-uniformity",
        passed: cond_err <= UNIFORMITY_TOLERANCE,
        detail: format!("max |P(v|S) - 1/|Omega_S|| = {}", num(cond_err)),
    });
    let violations = qverify::feasibility_violations(&state, net, req.k_req, k);
    checks.push(Check {
        name: "feasibility",
        passed: violations == 0,
        detail: format!("{violations} violating outcomes"),
    });

    // Cells for every outcome, so unobserved ones count as zeros.
    let mut counts: BTreeMap<Vec<usize>, BTreeMap<Vec<usize>, u64>> = BTreeMap::new();
    for (label, _) in state.iter() {
        counts
            .entry(label.winners.clone())
            .or_default()
            .insert(label.quotas.clone(), 0);
    }
    let sampler = state.sampler()?;
    let stream = SeedStream::new(opts.seed);
    let mut stray = 0u64;
    for t in 0..opts.draws {
        let Allocation { winners, quotas } = sampler.draw(&mut stream.trial_rng(t));
        match counts.get_mut(&winners).and_then(|b| b.get_mut(&quotas)) {
            Some(c) => *c += 1,
            None => stray += 1,
        }
    }

    let outer_counts: Vec<u64> = counts.values().map(|b| b.values().sum()).collect();
    let outer = chi_square_uniform(&outer_counts);
    checks.push(Check {
        name: "outer-chi2",
        passed: outer.passes(opts.significance) && stray == 0,
        detail: format!("p = {} at significance {}", num(outer.p_value), num(opts.significance)),
    });
    let conditional: Vec<SubsetTest> = counts
        .iter()
        .map(|(winners, branch)| {
            let observed: Vec<u64> = branch.values().copied().collect();
            SubsetTest {
                winners: winners.clone(),
                draws: observed.iter().sum(),
                partitions: observed.len(),
                test: chi_square_uniform(&observed),
            }
        })
        .collect();
    let pooled = ChiSquareTest::pooled(&conditional.iter().map(|t| t.test).collect::<Vec<_>>());
    checks.push(Check {
        name: "conditional-chi2",
        passed: pooled.passes(opts.significance),
        detail: format!(
            "pooled chi2 = {} (dof {}), p = {}",
            num(pooled.statistic),
            pooled.dof,
            num(pooled.p_value)
        ),
    });

    let jain_rounded = match exact_node_probs(net, req, opts.beta) {
        Ok(p) => Some(analytics::jain_index(&p)?),
        Err(dheac::Error::Capacity { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(VerifyReport {
        caps: net.caps().to_vec(),
        k_req: req.k_req,
        winners: k,
        outcomes: state.len(),
        draws: opts.draws,
        checks,
        outer,
        conditional,
        jain_rounded,
        jain_measured_quota: qverify::measured_quota_jain(&state, net)?,
    })
}
