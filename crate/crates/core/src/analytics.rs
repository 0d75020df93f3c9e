//! Closed-form evaluation models: success-probability bounds, latency models for
//! the two-layer protocol and the classical baseline, throughput, Jain index and
//! ECDF.

use crate::baselines;
use crate::netgen::{NetworkConfig, Request};
use crate::partition::safe_select_k;
use crate::{Error, Result};

/// Loss, retry and timing parameters shared by the analytic and Monte-Carlo models.
///
/// Times are in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Per-attempt loss probability `q`, in `[0, 1)`.
    pub loss: f64,
    /// Maximum delivery attempts per qubit (`M`).
    pub max_attempts: u32,
    pub t_gen: f64,
    pub t_dist: f64,
    pub t_meas: f64,
    /// Classical GO<->LO round-trip time used by B2.
    pub t_ctl: f64,
    /// Number of classical round-trips per QLAN in B2.
    pub rounds: f64,
    /// Safety margin applied by the winner-count selection.
    pub beta: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            loss: 0.05,
            max_attempts: 3,
            t_gen: 2.0,
            t_dist: 0.05,
            t_meas: 1.0,
            t_ctl: 0.5,
            rounds: 1.0,
            beta: 0.10,
        }
    }
}

impl ModelParams {
    pub fn with_loss(self, loss: f64) -> Self {
        ModelParams { loss, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.loss) {
            return Err(Error::invalid(format!("loss must lie in [0, 1), got {}", self.loss)));
        }
        if self.max_attempts == 0 {
            return Err(Error::invalid("max_attempts must be >= 1"));
        }
        let times = [self.t_gen, self.t_dist, self.t_meas, self.t_ctl, self.rounds, self.beta];
        if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(Error::invalid("time constants, rounds and beta must be finite and >= 0"));
        }
        Ok(())
    }

    /// Per-unit delivery success `p = 1 - q^M`.
    pub fn unit_success(&self) -> f64 {
        1.0 - self.loss.powi(self.max_attempts as i32)
    }

    /// Expected attempts of a geometric draw truncated at `M`: `(1 - q^M) / (1 - q)`.
    pub fn expected_attempts(&self) -> f64 {
        if self.loss == 0.0 {
            1.0
        } else {
            self.unit_success() / (1.0 - self.loss)
        }
    }
}

/// How outer-layer payload is accounted for.
///
/// `Optimistic` charges only the winners' outer qubits for success and no
/// ancilla payload for latency (`χ = 0`); `Conservative` charges every outer
/// qubit and every ancilla bit (`χ = ℓ_anc`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Accounting {
    Optimistic,
    Conservative,
}

impl Accounting {
    pub const BOTH: [Accounting; 2] = [Accounting::Optimistic, Accounting::Conservative];

    pub fn name(self) -> &'static str {
        match self {
            Accounting::Optimistic => "optimistic",
            Accounting::Conservative => "conservative",
        }
    }
}

/// Total ancilla bits: `Σ ceil(log2(n_i + 1))`, i.e. the bit length of each capacity.
pub fn ancilla_bits(caps: &[usize]) -> usize {
    caps.iter().map(|&c| (usize::BITS - c.leading_zeros()) as usize).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessBounds {
    pub lower: f64,
    pub upper: f64,
}

/// `P_upper = p^(K + k_req)`, `P_lower = p^(m + ℓ_anc + k_req)`.
pub fn success_bounds(
    k_req: usize,
    winners: usize,
    m: usize,
    ell_anc: usize,
    params: &ModelParams,
) -> SuccessBounds {
    let p = params.unit_success();
    SuccessBounds {
        lower: p.powf((m + ell_anc + k_req) as f64),
        upper: p.powf((winners + k_req) as f64),
    }
}

/// `P_B2 = p^k_req`.
pub fn success_b2(k_req: usize, params: &ModelParams) -> f64 {
    params.unit_success().powf(k_req as f64)
}

/// One generate/distribute/measure stage carrying `qubits` payload.
pub fn stage_latency(qubits: f64, params: &ModelParams) -> f64 {
    params.t_gen + params.expected_attempts() * params.t_dist * qubits + params.t_meas
}

/// Two-stage latency: one outer round over `m + χ` qubits, then the parallel
/// inner layer sized by `ceil(k_req / K)`.
pub fn latency_dheac(
    m: usize,
    winners: usize,
    k_req: usize,
    ell_anc: usize,
    params: &ModelParams,
    mode: Accounting,
) -> Result<f64> {
    if winners == 0 {
        return Err(Error::invalid("winner count K must be >= 1"));
    }
    let chi = match mode {
        Accounting::Optimistic => 0,
        Accounting::Conservative => ell_anc,
    };
    let inner = k_req.div_ceil(winners);
    Ok(stage_latency((m + chi) as f64, params) + stage_latency(inner as f64, params))
}

/// `r m t_ctl` of classical coordination plus one quantum stage of `k_max` qubits.
pub fn latency_b2(m: usize, k_max: usize, params: &ModelParams) -> f64 {
    params.rounds * m as f64 * params.t_ctl + stage_latency(k_max as f64, params)
}

/// `THR = P / E[L]`.
pub fn throughput(success: f64, latency: f64) -> Result<f64> {
    if !(latency > 0.0) {
        return Err(Error::invalid(format!("latency must be > 0, got {latency}")));
    }
    Ok(success / latency)
}

/// Jain's index `(Σx)^2 / (N Σx^2)` with `N = x.len()`.
pub fn jain_index(x: &[f64]) -> Result<f64> {
    if x.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::invalid("Jain index needs non-negative values"));
    }
    let sum: f64 = x.iter().sum();
    let sum_sq: f64 = x.iter().map(|v| v * v).sum();
    if sum_sq == 0.0 {
        return Err(Error::UndefinedInput("Jain index of an all-zero or empty vector".into()));
    }
    Ok(sum * sum / (x.len() as f64 * sum_sq))
}

/// Right-continuous empirical CDF as `(value, fraction <= value)` over distinct values.
pub fn ecdf(x: &[f64]) -> Result<Vec<(f64, f64)>> {
    if x.is_empty() {
        return Err(Error::invalid("ECDF of an empty sample"));
    }
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("ECDF sample contains NaN"));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, v) in sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *v => last.1 = frac,
            _ => out.push((*v, frac)),
        }
    }
    Ok(out)
}

/// Every closed-form metric for one (network, request, params) point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub winners: usize,
    pub ell_anc: usize,
    /// `ceil(k_req / K)`, the inner-stage payload.
    pub inner_max: usize,
    /// Largest B2 quota.
    pub b2_max_quota: usize,
    pub p_lower: f64,
    pub p_upper: f64,
    pub p_b2: f64,
    pub l_optimistic: f64,
    pub l_conservative: f64,
    pub l_b2: f64,
    /// `P_lower / L_conservative`.
    pub thr_lower: f64,
    /// `P_upper / L_optimistic`.
    pub thr_upper: f64,
    pub thr_b2: f64,
    pub jain: Option<f64>,
}

impl MetricsRecord {
    pub fn latency(&self, mode: Accounting) -> f64 {
        match mode {
            Accounting::Optimistic => self.l_optimistic,
            Accounting::Conservative => self.l_conservative,
        }
    }

    pub fn success(&self, mode: Accounting) -> f64 {
        match mode {
            Accounting::Optimistic => self.p_upper,
            Accounting::Conservative => self.p_lower,
        }
    }

    pub fn throughput(&self, mode: Accounting) -> f64 {
        match mode {
            Accounting::Optimistic => self.thr_upper,
            Accounting::Conservative => self.thr_lower,
        }
    }

    /// `L_D / L_B2`; below 1 the two-layer protocol is faster.
    pub fn latency_ratio(&self, mode: Accounting) -> f64 {
        self.latency(mode) / self.l_b2
    }

    /// `THR_B2 / THR_D`; below 1 the two-layer protocol completes more requests per ms.
    pub fn breakeven_ratio(&self, mode: Accounting) -> f64 {
        self.thr_b2 / self.throughput(mode)
    }
}

/// Evaluates every closed form for one point.
pub fn evaluate(net: &NetworkConfig, req: &Request, params: &ModelParams) -> Result<MetricsRecord> {
    params.validate()?;
    let m = net.m();
    let winners = safe_select_k(req.k_req, net.caps(), params.beta)?;
    let ell_anc = ancilla_bits(net.caps());
    let bounds = success_bounds(req.k_req, winners, m, ell_anc, params);
    let l_optimistic = latency_dheac(m, winners, req.k_req, ell_anc, params, Accounting::Optimistic)?;
    let l_conservative =
        latency_dheac(m, winners, req.k_req, ell_anc, params, Accounting::Conservative)?;
    let b2 = baselines::b2_evaluate(net, req, params)?;
    let b2_max_quota = b2
        .allocation
        .as_ref()
        .and_then(|a| a.quotas.iter().copied().max())
        .unwrap_or(0);
    let l_b2 = b2.latency.unwrap_or(f64::NAN);
    let p_b2 = b2.success.unwrap_or(f64::NAN);
    Ok(MetricsRecord {
        winners,
        ell_anc,
        inner_max: req.k_req.div_ceil(winners),
        b2_max_quota,
        p_lower: bounds.lower,
        p_upper: bounds.upper,
        p_b2,
        l_optimistic,
        l_conservative,
        l_b2,
        thr_lower: throughput(bounds.lower, l_conservative)?,
        thr_upper: throughput(bounds.upper, l_optimistic)?,
        thr_b2: throughput(p_b2, l_b2)?,
        jain: None,
    })
}

/// Binomial standard error of a proportion `p` estimated from `n` trials.
pub fn binomial_sigma(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    (p * (1.0 - p) / n as f64).max(0.0).sqrt()
}
