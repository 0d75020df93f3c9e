//! Reference schemes: B1 (whole request co-located in one QLAN) and B2 (classical
//! allocation by the global orchestrator).

use crate::analytics::{self, ModelParams};
use crate::netgen::{NetworkConfig, Request};
use crate::partition::{quota_round, Allocation};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    B1,
    B2,
}

/// Metrics are `None` when the scheme does not apply.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub scheme: Scheme,
    pub applicable: bool,
    pub allocation: Option<Allocation>,
    pub success: Option<f64>,
    pub latency: Option<f64>,
    pub throughput: Option<f64>,
}

/// Single inner-layer round inside the largest QLAN, when the request fits there.
pub fn b1_evaluate(net: &NetworkConfig, req: &Request, params: &ModelParams) -> Result<BaselineResult> {
    params.validate()?;
    // Largest capacity, ties to the lowest index.
    let (host, &cap) = net
        .caps()
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.cmp(b).then(j.cmp(i)))
        .expect("networks are non-empty");
    if cap < req.k_req {
        return Ok(BaselineResult {
            scheme: Scheme::B1,
            applicable: false,
            allocation: None,
            success: None,
            latency: None,
            throughput: None,
        });
    }
    let success = analytics::success_b2(req.k_req, params);
    let latency = analytics::stage_latency(req.k_req as f64, params);
    Ok(BaselineResult {
        scheme: Scheme::B1,
        applicable: true,
        allocation: Some(Allocation {
            winners: vec![host],
            quotas: vec![req.k_req],
        }),
        success: Some(success),
        latency: Some(latency),
        throughput: Some(analytics::throughput(success, latency)?),
    })
}

/// Capacity-proportional allocation over the whole network, announced classically.
pub fn b2_evaluate(net: &NetworkConfig, req: &Request, params: &ModelParams) -> Result<BaselineResult> {
    params.validate()?;
    if net.total() < req.k_req {
        return Err(Error::ResourceShortage {
            requested: req.k_req,
            available: net.total(),
        });
    }
    let quotas = quota_round(req.k_req, net.caps())?;
    let k_max = quotas.iter().copied().max().unwrap_or(0);
    let success = analytics::success_b2(req.k_req, params);
    let latency = analytics::latency_b2(net.m(), k_max, params);
    Ok(BaselineResult {
        scheme: Scheme::B2,
        applicable: true,
        allocation: Some(Allocation {
            winners: (0..net.m()).collect(),
            quotas,
        }),
        success: Some(success),
        latency: Some(latency),
        throughput: Some(analytics::throughput(success, latency)?),
    })
}
