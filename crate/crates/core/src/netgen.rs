//! Heterogeneous QLAN capacity vectors and request sizing.

use crate::{Error, Result};

/// Shares within this distance of an integer are snapped to it before flooring,
/// so exact divisions are not lost to floating-point noise.
const SNAP_EPS: f64 = 1e-9;

/// The available-node capacities of `m` QLANs.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    caps: Vec<usize>,
    skew: f64,
}

impl NetworkConfig {
    /// Wraps an explicit capacity vector. `skew` is recorded for reporting only.
    pub fn from_caps(caps: Vec<usize>, skew: f64) -> Result<Self> {
        if caps.is_empty() {
            return Err(Error::invalid("a network needs at least one QLAN"));
        }
        if !(skew >= 0.0) {
            return Err(Error::invalid(format!("skew must be >= 0, got {skew}")));
        }
        Ok(NetworkConfig { caps, skew })
    }

    pub fn m(&self) -> usize {
        self.caps.len()
    }

    pub fn caps(&self) -> &[usize] {
        &self.caps
    }

    pub fn skew(&self) -> f64 {
        self.skew
    }

    pub fn total(&self) -> usize {
        self.caps.iter().sum()
    }

    /// Index of the first node of each QLAN in the flattened node numbering.
    pub fn node_offsets(&self) -> Vec<usize> {
        self.caps
            .iter()
            .scan(0, |acc, &c| {
                let start = *acc;
                *acc += c;
                Some(start)
            })
            .collect()
    }
}

/// A request for `k_req` nodes, together with the demand ratio that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Request {
    pub k_req: usize,
    pub demand: f64,
}

impl Request {
    pub fn new(k_req: usize) -> Result<Self> {
        if k_req == 0 {
            return Err(Error::invalid("k_req must be >= 1"));
        }
        Ok(Request { k_req, demand: f64::NAN })
    }

    /// Builds the request for a demand ratio over a network's total capacity.
    pub fn from_demand(demand: f64, total: usize) -> Result<Self> {
        Ok(Request {
            k_req: demand_to_kreq(demand, total)?,
            demand,
        })
    }
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < SNAP_EPS {
        r
    } else {
        x
    }
}

/// Splits `total` nodes over `m` QLANs by Zipf weights `1/i^skew` (i = 1..m).
///
/// Each QLAN gets the floor of its proportional share; the leftover units go one
/// each to the heaviest bins (ties to the lower index). The result is
/// non-increasing and sums to `total` exactly. Zero-capacity bins are legal.
pub fn generate_network(m: usize, skew: f64, total: usize) -> Result<NetworkConfig> {
    if m == 0 {
        return Err(Error::invalid("m must be >= 1"));
    }
    if !(skew >= 0.0) || !skew.is_finite() {
        return Err(Error::invalid(format!("skew must be finite and >= 0, got {skew}")));
    }
    let weights: Vec<f64> = (1..=m).map(|i| (i as f64).powf(-skew)).collect();
    let weight_sum: f64 = weights.iter().sum();
    let mut caps: Vec<usize> = weights
        .iter()
        .map(|w| snap(total as f64 * w / weight_sum).floor() as usize)
        .collect();

    let assigned: usize = caps.iter().sum();
    if assigned > total {
        return Err(Error::InvariantViolation(format!(
            "Zipf floors sum to {assigned} > total {total}"
        )));
    }
    // Weights are non-increasing in index, so descending-weight order with
    // lower-index tie-break is plain index order.
    let residual = total - assigned;
    for i in 0..residual {
        caps[i % m] += 1;
    }
    NetworkConfig::from_caps(caps, skew)
}

/// Converts a demand ratio into an absolute request: `max(1, round_half_up(demand * total))`.
pub fn demand_to_kreq(demand: f64, total: usize) -> Result<usize> {
    if !(demand > 0.0 && demand <= 1.0) {
        return Err(Error::invalid(format!("demand must lie in (0, 1], got {demand}")));
    }
    if total == 0 {
        return Err(Error::invalid("total capacity must be >= 1"));
    }
    let k = (snap(demand * total as f64) + 0.5).floor() as usize;
    Ok(k.max(1))
}
