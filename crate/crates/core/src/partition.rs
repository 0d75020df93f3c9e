//! Deterministic core logic: minimal safe winner count, capacity-constrained
//! quota enumeration and capacity-proportional quota rounding.

use std::cmp::Reverse;

use crate::{Error, Result};

/// Fractional parts closer than this to an integer are treated as that integer.
const SNAP_EPS: f64 = 1e-9;

/// A winner set with one quota per winner. Non-winners implicitly get quota 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Allocation {
    /// Winning QLAN indices, ascending.
    pub winners: Vec<usize>,
    /// `quotas[j]` belongs to `winners[j]`.
    pub quotas: Vec<usize>,
}

impl Allocation {
    pub fn total(&self) -> usize {
        self.quotas.iter().sum()
    }

    /// Checks `Σ quotas = k_req` and `quota <= capacity` for every winner.
    pub fn validate(&self, caps: &[usize], k_req: usize) -> Result<()> {
        if self.winners.len() != self.quotas.len() {
            return Err(Error::InvariantViolation(
                "winner and quota vectors differ in length".into(),
            ));
        }
        if self.total() != k_req {
            return Err(Error::InvariantViolation(format!(
                "quotas sum to {} instead of {k_req}",
                self.total()
            )));
        }
        for (&i, &q) in self.winners.iter().zip(&self.quotas) {
            match caps.get(i) {
                Some(&c) if q <= c => {}
                Some(&c) => {
                    return Err(Error::InvariantViolation(format!(
                        "QLAN {i} quota {q} exceeds capacity {c}"
                    )))
                }
                None => return Err(Error::InvariantViolation(format!("unknown QLAN {i}"))),
            }
        }
        Ok(())
    }
}

/// All quota vectors `v` with `Σ v = k` and `0 <= v_j <= caps_j`, lexicographically ordered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSet {
    pub k: usize,
    pub caps: Vec<usize>,
    pub vectors: Vec<Vec<usize>>,
}

impl PartitionSet {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn contains(&self, v: &[usize]) -> bool {
        self.vectors.binary_search_by(|x| x.as_slice().cmp(v)).is_ok()
    }
}

/// Coverage target after applying the safety margin: `ceil((1+beta) k_req)`,
/// falling back to `k_req` when the inflated target exceeds total capacity.
pub fn coverage_target(k_req: usize, total: usize, beta: f64) -> usize {
    let inflated = (1.0 + beta) * k_req as f64;
    let r = inflated.round();
    let target = if (inflated - r).abs() < SNAP_EPS { r } else { inflated.ceil() } as usize;
    if target <= total {
        target
    } else {
        k_req
    }
}

/// Smallest `K` such that every `K`-subset of QLANs covers the margin-inflated request.
///
/// The sum of the `K` smallest capacities is the minimum over all `K`-subsets, so
/// checking the ascending prefix is sufficient.
pub fn safe_select_k(k_req: usize, caps: &[usize], beta: f64) -> Result<usize> {
    if k_req == 0 {
        return Err(Error::invalid("k_req must be >= 1"));
    }
    if caps.is_empty() {
        return Err(Error::invalid("capacity vector is empty"));
    }
    if !(beta >= 0.0) {
        return Err(Error::invalid(format!("beta must be >= 0, got {beta}")));
    }
    let total: usize = caps.iter().sum();
    if total < k_req {
        return Err(Error::ResourceShortage {
            requested: k_req,
            available: total,
        });
    }
    let target = coverage_target(k_req, total, beta);
    let mut sorted = caps.to_vec();
    sorted.sort_unstable();
    let mut covered = 0;
    for (k, c) in sorted.into_iter().enumerate() {
        covered += c;
        if covered >= target {
            return Ok(k + 1);
        }
    }
    unreachable!("target <= total guarantees coverage by the full prefix")
}

/// Enumerates every capacity-respecting quota vector summing to `k`.
///
/// Depth-first over an explicit stack, branching `x = 0..=min(cap_j, remaining)`
/// per position. Branches whose remaining demand exceeds the remaining capacity
/// are pruned, which does not change the output set.
pub fn enum_partitions(k: usize, caps: &[usize]) -> PartitionSet {
    let n = caps.len();
    // suffix[i] = Σ caps[i..]
    let mut suffix = vec![0usize; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + caps[i];
    }

    let mut vectors = Vec::new();
    if k <= suffix[0] {
        let mut stack: Vec<(Vec<usize>, usize)> = vec![(Vec::with_capacity(n), k)];
        while let Some((v, remaining)) = stack.pop() {
            let i = v.len();
            if i == n {
                if remaining == 0 {
                    vectors.push(v);
                }
                continue;
            }
            let lo = remaining.saturating_sub(suffix[i + 1]);
            let hi = caps[i].min(remaining);
            // Pushed in reverse so the smallest branch pops first: lexicographic output.
            for x in (lo..=hi).rev() {
                let mut next = v.clone();
                next.push(x);
                stack.push((next, remaining - x));
            }
        }
    }
    PartitionSet {
        k,
        caps: caps.to_vec(),
        vectors,
    }
}

/// `|enum_partitions(k, caps)|` by dynamic programming, without materialising the set.
pub fn count_partitions(k: usize, caps: &[usize]) -> u128 {
    let mut ways = vec![0u128; k + 1];
    ways[0] = 1;
    for &c in caps {
        let mut next = vec![0u128; k + 1];
        // Sliding window sum over ways[s - c ..= s].
        let mut window = 0u128;
        for s in 0..=k {
            window += ways[s];
            if s > c {
                window -= ways[s - c - 1];
            }
            next[s] = window;
        }
        ways = next;
    }
    ways[k]
}

/// Capacity-proportional integer rounding by largest remainders.
///
/// Each winner first receives `floor(k_req c_j / Σc)`. Leftover units go to the
/// largest fractional remainders (ties: larger capacity, then lower position).
/// A winner already at capacity is skipped and its unit flows to the next one in
/// the same order. Arithmetic is exact in integers.
pub fn quota_round(k_req: usize, caps: &[usize]) -> Result<Vec<usize>> {
    let total: usize = caps.iter().sum();
    if total < k_req {
        return Err(Error::Infeasible {
            requested: k_req,
            available: total,
        });
    }
    if k_req == 0 {
        return Ok(vec![0; caps.len()]);
    }
    let scaled: Vec<u128> = caps.iter().map(|&c| k_req as u128 * c as u128).collect();
    let denom = total as u128;
    let mut quotas: Vec<usize> = scaled
        .iter()
        .zip(caps)
        .map(|(s, &c)| ((s / denom) as usize).min(c))
        .collect();

    let mut order: Vec<usize> = (0..caps.len()).collect();
    order.sort_by_key(|&j| (Reverse(scaled[j] % denom), Reverse(caps[j]), j));

    let mut residual = k_req - quotas.iter().sum::<usize>();
    while residual > 0 {
        let before = residual;
        for &j in &order {
            if residual == 0 {
                break;
            }
            if quotas[j] < caps[j] {
                quotas[j] += 1;
                residual -= 1;
            }
        }
        if residual == before {
            return Err(Error::InvariantViolation(
                "no winner has spare capacity for the residual".into(),
            ));
        }
    }
    Ok(quotas)
}

/// Expected [`quota_round`] output when the winners are presented in a uniformly
/// random order, i.e. when the final "lower position" tie-break is a fair lottery
/// among winners with equal remainder and equal capacity.
pub fn expected_quota_round(k_req: usize, caps: &[usize]) -> Result<Vec<f64>> {
    let total: usize = caps.iter().sum();
    if total < k_req {
        return Err(Error::Infeasible {
            requested: k_req,
            available: total,
        });
    }
    if k_req == 0 {
        return Ok(vec![0.0; caps.len()]);
    }
    let denom = total as u128;
    let remainder = |j: usize| (k_req as u128 * caps[j] as u128) % denom;
    let mut expected: Vec<f64> = caps
        .iter()
        .map(|&c| ((k_req as u128 * c as u128) / denom) as f64)
        .collect();
    let mut order: Vec<usize> = (0..caps.len()).collect();
    order.sort_by_key(|&j| (Reverse(remainder(j)), Reverse(caps[j])));

    // Residual units never reach a capacity bound: floor + 1 > cap would need
    // k_req = Σcaps, where every remainder is zero and nothing is left over.
    let mut residual = k_req - expected.iter().sum::<f64>() as usize;
    let mut start = 0;
    while residual > 0 {
        let key = (remainder(order[start]), caps[order[start]]);
        let end = start
            + order[start..]
                .iter()
                .take_while(|&&j| (remainder(j), caps[j]) == key)
                .count();
        let group = &order[start..end];
        let units = residual.min(group.len());
        for &j in group {
            expected[j] += units as f64 / group.len() as f64;
        }
        residual -= units;
        start = end;
    }
    Ok(expected)
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) is always an integer at this point.
        acc = match acc.checked_mul((n - i) as u128) {
            Some(x) => x / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Visits every `k`-subset of `0..n` in lexicographic order.
pub fn for_each_combination(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        // Rightmost position that can still advance.
        let Some(pos) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return;
        };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_min_k(k_req: usize, caps: &[usize], target: usize) -> usize {
        let m = caps.len();
        (1..=m)
            .find(|&kk| {
                let mut worst = usize::MAX;
                for_each_combination(m, kk, |s| {
                    worst = worst.min(s.iter().map(|&i| caps[i]).sum());
                });
                worst >= target
            })
            .unwrap_or_else(|| panic!("no K covers {k_req}"))
    }

    fn brute_partitions(k: usize, caps: &[usize]) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for &c in caps {
            out = out
                .into_iter()
                .flat_map(|v: Vec<usize>| {
                    (0..=c).map(move |x| {
                        let mut w = v.clone();
                        w.push(x);
                        w
                    })
                })
                .collect();
        }
        out.retain(|v| v.iter().sum::<usize>() == k);
        out.sort();
        out
    }

    #[test]
    fn safe_select_examples() {
        assert_eq!(safe_select_k(5, &[5, 5, 5], 0.0).unwrap(), 1);
        assert_eq!(safe_select_k(4, &[5, 3, 2], 0.0).unwrap(), 2);
        assert_eq!(
            safe_select_k(10, &[3, 3, 3], 0.0),
            Err(Error::ResourceShortage {
                requested: 10,
                available: 9
            })
        );
        assert_eq!(safe_select_k(10, &[6, 6, 6], 0.10).unwrap(), 2);
        assert_eq!(brute_min_k(4, &[5, 3, 2], 4), 2);
    }

    #[test]
    fn margin_never_creates_shortage() {
        // Inflated target 11 > total 10 falls back to the raw request.
        assert_eq!(coverage_target(10, 10, 0.1), 10);
        assert_eq!(safe_select_k(10, &[5, 5], 0.1).unwrap(), 2);
        assert_eq!(coverage_target(10, 100, 0.1), 11);
        assert_eq!(coverage_target(64, 160, 0.1), 71);
    }

    #[test]
    fn safe_select_tolerates_zero_caps() {
        assert_eq!(safe_select_k(3, &[3, 0, 0], 0.0).unwrap(), 3);
    }

    #[test]
    fn enum_examples() {
        assert_eq!(enum_partitions(2, &[1, 2]).vectors, vec![vec![0, 2], vec![1, 1]]);
        assert_eq!(enum_partitions(0, &[3, 3]).vectors, vec![vec![0, 0]]);
        assert!(enum_partitions(7, &[2, 2, 2]).is_empty());
        let p = enum_partitions(3, &[3, 3]);
        assert_eq!(p.vectors, vec![vec![0, 3], vec![1, 2], vec![2, 1], vec![3, 0]]);
        // Coefficient of x^3 in (1+x+x^2+x^3)^2 is 4.
        assert_eq!(p.len(), 4);
        assert!(p.contains(&[2, 1]));
        assert!(!p.contains(&[2, 2]));
    }

    #[test]
    fn enum_matches_brute_force_small_grid() {
        for k in 0..=8 {
            for a in 0..=4 {
                for b in 0..=4 {
                    for c in 0..=3 {
                        let caps = [a, b, c];
                        assert_eq!(enum_partitions(k, &caps).vectors, brute_partitions(k, &caps));
                        assert_eq!(count_partitions(k, &caps), brute_partitions(k, &caps).len() as u128);
                    }
                }
            }
        }
    }

    #[test]
    fn quota_round_examples() {
        assert_eq!(quota_round(12, &[10, 20, 30]).unwrap(), vec![2, 4, 6]);
        assert_eq!(quota_round(6, &[5, 3, 2]).unwrap(), vec![3, 2, 1]);
        assert_eq!(quota_round(6, &[1, 9]).unwrap(), vec![1, 5]);
        assert_eq!(
            quota_round(7, &[3, 3]),
            Err(Error::Infeasible {
                requested: 7,
                available: 6
            })
        );
    }

    #[test]
    fn quota_round_tie_breaks_by_capacity_then_index() {
        // Shares 0.4c for c = (1, 26, 1): remainders 0.4, 0.4, 0.4 -> larger cap first.
        let q = quota_round(12, &[1, 26, 3]).unwrap();
        assert_eq!(q.iter().sum::<usize>(), 12);
        // 12 * (1,26,3)/30 = (0.4, 10.4, 1.2): floors (0,10,1), residual 1 -> tie 0.4 at
        // positions 0 and 1, capacity 26 wins.
        assert_eq!(q, vec![0, 11, 1]);
        // Equal caps and remainders: lower index wins.
        assert_eq!(quota_round(1, &[2, 2]).unwrap(), vec![1, 0]);
    }

    #[test]
    fn quota_round_zero_capacity_gets_nothing() {
        assert_eq!(quota_round(3, &[0, 2, 1]).unwrap(), vec![0, 2, 1]);
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn expected_rounding_averages_over_orders() {
        let cases: &[(usize, &[usize])] = &[
            (20, &[10, 10, 10]),
            (4, &[3, 3, 3, 3]),
            (7, &[2, 5, 2, 5]),
            (6, &[1, 9]),
            (5, &[4, 0, 4, 2, 2]),
            (3, &[1, 1, 1, 1, 1]),
        ];
        for &(k, caps) in cases {
            let perms = permutations(caps.len());
            let mut sums = vec![0.0; caps.len()];
            for p in &perms {
                let shuffled: Vec<usize> = p.iter().map(|&i| caps[i]).collect();
                for (pos, q) in quota_round(k, &shuffled).unwrap().into_iter().enumerate() {
                    sums[p[pos]] += q as f64;
                }
            }
            let expected = expected_quota_round(k, caps).unwrap();
            for (s, e) in sums.iter().zip(&expected) {
                assert!((s / perms.len() as f64 - e).abs() < 1e-12, "k={k} caps={caps:?}");
            }
        }
    }

    #[test]
    fn combinations_and_binomials() {
        let mut seen = Vec::new();
        for_each_combination(4, 2, |s| seen.push(s.to_vec()));
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[0], vec![0, 1]);
        assert_eq!(seen[5], vec![2, 3]);
        let mut count = 0;
        for_each_combination(3, 0, |s| {
            assert!(s.is_empty());
            count += 1;
        });
        assert_eq!(count, 1);
        assert_eq!(binomial(6, 3), 20);
        assert_eq!(binomial(32, 16), 601_080_390);
        assert_eq!(binomial(3, 4), 0);
    }

    proptest! {
        #[test]
        fn safe_select_equals_brute_force(caps in prop::collection::vec(0usize..8, 1..9), frac in 0.0f64..1.0, margin in prop::bool::ANY) {
            let total: usize = caps.iter().sum();
            prop_assume!(total > 0);
            let k_req = 1 + ((total - 1) as f64 * frac) as usize;
            let beta = if margin { 0.1 } else { 0.0 };
            let target = coverage_target(k_req, total, beta);
            prop_assert_eq!(safe_select_k(k_req, &caps, beta).unwrap(), brute_min_k(k_req, &caps, target));
        }

        #[test]
        fn quota_round_is_feasible_partition(caps in prop::collection::vec(0usize..7, 1..6), frac in 0.0f64..=1.0) {
            let total: usize = caps.iter().sum();
            let k = (total as f64 * frac).round() as usize;
            let q = quota_round(k, &caps).unwrap();
            prop_assert_eq!(q.iter().sum::<usize>(), k);
            prop_assert!(q.iter().zip(&caps).all(|(a, c)| a <= c));
            prop_assert!(enum_partitions(k, &caps).contains(&q));
        }

        #[test]
        fn quota_round_scale_invariant(caps in prop::collection::vec(1usize..20, 1..6), frac in 0.0f64..=1.0, scale in 1usize..5) {
            let total: usize = caps.iter().sum();
            let k = (total as f64 * frac).round() as usize;
            let scaled: Vec<usize> = caps.iter().map(|c| c * scale).collect();
            prop_assert_eq!(quota_round(k, &caps).unwrap(), quota_round(k, &scaled).unwrap());
        }
    }
}
