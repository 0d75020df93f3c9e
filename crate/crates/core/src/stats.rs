//! Goodness-of-fit helpers shared by the samplers' self-checks and the CLI.

use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquareTest {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value >= significance
    }

    /// Sums independent tests into one pooled test.
    pub fn pooled(tests: &[ChiSquareTest]) -> ChiSquareTest {
        let statistic = tests.iter().map(|t| t.statistic).sum();
        let dof = tests.iter().map(|t| t.dof).sum();
        ChiSquareTest {
            statistic,
            dof,
            p_value: upper_tail(statistic, dof),
        }
    }
}

fn upper_tail(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("dof > 0");
    1.0 - dist.cdf(statistic)
}

/// Pearson's test of observed counts against expected probabilities.
///
/// Categories with zero expected probability are dropped from the degrees of
/// freedom; an observation in such a category yields `p_value = 0`.
pub fn chi_square(observed: &[u64], expected_probs: &[f64]) -> ChiSquareTest {
    assert_eq!(observed.len(), expected_probs.len());
    let n: u64 = observed.iter().sum();
    let mut statistic = 0.0;
    let mut cells = 0usize;
    for (&o, &p) in observed.iter().zip(expected_probs) {
        if p <= 0.0 {
            if o > 0 {
                return ChiSquareTest {
                    statistic: f64::INFINITY,
                    dof: 0,
                    p_value: 0.0,
                };
            }
            continue;
        }
        let e = p * n as f64;
        statistic += (o as f64 - e).powi(2) / e;
        cells += 1;
    }
    let dof = cells.saturating_sub(1);
    ChiSquareTest {
        statistic,
        dof,
        p_value: upper_tail(statistic, dof),
    }
}

/// Chi-square test against the uniform distribution.
pub fn chi_square_uniform(observed: &[u64]) -> ChiSquareTest {
    let p = 1.0 / observed.len() as f64;
    chi_square(observed, &vec![p; observed.len()])
}
