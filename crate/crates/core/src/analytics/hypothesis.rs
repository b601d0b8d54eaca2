//! Hypothesis tests used by the cohort analyses: Welch's unequal-variance
//! t-test, the exact binomial test, and Pearson's chi-square test of
//! homogeneity.

use serde::{Deserialize, Serialize};

use super::special::{chi_square_sf, ln_choose, reg_inc_beta, student_t_cdf};
use super::StatError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    TwoSided,
    Greater,
    Less,
}

impl Alternative {
    pub fn as_str(self) -> &'static str {
        match self {
            Alternative::TwoSided => "two_sided",
            Alternative::Greater => "greater",
            Alternative::Less => "less",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    WelchT,
    BinomialExact,
    ChiSquare,
}

impl TestMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            TestMethod::WelchT => "welch_t",
            TestMethod::BinomialExact => "binomial_exact",
            TestMethod::ChiSquare => "chi_square",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degrees_of_freedom: Option<f64>,
    pub p_value: f64,
    pub method: TestMethod,
    pub alternative: Alternative,
}

fn mean(sample: &[f64]) -> f64 {
    sample.iter().sum::<f64>() / sample.len() as f64
}

fn sample_variance(sample: &[f64], m: f64) -> f64 {
    sample.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (sample.len() - 1) as f64
}

/// Welch's t-test for a difference in means between two independent samples
/// with unequal variances. Degrees of freedom use the Welch-Satterthwaite
/// approximation.
pub fn welch_t_test(a: &[f64], b: &[f64], alternative: Alternative) -> Result<TestResult, StatError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatError::UndersizedSample {
            needed: 2,
            got: a.len().min(b.len()),
        });
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_variance(a, ma), sample_variance(b, mb));
    if va == 0.0 && vb == 0.0 {
        return Err(StatError::ZeroVariance);
    }

    let sa = va / na;
    let sb = vb / nb;
    let t = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa.powi(2) / (na - 1.0) + sb.powi(2) / (nb - 1.0));

    let p = match alternative {
        Alternative::TwoSided => {
            if t == 0.0 {
                1.0
            } else {
                reg_inc_beta(df / 2.0, 0.5, df / (df + t * t))
            }
        }
        Alternative::Greater => 1.0 - student_t_cdf(t, df),
        Alternative::Less => student_t_cdf(t, df),
    };

    Ok(TestResult {
        statistic: t,
        degrees_of_freedom: Some(df),
        p_value: p.clamp(0.0, 1.0),
        method: TestMethod::WelchT,
        alternative,
    })
}

fn binomial_ln_pmf(k: u64, n: u64, p0: f64) -> f64 {
    ln_choose(n, k) + k as f64 * p0.ln() + (n - k) as f64 * (1.0 - p0).ln()
}

/// Exact binomial test of `k` successes in `n` trials against success
/// probability `p0`.
///
/// The two-sided p-value sums the probabilities of all outcomes no more
/// likely than the observed one (the minimum-likelihood rule), with a small
/// relative guard so outcomes tied in probability are included despite
/// rounding.
pub fn binomial_test_exact(
    k: u64,
    n: u64,
    p0: f64,
    alternative: Alternative,
) -> Result<TestResult, StatError> {
    if k > n {
        return Err(StatError::DomainViolation(format!("k={k} exceeds n={n}")));
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(StatError::DomainViolation(format!(
            "p0={p0} outside (0, 1)"
        )));
    }

    let pmf: Vec<f64> = (0..=n).map(|j| binomial_ln_pmf(j, n, p0).exp()).collect();
    let kahan_sum = |values: &mut dyn Iterator<Item = f64>| -> f64 {
        let mut sum = 0.0;
        let mut c = 0.0;
        for v in values {
            let y = v - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        sum
    };

    let p = match alternative {
        Alternative::Less => kahan_sum(&mut pmf[..=(k as usize)].iter().copied()),
        Alternative::Greater => kahan_sum(&mut pmf[(k as usize)..].iter().copied()),
        Alternative::TwoSided => {
            let threshold = pmf[k as usize] * (1.0 + 1e-7);
            if pmf.iter().all(|&p| p <= threshold) {
                // Every outcome is included, so the sum is 1 by definition.
                1.0
            } else {
                kahan_sum(&mut pmf.iter().copied().filter(|&p| p <= threshold))
            }
        }
    };

    Ok(TestResult {
        statistic: k as f64,
        degrees_of_freedom: None,
        p_value: p.min(1.0),
        method: TestMethod::BinomialExact,
        alternative,
    })
}

/// Pearson's chi-square test over an R x K contingency table, without
/// continuity correction.
pub fn chi_square_test(table: &[Vec<u64>]) -> Result<TestResult, StatError> {
    chi_square_test_opts(table, false)
}

/// Pearson's chi-square test with optional Yates continuity correction
/// (applied only to 2x2 tables).
pub fn chi_square_test_opts(table: &[Vec<u64>], yates: bool) -> Result<TestResult, StatError> {
    let rows = table.len();
    if rows < 2 {
        return Err(StatError::DomainViolation(
            "need at least 2 rows".to_string(),
        ));
    }
    let cols = table[0].len();
    if cols < 2 || table.iter().any(|r| r.len() != cols) {
        return Err(StatError::DomainViolation(
            "table must be rectangular with at least 2 columns".to_string(),
        ));
    }

    let row_sums: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<u64> = (0..cols).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    if row_sums.contains(&0) || col_sums.contains(&0) {
        return Err(StatError::ZeroMarginal);
    }
    let total: u64 = row_sums.iter().sum();

    let apply_yates = yates && rows == 2 && cols == 2;
    let mut statistic = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &obs) in row.iter().enumerate() {
            let expected = row_sums[i] as f64 * col_sums[j] as f64 / total as f64;
            let mut dev = (obs as f64 - expected).abs();
            if apply_yates {
                dev = (dev - 0.5).max(0.0);
            }
            statistic += dev * dev / expected;
        }
    }

    let df = ((rows - 1) * (cols - 1)) as f64;
    Ok(TestResult {
        statistic,
        degrees_of_freedom: Some(df),
        p_value: chi_square_sf(statistic, df),
        method: TestMethod::ChiSquare,
        alternative: Alternative::TwoSided,
    })
}
