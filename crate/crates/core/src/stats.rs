//! Seed-level summaries and two-sample Kolmogorov-Smirnov significance.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normal 95% multiplier.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Half-width of the 95% interval; absent for a single value.
    pub ci95: Option<f64>,
    pub min: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub max: f64,
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    summarize_with(values, Z_95)
}

/// Mean, `z * s / sqrt(n)` interval (sample standard deviation) and
/// quartiles.
pub fn summarize_with(values: &[f64], z: f64) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::Empty("sample".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation(
            "sample contains non-finite values".into(),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // sorted order makes the sum permutation-invariant
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let ci95 = (n >= 2).then(|| {
        let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        z * var.sqrt() / (n as f64).sqrt()
    });
    Ok(Summary {
        n,
        mean,
        ci95,
        min: sorted[0],
        p25: percentile(&sorted, 0.25),
        p50: percentile(&sorted, 0.5),
        p75: percentile(&sorted, 0.75),
        max: sorted[n - 1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// `sup_x |F_a(x) - F_b(x)|` over the empirical CDFs.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Kolmogorov survival function `2 Σ_{k≥1} (-1)^{k-1} exp(-2 k² λ²)`,
/// truncated once a term drops below `1e-12`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let a = -2.0 * lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100_000u32 {
        let kf = k as f64;
        let term = (a * kf * kf).exp();
        sum += sign * term;
        if term < 1e-12 {
            return (2.0 * sum).clamp(f64::MIN_POSITIVE, 1.0);
        }
        sign = -sign;
    }
    1.0
}

/// Two-sided two-sample KS test with the asymptotic p-value at effective
/// size `n_a n_b / (n_a + n_b)`.
pub fn ks_test(a: &[f64], b: &[f64], alpha: f64) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("KS sample".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Validation("KS sample contains NaN".into()));
    }
    let d = ks_statistic(a, b);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let ne = n * m / (n + m);
    let sq = ne.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    let p_value = kolmogorov_q(lambda);
    Ok(KsResult {
        d,
        p_value,
        significant: p_value < alpha,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceRow {
    pub variant_a: String,
    pub variant_b: String,
    pub d: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// The nine pairwise comparisons of the published grid, by variant label.
pub fn table_a3_pairs() -> Vec<(String, String)> {
    [
        ("distill,no-project", "distill,project"),
        ("no-distill,no-project", "no-distill,project"),
        ("contextual,no-project", "contextual,project"),
        ("no-distill,no-project", "distill,no-project"),
        ("no-distill,project", "distill,project"),
        ("no-distill,no-project", "contextual,no-project"),
        ("distill,no-project", "contextual,no-project"),
        ("no-distill,project", "contextual,project"),
        ("distill,project", "contextual,project"),
    ]
    .iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect()
}

/// KS test for each requested pair of per-seed samples.
pub fn significance_grid(
    samples: &BTreeMap<String, Vec<f64>>,
    pairs: &[(String, String)],
    alpha: f64,
) -> Result<Vec<SignificanceRow>> {
    let get = |name: &str| -> Result<&Vec<f64>> {
        let s = samples
            .get(name)
            .ok_or_else(|| Error::missing("variant", name))?;
        if s.len() < 2 {
            return Err(Error::Validation(format!(
                "variant `{name}` has {} seeds, need at least 2",
                s.len()
            )));
        }
        Ok(s)
    };
    pairs
        .iter()
        .map(|(a, b)| {
            let r = ks_test(get(a)?, get(b)?, alpha)?;
            Ok(SignificanceRow {
                variant_a: a.clone(),
                variant_b: b.clone(),
                d: r.d,
                p_value: r.p_value,
                significant: r.significant,
            })
        })
        .collect()
}

pub fn significance_table(rows: &[SignificanceRow]) -> String {
    let wa = rows
        .iter()
        .map(|r| r.variant_a.len())
        .max()
        .unwrap_or(0)
        .max(7);
    let wb = rows
        .iter()
        .map(|r| r.variant_b.len())
        .max()
        .unwrap_or(0)
        .max(7);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<wa$}  {:<wb$}  {:>6}  {:>10}  significant",
        "model 1", "model 2", "D", "p"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<wa$}  {:<wb$}  {:>6.4}  {:>10.3e}  {}",
            r.variant_a,
            r.variant_b,
            r.d,
            r.p_value,
            if r.significant { "yes" } else { "no" }
        );
    }
    s
}
