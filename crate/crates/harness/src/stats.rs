//! Small-sample statistics for the sweep tables.

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;
/// One-sided 95% normal quantile.
pub const Z95_ONE_SIDED: f64 = 1.6448536269514722;

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Pooled z statistic for the hypothesis rate(k1/n1) > rate(k2/n2).
pub fn two_proportion_z(k1: u64, n1: u64, k2: u64, n2: u64) -> f64 {
    let (a, b) = (n1 as f64, n2 as f64);
    let (p1, p2) = (k1 as f64 / a, k2 as f64 / b);
    let p = (k1 + k2) as f64 / (a + b);
    let se = (p * (1.0 - p) * (1.0 / a + 1.0 / b)).sqrt();
    if se == 0.0 {
        return 0.0;
    }
    (p1 - p2) / se
}

/// True unless the data show rate(k1/n1) significantly above rate(k2/n2)
/// with a one-sided test at 95%.
pub fn not_worse(k1: u64, n1: u64, k2: u64, n2: u64) -> bool {
    two_proportion_z(k1, n1, k2, n2) <= Z95_ONE_SIDED
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (m, (var / n as f64).sqrt())
}
