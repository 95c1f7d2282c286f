//! Robust location/scale and the rank-sum test.

use statrs::distribution::{ContinuousCDF, Normal};

/// Consistency constant turning a MAD into a standard-deviation estimate
/// under normality.
pub const MAD_SCALE: f64 = 1.4826;

/// Median of `xs`; the mean of the two middle values for even lengths.
/// `None` when empty.
pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// Median absolute deviation around `center`, unscaled.
pub fn mad(xs: &[f64], center: f64) -> Option<f64> {
    let dev: Vec<f64> = xs.iter().map(|x| (x - center).abs()).collect();
    median(&dev)
}

/// Smallest strictly positive `|x - center|`.
pub fn smallest_positive_deviation(xs: &[f64], center: f64) -> Option<f64> {
    xs.iter().map(|x| (x - center).abs()).filter(|d| *d > 0.0).min_by(f64::total_cmp)
}

/// Outcome of [`rank_sum`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSum {
    /// Mann-Whitney U of the first sample.
    pub u: f64,
    /// Standardized statistic, positive when the first sample tends higher.
    pub z: f64,
    /// Two-sided p-value.
    pub p: f64,
}

/// Two-sided Wilcoxon rank-sum (Mann-Whitney) test of `a` against `b`,
/// normal approximation with tie and continuity corrections. Returns
/// `p = 1` when either sample is empty or all values are tied.
pub fn rank_sum(a: &[f64], b: &[f64]) -> RankSum {
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    if a.is_empty() || b.is_empty() {
        return RankSum { u: 0.0, z: 0.0, p: 1.0 };
    }
    let mut all: Vec<(f64, bool)> = a.iter().map(|x| (*x, true)).chain(b.iter().map(|x| (*x, false))).collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let n = all.len();
    let (mut r1, mut ties) = (0.0, 0.0);
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // Ranks i+1..=j+1 share their average.
        let rank = (i + j + 2) as f64 / 2.0;
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        r1 += rank * all[i..=j].iter().filter(|x| x.1).count() as f64;
        i = j + 1;
    }
    let u = r1 - n1 * (n1 + 1.0) / 2.0;
    let mean = n1 * n2 / 2.0;
    let nn = n1 + n2;
    let var = n1 * n2 / 12.0 * (nn + 1.0 - ties / (nn * (nn - 1.0)));
    if var <= 0.0 {
        return RankSum { u, z: 0.0, p: 1.0 };
    }
    let diff = u - mean;
    let corrected = (diff.abs() - 0.5).max(0.0) * diff.signum();
    let z = corrected / var.sqrt();
    let p = 2.0 * Normal::standard().sf(z.abs());
    RankSum { u, z, p: p.min(1.0) }
}
