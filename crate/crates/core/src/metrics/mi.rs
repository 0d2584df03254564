//! Nearest-neighbour mutual information between a continuous feature and a
//! discrete target (Ross, 2014).

use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::rng::rng_from;

const EULER_MASCHERONI: f64 = 0.577_215_664_901_532_9;

/// Digamma function for `x > 0`: upward recurrence to `x >= 10`, then the
/// asymptotic series. Absolute error below 1e-12 on `x >= 1`.
pub fn digamma(mut x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NAN;
    }
    if x == 1.0 {
        return -EULER_MASCHERONI;
    }
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Bernoulli terms B_2n / (2n x^2n)
    let series =
        inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    acc + x.ln() - 0.5 * inv - series
}

/// Mutual information (nats) between `feature` and a binary `target`.
///
/// For each point, `d` is the distance to its k-th nearest neighbour among
/// points of the same class and `m` counts all points within `d`; the
/// estimate is `psi(N) - <psi(N_y)> + psi(k) - <psi(m)>`, clamped at 0.
/// Ties are broken by a fixed, tiny jitter so that discrete-valued features
/// are handled.
pub fn mutual_information(feature: &[f64], target: &[u8], k: usize) -> Result<f64> {
    check_dim(feature.len(), target.len())?;
    let n = feature.len();
    if n < 50 {
        return Err(Error::Argument(format!("need at least 50 samples, got {n}")));
    }
    if k == 0 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    if feature.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("feature contains non-finite values".into()));
    }
    let class_size = [
        target.iter().filter(|&&t| t == 0).count(),
        target.iter().filter(|&&t| t == 1).count(),
    ];
    if class_size[0] + class_size[1] != n {
        return Err(Error::Data("target must be 0/1".into()));
    }
    if class_size.iter().any(|&c| c < k + 1) {
        return Err(Error::Argument(format!(
            "each class needs at least {} samples, got {:?}",
            k + 1,
            class_size
        )));
    }

    let scale = 1e-10 * (feature.iter().map(|v| v.abs()).sum::<f64>() / n as f64).max(1.0);
    let mut rng = rng_from(0x6d69_5f6a_6974_7472);
    let x: Vec<f64> = feature
        .iter()
        .map(|v| {
            let e: f64 = StandardNormal.sample(&mut rng);
            v + scale * e
        })
        .collect();

    let mut all = x.clone();
    all.sort_by(f64::total_cmp);
    let mut per_class: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for (&v, &t) in x.iter().zip(target) {
        per_class[t as usize].push(v);
    }
    per_class.iter_mut().for_each(|c| c.sort_by(f64::total_cmp));

    let mut sum_psi_ny = 0.0;
    let mut sum_psi_m = 0.0;
    for (&v, &t) in x.iter().zip(target) {
        let class = &per_class[t as usize];
        let d = kth_neighbor_distance(class, v, k);
        // points in the full sample with |x_j - v| <= d, minus the point itself
        let lo = all.partition_point(|&u| u < v - d);
        let hi = all.partition_point(|&u| u <= v + d);
        let m = (hi - lo).saturating_sub(1).max(k);
        sum_psi_ny += digamma(class_size[t as usize] as f64);
        sum_psi_m += digamma(m as f64);
    }
    let nf = n as f64;
    let mi = digamma(nf) - sum_psi_ny / nf + digamma(k as f64) - sum_psi_m / nf;
    Ok(mi.max(0.0))
}

/// Distance from `v` (a member of sorted `sorted`) to its k-th nearest
/// other member.
fn kth_neighbor_distance(sorted: &[f64], v: f64, k: usize) -> f64 {
    let pos = sorted.partition_point(|&u| u < v);
    // `pos` is the first occurrence of `v`; skip one copy as the point itself.
    let (mut left, mut right) = (pos as isize - 1, pos + 1);
    let mut d = 0.0;
    for _ in 0..k {
        let dl = if left >= 0 {
            v - sorted[left as usize]
        } else {
            f64::INFINITY
        };
        let dr = if right < sorted.len() {
            sorted[right] - v
        } else {
            f64::INFINITY
        };
        if dl <= dr {
            d = dl;
            left -= 1;
        } else {
            d = dr;
            right += 1;
        }
    }
    d
}
