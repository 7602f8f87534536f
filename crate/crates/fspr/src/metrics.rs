//! Comparison and fairness metrics, plus the log-binned degree curves used
//! for figure data.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::Group;

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

fn check_finite(xs: &[f64]) -> Result<()> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateInput("non-finite value"));
    }
    Ok(())
}

/// Mean absolute deviation between two score vectors.
pub fn utility_loss(approx: &[f64], exact: &[f64]) -> Result<f64> {
    check_lengths(approx, exact)?;
    let sum: f64 = approx
        .iter()
        .zip(exact)
        .map(|(a, e)| (a - e).abs())
        .sum();
    Ok(sum / approx.len() as f64)
}

/// Absolute deviation of the protected group's score mass from its target.
/// With scores summing to 1 and complementary targets, both groups yield
/// the same value.
pub fn fairness_gap(scores: &[f64], labels: &[Group], target: f64) -> f64 {
    assert_eq!(scores.len(), labels.len());
    let mass: f64 = scores
        .iter()
        .zip(labels)
        .filter(|&(_, g)| g.is_protected())
        .map(|(&p, _)| p)
        .sum();
    (mass - target).abs()
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y)?;
    check_finite(x)?;
    check_finite(y)?;
    let n = x.len();
    if n < 2 {
        return Err(Error::DegenerateInput("fewer than two observations"));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput("zero variance"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Counts pairs out of ascending order (strictly), merge-sort style.
fn merge_count_inversions(values: &mut [f64], buffer: &mut [f64]) -> u64 {
    let n = values.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (left, right) = values.split_at_mut(mid);
    let mut swaps = merge_count_inversions(left, buffer);
    swaps += merge_count_inversions(right, buffer);
    let mut i = 0;
    let mut j = 0;
    let mut k = 0;
    while i < left.len() && j < right.len() {
        if left[i] <= right[j] {
            buffer[k] = left[i];
            i += 1;
        } else {
            // left[i..] are all greater than right[j].
            swaps += (left.len() - i) as u64;
            buffer[k] = right[j];
            j += 1;
        }
        k += 1;
    }
    while i < left.len() {
        buffer[k] = left[i];
        i += 1;
        k += 1;
    }
    while j < right.len() {
        buffer[k] = right[j];
        j += 1;
        k += 1;
    }
    values.copy_from_slice(&buffer[..n]);
    swaps
}

fn tie_pairs_sorted(values: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in values.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Kendall rank correlation, tie-corrected (tau-b), via merge-sort
/// inversion counting in O(n log n).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y)?;
    check_finite(x)?;
    check_finite(y)?;
    let n = x.len();
    if n < 2 {
        return Err(Error::DegenerateInput("fewer than two observations"));
    }

    // Sort jointly by (x, y); equal-x runs are then y-sorted, so later
    // inversion counting only sees strictly-x-ordered discordances.
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_unstable_by(|&a, &b| {
        x[a].partial_cmp(&x[b])
            .unwrap()
            .then(y[a].partial_cmp(&y[b]).unwrap())
    });

    let total_pairs = n as u64 * (n as u64 - 1) / 2;
    let x_sorted: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let ties_x = tie_pairs_sorted(&x_sorted);

    // Joint ties: runs of equal (x, y).
    let mut joint = 0u64;
    let mut run = 1u64;
    for w in idx.windows(2) {
        if x[w[0]] == x[w[1]] && y[w[0]] == y[w[1]] {
            run += 1;
        } else {
            joint += run * (run - 1) / 2;
            run = 1;
        }
    }
    joint += run * (run - 1) / 2;

    let mut y_in_x_order: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut buffer = vec![0.0; n];
    let swaps = merge_count_inversions(&mut y_in_x_order, &mut buffer);
    // y_in_x_order is now sorted.
    let ties_y = tie_pairs_sorted(&y_in_x_order);

    if total_pairs == ties_x || total_pairs == ties_y {
        return Err(Error::DegenerateInput("zero rank variance"));
    }

    let concordant_minus_discordant =
        total_pairs as i128 - ties_x as i128 - ties_y as i128 + joint as i128
            - 2 * swaps as i128;
    let denom = ((total_pairs - ties_x) as f64 * (total_pairs - ties_y) as f64).sqrt();
    Ok(concordant_minus_discordant as f64 / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
}

/// L1 or L2 distance between two score vectors.
pub fn lp_distance(x: &[f64], y: &[f64], norm: Norm) -> Result<f64> {
    check_lengths(x, y)?;
    match norm {
        Norm::L1 => Ok(x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()),
        Norm::L2 => Ok(x
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()),
    }
}

fn top_k_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    // Descending score, ties broken by ascending node id.
    idx.sort_unstable_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}

/// Fraction of shared ids among the top-`k` of both rankings. Ties broken
/// by ascending node id so runs are reproducible across implementations.
pub fn topk_overlap(x: &[f64], y: &[f64], k: usize) -> Result<f64> {
    check_lengths(x, y)?;
    check_finite(x)?;
    check_finite(y)?;
    assert!(k >= 1 && k <= x.len(), "k must be in [1, N]");
    let top_x = top_k_indices(x, k);
    let mut in_x = vec![false; x.len()];
    for &i in &top_x {
        in_x[i] = true;
    }
    let shared = top_k_indices(y, k)
        .into_iter()
        .filter(|&i| in_x[i])
        .count();
    Ok(shared as f64 / k as f64)
}

/// One log bin: edge interval, geometric center, and member statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BinStat {
    pub lo: f64,
    pub hi: f64,
    /// Geometric mean of the bin edges (0 for the zero bin).
    pub center: f64,
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation of member values.
    pub std: f64,
}

/// Log-binned curve: nonempty bins over keys >= 1, plus a dedicated bin for
/// key 0 so zero-in-degree nodes are never silently dropped.
#[derive(Debug, Clone)]
pub struct LogBinnedCurve {
    pub zero_bin: Option<BinStat>,
    pub bins: Vec<BinStat>,
}

fn bin_stat(lo: f64, hi: f64, center: f64, values: &[f64]) -> BinStat {
    let count = values.len();
    let mean = values.iter().sum::<f64>() / count as f64;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / count as f64;
    BinStat {
        lo,
        hi,
        center,
        count,
        mean,
        std: var.sqrt(),
    }
}

/// Bins `values` by their integer keys into logarithmic bins with edges
/// `1, factor, factor^2, ...`; bin centers are the geometric means of the
/// edges. Empty bins are omitted.
pub fn log_binned_curve(values: &[f64], keys: &[u32], factor: f64) -> Result<LogBinnedCurve> {
    if !(factor > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "bin factor must exceed 1, got {factor}"
        )));
    }
    if values.len() != keys.len() {
        return Err(Error::DimensionMismatch {
            expected: keys.len(),
            got: values.len(),
        });
    }
    let max_key = keys.iter().copied().max().unwrap_or(0);

    // Edges built by repeated multiplication so that boundary keys land in
    // a consistent bin regardless of rounding in logarithms.
    let mut edges = vec![1.0f64];
    while *edges.last().unwrap() <= max_key as f64 {
        let next = edges.last().unwrap() * factor;
        edges.push(next);
    }

    let mut zero_values = Vec::new();
    let mut binned: Vec<Vec<f64>> = vec![Vec::new(); edges.len().saturating_sub(1)];
    for (&key, &value) in keys.iter().zip(values) {
        if key == 0 {
            zero_values.push(value);
        } else {
            let pos = edges.partition_point(|&e| e <= key as f64) - 1;
            binned[pos].push(value);
        }
    }

    let zero_bin = if zero_values.is_empty() {
        None
    } else {
        Some(bin_stat(0.0, 0.0, 0.0, &zero_values))
    };
    let bins = binned
        .iter()
        .enumerate()
        .filter(|(_, members)| !members.is_empty())
        .map(|(i, members)| {
            let lo = edges[i];
            let hi = edges[i + 1];
            bin_stat(lo, hi, (lo * hi).sqrt(), members)
        })
        .collect();
    Ok(LogBinnedCurve { zero_bin, bins })
}

/// Full comparison between an approximate and a baseline score vector.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub utility_loss: f64,
    /// Deviation of the approximate scores' protected mass from the target.
    pub fairness_gap: f64,
    pub pearson: f64,
    pub kendall_tau: f64,
    pub l1_distance: f64,
    pub l2_distance: f64,
    /// Absolute difference between the two vectors' protected masses.
    pub protected_mass_delta: f64,
    /// Overlap fraction per requested K, ascending.
    pub topk_overlap: Vec<(usize, f64)>,
}

impl ComparisonReport {
    /// Flat key-value view in a fixed order, for serialization.
    pub fn key_values(&self) -> Vec<(String, f64)> {
        let mut kv = vec![
            ("utility_loss".to_string(), self.utility_loss),
            ("fairness_gap".to_string(), self.fairness_gap),
            ("pearson".to_string(), self.pearson),
            ("kendall_tau".to_string(), self.kendall_tau),
            ("l1_distance".to_string(), self.l1_distance),
            ("l2_distance".to_string(), self.l2_distance),
            (
                "protected_mass_delta".to_string(),
                self.protected_mass_delta,
            ),
        ];
        for &(k, v) in &self.topk_overlap {
            kv.push((format!("top{k}_overlap"), v));
        }
        kv
    }
}

/// Computes every comparison metric between `approx` and `baseline`.
pub fn compare(
    approx: &[f64],
    baseline: &[f64],
    labels: &[Group],
    target: f64,
    top_ks: &[usize],
) -> Result<ComparisonReport> {
    check_lengths(approx, baseline)?;
    let mass = |scores: &[f64]| -> f64 {
        scores
            .iter()
            .zip(labels)
            .filter(|&(_, g)| g.is_protected())
            .map(|(&p, _)| p)
            .sum()
    };
    let mut topk = Vec::with_capacity(top_ks.len());
    let mut ks: Vec<usize> = top_ks.iter().copied().filter(|&k| k <= approx.len() && k >= 1).collect();
    ks.sort_unstable();
    ks.dedup();
    for k in ks {
        topk.push((k, topk_overlap(approx, baseline, k)?));
    }
    Ok(ComparisonReport {
        utility_loss: utility_loss(approx, baseline)?,
        fairness_gap: fairness_gap(approx, labels, target),
        pearson: pearson(approx, baseline)?,
        kendall_tau: kendall_tau(approx, baseline)?,
        l1_distance: lp_distance(approx, baseline, Norm::L1)?,
        l2_distance: lp_distance(approx, baseline, Norm::L2)?,
        protected_mass_delta: (mass(approx) - mass(baseline)).abs(),
        topk_overlap: topk,
    })
}

/// Per-class mean scores for both sides of a comparison (figure data:
/// approximated class means against empirical ones).
#[derive(Debug, Clone)]
pub struct ClassMeanPoint {
    pub k_in: u32,
    pub k_out: u32,
    pub group: Group,
    pub count: usize,
    pub baseline_mean: f64,
    pub approx_mean: f64,
}

/// Groups nodes by `(k_in, k_out, group)` and averages both score vectors
/// within each class. Points come out sorted by key.
pub fn class_mean_points(
    k_in: &[u32],
    k_out: &[u32],
    labels: &[Group],
    baseline: &[f64],
    approx: &[f64],
) -> Result<Vec<ClassMeanPoint>> {
    let n = k_in.len();
    if [k_out.len(), labels.len(), baseline.len(), approx.len()]
        .iter()
        .any(|&l| l != n)
    {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: k_out
                .len()
                .min(labels.len())
                .min(baseline.len())
                .min(approx.len()),
        });
    }
    let mut cells: BTreeMap<(u32, u32, Group), (usize, f64, f64)> = BTreeMap::new();
    for i in 0..n {
        let cell = cells
            .entry((k_in[i], k_out[i], labels[i]))
            .or_insert((0, 0.0, 0.0));
        cell.0 += 1;
        cell.1 += baseline[i];
        cell.2 += approx[i];
    }
    Ok(cells
        .into_iter()
        .map(|((ki, ko, group), (count, bsum, asum))| ClassMeanPoint {
            k_in: ki,
            k_out: ko,
            group,
            count,
            baseline_mean: bsum / count as f64,
            approx_mean: asum / count as f64,
        })
        .collect())
}

/// One binned point of a score-versus-in-degree curve, with the closed-form
/// prediction alongside the empirical statistics.
#[derive(Debug, Clone)]
pub struct DegreeBinPoint {
    pub group: Group,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub bin_center: f64,
    pub count: usize,
    pub empirical: f64,
    pub spread: f64,
    pub predicted: f64,
}

/// Log-binned mean score per in-degree and group, with the closed-form
/// score overlaid. Zero-in-degree nodes get a dedicated zero bin.
pub fn score_vs_indegree_points(
    k_in: &[u32],
    labels: &[Group],
    scores: &[f64],
    nu: f64,
    factor: f64,
) -> Result<Vec<DegreeBinPoint>> {
    let n = k_in.len();
    if labels.len() != n || scores.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: labels.len().min(scores.len()),
        });
    }
    let m: u64 = k_in.iter().map(|&k| k as u64).sum();
    if m == 0 {
        return Err(Error::InvalidParameter(
            "degree curve needs at least one edge".into(),
        ));
    }
    let mut points = Vec::new();
    for group in [Group::Unprotected, Group::Protected] {
        let members: Vec<usize> = (0..n).filter(|&i| labels[i] == group).collect();
        if members.is_empty() {
            continue;
        }
        let fraction = members.len() as f64 / n as f64;
        let d_group: u64 = members.iter().map(|&i| k_in[i] as u64).sum();
        let predicted_score = |k: f64| -> f64 {
            let jump = if k > 0.0 {
                fraction * k / d_group as f64
            } else {
                0.0
            };
            nu * jump + (1.0 - nu) * k / m as f64
        };

        let member_scores: Vec<f64> = members.iter().map(|&i| scores[i]).collect();
        let member_keys: Vec<u32> = members.iter().map(|&i| k_in[i]).collect();
        let curve = log_binned_curve(&member_scores, &member_keys, factor)?;
        if let Some(zero) = curve.zero_bin {
            points.push(DegreeBinPoint {
                group,
                bin_lo: 0.0,
                bin_hi: 0.0,
                bin_center: 0.0,
                count: zero.count,
                empirical: zero.mean,
                spread: zero.std,
                predicted: predicted_score(0.0),
            });
        }
        // The prediction is averaged over member degrees, matching how the
        // empirical mean pools nodes inside a bin.
        for bin in curve.bins {
            let keys_in_bin: Vec<f64> = member_keys
                .iter()
                .filter(|&&kk| (kk as f64) >= bin.lo && (kk as f64) < bin.hi)
                .map(|&kk| kk as f64)
                .collect();
            let predicted = keys_in_bin.iter().map(|&kk| predicted_score(kk)).sum::<f64>()
                / keys_in_bin.len() as f64;
            points.push(DegreeBinPoint {
                group,
                bin_lo: bin.lo,
                bin_hi: bin.hi,
                bin_center: bin.center,
                count: bin.count,
                empirical: bin.mean,
                spread: bin.std,
                predicted,
            });
        }
    }
    Ok(points)
}

/// Log-binned empirical coefficient of variation per in-degree and group,
/// with the large-in-degree prediction overlaid.
///
/// The CV is computed per `(group, k_in)` cell, pooling out-degrees; cells
/// need at least two members and a positive mean. Bins average the cell CVs
/// weighted by cell population.
pub fn cv_vs_indegree_points(
    k_in: &[u32],
    k_out: &[u32],
    labels: &[Group],
    scores: &[f64],
    nu: f64,
    factor: f64,
) -> Result<Vec<DegreeBinPoint>> {
    let n = k_in.len();
    if k_out.len() != n || labels.len() != n || scores.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: k_out.len().min(labels.len()).min(scores.len()),
        });
    }
    // Global moments for the prediction.
    let m: u64 = k_in.iter().map(|&k| k as u64).sum();
    if m == 0 {
        return Err(Error::InvalidParameter(
            "cv curve needs at least one edge".into(),
        ));
    }
    let mean_in = m as f64 / n as f64;
    let mut moment_sum = 0.0;
    let mut moment_count = 0u64;
    for i in 0..n {
        if k_out[i] >= 1 {
            moment_sum += (k_in[i] as f64).powi(2) / k_out[i] as f64;
            moment_count += 1;
        }
    }
    if moment_count == 0 {
        return Err(Error::EmptyMoment);
    }
    let moment = moment_sum / moment_count as f64;
    let predicted_cv =
        |k: f64| -> f64 { (1.0 - nu) * (moment / (mean_in * k)).sqrt() };

    let mut points = Vec::new();
    for group in [Group::Unprotected, Group::Protected] {
        // Pool nodes by in-degree within the group.
        let mut cells: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for i in 0..n {
            if labels[i] == group && k_in[i] >= 1 {
                cells.entry(k_in[i]).or_default().push(scores[i]);
            }
        }
        let mut cell_keys = Vec::new();
        let mut cell_cvs = Vec::new();
        let mut cell_counts = Vec::new();
        for (key, values) in cells {
            if values.len() < 2 {
                continue;
            }
            let count = values.len() as f64;
            let mean = values.iter().sum::<f64>() / count;
            if mean <= 0.0 {
                continue;
            }
            let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / count;
            cell_keys.push(key);
            cell_cvs.push(var.sqrt() / mean);
            cell_counts.push(values.len());
        }
        if cell_keys.is_empty() {
            continue;
        }

        // Bin the cells, weighting by population.
        let max_key = *cell_keys.iter().max().unwrap();
        let mut edges = vec![1.0f64];
        while *edges.last().unwrap() <= max_key as f64 {
            let next = edges.last().unwrap() * factor;
            edges.push(next);
        }
        let mut bin_members: Vec<Vec<usize>> = vec![Vec::new(); edges.len() - 1];
        for (ci, &key) in cell_keys.iter().enumerate() {
            let pos = edges.partition_point(|&e| e <= key as f64) - 1;
            bin_members[pos].push(ci);
        }
        for (bi, members) in bin_members.iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            let weight: f64 = members.iter().map(|&ci| cell_counts[ci] as f64).sum();
            let mean_cv =
                members.iter().map(|&ci| cell_cvs[ci] * cell_counts[ci] as f64).sum::<f64>()
                    / weight;
            let var_cv = members
                .iter()
                .map(|&ci| cell_counts[ci] as f64 * (cell_cvs[ci] - mean_cv).powi(2))
                .sum::<f64>()
                / weight;
            let mean_key = members
                .iter()
                .map(|&ci| cell_counts[ci] as f64 * cell_keys[ci] as f64)
                .sum::<f64>()
                / weight;
            let lo = edges[bi];
            let hi = edges[bi + 1];
            points.push(DegreeBinPoint {
                group,
                bin_lo: lo,
                bin_hi: hi,
                bin_center: (lo * hi).sqrt(),
                count: weight as usize,
                empirical: mean_cv,
                spread: var_cv.sqrt(),
                predicted: predicted_cv(mean_key),
            });
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Group::{Protected, Unprotected};

    #[test]
    fn utility_loss_basics() {
        assert_eq!(utility_loss(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        let ul = utility_loss(&[0.6, 0.4], &[0.5, 0.5]).unwrap();
        assert!((ul - 0.1).abs() < 1e-15);
        assert!(utility_loss(&[0.5], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn fairness_gap_uniform_at_phi_is_zero() {
        let labels = [Protected, Unprotected, Unprotected, Unprotected];
        let phi = 0.25;
        let gap = fairness_gap(&[0.25; 4], &labels, phi);
        assert!(gap.abs() < 1e-15);
        // Two-group complementarity: the unprotected gap is identical.
        let unprotected_mass: f64 = 0.75;
        let gap_u = (unprotected_mass - (1.0 - phi)).abs();
        assert!((gap - gap_u).abs() < 1e-15);
    }

    #[test]
    fn pearson_affine_and_degenerate() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|&v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(
            pearson(&x, &[1.0; 4]),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn kendall_monotone_and_reversed() {
        let x = [1.0f64, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|&v| v.powi(3) - 2.0).collect();
        assert!((kendall_tau(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        assert!((kendall_tau(&x, &rev).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn kendall_matches_quadratic_oracle() {
        // Deterministic pseudo-random data with plenty of ties.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let n = 1000;
        let x: Vec<f64> = (0..n).map(|_| (next() % 40) as f64).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| (next() % 17) as f64 + 0.25 * x[i])
            .collect();

        // O(n^2) concordance count.
        let mut concordant = 0i64;
        let mut discordant = 0i64;
        let mut ties_x_only = 0i64;
        let mut ties_y_only = 0i64;
        let sign = |a: f64, b: f64| -> i32 {
            if a > b {
                1
            } else if a < b {
                -1
            } else {
                0
            }
        };
        for i in 0..n {
            for j in i + 1..n {
                let dx = sign(x[i], x[j]);
                let dy = sign(y[i], y[j]);
                if dx == 0 && dy == 0 {
                    continue;
                } else if dx == 0 {
                    ties_x_only += 1;
                } else if dy == 0 {
                    ties_y_only += 1;
                } else if dx == dy {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
        let expected = (concordant - discordant) as f64
            / (((concordant + discordant + ties_y_only) as f64)
                * ((concordant + discordant + ties_x_only) as f64))
                .sqrt();
        let tau = kendall_tau(&x, &y).unwrap();
        assert!(
            (tau - expected).abs() < 1e-12,
            "tau {tau} vs oracle {expected}"
        );
    }

    #[test]
    fn kendall_invariant_under_monotone_transform() {
        let x = [0.3, 0.1, 0.4, 0.15, 0.05];
        let y = [0.2, 0.25, 0.3, 0.15, 0.1];
        let tau = kendall_tau(&x, &y).unwrap();
        let x2: Vec<f64> = x.iter().map(|&v| v.exp()).collect();
        let tau2 = kendall_tau(&x2, &y).unwrap();
        assert!((tau - tau2).abs() < 1e-15);
    }

    #[test]
    fn topk_basics() {
        let x = [0.4, 0.3, 0.2, 0.1];
        assert_eq!(topk_overlap(&x, &x, 2).unwrap(), 1.0);
        let y = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(topk_overlap(&x, &y, 2).unwrap(), 0.0);
        // Ties resolved by ascending id: top-1 of all-equal is node 0.
        let z = [0.25; 4];
        assert_eq!(topk_overlap(&z, &x, 1).unwrap(), 1.0);
    }

    #[test]
    fn topk_invariant_under_rescaling() {
        let x = [0.4, 0.3, 0.2, 0.1];
        let y = [0.15, 0.35, 0.05, 0.45];
        let a = topk_overlap(&x, &y, 3).unwrap();
        let xs: Vec<f64> = x.iter().map(|&v| 7.5 * v).collect();
        let ys: Vec<f64> = y.iter().map(|&v| 0.03 * v).collect();
        assert_eq!(a, topk_overlap(&xs, &ys, 3).unwrap());
    }

    #[test]
    fn log_bins_factor_two() {
        let keys = [1u32, 2, 3, 4];
        let values = [10.0, 20.0, 30.0, 40.0];
        let curve = log_binned_curve(&values, &keys, 2.0).unwrap();
        assert!(curve.zero_bin.is_none());
        let counts: Vec<usize> = curve.bins.iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![1, 2, 1]);
        assert_eq!(curve.bins[0].lo, 1.0);
        assert_eq!(curve.bins[0].hi, 2.0);
        assert_eq!(curve.bins[1].lo, 2.0);
        assert_eq!(curve.bins[1].hi, 4.0);
        assert!((curve.bins[1].mean - 25.0).abs() < 1e-12);
    }

    #[test]
    fn log_bins_single_degree_and_zero_bin() {
        let keys = [5u32, 5, 5, 0];
        let values = [1.0, 2.0, 3.0, 9.0];
        let curve = log_binned_curve(&values, &keys, 1.05).unwrap();
        assert_eq!(curve.bins.len(), 1);
        assert_eq!(curve.bins[0].count, 3);
        let zero = curve.zero_bin.unwrap();
        assert_eq!(zero.count, 1);
        assert_eq!(zero.mean, 9.0);
    }

    #[test]
    fn compare_identical_vectors() {
        let labels = [Protected, Unprotected, Unprotected];
        let scores = [0.5, 0.3, 0.2];
        let report = compare(&scores, &scores, &labels, 0.5, &[1, 2]).unwrap();
        assert_eq!(report.utility_loss, 0.0);
        assert_eq!(report.kendall_tau, 1.0);
        assert_eq!(report.l2_distance, 0.0);
        assert_eq!(report.protected_mass_delta, 0.0);
        assert!(report.topk_overlap.iter().all(|&(_, v)| v == 1.0));
    }
}
