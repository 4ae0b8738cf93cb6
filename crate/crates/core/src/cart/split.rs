//! Split search at a single node.
//!
//! Candidates are the `n(t) - 1` order-statistic positions of each scanned
//! direction. Position `i` (1-based) puts the `i` smallest values in the left
//! child and uses the `i`-th order statistic itself as the threshold, so the
//! left cell is `x_j <= threshold`. Positions whose order statistic is tied
//! with the next one are skipped. Among equal gains (up to a relative
//! [`TIE_TOLERANCE`]) the smallest direction
//! wins, then the smallest position.

use crate::dgp::Dataset;
use crate::error::{Error, Result};

/// The maximiser of the split criterion at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitResult {
    /// Split direction (0-based feature index).
    pub direction: usize,
    /// Number of in-node samples with `x[direction] <= threshold`.
    pub order_index: usize,
    pub threshold: f64,
    /// Criterion improvement; for regression the SSE decrease.
    pub gain: f64,
}

/// The samples of one node together with the responses used to split it.
#[derive(Debug, Clone)]
pub struct NodeData<'a> {
    pub data: &'a Dataset,
    pub responses: &'a [f64],
    pub ids: Vec<usize>,
}

impl<'a> NodeData<'a> {
    /// Node holding every sample of `data`.
    pub fn root(data: &'a Dataset, responses: &'a [f64]) -> Result<Self> {
        if responses.len() != data.n() {
            return Err(Error::ShapeMismatch(format!("{} responses for {} samples", responses.len(), data.n())));
        }
        Ok(Self { data, responses, ids: (0..data.n()).collect() })
    }

    pub fn subset(data: &'a Dataset, responses: &'a [f64], ids: Vec<usize>) -> Result<Self> {
        if responses.len() != data.n() {
            return Err(Error::ShapeMismatch(format!("{} responses for {} samples", responses.len(), data.n())));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= data.n()) {
            return Err(Error::InvalidArgument(format!("sample id {bad} out of range")));
        }
        Ok(Self { data, responses, ids })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Node ids sorted by `x_j`, ties broken by sample id.
    pub fn sorted_by(&self, j: usize) -> Vec<usize> {
        sorted_ids(self.data, &self.ids, j)
    }

    /// `sum (y - mean)^2` over the node.
    pub fn total_ss(&self) -> f64 {
        let mean = self.mean();
        self.ids.iter().map(|&i| (self.responses[i] - mean).powi(2)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.ids.iter().map(|&i| self.responses[i]).sum::<f64>() / self.ids.len() as f64
    }

    fn check_candidate(&self, j: usize, i: usize) -> Result<Vec<usize>> {
        if j >= self.data.p() {
            return Err(Error::InvalidArgument(format!("direction {j} out of range for p = {}", self.data.p())));
        }
        let n = self.len();
        if n < 2 || i == 0 || i >= n {
            return Err(Error::InvalidArgument(format!("order index {i} outside 1..{n}")));
        }
        let sorted = self.sorted_by(j);
        let col = self.data.column(j);
        if col[sorted[i - 1]] == col[sorted[i]] {
            return Err(Error::InvalidArgument(format!("order index {i} falls inside a tie of direction {j}")));
        }
        Ok(sorted)
    }
}

pub(crate) fn sorted_ids(data: &Dataset, ids: &[usize], j: usize) -> Vec<usize> {
    let col = data.column(j);
    let mut sorted = ids.to_vec();
    sorted.sort_unstable_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
    sorted
}

/// Sum of squared residuals of the two-cell fit at candidate `(j, i)`,
/// evaluated literally from the child means.
pub fn split_sse(node: &NodeData<'_>, j: usize, i: usize) -> Result<f64> {
    let sorted = node.check_candidate(j, i)?;
    let tau = node.data.x(sorted[i - 1], j);
    let (left, right): (Vec<usize>, Vec<usize>) = node.ids.iter().partition(|&&s| node.data.x(s, j) <= tau);
    let y = node.responses;
    let mean = |s: &[usize]| s.iter().map(|&k| y[k]).sum::<f64>() / s.len() as f64;
    let (ml, mr) = (mean(&left), mean(&right));
    Ok(left.iter().map(|&k| (y[k] - ml).powi(2)).sum::<f64>() + right.iter().map(|&k| (y[k] - mr).powi(2)).sum::<f64>())
}

/// SSE decrease of candidate `(j, i)`, computed from the centred partial sum
/// `C_i = sum_{l <= i} (y_l - mean)` as `n C_i^2 / (i (n - i))`.
pub fn impurity_gain(node: &NodeData<'_>, j: usize, i: usize) -> Result<f64> {
    let sorted = node.check_candidate(j, i)?;
    let mean = node.mean();
    let partial: f64 = sorted[..i].iter().map(|&k| node.responses[k] - mean).sum();
    Ok(regression_gain(partial, i, node.len()))
}

#[inline]
fn regression_gain(partial: f64, i: usize, n: usize) -> f64 {
    partial * partial * n as f64 / (i as f64 * (n - i) as f64)
}

/// Gain-maximising split over `features`, or `None` when the node cannot be split.
pub fn best_split(node: &NodeData<'_>, features: &[usize]) -> Result<Option<SplitResult>> {
    if features.is_empty() {
        return Err(Error::InvalidArgument("feature subset is empty".into()));
    }
    if let Some(&bad) = features.iter().find(|&&j| j >= node.data.p()) {
        return Err(Error::InvalidArgument(format!("direction {bad} out of range for p = {}", node.data.p())));
    }
    if node.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut features = features.to_vec();
    features.sort_unstable();
    features.dedup();
    let rule = RegressionRule { y: node.responses };
    let Some(stats) = rule.node_stats(&node.ids) else { return Ok(None) };
    let mut best = None;
    for &j in &features {
        scan_feature(&rule, node.data, j, &node.sorted_by(j), &stats, 1, &mut best);
    }
    Ok(best)
}

/// A split criterion expressed through prefix accumulators over a sorted node.
pub(crate) trait SplitRule {
    type Stats;
    type Acc: Copy;

    /// Node summary, or `None` when the node must stay terminal.
    fn node_stats(&self, ids: &[usize]) -> Option<Self::Stats>;
    fn empty(&self) -> Self::Acc;
    fn push(&self, acc: &mut Self::Acc, id: usize, stats: &Self::Stats);
    /// Gain of sending the accumulated prefix left, or `None` if the split is inadmissible.
    fn gain(&self, left: &Self::Acc, n_left: usize, n: usize, stats: &Self::Stats) -> Option<f64>;
}

/// CART squared-error criterion.
pub(crate) struct RegressionRule<'y> {
    pub y: &'y [f64],
}

impl SplitRule for RegressionRule<'_> {
    type Stats = f64;
    type Acc = f64;

    fn node_stats(&self, ids: &[usize]) -> Option<f64> {
        if ids.len() < 2 {
            return None;
        }
        let first = self.y[ids[0]];
        if ids.iter().all(|&i| self.y[i] == first) {
            return None;
        }
        Some(ids.iter().map(|&i| self.y[i]).sum::<f64>() / ids.len() as f64)
    }

    fn empty(&self) -> f64 {
        0.0
    }

    #[inline]
    fn push(&self, acc: &mut f64, id: usize, mean: &f64) {
        *acc += self.y[id] - mean;
    }

    #[inline]
    fn gain(&self, left: &f64, n_left: usize, n: usize, _: &f64) -> Option<f64> {
        Some(regression_gain(*left, n_left, n))
    }
}

/// Relative gap below which two gains count as tied. Mathematically equal
/// gains reached through different summation orders differ in the last bits.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// Whether `g` beats the incumbent `best` by more than the tie tolerance.
#[inline]
pub fn improves(g: f64, best: f64) -> bool {
    g > best + TIE_TOLERANCE * g.abs().max(best.abs())
}

/// Scans every admissible position of direction `j` and updates `best`
/// when a larger gain (beyond the tie tolerance) is found.
pub(crate) fn scan_feature<R: SplitRule>(
    rule: &R,
    data: &Dataset,
    j: usize,
    sorted: &[usize],
    stats: &R::Stats,
    min_leaf: usize,
    best: &mut Option<SplitResult>,
) {
    let n = sorted.len();
    let col = data.column(j);
    let mut acc = rule.empty();
    for i in 1..n {
        let prev = sorted[i - 1];
        rule.push(&mut acc, prev, stats);
        let tau = col[prev];
        if tau == col[sorted[i]] || i < min_leaf || n - i < min_leaf {
            continue;
        }
        let Some(g) = rule.gain(&acc, i, n, stats) else { continue };
        if g.is_nan() {
            continue;
        }
        if best.is_none_or(|b| improves(g, b.gain)) {
            *best = Some(SplitResult { direction: j, order_index: i, threshold: tau, gain: g });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_dim(x: &[f64], y: &[f64]) -> Dataset {
        Dataset::from_columns(vec![x.to_vec()], y.to_vec(), None, None).unwrap()
    }

    #[test]
    fn singleton_children_have_zero_sse() {
        let data = one_dim(&[0.2, 0.8], &[1.0, 3.0]);
        let node = NodeData::root(&data, &data.y).unwrap();
        assert_eq!(split_sse(&node, 0, 1).unwrap(), 0.0);
    }

    #[test]
    fn step_data_sse_and_gain() {
        let data = one_dim(&[0.1, 0.2, 0.3, 0.4], &[0.0, 0.0, 10.0, 10.0]);
        let node = NodeData::root(&data, &data.y).unwrap();
        assert_eq!(split_sse(&node, 0, 2).unwrap(), 0.0);
        // child means 0 and 20/3: 2 (20/3)^2 + ... = 200/3
        assert!((split_sse(&node, 0, 1).unwrap() - 200.0 / 3.0).abs() < 1e-12);
        assert!((impurity_gain(&node, 0, 2).unwrap() - 100.0).abs() < 1e-12);
        assert!((impurity_gain(&node, 0, 1).unwrap() - 100.0 / 3.0).abs() < 1e-12);
        let best = best_split(&node, &[0]).unwrap().unwrap();
        assert_eq!((best.direction, best.order_index), (0, 2));
        assert!((best.gain - 100.0).abs() < 1e-12);
        assert_eq!(best.threshold, 0.2);
    }

    #[test]
    fn constant_response_has_no_split() {
        let data = one_dim(&[0.1, 0.5, 0.9], &[2.0, 2.0, 2.0]);
        let node = NodeData::root(&data, &data.y).unwrap();
        assert_eq!(impurity_gain(&node, 0, 1).unwrap(), 0.0);
        assert_eq!(impurity_gain(&node, 0, 2).unwrap(), 0.0);
        assert!(best_split(&node, &[0]).unwrap().is_none());
    }

    #[test]
    fn two_points_force_index_one() {
        let data = one_dim(&[0.7, 0.3], &[1.0, -1.0]);
        let node = NodeData::root(&data, &data.y).unwrap();
        let best = best_split(&node, &[0]).unwrap().unwrap();
        assert_eq!(best.order_index, 1);
        assert_eq!(best.threshold, 0.3);
    }

    #[test]
    fn single_point_and_identical_x_are_terminal() {
        let data = one_dim(&[0.4], &[1.0]);
        let node = NodeData::root(&data, &data.y).unwrap();
        assert!(best_split(&node, &[0]).unwrap().is_none());
        let data = one_dim(&[0.4, 0.4, 0.4], &[1.0, 2.0, 3.0]);
        let node = NodeData::root(&data, &data.y).unwrap();
        assert!(best_split(&node, &[0]).unwrap().is_none());
    }

    #[test]
    fn ties_are_skipped_and_rejected() {
        let data = one_dim(&[0.1, 0.5, 0.5, 0.9], &[0.0, 5.0, 1.0, 2.0]);
        let node = NodeData::root(&data, &data.y).unwrap();
        assert!(split_sse(&node, 0, 2).is_err());
        let best = best_split(&node, &[0]).unwrap().unwrap();
        assert_ne!(best.order_index, 2);
    }

    #[test]
    fn index_and_feature_errors() {
        let data = one_dim(&[0.1, 0.2, 0.3], &[0.0, 1.0, 0.0]);
        let node = NodeData::root(&data, &data.y).unwrap();
        assert!(split_sse(&node, 0, 0).is_err());
        assert!(split_sse(&node, 0, 3).is_err());
        assert!(impurity_gain(&node, 1, 1).is_err());
        assert!(best_split(&node, &[]).is_err());
        assert!(best_split(&node, &[4]).is_err());
    }

    #[test]
    fn equal_gains_prefer_smaller_direction() {
        // Both directions order the samples identically.
        let data = Dataset::from_columns(
            vec![vec![0.1, 0.2, 0.3, 0.4], vec![0.1, 0.2, 0.3, 0.4]],
            vec![0.0, 0.0, 1.0, 1.0],
            None,
            None,
        )
        .unwrap();
        let node = NodeData::root(&data, &data.y).unwrap();
        let best = best_split(&node, &[1, 0]).unwrap().unwrap();
        assert_eq!(best.direction, 0);
    }
}
