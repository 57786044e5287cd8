//! Harrell's concordance index and ROC-AUC.
//!
//! Both come in two forms: a brute-force double loop, which is the
//! definition, and a sort-based O(n log n) form that must agree with it
//! count for count. Prediction ties score one half; pairs with equal times
//! are not comparable.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::SurvivalError;
use crate::survival::SurvivalRecord;

/// Pair counts behind a concordance index.
///
/// A pair `(i, j)` is comparable when `t_i > t_j` and `j` had the event. It
/// is concordant when the predicted hazard of `j` is higher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Concordance {
    pub concordant: u64,
    pub tied: u64,
    pub discordant: u64,
}

impl Concordance {
    pub fn pairs(&self) -> u64 {
        self.concordant + self.tied + self.discordant
    }

    /// `None` when there is no comparable pair.
    pub fn index(&self) -> Option<f64> {
        let pairs = self.pairs();
        if pairs == 0 {
            return None;
        }
        Some((self.concordant as f64 + 0.5 * self.tied as f64) / pairs as f64)
    }
}

fn check_len(expected: usize, got: usize) -> Result<(), SurvivalError> {
    if expected != got {
        return Err(SurvivalError::LengthMismatch { expected, got });
    }
    Ok(())
}

/// Concordance counts by direct enumeration of every ordered pair.
pub fn concordance_brute(f: &[f64], records: &[SurvivalRecord]) -> Result<Concordance, SurvivalError> {
    check_len(records.len(), f.len())?;
    let mut c = Concordance::default();
    for (j, rj) in records.iter().enumerate() {
        if !rj.event {
            continue;
        }
        for (i, ri) in records.iter().enumerate() {
            if i == j || ri.time <= rj.time {
                continue;
            }
            if f[i] < f[j] {
                c.concordant += 1;
            } else if f[i] == f[j] {
                c.tied += 1;
            } else {
                c.discordant += 1;
            }
        }
    }
    Ok(c)
}

/// Binary indexed tree over prediction ranks.
struct Fenwick {
    tree: Vec<u64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Self { tree: vec![0; n + 1] }
    }

    fn add(&mut self, rank: usize) {
        let mut i = rank + 1;
        while i < self.tree.len() {
            self.tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of inserted ranks `< rank`.
    fn count_below(&self, rank: usize) -> u64 {
        let mut i = rank;
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Dense ranks of `values`, equal values sharing a rank.
fn dense_ranks(values: &[f64]) -> (Vec<usize>, usize) {
    // +0.0 folds -0.0 into 0.0 so ranks agree with `==`.
    let mut sorted: Vec<f64> = values.iter().map(|v| v + 0.0).collect();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let ranks = values
        .iter()
        .map(|v| sorted.partition_point(|s| s.total_cmp(&(v + 0.0)) == Ordering::Less))
        .collect();
    (ranks, sorted.len())
}

/// Concordance counts in O(n log n): sweep from the latest time down,
/// querying each event against everything strictly later.
pub fn concordance(f: &[f64], records: &[SurvivalRecord]) -> Result<Concordance, SurvivalError> {
    check_len(records.len(), f.len())?;
    let (ranks, distinct) = dense_ranks(f);
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[b].time.total_cmp(&records[a].time));

    let mut tree = Fenwick::new(distinct);
    let mut inserted = 0u64;
    let mut c = Concordance::default();
    let mut start = 0;
    while start < order.len() {
        let t = records[order[start]].time;
        let mut end = start;
        while end < order.len() && records[order[end]].time == t {
            end += 1;
        }
        for &j in &order[start..end] {
            if !records[j].event {
                continue;
            }
            let below = tree.count_below(ranks[j]);
            let up_to = tree.count_below(ranks[j] + 1);
            c.concordant += below;
            c.tied += up_to - below;
            c.discordant += inserted - up_to;
        }
        for &i in &order[start..end] {
            tree.add(ranks[i]);
            inserted += 1;
        }
        start = end;
    }
    Ok(c)
}

/// Concordance over the records selected by `mask`.
pub fn concordance_subset(f: &[f64], records: &[SurvivalRecord], mask: &[bool]) -> Result<Concordance, SurvivalError> {
    check_len(records.len(), f.len())?;
    check_len(records.len(), mask.len())?;
    let (fs, rs): (Vec<f64>, Vec<SurvivalRecord>) = f
        .iter()
        .zip(records)
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|((fi, r), _)| (*fi, *r))
        .unzip();
    concordance(&fs, &rs)
}

/// Concordance index with its comparable-pair count; `None` without pairs.
pub fn c_index(f: &[f64], records: &[SurvivalRecord]) -> Result<Option<(f64, u64)>, SurvivalError> {
    let c = concordance(f, records)?;
    Ok(c.index().map(|v| (v, c.pairs())))
}

pub fn c_index_subset(
    f: &[f64],
    records: &[SurvivalRecord],
    mask: &[bool],
) -> Result<Option<(f64, u64)>, SurvivalError> {
    let c = concordance_subset(f, records, mask)?;
    Ok(c.index().map(|v| (v, c.pairs())))
}

/// Positive/negative pair counts behind an AUC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RankCounts {
    /// Pairs where the positive scores strictly higher.
    pub greater: u64,
    pub tied: u64,
    pub pairs: u64,
}

impl RankCounts {
    pub fn auc(&self) -> Option<f64> {
        if self.pairs == 0 {
            return None;
        }
        Some((self.greater as f64 + 0.5 * self.tied as f64) / self.pairs as f64)
    }
}

pub fn auc_counts_brute(scores: &[f64], labels: &[bool]) -> Result<RankCounts, SurvivalError> {
    check_len(labels.len(), scores.len())?;
    let mut c = RankCounts::default();
    for (sp, _) in scores.iter().zip(labels).filter(|(_, y)| **y) {
        for (sn, _) in scores.iter().zip(labels).filter(|(_, y)| !**y) {
            c.pairs += 1;
            if sp > sn {
                c.greater += 1;
            } else if sp == sn {
                c.tied += 1;
            }
        }
    }
    Ok(c)
}

/// Mann-Whitney counts via binary search into the sorted negatives.
pub fn auc_counts(scores: &[f64], labels: &[bool]) -> Result<RankCounts, SurvivalError> {
    check_len(labels.len(), scores.len())?;
    let mut negatives: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, y)| !**y)
        .map(|(s, _)| s + 0.0)
        .collect();
    negatives.sort_by(f64::total_cmp);
    let mut c = RankCounts::default();
    for (s, _) in scores.iter().zip(labels).filter(|(_, y)| **y) {
        let s = s + 0.0;
        let below = negatives.partition_point(|n| n.total_cmp(&s) == Ordering::Less) as u64;
        let up_to = negatives.partition_point(|n| n.total_cmp(&s) != Ordering::Greater) as u64;
        c.greater += below;
        c.tied += up_to - below;
        c.pairs += negatives.len() as u64;
    }
    Ok(c)
}

/// Area under the ROC curve; `None` when only one class is present.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<Option<f64>, SurvivalError> {
    Ok(auc_counts(scores, labels)?.auc())
}

/// Evaluation summary for one prediction vector.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricReport {
    pub auc: Option<f64>,
    /// Concordance over all records.
    pub c1: Option<f64>,
    /// Concordance over the subgroup of interest.
    pub c2: Option<f64>,
    pub n_pairs_c1: u64,
    pub n_pairs_c2: u64,
}

impl MetricReport {
    /// C1 over everything, C2 over `subgroup`, AUC against labels when asked.
    pub fn compute(
        f: &[f64],
        records: &[SurvivalRecord],
        subgroup: &[bool],
        with_auc: bool,
    ) -> Result<Self, SurvivalError> {
        let c1 = concordance(f, records)?;
        let c2 = concordance_subset(f, records, subgroup)?;
        let auc = if with_auc {
            let labels: Vec<bool> = records.iter().map(|r| r.label).collect();
            auc(f, &labels)?
        } else {
            None
        };
        Ok(Self {
            auc,
            c1: c1.index(),
            c2: c2.index(),
            n_pairs_c1: c1.pairs(),
            n_pairs_c2: c2.pairs(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recs(times: &[f64], events: &[bool]) -> Vec<SurvivalRecord> {
        times
            .iter()
            .zip(events)
            .enumerate()
            .map(|(i, (t, e))| SurvivalRecord::new(i as u64, *t, *e, *e))
            .collect()
    }

    #[test]
    fn c_index_examples() {
        let r = recs(&[1.0, 2.0, 3.0], &[true; 3]);
        assert_eq!(c_index(&[2.0, 1.0, 0.0], &r).unwrap(), Some((1.0, 3)));
        assert_eq!(c_index(&[0.0, 1.0, 2.0], &r).unwrap(), Some((0.0, 3)));
        let (v, n) = c_index(&[1.0, 2.0, 0.0], &r).unwrap().unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(n, 3);
    }

    #[test]
    fn constant_predictor_scores_half() {
        let r = recs(&[1.0, 2.0, 3.0, 4.0], &[true, false, true, true]);
        let (v, _) = c_index(&[0.3; 4], &r).unwrap().unwrap();
        assert_eq!(v, 0.5);
    }

    #[test]
    fn tied_times_are_not_comparable() {
        let r = recs(&[2.0, 2.0], &[true, true]);
        assert_eq!(c_index(&[0.0, 1.0], &r).unwrap(), None);
        assert_eq!(concordance_brute(&[0.0, 1.0], &r).unwrap().pairs(), 0);
    }

    #[test]
    fn subset_examples() {
        let r = recs(&[1.0, 2.0, 3.0], &[true; 3]);
        let f = [1.0, 2.0, 0.0];
        assert_eq!(c_index_subset(&f, &r, &[true; 3]).unwrap(), c_index(&f, &r).unwrap());
        assert_eq!(c_index_subset(&f, &r, &[false, true, false]).unwrap(), None);

        // Two diseased events, two healthy censored records.
        let mut r = recs(&[1.0, 2.0, 3.0, 4.0], &[true, true, false, false]);
        r[0].label = true;
        r[1].label = true;
        let f = [0.5, 0.9, 0.1, 0.0];
        let diseased: Vec<bool> = r.iter().map(|x| x.label).collect();
        // Only the pair (1 longer, 0 shorter event): f1 > f0, discordant.
        assert_eq!(c_index_subset(&f, &r, &diseased).unwrap(), Some((0.0, 1)));
        // All records: pairs with j=0: i=1 (disc), 2 (conc), 3 (conc); j=1: i=2, 3 (conc).
        assert_eq!(c_index(&f, &r).unwrap(), Some((0.8, 5)));
    }

    #[test]
    fn auc_examples() {
        let y = [true, false, true, false];
        assert_eq!(auc(&[0.9, 0.4, 0.6, 0.1], &y).unwrap(), Some(1.0));
        assert_eq!(auc(&[0.9, 0.6, 0.4, 0.1], &y).unwrap(), Some(0.75));
        assert_eq!(auc(&[0.2; 4], &y).unwrap(), Some(0.5));
        assert_eq!(auc(&[0.2, 0.3], &[true, true]).unwrap(), None);
    }

    #[test]
    fn negative_zero_ties_with_zero() {
        let r = recs(&[1.0, 2.0], &[true, true]);
        let c = concordance(&[0.0, -0.0], &r).unwrap();
        assert_eq!(c, concordance_brute(&[0.0, -0.0], &r).unwrap());
        assert_eq!(c.tied, 1);
        let a = auc_counts(&[0.0, -0.0], &[true, false]).unwrap();
        assert_eq!(a, auc_counts_brute(&[0.0, -0.0], &[true, false]).unwrap());
    }

    #[test]
    fn report_marks_missing_metrics_absent() {
        let r = recs(&[1.0, 2.0], &[false, false]);
        let m = MetricReport::compute(&[0.0, 1.0], &r, &[true, true], true).unwrap();
        assert_eq!(m.c1, None);
        assert_eq!(m.n_pairs_c1, 0);
        assert_eq!(m.auc, None);
    }
}
