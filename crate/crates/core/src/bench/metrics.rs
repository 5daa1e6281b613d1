use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Binary confusion matrix with positive = true leak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Confusion {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Confusion { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn add(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    /// `None` when nothing was predicted positive.
    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    /// `None` when there are no positives.
    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall; `None` when either is
    /// undefined, zero when both are zero.
    pub fn f1(&self) -> Option<f64> {
        let (p, r) = (self.precision()?, self.recall()?);
        Some(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    #[serde(flatten)]
    pub counts: Confusion,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

impl From<Confusion> for GroupMetrics {
    fn from(counts: Confusion) -> Self {
        GroupMetrics {
            counts,
            accuracy: counts.accuracy(),
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    #[serde(flatten)]
    pub overall: GroupMetrics,
    /// Entries left out of the matrix by the undetermined policy.
    pub excluded: u64,
    /// Dimension (`secret_type`, `language_group`) to group to metrics.
    pub breakdowns: BTreeMap<String, BTreeMap<String, GroupMetrics>>,
}

impl EvalMetrics {
    pub fn counts(&self) -> Confusion {
        self.overall.counts
    }

    pub fn from_groups(
        overall: Confusion,
        excluded: u64,
        groups: BTreeMap<String, BTreeMap<String, Confusion>>,
    ) -> Self {
        EvalMetrics {
            overall: overall.into(),
            excluded,
            breakdowns: groups
                .into_iter()
                .map(|(dim, g)| (dim, g.into_iter().map(|(k, c)| (k, c.into())).collect()))
                .collect(),
        }
    }
}
