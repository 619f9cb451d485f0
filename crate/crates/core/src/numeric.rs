//! Small numeric helpers shared by the reduction paths.

/// Neumaier-compensated running sum.
///
/// Reductions over image disks and Monte Carlo estimators go through this so
/// the result depends only on the (fixed) traversal order.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_small_terms_lost_by_naive_sum() {
        let values = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(values), 2.0);
    }

    #[test]
    fn merge_matches_sequential() {
        let a: CompensatedSum = (0..100).map(|i| i as f64 * 0.1).collect();
        let b: CompensatedSum = (100..200).map(|i| i as f64 * 0.1).collect();
        let mut merged = a;
        merged.merge(&b);
        let all = compensated_sum((0..200).map(|i| i as f64 * 0.1));
        assert!((merged.value() - all).abs() < 1e-12);
    }
}
